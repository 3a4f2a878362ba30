//! Deterministic ACFG embedding and similarity.
//!
//! Replaces a learned graph-embedding network with an attribute
//! propagation that is order-invariant by construction: per-block
//! vectors are `log1p` of the seven attributes, each iteration averages
//! a block with its undirected neighbourhood, and the graph vector sums
//! the final block states and appends the three function-level
//! attributes. A learned embedding can drop in behind the same
//! interface.

use crate::binfeat::Acfg;
use crate::num::Scalar;

use super::MatchError;

/// Default number of propagation iterations.
pub const DEFAULT_EMBED_ITERATIONS: usize = 3;

/// Fixed-length graph embedding: 7 propagated block dimensions plus the
/// 3 function-level attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding<T = crate::Real> {
    pub vector: Vec<T>,
}

pub const EMBEDDING_LEN: usize = 10;

/// Cyclomatic complexity `e - b + 2` of one graph.
pub fn cyclomatic_complexity(acfg: &Acfg) -> i64 {
    acfg.func_attrs.n_edges as i64 - acfg.func_attrs.n_blocks as i64 + 2
}

/// Per-graph weights `CC_i / sum of CC_j`. The weights of a non-empty set sum
/// to 1; a non-positive total (impossible for connected graphs, where
/// `CC >= 1`) is refused.
pub fn cfg_weights<T: Scalar>(acfgs: &[Acfg]) -> Result<Vec<T>, MatchError> {
    let ccs: Vec<i64> = acfgs.iter().map(cyclomatic_complexity).collect();
    let total: i64 = ccs.iter().sum();
    if acfgs.is_empty() || total <= 0 {
        return Err(MatchError::DegenerateWeights { total });
    }
    let total_t = T::from_i64(total).unwrap();
    Ok(ccs
        .iter()
        .map(|&cc| T::from_i64(cc).unwrap() / total_t)
        .collect())
}

fn log1p_of<T: Scalar>(n: u64) -> T {
    (T::one() + T::from_u64(n).unwrap_or_else(T::max_value)).ln()
}

/// Sum that depends only on the multiset of summands, not their order:
/// sort (ascending, total order on finite floats), then fold. Keeps the
/// embedding bit-identical under block relabelling.
fn stable_sum<T: Scalar>(mut values: Vec<T>) -> T {
    values.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite embedding values"));
    values.into_iter().fold(T::zero(), |acc, v| acc + v)
}

/// Embed one ACFG with `iterations` propagation rounds.
///
/// With zero iterations the graph vector is the plain attribute sum, so
/// identical multisets of blocks embed identically; each round mixes in
/// neighbourhood structure. Permuting block indices (with edges
/// relabelled) never changes the result.
pub fn embed_acfg<T: Scalar>(acfg: &Acfg, iterations: usize) -> Embedding<T> {
    let n = acfg.blocks.len();
    // Undirected, deduplicated neighbourhoods; self-loops ignored.
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(a, b) in &acfg.edges {
        if a == b || a >= n || b >= n {
            continue;
        }
        if !neighbors[a].contains(&b) {
            neighbors[a].push(b);
        }
        if !neighbors[b].contains(&a) {
            neighbors[b].push(a);
        }
    }

    let x: Vec<[T; 7]> = acfg
        .blocks
        .iter()
        .map(|attr| {
            let raw = attr.as_array();
            std::array::from_fn(|j| log1p_of::<T>(raw[j]))
        })
        .collect();

    let mut state = x.clone();
    for _ in 0..iterations {
        let mut next = vec![[T::zero(); 7]; n];
        for v in 0..n {
            let denom = T::from_count(1 + neighbors[v].len());
            for j in 0..7 {
                let neighbor_sum =
                    stable_sum(neighbors[v].iter().map(|&u| state[u][j]).collect());
                next[v][j] = (x[v][j] + neighbor_sum) / denom;
            }
        }
        state = next;
    }

    let mut vector = vec![T::zero(); EMBEDDING_LEN];
    for (j, slot) in vector.iter_mut().enumerate().take(7) {
        *slot = stable_sum(state.iter().map(|s| s[j]).collect());
    }
    vector[7] = log1p_of::<T>(acfg.func_attrs.n_blocks);
    vector[8] = log1p_of::<T>(acfg.func_attrs.n_edges);
    vector[9] = log1p_of::<T>(acfg.func_attrs.n_variables);
    Embedding { vector }
}

/// `(1 + cosine) / 2`, mapped into `[0, 1]`. Two zero vectors are
/// defined to be identical (similarity 1); a zero against a non-zero
/// vector is indifferent (0.5).
pub fn acfg_similarity<T: Scalar>(a: &Embedding<T>, b: &Embedding<T>) -> Result<T, MatchError> {
    if a.vector.len() != b.vector.len() {
        return Err(MatchError::LengthMismatch {
            left: a.vector.len(),
            right: b.vector.len(),
        });
    }
    let dot = a
        .vector
        .iter()
        .zip(&b.vector)
        .map(|(&x, &y)| x * y)
        .fold(T::zero(), |acc, v| acc + v);
    let na = a
        .vector
        .iter()
        .map(|&x| x * x)
        .fold(T::zero(), |acc, v| acc + v)
        .sqrt();
    let nb = b
        .vector
        .iter()
        .map(|&x| x * x)
        .fold(T::zero(), |acc, v| acc + v)
        .sqrt();
    let two = T::from_count(2);
    let cosine = if na.is_zero() && nb.is_zero() {
        return Ok(T::one());
    } else if na.is_zero() || nb.is_zero() {
        T::zero()
    } else {
        // Clamp: rounding can push |cos| fractionally past 1.
        (dot / (na * nb)).min(T::one()).max(-T::one())
    };
    Ok((T::one() + cosine) / two)
}
