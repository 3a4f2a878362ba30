//! Attributed control-flow graphs and their JSON exchange format.
//!
//! An [`Acfg`] carries seven per-block attributes plus three function-level
//! attributes. The same JSON schema is accepted as input, so graphs
//! produced by external disassemblers (ARM/MIPS images) can feed the
//! matcher directly:
//!
//! ```json
//! {
//!   "function_id": "f_1200",
//!   "blocks": [[0, 2, 1, 0, 5, 3, 2], [1, 0, 0, 1, 4, 2, 0]],
//!   "edges": [[0, 1]],
//!   "func_attrs": { "n_blocks": 2, "n_edges": 1, "n_variables": 3 }
//! }
//! ```
//!
//! Block arrays are `[n_string_consts, n_numeric_consts, n_transfer,
//! n_calls, n_instructions, n_arith, n_offspring]`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::cfg::Cfg;
use super::elf::ElfInfo;
use super::riscv::{InstrClass, Operand};

/// The seven block-level attributes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "[u64; 7]", try_from = "[u64; 7]")]
pub struct BlockAttr {
    pub n_string_consts: u64,
    pub n_numeric_consts: u64,
    pub n_transfer: u64,
    pub n_calls: u64,
    pub n_instructions: u64,
    pub n_arith: u64,
    pub n_offspring: u64,
}

impl BlockAttr {
    pub fn as_array(&self) -> [u64; 7] {
        (*self).into()
    }
}

impl From<BlockAttr> for [u64; 7] {
    fn from(a: BlockAttr) -> Self {
        [
            a.n_string_consts,
            a.n_numeric_consts,
            a.n_transfer,
            a.n_calls,
            a.n_instructions,
            a.n_arith,
            a.n_offspring,
        ]
    }
}

impl From<[u64; 7]> for BlockAttr {
    fn from(v: [u64; 7]) -> Self {
        BlockAttr {
            n_string_consts: v[0],
            n_numeric_consts: v[1],
            n_transfer: v[2],
            n_calls: v[3],
            n_instructions: v[4],
            n_arith: v[5],
            n_offspring: v[6],
        }
    }
}

/// The three function-level attributes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuncAttrs {
    pub n_blocks: u64,
    pub n_edges: u64,
    pub n_variables: u64,
}

/// One function's attributed CFG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Acfg {
    /// Symbol name, or a synthetic address label for stripped code.
    pub function_id: String,
    pub blocks: Vec<BlockAttr>,
    pub edges: Vec<(usize, usize)>,
    pub func_attrs: FuncAttrs,
}

impl Acfg {
    /// Check the structural invariants: attribute consistency, edge
    /// bounds, and the offspring counts.
    pub fn validate(&self) -> Result<(), String> {
        if self.func_attrs.n_blocks != self.blocks.len() as u64 {
            return Err(format!(
                "n_blocks {} != |blocks| {}",
                self.func_attrs.n_blocks,
                self.blocks.len()
            ));
        }
        if self.func_attrs.n_edges != self.edges.len() as u64 {
            return Err(format!(
                "n_edges {} != |edges| {}",
                self.func_attrs.n_edges,
                self.edges.len()
            ));
        }
        for &(a, b) in &self.edges {
            if a >= self.blocks.len() || b >= self.blocks.len() {
                return Err(format!("edge ({a},{b}) out of range"));
            }
        }
        let offspring = offspring_counts(self.blocks.len(), &self.edges);
        for (i, attr) in self.blocks.iter().enumerate() {
            if attr.n_offspring != offspring[i] {
                return Err(format!(
                    "block {i}: n_offspring {} != reachable {}",
                    attr.n_offspring, offspring[i]
                ));
            }
            for n in [attr.n_transfer, attr.n_calls, attr.n_arith] {
                if n > attr.n_instructions {
                    return Err(format!("block {i}: class count {n} exceeds instructions"));
                }
            }
        }
        Ok(())
    }
}

/// Number of blocks reachable from each block, excluding the block itself.
pub fn offspring_counts(n_blocks: usize, edges: &[(usize, usize)]) -> Vec<u64> {
    let mut succ = vec![Vec::new(); n_blocks];
    for &(a, b) in edges {
        succ[a].push(b);
    }
    (0..n_blocks)
        .map(|start| {
            let mut seen = vec![false; n_blocks];
            let mut stack: Vec<usize> = succ[start].clone();
            let mut count = 0u64;
            while let Some(v) = stack.pop() {
                if seen[v] {
                    continue;
                }
                seen[v] = true;
                if v != start {
                    count += 1;
                }
                stack.extend(succ[v].iter().copied());
            }
            count
        })
        .collect()
}

/// Compute the attributed CFG of a recovered function.
///
/// Constants from `imms` split into string/numeric by resolving them as
/// addresses into the ELF's read-only spans; without an ELF context every
/// distinct constant counts as numeric. Variables are the distinct
/// stack-pointer-relative offsets touched by loads and stores.
pub fn compute_acfg(cfg: &Cfg, function_id: &str, elf_context: Option<&ElfInfo>) -> Acfg {
    const SP: u8 = 2;
    let offspring = offspring_counts(cfg.blocks.len(), &cfg.edges);
    let mut sp_offsets: BTreeSet<i32> = BTreeSet::new();

    let blocks: Vec<BlockAttr> = cfg
        .blocks
        .iter()
        .enumerate()
        .map(|(i, block)| {
            let mut attr = BlockAttr {
                n_offspring: offspring[i],
                ..BlockAttr::default()
            };
            let mut consts: BTreeSet<i64> = BTreeSet::new();
            for ins in &block.instructions {
                attr.n_instructions += 1;
                match ins.class {
                    InstrClass::Transfer => attr.n_transfer += 1,
                    InstrClass::Call => attr.n_calls += 1,
                    InstrClass::Arith => attr.n_arith += 1,
                    InstrClass::Other => {}
                }
                consts.extend(ins.imms.iter().copied());
                for op in &ins.operands {
                    if let Operand::Mem { offset, base } = op {
                        if *base == SP && ins.mnemonic != "jalr" {
                            sp_offsets.insert(*offset);
                        }
                    }
                }
            }
            let n_string = match elf_context {
                Some(elf) => consts
                    .iter()
                    .filter(|&&v| v >= 0 && elf.in_readonly_span(v as u64))
                    .count() as u64,
                None => 0,
            };
            attr.n_string_consts = n_string;
            attr.n_numeric_consts = consts.len() as u64 - n_string;
            attr
        })
        .collect();

    Acfg {
        function_id: function_id.to_string(),
        func_attrs: FuncAttrs {
            n_blocks: blocks.len() as u64,
            n_edges: cfg.edges.len() as u64,
            n_variables: sp_offsets.len() as u64,
        },
        blocks,
        edges: cfg.edges.clone(),
    }
}

/// Parse one ACFG or a JSON array of them from exchange-format text,
/// validating invariants.
pub fn import_acfgs(json: &str) -> Result<Vec<Acfg>, String> {
    let value: serde_json::Value =
        serde_json::from_str(json).map_err(|e| format!("invalid JSON: {e}"))?;
    let list: Vec<Acfg> = if value.is_array() {
        serde_json::from_value(value).map_err(|e| format!("schema mismatch: {e}"))?
    } else {
        vec![serde_json::from_value(value).map_err(|e| format!("schema mismatch: {e}"))?]
    };
    for acfg in &list {
        acfg.validate()
            .map_err(|e| format!("{}: {e}", acfg.function_id))?;
    }
    Ok(list)
}
