//! Shannon entropy over byte blocks, in bits per byte.

const BLOCK: usize = 4096;

fn block_entropy(bytes: &[u8]) -> f64 {
    if bytes.is_empty() {
        return 0.0;
    }
    let mut hist = [0u64; 256];
    for &b in bytes {
        hist[b as usize] += 1;
    }
    let n = bytes.len() as f64;
    hist.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Mean Shannon entropy over 4 KiB blocks, in `[0, 8]`.
pub fn mean_entropy(bytes: &[u8]) -> f64 {
    if bytes.is_empty() {
        return 0.0;
    }
    let blocks: Vec<f64> = bytes.chunks(BLOCK).map(block_entropy).collect();
    blocks.iter().sum::<f64>() / blocks.len() as f64
}
