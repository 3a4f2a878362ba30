//! Basic-block recovery over decoded instruction regions.

use super::riscv::Instruction;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CfgError {
    /// The entry address points at a data word (or outside the region).
    #[error("entry {0:#x} does not decode to an instruction")]
    EmptyFunction(u64),
}

/// A maximal straight-line run of instructions.
#[derive(Debug, Clone)]
pub struct BasicBlock {
    /// Address of the first instruction.
    pub start: u64,
    pub instructions: Vec<Instruction>,
}

/// Control-flow graph of one function. Blocks are sorted by address;
/// edges index into `blocks`.
#[derive(Debug, Clone)]
pub struct Cfg {
    pub entry_block: usize,
    pub blocks: Vec<BasicBlock>,
    pub edges: Vec<(usize, usize)>,
}

/// Recover the CFG of the function entered at `entry`.
///
/// Blocks split at branch targets and after transfer instructions. Edges
/// are fallthroughs plus direct branch/jump targets; indirect jumps and
/// returns terminate a block with zero successors. Calls do not end a
/// block: the function extends over everything recursively reachable from
/// `entry` up to the return/indirect-jump frontier.
pub fn recover_cfg(instructions: &[Instruction], entry: u64) -> Result<Cfg, CfgError> {
    let index_of = |addr: u64| -> Option<usize> {
        let base = instructions.first()?.addr;
        if addr < base || !(addr - base).is_multiple_of(4) {
            return None;
        }
        let idx = ((addr - base) / 4) as usize;
        (idx < instructions.len() && !instructions[idx].is_data).then_some(idx)
    };

    let entry_idx = index_of(entry).ok_or(CfgError::EmptyFunction(entry))?;

    // Reachability walk. `leaders` marks instruction indices that start a
    // basic block: the entry, every followed branch target, and every
    // instruction after a transfer.
    let mut reachable = vec![false; instructions.len()];
    let mut leaders = vec![false; instructions.len()];
    let mut worklist = vec![entry_idx];
    leaders[entry_idx] = true;

    while let Some(idx) = worklist.pop() {
        if reachable[idx] {
            continue;
        }
        reachable[idx] = true;
        let ins = &instructions[idx];

        let mut push = |i: usize, leader: bool, worklist: &mut Vec<usize>| {
            if leader {
                leaders[i] = true;
            }
            if !reachable[i] {
                worklist.push(i);
            }
        };

        if ins.is_block_terminator() {
            if let Some(target) = ins.direct_target().and_then(index_of) {
                push(target, true, &mut worklist);
            }
            if !ins.is_unconditional() && !ins.is_indirect_jump() {
                // Conditional branch: the fallthrough starts a new block.
                if idx + 1 < instructions.len() && !instructions[idx + 1].is_data {
                    push(idx + 1, true, &mut worklist);
                }
            }
            // Instruction after any transfer is a leader even when only
            // reached from elsewhere.
            if idx + 1 < instructions.len() {
                leaders[idx + 1] = true;
            }
        } else if idx + 1 < instructions.len() && !instructions[idx + 1].is_data {
            push(idx + 1, false, &mut worklist);
        }
    }

    // Group reachable instructions into blocks.
    let mut blocks: Vec<BasicBlock> = Vec::new();
    let mut block_of = vec![usize::MAX; instructions.len()];
    for idx in 0..instructions.len() {
        if !reachable[idx] {
            continue;
        }
        let start_new = leaders[idx]
            || blocks.is_empty()
            || idx == 0
            || !reachable[idx - 1]
            || block_of[idx - 1] == usize::MAX;
        if start_new {
            blocks.push(BasicBlock {
                start: instructions[idx].addr,
                instructions: Vec::new(),
            });
        }
        let b = blocks.len() - 1;
        block_of[idx] = b;
        blocks[b].instructions.push(instructions[idx].clone());
    }

    // Block-level edges from each block's last instruction.
    let mut edges = Vec::new();
    for (b, block) in blocks.iter().enumerate() {
        let last = block.instructions.last().expect("blocks are non-empty");
        let last_idx = index_of(last.addr).expect("instruction in block");
        if last.is_block_terminator() {
            if let Some(t) = last.direct_target().and_then(index_of) {
                if block_of[t] != usize::MAX {
                    edges.push((b, block_of[t]));
                }
            }
            if !last.is_unconditional() && !last.is_indirect_jump() {
                if let Some(&f) = block_of.get(last_idx + 1) {
                    if f != usize::MAX {
                        edges.push((b, f));
                    }
                }
            }
        } else if let Some(&f) = block_of.get(last_idx + 1) {
            // Block ended because the next instruction is a leader.
            if f != usize::MAX {
                edges.push((b, f));
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();

    let entry_block = block_of[entry_idx];
    Ok(Cfg {
        entry_block,
        blocks,
        edges,
    })
}
