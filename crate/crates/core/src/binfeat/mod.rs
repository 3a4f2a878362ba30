//! Feature extraction from binaries and monolithic blobs: string
//! literals, function names, and attributed control-flow graphs.

pub mod acfg;
pub mod cfg;
pub mod elf;
pub mod riscv;
pub mod strings;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use acfg::{compute_acfg, import_acfgs, Acfg, BlockAttr, FuncAttrs};
pub use cfg::{recover_cfg, BasicBlock, Cfg, CfgError};
pub use elf::{extract_function_names, parse_elf, Arch, ElfError, ElfInfo};
pub use riscv::{decode_instruction, decode_region, valid_instruction_ratio, InstrClass, Instruction};
pub use strings::{extract_strings, DEFAULT_MIN_STRING_LEN};

/// Syntactic and structural features of one binary (or of a whole image,
/// after merging).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BinaryFeatures {
    pub strings: BTreeSet<String>,
    pub function_names: BTreeSet<String>,
    pub acfgs: Vec<Acfg>,
}

impl BinaryFeatures {
    pub fn is_empty(&self) -> bool {
        self.strings.is_empty() && self.function_names.is_empty() && self.acfgs.is_empty()
    }

    /// Fold another object's features into this set. Function identifiers
    /// of incoming ACFGs are prefixed when they collide.
    pub fn merge(&mut self, other: BinaryFeatures) {
        self.strings.extend(other.strings);
        self.function_names.extend(other.function_names);
        let mut seen: BTreeSet<String> =
            self.acfgs.iter().map(|a| a.function_id.clone()).collect();
        for mut acfg in other.acfgs {
            if !seen.insert(acfg.function_id.clone()) {
                let mut n = 1usize;
                let renamed = loop {
                    let candidate = format!("{}#{n}", acfg.function_id);
                    if seen.insert(candidate.clone()) {
                        break candidate;
                    }
                    n += 1;
                };
                acfg.function_id = renamed;
            }
            self.acfgs.push(acfg);
        }
    }
}

/// Function entry points for disassembly: defined function symbols inside
/// executable sections when available, otherwise direct-call targets
/// discovered in a linear sweep (plus the region base).
fn discover_entries(instructions: &[Instruction], base: u64) -> Vec<u64> {
    let mut entries: BTreeSet<u64> = BTreeSet::new();
    if instructions.first().map(|i| !i.is_data).unwrap_or(false) {
        entries.insert(base);
    }
    for ins in instructions {
        if ins.class == InstrClass::Call && ins.mnemonic == "jal" {
            if let Some(t) = ins.direct_target() {
                entries.insert(t);
            }
        }
    }
    entries.into_iter().collect()
}

/// Extract features from a riscv32 ELF: strings over the whole file,
/// function names from symbol tables, and one ACFG per recovered function.
pub fn features_from_elf(bytes: &[u8], elf: &ElfInfo, min_string_len: usize) -> BinaryFeatures {
    let mut features = BinaryFeatures {
        strings: extract_strings(bytes, min_string_len),
        function_names: extract_function_names(elf),
        acfgs: Vec::new(),
    };

    if elf.arch != Arch::Riscv32 {
        // Other ISAs arrive through the ACFG exchange format instead.
        return features;
    }

    for section in elf.sections.iter().filter(|s| s.is_executable()) {
        let start = section.offset as usize;
        let end = start.saturating_add(section.size as usize);
        let Some(text) = bytes.get(start..end) else {
            continue;
        };
        let instructions = decode_region(text, section.addr);
        let span = section.addr..section.addr + section.size;

        let func_syms: Vec<(String, u64)> = elf
            .symbols
            .iter()
            .filter(|s| s.is_function && s.defined && span.contains(&s.value))
            .map(|s| (s.name.clone(), s.value))
            .collect();

        let entries: Vec<(String, u64)> = if func_syms.is_empty() {
            discover_entries(&instructions, section.addr)
                .into_iter()
                .map(|addr| (format!("f_{addr:x}"), addr))
                .collect()
        } else {
            func_syms
        };

        for (name, addr) in entries {
            if let Ok(cfg) = recover_cfg(&instructions, addr) {
                features.acfgs.push(compute_acfg(&cfg, &name, Some(elf)));
            }
        }
    }
    features
}

/// Extract features from a monolithic blob: strings plus ACFGs recovered
/// from a linear sweep with discovered call targets as entries.
pub fn features_from_blob(bytes: &[u8], load_base: u64, min_string_len: usize) -> BinaryFeatures {
    let instructions = decode_region(bytes, load_base);
    let mut features = BinaryFeatures {
        strings: extract_strings(bytes, min_string_len),
        function_names: BTreeSet::new(),
        acfgs: Vec::new(),
    };
    for addr in discover_entries(&instructions, load_base) {
        if let Ok(cfg) = recover_cfg(&instructions, addr) {
            features
                .acfgs
                .push(compute_acfg(&cfg, &format!("f_{addr:x}"), None));
        }
    }
    features
}
