//! Minimal ELF reader: section table, symbol tables, and the read-only
//! data spans that anchor string-constant classification.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ElfError {
    #[error("not an ELF image")]
    NotElf,
    #[error("malformed ELF: {0}")]
    Malformed(String),
}

/// Instruction-set architecture, as far as the pipeline distinguishes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    Riscv32,
    Arm,
    Mips,
    X86,
    Unknown,
}

impl std::fmt::Display for Arch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Arch::Riscv32 => "riscv32",
            Arch::Arm => "arm",
            Arch::Mips => "mips",
            Arch::X86 => "x86",
            Arch::Unknown => "unknown",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct Section {
    pub name: String,
    pub sh_type: u32,
    pub flags: u64,
    pub addr: u64,
    pub offset: u64,
    pub size: u64,
}

impl Section {
    const SHF_WRITE: u64 = 0x1;
    const SHF_ALLOC: u64 = 0x2;
    const SHF_EXECINSTR: u64 = 0x4;
    const SHT_PROGBITS: u32 = 1;
    const SHT_NOBITS: u32 = 8;

    /// Allocated, non-writable, non-executable data: where string
    /// literals live.
    pub fn is_readonly_data(&self) -> bool {
        self.sh_type == Self::SHT_PROGBITS
            && self.flags & Self::SHF_ALLOC != 0
            && self.flags & Self::SHF_WRITE == 0
            && self.flags & Self::SHF_EXECINSTR == 0
    }

    pub fn is_executable(&self) -> bool {
        self.flags & Self::SHF_EXECINSTR != 0 && self.sh_type != Self::SHT_NOBITS
    }
}

#[derive(Debug, Clone)]
pub struct Symbol {
    pub name: String,
    pub value: u64,
    pub size: u64,
    pub is_function: bool,
    pub defined: bool,
    /// From `.dynsym` rather than `.symtab`.
    pub dynamic: bool,
}

/// Parsed view of an ELF object.
#[derive(Debug, Clone)]
pub struct ElfInfo {
    pub arch: Arch,
    pub is_64: bool,
    pub little_endian: bool,
    pub entry: u64,
    pub sections: Vec<Section>,
    pub symbols: Vec<Symbol>,
    /// Virtual-address spans `[start, end)` of read-only data sections.
    pub readonly_spans: Vec<(u64, u64)>,
}

impl ElfInfo {
    pub fn in_readonly_span(&self, addr: u64) -> bool {
        self.readonly_spans
            .iter()
            .any(|&(lo, hi)| addr >= lo && addr < hi)
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    le: bool,
}

impl<'a> Reader<'a> {
    fn slice(&self, offset: u64, len: u64) -> Result<&'a [u8], ElfError> {
        let start = usize::try_from(offset)
            .map_err(|_| ElfError::Malformed(format!("offset {offset:#x} overflows")))?;
        let end = start
            .checked_add(len as usize)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| ElfError::Malformed(format!("range {offset:#x}+{len:#x} out of bounds")))?;
        Ok(&self.bytes[start..end])
    }

    fn u16(&self, offset: u64) -> Result<u16, ElfError> {
        let b = self.slice(offset, 2)?;
        let v = [b[0], b[1]];
        Ok(if self.le {
            u16::from_le_bytes(v)
        } else {
            u16::from_be_bytes(v)
        })
    }

    fn u32(&self, offset: u64) -> Result<u32, ElfError> {
        let b = self.slice(offset, 4)?;
        let v = [b[0], b[1], b[2], b[3]];
        Ok(if self.le {
            u32::from_le_bytes(v)
        } else {
            u32::from_be_bytes(v)
        })
    }

    fn u64(&self, offset: u64) -> Result<u64, ElfError> {
        let b = self.slice(offset, 8)?;
        let v: [u8; 8] = b.try_into().unwrap();
        Ok(if self.le {
            u64::from_le_bytes(v)
        } else {
            u64::from_be_bytes(v)
        })
    }

}

fn cstr_at(table: &[u8], index: usize) -> String {
    table
        .get(index..)
        .map(|rest| {
            let end = rest.iter().position(|&b| b == 0).unwrap_or(rest.len());
            String::from_utf8_lossy(&rest[..end]).into_owned()
        })
        .unwrap_or_default()
}

fn machine_to_arch(machine: u16, is_64: bool) -> Arch {
    match machine {
        0xF3 if !is_64 => Arch::Riscv32,
        0x28 => Arch::Arm,
        0x08 => Arch::Mips,
        0x03 | 0x3E => Arch::X86,
        _ => Arch::Unknown,
    }
}

/// Parse the ELF header, section table, and symbol tables.
pub fn parse_elf(bytes: &[u8]) -> Result<ElfInfo, ElfError> {
    if bytes.len() < 0x34 || &bytes[..4] != b"\x7fELF" {
        return Err(ElfError::NotElf);
    }
    let is_64 = match bytes[4] {
        1 => false,
        2 => true,
        c => return Err(ElfError::Malformed(format!("bad EI_CLASS {c}"))),
    };
    let le = match bytes[5] {
        1 => true,
        2 => false,
        d => return Err(ElfError::Malformed(format!("bad EI_DATA {d}"))),
    };
    let r = Reader { bytes, le };

    let machine = r.u16(18)?;
    let arch = machine_to_arch(machine, is_64);
    let (entry, shoff, shentsize_off, shnum_off, shstrndx_off) = if is_64 {
        (r.u64(24)?, r.u64(40)?, 58, 60, 62)
    } else {
        (r.u32(24)? as u64, r.u32(32)? as u64, 46, 48, 50)
    };
    let shentsize = r.u16(shentsize_off)? as u64;
    let shnum = r.u16(shnum_off)? as u64;
    let shstrndx = r.u16(shstrndx_off)? as u64;

    let mut raw_sections = Vec::new();
    if shoff != 0 {
        let min_entsize = if is_64 { 64 } else { 40 };
        if shentsize < min_entsize {
            return Err(ElfError::Malformed(format!("sh entry size {shentsize}")));
        }
        for i in 0..shnum {
            let base = shoff + i * shentsize;
            let name_off = r.u32(base)?;
            let sh_type = r.u32(base + 4)?;
            let (flags, addr, offset, size) = if is_64 {
                (
                    r.u64(base + 8)?,
                    r.u64(base + 16)?,
                    r.u64(base + 24)?,
                    r.u64(base + 32)?,
                )
            } else {
                (
                    r.u32(base + 8)? as u64,
                    r.u32(base + 12)? as u64,
                    r.u32(base + 16)? as u64,
                    r.u32(base + 20)? as u64,
                )
            };
            let link = r.u32(base + if is_64 { 40 } else { 24 })?;
            raw_sections.push((name_off, sh_type, flags, addr, offset, size, link));
        }
    }

    let shstrtab: &[u8] = match raw_sections.get(shstrndx as usize) {
        Some(&(_, sh_type, _, _, offset, size, _)) if sh_type != Section::SHT_NOBITS => {
            r.slice(offset, size)?
        }
        _ => &[],
    };

    let sections: Vec<Section> = raw_sections
        .iter()
        .map(|&(name_off, sh_type, flags, addr, offset, size, _)| Section {
            name: cstr_at(shstrtab, name_off as usize),
            sh_type,
            flags,
            addr,
            offset,
            size,
        })
        .collect();

    // Symbol tables: SHT_SYMTAB = 2, SHT_DYNSYM = 11.
    let mut symbols = Vec::new();
    for (i, &(_, sh_type, _, _, offset, size, link)) in raw_sections.iter().enumerate() {
        if sh_type != 2 && sh_type != 11 {
            continue;
        }
        let dynamic = sh_type == 11;
        let strtab = match raw_sections.get(link as usize) {
            Some(&(_, _, _, _, soff, ssize, _)) => r.slice(soff, ssize)?,
            None => {
                return Err(ElfError::Malformed(format!(
                    "symbol table {i} links to missing string table {link}"
                )))
            }
        };
        let entsize: u64 = if is_64 { 24 } else { 16 };
        let count = size / entsize;
        for j in 0..count {
            let base = offset + j * entsize;
            let (name_off, value, sym_size, info, shndx) = if is_64 {
                (
                    r.u32(base)?,
                    r.u64(base + 8)?,
                    r.u64(base + 16)?,
                    r.slice(base + 4, 1)?[0],
                    r.u16(base + 6)?,
                )
            } else {
                (
                    r.u32(base)?,
                    r.u32(base + 4)? as u64,
                    r.u32(base + 8)? as u64,
                    r.slice(base + 12, 1)?[0],
                    r.u16(base + 14)?,
                )
            };
            let name = cstr_at(strtab, name_off as usize);
            if name.is_empty() {
                continue;
            }
            symbols.push(Symbol {
                name,
                value,
                size: sym_size,
                is_function: info & 0xf == 2, // STT_FUNC
                defined: shndx != 0,          // SHN_UNDEF
                dynamic,
            });
        }
    }

    let readonly_spans = sections
        .iter()
        .filter(|s| s.is_readonly_data() && s.size > 0)
        .map(|s| (s.addr, s.addr + s.size))
        .collect();

    Ok(ElfInfo {
        arch,
        is_64,
        little_endian: le,
        entry,
        sections,
        symbols,
        readonly_spans,
    })
}

/// Defined function-type symbols from both symbol tables. Stripped
/// binaries yield the empty set.
pub fn extract_function_names(elf: &ElfInfo) -> BTreeSet<String> {
    elf.symbols
        .iter()
        .filter(|s| s.is_function && s.defined)
        .map(|s| s.name.clone())
        .collect()
}
