//! Minimal ELF32 writer for fixtures: .text, .rodata, static and
//! dynamic symbol tables.

#![allow(dead_code)]

pub const EM_RISCV: u16 = 0xF3;
pub const EM_ARM: u16 = 0x28;
pub const EM_MIPS: u16 = 0x08;
pub const EM_386: u16 = 0x03;

pub const TEXT_ADDR: u32 = 0x0001_0000;
pub const RODATA_ADDR: u32 = 0x0002_0000;

#[derive(Debug, Clone)]
pub struct SymbolSpec {
    pub name: String,
    pub value: u32,
    pub is_function: bool,
    pub dynamic: bool,
    /// Local-binding symbols (`.L` labels and friends).
    pub local: bool,
}

#[derive(Debug, Clone, Default)]
pub struct ElfBuilder {
    pub machine: u16,
    pub text: Vec<u8>,
    pub rodata: Vec<u8>,
    pub symbols: Vec<SymbolSpec>,
}

impl ElfBuilder {
    pub fn riscv32() -> Self {
        ElfBuilder {
            machine: EM_RISCV,
            ..Default::default()
        }
    }

    pub fn machine(machine: u16) -> Self {
        ElfBuilder {
            machine,
            ..Default::default()
        }
    }

    pub fn text(mut self, text: Vec<u8>) -> Self {
        self.text = text;
        self
    }

    /// NUL-separated string blob into .rodata; returns the vaddr of the
    /// first byte.
    pub fn add_rodata_strings(&mut self, strings: &[&str]) -> u32 {
        let addr = RODATA_ADDR + self.rodata.len() as u32;
        for s in strings {
            self.rodata.extend_from_slice(s.as_bytes());
            self.rodata.push(0);
        }
        addr
    }

    pub fn func(mut self, name: &str, offset: u32) -> Self {
        self.symbols.push(SymbolSpec {
            name: name.into(),
            value: TEXT_ADDR + offset,
            is_function: true,
            dynamic: false,
            local: false,
        });
        self
    }

    pub fn dyn_func(mut self, name: &str, offset: u32) -> Self {
        self.symbols.push(SymbolSpec {
            name: name.into(),
            value: TEXT_ADDR + offset,
            is_function: true,
            dynamic: true,
            local: false,
        });
        self
    }

    pub fn local_label(mut self, name: &str, offset: u32) -> Self {
        self.symbols.push(SymbolSpec {
            name: name.into(),
            value: TEXT_ADDR + offset,
            is_function: false,
            dynamic: false,
            local: true,
        });
        self
    }

    pub fn build(&self) -> Vec<u8> {
        // Section order: 0 NULL, 1 .text, 2 .rodata, 3 .symtab,
        // 4 .strtab, 5 .dynsym, 6 .dynstr, 7 .shstrtab.
        let ehsize = 52u32;
        let shentsize = 40u32;

        let static_syms: Vec<&SymbolSpec> = self.symbols.iter().filter(|s| !s.dynamic).collect();
        let dynamic_syms: Vec<&SymbolSpec> = self.symbols.iter().filter(|s| s.dynamic).collect();

        let mut strtab = vec![0u8];
        let mut symtab = vec![0u8; 16]; // null symbol
        for sym in &static_syms {
            let name_off = strtab.len() as u32;
            strtab.extend_from_slice(sym.name.as_bytes());
            strtab.push(0);
            symtab.extend_from_slice(&encode_sym(sym, name_off));
        }
        let mut dynstr = vec![0u8];
        let mut dynsym = vec![0u8; 16];
        for sym in &dynamic_syms {
            let name_off = dynstr.len() as u32;
            dynstr.extend_from_slice(sym.name.as_bytes());
            dynstr.push(0);
            dynsym.extend_from_slice(&encode_sym(sym, name_off));
        }

        let shstrtab_names = [
            "", ".text", ".rodata", ".symtab", ".strtab", ".dynsym", ".dynstr", ".shstrtab",
        ];
        let mut shstrtab = Vec::new();
        let mut name_offsets = Vec::new();
        for name in shstrtab_names {
            name_offsets.push(shstrtab.len() as u32);
            shstrtab.extend_from_slice(name.as_bytes());
            shstrtab.push(0);
        }

        // Sequential content layout after the ELF header.
        let mut offset = ehsize;
        let mut place = |len: usize| {
            let at = offset;
            offset += len as u32;
            at
        };
        let text_off = place(self.text.len());
        let rodata_off = place(self.rodata.len());
        let symtab_off = place(symtab.len());
        let strtab_off = place(strtab.len());
        let dynsym_off = place(dynsym.len());
        let dynstr_off = place(dynstr.len());
        let shstrtab_off = place(shstrtab.len());
        let shoff = offset;

        let mut out = Vec::new();
        // ELF header
        out.extend_from_slice(b"\x7fELF");
        out.push(1); // ELFCLASS32
        out.push(1); // little-endian
        out.push(1); // EV_CURRENT
        out.extend_from_slice(&[0u8; 9]);
        out.extend_from_slice(&2u16.to_le_bytes()); // ET_EXEC
        out.extend_from_slice(&self.machine.to_le_bytes());
        out.extend_from_slice(&1u32.to_le_bytes()); // e_version
        out.extend_from_slice(&TEXT_ADDR.to_le_bytes()); // e_entry
        out.extend_from_slice(&0u32.to_le_bytes()); // e_phoff
        out.extend_from_slice(&shoff.to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes()); // e_flags
        out.extend_from_slice(&(ehsize as u16).to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes()); // e_phentsize
        out.extend_from_slice(&0u16.to_le_bytes()); // e_phnum
        out.extend_from_slice(&(shentsize as u16).to_le_bytes());
        out.extend_from_slice(&8u16.to_le_bytes()); // e_shnum
        out.extend_from_slice(&7u16.to_le_bytes()); // e_shstrndx
        assert_eq!(out.len(), ehsize as usize);

        out.extend_from_slice(&self.text);
        out.extend_from_slice(&self.rodata);
        out.extend_from_slice(&symtab);
        out.extend_from_slice(&strtab);
        out.extend_from_slice(&dynsym);
        out.extend_from_slice(&dynstr);
        out.extend_from_slice(&shstrtab);

        // Section header table.
        let sh = |name: u32, sh_type: u32, flags: u32, addr: u32, off: u32, size: u32, link: u32, entsize: u32| {
            let mut h = Vec::with_capacity(40);
            h.extend_from_slice(&name.to_le_bytes());
            h.extend_from_slice(&sh_type.to_le_bytes());
            h.extend_from_slice(&flags.to_le_bytes());
            h.extend_from_slice(&addr.to_le_bytes());
            h.extend_from_slice(&off.to_le_bytes());
            h.extend_from_slice(&size.to_le_bytes());
            h.extend_from_slice(&link.to_le_bytes());
            h.extend_from_slice(&0u32.to_le_bytes()); // sh_info
            h.extend_from_slice(&4u32.to_le_bytes()); // sh_addralign
            h.extend_from_slice(&entsize.to_le_bytes());
            h
        };
        out.extend_from_slice(&sh(0, 0, 0, 0, 0, 0, 0, 0));
        out.extend_from_slice(&sh(name_offsets[1], 1, 0x2 | 0x4, TEXT_ADDR, text_off, self.text.len() as u32, 0, 0));
        out.extend_from_slice(&sh(name_offsets[2], 1, 0x2, RODATA_ADDR, rodata_off, self.rodata.len() as u32, 0, 0));
        out.extend_from_slice(&sh(name_offsets[3], 2, 0, 0, symtab_off, symtab.len() as u32, 4, 16));
        out.extend_from_slice(&sh(name_offsets[4], 3, 0, 0, strtab_off, strtab.len() as u32, 0, 0));
        out.extend_from_slice(&sh(name_offsets[5], 11, 0x2, 0, dynsym_off, dynsym.len() as u32, 6, 16));
        out.extend_from_slice(&sh(name_offsets[6], 3, 0x2, 0, dynstr_off, dynstr.len() as u32, 0, 0));
        out.extend_from_slice(&sh(name_offsets[7], 3, 0, 0, shstrtab_off, shstrtab.len() as u32, 0, 0));
        out
    }
}

fn encode_sym(sym: &SymbolSpec, name_off: u32) -> [u8; 16] {
    let mut e = [0u8; 16];
    e[0..4].copy_from_slice(&name_off.to_le_bytes());
    e[4..8].copy_from_slice(&sym.value.to_le_bytes());
    e[8..12].copy_from_slice(&0u32.to_le_bytes()); // st_size
    let bind: u8 = if sym.local { 0 } else { 1 };
    let kind: u8 = if sym.is_function { 2 } else { 0 };
    e[12] = (bind << 4) | kind;
    e[13] = 0;
    e[14..16].copy_from_slice(&1u16.to_le_bytes()); // st_shndx = .text
    e
}
