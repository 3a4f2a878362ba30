//! RV32I instruction decoder.
//!
//! Fixed 4-byte little-endian words, base integer set only. Words that do
//! not decode to a valid RV32I encoding come back as data markers rather
//! than errors so a linear sweep over a monolithic blob is total.

use serde::{Deserialize, Serialize};

/// Coarse behavioural class of an instruction, used by the ACFG attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstrClass {
    /// Branches, unconditional jumps, and returns.
    Transfer,
    /// `jal`/`jalr` that write a link register.
    Call,
    /// Integer ALU operations, including `lui`/`auipc`.
    Arith,
    /// Loads, stores, fences, system instructions, data words.
    Other,
}

/// One operand as it appears in rendered assembly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operand {
    Reg(u8),
    Imm(i64),
    /// Memory reference `offset(base)`.
    Mem { offset: i32, base: u8 },
}

/// A decoded instruction (or a data word, when `is_data` is set).
#[derive(Debug, Clone, PartialEq)]
pub struct Instruction {
    /// Byte address of the word within its region.
    pub addr: u64,
    pub mnemonic: &'static str,
    pub operands: Vec<Operand>,
    pub class: InstrClass,
    /// Data constants materialized by the instruction: the (sign-extended)
    /// ALU immediate, `imm << 12` for `lui`, or the absolute `auipc`
    /// result. Control-flow targets and load/store offsets are not
    /// constants and are excluded.
    pub imms: Vec<i64>,
    /// The raw word did not decode; `mnemonic` is `".word"`.
    pub is_data: bool,
    /// Raw encoding.
    pub word: u32,
}

impl Instruction {
    fn new(addr: u64, word: u32, mnemonic: &'static str, class: InstrClass) -> Self {
        Instruction {
            addr,
            mnemonic,
            operands: Vec::new(),
            class,
            imms: Vec::new(),
            is_data: false,
            word,
        }
    }

    fn data(addr: u64, word: u32) -> Self {
        Instruction {
            addr,
            mnemonic: ".word",
            operands: vec![Operand::Imm(word as i64)],
            class: InstrClass::Other,
            imms: Vec::new(),
            is_data: true,
            word,
        }
    }

    /// Branch or jump target, when the instruction has a direct one.
    pub fn direct_target(&self) -> Option<u64> {
        match self.mnemonic {
            "jal" => {
                let off = jal_offset(self.word);
                Some(self.addr.wrapping_add(off as i64 as u64))
            }
            "beq" | "bne" | "blt" | "bge" | "bltu" | "bgeu" => {
                let off = branch_offset(self.word);
                Some(self.addr.wrapping_add(off as i64 as u64))
            }
            _ => None,
        }
    }

    /// True for any instruction that ends a basic block: branches, jumps,
    /// and returns. Calls fall through and do not terminate a block.
    pub fn is_block_terminator(&self) -> bool {
        matches!(self.class, InstrClass::Transfer)
    }

    /// Unconditional control transfer (no fallthrough successor).
    pub fn is_unconditional(&self) -> bool {
        matches!(self.mnemonic, "jal" | "jalr") && self.class == InstrClass::Transfer
    }

    /// Indirect jump or return: terminates a block with no successors.
    pub fn is_indirect_jump(&self) -> bool {
        self.mnemonic == "jalr" && self.class == InstrClass::Transfer
    }

    pub fn rd(&self) -> u8 {
        ((self.word >> 7) & 0x1f) as u8
    }

    pub fn rs1(&self) -> u8 {
        ((self.word >> 15) & 0x1f) as u8
    }
}

impl std::fmt::Display for Instruction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.mnemonic)?;
        for (i, op) in self.operands.iter().enumerate() {
            let sep = if i == 0 { " " } else { ", " };
            match op {
                Operand::Reg(r) => write!(f, "{sep}x{r}")?,
                Operand::Imm(v) => write!(f, "{sep}{v}")?,
                Operand::Mem { offset, base } => write!(f, "{sep}{offset}(x{base})")?,
            }
        }
        Ok(())
    }
}

fn bits(w: u32, hi: u32, lo: u32) -> u32 {
    (w >> lo) & ((1 << (hi - lo + 1)) - 1)
}

fn sign_extend(value: u32, bit_width: u32) -> i32 {
    let shift = 32 - bit_width;
    ((value << shift) as i32) >> shift
}

fn i_imm(w: u32) -> i32 {
    sign_extend(bits(w, 31, 20), 12)
}

fn s_imm(w: u32) -> i32 {
    sign_extend((bits(w, 31, 25) << 5) | bits(w, 11, 7), 12)
}

fn branch_offset(w: u32) -> i32 {
    let v = (bits(w, 31, 31) << 12)
        | (bits(w, 7, 7) << 11)
        | (bits(w, 30, 25) << 5)
        | (bits(w, 11, 8) << 1);
    sign_extend(v, 13)
}

fn jal_offset(w: u32) -> i32 {
    let v = (bits(w, 31, 31) << 20)
        | (bits(w, 19, 12) << 12)
        | (bits(w, 20, 20) << 11)
        | (bits(w, 30, 21) << 1);
    sign_extend(v, 21)
}

/// Decode one 32-bit word at `addr`.
///
/// Total: anything outside the RV32I base set yields a data marker.
/// `jal`/`jalr` writing a link register (`rd != x0`) classify as calls;
/// with `rd == x0` they are plain jumps/returns and classify as transfers.
pub fn decode_instruction(word: u32, addr: u64) -> Instruction {
    if word & 0x3 != 0x3 {
        // 16-bit compressed space or illegal all-zeros; not RV32I.
        return Instruction::data(addr, word);
    }
    let opcode = bits(word, 6, 0);
    let rd = bits(word, 11, 7) as u8;
    let rs1 = bits(word, 19, 15) as u8;
    let rs2 = bits(word, 24, 20) as u8;
    let funct3 = bits(word, 14, 12);
    let funct7 = bits(word, 31, 25);

    match opcode {
        0x37 | 0x17 => {
            // lui / auipc
            let (mn, konst) = if opcode == 0x37 {
                ("lui", (bits(word, 31, 12) as i64) << 12)
            } else {
                (
                    "auipc",
                    (addr as i64).wrapping_add((sign_extend(bits(word, 31, 12) << 12, 32)) as i64),
                )
            };
            let mut ins = Instruction::new(addr, word, mn, InstrClass::Arith);
            ins.operands = vec![Operand::Reg(rd), Operand::Imm(bits(word, 31, 12) as i64)];
            ins.imms = vec![konst];
            ins
        }
        0x6f => {
            let class = if rd == 0 {
                InstrClass::Transfer
            } else {
                InstrClass::Call
            };
            let mut ins = Instruction::new(addr, word, "jal", class);
            ins.operands = vec![Operand::Reg(rd), Operand::Imm(jal_offset(word) as i64)];
            ins
        }
        0x67 => {
            if funct3 != 0 {
                return Instruction::data(addr, word);
            }
            let class = if rd == 0 {
                InstrClass::Transfer
            } else {
                InstrClass::Call
            };
            let mut ins = Instruction::new(addr, word, "jalr", class);
            ins.operands = vec![
                Operand::Reg(rd),
                Operand::Mem {
                    offset: i_imm(word),
                    base: rs1,
                },
            ];
            ins
        }
        0x63 => {
            let mn = match funct3 {
                0 => "beq",
                1 => "bne",
                4 => "blt",
                5 => "bge",
                6 => "bltu",
                7 => "bgeu",
                _ => return Instruction::data(addr, word),
            };
            let mut ins = Instruction::new(addr, word, mn, InstrClass::Transfer);
            ins.operands = vec![
                Operand::Reg(rs1),
                Operand::Reg(rs2),
                Operand::Imm(branch_offset(word) as i64),
            ];
            ins
        }
        0x03 => {
            let mn = match funct3 {
                0 => "lb",
                1 => "lh",
                2 => "lw",
                4 => "lbu",
                5 => "lhu",
                _ => return Instruction::data(addr, word),
            };
            let mut ins = Instruction::new(addr, word, mn, InstrClass::Other);
            ins.operands = vec![
                Operand::Reg(rd),
                Operand::Mem {
                    offset: i_imm(word),
                    base: rs1,
                },
            ];
            ins
        }
        0x23 => {
            let mn = match funct3 {
                0 => "sb",
                1 => "sh",
                2 => "sw",
                _ => return Instruction::data(addr, word),
            };
            let mut ins = Instruction::new(addr, word, mn, InstrClass::Other);
            ins.operands = vec![
                Operand::Reg(rs2),
                Operand::Mem {
                    offset: s_imm(word),
                    base: rs1,
                },
            ];
            ins
        }
        0x13 => {
            let mn = match funct3 {
                0 => "addi",
                2 => "slti",
                3 => "sltiu",
                4 => "xori",
                6 => "ori",
                7 => "andi",
                1 => {
                    if funct7 != 0 {
                        return Instruction::data(addr, word);
                    }
                    "slli"
                }
                5 => match funct7 {
                    0x00 => "srli",
                    0x20 => "srai",
                    _ => return Instruction::data(addr, word),
                },
                _ => unreachable!(),
            };
            let imm = if matches!(mn, "slli" | "srli" | "srai") {
                rs2 as i64 // shamt
            } else {
                i_imm(word) as i64
            };
            let mut ins = Instruction::new(addr, word, mn, InstrClass::Arith);
            ins.operands = vec![Operand::Reg(rd), Operand::Reg(rs1), Operand::Imm(imm)];
            ins.imms = vec![imm];
            ins
        }
        0x33 => {
            let mn = match (funct7, funct3) {
                (0x00, 0) => "add",
                (0x20, 0) => "sub",
                (0x00, 1) => "sll",
                (0x00, 2) => "slt",
                (0x00, 3) => "sltu",
                (0x00, 4) => "xor",
                (0x00, 5) => "srl",
                (0x20, 5) => "sra",
                (0x00, 6) => "or",
                (0x00, 7) => "and",
                _ => return Instruction::data(addr, word),
            };
            let mut ins = Instruction::new(addr, word, mn, InstrClass::Arith);
            ins.operands = vec![Operand::Reg(rd), Operand::Reg(rs1), Operand::Reg(rs2)];
            ins
        }
        0x0f => {
            if funct3 != 0 {
                // fence.i and friends live in extensions.
                return Instruction::data(addr, word);
            }
            Instruction::new(addr, word, "fence", InstrClass::Other)
        }
        0x73 => match word {
            0x0000_0073 => Instruction::new(addr, word, "ecall", InstrClass::Other),
            0x0010_0073 => Instruction::new(addr, word, "ebreak", InstrClass::Other),
            _ => Instruction::data(addr, word),
        },
        _ => Instruction::data(addr, word),
    }
}

/// Linear sweep over a little-endian byte region, one decode per aligned
/// 4-byte word. Trailing bytes that do not fill a word are ignored.
pub fn decode_region(bytes: &[u8], base_addr: u64) -> Vec<Instruction> {
    bytes
        .chunks_exact(4)
        .enumerate()
        .map(|(i, chunk)| {
            let word = u32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
            decode_instruction(word, base_addr + (i as u64) * 4)
        })
        .collect()
}

/// Fraction of aligned words in `bytes` that decode as valid instructions.
/// Drives the monolithic-image probe in image identification.
pub fn valid_instruction_ratio(bytes: &[u8]) -> f64 {
    let total = bytes.len() / 4;
    if total == 0 {
        return 0.0;
    }
    let valid = decode_region(bytes, 0)
        .iter()
        .filter(|ins| !ins.is_data)
        .count();
    valid as f64 / total as f64
}
