//! Context-word codec.
//!
//! A context word is the 32-bit configuration one RC cell executes during a
//! broadcast. The documented layout (see `docs/isa.md`):
//!
//! ```text
//! bits 31..16   reserved, must be zero
//! bits 15..12   opcode nibble: 0x0 NOP, 0x1 PASS, 0x9 CMUL, 0xA MULADD,
//!               0xE SUB, 0xF ADD
//! bits 11..0    CMUL/MULADD: 12-bit two's-complement immediate
//!               ADD/SUB/PASS: three select nibbles [src_a | src_b | dest]
//! ```
//!
//! Select nibbles: operand bus B = 0, operand bus A = 4, register file 0-3 =
//! 8-11, nearest neighbor N/E/S/W = 12-15. `src_a` may not select bus B and
//! `src_b` may not select bus A (each bus has a dedicated port mux); PASS is
//! unary, so its `src_b` nibble must be 0. Destination: output register = 0,
//! register file 0-3 = 8-11.
//!
//! `decode` accepts exactly the words `encode` can produce, so the pair is
//! bijective over the valid set; everything else decodes to an error.

use thiserror::Error;

/// Nearest-neighbor port, named from the receiving cell's point of view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    North,
    East,
    South,
    West,
}

/// Where an ALU input comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperandSelect {
    /// Operand bus A (driven from frame-buffer bank A during broadcasts).
    OperandBusA,
    /// Operand bus B (bank B, or zero for single-bank broadcasts).
    OperandBusB,
    /// One of the cell's four 16-bit registers.
    RegisterFile(u8),
    /// Output register of the adjacent cell in the given direction.
    NearestNeighbor(Direction),
}

/// Where the result goes. The output register is always updated; a register
/// file destination stores a copy there as well.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DestSelect {
    OutputRegister,
    RegisterFile(u8),
}

/// ALU operation selected by the opcode nibble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Opcode {
    Nop,
    Pass,
    Cmul,
    MulAdd,
    Sub,
    Add,
}

/// Decoded context word. `immediate` is meaningful only for CMUL/MULADD;
/// the select fields are meaningful only for ADD/SUB/PASS. The raw encoding
/// is recomputed by [`ContextWord::raw`], never stored, so a value cannot
/// disagree with its own encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ContextWord {
    pub opcode: Opcode,
    pub src_a: OperandSelect,
    pub src_b: OperandSelect,
    /// 12-bit signed constant, range [-2048, 2047].
    pub immediate: i16,
    pub dest: DestSelect,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("opcode nibble 0x{nibble:X} of word 0x{raw:08X} is not defined")]
    UnknownOpcode { raw: u32, nibble: u8 },
    #[error("word 0x{raw:08X} is not a valid encoding: {reason}")]
    InvalidEncoding { raw: u32, reason: &'static str },
    #[error("context word spec is not representable: {0}")]
    UnrepresentableSpec(String),
}

impl ContextWord {
    /// ADD from both operand buses to the output register (the vector-add
    /// word, raw 0x0000F400).
    pub fn add() -> Self {
        ContextWord {
            opcode: Opcode::Add,
            src_a: OperandSelect::OperandBusA,
            src_b: OperandSelect::OperandBusB,
            immediate: 0,
            dest: DestSelect::OutputRegister,
        }
    }

    /// SUB (bus A minus bus B) to the output register.
    pub fn sub() -> Self {
        ContextWord {
            opcode: Opcode::Sub,
            ..ContextWord::add()
        }
    }

    /// Constant multiply: out = immediate * bus A. Raw 0x00009000 | imm.
    pub fn cmul(immediate: i16) -> Self {
        ContextWord {
            opcode: Opcode::Cmul,
            immediate,
            ..ContextWord::add()
        }
    }

    /// Multiply-accumulate: accumulator += immediate * bus A.
    pub fn muladd(immediate: i16) -> Self {
        ContextWord {
            opcode: Opcode::MulAdd,
            immediate,
            ..ContextWord::add()
        }
    }

    /// The all-zero word; the cell does nothing.
    pub fn nop() -> Self {
        ContextWord {
            opcode: Opcode::Nop,
            ..ContextWord::add()
        }
    }

    /// Unary move of `src` to `dest`.
    pub fn pass(src: OperandSelect, dest: DestSelect) -> Self {
        ContextWord {
            opcode: Opcode::Pass,
            src_a: src,
            dest,
            ..ContextWord::add()
        }
    }

    /// Recompute this word's unique 32-bit encoding.
    pub fn raw(&self) -> Result<u32, CodecError> {
        encode_context_word(self)
    }
}

fn src_a_nibble(sel: OperandSelect) -> Result<u32, CodecError> {
    match sel {
        OperandSelect::OperandBusA => Ok(4),
        OperandSelect::OperandBusB => Err(CodecError::UnrepresentableSpec(
            "src_a cannot select operand bus B".into(),
        )),
        OperandSelect::RegisterFile(i) if i < 4 => Ok(8 + u32::from(i)),
        OperandSelect::RegisterFile(i) => Err(CodecError::UnrepresentableSpec(format!(
            "register file index {i} out of range (0-3)"
        ))),
        OperandSelect::NearestNeighbor(d) => Ok(12 + dir_code(d)),
    }
}

fn src_b_nibble(sel: OperandSelect) -> Result<u32, CodecError> {
    match sel {
        OperandSelect::OperandBusB => Ok(0),
        OperandSelect::OperandBusA => Err(CodecError::UnrepresentableSpec(
            "src_b cannot select operand bus A".into(),
        )),
        OperandSelect::RegisterFile(i) if i < 4 => Ok(8 + u32::from(i)),
        OperandSelect::RegisterFile(i) => Err(CodecError::UnrepresentableSpec(format!(
            "register file index {i} out of range (0-3)"
        ))),
        OperandSelect::NearestNeighbor(d) => Ok(12 + dir_code(d)),
    }
}

fn dest_nibble(sel: DestSelect) -> Result<u32, CodecError> {
    match sel {
        DestSelect::OutputRegister => Ok(0),
        DestSelect::RegisterFile(i) if i < 4 => Ok(8 + u32::from(i)),
        DestSelect::RegisterFile(i) => Err(CodecError::UnrepresentableSpec(format!(
            "register file index {i} out of range (0-3)"
        ))),
    }
}

fn dir_code(d: Direction) -> u32 {
    match d {
        Direction::North => 0,
        Direction::East => 1,
        Direction::South => 2,
        Direction::West => 3,
    }
}

fn opcode_nibble(op: Opcode) -> u32 {
    match op {
        Opcode::Nop => 0x0,
        Opcode::Pass => 0x1,
        Opcode::Cmul => 0x9,
        Opcode::MulAdd => 0xA,
        Opcode::Sub => 0xE,
        Opcode::Add => 0xF,
    }
}

/// Canonical field values for the parts an opcode class does not use. NOP and
/// the immediate ops require all-default selects; select ops require a zero
/// immediate. Without this, two distinct `ContextWord` values could claim the
/// same raw word and bijectivity would be lost.
fn check_canonical(spec: &ContextWord) -> Result<(), CodecError> {
    let canon = ContextWord::add();
    let sel_default = spec.src_a == canon.src_a && spec.src_b == canon.src_b;
    let dest_default = spec.dest == canon.dest;
    match spec.opcode {
        Opcode::Nop if !(sel_default && dest_default && spec.immediate == 0) => Err(
            CodecError::UnrepresentableSpec("NOP carries no operand fields".into()),
        ),
        Opcode::Cmul | Opcode::MulAdd if !(sel_default && dest_default) => {
            Err(CodecError::UnrepresentableSpec(
                "immediate ops read bus A and write the output register only".into(),
            ))
        }
        Opcode::Pass if spec.src_b != canon.src_b || spec.immediate != 0 => Err(
            CodecError::UnrepresentableSpec("PASS is unary and takes no immediate".into()),
        ),
        Opcode::Add | Opcode::Sub if spec.immediate != 0 => Err(CodecError::UnrepresentableSpec(
            "ADD/SUB take no immediate".into(),
        )),
        _ => Ok(()),
    }
}

/// Encode a context word. Errors if the immediate overflows 12 bits or the
/// operand selects are invalid for the opcode.
pub fn encode_context_word(spec: &ContextWord) -> Result<u32, CodecError> {
    check_canonical(spec)?;
    let op = opcode_nibble(spec.opcode) << 12;
    let low = match spec.opcode {
        Opcode::Nop => 0,
        Opcode::Cmul | Opcode::MulAdd => {
            if spec.immediate < -2048 || spec.immediate > 2047 {
                return Err(CodecError::UnrepresentableSpec(format!(
                    "immediate {} does not fit in 12 signed bits",
                    spec.immediate
                )));
            }
            (spec.immediate as u32) & 0x0FFF
        }
        Opcode::Add | Opcode::Sub | Opcode::Pass => {
            let a = src_a_nibble(spec.src_a)?;
            let b = src_b_nibble(spec.src_b)?;
            (a << 8) | (b << 4) | dest_nibble(spec.dest)?
        }
    };
    Ok(op | low)
}

fn decode_src_a(nibble: u32, raw: u32) -> Result<OperandSelect, CodecError> {
    match nibble {
        4 => Ok(OperandSelect::OperandBusA),
        8..=11 => Ok(OperandSelect::RegisterFile((nibble - 8) as u8)),
        12..=15 => Ok(OperandSelect::NearestNeighbor(decode_dir(nibble - 12))),
        _ => Err(CodecError::InvalidEncoding {
            raw,
            reason: "src_a nibble is not a defined select",
        }),
    }
}

fn decode_src_b(nibble: u32, raw: u32) -> Result<OperandSelect, CodecError> {
    match nibble {
        0 => Ok(OperandSelect::OperandBusB),
        8..=11 => Ok(OperandSelect::RegisterFile((nibble - 8) as u8)),
        12..=15 => Ok(OperandSelect::NearestNeighbor(decode_dir(nibble - 12))),
        _ => Err(CodecError::InvalidEncoding {
            raw,
            reason: "src_b nibble is not a defined select",
        }),
    }
}

fn decode_dest(nibble: u32, raw: u32) -> Result<DestSelect, CodecError> {
    match nibble {
        0 => Ok(DestSelect::OutputRegister),
        8..=11 => Ok(DestSelect::RegisterFile((nibble - 8) as u8)),
        _ => Err(CodecError::InvalidEncoding {
            raw,
            reason: "dest nibble is not a defined select",
        }),
    }
}

fn decode_dir(code: u32) -> Direction {
    match code {
        0 => Direction::North,
        1 => Direction::East,
        2 => Direction::South,
        _ => Direction::West,
    }
}

/// Sign-extend the low 12 bits.
fn imm12(raw: u32) -> i16 {
    (((raw & 0x0FFF) as i16) << 4) >> 4
}

/// Decode a raw context word. Rejects nonzero reserved bits, undefined opcode
/// nibbles, and select patterns `encode` could not have produced.
pub fn decode_context_word(raw: u32) -> Result<ContextWord, CodecError> {
    if raw & 0xFFFF_0000 != 0 {
        return Err(CodecError::InvalidEncoding {
            raw,
            reason: "reserved high bits are set",
        });
    }
    let nibble = ((raw >> 12) & 0xF) as u8;
    let low = raw & 0x0FFF;
    match nibble {
        0x0 => {
            if low != 0 {
                return Err(CodecError::InvalidEncoding {
                    raw,
                    reason: "NOP operand bits must be zero",
                });
            }
            Ok(ContextWord::nop())
        }
        0x9 => Ok(ContextWord::cmul(imm12(raw))),
        0xA => Ok(ContextWord::muladd(imm12(raw))),
        0x1 | 0xE | 0xF => {
            let src_a = decode_src_a((low >> 8) & 0xF, raw)?;
            let src_b_nib = (low >> 4) & 0xF;
            let dest = decode_dest(low & 0xF, raw)?;
            match nibble {
                0x1 => {
                    if src_b_nib != 0 {
                        return Err(CodecError::InvalidEncoding {
                            raw,
                            reason: "PASS src_b nibble must be zero",
                        });
                    }
                    Ok(ContextWord::pass(src_a, dest))
                }
                _ => {
                    let src_b = decode_src_b(src_b_nib, raw)?;
                    let opcode = if nibble == 0xE {
                        Opcode::Sub
                    } else {
                        Opcode::Add
                    };
                    Ok(ContextWord {
                        opcode,
                        src_a,
                        src_b,
                        immediate: 0,
                        dest,
                    })
                }
            }
        }
        _ => Err(CodecError::UnknownOpcode { raw, nibble }),
    }
}

/// Every select value `src_a` accepts. Useful for exhaustive enumeration.
pub fn all_src_a() -> Vec<OperandSelect> {
    let mut v = vec![OperandSelect::OperandBusA];
    v.extend((0..4).map(OperandSelect::RegisterFile));
    v.extend(all_dirs().map(OperandSelect::NearestNeighbor));
    v
}

/// Every select value `src_b` accepts.
pub fn all_src_b() -> Vec<OperandSelect> {
    let mut v = vec![OperandSelect::OperandBusB];
    v.extend((0..4).map(OperandSelect::RegisterFile));
    v.extend(all_dirs().map(OperandSelect::NearestNeighbor));
    v
}

/// Every destination select.
pub fn all_dests() -> Vec<DestSelect> {
    let mut v = vec![DestSelect::OutputRegister];
    v.extend((0..4).map(DestSelect::RegisterFile));
    v
}

fn all_dirs() -> impl Iterator<Item = Direction> {
    [
        Direction::North,
        Direction::East,
        Direction::South,
        Direction::West,
    ]
    .into_iter()
}
