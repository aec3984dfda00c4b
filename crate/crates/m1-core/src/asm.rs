//! Two-pass assembler and disassembler for the TinyRISC control-processor
//! subset the M1 listings use.
//!
//! Grammar: one statement per line, terminated by `;`; everything after the
//! `;` is a comment, as is a line containing only whitespace or only a
//! comment. Mnemonics are case-insensitive. Numeric literals are decimal, or
//! hex with a `0x` prefix. Registers are `r0`..`r15`. There are no labels:
//! every in-scope program is straight-line.
//!
//! Pass one parses statements and records source positions; pass two checks
//! arity and operand shape per mnemonic. The disassembler emits a canonical
//! form that re-assembles to an operand-for-operand identical program.

use std::fmt;

use thiserror::Error;

/// Instruction mnemonics. `Rbc` (row broadcast) is an extension used by
/// generated matrix kernels; the listings themselves use only the others.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mnemonic {
    Ldui,
    Ldli,
    Ldfb,
    Stfb,
    Ldctxt,
    Dbcdc,
    Sbc,
    Wfbi,
    Add,
    Rbc,
}

impl Mnemonic {
    pub fn name(self) -> &'static str {
        match self {
            Mnemonic::Ldui => "ldui",
            Mnemonic::Ldli => "ldli",
            Mnemonic::Ldfb => "ldfb",
            Mnemonic::Stfb => "stfb",
            Mnemonic::Ldctxt => "ldctxt",
            Mnemonic::Dbcdc => "dbcdc",
            Mnemonic::Sbc => "sbc",
            Mnemonic::Wfbi => "wfbi",
            Mnemonic::Add => "add",
            Mnemonic::Rbc => "rbc",
        }
    }

    fn from_token(tok: &str) -> Option<Mnemonic> {
        match tok.to_ascii_lowercase().as_str() {
            "ldui" => Some(Mnemonic::Ldui),
            "ldli" => Some(Mnemonic::Ldli),
            "ldfb" => Some(Mnemonic::Ldfb),
            "stfb" => Some(Mnemonic::Stfb),
            "ldctxt" => Some(Mnemonic::Ldctxt),
            "dbcdc" => Some(Mnemonic::Dbcdc),
            "sbc" => Some(Mnemonic::Sbc),
            "wfbi" => Some(Mnemonic::Wfbi),
            "add" => Some(Mnemonic::Add),
            "rbc" => Some(Mnemonic::Rbc),
            _ => None,
        }
    }

    /// Expected operand shape, one entry per operand position.
    /// `true` = register, `false` = integer.
    pub fn shape(self) -> &'static [bool] {
        const R: bool = true;
        const I: bool = false;
        match self {
            Mnemonic::Ldui | Mnemonic::Ldli => &[R, I],
            Mnemonic::Ldfb | Mnemonic::Stfb => &[R, I, I, I],
            Mnemonic::Ldctxt => &[R, I, I, I, I],
            Mnemonic::Dbcdc => &[R, I, I, I, I, I, I],
            Mnemonic::Sbc | Mnemonic::Rbc => &[I, I, I, I, I, I, I],
            Mnemonic::Wfbi => &[I, I, I, I, I],
            Mnemonic::Add => &[R, R, R],
        }
    }

    pub fn arity(self) -> usize {
        self.shape().len()
    }
}

/// A parsed operand: register index or unsigned integer literal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operand {
    Reg(u8),
    Imm(u32),
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Operand::Reg(r) => write!(f, "r{r}"),
            // Small values read naturally in decimal; addresses in hex.
            Operand::Imm(v) if v < 16 => write!(f, "{v}"),
            Operand::Imm(v) => write!(f, "0x{v:X}"),
        }
    }
}

/// One assembled instruction. Source position is carried for diagnostics but
/// ignored by equality: two programs are equal when their mnemonics and
/// operands match, regardless of formatting or line numbers.
#[derive(Debug, Clone, Eq)]
pub struct TrInstruction {
    pub mnemonic: Mnemonic,
    pub operands: Vec<Operand>,
    pub source_line: u32,
    pub source_text: String,
}

impl PartialEq for TrInstruction {
    fn eq(&self, other: &Self) -> bool {
        self.mnemonic == other.mnemonic && self.operands == other.operands
    }
}

impl TrInstruction {
    pub fn new(mnemonic: Mnemonic, operands: Vec<Operand>) -> Self {
        TrInstruction {
            mnemonic,
            operands,
            source_line: 0,
            source_text: String::new(),
        }
    }

    /// The architectural NOP is `add r0, r0, r0`.
    pub fn nop() -> Self {
        TrInstruction::new(
            Mnemonic::Add,
            vec![Operand::Reg(0), Operand::Reg(0), Operand::Reg(0)],
        )
    }

    pub fn is_nop(&self) -> bool {
        self.mnemonic == Mnemonic::Add
            && self.operands.iter().all(|op| matches!(op, Operand::Reg(0)))
    }

    /// Integer value of operand `i`; register operands yield their index.
    pub fn value(&self, i: usize) -> u32 {
        match self.operands[i] {
            Operand::Reg(r) => u32::from(r),
            Operand::Imm(v) => v,
        }
    }
}

impl fmt::Display for TrInstruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.mnemonic.name())?;
        for (i, op) in self.operands.iter().enumerate() {
            write!(f, "{}{op}", if i == 0 { " " } else { ", " })?;
        }
        write!(f, ";")
    }
}

/// An assembled program: a non-empty straight-line instruction sequence,
/// entry at index 0.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TrProgram {
    pub instructions: Vec<TrInstruction>,
}

impl TrProgram {
    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AsmError {
    #[error("line {line}: syntax error at '{token}'")]
    SyntaxError { line: u32, token: String },
    #[error("line {line}: '{mnemonic}' expects {expected} operands, found {found}")]
    ArityError {
        line: u32,
        mnemonic: String,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: unknown mnemonic '{token}'")]
    UnknownMnemonic { line: u32, token: String },
}

fn parse_operand(tok: &str, line: u32) -> Result<Operand, AsmError> {
    let syntax = || AsmError::SyntaxError {
        line,
        token: tok.to_string(),
    };
    let lower = tok.to_ascii_lowercase();
    if let Some(reg) = lower.strip_prefix('r') {
        // Registers are r0..r15; anything else starting with 'r' is noise.
        let idx: u8 = reg.parse().map_err(|_| syntax())?;
        if idx > 15 {
            return Err(syntax());
        }
        return Ok(Operand::Reg(idx));
    }
    let value = if let Some(hex) = lower.strip_prefix("0x") {
        u32::from_str_radix(hex, 16)
    } else {
        lower.parse()
    };
    value.map(Operand::Imm).map_err(|_| syntax())
}

/// Assemble source text into a program. Errors carry 1-based line numbers.
pub fn assemble(source: &str) -> Result<TrProgram, AsmError> {
    let mut instructions = Vec::new();
    for (idx, raw_line) in source.lines().enumerate() {
        let line = idx as u32 + 1;
        let trimmed = raw_line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let stmt = match trimmed.split_once(';') {
            Some((stmt, _comment)) => stmt.trim(),
            None => {
                return Err(AsmError::SyntaxError {
                    line,
                    token: "missing ';'".to_string(),
                })
            }
        };
        if stmt.is_empty() {
            // Comment-only line.
            continue;
        }
        let (mnem_tok, rest) = match stmt.split_once(char::is_whitespace) {
            Some((m, r)) => (m, r.trim()),
            None => (stmt, ""),
        };
        let mnemonic = Mnemonic::from_token(mnem_tok).ok_or_else(|| AsmError::UnknownMnemonic {
            line,
            token: mnem_tok.to_string(),
        })?;
        let mut operands = Vec::new();
        if !rest.is_empty() {
            for tok in rest.split(',') {
                let tok = tok.trim();
                if tok.is_empty() {
                    return Err(AsmError::SyntaxError {
                        line,
                        token: rest.to_string(),
                    });
                }
                operands.push(parse_operand(tok, line)?);
            }
        }
        let shape = mnemonic.shape();
        if operands.len() != shape.len() {
            return Err(AsmError::ArityError {
                line,
                mnemonic: mnemonic.name().to_string(),
                expected: shape.len(),
                found: operands.len(),
            });
        }
        for (op, &want_reg) in operands.iter().zip(shape) {
            let is_reg = matches!(op, Operand::Reg(_));
            if is_reg != want_reg {
                return Err(AsmError::SyntaxError {
                    line,
                    token: op.to_string(),
                });
            }
        }
        instructions.push(TrInstruction {
            mnemonic,
            operands,
            source_line: line,
            source_text: stmt.to_string(),
        });
    }
    if instructions.is_empty() {
        return Err(AsmError::SyntaxError {
            line: 1,
            token: "empty program".to_string(),
        });
    }
    Ok(TrProgram { instructions })
}

/// Emit the canonical textual form. Byte-stable: the same program always
/// produces the same text, and `assemble(disassemble(p)) == p`.
pub fn disassemble(program: &TrProgram) -> String {
    let mut out = String::new();
    for instr in &program.instructions {
        out.push_str(&instr.to_string());
        out.push('\n');
    }
    out
}
