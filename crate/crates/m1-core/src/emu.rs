//! Instruction-by-instruction execution of TinyRISC programs against full
//! machine state, with exact cycle counting.
//!
//! Cycle convention: every executed instruction costs one cycle, no-ops
//! included; array broadcasts and frame-buffer writebacks complete inside
//! their triggering instruction's cycle. DMA transfers (`ldfb`, `stfb`,
//! `ldctxt`) move their data immediately but occupy the single DMA engine for
//! a latency window; an instruction that needs the engine or the data region
//! while the window is open is a deterministic `DmaHazard`, never silent
//! corruption. The window for frame-buffer traffic is `cycles_per_word x
//! count`; context loads pay 2 extra setup cycles. An instruction issued at
//! the exact cycle the window closes is legal (the check is strictly
//! `cycle < completes_at`).
//!
//! Frame-buffer images are corner-turned: vector element `e` lives at byte
//! `0x40*(e/8) + 2*(e%8)` of its bank, so elements `8c..8c+7` occupy column
//! block `c` and a column broadcast at offset `0x40*c` hands row `r` element
//! `8c+r`. `stfb` applies the inverse gather, so round-tripping a vector
//! through the frame buffer is the identity on main memory.

use serde::Serialize;
use thiserror::Error;

use crate::asm::{Mnemonic, Operand, TrInstruction, TrProgram};
use crate::context::{decode_context_word, ContextWord, OperandSelect};
use crate::machine::{
    cell_execute, Bank, BroadcastMode, DmaResource, MachineState, PendingDma, GRID,
};

/// Environment variable the CLI honors for overriding the DMA cost.
pub const DMA_CYCLES_ENV: &str = "M1_DMA_CYCLES_PER_WORD";

/// Default DMA cost: 2 cycles per transferred word.
pub const DEFAULT_DMA_CYCLES_PER_WORD: u64 = 2;

/// DMA latency model. `cycles_per_word` is the engine cost of one transfer
/// unit: a 64-bit frame-buffer beat or one 32-bit context word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DmaConfig {
    pub cycles_per_word: u64,
}

impl Default for DmaConfig {
    fn default() -> Self {
        DmaConfig {
            cycles_per_word: DEFAULT_DMA_CYCLES_PER_WORD,
        }
    }
}

impl DmaConfig {
    pub fn new(cycles_per_word: u64) -> Self {
        DmaConfig { cycles_per_word }
    }

    /// Read the override from the environment; unset means the default.
    /// Zero is rejected: a zero-latency engine would make every transfer
    /// window empty and the hazard model vacuous.
    pub fn from_env() -> Result<DmaConfig, String> {
        match std::env::var(DMA_CYCLES_ENV) {
            Ok(text) => match text.trim().parse::<u64>() {
                Ok(0) | Err(_) => Err(format!(
                    "{DMA_CYCLES_ENV} must be an integer >= 1, got '{text}'"
                )),
                Ok(w) => Ok(DmaConfig::new(w)),
            },
            Err(_) => Ok(DmaConfig::default()),
        }
    }

    /// Engine-busy window for a frame-buffer transfer of `beats` 64-bit beats.
    pub fn fb_window(&self, beats: u32) -> u64 {
        self.cycles_per_word * u64::from(beats)
    }

    /// Engine-busy window for a context load of `words` 32-bit words
    /// (2 fixed setup cycles plus the per-word cost).
    pub fn ctx_window(&self, words: u32) -> u64 {
        2 + self.cycles_per_word * u64::from(words)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmuError {
    #[error("instruction {index}: DMA hazard: {detail}")]
    DmaHazard { index: usize, detail: String },
    #[error("instruction {index}: address fault: {detail}")]
    AddressFault { index: usize, detail: String },
    #[error("instruction {index}: context fault: {detail}")]
    ContextFault { index: usize, detail: String },
    #[error("instruction {index}: unsupported context word: {detail}")]
    UnsupportedContext { index: usize, detail: String },
    #[error("instruction {index}: bad operand: {detail}")]
    BadOperand { index: usize, detail: String },
}

impl EmuError {
    pub fn index(&self) -> usize {
        match *self {
            EmuError::DmaHazard { index, .. }
            | EmuError::AddressFault { index, .. }
            | EmuError::ContextFault { index, .. }
            | EmuError::UnsupportedContext { index, .. }
            | EmuError::BadOperand { index, .. } => index,
        }
    }
}

/// One executed instruction, for the JSON-lines trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceRecord {
    pub index: usize,
    pub cycle: u64,
    pub mnemonic: &'static str,
    pub detail: String,
}

/// Complete per-run trace; one record per executed instruction.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExecTrace {
    pub records: Vec<TraceRecord>,
}

impl ExecTrace {
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("trace records always serialize"));
            out.push('\n');
        }
        out
    }
}

/// Byte offset of vector element `e` within a corner-turned frame-buffer
/// image based at byte `base`.
pub fn element_fb_offset(base: u32, e: u32) -> u64 {
    u64::from(base) + u64::from(e / 8) * 0x40 + u64::from(e % 8) * 2
}

/// Run a whole program. Returns the final state and the execution trace;
/// `cycle_counter` ends equal to the number of executed instructions.
pub fn run(
    program: &TrProgram,
    initial: MachineState,
    cfg: DmaConfig,
) -> Result<(MachineState, ExecTrace), EmuError> {
    let mut state = initial;
    let mut records = Vec::with_capacity(program.len());
    for (index, instr) in program.instructions.iter().enumerate() {
        let cycle = state.tinyrisc.cycle_counter;
        let detail = execute(&mut state, instr, index, cfg)?;
        records.push(TraceRecord {
            index,
            cycle,
            mnemonic: instr.mnemonic.name(),
            detail,
        });
        state.tinyrisc.cycle_counter = cycle + 1;
        state.tinyrisc.pc = index + 1;
    }
    Ok((state, ExecTrace { records }))
}

/// Execute a single instruction against a state, as `run` would at the
/// state's current cycle and program counter.
pub fn step(
    state: MachineState,
    instr: &TrInstruction,
    cfg: DmaConfig,
) -> Result<MachineState, EmuError> {
    let mut next = state;
    let index = next.tinyrisc.pc;
    execute(&mut next, instr, index, cfg)?;
    next.tinyrisc.cycle_counter += 1;
    next.tinyrisc.pc = index + 1;
    Ok(next)
}

fn reg_index(op: Operand) -> u8 {
    match op {
        Operand::Reg(r) => r,
        Operand::Imm(_) => unreachable!("assembler guarantees register operands"),
    }
}

fn narrow_fb_addr(addr: u64, index: usize) -> Result<u32, EmuError> {
    u32::try_from(addr).map_err(|_| EmuError::AddressFault {
        index,
        detail: format!("frame-buffer byte address 0x{addr:X} overflows the address space"),
    })
}

/// Resolve one ALU input from the broadcast buses or the cell's registers.
/// Nearest-neighbor selects are rejected before execution reaches here.
fn resolve(sel: OperandSelect, cell_regs: &[i16; 4], bus_a: i16, bus_b: i16) -> i16 {
    match sel {
        OperandSelect::OperandBusA => bus_a,
        OperandSelect::OperandBusB => bus_b,
        OperandSelect::RegisterFile(i) => cell_regs[usize::from(i)],
        OperandSelect::NearestNeighbor(_) => unreachable!("rejected before resolve"),
    }
}

fn uses_nearest_neighbor(cw: &ContextWord) -> bool {
    matches!(cw.src_a, OperandSelect::NearestNeighbor(_))
        || matches!(cw.src_b, OperandSelect::NearestNeighbor(_))
}

/// Fetch and decode the context word a broadcast will execute. The effective
/// word index wraps modulo the block's loaded length, so a block holding a
/// single word serves every index.
fn fetch_context(
    state: &MachineState,
    plane: u32,
    block: u32,
    cw_idx: u32,
    index: usize,
) -> Result<(u32, ContextWord), EmuError> {
    if plane > 1 || block >= GRID as u32 {
        return Err(EmuError::BadOperand {
            index,
            detail: format!("context plane {plane} / block {block} out of range"),
        });
    }
    let len = state.ctx.loaded_len(plane, block);
    if len == 0 {
        return Err(EmuError::ContextFault {
            index,
            detail: format!("plane {plane} block {block} has no loaded context words"),
        });
    }
    let word = cw_idx % len;
    let raw = state
        .ctx
        .read(plane, block, word)
        .map_err(|e| EmuError::ContextFault {
            index,
            detail: e.to_string(),
        })?;
    let cw = decode_context_word(raw).map_err(|e| EmuError::ContextFault {
        index,
        detail: format!("loaded word is not executable: {e}"),
    })?;
    if uses_nearest_neighbor(&cw) {
        return Err(EmuError::UnsupportedContext {
            index,
            detail: "nearest-neighbor operand routing is not implemented".to_string(),
        });
    }
    Ok((word, cw))
}

fn check_set(set: u32, index: usize) -> Result<u32, EmuError> {
    if set > 1 {
        return Err(EmuError::BadOperand {
            index,
            detail: format!("frame-buffer set {set} out of range (0-1)"),
        });
    }
    Ok(set)
}

/// Map a 1-based single-bank selector (as printed in the broadcast listings)
/// to a bank.
fn one_based_bank(value: u32, index: usize) -> Result<Bank, EmuError> {
    match value {
        1 => Ok(Bank::A),
        2 => Ok(Bank::B),
        _ => Err(EmuError::BadOperand {
            index,
            detail: format!("bank selector {value} out of range (1 = A, 2 = B)"),
        }),
    }
}

/// Hazard check: which pending-DMA resources would this instruction touch?
/// DMA instructions need the engine itself, so they conflict with any open
/// window; broadcasts and writebacks conflict only with windows over the
/// regions they read or write.
fn dma_conflict(instr: &TrInstruction, pending: &PendingDma) -> bool {
    match instr.mnemonic {
        Mnemonic::Ldfb | Mnemonic::Stfb | Mnemonic::Ldctxt => true,
        Mnemonic::Dbcdc => {
            pending.resource == DmaResource::Context
                || pending.resource == DmaResource::FbSet(instr.value(1))
        }
        Mnemonic::Sbc | Mnemonic::Rbc => {
            pending.resource == DmaResource::Context
                || pending.resource == DmaResource::FbSet(instr.value(1))
        }
        Mnemonic::Wfbi => pending.resource == DmaResource::FbSet(instr.value(3)),
        Mnemonic::Ldui | Mnemonic::Ldli | Mnemonic::Add => false,
    }
}

/// Execute one instruction in place at the state's current cycle. Returns the
/// trace detail. Does not advance the cycle counter or pc; `run`/`step` do.
fn execute(
    state: &mut MachineState,
    instr: &TrInstruction,
    index: usize,
    cfg: DmaConfig,
) -> Result<String, EmuError> {
    let now = state.tinyrisc.cycle_counter;

    // Retire an elapsed window, then check the survivor for conflicts.
    if let Some(p) = state.tinyrisc.pending_dma {
        if now >= p.completes_at_cycle {
            state.tinyrisc.pending_dma = None;
        }
    }
    if let Some(p) = state.tinyrisc.pending_dma {
        if dma_conflict(instr, &p) {
            return Err(EmuError::DmaHazard {
                index,
                detail: format!(
                    "'{}' at cycle {now} needs {:?}, busy until cycle {}",
                    instr.mnemonic.name(),
                    p.resource,
                    p.completes_at_cycle
                ),
            });
        }
    }

    let fb_fault = |e: crate::machine::FbFault| EmuError::AddressFault {
        index,
        detail: e.to_string(),
    };

    match instr.mnemonic {
        Mnemonic::Ldui | Mnemonic::Ldli => {
            let reg = reg_index(instr.operands[0]);
            let imm = instr.value(1);
            if imm > 0xFFFF {
                return Err(EmuError::BadOperand {
                    index,
                    detail: format!("immediate 0x{imm:X} does not fit in 16 bits"),
                });
            }
            let value = if instr.mnemonic == Mnemonic::Ldui {
                imm << 16
            } else {
                imm
            };
            state.tinyrisc.set_reg(reg, value);
            Ok(format!("r{reg} = 0x{:08X}", state.tinyrisc.reg(reg)))
        }

        Mnemonic::Ldfb => {
            let base = state.tinyrisc.reg(reg_index(instr.operands[0]));
            let bank = match instr.value(1) {
                0 => Bank::A,
                1 => Bank::B,
                other => {
                    return Err(EmuError::BadOperand {
                        index,
                        detail: format!("bank selector {other} out of range (0 = A, 1 = B)"),
                    })
                }
            };
            let fb_offset = instr.value(2);
            let count = instr.value(3);
            for beat in 0..count {
                for k in 0..4 {
                    let e = beat * 4 + k;
                    let value = state.mem.read16(base.wrapping_add(8 * beat + 2 * k));
                    let addr = narrow_fb_addr(element_fb_offset(fb_offset, e), index)?;
                    state.fb.write16(0, bank, addr, value).map_err(fb_fault)?;
                }
            }
            let window = cfg.fb_window(count);
            state.tinyrisc.pending_dma = Some(PendingDma {
                completes_at_cycle: now + window,
                resource: DmaResource::FbSet(0),
            });
            Ok(format!(
                "{} bytes from 0x{base:X} -> set 0 bank {bank:?} +0x{fb_offset:X}; engine busy until cycle {}",
                8 * count,
                now + window
            ))
        }

        Mnemonic::Stfb => {
            let base = state.tinyrisc.reg(reg_index(instr.operands[0]));
            let set = check_set(instr.value(1), index)?;
            let fb_offset = instr.value(2);
            let count = instr.value(3);
            for beat in 0..count {
                for k in 0..4 {
                    let e = beat * 4 + k;
                    let addr = narrow_fb_addr(element_fb_offset(fb_offset, e), index)?;
                    let value = state.fb.read16(set, Bank::A, addr).map_err(fb_fault)?;
                    state
                        .mem
                        .write16(base.wrapping_add(8 * beat + 2 * k), value);
                }
            }
            let window = cfg.fb_window(count);
            state.tinyrisc.pending_dma = Some(PendingDma {
                completes_at_cycle: now + window,
                resource: DmaResource::FbSet(set),
            });
            Ok(format!(
                "{} bytes from set {set} bank A +0x{fb_offset:X} -> 0x{base:X}; engine busy until cycle {}",
                8 * count,
                now + window
            ))
        }

        Mnemonic::Ldctxt => {
            let base = state.tinyrisc.reg(reg_index(instr.operands[0]));
            let (plane, block, start, count) = (
                instr.value(1),
                instr.value(2),
                instr.value(3),
                instr.value(4),
            );
            for w in 0..count {
                let raw = state.mem.read32(base.wrapping_add(4 * w));
                state.ctx.write(plane, block, start + w, raw).map_err(|e| {
                    EmuError::ContextFault {
                        index,
                        detail: e.to_string(),
                    }
                })?;
            }
            let window = cfg.ctx_window(count);
            state.tinyrisc.pending_dma = Some(PendingDma {
                completes_at_cycle: now + window,
                resource: DmaResource::Context,
            });
            Ok(format!(
                "{count} context words from 0x{base:X} -> plane {plane} block {block} word {start}; engine busy until cycle {}",
                now + window
            ))
        }

        Mnemonic::Dbcdc => {
            // (offset_reg, set, bank, cw_idx, plane, block, fb_offset); the
            // offset register and bank fields are carried but inert: both
            // banks always drive their buses, and the offset register served
            // the original hardware's external addressing.
            let set = check_set(instr.value(1), index)?;
            let cw_idx = instr.value(3);
            let (plane, block) = (instr.value(4), instr.value(5));
            let fb_offset = instr.value(6);
            let column = (fb_offset / 0x40) as usize;
            if column >= GRID {
                return Err(EmuError::BadOperand {
                    index,
                    detail: format!(
                        "offset 0x{fb_offset:X} addresses column {column}, past the grid"
                    ),
                });
            }
            let (word, cw) = fetch_context(state, plane, block, cw_idx, index)?;
            for row in 0..GRID {
                let slot = narrow_fb_addr(u64::from(fb_offset) + 2 * row as u64, index)?;
                let bus_a = state.fb.read16(set, Bank::A, slot).map_err(fb_fault)?;
                let bus_b = state.fb.read16(set, Bank::B, slot).map_err(fb_fault)?;
                let cell = state.array.cells[row][column];
                let a = resolve(cw.src_a, &cell.register_file, bus_a, bus_b);
                let b = resolve(cw.src_b, &cell.register_file, bus_a, bus_b);
                state.array.cells[row][column] = cell_execute(cell, &cw, a, b);
            }
            state.array.broadcast_mode = BroadcastMode::Column;
            Ok(format!(
                "column {column} ran {:?} (plane {plane} block {block} word {word}) on set {set}, both banks +0x{fb_offset:X}",
                cw.opcode
            ))
        }

        Mnemonic::Sbc => {
            // (bank, set, rsvd, cw_idx, plane, block, fb_offset); the single
            // selected bank drives operand bus A, bus B reads zero.
            let bank = one_based_bank(instr.value(0), index)?;
            let set = check_set(instr.value(1), index)?;
            let cw_idx = instr.value(3);
            let (plane, block) = (instr.value(4), instr.value(5));
            let fb_offset = instr.value(6);
            let column = (fb_offset / 0x40) as usize;
            if column >= GRID {
                return Err(EmuError::BadOperand {
                    index,
                    detail: format!(
                        "offset 0x{fb_offset:X} addresses column {column}, past the grid"
                    ),
                });
            }
            let (word, cw) = fetch_context(state, plane, block, cw_idx, index)?;
            for row in 0..GRID {
                let slot = narrow_fb_addr(u64::from(fb_offset) + 2 * row as u64, index)?;
                let bus_a = state.fb.read16(set, bank, slot).map_err(fb_fault)?;
                let cell = state.array.cells[row][column];
                let a = resolve(cw.src_a, &cell.register_file, bus_a, 0);
                let b = resolve(cw.src_b, &cell.register_file, bus_a, 0);
                state.array.cells[row][column] = cell_execute(cell, &cw, a, b);
            }
            state.array.broadcast_mode = BroadcastMode::Column;
            Ok(format!(
                "column {column} ran {:?} (plane {plane} block {block} word {word}) on set {set} bank {bank:?} +0x{fb_offset:X}",
                cw.opcode
            ))
        }

        Mnemonic::Rbc => {
            // Row-broadcast extension: (bank, set, rsvd, cw_idx, plane,
            // rsvd, fb_offset). Every row with a loaded block in `plane`
            // executes its own block's word `cw_idx % len`; cell (i, j) reads
            // the selected bank at `fb_offset + 2j`, so one step hands each
            // column one element of a row image. Rows without context idle.
            let bank = one_based_bank(instr.value(0), index)?;
            let set = check_set(instr.value(1), index)?;
            let cw_idx = instr.value(3);
            let plane = instr.value(4);
            let fb_offset = instr.value(6);
            let mut active = 0u32;
            for row in 0..GRID {
                if state.ctx.loaded_len(plane, row as u32) == 0 {
                    continue;
                }
                let (_, cw) = fetch_context(state, plane, row as u32, cw_idx, index)?;
                for col in 0..GRID {
                    let slot = narrow_fb_addr(u64::from(fb_offset) + 2 * col as u64, index)?;
                    let bus_a = state.fb.read16(set, bank, slot).map_err(fb_fault)?;
                    let cell = state.array.cells[row][col];
                    let a = resolve(cw.src_a, &cell.register_file, bus_a, 0);
                    let b = resolve(cw.src_b, &cell.register_file, bus_a, 0);
                    state.array.cells[row][col] = cell_execute(cell, &cw, a, b);
                }
                active += 1;
            }
            if active == 0 {
                return Err(EmuError::ContextFault {
                    index,
                    detail: format!(
                        "no context blocks loaded in plane {plane}; no row can execute"
                    ),
                });
            }
            state.array.broadcast_mode = BroadcastMode::Row;
            Ok(format!(
                "{active} rows ran word {cw_idx} of their plane-{plane} blocks on set {set} bank {bank:?} +0x{fb_offset:X}"
            ))
        }

        Mnemonic::Wfbi => {
            // (column, rsvd, rsvd, dest_set, dest_offset)
            let column = instr.value(0) as usize;
            if column >= GRID {
                return Err(EmuError::BadOperand {
                    index,
                    detail: format!("column {column} past the grid"),
                });
            }
            let dest_set = check_set(instr.value(3), index)?;
            let dest_offset = instr.value(4);
            for row in 0..GRID {
                let addr = narrow_fb_addr(u64::from(dest_offset) + 2 * row as u64, index)?;
                state
                    .fb
                    .write16(
                        dest_set,
                        Bank::A,
                        addr,
                        state.array.cells[row][column].output_register,
                    )
                    .map_err(fb_fault)?;
            }
            Ok(format!(
                "column {column} output registers -> set {dest_set} bank A +0x{dest_offset:X}"
            ))
        }

        Mnemonic::Add => {
            let rd = reg_index(instr.operands[0]);
            let ra = state.tinyrisc.reg(reg_index(instr.operands[1]));
            let rb = state.tinyrisc.reg(reg_index(instr.operands[2]));
            state.tinyrisc.set_reg(rd, ra.wrapping_add(rb));
            if instr.is_nop() {
                Ok("nop".to_string())
            } else {
                Ok(format!("r{rd} = 0x{:08X}", state.tinyrisc.reg(rd)))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::assemble;
    use crate::context::{encode_context_word, DestSelect, Direction};
    use crate::machine::RcCell;

    fn cw_raw(cw: &ContextWord) -> u32 {
        encode_context_word(cw).unwrap()
    }

    fn run_src(src: &str, initial: MachineState) -> Result<(MachineState, ExecTrace), EmuError> {
        run(&assemble(src).unwrap(), initial, DmaConfig::default())
    }

    #[test]
    fn load_upper_and_lower_immediates() {
        let p = assemble("ldui r1, 0x1;\nldui r4, 0xFFFF;\nldli r4, 0xC;").unwrap();
        let (state, _) = run(&p, MachineState::default(), DmaConfig::default()).unwrap();
        assert_eq!(state.tinyrisc.reg(1), 0x0001_0000);
        // ldli replaces the whole register, upper half cleared.
        assert_eq!(state.tinyrisc.reg(4), 0xC);
    }

    #[test]
    fn single_nop_run() {
        let (state, trace) = run_src("add r0, r0, r0;", MachineState::default()).unwrap();
        assert_eq!(state.tinyrisc.cycle_counter, 1);
        assert_eq!(state.tinyrisc.pc, 1);
        let mut expect = MachineState::default();
        expect.tinyrisc.cycle_counter = 1;
        expect.tinyrisc.pc = 1;
        assert_eq!(state, expect);
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.records[0].mnemonic, "add");
    }

    #[test]
    fn corner_turn_load_placement() {
        let mut initial = MachineState::default();
        for e in 0..16i16 {
            initial.mem.write16(0x10000 + 2 * e as u32, 100 + e);
        }
        // 4 beats = 16 elements: first 8 in column block 0, next 8 in block 1.
        let (state, _) = run_src("ldui r1, 0x1;\nldfb r1, 0, 0, 4;", initial).unwrap();
        for e in 0..16u32 {
            let addr = element_fb_offset(0, e) as u32;
            assert_eq!(state.fb.read16(0, Bank::A, addr).unwrap(), 100 + e as i16);
            if e >= 8 {
                assert_eq!(addr, 0x40 + 2 * (e - 8));
            }
        }
    }

    #[test]
    fn store_is_inverse_gather() {
        let mut initial = MachineState::default();
        for e in 0..16u32 {
            let addr = element_fb_offset(0, e) as u32;
            initial.fb.write16(1, Bank::A, addr, 3 * e as i16).unwrap();
        }
        let (state, _) = run_src("ldui r2, 0x5;\nstfb r2, 1, 0, 4;", initial).unwrap();
        for e in 0..16u32 {
            assert_eq!(state.mem.read16(0x50000 + 2 * e), 3 * e as i16);
        }
    }

    #[test]
    fn back_to_back_dma_hazards() {
        let err = run_src(
            "ldui r1, 0x1;\nldfb r1, 0, 0, 2;\nldfb r1, 1, 0, 2;",
            MachineState::default(),
        )
        .unwrap_err();
        assert!(matches!(err, EmuError::DmaHazard { index: 2, .. }), "{err}");
    }

    #[test]
    fn window_boundary_is_exact() {
        // ldfb at cycle 1 with 2 beats is busy until cycle 5: a consumer of
        // set 0 at cycle 5 is legal, at cycle 4 it is a hazard.
        let tight = "ldui r1, 0x1;\nldfb r1, 0, 0, 2;\nadd r0, r0, r0;\nadd r0, r0, r0;\nadd r0, r0, r0;\nwfbi 0, 0, 0, 0, 0;";
        assert!(run_src(tight, MachineState::default()).is_ok());
        let early = "ldui r1, 0x1;\nldfb r1, 0, 0, 2;\nadd r0, r0, r0;\nadd r0, r0, r0;\nwfbi 0, 0, 0, 0, 0;";
        let err = run_src(early, MachineState::default()).unwrap_err();
        assert!(matches!(err, EmuError::DmaHazard { index: 4, .. }), "{err}");
    }

    #[test]
    fn other_set_is_usable_during_load() {
        // Double buffering: writing back into set 1 while set 0 loads is fine.
        let src = "ldui r1, 0x1;\nldfb r1, 0, 0, 2;\nwfbi 0, 0, 0, 1, 0;";
        assert!(run_src(src, MachineState::default()).is_ok());
    }

    #[test]
    fn fb_overflow_is_an_address_fault() {
        let err = run_src("ldfb r0, 0, 0x7F0, 4;", MachineState::default()).unwrap_err();
        assert!(
            matches!(err, EmuError::AddressFault { index: 0, .. }),
            "{err}"
        );
    }

    #[test]
    fn column_broadcast_adds_both_banks() {
        let mut initial = MachineState::default();
        for r in 0..8 {
            initial
                .fb
                .write16(0, Bank::A, 0x80 + 2 * r, 10 + r as i16)
                .unwrap();
            initial
                .fb
                .write16(0, Bank::B, 0x80 + 2 * r, 100 * r as i16)
                .unwrap();
        }
        initial
            .ctx
            .write(0, 0, 0, cw_raw(&ContextWord::add()))
            .unwrap();
        // Word index 5 wraps modulo the loaded length of 1 back to word 0.
        let (state, _) = run_src("dbcdc r0, 0, 0, 5, 0, 0, 0x80;", initial).unwrap();
        for r in 0..8 {
            assert_eq!(
                state.array.cell(r, 2).output_register,
                10 + r as i16 + 100 * r as i16
            );
        }
        assert_eq!(state.array.broadcast_mode, BroadcastMode::Column);
        // Untouched column keeps default cells.
        assert_eq!(*state.array.cell(0, 3), RcCell::default());
    }

    #[test]
    fn single_bank_broadcast_scales() {
        let mut initial = MachineState::default();
        for r in 0..8 {
            initial.fb.write16(0, Bank::A, 2 * r, r as i16 - 3).unwrap();
        }
        initial
            .ctx
            .write(0, 0, 0, cw_raw(&ContextWord::cmul(5)))
            .unwrap();
        let (state, _) = run_src("sbc 1, 0, 0, 0, 0, 0, 0x0;", initial).unwrap();
        for r in 0..8 {
            assert_eq!(state.array.cell(r, 0).output_register, 5 * (r as i16 - 3));
        }
    }

    #[test]
    fn row_broadcast_runs_loaded_rows_only() {
        let mut initial = MachineState::default();
        initial
            .ctx
            .write(1, 0, 0, cw_raw(&ContextWord::cmul(2)))
            .unwrap();
        initial
            .ctx
            .write(1, 1, 0, cw_raw(&ContextWord::cmul(-3)))
            .unwrap();
        for j in 0..8 {
            initial
                .fb
                .write16(0, Bank::A, 2 * j, 10 + j as i16)
                .unwrap();
        }
        let (state, _) = run_src("rbc 1, 0, 0, 0, 1, 0, 0x0;", initial).unwrap();
        for j in 0..8 {
            assert_eq!(state.array.cell(0, j).output_register, 2 * (10 + j as i16));
            assert_eq!(state.array.cell(1, j).output_register, -3 * (10 + j as i16));
            assert_eq!(*state.array.cell(2, j), RcCell::default());
        }
        assert_eq!(state.array.broadcast_mode, BroadcastMode::Row);
    }

    #[test]
    fn broadcast_without_context_faults() {
        let err = run_src("sbc 1, 0, 0, 0, 0, 0, 0x0;", MachineState::default()).unwrap_err();
        assert!(matches!(err, EmuError::ContextFault { .. }), "{err}");
        let err = run_src("rbc 1, 0, 0, 0, 1, 0, 0x0;", MachineState::default()).unwrap_err();
        assert!(matches!(err, EmuError::ContextFault { .. }), "{err}");
    }

    #[test]
    fn undecodable_and_unsupported_context_words() {
        let mut initial = MachineState::default();
        initial.ctx.write(0, 0, 0, 0x2000).unwrap(); // undefined opcode nibble
        let err = run_src("sbc 1, 0, 0, 0, 0, 0, 0x0;", initial).unwrap_err();
        assert!(matches!(err, EmuError::ContextFault { .. }), "{err}");

        let mut initial = MachineState::default();
        let nn = ContextWord::pass(
            OperandSelect::NearestNeighbor(Direction::North),
            DestSelect::OutputRegister,
        );
        initial.ctx.write(0, 0, 0, cw_raw(&nn)).unwrap();
        let err = run_src("sbc 1, 0, 0, 0, 0, 0, 0x0;", initial).unwrap_err();
        assert!(matches!(err, EmuError::UnsupportedContext { .. }), "{err}");
    }

    #[test]
    fn writeback_copies_column_outputs() {
        let mut initial = MachineState::default();
        for r in 0..8 {
            initial.array.cells[r][3].output_register = -(r as i16) * 7;
        }
        let (state, _) = run_src("wfbi 3, 0, 0, 1, 0xC0;", initial).unwrap();
        for r in 0..8 {
            assert_eq!(
                state.fb.read16(1, Bank::A, 0xC0 + 2 * r as u32).unwrap(),
                -(r as i16) * 7
            );
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let mut initial = MachineState::default();
        for e in 0..8i16 {
            initial.mem.write16(0x10000 + 2 * e as u32, e * e);
        }
        initial.mem.write32(0x30000, cw_raw(&ContextWord::cmul(3)));
        let src = "ldui r1, 0x1;\nldfb r1, 0, 0, 2;\nadd r0, r0, r0;\nadd r0, r0, r0;\nadd r0, r0, r0;\nldui r3, 0x3;\nldctxt r3, 0, 0, 0, 1;\nadd r0, r0, r0;\nadd r0, r0, r0;\nadd r0, r0, r0;\nsbc 1, 0, 0, 0, 0, 0, 0x0;";
        let a = run_src(src, initial.clone()).unwrap();
        let b = run_src(src, initial).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert_eq!(a.1.records.len(), 11);
        assert_eq!(a.0.tinyrisc.cycle_counter, 11);
    }

    #[test]
    fn trace_serializes_as_json_lines() {
        let (_, trace) =
            run_src("ldui r1, 0x1;\nadd r0, r0, r0;", MachineState::default()).unwrap();
        let text = trace.to_json_lines();
        assert_eq!(text.lines().count(), 2);
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(v.get("cycle").is_some());
        }
    }

    #[test]
    fn step_matches_run() {
        let p = assemble("ldui r1, 0x1;\nldli r2, 0x10;").unwrap();
        let mut s = MachineState::default();
        for instr in &p.instructions {
            s = step(s, instr, DmaConfig::default()).unwrap();
        }
        let (full, _) = run(&p, MachineState::default(), DmaConfig::default()).unwrap();
        assert_eq!(s, full);
    }
}
