//! Architectural state of the M1: RC array, frame buffer, context memory,
//! TinyRISC registers, and main memory. All types are plain values; the
//! emulator mutates owned copies, so two machines never share state.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::context::{ContextWord, Opcode};

/// The RC array is fixed at 8 rows by 8 columns.
pub const GRID: usize = 8;

/// Default frame-buffer bank capacity in bytes.
pub const BANK_BYTES: usize = 2048;

/// Context memory geometry: 2 planes (column, row) of 8 blocks of 32 words.
pub const PLANES: usize = 2;
pub const BLOCKS: usize = 8;
pub const WORDS_PER_BLOCK: usize = 32;

/// Plane index of the column-broadcast context block.
pub const PLANE_COLUMN: u32 = 0;
/// Plane index of the row-broadcast context block.
pub const PLANE_ROW: u32 = 1;

/// Truncate a 32-bit result to the 16-bit output register, two's complement.
pub fn wrap16(v: i32) -> i16 {
    v as i16
}

/// One reconfigurable cell: 16-bit datapath, 32-bit multiply accumulator,
/// four general registers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RcCell {
    pub output_register: i16,
    pub accumulator: i32,
    pub register_file: [i16; 4],
}

/// Apply one context word to one cell with already-resolved operands.
/// Signed 16-bit arithmetic wrapping at the output register; the accumulator
/// is 32 bits and wraps independently. The output register always receives
/// the low 16 bits of the fresh result; a register-file destination stores a
/// copy as well. NOP leaves the cell untouched.
pub fn cell_execute(cell: RcCell, cw: &ContextWord, operand_a: i16, operand_b: i16) -> RcCell {
    let mut next = cell;
    let a = i32::from(operand_a);
    let b = i32::from(operand_b);
    let imm = i32::from(cw.immediate);
    let result = match cw.opcode {
        Opcode::Nop => return next,
        Opcode::Pass => a,
        Opcode::Add => a.wrapping_add(b),
        Opcode::Sub => a.wrapping_sub(b),
        Opcode::Cmul => {
            // A multiply also seeds the accumulator, so a CMUL step can start
            // an accumulation chain that MULADD steps extend.
            let p = imm.wrapping_mul(a);
            next.accumulator = p;
            p
        }
        Opcode::MulAdd => {
            next.accumulator = next.accumulator.wrapping_add(imm.wrapping_mul(a));
            next.accumulator
        }
    };
    next.output_register = wrap16(result);
    if let crate::context::DestSelect::RegisterFile(i) = cw.dest {
        next.register_file[usize::from(i)] = wrap16(result);
    }
    next
}

/// Which dimension the last broadcast configured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BroadcastMode {
    #[default]
    Column,
    Row,
}

/// The 8x8 grid of cells, indexed `cells[row][column]`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RcArrayState {
    pub cells: [[RcCell; GRID]; GRID],
    pub broadcast_mode: BroadcastMode,
}

impl RcArrayState {
    pub fn cell(&self, row: usize, col: usize) -> &RcCell {
        &self.cells[row][col]
    }
}

/// Frame-buffer bank selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bank {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("frame buffer access out of range: set {set}, bank {bank:?}, byte 0x{addr:X} (capacity 0x{capacity:X})")]
pub struct FbFault {
    pub set: u32,
    pub bank: Bank,
    pub addr: u32,
    pub capacity: usize,
}

/// Two sets of two banks of byte-addressed operand storage. One set can be
/// loaded by DMA while the array computes on the other.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameBuffer {
    banks: [[Vec<u8>; 2]; 2],
    capacity: usize,
}

impl Default for FrameBuffer {
    fn default() -> Self {
        FrameBuffer::with_capacity(BANK_BYTES)
    }
}

impl FrameBuffer {
    pub fn with_capacity(bytes_per_bank: usize) -> Self {
        let mk = || vec![0u8; bytes_per_bank];
        FrameBuffer {
            banks: [[mk(), mk()], [mk(), mk()]],
            capacity: bytes_per_bank,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    fn bank(&self, set: u32, bank: Bank) -> &Vec<u8> {
        &self.banks[set as usize][matches!(bank, Bank::B) as usize]
    }

    fn check(&self, set: u32, bank: Bank, addr: u32, len: u32) -> Result<usize, FbFault> {
        let end = addr as u64 + len as u64;
        if set > 1 || end > self.capacity as u64 {
            return Err(FbFault {
                set,
                bank,
                addr,
                capacity: self.capacity,
            });
        }
        Ok(addr as usize)
    }

    pub fn read16(&self, set: u32, bank: Bank, addr: u32) -> Result<i16, FbFault> {
        let i = self.check(set, bank, addr, 2)?;
        let b = self.bank(set, bank);
        Ok(i16::from_le_bytes([b[i], b[i + 1]]))
    }

    pub fn write16(&mut self, set: u32, bank: Bank, addr: u32, value: i16) -> Result<(), FbFault> {
        let i = self.check(set, bank, addr, 2)?;
        let bytes = value.to_le_bytes();
        let b = &mut self.banks[set as usize][matches!(bank, Bank::B) as usize];
        b[i] = bytes[0];
        b[i + 1] = bytes[1];
        Ok(())
    }

    /// Raw view of one bank, for checksums and assertions.
    pub fn bytes(&self, set: u32, bank: Bank) -> &[u8] {
        self.bank(set, bank)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("context memory access out of range: plane {plane}, block {block}, word {word}")]
pub struct CtxFault {
    pub plane: u32,
    pub block: u32,
    pub word: u32,
}

/// On-chip store of raw context words plus, per block, the high-water mark of
/// how many words have ever been loaded (broadcast indices wrap modulo that
/// length, so a block loaded with a single word serves any index).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextMemory {
    words: [[[u32; WORDS_PER_BLOCK]; BLOCKS]; PLANES],
    loaded: [[u32; BLOCKS]; PLANES],
}

impl Default for ContextMemory {
    fn default() -> Self {
        ContextMemory {
            words: [[[0; WORDS_PER_BLOCK]; BLOCKS]; PLANES],
            loaded: [[0; BLOCKS]; PLANES],
        }
    }
}

impl ContextMemory {
    fn check(plane: u32, block: u32, word: u32) -> Result<(usize, usize, usize), CtxFault> {
        if plane as usize >= PLANES || block as usize >= BLOCKS || word as usize >= WORDS_PER_BLOCK
        {
            return Err(CtxFault { plane, block, word });
        }
        Ok((plane as usize, block as usize, word as usize))
    }

    pub fn write(&mut self, plane: u32, block: u32, word: u32, raw: u32) -> Result<(), CtxFault> {
        let (p, b, w) = Self::check(plane, block, word)?;
        self.words[p][b][w] = raw;
        self.loaded[p][b] = self.loaded[p][b].max(word + 1);
        Ok(())
    }

    pub fn read(&self, plane: u32, block: u32, word: u32) -> Result<u32, CtxFault> {
        let (p, b, w) = Self::check(plane, block, word)?;
        Ok(self.words[p][b][w])
    }

    /// Number of word slots ever loaded into a block (0 = never touched).
    pub fn loaded_len(&self, plane: u32, block: u32) -> u32 {
        if plane as usize >= PLANES || block as usize >= BLOCKS {
            return 0;
        }
        self.loaded[plane as usize][block as usize]
    }
}

/// The DMA resource a pending transfer occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DmaResource {
    /// A frame-buffer set being filled or drained.
    FbSet(u32),
    /// The context memory being filled.
    Context,
}

/// An in-flight DMA transfer. There is a single engine, so at most one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PendingDma {
    pub completes_at_cycle: u64,
    pub resource: DmaResource,
}

/// Scalar control processor state. r0 is hardwired to zero.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TinyRiscState {
    registers: [u32; 16],
    pub pc: usize,
    pub cycle_counter: u64,
    pub pending_dma: Option<PendingDma>,
}

impl TinyRiscState {
    pub fn reg(&self, i: u8) -> u32 {
        if i == 0 {
            0
        } else {
            self.registers[usize::from(i & 0xF)]
        }
    }

    pub fn set_reg(&mut self, i: u8, value: u32) {
        if i != 0 {
            self.registers[usize::from(i & 0xF)] = value;
        }
    }
}

/// Byte-addressed sparse main memory; unwritten addresses read as zero.
/// 16/32-bit accessors are little-endian.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MainMemory {
    bytes: BTreeMap<u32, u8>,
}

impl MainMemory {
    pub fn read8(&self, addr: u32) -> u8 {
        self.bytes.get(&addr).copied().unwrap_or(0)
    }

    pub fn write8(&mut self, addr: u32, value: u8) {
        if value == 0 {
            self.bytes.remove(&addr);
        } else {
            self.bytes.insert(addr, value);
        }
    }

    pub fn read16(&self, addr: u32) -> i16 {
        i16::from_le_bytes([self.read8(addr), self.read8(addr.wrapping_add(1))])
    }

    pub fn write16(&mut self, addr: u32, value: i16) {
        let b = value.to_le_bytes();
        self.write8(addr, b[0]);
        self.write8(addr.wrapping_add(1), b[1]);
    }

    pub fn read32(&self, addr: u32) -> u32 {
        u32::from_le_bytes([
            self.read8(addr),
            self.read8(addr.wrapping_add(1)),
            self.read8(addr.wrapping_add(2)),
            self.read8(addr.wrapping_add(3)),
        ])
    }

    pub fn write32(&mut self, addr: u32, value: u32) {
        for (k, b) in value.to_le_bytes().into_iter().enumerate() {
            self.write8(addr.wrapping_add(k as u32), b);
        }
    }

    /// Nonzero contents as 32-bit aligned words, ascending by address.
    /// The canonical dump format for memory-image files.
    pub fn dump_words(&self) -> Vec<(u32, u32)> {
        let mut addrs: Vec<u32> = self.bytes.keys().map(|a| a & !3).collect();
        addrs.dedup();
        addrs.into_iter().map(|a| (a, self.read32(a))).collect()
    }
}

/// Everything the emulator runs against.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MachineState {
    pub tinyrisc: TinyRiscState,
    pub fb: FrameBuffer,
    pub ctx: ContextMemory,
    pub array: RcArrayState,
    pub mem: MainMemory,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::ContextWord;

    #[test]
    fn add_wraps_at_16_bits() {
        let cell = cell_execute(RcCell::default(), &ContextWord::add(), 0x7FFF, 1);
        assert_eq!(cell.output_register, -0x8000);
    }

    #[test]
    fn small_add() {
        let cell = cell_execute(RcCell::default(), &ContextWord::add(), 7, 5);
        assert_eq!(cell.output_register, 12);
    }

    #[test]
    fn cmul_multiplies_and_seeds_accumulator() {
        let cell = cell_execute(RcCell::default(), &ContextWord::cmul(5), 3, 0);
        assert_eq!(cell.output_register, 15);
        assert_eq!(cell.accumulator, 15);
    }

    #[test]
    fn muladd_accumulates_dot_product() {
        // imm = row of A, operand = column of B, one step per k.
        let a_row = [3i16, -2, 7, 0, 1, -5, 4, 2];
        let b_col = [1i16, 2, 3, 4, 5, 6, 7, 8];
        let mut cell = RcCell::default();
        for k in 0..8 {
            let cw = if k == 0 {
                ContextWord::cmul(a_row[0])
            } else {
                ContextWord::muladd(a_row[k])
            };
            cell = cell_execute(cell, &cw, b_col[k], 0);
        }
        let expect: i32 = a_row
            .iter()
            .zip(b_col.iter())
            .map(|(&a, &b)| i32::from(a) * i32::from(b))
            .sum();
        assert_eq!(cell.accumulator, expect);
        assert_eq!(cell.output_register, wrap16(expect));
    }

    #[test]
    fn register_file_destination_stores_copy() {
        let cw = ContextWord::pass(
            crate::context::OperandSelect::OperandBusA,
            crate::context::DestSelect::RegisterFile(2),
        );
        let cell = cell_execute(RcCell::default(), &cw, -42, 0);
        assert_eq!(cell.output_register, -42);
        assert_eq!(cell.register_file[2], -42);
    }

    #[test]
    fn r0_reads_zero() {
        let mut t = TinyRiscState::default();
        t.set_reg(0, 123);
        assert_eq!(t.reg(0), 0);
        t.set_reg(5, 123);
        assert_eq!(t.reg(5), 123);
    }

    #[test]
    fn fb_rejects_out_of_range() {
        let mut fb = FrameBuffer::default();
        assert!(fb.write16(0, Bank::A, 2046, 1).is_ok());
        assert!(fb.write16(0, Bank::A, 2047, 1).is_err());
        assert!(fb.read16(2, Bank::A, 0).is_err());
    }

    #[test]
    fn fb_sets_are_isolated() {
        let mut fb = FrameBuffer::default();
        let before: Vec<u8> = fb.bytes(0, Bank::A).to_vec();
        for addr in (0..256).step_by(2) {
            fb.write16(1, Bank::A, addr, addr as i16).unwrap();
            fb.write16(1, Bank::B, addr, -(addr as i16)).unwrap();
        }
        assert_eq!(fb.bytes(0, Bank::A), &before[..]);
        assert!(fb.bytes(0, Bank::B).iter().all(|&b| b == 0));
    }

    #[test]
    fn context_memory_tracks_loaded_length() {
        let mut ctx = ContextMemory::default();
        assert_eq!(ctx.loaded_len(0, 0), 0);
        ctx.write(0, 0, 0, 0xF400).unwrap();
        assert_eq!(ctx.loaded_len(0, 0), 1);
        ctx.write(0, 0, 5, 0x9005).unwrap();
        assert_eq!(ctx.loaded_len(0, 0), 6);
        assert_eq!(ctx.loaded_len(1, 0), 0);
        assert!(ctx.write(0, 8, 0, 0).is_err());
        assert!(ctx.write(0, 0, 32, 0).is_err());
    }

    #[test]
    fn main_memory_defaults_to_zero_and_roundtrips() {
        let mut mem = MainMemory::default();
        assert_eq!(mem.read32(0xDEAD_0000), 0);
        mem.write16(0x100, -2);
        assert_eq!(mem.read16(0x100), -2);
        mem.write32(0x200, 0x0000_F400);
        assert_eq!(mem.read32(0x200), 0x0000_F400);
        assert_eq!(
            mem.dump_words(),
            vec![(0x100, 0x0000_FFFE), (0x200, 0x0000_F400)]
        );
    }
}
