//! Functional, cycle-counting emulator of the MorphoSys M1 reconfigurable system.
//!
//! The M1 couples a scalar control processor (TinyRISC) to an 8x8 array of
//! reconfigurable cells (the RC array), a double-buffered frame buffer, and a
//! context memory holding the per-cell configuration words. TinyRISC issues
//! DMA transfers and broadcast instructions; the array executes one context
//! word per cell per broadcast. This crate models that machine precisely
//! enough to reproduce published cycle counts for a set of 2D geometric
//! transformation kernels, and to compare them against static instruction
//! timing models of the Intel 80386/80486.
//!
//! Module map:
//!
//! - [`context`]: the 32-bit context-word codec (encode/decode, bijective).
//! - [`machine`]: architectural state (RC cells, frame buffer, context
//!   memory, TinyRISC registers, main memory) and single-cell execution.
//! - [`asm`]: two-pass assembler and disassembler for the TinyRISC subset.
//! - [`emu`]: the instruction interpreter with DMA latency windows and
//!   hazard detection; produces exact cycle counts and execution traces.
//! - [`kernels`]: golden models for translation/scaling/matmul, program
//!   generators that emit runnable M1 code for each, and fixed-point trig.
//! - [`perf`]: Intel 80386/80486 loop timing models, throughput metrics in
//!   exact rational arithmetic, and the comparison-report builder.
//! - [`memimage`]: the `ADDR: WORD` memory-image text format.
//!
//! The emulator's cycle convention is one cycle per executed TinyRISC
//! instruction; DMA latency is modeled as a completion window that dependent
//! instructions must not enter (entering one is a [`emu::EmuError::DmaHazard`],
//! never silent corruption). See `docs/isa.md` at the repository root for the
//! full instruction and encoding reference.

pub mod asm;
pub mod context;
pub mod emu;
pub mod kernels;
pub mod machine;
pub mod memimage;
pub mod perf;

/// Canonical source for the 97-instruction 64-element translation routine.
pub const TABLE1_SOURCE: &str = include_str!("../assets/table1.m1asm");

/// Canonical source for the 56-instruction 64-element scaling routine.
pub const TABLE2_SOURCE: &str = include_str!("../assets/table2.m1asm");
