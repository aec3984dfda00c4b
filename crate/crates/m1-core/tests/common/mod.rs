//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use m1_core::asm::{assemble, TrProgram};
use m1_core::context::{all_dests, all_src_a, all_src_b, ContextWord, Opcode};
use m1_core::emu::DmaConfig;
use m1_core::kernels::{generate_program, GeneratedKernel, KernelInputs, KernelSpec};

/// Every encodable context word, exactly one per raw encoding:
/// 1 NOP + 2·4096 immediate forms + 2·9·9·5 ADD/SUB selects + 9·5 PASS
/// selects = 9048 words.
pub fn all_valid_context_words() -> Vec<ContextWord> {
    let mut words = vec![ContextWord::nop()];
    for imm in -2048..=2047i16 {
        words.push(ContextWord::cmul(imm));
        words.push(ContextWord::muladd(imm));
    }
    for opcode in [Opcode::Add, Opcode::Sub] {
        for &src_a in &all_src_a() {
            for &src_b in &all_src_b() {
                for &dest in &all_dests() {
                    words.push(ContextWord {
                        opcode,
                        src_a,
                        src_b,
                        immediate: 0,
                        dest,
                    });
                }
            }
        }
    }
    for &src in &all_src_a() {
        for &dest in &all_dests() {
            words.push(ContextWord::pass(src, dest));
        }
    }
    words
}

pub fn table1_program() -> TrProgram {
    assemble(m1_core::TABLE1_SOURCE).expect("shipped vector-add listing assembles")
}

pub fn table2_program() -> TrProgram {
    assemble(m1_core::TABLE2_SOURCE).expect("shipped scaling listing assembles")
}

pub fn ramp(n: u32, offset: i16) -> Vec<i16> {
    (0..n as i16).map(|i| i + offset).collect()
}

pub fn translate64_case() -> (KernelSpec, KernelInputs) {
    (
        KernelSpec::translate(64),
        KernelInputs::Translate {
            u: ramp(64, 0),
            v: ramp(64, 100),
        },
    )
}

pub fn scale64_case() -> (KernelSpec, KernelInputs) {
    (
        KernelSpec::scale(64, 5),
        KernelInputs::Scale { u: ramp(64, 0) },
    )
}

pub fn generated(spec: &KernelSpec, inputs: &KernelInputs) -> GeneratedKernel {
    generate_program(spec, inputs, DmaConfig::default()).expect("kernel generates")
}

/// Maximal runs of no-op padding instructions, as (start index, length).
pub fn nop_runs(program: &TrProgram) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut i = 0;
    while i < program.instructions.len() {
        if program.instructions[i].is_nop() {
            let start = i;
            while i < program.instructions.len() && program.instructions[i].is_nop() {
                i += 1;
            }
            runs.push((start, i - start));
        } else {
            i += 1;
        }
    }
    runs
}

/// The program with one whole no-op run deleted.
pub fn without_nop_run(program: &TrProgram, run: (usize, usize)) -> TrProgram {
    let mut instructions = program.instructions.clone();
    instructions.drain(run.0..run.0 + run.1);
    TrProgram { instructions }
}
