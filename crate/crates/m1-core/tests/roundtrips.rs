//! Round-trip properties for the context-word codec and the assembler.

mod common;

use proptest::prelude::*;

use m1_core::asm::{assemble, disassemble, AsmError, Mnemonic, Operand, TrInstruction, TrProgram};
use m1_core::context::{decode_context_word, encode_context_word};

#[test]
fn codec_is_a_bijection_over_the_valid_set() {
    let words = common::all_valid_context_words();
    assert_eq!(words.len(), 1 + 2 * 4096 + 2 * 9 * 9 * 5 + 9 * 5);
    let mut raws = std::collections::HashSet::new();
    for word in &words {
        let raw = encode_context_word(word).expect("valid word encodes");
        assert!(raws.insert(raw), "duplicate encoding 0x{raw:08X}");
        assert_eq!(&decode_context_word(raw).expect("encoding decodes"), word);
    }
}

proptest! {
    /// decode then re-encode is the identity on whatever decodes at all.
    #[test]
    fn decode_encode_identity(raw in 0u32..=0xFFFF) {
        if let Ok(word) = decode_context_word(raw) {
            prop_assert_eq!(encode_context_word(&word).unwrap(), raw);
        }
    }

    /// Raw words with reserved high bits never decode.
    #[test]
    fn reserved_bits_rejected(raw in any::<u32>()) {
        prop_assume!(raw & 0xFFFF_0000 != 0);
        prop_assert!(decode_context_word(raw).is_err());
    }
}

const ALL_MNEMONICS: [Mnemonic; 10] = [
    Mnemonic::Ldui,
    Mnemonic::Ldli,
    Mnemonic::Ldfb,
    Mnemonic::Stfb,
    Mnemonic::Ldctxt,
    Mnemonic::Dbcdc,
    Mnemonic::Sbc,
    Mnemonic::Wfbi,
    Mnemonic::Add,
    Mnemonic::Rbc,
];

fn arb_instruction() -> impl Strategy<Value = TrInstruction> {
    (
        0usize..ALL_MNEMONICS.len(),
        prop::collection::vec((0u8..16, 0u32..0x2_0000), 7),
    )
        .prop_map(|(which, raw)| {
            let mnemonic = ALL_MNEMONICS[which];
            let operands = mnemonic
                .shape()
                .iter()
                .zip(raw)
                .map(|(&is_reg, (reg, imm))| {
                    if is_reg {
                        Operand::Reg(reg)
                    } else {
                        Operand::Imm(imm)
                    }
                })
                .collect();
            TrInstruction::new(mnemonic, operands)
        })
}

proptest! {
    /// assemble(disassemble(p)) == p for arbitrary well-formed programs.
    #[test]
    fn assembler_roundtrip(instructions in prop::collection::vec(arb_instruction(), 1..40)) {
        let program = TrProgram { instructions };
        let text = disassemble(&program);
        let back = assemble(&text).expect("canonical text assembles");
        prop_assert_eq!(back, program);
    }

    /// Disassembly is byte-stable: one more round trip changes nothing.
    #[test]
    fn disassembly_is_canonical(instructions in prop::collection::vec(arb_instruction(), 1..40)) {
        let program = TrProgram { instructions };
        let text = disassemble(&program);
        let again = disassemble(&assemble(&text).unwrap());
        prop_assert_eq!(text, again);
    }
}

#[test]
fn golden_listings_roundtrip() {
    for source in [m1_core::TABLE1_SOURCE, m1_core::TABLE2_SOURCE] {
        let program = assemble(source).unwrap();
        let canonical = disassemble(&program);
        assert_eq!(assemble(&canonical).unwrap(), program);
        assert_eq!(disassemble(&assemble(&canonical).unwrap()), canonical);
    }
}

#[test]
fn syntax_errors_carry_line_numbers() {
    let err = assemble("ldui r1, 0x1;\nbogus r2;\n").unwrap_err();
    match err {
        AsmError::UnknownMnemonic { line, .. } => assert_eq!(line, 2),
        other => panic!("unexpected error {other:?}"),
    }
    let err = assemble("ldui r1, 0x1\n").unwrap_err();
    assert!(matches!(err, AsmError::SyntaxError { line: 1, .. }));
    let err = assemble("ldfb r1, 0;\n").unwrap_err();
    assert!(matches!(err, AsmError::ArityError { line: 1, .. }));
}
