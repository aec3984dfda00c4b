//! Memory-image files: a plain-text snapshot of 32-bit words in main memory.
//!
//! One word per line, `AAAAAAAA: WWWWWWWW` (8 hex digits each, address then
//! value). Blank lines and lines starting with `#` are ignored. The format is
//! the interchange point between kernel generators, the emulator CLI, and
//! golden-file tests, so the writer is canonical: sorted by address, fixed
//! width, one trailing newline.

use std::fmt::Write as _;

use thiserror::Error;

use crate::machine::MainMemory;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ImageError {
    #[error("line {line}: expected 'ADDR: WORD', got '{text}'")]
    Malformed { line: u32, text: String },
    #[error("line {line}: bad hex value '{token}'")]
    BadHex { line: u32, token: String },
}

/// One `address -> 32-bit word` entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageEntry {
    pub addr: u32,
    pub word: u32,
}

/// Parse image text into entries, in file order.
pub fn parse_image(text: &str) -> Result<Vec<ImageEntry>, ImageError> {
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx as u32 + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (addr_tok, word_tok) =
            trimmed
                .split_once(':')
                .ok_or_else(|| ImageError::Malformed {
                    line,
                    text: trimmed.to_string(),
                })?;
        let parse_hex = |tok: &str| {
            let tok = tok.trim();
            let digits = tok
                .strip_prefix("0x")
                .or_else(|| tok.strip_prefix("0X"))
                .unwrap_or(tok);
            u32::from_str_radix(digits, 16).map_err(|_| ImageError::BadHex {
                line,
                token: tok.to_string(),
            })
        };
        entries.push(ImageEntry {
            addr: parse_hex(addr_tok)?,
            word: parse_hex(word_tok)?,
        });
    }
    Ok(entries)
}

/// Write entries in canonical form.
pub fn format_image(entries: &[ImageEntry]) -> String {
    let mut sorted = entries.to_vec();
    sorted.sort_by_key(|e| e.addr);
    let mut out = String::new();
    for e in &sorted {
        let _ = writeln!(out, "{:08X}: {:08X}", e.addr, e.word);
    }
    out
}

/// Apply entries to a memory (little-endian 32-bit stores).
pub fn apply_image(mem: &mut MainMemory, entries: &[ImageEntry]) {
    for e in entries {
        mem.write32(e.addr, e.word);
    }
}

/// Snapshot every nonzero word of a memory as image entries.
pub fn image_of_memory(mem: &MainMemory) -> Vec<ImageEntry> {
    mem.dump_words()
        .into_iter()
        .map(|(addr, word)| ImageEntry { addr, word })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_through_memory() {
        let text = "# operands\n00010000: 00050004\n\n0x00030000: 0000F400\n";
        let entries = parse_image(text).unwrap();
        assert_eq!(entries.len(), 2);
        let mut mem = MainMemory::default();
        apply_image(&mut mem, &entries);
        assert_eq!(mem.read16(0x10000), 4);
        assert_eq!(mem.read16(0x10002), 5);
        assert_eq!(mem.read32(0x30000), 0x0000F400);
        let out = format_image(&image_of_memory(&mem));
        assert_eq!(out, "00010000: 00050004\n00030000: 0000F400\n");
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_image("00000000: 00000001\nnot an entry\n").unwrap_err();
        assert_eq!(
            err,
            ImageError::Malformed {
                line: 2,
                text: "not an entry".to_string()
            }
        );
        let err = parse_image("00000000: xyzw\n").unwrap_err();
        assert!(matches!(err, ImageError::BadHex { line: 1, .. }));
    }

    #[test]
    fn canonical_writer_sorts() {
        let entries = vec![
            ImageEntry { addr: 8, word: 2 },
            ImageEntry { addr: 0, word: 1 },
        ];
        assert_eq!(
            format_image(&entries),
            "00000000: 00000001\n00000008: 00000002\n"
        );
    }
}
