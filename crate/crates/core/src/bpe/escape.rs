//! Printable encoding of token byte strings.
//!
//! Tokens are arbitrary byte strings; the tokenizer file stores them as UTF-8
//! text. Control characters and bytes that are not part of a valid UTF-8
//! sequence are written as `<0xNN>`. A literal `<` is escaped only when it
//! would otherwise be read back as the start of such an escape.

use std::fmt::Write;

/// Render token bytes as a printable string.
pub fn escape_token(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len());
    for chunk in bytes.utf8_chunks() {
        let valid = chunk.valid();
        for (offset, ch) in valid.char_indices() {
            let rest = &valid[offset + ch.len_utf8()..];
            if ch.is_control() || (ch == '<' && rest.starts_with("0x")) {
                let mut buf = [0u8; 4];
                for b in ch.encode_utf8(&mut buf).bytes() {
                    push_escape(&mut out, b);
                }
            } else {
                out.push(ch);
            }
        }
        for &b in chunk.invalid() {
            push_escape(&mut out, b);
        }
    }
    out
}

fn push_escape(out: &mut String, byte: u8) {
    let _ = write!(out, "<0x{byte:02X}>");
}

/// Inverse of [`escape_token`]. Accepts hex digits in either case.
pub fn unescape_token(text: &str) -> Vec<u8> {
    let bytes = text.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if let Some(b) = parse_escape(&bytes[i..]) {
            out.push(b);
            i += 6;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    out
}

fn parse_escape(s: &[u8]) -> Option<u8> {
    if s.len() < 6 || &s[..3] != b"<0x" || s[5] != b'>' {
        return None;
    }
    let hex = std::str::from_utf8(&s[3..5]).ok()?;
    u8::from_str_radix(hex, 16).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn printable_text_is_unchanged() {
        assert_eq!(escape_token(b"heart rate"), "heart rate");
        assert_eq!(escape_token("Spirométrie".as_bytes()), "Spirométrie");
    }

    #[test]
    fn control_and_invalid_bytes_are_escaped() {
        assert_eq!(escape_token(b"\n"), "<0x0A>");
        assert_eq!(escape_token(&[0xE2, 0x82]), "<0xE2><0x82>");
        assert_eq!(escape_token(b"a\tb"), "a<0x09>b");
    }

    #[test]
    fn literal_escape_lookalike_is_protected() {
        let raw = b"<0x41>";
        let escaped = escape_token(raw);
        assert_eq!(escaped, "<0x3C>0x41>");
        assert_eq!(unescape_token(&escaped), raw);
        assert_eq!(escape_token(b"<|eos|>"), "<|eos|>");
    }

    proptest! {
        #[test]
        fn escape_round_trips(bytes in proptest::collection::vec(any::<u8>(), 0..24)) {
            prop_assert_eq!(unescape_token(&escape_token(&bytes)), bytes);
        }

        #[test]
        fn escape_round_trips_on_text(s in "[<0x>A-F\\n ]{0,16}") {
            prop_assert_eq!(unescape_token(&escape_token(s.as_bytes())), s.as_bytes());
        }
    }
}
