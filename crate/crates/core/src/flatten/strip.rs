//! Single-pass comment stripper.
//!
//! The lexer walks the text once, switching between four states: code,
//! string literal, line comment and block comment. All markers are ASCII, so
//! scanning bytes never splits a UTF-8 sequence. Newlines inside removed
//! comments are kept, so output line `i` is always a subsequence of input
//! line `i`. Nested block comments are not tracked: the first closing
//! delimiter ends the comment.

use super::language::{LanguageKind, StringDelimiter};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StripWarning {
    /// A block comment opened on this 1-based line was never closed.
    UnterminatedBlockComment { line: usize },
}

impl std::fmt::Display for StripWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StripWarning::UnterminatedBlockComment { line } => {
                write!(f, "unterminated block comment opened on line {line}")
            }
        }
    }
}

enum State {
    Code,
    LineComment,
    BlockComment { close: &'static str, opened_on: usize },
    Str(StringDelimiter),
}

/// Removes comments from `text` according to the rules of `kind`.
pub fn strip_comments(text: &str, kind: LanguageKind) -> String {
    strip_comments_with_warnings(text, kind).0
}

/// Like [`strip_comments`], also reporting recoverable problems.
pub fn strip_comments_with_warnings(text: &str, kind: LanguageKind) -> (String, Vec<StripWarning>) {
    let line_markers = kind.line_comment_markers();
    let block_pairs = kind.block_comment_pairs();
    let strings = kind.string_delimiters();
    if line_markers.is_empty() && block_pairs.is_empty() {
        return (text.to_owned(), Vec::new());
    }

    let bytes = text.as_bytes();
    let mut out: Vec<u8> = Vec::with_capacity(bytes.len());
    let mut warnings = Vec::new();
    let mut state = State::Code;
    let mut line = 1usize;
    let mut i = 0usize;

    while i < bytes.len() {
        let rest = &bytes[i..];
        let b = bytes[i];
        match state {
            State::Code => {
                if let Some((open, close)) = block_pairs.iter().find(|(open, _)| rest.starts_with(open.as_bytes())) {
                    state = State::BlockComment { close, opened_on: line };
                    i += open.len();
                    continue;
                }
                let word_start = i == 0 || bytes[i - 1].is_ascii_whitespace();
                if let Some(marker) = line_markers.iter().find(|m| rest.starts_with(m.as_bytes())) {
                    if word_start || !kind.comment_needs_word_start() {
                        state = State::LineComment;
                        i += marker.len();
                        continue;
                    }
                }
                if let Some(d) = strings.iter().find(|d| rest.starts_with(d.open.as_bytes())) {
                    let allowed =
                        (word_start || !kind.quote_needs_word_start()) && (!d.char_literal || is_char_literal(rest));
                    if allowed {
                        out.extend_from_slice(d.open.as_bytes());
                        i += d.open.len();
                        state = State::Str(*d);
                        continue;
                    }
                }
                if b == b'\n' {
                    line += 1;
                }
                out.push(b);
                i += 1;
            }
            State::LineComment => {
                if b == b'\n' {
                    out.push(b);
                    line += 1;
                    state = State::Code;
                }
                i += 1;
            }
            State::BlockComment { close, .. } => {
                if rest.starts_with(close.as_bytes()) {
                    i += close.len();
                    state = State::Code;
                    continue;
                }
                if b == b'\n' {
                    out.push(b);
                    line += 1;
                }
                i += 1;
            }
            State::Str(d) => {
                if d.escapes && b == b'\\' {
                    out.push(b);
                    i += 1;
                    if let Some(&next) = bytes.get(i) {
                        if next == b'\n' {
                            line += 1;
                        }
                        out.push(next);
                        i += 1;
                    }
                    continue;
                }
                if rest.starts_with(d.close.as_bytes()) {
                    out.extend_from_slice(d.close.as_bytes());
                    i += d.close.len();
                    state = State::Code;
                    continue;
                }
                if b == b'\n' {
                    line += 1;
                    if !d.multiline {
                        state = State::Code;
                    }
                }
                out.push(b);
                i += 1;
            }
        }
    }

    if let State::BlockComment { opened_on, .. } = state {
        warnings.push(StripWarning::UnterminatedBlockComment { line: opened_on });
    }

    // Only whole ASCII markers were removed, so the remaining bytes are still UTF-8.
    let stripped = String::from_utf8(out).expect("stripping preserves UTF-8 boundaries");
    (stripped, warnings)
}

/// `rest` starts with `'`. A char literal is `'\...'` or a single character
/// followed by a closing quote; anything else (a lifetime or label) is code.
fn is_char_literal(rest: &[u8]) -> bool {
    let after = &rest[1..];
    match after.first() {
        Some(b'\\') => true,
        Some(b'\'') | Some(b'\n') | None => false,
        Some(&lead) => after.get(utf8_width(lead)) == Some(&b'\''),
    }
}

fn utf8_width(lead: u8) -> usize {
    match lead {
        0x00..=0x7F => 1,
        0xC0..=0xDF => 2,
        0xE0..=0xEF => 3,
        _ => 4,
    }
}
