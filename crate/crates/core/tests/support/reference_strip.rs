//! Reference comment stripper: a regex tokenizer with its own rule table,
//! sharing no code with the byte-level state machine it is checked against.

use ciao_core::flatten::LanguageKind;
use fancy_regex::Regex;

const WS: &str = r"[ \t\n\r\x0C]";
const ANY: &str = r"(?s:.)";

/// Escaping literal that may span lines.
fn esc(q: &str) -> String {
    let q = fancy_regex::escape(q);
    format!(r"{q}(?:\\{ANY}?|(?!{q})[^\\])*(?:{q}|\z)")
}

/// Escaping literal cut short by a newline.
fn esc_line(q: &str) -> String {
    let q = fancy_regex::escape(q);
    format!(r"{q}(?:\\{ANY}?|(?!{q})[^\\\n])*(?:{q}|\n|\z)")
}

/// Literal without escapes, any number of lines.
fn raw(open: &str, close: &str) -> String {
    let (o, c) = (fancy_regex::escape(open), fancy_regex::escape(close));
    format!(r"{o}(?:(?!{c}){ANY})*(?:{c}|\z)")
}

fn block(open: &str, close: &str) -> String {
    let (o, c) = (fancy_regex::escape(open), fancy_regex::escape(close));
    format!(r"(?P<b>{o}{ANY}*?(?:{c}|\z))")
}

fn line(marker: &str, word_start: bool) -> String {
    let m = fancy_regex::escape(marker);
    let guard = if word_start {
        format!("(?<!{}){m}", WS.replacen('[', "[^", 1))
    } else {
        m.to_string()
    };
    format!(r"(?P<l>{guard}[^\n]*)")
}

fn word(pattern: String) -> String {
    format!("(?<!{}){pattern}", WS.replacen('[', "[^", 1))
}

/// Alternatives in priority order: block comments, line comments, literals.
fn rules(kind: LanguageKind) -> Vec<String> {
    use LanguageKind::*;
    let slash = || vec![block("/*", "*/"), line("//", false)];
    match kind {
        CFamily => [slash(), vec![esc_line("\""), esc_line("'")]].concat(),
        JavaScript => [slash(), vec![esc_line("\""), esc_line("'"), esc("`")]].concat(),
        Java => [slash(), vec![esc("\"\"\""), esc_line("\""), esc_line("'")]].concat(),
        Go => [slash(), vec![esc_line("\""), esc_line("'"), raw("`", "`")]].concat(),
        Json => [slash(), vec![esc_line("\"")]].concat(),
        Rust => {
            let char_lit = format!(r"'(?:\\{ANY}?(?:\\{ANY}?|[^'\\\n])*(?:'|\n|\z)|[^\\'\n]')");
            [
                slash(),
                vec![
                    raw("r##\"", "\"##"),
                    raw("r#\"", "\"#"),
                    raw("r\"", "\""),
                    esc("\""),
                    char_lit,
                ],
            ]
            .concat()
        }
        Python => vec![
            line("#", false),
            esc("\"\"\""),
            esc("'''"),
            esc_line("\""),
            esc_line("'"),
        ],
        Shell => vec![line("#", true), esc("\""), raw("'", "'")],
        Yaml => vec![line("#", true), word(esc("\"")), word(raw("'", "'"))],
        Sql => vec![block("/*", "*/"), line("--", false), raw("'", "'"), raw("\"", "\"")],
        Markup => vec![block("<!--", "-->")],
        Unknown => vec![],
    }
}

pub fn reference_strip(text: &str, kind: LanguageKind) -> String {
    let rules = rules(kind);
    if rules.is_empty() {
        return text.to_owned();
    }
    let re = Regex::new(&rules.join("|")).unwrap();
    let mut out = String::new();
    let mut last = 0;
    for caps in re.captures_iter(text) {
        let caps = caps.unwrap();
        let m = caps.get(0).unwrap();
        out.push_str(&text[last..m.start()]);
        if caps.name("b").is_some() {
            out.extend(m.as_str().chars().filter(|&c| c == '\n'));
        } else if caps.name("l").is_none() {
            out.push_str(m.as_str());
        }
        last = m.end();
    }
    out.push_str(&text[last..]);
    out
}

/// The 30-file strip corpus, sorted by file name.
pub fn corpus() -> Vec<(String, String)> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/strip");
    let mut files: Vec<(String, String)> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| {
            let path = e.unwrap().path();
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            (name, std::fs::read_to_string(&path).unwrap())
        })
        .collect();
    files.sort();
    files
}
