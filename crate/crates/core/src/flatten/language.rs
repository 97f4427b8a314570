//! File-extension based language detection and the lexical rules used by the
//! comment stripper.

use serde::{Deserialize, Serialize};

/// Coarse language family. Each family shares one set of comment and string rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LanguageKind {
    CFamily,
    Python,
    Shell,
    Markup,
    JavaScript,
    Java,
    Go,
    Rust,
    Yaml,
    Json,
    Sql,
    Unknown,
}

/// How a string literal opens, closes, and escapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StringDelimiter {
    pub open: &'static str,
    pub close: &'static str,
    /// Backslash escapes the next character.
    pub escapes: bool,
    /// The literal may span lines. Otherwise a newline ends it, which bounds
    /// the damage of an unterminated literal.
    pub multiline: bool,
    /// Rust-style char literal: only a literal when shaped `'x'` or `'\...'`.
    pub char_literal: bool,
}

const fn delim(open: &'static str, close: &'static str, escapes: bool, multiline: bool) -> StringDelimiter {
    StringDelimiter {
        open,
        close,
        escapes,
        multiline,
        char_literal: false,
    }
}

const DQ: StringDelimiter = delim("\"", "\"", true, false);
const SQ: StringDelimiter = delim("'", "'", true, false);

const C_STRINGS: &[StringDelimiter] = &[DQ, SQ];
const PY_STRINGS: &[StringDelimiter] = &[
    delim("\"\"\"", "\"\"\"", true, true),
    delim("'''", "'''", true, true),
    DQ,
    SQ,
];
const SHELL_STRINGS: &[StringDelimiter] = &[delim("\"", "\"", true, true), delim("'", "'", false, true)];
const JS_STRINGS: &[StringDelimiter] = &[DQ, SQ, delim("`", "`", true, true)];
const JAVA_STRINGS: &[StringDelimiter] = &[delim("\"\"\"", "\"\"\"", true, true), DQ, SQ];
const GO_STRINGS: &[StringDelimiter] = &[DQ, SQ, delim("`", "`", false, true)];
const RUST_STRINGS: &[StringDelimiter] = &[
    delim("r##\"", "\"##", false, true),
    delim("r#\"", "\"#", false, true),
    delim("r\"", "\"", false, true),
    delim("\"", "\"", true, true),
    StringDelimiter {
        open: "'",
        close: "'",
        escapes: true,
        multiline: false,
        char_literal: true,
    },
];
const YAML_STRINGS: &[StringDelimiter] = &[delim("\"", "\"", true, true), delim("'", "'", false, true)];
const JSON_STRINGS: &[StringDelimiter] = &[DQ];
const SQL_STRINGS: &[StringDelimiter] = &[delim("'", "'", false, true), delim("\"", "\"", false, true)];

const SLASH_BLOCK: &[(&str, &str)] = &[("/*", "*/")];

impl LanguageKind {
    pub const ALL: [LanguageKind; 12] = [
        LanguageKind::CFamily,
        LanguageKind::Python,
        LanguageKind::Shell,
        LanguageKind::Markup,
        LanguageKind::JavaScript,
        LanguageKind::Java,
        LanguageKind::Go,
        LanguageKind::Rust,
        LanguageKind::Yaml,
        LanguageKind::Json,
        LanguageKind::Sql,
        LanguageKind::Unknown,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LanguageKind::CFamily => "c-family",
            LanguageKind::Python => "python",
            LanguageKind::Shell => "shell",
            LanguageKind::Markup => "markup",
            LanguageKind::JavaScript => "javascript",
            LanguageKind::Java => "java",
            LanguageKind::Go => "go",
            LanguageKind::Rust => "rust",
            LanguageKind::Yaml => "yaml",
            LanguageKind::Json => "json",
            LanguageKind::Sql => "sql",
            LanguageKind::Unknown => "unknown",
        }
    }

    pub fn line_comment_markers(self) -> &'static [&'static str] {
        match self {
            LanguageKind::CFamily
            | LanguageKind::JavaScript
            | LanguageKind::Java
            | LanguageKind::Go
            | LanguageKind::Rust
            | LanguageKind::Json => &["//"],
            LanguageKind::Python | LanguageKind::Shell | LanguageKind::Yaml => &["#"],
            LanguageKind::Sql => &["--"],
            LanguageKind::Markup | LanguageKind::Unknown => &[],
        }
    }

    pub fn block_comment_pairs(self) -> &'static [(&'static str, &'static str)] {
        match self {
            LanguageKind::CFamily
            | LanguageKind::JavaScript
            | LanguageKind::Java
            | LanguageKind::Go
            | LanguageKind::Rust
            | LanguageKind::Json
            | LanguageKind::Sql => SLASH_BLOCK,
            LanguageKind::Markup => &[("<!--", "-->")],
            LanguageKind::Python | LanguageKind::Shell | LanguageKind::Yaml | LanguageKind::Unknown => &[],
        }
    }

    /// String delimiters, longest opener first.
    pub fn string_delimiters(self) -> &'static [StringDelimiter] {
        match self {
            LanguageKind::CFamily => C_STRINGS,
            LanguageKind::Python => PY_STRINGS,
            LanguageKind::Shell => SHELL_STRINGS,
            LanguageKind::JavaScript => JS_STRINGS,
            LanguageKind::Java => JAVA_STRINGS,
            LanguageKind::Go => GO_STRINGS,
            LanguageKind::Rust => RUST_STRINGS,
            LanguageKind::Yaml => YAML_STRINGS,
            LanguageKind::Json => JSON_STRINGS,
            LanguageKind::Sql => SQL_STRINGS,
            LanguageKind::Markup | LanguageKind::Unknown => &[],
        }
    }

    /// Line comments only start at the beginning of a word (`$#` and `a#b` are code).
    pub fn comment_needs_word_start(self) -> bool {
        matches!(self, LanguageKind::Shell | LanguageKind::Yaml)
    }

    /// Quotes only open a string at the beginning of a word (`don't` is plain text).
    pub fn quote_needs_word_start(self) -> bool {
        matches!(self, LanguageKind::Yaml)
    }
}

/// Exact file names (matched case-sensitively) that map to a kind regardless of extension.
const NAME_RULES: &[(&str, LanguageKind)] = &[
    ("Dockerfile", LanguageKind::Shell),
    ("Containerfile", LanguageKind::Shell),
    ("Makefile", LanguageKind::Shell),
    ("GNUmakefile", LanguageKind::Shell),
    ("Jenkinsfile", LanguageKind::CFamily),
    ("Vagrantfile", LanguageKind::Unknown),
    ("CMakeLists.txt", LanguageKind::Shell),
    (".gitignore", LanguageKind::Shell),
    (".dockerignore", LanguageKind::Shell),
    (".env", LanguageKind::Shell),
    ("Pipfile", LanguageKind::Shell),
];

const EXTENSION_RULES: &[(&str, LanguageKind)] = &[
    ("c", LanguageKind::CFamily),
    ("h", LanguageKind::CFamily),
    ("cc", LanguageKind::CFamily),
    ("cpp", LanguageKind::CFamily),
    ("cxx", LanguageKind::CFamily),
    ("hh", LanguageKind::CFamily),
    ("hpp", LanguageKind::CFamily),
    ("hxx", LanguageKind::CFamily),
    ("ino", LanguageKind::CFamily),
    ("cs", LanguageKind::CFamily),
    ("kt", LanguageKind::CFamily),
    ("kts", LanguageKind::CFamily),
    ("swift", LanguageKind::CFamily),
    ("scala", LanguageKind::CFamily),
    ("dart", LanguageKind::CFamily),
    ("groovy", LanguageKind::CFamily),
    ("gradle", LanguageKind::CFamily),
    ("proto", LanguageKind::CFamily),
    ("scss", LanguageKind::CFamily),
    ("less", LanguageKind::CFamily),
    ("py", LanguageKind::Python),
    ("pyi", LanguageKind::Python),
    ("pyw", LanguageKind::Python),
    ("sh", LanguageKind::Shell),
    ("bash", LanguageKind::Shell),
    ("zsh", LanguageKind::Shell),
    ("ksh", LanguageKind::Shell),
    ("fish", LanguageKind::Shell),
    ("mk", LanguageKind::Shell),
    ("cmake", LanguageKind::Shell),
    ("dockerfile", LanguageKind::Shell),
    ("toml", LanguageKind::Shell),
    ("cfg", LanguageKind::Shell),
    ("conf", LanguageKind::Shell),
    ("properties", LanguageKind::Shell),
    ("r", LanguageKind::Shell),
    ("pl", LanguageKind::Shell),
    ("rb", LanguageKind::Shell),
    ("html", LanguageKind::Markup),
    ("htm", LanguageKind::Markup),
    ("xhtml", LanguageKind::Markup),
    ("xml", LanguageKind::Markup),
    ("xsd", LanguageKind::Markup),
    ("xsl", LanguageKind::Markup),
    ("svg", LanguageKind::Markup),
    ("vue", LanguageKind::Markup),
    ("md", LanguageKind::Markup),
    ("markdown", LanguageKind::Markup),
    ("js", LanguageKind::JavaScript),
    ("jsx", LanguageKind::JavaScript),
    ("mjs", LanguageKind::JavaScript),
    ("cjs", LanguageKind::JavaScript),
    ("ts", LanguageKind::JavaScript),
    ("tsx", LanguageKind::JavaScript),
    ("mts", LanguageKind::JavaScript),
    ("cts", LanguageKind::JavaScript),
    ("java", LanguageKind::Java),
    ("go", LanguageKind::Go),
    ("rs", LanguageKind::Rust),
    ("yaml", LanguageKind::Yaml),
    ("yml", LanguageKind::Yaml),
    ("json", LanguageKind::Json),
    ("jsonc", LanguageKind::Json),
    ("json5", LanguageKind::Json),
    ("sql", LanguageKind::Sql),
];

/// Maps a repository-relative path to its language family.
///
/// Exact file-name rules win over extensions; `Dockerfile.dev` style names are
/// treated as their base name. Anything unmapped is [`LanguageKind::Unknown`].
pub fn detect_language(rel_path: &str) -> LanguageKind {
    let file_name = rel_path.rsplit('/').next().unwrap_or(rel_path);
    if let Some((_, kind)) = NAME_RULES.iter().find(|(name, _)| *name == file_name) {
        return *kind;
    }
    if let Some(stem) = file_name.split('.').next() {
        if stem == "Dockerfile" || stem == "Containerfile" {
            return LanguageKind::Shell;
        }
    }
    let Some((_, ext)) = file_name.rsplit_once('.') else {
        return LanguageKind::Unknown;
    };
    if ext.is_empty() {
        return LanguageKind::Unknown;
    }
    let ext = ext.to_ascii_lowercase();
    EXTENSION_RULES
        .iter()
        .find(|(e, _)| *e == ext)
        .map(|(_, kind)| *kind)
        .unwrap_or(LanguageKind::Unknown)
}
