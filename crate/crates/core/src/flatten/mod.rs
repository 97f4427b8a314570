//! Repository flattening: discover files, strip comments, and serialize the
//! directory tree plus file contents into one deterministic text.

mod discover;
mod language;
mod render;
mod strip;
mod tree;

use std::path::{Path, PathBuf};

pub use discover::{
    discover_files, ExclusionReason, FileEntry, FileFilter, FilterConfig, DEFAULT_ALWAYS_KEEP, DEFAULT_EXCLUDES,
    DEFAULT_MAX_FILE_BYTES,
};
pub use language::{detect_language, LanguageKind, StringDelimiter};
pub use render::{
    estimate_tokens_with, render_flattened, FileBlock, FlattenedRepository, DEFAULT_CHARS_PER_TOKEN, FILE_DELIMITER,
    HEADER_LINE, STRUCTURE_HEADING,
};
pub use strip::{strip_comments, strip_comments_with_warnings, StripWarning};
pub use tree::{build_named_tree, build_structure_tree, DirNode, RepoStructureTree};

#[derive(Debug, thiserror::Error)]
pub enum FlattenError {
    #[error("repository not found: {}", .0.display())]
    RepoNotFound(PathBuf),
    #[error("no files left after filtering")]
    EmptyAfterFiltering,
    #[error("duplicate path: {0}")]
    DuplicatePath(String),
    #[error("invalid repository-relative path: {0}")]
    InvalidPath(String),
    #[error("file entries do not match the structure tree: {0}")]
    LeafMismatch(String),
    #[error("invalid glob `{pattern}`: {message}")]
    InvalidGlob { pattern: String, message: String },
    #[error("I/O error at {}: {message}", path.display())]
    Io { path: PathBuf, message: String },
}

/// Everything the flattening step produces.
#[derive(Debug, Clone)]
pub struct Flattening {
    pub entries: Vec<FileEntry>,
    pub tree: RepoStructureTree,
    pub flat: FlattenedRepository,
}

impl Flattening {
    pub fn included_count(&self) -> usize {
        self.entries.iter().filter(|e| e.is_included()).count()
    }
}

/// Discover, build the tree and render in one call.
pub fn flatten_repository(root: &Path, cfg: &FilterConfig) -> Result<Flattening, FlattenError> {
    let entries = discover_files(root, cfg)?;
    let paths: Vec<String> = entries
        .iter()
        .filter(|e| e.is_included())
        .map(|e| e.rel_path.clone())
        .collect();
    let root_name = root
        .canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_default();
    let tree = build_named_tree(&root_name, &paths)?;
    let flat = render_flattened(&tree, &entries)?;
    Ok(Flattening { entries, tree, flat })
}
