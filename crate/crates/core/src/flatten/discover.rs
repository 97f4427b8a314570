use std::fmt;
use std::path::Path;

use globset::{Glob, GlobSet, GlobSetBuilder};
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::language::{detect_language, LanguageKind};
use super::strip::strip_comments_with_warnings;
use super::FlattenError;

/// Version-control metadata, build output, binary media, archives, data dumps
/// and generated documentation.
pub const DEFAULT_EXCLUDES: &[&str] = &[
    "**/.git/**",
    "**/.hg/**",
    "**/.svn/**",
    "**/.bzr/**",
    "**/target/**",
    "**/build/**",
    "**/dist/**",
    "**/out/**",
    "**/node_modules/**",
    "**/__pycache__/**",
    "**/.venv/**",
    "**/venv/**",
    "**/.tox/**",
    "**/.mypy_cache/**",
    "**/.pytest_cache/**",
    "**/.gradle/**",
    "**/.idea/**",
    "**/.vscode/**",
    "**/.next/**",
    "**/coverage/**",
    "**/*.egg-info/**",
    "**/*.{png,jpg,jpeg,gif,bmp,ico,webp,tif,tiff,psd,svg,mp3,mp4,wav,ogg,flac,avi,mov,mkv,webm,pdf,ttf,otf,woff,woff2,eot}",
    "**/*.{zip,tar,gz,tgz,bz2,xz,7z,rar,jar,war,ear,whl,deb,rpm,dmg,iso}",
    "**/*.{pyc,pyo,class,o,obj,a,lib,so,dylib,dll,exe,bin,wasm}",
    "**/*.{csv,tsv,parquet,h5,hdf5,npy,npz,pkl,pickle,db,sqlite,sqlite3}",
    "**/*.{min.js,min.css,map,lock}",
    "**/package-lock.json",
    "**/pnpm-lock.yaml",
    "**/docs/_build/**",
    "**/site/**",
    "**/_site/**",
    "**/apidocs/**",
    "**/javadoc/**",
    "**/doc/html/**",
];

/// Configuration and manifest files kept even when an exclude pattern matches.
pub const DEFAULT_ALWAYS_KEEP: &[&str] = &[
    "Dockerfile",
    "Containerfile",
    "docker-compose.yml",
    "docker-compose.yaml",
    "compose.yml",
    "compose.yaml",
    "package.json",
    "pom.xml",
    "build.gradle",
    "build.gradle.kts",
    "settings.gradle",
    "requirements.txt",
    "pyproject.toml",
    "setup.py",
    "setup.cfg",
    "Pipfile",
    "Cargo.toml",
    "go.mod",
    "CMakeLists.txt",
    "Makefile",
    "Gemfile",
];

pub const DEFAULT_MAX_FILE_BYTES: u64 = 512 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Empty means "everything".
    pub include_globs: Vec<String>,
    pub exclude_globs: Vec<String>,
    pub always_keep_names: Vec<String>,
    pub max_file_bytes: u64,
    pub strip_comments: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            include_globs: Vec::new(),
            exclude_globs: DEFAULT_EXCLUDES.iter().map(|s| s.to_string()).collect(),
            always_keep_names: DEFAULT_ALWAYS_KEEP.iter().map(|s| s.to_string()).collect(),
            max_file_bytes: DEFAULT_MAX_FILE_BYTES,
            strip_comments: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExclusionReason {
    ExcludedByPattern,
    NotIncluded,
    TooLarge,
    BinaryOrNonText,
    SymlinkNotFollowed,
}

impl ExclusionReason {
    pub fn tag(self) -> &'static str {
        match self {
            ExclusionReason::ExcludedByPattern => "excluded-by-pattern",
            ExclusionReason::NotIncluded => "not-included",
            ExclusionReason::TooLarge => "too-large",
            ExclusionReason::BinaryOrNonText => "binary-or-non-text",
            ExclusionReason::SymlinkNotFollowed => "symlink-not-followed",
        }
    }
}

impl fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileEntry {
    pub rel_path: String,
    pub kind: LanguageKind,
    pub raw_bytes: u64,
    /// Comment-stripped text; empty for excluded entries.
    pub content: String,
    pub excluded: Option<ExclusionReason>,
    /// Matched an always-keep name; budget truncation drops these last.
    pub pinned: bool,
    pub warnings: Vec<String>,
}

impl FileEntry {
    /// An included, unpinned entry whose content is taken as already stripped.
    pub fn included(rel_path: impl Into<String>, kind: LanguageKind, content: impl Into<String>) -> Self {
        let content = content.into();
        Self {
            rel_path: rel_path.into(),
            kind,
            raw_bytes: content.len() as u64,
            content,
            excluded: None,
            pinned: false,
            warnings: Vec::new(),
        }
    }

    pub fn is_included(&self) -> bool {
        self.excluded.is_none()
    }
}

fn build_globset(patterns: &[String]) -> Result<GlobSet, FlattenError> {
    let mut builder = GlobSetBuilder::new();
    for p in patterns {
        let glob = Glob::new(p).map_err(|e| FlattenError::InvalidGlob {
            pattern: p.clone(),
            message: e.to_string(),
        })?;
        builder.add(glob);
    }
    builder.build().map_err(|e| FlattenError::InvalidGlob {
        pattern: patterns.join(","),
        message: e.to_string(),
    })
}

/// Compiled form of a [`FilterConfig`].
pub struct FileFilter {
    include: Option<GlobSet>,
    exclude: GlobSet,
    always_keep: Vec<String>,
}

impl FileFilter {
    pub fn new(cfg: &FilterConfig) -> Result<Self, FlattenError> {
        let include = if cfg.include_globs.is_empty() {
            None
        } else {
            Some(build_globset(&cfg.include_globs)?)
        };
        Ok(Self {
            include,
            exclude: build_globset(&cfg.exclude_globs)?,
            always_keep: cfg.always_keep_names.clone(),
        })
    }

    pub fn is_always_keep(&self, rel_path: &str) -> bool {
        let name = rel_path.rsplit('/').next().unwrap_or(rel_path);
        self.always_keep.iter().any(|k| k == name)
    }

    /// Pattern-level decision; size and content checks happen later.
    pub fn classify(&self, rel_path: &str) -> Option<ExclusionReason> {
        if self.is_always_keep(rel_path) {
            return None;
        }
        if self.exclude.is_match(rel_path) {
            return Some(ExclusionReason::ExcludedByPattern);
        }
        match &self.include {
            Some(set) if !set.is_match(rel_path) => Some(ExclusionReason::NotIncluded),
            _ => None,
        }
    }
}

/// Walks `root` (symlinks are not followed) and classifies every file.
///
/// The returned list holds both included and excluded entries, sorted by
/// `rel_path`. Fails with `EmptyAfterFiltering` when nothing survives.
pub fn discover_files(root: &Path, cfg: &FilterConfig) -> Result<Vec<FileEntry>, FlattenError> {
    if !root.is_dir() {
        return Err(FlattenError::RepoNotFound(root.to_path_buf()));
    }
    let filter = FileFilter::new(cfg)?;
    let mut entries = Vec::new();

    for item in WalkDir::new(root).follow_links(false).sort_by_file_name() {
        let item = item.map_err(|e| FlattenError::Io {
            path: e.path().map(Path::to_path_buf).unwrap_or_else(|| root.to_path_buf()),
            message: e.to_string(),
        })?;
        let file_type = item.file_type();
        if file_type.is_dir() {
            continue;
        }
        let Some(rel_path) = relative_path(root, item.path()) else {
            continue;
        };
        let kind = detect_language(&rel_path);
        let pinned = filter.is_always_keep(&rel_path);
        let mut entry = FileEntry {
            rel_path,
            kind,
            raw_bytes: 0,
            content: String::new(),
            excluded: None,
            pinned,
            warnings: Vec::new(),
        };
        if file_type.is_symlink() {
            entry.excluded = Some(ExclusionReason::SymlinkNotFollowed);
            entries.push(entry);
            continue;
        }
        let path = item.path();
        entry.raw_bytes = item.metadata().map(|m| m.len()).map_err(|e| FlattenError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        entry.excluded = filter.classify(&entry.rel_path);
        if entry.excluded.is_none() && entry.raw_bytes > cfg.max_file_bytes {
            entry.excluded = Some(ExclusionReason::TooLarge);
        }
        if entry.excluded.is_none() {
            let bytes = std::fs::read(path).map_err(|e| FlattenError::Io {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
            match decode_text(bytes) {
                Some(text) => load_content(&mut entry, text, cfg.strip_comments),
                None => entry.excluded = Some(ExclusionReason::BinaryOrNonText),
            }
        }
        entries.push(entry);
    }

    entries.sort_by(|a, b| a.rel_path.cmp(&b.rel_path));
    if !entries.iter().any(FileEntry::is_included) {
        return Err(FlattenError::EmptyAfterFiltering);
    }
    Ok(entries)
}

fn relative_path(root: &Path, path: &Path) -> Option<String> {
    let rel = path.strip_prefix(root).ok()?;
    let parts: Vec<String> = rel
        .components()
        .map(|c| c.as_os_str().to_str().map(str::to_owned))
        .collect::<Option<_>>()?;
    if parts.is_empty() {
        return None;
    }
    Some(parts.join("/"))
}

fn decode_text(bytes: Vec<u8>) -> Option<String> {
    if bytes.contains(&0) {
        return None;
    }
    String::from_utf8(bytes).ok()
}

fn load_content(entry: &mut FileEntry, text: String, strip: bool) {
    if !strip {
        entry.content = text;
        return;
    }
    let (stripped, warnings) = strip_comments_with_warnings(&text, entry.kind);
    entry.warnings = warnings.into_iter().map(|w| w.to_string()).collect();
    entry.content = drop_emptied_lines(&text, &stripped);
}

/// Removes lines that only held comments. `stripped` keeps every newline of
/// `original`, so the two line sequences align one to one.
fn drop_emptied_lines(original: &str, stripped: &str) -> String {
    let mut out = String::with_capacity(stripped.len());
    for (before, after) in original.split_inclusive('\n').zip(stripped.split_inclusive('\n')) {
        let emptied = !before.trim().is_empty() && after.trim().is_empty();
        if !emptied {
            out.push_str(after);
        }
    }
    out
}
