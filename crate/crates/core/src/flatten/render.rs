use std::path::Path;

use super::discover::FileEntry;
use super::tree::RepoStructureTree;
use super::FlattenError;

pub const HEADER_LINE: &str = "# Flattened Repository";
pub const STRUCTURE_HEADING: &str = "## Directory Structure";
pub const FILE_DELIMITER: &str = "================";
const FENCE: &str = "```";

/// Default divisor for the character-count token heuristic.
pub const DEFAULT_CHARS_PER_TOKEN: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileBlock {
    pub rel_path: String,
    pub content: String,
    pub pinned: bool,
}

impl FileBlock {
    /// Delimiter, `File:` line, delimiter, content (newline-terminated), blank line.
    pub fn render_into(&self, out: &mut String) {
        out.push_str(FILE_DELIMITER);
        out.push('\n');
        out.push_str("File: ");
        out.push_str(&self.rel_path);
        out.push('\n');
        out.push_str(FILE_DELIMITER);
        out.push('\n');
        out.push_str(&self.content);
        if !self.content.is_empty() && !self.content.ends_with('\n') {
            out.push('\n');
        }
        out.push('\n');
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_into(&mut out);
        out
    }
}

/// The single-text view of a repository handed to the model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlattenedRepository {
    /// Header line, blank line, and the directory-structure block.
    pub header: String,
    pub structure_block: String,
    pub file_blocks: Vec<FileBlock>,
    pub char_count: usize,
    pub estimated_tokens: usize,
    text: String,
}

impl FlattenedRepository {
    pub fn as_text(&self) -> &str {
        &self.text
    }

    pub fn into_text(self) -> String {
        self.text
    }

    /// Everything that precedes the file blocks.
    pub fn preamble(&self) -> String {
        format!("{}{}", self.header, self.structure_block)
    }

    /// Writes the serialization to `path`, byte for byte.
    pub fn dump(&self, path: &Path) -> std::io::Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, self.text.as_bytes())
    }
}

/// `ceil(chars / chars_per_token)`, counting Unicode scalar values.
pub fn estimate_tokens_with(text: &str, chars_per_token: usize) -> usize {
    let per = chars_per_token.max(1);
    text.chars().count().div_ceil(per)
}

fn render_structure(tree: &RepoStructureTree) -> String {
    let mut out = String::new();
    out.push_str(STRUCTURE_HEADING);
    out.push('\n');
    out.push_str(FENCE);
    out.push('\n');
    out.push_str(&tree.render());
    out.push_str(FENCE);
    out.push('\n');
    out.push('\n');
    out
}

/// Serializes the tree and the included entries. Entry order does not matter:
/// blocks follow the tree's depth-first order.
pub fn render_flattened(tree: &RepoStructureTree, entries: &[FileEntry]) -> Result<FlattenedRepository, FlattenError> {
    let included: Vec<&FileEntry> = entries.iter().filter(|e| e.is_included()).collect();
    let leaves = tree.leaves();
    if included.len() != leaves.len() {
        return Err(FlattenError::LeafMismatch(format!(
            "{} entries for {} tree leaves",
            included.len(),
            leaves.len()
        )));
    }

    let mut file_blocks = Vec::with_capacity(leaves.len());
    for leaf in &leaves {
        let entry = included
            .iter()
            .find(|e| &e.rel_path == leaf)
            .ok_or_else(|| FlattenError::LeafMismatch(format!("no entry for {leaf}")))?;
        file_blocks.push(FileBlock {
            rel_path: entry.rel_path.clone(),
            content: entry.content.clone(),
            pinned: entry.pinned,
        });
    }

    let header = format!("{HEADER_LINE}\n\n");
    let structure_block = render_structure(tree);
    Ok(assemble(header, structure_block, file_blocks))
}

fn assemble(header: String, structure_block: String, file_blocks: Vec<FileBlock>) -> FlattenedRepository {
    let mut text = String::with_capacity(header.len() + structure_block.len());
    text.push_str(&header);
    text.push_str(&structure_block);
    for block in &file_blocks {
        block.render_into(&mut text);
    }
    let char_count = text.chars().count();
    FlattenedRepository {
        header,
        structure_block,
        file_blocks,
        char_count,
        estimated_tokens: char_count.div_ceil(DEFAULT_CHARS_PER_TOKEN),
        text,
    }
}
