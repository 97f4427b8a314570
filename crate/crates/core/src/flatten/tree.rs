use std::collections::BTreeMap;

use super::FlattenError;

/// Directory node. Children are kept in byte order; rendering lists
/// directories before files.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DirNode {
    pub dirs: BTreeMap<String, DirNode>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RepoStructureTree {
    pub root_name: String,
    pub root: DirNode,
}

impl RepoStructureTree {
    pub fn is_empty(&self) -> bool {
        self.root.dirs.is_empty() && self.root.files.is_empty()
    }

    /// File paths in depth-first order, directories before files at every level.
    pub fn leaves(&self) -> Vec<String> {
        fn walk(node: &DirNode, prefix: &str, out: &mut Vec<String>) {
            for (name, child) in &node.dirs {
                walk(child, &format!("{prefix}{name}/"), out);
            }
            out.extend(node.files.iter().map(|f| format!("{prefix}{f}")));
        }
        let mut out = Vec::new();
        walk(&self.root, "", &mut out);
        out
    }

    /// Two spaces of indentation per depth, trailing `/` on directories.
    pub fn render(&self) -> String {
        fn walk(node: &DirNode, depth: usize, out: &mut String) {
            for (name, child) in &node.dirs {
                push_line(out, depth, &format!("{name}/"));
                walk(child, depth + 1, out);
            }
            for file in &node.files {
                push_line(out, depth, file);
            }
        }
        fn push_line(out: &mut String, depth: usize, text: &str) {
            for _ in 0..depth {
                out.push_str("  ");
            }
            out.push_str(text);
            out.push('\n');
        }
        let mut out = String::new();
        walk(&self.root, 0, &mut out);
        out
    }
}

/// Checks that a path is repository-relative, `/`-separated and free of `..`.
pub(crate) fn check_rel_path(path: &str) -> Result<(), FlattenError> {
    let bad = path.is_empty()
        || path.starts_with('/')
        || path.contains('\\')
        || path.split('/').any(|seg| seg.is_empty() || seg == "." || seg == "..");
    if bad {
        return Err(FlattenError::InvalidPath(path.to_owned()));
    }
    Ok(())
}

pub fn build_structure_tree(paths: &[String]) -> Result<RepoStructureTree, FlattenError> {
    build_named_tree("", paths)
}

pub fn build_named_tree(root_name: &str, paths: &[String]) -> Result<RepoStructureTree, FlattenError> {
    let mut sorted: Vec<&String> = paths.iter().collect();
    sorted.sort();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(FlattenError::DuplicatePath(w[0].clone()));
    }

    let mut root = DirNode::default();
    for path in sorted {
        check_rel_path(path)?;
        let mut segments: Vec<&str> = path.split('/').collect();
        let file = segments.pop().expect("non-empty path has a segment");
        let mut node = &mut root;
        for seg in segments {
            if node.files.iter().any(|f| f == seg) {
                return Err(FlattenError::InvalidPath(path.clone()));
            }
            node = node.dirs.entry(seg.to_owned()).or_default();
        }
        if node.dirs.contains_key(file) {
            return Err(FlattenError::InvalidPath(path.clone()));
        }
        node.files.push(file.to_owned());
    }

    fn sort_files(node: &mut DirNode) {
        node.files.sort();
        node.dirs.values_mut().for_each(sort_files);
    }
    sort_files(&mut root);

    Ok(RepoStructureTree {
        root_name: root_name.to_owned(),
        root,
    })
}
