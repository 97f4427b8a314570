use std::path::{Path, PathBuf};
use std::process::Stdio;

use tempfile::TempDir;

use crate::CliError;

/// A local checkout. Holds the temporary clone directory, if any, which is
/// deleted on drop.
#[derive(Debug)]
pub struct Acquired {
    pub root: PathBuf,
    pub name: String,
    pub remote: bool,
    _clone_dir: Option<TempDir>,
}

pub fn looks_like_url(source: &str) -> bool {
    ["http://", "https://", "ssh://", "git://", "file://", "git@"]
        .iter()
        .any(|p| source.starts_with(p))
}

/// Last path segment without a `.git` suffix.
pub fn repository_name(source: &str) -> String {
    let trimmed = source.trim_end_matches('/');
    let last = trimmed.rsplit(['/', ':']).next().unwrap_or(trimmed);
    let name = last.strip_suffix(".git").unwrap_or(last);
    if name.is_empty() {
        "repository".to_owned()
    } else {
        name.to_owned()
    }
}

pub async fn acquire_repository(source: &str) -> Result<Acquired, CliError> {
    if looks_like_url(source) {
        return clone(source).await;
    }
    let path = Path::new(source);
    if !path.is_dir() {
        return Err(CliError::RepoNotFound(path.to_path_buf()));
    }
    let root = path
        .canonicalize()
        .map_err(|_| CliError::RepoNotFound(path.to_path_buf()))?;
    let name = root
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "repository".to_owned());
    Ok(Acquired {
        root,
        name,
        remote: false,
        _clone_dir: None,
    })
}

async fn clone(url: &str) -> Result<Acquired, CliError> {
    let dir = tempfile::Builder::new()
        .prefix("ciao-clone-")
        .tempdir()
        .map_err(|e| CliError::CloneFailed(e.to_string()))?;
    let name = repository_name(url);
    let root = dir.path().join(&name);
    tracing::info!("cloning {url}");
    let output = tokio::process::Command::new("git")
        .args(["clone", "--depth", "1", "--quiet", "--"])
        .arg(url)
        .arg(&root)
        .env("GIT_TERMINAL_PROMPT", "0")
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .kill_on_drop(true)
        .output()
        .await
        .map_err(|e| CliError::CloneFailed(format!("cannot run git: {e}")))?;
    if !output.status.success() {
        let message = String::from_utf8_lossy(&output.stderr).trim().to_owned();
        return Err(CliError::CloneFailed(if message.is_empty() {
            format!("git exited with {}", output.status)
        } else {
            message
        }));
    }
    Ok(Acquired {
        root,
        name,
        remote: true,
        _clone_dir: Some(dir),
    })
}
