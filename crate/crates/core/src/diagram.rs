//! Diagram pipeline: find fenced PlantUML blocks in the assembled document,
//! check them, render them through a pluggable backend, and substitute image
//! references. Rendering failures never abort; the source stays in place with
//! an annotation.

use std::ops::Range;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::orchestrate::IntermediateDocument;

pub const IMAGES_DIR: &str = "images";
const DEFAULT_RENDER_TIMEOUT: Duration = Duration::from_secs(60);

/// A fenced code block found by [`fenced_blocks`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fence {
    /// First word of the info string, lower-cased.
    pub language: String,
    /// Opening fence line start through the end of the closing fence line
    /// (without its newline), or the end of the text if never closed.
    pub span: Range<usize>,
    pub body: Range<usize>,
    pub closed: bool,
}

/// Scans Markdown for backtick or tilde fenced code blocks.
pub fn fenced_blocks(text: &str) -> Vec<Fence> {
    let mut out = Vec::new();
    let mut open: Option<(usize, usize, char, usize, String)> = None; // start, body_start, char, len, lang
    let mut pos = 0;
    for line in text.split_inclusive('\n') {
        let line_start = pos;
        pos += line.len();
        let content = line.trim_end_matches(['\n', '\r']);
        let indent = content.len() - content.trim_start_matches(' ').len();
        if indent > 3 {
            continue;
        }
        let trimmed = &content[indent..];
        let fence_char = match trimmed.chars().next() {
            Some(c @ ('`' | '~')) => c,
            _ => continue,
        };
        let run = trimmed.chars().take_while(|&c| c == fence_char).count();
        if run < 3 {
            continue;
        }
        match &open {
            None => {
                let info = trimmed[run..].trim();
                if fence_char == '`' && info.contains('`') {
                    continue;
                }
                let lang = info.split_whitespace().next().unwrap_or("").to_ascii_lowercase();
                open = Some((line_start, pos, fence_char, run, lang));
            }
            Some((start, body_start, c, len, lang)) => {
                if fence_char == *c && run >= *len && trimmed[run..].trim().is_empty() {
                    out.push(Fence {
                        language: lang.clone(),
                        span: *start..line_start + content.len(),
                        body: *body_start..line_start,
                        closed: true,
                    });
                    open = None;
                }
            }
        }
    }
    if let Some((start, body_start, _, _, lang)) = open {
        out.push(Fence {
            language: lang,
            span: start..text.len(),
            body: body_start.min(text.len())..text.len(),
            closed: false,
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagramBlock {
    pub section_index: u32,
    pub ordinal: u32,
    /// Fence body with surrounding blank lines removed.
    pub source: String,
    /// Byte range of the whole fenced block in the document.
    pub span: Range<usize>,
}

impl DiagramBlock {
    /// `section-<i>-diagram-<k>.png`
    pub fn image_name(&self) -> String {
        image_name(self.section_index, self.ordinal)
    }

    pub fn image_rel_path(&self) -> String {
        format!("{IMAGES_DIR}/{}", self.image_name())
    }
}

pub fn image_name(section_index: u32, ordinal: u32) -> String {
    format!("section-{section_index}-diagram-{ordinal}.png")
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DiagramScan {
    pub blocks: Vec<DiagramBlock>,
    pub warnings: Vec<String>,
}

/// Finds `plantuml` fences in document order. `@startuml` outside such a
/// fence is ignored with a warning.
pub fn extract_diagrams(doc: &IntermediateDocument) -> DiagramScan {
    let text = doc.markdown.as_str();
    let fences = fenced_blocks(text);
    let mut scan = DiagramScan::default();
    let mut ordinals: std::collections::BTreeMap<u32, u32> = Default::default();

    for fence in fences
        .iter()
        .filter(|f| f.language == "plantuml" || f.language == "puml")
    {
        let section_index = doc.section_at(fence.span.start).unwrap_or(0);
        let ordinal = ordinals.entry(section_index).or_insert(0);
        scan.blocks.push(DiagramBlock {
            section_index,
            ordinal: *ordinal,
            source: text[fence.body.clone()]
                .trim_matches(|c| c == '\n' || c == '\r')
                .to_owned(),
            span: fence.span.clone(),
        });
        *ordinal += 1;
    }

    let mut pos = 0;
    for line in text.split_inclusive('\n') {
        let start = pos;
        pos += line.len();
        if line.trim_start().starts_with("@startuml") && !fences.iter().any(|f| f.span.contains(&start)) {
            let line_no = text[..start].matches('\n').count() + 1;
            scan.warnings
                .push(format!("unfenced @startuml on line {line_no} ignored"));
        }
    }
    scan
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InvalidReason {
    MissingStartuml,
    Unterminated,
    EmptyBody,
    UnbalancedDelimiters,
}

impl InvalidReason {
    pub fn tag(self) -> &'static str {
        match self {
            InvalidReason::MissingStartuml => "missing-startuml",
            InvalidReason::Unterminated => "unterminated",
            InvalidReason::EmptyBody => "empty-body",
            InvalidReason::UnbalancedDelimiters => "unbalanced-delimiters",
        }
    }
}

/// Marker and bracket checks. Lines starting with `'` are PlantUML comments;
/// brackets inside double-quoted strings are ignored.
pub fn validate_diagram(block: &DiagramBlock) -> Result<(), InvalidReason> {
    let lines: Vec<&str> = block.source.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let Some(first) = lines.first() else {
        return Err(InvalidReason::MissingStartuml);
    };
    if !first.starts_with("@startuml") {
        return Err(InvalidReason::MissingStartuml);
    }
    if lines.len() < 2 || !lines[lines.len() - 1].starts_with("@enduml") {
        return Err(InvalidReason::Unterminated);
    }
    let body = &lines[1..lines.len() - 1];
    if body.is_empty() {
        return Err(InvalidReason::EmptyBody);
    }

    let mut stack = Vec::new();
    for line in body.iter().filter(|l| !l.starts_with('\'')) {
        let mut in_string = false;
        for c in line.chars() {
            match c {
                '"' => in_string = !in_string,
                _ if in_string => {}
                '{' | '[' | '(' => stack.push(c),
                '}' | ']' | ')' => {
                    let want = match c {
                        '}' => '{',
                        ']' => '[',
                        _ => '(',
                    };
                    if stack.pop() != Some(want) {
                        return Err(InvalidReason::UnbalancedDelimiters);
                    }
                }
                _ => {}
            }
        }
    }
    if stack.is_empty() {
        Ok(())
    } else {
        Err(InvalidReason::UnbalancedDelimiters)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum RenderStatus {
    /// Path relative to the output directory.
    Rendered {
        image: String,
    },
    Passthrough {
        reason: String,
    },
    Invalid {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderOutcome {
    pub block: DiagramBlock,
    pub status: RenderStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum RendererConfig {
    /// Runs `<command> -tpng <file.puml>` and collects `<file.png>`.
    External {
        command: PathBuf,
    },
    /// POSTs the source as text to `url` and stores the response body.
    Server {
        url: String,
    },
    None,
}

/// Renders valid blocks into `<out_dir>/images/`. Never fails.
pub struct Renderer {
    config: RendererConfig,
    out_dir: PathBuf,
    timeout: Duration,
}

impl Renderer {
    pub fn new(config: RendererConfig, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            config,
            out_dir: out_dir.into(),
            timeout: DEFAULT_RENDER_TIMEOUT,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn images_dir(&self) -> PathBuf {
        self.out_dir.join(IMAGES_DIR)
    }

    pub async fn render(&self, block: &DiagramBlock) -> RenderOutcome {
        let status = match &self.config {
            RendererConfig::None => passthrough("rendering-disabled"),
            RendererConfig::External { command } => self.render_external(command, block).await,
            RendererConfig::Server { url } => self.render_server(url, block).await,
        };
        RenderOutcome {
            block: block.clone(),
            status,
        }
    }

    /// Validates every block, renders the valid ones concurrently, and
    /// returns outcomes in block order.
    pub async fn render_all(&self, blocks: &[DiagramBlock]) -> Vec<RenderOutcome> {
        let jobs = blocks.iter().map(|block| async move {
            match validate_diagram(block) {
                Ok(()) => self.render(block).await,
                Err(reason) => RenderOutcome {
                    block: block.clone(),
                    status: RenderStatus::Invalid {
                        reason: reason.tag().to_owned(),
                    },
                },
            }
        });
        futures::future::join_all(jobs).await
    }

    async fn store_image(&self, block: &DiagramBlock, bytes: &[u8]) -> RenderStatus {
        if bytes.is_empty() {
            return passthrough("renderer-empty-output");
        }
        let dir = self.images_dir();
        if let Err(e) = tokio::fs::create_dir_all(&dir).await {
            return passthrough(&format!("image-write-failed: {e}"));
        }
        match tokio::fs::write(dir.join(block.image_name()), bytes).await {
            Ok(()) => RenderStatus::Rendered {
                image: block.image_rel_path(),
            },
            Err(e) => passthrough(&format!("image-write-failed: {e}")),
        }
    }

    async fn render_external(&self, command: &Path, block: &DiagramBlock) -> RenderStatus {
        let work = match tempfile::tempdir() {
            Ok(d) => d,
            Err(e) => return passthrough(&format!("renderer-failed: {e}")),
        };
        let stem = block.image_name().trim_end_matches(".png").to_owned();
        let source_path = work.path().join(format!("{stem}.puml"));
        if let Err(e) = tokio::fs::write(&source_path, format!("{}\n", block.source)).await {
            return passthrough(&format!("renderer-failed: {e}"));
        }
        let child = tokio::process::Command::new(command)
            .arg("-tpng")
            .arg(&source_path)
            .stdin(std::process::Stdio::null())
            .stdout(std::process::Stdio::null())
            .stderr(std::process::Stdio::piped())
            .kill_on_drop(true)
            .spawn();
        let child = match child {
            Ok(c) => c,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return passthrough("renderer-unavailable"),
            Err(e) => return passthrough(&format!("renderer-failed: {e}")),
        };
        let output = match tokio::time::timeout(self.timeout, child.wait_with_output()).await {
            Ok(Ok(o)) => o,
            Ok(Err(e)) => return passthrough(&format!("renderer-failed: {e}")),
            Err(_) => return passthrough("renderer-timeout"),
        };
        if !output.status.success() {
            let stderr = String::from_utf8_lossy(&output.stderr);
            let first = stderr.lines().next().unwrap_or("").trim();
            return passthrough(format!("renderer-failed: exit {} {first}", output.status.code().unwrap_or(-1)).trim());
        }
        match tokio::fs::read(work.path().join(format!("{stem}.png"))).await {
            Ok(bytes) => self.store_image(block, &bytes).await,
            Err(_) => passthrough("renderer-no-output"),
        }
    }

    async fn render_server(&self, url: &str, block: &DiagramBlock) -> RenderStatus {
        let client = match reqwest::Client::builder().timeout(self.timeout).build() {
            Ok(c) => c,
            Err(e) => return passthrough(&format!("renderer-failed: {e}")),
        };
        let response = client
            .post(url)
            .header(reqwest::header::CONTENT_TYPE, "text/plain; charset=utf-8")
            .body(block.source.clone())
            .send()
            .await;
        let response = match response {
            Ok(r) => r,
            Err(e) if e.is_connect() => return passthrough("renderer-unavailable"),
            Err(e) if e.is_timeout() => return passthrough("renderer-timeout"),
            Err(e) => return passthrough(&format!("renderer-failed: {e}")),
        };
        if !response.status().is_success() {
            return passthrough(&format!("renderer-failed: HTTP {}", response.status().as_u16()));
        }
        match response.bytes().await {
            Ok(bytes) => self.store_image(block, &bytes).await,
            Err(e) => passthrough(&format!("renderer-failed: {e}")),
        }
    }
}

fn passthrough(reason: &str) -> RenderStatus {
    RenderStatus::Passthrough {
        reason: reason.to_owned(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DiagramError {
    #[error("diagram outcomes do not match the document: {0}")]
    SpanMismatch(String),
}

/// Final document: Markdown plus the images it references.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchitectureDocument {
    pub markdown: String,
    /// Paths relative to the output directory.
    pub images: Vec<String>,
}

fn alt_text(block: &DiagramBlock) -> String {
    if block.ordinal == 0 {
        format!("Section {} diagram", block.section_index)
    } else {
        format!("Section {} diagram {}", block.section_index, block.ordinal + 1)
    }
}

/// Replaces rendered blocks with image links and annotates the rest; bytes
/// outside the replaced spans are untouched.
pub fn substitute(
    doc: &IntermediateDocument,
    outcomes: &[RenderOutcome],
) -> Result<ArchitectureDocument, DiagramError> {
    let text = doc.markdown.as_str();
    let expected = extract_diagrams(doc).blocks;
    if expected.len() != outcomes.len() {
        return Err(DiagramError::SpanMismatch(format!(
            "{} blocks in document, {} outcomes",
            expected.len(),
            outcomes.len()
        )));
    }
    let mut sorted: Vec<&RenderOutcome> = outcomes.iter().collect();
    sorted.sort_by_key(|o| o.block.span.start);
    for (want, got) in expected.iter().zip(&sorted) {
        if want.span != got.block.span {
            return Err(DiagramError::SpanMismatch(format!(
                "expected block at {:?}, got {:?}",
                want.span, got.block.span
            )));
        }
    }

    let mut markdown = text.to_owned();
    let mut images = Vec::new();
    for outcome in sorted.iter().rev() {
        let span = outcome.block.span.clone();
        let replacement = match &outcome.status {
            RenderStatus::Rendered { image } => {
                images.push(image.clone());
                format!("![{}]({image})", alt_text(&outcome.block))
            }
            RenderStatus::Passthrough { reason } => {
                format!("<!-- diagram not rendered: {reason} -->\n{}", &text[span.clone()])
            }
            RenderStatus::Invalid { reason } => {
                format!("<!-- diagram invalid: {reason} -->\n{}", &text[span.clone()])
            }
        };
        markdown.replace_range(span, &replacement);
    }
    images.reverse();
    Ok(ArchitectureDocument { markdown, images })
}
