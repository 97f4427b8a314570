//! Per-section generation with bounded fan-out, shape checks with a single
//! repair round, and assembly of the intermediate document.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use crate::diagram::fenced_blocks;
use crate::flatten::FlattenedRepository;
use crate::llm::{CompletionRequest, Gateway, LlmError, DEFAULT_MAX_OUTPUT_TOKENS, DEFAULT_TEMPERATURE};
use crate::prompt::{build_bundle, GlobalPromptConfig, PromptBundle, PromptError, TokenBudget, PART_SEPARATOR};
use crate::template::{validate_template, DocumentationTemplate, TemplateSection};

pub const SECTION_SEPARATOR: &str = "\n---\n\n";
pub const TOOL_NAME: &str = "ciao";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SectionWarning {
    MissingHeading,
    MissingSubsection,
    MissingDiagram,
    MalformedDiagram,
}

impl SectionWarning {
    pub fn tag(self) -> &'static str {
        match self {
            SectionWarning::MissingHeading => "missing-heading",
            SectionWarning::MissingSubsection => "missing-subsection",
            SectionWarning::MissingDiagram => "missing-diagram",
            SectionWarning::MalformedDiagram => "malformed-diagram",
        }
    }

    fn instruction(self, spec: &TemplateSection) -> String {
        match self {
            SectionWarning::MissingHeading => {
                format!("Start the section with the exact heading line `{}`.", spec.heading())
            }
            SectionWarning::MissingSubsection => format!(
                "Include every required subsection heading exactly as given: {}.",
                spec.subsection_headings()
                    .iter()
                    .map(|h| format!("`{h}`"))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
            SectionWarning::MissingDiagram => {
                "Include the required diagram as a fenced code block whose info string is `plantuml`.".to_owned()
            }
            SectionWarning::MalformedDiagram => {
                "Every `plantuml` block must begin with `@startuml` and end with `@enduml`.".to_owned()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionUsage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedSection {
    pub section_id: String,
    pub index: u32,
    pub markdown: String,
    pub usage: SectionUsage,
    pub duration_ms: u64,
    pub warnings: Vec<SectionWarning>,
    /// Gateway calls spent on this section (1, or 2 after a repair).
    pub calls: u32,
    /// Provider attempts across those calls, retries included.
    pub attempts: u32,
}

fn has_line(markdown: &str, wanted: &str) -> bool {
    markdown.lines().any(|l| l.trim() == wanted)
}

/// Shape checks for one generated section. Never fails; an empty list means
/// the section follows the template.
pub fn validate_section(gs: &GeneratedSection, spec: &TemplateSection) -> Vec<SectionWarning> {
    let mut warnings = Vec::new();
    if !has_line(&gs.markdown, &spec.heading()) {
        warnings.push(SectionWarning::MissingHeading);
    }
    if spec.subsection_headings().iter().any(|h| !has_line(&gs.markdown, h)) {
        warnings.push(SectionWarning::MissingSubsection);
    }
    let diagrams: Vec<_> = fenced_blocks(&gs.markdown)
        .into_iter()
        .filter(|f| f.language == "plantuml" || f.language == "puml")
        .collect();
    if spec.diagram.is_some() && diagrams.is_empty() {
        warnings.push(SectionWarning::MissingDiagram);
    }
    let malformed = diagrams.iter().any(|f| {
        let body: Vec<&str> = gs.markdown[f.body.clone()]
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect();
        !f.closed
            || !body.first().is_some_and(|l| l.starts_with("@startuml"))
            || !body.last().is_some_and(|l| l.starts_with("@enduml"))
    });
    if malformed {
        warnings.push(SectionWarning::MalformedDiagram);
    }
    warnings
}

/// Text appended to the original user prompt for the repair call.
pub fn repair_instruction(warnings: &[SectionWarning], spec: &TemplateSection) -> String {
    let mut out = String::from("Your previous answer for this section did not follow the required structure. Regenerate the whole section and fix the following:\n");
    for w in warnings {
        out.push_str(&format!("- {}: {}\n", w.tag(), w.instruction(spec)));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RequestSettings {
    pub model_id: String,
    pub max_output_tokens: u32,
    pub temperature: f32,
}

impl RequestSettings {
    pub fn new(model_id: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            temperature: DEFAULT_TEMPERATURE,
        }
    }

    fn request(&self, bundle: &PromptBundle, user_text: String) -> CompletionRequest {
        CompletionRequest {
            label: bundle.section_id.clone(),
            model_id: self.model_id.clone(),
            system_text: bundle.global_part.clone(),
            user_text,
            max_output_tokens: self.max_output_tokens,
            temperature: self.temperature,
        }
    }
}

async fn generate_one(
    spec: &TemplateSection,
    bundle: &PromptBundle,
    gateway: &Gateway,
    settings: &RequestSettings,
) -> Result<GeneratedSection, LlmError> {
    let result = gateway.complete(&settings.request(bundle, bundle.user_text())).await?;
    let mut gs = GeneratedSection {
        section_id: spec.id.clone(),
        index: spec.index,
        markdown: result.text,
        usage: SectionUsage {
            input_tokens: result.input_tokens,
            output_tokens: result.output_tokens,
        },
        duration_ms: result.latency_ms,
        warnings: Vec::new(),
        calls: 1,
        attempts: result.attempts,
    };
    gs.warnings = validate_section(&gs, spec);
    regenerate_if_invalid(gs, spec, gateway, bundle, settings).await
}

/// One repair round at most. The second answer is kept whatever its shape.
pub async fn regenerate_if_invalid(
    gs: GeneratedSection,
    spec: &TemplateSection,
    gateway: &Gateway,
    bundle: &PromptBundle,
    settings: &RequestSettings,
) -> Result<GeneratedSection, LlmError> {
    let warnings = validate_section(&gs, spec);
    if warnings.is_empty() {
        return Ok(GeneratedSection { warnings, ..gs });
    }
    let user_text = format!(
        "{}{PART_SEPARATOR}{}",
        bundle.user_text(),
        repair_instruction(&warnings, spec)
    );
    let result = gateway.complete(&settings.request(bundle, user_text)).await?;
    let mut repaired = GeneratedSection {
        markdown: result.text,
        usage: SectionUsage {
            input_tokens: gs.usage.input_tokens + result.input_tokens,
            output_tokens: gs.usage.output_tokens + result.output_tokens,
        },
        duration_ms: gs.duration_ms + result.latency_ms,
        warnings: Vec::new(),
        calls: gs.calls + 1,
        attempts: gs.attempts + result.attempts,
        ..gs
    };
    repaired.warnings = validate_section(&repaired, spec);
    Ok(repaired)
}

#[derive(Debug, Clone)]
pub struct GenerationOptions {
    pub jobs: usize,
    pub request: RequestSettings,
    pub global: GlobalPromptConfig,
    pub budget: TokenBudget,
    /// Where successful sections are written when another section fails.
    pub debug_dir: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum OrchestrateError {
    #[error("jobs must be at least 1")]
    InvalidJobs,
    #[error("template is invalid: {0}")]
    InvalidTemplate(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("section {index} ({section_id}) failed: {cause}")]
    SectionGenerationFailed {
        section_id: String,
        index: u32,
        cause: LlmError,
        /// Sections that did complete, in template order.
        partial: Vec<GeneratedSection>,
        debug_files: Vec<PathBuf>,
    },
    #[error("no generated section for template index {0}")]
    MissingSection(u32),
    #[error("more than one generated section for template index {0}")]
    DuplicateSection(u32),
    #[error("generated section `{0}` does not match any template section")]
    UnknownSection(String),
}

/// One bundle per template section, in template order.
pub fn plan_bundles(
    template: &DocumentationTemplate,
    flat: &FlattenedRepository,
    global: &GlobalPromptConfig,
    budget: &TokenBudget,
) -> Result<Vec<PromptBundle>, PromptError> {
    template
        .sections
        .iter()
        .map(|s| build_bundle(s, global, flat, budget))
        .collect()
}

/// `section-<i>-<id>.md`
pub fn debug_file_name(gs: &GeneratedSection) -> String {
    format!("section-{}-{}.md", gs.index, gs.section_id)
}

fn dump_partial(dir: &Path, sections: &[GeneratedSection]) -> Vec<PathBuf> {
    if let Err(e) = std::fs::create_dir_all(dir) {
        tracing::warn!("cannot create debug directory {}: {e}", dir.display());
        return Vec::new();
    }
    let mut written = Vec::new();
    for gs in sections {
        let path = dir.join(debug_file_name(gs));
        match std::fs::write(&path, &gs.markdown) {
            Ok(()) => written.push(path),
            Err(e) => tracing::warn!("cannot write {}: {e}", path.display()),
        }
    }
    written
}

/// Generates every section with at most `opts.jobs` in flight. All sections
/// run to completion; if any failed, the others are dumped to the debug
/// directory and the lowest-index failure is reported.
pub async fn generate_all(
    template: &DocumentationTemplate,
    flat: &FlattenedRepository,
    gateway: &Gateway,
    opts: &GenerationOptions,
) -> Result<Vec<GeneratedSection>, OrchestrateError> {
    if opts.jobs == 0 {
        return Err(OrchestrateError::InvalidJobs);
    }
    let violations = validate_template(template);
    if !violations.is_empty() {
        let text: Vec<String> = violations.iter().map(|v| v.message.clone()).collect();
        return Err(OrchestrateError::InvalidTemplate(text.join("; ")));
    }
    let bundles = plan_bundles(template, flat, &opts.global, &opts.budget)?;
    generate_from_bundles(template, &bundles, gateway, opts).await
}

pub async fn generate_from_bundles(
    template: &DocumentationTemplate,
    bundles: &[PromptBundle],
    gateway: &Gateway,
    opts: &GenerationOptions,
) -> Result<Vec<GeneratedSection>, OrchestrateError> {
    if opts.jobs == 0 {
        return Err(OrchestrateError::InvalidJobs);
    }
    let results: Vec<(usize, Result<GeneratedSection, LlmError>)> =
        stream::iter(template.sections.iter().zip(bundles).enumerate())
            .map(|(pos, (spec, bundle))| async move {
                tracing::debug!(section = %spec.id, "generating");
                (pos, generate_one(spec, bundle, gateway, &opts.request).await)
            })
            .buffer_unordered(opts.jobs)
            .collect()
            .await;

    let mut slots: Vec<Option<Result<GeneratedSection, LlmError>>> =
        (0..template.sections.len()).map(|_| None).collect();
    for (pos, r) in results {
        slots[pos] = Some(r);
    }
    let mut done = Vec::new();
    let mut first_failure = None;
    for (spec, slot) in template.sections.iter().zip(slots) {
        match slot.expect("every section produces a result") {
            Ok(gs) => done.push(gs),
            Err(cause) => {
                tracing::error!(section = %spec.id, "generation failed: {cause}");
                if first_failure.is_none() {
                    first_failure = Some((spec, cause));
                }
            }
        }
    }
    match first_failure {
        None => Ok(done),
        Some((spec, cause)) => {
            let debug_files = opts
                .debug_dir
                .as_deref()
                .map(|d| dump_partial(d, &done))
                .unwrap_or_default();
            Err(OrchestrateError::SectionGenerationFailed {
                section_id: spec.id.clone(),
                index: spec.index,
                cause,
                partial: done,
                debug_files,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentMeta {
    pub repository_name: String,
    pub model_id: String,
    pub generated_at: DateTime<Utc>,
    pub tool_version: String,
}

impl DocumentMeta {
    pub fn new(repository_name: impl Into<String>, model_id: impl Into<String>, generated_at: DateTime<Utc>) -> Self {
        Self {
            repository_name: repository_name.into(),
            model_id: model_id.into(),
            generated_at,
            tool_version: TOOL_VERSION.to_owned(),
        }
    }

    pub fn timestamp(&self) -> String {
        self.generated_at.to_rfc3339_opts(SecondsFormat::Secs, true)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionSpan {
    pub index: u32,
    pub id: String,
    /// Byte range of the section body in the document.
    pub range: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntermediateDocument {
    pub markdown: String,
    pub sections: Vec<SectionSpan>,
}

impl IntermediateDocument {
    /// Template index of the section containing byte `pos`.
    pub fn section_at(&self, pos: usize) -> Option<u32> {
        self.sections.iter().find(|s| s.range.contains(&pos)).map(|s| s.index)
    }
}

fn normalized_body(markdown: &str) -> String {
    let body = markdown.trim_start_matches(['\n', '\r']).trim_end();
    format!("{body}\n")
}

/// Title, metadata block, bodies in template order separated by horizontal
/// rules, and a provenance footer.
pub fn assemble(
    sections: &[GeneratedSection],
    template: &DocumentationTemplate,
    meta: &DocumentMeta,
) -> Result<IntermediateDocument, OrchestrateError> {
    let mut by_index: BTreeMap<u32, &GeneratedSection> = BTreeMap::new();
    for gs in sections {
        if template.section(gs.index).is_none() {
            return Err(OrchestrateError::UnknownSection(gs.section_id.clone()));
        }
        if by_index.insert(gs.index, gs).is_some() {
            return Err(OrchestrateError::DuplicateSection(gs.index));
        }
    }

    let mut markdown = format!("# Architecture Documentation: {}\n\n", meta.repository_name);
    markdown.push_str(&format!(
        "> Generated by {TOOL_NAME} {} using model `{}` at {}.\n",
        meta.tool_version,
        meta.model_id,
        meta.timestamp()
    ));
    let mut spans = Vec::new();
    for spec in &template.sections {
        let gs = by_index
            .get(&spec.index)
            .ok_or(OrchestrateError::MissingSection(spec.index))?;
        markdown.push_str(SECTION_SEPARATOR);
        let start = markdown.len();
        markdown.push_str(&normalized_body(&gs.markdown));
        spans.push(SectionSpan {
            index: spec.index,
            id: spec.id.clone(),
            range: start..markdown.len(),
        });
    }
    markdown.push_str(SECTION_SEPARATOR);
    markdown.push_str(&format!(
        "_This document was generated automatically from the repository source by {TOOL_NAME} {}. It reflects the code at generation time and should be reviewed against the current repository._\n",
        meta.tool_version
    ));
    Ok(IntermediateDocument {
        markdown,
        sections: spans,
    })
}
