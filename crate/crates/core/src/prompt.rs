//! Composite prompt construction: a global prompt shared by every section, a
//! section prompt built from the template, and the flattened repository as
//! context, trimmed to a token budget.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::flatten::{estimate_tokens_with, FlattenedRepository, DEFAULT_CHARS_PER_TOKEN};
use crate::template::{C4Level, DiagramKind, TemplateSection};

/// Separates the global, section and context parts.
pub const PART_SEPARATOR: &str = "\n\n";

/// Line prefixes the section prompt uses for machine-checkable requirements.
pub const HEADING_DIRECTIVE: &str = "Required heading: ";
pub const SUBSECTION_DIRECTIVE: &str = "Required subsection heading: ";
pub const DIAGRAM_DIRECTIVE: &str = "Required diagram: ";

const MOTIVATION: &str =
    "Take a deep breath and work carefully: developers will rely on this document to understand and change the system.";

pub const ANTI_INVENTION_RULE: &str = "Never name or invent any component, service, file, technology, actor, or relationship that is not present in the repository content provided below.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalPromptConfig {
    pub role_line: String,
    pub audience: String,
    pub grounding_rules: Vec<String>,
    pub style_rules: Vec<String>,
    /// Template-wide writing guidelines, appended verbatim when non-empty.
    #[serde(default)]
    pub writing_guidelines: String,
}

impl Default for GlobalPromptConfig {
    fn default() -> Self {
        Self {
            role_line: "You are a Meticulous Software Architect documenting an existing code base.".into(),
            audience: "Developers who need a system-level view of the repository to maintain and evolve it.".into(),
            grounding_rules: vec![
                ANTI_INVENTION_RULE.into(),
                "Base every statement on evidence in the repository; if the repository does not show something, say it cannot be determined from the repository.".into(),
                "Use the exact names of directories, files, modules, classes, and configuration keys as they appear in the repository.".into(),
            ],
            style_rules: vec![
                "Write in clear, neutral technical English using Markdown.".into(),
                "Prefer bullet lists and tables for enumerations; keep paragraphs short.".into(),
                "Keep terminology consistent with the other sections of the same document.".into(),
            ],
            writing_guidelines: String::new(),
        }
    }
}

impl GlobalPromptConfig {
    pub fn with_guidelines(mut self, guidelines: impl Into<String>) -> Self {
        self.writing_guidelines = guidelines.into();
        self
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        if self.role_line.trim().is_empty() {
            return Err(PromptError::InvalidConfig("role line is empty".into()));
        }
        if self.grounding_rules.iter().all(|r| r.trim().is_empty()) {
            return Err(PromptError::InvalidConfig(
                "at least one grounding rule is required".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenBudget {
    pub max_input_tokens: usize,
    pub chars_per_token: usize,
}

impl Default for TokenBudget {
    fn default() -> Self {
        Self {
            max_input_tokens: 200_000,
            chars_per_token: DEFAULT_CHARS_PER_TOKEN,
        }
    }
}

impl TokenBudget {
    pub fn new(max_input_tokens: usize, chars_per_token: usize) -> Result<Self, PromptError> {
        if max_input_tokens == 0 || chars_per_token == 0 {
            return Err(PromptError::InvalidConfig(
                "token budget values must be positive".into(),
            ));
        }
        Ok(Self {
            max_input_tokens,
            chars_per_token,
        })
    }

    pub fn estimate(&self, text: &str) -> usize {
        estimate_tokens_with(text, self.chars_per_token)
    }

    fn tokens_for_chars(&self, chars: usize) -> usize {
        chars.div_ceil(self.chars_per_token.max(1))
    }
}

/// `ceil(chars / 4)`.
pub fn estimate_tokens(text: &str) -> usize {
    estimate_tokens_with(text, DEFAULT_CHARS_PER_TOKEN)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("invalid prompt configuration: {0}")]
    InvalidConfig(String),
    #[error("token budget too small: the structure tree alone needs {required} tokens, budget is {max}")]
    BudgetTooSmall { required: usize, max: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub section_id: String,
    pub global_part: String,
    pub section_part: String,
    pub context_part: String,
    pub total_estimated_tokens: usize,
}

impl PromptBundle {
    /// Section instructions followed by the repository context.
    pub fn user_text(&self) -> String {
        format!("{}{PART_SEPARATOR}{}", self.section_part, self.context_part)
    }

    /// Global, section and context parts, in that order.
    pub fn full_text(&self) -> String {
        format!("{}{PART_SEPARATOR}{}", self.global_part, self.user_text())
    }
}

fn bullet_list(out: &mut String, title: &str, items: &[String]) {
    let items: Vec<&String> = items.iter().filter(|s| !s.trim().is_empty()).collect();
    if items.is_empty() {
        return;
    }
    out.push_str(title);
    out.push('\n');
    for item in items {
        out.push_str("- ");
        out.push_str(item.trim());
        out.push('\n');
    }
    out.push('\n');
}

pub fn build_global_prompt(cfg: &GlobalPromptConfig) -> String {
    let mut out = String::new();
    out.push_str(cfg.role_line.trim());
    out.push(' ');
    out.push_str(MOTIVATION);
    out.push_str("\n\n");
    if !cfg.audience.trim().is_empty() {
        out.push_str("Audience: ");
        out.push_str(cfg.audience.trim());
        out.push_str("\n\n");
    }
    bullet_list(&mut out, "Grounding rules:", &cfg.grounding_rules);
    bullet_list(&mut out, "Style rules:", &cfg.style_rules);
    if !cfg.writing_guidelines.trim().is_empty() {
        out.push_str("Writing guidelines:\n");
        out.push_str(cfg.writing_guidelines.trim());
        out.push_str("\n\n");
    }
    out.push_str(
        "You will write one section of a system-level architecture document at a time. The repository content follows the section instructions.",
    );
    out
}

fn c4_label(level: C4Level) -> &'static str {
    match level {
        C4Level::L1 => "L1 (Context)",
        C4Level::L2 => "L2 (Container)",
        C4Level::L3 => "L3 (Component)",
        C4Level::L4 => "L4 (Code)",
    }
}

/// Minimal valid PlantUML source for each diagram kind, used as few-shot scaffolding.
pub fn default_skeleton(kind: DiagramKind) -> &'static str {
    match kind {
        DiagramKind::UseCase => {
            "@startuml\nleft to right direction\nactor \"User\" as user\nrectangle \"System\" {\n  usecase \"Main use case\" as UC1\n}\nuser --> UC1\n@enduml"
        }
        DiagramKind::Component => {
            "@startuml\npackage \"System\" {\n  [Web Application] as web\n  database \"Data Store\" as db\n}\nweb --> db : reads/writes\n@enduml"
        }
        DiagramKind::CodeLevel => {
            "@startuml\nclass EntryPoint {\n  +main()\n}\nclass Service\nEntryPoint --> Service : uses\n@enduml"
        }
        DiagramKind::Deployment => {
            "@startuml\nnode \"Host\" {\n  artifact \"application image\" as app\n}\ndatabase \"Database\" as db\napp --> db\n@enduml"
        }
    }
}

pub fn build_section_prompt(section: &TemplateSection, few_shot: Option<&str>) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "Write section {} of the architecture document: \"{}\".\n\n",
        section.index, section.title
    ));
    out.push_str("Goal: ");
    out.push_str(&section.goal);
    out.push('\n');
    if let Some(level) = section.c4_level {
        out.push_str("C4 level: ");
        out.push_str(c4_label(level));
        out.push('\n');
    }
    out.push('\n');

    out.push_str("Output requirements:\n");
    out.push_str(HEADING_DIRECTIVE);
    out.push_str(&section.heading());
    out.push('\n');
    for sub in section.subsection_headings() {
        out.push_str(SUBSECTION_DIRECTIVE);
        out.push_str(&sub);
        out.push('\n');
    }
    if let Some(kind) = section.diagram {
        out.push_str(DIAGRAM_DIRECTIVE);
        out.push_str(kind.label());
        out.push('\n');
        let slot = section.diagram_slot_heading().unwrap_or_else(|| section.heading());
        out.push_str(&format!(
            "Under `{slot}`, include exactly one fenced code block labeled `plantuml` containing the {}. The block must begin with `@startuml` and end with `@enduml`, and may only show elements present in the repository.\n",
            kind.label()
        ));
    }
    out.push_str("Start your answer with the required heading, use the required subsection headings verbatim, and output only the Markdown for this section.\n");

    if let Some(skeleton) = few_shot {
        out.push_str("\nStructural example (follow its shape, not its names):\n");
        if section.diagram.is_some() {
            out.push_str("```plantuml\n");
            out.push_str(skeleton);
            out.push_str("\n```\n");
        } else {
            out.push_str(skeleton);
            out.push('\n');
        }
    }
    out
}

/// Fits the flattened repository into `budget` after `fixed_overhead_tokens`.
///
/// When the full text does not fit, file blocks are replaced by an omission
/// marker, largest first; pinned (always-keep) files go last and the
/// structure tree is never dropped.
pub fn apply_budget(
    flat: &FlattenedRepository,
    fixed_overhead_tokens: usize,
    budget: &TokenBudget,
) -> Result<String, PromptError> {
    let max = budget.max_input_tokens;
    if fixed_overhead_tokens + budget.estimate(flat.as_text()) <= max {
        return Ok(flat.as_text().to_owned());
    }

    let block_chars: Vec<usize> = flat.file_blocks.iter().map(|b| b.render().chars().count()).collect();
    let marker_chars: Vec<usize> = flat
        .file_blocks
        .iter()
        .map(|b| omission_marker(&b.rel_path).chars().count())
        .collect();
    let preamble_chars = flat.preamble().chars().count();

    let mut order: Vec<usize> = (0..flat.file_blocks.len()).collect();
    order.sort_by(|&a, &b| {
        let (ba, bb) = (&flat.file_blocks[a], &flat.file_blocks[b]);
        ba.pinned
            .cmp(&bb.pinned)
            .then(block_chars[b].cmp(&block_chars[a]))
            .then(ba.rel_path.cmp(&bb.rel_path))
    });

    let mut total_chars = flat.char_count;
    let mut dropped = HashSet::new();
    for idx in order {
        total_chars = total_chars - block_chars[idx] + marker_chars[idx];
        dropped.insert(idx);
        if fixed_overhead_tokens + budget.tokens_for_chars(total_chars) <= max {
            return Ok(compose(flat, &dropped));
        }
    }

    let required = fixed_overhead_tokens + budget.tokens_for_chars(preamble_chars.max(total_chars));
    Err(PromptError::BudgetTooSmall { required, max })
}

pub fn omission_marker(rel_path: &str) -> String {
    format!("[omitted for length: {rel_path}]\n\n")
}

fn compose(flat: &FlattenedRepository, dropped: &HashSet<usize>) -> String {
    let mut out = flat.preamble();
    for (i, block) in flat.file_blocks.iter().enumerate() {
        if dropped.contains(&i) {
            out.push_str(&omission_marker(&block.rel_path));
        } else {
            block.render_into(&mut out);
        }
    }
    out
}

/// Builds the three-part prompt for one section, using the built-in skeleton
/// for the section's diagram kind.
pub fn build_bundle(
    section: &TemplateSection,
    global_cfg: &GlobalPromptConfig,
    flat: &FlattenedRepository,
    budget: &TokenBudget,
) -> Result<PromptBundle, PromptError> {
    global_cfg.validate()?;
    let global_part = build_global_prompt(global_cfg);
    let section_part = build_section_prompt(section, section.diagram.map(default_skeleton));
    let overhead = budget.estimate(&format!("{global_part}{PART_SEPARATOR}{section_part}{PART_SEPARATOR}"));
    let context_part = apply_budget(flat, overhead, budget)?;
    let mut bundle = PromptBundle {
        section_id: section.id.clone(),
        global_part,
        section_part,
        context_part,
        total_estimated_tokens: 0,
    };
    bundle.total_estimated_tokens = budget.estimate(&bundle.full_text());
    Ok(bundle)
}
