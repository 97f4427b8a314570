//! The eight-section architecture documentation template.
//!
//! Templates are plain data. The built-in default can be replaced by a JSON
//! file of the form
//!
//! ```json
//! {
//!   "sections": [
//!     { "index": 1, "id": "system-overview", "title": "System Overview",
//!       "goal": "...", "c4_level": null, "diagram": null, "subsection_titles": [] }
//!   ],
//!   "writing_guidelines": "..."
//! }
//! ```
//!
//! `c4_level` is one of `"L1"`..`"L4"`; `diagram` is one of `"use-case"`,
//! `"component"`, `"code-level"`, `"deployment"`. A section with a diagram
//! must list at least one subsection title; the first subsection (numbered
//! `<index>.1`) is the diagram slot.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum C4Level {
    L1,
    L2,
    L3,
    L4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagramKind {
    UseCase,
    Component,
    CodeLevel,
    Deployment,
}

impl DiagramKind {
    pub fn label(self) -> &'static str {
        match self {
            DiagramKind::UseCase => "Use Case Diagram",
            DiagramKind::Component => "Component Diagram",
            DiagramKind::CodeLevel => "Code-Level Diagram",
            DiagramKind::Deployment => "Deployment Diagram",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateSection {
    pub index: u32,
    pub id: String,
    pub title: String,
    pub goal: String,
    pub c4_level: Option<C4Level>,
    pub diagram: Option<DiagramKind>,
    #[serde(default)]
    pub subsection_titles: Vec<String>,
}

impl TemplateSection {
    /// `## <index>. <title>`
    pub fn heading(&self) -> String {
        format!("## {}. {}", self.index, self.title)
    }

    /// `### <index>.<k> <title>` for every subsection, 1-based.
    pub fn subsection_headings(&self) -> Vec<String> {
        self.subsection_titles
            .iter()
            .enumerate()
            .map(|(k, t)| format!("### {}.{} {}", self.index, k + 1, t))
            .collect()
    }

    /// Heading of the subsection that holds the diagram, if any.
    pub fn diagram_slot_heading(&self) -> Option<String> {
        self.diagram?;
        self.subsection_headings().into_iter().next()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentationTemplate {
    pub sections: Vec<TemplateSection>,
    pub writing_guidelines: String,
}

impl DocumentationTemplate {
    pub fn section(&self, index: u32) -> Option<&TemplateSection> {
        self.sections.iter().find(|s| s.index == index)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("template serializes")
    }
}

const DEFAULT_GUIDELINES: &str = "Write for developers who need a consolidated, system-level understanding of the repository in order to work with and evolve it. \
Use precise architectural vocabulary (actor, container, component, module, interface, dependency) consistently across sections. \
Every element, technology, file, and relationship you mention must be traceable to the repository content provided. \
Prefer short paragraphs, bullet lists, and tables over long prose. \
When the repository offers no evidence for a topic, say so explicitly instead of guessing.";

fn section(
    index: u32,
    id: &str,
    title: &str,
    goal: &str,
    c4_level: Option<C4Level>,
    diagram: Option<DiagramKind>,
) -> TemplateSection {
    TemplateSection {
        index,
        id: id.into(),
        title: title.into(),
        goal: goal.into(),
        c4_level,
        diagram,
        subsection_titles: diagram.map(|d| vec![d.label().to_owned()]).unwrap_or_default(),
    }
}

/// The built-in template: overview, the four C4 levels, cross-cutting
/// concerns, quality attributes, and deployment.
pub fn default_template() -> DocumentationTemplate {
    use C4Level::*;
    use DiagramKind::*;
    DocumentationTemplate {
        sections: vec![
            section(
                1,
                "system-overview",
                "System Overview",
                "Summarize the system's purpose, scope, and main responsibilities so a reader can place the repository before reading the technical views.",
                None,
                None,
            ),
            section(
                2,
                "architectural-context",
                "Architectural Context",
                "Describe the external environment: the actors, interacting systems, APIs, and data sources the system depends on or serves, and where the system boundary lies.",
                Some(L1),
                Some(UseCase),
            ),
            section(
                3,
                "containers",
                "Containers",
                "Describe the runtime building blocks, meaning the applications and data stores that must run for the system to operate, with each one's responsibilities, exposed interfaces, technologies, and interactions.",
                Some(L2),
                Some(Component),
            ),
            section(
                4,
                "components",
                "Components",
                "Identify the key modules, packages, or classes and the structural relationships between them, showing how responsibilities are grouped.",
                Some(L3),
                None,
            ),
            section(
                5,
                "code-level",
                "Code-Level",
                "Map components to concrete code: the relevant directories, files, entry points, and recurring design patterns.",
                Some(L4),
                Some(CodeLevel),
            ),
            section(
                6,
                "cross-cutting-concerns",
                "Cross-Cutting Concerns",
                "Explain concerns that span several parts of the system, such as security, configuration, logging, testing, and monitoring, and where each shows up in the code.",
                None,
                None,
            ),
            section(
                7,
                "quality-attributes-and-rationale",
                "Quality Attributes and Rationale",
                "Identify the quality attributes the implementation supports (performance, maintainability, scalability, security) and the rationale that observable design choices suggest.",
                None,
                None,
            ),
            section(
                8,
                "deployment",
                "Deployment",
                "Describe how the system is deployed: deployment artifacts such as Dockerfiles and configuration files, execution environments, nodes, and how software maps onto them.",
                None,
                Some(Deployment),
            ),
        ],
        writing_guidelines: DEFAULT_GUIDELINES.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    NoSections,
    DuplicateIndex,
    NonContiguousIndex,
    DuplicateId,
    InvalidId,
    EmptyTitle,
    EmptyGoal,
    DiagramWithoutSubsection,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Index of the offending section, when there is one.
    pub section: Option<u32>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.section {
            Some(i) => write!(f, "section {i}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

fn violation(kind: ViolationKind, section: Option<u32>, message: impl Into<String>) -> Violation {
    Violation {
        kind,
        section,
        message: message.into(),
    }
}

fn is_slug(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('-')
        && !id.ends_with('-')
        && id
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-')
}

/// Returns every rule the template breaks; an empty list means valid.
pub fn validate_template(t: &DocumentationTemplate) -> Vec<Violation> {
    let mut out = Vec::new();
    if t.sections.is_empty() {
        out.push(violation(ViolationKind::NoSections, None, "no sections"));
        return out;
    }

    let mut seen_index = HashSet::new();
    let mut duplicates = false;
    for s in &t.sections {
        if !seen_index.insert(s.index) {
            duplicates = true;
            out.push(violation(
                ViolationKind::DuplicateIndex,
                Some(s.index),
                "duplicate index",
            ));
        }
    }
    if !duplicates {
        for (pos, s) in t.sections.iter().enumerate() {
            let expected = pos as u32 + 1;
            if s.index != expected {
                out.push(violation(
                    ViolationKind::NonContiguousIndex,
                    Some(s.index),
                    format!("expected index {expected} at position {}", pos + 1),
                ));
                break;
            }
        }
    }

    let mut seen_id = HashSet::new();
    for s in &t.sections {
        if !is_slug(&s.id) {
            out.push(violation(
                ViolationKind::InvalidId,
                Some(s.index),
                format!("id `{}` is not a slug", s.id),
            ));
        } else if !seen_id.insert(s.id.as_str()) {
            out.push(violation(
                ViolationKind::DuplicateId,
                Some(s.index),
                format!("duplicate id `{}`", s.id),
            ));
        }
        if s.title.trim().is_empty() {
            out.push(violation(ViolationKind::EmptyTitle, Some(s.index), "empty title"));
        }
        if s.goal.trim().is_empty() {
            out.push(violation(ViolationKind::EmptyGoal, Some(s.index), "empty goal"));
        }
        if s.diagram.is_some() && s.subsection_titles.is_empty() {
            out.push(violation(
                ViolationKind::DiagramWithoutSubsection,
                Some(s.index),
                format!("diagram requires a subsection slot {}.1", s.index),
            ));
        }
    }
    out
}

#[derive(Debug, thiserror::Error)]
pub enum TemplateError {
    #[error("template syntax error at line {line}, column {column}: {message}")]
    TemplateSyntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid template: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    TemplateInvalid(Vec<Violation>),
}

pub fn parse_template(text: &str) -> Result<DocumentationTemplate, TemplateError> {
    let t: DocumentationTemplate = serde_json::from_str(text).map_err(|e| TemplateError::TemplateSyntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let violations = validate_template(&t);
    if violations.is_empty() {
        Ok(t)
    } else {
        Err(TemplateError::TemplateInvalid(violations))
    }
}
