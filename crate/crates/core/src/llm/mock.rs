//! Offline provider driven by a script of replies and failures per section.
//!
//! Script file format (JSON list):
//!
//! ```json
//! [
//!   {"section": "containers", "steps": [{"fail": "rate-limit"}, {"reply": {"text": "## 3. Containers\n..."}}]},
//!   {"section": "deployment", "steps": ["echo"]}
//! ]
//! ```
//!
//! Each call for a section consumes its next step. Sections without steps
//! left get the `echo` behavior: a well-formed section synthesized from the
//! prompt's required headings and the file list in the repository context.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{CompletionRequest, Provider, ProviderError, ProviderReply};
use crate::prompt::{DIAGRAM_DIRECTIVE, HEADING_DIRECTIVE, SUBSECTION_DIRECTIVE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MockFailure {
    Timeout,
    RateLimit,
    ServerError,
    Network,
    Auth,
    Rejected,
}

impl MockFailure {
    fn to_error(self) -> ProviderError {
        match self {
            MockFailure::Timeout => ProviderError::Timeout,
            MockFailure::RateLimit => ProviderError::RateLimited,
            MockFailure::ServerError => ProviderError::Server {
                status: 503,
                message: "scripted failure".into(),
            },
            MockFailure::Network => ProviderError::Network("scripted failure".into()),
            MockFailure::Auth => ProviderError::Auth("scripted failure".into()),
            MockFailure::Rejected => ProviderError::Rejected {
                status: 400,
                message: "scripted failure".into(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockStep {
    Reply {
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        input_tokens: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        output_tokens: Option<u64>,
    },
    Fail(MockFailure),
    Echo,
}

impl MockStep {
    pub fn reply(text: impl Into<String>) -> Self {
        MockStep::Reply {
            text: text.into(),
            input_tokens: None,
            output_tokens: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockScriptEntry {
    pub section: String,
    pub steps: Vec<MockStep>,
}

impl MockScriptEntry {
    pub fn new(section: impl Into<String>, steps: Vec<MockStep>) -> Self {
        Self {
            section: section.into(),
            steps,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MockScript(pub Vec<MockScriptEntry>);

impl MockScript {
    pub fn new(entries: Vec<MockScriptEntry>) -> Self {
        Self(entries)
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

pub struct MockProvider {
    steps: HashMap<String, Vec<MockStep>>,
    cursors: Mutex<HashMap<String, usize>>,
    latency: Duration,
    calls: AtomicUsize,
    in_flight: AtomicUsize,
    peak_in_flight: AtomicUsize,
    labels: Mutex<Vec<String>>,
}

impl MockProvider {
    pub fn new(script: MockScript) -> Self {
        let mut steps: HashMap<String, Vec<MockStep>> = HashMap::new();
        for entry in script.0 {
            steps.entry(entry.section).or_default().extend(entry.steps);
        }
        Self {
            steps,
            cursors: Mutex::new(HashMap::new()),
            latency: Duration::ZERO,
            calls: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            peak_in_flight: AtomicUsize::new(0),
            labels: Mutex::new(Vec::new()),
        }
    }

    /// Holds every call open for `latency`, so concurrency becomes observable.
    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = latency;
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn peak_in_flight(&self) -> usize {
        self.peak_in_flight.load(Ordering::SeqCst)
    }

    /// Labels of every request received, in arrival order.
    pub fn labels(&self) -> Vec<String> {
        self.labels.lock().expect("mock log lock").clone()
    }

    pub fn calls_for(&self, label: &str) -> usize {
        self.labels
            .lock()
            .expect("mock log lock")
            .iter()
            .filter(|l| *l == label)
            .count()
    }

    fn next_step(&self, label: &str) -> MockStep {
        let mut cursors = self.cursors.lock().expect("mock cursor lock");
        let cursor = cursors.entry(label.to_owned()).or_insert(0);
        let step = self
            .steps
            .get(label)
            .and_then(|s| s.get(*cursor))
            .cloned()
            .unwrap_or(MockStep::Echo);
        *cursor += 1;
        step
    }
}

#[async_trait]
impl Provider for MockProvider {
    async fn send(&self, req: &CompletionRequest) -> Result<ProviderReply, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.labels.lock().expect("mock log lock").push(req.label.clone());
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak_in_flight.fetch_max(now, Ordering::SeqCst);
        let step = self.next_step(&req.label);

        if self.latency.is_zero() {
            tokio::task::yield_now().await;
        } else {
            tokio::time::sleep(self.latency).await;
        }
        self.in_flight.fetch_sub(1, Ordering::SeqCst);

        match step {
            MockStep::Reply {
                text,
                input_tokens,
                output_tokens,
            } => Ok(ProviderReply {
                text,
                input_tokens,
                output_tokens,
            }),
            MockStep::Fail(f) => Err(f.to_error()),
            MockStep::Echo => Ok(ProviderReply {
                text: echo_section(req),
                input_tokens: None,
                output_tokens: None,
            }),
        }
    }
}

/// Deterministic, well-formed section derived only from the request.
pub(crate) fn echo_section(req: &CompletionRequest) -> String {
    let directive = |prefix: &str| -> Vec<String> {
        req.user_text
            .lines()
            .filter_map(|l| l.strip_prefix(prefix))
            .map(str::to_owned)
            .collect()
    };
    let heading = directive(HEADING_DIRECTIVE)
        .into_iter()
        .next()
        .unwrap_or_else(|| format!("## {}", req.label));
    let subsections = directive(SUBSECTION_DIRECTIVE);
    let wants_diagram = !directive(DIAGRAM_DIRECTIVE).is_empty();
    let files: Vec<&str> = req.user_text.lines().filter_map(|l| l.strip_prefix("File: ")).collect();

    let mut out = String::new();
    out.push_str(&heading);
    out.push_str("\n\n");
    out.push_str(&format!(
        "Offline draft for `{}`, grounded in {} repository file(s).\n\n",
        req.label,
        files.len()
    ));
    for f in &files {
        out.push_str(&format!("- `{f}`\n"));
    }
    for (k, sub) in subsections.iter().enumerate() {
        out.push('\n');
        out.push_str(sub);
        out.push_str("\n\n");
        if k == 0 && wants_diagram {
            out.push_str("```plantuml\n@startuml\n");
            out.push_str(&format!("title {}\n", req.label));
            for (i, f) in files.iter().take(4).enumerate() {
                out.push_str(&format!("component \"{f}\" as c{i}\n"));
            }
            for i in 1..files.len().min(4) {
                out.push_str(&format!("c0 --> c{i}\n"));
            }
            out.push_str("@enduml\n```\n");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn script_json_round_trip() {
        let text = r#"[
            {"section": "containers", "steps": [{"fail": "rate-limit"}, {"reply": {"text": "hi", "output_tokens": 5}}, "echo"]}
        ]"#;
        let script = MockScript::from_json(text).unwrap();
        assert_eq!(
            script.0[0].steps,
            vec![
                MockStep::Fail(MockFailure::RateLimit),
                MockStep::Reply {
                    text: "hi".into(),
                    input_tokens: None,
                    output_tokens: Some(5)
                },
                MockStep::Echo
            ]
        );
        let again = MockScript::from_json(&serde_json::to_string(&script).unwrap()).unwrap();
        assert_eq!(again, script);
    }

    #[test]
    fn echo_follows_directives() {
        let req = CompletionRequest {
            label: "containers".into(),
            model_id: "m".into(),
            system_text: String::new(),
            user_text: format!(
                "{HEADING_DIRECTIVE}## 3. Containers\n{SUBSECTION_DIRECTIVE}### 3.1 Component Diagram\n{DIAGRAM_DIRECTIVE}Component Diagram\n\nFile: a.py\nFile: b/c.py\n"
            ),
            max_output_tokens: 10,
            temperature: 0.2,
        };
        let text = echo_section(&req);
        assert!(text.starts_with("## 3. Containers\n"));
        assert!(text.contains("### 3.1 Component Diagram\n\n```plantuml\n@startuml\n"));
        assert!(text.contains("component \"b/c.py\" as c1\nc0 --> c1\n@enduml\n```"));
        assert_eq!(text, echo_section(&req));
    }
}
