//! `ciao generate`: acquire a repository, flatten it, generate each template
//! section through the model gateway, render diagrams, and write
//! `architecture.md` plus `report.json`.

pub mod acquire;
pub mod args;

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use ciao_core::clock::{Clock, FixedClock, SystemClock};
use ciao_core::diagram::{extract_diagrams, substitute, Renderer, RendererConfig};
use ciao_core::flatten::{flatten_repository, FilterConfig};
use ciao_core::llm::{Gateway, HttpProvider, MockProvider, MockScript, PriceTable, Provider, RetryPolicy, API_KEY_ENV};
use ciao_core::orchestrate::{
    assemble, generate_from_bundles, plan_bundles, DocumentMeta, GenerationOptions, OrchestrateError, RequestSettings,
};
use ciao_core::prompt::{GlobalPromptConfig, TokenBudget};
use ciao_core::report::{new_report, section_reports, write_report, DiagramReport, RepositoryStats};
use ciao_core::template::{default_template, parse_template, DocumentationTemplate};

pub use acquire::{acquire_repository, Acquired};
pub use args::{Cli, Command, GenerateArgs, RenderMode};

pub const DEFAULT_PRICES: &str = include_str!("../../../config/prices.json");
pub const DOCUMENT_FILE: &str = "architecture.md";
pub const REPORT_FILE: &str = "report.json";
pub const PROMPTS_DIR: &str = "prompts";
pub const DEBUG_DIR: &str = "debug";
const README_MARKER: &str = "<!-- ciao:architecture-link -->";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("repository not found: {}", .0.display())]
    RepoNotFound(PathBuf),
    #[error("git clone failed: {0}")]
    CloneFailed(String),
    #[error("{0}")]
    Pipeline(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::RepoNotFound(_) => 2,
            CliError::CloneFailed(_) | CliError::Pipeline(_) => 1,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn pipeline(msg: impl Into<String>) -> CliError {
    CliError::Pipeline(msg.into())
}

fn read_file(path: &Path, what: &str) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {what} {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| pipeline(format!("cannot create {}: {e}", parent.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| pipeline(format!("cannot write {}: {e}", path.display())))
}

/// What a successful run produced.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub document: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub prompts: Vec<PathBuf>,
    pub summary: Option<String>,
}

struct Settings {
    template: DocumentationTemplate,
    budget: TokenBudget,
    prices: PriceTable,
    clock: Arc<dyn Clock>,
    renderer: RendererConfig,
    provider: Option<(Arc<dyn Provider>, RetryPolicy)>,
}

/// Everything that can be rejected before touching the repository.
fn settle(args: &GenerateArgs) -> Result<Settings, CliError> {
    if args.jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    if args.model.trim().is_empty() {
        return Err(usage("--model must not be empty"));
    }
    let budget = TokenBudget::new(args.max_context_tokens, ciao_core::flatten::DEFAULT_CHARS_PER_TOKEN)
        .map_err(|e| usage(format!("--max-context-tokens: {e}")))?;

    let template = match &args.template {
        Some(path) => parse_template(&read_file(path, "template")?)
            .map_err(|e| usage(format!("template {}: {e}", path.display())))?,
        None => default_template(),
    };

    let prices = match &args.prices {
        Some(path) => PriceTable::from_json(&read_file(path, "price table")?),
        None => PriceTable::from_json(DEFAULT_PRICES),
    }
    .map_err(|e| usage(e.to_string()))?;
    if !args.dry_run && prices.get(&args.model).is_none() {
        return Err(usage(format!(
            "no price configured for model `{}`; pass --prices FILE (known: {})",
            args.model,
            prices.models().collect::<Vec<_>>().join(", ")
        )));
    }

    let clock: Arc<dyn Clock> = match args.clock_epoch {
        Some(secs) => Arc::new(
            FixedClock::from_epoch_secs(secs).ok_or_else(|| usage(format!("--clock-epoch {secs} is out of range")))?,
        ),
        None => Arc::new(SystemClock::new()),
    };

    let renderer = match args.render {
        RenderMode::None => RendererConfig::None,
        RenderMode::External => RendererConfig::External {
            command: args.renderer_cmd.clone(),
        },
        RenderMode::Server => RendererConfig::Server {
            url: args
                .renderer_url
                .clone()
                .ok_or_else(|| usage("--render server requires --renderer-url"))?,
        },
    };

    let provider: Option<(Arc<dyn Provider>, RetryPolicy)> = if let Some(path) = &args.mock_script {
        let script = MockScript::from_json(&read_file(path, "mock script")?)
            .map_err(|e| usage(format!("mock script {}: {e}", path.display())))?;
        Some((Arc::new(MockProvider::new(script)), RetryPolicy::immediate()))
    } else if args.dry_run {
        None
    } else {
        match HttpProvider::from_env(Duration::from_secs(args.request_timeout.max(1))) {
            None => {
                return Err(usage(format!(
                    "{API_KEY_ENV} is not set; export it, or use --dry-run or --mock-script"
                )))
            }
            Some(Err(e)) => return Err(usage(format!("cannot create HTTP client: {e}"))),
            Some(Ok(p)) => Some((Arc::new(p), RetryPolicy::default())),
        }
    };

    Ok(Settings {
        template,
        budget,
        prices,
        clock,
        renderer,
        provider,
    })
}

fn absolute(path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        std::env::current_dir()
            .map(|d| d.join(path))
            .unwrap_or_else(|_| path.to_path_buf())
    }
}

/// Glob that hides `path` from flattening when it lies inside `root`.
fn exclusion_for(root: &Path, path: &Path) -> Option<String> {
    let path = path.canonicalize().unwrap_or_else(|_| absolute(path));
    let rel = path.strip_prefix(root).ok()?;
    let rel = rel.to_str()?.replace('\\', "/");
    (!rel.is_empty()).then_some(rel)
}

fn filter_config(root: &Path, out_dir: &Path, args: &GenerateArgs) -> FilterConfig {
    let mut cfg = FilterConfig::default();
    if let Some(rel) = exclusion_for(root, out_dir) {
        cfg.exclude_globs.push(format!("{rel}/**"));
    }
    for extra in [&args.dump_flattened, &args.report].into_iter().flatten() {
        if let Some(rel) = exclusion_for(root, extra) {
            cfg.exclude_globs.push(rel);
        }
    }
    cfg
}

fn link_target(root: &Path, document: &Path) -> String {
    match document.strip_prefix(root) {
        Ok(rel) => rel.to_string_lossy().replace('\\', "/"),
        Err(_) => document.display().to_string(),
    }
}

fn emit_readme(root: &Path, document: &Path) -> Result<(), CliError> {
    let readme = root.join("README.md");
    let existing = std::fs::read_to_string(&readme).unwrap_or_default();
    if existing.contains(README_MARKER) {
        tracing::info!("README already links the architecture document");
        return Ok(());
    }
    let mut text = existing;
    if !text.is_empty() && !text.ends_with('\n') {
        text.push('\n');
    }
    if !text.is_empty() {
        text.push('\n');
    }
    text.push_str(&format!(
        "{README_MARKER}\n## Architecture\n\nThe system's architecture is described in [{DOCUMENT_FILE}]({}).\n",
        link_target(root, document)
    ));
    write_file(&readme, text.as_bytes())
}

pub async fn run(args: &GenerateArgs) -> Result<RunOutput, CliError> {
    let settings = settle(args)?;
    let out_dir = absolute(&args.out);
    std::fs::create_dir_all(&out_dir).map_err(|e| usage(format!("cannot create --out {}: {e}", out_dir.display())))?;
    let out_dir = out_dir.canonicalize().unwrap_or(out_dir);

    let repo = acquire_repository(&args.source).await?;
    let started_at = settings.clock.now();
    let started_ticks = settings.clock.ticks_ms();

    let flattening = flatten_repository(&repo.root, &filter_config(&repo.root, &out_dir, args))
        .map_err(|e| pipeline(format!("flattening {}: {e}", repo.root.display())))?;
    for entry in flattening.entries.iter().filter(|e| !e.warnings.is_empty()) {
        for w in &entry.warnings {
            tracing::warn!("{}: {w}", entry.rel_path);
        }
    }
    tracing::info!(
        files = flattening.entries.len(),
        included = flattening.included_count(),
        tokens = flattening.flat.estimated_tokens,
        "flattened"
    );
    if let Some(path) = &args.dump_flattened {
        write_file(path, flattening.flat.as_text().as_bytes())?;
    }

    let global = GlobalPromptConfig::default().with_guidelines(settings.template.writing_guidelines.clone());
    let bundles = plan_bundles(&settings.template, &flattening.flat, &global, &settings.budget)
        .map_err(|e| pipeline(format!("building prompts: {e}")))?;

    let mut output = RunOutput::default();
    if args.dry_run {
        let dir = out_dir.join(PROMPTS_DIR);
        for (spec, bundle) in settings.template.sections.iter().zip(&bundles) {
            let path = dir.join(format!("section-{}-{}.txt", spec.index, spec.id));
            write_file(&path, bundle.full_text().as_bytes())?;
            output.prompts.push(path);
        }
        return Ok(output);
    }

    let (provider, policy) = settings.provider.expect("provider is set outside dry-run");
    let gateway = Gateway::new(provider, policy, settings.clock.clone()).with_concurrency_limit(args.jobs);
    let opts = GenerationOptions {
        jobs: args.jobs,
        request: RequestSettings {
            model_id: args.model.clone(),
            max_output_tokens: args.max_output_tokens,
            temperature: ciao_core::llm::DEFAULT_TEMPERATURE,
        },
        global,
        budget: settings.budget,
        debug_dir: Some(out_dir.join(DEBUG_DIR)),
    };
    let sections = generate_from_bundles(&settings.template, &bundles, &gateway, &opts)
        .await
        .map_err(|e| match e {
            OrchestrateError::SectionGenerationFailed {
                section_id,
                index,
                cause,
                debug_files,
                ..
            } => pipeline(format!(
                "section {index} ({section_id}) failed: {cause}; {} completed section(s) saved under {}",
                debug_files.len(),
                out_dir.join(DEBUG_DIR).display()
            )),
            other => pipeline(other.to_string()),
        })?;
    for gs in sections.iter().filter(|s| !s.warnings.is_empty()) {
        let tags: Vec<&str> = gs.warnings.iter().map(|w| w.tag()).collect();
        tracing::warn!(
            "section {} ({}) kept with warnings: {}",
            gs.index,
            gs.section_id,
            tags.join(", ")
        );
    }

    let meta = DocumentMeta::new(&repo.name, &args.model, settings.clock.now());
    let doc = assemble(&sections, &settings.template, &meta).map_err(|e| pipeline(e.to_string()))?;
    let scan = extract_diagrams(&doc);
    for w in &scan.warnings {
        tracing::warn!("{w}");
    }
    let renderer = Renderer::new(settings.renderer, &out_dir);
    let outcomes = renderer.render_all(&scan.blocks).await;
    let final_doc = substitute(&doc, &outcomes).map_err(|e| pipeline(e.to_string()))?;
    let document = out_dir.join(DOCUMENT_FILE);
    write_file(&document, final_doc.markdown.as_bytes())?;

    let (per_section, totals) =
        section_reports(&sections, &args.model, &settings.prices).map_err(|e| pipeline(e.to_string()))?;
    let finished_at = settings.clock.now();
    let wall = settings.clock.ticks_ms().saturating_sub(started_ticks);
    let mut report = new_report(&args.model, started_at, finished_at, wall);
    report.repository = RepositoryStats::from_flattening(&flattening);
    report.per_section = per_section;
    report.totals = totals;
    report.diagrams = outcomes.iter().map(DiagramReport::from).collect();
    let report_path = args
        .report
        .as_ref()
        .map(|p| absolute(p))
        .unwrap_or_else(|| out_dir.join(REPORT_FILE));
    let summary = write_report(&report, &report_path).map_err(|e| pipeline(e.to_string()))?;

    if args.emit_readme {
        if repo.remote {
            tracing::warn!("--emit-readme ignored for a remote source: the clone is discarded");
        } else {
            emit_readme(&repo.root, &document)?;
        }
    }

    output.document = Some(document);
    output.report = Some(report_path);
    output.summary = Some(summary);
    Ok(output)
}
