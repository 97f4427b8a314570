use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "ciao",
    version,
    about = "Generate architecture documentation for a code repository"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Flatten a repository, generate every template section, and write the document.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RenderMode {
    /// Run a local PlantUML executable.
    External,
    /// POST diagram sources to a rendering server.
    Server,
    /// Keep diagram sources as fenced blocks.
    None,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// Local directory or remote Git URL.
    pub source: String,

    #[arg(long, default_value = "ciao-out")]
    pub out: PathBuf,

    #[arg(long, default_value = "gpt-5")]
    pub model: String,

    /// Documentation template JSON; the built-in 8-section template otherwise.
    #[arg(long)]
    pub template: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = RenderMode::External)]
    pub render: RenderMode,

    #[arg(long, default_value = "plantuml")]
    pub renderer_cmd: PathBuf,

    #[arg(long)]
    pub renderer_url: Option<String>,

    /// Input token cap per section prompt.
    #[arg(long, default_value_t = 200_000)]
    pub max_context_tokens: usize,

    /// Sections generated concurrently.
    #[arg(long, default_value_t = 8)]
    pub jobs: usize,

    /// Write the prompts to <out>/prompts/ and stop.
    #[arg(long)]
    pub dry_run: bool,

    /// Report path; defaults to <out>/report.json.
    #[arg(long)]
    pub report: Option<PathBuf>,

    /// Append a link to the generated document to the repository README.
    #[arg(long)]
    pub emit_readme: bool,

    /// Offline scripted provider (JSON); no credential or network needed.
    #[arg(long)]
    pub mock_script: Option<PathBuf>,

    /// Price table JSON replacing the built-in one.
    #[arg(long)]
    pub prices: Option<PathBuf>,

    /// Also write the flattened repository text to this file.
    #[arg(long)]
    pub dump_flattened: Option<PathBuf>,

    /// Freeze the clock at this Unix time (seconds); durations read as zero.
    #[arg(long)]
    pub clock_epoch: Option<i64>,

    #[arg(long, default_value_t = 32_000)]
    pub max_output_tokens: u32,

    /// Per-request HTTP timeout in seconds.
    #[arg(long, default_value_t = 600)]
    pub request_timeout: u64,
}
