use clap::Parser;
use tracing_subscriber::EnvFilter;

use ciao_cli::{run, Cli, Command};

fn main() {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("CIAO_LOG").unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .with_target(false)
        .init();

    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: cannot start runtime: {e}");
            std::process::exit(1);
        }
    };
    let Command::Generate(args) = cli.command;
    let code = runtime.block_on(async {
        let mut job = Box::pin(run(&args));
        let result = tokio::select! {
            r = &mut job => Some(r),
            _ = tokio::signal::ctrl_c() => None,
        };
        // Dropping the job removes any temporary clone.
        drop(job);
        match result {
            None => {
                eprintln!("interrupted");
                130
            }
            Some(Ok(out)) => {
                for p in &out.prompts {
                    println!("prompt: {}", p.display());
                }
                if let Some(d) = &out.document {
                    println!("document: {}", d.display());
                }
                if let Some(r) = &out.report {
                    println!("report: {}", r.display());
                }
                if let Some(s) = &out.summary {
                    println!("{s}");
                }
                0
            }
            Some(Err(e)) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        }
    });
    drop(runtime);
    std::process::exit(code);
}
