use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use aicofe::config::LogFormat;
use aicofe::{api, fixtures, Config, Service};
use aicofe_core::prompt::PromptTemplate;
use aicofe_store::Store;
use anyhow::Context;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aicofe", version, about = "Collaborative feedback service")]
struct Cli {
    /// TOML configuration file. Environment variables override it.
    #[arg(long, short, global = true, env = "AICOFE_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API.
    Serve,
    /// Apply pending database migrations.
    Migrate,
    /// Load the demo course, users and tokens.
    SeedFixtures {
        /// Also submit the demo evaluations.
        #[arg(long)]
        with_evaluations: bool,
    },
    /// Cross-check relational rows, documents and files; exits 1 on findings.
    IntegrityAudit,
    /// Lint stored templates and any template JSON files given.
    LintTemplates { files: Vec<PathBuf> },
}

fn load_config(path: Option<&std::path::Path>) -> anyhow::Result<Config> {
    let mut config = Config::load(path)?;
    config.apply_env(|k| std::env::var(k).ok())?;
    config.check()?;
    Ok(config)
}

fn init_logging(config: &Config) {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(&config.logging.level));
    let builder = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr);
    match config.logging.format {
        LogFormat::Json => builder.json().init(),
        LogFormat::Text => builder.init(),
    }
}

async fn serve(config: Config) -> anyhow::Result<()> {
    let svc = Arc::new(Service::from_config(&config)?);
    let listener = tokio::net::TcpListener::bind(&config.server.bind)
        .await
        .with_context(|| format!("binding {}", config.server.bind))?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, api::router(svc))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn lint_templates(config: &Config, files: &[PathBuf]) -> anyhow::Result<bool> {
    let mut templates: Vec<(String, PromptTemplate)> = Vec::new();
    for f in files {
        let text = std::fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))?;
        let t: PromptTemplate = serde_json::from_str(&text).with_context(|| format!("parsing {}", f.display()))?;
        templates.push((f.display().to_string(), t));
    }
    if files.is_empty() {
        let store = Store::open_dir(&config.storage.data_dir)?;
        for t in store.db.read(|r| r.list_templates())? {
            templates.push((t.id.to_string(), t));
        }
    }
    let mut clean = true;
    for (name, t) in &templates {
        let issues = t.lint();
        if issues.is_empty() {
            println!("ok    {name}");
        } else {
            clean = false;
            for i in issues {
                println!("issue {name}: {i}");
            }
        }
    }
    Ok(clean)
}

async fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let config = load_config(cli.config.as_deref())?;
    init_logging(&config);
    match cli.command {
        Command::Serve => serve(config).await?,
        Command::Migrate => {
            std::fs::create_dir_all(&config.storage.data_dir)?;
            let db = aicofe_store::Database::open(config.storage.data_dir.join("aicofe.db"))?;
            let applied = db.migrate()?;
            if applied.is_empty() {
                println!("schema up to date");
            } else {
                println!("applied migrations {applied:?}");
            }
        }
        Command::SeedFixtures { with_evaluations } => {
            let svc = Service::from_config(&config)?;
            let exists = svc.store().db.read(|r| r.get_course(&fixtures::COURSE.into())).is_ok();
            if exists {
                println!("fixtures already present");
            } else {
                fixtures::seed_base(&svc)?;
                println!("seeded course {} and instance {}", fixtures::COURSE, fixtures::INSTANCE);
                for (user, token) in fixtures::TOKENS {
                    println!("token {user}: {token}");
                }
            }
            if with_evaluations {
                let receipts = fixtures::seed_evaluations(&svc)?;
                println!("submitted {} evaluations", receipts.len());
            }
        }
        Command::IntegrityAudit => {
            let store = Store::open_dir(&config.storage.data_dir)?;
            let report = store.audit()?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !report.clean {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::LintTemplates { files } => {
            if !lint_templates(&config, &files)? {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

#[tokio::main]
async fn main() -> ExitCode {
    match run(Cli::parse()).await {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
