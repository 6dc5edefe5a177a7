use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use queryagent::agent::{run_episode, AgentConfig, Strategy};
use queryagent::harness::{
    load_registry, parse_dialect, registry_settings, replay, run_ablation, run_benchmark,
    run_setup, LoadedStore, LoadedSuite, QuestionFixture,
};
use queryagent::llm::{embedder_by_name, HttpClient, LanguageModel, ScriptedClient, Transcript};
use queryagent::trace::TraceFile;
use queryagent_core::metrics::f1;
use queryagent_core::{AnswerSet, Dialect};

#[derive(Parser)]
#[command(
    name = "queryagent",
    version,
    about = "Step-wise query construction agent with feedback-driven self-correction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Answer one question.
    Run(RunArgs),
    /// Evaluate a fixture suite and write a report.
    Bench(BenchArgs),
    /// Re-execute a stored trace and check it reproduces byte for byte.
    Replay {
        #[arg(long)]
        trace: PathBuf,
    },
    /// Print the default trigger configuration for a dialect.
    Triggers {
        #[arg(long, default_value = "triple")]
        dialect: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LlmKind {
    Scripted,
    Http,
}

#[derive(Args)]
struct AgentArgs {
    #[arg(long, default_value_t = 15)]
    max_steps: u32,
    #[arg(long, default_value = "eraser", value_parser = parse_strategy)]
    strategy: Strategy,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relation lists longer than this are ranked and cut.
    #[arg(long, default_value_t = 40)]
    threshold: usize,
    /// Trigger configuration file (JSON list of kind/enabled/template).
    #[arg(long)]
    triggers: Option<PathBuf>,
    /// Embedder for relation ranking: hashed or http.
    #[arg(long, default_value = "hashed")]
    embedder: String,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, conflicts_with = "table", required_unless_present = "table")]
    kb: Option<PathBuf>,
    #[arg(long)]
    table: Option<PathBuf>,
    /// Question fixture (JSON).
    #[arg(long)]
    question_file: PathBuf,
    #[arg(long, value_enum, default_value = "scripted")]
    llm: LlmKind,
    #[arg(long, required_if_eq("llm", "scripted"))]
    transcript: Option<PathBuf>,
    #[arg(long)]
    trace_out: Option<PathBuf>,
    #[command(flatten)]
    agent: AgentArgs,
}

#[derive(Args)]
struct BenchArgs {
    /// Suite file (JSON).
    #[arg(long)]
    fixtures: PathBuf,
    #[arg(long)]
    metrics_out: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    workers: usize,
    #[arg(long, value_enum, default_value = "scripted")]
    llm: LlmKind,
    /// Run every strategy and report each.
    #[arg(long)]
    ablation: bool,
    #[command(flatten)]
    agent: AgentArgs,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse()
}

fn config(dialect: Dialect, args: &AgentArgs) -> anyhow::Result<AgentConfig> {
    let mut c = AgentConfig::new(dialect, args.strategy);
    c.max_steps = args.max_steps;
    if c.max_steps == 0 {
        bail!("--max-steps must be at least 1");
    }
    c.seed = args.seed;
    c.threshold = args.threshold;
    c.registry = Arc::new(load_registry(dialect, args.triggers.as_deref())?);
    c.embedder = Arc::from(embedder_by_name(&args.embedder)?);
    Ok(c)
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    let (dialect, store_path) = match (&args.kb, &args.table) {
        (Some(kb), None) => (Dialect::Triple, kb.clone()),
        (None, Some(t)) => (Dialect::Table, t.clone()),
        _ => bail!("give exactly one of --kb and --table"),
    };
    let text =
        fs::read_to_string(&args.question_file).with_context(|| path_str(&args.question_file))?;
    let fixture: QuestionFixture =
        serde_json::from_str(&text).with_context(|| path_str(&args.question_file))?;
    if parse_dialect(&fixture.dialect)? != dialect {
        bail!(
            "question {} is for the {} dialect",
            fixture.id,
            fixture.dialect
        );
    }
    let store = LoadedStore::load(dialect, &store_path)?;
    let config = config(dialect, &args.agent)?;
    let llm: Box<dyn LanguageModel> = match args.llm {
        LlmKind::Scripted => {
            let path = args
                .transcript
                .as_ref()
                .context("--transcript is required")?;
            Box::new(ScriptedClient::new(Transcript::load(path)?))
        }
        LlmKind::Http => Box::new(HttpClient::from_env()?),
    };
    let trace = run_episode(&config, fixture.to_question(), store.env(), llm.as_ref());
    for s in &trace.steps {
        println!("Thought {}: {}", s.index, s.thought);
        println!("Action {}: {}", s.index, s.action);
        println!("Observation {}: {}", s.index, s.observation);
    }
    let predicted = trace.final_answer.clone().unwrap_or_else(AnswerSet::empty);
    match &trace.final_answer {
        Some(a) => println!("answer: {a}"),
        None => println!("answer: none"),
    }
    println!(
        "f1 {:.3}  steps {}  corrections {}  store queries {}  cost ${:.6}",
        f1(&predicted, &fixture.gold()),
        trace.counters.steps,
        trace.counters.corrections,
        trace.counters.store_queries,
        trace.counters.ledger.cost()
    );
    if let Some(err) = &trace.aborted {
        eprintln!("episode aborted: {err}");
    }
    if let Some(out) = &args.trace_out {
        // Paths in the header are relative to the trace file when possible.
        let rel = |p: &Path| relative_to(out, p);
        let setup = run_setup(
            &config,
            dialect,
            &rel(&store_path),
            args.agent.triggers.as_deref().map(rel).as_deref(),
        );
        TraceFile::from_trace(&trace, setup).write(out)?;
    }
    Ok(())
}

fn relative_to(file: &Path, target: &Path) -> String {
    let base = file.parent().unwrap_or(Path::new("."));
    let (Ok(base), Ok(target_abs)) = (fs::canonicalize(base), fs::canonicalize(target)) else {
        return path_str(target);
    };
    let b: Vec<_> = base.components().collect();
    let t: Vec<_> = target_abs.components().collect();
    let common = b.iter().zip(&t).take_while(|(x, y)| x == y).count();
    let mut rel = PathBuf::new();
    for _ in common..b.len() {
        rel.push("..");
    }
    for c in &t[common..] {
        rel.push(c);
    }
    path_str(&rel)
}

fn bench(args: BenchArgs) -> anyhow::Result<()> {
    let suite = LoadedSuite::load(&args.fixtures)?;
    let config = config(suite.dialect, &args.agent)?;
    let reports = if args.ablation {
        if matches!(args.llm, LlmKind::Http) {
            bail!("--ablation replays scripted transcripts only");
        }
        run_ablation(&config, &suite, &Strategy::ALL, args.workers)
    } else {
        let report = match args.llm {
            LlmKind::Scripted => {
                run_benchmark(&config, &suite, &|q| suite.scripted(q), args.workers)
            }
            LlmKind::Http => {
                let client = HttpClient::from_env()?;
                run_benchmark(
                    &config,
                    &suite,
                    &|_| Ok(Box::new(client.clone()) as Box<dyn LanguageModel>),
                    args.workers,
                )
            }
        };
        vec![report]
    };
    for r in &reports {
        print!("{}", r.to_text());
    }
    if let Some(out) = &args.metrics_out {
        let json = if reports.len() == 1 {
            serde_json::to_string_pretty(&reports[0])?
        } else {
            serde_json::to_string_pretty(&reports)?
        };
        fs::write(out, json + "\n").with_context(|| path_str(out))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Bench(args) => bench(args),
        Command::Replay { trace } => replay(&trace).and_then(|outcome| {
            if outcome.identical() {
                println!("replay identical: {}", trace.display());
                Ok(())
            } else {
                bail!(
                    "replay differs from {}:\n{}",
                    trace.display(),
                    outcome.rerun
                )
            }
        }),
        Command::Triggers { dialect } => parse_dialect(&dialect).and_then(|d| {
            let settings = registry_settings(&queryagent_core::TriggerRegistry::for_dialect(d));
            println!("{}", serde_json::to_string_pretty(&settings)?);
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
