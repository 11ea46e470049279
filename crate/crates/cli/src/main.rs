mod config;
mod repl;

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use attentive_core::agent::{AgentConfig, Session};
use attentive_core::evalsuite::{
    classify, emit_report, generate_isolated_suite, generate_situated_scenario, run_isolated, run_situated,
    ExpectedBehavior, ReportFormat, RunReport, BUILTIN_SCENES,
};
use attentive_core::transcript::Transcript;
use attentive_core::Scene;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use config::AgentFlags;

/// Exit 1 for runtime failures (including runs that lost the backend), 2 for
/// configuration errors.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Runtime(_) => 1,
            Self::Config(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Config(m) | Self::Runtime(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(name = "attentive", version, about = "Attentive support simulator and evaluation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the isolated suite (300 cases per repeat).
    EvalIsolated(EvalArgs),
    /// Run the five-step situated scenario.
    EvalSituated(EvalArgs),
    /// Talk to the agent line by line.
    Repl(ReplArgs),
    /// Serve live sessions over HTTP and websockets.
    Serve(ServeArgs),
    /// Re-render a transcript and classify it again.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    agent: AgentFlags,
    /// Runs per case; 5 for the isolated suite, 20 for the situated one.
    #[arg(long)]
    repeats: Option<u32>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    parallelism: Option<usize>,
    /// Directory for the report and the transcripts.
    #[arg(long)]
    out: PathBuf,
    /// Overwrite an existing report.
    #[arg(long)]
    force: bool,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(Args)]
struct ReplArgs {
    #[command(flatten)]
    agent: AgentFlags,
    /// Built-in scene name or path to a scene file.
    #[arg(long, default_value = "softdrink")]
    scene: String,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Extra `<name>.scene.json` fixtures.
    #[arg(long)]
    scene_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    transcript: PathBuf,
    /// Expected behaviour as JSON: one object for every interaction, or an
    /// array with one per interaction.
    #[arg(long)]
    expect: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    let result = match cli.command {
        Command::EvalIsolated(args) => eval(&args, false, &mut stdout),
        Command::EvalSituated(args) => eval(&args, true, &mut stdout),
        Command::Repl(args) => repl(&args, &mut stdout),
        Command::Serve(args) => serve(&args),
        Command::Replay(args) => replay(&args, &mut stdout),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("attentive: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn io(e: std::io::Error) -> Failure {
    Failure::Runtime(e.to_string())
}

fn eval(args: &EvalArgs, situated: bool, out: &mut impl Write) -> Result<(), Failure> {
    let config = args.agent.resolve()?;
    let repeats = args.repeats.unwrap_or(if situated { 20 } else { 5 });
    if repeats == 0 {
        return Err(Failure::Config("--repeats must be at least 1".into()));
    }
    let parallelism = match args.parallelism {
        Some(0) => return Err(Failure::Config("--parallelism must be at least 1".into())),
        Some(p) => p,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let (format, name) = match args.format {
        FormatArg::Csv => (ReportFormat::Csv, "report.csv"),
        FormatArg::Json => (ReportFormat::Json, "report.json"),
    };
    let report_path = args.out.join(name);
    let transcripts = args.out.join("transcripts");
    if !args.force && (report_path.exists() || transcripts.exists()) {
        return Err(Failure::Config(format!(
            "{} already holds results; pass --force to overwrite",
            args.out.display()
        )));
    }
    if transcripts.exists() {
        std::fs::remove_dir_all(&transcripts).map_err(io)?;
    }
    std::fs::create_dir_all(&args.out).map_err(io)?;

    let report = run_suite(&config, situated, repeats, parallelism, &transcripts)?;
    let text = emit_report(&report, format);
    std::fs::write(&report_path, &text).map_err(io)?;
    out.write_all(text.as_bytes()).map_err(io)?;
    let lost = report.records.iter().filter(|r| r.verdict.is_transport_failure()).count();
    if lost > 0 {
        return Err(Failure::Runtime(format!(
            "{lost} of {} runs ended with a backend error",
            report.records.len()
        )));
    }
    Ok(())
}

fn run_suite(
    config: &AgentConfig,
    situated: bool,
    repeats: u32,
    parallelism: usize,
    transcripts: &Path,
) -> Result<RunReport, Failure> {
    let result = if situated {
        run_situated(&generate_situated_scenario(), config, repeats, parallelism, Some(transcripts))
    } else {
        let cases = generate_isolated_suite().map_err(|e| Failure::Runtime(e.to_string()))?;
        run_isolated(&cases, config, repeats, parallelism, Some(transcripts))
    };
    result.map_err(|e| match e {
        attentive_core::evalsuite::EvalError::Agent(a) => Failure::Config(a.to_string()),
        other => Failure::Runtime(other.to_string()),
    })
}

fn load_scene(name: &str) -> Result<Scene, Failure> {
    let text = match BUILTIN_SCENES.iter().find(|(n, _)| *n == name) {
        Some((_, text)) => text.to_string(),
        None => std::fs::read_to_string(name)
            .map_err(|e| Failure::Config(format!("unknown scene `{name}` (not built in, and not a readable file: {e})")))?,
    };
    Scene::load(&text).map_err(|e| Failure::Config(format!("scene `{name}`: {e}")))
}

fn repl(args: &ReplArgs, out: &mut impl Write) -> Result<(), Failure> {
    let config = args.agent.resolve()?;
    let scene = load_scene(&args.scene)?;
    let mut session = Session::from_config(scene, config).map_err(|e| Failure::Config(e.to_string()))?;
    repl::run(&mut session, std::io::stdin().lock(), out).map_err(io)
}

fn serve(args: &ServeArgs) -> Result<(), Failure> {
    let mut fixtures = attentive_server::Fixtures::builtin();
    if let Some(dir) = &args.scene_dir {
        fixtures = fixtures.with_dir(dir).map_err(|e| Failure::Config(e.to_string()))?;
    }
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .map_err(|e| Failure::Config(format!("bad address {}:{}: {e}", args.host, args.port)))?;
    let runtime = tokio::runtime::Runtime::new().map_err(io)?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| Failure::Config(format!("cannot listen on {addr}: {e}")))?;
        let bound = listener.local_addr().map_err(io)?;
        println!("listening on http://{bound}");
        let hub = Arc::new(attentive_server::Hub::new(fixtures));
        attentive_server::serve_on(listener, hub).await.map_err(io)
    })
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Expectations {
    One(ExpectedBehavior),
    PerInteraction(Vec<ExpectedBehavior>),
}

fn replay(args: &ReplayArgs, out: &mut impl Write) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&args.expect)
        .map_err(|e| Failure::Config(format!("cannot read expectation file {}: {e}", args.expect.display())))?;
    let expectations: Expectations = serde_json::from_str(&text)
        .map_err(|e| Failure::Config(format!("expectation file {}: {e}", args.expect.display())))?;
    let transcript = Transcript::read(&args.transcript)
        .map_err(|e| Failure::Config(format!("cannot read transcript {}: {e}", args.transcript.display())))?;
    let interactions = transcript
        .interactions()
        .map_err(|e| Failure::Config(format!("transcript {}: {e}", args.transcript.display())))?;
    if let Expectations::PerInteraction(list) = &expectations {
        if list.len() != interactions.len() {
            return Err(Failure::Config(format!(
                "{} expectations for {} interactions",
                list.len(),
                interactions.len()
            )));
        }
    }
    for (i, interaction) in interactions.iter().enumerate() {
        let expected = match &expectations {
            Expectations::One(e) => e,
            Expectations::PerInteraction(list) => &list[i],
        };
        let scene = Scene::from_document(interaction.final_scene.clone())
            .map_err(|e| Failure::Config(format!("interaction {}: {e}", interaction.index)))?;
        let verdict = classify(&interaction.trace, expected, &scene);
        let w = |out: &mut dyn Write, line: String| writeln!(out, "{line}").map_err(io);
        w(out, format!("interaction {}: {}", interaction.index, interaction.trace.input_utterance))?;
        for event in &interaction.trace.events {
            w(out, format!("  {}", event.render()))?;
        }
        w(out, format!("  verdict: {} ({})", verdict.category, verdict.rationale))?;
        if let Some(recorded) = &interaction.verdict {
            if recorded.category != verdict.category {
                w(out, format!("  recorded verdict was {}", recorded.category))?;
            }
        }
    }
    Ok(())
}
