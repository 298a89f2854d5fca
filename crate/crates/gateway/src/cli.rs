//! The `crisisflow` command line.
//!
//! Every subcommand prints a `key: value` summary. Exit status is 0 on
//! success, 1 when the input has violations or cannot be processed, and 2
//! on usage errors.

use std::fs;
use std::io::Write;
use std::net::IpAddr;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use crisisflow_core::analysis::{check_soundness, DEFAULT_STATE_SPACE_CAP};
use crisisflow_core::compile::plan_to_net;
use crisisflow_core::corpus::{builtin_plan, fixture_log};
use crisisflow_core::engine::{auto_simulate, SimulationPolicy};
use crisisflow_core::eventlog::{project_completions, read_csv, read_xes, write_csv, write_xes, EventLog};
use crisisflow_core::mining::{alpha_discover, degree_stats, footprint, handover_network, token_replay};
use crisisflow_core::net::WorkflowNet;
use crisisflow_core::plan::{parse_plan, serialize_plan, validate_plan, Plan};

use crate::config::{ServiceConfig, DEFAULT_PORT};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "crisisflow", version, about = "Crisis-plan workflow toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check plan documents.
    #[command(subcommand)]
    Plan(PlanCommand),
    /// Run seeded cases of a plan and write their event log.
    Simulate {
        plan: PathBuf,
        #[arg(long)]
        cases: usize,
        #[arg(long)]
        seed: u64,
        /// Output file; `.xes` selects XES, anything else CSV. Defaults to
        /// CSV on standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Discover models and networks from an event log.
    #[command(subcommand)]
    Mine(MineCommand),
    /// Token-replay a log on a net (net JSON or plan document).
    Replay { net: PathBuf, log: PathBuf },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: IpAddr,
        /// Directory of additional plan documents.
        #[arg(long)]
        plans: Option<PathBuf>,
        /// Directory receiving CSV logs of completed cases.
        #[arg(long)]
        logs: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_STATE_SPACE_CAP)]
        cap: usize,
    },
    /// Export the built-in tsunami plan or its two-case fixture log.
    #[command(subcommand)]
    Corpus(CorpusCommand),
}

#[derive(Debug, Subcommand)]
pub enum PlanCommand {
    /// List every violation of a plan document.
    Validate { file: PathBuf },
    /// Compile a plan and check soundness of its net.
    Soundness {
        file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_STATE_SPACE_CAP)]
        cap: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum MineCommand {
    /// Alpha algorithm; writes the net as JSON.
    Alpha {
        log: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the footprint matrix.
    Footprint { log: PathBuf },
    /// Handover-of-work sociogram; writes DOT.
    Handover {
        log: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        include_self_loops: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum CorpusCommand {
    Plan {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Fixture {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("{0}")]
    Failed(String),
}

fn input(path: &Path, e: impl ToString) -> CliError {
    CliError::Input {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_FAILURE
        }
    }
}

fn execute(command: Command, out: &mut dyn Write) -> Result<i32, CliError> {
    match command {
        Command::Plan(PlanCommand::Validate { file }) => plan_validate(&file, out),
        Command::Plan(PlanCommand::Soundness { file, cap }) => plan_soundness(&file, cap, out),
        Command::Simulate { plan, cases, seed, out: path } => simulate(&plan, cases, seed, path.as_deref(), out),
        Command::Mine(MineCommand::Alpha { log, out: path }) => mine_alpha(&log, path.as_deref(), out),
        Command::Mine(MineCommand::Footprint { log }) => {
            let traces = project_completions(&read_log(&log)?);
            let fp = footprint(&traces);
            emit(out, format!("activities: {}\n{}", fp.activities.len(), fp.render()))
        }
        Command::Mine(MineCommand::Handover {
            log,
            out: path,
            include_self_loops,
        }) => mine_handover(&log, path.as_deref(), include_self_loops, out),
        Command::Replay { net, log } => replay(&net, &log, out),
        Command::Serve {
            port,
            bind,
            plans,
            logs,
            cap,
        } => {
            let config = ServiceConfig {
                bind,
                port,
                plan_dir: plans,
                log_dir: logs,
                state_space_cap: cap,
            };
            let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Failed(e.to_string()))?;
            runtime
                .block_on(crate::api::serve(config))
                .map_err(|e| CliError::Failed(e.to_string()))?;
            Ok(EXIT_OK)
        }
        Command::Corpus(CorpusCommand::Plan { out: path }) => write_or_print(path.as_deref(), &serialize_plan(&builtin_plan()), out),
        Command::Corpus(CorpusCommand::Fixture { out: path }) => write_or_print(path.as_deref(), &write_csv(&fixture_log()), out),
    }
}

fn emit(out: &mut dyn Write, text: impl AsRef<str>) -> Result<i32, CliError> {
    out.write_all(text.as_ref().as_bytes())
        .map_err(|e| CliError::Failed(e.to_string()))?;
    Ok(EXIT_OK)
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| input(path, e))
}

fn write_or_print(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<i32, CliError> {
    match path {
        Some(p) => {
            write_file(p, text)?;
            emit(out, format!("out: {}\n", p.display()))
        }
        None => emit(out, text),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| input(path, e))
}

fn load_plan(path: &Path) -> Result<Plan, CliError> {
    parse_plan(&read(path)?).map_err(|e| input(path, e))
}

fn is_xes(path: &Path) -> bool {
    path.extension().is_some_and(|x| x.eq_ignore_ascii_case("xes"))
}

fn read_log(path: &Path) -> Result<EventLog, CliError> {
    let text = read(path)?;
    let log = if is_xes(path) { read_xes(&text) } else { read_csv(&text) };
    log.map_err(|e| input(path, e))
}

fn plan_validate(path: &Path, out: &mut dyn Write) -> Result<i32, CliError> {
    let text = read(path)?;
    let plan: Plan = serde_json::from_str(&text).map_err(|e| input(path, e))?;
    let violations = validate_plan(&plan);
    let mut report = format!("plan: {}\nviolations: {}\n", plan.id, violations.len());
    for v in &violations {
        report.push_str(&format!("- {v}\n"));
    }
    emit(out, report)?;
    Ok(if violations.is_empty() { EXIT_OK } else { EXIT_FAILURE })
}

fn plan_soundness(path: &Path, cap: usize, out: &mut dyn Write) -> Result<i32, CliError> {
    let plan = load_plan(path)?;
    let net = plan_to_net(&plan).map_err(|e| input(path, e))?;
    let r = check_soundness(&net, cap).map_err(|e| input(path, e))?;
    let dead: Vec<&str> = r.dead_transitions.iter().map(String::as_str).collect();
    emit(
        out,
        format!(
            "sound: {}\noption_to_complete: {}\nproper_completion: {}\ndead_transitions: [{}]\nstates: {}\n",
            r.sound,
            r.option_to_complete,
            r.proper_completion,
            dead.join(", "),
            r.state_count
        ),
    )?;
    Ok(if r.sound { EXIT_OK } else { EXIT_FAILURE })
}

fn simulate(plan: &Path, cases: usize, seed: u64, path: Option<&Path>, out: &mut dyn Write) -> Result<i32, CliError> {
    let p = load_plan(plan)?;
    let log = auto_simulate(&p, cases, SimulationPolicy::seeded(seed)).map_err(|e| input(plan, e))?;
    match path {
        Some(target) => {
            let text = if is_xes(target) { write_xes(&log) } else { write_csv(&log) };
            write_file(target, &text)?;
            emit(
                out,
                format!(
                    "cases: {}\nevents: {}\nout: {}\n",
                    log.traces.len(),
                    log.event_count(),
                    target.display()
                ),
            )
        }
        None => emit(out, write_csv(&log)),
    }
}

fn mine_alpha(log: &Path, path: Option<&Path>, out: &mut dyn Write) -> Result<i32, CliError> {
    let traces = project_completions(&read_log(log)?);
    let net = alpha_discover(&traces).map_err(|e| input(log, e))?;
    let fitness = token_replay(&net, &traces).fitness;
    let json = serde_json::to_string_pretty(&net).expect("net serializes");
    let mut summary = format!(
        "transitions: {}\nplaces: {}\nfitness: {fitness}\n",
        net.transitions.len(),
        net.places.len()
    );
    match path {
        Some(p) => {
            write_file(p, &json)?;
            summary.push_str(&format!("out: {}\n", p.display()));
        }
        None => {
            summary.push_str(&json);
            summary.push('\n');
        }
    }
    emit(out, summary)
}

fn mine_handover(log: &Path, path: Option<&Path>, include_self_loops: bool, out: &mut dyn Write) -> Result<i32, CliError> {
    let g = handover_network(&read_log(log)?).map_err(|e| input(log, e))?;
    let dot = g.to_dot(include_self_loops);
    let degrees = degree_stats(&g, include_self_loops);
    let mut summary = format!("nodes: {}\nedges: {}\n", g.nodes.len(), g.edges.len());
    if let Some(max) = degrees.values().map(|d| d.total).max() {
        let leaders: Vec<&str> = degrees
            .iter()
            .filter(|(_, d)| d.total == max)
            .map(|(a, _)| a.as_str())
            .collect();
        summary.push_str(&format!("max_degree: {max} [{}]\n", leaders.join(", ")));
    }
    match path {
        Some(p) => {
            write_file(p, &dot)?;
            summary.push_str(&format!("out: {}\n", p.display()));
        }
        None => summary.push_str(&dot),
    }
    emit(out, summary)
}

/// A net file is either a serialized net or a plan document.
fn load_net(path: &Path) -> Result<WorkflowNet, CliError> {
    let text = read(path)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| input(path, e))?;
    if value.get("tasks").is_some() {
        let plan = parse_plan(&text).map_err(|e| input(path, e))?;
        plan_to_net(&plan).map_err(|e| input(path, e))
    } else {
        serde_json::from_value(value).map_err(|e| input(path, e))
    }
}

fn replay(net: &Path, log: &Path, out: &mut dyn Write) -> Result<i32, CliError> {
    let net = load_net(net)?;
    let traces = project_completions(&read_log(log)?);
    let r = token_replay(&net, &traces);
    emit(
        out,
        format!(
            "produced: {}\nconsumed: {}\nmissing: {}\nremaining: {}\nfitness: {}\n",
            r.produced, r.consumed, r.missing, r.remaining, r.fitness
        ),
    )?;
    Ok(if r.fitness == 1.0 { EXIT_OK } else { EXIT_FAILURE })
}
