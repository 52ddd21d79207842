use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vnerab::baseline::run_baseline;
use vnerab::experiment::{run_experiment, solve_config, ExperimentPlan};
use vnerab::generator::{gen_instance, GeneratorConfig, TopologySpec};
use vnerab::io::{
    read_edge_list, read_instance, read_results, read_solution, write_instance, write_lp,
    write_plot_data, write_results, write_solution,
};
use vnerab::model::{build_model, ModelConfig, RabMode, Routing};
use vnerab::solver::SolveParams;
use vnerab::verify::{check_solution, solution_profit};
use vnerab::{Error, Result};

/// Exit status for a solution rejected by the checker.
const EXIT_VIOLATION: u8 = 3;

#[derive(Parser)]
#[command(name = "vnerab", version, about = "Virtual network embedding with rent-at-bulk capacity costs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance.
    Generate(GenerateArgs),
    /// Solve one instance under one configuration.
    Solve(SolveArgs),
    /// Solve with linear capacity prices, then buy bulks for the result.
    Baseline(BaselineArgs),
    /// Check a solution file against an instance.
    Verify(VerifyArgs),
    /// Write the model in LP file format.
    ExportLp(ExportArgs),
    /// Run an experiment plan and write the results table.
    Experiment(ExperimentArgs),
    /// Aggregate a results table into mean profit per group.
    PlotData(PlotArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// desk, dc0 .. dc4, or a path to an undirected edge list.
    #[arg(long, default_value = "desk")]
    topology: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of requests.
    #[arg(long, default_value_t = 10)]
    requests: usize,
    /// Scaling factor for requirements and demands.
    #[arg(long, default_value_t = 0.4)]
    scaling: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long, default_value = "single-path")]
    routing: Routing,
    #[arg(long, default_value = "integral")]
    rab: RabMode,
}

impl ConfigArgs {
    fn config(&self) -> ModelConfig {
        ModelConfig { routing: self.routing, rab: self.rab }
    }
}

#[derive(Args)]
struct ParamArgs {
    /// Relative optimality gap target.
    #[arg(long, default_value_t = 0.01)]
    gap: f64,
    /// Wall-clock limit in seconds.
    #[arg(long, default_value_t = 3600.0)]
    time_limit: f64,
    /// Deterministic cap on branch-and-bound nodes.
    #[arg(long)]
    node_limit: Option<u64>,
}

impl ParamArgs {
    fn params(&self) -> SolveParams {
        SolveParams {
            gap: self.gap,
            time_limit: self.time_limit,
            node_limit: self.node_limit,
            ..SolveParams::default()
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Where to write the solution document.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BaselineArgs {
    instance: PathBuf,
    #[arg(long, default_value = "single-path")]
    routing: Routing,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    instance: PathBuf,
    solution: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Args)]
struct ExportArgs {
    instance: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML plan file.
    plan: PathBuf,
    /// Results CSV.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Also write the aggregated plot data here.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Results CSV written by `experiment`.
    results: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| {
            Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display())))
        }),
        None => match std::io::stdout().lock().write_all(text.as_bytes()) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
            _ => Ok(()),
        },
    }
}

fn topology(name: &str) -> Result<TopologySpec> {
    if name == "desk" {
        return Ok(TopologySpec::desk_scale());
    }
    if let Some(k) = name.strip_prefix("dc").and_then(|k| k.parse().ok()) {
        if let Some(spec) = TopologySpec::data_center(k) {
            return Ok(spec);
        }
    }
    read_edge_list(&read(Path::new(name))?)
}

fn generate(a: &GenerateArgs) -> Result<()> {
    let cfg = GeneratorConfig {
        seed: a.seed,
        num_requests: a.requests,
        scaling: a.scaling,
        ..GeneratorConfig::default()
    };
    cfg.check()?;
    let inst = gen_instance(&topology(&a.topology)?, &cfg)?;
    emit(a.output.as_deref(), &write_instance(&inst))
}

fn solve(a: &SolveArgs) -> Result<()> {
    let inst = read_instance(&read(&a.instance)?)?;
    let params = a.params.params();
    params.check()?;
    let id = a.instance.display().to_string();
    let (run, _) = solve_config(&inst, &id, a.config.config(), &params, &[])?;
    let r = &run.result;
    eprintln!(
        "status {} profit {} bound {} gap {} nodes {} accepted {}/{} elapsed {:.3}s",
        r.status,
        r.objective,
        r.bound,
        r.gap,
        r.nodes,
        run.solution.num_accepted(),
        inst.requests.len(),
        run.elapsed
    );
    match &a.output {
        Some(p) => emit(Some(p), &write_solution(&run.solution)),
        None => Ok(()),
    }
}

fn baseline(a: &BaselineArgs) -> Result<()> {
    let inst = read_instance(&read(&a.instance)?)?;
    let params = a.params.params();
    params.check()?;
    let b = run_baseline(&inst, a.routing, &params)?;
    eprintln!(
        "status {} profit {} linear-price objective {} feasible {}",
        b.solve.status,
        b.profit,
        b.solve.objective,
        b.all_feasible()
    );
    match (&a.output, b.priced_embedding()) {
        (Some(p), Some(emb)) => emit(Some(p), &write_solution(&emb)),
        _ => Ok(()),
    }
}

fn verify(a: &VerifyArgs) -> Result<()> {
    let inst = read_instance(&read(&a.instance)?)?;
    let sol = read_solution(&read(&a.solution)?)?;
    let report = check_solution(&inst, &sol, a.config.config(), a.tol);
    if !report.is_empty() {
        return Err(Error::Verification(report.to_string()));
    }
    println!("ok profit {}", solution_profit(&inst, &sol));
    Ok(())
}

fn export_lp(a: &ExportArgs) -> Result<()> {
    let inst = read_instance(&read(&a.instance)?)?;
    let (model, vm) = build_model(&inst, a.config.config())?;
    emit(a.output.as_deref(), &write_lp(&model, &vm))
}

fn experiment(a: &ExperimentArgs) -> Result<()> {
    let plan = ExperimentPlan::from_toml(&read(&a.plan)?)?;
    let records = run_experiment(&plan)?;
    emit(a.output.as_deref(), &write_results(&records)?)?;
    if let Some(p) = &a.plot {
        emit(Some(p), &write_plot_data(&records)?)?;
    }
    Ok(())
}

fn plot_data(a: &PlotArgs) -> Result<()> {
    let records = read_results(&read(&a.results)?)?;
    emit(a.output.as_deref(), &write_plot_data(&records)?)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve(a),
        Command::Baseline(a) => baseline(a),
        Command::Verify(a) => verify(a),
        Command::ExportLp(a) => export_lp(a),
        Command::Experiment(a) => experiment(a),
        Command::PlotData(a) => plot_data(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Verification(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_VIOLATION)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
