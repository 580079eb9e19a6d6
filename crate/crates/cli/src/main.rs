use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use rayon::prelude::*;

use iseo::iseo::Termination;
use iseo::problems::{gen_adversarial, gen_catalog, gen_cspp, gen_gap_synthetic, gen_knapsack, parse_gap_named, CatalogDensity, KnapsackKind};
use iseo::report::{aggregate, render, Format};
use iseo::sampling::SearchBackend;
use iseo::{final_feasibility_probe, run, Backend, Instance, OracleSuite, RunConfig, RunSummary, Sampler, Separator};

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_TIMEOUT: u8 = 3;

#[derive(Parser)]
#[command(name = "iseo", version, about = "Optimize 0-1 programs with constraints known only through membership oracles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark instance.
    Gen(GenArgs),
    /// Split an OR-Library style assignment file into instance files.
    ParseGap(ParseGapArgs),
    /// Run the solver on one or more instances.
    Run(RunArgs),
    /// Aggregate run summaries into a table.
    Report(ReportArgs),
    /// Re-check the final surrogate weights of a saved run against the oracles.
    Probe(ProbeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// n = 15, 300 calls per oracle, 600 s per run.
    Desk,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Problem {
    KnapU,
    KnapW,
    KnapS,
    Cspp,
    Gap,
    Adversarial,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    problem: Problem,
    /// Items (knapsack, adversarial), courses (cspp) or tasks (gap).
    #[arg(long)]
    n: Option<usize>,
    /// Capacity tightness for knapsacks, 1..=30.
    #[arg(long, default_value_t = 10)]
    h: u32,
    /// Agents for gap.
    #[arg(long, default_value_t = 5)]
    m: usize,
    /// Adversarial step size.
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    /// Adversarial member: comma separated items that fit together.
    #[arg(long, value_delimiter = ',')]
    subset: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ParseGapArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Directory for `<stem>-<k>.json` files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OracleKind {
    Simulated,
    Interactive,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Enum,
    Bnb,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Enum => Backend::Enum,
            BackendArg::Bnb => Backend::Bnb,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SeparatorArg {
    Svm,
    Sep,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplerArg {
    Sim,
    Cut,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Csv,
    Md,
}

/// Calls per oracle; `None` is unlimited.
#[derive(Clone, Copy)]
struct Budget(Option<usize>);

/// A positive count, or `none` for no limit.
fn parse_budget(s: &str) -> Result<Budget, String> {
    if s.eq_ignore_ascii_case("none") {
        return Ok(Budget(None));
    }
    match s.parse::<usize>() {
        Ok(0) | Err(_) => Err(format!("expected a positive integer or \"none\", got {s:?}")),
        Ok(v) => Ok(Budget(Some(v))),
    }
}

#[derive(Args)]
struct RunArgs {
    /// Instance files; each is run once per separator/sampler combination.
    #[arg(long, required = true, num_args = 1..)]
    instance: Vec<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "sep")]
    separator: Vec<SeparatorArg>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "cut")]
    sampler: Vec<SamplerArg>,
    /// Calls per oracle [default: 2000, desk preset 300].
    #[arg(long, value_parser = parse_budget)]
    budget: Option<Budget>,
    #[arg(long, default_value_t = 0.01)]
    thr: f64,
    #[arg(long, default_value_t = 50_000)]
    node_limit: usize,
    #[arg(long, value_enum, default_value = "enum")]
    backend: BackendArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Wall-clock limit per run in seconds [default: 600].
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long, default_value_t = 1)]
    bound_every: usize,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long, value_enum, default_value = "simulated")]
    oracle: OracleKind,
    /// Leave wall-clock fields out of summaries so they are reproducible byte for byte.
    #[arg(long)]
    no_timing: bool,
    /// Skip the final feasibility probe.
    #[arg(long)]
    no_probe: bool,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output directory for `<instance>-<sep>-<samp>.{json,csv}`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long = "in", required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
    /// Also write the table here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Summary JSON written by `run`.
    #[arg(long)]
    summary: PathBuf,
    #[arg(long, value_enum, default_value = "simulated")]
    oracle: OracleKind,
    #[arg(long, value_enum, default_value = "enum")]
    backend: BackendArg,
    #[arg(long, default_value_t = 50_000)]
    node_limit: usize,
}

fn read_instance(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Instance::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn gen(args: GenArgs) -> Result<u8> {
    let n = args.n.unwrap_or(match (args.preset, args.problem) {
        (_, Problem::Gap) => 15,
        (_, Problem::Adversarial) => 8,
        (Some(Preset::Desk), _) => 15,
        (None, Problem::Cspp) => 150,
        (None, _) => 60,
    });
    let inst = match args.problem {
        Problem::KnapU => gen_knapsack(KnapsackKind::U, n, args.h, args.seed)?,
        Problem::KnapW => gen_knapsack(KnapsackKind::W, n, args.h, args.seed)?,
        Problem::KnapS => gen_knapsack(KnapsackKind::S, n, args.h, args.seed)?,
        Problem::Cspp => gen_cspp(&gen_catalog(n, args.seed, CatalogDensity::default())?, args.seed)?,
        Problem::Gap => gen_gap_synthetic(args.m, n, args.seed)?.to_instance(format!("gap-m{}-n{n}-s{}", args.m, args.seed))?,
        Problem::Adversarial => {
            let family = gen_adversarial(n, args.eps)?;
            match &args.subset {
                Some(subset) => family.member(subset)?,
                None => family.base,
            }
        }
    };
    write_file(&args.out, &inst.to_json()?)?;
    println!("{} -> {}", inst.name, args.out.display());
    Ok(0)
}

fn parse_gap_file(args: ParseGapArgs) -> Result<u8> {
    let text = fs::read_to_string(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let stem = args.input.file_stem().and_then(|s| s.to_str()).unwrap_or("gap");
    let instances = parse_gap_named(&text, stem)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    for inst in &instances {
        let path = args.out.join(format!("{}.json", inst.name));
        write_file(&path, &inst.to_json()?)?;
        println!("{} (m={}, n={}) -> {}", inst.name, inst.m, inst.n, path.display());
    }
    Ok(0)
}

struct Job {
    path: PathBuf,
    separator: Separator,
    sampler: Sampler,
}

fn separator_name(s: Separator) -> &'static str {
    match s {
        Separator::Svm => "svm",
        Separator::Sep => "sep",
    }
}

fn sampler_name(s: Sampler) -> &'static str {
    match s {
        Sampler::Sim => "sim",
        Sampler::Cut => "cut",
    }
}

fn run_one(job: &Job, base: &RunConfig, oracle: OracleKind, out: &Path) -> Result<RunSummary> {
    let mut inst = read_instance(&job.path)?;
    let config = RunConfig { separator: job.separator, sampler: job.sampler, ..base.clone() };
    let mut oracles = match oracle {
        OracleKind::Simulated => OracleSuite::from_instance(&inst, config.budget)
            .with_context(|| format!("{}: simulated oracles need hidden weights", job.path.display()))?,
        OracleKind::Interactive => {
            inst.hidden_weights = None;
            OracleSuite::interactive(inst.m, inst.n, config.budget)
        }
    };
    let record = run(&inst, &mut oracles, &config).with_context(|| format!("running {}", job.path.display()))?;
    let summary = record.summary(&inst);
    let stem = format!("{}-{}-{}", inst.name, separator_name(job.separator), sampler_name(job.sampler));
    write_file(&out.join(format!("{stem}.csv")), &record.trace_csv())?;
    write_file(&out.join(format!("{stem}.json")), &serde_json::to_string_pretty(&summary)?)?;
    info!("wrote {stem}");
    Ok(summary)
}

fn run_cmd(args: RunArgs) -> Result<u8> {
    let desk = matches!(args.preset, Some(Preset::Desk));
    let budget = args.budget.map_or(Some(if desk { 300 } else { 2000 }), |b| b.0);
    let time_limit = args.time_limit.unwrap_or(600.0);
    if !(time_limit > 0.0) {
        bail!("time limit must be positive");
    }
    let interactive = args.oracle == OracleKind::Interactive;
    if interactive && args.jobs > 1 {
        bail!("interactive oracles cannot run in parallel jobs");
    }
    let base = RunConfig {
        budget,
        threshold: args.thr,
        backend: args.backend.into(),
        node_limit: args.node_limit,
        seed: args.seed,
        time_limit: Some(Duration::from_secs_f64(time_limit)),
        bound_every: args.bound_every,
        max_iterations: args.max_iterations,
        evaluate_error: !interactive,
        probe: !args.no_probe,
        record_timing: !args.no_timing,
        ..RunConfig::default()
    };
    base.validate()?;

    let mut jobs = Vec::new();
    for path in &args.instance {
        for sep in &args.separator {
            for samp in &args.sampler {
                let separator = match sep {
                    SeparatorArg::Svm => Separator::Svm,
                    SeparatorArg::Sep => Separator::Sep,
                };
                let sampler = match samp {
                    SamplerArg::Sim => Sampler::Sim,
                    SamplerArg::Cut => Sampler::Cut,
                };
                jobs.push(Job { path: path.clone(), separator, sampler });
            }
        }
    }
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.jobs.max(1)).build()?;
    let results: Vec<Result<RunSummary>> =
        pool.install(|| jobs.par_iter().map(|job| run_one(job, &base, args.oracle, &args.out)).collect());

    let mut code = 0;
    for r in results {
        let s = r?;
        println!(
            "{} {}+{}: lb={} ub={} gap%={} calls={} iters={} ({:?})",
            s.instance,
            separator_name(s.separator),
            sampler_name(s.sampler),
            s.lb,
            s.ub.map_or("inf".into(), |v| v.to_string()),
            s.gap_pct.map_or("inf".into(), |v| format!("{v:.3}")),
            s.calls,
            s.iters,
            s.termination,
        );
        if s.termination == Termination::Timeout {
            code = EXIT_TIMEOUT;
        }
    }
    Ok(code)
}

fn report(args: ReportArgs) -> Result<u8> {
    let mut summaries = Vec::new();
    for path in &args.input {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let s: RunSummary = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        summaries.push(s);
    }
    let format = match args.format {
        FormatArg::Text => Format::Text,
        FormatArg::Csv => Format::Csv,
        FormatArg::Md => Format::Markdown,
    };
    let table = render(&aggregate(&summaries), format);
    print!("{table}");
    if let Some(out) = &args.out {
        write_file(out, &table)?;
    }
    Ok(0)
}

fn probe(args: ProbeArgs) -> Result<u8> {
    let mut inst = read_instance(&args.instance)?;
    let text = fs::read_to_string(&args.summary).with_context(|| format!("reading {}", args.summary.display()))?;
    let summary: RunSummary = serde_json::from_str(&text).with_context(|| format!("parsing {}", args.summary.display()))?;
    if summary.w_hat.rows.len() != inst.m || summary.w_hat.rows.iter().any(|r| r.len() != inst.n) {
        bail!("summary weights do not match instance {} (m={}, n={})", inst.name, inst.m, inst.n);
    }
    let mut oracles = match args.oracle {
        OracleKind::Simulated => OracleSuite::from_instance(&inst, None)?,
        OracleKind::Interactive => {
            inst.hidden_weights = None;
            OracleSuite::interactive(inst.m, inst.n, None)
        }
    };
    let backend = match args.backend {
        BackendArg::Enum => SearchBackend::Enumerate,
        BackendArg::Bnb => SearchBackend::BranchAndBound { node_limit: Some(args.node_limit) },
    };
    let feasible = final_feasibility_probe(&inst, &summary.w_hat, &mut oracles, backend)?;
    println!("{}: {}", inst.name, if feasible { "feasible" } else { "infeasible" });
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::ParseGap(a) => parse_gap_file(a),
        Command::Run(a) => run_cmd(a),
        Command::Report(a) => report(a),
        Command::Probe(a) => probe(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
