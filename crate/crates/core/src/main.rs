use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use online_covering::experts::Roster;
use online_covering::harness::suite::{run_all, Suite};
use online_covering::harness::{
    emit_table, execute, parse_algos, CheckOutcome, CheckStatus, ExperimentConfig, HarnessConfig, RunReport,
    ENV_OVERRIDES,
};
use online_covering::instance::{
    gen_anand_counterexample, gen_mwa_worst_case, gen_random, CoveringInstance, GeneratorParams,
    ScriptedPredictions,
};

#[derive(Parser)]
#[command(name = "covering", version, about = "Online covering with multiple expert predictions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Random,
    MwaWorst,
    Anand,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated instance as JSON.
    Generate {
        #[arg(long, value_enum)]
        family: Family,
        /// Generator parameters as a JSON file (random family).
        #[arg(long, conflicts_with = "preset")]
        params: Option<PathBuf>,
        /// Built-in parameter set 1 to 4 (random family).
        #[arg(long)]
        preset: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Size of the MWA worst case.
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// Expert count K of the Anand construction.
        #[arg(long, default_value_t = 5)]
        experts: usize,
        /// Batch count L of the Anand construction.
        #[arg(long, default_value_t = 2)]
        batches: usize,
        /// Where the Anand scripted predictions go; defaults to
        /// `<out>.predictions.json`.
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Run algorithms and benchmarks on one instance and check the results.
    Run {
        #[arg(long)]
        instance: PathBuf,
        /// Roster JSON; defaults to the roster implied by the instance.
        #[arg(long)]
        experts: Option<PathBuf>,
        /// Scripted predictions for `scripted` roster entries.
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Comma-separated subset of alg, mwa, anand, combined.
        #[arg(long, default_value = "alg,mwa,anand,combined")]
        algos: String,
        #[arg(long)]
        no_benchmarks: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-step solutions as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run a suite and print the cost table.
    Benchmark {
        #[arg(long)]
        suite: PathBuf,
        /// CSV copy of the table.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Directory for one report JSON per run.
        #[arg(long)]
        reports: Option<PathBuf>,
    },
    /// Re-check a saved report.
    Verify {
        #[arg(long)]
        report: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn harness_config() -> Result<HarnessConfig> {
    HarnessConfig::from_env().with_context(|| format!("reading overrides ({})", ENV_OVERRIDES.join(", ")))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let s = serde_json::to_string_pretty(value)?;
    std::fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

fn dispatch(command: Command) -> Result<bool> {
    match command {
        Command::Generate {
            family,
            params,
            preset,
            seed,
            n,
            experts,
            batches,
            predictions,
            out,
        } => {
            generate(family, params, preset, seed, n, experts, batches, predictions, &out)?;
            Ok(true)
        }
        Command::Run {
            instance,
            experts,
            predictions,
            algos,
            no_benchmarks,
            out,
            trace,
        } => run(&instance, experts, predictions, &algos, !no_benchmarks, out, trace),
        Command::Benchmark { suite, csv, reports } => benchmark(&suite, csv, reports),
        Command::Verify { report } => verify(&report),
    }
}

#[allow(clippy::too_many_arguments)]
fn generate(
    family: Family,
    params: Option<PathBuf>,
    preset: Option<usize>,
    seed: Option<u64>,
    n: usize,
    experts: usize,
    batches: usize,
    predictions: Option<PathBuf>,
    out: &Path,
) -> Result<()> {
    match family {
        Family::Random => {
            let mut p: GeneratorParams = match (params, preset) {
                (Some(path), _) => {
                    let s = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    serde_json::from_str(&s).context("parsing generator parameters")?
                }
                (None, Some(i)) => GeneratorParams::preset(i).with_context(|| format!("no preset {i}"))?,
                (None, None) => bail!("random instances need --params or --preset"),
            };
            if let Some(s) = seed {
                p.seed = s;
            }
            gen_random(&p)?.save(out)?;
        }
        Family::MwaWorst => gen_mwa_worst_case(n)?.save(out)?,
        Family::Anand => {
            let (inst, preds) = gen_anand_counterexample(experts, batches)?;
            inst.save(out)?;
            let path = predictions.unwrap_or_else(|| out.with_extension("predictions.json"));
            preds.save(&path)?;
            eprintln!("predictions written to {}", path.display());
        }
    }
    Ok(())
}

fn print_checks(id: &str, checks: &[CheckOutcome]) {
    for c in checks {
        let tag = match c.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::NotApplicable => "N/A ",
        };
        println!("[{tag}] {id} {}: {}", c.name, c.detail);
    }
}

fn run(
    instance: &Path,
    experts: Option<PathBuf>,
    predictions: Option<PathBuf>,
    algos: &str,
    benchmarks: bool,
    out: Option<PathBuf>,
    trace: Option<PathBuf>,
) -> Result<bool> {
    let harness = harness_config()?;
    let inst = CoveringInstance::load(instance)?;
    let scripted = predictions.as_deref().map(ScriptedPredictions::load).transpose()?;
    let id = instance
        .file_stem()
        .map_or_else(|| "run".to_string(), |s| s.to_string_lossy().into_owned());
    let mut cfg = ExperimentConfig::new(id, inst, scripted).with_algos(parse_algos(algos)?);
    cfg.benchmarks = benchmarks;
    cfg.base_dir = instance.parent().map(Path::to_path_buf);
    if let Some(path) = experts {
        cfg.roster = Roster::load(&path)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
    }

    let output = execute(&cfg, &harness)?;
    let report = &output.report;
    print_checks(&report.id, &report.checks);
    print_costs(report);
    if let Some(path) = out {
        write_json(&path, report)?;
    }
    if let Some(path) = trace {
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        for (name, run) in [("alg", &output.alg), ("combined", &output.combined)] {
            if let Some(run) = run {
                for rec in &run.trace {
                    writeln!(w, "{}", json!({ "algo": name, "step": rec }))?;
                }
            }
        }
        for (name, xs) in [("mwa", &output.mwa), ("anand", &output.anand)] {
            if let Some(xs) = xs {
                for (t, x) in xs.iter().enumerate() {
                    writeln!(w, "{}", json!({ "algo": name, "t": t, "x": x }))?;
                }
            }
        }
        w.flush()?;
    }
    Ok(report.passed)
}

fn print_costs(r: &RunReport) {
    let show = |label: &str, v: Option<f64>| {
        if let Some(v) = v {
            println!("  {label:<12} {v:.6}");
        }
    };
    println!("{} (n = {}, T = {}, K = {:?}, rho = {:?})", r.id, r.n, r.rows, r.k_effective, r.rho);
    show("ALG", r.costs.alg);
    show("MWA", r.costs.mwa);
    show("Anand", r.costs.anand);
    show("combined", r.costs.combined);
    show("avg experts", r.costs.avg_experts);
    show("best expert", r.costs.best_expert);
    show("OPT", r.benchmarks.offline_opt);
    show("LIN-COMB", r.benchmarks.lincomb);
    show("DYNAMIC", r.benchmarks.dynamic);
}

fn benchmark(suite_path: &Path, csv: Option<PathBuf>, reports_dir: Option<PathBuf>) -> Result<bool> {
    let harness = harness_config()?;
    let suite = Suite::load(suite_path)?;
    let base = suite_path.parent().unwrap_or(Path::new("."));
    let experiments = suite.experiments(base)?;
    let results = run_all(&experiments, &harness);

    let mut ok = true;
    let mut reports = Vec::new();
    for (exp, res) in experiments.iter().zip(results) {
        match res {
            Ok(r) => {
                for c in r.failures() {
                    println!("[FAIL] {} {}: {}", r.id, c.name, c.detail);
                }
                ok &= r.passed;
                reports.push(r);
            }
            Err(e) => {
                println!("[ERROR] {}: {e}", exp.id);
                ok = false;
            }
        }
    }
    let table = emit_table(&reports);
    print!("{}", table.to_markdown());
    if let Some(path) = csv {
        std::fs::write(&path, table.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(dir) = reports_dir {
        std::fs::create_dir_all(&dir)?;
        for r in &reports {
            write_json(&dir.join(format!("{}.json", r.id)), r)?;
        }
    }
    Ok(ok)
}

fn verify(path: &Path) -> Result<bool> {
    let harness = harness_config()?;
    let s = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let report: RunReport = serde_json::from_str(&s).context("parsing report")?;
    let checks = report.verify(&harness);
    print_checks(&report.id, &checks);
    let stored_failures: Vec<_> = report.failures().collect();
    for c in &stored_failures {
        println!("[FAIL] {} {} (stored): {}", report.id, c.name, c.detail);
    }
    Ok(report.passed && stored_failures.is_empty() && !checks.iter().any(CheckOutcome::failed))
}
