//! Subcommands of the `mbqeq` binary. Each command builds a JSON report plus
//! optional sidecar and plot-data files; [`run`] writes them out.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_distr::{Distribution, Poisson};
use rand_xoshiro::SplitMix64;
use serde_json::{json, Value};

use crate::ablation::{ablate_source, ablation_report, Source};
use crate::accidentals::{accidentals_report, DetectorContext};
use crate::error::{Error, Result};
use crate::fit::{mbqeq_fit, stability_scan, StabilityReport};
use crate::io::{self, CountMeta, Input, RunConfig};
use crate::mle::{mle_fit, project_matrix, MleInput, MleResult};
use crate::model::{ErrorParams, SimConfig, Simulator};
use crate::quantum::{depolarize, eigendecompose, fidelity_pure, trace_distance, DensityMatrix, PureState2Q};
use crate::tomography::{linear_qst, measure_probs, normalize_counts, CoincidenceRecord, ProjectorSet};

#[derive(Debug, Parser)]
#[command(name = "mbqeq", version, about = "Model-based error quantification for two-qubit tomography")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration JSON.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for stochastic commands; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Report path; stdout when absent.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Also write CSV plot data next to the report.
    #[arg(long, global = true)]
    pub emit_plots: bool,
    /// Add wall time to the report (breaks byte-identical output).
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Linear tomography of a count file.
    Reconstruct {
        #[arg(long)]
        input: PathBuf,
    },
    /// Fit the error model to counts or a density matrix.
    Quantify {
        #[arg(long)]
        input: PathBuf,
    },
    /// Draw Poisson counts from a parameter file.
    Synth {
        /// Parameter JSON.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        total_counts: Option<u64>,
    },
    /// Predicted fidelity after removing each error source.
    Ablate {
        /// Counts or density matrix.
        #[arg(long)]
        input: PathBuf,
        /// Fitted parameters (flat JSON or a quantify report).
        #[arg(long)]
        params: PathBuf,
        /// Ablate a single source instead of producing the ranking.
        #[arg(long)]
        source: Option<String>,
    },
    /// Repeated fits from random starting points.
    Stability {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        n_runs: Option<usize>,
    },
    /// Maximum-likelihood physical state.
    Mle {
        #[arg(long)]
        input: PathBuf,
    },
    /// Visibility, mean pair number and η_exp from counts.
    Accidentals {
        #[arg(long)]
        input: PathBuf,
        /// CSV with header `mu,rate` of single-count probabilities.
        #[arg(long)]
        singles: Option<PathBuf>,
    },
}

/// A report and the extra files that go next to it, keyed by file-name suffix.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub report: Value,
    pub sidecars: Vec<(String, String)>,
    pub plots: Vec<(String, String)>,
}

impl Outcome {
    fn new(report: Value) -> Self {
        Self {
            report,
            sidecars: Vec::new(),
            plots: Vec::new(),
        }
    }
}

/// Effective options after merging the config file with command-line flags.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub config: RunConfig,
    pub seed: Option<u64>,
}

impl Options {
    fn sim(&self) -> SimConfig {
        SimConfig::for_fitting(self.config.wavepacket)
    }

    fn require_seed(&self) -> Result<u64> {
        self.seed
            .or(self.config.seed)
            .or(self.config.optimizer.seed)
            .ok_or_else(|| Error::Config("this command needs a seed (--seed or \"seed\" in the config)".into()))
    }
}

/// ρ_exp, σ and the raw record when the input held counts.
fn experimental(input: &Input) -> Result<(DensityMatrix, [f64; 16], Option<&CoincidenceRecord>)> {
    match input {
        Input::Counts(rec) => {
            let probs = normalize_counts(rec)?;
            Ok((linear_qst(&probs), probs.sigma, Some(rec)))
        }
        Input::Density(rho) => Ok((*rho, [0.0; 16], None)),
    }
}

fn input_kind(input: &Input) -> &'static str {
    match input {
        Input::Counts(_) => "counts",
        Input::Density(_) => "density",
    }
}

fn bell_fidelity(rho: &DensityMatrix) -> f64 {
    fidelity_pure(&PureState2Q::bell(), rho)
}

pub fn cmd_reconstruct(input: &Path) -> Result<Outcome> {
    let rec = io::read_counts(input)?;
    let rho = linear_qst(&normalize_counts(&rec)?);
    let acc = accidentals_report(&rec, None)?;
    let report = json!({
        "rho": io::rho_array(&rho),
        "trace": rho.trace(),
        "min_eigenvalue": rho.min_eigenvalue(),
        "fidelity": bell_fidelity(&rho),
        "eigen": eigendecompose(&rho),
        "accidentals": acc,
    });
    let mut out = Outcome::new(report);
    out.sidecars.push((".accidentals.json".into(), io::to_json_string(&acc)?));
    out.plots.push((".rho.csv".into(), io::matrix_csv(&rho)));
    Ok(out)
}

pub fn cmd_quantify(input: &Path, opts: &Options) -> Result<Outcome> {
    let data = io::read_input(input)?;
    let (rho_exp, sigma, rec) = experimental(&data)?;
    let sim_cfg = opts.sim();
    let fit = mbqeq_fit(&rho_exp, &sigma, &sim_cfg, &opts.config.optimizer)?;
    let rho_sim = Simulator::new(sim_cfg)?.simulate_unchecked(&fit.params)?;
    let residual = rho_exp.sub(&rho_sim);
    let mut report = json!({
        "input": input_kind(&data),
        "trace_distance_before": trace_distance(&rho_exp, &DensityMatrix::ideal()),
        "trace_distance_after": fit.final_cost,
        "params": fit.params,
        "net_phases": fit.net_phases,
        "initial_cost": fit.initial_cost,
        "stage1_cost": fit.stage1_cost,
        "final_cost": fit.final_cost,
        "n_evals": fit.n_evals,
        "converged": fit.converged,
        "trajectory": fit.trajectory,
        "rho_exp": io::rho_array(&rho_exp),
        "rho_sim": io::rho_array(&rho_sim),
        "residual": io::rho_array(&residual),
    });
    if let Some(rec) = rec {
        report["accidentals"] = io::to_value(&accidentals_report(rec, None)?)?;
    }
    let mut out = Outcome::new(report);
    out.plots.push((".rho_exp.csv".into(), io::matrix_csv(&rho_exp)));
    out.plots.push((".rho_sim.csv".into(), io::matrix_csv(&rho_sim)));
    out.plots.push((".residual.csv".into(), io::matrix_csv(&residual)));
    Ok(out)
}

/// Poisson counts around C·s'_ν with δ = 0, one SplitMix64 stream per seed,
/// drawn in basis-label order.
pub fn synthesize_counts(
    params: &ErrorParams,
    total_counts: u64,
    seed: u64,
    cfg: &SimConfig,
    meta: &CountMeta,
) -> Result<CoincidenceRecord> {
    if total_counts == 0 {
        return Err(Error::Precondition("total_counts must be positive".into()));
    }
    let mut p = *params;
    p.delta = [0.0; 16];
    p.validate(&[0.0; 16])?;
    let mut sim = Simulator::new(*cfg)?;
    let source = sim.source_state(p.r_corr, p.p, p.theta_22)?;
    let mixed = depolarize(&source, p.eta)?;
    let bases = ProjectorSet::with_errors(&p.channel_a(), &p.channel_b())?;
    let probs = measure_probs(&mixed, &bases, &[0.0; 16]);
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut counts = [0u64; 16];
    for (n, s) in counts.iter_mut().zip(probs.s) {
        let mean = total_counts as f64 * s;
        if mean > 0.0 {
            let law = Poisson::new(mean).map_err(|e| Error::Estimation(format!("Poisson mean {mean}: {e}")))?;
            *n = law.sample(&mut rng) as u64;
        }
    }
    let rec = CoincidenceRecord {
        counts,
        alpha_a: meta.alpha[0],
        alpha_b: meta.alpha[1],
        dark_a: meta.dark[0],
        dark_b: meta.dark[1],
        rep_rate: meta.rep_rate_hz,
        dead_time: meta.dead_time_s,
    };
    rec.validate()?;
    Ok(rec)
}

pub fn cmd_synth(params_file: &Path, total_counts: Option<u64>, opts: &Options) -> Result<CoincidenceRecord> {
    let params = io::read_params(params_file)?;
    let total = total_counts
        .or(opts.config.total_counts)
        .ok_or_else(|| Error::Config("synth needs --total-counts (or \"total_counts\" in the config)".into()))?;
    let seed = opts.require_seed()?;
    let meta = opts
        .config
        .detector
        .unwrap_or_else(|| CountMeta::from(&DetectorContext::default()));
    synthesize_counts(&params, total, seed, &opts.sim(), &meta)
}

pub fn cmd_ablate(input: &Path, params_file: &Path, source: Option<&str>, opts: &Options) -> Result<Outcome> {
    let data = io::read_input(input)?;
    let (rho_exp, _, _) = experimental(&data)?;
    let fitted = io::read_params(params_file)?;
    if let Some(name) = source {
        let src: Source = name.parse()?;
        let one = ablate_source(&rho_exp, &fitted, src, &opts.sim())?;
        return Ok(Outcome::new(json!({
            "source": one.entry.source,
            "predicted_fidelity": one.entry.predicted_fidelity,
            "delta_rho_norm": one.entry.delta_rho_norm,
            "delta_rho": io::rho_array(&one.delta_rho),
            "predicted": io::rho_array(&one.predicted),
            "projected": io::rho_array(&one.projected),
        })));
    }
    let report = ablation_report(&rho_exp, &fitted, &opts.sim())?;
    let mut out = Outcome::new(io::to_value(&report)?);
    out.plots.push((".ablation.csv".into(), report.to_csv()?));
    Ok(out)
}

fn quartiles_csv(report: &StabilityReport) -> String {
    let mut out = String::from("parameter,min,q1,median,q3,max\n");
    let rows = report
        .parameters
        .iter()
        .map(|(n, s)| (n.as_str(), s))
        .chain(std::iter::once(("final_cost", &report.final_cost)));
    for (name, s) in rows {
        let vals: Vec<String> = [s.min, s.q1, s.median, s.q3, s.max].iter().map(|v| io::fmt_float(*v)).collect();
        out.push_str(&format!("{name},{}\n", vals.join(",")));
    }
    out
}

pub fn cmd_stability(input: &Path, n_runs: Option<usize>, opts: &Options) -> Result<Outcome> {
    let data = io::read_input(input)?;
    let (rho_exp, sigma, _) = experimental(&data)?;
    let seed = opts.require_seed()?;
    let n = n_runs.or(opts.config.n_runs).unwrap_or(opts.config.optimizer.n_runs);
    let report = stability_scan(&rho_exp, &sigma, &opts.sim(), &opts.config.optimizer, n, seed)?;
    let mut out = Outcome::new(io::to_value(&report)?);
    out.plots.push((".quartiles.csv".into(), quartiles_csv(&report)));
    Ok(out)
}

pub fn cmd_mle(input: &Path) -> Result<Outcome> {
    let data = io::read_input(input)?;
    let (linear, _, rec) = experimental(&data)?;
    let res: MleResult = match rec {
        Some(rec) => mle_fit(MleInput::Counts(rec))?,
        None => project_matrix(&linear)?,
    };
    let report = json!({
        "input": input_kind(&data),
        "rho": io::rho_array(&res.rho),
        "fidelity": bell_fidelity(&res.rho),
        "min_eigenvalue": res.rho.min_eigenvalue(),
        "input_fidelity": bell_fidelity(&linear),
        "input_min_eigenvalue": linear.min_eigenvalue(),
        "trace_distance_to_input": trace_distance(&res.rho, &linear),
        "t": res.t,
        "initial_likelihood": res.initial_likelihood,
        "final_likelihood": res.final_likelihood,
        "normalization": res.normalization,
        "n_evals": res.n_evals,
        "converged": res.converged,
    });
    let mut out = Outcome::new(report);
    out.plots.push((".rho.csv".into(), io::matrix_csv(&res.rho)));
    Ok(out)
}

pub fn cmd_accidentals(input: &Path, singles: Option<&Path>) -> Result<Outcome> {
    let rec = match io::read_input(input)? {
        Input::Counts(rec) => rec,
        Input::Density(_) => {
            return Err(Error::Config("accidentals needs a count file, not a density matrix".into()))
        }
    };
    let points = singles.map(io::read_single_counts).transpose()?;
    let report = accidentals_report(&rec, points.as_deref())?;
    Ok(Outcome::new(io::to_value(&report)?))
}

fn options(cli: &Cli) -> Result<Options> {
    let config = match &cli.config {
        Some(path) => io::read_config(path)?,
        None => RunConfig::default(),
    };
    Ok(Options { config, seed: cli.seed })
}

/// Runs one command, writing the report to `--output` (or stdout) and any
/// sidecar and plot files next to it.
pub fn run(cli: &Cli) -> Result<()> {
    let opts = options(cli)?;
    let emit_plots = cli.emit_plots || opts.config.emit_plots;
    if emit_plots && cli.output.is_none() {
        return Err(Error::Config("--emit-plots needs --output".into()));
    }
    let started = Instant::now();
    let outcome = match &cli.command {
        Command::Reconstruct { input } => cmd_reconstruct(input)?,
        Command::Quantify { input } => cmd_quantify(input, &opts)?,
        Command::Synth { input, total_counts } => {
            let rec = cmd_synth(input, *total_counts, &opts)?;
            return write_counts(&rec, cli.output.as_deref());
        }
        Command::Ablate { input, params, source } => cmd_ablate(input, params, source.as_deref(), &opts)?,
        Command::Stability { input, n_runs } => cmd_stability(input, *n_runs, &opts)?,
        Command::Mle { input } => cmd_mle(input)?,
        Command::Accidentals { input, singles } => cmd_accidentals(input, singles.as_deref())?,
    };
    let mut report = outcome.report;
    if cli.timing {
        if let Value::Object(map) = &mut report {
            map.insert("wall_time_s".into(), json!(started.elapsed().as_secs_f64()));
        }
    }
    let text = io::json_string(&report);
    match &cli.output {
        None => print!("{text}"),
        Some(path) => {
            io::write_text(path, &text)?;
            for (suffix, body) in &outcome.sidecars {
                io::write_text(&io::sibling(path, suffix), body)?;
            }
            if emit_plots {
                for (suffix, body) in &outcome.plots {
                    io::write_text(&io::sibling(path, suffix), body)?;
                }
            }
        }
    }
    Ok(())
}

/// JSON count file, or `label,count` CSV plus `<stem>.meta.json` for a `.csv` path.
fn write_counts(rec: &CoincidenceRecord, output: Option<&Path>) -> Result<()> {
    match output {
        None => {
            print!("{}", io::counts_json(rec)?);
            Ok(())
        }
        Some(path) if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) => {
            let mut text = String::from("label,count\n");
            for (label, n) in crate::tomography::LABELS.iter().zip(rec.counts) {
                text.push_str(&format!("{label},{n}\n"));
            }
            io::write_text(path, &text)?;
            let meta = CountMeta::from(&DetectorContext::from_record(rec));
            io::write_text(&io::sibling(path, ".meta.json"), &io::to_json_string(&meta)?)
        }
        Some(path) => io::write_text(path, &io::counts_json(rec)?),
    }
}
