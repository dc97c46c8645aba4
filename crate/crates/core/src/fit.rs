//! Two-stage model-based fit of an experimental density matrix and the
//! randomized-restart stability scan.

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Bounds, ErrorParams, NetPhaseReport, SimConfig, Simulator, N_PHYSICAL, PHYSICAL_NAMES};
use crate::optimize::{powell_minimize, PowellOptions, PowellResult};
use crate::quantum::{trace_distance, DensityMatrix};

/// Order of the first stage-1 sweep, as indices into the physical vector.
/// Phases come before θ22 so that, from the ideal start, a common phase offset
/// is absorbed by the measurement phases rather than by θ22.
const STAGE1_ORDER: [usize; N_PHYSICAL] = [5, 6, 7, 8, 9, 2, 3, 4, 1, 0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Relative cost decrease per sweep below which a stage stops.
    pub cost_tol: f64,
    /// Line-search step tolerance.
    pub param_tol: f64,
    /// Outer Powell iterations per stage.
    pub max_iter: usize,
    /// Powell is restarted with fresh axes while a restart still lowers the cost.
    pub max_restarts: usize,
    pub n_runs: usize,
    pub seed: Option<u64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            cost_tol: 1e-8,
            param_tol: 1e-8,
            max_iter: 200,
            max_restarts: 4,
            n_runs: 100,
            seed: None,
        }
    }
}

impl OptimizerConfig {
    fn powell(&self) -> PowellOptions {
        PowellOptions {
            ftol: self.cost_tol,
            xtol: self.param_tol,
            max_iter: self.max_iter,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cost_tol > 0.0) || !(self.param_tol > 0.0) || self.max_iter == 0 {
            return Err(Error::Config(
                "optimizer tolerances must be positive and max_iter at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of a two-stage fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub params: ErrorParams,
    pub net_phases: NetPhaseReport,
    pub final_cost: f64,
    pub stage1_cost: f64,
    pub initial_cost: f64,
    pub n_evals: usize,
    pub converged: bool,
    pub trajectory: Vec<(usize, f64)>,
}

fn axes(order: &[usize], n: usize) -> Vec<Vec<f64>> {
    order
        .iter()
        .map(|&i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        })
        .collect()
}

/// Powell with restarts from the last optimum; trajectories are concatenated.
fn powell_with_restarts<F>(
    mut f: F,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    cfg: &OptimizerConfig,
    order: &[usize],
) -> Result<PowellResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let opts = cfg.powell();
    let mut best = powell_minimize(&mut f, x0, lo, hi, &opts, Some(axes(order, x0.len())))?;
    for _ in 0..cfg.max_restarts {
        let again = powell_minimize(&mut f, &best.x, lo, hi, &opts, Some(axes(order, x0.len())))?;
        let offset = best.trajectory.last().map_or(0, |t| t.0);
        let gain = best.fun - again.fun;
        best.n_evals += again.n_evals;
        best.trajectory
            .extend(again.trajectory.iter().skip(1).map(|&(i, c)| (i + offset, c)));
        best.converged = again.converged;
        let improved = gain > cfg.cost_tol * (best.fun.abs() + again.fun.abs()) * 0.5 + 1e-20;
        best.x = again.x;
        best.fun = again.fun;
        if !improved {
            break;
        }
    }
    Ok(best)
}

/// Squared Frobenius norm of ρ − σ; smooth, used to bring stage 1 into the basin.
fn hilbert_schmidt_sq(rho: &DensityMatrix, sigma: &DensityMatrix) -> f64 {
    let a = rho.matrix();
    let b = sigma.matrix();
    (0..4)
        .flat_map(|i| (0..4).map(move |j| (a[i][j] - b[i][j]).norm_sqr()))
        .sum()
}

/// The stage-1 point moved along θ22 → 0 with the offset spread over the four
/// measurement phases, which leaves every S_k + θ22 unchanged. None when θ22 is
/// already zero or the shifted phases leave the box.
fn gauge_candidate(x: &[f64], bounds: &Bounds) -> Option<Vec<f64>> {
    let shift = x[1];
    if shift == 0.0 {
        return None;
    }
    let mut out = x.to_vec();
    out[1] = 0.0;
    for i in 5..9 {
        out[i] += shift / 2.0;
        if out[i] < bounds.lo[i] || out[i] > bounds.hi[i] {
            return None;
        }
    }
    Some(out)
}

/// Two-stage fit from the ideal starting point.
pub fn mbqeq_fit(
    rho_exp: &DensityMatrix,
    sigma: &[f64; 16],
    cfg: &SimConfig,
    opt: &OptimizerConfig,
) -> Result<OptimizationResult> {
    mbqeq_fit_from(rho_exp, sigma, cfg, opt, &ErrorParams::ideal())
}

/// Stage 1 fits the ten physical parameters with δ = 0; stage 2 fits the
/// sixteen δ_ν inside ±σ_ν with stage-1 values frozen (skipped when σ = 0).
pub fn mbqeq_fit_from(
    rho_exp: &DensityMatrix,
    sigma: &[f64; 16],
    cfg: &SimConfig,
    opt: &OptimizerConfig,
    start: &ErrorParams,
) -> Result<OptimizationResult> {
    opt.validate()?;
    if sigma.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
        return Err(Error::Validation("σ_ν must be finite and non-negative".into()));
    }
    let mut start = *start;
    start.delta = [0.0; 16];
    start.validate(sigma)?;
    let mut sim = Simulator::new(*cfg)?;

    let bounds = Bounds::physical();
    let x0 = start.physical();
    let seeded = {
        let mut cost = |x: &[f64]| -> Result<f64> {
            let mut p = ErrorParams::ideal();
            p.set_physical(x);
            Ok(hilbert_schmidt_sq(rho_exp, &sim.simulate_unchecked(&p)?))
        };
        powell_with_restarts(&mut cost, &x0, &bounds.lo, &bounds.hi, opt, &STAGE1_ORDER)?
    };
    let mut stage1 = {
        let mut cost = |x: &[f64]| -> Result<f64> {
            let mut p = ErrorParams::ideal();
            p.set_physical(x);
            Ok(trace_distance(rho_exp, &sim.simulate_unchecked(&p)?))
        };
        let initial_cost = cost(&x0)?;
        let from = if cost(&seeded.x)? <= initial_cost { seeded.x.clone() } else { x0.to_vec() };
        let mut polished = powell_with_restarts(&mut cost, &from, &bounds.lo, &bounds.hi, opt, &STAGE1_ORDER)?;
        polished.trajectory.insert(0, (0, initial_cost));
        for t in polished.trajectory.iter_mut().skip(1) {
            t.0 += 1;
        }
        polished
    };
    stage1.n_evals += seeded.n_evals;
    if let Some(gauged) = gauge_candidate(&stage1.x, &bounds) {
        let mut cost = |x: &[f64]| -> Result<f64> {
            let mut p = ErrorParams::ideal();
            p.set_physical(x);
            Ok(trace_distance(rho_exp, &sim.simulate_unchecked(&p)?))
        };
        let polished = powell_with_restarts(&mut cost, &gauged, &bounds.lo, &bounds.hi, opt, &STAGE1_ORDER)?;
        stage1.n_evals += polished.n_evals;
        if polished.fun <= stage1.fun {
            let last = stage1.trajectory.last().map_or(0, |t| t.0);
            stage1.trajectory.push((last + 1, polished.fun));
            stage1.x = polished.x;
            stage1.fun = polished.fun;
        }
    }
    let initial_cost = stage1.trajectory[0].1;
    let mut params = ErrorParams::ideal();
    params.set_physical(&stage1.x);
    let stage1_cost = stage1.fun;

    if sigma.iter().any(|&s| s > 0.0) {
        let lo: Vec<f64> = sigma.iter().map(|s| -s).collect();
        let frozen = params;
        let mut cost = |x: &[f64]| -> Result<f64> {
            let mut p = frozen;
            p.delta.copy_from_slice(x);
            Ok(trace_distance(rho_exp, &sim.simulate_unchecked(&p)?))
        };
        let order: Vec<usize> = (0..16).collect();
        let stage2 = powell_with_restarts(&mut cost, &[0.0; 16], &lo, sigma, opt, &order)?;
        if stage2.fun <= stage1.fun {
            params.delta.copy_from_slice(&stage2.x);
        }
        let offset = stage1.trajectory.last().map_or(0, |t| t.0);
        stage1
            .trajectory
            .extend(stage2.trajectory.iter().skip(1).map(|&(i, c)| (i + offset, c)));
        stage1.n_evals += stage2.n_evals;
        stage1.converged &= stage2.converged;
    }

    params.validate(sigma)?;
    let final_cost = trace_distance(rho_exp, &sim.simulate_unchecked(&params)?);
    Ok(OptimizationResult {
        params,
        net_phases: params.net_phases(),
        final_cost,
        stage1_cost,
        initial_cost,
        n_evals: stage1.n_evals,
        converged: stage1.converged,
        trajectory: stage1.trajectory,
    })
}

/// Five-number summary with quartiles by linear interpolation between order statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |f: f64| {
            let pos = f * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Self {
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[v.len() - 1],
        }
    }

    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityRun {
    pub run: usize,
    pub seed: u64,
    pub start: ErrorParams,
    pub params: ErrorParams,
    pub final_cost: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub seed: u64,
    pub n_runs: usize,
    /// Per-parameter statistics keyed by name, physical parameters then net phases.
    pub parameters: Vec<(String, Summary)>,
    pub final_cost: Summary,
    pub fraction_cost_below_1e_3: f64,
    pub runs: Vec<StabilityRun>,
}

impl StabilityReport {
    pub fn summary(&self, name: &str) -> Option<&Summary> {
        self.parameters.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }
}

/// Worker count from MBQEQ_THREADS; 0, unset or unparsable means automatic.
pub fn thread_count_from_env() -> usize {
    std::env::var("MBQEQ_THREADS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}

fn random_start(rng: &mut SplitMix64) -> ErrorParams {
    let b = Bounds::physical();
    let x: Vec<f64> = (0..N_PHYSICAL).map(|i| rng.random_range(b.lo[i]..=b.hi[i])).collect();
    let mut p = ErrorParams::ideal();
    p.set_physical(&x);
    p
}

/// Repeats the fit from uniformly drawn starting points. Run seeds are drawn
/// in order from `seed` before dispatch, so the report does not depend on the
/// thread count.
pub fn stability_scan(
    rho_exp: &DensityMatrix,
    sigma: &[f64; 16],
    cfg: &SimConfig,
    opt: &OptimizerConfig,
    n_runs: usize,
    seed: u64,
) -> Result<StabilityReport> {
    stability_scan_with_threads(rho_exp, sigma, cfg, opt, n_runs, seed, thread_count_from_env())
}

pub fn stability_scan_with_threads(
    rho_exp: &DensityMatrix,
    sigma: &[f64; 16],
    cfg: &SimConfig,
    opt: &OptimizerConfig,
    n_runs: usize,
    seed: u64,
    threads: usize,
) -> Result<StabilityReport> {
    if n_runs < 2 {
        return Err(Error::Precondition(format!(
            "stability scan needs at least 2 runs, got {n_runs}"
        )));
    }
    let mut master = SplitMix64::seed_from_u64(seed);
    let jobs: Vec<(usize, u64, ErrorParams)> = (0..n_runs)
        .map(|run| {
            let run_seed: u64 = master.random();
            let start = random_start(&mut SplitMix64::seed_from_u64(run_seed));
            (run, run_seed, start)
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<StabilityRun>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(run, run_seed, start)| {
                let fit = mbqeq_fit_from(rho_exp, sigma, cfg, opt, &start)?;
                Ok(StabilityRun {
                    run,
                    seed: run_seed,
                    start,
                    params: fit.params,
                    final_cost: fit.final_cost,
                    converged: fit.converged,
                })
            })
            .collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;

    let mut parameters = Vec::new();
    for (i, name) in PHYSICAL_NAMES.iter().enumerate() {
        let v: Vec<f64> = runs.iter().map(|r| r.params.physical()[i]).collect();
        parameters.push((name.to_string(), Summary::of(&v)));
    }
    for (k, label) in NetPhaseReport::LABELS.iter().enumerate() {
        let v: Vec<f64> = runs.iter().map(|r| r.params.net_phases().radians[k]).collect();
        parameters.push((format!("net_phase[{label}]"), Summary::of(&v)));
    }
    let costs: Vec<f64> = runs.iter().map(|r| r.final_cost).collect();
    let below = costs.iter().filter(|&&c| c <= 1e-3).count() as f64 / n_runs as f64;
    Ok(StabilityReport {
        seed,
        n_runs,
        parameters,
        final_cost: Summary::of(&costs),
        fraction_cost_below_1e_3: below,
        runs,
    })
}
