//! Per-source impact analysis: reset one group of fitted error parameters to
//! the ideal point, subtract the resulting change of ρ_sim from the measured
//! matrix, and project the prediction back onto physical states.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg;
use crate::mle::project_matrix;
use crate::model::{ErrorParams, SimConfig, Simulator};
use crate::quantum::{fidelity_pure, DensityMatrix, PureState2Q};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Source {
    RCorr,
    Theta22,
    P,
    /// p_A and p_B together.
    PAb,
    /// All four measurement phases.
    ThetaNet,
    Eta,
    /// All sixteen δ_ν.
    Delta,
    All,
}

impl Source {
    pub const ALL_SOURCES: [Source; 8] = [
        Source::RCorr,
        Source::Theta22,
        Source::P,
        Source::PAb,
        Source::ThetaNet,
        Source::Eta,
        Source::Delta,
        Source::All,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Source::RCorr => "r_corr",
            Source::Theta22 => "theta_22",
            Source::P => "p",
            Source::PAb => "p_ab",
            Source::ThetaNet => "theta_net",
            Source::Eta => "eta",
            Source::Delta => "delta",
            Source::All => "all",
        }
    }

    /// `params` with this source's parameters moved to the ideal point.
    pub fn reset(self, params: &ErrorParams) -> ErrorParams {
        let ideal = ErrorParams::ideal();
        let mut out = *params;
        match self {
            Source::RCorr => out.r_corr = ideal.r_corr,
            Source::Theta22 => out.theta_22 = ideal.theta_22,
            Source::P => out.p = ideal.p,
            Source::PAb => {
                out.p_a = ideal.p_a;
                out.p_b = ideal.p_b;
            }
            Source::ThetaNet => {
                out.theta_plus_a = 0.0;
                out.theta_l_a = 0.0;
                out.theta_plus_b = 0.0;
                out.theta_l_b = 0.0;
            }
            Source::Eta => out.eta = ideal.eta,
            Source::Delta => out.delta = [0.0; 16],
            Source::All => out = ideal,
        }
        out
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Source::ALL_SOURCES
            .into_iter()
            .find(|src| src.name() == s)
            .ok_or_else(|| Error::UnknownSource(s.to_string()))
    }
}

impl Serialize for Source {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AblationEntry {
    pub source: Source,
    pub predicted_fidelity: f64,
    /// Trace norm of Δρ_err.
    pub delta_rho_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationOutcome {
    /// ρ_exp − Δρ_err (Hermitian part), before projection.
    pub predicted: DensityMatrix,
    /// MLE projection of the prediction.
    pub projected: DensityMatrix,
    pub delta_rho: DensityMatrix,
    pub entry: AblationEntry,
}

fn check_fitted(fitted: &ErrorParams) -> Result<()> {
    // δ may be anything the fit produced; the physical box still applies
    fitted.validate(&fitted.delta.map(f64::abs))
}

pub fn ablate_source(
    rho_exp: &DensityMatrix,
    fitted: &ErrorParams,
    source: Source,
    cfg: &SimConfig,
) -> Result<AblationOutcome> {
    check_fitted(fitted)?;
    let mut sim = Simulator::new(*cfg)?;
    ablate_with(&mut sim, rho_exp, fitted, source)
}

fn ablate_with(
    sim: &mut Simulator,
    rho_exp: &DensityMatrix,
    fitted: &ErrorParams,
    source: Source,
) -> Result<AblationOutcome> {
    let full = sim.simulate_unchecked(fitted)?;
    let reset = sim.simulate_unchecked(&source.reset(fitted))?;
    let delta_rho = full.sub(&reset);
    let predicted = DensityMatrix::from_hermitian_unchecked(linalg::hermitian_part(rho_exp.sub(&delta_rho).matrix()));
    let projected = project_matrix(&predicted)?.rho;
    Ok(AblationOutcome {
        predicted,
        projected,
        delta_rho,
        entry: AblationEntry {
            source,
            predicted_fidelity: fidelity_pure(&PureState2Q::bell(), &projected),
            delta_rho_norm: delta_rho.trace_norm(),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationReport {
    /// F(Φ, MLE(ρ_exp)) with nothing removed.
    pub baseline_fidelity: f64,
    /// Sorted by predicted fidelity, highest first.
    pub entries: Vec<AblationEntry>,
}

impl AblationReport {
    /// Highest-ranked entry other than `all`.
    pub fn top_single_source(&self) -> Option<&AblationEntry> {
        self.entries.iter().find(|e| e.source != Source::All)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Config(format!("CSV output: {e}"));
        w.write_record(["source", "predicted_fidelity", "delta_rho_norm"]).map_err(err)?;
        w.write_record(["baseline", &crate::io::fmt_float(self.baseline_fidelity), ""])
            .map_err(err)?;
        for e in &self.entries {
            w.write_record([
                e.source.name(),
                &crate::io::fmt_float(e.predicted_fidelity),
                &crate::io::fmt_float(e.delta_rho_norm),
            ])
            .map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(format!("CSV output: {e}")))?;
        Ok(String::from_utf8(bytes).expect("CSV writer emits UTF-8"))
    }
}

/// One entry per source group plus `all`, computed in parallel and sorted.
pub fn ablation_report(rho_exp: &DensityMatrix, fitted: &ErrorParams, cfg: &SimConfig) -> Result<AblationReport> {
    check_fitted(fitted)?;
    let baseline = project_matrix(rho_exp)?.rho;
    let baseline_fidelity = fidelity_pure(&PureState2Q::bell(), &baseline);
    let mut entries = Source::ALL_SOURCES
        .par_iter()
        .map(|&src| {
            let mut sim = Simulator::new(*cfg)?;
            Ok(ablate_with(&mut sim, rho_exp, fitted, src)?.entry)
        })
        .collect::<Result<Vec<_>>>()?;
    entries.sort_by(|a, b| {
        b.predicted_fidelity
            .total_cmp(&a.predicted_fidelity)
            .then(a.source.cmp(&b.source))
    });
    Ok(AblationReport {
        baseline_fidelity,
        entries,
    })
}
