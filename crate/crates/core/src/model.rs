//! The 26-parameter error model and the simulated reconstruction ρ_sim.
//!
//! Pipeline: source state (wavepacket or analytic) → depolarization →
//! measurement with errored interferometers plus offsets δ_ν → linear inversion
//! with the ideal reconstruction matrices.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ZERO;
use crate::quantum::{depolarize, DensityMatrix, PureState2Q};
use crate::tomography::{linear_qst, measure_probs, ChannelErrors, ProjectorSet};
use crate::wavepacket::{BasisCache, Geometry};

pub const N_PHYSICAL: usize = 10;
pub const N_PARAMS: usize = N_PHYSICAL + 16;

/// Names of the physical parameters in vector order.
pub const PHYSICAL_NAMES: [&str; N_PHYSICAL] = [
    "r_corr",
    "theta_22",
    "p",
    "p_a",
    "p_b",
    "theta_plus_a",
    "theta_l_a",
    "theta_plus_b",
    "theta_l_b",
    "eta",
];

const PHYSICAL_LO: [f64; N_PHYSICAL] = [
    1.0, -FRAC_PI_2, 0.2, 0.2, 0.2, -FRAC_PI_2, -FRAC_PI_2, -FRAC_PI_2, -FRAC_PI_2, 0.0,
];
const PHYSICAL_HI: [f64; N_PHYSICAL] = [
    3.0, FRAC_PI_2, 0.8, 0.8, 0.8, FRAC_PI_2, FRAC_PI_2, FRAC_PI_2, FRAC_PI_2, 1.0,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorParams {
    pub r_corr: f64,
    pub theta_22: f64,
    pub p: f64,
    pub p_a: f64,
    pub p_b: f64,
    pub theta_plus_a: f64,
    pub theta_l_a: f64,
    pub theta_plus_b: f64,
    pub theta_l_b: f64,
    pub eta: f64,
    #[serde(default)]
    pub delta: [f64; 16],
}

impl Default for ErrorParams {
    fn default() -> Self {
        Self::ideal()
    }
}

impl ErrorParams {
    /// r_corr = 1, p = p_A = p_B = 1/2, everything else zero.
    pub fn ideal() -> Self {
        Self {
            r_corr: 1.0,
            theta_22: 0.0,
            p: 0.5,
            p_a: 0.5,
            p_b: 0.5,
            theta_plus_a: 0.0,
            theta_l_a: 0.0,
            theta_plus_b: 0.0,
            theta_l_b: 0.0,
            eta: 0.0,
            delta: [0.0; 16],
        }
    }

    pub fn physical(&self) -> [f64; N_PHYSICAL] {
        [
            self.r_corr,
            self.theta_22,
            self.p,
            self.p_a,
            self.p_b,
            self.theta_plus_a,
            self.theta_l_a,
            self.theta_plus_b,
            self.theta_l_b,
            self.eta,
        ]
    }

    pub fn set_physical(&mut self, x: &[f64]) {
        [
            self.r_corr,
            self.theta_22,
            self.p,
            self.p_a,
            self.p_b,
            self.theta_plus_a,
            self.theta_l_a,
            self.theta_plus_b,
            self.theta_l_b,
            self.eta,
        ] = x[..N_PHYSICAL].try_into().expect("ten physical parameters");
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.physical().to_vec();
        v.extend_from_slice(&self.delta);
        v
    }

    pub fn from_vec(x: &[f64]) -> Self {
        let mut out = Self::ideal();
        out.set_physical(x);
        out.delta.copy_from_slice(&x[N_PHYSICAL..N_PARAMS]);
        out
    }

    pub fn net_phases(&self) -> NetPhaseReport {
        NetPhaseReport::new(
            self.theta_plus_a,
            self.theta_l_a,
            self.theta_plus_b,
            self.theta_l_b,
        )
    }

    /// Fails with the first parameter outside its box. δ_ν must satisfy |δ_ν| ≤ σ_ν.
    pub fn validate(&self, sigma: &[f64; 16]) -> Result<()> {
        let bounds = Bounds::new(sigma);
        let x = self.to_vec();
        for (i, &v) in x.iter().enumerate() {
            if !v.is_finite() || v < bounds.lo[i] || v > bounds.hi[i] {
                return Err(Error::BoundViolation {
                    name: param_name(i),
                    value: v,
                    lo: bounds.lo[i],
                    hi: bounds.hi[i],
                });
            }
        }
        Ok(())
    }

    pub(crate) fn channel_a(&self) -> ChannelErrors {
        ChannelErrors {
            plus_phase: self.theta_plus_a,
            l_phase: self.theta_l_a,
            intensity: self.p_a,
        }
    }

    pub(crate) fn channel_b(&self) -> ChannelErrors {
        ChannelErrors {
            plus_phase: self.theta_plus_b,
            l_phase: self.theta_l_b,
            intensity: self.p_b,
        }
    }
}

pub fn param_name(i: usize) -> String {
    if i < N_PHYSICAL {
        PHYSICAL_NAMES[i].to_string()
    } else {
        format!("delta[{}]", crate::tomography::LABELS[i - N_PHYSICAL])
    }
}

/// Box bounds for the full 26-vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn new(sigma: &[f64; 16]) -> Self {
        let mut lo = PHYSICAL_LO.to_vec();
        let mut hi = PHYSICAL_HI.to_vec();
        lo.extend(sigma.iter().map(|s| -s));
        hi.extend_from_slice(sigma);
        Self { lo, hi }
    }

    pub fn physical() -> Self {
        Self {
            lo: PHYSICAL_LO.to_vec(),
            hi: PHYSICAL_HI.to_vec(),
        }
    }
}

/// The four observable phase sums θ'_A + θ'_B.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NetPhaseReport {
    pub labels: [&'static str; 4],
    pub radians: [f64; 4],
    pub degrees: [f64; 4],
}

impl NetPhaseReport {
    pub const LABELS: [&'static str; 4] = ["++", "+L", "L+", "LL"];

    pub fn new(plus_a: f64, l_a: f64, plus_b: f64, l_b: f64) -> Self {
        let radians = [plus_a + plus_b, plus_a + l_b, l_a + plus_b, l_a + l_b];
        Self {
            labels: Self::LABELS,
            radians,
            degrees: radians.map(f64::to_degrees),
        }
    }

    /// (sum₁ + sum₄) − (sum₂ + sum₃); zero up to rounding for any channel phases.
    pub fn consistency(&self) -> f64 {
        (self.radians[0] + self.radians[3]) - (self.radians[1] + self.radians[2])
    }
}

/// |Φ'⟩ = √p|11⟩ + e^{iθ22}√(1−p)|22⟩
pub fn build_source_state(p: f64, theta_22: f64) -> Result<PureState2Q> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain {
            name: "p",
            value: p,
            lo: 0.0,
            hi: 1.0,
        });
    }
    PureState2Q::new([
        num_complex::Complex64::new(p.sqrt(), 0.0),
        ZERO,
        ZERO,
        num_complex::Complex64::from_polar((1.0 - p).sqrt(), theta_22),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SimConfig {
    pub geometry: Geometry,
    /// Use the wavepacket grid even at r_corr = 1.
    #[serde(default)]
    pub force_grid: bool,
}

impl SimConfig {
    /// Configuration used inside fits: the grid is always on so r_corr stays live.
    pub fn for_fitting(geometry: Geometry) -> Self {
        Self {
            geometry,
            force_grid: true,
        }
    }
}

/// Evaluates ρ_sim, caching wavepacket overlaps per r_corr.
#[derive(Debug)]
pub struct Simulator {
    cfg: SimConfig,
    cache: BasisCache,
}

impl Simulator {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.geometry.validate()?;
        Ok(Self {
            cfg,
            cache: BasisCache::default(),
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// Effective source state before any channel is applied.
    pub fn source_state(&mut self, r_corr: f64, p: f64, theta_22: f64) -> Result<DensityMatrix> {
        if r_corr == 1.0 && !self.cfg.force_grid {
            return Ok(DensityMatrix::from_pure(&build_source_state(p, theta_22)?));
        }
        let basis = self.cache.get(&self.cfg.geometry, r_corr)?;
        Ok(basis.effective_state(p, theta_22)?.1)
    }

    pub fn simulate(&mut self, params: &ErrorParams, sigma: &[f64; 16]) -> Result<DensityMatrix> {
        params.validate(sigma)?;
        self.simulate_unchecked(params)
    }

    /// Same pipeline without the bound check; the optimizer keeps its iterates in the box.
    pub(crate) fn simulate_unchecked(&mut self, params: &ErrorParams) -> Result<DensityMatrix> {
        let source = self.source_state(params.r_corr, params.p, params.theta_22)?;
        let mixed = depolarize(&source, params.eta)?;
        let bases = ProjectorSet::with_errors(&params.channel_a(), &params.channel_b())?;
        Ok(linear_qst(&measure_probs(&mixed, &bases, &params.delta)))
    }
}

/// One-shot convenience wrapper around [`Simulator`].
pub fn simulate_density(params: &ErrorParams, sigma: &[f64; 16], cfg: &SimConfig) -> Result<DensityMatrix> {
    Simulator::new(*cfg)?.simulate(params, sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use crate::quantum::{fidelity_pure, trace_distance};
    use std::f64::consts::FRAC_PI_4;

    const NO_SIGMA: [f64; 16] = [0.0; 16];

    pub(crate) fn table1_row1() -> ErrorParams {
        ErrorParams {
            r_corr: 2.2,
            theta_22: 0.001,
            p: 0.52,
            p_a: 0.47,
            p_b: 0.47,
            theta_plus_a: 0.0,
            theta_l_a: -0.25,
            theta_plus_b: 0.05,
            theta_l_b: -0.33,
            eta: 0.45,
            delta: [0.0; 16],
        }
    }

    #[test]
    fn source_state_examples() {
        let s = build_source_state(0.5, 0.0).unwrap();
        assert_eq!(s, PureState2Q::bell());
        let s = build_source_state(0.8, 0.0).unwrap();
        assert!((s.amplitudes()[0].re - 0.8f64.sqrt()).abs() < 1e-15);
        assert!((s.amplitudes()[3].re - 0.2f64.sqrt()).abs() < 1e-15);
        let rho = DensityMatrix::from_pure(&build_source_state(0.5, FRAC_PI_4).unwrap());
        assert!((rho.get(0, 3).arg() + FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn net_phase_report() {
        let r = table1_row1().net_phases();
        let expect = [0.05, -0.33, -0.20, -0.58];
        for k in 0..4 {
            assert!((r.radians[k] - expect[k]).abs() < 1e-15);
            assert!((r.degrees[k] - expect[k].to_degrees()).abs() < 1e-12);
        }
        assert!(r.consistency().abs() < 1e-15);
    }

    #[test]
    fn vector_round_trip_and_bounds() {
        let mut p = table1_row1();
        p.delta[3] = 0.01;
        let v = p.to_vec();
        assert_eq!(v.len(), N_PARAMS);
        assert_eq!(ErrorParams::from_vec(&v), p);
        let mut sigma = [0.0; 16];
        assert!(matches!(p.validate(&sigma), Err(Error::BoundViolation { .. })));
        sigma[3] = 0.02;
        p.validate(&sigma).unwrap();
        p.eta = 1.2;
        match p.validate(&sigma) {
            Err(Error::BoundViolation { name, .. }) => assert_eq!(name, "eta"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn params_json_is_flat() {
        let json = serde_json::to_value(table1_row1()).unwrap();
        for name in PHYSICAL_NAMES {
            assert!(json.get(name).is_some(), "{name}");
        }
        assert_eq!(json["delta"].as_array().unwrap().len(), 16);
        let back: ErrorParams = serde_json::from_value(json).unwrap();
        assert_eq!(back, table1_row1());
    }

    #[test]
    fn ideal_point_reproduces_bell_state() {
        let rho = simulate_density(&ErrorParams::ideal(), &NO_SIGMA, &SimConfig::default()).unwrap();
        assert!(trace_distance(&rho, &DensityMatrix::ideal()) <= 1e-12);
        let grid = SimConfig {
            force_grid: true,
            ..SimConfig::default()
        };
        let rho = simulate_density(&ErrorParams::ideal(), &NO_SIGMA, &grid).unwrap();
        assert!(trace_distance(&rho, &DensityMatrix::ideal()) <= 1e-3);
    }

    #[test]
    fn full_depolarization_gives_maximally_mixed() {
        let params = ErrorParams {
            eta: 1.0,
            ..ErrorParams::ideal()
        };
        let rho = simulate_density(&params, &NO_SIGMA, &SimConfig::default()).unwrap();
        assert!(rho.max_abs_diff(&DensityMatrix::maximally_mixed()) < 1e-9);
    }

    #[test]
    fn fast_path_agrees_with_grid() {
        for &(p, t) in &[(0.5, 0.0), (0.3, 0.7), (0.75, -1.2)] {
            let params = ErrorParams {
                p,
                theta_22: t,
                eta: 0.2,
                theta_plus_a: 0.3,
                ..ErrorParams::ideal()
            };
            let fast = simulate_density(&params, &NO_SIGMA, &SimConfig::default()).unwrap();
            let grid = simulate_density(&params, &NO_SIGMA, &SimConfig::for_fitting(Geometry::default())).unwrap();
            assert!(trace_distance(&fast, &grid) <= 1e-3);
        }
    }

    #[test]
    fn eta_is_affine() {
        let mut sim = Simulator::new(SimConfig::for_fitting(Geometry::default())).unwrap();
        let mut at = |eta: f64| {
            let p = ErrorParams { eta, ..table1_row1() };
            *sim.simulate(&p, &NO_SIGMA).unwrap().matrix()
        };
        let (a, b, c) = (at(0.1), at(0.3), at(0.5));
        let mid = linalg::scale(&linalg::add(&a, &c), 0.5);
        assert!(linalg::max_abs_diff(&mid, &b) < 1e-10);
    }

    #[test]
    fn only_phase_sums_matter() {
        let shift = |base: &ErrorParams, c: f64| ErrorParams {
            theta_plus_a: base.theta_plus_a + c,
            theta_l_a: base.theta_l_a + c,
            theta_plus_b: base.theta_plus_b - c,
            theta_l_b: base.theta_l_b - c,
            ..*base
        };
        let mut sim = Simulator::new(SimConfig::for_fitting(Geometry::default())).unwrap();
        let base = ErrorParams {
            r_corr: 1.0,
            ..table1_row1()
        };
        let rho = sim.simulate(&base, &NO_SIGMA).unwrap();
        let rho2 = sim.simulate(&shift(&base, 0.17), &NO_SIGMA).unwrap();
        assert!(rho.max_abs_diff(&rho2) < 1e-10, "{}", rho.max_abs_diff(&rho2));
    }

    #[test]
    fn leakage_coherence_breaks_phase_gauge() {
        // with r_corr > 1 the |12⟩⟨21| coherence sees θ'_A − θ'_B, so the shift is
        // only invisible up to that coherence
        let mut sim = Simulator::new(SimConfig::for_fitting(Geometry::default())).unwrap();
        let base = table1_row1();
        let leak = sim.source_state(base.r_corr, base.p, base.theta_22).unwrap().get(1, 2).norm();
        assert!(leak > 1e-6);
        let rho = sim.simulate(&base, &NO_SIGMA).unwrap();
        let c = 0.17;
        let shifted = ErrorParams {
            theta_plus_a: base.theta_plus_a + c,
            theta_l_a: base.theta_l_a + c,
            theta_plus_b: base.theta_plus_b - c,
            theta_l_b: base.theta_l_b - c,
            ..base
        };
        let diff = rho.max_abs_diff(&sim.simulate(&shifted, &NO_SIGMA).unwrap());
        assert!(diff > 1e-10 && diff < 4.0 * leak, "{diff} vs {leak}");
    }

    #[test]
    fn output_is_hermitian_with_unit_trace() {
        let rho = simulate_density(&table1_row1(), &NO_SIGMA, &SimConfig::default()).unwrap();
        assert!(linalg::hermitian_defect(rho.matrix()) < 1e-12);
        assert!((rho.trace() - 1.0).abs() < 1e-10);
        assert!(fidelity_pure(&PureState2Q::bell(), &rho) < 0.8);
    }

    #[test]
    fn out_of_bounds_rejected() {
        let params = ErrorParams {
            r_corr: 0.9,
            ..ErrorParams::ideal()
        };
        assert!(matches!(
            simulate_density(&params, &NO_SIGMA, &SimConfig::default()),
            Err(Error::BoundViolation { .. })
        ));
    }
}
