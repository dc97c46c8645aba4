//! Linear state tomography over the 16 product bases {1, 2, +, L}_A ⊗ {1, 2, +, L}_B.
//!
//! Index ν runs over the bases with qubit A major: |11⟩, |12⟩, |1+⟩, |1L⟩, |21⟩, …, |LL⟩.
//! The reconstruction matrices M_ν are always computed from the ideal bases;
//! feeding them probabilities measured with errored bases yields the distorted
//! reconstruction that the error model simulates.

use std::f64::consts::FRAC_PI_2;
use std::sync::OnceLock;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat4, RealMat16};
use crate::quantum::{pauli_basis, DensityMatrix, PureState2Q};

/// Basis labels in canonical ν order.
pub const LABELS: [&str; 16] = [
    "11", "12", "1+", "1L", "21", "22", "2+", "2L", "+1", "+2", "++", "+L", "L1", "L2", "L+", "LL",
];

/// ν indices of the four computational (time-bin) projectors |11⟩, |12⟩, |21⟩, |22⟩.
pub const TIME_BIN_INDICES: [usize; 4] = [0, 1, 4, 5];

const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisKind {
    TimeBin1,
    TimeBin2,
    Plus,
    L,
}

impl BasisKind {
    pub const ORDER: [BasisKind; 4] = [
        BasisKind::TimeBin1,
        BasisKind::TimeBin2,
        BasisKind::Plus,
        BasisKind::L,
    ];

    /// Intended interferometer phase before any error.
    fn nominal_phase(self) -> f64 {
        match self {
            BasisKind::L => -FRAC_PI_2,
            _ => 0.0,
        }
    }
}

/// One single-photon measurement setting. `phase_error` and `intensity` only
/// matter for the superposition kinds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisSpec {
    kind: BasisKind,
    phase_error: f64,
    intensity: f64,
}

impl BasisSpec {
    pub fn new(kind: BasisKind, phase_error: f64, intensity: f64) -> Result<Self> {
        if !phase_error.is_finite() {
            return Err(Error::Validation(format!("phase error {phase_error} is not finite")));
        }
        if !(intensity > 0.0 && intensity < 1.0) {
            return Err(Error::Validation(format!(
                "basis intensity {intensity} must lie strictly inside (0, 1)"
            )));
        }
        Ok(Self {
            kind,
            phase_error,
            intensity,
        })
    }

    pub fn ideal(kind: BasisKind) -> Self {
        Self {
            kind,
            phase_error: 0.0,
            intensity: 0.5,
        }
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    /// Single-photon ket: |1⟩, |2⟩, or √p|1⟩ + e^{−iθ}√(1−p)|2⟩ with θ = nominal + θ'.
    pub fn ket(&self) -> [C64; 2] {
        match self.kind {
            BasisKind::TimeBin1 => [linalg::ONE, linalg::ZERO],
            BasisKind::TimeBin2 => [linalg::ZERO, linalg::ONE],
            BasisKind::Plus | BasisKind::L => {
                let theta = self.kind.nominal_phase() + self.phase_error;
                [
                    C64::new(self.intensity.sqrt(), 0.0),
                    C64::from_polar((1.0 - self.intensity).sqrt(), -theta),
                ]
            }
        }
    }
}

pub fn build_projector(a: &BasisSpec, b: &BasisSpec) -> PureState2Q {
    // both factors are unit vectors, so the product is too
    PureState2Q::normalized(linalg::kron_vec(&a.ket(), &b.ket()))
        .expect("product of unit kets is nonzero")
}

/// Phase errors and intensity of one detection channel's interferometer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelErrors {
    pub plus_phase: f64,
    pub l_phase: f64,
    pub intensity: f64,
}

impl ChannelErrors {
    pub const IDEAL: ChannelErrors = ChannelErrors {
        plus_phase: 0.0,
        l_phase: 0.0,
        intensity: 0.5,
    };

    fn spec(&self, kind: BasisKind) -> Result<BasisSpec> {
        match kind {
            BasisKind::Plus => BasisSpec::new(kind, self.plus_phase, self.intensity),
            BasisKind::L => BasisSpec::new(kind, self.l_phase, self.intensity),
            _ => Ok(BasisSpec::ideal(kind)),
        }
    }
}

/// The 16 projection kets in canonical ν order.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorSet {
    kets: [PureState2Q; 16],
}

impl ProjectorSet {
    pub fn from_specs(specs: &[(BasisSpec, BasisSpec); 16]) -> Self {
        let kets = std::array::from_fn(|nu| build_projector(&specs[nu].0, &specs[nu].1));
        Self { kets }
    }

    pub fn ideal() -> Self {
        Self::from_specs(&std::array::from_fn(|nu| {
            (
                BasisSpec::ideal(BasisKind::ORDER[nu / 4]),
                BasisSpec::ideal(BasisKind::ORDER[nu % 4]),
            )
        }))
    }

    pub fn with_errors(a: &ChannelErrors, b: &ChannelErrors) -> Result<Self> {
        let mut specs = [(BasisSpec::ideal(BasisKind::TimeBin1), BasisSpec::ideal(BasisKind::TimeBin1)); 16];
        for (nu, slot) in specs.iter_mut().enumerate() {
            *slot = (
                a.spec(BasisKind::ORDER[nu / 4])?,
                b.spec(BasisKind::ORDER[nu % 4])?,
            );
        }
        Ok(Self::from_specs(&specs))
    }

    /// Builds a set from arbitrary kets; used to probe degenerate orderings.
    pub fn from_kets(kets: [PureState2Q; 16]) -> Self {
        Self { kets }
    }

    pub fn kets(&self) -> &[PureState2Q; 16] {
        &self.kets
    }
}

/// B_{νμ} = ⟨ψ_ν|Γ_μ|ψ_ν⟩. Fails when the basis set is not informationally complete.
pub fn b_matrix(projectors: &ProjectorSet) -> Result<RealMat16> {
    let gamma = pauli_basis();
    let mut b = [[0.0; 16]; 16];
    for (nu, ket) in projectors.kets().iter().enumerate() {
        for (mu, g) in gamma.iter().enumerate() {
            let v = linalg::expectation(g, ket.amplitudes());
            if v.im.abs() > 1e-12 {
                return Err(Error::Validation(format!(
                    "B[{nu}][{mu}] has imaginary residue {:e}",
                    v.im
                )));
            }
            b[nu][mu] = v.re;
        }
    }
    linalg::invert16(&b, MAX_CONDITION)?;
    Ok(b)
}

/// M_ν = Σ_μ Γ_μ (B⁻¹)_{μν}
#[derive(Debug, Clone)]
pub struct ReconstructionMatrices {
    m: [Mat4; 16],
}

impl ReconstructionMatrices {
    pub fn from_projectors(projectors: &ProjectorSet) -> Result<Self> {
        let b = b_matrix(projectors)?;
        let b_inv = linalg::invert16(&b, MAX_CONDITION)?;
        let gamma = pauli_basis();
        let m = std::array::from_fn(|nu| {
            let mut acc = linalg::zeros();
            for (mu, g) in gamma.iter().enumerate() {
                acc = linalg::add(&acc, &linalg::scale(g, b_inv[mu][nu]));
            }
            acc
        });
        Ok(Self { m })
    }

    pub fn matrices(&self) -> &[Mat4; 16] {
        &self.m
    }

    /// ρ = Σ_ν M_ν s_ν
    pub fn invert(&self, s: &[f64; 16]) -> DensityMatrix {
        let mut acc = linalg::zeros();
        for (m, &sv) in self.m.iter().zip(s) {
            for i in 0..4 {
                for j in 0..4 {
                    acc[i][j] += m[i][j] * sv;
                }
            }
        }
        DensityMatrix::from_hermitian_unchecked(acc)
    }
}

/// Reconstruction matrices for the ideal bases, computed once.
pub fn reconstruction_matrices() -> &'static ReconstructionMatrices {
    static CACHE: OnceLock<ReconstructionMatrices> = OnceLock::new();
    CACHE.get_or_init(|| {
        ReconstructionMatrices::from_projectors(&ProjectorSet::ideal())
            .expect("ideal tomography bases are informationally complete")
    })
}

/// Measurement probabilities with their statistical widths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbVector {
    pub s: [f64; 16],
    pub sigma: [f64; 16],
}

impl ProbVector {
    pub fn exact(s: [f64; 16]) -> Self {
        Self { s, sigma: [0.0; 16] }
    }
}

/// Raw coincidence counts with the detector context they were taken under.
#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceRecord {
    pub counts: [u64; 16],
    pub alpha_a: f64,
    pub alpha_b: f64,
    pub dark_a: f64,
    pub dark_b: f64,
    pub rep_rate: f64,
    pub dead_time: f64,
}

impl CoincidenceRecord {
    pub fn validate(&self) -> Result<()> {
        for (name, a) in [("alpha_a", self.alpha_a), ("alpha_b", self.alpha_b)] {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::Validation(format!("{name} = {a} must lie in (0, 1]")));
            }
        }
        for (name, d) in [("dark_a", self.dark_a), ("dark_b", self.dark_b)] {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::Validation(format!("{name} = {d} must be non-negative")));
            }
        }
        Ok(())
    }

    /// C = n(11) + n(12) + n(21) + n(22)
    pub fn time_bin_total(&self) -> u64 {
        TIME_BIN_INDICES.iter().map(|&i| self.counts[i]).sum()
    }
}

pub fn linear_qst(probs: &ProbVector) -> DensityMatrix {
    reconstruction_matrices().invert(&probs.s)
}

/// s_ν = n_ν / C and σ_ν = √n_ν / C with C the time-bin total.
pub fn normalize_counts(rec: &CoincidenceRecord) -> Result<ProbVector> {
    let c = rec.time_bin_total();
    if c == 0 {
        return Err(Error::EmptyData(
            "the four time-bin-basis counts are all zero".into(),
        ));
    }
    let c = c as f64;
    Ok(ProbVector {
        s: rec.counts.map(|n| n as f64 / c),
        sigma: rec.counts.map(|n| (n as f64).sqrt() / c),
    })
}

/// s'_ν = ⟨ψ'_ν|ρ|ψ'_ν⟩ + δ_ν, no clipping.
pub fn measure_probs(rho: &DensityMatrix, bases: &ProjectorSet, delta: &[f64; 16]) -> ProbVector {
    let s = std::array::from_fn(|nu| {
        linalg::expectation(rho.matrix(), bases.kets()[nu].amplitudes()).re + delta[nu]
    });
    ProbVector::exact(s)
}

pub fn label_index(label: &str) -> Option<usize> {
    LABELS.iter().position(|l| *l == label)
}
