//! Maximum-likelihood projection onto physical states through the
//! parametrization ρ = T†T / Tr(T†T) with T lower triangular.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat4};
use crate::optimize::{powell_minimize, PowellOptions};
use crate::quantum::{eigendecompose, DensityMatrix};
use crate::tomography::{linear_qst, normalize_counts, CoincidenceRecord, ProbVector, ProjectorSet};

pub const PROB_FLOOR: f64 = 1e-12;
const EIGEN_CLIP: f64 = 1e-6;
const T_BOX: f64 = 10.0;

/// The sixteen real parameters of T.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MleParams {
    pub t: [f64; 16],
}

/// Slots of T holding (re, im) parameter indices, zero-based; diagonal entries are real.
const OFF_DIAGONAL: [((usize, usize), (usize, usize)); 6] = [
    ((1, 0), (4, 5)),
    ((2, 1), (6, 7)),
    ((3, 2), (8, 9)),
    ((2, 0), (10, 11)),
    ((3, 1), (12, 13)),
    ((3, 0), (14, 15)),
];

impl MleParams {
    pub fn to_t_matrix(&self) -> Mat4 {
        let t = &self.t;
        let mut m = linalg::zeros();
        for i in 0..4 {
            m[i][i] = C64::new(t[i], 0.0);
        }
        for &((r, c), (re, im)) in &OFF_DIAGONAL {
            m[r][c] = C64::new(t[re], t[im]);
        }
        m
    }

    pub fn from_t_matrix(m: &Mat4) -> Self {
        let mut t = [0.0; 16];
        for i in 0..4 {
            t[i] = m[i][i].re;
        }
        for &((r, c), (re, im)) in &OFF_DIAGONAL {
            t[re] = m[r][c].re;
            t[im] = m[r][c].im;
        }
        Self { t }
    }
}

fn t_dagger_t(t: &[f64; 16]) -> Mat4 {
    let m = MleParams { t: *t }.to_t_matrix();
    linalg::matmul(&linalg::adjoint(&m), &m)
}

/// ρ = T†T / Tr(T†T); positive semidefinite with unit trace by construction.
pub fn t_to_rho(params: &MleParams) -> Result<DensityMatrix> {
    let m = t_dagger_t(&params.t);
    let tr = linalg::trace(&m).re;
    if !(tr > 0.0) || !tr.is_finite() {
        return Err(Error::Validation(
            "degenerate parametrization: Tr(T†T) is zero".into(),
        ));
    }
    Ok(DensityMatrix::from_hermitian_unchecked(linalg::scale(&m, 1.0 / tr)))
}

/// Lower-triangular T with T†T = ρ for a positive-definite ρ.
///
/// Cholesky of the index-reversed matrix JρJ = LL† gives ρ = (JLJ)(JLJ)†, so
/// T = (JLJ)† = JL†J.
fn t_from_rho(rho: &Mat4) -> Result<MleParams> {
    let rev = |i: usize| 3 - i;
    let mut a = linalg::zeros();
    for i in 0..4 {
        for j in 0..4 {
            a[i][j] = rho[rev(i)][rev(j)];
        }
    }
    let mut l = linalg::zeros();
    for j in 0..4 {
        let mut d = a[j][j].re;
        for k in 0..j {
            d -= l[j][k].norm_sqr();
        }
        if !(d > 0.0) {
            return Err(Error::Estimation("Cholesky factorization failed: matrix is not positive definite".into()));
        }
        let djj = d.sqrt();
        l[j][j] = C64::new(djj, 0.0);
        for i in (j + 1)..4 {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k].conj();
            }
            l[i][j] = s / djj;
        }
    }
    let mut t = linalg::zeros();
    for i in 0..4 {
        for j in 0..4 {
            // T[i][j] = conj(L[rev j][rev i])
            t[i][j] = l[rev(j)][rev(i)].conj();
        }
    }
    Ok(MleParams::from_t_matrix(&t))
}

/// Eigenvalues below 1e−6 are raised to 1e−6, the result renormalized and factorized.
pub fn initial_guess(rho: &DensityMatrix) -> Result<MleParams> {
    let eig = eigendecompose(rho);
    let clipped = eig.eigenvalues.map(|v| v.max(EIGEN_CLIP));
    let total: f64 = clipped.iter().sum();
    let mut m = linalg::zeros();
    for k in 0..4 {
        m = linalg::add(&m, &linalg::scale(&linalg::outer(&eig.eigenvectors[k], &eig.eigenvectors[k]), clipped[k] / total));
    }
    t_from_rho(&linalg::hermitian_part(&m))
}

fn model_probs(t: &[f64; 16]) -> Result<[f64; 16]> {
    let rho = t_to_rho(&MleParams { t: *t })?;
    let kets = ideal_kets();
    Ok(std::array::from_fn(|nu| {
        linalg::expectation(rho.matrix(), kets.kets()[nu].amplitudes())
            .re
            .max(PROB_FLOOR)
    }))
}

fn ideal_kets() -> &'static ProjectorSet {
    static KETS: std::sync::OnceLock<ProjectorSet> = std::sync::OnceLock::new();
    KETS.get_or_init(ProjectorSet::ideal)
}

/// Σ_ν [𝒩 p_ν(t) − n_ν]² / (2𝒩 p_ν(t))
pub fn likelihood_counts(params: &MleParams, counts: &[u64; 16], cal_n: f64) -> Result<f64> {
    if !(cal_n > 0.0) {
        return Err(Error::Validation(format!("normalization 𝒩 = {cal_n} must be positive")));
    }
    let p = model_probs(&params.t)?;
    Ok((0..16)
        .map(|nu| {
            let expect = cal_n * p[nu];
            (expect - counts[nu] as f64).powi(2) / (2.0 * expect)
        })
        .sum())
}

/// Σ_ν [p_ν(t) − s_ν]² / (2 p_ν(t))
pub fn likelihood_probs(params: &MleParams, s: &[f64; 16]) -> Result<f64> {
    let p = model_probs(&params.t)?;
    Ok((0..16).map(|nu| (p[nu] - s[nu]).powi(2) / (2.0 * p[nu])).sum())
}

pub enum MleInput<'a> {
    Counts(&'a CoincidenceRecord),
    Probs(&'a ProbVector),
}

#[derive(Debug, Clone, Serialize)]
pub struct MleResult {
    pub rho: DensityMatrix,
    pub t: MleParams,
    pub initial_likelihood: f64,
    pub final_likelihood: f64,
    /// 𝒩 used for count data (the time-bin total C); absent for probabilities.
    pub normalization: Option<f64>,
    pub n_evals: usize,
    pub converged: bool,
}

/// Fits T by Powell inside the box ±10 from the eigen-clipped linear estimate.
pub fn mle_fit(input: MleInput<'_>) -> Result<MleResult> {
    let (s, counts, cal_n) = match input {
        MleInput::Counts(rec) => {
            rec.validate()?;
            let probs = normalize_counts(rec)?;
            (probs.s, Some(rec.counts), Some(rec.time_bin_total() as f64))
        }
        MleInput::Probs(p) => {
            if p.s.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation("probabilities must be finite".into()));
            }
            (p.s, None, None)
        }
    };
    let linear = linear_qst(&ProbVector::exact(s));
    let start = initial_guess(&linear)?;
    let x0: Vec<f64> = start.t.iter().map(|v| v.clamp(-T_BOX, T_BOX)).collect();

    let objective = |x: &[f64]| -> Result<f64> {
        let params = MleParams {
            t: x.try_into().expect("sixteen parameters"),
        };
        match (counts, cal_n) {
            (Some(c), Some(n)) => likelihood_counts(&params, &c, n),
            _ => likelihood_probs(&params, &s),
        }
    };
    let opts = PowellOptions {
        ftol: 1e-12,
        xtol: 1e-10,
        max_iter: 400,
    };
    let lo = vec![-T_BOX; 16];
    let hi = vec![T_BOX; 16];
    let mut f = objective;
    let initial_likelihood = f(&x0)?;
    let mut best = powell_minimize(&mut f, &x0, &lo, &hi, &opts, None)?;
    for _ in 0..2 {
        let again = powell_minimize(&mut f, &best.x, &lo, &hi, &opts, None)?;
        let done = best.fun - again.fun <= opts.ftol * best.fun.abs() + 1e-300;
        best.n_evals += again.n_evals;
        best.converged = again.converged;
        best.x = again.x;
        best.fun = again.fun;
        if done {
            break;
        }
    }
    let t = MleParams {
        t: best.x.as_slice().try_into().expect("sixteen parameters"),
    };
    Ok(MleResult {
        rho: t_to_rho(&t)?,
        t,
        initial_likelihood,
        final_likelihood: best.fun,
        normalization: cal_n,
        n_evals: best.n_evals,
        converged: best.converged,
    })
}

/// MLE projection of an arbitrary Hermitian matrix via its ideal-basis probabilities.
pub fn project_matrix(rho: &DensityMatrix) -> Result<MleResult> {
    let kets = ideal_kets();
    let s = std::array::from_fn(|nu| linalg::expectation(rho.matrix(), kets.kets()[nu].amplitudes()).re);
    mle_fit(MleInput::Probs(&ProbVector::exact(s)))
}
