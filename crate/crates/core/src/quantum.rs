//! Two-qubit state algebra: density matrices, pure states, the normalized
//! Pauli basis, trace distance, fidelity, depolarization and eigen-diagnostics.
//!
//! Qubit A is the first tensor factor. Computational index `2a + b` maps
//! |11⟩, |12⟩, |21⟩, |22⟩ to 0..4 (time bin 1 ↔ index 0).

use std::sync::OnceLock;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat4, Vec4, ONE, ZERO};

/// Asymmetry below this is symmetrized away; above it the matrix is rejected.
pub const HERMITIAN_REPAIR_TOL: f64 = 1e-9;

/// A 4×4 Hermitian matrix representing a (possibly non-positive) two-qubit state.
///
/// Positivity is not required: linear inversion routinely yields small negative
/// eigenvalues. Trace is not enforced either, so differences of states and
/// unnormalized reconstructions share the type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix {
    elements: Mat4,
}

impl DensityMatrix {
    /// Validates Hermiticity, symmetrizing residual floating-point asymmetry.
    pub fn from_matrix(m: Mat4) -> Result<Self> {
        if m.iter().flatten().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::Validation("matrix has non-finite entries".into()));
        }
        let defect = linalg::hermitian_defect(&m);
        if defect > HERMITIAN_REPAIR_TOL {
            return Err(Error::Validation(format!(
                "matrix is not Hermitian (max asymmetry {defect:e})"
            )));
        }
        Ok(Self {
            elements: linalg::hermitian_part(&m),
        })
    }

    /// Wraps a matrix already known to be Hermitian, taking its Hermitian part.
    pub(crate) fn from_hermitian_unchecked(m: Mat4) -> Self {
        Self {
            elements: linalg::hermitian_part(&m),
        }
    }

    pub fn from_pure(psi: &PureState2Q) -> Self {
        Self {
            elements: linalg::outer(&psi.amplitudes, &psi.amplitudes),
        }
    }

    /// |Φ⟩⟨Φ| with |Φ⟩ = (|11⟩ + |22⟩)/√2.
    pub fn ideal() -> Self {
        Self::from_pure(&PureState2Q::bell())
    }

    /// I/4
    pub fn maximally_mixed() -> Self {
        Self {
            elements: linalg::scale(&linalg::identity(), 0.25),
        }
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.elements
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.elements[row][col]
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.elements).re
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        linalg::max_abs_diff(&self.elements, &other.elements)
    }

    pub fn sub(&self, other: &DensityMatrix) -> DensityMatrix {
        Self::from_hermitian_unchecked(linalg::sub(&self.elements, &other.elements))
    }

    pub fn add(&self, other: &DensityMatrix) -> DensityMatrix {
        Self::from_hermitian_unchecked(linalg::add(&self.elements, &other.elements))
    }

    pub fn scaled(&self, s: f64) -> DensityMatrix {
        Self::from_hermitian_unchecked(linalg::scale(&self.elements, s))
    }

    /// ρ / Tr ρ
    pub fn normalized(&self) -> Result<DensityMatrix> {
        let t = self.trace();
        if t.abs() < 1e-300 {
            return Err(Error::Validation("cannot normalize a traceless matrix".into()));
        }
        Ok(self.scaled(1.0 / t))
    }

    /// Trace norm Tr|ρ| (sum of absolute eigenvalues).
    pub fn trace_norm(&self) -> f64 {
        let (vals, _) = linalg::hermitian_eigen(&self.elements);
        vals.iter().map(|v| v.abs()).sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let (vals, _) = linalg::hermitian_eigen(&self.elements);
        vals.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Serialize, Deserialize)]
struct DensityMatrixJson {
    rho: [[[f64; 2]; 4]; 4],
}

impl Serialize for DensityMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut rho = [[[0.0; 2]; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                rho[i][j] = [self.elements[i][j].re, self.elements[i][j].im];
            }
        }
        DensityMatrixJson { rho }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = DensityMatrixJson::deserialize(deserializer)?;
        let mut m = linalg::zeros();
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = C64::new(raw.rho[i][j][0], raw.rho[i][j][1]);
            }
        }
        DensityMatrix::from_matrix(m).map_err(serde::de::Error::custom)
    }
}

/// Normalized two-qubit ket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureState2Q {
    amplitudes: Vec4,
}

impl PureState2Q {
    /// Accepts amplitudes whose Euclidean norm is 1 within 1e−12.
    pub fn new(amplitudes: Vec4) -> Result<Self> {
        let norm = norm(&amplitudes);
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("ket norm {norm} is not 1")));
        }
        Ok(Self { amplitudes })
    }

    /// Rescales arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(amplitudes: Vec4) -> Result<Self> {
        let n = norm(&amplitudes);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Validation("cannot normalize a zero ket".into()));
        }
        Ok(Self {
            amplitudes: amplitudes.map(|a| a / n),
        })
    }

    pub fn bell() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            amplitudes: [C64::new(h, 0.0), ZERO, ZERO, C64::new(h, 0.0)],
        }
    }

    pub fn amplitudes(&self) -> &Vec4 {
        &self.amplitudes
    }
}

fn norm(v: &Vec4) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

fn pauli(i: usize) -> [[C64; 2]; 2] {
    let i_ = C64::new(0.0, 1.0);
    match i {
        0 => [[ONE, ZERO], [ZERO, ONE]],
        1 => [[ZERO, ONE], [ONE, ZERO]],
        2 => [[ZERO, -i_], [i_, ZERO]],
        _ => [[ONE, ZERO], [ZERO, -ONE]],
    }
}

/// The 16 matrices (σ_a ⊗ σ_b)/2 with σ ∈ {I, σx, σy, σz}, index `4a + b`.
/// They are Hermitian and orthonormal under Tr(Γ_μ Γ_ν).
pub fn pauli_basis() -> &'static [Mat4; 16] {
    static BASIS: OnceLock<[Mat4; 16]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut out = [linalg::zeros(); 16];
        for a in 0..4 {
            for b in 0..4 {
                out[4 * a + b] = linalg::scale(&linalg::kron2(&pauli(a), &pauli(b)), 0.5);
            }
        }
        out
    })
}

/// D(ρ, σ) = ½ Σ|λ_i(ρ − σ)|
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> f64 {
    0.5 * rho.sub(sigma).trace_norm()
}

/// Trace distance between raw matrices, rejecting non-Hermitian input.
pub fn trace_distance_checked(rho: &Mat4, sigma: &Mat4) -> Result<f64> {
    let a = DensityMatrix::from_matrix(*rho)?;
    let b = DensityMatrix::from_matrix(*sigma)?;
    Ok(trace_distance(&a, &b))
}

/// F = ⟨φ|ρ|φ⟩. Exceeds 1 when ρ has negative eigenvalues.
pub fn fidelity_pure(phi: &PureState2Q, rho: &DensityMatrix) -> f64 {
    linalg::expectation(rho.matrix(), phi.amplitudes()).re
}

/// (1 − η)ρ + η·I/4
pub fn depolarize(rho: &DensityMatrix, eta: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Domain {
            name: "eta",
            value: eta,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let mut m = linalg::scale(rho.matrix(), 1.0 - eta);
    let t = rho.trace();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] += eta * t / 4.0;
    }
    Ok(DensityMatrix::from_hermitian_unchecked(m))
}

/// Spectral decomposition with eigenvalues in descending order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenReport {
    pub eigenvalues: [f64; 4],
    /// `eigenvectors[k]` pairs with `eigenvalues[k]`.
    #[serde(serialize_with = "serialize_vectors")]
    pub eigenvectors: [Vec4; 4],
}

fn serialize_vectors<S: Serializer>(
    v: &[Vec4; 4],
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    let pairs: Vec<Vec<[f64; 2]>> = v
        .iter()
        .map(|vec| vec.iter().map(|c| [c.re, c.im]).collect())
        .collect();
    pairs.serialize(serializer)
}

pub fn eigendecompose(rho: &DensityMatrix) -> EigenReport {
    let (vals, vecs) = linalg::hermitian_eigen(rho.matrix());
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let mut eigenvalues = [0.0; 4];
    let mut eigenvectors = [[ZERO; 4]; 4];
    for (slot, &k) in order.iter().enumerate() {
        eigenvalues[slot] = vals[k];
        let col: Vec4 = [vecs[0][k], vecs[1][k], vecs[2][k], vecs[3][k]];
        eigenvectors[slot] = fix_phase(col);
    }
    EigenReport {
        eigenvalues,
        eigenvectors,
    }
}

/// Rotates the global phase so the largest-magnitude component (first one on
/// near-ties) is real and positive.
fn fix_phase(v: Vec4) -> Vec4 {
    let max = v.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return v;
    }
    let pivot = v
        .iter()
        .position(|c| c.norm() >= max - 1e-10)
        .unwrap_or(0);
    let phase = v[pivot].conj() / v[pivot].norm();
    let mut out = v.map(|c| c * phase);
    out[pivot] = C64::new(out[pivot].re, 0.0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_basis_element_is_half_identity() {
        let g = pauli_basis();
        assert_eq!(g[0], linalg::scale(&linalg::identity(), 0.5));
    }

    #[test]
    fn basis_is_orthonormal_bruteforce() {
        let g = pauli_basis();
        for mu in 0..16 {
            for nu in 0..16 {
                let t = linalg::trace(&linalg::matmul(&g[mu], &g[nu]));
                let expected = if mu == nu { 1.0 } else { 0.0 };
                assert!((t.re - expected).abs() < 1e-15 && t.im.abs() < 1e-15);
            }
            assert!(linalg::hermitian_defect(&g[mu]) == 0.0);
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = linalg::zeros();
        m[0][1] = C64::new(0.1, 0.0);
        assert!(DensityMatrix::from_matrix(m).is_err());
        assert!(trace_distance_checked(&m, &linalg::identity()).is_err());
        // sub-threshold asymmetry is repaired
        m[1][0] = C64::new(0.1 + 1e-11, 0.0);
        let d = DensityMatrix::from_matrix(m).unwrap();
        assert_eq!(linalg::hermitian_defect(d.matrix()), 0.0);
    }

    #[test]
    fn trace_distance_ideal_vs_mixed() {
        // oracle: eigenvalues of ρ_ideal − I/4 are {3/4, −1/4, −1/4, −1/4}
        let diff = DensityMatrix::ideal().sub(&DensityMatrix::maximally_mixed());
        let mut vals = eigendecompose(&diff).eigenvalues;
        vals.sort_by(f64::total_cmp);
        let expected = [-0.25, -0.25, -0.25, 0.75];
        for (v, e) in vals.iter().zip(expected) {
            assert!((v - e).abs() < 1e-14);
        }
        let d = trace_distance(&DensityMatrix::ideal(), &DensityMatrix::maximally_mixed());
        assert!((d - 0.75).abs() < 1e-14);
        assert_eq!(trace_distance(&DensityMatrix::ideal(), &DensityMatrix::ideal()), 0.0);
    }

    #[test]
    fn depolarized_distance_and_fidelity() {
        let ideal = DensityMatrix::ideal();
        let d = trace_distance(&ideal, &depolarize(&ideal, 0.2).unwrap());
        assert!((d - 0.15).abs() < 1e-14);
        let f = fidelity_pure(&PureState2Q::bell(), &depolarize(&ideal, 0.075).unwrap());
        assert!((f - 0.94375).abs() < 1e-14);
        assert!((fidelity_pure(&PureState2Q::bell(), &ideal) - 1.0).abs() < 1e-15);
        let mixed = DensityMatrix::maximally_mixed();
        assert!((fidelity_pure(&PureState2Q::bell(), &mixed) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn depolarize_elementwise_and_limits() {
        let ideal = DensityMatrix::ideal();
        let e = depolarize(&ideal, 0.45).unwrap();
        assert!((e.get(0, 0).re - 0.3875).abs() < 1e-15);
        assert!((e.get(3, 3).re - 0.3875).abs() < 1e-15);
        assert!((e.get(0, 3).re - 0.275).abs() < 1e-15);
        assert!((e.get(3, 0).re - 0.275).abs() < 1e-15);
        assert_eq!(depolarize(&ideal, 0.0).unwrap(), ideal);
        assert!(depolarize(&ideal, 1.0).unwrap().max_abs_diff(&DensityMatrix::maximally_mixed()) < 1e-16);
        assert!(matches!(depolarize(&ideal, 1.2), Err(Error::Domain { .. })));
        assert!(depolarize(&ideal, -0.1).is_err());
    }

    #[test]
    fn eigendecompose_ideal_and_mixed() {
        let r = eigendecompose(&DensityMatrix::ideal());
        assert!((r.eigenvalues[0] - 1.0).abs() < 1e-14);
        for v in &r.eigenvalues[1..] {
            assert!(v.abs() < 1e-14);
        }
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let top = r.eigenvectors[0];
        assert!((top[0] - C64::new(h, 0.0)).norm() < 1e-12);
        assert!((top[3] - C64::new(h, 0.0)).norm() < 1e-12);

        let r = eigendecompose(&DensityMatrix::maximally_mixed());
        assert!(r.eigenvalues.iter().all(|v| (v - 0.25).abs() < 1e-15));
    }

    /// Characteristic polynomial coefficients by Faddeev–LeVerrier, independent of Jacobi.
    fn char_poly(a: &Mat4) -> [f64; 5] {
        let mut c = [0.0; 5];
        c[0] = 1.0;
        let mut m = linalg::zeros();
        for k in 1..=4 {
            let mut next = linalg::matmul(a, &m);
            for i in 0..4 {
                next[i][i] += c[k - 1];
            }
            m = next;
            c[k] = -linalg::trace(&linalg::matmul(a, &m)).re / k as f64;
        }
        c
    }

    #[test]
    fn negative_eigenvalue_reported_unclipped() {
        // ρ_ideal − 0.05(|12⟩⟨12| − |21⟩⟨21|): Hermitian, trace 1, eigenvalues {1, 0.05, 0, −0.05}
        let mut m = *DensityMatrix::ideal().matrix();
        m[1][1] -= 0.05;
        m[2][2] += 0.05;
        let rho = DensityMatrix::from_matrix(m).unwrap();
        let r = eigendecompose(&rho);
        assert!((r.eigenvalues[3] + 0.05).abs() < 1e-14);
        assert!((r.eigenvalues.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        // independent oracle: coefficients of Π(λ − λ_i) match Faddeev–LeVerrier
        let cp = char_poly(&m);
        let l = r.eigenvalues;
        let e1: f64 = l.iter().sum();
        let e2: f64 = (0..4).flat_map(|i| ((i + 1)..4).map(move |j| l[i] * l[j])).sum();
        let e3 = l[0] * l[1] * l[2] + l[0] * l[1] * l[3] + l[0] * l[2] * l[3] + l[1] * l[2] * l[3];
        let e4: f64 = l.iter().product();
        assert!((cp[1] + e1).abs() < 1e-12);
        assert!((cp[2] - e2).abs() < 1e-12);
        assert!((cp[3] + e3).abs() < 1e-12);
        assert!((cp[4] - e4).abs() < 1e-12);
    }

    #[test]
    fn density_json_round_trip() {
        let rho = depolarize(&DensityMatrix::ideal(), 0.3).unwrap();
        let s = serde_json::to_string(&rho).unwrap();
        assert!(s.starts_with("{\"rho\":[[["));
        let back: DensityMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, rho);
    }
}
