//! Two-photon wavepacket model for the effective time-bin state.
//!
//! A tilted anisotropic Gaussian joint spectrum is placed on a discrete k-grid,
//! symmetrized under photon exchange, transformed to real space, and cut into
//! four quadrants, one per time-bin pair. Overlaps between the quadrant
//! amplitudes give the Gram matrix whose normalized form is the effective
//! two-qubit density matrix. Broadening the long axis (`r_corr > 1`) pushes
//! amplitude across quadrant seams.
//!
//! Grid index `n` maps to position `x_n = n·L/N`; index `i` along the first
//! axis belongs to photon A. k-space grids are stored in FFT order.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat4, ZERO};
use crate::quantum::DensityMatrix;

/// Quadrant order of the components and of Gram matrix rows: 11, 12, 21, 22.
pub const QUADRANTS: [(usize, usize); 4] = [(1, 1), (1, 2), (2, 1), (2, 2)];

/// Simulation-space geometry shared by every evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Geometry {
    pub n_grid: usize,
    pub length: f64,
    pub kbar_a: f64,
    pub kbar_b: f64,
    pub xbar_1: f64,
    pub xbar_2: f64,
    pub sigma_short: f64,
    pub tilt: f64,
}

impl Default for Geometry {
    /// N = 128, L = 5π, k̄_A = 10, k̄_B = (1547.1/1555.1)·k̄_A, x̄_1 = 3L/4,
    /// x̄_2 = L/4, σ_short = 0.1·|x̄_1 − x̄_2|, θ = −π/4.
    fn default() -> Self {
        let length = 5.0 * PI;
        let xbar_1 = 0.75 * length;
        let xbar_2 = 0.25 * length;
        Self {
            n_grid: 128,
            length,
            kbar_a: 10.0,
            kbar_b: 10.0 * 1547.1 / 1555.1,
            xbar_1,
            xbar_2,
            sigma_short: (50.0 / 500.0) * (xbar_1 - xbar_2).abs(),
            tilt: -PI / 4.0,
        }
    }
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        let n = self.n_grid;
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::Config(format!("grid size {n} must be a power of two ≥ 4")));
        }
        if !(self.length > 0.0) || !self.length.is_finite() {
            return Err(Error::Config(format!("system length {} must be positive", self.length)));
        }
        if !(self.sigma_short > 0.0) {
            return Err(Error::Config("sigma_short must be positive".into()));
        }
        for v in [self.kbar_a, self.kbar_b, self.xbar_1, self.xbar_2, self.tilt] {
            if !v.is_finite() {
                return Err(Error::Config("geometry contains non-finite values".into()));
            }
        }
        Ok(())
    }

    /// Wavenumber of FFT-ordered index `i`.
    fn k(&self, i: usize) -> f64 {
        let n = self.n_grid as isize;
        let m = if (i as isize) < n / 2 { i as isize } else { i as isize - n };
        2.0 * PI * m as f64 / self.length
    }

    fn xbar(&self, bin: usize) -> f64 {
        if bin == 1 {
            self.xbar_1
        } else {
            self.xbar_2
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WavepacketConfig {
    pub geometry: Geometry,
    pub sigma_long: f64,
    /// α_ij indexed `[i-1][j-1]`.
    pub alpha: [[C64; 2]; 2],
}

impl WavepacketConfig {
    /// α_11 = √p, α_22 = e^{iθ22}√(1−p), σ_long = r_corr·σ_short.
    pub fn for_model(geometry: Geometry, r_corr: f64, p: f64, theta_22: f64) -> Self {
        Self {
            geometry,
            sigma_long: r_corr * geometry.sigma_short,
            alpha: source_alpha(p, theta_22),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if !(self.sigma_long >= self.geometry.sigma_short) || !self.sigma_long.is_finite() {
            return Err(Error::Config(format!(
                "sigma_long {} must be at least sigma_short {}",
                self.sigma_long, self.geometry.sigma_short
            )));
        }
        let norm: f64 = self.alpha.iter().flatten().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("time-bin coefficients have total weight {norm}")));
        }
        Ok(())
    }
}

fn source_alpha(p: f64, theta_22: f64) -> [[C64; 2]; 2] {
    [
        [C64::new(p.sqrt(), 0.0), ZERO],
        [ZERO, C64::from_polar((1.0 - p).sqrt(), theta_22)],
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    K,
    Real,
}

/// N×N complex amplitudes, row-major with the first index belonging to photon A.
#[derive(Debug, Clone, PartialEq)]
pub struct WavepacketGrid {
    pub n: usize,
    pub space: Space,
    pub amplitudes: Vec<C64>,
}

impl WavepacketGrid {
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.amplitudes[i * self.n + j]
    }

    fn normalized(mut self) -> Self {
        let norm = self.norm_sqr().sqrt();
        if norm > 0.0 {
            for a in &mut self.amplitudes {
                *a /= norm;
            }
        }
        self
    }

    /// Magnitude table for plotting; k-space is shifted so k = 0 sits at the centre.
    pub fn dump(&self) -> GridDump {
        let n = self.n;
        let shift = if self.space == Space::K { n / 2 } else { 0 };
        let magnitude = (0..n)
            .map(|r| {
                (0..n)
                    .map(|c| self.at((r + shift) % n, (c + shift) % n).norm())
                    .collect()
            })
            .collect();
        GridDump {
            space: self.space,
            n,
            magnitude,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridDump {
    pub space: Space,
    pub n: usize,
    pub magnitude: Vec<Vec<f64>>,
}

/// Unnormalized f(k, k')·exp[−i(k x̄_i + k' x̄_j)] on the FFT-ordered grid.
fn kspace_term(geom: &Geometry, sigma_long: f64, bin_a: usize, bin_b: usize) -> Vec<C64> {
    let n = geom.n_grid;
    let (sin_t, cos_t) = geom.tilt.sin_cos();
    let ks: Vec<f64> = (0..n).map(|i| geom.k(i)).collect();
    let phase_a: Vec<C64> = ks
        .iter()
        .map(|&k| C64::from_polar(1.0, -k * geom.xbar(bin_a)))
        .collect();
    let phase_b: Vec<C64> = ks
        .iter()
        .map(|&k| C64::from_polar(1.0, -k * geom.xbar(bin_b)))
        .collect();
    let ss2 = geom.sigma_short * geom.sigma_short;
    let sl2 = sigma_long * sigma_long;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let dk = ks[i] - geom.kbar_a;
        for j in 0..n {
            let dkp = ks[j] - geom.kbar_b;
            let u = dk * cos_t + dkp * sin_t;
            let v = -dk * sin_t + dkp * cos_t;
            let exponent = -0.5 * (ss2 * u * u + sl2 * v * v);
            if exponent < -40.0 {
                // below 1e-17 of the peak
                out.push(ZERO);
            } else {
                out.push(phase_a[i] * phase_b[j] * exponent.exp());
            }
        }
    }
    out
}

/// φ(k, k') = Σ α_ij f(k, k') exp[−i(k x̄_i + k' x̄_j)], normalized.
pub fn build_kspace(cfg: &WavepacketConfig) -> Result<WavepacketGrid> {
    cfg.validate()?;
    let n = cfg.geometry.n_grid;
    let mut amplitudes = vec![ZERO; n * n];
    for (i, row) in cfg.alpha.iter().enumerate() {
        for (j, &alpha) in row.iter().enumerate() {
            if alpha == ZERO {
                continue;
            }
            let term = kspace_term(&cfg.geometry, cfg.sigma_long, i + 1, j + 1);
            for (acc, t) in amplitudes.iter_mut().zip(term) {
                *acc += alpha * t;
            }
        }
    }
    Ok(WavepacketGrid {
        n,
        space: Space::K,
        amplitudes,
    }
    .normalized())
}

fn swap_sum(n: usize, amps: &[C64]) -> Vec<C64> {
    let mut out = vec![ZERO; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = amps[i * n + j] + amps[j * n + i];
        }
    }
    out
}

/// φ(k, k') + φ(k', k), renormalized.
pub fn symmetrize(grid: &WavepacketGrid) -> WavepacketGrid {
    WavepacketGrid {
        n: grid.n,
        space: grid.space,
        amplitudes: swap_sum(grid.n, &grid.amplitudes),
    }
    .normalized()
}

thread_local! {
    static PLANNER: std::cell::RefCell<FftPlanner<f64>> = std::cell::RefCell::new(FftPlanner::new());
}

/// Unitary 2-D inverse DFT (positive exponent), scaled by 1/N overall.
fn inverse_dft_2d(n: usize, amps: &mut [C64]) {
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n));
    let mut scratch = vec![ZERO; fft.get_inplace_scratch_len()];
    fft.process_with_scratch(amps, &mut scratch);
    transpose(n, amps);
    fft.process_with_scratch(amps, &mut scratch);
    transpose(n, amps);
    let s = 1.0 / n as f64;
    for a in amps.iter_mut() {
        *a *= s;
    }
}

fn transpose(n: usize, a: &mut [C64]) {
    for i in 0..n {
        for j in (i + 1)..n {
            a.swap(i * n + j, j * n + i);
        }
    }
}

/// φ(x, x') = (1/N) Σ_{k,k'} φ(k, k') e^{i(kx + k'x')}; norm-preserving.
pub fn to_real_space(grid: &WavepacketGrid) -> WavepacketGrid {
    let mut amplitudes = grid.amplitudes.clone();
    inverse_dft_2d(grid.n, &mut amplitudes);
    WavepacketGrid {
        n: grid.n,
        space: Space::Real,
        amplitudes,
    }
}

/// Quadrant amplitudes |φ_11⟩, |φ_12⟩, |φ_21⟩, |φ_22⟩, each (N/2)² long and not
/// individually normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct Components {
    pub half: usize,
    pub phi: [Vec<C64>; 4],
}

impl Components {
    pub fn weights(&self) -> [f64; 4] {
        self.phi
            .clone()
            .map(|v| v.iter().map(|a| a.norm_sqr()).sum())
    }
}

fn quadrant(n: usize, amps: &[C64], bin_a: usize, bin_b: usize) -> Vec<C64> {
    let half = n / 2;
    let off_a = if bin_a == 1 { half } else { 0 };
    let off_b = if bin_b == 1 { half } else { 0 };
    let mut out = Vec::with_capacity(half * half);
    for r in 0..half {
        for c in 0..half {
            out.push(amps[(r + off_a) * n + c + off_b]);
        }
    }
    out
}

/// Time bin 1 occupies positions [L/2, L), time bin 2 occupies [0, L/2).
pub fn extract_components(grid: &WavepacketGrid) -> Components {
    let phi = QUADRANTS.map(|(a, b)| quadrant(grid.n, &grid.amplitudes, a, b));
    Components {
        half: grid.n / 2,
        phi,
    }
}

/// G[ij, kl] = ⟨φ_kl|φ_ij⟩ over time-bin pairs in the order 11, 12, 21, 22.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramMatrix {
    pub g: Mat4,
}

impl GramMatrix {
    pub fn trace(&self) -> f64 {
        linalg::trace(&self.g).re
    }

    /// |G[11,22]| / √(G[11,11]·G[22,22])
    pub fn normalized_coherence(&self) -> f64 {
        self.g[0][3].norm() / (self.g[0][0].re * self.g[3][3].re).sqrt()
    }
}

fn inner(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

/// Traces out the spatial modes: ρ_qubit = G / Tr G.
pub fn effective_qubit_state(components: &Components) -> Result<(GramMatrix, DensityMatrix)> {
    let mut g = linalg::zeros();
    for r in 0..4 {
        for c in 0..4 {
            g[r][c] = inner(&components.phi[c], &components.phi[r]);
        }
    }
    gram_to_state(GramMatrix { g })
}

fn gram_to_state(gram: GramMatrix) -> Result<(GramMatrix, DensityMatrix)> {
    let tr = gram.trace();
    if !(tr >= 0.5) {
        return Err(Error::Config(format!(
            "captured two-photon probability {tr} is below 0.5; the geometry loses too much amplitude"
        )));
    }
    let rho = DensityMatrix::from_hermitian_unchecked(linalg::scale(&gram.g, 1.0 / tr));
    Ok((gram, rho))
}

/// The full pipeline: k-space → symmetrize → real space → quadrants → ρ_qubit.
pub fn effective_state(cfg: &WavepacketConfig) -> Result<(GramMatrix, DensityMatrix)> {
    let real = to_real_space(&symmetrize(&build_kspace(cfg)?));
    effective_qubit_state(&extract_components(&real))
}

/// Precomputed quadrant overlaps for one (geometry, r_corr) pair.
///
/// The pipeline is linear in α up to one overall normalization, so for the
/// source model (α_12 = α_21 = 0) the Gram matrix is
/// G = Σ_{a,b} α_a conj(α_b) O_ab with O_ab[q, q'] = ⟨Ψ_b|q'|Ψ_a|q⟩, where Ψ_a is the
/// real-space image of the symmetrized term for time bin a. Re-evaluating p and
/// θ22 then costs a handful of 4×4 products instead of two FFTs.
#[derive(Debug, Clone)]
pub struct WavepacketBasis {
    geometry: Geometry,
    r_corr: f64,
    overlaps: [[Mat4; 2]; 2],
}

impl WavepacketBasis {
    pub fn new(geometry: Geometry, r_corr: f64) -> Result<Self> {
        WavepacketConfig::for_model(geometry, r_corr, 0.5, 0.0).validate()?;
        let n = geometry.n_grid;
        let sigma_long = r_corr * geometry.sigma_short;
        let image = |bin: usize| {
            let mut amps = swap_sum(n, &kspace_term(&geometry, sigma_long, bin, bin));
            inverse_dft_2d(n, &mut amps);
            QUADRANTS.map(|(a, b)| quadrant(n, &amps, a, b))
        };
        let half_period = (geometry.xbar_1 - geometry.xbar_2 - 0.5 * geometry.length).abs()
            <= 1e-12 * geometry.length;
        let images: [[Vec<C64>; 4]; 2] = if half_period {
            // the bin-1 term is the bin-2 term shifted by (N/2, N/2): quadrants swap 11↔22, 12↔21
            let two = image(2);
            let one = [3, 2, 1, 0].map(|q| two[q].clone());
            [one, two]
        } else {
            [image(1), image(2)]
        };
        let mut overlaps = [[linalg::zeros(); 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                for q in 0..4 {
                    for qp in 0..4 {
                        overlaps[a][b][q][qp] = inner(&images[b][qp], &images[a][q]);
                    }
                }
            }
        }
        Ok(Self {
            geometry,
            r_corr,
            overlaps,
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn r_corr(&self) -> f64 {
        self.r_corr
    }

    pub fn effective_state(&self, p: f64, theta_22: f64) -> Result<(GramMatrix, DensityMatrix)> {
        let alpha = source_alpha(p, theta_22);
        let coef = [alpha[0][0], alpha[1][1]];
        let mut g = linalg::zeros();
        for a in 0..2 {
            for b in 0..2 {
                let w = coef[a] * coef[b].conj();
                for q in 0..4 {
                    for qp in 0..4 {
                        g[q][qp] += w * self.overlaps[a][b][q][qp];
                    }
                }
            }
        }
        let tr = linalg::trace(&g).re;
        let g = linalg::scale(&g, 1.0 / tr);
        gram_to_state(GramMatrix { g })
    }
}

/// Small most-recently-used cache of bases keyed by r_corr.
#[derive(Debug, Default)]
pub struct BasisCache {
    entries: Vec<Arc<WavepacketBasis>>,
}

impl BasisCache {
    const CAPACITY: usize = 8;

    pub fn get(&mut self, geometry: &Geometry, r_corr: f64) -> Result<Arc<WavepacketBasis>> {
        if let Some(pos) = self
            .entries
            .iter()
            .position(|b| b.r_corr.to_bits() == r_corr.to_bits() && b.geometry == *geometry)
        {
            let hit = self.entries.remove(pos);
            self.entries.push(hit.clone());
            return Ok(hit);
        }
        let basis = Arc::new(WavepacketBasis::new(*geometry, r_corr)?);
        if self.entries.len() == Self::CAPACITY {
            self.entries.remove(0);
        }
        self.entries.push(basis.clone());
        Ok(basis)
    }
}
