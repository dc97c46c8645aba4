#![allow(dead_code)]

use mbqeq::linalg::{self, Mat4};
use mbqeq::model::ErrorParams;
use mbqeq::quantum::DensityMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::SplitMix64;

pub fn rng(seed: u64) -> SplitMix64 {
    SplitMix64::seed_from_u64(seed)
}

/// A·A† / Tr with complex Gaussian A; full rank almost surely.
pub fn random_density(rng: &mut SplitMix64) -> DensityMatrix {
    let mut a = linalg::zeros();
    for row in a.iter_mut() {
        for z in row.iter_mut() {
            *z = C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        }
    }
    let m = linalg::matmul(&a, &linalg::adjoint(&a));
    let tr = linalg::trace(&m).re;
    DensityMatrix::from_matrix(linalg::scale(&m, 1.0 / tr)).unwrap()
}

pub fn random_pure(rng: &mut SplitMix64) -> DensityMatrix {
    let v: [C64; 4] = std::array::from_fn(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let v = v.map(|z| z / n);
    let m: Mat4 = linalg::outer(&v, &v);
    DensityMatrix::from_matrix(m).unwrap()
}

/// Parameters at the values fitted for the first Table I dataset.
pub fn table1_row1() -> ErrorParams {
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

/// Smallest absolute difference between two angles, modulo 2π.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}
