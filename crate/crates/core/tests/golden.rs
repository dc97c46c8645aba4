mod common;

use mbqeq::io;
use mbqeq::model::{simulate_density, SimConfig};
use mbqeq::quantum::{fidelity_pure, trace_distance, DensityMatrix, PureState2Q};
use mbqeq::wavepacket::Geometry;
use std::path::Path;

fn golden() -> DensityMatrix {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/table1_row1_rho.json");
    io::read_density(&path).unwrap()
}

#[test]
fn table1_row1_matches_golden_file() {
    let params = common::table1_row1();
    let rho = simulate_density(&params, &[0.0; 16], &SimConfig::for_fitting(Geometry::default())).unwrap();
    assert!(rho.max_abs_diff(&golden()) < 1e-9, "diff {:e}", rho.max_abs_diff(&golden()));
    assert!((rho.trace() - 1.0).abs() < 1e-10);
}

#[test]
fn table1_row1_net_phases() {
    let sums = common::table1_row1().net_phases().radians;
    for (got, want) in sums.iter().zip([0.05, -0.33, -0.20, -0.58]) {
        assert!((got - want).abs() < 1e-12);
    }
}

#[test]
fn table1_row1_shape() {
    // η = 0.45 caps the Bell fidelity at 1 − 3η/4 ≈ 0.66 before the other errors
    let rho = golden();
    let f = fidelity_pure(&PureState2Q::bell(), &rho);
    assert!(f < 1.0 - 0.75 * 0.45 && f > 0.55, "F = {f}");
    assert!(trace_distance(&rho, &DensityMatrix::ideal()) > 0.3);
    // populations of |11⟩ and |22⟩ follow p = 0.52 around the depolarized floor
    let (p11, p22) = (rho.get(0, 0).re, rho.get(3, 3).re);
    assert!(p11 > p22);
    assert!((p11 + p22 - (1.0 - 0.45 / 2.0)).abs() < 0.02);
}
