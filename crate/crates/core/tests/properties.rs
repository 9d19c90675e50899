//! Property tests against independent oracles.

use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

use fracfreq::almgren::classify_mode;
use fracfreq::field::{read_afld, weighted_l2_distance, write_afld, ExtensionField, HalfDiskGrid};
use fracfreq::fourier::variation_of_constants;
use fracfreq::inequality::{
    coercivity, hardy_boundary, hardy_trace, kelvin_identity, random_field,
};
use fracfreq::runner::{parse_config, BoundarySpec, CaseConfig, Coupling};
use fracfreq::sphere::{solve_pencil, AngularMesh, Spectrum, SymTridiag};
use fracfreq::ProblemParams;

fn dense(t: &SymTridiag) -> DMatrix<f64> {
    let n = t.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = t.diag[i];
        if i + 1 < n {
            m[(i, i + 1)] = t.off[i];
            m[(i + 1, i)] = t.off[i];
        }
    }
    m
}

fn tridiag(diag: Vec<f64>, off: Vec<f64>) -> SymTridiag {
    SymTridiag { diag, off }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pencil_eigenvalues_match_dense_oracle(
        kd in prop::collection::vec(-5.0f64..5.0, 50),
        ko in prop::collection::vec(-2.0f64..2.0, 49),
        md in prop::collection::vec(0.5f64..1.5, 50),
        mo in prop::collection::vec(-0.2f64..0.2, 49),
    ) {
        // Diagonal dominance keeps M positive definite.
        let k = tridiag(kd, ko);
        let m = tridiag(md.iter().map(|d| d + 0.5).collect(), mo);
        let pairs = solve_pencil(&k, &m, 10).unwrap();
        let chol = m.clone();
        let l = dense(&chol).cholesky().unwrap().l();
        let li = l.clone().try_inverse().unwrap();
        let reduced = &li * dense(&k) * li.transpose();
        let mut oracle: Vec<f64> = SymmetricEigen::new(reduced).eigenvalues.iter().copied().collect();
        oracle.sort_by(f64::total_cmp);
        for (p, o) in pairs.iter().zip(&oracle) {
            prop_assert!((p.value - o).abs() <= 1e-9 * (1.0 + o.abs()), "{} vs {}", p.value, o);
        }
    }

    #[test]
    fn power_forcing_solves_in_closed_form(q in -0.9f64..2.0, lam in 0.0f64..0.6, amp in 0.1f64..3.0) {
        let params = ProblemParams::new(3, 0.5, lam).unwrap();
        let mesh = AngularMesh::graded(64, 3.0).unwrap();
        let mu = Spectrum::new(&params, &mesh, 0, 1).unwrap().modes[0].mu;
        let e = params.exponents(mu).unwrap();
        let c = params.gap();
        let k = (q + 2.0) * (q + 2.0 + c) - mu;
        prop_assume!(k.abs() > 0.05);
        let radii: Vec<f64> = (0..=60).map(|i| 1e-4f64.powf(1.0 - i as f64 / 60.0)).collect();
        let zeta: Vec<f64> = radii.iter().map(|t| t.powf(q)).collect();
        let sol = variation_of_constants(&zeta, &radii, amp, e).unwrap();
        let exact = |t: f64| (amp + 1.0 / k) * t.powf(e.sigma_plus) - t.powf(q + 2.0) / k;
        for (&r, v) in radii.iter().zip(sol.values()) {
            let scale = exact(r).abs() + r.powf(q + 2.0) / k.abs();
            prop_assert!((v - exact(r)).abs() <= 1e-9 * scale, "r={r}: {v} vs {}", exact(r));
        }
    }

    #[test]
    fn explicit_inequalities_hold_on_random_fields(seed in 0u64..1_000_000, lam in 0.0f64..0.6, r in 1e-3f64..1.0) {
        let params = ProblemParams::new(3, 0.5, lam).unwrap();
        let mesh = AngularMesh::graded(40, 3.0).unwrap();
        let grid = HalfDiskGrid::new(1.0, 1e-4, 24, mesh).unwrap();
        let field = random_field(params, &grid, (seed % 3) as u32, seed).unwrap();
        prop_assert_eq!(hardy_boundary(&field, r).unwrap().passed, Some(true));
        prop_assert_eq!(hardy_trace(&field, r).unwrap().passed, Some(true));
        let low = coercivity(&field, r, 0.0).unwrap().margin;
        let high = coercivity(&field, r, lam).unwrap();
        prop_assert_eq!(high.passed, Some(true));
        // The margin does not depend on lambda.
        prop_assert!((low - high.margin).abs() <= 1e-10 * high.rhs.abs().max(1e-300));
    }

    #[test]
    fn kelvin_identity_on_power_fields(t in -0.45f64..3.0, s in 0.2f64..0.8) {
        let params = ProblemParams::new(3, s, 0.0).unwrap();
        let mesh = AngularMesh::graded(64, 3.0).unwrap();
        let ones = vec![1.0; 64];
        // a = t (N - 2s) stays above the divergence threshold -(N - 2s)/2.
        let rep = kelvin_identity(&params, &mesh, 0, &ones, t * params.gap(), 64).unwrap();
        prop_assert!(rep.energy_residual <= 1e-6 && rep.trace_residual <= 1e-6, "{rep:?}");
        let below = kelvin_identity(&params, &mesh, 0, &ones, -0.5 * params.gap() - 0.01, 64);
        prop_assert!(below.is_err());
    }

    #[test]
    fn classification_recovers_spectrum_entries(pick in 0usize..8, lam in 0.0f64..0.6) {
        let params = ProblemParams::new(3, 0.5, lam).unwrap();
        let mesh = AngularMesh::graded(64, 3.0).unwrap();
        let sp = Spectrum::new(&params, &mesh, 2, 3).unwrap();
        let mode = &sp.modes[pick];
        let gamma = params.exponents(mode.mu).unwrap().sigma_plus;
        let class = classify_mode(gamma, &sp).unwrap();
        prop_assert!((class.mu_k0 - mode.mu).abs() < 1e-8);
        prop_assert_eq!(class.ell, mode.ell);
        let expected_k0 = sp.enumerate().find(|(_, m, _)| (m.mu - mode.mu).abs() < 1e-8).unwrap().0;
        prop_assert_eq!(class.k0, expected_k0);
        prop_assert!(class.gap < 1e-6 && class.confident);
    }

    #[test]
    fn afld_round_trip(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
        let table: Vec<Vec<f64>> = (0..rows)
            .map(|i| (0..cols).map(|j| f64::from_bits(seed.rotate_left((i * cols + j) as u32) & 0x7fef_ffff_ffff_ffff)).collect())
            .collect();
        let mut buf = Vec::new();
        write_afld(&table, &mut buf).unwrap();
        prop_assert_eq!(read_afld(buf.as_slice()).unwrap(), table);
    }

    #[test]
    fn config_round_trip(
        lam in 0.0f64..0.6,
        ch in -0.1f64..0.1,
        eps in 0.01f64..2.0,
        scale in -5.0f64..5.0,
        m in 8usize..400,
        n in 34usize..300,
        index in 1usize..20,
    ) {
        let mut c = CaseConfig::new("prop", 3, 0.5, Coupling::Lambda(lam), BoundarySpec::Mode { ell: 0, index, scale });
        c.grid.radial_cells = m;
        c.grid.angular_nodes = n;
        c.h = Some(fracfreq::field::HSpec { coefficient: ch, exponent: eps });
        let back = parse_config(&c.to_text());
        if fracfreq::runner::validate(&c).is_empty() {
            let back = back.unwrap();
            prop_assert_eq!(&back, &c);
            prop_assert_eq!(parse_config(&back.to_text()).unwrap(), back);
        } else {
            prop_assert!(back.is_err());
        }
    }
}

#[test]
fn weighted_distance_is_a_relative_metric() {
    let params = ProblemParams::new(3, 0.5, 0.0).unwrap();
    let mesh = AngularMesh::graded(40, 3.0).unwrap();
    let grid = HalfDiskGrid::new(1.0, 1e-4, 16, mesh).unwrap();
    let a = random_field(params, &grid, 0, 1).unwrap();
    let b = random_field(params, &grid, 0, 2).unwrap();
    assert_eq!(weighted_l2_distance(&a, &a).unwrap(), 0.0);
    let twice = a.scaled(2.0);
    assert!((weighted_l2_distance(&twice, &a).unwrap() - 1.0).abs() < 1e-12);
    assert!(weighted_l2_distance(&a, &b).unwrap() > 0.0);
    let zero = ExtensionField::zero(params, 0, grid).unwrap();
    assert!(weighted_l2_distance(&zero, &a).unwrap().is_finite());
}
