use std::f64::consts::PI;
use std::sync::Arc;

use oscwall::cell::CellConstants;
use oscwall::corrector::{correct, FemBackend, LayerConstants, ModalBackend, OuterBackend, SOLVABILITY_TOL};
use oscwall::limit::analytic_cluster;
use oscwall::mesh::mesh_limit_domain;
use oscwall::model::Model;
use oscwall::profile::Profile;
use oscwall::study::fit_slope;
use proptest::prelude::*;

const L0: f64 = 6.25 * PI * PI;

/// `μ² = λ₀ − k²π²` of the two branches.
fn mu2(l: usize) -> f64 {
    let k = [0.0, 2.0][l];
    L0 - k * k * PI * PI
}

/// Closed forms for separable branches, derived independently by expanding
/// the recurrence on single modes.
fn closed_form(l: usize, k: LayerConstants) -> [f64; 4] {
    let m = mu2(l);
    let kp2 = [0.0, 4.0 * PI * PI][l];
    [
        L0,
        -2.0 * k.c * m,
        3.0 * k.c * k.c * m,
        m * (k.c.powi(3) * (2.0 * m / 3.0 - 4.0) + 2.0 * m * k.c_ii) + 8.0 * kp2 * m * k.c_i,
    ]
}

fn modal() -> ModalBackend {
    let mesh = Arc::new(mesh_limit_domain(1.0 / 8.0).unwrap());
    let (cl, _) = analytic_cluster(mesh, 1e-3).unwrap();
    ModalBackend::new(&cl, 48).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

#[test]
fn flat_coefficients_are_the_shifted_rectangle_taylor_series() {
    // k²π² + μ²/(1+εd)² = λ₀ + μ² Σ (−1)ⁱ (i+1) dⁱ εⁱ.
    for d in [0.5, 1.0, 1.7] {
        let m = Model::from_constants(Profile::flat(d).unwrap(), CellConstants::flat(d, 8.0)).unwrap();
        for l in 0..2 {
            let got = m.corrections.branches[l].lambda;
            for (i, &g) in got.iter().enumerate().skip(1) {
                let want = mu2(l) * (-1f64).powi(i as i32) * (i as f64 + 1.0) * d.powi(i as i32);
                assert!(rel(g, want) < 1e-9, "d={d} branch {} λ{i}: {g} vs {want}", l + 1);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn modal_backend_matches_closed_forms(c in 0.05f64..2.0, c_i in -0.01f64..0.01, c_ii in -1.0f64..1.0) {
        let k = LayerConstants { c, c_i, c_ii };
        let r = correct(&modal(), k).unwrap();
        for l in 0..2 {
            let want = closed_form(l, k);
            for (i, (&g, &w)) in r.branches[l].lambda.iter().zip(&want).enumerate() {
                prop_assert!(rel(g, w) < 1e-8, "branch {} λ{}", l + 1, i);
            }
            prop_assert!(r.branches[l].kappa1.abs() < 1e-10);
            prop_assert!(r.branches[l].max_residue <= SOLVABILITY_TOL);
        }
    }

    #[test]
    fn first_correction_is_linear_in_c(c in 0.05f64..2.0) {
        let b = modal();
        let one = correct(&b, LayerConstants { c: 1.0, c_i: 0.0, c_ii: 0.0 }).unwrap();
        let r = correct(&b, LayerConstants { c, c_i: 0.0, c_ii: 0.0 }).unwrap();
        for l in 0..2 {
            prop_assert!(rel(r.branches[l].lambda[1], c * one.branches[l].lambda[1]) < 1e-12);
            prop_assert!(rel(r.branches[l].lambda[2], c * c * one.branches[l].lambda[2]) < 1e-10);
        }
    }
}

#[test]
fn predicted_lambda_examples() {
    let m = Model::from_constants(Profile::flat(1.0).unwrap(), CellConstants::flat(1.0, 8.0)).unwrap();
    assert_eq!(m.predict(0, 0.3, 0).unwrap(), m.corrections.lambda0);
    let p = m.predict(0, 1.0 / 7.0, 1).unwrap();
    assert!((p - 44.060).abs() < 1e-3, "{p}");
    assert!((p - (L0 - 2.0 * L0 / 7.0)).abs() < 1e-9);
    for order in 0..4 {
        assert_eq!(m.predict(1, 0.0, order).unwrap(), L0);
    }
    assert!(m.predict(0, 0.1, 4).is_err());
    assert!(m.predict(2, 0.1, 1).is_err());
}

#[test]
fn prediction_is_monotone_in_eps_when_lambda1_is_negative() {
    let m = Model::from_constants(Profile::cosine(1.0, 0.4).unwrap(), CellConstants::given(0.733, -3.8e-4, -0.1327)).unwrap();
    for l in 0..2 {
        assert!(m.corrections.branches[l].lambda[1] < 0.0);
        for order in 1..4 {
            let v: Vec<f64> = (0..=50).map(|i| m.predict(l, 0.001 * i as f64, order).unwrap()).collect();
            assert!(v.windows(2).all(|w| w[1] < w[0]), "branch {} order {order}", l + 1);
        }
    }
}

#[test]
fn fem_backend_solves_are_compatible() {
    let k = LayerConstants { c: 0.733, c_i: -3.8e-4, c_ii: -0.1327 };
    let mesh = Arc::new(mesh_limit_domain(1.0 / 32.0).unwrap());
    let (cl, asm) = analytic_cluster(mesh, 1e-3).unwrap();
    let fb = FemBackend::new(&cl, &asm).unwrap();
    let r = correct(&fb, k).unwrap();
    for b in &r.branches {
        assert!(b.max_residue <= SOLVABILITY_TOL, "{}", b.max_residue);
        assert!(rel(b.lambda[1], closed_form(b.branch - 1, k)[1]) < 1e-3);
    }
}

#[test]
fn incompatible_data_is_rejected() {
    let b = modal();
    let f = b.basis(0);
    let g = b.traces()[0].scale(0.0);
    assert!(matches!(b.solve(&f, &g), Err(oscwall::Error::SolvabilityViolated { .. })));
}

/// `‖ũ_FEM − ũ_modal‖_{L²}` for `ũ₁, ũ₂` of both branches.
fn backend_gaps(n: usize, k: LayerConstants, mb: &ModalBackend) -> Vec<f64> {
    let rm = correct(mb, k).unwrap();
    let mesh = Arc::new(mesh_limit_domain(1.0 / n as f64).unwrap());
    let (cl, asm) = analytic_cluster(mesh.clone(), 1e-3).unwrap();
    let fb = FemBackend::new(&cl, &asm).unwrap();
    let rf = correct(&fb, k).unwrap();
    let mut out = Vec::new();
    for l in 0..2 {
        let (f, m) = (&rf.branches[l], &rm.branches[l]);
        for (uf, um) in [(&f.u1_tilde, &m.u1_tilde), (&f.u2_tilde, &m.u2_tilde)] {
            let d: Vec<f64> = mesh.vertices.iter().zip(uf).map(|(&x, v)| v - mb.eval(um, x)).collect();
            out.push(asm.m.inner(&d, &d).sqrt());
        }
    }
    out
}

#[test]
fn fem_and_modal_outer_solutions_agree_at_second_order() {
    let k = LayerConstants { c: 0.733, c_i: -3.8e-4, c_ii: -0.1327 };
    let mb = modal();
    let ns = [16, 32, 64];
    let gaps: Vec<Vec<f64>> = ns.iter().map(|&n| backend_gaps(n, k, &mb)).collect();
    for q in 0..4 {
        let pts: Vec<(f64, f64)> = ns.iter().zip(&gaps).map(|(&n, g)| (1.0 / n as f64, g[q])).collect();
        let fit = fit_slope(&pts).unwrap();
        assert!((fit.slope - 2.0).abs() <= 0.2, "field {q}: rate {}", fit.slope);
    }
}
