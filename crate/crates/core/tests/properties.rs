use std::f64::consts::PI;
use std::sync::Arc;

use oscwall::composite::cutoff;
use oscwall::fem::assemble::assemble;
use oscwall::fem::trace::CosineSeries;
use oscwall::limit::{diagonalize_boundary_form, EigenCluster, TRACE_MODES};
use oscwall::mesh::mesh_limit_domain;
use oscwall::profile::Profile;
use oscwall::study::{fit_slope, pair_branches, Pairing};
use oscwall::Error;
use proptest::prelude::*;

fn series_profile() -> impl Strategy<Value = Profile> {
    (1.0f64..3.0, prop::collection::vec(-0.3f64..0.3, 0..4)).prop_map(|(d, a)| Profile::series(d, a).unwrap())
}

proptest! {
    #[test]
    fn profile_is_even_and_periodic(p in series_profile(), xi in -3.0f64..3.0) {
        let (f, s) = p.eval(xi);
        let (fm, sm) = p.eval(-xi);
        let (fp, sp) = p.eval(xi + 1.0);
        prop_assert!((f - fm).abs() < 1e-12 && (s + sm).abs() < 1e-10);
        prop_assert!((f - fp).abs() < 1e-12 && (s - sp).abs() < 1e-10);
        prop_assert!(f < 0.0);
        // Depth extremes are sampled on a fine grid.
        prop_assert!(-f <= p.max_depth() + 1e-4 && -f >= p.min_depth() - 1e-4);
    }

    #[test]
    fn profile_slope_matches_difference_quotient(p in series_profile(), xi in -0.5f64..0.5) {
        let h = 1e-6;
        let fd = (p.value(xi + h) - p.value(xi - h)) / (2.0 * h);
        prop_assert!((p.eval(xi).1 - fd).abs() < 1e-6);
    }

    #[test]
    fn non_negative_profiles_are_rejected(d in 0.01f64..1.0) {
        let too_big = d + 0.01;
        let rejected = matches!(Profile::cosine(d, too_big), Err(Error::ProfileNotNegative { .. }));
        prop_assert!(rejected);
        prop_assert!(Profile::flat(-d).is_err());
    }

    #[test]
    fn cutoff_is_a_monotone_switch(s in -1.0f64..4.0, t in -1.0f64..4.0) {
        let (a, da) = cutoff(s);
        let (b, _) = cutoff(t);
        prop_assert!((0.0..=1.0).contains(&a) && da >= 0.0);
        if s < t {
            prop_assert!(a <= b);
        }
        if s <= 1.0 {
            prop_assert_eq!(a, 0.0);
        }
        if s >= 2.0 {
            prop_assert_eq!(a, 1.0);
        }
    }

    #[test]
    fn fit_slope_recovers_power_laws(p in 0.5f64..3.0, a in 0.01f64..100.0, n in 3usize..10) {
        let pts: Vec<(f64, f64)> = (0..n).map(|i| {
            let e = 1.0 / (2.0 * (i + 3) as f64 + 1.0);
            (e, a * e.powf(p))
        }).collect();
        let fit = fit_slope(&pts).unwrap();
        prop_assert!((fit.slope - p).abs() < 1e-10);
        prop_assert!((fit.intercept - a.ln()).abs() < 1e-8);
        prop_assert!((fit.r2 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn pairing_is_symmetric_under_swaps(a in 10.0f64..60.0, gap in 1.0f64..20.0, da in -0.3f64..0.3, db in -0.3f64..0.3) {
        let (lo, hi) = (a, a + gap);
        prop_assert_eq!(pair_branches([lo + da, hi + db], [lo, hi]), Pairing::Identity);
        prop_assert_eq!(pair_branches([hi + db, lo + da], [lo, hi]), Pairing::Swapped);
        prop_assert_eq!(pair_branches([lo + da, hi + db], [hi, lo]), Pairing::Swapped);
    }
}

fn diagonalized(angle: f64) -> EigenCluster {
    let mesh = Arc::new(mesh_limit_domain(1.0 / 8.0).unwrap());
    let asm = assemble(&mesh);
    diagonalize_boundary_form(EigenCluster::analytic(mesh, &asm, angle), 1e-3).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn boundary_form_diagonalization_is_rotation_invariant(angle in -PI..PI) {
        let mesh = Arc::new(mesh_limit_domain(1.0 / 8.0).unwrap());
        let asm = assemble(&mesh);
        let raw = EigenCluster::analytic(mesh, &asm, angle);
        let base = diagonalized(0.0);
        let tr = |g: [[f64; 2]; 2]| g[0][0] + g[1][1];
        prop_assert!((tr(raw.gram) / tr(base.gram) - 1.0).abs() < 1e-12);

        let rot = diagonalize_boundary_form(raw, 1e-3).unwrap();
        for l in 0..2 {
            prop_assert!((rot.gram[l][l] / base.gram[l][l] - 1.0).abs() < 1e-9);
            let (a, b) = (&rot.traces().unwrap()[l], &base.traces().unwrap()[l]);
            let diff = a.lin(1.0, b, -1.0);
            prop_assert!(diff.inner(&diff).sqrt() < 1e-9 * b.inner(b).sqrt());
        }
        prop_assert!(rot.gram[0][1].abs() < 1e-9 * tr(base.gram));
        prop_assert!(rot.gram[0][0] > rot.gram[1][1]);
    }
}

#[test]
fn equal_norm_orthogonal_traces_violate_the_splitting() {
    let mut c = diagonalized(0.0);
    let t = [CosineSeries::single(TRACE_MODES, 1, 2.0), CosineSeries::single(TRACE_MODES, 3, 2.0)];
    let n = t[0].inner(&t[0]);
    c.gram = [[n, 0.0], [0.0, n]];
    c.traces = Some(t);
    match diagonalize_boundary_form(c, 1e-3) {
        Err(Error::NeravViolated { gap, tol }) => assert!(gap < 1e-12 && tol == 1e-3),
        other => panic!("expected a splitting violation, got {:?}", other.map(|c| c.gram)),
    }
}

#[test]
fn analytic_boundary_form_splits_the_cluster() {
    let c = diagonalized(0.0);
    // Traces √2·μ and 2μ·cos(2π(x₁+½)): both Gram entries are 2μ².
    let mu2 = [6.25 * PI * PI, 2.25 * PI * PI];
    assert!((c.gram[0][0] / (2.0 * mu2[0]) - 1.0).abs() < 1e-12);
    assert!((c.gram[1][1] / (2.0 * mu2[1]) - 1.0).abs() < 1e-12);
    assert!((c.nerav_gap() - 4.0 / 8.5).abs() < 1e-12);
}
