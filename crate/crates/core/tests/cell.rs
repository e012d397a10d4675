use oscwall::cell::{cell_constants, estimate_decay, solve_cell_problems, CellResolution};
use oscwall::mesh::StripSpec;
use oscwall::profile::Profile;

fn spec(cphp: usize) -> StripSpec {
    StripSpec { cells_per_half_period: cphp, ..Default::default() }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn flat_fields_are_exact() {
    for d in [0.5, 1.0, 2.0] {
        let s = solve_cell_problems(&Profile::flat(d).unwrap(), 6.0, &spec(6)).unwrap();
        assert!((s.c - d).abs() < 1e-8, "C = {}", s.c);
        assert!(max_abs(&s.x_tilde.values) < 1e-10);
        assert!(max_abs(&s.x_i.values) < 1e-10);
        assert!(s.c_i.abs() < 1e-10);
        // X = ξ₂ + d holds at every node, the layer included.
        for (v, p) in s.x.values.iter().zip(&s.x.mesh.vertices) {
            assert!((v - (p[1] + d)).abs() < 1e-9);
        }
    }
}

#[test]
fn flat_c_ii_converges_to_its_closed_form() {
    let p = Profile::flat(1.0).unwrap();
    let err: Vec<f64> = [4, 8, 16]
        .iter()
        .map(|&n| (solve_cell_problems(&p, 8.0, &spec(n)).unwrap().c_ii + 1.0 / 3.0).abs())
        .collect();
    // Uniform flat strips superconverge; at least second order is required.
    for w in err.windows(2) {
        assert!(w[0] / w[1] > 3.5, "{err:?}");
    }
    let rich = cell_constants(&p, 8.0, &CellResolution { strip: spec(8), richardson: true }).unwrap();
    assert!(rich.extrapolated);
    assert_eq!(rich.decay_rate_x, None);
    assert!((rich.c - 1.0).abs() < 1e-8);
}

#[test]
fn cosine_constant_lies_between_the_depth_extremes() {
    let p = Profile::cosine(1.0, 0.4).unwrap();
    let s = solve_cell_problems(&p, 8.0, &spec(16)).unwrap();
    assert!(s.c > p.min_depth() && s.c < p.max_depth(), "C = {}", s.c);
    assert!(s.weak_residual < 1e-10);
    for f in [&s.x, &s.x_tilde, &s.x_i, &s.z] {
        assert!(f.parity_error() < 1e-10);
    }
}

#[test]
fn deeper_walls_have_larger_constants() {
    let res = CellResolution { strip: spec(16), richardson: true };
    let c = |d: f64| cell_constants(&Profile::cosine(d, 0.3).unwrap(), 8.0, &res).unwrap().c;
    let (a, b, e) = (c(0.8), c(1.0), c(1.3));
    assert!(a < b && b < e);
    // Lowering the wall by δ shifts C by δ up to discretization error.
    assert!(((b - a) - 0.2).abs() < 5e-4 && ((e - b) - 0.3).abs() < 5e-4, "{a} {b} {e}");
}

#[test]
fn cosine_far_field_decays_like_the_first_transverse_mode() {
    let p = Profile::cosine(1.0, 0.4).unwrap();
    let s = solve_cell_problems(&p, 8.0, &spec(16)).unwrap();
    let fx = estimate_decay(&s.x).unwrap().unwrap();
    assert!(fx.fit_quality > 0.99);
    assert!((fx.rate / (2.0 * std::f64::consts::PI) - 1.0).abs() < 0.1, "rate {}", fx.rate);
}
