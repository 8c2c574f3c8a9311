use std::f64::consts::PI;

use approx::assert_relative_eq;
use codimlab::bounds::*;
use codimlab::{ManifoldSpec, NormKind};
use proptest::prelude::*;
use serde::Deserialize;

#[derive(Deserialize)]
struct Fixture {
    formula: String,
    inputs: serde_json::Map<String, serde_json::Value>,
    value: String,
    log_value: String,
}

fn load_fixtures() -> Vec<Fixture> {
    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/fixtures/bounds.json"
    ))
    .unwrap();
    serde_json::from_str(&text).unwrap()
}

fn get(f: &Fixture, key: &str) -> f64 {
    f.inputs[key].as_f64().unwrap()
}

/// Relative error against the 50-digit reference, comparing logs when the
/// value is outside the f64 range.
fn evaluate(f: &Fixture) -> (f64, f64) {
    let (value, log_value) = match f.formula.as_str() {
        "coverage_ratio" => {
            let r = coverage_ratio_bound(
                get(f, "k") as usize,
                get(f, "d") as usize,
                get(f, "eps"),
                get(f, "vol"),
                get(f, "n") as u64,
            )
            .unwrap();
            (r.value, r.log_value)
        }
        "plane_coverage" => {
            let r = plane_coverage_bound(get(f, "k") as usize, get(f, "d") as usize).unwrap();
            (r.value, r.log_value)
        }
        "tube_cover_samples" => {
            let r = tube_cover_sample_lower_bound(
                get(f, "k") as usize,
                get(f, "d") as usize,
                get(f, "lo"),
                get(f, "hi"),
            )
            .unwrap();
            (r.value, r.log_value)
        }
        "sphere_coverage" => {
            let r = sphere_coverage_bound(get(f, "n") as u64, get(f, "d") as usize, get(f, "eps"))
                .unwrap();
            (r.value, r.log_value)
        }
        "linear_regions" => {
            let r = linear_region_lower_bound(
                get(f, "r1"),
                get(f, "rch"),
                get(f, "tau"),
                get(f, "d") as usize,
            )
            .unwrap();
            (r.value, r.log_value)
        }
        "segment_count" => {
            let v = segment_count_lower_bound(get(f, "r1"), get(f, "r2"), get(f, "eps")).unwrap();
            (v, v.ln())
        }
        "medial_t_star" => {
            let v = medial_proximity_bound(get(f, "delta"), get(f, "w1"), get(f, "w2"), 1.0)
                .unwrap()
                .t_star;
            (v, v.ln())
        }
        other => panic!("unknown fixture formula {other}"),
    };
    let expected: f64 = f.value.parse().unwrap();
    let expected_log: f64 = f.log_value.parse().unwrap();
    if expected.is_normal() {
        ((value - expected).abs() / expected.abs(), expected)
    } else {
        (
            (log_value - expected_log).abs() / expected_log.abs(),
            expected_log,
        )
    }
}

#[test]
fn high_precision_fixtures() {
    let fixtures = load_fixtures();
    assert_eq!(fixtures.len(), 25);
    for f in &fixtures {
        let (rel, expected) = evaluate(f);
        assert!(
            rel <= 1e-10,
            "{} {:?}: rel err {rel:e} vs {expected}",
            f.formula,
            f.inputs
        );
    }
}

#[test]
fn coverage_ratio_examples() {
    // Γ(50)/Γ(51) = 1/50.
    let r = coverage_ratio_bound(2, 100, 1.0, 400.0, 450).unwrap();
    assert_relative_eq!(r.value, PI / 50.0 * 450.0 / 400.0, max_relative = 1e-12);
    // Γ(2)/Γ(3) = 1/2.
    let r = coverage_ratio_bound(2, 4, 1.0, 400.0, 450).unwrap();
    assert_relative_eq!(r.value, PI / 2.0 * 1.125, max_relative = 1e-12);
    assert!(coverage_ratio_bound(3, 3, 1.0, 1.0, 1).is_err());
}

#[test]
fn plane_and_tube_examples() {
    // Γ(1.5) = √π/2, Γ(2.5) = 3√π/4.
    assert_relative_eq!(
        plane_coverage_bound(2, 3).unwrap().value,
        PI * (2.0 / 3.0) * 0.5,
        max_relative = 1e-12
    );
    assert_relative_eq!(
        plane_coverage_bound(2, 100).unwrap().value,
        PI / 50.0 * 0.5,
        max_relative = 1e-12
    );
    // Γ(52)/Γ(51) = 51.
    assert_relative_eq!(
        tube_cover_sample_lower_bound(2, 102, -10.0, 10.0)
            .unwrap()
            .value,
        51.0 / PI * 400.0,
        max_relative = 1e-12
    );
    // Γ(2)/Γ(1.5)/√π = 2/π.
    assert_relative_eq!(
        tube_cover_sample_lower_bound(1, 2, 0.0, 1.0).unwrap().value,
        2.0 / PI,
        max_relative = 1e-12
    );
}

#[test]
fn sphere_segment_region_medial_examples() {
    let r = sphere_coverage_bound(1_000_000_000_000, 500, 1.0).unwrap();
    assert_relative_eq!(
        r.log_value,
        12.0 * 10f64.ln() - 500.0 * 2f64.ln(),
        max_relative = 1e-12
    );
    assert_eq!(sphere_coverage_bound(1, 2, 1.0).unwrap().value, 0.25);
    assert_relative_eq!(
        segment_count_lower_bound(1.0, 3.0, 0.0).unwrap(),
        PI / (1.0f64 / 3.0).acos(),
        max_relative = 1e-14
    );
    assert_relative_eq!(
        segment_count_lower_bound(1.0, 3.0, 0.5).unwrap(),
        PI / 0.6f64.acos(),
        max_relative = 1e-14
    );
    assert!(segment_count_lower_bound(1.0, 3.0, 1.0).is_err());
    assert_relative_eq!(
        linear_region_lower_bound(1.0, 1.0, 0.25, 2).unwrap().value,
        PI * 2f64.sqrt(),
        max_relative = 1e-12
    );
    assert_relative_eq!(
        linear_region_lower_bound(1.0, 1.0, 0.5, 2).unwrap().value,
        PI,
        max_relative = 1e-12
    );
    let m = medial_proximity_bound(0.1, 0.2, 0.5, 2.0).unwrap();
    assert_relative_eq!(m.t_star, 0.32 / 1.21, max_relative = 1e-14);
    assert_relative_eq!(m.dist_bound, 0.32 / 1.21 * 0.5 * 2.0, max_relative = 1e-14);
    assert_eq!(
        medial_proximity_bound(0.0, 0.4, 0.4, 1.0).unwrap().t_star,
        0.0
    );
}

/// L∞ distance from `(0, …, 0, a)` in R^n to the origin-centred sphere of
/// radius `r`: the smallest half-width t whose box around the point has
/// `min‖·‖₂ ≤ r ≤ max‖·‖₂`, found by bisection.
fn box_sphere_distance(n: usize, a: f64, r: f64) -> f64 {
    let touches = |t: f64| {
        let tang_min = 0.0;
        let tang_max = (n - 1) as f64 * t * t;
        let axis_min = if a.abs() <= t {
            0.0
        } else {
            (a.abs() - t).powi(2)
        };
        let axis_max = (a.abs() + t).powi(2);
        (tang_min + axis_min).sqrt() <= r && r <= (tang_max + axis_max).sqrt()
    };
    let (mut lo, mut hi) = (0.0, 2.0 * r + a.abs());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if touches(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Offset above the inner pole where the L∞ distances to both spheres agree.
fn equidistant_offset(n: usize, r1: f64, r2: f64) -> f64 {
    let (mut lo, mut hi) = (r1, r2);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if box_sphere_distance(n, mid, r1) < box_sphere_distance(n, mid, r2) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi) - r1
}

#[test]
fn axis_offset_matches_equidistance_search() {
    // The closed form at `d` is the equidistant offset for spheres in R^d.
    for d in 1..=3 {
        let formula = linf_axis_offset(1.0, 3.0, d).unwrap();
        assert!(
            (equidistant_offset(d, 1.0, 3.0) - formula).abs() < 1e-4,
            "d = {d}"
        );
    }
    assert!((equidistant_offset(9, 1.0, 3.0) - 2.0 / 3.0).abs() < 1e-9);
    assert!((equidistant_offset(2, 1.0, 3.0) - 0.926_649).abs() < 1e-6);
}

#[test]
fn axis_offset_asymptote() {
    for d in [10_000usize, 100_000, 1_000_000] {
        let scaled = linf_axis_offset(1.0, 3.0, d).unwrap() * (d as f64).sqrt();
        assert!(
            (scaled / 8f64.sqrt() - 1.0).abs() < 0.01,
            "d = {d}: {scaled}"
        );
    }
}

#[test]
fn gap_ratio_floor_on_grid() {
    for k in 1..=64 {
        for i in 0..=100 {
            let eps = i as f64 / 100.0;
            let r = sampling_gap_ratio(k, eps);
            assert!(
                r >= 2f64.powf(k as f64 / 2.0) * (1.0 - 1e-12),
                "k = {k}, eps = {eps}"
            );
        }
    }
}

#[test]
fn mc_accuracy_matches_radial_integral() {
    // Tubes at ε = 1.5: disc of radius 2.5 and annulus [1.5, 4.5]. The
    // overlap is the annulus [1.5, 2.5]; the union is the disc of radius 4.5.
    let spec = ManifoldSpec::circles(2).unwrap();
    let exact = 1.0 - 0.5 * (2.5f64.powi(2) - 1.5f64.powi(2)) / 4.5f64.powi(2);
    let est = accuracy_upper_bound_mc(&spec, 1.5, NormKind::L2, 1_000_000, 7).unwrap();
    assert!(
        (est.value - exact).abs() < 4.0 * est.std_error + 1e-4,
        "{} vs {exact}",
        est.value
    );
    assert!(est.value < 1.0);
    let again = accuracy_upper_bound_mc(&spec, 1.5, NormKind::L2, 1_000_000, 7).unwrap();
    assert_eq!(est, again);
}

#[test]
fn mc_disjoint_tubes_are_separable() {
    let spec = ManifoldSpec::circles(3).unwrap();
    let est = accuracy_upper_bound_mc(&spec, 0.9, NormKind::L2, 100_000, 1).unwrap();
    assert_eq!(est.n_intersection, 0);
    assert_eq!(est.value, 1.0);
}

proptest! {
    #[test]
    fn log_and_value_agree(k in 1usize..6, extra in 1usize..300, eps in 0.01f64..2.0, n in 1u64..1_000_000) {
        let d = k + extra;
        let r = coverage_ratio_bound(k, d, eps, 1.0, n).unwrap();
        if r.value.is_normal() {
            prop_assert!((r.log_value.exp() / r.value - 1.0).abs() <= 1e-12);
        }
        let t = tube_cover_sample_lower_bound(k, d, -1.0, 1.0).unwrap();
        let p = plane_coverage_bound(k, d).unwrap();
        // Tube cover count and plane coverage share the same Γ ratio.
        let lhs = t.log_value + p.log_value;
        let rhs = k as f64 * (2.0f64).ln() + k as f64 * ((k as f64).sqrt() / 2.0).ln();
        prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + t.log_value.abs()));
    }

    #[test]
    fn plane_coverage_decreases_with_codim(k in 1usize..5, d in 6usize..400) {
        let a = plane_coverage_bound(k, d).unwrap().log_value;
        let b = plane_coverage_bound(k, d + 1).unwrap().log_value;
        prop_assert!(b < a);
    }

    #[test]
    fn gap_ratio_at_least_floor(k in 1usize..=64, eps in 0.0f64..=1.0) {
        prop_assert!(sampling_gap_ratio(k, eps) >= 2f64.powf(k as f64 / 2.0) * (1.0 - 1e-12));
    }

    #[test]
    fn cover_bounds_ordered(rch in 0.1f64..10.0, frac in 0.0f64..0.999) {
        let eps = frac * rch;
        let nn = nn_cover_bound(rch, eps).unwrap();
        let l = l_cover_bound(rch, eps).unwrap();
        prop_assert!((nn - 2.0 * l).abs() <= 1e-12 * rch);
        prop_assert_eq!(nn_noise_cover_bound(rch, eps, 0.0).unwrap(), nn);
    }

    #[test]
    fn medial_t_star_in_unit_interval(delta in 0.0f64..0.3, w1 in 0.0f64..0.6, dw in 0.0f64..0.3) {
        let w2 = (w1 + dw).min(0.95);
        let m = medial_proximity_bound(delta, w1.min(w2), w2, 1.0).unwrap();
        prop_assert!(m.t_star >= 0.0);
        prop_assert!(m.dist_bound <= m.t_star + 1e-15);
    }
}
