use codimlab::datasets::{make_planes, CodimEmbedding};
use codimlab::sampling::*;
use codimlab::{Acceleration, ManifoldSpec, NnIndex, NormKind};
use proptest::prelude::*;

#[test]
fn planes_grid_totals() {
    let spec = ManifoldSpec::planes(3).unwrap();
    for (delta, total, per_axis) in [(1.0, 450, 15), (0.5, 1682, 29), (0.25, 6498, 57)] {
        let ds = grid_cover_flats(&spec, delta).unwrap();
        assert_eq!(ds.len(), total);
        assert_eq!(2 * per_axis * per_axis, total);
        assert_eq!(ds.labels.iter().filter(|&&l| l == 1).count(), total / 2);
        ds.check_on_manifold().unwrap();
    }
}

/// Exact worst gap of a square grid with spacing `h` in the plane: the
/// cell centre, √2·h/2.
fn grid_worst_gap(per_axis: usize) -> f64 {
    let h = 20.0 / (per_axis - 1) as f64;
    2f64.sqrt() * h / 2.0
}

#[test]
fn grid_is_loose_cover() {
    let spec = ManifoldSpec::planes(3).unwrap();
    let ds = grid_cover_flats(&spec, 1.0).unwrap();
    assert!((grid_worst_gap(15) - 1.010_152).abs() < 1e-6);
    let loose = verify_cover(&ds, 1.02, NormKind::L2, 10_000, 1).unwrap();
    assert!(loose.is_cover);
    assert!(loose.worst_gap <= grid_worst_gap(15) + 1e-12);
    assert!(
        !verify_cover(&ds, 0.5, NormKind::L2, 10_000, 1)
            .unwrap()
            .is_cover
    );
    assert!(
        verify_cover(&ds, 1e300, NormKind::L2, 100, 1)
            .unwrap()
            .is_cover
    );
    let strict =
        grid_cover_flats_with(&spec, 1.0, GridConvention::Strict, DEFAULT_GRID_CAP).unwrap();
    assert!(
        verify_cover(&strict, 1.0, NormKind::L2, 10_000, 1)
            .unwrap()
            .is_cover
    );
}

#[test]
fn single_point_is_not_a_fine_cover() {
    let spec = ManifoldSpec::circles(2).unwrap();
    let ds = random_sample(&spec, 1, 0).unwrap();
    assert!(
        !verify_cover(&ds, 0.01, NormKind::L2, 1000, 0)
            .unwrap()
            .is_cover
    );
}

#[test]
fn circle_samples() {
    let spec = ManifoldSpec::circles(2).unwrap();
    let ds = random_sample_circles(&spec, 1000, 9).unwrap();
    assert_eq!(ds.len(), 2000);
    ds.check_on_manifold().unwrap();
    assert_eq!(ds, random_sample_circles(&spec, 1000, 9).unwrap());
    assert_ne!(
        ds.points,
        random_sample_circles(&spec, 1000, 10).unwrap().points
    );
}

#[test]
fn outer_circle_cover_radius_is_small() {
    // Cover radius of 1000 uniform angles on the radius-3 circle, measured by
    // dense probing of that circle alone, across 100 seeds.
    let spec = ManifoldSpec::spheres(3.0, 5.0, 1, 2).unwrap();
    let mut within = 0;
    for seed in 0..100 {
        let ds = random_sample(&spec, 1000, seed).unwrap();
        let inner: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == 0).collect();
        let pts = ds.points.select(ndarray::Axis(0), &inner);
        let idx = NnIndex::new(
            pts,
            vec![0; inner.len()],
            NormKind::L2,
            Acceleration::SpatialTree,
        )
        .unwrap();
        let worst = (0..20_000)
            .map(|j| {
                let t = 2.0 * std::f64::consts::PI * j as f64 / 20_000.0;
                idx.nearest(ndarray::array![3.0 * t.cos(), 3.0 * t.sin()].view())
                    .unwrap()
                    .distance
            })
            .fold(0.0, f64::max);
        within += usize::from(worst <= 0.2);
    }
    assert!(within >= 99, "{within} of 100 seeds");
}

#[test]
fn planes_test_set_is_cell_centres() {
    let split = make_planes(1.0, &CodimEmbedding::padded(3, 0)).unwrap();
    assert_eq!(split.train.len(), 450);
    assert_eq!(split.test.len(), 2 * 14 * 14);
    let idx = NnIndex::from_dataset(&split.train, NormKind::L2, Acceleration::BruteForce).unwrap();
    let expected = grid_worst_gap(15);
    for row in split.test.points.rows() {
        let d = idx.nearest(row).unwrap().distance;
        assert!((d - expected).abs() < 1e-12);
    }
}

#[test]
fn grid_errors() {
    let spec = ManifoldSpec::planes(3).unwrap();
    assert!(grid_cover_flats(&spec, -1.0).is_err());
    assert!(grid_cover_flats_with(&spec, 0.001, GridConvention::Ceil, DEFAULT_GRID_CAP).is_err());
    assert!(random_sample(&spec, 0, 0).is_err());
    assert!(random_sample_circles(&spec, 10, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn generated_points_on_manifold(seed in 0u64..1000, d in 2usize..8, n in 1usize..50) {
        random_sample(&ManifoldSpec::circles(d).unwrap(), n, seed).unwrap().check_on_manifold().unwrap();
        random_sample(&ManifoldSpec::spheres(1.0, 3.0, d - 1, d).unwrap(), n, seed).unwrap().check_on_manifold().unwrap();
        if d >= 3 {
            random_sample(&ManifoldSpec::planes(d).unwrap(), n, seed).unwrap().check_on_manifold().unwrap();
        }
    }

    #[test]
    fn grid_count_formula(delta in 0.3f64..5.0, k in 1usize..3) {
        let spec = ManifoldSpec::flats(-10.0, 10.0, k, 2.0, k + 1).unwrap();
        let m = (20.0 * (k as f64).sqrt() / (2.0 * delta)).ceil() as usize;
        prop_assert_eq!(grid_cover_flats(&spec, delta).unwrap().len(), 2 * m.pow(k as u32));
    }
}
