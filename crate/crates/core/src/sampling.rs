//! δ-covers and random samples of the analytic manifolds.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Family, ManifoldSpec};
use crate::knn::{Acceleration, NnIndex};
use crate::norm::NormKind;
use crate::rng::stream_rng;

pub const DEFAULT_GRID_CAP: usize = 10_000_000;

/// How many grid points to place per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridConvention {
    /// `m = ceil(L·√k / 2δ)` points per axis, endpoints included. Gives 450,
    /// 1682 and 6498 points for the Planes flats at δ = 1, 0.5, 0.25, with a
    /// worst-case gap slightly above δ.
    #[default]
    Ceil,
    /// One extra point per axis; a true δ-cover.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum CoverScheme {
    GridVertices { convention: GridConvention },
    GridCellCenters,
    RandomUniform { n_per_class: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverConfig {
    /// Target cover radius; `None` for random samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(flatten)]
    pub scheme: CoverScheme,
    pub seed: u64,
}

/// Points in R^d with class labels and the manifold they were drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub points: Array2<f64>,
    pub labels: Vec<usize>,
    pub spec: ManifoldSpec,
    pub provenance: CoverConfig,
    /// Seed of the random ambient rotation applied after zero-padding, if any.
    pub rotation_seed: Option<u64>,
}

impl LabeledDataset {
    pub fn new(
        points: Array2<f64>,
        labels: Vec<usize>,
        spec: ManifoldSpec,
        provenance: CoverConfig,
    ) -> Result<Self> {
        if points.nrows() != labels.len() {
            return Err(Error::CountMismatch {
                images: points.nrows(),
                labels: labels.len(),
            });
        }
        if points.ncols() != spec.ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: spec.ambient_dim,
                actual: points.ncols(),
            });
        }
        Ok(LabeledDataset {
            points,
            labels,
            spec,
            provenance,
            rotation_seed: None,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    /// Points in the unrotated frame where the manifold formulas apply.
    pub fn canonical_points(&self) -> Array2<f64> {
        match self.rotation_seed {
            None => self.points.clone(),
            Some(seed) => {
                let q = crate::datasets::random_rotation(self.dim(), seed);
                self.points.dot(&q)
            }
        }
    }

    /// Checks that every point lies on its labelled class manifold.
    pub fn check_on_manifold(&self) -> Result<()> {
        let canonical = self.canonical_points();
        for (row, &label) in canonical.rows().into_iter().zip(&self.labels) {
            let d = self.spec.distance_to_class(row, label, NormKind::L2)?;
            if d > crate::geometry::ON_MANIFOLD_TOL {
                return Err(Error::OffManifold { distance: d });
            }
        }
        Ok(())
    }
}

fn flats_params(spec: &ManifoldSpec) -> Result<(f64, f64, usize, f64)> {
    match spec.family {
        Family::ParallelFlats {
            lo,
            hi,
            flat_dim,
            separation,
        } => Ok((lo, hi, flat_dim, separation)),
        _ => Err(Error::InvalidSpec(
            "grid covers need the parallel-flats family".into(),
        )),
    }
}

/// Per-axis grid count for a δ-cover of `[lo, hi]^k`.
pub fn grid_points_per_axis(
    lo: f64,
    hi: f64,
    k: usize,
    delta: f64,
    convention: GridConvention,
) -> usize {
    let m = ((hi - lo) * (k as f64).sqrt() / (2.0 * delta))
        .ceil()
        .max(1.0) as usize;
    match convention {
        GridConvention::Ceil => m,
        GridConvention::Strict if hi > lo => m + 1,
        GridConvention::Strict => m,
    }
}

/// Grid-vertex δ-cover of both flats, using the `Ceil` convention.
pub fn grid_cover_flats(spec: &ManifoldSpec, delta: f64) -> Result<LabeledDataset> {
    grid_cover_flats_with(spec, delta, GridConvention::Ceil, DEFAULT_GRID_CAP)
}

pub fn grid_cover_flats_with(
    spec: &ManifoldSpec,
    delta: f64,
    convention: GridConvention,
    cap: usize,
) -> Result<LabeledDataset> {
    let (lo, hi, k, sep) = flats_params(spec)?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::arg(
            "delta",
            format!("must be positive, got {delta}"),
        ));
    }
    let m = grid_points_per_axis(lo, hi, k, delta, convention);
    let axis: Vec<f64> = if m == 1 {
        vec![lo]
    } else {
        (0..m)
            .map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64)
            .collect()
    };
    let points = grid_on_flats(spec, &axis, k, sep, cap)?;
    let provenance = CoverConfig {
        delta: Some(delta),
        scheme: CoverScheme::GridVertices { convention },
        seed: 0,
    };
    let n = points.nrows();
    let labels = (0..n).map(|i| usize::from(i >= n / 2)).collect();
    LabeledDataset::new(points, labels, spec.clone(), provenance)
}

/// Centres of the grid cubes of [`grid_cover_flats_with`]: the points of the
/// flats farthest from the grid vertices.
pub fn grid_cell_centers(
    spec: &ManifoldSpec,
    delta: f64,
    convention: GridConvention,
    cap: usize,
) -> Result<LabeledDataset> {
    let (lo, hi, k, sep) = flats_params(spec)?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::arg(
            "delta",
            format!("must be positive, got {delta}"),
        ));
    }
    let m = grid_points_per_axis(lo, hi, k, delta, convention);
    let axis: Vec<f64> = if m < 2 {
        Vec::new()
    } else {
        let step = (hi - lo) / (m - 1) as f64;
        (0..m - 1).map(|i| lo + (i as f64 + 0.5) * step).collect()
    };
    let points = grid_on_flats(spec, &axis, k, sep, cap)?;
    let n = points.nrows();
    let labels = (0..n).map(|i| usize::from(i >= n / 2)).collect();
    let provenance = CoverConfig {
        delta: Some(delta),
        scheme: CoverScheme::GridCellCenters,
        seed: 0,
    };
    LabeledDataset::new(points, labels, spec.clone(), provenance)
}

fn grid_on_flats(
    spec: &ManifoldSpec,
    axis: &[f64],
    k: usize,
    sep: f64,
    cap: usize,
) -> Result<Array2<f64>> {
    let per_class = (axis.len() as f64).powi(k as i32);
    if 2.0 * per_class > cap as f64 {
        return Err(Error::TooManyPoints {
            requested: 2.0 * per_class,
            cap,
        });
    }
    let per_class = per_class as usize;
    let d = spec.ambient_dim;
    let mut points = Array2::zeros((2 * per_class, d));
    for class in 0..2 {
        for idx in 0..per_class {
            let mut row = points.row_mut(class * per_class + idx);
            let mut rem = idx;
            // First axis varies slowest.
            for axis_i in (0..k).rev() {
                row[axis_i] = axis[rem % axis.len()];
                rem /= axis.len();
            }
            row[d - 1] = if class == 0 { 0.0 } else { sep };
        }
    }
    Ok(points)
}

/// `n_per_class` uniform samples on each sphere. Circles use uniform angles;
/// higher-dimensional spheres use normalised Gaussians.
pub fn random_sample_circles(
    spec: &ManifoldSpec,
    n_per_class: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    if !matches!(spec.family, Family::ConcentricSpheres { .. }) {
        return Err(Error::InvalidSpec(
            "random sphere sampling needs the concentric-spheres family".into(),
        ));
    }
    random_sample(spec, n_per_class, seed)
}

/// Uniform random samples of either family.
pub fn random_sample(spec: &ManifoldSpec, n_per_class: usize, seed: u64) -> Result<LabeledDataset> {
    if n_per_class == 0 {
        return Err(Error::arg("n_per_class", "must be at least 1"));
    }
    let mut points = Array2::zeros((2 * n_per_class, spec.ambient_dim));
    let mut labels = Vec::with_capacity(2 * n_per_class);
    for class in 0..2 {
        let mut rng = stream_rng(seed, class as u64);
        for i in 0..n_per_class {
            points
                .row_mut(class * n_per_class + i)
                .assign(&spec.sample_on_class(class, &mut rng));
            labels.push(class);
        }
    }
    let provenance = CoverConfig {
        delta: None,
        scheme: CoverScheme::RandomUniform { n_per_class },
        seed,
    };
    LabeledDataset::new(points, labels, spec.clone(), provenance)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverCheck {
    pub is_cover: bool,
    pub worst_gap: f64,
    pub n_probe: usize,
}

/// Monte Carlo check that `dataset` is a δ-cover of its manifold: the worst
/// nearest-sample distance over `n_probe` uniform manifold points.
pub fn verify_cover(
    dataset: &LabeledDataset,
    delta: f64,
    norm: NormKind,
    n_probe: usize,
    seed: u64,
) -> Result<CoverCheck> {
    if dataset.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let canonical = dataset.canonical_points();
    let accel = if norm == NormKind::L2 {
        Acceleration::SpatialTree
    } else {
        Acceleration::BruteForce
    };
    let index = NnIndex::new(canonical, dataset.labels.clone(), norm, accel)?;
    let worst_gap = estimate_cover_radius(&index, &dataset.spec, n_probe, seed)?;
    Ok(CoverCheck {
        is_cover: worst_gap <= delta,
        worst_gap,
        n_probe,
    })
}

/// Largest nearest-sample distance seen over `n_probe` uniform manifold
/// points, alternating classes. Probe `i` draws from stream `i`.
pub fn estimate_cover_radius(
    index: &NnIndex,
    spec: &ManifoldSpec,
    n_probe: usize,
    seed: u64,
) -> Result<f64> {
    if index.dim() != spec.ambient_dim {
        return Err(Error::DimensionMismatch {
            expected: spec.ambient_dim,
            actual: index.dim(),
        });
    }
    let gaps: Vec<f64> = (0..n_probe)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let probe = spec.sample_on_class(i % 2, &mut rng);
            index.nearest(probe.view()).map(|n| n.distance)
        })
        .collect::<Result<_>>()?;
    Ok(gaps.into_iter().fold(0.0, f64::max))
}
