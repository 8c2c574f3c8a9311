use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::classifier::Classifier;
use crate::error::{Error, Result};
use crate::geometry::{Family, ManifoldSpec};
use crate::mlp::MlpModel;

/// Loss gradient at one grid point, restricted to the plotted plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradFieldPoint {
    pub x: f64,
    pub y: f64,
    pub gx: f64,
    pub gy: f64,
    pub magnitude: f64,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![(lo + hi) / 2.0],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Loss-gradient field of `model` over `[lo, hi] × [−1, sep + 1]` in the
/// plane spanned by the first tangent axis and the separating axis of a
/// parallel-flats spec. Each point takes the label of the nearer flat.
pub fn run_gradfield(
    model: &MlpModel,
    spec: &ManifoldSpec,
    grid_res: usize,
) -> Result<Vec<GradFieldPoint>> {
    let Family::ParallelFlats {
        lo, hi, separation, ..
    } = spec.family
    else {
        return Err(Error::InvalidSpec(
            "gradient fields are drawn for parallel flats".into(),
        ));
    };
    if grid_res < 2 {
        return Err(Error::arg("grid_res", "need at least 2 points per axis"));
    }
    let d = spec.ambient_dim;
    if model.input_dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: model.input_dim(),
        });
    }
    let xs = linspace(lo, hi, grid_res);
    let ys = linspace(-1.0, separation + 1.0, grid_res);
    let mut pts = Array2::zeros((grid_res * grid_res, d));
    let mut labels = Vec::with_capacity(grid_res * grid_res);
    for (j, &y) in ys.iter().enumerate() {
        for (i, &x) in xs.iter().enumerate() {
            let r = j * grid_res + i;
            pts[[r, 0]] = x;
            pts[[r, d - 1]] = y;
            labels.push(usize::from(y > separation / 2.0));
        }
    }
    let g = model.input_gradients(pts.view(), &labels)?;
    Ok((0..pts.nrows())
        .map(|r| {
            let (gx, gy) = (g[[r, 0]], g[[r, d - 1]]);
            GradFieldPoint {
                x: pts[[r, 0]],
                y: pts[[r, d - 1]],
                gx,
                gy,
                magnitude: gx.hypot(gy),
            }
        })
        .collect())
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median gradient magnitude on the two flats divided by the median on the
/// decision axis, using grid rows within `band` of each level.
pub fn gradfield_ratio(field: &[GradFieldPoint], separation: f64, band: f64) -> f64 {
    let on = field
        .iter()
        .filter(|p| p.y.abs() <= band || (p.y - separation).abs() <= band)
        .map(|p| p.magnitude)
        .collect();
    let axis = field
        .iter()
        .filter(|p| (p.y - separation / 2.0).abs() <= band)
        .map(|p| p.magnitude)
        .collect();
    median(on) / median(axis)
}

/// Mean predicted label over an x-y grid at height `z` (third coordinate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySlice {
    pub z: f64,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `freq[[j, i]]`: fraction of classifiers predicting class 1 at `(xs[i], ys[j])`.
    pub freq: Array2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceRow {
    pub z: f64,
    pub x: f64,
    pub y: f64,
    pub freq: f64,
}

impl BoundarySlice {
    pub fn rows(&self) -> Vec<SliceRow> {
        let mut out = Vec::with_capacity(self.xs.len() * self.ys.len());
        for (j, &y) in self.ys.iter().enumerate() {
            for (i, &x) in self.xs.iter().enumerate() {
                out.push(SliceRow {
                    z: self.z,
                    x,
                    y,
                    freq: self.freq[[j, i]],
                });
            }
        }
        out
    }
}

/// Cross-sections of the decision boundary at each `z`, averaged over
/// `classifiers`. Points are `(x, y, z, 0, …)` in R^dim with `x, y ∈ [−extent, extent]`.
pub fn run_boundary_slices(
    classifiers: &[&dyn Classifier],
    dim: usize,
    z_values: &[f64],
    extent: f64,
    grid_res: usize,
) -> Result<Vec<BoundarySlice>> {
    if classifiers.is_empty() {
        return Err(Error::Empty("classifier list"));
    }
    if dim < 3 {
        return Err(Error::arg("dim", "slices need at least 3 dimensions"));
    }
    if grid_res < 2 {
        return Err(Error::arg("grid_res", "need at least 2 points per axis"));
    }
    let xs = linspace(-extent, extent, grid_res);
    let ys = xs.clone();
    z_values
        .iter()
        .map(|&z| {
            let mut pts = Array2::zeros((grid_res * grid_res, dim));
            for (j, &y) in ys.iter().enumerate() {
                for (i, &x) in xs.iter().enumerate() {
                    let r = j * grid_res + i;
                    pts[[r, 0]] = x;
                    pts[[r, 1]] = y;
                    pts[[r, 2]] = z;
                }
            }
            let mut sum = Array1::<f64>::zeros(pts.nrows());
            for clf in classifiers {
                for (s, p) in sum.iter_mut().zip(clf.predict_batch(pts.view())) {
                    *s += p as f64;
                }
            }
            sum /= classifiers.len() as f64;
            let freq = sum
                .into_shape_with_order((grid_res, grid_res))
                .expect("grid is square");
            Ok(BoundarySlice {
                z,
                xs: xs.clone(),
                ys: ys.clone(),
                freq,
            })
        })
        .collect()
}
