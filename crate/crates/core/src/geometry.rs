//! Analytic class manifolds and their exact geometry.
//!
//! Two families are supported, both with two classes:
//!
//! * **Concentric spheres**: class 0 is the `sphere_dim`-sphere of radius `r1`
//!   and class 1 the sphere of radius `r2`, both centred at the origin of the
//!   subspace spanned by the first `sphere_dim + 1` axes.
//! * **Parallel flats**: bounded `flat_dim`-flats `[lo, hi]^k` in the first
//!   `k` axes. Class 0 sits at `x_d = 0` and class 1 at `x_d = separation`,
//!   where `x_d` is the last ambient axis.
//!
//! Every other coordinate is zero on the manifold (zero-padding embedding), so
//! the codimension is `ambient_dim - intrinsic_dim`. Class indices are 0-based
//! throughout the crate.

use ndarray::{s, Array1, ArrayView1};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norm::{dot, gaussian_unit, NormKind};

/// Absolute tolerance for on-manifold membership.
pub const ON_MANIFOLD_TOL: f64 = 1e-6;

pub const CLASS_COUNT: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    ConcentricSpheres {
        r1: f64,
        r2: f64,
        sphere_dim: usize,
    },
    ParallelFlats {
        lo: f64,
        hi: f64,
        flat_dim: usize,
        separation: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    pub family: Family,
    pub ambient_dim: usize,
}

/// Reach of the decision axis and codimension for a spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometrySummary {
    pub reach_l2_decision_axis: f64,
    /// Distance (L2) from the inner sphere to the L∞ decision axis at the pole.
    /// Only defined for the concentric-sphere family.
    pub reach_linf_decision_axis_l2: Option<f64>,
    pub codimension: usize,
}

impl ManifoldSpec {
    pub fn new(family: Family, ambient_dim: usize) -> Result<Self> {
        let spec = ManifoldSpec {
            family,
            ambient_dim,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn spheres(r1: f64, r2: f64, sphere_dim: usize, ambient_dim: usize) -> Result<Self> {
        Self::new(
            Family::ConcentricSpheres { r1, r2, sphere_dim },
            ambient_dim,
        )
    }

    pub fn flats(
        lo: f64,
        hi: f64,
        flat_dim: usize,
        separation: f64,
        ambient_dim: usize,
    ) -> Result<Self> {
        Self::new(
            Family::ParallelFlats {
                lo,
                hi,
                flat_dim,
                separation,
            },
            ambient_dim,
        )
    }

    /// The Circles dataset geometry: radii 1 and 3 in the x1-x2 plane.
    pub fn circles(ambient_dim: usize) -> Result<Self> {
        Self::spheres(1.0, 3.0, 1, ambient_dim)
    }

    /// The Planes dataset geometry: 2-flats over `[-10, 10]^2`, two units apart.
    pub fn planes(ambient_dim: usize) -> Result<Self> {
        Self::flats(-10.0, 10.0, 2, 2.0, ambient_dim)
    }

    pub fn validate(&self) -> Result<()> {
        match self.family {
            Family::ConcentricSpheres { r1, r2, sphere_dim } => {
                if !(r1 > 0.0 && r1 < r2 && r2.is_finite()) {
                    return Err(Error::InvalidSpec(format!(
                        "need 0 < r1 < r2, got r1={r1}, r2={r2}"
                    )));
                }
                if sphere_dim == 0 || sphere_dim + 1 > self.ambient_dim {
                    return Err(Error::InvalidSpec(format!(
                        "sphere_dim {sphere_dim} needs 1 <= sphere_dim < ambient_dim {}",
                        self.ambient_dim
                    )));
                }
            }
            Family::ParallelFlats {
                lo,
                hi,
                flat_dim,
                separation,
            } => {
                if !(lo <= hi && lo.is_finite() && hi.is_finite()) {
                    return Err(Error::InvalidSpec(format!(
                        "need lo <= hi, got [{lo}, {hi}]"
                    )));
                }
                if !(separation > 0.0 && separation.is_finite()) {
                    return Err(Error::InvalidSpec(format!(
                        "separation must be positive, got {separation}"
                    )));
                }
                if flat_dim == 0 || flat_dim + 1 > self.ambient_dim {
                    return Err(Error::InvalidSpec(format!(
                        "flat_dim {flat_dim} needs 1 <= flat_dim < ambient_dim {}",
                        self.ambient_dim
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn intrinsic_dim(&self) -> usize {
        match self.family {
            Family::ConcentricSpheres { sphere_dim, .. } => sphere_dim,
            Family::ParallelFlats { flat_dim, .. } => flat_dim,
        }
    }

    pub fn codimension(&self) -> usize {
        self.ambient_dim - self.intrinsic_dim()
    }

    /// Same family re-embedded in a different ambient dimension.
    pub fn with_ambient_dim(&self, ambient_dim: usize) -> Result<Self> {
        Self::new(self.family.clone(), ambient_dim)
    }

    /// `rch₂ Λ₂`: half the gap between the two class manifolds.
    pub fn reach_l2(&self) -> f64 {
        match self.family {
            Family::ConcentricSpheres { r1, r2, .. } => (r2 - r1) / 2.0,
            Family::ParallelFlats { separation, .. } => separation / 2.0,
        }
    }

    /// Reach of the decision axis under `norm`, where it is known in closed form.
    pub fn reach(&self, norm: NormKind) -> Result<f64> {
        match (norm, &self.family) {
            (NormKind::L2, _) => Ok(self.reach_l2()),
            (NormKind::Linf, Family::ParallelFlats { separation, .. }) => Ok(separation / 2.0),
            (NormKind::Linf, Family::ConcentricSpheres { .. }) => Err(Error::Unsupported(
                "L∞ reach of the decision axis for concentric spheres has no closed form".into(),
            )),
        }
    }

    pub fn summary(&self) -> GeometrySummary {
        let reach_linf = match self.family {
            Family::ConcentricSpheres { r1, r2, sphere_dim } => {
                crate::bounds::linf_axis_offset(r1, r2, sphere_dim).ok()
            }
            Family::ParallelFlats { .. } => None,
        };
        GeometrySummary {
            reach_l2_decision_axis: self.reach_l2(),
            reach_linf_decision_axis_l2: reach_linf,
            codimension: self.codimension(),
        }
    }

    fn check_point(&self, point: ArrayView1<f64>) -> Result<()> {
        if point.len() != self.ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim,
                actual: point.len(),
            });
        }
        Ok(())
    }

    fn check_class(class: usize) -> Result<()> {
        if class >= CLASS_COUNT {
            return Err(Error::arg(
                "class",
                format!("class index {class} out of range 0..{CLASS_COUNT}"),
            ));
        }
        Ok(())
    }

    /// Exact distance from `point` to the manifold of class `class`.
    pub fn distance_to_class(
        &self,
        point: ArrayView1<f64>,
        class: usize,
        norm: NormKind,
    ) -> Result<f64> {
        self.check_point(point)?;
        Self::check_class(class)?;
        Ok(self.distance_unchecked(point, class, norm))
    }

    pub(crate) fn distance_unchecked(
        &self,
        point: ArrayView1<f64>,
        class: usize,
        norm: NormKind,
    ) -> f64 {
        match self.family {
            Family::ConcentricSpheres { r1, r2, sphere_dim } => {
                let radius = if class == 0 { r1 } else { r2 };
                let m = sphere_dim + 1;
                let u = point.slice(s![..m]);
                let w = point.slice(s![m..]);
                match norm {
                    NormKind::L2 => {
                        let radial = NormKind::L2.norm(u) - radius;
                        let off = w.iter().map(|x| x * x).sum::<f64>();
                        (radial * radial + off).sqrt()
                    }
                    NormKind::Linf => NormKind::Linf
                        .norm(w)
                        .max(linf_distance_to_sphere(u, radius)),
                }
            }
            Family::ParallelFlats {
                lo,
                hi,
                flat_dim,
                separation,
            } => {
                let offset = if class == 0 { 0.0 } else { separation };
                let d = self.ambient_dim;
                let (head, tail) = (
                    point.slice(s![..flat_dim]),
                    point.slice(s![flat_dim..d - 1]),
                );
                let tangent = head.iter().map(|&x| x - x.clamp(lo, hi));
                let padding = tail.iter().copied();
                let last = std::iter::once(point[d - 1] - offset);
                let parts = tangent.chain(padding).chain(last);
                match norm {
                    NormKind::L2 => parts.map(|x| x * x).sum::<f64>().sqrt(),
                    NormKind::Linf => parts.fold(0.0, |m, x| m.max(x.abs())),
                }
            }
        }
    }

    pub fn in_tube(
        &self,
        point: ArrayView1<f64>,
        class: usize,
        eps: f64,
        norm: NormKind,
    ) -> Result<bool> {
        if !(eps >= 0.0) {
            return Err(Error::arg(
                "eps",
                format!("tube radius must be non-negative, got {eps}"),
            ));
        }
        Ok(self.distance_to_class(point, class, norm)? <= eps)
    }

    /// The class manifold `point` lies on (L2, within [`ON_MANIFOLD_TOL`]).
    pub fn class_of_point(&self, point: ArrayView1<f64>) -> Result<Option<usize>> {
        self.check_point(point)?;
        Ok((0..CLASS_COUNT)
            .find(|&c| self.distance_unchecked(point, c, NormKind::L2) <= ON_MANIFOLD_TOL))
    }

    pub fn is_on_class(&self, point: ArrayView1<f64>, class: usize) -> Result<bool> {
        Ok(self.distance_to_class(point, class, NormKind::L2)? <= ON_MANIFOLD_TOL)
    }

    /// Angle in degrees between `perturbation` and its orthogonal projection
    /// onto the normal space of the manifold at `base_point`.
    pub fn normal_space_angle(
        &self,
        perturbation: ArrayView1<f64>,
        base_point: ArrayView1<f64>,
    ) -> Result<f64> {
        self.check_point(base_point)?;
        self.check_point(perturbation)?;
        if perturbation.iter().all(|&x| x == 0.0) {
            return Err(Error::arg("perturbation", "zero perturbation has no angle"));
        }
        if self.class_of_point(base_point)?.is_none() {
            let distance = (0..CLASS_COUNT)
                .map(|c| self.distance_unchecked(base_point, c, NormKind::L2))
                .fold(f64::INFINITY, f64::min);
            return Err(Error::OffManifold { distance });
        }
        let (tangent, normal) = match self.family {
            Family::ConcentricSpheres { sphere_dim, .. } => {
                let m = sphere_dim + 1;
                let u = base_point.slice(s![..m]);
                let radial = &u / NormKind::L2.norm(u);
                let eta_u = perturbation.slice(s![..m]);
                let along = dot(eta_u, radial.view());
                let tangent = &eta_u - &(&radial * along);
                let off = perturbation
                    .slice(s![m..])
                    .iter()
                    .map(|x| x * x)
                    .sum::<f64>();
                (
                    NormKind::L2.norm(tangent.view()),
                    (along * along + off).sqrt(),
                )
            }
            Family::ParallelFlats { flat_dim, .. } => (
                NormKind::L2.norm(perturbation.slice(s![..flat_dim])),
                NormKind::L2.norm(perturbation.slice(s![flat_dim..])),
            ),
        };
        Ok(tangent.atan2(normal).to_degrees())
    }

    /// First index along a sampled path where `g = d(·, M0) − d(·, M1)` turns
    /// non-negative. The path must start on class 0 and end on class 1, so by
    /// the intermediate value theorem the crossing exists.
    pub fn separation_sign_change(
        &self,
        path: &[Array1<f64>],
        norm: NormKind,
    ) -> Result<Option<usize>> {
        let (first, last) = match (path.first(), path.last()) {
            (Some(f), Some(l)) if path.len() >= 2 => (f, l),
            _ => return Err(Error::arg("path", "need at least two samples")),
        };
        for p in path {
            self.check_point(p.view())?;
        }
        if !self.is_on_class(first.view(), 0)? {
            return Err(Error::OffManifold {
                distance: self.distance_unchecked(first.view(), 0, NormKind::L2),
            });
        }
        if !self.is_on_class(last.view(), 1)? {
            return Err(Error::OffManifold {
                distance: self.distance_unchecked(last.view(), 1, NormKind::L2),
            });
        }
        Ok(path.iter().position(|p| {
            self.distance_unchecked(p.view(), 0, norm) - self.distance_unchecked(p.view(), 1, norm)
                >= 0.0
        }))
    }

    /// Uniform random point on the manifold of `class`.
    pub fn sample_on_class<R: Rng + ?Sized>(&self, class: usize, rng: &mut R) -> Array1<f64> {
        let mut p = Array1::zeros(self.ambient_dim);
        match self.family {
            Family::ConcentricSpheres { r1, r2, sphere_dim } => {
                let r = if class == 0 { r1 } else { r2 };
                if sphere_dim == 1 {
                    let theta = rng.random_range(0.0..std::f64::consts::TAU);
                    p[0] = r * theta.cos();
                    p[1] = r * theta.sin();
                } else {
                    let dir = gaussian_unit(rng, sphere_dim + 1);
                    p.slice_mut(s![..sphere_dim + 1]).assign(&(dir * r));
                }
            }
            Family::ParallelFlats {
                lo,
                hi,
                flat_dim,
                separation,
            } => {
                for i in 0..flat_dim {
                    p[i] = if hi > lo {
                        rng.random_range(lo..=hi)
                    } else {
                        lo
                    };
                }
                p[self.ambient_dim - 1] = if class == 0 { 0.0 } else { separation };
            }
        }
        p
    }

    /// Manifold point of `class` plus a uniform normal-space offset of norm at
    /// most `eps`, together with the base point.
    pub fn sample_in_tube<R: Rng + ?Sized>(
        &self,
        class: usize,
        eps: f64,
        norm: NormKind,
        rng: &mut R,
    ) -> (Array1<f64>, Array1<f64>) {
        let base = self.sample_on_class(class, rng);
        let mut p = base.clone();
        match self.family {
            Family::ConcentricSpheres { sphere_dim, .. } => {
                let m = sphere_dim + 1;
                let offset = norm.sample_ball(rng, 1 + self.ambient_dim - m, eps);
                let u = base.slice(s![..m]);
                let radial = &u / NormKind::L2.norm(u);
                p.slice_mut(s![..m]).scaled_add(offset[0], &radial);
                p.slice_mut(s![m..]).assign(&offset.slice(s![1..]));
            }
            Family::ParallelFlats { flat_dim, .. } => {
                let offset = norm.sample_ball(rng, self.ambient_dim - flat_dim, eps);
                let mut tail = p.slice_mut(s![flat_dim..]);
                tail += &offset;
            }
        }
        (p, base)
    }

    /// Axis-aligned box containing both `eps`-tubes.
    pub fn tube_bounding_box(&self, eps: f64) -> Vec<(f64, f64)> {
        let d = self.ambient_dim;
        match self.family {
            Family::ConcentricSpheres { r2, sphere_dim, .. } => (0..d)
                .map(|i| {
                    if i <= sphere_dim {
                        (-r2 - eps, r2 + eps)
                    } else {
                        (-eps, eps)
                    }
                })
                .collect(),
            Family::ParallelFlats {
                lo,
                hi,
                flat_dim,
                separation,
            } => (0..d)
                .map(|i| {
                    if i < flat_dim {
                        (lo - eps, hi + eps)
                    } else if i == d - 1 {
                        (-eps, separation + eps)
                    } else {
                        (-eps, eps)
                    }
                })
                .collect(),
        }
    }
}

/// L∞ distance from `u` to the origin-centred sphere of radius `r` in the
/// same space. This is the smallest `t` for which the cube `u ± t` meets the
/// sphere, i.e. `min_cube ‖z‖₂ <= r <= max_cube ‖z‖₂`; both extremes are
/// monotone in `t` and piecewise quadratic, so the root is found exactly.
pub(crate) fn linf_distance_to_sphere(u: ArrayView1<f64>, r: f64) -> f64 {
    let m = u.len() as f64;
    let abs: Vec<f64> = u.iter().map(|x| x.abs()).collect();
    let norm_sq: f64 = abs.iter().map(|a| a * a).sum();
    if norm_sq < r * r {
        // Grow the farthest corner until it reaches the sphere:
        // m t² + 2 S t + (‖u‖² − r²) = 0.
        let s: f64 = abs.iter().sum();
        let c = norm_sq - r * r;
        // Stable form of the positive root (c < 0).
        return -c / (s + (s * s - m * c).sqrt());
    }
    // Shrink the nearest point of the cube onto the sphere:
    // Σ max(|u_i| − t, 0)² = r², with the active set the j largest |u_i|.
    let mut sorted = abs;
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for j in 1..=sorted.len() {
        let a = sorted[j - 1];
        sum += a;
        sum_sq += a * a;
        let next = sorted.get(j).copied().unwrap_or(0.0);
        let jf = j as f64;
        let disc = sum * sum - jf * (sum_sq - r * r);
        if disc < 0.0 {
            continue;
        }
        let t = (sum - disc.sqrt()) / jf;
        if t >= next - 1e-15 && t <= a + 1e-15 {
            return t.max(0.0);
        }
    }
    0.0
}
