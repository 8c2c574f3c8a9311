//! The two norms the lab works with, and the small vector helpers that
//! dispatch on them (distances, ball projection, steepest-ascent directions).

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, ArrayView1, ArrayViewMut1};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Relative slack allowed before a perturbation is rescaled back onto the
/// L2 ball. Keeps an exactly-on-boundary step bit-identical.
const L2_PROJECTION_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    L2,
    Linf,
}

impl NormKind {
    pub fn norm(self, v: ArrayView1<f64>) -> f64 {
        match self {
            NormKind::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            NormKind::Linf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    pub fn norm_slice(self, v: &[f64]) -> f64 {
        self.norm(ArrayView1::from(v))
    }

    pub fn distance(self, a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
        match self {
            NormKind::L2 => a
                .iter()
                .zip(b.iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            NormKind::Linf => a
                .iter()
                .zip(b.iter())
                .fold(0.0, |m, (x, y)| m.max((x - y).abs())),
        }
    }

    /// Unit-norm steepest-ascent direction for a gradient: `g/‖g‖₂` under L2
    /// and `sign(g)` under L∞. Returns `None` for an all-zero gradient.
    pub fn ascent_direction(self, g: ArrayView1<f64>) -> Option<Array1<f64>> {
        match self {
            NormKind::L2 => {
                let n = self.norm(g);
                if n == 0.0 || !n.is_finite() {
                    None
                } else {
                    Some(g.mapv(|x| x / n))
                }
            }
            NormKind::Linf => {
                if g.iter().all(|&x| x == 0.0) {
                    None
                } else {
                    Some(g.mapv(sign))
                }
            }
        }
    }

    /// Projects a perturbation onto the closed ball of radius `eps` in place.
    pub fn project_ball(self, mut delta: ArrayViewMut1<f64>, eps: f64) {
        match self {
            NormKind::L2 => {
                let n = self.norm(delta.view());
                if n > eps * (1.0 + L2_PROJECTION_SLACK) {
                    let scale = eps / n;
                    delta.mapv_inplace(|x| x * scale);
                }
            }
            NormKind::Linf => delta.mapv_inplace(|x| x.clamp(-eps, eps)),
        }
    }

    /// Uniform sample from the ball of radius `eps` in `dim` dimensions.
    pub fn sample_ball<R: Rng + ?Sized>(self, rng: &mut R, dim: usize, eps: f64) -> Array1<f64> {
        match self {
            NormKind::L2 => {
                if dim == 0 {
                    return Array1::zeros(0);
                }
                let dir = gaussian_unit(rng, dim);
                let u: f64 = rng.random();
                let radius = eps * u.powf(1.0 / dim as f64);
                dir * radius
            }
            NormKind::Linf => Array1::from_shape_fn(dim, |_| rng.random_range(-1.0..=1.0) * eps),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NormKind::L2 => "l2",
            NormKind::Linf => "linf",
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NormKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l2" | "2" => Ok(NormKind::L2),
            "linf" | "inf" | "l_inf" => Ok(NormKind::Linf),
            other => Err(format!("unknown norm `{other}` (expected l2 or linf)")),
        }
    }
}

pub(crate) fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Uniform direction on the unit sphere in `dim` dimensions.
pub(crate) fn gaussian_unit<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Array1<f64> {
    loop {
        let v: Array1<f64> = Array1::from_shape_fn(dim, |_| rng.sample(StandardNormal));
        let n = NormKind::L2.norm(v.view());
        if n > 1e-300 {
            return v / n;
        }
    }
}

pub(crate) fn dot(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use ndarray::array;

    #[test]
    fn norms_and_distances() {
        let v = array![3.0, -4.0];
        assert_eq!(NormKind::L2.norm(v.view()), 5.0);
        assert_eq!(NormKind::Linf.norm(v.view()), 4.0);
        let z = array![0.0, 0.0];
        assert_eq!(NormKind::L2.distance(v.view(), z.view()), 5.0);
    }

    #[test]
    fn ascent_direction_zero_gradient() {
        let z = array![0.0, 0.0, 0.0];
        assert!(NormKind::L2.ascent_direction(z.view()).is_none());
        assert!(NormKind::Linf.ascent_direction(z.view()).is_none());
        let g = array![0.5, 0.0, -2.0];
        assert_eq!(
            NormKind::Linf.ascent_direction(g.view()).unwrap(),
            array![1.0, 0.0, -1.0]
        );
    }

    #[test]
    fn projection_respects_ball() {
        let mut d = array![3.0, 4.0];
        NormKind::L2.project_ball(d.view_mut(), 1.0);
        assert!((NormKind::L2.norm(d.view()) - 1.0).abs() < 1e-15);
        let mut d = array![3.0, -0.2];
        NormKind::Linf.project_ball(d.view_mut(), 0.5);
        assert_eq!(d, array![0.5, -0.2]);
    }

    #[test]
    fn ball_samples_inside() {
        let mut rng = stream_rng(7, 0);
        for norm in [NormKind::L2, NormKind::Linf] {
            for _ in 0..10_000 {
                let s = norm.sample_ball(&mut rng, 5, 0.3);
                assert!(norm.norm(s.view()) <= 0.3 + 1e-12);
            }
        }
    }

    #[test]
    fn parse_round_trip() {
        for n in [NormKind::L2, NormKind::Linf] {
            assert_eq!(n.to_string().parse::<NormKind>().unwrap(), n);
        }
        assert!("l1".parse::<NormKind>().is_err());
    }
}
