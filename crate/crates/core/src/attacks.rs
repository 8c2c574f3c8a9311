//! Adversarial example generation.
//!
//! Gradient attacks keep the perturbation `δ = x̂ − x` as state, take a step
//! along the norm's ascent direction of the loss gradient and project `δ`
//! back onto the ε-ball. With `clip`, every iterate is also clamped to a box.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Zip};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::Classifier;
use crate::error::{Error, Result};
use crate::knn::NnIndex;
use crate::mlp::{MlpModel, PgdConfig};
use crate::norm::NormKind;
use crate::rng::stream_rng;

pub const DEFAULT_STEP: f64 = 0.05;
pub const DEFAULT_ITERS: usize = 30;
pub const NN_WALK_K: usize = 10;
pub const NN_WALK_ITERS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackMethod {
    Fgsm,
    Bim,
    Pgd,
    GradientFreeProjection,
    NnWalk,
}

impl AttackMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            AttackMethod::Fgsm => "fgsm",
            AttackMethod::Bim => "bim",
            AttackMethod::Pgd => "pgd",
            AttackMethod::GradientFreeProjection => "gradient_free",
            AttackMethod::NnWalk => "nn_walk",
        }
    }
}

impl std::str::FromStr for AttackMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "fgsm" => Ok(AttackMethod::Fgsm),
            "bim" => Ok(AttackMethod::Bim),
            "pgd" => Ok(AttackMethod::Pgd),
            "gradient_free" | "gradient_free_projection" | "projection" => {
                Ok(AttackMethod::GradientFreeProjection)
            }
            "nn_walk" | "nnwalk" => Ok(AttackMethod::NnWalk),
            other => Err(Error::arg("method", format!("unknown attack `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub method: AttackMethod,
    pub eps: f64,
    pub norm: NormKind,
    pub step: f64,
    pub iters: usize,
    pub seed: u64,
    /// PGD only.
    #[serde(default)]
    pub random_start: bool,
    /// Neighbour count for the nearest-neighbour walk.
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip: Option<(f64, f64)>,
}

fn default_k() -> usize {
    NN_WALK_K
}

impl AttackConfig {
    /// Method defaults: 30 steps of 0.05 for BIM/PGD, 50 steps of ε/10 with
    /// k = 10 for the nearest-neighbour walk.
    pub fn new(method: AttackMethod, eps: f64, norm: NormKind) -> Self {
        let (step, iters) = match method {
            AttackMethod::Fgsm => (eps, 1),
            AttackMethod::NnWalk => (eps / 10.0, NN_WALK_ITERS),
            _ => (DEFAULT_STEP, DEFAULT_ITERS),
        };
        AttackConfig {
            method,
            eps,
            norm,
            step,
            iters,
            seed: 0,
            random_start: method == AttackMethod::Pgd,
            k: NN_WALK_K,
            clip: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::arg(
                "eps",
                format!("must be non-negative, got {}", self.eps),
            ));
        }
        let iterative = matches!(
            self.method,
            AttackMethod::Bim | AttackMethod::Pgd | AttackMethod::NnWalk
        );
        if iterative && self.iters < 1 {
            return Err(Error::arg("iters", "must be at least 1"));
        }
        if iterative && !(self.step > 0.0) && self.eps > 0.0 {
            return Err(Error::arg(
                "step",
                format!("must be positive, got {}", self.step),
            ));
        }
        Ok(())
    }

    pub fn pgd(&self) -> PgdConfig {
        PgdConfig {
            eps: self.eps,
            step: self.step,
            iters: self.iters,
            norm: self.norm,
            random_start: self.random_start,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub adversarial_points: Array2<f64>,
    /// Prediction at the adversarial point differs from the true label.
    pub success_mask: Vec<bool>,
    pub perturbation_norms: Vec<f64>,
    /// Gradient attacks: a zero gradient was met. Gradient-free projection:
    /// no label-changing point was found.
    pub flagged: Vec<bool>,
}

impl AttackOutcome {
    pub fn len(&self) -> usize {
        self.success_mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.success_mask.is_empty()
    }

    pub fn success_count(&self) -> usize {
        self.success_mask.iter().filter(|&&s| s).count()
    }

    pub fn success_rate(&self) -> f64 {
        self.success_count() as f64 / self.len().max(1) as f64
    }

    /// Fraction of rows still classified correctly.
    pub fn robust_accuracy(&self) -> f64 {
        1.0 - self.success_rate()
    }

    /// Rows whose perturbation exceeds `eps + 1e-9`.
    pub fn ball_violations(&self, eps: f64) -> usize {
        self.perturbation_norms
            .iter()
            .filter(|&&n| n > eps + 1e-9)
            .count()
    }
}

fn check_inputs(points: ArrayView2<f64>, labels: &[usize], dim: usize) -> Result<()> {
    if points.nrows() != labels.len() {
        return Err(Error::CountMismatch {
            images: points.nrows(),
            labels: labels.len(),
        });
    }
    if points.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: points.ncols(),
        });
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::arg(
            "eps",
            format!("must be non-negative, got {eps}"),
        ));
    }
    Ok(())
}

fn clamp_row(mut row: ndarray::ArrayViewMut1<f64>, clip: Option<(f64, f64)>) {
    if let Some((lo, hi)) = clip {
        row.mapv_inplace(|v| v.clamp(lo, hi));
    }
}

fn outcome<C: Classifier + ?Sized>(
    clf: &C,
    x: ArrayView2<f64>,
    adv: Array2<f64>,
    labels: &[usize],
    norm: NormKind,
    flagged: Vec<bool>,
) -> AttackOutcome {
    let preds = clf.predict_batch(adv.view());
    let success_mask = preds.iter().zip(labels).map(|(p, l)| p != l).collect();
    let perturbation_norms = adv
        .rows()
        .into_iter()
        .zip(x.rows())
        .map(|(a, b)| norm.distance(a, b))
        .collect();
    AttackOutcome {
        adversarial_points: adv,
        success_mask,
        perturbation_norms,
        flagged,
    }
}

/// Runs `iters` projected ascent steps from `x + start`; returns the iterates
/// and which rows met a zero gradient.
fn projected_ascent(
    model: &MlpModel,
    x: ArrayView2<f64>,
    labels: &[usize],
    cfg: &PgdConfig,
    start: Option<Array2<f64>>,
    clip: Option<(f64, f64)>,
) -> (Array2<f64>, Vec<bool>) {
    let mut adv = x.to_owned();
    if let Some(s) = start {
        adv += &s;
        for row in adv.rows_mut() {
            clamp_row(row, clip);
        }
    }
    let mut flagged = vec![false; x.nrows()];
    let mut delta = Array1::zeros(x.ncols());
    for _ in 0..cfg.iters {
        let grads = model.input_gradients_unchecked(adv.view(), labels);
        for (i, (mut a, g)) in adv.rows_mut().into_iter().zip(grads.rows()).enumerate() {
            let Some(dir) = cfg.norm.ascent_direction(g) else {
                flagged[i] = true;
                continue;
            };
            let x0 = x.row(i);
            Zip::from(&mut delta)
                .and(&a)
                .and(&x0)
                .for_each(|d, &ai, &xi| *d = ai - xi);
            delta.scaled_add(cfg.step, &dir);
            cfg.norm.project_ball(delta.view_mut(), cfg.eps);
            Zip::from(&mut a)
                .and(&x0)
                .and(&delta)
                .for_each(|ai, &xi, &d| *ai = xi + d);
            clamp_row(a, clip);
        }
    }
    (adv, flagged)
}

/// Fast gradient sign method: one full step of size ε along the ascent
/// direction (sign for L∞, unit gradient for L2). Zero-gradient rows stay put
/// and are flagged.
pub fn fgsm(
    model: &MlpModel,
    points: ArrayView2<f64>,
    labels: &[usize],
    eps: f64,
    norm: NormKind,
) -> Result<AttackOutcome> {
    fgsm_clipped(model, points, labels, eps, norm, None)
}

pub fn fgsm_clipped(
    model: &MlpModel,
    points: ArrayView2<f64>,
    labels: &[usize],
    eps: f64,
    norm: NormKind,
    clip: Option<(f64, f64)>,
) -> Result<AttackOutcome> {
    check_eps(eps)?;
    check_inputs(points, labels, model.input_dim())?;
    let grads = model.input_gradients(points, labels)?;
    let mut adv = points.to_owned();
    let mut flagged = vec![false; points.nrows()];
    for (i, (mut a, g)) in adv.rows_mut().into_iter().zip(grads.rows()).enumerate() {
        match norm.ascent_direction(g) {
            Some(dir) => {
                a.scaled_add(eps, &dir);
                clamp_row(a, clip);
            }
            None => flagged[i] = true,
        }
    }
    Ok(outcome(model, points, adv, labels, norm, flagged))
}

/// Basic iterative method: `iters` steps of size `step`, each re-projected
/// onto the ε-ball around the original point.
pub fn bim(
    model: &MlpModel,
    points: ArrayView2<f64>,
    labels: &[usize],
    eps: f64,
    norm: NormKind,
    step: f64,
    iters: usize,
) -> Result<AttackOutcome> {
    let cfg = PgdConfig {
        eps,
        step,
        iters,
        norm,
        random_start: false,
    };
    pgd_clipped(model, points, labels, &cfg, 0, None)
}

/// BIM with an optional uniform random start inside the ε-ball. Row `i`
/// draws its start from stream `i` of `seed`.
pub fn pgd(
    model: &MlpModel,
    points: ArrayView2<f64>,
    labels: &[usize],
    cfg: &PgdConfig,
    seed: u64,
) -> Result<AttackOutcome> {
    pgd_clipped(model, points, labels, cfg, seed, None)
}

pub fn pgd_clipped(
    model: &MlpModel,
    points: ArrayView2<f64>,
    labels: &[usize],
    cfg: &PgdConfig,
    seed: u64,
    clip: Option<(f64, f64)>,
) -> Result<AttackOutcome> {
    cfg.validate()?;
    check_inputs(points, labels, model.input_dim())?;
    model.validate_batch(points, labels)?;
    let start = cfg
        .random_start
        .then(|| random_starts(points.nrows(), points.ncols(), cfg, seed));
    let (adv, flagged) = projected_ascent(model, points, labels, cfg, start, clip);
    Ok(outcome(model, points, adv, labels, cfg.norm, flagged))
}

/// Uniform draws from the ε-ball, one stream per row.
pub fn random_starts(n: usize, dim: usize, cfg: &PgdConfig, seed: u64) -> Array2<f64> {
    let mut out = Array2::zeros((n, dim));
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        let mut rng = stream_rng(seed, i as u64);
        row.assign(&cfg.norm.sample_ball(&mut rng, dim, cfg.eps));
    }
    out
}

/// PGD iterates only, for adversarial training. Inputs are assumed valid.
pub fn pgd_points(
    model: &MlpModel,
    points: ArrayView2<f64>,
    labels: &[usize],
    cfg: &PgdConfig,
    seed: u64,
    clip: Option<(f64, f64)>,
) -> Array2<f64> {
    let start = cfg
        .random_start
        .then(|| random_starts(points.nrows(), points.ncols(), cfg, seed));
    projected_ascent(model, points, labels, cfg, start, clip).0
}

/// Projects `v` onto the boundary of the radius-`r` ball.
///
/// L2 rescales radially. L∞ clamps each coordinate to `[−r, r]` when
/// `‖v‖∞ >= r`; shorter vectors are scaled out to `‖v‖∞ = r` so the result
/// always lies on the boundary.
pub fn project_to_sphere(v: ArrayView1<f64>, r: f64, norm: NormKind) -> Array1<f64> {
    match norm {
        NormKind::L2 => {
            let n = NormKind::L2.norm(v);
            v.mapv(|x| r * (x / n))
        }
        NormKind::Linf => {
            let n = NormKind::Linf.norm(v);
            if n >= r {
                v.mapv(|x| x.clamp(-r, r))
            } else {
                v.mapv(|x| r * (x / n))
            }
        }
    }
}

/// Gradient-free attack: for each test point `x`, every other test point `y`
/// is projected onto the boundary of `B(x, r)`; the first projection (in index
/// order) whose prediction differs from the prediction at `x` is returned.
/// Exact duplicates of `x` are skipped.
pub fn gradient_free_projection<C: Classifier + ?Sized>(
    oracle: &C,
    points: ArrayView2<f64>,
    labels: &[usize],
    r: f64,
    norm: NormKind,
) -> Result<AttackOutcome> {
    check_eps(r)?;
    check_inputs(points, labels, points.ncols())?;
    if points.nrows() == 0 {
        return Err(Error::Empty("test set"));
    }
    let preds = oracle.predict_batch(points);
    let rows: Vec<(Array1<f64>, bool)> = (0..points.nrows())
        .into_par_iter()
        .map(|i| {
            let x = points.row(i);
            for (j, y) in points.rows().into_iter().enumerate() {
                if j == i {
                    continue;
                }
                let v = &y - &x;
                if v.iter().all(|&c| c == 0.0) {
                    continue;
                }
                let eta = project_to_sphere(v.view(), r, norm);
                if oracle.predict((&x + &eta).view()) != preds[i] {
                    return (eta, true);
                }
            }
            (Array1::zeros(x.len()), false)
        })
        .collect();
    let mut adv = points.to_owned();
    let mut norms = Vec::with_capacity(rows.len());
    let mut flagged = Vec::with_capacity(rows.len());
    for ((mut a, (eta, found)), x) in adv.rows_mut().into_iter().zip(&rows).zip(points.rows()) {
        Zip::from(&mut a)
            .and(&x)
            .and(eta)
            .for_each(|ai, &xi, &e| *ai = xi + e);
        norms.push(norm.norm(eta.view()));
        flagged.push(!found);
    }
    let preds_adv = oracle.predict_batch(adv.view());
    let success_mask = preds_adv.iter().zip(labels).map(|(p, l)| p != l).collect();
    Ok(AttackOutcome {
        adversarial_points: adv,
        success_mask,
        perturbation_norms: norms,
        flagged,
    })
}

/// Walks `point` away from its true-class neighbours and toward the others.
/// Returns the final iterate and whether it is misclassified.
#[allow(clippy::too_many_arguments)]
pub fn nn_walk_attack(
    index: &NnIndex,
    point: ArrayView1<f64>,
    label: usize,
    eps: f64,
    norm: NormKind,
    step: f64,
    iters: usize,
    k: usize,
    clip: Option<(f64, f64)>,
) -> Result<(Array1<f64>, bool)> {
    check_eps(eps)?;
    if k < 2 {
        return Err(Error::arg("k", "need at least 2 neighbours"));
    }
    if k > index.len() {
        return Err(Error::arg(
            "k",
            format!("{k} exceeds training set size {}", index.len()),
        ));
    }
    let x0 = point.to_owned();
    let mut cur = x0.clone();
    if index.classify(cur.view())?.0 != label {
        return Ok((cur, true));
    }
    let dim = x0.len();
    for _ in 0..iters {
        let neighbors = index.k_nearest(cur.view(), k)?;
        let (mut same, mut other) = (Array1::<f64>::zeros(dim), Array1::<f64>::zeros(dim));
        let (mut n_same, mut n_other) = (0usize, 0usize);
        for nb in &neighbors {
            let row = index.points().row(nb.index);
            if nb.label == label {
                same += &row;
                n_same += 1;
            } else {
                other += &row;
                n_other += 1;
            }
        }
        let raw = match (n_same, n_other) {
            (0, _) => &(other / n_other as f64) - &cur,
            (_, 0) => &cur - &(same / n_same as f64),
            _ => &(other / n_other as f64) - &(same / n_same as f64),
        };
        let Some(dir) = norm.ascent_direction(raw.view()) else {
            break;
        };
        let mut delta = &cur - &x0;
        delta.scaled_add(step, &dir);
        norm.project_ball(delta.view_mut(), eps);
        cur = &x0 + &delta;
        clamp_row(cur.view_mut(), clip);
        if index.classify(cur.view())?.0 != label {
            return Ok((cur, true));
        }
    }
    Ok((cur, false))
}

/// Nearest-neighbour walk over every row, in parallel.
pub fn nn_walk_batch(
    index: &NnIndex,
    points: ArrayView2<f64>,
    labels: &[usize],
    cfg: &AttackConfig,
) -> Result<AttackOutcome> {
    cfg.validate()?;
    check_inputs(points, labels, index.dim())?;
    let rows: Vec<(Array1<f64>, bool)> = (0..points.nrows())
        .into_par_iter()
        .map(|i| {
            nn_walk_attack(
                index,
                points.row(i),
                labels[i],
                cfg.eps,
                cfg.norm,
                cfg.step,
                cfg.iters,
                cfg.k,
                cfg.clip,
            )
        })
        .collect::<Result<_>>()?;
    let mut adv = Array2::zeros(points.raw_dim());
    let mut success_mask = Vec::with_capacity(rows.len());
    for (mut a, (p, s)) in adv.rows_mut().into_iter().zip(rows) {
        a.assign(&p);
        success_mask.push(s);
    }
    let perturbation_norms = adv
        .rows()
        .into_iter()
        .zip(points.rows())
        .map(|(a, b)| cfg.norm.distance(a, b))
        .collect();
    Ok(AttackOutcome {
        adversarial_points: adv,
        success_mask,
        perturbation_norms,
        flagged: vec![false; points.nrows()],
    })
}

/// Dispatches a gradient attack on `model` according to `cfg.method`.
pub fn run_gradient_attack(
    model: &MlpModel,
    points: ArrayView2<f64>,
    labels: &[usize],
    cfg: &AttackConfig,
) -> Result<AttackOutcome> {
    cfg.validate()?;
    match cfg.method {
        AttackMethod::Fgsm => fgsm_clipped(model, points, labels, cfg.eps, cfg.norm, cfg.clip),
        AttackMethod::Bim => {
            let p = PgdConfig {
                random_start: false,
                ..cfg.pgd()
            };
            pgd_clipped(model, points, labels, &p, cfg.seed, cfg.clip)
        }
        AttackMethod::Pgd => pgd_clipped(model, points, labels, &cfg.pgd(), cfg.seed, cfg.clip),
        AttackMethod::GradientFreeProjection => {
            gradient_free_projection(model, points, labels, cfg.eps, cfg.norm)
        }
        AttackMethod::NnWalk => Err(Error::Unsupported(
            "the nearest-neighbour walk needs an NnIndex".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knn::Acceleration;
    use crate::mlp::Dense;
    use ndarray::array;

    /// logits = [0, w·x]: class 1 when w·x > 0.
    fn linear(w: &[f64]) -> MlpModel {
        let d = w.len();
        let mut wm = Array2::zeros((d, 2));
        for (i, &v) in w.iter().enumerate() {
            wm[[i, 1]] = v;
        }
        // Identity hidden layer on a shifted input keeps the ReLU inactive-free.
        let hidden = Dense {
            weights: Array2::eye(d),
            bias: Array1::from_elem(d, 100.0),
        };
        let mut out = Dense {
            weights: wm,
            bias: Array1::zeros(2),
        };
        out.bias[1] = -100.0 * w.iter().sum::<f64>();
        MlpModel::from_layers(vec![hidden, out]).unwrap()
    }

    #[test]
    fn fgsm_one_dimensional() {
        let m = linear(&[2.0]);
        // Label 0 at x = −1: loss rises with x, so FGSM moves right.
        let out = fgsm(&m, array![[-1.0]].view(), &[0], 0.5, NormKind::Linf).unwrap();
        assert_eq!(out.adversarial_points, array![[-0.5]]);
        let out = fgsm(&m, array![[-1.0]].view(), &[0], 1.5, NormKind::L2).unwrap();
        assert_eq!(out.adversarial_points, array![[0.5]]);
        assert!(out.success_mask[0]);
    }

    #[test]
    fn eps_zero_is_identity() {
        let m = linear(&[1.0, -1.0]);
        let x = array![[1.0, 0.0], [0.0, 1.0]];
        let out = fgsm(&m, x.view(), &[1, 1], 0.0, NormKind::L2).unwrap();
        assert_eq!(out.adversarial_points, x);
        assert_eq!(out.success_mask, vec![false, true]);
    }

    #[test]
    fn zero_gradient_rows_flagged() {
        let m = MlpModel::zeros(&[2, 3, 2]).unwrap();
        let x = array![[1.0, 2.0]];
        let out = fgsm(&m, x.view(), &[0], 0.3, NormKind::L2).unwrap();
        assert!(out.flagged[0]);
        assert_eq!(out.adversarial_points, x);
    }

    #[test]
    fn bim_single_step_matches_fgsm() {
        let m = MlpModel::new(&[3, 8, 2], 4).unwrap();
        let x = array![[0.3, -0.2, 1.0], [1.5, 0.1, -0.7]];
        for norm in [NormKind::L2, NormKind::Linf] {
            let a = fgsm(&m, x.view(), &[0, 1], 0.4, norm).unwrap();
            let b = bim(&m, x.view(), &[0, 1], 0.4, norm, 0.4, 1).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn projection_lands_on_boundary() {
        let v = array![0.5, -0.25];
        assert_eq!(
            NormKind::Linf.norm(project_to_sphere(v.view(), 2.0, NormKind::Linf).view()),
            2.0
        );
        assert_eq!(
            project_to_sphere(array![3.0, -0.5].view(), 1.0, NormKind::Linf),
            array![1.0, -0.5]
        );
        let p = project_to_sphere(array![3.0, 4.0].view(), 1.0, NormKind::L2);
        assert!((NormKind::L2.norm(p.view()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gradient_free_radius_zero() {
        let oracle = |x: ArrayView1<f64>| usize::from(x[0] > 0.0);
        let x = array![[-1.0, 0.0], [1.0, 0.0], [-1.0, 0.0]];
        let out =
            gradient_free_projection(&oracle, x.view(), &[0, 1, 0], 0.0, NormKind::L2).unwrap();
        assert!(out.perturbation_norms.iter().all(|&n| n == 0.0));
        assert_eq!(out.success_count(), 0);
        let out =
            gradient_free_projection(&oracle, x.view(), &[0, 1, 0], 1.5, NormKind::L2).unwrap();
        assert_eq!(out.success_count(), 3);
        assert!(out
            .perturbation_norms
            .iter()
            .all(|&n| (n - 1.5).abs() < 1e-12));
    }

    #[test]
    fn nn_walk_moves_toward_other_class() {
        let index = NnIndex::new(
            array![[0.0], [2.0]],
            vec![0, 1],
            NormKind::L2,
            Acceleration::BruteForce,
        )
        .unwrap();
        let (p, ok) = nn_walk_attack(
            &index,
            array![0.2].view(),
            0,
            0.5,
            NormKind::L2,
            0.1,
            3,
            2,
            None,
        )
        .unwrap();
        assert!(!ok);
        assert!((p[0] - 0.5).abs() < 1e-12);
        let (p, ok) = nn_walk_attack(
            &index,
            array![0.2].view(),
            0,
            1.0,
            NormKind::L2,
            0.1,
            50,
            2,
            None,
        )
        .unwrap();
        assert!(ok);
        assert!(p[0] > 1.0 && p[0] <= 1.2 + 1e-12);
        let (p, ok) = nn_walk_attack(
            &index,
            array![1.8].view(),
            0,
            1.0,
            NormKind::L2,
            0.1,
            5,
            2,
            None,
        )
        .unwrap();
        assert!(ok);
        assert_eq!(p, array![1.8]);
        assert!(nn_walk_attack(
            &index,
            array![0.0].view(),
            0,
            1.0,
            NormKind::L2,
            0.1,
            5,
            3,
            None
        )
        .is_err());
    }
}
