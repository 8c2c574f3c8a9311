//! Closed-form sampling, coverage and capacity bounds.
//!
//! Every Γ-bearing bound is evaluated in log space; [`BoundResult::value`] is
//! `exp(log_value)` and becomes `+inf` (or `0`) only when that overflows.
//! Values are reported raw, vacuous or not.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use ndarray::{Array1, ArrayView1};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::geometry::ManifoldSpec;
use crate::norm::NormKind;
use crate::rng::stream_rng;

/// Guard band for `arccos` arguments.
pub const ARCCOS_GUARD: f64 = 1e-12;

/// Points drawn per Monte Carlo block; each block owns one RNG stream.
pub const MC_BLOCK: usize = 4096;

pub const DEFAULT_N_MC: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaId {
    CoverageRatio,
    PlaneCoverage,
    TubeCoverSamples,
    SphereCoverage,
    LinearRegions,
}

impl FormulaId {
    pub fn as_str(self) -> &'static str {
        match self {
            FormulaId::CoverageRatio => "coverage_ratio",
            FormulaId::PlaneCoverage => "plane_coverage",
            FormulaId::TubeCoverSamples => "tube_cover_samples",
            FormulaId::SphereCoverage => "sphere_coverage",
            FormulaId::LinearRegions => "linear_regions",
        }
    }
}

impl std::fmt::Display for FormulaId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub value: f64,
    /// Natural log of the bound.
    pub log_value: f64,
    pub formula_id: FormulaId,
    pub inputs: BTreeMap<String, f64>,
}

impl BoundResult {
    fn from_log(log_value: f64, formula_id: FormulaId, inputs: &[(&str, f64)]) -> Self {
        BoundResult {
            value: log_value.exp(),
            log_value,
            formula_id,
            inputs: inputs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }
}

/// `ln Γ(a + h) − ln Γ(a)`. Integer shifts are summed exactly; half-integer
/// shifts are reduced to a single half step first.
pub fn ln_gamma_ratio(a: f64, h: f64) -> f64 {
    let twice = 2.0 * h;
    if h >= 0.0 && twice.fract() == 0.0 && twice <= 2e6 {
        let whole = h.floor();
        let (mut acc, start) = if h - whole > 0.0 {
            (ln_gamma(a + 0.5) - ln_gamma(a), a + 0.5)
        } else {
            (0.0, a)
        };
        let mut x = start;
        for _ in 0..whole as usize {
            acc += x.ln();
            x += 1.0;
        }
        acc
    } else {
        ln_gamma(a + h) - ln_gamma(a)
    }
}

fn check_codim(k: usize, d: usize) -> Result<()> {
    if k < 1 {
        return Err(Error::arg("k", "intrinsic dimension must be at least 1"));
    }
    if k >= d {
        return Err(Error::arg("k", format!("need k < d, got k = {k}, d = {d}")));
    }
    Ok(())
}

/// `ln[π^{k/2} Γ((d−k)/2+1) / Γ(d/2+1)]`: log volume ratio of a k-ball times
/// a (d−k)-ball to a d-ball, all of unit radius.
fn ln_ball_ratio(k: usize, d: usize) -> f64 {
    let (k, d) = (k as f64, d as f64);
    0.5 * k * PI.ln() - ln_gamma_ratio((d - k) / 2.0 + 1.0, k / 2.0)
}

/// Half-width of the L∞ decision axis along a pole, for spheres of radii
/// `r1 < r2` and sphere dimension `d`.
pub fn linf_axis_offset(r1: f64, r2: f64, d: usize) -> Result<f64> {
    if !(r1 > 0.0 && r1 < r2) {
        return Err(Error::arg(
            "r1",
            format!("need 0 < r1 < r2, got r1 = {r1}, r2 = {r2}"),
        ));
    }
    if d < 1 {
        return Err(Error::arg("d", "sphere dimension must be at least 1"));
    }
    let df = d as f64;
    let root = (r1 * r1 + 3.0 * r2 * r2 + df * (r2 * r2 - r1 * r1)).sqrt();
    Ok((-2.0 * r1 + root) / (df + 3.0))
}

fn check_eps_rch(rch: f64, eps: f64) -> Result<()> {
    if !(rch > 0.0) {
        return Err(Error::arg(
            "rch",
            format!("reach must be positive, got {rch}"),
        ));
    }
    if !(eps >= 0.0) {
        return Err(Error::arg(
            "eps",
            format!("must be non-negative, got {eps}"),
        ));
    }
    if eps >= rch {
        return Err(Error::Divergent(format!(
            "eps = {eps} >= rch = {rch}: no robust classifier is guaranteed"
        )));
    }
    Ok(())
}

/// Cover radius sufficient for the nearest-neighbour classifier: `2(rch − ε)`.
pub fn nn_cover_bound(rch: f64, eps: f64) -> Result<f64> {
    check_eps_rch(rch, eps)?;
    Ok(2.0 * (rch - eps))
}

/// Cover radius sufficient for the ball-based learner: `rch − ε`.
pub fn l_cover_bound(rch: f64, eps: f64) -> Result<f64> {
    check_eps_rch(rch, eps)?;
    Ok(rch - eps)
}

/// Nearest-neighbour cover radius when samples carry noise up to `tau`.
pub fn nn_noise_cover_bound(rch: f64, eps: f64, tau: f64) -> Result<f64> {
    check_eps_rch(rch, eps)?;
    if !(tau >= 0.0 && tau < rch) {
        return Err(Error::arg(
            "tau",
            format!("need 0 <= tau < rch, got tau = {tau}, rch = {rch}"),
        ));
    }
    let bound = 2.0 * (rch - eps) - tau;
    if bound <= 0.0 {
        return Err(Error::Divergent(format!(
            "2(rch − eps) − tau = {bound} <= 0: noise leaves no admissible cover radius"
        )));
    }
    Ok(bound)
}

/// Ratio between the sample counts of the two learners, `2^k (1+ε)^{−k/2}`.
pub fn sampling_gap_ratio(k: usize, eps: f64) -> f64 {
    let k = k as f64;
    let ratio = (k * 2f64.ln() - 0.5 * k * (1.0 + eps).ln()).exp();
    debug_assert!(
        !(0.0..=1.0).contains(&eps) || ratio >= 2f64.powf(k / 2.0) * (1.0 - 1e-12),
        "gap ratio fell below 2^(k/2)"
    );
    ratio
}

/// Upper bound on the fraction of `M^ε` covered by `X^ε` for `n_samples`
/// points on a k-manifold of volume `vol_k_manifold` in R^d.
pub fn coverage_ratio_bound(
    k: usize,
    d: usize,
    eps: f64,
    vol_k_manifold: f64,
    n_samples: u64,
) -> Result<BoundResult> {
    check_codim(k, d)?;
    if !(eps > 0.0) {
        return Err(Error::arg("eps", format!("must be positive, got {eps}")));
    }
    if !(vol_k_manifold > 0.0) {
        return Err(Error::arg("vol_k_manifold", "must be positive"));
    }
    let log =
        ln_ball_ratio(k, d) + k as f64 * eps.ln() + (n_samples as f64).ln() - vol_k_manifold.ln();
    Ok(BoundResult::from_log(
        log,
        FormulaId::CoverageRatio,
        &[
            ("k", k as f64),
            ("d", d as f64),
            ("eps", eps),
            ("vol_k", vol_k_manifold),
            ("n", n_samples as f64),
        ],
    ))
}

/// Coverage bound for a grid-sampled k-flat, where δ and the extent cancel.
pub fn plane_coverage_bound(k: usize, d: usize) -> Result<BoundResult> {
    check_codim(k, d)?;
    let kf = k as f64;
    let log = ln_ball_ratio(k, d) + kf * (kf.sqrt() / 2.0).ln();
    Ok(BoundResult::from_log(
        log,
        FormulaId::PlaneCoverage,
        &[("k", kf), ("d", d as f64)],
    ))
}

/// Samples needed to cover the 1-tube of `[lo, hi]^k` in R^d.
pub fn tube_cover_sample_lower_bound(k: usize, d: usize, lo: f64, hi: f64) -> Result<BoundResult> {
    check_codim(k, d)?;
    if !(lo < hi) {
        return Err(Error::arg("lo", format!("need lo < hi, got [{lo}, {hi}]")));
    }
    let log = -ln_ball_ratio(k, d) + k as f64 * (hi - lo).ln();
    Ok(BoundResult::from_log(
        log,
        FormulaId::TubeCoverSamples,
        &[("k", k as f64), ("d", d as f64), ("lo", lo), ("hi", hi)],
    ))
}

/// Fraction of the ε-tube of the unit (d−1)-sphere covered by `n` ε-balls:
/// `n ε^d / ((1+ε)^d − (1−ε)^d)`.
pub fn sphere_coverage_bound(n: u64, d: usize, eps: f64) -> Result<BoundResult> {
    if d < 1 {
        return Err(Error::arg("d", "must be at least 1"));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::arg("eps", format!("need 0 < eps <= 1, got {eps}")));
    }
    let df = d as f64;
    let log_hi = df * (1.0 + eps).ln();
    // (1+ε)^d − (1−ε)^d = (1+ε)^d · (1 − ((1−ε)/(1+ε))^d)
    let q = df * ((1.0 - eps) / (1.0 + eps)).ln();
    let log_den = log_hi + (-q.exp()).ln_1p();
    let log = (n as f64).ln() + df * eps.ln() - log_den;
    Ok(BoundResult::from_log(
        log,
        FormulaId::SphereCoverage,
        &[("n", n as f64), ("d", d as f64), ("eps", eps)],
    ))
}

/// Minimum number of linear segments in a robust boundary between two
/// concentric circles: `π / arccos((r1+ε)/(r2−ε))`.
pub fn segment_count_lower_bound(r1: f64, r2: f64, eps: f64) -> Result<f64> {
    if !(r1 > 0.0 && r1 < r2 && eps >= 0.0) {
        return Err(Error::arg(
            "r1",
            format!("need 0 < r1 < r2 and eps >= 0, got ({r1}, {r2}, {eps})"),
        ));
    }
    let arg = (r1 + eps) / (r2 - eps);
    if !(r2 - eps > 0.0) || !(-1.0 - ARCCOS_GUARD..1.0 - ARCCOS_GUARD).contains(&arg) {
        return Err(Error::Divergent(format!(
            "arccos argument {arg}: gap closed; bound diverges"
        )));
    }
    Ok(PI / arg.clamp(-1.0, 1.0).acos())
}

/// Lower bound on the number of linear regions of a ReLU network whose
/// boundary separates the τ-tubes of two concentric (d−1)-spheres.
pub fn linear_region_lower_bound(r1: f64, rch: f64, tau: f64, d: usize) -> Result<BoundResult> {
    if d < 2 {
        return Err(Error::arg("d", "must be at least 2"));
    }
    if !(r1 > 0.0 && rch > 0.0) {
        return Err(Error::arg("r1", "radii must be positive"));
    }
    if tau == 0.0 {
        return Err(Error::Divergent(
            "tau = 0: the region count diverges".into(),
        ));
    }
    if !(tau > 0.0 && tau <= rch) {
        return Err(Error::arg("tau", format!("need 0 < tau <= rch, got {tau}")));
    }
    let df = d as f64;
    let log = (2.0 * PI.sqrt()).ln()
        + ln_gamma_ratio(df / 2.0, 0.5)
        + 0.5 * (df - 1.0) * ((r1 + rch) / (4.0 * tau)).ln();
    Ok(BoundResult::from_log(
        log,
        FormulaId::LinearRegions,
        &[("r1", r1), ("rch", rch), ("tau", tau), ("d", df)],
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MedialProximity {
    pub t_star: f64,
    pub dist_bound: f64,
}

/// Distance from a nearest-neighbour boundary point `z` to the decision axis,
/// given a δ-cover and `d(z, M_i) = ω_i · rch`.
pub fn medial_proximity_bound(
    delta: f64,
    omega1: f64,
    omega2: f64,
    rch: f64,
) -> Result<MedialProximity> {
    if !(0.0 <= omega1 && omega1 <= omega2 && omega2 < 1.0) {
        return Err(Error::arg(
            "omega",
            format!("need 0 <= omega1 <= omega2 < 1, got ({omega1}, {omega2})"),
        ));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::arg(
            "delta",
            format!("need 0 <= delta < 1, got {delta}"),
        ));
    }
    if !(rch > 0.0) {
        return Err(Error::arg("rch", "must be positive"));
    }
    let gap = omega2 * omega2 - omega1 * omega1;
    let t_star = (delta * delta + gap + 2.0 * delta * omega2) / (1.0 + gap);
    Ok(MedialProximity {
        t_star,
        dist_bound: t_star * omega2 * rch,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    /// `1 − ½ · |A ∩ B| / |A ∪ B|`.
    pub value: f64,
    pub std_error: f64,
    pub n_mc: usize,
    pub n_union: u64,
    pub n_intersection: u64,
}

/// Best achievable accuracy under a uniform distribution on the union of the
/// two ε-tubes of `spec`, estimated by rejection sampling from their bounding box.
pub fn accuracy_upper_bound_mc(
    spec: &ManifoldSpec,
    eps: f64,
    norm: NormKind,
    n_mc: usize,
    seed: u64,
) -> Result<McEstimate> {
    if !(eps > 0.0) {
        return Err(Error::arg("eps", format!("must be positive, got {eps}")));
    }
    let bbox = spec.tube_bounding_box(eps);
    overlap_accuracy_bound_mc(
        &bbox,
        |p| spec.distance_unchecked(p, 0, norm) <= eps,
        |p| spec.distance_unchecked(p, 1, norm) <= eps,
        n_mc,
        seed,
    )
}

/// Same estimator for arbitrary membership predicates over an axis box.
pub fn overlap_accuracy_bound_mc<A, B>(
    bbox: &[(f64, f64)],
    in_a: A,
    in_b: B,
    n_mc: usize,
    seed: u64,
) -> Result<McEstimate>
where
    A: Fn(ArrayView1<f64>) -> bool + Sync,
    B: Fn(ArrayView1<f64>) -> bool + Sync,
{
    if bbox.is_empty() {
        return Err(Error::Empty("bounding box"));
    }
    let n_blocks = n_mc.div_ceil(MC_BLOCK);
    let (n_union, n_intersection) = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b as u64);
            let count = MC_BLOCK.min(n_mc - b * MC_BLOCK);
            let mut p = Array1::<f64>::zeros(bbox.len());
            let (mut u, mut i) = (0u64, 0u64);
            for _ in 0..count {
                for (x, &(lo, hi)) in p.iter_mut().zip(bbox) {
                    *x = rng.random_range(lo..=hi);
                }
                let (a, bb) = (in_a(p.view()), in_b(p.view()));
                u += u64::from(a || bb);
                i += u64::from(a && bb);
            }
            (u, i)
        })
        .reduce(|| (0, 0), |x, y| (x.0 + y.0, x.1 + y.1));
    if n_union == 0 {
        return Err(Error::Divergent(format!(
            "no Monte Carlo sample landed in the union; increase n_mc (was {n_mc})"
        )));
    }
    let p = n_intersection as f64 / n_union as f64;
    Ok(McEstimate {
        value: 1.0 - 0.5 * p,
        std_error: 0.5 * (p * (1.0 - p) / n_union as f64).sqrt(),
        n_mc,
        n_union,
        n_intersection,
    })
}
