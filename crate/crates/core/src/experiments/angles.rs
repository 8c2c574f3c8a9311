use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::fgsm;
use crate::error::{Error, Result};
use crate::experiments::codim::{train_job, CodimSweepConfig, SweepDataset};
use crate::experiments::report::{ExperimentReport, FailedJob, ResultRow};
use crate::mlp::Optimizer;
use crate::norm::NormKind;

pub const ANGLE_BINS: usize = 18;
pub const ANGLE_BIN_WIDTH: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleConfig {
    pub codims: Vec<usize>,
    pub seeds: Vec<u64>,
    pub n_per_class: usize,
    pub n_test_per_class: usize,
    pub eps: f64,
    pub optimizer: Optimizer,
    pub epochs: usize,
}

impl Default for AngleConfig {
    fn default() -> Self {
        AngleConfig {
            codims: vec![1, 10, 100, 500],
            seeds: (0..20).collect(),
            n_per_class: 1000,
            n_test_per_class: 500,
            eps: 1.0,
            optimizer: Optimizer::adam(),
            epochs: 250,
        }
    }
}

/// Fractions of angles (degrees, in `[0, 90]`) per 5° bin; 90° joins the last bin.
pub fn angle_histogram(angles: &[f64]) -> [f64; ANGLE_BINS] {
    let mut h = [0.0; ANGLE_BINS];
    if angles.is_empty() {
        return h;
    }
    for &a in angles {
        let bin = ((a / ANGLE_BIN_WIDTH).floor().max(0.0) as usize).min(ANGLE_BINS - 1);
        h[bin] += 1.0;
    }
    let n = angles.len() as f64;
    h.iter_mut().for_each(|v| *v /= n);
    h
}

/// Fraction of angles strictly below `limit` degrees.
pub fn fraction_below(angles: &[f64], limit: f64) -> f64 {
    angles.iter().filter(|&&a| a < limit).count() as f64 / angles.len().max(1) as f64
}

/// Angles between FGSM perturbations and the normal space at each test point.
pub fn fgsm_normal_angles(cfg: &AngleConfig, codim: usize, seed: u64) -> Result<Vec<f64>> {
    let sweep = CodimSweepConfig {
        dataset: SweepDataset::Circles {
            n_per_class: cfg.n_per_class,
            n_test_per_class: cfg.n_test_per_class,
        },
        codims: vec![codim],
        optimizer: cfg.optimizer,
        epochs: cfg.epochs,
        seeds: vec![seed],
        ..CodimSweepConfig::circles_natural()
    };
    let split = sweep.dataset.build(codim, false, seed)?;
    let model = train_job(&sweep, &split, seed)?;
    let test = &split.test;
    let out = fgsm(
        &model,
        test.points.view(),
        &test.labels,
        cfg.eps,
        NormKind::L2,
    )?;
    let mut angles = Vec::with_capacity(test.len());
    for (i, (adv, x)) in out
        .adversarial_points
        .rows()
        .into_iter()
        .zip(test.points.rows())
        .enumerate()
    {
        if out.flagged[i] {
            continue;
        }
        angles.push(test.spec.normal_space_angle((&adv - &x).view(), x)?);
    }
    Ok(angles)
}

/// 5° histograms of FGSM perturbation angles to the normal space per codimension.
pub fn run_angle_histogram(cfg: &AngleConfig) -> Result<ExperimentReport> {
    if cfg.codims.is_empty() || cfg.seeds.is_empty() {
        return Err(Error::arg(
            "codims",
            "need at least one codimension and one seed",
        ));
    }
    let start = Instant::now();
    let jobs: Vec<(usize, u64)> = cfg
        .codims
        .iter()
        .flat_map(|&c| cfg.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let outs: Vec<_> = jobs
        .par_iter()
        .map(|&(c, s)| ((c, s), fgsm_normal_angles(cfg, c, s)))
        .collect();
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for ((codim, seed), out) in outs {
        let angles = match out {
            Ok(a) => a,
            Err(e @ Error::Divergence { .. }) => {
                failures.push(FailedJob {
                    codim,
                    seed,
                    reason: e.to_string(),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let dim = codim + 1;
        let mk = |metric: String, value: f64| ResultRow {
            seed,
            codim,
            dim,
            eps: cfg.eps,
            metric,
            value,
        };
        for (b, frac) in angle_histogram(&angles).iter().enumerate() {
            results.push(mk(format!("angle_bin_{:02}", b), *frac));
        }
        results.push(mk("frac_below_10deg".into(), fraction_below(&angles, 10.0)));
        results.push(mk("frac_below_20deg".into(), fraction_below(&angles, 20.0)));
        results.push(mk("n_angles".into(), angles.len() as f64));
    }
    ExperimentReport::new(
        "angles",
        cfg,
        results,
        failures,
        start.elapsed().as_secs_f64(),
    )
}
