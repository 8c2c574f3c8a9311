use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::{bim, pgd};
use crate::bounds::linf_axis_offset;
use crate::classifier::accuracy;
use crate::error::{Error, Result};
use crate::experiments::report::{ExperimentReport, FailedJob, ResultRow};
use crate::geometry::ManifoldSpec;
use crate::mlp::{train, MlpModel, Optimizer, PgdConfig, TrainConfig};
use crate::norm::NormKind;
use crate::rng::derive_seed;
use crate::sampling::random_sample;

/// L∞-robust training versus L2 robustness on concentric spheres.
///
/// The L∞-robust model comes from PGD-L∞ adversarial training at
/// `train_eps_factor · Δ(d)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffConfig {
    /// Sphere dimensions; the ambient space has one more.
    pub dims: Vec<usize>,
    pub r1: f64,
    pub r2: f64,
    pub seeds: Vec<u64>,
    pub n_per_class: usize,
    pub n_test_per_class: usize,
    pub train_eps_factor: f64,
    pub train_iters: usize,
    pub eps_grid: Vec<f64>,
    pub attack_step: f64,
    pub attack_iters: usize,
    pub optimizer: Optimizer,
    pub epochs: usize,
}

impl Default for TradeoffConfig {
    fn default() -> Self {
        TradeoffConfig {
            dims: vec![1, 2, 4, 9, 19, 49],
            r1: 1.0,
            r2: 3.0,
            seeds: (0..3).collect(),
            n_per_class: 500,
            n_test_per_class: 250,
            train_eps_factor: 0.9,
            train_iters: 10,
            eps_grid: (1..=20).map(|i| 0.1 * i as f64).collect(),
            attack_step: 0.05,
            attack_iters: 30,
            optimizer: Optimizer::adam(),
            epochs: 100,
        }
    }
}

fn run_job(cfg: &TradeoffConfig, d: usize, seed: u64) -> Result<Vec<ResultRow>> {
    let spec = ManifoldSpec::spheres(cfg.r1, cfg.r2, d, d + 1)?;
    let delta = linf_axis_offset(cfg.r1, cfg.r2, d)?;
    let train_set = random_sample(&spec, cfg.n_per_class, derive_seed(seed, 1))?;
    let test = random_sample(&spec, cfg.n_test_per_class, derive_seed(seed, 2))?;
    let train_eps = cfg.train_eps_factor * delta;
    let adversary = PgdConfig {
        eps: train_eps,
        step: 2.5 * train_eps / cfg.train_iters as f64,
        iters: cfg.train_iters,
        norm: NormKind::Linf,
        random_start: true,
    };
    let tc = TrainConfig {
        optimizer: cfg.optimizer,
        epochs: cfg.epochs,
        batch_size: None,
        seed,
        adversary: Some(adversary),
        clip: None,
    };
    let model = MlpModel::standard(d + 1, 2, seed)?;
    let model = train(model, train_set.points.view(), &train_set.labels, &tc)?.model;
    let (x, y) = (test.points.view(), &test.labels);
    let mk = |eps: f64, metric: &str, value: f64| ResultRow {
        seed,
        codim: 1,
        dim: d + 1,
        eps,
        metric: metric.into(),
        value,
    };
    let linf_eval = PgdConfig {
        step: train_eps / 10.0,
        iters: 20,
        ..adversary
    };
    let mut rows = vec![
        mk(0.0, "delta_analytic", delta),
        mk(0.0, "delta_times_sqrt_d", delta * (d as f64).sqrt()),
        mk(0.0, "clean_acc", accuracy(&model, x, y)),
        mk(
            train_eps,
            "linf_robust_acc",
            pgd(&model, x, y, &linf_eval, seed)?.robust_accuracy(),
        ),
    ];
    let mut eps_star = None;
    for &eps in &cfg.eps_grid {
        let out = bim(
            &model,
            x,
            y,
            eps,
            NormKind::L2,
            cfg.attack_step,
            cfg.attack_iters,
        )?;
        rows.push(mk(eps, "l2_robust_acc", out.robust_accuracy()));
        if eps_star.is_none() && out.success_rate() > 0.5 {
            eps_star = Some(eps);
        }
    }
    rows.push(mk(
        0.0,
        "eps2_star_found",
        f64::from(u8::from(eps_star.is_some())),
    ));
    if let Some(e) = eps_star {
        rows.push(mk(0.0, "eps2_star", e));
    }
    Ok(rows)
}

pub fn run_tradeoff(cfg: &TradeoffConfig) -> Result<ExperimentReport> {
    if cfg.dims.is_empty() || cfg.dims.contains(&0) {
        return Err(Error::arg("dims", "need sphere dimensions >= 1"));
    }
    let start = Instant::now();
    let jobs: Vec<(usize, u64)> = cfg
        .dims
        .iter()
        .flat_map(|&d| cfg.seeds.iter().map(move |&s| (d, s)))
        .collect();
    let outs: Vec<_> = jobs
        .par_iter()
        .map(|&(d, s)| ((d, s), run_job(cfg, d, s)))
        .collect();
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for ((d, seed), out) in outs {
        match out {
            Ok(rows) => results.extend(rows),
            Err(e @ Error::Divergence { .. }) => failures.push(FailedJob {
                codim: 1,
                seed,
                reason: format!("d = {d}: {e}"),
            }),
            Err(e) => return Err(e),
        }
    }
    ExperimentReport::new(
        "tradeoff",
        cfg,
        results,
        failures,
        start.elapsed().as_secs_f64(),
    )
}
