use std::time::Instant;

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::{nn_walk_batch, run_gradient_attack, AttackConfig, AttackMethod};
use crate::classifier::{accuracy, Classifier};
use crate::datasets::{make_circles, make_planes, CodimEmbedding, DatasetSplit};
use crate::error::{Error, Result};
use crate::experiments::report::{ExperimentReport, FailedJob, ResultRow};
use crate::knn::{Acceleration, NnIndex};
use crate::mlp::{train, MlpModel, Optimizer, PgdConfig, TrainConfig};
use crate::norm::NormKind;

/// kd-trees stop paying off beyond this many dimensions.
pub const KD_TREE_MAX_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SweepDataset {
    Circles {
        n_per_class: usize,
        n_test_per_class: usize,
    },
    Planes {
        delta: f64,
    },
}

impl SweepDataset {
    pub fn intrinsic_dim(&self) -> usize {
        match self {
            SweepDataset::Circles { .. } => 1,
            SweepDataset::Planes { .. } => 2,
        }
    }

    pub fn build(&self, codim: usize, rotate: bool, seed: u64) -> Result<DatasetSplit> {
        let emb = CodimEmbedding {
            target_ambient_dim: self.intrinsic_dim() + codim,
            rotate,
            seed,
        };
        match *self {
            SweepDataset::Circles {
                n_per_class,
                n_test_per_class,
            } => make_circles(n_per_class, n_test_per_class, &emb),
            SweepDataset::Planes { delta } => make_planes(delta, &emb),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodimSweepConfig {
    pub dataset: SweepDataset,
    pub codims: Vec<usize>,
    pub eps_grid: Vec<f64>,
    pub attack: AttackMethod,
    pub attack_norm: NormKind,
    pub attack_step: f64,
    pub attack_iters: usize,
    pub optimizer: Optimizer,
    pub epochs: usize,
    pub batch_size: Option<usize>,
    /// PGD adversary for adversarial training; `None` trains naturally.
    pub adversary: Option<PgdConfig>,
    pub seeds: Vec<u64>,
    pub rotate: bool,
    /// Also attack the nearest-neighbour classifier directly.
    pub nn_walk: bool,
}

impl CodimSweepConfig {
    /// Circles, codims {1, 10, 100, 500}, FGSM under L2, natural Adam training.
    pub fn circles_natural() -> Self {
        CodimSweepConfig {
            dataset: SweepDataset::Circles {
                n_per_class: 1000,
                n_test_per_class: 500,
            },
            codims: vec![1, 10, 100, 500],
            eps_grid: vec![0.25, 0.5, 0.75, 1.0, 1.25, 1.5],
            attack: AttackMethod::Fgsm,
            attack_norm: NormKind::L2,
            attack_step: 0.05,
            attack_iters: 30,
            optimizer: Optimizer::adam(),
            epochs: 250,
            batch_size: None,
            adversary: None,
            seeds: (0..20).collect(),
            rotate: false,
            nn_walk: false,
        }
    }

    /// Planes at δ = 1, PGD adversarial training at ε = 1 under L2, BIM evaluation.
    pub fn planes_adversarial() -> Self {
        CodimSweepConfig {
            dataset: SweepDataset::Planes { delta: 1.0 },
            codims: vec![1, 10, 100, 500],
            eps_grid: vec![0.2, 0.4, 0.6, 0.8, 0.9, 0.99],
            attack: AttackMethod::Bim,
            attack_norm: NormKind::L2,
            attack_step: 0.05,
            attack_iters: 30,
            optimizer: Optimizer::adam(),
            epochs: 250,
            batch_size: None,
            adversary: Some(PgdConfig {
                eps: 1.0,
                step: 0.05,
                iters: 30,
                norm: NormKind::L2,
                random_start: true,
            }),
            seeds: (0..20).collect(),
            rotate: false,
            nn_walk: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.codims.is_empty() || self.seeds.is_empty() {
            return Err(Error::arg(
                "codims",
                "need at least one codimension and one seed",
            ));
        }
        if self.codims.contains(&0) {
            return Err(Error::arg("codims", "codimension must be at least 1"));
        }
        if !matches!(
            self.attack,
            AttackMethod::Fgsm | AttackMethod::Bim | AttackMethod::Pgd
        ) {
            return Err(Error::arg(
                "attack",
                "sweeps use a gradient attack (fgsm, bim or pgd)",
            ));
        }
        if let Some(adv) = &self.adversary {
            adv.validate()?;
        }
        Ok(())
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            optimizer: self.optimizer,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
            adversary: self.adversary,
            clip: None,
        }
    }

    pub fn attack_config(&self, eps: f64, seed: u64) -> AttackConfig {
        AttackConfig {
            step: if self.attack == AttackMethod::Fgsm {
                eps
            } else {
                self.attack_step
            },
            iters: if self.attack == AttackMethod::Fgsm {
                1
            } else {
                self.attack_iters
            },
            seed,
            ..AttackConfig::new(self.attack, eps, self.attack_norm)
        }
    }
}

/// Nearest-neighbour index over a training split (L2).
pub fn nn_index_for(train: &crate::sampling::LabeledDataset, norm: NormKind) -> Result<NnIndex> {
    let accel = if train.dim() <= KD_TREE_MAX_DIM {
        Acceleration::SpatialTree
    } else {
        Acceleration::BruteForce
    };
    NnIndex::new(train.points.clone(), train.labels.clone(), norm, accel)
}

/// Trains the sweep's model for one `(codim, seed)` job.
pub fn train_job(cfg: &CodimSweepConfig, split: &DatasetSplit, seed: u64) -> Result<MlpModel> {
    let model = MlpModel::standard(split.train.dim(), 2, seed)?;
    Ok(train(
        model,
        split.train.points.view(),
        &split.train.labels,
        &cfg.train_config(seed),
    )?
    .model)
}

fn row(seed: u64, codim: usize, dim: usize, eps: f64, metric: &str, value: f64) -> ResultRow {
    ResultRow {
        seed,
        codim,
        dim,
        eps,
        metric: metric.to_string(),
        value,
    }
}

fn run_job(cfg: &CodimSweepConfig, codim: usize, seed: u64) -> Result<Vec<ResultRow>> {
    let split = cfg.dataset.build(codim, cfg.rotate, seed)?;
    let dim = split.train.dim();
    let model = train_job(cfg, &split, seed)?;
    let index = nn_index_for(&split.train, cfg.attack_norm)?;
    let test: ArrayView2<f64> = split.test.points.view();
    let labels = &split.test.labels;
    let mut rows = vec![
        row(
            seed,
            codim,
            dim,
            0.0,
            "mlp_clean_acc",
            accuracy(&model, test, labels),
        ),
        row(
            seed,
            codim,
            dim,
            0.0,
            "nn_clean_acc",
            accuracy(&index, test, labels),
        ),
    ];
    for &eps in &cfg.eps_grid {
        let out = run_gradient_attack(&model, test, labels, &cfg.attack_config(eps, seed))?;
        rows.push(row(
            seed,
            codim,
            dim,
            eps,
            "mlp_robust_acc",
            out.robust_accuracy(),
        ));
        rows.push(row(
            seed,
            codim,
            dim,
            eps,
            "nn_acc_on_mlp_adv",
            accuracy(&index, out.adversarial_points.view(), labels),
        ));
        rows.push(row(
            seed,
            codim,
            dim,
            eps,
            "max_perturbation",
            out.perturbation_norms.iter().fold(0.0, |a, &b| a.max(b)),
        ));
        if cfg.nn_walk {
            let walk = AttackConfig {
                seed,
                ..AttackConfig::new(AttackMethod::NnWalk, eps, cfg.attack_norm)
            };
            let out = nn_walk_batch(&index, test, labels, &walk)?;
            rows.push(row(
                seed,
                codim,
                dim,
                eps,
                "nn_walk_robust_acc",
                out.robust_accuracy(),
            ));
        }
    }
    Ok(rows)
}

/// Robustness of naturally or adversarially trained networks as codimension
/// grows, with the nearest-neighbour classifier evaluated on the same
/// adversarial points.
pub fn run_codim_sweep(cfg: &CodimSweepConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let jobs: Vec<(usize, u64)> = cfg
        .codims
        .iter()
        .flat_map(|&c| cfg.seeds.iter().map(move |&s| (c, s)))
        .collect();
    type JobOutcome = ((usize, u64), Result<Vec<ResultRow>>);
    let outcomes: Vec<JobOutcome> = jobs
        .par_iter()
        .map(|&(c, s)| ((c, s), run_job(cfg, c, s)))
        .collect();
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for ((codim, seed), out) in outcomes {
        match out {
            Ok(rows) => results.extend(rows),
            Err(e @ Error::Divergence { .. }) => failures.push(FailedJob {
                codim,
                seed,
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    ExperimentReport::new(
        "codim_sweep",
        cfg,
        results,
        failures,
        start.elapsed().as_secs_f64(),
    )
}

/// Accuracy helper for any classifier on a labelled split.
pub fn split_accuracy<C: Classifier + ?Sized>(clf: &C, split: &DatasetSplit) -> f64 {
    accuracy(clf, split.test.points.view(), &split.test.labels)
}
