use std::path::PathBuf;
use std::time::Instant;

use ndarray::{Array1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::attacks::{
    fgsm_clipped, nn_walk_batch, pgd_clipped, AttackConfig, AttackMethod, AttackOutcome,
};
use crate::classifier::accuracy;
use crate::datasets::{load_mnist, MnistSet};
use crate::error::{Error, Result};
use crate::experiments::report::{ExperimentReport, ResultRow};
use crate::knn::{Acceleration, NnIndex};
use crate::mlp::{train, MlpModel, Optimizer, PgdConfig, TrainConfig};
use crate::norm::NormKind;

const PIXEL_RANGE: (f64, f64) = (0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MnistNnConfig {
    pub mnist_dir: PathBuf,
    /// Training examples kept (first `n`); `None` keeps all.
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
    /// Attacks run against each network (FGSM and/or BIM, L∞).
    pub attacks: Vec<AttackMethod>,
    pub eps_grid: Vec<f64>,
    pub bim_iters: usize,
    pub optimizer: Optimizer,
    pub epochs: usize,
    pub batch_size: usize,
    pub adversary: PgdConfig,
    /// Test points attacked by the nearest-neighbour walk.
    pub walk_limit: usize,
    pub walk_eps: f64,
    /// Adversarial images kept for export.
    pub n_samples: usize,
    pub seed: u64,
}

impl MnistNnConfig {
    pub fn new(mnist_dir: PathBuf) -> Self {
        MnistNnConfig {
            mnist_dir,
            train_limit: Some(10_000),
            test_limit: Some(1_000),
            attacks: vec![AttackMethod::Fgsm, AttackMethod::Bim],
            eps_grid: vec![0.05, 0.1, 0.2, 0.3, 0.4, 0.5],
            bim_iters: 10,
            optimizer: Optimizer::Adam {
                lr: 1e-3,
                beta1: 0.9,
                beta2: 0.999,
                eps_hat: 1e-8,
            },
            epochs: 10,
            batch_size: 128,
            adversary: PgdConfig {
                eps: 0.3,
                step: 0.075,
                iters: 7,
                norm: NormKind::Linf,
                random_start: true,
            },
            walk_limit: 200,
            walk_eps: 0.3,
            n_samples: 10,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self
            .attacks
            .iter()
            .any(|a| !matches!(a, AttackMethod::Fgsm | AttackMethod::Bim))
        {
            return Err(Error::arg("attacks", "MNIST runs use fgsm or bim"));
        }
        if self.eps_grid.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::arg("eps_grid", "ε must be finite and non-negative"));
        }
        if self.batch_size == 0 || self.bim_iters == 0 {
            return Err(Error::arg(
                "batch_size",
                "batch size and BIM iterations must be positive",
            ));
        }
        self.adversary.validate()
    }

    fn train_config(&self, adversary: Option<PgdConfig>) -> TrainConfig {
        TrainConfig {
            optimizer: self.optimizer,
            epochs: self.epochs,
            batch_size: Some(self.batch_size),
            seed: self.seed,
            adversary,
            clip: Some(PIXEL_RANGE),
        }
    }
}

/// An exported adversarial image with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialImage {
    pub name: String,
    pub label: usize,
    pub pixels: Array1<f64>,
}

pub struct MnistRun {
    pub report: ExperimentReport,
    pub samples: Vec<AdversarialImage>,
    pub rows: usize,
    pub cols: usize,
}

fn attack(
    model: &MlpModel,
    x: ArrayView2<f64>,
    y: &[usize],
    method: AttackMethod,
    eps: f64,
    iters: usize,
) -> Result<AttackOutcome> {
    match method {
        AttackMethod::Fgsm => fgsm_clipped(model, x, y, eps, NormKind::Linf, Some(PIXEL_RANGE)),
        _ => {
            let cfg = PgdConfig {
                eps,
                step: 2.5 * eps / iters as f64,
                iters,
                norm: NormKind::Linf,
                random_start: false,
            };
            pgd_clipped(model, x, y, &cfg, 0, Some(PIXEL_RANGE))
        }
    }
}

/// Natural and adversarially trained MLPs against 1-NN on raw pixels.
pub fn run_mnist_nn(cfg: &MnistNnConfig) -> Result<MnistRun> {
    cfg.validate()?;
    let start = Instant::now();
    let (train_set, test_set) = load_mnist(&cfg.mnist_dir)?;
    let limit = |s: MnistSet, n: Option<usize>| if let Some(n) = n { s.head(n) } else { s };
    let train_set = limit(train_set, cfg.train_limit);
    let test_set = limit(test_set, cfg.test_limit);
    if train_set.is_empty() || test_set.is_empty() {
        return Err(Error::Empty("MNIST split"));
    }
    let dim = train_set.rows * train_set.cols;
    let index = NnIndex::new(
        train_set.images.clone(),
        train_set.labels.clone(),
        NormKind::L2,
        Acceleration::BruteForce,
    )?;
    let fit = |adv: Option<PgdConfig>| -> Result<MlpModel> {
        let model = MlpModel::standard(dim, 10, cfg.seed)?;
        Ok(train(
            model,
            train_set.images.view(),
            &train_set.labels,
            &cfg.train_config(adv),
        )?
        .model)
    };
    let natural = fit(None)?;
    let robust = fit(Some(cfg.adversary))?;

    let (x, y) = (test_set.images.view(), test_set.labels.as_slice());
    let mk = |eps: f64, metric: String, value: f64| ResultRow {
        seed: cfg.seed,
        codim: 0,
        dim,
        eps,
        metric,
        value,
    };
    let mut results = vec![
        mk(0.0, "nn_clean_acc".into(), accuracy(&index, x, y)),
        mk(0.0, "natural_clean_acc".into(), accuracy(&natural, x, y)),
        mk(0.0, "robust_clean_acc".into(), accuracy(&robust, x, y)),
    ];
    let mut samples = Vec::new();
    for (name, model) in [("natural", &natural), ("robust", &robust)] {
        for &method in &cfg.attacks {
            for &eps in &cfg.eps_grid {
                let out = attack(model, x, y, method, eps, cfg.bim_iters)?;
                let tag = format!("{name}_{}", method.as_str());
                results.push(mk(eps, format!("{tag}_robust_acc"), out.robust_accuracy()));
                results.push(mk(
                    eps,
                    format!("nn_acc_on_{tag}"),
                    accuracy(&index, out.adversarial_points.view(), y),
                ));
                if name == "natural" && method == AttackMethod::Bim && samples.len() < cfg.n_samples
                {
                    for i in (0..out.len())
                        .filter(|&i| out.success_mask[i])
                        .take(cfg.n_samples - samples.len())
                    {
                        samples.push(AdversarialImage {
                            name: format!("{tag}_eps{eps:.2}_idx{i}"),
                            label: y[i],
                            pixels: out.adversarial_points.row(i).to_owned(),
                        });
                    }
                }
            }
        }
    }
    let n_walk = cfg.walk_limit.min(test_set.len());
    if n_walk > 0 {
        let walk_x = test_set.images.slice(ndarray::s![..n_walk, ..]);
        let walk_y = &y[..n_walk];
        let walk = AttackConfig {
            clip: Some(PIXEL_RANGE),
            seed: cfg.seed,
            ..AttackConfig::new(AttackMethod::NnWalk, cfg.walk_eps, NormKind::Linf)
        };
        let out = nn_walk_batch(&index, walk_x, walk_y, &walk)?;
        results.push(mk(
            cfg.walk_eps,
            "nn_walk_success_nn".into(),
            out.success_rate(),
        ));
        results.push(mk(
            cfg.walk_eps,
            "nn_walk_success_robust".into(),
            1.0 - accuracy(&robust, out.adversarial_points.view(), walk_y),
        ));
    }
    let report = ExperimentReport::new(
        "mnist_nn",
        cfg,
        results,
        vec![],
        start.elapsed().as_secs_f64(),
    )?;
    Ok(MnistRun {
        report,
        samples,
        rows: test_set.rows,
        cols: test_set.cols,
    })
}
