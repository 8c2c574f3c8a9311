use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use codimlab::attacks::{
    gradient_free_projection, nn_walk_batch, run_gradient_attack, AttackConfig, AttackMethod,
    AttackOutcome,
};
use codimlab::classifier::accuracy;
use codimlab::datasets::read_dataset;
use codimlab::experiments::report::write_csv;
use codimlab::mlp::{train as train_model, Optimizer};
use codimlab::{Acceleration, MlpModel, NnIndex, NormKind, PgdConfig, TrainConfig};
use serde::Serialize;

use crate::Ctx;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training set CSV with its JSON sidecar.
    #[arg(long)]
    data: PathBuf,
    /// Optional held-out set for reporting accuracy.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long, default_value_t = 250)]
    epochs: usize,
    #[arg(long, value_enum, default_value = "adam")]
    optimizer: OptimizerArg,
    /// Overrides the optimizer's default learning rate.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Train adversarially against PGD with this radius.
    #[arg(long)]
    adv_eps: Option<f64>,
    #[arg(long, default_value = "l2")]
    adv_norm: NormKind,
    #[arg(long, default_value_t = 0.05)]
    adv_step: f64,
    #[arg(long, default_value_t = 30)]
    adv_iters: usize,
}

#[derive(Serialize)]
struct TrainSummary {
    config: TrainConfig,
    train_acc: f64,
    test_acc: Option<f64>,
    final_loss: f64,
    loss_trace: Vec<f64>,
}

fn train_config(ctx: &Ctx, a: &TrainArgs) -> Result<TrainConfig> {
    let mut optimizer = match a.optimizer {
        OptimizerArg::Adam => Optimizer::adam(),
        OptimizerArg::Sgd => Optimizer::sgd(),
    };
    if let Some(v) = a.lr {
        match &mut optimizer {
            Optimizer::Adam { lr, .. } | Optimizer::Sgd { lr, .. } => *lr = v,
        }
    }
    let adversary = a.adv_eps.map(|eps| PgdConfig {
        eps,
        step: a.adv_step,
        iters: a.adv_iters,
        norm: a.adv_norm,
        random_start: true,
    });
    let defaults = TrainConfig {
        optimizer,
        epochs: a.epochs,
        batch_size: a.batch_size,
        seed: ctx.seed,
        adversary,
        clip: None,
    };
    ctx.config_or(defaults)
}

pub fn train(ctx: &Ctx, a: TrainArgs) -> Result<()> {
    let ds = read_dataset(&a.data).with_context(|| format!("loading {}", a.data.display()))?;
    let cfg = train_config(ctx, &a)?;
    let n_classes = ds.labels.iter().max().map_or(2, |&m| (m + 1).max(2));
    let model = MlpModel::standard(ds.dim(), n_classes, cfg.seed)?;
    let outcome = train_model(model, ds.points.view(), &ds.labels, &cfg)?;
    let test_acc = match &a.test {
        Some(p) => {
            let t = read_dataset(p).with_context(|| format!("loading {}", p.display()))?;
            Some(accuracy(&outcome.model, t.points.view(), &t.labels))
        }
        None => None,
    };
    let dir = ctx.out_dir()?;
    let ckpt = dir.join("model.ckpt");
    outcome.model.save(&ckpt, cfg.seed, &cfg.hash())?;
    let summary = TrainSummary {
        train_acc: accuracy(&outcome.model, ds.points.view(), &ds.labels),
        test_acc,
        final_loss: outcome.loss_trace.last().copied().unwrap_or(f64::NAN),
        loss_trace: outcome.loss_trace,
        config: cfg,
    };
    ctx.write_json("training.json", &summary)?;
    match summary.test_acc {
        Some(t) => println!(
            "train accuracy {:.4}, test accuracy {t:.4}; saved {}",
            summary.train_acc,
            ckpt.display()
        ),
        None => println!(
            "train accuracy {:.4}; saved {}",
            summary.train_acc,
            ckpt.display()
        ),
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    /// Checkpoint written by `train`. Not needed for `nn-walk`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Points to attack (CSV with sidecar).
    #[arg(long)]
    data: PathBuf,
    /// Training set for the nearest-neighbour walk.
    #[arg(long)]
    train: Option<PathBuf>,
    /// fgsm, bim, pgd, gradient-free or nn-walk.
    #[arg(long, default_value = "fgsm")]
    method: AttackMethod,
    #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.5, 0.75, 1.0])]
    eps: Vec<f64>,
    #[arg(long, default_value = "l2")]
    norm: NormKind,
    /// Step size; defaults depend on the method.
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    /// Neighbours considered per walk step.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Serialize)]
struct AttackRow {
    row: usize,
    eps: f64,
    success: bool,
    perturbation_norm: f64,
}

#[derive(Serialize)]
struct EpsSummary {
    eps: f64,
    success_rate: f64,
    robust_accuracy: f64,
    flagged: usize,
}

#[derive(Serialize)]
struct AttackSummary {
    method: AttackMethod,
    norm: NormKind,
    n_points: usize,
    results: Vec<EpsSummary>,
}

pub fn attack(ctx: &Ctx, a: AttackArgs) -> Result<()> {
    let ds = read_dataset(&a.data).with_context(|| format!("loading {}", a.data.display()))?;
    let (x, y) = (ds.points.view(), &ds.labels);
    let model = match &a.model {
        Some(p) => Some(
            MlpModel::load(p)
                .with_context(|| format!("loading {}", p.display()))?
                .0,
        ),
        None => None,
    };
    let index = match (&a.train, a.method) {
        (Some(p), AttackMethod::NnWalk) => {
            let t = read_dataset(p).with_context(|| format!("loading {}", p.display()))?;
            let accel = if a.norm == NormKind::L2 && t.dim() <= 16 {
                Acceleration::SpatialTree
            } else {
                Acceleration::BruteForce
            };
            Some(NnIndex::from_dataset(&t, a.norm, accel)?)
        }
        (None, AttackMethod::NnWalk) => bail!("nn-walk needs --train"),
        _ => None,
    };
    let mut rows = Vec::new();
    let mut summary = AttackSummary {
        method: a.method,
        norm: a.norm,
        n_points: ds.len(),
        results: Vec::new(),
    };
    for &eps in &a.eps {
        let mut cfg = AttackConfig::new(a.method, eps, a.norm);
        cfg.seed = ctx.seed;
        if let Some(s) = a.step {
            cfg.step = s;
        }
        if let Some(i) = a.iters {
            cfg.iters = i;
        }
        if let Some(k) = a.k {
            cfg.k = k;
        }
        cfg.validate()?;
        let out: AttackOutcome = match (a.method, &model, &index) {
            (AttackMethod::NnWalk, _, Some(idx)) => nn_walk_batch(idx, x, y, &cfg)?,
            (AttackMethod::GradientFreeProjection, Some(m), _) => {
                gradient_free_projection(m, x, y, eps, a.norm)?
            }
            (_, Some(m), _) => run_gradient_attack(m, x, y, &cfg)?,
            _ => bail!("{} needs --model", a.method.as_str()),
        };
        for (i, (&s, &n)) in out
            .success_mask
            .iter()
            .zip(&out.perturbation_norms)
            .enumerate()
        {
            rows.push(AttackRow {
                row: i,
                eps,
                success: s,
                perturbation_norm: n,
            });
        }
        println!("ε = {eps}: success rate {:.4}", out.success_rate());
        summary.results.push(EpsSummary {
            eps,
            success_rate: out.success_rate(),
            robust_accuracy: out.robust_accuracy(),
            flagged: out.flagged.iter().filter(|&&f| f).count(),
        });
    }
    write_csv(&ctx.out_dir()?.join("attack.csv"), &rows)?;
    ctx.write_json("attack.json", &summary)?;
    Ok(())
}
