use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use codimlab::datasets::{make_circles, make_planes, write_dataset, CodimEmbedding};
use codimlab::experiments::angles::ANGLE_BIN_WIDTH;
use codimlab::experiments::fields::gradfield_ratio;
use codimlab::experiments::report::write_csv;
use codimlab::experiments::*;
use codimlab::mlp::train as train_model;
use codimlab::plot::write_pgm;
use codimlab::{Acceleration, Classifier, MlpModel, NnIndex, NormKind, PgdConfig, TrainConfig};
use serde::Serialize;

use crate::checks::{mean, Checks};
use crate::plots::{self, GroupBy};
use crate::Ctx;

/// Points with ε at or beyond the reach (1 for both families) sit on the
/// decision axis, so robustness claims are checked strictly below it.
const RCH: f64 = 1.0;

fn seed_range(ctx: &Ctx, n: usize) -> Vec<u64> {
    (ctx.seed..ctx.seed + n as u64).collect()
}

fn print_aggregates(report: &ExperimentReport, metrics: &[&str]) {
    for a in report
        .aggregates
        .iter()
        .filter(|a| metrics.contains(&a.metric.as_str()))
    {
        println!(
            "codim {:>4}  ε {:<5} {:<22} {:.4} ± {:.4} (n = {})",
            a.codim, a.eps, a.metric, a.mean, a.stdev, a.n
        );
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Preset {
    /// Circles, natural training, FGSM.
    Circles,
    /// Planes, PGD adversarial training, BIM, plus the nearest-neighbour walk.
    Planes,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum, default_value = "circles")]
    preset: Preset,
    /// Codimensions to sweep.
    #[arg(long, value_delimiter = ',')]
    codims: Option<Vec<usize>>,
    /// Attack radii.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Number of retrainings, seeded `seed, seed + 1, …`.
    #[arg(long)]
    seeds: Option<usize>,
    /// Training epochs per network.
    #[arg(long)]
    epochs: Option<usize>,
}

pub fn sweep_codim(ctx: &Ctx, a: SweepArgs) -> Result<()> {
    let preset = match a.preset {
        Preset::Circles => CodimSweepConfig::circles_natural(),
        Preset::Planes => CodimSweepConfig::planes_adversarial(),
    };
    let mut cfg = ctx.config_or(preset)?;
    if let Some(c) = a.codims {
        cfg.codims = c;
    }
    if let Some(e) = a.eps {
        cfg.eps_grid = e;
    }
    if let Some(n) = a.seeds {
        cfg.seeds = seed_range(ctx, n);
    }
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    let report = run_codim_sweep(&cfg)?;
    let dir = ctx.out_dir()?;
    report.write(dir)?;
    for m in ["mlp_robust_acc", "nn_acc_on_mlp_adv", "nn_walk_robust_acc"] {
        plots::metric_vs_eps(dir, m, GroupBy::Codim, &format!("{m} by codimension"))?;
    }
    print_aggregates(
        &report,
        &[
            "mlp_clean_acc",
            "mlp_robust_acc",
            "nn_acc_on_mlp_adv",
            "nn_walk_robust_acc",
        ],
    );
    if !report.failures.is_empty() {
        eprintln!("{} jobs diverged and were excluded", report.failures.len());
    }
    if ctx.assert_mode {
        check_sweep(&cfg, &report)?;
    }
    Ok(())
}

fn check_sweep(cfg: &CodimSweepConfig, report: &ExperimentReport) -> Result<()> {
    let mut c = Checks::default();
    let (first, last) = (cfg.codims[0], *cfg.codims.last().unwrap());
    let below: Vec<f64> = cfg
        .eps_grid
        .iter()
        .copied()
        .filter(|&e| e > 0.0 && e < RCH)
        .collect();
    if cfg.adversary.is_none() {
        if let Some(&eps) = cfg
            .eps_grid
            .iter()
            .filter(|&&e| e <= RCH)
            .max_by(|a, b| a.total_cmp(b))
        {
            let (lo, hi) = (
                mean(report, first, eps, "mlp_robust_acc"),
                mean(report, last, eps, "mlp_robust_acc"),
            );
            c.expect(hi <= lo, format!("robust accuracy at ε = {eps}: codim {last} ({hi:.4}) ≤ codim {first} ({lo:.4})"));
        }
    } else {
        let found = cfg.codims.iter().filter(|&&k| k >= 100).any(|&k| {
            below
                .iter()
                .any(|&e| mean(report, k, e, "mlp_robust_acc") < 1.0)
        });
        c.expect(
            found,
            "adversarial examples below ε = 1 at some codimension ≥ 100",
        );
    }
    for &k in &cfg.codims {
        let worst = below
            .iter()
            .map(|&e| mean(report, k, e, "nn_acc_on_mlp_adv"))
            .fold(f64::INFINITY, f64::min);
        c.expect(worst >= 0.99, format!("codim {k}: NN accuracy on MLP adversarial points ≥ 0.99 for ε < 1 (min {worst:.4})"));
        if cfg.nn_walk {
            let walk = below
                .iter()
                .map(|&e| mean(report, k, e, "nn_walk_robust_acc"))
                .fold(f64::INFINITY, f64::min);
            c.expect(
                walk == 1.0,
                format!("codim {k}: NN walk robust accuracy 1 for ε < 1 (min {walk:.4})"),
            );
        }
    }
    c.finish()
}

#[derive(Debug, Args)]
pub struct TradeoffArgs {
    /// Sphere dimensions; the ambient space has one more.
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    /// Number of retrainings per dimension.
    #[arg(long)]
    seeds: Option<usize>,
    /// Training epochs per network.
    #[arg(long)]
    epochs: Option<usize>,
}

pub fn tradeoff(ctx: &Ctx, a: TradeoffArgs) -> Result<()> {
    let mut cfg = ctx.config_or(TradeoffConfig::default())?;
    if let Some(d) = a.dims {
        cfg.dims = d;
    }
    if let Some(n) = a.seeds {
        cfg.seeds = seed_range(ctx, n);
    }
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    let report = run_tradeoff(&cfg)?;
    let dir = ctx.out_dir()?;
    report.write(dir)?;
    plots::metric_vs_eps(
        dir,
        "l2_robust_acc",
        GroupBy::Dim,
        "L2 robust accuracy of L∞-trained models",
    )?;
    plots::metric_vs_dim(
        dir,
        "eps2_star",
        0.0,
        "smallest L2 radius with > 50% success",
    )?;
    plots::metric_vs_dim(dir, "delta_analytic", 0.0, "L∞ axis offset Δ(d)")?;
    print_aggregates(
        &report,
        &[
            "delta_analytic",
            "clean_acc",
            "linf_robust_acc",
            "eps2_star",
        ],
    );
    if ctx.assert_mode {
        let mut c = Checks::default();
        let star = |d: usize| {
            report
                .aggregates
                .iter()
                .find(|r| r.dim == d + 1 && r.metric == "eps2_star")
                .map(|r| r.mean)
        };
        let (lo, hi) = (
            cfg.dims.iter().min().copied().unwrap_or(1),
            cfg.dims.iter().max().copied().unwrap_or(1),
        );
        match (star(lo), star(hi)) {
            (Some(a), Some(b)) => c.expect(
                b <= a,
                format!("ε₂* at d = {hi} ({b:.3}) ≤ at d = {lo} ({a:.3})"),
            ),
            (_, None) => c.expect(
                false,
                format!("no L2 radius on the grid breaks the d = {hi} model"),
            ),
            (None, Some(_)) => {}
        }
        c.finish()?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct AnglesArgs {
    /// Codimensions to measure.
    #[arg(long, value_delimiter = ',')]
    codims: Option<Vec<usize>>,
    /// Number of retrainings per codimension.
    #[arg(long)]
    seeds: Option<usize>,
    /// Training epochs per network.
    #[arg(long)]
    epochs: Option<usize>,
}

pub fn angles(ctx: &Ctx, a: AnglesArgs) -> Result<()> {
    let mut cfg = ctx.config_or(AngleConfig::default())?;
    if let Some(c) = a.codims {
        cfg.codims = c;
    }
    if let Some(n) = a.seeds {
        cfg.seeds = seed_range(ctx, n);
    }
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    let report = run_angle_histogram(&cfg)?;
    let dir = ctx.out_dir()?;
    report.write(dir)?;
    plots::angle_histograms(dir, ANGLE_BIN_WIDTH)?;
    print_aggregates(&report, &["frac_below_10deg", "frac_below_20deg"]);
    if ctx.assert_mode {
        let mut c = Checks::default();
        for &k in cfg.codims.iter().filter(|&&k| k >= 10) {
            let f = mean(&report, k, cfg.eps, "frac_below_20deg");
            c.expect(f >= 0.8, format!("codim {k}: {f:.4} of perturbations within 20° of the normal space (need ≥ 0.8)"));
        }
        c.finish()?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct GradfieldArgs {
    /// Checkpoint of a Planes model; trained here when omitted.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Extra dimensions beyond the plane (when training).
    #[arg(long, default_value_t = 1)]
    codim: usize,
    /// PGD radius for adversarial training; 0 trains naturally.
    #[arg(long, default_value_t = 1.0)]
    adv_eps: f64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    /// Grid points per axis.
    #[arg(long, default_value_t = 41)]
    grid_res: usize,
}

#[derive(Serialize)]
struct GradfieldSummary {
    grid_res: usize,
    ambient_dim: usize,
    /// Median magnitude on the flats over the median on the decision axis.
    manifold_to_axis_ratio: f64,
}

pub fn gradfield(ctx: &Ctx, a: GradfieldArgs) -> Result<()> {
    let (model, dim) = match &a.model {
        Some(p) => {
            let m = MlpModel::load(p)
                .with_context(|| format!("loading {}", p.display()))?
                .0;
            let d = m.input_dim();
            (m, d)
        }
        None => {
            let split = make_planes(1.0, &CodimEmbedding::padded(2 + a.codim, ctx.seed))?;
            let adversary = (a.adv_eps > 0.0).then_some(PgdConfig {
                eps: a.adv_eps,
                step: 0.05,
                iters: 30,
                norm: NormKind::L2,
                random_start: true,
            });
            let cfg = TrainConfig {
                epochs: a.epochs,
                seed: ctx.seed,
                adversary,
                ..TrainConfig::default()
            };
            let m = MlpModel::standard(split.train.dim(), 2, ctx.seed)?;
            (
                train_model(m, split.train.points.view(), &split.train.labels, &cfg)?.model,
                split.train.dim(),
            )
        }
    };
    let spec = codimlab::ManifoldSpec::planes(dim)?;
    let field = run_gradfield(&model, &spec, a.grid_res)?;
    let dir = ctx.out_dir()?;
    let csv_path = dir.join("gradfield.csv");
    write_csv(&csv_path, &field)?;
    plots::grid_heatmap(
        &csv_path,
        "magnitude",
        None,
        &dir.join("gradfield.svg"),
        "loss-gradient magnitude",
    )?;
    let ratio = gradfield_ratio(&field, 2.0, 0.1);
    ctx.write_json(
        "gradfield.json",
        &GradfieldSummary {
            grid_res: a.grid_res,
            ambient_dim: dim,
            manifold_to_axis_ratio: ratio,
        },
    )?;
    println!("median gradient magnitude on the flats / on the decision axis: {ratio:.4}");
    if ctx.assert_mode {
        let mut c = Checks::default();
        c.expect(
            ratio < 0.1,
            format!("gradient magnitude ratio {ratio:.4} < 0.1"),
        );
        c.finish()?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct SlicesArgs {
    /// MLP retrainings averaged per slice.
    #[arg(long, default_value_t = 20)]
    runs: usize,
    /// Heights of the horizontal slices.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.5, 1.0])]
    z: Vec<f64>,
    /// Half-width of the plotted square.
    #[arg(long, default_value_t = 3.5)]
    extent: f64,
    /// Grid points per axis.
    #[arg(long, default_value_t = 61)]
    grid_res: usize,
    /// Training points per sphere.
    #[arg(long, default_value_t = 1000)]
    n_per_class: usize,
    /// Training epochs per network.
    #[arg(long, default_value_t = 100)]
    epochs: usize,
}

pub fn slices(ctx: &Ctx, a: SlicesArgs) -> Result<()> {
    let split = make_circles(a.n_per_class, 1, &CodimEmbedding::padded(3, ctx.seed))?;
    let (x, y) = (split.train.points.view(), &split.train.labels);
    let mut models = Vec::with_capacity(a.runs);
    for i in 0..a.runs as u64 {
        let cfg = TrainConfig {
            epochs: a.epochs,
            seed: ctx.seed + i,
            ..TrainConfig::default()
        };
        models.push(train_model(MlpModel::standard(3, 2, ctx.seed + i)?, x, y, &cfg)?.model);
    }
    let nn = NnIndex::from_dataset(&split.train, NormKind::L2, Acceleration::SpatialTree)?;
    let dir = ctx.out_dir()?;
    write_dataset(&dir.join("train.csv"), &split.train)?;
    let mlp_refs: Vec<&dyn Classifier> = models.iter().map(|m| m as &dyn Classifier).collect();
    let nn_refs: [&dyn Classifier; 1] = [&nn];
    let mut nn_slices = Vec::new();
    for (name, clfs) in [("mlp", mlp_refs.as_slice()), ("nn", nn_refs.as_slice())] {
        if clfs.is_empty() {
            continue;
        }
        let slices = run_boundary_slices(clfs, 3, &a.z, a.extent, a.grid_res)?;
        for s in &slices {
            let stem = format!("slice_{name}_z{:.2}", s.z);
            let csv_path = dir.join(format!("{stem}.csv"));
            write_csv(&csv_path, &s.rows())?;
            plots::grid_heatmap(
                &csv_path,
                "freq",
                Some((0.0, 1.0)),
                &dir.join(format!("{stem}.svg")),
                &format!("{name} label frequency at z = {}", s.z),
            )?;
        }
        if name == "nn" {
            nn_slices = slices;
        }
    }
    println!(
        "wrote {} slices per classifier to {}",
        a.z.len(),
        dir.display()
    );
    if ctx.assert_mode {
        let mut c = Checks::default();
        let h = (2.0 * a.extent / (a.grid_res - 1) as f64).max(0.1);
        for s in &nn_slices {
            // Equidistant set of the two circles is the cylinder of radius 2.
            let bad = s
                .rows()
                .iter()
                .filter(|r| {
                    let rho = r.x.hypot(r.y);
                    (rho < 2.0 - h && r.freq != 0.0) || (rho > 2.0 + h && r.freq != 1.0)
                })
                .count();
            c.expect(
                bad == 0,
                format!(
                    "NN slice z = {}: {bad} cells off the ρ = 2 cylinder by more than {h:.3}",
                    s.z
                ),
            );
        }
        c.finish()?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct MnistArgs {
    /// Directory holding the four IDX files.
    #[arg(long)]
    mnist_dir: Option<PathBuf>,
    /// Use only the first N training images.
    #[arg(long)]
    train_limit: Option<usize>,
    /// Use only the first N test images.
    #[arg(long)]
    test_limit: Option<usize>,
    /// Training epochs for both networks.
    #[arg(long)]
    epochs: Option<usize>,
}

pub fn mnist_nn(ctx: &Ctx, a: MnistArgs) -> Result<()> {
    let mut cfg = match (&ctx.config, &a.mnist_dir) {
        (Some(_), _) => ctx.config_or(MnistNnConfig::new(PathBuf::new()))?,
        (None, Some(dir)) => MnistNnConfig::new(dir.clone()),
        (None, None) => anyhow::bail!("pass --mnist-dir or --config"),
    };
    if let Some(d) = a.mnist_dir {
        cfg.mnist_dir = d;
    }
    if a.train_limit.is_some() {
        cfg.train_limit = a.train_limit;
    }
    if a.test_limit.is_some() {
        cfg.test_limit = a.test_limit;
    }
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    cfg.seed = ctx.seed;
    let run = run_mnist_nn(&cfg)?;
    let dir = ctx.out_dir()?;
    run.report.write(dir)?;
    let samples = dir.join("samples");
    std::fs::create_dir_all(&samples).with_context(|| format!("creating {}", samples.display()))?;
    for s in &run.samples {
        write_pgm(
            &samples.join(format!("{}_label{}.pgm", s.name, s.label)),
            s.pixels.as_slice().unwrap_or(&s.pixels.to_vec()),
            run.rows,
            run.cols,
        )?;
    }
    let mut curves = Vec::new();
    for attack in &cfg.attacks {
        for model in ["natural", "robust"] {
            let tag = format!("{model}_{}", attack.as_str());
            curves.push(format!("{tag}_robust_acc"));
            curves.push(format!("nn_acc_on_{tag}"));
        }
    }
    plots::metrics_vs_eps(
        dir,
        &curves,
        0,
        "mnist_accuracy.svg",
        "MNIST: MLPs vs nearest neighbour",
    )?;
    let get = |m: &str, eps: f64| {
        run.report
            .results
            .iter()
            .find(|r| r.metric == m && r.eps == eps)
            .map_or(f64::NAN, |r| r.value)
    };
    let clean = get("nn_clean_acc", 0.0);
    println!("1-NN clean accuracy {clean:.4}");
    for &eps in &cfg.eps_grid {
        println!(
            "ε {eps:<5} natural BIM {:.4}  NN on those points {:.4}",
            get("natural_bim_robust_acc", eps),
            get("nn_acc_on_natural_bim", eps)
        );
    }
    if ctx.assert_mode {
        let mut c = Checks::default();
        c.expect(
            clean >= 0.94,
            format!("1-NN clean accuracy {clean:.4} ≥ 0.94"),
        );
        if cfg.attacks.contains(&codimlab::attacks::AttackMethod::Bim) {
            for &eps in cfg.eps_grid.iter().filter(|&&e| e > 0.0 && e <= 0.5) {
                let (nn, mlp) = (
                    get("nn_acc_on_natural_bim", eps),
                    get("natural_bim_robust_acc", eps),
                );
                c.expect(
                    nn > mlp,
                    format!("ε = {eps}: NN {nn:.4} > natural model {mlp:.4} under BIM"),
                );
            }
        }
        let (on_nn, on_robust) = (
            get("nn_walk_success_nn", cfg.walk_eps),
            get("nn_walk_success_robust", cfg.walk_eps),
        );
        c.expect(
            on_nn > on_robust,
            format!("NN walk fools NN ({on_nn:.4}) more than the robust model ({on_robust:.4})"),
        );
        c.finish()?;
    }
    Ok(())
}
