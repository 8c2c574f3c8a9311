use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use codimlab::bounds::{self, BoundResult};
use codimlab::datasets::{make_circles, make_planes, read_dataset, write_dataset, CodimEmbedding};
use codimlab::knn::{certify as certify_index, CertifyOptions};
use codimlab::plot::{line_chart, write_svg, Series};
use codimlab::sampling::{
    grid_cover_flats_with, random_sample, verify_cover, GridConvention, DEFAULT_GRID_CAP,
};
use codimlab::{Acceleration, ManifoldSpec, NnIndex, NormKind};
use serde::Serialize;

use crate::checks::Checks;
use crate::Ctx;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    Circles,
    Planes,
}

impl FamilyArg {
    fn intrinsic_dim(self) -> usize {
        match self {
            FamilyArg::Circles => 1,
            FamilyArg::Planes => 2,
        }
    }

    fn spec(self, ambient_dim: usize) -> Result<ManifoldSpec> {
        Ok(match self {
            FamilyArg::Circles => ManifoldSpec::circles(ambient_dim)?,
            FamilyArg::Planes => ManifoldSpec::planes(ambient_dim)?,
        })
    }
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, value_enum, default_value = "circles")]
    family: FamilyArg,
    /// Number of zero-padded (or rotated) extra dimensions.
    #[arg(long, default_value_t = 1)]
    codim: usize,
    /// Circles: training points per class.
    #[arg(long, default_value_t = 1000)]
    n_per_class: usize,
    /// Circles: test points per class.
    #[arg(long, default_value_t = 500)]
    n_test_per_class: usize,
    /// Planes: grid cover radius.
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Apply a random rotation after padding.
    #[arg(long)]
    rotate: bool,
}

pub fn gen_data(ctx: &Ctx, a: GenDataArgs) -> Result<()> {
    let emb = CodimEmbedding {
        target_ambient_dim: a.family.intrinsic_dim() + a.codim,
        rotate: a.rotate,
        seed: ctx.seed,
    };
    let split = match a.family {
        FamilyArg::Circles => make_circles(a.n_per_class, a.n_test_per_class, &emb)?,
        FamilyArg::Planes => make_planes(a.delta, &emb)?,
    };
    let dir = ctx.out_dir()?;
    write_dataset(&dir.join("train.csv"), &split.train)?;
    write_dataset(&dir.join("test.csv"), &split.test)?;
    println!(
        "wrote {} train and {} test points in R^{} to {}",
        split.train.len(),
        split.test.len(),
        split.train.dim(),
        dir.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct CoverArgs {
    #[arg(long, value_enum, default_value = "planes")]
    family: FamilyArg,
    #[arg(long, default_value_t = 3)]
    ambient_dim: usize,
    /// Target cover radius (grid spacing for Planes).
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Draw this many uniform points per class instead of a grid.
    #[arg(long)]
    n_per_class: Option<usize>,
    /// Grid with one extra point per axis, a true δ-cover.
    #[arg(long)]
    strict: bool,
    #[arg(long, default_value_t = 10_000)]
    probes: usize,
    #[arg(long, default_value = "l2")]
    norm: NormKind,
}

#[derive(Serialize)]
struct CoverSummary {
    points: usize,
    delta: f64,
    norm: NormKind,
    is_cover: bool,
    worst_gap: f64,
    n_probe: usize,
}

pub fn cover(ctx: &Ctx, a: CoverArgs) -> Result<()> {
    let spec = a.family.spec(a.ambient_dim)?;
    let ds = match (a.n_per_class, a.family) {
        (Some(n), _) => random_sample(&spec, n, ctx.seed)?,
        (None, FamilyArg::Planes) => {
            let conv = if a.strict {
                GridConvention::Strict
            } else {
                GridConvention::Ceil
            };
            grid_cover_flats_with(&spec, a.delta, conv, DEFAULT_GRID_CAP)?
        }
        (None, FamilyArg::Circles) => {
            bail!("grid covers are built for Planes; pass --n-per-class for Circles")
        }
    };
    let check = verify_cover(&ds, a.delta, a.norm, a.probes, ctx.seed)?;
    write_dataset(&ctx.out_dir()?.join("cover.csv"), &ds)?;
    let summary = CoverSummary {
        points: ds.len(),
        delta: a.delta,
        norm: a.norm,
        is_cover: check.is_cover,
        worst_gap: check.worst_gap,
        n_probe: check.n_probe,
    };
    ctx.write_json("cover_check.json", &summary)?;
    println!(
        "{} points; worst gap {:.6} ({} a {}-cover)",
        ds.len(),
        check.worst_gap,
        if check.is_cover { "is" } else { "not" },
        a.delta
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Ambient dimensions to tabulate.
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 3, 5, 10, 20, 50, 100, 200, 500, 1000])]
    dims: Vec<usize>,
    /// Intrinsic dimension of the flats.
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Tube radius for the sphere coverage bound.
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    /// Sample count for the sphere coverage bound.
    #[arg(long, default_value_t = 1000)]
    n: u64,
    /// Tube radius for the linear-region bound.
    #[arg(long, default_value_t = 0.1)]
    tau: f64,
}

#[derive(Serialize)]
struct BoundRow {
    formula_id: String,
    d: usize,
    inputs: String,
    value: f64,
    log_value: f64,
}

fn bound_row(d: usize, r: BoundResult) -> BoundRow {
    let inputs = r
        .inputs
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(";");
    BoundRow {
        formula_id: r.formula_id.to_string(),
        d,
        inputs,
        value: r.value,
        log_value: r.log_value,
    }
}

pub fn bounds(ctx: &Ctx, a: BoundsArgs) -> Result<()> {
    let mut rows = Vec::new();
    for &d in &a.dims {
        if a.k < d {
            rows.push(bound_row(d, bounds::plane_coverage_bound(a.k, d)?));
            rows.push(bound_row(
                d,
                bounds::tube_cover_sample_lower_bound(a.k, d, -10.0, 10.0)?,
            ));
        }
        rows.push(bound_row(d, bounds::sphere_coverage_bound(a.n, d, a.eps)?));
        if d >= 2 {
            rows.push(bound_row(
                d,
                bounds::linear_region_lower_bound(1.0, 1.0, a.tau, d)?,
            ));
        }
        let offset = bounds::linf_axis_offset(1.0, 3.0, d)?;
        rows.push(BoundRow {
            formula_id: "linf_axis_offset".into(),
            d,
            inputs: "r1=1;r2=3".into(),
            value: offset,
            log_value: offset.ln(),
        });
    }
    let dir = ctx.out_dir()?;
    let path = dir.join("bounds.csv");
    codimlab::experiments::report::write_csv(&path, &rows)?;

    let mut series: Vec<Series> = Vec::new();
    for r in &rows {
        match series.iter_mut().find(|s| s.name == r.formula_id) {
            Some(s) => s.points.push((r.d as f64, r.log_value)),
            None => series.push(Series {
                name: r.formula_id.clone(),
                points: vec![(r.d as f64, r.log_value)],
            }),
        }
    }
    write_svg(
        &dir.join("bounds.svg"),
        &line_chart(
            &series,
            "closed-form bounds",
            "ambient dimension d",
            "ln(bound)",
        ),
    )?;
    println!("wrote {} rows to {}", rows.len(), path.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    /// Training set CSV with its JSON sidecar.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value = "l2")]
    norm: NormKind,
    /// Bound on how far samples sit off the manifold.
    #[arg(long, default_value_t = 0.0)]
    tau: f64,
    #[arg(long, default_value_t = 10_000)]
    cover_probes: usize,
    #[arg(long, default_value_t = 10_000)]
    tube_probes: usize,
}

pub fn certify(ctx: &Ctx, a: CertifyArgs) -> Result<()> {
    let ds = read_dataset(&a.data).with_context(|| format!("loading {}", a.data.display()))?;
    let accel = if a.norm == NormKind::L2 {
        Acceleration::SpatialTree
    } else {
        Acceleration::BruteForce
    };
    let index = NnIndex::new(ds.canonical_points(), ds.labels.clone(), a.norm, accel)?;
    let opts = CertifyOptions {
        tau: a.tau,
        cover_probes: a.cover_probes,
        tube_probes: a.tube_probes,
        seed: ctx.seed,
        ..CertifyOptions::new(a.eps, a.norm)
    };
    let cert = certify_index(&index, &ds.spec, &opts)?;
    ctx.write_json("certificate.json", &cert)?;
    println!(
        "δ measured {:.6}, admissible {:.6}: {}; {} of {} tube probes misclassified",
        cert.delta_measured,
        cert.delta_bound,
        if cert.holds {
            "certified"
        } else {
            "not certified"
        },
        cert.tube_errors,
        cert.tube_probes
    );
    if ctx.assert_mode {
        let mut c = Checks::default();
        c.expect(
            cert.holds,
            format!(
                "cover radius {:.6} within {:.6}",
                cert.delta_measured, cert.delta_bound
            ),
        );
        c.expect(
            cert.tube_errors == 0,
            format!("{} tube errors", cert.tube_errors),
        );
        c.finish()?;
    }
    Ok(())
}
