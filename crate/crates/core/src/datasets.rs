//! Synthetic datasets with controlled codimension, MNIST IDX ingestion and
//! CSV/JSON persistence.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{s, Array2};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ManifoldSpec;
use crate::rng::{derive_seed, stream_rng};
use crate::sampling::{
    grid_cell_centers, grid_cover_flats_with, random_sample, CoverConfig, GridConvention,
    LabeledDataset, DEFAULT_GRID_CAP,
};

pub const IDX_IMAGES_MAGIC: u32 = 2051;
pub const IDX_LABELS_MAGIC: u32 = 2049;

const TRAIN_SALT: u64 = 0x7472_6169;
const TEST_SALT: u64 = 0x7465_7374;
const ROTATION_SALT: u64 = 0x726f_7461;

/// Random orthogonal `dim × dim` matrix from orthonormalised Gaussian columns.
pub fn random_rotation(dim: usize, seed: u64) -> Array2<f64> {
    let mut rng = stream_rng(seed, 0);
    let mut q = Array2::<f64>::from_shape_simple_fn((dim, dim), || StandardNormal.sample(&mut rng));
    for j in 0..dim {
        // Two Gram-Schmidt passes keep the columns orthogonal to ~1e-15.
        for _ in 0..2 {
            for i in 0..j {
                let proj = q.column(i).dot(&q.column(j));
                let qi = q.column(i).to_owned();
                q.column_mut(j).scaled_add(-proj, &qi);
            }
        }
        let n = q.column(j).dot(&q.column(j)).sqrt();
        q.column_mut(j).mapv_inplace(|x| x / n);
    }
    q
}

/// How a low-dimensional family is placed in a larger ambient space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodimEmbedding {
    pub target_ambient_dim: usize,
    pub rotate: bool,
    pub seed: u64,
}

impl CodimEmbedding {
    pub fn padded(target_ambient_dim: usize, seed: u64) -> Self {
        CodimEmbedding {
            target_ambient_dim,
            rotate: false,
            seed,
        }
    }

    fn spec_for(&self, base: &ManifoldSpec) -> Result<ManifoldSpec> {
        if self.target_ambient_dim < base.intrinsic_dim() + 1 {
            return Err(Error::arg(
                "target_ambient_dim",
                format!(
                    "{} is below intrinsic dimension + 1 = {}",
                    self.target_ambient_dim,
                    base.intrinsic_dim() + 1
                ),
            ));
        }
        base.with_ambient_dim(self.target_ambient_dim)
    }

    fn finish(&self, ds: LabeledDataset) -> LabeledDataset {
        if self.rotate {
            rotate(ds, derive_seed(self.seed, ROTATION_SALT))
        } else {
            ds
        }
    }
}

/// Appends zero coordinates up to `dim`.
pub fn zero_pad(ds: &LabeledDataset, dim: usize) -> Result<LabeledDataset> {
    if ds.rotation_seed.is_some() {
        return Err(Error::Unsupported("zero-padding a rotated dataset".into()));
    }
    if dim < ds.dim() {
        return Err(Error::arg(
            "dim",
            format!("cannot pad {} coordinates down to {dim}", ds.dim()),
        ));
    }
    let spec = ds.spec.with_ambient_dim(dim)?;
    let mut points = Array2::zeros((ds.len(), dim));
    match ds.spec.family {
        // Flats keep the separating axis last.
        crate::geometry::Family::ParallelFlats { flat_dim, .. } => {
            points
                .slice_mut(s![.., ..flat_dim])
                .assign(&ds.points.slice(s![.., ..flat_dim]));
            points
                .column_mut(dim - 1)
                .assign(&ds.points.column(ds.dim() - 1));
            let mid = ds.dim() - 1 - flat_dim;
            points
                .slice_mut(s![.., flat_dim..flat_dim + mid])
                .assign(&ds.points.slice(s![.., flat_dim..ds.dim() - 1]));
        }
        crate::geometry::Family::ConcentricSpheres { .. } => {
            points.slice_mut(s![.., ..ds.dim()]).assign(&ds.points);
        }
    }
    let mut out = LabeledDataset::new(points, ds.labels.clone(), spec, ds.provenance.clone())?;
    out.rotation_seed = None;
    Ok(out)
}

/// Applies the rotation with the given seed to an unrotated dataset.
pub fn rotate(mut ds: LabeledDataset, seed: u64) -> LabeledDataset {
    assert!(ds.rotation_seed.is_none(), "dataset is already rotated");
    let q = random_rotation(ds.dim(), seed);
    ds.points = ds.points.dot(&q.t());
    ds.rotation_seed = Some(seed);
    ds
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
}

/// Concentric circles of radii 1 and 3 with independent train and test draws.
pub fn make_circles(
    n_per_class: usize,
    n_test_per_class: usize,
    embedding: &CodimEmbedding,
) -> Result<DatasetSplit> {
    let spec = embedding.spec_for(&ManifoldSpec::circles(2)?)?;
    let train = random_sample(&spec, n_per_class, derive_seed(embedding.seed, TRAIN_SALT))?;
    let test = random_sample(
        &spec,
        n_test_per_class,
        derive_seed(embedding.seed, TEST_SALT),
    )?;
    Ok(DatasetSplit {
        train: embedding.finish(train),
        test: embedding.finish(test),
    })
}

/// Two flat squares with a grid-vertex training set and a cell-centre test set.
pub fn make_planes(delta: f64, embedding: &CodimEmbedding) -> Result<DatasetSplit> {
    if embedding.target_ambient_dim < 3 {
        return Err(Error::arg(
            "target_ambient_dim",
            "planes need at least 3 dimensions",
        ));
    }
    let spec = embedding.spec_for(&ManifoldSpec::planes(3)?)?;
    let train = grid_cover_flats_with(&spec, delta, GridConvention::Ceil, DEFAULT_GRID_CAP)?;
    let test = grid_cell_centers(&spec, delta, GridConvention::Ceil, DEFAULT_GRID_CAP)?;
    Ok(DatasetSplit {
        train: embedding.finish(train),
        test: embedding.finish(test),
    })
}

/// Number of (train, test) pairs that coincide exactly.
pub fn coincident_points(train: &LabeledDataset, test: &LabeledDataset) -> usize {
    test.points
        .rows()
        .into_iter()
        .filter(|t| train.points.rows().into_iter().any(|r| r == *t))
        .count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MnistSplit {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MnistSet {
    /// `n × (rows·cols)` pixels scaled to `[0, 1]`.
    pub images: Array2<f64>,
    pub labels: Vec<usize>,
    pub split: MnistSplit,
    pub rows: usize,
    pub cols: usize,
}

impl MnistSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// First `n` examples.
    pub fn head(&self, n: usize) -> MnistSet {
        let n = n.min(self.len());
        MnistSet {
            images: self.images.slice(s![..n, ..]).to_owned(),
            labels: self.labels[..n].to_vec(),
            split: self.split,
            rows: self.rows,
            cols: self.cols,
        }
    }
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn check_len(path: &Path, bytes: &[u8], expected: usize) -> Result<()> {
    if bytes.len() < expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected,
            actual: bytes.len(),
        });
    }
    Ok(())
}

/// Parses an IDX3 image file: returns `(n, rows, cols, pixels)`.
pub fn read_idx_images(path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    let bytes = read_file(path)?;
    check_len(path, &bytes, 16)?;
    let magic = read_u32(&bytes, 0);
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: IDX_IMAGES_MAGIC,
            found: magic,
        });
    }
    let (n, rows, cols) = (
        read_u32(&bytes, 4) as usize,
        read_u32(&bytes, 8) as usize,
        read_u32(&bytes, 12) as usize,
    );
    let expected = 16 + n * rows * cols;
    check_len(path, &bytes, expected)?;
    Ok((n, rows, cols, bytes[16..expected].to_vec()))
}

/// Parses an IDX1 label file.
pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = read_file(path)?;
    check_len(path, &bytes, 8)?;
    let magic = read_u32(&bytes, 0);
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: IDX_LABELS_MAGIC,
            found: magic,
        });
    }
    let n = read_u32(&bytes, 4) as usize;
    check_len(path, &bytes, 8 + n)?;
    Ok(bytes[8..8 + n].to_vec())
}

/// Writes IDX files; used for fixtures and exports.
pub fn write_idx_images(path: &Path, rows: usize, cols: usize, pixels: &[u8]) -> Result<()> {
    let n = pixels.len() / (rows * cols);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IDX_IMAGES_MAGIC, n as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn find_file(dir: &Path, stems: &[&str]) -> PathBuf {
    stems
        .iter()
        .map(|s| dir.join(s))
        .find(|p| p.exists())
        .unwrap_or_else(|| dir.join(stems[0]))
}

/// Loads one split from the standard IDX file names in `dir`.
pub fn load_mnist_split(dir: &Path, split: MnistSplit) -> Result<MnistSet> {
    let prefix = match split {
        MnistSplit::Train => "train",
        MnistSplit::Test => "t10k",
    };
    let img_path = find_file(
        dir,
        &[
            &format!("{prefix}-images-idx3-ubyte"),
            &format!("{prefix}-images.idx3-ubyte"),
        ],
    );
    let lbl_path = find_file(
        dir,
        &[
            &format!("{prefix}-labels-idx1-ubyte"),
            &format!("{prefix}-labels.idx1-ubyte"),
        ],
    );
    let (n, rows, cols, pixels) = read_idx_images(&img_path)?;
    let labels = read_idx_labels(&lbl_path)?;
    if labels.len() != n {
        return Err(Error::CountMismatch {
            images: n,
            labels: labels.len(),
        });
    }
    let images = Array2::from_shape_vec(
        (n, rows * cols),
        pixels.iter().map(|&b| f64::from(b) / 255.0).collect(),
    )
    .expect("pixel count checked against header");
    Ok(MnistSet {
        images,
        labels: labels.into_iter().map(usize::from).collect(),
        split,
        rows,
        cols,
    })
}

pub fn load_mnist(dir: &Path) -> Result<(MnistSet, MnistSet)> {
    Ok((
        load_mnist_split(dir, MnistSplit::Train)?,
        load_mnist_split(dir, MnistSplit::Test)?,
    ))
}

fn csv_header(dim: usize) -> Vec<String> {
    (1..=dim)
        .map(|i| format!("x{i}"))
        .chain(std::iter::once("label".to_string()))
        .collect()
}

/// Writes rows as `x1..xd,label` with round-trip float formatting.
pub fn write_points_csv(path: &Path, points: &Array2<f64>, labels: &[usize]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(csv_header(points.ncols()))?;
    let mut record = Vec::with_capacity(points.ncols() + 1);
    for (row, label) in points.rows().into_iter().zip(labels) {
        record.clear();
        record.extend(row.iter().map(|x| format!("{x:?}")));
        record.push(label.to_string());
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_points_csv(path: &Path) -> Result<(Array2<f64>, Vec<usize>)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(BufReader::new(file));
    let headers = r.headers()?.clone();
    if headers.is_empty() || &headers[headers.len() - 1] != "label" {
        return Err(Error::Format(format!(
            "{}: last column must be `label`",
            path.display()
        )));
    }
    let dim = headers.len() - 1;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        for field in rec.iter().take(dim) {
            let x: f64 = field.trim().parse().map_err(|_| {
                Error::Format(format!(
                    "{}: row {row}: bad number `{field}`",
                    path.display()
                ))
            })?;
            if !x.is_finite() {
                return Err(Error::NonFinite { row });
            }
            data.push(x);
        }
        let label = rec[dim].trim().parse().map_err(|_| {
            Error::Format(format!(
                "{}: row {row}: bad label `{}`",
                path.display(),
                &rec[dim]
            ))
        })?;
        labels.push(label);
    }
    let points = Array2::from_shape_vec((labels.len(), dim), data)
        .expect("csv reader enforces equal row lengths");
    Ok((points, labels))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Sidecar {
    spec: ManifoldSpec,
    provenance: CoverConfig,
    rotation_seed: Option<u64>,
}

/// Path of the JSON sidecar for a dataset CSV.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

pub fn write_dataset(csv_path: &Path, ds: &LabeledDataset) -> Result<()> {
    write_points_csv(csv_path, &ds.points, &ds.labels)?;
    let side = Sidecar {
        spec: ds.spec.clone(),
        provenance: ds.provenance.clone(),
        rotation_seed: ds.rotation_seed,
    };
    let json_path = sidecar_path(csv_path);
    let file = fs::File::create(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &side)?;
    w.write_all(b"\n").map_err(|e| Error::io(&json_path, e))?;
    Ok(())
}

pub fn read_dataset(csv_path: &Path) -> Result<LabeledDataset> {
    let (points, labels) = read_points_csv(csv_path)?;
    let json_path = sidecar_path(csv_path);
    let text = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let side: Sidecar = serde_json::from_str(&text)?;
    side.spec.validate()?;
    let mut ds = LabeledDataset::new(points, labels, side.spec, side.provenance)?;
    ds.rotation_seed = side.rotation_seed;
    Ok(ds)
}

pub fn write_mnist_csv(path: &Path, set: &MnistSet) -> Result<()> {
    write_points_csv(path, &set.images, &set.labels)
}

pub fn read_mnist_csv(
    path: &Path,
    split: MnistSplit,
    rows: usize,
    cols: usize,
) -> Result<MnistSet> {
    let (images, labels) = read_points_csv(path)?;
    if images.ncols() != rows * cols {
        return Err(Error::DimensionMismatch {
            expected: rows * cols,
            actual: images.ncols(),
        });
    }
    Ok(MnistSet {
        images,
        labels,
        split,
        rows,
        cols,
    })
}

/// Counts lines in a text file; used by tests and the CLI summary.
pub fn count_lines(path: &Path) -> Result<usize> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(BufReader::new(file).lines().count())
}
