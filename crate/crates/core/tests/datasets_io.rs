use codimlab::datasets::*;
use codimlab::sampling::LabeledDataset;
use codimlab::{Error, NormKind};
use ndarray::Array2;
use proptest::prelude::*;
use tempfile::tempdir;

fn pairwise_max_distortion(a: &LabeledDataset, b: &LabeledDataset) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..a.len() {
        for j in (i + 1)..a.len() {
            let da = NormKind::L2.distance(a.points.row(i), a.points.row(j));
            let db = NormKind::L2.distance(b.points.row(i), b.points.row(j));
            worst = worst.max((da - db).abs());
        }
    }
    worst
}

#[test]
fn embeddings_preserve_distances() {
    let base = make_circles(60, 10, &CodimEmbedding::padded(2, 4))
        .unwrap()
        .train;
    let padded = zero_pad(&base, 12).unwrap();
    assert_eq!(pairwise_max_distortion(&base, &padded), 0.0);
    let rotated = rotate(padded.clone(), 8);
    assert!(pairwise_max_distortion(&padded, &rotated) <= 1e-9);
    rotated.check_on_manifold().unwrap();
    assert!(zero_pad(&rotated, 20).is_err());
}

#[test]
fn circles_codim_and_reach() {
    let split = make_circles(100, 50, &CodimEmbedding::padded(2, 0)).unwrap();
    assert_eq!(split.train.spec.codimension(), 1);
    assert_eq!(split.train.spec.reach_l2(), 1.0);
    for row in split.train.points.rows() {
        assert_eq!(row.iter().filter(|&&x| x != 0.0).count(), 2);
    }
    assert_eq!(coincident_points(&split.train, &split.test), 0);
    assert!(make_circles(10, 10, &CodimEmbedding::padded(1, 0)).is_err());
}

#[test]
fn dataset_csv_round_trip() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("planes.csv");
    let emb = CodimEmbedding {
        target_ambient_dim: 5,
        rotate: true,
        seed: 6,
    };
    let ds = make_planes(2.0, &emb).unwrap().train;
    write_dataset(&path, &ds).unwrap();
    assert!(sidecar_path(&path).exists());
    let back = read_dataset(&path).unwrap();
    assert_eq!(back, ds);
    assert_eq!(count_lines(&path).unwrap(), ds.len() + 1);
    let header = std::fs::read_to_string(&path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert_eq!(header, "x1,x2,x3,x4,x5,label");
}

#[test]
fn csv_errors_are_structured() {
    let dir = tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x1,x2,label\n1.0,abc,0\n").unwrap();
    assert!(matches!(read_points_csv(&bad), Err(Error::Format(_))));
    std::fs::write(&bad, "x1,x2\n1.0,2.0\n").unwrap();
    assert!(matches!(read_points_csv(&bad), Err(Error::Format(_))));
    std::fs::write(&bad, "x1,label\nNaN,0\n").unwrap();
    assert!(matches!(
        read_points_csv(&bad),
        Err(Error::NonFinite { row: 0 })
    ));
    assert!(matches!(
        read_points_csv(&dir.path().join("missing.csv")),
        Err(Error::Io { .. })
    ));
    let orphan = dir.path().join("orphan.csv");
    write_points_csv(&orphan, &Array2::zeros((2, 2)), &[0, 1]).unwrap();
    assert!(matches!(read_dataset(&orphan), Err(Error::Io { .. })));
}

fn write_fake_mnist(dir: &std::path::Path, n: usize) -> Vec<u8> {
    let pixels: Vec<u8> = (0..n * 4 * 3).map(|i| (i * 37 % 256) as u8).collect();
    let labels: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
    for prefix in ["train", "t10k"] {
        write_idx_images(
            &dir.join(format!("{prefix}-images-idx3-ubyte")),
            4,
            3,
            &pixels,
        )
        .unwrap();
        write_idx_labels(&dir.join(format!("{prefix}-labels-idx1-ubyte")), &labels).unwrap();
    }
    pixels
}

#[test]
fn idx_round_trip_and_scaling() {
    let dir = tempdir().unwrap();
    let pixels = write_fake_mnist(dir.path(), 7);
    let (train, test) = load_mnist(dir.path()).unwrap();
    assert_eq!((train.len(), train.rows, train.cols), (7, 4, 3));
    assert_eq!(test.split, MnistSplit::Test);
    for (v, &b) in train.images.iter().zip(&pixels) {
        assert_eq!(*v, f64::from(b) / 255.0);
    }
    assert_eq!(train.labels, (0..7).map(|i| i % 10).collect::<Vec<_>>());
    assert_eq!(train.head(3).len(), 3);
    let csv = dir.path().join("mnist.csv");
    write_mnist_csv(&csv, &train).unwrap();
    let back = read_mnist_csv(&csv, MnistSplit::Train, 4, 3).unwrap();
    assert_eq!(back.images, train.images);
    assert_eq!(back.labels, train.labels);
    assert!(read_mnist_csv(&csv, MnistSplit::Train, 5, 3).is_err());
}

#[test]
fn idx_errors() {
    let dir = tempdir().unwrap();
    write_fake_mnist(dir.path(), 5);
    let img = dir.path().join("train-images-idx3-ubyte");
    let lbl = dir.path().join("train-labels-idx1-ubyte");

    let bytes = std::fs::read(&img).unwrap();
    std::fs::write(&img, &bytes[..bytes.len() - 4]).unwrap();
    match load_mnist_split(dir.path(), MnistSplit::Train) {
        Err(Error::Truncated {
            expected, actual, ..
        }) => assert_eq!((expected, actual), (16 + 60, 16 + 56)),
        other => panic!("{other:?}"),
    }
    let mut bad = bytes.clone();
    bad[3] = 0;
    std::fs::write(&img, &bad).unwrap();
    assert!(matches!(
        load_mnist_split(dir.path(), MnistSplit::Train),
        Err(Error::BadMagic { expected: 2051, .. })
    ));
    std::fs::write(&img, &bytes).unwrap();

    write_idx_labels(&lbl, &[1, 2, 3]).unwrap();
    assert!(matches!(
        load_mnist_split(dir.path(), MnistSplit::Train),
        Err(Error::CountMismatch {
            images: 5,
            labels: 3
        })
    ));
    std::fs::write(&lbl, [0u8, 0, 8, 1]).unwrap();
    assert!(matches!(
        read_idx_labels(&lbl),
        Err(Error::Truncated { .. })
    ));
    assert!(matches!(
        load_mnist_split(&dir.path().join("nowhere"), MnistSplit::Test),
        Err(Error::Io { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn csv_preserves_values_exactly(vals in prop::collection::vec(-1e300f64..1e300, 1..40), d in 1usize..5) {
        let n = vals.len() / d;
        prop_assume!(n > 0);
        let pts = Array2::from_shape_vec((n, d), vals[..n * d].to_vec()).unwrap();
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let dir = tempdir().unwrap();
        let path = dir.path().join("p.csv");
        write_points_csv(&path, &pts, &labels).unwrap();
        let (p2, l2) = read_points_csv(&path).unwrap();
        prop_assert_eq!(p2, pts);
        prop_assert_eq!(l2, labels);
    }

    #[test]
    fn rotation_is_orthogonal(d in 1usize..12, seed in 0u64..1000) {
        let q = random_rotation(d, seed);
        let eye = q.t().dot(&q);
        for ((i, j), v) in eye.indexed_iter() {
            let target = if i == j { 1.0 } else { 0.0 };
            prop_assert!((v - target).abs() < 1e-12);
        }
    }
}
