//! Exact nearest-neighbour classification and its robustness certificate.
//!
//! Neighbours are ordered by `(distance, training index)`, so ties always go
//! to the lowest index. The kd-tree and the brute-force scan compare the same
//! distance keys and therefore return identical neighbour lists.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::Classifier;
use crate::error::{Error, Result};
use crate::geometry::ManifoldSpec;
use crate::norm::NormKind;
use crate::rng::stream_rng;
use crate::sampling::{estimate_cover_radius, LabeledDataset};

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Acceleration {
    BruteForce,
    /// kd-tree; only used for L2; L∞ indexes always scan.
    SpatialTree,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub index: usize,
    pub label: usize,
    pub distance: f64,
}

#[derive(Debug, Clone)]
pub struct NnIndex {
    points: Array2<f64>,
    labels: Vec<usize>,
    norm: NormKind,
    tree: Option<KdTree>,
}

impl NnIndex {
    pub fn new(
        points: Array2<f64>,
        labels: Vec<usize>,
        norm: NormKind,
        accel: Acceleration,
    ) -> Result<Self> {
        if points.nrows() != labels.len() {
            return Err(Error::CountMismatch {
                images: points.nrows(),
                labels: labels.len(),
            });
        }
        let tree = match (accel, norm) {
            (Acceleration::SpatialTree, NormKind::L2) if points.nrows() > 0 => {
                Some(KdTree::build(&points))
            }
            _ => None,
        };
        Ok(NnIndex {
            points,
            labels,
            norm,
            tree,
        })
    }

    /// Index over a dataset's canonical-frame points.
    pub fn from_dataset(ds: &LabeledDataset, norm: NormKind, accel: Acceleration) -> Result<Self> {
        Self::new(ds.canonical_points(), ds.labels.clone(), norm, accel)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn norm(&self) -> NormKind {
        self.norm
    }

    pub fn acceleration(&self) -> Acceleration {
        if self.tree.is_some() {
            Acceleration::SpatialTree
        } else {
            Acceleration::BruteForce
        }
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    fn key(&self, i: usize, q: ArrayView1<f64>) -> f64 {
        let row = self.points.row(i);
        match self.norm {
            NormKind::L2 => row
                .iter()
                .zip(q.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum(),
            NormKind::Linf => row
                .iter()
                .zip(q.iter())
                .fold(0.0, |m, (a, b)| m.max((a - b).abs())),
        }
    }

    fn key_to_distance(&self, key: f64) -> f64 {
        match self.norm {
            NormKind::L2 => key.sqrt(),
            NormKind::Linf => key,
        }
    }

    fn check_query(&self, q: ArrayView1<f64>) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Empty("nearest-neighbour index"));
        }
        if q.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: q.len(),
            });
        }
        Ok(())
    }

    pub fn nearest(&self, q: ArrayView1<f64>) -> Result<Neighbor> {
        Ok(self.k_nearest(q, 1)?[0])
    }

    /// Label of the nearest training point and the distance to it.
    pub fn classify(&self, q: ArrayView1<f64>) -> Result<(usize, f64)> {
        let n = self.nearest(q)?;
        Ok((n.label, n.distance))
    }

    /// The `k` nearest training points in ascending `(distance, index)` order.
    pub fn k_nearest(&self, q: ArrayView1<f64>, k: usize) -> Result<Vec<Neighbor>> {
        self.check_query(q)?;
        if k == 0 {
            return Err(Error::arg("k", "must be at least 1"));
        }
        if k > self.len() {
            return Err(Error::arg(
                "k",
                format!("{k} exceeds index size {}", self.len()),
            ));
        }
        let mut heap = CandidateHeap::new(k);
        match &self.tree {
            Some(tree) => tree.search(self, q, &mut heap),
            None => {
                for i in 0..self.len() {
                    heap.offer(self.key(i, q), i);
                }
            }
        }
        Ok(heap
            .into_sorted()
            .into_iter()
            .map(|c| Neighbor {
                index: c.index,
                label: self.labels[c.index],
                distance: self.key_to_distance(c.key),
            })
            .collect())
    }
}

impl Classifier for NnIndex {
    fn predict(&self, x: ArrayView1<f64>) -> usize {
        self.classify(x).expect("query dimension matches index").0
    }

    fn predict_batch(&self, xs: ndarray::ArrayView2<f64>) -> Vec<usize> {
        let rows: Vec<_> = xs.rows().into_iter().collect();
        rows.par_iter().map(|r| self.predict(*r)).collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    key: f64,
    index: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key
            .total_cmp(&other.key)
            .then(self.index.cmp(&other.index))
    }
}

/// Bounded max-heap holding the best `k` candidates seen so far.
struct CandidateHeap {
    k: usize,
    heap: BinaryHeap<Candidate>,
}

impl CandidateHeap {
    fn new(k: usize) -> Self {
        CandidateHeap {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    fn offer(&mut self, key: f64, index: usize) {
        let c = Candidate { key, index };
        if self.heap.len() < self.k {
            self.heap.push(c);
        } else if let Some(top) = self.heap.peek() {
            if c < *top {
                self.heap.pop();
                self.heap.push(c);
            }
        }
    }

    /// Largest key still worth visiting; equal keys may win on index.
    fn bound(&self) -> f64 {
        if self.heap.len() < self.k {
            f64::INFINITY
        } else {
            self.heap.peek().map_or(f64::INFINITY, |c| c.key)
        }
    }

    fn into_sorted(self) -> Vec<Candidate> {
        self.heap.into_sorted_vec()
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
struct KdTree {
    nodes: Vec<Node>,
    order: Vec<usize>,
}

impl KdTree {
    fn build(points: &Array2<f64>) -> Self {
        let mut tree = KdTree {
            nodes: Vec::new(),
            order: (0..points.nrows()).collect(),
        };
        let n = points.nrows();
        tree.build_node(points, 0, n);
        tree
    }

    fn build_node(&mut self, points: &Array2<f64>, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { start, end });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let slice = &mut self.order[start..end];
        let (mut best_dim, mut best_spread) = (0, 0.0);
        for dim in 0..points.ncols() {
            let (lo, hi) = slice
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    let v = points[[i, dim]];
                    (lo.min(v), hi.max(v))
                });
            if hi - lo > best_spread {
                best_spread = hi - lo;
                best_dim = dim;
            }
        }
        if best_spread == 0.0 {
            return id;
        }
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |&a, &b| {
            points[[a, best_dim]].total_cmp(&points[[b, best_dim]])
        });
        let value = points[[slice[mid], best_dim]];
        let left = self.build_node(points, start, start + mid);
        let right = self.build_node(points, start + mid, end);
        self.nodes[id] = Node::Split {
            dim: best_dim,
            value,
            left,
            right,
        };
        id
    }

    fn search(&self, index: &NnIndex, q: ArrayView1<f64>, heap: &mut CandidateHeap) {
        self.visit(0, index, q, heap);
    }

    fn visit(&self, node: usize, index: &NnIndex, q: ArrayView1<f64>, heap: &mut CandidateHeap) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    heap.offer(index.key(i, q), i);
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                // Left holds coordinates <= value, right holds >= value.
                let diff = q[dim] - value;
                let (near, far) = if diff <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.visit(near, index, q, heap);
                if diff * diff <= heap.bound() {
                    self.visit(far, index, q, heap);
                }
            }
        }
    }
}

/// Which sampling condition a certificate checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverCondition {
    /// Nearest neighbour on a clean cover: `δ ≤ 2(rch − ε)`.
    NearestNeighbor,
    /// Ball-based adversarial learner: `δ ≤ rch − ε`.
    BallLearner,
    /// Nearest neighbour with samples displaced up to τ: `δ ≤ 2(rch − ε) − τ`.
    NoisyNearestNeighbor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessCertificate {
    pub eps: f64,
    pub tau: f64,
    pub delta_measured: f64,
    pub rch: f64,
    pub condition: CoverCondition,
    /// Largest admissible cover radius under `condition`.
    pub delta_bound: f64,
    pub holds: bool,
    pub cover_probes: usize,
    pub tube_probes: usize,
    pub tube_errors: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    pub eps: f64,
    pub norm: NormKind,
    pub tau: f64,
    pub cover_probes: usize,
    pub tube_probes: usize,
    pub seed: u64,
}

impl CertifyOptions {
    pub fn new(eps: f64, norm: NormKind) -> Self {
        CertifyOptions {
            eps,
            norm,
            tau: 0.0,
            cover_probes: 10_000,
            tube_probes: 10_000,
            seed: 0,
        }
    }
}

/// Certifies that nearest-neighbour classification with `index` is correct
/// on the whole ε-tube of `spec`, then confirms it on random tube points.
///
/// The index must hold points in the canonical frame of `spec` and use the same
/// norm as `opts.norm`.
pub fn certify(
    index: &NnIndex,
    spec: &ManifoldSpec,
    opts: &CertifyOptions,
) -> Result<RobustnessCertificate> {
    if index.norm() != opts.norm {
        return Err(Error::arg(
            "norm",
            "index norm differs from certificate norm",
        ));
    }
    let rch = spec.reach(opts.norm)?;
    if !(opts.eps >= 0.0 && opts.eps < rch) {
        return Err(Error::Divergent(format!(
            "eps {} must lie in [0, rch = {rch}); no robust classifier is guaranteed",
            opts.eps
        )));
    }
    if !(opts.tau >= 0.0 && opts.tau < rch) {
        return Err(Error::arg(
            "tau",
            format!("noise level {} must lie in [0, {rch})", opts.tau),
        ));
    }
    let condition = if opts.tau > 0.0 {
        CoverCondition::NoisyNearestNeighbor
    } else {
        CoverCondition::NearestNeighbor
    };
    let delta_bound = 2.0 * (rch - opts.eps) - opts.tau;
    let delta_measured = estimate_cover_radius(index, spec, opts.cover_probes, opts.seed)?;
    let tube_seed = crate::rng::derive_seed(opts.seed, 0x7475_6265);
    let tube_errors = (0..opts.tube_probes)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(tube_seed, i as u64);
            let class = i % 2;
            let (p, _) = spec.sample_in_tube(class, opts.eps, opts.norm, &mut rng);
            index
                .classify(p.view())
                .map(|(label, _)| usize::from(label != class))
        })
        .sum::<Result<usize>>()?;
    Ok(RobustnessCertificate {
        eps: opts.eps,
        tau: opts.tau,
        delta_measured,
        rch,
        condition,
        delta_bound,
        holds: delta_measured <= delta_bound,
        cover_probes: opts.cover_probes,
        tube_probes: opts.tube_probes,
        tube_errors,
    })
}

/// Cover-only check for the ball-based learner (no classifier to probe).
pub fn certify_ball_learner(
    delta_measured: f64,
    rch: f64,
    eps: f64,
) -> Result<RobustnessCertificate> {
    let delta_bound = crate::bounds::l_cover_bound(rch, eps)?;
    Ok(RobustnessCertificate {
        eps,
        tau: 0.0,
        delta_measured,
        rch,
        condition: CoverCondition::BallLearner,
        delta_bound,
        holds: delta_measured <= delta_bound,
        cover_probes: 0,
        tube_probes: 0,
        tube_errors: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn toy() -> NnIndex {
        let pts = array![[0.0, 0.0], [2.0, 0.0], [0.0, 3.0], [5.0, 5.0]];
        NnIndex::new(
            pts,
            vec![0, 1, 0, 1],
            NormKind::L2,
            Acceleration::SpatialTree,
        )
        .unwrap()
    }

    #[test]
    fn query_on_training_point() {
        let idx = toy();
        assert_eq!(idx.classify(array![2.0, 0.0].view()).unwrap(), (1, 0.0));
    }

    #[test]
    fn tie_goes_to_lowest_index() {
        let idx = toy();
        let (label, d) = idx.classify(array![1.0, 0.0].view()).unwrap();
        assert_eq!(label, 0);
        assert_eq!(d, 1.0);
        let pts = array![[2.0, 0.0], [0.0, 0.0]];
        let idx = NnIndex::new(pts, vec![1, 0], NormKind::Linf, Acceleration::BruteForce).unwrap();
        assert_eq!(idx.classify(array![1.0, 0.0].view()).unwrap().0, 1);
    }

    #[test]
    fn k_nearest_full_and_errors() {
        let idx = toy();
        let all = idx.k_nearest(array![0.0, 0.0].view(), 4).unwrap();
        assert_eq!(
            all.iter().map(|n| n.index).collect::<Vec<_>>(),
            vec![0, 1, 2, 3]
        );
        assert!(idx.k_nearest(array![0.0, 0.0].view(), 0).is_err());
        assert!(idx.k_nearest(array![0.0, 0.0].view(), 5).is_err());
        assert!(idx.k_nearest(array![0.0].view(), 1).is_err());
        let empty = NnIndex::new(
            Array2::zeros((0, 2)),
            vec![],
            NormKind::L2,
            Acceleration::SpatialTree,
        )
        .unwrap();
        assert!(matches!(
            empty.classify(array![0.0, 0.0].view()),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn linf_falls_back_to_scan() {
        let idx = NnIndex::new(
            array![[0.0], [1.0]],
            vec![0, 1],
            NormKind::Linf,
            Acceleration::SpatialTree,
        )
        .unwrap();
        assert_eq!(idx.acceleration(), Acceleration::BruteForce);
    }

    #[test]
    fn two_point_necessity_example() {
        // One sample per class at distance 2·rch straddling the decision axis of
        // the Planes geometry: the measured cover radius is ~14, far above the
        // bound, so the certificate fails.
        let spec = ManifoldSpec::flats(-10.0, 10.0, 2, 2.0, 3).unwrap();
        let pts = array![[0.0, 0.0, 0.0], [0.0, 0.0, 2.0]];
        let idx = NnIndex::new(pts, vec![0, 1], NormKind::L2, Acceleration::BruteForce).unwrap();
        let mut opts = CertifyOptions::new(0.5, NormKind::L2);
        opts.cover_probes = 500;
        opts.tube_probes = 500;
        let cert = certify(&idx, &spec, &opts).unwrap();
        assert!(!cert.holds);
        assert_eq!(cert.condition, CoverCondition::NearestNeighbor);
        assert!(cert.delta_measured > cert.delta_bound);
    }

    #[test]
    fn certify_rejects_eps_beyond_reach() {
        let spec = ManifoldSpec::planes(3).unwrap();
        let idx = NnIndex::new(
            array![[0.0, 0.0, 0.0]],
            vec![0],
            NormKind::L2,
            Acceleration::BruteForce,
        )
        .unwrap();
        assert!(certify(&idx, &spec, &CertifyOptions::new(1.0, NormKind::L2)).is_err());
    }
}
