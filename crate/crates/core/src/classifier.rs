use ndarray::{ArrayView1, ArrayView2};

/// Anything that maps a point to a class index.
pub trait Classifier: Sync {
    fn predict(&self, x: ArrayView1<f64>) -> usize;

    fn predict_batch(&self, xs: ArrayView2<f64>) -> Vec<usize> {
        xs.rows().into_iter().map(|r| self.predict(r)).collect()
    }
}

impl<F> Classifier for F
where
    F: Fn(ArrayView1<f64>) -> usize + Sync,
{
    fn predict(&self, x: ArrayView1<f64>) -> usize {
        self(x)
    }
}

/// Fraction of rows of `xs` classified as `labels`.
pub fn accuracy<C: Classifier + ?Sized>(clf: &C, xs: ArrayView2<f64>, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return f64::NAN;
    }
    let preds = clf.predict_batch(xs);
    let correct = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    correct as f64 / labels.len() as f64
}
