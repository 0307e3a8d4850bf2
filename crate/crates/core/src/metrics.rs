//! Nearest-neighbor classification and OA / AA / κ.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{JpsaError, Result};

/// 1-NN in Euclidean distance; ties go to the lowest training index.
pub fn nn_classify(
    train_feats: &DMatrix<f64>,
    train_labels: &[usize],
    test_feats: &DMatrix<f64>,
) -> Result<Vec<usize>> {
    if train_feats.ncols() == 0 {
        return Err(JpsaError::input("nearest-neighbor classifier needs at least one training sample"));
    }
    if train_labels.len() != train_feats.ncols() {
        return Err(JpsaError::input(format!(
            "{} training columns but {} labels",
            train_feats.ncols(),
            train_labels.len()
        )));
    }
    if train_feats.nrows() != test_feats.nrows() {
        return Err(JpsaError::input(format!(
            "training features have {} dims, test features {}",
            train_feats.nrows(),
            test_feats.nrows()
        )));
    }
    Ok((0..test_feats.ncols())
        .into_par_iter()
        .map(|j| {
            let q = test_feats.column(j);
            let mut best = (f64::INFINITY, 0usize);
            for i in 0..train_feats.ncols() {
                let d = (train_feats.column(i) - q).norm_squared();
                if d < best.0 {
                    best = (d, i);
                }
            }
            train_labels[best.1]
        })
        .collect())
}

/// Rows are true classes, columns predicted; class `c` lives at index `c − 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for row in &self.counts {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

pub fn confusion(true_labels: &[usize], predicted: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if true_labels.len() != predicted.len() {
        return Err(JpsaError::input(format!(
            "{} true labels but {} predictions",
            true_labels.len(),
            predicted.len()
        )));
    }
    let mut counts = vec![vec![0u64; n_classes]; n_classes];
    for (i, (&t, &p)) in true_labels.iter().zip(predicted).enumerate() {
        if t == 0 || t > n_classes || p == 0 || p > n_classes {
            return Err(JpsaError::input(format!(
                "sample {i}: labels ({t}, {p}) outside 1..={n_classes}"
            )));
        }
        counts[t - 1][p - 1] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub oa: f64,
    pub aa: f64,
    pub kappa: f64,
    /// Accuracy per class; `None` when the class has no test samples.
    pub per_class: Vec<Option<f64>>,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "method,oa,aa,kappa";

    pub fn csv_row(&self, method: &str) -> String {
        format!("{method},{:.6},{:.6},{:.6}", self.oa, self.aa, self.kappa)
    }

    pub fn per_class_csv(&self) -> String {
        let mut s = String::from("class,accuracy\n");
        for (i, a) in self.per_class.iter().enumerate() {
            match a {
                Some(v) => writeln!(s, "{},{v:.6}", i + 1),
                None => writeln!(s, "{},", i + 1),
            }
            .unwrap();
        }
        s
    }
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let c = cm.n_classes();
    let na = cm.total();
    if na == 0 {
        return Err(JpsaError::input("confusion matrix is empty"));
    }
    let na_f = na as f64;
    let nc: u64 = (0..c).map(|i| cm.counts[i][i]).sum();
    let oa = nc as f64 / na_f;
    let mut per_class = Vec::with_capacity(c);
    let mut pe_num = 0.0;
    for i in 0..c {
        let row: u64 = cm.counts[i].iter().sum();
        let col: u64 = cm.counts.iter().map(|r| r[i]).sum();
        pe_num += row as f64 * col as f64;
        per_class.push((row > 0).then(|| cm.counts[i][i] as f64 / row as f64));
    }
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    let aa = present.iter().sum::<f64>() / present.len() as f64;
    let pe = pe_num / (na_f * na_f);
    let kappa = if pe == 1.0 { 0.0 } else { (oa - pe) / (1.0 - pe) };
    Ok(MetricsReport {
        oa,
        aa,
        kappa,
        per_class,
    })
}

/// Confusion matrix and metrics in one call.
pub fn evaluate(true_labels: &[usize], predicted: &[usize], n_classes: usize) -> Result<(ConfusionMatrix, MetricsReport)> {
    let cm = confusion(true_labels, predicted, n_classes)?;
    let rep = metrics(&cm)?;
    Ok((cm, rep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn nn_examples() {
        let train = DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 2.0]);
        assert_eq!(nn_classify(&train, &[5, 6, 7], &DMatrix::from_row_slice(1, 1, &[1.0])).unwrap(), vec![6]);
        // equidistant from 0 and 1: lower index wins
        assert_eq!(nn_classify(&train, &[5, 6, 7], &DMatrix::from_row_slice(1, 1, &[0.5])).unwrap(), vec![5]);
        let single = DMatrix::from_row_slice(2, 1, &[3.0, 3.0]);
        let test = DMatrix::from_fn(2, 4, |r, c| (r + c) as f64);
        assert_eq!(nn_classify(&single, &[2], &test).unwrap(), vec![2; 4]);
        assert!(nn_classify(&DMatrix::zeros(2, 0), &[], &test).is_err());
    }

    #[test]
    fn nn_matches_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let train = DMatrix::from_fn(4, 30, |_, _| rng.random_range(-1.0..1.0));
        let test = DMatrix::from_fn(4, 10, |_, _| rng.random_range(-1.0..1.0));
        let labels: Vec<usize> = (0..30).map(|i| i % 5 + 1).collect();
        let pred = nn_classify(&train, &labels, &test).unwrap();
        for j in 0..10 {
            let mut best = 0;
            for i in 1..30 {
                let di: f64 = (0..4).map(|r| (train[(r, i)] - test[(r, j)]).powi(2)).sum();
                let db: f64 = (0..4).map(|r| (train[(r, best)] - test[(r, j)]).powi(2)).sum();
                if di < db {
                    best = i;
                }
            }
            assert_eq!(pred[j], labels[best]);
        }
    }

    #[test]
    fn confusion_examples() {
        let cm = confusion(&[1, 2, 2, 3], &[1, 2, 2, 3], 3).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 0, 0], vec![0, 2, 0], vec![0, 0, 1]]);
        let cm = confusion(&[1, 2, 3], &[1, 1, 1], 3).unwrap();
        assert_eq!(cm.counts.iter().map(|r| r[0]).sum::<u64>(), 3);
        assert!(confusion(&[1], &[1, 2], 2).is_err());
    }

    #[test]
    fn metrics_examples() {
        let r = metrics(&confusion(&[1, 1, 2, 2], &[1, 1, 2, 2], 2).unwrap()).unwrap();
        assert_eq!((r.oa, r.aa, r.kappa), (1.0, 1.0, 1.0));
        let r = metrics(&confusion(&[1, 1, 2, 2], &[1, 1, 1, 1], 2).unwrap()).unwrap();
        assert_eq!(r.oa, 0.5);
        assert_eq!(r.kappa, 0.0);
        let r = metrics(&confusion(&[1, 1], &[1, 1], 2).unwrap()).unwrap();
        assert_eq!(r.kappa, 0.0);
        assert_eq!(r.per_class, vec![Some(1.0), None]);
        assert!(metrics(&ConfusionMatrix { counts: vec![vec![0]] }).is_err());
    }

    proptest! {
        #[test]
        fn metrics_invariants(counts in proptest::collection::vec(0u64..20, 9), perm in Just([2usize, 0, 1])) {
            let cm = ConfusionMatrix { counts: counts.chunks(3).map(|r| r.to_vec()).collect() };
            prop_assume!(cm.total() > 0);
            let r = metrics(&cm).unwrap();
            let tr: u64 = (0..3).map(|i| cm.counts[i][i]).sum();
            prop_assert_eq!(r.oa, tr as f64 / cm.total() as f64);
            prop_assert!((0.0..=1.0).contains(&r.aa));
            prop_assert!(r.kappa <= r.oa + 1e-12 && r.kappa >= -1.0 - 1e-12);
            let mut p = vec![vec![0u64; 3]; 3];
            for i in 0..3 { for j in 0..3 { p[perm[i]][perm[j]] = cm.counts[i][j]; } }
            let rp = metrics(&ConfusionMatrix { counts: p }).unwrap();
            prop_assert_eq!(rp.oa, r.oa);
            prop_assert!((rp.aa - r.aa).abs() < 1e-12 && (rp.kappa - r.kappa).abs() < 1e-12);
        }
    }
}
