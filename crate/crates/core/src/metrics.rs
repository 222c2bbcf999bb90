//! Partition comparison (NMI, VI) and the cross-validation loss.
//!
//! Entropies use natural logarithms, so VI is reported in nats. NMI is
//! normalized as `2 I(A;B) / (H(A) + H(B))`. When both partitions have a
//! single cluster NMI is 1; when exactly one has zero entropy it is 0.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Cross tabulation of two labelings of the same items.
#[derive(Debug, Clone, PartialEq)]
pub struct Contingency {
    counts: Vec<Vec<usize>>,
    row_sums: Vec<usize>,
    col_sums: Vec<usize>,
    n: usize,
}

fn dense_labels(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = HashMap::new();
    let dense = labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect();
    (dense, map.len())
}

fn entropy(counts: &[usize], n: usize) -> f64 {
    let n = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

impl Contingency {
    pub fn new(a: &[usize], b: &[usize]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::LengthMismatch {
                left: a.len(),
                right: b.len(),
            });
        }
        if a.is_empty() {
            return Err(Error::invalid("labels", "need at least one item"));
        }
        let (da, ka) = dense_labels(a);
        let (db, kb) = dense_labels(b);
        let mut counts = vec![vec![0; kb]; ka];
        let mut row_sums = vec![0; ka];
        let mut col_sums = vec![0; kb];
        for (&i, &j) in da.iter().zip(&db) {
            counts[i][j] += 1;
            row_sums[i] += 1;
            col_sums[j] += 1;
        }
        Ok(Contingency {
            counts,
            row_sums,
            col_sums,
            n: a.len(),
        })
    }

    pub fn counts(&self) -> &[Vec<usize>] {
        &self.counts
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entropy_a(&self) -> f64 {
        entropy(&self.row_sums, self.n)
    }

    pub fn entropy_b(&self) -> f64 {
        entropy(&self.col_sums, self.n)
    }

    pub fn mutual_information(&self) -> f64 {
        let n = self.n as f64;
        let mut mi = 0.0;
        for (i, row) in self.counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let c = c as f64;
                mi += c / n * (c * n / (self.row_sums[i] as f64 * self.col_sums[j] as f64)).ln();
            }
        }
        mi.max(0.0)
    }
}

/// Normalized mutual information in `[0, 1]`.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    let t = Contingency::new(a, b)?;
    let (ha, hb) = (t.entropy_a(), t.entropy_b());
    if ha == 0.0 && hb == 0.0 {
        return Ok(1.0);
    }
    if ha == 0.0 || hb == 0.0 {
        return Ok(0.0);
    }
    Ok((2.0 * t.mutual_information() / (ha + hb)).clamp(0.0, 1.0))
}

/// Variation of information `H(A) + H(B) − 2 I(A;B)`, in nats.
pub fn vi(a: &[usize], b: &[usize]) -> Result<f64> {
    let t = Contingency::new(a, b)?;
    Ok((t.entropy_a() + t.entropy_b() - 2.0 * t.mutual_information()).max(0.0))
}

/// `Σ_k sqrt(Σ_{j ∈ C_k} ‖x_j − x̄_k‖²)`
pub fn cv_loss<T: Scalar>(data: &Matrix<T>, labels: &[usize]) -> Result<T> {
    if data.nrows() != labels.len() {
        return Err(Error::LengthMismatch {
            left: data.nrows(),
            right: labels.len(),
        });
    }
    let (dense, k) = dense_labels(labels);
    let d = data.ncols();
    let mut counts = vec![0usize; k];
    let mut sums = vec![vec![T::zero(); d]; k];
    for (row, &z) in data.rows().zip(&dense) {
        counts[z] += 1;
        for (s, &v) in sums[z].iter_mut().zip(row) {
            *s = *s + v;
        }
    }
    let means: Vec<Vec<T>> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s.iter().map(|&v| v / T::of_usize(c)).collect())
        .collect();
    // two-pass squared deviations; avoids cancellation in Σx² − n x̄²
    let mut ss = vec![T::zero(); k];
    for (row, &z) in data.rows().zip(&dense) {
        for (&v, &m) in row.iter().zip(&means[z]) {
            ss[z] = ss[z] + (v - m) * (v - m);
        }
    }
    Ok(ss.into_iter().map(|s| s.sqrt()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_partitions() {
        let a = [0, 0, 1, 2, 2, 2];
        assert_eq!(nmi(&a, &a).unwrap(), 1.0);
        assert!(vi(&a, &a).unwrap().abs() < 1e-15);
        let relabelled = [7, 7, 3, 9, 9, 9];
        assert!((nmi(&a, &relabelled).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_cluster_conventions() {
        let one = [4, 4, 4, 4];
        let two = [0, 0, 1, 1];
        assert_eq!(nmi(&one, &one).unwrap(), 1.0);
        assert_eq!(nmi(&one, &two).unwrap(), 0.0);
        assert_eq!(nmi(&two, &one).unwrap(), 0.0);
    }

    #[test]
    fn independent_pair() {
        let a = [1, 1, 2, 2];
        let b = [1, 2, 1, 2];
        assert!(nmi(&a, &b).unwrap().abs() < 1e-15);
        assert!((vi(&a, &b).unwrap() - 2.0 * 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(matches!(nmi(&[0, 1], &[0]), Err(Error::LengthMismatch { .. })));
        assert!(vi(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn cv_loss_examples() {
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap();
        assert!((cv_loss(&x, &[0, 0]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(cv_loss(&x, &[0, 1]).unwrap(), 0.0);
        assert!(cv_loss(&x, &[0]).is_err());
    }

    #[test]
    fn cv_loss_translation_and_scaling() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i as f64 * 0.37).sin() * 3.0, (i as f64 * 1.3).cos()])
            .collect();
        let labels: Vec<usize> = (0..30).map(|i| i % 4).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let base = cv_loss(&x, &labels).unwrap();
        let shifted: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[0] + 100.0, r[1] - 7.0]).collect();
        let s = cv_loss(&Matrix::from_rows(&shifted).unwrap(), &labels).unwrap();
        assert!((s - base).abs() < 1e-10);
        let scaled = x.scaled(2.5);
        assert!((cv_loss(&scaled, &labels).unwrap() - 2.5 * base).abs() < 1e-10);
    }

    fn labels(n: usize, k: usize) -> impl Strategy<Value = Vec<usize>> {
        prop::collection::vec(0..k, n)
    }

    proptest! {
        #[test]
        fn metrics_bounds_and_symmetry(a in labels(40, 5), b in labels(40, 7)) {
            let n = nmi(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&n));
            prop_assert!((n - nmi(&b, &a).unwrap()).abs() < 1e-12);
            let v = vi(&a, &b).unwrap();
            prop_assert!(v >= 0.0);
            prop_assert!((v - vi(&b, &a).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn relabelling_invariance(a in labels(30, 6), b in labels(30, 4), shift in 1usize..100) {
            let perm = |l: &[usize]| l.iter().map(|&z| (z * 7 + shift) % 1000).collect::<Vec<_>>();
            prop_assert!((nmi(&a, &b).unwrap() - nmi(&perm(&a), &b).unwrap()).abs() < 1e-12);
            prop_assert!((vi(&a, &b).unwrap() - vi(&a, &perm(&b)).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn vi_triangle(a in labels(25, 4), b in labels(25, 4), c in labels(25, 4)) {
            let ab = vi(&a, &b).unwrap();
            let bc = vi(&b, &c).unwrap();
            let ac = vi(&a, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
        }
    }
}
