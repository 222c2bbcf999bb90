//! Synthetic Gaussian mixtures, the bundled Old Faithful data, CSV I/O and
//! standardization.
//!
//! CSV layout: a header `x1,…,xd` with an optional final `label` column of
//! non-negative integers; `,` delimiter, `.` radix, `\n` line endings.
//! Numbers are written in shortest round-trip form, so reading a written
//! file gives back the same bits.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::rng::seeded;
use crate::scalar::Scalar;

const OLD_FAITHFUL_CSV: &str = include_str!("../../../data/oldfaithful.csv");

pub const PRESETS: [&str; 3] = ["sim1", "sim2", "oldfaithful"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMixture<T>", into = "RawMixture<T>")]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct MixtureSpec<T> {
    weights: Vec<T>,
    means: Vec<Vec<T>>,
    covariances: Vec<Matrix<T>>,
    factors: Vec<Cholesky<T>>,
}

/// JSON shape of a mixture: covariances as nested row arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawMixture<T> {
    pub weights: Vec<T>,
    pub means: Vec<Vec<T>>,
    pub covariances: Vec<Vec<Vec<T>>>,
}

impl<T: Scalar> TryFrom<RawMixture<T>> for MixtureSpec<T> {
    type Error = Error;
    fn try_from(raw: RawMixture<T>) -> Result<Self> {
        let covs = raw
            .covariances
            .iter()
            .map(|c| Matrix::from_rows(c))
            .collect::<Result<Vec<_>>>()?;
        MixtureSpec::new(raw.weights, raw.means, covs)
    }
}

impl<T: Scalar> From<MixtureSpec<T>> for RawMixture<T> {
    fn from(m: MixtureSpec<T>) -> Self {
        RawMixture {
            weights: m.weights,
            means: m.means,
            covariances: m
                .covariances
                .iter()
                .map(|c| c.rows().map(<[T]>::to_vec).collect())
                .collect(),
        }
    }
}

impl<T: Scalar> MixtureSpec<T> {
    pub fn new(weights: Vec<T>, means: Vec<Vec<T>>, covariances: Vec<Matrix<T>>) -> Result<Self> {
        let k = weights.len();
        if k == 0 || means.len() != k || covariances.len() != k {
            return Err(Error::invalid("mixture", "component counts disagree or are zero"));
        }
        if weights.iter().any(|&w| !(w >= T::zero())) {
            return Err(Error::invalid("weights", "must be non-negative"));
        }
        let total: T = weights.iter().copied().sum();
        if (total - T::one()).abs() > T::of(1e-12).max(T::epsilon() * T::of(4.0)) {
            return Err(Error::invalid("weights", format!("sum to {total}, not 1")));
        }
        let d = means[0].len();
        if d == 0 {
            return Err(Error::invalid("means", "dimension must be at least 1"));
        }
        let mut factors = Vec::with_capacity(k);
        for (m, c) in means.iter().zip(&covariances) {
            if m.len() != d || c.nrows() != d || c.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: m.len(),
                });
            }
            if !c.is_symmetric(T::of(1e-12)) {
                return Err(Error::invalid("covariances", "must be symmetric"));
            }
            factors.push(c.cholesky()?);
        }
        Ok(MixtureSpec {
            weights,
            means,
            covariances,
            factors,
        })
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<T>] {
        &self.means
    }

    pub fn covariances(&self) -> &[Matrix<T>] {
        &self.covariances
    }

    /// Three overlapping 2-D Gaussians: means (0,0), (2,0), (1,1.5), covariance 0.05·I.
    pub fn sim1() -> Self {
        let third = T::one() / T::of(3.0);
        let cov = Matrix::identity(2).scaled(T::of(0.05));
        Self::new(
            vec![third; 3],
            vec![
                vec![T::zero(), T::zero()],
                vec![T::of(2.0), T::zero()],
                vec![T::one(), T::of(1.5)],
            ],
            vec![cov.clone(), cov.clone(), cov],
        )
        .expect("sim1 preset is valid")
    }

    /// Two 2-D Gaussians sharing the mean (0,0), covariances I and 16·I.
    pub fn sim2() -> Self {
        let half = T::of(0.5);
        Self::new(
            vec![half, half],
            vec![vec![T::zero(); 2], vec![T::zero(); 2]],
            vec![Matrix::identity(2), Matrix::identity(2).scaled(T::of(16.0))],
        )
        .expect("sim2 preset is valid")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub x: Matrix<T>,
    pub labels: Option<Vec<usize>>,
    pub name: String,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(x: Matrix<T>, labels: Option<Vec<usize>>, name: impl Into<String>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != x.nrows() {
                return Err(Error::LengthMismatch {
                    left: l.len(),
                    right: x.nrows(),
                });
            }
        }
        if !x.is_finite() {
            return Err(Error::invalid("x", "contains non-finite values"));
        }
        Ok(Dataset {
            x,
            labels,
            name: name.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// Rows at `idx`, in that order.
    pub fn subset(&self, idx: &[usize], name: impl Into<String>) -> Self {
        Dataset {
            x: self.x.select_rows(idx),
            labels: self.labels.as_ref().map(|l| idx.iter().map(|&i| l[i]).collect()),
            name: name.into(),
        }
    }

    /// Seeded shuffle, then the first `train` rows form the training part.
    /// Both parts keep the original row order.
    pub fn split(&self, train: usize, seed: u64) -> Result<(Self, Self)> {
        if train == 0 || train >= self.len() {
            return Err(Error::invalid("train", format!("must be in 1..{}", self.len())));
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut seeded(seed));
        let (a, b) = idx.split_at_mut(train);
        a.sort_unstable();
        b.sort_unstable();
        Ok((
            self.subset(a, format!("{}-train", self.name)),
            self.subset(b, format!("{}-test", self.name)),
        ))
    }
}

/// Draws `n` labelled rows from a mixture.
pub fn generate<T: Scalar>(spec: &MixtureSpec<T>, n: usize, seed: u64) -> Dataset<T> {
    let mut rng = seeded(seed);
    let d = spec.dim();
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    let last = spec.n_components() - 1;
    for _ in 0..n {
        let u = T::of(rng.random::<f64>());
        let mut acc = T::zero();
        let comp = spec
            .weights
            .iter()
            .position(|&w| {
                acc = acc + w;
                u < acc
            })
            .unwrap_or(last);
        let z: Vec<T> = (0..d).map(|_| T::of(rng.sample::<f64, _>(StandardNormal))).collect();
        let l = spec.factors[comp].factor();
        for i in 0..d {
            let mut v = spec.means[comp][i];
            for (j, &zj) in z.iter().enumerate().take(i + 1) {
                v = v + l[(i, j)] * zj;
            }
            data.push(v);
        }
        labels.push(comp);
    }
    Dataset {
        x: Matrix::from_row_major(n, d, data).expect("sizes match"),
        labels: Some(labels),
        name: "mixture".into(),
    }
}

/// Per-dimension affine map `z = (x − mean) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization<T> {
    pub mean: Vec<T>,
    pub scale: Vec<T>,
}

impl<T: Scalar> Standardization<T> {
    fn map(&self, x: &Matrix<T>, f: impl Fn(T, T, T) -> T) -> Matrix<T> {
        let mut out = x.clone();
        for i in 0..out.nrows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = f(*v, self.mean[j], self.scale[j]);
            }
        }
        out
    }

    pub fn apply(&self, x: &Matrix<T>) -> Matrix<T> {
        self.map(x, |v, m, s| (v - m) / s)
    }

    pub fn invert(&self, x: &Matrix<T>) -> Matrix<T> {
        self.map(x, |v, m, s| v * s + m)
    }
}

/// Z-scores every column (sample standard deviation).
pub fn standardize<T: Scalar>(data: &Dataset<T>) -> Result<(Dataset<T>, Standardization<T>)> {
    let cov = data.x.covariance()?;
    let mean = data.x.column_means();
    let mut scale = Vec::with_capacity(data.dim());
    for j in 0..data.dim() {
        let var = cov[(j, j)];
        if !(var > T::zero()) {
            return Err(Error::ZeroVariance(j));
        }
        scale.push(var.sqrt());
    }
    let t = Standardization { mean, scale };
    let out = Dataset {
        x: t.apply(&data.x),
        labels: data.labels.clone(),
        name: data.name.clone(),
    };
    Ok((out, t))
}

fn csv_err(line: u64, message: impl Into<String>) -> Error {
    Error::Csv {
        line,
        message: message.into(),
    }
}

/// Parses CSV text in the layout described at the top of this module.
pub fn parse_csv<T: Scalar>(text: &str, name: &str) -> Result<Dataset<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| csv_err(1, e.to_string()))?,
        None => return Err(csv_err(1, "missing header")),
    };
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    let has_label = cols.last() == Some(&"label");
    let d = cols.len() - usize::from(has_label);
    for (j, c) in cols[..d].iter().enumerate() {
        if *c != format!("x{}", j + 1) {
            return Err(csv_err(
                1,
                format!("missing header: expected `x{}`, found `{c}`", j + 1),
            ));
        }
    }
    if d == 0 {
        return Err(csv_err(1, "no feature columns"));
    }
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut rows = 0;
    for rec in records {
        let rec = rec.map_err(|e| csv_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != cols.len() {
            return Err(csv_err(
                line,
                format!("ragged row: {} fields, expected {}", rec.len(), cols.len()),
            ));
        }
        for (j, cell) in rec.iter().take(d).enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| csv_err(line, format!("non-numeric cell `{cell}` in x{}", j + 1)))?;
            if !v.is_finite() {
                return Err(csv_err(line, format!("non-finite value in x{}", j + 1)));
            }
            data.push(T::of(v));
        }
        if has_label {
            let cell = rec.get(d).unwrap_or_default().trim();
            labels.push(
                cell.parse::<usize>()
                    .map_err(|_| csv_err(line, format!("label `{cell}` is not a non-negative integer")))?,
            );
        }
        rows += 1;
    }
    Ok(Dataset {
        x: Matrix::from_row_major(rows, d, data)?,
        labels: has_label.then_some(labels),
        name: name.to_string(),
    })
}

pub fn read_csv<T: Scalar>(path: &Path) -> Result<Dataset<T>> {
    let text = fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map_or_else(|| "data".to_string(), |s| s.to_string_lossy().into_owned());
    parse_csv(&text, &name)
}

/// Renders a dataset as CSV text.
pub fn to_csv<T: Scalar>(data: &Dataset<T>) -> String {
    let mut out = String::new();
    let header: Vec<String> = (1..=data.dim()).map(|j| format!("x{j}")).collect();
    out.push_str(&header.join(","));
    if data.labels.is_some() {
        out.push_str(",label");
    }
    out.push('\n');
    for (i, row) in data.x.rows().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&cells.join(","));
        if let Some(l) = &data.labels {
            out.push_str(&format!(",{}", l[i]));
        }
        out.push('\n');
    }
    out
}

pub fn write_csv<T: Scalar>(data: &Dataset<T>, path: &Path) -> Result<()> {
    write_atomic(path, to_csv(data).as_bytes())
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", file_name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// The 272 Old Faithful eruptions: x1 = duration (min), x2 = waiting time (min).
/// Labels are a manual two-group split at a 3 minute eruption duration.
pub fn old_faithful<T: Scalar>() -> Dataset<T> {
    parse_csv(OLD_FAITHFUL_CSV, "oldfaithful").expect("bundled data parses")
}

pub fn preset_mixture<T: Scalar>(name: &str) -> Result<MixtureSpec<T>> {
    match name {
        "sim1" => Ok(MixtureSpec::sim1()),
        "sim2" => Ok(MixtureSpec::sim2()),
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

/// A named dataset. Mixture presets draw `n` rows with `seed`; `oldfaithful`
/// ignores both.
pub fn load_preset<T: Scalar>(name: &str, n: usize, seed: u64) -> Result<Dataset<T>> {
    if name == "oldfaithful" {
        return Ok(old_faithful());
    }
    let mut d = generate(&preset_mixture(name)?, n, seed);
    d.name = name.to_string();
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_component_labels() {
        let spec = MixtureSpec::new(vec![1.0], vec![vec![3.0, -1.0]], vec![Matrix::identity(2)]).unwrap();
        let d = generate(&spec, 500, 1);
        assert!(d.labels.unwrap().iter().all(|&l| l == 0));
    }

    #[test]
    fn component_frequencies() {
        let spec = MixtureSpec::new(
            vec![0.5, 0.5],
            vec![vec![0.0], vec![10.0]],
            vec![Matrix::identity(1), Matrix::identity(1)],
        )
        .unwrap();
        let n = 100_000;
        let d = generate(&spec, n, 5);
        let ones = d.labels.unwrap().iter().filter(|&&l| l == 1).count() as f64;
        assert!((ones / n as f64 - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt());
    }

    #[test]
    fn sample_mean_converges() {
        let cov = Matrix::from_rows(&[vec![4.0f64, 1.0], vec![1.0, 2.0]]).unwrap();
        let spec = MixtureSpec::new(vec![1.0], vec![vec![1.0, -2.0]], vec![cov]).unwrap();
        let n = 50_000;
        let d = generate(&spec, n, 9);
        let m = d.x.column_means();
        assert!((m[0] - 1.0).abs() < 3.0 * 2.0 / (n as f64).sqrt());
        assert!((m[1] + 2.0).abs() < 3.0 * 2f64.sqrt() / (n as f64).sqrt());
        let c = d.x.covariance().unwrap();
        assert!((c[(0, 1)] - 1.0).abs() < 0.1);
    }

    #[test]
    fn generate_is_seeded() {
        let a = generate(&MixtureSpec::<f64>::sim1(), 50, 3);
        let b = generate(&MixtureSpec::<f64>::sim1(), 50, 3);
        let c = generate(&MixtureSpec::<f64>::sim1(), 50, 4);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_mixtures() {
        let id = Matrix::<f64>::identity(1);
        assert!(MixtureSpec::new(vec![0.6, 0.6], vec![vec![0.0], vec![1.0]], vec![id.clone(), id.clone()]).is_err());
        assert!(MixtureSpec::new(vec![1.0], vec![vec![0.0]], vec![id.scaled(-1.0)]).is_err());
        assert!(MixtureSpec::new(vec![1.0], vec![vec![0.0, 0.0]], vec![id]).is_err());
    }

    #[test]
    fn mixture_json_shape() {
        let s = MixtureSpec::<f64>::sim2();
        let j = serde_json::to_string(&s).unwrap();
        assert!(j.contains("\"covariances\":[[[1.0,0.0],[0.0,1.0]]"));
        let back: MixtureSpec<f64> = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
        let bad = r#"{"weights":[1.0],"means":[[0.0]],"covariances":[[[-1.0]]]}"#;
        assert!(serde_json::from_str::<MixtureSpec<f64>>(bad).is_err());
    }

    #[test]
    fn standardize_examples() {
        let d = generate(&MixtureSpec::<f64>::sim1(), 400, 2);
        let (z, t) = standardize(&d).unwrap();
        let m = z.x.column_means();
        let c = z.x.covariance().unwrap();
        for j in 0..2 {
            assert!(m[j].abs() < 1e-10);
            assert!((c[(j, j)] - 1.0).abs() < 1e-10);
        }
        let back = t.invert(&z.x);
        for (a, b) in back.as_slice().iter().zip(d.x.as_slice()) {
            assert!((a - b).abs() < 1e-10);
        }
        let (z2, t2) = standardize(&z).unwrap();
        for (a, b) in z2.x.as_slice().iter().zip(z.x.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(t2.mean.iter().all(|v| v.abs() < 1e-12));
        assert!(t2.scale.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn zero_variance_rejected() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![1.0, 3.0]]).unwrap();
        let d = Dataset::new(x, None, "t").unwrap();
        assert_eq!(standardize(&d).unwrap_err(), Error::ZeroVariance(0));
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let ragged = "x1,x2\n1,2\n3\n";
        assert!(matches!(parse_csv::<f64>(ragged, "t"), Err(Error::Csv { line: 3, .. })));
        let nonnum = "x1,label\n1.5,0\nabc,1\n";
        assert!(matches!(parse_csv::<f64>(nonnum, "t"), Err(Error::Csv { line: 3, .. })));
        let no_header = "1.0,2.0\n3.0,4.0\n";
        let e = parse_csv::<f64>(no_header, "t").unwrap_err();
        assert!(matches!(&e, Error::Csv { line: 1, message } if message.contains("missing header")));
        assert!(matches!(parse_csv::<f64>("", "t"), Err(Error::Csv { line: 1, .. })));
        let bad_label = "x1,label\n1.0,-1\n";
        assert!(matches!(
            parse_csv::<f64>(bad_label, "t"),
            Err(Error::Csv { line: 2, .. })
        ));
    }

    #[test]
    fn old_faithful_bundle() {
        let d = old_faithful::<f64>();
        assert_eq!(d.len(), 272);
        assert_eq!(d.dim(), 2);
        assert_eq!(d.x.row(0), &[3.6, 79.0]);
        let (train, test) = d.split(100, 1).unwrap();
        assert_eq!((train.len(), test.len()), (100, 172));
        assert_eq!(d.split(100, 1).unwrap().0, train);
    }

    #[test]
    fn csv_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        let d = load_preset::<f64>("sim1", 60, 8).unwrap();
        write_csv(&d, &p).unwrap();
        let back: Dataset<f64> = read_csv(&p).unwrap();
        assert_eq!(back.x, d.x);
        assert_eq!(back.labels, d.labels);
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(to_csv(&back), text);
    }

    proptest! {
        #[test]
        fn csv_text_round_trip(rows in prop::collection::vec(prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 3), 1..30),
                               with_labels in any::<bool>()) {
            let x = Matrix::from_rows(&rows).unwrap();
            let labels = with_labels.then(|| (0..rows.len()).map(|i| i % 4).collect());
            let d = Dataset::new(x, labels, "p").unwrap();
            let text = to_csv(&d);
            let back: Dataset<f64> = parse_csv(&text, "p").unwrap();
            prop_assert_eq!(&back.x, &d.x);
            prop_assert_eq!(&back.labels, &d.labels);
            prop_assert_eq!(to_csv(&back), text);
        }
    }
}
