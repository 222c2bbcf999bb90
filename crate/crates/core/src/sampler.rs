//! Collapsed Gibbs sampler over cluster assignments.
//!
//! Each sweep draws a fresh random permutation of the items and reassigns
//! them one at a time: the item is removed from its component, every
//! occupied component is scored by `ln g(N_k) + ln p(x | X_k)` and a new
//! component by `ln α + ln p(x)`, an index is drawn from the normalized
//! weights, and the item is added back. Components that empty are deleted.
//! One seeded ChaCha8 stream drives both the permutations and the draws.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::conjugate::{log_marginal_likelihood, log_prior_predictive, ClusterStats, NiwParams, StudentT};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::metrics;
use crate::partition::{log_gibbs_prior, PartitionState, ProcessParams};
use crate::rng::{draw_from_log_weights, seeded};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Initialization {
    AllInOne,
    /// Item i starts in cluster `i mod k`; `k >= n` gives singletons.
    RoundRobin(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub init: Initialization,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            iterations: 20_000,
            burn_in: 10_000,
            thin: 5,
            seed: 0,
            init: Initialization::AllInOne,
        }
    }
}

impl SamplerConfig {
    pub fn new(iterations: usize, burn_in: usize, thin: usize, seed: u64) -> Self {
        SamplerConfig {
            iterations,
            burn_in,
            thin,
            seed,
            init: Initialization::AllInOne,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("iterations", "must be positive"));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::invalid("burn_in", "must be smaller than iterations"));
        }
        if self.thin == 0 {
            return Err(Error::invalid("thin", "must be at least 1"));
        }
        if self.init == Initialization::RoundRobin(0) {
            return Err(Error::invalid("initial_k", "must be positive"));
        }
        Ok(())
    }

    /// Number of samples kept: `floor((iterations − burn_in) / thin)`.
    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }

    fn keeps(&self, iteration: usize) -> bool {
        iteration > self.burn_in && (iteration - self.burn_in).is_multiple_of(self.thin)
    }
}

/// Output of one sampler run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    /// Retained assignment vectors, canonically labelled.
    pub samples: Vec<Vec<usize>>,
    /// Cluster count after every iteration, burn-in included.
    pub k_trace: Vec<usize>,
    pub runtime_secs: f64,
}

impl Chain {
    pub fn retained_k(&self) -> Vec<usize> {
        self.samples
            .iter()
            .map(|s| s.iter().max().map_or(0, |m| m + 1))
            .collect()
    }

    /// Same samples and trace, ignoring wall-clock time.
    pub fn same_draws(&self, other: &Chain) -> bool {
        self.samples == other.samples && self.k_trace == other.k_trace
    }
}

struct Component<T> {
    stats: ClusterStats<T>,
    predictive: StudentT<T>,
}

impl<T: Scalar> Component<T> {
    fn new(prior: &NiwParams<T>) -> Result<Self> {
        let stats = ClusterStats::empty(prior.dim());
        let predictive = prior.posterior(&stats)?.predictive()?;
        Ok(Component { stats, predictive })
    }

    fn refresh(&mut self, prior: &NiwParams<T>) -> Result<()> {
        self.predictive = prior.posterior(&self.stats)?.predictive()?;
        Ok(())
    }
}

fn check_inputs<T: Scalar>(data: &Matrix<T>, prior: &NiwParams<T>) -> Result<()> {
    if data.nrows() == 0 {
        return Err(Error::invalid("data", "need at least one row"));
    }
    if data.ncols() != prior.dim() {
        return Err(Error::DimensionMismatch {
            expected: prior.dim(),
            found: data.ncols(),
        });
    }
    if !data.is_finite() {
        return Err(Error::invalid("data", "contains non-finite values"));
    }
    Ok(())
}

fn build_components<T: Scalar>(
    data: &Matrix<T>,
    labels: &[usize],
    k: usize,
    prior: &NiwParams<T>,
) -> Result<Vec<Component<T>>> {
    let mut comps = (0..k).map(|_| Component::new(prior)).collect::<Result<Vec<_>>>()?;
    for (row, &z) in data.rows().zip(labels) {
        comps[z].stats.add_point(row)?;
    }
    for c in &mut comps {
        c.refresh(prior)?;
    }
    Ok(comps)
}

#[cfg(debug_assertions)]
fn check_stats_integrity<T: Scalar>(data: &Matrix<T>, state: &PartitionState, comps: &[Component<T>]) {
    let d = data.ncols();
    let mut fresh: Vec<ClusterStats<T>> = (0..comps.len()).map(|_| ClusterStats::empty(d)).collect();
    for (row, z) in data.rows().zip(state.assignments()) {
        fresh[z.expect("all items seated between sweeps")]
            .add_point(row)
            .expect("dimension checked");
    }
    let tol = T::of(1e-7);
    for (c, f) in comps.iter().zip(&fresh) {
        assert_eq!(c.stats.n(), f.n(), "component size drifted");
        let pairs = c
            .stats
            .sum()
            .iter()
            .zip(f.sum())
            .chain(c.stats.scatter().as_slice().iter().zip(f.scatter().as_slice()));
        for (&a, &b) in pairs {
            assert!(
                (a - b).abs() <= tol * b.abs().max(T::one()),
                "sufficient statistics drifted: {a} vs {b}"
            );
        }
    }
}

/// Runs one collapsed Gibbs chain.
pub fn run_chain<T: Scalar>(
    data: &Matrix<T>,
    params: &ProcessParams<T>,
    prior: &NiwParams<T>,
    config: &SamplerConfig,
) -> Result<Chain> {
    config.validate()?;
    check_inputs(data, prior)?;
    let start = Instant::now();
    let n = data.nrows();
    let mut rng = seeded(config.seed);

    let mut state = match config.init {
        Initialization::AllInOne => PartitionState::all_in_one(n),
        Initialization::RoundRobin(k) => PartitionState::round_robin(n, k),
    };
    let labels = state.labels().expect("fully seated");
    let mut comps = build_components(data, &labels, state.n_clusters(), prior)?;

    // the new-component term does not depend on the partition
    let log_alpha = params.alpha().ln();
    let new_table: Vec<T> = data
        .rows()
        .map(|x| log_prior_predictive(x, prior).map(|lp| log_alpha + lp))
        .collect::<Result<_>>()?;

    let mut order: Vec<usize> = (0..n).collect();
    let mut log_w: Vec<T> = Vec::new();
    let mut samples = Vec::with_capacity(config.retained());
    let mut k_trace = Vec::with_capacity(config.iterations);

    for iteration in 1..=config.iterations {
        order.shuffle(&mut rng);
        for &item in &order {
            let wrap = |source: Error| Error::Sampler {
                iteration,
                item,
                source: Box::new(source),
            };
            let x = data.row(item);

            let left = state.unseat(item).map_err(wrap)?;
            if left.emptied {
                comps.swap_remove(left.cluster);
            } else {
                let c = &mut comps[left.cluster];
                c.stats.remove_point(x).map_err(wrap)?;
                c.refresh(prior).map_err(wrap)?;
            }

            log_w.clear();
            log_w.extend(
                comps
                    .iter()
                    .zip(state.sizes())
                    .map(|(c, &size)| params.log_table_weight(size) + c.predictive.ln_pdf(x)),
            );
            log_w.push(new_table[item]);
            if log_w.iter().any(|w| w.is_nan()) {
                return Err(wrap(Error::NotPositiveDefinite("NaN predictive weight".into())));
            }

            let k = draw_from_log_weights(&log_w, &mut rng);
            state.seat(item, k).map_err(wrap)?;
            if k == comps.len() {
                comps.push(Component::new(prior).map_err(wrap)?);
            }
            let c = &mut comps[k];
            c.stats.add_point(x).map_err(wrap)?;
            c.refresh(prior).map_err(wrap)?;
        }

        k_trace.push(state.n_clusters());
        if config.keeps(iteration) {
            samples.push(state.labels().expect("fully seated"));
        }
        #[cfg(debug_assertions)]
        if iteration % 1000 == 0 {
            check_stats_integrity(data, &state, &comps);
        }
        if iteration % 1000 == 0 {
            log::debug!(
                "iteration {iteration}/{}: K = {}",
                config.iterations,
                state.n_clusters()
            );
        }
    }

    Ok(Chain {
        samples,
        k_trace,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

/// Relative frequency of each cluster count over the retained samples.
pub fn posterior_k_distribution(chain: &Chain) -> Result<BTreeMap<usize, f64>> {
    if chain.samples.is_empty() {
        return Err(Error::EmptyChain);
    }
    let mut counts = BTreeMap::new();
    for k in chain.retained_k() {
        *counts.entry(k).or_insert(0usize) += 1;
    }
    let total = chain.samples.len() as f64;
    Ok(counts.into_iter().map(|(k, c)| (k, c as f64 / total)).collect())
}

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    /// Uses the sample standard deviation (n − 1); a single value has SE 0.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        if values.len() < 2 {
            return MeanSe { mean, se: 0.0 };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        MeanSe {
            mean,
            se: (var / n).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub retained: usize,
    pub k: MeanSe,
    /// Largest cluster count among the retained samples.
    pub k_max: usize,
    pub nmi: Option<MeanSe>,
    pub vi: Option<MeanSe>,
}

/// Per-sample NMI/VI against `truth` and cluster-count statistics.
pub fn summarize(chain: &Chain, truth: Option<&[usize]>) -> Result<Summary> {
    summarize_samples(&chain.samples, truth)
}

/// [`summarize`] over bare label vectors, e.g. read back from disk.
pub fn summarize_samples(samples: &[Vec<usize>], truth: Option<&[usize]>) -> Result<Summary> {
    if samples.is_empty() {
        return Err(Error::EmptyChain);
    }
    let counts: Vec<usize> = samples.iter().map(|s| distinct(s)).collect();
    let ks: Vec<f64> = counts.iter().map(|&k| k as f64).collect();
    let (nmi, vi) = match truth {
        Some(t) => {
            let mut nmis = Vec::with_capacity(samples.len());
            let mut vis = Vec::with_capacity(samples.len());
            for s in samples {
                nmis.push(metrics::nmi(s, t)?);
                vis.push(metrics::vi(s, t)?);
            }
            (Some(MeanSe::of(&nmis)), Some(MeanSe::of(&vis)))
        }
        None => (None, None),
    };
    Ok(Summary {
        retained: samples.len(),
        k: MeanSe::of(&ks),
        k_max: counts.into_iter().max().unwrap_or(0),
        nmi,
        vi,
    })
}

fn distinct(labels: &[usize]) -> usize {
    let mut seen: Vec<usize> = labels.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// A single clustering chosen from the retained samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEstimate {
    pub sample_index: usize,
    pub labels: Vec<usize>,
    pub log_joint: f64,
}

/// Unnormalized log joint of a clustering: Gibbs partition prior plus the
/// per-cluster marginal likelihoods.
pub fn log_joint<T: Scalar>(
    data: &Matrix<T>,
    labels: &[usize],
    params: &ProcessParams<T>,
    prior: &NiwParams<T>,
) -> Result<T> {
    if labels.len() != data.nrows() {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: data.nrows(),
        });
    }
    let state = PartitionState::from_labels(labels);
    let canon = state.labels().expect("fully seated");
    let mut stats: Vec<ClusterStats<T>> = (0..state.n_clusters())
        .map(|_| ClusterStats::empty(data.ncols()))
        .collect();
    for (row, &z) in data.rows().zip(&canon) {
        stats[z].add_point(row)?;
    }
    let mut total = log_gibbs_prior(state.sizes(), params)?;
    for s in &stats {
        total = total + log_marginal_likelihood(s, prior)?;
    }
    Ok(total)
}

/// The retained sample with the highest unnormalized log joint.
pub fn point_estimate<T: Scalar>(
    chain: &Chain,
    data: &Matrix<T>,
    params: &ProcessParams<T>,
    prior: &NiwParams<T>,
) -> Result<PointEstimate> {
    let mut best: Option<PointEstimate> = None;
    for (i, s) in chain.samples.iter().enumerate() {
        let lj = log_joint(data, s, params, prior)?.as_f64();
        if best.as_ref().is_none_or(|b| lj > b.log_joint) {
            best = Some(PointEstimate {
                sample_index: i,
                labels: s.clone(),
                log_joint: lj,
            });
        }
    }
    best.ok_or(Error::EmptyChain)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_prior() -> NiwParams<f64> {
        NiwParams::new(vec![0.0], 0.1, 3.0, Matrix::identity(1)).unwrap()
    }

    fn chain_from(samples: Vec<Vec<usize>>, k_trace: Vec<usize>) -> Chain {
        Chain {
            samples,
            k_trace,
            runtime_secs: 0.0,
        }
    }

    #[test]
    fn config_validation() {
        assert!(SamplerConfig::new(10, 10, 1, 0).validate().is_err());
        assert!(SamplerConfig::new(10, 5, 0, 0).validate().is_err());
        assert!(SamplerConfig::new(0, 0, 1, 0).validate().is_err());
        let ok = SamplerConfig::new(20_000, 10_000, 5, 0);
        ok.validate().unwrap();
        assert_eq!(ok.retained(), 2000);
        assert_eq!(SamplerConfig::new(17, 3, 4, 0).retained(), 3);
        let d = SamplerConfig::default();
        assert_eq!((d.iterations, d.burn_in, d.thin), (20_000, 10_000, 5));
    }

    #[test]
    fn retained_count_matches_config() {
        let x = Matrix::from_rows(&[vec![0.0], vec![0.2], vec![5.0], vec![5.1]]).unwrap();
        let p = ProcessParams::crp(1.0).unwrap();
        let cfg = SamplerConfig::new(53, 10, 4, 9);
        let chain = run_chain(&x, &p, &toy_prior(), &cfg).unwrap();
        assert_eq!(chain.samples.len(), cfg.retained());
        assert_eq!(chain.k_trace.len(), 53);
        for s in &chain.samples {
            assert_eq!(s.len(), 4);
            PartitionState::from_labels(s).check_invariants().unwrap();
            assert_eq!(&crate::partition::canonical_labels(s), s);
        }
    }

    #[test]
    fn single_item_chain() {
        let x = Matrix::from_rows(&[vec![1.5]]).unwrap();
        let p = ProcessParams::pcrp(1.0, 2.0).unwrap();
        let chain = run_chain(&x, &p, &toy_prior(), &SamplerConfig::new(50, 10, 2, 3)).unwrap();
        assert!(chain.samples.iter().all(|s| s == &vec![0]));
    }

    #[test]
    fn round_robin_start_and_determinism() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i % 3) as f64 * 4.0 + (i as f64 * 0.1).sin()])
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let p = ProcessParams::pcrp(1.0, 1.3).unwrap();
        let mut cfg = SamplerConfig::new(100, 20, 5, 42);
        cfg.init = Initialization::RoundRobin(7);
        let a = run_chain(&x, &p, &toy_prior(), &cfg).unwrap();
        let b = run_chain(&x, &p, &toy_prior(), &cfg).unwrap();
        assert!(a.same_draws(&b));
        cfg.seed = 43;
        let c = run_chain(&x, &p, &toy_prior(), &cfg).unwrap();
        assert!(!a.same_draws(&c));
    }

    #[test]
    fn bad_inputs_rejected() {
        let p = ProcessParams::crp(1.0).unwrap();
        let cfg = SamplerConfig::new(10, 0, 1, 0);
        let x2 = Matrix::from_rows(&[vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            run_chain(&x2, &p, &toy_prior(), &cfg),
            Err(Error::DimensionMismatch { .. })
        ));
        let nan = Matrix::from_rows(&[vec![f64::NAN]]).unwrap();
        assert!(run_chain(&nan, &p, &toy_prior(), &cfg).is_err());
    }

    #[test]
    fn posterior_k_examples() {
        let all3 = chain_from(vec![vec![0, 1, 2]; 5], vec![3; 5]);
        let d = posterior_k_distribution(&all3).unwrap();
        assert_eq!(d.into_iter().collect::<Vec<_>>(), vec![(3, 1.0)]);
        let alt = chain_from(
            (0..10)
                .map(|i| if i % 2 == 0 { vec![0, 1, 1] } else { vec![0, 1, 2] })
                .collect(),
            vec![],
        );
        let d = posterior_k_distribution(&alt).unwrap();
        assert_eq!(d.into_iter().collect::<Vec<_>>(), vec![(2, 0.5), (3, 0.5)]);
        assert_eq!(
            posterior_k_distribution(&chain_from(vec![], vec![1])),
            Err(Error::EmptyChain)
        );
    }

    #[test]
    fn summary_examples() {
        let truth = vec![0, 0, 1, 1, 2];
        let chain = chain_from(vec![truth.clone(); 4], vec![1, 2, 5, 3]);
        let s = summarize(&chain, Some(&truth)).unwrap();
        assert_eq!(s.nmi.unwrap().mean, 1.0);
        assert!(s.vi.unwrap().mean.abs() < 1e-15);
        assert_eq!(s.k_max, 3);
        assert_eq!(s.k.mean, 3.0);
        assert_eq!(s.k.se, 0.0);

        let ks = [3, 3, 4, 4];
        let chain = chain_from(ks.iter().map(|&k| (0..k).collect()).collect(), vec![]);
        let s = summarize(&chain, None).unwrap();
        assert!((s.k.se - 0.288_675_134_594_812_9).abs() < 1e-12);
        assert_eq!(s.k_max, 4);
        assert!(s.nmi.is_none());
    }

    #[test]
    fn point_estimate_prefers_separated_clusters() {
        let x = Matrix::from_rows(&[vec![0.0], vec![0.1], vec![8.0], vec![8.1]]).unwrap();
        let p = ProcessParams::crp(1.0).unwrap();
        let chain = chain_from(vec![vec![0, 0, 0, 0], vec![0, 0, 1, 1], vec![0, 1, 2, 3]], vec![]);
        let pe = point_estimate(&chain, &x, &p, &toy_prior()).unwrap();
        assert_eq!(pe.sample_index, 1);
        assert_eq!(pe.labels, vec![0, 0, 1, 1]);
    }
}
