//! Seating rules of the Chinese restaurant process family.
//!
//! An item joins occupied table `k` with probability proportional to
//! `g(N_k)` and opens a new table with probability proportional to `α`,
//! where `N_k` counts the other items at table `k`. The CRP uses
//! `g(x) = x`, the powered CRP uses `g(x) = x^r` with `r ≥ 1`, and the
//! g-CRP takes any increasing `g` with `g(0) = 0`.
//!
//! Weights are handled in log space and normalized with a max shift, so
//! large powers (`N^r` with `r` up to 10 and beyond) cannot overflow.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rng::{draw_from_log_weights, seeded};
use crate::scalar::Scalar;

/// Occupied-table weight function of a g-CRP.
pub type SizeFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

#[derive(Clone)]
pub enum ProcessKind<T> {
    Crp,
    Pcrp,
    Gcrp(SizeFn<T>),
}

impl<T> fmt::Debug for ProcessKind<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessKind::Crp => f.write_str("Crp"),
            ProcessKind::Pcrp => f.write_str("Pcrp"),
            ProcessKind::Gcrp(_) => f.write_str("Gcrp(<fn>)"),
        }
    }
}

/// Concentration, power and kind of a seating rule. Always valid once built.
#[derive(Clone, Debug)]
pub struct ProcessParams<T> {
    alpha: T,
    power: T,
    kind: ProcessKind<T>,
}

fn check_alpha<T: Scalar>(alpha: T) -> Result<()> {
    if !alpha.is_finite() || alpha <= T::zero() {
        return Err(Error::invalid("alpha", format!("must be finite and > 0, got {alpha}")));
    }
    Ok(())
}

/// Points at which a user supplied `g` is checked.
fn probe_grid<T: Scalar>() -> Vec<T> {
    let fine = (0..=64).map(|i| T::of(0.25 * i as f64));
    let coarse = (5..=20).map(|k| T::of((1u64 << k) as f64));
    fine.chain(coarse).collect()
}

impl<T: Scalar> ProcessParams<T> {
    pub fn crp(alpha: T) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(ProcessParams {
            alpha,
            power: T::one(),
            kind: ProcessKind::Crp,
        })
    }

    /// Powered CRP. `power = 1` reproduces the CRP exactly; `power < 1` is rejected.
    pub fn pcrp(alpha: T, power: T) -> Result<Self> {
        check_alpha(alpha)?;
        if !power.is_finite() || power < T::one() {
            return Err(Error::invalid("power", format!("must be finite and >= 1, got {power}")));
        }
        Ok(ProcessParams {
            alpha,
            power,
            kind: ProcessKind::Pcrp,
        })
    }

    /// g-CRP with a user supplied weight function.
    ///
    /// `g(0) = 0` and monotonicity are checked on a probe grid. A `g` that
    /// falls below the identity somewhere above 1 is accepted with a warning,
    /// since it no longer shrinks small clusters.
    pub fn gcrp(alpha: T, g: SizeFn<T>) -> Result<Self> {
        check_alpha(alpha)?;
        let grid = probe_grid::<T>();
        let values: Vec<T> = grid.iter().map(|&x| g(x)).collect();
        if values[0] != T::zero() {
            return Err(Error::invalid("g", format!("g(0) must be 0, got {}", values[0])));
        }
        for (i, w) in values.windows(2).enumerate() {
            if !w[1].is_finite() || w[1] < w[0] {
                return Err(Error::invalid(
                    "g",
                    format!("not nondecreasing near x = {}", grid[i + 1]),
                ));
            }
        }
        if let Some(x) = grid
            .iter()
            .zip(&values)
            .find(|&(&x, &v)| x > T::one() && v < x)
            .map(|(x, _)| *x)
        {
            log::warn!("g(x) < x at x = {x}; small clusters are not penalized there");
        }
        Ok(ProcessParams {
            alpha,
            power: T::one(),
            kind: ProcessKind::Gcrp(g),
        })
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn power(&self) -> T {
        self.power
    }

    pub fn kind(&self) -> &ProcessKind<T> {
        &self.kind
    }

    /// `ln g(x)` for a real table size `x > 0`.
    pub fn log_weight_of(&self, x: T) -> T {
        match &self.kind {
            ProcessKind::Crp => x.ln(),
            ProcessKind::Pcrp => self.power * x.ln(),
            ProcessKind::Gcrp(g) => g(x).ln(),
        }
    }

    pub fn log_table_weight(&self, size: usize) -> T {
        self.log_weight_of(T::of_usize(size))
    }
}

/// Unnormalized log weights: one per occupied table, then `ln α` for a new table.
pub fn log_seat_weights<T: Scalar>(sizes: &[usize], params: &ProcessParams<T>) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(sizes.len() + 1);
    for (k, &n) in sizes.iter().enumerate() {
        if n == 0 {
            return Err(Error::EmptyCluster(k));
        }
        out.push(params.log_table_weight(n));
    }
    out.push(params.alpha.ln());
    Ok(out)
}

/// Turns log weights into probabilities via max-shift exponentiation.
pub fn normalize_log_weights<T: Scalar>(log_w: &[T]) -> Vec<T> {
    let max = log_w
        .iter()
        .copied()
        .fold(T::neg_infinity(), |a, b| if b > a { b } else { a });
    let exps: Vec<T> = log_w.iter().map(|&l| (l - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Seating probabilities for the given occupied table sizes (K + 1 values).
pub fn seat_weights_for_sizes<T: Scalar>(sizes: &[usize], params: &ProcessParams<T>) -> Result<Vec<T>> {
    Ok(normalize_log_weights(&log_seat_weights(sizes, params)?))
}

/// Seating probabilities for `held_out`, which must already be unseated.
pub fn seat_weights<T: Scalar>(state: &PartitionState, held_out: usize, params: &ProcessParams<T>) -> Result<Vec<T>> {
    match state.assignment(held_out)? {
        Some(_) => Err(Error::ItemSeated(held_out)),
        None => seat_weights_for_sizes(state.sizes(), params),
    }
}

/// Cluster assignments of N items with per-cluster sizes.
///
/// Items may be temporarily unseated (the Gibbs sampler removes one item at a
/// time). Clusters never stay empty: when the last item leaves a cluster, the
/// highest-indexed cluster takes its index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PartitionState {
    assignments: Vec<Option<usize>>,
    sizes: Vec<usize>,
    n_total: usize,
}

/// Outcome of [`PartitionState::unseat`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Unseated {
    pub cluster: usize,
    /// The cluster became empty and was removed. The former last cluster
    /// now lives at index `cluster` (unless `cluster` was the last one).
    pub emptied: bool,
}

impl PartitionState {
    /// N items, none seated.
    pub fn unseated(n: usize) -> Self {
        PartitionState {
            assignments: vec![None; n],
            sizes: Vec::new(),
            n_total: 0,
        }
    }

    pub fn all_in_one(n: usize) -> Self {
        Self::from_labels(&vec![0; n])
    }

    /// Item i goes to cluster `i mod k`.
    pub fn round_robin(n: usize, k: usize) -> Self {
        let k = k.max(1);
        Self::from_labels(&(0..n).map(|i| i % k).collect::<Vec<_>>())
    }

    /// Builds a fully seated state from arbitrary labels (relabelled canonically).
    pub fn from_labels(labels: &[usize]) -> Self {
        let canon = canonical_labels(labels);
        let k = canon.iter().max().map_or(0, |m| m + 1);
        let mut sizes = vec![0; k];
        for &z in &canon {
            sizes[z] += 1;
        }
        PartitionState {
            assignments: canon.into_iter().map(Some).collect(),
            sizes,
            n_total: labels.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// Number of seated items.
    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn n_clusters(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn assignments(&self) -> &[Option<usize>] {
        &self.assignments
    }

    pub fn assignment(&self, item: usize) -> Result<Option<usize>> {
        self.assignments.get(item).copied().ok_or(Error::ItemOutOfRange(item))
    }

    /// Seats an unseated item. `cluster == n_clusters()` opens a new cluster.
    pub fn seat(&mut self, item: usize, cluster: usize) -> Result<()> {
        if self.assignment(item)?.is_some() {
            return Err(Error::ItemSeated(item));
        }
        match cluster.cmp(&self.sizes.len()) {
            std::cmp::Ordering::Less => self.sizes[cluster] += 1,
            std::cmp::Ordering::Equal => self.sizes.push(1),
            std::cmp::Ordering::Greater => {
                return Err(Error::invalid(
                    "cluster",
                    format!("{cluster} exceeds the new-cluster index {}", self.sizes.len()),
                ))
            }
        }
        self.assignments[item] = Some(cluster);
        self.n_total += 1;
        Ok(())
    }

    /// Removes an item from its cluster, dropping the cluster if it empties.
    pub fn unseat(&mut self, item: usize) -> Result<Unseated> {
        let k = self.assignment(item)?.ok_or(Error::ItemNotSeated(item))?;
        self.assignments[item] = None;
        self.n_total -= 1;
        self.sizes[k] -= 1;
        let emptied = self.sizes[k] == 0;
        if emptied {
            let last = self.sizes.len() - 1;
            self.sizes.swap_remove(k);
            if k != last {
                for z in self.assignments.iter_mut().flatten() {
                    if *z == last {
                        *z = k;
                    }
                }
            }
        }
        Ok(Unseated { cluster: k, emptied })
    }

    /// Labels in order-of-appearance form, or `None` if some item is unseated.
    pub fn labels(&self) -> Option<Vec<usize>> {
        let raw: Option<Vec<usize>> = self.assignments.iter().copied().collect();
        raw.map(|r| canonical_labels(&r))
    }

    /// Checks the size bookkeeping against the assignments.
    pub fn check_invariants(&self) -> Result<()> {
        let mut counted = vec![0; self.sizes.len()];
        for z in self.assignments.iter().flatten() {
            *counted
                .get_mut(*z)
                .ok_or_else(|| Error::invalid("assignments", format!("label {z} has no cluster")))? += 1;
        }
        if let Some(k) = self.sizes.iter().position(|&s| s == 0) {
            return Err(Error::EmptyCluster(k));
        }
        if counted != self.sizes || self.sizes.iter().sum::<usize>() != self.n_total {
            return Err(Error::invalid("sizes", "do not match the assignments"));
        }
        Ok(())
    }
}

/// Relabels so the first item is cluster 0 and each new cluster takes the next integer.
pub fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&z| {
            let next = map.len();
            *map.entry(z).or_insert(next)
        })
        .collect()
}

fn check_canonical(seq: &[usize]) -> Result<()> {
    let mut k = 0;
    for (i, &z) in seq.iter().enumerate() {
        if z > k {
            return Err(Error::NonCanonicalLabels(i));
        }
        if z == k {
            k += 1;
        }
    }
    Ok(())
}

/// Seats `n` items one after another under the prior seating rule.
pub fn sample_prior_partition<T: Scalar>(n: usize, params: &ProcessParams<T>, seed: u64) -> Result<PartitionState> {
    if n == 0 {
        return Err(Error::invalid("n", "need at least one item"));
    }
    let mut rng = seeded(seed);
    let mut state = PartitionState::unseated(n);
    let log_alpha = params.alpha().ln();
    // running log weights of occupied tables, kept in sync with `state`
    let mut log_w: Vec<T> = vec![log_alpha];
    for item in 0..n {
        let k = draw_from_log_weights(&log_w, &mut rng);
        state.seat(item, k)?;
        let size = state.sizes()[k];
        if k + 1 == log_w.len() {
            log_w.push(log_alpha);
        }
        log_w[k] = params.log_table_weight(size);
    }
    Ok(state)
}

/// Log probability of an ordered, canonically labelled seating sequence.
pub fn partition_log_probability<T: Scalar>(seq: &[usize], params: &ProcessParams<T>) -> Result<T> {
    check_canonical(seq)?;
    let mut sizes: Vec<usize> = Vec::new();
    let mut total = T::zero();
    for &z in seq {
        let w = seat_weights_for_sizes(&sizes, params)?;
        total = total + w[z].ln();
        if z == sizes.len() {
            sizes.push(1);
        } else {
            sizes[z] += 1;
        }
    }
    Ok(total)
}

/// Log of the exchangeable partition weight `α^K Π_k Π_{m<N_k} g(m)`.
///
/// This is the joint distribution whose full conditionals are the seating
/// rule, so it is the prior the collapsed Gibbs sampler actually targets
/// (up to an additive constant). For the CRP it coincides with
/// [`partition_log_probability`] up to `Σ_i ln(α + i)`.
pub fn log_gibbs_prior<T: Scalar>(sizes: &[usize], params: &ProcessParams<T>) -> Result<T> {
    let mut total = T::of_usize(sizes.len()) * params.alpha().ln();
    for (k, &n) in sizes.iter().enumerate() {
        if n == 0 {
            return Err(Error::EmptyCluster(k));
        }
        for m in 1..n {
            total = total + params.log_table_weight(m);
        }
    }
    Ok(total)
}

/// Exact rational seat weights for integer powers.
pub mod exact {
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::{One, Pow, Zero};

    use crate::error::{Error, Result};

    fn size_weight(n: u64, power: u32) -> BigRational {
        BigRational::from_integer(Pow::pow(BigInt::from(n), power))
    }

    /// Seat probabilities `N_k^r / (Σ N_h^r + α)` and `α / (Σ N_h^r + α)`.
    pub fn seat_weights(sizes: &[u64], alpha: &BigRational, power: u32) -> Result<Vec<BigRational>> {
        if *alpha <= BigRational::zero() {
            return Err(Error::invalid("alpha", "must be > 0"));
        }
        if power == 0 {
            return Err(Error::invalid("power", "must be >= 1"));
        }
        if let Some(k) = sizes.iter().position(|&n| n == 0) {
            return Err(Error::EmptyCluster(k));
        }
        let mut w: Vec<BigRational> = sizes.iter().map(|&n| size_weight(n, power)).collect();
        w.push(alpha.clone());
        let total = w.iter().fold(BigRational::zero(), |a, b| a + b);
        Ok(w.into_iter().map(|x| x / &total).collect())
    }

    /// Probability of a canonical seating sequence, as an exact fraction.
    pub fn partition_probability(seq: &[usize], alpha: &BigRational, power: u32) -> Result<BigRational> {
        super::check_canonical(seq)?;
        let mut sizes: Vec<u64> = Vec::new();
        let mut p = BigRational::one();
        for &z in seq {
            p *= seat_weights(&sizes, alpha, power)?[z].clone();
            if z == sizes.len() {
                sizes.push(1);
            } else {
                sizes[z] += 1;
            }
        }
        Ok(p)
    }
}
