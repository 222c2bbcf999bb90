//! Choosing the power `r` by cross-validation, and the CRP-Oracle `α`.
//!
//! The grid is walked upwards from `r = 1 + ε`. At each point a pCRP chain
//! is run on the training data and the loss is the mean [`cv_loss`] over the
//! retained samples. The walk stops at the first point whose loss exceeds
//! `jump_factor × min(losses so far)`; the chosen power is the grid point
//! just before that jump.

use serde::{Deserialize, Serialize};

use crate::conjugate::NiwParams;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::metrics::cv_loss;
use crate::partition::ProcessParams;
use crate::rng::derive_seed;
use crate::sampler::{run_chain, SamplerConfig};
use crate::scalar::Scalar;

pub const DEFAULT_JUMP_FACTOR: f64 = 1.5;

/// Strictly increasing powers, all above 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<T> {
    points: Vec<T>,
}

fn grid_value<T: Scalar>(start: f64, step: f64, i: usize) -> T {
    // snap to 1e-9 so repeated addition error does not leak into outputs
    T::of(((start + step * i as f64) * 1e9).round() / 1e9)
}

impl<T: Scalar> GridSpec<T> {
    pub fn from_points(points: Vec<T>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("grid", "empty"));
        }
        if points[0] <= T::one() || !points.iter().all(|p| p.is_finite()) {
            return Err(Error::invalid("grid", "must start above 1"));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("grid", "must be strictly increasing"));
        }
        Ok(GridSpec { points })
    }

    /// `start, start + step, …` up to and including `max`.
    pub fn uniform(start: f64, step: f64, max: f64) -> Result<Self> {
        if !(step > 0.0) || !(max >= start) {
            return Err(Error::invalid("grid", "need step > 0 and max >= start"));
        }
        let count = ((max - start) / step + 1e-9).floor() as usize + 1;
        Self::from_points((0..count).map(|i| grid_value(start, step, i)).collect())
    }

    /// Dense near 1, coarser above: `1.01..=1.2` by 0.01, then by 0.05 up to 3.
    pub fn default_grid() -> Self {
        let mut pts: Vec<T> = (0..20).map(|i| grid_value(1.01, 0.01, i)).collect();
        pts.extend((1..=36).map(|i| grid_value::<T>(1.2, 0.05, i)));
        Self::from_points(pts).expect("default grid is valid")
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCurve<T> {
    /// Evaluated grid points, ascending. Stops at the jump.
    pub grid: Vec<T>,
    pub losses: Vec<T>,
    pub chosen_r: T,
    pub chosen_index: usize,
    pub inflection_detected: bool,
}

/// Index of the first loss exceeding `factor × min(previous losses)`.
pub fn detect_jump<T: Scalar>(losses: &[T], factor: T) -> Option<usize> {
    let mut best = *losses.first()?;
    for (i, &l) in losses.iter().enumerate().skip(1) {
        if l > best * factor {
            return Some(i);
        }
        if l < best {
            best = l;
        }
    }
    None
}

/// Index of the grid point just before the first jump.
pub fn inflection_index<T: Scalar>(losses: &[T], factor: T) -> Option<usize> {
    detect_jump(losses, factor).map(|j| j - 1)
}

/// Builds the curve from a (possibly longer) sequence of evaluated losses.
pub fn curve_from_losses<T: Scalar>(grid: &[T], losses: &[T], jump_factor: T) -> Result<CvCurve<T>> {
    if grid.len() != losses.len() || grid.is_empty() {
        return Err(Error::LengthMismatch {
            left: grid.len(),
            right: losses.len(),
        });
    }
    Ok(match detect_jump(losses, jump_factor) {
        Some(j) => CvCurve {
            grid: grid[..=j].to_vec(),
            losses: losses[..=j].to_vec(),
            chosen_r: grid[j - 1],
            chosen_index: j - 1,
            inflection_detected: true,
        },
        None => CvCurve {
            grid: grid.to_vec(),
            losses: losses.to_vec(),
            chosen_r: grid[grid.len() - 1],
            chosen_index: grid.len() - 1,
            inflection_detected: false,
        },
    })
}

/// Mean CV loss of a pCRP(r) chain on `train`.
pub fn grid_point_loss<T: Scalar>(
    train: &Matrix<T>,
    power: T,
    prior: &NiwParams<T>,
    alpha: T,
    config: &SamplerConfig,
) -> Result<T> {
    let params = ProcessParams::pcrp(alpha, power)?;
    let chain = run_chain(train, &params, prior, config)?;
    if chain.samples.is_empty() {
        return Err(Error::EmptyChain);
    }
    let total = chain.samples.iter().map(|s| cv_loss(train, s)).sum::<Result<T>>()?;
    Ok(total / T::of_usize(chain.samples.len()))
}

/// Walks the grid upwards and stops at the first loss jump.
///
/// Grid point `i` runs its chain with seed `derive_seed(seed, i)`, so the
/// result does not depend on whether points are evaluated one by one or in
/// parallel.
pub fn tune_power<T: Scalar>(
    train: &Matrix<T>,
    grid: &GridSpec<T>,
    jump_factor: T,
    prior: &NiwParams<T>,
    alpha: T,
    config: &SamplerConfig,
    seed: u64,
) -> Result<CvCurve<T>> {
    tune_power_parallel(train, grid, jump_factor, prior, alpha, config, seed, 1)
}

/// [`tune_power`] evaluating `threads` consecutive grid points at a time.
/// Points past the first jump in a batch are discarded, so the curve is
/// identical to the sequential one.
#[allow(clippy::too_many_arguments)]
pub fn tune_power_parallel<T: Scalar>(
    train: &Matrix<T>,
    grid: &GridSpec<T>,
    jump_factor: T,
    prior: &NiwParams<T>,
    alpha: T,
    config: &SamplerConfig,
    seed: u64,
    threads: usize,
) -> Result<CvCurve<T>> {
    if !(jump_factor > T::one()) {
        return Err(Error::invalid("jump_factor", "must be > 1"));
    }
    config.validate()?;
    let points = grid.points();
    let eval = |i: usize| {
        let cfg = SamplerConfig {
            seed: derive_seed(seed, i as u64),
            ..config.clone()
        };
        grid_point_loss(train, points[i], prior, alpha, &cfg)
    };
    let threads = threads.max(1);
    let mut losses = Vec::new();
    for start in (0..points.len()).step_by(threads) {
        let end = (start + threads).min(points.len());
        let batch: Vec<Result<T>> = if end - start == 1 {
            vec![eval(start)]
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = (start..end).map(|i| s.spawn(move || eval(i))).collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("grid worker panicked"))
                    .collect()
            })
        };
        for (i, loss) in (start..end).zip(batch) {
            let loss = loss?;
            log::info!("cv: r = {}, loss = {loss}", points[i]);
            losses.push(loss);
            if detect_jump(&losses, jump_factor).is_some() {
                return curve_from_losses(&points[..losses.len()], &losses, jump_factor);
            }
        }
    }
    curve_from_losses(&points[..losses.len()], &losses, jump_factor)
}

/// `α` whose prior mean cluster count `α ln N` equals `true_k`.
pub fn oracle_alpha(true_k: usize, n: usize) -> Result<f64> {
    if true_k == 0 {
        return Err(Error::invalid("true_k", "must be positive"));
    }
    if n < 2 {
        return Err(Error::invalid("n", "must be at least 2"));
    }
    Ok(true_k as f64 / (n as f64).ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jump_detection_examples() {
        let l = [15.5, 15.1, 14.9, 61.0];
        assert_eq!(detect_jump(&l, 1.5), Some(3));
        assert_eq!(inflection_index(&l, 1.5), Some(2));
        assert_eq!(detect_jump(&l, 1.2), Some(3));
        let grid = [1.01, 1.02, 1.03, 1.04];
        let c = curve_from_losses(&grid, &l, 1.2).unwrap();
        assert_eq!(c.chosen_index, 2);
        assert_eq!(c.chosen_r, 1.03);
        assert!(c.inflection_detected);

        let flat = [10.0, 10.0, 10.0, 10.0];
        assert_eq!(detect_jump(&flat, 1.5), None);
        let c = curve_from_losses(&grid, &flat, 1.5).unwrap();
        assert!(!c.inflection_detected);
        assert_eq!(c.chosen_r, 1.04);
        assert_eq!(c.chosen_index, 3);
    }

    #[test]
    fn jump_compares_against_running_minimum() {
        // 20 > 1.5 × 12 but 17 < 1.5 × 12
        assert_eq!(detect_jump(&[15.0, 12.0, 17.0, 20.0], 1.5), Some(3));
        assert_eq!(detect_jump::<f64>(&[], 1.5), None);
    }

    #[test]
    fn oracle_alpha_values() {
        let round2 = |v: f64| (v * 100.0).round() / 100.0;
        assert_eq!(round2(oracle_alpha(4, 1000).unwrap()), 0.58);
        assert_eq!(round2(oracle_alpha(4, 3000).unwrap()), 0.50);
        assert_eq!(round2(oracle_alpha(2, 172).unwrap()), 0.39);
        let a = oracle_alpha(3, 300).unwrap();
        assert!((a * 300f64.ln() - 3.0).abs() < 1e-15);
        assert!(oracle_alpha(0, 10).is_err());
        assert!(oracle_alpha(2, 1).is_err());
    }

    #[test]
    fn parallel_walk_matches_sequential() {
        let x = Matrix::from_rows(
            &(0..24)
                .map(|i| vec![if i % 2 == 0 { 0.0 } else { 6.0 } + (i as f64 * 0.7).sin() * 0.3])
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let prior = NiwParams::new(vec![3.0], 0.05, 3.0, Matrix::identity(1)).unwrap();
        let grid = GridSpec::uniform(1.1, 0.4, 2.7).unwrap();
        let cfg = SamplerConfig::new(60, 30, 3, 0);
        let a = tune_power(&x, &grid, 1.5, &prior, 1.0, &cfg, 11).unwrap();
        let b = tune_power_parallel(&x, &grid, 1.5, &prior, 1.0, &cfg, 11, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.chosen_index < a.grid.len());
    }

    #[test]
    fn grids() {
        let g = GridSpec::<f64>::default_grid();
        let p = g.points();
        assert_eq!(p[0], 1.01);
        assert_eq!(p[19], 1.2);
        assert_eq!(p[20], 1.25);
        assert_eq!(*p.last().unwrap(), 3.0);
        assert!(p.windows(2).all(|w| w[0] < w[1]));
        let u = GridSpec::<f64>::uniform(1.01, 0.1, 1.5).unwrap();
        assert_eq!(u.points(), &[1.01, 1.11, 1.21, 1.31, 1.41]);
        assert!(GridSpec::<f64>::uniform(1.0, 0.1, 2.0).is_err());
        assert!(GridSpec::<f64>::from_points(vec![1.2, 1.1]).is_err());
    }
}
