use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use pcrp::conjugate::{log_marginal_likelihood, ClusterStats};
use pcrp::rng::seeded;
use pcrp::{log_posterior_predictive, run_chain, Matrix, NiwParams, ProcessParams, SamplerConfig};
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::ln_gamma;

fn prior_2d() -> NiwParams {
    let psi = Matrix::from_rows(&[vec![1.5, 0.3], vec![0.3, 0.8]]).unwrap();
    NiwParams::new(vec![0.2, -0.4], 0.7, 4.5, psi).unwrap()
}

fn random_points(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seeded(seed);
    (0..n)
        .map(|_| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect()
}

/// Multivariate Student-t log density written against nalgebra.
fn mvt_ln_pdf(x: &[f64], loc: &[f64], scale: &DMatrix<f64>, df: f64) -> f64 {
    let d = x.len() as f64;
    let r = DVector::from_column_slice(x) - DVector::from_column_slice(loc);
    let q = (r.transpose() * scale.clone().try_inverse().unwrap() * &r)[(0, 0)];
    ln_gamma((df + d) / 2.0)
        - ln_gamma(df / 2.0)
        - 0.5 * d * (df * std::f64::consts::PI).ln()
        - 0.5 * scale.determinant().ln()
        - 0.5 * (df + d) * (1.0 + q / df).ln()
}

#[test]
fn predictive_matches_textbook_student_t() {
    let prior = prior_2d();
    let pts = random_points(5, 2, 1);
    let stats = ClusterStats::from_points(2, pts.iter().map(Vec::as_slice)).unwrap();

    let n = 5.0;
    let xbar = DVector::from_fn(2, |i, _| pts.iter().map(|p| p[i]).sum::<f64>() / n);
    let mu0 = DVector::from_column_slice(prior.mu0());
    let mut s = DMatrix::zeros(2, 2);
    for p in &pts {
        let v = DVector::from_column_slice(p) - &xbar;
        s += &v * v.transpose();
    }
    let (k0, nu0) = (prior.kappa0(), prior.nu0());
    let (kn, nun) = (k0 + n, nu0 + n);
    let mun = (&mu0 * k0 + &xbar * n) / kn;
    let dm = &xbar - &mu0;
    let psi0 = DMatrix::from_row_slice(2, 2, prior.psi0().as_slice());
    let psin = psi0 + s + &dm * dm.transpose() * (k0 * n / kn);
    let df = nun - 2.0 + 1.0;
    let scale = psin * ((kn + 1.0) / (kn * df));

    for x in random_points(10, 2, 2) {
        let want = mvt_ln_pdf(&x, mun.as_slice(), &scale, df);
        let got = log_posterior_predictive(&x, &stats, &prior).unwrap();
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }
}

#[test]
fn marginal_likelihood_is_product_of_sequential_predictives() {
    let prior = prior_2d();
    let pts = random_points(7, 2, 3);
    let mut stats = ClusterStats::empty(2);
    let mut chain_rule = 0.0;
    for p in &pts {
        chain_rule += log_posterior_predictive(p, &stats, &prior).unwrap();
        stats.add_point(p).unwrap();
    }
    let direct = log_marginal_likelihood(&stats, &prior).unwrap();
    assert!((direct - chain_rule).abs() < 1e-9, "{direct} vs {chain_rule}");
}

fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0]];
    for _ in 1..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                let k = p.iter().max().unwrap() + 1;
                (0..=k).map(move |z| {
                    let mut q = p.clone();
                    q.push(z);
                    q
                })
            })
            .collect();
    }
    out
}

fn log_marginal_1d(xs: &[f64], mu0: f64, kappa0: f64, nu0: f64, psi0: f64) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    let kn = kappa0 + n;
    let (a0, b0) = (nu0 / 2.0, psi0 / 2.0);
    let an = a0 + n / 2.0;
    let bn = b0 + 0.5 * ss + kappa0 * n * (mean - mu0).powi(2) / (2.0 * kn);
    ln_gamma(an) - ln_gamma(a0) + a0 * b0.ln() - an * bn.ln() + 0.5 * (kappa0 / kn).ln()
        - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
}

fn sampler_matches_enumeration(alpha: f64, power: f64) {
    let xs = [-1.1, -0.4, 0.9, 1.6];
    let prior = NiwParams::new(vec![0.0], 1.0, 2.5, Matrix::from_rows(&[vec![0.8]]).unwrap()).unwrap();
    let parts = set_partitions(xs.len());
    assert_eq!(parts.len(), 15);
    let weights: Vec<f64> = parts
        .iter()
        .map(|z| {
            let k = z.iter().max().unwrap() + 1;
            let mut lp = k as f64 * alpha.ln();
            for c in 0..k {
                let m: Vec<f64> = z.iter().zip(&xs).filter(|(l, _)| **l == c).map(|(_, v)| *v).collect();
                lp += power * ln_gamma(m.len() as f64) + log_marginal_1d(&m, 0.0, 1.0, 2.5, 0.8);
            }
            lp.exp()
        })
        .collect();
    let total: f64 = weights.iter().sum();

    let x = Matrix::from_rows(&xs.iter().map(|&v| vec![v]).collect::<Vec<_>>()).unwrap();
    let params = ProcessParams::pcrp(alpha, power).unwrap();
    let chain = run_chain(&x, &params, &prior, &SamplerConfig::new(100_500, 500, 2, 9)).unwrap();
    let mut counts: HashMap<&[usize], usize> = HashMap::new();
    for s in &chain.samples {
        *counts.entry(s.as_slice()).or_default() += 1;
    }
    let m = chain.samples.len() as f64;
    let tv: f64 = parts
        .iter()
        .zip(&weights)
        .map(|(z, w)| (w / total - counts.get(z.as_slice()).copied().unwrap_or(0) as f64 / m).abs())
        .sum::<f64>()
        / 2.0;
    assert!(tv < 0.03, "TV {tv}");
}

#[test]
fn small_posterior_crp() {
    sampler_matches_enumeration(0.7, 1.0);
}

#[test]
fn small_posterior_pcrp() {
    sampler_matches_enumeration(1.3, 1.5);
}
