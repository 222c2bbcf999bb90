use pcrp::datasets::{generate, standardize, MixtureSpec};

#[test]
fn component_frequencies_are_binomial() {
    let n = 6000;
    let d = generate(&MixtureSpec::<f64>::sim1(), n, 17);
    let labels = d.labels.unwrap();
    let sd = (n as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
    for k in 0..3 {
        let count = labels.iter().filter(|&&l| l == k).count() as f64;
        assert!((count - n as f64 / 3.0).abs() < 4.0 * sd, "component {k}: {count}");
    }
}

#[test]
fn component_moments_match_the_spec() {
    let spec = MixtureSpec::<f64>::sim2();
    let d = generate(&spec, 8000, 3);
    let labels = d.labels.as_ref().unwrap();
    for k in 0..2 {
        let rows: Vec<&[f64]> =
            d.x.rows()
                .zip(labels)
                .filter(|(_, &l)| l == k)
                .map(|(r, _)| r)
                .collect();
        let m = rows.len() as f64;
        for j in 0..2 {
            let var = spec.covariances()[k][(j, j)];
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / m;
            assert!(
                (mean - spec.means()[k][j]).abs() < 4.0 * (var / m).sqrt(),
                "mean {k},{j}: {mean}"
            );
            let s2 = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (m - 1.0);
            // sd of the sample variance of a Gaussian is σ²·sqrt(2/(m−1))
            assert!(
                (s2 - var).abs() < 4.0 * var * (2.0 / (m - 1.0)).sqrt(),
                "var {k},{j}: {s2}"
            );
        }
    }
}

#[test]
fn standardized_sim2_has_unit_scale() {
    let d = generate(&MixtureSpec::<f64>::sim2(), 500, 9);
    let (z, t) = standardize(&d).unwrap();
    assert_eq!(z.labels, d.labels);
    let cov = z.x.covariance().unwrap();
    assert!((cov[(0, 0)] - 1.0).abs() < 1e-12 && (cov[(1, 1)] - 1.0).abs() < 1e-12);
    assert!(t.scale.iter().all(|&s| s > 1.0));
}
