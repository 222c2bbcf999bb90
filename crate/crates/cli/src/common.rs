use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use pcrp::conjugate::PriorOverrides;
use pcrp::datasets::{self, standardize};
use pcrp::rng::derive_seed;
use pcrp::sampler::{Chain, Initialization, MeanSe, SamplerConfig, Summary};
use pcrp::{Dataset, NiwParams, ProcessParams};
use serde::{Deserialize, Serialize};

use crate::args::{DataArgs, GForm, PriorArgs, ProcessArg, ProcessArgs, SamplerArgs};

/// Independent RNG streams derived from the user's `--seed`.
pub mod stream {
    pub const DATA: u64 = 0;
    pub const CHAIN: u64 = 1;
    pub const TUNE: u64 = 2;
    pub const TRAIN_DRAW: u64 = 3;
    pub const SPLIT: u64 = 4;
}

pub const DEFAULT_N: usize = 300;

pub fn load_data(args: &DataArgs, seed: u64) -> Result<Dataset> {
    let data = match (&args.data, &args.preset) {
        (Some(path), _) => datasets::read_csv(path).with_context(|| format!("reading {}", path.display()))?,
        (None, Some(name)) => {
            datasets::load_preset(name, args.n.unwrap_or(DEFAULT_N), derive_seed(seed, stream::DATA))?
        }
        (None, None) => bail!("one of --data or --preset is required"),
    };
    if data.is_empty() {
        bail!("dataset {} has no rows", data.name);
    }
    if args.standardize {
        Ok(standardize(&data)?.0)
    } else {
        Ok(data)
    }
}

pub fn prior_overrides(args: &PriorArgs) -> PriorOverrides {
    PriorOverrides {
        mu0: args.mu0.clone(),
        kappa0: args.kappa0,
        nu0: args.nu0,
        psi0_scale: args.psi0_scale,
    }
}

pub fn merge_prior(base: PriorOverrides, args: &PriorArgs) -> PriorOverrides {
    PriorOverrides {
        mu0: args.mu0.clone().or(base.mu0),
        kappa0: args.kappa0.or(base.kappa0),
        nu0: args.nu0.or(base.nu0),
        psi0_scale: args.psi0_scale.or(base.psi0_scale),
    }
}

pub fn build_prior(data: &Dataset, overrides: &PriorOverrides) -> Result<NiwParams> {
    NiwParams::from_data(&data.x, overrides).context("building the NIW prior")
}

/// Sampler settings as given on the command line or in a config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSettings {
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
    pub initial_k: Option<usize>,
}

impl SamplerSettings {
    pub fn from_args(args: &SamplerArgs) -> Self {
        SamplerSettings {
            iterations: args.iterations,
            burn_in: args.burn_in,
            thin: args.thin,
            initial_k: args.initial_k,
        }
    }

    pub fn merged(self, args: &SamplerArgs) -> Self {
        SamplerSettings {
            iterations: args.iterations.or(self.iterations),
            burn_in: args.burn_in.or(self.burn_in),
            thin: args.thin.or(self.thin),
            initial_k: args.initial_k.or(self.initial_k),
        }
    }

    pub fn config(&self, seed: u64) -> Result<SamplerConfig> {
        let d = SamplerConfig::default();
        let cfg = SamplerConfig {
            iterations: self.iterations.unwrap_or(d.iterations),
            burn_in: self.burn_in.unwrap_or(d.burn_in),
            thin: self.thin.unwrap_or(d.thin),
            seed,
            init: match self.initial_k {
                None | Some(1) => Initialization::AllInOne,
                Some(k) => Initialization::RoundRobin(k),
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn g_function(form: GForm, power: Option<f64>) -> Result<pcrp::partition::SizeFn<f64>> {
    Ok(match form {
        GForm::Power => {
            let r = power.context("--g-form power needs --power")?;
            Arc::new(move |x: f64| x.powf(r))
        }
        GForm::Xlog => Arc::new(|x: f64| x * (std::f64::consts::E + x).ln()),
    })
}

/// Process parameters plus the method name used in output tables.
pub fn process_params(args: &ProcessArgs, n: usize) -> Result<(ProcessParams, String)> {
    let alpha = match args.true_k {
        Some(k) => pcrp::oracle_alpha(k, n)?,
        None => args.alpha.unwrap_or(1.0),
    };
    Ok(match args.process {
        ProcessArg::Crp => {
            if args.power.is_some() {
                bail!("--power is only used with --process pcrp or gcrp");
            }
            let name = if args.true_k.is_some() { "crp-oracle" } else { "crp" };
            (ProcessParams::crp(alpha)?, name.to_string())
        }
        ProcessArg::Pcrp => {
            let r = args.power.context("--process pcrp needs --power")?;
            (ProcessParams::pcrp(alpha, r)?, "pcrp".to_string())
        }
        ProcessArg::Gcrp => (
            ProcessParams::gcrp(alpha, g_function(args.g_form, args.power)?)?,
            "gcrp".to_string(),
        ),
    })
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    datasets::write_atomic(&path, contents.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

/// Shortest representation that parses back to the same `f64`.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn trace_csv(chain: &Chain) -> String {
    let mut out = String::from("iteration,k\n");
    for (i, k) in chain.k_trace.iter().enumerate() {
        let _ = writeln!(out, "{},{k}", i + 1);
    }
    out
}

pub fn samples_csv(chain: &Chain) -> String {
    let n = chain.samples.first().map_or(0, Vec::len);
    let header: Vec<String> = (1..=n).map(|i| format!("z{i}")).collect();
    let mut out = header.join(",");
    out.push('\n');
    for s in &chain.samples {
        let row: Vec<String> = s.iter().map(usize::to_string).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn read_samples(path: &Path) -> Result<Vec<Vec<usize>>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().context("samples file is empty")?;
    let n = header.split(',').count();
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|c| c.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .with_context(|| format!("{}: line {}: bad label", path.display(), i + 2))?;
        if row.len() != n {
            bail!("{}: line {}: {} labels, expected {n}", path.display(), i + 2, row.len());
        }
        samples.push(row);
    }
    if samples.is_empty() {
        bail!("{} holds no samples", path.display());
    }
    Ok(samples)
}

pub fn posterior_k_csv(dist: &BTreeMap<usize, f64>) -> String {
    let mut out = String::from("k,probability\n");
    for (k, p) in dist {
        let _ = writeln!(out, "{k},{}", num(*p));
    }
    out
}

pub fn labelled_csv(data: &Dataset, labels: &[usize]) -> String {
    let mut d = data.clone();
    d.labels = Some(labels.to_vec());
    datasets::to_csv(&d)
}

pub const SUMMARY_HEADER: &str = "method,nmi,nmi_se,vi,vi_se,k,k_se,k_max";

fn opt_pair(m: Option<MeanSe>) -> (String, String) {
    m.map_or((String::new(), String::new()), |m| (num(m.mean), num(m.se)))
}

pub fn summary_row(method: &str, s: &Summary) -> String {
    let (nmi, nmi_se) = opt_pair(s.nmi);
    let (vi, vi_se) = opt_pair(s.vi);
    format!(
        "{method},{nmi},{nmi_se},{vi},{vi_se},{},{},{}\n",
        num(s.k.mean),
        num(s.k.se),
        s.k_max
    )
}

pub fn summary_csv(rows: &[(String, Summary)]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for (m, s) in rows {
        out.push_str(&summary_row(m, s));
    }
    out
}

/// Human-readable table with the same columns as [`summary_csv`].
pub fn summary_text(rows: &[(String, Summary)]) -> String {
    let width = rows.iter().map(|(m, _)| m.len()).max().unwrap_or(0).max(6);
    let mut out = format!(
        "{:<width$}  {:>7} {:>7}  {:>7} {:>7}  {:>7} {:>7}  {:>5}\n",
        "method", "NMI", "SE", "VI", "SE", "K", "SE", "K_max"
    );
    let cell = |m: Option<MeanSe>| {
        m.map_or(("-".to_string(), "-".to_string()), |m| {
            (format!("{:.4}", m.mean), format!("{:.4}", m.se))
        })
    };
    for (m, s) in rows {
        let (nmi, nmi_se) = cell(s.nmi);
        let (vi, vi_se) = cell(s.vi);
        let _ = writeln!(
            out,
            "{m:<width$}  {nmi:>7} {nmi_se:>7}  {vi:>7} {vi_se:>7}  {:>7.3} {:>7.4}  {:>5}",
            s.k.mean, s.k.se, s.k_max
        );
    }
    out
}

pub fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(samples: Vec<Vec<usize>>) -> Chain {
        Chain {
            k_trace: samples.iter().map(|s| s.iter().max().unwrap() + 1).collect(),
            samples,
            runtime_secs: 0.0,
        }
    }

    #[test]
    fn num_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 1e300, 3.0] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(3.0), "3.0");
    }

    #[test]
    fn samples_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = chain(vec![vec![0, 0, 1], vec![0, 1, 2]]);
        write_file(dir.path(), "s.csv", &samples_csv(&c)).unwrap();
        assert_eq!(
            fs::read_to_string(dir.path().join("s.csv")).unwrap(),
            "z1,z2,z3\n0,0,1\n0,1,2\n"
        );
        assert_eq!(read_samples(&dir.path().join("s.csv")).unwrap(), c.samples);
    }

    #[test]
    fn ragged_samples_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        fs::write(&p, "z1,z2\n0,1\n0\n").unwrap();
        assert!(read_samples(&p).unwrap_err().to_string().contains("line 3"));
        fs::write(&p, "z1,z2\n").unwrap();
        assert!(read_samples(&p).is_err());
    }

    #[test]
    fn trace_and_posterior_k() {
        let c = chain(vec![vec![0, 0], vec![0, 1]]);
        assert_eq!(trace_csv(&c), "iteration,k\n1,1\n2,2\n");
        let dist = BTreeMap::from([(1, 0.25), (2, 0.75)]);
        assert_eq!(posterior_k_csv(&dist), "k,probability\n1,0.25\n2,0.75\n");
    }

    #[test]
    fn initial_k_maps_to_initialization() {
        let mut s = SamplerSettings::default();
        assert_eq!(s.config(1).unwrap().init, Initialization::AllInOne);
        s.initial_k = Some(1);
        assert_eq!(s.config(1).unwrap().init, Initialization::AllInOne);
        s.initial_k = Some(5);
        assert_eq!(s.config(1).unwrap().init, Initialization::RoundRobin(5));
        s.burn_in = Some(30_000);
        assert!(s.config(1).is_err());
    }

    #[test]
    fn summary_row_leaves_missing_metrics_blank() {
        let s = Summary {
            retained: 2,
            k: MeanSe { mean: 2.5, se: 0.5 },
            k_max: 3,
            nmi: None,
            vi: None,
        };
        assert_eq!(summary_row("crp", &s), "crp,,,,,2.5,0.5,3\n");
        assert!(summary_text(&[("crp".into(), s)]).lines().nth(1).unwrap().contains("-"));
    }

    #[test]
    fn xlog_size_function() {
        let g = g_function(GForm::Xlog, None).unwrap();
        assert!((g(1.0) - (std::f64::consts::E + 1.0).ln()).abs() < 1e-15);
        assert!(g_function(GForm::Power, None).is_err());
        assert_eq!(g_function(GForm::Power, Some(2.0)).unwrap()(3.0), 9.0);
    }
}
