use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use pcrp::conjugate::PriorOverrides;
use pcrp::datasets::{self, standardize};
use pcrp::rng::derive_seed;
use pcrp::{oracle_alpha, Dataset, ProcessParams};
use serde::{Deserialize, Serialize};

use crate::args::{CompareArgs, DataArgs};
use crate::common::{self, num, stream, SamplerSettings};
use crate::fit::{self, FitRun};
use crate::tune::{self, GridSettings};

pub const OLD_FAITHFUL_TRAIN: usize = 100;
pub const DEFAULT_TRAIN_N: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Crp,
    CrpOracle,
    Pcrp,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Crp => "crp",
            Method::CrpOracle => "crp-oracle",
            Method::Pcrp => "pcrp",
        }
    }
}

impl FromStr for Method {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "crp" => Ok(Method::Crp),
            "crp-oracle" => Ok(Method::CrpOracle),
            "pcrp" => Ok(Method::Pcrp),
            other => Err(anyhow!("unknown method `{other}` (expected crp, crp-oracle or pcrp)")),
        }
    }
}

/// Everything `compare` needs; read from JSON, then overridden by flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub preset: Option<String>,
    pub n: Option<usize>,
    pub standardize: bool,
    pub seed: Option<u64>,
    pub methods: Vec<Method>,
    pub alpha: Option<f64>,
    pub power: Option<f64>,
    pub true_k: Option<usize>,
    pub train_size: Option<usize>,
    pub train_n: Option<usize>,
    pub prior: PriorOverrides,
    pub sampler: SamplerSettings,
    pub grid: GridSettings,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_args(args: &CompareArgs) -> Result<Self> {
        let base = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        let methods = match &args.methods {
            Some(m) => m.iter().map(|s| s.parse()).collect::<Result<Vec<_>>>()?,
            None => base.methods,
        };
        let (data, preset) = match (&args.data.data, &args.data.preset) {
            (None, None) => (base.data, base.preset),
            (d, p) => (d.clone(), p.clone()),
        };
        let mut cfg = RunConfig {
            data,
            preset,
            n: args.data.n.or(base.n),
            standardize: args.data.standardize || base.standardize,
            seed: args.seed.or(base.seed),
            methods,
            alpha: args.alpha.or(base.alpha),
            power: args.power.or(base.power),
            true_k: args.true_k.or(base.true_k),
            train_size: args.train_size.or(base.train_size),
            train_n: args.train_n.or(base.train_n),
            prior: common::merge_prior(base.prior, &args.prior),
            sampler: base.sampler.merged(&args.sampler),
            grid: base.grid.merged(&args.grid),
            out: args.out.clone().or(base.out),
        };
        if cfg.methods.is_empty() {
            cfg.methods = vec![Method::Crp, Method::Pcrp];
            if cfg.true_k.is_some() {
                cfg.methods.insert(1, Method::CrpOracle);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.seed.is_none() {
            bail!("a seed is required (--seed or \"seed\" in the config file)");
        }
        if self.out.is_none() {
            bail!("an output directory is required (--out or \"out\" in the config file)");
        }
        if self.data.is_some() == self.preset.is_some() {
            bail!("exactly one of data and preset must be set");
        }
        if let Some(p) = &self.data {
            if !p.exists() {
                bail!("data file {} does not exist", p.display());
            }
        }
        if self.methods.contains(&Method::CrpOracle) && self.true_k.is_none() {
            bail!("crp-oracle needs true_k");
        }
        let mut seen = self.methods.clone();
        seen.sort_by_key(|m| m.name());
        seen.dedup();
        if seen.len() != self.methods.len() {
            bail!("methods must not repeat");
        }
        Ok(())
    }

    fn data_args(&self) -> DataArgs {
        DataArgs {
            data: self.data.clone(),
            preset: self.preset.clone(),
            n: self.n,
            standardize: self.standardize,
        }
    }

    fn is_mixture_preset(&self) -> bool {
        matches!(self.preset.as_deref(), Some(p) if p != "oldfaithful")
    }
}

#[derive(Debug, Serialize)]
struct ResolvedRun<'a> {
    config: &'a RunConfig,
    n_eval: usize,
    n_train: Option<usize>,
    power: Option<f64>,
    inflection_detected: Option<bool>,
    alphas: Vec<(&'static str, f64)>,
}

fn point_estimates_csv(rows: &[(&FitRun, fit::PointRecord)]) -> String {
    let mut out = String::from("method,sample_index,log_joint,k,nmi,vi\n");
    let opt = |v: Option<f64>| v.map_or(String::new(), num);
    for (run, p) in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            run.method,
            p.sample_index,
            num(p.log_joint),
            p.k,
            opt(p.nmi),
            opt(p.vi)
        );
    }
    out
}

pub fn cmd(args: &CompareArgs) -> Result<i32> {
    let cfg = RunConfig::from_args(args)?;
    let seed = cfg.seed.expect("validated");
    let out = cfg.out.clone().expect("validated");
    let full = common::load_data(&cfg.data_args(), seed)?;

    let train_size = cfg
        .train_size
        .or((cfg.preset.as_deref() == Some("oldfaithful")).then_some(OLD_FAITHFUL_TRAIN));
    let (train, eval): (Option<Dataset>, Dataset) = match train_size {
        Some(m) => {
            let (a, b) = full.split(m, derive_seed(seed, stream::SPLIT))?;
            (Some(a), b)
        }
        None => (None, full),
    };

    let needs_tuning = cfg.methods.contains(&Method::Pcrp) && cfg.power.is_none();
    let alpha = cfg.alpha.unwrap_or(1.0);
    let mut curve = None;
    let mut n_train = None;
    if needs_tuning {
        let train = match train {
            Some(t) => t,
            None if cfg.is_mixture_preset() => {
                let name = cfg.preset.as_deref().expect("mixture preset");
                let draw: Dataset = datasets::load_preset(
                    name,
                    cfg.train_n.unwrap_or(DEFAULT_TRAIN_N),
                    derive_seed(seed, stream::TRAIN_DRAW),
                )?;
                if cfg.standardize {
                    standardize(&draw)?.0
                } else {
                    draw
                }
            }
            None => bail!("pcrp without a power needs training data: set power, train_size, or use a mixture preset"),
        };
        n_train = Some(train.len());
        let prior = common::build_prior(&train, &cfg.prior)?;
        let tune_settings = SamplerSettings {
            initial_k: cfg.grid.initial_k,
            ..cfg.sampler.clone()
        };
        let tune_cfg = tune_settings.config(derive_seed(seed, stream::TUNE))?;
        curve = Some(tune::run(&train, alpha, &prior, &tune_cfg, &cfg.grid, seed)?);
    }
    let power = cfg.power.or(curve.as_ref().map(|c| c.chosen_r));

    let prior = common::build_prior(&eval, &cfg.prior)?;
    let chain_cfg = cfg.sampler.config(derive_seed(seed, stream::CHAIN))?;
    let mut plans: Vec<(Method, ProcessParams)> = Vec::new();
    for &m in &cfg.methods {
        let params = match m {
            Method::Crp => ProcessParams::crp(alpha)?,
            Method::CrpOracle => ProcessParams::crp(oracle_alpha(cfg.true_k.expect("validated"), eval.len())?)?,
            Method::Pcrp => ProcessParams::pcrp(alpha, power.expect("tuned or given"))?,
        };
        plans.push((m, params));
    }

    let runs: Vec<FitRun> = std::thread::scope(|s| {
        let handles: Vec<_> = plans
            .iter()
            .map(|(m, params)| {
                let (eval, prior, chain_cfg) = (&eval, &prior, &chain_cfg);
                s.spawn(move || fit::run(eval, params, prior, chain_cfg, m.name()))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("method worker panicked"))
            .collect::<Result<Vec<_>>>()
    })?;

    common::ensure_dir(&out)?;
    common::write_file(&out, "data.csv", &datasets::to_csv(&eval))?;
    if let Some(c) = &curve {
        common::write_file(&out, "cv_curve.csv", &tune::curve_csv(c))?;
    }
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for run in &runs {
        run.write(&out, &format!("{}_", run.method), &eval)?;
        rows.push((run.method.clone(), run.summary.clone()));
        points.push((run, run.point_record(eval.labels.as_deref())?));
    }
    common::write_file(&out, "summary.csv", &common::summary_csv(&rows))?;
    let text = common::summary_text(&rows);
    common::write_file(&out, "summary.txt", &text)?;
    common::write_file(&out, "point_estimates.csv", &point_estimates_csv(&points))?;
    let resolved = ResolvedRun {
        config: &cfg,
        n_eval: eval.len(),
        n_train,
        power,
        inflection_detected: curve.as_ref().map(|c| c.inflection_detected),
        alphas: plans.iter().map(|(m, p)| (m.name(), p.alpha())).collect(),
    };
    common::write_file(&out, "run.json", &common::to_json(&resolved)?)?;

    if let Some(r) = power {
        println!("pcrp power r = {r}");
    }
    print!("{text}");
    Ok(0)
}
