use std::fmt::Write as _;

use anyhow::Result;
use pcrp::rng::derive_seed;
use pcrp::sampler::SamplerConfig;
use pcrp::tuning::{tune_power_parallel, DEFAULT_JUMP_FACTOR};
use pcrp::{CvCurve, Dataset, GridSpec, NiwParams};
use serde::{Deserialize, Serialize};

use crate::args::{GridArgs, TuneArgs};
use crate::common::{self, num, stream};

/// Exit status when the walk reaches the end of the grid without a jump.
pub const NO_INFLECTION_EXIT: i32 = 3;

/// Grid and jump settings as given on the command line or in a config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSettings {
    pub start: Option<f64>,
    pub step: Option<f64>,
    pub max: Option<f64>,
    pub jump_factor: Option<f64>,
    pub threads: Option<usize>,
    /// Start of the cross-validation chains; `None` is one cluster.
    pub initial_k: Option<usize>,
}

impl GridSettings {
    pub fn merged(self, args: &GridArgs) -> Self {
        GridSettings {
            start: args.grid_start.or(self.start),
            step: args.grid_step.or(self.step),
            max: args.grid_max.or(self.max),
            jump_factor: args.jump_factor.or(self.jump_factor),
            threads: args.threads.or(self.threads),
            initial_k: args.tune_initial_k.or(self.initial_k),
        }
    }

    /// The default grid unless any of start/step/max is set.
    pub fn grid(&self) -> Result<GridSpec> {
        if self.start.is_none() && self.step.is_none() && self.max.is_none() {
            return Ok(GridSpec::default_grid());
        }
        Ok(GridSpec::uniform(
            self.start.unwrap_or(1.01),
            self.step.unwrap_or(0.01),
            self.max.unwrap_or(3.0),
        )?)
    }

    pub fn jump_factor(&self) -> f64 {
        self.jump_factor.unwrap_or(DEFAULT_JUMP_FACTOR)
    }
}

#[derive(Debug, Serialize)]
struct TuneRecord<'a> {
    dataset: &'a str,
    n_train: usize,
    alpha: f64,
    jump_factor: f64,
    chosen_r: f64,
    chosen_index: usize,
    inflection_detected: bool,
    sampler: &'a SamplerConfig,
}

pub fn curve_csv(curve: &CvCurve) -> String {
    let mut out = String::from("r,loss,is_chosen\n");
    for (i, (r, l)) in curve.grid.iter().zip(&curve.losses).enumerate() {
        let _ = writeln!(out, "{},{},{}", num(*r), num(*l), u8::from(i == curve.chosen_index));
    }
    out
}

pub fn run(
    train: &Dataset,
    alpha: f64,
    prior: &NiwParams,
    cfg: &SamplerConfig,
    grid: &GridSettings,
    seed: u64,
) -> Result<CvCurve> {
    let threads = grid.threads.unwrap_or(1);
    let curve = tune_power_parallel(
        &train.x,
        &grid.grid()?,
        grid.jump_factor(),
        prior,
        alpha,
        cfg,
        derive_seed(seed, stream::TUNE),
        threads,
    )?;
    if curve.inflection_detected {
        log::info!("tune: chosen r = {}", curve.chosen_r);
    } else {
        log::info!("tune: no inflection detected up to r = {}", curve.chosen_r);
    }
    Ok(curve)
}

pub fn cmd(args: &TuneArgs) -> Result<i32> {
    let data = common::load_data(&args.data, args.seed)?;
    let train = match args.train_size {
        Some(m) => data.split(m, derive_seed(args.seed, stream::SPLIT))?.0,
        None => data,
    };
    let prior = common::build_prior(&train, &common::prior_overrides(&args.prior))?;
    let grid = GridSettings::default().merged(&args.grid);
    let mut settings = common::SamplerSettings::from_args(&args.sampler);
    settings.initial_k = grid.initial_k.or(settings.initial_k);
    let cfg = settings.config(derive_seed(args.seed, stream::TUNE))?;
    let alpha = args.alpha.unwrap_or(1.0);
    let curve = run(&train, alpha, &prior, &cfg, &grid, args.seed)?;
    common::ensure_dir(&args.out)?;
    common::write_file(&args.out, "cv_curve.csv", &curve_csv(&curve))?;
    let record = TuneRecord {
        dataset: &train.name,
        n_train: train.len(),
        alpha,
        jump_factor: grid.jump_factor(),
        chosen_r: curve.chosen_r,
        chosen_index: curve.chosen_index,
        inflection_detected: curve.inflection_detected,
        sampler: &cfg,
    };
    common::write_file(&args.out, "tune.json", &common::to_json(&record)?)?;
    println!("chosen_r = {}", curve.chosen_r);
    if curve.inflection_detected {
        Ok(0)
    } else {
        eprintln!(
            "no inflection detected before r = {}; chosen_r is the grid maximum",
            curve.chosen_r
        );
        Ok(NO_INFLECTION_EXIT)
    }
}
