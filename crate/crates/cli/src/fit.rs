use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Result;
use pcrp::partition::ProcessKind;
use pcrp::rng::derive_seed;
use pcrp::sampler::{point_estimate, MeanSe, PointEstimate, SamplerConfig};
use pcrp::{
    metrics, posterior_k_distribution, run_chain, summarize, Chain, Dataset, NiwParams, ProcessParams, Summary,
};
use serde::Serialize;

use crate::args::FitArgs;
use crate::common::{self, stream};

pub struct FitRun {
    pub method: String,
    pub chain: Chain,
    pub summary: Summary,
    pub point: PointEstimate,
    pub posterior_k: BTreeMap<usize, f64>,
}

#[derive(Debug, Serialize)]
pub struct PointRecord {
    pub sample_index: usize,
    pub log_joint: f64,
    pub k: usize,
    pub nmi: Option<f64>,
    pub vi: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct FitRecord {
    pub method: String,
    pub dataset: String,
    pub process: &'static str,
    pub alpha: f64,
    pub power: Option<f64>,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub sampler: SamplerConfig,
    pub retained: usize,
    pub k: MeanSe,
    pub k_max: usize,
    /// Averaged over retained samples.
    pub nmi: Option<MeanSe>,
    pub vi: Option<MeanSe>,
    /// Metrics of the single highest-joint sample.
    pub point_estimate: PointRecord,
}

pub fn run(
    data: &Dataset,
    params: &ProcessParams,
    prior: &NiwParams,
    cfg: &SamplerConfig,
    method: &str,
) -> Result<FitRun> {
    let chain = run_chain(&data.x, params, prior, cfg)?;
    log::info!("{method}: {} iterations in {:.2} s", cfg.iterations, chain.runtime_secs);
    let summary = summarize(&chain, data.labels.as_deref())?;
    let point = point_estimate(&chain, &data.x, params, prior)?;
    let posterior_k = posterior_k_distribution(&chain)?;
    Ok(FitRun {
        method: method.to_string(),
        chain,
        summary,
        point,
        posterior_k,
    })
}

impl FitRun {
    pub fn point_record(&self, truth: Option<&[usize]>) -> Result<PointRecord> {
        let labels = &self.point.labels;
        Ok(PointRecord {
            sample_index: self.point.sample_index,
            log_joint: self.point.log_joint,
            k: labels.iter().max().map_or(0, |m| m + 1),
            nmi: truth.map(|t| metrics::nmi(labels, t)).transpose()?,
            vi: truth.map(|t| metrics::vi(labels, t)).transpose()?,
        })
    }

    pub fn record(&self, data: &Dataset, params: &ProcessParams, cfg: &SamplerConfig, seed: u64) -> Result<FitRecord> {
        let (process, power) = match params.kind() {
            ProcessKind::Crp => ("crp", None),
            ProcessKind::Pcrp => ("pcrp", Some(params.power())),
            ProcessKind::Gcrp(_) => ("gcrp", None),
        };
        Ok(FitRecord {
            method: self.method.clone(),
            dataset: data.name.clone(),
            process,
            alpha: params.alpha(),
            power,
            n: data.len(),
            d: data.dim(),
            seed,
            sampler: cfg.clone(),
            retained: self.summary.retained,
            k: self.summary.k,
            k_max: self.summary.k_max,
            nmi: self.summary.nmi,
            vi: self.summary.vi,
            point_estimate: self.point_record(data.labels.as_deref())?,
        })
    }

    /// Trace, samples, posterior K and point estimate, each prefixed by `prefix`.
    pub fn write(&self, dir: &Path, prefix: &str, data: &Dataset) -> Result<()> {
        common::write_file(dir, &format!("{prefix}trace.csv"), &common::trace_csv(&self.chain))?;
        common::write_file(dir, &format!("{prefix}samples.csv"), &common::samples_csv(&self.chain))?;
        common::write_file(
            dir,
            &format!("{prefix}posterior_k.csv"),
            &common::posterior_k_csv(&self.posterior_k),
        )?;
        common::write_file(
            dir,
            &format!("{prefix}point_estimate.csv"),
            &common::labelled_csv(data, &self.point.labels),
        )
    }
}

pub fn cmd(args: &FitArgs) -> Result<()> {
    let data = common::load_data(&args.data, args.seed)?;
    let (params, method) = common::process_params(&args.process, data.len())?;
    let prior = common::build_prior(&data, &common::prior_overrides(&args.prior))?;
    let cfg = common::SamplerSettings::from_args(&args.sampler).config(derive_seed(args.seed, stream::CHAIN))?;
    let fit = run(&data, &params, &prior, &cfg, &method)?;
    common::ensure_dir(&args.out)?;
    fit.write(&args.out, "", &data)?;
    let record = fit.record(&data, &params, &cfg, args.seed)?;
    common::write_file(&args.out, "summary.json", &common::to_json(&record)?)?;
    print!("{}", common::summary_text(&[(method, fit.summary)]));
    Ok(())
}
