use anyhow::{bail, Context, Result};
use pcrp::datasets;
use pcrp::summarize_samples;

use crate::args::EvalArgs;
use crate::common;

pub fn cmd(args: &EvalArgs) -> Result<()> {
    let samples = common::read_samples(&args.samples)?;
    let truth: pcrp::Dataset =
        datasets::read_csv(&args.truth).with_context(|| format!("reading {}", args.truth.display()))?;
    let labels = truth
        .labels
        .with_context(|| format!("{} has no label column", args.truth.display()))?;
    if labels.len() != samples[0].len() {
        bail!("{} labels in truth, {} per sample", labels.len(), samples[0].len());
    }
    let summary = summarize_samples(&samples, Some(&labels))?;
    let rows = [(args.method.clone(), summary)];
    common::ensure_dir(&args.out)?;
    common::write_file(&args.out, "summary.csv", &common::summary_csv(&rows))?;
    let text = common::summary_text(&rows);
    common::write_file(&args.out, "summary.txt", &text)?;
    print!("{text}");
    Ok(())
}
