use std::fs;

use anyhow::{Context, Result};
use pcrp::datasets::{self, generate};
use pcrp::rng::derive_seed;
use pcrp::MixtureSpec;

use crate::args::SimulateArgs;
use crate::common::stream;

pub fn cmd(args: &SimulateArgs) -> Result<()> {
    let seed = derive_seed(args.seed, stream::DATA);
    let data: pcrp::Dataset = match (&args.preset, &args.spec_file) {
        (Some(name), _) => datasets::load_preset(name, args.n, seed)?,
        (None, Some(path)) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let spec: MixtureSpec =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            generate(&spec, args.n, seed)
        }
        (None, None) => unreachable!("clap requires one of --preset or --spec-file"),
    };
    if let Some(dir) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    datasets::write_csv(&data, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    log::info!("wrote {} rows to {}", data.len(), args.out.display());
    Ok(())
}
