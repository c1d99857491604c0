use std::path::PathBuf;

use avfuse_core::model::ModelConfig;
use avfuse_core::tensor::{loglog_slope, FlopClass, FlopCounter};
use avfuse_core::transformer::measure_macs;
use clap::Args;
use serde::{Deserialize, Serialize};

use super::model_config;
use crate::failure::{CliResult, Failure};

const COLUMNS: [FlopClass; 4] = [
    FlopClass::AttentionProjection,
    FlopClass::AttentionScore,
    FlopClass::AttentionMix,
    FlopClass::Mlp,
];

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FlopsArgs {
    /// Model configuration whose encoder is profiled [default: built-in].
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_config: Option<PathBuf>,
    /// Comma-separated token counts [default: 16,32,64,128].
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq_lens: Option<Vec<usize>>,
}

pub fn flops(a: &FlopsArgs) -> CliResult<()> {
    let cfg = match &a.model_config {
        Some(p) => model_config(p)?,
        None => ModelConfig::default(),
    };
    let mut lens = a.seq_lens.clone().unwrap_or_else(|| vec![16, 32, 64, 128]);
    lens.sort_unstable();
    lens.dedup();
    if lens.len() < 2 || lens[0] == 0 {
        return Err(Failure::config("--seq-lens needs at least two distinct positive lengths"));
    }
    let rows: Vec<(usize, FlopCounter)> = lens
        .iter()
        .map(|&n| Ok((n, measure_macs(&cfg.encoder, n)?)))
        .collect::<CliResult<_>>()?;

    let e = &cfg.encoder;
    eprintln!("encoder: {} layers, width {}, {} heads, mlp ratio {}", e.layers, e.dim, e.heads, e.mlp_ratio);
    print!("{:>6}", "n");
    for c in COLUMNS {
        print!(" {:>22}", c.name());
    }
    println!(" {:>14}", "total");
    for (n, f) in &rows {
        print!("{n:>6}");
        for c in COLUMNS {
            print!(" {:>22}", f.get(c));
        }
        println!(" {:>14}", f.total());
    }
    println!();
    for c in COLUMNS.iter().copied().map(Some).chain([None]) {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .map(|(n, f)| (*n as f64, c.map_or(f.total(), |c| f.get(c)) as f64))
            .collect();
        let name = c.map_or("total", FlopClass::name);
        match loglog_slope(&pts) {
            Some(k) => println!("exponent {name} {k:.4}"),
            None => println!("exponent {name} n/a"),
        }
    }
    Ok(())
}
