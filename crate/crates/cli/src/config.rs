//! Per-command parameters. Every field can come from a flag or from a flat
//! JSON file given with `--config`; flags win.

use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;

macro_rules! layered {
    ($(#[$m:meta])* $name:ident { $( $(#[$fm:meta])* $f:ident : $t:ty ),* $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Default, PartialEq, clap::Args, serde::Deserialize, serde::Serialize)]
        #[serde(default, deny_unknown_fields)]
        pub struct $name {
            $( $(#[$fm])* #[serde(skip_serializing_if = "Option::is_none")] pub $f: Option<$t>, )*
        }

        impl $name {
            /// Fields set here take precedence over those in `base`.
            pub fn overlay(self, base: Self) -> Self {
                $name { $( $f: self.$f.or(base.$f), )* }
            }
        }
    };
}

layered!(
    /// Synthesize a dataset file.
    GenData {
        /// Examples per (modulation, SNR) pair.
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Output .rmld path.
        #[arg(long)]
        out: PathBuf,
    }
);

layered!(
    /// Train a classifier on the training split.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// vtcnn2 or mlp.
        #[arg(long)]
        model: String,
        #[arg(long)]
        epochs: usize,
        #[arg(long)]
        lr: f64,
        #[arg(long)]
        batch_size: usize,
        /// Initialization and shuffling seed.
        #[arg(long)]
        seed: u64,
        /// Re-split the dataset with this seed instead of the stored default.
        #[arg(long)]
        split_seed: u64,
        /// Output .advw path.
        #[arg(long)]
        out: PathBuf,
        /// Training log CSV (default: OUT with `.log.csv` appended).
        #[arg(long)]
        log: PathBuf,
        /// Only test frames at or above this SNR count toward the logged accuracy.
        #[arg(long, allow_negative_numbers = true)]
        eval_min_snr: i32,
    }
);

layered!(
    /// Attack test frames and write per-example results.
    Attack {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        model: String,
        /// bisection, uap-pca, uap-iterative or jam.
        #[arg(long)]
        alg: String,
        /// Budget of the bisection attack.
        #[arg(long, allow_negative_numbers = true)]
        pnr_db: f64,
        /// Budget of the universal attacks.
        #[arg(long, allow_negative_numbers = true)]
        psr_db: f64,
        /// Restrict crafting and evaluation frames to this SNR.
        #[arg(long, allow_negative_numbers = true)]
        snr: i32,
        /// Crafting samples for universal attacks.
        #[arg(long)]
        n: usize,
        #[arg(long)]
        eps_acc: f64,
        /// Evaluate at most this many test frames (seeded choice).
        #[arg(long)]
        limit: usize,
        #[arg(long)]
        max_epochs: usize,
        #[arg(long)]
        target_fool_rate: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        split_seed: u64,
        /// Results CSV.
        #[arg(long)]
        out: PathBuf,
    }
);

layered!(
    /// Accuracy sweeps over PNR (bisection), PSR (universal attacks) or transfer.
    Sweep {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        model: String,
        /// pnr, psr or transfer.
        #[arg(long)]
        kind: String,
        /// Comma-separated dB grid.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        grid: Vec<f64>,
        /// Comma-separated SNRs (pnr sweeps run one curve per SNR).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        snr: Vec<i32>,
        /// Comma-separated universal attacks for psr sweeps.
        #[arg(long, value_delimiter = ',')]
        attacks: Vec<String>,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        eps_acc: f64,
        #[arg(long)]
        limit: usize,
        #[arg(long)]
        max_epochs: usize,
        #[arg(long)]
        target_fool_rate: f64,
        /// Substitute model for transfer sweeps.
        #[arg(long)]
        source_model: String,
        #[arg(long)]
        source_weights: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        split_seed: u64,
        /// Sweep CSV.
        #[arg(long)]
        out: PathBuf,
        /// Line plot (default: OUT with the extension replaced by `.svg`).
        #[arg(long)]
        svg: PathBuf,
    }
);

layered!(
    /// Crafting-time benchmark of the PCA and iterative universal attacks.
    Bench {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        model: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        grid: Vec<f64>,
        #[arg(long, allow_negative_numbers = true)]
        snr: i32,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        repeats: usize,
        #[arg(long)]
        eps_acc: f64,
        #[arg(long)]
        max_epochs: usize,
        #[arg(long)]
        target_fool_rate: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        split_seed: u64,
        #[arg(long)]
        out: PathBuf,
    }
);

/// Reads a flat JSON object into `T`, rejecting unknown keys.
pub fn load<T: DeserializeOwned>(path: &std::path::Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}
