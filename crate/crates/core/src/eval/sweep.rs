use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::attacks::{
    craft_uap_iterative_baseline, craft_uap_pca, jamming_noise, Classifier, IterativeUapConfig, LabeledInput,
    Perturbation, UapSpec,
};
use crate::dataset::{derive_seed, measure_power, Example, FRAME_VALUES};
use crate::error::{Error, Result};
use crate::eval::{evaluate, AccuracyReport, Attack, ShiftPolicy};

/// Attack name of the unperturbed reference row.
pub const REFERENCE_ATTACK: &str = "none";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// PNR or PSR in dB; `-inf` on the reference row.
    pub x_db: f64,
    pub attack: String,
    /// Set when every evaluated example shares one SNR.
    pub snr_db: Option<i32>,
    pub accuracy_clean: f64,
    pub accuracy_all: f64,
    pub accuracy_clean_correct: f64,
    pub fooling_rate: f64,
    pub n: usize,
}

impl SweepRow {
    fn new(x_db: f64, attack: &str, snr_db: Option<i32>, r: &AccuracyReport) -> Self {
        SweepRow {
            x_db,
            attack: attack.to_string(),
            snr_db,
            accuracy_clean: r.accuracy_clean,
            accuracy_all: r.accuracy_all,
            accuracy_clean_correct: r.accuracy_clean_correct,
            fooling_rate: r.fooling_rate,
            n: r.n,
        }
    }
}

/// Rows of an accuracy sweep, kept sorted by `x_db` then attack name.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn new(mut rows: Vec<SweepRow>) -> Self {
        rows.sort_by(|a, b| {
            a.x_db
                .total_cmp(&b.x_db)
                .then_with(|| a.attack.cmp(&b.attack))
                .then_with(|| a.snr_db.cmp(&b.snr_db))
        });
        SweepTable { rows }
    }

    /// Concatenation of several tables, re-sorted.
    pub fn merge(tables: impl IntoIterator<Item = SweepTable>) -> Self {
        SweepTable::new(tables.into_iter().flat_map(|t| t.rows).collect())
    }

    pub fn rows(&self) -> &[SweepRow] {
        &self.rows
    }

    /// The first unattacked reference row.
    pub fn reference(&self) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.attack == REFERENCE_ATTACK)
    }

    /// Every unattacked reference row (one per SNR in merged tables).
    pub fn references(&self) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.attack == REFERENCE_ATTACK).collect()
    }

    /// Distinct `(attack, snr_db)` curves other than the reference, in first-seen order.
    pub fn curves(&self) -> Vec<(&str, Option<i32>)> {
        let mut out: Vec<(&str, Option<i32>)> = Vec::new();
        for r in &self.rows {
            let key = (r.attack.as_str(), r.snr_db);
            if r.attack != REFERENCE_ATTACK && !out.contains(&key) {
                out.push(key);
            }
        }
        out
    }

    /// Rows of one curve in ascending `x_db`.
    pub fn curve(&self, attack: &str, snr_db: Option<i32>) -> Vec<&SweepRow> {
        self.rows
            .iter()
            .filter(|r| r.attack == attack && r.snr_db == snr_db)
            .collect()
    }

    /// Distinct attack names other than the reference, in first-seen order.
    pub fn attacks(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if r.attack != REFERENCE_ATTACK && !out.contains(&r.attack.as_str()) {
                out.push(&r.attack);
            }
        }
        out
    }

    /// Rows of one attack in ascending `x_db`.
    pub fn series(&self, attack: &str) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.attack == attack).collect()
    }

    pub fn get(&self, attack: &str, x_db: f64) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.attack == attack && (r.x_db - x_db).abs() < 1e-9)
    }
}

fn common_snr(examples: &[&Example]) -> Option<i32> {
    let first = examples.first()?.snr_db;
    examples.iter().all(|e| e.snr_db == first).then_some(first)
}

fn check_grid(grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() || grid.iter().any(|g| !g.is_finite()) {
        return Err(Error::InvalidArgument("dB grid must be nonempty and finite".into()));
    }
    let mut g = grid.to_vec();
    g.sort_by(f64::total_cmp);
    Ok(g)
}

fn reference_row<C: Classifier + ?Sized>(model: &C, examples: &[&Example]) -> Result<SweepRow> {
    let (rep, _) = evaluate(model, examples, &Attack::None)?;
    Ok(SweepRow::new(f64::NEG_INFINITY, REFERENCE_ATTACK, common_snr(examples), &rep))
}

/// Mean received power of `examples`.
pub fn mean_power(examples: &[&Example]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::InvalidArgument("no examples to measure".into()));
    }
    Ok(examples.iter().map(|e| measure_power(&e.frame)).sum::<f64>() / examples.len() as f64)
}

fn labeled<'a>(examples: &[&'a Example]) -> Vec<LabeledInput<'a>> {
    examples.iter().map(|e| (e.frame.as_slice(), e.label())).collect()
}

fn sample_mean(examples: &[&Example]) -> Vec<f32> {
    let mut mean = vec![0.0f64; FRAME_VALUES];
    for e in examples {
        for (m, &v) in mean.iter_mut().zip(e.frame.as_slice()) {
            *m += v as f64;
        }
    }
    mean.iter().map(|m| (m / examples.len() as f64) as f32).collect()
}

/// A seeded choice of `n` crafting examples from `pool`, in pool order.
pub fn select_crafting<'a>(pool: &[&'a Example], n: usize, seed: u64) -> Result<Vec<&'a Example>> {
    if n == 0 || n > pool.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot choose {n} crafting examples from {}",
            pool.len()
        )));
    }
    let mut idx: Vec<usize> = (0..pool.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut pick = idx[..n].to_vec();
    pick.sort_unstable();
    Ok(pick.into_iter().map(|i| pool[i]).collect())
}

/// Accuracy under the per-input bisection attack across a PNR grid, plus the
/// unattacked reference row.
pub fn sweep_pnr<C: Classifier + ?Sized>(
    model: &C,
    examples: &[&Example],
    pnr_grid_db: &[f64],
    eps_acc: f64,
) -> Result<SweepTable> {
    let snr = common_snr(examples)
        .ok_or_else(|| Error::InvalidArgument("PNR sweep needs examples that share one SNR".into()))?;
    let grid = check_grid(pnr_grid_db)?;
    let mut rows = vec![reference_row(model, examples)?];
    for pnr in grid {
        let (rep, _) = evaluate(model, examples, &Attack::Bisection { pnr_db: pnr, eps_acc })?;
        log::info!("pnr {pnr:+.1} dB: accuracy {:.3} (clean-correct {:.3})", rep.accuracy_all, rep.accuracy_clean_correct);
        rows.push(SweepRow::new(pnr, "bisection", Some(snr), &rep));
    }
    Ok(SweepTable::new(rows))
}

/// Input-agnostic attacks compared across a PSR grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PsrAttack {
    UapPca,
    UapIterative,
    Jamming,
}

impl PsrAttack {
    pub const ALL: [PsrAttack; 3] = [PsrAttack::UapPca, PsrAttack::UapIterative, PsrAttack::Jamming];

    pub fn name(self) -> &'static str {
        match self {
            PsrAttack::UapPca => "uap-pca",
            PsrAttack::UapIterative => "uap-iterative",
            PsrAttack::Jamming => "jamming",
        }
    }
}

impl fmt::Display for PsrAttack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PsrAttack {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uap-pca" | "pca" => Ok(PsrAttack::UapPca),
            "uap-iterative" | "iterative" => Ok(PsrAttack::UapIterative),
            "jamming" | "jam" => Ok(PsrAttack::Jamming),
            _ => Err(Error::InvalidArgument(format!("unknown attack `{s}`"))),
        }
    }
}

/// Knobs shared by the PSR sweep, transfer evaluation and benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub iterative_max_epochs: usize,
    pub iterative_target_fool_rate: f64,
    pub iterative_eps_acc: f64,
    pub jamming_seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            iterative_max_epochs: 5,
            iterative_target_fool_rate: 0.8,
            iterative_eps_acc: 0.01,
            jamming_seed: 0,
        }
    }
}

impl SweepConfig {
    fn iterative(&self, p_max: f64) -> IterativeUapConfig {
        IterativeUapConfig {
            p_max,
            max_epochs: self.iterative_max_epochs,
            target_fool_rate: self.iterative_target_fool_rate,
            eps_acc: self.iterative_eps_acc,
        }
    }
}

/// A perturbation produced during a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct CraftedUap {
    pub attack: PsrAttack,
    pub psr_db: f64,
    pub perturbation: Perturbation,
    pub spec: UapSpec,
}

/// Crafts one universal perturbation of norm `p_max` from `crafting`.
/// `draw` selects an independent jamming draw.
pub fn craft_universal<C: Classifier + ?Sized>(
    model: &C,
    attack: PsrAttack,
    crafting: &[&Example],
    p_max: f64,
    config: &SweepConfig,
    draw: usize,
) -> Result<(Perturbation, UapSpec)> {
    let samples = labeled(crafting);
    match attack {
        PsrAttack::UapPca => craft_uap_pca(model, &samples, p_max),
        PsrAttack::UapIterative => craft_uap_iterative_baseline(model, &samples, &config.iterative(p_max)),
        PsrAttack::Jamming => {
            let start = Instant::now();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.jamming_seed, draw as u64));
            let r = jamming_noise(&sample_mean(crafting), p_max, &mut rng)?;
            let spec = UapSpec {
                sample_count: crafting.len(),
                p_max,
                crafting_time_seconds: start.elapsed().as_secs_f64(),
                source_model: None,
            };
            Ok((r, spec))
        }
    }
}

/// Universal attacks across a PSR grid: each attack is crafted once per grid
/// point on `crafting`, scaled to the mean received power of `examples`, and
/// evaluated on `examples`.
pub fn sweep_psr<C: Classifier + ?Sized>(
    model: &C,
    crafting: &[&Example],
    examples: &[&Example],
    psr_grid_db: &[f64],
    attacks: &[PsrAttack],
    config: &SweepConfig,
) -> Result<(SweepTable, Vec<CraftedUap>)> {
    let grid = check_grid(psr_grid_db)?;
    let power = mean_power(examples)?;
    let snr = common_snr(examples);
    let mut rows = vec![reference_row(model, examples)?];
    let mut crafted = Vec::new();
    for (gi, &psr) in grid.iter().enumerate() {
        let p_max = super::budget_from_psr(psr, power)?;
        for &attack in attacks {
            let (r, spec) = craft_universal(model, attack, crafting, p_max, config, gi)?;
            let (rep, _) = evaluate(
                model,
                examples,
                &Attack::Universal {
                    perturbation: &r,
                    shift: ShiftPolicy::None,
                },
            )?;
            log::info!(
                "psr {psr:+.1} dB {attack}: accuracy {:.3}, fooling {:.3}, crafted in {:.2}s",
                rep.accuracy_all,
                rep.fooling_rate,
                spec.crafting_time_seconds
            );
            rows.push(SweepRow::new(psr, attack.name(), snr, &rep));
            crafted.push(CraftedUap {
                attack,
                psr_db: psr,
                perturbation: r,
                spec,
            });
        }
    }
    Ok((SweepTable::new(rows), crafted))
}

/// Black-box transfer: a PCA perturbation crafted on `source` is evaluated on
/// `target`, next to the white-box perturbation crafted on `target` itself,
/// each both synchronized and randomly shifted per example.
///
/// Row names: `uap-pca`, `uap-pca-shifted`, `transfer`, `transfer-shifted`.
pub fn transfer_eval<S: Classifier + ?Sized, T: Classifier + ?Sized>(
    source: &S,
    target: &T,
    crafting: &[&Example],
    examples: &[&Example],
    psr_grid_db: &[f64],
    shift_seed: u64,
) -> Result<SweepTable> {
    if source.input_len() != target.input_len() {
        return Err(Error::shape("source/target input", &[target.input_len()], &[source.input_len()]));
    }
    let grid = check_grid(psr_grid_db)?;
    let power = mean_power(examples)?;
    let snr = common_snr(examples);
    let samples = labeled(crafting);
    let mut rows = vec![reference_row(target, examples)?];
    for &psr in &grid {
        let p_max = super::budget_from_psr(psr, power)?;
        let (white, _) = craft_uap_pca(target, &samples, p_max)?;
        let (black, _) = craft_uap_pca(source, &samples, p_max)?;
        for (name, r, shift) in [
            ("uap-pca", &white, ShiftPolicy::None),
            ("uap-pca-shifted", &white, ShiftPolicy::RandomPerExample { seed: shift_seed }),
            ("transfer", &black, ShiftPolicy::None),
            ("transfer-shifted", &black, ShiftPolicy::RandomPerExample { seed: shift_seed }),
        ] {
            let (rep, _) = evaluate(target, examples, &Attack::Universal { perturbation: r, shift })?;
            log::info!("psr {psr:+.1} dB {name}: accuracy {:.3}", rep.accuracy_all);
            rows.push(SweepRow::new(psr, name, snr, &rep));
        }
    }
    Ok(SweepTable::new(rows))
}

/// Median crafting times of the PCA and iterative perturbations at one PSR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRow {
    pub psr_db: f64,
    pub seconds_pca: f64,
    pub seconds_iterative: f64,
}

impl BenchRow {
    pub fn ratio(&self) -> f64 {
        self.seconds_iterative / self.seconds_pca
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Wall-clock crafting times over `n_repeats` runs per PSR. The PCA
/// perturbation is recomputed end to end at every grid point even though its
/// direction does not depend on the budget.
pub fn runtime_benchmark<C: Classifier + ?Sized>(
    model: &C,
    samples: &[&Example],
    psr_grid_db: &[f64],
    n_repeats: usize,
    config: &SweepConfig,
) -> Result<Vec<BenchRow>> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument("benchmark needs at least 2 samples".into()));
    }
    if n_repeats == 0 {
        return Err(Error::InvalidArgument("n_repeats must be at least 1".into()));
    }
    let grid = check_grid(psr_grid_db)?;
    let power = mean_power(samples)?;
    let labeled = labeled(samples);
    let mut rows = Vec::with_capacity(grid.len());
    for &psr in &grid {
        let p_max = super::budget_from_psr(psr, power)?;
        let mut pca = Vec::with_capacity(n_repeats);
        let mut iter = Vec::with_capacity(n_repeats);
        for _ in 0..n_repeats {
            let t = Instant::now();
            craft_uap_pca(model, &labeled, p_max)?;
            pca.push(t.elapsed().as_secs_f64());
            let t = Instant::now();
            craft_uap_iterative_baseline(model, &labeled, &config.iterative(p_max))?;
            iter.push(t.elapsed().as_secs_f64());
        }
        let row = BenchRow {
            psr_db: psr,
            seconds_pca: median(pca),
            seconds_iterative: median(iter),
        };
        log::info!("bench psr {psr:+.1} dB: pca {:.3}s iterative {:.3}s", row.seconds_pca, row.seconds_iterative);
        rows.push(row);
    }
    Ok(rows)
}
