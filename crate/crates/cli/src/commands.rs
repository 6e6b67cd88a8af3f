use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rfadv::dataset::{derive_seed, encode_dataset, generate_dataset, read_dataset, Dataset, Example, Modulation};
use rfadv::eval::{
    budget_from_psr, craft_universal, evaluate, mean_power, runtime_benchmark, select_crafting, sweep_pnr,
    sweep_psr, transfer_eval, Attack as EvalAttack, PsrAttack, ShiftPolicy, SweepConfig, SweepTable,
};
use rfadv::models::{encode_weights, load_model, ModelKind};
use rfadv::nn::{train_epoch, Model, Optimizer, OptimizerState};
use rfadv::report::{attack_csv, bench_csv, sweep_csv, sweep_svg, train_log_csv, TrainLogRow};

use crate::config::{Attack, Bench, GenData, Sweep, Train};
use crate::output::Outputs;

// Sub-seeds derived from the command seed, one per random choice.
const CRAFT_STREAM: u64 = 1;
const LIMIT_STREAM: u64 = 2;
const JAM_STREAM: u64 = 3;
const SHIFT_STREAM: u64 = 4;
const SHUFFLE_STREAM: u64 = 5;

fn req<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.with_context(|| format!("missing required parameter --{flag}"))
}

fn positive(v: f64, flag: &str) -> Result<f64> {
    ensure!(v > 0.0 && v.is_finite(), "--{flag} must be positive, got {v}");
    Ok(v)
}

fn count(v: usize, flag: &str) -> Result<usize> {
    ensure!(v > 0, "--{flag} must be at least 1");
    Ok(v)
}

fn finite(v: f64, flag: &str) -> Result<f64> {
    ensure!(v.is_finite(), "--{flag} must be finite, got {v}");
    Ok(v)
}

fn fraction(v: f64, flag: &str) -> Result<f64> {
    ensure!((0.0..=1.0).contains(&v), "--{flag} must lie in [0, 1], got {v}");
    Ok(v)
}

fn snr(v: i32) -> Result<i32> {
    rfadv::dataset::validate_snr(v).context("--snr")?;
    Ok(v)
}

fn kind(s: Option<String>, default: ModelKind, flag: &str) -> Result<ModelKind> {
    match s {
        Some(s) => s.parse().with_context(|| format!("--{flag}")),
        None => Ok(default),
    }
}

fn grid(v: Option<Vec<f64>>, default: &[f64]) -> Result<Vec<f64>> {
    let g = v.unwrap_or_else(|| default.to_vec());
    ensure!(!g.is_empty(), "--grid must not be empty");
    for &x in &g {
        finite(x, "grid")?;
    }
    Ok(g)
}

fn even_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|k| lo + step * k as f64).collect()
}

fn load_data(path: &Path, split_seed: Option<u64>) -> Result<Dataset> {
    let ds = read_dataset(path).with_context(|| format!("loading dataset {}", path.display()))?;
    Ok(match split_seed {
        Some(s) => ds.resplit(s),
        None => ds,
    })
}

fn load(kind: ModelKind, path: &Path) -> Result<Model> {
    load_model(kind, path).with_context(|| format!("loading {kind} weights {}", path.display()))
}

fn at_snr<'a>(it: impl Iterator<Item = &'a Example>, snr: Option<i32>) -> Vec<&'a Example> {
    it.filter(|e| snr.is_none_or(|s| e.snr_db == s)).collect()
}

fn limited<'a>(examples: Vec<&'a Example>, limit: Option<usize>, seed: u64) -> Result<Vec<&'a Example>> {
    match limit {
        Some(l) if l < examples.len() => Ok(select_crafting(&examples, l, derive_seed(seed, LIMIT_STREAM))?),
        _ => Ok(examples),
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn report_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

pub fn gen_data(c: GenData) -> Result<()> {
    let n = count(req(c.n, "n")?, "n")?;
    let seed = c.seed.unwrap_or(0);
    let out = req(c.out, "out")?;
    let ds = generate_dataset(n, seed)?;
    let mut o = Outputs::new();
    o.add(&out, encode_dataset(ds.examples()));
    let written = o.commit()?;
    println!("examples: {}", ds.len());
    for (m, k) in Modulation::ALL.iter().zip(ds.class_histogram()) {
        println!("  {:<8} {k}", m.name());
    }
    report_written(&written);
    Ok(())
}

pub fn train(c: Train) -> Result<()> {
    let data = req(c.data, "data")?;
    let kind = kind(c.model, ModelKind::VtCnn2, "model")?;
    let epochs = count(c.epochs.unwrap_or(10), "epochs")?;
    let lr = positive(c.lr.unwrap_or(1e-3), "lr")?;
    let batch = count(c.batch_size.unwrap_or(64), "batch-size")?;
    let seed = c.seed.unwrap_or(0);
    let out = req(c.out, "out")?;
    let log_path = c.log.unwrap_or_else(|| with_suffix(&out, ".log.csv"));
    if let Some(s) = c.eval_min_snr {
        finite(s as f64, "eval-min-snr")?;
    }

    let ds = load_data(&data, c.split_seed)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for e in ds.train() {
        xs.extend_from_slice(e.frame.as_slice());
        ys.push(e.label());
    }
    ensure!(!ys.is_empty(), "training split is empty");
    let test: Vec<&Example> = ds
        .test()
        .filter(|e| c.eval_min_snr.is_none_or(|s| e.snr_db >= s))
        .collect();
    ensure!(!test.is_empty(), "no test frames for the accuracy log");

    let mut model = kind.build(seed);
    let mut state = OptimizerState::new();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, SHUFFLE_STREAM));
    let hyper = Optimizer::adam(lr);
    let mut log = Vec::with_capacity(epochs);
    println!("training {kind} on {} frames, testing on {}", ys.len(), test.len());
    for epoch in 1..=epochs {
        let t = Instant::now();
        let loss = train_epoch(&mut model, &xs, &ys, batch, &hyper, &mut state, &mut rng)
            .with_context(|| format!("training diverged in epoch {epoch}"))?;
        let acc = rfadv::eval::accuracy(&model, &test, &EvalAttack::None)?.accuracy_clean;
        println!(
            "epoch {epoch}: train_loss {loss:.4} test_accuracy {acc:.4} ({:.1}s)",
            t.elapsed().as_secs_f64()
        );
        log.push(TrainLogRow {
            epoch,
            train_loss: loss,
            test_accuracy: acc,
        });
    }
    let mut o = Outputs::new();
    o.add(&out, encode_weights(&model));
    o.add(&log_path, train_log_csv(&log));
    report_written(&o.commit()?);
    Ok(())
}

fn sweep_config(max_epochs: Option<usize>, target: Option<f64>, eps_acc: f64, seed: u64) -> Result<SweepConfig> {
    Ok(SweepConfig {
        iterative_max_epochs: count(max_epochs.unwrap_or(5), "max-epochs")?,
        iterative_target_fool_rate: fraction(target.unwrap_or(0.8), "target-fool-rate")?,
        iterative_eps_acc: eps_acc,
        jamming_seed: derive_seed(seed, JAM_STREAM),
    })
}

pub fn attack(c: Attack) -> Result<()> {
    let data = req(c.data, "data")?;
    let weights = req(c.weights, "weights")?;
    let kind = kind(c.model, ModelKind::VtCnn2, "model")?;
    let alg = req(c.alg, "alg")?;
    let seed = c.seed.unwrap_or(0);
    let eps_acc = positive(c.eps_acc.unwrap_or(0.01), "eps-acc")?;
    let snr_filter = c.snr.map(snr).transpose()?;
    let out = req(c.out, "out")?;
    let universal = match alg.as_str() {
        "bisection" => None,
        other => Some(other.parse::<PsrAttack>().context("--alg")?),
    };
    let pnr = finite(c.pnr_db.unwrap_or(0.0), "pnr-db")?;
    let psr = finite(c.psr_db.unwrap_or(-10.0), "psr-db")?;
    let n = c.n.unwrap_or(50);
    if universal.is_some() {
        ensure!(n >= 2, "--n must be at least 2 for universal attacks");
    }
    if let Some(l) = c.limit {
        count(l, "limit")?;
    }
    let config = sweep_config(c.max_epochs, c.target_fool_rate, eps_acc, seed)?;

    let ds = load_data(&data, c.split_seed)?;
    let model = load(kind, &weights)?;
    let examples = limited(at_snr(ds.test(), snr_filter), c.limit, seed)?;
    ensure!(!examples.is_empty(), "no test frames match the SNR filter");

    let (report, rows) = match universal {
        None => evaluate(&model, &examples, &EvalAttack::Bisection { pnr_db: pnr, eps_acc })?,
        Some(a) => {
            let pool = at_snr(ds.train(), snr_filter);
            let crafting = select_crafting(&pool, n, derive_seed(seed, CRAFT_STREAM))?;
            let p_max = budget_from_psr(psr, mean_power(&examples)?)?;
            let (r, spec) = craft_universal(&model, a, &crafting, p_max, &config, 0)?;
            println!("attack: {a}");
            println!("psr_db: {psr}");
            println!("p_max: {p_max}");
            println!("crafting_samples: {}", spec.sample_count);
            println!("crafting_time_seconds: {:.4}", spec.crafting_time_seconds);
            evaluate(
                &model,
                &examples,
                &EvalAttack::Universal {
                    perturbation: &r,
                    shift: ShiftPolicy::None,
                },
            )?
        }
    };
    println!("examples: {}", report.n);
    println!("accuracy_clean: {:.4}", report.accuracy_clean);
    println!("accuracy_all: {:.4}", report.accuracy_all);
    println!("accuracy_clean_correct: {:.4}", report.accuracy_clean_correct);
    println!("fooling_rate: {:.4}", report.fooling_rate);
    let mut o = Outputs::new();
    o.add(&out, attack_csv(&rows));
    report_written(&o.commit()?);
    Ok(())
}

pub fn sweep(c: Sweep) -> Result<()> {
    let data = req(c.data, "data")?;
    let weights = req(c.weights, "weights")?;
    let kind = kind(c.model, ModelKind::VtCnn2, "model")?;
    let sweep_kind = c.kind.unwrap_or_else(|| "pnr".into());
    let seed = c.seed.unwrap_or(0);
    let eps_acc = positive(c.eps_acc.unwrap_or(0.01), "eps-acc")?;
    let n = c.n.unwrap_or(50);
    let out = req(c.out, "out")?;
    let svg = c.svg.unwrap_or_else(|| out.with_extension("svg"));
    if let Some(l) = c.limit {
        count(l, "limit")?;
    }
    let config = sweep_config(c.max_epochs, c.target_fool_rate, eps_acc, seed)?;
    let (default_grid, default_snr, x_label) = match sweep_kind.as_str() {
        "pnr" => (even_grid(-10.0, 0.0, 2.0), vec![0, 10, 18], "PNR [dB]"),
        "psr" | "transfer" => (even_grid(-20.0, -10.0, 2.0), vec![10], "PSR [dB]"),
        other => bail!("--kind must be pnr, psr or transfer, got `{other}`"),
    };
    let grid = grid(c.grid, &default_grid)?;
    let snrs = c.snr.unwrap_or(default_snr);
    ensure!(!snrs.is_empty(), "--snr must list at least one SNR");
    for &s in &snrs {
        snr(s)?;
    }
    let attacks: Vec<PsrAttack> = match c.attacks {
        Some(list) => list
            .iter()
            .map(|s| s.parse::<PsrAttack>().context("--attacks"))
            .collect::<Result<_>>()?,
        None => PsrAttack::ALL.to_vec(),
    };
    ensure!(!attacks.is_empty(), "--attacks must not be empty");
    let source = if sweep_kind == "transfer" {
        let k = kind_or(c.source_model, ModelKind::SubstituteMlp)?;
        Some((k, req(c.source_weights, "source-weights")?))
    } else {
        None
    };
    if sweep_kind != "pnr" {
        ensure!(n >= 2, "--n must be at least 2 for universal attacks");
    }

    let ds = load_data(&data, c.split_seed)?;
    let model = load(kind, &weights)?;
    let source_model = source.map(|(k, p)| load(k, &p)).transpose()?;
    let mut tables = Vec::new();
    for &s in &snrs {
        let examples = limited(at_snr(ds.test(), Some(s)), c.limit, seed)?;
        ensure!(!examples.is_empty(), "no test frames at SNR {s} dB");
        let table = match sweep_kind.as_str() {
            "pnr" => sweep_pnr(&model, &examples, &grid, eps_acc)?,
            _ => {
                let pool = at_snr(ds.train(), Some(s));
                let crafting = select_crafting(&pool, n, derive_seed(seed, CRAFT_STREAM))?;
                match &source_model {
                    Some(src) => transfer_eval(src, &model, &crafting, &examples, &grid, derive_seed(seed, SHIFT_STREAM))?,
                    None => sweep_psr(&model, &crafting, &examples, &grid, &attacks, &config)?.0,
                }
            }
        };
        tables.push(table);
    }
    let table = SweepTable::merge(tables);
    for r in table.rows() {
        println!(
            "{:>7} {:<18} snr {:>4} accuracy {:.4} clean-correct {:.4} fooling {:.4}",
            r.x_db,
            r.attack,
            r.snr_db.map(|v| v.to_string()).unwrap_or_default(),
            r.accuracy_all,
            r.accuracy_clean_correct,
            r.fooling_rate
        );
    }
    let title = format!("{kind} accuracy vs {}", x_label.split(' ').next().unwrap_or(x_label));
    let mut o = Outputs::new();
    o.add(&out, sweep_csv(&table));
    o.add(&svg, sweep_svg(&table, x_label, &title));
    report_written(&o.commit()?);
    Ok(())
}

fn kind_or(s: Option<String>, default: ModelKind) -> Result<ModelKind> {
    kind(s, default, "source-model")
}

pub fn bench(c: Bench) -> Result<()> {
    let data = req(c.data, "data")?;
    let weights = req(c.weights, "weights")?;
    let kind = kind(c.model, ModelKind::VtCnn2, "model")?;
    let grid = grid(c.grid, &even_grid(-20.0, -10.0, 2.0))?;
    let snr_level = snr(c.snr.unwrap_or(10))?;
    let n = c.n.unwrap_or(50);
    ensure!(n >= 2, "--n must be at least 2");
    let repeats = count(c.repeats.unwrap_or(1), "repeats")?;
    let seed = c.seed.unwrap_or(0);
    let eps_acc = positive(c.eps_acc.unwrap_or(0.01), "eps-acc")?;
    let config = sweep_config(c.max_epochs, c.target_fool_rate, eps_acc, seed)?;
    let out = req(c.out, "out")?;

    let ds = load_data(&data, c.split_seed)?;
    let model = load(kind, &weights)?;
    let pool = at_snr(ds.train(), Some(snr_level));
    let samples = select_crafting(&pool, n, derive_seed(seed, CRAFT_STREAM))?;
    let rows = runtime_benchmark(&model, &samples, &grid, repeats, &config)?;
    for r in &rows {
        println!(
            "psr {:>6} dB: pca {:.4}s iterative {:.4}s ratio {:.1}",
            r.psr_db,
            r.seconds_pca,
            r.seconds_iterative,
            r.ratio()
        );
    }
    let mut o = Outputs::new();
    o.add(&out, bench_csv(&rows));
    report_written(&o.commit()?);
    Ok(())
}
