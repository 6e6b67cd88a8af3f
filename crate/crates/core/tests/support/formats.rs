//! Byte-level reproducibility checks for the on-disk formats and sweep output.

use std::fs;

use rfadv::attacks::Classifier;
use rfadv::dataset::{generate_dataset, read_dataset, write_dataset, Dataset, Example, DEFAULT_SPLIT_SEED};
use rfadv::eval::{select_crafting, sweep_pnr, sweep_psr, PsrAttack, SweepConfig, SweepTable};
use rfadv::models::{build_vtcnn2, encode_weights, load_model, save_weights, ModelKind};
use rfadv::report::sweep_csv;

fn ensure(ok: bool, what: &str) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what.to_string())
    }
}

fn io<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

pub fn dataset_round_trip(dir: &std::path::Path) -> Result<(), String> {
    let ds = io(generate_dataset(2, 11))?;
    let a = dir.join("a.rmld");
    let b = dir.join("b.rmld");
    io(write_dataset(&ds, &a))?;
    let back = io(read_dataset(&a))?;
    ensure(back == ds, "decoded dataset differs from the original")?;
    io(write_dataset(&back, &b))?;
    ensure(io(fs::read(&a))? == io(fs::read(&b))?, "re-encoded dataset bytes differ")?;

    let again = dir.join("c.rmld");
    io(write_dataset(&io(generate_dataset(2, 11))?, &again))?;
    ensure(io(fs::read(&a))? == io(fs::read(&again))?, "same seed gave different dataset bytes")?;
    let other = io(generate_dataset(2, 12))?;
    ensure(other.examples() != ds.examples(), "different seeds gave identical datasets")
}

pub fn weights_round_trip(dir: &std::path::Path, frames: &[&Example]) -> Result<(), String> {
    let m = build_vtcnn2(21);
    let path = dir.join("m.advw");
    io(save_weights(&m, &path))?;
    let back = io(load_model(ModelKind::VtCnn2, &path))?;
    ensure(encode_weights(&back) == io(fs::read(&path))?, "re-encoded weight bytes differ")?;
    let xs: Vec<f32> = frames.iter().flat_map(|e| e.frame.as_slice().iter().copied()).collect();
    let a = io(m.logits_batch(&xs, frames.len()))?;
    let b = io(back.logits_batch(&xs, frames.len()))?;
    ensure(
        a.iter().map(|v| v.to_bits()).eq(b.iter().map(|v| v.to_bits())),
        "reloaded model gives different logits",
    )
}

fn sweep_once<C: Classifier>(model: &C, ds: &Dataset) -> Result<String, String> {
    let test: Vec<&Example> = ds.test().filter(|e| e.snr_db == 10).take(4).collect();
    let pool: Vec<&Example> = ds.train().filter(|e| e.snr_db == 10).collect();
    let crafting = io(select_crafting(&pool, 4, 5))?;
    let pnr = io(sweep_pnr(model, &test, &[-10.0, 0.0], 0.05))?;
    let config = SweepConfig {
        iterative_max_epochs: 1,
        ..SweepConfig::default()
    };
    let (psr, _) = io(sweep_psr(
        model,
        &crafting,
        &test,
        &[-20.0, -10.0],
        &[PsrAttack::UapPca, PsrAttack::UapIterative, PsrAttack::Jamming],
        &config,
    ))?;
    Ok(format!("{}{}", sweep_csv(&pnr), sweep_csv(&SweepTable::merge([psr]))))
}

pub fn sweep_reproducible() -> Result<(), String> {
    let run = || -> Result<String, String> {
        let ds = io(generate_dataset(2, 31))?.resplit(DEFAULT_SPLIT_SEED);
        sweep_once(&build_vtcnn2(32), &ds)
    };
    let a = run()?;
    let b = run()?;
    ensure(a.lines().count() > 4, "sweep produced too few rows")?;
    ensure(a == b, "identical seeds gave different sweep CSVs")
}

/// All format checks; `Err` names the first failure.
pub fn check(dir: &std::path::Path) -> Result<(), String> {
    dataset_round_trip(dir)?;
    let ds = io(generate_dataset(1, 41))?;
    let frames: Vec<&Example> = ds.examples().iter().take(10).collect();
    weights_round_trip(dir, &frames)?;
    sweep_reproducible()
}
