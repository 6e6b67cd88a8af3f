//! End-to-end acceptance run: one PASS/FAIL line per criterion.
//!
//! Trains VT-CNN2 and the substitute MLP from scratch, so expect a run of
//! roughly half an hour on one core.

mod support;

use std::process::ExitCode;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rfadv::dataset::{generate_dataset, Dataset, Example};
use rfadv::eval::{
    accuracy, runtime_benchmark, select_crafting, sweep_pnr, sweep_psr, transfer_eval, Attack, PsrAttack,
    SweepConfig, SweepTable,
};
use rfadv::models::{build_substitute_mlp, build_vtcnn2};
use rfadv::nn::{train_epoch, Model, Optimizer, OptimizerState};

const DATA_N: usize = 100;
const DATA_SEED: u64 = 1;
const EPOCHS: usize = 10;
const ATTACK_SNR: i32 = 10;
const CRAFT_N: usize = 50;
const PNR_SUBSET: usize = 110;
const PSR_GRID: [f64; 6] = [-20.0, -18.0, -16.0, -14.0, -12.0, -10.0];
const PNR_GRID: [f64; 6] = [-10.0, -8.0, -6.0, -4.0, -2.0, 0.0];

struct Verdict {
    ok: bool,
    detail: String,
}

fn verdict(ok: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        ok,
        detail: detail.into(),
    }
}

fn report(id: usize, name: &str, started: Instant, v: &Verdict) {
    println!(
        "{} criterion {id} ({name}): {} [{:.1}s]",
        if v.ok { "PASS" } else { "FAIL" },
        v.detail,
        started.elapsed().as_secs_f64()
    );
}

fn gradients() -> Verdict {
    use support::gradcheck::{check_instance, ALL_KINDS, REL_TOL};
    let t = Instant::now();
    let mut worst = (0.0f64, None);
    for kind in ALL_KINDS {
        for i in 0..20 {
            let err = check_instance(kind, 1000 + i);
            if err > worst.0 {
                worst = (err, Some(kind));
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    verdict(
        worst.0 <= REL_TOL && secs < 60.0,
        format!("{} layer types x 20, worst rel err {:.2e} ({:?}), {secs:.1}s", ALL_KINDS.len(), worst.0, worst.1),
    )
}

fn bisection() -> Verdict {
    let t = Instant::now();
    let s = support::bisection::run();
    let secs = t.elapsed().as_secs_f64();
    verdict(
        s.passes() && secs < 60.0,
        format!(
            "{} points ({} fooled), max(oracle - grid - eps*) {:.2e}, ray rel err {:.3}, bracket {:.2e}, false fools {}, {secs:.1}s",
            s.points, s.fooled, s.worst_below_oracle, s.worst_ray_rel, s.max_bracket, s.false_fools
        ),
    )
}

fn train(mut model: Model, ds: &Dataset, seed: u64, label: &str) -> Model {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for e in ds.train() {
        xs.extend_from_slice(e.frame.as_slice());
        ys.push(e.label());
    }
    let mut state = OptimizerState::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hyper = Optimizer::adam(1e-3);
    for epoch in 1..=EPOCHS {
        let t = Instant::now();
        let loss = train_epoch(&mut model, &xs, &ys, 64, &hyper, &mut state, &mut rng).expect("training");
        eprintln!("  {label} epoch {epoch}: loss {loss:.4} ({:.0}s)", t.elapsed().as_secs_f64());
    }
    model
}

fn baseline(model: &Model, ds: &Dataset, secs: f64) -> Verdict {
    let test: Vec<&Example> = ds.test().filter(|e| e.snr_db >= 0).collect();
    let acc = accuracy(model, &test, &Attack::None).expect("accuracy").accuracy_clean;
    verdict(
        acc >= 0.27 && secs < 30.0 * 60.0,
        format!("accuracy {acc:.3} on {} SNR>=0 test frames, trained in {secs:.0}s", test.len()),
    )
}

fn pnr_property(model: &Model, test: &[&Example]) -> Verdict {
    let subset = select_crafting(test, PNR_SUBSET.min(test.len()), 4).expect("subset");
    let table = sweep_pnr(model, &subset, &PNR_GRID, 0.01).expect("pnr sweep");
    let acc: Vec<f64> = table.curve("bisection", Some(ATTACK_SNR)).iter().map(|r| r.accuracy_clean_correct).collect();
    let steps_ok = acc.windows(2).all(|w| w[1] <= w[0] + 0.02) && acc[acc.len() - 1] < acc[0];
    let last = acc[acc.len() - 1];
    let curve: Vec<String> = acc.iter().map(|a| format!("{a:.3}")).collect();
    verdict(
        last <= 0.10 && steps_ok,
        format!("clean-correct accuracy over PNR -10..0 dB: [{}] on {} frames", curve.join(", "), subset.len()),
    )
}

fn acc_at(table: &SweepTable, attack: &str, x: f64) -> f64 {
    table.get(attack, x).unwrap_or_else(|| panic!("missing row {attack} @ {x}")).accuracy_all
}

fn uap_properties(table: &SweepTable) -> Verdict {
    let clean = table.reference().expect("reference").accuracy_all;
    let mut ok = true;
    let mut parts = Vec::new();
    for &psr in &PSR_GRID {
        let uap = acc_at(table, "uap-pca", psr);
        let jam = acc_at(table, "jamming", psr);
        let fool = table.get("uap-pca", psr).unwrap().fooling_rate;
        let fool_it = table.get("uap-iterative", psr).unwrap().fooling_rate;
        let a = uap <= jam - 0.10;
        let c = fool >= fool_it - 0.05;
        ok &= a && c;
        parts.push(format!(
            "{psr}: uap {uap:.3} jam {jam:.3}{} fool {fool:.3} vs {fool_it:.3}{}",
            if a { "" } else { " (a!)" },
            if c { "" } else { " (c!)" }
        ));
    }
    let at10 = acc_at(table, "uap-pca", -10.0);
    let b = at10 <= 0.6 * clean;
    ok &= b;
    verdict(
        ok,
        format!(
            "clean {clean:.3}; uap@-10 {at10:.3} vs 0.6x clean {:.3}{}; {}",
            0.6 * clean,
            if b { "" } else { " (b!)" },
            parts.join("; ")
        ),
    )
}

fn runtime_properties(model: &Model, crafting: &[&Example], config: &SweepConfig) -> Verdict {
    let rows = runtime_benchmark(model, crafting, &PSR_GRID, 1, config).expect("benchmark");
    let pca: Vec<f64> = rows.iter().map(|r| r.seconds_pca).collect();
    let spread = pca.iter().cloned().fold(0.0, f64::max) / pca.iter().cloned().fold(f64::INFINITY, f64::min);
    let min_ratio = rows.iter().map(|r| r.ratio()).fold(f64::INFINITY, f64::min);
    let cells: Vec<String> = rows
        .iter()
        .map(|r| format!("{}: {:.2}s/{:.2}s", r.psr_db, r.seconds_pca, r.seconds_iterative))
        .collect();
    verdict(
        spread < 2.0 && min_ratio >= 10.0,
        format!("pca max/min {spread:.2}, min iterative/pca {min_ratio:.1}; {}", cells.join(", ")),
    )
}

fn transfer_properties(table: &SweepTable) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for &psr in &PSR_GRID {
        let white = acc_at(table, "uap-pca", psr);
        let black = acc_at(table, "transfer", psr);
        let white_s = acc_at(table, "uap-pca-shifted", psr);
        let black_s = acc_at(table, "transfer-shifted", psr);
        let good = (black - white).abs() <= 0.15 && (white_s - white).abs() <= 0.10 && (black_s - black).abs() <= 0.10;
        ok &= good;
        parts.push(format!(
            "{psr}: white {white:.3} black {black:.3} shifted {white_s:.3}/{black_s:.3}{}",
            if good { "" } else { " (!)" }
        ));
    }
    verdict(ok, parts.join("; "))
}

fn formats() -> Verdict {
    let dir = tempfile::tempdir().expect("tempdir");
    match support::formats::check(dir.path()) {
        Ok(()) => verdict(true, "dataset and weight files round-trip; sweeps reproduce byte-for-byte"),
        Err(e) => verdict(false, e),
    }
}

fn main() -> ExitCode {
    let mut all_ok = true;
    let mut run = |id: usize, name: &str, f: &mut dyn FnMut() -> Verdict| {
        let t = Instant::now();
        let v = f();
        report(id, name, t, &v);
        all_ok &= v.ok;
    };

    run(1, "gradient correctness", &mut gradients);
    run(2, "bisection vs oracle", &mut bisection);

    let ds = generate_dataset(DATA_N, DATA_SEED).expect("dataset");
    let t = Instant::now();
    let cnn = train(build_vtcnn2(0), &ds, 2, "vtcnn2");
    let secs = t.elapsed().as_secs_f64();
    run(3, "trained baseline", &mut || baseline(&cnn, &ds, secs));

    let test: Vec<&Example> = ds.test().filter(|e| e.snr_db == ATTACK_SNR).collect();
    let pool: Vec<&Example> = ds.train().filter(|e| e.snr_db == ATTACK_SNR).collect();
    let crafting = select_crafting(&pool, CRAFT_N, 7).expect("crafting set");
    run(4, "PNR sweep", &mut || pnr_property(&cnn, &test));

    // Two baseline epochs keep the comparison affordable; it never reaches
    // the target fooling rate at these budgets anyway.
    let config = SweepConfig {
        iterative_max_epochs: 2,
        ..SweepConfig::default()
    };
    let (psr_table, _) = sweep_psr(
        &cnn,
        &crafting,
        &test,
        &PSR_GRID,
        &[PsrAttack::UapPca, PsrAttack::UapIterative, PsrAttack::Jamming],
        &config,
    )
    .expect("psr sweep");
    run(5, "UAP vs jamming and iterative", &mut || uap_properties(&psr_table));
    run(6, "crafting runtime", &mut || runtime_properties(&cnn, &crafting, &config));

    let mlp = train(build_substitute_mlp(0), &ds, 3, "mlp");
    run(7, "transfer and shift", &mut || {
        let table = transfer_eval(&mlp, &cnn, &crafting, &test, &PSR_GRID, 11).expect("transfer");
        transfer_properties(&table)
    });

    run(8, "format stability", &mut formats);

    if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
