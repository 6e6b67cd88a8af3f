//! Power ratios, accuracy and fooling-rate measurement, and the experiment sweeps.

mod sweep;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attacks::{circular_shift, craft_adversarial_bisection, Classifier, Perturbation};
use crate::dataset::{measure_power, Example, FRAME_LEN, FRAME_VALUES};
use crate::error::{Error, Result};

pub use sweep::{
    craft_universal, mean_power, runtime_benchmark, select_crafting, sweep_pnr, sweep_psr, transfer_eval, BenchRow, CraftedUap, PsrAttack,
    SweepConfig, SweepRow, SweepTable, REFERENCE_ATTACK,
};

/// PSR, PNR and SNR of one operating point, in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerRatios {
    pub psr_db: f64,
    pub pnr_db: f64,
    pub snr_db: f64,
}

impl PowerRatios {
    pub fn from_psr(psr_db: f64, snr_db: f64) -> Self {
        PowerRatios {
            psr_db,
            pnr_db: psr_db + snr_db,
            snr_db,
        }
    }

    pub fn from_pnr(pnr_db: f64, snr_db: f64) -> Self {
        PowerRatios {
            psr_db: pnr_db - snr_db,
            pnr_db,
            snr_db,
        }
    }
}

/// Mean squared magnitude per time sample of a perturbation, matching [`measure_power`].
pub fn perturbation_power(values: &[f32]) -> f64 {
    values.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>() / FRAME_LEN as f64
}

fn check_power(signal_power: f64) -> Result<()> {
    if signal_power > 0.0 && signal_power.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "signal power must be positive and finite, got {signal_power}"
        )))
    }
}

/// Perturbation-to-signal ratio in dB; `-inf` for a zero perturbation.
pub fn psr_db(r: &Perturbation, signal_power: f64) -> Result<f64> {
    check_power(signal_power)?;
    let p = perturbation_power(r.values());
    Ok(if p == 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * (p / signal_power).log10()
    })
}

/// L2 budget whose perturbation power sits `psr_db` below/above `signal_power`.
pub fn budget_from_psr(psr_db: f64, signal_power: f64) -> Result<f64> {
    check_power(signal_power)?;
    if !psr_db.is_finite() {
        return Err(Error::InvalidArgument(format!("PSR must be finite, got {psr_db}")));
    }
    Ok((FRAME_LEN as f64 * signal_power * 10f64.powf(psr_db / 10.0)).sqrt())
}

/// L2 budget for a perturbation-to-noise ratio, with the noise power implied
/// by `snr_db` relative to `signal_power`.
pub fn budget_from_pnr(pnr_db: f64, snr_db: f64, signal_power: f64) -> Result<f64> {
    check_power(signal_power)?;
    if !pnr_db.is_finite() || !snr_db.is_finite() {
        return Err(Error::InvalidArgument("PNR and SNR must be finite".into()));
    }
    let noise = signal_power * 10f64.powf(-snr_db / 10.0);
    Ok((FRAME_LEN as f64 * noise * 10f64.powf(pnr_db / 10.0)).sqrt())
}

/// How a universal perturbation is aligned with each example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShiftPolicy {
    #[default]
    None,
    /// Independent uniform circular shift per example, drawn in example order.
    RandomPerExample { seed: u64 },
}

/// Perturbation source applied during evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum Attack<'a> {
    None,
    Universal {
        perturbation: &'a Perturbation,
        shift: ShiftPolicy,
    },
    /// Per-input bisection attack with a budget set per example from its PNR.
    Bisection { pnr_db: f64, eps_acc: f64 },
}

/// Aggregate accuracy under attack. Accuracies are fractions in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyReport {
    pub n: usize,
    pub n_clean_correct: usize,
    /// Accuracy without any perturbation.
    pub accuracy_clean: f64,
    /// Accuracy under attack over every example.
    pub accuracy_all: f64,
    /// Accuracy under attack over the examples classified correctly when clean (0 if none).
    pub accuracy_clean_correct: f64,
    /// Fraction whose label under attack differs from the clean prediction.
    pub fooling_rate: f64,
}

/// Per-example outcome of an evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleResult {
    pub index: usize,
    pub true_label: usize,
    pub clean_prediction: usize,
    pub adversarial_prediction: usize,
    /// Norm of the perturbation applied to this example.
    pub perturbation_norm: f64,
    /// Bisection only: the chosen target class.
    pub target_class: Option<usize>,
    /// L2 budget of the perturbation; `None` without an attack.
    pub budget: Option<f64>,
    /// Bisection only: model evaluations spent.
    pub queries: Option<usize>,
}

impl ExampleResult {
    pub fn fooled(&self) -> bool {
        self.adversarial_prediction != self.clean_prediction
    }
}

fn stack(examples: &[&Example]) -> Vec<f32> {
    let mut out = Vec::with_capacity(examples.len() * FRAME_VALUES);
    for e in examples {
        out.extend_from_slice(e.frame.as_slice());
    }
    out
}

fn summarize(results: &[ExampleResult]) -> AccuracyReport {
    let n = results.len();
    let frac = |k: usize, of: usize| if of == 0 { 0.0 } else { k as f64 / of as f64 };
    let clean_ok: Vec<&ExampleResult> = results.iter().filter(|r| r.clean_prediction == r.true_label).collect();
    let adv_ok = results.iter().filter(|r| r.adversarial_prediction == r.true_label).count();
    let adv_ok_cc = clean_ok.iter().filter(|r| r.adversarial_prediction == r.true_label).count();
    AccuracyReport {
        n,
        n_clean_correct: clean_ok.len(),
        accuracy_clean: frac(clean_ok.len(), n),
        accuracy_all: frac(adv_ok, n),
        accuracy_clean_correct: frac(adv_ok_cc, clean_ok.len()),
        fooling_rate: frac(results.iter().filter(|r| r.fooled()).count(), n),
    }
}

/// Runs `attack` over `examples` and reports per-example outcomes with their summary.
pub fn evaluate<C: Classifier + ?Sized>(
    model: &C,
    examples: &[&Example],
    attack: &Attack<'_>,
) -> Result<(AccuracyReport, Vec<ExampleResult>)> {
    if examples.is_empty() {
        return Err(Error::InvalidArgument("no examples to evaluate".into()));
    }
    let clean_batch = stack(examples);
    let clean = model.predict(&clean_batch, examples.len())?;
    let base = |i: usize, adv: usize, norm: f64| ExampleResult {
        index: i,
        true_label: examples[i].label(),
        clean_prediction: clean[i],
        adversarial_prediction: adv,
        perturbation_norm: norm,
        target_class: None,
        budget: None,
        queries: None,
    };
    let results = match attack {
        Attack::None => (0..examples.len()).map(|i| base(i, clean[i], 0.0)).collect(),
        Attack::Universal { perturbation, shift } => {
            if perturbation.len() != FRAME_VALUES {
                return Err(Error::shape("perturbation", &[FRAME_VALUES], &[perturbation.len()]));
            }
            let mut rng = match shift {
                ShiftPolicy::RandomPerExample { seed } => Some(ChaCha8Rng::seed_from_u64(*seed)),
                ShiftPolicy::None => None,
            };
            let mut batch = Vec::with_capacity(clean_batch.len());
            for e in examples {
                let r = match rng.as_mut() {
                    Some(rng) => circular_shift(perturbation, rng.random_range(0..FRAME_LEN as i64)),
                    None => (*perturbation).clone(),
                };
                batch.extend(r.apply(e.frame.as_slice()));
            }
            let adv = model.predict(&batch, examples.len())?;
            let norm = perturbation.norm();
            adv.iter()
                .enumerate()
                .map(|(i, &a)| ExampleResult {
                    budget: Some(perturbation.budget()),
                    ..base(i, a, norm)
                })
                .collect()
        }
        Attack::Bisection { pnr_db, eps_acc } => {
            let mut out = Vec::with_capacity(examples.len());
            for (i, e) in examples.iter().enumerate() {
                let x = e.frame.as_slice();
                let p_max = budget_from_pnr(*pnr_db, e.snr_db as f64, measure_power(&e.frame))?;
                let o = craft_adversarial_bisection(model, x, e.label(), *eps_acc, p_max)?;
                let adv = model.predict_one(&o.perturbation.apply(x))?;
                let mut r = base(i, adv, o.perturbation.norm());
                r.target_class = o.target_class;
                r.budget = Some(p_max);
                r.queries = Some(o.queries);
                out.push(r);
            }
            out
        }
    };
    Ok((summarize(&results), results))
}

/// Summary-only form of [`evaluate`].
pub fn accuracy<C: Classifier + ?Sized>(
    model: &C,
    examples: &[&Example],
    attack: &Attack<'_>,
) -> Result<AccuracyReport> {
    Ok(evaluate(model, examples, attack)?.0)
}
