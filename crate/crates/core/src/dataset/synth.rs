//! Baseband waveform synthesis for the eleven classes.
//!
//! Digital schemes run at 8 samples per symbol. Linear schemes use a
//! root-raised-cosine pulse (roll-off 0.35); CPFSK and GFSK integrate
//! phase. Analog schemes modulate low-pass filtered Gaussian noise standing
//! in for audio. Every clean frame is scaled to unit mean power before
//! complex white Gaussian noise of power `10^(-snr/10)` is added.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::{validate_snr, Example, IqFrame, Modulation, FRAME_LEN};
use crate::error::Result;

pub const SAMPLES_PER_SYMBOL: usize = 8;
pub const RRC_ROLLOFF: f64 = 0.35;
/// RRC filter length in symbols.
const RRC_SPAN: usize = 8;
const CPFSK_INDEX: f64 = 0.5;
const GFSK_INDEX: f64 = 1.0;
const GFSK_BT: f64 = 0.35;
const GFSK_SPAN: usize = 4;
/// Audio bandwidth of the analog source, in cycles per sample.
const AUDIO_CUTOFF: f64 = 0.03;
const AUDIO_TAPS: usize = 65;
const WBFM_DEVIATION: f64 = 0.08;
const AM_DEPTH: f64 = 0.5;
const HILBERT_TAPS: usize = 65;

/// Root-raised-cosine taps for `sps` samples per symbol over `span` symbols,
/// scaled to unit energy.
pub fn rrc_taps(rolloff: f64, sps: usize, span: usize) -> Vec<f64> {
    let n = span * sps;
    let b = rolloff;
    let mut taps: Vec<f64> = (0..=n)
        .map(|i| {
            let t = (i as f64 - n as f64 / 2.0) / sps as f64;
            if t.abs() < 1e-12 {
                1.0 - b + 4.0 * b / PI
            } else if (t.abs() - 1.0 / (4.0 * b)).abs() < 1e-9 {
                b / 2f64.sqrt()
                    * ((1.0 + 2.0 / PI) * (PI / (4.0 * b)).sin() + (1.0 - 2.0 / PI) * (PI / (4.0 * b)).cos())
            } else {
                let num = (PI * t * (1.0 - b)).sin() + 4.0 * b * t * (PI * t * (1.0 + b)).cos();
                let den = PI * t * (1.0 - (4.0 * b * t).powi(2));
                num / den
            }
        })
        .collect();
    let energy: f64 = taps.iter().map(|h| h * h).sum::<f64>().sqrt();
    taps.iter_mut().for_each(|h| *h /= energy);
    taps
}

fn gaussian_taps(bt: f64, sps: usize, span: usize) -> Vec<f64> {
    let n = span * sps;
    let sigma = (2f64.ln()).sqrt() / (2.0 * PI * bt) * sps as f64;
    let mut taps: Vec<f64> = (0..=n)
        .map(|i| {
            let t = i as f64 - n as f64 / 2.0;
            (-t * t / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|h| *h /= sum);
    taps
}

fn hamming(i: usize, n: usize) -> f64 {
    0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos()
}

fn lowpass_taps(cutoff: f64, n: usize) -> Vec<f64> {
    let mid = (n - 1) as f64 / 2.0;
    let mut taps: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 - mid;
            let sinc = if t == 0.0 {
                2.0 * cutoff
            } else {
                (2.0 * PI * cutoff * t).sin() / (PI * t)
            };
            sinc * hamming(i, n)
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|h| *h /= sum);
    taps
}

/// Odd-length FIR Hilbert transformer (group delay `(n - 1) / 2`).
fn hilbert_taps(n: usize) -> Vec<f64> {
    let mid = (n - 1) / 2;
    (0..n)
        .map(|i| {
            let k = i as i64 - mid as i64;
            if k % 2 == 0 {
                0.0
            } else {
                2.0 / (PI * k as f64) * hamming(i, n)
            }
        })
        .collect()
}

fn convolve<T>(x: &[T], h: &[f64]) -> Vec<T>
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let mut y = vec![T::default(); x.len() + h.len() - 1];
    for (i, &xi) in x.iter().enumerate() {
        for (j, &hj) in h.iter().enumerate() {
            y[i + j] = y[i + j] + xi * hj;
        }
    }
    y
}

fn constellation(m: Modulation) -> Vec<Complex64> {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    match m {
        Modulation::Bpsk => vec![c(1.0, 0.0), c(-1.0, 0.0)],
        Modulation::Qpsk => (0..4)
            .map(|k| Complex64::from_polar(1.0, PI / 4.0 + k as f64 * PI / 2.0))
            .collect(),
        Modulation::Psk8 => (0..8)
            .map(|k| Complex64::from_polar(1.0, k as f64 * PI / 4.0))
            .collect(),
        Modulation::Pam4 => [-3.0, -1.0, 1.0, 3.0].iter().map(|&a| c(a, 0.0)).collect(),
        Modulation::Qam16 | Modulation::Qam64 => {
            let side: i32 = if m == Modulation::Qam16 { 4 } else { 8 };
            let levels: Vec<f64> = (0..side).map(|k| (2 * k - side + 1) as f64).collect();
            levels
                .iter()
                .flat_map(|&re| levels.iter().map(move |&im| c(re, im)))
                .collect()
        }
        _ => panic!("{m} has no constellation"),
    }
}

/// Draws `count` uniformly random constellation points. Linear schemes only.
pub fn draw_symbols(m: Modulation, count: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    let points = constellation(m);
    (0..count)
        .map(|_| points[rng.random_range(0..points.len())])
        .collect()
}

fn linear(m: Modulation, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let taps = rrc_taps(RRC_ROLLOFF, SAMPLES_PER_SYMBOL, RRC_SPAN);
    let n_sym = FRAME_LEN / SAMPLES_PER_SYMBOL + RRC_SPAN + 2;
    let mut upsampled = vec![Complex64::default(); n_sym * SAMPLES_PER_SYMBOL];
    for (i, s) in draw_symbols(m, n_sym, rng).into_iter().enumerate() {
        upsampled[i * SAMPLES_PER_SYMBOL] = s;
    }
    let shaped = convolve(&upsampled, &taps);
    let start = taps.len() - 1 + rng.random_range(0..SAMPLES_PER_SYMBOL);
    shaped[start..start + FRAME_LEN].to_vec()
}

fn binary_frequency_pulses(rng: &mut ChaCha8Rng, n_sym: usize) -> Vec<f64> {
    (0..n_sym)
        .flat_map(|_| {
            let a = if rng.random::<bool>() { 1.0 } else { -1.0 };
            std::iter::repeat_n(a, SAMPLES_PER_SYMBOL)
        })
        .collect()
}

fn integrate_phase(freq: &[f64], index: f64, phase0: f64) -> Vec<Complex64> {
    let step = PI * index / SAMPLES_PER_SYMBOL as f64;
    let mut phase = phase0;
    freq.iter()
        .map(|f| {
            phase += step * f;
            Complex64::from_polar(1.0, phase)
        })
        .collect()
}

fn fsk(m: Modulation, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let n_sym = FRAME_LEN / SAMPLES_PER_SYMBOL + GFSK_SPAN + 2;
    let nrz = binary_frequency_pulses(rng, n_sym);
    let phase0 = rng.random_range(0.0..2.0 * PI);
    let (freq, index, skip) = if m == Modulation::Gfsk {
        let g = gaussian_taps(GFSK_BT, SAMPLES_PER_SYMBOL, GFSK_SPAN);
        let skip = g.len() - 1;
        (convolve(&nrz, &g), GFSK_INDEX, skip)
    } else {
        (nrz, CPFSK_INDEX, 0)
    };
    let s = integrate_phase(&freq, index, phase0);
    let start = skip + rng.random_range(0..SAMPLES_PER_SYMBOL);
    s[start..start + FRAME_LEN].to_vec()
}

/// Unit-RMS low-pass Gaussian noise of length `len`.
fn audio(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let taps = lowpass_taps(AUDIO_CUTOFF, AUDIO_TAPS);
    let white: Vec<f64> = (0..len + taps.len() - 1)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    let filtered = convolve(&white, &taps);
    let mut out = filtered[taps.len() - 1..taps.len() - 1 + len].to_vec();
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / len as f64).sqrt();
    if rms > 0.0 {
        out.iter_mut().for_each(|v| *v /= rms);
    }
    out
}

fn analog(m: Modulation, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    match m {
        Modulation::Wbfm => {
            let msg = audio(rng, FRAME_LEN);
            let mut phase = rng.random_range(0.0..2.0 * PI);
            msg.iter()
                .map(|v| {
                    phase += 2.0 * PI * WBFM_DEVIATION * v;
                    Complex64::from_polar(1.0, phase)
                })
                .collect()
        }
        Modulation::AmDsb => audio(rng, FRAME_LEN)
            .into_iter()
            .map(|v| Complex64::new(1.0 + AM_DEPTH * v, 0.0))
            .collect(),
        Modulation::AmSsb => {
            let h = hilbert_taps(HILBERT_TAPS);
            let delay = (HILBERT_TAPS - 1) / 2;
            let msg = audio(rng, FRAME_LEN + HILBERT_TAPS - 1);
            let quad = convolve(&msg, &h);
            (0..FRAME_LEN)
                .map(|t| Complex64::new(msg[t + delay], quad[t + HILBERT_TAPS - 1]))
                .collect()
        }
        _ => unreachable!("digital scheme routed to analog synthesis"),
    }
}

/// Noise-free baseband frame for `m`, scaled to unit mean power.
pub fn clean_frame(m: Modulation, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let mut s = if m.is_linear() {
        linear(m, rng)
    } else if matches!(m, Modulation::Cpfsk | Modulation::Gfsk) {
        fsk(m, rng)
    } else {
        analog(m, rng)
    };
    let power = s.iter().map(|z| z.norm_sqr()).sum::<f64>() / s.len() as f64;
    if power > 0.0 {
        let scale = power.sqrt().recip();
        s.iter_mut().for_each(|z| *z *= scale);
    }
    s
}

/// Clean signal and the additive noise that [`synthesize_example`] combines.
pub fn synthesize_components(
    m: Modulation,
    snr_db: i32,
    seed: u64,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    validate_snr(snr_db)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clean = clean_frame(m, &mut rng);
    let sigma = (10f64.powf(-snr_db as f64 / 10.0) / 2.0).sqrt();
    let noise = (0..FRAME_LEN)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * sigma, im * sigma)
        })
        .collect();
    Ok((clean, noise))
}

pub fn synthesize_example(m: Modulation, snr_db: i32, seed: u64) -> Result<Example> {
    let (clean, noise) = synthesize_components(m, snr_db, seed)?;
    let rx: Vec<Complex64> = clean.iter().zip(&noise).map(|(s, n)| s + n).collect();
    Ok(Example {
        frame: IqFrame::from_complex(&rx),
        modulation: m,
        snr_db,
    })
}
