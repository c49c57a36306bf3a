//! Synthetic speech-like corpus shared by integration tests.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serialvoc_core::trainer::Utterance;

/// Two-pole resonator coefficients for centre `fc` and bandwidth `bw`.
fn resonator(fc: f64, bw: f64, rate: f64) -> (f64, f64, f64) {
    let r = (-PI * bw / rate).exp();
    let a1 = 2.0 * r * (2.0 * PI * fc / rate).cos();
    let a2 = -r * r;
    (1.0 - r, a1, a2)
}

/// One utterance of `seconds` at `rate`: voiced syllables (glottal-like
/// pulse train through three moving formants) separated by short noise
/// bursts and pauses. Fully determined by `seed`.
pub fn speech_like(seed: u64, seconds: f64, rate: u32) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs = f64::from(rate);
    let n = (seconds * fs) as usize;
    let base_f0 = rng.random_range(95.0..210.0);
    let syllables = ((seconds * 4.0).round() as usize).max(1);
    let seg = n / syllables;
    let vowels = [(730.0, 1090.0, 2440.0), (270.0, 2290.0, 3010.0), (300.0, 870.0, 2240.0), (530.0, 1840.0, 2480.0), (570.0, 840.0, 2410.0)];
    let mut out = vec![0.0; n];
    let mut phase = 0.0;
    for s in 0..syllables {
        let (v0, v1) = (vowels[rng.random_range(0..vowels.len())], vowels[rng.random_range(0..vowels.len())]);
        let glide = rng.random_range(-0.15..0.15);
        let noise_len = rng.random_range(0.0..0.25) * seg as f64;
        let voiced_end = 0.85 * seg as f64;
        let gain = rng.random_range(0.5..1.0);
        let mut state = [[0.0f64; 2]; 3];
        let mut hp = 0.0;
        for t in 0..seg {
            let i = s * seg + t;
            let u = t as f64 / seg as f64;
            let f0 = base_f0 * (1.0 + glide * u) * (1.0 + 0.02 * (2.0 * PI * 5.0 * i as f64 / fs).sin());
            phase += f0 / fs;
            let x = if (t as f64) < noise_len {
                let w: f64 = rng.random_range(-1.0..1.0);
                let y = w - hp;
                hp = w;
                0.25 * y
            } else if (t as f64) < voiced_end {
                // Band-limited sawtooth as the source.
                let mut src = 0.0;
                let top = ((3800.0 / f0) as usize).max(1);
                for k in 1..=top {
                    src += (2.0 * PI * k as f64 * phase).sin() / k as f64;
                }
                let env = (PI * (t as f64 - noise_len) / (voiced_end - noise_len)).sin().powf(0.7);
                let formants = [lerp(v0.0, v1.0, u), lerp(v0.1, v1.1, u), lerp(v0.2, v1.2, u)];
                let mut y = 0.0;
                for (f, (fc, amp)) in formants.iter().zip([1.0, 0.5, 0.25]).enumerate() {
                    let (b0, a1, a2) = resonator(*fc, 80.0 + 40.0 * f as f64, fs);
                    let z = b0 * src + a1 * state[f][0] + a2 * state[f][1];
                    state[f][1] = state[f][0];
                    state[f][0] = z;
                    y += amp * z;
                }
                env * y
            } else {
                0.0
            };
            out[i] = gain * x;
        }
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let dither = 1e-4;
    out.iter_mut().enumerate().for_each(|(i, v)| *v = 0.5 * *v / peak.max(1e-9) + dither * ((i as f64 * 0.37).sin()));
    out
}

fn lerp(a: f64, b: f64, u: f64) -> f64 {
    a + (b - a) * u
}

/// `count` utterances of roughly one second each.
pub fn toy_corpus(count: usize, rate: u32) -> Vec<Utterance> {
    (0..count)
        .map(|i| Utterance { name: format!("toy{i:02}"), wave: speech_like(100 + i as u64, 0.9 + 0.05 * i as f64, rate) })
        .collect()
}
