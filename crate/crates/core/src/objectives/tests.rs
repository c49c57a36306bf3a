use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::autodiff::gradcheck::check_gradients;
use crate::dsp::{anti_wrap, hann_window, mel_spectrogram, phase_differential, stft, stft_complex, Axis};

fn small_cfg() -> SpectralConfig {
    SpectralConfig { sample_rate_hz: 16000, frame_len: 8, frame_shift: 2, fft_size: 14, mel_bins: 3, amp_floor: 1e-5 }
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn rand_phase(rng: &mut ChaCha8Rng, f: usize, n: usize) -> Spectrogram {
    Spectrogram::new(Domain::Phase, f, n, rand_vec(rng, f * n, -PI + 1e-9, PI)).unwrap()
}

fn principal_abs(x: f64) -> f64 {
    x.sin().atan2(x.cos()).abs()
}

#[test]
fn weight_endpoints_and_midpoint() {
    let w = fwaw_weights(513, 2.5).unwrap();
    assert_eq!(w.weights()[0], 1.0);
    assert_eq!(w.weights()[512], 2.5);
    assert!((w.weights()[256] - 2.5f64.sqrt()).abs() < 1e-12);
    assert!(w.weights().windows(2).all(|p| p[1] > p[0]));
    assert!(fwaw_weights(513, 1.0).unwrap().weights().iter().all(|&v| v == 1.0));
    assert!(fwaw_weights(10, 0.0).unwrap_err().to_string().starts_with("DomainError"));
    assert!(fwaw_weights(10, -1.0).is_err());
    let dec = fwaw_weights(6, 0.5).unwrap();
    assert!(dec.weights().windows(2).all(|p| p[1] < p[0]));
}

#[test]
fn phase_loss_zero_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = rand_phase(&mut rng, 6, 9);
    let wt = fwaw_weights(9, 2.5).unwrap();
    assert_eq!(fwaw_phase_loss(&p, &p, &wt).unwrap(), (0.0, 0.0, 0.0));

    let mut g = Graph::<f64>::new();
    let a = g.constant_vec(&[1, 6, 9], p.data().to_vec()).unwrap();
    let shifted: Vec<f64> = p.data().iter().map(|v| v + 2.0 * PI).collect();
    let b = g.constant_vec(&[1, 6, 9], shifted).unwrap();
    let (ip, gd, iaf) = fwaw_phase_terms(&mut g, b, a, wt.weights()).unwrap();
    for v in [ip, gd, iaf] {
        assert!(g.scalar(v) < 1e-9);
    }
}

#[test]
fn phase_loss_invariant_to_integer_wraps() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (f, n) = (5, 7);
    let wt = fwaw_weights(n, 2.5).unwrap();
    for _ in 0..10 {
        let ph = rand_vec(&mut rng, f * n, -PI, PI);
        let p = rand_vec(&mut rng, f * n, -PI, PI);
        let k: Vec<f64> = (0..f * n).map(|_| rng.random_range(-3..=3) as f64 * 2.0 * PI).collect();
        let eval = |a: Vec<f64>, b: Vec<f64>| {
            let mut g = Graph::<f64>::new();
            let (x, y) = (g.constant_vec(&[1, f, n], a).unwrap(), g.constant_vec(&[1, f, n], b).unwrap());
            let (i, d, t) = fwaw_phase_terms(&mut g, x, y, wt.weights()).unwrap();
            [g.scalar(i), g.scalar(d), g.scalar(t)]
        };
        let base = eval(ph.clone(), p.clone());
        let moved = eval(ph.iter().zip(&k).map(|(a, b)| a + b).collect(), p.clone());
        let moved_target = eval(ph.clone(), p.iter().zip(&k).map(|(a, b)| a - b).collect());
        for j in 0..3 {
            assert!((base[j] - moved[j]).abs() < 1e-9);
            assert!((base[j] - moved_target[j]).abs() < 1e-9);
        }
    }
}

/// Straight nested loops over frames and bins.
fn loop_reference(ph: &Spectrogram, p: &Spectrogram, rho: f64) -> (f64, f64, f64) {
    let (f, n) = (ph.frames(), ph.bins());
    let w = |j: usize| rho.powf(j as f64 / (n - 1) as f64);
    let d = |t: usize, j: usize| ph.get(t, j) - p.get(t, j);
    let (mut ip, mut gd, mut iaf) = (0.0, 0.0, 0.0);
    for t in 0..f {
        for j in 0..n {
            ip += principal_abs(d(t, j)) * w(j);
            let jj = if j + 1 < n { j } else { n - 2 };
            gd += principal_abs(d(t, jj + 1) - d(t, jj)) * w(j);
            let tt = if t + 1 < f { t } else { f - 2 };
            iaf += principal_abs(d(tt + 1, j) - d(tt, j)) * w(j);
        }
    }
    let norm = (f * n) as f64;
    (ip / norm, gd / norm, iaf / norm)
}

#[test]
fn phase_loss_matches_nested_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let wt = fwaw_weights(5, 2.0).unwrap();
    for _ in 0..20 {
        let (ph, p) = (rand_phase(&mut rng, 3, 5), rand_phase(&mut rng, 3, 5));
        let got = fwaw_phase_loss(&ph, &p, &wt).unwrap();
        let want = loop_reference(&ph, &p, 2.0);
        assert!((got.0 - want.0).abs() < 1e-10);
        assert!((got.1 - want.1).abs() < 1e-10);
        assert!((got.2 - want.2).abs() < 1e-10);
    }
}

#[test]
fn unit_rho_matches_unweighted_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let wt = fwaw_weights(9, 1.0).unwrap();
    for _ in 0..10 {
        let (ph, p) = (rand_phase(&mut rng, 6, 9), rand_phase(&mut rng, 6, 9));
        let got = fwaw_phase_loss(&ph, &p, &wt).unwrap();
        let mean_aw = |a: &[f64], b: &[f64]| -> f64 {
            a.iter().zip(b).map(|(x, y)| anti_wrap(x - y).unwrap()).sum::<f64>() / a.len() as f64
        };
        let ip = mean_aw(ph.data(), p.data());
        let gd = mean_aw(
            &phase_differential(&ph, Axis::Frequency).unwrap().data,
            &phase_differential(&p, Axis::Frequency).unwrap().data,
        );
        let iaf = mean_aw(
            &phase_differential(&ph, Axis::Time).unwrap().data,
            &phase_differential(&p, Axis::Time).unwrap().data,
        );
        assert!((got.0 - ip).abs() < 1e-10);
        assert!((got.1 - gd).abs() < 1e-10);
        assert!((got.2 - iaf).abs() < 1e-10);
    }
}

#[test]
fn phase_loss_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let wt = fwaw_weights(5, 2.0).unwrap();
    let one_frame = rand_phase(&mut rng, 1, 5);
    assert!(fwaw_phase_loss(&one_frame, &one_frame, &wt).unwrap_err().to_string().starts_with("InvalidInput"));
    let (a, b) = (rand_phase(&mut rng, 3, 5), rand_phase(&mut rng, 4, 5));
    assert!(fwaw_phase_loss(&a, &b, &wt).unwrap_err().to_string().starts_with("ShapeError"));
}

fn log_spec(data: Vec<f64>, f: usize, n: usize) -> Spectrogram {
    Spectrogram::new(Domain::LogAmplitude, f, n, data).unwrap()
}

#[test]
fn amplitude_loss_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let a = rand_vec(&mut rng, 24, -3.0, 1.0);
    let b = rand_vec(&mut rng, 24, -3.0, 1.0);
    assert_eq!(amplitude_loss(&log_spec(a.clone(), 4, 6), &log_spec(a.clone(), 4, 6)).unwrap(), 0.0);
    let plus: Vec<f64> = a.iter().map(|v| v + 1.0).collect();
    assert!((amplitude_loss(&log_spec(plus, 4, 6), &log_spec(a.clone(), 4, 6)).unwrap() - 1.0).abs() < 1e-12);
    let mut acc = 0.0;
    for i in 0..24 {
        acc += (a[i] - b[i]) * (a[i] - b[i]);
    }
    let got = amplitude_loss(&log_spec(a, 4, 6), &log_spec(b, 4, 6)).unwrap();
    assert!((got - acc / 24.0).abs() < 1e-12);
    let e = amplitude_loss(&log_spec(vec![0.0; 6], 1, 6), &log_spec(vec![0.0; 6], 2, 3)).unwrap_err();
    assert!(e.to_string().starts_with("ShapeError"));
}

#[test]
fn stft_loss_of_consistent_spectrum_vanishes() {
    let cfg = SpectralConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let wave = rand_vec(&mut rng, 4000, -0.5, 0.5);
    let (amp, phase) = stft(&wave, &cfg).unwrap();
    let la = amp.to_log(1e-300);
    let v = stft_loss(&la, &phase, &la, &phase, &cfg).unwrap();
    assert!(v < 1e-10, "{v}");
}

#[test]
fn antipodal_unit_phasors_give_four() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let p = rand_vec(&mut rng, 40, -PI, PI);
    let flipped: Vec<f64> = p.iter().map(|v| v + PI).collect();
    let mut g = Graph::<f64>::new();
    let parts = |g: &mut Graph<f64>, ph: &[f64]| {
        let re = g.constant_vec(&[1, 5, 8], ph.iter().map(|v| v.cos()).collect()).unwrap();
        let im = g.constant_vec(&[1, 5, 8], ph.iter().map(|v| v.sin()).collect()).unwrap();
        (re, im)
    };
    let (r1, i1) = parts(&mut g, &p);
    let (r2, i2) = parts(&mut g, &flipped);
    let v = complex_mse(&mut g, r2, i2, r1, i1).unwrap();
    assert!((g.scalar(v) - 4.0).abs() < 1e-12);
}

/// Direct inverse DFT, windowed overlap-add and forward DFT for the
/// frame-centred convention.
fn naive_reanalysis(re: &[f64], im: &[f64], frames: usize, cfg: &SpectralConfig) -> (Vec<f64>, Vec<f64>) {
    let (l, hop, m, n) = (cfg.frame_len, cfg.frame_shift, cfg.fft_size, cfg.n_freq());
    let w = hann_window(l);
    let span = (frames - 1) * hop + l;
    let mut buf = vec![0.0; span];
    let mut wsum = vec![0.0; span];
    for f in 0..frames {
        for j in 0..l {
            let tau = j as f64 - (l / 2) as f64;
            let mut acc = 0.0;
            for k in 0..m {
                let (kk, sign) = if k < n { (k, 1.0) } else { (m - k, -1.0) };
                let (a, mut b) = (re[f * n + kk], sign * im[f * n + kk]);
                if kk == 0 || kk == m / 2 {
                    b = 0.0;
                }
                let ang = 2.0 * PI * k as f64 * tau / m as f64;
                acc += a * ang.cos() - b * ang.sin();
            }
            buf[f * hop + j] += w[j] * acc / m as f64;
            wsum[f * hop + j] += w[j] * w[j];
        }
    }
    for (y, s) in buf.iter_mut().zip(&wsum) {
        *y = if *s > 1e-10 { *y / s } else { 0.0 };
    }
    let (mut ore, mut oim) = (vec![0.0; frames * n], vec![0.0; frames * n]);
    for f in 0..frames {
        for k in 0..n {
            for j in 0..l {
                let tau = j as f64 - (l / 2) as f64;
                let ang = -2.0 * PI * k as f64 * tau / m as f64;
                let x = w[j] * buf[f * hop + j];
                ore[f * n + k] += x * ang.cos();
                oim[f * n + k] += x * ang.sin();
            }
        }
    }
    (ore, oim)
}

#[test]
fn stft_loss_matches_loop_oracle() {
    let cfg = small_cfg();
    let n = cfg.n_freq();
    let f = 5;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..5 {
        let la_hat = rand_vec(&mut rng, f * n, -1.0, 1.0);
        let la = rand_vec(&mut rng, f * n, -1.0, 1.0);
        let ph_hat = rand_phase(&mut rng, f, n);
        let ph = rand_phase(&mut rng, f, n);
        let got = stft_loss(&log_spec(la_hat.clone(), f, n), &ph_hat, &log_spec(la.clone(), f, n), &ph, &cfg).unwrap();
        let pol = |la: &[f64], ph: &Spectrogram| -> (Vec<f64>, Vec<f64>) {
            la.iter().zip(ph.data()).map(|(a, p)| (a.exp() * p.cos(), a.exp() * p.sin())).unzip()
        };
        let (rh, ih) = pol(&la_hat, &ph_hat);
        let (r, i) = pol(&la, &ph);
        let (br, bi) = naive_reanalysis(&rh, &ih, f, &cfg);
        let mut direct = 0.0;
        let mut cons = 0.0;
        for k in 0..f * n {
            direct += (rh[k] - r[k]).powi(2) + (ih[k] - i[k]).powi(2);
            cons += (rh[k] - br[k]).powi(2) + (ih[k] - bi[k]).powi(2);
        }
        let want = (direct + cons) / (f * n) as f64;
        assert!((got - want).abs() < 1e-9 * want.max(1.0), "{got} vs {want}");
    }
}

#[test]
fn mel_loss_cases() {
    let cfg = SpectralConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let wave: Vec<f64> = (0..8000).map(|t| 0.3 * (t as f64 * 0.05).sin() + rng.random_range(-0.05..0.05)).collect();
    let mel = mel_spectrogram(&wave, &cfg).unwrap();
    assert!(mel_loss(&wave, &mel, &cfg).unwrap() < 1e-6);

    let silence = vec![0.0; 8000];
    let want = mel.data().iter().map(|x| (cfg.amp_floor.ln() - x.ln()).abs()).sum::<f64>() / mel.data().len() as f64;
    let got = mel_loss(&silence, &mel, &cfg).unwrap();
    assert!(got > 0.0 && (got - want).abs() < 1e-9, "{got} vs {want}");

    let other: Vec<f64> = (0..8000).map(|_| rng.random_range(-0.3..0.3)).collect();
    let mh = mel_spectrogram(&other, &cfg).unwrap();
    let want = mh.data().iter().zip(mel.data()).map(|(a, b)| (a.ln() - b.ln()).abs()).sum::<f64>() / mel.data().len() as f64;
    assert!((mel_loss(&other, &mel, &cfg).unwrap() - want).abs() < 1e-9);

    // One frame of slack is tolerated, more is a shape error.
    assert!(mel_loss(&other[..7920], &mel, &cfg).is_ok());
    assert!(mel_loss(&other[..7000], &mel, &cfg).unwrap_err().to_string().starts_with("ShapeError"));
}

#[test]
fn total_loss_arithmetic() {
    let lambda = LossWeights::default();
    assert_eq!(total_loss(&LossParts::default(), &lambda).unwrap().total, 0.0);
    let ones = LossParts { ip: 1.0, gd: 1.0, iaf: 1.0, amplitude: 1.0, stft: 1.0, mel: 1.0 };
    assert!((total_loss(&ones, &lambda).unwrap().total - 4.1).abs() < 1e-12);
    let zero = LossWeights { amplitude: 0.0, stft: 0.0, mel: 0.0 };
    assert_eq!(total_loss(&ones, &zero).unwrap().total, 3.0);
    let bad = LossParts { mel: f64::NAN, ..ones };
    assert!(total_loss(&bad, &lambda).unwrap_err().to_string().starts_with("NumericalError"));
}

#[test]
fn losses_are_non_negative_on_natural_targets() {
    let cfg = SpectralConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let wave = rand_vec(&mut rng, 4000, -0.5, 0.5);
    let spec = stft_complex(&wave, &cfg).unwrap();
    let (amp, phase) = (spec.amplitude(), spec.phase());
    let la = amp.to_log(cfg.amp_floor);
    let wt = fwaw_weights(cfg.n_freq(), 2.5).unwrap();
    let noisy = Spectrogram::new(
        Domain::Phase,
        phase.frames(),
        phase.bins(),
        phase.data().iter().map(|p| crate::dsp::principal_angle(p + rng.random_range(-0.5..0.5))).collect(),
    )
    .unwrap();
    let (ip, gd, iaf) = fwaw_phase_loss(&noisy, &phase, &wt).unwrap();
    assert!(ip > 0.0 && gd > 0.0 && iaf > 0.0);
    assert!(stft_loss(&la, &noisy, &la, &phase, &cfg).unwrap() > 0.0);
}

// Gradient checks away from the anti-wrap kinks.

/// Smallest distance of any anti-wrapped difference term to a kink.
fn kink_margin(d: &[f64], f: usize, n: usize) -> f64 {
    let mut m = f64::INFINITY;
    let mut visit = |x: f64| {
        let a = principal_abs(x);
        m = m.min(a).min(PI - a);
    };
    for t in 0..f {
        for j in 0..n {
            visit(d[t * n + j]);
            let jj = j.min(n - 2);
            visit(d[t * n + jj + 1] - d[t * n + jj]);
            let tt = t.min(f - 2);
            visit(d[(tt + 1) * n + j] - d[tt * n + j]);
        }
    }
    m
}

#[test]
fn phase_loss_gradients() {
    let (f, n) = (4, 8);
    let w = fwaw_weights(n, 2.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut checked = 0;
    while checked < 10 {
        let ph = rand_vec(&mut rng, f * n, -PI, PI);
        let p = rand_vec(&mut rng, f * n, -PI, PI);
        let d: Vec<f64> = ph.iter().zip(&p).map(|(a, b)| a - b).collect();
        if kink_margin(&d, f, n) < 0.05 {
            continue;
        }
        checked += 1;
        let inputs = vec![Tensor::new(&[1, f, n], ph).unwrap()];
        for term in 0..3 {
            let r = check_gradients(&inputs, 1e-4, |g, v| {
                let target = g.constant_vec(&[1, f, n], p.clone())?;
                let t = fwaw_phase_terms(g, v[0], target, w.weights())?;
                Ok([t.0, t.1, t.2][term])
            })
            .unwrap();
            assert!(r.max_rel_err < 1e-3, "term {term}: {}", r.max_rel_err);
        }
    }
}

#[test]
fn phase_loss_gradients_per_term() {
    // Separate margins per term make far more random draws usable.
    let (f, n) = (4, 8);
    let w = fwaw_weights(n, 2.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for term in 0..3 {
        let mut checked = 0;
        while checked < 20 {
            let ph = rand_vec(&mut rng, f * n, -PI, PI);
            let p = rand_vec(&mut rng, f * n, -PI, PI);
            let mut g = Graph::<f64>::new();
            let a = g.constant_vec(&[1, f, n], ph.clone()).unwrap();
            let b = g.constant_vec(&[1, f, n], p.clone()).unwrap();
            let d = g.sub(a, b).unwrap();
            let x = match term {
                0 => d,
                1 => g.diff_bins(d).unwrap(),
                _ => g.diff_frames(d).unwrap(),
            };
            let margin = g.value(x).iter().map(|&v| {
                let a = principal_abs(v);
                a.min(PI - a)
            });
            if margin.fold(f64::INFINITY, f64::min) < 0.05 {
                continue;
            }
            checked += 1;
            let inputs = vec![Tensor::new(&[1, f, n], ph).unwrap()];
            let r = check_gradients(&inputs, 1e-4, |g, v| {
                let target = g.constant_vec(&[1, f, n], p.clone())?;
                let t = fwaw_phase_terms(g, v[0], target, w.weights())?;
                Ok([t.0, t.1, t.2][term])
            })
            .unwrap();
            assert!(r.max_rel_err < 1e-3, "term {term}: {}", r.max_rel_err);
        }
    }
}

#[test]
fn spectral_loss_gradients() {
    let cfg = small_cfg();
    let (f, n) = (4, cfg.n_freq());
    let obj = Objective::<f64>::new(&cfg, 2.5, PhaseLossKind::Fwaw, LossWeights::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..10 {
        let inputs = vec![
            Tensor::new(&[1, f, n], rand_vec(&mut rng, f * n, -1.0, 1.0)).unwrap(),
            Tensor::new(&[1, f, n], rand_vec(&mut rng, f * n, -PI, PI)).unwrap(),
        ];
        let target_la = rand_vec(&mut rng, f * n, -1.0, 1.0);
        let target_p = rand_vec(&mut rng, f * n, -PI, PI);
        let polar = |g: &mut Graph<f64>, la: Var, ph: Var| -> Result<(Var, Var)> {
            let a = g.exp(la);
            let (c, s) = (g.cos(ph), g.sin(ph));
            Ok((g.mul(a, c)?, g.mul(a, s)?))
        };
        let amp = check_gradients(&inputs, 1e-4, |g, v| {
            let t = g.constant_vec(&[1, f, n], target_la.clone())?;
            amplitude_term(g, v[0], t)
        })
        .unwrap();
        assert!(amp.max_rel_err < 1e-3, "amplitude {}", amp.max_rel_err);
        let spec = check_gradients(&inputs, 1e-4, |g, v| {
            let (rh, ih) = polar(g, v[0], v[1])?;
            let tl = g.constant_vec(&[1, f, n], target_la.clone())?;
            let tp = g.constant_vec(&[1, f, n], target_p.clone())?;
            let (r, i) = polar(g, tl, tp)?;
            let direct = complex_mse(g, rh, ih, r, i)?;
            let back = obj.reanalyze(g, rh, ih)?;
            let cons = complex_mse(g, rh, ih, back.re, back.im)?;
            g.add(direct, cons)
        })
        .unwrap();
        assert!(spec.max_rel_err < 1e-3, "stft {}", spec.max_rel_err);
        let target_mel = rand_vec(&mut rng, f * cfg.mel_bins, -4.0, -3.0);
        let mel = check_gradients(&inputs, 1e-4, |g, v| {
            let (rh, ih) = polar(g, v[0], v[1])?;
            let back = obj.reanalyze(g, rh, ih)?;
            let lm = obj.log_mel_of(g, back.re, back.im)?;
            let t = g.constant_vec(&[1, f, cfg.mel_bins], target_mel.clone())?;
            obj.mel_term(g, lm, t)
        })
        .unwrap();
        assert!(mel.max_rel_err < 1e-3, "mel {}", mel.max_rel_err);
    }
}

#[test]
fn wave_mel_loss_gradients() {
    let cfg = small_cfg();
    let obj = Objective::<f64>::new(&cfg, 2.5, PhaseLossKind::Fwaw, LossWeights::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..10 {
        let len = 6;
        let frames = len / cfg.frame_shift + 1;
        let inputs = vec![Tensor::new(&[1, len], rand_vec(&mut rng, len, -1.0, 1.0)).unwrap()];
        let target = rand_vec(&mut rng, frames * cfg.mel_bins, -6.0, -5.0);
        let r = check_gradients(&inputs, 1e-4, |g, v| {
            let t = g.constant_vec(&[1, frames, cfg.mel_bins], target.clone())?;
            obj.mel_term_from_wave(g, v[0], t)
        })
        .unwrap();
        assert!(r.max_rel_err < 1e-3, "{}", r.max_rel_err);
    }
}
