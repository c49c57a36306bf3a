//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! `cargo test -p serialvoc-core --test acceptance` runs everything; pass
//! criterion numbers (`-- 1 4 9`) to run a subset. The process exits 0
//! regardless of outcome unless `ACCEPTANCE_STRICT=1` is set.

mod common;

use std::f64::consts::PI;
use std::panic::{self, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serialvoc_core::autodiff::gradcheck::check_gradients;
use serialvoc_core::autodiff::{Graph, Tensor, Var};
use serialvoc_core::dsp::{
    anti_wrap, istft, mel_filterbank, mel_spectrogram, stft, Domain, Fourier, Matrix, Spectrogram, SpectralConfig,
};
use serialvoc_core::metrics::{cepstral_distance, extract_f0, f0_metrics, mcd, mel_cepstra, snr, PitchTrack};
use serialvoc_core::model::{
    count_flops, count_macs, param_count, Activation, Bound, ForwardOptions, ModelConfig, ModelParams, Network,
    PriorKind, Vocoder,
};
use serialvoc_core::objectives::{
    amplitude_term, complex_mse, fwaw_phase_loss, fwaw_phase_terms, fwaw_weights, LossWeights, Objective, PhaseLossKind,
};
use serialvoc_core::trainer::{epoch_steps, log_line, window_mean, Checkpoint, Dataset, TrainConfig, Trainer};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

type Check = fn() -> Verdict;

const CRITERIA: [(usize, &str, Duration, Check); 11] = [
    (1, "anti-wrap suite", Duration::from_secs(1), anti_wrap_suite),
    (2, "stft/istft round trip", Duration::from_secs(30), stft_round_trip),
    (3, "pseudo-inverse Penrose conditions", Duration::from_secs(5), penrose),
    (4, "gradient checks", Duration::from_secs(120), gradient_checks),
    (5, "fwaw reduction at rho=1", Duration::from_secs(60), fwaw_reduction),
    (6, "nested-loop phase loss oracle", Duration::from_secs(60), brute_force_oracle),
    (7, "toy overfit", Duration::from_secs(2 * 3600), toy_overfit),
    (8, "complexity accounting", Duration::from_secs(60), complexity),
    (9, "metrics suite", Duration::from_secs(30), metrics_suite),
    (10, "determinism", Duration::from_secs(600), determinism),
    (11, "ablation smoke", Duration::from_secs(1800), ablation_smoke),
];

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (id, name, budget, check) in CRITERIA {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let v = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|e| {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                verdict(false, format!("panicked: {msg}"))
            });
        let took = start.elapsed();
        let in_time = took <= budget;
        let pass = v.pass && in_time;
        failed += usize::from(!pass);
        let timing = format!("{:.2} s of {} s{}", took.as_secs_f64(), budget.as_secs(), if in_time { "" } else { " EXCEEDED" });
        println!("{} {:>2} {name}: {} [{timing}]", if pass { "PASS" } else { "FAIL" }, id, v.detail);
    }
    println!("acceptance: {}/{ran} criteria passed", ran - failed);
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// `|x|` reduced to `[0, π]` via the two-argument arctangent.
fn principal_abs(x: f64) -> f64 {
    x.sin().atan2(x.cos()).abs()
}

fn anti_wrap_suite() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut period, mut even, mut range_ok) = (0.0f64, 0.0f64, true);
    for _ in 0..1000 {
        let x = rng.random_range(-60.0..60.0);
        let base = anti_wrap(x).unwrap();
        range_ok &= (0.0..=PI).contains(&base);
        even = even.max((anti_wrap(-x).unwrap() - base).abs());
        for k in -10..=10 {
            period = period.max((anti_wrap(x + 2.0 * PI * f64::from(k)).unwrap() - base).abs());
        }
    }
    let points = [(0.0, 0.0), (2.0 * PI, 0.0), (3.0 * PI, PI), (PI + 0.1, PI - 0.1)];
    let point_err = points.iter().map(|&(x, y)| (anti_wrap(x).unwrap() - y).abs()).fold(0.0, f64::max);
    let rejects = anti_wrap(f64::NAN).is_err() && anti_wrap(f64::INFINITY).is_err();
    let tol = 1e-12;
    verdict(
        period <= tol && even <= tol && range_ok && point_err <= tol && rejects,
        format!("periodicity {period:.1e}, evenness {even:.1e}, points {point_err:.1e} (tol {tol:.0e}), range ok {range_ok}"),
    )
}

fn stft_round_trip() -> Verdict {
    let cfg = SpectralConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = f64::INFINITY;
    for _ in 0..100 {
        let x = rand_vec(&mut rng, 16000, -1.0, 1.0);
        let (amp, phase) = stft(&x, &cfg).unwrap();
        let y = istft(&amp, &phase, &cfg).unwrap();
        let signal: f64 = x.iter().map(|v| v * v).sum();
        let noise: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
        worst = worst.min(10.0 * (signal / noise).log10());
    }
    verdict(worst > 60.0, format!("min SNR {worst:.2} dB over 100 signals (need > 60)"))
}

fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.cols, b.rows);
    let mut out = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a.get(i, k);
            for j in 0..b.cols {
                out.data[i * b.cols + j] += aik * b.get(k, j);
            }
        }
    }
    out
}

fn rel_diff(a: &Matrix, b: &Matrix) -> f64 {
    let num: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.data.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn penrose() -> Verdict {
    let filt = mel_filterbank(&SpectralConfig::default()).unwrap();
    let (m, p) = (&filt.forward, &filt.pseudo_inverse);
    let shapes = (m.rows, m.cols, p.rows, p.cols) == (513, 80, 80, 513);
    let mp = matmul(m, p);
    let pm = matmul(p, m);
    let c1 = rel_diff(&matmul(&mp, m), m);
    let c2 = rel_diff(&matmul(&pm, p), p);
    let c3 = rel_diff(&mp.transpose(), &mp);
    let c4 = rel_diff(&pm.transpose(), &pm);
    let tol = 1e-6;
    verdict(
        shapes && c1 < tol && c2 < tol && c3 < tol && c4 < tol,
        format!("MM+M {c1:.1e}, M+MM+ {c2:.1e}, symmetry {c3:.1e}/{c4:.1e} (tol {tol:.0e}), shapes ok {shapes}"),
    )
}

fn tiny_spectral() -> SpectralConfig {
    SpectralConfig { sample_rate_hz: 16000, frame_len: 8, frame_shift: 2, fft_size: 14, mel_bins: 3, amp_floor: 1e-5 }
}

fn tiny_model() -> ModelConfig {
    ModelConfig { spectral: tiny_spectral(), channels: 4, expansion: 2, kernel: 3, amp_blocks: 1, phase_blocks: 1, ..ModelConfig::default() }
}

/// Distance of the anti-wrapped terms of `d` (identity, bin and frame
/// differences with edge replication) from the kinks at 0 and π.
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

fn weighted_sum(g: &mut Graph<f64>, x: Var, w: &[f64]) -> serialvoc_core::Result<Var> {
    let c = g.constant_vec(&g.shape(x).to_vec(), w.to_vec())?;
    let p = g.mul(x, c)?;
    Ok(g.sum(p))
}

fn gradient_checks() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let spectral = tiny_spectral();
    let (f, n, k, c) = (4, spectral.n_freq(), spectral.mel_bins, 4);
    assert!(n <= 8);
    let h = 1e-4;
    let mut worst: Vec<(String, f64)> = Vec::new();
    let mut record = |name: &str, err: f64| {
        match worst.iter_mut().find(|(nm, _)| nm == name) {
            Some(e) => e.1 = e.1.max(err),
            None => worst.push((name.to_string(), err)),
        }
    };
    let t = |shape: &[usize], v: Vec<f64>| Tensor::new(shape, v).unwrap();

    // Losses.
    let w = fwaw_weights(n, 2.5).unwrap();
    let obj = Objective::<f64>::new(&spectral, 2.5, PhaseLossKind::Fwaw, LossWeights::default()).unwrap();
    let mut phase_trials = 0;
    while phase_trials < 5 {
        let ph = rand_vec(&mut rng, f * n, -PI, PI);
        let p = rand_vec(&mut rng, f * n, -PI, PI);
        let d: Vec<f64> = ph.iter().zip(&p).map(|(a, b)| a - b).collect();
        if kink_margin(&d, f, n) < 0.02 {
            continue;
        }
        phase_trials += 1;
        for (term, name) in ["loss ip", "loss gd", "loss iaf"].iter().enumerate() {
            let r = check_gradients(&[t(&[1, f, n], ph.clone())], h, |g, v| {
                let target = g.constant_vec(&[1, f, n], p.clone())?;
                let terms = fwaw_phase_terms(g, v[0], target, w.weights())?;
                Ok([terms.0, terms.1, terms.2][term])
            })
            .unwrap();
            record(name, r.max_rel_err);
        }
    }
    for _ in 0..5 {
        let inputs = [t(&[1, f, n], rand_vec(&mut rng, f * n, -1.0, 1.0)), t(&[1, f, n], rand_vec(&mut rng, f * n, -PI, PI))];
        let tl = rand_vec(&mut rng, f * n, -1.0, 1.0);
        let tp = rand_vec(&mut rng, f * n, -PI, PI);
        let tm = rand_vec(&mut rng, f * k, -4.0, -3.0);
        let polar = |g: &mut Graph<f64>, la: Var, ph: Var| -> serialvoc_core::Result<(Var, Var)> {
            let a = g.exp(la);
            let (cs, sn) = (g.cos(ph), g.sin(ph));
            Ok((g.mul(a, cs)?, g.mul(a, sn)?))
        };
        let r = check_gradients(&inputs, h, |g, v| {
            let target = g.constant_vec(&[1, f, n], tl.clone())?;
            amplitude_term(g, v[0], target)
        })
        .unwrap();
        record("loss amplitude", r.max_rel_err);
        let r = check_gradients(&inputs, h, |g, v| {
            let (rh, ih) = polar(g, v[0], v[1])?;
            let (a, b) = (g.constant_vec(&[1, f, n], tl.clone())?, g.constant_vec(&[1, f, n], tp.clone())?);
            let (re, im) = polar(g, a, b)?;
            let direct = complex_mse(g, rh, ih, re, im)?;
            let back = obj.reanalyze(g, rh, ih)?;
            let consistency = complex_mse(g, rh, ih, back.re, back.im)?;
            g.add(direct, consistency)
        })
        .unwrap();
        record("loss stft", r.max_rel_err);
        let r = check_gradients(&inputs, h, |g, v| {
            let (rh, ih) = polar(g, v[0], v[1])?;
            let back = obj.reanalyze(g, rh, ih)?;
            let lm = obj.log_mel_of(g, back.re, back.im)?;
            let target = g.constant_vec(&[1, f, k], tm.clone())?;
            obj.mel_term(g, lm, target)
        })
        .unwrap();
        record("loss mel", r.max_rel_err);
    }

    // Operators.
    let fourier = Arc::new(Fourier::<f64>::new(&spectral));
    let inv = Arc::new(fourier.window_sums(f).1);
    for _ in 0..5 {
        let x = t(&[1, f, c], rand_vec(&mut rng, f * c, -1.0, 1.0));
        let wout = rand_vec(&mut rng, f * c * 2, -1.0, 1.0);
        let ops: [(&str, Vec<Tensor<f64>>); 10] = [
            ("op linear", vec![x.clone(), t(&[c, 2 * c], rand_vec(&mut rng, 2 * c * c, -1.0, 1.0)), t(&[2 * c], rand_vec(&mut rng, 2 * c, -1.0, 1.0))]),
            ("op depthwise_conv", vec![x.clone(), t(&[c, 3], rand_vec(&mut rng, 3 * c, -1.0, 1.0)), t(&[c], rand_vec(&mut rng, c, -1.0, 1.0))]),
            ("op layer_norm", vec![x.clone(), t(&[c], rand_vec(&mut rng, c, 0.5, 1.5)), t(&[c], rand_vec(&mut rng, c, -1.0, 1.0))]),
            ("op snake", vec![x.clone(), t(&[c], rand_vec(&mut rng, c, 0.3, 2.0))]),
            ("op gelu", vec![x.clone()]),
            ("op grn", vec![x.clone(), t(&[c], rand_vec(&mut rng, c, -1.0, 1.0)), t(&[c], rand_vec(&mut rng, c, -1.0, 1.0))]),
            ("op atan2", vec![t(&[1, f, c], rand_vec(&mut rng, f * c, 0.3, 1.0)), t(&[1, f, c], rand_vec(&mut rng, f * c, -1.0, -0.3))]),
            ("op magnitude", vec![t(&[1, f, c], rand_vec(&mut rng, f * c, 0.2, 1.0)), t(&[1, f, c], rand_vec(&mut rng, f * c, -1.0, 1.0))]),
            ("op synthesize", vec![t(&[1, f, n], rand_vec(&mut rng, f * n, -1.0, 1.0)), t(&[1, f, n], rand_vec(&mut rng, f * n, -1.0, 1.0))]),
            ("op analyze", vec![t(&[1, fourier.span(f)], rand_vec(&mut rng, fourier.span(f), -1.0, 1.0))]),
        ];
        for (name, inputs) in ops {
            let r = check_gradients(&inputs, h, |g, v| {
                let y = match name {
                    "op linear" => g.linear(v[0], v[1], Some(v[2]))?,
                    "op depthwise_conv" => g.depthwise_conv(v[0], v[1], Some(v[2]))?,
                    "op layer_norm" => g.layer_norm(v[0], v[1], v[2])?,
                    "op snake" => g.snake(v[0], v[1])?,
                    "op gelu" => g.gelu(v[0]),
                    "op grn" => g.grn(v[0], v[1], v[2])?,
                    "op atan2" => g.atan2(v[0], v[1])?,
                    "op magnitude" => g.magnitude(v[0], v[1])?,
                    "op synthesize" => g.synthesize(v[0], v[1], &fourier, &inv)?,
                    _ => {
                        let s = g.analyze(v[0], &fourier)?;
                        let sq = g.square(s);
                        return Ok(g.sum(sq));
                    }
                };
                let len: usize = g.shape(y).iter().product();
                weighted_sum(g, y, &wout[..len.min(wout.len())].iter().cycle().take(len).copied().collect::<Vec<_>>())
            })
            .unwrap();
            record(name, r.max_rel_err);
        }
    }

    // Whole network, per variant.
    for (name, cfg) in [
        ("model snake/pseudo-inverse", tiny_model()),
        ("model gelu/learnable prior", ModelConfig { activation: Activation::Gelu, prior: PriorKind::LearnableLinear, ..tiny_model() }),
        ("model phase sees prior", ModelConfig { phase_sees_prior: true, ..tiny_model() }),
    ] {
        let params = ModelParams::<f64>::init(&cfg, 11).unwrap();
        // Random non-trivial norms and activations so every path matters.
        let mut inputs: Vec<Tensor<f64>> = params
            .iter()
            .map(|(nm, p)| {
                let lo_hi = if nm.ends_with(".g") || nm.ends_with("act.a") { (0.5, 1.5) } else { (-0.5, 0.5) };
                t(p.shape(), rand_vec(&mut rng, p.numel(), lo_hi.0, lo_hi.1))
            })
            .collect();
        inputs.push(t(&[1, f, k], rand_vec(&mut rng, f * k, 0.2, 1.0)));
        let names = params.names().to_vec();
        let net = Network::<f64>::new(&cfg).unwrap();
        let ow = rand_vec(&mut rng, 3 * f * n, 0.5, 1.5);
        let r = check_gradients(&inputs, h, |g, vars| {
            let (pv, mel) = vars.split_at(vars.len() - 1);
            let bound = Bound::from_vars(&names, pv);
            let out = net.forward(g, &bound, mel[0], &ForwardOptions::default())?;
            let a = weighted_sum(g, out.log_amp, &ow[..f * n])?;
            let b = weighted_sum(g, out.re, &ow[f * n..2 * f * n])?;
            let cc = weighted_sum(g, out.im, &ow[2 * f * n..])?;
            let ab = g.add(a, b)?;
            g.add(ab, cc)
        })
        .unwrap();
        record(name, r.max_rel_err);
    }

    let tol = 1e-3;
    let bad: Vec<String> = worst.iter().filter(|(_, e)| !(*e < tol)).map(|(nm, e)| format!("{nm}={e:.1e}")).collect();
    let max = worst.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    verdict(
        bad.is_empty(),
        format!("{} checks, max rel err {max:.1e} (tol {tol:.0e}){}", worst.len(), if bad.is_empty() { String::new() } else { format!("; failing {}", bad.join(", ")) }),
    )
}

fn rand_phase(rng: &mut ChaCha8Rng, f: usize, n: usize) -> Spectrogram {
    Spectrogram::new(Domain::Phase, f, n, rand_vec(rng, f * n, -PI + 1e-12, PI)).unwrap()
}

/// Unweighted phase losses with no shared code: wrapped differences by
/// explicit modular reduction.
fn unweighted_reference(ph: &Spectrogram, p: &Spectrogram) -> (f64, f64, f64) {
    let (f, n) = (ph.frames(), ph.bins());
    let wrap = |x: f64| {
        let r = x.rem_euclid(2.0 * PI);
        if r > PI { 2.0 * PI - r } else { r }
    };
    let d = |t: usize, j: usize| ph.get(t, j) - p.get(t, j);
    let (mut ip, mut gd, mut iaf) = (0.0, 0.0, 0.0);
    for t in 0..f {
        for j in 0..n {
            ip += wrap(d(t, j));
            let jj = if j == n - 1 { n - 2 } else { j };
            gd += wrap(d(t, jj + 1) - d(t, jj));
            let tt = if t == f - 1 { f - 2 } else { t };
            iaf += wrap(d(tt + 1, j) - d(tt, j));
        }
    }
    let s = (f * n) as f64;
    (ip / s, gd / s, iaf / s)
}

fn fwaw_reduction() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let unit = fwaw_weights(17, 1.0).unwrap();
    let mut err = 0.0f64;
    for _ in 0..50 {
        let (ph, p) = (rand_phase(&mut rng, 6, 17), rand_phase(&mut rng, 6, 17));
        let got = fwaw_phase_loss(&ph, &p, &unit).unwrap();
        let want = unweighted_reference(&ph, &p);
        err = err.max((got.0 - want.0).abs()).max((got.1 - want.1).abs()).max((got.2 - want.2).abs());
    }
    let w = fwaw_weights(513, 2.5).unwrap();
    let ends = (w.weights()[0], w.weights()[512]);
    let exact = ends == (1.0, 2.5);
    verdict(err < 1e-10 && exact, format!("max |rho=1 - unweighted| {err:.1e} (tol 1e-10), endpoints {ends:?}"))
}

fn brute_force_oracle() -> Verdict {
    let (f, n, rho) = (3, 5, 2.5);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let wt = fwaw_weights(n, rho).unwrap();
    let mut err = 0.0f64;
    for _ in 0..100 {
        let (ph, p) = (rand_phase(&mut rng, f, n), rand_phase(&mut rng, f, n));
        let got = fwaw_phase_loss(&ph, &p, &wt).unwrap();
        let mut want = [0.0; 3];
        for t in 0..f {
            for j in 0..n {
                let wj = rho.powf(j as f64 / (n - 1) as f64);
                let d = |t: usize, j: usize| ph.get(t, j) - p.get(t, j);
                let jj = j.min(n - 2);
                let tt = t.min(f - 2);
                want[0] += principal_abs(d(t, j)) * wj;
                want[1] += principal_abs(d(t, jj + 1) - d(t, jj)) * wj;
                want[2] += principal_abs(d(tt + 1, j) - d(tt, j)) * wj;
            }
        }
        let s = (f * n) as f64;
        err = err.max((got.0 - want[0] / s).abs()).max((got.1 - want[1] / s).abs()).max((got.2 - want[2] / s).abs());
    }
    verdict(err < 1e-10, format!("max deviation {err:.1e} over 100 draws at F=3, N=5 (tol 1e-10)"))
}

fn toy_overfit() -> Verdict {
    let mut cfg = TrainConfig::default();
    cfg.model.channels = 128;
    cfg.steps = 5000;
    let utts = common::toy_corpus(10, cfg.model.spectral.sample_rate_hz);
    let data = Dataset::new(&utts, &cfg.model.spectral).unwrap();
    let mut trainer = Trainer::new(&cfg, &data).unwrap();
    let tmp = std::path::Path::new(env!("CARGO_TARGET_TMPDIR"));
    let log_path = tmp.join("toy_overfit.log");
    let mut log = std::io::BufWriter::new(std::fs::File::create(&log_path).unwrap());
    let mut totals = Vec::with_capacity(cfg.steps as usize);
    while trainer.step() < cfg.steps {
        let r = trainer.train_step().unwrap();
        std::io::Write::write_all(&mut log, format!("{}\n", log_line(trainer.step(), &r)).as_bytes()).unwrap();
        totals.push(r.total);
    }
    drop(log);
    let e = epoch_steps(data.total_frames(), cfg.batch_size, cfg.segment_frames);
    let early = window_mean(&totals, 100, e);
    let late = window_mean(&totals, totals.len(), e);

    let voc = Vocoder::<f64>::new(&cfg.model, trainer.params().cast()).unwrap();
    let wave = &utts[0].wave;
    let mel = mel_spectrogram(wave, &cfg.model.spectral).unwrap();
    let syn = voc.synthesize(&mel).unwrap().wave;
    let s = snr(wave, &syn).unwrap();
    let m = mcd(wave, &syn, &cfg.model.spectral).unwrap();
    trainer.checkpoint().save(&tmp.join("toy_overfit.fgv")).unwrap();
    let (active, silent) = split_mcd(wave, &syn, &cfg.model.spectral);
    let (a, b1, b2) = (late < 0.5 * early, s > 5.0, m < 4.0);
    verdict(
        a && b1 && b2,
        format!(
            "epoch-mean total {early:.4} at step 100 -> {late:.4} at step {} (ratio {:.3}, need < 0.5); copy-syn {}: SNR {s:.2} dB (need > 5), MCD {m:.2} dB (need < 4) [active frames {:.2}, near-silent frames {:.2}]; log {}",
            totals.len(),
            late / early,
            utts[0].name,
            active,
            silent,
            log_path.display()
        ),
    )
}

/// MCD restricted to frames whose reference frame energy is within 40 dB
/// of the loudest frame, and to the remaining frames.
fn split_mcd(reference: &[f64], synth: &[f64], cfg: &SpectralConfig) -> (f64, f64) {
    let n = reference.len().min(synth.len());
    let (cr, cs) = (mel_cepstra(&reference[..n], cfg).unwrap(), mel_cepstra(&synth[..n], cfg).unwrap());
    let energy: Vec<f64> = (0..cr.len())
        .map(|f| {
            let lo = (f * cfg.frame_shift).saturating_sub(cfg.frame_len / 2);
            let hi = (f * cfg.frame_shift + cfg.frame_len / 2).min(n);
            reference[lo..hi].iter().map(|v| v * v).sum::<f64>() / (hi - lo).max(1) as f64
        })
        .collect();
    let peak = energy.iter().cloned().fold(0.0, f64::max);
    let (mut active, mut silent) = ((Vec::new(), Vec::new()), (Vec::new(), Vec::new()));
    for f in 0..cr.len() {
        let dst = if energy[f] > peak * 1e-4 { &mut active } else { &mut silent };
        dst.0.push(cr[f].clone());
        dst.1.push(cs[f].clone());
    }
    let d = |p: &(Vec<Vec<f64>>, Vec<Vec<f64>>)| cepstral_distance(&p.0, &p.1).unwrap_or(f64::NAN);
    (d(&active), d(&silent))
}

fn complexity() -> Verdict {
    let cfg = ModelConfig::default();
    let params = param_count(&cfg);
    let counted = ModelParams::<f32>::init(&cfg, 0).unwrap().count();
    let flops = count_flops(&cfg, 1.0);
    let macs = count_macs(&cfg, 1.0);
    let p_ok = (params as f64 / 13.4e6 - 1.0).abs() <= 0.2 && params == counted;
    let f_ok = (flops as f64 / 2.70e9 - 1.0).abs() <= 0.2;
    verdict(
        p_ok && f_ok,
        format!(
            "params {params} (need 13.4M +-20%: {}), FLOPs/1s {:.3}G = 2 x {:.3}G MAC (need 2.70G +-20%: {})",
            if p_ok { "ok" } else { "out of range" },
            flops as f64 / 1e9,
            macs as f64 / 1e9,
            if f_ok { "ok" } else { "out of range" }
        ),
    )
}

fn track(f0: &[f64]) -> PitchTrack {
    PitchTrack { f0_hz: f0.to_vec(), voiced: f0.iter().map(|&v| v > 0.0).collect(), frame_shift: 80, sample_rate_hz: 16000 }
}

fn metrics_suite() -> Verdict {
    let cfg = SpectralConfig::default();
    let wave = common::speech_like(9, 1.0, 16000);
    let self_snr = snr(&wave, &wave).unwrap();
    let self_mcd = mcd(&wave, &wave, &cfg).unwrap();
    let tr = extract_f0(&wave, &cfg).unwrap();
    let self_f0 = f0_metrics(&tr, &tr).unwrap();
    let self_ok = self_snr == 100.0 && self_mcd == 0.0 && self_f0.rmse_cents == Some(0.0) && self_f0.vuv_error_pct == 0.0;

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let noise = rand_vec(&mut rng, wave.len(), -1.0, 1.0);
    let (es, en): (f64, f64) = (wave.iter().map(|v| v * v).sum(), noise.iter().map(|v| v * v).sum());
    let scale = (es / 100.0 / en).sqrt();
    let noisy: Vec<f64> = wave.iter().zip(&noise).map(|(s, n)| s + scale * n).collect();
    let snr20 = snr(&wave, &noisy).unwrap();

    let f0: Vec<f64> = (0..200).map(|i| if i % 7 == 0 { 0.0 } else { 100.0 + i as f64 }).collect();
    let up: Vec<f64> = f0.iter().map(|v| v * 2f64.powf(1.0 / 12.0)).collect();
    let cents = f0_metrics(&track(&f0), &track(&up)).unwrap().rmse_cents.unwrap();

    let sine: Vec<f64> = (0..16000).map(|i| 0.5 * (2.0 * PI * 220.0 * i as f64 / 16000.0).sin()).collect();
    let st = extract_f0(&sine, &cfg).unwrap();
    let interior = &st.f0_hz[3..st.len() - 3];
    let all_voiced = st.voiced[3..st.len() - 3].iter().all(|&v| v);
    let mut sorted = interior.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let sine_cents = 1200.0 * (median / 220.0).log2();

    let ok = self_ok && (snr20 - 20.0).abs() < 0.01 && (cents - 100.0).abs() < 0.01 && all_voiced && sine_cents.abs() < 10.0;
    verdict(
        ok,
        format!(
            "self ({self_snr:.2}, {self_mcd:.2}, {:?}, {:.2}), 20 dB case {snr20:.4}, semitone {cents:.4} cents, 220 Hz median off by {sine_cents:.3} cents, interior voiced {all_voiced}",
            self_f0.rmse_cents, self_f0.vuv_error_pct
        ),
    )
}

fn small_train_config() -> TrainConfig {
    let mut cfg = TrainConfig::default();
    cfg.model.channels = 32;
    cfg.model.expansion = 2;
    cfg.batch_size = 4;
    cfg.segment_frames = 32;
    cfg.seed = 42;
    cfg
}

fn determinism() -> Verdict {
    let mut cfg = small_train_config();
    cfg.steps = 10;
    let utts = common::toy_corpus(4, 16000);
    let data = Dataset::new(&utts, &cfg.model.spectral).unwrap();
    let run = || {
        let mut t = Trainer::new(&cfg, &data).unwrap();
        let mut log = Vec::new();
        t.run(&mut log, None).unwrap();
        (log, t.checkpoint())
    };
    let (log_a, ck_a) = run();
    let (log_b, _) = run();
    let same_logs = log_a == log_b && !log_a.is_empty();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.fgv");
    ck_a.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    let bitwise = back
        .params
        .tensors()
        .iter()
        .zip(ck_a.params.tensors())
        .all(|(x, y)| x.data().iter().zip(y.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
    let bytes_equal = std::fs::read(&path).unwrap() == back.to_bytes().unwrap();
    verdict(
        same_logs && bitwise && bytes_equal && back == ck_a,
        format!("10-step logs identical {same_logs} ({} bytes), checkpoint round trip bitwise {bitwise}, re-encoded bytes equal {bytes_equal}", log_a.len()),
    )
}

fn ablation_smoke() -> Verdict {
    let utts = common::toy_corpus(4, 16000);
    let mut failures = Vec::new();
    let mut finals = Vec::new();
    for prior in [PriorKind::PseudoInverse, PriorKind::LearnableLinear] {
        for activation in [Activation::Snake, Activation::Gelu] {
            for phase_loss in [PhaseLossKind::Fwaw, PhaseLossKind::Unweighted] {
                let mut cfg = small_train_config();
                cfg.steps = 50;
                cfg.model.prior = prior;
                cfg.model.activation = activation;
                cfg.phase_loss = phase_loss;
                let data = Dataset::new(&utts, &cfg.model.spectral).unwrap();
                let tag = format!("{prior}/{activation}/{phase_loss}");
                let result = Trainer::new(&cfg, &data).and_then(|mut t| t.run(&mut std::io::sink(), None));
                match result {
                    Ok(reports) if reports.len() == 50 && reports.iter().all(|r| r.total.is_finite()) => {
                        finals.push(format!("{tag} {:.3}", reports.last().unwrap().total));
                    }
                    Ok(_) => failures.push(format!("{tag}: incomplete or non-finite")),
                    Err(e) => failures.push(format!("{tag}: {e}")),
                }
            }
        }
    }
    verdict(
        failures.is_empty(),
        if failures.is_empty() { format!("8 variants x 50 steps finite; final totals {}", finals.join(", ")) } else { failures.join("; ") },
    )
}
