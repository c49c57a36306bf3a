//! One function per subcommand. Each returns a [`Failure`] carrying the
//! process exit code: 2 for bad input or configuration, 3 for checkpoint
//! and format problems.

use std::fmt;
use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serialvoc_core::dsp::{mel_spectrogram, Spectrogram, SpectralConfig};
use serialvoc_core::metrics::{evaluate_pair, format_report, EvalRow};
use serialvoc_core::model::{count_flops, param_count, Vocoder};
use serialvoc_core::trainer::{Checkpoint, Dataset, TrainConfig, Trainer, Utterance};
use serialvoc_core::Error;

use crate::melb;
use crate::wav::{self, AudioFile};

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_FORMAT: i32 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

pub type Outcome<T> = std::result::Result<T, Failure>;

fn fail(code: i32) -> impl Fn(Error) -> Failure {
    move |e| Failure { code, message: e.to_string() }
}

fn input_error(message: String) -> Failure {
    Failure { code: EXIT_INPUT, message: format!("InvalidInput: {message}") }
}

/// Training and numerical failures are input problems; anything wrong
/// with a stored file is a format problem.
fn classify(e: Error) -> Failure {
    let code = match e {
        Error::Format(_) | Error::Shape(_) => EXIT_FORMAT,
        _ => EXIT_INPUT,
    };
    Failure { code, message: e.to_string() }
}

pub fn load_config(path: Option<&Path>) -> Outcome<TrainConfig> {
    let Some(path) = path else {
        return Ok(TrainConfig::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| Failure { code: EXIT_INPUT, message: format!("ConfigError: cannot read {}: {e}", path.display()) })?;
    let cfg = TrainConfig::parse(&text).map_err(|e| Failure {
        code: EXIT_INPUT,
        message: format!("{}: {e}", path.display()),
    })?;
    cfg.validate().map_err(fail(EXIT_INPUT))?;
    Ok(cfg)
}

/// `*.wav` files directly inside `dir`, sorted by name.
pub fn wav_files(dir: &Path) -> Outcome<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| input_error(format!("cannot list {}: {e}", dir.display())))?;
    let mut out: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    out.sort();
    Ok(out)
}

/// Reads a WAV that must be at the configured sample rate.
pub fn read_input_wav(path: &Path, spectral: &SpectralConfig) -> Outcome<AudioFile> {
    let a = wav::read_wav(path).map_err(fail(EXIT_INPUT))?;
    if a.sample_rate_hz != spectral.sample_rate_hz {
        return Err(input_error(format!(
            "{}: sample rate {} Hz, expected {}",
            path.display(),
            a.sample_rate_hz,
            spectral.sample_rate_hz
        )));
    }
    Ok(a)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn load_corpus(dir: &Path, spectral: &SpectralConfig) -> Outcome<Vec<Utterance>> {
    let files = wav_files(dir)?;
    if files.is_empty() {
        return Err(input_error(format!("no .wav files in {}", dir.display())));
    }
    files
        .iter()
        .map(|p| Ok(Utterance { name: file_name(p), wave: read_input_wav(p, spectral)?.samples }))
        .collect()
}

pub const LOSS_LOG: &str = "loss.log";
pub const CONFIG_SNAPSHOT: &str = "config.txt";

pub struct TrainArgs<'a> {
    pub config: Option<&'a Path>,
    pub data_dir: &'a Path,
    pub out: &'a Path,
    pub resume: Option<&'a Path>,
    pub steps: Option<u64>,
}

/// Trains to the configured step count; returns the final step.
pub fn train(args: &TrainArgs<'_>) -> Outcome<u64> {
    let mut cfg = load_config(args.config)?;
    if let Some(s) = args.steps {
        cfg.steps = s;
    }
    let utts = load_corpus(args.data_dir, &cfg.model.spectral)?;
    let data = Dataset::new(&utts, &cfg.model.spectral).map_err(fail(EXIT_INPUT))?;
    fs::create_dir_all(args.out).map_err(|e| input_error(format!("cannot create {}: {e}", args.out.display())))?;
    let mut trainer = match args.resume {
        Some(path) => {
            let ck = Checkpoint::load_for(path, &cfg).map_err(fail(EXIT_FORMAT))?;
            Trainer::resume(&cfg, &data, ck).map_err(classify)?
        }
        None => Trainer::new(&cfg, &data).map_err(fail(EXIT_INPUT))?,
    };
    fs::write(args.out.join(CONFIG_SNAPSHOT), cfg.to_text()).map_err(|e| input_error(e.to_string()))?;
    let log = OpenOptions::new()
        .create(true)
        .write(true)
        .append(args.resume.is_some())
        .truncate(args.resume.is_none())
        .open(args.out.join(LOSS_LOG))
        .map_err(|e| input_error(e.to_string()))?;
    let mut log = BufWriter::new(log);
    log::info!(
        "training {} parameters on {} utterances ({} frames) from step {}",
        trainer.params().count(),
        data.len(),
        data.total_frames(),
        trainer.step()
    );
    trainer.run(&mut log, Some(args.out)).map_err(fail(EXIT_INPUT))?;
    Ok(trainer.step())
}

pub fn load_vocoder(checkpoint: &Path) -> Outcome<(Checkpoint, Vocoder<f64>)> {
    let ck = Checkpoint::load(checkpoint).map_err(fail(EXIT_FORMAT))?;
    let voc = Vocoder::new(&ck.config.model, ck.params.cast()).map_err(fail(EXIT_FORMAT))?;
    Ok((ck, voc))
}

/// Mel input from either a WAV (analysed here) or a MELB file.
pub fn read_mel_input(path: &Path, spectral: &SpectralConfig) -> Outcome<Spectrogram> {
    let bytes = fs::read(path).map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))?;
    let mel = if bytes.starts_with(melb::MAGIC) {
        melb::decode_mel(&bytes).map_err(fail(EXIT_FORMAT))?
    } else {
        let wave = read_input_wav(path, spectral)?.samples;
        mel_spectrogram(&wave, spectral).map_err(fail(EXIT_INPUT))?
    };
    if mel.bins() != spectral.mel_bins {
        return Err(Failure {
            code: EXIT_FORMAT,
            message: format!(
                "ShapeError: {} has {} mel bins, checkpoint expects {}",
                path.display(),
                mel.bins(),
                spectral.mel_bins
            ),
        });
    }
    Ok(mel)
}

fn synth_one(voc: &Vocoder<f64>, input: &Path, output: &Path) -> Outcome<usize> {
    let spectral = &voc.config().spectral;
    let mel = read_mel_input(input, spectral)?;
    let syn = voc.synthesize(&mel).map_err(classify)?;
    let audio = AudioFile { samples: syn.wave, sample_rate_hz: spectral.sample_rate_hz, path: None };
    wav::write_wav(output, &audio).map_err(fail(EXIT_INPUT))?;
    Ok(audio.samples.len())
}

/// Synthesizes one file; returns the number of samples written.
pub fn synth(checkpoint: &Path, input: &Path, output: &Path) -> Outcome<usize> {
    let (_, voc) = load_vocoder(checkpoint)?;
    synth_one(&voc, input, output)
}

/// Copy-synthesis of every WAV in `input_dir` into `output_dir` under the
/// same names; returns the file count.
pub fn copy_syn(checkpoint: &Path, input_dir: &Path, output_dir: &Path) -> Outcome<usize> {
    let (_, voc) = load_vocoder(checkpoint)?;
    let files = wav_files(input_dir)?;
    if files.is_empty() {
        return Err(input_error(format!("no .wav files in {}", input_dir.display())));
    }
    fs::create_dir_all(output_dir).map_err(|e| input_error(e.to_string()))?;
    for f in &files {
        synth_one(&voc, f, &output_dir.join(file_name(f)))?;
    }
    Ok(files.len())
}

pub fn extract_mel(config: Option<&Path>, input: &Path, output: &Path) -> Outcome<(usize, usize)> {
    let cfg = load_config(config)?;
    let spectral = &cfg.model.spectral;
    let wave = read_input_wav(input, spectral)?.samples;
    let mel = mel_spectrogram(&wave, spectral).map_err(fail(EXIT_INPUT))?;
    melb::write_mel(output, &mel).map_err(fail(EXIT_INPUT))?;
    Ok((mel.frames(), mel.bins()))
}

/// Result of [`eval`]: the report text and how many files were unmatched.
pub struct EvalOutcome {
    pub report: String,
    pub rows: Vec<EvalRow>,
    pub unmatched: Vec<String>,
}

pub fn eval(config: Option<&Path>, ref_dir: &Path, syn_dir: &Path, report: &Path) -> Outcome<EvalOutcome> {
    let cfg = load_config(config)?;
    let spectral = &cfg.model.spectral;
    let refs = wav_files(ref_dir)?;
    let syns = wav_files(syn_dir)?;
    if syns.is_empty() {
        return Err(input_error(format!("no .wav files in {}", syn_dir.display())));
    }
    let ref_names: Vec<String> = refs.iter().map(|p| file_name(p)).collect();
    let syn_names: Vec<String> = syns.iter().map(|p| file_name(p)).collect();
    let pairs: Vec<&String> = ref_names.iter().filter(|n| syn_names.contains(n)).collect();
    let mut unmatched: Vec<String> = ref_names
        .iter()
        .chain(&syn_names)
        .filter(|n| !(ref_names.contains(n) && syn_names.contains(n)))
        .cloned()
        .collect();
    unmatched.sort();
    unmatched.dedup();
    let rows: Vec<EvalRow> = pairs
        .par_iter()
        .map(|name| {
            let r = read_input_wav(&ref_dir.join(name.as_str()), spectral)?;
            let s = read_input_wav(&syn_dir.join(name.as_str()), spectral)?;
            evaluate_pair(name, &r.samples, &s.samples, spectral)
                .map_err(|e| input_error(format!("{name}: {}", wav::strip(&e))))
        })
        .collect::<Outcome<_>>()?;
    let text = format_report(&rows, &unmatched);
    fs::write(report, &text).map_err(|e| input_error(format!("cannot write {}: {e}", report.display())))?;
    Ok(EvalOutcome { report: text, rows, unmatched })
}

/// Human-readable checkpoint summary.
pub fn inspect(checkpoint: &Path) -> Outcome<String> {
    let ck = Checkpoint::load(checkpoint).map_err(fail(EXIT_FORMAT))?;
    let model = &ck.config.model;
    let mut out = String::new();
    let _ = writeln!(out, "step\t{}", ck.step);
    let _ = writeln!(out, "parameters\t{}", ck.params.count());
    let _ = writeln!(out, "parameters_from_config\t{}", param_count(model));
    let _ = writeln!(out, "flops_per_second_of_audio\t{}", count_flops(model, 1.0));
    let _ = writeln!(out, "# configuration");
    out.push_str(&ck.config.to_text());
    Ok(out)
}

