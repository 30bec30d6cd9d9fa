use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use hnsynth::analysis::{analyze_with_f0, estimate_f0};
use hnsynth::io::{
    load_f0_file, load_features, read_wav, save_f0, save_features, write_atomic, write_wav,
    FeatureBundle, Resolved, SampleFormat, Settings,
};
use hnsynth::losses::{self, DurationPair};
use hnsynth::signal::Waveform;
use hnsynth::spectral::WindowKind;
use hnsynth::{Error, ErrorKind};

#[derive(Parser)]
#[command(
    name = "hnsynth",
    version,
    about = "Harmonic-plus-noise analysis and resynthesis"
)]
struct Cli {
    /// Flat TOML file overriding built-in defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    cmd: Cmd,
}

/// Command-line values win over the config file.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long, global = true)]
    fft_size: Option<usize>,
    #[arg(long, global = true)]
    hop_size: Option<usize>,
    #[arg(long, global = true)]
    win_size: Option<usize>,
    #[arg(long, global = true)]
    window: Option<WindowKind>,
    #[arg(long, global = true)]
    k_max: Option<usize>,
    #[arg(long, global = true)]
    f0_min: Option<f64>,
    #[arg(long, global = true)]
    f0_max: Option<f64>,
    #[arg(long, global = true)]
    refine_iters: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

impl Overrides {
    fn settings(&self) -> Settings {
        Settings {
            fft_size: self.fft_size,
            hop_size: self.hop_size,
            win_size: self.win_size,
            window: self.window,
            k_max: self.k_max,
            f0_min: self.f0_min,
            f0_max: self.f0_max,
            refine_iters: self.refine_iters,
            seed: self.seed,
            ..Settings::default()
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Pcm16,
    Float32,
}

impl From<Format> for SampleFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Pcm16 => SampleFormat::Pcm16,
            Format::Float32 => SampleFormat::Float32,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Estimate f0, harmonic amplitudes and noise spectrum; save a feature file.
    Analyze {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Use this f0 text file instead of the built-in tracker.
        #[arg(long, value_name = "FILE")]
        f0: Option<PathBuf>,
        /// Also write the f0 contour as text.
        #[arg(long, value_name = "FILE")]
        f0_out: Option<PathBuf>,
    },
    /// Render a feature file to audio.
    Synth {
        features: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value = "pcm16")]
        format: Format,
    },
    /// Analyse and resynthesise in one step, reporting quality metrics.
    Resynth {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "pcm16")]
        format: Format,
    },
    /// Compare two equal-length recordings.
    Metrics { a: PathBuf, b: PathBuf },
    /// Duration losses between two JSON files `{"phone": [..], "note": [..]}`.
    Durations { pred: PathBuf, truth: PathBuf },
}

fn resolve(cli: &Cli, sample_rate: u32) -> hnsynth::Result<Resolved> {
    let file = match &cli.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    file.overlay(&cli.overrides.settings()).resolve(sample_rate)
}

fn emit(report: &Value, path: Option<&Path>) -> hnsynth::Result<()> {
    let text = serde_json::to_string_pretty(report).expect("report serialises");
    println!("{text}");
    if let Some(p) = path {
        write_atomic(p, |w| {
            writeln!(w, "{text}").map_err(|e| Error::Io {
                path: p.into(),
                source: e,
            })
        })?;
    }
    Ok(())
}

fn comparison(y: &Waveform, x: &Waveform, r: &Resolved) -> hnsynth::Result<Value> {
    let mel_l1 = losses::mel_l1(y, x, &r.mel)?;
    let silence = Waveform::silence(x.len(), x.sample_rate())?;
    let baseline = losses::mel_l1(&silence, x, &r.mel)?;
    let f0_x = estimate_f0(x, &r.analysis)?;
    let f0_y = estimate_f0(y, &r.analysis)?;
    let f0 = losses::f0_rmse(&f0_y, &f0_x)?;
    Ok(json!({
        "mel_l1": mel_l1,
        "dsp_loss": r.weights.lambda_dsp * mel_l1,
        "silence_mel_l1": baseline,
        "mel_l1_ratio": if baseline > 0.0 { mel_l1 / baseline } else { 0.0 },
        "f0_rmse_hz": f0.rmse,
        "f0_common_voiced": f0.common_voiced,
        "no_common_voiced": f0.no_common_voiced,
    }))
}

fn analyse(
    cli: &Cli,
    x: &Waveform,
    f0_path: Option<&Path>,
) -> hnsynth::Result<(FeatureBundle, Resolved)> {
    let r = resolve(cli, x.sample_rate())?;
    let f0 = match f0_path {
        Some(p) => {
            let (c, sr) = load_f0_file(p)?;
            if sr != x.sample_rate() || c.hop_size() != r.spectral.hop_size {
                return Err(Error::InvalidArgument(format!(
                    "{}: f0 file declares hop {} at {sr} Hz, analysis uses hop {} at {} Hz",
                    p.display(),
                    c.hop_size(),
                    r.spectral.hop_size,
                    x.sample_rate()
                )));
            }
            c
        }
        None => estimate_f0(x, &r.analysis)?,
    };
    let a = analyze_with_f0(x, f0, &r.analysis, &r.spectral)?;
    Ok((
        FeatureBundle::from_analysis(a, x, r.spectral, r.analysis),
        r,
    ))
}

fn run(cli: &Cli) -> hnsynth::Result<()> {
    match &cli.cmd {
        Cmd::Analyze {
            input,
            output,
            f0,
            f0_out,
        } => {
            let x = read_wav(input)?;
            let (bundle, _) = analyse(cli, &x, f0.as_deref())?;
            save_features(&bundle, output)?;
            if let Some(p) = f0_out {
                save_f0(&bundle.f0, bundle.sample_rate, p)?;
            }
            log::info!(
                "{} frames, {} voiced",
                bundle.f0.frames(),
                bundle.f0.voiced_count()
            );
        }
        Cmd::Synth {
            features,
            output,
            format,
        } => {
            let bundle = load_features(features)?;
            let r = resolve(cli, bundle.sample_rate)?;
            let y = bundle.synthesize(r.seed)?;
            write_wav(&y, output, (*format).into())?;
        }
        Cmd::Resynth {
            input,
            output,
            report,
            format,
        } => {
            let x = read_wav(input)?;
            let (bundle, r) = analyse(cli, &x, None)?;
            let y = bundle.synthesize(r.seed)?;
            let clip = write_wav(&y, output, (*format).into())?;
            let mut rep = comparison(&y, &x, &r)?;
            rep["clipped_samples"] = json!(clip.clipped);
            rep["seed"] = json!(r.seed);
            emit(&rep, report.as_deref())?;
        }
        Cmd::Metrics { a, b } => {
            let a = read_wav(a)?;
            let b = read_wav(b)?;
            if a.sample_rate() != b.sample_rate() {
                return Err(Error::InvalidArgument(format!(
                    "sample rates differ: {} vs {}",
                    a.sample_rate(),
                    b.sample_rate()
                )));
            }
            let r = resolve(cli, a.sample_rate())?;
            emit(&comparison(&a, &b, &r)?, None)?;
        }
        Cmd::Durations { pred, truth } => {
            let load = |p: &Path| -> hnsynth::Result<DurationPair> {
                let text = std::fs::read_to_string(p).map_err(|e| match e.kind() {
                    std::io::ErrorKind::NotFound => Error::NotFound(p.into()),
                    _ => Error::Io {
                        path: p.into(),
                        source: e,
                    },
                })?;
                let d: DurationPair = serde_json::from_str(&text).map_err(|e| Error::Parse {
                    path: p.into(),
                    line: e.line(),
                    msg: e.to_string(),
                })?;
                DurationPair::new(d.phone, d.note)
            };
            let (p, t) = (load(pred)?, load(truth)?);
            emit(
                &json!({
                    "duration_loss": losses::duration_loss(&p, &t)?,
                    "duration_rmse": losses::duration_rmse(&p, &t)?,
                }),
                None,
            )?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hnsynth: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Io => 3,
                ErrorKind::Format => 4,
                ErrorKind::Invariant => 5,
            })
        }
    }
}
