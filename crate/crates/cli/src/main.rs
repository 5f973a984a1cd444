use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use memrc::audio::load_fsdd_dir;
use memrc::config::{load_config, HarnessConfig};
use memrc::device::build_lookup_table;
use memrc::energy::{network_report, EnergyTask};
use memrc::readout::{History, TrainMode};
use memrc::report::{Emitter, Provenance};
use memrc::sclc::{fit_segments, parse_iv_csv, write_fits_csv, Breakpoints};
use memrc::tasks::fsdd::{run_fsdd_experiment, run_noise_sweep, sweep_means, write_epochs_csv, write_sweep_csv};
use memrc::tasks::timeseries::{run_timeseries_experiment, write_trace_csv};
use memrc::{selftest, Error};

const DATA_ENV: &str = "MEMRC_DATA";

#[derive(Parser)]
#[command(name = "memrc", version, about = "Memristive reservoir computing simulator")]
struct Cli {
    /// JSON config file; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Offline,
    Online,
}

#[derive(Clone, Copy, ValueEnum)]
enum Task {
    Speech,
    Timeseries,
}

#[derive(Subcommand)]
enum Command {
    /// Dump the 16-row lookup table of one reservoir device.
    States {
        #[arg(long, default_value_t = 0)]
        device: u32,
        /// Output CSV file.
        #[arg(long, default_value = "states.csv")]
        out: PathBuf,
        /// Noisy repetitions averaged per entry.
        #[arg(long, default_value_t = 16)]
        runs: usize,
    },
    /// Spoken-digit classification on an FSDD recordings directory.
    Fsdd {
        /// Directory of `{digit}_{speaker}_{index}.wav` files (default: $MEMRC_DATA).
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Gaussian noise std added to the audio.
        #[arg(long)]
        noise_sigma: Option<f64>,
        /// Run the noise-robustness sweep instead of a single experiment.
        #[arg(long)]
        sweep: bool,
    },
    /// Nonlinear time-series prediction.
    Timeseries {
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Usable prediction steps after washout (split into train and test).
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Energy and efficiency report.
    Energy {
        #[arg(long, value_enum, default_value = "timeseries")]
        task: Task,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit log-log power-law regions to I-V sweeps (CSV: voltage,current,branch).
    Sclcfit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fixed breakpoints in volts; auto-selected when omitted.
        #[arg(long, value_delimiter = ',')]
        breakpoints: Vec<f64>,
    },
    /// Run the built-in invariant checks.
    Selftest,
    /// Print the effective configuration.
    Config,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if matches!(e, Error::Dataset(_)) { 3 } else { 1 };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("memrc: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> CliResult {
    let mut cfg = match &cli.config {
        Some(p) => load_config(p)?,
        None => HarnessConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match cli.command {
        Command::States { device, out, runs } => states(&cfg, device, &out, runs),
        Command::Fsdd {
            data,
            out,
            epochs,
            noise_sigma,
            sweep,
        } => {
            if let Some(e) = epochs {
                cfg.training.speech.epochs = e;
            }
            if let Some(s) = noise_sigma {
                cfg.tasks.fsdd.noise_sigma = s;
            }
            let data = data.or_else(|| std::env::var_os(DATA_ENV).map(PathBuf::from)).ok_or(Failure {
                code: 3,
                message: format!("no dataset: pass --data DIR or set {DATA_ENV}"),
            })?;
            fsdd(&cfg, &data, &out_dir(&cfg, out), sweep)
        }
        Command::Timeseries {
            mode,
            steps,
            epochs,
            out,
        } => {
            if let Some(m) = mode {
                cfg.training.timeseries.mode = match m {
                    Mode::Offline => TrainMode::Offline,
                    Mode::Online => TrainMode::Online,
                };
            }
            if let Some(n) = steps {
                cfg.tasks.timeseries.set_usable_steps(n);
            }
            if let Some(e) = epochs {
                cfg.training.timeseries.epochs = e;
            }
            timeseries(&cfg, &out_dir(&cfg, out))
        }
        Command::Energy { task, out } => {
            let task = match task {
                Task::Speech => EnergyTask::Speech,
                Task::Timeseries => EnergyTask::Timeseries,
            };
            energy(&cfg, task, &out_dir(&cfg, out))
        }
        Command::Sclcfit { input, out, breakpoints } => sclcfit(&cfg, &input, &out_dir(&cfg, out), breakpoints),
        Command::Selftest => selftest_cmd(),
        Command::Config => {
            println!("{}", cfg.to_json()?);
            println!("hash {}", cfg.hash());
            Ok(())
        }
    }
}

fn out_dir(cfg: &HarnessConfig, out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| cfg.out_dir.clone())
}

fn emitter(cfg: &HarnessConfig, dir: &Path) -> Result<Emitter, Failure> {
    Ok(Emitter::new(dir, Provenance::new(cfg.hash(), cfg.seed))?)
}

fn states(cfg: &HarnessConfig, device: u32, out: &Path, runs: usize) -> CliResult {
    cfg.device.validate()?;
    let mut rng = cfg.seeds().rng(&format!("states/device{device}"));
    let table = build_lookup_table(&cfg.device, device, runs, &mut rng)?;
    let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = out.file_name().ok_or_else(|| Failure {
        code: 1,
        message: format!("not a file path: {}", out.display()),
    })?;
    let path = emitter(cfg, dir)?.csv(&name.to_string_lossy(), |w| table.write_csv(w))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn fsdd(cfg: &HarnessConfig, data: &Path, out: &Path, sweep: bool) -> CliResult {
    let clips = load_fsdd_dir::<f64>(data)?;
    let em = emitter(cfg, out)?;
    let exp = cfg.fsdd_experiment();
    let train = cfg.speech_train();
    if sweep {
        let seeds: Vec<u64> = (0..cfg.tasks.fsdd.sweep_seeds as u64).map(|i| cfg.seed + i).collect();
        let rows = run_noise_sweep(
            &clips,
            &cfg.tasks.fsdd.sweep_sigmas,
            &seeds,
            &exp,
            &cfg.reservoir.speech,
            &cfg.device,
            &train,
        )?;
        let path = em.csv("noise_sweep.csv", |w| write_sweep_csv(&rows, w))?;
        for (sigma, acc) in sweep_means(&rows) {
            println!("sigma {sigma}: mean accuracy {acc:.4}");
        }
        println!("wrote {}", path.display());
        return Ok(());
    }
    let outcome = run_fsdd_experiment(&clips, &exp, &cfg.reservoir.speech, &cfg.device, &train)?;
    let metrics = outcome.metrics.clone().with_config_hash(cfg.hash());
    let paths = [
        em.json("metrics.json", &metrics)?,
        em.csv("confusion.csv", |w| metrics.write_confusion_csv(w))?,
        em.csv("accuracy_vs_epoch.csv", |w| write_epochs_csv(&outcome.epochs, w))?,
    ];
    let acc = metrics.accuracy.unwrap_or(0.0);
    println!(
        "accuracy {acc:.4} wer {:.4} ({} test clips)",
        metrics.wer.unwrap_or(1.0),
        metrics.samples
    );
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn timeseries(cfg: &HarnessConfig, out: &Path) -> CliResult {
    let exp = cfg.timeseries_experiment();
    let train = cfg.timeseries_train();
    let outcome = run_timeseries_experiment(&exp, &cfg.reservoir.timeseries, &cfg.device, &train)?;
    let em = emitter(cfg, out)?;
    let metrics = outcome.metrics.clone().with_config_hash(cfg.hash());
    let history = History {
        epochs: outcome
            .epoch_loss
            .iter()
            .enumerate()
            .map(|(i, &loss)| memrc::readout::EpochStats {
                epoch: i + 1,
                loss,
                accuracy: None,
            })
            .collect(),
    };
    let mut paths = vec![
        em.json("metrics.json", &metrics)?,
        em.csv("prediction_trace.csv", |w| write_trace_csv(&outcome.trace, w))?,
        em.csv("loss_vs_epoch.csv", |w| history.write_csv(w))?,
    ];
    if !outcome.cumulative_error.is_empty() {
        paths.push(em.csv("cumulative_error.csv", |w| {
            writeln!(w, "step,mean_abs_error")?;
            for (i, e) in outcome.cumulative_error.iter().enumerate() {
                writeln!(w, "{},{e}", i + 1)?;
            }
            Ok(())
        })?);
    }
    println!("NRMSE {:.4}", metrics.nrmse.unwrap_or(f64::NAN));
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn energy(cfg: &HarnessConfig, task: EnergyTask, out: &Path) -> CliResult {
    let report = network_report(&cfg.energy, task)?;
    print!("{}", report.to_table());
    let name = match task {
        EnergyTask::Speech => "energy_speech.csv",
        EnergyTask::Timeseries => "energy_timeseries.csv",
    };
    let path = emitter(cfg, out)?.csv(name, |w| report.write_csv(w))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn sclcfit(cfg: &HarnessConfig, input: &Path, out: &Path, breakpoints: Vec<f64>) -> CliResult {
    let text = std::fs::read_to_string(input)?;
    let traces = parse_iv_csv::<f64>(&text)?;
    let bp = if breakpoints.is_empty() {
        Breakpoints::Auto {
            max: cfg.sclc.max_breakpoints,
        }
    } else {
        Breakpoints::Explicit(breakpoints)
    };
    let mut fits = Vec::with_capacity(traces.len());
    for t in &traces {
        fits.push((t.branch(), fit_segments(t, &bp, &cfg.sclc.thresholds)?));
    }
    for (branch, regions) in &fits {
        for (i, r) in regions.iter().enumerate() {
            println!(
                "{branch} region {}: {:.3}-{:.3} V slope {:.3} r2 {:.4} {:?}",
                i + 1,
                r.v_range.0,
                r.v_range.1,
                r.slope,
                r.r_squared,
                r.classification
            );
        }
    }
    let path = emitter(cfg, out)?.csv("sclc_fits.csv", |w| write_fits_csv(&fits, w))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn selftest_cmd() -> CliResult {
    let checks = selftest::run();
    let mut failed = 0;
    for c in &checks {
        match &c.outcome {
            Ok(()) => println!("PASS {}", c.name),
            Err(why) => {
                failed += 1;
                println!("FAIL {}: {why}", c.name);
            }
        }
    }
    if failed > 0 {
        return Err(Failure {
            code: 1,
            message: format!("{failed} of {} checks failed", checks.len()),
        });
    }
    println!("all {} checks passed", checks.len());
    Ok(())
}
