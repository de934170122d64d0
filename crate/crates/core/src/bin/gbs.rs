//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 capacity error,
//! 3 validation failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gbs_workbench::codec::{circuit_fingerprint, circuit_from_toml, circuit_to_toml, csv_string, load_samples, save_samples};
use gbs_workbench::cost::{advantage_ratio, cost_table, CostConfig};
use gbs_workbench::gaussian::{haar_random_unitary, paired_squeezers, CircuitSpec};
use gbs_workbench::pipeline::{oracle_check, run_pipeline, validate_samples, ExperimentConfig, ValidationSection};
use gbs_workbench::samplers::{sample_circuit, ModelTag};
use gbs_workbench::{GbsError, KernelConfig};

#[derive(Parser)]
#[command(name = "gbs", version, about = "Gaussian boson sampling simulation and validation")]
struct Cli {
    /// Master seed; overrides the seed of a run config when given.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a circuit file with a Haar-random interferometer.
    GenCircuit {
        #[arg(long)]
        modes: usize,
        /// Squeezing parameters; squeezer k acts on modes 2k and 2k+1.
        #[arg(long, value_delimiter = ',')]
        squeezing: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        phases: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        transmission: f64,
        #[arg(long, default_value_t = 1.0)]
        detector_efficiency: f64,
        #[arg(long, default_value_t = 0.0)]
        dark_count_prob: f64,
    },
    /// Draw samples of one model for a circuit file.
    Sample {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long, default_value = "gbs")]
        model: ModelTag,
        #[arg(long)]
        count: usize,
        /// Replace the squeezer phases before sampling.
        #[arg(long, value_delimiter = ',')]
        phases: Vec<f64>,
        #[arg(long)]
        phase_index: Option<usize>,
    },
    /// Run the validation battery on sample files of one circuit.
    Validate {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long, required = true, num_args = 1..)]
        samples: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
    },
    /// Classical cost table and advantage ratio.
    Cost {
        #[arg(long)]
        samples: Option<PathBuf>,
        #[arg(long, default_value_t = 40)]
        max_clicks: usize,
        #[arg(long)]
        machine_flops: Option<f64>,
        #[arg(long)]
        kernel_constant: Option<f64>,
        #[arg(long)]
        collection_time: Option<f64>,
    },
    /// Compare the Gaussian engine with the Fock-space oracle on random small circuits.
    OracleCheck {
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 4)]
        modes: usize,
        #[arg(long, default_value_t = 8)]
        cutoff: usize,
    },
    /// Run a whole experiment from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

enum Outcome {
    Done,
    ChecksFailed,
}

fn exit_code(e: &GbsError) -> u8 {
    match e {
        GbsError::Capacity(_) | GbsError::NumericalInstability(_) => 2,
        _ => 1,
    }
}

fn out_dir(cli_out: &Option<PathBuf>, fallback: &str) -> gbs_workbench::Result<PathBuf> {
    let dir = cli_out.clone().unwrap_or_else(|| PathBuf::from(fallback));
    std::fs::create_dir_all(&dir).map_err(|e| GbsError::Io(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn write(path: &Path, text: &str) -> gbs_workbench::Result<()> {
    std::fs::write(path, text).map_err(|e| GbsError::Io(format!("{}: {e}", path.display())))
}

fn load_circuit(path: &Path) -> gbs_workbench::Result<CircuitSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| GbsError::Io(format!("{}: {e}", path.display())))?;
    circuit_from_toml(&text).map_err(|e| match e {
        GbsError::Config(msg) => GbsError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn run(cli: Cli) -> gbs_workbench::Result<Outcome> {
    let seed = cli.seed.unwrap_or(0);
    let cfg = KernelConfig::default();
    match cli.command {
        Command::GenCircuit { modes, squeezing, phases, transmission, detector_efficiency, dark_count_prob } => {
            let phases = if phases.is_empty() { vec![0.0; squeezing.len()] } else { phases };
            if phases.len() != squeezing.len() {
                return Err(GbsError::Config(format!("--phases has {} entries for {} squeezers", phases.len(), squeezing.len())));
            }
            let mut c = CircuitSpec::ideal(haar_random_unitary(modes, seed), paired_squeezers(&squeezing, &phases))
                .with_uniform_transmission(transmission);
            c.detector_efficiency = detector_efficiency;
            c.dark_count_prob = dark_count_prob;
            c.validate()?;
            let path = out_dir(&cli.out, ".")?.join("circuit.toml");
            write(&path, &circuit_to_toml(&c))?;
            println!("{} fingerprint {}", path.display(), circuit_fingerprint(&c));
        }
        Command::Sample { circuit, model, count, phases, phase_index } => {
            let mut c = load_circuit(&circuit)?;
            if !phases.is_empty() {
                c = c.with_phases(&phases)?;
            }
            let set = sample_circuit(&c, model, count, seed, phase_index, &cfg)?;
            let name = match phase_index {
                Some(i) => format!("samples_{model}_phase_{i}.txt"),
                None => format!("samples_{model}.txt"),
            };
            let path = out_dir(&cli.out, ".")?.join(name);
            save_samples(&set, &path)?;
            println!("{} ({} samples, fingerprint {})", path.display(), set.len(), set.fingerprint);
        }
        Command::Validate { circuit, samples, sizes } => {
            let c = load_circuit(&circuit)?;
            let sets = samples
                .iter()
                .map(|p| {
                    load_samples(p).map_err(|e| match e {
                        GbsError::Format { line, message } => GbsError::Format { line, message: format!("{}: {message}", p.display()) },
                        other => other,
                    })
                })
                .collect::<gbs_workbench::Result<Vec<_>>>()?;
            let settings = ValidationSection { subsystem_sizes: sizes, ..Default::default() };
            let out = validate_samples(&c, &sets, &settings, seed, &cfg)?;
            let dir = out_dir(&cli.out, ".")?;
            write(&dir.join("validation.csv"), &out.report.to_csv()?)?;
            write(&dir.join("sweep.csv"), &csv_string(&out.sweep)?)?;
            write(&dir.join("bayes_series.csv"), &csv_string(&out.series)?)?;
            let summary = out.report.summary();
            write(&dir.join("summary.txt"), &summary)?;
            print!("{summary}");
            if !out.report.all_passed() {
                return Ok(Outcome::ChecksFailed);
            }
        }
        Command::Cost { samples, max_clicks, machine_flops, kernel_constant, collection_time } => {
            let d = CostConfig::default();
            let config = CostConfig {
                machine_flops: machine_flops.unwrap_or(d.machine_flops),
                kernel_constant: kernel_constant.unwrap_or(d.kernel_constant),
                collection_time: collection_time.unwrap_or(d.collection_time),
            };
            config.validate()?;
            let dir = out_dir(&cli.out, ".")?;
            write(&dir.join("cost.csv"), &csv_string(&cost_table(max_clicks, &config)?)?)?;
            if let Some(p) = samples {
                let set = load_samples(&p)?;
                let a = advantage_ratio(&set, &config)?;
                println!(
                    "samples={} max_clicks={} log10_flops={:.4} log10_seconds={:.4} log10_ratio={:.4}",
                    a.samples, a.max_clicks, a.log10_total_flops, a.log10_classical_seconds, a.log10_ratio
                );
            }
            println!("{}", dir.join("cost.csv").display());
        }
        Command::OracleCheck { trials, modes, cutoff } => {
            let rows = oracle_check(trials, modes, cutoff, seed, &cfg)?;
            let dir = out_dir(&cli.out, ".")?;
            write(&dir.join("oracle.csv"), &csv_string(&rows)?)?;
            let failed = rows.iter().filter(|r| !r.pass).count();
            let worst = rows.iter().map(|r| r.max_abs_diff).fold(0.0, f64::max);
            println!("{} circuits, {failed} outside tolerance, largest deviation {worst:.3e}", rows.len());
            if failed > 0 {
                return Ok(Outcome::ChecksFailed);
            }
        }
        Command::Run { config } => {
            let mut exp = ExperimentConfig::load(&config)?;
            if let Some(s) = cli.seed {
                exp.seed = s;
            }
            let fallback = exp.output_dir.clone().unwrap_or_else(|| "gbs-out".into());
            let dir = out_dir(&cli.out, &fallback)?;
            let outcome = run_pipeline(&exp, &dir)?;
            print!("{}", std::fs::read_to_string(dir.join("summary.txt")).unwrap_or_default());
            if !outcome.passed {
                return Ok(Outcome::ChecksFailed);
            }
        }
    }
    Ok(Outcome::Done)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
