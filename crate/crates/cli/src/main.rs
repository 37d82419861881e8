use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use distortion_cli::{
    check_properties, exit, parse_inner, parse_mechanism, parse_objective, verify_bounds,
    write_rows, CliError, CliResult, ExperimentConfig, Format, ReportRow,
};
use distributed_distortion::adversarial::export_bundle;
use distributed_distortion::bounds::{lookup, BOUND_TOLERANCE};
use distributed_distortion::{
    evaluate, family_by_name, hill_climb, sweep, Arbitrary, Generator, Instance, MetricKind,
    RandomInstances,
};

#[derive(Parser)]
#[command(
    name = "distort",
    version,
    about = "Distortion experiments for district voting mechanisms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a mechanism on one instance file and print the report as JSON.
    Eval {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        mechanism: String,
        #[arg(long)]
        objective: String,
        /// Make "arbitrary" choices pseudo-random with this seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Largest ratio over random instances, optionally refined by hill climbing.
    Sweep {
        #[arg(long)]
        mechanism: String,
        #[arg(long)]
        objective: String,
        /// `line`, `euclidean:<dim>` or `graph`.
        #[arg(long, default_value = "line")]
        metric: String,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        /// Hill-climb steps starting from the sweep's witness (line only).
        #[arg(long, default_value_t = 0)]
        hill_climb: usize,
        #[arg(long, default_value_t = 0.05)]
        step_size: f64,
        /// Where to write the witness instance.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Check every registered bound with sweeps and lower-bound families.
    VerifyBounds {
        /// JSON experiment config; defaults to every registered bound.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Write each cell's worst instance here.
        #[arg(long)]
        witness_dir: Option<PathBuf>,
    },
    /// Sampled monotone, subadditive, consistent and single-peaked checks.
    CheckProperties {
        /// Inner objective (`avg`, `pmean:2`, `sumsq`) or objective (`max.pmean:2`).
        #[arg(long)]
        inner: String,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Export a lower-bound family as instance files plus a manifest.
    GenFamily {
        /// `max-max[:x]`, `avg-max[:fib]`, `max-avg[:fib]` or `cardinal-line`.
        #[arg(long)]
        family: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    };
    ExitCode::from(code as u8)
}

fn run(command: Command) -> CliResult<i32> {
    match command {
        Command::Eval {
            instance,
            mechanism,
            objective,
            seed,
        } => {
            let mut mech = parse_mechanism(&mechanism)?;
            if let Some(seed) = seed {
                mech = mech.with_arbitrary(Arbitrary::Seeded(seed));
            }
            let obj = parse_objective(&objective)?;
            let inst = Instance::load(&instance)?;
            let report = evaluate(&mech, &inst, &obj)?;
            print_json(&report)?;
            Ok(exit::OK)
        }
        Command::Sweep {
            mechanism,
            objective,
            metric,
            trials,
            seed,
            hill_climb: steps,
            step_size,
            out,
            format,
        } => {
            let mech = parse_mechanism(&mechanism)?;
            let obj = parse_objective(&objective)?;
            let metric = parse_metric(&metric)?;
            if mech.requires_line() && metric != MetricKind::Line {
                return Err(CliError::Incompatible(format!(
                    "{mech} needs a line metric"
                )));
            }
            let generator = Generator::Random(RandomInstances::with_metric(metric));
            let mut result = sweep(&mech, &obj, &generator, trials, seed)?;
            if steps > 0 {
                let climbed = hill_climb(&mech, &obj, &result.witness, steps, step_size, seed)?;
                if climbed.max_ratio > result.max_ratio {
                    result.max_ratio = climbed.max_ratio;
                    result.witness = climbed.witness;
                }
            }
            let witness_path = match &out {
                Some(path) => {
                    std::fs::write(path, result.witness.to_json())?;
                    path.display().to_string()
                }
                None => String::new(),
            };
            let bound = lookup(&mech, &obj).map_or(f64::INFINITY, |e| e.bound);
            let row = ReportRow {
                mechanism: mech.to_string(),
                objective: obj.to_string(),
                trials,
                max_ratio: result.max_ratio,
                bound,
                within_bound: result.max_ratio <= bound + BOUND_TOLERANCE,
                witness_path,
                seed,
            };
            match format {
                Format::Json => print_json(&row)?,
                Format::Csv => write_rows(&[row], Format::Csv, io::stdout().lock())?,
            }
            Ok(exit::OK)
        }
        Command::VerifyBounds {
            config,
            seed,
            trials,
            out,
            format,
            witness_dir,
        } => {
            let mut cfg = match (&config, seed) {
                (Some(path), _) => ExperimentConfig::load(path)?,
                (None, Some(seed)) => ExperimentConfig::default_with_seed(seed),
                (None, None) => {
                    return Err(CliError::Usage(
                        "--seed is required without --config".into(),
                    ))
                }
            };
            if let Some(seed) = seed {
                cfg.generator.seed = seed;
            }
            if let Some(trials) = trials {
                cfg.generator.trials = trials;
            }
            let rows = verify_bounds(&cfg, witness_dir.as_deref())?;
            let out_cfg = cfg.output.as_ref();
            let format = format.or(out_cfg.map(|o| o.format)).unwrap_or_default();
            let path = out.or_else(|| out_cfg.map(|o| o.path.clone()));
            emit(&rows, format, path.as_deref())?;
            for row in rows.iter().filter(|r| !r.within_bound) {
                eprintln!(
                    "bound violated: {} {} ratio {} > {} ({})",
                    row.mechanism, row.objective, row.max_ratio, row.bound, row.witness_path
                );
            }
            Ok(if rows.iter().all(|r| r.within_bound) {
                exit::OK
            } else {
                exit::FAILED
            })
        }
        Command::CheckProperties {
            inner,
            samples,
            seed,
            format,
        } => {
            let g = parse_inner(&inner)?;
            let reports = check_properties(&g, samples, seed)?;
            match format {
                Format::Json => print_json(&reports)?,
                Format::Csv => {
                    let mut w = io::stdout().lock();
                    writeln!(w, "inner,property,declared,passed")?;
                    for r in &reports {
                        writeln!(w, "{},{},{},{}", r.inner, r.property, r.declared, r.passed)?;
                    }
                }
            }
            let failed = reports.iter().any(|r| r.declared && !r.passed);
            Ok(if failed { exit::FAILED } else { exit::OK })
        }
        Command::GenFamily { family, out } => {
            let fam = family_by_name(&family)?;
            export_bundle(&fam, &out)?;
            println!(
                "{} instances written to {}",
                fam.instances.len(),
                out.display()
            );
            Ok(exit::OK)
        }
    }
}

fn parse_metric(s: &str) -> CliResult<MetricKind> {
    match s {
        "line" => Ok(MetricKind::Line),
        "graph" => Ok(MetricKind::Graph),
        _ => s
            .strip_prefix("euclidean:")
            .and_then(|d| d.parse().ok())
            .map(|dimension| MetricKind::Euclidean { dimension })
            .ok_or_else(|| CliError::Usage(format!("unknown metric '{s}'"))),
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Usage(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn emit(rows: &[ReportRow], format: Format, path: Option<&Path>) -> CliResult<()> {
    match path {
        Some(p) => write_rows(rows, format, BufWriter::new(File::create(p)?)),
        None => write_rows(rows, format, io::stdout().lock()),
    }
}
