use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use supmeas_core::experiments::{
    lemma41_csv, lemma41_trials, run_theorem1, verify_lemma41, ExperimentConfig, Lemma41Trial,
};
use supmeas_core::geometry::bodyfile::read_body;
use supmeas_core::geometry::{hausdorff_bracket, HausdorffOptions};
use supmeas_core::measures::{extract_support_measures, read_measure, save_measure};
use supmeas_core::metric::{coarse_bounded_lipschitz, CoarseOptions};
use supmeas_core::optimality::{tightness_report, TightnessOptions};
use supmeas_core::Error;

const EXIT_FAILED: u8 = 1;
const EXIT_ASSERTION: u8 = 2;
const EXIT_USAGE: u8 = 64;
const SEED_ENV: &str = "SUPMEAS_SEED";

/// Support measures of convex bodies: extraction, bounded-Lipschitz
/// distances and Hölder continuity experiments.
#[derive(Parser)]
#[command(name = "supmeas", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Experiment or body config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed; falls back to the config, then to $SUPMEAS_SEED, then to 1.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Shell samples per body.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Atom cap for the distance computation.
    #[arg(long, global = true, default_value_t = 4000)]
    max_atoms: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Extract Λ_0 … Λ_{n-1} of a body; with --out PREFIX writes
    /// PREFIX<i>.msr, and prints the masses.
    Measure { body: PathBuf },
    /// Bounded-Lipschitz distance between two measure files.
    Dbl { a: PathBuf, b: PathBuf },
    /// Certified Hausdorff bracket between two bodies.
    Hausdorff { k: PathBuf, l: PathBuf },
    /// Coupling inequality for parallel measures, for two bodies or for
    /// randomized trials.
    Lemma41 {
        k: Option<PathBuf>,
        l: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        /// Run this many randomized trials instead of one comparison.
        #[arg(long, conflicts_with_all = ["k", "l"])]
        trials: Option<u64>,
        /// Fraction of trials that must hold.
        #[arg(long, default_value_t = 0.95)]
        pass_rate: f64,
    },
    /// Perturbation ladder with exponent fits (needs --config).
    Theorem1,
    /// Cap-cut tightness table.
    Tightness {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        i: usize,
        #[arg(long, value_delimiter = ',', default_value = "0.3,0.2,0.1,0.05")]
        grid: Vec<f64>,
    },
}

enum Outcome {
    Pass,
    Violated,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return ExitCode::SUCCESS;
            }
            eprintln!("\n{}", Cli::command().render_long_help());
            return ExitCode::from(EXIT_USAGE);
        }
    };
    if let Some(w) = cli.common.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build_global() {
            eprintln!("supmeas: {e}");
            return ExitCode::from(EXIT_FAILED);
        }
    }
    match run(&cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Violated) => ExitCode::from(EXIT_ASSERTION),
        Err(e) => {
            eprintln!("supmeas: {e}");
            ExitCode::from(EXIT_FAILED)
        }
    }
}

fn env_seed() -> Result<Option<u64>, Error> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{SEED_ENV}={v} is not a u64"))),
        Err(_) => Ok(None),
    }
}

fn seed(common: &Common, from_config: Option<u64>) -> Result<u64, Error> {
    if let Some(s) = common.seed.or(from_config) {
        return Ok(s);
    }
    Ok(env_seed()?.unwrap_or(1))
}

fn emit(common: &Common, text: &str) -> Result<(), Error> {
    match &common.out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn json<T: Serialize>(v: &T) -> Result<String, Error> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| Error::Config(e.to_string()))
}

fn coarse(common: &Common) -> CoarseOptions {
    CoarseOptions {
        max_atoms: common.max_atoms,
        ..CoarseOptions::default()
    }
}

fn run(cli: &Cli) -> Result<Outcome, Error> {
    let c = &cli.common;
    match &cli.command {
        Command::Measure { body } => measure(c, body),
        Command::Dbl { a, b } => dbl(c, a, b),
        Command::Hausdorff { k, l } => hausdorff(c, k, l),
        Command::Lemma41 {
            k,
            l,
            rho,
            trials,
            pass_rate,
        } => match (k, l, trials) {
            (_, _, Some(t)) => lemma41_random(c, *t, *pass_rate),
            (Some(k), Some(l), None) => lemma41_pair(c, k, l, *rho),
            _ => Err(Error::Config("lemma41 needs two bodies or --trials".into())),
        },
        Command::Theorem1 => theorem1(c),
        Command::Tightness { n, i, grid } => tightness(c, *n, *i, grid),
    }
}

#[derive(Serialize)]
struct MassRow {
    index: usize,
    mass: f64,
    stderr: f64,
    atoms: usize,
}

fn measure(c: &Common, body: &Path) -> Result<Outcome, Error> {
    let k = read_body(body)?;
    let fam = extract_support_measures(&k, c.samples.unwrap_or(100_000), seed(c, None)?)?;
    let masses = fam.masses();
    let se = fam.mass_stderrs();
    let rows: Vec<MassRow> = (0..k.dim())
        .map(|i| MassRow {
            index: i,
            mass: masses[i],
            stderr: se[i],
            atoms: fam.lambda(i).len(),
        })
        .collect();
    if let Some(prefix) = &c.out {
        for i in 0..k.dim() {
            let mut p = prefix.clone().into_os_string();
            p.push(format!("{i}.msr"));
            save_measure(fam.lambda(i), Path::new(&p))?;
        }
    }
    let text = match c.format {
        Some(Format::Json) => json(&rows)?,
        _ => {
            let mut s = String::from("# supmeas masses v1\nindex,mass,stderr,atoms\n");
            for r in &rows {
                s.push_str(&format!("{},{},{},{}\n", r.index, r.mass, r.stderr, r.atoms));
            }
            s
        }
    };
    // the prefix names the measure files; the summary goes to stdout
    std::io::stdout().write_all(text.as_bytes())?;
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct DblRow {
    dbl: f64,
    coarsening_error: f64,
    duality_gap: f64,
    atoms: usize,
}

fn dbl(c: &Common, a: &Path, b: &Path) -> Result<Outcome, Error> {
    let mu = read_measure(a)?;
    let nu = read_measure(b)?;
    let d = coarse_bounded_lipschitz(&mu, &nu, &coarse(c))?;
    let row = DblRow {
        dbl: d.value(),
        coarsening_error: d.coarsening_error,
        duality_gap: d.report.duality_gap,
        atoms: d.fine_atoms,
    };
    let text = match c.format {
        None => format!("{:?}\n", row.dbl),
        Some(Format::Csv) => format!(
            "dbl,coarsening_error,duality_gap,atoms\n{},{},{},{}\n",
            row.dbl, row.coarsening_error, row.duality_gap, row.atoms
        ),
        Some(Format::Json) => json(&row)?,
    };
    emit(c, &text)?;
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct HausdorffRow {
    lo: f64,
    hi: f64,
}

fn hausdorff(c: &Common, k: &Path, l: &Path) -> Result<Outcome, Error> {
    let b = hausdorff_bracket(&read_body(k)?, &read_body(l)?, HausdorffOptions::default())?;
    let row = HausdorffRow { lo: b.lo, hi: b.hi };
    let text = match c.format {
        None => format!("{:?}\n", row.hi),
        Some(Format::Csv) => format!("lo,hi\n{},{}\n", row.lo, row.hi),
        Some(Format::Json) => json(&row)?,
    };
    emit(c, &text)?;
    Ok(Outcome::Pass)
}

const LEMMA41_SAMPLES: usize = 1500;

fn lemma41_pair(c: &Common, k: &Path, l: &Path, rho: f64) -> Result<Outcome, Error> {
    let r = verify_lemma41(
        &read_body(k)?,
        &read_body(l)?,
        rho,
        c.samples.unwrap_or(LEMMA41_SAMPLES),
        seed(c, None)?,
        &coarse(c),
    )?;
    let holds = r.holds;
    let trial = [Lemma41Trial {
        trial: 0,
        report: Some(r),
        error: None,
    }];
    let text = match c.format {
        Some(Format::Json) => json(&trial[0].report)?,
        _ => lemma41_csv(&trial),
    };
    emit(c, &text)?;
    Ok(if holds { Outcome::Pass } else { Outcome::Violated })
}

fn lemma41_random(c: &Common, count: u64, pass_rate: f64) -> Result<Outcome, Error> {
    let trials = lemma41_trials(
        count,
        c.samples.unwrap_or(LEMMA41_SAMPLES),
        seed(c, None)?,
        &coarse(c),
    );
    let held = trials
        .iter()
        .filter(|t| t.report.as_ref().is_some_and(|r| r.holds))
        .count();
    let text = match c.format {
        Some(Format::Json) => json(&trials)?,
        _ => lemma41_csv(&trials),
    };
    emit(c, &text)?;
    eprintln!("supmeas: inequality held in {held} of {count} trials");
    Ok(if held as f64 >= pass_rate * count as f64 {
        Outcome::Pass
    } else {
        Outcome::Violated
    })
}

fn theorem1(c: &Common) -> Result<Outcome, Error> {
    let path = c
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("theorem1 needs --config".into()))?;
    let mut cfg = ExperimentConfig::read(path)?;
    if let Some(n) = c.samples {
        cfg.samples = n;
    }
    if cfg.max_atoms.is_none() {
        cfg.max_atoms = Some(c.max_atoms);
    }
    let report = run_theorem1(&cfg, seed(c, cfg.seed)?)?;
    for r in &report.records {
        eprintln!("supmeas: step {} took {:.1} s", r.step, r.wall_seconds);
    }
    let text = match c.format {
        Some(Format::Json) => report.to_json()?,
        _ => report.to_csv(),
    };
    emit(c, &text)?;
    Ok(if report.passed() {
        Outcome::Pass
    } else {
        Outcome::Violated
    })
}

fn tightness(c: &Common, n: usize, i: usize, grid: &[f64]) -> Result<Outcome, Error> {
    let opts = TightnessOptions {
        samples: c.samples.unwrap_or(TightnessOptions::default().samples),
        seed: seed(c, None)?,
        coarse: coarse(c),
        ..TightnessOptions::default()
    };
    let report = tightness_report(n, i, grid, &opts)?;
    let text = match c.format {
        Some(Format::Json) => json(&report)?,
        _ => report.to_csv(),
    };
    emit(c, &text)?;
    eprintln!("supmeas: fitted exponent {}", report.slope);
    Ok(if report.rows.iter().all(|r| r.dominates_lower_bound()) {
        Outcome::Pass
    } else {
        Outcome::Violated
    })
}
