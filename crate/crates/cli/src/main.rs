use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use edgeshift::config::{parse_config, ConfigError, Experiment, Precision};
use edgeshift::pipeline::{run_bands, run_bounds, run_expand, run_inclusion, run_lower, run_spectrum};
use edgeshift::report::{
    write_bands_csv, write_bounds_csv, write_inclusion_csv, write_lower_csv, write_spectrum_csv, ExpansionRecord,
    HatRecord,
};
use edgeshift::verify::run_all;
use edgeshift::{Dd, Error, Real};

#[derive(Parser)]
#[command(name = "edgeshift", version, about = "Spectral edge expansions for weakly disordered periodic operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment description (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Band functions over the Brillouin zone.
    Bands(Common),
    /// Edge expansion at the band minimum.
    Expand(Common),
    /// Cell-problem lower bound over eps.
    Lower(Common),
    /// Supercell spectra of periodic realizations.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Also check sampled realizations against the band approximation.
        #[arg(long)]
        inclusion: bool,
    },
    /// Upper bound, lower bound and enumerated bottom side by side.
    Bounds(Common),
    /// Acceptance suite on built-in examples.
    Verify {
        /// Directory for the text report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Config(ConfigError),
    Core(Error),
    Io(String),
    Acceptance(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Core(e) if e.is_input_error() => 2,
            Failure::Core(e) if e.is_assumption_failure() => 3,
            Failure::Core(_) | Failure::Io(_) => 4,
            Failure::Acceptance(_) => 5,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Config(e) => e.to_string(),
            Failure::Core(e) => e.to_string(),
            Failure::Io(m) | Failure::Acceptance(m) => m.clone(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn load(common: &Common) -> Result<Experiment, Failure> {
    let mut cfg = parse_config(&common.config).map_err(Failure::Config)?;
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.build().map_err(Failure::Config)
}

fn bands<T: Real>(exp: &Experiment) -> Result<(), Failure> {
    let band = run_bands::<T>(exp)?;
    let mut w = create(&exp.output_dir, "bands.csv")?;
    write_bands_csv(&mut w, &band)?;
    println!(
        "theta0 = {:.12e}, Lambda0 = {:.15e}, multiplicity {}, gap at theta0 {:.6e}, uniform gap {:.6e}",
        band.theta0.to_f64_lossy(),
        band.lambda0.to_f64_lossy(),
        band.multiplicity,
        band.gap_at_theta0.to_f64_lossy(),
        band.uniform_gap.to_f64_lossy()
    );
    Ok(())
}

fn expand_cmd<T: Real>(exp: &Experiment) -> Result<(), Failure> {
    let band = run_bands::<T>(exp)?;
    let e = run_expand(exp, &band)?;
    let record = ExpansionRecord::from_expansion(&e);
    let mut w = create(&exp.output_dir, "expansion.json")?;
    serde_json::to_writer_pretty(&mut w, &record).map_err(|e| Failure::Io(e.to_string()))?;
    writeln!(w)?;
    println!(
        "theta0 = {:.12e}\nLambda0 = {:.15e}\ni0 = {} of {}\ns* = {}\nLambda1 = {:.15e}\nLambda2 = {:.15e}\n|psi1|^2 = {:.15e}\ngap at theta0 = {:.15e}",
        record.theta0,
        record.lambda0,
        record.i0,
        record.multiplicity,
        record.s_star,
        record.lambda1,
        record.lambda2,
        record.psi1_norm_sq,
        record.gap_at_theta0
    );
    for warning in &record.warnings {
        eprintln!("warning: {warning}");
    }
    Ok(())
}

fn lower<T: Real>(exp: &Experiment) -> Result<(), Failure> {
    let band = run_bands::<T>(exp)?;
    let e = run_expand(exp, &band)?;
    let out = run_lower(exp, &e)?;
    let hat = HatRecord::from_problem(&out.hat);
    let mut w = create(&exp.output_dir, "lower.csv")?;
    write_lower_csv(&mut w, &hat, &out.rows)?;
    println!(
        "b1 = ({:.6e}, {:.6e}), hat Lambda0 = {:.15e}, hat Lambda2 = {:.15e}, largest inferred C = {:.6e}",
        hat.b1_left,
        hat.b1_right,
        hat.hat_lambda0,
        hat.hat_lambda2,
        out.max_inferred_c.to_f64_lossy()
    );
    Ok(())
}

fn spectrum<T: Real>(exp: &Experiment, inclusion: bool) -> Result<(), Failure> {
    let bottoms = run_spectrum::<T>(exp)?;
    let mut w = create(&exp.output_dir, "spectrum.csv")?;
    write_spectrum_csv(&mut w, &bottoms, exp.sweeps.n_bands)?;
    for b in &bottoms {
        println!(
            "eps = {}: inf estimate {:.15e} at [{}]",
            b.eps.to_f64_lossy(),
            b.inf_estimate.to_f64_lossy(),
            b.table[b.argmin].config.label()
        );
    }
    if inclusion {
        let band = run_bands::<T>(exp)?;
        let reports = run_inclusion(exp, &band)?;
        let mut w = create(&exp.output_dir, "inclusion.csv")?;
        write_inclusion_csv(&mut w, &reports)?;
        for r in &reports {
            println!("eps = {}: empirical C = {:.6e} over {} eigenvalues", r.eps, r.empirical_c, r.eigenvalues_checked);
        }
    }
    Ok(())
}

fn bounds<T: Real>(exp: &Experiment) -> Result<(), Failure> {
    let report = run_bounds::<T>(exp)?;
    let mut w = create(&exp.output_dir, "bounds.csv")?;
    write_bounds_csv(&mut w, &report)?;
    let summary = report.summary();
    create(&exp.output_dir, "bounds.txt")?.write_all(summary.as_bytes())?;
    print!("{summary}");
    if report.all_passed() {
        Ok(())
    } else {
        Err(Failure::Acceptance("bounds checks failed".into()))
    }
}

fn verify(out: Option<PathBuf>) -> Result<(), Failure> {
    let outcomes = run_all();
    let mut text = String::new();
    for o in &outcomes {
        text.push_str(&o.line());
        text.push('\n');
        for d in &o.details {
            text.push_str(&format!("    {d}\n"));
        }
    }
    print!("{text}");
    if let Some(dir) = out {
        create(&dir, "verify.txt")?.write_all(text.as_bytes())?;
    }
    let failed: Vec<String> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id.to_string()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Acceptance(format!("failed criteria: {}", failed.join(", "))))
    }
}

/// Leaves `<command>.FAILED` next to any partial output.
fn marked(exp: &Experiment, command: &str, result: Result<(), Failure>) -> Result<(), Failure> {
    if let Err(f) = &result {
        if let Ok(mut w) = create(&exp.output_dir, &format!("{command}.FAILED")) {
            let _ = writeln!(w, "exit code {}: {}", f.code(), f.message());
        }
    }
    result
}

/// Runs `f` in the configured precision.
macro_rules! dispatch {
    ($exp:expr, $name:expr, $f:ident $(, $arg:expr)*) => {
        marked(
            &$exp,
            $name,
            match $exp.precision {
                Precision::F64 => $f::<f64>(&$exp $(, $arg)*),
                Precision::Dd => $f::<Dd>(&$exp $(, $arg)*),
            },
        )
    };
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Verify { out } => verify(out),
        Command::Bands(c) => {
            let exp = load(&c)?;
            dispatch!(exp, "bands", bands)
        }
        Command::Expand(c) => {
            let exp = load(&c)?;
            dispatch!(exp, "expand", expand_cmd)
        }
        Command::Lower(c) => {
            let exp = load(&c)?;
            dispatch!(exp, "lower", lower)
        }
        Command::Spectrum { common, inclusion } => {
            let exp = load(&common)?;
            dispatch!(exp, "spectrum", spectrum, inclusion)
        }
        Command::Bounds(c) => {
            let exp = load(&c)?;
            dispatch!(exp, "bounds", bounds)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("EDGESHIFT_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: cannot set thread count: {e}");
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
