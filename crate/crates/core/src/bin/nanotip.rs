use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use nanotip::io::{parse_config, write_outputs};
use nanotip::scans::{run_scan, Engine, ScanKind};
use nanotip::units::{
    dc_field, intensity_to_peak_field, photon_energy, schottky_effective_work_function,
    two_color_intensity, WorkFunction,
};
use nanotip::{Error, Result, Tip};

#[derive(Parser)]
#[command(name = "nanotip", version, about = "Two-color multiphoton nanotip photoemission scans")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Tdse,
    Dyson,
    Scaling,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Tdse => Engine::Tdse,
            EngineArg::Dyson => Engine::Dyson,
            EngineArg::Scaling => Engine::Scaling,
        }
    }
}

#[derive(clap::Args)]
struct RunArgs {
    /// Configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for scan.csv, summary.json and manifest.json.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides `model.engine`.
    #[arg(long, value_enum)]
    engine: Option<EngineArg>,
    /// Worker threads for scan points.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Intensity sweep with log-log slope fits.
    ScanIntensity(RunArgs),
    /// Polarization sweep with cos-exponent fits and additivity.
    ScanPolarization(RunArgs),
    /// Delay sweep over the pulse overlap.
    ScanDelay(RunArgs),
    /// Sub-cycle delay sweep with fringe period and visibility.
    Fringe(RunArgs),
    /// Derived setup quantities.
    Info {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn read(path: &PathBuf) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io { path: path.clone(), source: e })
}

fn run(args: RunArgs, kind: ScanKind) -> Result<()> {
    let text = read(&args.config)?;
    let mut cfg = parse_config::<f64>(&text)?.config;
    if cfg.kind != kind {
        return Err(Error::Config(format!(
            "config has scan.kind = \"{}\" but the subcommand runs a {} scan",
            cfg.kind.as_str(),
            kind.as_str()
        )));
    }
    if let Some(e) = args.engine {
        cfg.engine = e.into();
    }
    let threads = args.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let result = pool.install(|| run_scan(&cfg))?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    let (_, files) = write_outputs(&result, &args.out)?;
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

fn info(config: Option<PathBuf>) -> Result<()> {
    let (tip, pulses) = match config {
        Some(p) => {
            let cfg = parse_config::<f64>(&read(&p)?)?.config;
            (cfg.tip, cfg.field.pulses)
        }
        None => {
            let cfg = nanotip::scans::ScanConfig::<f64>::polycrystalline(ScanKind::Intensity);
            (Tip::tungsten_default(), cfg.field.pulses)
        }
    };
    let edc = dc_field(&tip)?;
    println!("dc_field_v_per_m = {edc:.4e}");
    match schottky_effective_work_function(tip.nominal_work_function, edc)? {
        WorkFunction::Effective { value, lowering } => {
            println!("schottky_lowering_ev = {lowering:.4}");
            println!("effective_work_function_ev = {value:.4}");
        }
        WorkFunction::BarrierSuppressed { nominal, lowering } => {
            println!("schottky_lowering_ev = {lowering:.4}");
            println!("effective_work_function_ev = suppressed (lowering exceeds {nominal} eV)");
        }
    }
    for p in &pulses {
        println!("photon_energy_ev.{} = {:.4}", p.label, photon_energy(p.wavelength)?);
        println!(
            "peak_field_v_per_nm.{} = {:.4}",
            p.label,
            intensity_to_peak_field(p.peak_intensity)?
        );
    }
    if pulses.len() == 2 {
        let (a, b) = if pulses[0].wavelength > pulses[1].wavelength {
            (&pulses[0], &pulses[1])
        } else {
            (&pulses[1], &pulses[0])
        };
        println!(
            "two_color_intensity_w_cm2 = {:.4e}",
            two_color_intensity(a.peak_intensity, b.peak_intensity)
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::ScanIntensity(a) => run(a, ScanKind::Intensity),
        Command::ScanPolarization(a) => run(a, ScanKind::Polarization),
        Command::ScanDelay(a) => run(a, ScanKind::Delay),
        Command::Fringe(a) => run(a, ScanKind::Fringe),
        Command::Info { config } => info(config),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.code(), e.to_string().replace('\n', " "));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
