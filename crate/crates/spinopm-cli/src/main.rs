//! `spinopm` — spin-noise, coherent-response, SNR, and sensitivity
//! calculations for optically pumped magnetometers.
//!
//! Exit codes: 0 success, 1 usage/configuration error, 2 unstable drift
//! system, 3 validation failure.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::{config_from_str, config_load, RunConfig};
use run::{
    build_pipeline, parse_axis, response_table, sensitivity_table, spectrum_table, sweep_table,
    validation_suite, OutputFormat, OutputTable, RunError,
};
use spinopm::species::ConstantsTable;

/// Configuration reproducing the reference parameter set; used whenever
/// `--config` is omitted.
const BUNDLED_CONFIG: &str = include_str!("../assets/fig3.json");

#[derive(Parser)]
#[command(
    name = "spinopm",
    about = "Spin-projection-noise spectra, RF response, SNR, and magnetic \
             sensitivity of optically pumped alkali-metal magnetometers",
    version
)]
struct Cli {
    /// JSON run configuration; defaults to the bundled reference setup.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Output serialization.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Worker threads for sweeps (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Measured polarimeter noise PSD and its spin/photon decomposition.
    Spectrum,
    /// Spectrum plus the coherent drive response amplitude and phase.
    Response,
    /// Full signal chain: spectrum, response, SNR, and sensitivity.
    Snr,
    /// Alias of `snr`; emphasizes the delta-B column.
    Sensitivity,
    /// Long-format scan over one or more parameter axes.
    Sweep {
        /// Swept axis, repeatable: `name=lo:hi[:n]` or `name=v1,v2,...`.
        /// Axes: p, r_op, detuning_ghz, b_z_g, photon_flux, r_se, r_sd.
        #[arg(long, required = true)]
        axis: Vec<String>,
    },
    /// Cross-check the numerics against brute-force evaluations.
    Validate,
}

fn main() -> ExitCode {
    // clap's default error exit code is 2, which this tool reserves for
    // unstable systems; remap usage errors to 1
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_constants() -> Result<ConstantsTable, RunError> {
    match std::env::var_os("SPINOPM_CONSTANTS") {
        Some(path) => Ok(ConstantsTable::with_overrides(std::path::Path::new(&path))
            .map_err(config::ConfigError::Species)?),
        None => Ok(ConstantsTable::builtin()),
    }
}

fn load_config(cli: &Cli, constants: &ConstantsTable) -> Result<RunConfig, RunError> {
    match &cli.config {
        Some(path) => Ok(config_load(path, constants)?),
        None => Ok(config_from_str(BUNDLED_CONFIG, constants)?),
    }
}

fn emit(cli: &Cli, table: &OutputTable) -> Result<(), RunError> {
    let text = table.render(cli.format.into());
    match &cli.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<(), RunError> {
    if let Some(n) = cli.threads {
        // ignore failure: the global pool may already exist in tests
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let constants = load_constants()?;
    match &cli.command {
        Command::Spectrum => {
            let pipe = build_pipeline(load_config(cli, &constants)?)?;
            emit(cli, &spectrum_table(&pipe)?)
        }
        Command::Response => {
            let pipe = build_pipeline(load_config(cli, &constants)?)?;
            emit(cli, &response_table(&pipe)?)
        }
        Command::Snr | Command::Sensitivity => {
            let pipe = build_pipeline(load_config(cli, &constants)?)?;
            emit(cli, &sensitivity_table(&pipe)?)
        }
        Command::Sweep { axis } => {
            let axes = axis
                .iter()
                .map(|a| parse_axis(a))
                .collect::<Result<Vec<_>, _>>()?;
            let file = load_file_config(cli)?;
            emit(cli, &sweep_table(&file, &axes, &constants)?)
        }
        Command::Validate => {
            let cfg = load_config(cli, &constants)?;
            let checks = validation_suite(&cfg)?;
            let mut failures = 0;
            for c in &checks {
                let verdict = if c.passed() { "PASS" } else { "FAIL" };
                println!(
                    "{verdict} {name}: {measured:.3e} (bound {bound:.1e})",
                    name = c.name,
                    measured = c.measured,
                    bound = c.bound
                );
                if !c.passed() {
                    failures += 1;
                }
            }
            if failures > 0 {
                return Err(RunError::Validation(failures));
            }
            Ok(())
        }
    }
}

fn load_file_config(cli: &Cli) -> Result<config::FileConfig, RunError> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path).map_err(RunError::Io)?,
        None => BUNDLED_CONFIG.to_string(),
    };
    let file: config::FileConfig =
        serde_json::from_str(&text).map_err(config::ConfigError::Json)?;
    Ok(file)
}
