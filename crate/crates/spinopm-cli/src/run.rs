//! Command implementations: the shared physics pipeline, the per-command
//! output tables, the parameter sweep, and the self-validation suite.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;

use spinopm::drift::{assemble_system, DriftSystem};
use spinopm::equilibrium::{
    equal_time_covariance, solve_beta, transverse_variances, CovarianceBlock, SpinTempState,
};
use spinopm::operators::{tensor_matrix, HilbertBasis, LayoutConvention};
use spinopm::optics::{probe_couplings, ProbeCouplings};
use spinopm::oracle::{brute_force_statics, time_domain_psd};
use spinopm::sensing::{
    coherent_response, filter_function, lockin_statistics, snr_and_sensitivity, sql_limit,
    CoherentResponse, DriveSpec, LockinParams, SensingInputs,
};
use spinopm::spectra::{
    auto_grid, integrated_variances, measured_psd, qrt_spectrum, SpectrumTrace,
};
use spinopm::species::{gamma_e, ConstantsTable, HBAR, MU_B};
use spinopm::HalfInt;

use crate::config::{config_from_str, ConfigError, FileConfig, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("drift system is unstable; eigenvalues (1/s):\n{}", format_eigs(.eigenvalues))]
    Unstable { eigenvalues: Vec<Complex64> },
    #[error("equilibrium: {0}")]
    Equilibrium(#[from] spinopm::equilibrium::EquilibriumError),
    #[error("spectra: {0}")]
    Spectra(#[from] spinopm::spectra::SpectraError),
    #[error("sensing: {0}")]
    Sensing(#[from] spinopm::sensing::SensingError),
    #[error("oracle: {0}")]
    Oracle(#[from] spinopm::oracle::OracleError),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad sweep axis `{0}`: {1}")]
    BadAxis(String, String),
    #[error("{0} validation check(s) failed")]
    Validation(usize),
}

fn format_eigs(eigs: &[Complex64]) -> String {
    let mut s = String::new();
    for l in eigs {
        let _ = writeln!(s, "  {:+.6e} {:+.6e}i", l.re, l.im);
    }
    s
}

impl RunError {
    /// Documented process exit code for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Unstable { .. } => 2,
            RunError::Validation(_) => 3,
            _ => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Everything downstream commands need, assembled once per parameter point.
pub struct Pipeline {
    pub cfg: RunConfig,
    pub state: SpinTempState,
    pub system: DriftSystem,
    pub cov: CovarianceBlock,
    pub couplings: ProbeCouplings,
    pub grid: Vec<f64>,
}

pub fn build_pipeline(cfg: RunConfig) -> Result<Pipeline, RunError> {
    let state = solve_beta(cfg.p, cfg.species.nuclear_spin)?;
    let omega0 =
        gamma_e() * cfg.b_z / cfg.species.nuclear_spin.multiplicity() as f64;
    let system = assemble_system(&state, &cfg.rates, omega0, LayoutConvention::Physical);
    if !system.stable {
        return Err(RunError::Unstable {
            eigenvalues: system.eigenvalues.to_vec(),
        });
    }
    let cov = equal_time_covariance(&state, &system.layout);
    let couplings = probe_couplings(&cfg.probe, cfg.species.nuclear_spin);
    let grid = match (cfg.freq_min, cfg.freq_max) {
        (Some(lo), Some(hi)) if hi > lo => {
            let n = cfg.n_points.max(2);
            (0..n)
                .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
                .collect()
        }
        _ => auto_grid(&system, cfg.n_points),
    };
    Ok(Pipeline {
        cfg,
        state,
        system,
        cov,
        couplings,
        grid,
    })
}

impl Pipeline {
    pub fn spectrum_trace(&self) -> Result<SpectrumTrace, RunError> {
        let cart = qrt_spectrum(&self.system, &self.cov, &self.grid)?;
        Ok(measured_psd(&cart, &self.cfg.probe, &self.couplings, self.cfg.n_at)?)
    }

    pub fn response(&self) -> Result<CoherentResponse, RunError> {
        let drive = DriveSpec {
            b0_perp: self.cfg.b0_perp,
            b_angle: self.cfg.b_angle,
            phi: self.cfg.phi,
            nu_drive: self.system.slow_mode_frequency_hz(),
        };
        Ok(coherent_response(&self.system, &drive, &self.couplings, &self.grid)?)
    }

    /// Stretched-state standard-quantum-limit reference for this system.
    pub fn sql_reference(&self) -> f64 {
        let gamma_rate = self
            .system
            .eigenvalues
            .iter()
            .map(|l| l.re.abs())
            .fold(f64::INFINITY, f64::min);
        let f_spin = self.cfg.species.nuclear_spin.to_f64() + 0.5;
        let g_f = self.cfg.species.gamma_f() * HBAR / MU_B;
        sql_limit(gamma_rate, self.cfg.n_at, self.cfg.t_meas, f_spin, g_f)
    }
}

/// A rectangular numeric result table with fixed column names; the common
/// currency of every command's CSV/JSON serialization.
pub struct OutputTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl OutputTable {
    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: serde_json::Map<String, serde_json::Value> = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, &v)| {
                        let jv = if v.is_finite() {
                            serde_json::json!(v)
                        } else {
                            serde_json::Value::Null
                        };
                        (c.clone(), jv)
                    })
                    .collect();
                serde_json::Value::Object(obj)
            })
            .collect();
        serde_json::to_string_pretty(&rows).expect("serializable table")
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        }
    }
}

/// `spectrum`: the measured polarimeter PSD decomposition on the grid.
pub fn spectrum_table(pipe: &Pipeline) -> Result<OutputTable, RunError> {
    let trace = pipe.spectrum_trace()?;
    let rows = (0..trace.freqs.len())
        .map(|k| {
            vec![
                trace.freqs[k],
                trace.s_spin_effective[k],
                trace.s_measured[k],
                trace.psn_floor,
            ]
        })
        .collect();
    Ok(OutputTable {
        columns: ["freq_hz", "S_spin_effective", "S_measured", "psn_floor"]
            .map(String::from)
            .to_vec(),
        rows,
    })
}

/// `response`: spectrum columns plus the coherent response amplitude/phase.
pub fn response_table(pipe: &Pipeline) -> Result<OutputTable, RunError> {
    let trace = pipe.spectrum_trace()?;
    let resp = pipe.response()?;
    let rows = (0..trace.freqs.len())
        .map(|k| {
            vec![
                trace.freqs[k],
                trace.s_spin_effective[k],
                trace.s_measured[k],
                trace.psn_floor,
                resp.ac[k],
                resp.phase_chi[k],
            ]
        })
        .collect();
    Ok(OutputTable {
        columns: [
            "freq_hz",
            "S_spin_effective",
            "S_measured",
            "psn_floor",
            "Ac",
            "phase_chi",
        ]
        .map(String::from)
        .to_vec(),
        rows,
    })
}

/// `snr` / `sensitivity`: the full signal-chain summary per frequency.
pub fn sensitivity_table(pipe: &Pipeline) -> Result<OutputTable, RunError> {
    let trace = pipe.spectrum_trace()?;
    let resp = pipe.response()?;
    let inputs = SensingInputs {
        phi_flux: pipe.cfg.probe.phi,
        g_strength: pipe.couplings.g_strength,
        n_at: pipe.cfg.n_at,
        gamma_f: pipe.cfg.species.gamma_f(),
        b0_perp: pipe.cfg.b0_perp,
        t_meas: pipe.cfg.t_meas,
    };
    let report =
        snr_and_sensitivity(&resp, &trace.s_spin_effective, &inputs, pipe.sql_reference());
    let rows = (0..trace.freqs.len())
        .map(|k| {
            vec![
                trace.freqs[k],
                trace.s_spin_effective[k],
                trace.s_measured[k],
                trace.psn_floor,
                report.ac[k],
                report.phase_chi[k],
                report.snr[k],
                report.delta_b_per_sqrt_hz[k],
                report.sql_reference,
            ]
        })
        .collect();
    Ok(OutputTable {
        columns: [
            "freq_hz",
            "S_spin_effective",
            "S_measured",
            "psn_floor",
            "Ac",
            "phase_chi",
            "snr",
            "delta_B_T_per_sqrtHz",
            "sql_reference",
        ]
        .map(String::from)
        .to_vec(),
        rows,
    })
}

// ---------------------------------------------------------------------------
// Sweeps

/// One swept parameter: a name from the fixed axis vocabulary and its values.
#[derive(Clone, Debug)]
pub struct SweepAxis {
    pub name: String,
    pub values: Vec<f64>,
}

const AXIS_NAMES: &[&str] = &[
    "p",
    "r_op",
    "detuning_ghz",
    "b_z_g",
    "photon_flux",
    "r_se",
    "r_sd",
];

/// Parses `name=lo:hi[:n]` (linear, n defaults to 11) or `name=v1,v2,...`.
pub fn parse_axis(spec: &str) -> Result<SweepAxis, RunError> {
    let bad = |msg: &str| RunError::BadAxis(spec.to_string(), msg.to_string());
    let (name, rest) = spec
        .split_once('=')
        .ok_or_else(|| bad("expected `name=lo:hi[:n]` or `name=v1,v2,...`"))?;
    if !AXIS_NAMES.contains(&name) {
        return Err(bad(&format!(
            "unknown axis; choose one of {}",
            AXIS_NAMES.join(", ")
        )));
    }
    let values = if rest.contains(':') {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() < 2 || parts.len() > 3 {
            return Err(bad("ranges take two or three `:`-separated fields"));
        }
        let lo: f64 = parts[0].parse().map_err(|_| bad("bad range start"))?;
        let hi: f64 = parts[1].parse().map_err(|_| bad("bad range end"))?;
        let n: usize = if parts.len() == 3 {
            parts[2].parse().map_err(|_| bad("bad point count"))?
        } else {
            11
        };
        if n < 2 {
            return Err(bad("ranges need at least two points"));
        }
        (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect()
    } else {
        rest.split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad("bad list value")))
            .collect::<Result<Vec<f64>, _>>()?
    };
    if values.is_empty() {
        return Err(bad("no values"));
    }
    Ok(SweepAxis {
        name: name.to_string(),
        values,
    })
}

fn apply_axis(file: &mut FileConfig, name: &str, value: f64) {
    match name {
        // p and r_op are mutually exclusive specifiers of the same knob,
        // so sweeping one clears the other
        "p" => {
            file.ensemble.p = Some(value);
            file.ensemble.r_op = None;
        }
        "r_op" => {
            file.ensemble.r_op = Some(value);
            file.ensemble.p = None;
        }
        "detuning_ghz" => file.probe.detuning_ghz = value,
        "b_z_g" => file.ensemble.b_z_g = value,
        "photon_flux" => file.probe.photon_flux = value,
        "r_se" => file.ensemble.r_se = value,
        "r_sd" => file.ensemble.r_sd = value,
        _ => unreachable!("axis names are validated at parse time"),
    }
}

/// Long-format sweep over the Cartesian product of the axes: each point is
/// a full sensitivity run, with the axis values prepended as columns.
/// Points run on the rayon pool; the merge order is the deterministic
/// row-major product order, independent of scheduling.
pub fn sweep_table(
    base: &FileConfig,
    axes: &[SweepAxis],
    constants: &ConstantsTable,
) -> Result<OutputTable, RunError> {
    assert!(!axes.is_empty());
    let mut points: Vec<Vec<f64>> = vec![vec![]];
    for axis in axes {
        points = points
            .iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }

    let results: Vec<Result<Vec<Vec<f64>>, RunError>> = points
        .par_iter()
        .map(|point| {
            let mut file = base.clone();
            for (axis, &v) in axes.iter().zip(point) {
                apply_axis(&mut file, &axis.name, v);
            }
            let cfg = revalidate(&file, constants)?;
            let pipe = build_pipeline(cfg)?;
            let table = sensitivity_table(&pipe)?;
            Ok(table
                .rows
                .into_iter()
                .map(|row| {
                    let mut full = point.clone();
                    full.extend(row);
                    full
                })
                .collect())
        })
        .collect();

    let mut columns: Vec<String> = axes.iter().map(|a| a.name.clone()).collect();
    columns.extend(
        [
            "freq_hz",
            "S_spin_effective",
            "S_measured",
            "psn_floor",
            "Ac",
            "phase_chi",
            "snr",
            "delta_B_T_per_sqrtHz",
            "sql_reference",
        ]
        .map(String::from),
    );
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    Ok(OutputTable { columns, rows })
}

/// Round-trips a mutated `FileConfig` through the standard validator.
fn revalidate(file: &FileConfig, constants: &ConstantsTable) -> Result<RunConfig, RunError> {
    // FileConfig is Deserialize-only; serialize by hand via serde_json::Value
    let v = serde_json::json!({
        "species": file.species,
        "ensemble": {
            "density_cm3": file.ensemble.density_cm3,
            "n_at": file.ensemble.n_at,
            "temperature_c": file.ensemble.temperature_c,
            "p": file.ensemble.p,
            "r_op": file.ensemble.r_op,
            "r_se": file.ensemble.r_se,
            "r_sd": file.ensemble.r_sd,
            "b_z_g": file.ensemble.b_z_g,
        },
        "probe": {
            "detuning_ghz": file.probe.detuning_ghz,
            "gamma_fwhm_ghz": file.probe.gamma_fwhm_ghz,
            "photon_flux": file.probe.photon_flux,
            "a_eff_cm2": file.probe.a_eff_cm2,
            "cell_length_cm": file.probe.cell_length_cm,
        },
        "drive": {
            "b0_perp_g": file.drive.b0_perp_g,
            "b_angle_deg": file.drive.b_angle_deg,
            "phi_deg": file.drive.phi_deg,
        },
        "analysis": {
            "freq_min_hz": file.analysis.freq_min_hz,
            "freq_max_hz": file.analysis.freq_max_hz,
            "n_points": file.analysis.n_points,
            "t_meas_s": file.analysis.t_meas_s,
            "t_bw_s": file.analysis.t_bw_s,
        },
    });
    Ok(config_from_str(&v.to_string(), constants)?)
}

// ---------------------------------------------------------------------------
// Validation suite

/// One deterministic self-check: name, achieved figure, allowed bound.
pub struct CheckResult {
    pub name: &'static str,
    pub measured: f64,
    pub bound: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.measured.is_finite() && self.measured < self.bound
    }
}

/// Fast deterministic cross-checks of the core numerics against
/// independent brute-force evaluations. Returns one result per check;
/// the caller prints them and maps any failure to exit code 3.
pub fn validation_suite(cfg: &RunConfig) -> Result<Vec<CheckResult>, RunError> {
    let mut out = Vec::new();
    let spin = cfg.species.nuclear_spin;
    let basis = HilbertBasis::new(spin);
    let a = basis.manifold_a();
    let b = basis.manifold_b();

    // 1. spherical-tensor orthonormality over every allowed (L, M, F, F')
    let mut ops = Vec::new();
    for &f in &[a, b] {
        for &fp in &[a, b] {
            let lmax = ((f + fp).twice() / 2) as i32;
            let lmin = ((f - fp).abs().twice() / 2) as i32;
            for l in lmin..=lmax {
                for m in -l..=l {
                    if let Ok(t) = tensor_matrix(&basis, l, m, f, fp) {
                        ops.push(t.matrix);
                    }
                }
            }
        }
    }
    let mut worst = 0.0_f64;
    for (i, ti) in ops.iter().enumerate() {
        for (j, tj) in ops.iter().enumerate() {
            let tr: Complex64 = ti
                .t()
                .mapv(|x| x.conj())
                .dot(tj)
                .diag()
                .sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((tr.re - target).abs().max(tr.im.abs()));
        }
    }
    out.push(CheckResult {
        name: "tensor-orthonormality",
        measured: worst,
        bound: 1e-12,
    });

    // 2-4. spin-temperature statics vs explicit matrix traces
    let pipe = build_pipeline(cfg.clone())?;
    let rho = pipe.state.rho0.mapv(|x| Complex64::new(x, 0.0));
    let stats = brute_force_statics(&rho, &basis, &pipe.system.layout);
    let mut worst_mp = 0.0_f64;
    for (&(l, tf), &v) in &stats.multipoles {
        let closed = pipe.state.st_multipole(l, HalfInt::from_twice(tf));
        worst_mp = worst_mp.max((closed - v).abs());
    }
    out.push(CheckResult {
        name: "st-multipoles-vs-traces",
        measured: worst_mp,
        bound: 1e-10,
    });

    let (va, vb) = transverse_variances(cfg.p, spin);
    let dv = ((va - stats.var_fx_a).abs() / stats.var_fx_a)
        .max((vb - stats.var_fx_b).abs() / stats.var_fx_b);
    out.push(CheckResult {
        name: "transverse-variances-vs-traces",
        measured: dv,
        bound: 1e-10,
    });

    let mut worst_sigma = 0.0_f64;
    for (idx, &v) in pipe.cov.sigma.indexed_iter() {
        worst_sigma = worst_sigma.max((v - stats.sigma[idx]).abs());
    }
    out.push(CheckResult {
        name: "covariance-vs-traces",
        measured: worst_sigma,
        bound: 1e-10,
    });

    // 5. Wiener-Khinchin sum rule
    let (ia, ib) = integrated_variances(&pipe.system, &pipe.cov);
    let sum_rule = ((ia - va).abs() / va).max((ib - vb).abs() / vb);
    out.push(CheckResult {
        name: "spectrum-sum-rule",
        measured: sum_rule,
        bound: 1e-3,
    });

    // 6. closed-form spectrum vs time-domain route
    let nu_res = pipe.system.slow_mode_frequency_hz();
    let grid: Vec<f64> = (0..13).map(|k| nu_res * (0.4 + 0.1 * k as f64)).collect();
    let closed = qrt_spectrum(&pipe.system, &pipe.cov, &grid)?;
    let time = time_domain_psd(&pipe.system, &pipe.cov, &grid)?;
    let mut worst_psd = 0.0_f64;
    for k in 0..grid.len() {
        worst_psd = worst_psd.max((closed.s_aa[k] - time.s_aa[k]).abs() / closed.s_aa[k]);
        worst_psd = worst_psd.max((closed.s_bb[k] - time.s_bb[k]).abs() / closed.s_bb[k]);
    }
    out.push(CheckResult {
        name: "qrt-vs-time-domain",
        measured: worst_psd,
        bound: 1e-3,
    });

    // 7. lock-in filter integral = pi / (2T)
    let t_meas = 5.0;
    let omega = 2.0 * std::f64::consts::PI * 5e3;
    let t_bw = 120.0 / omega;
    let (x_max, dx) = (4000.0, 0.01);
    let n = (2.0 * x_max / dx) as usize;
    let mut integral = 0.0;
    for k in 0..=n {
        let x = -x_max + k as f64 * dx;
        let omega_p = omega + 2.0 * x / t_meas;
        if omega_p < 0.0 {
            continue;
        }
        let wgt = if k == 0 || k == n { 0.5 } else { 1.0 };
        integral += wgt * filter_function(omega, omega_p, t_meas, t_bw) * (2.0 * dx / t_meas);
    }
    let want = std::f64::consts::PI / (2.0 * t_meas);
    out.push(CheckResult {
        name: "filter-integral",
        measured: (integral - want).abs() / want,
        bound: 1e-3,
    });

    // 8. white-spectrum lock-in variance vs the flat shortcut S'/(4T)
    let nu0 = 5e3;
    let flat = SpectrumTrace {
        freqs: vec![0.0, 2.0 * nu0],
        s_spin_aa: vec![0.0; 2],
        s_spin_bb: vec![0.0; 2],
        s_cross: vec![0.0; 2],
        s_spin_effective: vec![0.0; 2],
        s_measured: vec![1.0, 1.0],
        psn_floor: 0.0,
    };
    let lockin = LockinParams {
        nu: nu0,
        t_meas: 5.0,
        // honor a configured time constant if it keeps the check in the
        // wide-band averaging regime, otherwise use a safe default
        t_bw: cfg
            .t_bw
            .filter(|&tb| tb > 0.0 && tb < 0.5)
            .unwrap_or(150.0 / (2.0 * std::f64::consts::PI * nu0)),
        phi_flux: 1.0,
        g_strength: 1.0,
        n_at: 1.0,
        gamma_f: 1.0,
        b0_perp: 1.0,
    };
    let stats_l = lockin_statistics(&flat, 1.0, &lockin)?;
    out.push(CheckResult {
        name: "lockin-flat-variance",
        measured: (stats_l.var_k_exact - stats_l.var_k_flat).abs() / stats_l.var_k_flat,
        bound: 5e-3,
    });

    Ok(out)
}

