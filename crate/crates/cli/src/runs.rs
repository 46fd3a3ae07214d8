use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use dqpt_core::band::{
    band_amplitude, band_amplitude_oracle, critical_momenta, dtop_trace, jump_sign, pgp_row, ssh_bloch,
    BandQuenchScenario,
};
use dqpt_core::numeric::{chebyshev_roots, chebyshev_u, uniform_grid};
use dqpt_core::quench::{
    critical_times, detect_phase_jumps, detect_rate_peaks, loschmidt_closed, loschmidt_oracle, phase_trace,
    refine_jump, DqptStatus, SpinQuenchScenario,
};
use dqpt_core::spin::verify_cbh_identities;
use dqpt_core::{SpinDirection, SpinJ, Temperature};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Mode, ScenarioConfig};
use crate::error::{CliError, Result};
use crate::output;

/// Rate-function threshold for reporting divergence peaks.
pub const RATE_PEAK_THRESHOLD: f64 = 10.0;
/// Residual above which `verify` fails.
pub const VERIFY_TOL: f64 = 1e-9;
/// Bracket width for bisecting phase jumps; far below any grid step.
pub const REFINE_TOL: f64 = 1e-9;
const ORACLE_SAMPLES: usize = 256;
const PGP_CHUNK: usize = 64;

fn io_err(path: &str) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::io(path, e)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpinCriticalTime {
    pub n: u32,
    pub k: u32,
    pub t_star: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpinCritical {
    pub mode: &'static str,
    pub status: &'static str,
    pub times: Vec<SpinCriticalTime>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpinJump {
    pub t_before: f64,
    pub t_after: f64,
    /// Bisected jump location.
    pub t_refined: f64,
    pub size: f64,
    pub t_star: Option<f64>,
    pub unexplained: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpinReport {
    pub scenario: BTreeMap<String, String>,
    pub dot: f64,
    pub critical: SpinCritical,
    pub jumps: Vec<SpinJump>,
    pub rate_peaks: Vec<f64>,
    pub max_rate: f64,
    pub max_oracle_deviation: f64,
}

fn status_str(s: DqptStatus) -> &'static str {
    match s {
        DqptStatus::Parallel => "parallel",
        DqptStatus::NoDqptPossible => "no DQPT possible",
    }
}

fn spin_critical(mode: Mode, sc: &SpinQuenchScenario, t_max: f64) -> SpinCritical {
    let ct = critical_times(sc, t_max);
    SpinCritical {
        mode: mode.as_str(),
        status: status_str(ct.status),
        times: ct
            .times
            .iter()
            .map(|c| SpinCriticalTime {
                n: c.n,
                k: c.k,
                t_star: c.t_star,
            })
            .collect(),
    }
}

fn sample_indices(n: usize, samples: usize) -> Vec<usize> {
    let stride = n.div_ceil(samples).max(1);
    (0..n).step_by(stride).collect()
}

/// Evolves a spin scenario, writing the trace CSV to `csv`.
pub fn run_spin(cfg: &ScenarioConfig, csv: &mut (impl Write + ?Sized)) -> Result<SpinReport> {
    let sc = cfg.spin_scenario()?;
    let params = cfg.spin_params().expect("spin scenario");
    let times = uniform_grid(cfg.t_max, cfg.t_steps);
    let trace = phase_trace(&sc, &times)?;
    output::write_phase_trace(csv, &trace, params.rate_norm.divisor(sc.spin)).map_err(io_err("trace csv"))?;

    let step = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
    let critical = spin_critical(cfg.mode, &sc, cfg.t_max);
    let jumps = detect_phase_jumps(&trace)
        .iter()
        .map(|j| {
            let refined = refine_jump(&sc, j, REFINE_TOL);
            let t_refined = 0.5 * (refined.t_before + refined.t_after);
            let t_star = critical
                .times
                .iter()
                .map(|c| c.t_star)
                .find(|&t| t >= j.t_before - step && t <= j.t_after + step);
            SpinJump {
                t_before: j.t_before,
                t_after: j.t_after,
                t_refined,
                size: refined.size,
                t_star,
                unexplained: t_star.is_none(),
            }
        })
        .collect();

    let idx = sample_indices(times.len(), ORACLE_SAMPLES);
    let max_oracle_deviation = idx
        .par_iter()
        .map(|&i| loschmidt_oracle(&sc, times[i]).map(|o| (o - trace.amplitude[i]).norm()))
        .collect::<std::result::Result<Vec<_>, _>>()?
        .into_iter()
        .fold(0.0, f64::max);

    Ok(SpinReport {
        scenario: cfg.entries(),
        dot: sc.dot(),
        critical,
        jumps,
        rate_peaks: detect_rate_peaks(&trace, RATE_PEAK_THRESHOLD),
        max_rate: trace.max_rate(),
        max_oracle_deviation,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentumReport {
    pub k_c: f64,
    pub r_final: f64,
    pub tangential: bool,
    pub jump_sign: Option<i32>,
    pub critical_times: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SshCritical {
    pub mode: &'static str,
    pub status: &'static str,
    pub momenta: Vec<MomentumReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SshJump {
    pub t_star: f64,
    pub k_c: f64,
    pub nu_before: f64,
    pub nu_after: f64,
    pub observed: f64,
    /// `sgn(df/dk)` at `k_c`, summed over roots sharing `t_star`.
    pub predicted: Option<i32>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SshReport {
    pub scenario: BTreeMap<String, String>,
    pub k_grid_points: usize,
    pub critical: SshCritical,
    pub jumps: Vec<SshJump>,
    /// Steps of `nu` above 1/2 between evaluated rows with no predicted critical time in between.
    pub unexplained_jumps: Vec<f64>,
    pub skipped_rows: usize,
    pub boundary_only: bool,
    pub warnings: Vec<String>,
    pub max_oracle_deviation: f64,
}

fn ssh_critical(sc: &BandQuenchScenario, t_max: f64) -> SshCritical {
    let momenta: Vec<MomentumReport> = critical_momenta(sc)
        .iter()
        .map(|c| MomentumReport {
            k_c: c.k_c,
            r_final: c.r_final,
            tangential: c.tangential,
            jump_sign: jump_sign(sc, c.k_c).ok(),
            critical_times: c.critical_times(t_max),
        })
        .collect();
    SshCritical {
        mode: Mode::Ssh.as_str(),
        status: if momenta.iter().any(|m| !m.tangential) {
            "critical momenta found"
        } else {
            "no DQPT possible"
        },
        momenta,
    }
}

/// Evolves an SSH scenario, writing the DTOP CSV to `csv` and, if given,
/// the long-format PGP field to `phase_map`.
pub fn run_ssh(cfg: &ScenarioConfig, csv: &mut (impl Write + ?Sized), phase_map: Option<&mut dyn Write>) -> Result<SshReport> {
    let sc = cfg.ssh_scenario()?;
    let trace = dtop_trace(&sc)?;
    output::write_dtop_rows(csv, &trace.rows).map_err(io_err("dtop csv"))?;

    if let Some(w) = phase_map {
        writeln!(w, "{}", output::PGP_HEADER).map_err(io_err("phase map"))?;
        for chunk in sc.t_grid().chunks(PGP_CHUNK) {
            let rows = chunk.par_iter().map(|&t| pgp_row(&sc, t)).collect::<std::result::Result<Vec<_>, _>>()?;
            output::write_pgp_rows(w, &sc, &rows).map_err(io_err("phase map"))?;
        }
    }

    let boundary_only = matches!(sc.temperature(), Temperature::Infinite);
    let predicted: Vec<f64> = sc.critical_times(sc.t_max()).into_iter().map(|(t, _)| t).collect();
    let evaluated: Vec<_> = trace.rows.iter().filter(|r| !r.skipped).collect();
    let unexplained_jumps = if boundary_only {
        Vec::new()
    } else {
        evaluated
            .windows(2)
            .filter(|w| (w[1].nu - w[0].nu).abs() > 0.5)
            .filter(|w| !predicted.iter().any(|&t| t >= w[0].t && t <= w[1].t))
            .map(|w| 0.5 * (w[0].t + w[1].t))
            .collect()
    };

    let mut warnings = Vec::new();
    if boundary_only {
        warnings.push("boundary-only: at infinite temperature nu reduces to the boundary term".to_string());
    }

    let k_idx = sample_indices(sc.k_grid().len(), 64);
    let t_idx = sample_indices(sc.t_grid().len(), 64);
    let cells: Vec<(f64, f64)> = t_idx
        .iter()
        .flat_map(|&i| k_idx.iter().map(move |&j| (i, j)))
        .map(|(i, j)| (sc.k_grid()[j], sc.t_grid()[i]))
        .collect();
    let max_oracle_deviation = cells
        .par_iter()
        .map(|&(k, t)| Ok((band_amplitude(&sc, k, t)? - band_amplitude_oracle(&sc, k, t)?).norm()))
        .collect::<std::result::Result<Vec<f64>, dqpt_core::Error>>()?
        .into_iter()
        .fold(0.0, f64::max);

    Ok(SshReport {
        scenario: cfg.entries(),
        k_grid_points: sc.k_grid().len(),
        critical: ssh_critical(&sc, sc.t_max()),
        jumps: trace
            .jumps
            .iter()
            .map(|j| SshJump {
                t_star: j.t_star,
                k_c: j.k_c,
                nu_before: j.nu_before,
                nu_after: j.nu_after,
                observed: j.observed,
                predicted: j.predicted,
            })
            .collect(),
        unexplained_jumps,
        skipped_rows: trace.rows.iter().filter(|r| r.skipped).count(),
        boundary_only,
        warnings,
        max_oracle_deviation,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum CriticalReport {
    Spin(SpinCritical),
    Ssh(SshCritical),
}

/// Predicted critical times (and momenta) without time evolution.
pub fn run_critical(cfg: &ScenarioConfig) -> Result<CriticalReport> {
    match cfg.mode {
        Mode::Ssh => {
            let sc = cfg.ssh_scenario()?;
            Ok(CriticalReport::Ssh(ssh_critical(&sc, cfg.t_max)))
        }
        Mode::Spin | Mode::TwoLevel => {
            let sc = cfg.spin_scenario()?;
            Ok(CriticalReport::Spin(spin_critical(cfg.mode, &sc, cfg.t_max)))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Anchor {
    pub t: f64,
    pub closed_abs: f64,
    pub oracle_abs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub cases: usize,
    pub tolerance: f64,
    pub max_nonband_deviation: f64,
    pub max_band_deviation: f64,
    pub max_cbh_residual: f64,
    pub max_chebyshev_residual: f64,
    /// Spin-1/2 parallel quench at zero temperature, `t = pi / omega0`.
    pub anchor: Anchor,
    pub passed: bool,
}

enum Case {
    Spin(SpinQuenchScenario, f64),
    Band { mi: f64, mf: f64, temp: Temperature, k: f64, t: f64 },
    Cbh(SpinJ, f64, f64),
}

fn random_temperature(rng: &mut ChaCha8Rng) -> Temperature {
    match rng.gen_range(0..3) {
        0 => Temperature::Zero,
        1 => Temperature::Infinite,
        _ => Temperature::Finite(rng.gen_range(0.1..=10.0)),
    }
}

fn random_direction(rng: &mut ChaCha8Rng) -> Result<SpinDirection> {
    let c: f64 = rng.gen_range(-1.0..=1.0);
    Ok(SpinDirection::new(c.acos(), rng.gen_range(0.0..2.0 * PI))?)
}

/// SSH mass away from the gap closings at `|m| = 1`.
fn random_mass(rng: &mut ChaCha8Rng) -> f64 {
    match rng.gen_range(0..3) {
        0 => rng.gen_range(-3.0..-1.1),
        1 => rng.gen_range(-0.9..0.9),
        _ => rng.gen_range(1.1..3.0),
    }
}

fn draw_cases(seed: u64, cases: usize) -> Result<Vec<Case>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(3 * cases);
    for _ in 0..cases {
        let spin = SpinJ::new(rng.gen_range(1..=12))?;
        let omega0 = rng.gen_range(0.2..=3.0);
        let temp = random_temperature(&mut rng);
        let (b0, b) = (random_direction(&mut rng)?, random_direction(&mut rng)?);
        let t = rng.gen_range(0.0..=20.0) / omega0;
        out.push(Case::Spin(SpinQuenchScenario::new(spin, omega0, temp, b0, b)?, t));

        let (mi, mf) = (random_mass(&mut rng), random_mass(&mut rng));
        let temp = random_temperature(&mut rng);
        let (k, t) = (rng.gen_range(0.0..=PI), rng.gen_range(0.0..=20.0));
        out.push(Case::Band { mi, mf, temp, k, t });

        let spin = SpinJ::new(rng.gen_range(1..=12))?;
        out.push(Case::Cbh(spin, rng.gen_range(0.0..PI), rng.gen_range(0.0..2.0 * PI)));
    }
    Ok(out)
}

fn band_deviation(mi: f64, mf: f64, temp: Temperature, k: f64, t: f64) -> Result<f64> {
    let sc = BandQuenchScenario::new(ssh_bloch(mi, 1.0)?, ssh_bloch(mf, 1.0)?, temp, vec![0.0, k.clamp(1e-3, PI - 1e-3), PI], vec![0.0, 1.0, 2.0])?;
    Ok((band_amplitude(&sc, k, t)? - band_amplitude_oracle(&sc, k, t)?).norm())
}

/// Seeded oracle comparison across every closed form in the library.
pub fn run_verify(seed: u64, cases: usize) -> Result<VerifyReport> {
    if cases == 0 {
        return Err(CliError::Config("invalid value `0` for key `cases`: need at least 1".into()));
    }
    let drawn = draw_cases(seed, cases)?;
    let residuals = drawn
        .par_iter()
        .map(|c| -> Result<(usize, f64)> {
            Ok(match c {
                Case::Spin(sc, t) => (0, (loschmidt_closed(sc, *t) - loschmidt_oracle(sc, *t)?).norm()),
                Case::Band { mi, mf, temp, k, t } => (1, band_deviation(*mi, *mf, *temp, *k, *t)?),
                Case::Cbh(s, th, ph) => (2, verify_cbh_identities(*s, *th, *ph).into_iter().fold(0.0, f64::max)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_of = |kind: usize| residuals.iter().filter(|r| r.0 == kind).map(|r| r.1).fold(0.0, f64::max);

    let max_chebyshev_residual = (1..=24u32)
        .flat_map(|n| chebyshev_roots(n).into_iter().map(move |z| chebyshev_u(n, Complex64::new(z, 0.0)).norm()))
        .fold(0.0, f64::max);

    let anchor_sc =
        SpinQuenchScenario::new(SpinJ::new(1)?, 1.0, Temperature::Zero, SpinDirection::z(), SpinDirection::x())?;
    let anchor = Anchor {
        t: PI,
        closed_abs: loschmidt_closed(&anchor_sc, PI).norm(),
        oracle_abs: loschmidt_oracle(&anchor_sc, PI)?.norm(),
    };

    let mut report = VerifyReport {
        seed,
        cases,
        tolerance: VERIFY_TOL,
        max_nonband_deviation: max_of(0),
        max_band_deviation: max_of(1),
        max_cbh_residual: max_of(2),
        max_chebyshev_residual,
        anchor,
        passed: false,
    };
    report.passed = [
        report.max_nonband_deviation,
        report.max_band_deviation,
        report.max_cbh_residual,
        report.max_chebyshev_residual,
        report.anchor.closed_abs,
        report.anchor.oracle_abs,
    ]
    .iter()
    .all(|&r| r < VERIFY_TOL);
    Ok(report)
}

/// Pretty JSON with a trailing newline.
pub fn to_json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}
