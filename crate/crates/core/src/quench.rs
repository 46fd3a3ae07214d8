//! Sudden quenches of a thermal spin-j paramagnet, `omega0 B0.J -> omega0 B.J`.
//!
//! The Loschmidt amplitude `G(t) = Tr[rho(0) e^{-iHt}]` only depends on the
//! overlap `B0.B`, the temperature and `omega0 t`. The closed form is
//! `U_{2j}(z) / Z_j` with
//! `z = cosh(b/2) cos(omega0 t/2) + i sinh(b/2) sin(omega0 t/2) B0.B`,
//! `b = beta omega0`. Everything here is evaluated in terms of
//! `q = exp(-b/2)`, which stays in `[0, 1]` for every temperature including
//! the two limits.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::{
    chebyshev_roots, chebyshev_u_scaled, evolve_unitary, wrap_to_pi, Angle,
};
use crate::spin::{gibbs_state, spin_hamiltonian, SpinDirection, SpinJ, Temperature};

/// `|B0.B|` below this counts as a parallel quench.
pub const PARALLEL_TOL: f64 = 1e-12;
/// `|G|` below this makes `arg G` ill-conditioned.
pub const DQPT_ADJACENT_TOL: f64 = 1e-9;
/// Folded consecutive `theta_g` differences above this are reported as jumps.
pub const JUMP_THRESHOLD: f64 = PI / 2.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinQuenchScenario {
    pub spin: SpinJ,
    pub omega0: f64,
    pub temperature: Temperature,
    pub dir_initial: SpinDirection,
    pub dir_final: SpinDirection,
}

impl SpinQuenchScenario {
    pub fn new(
        spin: SpinJ,
        omega0: f64,
        temperature: Temperature,
        dir_initial: SpinDirection,
        dir_final: SpinDirection,
    ) -> Result<Self> {
        if !(omega0 > 0.0) || !omega0.is_finite() {
            return Err(Error::invalid("omega0", format!("{omega0} must be positive")));
        }
        Ok(Self {
            spin,
            omega0,
            temperature,
            dir_initial,
            dir_final,
        })
    }

    /// Two-level system `R R0.sigma -> R R.sigma`, i.e. spin-1/2 with `omega0 = 2R`.
    pub fn two_level(
        r: f64,
        temperature: Temperature,
        dir_initial: SpinDirection,
        dir_final: SpinDirection,
    ) -> Result<Self> {
        Self::new(SpinJ::new(1)?, 2.0 * r, temperature, dir_initial, dir_final)
    }

    /// `B0.B`.
    pub fn dot(&self) -> f64 {
        self.dir_initial.dot(self.dir_final)
    }

    pub fn is_parallel(&self) -> bool {
        parallel_defect(self).abs() < PARALLEL_TOL
    }

    /// Projects the final direction onto the plane orthogonal to the initial
    /// one, producing an exactly parallel quench.
    pub fn orthogonalize(&self) -> Result<Self> {
        let b0 = self.dir_initial.unit_vector();
        let b = self.dir_final.unit_vector();
        let d = self.dot();
        let v = [b[0] - d * b0[0], b[1] - d * b0[1], b[2] - d * b0[2]];
        let dir_final = SpinDirection::from_vector(v)
            .map_err(|_| Error::invalid("dir_final", "collinear with the initial field"))?;
        Ok(Self { dir_final, ..*self })
    }

    /// `exp(-beta omega0 / 2)`.
    fn q(&self) -> f64 {
        self.temperature.boltzmann(self.omega0 / 2.0)
    }

    /// `Z_j exp(-beta j omega0) = sum_{l=0}^{2j} q^{2l}`.
    fn shifted_partition(&self) -> f64 {
        let q2 = self.q() * self.q();
        (0..=self.spin.twice_j()).map(|l| q2.powi(l as i32)).sum()
    }

    /// Thermal mean of `m` for the initial Hamiltonian, `-j` at zero temperature.
    fn mean_m(&self) -> f64 {
        let q2 = self.q() * self.q();
        let j = self.spin.j();
        let (num, den) = (0..=self.spin.twice_j()).fold((0.0, 0.0), |(n, d), l| {
            let w = q2.powi(l as i32);
            (n + (f64::from(l) - j) * w, d + w)
        });
        num / den
    }
}

/// `B0.B`; zero exactly when every initial eigenstate has `<psi_m|H|psi_m> = 0`.
pub fn parallel_defect(sc: &SpinQuenchScenario) -> f64 {
    sc.dot()
}

/// The `(1/2, 0)` representation scalar `z`, stored as `reduced / scale` with
/// `scale = 2 exp(-beta omega0 / 2)` so that the zero-temperature case
/// (`scale = 0`) stays finite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZParameter {
    pub reduced: Complex64,
    pub scale: f64,
}

impl ZParameter {
    /// `z` itself; infinite at zero temperature.
    pub fn value(&self) -> Complex64 {
        self.reduced / self.scale
    }

    /// `z / |z|`, finite at every temperature.
    pub fn direction(&self) -> Complex64 {
        self.reduced / self.reduced.norm()
    }
}

pub fn z_parameter(sc: &SpinQuenchScenario, t: f64) -> ZParameter {
    let q = sc.q();
    let q2 = q * q;
    let (s, c) = (sc.omega0 * t / 2.0).sin_cos();
    ZParameter {
        reduced: Complex64::new((1.0 + q2) * c, (1.0 - q2) * s * sc.dot()),
        scale: 2.0 * q,
    }
}

/// `U_{2j}(z) / Z_j` via the scaled Chebyshev recurrence.
pub fn loschmidt_closed(sc: &SpinQuenchScenario, t: f64) -> Complex64 {
    if t == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let z = z_parameter(sc, t);
    let n = sc.spin.twice_j();
    let v = chebyshev_u_scaled(n, z.reduced, z.scale);
    v / (2f64.powi(n as i32) * sc.shifted_partition())
}

/// `Tr[rho(0) exp(-iHt)]` from explicit matrices.
pub fn loschmidt_oracle(sc: &SpinQuenchScenario, t: f64) -> Result<Complex64> {
    let h0 = spin_hamiltonian(sc.spin, sc.omega0, sc.dir_initial)?;
    let h = spin_hamiltonian(sc.spin, sc.omega0, sc.dir_final)?;
    let rho = gibbs_state(&h0, sc.temperature)?.rho;
    let u = evolve_unitary(&h, t);
    Ok(rho.expectation(u.as_matrix()))
}

/// `theta_d(t) = -Tr[rho(0) H] t = -<m> omega0 t B0.B`.
pub fn dynamical_phase(sc: &SpinQuenchScenario, t: f64) -> f64 {
    -sc.mean_m() * sc.omega0 * t * sc.dot()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometricPhase {
    pub angle: Angle,
    /// `|G| < 1e-9`: the argument is ill-conditioned.
    pub dqpt_adjacent: bool,
}

pub fn geometric_phase(sc: &SpinQuenchScenario, t: f64) -> GeometricPhase {
    let g = loschmidt_closed(sc, t);
    geometric_from(g, dynamical_phase(sc, t))
}

fn geometric_from(g: Complex64, theta_d: f64) -> GeometricPhase {
    GeometricPhase {
        angle: Angle::wrapped(Angle::arg(g).value() - theta_d),
        dqpt_adjacent: g.norm() < DQPT_ADJACENT_TOL,
    }
}

/// Normalization `L` of the rate function `-ln|G|^2 / L`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RateNorm {
    #[default]
    One,
    TwoJ,
    Dim,
}

impl RateNorm {
    pub fn divisor(self, spin: SpinJ) -> f64 {
        match self {
            RateNorm::One => 1.0,
            RateNorm::TwoJ => f64::from(spin.twice_j()),
            RateNorm::Dim => spin.dim() as f64,
        }
    }
}

/// `-ln|G|^2`; `+inf` when `G` vanishes exactly.
pub fn rate_from_amplitude(g: Complex64) -> f64 {
    let echo = g.norm_sqr();
    if echo == 0.0 {
        f64::INFINITY
    } else {
        0.0 - echo.ln()
    }
}

pub fn rate_function(sc: &SpinQuenchScenario, t: f64) -> f64 {
    rate_from_amplitude(loschmidt_closed(sc, t))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticalTime {
    /// Half-period index: `t* = (2/omega0)(n pi + arccos(z_k / cosh(b/2)))`.
    pub n: u32,
    /// Chebyshev root index, `1..=2j`.
    pub k: u32,
    pub t_star: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DqptStatus {
    Parallel,
    NoDqptPossible,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriticalTimes {
    pub status: DqptStatus,
    pub times: Vec<CriticalTime>,
}

/// Zeros of the Loschmidt amplitude up to `t_max`, ascending.
///
/// For a parallel quench `z = cosh(b/2) cos(omega0 t/2)` is real and sweeps
/// every root `z_k = cos(k pi/(2j+1))` once per half period, at
/// `omega0 t/2 = n pi + arccos(z_k / cosh(b/2))`.
pub fn critical_times(sc: &SpinQuenchScenario, t_max: f64) -> CriticalTimes {
    if !sc.is_parallel() {
        return CriticalTimes {
            status: DqptStatus::NoDqptPossible,
            times: Vec::new(),
        };
    }
    let q = sc.q();
    let sech = 2.0 * q / (1.0 + q * q);
    let offsets: Vec<f64> = chebyshev_roots(sc.spin.twice_j())
        .into_iter()
        .map(|zk| (zk * sech).clamp(-1.0, 1.0).acos())
        .collect();
    let mut times = Vec::new();
    for n in 0u32.. {
        let base = f64::from(n) * PI;
        if 2.0 * base / sc.omega0 > t_max {
            break;
        }
        for (i, off) in offsets.iter().enumerate() {
            let t_star = 2.0 * (base + off) / sc.omega0;
            if t_star <= t_max {
                times.push(CriticalTime {
                    n,
                    k: i as u32 + 1,
                    t_star,
                });
            }
        }
    }
    times.sort_by(|a, b| a.t_star.total_cmp(&b.t_star));
    CriticalTimes {
        status: DqptStatus::Parallel,
        times,
    }
}

/// Time series of a non-band quench.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseTrace {
    pub times: Vec<f64>,
    pub amplitude: Vec<Complex64>,
    /// Linear in `t`, never folded.
    pub theta_d: Vec<f64>,
    pub theta_g: Vec<Angle>,
    pub rate: Vec<f64>,
    pub dqpt_adjacent: Vec<bool>,
}

impl PhaseTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_rate(&self) -> f64 {
        self.rate.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Evaluates the closed-form amplitude and its phase split on `times`.
pub fn phase_trace(sc: &SpinQuenchScenario, times: &[f64]) -> Result<PhaseTrace> {
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("times", "grid must be strictly increasing"));
    }
    if times.iter().any(|&t| !(t >= 0.0)) {
        return Err(Error::invalid("times", "grid must start at t >= 0"));
    }
    let rows: Vec<(Complex64, f64, GeometricPhase)> = times
        .par_iter()
        .map(|&t| {
            let g = loschmidt_closed(sc, t);
            let d = dynamical_phase(sc, t);
            (g, d, geometric_from(g, d))
        })
        .collect();
    Ok(PhaseTrace {
        times: times.to_vec(),
        amplitude: rows.iter().map(|r| r.0).collect(),
        theta_d: rows.iter().map(|r| r.1).collect(),
        theta_g: rows.iter().map(|r| r.2.angle).collect(),
        rate: rows.iter().map(|r| rate_from_amplitude(r.0)).collect(),
        dqpt_adjacent: rows.iter().map(|r| r.2.dqpt_adjacent).collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseJump {
    pub t_before: f64,
    pub t_after: f64,
    /// Folded difference `theta_g(after) - theta_g(before)`.
    pub size: f64,
}

pub fn detect_phase_jumps(trace: &PhaseTrace) -> Vec<PhaseJump> {
    trace
        .times
        .windows(2)
        .zip(trace.theta_g.windows(2))
        .filter_map(|(t, g)| {
            let size = wrap_to_pi(g[1].value() - g[0].value());
            (size.abs() > JUMP_THRESHOLD).then_some(PhaseJump {
                t_before: t[0],
                t_after: t[1],
                size,
            })
        })
        .collect()
}

/// Offset outside a refined bracket at which the jump size is measured; an
/// endpoint can land on the zero of the amplitude, where the phase is noise.
pub const JUMP_SIZE_OFFSET: f64 = 1e-7;

/// Bisects a detected jump down to a bracket narrower than `tol`.
pub fn refine_jump(sc: &SpinQuenchScenario, jump: &PhaseJump, tol: f64) -> PhaseJump {
    let phase = |t: f64| geometric_phase(sc, t).angle.value();
    let (mut lo, mut hi) = (jump.t_before, jump.t_after);
    let (phase_lo, phase_hi) = (phase(lo), phase(hi));
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let pm = phase(mid);
        if wrap_to_pi(pm - phase_lo).abs() <= wrap_to_pi(pm - phase_hi).abs() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let outer_lo = (lo - JUMP_SIZE_OFFSET).max(jump.t_before);
    let outer_hi = (hi + JUMP_SIZE_OFFSET).min(jump.t_after);
    PhaseJump {
        t_before: lo,
        t_after: hi,
        size: wrap_to_pi(phase(outer_hi) - phase(outer_lo)),
    }
}

/// Strict local maxima of the rate function above `threshold`.
pub fn detect_rate_peaks(trace: &PhaseTrace, threshold: f64) -> Vec<f64> {
    let r = &trace.rate;
    (1..r.len().saturating_sub(1))
        .filter(|&i| r[i] > threshold && r[i] >= r[i - 1] && r[i] > r[i + 1])
        .map(|i| trace.times[i])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::uniform_grid;

    fn scenario(twice_j: u32, temp: Temperature, dot: f64) -> SpinQuenchScenario {
        let b0 = SpinDirection::z();
        SpinQuenchScenario::new(SpinJ::new(twice_j).unwrap(), 1.0, temp, b0, SpinDirection::at_overlap(b0, dot).unwrap())
            .unwrap()
    }

    fn parallel(twice_j: u32, temp: Temperature) -> SpinQuenchScenario {
        SpinQuenchScenario::new(SpinJ::new(twice_j).unwrap(), 1.0, temp, SpinDirection::z(), SpinDirection::x()).unwrap()
    }

    fn t2() -> Temperature {
        Temperature::finite(2.0).unwrap()
    }

    #[test]
    fn parallel_defect_examples() {
        assert!(parallel_defect(&parallel(1, Temperature::Zero)).abs() < 1e-15);
        assert!((parallel_defect(&scenario(1, Temperature::Zero, 1.0)) - 1.0).abs() < 1e-15);
        assert!((parallel_defect(&scenario(3, t2(), 0.5)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn z_parameter_examples() {
        let sc = scenario(3, t2(), 0.3);
        let z = z_parameter(&sc, 0.0).value();
        assert!((z.re - 0.25f64.cosh()).abs() < 1e-15 && z.im == 0.0);

        let sc = scenario(3, Temperature::Infinite, 0.3);
        let z = z_parameter(&sc, 1.7).value();
        assert!((z - Complex64::new(0.85f64.cos(), 0.0)).norm() < 1e-15);

        // T = 2 omega0, dot = 0, omega0 t = pi  ->  z = 0
        let sc = parallel(1, t2());
        assert!(z_parameter(&sc, PI).value().norm() < 1e-15);

        // general formula
        let sc = scenario(5, Temperature::finite(0.7).unwrap(), -0.4);
        let t: f64 = 2.3;
        let b: f64 = 1.0 / 0.7;
        let expected = Complex64::new(
            (b / 2.0).cosh() * (t / 2.0).cos(),
            (b / 2.0).sinh() * (t / 2.0).sin() * -0.4,
        );
        assert!((z_parameter(&sc, t).value() - expected).norm() < 1e-14);

        let z0 = z_parameter(&scenario(1, Temperature::Zero, 0.2), 1.0);
        assert!(z0.value().re.is_infinite());
        assert!(z0.direction().re.is_finite());
    }

    #[test]
    fn loschmidt_closed_examples() {
        assert!(loschmidt_closed(&parallel(1, Temperature::Zero), PI).norm() < 1e-15);
        for twice_j in 1..=6 {
            for temp in [Temperature::Zero, t2(), Temperature::Infinite] {
                let g = loschmidt_closed(&scenario(twice_j, temp, 0.37), 0.0);
                assert!((g - 1.0).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn spin_half_closed_form() {
        // cos(w t/2) + i sin(w t/2) tanh(b/2) dot
        for temp in [0.3f64, 1.0, 4.0] {
            let sc = scenario(1, Temperature::finite(temp).unwrap(), 0.6);
            for t in [0.3f64, 2.0, 7.7] {
                let expected = Complex64::new((t / 2.0).cos(), (t / 2.0).sin() * (0.5 / temp).tanh() * 0.6);
                assert!((loschmidt_closed(&sc, t) - expected).norm() < 1e-12);
                assert!((loschmidt_oracle(&sc, t).unwrap() - expected).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn spin_three_halves_zero_temperature_is_cube() {
        let dot = 0.45;
        let half = scenario(1, Temperature::Zero, dot);
        let three = scenario(3, Temperature::Zero, dot);
        for t in [0.2, 1.9, 4.4, 9.0] {
            let g = loschmidt_closed(&half, t);
            assert!((loschmidt_oracle(&three, t).unwrap() - g.powu(3)).norm() < 1e-10);
            assert!((loschmidt_closed(&three, t) - g.powu(3)).norm() < 1e-12);
        }
    }

    #[test]
    fn infinite_temperature_is_normalized_character() {
        let sc = scenario(2, Temperature::Infinite, 0.2);
        for t in [0.5, 3.0] {
            let expected = (1.0 + 2.0 * f64::cos(t)) / 3.0;
            assert!((loschmidt_oracle(&sc, t).unwrap() - expected).norm() < 1e-12);
            assert!((loschmidt_closed(&sc, t) - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn extreme_beta_stays_finite() {
        let sc = scenario(12, Temperature::finite(1e-4).unwrap(), 0.3);
        let zero = scenario(12, Temperature::Zero, 0.3);
        for t in [0.0, 1.0, 5.0] {
            let g = loschmidt_closed(&sc, t);
            assert!(g.re.is_finite() && g.im.is_finite());
            assert!((g - loschmidt_closed(&zero, t)).norm() < 1e-12);
        }
    }

    #[test]
    fn dynamical_phase_examples() {
        for t in [0.0, 1.0, 5.0] {
            assert!(dynamical_phase(&parallel(3, t2()), t).abs() < 1e-15);
            assert!(dynamical_phase(&scenario(3, Temperature::Infinite, 0.5), t).abs() < 1e-15);
        }
        let sc = scenario(1, Temperature::Zero, 0.5);
        assert!((dynamical_phase(&sc, 2.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dynamical_phase_matches_thermal_expectation() {
        // -Tr[rho(0) H] t, computed from matrices
        for (twice_j, temp) in [(1, 0.5), (4, 2.0), (7, 10.0)] {
            let sc = scenario(twice_j, Temperature::finite(temp).unwrap(), -0.35);
            let h0 = spin_hamiltonian(sc.spin, 1.0, sc.dir_initial).unwrap();
            let h = spin_hamiltonian(sc.spin, 1.0, sc.dir_final).unwrap();
            let rho = gibbs_state(&h0, sc.temperature).unwrap().rho;
            let e = rho.expectation(h.as_matrix()).re;
            assert!((dynamical_phase(&sc, 3.0) + e * 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn geometric_phase_of_parallel_quench() {
        let sc = parallel(1, Temperature::Zero);
        assert_eq!(geometric_phase(&sc, 0.0).angle.value(), 0.0);
        assert!(geometric_phase(&sc, PI - 1e-3).angle.value().abs() < 1e-9);
        assert!((geometric_phase(&sc, PI + 1e-3).angle.value().abs() - PI).abs() < 1e-9);
        assert!(geometric_phase(&sc, PI).dqpt_adjacent);
    }

    #[test]
    fn rate_function_examples() {
        let sc = scenario(3, t2(), 0.5);
        assert_eq!(rate_function(&sc, 0.0), 0.0);
        assert_eq!(rate_from_amplitude(Complex64::new(0.0, 0.0)), f64::INFINITY);
        let p = parallel(1, Temperature::Zero);
        let mut prev = 0.0;
        for eps in [1e-2, 1e-4, 1e-6] {
            let r = rate_function(&p, PI - eps);
            assert!(r > prev);
            prev = r;
        }
        assert_eq!(RateNorm::Dim.divisor(SpinJ::new(3).unwrap()), 4.0);
    }

    #[test]
    fn critical_times_examples() {
        let ct = critical_times(&parallel(1, Temperature::Zero), 12.0);
        let ts: Vec<f64> = ct.times.iter().map(|c| c.t_star).collect();
        assert_eq!(ts.len(), 2);
        assert!((ts[0] - PI).abs() < 1e-12 && (ts[1] - 3.0 * PI).abs() < 1e-12);

        let ct = critical_times(&parallel(3, t2()), 2.0 * PI);
        let ts: Vec<f64> = ct.times.iter().map(|c| c.t_star).collect();
        let a = (0.5f64.sqrt() / 0.25f64.cosh()).acos();
        assert_eq!(ts.len(), 3);
        assert!((ts[0] - 2.0 * a).abs() < 1e-12);
        assert!((ts[1] - PI).abs() < 1e-12);
        assert!((ts[2] - 2.0 * (PI - a)).abs() < 1e-12);
        assert!((ts[0] - 1.629).abs() < 3e-3 && (ts[2] - 4.654).abs() < 3e-3);
        assert!(ct.times.iter().all(|c| c.n == 0));
        assert_eq!(ct.times.iter().map(|c| c.k).collect::<Vec<_>>(), vec![1, 2, 3]);

        // middle root is temperature independent
        for temp in [Temperature::Zero, Temperature::finite(0.3).unwrap(), Temperature::Infinite] {
            let ct = critical_times(&parallel(3, temp), 4.0);
            assert!(ct.times.iter().any(|c| c.k == 2 && (c.t_star - PI).abs() < 1e-15));
        }

        let none = critical_times(&scenario(3, t2(), 0.5), 20.0);
        assert_eq!(none.status, DqptStatus::NoDqptPossible);
        assert!(none.times.is_empty());
    }

    #[test]
    fn critical_times_are_zeros() {
        for twice_j in 1..=8 {
            for temp in [Temperature::Zero, t2(), Temperature::finite(0.4).unwrap()] {
                let sc = parallel(twice_j, temp);
                for c in critical_times(&sc, 30.0).times {
                    assert!(loschmidt_closed(&sc, c.t_star).norm() < 1e-10, "{twice_j} {temp:?} {c:?}");
                }
            }
        }
    }

    #[test]
    fn zero_temperature_sub_times_coalesce() {
        let ct = critical_times(&parallel(4, Temperature::Zero), 10.0);
        for c in &ct.times {
            assert!((c.t_star - PI).abs() < 1e-12 || (c.t_star - 3.0 * PI).abs() < 1e-12);
        }
        assert_eq!(ct.times.len(), 8);
    }

    #[test]
    fn jump_detection() {
        let sc = scenario(1, Temperature::Zero, 0.0);
        let flat = PhaseTrace {
            times: vec![0.0, 1.0, 2.0],
            amplitude: vec![Complex64::new(1.0, 0.0); 3],
            theta_d: vec![0.0; 3],
            theta_g: vec![Angle::ZERO; 3],
            rate: vec![0.0; 3],
            dqpt_adjacent: vec![false; 3],
        };
        assert!(detect_phase_jumps(&flat).is_empty());

        let times = uniform_grid(12.0, 4000);
        let trace = phase_trace(&sc, &times).unwrap();
        let jumps = detect_phase_jumps(&trace);
        assert_eq!(jumps.len(), 2);
        let step = times[1];
        for (j, expected) in jumps.iter().zip([PI, 3.0 * PI]) {
            assert!((j.size.abs() - PI).abs() < 1e-6);
            assert!(j.t_before - step <= expected && expected <= j.t_after + step);
            let r = refine_jump(&sc, j, 1e-12);
            assert!((0.5 * (r.t_before + r.t_after) - expected).abs() < 1e-9);
            assert!((r.size.abs() - PI).abs() < 1e-6);
        }
    }

    #[test]
    fn phase_trace_invariants() {
        let sc = scenario(3, t2(), 0.5);
        let trace = phase_trace(&sc, &uniform_grid(20.0, 2001)).unwrap();
        assert!((trace.amplitude[0] - 1.0).norm() < 1e-12);
        for i in 0..trace.len() {
            assert!(trace.amplitude[i].norm() <= 1.0 + 1e-10);
            assert!(trace.rate[i] >= -1e-12);
            let expected = wrap_to_pi(Angle::arg(trace.amplitude[i]).value() - trace.theta_d[i]);
            assert!((trace.theta_g[i].value() - expected).abs() < 1e-15);
        }
        assert!(phase_trace(&sc, &[0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn rate_peaks_sit_on_critical_times() {
        let sc = parallel(3, t2());
        let times = uniform_grid(12.0, 4000);
        let trace = phase_trace(&sc, &times).unwrap();
        let peaks = detect_rate_peaks(&trace, 10.0);
        let predicted = critical_times(&sc, 12.0).times;
        assert_eq!(peaks.len(), predicted.len());
        for (p, c) in peaks.iter().zip(&predicted) {
            assert!((p - c.t_star).abs() <= times[1]);
        }
    }

    #[test]
    fn orthogonalize_makes_exact_parallel() {
        let sc = scenario(3, t2(), 0.5).orthogonalize().unwrap();
        assert!(sc.dot().abs() < 1e-15);
        assert!(scenario(3, t2(), 1.0).orthogonalize().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn temperature() -> impl Strategy<Value = Temperature> {
            prop_oneof![
                Just(Temperature::Zero),
                Just(Temperature::Infinite),
                (0.1f64..10.0).prop_map(|t| Temperature::finite(t).unwrap()),
            ]
        }

        fn scenario() -> impl Strategy<Value = SpinQuenchScenario> {
            (1u32..=12, temperature(), 0.0..PI, 0.0..2.0 * PI, 0.0..PI, 0.0..2.0 * PI, 0.2f64..3.0).prop_map(
                |(n, temp, th0, ph0, th, ph, w)| {
                    SpinQuenchScenario::new(
                        SpinJ::new(n).unwrap(),
                        w,
                        temp,
                        SpinDirection::new(th0, ph0).unwrap(),
                        SpinDirection::new(th, ph).unwrap(),
                    )
                    .unwrap()
                },
            )
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(96))]

            #[test]
            fn closed_form_matches_matrices(sc in scenario(), u in 0.0f64..20.0) {
                let t = u / sc.omega0;
                let closed = loschmidt_closed(&sc, t);
                let oracle = loschmidt_oracle(&sc, t).unwrap();
                prop_assert!((closed - oracle).norm() < 1e-10, "{closed} vs {oracle}");
            }

            #[test]
            fn amplitude_is_bounded(sc in scenario(), t in 0.0f64..30.0) {
                let g = loschmidt_closed(&sc, t);
                prop_assert!(g.norm() <= 1.0 + 1e-12);
                prop_assert!(rate_function(&sc, t) >= -1e-12);
            }

            #[test]
            fn zero_temperature_is_power_of_spin_half(n in 1u32..=10, dot in -1.0f64..1.0, t in 0.0f64..20.0) {
                let b0 = SpinDirection::z();
                let b = SpinDirection::at_overlap(b0, dot).unwrap();
                let half = SpinQuenchScenario::new(SpinJ::new(1).unwrap(), 1.0, Temperature::Zero, b0, b).unwrap();
                let full = SpinQuenchScenario::new(SpinJ::new(n).unwrap(), 1.0, Temperature::Zero, b0, b).unwrap();
                let expected = loschmidt_closed(&half, t).powu(n);
                prop_assert!((loschmidt_closed(&full, t) - expected).norm() < 1e-12);
            }

            #[test]
            fn geometric_phase_on_branch(sc in scenario(), t in 0.0f64..30.0) {
                let g = geometric_phase(&sc, t).angle.value();
                prop_assert!(g > -PI && g <= PI);
            }
        }
    }
}
