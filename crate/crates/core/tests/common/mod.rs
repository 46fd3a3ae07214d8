//! Independent reference implementations used by the integration and
//! acceptance tests.

#![allow(dead_code)]

use std::f64::consts::PI;

use dqpt_core::quench::SpinQuenchScenario;
use dqpt_core::{SpinDirection, SpinJ, Temperature};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Principal value of `arg(cos x + i f sin x)` from the four-case table
/// built on `arctan(tan(x) f)`.
pub fn branch_table_phase(x: f64, f: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    let base = (y.tan() * f).atan();
    let sgn = f.signum();
    if y == PI / 2.0 {
        PI / 2.0 * sgn
    } else if y == -PI / 2.0 {
        -PI / 2.0 * sgn
    } else if y > -PI / 2.0 && y < PI / 2.0 {
        base
    } else if y > PI / 2.0 {
        base + PI * sgn
    } else {
        base - PI * sgn
    }
}

/// Distance between two angles on the circle.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Argument of the real number `cos x`: `pi` when negative, else `0`.
pub fn arg_cos(x: f64) -> f64 {
    if x.cos() < 0.0 {
        PI
    } else {
        0.0
    }
}

/// `(arg cos(R_pi t) - arg cos(R_0 t)) / 2pi`.
pub fn infinite_temperature_nu(r_zero: f64, r_pi: f64, t: f64) -> f64 {
    (arg_cos(r_pi * t) - arg_cos(r_zero * t)) / (2.0 * PI)
}

/// `U_n(cos x) = sin((n + 1) x) / sin x`.
pub fn chebyshev_trig(n: u32, x: f64) -> f64 {
    ((f64::from(n) + 1.0) * x).sin() / x.sin()
}

/// `1 + m_i m_f + (m_i + m_f) cos k`, the numerator of the SSH overlap.
pub fn ssh_overlap_numerator(mi: f64, mf: f64, k: f64) -> f64 {
    1.0 + mi * mf + (mi + mf) * k.cos()
}

/// Analytic root of the SSH overlap, if it lies in `[0, pi]`.
pub fn ssh_critical_momentum(mi: f64, mf: f64) -> Option<f64> {
    let c = -(1.0 + mi * mf) / (mi + mf);
    (c.abs() <= 1.0).then(|| c.acos())
}

pub fn random_temperature(rng: &mut ChaCha8Rng) -> Temperature {
    match rng.gen_range(0..3) {
        0 => Temperature::Zero,
        1 => Temperature::Infinite,
        _ => Temperature::finite(rng.gen_range(0.1..=10.0)).unwrap(),
    }
}

pub fn random_direction(rng: &mut ChaCha8Rng) -> SpinDirection {
    let cos_theta: f64 = rng.gen_range(-1.0..=1.0);
    SpinDirection::new(cos_theta.acos(), rng.gen_range(0.0..2.0 * PI)).unwrap()
}

/// A scenario with `2j` in `1..=12` and a time in `[0, 20/omega0]`.
pub fn random_spin_case(rng: &mut ChaCha8Rng) -> (SpinQuenchScenario, f64) {
    let spin = SpinJ::new(rng.gen_range(1..=12)).unwrap();
    let omega0 = rng.gen_range(0.2..=3.0);
    let temp = random_temperature(rng);
    let sc = SpinQuenchScenario::new(spin, omega0, temp, random_direction(rng), random_direction(rng)).unwrap();
    let t = rng.gen_range(0.0..=20.0) / omega0;
    (sc, t)
}
