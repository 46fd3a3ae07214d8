//! Two-band quenches `H_k = R(k).sigma` of a thermal state, with per-momentum
//! Loschmidt amplitudes, the pure geometric phase field and the DTOP.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::{evolve_unitary, wrap_to_pi, Angle, CMatrix, HermitianMatrix};
use crate::spin::{gibbs_state, Temperature};

/// `|G_k| < 1e-9` marks a cell as DQPT-adjacent.
pub const DQPT_ADJACENT_TOL: f64 = 1e-9;
/// Folded per-step PGP change that triggers the grid-coarseness guard.
pub const COARSE_STEP: f64 = PI / 2.0;
/// Rows within this distance of a critical time are not evaluated.
pub const CRITICAL_WINDOW: f64 = 1e-9;
/// Bloch vectors shorter than this count as a closed gap.
pub const GAP_TOL: f64 = 1e-12;
pub const ROOT_TOL: f64 = 1e-12;
pub const JUMP_STEP: f64 = 1e-6;
pub const REFINE_HALF_WIDTH: f64 = 0.05;
pub const REFINE_FACTOR: usize = 10;
pub const DEFAULT_K_POINTS: usize = 4001;

type BlochFn = dyn Fn(f64) -> [f64; 3] + Send + Sync;

/// A Bloch vector `k -> R(k)`.
#[derive(Clone)]
pub enum BlochMap {
    /// `R = J2 (-m - cos k, sin k, 0)`.
    Ssh { m: f64, j2: f64 },
    Custom(Arc<BlochFn>),
}

impl fmt::Debug for BlochMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlochMap::Ssh { m, j2 } => f.debug_struct("Ssh").field("m", m).field("j2", j2).finish(),
            BlochMap::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl BlochMap {
    pub fn custom(r: impl Fn(f64) -> [f64; 3] + Send + Sync + 'static) -> Self {
        BlochMap::Custom(Arc::new(r))
    }

    pub fn eval(&self, k: f64) -> [f64; 3] {
        match self {
            BlochMap::Ssh { m, j2 } => {
                let (s, c) = k.sin_cos();
                [j2 * (-m - c), j2 * s, 0.0]
            }
            BlochMap::Custom(r) => r(k),
        }
    }

    pub fn magnitude(&self, k: f64) -> f64 {
        norm(self.eval(k))
    }

    pub fn hamiltonian(&self, k: f64) -> HermitianMatrix {
        pauli_vector(self.eval(k))
    }
}

pub fn ssh_bloch(m: f64, j2: f64) -> Result<BlochMap> {
    if !(j2 > 0.0) || !j2.is_finite() {
        return Err(Error::invalid("j2", format!("{j2} must be positive")));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite(m));
    }
    Ok(BlochMap::Ssh { m, j2 })
}

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn pauli_vector(r: [f64; 3]) -> HermitianMatrix {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let m: CMatrix = DMatrix::from_row_slice(
        2,
        2,
        &[c(r[2], 0.0), c(r[0], -r[1]), c(r[0], r[1]), c(-r[2], 0.0)],
    );
    HermitianMatrix::symmetrized(m)
}

/// `R^i . R^f / (|R^i| |R^f|)` for two maps, failing on a closed gap.
fn bare_overlap(initial: &BlochMap, quenched: &BlochMap, k: f64) -> Result<f64> {
    let (ri, rf) = (initial.eval(k), quenched.eval(k));
    let (ni, nf) = (norm(ri), norm(rf));
    if !(ni > GAP_TOL) || !(nf > GAP_TOL) {
        return Err(Error::GapClosing { k });
    }
    Ok(dot(ri, rf) / (ni * nf))
}

/// Per-momentum data needed for the amplitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Column {
    pub k: f64,
    pub r_final: f64,
    pub f_hat: f64,
    pub f: f64,
}

impl Column {
    fn amplitude(&self, t: f64) -> Complex64 {
        let (s, c) = (self.r_final * t).sin_cos();
        Complex64::new(c, s * self.f)
    }

    fn dynamical_phase(&self, t: f64) -> f64 {
        self.f * self.r_final * t
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticalMomentum {
    pub k_c: f64,
    /// `|R^f(k_c)|`.
    pub r_final: f64,
    /// `f_hat` touches zero without changing sign.
    pub tangential: bool,
}

impl CriticalMomentum {
    /// `t*_n = (n + 1/2) pi / R^f(k_c)` up to `t_max`.
    pub fn critical_times(&self, t_max: f64) -> Vec<f64> {
        if self.tangential {
            return Vec::new();
        }
        (0u32..)
            .map(|n| (f64::from(n) + 0.5) * PI / self.r_final)
            .take_while(|&t| t <= t_max)
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct BandQuenchScenario {
    initial: BlochMap,
    quenched: BlochMap,
    temperature: Temperature,
    k_grid: Vec<f64>,
    t_grid: Vec<f64>,
    columns: Vec<Column>,
    critical: Vec<CriticalMomentum>,
}

impl BandQuenchScenario {
    pub fn new(
        initial: BlochMap,
        quenched: BlochMap,
        temperature: Temperature,
        k_grid: Vec<f64>,
        t_grid: Vec<f64>,
    ) -> Result<Self> {
        if k_grid.len() < 3 || t_grid.len() < 3 {
            return Err(Error::invalid("grid", "k and t grids need at least 3 points"));
        }
        if k_grid[0] != 0.0 || k_grid[k_grid.len() - 1] != PI {
            return Err(Error::invalid("k_grid", "endpoints must be exactly 0 and pi"));
        }
        if k_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("k_grid", "must be strictly increasing"));
        }
        if t_grid[0] != 0.0 {
            return Err(Error::invalid("t_grid", "must start at 0"));
        }
        if t_grid.windows(2).any(|w| !(w[1] > w[0])) || !t_grid.iter().all(|t| t.is_finite()) {
            return Err(Error::invalid("t_grid", "must be finite and strictly increasing"));
        }
        let columns = k_grid
            .iter()
            .map(|&k| column(&initial, &quenched, temperature, k))
            .collect::<Result<Vec<_>>>()?;
        let critical = find_roots(&initial, &quenched, &columns)?;
        Ok(Self {
            initial,
            quenched,
            temperature,
            k_grid,
            t_grid,
            columns,
            critical,
        })
    }

    /// `k_points` uniform momenta refined around each critical momentum, and
    /// `t_steps` uniform times on `[0, t_max]`.
    pub fn uniform(
        initial: BlochMap,
        quenched: BlochMap,
        temperature: Temperature,
        k_points: usize,
        t_max: f64,
        t_steps: usize,
    ) -> Result<Self> {
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(Error::invalid("t_max", format!("{t_max} must be positive")));
        }
        let k_grid = refined_k_grid(&initial, &quenched, k_points)?;
        let t_grid = crate::numeric::uniform_grid(t_max, t_steps);
        Self::new(initial, quenched, temperature, k_grid, t_grid)
    }

    pub fn initial(&self) -> &BlochMap {
        &self.initial
    }

    pub fn quenched(&self) -> &BlochMap {
        &self.quenched
    }

    pub fn temperature(&self) -> Temperature {
        self.temperature
    }

    pub fn k_grid(&self) -> &[f64] {
        &self.k_grid
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn t_max(&self) -> f64 {
        self.t_grid[self.t_grid.len() - 1]
    }

    /// Largest spacing of the time grid.
    pub fn t_step(&self) -> f64 {
        self.t_grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    pub fn with_temperature(&self, temperature: Temperature) -> Result<Self> {
        Self::new(
            self.initial.clone(),
            self.quenched.clone(),
            temperature,
            self.k_grid.clone(),
            self.t_grid.clone(),
        )
    }

    /// Critical times of every non-tangential root up to `t_max`, ascending,
    /// with the index of the root they belong to.
    pub fn critical_times(&self, t_max: f64) -> Vec<(f64, usize)> {
        let mut all: Vec<(f64, usize)> = self
            .critical
            .iter()
            .enumerate()
            .flat_map(|(i, c)| c.critical_times(t_max).into_iter().map(move |t| (t, i)))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0));
        all
    }

    fn nearest_critical(&self, t: f64) -> Option<f64> {
        self.critical
            .iter()
            .filter(|c| !c.tangential)
            .map(|c| {
                let n = (t * c.r_final / PI - 0.5).round().max(0.0);
                (n + 0.5) * PI / c.r_final
            })
            .min_by(|a, b| (a - t).abs().total_cmp(&(b - t).abs()))
    }
}

fn column(initial: &BlochMap, quenched: &BlochMap, temperature: Temperature, k: f64) -> Result<Column> {
    let f_hat = bare_overlap(initial, quenched, k)?;
    Ok(Column {
        k,
        r_final: quenched.magnitude(k),
        f_hat,
        f: temperature.tanh_beta(initial.magnitude(k)) * f_hat,
    })
}

/// `(f_hat, f)` with `f = tanh(beta |R^i|) f_hat`.
pub fn overlap_profile(sc: &BandQuenchScenario, k: f64) -> Result<(f64, f64)> {
    let c = column(&sc.initial, &sc.quenched, sc.temperature, k)?;
    Ok((c.f_hat, c.f))
}

fn bisect_root(g: impl Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut g_lo = g(lo)?;
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid)?;
        if gm == 0.0 {
            return Ok(mid);
        }
        if (gm > 0.0) == (g_lo > 0.0) {
            lo = mid;
            g_lo = gm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Minimizes `|g|` on `[lo, hi]` by golden-section search.
fn min_abs(g: impl Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64) -> Result<(f64, f64)> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    while hi - lo > ROOT_TOL {
        let a = hi - r * (hi - lo);
        let b = lo + r * (hi - lo);
        if g(a)?.abs() < g(b)?.abs() {
            hi = b;
        } else {
            lo = a;
        }
    }
    let k = 0.5 * (lo + hi);
    Ok((k, g(k)?))
}

fn find_roots(initial: &BlochMap, quenched: &BlochMap, columns: &[Column]) -> Result<Vec<CriticalMomentum>> {
    let g = |k: f64| bare_overlap(initial, quenched, k);
    let mut roots = Vec::new();
    let mut push = |k: f64, tangential: bool| {
        roots.push(CriticalMomentum {
            k_c: k,
            r_final: quenched.magnitude(k),
            tangential,
        })
    };
    let n = columns.len();
    for i in 0..n {
        let c = columns[i];
        if c.f_hat == 0.0 {
            let left = if i > 0 { columns[i - 1].f_hat } else { 0.0 };
            let right = if i + 1 < n { columns[i + 1].f_hat } else { 0.0 };
            push(c.k, left * right > 0.0);
            continue;
        }
        if i + 1 < n {
            let d = columns[i + 1];
            if d.f_hat != 0.0 && (c.f_hat > 0.0) != (d.f_hat > 0.0) {
                push(bisect_root(g, c.k, d.k)?, false);
            }
        }
        // local minimum of |f_hat| without a sign change
        if i > 0 && i + 1 < n {
            let (a, d) = (columns[i - 1], columns[i + 1]);
            let same = a.f_hat * c.f_hat > 0.0 && c.f_hat * d.f_hat > 0.0;
            if same && c.f_hat.abs() <= a.f_hat.abs() && c.f_hat.abs() < d.f_hat.abs() {
                let (k, v) = min_abs(g, a.k, d.k)?;
                if v.abs() < 1e-10 {
                    push(k, true);
                }
            }
        }
    }
    Ok(roots)
}

/// Roots of `f_hat` on `[0, pi]`, ascending.
pub fn critical_momenta(sc: &BandQuenchScenario) -> &[CriticalMomentum] {
    &sc.critical
}

/// `points` uniform momenta on `[0, pi]`, with every base interval within
/// `REFINE_HALF_WIDTH` of a root of `f_hat` split into `REFINE_FACTOR` parts.
pub fn refined_k_grid(initial: &BlochMap, quenched: &BlochMap, points: usize) -> Result<Vec<f64>> {
    if points < 3 {
        return Err(Error::invalid("k_points", "need at least 3 points"));
    }
    let base = uniform_k(points);
    let columns = base
        .iter()
        .map(|&k| column(initial, quenched, Temperature::Zero, k))
        .collect::<Result<Vec<_>>>()?;
    let roots: Vec<f64> = find_roots(initial, quenched, &columns)?.iter().map(|c| c.k_c).collect();
    let near = |a: f64, b: f64| {
        roots
            .iter()
            .any(|&r| b >= r - REFINE_HALF_WIDTH && a <= r + REFINE_HALF_WIDTH)
    };
    let mut grid = Vec::with_capacity(points * 2);
    for w in base.windows(2) {
        grid.push(w[0]);
        if near(w[0], w[1]) {
            let h = (w[1] - w[0]) / REFINE_FACTOR as f64;
            grid.extend((1..REFINE_FACTOR).map(|i| w[0] + i as f64 * h));
        }
    }
    grid.push(PI);
    Ok(grid)
}

fn uniform_k(points: usize) -> Vec<f64> {
    let h = PI / (points - 1) as f64;
    let mut v: Vec<f64> = (0..points).map(|i| i as f64 * h).collect();
    v[points - 1] = PI;
    v
}

/// `cos(R^f t) + i sin(R^f t) f(k)`.
pub fn band_amplitude(sc: &BandQuenchScenario, k: f64, t: f64) -> Result<Complex64> {
    check_time(t)?;
    Ok(column(&sc.initial, &sc.quenched, sc.temperature, k)?.amplitude(t))
}

/// `Tr[rho_k(0) exp(-i H^f_k t)]` from 2x2 matrices.
pub fn band_amplitude_oracle(sc: &BandQuenchScenario, k: f64, t: f64) -> Result<Complex64> {
    check_time(t)?;
    bare_overlap(&sc.initial, &sc.quenched, k)?;
    let rho = gibbs_state(&sc.initial.hamiltonian(k), sc.temperature)?.rho;
    let u = evolve_unitary(&sc.quenched.hamiltonian(k), t);
    Ok(rho.expectation(u.as_matrix()))
}

/// `f(k) R^f(k) t`.
pub fn band_dynamical_phase(sc: &BandQuenchScenario, k: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    Ok(column(&sc.initial, &sc.quenched, sc.temperature, k)?.dynamical_phase(t))
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid("t", format!("{t} must be finite and >= 0")));
    }
    Ok(())
}

/// Phases of every momentum of the grid at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct PgpRow {
    pub t: f64,
    pub total: Vec<Angle>,
    pub dynamical: Vec<f64>,
    pub geometric: Vec<Angle>,
    pub dqpt_adjacent: Vec<bool>,
    /// `geometric` unwrapped along `k`, starting at `geometric[0]`.
    pub unwrapped: Vec<f64>,
    pub amplitude: Vec<Complex64>,
}

pub fn pgp_row(sc: &BandQuenchScenario, t: f64) -> Result<PgpRow> {
    check_time(t)?;
    let n = sc.columns.len();
    let mut row = PgpRow {
        t,
        total: Vec::with_capacity(n),
        dynamical: Vec::with_capacity(n),
        geometric: Vec::with_capacity(n),
        dqpt_adjacent: Vec::with_capacity(n),
        unwrapped: Vec::with_capacity(n),
        amplitude: Vec::with_capacity(n),
    };
    for c in &sc.columns {
        let g = c.amplitude(t);
        let total = Angle::arg(g);
        let d = c.dynamical_phase(t);
        row.total.push(total);
        row.dynamical.push(d);
        row.geometric.push(Angle::wrapped(total.value() - d));
        row.dqpt_adjacent.push(g.norm() < DQPT_ADJACENT_TOL);
        row.amplitude.push(g);
    }
    row.unwrapped = crate::numeric::unwrap_phases(&row.geometric);
    Ok(row)
}

/// The PGP on the full `k x t` grid, one row per time.
pub fn pgp_field(sc: &BandQuenchScenario) -> Result<Vec<PgpRow>> {
    sc.t_grid.par_iter().map(|&t| pgp_row(sc, t)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DtopRow {
    pub t: f64,
    pub nu: f64,
    /// `(PGP(pi) - PGP(0)) / 2pi`.
    pub boundary_term: f64,
    pub fold_count: i64,
    pub rate_density: f64,
    /// Not evaluated because `t` sits on a critical time.
    pub skipped: bool,
    /// Infinite temperature: only the boundary term is defined.
    pub boundary_only: bool,
}

impl DtopRow {
    fn skipped(t: f64, rate_density: f64) -> Self {
        Self {
            t,
            nu: f64::NAN,
            boundary_term: f64::NAN,
            fold_count: 0,
            rate_density,
            skipped: true,
            boundary_only: false,
        }
    }
}

/// `-(1/pi) int_0^pi ln|G_k|^2 dk` by the trapezoid rule over nonzero cells.
fn rate_density_of(sc: &BandQuenchScenario, amplitude: &[Complex64]) -> f64 {
    let mut acc = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for (c, g) in sc.columns.iter().zip(amplitude) {
        let echo = g.norm_sqr();
        if echo == 0.0 {
            continue;
        }
        let y = echo.ln();
        if let Some((k0, y0)) = prev {
            acc += 0.5 * (c.k - k0) * (y + y0);
        }
        prev = Some((c.k, y));
    }
    0.0 - acc / PI
}

pub fn rate_density(sc: &BandQuenchScenario, t: f64) -> Result<f64> {
    check_time(t)?;
    let amp: Vec<Complex64> = sc.columns.iter().map(|c| c.amplitude(t)).collect();
    Ok(rate_density_of(sc, &amp))
}

/// DTOP at one time: folded consecutive PGP differences along `k`, summed.
pub fn dtop(sc: &BandQuenchScenario, t: f64) -> Result<DtopRow> {
    if let Some(t_star) = sc.nearest_critical(t) {
        if (t - t_star).abs() < CRITICAL_WINDOW {
            return Err(Error::NearCriticalTime { t, t_star });
        }
    }
    let row = pgp_row(sc, t)?;
    dtop_from_row(sc, &row)
}

fn dtop_from_row(sc: &BandQuenchScenario, row: &PgpRow) -> Result<DtopRow> {
    let n = row.geometric.len();
    let boundary = (row.geometric[n - 1].value() - row.geometric[0].value()) / (2.0 * PI);
    let rate = rate_density_of(sc, &row.amplitude);
    if let Temperature::Infinite = sc.temperature {
        return Ok(DtopRow {
            t: row.t,
            nu: boundary,
            boundary_term: boundary,
            fold_count: 0,
            rate_density: rate,
            skipped: false,
            boundary_only: true,
        });
    }
    let mut sum = 0.0;
    for i in 0..n - 1 {
        let step = wrap_to_pi(row.geometric[i + 1].value() - row.geometric[i].value());
        if step.abs() > COARSE_STEP && !row.dqpt_adjacent[i] && !row.dqpt_adjacent[i + 1] {
            return Err(Error::GridTooCoarse {
                k_lo: sc.columns[i].k,
                k_hi: sc.columns[i + 1].k,
                t: row.t,
            });
        }
        sum += step;
    }
    let nu = sum / (2.0 * PI);
    Ok(DtopRow {
        t: row.t,
        nu,
        boundary_term: boundary,
        fold_count: (nu - boundary).round() as i64,
        rate_density: rate,
        skipped: false,
        boundary_only: false,
    })
}

/// `sgn(df/dk)` at a critical momentum, from a central difference and checked
/// against which hemisphere of the relative Bloch sphere `R^f` leaves.
pub fn jump_sign(sc: &BandQuenchScenario, k_c: f64) -> Result<i32> {
    let f_hat = bare_overlap(&sc.initial, &sc.quenched, k_c)?;
    if f_hat.abs() > 1e-9 {
        return Err(Error::NotARoot { k: k_c, f_hat });
    }
    let f = |k: f64| column(&sc.initial, &sc.quenched, sc.temperature, k).map(|c| c.f);
    let derivative = (f(k_c + JUMP_STEP)? - f(k_c - JUMP_STEP)?) / (2.0 * JUMP_STEP);
    if !(derivative.abs() >= 1e-10) {
        return Err(Error::DegenerateJump { k_c, derivative });
    }
    let sign = if derivative > 0.0 { 1 } else { -1 };
    // north (f_hat > 0) before the crossing and south after means -1
    let before = bare_overlap(&sc.initial, &sc.quenched, k_c - 1e-4)?;
    let after = bare_overlap(&sc.initial, &sc.quenched, k_c + 1e-4)?;
    let hemisphere = if before > 0.0 && after < 0.0 { -1 } else { 1 };
    if hemisphere != sign {
        return Err(Error::DegenerateJump { k_c, derivative });
    }
    Ok(sign)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DtopJump {
    pub t_star: f64,
    pub k_c: f64,
    pub nu_before: f64,
    pub nu_after: f64,
    pub observed: f64,
    /// Sum of `jump_sign` over the roots sharing this critical time.
    pub predicted: Option<i32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DtopTrace {
    pub rows: Vec<DtopRow>,
    pub jumps: Vec<DtopJump>,
}

/// DTOP and rate density on the time grid, plus the jump across every
/// predicted critical time.
pub fn dtop_trace(sc: &BandQuenchScenario) -> Result<DtopTrace> {
    let step = sc.t_step();
    let rows: Vec<DtopRow> = sc
        .t_grid
        .par_iter()
        .map(|&t| {
            let row = pgp_row(sc, t)?;
            let near = sc.nearest_critical(t).map(|ts| (t - ts).abs());
            if near.is_some_and(|d| d < CRITICAL_WINDOW) {
                return Ok(DtopRow::skipped(t, rate_density_of(sc, &row.amplitude)));
            }
            match dtop_from_row(sc, &row) {
                Err(Error::GridTooCoarse { .. }) if near.is_some_and(|d| d <= step) => {
                    Ok(DtopRow::skipped(t, rate_density_of(sc, &row.amplitude)))
                }
                other => other,
            }
        })
        .collect::<Result<_>>()?;

    let mut jumps: Vec<DtopJump> = Vec::new();
    if !matches!(sc.temperature, Temperature::Infinite) {
        for (t_star, root) in sc.critical_times(sc.t_max()) {
            if let Some(last) = jumps.last_mut() {
                if (t_star - last.t_star).abs() < CRITICAL_WINDOW {
                    last.predicted = match (last.predicted, jump_sign(sc, sc.critical[root].k_c).ok()) {
                        (Some(a), Some(b)) => Some(a + b),
                        _ => None,
                    };
                    continue;
                }
            }
            let before = rows.iter().rev().find(|r| r.t < t_star && !r.skipped);
            let after = rows.iter().find(|r| r.t > t_star && !r.skipped);
            let (Some(b), Some(a)) = (before, after) else {
                continue;
            };
            let k_c = sc.critical[root].k_c;
            jumps.push(DtopJump {
                t_star,
                k_c,
                nu_before: b.nu,
                nu_after: a.nu,
                observed: a.nu - b.nu,
                predicted: jump_sign(sc, k_c).ok(),
            });
        }
    }
    Ok(DtopTrace { rows, jumps })
}

/// `max_{k in {0, pi}} |principal(2 PGP_k)|`, zero when the endpoint PGPs
/// respect inversion symmetry.
pub fn inversion_symmetry_residual(sc: &BandQuenchScenario, t: f64) -> Result<f64> {
    check_time(t)?;
    let ends = [sc.columns[0], sc.columns[sc.columns.len() - 1]];
    Ok(ends
        .iter()
        .map(|c| {
            let g = Angle::arg(c.amplitude(t)).value() - c.dynamical_phase(t);
            wrap_to_pi(2.0 * wrap_to_pi(g)).abs()
        })
        .fold(0.0, f64::max))
}
