//! Dense complex linear algebra, Chebyshev polynomials of the second kind
//! and principal-branch angle utilities.
//!
//! Matrices are small (dimension at most a few dozen), so every matrix
//! function goes through a full Hermitian eigendecomposition.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Entry-wise tolerance for Hermiticity at construction.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Entry-wise tolerance for unitarity checks.
pub const UNITARY_TOL: f64 = 1e-10;

const TAU: f64 = 2.0 * PI;

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn max_asymmetry(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// A square complex matrix equal to its conjugate transpose.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if let Some(bad) = m.iter().find(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite(if bad.re.is_finite() { bad.im } else { bad.re }));
        }
        let asym = max_asymmetry(&m);
        if asym > HERMITIAN_TOL {
            return Err(Error::NonHermitian {
                max_asymmetry: asym,
            });
        }
        Ok(Self(m))
    }

    /// Builds `(m + m^dag) / 2` without checking; for sums of Hermitian terms
    /// that picked up rounding noise.
    pub fn symmetrized(m: CMatrix) -> Self {
        let adj = m.adjoint();
        Self((m + adj) * Complex64::new(0.5, 0.0))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self(CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(diag[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    /// Real linear combination `sum_i c_i A_i` of Hermitian matrices.
    pub fn linear_combination(terms: &[(f64, &HermitianMatrix)]) -> Result<Self> {
        let dim = terms
            .first()
            .map(|(_, m)| m.dim())
            .ok_or_else(|| Error::invalid("terms", "empty linear combination"))?;
        let mut acc = CMatrix::zeros(dim, dim);
        for (c, m) in terms {
            if m.dim() != dim {
                return Err(Error::invalid("terms", "dimension mismatch"));
            }
            acc += m.as_matrix() * Complex64::new(*c, 0.0);
        }
        Ok(Self::symmetrized(acc))
    }
}

/// A square complex matrix with `U U^dag = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMatrix(CMatrix);

impl UnitaryMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        let residual = unitarity_residual(&m);
        if residual > UNITARY_TOL {
            return Err(Error::NonUnitary { residual });
        }
        Ok(Self(m))
    }

    pub(crate) fn from_raw(m: CMatrix) -> Self {
        debug_assert!(unitarity_residual(&m) < 1e-8);
        Self(m)
    }

    pub fn identity(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn compose(&self, other: &UnitaryMatrix) -> Self {
        Self(&self.0 * &other.0)
    }

    /// `U A U^dag`.
    pub fn conjugate(&self, a: &CMatrix) -> CMatrix {
        &self.0 * a * self.0.adjoint()
    }

    pub fn unitarity_residual(&self) -> f64 {
        unitarity_residual(&self.0)
    }

    pub fn determinant(&self) -> Complex64 {
        self.0.determinant()
    }
}

fn unitarity_residual(m: &CMatrix) -> f64 {
    let n = m.nrows();
    max_abs(&(m * m.adjoint() - CMatrix::identity(n, n)))
}

/// An angle on the principal branch `(-pi, pi]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Angle(f64);

impl Angle {
    pub const ZERO: Angle = Angle(0.0);

    pub fn value(self) -> f64 {
        self.0
    }

    /// Wraps `x` onto the branch without checking finiteness.
    pub fn wrapped(x: f64) -> Angle {
        Angle(wrap_to_pi(x))
    }

    /// Principal argument of a complex number, `arg(0) = 0`.
    pub fn arg(z: Complex64) -> Angle {
        Angle(wrap_to_pi(z.im.atan2(z.re)))
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> f64 {
        a.0
    }
}

/// Reduces `x` modulo 2pi into `(-pi, pi]`. Values already on the branch
/// are returned untouched so the map is exactly idempotent. NaN passes
/// through.
pub fn wrap_to_pi(x: f64) -> f64 {
    if x > -PI && x <= PI {
        return x;
    }
    let r = (x + PI).rem_euclid(TAU) - PI;
    if r <= -PI {
        PI
    } else {
        r
    }
}

pub fn principal_angle(x: f64) -> Result<Angle> {
    if !x.is_finite() {
        return Err(Error::NonFinite(x));
    }
    Ok(Angle(wrap_to_pi(x)))
}

/// Removes 2pi discontinuities: `out[0] = seq[0]` and each consecutive
/// difference is replaced by its principal value.
pub fn unwrap_phases(seq: &[Angle]) -> Vec<f64> {
    let mut out = Vec::with_capacity(seq.len());
    let Some(first) = seq.first() else {
        return out;
    };
    let mut acc = first.0;
    out.push(acc);
    for w in seq.windows(2) {
        acc += wrap_to_pi(w[1].0 - w[0].0);
        out.push(acc);
    }
    out
}

/// Ascending eigenvalues with the matching orthonormal eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: UnitaryMatrix,
}

impl Eigen {
    /// `V diag(g(lambda)) V^dag`.
    pub fn map(&self, g: impl Fn(f64) -> Complex64) -> CMatrix {
        let v = self.vectors.as_matrix();
        let n = v.nrows();
        let mut scaled = v.clone();
        for (j, &lambda) in self.values.iter().enumerate() {
            let gj = g(lambda);
            for i in 0..n {
                scaled[(i, j)] *= gj;
            }
        }
        scaled * v.adjoint()
    }
}

pub fn hermitian_eig(m: &HermitianMatrix) -> Eigen {
    let n = m.dim();
    let decomposition = m.as_matrix().clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| decomposition.eigenvalues[a].total_cmp(&decomposition.eigenvalues[b]));
    let values = order.iter().map(|&i| decomposition.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| decomposition.eigenvectors[(i, order[j])]);
    Eigen {
        values,
        vectors: UnitaryMatrix::from_raw(vectors),
    }
}

/// `exp(-i H t)` from the spectral decomposition of `H`.
pub fn evolve_unitary(h: &HermitianMatrix, t: f64) -> UnitaryMatrix {
    let eig = hermitian_eig(h);
    UnitaryMatrix::from_raw(eig.map(|lambda| Complex64::from_polar(1.0, -lambda * t)))
}

/// Second-kind Chebyshev polynomial by forward recurrence
/// `U_{n+1} = 2 z U_n - U_{n-1}`, `U_0 = 1`, `U_1 = 2z`.
pub fn chebyshev_u(n: u32, z: Complex64) -> Complex64 {
    chebyshev_u_scaled(n, z, 1.0)
}

/// `s^n U_n(w / s)` evaluated without dividing by `s`:
/// `V_{n+1} = 2 w V_n - s^2 V_{n-1}`, `V_0 = 1`, `V_1 = 2w`.
///
/// With `s = 1` this is the plain recurrence. `s = 0` gives `(2w)^n`, the
/// leading-order term, which is what the zero-temperature limits need.
pub fn chebyshev_u_scaled(n: u32, w: Complex64, s: f64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    if n == 0 {
        return one;
    }
    let s2 = s * s;
    let two_w = w * 2.0;
    let mut prev = one;
    let mut cur = two_w;
    for _ in 1..n {
        let next = two_w * cur - prev * s2;
        prev = cur;
        cur = next;
    }
    cur
}

/// Roots `cos(k pi / (n + 1))`, `k = 1..n`, in descending order.
pub fn chebyshev_roots(n: u32) -> Vec<f64> {
    let denom = f64::from(n + 1);
    (1..=n).map(|k| (f64::from(k) * PI / denom).cos()).collect()
}

/// `steps` equally spaced samples of `[0, t_max]`; `steps == 1` gives `[0]`.
pub fn uniform_grid(t_max: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => {
            let last = (steps - 1) as f64;
            (0..steps)
                .map(|i| if i == steps - 1 { t_max } else { t_max * i as f64 / last })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sigma_z() -> HermitianMatrix {
        HermitianMatrix::from_real_diagonal(&[1.0, -1.0])
    }

    fn random_hermitian(rng: &mut impl Rng, n: usize) -> HermitianMatrix {
        let a = CMatrix::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        HermitianMatrix::symmetrized(a)
    }

    #[test]
    fn eig_identity_and_pauli() {
        let id = HermitianMatrix::from_real_diagonal(&[1.0, 1.0]);
        let e = hermitian_eig(&id);
        assert_eq!(e.values, vec![1.0, 1.0]);
        assert!(e.vectors.unitarity_residual() < 1e-12);

        let e = hermitian_eig(&sigma_z());
        assert!((e.values[0] + 1.0).abs() < 1e-15);
        assert!((e.values[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eig_reconstructs_random_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = random_hermitian(&mut rng, 7);
        let e = hermitian_eig(&h);
        let rebuilt = e.map(|l| c(l, 0.0));
        assert!(max_abs(&(rebuilt - h.as_matrix())) < 1e-10);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.5, 0.0), c(0.25, 0.0), c(0.0, 0.0)]);
        match HermitianMatrix::new(m) {
            Err(Error::NonHermitian { max_asymmetry }) => assert!((max_asymmetry - 0.25).abs() < 1e-15),
            other => panic!("expected rejection, got {other:?}"),
        }
        let rect = CMatrix::zeros(2, 3);
        assert!(matches!(HermitianMatrix::new(rect), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn evolve_diagonal_and_zero_time() {
        let omega = 0.7;
        let t = 1.3;
        let h = HermitianMatrix::from_real_diagonal(&[omega, -omega]);
        let u = evolve_unitary(&h, t);
        let m = u.as_matrix();
        assert!((m[(0, 0)] - Complex64::from_polar(1.0, -omega * t)).norm() < 1e-14);
        assert!((m[(1, 1)] - Complex64::from_polar(1.0, omega * t)).norm() < 1e-14);
        assert!(m[(0, 1)].norm() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_hermitian(&mut rng, 5);
        let u0 = evolve_unitary(&h, 0.0);
        assert!(max_abs(&(u0.into_inner() - CMatrix::identity(5, 5))) < 1e-12);
    }

    #[test]
    fn evolve_two_level_closed_form() {
        // H = R n.sigma  =>  exp(-iHt) = cos(Rt) 1 - i sin(Rt) n.sigma
        let (r, theta, phi, t) = (0.8f64, 1.1f64, 2.3f64, 2.9f64);
        let n = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
        let ns = CMatrix::from_row_slice(
            2,
            2,
            &[c(n[2], 0.0), c(n[0], -n[1]), c(n[0], n[1]), c(-n[2], 0.0)],
        );
        let h = HermitianMatrix::new(&ns * c(r, 0.0)).unwrap();
        let u = evolve_unitary(&h, t);
        let expected = CMatrix::identity(2, 2) * c((r * t).cos(), 0.0) - &ns * c(0.0, (r * t).sin());
        assert!(max_abs(&(u.into_inner() - expected)) < 1e-12);
    }

    #[test]
    fn unitary_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = random_hermitian(&mut rng, 9);
        let u = evolve_unitary(&h, 4.2);
        assert!(u.unitarity_residual() < 1e-10);
        assert!((u.determinant().norm() - 1.0).abs() < 1e-10);
        assert!(UnitaryMatrix::new(CMatrix::identity(3, 3) * c(2.0, 0.0)).is_err());
    }

    /// Closed form `((z+s)^{n+1} - (z-s)^{n+1}) / (2s)`, `s = sqrt(z^2-1)`,
    /// evaluated with either square-root branch.
    fn chebyshev_closed(n: u32, z: Complex64, flip_branch: bool) -> Complex64 {
        let mut s = (z * z - 1.0).sqrt();
        if flip_branch {
            s = -s;
        }
        ((z + s).powu(n + 1) - (z - s).powu(n + 1)) / (s * 2.0)
    }

    #[test]
    fn chebyshev_low_degrees() {
        assert_eq!(chebyshev_u(0, c(0.3, 0.0)), c(1.0, 0.0));
        assert!((chebyshev_u(1, c(0.3, 0.0)) - c(0.6, 0.0)).norm() < 1e-15);
        let z = c(1.0 / 2f64.sqrt(), 0.0);
        assert!(chebyshev_u(3, z).norm() < 1e-15);
        let z = c(0.37, -0.21);
        let cubic = z * z * z * 8.0 - z * 4.0;
        assert!((chebyshev_u(3, z) - cubic).norm() < 1e-14);
    }

    #[test]
    fn chebyshev_matches_closed_form_on_both_branches() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let z = c(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
            let rec = chebyshev_u(5, z);
            let a = chebyshev_closed(5, z, false);
            let b = chebyshev_closed(5, z, true);
            assert!((rec - a).norm() < 1e-12 * (1.0 + rec.norm()), "{z}: {rec} vs {a}");
            assert!((a - b).norm() < 1e-12 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn scaled_recurrence_matches_plain() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let n = rng.gen_range(0..20);
            let s = rng.gen_range(0.1..2.0);
            let w = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let lhs = chebyshev_u_scaled(n, w, s);
            let rhs = chebyshev_u(n, w / s) * s.powi(n as i32);
            assert!((lhs - rhs).norm() < 1e-10 * (1.0 + rhs.norm()));
        }
        let w = c(0.3, 0.4);
        assert!((chebyshev_u_scaled(6, w, 0.0) - (w * 2.0).powu(6)).norm() < 1e-14);
    }

    #[test]
    fn chebyshev_roots_examples() {
        assert_eq!(chebyshev_roots(1).len(), 1);
        assert!(chebyshev_roots(1)[0].abs() < 1e-16);
        let r3 = chebyshev_roots(3);
        let h = 0.5f64.sqrt();
        assert!((r3[0] - h).abs() < 1e-15 && r3[1].abs() < 1e-15 && (r3[2] + h).abs() < 1e-15);
        for z in chebyshev_roots(4) {
            assert!(chebyshev_u(4, c(z, 0.0)).norm() < 1e-12);
        }
        let r = chebyshev_roots(10);
        assert!(r.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn principal_angle_conventions() {
        assert!((principal_angle(1.5 * PI).unwrap().value() + 0.5 * PI).abs() < 1e-15);
        assert_eq!(principal_angle(PI).unwrap().value(), PI);
        assert_eq!(principal_angle(-PI).unwrap().value(), PI);
        assert_eq!(principal_angle(3.0 * PI).unwrap().value(), PI);
        assert!(principal_angle(f64::NAN).is_err());
        assert!(principal_angle(f64::INFINITY).is_err());
        assert_eq!(Angle::arg(c(-1.0, -0.0)).value(), PI);
    }

    #[test]
    fn unwrap_examples() {
        let a = |x: f64| principal_angle(x).unwrap();
        assert_eq!(unwrap_phases(&[a(0.0), a(0.1), a(0.2)]), vec![0.0, 0.1, 0.2]);
        let u = unwrap_phases(&[a(3.0), a(-3.0)]);
        assert_eq!(u[0], 3.0);
        assert!((u[1] - (TAU - 3.0)).abs() < 1e-12);

        // arg(e^{ikw}) over [0, pi] winds by pi*w
        for w in [1, 3, -2, 5] {
            let n = 2001;
            let seq: Vec<Angle> = (0..n)
                .map(|i| {
                    let k = PI * i as f64 / (n - 1) as f64;
                    Angle::arg(Complex64::from_polar(1.0, k * w as f64))
                })
                .collect();
            let u = unwrap_phases(&seq);
            assert!((u[n - 1] - u[0] - PI * w as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn uniform_grid_shapes() {
        assert_eq!(uniform_grid(5.0, 1), vec![0.0]);
        let g = uniform_grid(12.0, 4000);
        assert_eq!(g.len(), 4000);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[3999], 12.0);
    }

    proptest! {
        #[test]
        fn group_property(seed in 0u64..1000, t1 in -5.0f64..5.0, t2 in -5.0f64..5.0, n in 1usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_hermitian(&mut rng, n);
            let lhs = evolve_unitary(&h, t1).compose(&evolve_unitary(&h, t2));
            let rhs = evolve_unitary(&h, t1 + t2);
            prop_assert!(max_abs(&(lhs.into_inner() - rhs.into_inner())) < 1e-9);
        }

        #[test]
        fn chebyshev_trig_identity(x in 1e-3f64..(PI - 1e-3), n in 0u32..25) {
            let u = chebyshev_u(n, c(x.cos(), 0.0));
            prop_assert!((u.re * x.sin() - ((n + 1) as f64 * x).sin()).abs() < 1e-10);
            prop_assert!(u.im == 0.0);
        }

        #[test]
        fn principal_angle_idempotent(x in -1e3f64..1e3) {
            let a = principal_angle(x).unwrap();
            prop_assert!(a.value() > -PI && a.value() <= PI);
            prop_assert_eq!(principal_angle(a.value()).unwrap(), a);
        }

        #[test]
        fn unwrap_then_fold_recovers(xs in proptest::collection::vec(-PI..PI, 1..50)) {
            let seq: Vec<Angle> = xs.iter().map(|&x| principal_angle(x).unwrap()).collect();
            let u = unwrap_phases(&seq);
            prop_assert_eq!(u[0], seq[0].value());
            for (orig, unwrapped) in seq.iter().zip(&u) {
                let back = principal_angle(*unwrapped).unwrap().value();
                prop_assert!(wrap_to_pi(back - orig.value()).abs() < 1e-12);
            }
            for w in u.windows(2) {
                let d = w[1] - w[0];
                prop_assert!(d > -PI - 1e-12 && d <= PI + 1e-12);
            }
        }
    }
}
