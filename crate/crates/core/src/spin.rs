//! Spin-j angular momentum, rotations, Larmor Hamiltonians and thermal states.
//!
//! The basis is the `J_z` eigenbasis ordered `m = j, j-1, ..., -j`, so row
//! `i` corresponds to `m = j - i`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numeric::{
    evolve_unitary, hermitian_eig, max_abs, CMatrix, HermitianMatrix, UnitaryMatrix,
};

/// Spin quantum number stored as `2j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SpinJ {
    twice_j: u32,
}

impl SpinJ {
    pub fn new(twice_j: u32) -> Result<Self> {
        if twice_j == 0 {
            return Err(Error::invalid("twice_j", "must be at least 1"));
        }
        Ok(Self { twice_j })
    }

    /// Parses `j` given as a number such as `0.5`, `1` or `1.5`.
    pub fn from_j(j: f64) -> Result<Self> {
        let twice = 2.0 * j;
        if !twice.is_finite() || (twice - twice.round()).abs() > 1e-9 || twice.round() < 1.0 {
            return Err(Error::invalid("j", format!("{j} is not a positive multiple of 1/2")));
        }
        Self::new(twice.round() as u32)
    }

    pub fn twice_j(self) -> u32 {
        self.twice_j
    }

    pub fn j(self) -> f64 {
        f64::from(self.twice_j) / 2.0
    }

    pub fn dim(self) -> usize {
        self.twice_j as usize + 1
    }

    /// Magnetic quantum numbers in basis order, `j` down to `-j`.
    pub fn m_values(self) -> Vec<f64> {
        let j = self.j();
        (0..self.dim()).map(|i| j - i as f64).collect()
    }
}

/// Unit vector `(sin th cos ph, sin th sin ph, cos th)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinDirection {
    theta: f64,
    phi: f64,
}

impl SpinDirection {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !(0.0..=PI).contains(&theta) {
            return Err(Error::invalid("theta", format!("{theta} outside [0, pi]")));
        }
        if !phi.is_finite() {
            return Err(Error::NonFinite(phi));
        }
        Ok(Self {
            theta,
            phi: phi.rem_euclid(2.0 * PI),
        })
    }

    pub fn z() -> Self {
        Self { theta: 0.0, phi: 0.0 }
    }

    pub fn x() -> Self {
        Self {
            theta: PI / 2.0,
            phi: 0.0,
        }
    }

    /// Direction of a nonzero 3-vector.
    pub fn from_vector(v: [f64; 3]) -> Result<Self> {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !(norm > 1e-300) || !norm.is_finite() {
            return Err(Error::invalid("direction", "zero or non-finite vector"));
        }
        let theta = (v[2] / norm).clamp(-1.0, 1.0).acos();
        let phi = v[1].atan2(v[0]);
        Self::new(theta, phi)
    }

    /// The direction making angle `arccos(dot)` with `base`, rotated towards
    /// the polar unit vector of `base`.
    pub fn at_overlap(base: SpinDirection, dot: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&dot) {
            return Err(Error::invalid("dot", format!("{dot} outside [-1, 1]")));
        }
        let b = base.unit_vector();
        let (st, ct) = base.theta.sin_cos();
        let (sp, cp) = base.phi.sin_cos();
        let polar = [ct * cp, ct * sp, -st];
        let perp = (1.0 - dot * dot).sqrt();
        Self::from_vector([
            dot * b[0] + perp * polar[0],
            dot * b[1] + perp * polar[1],
            dot * b[2] + perp * polar[2],
        ])
    }

    pub fn theta(self) -> f64 {
        self.theta
    }

    pub fn phi(self) -> f64 {
        self.phi
    }

    pub fn unit_vector(self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    pub fn dot(self, other: SpinDirection) -> f64 {
        let a = self.unit_vector();
        let b = other.unit_vector();
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    }
}

/// Temperature with exact zero and infinite limits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Temperature {
    Zero,
    Finite(f64),
    Infinite,
}

impl Temperature {
    pub fn finite(t: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::invalid("temperature", format!("{t} is not a positive finite value")));
        }
        Ok(Temperature::Finite(t))
    }

    /// `1/T`; `+inf` at zero temperature and `0` at infinite temperature.
    pub fn beta(self) -> f64 {
        match self {
            Temperature::Zero => f64::INFINITY,
            Temperature::Finite(t) => 1.0 / t,
            Temperature::Infinite => 0.0,
        }
    }

    /// `exp(-beta * gap)` for `gap >= 0`, exact at both limits.
    pub fn boltzmann(self, gap: f64) -> f64 {
        match self {
            Temperature::Zero => {
                if gap == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Temperature::Finite(t) => (-gap / t).exp(),
            Temperature::Infinite => 1.0,
        }
    }

    /// `tanh(beta * x)` for `x >= 0`, exact at both limits.
    pub fn tanh_beta(self, x: f64) -> f64 {
        match self {
            Temperature::Zero => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Temperature::Finite(t) => (x / t).tanh(),
            Temperature::Infinite => 0.0,
        }
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        let h = HermitianMatrix::new(m).map_err(|e| Error::InvalidDensity {
            reason: e.to_string(),
        })?;
        let trace = h.as_matrix().trace();
        if (trace.re - 1.0).abs() > 1e-12 || trace.im.abs() > 1e-12 {
            return Err(Error::InvalidDensity {
                reason: format!("trace {trace} != 1"),
            });
        }
        let min = hermitian_eig(&h).values[0];
        if min < -1e-12 {
            return Err(Error::InvalidDensity {
                reason: format!("negative eigenvalue {min:e}"),
            });
        }
        Ok(Self(h.into_inner()))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    /// `Tr[rho A]`.
    pub fn expectation(&self, a: &CMatrix) -> Complex64 {
        (&self.0 * a).trace()
    }
}

#[derive(Clone, Debug)]
pub struct SpinOperators {
    pub jx: HermitianMatrix,
    pub jy: HermitianMatrix,
    pub jz: HermitianMatrix,
}

impl SpinOperators {
    /// `n . J` for a real 3-vector `n`.
    pub fn along(&self, n: [f64; 3]) -> HermitianMatrix {
        HermitianMatrix::linear_combination(&[(n[0], &self.jx), (n[1], &self.jy), (n[2], &self.jz)])
            .expect("spin operators share a dimension")
    }
}

/// Ladder construction: `J_+ |m> = sqrt(j(j+1) - m(m+1)) |m+1>`.
pub fn spin_operators(s: SpinJ) -> SpinOperators {
    let dim = s.dim();
    let j = s.j();
    let m = s.m_values();
    let mut raise = CMatrix::zeros(dim, dim);
    for i in 1..dim {
        let mi = m[i];
        raise[(i - 1, i)] = Complex64::new((j * (j + 1.0) - mi * (mi + 1.0)).sqrt(), 0.0);
    }
    let lower = raise.adjoint();
    let jx = (&raise + &lower) * Complex64::new(0.5, 0.0);
    let jy = (&raise - &lower) * Complex64::new(0.0, -0.5);
    SpinOperators {
        jx: HermitianMatrix::symmetrized(jx),
        jy: HermitianMatrix::symmetrized(jy),
        jz: HermitianMatrix::from_real_diagonal(&m),
    }
}

/// `exp(-i phi J_z) exp(-i theta J_y)`.
pub fn rotation_unitary(s: SpinJ, theta: f64, phi: f64) -> UnitaryMatrix {
    let ops = spin_operators(s);
    rotation_with(&ops, theta, phi)
}

fn rotation_with(ops: &SpinOperators, theta: f64, phi: f64) -> UnitaryMatrix {
    evolve_unitary(&ops.jz, phi).compose(&evolve_unitary(&ops.jy, theta))
}

/// `omega0 * B.J`.
pub fn spin_hamiltonian(s: SpinJ, omega0: f64, dir: SpinDirection) -> Result<HermitianMatrix> {
    if !(omega0 > 0.0) || !omega0.is_finite() {
        return Err(Error::invalid("omega0", format!("{omega0} must be positive")));
    }
    let n = dir.unit_vector();
    Ok(spin_operators(s).along([omega0 * n[0], omega0 * n[1], omega0 * n[2]]))
}

#[derive(Clone, Debug)]
pub struct GibbsState {
    pub rho: DensityMatrix,
    /// `ln Z`. At zero temperature this is `ln Z + beta E_0`, i.e. the log
    /// of the ground degeneracy, which is 0 for an accepted state.
    pub log_z: f64,
}

/// `exp(-beta H) / Tr exp(-beta H)`, evaluated with eigenvalues shifted by the
/// ground energy.
pub fn gibbs_state(h: &HermitianMatrix, temperature: Temperature) -> Result<GibbsState> {
    let dim = h.dim();
    let eig = hermitian_eig(h);
    let e0 = eig.values[0];
    let scale = eig.values.iter().fold(1.0f64, |a, v| a.max(v.abs()));

    if let Temperature::Zero = temperature {
        let degeneracy = eig.values.iter().filter(|&&e| e - e0 <= 1e-10 * scale).count();
        if degeneracy > 1 {
            return Err(Error::DegenerateGroundState { degeneracy });
        }
    }
    if let Temperature::Infinite = temperature {
        let rho = CMatrix::identity(dim, dim) * Complex64::new(1.0 / dim as f64, 0.0);
        return Ok(GibbsState {
            rho: DensityMatrix(rho),
            log_z: (dim as f64).ln(),
        });
    }

    let weights: Vec<f64> = eig.values.iter().map(|&e| temperature.boltzmann(e - e0)).collect();
    let z_shifted: f64 = weights.iter().sum();
    let rho = eig.map(|e| Complex64::new(temperature.boltzmann(e - e0) / z_shifted, 0.0));
    let log_z = match temperature {
        Temperature::Finite(t) => z_shifted.ln() - e0 / t,
        _ => z_shifted.ln(),
    };
    Ok(GibbsState {
        rho: DensityMatrix(HermitianMatrix::symmetrized(rho).into_inner()),
        log_z,
    })
}

/// Max-norm residuals of the four rotation identities
///
/// ```text
/// e^{-i th Jy} Jz e^{i th Jy} = Jx sin th + Jz cos th
/// e^{-i ph Jz} Jx e^{i ph Jz} = Jx cos ph + Jy sin ph
/// e^{-i ph Jz} Jy e^{i ph Jz} = -Jx sin ph + Jy cos ph
/// e^{-i th Jy} Jx e^{i th Jy} = -Jz sin th + Jx cos th
/// ```
pub fn verify_cbh_identities(s: SpinJ, theta: f64, phi: f64) -> [f64; 4] {
    let ops = spin_operators(s);
    let ry = evolve_unitary(&ops.jy, theta);
    let rz = evolve_unitary(&ops.jz, phi);
    let (jx, jy, jz) = (ops.jx.as_matrix(), ops.jy.as_matrix(), ops.jz.as_matrix());
    let r = |x: f64| Complex64::new(x, 0.0);
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [
        max_abs(&(ry.conjugate(jz) - (jx * r(st) + jz * r(ct)))),
        max_abs(&(rz.conjugate(jx) - (jx * r(cp) + jy * r(sp)))),
        max_abs(&(rz.conjugate(jy) - (jx * r(-sp) + jy * r(cp)))),
        max_abs(&(ry.conjugate(jx) - (jz * r(-st) + jx * r(ct)))),
    ]
}

/// `max |[A, B]|`.
pub fn commutator_norm(a: &CMatrix, b: &CMatrix) -> f64 {
    max_abs(&(a * b - b * a))
}
