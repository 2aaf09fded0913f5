//! Closed-form multiple Dirichlet eigenspaces on the reference domains.
//!
//! Each basis is L2-orthonormal, so the Gram matrix `B` is the identity up
//! to quadrature error; the Gram record is still computed by quadrature and
//! carried along.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryPoint, DomainSpec, SQUARE_SIDE};
use crate::quadrature::{composite_gauss, SphereRule};
use crate::specfun::{
    bessel_zero, bessel_zeros, jn, jn_prime, jn_second, spherical_bessel_j1,
    spherical_bessel_j1_first_zero, spherical_bessel_j1_prime, spherical_bessel_j1_second,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Trig {
    Sin,
    Cos,
}

/// One closed-form eigenfunction.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mode {
    /// `scale * J_k(zero * rho) * trig(k theta)` in polar coordinates about
    /// `center`, zero outside the unit circle.
    Disk {
        order: u32,
        zero: f64,
        scale: f64,
        trig: Trig,
        center: [f64; 2],
    },
    /// `(2/pi) sin(s1 x1) sin(s2 x2)`.
    Square { s1: u32, s2: u32 },
    /// `scale * j1(kappa rho) x_axis / rho`.
    Ball { axis: usize, kappa: f64, scale: f64 },
}

impl Mode {
    pub fn value(&self, x: &[f64]) -> f64 {
        match *self {
            Mode::Disk {
                order,
                zero,
                scale,
                trig,
                center,
            } => {
                let (dx, dy) = (x[0] - center[0], x[1] - center[1]);
                let rho = dx.hypot(dy);
                if rho > 1.0 {
                    return 0.0;
                }
                let th = dy.atan2(dx);
                scale * jn(order, zero * rho) * trig_eval(trig, order as f64 * th)
            }
            Mode::Square { s1, s2 } => {
                2.0 / PI * (s1 as f64 * x[0]).sin() * (s2 as f64 * x[1]).sin()
            }
            Mode::Ball { axis, kappa, scale } => {
                let rho = norm(x);
                if rho < 1e-12 {
                    return 0.0;
                }
                scale * spherical_bessel_j1(kappa * rho) * x[axis] / rho
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match *self {
            Mode::Disk {
                order,
                zero,
                scale,
                trig,
                center,
            } => {
                let (dx, dy) = (x[0] - center[0], x[1] - center[1]);
                let rho = dx.hypot(dy);
                if rho > 1.0 + 1e-12 {
                    return vec![0.0, 0.0];
                }
                if rho < 1e-12 {
                    if order != 1 {
                        return vec![0.0, 0.0];
                    }
                    let g = 0.5 * scale * zero;
                    return match trig {
                        Trig::Sin => vec![0.0, g],
                        Trig::Cos => vec![g, 0.0],
                    };
                }
                let th = dy.atan2(dx);
                let k = order as f64;
                let (c, s) = (dx / rho, dy / rho);
                let d_rho = scale * zero * jn_prime(order, zero * rho) * trig_eval(trig, k * th);
                let d_th = scale * jn(order, zero * rho) * k * trig_prime(trig, k * th) / rho;
                vec![d_rho * c - d_th * s, d_rho * s + d_th * c]
            }
            Mode::Square { s1, s2 } => {
                let (a, b) = (s1 as f64, s2 as f64);
                vec![
                    2.0 / PI * a * (a * x[0]).cos() * (b * x[1]).sin(),
                    2.0 / PI * b * (a * x[0]).sin() * (b * x[1]).cos(),
                ]
            }
            Mode::Ball { axis, kappa, scale } => {
                let rho = norm(x);
                if rho < 1e-12 {
                    let mut g = vec![0.0; 3];
                    g[axis] = scale * kappa / 3.0;
                    return g;
                }
                let (f, fp) = ball_radial(kappa, scale, rho);
                (0..3)
                    .map(|i| {
                        let e = if i == axis { f } else { 0.0 };
                        e + fp * x[i] / rho * x[axis]
                    })
                    .collect()
            }
        }
    }

    /// Laplacian from the exact second derivatives of the closed form.
    pub fn laplacian(&self, x: &[f64]) -> f64 {
        match *self {
            Mode::Disk {
                order,
                zero,
                scale,
                trig,
                center,
            } => {
                let (dx, dy) = (x[0] - center[0], x[1] - center[1]);
                let rho = dx.hypot(dy);
                if rho > 1.0 {
                    return 0.0;
                }
                let th = dy.atan2(dx);
                let k = order as f64;
                let g = trig_eval(trig, k * th);
                let f = scale * jn(order, zero * rho);
                let fp = scale * zero * jn_prime(order, zero * rho);
                let fpp = scale * zero * zero * jn_second(order, zero * rho);
                fpp * g + fp * g / rho - k * k * f * g / (rho * rho)
            }
            Mode::Square { s1, s2 } => {
                let (a, b) = (s1 as f64, s2 as f64);
                let u = 2.0 / PI * (a * x[0]).sin() * (b * x[1]).sin();
                -a * a * u - b * b * u
            }
            Mode::Ball { axis, kappa, scale } => {
                // u = F(rho) x_axis with F = scale j1(kappa rho) / rho
                let rho = norm(x);
                let z = kappa * rho;
                let (j, jp, jpp) = (
                    spherical_bessel_j1(z),
                    spherical_bessel_j1_prime(z),
                    spherical_bessel_j1_second(z),
                );
                let fp = scale * (kappa * jp / rho - j / (rho * rho));
                let fpp = scale
                    * (kappa * kappa * jpp / rho - 2.0 * kappa * jp / (rho * rho)
                        + 2.0 * j / (rho * rho * rho));
                x[axis] * (fpp + 4.0 * fp / rho)
            }
        }
    }
}

fn ball_radial(kappa: f64, scale: f64, rho: f64) -> (f64, f64) {
    let z = kappa * rho;
    let j = spherical_bessel_j1(z);
    let jp = spherical_bessel_j1_prime(z);
    let f = scale * j / rho;
    let fp = scale * (kappa * jp / rho - j / (rho * rho));
    (f, fp)
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn trig_eval(t: Trig, a: f64) -> f64 {
    match t {
        Trig::Sin => a.sin(),
        Trig::Cos => a.cos(),
    }
}

fn trig_prime(t: Trig, a: f64) -> f64 {
    match t {
        Trig::Sin => a.cos(),
        Trig::Cos => -a.sin(),
    }
}

/// How a mode's amplitude was fixed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Normalization {
    /// Radial integral of the unscaled profile (`int f^2 rho^{n-1} d rho`),
    /// or 1 for modes normalized in closed form.
    pub radial_integral: f64,
    pub scale: f64,
    /// Common constant `c` with `du_i/dnu = c theta_i` on the sphere (ball only).
    pub trace_constant: Option<f64>,
}

/// A multiple eigenvalue with an L2-orthonormal basis of closed-form
/// eigenfunctions. Basis function `i` is `sum_m coeffs[(m, i)] * modes[m]`.
#[derive(Debug, Clone, Serialize)]
pub struct Eigenspace {
    pub domain: DomainSpec,
    pub lambda0: f64,
    pub label: String,
    pub modes: Vec<Mode>,
    #[serde(skip)]
    pub coeffs: DMatrix<f64>,
    #[serde(skip)]
    pub gram: DMatrix<f64>,
    pub normalization: Normalization,
}

impl Eigenspace {
    fn from_modes(domain: DomainSpec, lambda0: f64, label: String, modes: Vec<Mode>, normalization: Normalization) -> Self {
        let n = modes.len();
        let mut es = Self {
            domain,
            lambda0,
            label,
            modes,
            coeffs: DMatrix::identity(n, n),
            gram: DMatrix::zeros(n, n),
            normalization,
        };
        es.gram = es.compute_gram();
        es
    }

    pub fn dim(&self) -> usize {
        self.coeffs.ncols()
    }

    fn combine(&self, per_mode: &[f64], i: usize) -> f64 {
        per_mode
            .iter()
            .enumerate()
            .map(|(m, v)| self.coeffs[(m, i)] * v)
            .sum()
    }

    pub fn values(&self, x: &[f64]) -> Vec<f64> {
        let pm: Vec<f64> = self.modes.iter().map(|m| m.value(x)).collect();
        (0..self.dim()).map(|i| self.combine(&pm, i)).collect()
    }

    pub fn laplacians(&self, x: &[f64]) -> Vec<f64> {
        let pm: Vec<f64> = self.modes.iter().map(|m| m.laplacian(x)).collect();
        (0..self.dim()).map(|i| self.combine(&pm, i)).collect()
    }

    /// Normal derivatives `du_i/dnu` of every basis function at a boundary point.
    pub fn traces(&self, bp: &BoundaryPoint) -> Vec<f64> {
        let pm: Vec<f64> = self
            .modes
            .iter()
            .map(|m| {
                m.gradient(&bp.point)
                    .iter()
                    .zip(&bp.normal)
                    .map(|(g, n)| g * n)
                    .sum()
            })
            .collect();
        (0..self.dim()).map(|i| self.combine(&pm, i)).collect()
    }

    /// The same space with basis `u'_j = sum_i q[(i, j)] u_i`.
    pub fn with_basis(&self, q: &DMatrix<f64>) -> Result<Self> {
        if q.nrows() != self.dim() || q.ncols() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "basis change is {}x{}, eigenspace has dimension {}",
                q.nrows(),
                q.ncols(),
                self.dim()
            )));
        }
        let mut es = self.clone();
        es.coeffs = &self.coeffs * q;
        es.gram = q.transpose() * &self.gram * q;
        Ok(es)
    }

    /// Interior quadrature rule used for the Gram record.
    pub fn interior_rule(&self) -> Vec<(Vec<f64>, f64)> {
        interior_rule(&self.domain)
    }

    fn compute_gram(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut g = DMatrix::zeros(n, n);
        for (x, w) in self.interior_rule() {
            let v = self.values(&x);
            for i in 0..n {
                for j in 0..=i {
                    g[(i, j)] += w * v[i] * v[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                g[(j, i)] = g[(i, j)];
            }
        }
        g
    }
}

fn disk_rule(center: [f64; 2]) -> Vec<(Vec<f64>, f64)> {
    let radial = composite_gauss(0.0, 1.0, 24).expect("valid interval");
    let n_th = 96;
    let dth = 2.0 * PI / n_th as f64;
    let mut out = Vec::with_capacity(radial.len() * n_th);
    for (r, wr) in &radial {
        for j in 0..n_th {
            let (s, c) = (j as f64 * dth).sin_cos();
            out.push((vec![center[0] + r * c, center[1] + r * s], wr * r * dth));
        }
    }
    out
}

fn interior_rule(domain: &DomainSpec) -> Vec<(Vec<f64>, f64)> {
    match domain {
        DomainSpec::UnitDisk => disk_rule([0.0, 0.0]),
        DomainSpec::Square => {
            let g = composite_gauss(0.0, SQUARE_SIDE, 16).expect("valid interval");
            let mut out = Vec::with_capacity(g.len() * g.len());
            for (x, wx) in &g {
                for (y, wy) in &g {
                    out.push((vec![*x, *y], wx * wy));
                }
            }
            out
        }
        DomainSpec::UnitBall3d => {
            let radial = composite_gauss(0.0, 1.0, 8).expect("valid interval");
            let sphere = SphereRule::new(16, 32).expect("valid grid");
            let mut out = Vec::with_capacity(radial.len() * sphere.points.len());
            for (r, wr) in &radial {
                for (p, ws) in sphere.points.iter().zip(&sphere.weights) {
                    out.push((vec![r * p[0], r * p[1], r * p[2]], wr * r * r * ws));
                }
            }
            out
        }
        DomainSpec::DisjointPair { offset, .. } => {
            let mut out = disk_rule([0.0, 0.0]);
            out.extend(disk_rule(*offset));
            out
        }
    }
}

/// `int_0^1 J_k(zero rho)^2 rho d rho`.
fn disk_radial_integral(k: u32, zero: f64) -> f64 {
    composite_gauss(0.0, 1.0, 32)
        .expect("valid interval")
        .into_iter()
        .map(|(r, w)| {
            let v = jn(k, zero * r);
            w * v * v * r
        })
        .sum()
}

/// Eigenspace `{J_k(j rho) sin(k theta), J_k(j rho) cos(k theta)}` of the unit
/// disk, `j` the `m`-th zero of `J_k`, eigenvalue `j^2`.
pub fn disk_eigenspace(k: u32, m: u32) -> Result<Eigenspace> {
    if k == 0 {
        return Err(Error::UnsupportedMultiplicity(
            "angular order 0 gives simple disk eigenvalues".into(),
        ));
    }
    let zero = bessel_zero(k, m)?.value;
    let radial = disk_radial_integral(k, zero);
    let scale = 1.0 / (PI * radial).sqrt();
    let modes = [Trig::Sin, Trig::Cos]
        .into_iter()
        .map(|trig| Mode::Disk {
            order: k,
            zero,
            scale,
            trig,
            center: [0.0, 0.0],
        })
        .collect();
    Ok(Eigenspace::from_modes(
        DomainSpec::UnitDisk,
        zero * zero,
        format!("disk({k},{m})"),
        modes,
        Normalization {
            radial_integral: radial,
            scale,
            trace_constant: None,
        },
    ))
}

/// All lattice points `(a, b)`, `a, b >= 1`, with `a^2 + b^2 = n`.
pub fn lattice_solutions(n: u64) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    let mut a = 1u64;
    while a * a < n {
        let rest = n - a * a;
        let b = (rest as f64).sqrt().round() as u64;
        if b >= 1 && b * b == rest {
            out.push((a as u32, b as u32));
        }
        a += 1;
    }
    out
}

/// Two-dimensional eigenspace `{u_(s1,s2), u_(s2,s1)}` of the square.
pub fn square_eigenspace(s1: u32, s2: u32) -> Result<Eigenspace> {
    if s1 == 0 || s2 == 0 {
        return Err(Error::InvalidInput("square mode indices must be positive".into()));
    }
    if s1 == s2 {
        return Err(Error::UnsupportedMultiplicity(format!(
            "({s1},{s2}) gives a simple eigenvalue"
        )));
    }
    let lambda = (s1 as u64).pow(2) + (s2 as u64).pow(2);
    let sols = lattice_solutions(lambda);
    if sols.len() != 2 {
        return Err(Error::UnsupportedMultiplicity(format!(
            "eigenvalue {lambda} has {} lattice representations {sols:?}; only 2 are supported",
            sols.len()
        )));
    }
    let modes = vec![Mode::Square { s1, s2 }, Mode::Square { s1: s2, s2: s1 }];
    Ok(Eigenspace::from_modes(
        DomainSpec::Square,
        lambda as f64,
        format!("square({s1},{s2})"),
        modes,
        Normalization {
            radial_integral: 1.0,
            scale: 2.0 / PI,
            trace_constant: None,
        },
    ))
}

/// Second Dirichlet eigenspace of the unit ball in R^3: `j1(kappa rho) x_i / rho`
/// with `kappa` the first root of `tan x = x`.
pub fn ball3d_second_eigenspace() -> Eigenspace {
    let kappa = spherical_bessel_j1_first_zero();
    let radial: f64 = composite_gauss(0.0, 1.0, 16)
        .expect("valid interval")
        .into_iter()
        .map(|(r, w)| {
            let v = spherical_bessel_j1(kappa * r);
            w * v * v * r * r
        })
        .sum();
    let scale = 1.0 / (4.0 * PI / 3.0 * radial).sqrt();
    let trace_constant = scale * kappa * spherical_bessel_j1_prime(kappa);
    let modes = (0..3)
        .map(|axis| Mode::Ball { axis, kappa, scale })
        .collect();
    Eigenspace::from_modes(
        DomainSpec::UnitBall3d,
        kappa * kappa,
        "ball3d(second)".into(),
        modes,
        Normalization {
            radial_integral: radial,
            scale,
            trace_constant: Some(trace_constant),
        },
    )
}

/// Principal eigenfunctions of the two components of a disjoint pair of disks.
pub fn disjoint_pair_eigenspace(domain: &DomainSpec) -> Result<Eigenspace> {
    let DomainSpec::DisjointPair { base, offset } = domain else {
        return Err(Error::InvalidInput(format!(
            "expected a disjoint pair, got {}",
            domain.name()
        )));
    };
    if **base != DomainSpec::UnitDisk {
        return Err(Error::InvalidInput(
            "closed-form pair eigenspace needs unit-disk components".into(),
        ));
    }
    let zero = bessel_zero(0, 1)?.value;
    let radial = disk_radial_integral(0, zero);
    let scale = 1.0 / (2.0 * PI * radial).sqrt();
    let modes = [[0.0, 0.0], *offset]
        .into_iter()
        .map(|center| Mode::Disk {
            order: 0,
            zero,
            scale,
            trig: Trig::Cos,
            center,
        })
        .collect();
    Ok(Eigenspace::from_modes(
        domain.clone(),
        zero * zero,
        "pair(principal)".into(),
        modes,
        Normalization {
            radial_integral: radial,
            scale,
            trace_constant: None,
        },
    ))
}

/// Exact Dirichlet eigenvalues up to `upto`, repeated by multiplicity.
pub fn exact_spectrum(domain: &DomainSpec, upto: f64) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    match domain {
        DomainSpec::UnitDisk => {
            if upto > 600.0 {
                return Err(Error::OutOfRange(format!("disk spectrum tabulated below 600, asked {upto}")));
            }
            for k in 0..=crate::specfun::MAX_ZERO_ORDER {
                for &j in bessel_zeros(k)? {
                    if j * j <= upto {
                        out.push(j * j);
                        if k > 0 {
                            out.push(j * j);
                        }
                    }
                }
            }
        }
        DomainSpec::Square => {
            let top = upto.floor() as u64;
            for a in 1..=(top as f64).sqrt() as u64 {
                for b in 1..=(top as f64).sqrt() as u64 {
                    if a * a + b * b <= top {
                        out.push((a * a + b * b) as f64);
                    }
                }
            }
        }
        DomainSpec::DisjointPair { base, .. } => {
            for v in exact_spectrum(base, upto)? {
                out.push(v);
                out.push(v);
            }
        }
        DomainSpec::UnitBall3d => {
            return Err(Error::InvalidInput("ball spectrum is not tabulated".into()));
        }
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}
