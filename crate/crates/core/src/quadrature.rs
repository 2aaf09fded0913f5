//! Boundary quadrature: periodic trapezoid on `[0, 2pi]`, composite
//! Gauss-Legendre on intervals, and a product rule on the unit sphere.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_PERIODIC_NODES: usize = 1024;
pub const DEFAULT_PANELS: usize = 64;
pub const DEFAULT_SPHERE_POLAR: usize = 64;
pub const DEFAULT_SPHERE_AZIMUTH: usize = 128;

/// Quadrature resolutions, overridable from a scenario config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Resolution {
    pub periodic_nodes: usize,
    pub panels: usize,
    pub sphere_polar: usize,
    pub sphere_azimuth: usize,
}

impl Default for Resolution {
    fn default() -> Self {
        Self {
            periodic_nodes: DEFAULT_PERIODIC_NODES,
            panels: DEFAULT_PANELS,
            sphere_polar: DEFAULT_SPHERE_POLAR,
            sphere_azimuth: DEFAULT_SPHERE_AZIMUTH,
        }
    }
}

impl Resolution {
    pub fn halved(&self) -> Self {
        let even = |n: usize| ((n / 2).max(4) + 1) & !1;
        Self {
            periodic_nodes: even(self.periodic_nodes),
            panels: (self.panels / 2).max(1),
            sphere_polar: (self.sphere_polar / 2).max(4),
            sphere_azimuth: even(self.sphere_azimuth),
        }
    }
}

/// Values of a function sampled at `theta_i = 2 pi i / N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicSamples {
    values: Vec<f64>,
}

impl PeriodicSamples {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "periodic sample count must be even and >= 4, got {n}"
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite periodic sample".into()));
        }
        Ok(Self { values })
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(periodic_nodes(n).map(f).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn angle(&self, i: usize) -> f64 {
        2.0 * PI * i as f64 / self.values.len() as f64
    }

    pub fn weight(&self) -> f64 {
        2.0 * PI / self.values.len() as f64
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }
}

pub fn periodic_nodes(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| 2.0 * PI * i as f64 / n as f64)
}

/// Trapezoid sum `(2 pi / N) sum f(theta_i)`.
pub fn integrate_periodic(f: impl Fn(f64) -> f64, n: usize) -> Result<f64> {
    if n < 4 || n % 2 != 0 {
        return Err(Error::InvalidInput(format!(
            "periodic node count must be even and >= 4, got {n}"
        )));
    }
    let s: f64 = periodic_nodes(n).map(f).sum();
    Ok(s * 2.0 * PI / n as f64)
}

/// `(int delta cos(m theta), int delta sin(m theta))` over `[0, 2 pi]`.
pub fn fourier_coeffs(delta: &PeriodicSamples, m: usize) -> Result<(f64, f64)> {
    let n = delta.len();
    if 2 * m >= n {
        return Err(Error::InvalidInput(format!(
            "Fourier order {m} aliases with {n} samples (needs m < N/2)"
        )));
    }
    let w = delta.weight();
    let (mut c, mut s) = (0.0, 0.0);
    for (i, v) in delta.values().iter().enumerate() {
        let (si, ci) = (m as f64 * delta.angle(i)).sin_cos();
        c += v * ci;
        s += v * si;
    }
    Ok((c * w, s * w))
}

/// Squared modulus `|delta_hat(m)|^2` of the order-`m` Fourier coefficient.
pub fn fourier_power(delta: &PeriodicSamples, m: usize) -> Result<f64> {
    let (c, s) = fourier_coeffs(delta, m)?;
    Ok(c * c + s * s)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, ascending nodes.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

const PANEL_POINTS: usize = 8;

/// Nodes and weights of the composite 8-point Gauss-Legendre rule on `[a, b]`.
pub fn composite_gauss(a: f64, b: f64, n_panels: usize) -> Result<Vec<(f64, f64)>> {
    if a >= b || n_panels == 0 {
        return Err(Error::InvalidInput(format!(
            "bad interval [{a}, {b}] with {n_panels} panels"
        )));
    }
    let (gx, gw) = gauss_legendre(PANEL_POINTS);
    let h = (b - a) / n_panels as f64;
    let mut out = Vec::with_capacity(n_panels * PANEL_POINTS);
    for p in 0..n_panels {
        let lo = a + p as f64 * h;
        for (x, w) in gx.iter().zip(&gw) {
            out.push((lo + 0.5 * h * (x + 1.0), 0.5 * h * w));
        }
    }
    Ok(out)
}

/// Composite 8-point Gauss-Legendre integral over `[a, b]`.
pub fn integrate_interval(f: impl Fn(f64) -> f64, a: f64, b: f64, n_panels: usize) -> Result<f64> {
    Ok(composite_gauss(a, b, n_panels)?
        .into_iter()
        .map(|(x, w)| w * f(x))
        .sum())
}

/// Product rule on the unit sphere: Gauss-Legendre in `z = cos(polar)` and
/// the trapezoid rule in azimuth.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    /// Exact for polynomials of degree `< min(2 n_polar, n_azimuth)`.
    pub fn new(n_polar: usize, n_azimuth: usize) -> Result<Self> {
        if n_polar < 2 || n_azimuth < 4 {
            return Err(Error::InvalidInput(format!(
                "sphere grid {n_polar}x{n_azimuth} too coarse"
            )));
        }
        let (zs, zw) = gauss_legendre(n_polar);
        let dphi = 2.0 * PI / n_azimuth as f64;
        let mut points = Vec::with_capacity(n_polar * n_azimuth);
        let mut weights = Vec::with_capacity(n_polar * n_azimuth);
        for (z, wz) in zs.iter().zip(&zw) {
            let r = (1.0 - z * z).sqrt();
            for j in 0..n_azimuth {
                let (s, c) = (j as f64 * dphi).sin_cos();
                points.push([r * c, r * s, *z]);
                weights.push(wz * dphi);
            }
        }
        Ok(Self { points, weights })
    }

    pub fn integrate(&self, f: impl Fn(&[f64; 3]) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }
}

pub fn integrate_sphere(f: impl Fn(&[f64; 3]) -> f64, n_polar: usize, n_azimuth: usize) -> Result<f64> {
    Ok(SphereRule::new(n_polar, n_azimuth)?.integrate(f))
}
