//! The boundary matrices `A_ij = int (du_i/dnu)(du_j/dnu) delta dS` and
//! `B_ij = <u_i, u_j>`, assembled by direct boundary quadrature and by
//! Fourier closed forms, and the slope predictions they imply.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::{boundary_normal, BoundaryParam, DomainSpec, PanelSamples, SpeedField, NormalSpeed, SQUARE_SIDE};
use crate::modes::{Eigenspace, Mode};
use crate::pencil::{generalized_roots, simplicity_tolerance, PencilRoots};
use crate::quadrature::fourier_coeffs;
use crate::specfun::jn_prime;

pub(crate) fn matrix_rows<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect();
    rows.serialize(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Quadrature,
    ClosedForm,
}

#[derive(Debug, Clone, Serialize)]
pub struct PencilMatrices {
    #[serde(serialize_with = "matrix_rows")]
    pub a: DMatrix<f64>,
    #[serde(serialize_with = "matrix_rows")]
    pub b: DMatrix<f64>,
    pub provenance: Provenance,
    pub eigenspace: String,
    pub lambda0: f64,
}

impl PencilMatrices {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Entrywise largest difference of `A` against another assembly.
    pub fn max_a_difference(&self, other: &PencilMatrices) -> f64 {
        (&self.a - &other.a).amax()
    }
}

fn symmetrize(mut a: DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
    a
}

/// Boundary parameters with their weights times the normal speed.
fn weighted_nodes(domain: &DomainSpec, field: &SpeedField) -> Result<Vec<(BoundaryParam, f64)>> {
    match (domain, field) {
        (DomainSpec::UnitDisk, SpeedField::Circle { samples }) => {
            let w = samples.weight();
            Ok((0..samples.len())
                .map(|i| (BoundaryParam::Angle(samples.angle(i)), w * samples.values()[i]))
                .collect())
        }
        (DomainSpec::Square, SpeedField::Square { speed }) => {
            // eta: bottom edge, then top (right to left); mu: left edge, then right
            let l = SQUARE_SIDE;
            let mut out = Vec::new();
            for (k, s) in speed.eta.nodes.iter().enumerate() {
                let p = if *s < l { *s } else { 4.0 * l - s };
                out.push((BoundaryParam::Perimeter(p), speed.eta.weights[k] * speed.eta.values[k]));
            }
            for (k, s) in speed.mu.nodes.iter().enumerate() {
                let p = if *s < l { 4.0 * l - s } else { *s };
                out.push((BoundaryParam::Perimeter(p), speed.mu.weights[k] * speed.mu.values[k]));
            }
            Ok(out)
        }
        (DomainSpec::UnitBall3d, SpeedField::Sphere { samples }) => Ok(samples
            .rule
            .points
            .iter()
            .zip(&samples.rule.weights)
            .zip(&samples.values)
            .map(|((p, w), v)| (BoundaryParam::Direction(*p), w * v))
            .collect()),
        (DomainSpec::DisjointPair { base, .. }, SpeedField::Pair { components }) => {
            let mut out = Vec::new();
            for (c, f) in components.iter().enumerate() {
                for (p, w) in weighted_nodes(base, f)? {
                    let param = match p {
                        BoundaryParam::Angle(x) | BoundaryParam::Perimeter(x) => x,
                        other => {
                            return Err(Error::InvalidInput(format!("unexpected pair parameter {other:?}")))
                        }
                    };
                    out.push((BoundaryParam::Component { component: c, param }, w));
                }
            }
            Ok(out)
        }
        (d, _) => Err(Error::InvalidInput(format!(
            "normal speed does not match domain {}",
            d.name()
        ))),
    }
}

/// `A` by direct quadrature of the trace products against the sampled speed.
pub fn assemble_quadrature(space: &Eigenspace, speed: &NormalSpeed) -> Result<PencilMatrices> {
    let n = space.dim();
    let mut a = DMatrix::zeros(n, n);
    for (param, w) in weighted_nodes(&space.domain, &speed.field)? {
        let bp = boundary_normal(&space.domain, param)?;
        let tr = space.traces(&bp);
        if tr.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite trace at {param:?}")));
        }
        for i in 0..n {
            for j in 0..=i {
                a[(i, j)] += w * tr[i] * tr[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            a[(j, i)] = a[(i, j)];
        }
    }
    Ok(PencilMatrices {
        a,
        b: space.gram.clone(),
        provenance: Provenance::Quadrature,
        eigenspace: space.label.clone(),
        lambda0: space.lambda0,
    })
}

/// Pulls a matrix in the canonical mode basis back to the space's basis.
fn to_space_basis(space: &Eigenspace, a_modes: DMatrix<f64>) -> DMatrix<f64> {
    symmetrize(space.coeffs.transpose() * a_modes * &space.coeffs)
}

fn closed(space: &Eigenspace, a_modes: DMatrix<f64>) -> PencilMatrices {
    PencilMatrices {
        a: to_space_basis(space, a_modes),
        b: space.gram.clone(),
        provenance: Provenance::ClosedForm,
        eigenspace: space.label.clone(),
        lambda0: space.lambda0,
    }
}

/// Radial trace `f'(1)` of a normalized disk mode.
fn disk_trace_scale(mode: &Mode) -> Result<(u32, f64)> {
    match *mode {
        Mode::Disk { order, zero, scale, .. } => Ok((order, scale * zero * jn_prime(order, zero))),
        _ => Err(Error::InvalidInput("expected a disk mode".into())),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DiskClosedForm {
    pub matrices: PencilMatrices,
    /// `|delta_hat(2k)|^2`.
    pub discriminant: f64,
    /// `int delta`, `int delta cos(2k theta)`, `int delta sin(2k theta)`.
    pub mean_coefficient: f64,
    pub cos_coefficient: f64,
    pub sin_coefficient: f64,
    pub trace_scale: f64,
}

/// Disk `A` from the Fourier coefficients of `delta` at orders 0 and `2k`.
pub fn disk_closed_form(space: &Eigenspace, speed: &NormalSpeed) -> Result<DiskClosedForm> {
    let (DomainSpec::UnitDisk, SpeedField::Circle { samples }) = (&space.domain, &speed.field) else {
        return Err(Error::InvalidInput("disk closed form needs a disk eigenspace and circle speed".into()));
    };
    let (k, fp) = disk_trace_scale(&space.modes[0])?;
    let (c0, _) = fourier_coeffs(samples, 0)?;
    let (c2, s2) = fourier_coeffs(samples, 2 * k as usize)?;
    let f2 = fp * fp;
    // modes are ordered (sin, cos)
    let a_modes = DMatrix::from_row_slice(
        2,
        2,
        &[
            0.5 * f2 * (c0 - c2),
            0.5 * f2 * s2,
            0.5 * f2 * s2,
            0.5 * f2 * (c0 + c2),
        ],
    );
    Ok(DiskClosedForm {
        matrices: closed(space, a_modes),
        discriminant: c2 * c2 + s2 * s2,
        mean_coefficient: c0,
        cos_coefficient: c2,
        sin_coefficient: s2,
        trace_scale: fp,
    })
}

/// Cosine coefficients `int_0^{2 pi} g(t) cos(k t) dt` of an edge-pair function.
#[derive(Debug, Clone, Serialize)]
pub struct CosineTable {
    pub entries: Vec<(u32, f64)>,
}

impl CosineTable {
    pub fn from_samples(samples: &PanelSamples, orders: &[u32]) -> Self {
        let mut ks: Vec<u32> = orders.to_vec();
        ks.sort_unstable();
        ks.dedup();
        let entries = ks
            .into_iter()
            .map(|k| (k, samples.integrate(|t| (k as f64 * t).cos())))
            .collect();
        Self { entries }
    }

    pub fn get(&self, k: u32) -> Result<f64> {
        self.entries
            .iter()
            .find(|(j, _)| *j == k)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::InvalidInput(format!("cosine coefficient of order {k} missing")))
    }
}

/// Orders needed by the square closed form for the pair `(s1, s2)`.
pub fn square_orders(s1: u32, s2: u32) -> Vec<u32> {
    vec![0, s1.abs_diff(s2), s1 + s2, 2 * s1, 2 * s2]
}

#[derive(Debug, Clone, Serialize)]
pub struct SquareClosedForm {
    pub matrices: PencilMatrices,
    pub eta_hat: CosineTable,
    pub mu_hat: CosineTable,
    /// Off-diagonal entry nonzero.
    pub condition_offdiagonal: bool,
    /// Diagonal entries differ.
    pub condition_diagonal: bool,
    /// Either condition holds, so `A` has two simple eigenvalues.
    pub simple: bool,
}

/// Square `A` for the modes `(s1, s2)`, `(s2, s1)` from cosine tables of the
/// edge-pair speeds.
pub fn square_closed_form_from_tables(s1: u32, s2: u32, eta: &CosineTable, mu: &CosineTable) -> Result<(DMatrix<f64>, bool, bool)> {
    let (a, b) = (s1 as f64, s2 as f64);
    let pi2 = PI * PI;
    let diag = |p: f64, q: f64, sp: u32, sq: u32| -> Result<f64> {
        Ok(2.0 * p * p / pi2 * (mu.get(0)? - mu.get(2 * sq)?) + 2.0 * q * q / pi2 * (eta.get(0)? - eta.get(2 * sp)?))
    };
    let a_ss = diag(a, b, s1, s2)?;
    let a_bb = diag(b, a, s2, s1)?;
    let d = s1.abs_diff(s2);
    let sum = s1 + s2;
    let a_sb = 2.0 * a * b / pi2 * (mu.get(d)? - mu.get(sum)? + eta.get(d)? - eta.get(sum)?);
    let m = DMatrix::from_row_slice(2, 2, &[a_ss, a_sb, a_sb, a_bb]);
    let radius = (0.5 * (a_ss + a_bb)).abs() + 0.5 * (a_ss - a_bb).hypot(2.0 * a_sb);
    let tol = simplicity_tolerance(&[radius]);
    Ok((m, 2.0 * a_sb.abs() > tol, (a_ss - a_bb).abs() > tol))
}

/// Square `A` in closed form, with the two genericity flags.
pub fn square_closed_form(space: &Eigenspace, speed: &NormalSpeed) -> Result<SquareClosedForm> {
    let (DomainSpec::Square, SpeedField::Square { speed: sq }) = (&space.domain, &speed.field) else {
        return Err(Error::InvalidInput("square closed form needs a square eigenspace and edge speeds".into()));
    };
    let (s1, s2) = match space.modes[0] {
        Mode::Square { s1, s2 } => (s1, s2),
        _ => return Err(Error::InvalidInput("expected square modes".into())),
    };
    let orders = square_orders(s1, s2);
    let eta_hat = CosineTable::from_samples(&sq.eta, &orders);
    let mu_hat = CosineTable::from_samples(&sq.mu, &orders);
    let (a_modes, c1, c2) = square_closed_form_from_tables(s1, s2, &eta_hat, &mu_hat)?;
    Ok(SquareClosedForm {
        matrices: closed(space, a_modes),
        eta_hat,
        mu_hat,
        condition_offdiagonal: c1,
        condition_diagonal: c2,
        simple: c1 || c2,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BallClosedForm {
    pub matrices: PencilMatrices,
    /// Scalar part `a = tau^2 int theta_1^2 delta`.
    pub scalar: f64,
    /// `A - a Id`.
    #[serde(serialize_with = "matrix_rows")]
    pub remainder: DMatrix<f64>,
    /// `F_i = int (theta_i^2 - theta_1^2) delta`.
    pub f: [f64; 3],
    /// Moments `C_ij = int theta_i theta_j delta`.
    #[serde(serialize_with = "matrix_rows")]
    pub moments: DMatrix<f64>,
    pub trace_constant: f64,
}

/// Ball `A` from the degree-2 moments of `delta` on the sphere.
pub fn ball3d_closed_form(space: &Eigenspace, speed: &NormalSpeed) -> Result<BallClosedForm> {
    let (DomainSpec::UnitBall3d, SpeedField::Sphere { samples }) = (&space.domain, &speed.field) else {
        return Err(Error::InvalidInput("ball closed form needs a ball eigenspace and sphere speed".into()));
    };
    let tau = space
        .normalization
        .trace_constant
        .ok_or_else(|| Error::InvalidInput("ball eigenspace lacks a trace constant".into()))?;
    let t2 = tau * tau;
    let mut moments = DMatrix::zeros(3, 3);
    for i in 0..3 {
        for j in 0..=i {
            let v = samples.integrate(|p| p[i] * p[j]);
            moments[(i, j)] = v;
            moments[(j, i)] = v;
        }
    }
    let f = [0.0, moments[(1, 1)] - moments[(0, 0)], moments[(2, 2)] - moments[(0, 0)]];
    let scalar = t2 * moments[(0, 0)];
    let mut remainder = DMatrix::zeros(3, 3);
    for i in 0..3 {
        remainder[(i, i)] = t2 * f[i];
        for j in 0..3 {
            if i != j {
                remainder[(i, j)] = t2 * moments[(i, j)];
            }
        }
    }
    let a_modes = DMatrix::identity(3, 3) * scalar + &remainder;
    Ok(BallClosedForm {
        matrices: closed(space, a_modes),
        scalar,
        remainder,
        f,
        moments,
        trace_constant: tau,
    })
}

/// Disjoint pair: `A` is diagonal with the per-component Hadamard integrals.
pub fn pair_closed_form(space: &Eigenspace, speed: &NormalSpeed) -> Result<PencilMatrices> {
    let (DomainSpec::DisjointPair { .. }, SpeedField::Pair { components }) = (&space.domain, &speed.field) else {
        return Err(Error::InvalidInput("pair closed form needs a pair eigenspace and pair speed".into()));
    };
    let (_, fp) = disk_trace_scale(&space.modes[0])?;
    let mut a = DMatrix::zeros(2, 2);
    for (c, f) in components.iter().enumerate() {
        let SpeedField::Circle { samples } = f else {
            return Err(Error::InvalidInput("pair closed form needs disk components".into()));
        };
        a[(c, c)] = fp * fp * fourier_coeffs(samples, 0)?.0;
    }
    Ok(closed(space, a))
}

/// Closed-form `A` for whichever domain the eigenspace lives on.
pub fn assemble_closed_form(space: &Eigenspace, speed: &NormalSpeed) -> Result<PencilMatrices> {
    Ok(match space.domain {
        DomainSpec::UnitDisk => disk_closed_form(space, speed)?.matrices,
        DomainSpec::Square => square_closed_form(space, speed)?.matrices,
        DomainSpec::UnitBall3d => ball3d_closed_form(space, speed)?.matrices,
        DomainSpec::DisjointPair { .. } => pair_closed_form(space, speed)?,
    })
}

/// A group of pencil roots within the simplicity tolerance of each other.
#[derive(Debug, Clone, Serialize)]
pub struct RootCluster {
    pub root: f64,
    pub multiplicity: usize,
    /// `-root`. Binding only when the cluster is a simple root.
    pub slope: f64,
    pub simple: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopePrediction {
    pub roots: PencilRoots,
    pub clusters: Vec<RootCluster>,
    /// Predicted `lambda'(0)` of every simple root, ascending.
    pub simple_slopes: Vec<f64>,
    /// `-trace(B^{-1} A)`, the sum of all branch slopes.
    pub slope_sum: f64,
    pub inconclusive: bool,
}

/// Roots of `det(A - sB)` and the slopes `lambda'(0) = -mu` they predict.
pub fn predict_slopes(p: &PencilMatrices) -> Result<SlopePrediction> {
    let roots = generalized_roots(&p.a, &p.b)?;
    let mut clusters: Vec<RootCluster> = Vec::new();
    let mut start = 0;
    for i in 0..roots.dim() {
        let end_here = i + 1 == roots.dim() || roots.gaps[i] > roots.tolerance;
        if end_here {
            let group = &roots.roots[start..=i];
            let mean = group.iter().sum::<f64>() / group.len() as f64;
            clusters.push(RootCluster {
                root: mean,
                multiplicity: group.len(),
                slope: -mean,
                simple: group.len() == 1,
            });
            start = i + 1;
        }
    }
    let mut simple_slopes: Vec<f64> = clusters.iter().filter(|c| c.simple).map(|c| c.slope).collect();
    simple_slopes.sort_by(f64::total_cmp);
    let slope_sum = -roots.roots.iter().sum::<f64>();
    let inconclusive = clusters.iter().any(|c| !c.simple);
    Ok(SlopePrediction {
        roots,
        clusters,
        simple_slopes,
        slope_sum,
        inconclusive,
    })
}
