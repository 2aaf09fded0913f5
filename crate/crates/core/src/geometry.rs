//! Reference domains, one-parameter deformation families `phi_t`, and the
//! normal speed `delta = phi_bar . nu` they induce on the boundary.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{composite_gauss, PeriodicSamples, Resolution, SphereRule};

/// Side length of the reference square `[0, pi]^2`.
pub const SQUARE_SIDE: f64 = PI;
/// Default minimum gap between the two components of a disjoint pair.
pub const DEFAULT_PAIR_MARGIN: f64 = 0.1;
const CORNER_TOL: f64 = 1e-14;

/// One of the reference domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    /// Unit disk centred at the origin.
    UnitDisk,
    /// The square `[0, pi]^2`.
    Square,
    /// Unit ball in R^3 centred at the origin.
    UnitBall3d,
    /// `base` and `base + offset`, at positive distance from each other.
    DisjointPair {
        base: Box<DomainSpec>,
        offset: [f64; 2],
    },
}

impl DomainSpec {
    pub fn disjoint_pair(base: DomainSpec, offset: [f64; 2], margin: f64) -> Result<Self> {
        let d = DomainSpec::DisjointPair {
            base: Box::new(base),
            offset,
        };
        d.validate(margin)?;
        Ok(d)
    }

    pub fn validate(&self, margin: f64) -> Result<()> {
        if let DomainSpec::DisjointPair { base, offset } = self {
            let sep = match base.as_ref() {
                DomainSpec::UnitDisk => offset[0].hypot(offset[1]) - 2.0,
                DomainSpec::Square => {
                    let gx = (offset[0].abs() - SQUARE_SIDE).max(0.0);
                    let gy = (offset[1].abs() - SQUARE_SIDE).max(0.0);
                    gx.hypot(gy)
                }
                _ => {
                    return Err(Error::InvalidInput(
                        "disjoint pair needs a 2D disk or square base".into(),
                    ))
                }
            };
            if sep <= margin {
                return Err(Error::InvalidInput(format!(
                    "pair components are {sep:.4} apart, margin is {margin}"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::UnitBall3d => 3,
            _ => 2,
        }
    }

    /// Centre used by the dilation family and as the local frame origin.
    pub fn center(&self) -> Vec<f64> {
        match self {
            DomainSpec::UnitDisk => vec![0.0, 0.0],
            DomainSpec::Square => vec![0.5 * SQUARE_SIDE, 0.5 * SQUARE_SIDE],
            DomainSpec::UnitBall3d => vec![0.0, 0.0, 0.0],
            DomainSpec::DisjointPair { base, .. } => base.center(),
        }
    }

    /// Offsets of the connected components (one entry unless a pair).
    pub fn component_offsets(&self) -> Vec<[f64; 2]> {
        match self {
            DomainSpec::DisjointPair { offset, .. } => vec![[0.0, 0.0], *offset],
            _ => vec![[0.0, 0.0]],
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            DomainSpec::UnitDisk => x[0].hypot(x[1]) < 1.0,
            DomainSpec::Square => {
                x[0] > 0.0 && x[0] < SQUARE_SIDE && x[1] > 0.0 && x[1] < SQUARE_SIDE
            }
            DomainSpec::UnitBall3d => x.iter().map(|v| v * v).sum::<f64>() < 1.0,
            DomainSpec::DisjointPair { base, offset } => {
                base.contains(x) || base.contains(&[x[0] - offset[0], x[1] - offset[1]])
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DomainSpec::UnitDisk => "disk",
            DomainSpec::Square => "square",
            DomainSpec::UnitBall3d => "ball3d",
            DomainSpec::DisjointPair { .. } => "disjoint_pair",
        }
    }
}

/// Where on the boundary to evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryParam {
    /// Polar angle on the unit circle.
    Angle(f64),
    /// Counter-clockwise arclength on the square, starting at the origin;
    /// corners sit at multiples of pi.
    Perimeter(f64),
    /// Direction on the unit sphere (normalized internally).
    Direction([f64; 3]),
    /// Parameter of the base domain on component `component` of a pair.
    Component { component: usize, param: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint {
    pub point: Vec<f64>,
    pub normal: Vec<f64>,
}

/// Boundary point and outward unit normal for a boundary parameter.
pub fn boundary_normal(domain: &DomainSpec, param: BoundaryParam) -> Result<BoundaryPoint> {
    match (domain, param) {
        (DomainSpec::UnitDisk, BoundaryParam::Angle(theta)) => {
            let (s, c) = theta.sin_cos();
            Ok(BoundaryPoint {
                point: vec![c, s],
                normal: vec![c, s],
            })
        }
        (DomainSpec::Square, BoundaryParam::Perimeter(s)) => square_boundary(s),
        (DomainSpec::UnitBall3d, BoundaryParam::Direction(d)) => {
            let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if n == 0.0 || !n.is_finite() {
                return Err(Error::InvalidInput("zero direction on the sphere".into()));
            }
            let u = vec![d[0] / n, d[1] / n, d[2] / n];
            Ok(BoundaryPoint {
                point: u.clone(),
                normal: u,
            })
        }
        (DomainSpec::DisjointPair { base, offset }, BoundaryParam::Component { component, param }) => {
            if component > 1 {
                return Err(Error::OutOfRange(format!("pair component {component}")));
            }
            let inner = match base.as_ref() {
                DomainSpec::UnitDisk => BoundaryParam::Angle(param),
                _ => BoundaryParam::Perimeter(param),
            };
            let mut bp = boundary_normal(base, inner)?;
            if component == 1 {
                bp.point[0] += offset[0];
                bp.point[1] += offset[1];
            }
            Ok(bp)
        }
        (d, p) => Err(Error::InvalidInput(format!(
            "boundary parameter {p:?} does not apply to domain {}",
            d.name()
        ))),
    }
}

fn square_boundary(s: f64) -> Result<BoundaryPoint> {
    let l = SQUARE_SIDE;
    let s = s.rem_euclid(4.0 * l);
    let edge = (s / l).floor() as usize;
    let local = s - edge as f64 * l;
    if local.abs() < CORNER_TOL || (l - local).abs() < CORNER_TOL {
        return Err(Error::CornerParameter(s));
    }
    let (point, normal) = match edge {
        0 => (vec![local, 0.0], vec![0.0, -1.0]),
        1 => (vec![l, local], vec![1.0, 0.0]),
        2 => (vec![l - local, l], vec![0.0, 1.0]),
        _ => (vec![0.0, l - local], vec![-1.0, 0.0]),
    };
    Ok(BoundaryPoint { point, normal })
}

/// A term `coeff * z^power` of a holomorphic polynomial field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub power: u32,
    pub coeff: f64,
}

/// Normal speed profile along one edge of the square:
/// `sum_n cos[n] cos(n s) + sin[n] sin(n s)` for `s` in `[0, pi]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EdgeProfile {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl EdgeProfile {
    pub fn constant(c: f64) -> Self {
        Self {
            cos: vec![c],
            sin: vec![],
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        let c: f64 = self
            .cos
            .iter()
            .enumerate()
            .map(|(n, a)| a * (n as f64 * s).cos())
            .sum();
        let d: f64 = self
            .sin
            .iter()
            .enumerate()
            .map(|(n, b)| b * (n as f64 * s).sin())
            .sum();
        c + d
    }
}

/// The deformation field of a family. Every built-in family is affine in
/// `t`: `phi_t(x) = x + t * phi_bar(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FamilyKind {
    Identity,
    Translation {
        direction: Vec<f64>,
    },
    /// `phi_t(x) = c + (1 + rate t)(x - c)`.
    Dilation {
        rate: f64,
        center: Vec<f64>,
    },
    /// `phi_t(z) = z + t sum a_k z^k` on the complex plane.
    HolomorphicPoly {
        terms: Vec<PolyTerm>,
    },
    /// Square field whose normal component is the given profile on each edge,
    /// blended linearly across the square.
    EdgeProfiles {
        bottom: EdgeProfile,
        right: EdgeProfile,
        top: EdgeProfile,
        left: EdgeProfile,
    },
    /// `phi_bar(x) = Q x` with `Q` symmetric; normal speed `theta^T Q theta`.
    QuadraticForm {
        matrix: [[f64; 3]; 3],
    },
    /// Independent families per pair component, each acting in the frame of
    /// its component (local origin at the component offset).
    Componentwise {
        offsets: Vec<[f64; 2]>,
        parts: Vec<FamilyKind>,
    },
    /// `phi_t` replaced by `phi_{-t}`.
    Reversed {
        inner: Box<FamilyKind>,
    },
}

impl FamilyKind {
    /// `phi_bar(x) = d/dt phi_t(x)` at `t = 0`.
    pub fn velocity(&self, x: &[f64]) -> Vec<f64> {
        match self {
            FamilyKind::Identity => vec![0.0; x.len()],
            FamilyKind::Translation { direction } => direction.clone(),
            FamilyKind::Dilation { rate, center } => {
                x.iter().zip(center).map(|(xi, ci)| rate * (xi - ci)).collect()
            }
            FamilyKind::HolomorphicPoly { terms } => {
                let (mut re, mut im) = (0.0, 0.0);
                for term in terms {
                    let (pr, pi) = complex_pow(x[0], x[1], term.power);
                    re += term.coeff * pr;
                    im += term.coeff * pi;
                }
                vec![re, im]
            }
            FamilyKind::EdgeProfiles {
                bottom,
                right,
                top,
                left,
            } => {
                let (u, v) = (x[0] / SQUARE_SIDE, x[1] / SQUARE_SIDE);
                let v1 = -(1.0 - u) * left.eval(x[1]) + u * right.eval(x[1]);
                let v2 = -(1.0 - v) * bottom.eval(x[0]) + v * top.eval(x[0]);
                vec![v1, v2]
            }
            FamilyKind::QuadraticForm { matrix } => (0..3)
                .map(|i| (0..3).map(|j| matrix[i][j] * x[j]).sum())
                .collect(),
            FamilyKind::Componentwise { offsets, parts } => {
                let c = nearest_component(offsets, x);
                let local = [x[0] - offsets[c][0], x[1] - offsets[c][1]];
                parts[c].velocity(&local)
            }
            FamilyKind::Reversed { inner } => inner.velocity(x).into_iter().map(|v| -v).collect(),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, FamilyKind::Identity)
    }
}

fn nearest_component(offsets: &[[f64; 2]], x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, o) in offsets.iter().enumerate() {
        let d = (x[0] - o[0]).hypot(x[1] - o[1]);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

fn complex_pow(re: f64, im: f64, n: u32) -> (f64, f64) {
    let (mut pr, mut pi) = (1.0, 0.0);
    for _ in 0..n {
        let r = pr * re - pi * im;
        pi = pr * im + pi * re;
        pr = r;
    }
    (pr, pi)
}

/// A deformation family together with its admissible parameter range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbFamily {
    pub kind: FamilyKind,
    /// Admissible range is `|t| <= t_max`.
    pub t_max: f64,
}

pub const DEFAULT_T_MAX: f64 = 0.05;

impl PerturbFamily {
    pub fn new(kind: FamilyKind) -> Self {
        Self {
            kind,
            t_max: DEFAULT_T_MAX,
        }
    }

    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.t_max = t_max;
        self
    }

    pub fn velocity(&self, x: &[f64]) -> Vec<f64> {
        self.kind.velocity(x)
    }

    pub fn reversed(&self) -> Self {
        Self {
            kind: FamilyKind::Reversed {
                inner: Box::new(self.kind.clone()),
            },
            t_max: self.t_max,
        }
    }

    fn check_t(&self, t: f64) -> Result<()> {
        if !t.is_finite() || t.abs() > self.t_max {
            return Err(Error::OutOfRange(format!(
                "t = {t} outside the admissible range |t| <= {}",
                self.t_max
            )));
        }
        Ok(())
    }

    /// `phi_t(x)` for one point.
    pub fn map_point(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        self.check_t(t)?;
        if t == 0.0 {
            return Ok(x.to_vec());
        }
        let v = self.velocity(x);
        Ok(x.iter().zip(v).map(|(xi, vi)| xi + t * vi).collect())
    }

    /// Determinant of `D phi_t(x)`, with `D phi_bar` from central differences.
    pub fn jacobian_det(&self, t: f64, x: &[f64]) -> f64 {
        let n = x.len();
        let h = 1e-6;
        let mut jac = vec![vec![0.0; n]; n];
        for j in 0..n {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += h;
            xm[j] -= h;
            let vp = self.velocity(&xp);
            let vm = self.velocity(&xm);
            for i in 0..n {
                let id = if i == j { 1.0 } else { 0.0 };
                jac[i][j] = id + t * (vp[i] - vm[i]) / (2.0 * h);
            }
        }
        match n {
            2 => jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0],
            _ => {
                jac[0][0] * (jac[1][1] * jac[2][2] - jac[1][2] * jac[2][1])
                    - jac[0][1] * (jac[1][0] * jac[2][2] - jac[1][2] * jac[2][0])
                    + jac[0][2] * (jac[1][0] * jac[2][1] - jac[1][1] * jac[2][0])
            }
        }
    }

    /// Checks that `det D phi_t > 0` at every sample point for `t = +-t_max`.
    pub fn check_injectivity(&self, points: &[Vec<f64>]) -> Result<()> {
        for &t in &[-self.t_max, self.t_max] {
            for p in points {
                let det = self.jacobian_det(t, p);
                if det <= 0.0 || !det.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "deformation folds at t = {t}, x = {p:?} (det = {det:.3e})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Applies `phi_t` to every point; at `t = 0` the input is returned unchanged.
pub fn map_points(family: &PerturbFamily, t: f64, points: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
    family.check_t(t)?;
    if t == 0.0 {
        return Ok(points.to_vec());
    }
    Ok(points
        .iter()
        .map(|p| {
            let v = family.velocity(p);
            [p[0] + t * v[0], p[1] + t * v[1]]
        })
        .collect())
}

/// Samples on `[0, 2 pi]` at composite Gauss nodes, split at `pi`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PanelSamples {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub values: Vec<f64>,
}

impl PanelSamples {
    pub fn from_fn(panels: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let mut rule = composite_gauss(0.0, PI, panels)?;
        rule.extend(composite_gauss(PI, 2.0 * PI, panels)?);
        let (nodes, weights): (Vec<f64>, Vec<f64>) = rule.into_iter().unzip();
        let values: Vec<f64> = nodes.iter().map(|&s| f(s)).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite edge speed".into()));
        }
        Ok(Self {
            nodes,
            weights,
            values,
        })
    }

    /// `int_0^{2 pi} value(s) g(s) ds`.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .zip(&self.values)
            .map(|((s, w), v)| w * v * g(*s))
            .sum()
    }
}

/// The square's two edge-pair functions: `eta` (bottom, then top) and `mu`
/// (left, then right), each on `[0, 2 pi]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SquareSpeed {
    pub eta: PanelSamples,
    pub mu: PanelSamples,
}

#[derive(Debug, Clone, Serialize)]
pub struct SphereSamples {
    #[serde(skip)]
    pub rule: SphereRule,
    pub values: Vec<f64>,
}

impl SphereSamples {
    pub fn integrate(&self, g: impl Fn(&[f64; 3]) -> f64) -> f64 {
        self.rule
            .points
            .iter()
            .zip(&self.rule.weights)
            .zip(&self.values)
            .map(|((p, w), v)| w * v * g(p))
            .sum()
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpeedField {
    Circle { samples: PeriodicSamples },
    Square { speed: SquareSpeed },
    Sphere { samples: SphereSamples },
    Pair { components: Vec<SpeedField> },
}

/// Boundary normal speed `delta = phi_bar . nu` of a family.
#[derive(Debug, Clone, Serialize)]
pub struct NormalSpeed {
    pub field: SpeedField,
    pub source: FamilyKind,
}

/// Samples `delta = phi_bar . nu` at the quadrature nodes of `domain`.
pub fn normal_speed(domain: &DomainSpec, family: &PerturbFamily, res: &Resolution) -> Result<NormalSpeed> {
    let field = speed_field(domain, &|x: &[f64]| family.velocity(x), res)?;
    Ok(NormalSpeed {
        field,
        source: family.kind.clone(),
    })
}

fn speed_field(domain: &DomainSpec, vel: &dyn Fn(&[f64]) -> Vec<f64>, res: &Resolution) -> Result<SpeedField> {
    match domain {
        DomainSpec::UnitDisk => {
            let samples = PeriodicSamples::from_fn(res.periodic_nodes, |th| {
                let (s, c) = th.sin_cos();
                let v = vel(&[c, s]);
                v[0] * c + v[1] * s
            })?;
            Ok(SpeedField::Circle { samples })
        }
        DomainSpec::Square => {
            let l = SQUARE_SIDE;
            let eta = PanelSamples::from_fn(res.panels, |s| {
                if s < l {
                    -vel(&[s, 0.0])[1]
                } else {
                    vel(&[s - l, l])[1]
                }
            })?;
            let mu = PanelSamples::from_fn(res.panels, |s| {
                if s < l {
                    -vel(&[0.0, s])[0]
                } else {
                    vel(&[l, s - l])[0]
                }
            })?;
            Ok(SpeedField::Square {
                speed: SquareSpeed { eta, mu },
            })
        }
        DomainSpec::UnitBall3d => {
            let rule = SphereRule::new(res.sphere_polar, res.sphere_azimuth)?;
            let values: Vec<f64> = rule
                .points
                .iter()
                .map(|p| {
                    let v = vel(p);
                    v[0] * p[0] + v[1] * p[1] + v[2] * p[2]
                })
                .collect();
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("non-finite sphere speed".into()));
            }
            Ok(SpeedField::Sphere {
                samples: SphereSamples { rule, values },
            })
        }
        DomainSpec::DisjointPair { base, offset } => {
            let mut components = Vec::with_capacity(2);
            for o in [[0.0, 0.0], *offset] {
                let shifted = |x: &[f64]| vel(&[x[0] + o[0], x[1] + o[1]]);
                components.push(speed_field(base, &shifted, res)?);
            }
            Ok(SpeedField::Pair { components })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn family(kind: FamilyKind) -> PerturbFamily {
        PerturbFamily::new(kind)
    }

    #[test]
    fn boundary_normal_examples() {
        let bp = boundary_normal(&DomainSpec::UnitDisk, BoundaryParam::Angle(0.0)).unwrap();
        assert_eq!(bp.point, vec![1.0, 0.0]);
        assert_eq!(bp.normal, vec![1.0, 0.0]);
        let bp = boundary_normal(&DomainSpec::Square, BoundaryParam::Perimeter(PI / 2.0)).unwrap();
        assert!((bp.point[0] - PI / 2.0).abs() < 1e-15 && bp.point[1] == 0.0);
        assert_eq!(bp.normal, vec![0.0, -1.0]);
        let bp = boundary_normal(&DomainSpec::UnitBall3d, BoundaryParam::Direction([0.0, 0.0, 1.0])).unwrap();
        assert_eq!(bp.normal, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn square_corners_are_rejected() {
        for k in 0..4 {
            let r = boundary_normal(&DomainSpec::Square, BoundaryParam::Perimeter(k as f64 * PI));
            assert!(matches!(r, Err(Error::CornerParameter(_))));
        }
    }

    #[test]
    fn normals_are_unit_and_outward() {
        let pair = DomainSpec::disjoint_pair(DomainSpec::UnitDisk, [3.0, 0.5], 0.1).unwrap();
        let cases: Vec<(DomainSpec, BoundaryParam)> = (1..40)
            .flat_map(|i| {
                let s = i as f64 * 0.31;
                vec![
                    (DomainSpec::UnitDisk, BoundaryParam::Angle(s)),
                    (DomainSpec::Square, BoundaryParam::Perimeter(s)),
                    (DomainSpec::UnitBall3d, BoundaryParam::Direction([s.cos(), s.sin(), 0.3 * s - 1.0])),
                    (pair.clone(), BoundaryParam::Component { component: i % 2, param: s }),
                ]
            })
            .collect();
        for (d, p) in cases {
            let bp = boundary_normal(&d, p).unwrap();
            let n: f64 = bp.normal.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-14);
            let out: Vec<f64> = bp.point.iter().zip(&bp.normal).map(|(x, v)| x + 1e-6 * v).collect();
            let inn: Vec<f64> = bp.point.iter().zip(&bp.normal).map(|(x, v)| x - 1e-6 * v).collect();
            assert!(!d.contains(&out), "{p:?}");
            assert!(d.contains(&inn), "{p:?}");
        }
    }

    #[test]
    fn pair_separation_is_enforced() {
        assert!(DomainSpec::disjoint_pair(DomainSpec::UnitDisk, [2.05, 0.0], 0.1).is_err());
        assert!(DomainSpec::disjoint_pair(DomainSpec::UnitDisk, [2.5, 0.0], 0.1).is_ok());
        assert!(DomainSpec::disjoint_pair(DomainSpec::Square, [PI + 0.2, 0.0], 0.1).is_ok());
        assert!(DomainSpec::disjoint_pair(DomainSpec::UnitBall3d, [5.0, 0.0], 0.1).is_err());
    }

    fn circle(ns: &NormalSpeed) -> &PeriodicSamples {
        match &ns.field {
            SpeedField::Circle { samples } => samples,
            _ => panic!("not a circle speed"),
        }
    }

    #[test]
    fn disk_normal_speed_examples() {
        let res = Resolution::default();
        let tr = normal_speed(&DomainSpec::UnitDisk, &family(FamilyKind::Translation { direction: vec![1.0, 0.0] }), &res).unwrap();
        let dil = normal_speed(&DomainSpec::UnitDisk, &family(FamilyKind::Dilation { rate: 1.0, center: vec![0.0, 0.0] }), &res).unwrap();
        let z2 = normal_speed(
            &DomainSpec::UnitDisk,
            &family(FamilyKind::HolomorphicPoly { terms: vec![PolyTerm { power: 2, coeff: 1.0 }] }),
            &res,
        )
        .unwrap();
        let z3 = normal_speed(
            &DomainSpec::UnitDisk,
            &family(FamilyKind::HolomorphicPoly { terms: vec![PolyTerm { power: 3, coeff: 1.0 }] }),
            &res,
        )
        .unwrap();
        for i in 0..res.periodic_nodes {
            let th = circle(&tr).angle(i);
            assert!((circle(&tr).values()[i] - th.cos()).abs() < 1e-14);
            assert!((circle(&dil).values()[i] - 1.0).abs() < 1e-14);
            assert!((circle(&z2).values()[i] - th.cos()).abs() < 1e-13);
            assert!((circle(&z3).values()[i] - (2.0 * th).cos()).abs() < 1e-13);
        }
        // sampled inner products against cos(theta) confirm the z^2 speed
        let (c1, s1) = crate::quadrature::fourier_coeffs(circle(&z2), 1).unwrap();
        assert!((c1 - PI).abs() < 1e-12 && s1.abs() < 1e-12);
    }

    #[test]
    fn identity_family_has_zero_speed() {
        let res = Resolution::default();
        let id = family(FamilyKind::Identity);
        for d in [
            DomainSpec::UnitDisk,
            DomainSpec::Square,
            DomainSpec::UnitBall3d,
            DomainSpec::disjoint_pair(DomainSpec::UnitDisk, [3.0, 0.0], 0.1).unwrap(),
        ] {
            let ns = normal_speed(&d, &id, &res).unwrap();
            let all_zero = match &ns.field {
                SpeedField::Circle { samples } => samples.values().iter().all(|v| *v == 0.0),
                SpeedField::Square { speed } => speed.eta.values.iter().chain(&speed.mu.values).all(|v| *v == 0.0),
                SpeedField::Sphere { samples } => samples.values.iter().all(|v| *v == 0.0),
                SpeedField::Pair { components } => components.iter().all(|c| match c {
                    SpeedField::Circle { samples } => samples.values().iter().all(|v| *v == 0.0),
                    _ => false,
                }),
            };
            assert!(all_zero);
        }
    }

    #[test]
    fn square_edge_functions_follow_profiles() {
        let fam = family(FamilyKind::EdgeProfiles {
            bottom: EdgeProfile { cos: vec![0.1, 0.2], sin: vec![] },
            right: EdgeProfile { cos: vec![], sin: vec![0.0, 0.5] },
            top: EdgeProfile::constant(-0.3),
            left: EdgeProfile { cos: vec![0.0, 0.0, 0.4], sin: vec![] },
        });
        let ns = normal_speed(&DomainSpec::Square, &fam, &Resolution::default()).unwrap();
        let SpeedField::Square { speed } = &ns.field else { panic!() };
        for (s, v) in speed.eta.nodes.iter().zip(&speed.eta.values) {
            let want = if *s < PI { 0.1 + 0.2 * s.cos() } else { -0.3 };
            assert!((v - want).abs() < 1e-14);
        }
        for (s, v) in speed.mu.nodes.iter().zip(&speed.mu.values) {
            let want = if *s < PI { 0.4 * (2.0 * s).cos() } else { 0.5 * (s - PI).sin() };
            assert!((v - want).abs() < 1e-14);
        }
    }

    #[test]
    fn map_points_examples() {
        let pts = [[0.3, -0.2], [1.0, 0.0], [0.1, 0.7]];
        let dil = family(FamilyKind::Dilation { rate: 1.0, center: vec![0.0, 0.0] }).with_t_max(0.2);
        assert_eq!(map_points(&dil, 0.0, &pts).unwrap(), pts.to_vec());
        let m = map_points(&dil, 0.1, &[[1.0, 0.0]]).unwrap();
        assert!((m[0][0] - 1.1).abs() < 1e-15 && m[0][1] == 0.0);
        let z2 = family(FamilyKind::HolomorphicPoly { terms: vec![PolyTerm { power: 2, coeff: 1.0 }] });
        let m = map_points(&z2, 0.01, &[[1.0, 0.0]]).unwrap();
        assert!((m[0][0] - 1.01).abs() < 1e-15 && m[0][1] == 0.0);
        assert!(map_points(&z2, 0.5, &pts).is_err());
    }

    fn catalog_families() -> Vec<(PerturbFamily, DomainSpec)> {
        let pair = DomainSpec::disjoint_pair(DomainSpec::UnitDisk, [3.0, 0.0], 0.1).unwrap();
        vec![
            (family(FamilyKind::Translation { direction: vec![0.3, -1.0] }), DomainSpec::UnitDisk),
            (family(FamilyKind::Dilation { rate: 0.7, center: vec![0.0, 0.0] }), DomainSpec::UnitDisk),
            (
                family(FamilyKind::HolomorphicPoly {
                    terms: vec![PolyTerm { power: 3, coeff: 1.0 }, PolyTerm { power: 0, coeff: 0.2 }],
                }),
                DomainSpec::UnitDisk,
            ),
            (
                family(FamilyKind::EdgeProfiles {
                    bottom: EdgeProfile { cos: vec![0.2, 0.1], sin: vec![0.0, 0.3] },
                    right: EdgeProfile::constant(0.1),
                    top: EdgeProfile { cos: vec![0.0, -0.2], sin: vec![] },
                    left: EdgeProfile { cos: vec![], sin: vec![0.0, 0.0, 0.25] },
                }),
                DomainSpec::Square,
            ),
            (
                family(FamilyKind::QuadraticForm { matrix: [[0.1, 0.5, 0.0], [0.5, -0.2, 0.3], [0.0, 0.3, 0.4]] }),
                DomainSpec::UnitBall3d,
            ),
            (
                family(FamilyKind::Componentwise {
                    offsets: vec![[0.0, 0.0], [3.0, 0.0]],
                    parts: vec![
                        FamilyKind::Dilation { rate: 1.0, center: vec![0.0, 0.0] },
                        FamilyKind::HolomorphicPoly { terms: vec![PolyTerm { power: 2, coeff: 0.5 }] },
                    ],
                }),
                pair,
            ),
        ]
    }

    fn random_interior(d: &DomainSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
        loop {
            let p: Vec<f64> = match d {
                DomainSpec::Square => vec![rng.gen::<f64>() * PI, rng.gen::<f64>() * PI],
                DomainSpec::UnitBall3d => (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                DomainSpec::DisjointPair { .. } => vec![rng.gen_range(-1.0..4.0), rng.gen_range(-1.0..1.0)],
                _ => (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            };
            if d.contains(&p) {
                return p;
            }
        }
    }

    #[test]
    fn velocity_matches_central_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (fam, d) in catalog_families() {
            for _ in 0..100 {
                let x = random_interior(&d, &mut rng);
                let h = 1e-5;
                let p = fam.map_point(h, &x).unwrap();
                let m = fam.map_point(-h, &x).unwrap();
                let v = fam.velocity(&x);
                for i in 0..x.len() {
                    assert!(((p[i] - m[i]) / (2.0 * h) - v[i]).abs() <= 1e-8);
                }
            }
        }
    }

    #[test]
    fn jacobian_stays_positive_over_admissible_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (fam, d) in catalog_families() {
            let pts: Vec<Vec<f64>> = (0..200).map(|_| random_interior(&d, &mut rng)).collect();
            fam.check_injectivity(&pts).unwrap();
        }
        let folding = family(FamilyKind::QuadraticForm { matrix: [[-30.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] });
        assert!(folding.check_injectivity(&[vec![0.1, 0.1, 0.1]]).is_err());
    }

    #[test]
    fn reversed_family_negates_velocity() {
        let f = family(FamilyKind::HolomorphicPoly { terms: vec![PolyTerm { power: 3, coeff: 1.0 }] });
        let r = f.reversed();
        let x = [0.3, 0.4];
        let (a, b) = (f.velocity(&x), r.velocity(&x));
        assert_eq!(a[0], -b[0]);
        assert_eq!(a[1], -b[1]);
    }
}
