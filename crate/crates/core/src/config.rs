//! Scenario configuration: JSON schema, defaults, validation, and the
//! catalog of named domains, families, eigenspaces and continuation examples.

use serde::{Deserialize, Serialize};

use crate::branches::{Tolerances, Window};
use crate::error::{Error, Result};
use crate::geometry::{DomainSpec, EdgeProfile, FamilyKind, PerturbFamily, PolyTerm, DEFAULT_PAIR_MARGIN};
use crate::modes::{
    ball3d_second_eigenspace, disjoint_pair_eigenspace, disk_eigenspace, exact_spectrum, square_eigenspace, Eigenspace,
};
use crate::quadrature::Resolution;

pub const DEFAULT_T_GRID: [f64; 4] = [-2e-3, -1e-3, 1e-3, 2e-3];
pub const DEFAULT_MESH_LADDER: [usize; 3] = [16, 32, 64];
/// Default admissible `|t|` for every family.
pub const DEFAULT_T_MAX: f64 = 0.05;
/// Default window half-width as a fraction of the gap to the nearest
/// neighbouring eigenvalue.
pub const WINDOW_FRACTION: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Edge {
    Bottom,
    Right,
    Top,
    Left,
}

/// A named perturbation family with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", deny_unknown_fields)]
pub enum FamilySpec {
    #[serde(rename = "identity")]
    Identity,
    #[serde(rename = "translation")]
    Translation { direction: Vec<f64> },
    /// About `center`, the domain (or component) centre by default.
    #[serde(rename = "dilation")]
    Dilation {
        #[serde(default = "one")]
        rate: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    #[serde(rename = "disk.holomorphic_poly")]
    HolomorphicPoly { terms: Vec<PolyTerm> },
    /// Normal speed `amplitude * sin(order * s)` on one edge, zero elsewhere.
    #[serde(rename = "square.edge_bump")]
    EdgeBump {
        edge: Edge,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one_u32")]
        order: u32,
    },
    /// Sampled cosine/sine coefficient tables per edge.
    #[serde(rename = "square.edge_profiles")]
    EdgeProfiles {
        #[serde(default)]
        bottom: EdgeProfile,
        #[serde(default)]
        right: EdgeProfile,
        #[serde(default)]
        top: EdgeProfile,
        #[serde(default)]
        left: EdgeProfile,
    },
    #[serde(rename = "ball.quadratic_form")]
    QuadraticForm { matrix: [[f64; 3]; 3] },
    /// One family per component of a disjoint pair, in component frames.
    #[serde(rename = "pair.independent")]
    PairIndependent { parts: Vec<FamilySpec> },
}

fn one() -> f64 {
    1.0
}

fn one_u32() -> u32 {
    1
}

pub const FAMILY_NAMES: [&str; 8] = [
    "ball.quadratic_form",
    "dilation",
    "disk.holomorphic_poly",
    "identity",
    "pair.independent",
    "square.edge_bump",
    "square.edge_profiles",
    "translation",
];

impl FamilySpec {
    pub fn name(&self) -> &'static str {
        match self {
            FamilySpec::Identity => "identity",
            FamilySpec::Translation { .. } => "translation",
            FamilySpec::Dilation { .. } => "dilation",
            FamilySpec::HolomorphicPoly { .. } => "disk.holomorphic_poly",
            FamilySpec::EdgeBump { .. } => "square.edge_bump",
            FamilySpec::EdgeProfiles { .. } => "square.edge_profiles",
            FamilySpec::QuadraticForm { .. } => "ball.quadratic_form",
            FamilySpec::PairIndependent { .. } => "pair.independent",
        }
    }

    /// The deformation field on `domain`.
    pub fn kind(&self, domain: &DomainSpec) -> Result<FamilyKind> {
        let wrong = || Error::InvalidInput(format!("family {} does not apply to domain {}", self.name(), domain.name()));
        Ok(match self {
            FamilySpec::Identity => FamilyKind::Identity,
            FamilySpec::Translation { direction } => {
                if direction.len() != domain.dim() {
                    return Err(Error::InvalidInput(format!(
                        "translation direction has {} components, domain dimension is {}",
                        direction.len(),
                        domain.dim()
                    )));
                }
                FamilyKind::Translation {
                    direction: direction.clone(),
                }
            }
            FamilySpec::Dilation { rate, center } => {
                let center = center.clone().unwrap_or_else(|| domain.center());
                if center.len() != domain.dim() {
                    return Err(Error::InvalidInput("dilation centre has the wrong dimension".into()));
                }
                FamilyKind::Dilation { rate: *rate, center }
            }
            FamilySpec::HolomorphicPoly { terms } => match domain {
                DomainSpec::UnitDisk => FamilyKind::HolomorphicPoly { terms: terms.clone() },
                _ => return Err(wrong()),
            },
            FamilySpec::EdgeBump { edge, amplitude, order } => match domain {
                DomainSpec::Square => {
                    let mut sin = vec![0.0; *order as usize + 1];
                    sin[*order as usize] = *amplitude;
                    let bump = EdgeProfile { cos: vec![], sin };
                    let pick = |e: Edge| if e == *edge { bump.clone() } else { EdgeProfile::default() };
                    FamilyKind::EdgeProfiles {
                        bottom: pick(Edge::Bottom),
                        right: pick(Edge::Right),
                        top: pick(Edge::Top),
                        left: pick(Edge::Left),
                    }
                }
                _ => return Err(wrong()),
            },
            FamilySpec::EdgeProfiles { bottom, right, top, left } => match domain {
                DomainSpec::Square => FamilyKind::EdgeProfiles {
                    bottom: bottom.clone(),
                    right: right.clone(),
                    top: top.clone(),
                    left: left.clone(),
                },
                _ => return Err(wrong()),
            },
            FamilySpec::QuadraticForm { matrix } => match domain {
                DomainSpec::UnitBall3d => {
                    for i in 0..3 {
                        for j in 0..i {
                            if (matrix[i][j] - matrix[j][i]).abs() > 1e-14 {
                                return Err(Error::InvalidInput("quadratic form matrix must be symmetric".into()));
                            }
                        }
                    }
                    FamilyKind::QuadraticForm { matrix: *matrix }
                }
                _ => return Err(wrong()),
            },
            FamilySpec::PairIndependent { parts } => match domain {
                DomainSpec::DisjointPair { base, .. } => {
                    if parts.len() != 2 {
                        return Err(Error::InvalidInput(format!("pair.independent needs 2 parts, got {}", parts.len())));
                    }
                    FamilyKind::Componentwise {
                        offsets: domain.component_offsets(),
                        parts: parts.iter().map(|p| p.kind(base)).collect::<Result<_>>()?,
                    }
                }
                _ => return Err(wrong()),
            },
        })
    }
}

/// Which multiple eigenvalue to perturb.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum EigenspaceSelector {
    /// `{J_k(j_{k,m} r) sin k theta, J_k(j_{k,m} r) cos k theta}`.
    Disk { k: u32, m: u32 },
    /// All `sin(a x) sin(b y)` with `a^2 + b^2 = s1^2 + s2^2`.
    Square { s1: u32, s2: u32 },
    /// Second eigenvalue of the unit ball.
    Ball3d,
    /// First eigenvalue of a pair of congruent disks.
    Pair,
}

impl EigenspaceSelector {
    pub fn build(&self, domain: &DomainSpec) -> Result<Eigenspace> {
        let mismatch = || Error::InvalidInput(format!("eigenspace {self:?} does not belong to domain {}", domain.name()));
        match (self, domain) {
            (EigenspaceSelector::Disk { k, m }, DomainSpec::UnitDisk) => disk_eigenspace(*k, *m),
            (EigenspaceSelector::Square { s1, s2 }, DomainSpec::Square) => square_eigenspace(*s1, *s2),
            (EigenspaceSelector::Ball3d, DomainSpec::UnitBall3d) => Ok(ball3d_second_eigenspace()),
            (EigenspaceSelector::Pair, DomainSpec::DisjointPair { .. }) => disjoint_pair_eigenspace(domain),
            _ => Err(mismatch()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pipelines {
    #[serde(default = "yes")]
    pub closed_form: bool,
    #[serde(default = "yes")]
    pub quadrature: bool,
    /// Defaults to true on 2D domains.
    #[serde(default)]
    pub fem_validate: Option<bool>,
}

fn yes() -> bool {
    true
}

impl Default for Pipelines {
    fn default() -> Self {
        Self {
            closed_form: true,
            quadrature: true,
            fem_validate: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    pub domain: DomainSpec,
    pub family: FamilySpec,
    pub eigenspace: EigenspaceSelector,
    #[serde(default)]
    pub pipelines: Pipelines,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_t_grid")]
    pub t_grid: Vec<f64>,
    #[serde(default = "default_ladder")]
    pub mesh_ladder: Vec<usize>,
    /// Computed from the exact spectrum when absent.
    #[serde(default)]
    pub window: Option<Window>,
    #[serde(default)]
    pub quadrature: Resolution,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_margin")]
    pub pair_margin: f64,
}

fn default_t_grid() -> Vec<f64> {
    DEFAULT_T_GRID.to_vec()
}

fn default_ladder() -> Vec<usize> {
    DEFAULT_MESH_LADDER.to_vec()
}

fn default_t_max() -> f64 {
    DEFAULT_T_MAX
}

fn default_margin() -> f64 {
    DEFAULT_PAIR_MARGIN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub scenarios: Vec<Scenario>,
    #[serde(default)]
    pub seed: u64,
}

/// A scenario with every default filled in and its objects built.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub scenario: Scenario,
    pub family: PerturbFamily,
    pub space: Eigenspace,
    /// Eigenvalues counted up to the window top (for the eigensolver).
    pub count_hint: usize,
}

fn at(i: usize, field: &str) -> String {
    format!("scenarios[{i}].{field}")
}

fn config_err(path: String, e: impl std::fmt::Display) -> Error {
    Error::Config {
        path,
        message: e.to_string(),
    }
}

/// Parses a config; failures carry the JSON path of the offending value.
pub fn parse(text: &str) -> Result<Config> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let mut path = e.path().to_string();
        let message = e.inner().to_string();
        // point at the missing field itself rather than its parent
        if let Some(rest) = message.strip_prefix("missing field `") {
            if let Some(field) = rest.split('`').next() {
                path = if path == "." { field.to_string() } else { format!("{path}.{field}") };
            }
        }
        Error::Config { path, message }
    })
}

fn default_window(domain: &DomainSpec, lambda0: f64) -> Result<Window> {
    let spectrum = exact_spectrum(domain, (2.0 * lambda0).max(lambda0 + 20.0))?;
    let tol = 1e-9 * lambda0;
    let below = spectrum.iter().rev().find(|&&v| v < lambda0 - tol).map(|v| lambda0 - v);
    let above = spectrum.iter().find(|&&v| v > lambda0 + tol).map(|v| v - lambda0);
    let gap = match (below, above) {
        (Some(a), Some(b)) => a.min(b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => lambda0,
    };
    Ok(Window {
        lo: lambda0 - WINDOW_FRACTION * gap,
        hi: lambda0 + WINDOW_FRACTION * gap,
    })
}

impl Scenario {
    /// Applies `--quick`: halves quadrature resolutions and the mesh ladder.
    pub fn quick(&mut self) {
        self.quadrature = self.quadrature.halved();
        for n in &mut self.mesh_ladder {
            *n = (*n / 2).max(2);
        }
    }

    pub fn fem_enabled(&self) -> bool {
        self.pipelines.fem_validate.unwrap_or(self.domain.dim() == 2)
    }

    /// Fills defaults and checks the invariants. `index` locates errors.
    pub fn resolve(mut self, index: usize) -> Result<Resolved> {
        let ok_id = !self.id.is_empty()
            && self
                .id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.');
        if !ok_id {
            return Err(config_err(at(index, "id"), "id must be nonempty and use only [A-Za-z0-9_.-]"));
        }
        self.domain
            .validate(self.pair_margin)
            .map_err(|e| config_err(at(index, "domain"), e))?;
        let kind = self.family.kind(&self.domain).map_err(|e| config_err(at(index, "family"), e))?;
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(config_err(at(index, "t_max"), "t_max must be positive"));
        }
        let family = PerturbFamily::new(kind).with_t_max(self.t_max);
        let space = self
            .eigenspace
            .build(&self.domain)
            .map_err(|e| config_err(at(index, "eigenspace"), e))?;
        let tol = self.tolerances;
        if !(tol.abs >= 0.0 && tol.rel >= 0.0 && tol.abs + tol.rel > 0.0 && (tol.abs + tol.rel).is_finite()) {
            return Err(config_err(at(index, "tolerances"), "tolerances must be nonnegative, finite, and not both zero"));
        }
        let fem = self.fem_enabled();
        if fem && self.domain.dim() != 2 {
            return Err(config_err(at(index, "pipelines.fem_validate"), "finite-element validation needs a 2D domain"));
        }
        self.pipelines.fem_validate = Some(fem);
        if !self.pipelines.closed_form && !self.pipelines.quadrature {
            return Err(config_err(at(index, "pipelines"), "enable closed_form or quadrature"));
        }
        let mut count_hint = space.dim() + 4;
        if fem {
            let mut grid = self.t_grid.clone();
            grid.sort_by(f64::total_cmp);
            let positive: Vec<f64> = grid.iter().cloned().filter(|&t| t > 0.0).collect();
            let symmetric = positive.iter().all(|s| grid.iter().any(|&t| (t + s).abs() <= 1e-15))
                && grid.iter().filter(|&&t| t < 0.0).count() == positive.len();
            if positive.len() < 2 || !symmetric || grid.iter().any(|t| t.abs() > self.t_max) {
                return Err(config_err(
                    at(index, "t_grid"),
                    "t_grid needs at least two symmetric step pairs within ±t_max",
                ));
            }
            self.t_grid = grid;
            if self.mesh_ladder.is_empty() || self.mesh_ladder.windows(2).any(|w| w[0] >= w[1]) || self.mesh_ladder[0] < 2 {
                return Err(config_err(at(index, "mesh_ladder"), "mesh ladder must be increasing with entries >= 2"));
            }
            let window = match self.window {
                Some(w) => w,
                None => default_window(&self.domain, space.lambda0).map_err(|e| config_err(at(index, "window"), e))?,
            };
            if !(window.lo < space.lambda0 && space.lambda0 < window.hi) {
                return Err(config_err(at(index, "window"), "window must contain the eigenvalue"));
            }
            self.window = Some(window);
            if let Ok(spec) = exact_spectrum(&self.domain, window.hi) {
                count_hint = spec.len() + 2;
            }
        }
        Ok(Resolved {
            scenario: self,
            family,
            space,
            count_hint,
        })
    }
}

/// Alphabetized names of every built-in domain, family, eigenspace and
/// continuation example.
pub fn list_catalog() -> Vec<String> {
    let mut names: Vec<String> = ["domain.disjoint_pair", "domain.square", "domain.unit_ball3d", "domain.unit_disk"]
        .iter()
        .chain(&["eigenspace.ball3d", "eigenspace.disk", "eigenspace.pair", "eigenspace.square"])
        .chain(FAMILY_NAMES.iter())
        .chain(crate::dift::CATALOG.iter())
        .map(|s| s.to_string())
        .collect();
    names.sort();
    names
}
