//! Eigenvalue branches `lambda(t)` from finite elements on a symmetric
//! t-grid, slope estimates with Richardson extrapolation in `t` and `h`, and
//! comparison against pencil predictions.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{assemble, lowest_eigs, mesh_domain, EigOptions, SparseSym};
use crate::geometry::{DomainSpec, PerturbFamily};
use crate::hadamard::SlopePrediction;

/// Eigenvalue interval that isolates the cluster at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// Branch values on one mesh of the ladder.
#[derive(Debug, Clone, Serialize)]
pub struct LevelBranches {
    pub divisions: usize,
    pub h: f64,
    /// `values[t_index][branch]`.
    pub values: Vec<Vec<f64>>,
    pub max_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchTable {
    /// Ascending and symmetric about 0.
    pub t_grid: Vec<f64>,
    pub lambda0: f64,
    pub window: Window,
    pub multiplicity: usize,
    pub levels: Vec<LevelBranches>,
}

/// Richardson combination of two estimates with error `c * step^2`, the
/// second taken at `ratio` times the step of the first.
pub fn richardson(fine: f64, coarse: f64, ratio: f64) -> f64 {
    let r2 = ratio * ratio;
    (r2 * fine - coarse) / (r2 - 1.0)
}

impl BranchTable {
    /// A single-level table from precomputed branch values.
    pub fn from_values(t_grid: Vec<f64>, lambda0: f64, window: Window, values: Vec<Vec<f64>>) -> Result<Self> {
        let multiplicity = values.first().map_or(0, |v| v.len());
        let level = LevelBranches {
            divisions: 1,
            h: 1.0,
            values,
            max_residual: 0.0,
        };
        let table = Self {
            t_grid,
            lambda0,
            window,
            multiplicity,
            levels: vec![level],
        };
        table.check_shape()?;
        Ok(table)
    }

    fn check_shape(&self) -> Result<()> {
        check_grid(&self.t_grid)?;
        for l in &self.levels {
            if l.values.len() != self.t_grid.len() || l.values.iter().any(|v| v.len() != self.multiplicity) {
                return Err(Error::InvalidInput(format!(
                    "branch table on level {} does not match the grid",
                    l.divisions
                )));
            }
        }
        Ok(())
    }

    pub fn t_index(&self, t: f64) -> Option<usize> {
        self.t_grid.iter().position(|&s| (s - t).abs() <= 1e-15 * (1.0 + t.abs()))
    }

    /// Per `(t, branch)` value extrapolated in `h` from the two finest levels.
    pub fn extrapolated(&self) -> Vec<Vec<f64>> {
        let n = self.levels.len();
        (0..self.t_grid.len())
            .map(|ti| {
                (0..self.multiplicity)
                    .map(|b| {
                        if n < 2 {
                            return self.levels[n - 1].values[ti][b];
                        }
                        let (c, f) = (&self.levels[n - 2], &self.levels[n - 1]);
                        richardson(f.values[ti][b], c.values[ti][b], f.divisions as f64 / c.divisions as f64)
                    })
                    .collect()
            })
            .collect()
    }

    /// CSV with columns `t, mesh_level, branch_id, lambda, extrapolated_lambda`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let ext = self.extrapolated();
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(e.to_string());
        out.write_record(["t", "mesh_level", "branch_id", "lambda", "extrapolated_lambda"]).map_err(io)?;
        for level in &self.levels {
            for (ti, t) in self.t_grid.iter().enumerate() {
                for b in 0..self.multiplicity {
                    out.write_record([
                        format!("{t:e}"),
                        level.divisions.to_string(),
                        b.to_string(),
                        format!("{:.17e}", level.values[ti][b]),
                        format!("{:.17e}", ext[ti][b]),
                    ])
                    .map_err(io)?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn check_grid(t_grid: &[f64]) -> Result<Vec<f64>> {
    if t_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidInput("t-grid must be strictly increasing".into()));
    }
    let steps: Vec<f64> = t_grid.iter().cloned().filter(|&t| t > 0.0).collect();
    for &s in &steps {
        if !t_grid.iter().any(|&t| (t + s).abs() <= 1e-15 * s.max(1.0)) {
            return Err(Error::InvalidInput(format!("t-grid is not symmetric: {s} has no mirror")));
        }
    }
    if t_grid.iter().filter(|&&t| t < 0.0).count() != steps.len() {
        return Err(Error::InvalidInput("t-grid is not symmetric about 0".into()));
    }
    Ok(steps)
}

/// Eigen-solve output for one `(t, level)`.
struct Solve {
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    max_residual: f64,
}

pub struct SampleOptions<'a> {
    pub domain: &'a DomainSpec,
    pub family: &'a PerturbFamily,
    pub lambda0: f64,
    pub multiplicity: usize,
    pub window: Window,
    /// Symmetric grid; `0` is added if absent.
    pub t_grid: &'a [f64],
    pub mesh_ladder: &'a [usize],
    /// Initial guess for how many eigenpairs lie at or below the window.
    pub count_hint: usize,
    pub seed: u64,
}

fn solve_window(mesh: &crate::fem::Mesh, family: &PerturbFamily, t: f64, window: Window, count_hint: usize, seed: u64) -> Result<Solve> {
    let sys = assemble(mesh, family, t)?;
    let mut count = count_hint.max(1).min(sys.dofs());
    loop {
        let r = lowest_eigs(&sys.k, &sys.m, count, EigOptions { seed, ..EigOptions::default() })?;
        let top = *r.values.last().expect("nonempty");
        if top > window.hi || count == sys.dofs() {
            let max_residual = r.residuals.iter().cloned().fold(0.0, f64::max);
            let (values, vectors) = r
                .values
                .into_iter()
                .zip(r.vectors)
                .filter(|(v, _)| window.contains(*v))
                .unzip();
            return Ok(Solve {
                values,
                vectors,
                max_residual,
            });
        }
        count = (2 * count).min(sys.dofs());
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Assignment `new index -> branch` maximizing `score(branch, new)`.
fn best_assignment(d: usize, score: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    if d > 6 {
        // greedy for large clusters
        let mut taken = vec![false; d];
        let mut out = vec![0; d];
        for (b, slot) in out.iter_mut().enumerate() {
            let j = (0..d)
                .filter(|&j| !taken[j])
                .max_by(|&x, &y| score(b, x).total_cmp(&score(b, y)))
                .expect("free slot");
            taken[j] = true;
            *slot = j;
        }
        let mut inv = vec![0; d];
        for (b, &j) in out.iter().enumerate() {
            inv[j] = b;
        }
        return inv;
    }
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for p in permutations(d) {
        // p[b] = new index assigned to branch b
        let s: f64 = (0..d).map(|b| score(b, p[b])).sum();
        if s > best.0 {
            best = (s, p);
        }
    }
    let mut inv = vec![0; d];
    for (b, &j) in best.1.iter().enumerate() {
        inv[j] = b;
    }
    inv
}

fn overlap(m0: &SparseSym, a: &[f64], b: &[f64]) -> f64 {
    m0.inner(a, b).abs()
}

/// Orders `new` to continue `prev` (both indexed by branch / solver order).
/// Values decide unless two candidates sit closer than a tenth of the
/// window, in which case eigenvector overlaps decide.
fn continue_branches(prev: &Solve, new: &Solve, m0: &SparseSym, window: Window, force_overlap: bool) -> Vec<usize> {
    let d = prev.values.len();
    let tight = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        s.windows(2).any(|w| w[1] - w[0] < window.width() / 10.0)
    };
    if force_overlap || tight(&prev.values) || tight(&new.values) {
        best_assignment(d, |b, j| overlap(m0, &prev.vectors[b], &new.vectors[j]))
    } else {
        best_assignment(d, |b, j| -(prev.values[b] - new.values[j]).abs())
    }
}

fn reorder(s: Solve, assign: &[usize]) -> Solve {
    let d = s.values.len();
    let mut values = vec![0.0; d];
    let mut vectors = vec![Vec::new(); d];
    for (j, (v, u)) in s.values.into_iter().zip(s.vectors).enumerate() {
        values[assign[j]] = v;
        vectors[assign[j]] = u;
    }
    Solve {
        values,
        vectors,
        max_residual: s.max_residual,
    }
}

/// Branches on every level of the ladder.
pub fn sample_branches(opts: &SampleOptions) -> Result<BranchTable> {
    let mut t_grid = opts.t_grid.to_vec();
    if !t_grid.contains(&0.0) {
        t_grid.push(0.0);
    }
    t_grid.sort_by(f64::total_cmp);
    let steps = check_grid(&t_grid)?;
    if steps.is_empty() {
        return Err(Error::InvalidInput("t-grid needs at least one positive step".into()));
    }
    for &t in &t_grid {
        if t.abs() > opts.family.t_max {
            return Err(Error::OutOfRange(format!(
                "t = {t} outside the admissible range ±{}",
                opts.family.t_max
            )));
        }
    }
    if opts.mesh_ladder.is_empty() || opts.mesh_ladder.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("mesh ladder must be nonempty and increasing".into()));
    }
    let meshes: Vec<crate::fem::Mesh> = opts
        .mesh_ladder
        .iter()
        .map(|&n| mesh_domain(opts.domain, n))
        .collect::<Result<_>>()?;
    for mesh in &meshes {
        for &t in &[-opts.family.t_max, opts.family.t_max] {
            let mapped = crate::geometry::map_points(opts.family, t, &mesh.nodes)?;
            crate::fem::assemble_nodes(mesh, mapped)?;
        }
    }

    let jobs: Vec<(usize, usize)> = (0..meshes.len())
        .flat_map(|l| (0..t_grid.len()).map(move |ti| (l, ti)))
        .collect();
    let solved: Vec<Result<Solve>> = jobs
        .par_iter()
        .map(|&(l, ti)| {
            let seed = opts.seed ^ ((l as u64) << 32) ^ ti as u64;
            solve_window(&meshes[l], opts.family, t_grid[ti], opts.window, opts.count_hint, seed)
        })
        .collect();
    let mut per_level: Vec<Vec<Option<Solve>>> = (0..meshes.len()).map(|_| (0..t_grid.len()).map(|_| None).collect()).collect();
    for ((l, ti), s) in jobs.into_iter().zip(solved) {
        let s = s?;
        if s.values.len() != opts.multiplicity {
            return Err(Error::WindowMultiplicity {
                t: t_grid[ti],
                found: s.values.len(),
                expected: opts.multiplicity,
            });
        }
        per_level[l][ti] = Some(s);
    }

    let zero = t_grid.iter().position(|&t| t == 0.0).expect("zero in grid");
    let mut levels = Vec::with_capacity(meshes.len());
    for (l, mesh) in meshes.iter().enumerate() {
        let m0 = assemble(mesh, &PerturbFamily::new(crate::geometry::FamilyKind::Identity), 0.0)?.m;
        let mut slots: Vec<Option<Solve>> = std::mem::take(&mut per_level[l]);
        let mut ordered: Vec<Option<Solve>> = (0..t_grid.len()).map(|_| None).collect();
        // positive side: ids by value rank at the smallest step
        let first = zero + 1;
        let mut s = slots[first].take().expect("solved");
        let rank = {
            let mut idx: Vec<usize> = (0..s.values.len()).collect();
            idx.sort_by(|&a, &b| s.values[a].total_cmp(&s.values[b]));
            let mut inv = vec![0; idx.len()];
            for (r, &i) in idx.iter().enumerate() {
                inv[i] = r;
            }
            inv
        };
        s = reorder(s, &rank);
        ordered[first] = Some(s);
        for ti in first + 1..t_grid.len() {
            let new = slots[ti].take().expect("solved");
            let assign = continue_branches(ordered[ti - 1].as_ref().expect("set"), &new, &m0, opts.window, false);
            ordered[ti] = Some(reorder(new, &assign));
        }
        // t = 0 and the negative side hang off the smallest positive step by overlap
        let z = slots[zero].take().expect("solved");
        let assign = continue_branches(ordered[first].as_ref().expect("set"), &z, &m0, opts.window, true);
        ordered[zero] = Some(reorder(z, &assign));
        if zero > 0 {
            let neg = slots[zero - 1].take().expect("solved");
            let assign = continue_branches(ordered[first].as_ref().expect("set"), &neg, &m0, opts.window, true);
            ordered[zero - 1] = Some(reorder(neg, &assign));
            for ti in (0..zero - 1).rev() {
                let new = slots[ti].take().expect("solved");
                let assign = continue_branches(ordered[ti + 1].as_ref().expect("set"), &new, &m0, opts.window, false);
                ordered[ti] = Some(reorder(new, &assign));
            }
        }
        let solves: Vec<Solve> = ordered.into_iter().map(|s| s.expect("all slots filled")).collect();
        for w in solves.windows(2) {
            for b in 0..opts.multiplicity {
                if (w[1].values[b] - w[0].values[b]).abs() > opts.window.width() {
                    return Err(Error::BranchMatching(format!(
                        "branch {b} jumps by more than the window on level {}",
                        mesh.divisions
                    )));
                }
            }
        }
        levels.push(LevelBranches {
            divisions: mesh.divisions,
            h: mesh.h,
            max_residual: solves.iter().map(|s| s.max_residual).fold(0.0, f64::max),
            values: solves.into_iter().map(|s| s.values).collect(),
        });
    }
    let table = BranchTable {
        t_grid,
        lambda0: opts.lambda0,
        window: opts.window,
        multiplicity: opts.multiplicity,
        levels,
    };
    table.check_shape()?;
    Ok(table)
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeEstimate {
    pub branch: usize,
    pub slope: f64,
    pub uncertainty: f64,
    /// `|D(s1) - D(s2)|` of the two h-extrapolated central differences.
    pub step_spread: f64,
    pub mesh_residual: f64,
    /// t-extrapolated slope on each mesh level.
    pub per_level: Vec<f64>,
}

/// `lambda'(0)` per branch from the two smallest symmetric steps.
pub fn estimate_slopes(table: &BranchTable) -> Result<Vec<SlopeEstimate>> {
    let steps = check_grid(&table.t_grid)?;
    if steps.len() < 2 {
        return Err(Error::InvalidInput("slope estimates need two symmetric step pairs".into()));
    }
    let (s1, s2) = (steps[0], steps[1]);
    let idx = |t: f64| {
        table
            .t_index(t)
            .ok_or_else(|| Error::InvalidInput(format!("branch table lacks t = {t}")))
    };
    let (p1, m1, p2, m2) = (idx(s1)?, idx(-s1)?, idx(s2)?, idx(-s2)?);
    let ratio = s2 / s1;
    let mut out = Vec::with_capacity(table.multiplicity);
    for b in 0..table.multiplicity {
        let mut d1 = Vec::new();
        let mut d2 = Vec::new();
        for l in &table.levels {
            let v = |i: usize| l.values[i][b];
            d1.push((v(p1) - v(m1)) / (2.0 * s1));
            d2.push((v(p2) - v(m2)) / (2.0 * s2));
        }
        let per_level: Vec<f64> = d1.iter().zip(&d2).map(|(a, c)| richardson(*a, *c, ratio)).collect();
        let h_ratio = |i: usize| table.levels[i + 1].divisions as f64 / table.levels[i].divisions as f64;
        let n = per_level.len();
        let h_extrap = |vals: &[f64]| -> (f64, f64) {
            match n {
                1 => (vals[0], 0.0),
                2 => {
                    let e = richardson(vals[1], vals[0], h_ratio(0));
                    (e, (e - vals[1]).abs())
                }
                _ => {
                    let fine = richardson(vals[n - 1], vals[n - 2], h_ratio(n - 2));
                    let coarse = richardson(vals[n - 2], vals[n - 3], h_ratio(n - 3));
                    (fine, (fine - coarse).abs())
                }
            }
        };
        let (slope, mesh_residual) = h_extrap(&per_level);
        let (e1, _) = h_extrap(&d1);
        let (e2, _) = h_extrap(&d2);
        let step_spread = (e1 - e2).abs();
        out.push(SlopeEstimate {
            branch: b,
            slope,
            uncertainty: step_spread + mesh_residual,
            step_spread,
            mesh_residual,
            per_level,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { abs: 1e-3, rel: 2e-2 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchComparison {
    pub branch: usize,
    pub measured: f64,
    pub uncertainty: f64,
    /// Slope `-mu` of the pencil root matched to this branch.
    pub predicted: f64,
    pub root_simple: bool,
    /// Pass/fail for simple roots; `None` for informational comparisons.
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterComparison {
    pub predicted: f64,
    pub multiplicity: usize,
    pub measured_mean: f64,
    pub difference: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SumRule {
    pub measured: f64,
    pub predicted: f64,
    pub uncertainty: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub scenario: String,
    pub branches: Vec<BranchComparison>,
    /// Informational comparisons for multiple pencil roots.
    pub inconclusive: Vec<ClusterComparison>,
    pub sum_rule: SumRule,
    pub measured: Vec<SlopeEstimate>,
    pub tolerances: Tolerances,
    pub pass: bool,
}

/// Pairs measured slopes with predicted ones in sorted order (the optimal
/// nearest assignment on the line) and applies the tolerances to simple roots.
pub fn compare(scenario: &str, prediction: &SlopePrediction, measured: &[SlopeEstimate], tol: Tolerances) -> Result<ValidationReport> {
    let predicted_total: usize = prediction.clusters.iter().map(|c| c.multiplicity).sum();
    if predicted_total != measured.len() {
        return Err(Error::CountMismatch {
            predicted: predicted_total,
            measured: measured.len(),
        });
    }
    let mut order: Vec<usize> = (0..measured.len()).collect();
    order.sort_by(|&a, &b| measured[a].slope.total_cmp(&measured[b].slope));
    // clusters are ascending in root, so descending in slope
    let mut clusters = prediction.clusters.clone();
    clusters.reverse();
    let mut branches = Vec::with_capacity(measured.len());
    let mut inconclusive = Vec::new();
    let mut k = 0;
    for c in &clusters {
        let group: Vec<&SlopeEstimate> = order[k..k + c.multiplicity].iter().map(|&i| &measured[i]).collect();
        k += c.multiplicity;
        for m in &group {
            let pass = c
                .simple
                .then(|| (m.slope - c.slope).abs() <= tol.abs + tol.rel * c.slope.abs());
            branches.push(BranchComparison {
                branch: m.branch,
                measured: m.slope,
                uncertainty: m.uncertainty,
                predicted: c.slope,
                root_simple: c.simple,
                pass,
            });
        }
        if !c.simple {
            let mean = group.iter().map(|m| m.slope).sum::<f64>() / group.len() as f64;
            inconclusive.push(ClusterComparison {
                predicted: c.slope,
                multiplicity: c.multiplicity,
                measured_mean: mean,
                difference: mean - c.slope,
            });
        }
    }
    let msum: f64 = measured.iter().map(|m| m.slope).sum();
    let usum: f64 = measured.iter().map(|m| m.uncertainty).sum();
    let sum_rule = SumRule {
        measured: msum,
        predicted: prediction.slope_sum,
        uncertainty: usum,
        pass: (msum - prediction.slope_sum).abs() <= usum.max(tol.abs),
    };
    let pass = branches.iter().all(|b| b.pass != Some(false)) && sum_rule.pass;
    Ok(ValidationReport {
        scenario: scenario.to_string(),
        branches,
        inconclusive,
        sum_rule,
        measured: measured.to_vec(),
        tolerances: tol,
        pass,
    })
}
