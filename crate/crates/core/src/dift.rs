//! Continuation of solution branches through a degenerate point.
//!
//! `F(t, x) = q` where at `t = 0` the solutions form a manifold
//! `M = {0} x X2` in chart coordinates `x = (x1, x2)`. The linearization `L`
//! is singular along `M`, so the branch is found from the rescaled map
//! `J(t, x1, x2) = F(t, t (x1 - w), x2) / t`, which is regular at `t = 0`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pencil::{generalized_roots, jacobi_eigen};

pub type Evaluator = Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>;

/// Thresholds for the four hypotheses.
pub const BASE_TOL: f64 = 1e-10;
pub const KERNEL_TOL: f64 = 1e-8;
pub const RHS_TOL: f64 = 1e-8;
pub const SINGULAR_TOL: f64 = 1e-6;

pub const FD_STEP: f64 = 1e-6;
pub const MIXED_STEP: f64 = 1e-4;
pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;
/// `x'(0)` from central differences at this step and twice it.
pub const TANGENCY_STEP: f64 = 1e-3;
/// Step for the derivative formula of `J(0, .)`.
pub const RESCALED_STEP: f64 = 1e-3;

#[derive(Clone)]
pub struct DiftProblem {
    pub name: String,
    pub f: Evaluator,
    /// Dimension of `X1`; chart coordinates are `x = (x1, x2)`.
    pub n1: usize,
    pub n2: usize,
    /// `X2` part of the base point `p = (0, p2)`.
    pub p2: Vec<f64>,
    /// `F_t(0, p) = L v`.
    pub v: Vec<f64>,
    pub q: Vec<f64>,
}

impl std::fmt::Debug for DiftProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiftProblem")
            .field("name", &self.name)
            .field("n1", &self.n1)
            .field("n2", &self.n2)
            .field("p2", &self.p2)
            .field("v", &self.v)
            .field("q", &self.q)
            .finish()
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Central difference at `h` and `h / 2`, Richardson-combined.
fn richardson_diff(g: impl Fn(f64) -> Vec<f64>, h: f64) -> Vec<f64> {
    let d = |h: f64| -> Vec<f64> { sub(&g(h), &g(-h)).into_iter().map(|x| x / (2.0 * h)).collect() };
    let (a, b) = (d(h), d(h / 2.0));
    b.iter().zip(&a).map(|(b, a)| (4.0 * b - a) / 3.0).collect()
}

fn central_diff(g: impl Fn(f64) -> Vec<f64>, h: f64) -> Vec<f64> {
    sub(&g(h), &g(-h)).into_iter().map(|x| x / (2.0 * h)).collect()
}

impl DiftProblem {
    pub fn dim(&self) -> usize {
        self.n1 + self.n2
    }

    pub fn base_point(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.n1];
        p.extend_from_slice(&self.p2);
        p
    }

    fn validate(&self) -> Result<()> {
        let p = self.base_point();
        if self.v.len() != self.dim() {
            return Err(Error::InvalidInput(format!("v has length {}, expected {}", self.v.len(), self.dim())));
        }
        let f0 = (self.f)(0.0, &p);
        if f0.len() != self.q.len() {
            return Err(Error::InvalidInput(format!("F has {} components but q has {}", f0.len(), self.q.len())));
        }
        if f0.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("F is not finite at the base point".into()));
        }
        Ok(())
    }

    /// `L = D_x F(0, p)`, one column per chart coordinate.
    pub fn linearization(&self) -> DMatrix<f64> {
        let p = self.base_point();
        let cols: Vec<Vec<f64>> = (0..self.dim())
            .map(|j| {
                richardson_diff(
                    |h| {
                        let mut x = p.clone();
                        x[j] += h;
                        (self.f)(0.0, &x)
                    },
                    FD_STEP,
                )
            })
            .collect();
        DMatrix::from_fn(self.q.len(), self.dim(), |i, j| cols[j][i])
    }

    pub fn f_t(&self, t: f64, x: &[f64]) -> Vec<f64> {
        richardson_diff(|h| (self.f)(t + h, x), FD_STEP)
    }

    /// `G = D(F_t - F_v)(0, p)` restricted to `X2`, by nested differences.
    pub fn mixed_operator(&self) -> DMatrix<f64> {
        let p = self.base_point();
        // d/ds F(s, x - s v) at s = 0 equals F_t - F_v
        let g = |x: &[f64]| {
            central_diff(
                |s| {
                    let y: Vec<f64> = x.iter().zip(&self.v).map(|(xi, vi)| xi - s * vi).collect();
                    (self.f)(s, &y)
                },
                MIXED_STEP,
            )
        };
        let cols: Vec<Vec<f64>> = (0..self.n2)
            .map(|j| {
                central_diff(
                    |h| {
                        let mut x = p.clone();
                        x[self.n1 + j] += h;
                        g(&x)
                    },
                    MIXED_STEP,
                )
            })
            .collect();
        DMatrix::from_fn(self.q.len(), self.n2, |i, j| cols[j][i])
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    /// Largest `|F(0, (0, x2)) - q|` over sampled points of `M`.
    pub a_residual: f64,
    /// Largest column norm of `L` over `X2`.
    pub b_kernel_residual: f64,
    /// Smallest singular value of `L` over `X1`, relative to the largest.
    pub b_injectivity: f64,
    pub c_residual: f64,
    /// Smallest singular value of `[L|X1, G]`, relative to `max(1, largest)`.
    pub d_sigma_min: f64,
    pub square: bool,
    pub failed: Option<char>,
}

impl ConditionReport {
    pub fn holds(&self) -> bool {
        self.failed.is_none()
    }
}

fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().cloned().collect();
    s.sort_by(f64::total_cmp);
    s
}

/// Evaluates conditions (a)-(d) without failing.
pub fn condition_report(problem: &DiftProblem) -> Result<ConditionReport> {
    problem.validate()?;
    let p = problem.base_point();
    let mut a_residual = norm(&sub(&(problem.f)(0.0, &p), &problem.q));
    for j in 0..problem.n2 {
        for s in [-0.1, -0.05, 0.05, 0.1] {
            let mut x = p.clone();
            x[problem.n1 + j] += s;
            a_residual = a_residual.max(norm(&sub(&(problem.f)(0.0, &x), &problem.q)));
        }
    }
    let l = problem.linearization();
    let l1 = l.columns(0, problem.n1).into_owned();
    let b_kernel_residual = (0..problem.n2)
        .map(|j| l.column(problem.n1 + j).norm())
        .fold(0.0, f64::max);
    let sv = singular_values(&l1);
    let b_injectivity = match (sv.first(), sv.last()) {
        (Some(lo), Some(hi)) if *hi > 0.0 => lo / hi,
        (Some(_), Some(_)) => 0.0,
        _ => 1.0,
    };
    let lv = &l * DVector::from_vec(problem.v.clone());
    let c_residual = norm(&sub(&problem.f_t(0.0, &p), lv.as_slice()));
    let g = problem.mixed_operator();
    let square = problem.q.len() == problem.dim();
    let d_sigma_min = if square {
        let mut op = DMatrix::zeros(problem.q.len(), problem.dim());
        op.columns_mut(0, problem.n1).copy_from(&l1);
        op.columns_mut(problem.n1, problem.n2).copy_from(&g);
        let s = singular_values(&op);
        s[0] / s.last().cloned().unwrap_or(0.0).max(1.0)
    } else {
        0.0
    };
    let failed = if a_residual > BASE_TOL {
        Some('a')
    } else if b_kernel_residual > KERNEL_TOL || b_injectivity <= KERNEL_TOL {
        Some('b')
    } else if c_residual > RHS_TOL {
        Some('c')
    } else if !square || d_sigma_min <= SINGULAR_TOL {
        Some('d')
    } else {
        None
    };
    Ok(ConditionReport {
        a_residual,
        b_kernel_residual,
        b_injectivity,
        c_residual,
        d_sigma_min,
        square,
        failed,
    })
}

/// Verifies (a)-(d), naming the first condition that fails.
pub fn check_conditions(problem: &DiftProblem) -> Result<ConditionReport> {
    let r = condition_report(problem)?;
    match r.failed {
        None => Ok(r),
        Some(c) => {
            let detail = match c {
                'a' => format!("F(0, x) - q reaches {:.3e} on M", r.a_residual),
                'b' => format!(
                    "kernel residual {:.3e}, relative smallest singular value on X1 {:.3e}",
                    r.b_kernel_residual, r.b_injectivity
                ),
                'c' => format!("|F_t(0, p) - L v| = {:.3e}", r.c_residual),
                _ if !r.square => "[L|X1, G] is not square".to_string(),
                _ => format!("[L|X1, G] is singular (relative sigma_min {:.3e})", r.d_sigma_min),
            };
            Err(Error::ConditionFailed { condition: c, detail })
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NewtonTrace {
    pub t: f64,
    pub residuals: Vec<f64>,
    pub damped_steps: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiftBranch {
    pub t: Vec<f64>,
    /// `x(t)` in chart coordinates.
    pub x: Vec<Vec<f64>>,
    /// `|F(t, x(t)) - q|`.
    pub residuals: Vec<f64>,
    /// Central-difference estimate of `x'(0)` (two steps, Richardson).
    pub x_prime0: Vec<f64>,
    /// `x1'(0) = x1~(0) - w`, exact up to the Newton tolerance.
    pub x1_prime0: Vec<f64>,
    /// `|(x'(0) + v)_{X1}|`.
    pub tangency: f64,
    pub newton: Vec<NewtonTrace>,
}

struct Rescaled<'a> {
    problem: &'a DiftProblem,
    w: Vec<f64>,
}

impl Rescaled<'_> {
    fn original(&self, t: f64, y: &[f64]) -> Vec<f64> {
        let n1 = self.problem.n1;
        let mut x: Vec<f64> = (0..n1).map(|i| t * (y[i] - self.w[i])).collect();
        x.extend_from_slice(&y[n1..]);
        x
    }

    fn j(&self, t: f64, y: &[f64]) -> Vec<f64> {
        let pb = self.problem;
        if t == 0.0 {
            // J(0, y) = F_t(0, 0, y2) + F_x1(0, 0, y2) (y1 - w)
            let x = self.original(0.0, y);
            let dir: Vec<f64> = (0..pb.dim())
                .map(|i| if i < pb.n1 { y[i] - self.w[i] } else { 0.0 })
                .collect();
            return richardson_diff(
                |h| {
                    let xs: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + h * d).collect();
                    sub(&(pb.f)(h, &xs), &pb.q)
                },
                RESCALED_STEP,
            );
        }
        sub(&(pb.f)(t, &self.original(t, y)), &pb.q).into_iter().map(|r| r / t).collect()
    }

    fn jacobian(&self, t: f64, y: &[f64]) -> DMatrix<f64> {
        let n = y.len();
        let h = 1e-7;
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|k| {
                central_diff(
                    |s| {
                        let mut z = y.to_vec();
                        z[k] += s;
                        self.j(t, &z)
                    },
                    h,
                )
            })
            .collect();
        DMatrix::from_fn(self.problem.q.len(), n, |i, k| cols[k][i])
    }

    fn newton(&self, t: f64, start: &[f64]) -> Result<(Vec<f64>, NewtonTrace)> {
        let mut y = start.to_vec();
        let mut r = norm(&self.j(t, &y));
        let mut trace = NewtonTrace {
            t,
            residuals: vec![r],
            damped_steps: 0,
        };
        for _ in 0..NEWTON_MAX_ITER {
            if r <= NEWTON_TOL {
                return Ok((y, trace));
            }
            let jac = self.jacobian(t, &y);
            let rhs = DVector::from_vec(self.j(t, &y));
            let step = jac
                .lu()
                .solve(&rhs)
                .filter(|s| s.iter().all(|x| x.is_finite()))
                .ok_or_else(|| Error::Factorization(format!("rescaled Jacobian is singular at t = {t}")))?;
            let mut alpha = 1.0;
            let (next, rn) = loop {
                let cand: Vec<f64> = y.iter().zip(step.iter()).map(|(a, s)| a - alpha * s).collect();
                let rc = norm(&self.j(t, &cand));
                if rc < r || alpha < 1e-6 {
                    break (cand, rc);
                }
                alpha *= 0.5;
                trace.damped_steps += 1;
            };
            if alpha == 1.0 && r < 1e-4 && r > 1e-9 && rn > 0.1 * r {
                return Err(Error::NoConvergence(format!(
                    "Newton stalled at t = {t}: residual {r:.3e} -> {rn:.3e}"
                )));
            }
            y = next;
            r = rn;
            trace.residuals.push(r);
        }
        if r <= NEWTON_TOL {
            Ok((y, trace))
        } else {
            Err(Error::NoConvergence(format!(
                "Newton did not reach {NEWTON_TOL:e} at t = {t} (residual {r:.3e})"
            )))
        }
    }
}

/// Continues the branch through `p` over `t_grid` (which must contain 0 or
/// will have it added), outward from `t = 0` in both directions.
pub fn solve_branch(problem: &DiftProblem, t_grid: &[f64]) -> Result<DiftBranch> {
    check_conditions(problem)?;
    let l = problem.linearization();
    let l1 = l.columns(0, problem.n1).into_owned();
    let lv = &l * DVector::from_vec(problem.v.clone());
    // w is the X1 coordinate with L|X1 w = L v
    let w = l1
        .clone()
        .svd(true, true)
        .solve(&lv, 1e-14)
        .map_err(|e| Error::Factorization(e.to_string()))?;
    let resc = Rescaled {
        problem,
        w: w.iter().cloned().collect(),
    };
    let mut grid: Vec<f64> = t_grid.to_vec();
    let h = TANGENCY_STEP;
    grid.extend([0.0, h, -h, 2.0 * h, -2.0 * h]);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let zero = grid.iter().position(|&t| t == 0.0).expect("zero added");
    let mut y0 = vec![0.0; problem.n1];
    y0.extend_from_slice(&problem.p2);
    let (y0, tr0) = resc.newton(0.0, &y0)?;
    let mut ys: Vec<Option<Vec<f64>>> = vec![None; grid.len()];
    let mut traces: Vec<Option<NewtonTrace>> = vec![None; grid.len()];
    ys[zero] = Some(y0.clone());
    traces[zero] = Some(tr0);
    for dir in [1isize, -1] {
        let mut prev = y0.clone();
        let mut i = zero as isize + dir;
        while i >= 0 && (i as usize) < grid.len() {
            let (y, tr) = resc.newton(grid[i as usize], &prev)?;
            prev = y.clone();
            ys[i as usize] = Some(y);
            traces[i as usize] = Some(tr);
            i += dir;
        }
    }
    let xs: Vec<Vec<f64>> = grid
        .iter()
        .zip(&ys)
        .map(|(&t, y)| resc.original(t, y.as_ref().expect("solved")))
        .collect();
    let at = |t: f64| grid.iter().position(|&s| s == t).expect("grid point");
    let diff = |s: f64| -> Vec<f64> {
        let (ip, im) = (at(s), at(-s));
        xs[ip].iter().zip(&xs[im]).map(|(a, b)| (a - b) / (2.0 * s)).collect()
    };
    let x_prime0: Vec<f64> = diff(h).iter().zip(diff(2.0 * h)).map(|(a, b)| (4.0 * a - b) / 3.0).collect();
    let tangency = norm(
        &x_prime0[..problem.n1]
            .iter()
            .zip(&problem.v)
            .map(|(a, b)| a + b)
            .collect::<Vec<_>>(),
    );
    // report only the requested grid (plus 0)
    let keep: Vec<usize> = (0..grid.len())
        .filter(|&i| grid[i] == 0.0 || t_grid.contains(&grid[i]))
        .collect();
    let residuals = keep
        .iter()
        .map(|&i| norm(&sub(&(problem.f)(grid[i], &xs[i]), &problem.q)))
        .collect();
    Ok(DiftBranch {
        t: keep.iter().map(|&i| grid[i]).collect(),
        x: keep.iter().map(|&i| xs[i].clone()).collect(),
        residuals,
        x_prime0,
        x1_prime0: y0[..problem.n1].iter().zip(&resc.w).map(|(a, b)| a - b).collect(),
        tangency,
        newton: keep.iter().map(|&i| traces[i].clone().expect("solved")).collect(),
    })
}

/// `A(t) = sum_k t^k A_k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixFamily {
    #[serde(serialize_with = "serialize_matrices")]
    pub coeffs: Vec<DMatrix<f64>>,
}

fn serialize_matrices<S: serde::Serializer>(m: &[DMatrix<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.len()))?;
    for a in m {
        let rows: Vec<Vec<f64>> = (0..a.nrows()).map(|i| a.row(i).iter().cloned().collect()).collect();
        seq.serialize_element(&rows)?;
    }
    seq.end()
}

impl MatrixFamily {
    pub fn at(&self, t: f64) -> DMatrix<f64> {
        let n = self.coeffs[0].nrows();
        let mut out = DMatrix::zeros(n, n);
        let mut tk = 1.0;
        for a in &self.coeffs {
            out += a * tk;
            tk *= t;
        }
        out
    }
}

/// The eigenproblem `F(t, lambda, u) = (|u|^2/2 - 1/2, (A(t) - lambda) u)`
/// in a chart adapted to the unit sphere of the `lambda0`-eigenspace of
/// `A(0)`:
///
/// `u = (1 + r) normalize(u* + sum x2_j f_j) + sum z_k g_k`,
/// `lambda = lambda0 + a`, with `x1 = (a, r, z)`.
#[derive(Debug, Clone)]
pub struct EigenChart {
    pub family: MatrixFamily,
    pub lambda0: f64,
    pub base: DVector<f64>,
    /// Orthonormal basis of the eigenspace orthogonal to `base`.
    pub tangent: DMatrix<f64>,
    /// Eigenvectors of `A(0)` outside the eigenspace.
    pub normal: DMatrix<f64>,
    pub normal_values: Vec<f64>,
}

impl EigenChart {
    /// `base` must be a unit vector in the `lambda0`-eigenspace of `A(0)`.
    pub fn new(family: MatrixFamily, lambda0: f64, base: DVector<f64>) -> Result<Self> {
        let a0 = &family.coeffs[0];
        let n = a0.nrows();
        if a0.ncols() != n || family.coeffs.iter().any(|a| a.shape() != (n, n)) || base.len() != n {
            return Err(Error::InvalidInput("matrix family and base vector sizes differ".into()));
        }
        let (vals, vecs) = jacobi_eigen(a0)?;
        let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let inside: Vec<usize> = (0..n).filter(|&i| (vals[i] - lambda0).abs() <= 1e-10 * scale).collect();
        if inside.is_empty() {
            return Err(Error::InvalidInput(format!("{lambda0} is not an eigenvalue of A(0)")));
        }
        let base = base.normalize();
        let e = DMatrix::from_fn(n, inside.len(), |i, j| vecs[(i, inside[j])]);
        if (&e * (e.transpose() * &base) - &base).norm() > 1e-10 {
            return Err(Error::InvalidInput("base vector is not in the eigenspace".into()));
        }
        // Gram-Schmidt of the eigenspace against the base vector
        let mut tangent: Vec<DVector<f64>> = Vec::new();
        for j in 0..e.ncols() {
            let mut c = e.column(j).into_owned();
            for _ in 0..2 {
                c -= &base * base.dot(&c);
                for f in &tangent {
                    c -= f * f.dot(&c);
                }
            }
            if c.norm() > 1e-8 {
                tangent.push(c.normalize());
            }
        }
        let outside: Vec<usize> = (0..n).filter(|i| !inside.contains(i)).collect();
        Ok(Self {
            tangent: DMatrix::from_fn(n, tangent.len(), |i, j| tangent[j][i]),
            normal: DMatrix::from_fn(n, outside.len(), |i, j| vecs[(i, outside[j])]),
            normal_values: outside.iter().map(|&i| vals[i]).collect(),
            family,
            lambda0,
            base,
        })
    }

    pub fn n1(&self) -> usize {
        2 + self.normal.ncols()
    }

    pub fn n2(&self) -> usize {
        self.tangent.ncols()
    }

    /// `(lambda, u)` at chart coordinates `x`.
    pub fn point(&self, x: &[f64]) -> (f64, DVector<f64>) {
        let (n1, nz) = (self.n1(), self.normal.ncols());
        let mut dir = self.base.clone();
        for j in 0..self.n2() {
            dir += self.tangent.column(j) * x[n1 + j];
        }
        let mut u = dir.normalize() * (1.0 + x[1]);
        for k in 0..nz {
            u += self.normal.column(k) * x[2 + k];
        }
        (self.lambda0 + x[0], u)
    }

    pub fn problem(&self, name: &str) -> DiftProblem {
        let chart = self.clone();
        let f: Evaluator = Arc::new(move |t, x| {
            let (lambda, u) = chart.point(x);
            let mut out = vec![0.5 * u.norm_squared() - 0.5];
            let r = chart.family.at(t) * &u - &u * lambda;
            out.extend(r.iter());
            out
        });
        // F_t(0, p) = (0, A1 u*) = L v with v = (a, 0, z, 0):
        // -a u* + sum z_k (lambda_k - lambda0) g_k = A1 u*
        let a1u = if self.family.coeffs.len() > 1 {
            &self.family.coeffs[1] * &self.base
        } else {
            DVector::zeros(self.base.len())
        };
        let mut v = vec![-self.base.dot(&a1u), 0.0];
        for (k, lk) in self.normal_values.iter().enumerate() {
            v.push(self.normal.column(k).dot(&a1u) / (lk - self.lambda0));
        }
        v.extend(std::iter::repeat(0.0).take(self.n2()));
        DiftProblem {
            name: name.to_string(),
            f,
            n1: self.n1(),
            n2: self.n2(),
            p2: vec![0.0; self.n2()],
            v,
            q: vec![0.0; self.base.len() + 1],
        }
    }

    /// Pencil `(-E^T A1 E, E^T E)` over the eigenspace `E`; its roots are
    /// the negatives of the branch slopes.
    pub fn pencil(&self) -> Result<crate::pencil::PencilRoots> {
        let n2 = self.n2();
        let mut e = DMatrix::zeros(self.base.len(), n2 + 1);
        e.set_column(0, &self.base);
        for j in 0..n2 {
            e.set_column(j + 1, &self.tangent.column(j));
        }
        let a1 = self.family.coeffs.get(1).cloned().unwrap_or_else(|| DMatrix::zeros(e.nrows(), e.nrows()));
        let a = -(e.transpose() * a1 * &e);
        let a = 0.5 * (&a + a.transpose());
        generalized_roots(&a, &(e.transpose() * &e))
    }
}

/// A catalog entry: the problem, its grid, and the chart when it is an
/// eigenproblem.
#[derive(Debug, Clone)]
pub struct DiftExample {
    pub problem: DiftProblem,
    pub t_grid: Vec<f64>,
    pub chart: Option<EigenChart>,
    pub description: &'static str,
}

pub const CATALOG: [&str; 5] = [
    "dift.equal_slopes",
    "dift.matrix_family_2x2",
    "dift.matrix_family_2x2_offdiag",
    "dift.matrix_family_3x3",
    "dift.scalar_shift",
];

/// `-0.1, -0.09, ..., 0.1`.
pub fn default_grid() -> Vec<f64> {
    (-10..=10).map(|k| k as f64 / 100.0).collect()
}

fn mat(n: usize, rows: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, rows)
}

fn eigen_example(name: &str, family: MatrixFamily, lambda0: f64, base: &[f64], description: &'static str) -> Result<DiftExample> {
    let chart = EigenChart::new(family, lambda0, DVector::from_row_slice(base))?;
    Ok(DiftExample {
        problem: chart.problem(name),
        t_grid: default_grid(),
        chart: Some(chart),
        description,
    })
}

/// Branch vectors of the pencil `(-E^T A1 E, I)` for a family, in the
/// ambient space, ordered by root.
pub fn pencil_directions(family: &MatrixFamily, lambda0: f64) -> Result<Vec<DVector<f64>>> {
    let n = family.coeffs[0].nrows();
    let probe = EigenChart::new(family.clone(), lambda0, {
        let (vals, vecs) = jacobi_eigen(&family.coeffs[0])?;
        let i = (0..n)
            .min_by(|&a, &b| (vals[a] - lambda0).abs().total_cmp(&(vals[b] - lambda0).abs()))
            .expect("nonempty");
        vecs.column(i).into_owned()
    })?;
    let roots = probe.pencil()?;
    let mut e = DMatrix::zeros(n, probe.n2() + 1);
    e.set_column(0, &probe.base);
    for j in 0..probe.n2() {
        e.set_column(j + 1, &probe.tangent.column(j));
    }
    Ok((0..roots.dim()).map(|i| (&e * roots.vectors.column(i)).normalize()).collect())
}

pub fn example(name: &str) -> Result<DiftExample> {
    match name {
        "dift.matrix_family_2x2" => eigen_example(
            name,
            MatrixFamily {
                coeffs: vec![DMatrix::identity(2, 2), mat(2, &[1.0, 0.0, 0.0, 2.0])],
            },
            1.0,
            &[1.0, 0.0],
            "A(t) = I + t diag(1, 2), branch through e1 (lambda = 1 + t)",
        ),
        "dift.matrix_family_2x2_offdiag" => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            eigen_example(
                name,
                MatrixFamily {
                    coeffs: vec![DMatrix::identity(2, 2), mat(2, &[0.0, 1.0, 1.0, 0.0])],
                },
                1.0,
                &[s, s],
                "A(t) = I + t [[0, 1], [1, 0]], branch through (1, 1)/sqrt 2 (lambda = 1 + t)",
            )
        }
        "dift.matrix_family_3x3" => {
            let family = matrix_family_3x3();
            let dirs = pencil_directions(&family, 1.0)?;
            let base: Vec<f64> = dirs[0].iter().cloned().collect();
            eigen_example(
                name,
                family,
                1.0,
                &base,
                "A(t) = diag(1, 1, 3) + t A1 + t^2 A2, double eigenvalue 1 split by A1",
            )
        }
        "dift.equal_slopes" => eigen_example(
            name,
            MatrixFamily {
                coeffs: vec![DMatrix::identity(2, 2), DMatrix::identity(2, 2)],
            },
            1.0,
            &[1.0, 0.0],
            "A(t) = (1 + t) I: both branches share the slope, so condition (d) fails",
        ),
        "dift.scalar_shift" => Ok(DiftExample {
            problem: DiftProblem {
                name: name.to_string(),
                f: Arc::new(|t, x| vec![x[0] - t]),
                n1: 1,
                n2: 0,
                p2: vec![],
                v: vec![-1.0],
                q: vec![0.0],
            },
            t_grid: default_grid(),
            chart: None,
            description: "F(t, x) = x - t with M = {0}: branch x(t) = t",
        }),
        _ => Err(Error::InvalidInput(format!("unknown example {name:?}"))),
    }
}

pub fn matrix_family_3x3() -> MatrixFamily {
    MatrixFamily {
        coeffs: vec![
            mat(3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 3.0]),
            mat(3, &[0.5, 0.3, 0.2, 0.3, -0.4, 0.1, 0.2, 0.1, 0.7]),
            mat(3, &[0.1, -0.2, 0.05, -0.2, 0.3, 0.0, 0.05, 0.0, -0.1]),
        ],
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenBranchSample {
    pub t: f64,
    pub lambda: f64,
    pub vector: Vec<f64>,
}

/// Reads `(lambda, u)` off a branch computed in an eigen chart.
pub fn eigen_samples(chart: &EigenChart, branch: &DiftBranch) -> Vec<EigenBranchSample> {
    branch
        .t
        .iter()
        .zip(&branch.x)
        .map(|(&t, x)| {
            let (lambda, u) = chart.point(x);
            EigenBranchSample {
                t,
                lambda,
                vector: u.iter().cloned().collect(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
        let mut v: Vec<f64> = a.clone().symmetric_eigen().eigenvalues.iter().cloned().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn catalog_examples_resolve() {
        for name in CATALOG {
            assert!(example(name).is_ok(), "{name}");
        }
        assert!(example("dift.nope").is_err());
    }

    #[test]
    fn diagonal_family_satisfies_conditions() {
        let ex = example("dift.matrix_family_2x2").unwrap();
        let r = check_conditions(&ex.problem).unwrap();
        assert!(r.a_residual <= BASE_TOL);
        assert!(r.b_kernel_residual <= KERNEL_TOL);
        assert!(r.c_residual <= RHS_TOL);
        assert!(r.d_sigma_min > SINGULAR_TOL);
    }

    #[test]
    fn equal_slopes_fail_condition_d() {
        let ex = example("dift.equal_slopes").unwrap();
        match check_conditions(&ex.problem) {
            Err(Error::ConditionFailed { condition, .. }) => assert_eq!(condition, 'd'),
            other => panic!("expected a (d) failure, got {other:?}"),
        }
    }

    #[test]
    fn scalar_shift_branch_is_identity() {
        let ex = example("dift.scalar_shift").unwrap();
        let b = solve_branch(&ex.problem, &ex.t_grid).unwrap();
        for (t, x) in b.t.iter().zip(&b.x) {
            assert!((x[0] - t).abs() <= 1e-12);
        }
        assert!(b.tangency <= 1e-6);
    }

    #[test]
    fn diagonal_branches() {
        for (base, slope) in [([1.0, 0.0], 1.0), ([0.0, 1.0], 2.0)] {
            let chart = EigenChart::new(
                MatrixFamily {
                    coeffs: vec![DMatrix::identity(2, 2), mat(2, &[1.0, 0.0, 0.0, 2.0])],
                },
                1.0,
                DVector::from_row_slice(&base),
            )
            .unwrap();
            let b = solve_branch(&chart.problem("diag"), &default_grid()).unwrap();
            for s in eigen_samples(&chart, &b) {
                assert!((s.lambda - (1.0 + slope * s.t)).abs() <= 1e-10, "t = {}", s.t);
            }
            assert!(b.residuals.iter().all(|&r| r <= 1e-10));
        }
    }

    #[test]
    fn offdiagonal_branch_is_exact() {
        let ex = example("dift.matrix_family_2x2_offdiag").unwrap();
        let b = solve_branch(&ex.problem, &ex.t_grid).unwrap();
        for s in eigen_samples(ex.chart.as_ref().unwrap(), &b) {
            assert!((s.lambda - (1.0 + s.t)).abs() <= 1e-10);
        }
    }

    #[test]
    fn three_by_three_matches_dense_solver() {
        let family = matrix_family_3x3();
        for dir in pencil_directions(&family, 1.0).unwrap() {
            let chart = EigenChart::new(family.clone(), 1.0, dir).unwrap();
            let b = solve_branch(&chart.problem("3x3"), &default_grid()).unwrap();
            assert!(b.tangency <= 1e-6);
            for s in eigen_samples(&chart, &b) {
                let ev = dense_eigenvalues(&family.at(s.t));
                let d = ev.iter().map(|e| (e - s.lambda).abs()).fold(f64::INFINITY, f64::min);
                assert!(d <= 1e-9, "t = {}: distance {d:e}", s.t);
            }
            // slope agrees with the negated pencil root of the branch direction
            let roots = chart.pencil().unwrap();
            let slope = b.x1_prime0[0];
            let nearest = roots.roots.iter().map(|m| (slope + m).abs()).fold(f64::INFINITY, f64::min);
            assert!(nearest <= 1e-9, "slope {slope} vs roots {:?}", roots.roots);
        }
    }
}
