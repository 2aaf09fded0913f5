//! Lowest generalized eigenpairs `K u = lambda M u` by block shift-invert
//! Lanczos with full `M`-reorthogonalization and Rayleigh-Ritz extraction.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sparse::{SparseCholesky, SparseSym};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigOptions {
    pub shift: f64,
    pub block_size: usize,
    pub max_basis: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for EigOptions {
    fn default() -> Self {
        Self {
            shift: 0.0,
            block_size: 4,
            max_basis: 400,
            tol: 1e-10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigResult {
    pub values: Vec<f64>,
    /// `M`-orthonormal eigenvectors over the free unknowns.
    pub vectors: Vec<Vec<f64>>,
    /// `|K u - lambda M u| / |M u|`.
    pub residuals: Vec<f64>,
    /// Largest entry of `U^T M U - I`.
    pub orthogonality: f64,
    pub basis_size: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Basis<'a> {
    m: &'a SparseSym,
    v: Vec<Vec<f64>>,
    mv: Vec<Vec<f64>>,
}

impl Basis<'_> {
    /// Orthogonalizes `w` against the basis (twice) and normalizes it in
    /// the `M` norm. Returns false if `w` is numerically in the span.
    fn push(&mut self, mut w: Vec<f64>) -> bool {
        let scale0 = self.m.inner(&w, &w).sqrt();
        if scale0 == 0.0 || !scale0.is_finite() {
            return false;
        }
        for _ in 0..2 {
            for (v, mv) in self.v.iter().zip(&self.mv) {
                let c = dot(&w, mv);
                w.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
            }
        }
        let mw = self.m.mul_vec(&w);
        let nrm = dot(&w, &mw).sqrt();
        if !(nrm > 1e-10 * scale0) {
            return false;
        }
        self.v.push(w.into_iter().map(|x| x / nrm).collect());
        self.mv.push(mw.into_iter().map(|x| x / nrm).collect());
        true
    }
}

/// The `count` smallest eigenpairs of `K u = lambda M u`, with `shift` below
/// the smallest eigenvalue.
pub fn lowest_eigs(k: &SparseSym, m: &SparseSym, count: usize, opts: EigOptions) -> Result<EigResult> {
    let n = k.n;
    if count == 0 || count > n {
        return Err(Error::InvalidInput(format!("asked for {count} eigenpairs of a size-{n} problem")));
    }
    let op = if opts.shift == 0.0 {
        SparseCholesky::factor(k)?
    } else {
        SparseCholesky::factor(&k.combine(1.0, m, -opts.shift))?
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut basis = Basis {
        m,
        v: Vec::new(),
        mv: Vec::new(),
    };
    let p = opts.block_size.max(1);
    let max_basis = opts.max_basis.min(n);
    let mut block: Vec<usize> = Vec::new();
    while block.len() < p.min(n) {
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // smooth the random start once so it is not dominated by mesh noise
        let w = op.solve(&m.mul_vec(&w));
        if basis.push(w) {
            block.push(basis.v.len() - 1);
        }
    }
    let mut kv: Vec<Vec<f64>> = Vec::new();
    // lower triangles of the projected stiffness and mass matrices
    let mut kp: Vec<Vec<f64>> = Vec::new();
    let mut mp: Vec<Vec<f64>> = Vec::new();
    loop {
        while kv.len() < basis.v.len() {
            let i = kv.len();
            kv.push(k.mul_vec(&basis.v[i]));
            kp.push((0..=i).map(|j| 0.5 * (dot(&basis.v[i], &kv[j]) + dot(&basis.v[j], &kv[i]))).collect());
            mp.push((0..=i).map(|j| 0.5 * (dot(&basis.v[i], &basis.mv[j]) + dot(&basis.v[j], &basis.mv[i]))).collect());
        }
        let size = basis.v.len();
        if size >= count + p || size >= max_basis {
            if let Some(res) = rayleigh_ritz(&basis, &kv, &kp, &mp, count, opts.tol)? {
                return Ok(res);
            }
            if size >= max_basis {
                return Err(Error::NoConvergence(format!(
                    "eigensolver did not reach residual {:.1e} with {size} basis vectors",
                    opts.tol
                )));
            }
        }
        let mut next = Vec::with_capacity(p);
        for &j in &block {
            let w = op.solve(&basis.mv[j]);
            if basis.v.len() < max_basis && basis.push(w) {
                next.push(basis.v.len() - 1);
            }
        }
        while next.len() < p && basis.v.len() < max_basis {
            let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if basis.push(op.solve(&m.mul_vec(&w))) {
                next.push(basis.v.len() - 1);
            }
        }
        if next.is_empty() {
            return Err(Error::NoConvergence("Krylov basis stopped growing".into()));
        }
        block = next;
    }
}

fn rayleigh_ritz(
    basis: &Basis,
    kv: &[Vec<f64>],
    kp_rows: &[Vec<f64>],
    mp_rows: &[Vec<f64>],
    count: usize,
    tol: f64,
) -> Result<Option<EigResult>> {
    let s = basis.v.len();
    let full = |rows: &[Vec<f64>]| DMatrix::from_fn(s, s, |i, j| if j <= i { rows[i][j] } else { rows[j][i] });
    let kp = full(kp_rows);
    let mp = full(mp_rows);
    let chol = mp
        .cholesky()
        .ok_or_else(|| Error::Factorization("projected mass matrix lost definiteness".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Factorization("projected mass factor is singular".into()))?;
    let c = &linv * &kp * linv.transpose();
    let c = 0.5 * (&c + c.transpose());
    let eig = c.symmetric_eigen();
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let n = basis.v[0].len();
    let mut values = Vec::with_capacity(count);
    let mut vectors = Vec::with_capacity(count);
    let mut mvecs = Vec::with_capacity(count);
    let mut residuals = Vec::with_capacity(count);
    for &o in order.iter().take(count) {
        let theta = eig.eigenvalues[o];
        let y = linv.transpose() * eig.eigenvectors.column(o);
        let mut u = vec![0.0; n];
        let mut ku = vec![0.0; n];
        let mut mu = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            for r in 0..n {
                u[r] += yj * basis.v[j][r];
                ku[r] += yj * kv[j][r];
                mu[r] += yj * basis.mv[j][r];
            }
        }
        let res: Vec<f64> = ku.iter().zip(&mu).map(|(a, b)| a - theta * b).collect();
        let rel = norm(&res) / norm(&mu);
        if !(rel <= tol) {
            return Ok(None);
        }
        values.push(theta);
        vectors.push(u);
        mvecs.push(mu);
        residuals.push(rel);
    }
    let mut orthogonality = 0.0f64;
    for i in 0..count {
        for j in 0..count {
            let g = dot(&vectors[i], &mvecs[j]);
            let e = if i == j { 1.0 } else { 0.0 };
            orthogonality = orthogonality.max((g - e).abs());
        }
    }
    Ok(Some(EigResult {
        values,
        vectors,
        residuals,
        orthogonality,
        basis_size: s,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble::assemble;
    use crate::fem::mesh::mesh_domain;
    use crate::geometry::{DomainSpec, FamilyKind, PerturbFamily};

    fn identity() -> PerturbFamily {
        PerturbFamily::new(FamilyKind::Identity)
    }

    #[test]
    fn diagonal_pencil() {
        let n = 50;
        let k = SparseSym::from_triplets(n, (0..n).map(|i| (i, i, (i + 1) as f64)).collect());
        let m = SparseSym::from_triplets(n, (0..n).map(|i| (i, i, 1.0)).collect());
        let r = lowest_eigs(&k, &m, 5, EigOptions::default()).unwrap();
        for (i, v) in r.values.iter().enumerate() {
            assert!((v - (i + 1) as f64).abs() < 1e-10);
        }
    }

    #[test]
    fn square_spectrum_and_contract() {
        let mesh = mesh_domain(&DomainSpec::Square, 16).unwrap();
        let s = assemble(&mesh, &identity(), 0.0).unwrap();
        let r = lowest_eigs(&s.k, &s.m, 6, EigOptions::default()).unwrap();
        let exact = [2.0, 5.0, 5.0, 8.0, 10.0, 10.0];
        for (v, e) in r.values.iter().zip(exact) {
            assert!(*v >= e - 1e-12, "upper bound violated: {v} < {e}");
            assert!((v - e) / e < 0.05);
        }
        assert!(r.residuals.iter().all(|&x| x <= 1e-8));
        assert!(r.orthogonality <= 1e-8);
        // the mesh is symmetric under x <-> y, so the pairs stay degenerate
        assert!((r.values[1] - r.values[2]).abs() < 1e-9);
    }

    #[test]
    fn shifted_solve_matches_unshifted() {
        let mesh = mesh_domain(&DomainSpec::UnitDisk, 8).unwrap();
        let s = assemble(&mesh, &identity(), 0.0).unwrap();
        let a = lowest_eigs(&s.k, &s.m, 4, EigOptions::default()).unwrap();
        let b = lowest_eigs(&s.k, &s.m, 4, EigOptions { shift: 2.0, seed: 3, ..EigOptions::default() }).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-9 * x);
        }
    }

    #[test]
    fn rejects_bad_requests() {
        let k = SparseSym::from_triplets(3, (0..3).map(|i| (i, i, 1.0)).collect());
        assert!(lowest_eigs(&k, &k, 0, EigOptions::default()).is_err());
        assert!(lowest_eigs(&k, &k, 4, EigOptions::default()).is_err());
        let neg = SparseSym::from_triplets(3, (0..3).map(|i| (i, i, -1.0)).collect());
        assert!(matches!(lowest_eigs(&neg, &k, 1, EigOptions::default()), Err(Error::Factorization(_))));
    }
}
