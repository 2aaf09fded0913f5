//! Small dense symmetric-definite pencils `det(A - sB) = 0`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 16;
pub const JACOBI_TOL: f64 = 1e-13;
pub const JACOBI_MAX_SWEEPS: usize = 50;
pub const MAX_CONDITION: f64 = 1e8;

/// Roots of `det(A - sB)` in ascending order.
#[derive(Debug, Clone, Serialize)]
pub struct PencilRoots {
    pub roots: Vec<f64>,
    /// `roots[i + 1] - roots[i]`.
    pub gaps: Vec<f64>,
    pub simple: Vec<bool>,
    pub tolerance: f64,
    /// Generalized eigenvectors `w_i` (columns), `B`-orthonormal.
    #[serde(skip)]
    pub vectors: DMatrix<f64>,
}

impl PencilRoots {
    pub fn dim(&self) -> usize {
        self.roots.len()
    }
}

/// Gap threshold below which two roots count as one multiple root.
pub fn simplicity_tolerance(roots: &[f64]) -> f64 {
    let radius = roots.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    (1e-6 * radius).max(1e-8)
}

fn check_square(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<usize> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "pencil matrices must be square and equal-sized, got {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidInput("empty pencil".into()));
    }
    if n > MAX_DIM {
        return Err(Error::DimensionOverflow { got: n, max: MAX_DIM });
    }
    Ok(n)
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = b.nrows();
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = b[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d.is_nan() || d <= 0.0 {
            return Err(Error::NotPositiveDefinite(format!("pivot {j} is {d:.3e}")));
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = b[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// `L^{-1} X` for lower-triangular `L`.
fn forward_solve(l: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut y = x.clone();
    for c in 0..x.ncols() {
        for i in 0..n {
            let mut s = y[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * y[(k, c)];
            }
            y[(i, c)] = s / l[(i, i)];
        }
    }
    y
}

/// `L^{-T} X` for lower-triangular `L`.
fn backward_solve_transpose(l: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut y = x.clone();
    for c in 0..x.ncols() {
        for i in (0..n).rev() {
            let mut s = y[(i, c)];
            for k in i + 1..n {
                s -= l[(k, i)] * y[(k, c)];
            }
            y[(i, c)] = s / l[(i, i)];
        }
    }
    y
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi eigensolver for a symmetric matrix. Returns eigenvalues
/// (unsorted, diagonal order) and the orthogonal eigenvector matrix.
pub fn jacobi_eigen(c: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = c.nrows();
    let mut a = c.clone();
    let mut v = DMatrix::identity(n, n);
    let scale = a.norm().max(f64::MIN_POSITIVE);
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&a) <= JACOBI_TOL * scale {
            return Ok(((0..n).map(|i| a[(i, i)]).collect(), v));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = cs * akp - sn * akq;
                    a[(k, q)] = sn * akp + cs * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = cs * apk - sn * aqk;
                    a[(q, k)] = sn * apk + cs * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = cs * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + cs * vkq;
                }
            }
        }
    }
    if off_diagonal_norm(&a) <= JACOBI_TOL * scale {
        return Ok(((0..n).map(|i| a[(i, i)]).collect(), v));
    }
    Err(Error::NoConvergence(format!(
        "Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps"
    )))
}

/// Roots of `det(A - sB)` by Cholesky reduction and cyclic Jacobi.
pub fn generalized_roots(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<PencilRoots> {
    let n = check_square(a, b)?;
    let asym = (a - a.transpose()).amax();
    if asym > 1e-10 * a.amax().max(1.0) {
        return Err(Error::InvalidInput(format!("A is not symmetric (asymmetry {asym:.3e})")));
    }
    let bsym = 0.5 * (b + b.transpose());
    let l = cholesky(&bsym)?;
    let (bvals, _) = jacobi_eigen(&bsym)?;
    let bmax = bvals.iter().cloned().fold(f64::MIN, f64::max);
    let bmin = bvals.iter().cloned().fold(f64::MAX, f64::min);
    let cond = bmax / bmin;
    if !(cond <= MAX_CONDITION) {
        return Err(Error::IllConditioned(cond));
    }
    let asym_part = 0.5 * (a + a.transpose());
    let y = forward_solve(&l, &asym_part);
    let c = forward_solve(&l, &y.transpose());
    let c = 0.5 * (&c + c.transpose());
    let (vals, q) = jacobi_eigen(&c)?;
    let w = backward_solve_transpose(&l, &q);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
    let roots: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &w.column(src));
    }
    let gaps: Vec<f64> = roots.windows(2).map(|p| p[1] - p[0]).collect();
    let tolerance = simplicity_tolerance(&roots);
    let simple = (0..n)
        .map(|i| {
            let left = i == 0 || gaps[i - 1] > tolerance;
            let right = i + 1 == n || gaps[i] > tolerance;
            left && right
        })
        .collect();
    Ok(PencilRoots {
        roots,
        gaps,
        simple,
        tolerance,
        vectors,
    })
}

/// `det(A - sB)` by LU with partial pivoting.
pub fn char_poly_eval(a: &DMatrix<f64>, b: &DMatrix<f64>, s: f64) -> Result<f64> {
    let n = check_square(a, b)?;
    let mut m = a - b * s;
    let mut det = 1.0;
    for k in 0..n {
        let (mut piv, mut best) = (k, m[(k, k)].abs());
        for i in k + 1..n {
            if m[(i, k)].abs() > best {
                piv = i;
                best = m[(i, k)].abs();
            }
        }
        if best == 0.0 {
            return Ok(0.0);
        }
        if piv != k {
            m.swap_rows(piv, k);
            det = -det;
        }
        let d = m[(k, k)];
        det *= d;
        for i in k + 1..n {
            let f = m[(i, k)] / d;
            if f != 0.0 {
                for j in k + 1..n {
                    m[(i, j)] -= f * m[(k, j)];
                }
            }
        }
    }
    Ok(det)
}

/// Largest residual `|(A - mu_i B) w_i| / (|A| + |mu_i| |B|)` over all roots.
pub fn relative_residual(a: &DMatrix<f64>, b: &DMatrix<f64>, r: &PencilRoots) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    (0..r.dim())
        .map(|i| {
            let w = r.vectors.column(i);
            let res = (a * w - b * w * r.roots[i]).norm();
            res / ((na + r.roots[i].abs() * nb) * w.norm()).max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        0.5 * (&m + m.transpose())
    }

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        &m * m.transpose() + DMatrix::identity(n, n) * 0.5
    }

    /// Roots by sign changes of the determinant on a fine grid plus bisection.
    /// Roots are isolated first using the eigenvalue bounds of the pencil;
    /// double roots do not change sign, so instances are kept generic.
    fn bisection_roots(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
        let f = |s: f64| char_poly_eval(a, b, s).unwrap();
        let bound = a.norm() * 4.0 / b.norm().min(1.0) + 10.0;
        let n = 200_000;
        let mut out = Vec::new();
        let mut x0 = -bound;
        let mut f0 = f(x0);
        for i in 1..=n {
            let x1 = -bound + 2.0 * bound * i as f64 / n as f64;
            let f1 = f(x1);
            if f0 == 0.0 {
                out.push(x0);
            } else if f0 * f1 < 0.0 {
                let (mut lo, mut hi, mut flo) = (x0, x1, f0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let fm = f(mid);
                    if fm * flo <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                        flo = fm;
                    }
                    if hi - lo < 1e-15 * (1.0 + lo.abs()) {
                        break;
                    }
                }
                out.push(0.5 * (lo + hi));
            }
            x0 = x1;
            f0 = f1;
        }
        out
    }

    #[test]
    fn diagonal_examples() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let r = generalized_roots(&a, &DMatrix::identity(3, 3)).unwrap();
        assert_eq!(r.roots.len(), 3);
        for (x, e) in r.roots.iter().zip([1.0, 2.0, 3.0]) {
            assert!((x - e).abs() < 1e-14);
        }
        assert!(r.simple.iter().all(|&s| s));

        let b = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0]));
        let r = generalized_roots(&DMatrix::identity(2, 2), &b).unwrap();
        assert!((r.roots[0] - 0.5).abs() < 1e-14 && (r.roots[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn multiple_root_is_flagged() {
        let a = DMatrix::identity(3, 3) * 29.36;
        let r = generalized_roots(&a, &DMatrix::identity(3, 3)).unwrap();
        assert!(r.simple.iter().all(|&s| !s));
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1.0, 4.0]));
        let r = generalized_roots(&a, &DMatrix::identity(3, 3)).unwrap();
        assert_eq!(r.simple, vec![false, false, true]);
    }

    #[test]
    fn rejects_bad_input() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let neg = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0]));
        assert!(matches!(generalized_roots(&i2, &neg), Err(Error::NotPositiveDefinite(_))));
        let bad = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1e-10]));
        assert!(matches!(generalized_roots(&i2, &bad), Err(Error::IllConditioned(_))));
        let big = DMatrix::<f64>::identity(17, 17);
        assert!(matches!(generalized_roots(&big, &big), Err(Error::DimensionOverflow { .. })));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(generalized_roots(&asym, &i2).is_err());
    }

    #[test]
    fn char_poly_examples() {
        let two = DMatrix::from_element(1, 1, 2.0);
        assert_eq!(char_poly_eval(&two, &DMatrix::identity(1, 1), 2.0).unwrap(), 0.0);
        for n in 1..5 {
            let z = DMatrix::zeros(n, n);
            let s = 1.7;
            let v = char_poly_eval(&z, &DMatrix::identity(n, n), s).unwrap();
            assert!((v - (-s).powi(n as i32)).abs() < 1e-12);
        }
        let (a, b, c) = (1.3, -0.4, 2.2);
        let m = DMatrix::from_row_slice(2, 2, &[a, b, b, c]);
        for s in [-1.0, 0.0, 0.5, 3.0] {
            let expect = s * s - (a + c) * s + (a * c - b * b);
            assert!((char_poly_eval(&m, &DMatrix::identity(2, 2), s).unwrap() - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn matches_determinant_bisection() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..30 {
            let n = rng.gen_range(2..=6);
            let a = random_sym(n, &mut rng);
            let b = random_spd(n, &mut rng);
            let r = generalized_roots(&a, &b).unwrap();
            let oracle = bisection_roots(&a, &b);
            assert_eq!(oracle.len(), n);
            for (x, y) in r.roots.iter().zip(&oracle) {
                assert!((x - y).abs() <= 1e-9, "{x} vs {y}");
            }
            assert!(relative_residual(&a, &b, &r) <= 1e-10);
        }
    }

    #[test]
    fn vectors_are_b_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_sym(5, &mut rng);
        let b = random_spd(5, &mut rng);
        let r = generalized_roots(&a, &b).unwrap();
        let g = r.vectors.transpose() * &b * &r.vectors;
        assert!((g - DMatrix::identity(5, 5)).amax() < 1e-10);
    }

    #[test]
    fn jacobi_agrees_with_library_eigensolver() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for n in 1..=16 {
            let a = random_sym(n, &mut rng);
            let (mut vals, _) = jacobi_eigen(&a).unwrap();
            vals.sort_by(f64::total_cmp);
            let mut lib: Vec<f64> = a.clone().symmetric_eigen().eigenvalues.iter().cloned().collect();
            lib.sort_by(f64::total_cmp);
            for (x, y) in vals.iter().zip(&lib) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn congruence_invariance(seed in any::<u64>(), n in 2usize..=6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_sym(n, &mut rng);
            let b = random_spd(n, &mut rng);
            let m = DMatrix::<f64>::from_fn(n, n, |i, j| if i == j { 2.0 } else { 0.0 } + rng.gen_range(-0.5..0.5));
            prop_assume!(m.clone().lu().determinant().abs() > 0.1);
            let r0 = generalized_roots(&a, &b).unwrap();
            let r1 = generalized_roots(&(m.transpose() * &a * &m), &(m.transpose() * &b * &m));
            prop_assume!(r1.is_ok());
            for (x, y) in r0.roots.iter().zip(&r1.unwrap().roots) {
                prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
            }
        }

        #[test]
        fn shift_covariance(seed in any::<u64>(), n in 2usize..=6, c in -5.0f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_sym(n, &mut rng);
            let b = random_spd(n, &mut rng);
            let r0 = generalized_roots(&a, &b).unwrap();
            let r1 = generalized_roots(&(&a + &b * c), &b).unwrap();
            for (x, y) in r0.roots.iter().zip(&r1.roots) {
                prop_assert!((x + c - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }
    }
}
