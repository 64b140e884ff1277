//! Small dense least-squares kernels used by the fitters.

use crate::scalar::Real;

/// Relative norm below which a column counts as linearly dependent on the
/// columns before it.
const RANK_TOL: f64 = 1e-10;

/// Result of a rank-revealing least-squares solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares<T> {
    /// Coefficients in column order; dropped columns are zero.
    pub coef: Vec<T>,
    /// Columns kept in the solve.
    pub active: Vec<bool>,
    pub rss: T,
    /// Upper-triangular factor over the active columns.
    r: Vec<Vec<T>>,
}

impl<T: Real> LeastSquares<T> {
    pub fn rank(&self) -> usize {
        self.r.len()
    }

    /// `(XᵀX)⁻¹` over all columns; rows and columns of dropped columns are
    /// zero.
    pub fn unscaled_covariance(&self) -> Vec<Vec<T>> {
        let k = self.r.len();
        let rinv = invert_upper(&self.r);
        let p = self.active.len();
        let idx: Vec<usize> = (0..p).filter(|&j| self.active[j]).collect();
        let mut out = vec![vec![T::zero(); p]; p];
        for a in 0..k {
            for b in 0..k {
                let mut s = T::zero();
                for m in a.max(b)..k {
                    s = s + rinv[a][m] * rinv[b][m];
                }
                out[idx[a]][idx[b]] = s;
            }
        }
        out
    }
}

fn invert_upper<T: Real>(r: &[Vec<T>]) -> Vec<Vec<T>> {
    let k = r.len();
    let mut inv = vec![vec![T::zero(); k]; k];
    for j in 0..k {
        inv[j][j] = T::one() / r[j][j];
        for i in (0..j).rev() {
            let mut s = T::zero();
            for m in i + 1..=j {
                s = s + r[i][m] * inv[m][j];
            }
            inv[i][j] = -s / r[i][i];
        }
    }
    inv
}

/// Least squares of `y` on the columns of `rows` by Householder QR.
/// Columns are taken in order and any column that is (numerically) a
/// combination of the kept ones is dropped and gets a zero coefficient.
pub fn least_squares<T: Real>(rows: &[Vec<T>], y: &[T]) -> LeastSquares<T> {
    let n = rows.len();
    let p = rows.first().map_or(0, |r| r.len());
    assert_eq!(n, y.len(), "design and response lengths differ");
    // column-major working copy
    let mut a: Vec<Vec<T>> = (0..p).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let mut b = y.to_vec();
    let mut active = vec![false; p];
    let mut kept: Vec<usize> = Vec::new();
    let tol = T::lit(RANK_TOL);

    for j in 0..p {
        let k = kept.len();
        if k >= n {
            break;
        }
        let full = norm(&a[j]);
        let tail = norm(&a[j][k..]);
        if full.is_zero() || tail <= tol * full {
            continue;
        }
        let alpha = if a[j][k] > T::zero() { -tail } else { tail };
        let mut v: Vec<T> = a[j][k..].to_vec();
        v[0] = v[0] - alpha;
        let vv = dot(&v, &v);
        if vv.is_zero() {
            continue;
        }
        let reflect = |col: &mut [T]| {
            let s = dot(&v, &col[k..]);
            let f = (s + s) / vv;
            for (c, vi) in col[k..].iter_mut().zip(&v) {
                *c = *c - f * *vi;
            }
        };
        for col in a.iter_mut().skip(j) {
            reflect(col);
        }
        reflect(&mut b);
        active[j] = true;
        kept.push(j);
    }

    let k = kept.len();
    let r: Vec<Vec<T>> = (0..k)
        .map(|i| (0..k).map(|m| if m >= i { a[kept[m]][i] } else { T::zero() }).collect())
        .collect();
    let mut sol = vec![T::zero(); k];
    for i in (0..k).rev() {
        let mut s = b[i];
        for m in i + 1..k {
            s = s - r[i][m] * sol[m];
        }
        sol[i] = s / r[i][i];
    }
    let mut coef = vec![T::zero(); p];
    for (i, &j) in kept.iter().enumerate() {
        coef[j] = sol[i];
    }
    let rss = b[k..].iter().fold(T::zero(), |acc, &x| acc + x * x);
    LeastSquares { coef, active, rss, r }
}

/// Cholesky factor `L` with `LLᵀ = m`, or `None` when `m` is not
/// numerically positive definite.
pub fn cholesky<T: Real>(m: &[Vec<T>]) -> Option<Vec<Vec<T>>> {
    let n = m.len();
    let mut l = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[i][j];
            for k in 0..j {
                s = s - l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > T::zero()) || !s.is_finite() {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

/// Solves `m·x = rhs` for symmetric positive definite `m`.
pub fn solve_spd<T: Real>(m: &[Vec<T>], rhs: &[T]) -> Option<Vec<T>> {
    let l = cholesky(m)?;
    let n = rhs.len();
    let mut z = vec![T::zero(); n];
    for i in 0..n {
        let mut s = rhs[i];
        for k in 0..i {
            s = s - l[i][k] * z[k];
        }
        z[i] = s / l[i][i];
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..n {
            s = s - l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    Some(x)
}

/// Inverse of a symmetric positive definite matrix.
pub fn inverse_spd<T: Real>(m: &[Vec<T>]) -> Option<Vec<Vec<T>>> {
    let n = m.len();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = vec![T::zero(); n];
        e[j] = T::one();
        cols.push(solve_spd(m, &e)?);
    }
    Some((0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect())
}

/// `JᵀJ` for a row-major Jacobian.
pub fn gram<T: Real>(jac: &[Vec<T>]) -> Vec<Vec<T>> {
    let p = jac.first().map_or(0, |r| r.len());
    let mut g = vec![vec![T::zero(); p]; p];
    for row in jac {
        for i in 0..p {
            for j in 0..=i {
                g[i][j] = g[i][j] + row[i] * row[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            g[j][i] = g[i][j];
        }
    }
    g
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn norm<T: Real>(a: &[T]) -> T {
    // scaled to avoid overflow on large regressors
    let m = a.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()));
    if m.is_zero() {
        return m;
    }
    let s = a.iter().fold(T::zero(), |acc, &x| {
        let y = x / m;
        acc + y * y
    });
    m * s.sqrt()
}
