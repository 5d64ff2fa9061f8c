//! Small dense linear-algebra routines over `ndarray`: LU inversion with
//! partial pivoting, random orthogonal matrices and the cyclic Jacobi
//! eigensolver for symmetric matrices.

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l2_norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// y = M x
pub fn mat_vec(m: ArrayView2<f64>, x: &[f64]) -> Vec<f64> {
    m.rows().into_iter().map(|row| dot(row.as_slice().unwrap(), x)).collect()
}

/// y = Mᵀ x
pub fn mat_t_vec(m: ArrayView2<f64>, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; m.ncols()];
    for (row, &xi) in m.rows().into_iter().zip(x) {
        for (yj, &mij) in y.iter_mut().zip(row.iter()) {
            *yj += mij * xi;
        }
    }
    y
}

/// LU factorization `P A = L U` with partial pivoting, packed in one matrix.
#[derive(Debug, Clone)]
pub struct Lu {
    packed: Array2<f64>,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    pub fn factor(a: ArrayView2<f64>) -> Result<Lu> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "LU needs a square matrix");
        let mut lu = a.to_owned();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let tiny = scale * f64::EPSILON * n as f64;
        for col in 0..n {
            let (pivot, pmax) = (col..n)
                .map(|r| (r, lu[[r, col]].abs()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax <= tiny || pmax == 0.0 {
                return Err(Error::SingularMatrix {
                    condition: f64::INFINITY,
                });
            }
            if pivot != col {
                for j in 0..n {
                    lu.swap([pivot, j], [col, j]);
                }
                perm.swap(pivot, col);
                sign = -sign;
            }
            let d = lu[[col, col]];
            for r in col + 1..n {
                let f = lu[[r, col]] / d;
                lu[[r, col]] = f;
                if f != 0.0 {
                    for j in col + 1..n {
                        lu[[r, j]] -= f * lu[[col, j]];
                    }
                }
            }
        }
        Ok(Lu {
            packed: lu,
            perm,
            sign,
        })
    }

    pub fn det(&self) -> f64 {
        self.sign * self.packed.diag().iter().product::<f64>()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.packed[[i, j]] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.packed[[i, j]] * x[j];
            }
            x[i] = s / self.packed[[i, i]];
        }
        x
    }

    pub fn inverse(&self) -> Array2<f64> {
        let n = self.perm.len();
        let mut inv = Array2::zeros((n, n));
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[[i, j]] = col[i];
            }
        }
        inv
    }
}

fn one_norm(a: ArrayView2<f64>) -> f64 {
    a.columns()
        .into_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse of a square matrix together with its 1-norm condition number.
pub fn invert(a: ArrayView2<f64>) -> Result<(Array2<f64>, f64)> {
    let lu = Lu::factor(a)?;
    let inv = lu.inverse();
    let cond = one_norm(a) * one_norm(inv.view());
    if !cond.is_finite() || cond > 1.0 / f64::EPSILON {
        return Err(Error::SingularMatrix { condition: cond });
    }
    Ok((inv, cond))
}

pub fn condition_number(a: ArrayView2<f64>) -> f64 {
    match invert(a) {
        Ok((_, c)) => c,
        Err(Error::SingularMatrix { condition }) => condition,
        Err(_) => f64::INFINITY,
    }
}

/// Draws a uniformly distributed point on the unit sphere in `k` dimensions.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let n = l2_norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Random orthogonal matrix: the Q factor of a Gaussian matrix, computed by
/// modified Gram-Schmidt with reorthogonalization. Gram-Schmidt yields
/// diag(R) > 0, so Q is Haar-distributed.
pub fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Array2<f64> {
    loop {
        let g = Array2::from_shape_simple_fn((k, k), || rng.sample::<f64, _>(StandardNormal));
        if let Some(q) = orthonormalize_columns(g.view()) {
            return q;
        }
    }
}

fn orthonormalize_columns(a: ArrayView2<f64>) -> Option<Array2<f64>> {
    let k = a.ncols();
    let mut cols: Vec<Array1<f64>> = a.columns().into_iter().map(|c| c.to_owned()).collect();
    for j in 0..k {
        let original_norm = cols[j].dot(&cols[j]).sqrt();
        for _pass in 0..2 {
            for i in 0..j {
                let proj = cols[i].dot(&cols[j]);
                let qi = cols[i].clone();
                cols[j].scaled_add(-proj, &qi);
            }
            let norm = cols[j].dot(&cols[j]).sqrt();
            if norm <= 1e-10 * original_norm.max(1e-300) {
                return None;
            }
            cols[j] /= norm;
        }
    }
    let mut q = Array2::zeros((k, k));
    for (j, c) in cols.iter().enumerate() {
        q.column_mut(j).assign(c);
    }
    Some(q)
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// columns.
pub fn symmetric_eigen(a: ArrayView2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "eigendecomposition needs a square matrix");
    let mut m = a.to_owned();
    let mut v = Array2::<f64>::eye(n);
    let total: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[[i, j]] * m[[i, j]])
            .sum::<f64>()
            .sqrt();
        if off <= f64::EPSILON * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[j, j]].total_cmp(&m[[i, i]]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[[i, i]]).collect();
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        vectors.column_mut(dst).assign(&v.column(src));
    }
    (values, vectors)
}
