use num_complex::Complex64;

use super::ComplexMatrix;
use crate::error::{Error, Result};

/// Largest matrix dimension accepted by [`complex_svd`].
pub const MAX_SVD_DIM: usize = 8;

const MAX_SWEEPS: usize = 200;
/// A column pair counts as orthogonal once `|a_pᴴa_q| ≤ TOL·‖a_p‖‖a_q‖`.
const ORTHO_TOL: f64 = 1e-14;
/// Columns whose norm falls below this fraction of the largest norm get a
/// completed left singular vector rather than a normalized one.
const RANK_TOL: f64 = 1e-13;

/// `A = U · diag(s) · Vᴴ` with `s` descending, `U` and `V` unitary.
///
/// Phase convention: the largest-magnitude entry of every column of `U` is
/// real and non-negative; the matching column of `V` carries the same phase
/// rotation, so the product is unchanged.
#[derive(Clone, Debug)]
pub struct SvdFactors {
    pub u: ComplexMatrix,
    pub s: Vec<f64>,
    pub v: ComplexMatrix,
}

impl SvdFactors {
    pub fn reconstruct(&self) -> ComplexMatrix {
        self.u
            .matmul(&ComplexMatrix::from_diag(&self.s))
            .and_then(|us| us.matmul(&self.v.adjoint()))
            .expect("square factors")
    }

    /// `s_max / s_min`, infinite when the smallest singular value is zero.
    pub fn condition_number(&self) -> f64 {
        match (self.s.first(), self.s.last()) {
            (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
            _ => f64::INFINITY,
        }
    }
}

fn col_dot(a: &ComplexMatrix, p: usize, q: usize) -> Complex64 {
    (0..a.rows()).map(|i| a[(i, p)].conj() * a[(i, q)]).sum()
}

fn col_norm_sq(a: &ComplexMatrix, p: usize) -> f64 {
    (0..a.rows()).map(|i| a[(i, p)].norm_sqr()).sum()
}

/// Applies `[a_p a_q] ← [a_p a_q] · [[c, s·e], [−s·ē, c]]`.
fn rotate(a: &mut ComplexMatrix, p: usize, q: usize, c: f64, s: f64, e: Complex64) {
    for i in 0..a.rows() {
        let (x, y) = (a[(i, p)], a[(i, q)]);
        a[(i, p)] = x * c - y * e.conj() * s;
        a[(i, q)] = x * e * s + y * c;
    }
}

/// Singular value decomposition of a square complex matrix by one-sided
/// (Hestenes) Jacobi rotations.
pub fn complex_svd(a: &ComplexMatrix) -> Result<SvdFactors> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "SVD expects a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    if n == 0 || n > MAX_SVD_DIM {
        return Err(Error::Dimension(format!(
            "SVD dimension {n} outside 1..={MAX_SVD_DIM}"
        )));
    }
    if !a.is_finite() {
        return Err(Error::Numeric("non-finite entry in SVD input".into()));
    }

    let mut w = a.clone();
    let mut v = ComplexMatrix::identity(n);
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let alpha = col_norm_sq(&w, p);
                let beta = col_norm_sq(&w, q);
                let gamma = col_dot(&w, p, q);
                let g = gamma.norm();
                if g == 0.0 || g <= ORTHO_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let e = gamma / g;
                rotate(&mut w, p, q, c, s, e);
                rotate(&mut v, p, q, c, s, e);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numeric(format!(
            "Jacobi SVD did not converge in {MAX_SWEEPS} sweeps"
        )));
    }

    let norms: Vec<f64> = (0..n).map(|j| col_norm_sq(&w, j).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let s_max = norms[order[0]];

    let mut u = ComplexMatrix::zeros(n, n);
    let mut v_sorted = ComplexMatrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        let sj = norms[src];
        s.push(sj);
        for i in 0..n {
            v_sorted[(i, dst)] = v[(i, src)];
        }
        if sj > 0.0 && sj > RANK_TOL * s_max {
            for i in 0..n {
                u[(i, dst)] = w[(i, src)] / sj;
            }
        } else {
            missing.push(dst);
        }
    }
    complete_basis(&mut u, &missing);

    for j in 0..n {
        let mut best = 0;
        for i in 1..n {
            if u[(i, j)].norm() > u[(best, j)].norm() {
                best = i;
            }
        }
        let z = u[(best, j)];
        if z.norm() == 0.0 {
            continue;
        }
        let phase = (z / z.norm()).conj();
        for i in 0..n {
            u[(i, j)] *= phase;
            v_sorted[(i, j)] *= phase;
        }
        u[(best, j)] = Complex64::new(u[(best, j)].norm(), 0.0);
    }

    Ok(SvdFactors { u, s, v: v_sorted })
}

/// Fills the listed columns of `u` with unit vectors orthogonal to every
/// other column, by Gram-Schmidt on the standard basis.
fn complete_basis(u: &mut ComplexMatrix, missing: &[usize]) {
    let n = u.rows();
    let mut filled: Vec<usize> = (0..n).filter(|j| !missing.contains(j)).collect();
    for &j in missing {
        let mut best: Option<Vec<Complex64>> = None;
        let mut best_norm = 0.0;
        for e in 0..n {
            let mut cand = vec![Complex64::new(0.0, 0.0); n];
            cand[e] = Complex64::new(1.0, 0.0);
            for _ in 0..2 {
                for &f in &filled {
                    let proj: Complex64 = (0..n).map(|i| u[(i, f)].conj() * cand[i]).sum();
                    for (i, c) in cand.iter_mut().enumerate() {
                        *c -= proj * u[(i, f)];
                    }
                }
            }
            let norm = cand.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > best_norm {
                best_norm = norm;
                best = Some(cand);
            }
            if norm > 0.5 {
                break;
            }
        }
        let cand = best.expect("n ≥ 1");
        for i in 0..n {
            u[(i, j)] = cand[i] / best_norm;
        }
        filled.push(j);
    }
}

/// Reciprocals of the singular values above `tol · max(s)`; zero elsewhere.
pub fn pseudo_inverse_diag(s: &[f64], tol: f64) -> Vec<f64> {
    let max = s.iter().cloned().fold(0.0, f64::max);
    s.iter()
        .map(|&x| if max > 0.0 && x > tol * max { 1.0 / x } else { 0.0 })
        .collect()
}
