//! Krylov solvers on spectral vectors of real fields.
//!
//! Vectors are Hermitian coefficient arrays; the inner product is the real
//! Euclidean one `Re Σ conj(a) b`, under which the linearized operators are
//! self-adjoint.

use nalgebra::{DMatrix, SymmetricEigen};
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::spectral_dot;

type C = Complex64;

fn norm(a: &[C]) -> f64 {
    spectral_dot(a, a).sqrt()
}

fn axpy(y: &mut [C], a: f64, x: &[C]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += xi * a;
    }
}

/// Outcome of a [`minres`] solve.
#[derive(Clone, Copy, Debug)]
pub struct MinresInfo {
    pub iterations: usize,
    /// Preconditioned residual estimate relative to the right-hand side.
    pub relative_residual: f64,
}

/// Preconditioned MINRES for a symmetric (possibly indefinite) operator
/// with a symmetric positive definite preconditioner `psolve ≈ A⁻¹`.
pub fn minres(
    mut apply: impl FnMut(&[C], &mut [C]),
    psolve: impl Fn(&[C], &mut [C]),
    b: &[C],
    tol: f64,
    max_iter: usize,
) -> (Vec<C>, MinresInfo) {
    let n = b.len();
    let zero = C::new(0.0, 0.0);
    let mut x = vec![zero; n];
    let mut r1 = b.to_vec();
    let mut y = vec![zero; n];
    psolve(&r1, &mut y);
    let beta1 = spectral_dot(&r1, &y).max(0.0).sqrt();
    if beta1 == 0.0 {
        return (x, MinresInfo { iterations: 0, relative_residual: 0.0 });
    }
    let mut r2 = r1.clone();
    let (mut w, mut w1, mut w2) = (vec![zero; n], vec![zero; n], vec![zero; n]);
    let mut v = vec![zero; n];
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0_f64, 0.0_f64);
    let mut iterations = 0;
    for itn in 1..=max_iter {
        iterations = itn;
        let s = 1.0 / beta;
        for (vi, yi) in v.iter_mut().zip(&y) {
            *vi = yi * s;
        }
        apply(&v, &mut y);
        if itn >= 2 {
            axpy(&mut y, -beta / oldb, &r1);
        }
        let alfa = spectral_dot(&v, &y);
        axpy(&mut y, -alfa / beta, &r2);
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        psolve(&r2, &mut y);
        oldb = beta;
        beta = spectral_dot(&r2, &y).max(0.0).sqrt();
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        std::mem::swap(&mut w1, &mut w2);
        std::mem::swap(&mut w2, &mut w);
        for i in 0..n {
            w[i] = (v[i] - w1[i] * oldeps - w2[i] * delta) / gamma;
        }
        axpy(&mut x, phi, &w);
        if phibar <= tol * beta1 || beta == 0.0 {
            break;
        }
    }
    (x, MinresInfo { iterations, relative_residual: phibar / beta1 })
}

/// Lowest eigenpairs of a symmetric operator.
#[derive(Clone, Debug)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<C>>,
    pub residuals: Vec<f64>,
    /// Size of the final Krylov basis.
    pub basis_size: usize,
}

/// Block Lanczos with full reorthogonalization and Rayleigh–Ritz extraction
/// of the `m` lowest eigenpairs. `dim` is the real dimension of the space;
/// once the basis spans it the result is exact. Breakdowns are refilled with
/// vectors from `random`.
#[allow(clippy::too_many_arguments)]
pub fn lowest_eigenpairs(
    mut apply: impl FnMut(&[C], &mut [C]),
    mut random: impl FnMut() -> Vec<C>,
    dim: usize,
    m: usize,
    block: usize,
    tol: f64,
    max_basis: usize,
) -> Result<EigenPairs> {
    let m = m.min(dim);
    if m == 0 {
        return Ok(EigenPairs { values: vec![], vectors: vec![], residuals: vec![], basis_size: 0 });
    }
    let block = block.max(1);
    let mut q: Vec<Vec<C>> = Vec::new();
    let mut aq: Vec<Vec<C>> = Vec::new();
    let mut t: Vec<Vec<f64>> = Vec::new();
    let mut next: Vec<Vec<C>> = (0..block).map(|_| random()).collect();
    let mut last_residual = f64::INFINITY;
    loop {
        let before = q.len();
        for mut cand in next.drain(..) {
            if q.len() >= dim {
                break;
            }
            let start = norm(&cand);
            if start == 0.0 {
                continue;
            }
            for _ in 0..2 {
                for qi in &q {
                    let c = spectral_dot(qi, &cand);
                    axpy(&mut cand, -c, qi);
                }
            }
            let nn = norm(&cand);
            if nn <= 1e-10 * start {
                continue;
            }
            cand.iter_mut().for_each(|c| *c /= nn);
            let mut out = vec![C::new(0.0, 0.0); cand.len()];
            apply(&cand, &mut out);
            let row: Vec<f64> = aq.iter().map(|a| spectral_dot(&cand, a)).collect();
            for (ti, r) in t.iter_mut().zip(&row) {
                ti.push(*r);
            }
            let mut new_row = row;
            new_row.push(spectral_dot(&cand, &out));
            t.push(new_row);
            q.push(cand);
            aq.push(out);
        }
        let added = q.len() - before;
        let k = q.len();
        if added == 0 && k < dim {
            // breakdown: the Krylov space is invariant, restart from fresh directions
            next = (0..block).map(|_| random()).collect();
            if k > max_basis {
                break;
            }
            continue;
        }
        let mat = DMatrix::from_fn(k, k, |i, j| 0.5 * (t[i][j] + t[j][i]));
        let eig = SymmetricEigen::new(mat);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let take = m.min(k);
        let mut values = Vec::with_capacity(take);
        let mut vectors = Vec::with_capacity(take);
        let mut residuals = Vec::with_capacity(take);
        let len = q[0].len();
        for &idx in order.iter().take(take) {
            let theta = eig.eigenvalues[idx];
            let s = eig.eigenvectors.column(idx);
            let mut y = vec![C::new(0.0, 0.0); len];
            let mut ay = vec![C::new(0.0, 0.0); len];
            for j in 0..k {
                axpy(&mut y, s[j], &q[j]);
                axpy(&mut ay, s[j], &aq[j]);
            }
            axpy(&mut ay, -theta, &y);
            values.push(theta);
            residuals.push(norm(&ay));
            vectors.push(y);
        }
        let scale = values.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
        last_residual = residuals.iter().fold(0.0_f64, |a, r| a.max(*r));
        let done = k >= dim || (take == m && last_residual <= tol * scale);
        if done {
            return Ok(EigenPairs { values, vectors, residuals, basis_size: k });
        }
        if k >= max_basis {
            break;
        }
        next = aq[before..].to_vec();
    }
    Err(Error::NoConvergence { iterations: q.len(), residual: last_residual })
}
