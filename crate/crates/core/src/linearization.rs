//! Linearized and adjoint flows along a recorded kick interval and the
//! observability Gramian
//!
//! ```text
//! G_ab = ∫₀¹ ⟨P_𝓗 R(1,t)* e_a, P_𝓗 R(1,t)* e_b⟩ dt
//! ```
//!
//! over the leading `M` orthonormal modes `e_a`. Each column needs one
//! adjoint sweep; the projections are collected at the quadrature times and
//! integrated by the trapezoidal rule.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::basis::ModeBasis;
use crate::error::{config_err, Error, Result};
use crate::field::{spectral_dot, Field};
use crate::pde::{AdjointPath, DenseSegment, Solver, Trajectory};
use crate::report::{fmt_num, CsvTable};

/// Quadrature refinement changing an entry by more than this raises the flag.
pub const REFINEMENT_TOL: f64 = 1e-6;
/// Default relative threshold of [`kernel_test`].
pub const KERNEL_TOL: f64 = 1e-10;

/// `R(1, 0) v₀` along the first interval of a dense trajectory.
pub fn tangent_solve(solver: &Solver, traj: &Trajectory, v0: &Field) -> Result<Field> {
    solver.tangent_solve(traj, v0)
}

/// `t ↦ R(1, t)* w₁` along the first interval of a dense trajectory.
pub fn adjoint_solve(solver: &Solver, traj: &Trajectory, w1: &Field, stride: usize) -> Result<AdjointPath> {
    solver.adjoint_solve(traj, w1, stride)
}

/// Truncated observability Gramian with its spectrum.
#[derive(Clone, Debug)]
pub struct GramianMatrix {
    pub matrix: DMatrix<f64>,
    /// Eigenvalues ascending.
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors (columns) matching `eigenvalues`, in mode coordinates.
    pub eigenvectors: DMatrix<f64>,
    pub basis: ModeBasis,
    pub quadrature_points: usize,
    /// Largest entry change when the quadrature is refined or coarsened by 2.
    pub refinement_change: f64,
    /// `λ_min` of the Gramian at the other quadrature resolution.
    pub lambda_min_other: f64,
    pub fingerprint: u64,
}

impl GramianMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues.last().expect("nonempty Gramian")
    }

    /// True when quadrature refinement moved some entry by more than
    /// [`REFINEMENT_TOL`].
    pub fn quadrature_flag(&self) -> bool {
        self.refinement_change > REFINEMENT_TOL
    }

    pub fn symmetry_defect(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }

    /// `vᵀ G v / vᵀ v` for mode coordinates `v`.
    pub fn rayleigh_quotient(&self, v: &[f64]) -> f64 {
        let x = nalgebra::DVector::from_column_slice(v);
        (x.transpose() * &self.matrix * &x)[(0, 0)] / x.norm_squared()
    }

    pub fn to_csv(&self) -> CsvTable {
        let m = self.dim();
        let mut t = CsvTable::new((0..m).map(|j| format!("g_{j}")));
        for i in 0..m {
            t.row((0..m).map(|j| fmt_num(self.matrix[(i, j)])));
        }
        t
    }

    pub fn summary_csv(&self, noise_seed: u64) -> CsvTable {
        let mut t = CsvTable::new(["M", "lambda_min", "lambda_max", "quadrature_points", "noise_seed", "refinement_change"]);
        t.row([
            self.dim().to_string(),
            fmt_num(self.lambda_min()),
            fmt_num(self.lambda_max()),
            self.quadrature_points.to_string(),
            noise_seed.to_string(),
            fmt_num(self.refinement_change),
        ]);
        t
    }
}

fn trapezoid(m: usize, proj: usize, columns: &[Vec<(f64, Vec<f64>)>]) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(m, m);
    let nt = columns[0].len();
    for s in 0..nt {
        let w = if s == 0 {
            0.5 * (columns[0][1].0 - columns[0][0].0)
        } else if s == nt - 1 {
            0.5 * (columns[0][s].0 - columns[0][s - 1].0)
        } else {
            0.5 * (columns[0][s + 1].0 - columns[0][s - 1].0)
        };
        for a in 0..m {
            for b in a..m {
                let mut dot = 0.0;
                for i in 0..proj {
                    dot += columns[a][s].1[i] * columns[b][s].1[i];
                }
                g[(a, b)] += w * dot;
            }
        }
    }
    for a in 0..m {
        for b in 0..a {
            g[(a, b)] = g[(b, a)];
        }
    }
    g
}

fn fingerprint(seg_start: &Field) -> u64 {
    // FNV-1a over the bits of the initial state
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in seg_start.values() {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

/// Gramian over the leading `m` modes along a recorded unit interval that
/// starts at `start`. The solver's control basis is `𝓗`. `quadrature_points`
/// must divide the steps per unit.
pub fn gramian(
    solver: &Solver,
    seg: &DenseSegment,
    start: &Field,
    m: usize,
    quadrature_points: usize,
) -> Result<GramianMatrix> {
    let control = solver
        .controls()
        .ok_or_else(|| config_err("the Gramian needs a solver with a control basis"))?;
    if m < control.len() {
        return Err(config_err(format!("truncation M = {m} is below dim 𝓗 = {}", control.len())));
    }
    let steps = solver.steps_per_unit();
    if quadrature_points == 0 || steps % quadrature_points != 0 {
        return Err(config_err(format!(
            "quadrature points per unit ({quadrature_points}) must divide the {steps} steps per unit"
        )));
    }
    if seg.steps() != steps {
        return Err(Error::Precondition("dense segment does not match the solver".into()));
    }
    let stride = steps / quadrature_points;
    // the other resolution: refine when possible, otherwise coarsen
    let (fine_stride, alt_is_finer) = if stride % 2 == 0 {
        (stride / 2, true)
    } else {
        (stride, false)
    };
    let basis = ModeBasis::leading(*solver.grid(), m)?;
    let vol = solver.grid().volume();
    let tau = solver.step_size();
    let proj = control.len();
    let columns: Vec<Vec<(f64, Vec<f64>)>> = (0..m)
        .into_par_iter()
        .map(|a| {
            let mut lam: Vec<Complex64> = basis.spectrum(a).to_vec();
            let mut ws = solver.workspace();
            let project = |l: &[Complex64]| -> Vec<f64> {
                (0..proj).map(|i| vol * spectral_dot(control.spectrum(i), l)).collect()
            };
            let mut out = vec![(1.0, project(&lam))];
            solver.adjoint_sweep(seg, &mut lam, &mut ws, |n, l, _, _| {
                if n % fine_stride == 0 {
                    out.push((n as f64 * tau, project(l)));
                }
            });
            out.reverse();
            out
        })
        .collect();
    let pick = |every: usize| -> Vec<Vec<(f64, Vec<f64>)>> {
        columns
            .iter()
            .map(|c| c.iter().enumerate().filter(|(i, _)| i % every == 0).map(|(_, s)| s.clone()).collect())
            .collect()
    };
    let (main_cols, alt_cols) = if alt_is_finer {
        (pick(2), columns.clone())
    } else {
        let coarse_ok = (columns[0].len() - 1) % 2 == 0;
        (columns.clone(), if coarse_ok { pick(2) } else { columns.clone() })
    };
    let g = trapezoid(m, proj, &main_cols);
    let g_alt = trapezoid(m, proj, &alt_cols);
    let refinement_change = (&g - &g_alt).amax();
    let (eigenvalues, eigenvectors) = sorted_eigen(&g);
    let lambda_min_other = sorted_eigen(&g_alt).0[0];
    Ok(GramianMatrix {
        matrix: g,
        eigenvalues,
        eigenvectors,
        basis,
        quadrature_points,
        refinement_change,
        lambda_min_other,
        fingerprint: fingerprint(start),
    })
}

fn sorted_eigen(g: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(g.clone());
    let mut order: Vec<usize> = (0..g.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(g.nrows(), g.nrows(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Gramian along the first interval of a dense trajectory.
pub fn gramian_of(solver: &Solver, traj: &Trajectory, m: usize, quadrature_points: usize) -> Result<GramianMatrix> {
    let seg = traj
        .dense(0)
        .ok_or_else(|| Error::Precondition("trajectory was recorded without dense storage".into()))?;
    gramian(solver, seg, traj.initial(), m, quadrature_points)
}

/// Outcome of [`kernel_test`].
#[derive(Clone, Debug)]
pub enum KernelVerdict {
    Trivial { ratio: f64 },
    NearSingular { ratio: f64, direction: Field },
}

impl KernelVerdict {
    pub fn is_trivial(&self) -> bool {
        matches!(self, Self::Trivial { .. })
    }

    pub fn ratio(&self) -> f64 {
        match self {
            Self::Trivial { ratio } | Self::NearSingular { ratio, .. } => *ratio,
        }
    }
}

/// Trivial kernel iff `λ_min > tol · λ_max`; otherwise the eigenvector of
/// `λ_min` as a field.
pub fn kernel_test(g: &GramianMatrix, tol: f64) -> KernelVerdict {
    let (lmin, lmax) = (g.lambda_min(), g.lambda_max());
    let ratio = if lmax > 0.0 { lmin / lmax } else { 0.0 };
    if lmax > 0.0 && lmin > tol * lmax {
        KernelVerdict::Trivial { ratio }
    } else {
        let v: Vec<f64> = g.eigenvectors.column(0).iter().copied().collect();
        KernelVerdict::NearSingular { ratio, direction: g.basis.synthesize(&v) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Polynomial, TorusGrid};
    use crate::pde::PdeConfig;

    fn heat_solver(nu: f64, h_modes: usize) -> Solver {
        let g = TorusGrid::new(1, 16).unwrap();
        let cfg = PdeConfig::new(g, nu, Polynomial::zero(), Field::zeros(g), 1e-2).unwrap();
        Solver::new(cfg).unwrap().with_controls(ModeBasis::leading(g, h_modes).unwrap()).unwrap()
    }

    #[test]
    fn frozen_linear_gramian_is_diagonal() {
        let s = heat_solver(0.5, 3);
        let u0 = Field::zeros(*s.grid());
        let (_, seg) = s.map_dense(&u0, None).unwrap();
        let g = gramian(&s, &seg, &u0, 5, 100).unwrap();
        for a in 0..5 {
            let k2: f64 = [0.0, 1.0, 1.0, 4.0, 4.0][a];
            let expect: f64 = if a < 3 {
                if k2 == 0.0 { 1.0 } else { (1.0 - (-2.0 * 0.5 * k2).exp()) / (2.0 * 0.5 * k2) }
            } else {
                0.0
            };
            assert!((g.matrix[(a, a)] - expect).abs() < 1e-4, "{a}: {}", g.matrix[(a, a)]);
        }
        assert!(g.symmetry_defect() < 1e-12);
        assert!(!kernel_test(&g, KERNEL_TOL).is_trivial());
    }

    #[test]
    fn rejects_bad_truncation_and_quadrature() {
        let s = heat_solver(0.5, 3);
        let u0 = Field::zeros(*s.grid());
        let (_, seg) = s.map_dense(&u0, None).unwrap();
        assert!(gramian(&s, &seg, &u0, 2, 100).is_err());
        assert!(gramian(&s, &seg, &u0, 3, 7).is_err());
    }

    #[test]
    fn one_by_one_positive_is_trivial() {
        let s = heat_solver(0.5, 1);
        let u0 = Field::zeros(*s.grid());
        let (_, seg) = s.map_dense(&u0, None).unwrap();
        let g = gramian(&s, &seg, &u0, 1, 50).unwrap();
        assert!((g.matrix[(0, 0)] - 1.0).abs() < 1e-12);
        assert!(kernel_test(&g, KERNEL_TOL).is_trivial());
    }
}
