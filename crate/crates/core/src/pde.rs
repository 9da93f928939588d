//! Pseudo-spectral ETDRK2 solver for `∂_t u − νΔu + f(u) = h + η` on the
//! torus, the kick map `S(u, η)` and its exact discrete linearization.
//!
//! One unit time interval is split into `S = ⌈1/dt⌉` equal steps. A step of
//! length `τ` from `u` reads
//!
//! ```text
//! a   = E u + Φ₁ (N(u) + g₀)
//! u⁺  = a + Φ₂ (N(a) + g₁ − N(u) − g₀)
//! ```
//!
//! with `L = −ν|k|²`, `E = e^{τL}`, `Φ₁ = τ φ₁(τL)`, `Φ₂ = τ φ₂(τL)`,
//! `N(u) = ĥ − P f(u)` and `g₀, g₁` the stage samples of the mode forcing.
//! Kicks are sampled by their exact step average; linear-in-time controls at
//! the step end points, which the scheme integrates exactly.
//!
//! The tangent and adjoint of the kick map are the derivative and transpose
//! of this discrete map (not a discretization of the continuous linearized
//! equations), so duality holds to round-off.

use rustfft::num_complex::Complex64;

use crate::basis::ModeBasis;
use crate::error::{config_err, domain_err, Error, Result};
use crate::field::{Dealias, Field, Polynomial, Spectrum, TorusGrid};
use crate::haar::NoiseKick;

type C = Complex64;
const ZERO: C = C::new(0.0, 0.0);

/// Any state coefficient above this is treated as blow-up.
const BLOWUP_LEVEL: f64 = 1e8;

/// Time-dependent forcing expressed in the coordinates of the control basis.
pub trait ModeForcing: Sync {
    fn modes(&self) -> usize;

    /// Mode coordinates used by the two stages of the step `[t0, t1] ⊂ [0, 1]`.
    fn stage_coords(&self, t0: f64, t1: f64, first: &mut [f64], second: &mut [f64]);
}

impl ModeForcing for NoiseKick {
    fn modes(&self) -> usize {
        NoiseKick::modes(self)
    }

    fn stage_coords(&self, t0: f64, t1: f64, first: &mut [f64], second: &mut [f64]) {
        self.average_into(t0, t1, first);
        second.copy_from_slice(first);
    }
}

/// Parameters of the deterministic part of the equation.
#[derive(Clone, Debug)]
pub struct PdeConfig {
    grid: TorusGrid,
    nu: f64,
    poly: Polynomial,
    h: Field,
    dt: f64,
}

impl PdeConfig {
    pub fn new(grid: TorusGrid, nu: f64, poly: Polynomial, h: Field, dt: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(config_err(format!("viscosity must be positive, got {nu}")));
        }
        if !(dt > 0.0 && dt <= 0.1) {
            return Err(config_err(format!("time step must lie in (0, 0.1], got {dt}")));
        }
        if *h.grid() != grid {
            return Err(config_err("forcing h lives on a different grid"));
        }
        if !h.is_finite() {
            return Err(config_err("forcing h must be finite"));
        }
        Ok(Self { grid, nu, poly, h: h.band_limited(), dt })
    }

    /// `f = u³ − u`, `h = 0`, `dt = 10⁻³`.
    pub fn allen_cahn(grid: TorusGrid, nu: f64) -> Result<Self> {
        Self::new(grid, nu, Polynomial::allen_cahn(), Field::zeros(grid), 1e-3)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn poly(&self) -> &Polynomial {
        &self.poly
    }

    pub fn h(&self) -> &Field {
        &self.h
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn with_dt(&self, dt: f64) -> Result<Self> {
        Self::new(self.grid, self.nu, self.poly.clone(), self.h.clone(), dt)
    }

    pub fn with_nu(&self, nu: f64) -> Result<Self> {
        Self::new(self.grid, nu, self.poly.clone(), self.h.clone(), self.dt)
    }
}

/// `φ₁(z) = (e^z − 1)/z` and `φ₂(z) = (e^z − 1 − z)/z²`.
fn phi12(z: f64) -> (f64, f64) {
    if z.abs() < 0.1 {
        // Taylor series; 12 terms reach machine precision for |z| < 0.1
        let (mut p1, mut p2) = (0.0, 0.0);
        let mut term = 1.0; // z^m / (m+2)!
        let mut fact1 = 1.0; // z^m / (m+1)!
        for m in 0..12 {
            if m > 0 {
                fact1 *= z / (m as f64 + 1.0);
            }
            term *= if m == 0 { 0.5 } else { z / (m as f64 + 2.0) };
            p1 += fact1;
            p2 += term;
        }
        (p1, p2)
    } else {
        let e = z.exp();
        ((e - 1.0) / z, (e - 1.0 - z) / (z * z))
    }
}

#[derive(Clone, Debug)]
struct EtdCoeffs {
    tau: f64,
    e: Vec<f64>,
    phi1: Vec<f64>,
    phi2: Vec<f64>,
}

impl EtdCoeffs {
    fn new(grid: &TorusGrid, nu: f64, tau: f64) -> Self {
        let n = grid.len();
        let (mut e, mut phi1, mut phi2) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for i in 0..n {
            if grid.in_band(i) {
                let z = -nu * grid.k_squared(i) * tau;
                let (p1, p2) = phi12(z);
                e[i] = z.exp();
                phi1[i] = tau * p1;
                phi2[i] = tau * p2;
            }
        }
        Self { tau, e, phi1, phi2 }
    }
}

/// Scratch buffers for one thread of stepping.
pub(crate) struct Workspace {
    fine: Vec<C>,
    scratch: Vec<C>,
    n0: Vec<C>,
    n1: Vec<C>,
    a: Vec<C>,
    g0: Vec<C>,
    g1: Vec<C>,
    c0: Vec<f64>,
    c1: Vec<f64>,
}

impl Workspace {
    fn new(solver: &Solver) -> Self {
        let len = solver.cfg.grid.len();
        let modes = solver.controls.as_ref().map_or(0, |b| b.len());
        Self {
            fine: vec![ZERO; solver.dealias.fine_len()],
            scratch: vec![ZERO; solver.dealias.scratch_len()],
            n0: vec![ZERO; len],
            n1: vec![ZERO; len],
            a: vec![ZERO; len],
            g0: vec![ZERO; len],
            g1: vec![ZERO; len],
            c0: vec![0.0; modes],
            c1: vec![0.0; modes],
        }
    }
}

/// Linearization data of one unit interval: `f′` of the step states and
/// predictors on the dealiasing grid.
#[derive(Clone, Debug)]
pub struct DenseSegment {
    fprime_u: Vec<Vec<f64>>,
    fprime_a: Vec<Vec<f64>>,
}

impl DenseSegment {
    pub fn steps(&self) -> usize {
        self.fprime_u.len()
    }
}

/// States at integer times of `u_k = S(u_{k−1}, η_k)`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    states: Vec<Field>,
    kicks: Vec<Option<NoiseKick>>,
    dense: Vec<DenseSegment>,
}

impl Trajectory {
    pub fn states(&self) -> &[Field] {
        &self.states
    }

    pub fn initial(&self) -> &Field {
        &self.states[0]
    }

    pub fn last(&self) -> &Field {
        self.states.last().expect("trajectory holds u₀")
    }

    pub fn kicks(&self) -> &[Option<NoiseKick>] {
        &self.kicks
    }

    pub fn len(&self) -> usize {
        self.kicks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kicks.is_empty()
    }

    /// Dense linearization data of interval `[k, k+1]`, when recorded.
    pub fn dense(&self, k: usize) -> Option<&DenseSegment> {
        self.dense.get(k)
    }
}

/// `R*(1, t) w₁` sampled at `times`.
#[derive(Clone, Debug)]
pub struct AdjointPath {
    pub times: Vec<f64>,
    pub states: Vec<Field>,
}

/// Reentrant ETDRK2 integrator for a fixed [`PdeConfig`].
#[derive(Clone)]
pub struct Solver {
    cfg: PdeConfig,
    h_hat: Vec<C>,
    steps: usize,
    coeffs: EtdCoeffs,
    dealias: Dealias,
    controls: Option<ModeBasis>,
}

impl std::fmt::Debug for Solver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Solver")
            .field("cfg", &self.cfg)
            .field("steps", &self.steps)
            .finish_non_exhaustive()
    }
}

impl Solver {
    pub fn new(cfg: PdeConfig) -> Result<Self> {
        let steps = (1.0 / cfg.dt - 1e-9).ceil().max(1.0) as usize;
        let coeffs = EtdCoeffs::new(&cfg.grid, cfg.nu, 1.0 / steps as f64);
        let dealias = Dealias::new(cfg.grid, cfg.poly.degree().max(1))?;
        let h_hat = cfg.h.to_spectrum().band_limited().into_coeffs();
        Ok(Self { cfg, h_hat, steps, coeffs, dealias, controls: None })
    }

    /// Attaches the basis `{φ_i}` that kick and control coordinates refer to.
    pub fn with_controls(mut self, basis: ModeBasis) -> Result<Self> {
        if *basis.grid() != self.cfg.grid {
            return Err(config_err("control basis lives on a different grid"));
        }
        self.controls = Some(basis);
        Ok(self)
    }

    pub fn config(&self) -> &PdeConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.cfg.grid
    }

    pub fn controls(&self) -> Option<&ModeBasis> {
        self.controls.as_ref()
    }

    /// Number of steps per unit interval.
    pub fn steps_per_unit(&self) -> usize {
        self.steps
    }

    /// Actual step length `1/S`.
    pub fn step_size(&self) -> f64 {
        self.coeffs.tau
    }

    pub(crate) fn dealias(&self) -> &Dealias {
        &self.dealias
    }

    pub(crate) fn h_hat(&self) -> &[C] {
        &self.h_hat
    }

    pub(crate) fn workspace(&self) -> Workspace {
        Workspace::new(self)
    }

    pub(crate) fn spectral(&self, u: &Field) -> Result<Vec<C>> {
        if *u.grid() != self.cfg.grid {
            return Err(Error::Shape { expected: self.cfg.grid.len(), got: u.grid().len() });
        }
        if !u.is_finite() {
            return Err(domain_err("state contains non-finite values"));
        }
        Ok(u.to_spectrum().band_limited().into_coeffs())
    }

    pub(crate) fn field(&self, spec: Vec<C>) -> Field {
        Spectrum::new(self.cfg.grid, spec).expect("grid length").to_field()
    }

    fn check_forcing(&self, forcing: Option<&dyn ModeForcing>) -> Result<()> {
        if let Some(f) = forcing {
            match &self.controls {
                None => return Err(config_err("mode forcing given but the solver has no control basis")),
                Some(b) if b.len() != f.modes() => {
                    return Err(Error::Shape { expected: b.len(), got: f.modes() })
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// `out = ĥ − P f(u)`; records `f′(u)` on the fine grid when asked.
    fn nonlinear(&self, u: &[C], out: &mut [C], fine: &mut [C], scratch: &mut Vec<C>, fprime: Option<&mut Vec<f64>>) {
        self.dealias.to_fine(u, fine, scratch);
        let poly = &self.cfg.poly;
        match fprime {
            Some(fp) => {
                fp.clear();
                for c in fine.iter_mut() {
                    fp.push(poly.derivative(c.re));
                    *c = C::new(-poly.eval(c.re), 0.0);
                }
            }
            None => fine.iter_mut().for_each(|c| *c = C::new(-poly.eval(c.re), 0.0)),
        }
        self.dealias.from_fine(fine, out, scratch);
        for (o, h) in out.iter_mut().zip(&self.h_hat) {
            *o += h;
        }
    }

    /// `out = B v = −P(f′ v)` for recorded fine-grid values `fp` of `f′`.
    pub(crate) fn apply_b(&self, fp: &[f64], v: &[C], out: &mut [C], ws: &mut Workspace) {
        self.dealias.to_fine(v, &mut ws.fine, &mut ws.scratch);
        for (c, d) in ws.fine.iter_mut().zip(fp) {
            *c *= -d;
        }
        self.dealias.from_fine(&mut ws.fine, out, &mut ws.scratch);
    }

    fn stage_forcing(&self, forcing: Option<&dyn ModeForcing>, t0: f64, t1: f64, ws: &mut Workspace) -> bool {
        let (Some(f), Some(basis)) = (forcing, self.controls.as_ref()) else {
            return false;
        };
        f.stage_coords(t0, t1, &mut ws.c0, &mut ws.c1);
        ws.g0.iter_mut().for_each(|c| *c = ZERO);
        ws.g1.iter_mut().for_each(|c| *c = ZERO);
        basis.add_synthesis(&ws.c0, &mut ws.g0);
        basis.add_synthesis(&ws.c1, &mut ws.g1);
        true
    }

    #[allow(clippy::too_many_arguments)]
    fn etd_step(
        &self,
        co: &EtdCoeffs,
        u: &mut [C],
        forced: bool,
        ws: &mut Workspace,
        time: f64,
        fp_u: Option<&mut Vec<f64>>,
        fp_a: Option<&mut Vec<f64>>,
    ) -> Result<()> {
        let Workspace { fine, scratch, n0, n1, a, g0, g1, .. } = ws;
        self.nonlinear(u, n0, fine, scratch, fp_u);
        if forced {
            n0.iter_mut().zip(g0.iter()).for_each(|(n, g)| *n += g);
        }
        for i in 0..u.len() {
            a[i] = u[i] * co.e[i] + n0[i] * co.phi1[i];
        }
        self.nonlinear(a, n1, fine, scratch, fp_a);
        if forced {
            n1.iter_mut().zip(g1.iter()).for_each(|(n, g)| *n += g);
        }
        let mut worst = 0.0_f64;
        for i in 0..u.len() {
            u[i] = a[i] + (n1[i] - n0[i]) * co.phi2[i];
            worst = worst.max(u[i].re.abs()).max(u[i].im.abs());
        }
        if !(worst < BLOWUP_LEVEL) {
            return Err(Error::BlowUp { time });
        }
        Ok(())
    }

    /// One ETDRK2 step of length `dt ≤` the configured step, starting at time
    /// `t` of the current unit interval.
    pub fn step(&self, u: &Field, t: f64, dt: f64, forcing: Option<&dyn ModeForcing>) -> Result<Field> {
        if !(dt > 0.0 && dt <= self.cfg.dt * (1.0 + 1e-12)) {
            return Err(domain_err(format!("step {dt} must lie in (0, {}]", self.cfg.dt)));
        }
        if forcing.is_some() && !(t >= 0.0 && t + dt <= 1.0 + 1e-12) {
            return Err(domain_err(format!("forced step [{t}, {}] leaves the unit interval", t + dt)));
        }
        self.check_forcing(forcing)?;
        let co = if (dt - self.coeffs.tau).abs() < 1e-15 {
            self.coeffs.clone()
        } else {
            EtdCoeffs::new(&self.cfg.grid, self.cfg.nu, dt)
        };
        let mut spec = self.spectral(u)?;
        let mut ws = self.workspace();
        let forced = self.stage_forcing(forcing, t, (t + dt).min(1.0), &mut ws);
        self.etd_step(&co, &mut spec, forced, &mut ws, t + dt, None, None)?;
        Ok(self.field(spec))
    }

    /// Advances `u` (spectral) over one unit interval in place.
    pub(crate) fn unit_in_place(
        &self,
        u: &mut [C],
        forcing: Option<&dyn ModeForcing>,
        offset: f64,
        ws: &mut Workspace,
        mut dense: Option<&mut DenseSegment>,
    ) -> Result<()> {
        let tau = self.coeffs.tau;
        for n in 0..self.steps {
            let t0 = n as f64 * tau;
            let t1 = if n + 1 == self.steps { 1.0 } else { (n + 1) as f64 * tau };
            let forced = self.stage_forcing(forcing, t0, t1, ws);
            let (fu, fa) = match dense.as_deref_mut() {
                Some(seg) => {
                    seg.fprime_u.push(Vec::new());
                    seg.fprime_a.push(Vec::new());
                    (seg.fprime_u.last_mut(), seg.fprime_a.last_mut())
                }
                None => (None, None),
            };
            self.etd_step(&self.coeffs, u, forced, ws, offset + t1, fu, fa)?;
        }
        Ok(())
    }

    /// The kick map `S(u, η)`: one unit of time under `h + η`.
    pub fn time_one_map(&self, u: &Field, kick: Option<&NoiseKick>) -> Result<Field> {
        self.map_with(u, kick.map(|k| k as &dyn ModeForcing))
    }

    /// One unit of time under an arbitrary mode forcing.
    pub fn map_with(&self, u: &Field, forcing: Option<&dyn ModeForcing>) -> Result<Field> {
        self.check_forcing(forcing)?;
        let mut spec = self.spectral(u)?;
        let mut ws = self.workspace();
        self.unit_in_place(&mut spec, forcing, 0.0, &mut ws, None)?;
        Ok(self.field(spec))
    }

    /// As [`Solver::map_with`], also recording the linearization data.
    pub fn map_dense(&self, u: &Field, forcing: Option<&dyn ModeForcing>) -> Result<(Field, DenseSegment)> {
        self.check_forcing(forcing)?;
        let mut spec = self.spectral(u)?;
        let mut ws = self.workspace();
        let mut seg = DenseSegment {
            fprime_u: Vec::with_capacity(self.steps),
            fprime_a: Vec::with_capacity(self.steps),
        };
        self.unit_in_place(&mut spec, forcing, 0.0, &mut ws, Some(&mut seg))?;
        Ok((self.field(spec), seg))
    }

    /// Largest `‖S(u, η)‖_{H²}` over the pairs; an empirical regularization
    /// constant `K` is a safety factor times this on a pilot ensemble.
    pub fn max_h2_after_kick(&self, pairs: &[(Field, Option<NoiseKick>)]) -> Result<f64> {
        let mut worst = 0.0_f64;
        for (u, kick) in pairs {
            worst = worst.max(self.time_one_map(u, kick.as_ref())?.norms().h2);
        }
        Ok(worst)
    }

    /// Unforced flow over `horizon` units of time (rounded to whole steps).
    pub fn flow(&self, u: &Field, horizon: f64) -> Result<Field> {
        let mut spec = self.spectral(u)?;
        self.flow_spectral(&mut spec, horizon)?;
        Ok(self.field(spec))
    }

    pub(crate) fn flow_spectral(&self, spec: &mut [C], horizon: f64) -> Result<()> {
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(domain_err(format!("horizon must be finite and non-negative, got {horizon}")));
        }
        let mut ws = self.workspace();
        let total = (horizon * self.steps as f64).round() as usize;
        for n in 0..total {
            self.etd_step(&self.coeffs, spec, false, &mut ws, (n + 1) as f64 * self.coeffs.tau, None, None)?;
        }
        Ok(())
    }

    /// Unforced flow, handing every intermediate state to `visit(step, u)`.
    pub fn flow_observed(&self, u: &Field, steps: usize, mut visit: impl FnMut(usize, &Field)) -> Result<Field> {
        let mut spec = self.spectral(u)?;
        let mut ws = self.workspace();
        for n in 0..steps {
            self.etd_step(&self.coeffs, &mut spec, false, &mut ws, (n + 1) as f64 * self.coeffs.tau, None, None)?;
            visit(n + 1, &self.field(spec.clone()));
        }
        Ok(self.field(spec))
    }

    /// `u_0, …, u_n` with `u_k = S(u_{k−1}, η_k)`; `None` entries are zero kicks.
    pub fn run_trajectory(&self, u0: &Field, kicks: &[Option<NoiseKick>], dense: bool) -> Result<Trajectory> {
        if kicks.is_empty() {
            return Err(domain_err("a trajectory needs at least one kick interval"));
        }
        for k in kicks.iter().flatten() {
            self.check_forcing(Some(k))?;
        }
        let mut ws = self.workspace();
        let mut states = vec![u0.clone()];
        let mut segs = Vec::new();
        for (k, kick) in kicks.iter().enumerate() {
            // restart from grid values so the result equals composed kick maps bitwise
            let mut spec = self.spectral(states.last().expect("nonempty"))?;
            let forcing = kick.as_ref().map(|k| k as &dyn ModeForcing);
            if dense {
                let mut seg = DenseSegment { fprime_u: Vec::new(), fprime_a: Vec::new() };
                self.unit_in_place(&mut spec, forcing, k as f64, &mut ws, Some(&mut seg))?;
                segs.push(seg);
            } else {
                self.unit_in_place(&mut spec, forcing, k as f64, &mut ws, None)?;
            }
            states.push(self.field(spec));
        }
        Ok(Trajectory { states, kicks: kicks.to_vec(), dense: segs })
    }

    fn check_segment(&self, seg: &DenseSegment) -> Result<()> {
        if seg.steps() != self.steps {
            return Err(Error::Precondition(format!(
                "dense segment has {} steps, solver uses {}",
                seg.steps(),
                self.steps
            )));
        }
        Ok(())
    }

    /// `R(1, 0) v₀` along a recorded segment.
    pub fn tangent_segment(&self, seg: &DenseSegment, v0: &Field) -> Result<Field> {
        self.check_segment(seg)?;
        let mut v = self.spectral(v0)?;
        let mut ws = self.workspace();
        let len = v.len();
        let (mut t1, mut da, mut t2) = (vec![ZERO; len], vec![ZERO; len], vec![ZERO; len]);
        let co = &self.coeffs;
        for n in 0..self.steps {
            self.apply_b(&seg.fprime_u[n], &v, &mut t1, &mut ws);
            for i in 0..len {
                da[i] = v[i] * co.e[i] + t1[i] * co.phi1[i];
            }
            self.apply_b(&seg.fprime_a[n], &da, &mut t2, &mut ws);
            for i in 0..len {
                v[i] = da[i] + (t2[i] - t1[i]) * co.phi2[i];
            }
        }
        Ok(self.field(v))
    }

    /// Tangent solve along the first interval of a dense trajectory.
    pub fn tangent_solve(&self, traj: &Trajectory, v0: &Field) -> Result<Field> {
        let seg = traj
            .dense(0)
            .ok_or_else(|| Error::Precondition("trajectory was recorded without dense storage".into()))?;
        self.tangent_segment(seg, v0)
    }

    /// Transposed sweep from the cotangent `lam` of the final state down to
    /// step 0. After each step `n` (from `S−1` to `0`) calls
    /// `visit(n, λ_n, ∂/∂g₀, ∂/∂g₁)`, where `λ_n` is the cotangent of the
    /// state at step `n` and the last two are cotangents of the stage forcings.
    pub(crate) fn adjoint_sweep(
        &self,
        seg: &DenseSegment,
        lam: &mut [C],
        ws: &mut Workspace,
        mut visit: impl FnMut(usize, &[C], &[C], &[C]),
    ) {
        let len = lam.len();
        let co = &self.coeffs;
        let (mut y, mut z, mut cg0, mut tmp) = (vec![ZERO; len], vec![ZERO; len], vec![ZERO; len], vec![ZERO; len]);
        for n in (0..self.steps).rev() {
            for i in 0..len {
                y[i] = lam[i] * co.phi2[i];
            }
            self.apply_b(&seg.fprime_a[n], &y, &mut tmp, ws);
            for i in 0..len {
                z[i] = lam[i] + tmp[i];
                cg0[i] = z[i] * co.phi1[i] - y[i];
            }
            self.apply_b(&seg.fprime_u[n], &cg0, &mut tmp, ws);
            for i in 0..len {
                lam[i] = z[i] * co.e[i] + tmp[i];
            }
            visit(n, lam, &cg0, &y);
        }
    }

    /// `R(1, t)* w₁` at every `stride`-th step time (always including 0 and 1).
    pub fn adjoint_segment(&self, seg: &DenseSegment, w1: &Field, stride: usize) -> Result<AdjointPath> {
        self.check_segment(seg)?;
        let stride = stride.max(1);
        let mut lam = self.spectral(w1)?;
        let mut ws = self.workspace();
        let tau = self.coeffs.tau;
        let mut times = vec![1.0];
        let mut specs = vec![lam.clone()];
        self.adjoint_sweep(seg, &mut lam, &mut ws, |n, l, _, _| {
            if n % stride == 0 {
                times.push(n as f64 * tau);
                specs.push(l.to_vec());
            }
        });
        times.reverse();
        specs.reverse();
        let states = specs.into_iter().map(|s| self.field(s)).collect();
        Ok(AdjointPath { times, states })
    }

    /// Adjoint solve along the first interval of a dense trajectory.
    pub fn adjoint_solve(&self, traj: &Trajectory, w1: &Field, stride: usize) -> Result<AdjointPath> {
        let seg = traj
            .dense(0)
            .ok_or_else(|| Error::Precondition("trajectory was recorded without dense storage".into()))?;
        self.adjoint_segment(seg, w1, stride)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::haar::{HaarPath, ScalarNoiseConfig};

    fn ac(nu: f64, n: usize) -> Solver {
        let g = TorusGrid::new(1, n).unwrap();
        Solver::new(PdeConfig::allen_cahn(g, nu).unwrap()).unwrap()
    }

    #[test]
    fn phi_series_matches_closed_form() {
        for z in [-0.099, -0.05, -1e-6, 0.0, 0.03] {
            let (a, b) = phi12(z);
            if z.abs() > 0.01 {
                let e = z.exp();
                assert!((a - (e - 1.0) / z).abs() < 1e-10);
                assert!((b - (e - 1.0 - z) / (z * z)).abs() < 1e-6);
            }
            if z == 0.0 {
                assert_eq!((a, b), (1.0, 0.5));
            }
        }
        let (a, b) = phi12(-0.1 + 1e-12);
        let (c, d) = phi12(-0.1 - 1e-12);
        assert!((a - c).abs() < 1e-12 && (b - d).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let g = TorusGrid::new(1, 16).unwrap();
        assert!(PdeConfig::new(g, 0.0, Polynomial::allen_cahn(), Field::zeros(g), 1e-3).is_err());
        assert!(PdeConfig::new(g, 1.0, Polynomial::allen_cahn(), Field::zeros(g), 0.2).is_err());
        let g2 = TorusGrid::new(1, 32).unwrap();
        assert!(PdeConfig::new(g, 1.0, Polynomial::allen_cahn(), Field::zeros(g2), 1e-3).is_err());
    }

    #[test]
    fn heat_decay() {
        let g = TorusGrid::new(1, 32).unwrap();
        let cfg = PdeConfig::new(g, 0.5, Polynomial::zero(), Field::zeros(g), 1e-3).unwrap();
        let s = Solver::new(cfg).unwrap();
        let u = Field::from_fn(g, |x| (3.0 * x[0]).cos());
        let out = s.time_one_map(&u, None).unwrap();
        let exact = u.scaled((-4.5f64).exp());
        assert!(out.distance(&exact) / exact.l2_norm() < 1e-10);
    }

    #[test]
    fn equilibria_are_fixed_points() {
        let s = ac(0.5, 32);
        let g = *s.grid();
        for a in [-1.0, 0.0, 1.0] {
            let w = Field::constant(g, a);
            assert!(s.time_one_map(&w, None).unwrap().distance(&w) < 1e-12);
        }
    }

    #[test]
    fn zero_kick_equals_unforced_map() {
        let s = ac(0.5, 16);
        let g = *s.grid();
        let s = s.with_controls(ModeBasis::leading(g, 3).unwrap()).unwrap();
        let cfg = ScalarNoiseConfig::new(1.0, 2.0, 4, crate::haar::XiDensity::Parabolic).unwrap();
        let zero = HaarPath::from_coefficients(cfg, vec![0.0; 16]).unwrap();
        let kick = NoiseKick::new(vec![zero.clone(), zero.clone(), zero], vec![1.0; 3]).unwrap();
        let u = Field::from_fn(g, |x| 0.3 * x[0].sin());
        assert_eq!(s.time_one_map(&u, Some(&kick)).unwrap(), s.time_one_map(&u, None).unwrap());
    }

    #[test]
    fn kick_needs_matching_basis() {
        let s = ac(0.5, 16);
        let cfg = ScalarNoiseConfig::new(1.0, 2.0, 3, crate::haar::XiDensity::Parabolic).unwrap();
        let kick = crate::haar::sample_kick(&cfg, &[1.0], 1).unwrap();
        let u = Field::zeros(*s.grid());
        assert!(s.time_one_map(&u, Some(&kick)).is_err());
        let s = s.with_controls(ModeBasis::leading(*u.grid(), 3).unwrap()).unwrap();
        assert!(matches!(s.time_one_map(&u, Some(&kick)), Err(Error::Shape { .. })));
    }

    #[test]
    fn blow_up_is_reported() {
        let g = TorusGrid::new(1, 16).unwrap();
        // f = −u³ is anti-dissipative: constants blow up in finite time
        let cfg = PdeConfig::new(g, 1.0, Polynomial::general(vec![0.0, 0.0, 0.0, -1.0]).unwrap(), Field::zeros(g), 1e-2)
            .unwrap();
        let s = Solver::new(cfg).unwrap();
        let err = s.flow(&Field::constant(g, 3.0), 5.0).unwrap_err();
        assert!(matches!(err, Error::BlowUp { time } if time > 0.0 && time < 1.0));
        assert!(err.is_numerical());
    }

    #[test]
    fn step_rejects_oversized_dt() {
        let s = ac(1.0, 16);
        let u = Field::zeros(*s.grid());
        assert!(s.step(&u, 0.0, 0.01, None).is_err());
        assert!(s.step(&u, 0.0, 5e-4, None).is_ok());
    }

    #[test]
    fn trajectory_composes_kick_maps() {
        let s = ac(0.5, 16);
        let g = *s.grid();
        let s = s.with_controls(ModeBasis::leading(g, 3).unwrap()).unwrap();
        let cfg = ScalarNoiseConfig::new(1.0, 2.0, 4, crate::haar::XiDensity::Parabolic).unwrap();
        let k1 = crate::haar::sample_kick(&cfg, &[1.0; 3], 1).unwrap();
        let k2 = crate::haar::sample_kick(&cfg, &[1.0; 3], 2).unwrap();
        let u = Field::from_fn(g, |x| 0.2 * x[0].cos());
        let tr = s.run_trajectory(&u, &[Some(k1.clone()), Some(k2.clone())], false).unwrap();
        let direct = s.time_one_map(&s.time_one_map(&u, Some(&k1)).unwrap(), Some(&k2)).unwrap();
        assert_eq!(tr.last(), &direct);
        assert!(s.run_trajectory(&u, &[], false).is_err());
    }

    #[test]
    fn tangent_matches_finite_difference() {
        let s = ac(0.5, 16);
        let g = *s.grid();
        let u = Field::from_fn(g, |x| 0.5 * x[0].cos() + 0.2);
        let v = Field::from_fn(g, |x| (2.0 * x[0]).sin() + 0.3);
        let (_, seg) = s.map_dense(&u, None).unwrap();
        let tv = s.tangent_segment(&seg, &v).unwrap();
        let eps = 1e-6;
        let mut up = u.clone();
        up.axpy(eps, &v);
        let mut um = u.clone();
        um.axpy(-eps, &v);
        let fd = (&s.flow(&up, 1.0).unwrap() - &s.flow(&um, 1.0).unwrap()).scaled(0.5 / eps);
        assert!(tv.distance(&fd) / tv.l2_norm() < 1e-7);
    }

    #[test]
    fn adjoint_is_transpose_of_tangent() {
        let s = ac(0.3, 16);
        let g = *s.grid();
        let u = Field::from_fn(g, |x| 0.8 * x[0].cos() - 0.1 * (3.0 * x[0]).sin());
        let (_, seg) = s.map_dense(&u, None).unwrap();
        let v = Field::from_fn(g, |x| (x[0]).sin() + 0.5 * (2.0 * x[0]).cos());
        let w = Field::from_fn(g, |x| 1.0 - (4.0 * x[0]).cos());
        let lhs = s.tangent_segment(&seg, &v).unwrap().inner(&w);
        let path = s.adjoint_segment(&seg, &w, 10).unwrap();
        assert_eq!(path.times.first(), Some(&0.0));
        assert_eq!(path.times.last(), Some(&1.0));
        let rhs = v.inner(&path.states[0]);
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }
}
