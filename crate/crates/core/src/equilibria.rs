//! Stationary states `−νΔw + f(w) = h`, their stability spectra, the
//! Lyapunov functional `Φ(u) = ∫ ν/2 |∇u|² + F(u) − h u` and basin labels of
//! the unforced flow.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::basis::random_low_mode_field;
use crate::error::{domain_err, Error, Result};
use crate::field::{spectral_dot, Field, TorusGrid};
use crate::haar::mix_seed;
use crate::linalg::{lowest_eigenpairs, minres};
use crate::pde::Solver;
use crate::report::{fmt_num, CsvTable};

type C = Complex64;

/// Newton stopping threshold on the `L²` residual.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Newton keeps polishing below `RESIDUAL_TOL` until this or a stall.
const POLISH_TOL: f64 = 1e-13;
/// Equilibria closer than this in `L²` are merged.
pub const MERGE_TOL: f64 = 1e-6;
/// Eigenvalues above this count as strictly positive.
pub const STABILITY_TOL: f64 = 1e-8;
/// Distance at which a flowed state is labelled with an equilibrium.
pub const BASIN_TOL: f64 = 1e-4;

/// A stationary state with its diagnostics.
#[derive(Clone, Debug)]
pub struct Equilibrium {
    pub state: Field,
    pub residual: f64,
    /// Lowest eigenvalues of `−νΔ + f′(w)`, ascending.
    pub spectrum: Vec<f64>,
    pub lyapunov: f64,
    pub stable: bool,
    pub newton_iterations: usize,
}

impl Equilibrium {
    pub fn min_eigenvalue(&self) -> f64 {
        self.spectrum.first().copied().unwrap_or(f64::NAN)
    }
}

/// `−νΔu + f(u) − h` in spectral form; also the `L²` gradient of `Φ`.
fn residual_spec(solver: &Solver, u: &[C]) -> Vec<C> {
    let grid = solver.grid();
    let nu = solver.config().nu();
    let poly = solver.config().poly();
    let fu = solver.dealias().apply(u, |x| poly.eval(x));
    u.iter()
        .zip(fu)
        .zip(solver.h_hat())
        .enumerate()
        .map(|(i, ((ui, fi), hi))| {
            if grid.in_band(i) {
                ui * (nu * grid.k_squared(i)) + fi - hi
            } else {
                C::new(0.0, 0.0)
            }
        })
        .collect()
}

/// `−νΔu + f(u) − h`.
pub fn residual(solver: &Solver, u: &Field) -> Result<Field> {
    let spec = solver.spectral(u)?;
    Ok(solver.field(residual_spec(solver, &spec)))
}

/// `Φ(u) = ∫ (ν/2 |∇u|² + F(u) − h u) dx`, evaluated exactly for band-limited `u`.
pub fn lyapunov(solver: &Solver, u: &Field) -> Result<f64> {
    let spec = solver.spectral(u)?;
    Ok(lyapunov_spec(solver, &spec))
}

pub(crate) fn lyapunov_spec(solver: &Solver, u: &[C]) -> f64 {
    let grid = solver.grid();
    let vol = grid.volume();
    let nu = solver.config().nu();
    let poly = solver.config().poly();
    let grad: f64 = u.iter().enumerate().map(|(i, c)| grid.k_squared(i) * c.norm_sqr()).sum();
    let pot = solver.dealias().integrate(u, |x| poly.antiderivative(x));
    0.5 * nu * vol * grad + pot - vol * spectral_dot(solver.h_hat(), u)
}

fn fprime_fine(solver: &Solver, w: &[C]) -> Vec<f64> {
    let poly = solver.config().poly();
    let mut fine = vec![C::new(0.0, 0.0); solver.dealias().fine_len()];
    let mut scratch = Vec::new();
    solver.dealias().to_fine(w, &mut fine, &mut scratch);
    fine.iter().map(|c| poly.derivative(c.re)).collect()
}

/// `v ↦ −νΔv + P(f′(w) v)`.
struct Linearized<'a> {
    solver: &'a Solver,
    fp: Vec<f64>,
    ws: crate::pde::Workspace,
}

impl<'a> Linearized<'a> {
    fn new(solver: &'a Solver, w: &[C]) -> Self {
        Self { solver, fp: fprime_fine(solver, w), ws: solver.workspace() }
    }

    fn apply(&mut self, v: &[C], out: &mut [C]) {
        self.solver.apply_b(&self.fp, v, out, &mut self.ws);
        let grid = self.solver.grid();
        let nu = self.solver.config().nu();
        for (i, o) in out.iter_mut().enumerate() {
            *o = if grid.in_band(i) { v[i] * (nu * grid.k_squared(i)) - *o } else { C::new(0.0, 0.0) };
        }
    }
}

fn l2(solver: &Solver, a: &[C]) -> f64 {
    (solver.grid().volume() * spectral_dot(a, a)).sqrt()
}

/// Newton iteration with preconditioned MINRES linear solves (the Jacobian
/// `−νΔ + f′(w)` is symmetric but indefinite at saddles) and backtracking.
pub fn newton_solve(solver: &Solver, guess: &Field, max_iter: usize) -> Result<(Field, f64, usize)> {
    if !guess.is_finite() {
        return Err(domain_err("Newton guess must be finite"));
    }
    let grid = *solver.grid();
    let nu = solver.config().nu();
    let shift = 1.0;
    let mut w = solver.spectral(guess)?;
    let mirror = mirror_table(&grid);
    let mut r = residual_spec(solver, &w);
    let mut rn = l2(solver, &r);
    for it in 0..max_iter {
        if rn < POLISH_TOL {
            return Ok((solver.field(w), rn, it));
        }
        let mut jac = Linearized::new(solver, &w);
        let kernel = translation_modes(solver, &w);
        let mut rhs: Vec<C> = r.iter().map(|c| -c).collect();
        hermitian_part(&mut rhs, &mirror);
        project_out(&mut rhs, &kernel);
        // relative forcing term: superlinear without oversolving
        let tol = rn.min(1e-2).max(1e-12);
        // the solve is deflated against the translation kernel
        let (mut dw, _) = minres(
            |v, out| {
                let mut pv = v.to_vec();
                project_out(&mut pv, &kernel);
                jac.apply(&pv, out);
                project_out(out, &kernel);
            },
            |x, z| {
                for i in 0..x.len() {
                    z[i] = x[i] / (nu * grid.k_squared(i) + shift);
                }
                // imaginary fields are a spurious null space of the real Jacobian
                hermitian_part(z, &mirror);
                project_out(z, &kernel);
            },
            &rhs,
            tol,
            4 * grid.band_dim() + 50,
        );
        project_out(&mut dw, &kernel);
        let mut step = 1.0;
        loop {
            let trial: Vec<C> = w.iter().zip(&dw).map(|(a, d)| a + d * step).collect();
            let rt = residual_spec(solver, &trial);
            let rtn = l2(solver, &rt);
            if step < 1e-3 && !(rtn < rn) {
                if rn < RESIDUAL_TOL {
                    return Ok((solver.field(w), rn, it));
                }
                return Err(Error::NoConvergence { iterations: it + 1, residual: rn });
            }
            if rtn.is_finite() && (rtn < (1.0 - 1e-4 * step) * rn || step < 1e-3) {
                w = trial;
                r = rt;
                rn = rtn;
                break;
            }
            step *= 0.5;
        }
        if !rn.is_finite() {
            return Err(Error::NoConvergence { iterations: it + 1, residual: rn });
        }
    }
    if rn < RESIDUAL_TOL {
        return Ok((solver.field(w), rn, max_iter));
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: rn })
}

/// Lowest `m` eigenpairs of `−νΔ + f′(w)` as spectral vectors.
pub(crate) fn spectrum_pairs(solver: &Solver, w: &Field, m: usize) -> Result<(Vec<f64>, Vec<Vec<C>>)> {
    let spec = solver.spectral(w)?;
    let grid = *solver.grid();
    let mut op = Linearized::new(solver, &spec);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_5eed);
    let random = move || {
        let vals: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        Field::new(grid, vals).expect("grid length").to_spectrum().band_limited().into_coeffs()
    };
    let dim = grid.band_dim();
    let pairs = lowest_eigenpairs(|v, o| op.apply(v, o), random, dim, m, 8, 1e-11, dim.min(600))?;
    Ok((pairs.values, pairs.vectors))
}

/// Lowest `m` eigenvalues of `−νΔ + f′(w)`, ascending.
pub fn stability_spectrum(solver: &Solver, w: &Field, m: usize) -> Result<Vec<f64>> {
    Ok(spectrum_pairs(solver, w, m)?.0)
}

/// Converged Newton solution with residual, spectrum and `Φ`.
pub fn analyze(solver: &Solver, w: Field, spectrum_size: usize) -> Result<Equilibrium> {
    analyze_with(solver, w, 0, spectrum_size)
}

fn analyze_with(solver: &Solver, w: Field, newton_iterations: usize, m: usize) -> Result<Equilibrium> {
    let spec = solver.spectral(&w)?;
    let residual = l2(solver, &residual_spec(solver, &spec));
    let spectrum = stability_spectrum(solver, &w, m.max(1))?;
    let lyapunov = lyapunov_spec(solver, &spec);
    let stable = spectrum[0] > STABILITY_TOL;
    Ok(Equilibrium { state: w, residual, spectrum, lyapunov, stable, newton_iterations })
}

/// Newton solve from `guess` followed by [`analyze`].
pub fn find_equilibrium(solver: &Solver, guess: &Field, spectrum_size: usize) -> Result<Equilibrium> {
    let (w, _, its) = newton_solve(solver, guess, 100)?;
    analyze_with(solver, w, its, spectrum_size)
}

/// Description of the multistart search.
#[derive(Clone, Debug)]
pub struct MultistartSpec {
    /// Include the constant real roots of `f(a) = h̄`.
    pub constant_roots: bool,
    /// Number of randomized low-mode seeds (doubled for the certificate).
    pub random_starts: usize,
    /// Leading modes used by the random seeds.
    pub seed_modes: usize,
    /// Largest seed amplitude relative to the extreme constant root.
    pub amplitude: f64,
    pub seed: u64,
    /// Number of eigenvalues kept per equilibrium.
    pub spectrum_size: usize,
}

impl Default for MultistartSpec {
    fn default() -> Self {
        Self { constant_roots: true, random_starts: 32, seed_modes: 5, amplitude: 1.5, seed: 0, spectrum_size: 8 }
    }
}

/// The equilibria found by a multistart search, ordered by decreasing `Φ`
/// with the designated stable target `w_N` last.
#[derive(Clone, Debug)]
pub struct EquilibriumSet {
    pub members: Vec<Equilibrium>,
    /// Index of `w_N` in `members` (the last one) when a stable member exists.
    pub target: Option<usize>,
    /// Count after the first half of the starts and after all of them.
    pub counts: (usize, usize),
    /// Whether nonconstant states were merged modulo translations.
    pub modulo_translations: bool,
    pub stability_radius: Option<f64>,
}

impl EquilibriumSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// True when doubling the number of starts did not change the count.
    pub fn stabilized(&self) -> bool {
        self.counts.0 == self.counts.1
    }

    pub fn target_state(&self) -> Option<&Field> {
        self.target.map(|i| &self.members[i].state)
    }

    pub fn report(&self) -> CsvTable {
        let mut t = CsvTable::new(["index", "residual", "min_eigenvalue", "lyapunov", "stable_flag"]);
        t.comment(format!("count_half_starts = {}", self.counts.0))
            .comment(format!("count_all_starts = {}", self.counts.1))
            .comment(format!("stabilized = {}", self.stabilized()))
            .comment(format!("modulo_translations = {}", self.modulo_translations))
            .comment(format!("target_index = {}", self.target.map_or("none".to_string(), |i| (i + 1).to_string())));
        if let Some(d) = self.stability_radius {
            t.comment(format!("stability_radius = {}", fmt_num(d)));
        }
        for (i, e) in self.members.iter().enumerate() {
            t.row([
                (i + 1).to_string(),
                fmt_num(e.residual),
                fmt_num(e.min_eigenvalue()),
                fmt_num(e.lyapunov),
                (e.stable as u8).to_string(),
            ]);
        }
        t
    }
}

fn constant_forcing(solver: &Solver) -> bool {
    let h = solver.config().h();
    let m = h.mean();
    h.values().iter().all(|v| (v - m).abs() < 1e-14 * (1.0 + m.abs()))
}

fn translation_invariant(solver: &Solver) -> bool {
    solver.grid().dim() == 1 && constant_forcing(solver)
}

/// Orthonormalized translation generators `∂_j w`; they span the kernel of
/// the Jacobian at a nonconstant equilibrium when `h` is constant.
fn translation_modes(solver: &Solver, w: &[C]) -> Vec<Vec<C>> {
    if !constant_forcing(solver) {
        return Vec::new();
    }
    let grid = solver.grid();
    let scale = spectral_dot(w, w).sqrt();
    let mut out: Vec<Vec<C>> = Vec::new();
    for axis in 0..grid.dim() {
        let mut t: Vec<C> = w
            .iter()
            .enumerate()
            .map(|(i, c)| if grid.in_band(i) { c * C::new(0.0, grid.wave_vector(i)[axis] as f64) } else { C::new(0.0, 0.0) })
            .collect();
        project_out(&mut t, &out);
        let n = spectral_dot(&t, &t).sqrt();
        if n > 1e-6 * scale {
            t.iter_mut().for_each(|x| *x /= n);
            out.push(t);
        }
    }
    out
}

/// Index of `−k` for every spectral index.
fn mirror_table(grid: &TorusGrid) -> Vec<usize> {
    (0..grid.len())
        .map(|i| {
            let k = grid.wave_vector(i);
            let neg = [-k[0], -k[1]];
            grid.mode_index(&neg[..grid.dim()]).unwrap_or(i)
        })
        .collect()
}

/// Keeps the coefficients of a real field: `v_{−k} = conj(v_k)`.
fn hermitian_part(v: &mut [C], mirror: &[usize]) {
    for i in 0..v.len() {
        let m = mirror[i];
        if m >= i {
            let a = 0.5 * (v[i] + v[m].conj());
            v[i] = a;
            v[m] = a.conj();
        }
    }
}

fn project_out(v: &mut [C], modes: &[Vec<C>]) {
    for q in modes {
        let a = spectral_dot(q, v);
        v.iter_mut().zip(q).for_each(|(x, y)| *x -= y * a);
    }
}

/// `min_s ‖a − b(· + s)‖` in one dimension.
pub fn orbit_distance(a: &Field, b: &Field) -> f64 {
    let grid = a.grid();
    let vol = grid.volume();
    let (sa, sb) = (a.to_spectrum(), b.to_spectrum());
    let terms: Vec<(f64, C)> = (0..grid.len())
        .filter(|&i| grid.in_band(i))
        .map(|i| (grid.wave_vector(i)[0] as f64, sa.coeffs()[i].conj() * sb.coeffs()[i]))
        .collect();
    let corr = |s: f64| vol * terms.iter().map(|(k, c)| (c * C::from_polar(1.0, k * s)).re).sum::<f64>();
    let samples = 16 * grid.n();
    let h = 2.0 * std::f64::consts::PI / samples as f64;
    let mut best = (0.0, corr(0.0));
    for j in 1..samples {
        let s = j as f64 * h;
        let c = corr(s);
        if c > best.1 {
            best = (s, c);
        }
    }
    // golden-section refinement of the sampled maximum
    let (mut lo, mut hi) = (best.0 - h, best.0 + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let x1 = hi - g * (hi - lo);
        let x2 = lo + g * (hi - lo);
        if corr(x1) > corr(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    let cmax = best.1.max(corr(0.5 * (lo + hi)));
    let na = a.l2_norm();
    let nb = b.l2_norm();
    (na * na + nb * nb - 2.0 * cmax).max(0.0).sqrt()
}

fn is_constant(u: &Field) -> bool {
    let m = u.mean();
    u.values().iter().all(|v| (v - m).abs() < 1e-9)
}

fn lex_cmp(a: &Field, b: &Field) -> Ordering {
    let (sa, sb) = (a.to_spectrum(), b.to_spectrum());
    for (x, y) in sa.coeffs().iter().zip(sb.coeffs()) {
        for (p, q) in [(x.re, y.re), (x.im, y.im)] {
            if (p - q).abs() > 1e-9 {
                return p.total_cmp(&q);
            }
        }
    }
    Ordering::Equal
}

fn same_state(a: &Field, b: &Field, orbits: bool) -> bool {
    if a.distance(b) < MERGE_TOL {
        return true;
    }
    orbits && !is_constant(a) && !is_constant(b) && orbit_distance(a, b) < MERGE_TOL
}

/// Multistart Newton search with deduplication. When the problem is
/// translation invariant (one dimension, constant `h`) nonconstant states
/// are merged modulo translations, since each comes as a continuous family.
pub fn find_equilibria(solver: &Solver, spec: &MultistartSpec) -> Result<EquilibriumSet> {
    let grid = *solver.grid();
    let poly = solver.config().poly();
    let hbar = solver.config().h().mean();
    let roots = poly.shifted_by_constant(hbar).real_roots();
    let mut guesses: Vec<Field> = Vec::new();
    let mut half_mark = 0;
    if spec.constant_roots {
        guesses.extend(roots.iter().map(|&a| Field::constant(grid, a)));
    }
    let scale = spec.amplitude * roots.iter().fold(1.0_f64, |m, r| m.max(r.abs()));
    let random = |i: usize| -> Result<Field> {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, 0xE0, i as u64));
        let mean = rng.random_range(-scale..scale);
        let radius = rng.random_range(0.0..scale) * grid.volume().sqrt();
        let mut u = random_low_mode_field(grid, spec.seed_modes.max(2), radius, &mut rng)?;
        u.values_mut().iter_mut().for_each(|v| *v += mean);
        Ok(u)
    };
    for i in 0..spec.random_starts {
        guesses.push(random(i)?);
    }
    half_mark += guesses.len();
    for i in spec.random_starts..2 * spec.random_starts {
        guesses.push(random(i)?);
    }
    let solved: Vec<Option<(Field, usize)>> = guesses
        .par_iter()
        .map(|g| newton_solve(solver, g, 100).ok().map(|(w, _, it)| (w, it)))
        .collect();
    let orbits = translation_invariant(solver);
    let mut unique: Vec<(Field, usize)> = Vec::new();
    let mut count_half = 0;
    for (i, s) in solved.into_iter().enumerate() {
        if i == half_mark {
            count_half = unique.len();
        }
        if let Some((w, it)) = s {
            if !unique.iter().any(|(u, _)| same_state(u, &w, orbits)) {
                unique.push((w, it));
            }
        }
    }
    if half_mark == guesses.len() {
        count_half = unique.len();
    }
    let count_all = unique.len();
    let mut members: Vec<Equilibrium> = unique
        .into_par_iter()
        .map(|(w, it)| analyze_with(solver, w, it, spec.spectrum_size))
        .collect::<Result<_>>()?;
    order_members(&mut members);
    let target = members.last().filter(|e| e.stable).map(|_| members.len() - 1);
    Ok(EquilibriumSet {
        members,
        target,
        counts: (count_half, count_all),
        modulo_translations: orbits,
        stability_radius: None,
    })
}

/// Decreasing `Φ`, ties broken by ascending spectral coefficients; the stable
/// member of least `Φ` (lexicographically greatest among ties) goes last.
fn order_members(members: &mut Vec<Equilibrium>) {
    let tie = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()));
    members.sort_by(|a, b| {
        if tie(a.lyapunov, b.lyapunov) {
            lex_cmp(&a.state, &b.state)
        } else {
            b.lyapunov.total_cmp(&a.lyapunov)
        }
    });
    let target = members
        .iter()
        .enumerate()
        .filter(|(_, e)| e.stable)
        .min_by(|(_, a), (_, b)| {
            if tie(a.lyapunov, b.lyapunov) {
                lex_cmp(&b.state, &a.state)
            } else {
                a.lyapunov.total_cmp(&b.lyapunov)
            }
        })
        .map(|(i, _)| i);
    if let Some(i) = target {
        let t = members.remove(i);
        members.push(t);
    }
}

/// Label of the equilibrium reached by the unforced flow from `u0`.
pub fn classify_basin(solver: &Solver, set: &EquilibriumSet, u0: &Field, horizon: f64) -> Result<Option<usize>> {
    let mut spec = solver.spectral(u0)?;
    let targets: Vec<Vec<C>> = set.members.iter().map(|e| solver.spectral(&e.state)).collect::<Result<_>>()?;
    let dist = |u: &[C], w: &[C]| {
        let d: Vec<C> = u.iter().zip(w).map(|(a, b)| a - b).collect();
        l2(solver, &d)
    };
    let whole = horizon.floor() as usize;
    for _ in 0..whole {
        // settle early once deep inside a stable basin
        for (i, e) in set.members.iter().enumerate() {
            if e.stable && dist(&spec, &targets[i]) < 1e-2 * BASIN_TOL {
                return Ok(Some(i));
            }
        }
        solver.flow_spectral(&mut spec, 1.0)?;
    }
    solver.flow_spectral(&mut spec, horizon - whole as f64)?;
    Ok(targets.iter().position(|w| dist(&spec, w) < BASIN_TOL))
}

/// Sampled stability radius of `w_N`.
#[derive(Clone, Debug)]
pub struct StabilityRadius {
    pub delta: f64,
    /// True when no trial radius passed and `delta` is the smallest trial.
    pub all_failed: bool,
    /// `(radius, accepted)` for every trial, ascending.
    pub trials: Vec<(f64, bool)>,
}

/// Largest trial radius for which every sampled perturbation of `L²` size
/// at most the radius flows back to `w_N` within `horizon`. The samples
/// always include the two constant perturbations of full size.
pub fn stability_radius(
    solver: &Solver,
    set: &EquilibriumSet,
    radii: &[f64],
    samples: usize,
    horizon: f64,
    seed: u64,
) -> Result<StabilityRadius> {
    let target = set.target.ok_or_else(|| Error::Precondition("no stable target equilibrium".into()))?;
    let w = &set.members[target].state;
    let grid = *solver.grid();
    let mut sorted: Vec<f64> = radii.to_vec();
    if sorted.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
        return Err(domain_err("trial radii must be finite and non-negative"));
    }
    sorted.sort_by(f64::total_cmp);
    let unit_const = 1.0 / grid.volume().sqrt();
    let mut trials = Vec::new();
    for (ri, &r) in sorted.iter().enumerate() {
        let perturbations: Vec<Field> = (0..samples.max(2))
            .map(|j| match j {
                0 => Ok(Field::constant(grid, r * unit_const)),
                1 => Ok(Field::constant(grid, -r * unit_const)),
                _ => {
                    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, ri as u64, j as u64));
                    let size = r * (1.0 - rng.random::<f64>());
                    random_low_mode_field(grid, 9, size, &mut rng)
                }
            })
            .collect::<Result<_>>()?;
        let ok = if r == 0.0 {
            true
        } else {
            let labels: Vec<Result<Option<usize>>> = perturbations
                .par_iter()
                .map(|p| classify_basin(solver, set, &(w + p), horizon))
                .collect();
            let mut all = true;
            for l in labels {
                if l? != Some(target) {
                    all = false;
                }
            }
            all
        };
        trials.push((r, ok));
    }
    let best = trials.iter().filter(|(_, ok)| *ok).map(|(r, _)| *r).fold(None, |m: Option<f64>, r| {
        Some(m.map_or(r, |m| m.max(r)))
    });
    Ok(match best {
        Some(delta) => StabilityRadius { delta, all_failed: false, trials },
        None => StabilityRadius { delta: sorted.first().copied().unwrap_or(0.0), all_failed: true, trials },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::TorusGrid;
    use crate::pde::PdeConfig;
    use std::f64::consts::PI;

    fn ac(nu: f64, n: usize) -> Solver {
        let g = TorusGrid::new(1, n).unwrap();
        Solver::new(PdeConfig::allen_cahn(g, nu).unwrap().with_dt(1e-2).unwrap()).unwrap()
    }

    #[test]
    fn newton_constant_roots() {
        let s = ac(2.0, 32);
        let g = *s.grid();
        let (w, r, _) = newton_solve(&s, &Field::constant(g, 0.9), 100).unwrap();
        assert!(w.distance(&Field::constant(g, 1.0)) < 1e-10 && r < RESIDUAL_TOL);
        let (w, r, it) = newton_solve(&s, &Field::zeros(g), 100).unwrap();
        assert_eq!((w.max_abs(), r, it), (0.0, 0.0, 0));
    }

    #[test]
    fn nonconstant_branch_below_threshold() {
        let s = ac(0.5, 32);
        let g = *s.grid();
        let e = find_equilibrium(&s, &Field::from_fn(g, |x| 0.5 * x[0].cos()), 4).unwrap();
        assert!(e.residual < RESIDUAL_TOL);
        assert!(!is_constant(&e.state));
        assert!(residual(&s, &e.state).unwrap().l2_norm() < RESIDUAL_TOL);
    }

    #[test]
    fn spectrum_of_constants() {
        let s = ac(2.0, 32);
        let g = *s.grid();
        let sp = stability_spectrum(&s, &Field::zeros(g), 5).unwrap();
        for (a, b) in sp.iter().zip([-1.0, 1.0, 1.0, 7.0, 7.0]) {
            assert!((a - b).abs() < 1e-10, "{sp:?}");
        }
        let sp = stability_spectrum(&s, &Field::constant(g, 1.0), 1).unwrap();
        assert!((sp[0] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn lyapunov_values() {
        let s = ac(1.0, 32);
        let g = *s.grid();
        assert_eq!(lyapunov(&s, &Field::zeros(g)).unwrap(), 0.0);
        assert!((lyapunov(&s, &Field::constant(g, 1.0)).unwrap() + PI / 2.0).abs() < 1e-12);
        let c = Field::from_fn(g, |x| x[0].cos());
        assert!((lyapunov(&s, &c).unwrap() - 3.0 * PI / 16.0).abs() < 1e-12);
    }

    #[test]
    fn three_constant_equilibria_for_large_viscosity() {
        let s = ac(2.0, 32);
        let set = find_equilibria(&s, &MultistartSpec { random_starts: 6, ..Default::default() }).unwrap();
        assert_eq!(set.len(), 3);
        assert!(set.stabilized());
        let means: Vec<f64> = set.members.iter().map(|e| e.state.mean()).collect();
        for (m, e) in means.iter().zip([0.0, -1.0, 1.0]) {
            assert!((m - e).abs() < 1e-10, "{means:?}");
        }
        assert_eq!(set.target, Some(2));
        let empty = find_equilibria(&s, &MultistartSpec { constant_roots: false, random_starts: 0, ..Default::default() })
            .unwrap();
        assert!(empty.is_empty() && empty.target.is_none());
    }

    #[test]
    fn orbit_distance_sees_translates() {
        let g = TorusGrid::new(1, 32).unwrap();
        let a = Field::from_fn(g, |x| x[0].cos() + 0.3 * (2.0 * x[0]).sin());
        let b = Field::from_fn(g, |x| (x[0] + 0.7).cos() + 0.3 * (2.0 * (x[0] + 0.7)).sin());
        assert!(a.distance(&b) > 0.1);
        assert!(orbit_distance(&a, &b) < 1e-9);
    }

    #[test]
    fn basins_of_small_constants() {
        let s = ac(2.0, 16);
        let set = find_equilibria(&s, &MultistartSpec { random_starts: 0, ..Default::default() }).unwrap();
        let g = *s.grid();
        let plus = classify_basin(&s, &set, &Field::constant(g, 0.1), 20.0).unwrap();
        let minus = classify_basin(&s, &set, &Field::constant(g, -0.1), 20.0).unwrap();
        assert!((set.members[plus.unwrap()].state.mean() - 1.0).abs() < 1e-9);
        assert!((set.members[minus.unwrap()].state.mean() + 1.0).abs() < 1e-9);
        assert_eq!(classify_basin(&s, &set, &set.members[0].state, 20.0).unwrap(), Some(0));
    }
}
