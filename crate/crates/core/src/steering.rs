//! Adjoint-gradient steering between equilibria with controls in `𝓗`.
//!
//! A control is a piecewise-linear `𝓗`-valued path on a uniform node grid
//! over `[0, 1]`. The misfit gradient is the exact gradient of the discrete
//! solution map with respect to the node coefficients, obtained from one
//! transposed ETDRK2 sweep.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;

use crate::basis::ModeBasis;
use crate::equilibria::EquilibriumSet;
use crate::error::{config_err, domain_err, Error, Result};
use crate::field::Field;
use crate::pde::{ModeForcing, Solver};
use crate::report::{fmt_num, CsvTable};

type C = Complex64;

pub const DEFAULT_NODES: usize = 64;
const ARMIJO: f64 = 1e-4;
const STALL_WINDOW: usize = 20;
const STALL_DECREASE: f64 = 1e-10;

/// Piecewise-linear control on `nodes` equispaced times `t_j = j/(nodes−1)`;
/// coefficients are stored node-major in the coordinates of the control basis.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlPath {
    nodes: usize,
    modes: usize,
    coeffs: Vec<f64>,
}

impl ControlPath {
    pub fn zeros(nodes: usize, modes: usize) -> Result<Self> {
        Self::from_coefficients(nodes, modes, vec![0.0; nodes * modes])
    }

    pub fn from_coefficients(nodes: usize, modes: usize, coeffs: Vec<f64>) -> Result<Self> {
        if nodes < 2 {
            return Err(config_err(format!("a control path needs at least 2 nodes, got {nodes}")));
        }
        if coeffs.len() != nodes * modes {
            return Err(Error::Shape { expected: nodes * modes, got: coeffs.len() });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(domain_err("control coefficients must be finite"));
        }
        Ok(Self { nodes, modes, coeffs })
    }

    /// Projects arbitrary node fields onto the basis (`P_𝓗` per node).
    pub fn from_node_fields(basis: &ModeBasis, fields: &[Field]) -> Result<Self> {
        let mut coeffs = Vec::with_capacity(fields.len() * basis.len());
        for f in fields {
            coeffs.extend(basis.project(f));
        }
        Self::from_coefficients(fields.len(), basis.len(), coeffs)
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn node_time(&self, j: usize) -> f64 {
        j as f64 / (self.nodes - 1) as f64
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn node(&self, j: usize) -> &[f64] {
        &self.coeffs[j * self.modes..(j + 1) * self.modes]
    }

    /// Left node and weight of the right node at time `t`.
    fn locate(&self, t: f64) -> (usize, f64) {
        let s = t.clamp(0.0, 1.0) * (self.nodes - 1) as f64;
        let j = (s.floor() as usize).min(self.nodes - 2);
        (j, s - j as f64)
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let (j, w) = self.locate(t);
        let (a, b) = (self.node(j), self.node(j + 1));
        for m in 0..self.modes {
            out[m] = (1.0 - w) * a[m] + w * b[m];
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.modes];
        self.eval_into(t, &mut out);
        out
    }

    /// Adds `g` to the node gradient as seen through the value at time `t`.
    fn scatter(&self, t: f64, g: &[f64], grad: &mut [f64]) {
        let (j, w) = self.locate(t);
        for m in 0..self.modes {
            grad[j * self.modes + m] += (1.0 - w) * g[m];
            grad[(j + 1) * self.modes + m] += w * g[m];
        }
    }

    /// `self + s·dir`.
    pub fn offset(&self, dir: &ControlPath, s: f64) -> ControlPath {
        let coeffs = self.coeffs.iter().zip(&dir.coeffs).map(|(a, b)| a + s * b).collect();
        ControlPath { nodes: self.nodes, modes: self.modes, coeffs }
    }

    /// Euclidean product of node coefficients.
    pub fn dot(&self, other: &ControlPath) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == 0.0)
    }

    /// `‖ζ‖_{L²([0,1], L²)}`, exact for the piecewise-linear path.
    pub fn l2_norm(&self, basis: &ModeBasis) -> f64 {
        let weights: Vec<f64> = (0..self.modes).map(|m| basis.field(m).l2_norm().powi(2)).collect();
        let h = 1.0 / (self.nodes - 1) as f64;
        let mut total = 0.0;
        for j in 0..self.nodes - 1 {
            let (a, b) = (self.node(j), self.node(j + 1));
            for m in 0..self.modes {
                total += weights[m] * h * (a[m] * a[m] + a[m] * b[m] + b[m] * b[m]) / 3.0;
            }
        }
        total.sqrt()
    }

    /// Largest pointwise value `|ζ(t, x)|`; attained at a node.
    pub fn sup_norm(&self, basis: &ModeBasis) -> f64 {
        (0..self.nodes).map(|j| basis.synthesize(self.node(j)).max_abs()).fold(0.0, f64::max)
    }
}

impl ModeForcing for ControlPath {
    fn modes(&self) -> usize {
        self.modes
    }

    fn stage_coords(&self, t0: f64, t1: f64, first: &mut [f64], second: &mut [f64]) {
        self.eval_into(t0, first);
        self.eval_into(t1, second);
    }
}

/// Chained controls `ζ_1, …, ζ_n` as a CSV with absolute node times.
pub fn controls_csv(controls: &[ControlPath]) -> CsvTable {
    let mut t = CsvTable::new(["node_time", "mode_index", "coefficient"]);
    for (k, c) in controls.iter().enumerate() {
        t.comment(format!("interval {} nodes = {}", k + 1, c.nodes));
        for j in 0..c.nodes {
            let time = k as f64 + c.node_time(j);
            for (m, v) in c.node(j).iter().enumerate() {
                t.row([fmt_num(time), m.to_string(), fmt_num(*v)]);
            }
        }
    }
    t
}

/// Parses [`controls_csv`] output back into chained controls.
pub fn controls_from_csv(text: &str) -> Result<Vec<ControlPath>> {
    let mut rows: Vec<(f64, usize, f64)> = Vec::new();
    let mut header_seen = false;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            header_seen = true;
            if line != "node_time,mode_index,coefficient" {
                return Err(Error::Parse { line: i + 1, message: format!("unexpected header `{line}`") });
            }
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        let parse_err = |m: String| Error::Parse { line: i + 1, message: m };
        if parts.len() != 3 {
            return Err(parse_err(format!("expected 3 columns, got {}", parts.len())));
        }
        let time: f64 = parts[0].parse().map_err(|e| parse_err(format!("{e}")))?;
        let mode: usize = parts[1].parse().map_err(|e| parse_err(format!("{e}")))?;
        let value: f64 = parts[2].parse().map_err(|e| parse_err(format!("{e}")))?;
        rows.push((time, mode, value));
    }
    let modes = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
    if modes == 0 {
        return Ok(Vec::new());
    }
    // group by interval: nodes at integer times k > 0 close interval k
    let mut out = Vec::new();
    let mut chunk: Vec<f64> = Vec::new();
    let mut last_time = f64::NEG_INFINITY;
    let mut interval = 0usize;
    for (r, row) in rows.chunks(modes).enumerate() {
        if row.len() != modes || row.iter().enumerate().any(|(m, x)| x.1 != m || x.0 != row[0].0) {
            return Err(Error::Parse { line: r + 1, message: "rows must list every mode per node".into() });
        }
        let time = row[0].0;
        let local = time - interval as f64;
        if !chunk.is_empty() && (local <= 0.0 || time <= last_time) {
            let nodes = chunk.len() / modes;
            out.push(ControlPath::from_coefficients(nodes, modes, std::mem::take(&mut chunk))?);
            interval += 1;
        }
        last_time = time;
        chunk.extend(row.iter().map(|x| x.2));
    }
    let nodes = chunk.len() / modes;
    out.push(ControlPath::from_coefficients(nodes, modes, chunk)?);
    Ok(out)
}

fn check_control<'a>(solver: &'a Solver, ctrl: &ControlPath) -> Result<&'a ModeBasis> {
    let basis = solver
        .controls()
        .ok_or_else(|| config_err("steering needs a solver with a control basis"))?;
    if basis.len() != ctrl.modes {
        return Err(Error::Shape { expected: basis.len(), got: ctrl.modes });
    }
    Ok(basis)
}

/// `J(ζ) = ½‖u(1; w_i, ζ) − w_N‖²_{L²}`.
pub fn misfit(solver: &Solver, ctrl: &ControlPath, source: &Field, target: &Field) -> Result<f64> {
    check_control(solver, ctrl)?;
    let u1 = solver.map_with(source, Some(ctrl))?;
    Ok(0.5 * u1.distance(target).powi(2))
}

/// `J` and its gradient with respect to the node coefficients.
pub fn misfit_and_gradient(
    solver: &Solver,
    ctrl: &ControlPath,
    source: &Field,
    target: &Field,
) -> Result<(f64, ControlPath)> {
    let basis = check_control(solver, ctrl)?;
    let (u1, seg) = solver.map_dense(source, Some(ctrl))?;
    let diff = &u1 - target;
    let j = 0.5 * diff.l2_norm().powi(2);
    let vol = solver.grid().volume();
    let mut lam: Vec<C> = solver.spectral(&diff)?.into_iter().map(|c| c * vol).collect();
    let mut ws = solver.workspace();
    let tau = solver.step_size();
    let steps = solver.steps_per_unit();
    let mut grad = vec![0.0; ctrl.coeffs.len()];
    let (mut p0, mut p1) = (vec![0.0; ctrl.modes], vec![0.0; ctrl.modes]);
    solver.adjoint_sweep(&seg, &mut lam, &mut ws, |n, _, cg0, cg1| {
        let t0 = n as f64 * tau;
        let t1 = if n + 1 == steps { 1.0 } else { (n + 1) as f64 * tau };
        basis.spectral_pairings(cg0, &mut p0);
        basis.spectral_pairings(cg1, &mut p1);
        ctrl.scatter(t0, &p0, &mut grad);
        ctrl.scatter(t1, &p1, &mut grad);
    });
    Ok((j, ControlPath { nodes: ctrl.nodes, modes: ctrl.modes, coeffs: grad }))
}

/// Largest relative discrepancy between the adjoint gradient and central
/// differences of `J` along `directions` random unit directions.
pub fn gradient_check(
    solver: &Solver,
    ctrl: &ControlPath,
    source: &Field,
    target: &Field,
    directions: usize,
    step: f64,
    seed: u64,
) -> Result<f64> {
    let (_, grad) = misfit_and_gradient(solver, ctrl, source, target)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..directions {
        let mut d: Vec<f64> = (0..ctrl.coeffs.len()).map(|_| rng.sample(StandardNormal)).collect();
        let n = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        d.iter_mut().for_each(|x| *x /= n);
        let dir = ControlPath { nodes: ctrl.nodes, modes: ctrl.modes, coeffs: d };
        let plus = misfit(solver, &ctrl.offset(&dir, step), source, target)?;
        let minus = misfit(solver, &ctrl.offset(&dir, -step), source, target)?;
        let fd = (plus - minus) / (2.0 * step);
        let exact = grad.dot(&dir);
        let scale = fd.abs().max(exact.abs()).max(1e-300);
        worst = worst.max((fd - exact).abs() / scale);
    }
    Ok(worst)
}

#[derive(Clone, Debug)]
pub struct SteerOptions {
    /// Gradient iterations allowed per unit interval.
    pub max_iters: usize,
    /// Largest number of chained unit intervals `n_i`.
    pub max_intervals: usize,
    pub nodes: usize,
    /// Run [`gradient_check`] at the initial and final control of each interval.
    pub check_gradient: bool,
}

impl Default for SteerOptions {
    fn default() -> Self {
        Self { max_iters: 500, max_intervals: 4, nodes: DEFAULT_NODES, check_gradient: false }
    }
}

#[derive(Clone, Debug)]
pub struct SteerResult {
    /// One control per unit interval; `controls.len()` is `n_i`.
    pub controls: Vec<ControlPath>,
    /// `‖u(n_i) − w_N‖_{L²}` of the replayed controls.
    pub distance: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Misfit after every accepted step, per interval.
    pub history: Vec<Vec<f64>>,
    /// Worst gradient-check discrepancy when requested.
    pub gradient_error: Option<f64>,
}

impl SteerResult {
    pub fn intervals(&self) -> usize {
        self.controls.len()
    }
}

struct IntervalOutcome {
    ctrl: ControlPath,
    misfit: f64,
    iterations: usize,
    history: Vec<f64>,
}

fn descend(solver: &Solver, source: &Field, target: &Field, delta: f64, opts: &SteerOptions) -> Result<IntervalOutcome> {
    let modes = solver.controls().map_or(0, |b| b.len());
    let mut ctrl = ControlPath::zeros(opts.nodes, modes)?;
    let (mut j, mut grad) = misfit_and_gradient(solver, &ctrl, source, target)?;
    let goal = 0.5 * delta * delta;
    let mut history = vec![j];
    let mut step = f64::NAN;
    let mut iterations = 0;
    while iterations < opts.max_iters && j >= goal {
        let g2 = grad.dot(&grad);
        if g2 == 0.0 {
            break;
        }
        if !step.is_finite() {
            // first trial: the step that would zero a quadratic misfit
            step = j / g2;
        }
        let mut accepted = None;
        for _ in 0..60 {
            let trial = ctrl.offset(&grad, -step);
            match misfit(solver, &trial, source, target) {
                Ok(jt) if jt <= j - ARMIJO * step * g2 => {
                    accepted = Some((trial, jt));
                    break;
                }
                Ok(_) | Err(Error::BlowUp { .. }) => step *= 0.5,
                Err(e) => return Err(e),
            }
        }
        let Some((trial, _)) = accepted else { break };
        iterations += 1;
        ctrl = trial;
        (j, grad) = misfit_and_gradient(solver, &ctrl, source, target)?;
        history.push(j);
        step *= 2.0;
        if history.len() > STALL_WINDOW {
            let old = history[history.len() - 1 - STALL_WINDOW];
            if (old - j) <= STALL_DECREASE * old {
                break;
            }
        }
    }
    Ok(IntervalOutcome { ctrl, misfit: j, iterations, history })
}

/// Searches for controls driving `source` within `delta` of `target`,
/// chaining further unit intervals when a single one stalls.
pub fn steer(solver: &Solver, source: &Field, target: &Field, delta: f64, opts: &SteerOptions) -> Result<SteerResult> {
    if !(delta > 0.0) {
        return Err(domain_err(format!("steering tolerance must be positive, got {delta}")));
    }
    let basis = solver
        .controls()
        .ok_or_else(|| config_err("steering needs a solver with a control basis"))?;
    if opts.max_intervals == 0 {
        return Err(config_err("max_intervals must be at least 1"));
    }
    let mut controls = Vec::new();
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut gradient_error: Option<f64> = None;
    let mut state = source.clone();
    for k in 0..opts.max_intervals {
        let zero = ControlPath::zeros(opts.nodes, basis.len())?;
        let free = solver.map_with(&state, Some(&zero))?;
        if k == 0 && free.distance(target) < delta {
            return Ok(SteerResult {
                controls: vec![zero],
                distance: free.distance(target),
                iterations: 0,
                converged: true,
                history: vec![vec![0.5 * free.distance(target).powi(2)]],
                gradient_error: None,
            });
        }
        let out = descend(solver, &state, target, delta, opts)?;
        if opts.check_gradient {
            let seed = 0x5eed ^ k as u64;
            let e0 = gradient_check(solver, &zero, &state, target, 5, 1e-5, seed)?;
            let e1 = gradient_check(solver, &out.ctrl, &state, target, 5, 1e-5, seed)?;
            gradient_error = Some(gradient_error.unwrap_or(0.0).max(e0).max(e1));
        }
        iterations += out.iterations;
        history.push(out.history);
        state = solver.map_with(&state, Some(&out.ctrl))?;
        controls.push(out.ctrl);
        if (2.0 * out.misfit).sqrt() < delta {
            break;
        }
    }
    let distance = replay(solver, source, &controls)?.distance(target);
    Ok(SteerResult { controls, distance, iterations, converged: distance < delta, history, gradient_error })
}

/// State after applying the chained controls from `source`.
pub fn replay(solver: &Solver, source: &Field, controls: &[ControlPath]) -> Result<Field> {
    let mut u = source.clone();
    for c in controls {
        check_control(solver, c)?;
        u = solver.map_with(&u, Some(c))?;
    }
    Ok(u)
}

#[derive(Clone, Debug)]
pub struct HypothesisRow {
    /// One-based index of the source equilibrium.
    pub index: usize,
    pub intervals: usize,
    pub distance: f64,
    pub control_norm: f64,
    pub control_sup: f64,
    pub iterations: usize,
    pub success: bool,
}

#[derive(Clone, Debug)]
pub struct HypothesisReport {
    pub rows: Vec<HypothesisRow>,
    pub delta: f64,
    pub results: Vec<SteerResult>,
}

impl HypothesisReport {
    pub fn verdict(&self) -> bool {
        self.rows.iter().all(|r| r.success)
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new([
            "index",
            "intervals",
            "distance",
            "control_norm",
            "control_sup",
            "iterations",
            "success",
        ]);
        t.comment(format!("delta = {}", fmt_num(self.delta)))
            .comment(format!("verdict = {}", self.verdict()));
        for r in &self.rows {
            t.row([
                r.index.to_string(),
                r.intervals.to_string(),
                fmt_num(r.distance),
                fmt_num(r.control_norm),
                fmt_num(r.control_sup),
                r.iterations.to_string(),
                (r.success as u8).to_string(),
            ]);
        }
        t
    }
}

/// Steers every non-target member of `set` to the target `w_N`.
pub fn verify_hypothesis_c(
    solver: &Solver,
    set: &EquilibriumSet,
    delta: f64,
    opts: &SteerOptions,
) -> Result<HypothesisReport> {
    let basis = solver
        .controls()
        .ok_or_else(|| config_err("steering needs a solver with a control basis"))?;
    let Some(target_index) = set.target else {
        if set.len() <= 1 {
            return Ok(HypothesisReport { rows: Vec::new(), delta, results: Vec::new() });
        }
        return Err(Error::Precondition("equilibrium set has no stable target".into()));
    };
    let target = &set.members[target_index].state;
    let mut rows = Vec::new();
    let mut results = Vec::new();
    for (i, member) in set.members.iter().enumerate() {
        if i == target_index {
            continue;
        }
        let res = steer(solver, &member.state, target, delta, opts)?;
        let control_norm = res.controls.iter().map(|c| c.l2_norm(basis).powi(2)).sum::<f64>().sqrt();
        let control_sup = res.controls.iter().map(|c| c.sup_norm(basis)).fold(0.0, f64::max);
        rows.push(HypothesisRow {
            index: i + 1,
            intervals: res.intervals(),
            distance: res.distance,
            control_norm,
            control_sup,
            iterations: res.iterations,
            success: res.converged,
        });
        results.push(res);
    }
    Ok(HypothesisReport { rows, delta, results })
}
