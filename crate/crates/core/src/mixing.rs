//! Monte Carlo mixing diagnostics: ensembles of kicked trajectories, a
//! bounded-Lipschitz proxy distance between empirical laws, recurrence and
//! stability estimators, mixing curves and the coupling ladder.
//!
//! The proxy distance is the largest exact one-dimensional bounded-Lipschitz
//! distance over a fixed dictionary of observables, each divided by its
//! Lipschitz scale. It never exceeds 2.

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::basis::{random_low_mode_field, ModeBasis};
use crate::equilibria::lyapunov;
use crate::error::{config_err, domain_err, Error, Result};
use crate::field::{Field, TorusGrid};
use crate::haar::{mix_seed, sample_kick, NoiseKick, ScalarNoiseConfig};
use crate::pde::Solver;
use crate::report::{estimator_table, fmt_num, push_estimate, CsvTable};
use crate::walk::{simulate_walk, WalkConfig};

const KICK_TAG: u64 = 0x6b1c_0000;
const LADDER_TAG: u64 = 0x1add_0000;

/// Safety factor on the data-based Lipschitz scale of `Φ`.
pub const LYAPUNOV_SCALE_FACTOR: f64 = 1.5;

/// Random half-splits behind the median noise floor.
pub const FLOOR_SPLITS: usize = 9;

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    /// Orthonormal coordinate along basis element `i`.
    Mode(usize),
    Norm,
    Lyapunov,
    /// `‖u − anchor‖_{L²}`.
    Distance,
}

/// Named functionals of a state with their Lipschitz scales.
#[derive(Clone, Debug)]
pub struct ObservableSet {
    basis: ModeBasis,
    norms: Vec<f64>,
    kinds: Vec<Kind>,
    names: Vec<String>,
    scales: Vec<f64>,
    anchor: Option<Field>,
}

impl ObservableSet {
    /// Mode coordinates for `max_l |l_i| ≤ max_mode`, optionally the `L²`
    /// norm and `Φ`.
    pub fn new(grid: TorusGrid, max_mode: usize, norm: bool, lyapunov: bool) -> Result<Self> {
        let m = max_mode as i64;
        if 2 * max_mode >= grid.n() {
            return Err(config_err(format!("observable modes up to {max_mode} exceed the grid band")));
        }
        let modes: Vec<Vec<i64>> = match grid.dim() {
            1 => std::iter::once(vec![0]).chain((1..=m).flat_map(|k| [vec![k], vec![-k]])).collect(),
            _ => (-m..=m).flat_map(|a| (-m..=m).map(move |b| vec![a, b])).collect(),
        };
        let basis = ModeBasis::new(grid, modes)?;
        let norms: Vec<f64> = (0..basis.len()).map(|i| basis.field(i).l2_norm()).collect();
        let mut kinds: Vec<Kind> = (0..basis.len()).map(Kind::Mode).collect();
        let mut names: Vec<String> = basis.modes().iter().map(|l| format!("mode{l:?}").replace(' ', "")).collect();
        if norm {
            kinds.push(Kind::Norm);
            names.push("l2_norm".into());
        }
        if lyapunov {
            kinds.push(Kind::Lyapunov);
            names.push("lyapunov".into());
        }
        let scales = vec![1.0; kinds.len()];
        Ok(Self { basis, norms, kinds, names, scales, anchor: None })
    }

    /// Adds the observable `‖u − anchor‖_{L²}`.
    pub fn with_anchor(mut self, anchor: Field) -> Self {
        self.kinds.push(Kind::Distance);
        self.names.push("anchor_distance".into());
        self.scales.push(1.0);
        self.anchor = Some(anchor);
        self
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn anchor_index(&self) -> Option<usize> {
        self.kinds.iter().position(|k| *k == Kind::Distance)
    }

    fn lyapunov_index(&self) -> Option<usize> {
        self.kinds.iter().position(|k| *k == Kind::Lyapunov)
    }

    /// Sets the scale of `Φ` to the largest difference quotient
    /// `|Φ(u) − Φ(v)|/‖u − v‖` over pairs of `samples`, times
    /// [`LYAPUNOV_SCALE_FACTOR`].
    pub fn calibrate_lyapunov(&mut self, solver: &Solver, samples: &[Field]) -> Result<f64> {
        let Some(idx) = self.lyapunov_index() else { return Ok(1.0) };
        let phi: Vec<f64> = samples.iter().map(|u| lyapunov(solver, u)).collect::<Result<_>>()?;
        let mut q = 0.0_f64;
        for i in 0..samples.len() {
            for j in 0..i {
                let d = samples[i].distance(&samples[j]);
                if d > 1e-12 {
                    q = q.max((phi[i] - phi[j]).abs() / d);
                }
            }
        }
        let scale = if q > 0.0 { LYAPUNOV_SCALE_FACTOR * q } else { 1.0 };
        self.scales[idx] = scale;
        Ok(scale)
    }

    /// Raw (unscaled) observable values.
    pub fn evaluate(&self, solver: &Solver, u: &Field) -> Result<Vec<f64>> {
        let coords = self.basis.project(u);
        self.kinds
            .iter()
            .map(|k| match k {
                Kind::Mode(i) => Ok(coords[*i] / self.norms[*i]),
                Kind::Norm => Ok(u.l2_norm()),
                Kind::Lyapunov => lyapunov(solver, u),
                Kind::Distance => Ok(u.distance(self.anchor.as_ref().expect("anchor set with the kind"))),
            })
            .collect()
    }
}

/// Mode-wise amplitudes of the kick noise.
#[derive(Clone, Debug)]
pub struct NoiseSpec {
    pub config: ScalarNoiseConfig,
    pub amplitudes: Vec<f64>,
}

impl NoiseSpec {
    /// Kick of step `k` of stream `stream`; streams sharing a seed share noise.
    pub fn kick(&self, seed: u64, stream: u64, k: u64) -> Result<NoiseKick> {
        sample_kick(&self.config, &self.amplitudes, mix_seed(seed, KICK_TAG ^ stream, k))
    }

    /// `sup_t ‖η(t)‖_∞ ≤ Σ_i |b_i| ‖φ_i‖_∞ (1 + Σ_j C j^{−q})`.
    pub fn sup_bound(&self) -> f64 {
        self.amplitudes.iter().map(|b| b.abs()).sum::<f64>() * self.config.sup_bound()
    }
}

/// Initial law given as a finite list of points; trajectory `j` starts at
/// `points[j mod len]`.
#[derive(Clone, Debug)]
pub struct InitialLaw {
    pub name: String,
    pub points: Vec<Field>,
}

impl InitialLaw {
    pub fn point(name: impl Into<String>, u: Field) -> Self {
        Self { name: name.into(), points: vec![u] }
    }
}

/// Observable values of an ensemble at integer times `0..=k_max`.
#[derive(Clone, Debug)]
pub struct EnsembleRecord {
    pub law: String,
    pub n_traj: usize,
    pub k_max: usize,
    pub seed: u64,
    pub names: Vec<String>,
    pub scales: Vec<f64>,
    /// Raw values indexed `[traj][k][observable]`, flattened.
    values: Vec<f64>,
    /// False for trajectories that blew up; their rows are excluded.
    pub valid: Vec<bool>,
    /// Index of the initial point of every trajectory.
    pub start: Vec<usize>,
    /// States at time `k_max` (zero fields for excluded trajectories).
    pub final_states: Vec<Field>,
}

impl EnsembleRecord {
    fn at(&self, traj: usize, k: usize, o: usize) -> f64 {
        self.values[(traj * (self.k_max + 1) + k) * self.names.len() + o]
    }

    pub fn blowups(&self) -> usize {
        self.valid.iter().filter(|v| !**v).count()
    }

    /// Raw values of observable `o` at time `k` over valid trajectories.
    pub fn sample(&self, k: usize, o: usize) -> Vec<f64> {
        (0..self.n_traj).filter(|&j| self.valid[j]).map(|j| self.at(j, k, o)).collect()
    }

    /// Values of valid trajectories with `keep(j)`.
    fn sample_where(&self, k: usize, o: usize, keep: impl Fn(usize) -> bool) -> Vec<f64> {
        (0..self.n_traj).filter(|&j| self.valid[j] && keep(j)).map(|j| self.at(j, k, o)).collect()
    }

    /// Replaces the Lipschitz scales (values are stored unscaled).
    pub fn set_scales(&mut self, scales: &[f64]) -> Result<()> {
        if scales.len() != self.names.len() {
            return Err(Error::Shape { expected: self.names.len(), got: scales.len() });
        }
        self.scales = scales.to_vec();
        Ok(())
    }

    /// Long format `(traj_id, k, obs_name, value)` with raw values.
    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(["traj_id", "k", "obs_name", "value"]);
        t.comment(format!("law = {}", self.law))
            .comment(format!("n_traj = {}", self.n_traj))
            .comment(format!("seed = {}", self.seed))
            .comment(format!("blowups = {}", self.blowups()))
            .comment(format!("scales = {}", self.scales.iter().map(|s| fmt_num(*s)).collect::<Vec<_>>().join(" ")));
        for j in 0..self.n_traj {
            if !self.valid[j] {
                continue;
            }
            for k in 0..=self.k_max {
                for (o, name) in self.names.iter().enumerate() {
                    t.row([j.to_string(), k.to_string(), name.clone(), fmt_num(self.at(j, k, o))]);
                }
            }
        }
        t
    }
}

/// Observables along one trajectory; `Err(BlowUp)` is reported as `None`.
fn trajectory(
    solver: &Solver,
    obs: &ObservableSet,
    u0: &Field,
    noise: Option<&NoiseSpec>,
    k_max: usize,
    seed: u64,
    stream: u64,
) -> Result<Option<(Vec<f64>, Field)>> {
    let mut values = Vec::with_capacity((k_max + 1) * obs.len());
    values.extend(obs.evaluate(solver, u0)?);
    let mut u = u0.clone();
    for k in 0..k_max {
        let kick = noise.map(|n| n.kick(seed, stream, k as u64)).transpose()?;
        match solver.time_one_map(&u, kick.as_ref()) {
            Ok(next) => u = next,
            Err(Error::BlowUp { .. }) => return Ok(None),
            Err(e) => return Err(e),
        }
        values.extend(obs.evaluate(solver, &u)?);
    }
    Ok(Some((values, u)))
}

/// `n_traj` trajectories with independent kick streams `0..n_traj`.
pub fn run_ensemble(
    solver: &Solver,
    obs: &ObservableSet,
    law: &InitialLaw,
    noise: Option<&NoiseSpec>,
    n_traj: usize,
    k_max: usize,
    seed: u64,
) -> Result<EnsembleRecord> {
    if law.points.is_empty() || n_traj == 0 {
        return Err(domain_err("an ensemble needs at least one trajectory and one initial point"));
    }
    let rows: Vec<Option<(Vec<f64>, Field)>> = (0..n_traj)
        .into_par_iter()
        .map(|j| trajectory(solver, obs, &law.points[j % law.points.len()], noise, k_max, seed, j as u64))
        .collect::<Result<_>>()?;
    let width = (k_max + 1) * obs.len();
    let mut values = Vec::with_capacity(n_traj * width);
    let mut valid = Vec::with_capacity(n_traj);
    let mut final_states = Vec::with_capacity(n_traj);
    for r in rows {
        match r {
            Some((v, u)) => {
                values.extend(v);
                valid.push(true);
                final_states.push(u);
            }
            None => {
                values.extend(std::iter::repeat(f64::NAN).take(width));
                valid.push(false);
                final_states.push(Field::zeros(*solver.grid()));
            }
        }
    }
    Ok(EnsembleRecord {
        law: law.name.clone(),
        n_traj,
        k_max,
        seed,
        names: obs.names().to_vec(),
        scales: obs.scales().to_vec(),
        values,
        valid,
        start: (0..n_traj).map(|j| j % law.points.len()).collect(),
        final_states,
    })
}

/// Concave piecewise-linear function on `[−1, 1]` given by its vertices.
struct Concave {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Concave {
    fn peak(&self) -> usize {
        let mut best = 0;
        for i in 1..self.ys.len() {
            if self.ys[i] > self.ys[best] {
                best = i;
            }
        }
        best
    }

    /// `g ↦ max{V(f) : |f − g| ≤ d, f ∈ [−1, 1]}`.
    fn window_max(&mut self, d: f64) {
        if d <= 0.0 {
            return;
        }
        let p = self.peak();
        let mut xs = Vec::with_capacity(self.xs.len() + 2);
        let mut ys = Vec::with_capacity(self.xs.len() + 2);
        // left branch shifted left, clipped at −1
        let mut left: Vec<(f64, f64)> = (0..=p).map(|i| (self.xs[i] - d, self.ys[i])).collect();
        match left.iter().position(|v| v.0 >= -1.0) {
            None => left = vec![(-1.0, self.ys[p])],
            Some(0) => {}
            Some(cut) => {
                let (a, b) = (left[cut - 1], left[cut]);
                let y = if b.0 > a.0 { a.1 + (b.1 - a.1) * (-1.0 - a.0) / (b.0 - a.0) } else { b.1 };
                left.drain(..cut);
                if left[0].0 > -1.0 {
                    left.insert(0, (-1.0, y));
                }
            }
        }
        let mut right: Vec<(f64, f64)> = (p..self.xs.len()).map(|i| (self.xs[i] + d, self.ys[i])).collect();
        match right.iter().rposition(|v| v.0 <= 1.0) {
            None => right = vec![(1.0, self.ys[p])],
            Some(cut) if cut + 1 < right.len() => {
                let (a, b) = (right[cut], right[cut + 1]);
                let y = if b.0 > a.0 { a.1 + (b.1 - a.1) * (1.0 - a.0) / (b.0 - a.0) } else { a.1 };
                right.truncate(cut + 1);
                if right[cut].0 < 1.0 {
                    right.push((1.0, y));
                }
            }
            Some(_) => {}
        }
        // the peak plateau [x_p − d, x_p + d] may itself cover an end
        for (x, y) in left.into_iter().chain(right) {
            let x = x.clamp(-1.0, 1.0);
            if let Some(&lx) = xs.last() {
                if x <= lx {
                    let last = ys.len() - 1;
                    ys[last] = f64::max(ys[last], y);
                    continue;
                }
            }
            xs.push(x);
            ys.push(y);
        }
        self.xs = xs;
        self.ys = ys;
    }

    fn add_linear(&mut self, w: f64) {
        for (x, y) in self.xs.iter().zip(self.ys.iter_mut()) {
            *y += w * x;
        }
    }

    fn max(&self) -> f64 {
        self.ys.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Exact bounded-Lipschitz distance
/// `sup{∫f d(μ_a − μ_b) : ‖f‖_∞ ≤ 1, Lip(f) ≤ 1}` between the empirical
/// measures of two finite samples on the line.
pub fn bl_distance_1d(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let (wa, wb) = (1.0 / a.len() as f64, -1.0 / b.len() as f64);
    let mut pts: Vec<(f64, f64)> = a.iter().map(|&x| (x, wa)).chain(b.iter().map(|&x| (x, wb))).collect();
    pts.sort_by(|p, q| p.0.total_cmp(&q.0));
    // merge equal abscissae
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for (x, w) in pts {
        match merged.last_mut() {
            Some(last) if last.0 == x => last.1 += w,
            _ => merged.push((x, w)),
        }
    }
    let mut v = Concave { xs: vec![-1.0, 1.0], ys: vec![-merged[0].1, merged[0].1] };
    for i in 1..merged.len() {
        v.window_max(merged[i].0 - merged[i - 1].0);
        v.add_linear(merged[i].1);
    }
    v.max().clamp(0.0, 2.0)
}

fn check_compatible(a: &EnsembleRecord, b: &EnsembleRecord) -> Result<()> {
    if a.names != b.names {
        return Err(config_err("records use different observables"));
    }
    if a.scales != b.scales {
        return Err(config_err("records use different observable scales"));
    }
    Ok(())
}

/// Largest scaled one-dimensional distance between the two samples.
fn distance_of_samples(scales: &[f64], sample: impl Fn(usize) -> (Vec<f64>, Vec<f64>)) -> f64 {
    (0..scales.len())
        .map(|o| {
            let (mut x, mut y) = sample(o);
            x.iter_mut().for_each(|v| *v /= scales[o]);
            y.iter_mut().for_each(|v| *v /= scales[o]);
            bl_distance_1d(&x, &y)
        })
        .fold(0.0, f64::max)
}

/// Proxy distance between the laws of `a` at time `ka` and `b` at time `kb`.
pub fn empirical_distance_at(a: &EnsembleRecord, ka: usize, b: &EnsembleRecord, kb: usize) -> Result<f64> {
    check_compatible(a, b)?;
    if ka > a.k_max || kb > b.k_max {
        return Err(domain_err(format!("time {ka} or {kb} beyond the recorded horizons")));
    }
    Ok(distance_of_samples(&a.scales, |o| (a.sample(ka, o), b.sample(kb, o))))
}

pub fn empirical_distance(a: &EnsembleRecord, b: &EnsembleRecord, k: usize) -> Result<f64> {
    empirical_distance_at(a, k, b, k)
}

/// Resampling noise floor of laws of half the record's size at time `k`:
/// the median, over `splits` seeded random partitions of the valid
/// trajectories into halves, of the distance between the halves. The first
/// partition is first half against second half.
pub fn split_half_floor(r: &EnsembleRecord, k: usize, splits: usize, seed: u64) -> f64 {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let idx: Vec<usize> = (0..r.n_traj).filter(|&j| r.valid[j]).collect();
    let half = idx.len() / 2;
    let mut values: Vec<f64> = (0..splits.max(1))
        .map(|s| {
            let mut order = idx.clone();
            if s > 0 {
                order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(mix_seed(seed, 0xf100_0000, s as u64)));
            }
            let side: Vec<bool> = {
                let mut side = vec![false; r.n_traj];
                for &j in &order[..half] {
                    side[j] = true;
                }
                side
            };
            distance_of_samples(&r.scales, |o| {
                (r.sample_where(k, o, |j| side[j]), r.sample_where(k, o, |j| !side[j]))
            })
        })
        .collect();
    values.sort_by(f64::total_cmp);
    values[values.len() / 2]
}

#[derive(Clone, Debug)]
pub struct Recurrence {
    /// Smallest per-initial-point frequency.
    pub frequency: f64,
    pub stderr: f64,
    pub per_point: Vec<f64>,
}

/// Fraction of trajectories with `‖u_m − û‖ ≤ r`, minimized over initial
/// points; `û` is the anchor of the observable set that produced `ens`.
pub fn recurrence_estimate(ens: &EnsembleRecord, r: f64, m: usize) -> Result<Recurrence> {
    let o = ens
        .names
        .iter()
        .position(|n| n == "anchor_distance")
        .ok_or_else(|| config_err("recurrence needs an anchor-distance observable"))?;
    if m > ens.k_max {
        return Err(domain_err(format!("time {m} beyond the horizon {}", ens.k_max)));
    }
    let points = ens.start.iter().copied().max().map_or(0, |p| p + 1);
    let mut per_point = Vec::with_capacity(points);
    let mut worst = (f64::INFINITY, 0.0);
    for p in 0..points {
        let s = ens.sample_where(m, o, |j| ens.start[j] == p);
        if s.is_empty() {
            continue;
        }
        let f = s.iter().filter(|d| **d <= r).count() as f64 / s.len() as f64;
        per_point.push(f);
        if f < worst.0 {
            worst = (f, (f * (1.0 - f) / s.len() as f64).sqrt());
        }
    }
    Ok(Recurrence { frequency: worst.0.min(1.0), stderr: worst.1, per_point })
}

#[derive(Clone, Debug)]
pub struct StabilityEstimate {
    /// Proxy distance between the two marginal ensembles at each `k`.
    pub distances: Vec<f64>,
    /// `E min(2, ‖u_k − u′_k‖)` under the same-noise coupling.
    pub coupling: Vec<f64>,
}

impl StabilityEstimate {
    pub fn sup_distance(&self) -> f64 {
        self.distances.iter().copied().fold(0.0, f64::max)
    }

    pub fn sup_coupling(&self) -> f64 {
        self.coupling.iter().copied().fold(0.0, f64::max)
    }
}

/// Same-noise pairs from `u` and `u′`: proxy distances of the marginals and
/// the coupling bound.
#[allow(clippy::too_many_arguments)]
pub fn stability_estimate(
    solver: &Solver,
    obs: &ObservableSet,
    u: &Field,
    u2: &Field,
    noise: Option<&NoiseSpec>,
    n_pairs: usize,
    k_max: usize,
    seed: u64,
) -> Result<StabilityEstimate> {
    let pairs: Vec<Option<(Vec<f64>, Vec<f64>, Vec<f64>)>> = (0..n_pairs)
        .into_par_iter()
        .map(|j| -> Result<_> {
            let (mut a, mut b) = (u.clone(), u2.clone());
            let mut va = obs.evaluate(solver, &a)?;
            let mut vb = obs.evaluate(solver, &b)?;
            let mut dist = vec![a.distance(&b)];
            for k in 0..k_max {
                let kick = noise.map(|n| n.kick(seed, j as u64, k as u64)).transpose()?;
                let step = |x: &Field| solver.time_one_map(x, kick.as_ref());
                match (step(&a), step(&b)) {
                    (Ok(x), Ok(y)) => {
                        a = x;
                        b = y;
                    }
                    (Err(Error::BlowUp { .. }), _) | (_, Err(Error::BlowUp { .. })) => return Ok(None),
                    (Err(e), _) | (_, Err(e)) => return Err(e),
                }
                va.extend(obs.evaluate(solver, &a)?);
                vb.extend(obs.evaluate(solver, &b)?);
                dist.push(a.distance(&b));
            }
            Ok(Some((va, vb, dist)))
        })
        .collect::<Result<_>>()?;
    let pairs: Vec<_> = pairs.into_iter().flatten().collect();
    if pairs.is_empty() {
        return Err(Error::BlowUp { time: 0.0 });
    }
    let no = obs.len();
    let mut distances = Vec::with_capacity(k_max + 1);
    let mut coupling = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        distances.push(distance_of_samples(obs.scales(), |o| {
            (pairs.iter().map(|p| p.0[k * no + o]).collect(), pairs.iter().map(|p| p.1[k * no + o]).collect())
        }));
        coupling.push(pairs.iter().map(|p| p.2[k].min(2.0)).sum::<f64>() / pairs.len() as f64);
    }
    Ok(StabilityEstimate { distances, coupling })
}

/// Settings of a mixing-curve experiment.
#[derive(Clone, Debug)]
pub struct MixingSpec {
    pub n_traj: usize,
    pub k_max: usize,
    /// Initial laws whose curves are measured.
    pub starts: Vec<InitialLaw>,
    /// Law the reference ensemble is seeded from before burn-in.
    pub reference_seed_law: InitialLaw,
    pub noise: NoiseSpec,
    pub seed: u64,
}

impl MixingSpec {
    pub fn burn_in(&self) -> usize {
        2 * self.k_max
    }
}

#[derive(Clone, Debug)]
pub struct MixingOutcome {
    /// `(law name, γ̂_0..γ̂_{k_max})` per start law.
    pub curves: Vec<(String, Vec<f64>)>,
    /// Curve of an ensemble started from an independent sample of the
    /// reference law.
    pub control: Vec<f64>,
    pub noise_floor: f64,
    pub blowups: usize,
    pub lyapunov_scale: f64,
    /// Ensembles of the start laws, in the order of `spec.starts`.
    pub ensembles: Vec<EnsembleRecord>,
}

impl MixingOutcome {
    /// `(experiment_id, k, statistic, value, stderr)`; the stderr column of
    /// `γ̂` rows carries the split-half noise floor.
    pub fn to_csv(&self, spec: &MixingSpec) -> CsvTable {
        let mut t = estimator_table();
        t.comment(format!("n_traj = {}", spec.n_traj))
            .comment(format!("k_max = {}", spec.k_max))
            .comment(format!("burn_in = {}", spec.burn_in()))
            .comment(format!("seed = {}", spec.seed))
            .comment(format!("noise_floor = {}", fmt_num(self.noise_floor)))
            .comment(format!("lyapunov_scale = {}", fmt_num(self.lyapunov_scale)))
            .comment(format!("blowups = {}", self.blowups));
        for (name, curve) in &self.curves {
            for (k, g) in curve.iter().enumerate() {
                push_estimate(&mut t, name, k, "gamma_hat", *g, self.noise_floor);
            }
        }
        for (k, g) in self.control.iter().enumerate() {
            push_estimate(&mut t, "control", k, "gamma_hat", *g, self.noise_floor);
        }
        t
    }
}

/// Reference ensemble after burn-in `2·k_max`, curves `γ̂_k` of every start
/// law against it, and the in-equilibrium control curve.
pub fn mixing_curves(solver: &Solver, obs: &ObservableSet, spec: &MixingSpec) -> Result<MixingOutcome> {
    let burn = spec.burn_in();
    let noise = Some(&spec.noise);
    let sub = |tag: u64| mix_seed(spec.seed, 0x0b5e_0000 ^ tag, 0);
    let mut reference = run_ensemble(solver, obs, &spec.reference_seed_law, noise, spec.n_traj, burn, sub(1))?;
    let twin = run_ensemble(solver, obs, &spec.reference_seed_law, noise, spec.n_traj, burn, sub(2))?;
    let mut obs = obs.clone();
    let mut calib: Vec<Field> =
        reference.final_states.iter().zip(&reference.valid).filter(|p| *p.1).map(|p| p.0.clone()).collect();
    calib.extend(spec.starts.iter().flat_map(|l| l.points.iter().cloned()));
    let lyapunov_scale = obs.calibrate_lyapunov(solver, &calib)?;
    reference.set_scales(obs.scales())?;
    let mut blowups = reference.blowups() + twin.blowups();
    let mut curves = Vec::with_capacity(spec.starts.len());
    let mut ensembles = Vec::with_capacity(spec.starts.len());
    for (i, law) in spec.starts.iter().enumerate() {
        let ens = run_ensemble(solver, &obs, law, noise, spec.n_traj, spec.k_max, sub(10 + i as u64))?;
        blowups += ens.blowups();
        let curve = (0..=spec.k_max).map(|k| empirical_distance_at(&ens, k, &reference, burn)).collect::<Result<_>>()?;
        curves.push((law.name.clone(), curve));
        ensembles.push(ens);
    }
    let stationary = InitialLaw {
        name: "reference_sample".into(),
        points: twin.final_states.iter().zip(&twin.valid).filter(|p| *p.1).map(|p| p.0.clone()).collect(),
    };
    let ctrl = run_ensemble(solver, &obs, &stationary, noise, spec.n_traj, spec.k_max, sub(3))?;
    blowups += ctrl.blowups();
    let control = (0..=spec.k_max).map(|k| empirical_distance_at(&ctrl, k, &reference, burn)).collect::<Result<_>>()?;
    let noise_floor = split_half_floor(&reference, burn, FLOOR_SPLITS, spec.seed);
    Ok(MixingOutcome { curves, control, noise_floor, blowups, lyapunov_scale, ensembles })
}

/// Same-noise pair with its distance and ladder index histories.
#[derive(Clone, Debug)]
pub struct CouplingLadder {
    pub theta: f64,
    pub distances: Vec<f64>,
    /// `ξ_k = ⌊log_θ(d_k/d_0)⌋` while `d_k > 0`.
    pub indices: Vec<i64>,
    /// The pair collided exactly; the record stops there.
    pub coupled: bool,
}

impl CouplingLadder {
    /// `(steps with ξ_{k+1} ≥ ξ_k + 1, steps observed)`.
    pub fn increases(&self) -> (usize, usize) {
        let steps = self.indices.len().saturating_sub(1);
        let up = self.indices.windows(2).filter(|w| w[1] > w[0]).count();
        (up, steps)
    }

    /// Ladder index at time `k`; collided pairs rank above every index.
    pub fn index_at(&self, k: usize) -> i64 {
        self.indices.get(k).copied().unwrap_or(if self.coupled { i64::MAX } else { i64::MIN })
    }
}

fn ladder_index(d: f64, d0: f64, theta: f64) -> i64 {
    ((d / d0).ln() / theta.ln()).floor() as i64
}

#[allow(clippy::too_many_arguments)]
pub fn coupling_ladder(
    solver: &Solver,
    u: &Field,
    u2: &Field,
    theta: f64,
    noise: Option<&NoiseSpec>,
    seed: u64,
    stream: u64,
    k_max: usize,
) -> Result<CouplingLadder> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(domain_err(format!("ladder ratio θ must lie in (0, 1), got {theta}")));
    }
    let d0 = u.distance(u2);
    if d0 == 0.0 {
        return Ok(CouplingLadder { theta, distances: vec![0.0], indices: Vec::new(), coupled: true });
    }
    let (mut a, mut b) = (u.clone(), u2.clone());
    let mut distances = vec![d0];
    let mut indices = vec![0];
    let mut coupled = false;
    for k in 0..k_max {
        let kick = noise.map(|n| n.kick(seed, LADDER_TAG ^ stream, k as u64)).transpose()?;
        a = solver.time_one_map(&a, kick.as_ref())?;
        b = solver.time_one_map(&b, kick.as_ref())?;
        let d = a.distance(&b);
        distances.push(d);
        if d == 0.0 {
            coupled = true;
            break;
        }
        indices.push(ladder_index(d, d0, theta));
    }
    Ok(CouplingLadder { theta, distances, indices, coupled })
}

/// One-sided Mann–Whitney test of "`x` is stochastically larger than `y`".
#[derive(Clone, Copy, Debug)]
pub struct RankTest {
    pub u: f64,
    pub z: f64,
    pub p_value: f64,
}

/// Normal approximation with tie and continuity corrections.
pub fn mann_whitney_greater(x: &[f64], y: &[f64]) -> RankTest {
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let mut all: Vec<(f64, bool)> = x.iter().map(|v| (*v, true)).chain(y.iter().map(|v| (*v, false))).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = all.len();
    let mut rank_x = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        rank_x += all[i..=j].iter().filter(|e| e.1).count() as f64 * avg;
        i = j + 1;
    }
    let u = rank_x - n1 * (n1 + 1.0) / 2.0;
    let nf = n as f64;
    let var = n1 * n2 / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    let z = if var > 0.0 { (u - n1 * n2 / 2.0 - 0.5) / var.sqrt() } else { 0.0 };
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    RankTest { u, z, p_value: 1.0 - std.cdf(z) }
}

/// Ladders from random perturbations of `center` compared with a ±1 walk.
#[derive(Clone, Debug)]
pub struct LadderSpec {
    pub radius: f64,
    pub perturbation_modes: usize,
    pub n_pairs: usize,
    pub theta: f64,
    pub k_max: usize,
    pub walk_p: f64,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct LadderReport {
    pub ladders: Vec<CouplingLadder>,
    pub up_frequency: f64,
    pub up_stderr: f64,
    pub test: RankTest,
}

impl LadderReport {
    pub fn dominates(&self, level: f64) -> bool {
        self.test.p_value < level
    }

    pub fn to_csv(&self, spec: &LadderSpec) -> CsvTable {
        let mut t = estimator_table();
        t.comment(format!("theta = {}", fmt_num(spec.theta)))
            .comment(format!("n_pairs = {}", spec.n_pairs))
            .comment(format!("radius = {}", fmt_num(spec.radius)))
            .comment(format!("walk_p = {}", fmt_num(spec.walk_p)))
            .comment(format!("seed = {}", spec.seed))
            .comment(format!("mann_whitney_u = {}", fmt_num(self.test.u)))
            .comment(format!("mann_whitney_z = {}", fmt_num(self.test.z)))
            .comment(format!("mann_whitney_p = {}", fmt_num(self.test.p_value)));
        push_estimate(&mut t, "ladder", spec.k_max, "up_frequency", self.up_frequency, self.up_stderr);
        for k in 0..=spec.k_max {
            let idx: Vec<f64> = self.ladders.iter().filter_map(|l| l.indices.get(k)).map(|v| *v as f64).collect();
            if idx.is_empty() {
                continue;
            }
            let mean = idx.iter().sum::<f64>() / idx.len() as f64;
            let var = idx.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (idx.len().max(2) - 1) as f64;
            push_estimate(&mut t, "ladder", k, "mean_index", mean, (var / idx.len() as f64).sqrt());
        }
        t
    }
}

pub fn ladder_experiment(
    solver: &Solver,
    center: &Field,
    noise: Option<&NoiseSpec>,
    spec: &LadderSpec,
) -> Result<LadderReport> {
    use rand::SeedableRng;
    let ladders: Vec<CouplingLadder> = (0..spec.n_pairs)
        .into_par_iter()
        .map(|j| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, LADDER_TAG, j as u64));
            let dir = random_low_mode_field(*solver.grid(), spec.perturbation_modes, spec.radius, &mut rng)?;
            let other = center + &dir;
            coupling_ladder(solver, center, &other, spec.theta, noise, spec.seed, j as u64, spec.k_max)
        })
        .collect::<Result<_>>()?;
    let (up, steps) = ladders.iter().fold((0, 0), |acc, l| {
        let (u, s) = l.increases();
        (acc.0 + u, acc.1 + s)
    });
    let freq = if steps > 0 { up as f64 / steps as f64 } else { 0.0 };
    let stderr = if steps > 0 { (freq * (1.0 - freq) / steps as f64).sqrt() } else { 0.0 };
    let walk = WalkConfig::new(spec.walk_p, spec.k_max)?;
    let xi: Vec<f64> = ladders.iter().map(|l| l.index_at(spec.k_max) as f64).collect();
    let zeta: Vec<f64> = (0..spec.n_pairs)
        .map(|j| simulate_walk(&walk, mix_seed(spec.seed, LADDER_TAG ^ 1, j as u64)).sums[spec.k_max] as f64)
        .collect();
    Ok(LadderReport { ladders, up_frequency: freq, up_stderr: stderr, test: mann_whitney_greater(&xi, &zeta) })
}
