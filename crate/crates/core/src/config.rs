//! Experiment configuration: line-oriented `key = value` text with dotted
//! section prefixes (`pde.nu = 2`). `#` starts a comment. Unknown or
//! repeated keys are rejected.
//!
//! List values: numbers are comma separated (`1, 0.5`); mode lists are `;`
//! separated integer vectors with space separated components (`0; 1; -1`,
//! `1 0; 0 1`); the forcing modes are `l : amplitude` pairs (`1 : 0.5; -2 : 0.1`).

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::basis::{trig_mode, ModeBasis};
use crate::error::{config_err, Error, Result};
use crate::field::{Field, Polynomial, Spectrum, TorusGrid};
use crate::haar::{ScalarNoiseConfig, XiDensity};
use crate::mixing::NoiseSpec;
use crate::pde::{PdeConfig, Solver};
use crate::report::fmt_num;
use crate::walk::WalkConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct GridSection {
    pub dim: usize,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PdeSection {
    pub nu: f64,
    /// Coefficients `c_0, c_1, …` of `f(u) = Σ c_i u^i`.
    pub poly: Vec<f64>,
    /// Mean of the forcing `h`.
    pub h: f64,
    /// Extra forcing modes: `(l, amplitude)` on the normalized trig basis.
    pub h_modes: Vec<(Vec<i64>, f64)>,
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSection {
    pub amplitude: f64,
    pub decay: f64,
    pub levels: u32,
    pub density: String,
    /// One amplitude `b_i` per control mode.
    pub amplitudes: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleNoiseSection {
    pub kicks: usize,
    /// Random `(u, η)` pairs used to estimate the regularization constant `K`.
    pub pilot: usize,
    /// Largest `L²` norm of the pilot initial fields.
    pub pilot_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriaSection {
    pub random_starts: usize,
    pub seed_modes: usize,
    pub amplitude: f64,
    pub spectrum_size: usize,
    pub radii: Vec<f64>,
    pub radius_samples: usize,
    pub radius_horizon: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SaturationSection {
    /// Index set tested; empty means the control index set.
    pub modes: Vec<Vec<i64>>,
    pub levels: usize,
    pub box_half_width: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GramianSection {
    pub m: usize,
    pub quadrature: usize,
    pub samples: usize,
    pub tol: f64,
    /// `L²` size and mode count of the random initial state.
    pub u0_norm: f64,
    pub u0_modes: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteerSection {
    /// Target radius in units of `√|𝕋^d|`.
    pub delta: f64,
    pub max_iters: usize,
    pub max_intervals: usize,
    pub nodes: usize,
    pub check_gradient: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WalkSection {
    pub p: f64,
    pub horizon: usize,
    pub samples: u64,
    pub levels: Vec<u32>,
    pub tail_eps: f64,
    pub tail_times: Vec<usize>,
    pub drift_c: f64,
    pub drift_level: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixingSection {
    pub n_traj: usize,
    pub k_max: usize,
    pub obs_modes: usize,
    /// Constant initial states, one point mass each.
    pub starts: Vec<f64>,
    /// Also write the observable values of every start ensemble.
    pub dump: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LadderSection {
    /// Constant state the pairs are centred at.
    pub center: f64,
    pub radius: f64,
    pub modes: usize,
    pub pairs: usize,
    pub theta: f64,
    pub k_max: usize,
    pub walk_p: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: String,
    pub grid: GridSection,
    pub pde: PdeSection,
    pub noise: NoiseSection,
    /// Control index set `I`.
    pub control: Vec<Vec<i64>>,
    pub sample_noise: SampleNoiseSection,
    pub equilibria: EquilibriaSection,
    pub saturation: SaturationSection,
    pub gramian: GramianSection,
    pub steer: SteerSection,
    pub walk: WalkSection,
    pub mixing: MixingSection,
    pub ladder: LadderSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: "out".into(),
            grid: GridSection { dim: 1, n: 64 },
            pde: PdeSection { nu: 2.0, poly: vec![0.0, -1.0, 0.0, 1.0], h: 0.0, h_modes: Vec::new(), dt: 1e-3 },
            noise: NoiseSection {
                amplitude: 1.0,
                decay: 2.0,
                levels: 6,
                density: "parabolic".into(),
                amplitudes: vec![1.0; 3],
            },
            control: vec![vec![0], vec![1], vec![-1]],
            sample_noise: SampleNoiseSection { kicks: 4, pilot: 64, pilot_norm: 10.0 },
            equilibria: EquilibriaSection {
                random_starts: 32,
                seed_modes: 5,
                amplitude: 1.5,
                spectrum_size: 8,
                radii: vec![0.1, 0.2, 0.4, 0.8],
                radius_samples: 8,
                radius_horizon: 20.0,
            },
            saturation: SaturationSection { modes: Vec::new(), levels: 6, box_half_width: 7 },
            gramian: GramianSection { m: 33, quadrature: 50, samples: 4, tol: 1e-10, u0_norm: 10.0, u0_modes: 31 },
            steer: SteerSection { delta: 0.2, max_iters: 500, max_intervals: 4, nodes: 64, check_gradient: true },
            walk: WalkSection {
                p: 0.75,
                horizon: 10_000,
                samples: 200_000,
                levels: vec![1, 2, 3],
                tail_eps: 0.03,
                tail_times: vec![500, 1000, 2000],
                drift_c: 0.25,
                drift_level: 8,
            },
            mixing: MixingSection { n_traj: 64, k_max: 20, obs_modes: 2, starts: vec![1.0, -1.0], dump: false },
            ladder: LadderSection {
                center: 1.0,
                radius: 0.1,
                modes: 5,
                pairs: 200,
                theta: 0.5,
                k_max: 10,
                walk_p: 0.75,
            },
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| parse_err(line, format!("{key}: cannot parse {v:?}")))
}

fn num_list<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| num(line, key, s)).collect()
}

fn int_vec(line: usize, key: &str, v: &str) -> Result<Vec<i64>> {
    let out: Vec<i64> = v.split_whitespace().map(|s| num(line, key, s)).collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(parse_err(line, format!("{key}: empty mode")));
    }
    Ok(out)
}

fn mode_list(line: usize, key: &str, v: &str) -> Result<Vec<Vec<i64>>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(';').map(|s| int_vec(line, key, s)).collect()
}

fn weighted_modes(line: usize, key: &str, v: &str) -> Result<Vec<(Vec<i64>, f64)>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(';')
        .map(|item| {
            let (l, a) = item
                .split_once(':')
                .ok_or_else(|| parse_err(line, format!("{key}: expected `l : amplitude`, got {item:?}")))?;
            Ok((int_vec(line, key, l)?, num(line, key, a)?))
        })
        .collect()
}

fn boolean(line: usize, key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(parse_err(line, format!("{key}: expected a boolean, got {v:?}"))),
    }
}

fn join<T: ToString>(xs: &[T], sep: &str) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(sep)
}

fn join_f(xs: &[f64]) -> String {
    xs.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(", ")
}

fn join_modes(ms: &[Vec<i64>]) -> String {
    ms.iter().map(|m| join(m, " ")).collect::<Vec<_>>().join("; ")
}

impl ExperimentConfig {
    /// Parses the text on top of the defaults. Only syntax is checked here;
    /// see [`ExperimentConfig::validate`].
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, v) = body
                .split_once('=')
                .ok_or_else(|| parse_err(line, format!("expected `key = value`, got {body:?}")))?;
            let key = key.trim();
            let v = v.trim().trim_matches('"');
            if !seen.insert(key.to_string()) {
                return Err(parse_err(line, format!("key `{key}` given twice")));
            }
            match key {
                "seed" => c.seed = num(line, key, v)?,
                "out" => c.out = v.to_string(),
                "grid.dim" => c.grid.dim = num(line, key, v)?,
                "grid.n" => c.grid.n = num(line, key, v)?,
                "pde.nu" => c.pde.nu = num(line, key, v)?,
                "pde.poly" => c.pde.poly = num_list(line, key, v)?,
                "pde.h" => c.pde.h = num(line, key, v)?,
                "pde.h_modes" => c.pde.h_modes = weighted_modes(line, key, v)?,
                "pde.dt" => c.pde.dt = num(line, key, v)?,
                "noise.amplitude" => c.noise.amplitude = num(line, key, v)?,
                "noise.decay" => c.noise.decay = num(line, key, v)?,
                "noise.levels" => c.noise.levels = num(line, key, v)?,
                "noise.density" => c.noise.density = v.to_string(),
                "noise.amplitudes" => c.noise.amplitudes = num_list(line, key, v)?,
                "control.modes" => c.control = mode_list(line, key, v)?,
                "sample_noise.kicks" => c.sample_noise.kicks = num(line, key, v)?,
                "sample_noise.pilot" => c.sample_noise.pilot = num(line, key, v)?,
                "sample_noise.pilot_norm" => c.sample_noise.pilot_norm = num(line, key, v)?,
                "equilibria.random_starts" => c.equilibria.random_starts = num(line, key, v)?,
                "equilibria.seed_modes" => c.equilibria.seed_modes = num(line, key, v)?,
                "equilibria.amplitude" => c.equilibria.amplitude = num(line, key, v)?,
                "equilibria.spectrum_size" => c.equilibria.spectrum_size = num(line, key, v)?,
                "equilibria.radii" => c.equilibria.radii = num_list(line, key, v)?,
                "equilibria.radius_samples" => c.equilibria.radius_samples = num(line, key, v)?,
                "equilibria.radius_horizon" => c.equilibria.radius_horizon = num(line, key, v)?,
                "saturation.modes" => c.saturation.modes = mode_list(line, key, v)?,
                "saturation.levels" => c.saturation.levels = num(line, key, v)?,
                "saturation.box" => c.saturation.box_half_width = num(line, key, v)?,
                "gramian.m" => c.gramian.m = num(line, key, v)?,
                "gramian.quadrature" => c.gramian.quadrature = num(line, key, v)?,
                "gramian.samples" => c.gramian.samples = num(line, key, v)?,
                "gramian.tol" => c.gramian.tol = num(line, key, v)?,
                "gramian.u0_norm" => c.gramian.u0_norm = num(line, key, v)?,
                "gramian.u0_modes" => c.gramian.u0_modes = num(line, key, v)?,
                "steer.delta" => c.steer.delta = num(line, key, v)?,
                "steer.max_iters" => c.steer.max_iters = num(line, key, v)?,
                "steer.max_intervals" => c.steer.max_intervals = num(line, key, v)?,
                "steer.nodes" => c.steer.nodes = num(line, key, v)?,
                "steer.check_gradient" => c.steer.check_gradient = boolean(line, key, v)?,
                "walk.p" => c.walk.p = num(line, key, v)?,
                "walk.horizon" => c.walk.horizon = num(line, key, v)?,
                "walk.samples" => c.walk.samples = num(line, key, v)?,
                "walk.levels" => c.walk.levels = num_list(line, key, v)?,
                "walk.tail_eps" => c.walk.tail_eps = num(line, key, v)?,
                "walk.tail_times" => c.walk.tail_times = num_list(line, key, v)?,
                "walk.drift_c" => c.walk.drift_c = num(line, key, v)?,
                "walk.drift_level" => c.walk.drift_level = num(line, key, v)?,
                "mixing.n_traj" => c.mixing.n_traj = num(line, key, v)?,
                "mixing.k_max" => c.mixing.k_max = num(line, key, v)?,
                "mixing.obs_modes" => c.mixing.obs_modes = num(line, key, v)?,
                "mixing.starts" => c.mixing.starts = num_list(line, key, v)?,
                "mixing.dump" => c.mixing.dump = boolean(line, key, v)?,
                "ladder.center" => c.ladder.center = num(line, key, v)?,
                "ladder.radius" => c.ladder.radius = num(line, key, v)?,
                "ladder.modes" => c.ladder.modes = num(line, key, v)?,
                "ladder.pairs" => c.ladder.pairs = num(line, key, v)?,
                "ladder.theta" => c.ladder.theta = num(line, key, v)?,
                "ladder.k_max" => c.ladder.k_max = num(line, key, v)?,
                "ladder.walk_p" => c.ladder.walk_p = num(line, key, v)?,
                _ => return Err(parse_err(line, format!("unknown key `{key}`"))),
            }
        }
        Ok(c)
    }

    /// Canonical text form; parsing it gives back the same config.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("seed", self.seed.to_string());
        kv("out", self.out.clone());
        kv("grid.dim", self.grid.dim.to_string());
        kv("grid.n", self.grid.n.to_string());
        kv("pde.nu", fmt_num(self.pde.nu));
        kv("pde.poly", join_f(&self.pde.poly));
        kv("pde.h", fmt_num(self.pde.h));
        kv(
            "pde.h_modes",
            self.pde
                .h_modes
                .iter()
                .map(|(l, a)| format!("{} : {}", join(l, " "), fmt_num(*a)))
                .collect::<Vec<_>>()
                .join("; "),
        );
        kv("pde.dt", fmt_num(self.pde.dt));
        kv("noise.amplitude", fmt_num(self.noise.amplitude));
        kv("noise.decay", fmt_num(self.noise.decay));
        kv("noise.levels", self.noise.levels.to_string());
        kv("noise.density", self.noise.density.clone());
        kv("noise.amplitudes", join_f(&self.noise.amplitudes));
        kv("control.modes", join_modes(&self.control));
        kv("sample_noise.kicks", self.sample_noise.kicks.to_string());
        kv("sample_noise.pilot", self.sample_noise.pilot.to_string());
        kv("sample_noise.pilot_norm", fmt_num(self.sample_noise.pilot_norm));
        let e = &self.equilibria;
        kv("equilibria.random_starts", e.random_starts.to_string());
        kv("equilibria.seed_modes", e.seed_modes.to_string());
        kv("equilibria.amplitude", fmt_num(e.amplitude));
        kv("equilibria.spectrum_size", e.spectrum_size.to_string());
        kv("equilibria.radii", join_f(&e.radii));
        kv("equilibria.radius_samples", e.radius_samples.to_string());
        kv("equilibria.radius_horizon", fmt_num(e.radius_horizon));
        kv("saturation.modes", join_modes(&self.saturation.modes));
        kv("saturation.levels", self.saturation.levels.to_string());
        kv("saturation.box", self.saturation.box_half_width.to_string());
        let g = &self.gramian;
        kv("gramian.m", g.m.to_string());
        kv("gramian.quadrature", g.quadrature.to_string());
        kv("gramian.samples", g.samples.to_string());
        kv("gramian.tol", fmt_num(g.tol));
        kv("gramian.u0_norm", fmt_num(g.u0_norm));
        kv("gramian.u0_modes", g.u0_modes.to_string());
        let st = &self.steer;
        kv("steer.delta", fmt_num(st.delta));
        kv("steer.max_iters", st.max_iters.to_string());
        kv("steer.max_intervals", st.max_intervals.to_string());
        kv("steer.nodes", st.nodes.to_string());
        kv("steer.check_gradient", st.check_gradient.to_string());
        let w = &self.walk;
        kv("walk.p", fmt_num(w.p));
        kv("walk.horizon", w.horizon.to_string());
        kv("walk.samples", w.samples.to_string());
        kv("walk.levels", join(&w.levels, ", "));
        kv("walk.tail_eps", fmt_num(w.tail_eps));
        kv("walk.tail_times", join(&w.tail_times, ", "));
        kv("walk.drift_c", fmt_num(w.drift_c));
        kv("walk.drift_level", w.drift_level.to_string());
        let m = &self.mixing;
        kv("mixing.n_traj", m.n_traj.to_string());
        kv("mixing.k_max", m.k_max.to_string());
        kv("mixing.obs_modes", m.obs_modes.to_string());
        kv("mixing.starts", join_f(&m.starts));
        kv("mixing.dump", m.dump.to_string());
        let l = &self.ladder;
        kv("ladder.center", fmt_num(l.center));
        kv("ladder.radius", fmt_num(l.radius));
        kv("ladder.modes", l.modes.to_string());
        kv("ladder.pairs", l.pairs.to_string());
        kv("ladder.theta", fmt_num(l.theta));
        kv("ladder.k_max", l.k_max.to_string());
        kv("ladder.walk_p", fmt_num(l.walk_p));
        s
    }

    pub fn torus(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.grid.dim, self.grid.n)
    }

    pub fn forcing(&self, grid: TorusGrid) -> Result<Field> {
        let mut spec = Field::constant(grid, self.pde.h).to_spectrum();
        for (l, a) in &self.pde.h_modes {
            let m = trig_mode(&grid, l)?;
            for (c, e) in spec.coeffs_mut().iter_mut().zip(m.coeffs()) {
                *c += *a * *e;
            }
        }
        Ok(Spectrum::new(grid, spec.into_coeffs())?.to_field())
    }

    pub fn pde_config(&self) -> Result<PdeConfig> {
        let grid = self.torus()?;
        PdeConfig::new(grid, self.pde.nu, Polynomial::new(self.pde.poly.clone())?, self.forcing(grid)?, self.pde.dt)
    }

    pub fn control_basis(&self) -> Result<ModeBasis> {
        ModeBasis::new(self.torus()?, self.control.clone())
    }

    /// Solver with the control basis attached.
    pub fn solver(&self) -> Result<Solver> {
        Solver::new(self.pde_config()?)?.with_controls(self.control_basis()?)
    }

    pub fn noise_config(&self) -> Result<ScalarNoiseConfig> {
        let n = &self.noise;
        ScalarNoiseConfig::new(n.amplitude, n.decay, n.levels, XiDensity::parse(&n.density)?)
    }

    pub fn noise_spec(&self) -> Result<NoiseSpec> {
        if self.noise.amplitudes.len() != self.control.len() {
            return Err(config_err(format!(
                "noise.amplitudes has {} entries but the control set has {} modes",
                self.noise.amplitudes.len(),
                self.control.len()
            )));
        }
        if let Some(b) = self.noise.amplitudes.iter().find(|b| !(b.is_finite() && **b != 0.0)) {
            return Err(config_err(format!("noise amplitudes must be finite and nonzero, got {b}")));
        }
        Ok(NoiseSpec { config: self.noise_config()?, amplitudes: self.noise.amplitudes.clone() })
    }

    /// Checks every section before anything runs.
    pub fn validate(&self) -> Result<()> {
        let grid = self.torus()?;
        self.solver()?;
        self.noise_spec()?;
        if self.control.iter().any(|l| l.len() != grid.dim()) {
            return Err(config_err("control modes must match grid.dim"));
        }
        if !(self.sample_noise.pilot_norm >= 0.0) {
            return Err(config_err("sample_noise.pilot_norm must be non-negative"));
        }
        let e = &self.equilibria;
        if e.spectrum_size == 0 || e.seed_modes == 0 || e.seed_modes > grid.band_dim() {
            return Err(config_err("equilibria.spectrum_size and seed_modes must be positive and within the band"));
        }
        if !(e.amplitude > 0.0) || !(e.radius_horizon > 0.0) || e.radii.iter().any(|r| !(*r >= 0.0)) {
            return Err(config_err("equilibria amplitude, radii and horizon must be positive"));
        }
        let sat = &self.saturation;
        if sat.modes.iter().any(|l| l.len() != grid.dim()) || sat.box_half_width < 0 {
            return Err(config_err("saturation.modes must match grid.dim and saturation.box must be ≥ 0"));
        }
        let g = &self.gramian;
        if g.m < self.control.len() || g.m > grid.band_dim() {
            return Err(config_err(format!(
                "gramian.m = {} must lie between dim 𝓗 = {} and the band size {}",
                g.m,
                self.control.len(),
                grid.band_dim()
            )));
        }
        let steps = (1.0 / self.pde.dt - 1e-9).ceil() as usize;
        if g.quadrature == 0 || steps % g.quadrature != 0 {
            return Err(config_err(format!("gramian.quadrature must divide the {steps} steps per unit")));
        }
        if !(g.tol > 0.0) || !(g.u0_norm >= 0.0) || g.u0_modes == 0 || g.u0_modes > grid.band_dim() {
            return Err(config_err("gramian.tol must be positive and gramian.u0_modes within the band"));
        }
        let st = &self.steer;
        if !(st.delta > 0.0) || st.nodes < 2 || st.max_intervals == 0 {
            return Err(config_err("steer.delta must be positive, steer.nodes ≥ 2, steer.max_intervals ≥ 1"));
        }
        let w = &self.walk;
        WalkConfig::new(w.p, w.horizon)?;
        if w.samples == 0 || w.tail_times.iter().any(|k| *k > w.horizon) {
            return Err(config_err("walk.samples must be positive and walk.tail_times within the horizon"));
        }
        crate::walk::tail_rates(w.p, w.tail_eps)?;
        crate::walk::drift_alpha(w.p, w.drift_c)?;
        let m = &self.mixing;
        if m.n_traj < 2 || m.starts.is_empty() || m.obs_modes > grid.band_dim() {
            return Err(config_err("mixing needs n_traj ≥ 2, at least one start and obs_modes within the band"));
        }
        let l = &self.ladder;
        if !(l.theta > 0.0 && l.theta < 1.0) {
            return Err(config_err(format!("ladder.theta must lie in (0,1), got {}", l.theta)));
        }
        if !(l.radius > 0.0) || l.modes == 0 || l.modes > grid.band_dim() || l.pairs == 0 || l.k_max == 0 {
            return Err(config_err("ladder radius, modes, pairs and k_max must be positive"));
        }
        WalkConfig::new(l.walk_p, l.k_max)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_echo_round_trips() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        assert_eq!(ExperimentConfig::parse(&c.echo()).unwrap(), c);
    }

    #[test]
    fn parses_sections_lists_and_comments() {
        let c = ExperimentConfig::parse(
            "# comment\nseed = 9\npde.nu = 0.5  # trailing\ncontrol.modes = 0; 2; -2\npde.h_modes = 1 : 0.5\nnoise.amplitudes = 1, 2, 3\n",
        )
        .unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.pde.nu, 0.5);
        assert_eq!(c.control, vec![vec![0], vec![2], vec![-2]]);
        assert_eq!(c.pde.h_modes, vec![(vec![1], 0.5)]);
        assert_eq!(c.noise.amplitudes, vec![1.0, 2.0, 3.0]);
        let h = c.forcing(c.torus().unwrap()).unwrap();
        let expect = 0.5 / std::f64::consts::PI.sqrt();
        assert!((h.values()[0] - expect).abs() < 1e-14);
    }

    #[test]
    fn rejects_unknown_and_repeated_keys() {
        assert!(matches!(ExperimentConfig::parse("pde.mu = 1"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(ExperimentConfig::parse("seed = 1\nseed = 2"), Err(Error::Parse { line: 2, .. })));
        assert!(ExperimentConfig::parse("seed").is_err());
    }

    #[test]
    fn q_at_most_one_is_a_validation_error() {
        let c = ExperimentConfig::parse("noise.decay = 1").unwrap();
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("q > 1"), "{msg}");
    }
}
