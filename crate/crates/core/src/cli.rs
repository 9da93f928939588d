//! Command-line driver: loads an [`ExperimentConfig`], runs one experiment
//! (or all of them) and writes CSV artifacts plus a manifest per command.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::basis::random_low_mode_field;
use crate::config::ExperimentConfig;
use crate::equilibria::{find_equilibria, stability_radius, MultistartSpec};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::haar::mix_seed;
use crate::linearization::{gramian_of, kernel_test};
use crate::mixing::{ladder_experiment, mixing_curves, InitialLaw, LadderSpec, MixingSpec, ObservableSet};
use crate::report::{fmt_num, CsvTable};
use crate::saturation::{function_span_dimension, is_generator, ladder_report, saturation_radius, ModeSet};
use crate::steering::{controls_csv, verify_hypothesis_c, SteerOptions};
use crate::walk::{walk_table, WalkTableSpec};

const GRAMIAN_TAG: u64 = 0x6a3b_0000;
const NOISE_TAG: u64 = 0x5a3e_0000;
const PILOT_TAG: u64 = 0x9117_0000;

#[derive(Debug, Parser)]
#[command(name = "mixlab", version, about = "Mixing laboratory for randomly kicked parabolic equations")]
pub struct Cli {
    /// Configuration file (`key = value` lines); defaults apply without it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the master seed of the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (overrides `out` of the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Overrides the solver time step.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Sample Haar noise kicks.
    SampleNoise,
    /// Multistart search for equilibria with spectra and Lyapunov values.
    Equilibria,
    /// Generator certificate and saturation ladder of an index set.
    Saturation,
    /// Observability Gramians along noisy trajectories.
    Gramian,
    /// Steer every equilibrium to the stable target.
    Steer,
    /// Random-walk exact formulas against Monte Carlo.
    Walk,
    /// Empirical mixing curves.
    Mixing,
    /// Same-noise coupling ladders against a biased walk.
    Ladder,
    /// Every experiment in dependency order.
    All,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::SampleNoise => "sample-noise",
            Self::Equilibria => "equilibria",
            Self::Saturation => "saturation",
            Self::Gramian => "gramian",
            Self::Steer => "steer",
            Self::Walk => "walk",
            Self::Mixing => "mixing",
            Self::Ladder => "ladder",
            Self::All => "all",
        }
    }

    /// The single commands `all` expands to.
    pub fn expand(&self) -> Vec<Command> {
        match self {
            Self::All => vec![
                Self::SampleNoise,
                Self::Saturation,
                Self::Equilibria,
                Self::Gramian,
                Self::Steer,
                Self::Walk,
                Self::Mixing,
                Self::Ladder,
            ],
            c => vec![*c],
        }
    }
}

/// Exit code for a failed run.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        3
    } else {
        2
    }
}

/// Artifacts of one command; `failure` is reported after the files are written.
struct Outcome {
    files: Vec<(String, CsvTable)>,
    summary: Vec<String>,
    failure: Option<Error>,
}

impl Outcome {
    fn new() -> Self {
        Self { files: Vec::new(), summary: Vec::new(), failure: None }
    }
}

/// Config file plus command-line overrides, validated.
pub fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::parse(&fs::read_to_string(p)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.to_string_lossy().into_owned();
    }
    if let Some(dt) = cli.dt {
        cfg.pde.dt = dt;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs the parsed command line; returns the paths written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let cfg = load_config(cli)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(Error::Config("--workers must be at least 1".into()));
        }
        pool = pool.num_threads(w);
    }
    let pool = pool.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let out = PathBuf::from(&cfg.out);
    fs::create_dir_all(&out)?;
    let mut written = Vec::new();
    for cmd in cli.command.expand() {
        let start = Instant::now();
        let outcome = pool.install(|| execute(cmd, &cfg))?;
        for (name, table) in &outcome.files {
            let path = out.join(name);
            fs::write(&path, table.render())?;
            written.push(path);
        }
        let manifest = out.join(format!("{}.manifest", cmd.name()));
        fs::write(&manifest, render_manifest(cmd, &cfg, &outcome, pool.current_num_threads(), start.elapsed().as_secs_f64()))?;
        written.push(manifest);
        if !cli.quiet {
            for line in &outcome.summary {
                println!("{}: {line}", cmd.name());
            }
        }
        if let Some(e) = outcome.failure {
            return Err(e);
        }
    }
    Ok(written)
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with(args: impl IntoIterator<Item = std::ffi::OsString>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("mixlab: {e}");
            exit_code(&e)
        }
    }
}

fn render_manifest(cmd: Command, cfg: &ExperimentConfig, outcome: &Outcome, workers: usize, wall: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "command = {}", cmd.name());
    let _ = writeln!(s, "seed = {}", cfg.seed);
    let _ = writeln!(s, "version = mixlab {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "workers = {workers}");
    let _ = writeln!(s, "wall_time_s = {wall:.3}");
    let files: Vec<&str> = outcome.files.iter().map(|f| f.0.as_str()).collect();
    let _ = writeln!(s, "files = {}", files.join(", "));
    let status = outcome.failure.as_ref().map_or("ok".to_string(), |e| format!("failed: {e}"));
    let _ = writeln!(s, "status = {status}");
    for line in &outcome.summary {
        let _ = writeln!(s, "summary = {line}");
    }
    s.push_str("\n# config\n");
    s.push_str(&cfg.echo());
    s
}

fn execute(cmd: Command, cfg: &ExperimentConfig) -> Result<Outcome> {
    match cmd {
        Command::SampleNoise => sample_noise(cfg),
        Command::Equilibria => equilibria(cfg).map(|(o, _)| o),
        Command::Saturation => saturation(cfg),
        Command::Gramian => gramian(cfg),
        Command::Steer => steer(cfg),
        Command::Walk => walk(cfg),
        Command::Mixing => mixing(cfg),
        Command::Ladder => ladder(cfg),
        Command::All => unreachable!("expanded before execution"),
    }
}

fn sample_noise(cfg: &ExperimentConfig) -> Result<Outcome> {
    let noise = cfg.noise_spec()?;
    let mut o = Outcome::new();
    let mut sum = CsvTable::new(["kick", "sup_norm", "sup_bound"]);
    for k in 0..cfg.sample_noise.kicks {
        let kick = noise.kick(cfg.seed, NOISE_TAG, k as u64)?;
        sum.row([k.to_string(), fmt_num(kick.sup_norm()), fmt_num(noise.sup_bound())]);
        o.files.push((format!("noise_kick_{k}.csv"), kick.to_csv()));
    }
    // empirical regularization constant: 1.5 times the pilot maximum of ‖S(u, η)‖_{H²}
    let solver = cfg.solver()?;
    let grid = *solver.grid();
    let sn = &cfg.sample_noise;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, PILOT_TAG, 0));
    let pairs = (0..sn.pilot)
        .map(|i| {
            let norm = sn.pilot_norm * (i + 1) as f64 / sn.pilot as f64;
            let u = random_low_mode_field(grid, grid.band_dim(), norm, &mut rng)?;
            Ok((u, Some(noise.kick(cfg.seed, PILOT_TAG, i as u64)?)))
        })
        .collect::<Result<Vec<_>>>()?;
    let k_bound = 1.5 * solver.max_h2_after_kick(&pairs)?;
    sum.comment(format!("h2_bound_K = {}", fmt_num(k_bound)));
    sum.comment(format!("h2_pilot = {}", sn.pilot));
    o.summary.push(format!(
        "{} kicks, sup bound {}, empirical K {}",
        sn.kicks,
        fmt_num(noise.sup_bound()),
        fmt_num(k_bound)
    ));
    o.files.push(("noise_summary.csv".into(), sum));
    Ok(o)
}

fn multistart(cfg: &ExperimentConfig) -> MultistartSpec {
    let e = &cfg.equilibria;
    MultistartSpec {
        constant_roots: true,
        random_starts: e.random_starts,
        seed_modes: e.seed_modes,
        amplitude: e.amplitude,
        seed: cfg.seed,
        spectrum_size: e.spectrum_size,
    }
}

fn equilibria(cfg: &ExperimentConfig) -> Result<(Outcome, crate::equilibria::EquilibriumSet)> {
    let solver = cfg.solver()?;
    let mut set = find_equilibria(&solver, &multistart(cfg))?;
    let e = &cfg.equilibria;
    let mut o = Outcome::new();
    if set.target.is_some() && !e.radii.is_empty() {
        let r = stability_radius(&solver, &set, &e.radii, e.radius_samples, e.radius_horizon, cfg.seed)?;
        set.stability_radius = Some(r.delta);
        let mut t = CsvTable::new(["radius", "accepted"]);
        for (radius, ok) in &r.trials {
            t.row([fmt_num(*radius), (*ok as u8).to_string()]);
        }
        o.files.push(("stability_radius.csv".into(), t));
    }
    o.summary.push(format!("{} equilibria (stabilized = {})", set.len(), set.stabilized()));
    o.files.insert(0, ("equilibria.csv".into(), set.report()));
    if set.is_empty() {
        o.failure = Some(Error::NoConvergence { iterations: 0, residual: f64::NAN });
    }
    Ok((o, set))
}

fn saturation(cfg: &ExperimentConfig) -> Result<Outcome> {
    let modes = if cfg.saturation.modes.is_empty() { &cfg.control } else { &cfg.saturation.modes };
    let set = ModeSet::new(cfg.grid.dim, modes.clone())?;
    let cert = is_generator(&set);
    let radius = saturation_radius(&set, cfg.saturation.box_half_width)?;
    let mut summary = CsvTable::new(["statistic", "value"]);
    summary.comment(format!("index_set = {modes:?}"));
    summary.row(["is_generator".to_string(), (cert.is_generator() as u8).to_string()]);
    summary.row(["sublattice_index".to_string(), cert.sublattice_index().map_or("none".into(), |i| i.to_string())]);
    let k = match radius {
        crate::saturation::SaturationRadius::Finite(k) => k.to_string(),
        _ => "never".to_string(),
    };
    summary.row([format!("levels_to_cover_box_{}", cfg.saturation.box_half_width), k.clone()]);
    let mut ladder = ladder_report(&set, cfg.saturation.levels);
    if cfg.grid.dim == 1 {
        // literal function-space dimension next to the index count
        let idx: Vec<i64> = modes.iter().map(|l| l[0]).collect();
        let dims: Vec<String> =
            (0..=cfg.saturation.levels).map(|k| function_span_dimension(&idx, k).to_string()).collect();
        ladder.comment(format!("function_span_dimensions = {}", dims.join(";")));
    }
    let mut o = Outcome::new();
    o.summary.push(format!("generator = {}; box {} covered at level {k}", cert.is_generator(), cfg.saturation.box_half_width));
    o.files.push(("saturation_summary.csv".into(), summary));
    o.files.push(("saturation_ladder.csv".into(), ladder));
    Ok(o)
}

fn gramian(cfg: &ExperimentConfig) -> Result<Outcome> {
    let solver = cfg.solver()?;
    let noise = cfg.noise_spec()?;
    let g = &cfg.gramian;
    let mut t = CsvTable::new([
        "sample",
        "M",
        "lambda_min",
        "lambda_max",
        "ratio",
        "trivial_kernel",
        "quadrature_points",
        "noise_seed",
        "refinement_change",
    ]);
    t.comment(format!("tol = {}", fmt_num(g.tol)));
    let mut o = Outcome::new();
    let mut worst = f64::INFINITY;
    for s in 0..g.samples {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, GRAMIAN_TAG, s as u64));
        let u0 = random_low_mode_field(*solver.grid(), g.u0_modes, g.u0_norm, &mut rng)?;
        let kick = noise.kick(cfg.seed, GRAMIAN_TAG, s as u64)?;
        let traj = solver.run_trajectory(&u0, &[Some(kick)], true)?;
        let gm = gramian_of(&solver, &traj, g.m, g.quadrature)?;
        let verdict = kernel_test(&gm, g.tol);
        worst = worst.min(verdict.ratio());
        t.row([
            s.to_string(),
            gm.dim().to_string(),
            fmt_num(gm.lambda_min()),
            fmt_num(gm.lambda_max()),
            fmt_num(verdict.ratio()),
            (verdict.is_trivial() as u8).to_string(),
            gm.quadrature_points.to_string(),
            s.to_string(),
            fmt_num(gm.refinement_change),
        ]);
        if s == 0 {
            o.files.push(("gramian_matrix.csv".into(), gm.to_csv()));
        }
    }
    o.summary.push(format!("{} samples, smallest lambda_min/lambda_max {}", g.samples, fmt_num(worst)));
    o.files.insert(0, ("gramian_summary.csv".into(), t));
    Ok(o)
}

fn steer(cfg: &ExperimentConfig) -> Result<Outcome> {
    let solver = cfg.solver()?;
    let set = find_equilibria(&solver, &multistart(cfg))?;
    let st = &cfg.steer;
    let opts = SteerOptions {
        max_iters: st.max_iters,
        max_intervals: st.max_intervals,
        nodes: st.nodes,
        check_gradient: st.check_gradient,
    };
    let delta = st.delta * solver.grid().volume().sqrt();
    let report = verify_hypothesis_c(&solver, &set, delta, &opts)?;
    let mut o = Outcome::new();
    let mut table = report.to_csv();
    if let Some(e) = report.results.iter().filter_map(|r| r.gradient_error).reduce(f64::max) {
        table.comment(format!("gradient_check_max_rel_error = {}", fmt_num(e)));
    }
    o.files.push(("steer_hypothesis.csv".into(), table));
    for (row, res) in report.rows.iter().zip(&report.results) {
        o.files.push((format!("steer_controls_{}.csv", row.index), controls_csv(&res.controls)));
    }
    o.summary.push(format!("{} sources, hypothesis verdict {}", report.rows.len(), report.verdict()));
    if !report.verdict() {
        let it = report.rows.iter().map(|r| r.iterations).max().unwrap_or(0);
        let d = report.rows.iter().map(|r| r.distance).fold(0.0, f64::max);
        o.failure = Some(Error::NoConvergence { iterations: it, residual: d });
    }
    Ok(o)
}

fn walk(cfg: &ExperimentConfig) -> Result<Outcome> {
    let w = &cfg.walk;
    let spec = WalkTableSpec {
        p: w.p,
        horizon: w.horizon,
        samples: w.samples,
        survival_levels: w.levels.clone(),
        tail_eps: w.tail_eps,
        tail_times: w.tail_times.clone(),
        drift_c: w.drift_c,
        drift_level: w.drift_level,
        seed: cfg.seed,
    };
    let mut o = Outcome::new();
    o.files.push(("walk_table.csv".into(), walk_table(&spec)?));
    o.summary.push(format!("p = {}, N = {}", w.p, w.samples));
    Ok(o)
}

fn mixing(cfg: &ExperimentConfig) -> Result<Outcome> {
    let solver = cfg.solver()?;
    let grid = *solver.grid();
    let m = &cfg.mixing;
    let starts: Vec<InitialLaw> =
        m.starts.iter().map(|a| InitialLaw::point(format!("start_{}", fmt_num(*a)), Field::constant(grid, *a))).collect();
    let reference_seed_law = InitialLaw {
        name: "reference_seed".into(),
        points: m.starts.iter().map(|a| Field::constant(grid, *a)).collect(),
    };
    let spec = MixingSpec {
        n_traj: m.n_traj,
        k_max: m.k_max,
        starts,
        reference_seed_law,
        noise: cfg.noise_spec()?,
        seed: cfg.seed,
    };
    let obs = ObservableSet::new(grid, m.obs_modes, true, true)?;
    let res = mixing_curves(&solver, &obs, &spec)?;
    let mut o = Outcome::new();
    let last: Vec<String> = res.curves.iter().map(|(n, c)| format!("{n} {}", fmt_num(c[m.k_max]))).collect();
    o.summary.push(format!("gamma at k_max: {}; floor {}", last.join(", "), fmt_num(res.noise_floor)));
    o.files.push(("mixing_curves.csv".into(), res.to_csv(&spec)));
    if m.dump {
        for (i, ens) in res.ensembles.iter().enumerate() {
            o.files.push((format!("ensemble_{i}.csv"), ens.to_csv()));
        }
    }
    if res.blowups > 0 {
        o.failure = Some(Error::BlowUp { time: f64::NAN });
    }
    Ok(o)
}

fn ladder(cfg: &ExperimentConfig) -> Result<Outcome> {
    let solver = cfg.solver()?;
    let l = &cfg.ladder;
    let spec = LadderSpec {
        radius: l.radius,
        perturbation_modes: l.modes,
        n_pairs: l.pairs,
        theta: l.theta,
        k_max: l.k_max,
        walk_p: l.walk_p,
        seed: cfg.seed,
    };
    let noise = cfg.noise_spec()?;
    let center = Field::constant(*solver.grid(), l.center);
    let rep = ladder_experiment(&solver, &center, Some(&noise), &spec)?;
    let mut o = Outcome::new();
    o.summary.push(format!(
        "up frequency {} ({} s.e.), one-sided p-value {}",
        fmt_num(rep.up_frequency),
        fmt_num(rep.up_stderr),
        fmt_num(rep.test.p_value)
    ));
    o.files.push(("ladder.csv".into(), rep.to_csv(&spec)));
    Ok(o)
}
