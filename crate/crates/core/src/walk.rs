//! The ±1 walk with up-probability `p > 1/2`: closed forms for survival,
//! gambler's ruin and exponential tails, and a sharded Monte Carlo engine.
//!
//! Monte Carlo paths are grouped in fixed shards of [`SHARD`] paths, each
//! with its own ChaCha8 stream keyed by the shard number, so estimates do not
//! depend on the number of worker threads. A step is `+1` when a uniform
//! 32-bit word falls below `⌊p·2³²⌋`.

use std::ops::{Add, Div, Mul, Sub};

use num_rational::Ratio;
use num_traits::One;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{domain_err, Result};
use crate::haar::mix_seed;
use crate::report::{fmt_num, CsvTable};

pub const SHARD: usize = 1024;
const MC_TAG: u64 = 0x57a1_4b00;
const PATH_TAG: u64 = 0x57a1_4b01;

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.5 && p < 1.0) {
        return Err(domain_err(format!("the walk needs p in (1/2, 1), got {p}")));
    }
    Ok(())
}

/// `κ_p = (1 − p)/p`.
pub fn kappa(p: f64) -> f64 {
    (1.0 - p) / p
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WalkConfig {
    pub p: f64,
    pub horizon: usize,
}

impl WalkConfig {
    pub fn new(p: f64, horizon: usize) -> Result<Self> {
        check_p(p)?;
        Ok(Self { p, horizon })
    }

    pub fn drift(&self) -> f64 {
        2.0 * self.p - 1.0
    }
}

/// Bernoulli ±1 steps with `P(+1) = ⌊p·2³²⌋/2³²`. The leading byte of the
/// 32-bit comparison decides all but 1/256 of the steps; ties draw the
/// remaining 24 bits.
struct Steps {
    rng: ChaCha8Rng,
    hi: u8,
    lo: u32,
    word: u64,
    left: u32,
}

impl Steps {
    fn new(p: f64, seed: u64) -> Self {
        let threshold = (p * 4_294_967_296.0).floor().min(u32::MAX as f64) as u32;
        Self { rng: ChaCha8Rng::seed_from_u64(seed), hi: (threshold >> 24) as u8, lo: threshold & 0xff_ffff, word: 0, left: 0 }
    }

    #[inline]
    fn resolve(&mut self, b: u8) -> bool {
        b < self.hi || (b == self.hi && (self.rng.next_u32() & 0xff_ffff) < self.lo)
    }

    #[inline]
    fn up(&mut self) -> bool {
        if self.left == 0 {
            self.word = self.rng.next_u64();
            self.left = 8;
        }
        self.left -= 1;
        let b = self.word as u8;
        self.word >>= 8;
        self.resolve(b)
    }

    /// Number of up-steps among the next 64; consumes the stream exactly as
    /// 64 calls of [`Steps::up`] would.
    #[inline]
    fn block(&mut self) -> u32 {
        let mut ups = 0;
        let mut count = 0;
        while self.left > 0 && count < 64 {
            ups += self.up() as u32;
            count += 1;
        }
        while count + 8 <= 64 {
            let w = self.rng.next_u64();
            let (mut less, mut tie) = (0u32, false);
            for i in 0..8 {
                let b = (w >> (8 * i)) as u8;
                less += (b < self.hi) as u32;
                tie |= b == self.hi;
            }
            if tie {
                less = 0;
                for i in 0..8 {
                    less += self.resolve((w >> (8 * i)) as u8) as u32;
                }
            }
            ups += less;
            count += 8;
        }
        while count < 64 {
            ups += self.up() as u32;
            count += 1;
        }
        ups
    }
}

/// A simulated path: steps `w_1..w_n` and partial sums `ζ_0 = 0, …, ζ_n`.
#[derive(Clone, Debug)]
pub struct WalkPath {
    pub p: f64,
    pub steps: Vec<i8>,
    pub sums: Vec<i64>,
}

impl WalkPath {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `M_k = ζ_k − (2p − 1)k`.
    pub fn compensated(&self, k: usize) -> f64 {
        self.sums[k] as f64 - (2.0 * self.p - 1.0) * k as f64
    }
}

pub fn simulate_walk(cfg: &WalkConfig, seed: u64) -> WalkPath {
    let mut s = Steps::new(cfg.p, mix_seed(seed, PATH_TAG, 0));
    let mut steps = Vec::with_capacity(cfg.horizon);
    let mut sums = Vec::with_capacity(cfg.horizon + 1);
    sums.push(0);
    let mut z = 0i64;
    for _ in 0..cfg.horizon {
        let w: i8 = if s.up() { 1 } else { -1 };
        z += w as i64;
        steps.push(w);
        sums.push(z);
    }
    WalkPath { p: cfg.p, steps, sums }
}

/// `P{ζ_k > −l for all k ≥ 0} = 1 − κ_p^l`.
pub fn survival_exact(p: f64, l: u32) -> Result<f64> {
    check_p(p)?;
    Ok(1.0 - kappa(p).powi(l as i32))
}

fn ipow<T: Clone + One + Mul<Output = T> + Div<Output = T>>(x: &T, e: i64) -> T {
    let mut acc = T::one();
    for _ in 0..e.unsigned_abs() {
        acc = acc * x.clone();
    }
    if e < 0 {
        T::one() / acc
    } else {
        acc
    }
}

/// `(κ^m − κ^b)/(κ^a − κ^b)` in any field.
pub fn ruin_formula<T>(kappa: &T, m: i64, a: i64, b: i64) -> Result<T>
where
    T: Clone + One + Add<Output = T> + Sub<Output = T> + Mul<Output = T> + Div<Output = T>,
{
    if !(a <= m && m <= b && a < b) {
        return Err(domain_err(format!("ruin needs a ≤ m ≤ b and a < b, got a={a}, m={m}, b={b}")));
    }
    let kb = ipow(kappa, b);
    Ok((ipow(kappa, m) - kb.clone()) / (ipow(kappa, a) - kb))
}

/// Probability of reaching `a` before `b` from `m`.
pub fn ruin_exact(p: f64, m: i64, a: i64, b: i64) -> Result<f64> {
    check_p(p)?;
    if m == a && a < b {
        return Ok(1.0);
    }
    if m == b && a < b {
        return Ok(0.0);
    }
    ruin_formula(&kappa(p), m, a, b)
}

/// [`ruin_exact`] in exact rational arithmetic for rational `p`.
pub fn ruin_exact_rational(p: Ratio<i128>, m: i64, a: i64, b: i64) -> Result<Ratio<i128>> {
    let half = Ratio::new(1, 2);
    if !(p > half && p < Ratio::one()) {
        return Err(domain_err(format!("the walk needs p in (1/2, 1), got {p}")));
    }
    ruin_formula(&((Ratio::one() - p) / p), m, a, b)
}

/// Validity window `0 < ε ≤ p²(1 − p)²` of the exponential tail estimate.
pub fn tail_window(p: f64) -> f64 {
    (p * (1.0 - p)).powi(2)
}

/// Rates of the exponential tail estimate for `−M_k ≥ εk`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailRates {
    /// `γ = ε²/(16p(1−p))`.
    pub gamma: f64,
    /// `α = ε²/(32p(1−p))`.
    pub alpha: f64,
}

pub fn tail_rates(p: f64, eps: f64) -> Result<TailRates> {
    check_p(p)?;
    let w = tail_window(p);
    if !(eps > 0.0 && eps <= w) {
        return Err(domain_err(format!("the tail estimate requires 0 < ε ≤ p²(1−p)² = {w}, got ε = {eps}")));
    }
    let v = p * (1.0 - p);
    Ok(TailRates { gamma: eps * eps / (16.0 * v), alpha: eps * eps / (32.0 * v) })
}

/// `e^{−γk}`, an upper bound for `P{−M_k ≥ εk}`.
pub fn tail_bound(p: f64, eps: f64, k: u64) -> Result<f64> {
    Ok((-tail_rates(p, eps)?.gamma * k as f64).exp())
}

/// `α = ε²/(32p(1−p))` with `ε = 2p − 1 − c`, without the window restriction.
pub fn drift_alpha(p: f64, c: f64) -> Result<f64> {
    check_drift(p, c)?;
    let eps = 2.0 * p - 1.0 - c;
    Ok(eps * eps / (32.0 * p * (1.0 - p)))
}

fn check_drift(p: f64, c: f64) -> Result<()> {
    check_p(p)?;
    if !(c > 0.0 && c < 2.0 * p - 1.0) {
        return Err(domain_err(format!("drift constant must lie in (0, 2p−1) = (0, {}), got {c}", 2.0 * p - 1.0)));
    }
    Ok(())
}

/// `p_l = 1 − κ_p^{⌊(1−c)l⌋} − C e^{−αl}`, clipped to `[0, 1]`.
pub fn survival_lower_bound(p: f64, c: f64, l: u32, c_tail: f64, alpha: f64) -> Result<f64> {
    check_drift(p, c)?;
    if !(c_tail >= 0.0 && c_tail.is_finite() && alpha > 0.0 && alpha.is_finite()) {
        return Err(domain_err(format!("need C ≥ 0 and α > 0, got C = {c_tail}, α = {alpha}")));
    }
    let e = ((1.0 - c) * l as f64).floor() as i32;
    let v = 1.0 - kappa(p).powi(e) - c_tail * (-alpha * l as f64).exp();
    Ok(v.clamp(0.0, 1.0))
}

/// Bound on `P{first passage below −l happens after step n}`: either
/// `ζ_n ≤ (2p−1)n/2` (Hoeffding) or the walk later falls by more than
/// `(2p−1)n/2 + l` (survival formula).
pub fn truncation_bias_bound(p: f64, l: u32, n: usize) -> Result<f64> {
    check_p(p)?;
    let d = 2.0 * p - 1.0;
    let n = n as f64;
    Ok((-(d * d) * n / 8.0).exp() + kappa(p).powf(l as f64 + d * n / 2.0))
}

/// Events measurable with respect to a walk started at 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WalkEvent {
    Always,
    /// `ζ_k > −l` for all `k ≤ horizon`.
    Survival { l: i64 },
    /// Starting from `m`, the level `a` is hit before `b` within the horizon.
    Ruin { m: i64, a: i64, b: i64 },
    /// `−M_k ≥ εk` at the fixed time `k`.
    Tail { eps: f64, k: usize },
    /// `ζ_k ≥ −l + ck` for all `k ≤ horizon`.
    DriftSurvival { l: f64, c: f64 },
}

impl WalkEvent {
    /// Steps needed to decide the event.
    fn horizon(&self, horizon: usize) -> usize {
        match self {
            WalkEvent::Always => 0,
            WalkEvent::Tail { k, .. } => *k,
            _ => horizon,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            WalkEvent::Always => "always".into(),
            WalkEvent::Survival { l } => format!("survival_l{l}"),
            WalkEvent::Ruin { m, a, b } => format!("ruin_m{m}_a{a}_b{b}"),
            WalkEvent::Tail { eps, k } => format!("tail_eps{eps}_k{k}"),
            WalkEvent::DriftSurvival { l, c } => format!("drift_survival_l{l}_c{c}"),
        }
    }
}

/// Decision state of one event along one path.
#[derive(Clone, Copy, PartialEq)]
enum Track {
    Open,
    Yes,
    No,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: u64,
}

impl McEstimate {
    fn from_count(hits: u64, n: u64) -> Self {
        let p = hits as f64 / n as f64;
        Self { estimate: p, stderr: (p * (1.0 - p) / n as f64).sqrt(), samples: n }
    }

    /// `|estimate − value| ≤ z·stderr`.
    pub fn agrees(&self, value: f64, z: f64) -> bool {
        (self.estimate - value).abs() <= z * self.stderr
    }
}

fn initial_track(e: &WalkEvent) -> Track {
    match *e {
        WalkEvent::Always => Track::Yes,
        WalkEvent::Survival { l } if l <= 0 => Track::No,
        WalkEvent::Ruin { m, a, .. } if m <= a => Track::Yes,
        WalkEvent::Ruin { m, b, .. } if m >= b => Track::No,
        WalkEvent::Tail { k: 0, .. } => Track::Yes,
        WalkEvent::DriftSurvival { l, .. } if l < 0.0 => Track::No,
        _ => Track::Open,
    }
}

fn update(e: &WalkEvent, z: i64, k: usize, drift: f64) -> Track {
    match *e {
        WalkEvent::Survival { l } if z <= -l => Track::No,
        WalkEvent::Ruin { m, a, .. } if m + z <= a => Track::Yes,
        WalkEvent::Ruin { m, b, .. } if m + z >= b => Track::No,
        WalkEvent::Tail { eps, k: kk } if k == kk => {
            // −M_k ≥ εk  ⇔  ζ_k ≤ (2p − 1 − ε)k
            if z as f64 <= (drift - eps) * k as f64 {
                Track::Yes
            } else {
                Track::No
            }
        }
        WalkEvent::DriftSurvival { l, c } if (z as f64) < -l + c * k as f64 => Track::No,
        _ => Track::Open,
    }
}

/// Resolution of events still open at the horizon.
fn at_horizon(e: &WalkEvent) -> Track {
    match e {
        WalkEvent::Survival { .. } | WalkEvent::DriftSurvival { .. } | WalkEvent::Always => Track::Yes,
        WalkEvent::Ruin { .. } | WalkEvent::Tail { .. } => Track::No,
    }
}

/// True when the event cannot be decided during the next 64 steps from
/// `(k, ζ_k = z)`, except at their end.
fn block_safe(e: &WalkEvent, z: i64, k: usize) -> bool {
    match *e {
        WalkEvent::Always => true,
        WalkEvent::Survival { l } => z - 64 > -l,
        WalkEvent::Ruin { m, a, b } => m + z - 64 > a && m + z + 64 < b,
        WalkEvent::Tail { k: kk, .. } => k + 64 <= kk,
        WalkEvent::DriftSurvival { l, c } => (z - 64) as f64 >= -l + c * (k + 64) as f64,
    }
}

fn run_path(events: &[WalkEvent], horizon: usize, drift: f64, steps: &mut Steps, tracks: &mut [Track]) {
    let mut open = 0;
    let mut longest = 0;
    for (t, e) in tracks.iter_mut().zip(events) {
        *t = initial_track(e);
        if *t == Track::Open {
            open += 1;
            longest = longest.max(e.horizon(horizon));
        }
    }
    let mut z = 0i64;
    let mut k = 0usize;
    while open > 0 && k < longest {
        let safe = k + 64 <= longest
            && events.iter().zip(tracks.iter()).all(|(e, t)| *t != Track::Open || block_safe(e, z, k));
        if safe {
            z += 2 * steps.block() as i64 - 64;
            k += 64;
            for (t, e) in tracks.iter_mut().zip(events) {
                if *t == Track::Open {
                    *t = update(e, z, k, drift);
                    if *t != Track::Open {
                        open -= 1;
                    }
                }
            }
            continue;
        }
        z += if steps.up() { 1 } else { -1 };
        k += 1;
        for (t, e) in tracks.iter_mut().zip(events) {
            if *t == Track::Open {
                *t = update(e, z, k, drift);
                if *t != Track::Open {
                    open -= 1;
                }
            }
        }
    }
    for (t, e) in tracks.iter_mut().zip(events) {
        if *t == Track::Open {
            *t = at_horizon(e);
        }
    }
}

fn shard_count(n: u64) -> u64 {
    n.div_ceil(SHARD as u64)
}

fn shard_range(n: u64, s: u64) -> u64 {
    (n - s * SHARD as u64).min(SHARD as u64)
}

/// Monte Carlo frequencies of several events on `n` shared paths.
pub fn mc_probabilities(events: &[WalkEvent], cfg: &WalkConfig, n: u64, seed: u64) -> Result<Vec<McEstimate>> {
    check_p(cfg.p)?;
    if n == 0 {
        return Err(domain_err("Monte Carlo needs at least one sample"));
    }
    let drift = cfg.drift();
    let hits = (0..shard_count(n))
        .into_par_iter()
        .map(|s| {
            let mut steps = Steps::new(cfg.p, mix_seed(seed, MC_TAG, s));
            let mut tracks = vec![Track::Open; events.len()];
            let mut hits = vec![0u64; events.len()];
            for _ in 0..shard_range(n, s) {
                run_path(events, cfg.horizon, drift, &mut steps, &mut tracks);
                for (h, t) in hits.iter_mut().zip(&tracks) {
                    *h += (*t == Track::Yes) as u64;
                }
            }
            hits
        })
        .reduce(|| vec![0u64; events.len()], |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect());
    Ok(hits.iter().map(|&h| McEstimate::from_count(h, n)).collect())
}

pub fn mc_probability(event: WalkEvent, cfg: &WalkConfig, n: u64, seed: u64) -> Result<McEstimate> {
    Ok(mc_probabilities(&[event], cfg, n, seed)?[0])
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McMean {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
    /// Paths whose `τ` could not be certified within the horizon.
    pub censored: u64,
}

/// Monte Carlo estimate of `C = E e^{ατ}` with
/// `τ = min{n ≥ 1 : M_k ≥ −εk for all k ≥ n}`, observed up to the horizon.
pub fn c_tail_estimate(cfg: &WalkConfig, eps: f64, alpha: f64, n: u64, seed: u64) -> Result<McMean> {
    check_p(cfg.p)?;
    if n == 0 || !(eps > 0.0) {
        return Err(domain_err("C estimate needs n ≥ 1 and ε > 0"));
    }
    let drift = cfg.drift();
    let horizon = cfg.horizon;
    let (s1, s2, censored) = (0..shard_count(n))
        .into_par_iter()
        .map(|s| {
            let mut steps = Steps::new(cfg.p, mix_seed(seed, MC_TAG ^ 0xc, s));
            let (mut s1, mut s2, mut censored) = (0.0, 0.0, 0u64);
            for _ in 0..shard_range(n, s) {
                let mut z = 0i64;
                let mut last_bad = 0usize;
                let mut k = 0;
                while k < horizon {
                    // no violation of ζ_j ≥ (2p − 1 − ε)j is possible inside the block
                    if k + 64 <= horizon && (z - 64) as f64 >= (drift - eps) * (k + 64) as f64 {
                        z += 2 * steps.block() as i64 - 64;
                        k += 64;
                        continue;
                    }
                    z += if steps.up() { 1 } else { -1 };
                    k += 1;
                    if (z as f64) - drift * (k as f64) < -eps * k as f64 {
                        last_bad = k;
                    }
                }
                if last_bad == horizon {
                    censored += 1;
                }
                let v = (alpha * (last_bad + 1) as f64).exp();
                s1 += v;
                s2 += v * v;
            }
            (s1, s2, censored)
        })
        .reduce(|| (0.0, 0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    let nf = n as f64;
    let mean = s1 / nf;
    let var = if n > 1 { ((s2 - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
    Ok(McMean { mean, stderr: (var / nf).sqrt(), samples: n, censored })
}

/// Parameters of the standard exact-versus-simulated table.
#[derive(Clone, Debug)]
pub struct WalkTableSpec {
    pub p: f64,
    pub horizon: usize,
    pub samples: u64,
    pub survival_levels: Vec<u32>,
    pub tail_eps: f64,
    pub tail_times: Vec<usize>,
    pub drift_c: f64,
    pub drift_level: u32,
    pub seed: u64,
}

impl Default for WalkTableSpec {
    fn default() -> Self {
        Self {
            p: 0.75,
            horizon: 10_000,
            samples: 200_000,
            survival_levels: vec![1, 2, 3],
            tail_eps: 0.03,
            tail_times: vec![500, 1000, 2000],
            drift_c: 0.25,
            drift_level: 8,
            seed: 0,
        }
    }
}

/// CSV rows `(quantity, exact, estimate, stderr, N, seed)`; for tails and the
/// lower bound `p_l` the exact column holds the bound.
pub fn walk_table(spec: &WalkTableSpec) -> Result<CsvTable> {
    let cfg = WalkConfig::new(spec.p, spec.horizon)?;
    let mut events: Vec<WalkEvent> = spec.survival_levels.iter().map(|&l| WalkEvent::Survival { l: l as i64 }).collect();
    events.push(WalkEvent::Ruin { m: 0, a: -1, b: 1 });
    let l = spec.drift_level as f64;
    events.push(WalkEvent::DriftSurvival { l, c: spec.drift_c });
    let mut est = mc_probabilities(&events, &cfg, spec.samples, spec.seed)?;
    let tails: Vec<WalkEvent> = spec.tail_times.iter().map(|&k| WalkEvent::Tail { eps: spec.tail_eps, k }).collect();
    est.extend(mc_probabilities(&tails, &cfg, spec.samples, spec.seed ^ 1)?);
    let alpha = drift_alpha(spec.p, spec.drift_c)?;
    let eps_c = 2.0 * spec.p - 1.0 - spec.drift_c;
    let c_tail = c_tail_estimate(&cfg, eps_c, alpha, spec.samples.min(20_000), spec.seed ^ 2)?;

    let mut t = CsvTable::new(["quantity", "exact", "estimate", "stderr", "N", "seed"]);
    let trunc = spec.survival_levels.iter().map(|&l| truncation_bias_bound(spec.p, l, spec.horizon)).collect::<Result<Vec<_>>>()?;
    t.comment(format!("p = {}", fmt_num(spec.p)))
        .comment(format!("horizon = {}", spec.horizon))
        .comment(format!("truncation_bias_bound = {}", fmt_num(trunc.iter().fold(0.0, |a: f64, b| a.max(*b)))))
        .comment(format!("c_tail = {} +- {} (censored {})", fmt_num(c_tail.mean), fmt_num(c_tail.stderr), c_tail.censored));
    let mut row = |q: String, exact: f64, e: &McEstimate| {
        t.row([q, fmt_num(exact), fmt_num(e.estimate), fmt_num(e.stderr), e.samples.to_string(), spec.seed.to_string()]);
    };
    let mut it = est.iter();
    for &l in &spec.survival_levels {
        row(format!("survival_l{l}"), survival_exact(spec.p, l)?, it.next().expect("estimate"));
    }
    row("ruin_m0_a-1_b1".into(), ruin_exact(spec.p, 0, -1, 1)?, it.next().expect("estimate"));
    let lower = survival_lower_bound(spec.p, spec.drift_c, spec.drift_level, c_tail.mean, alpha)?;
    row(format!("lower_bound_l{}_c{}", spec.drift_level, spec.drift_c), lower, it.next().expect("estimate"));
    for &k in &spec.tail_times {
        row(format!("tail_k{k}"), tail_bound(spec.p, spec.tail_eps, k as u64)?, it.next().expect("estimate"));
    }
    Ok(t)
}
