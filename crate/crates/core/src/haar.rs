//! Haar coloured noise: truncated Haar series with compactly supported,
//! i.i.d. coefficients, one scalar path per direction of the control space.
//!
//! The Haar functions are sup-normalized: `h_0 ≡ 1` and `h_{jl}` equals `+1`
//! on the left half of its dyadic support `[l 2^{1-j}, (l+1) 2^{1-j})`,
//! `-1` on the right half and `0` elsewhere. With coefficients in `[-1, 1]`
//! every path is bounded by `1 + Σ_j c_j`.
//!
//! Coefficients are stored in heap order: index `0` is `ξ_0`, index
//! `2^{j-1} + l` is `ξ_{jl}`. Each coefficient is drawn from its own ChaCha8
//! stream seeded by [`mix_seed`]`(seed, mode, index)`; that derivation is part
//! of the kick file contract.

use std::io::BufRead;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{config_err, domain_err, Error, Result};
use crate::report::{fmt_num, CsvTable};

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sub-seed for stream `(a, b)` of a master seed.
pub fn mix_seed(master: u64, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ a) ^ b.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Index of a Haar function; `(0, 0)` is the constant `h_0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HaarIndex {
    level: u32,
    shift: u32,
}

impl HaarIndex {
    pub const CONSTANT: HaarIndex = HaarIndex { level: 0, shift: 0 };

    pub fn new(level: u32, shift: u32) -> Result<Self> {
        let ok = if level == 0 { shift == 0 } else { level <= 40 && (shift as u64) < (1u64 << (level - 1)) };
        if !ok {
            return Err(Error::InvalidIndex { level, shift });
        }
        Ok(Self { level, shift })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn shift(&self) -> u32 {
        self.shift
    }

    /// Support `[a, b)` of the function.
    pub fn support(&self) -> (f64, f64) {
        if self.level == 0 {
            return (0.0, 1.0);
        }
        let w = 0.5_f64.powi(self.level as i32 - 1);
        (self.shift as f64 * w, (self.shift + 1) as f64 * w)
    }

    /// Position in heap order.
    pub fn heap_position(&self) -> usize {
        if self.level == 0 {
            0
        } else {
            (1usize << (self.level - 1)) + self.shift as usize
        }
    }

    fn eval_unchecked(&self, t: f64) -> f64 {
        if self.level == 0 {
            return 1.0;
        }
        let (a, b) = self.support();
        if t < a || t >= b {
            0.0
        } else if t < 0.5 * (a + b) {
            1.0
        } else {
            -1.0
        }
    }
}

/// `h_idx(t)` for `t ∈ [0, 1)`.
pub fn haar_eval(idx: HaarIndex, t: f64) -> Result<f64> {
    check_time(t)?;
    Ok(idx.eval_unchecked(t))
}

fn check_time(t: f64) -> Result<()> {
    if !(0.0..1.0).contains(&t) {
        return Err(domain_err(format!("time {t} outside [0, 1)")));
    }
    Ok(())
}

/// Law of the scalar coefficients `ξ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum XiDensity {
    /// `ρ(x) = (3/4)(1 − x²)` on `[-1, 1]`.
    Parabolic,
    /// `ρ(x) = 1 − |x|` on `[-1, 1]`.
    Triangular,
}

impl XiDensity {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "parabolic" => Ok(Self::Parabolic),
            "triangular" => Ok(Self::Triangular),
            other => Err(config_err(format!("unknown density '{other}' (expected parabolic or triangular)"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Parabolic => "parabolic",
            Self::Triangular => "triangular",
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x.abs() > 1.0 {
            return 0.0;
        }
        match self {
            Self::Parabolic => 0.75 * (1.0 - x * x),
            Self::Triangular => 1.0 - x.abs(),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(-1.0, 1.0);
        match self {
            Self::Parabolic => 0.5 + 0.75 * x - 0.25 * x * x * x,
            Self::Triangular => {
                if x < 0.0 {
                    0.5 * (1.0 + x) * (1.0 + x)
                } else {
                    1.0 - 0.5 * (1.0 - x) * (1.0 - x)
                }
            }
        }
    }

    fn pdf_max(&self) -> f64 {
        match self {
            Self::Parabolic => 0.75,
            Self::Triangular => 1.0,
        }
    }

    /// Rejection sampling against the uniform law on `[-1,1] × [0, max ρ]`.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        loop {
            let x: f64 = rng.random_range(-1.0..1.0);
            let y: f64 = rng.random_range(0.0..self.pdf_max());
            if y < self.pdf(x) {
                return x;
            }
        }
    }
}

/// Parameters of one scalar Haar process.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarNoiseConfig {
    amplitude: f64,
    decay: f64,
    max_level: u32,
    density: XiDensity,
}

impl ScalarNoiseConfig {
    pub fn new(amplitude: f64, decay: f64, max_level: u32, density: XiDensity) -> Result<Self> {
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(config_err(format!("noise amplitude C must be > 0, got {amplitude}")));
        }
        if !(decay > 1.0 && decay.is_finite()) {
            return Err(config_err(format!("noise decay exponent q must satisfy q > 1, got {decay}")));
        }
        if !(1..=20).contains(&max_level) {
            return Err(config_err(format!("Haar level truncation must lie in 1..=20, got {max_level}")));
        }
        Ok(Self { amplitude, decay, max_level, density })
    }

    /// `C = 1`, `q = 2`, `J_max = 10`, parabolic density.
    pub fn standard() -> Self {
        Self { amplitude: 1.0, decay: 2.0, max_level: 10, density: XiDensity::Parabolic }
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    pub fn density(&self) -> XiDensity {
        self.density
    }

    /// `c_j = C j^{-q}`.
    pub fn level_weight(&self, j: u32) -> f64 {
        self.amplitude * (j as f64).powf(-self.decay)
    }

    /// `Σ_{j ≤ J_max} c_j`.
    pub fn weight_sum(&self) -> f64 {
        (1..=self.max_level).map(|j| self.level_weight(j)).sum()
    }

    /// Bound `C Σ_{j > J_max} j^{-q} ≤ C J_max^{1-q} / (q − 1)` on the
    /// discarded weights.
    pub fn truncation_tail_bound(&self) -> f64 {
        self.amplitude * (self.max_level as f64).powf(1.0 - self.decay) / (self.decay - 1.0)
    }

    /// `1 + Σ_{j ≤ J_max} c_j`.
    pub fn sup_bound(&self) -> f64 {
        1.0 + self.weight_sum()
    }

    /// Number of coefficients per path, `2^{J_max}`.
    pub fn coefficient_count(&self) -> usize {
        1usize << self.max_level
    }

    fn index_of(&self, pos: usize) -> HaarIndex {
        if pos == 0 {
            return HaarIndex::CONSTANT;
        }
        let level = usize::BITS - pos.leading_zeros();
        HaarIndex { level, shift: (pos - (1usize << (level - 1))) as u32 }
    }
}

/// One realization of the truncated scalar Haar series on `[0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HaarPath {
    config: ScalarNoiseConfig,
    seed: u64,
    coeffs: Vec<f64>,
    cells: Vec<f64>,
}

impl HaarPath {
    /// Path from explicit coefficients in heap order.
    pub fn from_coefficients(config: ScalarNoiseConfig, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != config.coefficient_count() {
            return Err(Error::Shape { expected: config.coefficient_count(), got: coeffs.len() });
        }
        if coeffs.iter().any(|c| !(-1.0..=1.0).contains(c)) {
            return Err(domain_err("Haar coefficients must lie in [-1, 1]"));
        }
        Ok(Self::assemble(config, 0, coeffs))
    }

    fn assemble(config: ScalarNoiseConfig, seed: u64, coeffs: Vec<f64>) -> Self {
        let levels = config.max_level;
        let ncell = 1usize << levels;
        let weights: Vec<f64> = (1..=levels).map(|j| config.level_weight(j)).collect();
        let cells = (0..ncell)
            .map(|c| {
                let mut v = coeffs[0];
                for j in 1..=levels {
                    // cell c lies in support block c >> (J - j + 1); the half is bit (J - j)
                    let shift = c >> (levels - j + 1);
                    let right = (c >> (levels - j)) & 1 == 1;
                    let xi = coeffs[(1usize << (j - 1)) + shift];
                    let s = if right { -1.0 } else { 1.0 };
                    v += weights[j as usize - 1] * xi * s;
                }
                v
            })
            .collect();
        Self { config, seed, coeffs, cells }
    }

    /// Draws the path of control direction `mode` for master `seed`.
    pub fn sample_mode(config: &ScalarNoiseConfig, seed: u64, mode: u64) -> Self {
        let coeffs = (0..config.coefficient_count())
            .map(|pos| {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, mode, pos as u64));
                config.density.sample(&mut rng)
            })
            .collect();
        Self::assemble(config.clone(), seed, coeffs)
    }

    pub fn config(&self) -> &ScalarNoiseConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// All coefficients in heap order.
    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coefficient(&self, idx: HaarIndex) -> Option<f64> {
        (idx.level <= self.config.max_level).then(|| self.coeffs[idx.heap_position()])
    }

    /// Values on the `2^{J_max}` dyadic cells where the path is constant.
    pub fn cell_values(&self) -> &[f64] {
        &self.cells
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.cells[cell_of(t, self.cells.len())])
    }

    pub fn sup_norm(&self) -> f64 {
        self.cells.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Iterator over `(index, ξ)` pairs.
    pub fn indexed_coefficients(&self) -> impl Iterator<Item = (HaarIndex, f64)> + '_ {
        self.coeffs.iter().enumerate().map(|(p, &x)| (self.config.index_of(p), x))
    }
}

fn cell_of(t: f64, ncell: usize) -> usize {
    ((t * ncell as f64) as usize).min(ncell - 1)
}

/// Exact mean of a piecewise-constant function with equal cells over `[t0, t1]`.
pub(crate) fn cell_average(cells: &[f64], t0: f64, t1: f64) -> f64 {
    let n = cells.len() as f64;
    if t1 <= t0 {
        return cells[cell_of(t0.clamp(0.0, 1.0), cells.len())];
    }
    let first = cell_of(t0, cells.len());
    let last = cell_of((t1 - 1e-15).max(t0), cells.len());
    let mut acc = 0.0;
    for (c, v) in cells.iter().enumerate().take(last + 1).skip(first) {
        let a = (c as f64 / n).max(t0);
        let b = ((c + 1) as f64 / n).min(t1);
        if b > a {
            acc += v * (b - a);
        }
    }
    acc / (t1 - t0)
}

/// Scalar path for `seed` (the path of mode `0`).
pub fn sample_scalar_path(config: &ScalarNoiseConfig, seed: u64) -> HaarPath {
    HaarPath::sample_mode(config, seed, 0)
}

/// One kick `η_k(t,x) = Σ_i b_i η^i(t) φ_i(x)` on a unit interval.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseKick {
    paths: Vec<HaarPath>,
    amplitudes: Vec<f64>,
    scaled_cells: Vec<Vec<f64>>,
}

impl NoiseKick {
    pub fn new(paths: Vec<HaarPath>, amplitudes: Vec<f64>) -> Result<Self> {
        check_amplitudes(&amplitudes)?;
        if paths.len() != amplitudes.len() {
            return Err(Error::Shape { expected: amplitudes.len(), got: paths.len() });
        }
        let scaled_cells = paths
            .iter()
            .zip(&amplitudes)
            .map(|(p, b)| p.cells.iter().map(|v| b * v).collect())
            .collect();
        Ok(Self { paths, amplitudes, scaled_cells })
    }

    pub fn modes(&self) -> usize {
        self.paths.len()
    }

    pub fn paths(&self) -> &[HaarPath] {
        &self.paths
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    /// `(b_i η^i(t))_i`.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        check_time(t)?;
        Ok(self
            .scaled_cells
            .iter()
            .map(|c| c[cell_of(t, c.len())])
            .collect())
    }

    /// Time averages of `b_i η^i` over `[t0, t1]`.
    pub fn average_into(&self, t0: f64, t1: f64, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.scaled_cells) {
            *o = cell_average(c, t0, t1);
        }
    }

    /// Largest `|b_i η^i(t)|` over modes and times.
    pub fn sup_norm(&self) -> f64 {
        self.scaled_cells
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn to_csv(&self) -> CsvTable {
        let cfg = self.paths.first().map(|p| p.config.clone()).unwrap_or_else(ScalarNoiseConfig::standard);
        let mut t = CsvTable::new(["mode_index", "j", "l", "xi"]);
        t.comment("haar kick")
            .comment(format!("amplitude_C = {}", fmt_num(cfg.amplitude)))
            .comment(format!("decay_q = {}", fmt_num(cfg.decay)))
            .comment(format!("max_level = {}", cfg.max_level))
            .comment(format!("density = {}", cfg.density.name()))
            .comment(format!("seed = {}", self.paths.first().map(|p| p.seed).unwrap_or(0)))
            .comment(format!(
                "mode_amplitudes = {}",
                self.amplitudes.iter().map(|b| fmt_num(*b)).collect::<Vec<_>>().join(";")
            ));
        for (i, p) in self.paths.iter().enumerate() {
            for (idx, xi) in p.indexed_coefficients() {
                t.row([i.to_string(), idx.level.to_string(), idx.shift.to_string(), fmt_num(xi)]);
            }
        }
        t
    }

    /// Parses a kick written by [`NoiseKick::to_csv`].
    pub fn from_csv(reader: impl BufRead) -> Result<Self> {
        let mut meta = std::collections::BTreeMap::new();
        let mut rows: Vec<(usize, u32, u32, f64)> = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let perr = |m: &str| Error::Parse { line: n + 1, message: m.to_string() };
            if let Some(c) = line.strip_prefix('#') {
                if let Some((k, v)) = c.split_once('=') {
                    meta.insert(k.trim().to_string(), v.trim().to_string());
                }
                continue;
            }
            if line.starts_with("mode_index") || line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(perr("expected 4 columns"));
            }
            let bad = || perr("malformed number");
            rows.push((
                f[0].parse().map_err(|_| bad())?,
                f[1].parse().map_err(|_| bad())?,
                f[2].parse().map_err(|_| bad())?,
                f[3].parse().map_err(|_| bad())?,
            ));
        }
        let get = |k: &str| meta.get(k).ok_or_else(|| config_err(format!("kick file lacks '{k}'")));
        let num = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| config_err(format!("bad '{k}'"))) };
        let cfg = ScalarNoiseConfig::new(
            num("amplitude_C")?,
            num("decay_q")?,
            get("max_level")?.parse().map_err(|_| config_err("bad 'max_level'"))?,
            XiDensity::parse(get("density")?)?,
        )?;
        let seed: u64 = get("seed")?.parse().map_err(|_| config_err("bad 'seed'"))?;
        let amplitudes: Vec<f64> = get("mode_amplitudes")?
            .split(';')
            .map(|s| s.parse().map_err(|_| config_err("bad 'mode_amplitudes'")))
            .collect::<Result<_>>()?;
        let mut coeffs = vec![vec![f64::NAN; cfg.coefficient_count()]; amplitudes.len()];
        for (m, j, l, xi) in rows {
            let idx = HaarIndex::new(j, l)?;
            let slot = coeffs
                .get_mut(m)
                .and_then(|c| c.get_mut(idx.heap_position()))
                .ok_or_else(|| config_err(format!("row ({m},{j},{l}) out of range")))?;
            *slot = xi;
        }
        let paths = coeffs
            .into_iter()
            .map(|c| {
                if c.iter().any(|x| x.is_nan()) {
                    return Err(config_err("kick file is missing coefficients"));
                }
                HaarPath::from_coefficients(cfg.clone(), c).map(|mut p| {
                    p.seed = seed;
                    p
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(paths, amplitudes)
    }
}

fn check_amplitudes(amplitudes: &[f64]) -> Result<()> {
    if amplitudes.is_empty() {
        return Err(config_err("a kick needs at least one mode"));
    }
    if let Some(b) = amplitudes.iter().find(|b| **b == 0.0 || !b.is_finite()) {
        return Err(config_err(format!("mode amplitudes must be finite and nonzero, got {b}")));
    }
    Ok(())
}

/// Independent scalar paths per mode from disjoint sub-seeds of `seed`.
pub fn sample_kick(config: &ScalarNoiseConfig, amplitudes: &[f64], seed: u64) -> Result<NoiseKick> {
    check_amplitudes(amplitudes)?;
    let paths = (0..amplitudes.len())
        .map(|i| HaarPath::sample_mode(config, seed, i as u64))
        .collect();
    NoiseKick::new(paths, amplitudes.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_values() {
        let h10 = HaarIndex::new(1, 0).unwrap();
        assert_eq!(haar_eval(h10, 0.25).unwrap(), 1.0);
        assert_eq!(haar_eval(h10, 0.75).unwrap(), -1.0);
        assert_eq!(haar_eval(HaarIndex::new(2, 1).unwrap(), 0.25).unwrap(), 0.0);
        assert_eq!(haar_eval(HaarIndex::CONSTANT, 0.9).unwrap(), 1.0);
        assert!(matches!(HaarIndex::new(2, 2), Err(Error::InvalidIndex { .. })));
        assert!(HaarIndex::new(0, 1).is_err());
        assert!(haar_eval(h10, 1.0).is_err());
        assert!(haar_eval(h10, -0.1).is_err());
    }

    #[test]
    fn heap_order_round_trip() {
        let cfg = ScalarNoiseConfig::new(1.0, 2.0, 5, XiDensity::Parabolic).unwrap();
        for pos in 0..cfg.coefficient_count() {
            assert_eq!(cfg.index_of(pos).heap_position(), pos);
        }
    }

    #[test]
    fn config_validation() {
        assert!(ScalarNoiseConfig::new(1.0, 1.0, 4, XiDensity::Parabolic).is_err());
        assert!(ScalarNoiseConfig::new(0.0, 2.0, 4, XiDensity::Parabolic).is_err());
        assert!(ScalarNoiseConfig::new(1.0, 2.0, 0, XiDensity::Parabolic).is_err());
        let cfg = ScalarNoiseConfig::new(2.0, 3.0, 4, XiDensity::Parabolic).unwrap();
        let w: Vec<f64> = (1..=4).map(|j| cfg.level_weight(j)).collect();
        assert!(w.windows(2).all(|p| p[1] < p[0]));
        assert!((cfg.weight_sum() - 2.0 * (1.0 + 1.0 / 8.0 + 1.0 / 27.0 + 1.0 / 64.0)).abs() < 1e-15);
    }

    #[test]
    fn deterministic_and_bounded() {
        let cfg = ScalarNoiseConfig::standard();
        let a = sample_scalar_path(&cfg, 7);
        let b = sample_scalar_path(&cfg, 7);
        assert_eq!(a.coefficients(), b.coefficients());
        assert_ne!(a.coefficients(), sample_scalar_path(&cfg, 8).coefficients());
        assert!(a.sup_norm() <= cfg.sup_bound());
    }

    #[test]
    fn kick_modes_and_errors() {
        let cfg = ScalarNoiseConfig::new(1.0, 2.0, 4, XiDensity::Parabolic).unwrap();
        assert!(sample_kick(&cfg, &[0.0], 1).is_err());
        let k = sample_kick(&cfg, &[1.0, 1.0], 3).unwrap();
        assert_ne!(k.paths()[0].coefficients(), k.paths()[1].coefficients());
        // piecewise constant on cells of width 2^-J
        let t = 3.0 / 16.0 + 0.001;
        assert_eq!(k.eval(t).unwrap(), k.eval(t + 0.5f64.powi(5)).unwrap());
        assert!(k.eval(1.0).is_err());
    }

    #[test]
    fn explicit_coefficients() {
        let cfg = ScalarNoiseConfig::new(1.0, 2.0, 4, XiDensity::Parabolic).unwrap();
        let zero = HaarPath::from_coefficients(cfg.clone(), vec![0.0; 16]).unwrap();
        let kick = NoiseKick::new(vec![zero], vec![2.0]).unwrap();
        assert_eq!(kick.eval(0.3).unwrap(), vec![0.0]);
        let mut c = vec![0.0; 16];
        c[0] = 1.0;
        let kick = NoiseKick::new(vec![HaarPath::from_coefficients(cfg.clone(), c).unwrap()], vec![-1.5]).unwrap();
        for t in [0.0, 0.2, 0.51, 0.99] {
            assert_eq!(kick.eval(t).unwrap(), vec![-1.5]);
        }
        assert!(HaarPath::from_coefficients(cfg, vec![2.0; 16]).is_err());
    }

    #[test]
    fn all_ones_path_by_direct_summation() {
        // t = 1/8: left half of h_{1,0}, h_{2,0}, h_{4,1}; right half of h_{3,0}
        let cfg = ScalarNoiseConfig::new(1.0, 2.0, 4, XiDensity::Parabolic).unwrap();
        let p = HaarPath::from_coefficients(cfg.clone(), vec![1.0; 16]).unwrap();
        let mut direct = 1.0;
        for j in 1..=4u32 {
            let l = ((1u32 << (j - 1)) as f64 / 8.0).floor() as u32;
            let idx = HaarIndex::new(j, l).unwrap();
            direct += cfg.level_weight(j) * haar_eval(idx, 0.125).unwrap();
        }
        let expect = 1.0 + 1.0 + 0.25 - 1.0 / 9.0 + 1.0 / 16.0;
        assert!((direct - expect).abs() < 1e-15);
        assert!((p.eval(0.125).unwrap() - direct).abs() < 1e-15);
    }

    #[test]
    fn cell_average_matches_integral() {
        let cells = [1.0, -1.0, 3.0, 0.0];
        assert!((cell_average(&cells, 0.0, 1.0) - 0.75).abs() < 1e-15);
        assert!((cell_average(&cells, 0.125, 0.375) - 0.0).abs() < 1e-15);
        assert!((cell_average(&cells, 0.5, 0.6) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip() {
        let cfg = ScalarNoiseConfig::new(0.5, 1.5, 3, XiDensity::Triangular).unwrap();
        let k = sample_kick(&cfg, &[1.0, -2.0, 0.25], 99).unwrap();
        let text = k.to_csv().render();
        let back = NoiseKick::from_csv(text.as_bytes()).unwrap();
        assert_eq!(back, k);
    }
}
