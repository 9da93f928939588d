//! Index-set calculus of saturating control spaces.
//!
//! Products of trigonometric modes with indices `l` and `r` span exactly the
//! modes `l ± r`, so the span recursion `𝓗_{k+1} = span{η, ζξ : η, ζ ∈ 𝓗_k,
//! ξ ∈ 𝓗}` is tracked on index sets. Saturation holds iff the index set
//! generates the lattice `Z^d`, decided by the Smith normal form.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{config_err, Result};
use crate::report::CsvTable;

/// Finite set of integer vectors in `Z^d`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModeSet {
    dim: usize,
    modes: BTreeSet<Vec<i64>>,
}

impl ModeSet {
    pub fn new(dim: usize, modes: impl IntoIterator<Item = Vec<i64>>) -> Result<Self> {
        if dim == 0 {
            return Err(config_err("mode sets need dimension at least 1"));
        }
        let modes: BTreeSet<Vec<i64>> = modes.into_iter().collect();
        if let Some(m) = modes.iter().find(|m| m.len() != dim) {
            return Err(config_err(format!("mode {m:?} does not have dimension {dim}")));
        }
        Ok(Self { dim, modes })
    }

    /// `{0, ±e_1, …, ±e_d}`.
    pub fn unit(dim: usize) -> Self {
        let mut modes = BTreeSet::new();
        modes.insert(vec![0; dim]);
        for i in 0..dim {
            for s in [-1, 1] {
                let mut v = vec![0; dim];
                v[i] = s;
                modes.insert(v);
            }
        }
        Self { dim, modes }
    }

    /// `{0} ∪ ±generators`.
    pub fn symmetric_with_origin(dim: usize, generators: &[Vec<i64>]) -> Result<Self> {
        let mut s = Self::new(dim, generators.iter().cloned())?;
        s.modes.insert(vec![0; dim]);
        Ok(s.symmetrized())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn contains(&self, m: &[i64]) -> bool {
        self.modes.contains(m)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec<i64>> {
        self.modes.iter()
    }

    pub fn to_vec(&self) -> Vec<Vec<i64>> {
        self.modes.iter().cloned().collect()
    }

    pub fn is_symmetric(&self) -> bool {
        self.modes.iter().all(|m| self.modes.contains(&neg(m)))
    }

    pub fn contains_origin(&self) -> bool {
        self.modes.contains(&vec![0; self.dim])
    }

    pub fn symmetrized(&self) -> Self {
        let mut modes = self.modes.clone();
        modes.extend(self.modes.iter().map(|m| neg(m)));
        Self { dim: self.dim, modes }
    }

    pub fn is_subset(&self, other: &ModeSet) -> bool {
        self.modes.is_subset(&other.modes)
    }

    /// Largest `|m_i|` over members and coordinates.
    pub fn max_abs_mode(&self) -> i64 {
        self.modes.iter().flat_map(|m| m.iter()).map(|c| c.abs()).max().unwrap_or(0)
    }

    /// Whether the box `max_i |m_i| ≤ half_width` is contained in the set.
    pub fn covers_box(&self, half_width: i64) -> bool {
        let mut point = vec![-half_width; self.dim];
        loop {
            if !self.modes.contains(&point) {
                return false;
            }
            let mut axis = 0;
            loop {
                if axis == self.dim {
                    return true;
                }
                point[axis] += 1;
                if point[axis] <= half_width {
                    break;
                }
                point[axis] = -half_width;
                axis += 1;
            }
        }
    }
}

fn neg(m: &[i64]) -> Vec<i64> {
    m.iter().map(|c| -c).collect()
}

/// Invariant factors of the integer matrix whose rows are the members.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratorCertificate {
    pub dim: usize,
    pub invariant_factors: Vec<i64>,
}

impl GeneratorCertificate {
    /// The lattice is all of `Z^d` iff there are `d` factors, all equal to 1.
    pub fn is_generator(&self) -> bool {
        self.invariant_factors.len() == self.dim && self.invariant_factors.iter().all(|&f| f == 1)
    }

    /// Index of the generated sublattice (`None` when its rank is below `d`).
    pub fn sublattice_index(&self) -> Option<i64> {
        (self.invariant_factors.len() == self.dim).then(|| self.invariant_factors.iter().product())
    }
}

impl fmt::Display for GeneratorCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dimension: {}", self.dim)?;
        writeln!(f, "rank: {}", self.invariant_factors.len())?;
        writeln!(
            f,
            "invariant factors: {}",
            self.invariant_factors.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
        )?;
        match self.sublattice_index() {
            Some(1) => writeln!(f, "verdict: generator (integer span is Z^{})", self.dim),
            Some(i) => writeln!(f, "verdict: not a generator (sublattice of index {i})"),
            None => writeln!(f, "verdict: not a generator (sublattice of deficient rank)"),
        }
    }
}

/// Nonzero diagonal of the Smith normal form of an integer matrix.
pub fn invariant_factors(rows: &[Vec<i64>], cols: usize) -> Vec<i64> {
    let mut a: Vec<Vec<i128>> = rows.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
    let nr = a.len();
    let mut factors = Vec::new();
    for t in 0..nr.min(cols) {
        loop {
            // smallest nonzero entry of the trailing block becomes the pivot
            let mut pivot: Option<(usize, usize)> = None;
            for (i, row) in a.iter().enumerate().skip(t) {
                for (j, &x) in row.iter().enumerate().skip(t) {
                    if x != 0 && pivot.is_none_or(|(pi, pj)| x.abs() < a[pi][pj].abs()) {
                        pivot = Some((i, j));
                    }
                }
            }
            let Some((pi, pj)) = pivot else {
                return factors;
            };
            a.swap(t, pi);
            for row in a.iter_mut() {
                row.swap(t, pj);
            }
            let p = a[t][t];
            let mut clean = true;
            for i in t + 1..nr {
                let q = a[i][t] / p;
                if q != 0 {
                    for j in t..cols {
                        a[i][j] -= q * a[t][j];
                    }
                }
                clean &= a[i][t] == 0;
            }
            for j in t + 1..cols {
                let q = a[t][j] / p;
                if q != 0 {
                    for row in a.iter_mut().skip(t) {
                        row[j] -= q * row[t];
                    }
                }
                clean &= a[t][j] == 0;
            }
            if !clean {
                continue;
            }
            // the pivot must divide the rest of the block
            let bad = (t + 1..nr).find(|&i| (t + 1..cols).any(|j| a[i][j] % p != 0));
            match bad {
                Some(i) => {
                    for j in t..cols {
                        let v = a[i][j];
                        a[t][j] += v;
                    }
                }
                None => {
                    factors.push(p.unsigned_abs() as i64);
                    break;
                }
            }
        }
    }
    factors
}

/// Smith-form certificate for whether `I` generates `Z^d`.
pub fn is_generator(set: &ModeSet) -> GeneratorCertificate {
    let rows = set.to_vec();
    GeneratorCertificate { dim: set.dim, invariant_factors: invariant_factors(&rows, set.dim) }
}

/// The ladder `𝓗_0 ⊆ 𝓗_1 ⊆ …` of index sets, grown by breadth-first search.
#[derive(Clone, Debug)]
pub struct Ladder {
    base: Vec<Vec<i64>>,
    current: BTreeSet<Vec<i64>>,
    frontier: Vec<Vec<i64>>,
    level: usize,
    dim: usize,
}

impl Ladder {
    pub fn new(set: &ModeSet) -> Self {
        let sym = set.symmetrized();
        Self {
            base: sym.to_vec(),
            current: sym.modes.clone(),
            frontier: sym.to_vec(),
            level: 0,
            dim: set.dim,
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn modes(&self) -> ModeSet {
        ModeSet { dim: self.dim, modes: self.current.clone() }
    }

    pub fn len(&self) -> usize {
        self.current.len()
    }

    pub fn is_empty(&self) -> bool {
        self.current.is_empty()
    }

    /// `𝓗_{k+1} = 𝓗_k ∪ {l ± r : l ∈ 𝓗_k, r ∈ 𝓘}`; only last level's new
    /// modes need expanding because earlier ones were expanded already.
    pub fn advance(&mut self) {
        let mut fresh = Vec::new();
        for l in &self.frontier {
            for r in &self.base {
                for s in [1, -1] {
                    let m: Vec<i64> = l.iter().zip(r).map(|(a, b)| a + s * b).collect();
                    if !self.current.contains(&m) {
                        self.current.insert(m.clone());
                        fresh.push(m);
                    }
                }
            }
        }
        self.frontier = fresh;
        self.level += 1;
    }

    pub fn covers_box(&self, half_width: i64) -> bool {
        self.modes().covers_box(half_width)
    }
}

/// All modes of `𝓗_k(𝓘)`.
pub fn ladder(set: &ModeSet, k: usize) -> ModeSet {
    let mut l = Ladder::new(set);
    for _ in 0..k {
        l.advance();
    }
    l.modes()
}

/// Result of [`saturation_radius`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SaturationRadius {
    /// Smallest `k` with the box inside `𝓗_k`.
    Finite(usize),
    /// The set spans a proper sublattice, so no `𝓗_k` covers the box.
    Never(GeneratorCertificate),
}

impl SaturationRadius {
    pub fn is_finite(&self) -> bool {
        matches!(self, Self::Finite(_))
    }
}

/// Smallest ladder level covering the box `|m_i| ≤ half_width`.
pub fn saturation_radius(set: &ModeSet, half_width: i64) -> Result<SaturationRadius> {
    if half_width < 1 {
        return Err(config_err(format!("box half-width must be at least 1, got {half_width}")));
    }
    if set.is_empty() {
        return Err(config_err("index set must be nonempty"));
    }
    let cert = is_generator(set);
    if !cert.is_generator() {
        return Ok(SaturationRadius::Never(cert));
    }
    let mut l = Ladder::new(set);
    while !l.covers_box(half_width) {
        l.advance();
    }
    Ok(SaturationRadius::Finite(l.level()))
}

/// `(k, modes_count, max_abs_mode)` for `k = 0..=levels`.
pub fn ladder_report(set: &ModeSet, levels: usize) -> CsvTable {
    let mut t = CsvTable::new(["k", "modes_count", "max_abs_mode"]);
    let mut l = Ladder::new(set);
    for k in 0..=levels {
        if k > 0 {
            l.advance();
        }
        t.row([k.to_string(), l.len().to_string(), l.modes().max_abs_mode().to_string()]);
    }
    t
}

fn trig(l: i64, x: f64) -> f64 {
    if l >= 0 {
        (l as f64 * x).cos()
    } else {
        (-l as f64 * x).sin()
    }
}

/// Dimension of the literal function space `𝓗_k` in one dimension, built
/// from sampled products of trigonometric functions and the numerical rank
/// of their Gram matrix.
pub fn function_span_dimension(indices: &[i64], k: usize) -> usize {
    let reach = indices.iter().map(|l| l.abs()).max().unwrap_or(0) as usize * (k + 1);
    let n = 4 * reach + 8;
    let xs: Vec<f64> = (0..n).map(|j| 2.0 * std::f64::consts::PI * j as f64 / n as f64).collect();
    let base: Vec<Vec<f64>> = indices.iter().map(|&l| xs.iter().map(|&x| trig(l, x)).collect()).collect();
    let mut span = orthonormal_span(base.clone());
    for _ in 0..k {
        let mut gens = span.clone();
        for a in &span {
            for b in &base {
                gens.push(a.iter().zip(b).map(|(p, q)| p * q).collect());
            }
        }
        span = orthonormal_span(gens);
    }
    span.len()
}

/// Orthonormal basis of the span of sampled functions, by eigen-decomposing
/// their Gram matrix and discarding relative eigenvalues below `1e-10`.
fn orthonormal_span(funcs: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    if funcs.is_empty() {
        return funcs;
    }
    let k = funcs.len();
    let n = funcs[0].len();
    let gram = DMatrix::from_fn(k, k, |i, j| funcs[i].iter().zip(&funcs[j]).map(|(a, b)| a * b).sum::<f64>() / n as f64);
    let eig = gram.symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(*v));
    let mut out = Vec::new();
    for (idx, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > 1e-10 * top {
            let c = eig.eigenvectors.column(idx);
            let s = 1.0 / lam.sqrt();
            out.push((0..n).map(|p| s * (0..k).map(|i| c[i] * funcs[i][p]).sum::<f64>()).collect());
        }
    }
    out
}
