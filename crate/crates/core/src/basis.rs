//! Orthonormal real trigonometric bases `{e_l / ‖e_l‖}` indexed by lattice
//! points, where `e_l = cos⟨l,x⟩` when the first nonzero entry of `l` is
//! positive (or `l = 0`) and `e_l = sin⟨−l,x⟩` otherwise, so that `l = −1`
//! labels `sin x`.

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;

use crate::error::{config_err, Result};
use crate::field::{spectral_dot, Field, Spectrum, TorusGrid};

/// True when `l` selects a cosine (or the constant).
pub fn is_cosine_index(l: &[i64]) -> bool {
    match l.iter().find(|&&c| c != 0) {
        None => true,
        Some(&c) => c > 0,
    }
}

/// Spectrum of the normalized basis function `e_l / ‖e_l‖`.
pub fn trig_mode(grid: &TorusGrid, l: &[i64]) -> Result<Spectrum> {
    if l.len() != grid.dim() {
        return Err(config_err(format!("mode {l:?} does not match dimension {}", grid.dim())));
    }
    let neg: Vec<i64> = l.iter().map(|c| -c).collect();
    let (ip, ineg) = match (grid.mode_index(l), grid.mode_index(&neg)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(config_err(format!("mode {l:?} lies outside the retained band of n = {}", grid.n()))),
    };
    let mut spec = Spectrum::zeros(*grid);
    let c = spec.coeffs_mut();
    let vol = grid.volume();
    if l.iter().all(|&x| x == 0) {
        c[ip] = Complex64::new(1.0 / vol.sqrt(), 0.0);
    } else {
        let s = 1.0 / (vol / 2.0).sqrt();
        if is_cosine_index(l) {
            c[ip] = Complex64::new(0.5 * s, 0.0);
            c[ineg] = Complex64::new(0.5 * s, 0.0);
        } else {
            // sin⟨m,x⟩ = (e^{i⟨m,x⟩} − e^{−i⟨m,x⟩}) / 2i with m = −l
            c[ineg] = Complex64::new(0.0, -0.5 * s);
            c[ip] = Complex64::new(0.0, 0.5 * s);
        }
    }
    Ok(spec)
}

/// Finite orthonormal family of trigonometric modes; spans `𝓗(I)` when
/// built from a control index set.
#[derive(Clone, Debug)]
pub struct ModeBasis {
    grid: TorusGrid,
    modes: Vec<Vec<i64>>,
    spectra: Vec<Vec<Complex64>>,
}

impl ModeBasis {
    pub fn new(grid: TorusGrid, modes: Vec<Vec<i64>>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        let mut spectra = Vec::with_capacity(modes.len());
        for l in &modes {
            if !seen.insert(l.clone()) {
                return Err(config_err(format!("mode {l:?} listed twice")));
            }
            spectra.push(trig_mode(&grid, l)?.into_coeffs());
        }
        Ok(Self { grid, modes, spectra })
    }

    /// The first `count` modes ordered by `|l|²`, cosine before sine, i.e.
    /// `1, cos x, sin x, cos 2x, …` in one dimension.
    pub fn leading(grid: TorusGrid, count: usize) -> Result<Self> {
        if count > grid.band_dim() {
            return Err(config_err(format!(
                "requested {count} modes but the band holds only {}",
                grid.band_dim()
            )));
        }
        let half = (grid.n() / 2) as i64;
        let mut all: Vec<Vec<i64>> = match grid.dim() {
            1 => (1 - half..half).map(|a| vec![a]).collect(),
            _ => (1 - half..half)
                .flat_map(|a| (1 - half..half).map(move |b| vec![a, b]))
                .collect(),
        };
        all.sort_by_key(|l| {
            let k2: i64 = l.iter().map(|c| c * c).sum();
            let reversed: Vec<i64> = l.iter().map(|c| -c).collect();
            (k2, !is_cosine_index(l), reversed)
        });
        all.truncate(count);
        Self::new(grid, all)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[Vec<i64>] {
        &self.modes
    }

    pub fn spectrum(&self, i: usize) -> &[Complex64] {
        &self.spectra[i]
    }

    pub fn field(&self, i: usize) -> Field {
        Spectrum::new(self.grid, self.spectra[i].clone())
            .expect("basis spectra match the grid")
            .to_field()
    }

    /// `L²` coordinates `⟨u, φ_i⟩` of a spectrum.
    pub fn project_coeffs(&self, spec: &[Complex64]) -> Vec<f64> {
        let vol = self.grid.volume();
        self.spectra.iter().map(|b| vol * spectral_dot(b, spec)).collect()
    }

    /// Euclidean spectral products `Re Σ conj(φ̂_i) x̂`, the chain-rule
    /// companion of [`ModeBasis::add_synthesis`].
    pub(crate) fn spectral_pairings(&self, spec: &[Complex64], out: &mut [f64]) {
        for (o, b) in out.iter_mut().zip(&self.spectra) {
            *o = spectral_dot(b, spec);
        }
    }

    pub fn project(&self, u: &Field) -> Vec<f64> {
        self.project_coeffs(u.to_spectrum().coeffs())
    }

    /// `out += Σ_i coords_i φ̂_i`.
    pub(crate) fn add_synthesis(&self, coords: &[f64], out: &mut [Complex64]) {
        for (c, b) in coords.iter().zip(&self.spectra) {
            if *c != 0.0 {
                for (o, v) in out.iter_mut().zip(b) {
                    *o += v * *c;
                }
            }
        }
    }

    pub fn synthesize(&self, coords: &[f64]) -> Field {
        let mut out = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        self.add_synthesis(coords, &mut out);
        Spectrum::new(self.grid, out).expect("grid length").to_field()
    }

    /// Orthogonal projection `P_𝓗 u` as a field.
    pub fn project_field(&self, u: &Field) -> Field {
        self.synthesize(&self.project(u))
    }
}

/// Random combination of the first `count` modes of [`ModeBasis::leading`]
/// with Gaussian coordinates, rescaled to `L²` norm `l2`.
pub fn random_low_mode_field<R: Rng>(grid: TorusGrid, count: usize, l2: f64, rng: &mut R) -> Result<Field> {
    let basis = ModeBasis::leading(grid, count)?;
    let mut coords: Vec<f64> = (0..basis.len()).map(|_| rng.sample(StandardNormal)).collect();
    let norm = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
    if norm > 0.0 {
        coords.iter_mut().for_each(|c| *c *= l2 / norm);
    }
    Ok(basis.synthesize(&coords))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn orthonormal_and_oriented() {
        let g = TorusGrid::new(1, 16).unwrap();
        let b = ModeBasis::leading(g, 7).unwrap();
        assert_eq!(b.modes(), &[vec![0], vec![1], vec![-1], vec![2], vec![-2], vec![3], vec![-3]]);
        for i in 0..b.len() {
            for j in 0..b.len() {
                let ip = b.field(i).inner(&b.field(j));
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((ip - e).abs() < 1e-13);
            }
        }
        let sin1 = Field::from_fn(g, |x| x[0].sin() / PI.sqrt());
        assert!(b.field(2).distance(&sin1) < 1e-13);
        let proj = b.project(&Field::from_fn(g, |x| 3.0 * (2.0 * x[0]).cos() + 1.0));
        assert!((proj[3] - 3.0 * PI.sqrt()).abs() < 1e-12);
        assert!((proj[0] - (2.0 * PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn random_field_has_requested_norm() {
        use rand::SeedableRng;
        let g = TorusGrid::new(1, 32).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let u = random_low_mode_field(g, 7, 2.5, &mut rng).unwrap();
        assert!((u.l2_norm() - 2.5).abs() < 1e-12);
        assert!(ModeBasis::leading(g, 7).unwrap().project_field(&u).distance(&u) < 1e-12);
    }

    #[test]
    fn rejects_out_of_band_and_duplicates() {
        let g = TorusGrid::new(1, 8).unwrap();
        assert!(ModeBasis::new(g, vec![vec![4]]).is_err());
        assert!(ModeBasis::new(g, vec![vec![1], vec![1]]).is_err());
        assert!(ModeBasis::leading(g, 8).is_err());
    }

    #[test]
    fn two_dimensional_projection_is_idempotent() {
        let g = TorusGrid::new(2, 8).unwrap();
        let b = ModeBasis::new(g, vec![vec![0, 0], vec![1, 0], vec![-1, 0], vec![0, 1], vec![0, -1]]).unwrap();
        let u = Field::from_fn(g, |x| (x[0] + 2.0 * x[1]).sin() + x[1].cos() + 0.5);
        let p = b.project_field(&u);
        assert!(b.project_field(&p).distance(&p) < 1e-12);
        let expect = Field::from_fn(g, |x| x[1].cos() + 0.5);
        assert!(p.distance(&expect) < 1e-12);
    }
}
