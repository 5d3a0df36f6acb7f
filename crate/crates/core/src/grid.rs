//! Angular Fourier modes on a uniform radial grid.
//!
//! Fields are stored as the non-negative half of the angular spectrum,
//! `modes[k * n_r + j]` for `k = 0..=k_max`. Negative modes are implied by
//! conjugate symmetry, so every stored field is real in physical space.
//! Mode amplitudes follow `f(θ) = Σ_k f_k e^{ikθ}`, i.e. the forward
//! transform carries the `1/n_theta` factor.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n_theta: usize,
    pub n_r: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub dealias_fraction: f64,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            n_theta: 256,
            n_r: 1024,
            r_min: 0.05,
            r_max: 16.0,
            dealias_fraction: 2.0 / 3.0,
        }
    }
}

impl Grid {
    pub fn new(n_theta: usize, n_r: usize, r_min: f64, r_max: f64, dealias_fraction: f64) -> Result<Self> {
        let g = Self { n_theta, n_r, r_min, r_max, dealias_fraction };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.n_theta.is_power_of_two() || self.n_theta < 4 {
            return Err(Error::InvalidGrid(format!("n_theta = {} is not a power of two >= 4", self.n_theta)));
        }
        if self.n_r < 2 {
            return Err(Error::InvalidGrid("n_r must be at least 2".into()));
        }
        if !(self.r_min > 0.0) || !(self.r_max > self.r_min) {
            return Err(Error::InvalidGrid(format!("need 0 < r_min < r_max, got [{}, {}]", self.r_min, self.r_max)));
        }
        if !(self.dealias_fraction > 0.0 && self.dealias_fraction <= 1.0) {
            return Err(Error::InvalidGrid(format!("dealias fraction {} not in (0, 1]", self.dealias_fraction)));
        }
        Ok(())
    }

    /// Largest retained angular wavenumber.
    pub fn k_max(&self) -> usize {
        let k = (self.dealias_fraction * self.n_theta as f64 / 2.0 + 1e-12).floor() as usize;
        // the Nyquist mode has no conjugate partner on the grid
        k.min(self.n_theta / 2 - 1)
    }

    pub fn n_modes(&self) -> usize {
        self.k_max() + 1
    }

    pub fn h(&self) -> f64 {
        (self.r_max - self.r_min) / (self.n_r - 1) as f64
    }

    pub fn dtheta(&self) -> f64 {
        2.0 * PI / self.n_theta as f64
    }

    pub fn r(&self, j: usize) -> f64 {
        self.r_min + j as f64 * self.h()
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.n_r).map(|j| self.r(j)).collect()
    }

    pub fn theta(&self, i: usize) -> f64 {
        i as f64 * self.dtheta()
    }
}

/// Real samples on the (θ, r) collocation grid, row-major in θ.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalField {
    pub n_theta: usize,
    pub n_r: usize,
    pub data: Vec<f64>,
}

impl PhysicalField {
    pub fn zeros(grid: &Grid) -> Self {
        Self { n_theta: grid.n_theta, n_r: grid.n_r, data: vec![0.0; grid.n_theta * grid.n_r] }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(grid);
        for i in 0..grid.n_theta {
            let th = grid.theta(i);
            for j in 0..grid.n_r {
                out.data[i * grid.n_r + j] = f(th, grid.r(j));
            }
        }
        out
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_r + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolarField {
    pub grid: Grid,
    pub modes: Vec<Complex64>,
}

impl PolarField {
    pub fn zeros(grid: &Grid) -> Self {
        Self { grid: *grid, modes: vec![Complex64::new(0.0, 0.0); grid.n_modes() * grid.n_r] }
    }

    /// Builds a field whose mode `k >= 0` has radial profile `f(k, r)`.
    /// The k = 0 profile is forced real.
    pub fn from_modes_fn(grid: &Grid, f: impl Fn(usize, f64) -> Complex64) -> Self {
        let mut out = Self::zeros(grid);
        for k in 0..grid.n_modes() {
            for j in 0..grid.n_r {
                let mut v = f(k, grid.r(j));
                if k == 0 {
                    v.im = 0.0;
                }
                out.modes[k * grid.n_r + j] = v;
            }
        }
        out
    }

    #[inline]
    pub fn n_r(&self) -> usize {
        self.grid.n_r
    }

    pub fn mode(&self, k: usize) -> &[Complex64] {
        let n = self.grid.n_r;
        &self.modes[k * n..(k + 1) * n]
    }

    pub fn mode_mut(&mut self, k: usize) -> &mut [Complex64] {
        let n = self.grid.n_r;
        &mut self.modes[k * n..(k + 1) * n]
    }

    /// Signed-mode accessor; negative k returns the conjugate partner and
    /// modes beyond the dealias cutoff are zero.
    pub fn get(&self, k: i64, j: usize) -> Complex64 {
        let ka = k.unsigned_abs() as usize;
        if ka > self.grid.k_max() {
            return Complex64::new(0.0, 0.0);
        }
        let v = self.modes[ka * self.grid.n_r + j];
        if k < 0 {
            v.conj()
        } else {
            v
        }
    }

    /// Discrete L2 norm over all signed modes (sum of |f_k|^2 with both signs).
    pub fn norm(&self) -> f64 {
        let n = self.grid.n_r;
        let mut s = 0.0;
        for k in 0..self.grid.n_modes() {
            let w = if k == 0 { 1.0 } else { 2.0 };
            s += w * self.modes[k * n..(k + 1) * n].iter().map(|c| c.norm_sqr()).sum::<f64>();
        }
        s.sqrt()
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { grid: self.grid, modes: self.modes.iter().map(|c| c * a).collect() }
    }

    pub fn add_scaled(&self, other: &Self, a: f64) -> Self {
        Self {
            grid: self.grid,
            modes: self.modes.iter().zip(&other.modes).map(|(x, y)| x + y * a).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add_scaled(other, -1.0)
    }

    /// Angular average ⟨f⟩(r), the real part of mode 0.
    pub fn mean(&self) -> Vec<f64> {
        self.mode(0).iter().map(|c| c.re).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.modes.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Forward transform in θ at every radial node, followed by the dealias mask.
pub fn to_modes(grid: &Grid, samples: &PhysicalField) -> Result<PolarField> {
    let expected = grid.n_theta * grid.n_r;
    if samples.data.len() != expected || samples.n_theta != grid.n_theta || samples.n_r != grid.n_r {
        return Err(Error::DimensionMismatch { expected, got: samples.data.len() });
    }
    let n_theta = grid.n_theta;
    let n_r = grid.n_r;
    let n_modes = grid.n_modes();
    let fft = plan(n_theta, true);
    let norm = 1.0 / n_theta as f64;
    let pairs = n_r.div_ceil(2);

    // two real rows per complex transform: z = x_a + i x_b
    let mut buf = vec![Complex64::default(); pairs * n_theta];
    buf.par_chunks_mut(n_theta * TILE).enumerate().for_each(|(blk, rows)| {
        let p0 = blk * TILE;
        let np = rows.len() / n_theta;
        for i in 0..n_theta {
            let src = &samples.data[i * n_r..(i + 1) * n_r];
            for q in 0..np {
                let a = 2 * (p0 + q);
                let xb = if a + 1 < n_r { src[a + 1] } else { 0.0 };
                rows[q * n_theta + i] = Complex64::new(src[a], xb);
            }
        }
        for row in rows.chunks_mut(n_theta) {
            fft.process(row);
        }
    });

    let mut out = PolarField::zeros(grid);
    let spectra: Vec<(Vec<Complex64>, Vec<Complex64>)> = buf
        .par_chunks(n_theta)
        .map(|z| {
            let mut xa = Vec::with_capacity(n_modes);
            let mut xb = Vec::with_capacity(n_modes);
            for k in 0..n_modes {
                let zk = z[k];
                let zm = z[(n_theta - k) % n_theta].conj();
                xa.push((zk + zm) * (0.5 * norm));
                xb.push((zk - zm) * Complex64::new(0.0, -0.5 * norm));
            }
            xa[0].im = 0.0;
            xb[0].im = 0.0;
            (xa, xb)
        })
        .collect();
    for (p, (xa, xb)) in spectra.into_iter().enumerate() {
        for k in 0..n_modes {
            out.modes[k * n_r + 2 * p] = xa[k];
            if 2 * p + 1 < n_r {
                out.modes[k * n_r + 2 * p + 1] = xb[k];
            }
        }
    }
    Ok(out)
}

/// Block size for the transposes around the batched transforms.
const TILE: usize = 16;

fn plan(n: usize, forward: bool) -> std::sync::Arc<dyn rustfft::Fft<f64>> {
    use std::cell::RefCell;
    thread_local! {
        static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
    }
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if forward {
            p.plan_fft_forward(n)
        } else {
            p.plan_fft_inverse(n)
        }
    })
}

/// Inverse transform. The k = 0 profile must be real to within 1e-12 of the
/// field norm.
pub fn to_physical(field: &PolarField) -> Result<PhysicalField> {
    let norm = field.norm();
    let residue = field.mode(0).iter().fold(0.0_f64, |m, c| m.max(c.im.abs()));
    if residue > 1e-12 * norm.max(f64::MIN_POSITIVE) && residue > 0.0 {
        return Err(Error::RealityViolation { residue, norm });
    }
    Ok(to_physical_unchecked(field))
}

pub(crate) fn to_physical_unchecked(field: &PolarField) -> PhysicalField {
    let grid = field.grid;
    let n_theta = grid.n_theta;
    let n_r = grid.n_r;
    let k_max = grid.k_max();
    let ifft = plan(n_theta, false);
    let pairs = n_r.div_ceil(2);

    // spectra of rows a and b combined as X_a + i X_b, whose inverse is x_a + i x_b
    let mut buf = vec![Complex64::default(); pairs * n_theta];
    buf.par_chunks_mut(n_theta).enumerate().for_each(|(p, row)| {
        let (a, b) = (2 * p, 2 * p + 1);
        let at = |k: usize, j: usize| if j < n_r { field.modes[k * n_r + j] } else { Complex64::default() };
        let i = Complex64::new(0.0, 1.0);
        row[0] = Complex64::new(at(0, a).re, at(0, b).re);
        for k in 1..=k_max {
            let (ca, cb) = (at(k, a), at(k, b));
            row[k] = ca + i * cb;
            row[n_theta - k] = ca.conj() + i * cb.conj();
        }
        ifft.process(row);
    });

    let mut out = PhysicalField::zeros(&grid);
    out.data.par_chunks_mut(n_r * TILE).enumerate().for_each(|(blk, dst)| {
        let i0 = blk * TILE;
        let ni = dst.len() / n_r;
        for p in 0..pairs {
            let src = &buf[p * n_theta + i0..p * n_theta + i0 + ni];
            for (di, z) in src.iter().enumerate() {
                dst[di * n_r + 2 * p] = z.re;
                if 2 * p + 1 < n_r {
                    dst[di * n_r + 2 * p + 1] = z.im;
                }
            }
        }
    });
    out
}

/// Fourth-order finite-difference derivative of a uniformly sampled profile.
/// Central five-point stencil in the interior, one-sided five-point stencils
/// at the two nodes nearest each boundary.
pub fn diff_profile<T>(values: &[T], h: f64, order: u8) -> Vec<T>
where
    T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T> + Default,
{
    let n = values.len();
    assert!(n >= 9, "fourth-order stencils need at least 9 nodes");
    let f = |i: usize| values[i];
    let comb = |c: &[(usize, f64)], scale: f64| -> T {
        let mut acc = T::default();
        for &(i, w) in c {
            acc = acc + f(i) * (w * scale);
        }
        acc
    };
    let mut out = vec![T::default(); n];
    match order {
        1 => {
            let s = 1.0 / (12.0 * h);
            for i in 2..n - 2 {
                out[i] = comb(&[(i - 2, 1.0), (i - 1, -8.0), (i + 1, 8.0), (i + 2, -1.0)], s);
            }
            out[0] = comb(&[(0, -25.0), (1, 48.0), (2, -36.0), (3, 16.0), (4, -3.0)], s);
            out[1] = comb(&[(0, -3.0), (1, -10.0), (2, 18.0), (3, -6.0), (4, 1.0)], s);
            let m = n - 1;
            out[m] = comb(&[(m, 25.0), (m - 1, -48.0), (m - 2, 36.0), (m - 3, -16.0), (m - 4, 3.0)], s);
            out[m - 1] = comb(&[(m, 3.0), (m - 1, 10.0), (m - 2, -18.0), (m - 3, 6.0), (m - 4, -1.0)], s);
        }
        2 => {
            let s = 1.0 / (12.0 * h * h);
            for i in 2..n - 2 {
                out[i] = comb(&[(i - 2, -1.0), (i - 1, 16.0), (i, -30.0), (i + 1, 16.0), (i + 2, -1.0)], s);
            }
            // six-point one-sided stencils keep fourth order for the second derivative
            out[0] = comb(&[(0, 45.0), (1, -154.0), (2, 214.0), (3, -156.0), (4, 61.0), (5, -10.0)], s);
            out[1] = comb(&[(0, 10.0), (1, -15.0), (2, -4.0), (3, 14.0), (4, -6.0), (5, 1.0)], s);
            let m = n - 1;
            out[m] = comb(&[(m, 45.0), (m - 1, -154.0), (m - 2, 214.0), (m - 3, -156.0), (m - 4, 61.0), (m - 5, -10.0)], s);
            out[m - 1] = comb(&[(m, 10.0), (m - 1, -15.0), (m - 2, -4.0), (m - 3, 14.0), (m - 4, -6.0), (m - 5, 1.0)], s);
        }
        _ => panic!("only first and second radial derivatives are supported"),
    }
    out
}

/// ∂_r or ∂_r² of every retained mode.
pub fn radial_derivative(field: &PolarField, order: u8) -> Result<PolarField> {
    let grid = field.grid;
    if grid.n_r < 9 {
        return Err(Error::InvalidGrid(format!("radial derivative needs n_r >= 9, got {}", grid.n_r)));
    }
    if order != 1 && order != 2 {
        return Err(Error::InvalidParams(format!("derivative order {order} not supported")));
    }
    let h = grid.h();
    let n_r = grid.n_r;
    let modes: Vec<Complex64> = (0..grid.n_modes())
        .into_par_iter()
        .flat_map_iter(|k| diff_profile(&field.modes[k * n_r..(k + 1) * n_r], h, order))
        .collect();
    Ok(PolarField { grid, modes })
}

/// ∂_θ, i.e. multiplication of mode k by ik.
pub fn angular_derivative(field: &PolarField) -> PolarField {
    let n_r = field.grid.n_r;
    let mut out = field.clone();
    for k in 0..field.grid.n_modes() {
        let ik = Complex64::new(0.0, k as f64);
        for c in &mut out.modes[k * n_r..(k + 1) * n_r] {
            *c *= ik;
        }
    }
    out
}

/// Pointwise product formed in physical space and truncated back to the
/// retained modes.
pub fn dealiased_product(a: &PolarField, b: &PolarField) -> Result<PolarField> {
    let pa = to_physical_unchecked(a);
    let pb = to_physical_unchecked(b);
    let prod = PhysicalField {
        n_theta: pa.n_theta,
        n_r: pa.n_r,
        data: pa.data.iter().zip(&pb.data).map(|(x, y)| x * y).collect(),
    };
    to_modes(&a.grid, &prod)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Grid {
        Grid::new(32, 33, 0.5, 4.5, 2.0 / 3.0).unwrap()
    }

    #[test]
    fn dc_only_field() {
        let g = small();
        let f = to_modes(&g, &PhysicalField::from_fn(&g, |_, _| 1.0)).unwrap();
        for j in 0..g.n_r {
            assert!((f.get(0, j) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
            for k in 1..=g.k_max() as i64 {
                assert!(f.get(k, j).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn single_harmonic() {
        let g = small();
        let f = to_modes(&g, &PhysicalField::from_fn(&g, |th, _| th.cos())).unwrap();
        for j in 0..g.n_r {
            assert!((f.get(1, j) - Complex64::new(0.5, 0.0)).norm() < 1e-15);
            assert!((f.get(-1, j) - Complex64::new(0.5, 0.0)).norm() < 1e-15);
            assert!(f.get(0, j).norm() < 1e-15);
            assert!(f.get(2, j).norm() < 1e-15);
        }
        let back = to_physical(&f).unwrap();
        for i in 0..g.n_theta {
            assert!((back.at(i, 3) - g.theta(i).cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_field_maps_to_zero() {
        let g = small();
        let p = to_physical(&PolarField::zeros(&g)).unwrap();
        assert!(p.data.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let g = small();
        let bad = PhysicalField { n_theta: 16, n_r: 33, data: vec![0.0; 16 * 33] };
        assert!(matches!(to_modes(&g, &bad), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn reality_violation_detected() {
        let g = small();
        let mut f = PolarField::zeros(&g);
        f.modes[3] = Complex64::new(1.0, 0.5);
        assert!(matches!(to_physical(&f), Err(Error::RealityViolation { .. })));
    }

    #[test]
    fn derivative_reproduces_quartics() {
        let g = Grid::new(8, 40, 0.5, 3.0, 1.0).unwrap();
        let r = g.radii();
        let f: Vec<f64> = r.iter().map(|&x| x.powi(4) - 2.0 * x * x + 3.0).collect();
        let d1 = diff_profile(&f, g.h(), 1);
        let d2 = diff_profile(&f, g.h(), 2);
        for (i, &x) in r.iter().enumerate() {
            assert!((d1[i] - (4.0 * x.powi(3) - 4.0 * x)).abs() < 1e-10, "d1 at {i}");
            assert!((d2[i] - (12.0 * x * x - 4.0)).abs() < 1e-8, "d2 at {i}");
        }
    }

    #[test]
    fn derivative_of_r_squared_and_constant() {
        let g = Grid::new(8, 20, 0.5, 2.0, 1.0).unwrap();
        let f = PolarField::from_modes_fn(&g, |k, r| if k == 0 { Complex64::new(r * r, 0.0) } else { Complex64::new(0.0, 0.0) });
        let d = radial_derivative(&f, 1).unwrap();
        for j in 0..g.n_r {
            assert!((d.get(0, j).re - 2.0 * g.r(j)).abs() < 1e-12);
        }
        let c = PolarField::from_modes_fn(&g, |_, _| Complex64::new(1.0, 0.0));
        let dc = radial_derivative(&c, 1).unwrap();
        assert!(dc.modes.iter().all(|z| z.norm() < 1e-10));
    }

    #[test]
    fn derivative_of_sine_is_accurate() {
        let g = Grid::new(4, 2048, 0.5, 16.0, 1.0).unwrap();
        let f: Vec<f64> = g.radii().iter().map(|r| r.sin()).collect();
        let d = diff_profile(&f, g.h(), 1);
        let err = g.radii().iter().zip(&d).map(|(r, v)| (v - r.cos()).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "max error {err}");
    }

    #[test]
    fn derivative_needs_nine_nodes() {
        let g = Grid::new(8, 8, 0.5, 2.0, 1.0).unwrap();
        assert!(radial_derivative(&PolarField::zeros(&g), 1).is_err());
    }

    #[test]
    fn product_beyond_cutoff_is_removed() {
        let g = Grid::new(32, 9, 1.0, 2.0, 2.0 / 3.0).unwrap();
        let km = g.k_max();
        assert_eq!(km, 10);
        let a = to_modes(&g, &PhysicalField::from_fn(&g, |th, _| (km as f64 * th).cos())).unwrap();
        let p = dealiased_product(&a, &a).unwrap();
        // cos^2 = 1/2 + cos(2 km θ)/2, the second part lies past the cutoff
        for j in 0..g.n_r {
            assert!((p.get(0, j).re - 0.5).abs() < 1e-14);
            for k in 1..=km as i64 {
                assert!(p.get(k, j).norm() < 1e-14, "mode {k} not clean");
            }
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(30, 10, 0.1, 1.0, 0.5).is_err());
        assert!(Grid::new(32, 10, 0.0, 1.0, 0.5).is_err());
        assert!(Grid::new(32, 10, 0.1, 1.0, 0.0).is_err());
    }
}
