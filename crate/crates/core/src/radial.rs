//! Cell-wise high-order quadrature of nodal radial profiles.
//!
//! Each cell `[r_c, r_{c+1}]` is integrated with a Gauss-Legendre rule
//! applied to the degree-5 Lagrange interpolant through the six nearest
//! nodes. Smooth compactly supported profiles are integrated to O(h^6).

use std::sync::OnceLock;

use crate::grid::Grid;
use crate::quadrature::gauss_legendre;

pub const STENCIL: usize = 6;
pub const MAX_RULE: usize = 96;

/// Gauss-Legendre rules of every order up to [`MAX_RULE`], mapped to [0, 1].
pub fn unit_rule(q: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static RULES: OnceLock<Vec<(Vec<f64>, Vec<f64>)>> = OnceLock::new();
    let rules = RULES.get_or_init(|| {
        (0..=MAX_RULE)
            .map(|n| {
                if n == 0 {
                    return (Vec::new(), Vec::new());
                }
                let (x, w) = gauss_legendre(n);
                (x.iter().map(|x| 0.5 * (x + 1.0)).collect(), w.iter().map(|w| 0.5 * w).collect())
            })
            .collect()
    });
    &rules[q.clamp(1, MAX_RULE)]
}

/// First node of the interpolation stencil used for cell `c`.
#[inline]
pub fn stencil_start(c: usize, n_r: usize) -> usize {
    let s = c.saturating_sub(2);
    s.min(n_r - STENCIL)
}

/// Lagrange weights at local coordinate `x` (in node units from the stencil start).
#[inline]
pub fn lagrange_weights(x: f64) -> [f64; STENCIL] {
    let mut w = [1.0; STENCIL];
    for (i, wi) in w.iter_mut().enumerate() {
        for m in 0..STENCIL {
            if m != i {
                *wi *= (x - m as f64) / (i as f64 - m as f64);
            }
        }
    }
    w
}

/// Interpolates a nodal profile at radius `r` inside cell `c`.
#[inline]
pub fn interp_in_cell<T>(values: &[T], grid: &Grid, c: usize, r: f64) -> T
where
    T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T> + Default,
{
    let s = stencil_start(c, grid.n_r);
    let x = (r - grid.r(s)) / grid.h();
    let w = lagrange_weights(x);
    let mut acc = T::default();
    for m in 0..STENCIL {
        acc = acc + values[s + m] * w[m];
    }
    acc
}

/// Stencil width of the interpolant integrated by [`cumulative`].
pub const CUMULATIVE_STENCIL: usize = 10;

fn lagrange_weights_n<const N: usize>(x: f64) -> [f64; N] {
    let mut w = [1.0; N];
    for (i, wi) in w.iter_mut().enumerate() {
        for m in 0..N {
            if m != i {
                *wi *= (x - m as f64) / (i as f64 - m as f64);
            }
        }
    }
    w
}

/// Cumulative integral `∫_{r_min}^{r_j} f(ρ) dρ` at every node, integrating
/// a centred degree-9 interpolant on each cell.
pub fn cumulative(values: &[f64], grid: &Grid) -> Vec<f64> {
    const N: usize = CUMULATIVE_STENCIL;
    let n = grid.n_r;
    assert!(n >= N && values.len() == n);
    let (x, w) = unit_rule(8);
    // per-offset quadrature weights: the integral over the cell is a fixed
    // combination of the stencil values
    let mut cell_weights = vec![[0.0; N]; N - 1];
    for (off, cw) in cell_weights.iter_mut().enumerate() {
        for (xq, wq) in x.iter().zip(w) {
            let lw = lagrange_weights_n::<N>(off as f64 + xq);
            for m in 0..N {
                cw[m] += wq * lw[m];
            }
        }
    }
    let h = grid.h();
    let mut out = vec![0.0; n];
    for c in 0..n - 1 {
        let s = c.saturating_sub(N / 2 - 1).min(n - N);
        let cw = &cell_weights[c - s];
        let cell: f64 = (0..N).map(|m| cw[m] * values[s + m]).sum();
        out[c + 1] = out[c] + cell * h;
    }
    out
}

/// `∫ f(ρ) dρ` over the whole grid.
pub fn integral(values: &[f64], grid: &Grid) -> f64 {
    *cumulative(values, grid).last().unwrap()
}

/// Fornberg weights for the `deriv`-th derivative at `x0` from nodes `xs`.
pub fn fornberg_weights(x0: f64, xs: &[f64], deriv: usize) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![vec![0.0; deriv + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(deriv);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[deriv]).collect()
}

/// Derivative of a uniformly sampled profile using `width`-point stencils,
/// centred in the interior and shifted inwards at the ends.
pub fn derivative(values: &[f64], h: f64, deriv: usize, width: usize) -> Vec<f64> {
    let n = values.len();
    assert!(width > deriv && n >= width, "stencil wider than profile");
    let half = width / 2;
    let offsets: Vec<f64> = (0..width).map(|m| m as f64).collect();
    let mut cache: Vec<Option<Vec<f64>>> = vec![None; width];
    let scale = h.powi(deriv as i32);
    (0..n)
        .map(|i| {
            let s = i.saturating_sub(half).min(n - width);
            let local = i - s;
            let w = cache[local].get_or_insert_with(|| fornberg_weights(local as f64, &offsets, deriv));
            w.iter().zip(&values[s..s + width]).map(|(w, f)| w * f).sum::<f64>() / scale
        })
        .collect()
}
