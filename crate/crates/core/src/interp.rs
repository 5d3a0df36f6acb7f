//! Monotone piecewise-cubic Hermite interpolation (Fritsch-Carlson slopes).

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
    increasing: bool,
}

impl MonotoneCubic {
    /// `x` must be strictly monotone (either direction).
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::InvalidParams("interpolant needs >= 2 matching samples".into()));
        }
        let increasing = x[1] > x[0];
        for w in x.windows(2) {
            if (w[1] > w[0]) != increasing || w[1] == w[0] {
                return Err(Error::InvalidParams("abscissae are not strictly monotone".into()));
            }
        }
        let d: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
        let mut m = vec![0.0; n];
        m[0] = d[0];
        m[n - 1] = d[n - 2];
        for i in 1..n - 1 {
            m[i] = if d[i - 1] * d[i] <= 0.0 { 0.0 } else { 0.5 * (d[i - 1] + d[i]) };
        }
        for i in 0..n - 1 {
            if d[i] == 0.0 {
                m[i] = 0.0;
                m[i + 1] = 0.0;
                continue;
            }
            let a = m[i] / d[i];
            let b = m[i + 1] / d[i];
            let s = a * a + b * b;
            if s > 9.0 {
                let tau = 3.0 / s.sqrt();
                m[i] = tau * a * d[i];
                m[i + 1] = tau * b * d[i];
            }
        }
        Ok(Self { x, y, m, increasing })
    }

    pub fn domain(&self) -> (f64, f64) {
        let (a, b) = (self.x[0], *self.x.last().unwrap());
        (a.min(b), a.max(b))
    }

    fn locate(&self, t: f64) -> usize {
        let n = self.x.len();
        let idx = if self.increasing {
            self.x.partition_point(|&v| v <= t)
        } else {
            self.x.partition_point(|&v| v >= t)
        };
        idx.clamp(1, n - 1) - 1
    }

    /// Evaluates the interpolant; `None` outside the sampled range.
    pub fn eval(&self, t: f64) -> Option<f64> {
        let (lo, hi) = self.domain();
        if !(t >= lo && t <= hi) {
            return None;
        }
        let i = self.locate(t);
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        Some(h00 * self.y[i] + h10 * h * self.m[i] + h01 * self.y[i + 1] + h11 * h * self.m[i + 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_nodes_and_stays_monotone() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| if *v < 1.0 { 0.0 } else { 1.0 }).collect();
        let p = MonotoneCubic::new(x.clone(), y.clone()).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(p.eval(*xi).unwrap(), *yi);
        }
        let mut prev = -1.0;
        for i in 0..1000 {
            let v = p.eval(i as f64 * 1.9 / 999.0).unwrap();
            assert!(v >= prev - 1e-15 && (0.0..=1.0).contains(&v));
            prev = v;
        }
        assert!(p.eval(2.5).is_none());
    }

    #[test]
    fn decreasing_abscissae() {
        let x: Vec<f64> = (1..50).map(|i| 1.0 / (i as f64).powi(2)).collect();
        let y: Vec<f64> = x.iter().map(|v| v.sqrt()).collect();
        let p = MonotoneCubic::new(x, y).unwrap();
        assert!((p.eval(0.3).unwrap() - 0.3f64.sqrt()).abs() < 5e-3);
    }
}
