use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Spatial differencing scheme on the periodic grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Spectral,
    Fd4,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Spectral => f.write_str("spectral"),
            Scheme::Fd4 => f.write_str("fd4"),
        }
    }
}

/// Equally spaced periodic grid on a circle of circumference `length`.
#[derive(Clone)]
pub struct CircleGrid {
    points: usize,
    length: f64,
    scheme: Scheme,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for CircleGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CircleGrid")
            .field("points", &self.points)
            .field("length", &self.length)
            .field("scheme", &self.scheme)
            .finish()
    }
}

impl PartialEq for CircleGrid {
    fn eq(&self, other: &Self) -> bool {
        self.points == other.points && self.length == other.length && self.scheme == other.scheme
    }
}

impl CircleGrid {
    pub fn new(points: usize, length: f64, scheme: Scheme) -> Result<Self> {
        if points < 8 || !points.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "grid needs an even number of points >= 8, got {points}"
            )));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidInput(format!("circumference must be positive, got {length}")));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(points);
        let inverse = planner.plan_fft_inverse(points);
        Ok(Self { points, length, scheme, forward, inverse })
    }

    /// Spectral grid on `[0, 2π)`.
    pub fn periodic(points: usize) -> Result<Self> {
        Self::new(points, 2.0 * PI, Scheme::Spectral)
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.points as f64
    }

    pub fn coords(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.points).map(|i| i as f64 * h).collect()
    }

    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.coords().into_iter().map(f).collect()
    }

    pub fn with_points(&self, points: usize) -> Result<Self> {
        Self::new(points, self.length, self.scheme)
    }

    fn check(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.points {
            return Err(Error::Shape(format!(
                "field has {} samples, grid has {}",
                f.len(),
                self.points
            )));
        }
        Ok(())
    }

    /// First derivative of a periodic field.
    pub fn derivative(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check(f)?;
        let mut out = vec![0.0; self.points];
        match self.scheme {
            Scheme::Spectral => self.spectral_derivative(f, &mut out),
            Scheme::Fd4 => self.fd4_derivative(f, &mut out),
        }
        Ok(out)
    }

    /// Trapezoid quadrature, spectrally accurate for smooth periodic data.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.points);
        self.spacing() * f.iter().sum::<f64>()
    }

    /// Angular wavenumber of the `k`-th FFT bin.
    fn wavenumber(&self, k: usize) -> f64 {
        let n = self.points;
        let signed = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        2.0 * PI * signed / self.length
    }

    /// Eigenvalue magnitude of the discrete first derivative on bin `k`:
    /// the derivative operator acts on that mode as multiplication by `i·λ`.
    pub fn derivative_symbol(&self, k: usize) -> f64 {
        let n = self.points;
        match self.scheme {
            Scheme::Spectral => {
                if k == n / 2 {
                    0.0
                } else {
                    self.wavenumber(k)
                }
            }
            Scheme::Fd4 => {
                let h = self.spacing();
                let theta = 2.0 * PI * k as f64 / n as f64;
                (8.0 * theta.sin() - (2.0 * theta).sin()) / (6.0 * h)
            }
        }
    }

    fn spectral_derivative(&self, f: &[f64], out: &mut [f64]) {
        let n = self.points;
        let mut buf: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward.process(&mut buf);
        for (k, c) in buf.iter_mut().enumerate() {
            if k == n / 2 {
                *c = Complex64::new(0.0, 0.0);
            } else {
                let w = self.wavenumber(k);
                *c = Complex64::new(-w * c.im, w * c.re);
            }
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / n as f64;
        for (o, c) in out.iter_mut().zip(&buf) {
            *o = c.re * scale;
        }
    }

    fn fd4_derivative(&self, f: &[f64], out: &mut [f64]) {
        let n = self.points;
        let inv = 1.0 / (12.0 * self.spacing());
        for i in 0..n {
            let p1 = f[(i + 1) % n];
            let p2 = f[(i + 2) % n];
            let m1 = f[(i + n - 1) % n];
            let m2 = f[(i + n - 2) % n];
            out[i] = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) * inv;
        }
    }

    /// Exponential low-pass filter `exp(−36(|k|/k_max)^36)`, which leaves the
    /// lower two thirds of the spectrum untouched to roundoff and removes the
    /// modes next to the Nyquist frequency.
    pub fn filter(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check(f)?;
        let n = self.points;
        let kmax = (n / 2) as f64;
        Ok(self.fourier_multiply(f, |k| {
            let signed = if k <= n / 2 { k as f64 } else { (n - k) as f64 };
            (-36.0 * (signed / kmax).powi(36)).exp()
        }))
    }

    /// Apply a real, even Fourier multiplier `g(k)` to a real field.
    pub(crate) fn fourier_multiply<G: Fn(usize) -> f64>(&self, f: &[f64], g: G) -> Vec<f64> {
        let n = self.points;
        let mut buf: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward.process(&mut buf);
        for (k, c) in buf.iter_mut().enumerate() {
            *c *= g(k);
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / n as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }
}

/// Positive density on the circle, stored as a weight per unit coordinate
/// length at each node.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    weights: Vec<f64>,
}

impl DensityField {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidInput(format!("density must be positive; node {i} has {w}")));
        }
        Ok(Self { weights })
    }

    pub fn uniform(grid: &CircleGrid, weight: f64) -> Result<Self> {
        Self::new(vec![weight; grid.len()])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total_mass(&self, grid: &CircleGrid) -> f64 {
        grid.integrate(&self.weights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(CircleGrid::new(6, 1.0, Scheme::Spectral).is_err());
        assert!(CircleGrid::new(9, 1.0, Scheme::Spectral).is_err());
        assert!(CircleGrid::new(16, 0.0, Scheme::Spectral).is_err());
    }

    #[test]
    fn sine_derivative_both_schemes() {
        for scheme in [Scheme::Spectral, Scheme::Fd4] {
            let l = 3.0;
            let g = CircleGrid::new(128, l, scheme).unwrap();
            let w = 2.0 * PI / l;
            let f = g.sample(|y| (w * y).sin());
            let d = g.derivative(&f).unwrap();
            let tol = if scheme == Scheme::Spectral { 1e-12 } else { 1e-4 };
            for (y, v) in g.coords().iter().zip(&d) {
                assert!((v - w * (w * y).cos()).abs() < tol, "{scheme}");
            }
        }
    }

    #[test]
    fn constant_has_zero_derivative() {
        let g = CircleGrid::periodic(16).unwrap();
        let d = g.derivative(&[3.5; 16]).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn exp_sin_spectral_accuracy() {
        let g = CircleGrid::periodic(64).unwrap();
        let f = g.sample(|y| y.sin().exp());
        let d = g.derivative(&f).unwrap();
        let err = g
            .coords()
            .iter()
            .zip(&d)
            .map(|(y, v)| (v - y.cos() * y.sin().exp()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn fd4_is_fourth_order() {
        let err = |n| {
            let g = CircleGrid::new(n, 2.0 * PI, Scheme::Fd4).unwrap();
            let f = g.sample(|y| y.sin().exp());
            let d = g.derivative(&f).unwrap();
            g.coords()
                .iter()
                .zip(&d)
                .map(|(y, v)| (v - y.cos() * y.sin().exp()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(64) / err(128);
        assert!(ratio > 14.0 && ratio < 18.0, "{ratio}");
    }

    #[test]
    fn filter_keeps_resolved_modes_and_removes_nyquist() {
        let g = CircleGrid::periodic(64).unwrap();
        let smooth = g.sample(|y| (5.0 * y).cos() + (12.0 * y).sin());
        let f = g.filter(&smooth).unwrap();
        assert!(smooth.iter().zip(&f).all(|(a, b)| (a - b).abs() < 1e-13));
        let nyq: Vec<f64> = (0..64).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!(g.filter(&nyq).unwrap().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let g = CircleGrid::periodic(16).unwrap();
        assert!(matches!(g.derivative(&[0.0; 8]), Err(Error::Shape(_))));
    }

    #[test]
    fn density_must_be_positive() {
        assert!(DensityField::new(vec![1.0, 0.0]).is_err());
        assert!(DensityField::new(vec![1.0, -1.0]).is_err());
    }
}
