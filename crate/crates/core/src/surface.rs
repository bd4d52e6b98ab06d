//! Flat periodic torus: grid geometry, sampled scalar fields and the
//! spectral calculus (Laplacian, Poisson solve, quadrature) on them.
//!
//! Nodes sit at `(i*h1, j*h2)` for `0 <= i < n1`, `0 <= j < n2`, stored
//! row-major with flat index `i*n2 + j`. All derivatives are taken in
//! Fourier space with the symbol `-(k1^2 + k2^2)`, `k = 2*pi*m/L`. The
//! Nyquist mode keeps its (real) symbol.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

/// Relative tolerance on the mean of a Poisson right-hand side.
pub const MEAN_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurfaceError {
    #[error("invalid torus: {0}")]
    InvalidGeometry(String),
    #[error("right-hand side has mean {mean:e} (sup-norm {sup:e}); no periodic solution exists")]
    NonZeroMean { mean: f64, sup: f64 },
    #[error("expected {expected} grid values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),
}

struct TorusInner {
    l1: f64,
    l2: f64,
    n1: usize,
    n2: usize,
    fwd1: Arc<dyn Fft<f64>>,
    inv1: Arc<dyn Fft<f64>>,
    fwd2: Arc<dyn Fft<f64>>,
    inv2: Arc<dyn Fft<f64>>,
    /// |k|^2 per mode, same flat layout as the grid.
    k_sq: Vec<f64>,
}

/// Periodic rectangle `[0, L1) x [0, L2)` with an `n1 x n2` node grid.
///
/// Cheap to clone; FFT plans and wavenumber tables are shared.
#[derive(Clone)]
pub struct TorusGeometry {
    inner: Arc<TorusInner>,
}

impl fmt::Debug for TorusGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGeometry")
            .field("l1", &self.inner.l1)
            .field("l2", &self.inner.l2)
            .field("n1", &self.inner.n1)
            .field("n2", &self.inner.n2)
            .finish()
    }
}

impl PartialEq for TorusGeometry {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.l1 == other.inner.l1
                && self.inner.l2 == other.inner.l2
                && self.inner.n1 == other.inner.n1
                && self.inner.n2 == other.inner.n2)
    }
}

fn wavenumber(m: usize, n: usize, length: f64) -> f64 {
    let signed = if m <= n / 2 {
        m as f64
    } else {
        m as f64 - n as f64
    };
    2.0 * PI * signed / length
}

impl TorusGeometry {
    pub fn new(l1: f64, l2: f64, n1: usize, n2: usize) -> Result<Self, SurfaceError> {
        if !(l1.is_finite() && l2.is_finite() && l1 > 0.0 && l2 > 0.0) {
            return Err(SurfaceError::InvalidGeometry(format!(
                "side lengths must be positive and finite, got ({l1}, {l2})"
            )));
        }
        for n in [n1, n2] {
            if n < 8 || n % 2 != 0 {
                return Err(SurfaceError::InvalidGeometry(format!(
                    "grid sizes must be even and at least 8, got ({n1}, {n2})"
                )));
            }
        }
        let mut planner = FftPlanner::new();
        let kx: Vec<f64> = (0..n1).map(|m| wavenumber(m, n1, l1)).collect();
        let ky: Vec<f64> = (0..n2).map(|m| wavenumber(m, n2, l2)).collect();
        let mut k_sq = Vec::with_capacity(n1 * n2);
        for a in &kx {
            for b in &ky {
                k_sq.push(a * a + b * b);
            }
        }
        Ok(Self {
            inner: Arc::new(TorusInner {
                l1,
                l2,
                n1,
                n2,
                fwd1: planner.plan_fft_forward(n1),
                inv1: planner.plan_fft_inverse(n1),
                fwd2: planner.plan_fft_forward(n2),
                inv2: planner.plan_fft_inverse(n2),
                k_sq,
            }),
        })
    }

    /// Square torus of side `l` with `n x n` nodes.
    pub fn square(l: f64, n: usize) -> Result<Self, SurfaceError> {
        Self::new(l, l, n, n)
    }

    pub fn l1(&self) -> f64 {
        self.inner.l1
    }
    pub fn l2(&self) -> f64 {
        self.inner.l2
    }
    pub fn n1(&self) -> usize {
        self.inner.n1
    }
    pub fn n2(&self) -> usize {
        self.inner.n2
    }
    pub fn len(&self) -> usize {
        self.inner.n1 * self.inner.n2
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn area(&self) -> f64 {
        self.inner.l1 * self.inner.l2
    }
    pub fn h1(&self) -> f64 {
        self.inner.l1 / self.inner.n1 as f64
    }
    pub fn h2(&self) -> f64 {
        self.inner.l2 / self.inner.n2 as f64
    }
    /// Quadrature weight of one node.
    pub fn cell_area(&self) -> f64 {
        self.h1() * self.h2()
    }
    pub fn max_spacing(&self) -> f64 {
        self.h1().max(self.h2())
    }

    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        [i as f64 * self.h1(), j as f64 * self.h2()]
    }

    /// Reduces a point into the fundamental domain.
    pub fn wrap(&self, p: [f64; 2]) -> [f64; 2] {
        let w = |x: f64, l: f64| {
            let r = x.rem_euclid(l);
            // rem_euclid may round up to exactly l
            if r >= l {
                0.0
            } else {
                r
            }
        };
        [w(p[0], self.l1()), w(p[1], self.l2())]
    }

    /// Shortest periodic displacement `a - b`, components in `[-L/2, L/2)`.
    pub fn displacement(&self, a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
        let d = |x: f64, l: f64| x - l * (x / l).round();
        [d(a[0] - b[0], self.l1()), d(a[1] - b[1], self.l2())]
    }

    pub fn distance(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let d = self.displacement(a, b);
        d[0].hypot(d[1])
    }

    /// |k|^2 table in grid layout.
    pub fn wavenumber_sq(&self) -> &[f64] {
        &self.inner.k_sq
    }

    fn transpose(src: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); src.len()];
        for r in 0..rows {
            for c in 0..cols {
                out[c * rows + r] = src[r * cols + c];
            }
        }
        out
    }

    /// Unnormalized forward 2D DFT of real samples.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let (n1, n2) = (self.n1(), self.n2());
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.inner.fwd2.process(&mut buf);
        let mut t = Self::transpose(&buf, n1, n2);
        self.inner.fwd1.process(&mut t);
        Self::transpose(&t, n2, n1)
    }

    /// Inverse of [`forward`](Self::forward), keeping the real part.
    pub fn inverse_real(&self, spectrum: Vec<Complex64>) -> Vec<f64> {
        let (n1, n2) = (self.n1(), self.n2());
        let mut t = Self::transpose(&spectrum, n1, n2);
        self.inner.inv1.process(&mut t);
        let mut buf = Self::transpose(&t, n2, n1);
        self.inner.inv2.process(&mut buf);
        let scale = 1.0 / (n1 * n2) as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }

    /// Applies a radial Fourier multiplier `symbol(|k|^2)`.
    pub fn apply_symbol(&self, values: &[f64], symbol: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut spec = self.forward(values);
        for (c, &k2) in spec.iter_mut().zip(self.wavenumber_sq()) {
            *c *= symbol(k2);
        }
        self.inverse_real(spec)
    }

    /// Applies a 2x2 block Fourier multiplier to a pair of real fields.
    pub fn apply_block_symbol(
        &self,
        a: &[f64],
        b: &[f64],
        block: impl Fn(f64) -> [[f64; 2]; 2],
    ) -> (Vec<f64>, Vec<f64>) {
        let mut sa = self.forward(a);
        let mut sb = self.forward(b);
        for ((x, y), &k2) in sa.iter_mut().zip(sb.iter_mut()).zip(self.wavenumber_sq()) {
            let m = block(k2);
            let (p, q) = (*x, *y);
            *x = p * m[0][0] + q * m[0][1];
            *y = p * m[1][0] + q * m[1][1];
        }
        (self.inverse_real(sa), self.inverse_real(sb))
    }
}

/// Real function sampled on the nodes of a [`TorusGeometry`].
///
/// Binary operations between fields on different geometries panic.
#[derive(Clone, Debug)]
pub struct ScalarField {
    geometry: TorusGeometry,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn from_values(geometry: &TorusGeometry, values: Vec<f64>) -> Result<Self, SurfaceError> {
        if values.len() != geometry.len() {
            return Err(SurfaceError::ShapeMismatch {
                expected: geometry.len(),
                got: values.len(),
            });
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(SurfaceError::NonFinite(idx));
        }
        Ok(Self {
            geometry: geometry.clone(),
            values,
        })
    }

    /// Internal constructor for values known to be finite.
    pub(crate) fn from_raw(geometry: &TorusGeometry, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), geometry.len());
        Self {
            geometry: geometry.clone(),
            values,
        }
    }

    pub fn zeros(geometry: &TorusGeometry) -> Self {
        Self::constant(geometry, 0.0)
    }

    pub fn constant(geometry: &TorusGeometry, c: f64) -> Self {
        Self::from_raw(geometry, vec![c; geometry.len()])
    }

    /// Samples `f(x1, x2)` at every node.
    pub fn from_fn(geometry: &TorusGeometry, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(geometry.len());
        for i in 0..geometry.n1() {
            for j in 0..geometry.n2() {
                let [x1, x2] = geometry.node(i, j);
                values.push(f(x1, x2));
            }
        }
        Self::from_raw(geometry, values)
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geometry
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.geometry.n2() + j]
    }

    fn check_compatible(&self, other: &ScalarField) {
        assert!(
            self.geometry == other.geometry,
            "incompatible field geometries: {:?} vs {:?}",
            self.geometry,
            other.geometry
        );
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(&self.geometry, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        self.check_compatible(other);
        Self::from_raw(
            &self.geometry,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &ScalarField) -> Self {
        self.zip_map(other, |a, b| a + alpha * b)
    }

    pub fn laplacian(&self) -> Self {
        Self::from_raw(
            &self.geometry,
            self.geometry.apply_symbol(&self.values, |k2| -k2),
        )
    }

    /// Mean-zero solution `w` of `laplacian(w) = self`.
    pub fn inv_laplacian(&self) -> Result<Self, SurfaceError> {
        let mean = self.mean();
        let sup = self.sup_norm();
        if mean.abs() > MEAN_TOL * sup {
            return Err(SurfaceError::NonZeroMean { mean, sup });
        }
        Ok(Self::from_raw(
            &self.geometry,
            self.geometry
                .apply_symbol(&self.values, |k2| if k2 == 0.0 { 0.0 } else { -1.0 / k2 }),
        ))
    }

    /// Trapezoidal quadrature, exact for trigonometric polynomials
    /// resolved by the grid.
    pub fn integrate(&self) -> f64 {
        self.geometry.cell_area() * self.values.iter().sum::<f64>()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// `∫ |∇w|^2` by Parseval.
    pub fn grad_energy(&self) -> f64 {
        self.grad_inner(self)
    }

    /// `∫ ∇a · ∇b` by Parseval.
    pub fn grad_inner(&self, other: &ScalarField) -> f64 {
        self.check_compatible(other);
        let sa = self.geometry.forward(&self.values);
        let sb = if std::ptr::eq(self, other) {
            sa.clone()
        } else {
            self.geometry.forward(&other.values)
        };
        let sum: f64 = sa
            .iter()
            .zip(&sb)
            .zip(self.geometry.wavenumber_sq())
            .map(|((a, b), &k2)| k2 * (a * b.conj()).re)
            .sum();
        let n = self.geometry.len() as f64;
        sum * self.geometry.area() / (n * n)
    }

    /// `∫ a b`.
    pub fn dot(&self, other: &ScalarField) -> f64 {
        self.check_compatible(other);
        self.geometry.cell_area()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `(∫ w^2)^(1/2)`.
    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `∫ |w|`.
    pub fn l1_norm(&self) -> f64 {
        self.geometry.cell_area() * self.values.iter().map(|v| v.abs()).sum::<f64>()
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Flat index of the smallest sample.
    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for (k, v) in self.values.iter().enumerate() {
            if *v < self.values[best] {
                best = k;
            }
        }
        best
    }

    /// Node coordinates of a flat index.
    pub fn node_of(&self, flat: usize) -> [f64; 2] {
        let n2 = self.geometry.n2();
        self.geometry.node(flat / n2, flat % n2)
    }

    /// Largest pointwise difference to `other`.
    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.check_compatible(other);
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Field value at an arbitrary point via trigonometric interpolation.
    pub fn interpolate(&self, p: [f64; 2]) -> f64 {
        let g = &self.geometry;
        let spec = g.forward(&self.values);
        let (n1, n2) = (g.n1(), g.n2());
        let mut sum = 0.0;
        for m1 in 0..n1 {
            let k1 = wavenumber(m1, n1, g.l1());
            // split Nyquist rows symmetrically so the interpolant is real
            let w1 = if n1 % 2 == 0 && m1 == n1 / 2 {
                0.5
            } else {
                1.0
            };
            for m2 in 0..n2 {
                let k2 = wavenumber(m2, n2, g.l2());
                let w2 = if n2 % 2 == 0 && m2 == n2 / 2 {
                    0.5
                } else {
                    1.0
                };
                let c = spec[m1 * n2 + m2];
                let mut term = (c * Complex64::from_polar(1.0, k1 * p[0] + k2 * p[1])).re;
                if w1 < 1.0 || w2 < 1.0 {
                    // average with the mirrored Nyquist frequency
                    let kk1 = if w1 < 1.0 { -k1 } else { k1 };
                    let kk2 = if w2 < 1.0 { -k2 } else { k2 };
                    let mirrored = (c * Complex64::from_polar(1.0, kk1 * p[0] + kk2 * p[1])).re;
                    term = 0.5 * (term + mirrored);
                }
                sum += term;
            }
        }
        sum / (n1 * n2) as f64
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: f64) -> ScalarField {
        self.map(|a| a * rhs)
    }
}

impl Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        self.map(|a| -a)
    }
}
