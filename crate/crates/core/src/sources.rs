//! Prescribed vortex and anti-vortex locations and the singular background
//! functions that absorb their Dirac sources.
//!
//! A Dirac mass at `z` is replaced by a periodized Gaussian of width `sigma`
//! whose discrete integral is rescaled to exactly one, so every integral
//! identity of the continuous problem holds exactly on the grid.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::surface::{ScalarField, SurfaceError, TorusGeometry};

/// Default mollifier width in grid cells.
pub const DEFAULT_KAPPA: f64 = 2.0;

/// Images closer than this many widths are summed; `exp(-9^2/2)` is below
/// machine precision relative to the peak.
const IMAGE_RADIUS: f64 = 9.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SourceError {
    #[error("mollifier width {sigma} is below one grid cell ({cell})")]
    SigmaTooSmall { sigma: f64, cell: f64 },
    #[error("source position ({0}, {1}) is not finite")]
    NonFinitePosition(f64, f64),
    #[error("source multiplicity must be positive")]
    ZeroMultiplicity,
    #[error("{section} has a zero and a pole at the same point ({x}, {y}); cancel them first")]
    CoincidentZeroPole {
        section: &'static str,
        x: f64,
        y: f64,
    },
    #[error(transparent)]
    Surface(#[from] SurfaceError),
}

/// A zero or pole with integer multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointSource {
    pub position: [f64; 2],
    pub multiplicity: u32,
}

impl PointSource {
    pub fn new(x: f64, y: f64, multiplicity: u32) -> Self {
        Self {
            position: [x, y],
            multiplicity,
        }
    }

    pub fn unit(x: f64, y: f64) -> Self {
        Self::new(x, y, 1)
    }
}

/// Total multiplicities of the four source sets.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VortexCounts {
    pub n1: u32,
    pub p1: u32,
    pub n2: u32,
    pub p2: u32,
}

impl VortexCounts {
    pub fn new(n1: u32, p1: u32, n2: u32, p2: u32) -> Self {
        Self { n1, p1, n2, p2 }
    }

    pub fn is_vacuum(&self) -> bool {
        self.n1 + self.p1 + self.n2 + self.p2 == 0
    }
}

/// Zeros and poles of the two Higgs sections `q` and `p`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VortexConfiguration {
    pub zeros_q: Vec<PointSource>,
    pub poles_q: Vec<PointSource>,
    pub zeros_p: Vec<PointSource>,
    pub poles_p: Vec<PointSource>,
}

fn total(points: &[PointSource]) -> u32 {
    points.iter().map(|p| p.multiplicity).sum()
}

impl VortexConfiguration {
    /// Vortices only, as in the Tong--Wong system.
    pub fn vortices(zeros_q: Vec<PointSource>, zeros_p: Vec<PointSource>) -> Self {
        Self {
            zeros_q,
            zeros_p,
            ..Self::default()
        }
    }

    pub fn counts(&self) -> VortexCounts {
        VortexCounts {
            n1: total(&self.zeros_q),
            p1: total(&self.poles_q),
            n2: total(&self.zeros_p),
            p2: total(&self.poles_p),
        }
    }

    /// Same configuration with every position reduced into the
    /// fundamental domain.
    pub fn wrapped(&self, geom: &TorusGeometry) -> Self {
        let wrap = |v: &[PointSource]| {
            v.iter()
                .map(|p| PointSource {
                    position: geom.wrap(p.position),
                    multiplicity: p.multiplicity,
                })
                .collect()
        };
        Self {
            zeros_q: wrap(&self.zeros_q),
            poles_q: wrap(&self.poles_q),
            zeros_p: wrap(&self.zeros_p),
            poles_p: wrap(&self.poles_p),
        }
    }

    pub fn validate(&self, geom: &TorusGeometry) -> Result<(), SourceError> {
        let all = [&self.zeros_q, &self.poles_q, &self.zeros_p, &self.poles_p];
        for p in all.iter().flat_map(|v| v.iter()) {
            if !(p.position[0].is_finite() && p.position[1].is_finite()) {
                return Err(SourceError::NonFinitePosition(p.position[0], p.position[1]));
            }
            if p.multiplicity == 0 {
                return Err(SourceError::ZeroMultiplicity);
            }
        }
        let tol = 1e-12 * geom.l1().max(geom.l2());
        for (section, zeros, poles) in [
            ("q", &self.zeros_q, &self.poles_q),
            ("p", &self.zeros_p, &self.poles_p),
        ] {
            for z in zeros.iter() {
                if poles
                    .iter()
                    .any(|p| geom.distance(z.position, p.position) <= tol)
                {
                    let [x, y] = geom.wrap(z.position);
                    return Err(SourceError::CoincidentZeroPole { section, x, y });
                }
            }
        }
        Ok(())
    }
}

/// Default mollifier width `kappa * max(h1, h2)`.
pub fn default_sigma(geom: &TorusGeometry, kappa: f64) -> f64 {
    kappa * geom.max_spacing()
}

/// One-dimensional periodized Gaussian (unnormalized) at the grid nodes.
fn periodic_gaussian(n: usize, length: f64, center: f64, sigma: f64) -> Vec<f64> {
    let h = length / n as f64;
    let images = (IMAGE_RADIUS * sigma / length).ceil() as i64 + 1;
    (0..n)
        .map(|i| {
            let d0 = i as f64 * h - center;
            let d0 = d0 - length * (d0 / length).round();
            let mut s = 0.0;
            for m in -images..=images {
                let d = d0 + m as f64 * length;
                s += (-0.5 * d * d / (sigma * sigma)).exp();
            }
            s
        })
        .collect()
}

/// Periodized Gaussian approximation of the Dirac mass at `point`,
/// normalized so that its grid integral is exactly one.
pub fn mollified_delta(
    geom: &TorusGeometry,
    point: [f64; 2],
    sigma: f64,
) -> Result<ScalarField, SourceError> {
    let cell = geom.max_spacing();
    if sigma.is_nan() || sigma < cell {
        return Err(SourceError::SigmaTooSmall { sigma, cell });
    }
    if !(point[0].is_finite() && point[1].is_finite()) {
        return Err(SourceError::NonFinitePosition(point[0], point[1]));
    }
    let p = geom.wrap(point);
    let gx = periodic_gaussian(geom.n1(), geom.l1(), p[0], sigma);
    let gy = periodic_gaussian(geom.n2(), geom.l2(), p[1], sigma);
    let mut values = Vec::with_capacity(geom.len());
    for a in &gx {
        for b in &gy {
            values.push(a * b);
        }
    }
    let mass = geom.cell_area() * values.iter().sum::<f64>();
    for v in values.iter_mut() {
        *v /= mass;
    }
    Ok(ScalarField::from_values(geom, values)?)
}

/// Mean-zero solution of `Δw = -4πN/|S| + 4π Σ m_j δ_{z_j}` with the
/// deltas mollified at width `sigma`.
pub fn background(
    geom: &TorusGeometry,
    points: &[PointSource],
    sigma: f64,
) -> Result<ScalarField, SourceError> {
    let cell = geom.max_spacing();
    if sigma.is_nan() || sigma < cell {
        return Err(SourceError::SigmaTooSmall { sigma, cell });
    }
    let n = total(points);
    if n == 0 {
        return Ok(ScalarField::zeros(geom));
    }
    let mut rhs = vec![-4.0 * PI * n as f64 / geom.area(); geom.len()];
    for p in points {
        let delta = mollified_delta(geom, p.position, sigma)?;
        let weight = 4.0 * PI * p.multiplicity as f64;
        for (r, d) in rhs.iter_mut().zip(delta.values()) {
            *r += weight * d;
        }
    }
    let rhs = ScalarField::from_values(geom, rhs)?;
    Ok(rhs.inv_laplacian()?)
}

/// The four normalized backgrounds `u0^1, u0^2, v0^1, v0^2` built from
/// `Z(q), P(q), Z(p), P(p)`.
#[derive(Debug, Clone)]
pub struct BackgroundSet {
    pub u01: ScalarField,
    pub u02: ScalarField,
    pub v01: ScalarField,
    pub v02: ScalarField,
    pub counts: VortexCounts,
    pub sigma: f64,
}

impl BackgroundSet {
    pub fn build(
        geom: &TorusGeometry,
        config: &VortexConfiguration,
        sigma: f64,
    ) -> Result<Self, SourceError> {
        config.validate(geom)?;
        Ok(Self {
            u01: background(geom, &config.zeros_q, sigma)?,
            u02: background(geom, &config.poles_q, sigma)?,
            v01: background(geom, &config.zeros_p, sigma)?,
            v02: background(geom, &config.poles_p, sigma)?,
            counts: config.counts(),
            sigma,
        })
    }

    pub fn geometry(&self) -> &TorusGeometry {
        self.u01.geometry()
    }
}
