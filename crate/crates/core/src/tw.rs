//! Multi-vortex solutions of the Tong--Wong system
//!
//! ```text
//! Δu = 4(e^u - 1) - 2(e^v - 1) + 4π Σ_{Z(q)} δ
//! Δv = -2(e^u - 1) + 2(e^v - 1) + 4π Σ_{Z(p)} δ
//! ```
//!
//! With `u = u0^1 + U`, `v = v0^1 + V` and the substitution `f = U`,
//! `h = U + 2V`, solutions are exactly the critical points of
//!
//! ```text
//! I(f, h) = ½(‖∇f‖² + ‖∇h‖²)
//!         + 4∫(e^{u0^1+f} - f + e^{v0^1+(h-f)/2} - (h-f)/2)
//!         + (4πN1/|S|)∫f + (4π(N1+2N2)/|S|)∫h,
//! ```
//!
//! which is strictly convex and coercive exactly when `N1 + 2N2 < |S|/2π`.
//! [`TwProblem::solve`] minimizes it with damped Newton (CG inner solves,
//! Armijo backtracking) or preconditioned gradient descent.

use std::f64::consts::PI;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::krylov::pcg;
use crate::sources::{background, BackgroundSet, SourceError, VortexConfiguration, VortexCounts};
use crate::surface::{ScalarField, TorusGeometry};
use crate::EXP_CLAMP;

#[derive(Debug, Error)]
pub enum TwError {
    #[error(
        "Bradlow bound violated: N1 + 2N2 = {weighted} is not below |S|/2π = {limit:.6} \
         (margin |S| - 2π(N1+2N2) = {margin:.6})"
    )]
    BradlowViolation {
        weighted: u32,
        limit: f64,
        margin: f64,
    },
    #[error("the Tong--Wong system has vortices only, got P1 = {p1}, P2 = {p2}")]
    PolesNotAllowed { p1: u32, p2: u32 },
    #[error("no convergence in {iterations} iterations (gradient sup-norm {gradient_norm:e})")]
    MaxIterExceeded {
        iterations: usize,
        gradient_norm: f64,
        trace: Vec<TwIterate>,
    },
    #[error("line search found no decrease at iteration {iteration} (gradient sup-norm {gradient_norm:e})")]
    LineSearchFailed {
        iteration: usize,
        gradient_norm: f64,
        trace: Vec<TwIterate>,
    },
    #[error("exponent overflow guard tripped twice at iteration {iteration}; iterate diverged")]
    DivergedIterate {
        iteration: usize,
        trace: Vec<TwIterate>,
    },
    #[error(transparent)]
    Sources(#[from] SourceError),
}

impl TwError {
    /// Iteration history, when the error came out of a solve.
    pub fn trace(&self) -> Option<&[TwIterate]> {
        match self {
            TwError::MaxIterExceeded { trace, .. }
            | TwError::LineSearchFailed { trace, .. }
            | TwError::DivergedIterate { trace, .. } => Some(trace),
            _ => None,
        }
    }
}

/// `a1 = ∫e^u`, `a2 = ∫e^v` at any solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BradlowConstants {
    pub a1: f64,
    pub a2: f64,
}

impl BradlowConstants {
    pub fn from_counts(n1: u32, n2: u32, area: f64) -> Self {
        Self {
            a1: area - 2.0 * PI * (n1 + n2) as f64,
            a2: area - 2.0 * PI * (n1 + 2 * n2) as f64,
        }
    }

    /// The Bradlow bound `a2 > 0` (which implies `a1 > 0`).
    pub fn holds(&self) -> bool {
        self.a2 > 0.0
    }
}

/// Checks `N1 + 2N2 < |S|/2π` for a vortex-only configuration.
pub fn check_bradlow(
    config: &VortexConfiguration,
    geom: &TorusGeometry,
) -> Result<BradlowConstants, TwError> {
    let c = config.counts();
    if c.p1 != 0 || c.p2 != 0 {
        return Err(TwError::PolesNotAllowed { p1: c.p1, p2: c.p2 });
    }
    bradlow_constants(c.n1, c.n2, geom.area())
}

fn bradlow_constants(n1: u32, n2: u32, area: f64) -> Result<BradlowConstants, TwError> {
    let c = BradlowConstants::from_counts(n1, n2, area);
    if c.holds() {
        Ok(c)
    } else {
        Err(TwError::BradlowViolation {
            weighted: n1 + 2 * n2,
            limit: area / (2.0 * PI),
            margin: c.a2,
        })
    }
}

/// A value computed with the exponent clamp; `clamped` reports whether any
/// argument exceeded [`EXP_CLAMP`].
#[derive(Debug, Clone)]
pub struct Guarded<T> {
    pub value: T,
    pub clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwMethod {
    /// Damped Newton with preconditioned CG inner solves.
    Newton,
    /// Preconditioned steepest descent.
    Gradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initialization {
    Zero,
    /// Independent uniform noise in `[-amplitude, amplitude]` on `f` and `h`.
    Random {
        seed: u64,
        amplitude: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub method: TwMethod,
    pub init: Initialization,
}

impl Default for TwOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200,
            method: TwMethod::Newton,
            init: Initialization::Zero,
        }
    }
}

/// One accepted iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwIterate {
    pub iteration: usize,
    pub functional: f64,
    pub gradient_sup: f64,
    /// Step length that produced this iterate (0 for the initial point).
    pub step: f64,
    pub inner_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct TwSolution {
    /// `U = f`.
    pub u_shift: ScalarField,
    /// `V = (h - f)/2`.
    pub v_shift: ScalarField,
    /// `u = u0^1 + U = ln|q|^2`.
    pub u: ScalarField,
    /// `v = v0^1 + V = ln|p|^2`.
    pub v: ScalarField,
    pub iterations: usize,
    pub final_gradient_norm: f64,
    pub functional_value: f64,
    pub trace: Vec<TwIterate>,
}

/// `∫(1 - e^u)` and `∫(1 - e^v)` with the values forced by the counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwQuantizedIntegrals {
    pub iu: f64,
    pub iv: f64,
    pub expected_iu: f64,
    pub expected_iv: f64,
}

impl TwQuantizedIntegrals {
    pub fn relative_errors(&self) -> (f64, f64) {
        let rel = |x: f64, e: f64| {
            if e == 0.0 {
                x.abs()
            } else {
                ((x - e) / e).abs()
            }
        };
        (
            rel(self.iu, self.expected_iu),
            rel(self.iv, self.expected_iv),
        )
    }
}

fn guarded_exp(x: f64, clamped: &mut bool) -> f64 {
    if x > EXP_CLAMP {
        *clamped = true;
        EXP_CLAMP.exp()
    } else {
        x.exp()
    }
}

/// Pointwise exponentials `e^{u0^1+f}` and `e^{v0^1+(h-f)/2}`.
struct Potentials {
    eu: Vec<f64>,
    ev: Vec<f64>,
    clamped: bool,
}

#[derive(Debug, Clone)]
pub struct TwProblem {
    geometry: TorusGeometry,
    n1: u32,
    n2: u32,
    u01: ScalarField,
    v01: ScalarField,
    constants: BradlowConstants,
    sigma: f64,
}

impl TwProblem {
    /// Builds the backgrounds for `config` and checks the Bradlow bound.
    pub fn new(
        geometry: &TorusGeometry,
        config: &VortexConfiguration,
        sigma: f64,
    ) -> Result<Self, TwError> {
        let constants = check_bradlow(config, geometry)?;
        config.validate(geometry)?;
        let c = config.counts();
        Ok(Self {
            geometry: geometry.clone(),
            n1: c.n1,
            n2: c.n2,
            u01: background(geometry, &config.zeros_q, sigma)?,
            v01: background(geometry, &config.zeros_p, sigma)?,
            constants,
            sigma,
        })
    }

    /// Uses the `q`- and `p`-zero backgrounds of an existing set.
    pub fn from_backgrounds(set: &BackgroundSet) -> Result<Self, TwError> {
        let c = set.counts;
        if c.p1 != 0 || c.p2 != 0 {
            return Err(TwError::PolesNotAllowed { p1: c.p1, p2: c.p2 });
        }
        let geometry = set.geometry().clone();
        let constants = bradlow_constants(c.n1, c.n2, geometry.area())?;
        Ok(Self {
            geometry,
            n1: c.n1,
            n2: c.n2,
            u01: set.u01.clone(),
            v01: set.v01.clone(),
            constants,
            sigma: set.sigma,
        })
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geometry
    }
    pub fn counts(&self) -> VortexCounts {
        VortexCounts::new(self.n1, 0, self.n2, 0)
    }
    pub fn constants(&self) -> BradlowConstants {
        self.constants
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn u01(&self) -> &ScalarField {
        &self.u01
    }
    pub fn v01(&self) -> &ScalarField {
        &self.v01
    }

    fn source_f(&self) -> f64 {
        4.0 * PI * self.n1 as f64 / self.geometry.area()
    }

    fn source_h(&self) -> f64 {
        4.0 * PI * (self.n1 + 2 * self.n2) as f64 / self.geometry.area()
    }

    fn potentials(&self, f: &[f64], h: &[f64]) -> Potentials {
        let mut clamped = false;
        let n = f.len();
        let mut eu = Vec::with_capacity(n);
        let mut ev = Vec::with_capacity(n);
        for k in 0..n {
            eu.push(guarded_exp(self.u01.values()[k] + f[k], &mut clamped));
            ev.push(guarded_exp(
                self.v01.values()[k] + 0.5 * (h[k] - f[k]),
                &mut clamped,
            ));
        }
        if clamped {
            warn!("exponent clamped at {EXP_CLAMP}; iterate is diverging");
        }
        Potentials { eu, ev, clamped }
    }

    /// Lower bound `4(ln(|S|/a1) + ln(|S|/a2))` on the functional.
    pub fn functional_lower_bound(&self) -> f64 {
        let s = self.geometry.area();
        4.0 * ((s / self.constants.a1).ln() + (s / self.constants.a2).ln())
    }

    /// Evaluates `I(f, h)`.
    pub fn functional(&self, f: &ScalarField, h: &ScalarField) -> Guarded<f64> {
        let p = self.potentials(f.values(), h.values());
        let mut pot = 0.0;
        for k in 0..f.values().len() {
            let (fk, hk) = (f.values()[k], h.values()[k]);
            pot += p.eu[k] - fk + p.ev[k] - 0.5 * (hk - fk);
        }
        let cell = self.geometry.cell_area();
        let value = 0.5 * (f.grad_energy() + h.grad_energy())
            + 4.0 * cell * pot
            + self.source_f() * f.integrate()
            + self.source_h() * h.integrate();
        Guarded {
            value,
            clamped: p.clamped,
        }
    }

    fn gradient_from(
        &self,
        f: &ScalarField,
        h: &ScalarField,
        p: &Potentials,
    ) -> (ScalarField, ScalarField) {
        let lf = f.laplacian();
        let lh = h.laplacian();
        let (sf, sh) = (self.source_f(), self.source_h());
        let n = self.geometry.len();
        let mut gf = Vec::with_capacity(n);
        let mut gh = Vec::with_capacity(n);
        for k in 0..n {
            gf.push(-lf.values()[k] + 4.0 * (p.eu[k] - 1.0) - 2.0 * (p.ev[k] - 1.0) + sf);
            gh.push(-lh.values()[k] + 2.0 * (p.ev[k] - 1.0) + sh);
        }
        (
            ScalarField::from_raw(&self.geometry, gf),
            ScalarField::from_raw(&self.geometry, gh),
        )
    }

    /// L²-gradient of `I`; its zeros solve the shifted system.
    pub fn gradient(
        &self,
        f: &ScalarField,
        h: &ScalarField,
    ) -> Guarded<(ScalarField, ScalarField)> {
        let p = self.potentials(f.values(), h.values());
        Guarded {
            value: self.gradient_from(f, h, &p),
            clamped: p.clamped,
        }
    }

    /// `I(f + αdf, h + αdh) - I(f, h)` without cancellation.
    fn functional_change(
        &self,
        (f, h): (&ScalarField, &ScalarField),
        (df, dh): (&ScalarField, &ScalarField),
        p: &Potentials,
        cross: (f64, f64),
        quad: (f64, f64),
        alpha: f64,
    ) -> Guarded<f64> {
        let mut clamped = false;
        let mut pot = 0.0;
        for k in 0..df.values().len() {
            let (a, b) = (df.values()[k], dh.values()[k]);
            let arg_u = self.u01.values()[k] + f.values()[k] + alpha * a;
            let arg_v = self.v01.values()[k]
                + 0.5 * (h.values()[k] - f.values()[k])
                + 0.5 * alpha * (b - a);
            if arg_u > EXP_CLAMP || arg_v > EXP_CLAMP {
                clamped = true;
            }
            pot += p.eu[k] * (alpha * a).exp_m1() - alpha * a
                + p.ev[k] * (0.5 * alpha * (b - a)).exp_m1()
                - 0.5 * alpha * (b - a);
        }
        let value = alpha * (cross.0 + cross.1)
            + 0.5 * alpha * alpha * (quad.0 + quad.1)
            + 4.0 * self.geometry.cell_area() * pot
            + alpha * (self.source_f() * df.integrate() + self.source_h() * dh.integrate());
        Guarded {
            value: if clamped { f64::INFINITY } else { value },
            clamped,
        }
    }

    fn initial_guess(&self, init: Initialization) -> (ScalarField, ScalarField) {
        match init {
            Initialization::Zero => (
                ScalarField::zeros(&self.geometry),
                ScalarField::zeros(&self.geometry),
            ),
            Initialization::Random { seed, amplitude } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let n = self.geometry.len();
                let mut noise = || -> Vec<f64> {
                    (0..n)
                        .map(|_| amplitude * rng.gen_range(-1.0..=1.0))
                        .collect()
                };
                let f = noise();
                let h = noise();
                (
                    ScalarField::from_raw(&self.geometry, f),
                    ScalarField::from_raw(&self.geometry, h),
                )
            }
        }
    }

    /// Minimizes `I` and returns `(U, V) = (f, (h - f)/2)`.
    pub fn solve(&self, opts: &TwOptions) -> Result<TwSolution, TwError> {
        let g = &self.geometry;
        let n = g.len();
        let cell = g.cell_area();
        let (mut f, mut h) = self.initial_guess(opts.init);
        let mut trace = Vec::new();

        let start = self.functional(&f, &h);
        if start.clamped {
            return Err(TwError::DivergedIterate {
                iteration: 0,
                trace,
            });
        }
        let mut value = start.value;
        let mut last_step = 0.0;
        let mut last_inner = 0;
        let mut iteration = 0;
        loop {
            let p = self.potentials(f.values(), h.values());
            let (gf, gh) = self.gradient_from(&f, &h, &p);
            let gnorm = gf.sup_norm().max(gh.sup_norm());
            trace.push(TwIterate {
                iteration,
                functional: value,
                gradient_sup: gnorm,
                step: last_step,
                inner_iterations: last_inner,
            });
            if gnorm < opts.tol {
                let v_shift = h.zip_map(&f, |hv, fv| 0.5 * (hv - fv));
                return Ok(TwSolution {
                    u: &self.u01 + &f,
                    v: &self.v01 + &v_shift,
                    u_shift: f,
                    v_shift,
                    iterations: iteration,
                    final_gradient_norm: gnorm,
                    functional_value: value,
                    trace,
                });
            }
            if iteration >= opts.max_iter {
                return Err(TwError::MaxIterExceeded {
                    iterations: iteration,
                    gradient_norm: gnorm,
                    trace,
                });
            }

            // Hessian potential blocks [[4eu + ev, -ev], [-ev, ev]]
            let a_diag: Vec<f64> = (0..n).map(|k| 4.0 * p.eu[k] + p.ev[k]).collect();
            let b_diag = &p.ev;
            let a_bar = a_diag.iter().sum::<f64>() / n as f64;
            let b_bar = b_diag.iter().sum::<f64>() / n as f64;
            let precondition = |r: &[f64]| -> Vec<f64> {
                let (x, y) = g.apply_block_symbol(&r[..n], &r[n..], |k2| {
                    let (m11, m12, m22) = (k2 + a_bar, -b_bar, k2 + b_bar);
                    let det = m11 * m22 - m12 * m12;
                    [[m22 / det, -m12 / det], [-m12 / det, m11 / det]]
                });
                [x, y].concat()
            };
            let mut rhs: Vec<f64> = Vec::with_capacity(2 * n);
            rhs.extend(gf.values().iter().map(|v| -v));
            rhs.extend(gh.values().iter().map(|v| -v));

            let (dir, inner) = match opts.method {
                TwMethod::Newton => {
                    let apply = |x: &[f64]| -> Vec<f64> {
                        let lx = g.apply_symbol(&x[..n], |k2| k2);
                        let ly = g.apply_symbol(&x[n..], |k2| k2);
                        let mut out = Vec::with_capacity(2 * n);
                        for k in 0..n {
                            out.push(lx[k] + a_diag[k] * x[k] - b_diag[k] * x[n + k]);
                        }
                        for k in 0..n {
                            out.push(ly[k] - b_diag[k] * x[k] + b_diag[k] * x[n + k]);
                        }
                        out
                    };
                    let eta = gnorm.clamp(1e-10, 1e-1);
                    let (d, stats) = pcg(apply, precondition, &rhs, eta, 500);
                    (d, stats.iterations)
                }
                TwMethod::Gradient => (precondition(&rhs), 0),
            };
            let df = ScalarField::from_raw(g, dir[..n].to_vec());
            let dh = ScalarField::from_raw(g, dir[n..].to_vec());
            let slope = cell
                * (gf
                    .values()
                    .iter()
                    .zip(df.values())
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    + gh.values()
                        .iter()
                        .zip(dh.values())
                        .map(|(a, b)| a * b)
                        .sum::<f64>());
            let cross = (f.grad_inner(&df), h.grad_inner(&dh));
            let quad = (df.grad_energy(), dh.grad_energy());

            let mut alpha = 1.0;
            let mut trips = 0;
            let mut accepted = None;
            for _ in 0..60 {
                let change = self.functional_change((&f, &h), (&df, &dh), &p, cross, quad, alpha);
                if change.clamped {
                    trips += 1;
                    if trips >= 2 {
                        return Err(TwError::DivergedIterate { iteration, trace });
                    }
                } else {
                    trips = 0;
                    if change.value <= 1e-4 * alpha * slope && change.value < 0.0 {
                        accepted = Some(change.value);
                        break;
                    }
                }
                alpha *= 0.5;
            }
            let Some(delta) = accepted else {
                return Err(TwError::LineSearchFailed {
                    iteration,
                    gradient_norm: gnorm,
                    trace,
                });
            };
            f = f.axpy(alpha, &df);
            h = h.axpy(alpha, &dh);
            value += delta;
            last_step = alpha;
            last_inner = inner;
            iteration += 1;
        }
    }

    /// Residuals `ΔU - rhs` of the shifted system for given `(U, V)`.
    pub fn residuals(
        &self,
        u_shift: &ScalarField,
        v_shift: &ScalarField,
    ) -> (ScalarField, ScalarField) {
        let area = self.geometry.area();
        let cu = 4.0 * PI * self.n1 as f64 / area;
        let cv = 4.0 * PI * self.n2 as f64 / area;
        let eu = (&self.u01 + u_shift).map(f64::exp);
        let ev = (&self.v01 + v_shift).map(f64::exp);
        let lu = u_shift.laplacian();
        let lv = v_shift.laplacian();
        let n = self.geometry.len();
        let mut r1 = Vec::with_capacity(n);
        let mut r2 = Vec::with_capacity(n);
        for k in 0..n {
            let (a, b) = (eu.values()[k] - 1.0, ev.values()[k] - 1.0);
            r1.push(lu.values()[k] - (4.0 * a - 2.0 * b + cu));
            r2.push(lv.values()[k] - (-2.0 * a + 2.0 * b + cv));
        }
        (
            ScalarField::from_raw(&self.geometry, r1),
            ScalarField::from_raw(&self.geometry, r2),
        )
    }

    pub fn quantized_integrals(&self, sol: &TwSolution) -> TwQuantizedIntegrals {
        let iu = sol.u.map(|u| 1.0 - u.exp()).integrate();
        let iv = sol.v.map(|v| 1.0 - v.exp()).integrate();
        TwQuantizedIntegrals {
            iu,
            iv,
            expected_iu: 2.0 * PI * (self.n1 + self.n2) as f64,
            expected_iv: 2.0 * PI * (self.n1 + 2 * self.n2) as f64,
        }
    }
}
