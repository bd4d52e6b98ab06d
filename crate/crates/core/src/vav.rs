//! Coexisting vortices and anti-vortices: the extended system
//!
//! ```text
//! Δu =  8 f(u) - 4 f(v) + 4π Σ_{Z(q)} δ - 4π Σ_{P(q)} δ
//! Δv = -4 f(u) + 4 f(v) + 4π Σ_{Z(p)} δ - 4π Σ_{P(p)} δ,    f(w) = tanh(w/2)
//! ```
//!
//! written for `u = u0^1 - u0^2 + U`, `v = v0^1 - v0^2 + V`. Integrating
//! over the torus fixes `∫f(u) = a|S|`, `∫f(v) = b|S|`, which is solvable
//! only when `|a| < 1` and `|b| < 1`.
//!
//! Two solvers are provided: damped Newton on the full `(U, V)`, and the
//! relaxed fixed-point iteration of the mean-constrained operator `T`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::krylov::pcg;
use crate::sources::{BackgroundSet, SourceError, VortexConfiguration, VortexCounts};
use crate::surface::{ScalarField, TorusGeometry};

/// Search interval for the constraint shift.
pub const SHIFT_BRACKET: f64 = 700.0;
/// Tolerance on `|∫f - target| / |S|` for the constraint shift.
pub const SHIFT_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum VavError {
    #[error(
        "inadmissible sources: |a| = {:.6}, |b| = {:.6} (need both < 1; margins {margin_c1:.6}, {margin_c2:.6})",
        a.abs(),
        b.abs()
    )]
    Inadmissible {
        a: f64,
        b: f64,
        margin_c1: f64,
        margin_c2: f64,
    },
    #[error("constraint shift: ∫f does not cross {target} on |c| <= {SHIFT_BRACKET} (range [{low}, {high}])")]
    BracketFailure { target: f64, low: f64, high: f64 },
    #[error("no convergence in {iterations} iterations (residual {residual:e})")]
    MaxIterExceeded {
        iterations: usize,
        residual: f64,
        trace: Vec<VavIterate>,
    },
    #[error(
        "fixed-point iteration stagnated after {iterations} iterations (residual {residual:e})"
    )]
    Stagnation {
        iterations: usize,
        residual: f64,
        trace: Vec<VavIterate>,
    },
    #[error("line search found no decrease at iteration {iteration} (residual {residual:e})")]
    LineSearchFailed {
        iteration: usize,
        residual: f64,
        trace: Vec<VavIterate>,
    },
    #[error(transparent)]
    Sources(#[from] SourceError),
}

impl VavError {
    pub fn trace(&self) -> Option<&[VavIterate]> {
        match self {
            VavError::MaxIterExceeded { trace, .. }
            | VavError::Stagnation { trace, .. }
            | VavError::LineSearchFailed { trace, .. } => Some(trace),
            _ => None,
        }
    }
}

/// `f(s1, s2, t) = (e^{s1+t} - e^{s2}) / (e^{s1+t} + e^{s2})`, evaluated as
/// `tanh((s1 - s2 + t)/2)`.
pub fn f_fun(s1: f64, s2: f64, t: f64) -> f64 {
    (0.5 * (s1 - s2 + t)).tanh()
}

/// `∂f/∂t = ½ sech²((s1 - s2 + t)/2)`, in `(0, 1/2]`.
pub fn f_fun_dt(s1: f64, s2: f64, t: f64) -> f64 {
    let c = (0.5 * (s1 - s2 + t)).cosh();
    0.5 / (c * c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityScalars {
    pub a: f64,
    pub b: f64,
}

impl AdmissibilityScalars {
    pub fn from_counts(c: VortexCounts, area: f64) -> Self {
        let d1 = c.n1 as f64 - c.p1 as f64;
        let d2 = c.n2 as f64 - c.p2 as f64;
        // π·d is formed first so that |S| = π·d gives |a| = 1 exactly
        Self {
            a: -(PI * (d1 + d2)) / area,
            b: -(PI * (d1 + 2.0 * d2)) / area,
        }
    }

    /// `1 - |a|`, `1 - |b|`; both positive iff admissible.
    pub fn margins(&self) -> (f64, f64) {
        (1.0 - self.a.abs(), 1.0 - self.b.abs())
    }

    pub fn is_admissible(&self) -> bool {
        self.a.abs() < 1.0 && self.b.abs() < 1.0
    }

    fn check(self) -> Result<Self, VavError> {
        if self.is_admissible() {
            Ok(self)
        } else {
            let (margin_c1, margin_c2) = self.margins();
            Err(VavError::Inadmissible {
                a: self.a,
                b: self.b,
                margin_c1,
                margin_c2,
            })
        }
    }
}

pub fn check_admissibility(
    config: &VortexConfiguration,
    geom: &TorusGeometry,
) -> Result<AdmissibilityScalars, VavError> {
    AdmissibilityScalars::from_counts(config.counts(), geom.area()).check()
}

fn shift_integral(base: &[f64], c: f64, cell: f64) -> (f64, f64) {
    let mut s = 0.0;
    let mut ds = 0.0;
    for &w in base {
        s += f_fun(w, 0.0, c);
        ds += f_fun_dt(w, 0.0, c);
    }
    (cell * s, cell * ds)
}

/// The unique `c` with `∫ f(base + c) = target`, where `base = s1 - s2 + W`
/// has been formed by the caller.
fn solve_shift(base: &[f64], geom: &TorusGeometry, target: f64) -> Result<f64, VavError> {
    let cell = geom.cell_area();
    let area = geom.area();
    let tol = SHIFT_TOL * area;
    let (mut lo, mut hi) = (-SHIFT_BRACKET, SHIFT_BRACKET);
    let low = shift_integral(base, lo, cell).0;
    let high = shift_integral(base, hi, cell).0;
    if !(low < target && high > target) {
        return Err(VavError::BracketFailure { target, low, high });
    }
    let mean = base.iter().sum::<f64>() / base.len() as f64;
    let guess = 2.0 * (target / area).clamp(-1.0 + 1e-15, 1.0 - 1e-15).atanh() - mean;
    let mut c = guess.clamp(lo, hi);
    for _ in 0..400 {
        let (val, der) = shift_integral(base, c, cell);
        let res = val - target;
        if res.abs() <= tol {
            return Ok(c);
        }
        if res > 0.0 {
            hi = c;
        } else {
            lo = c;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(lo.abs()).max(1.0) {
            return Ok(c);
        }
        let newton = c - res / der;
        c = if der > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(c)
}

/// Lemma-style constraint shift: the unique `c` such that
/// `∫ f(s1, s2, W + c) = target`.
pub fn constraint_shift(
    w: &ScalarField,
    s1: &ScalarField,
    s2: &ScalarField,
    target: f64,
) -> Result<f64, VavError> {
    let base = (&(s1 - s2) + w).into_values();
    solve_shift(&base, w.geometry(), target)
}

/// Image of the operator `T` together with the shifts used.
#[derive(Debug, Clone)]
pub struct TImage {
    pub u: ScalarField,
    pub v: ScalarField,
    pub c1: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VavMethod {
    Newton,
    /// `U <- (1 - relaxation) U + relaxation T(U)`.
    FixedPoint {
        relaxation: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VavOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub method: VavMethod,
}

impl VavOptions {
    pub fn newton() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
            method: VavMethod::Newton,
        }
    }

    pub fn fixed_point(relaxation: f64) -> Self {
        Self {
            tol: 1e-8,
            max_iter: 20_000,
            method: VavMethod::FixedPoint { relaxation },
        }
    }
}

impl Default for VavOptions {
    fn default() -> Self {
        Self::newton()
    }
}

/// Number of iterations over which fixed-point progress is judged.
pub const STAGNATION_WINDOW: usize = 50;
/// Minimum relative residual reduction over the window.
pub const STAGNATION_REDUCTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VavIterate {
    pub iteration: usize,
    /// Sup-norm residual of the shifted system.
    pub residual_sup: f64,
    /// `sup |T(U) - U|` in fixed-point mode.
    pub fixed_point_residual: Option<f64>,
    pub step: f64,
    pub inner_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct VavSolution {
    /// Full correction `U` (shift `c1` folded in).
    pub u_shift: ScalarField,
    pub v_shift: ScalarField,
    /// Final constraint shifts in fixed-point mode, zero for Newton.
    pub c1: f64,
    pub c2: f64,
    /// `u = u0^1 - u0^2 + U`.
    pub u: ScalarField,
    pub v: ScalarField,
    pub iterations: usize,
    pub final_residual: f64,
    pub trace: Vec<VavIterate>,
}

/// `∫(1-e^u)/(1+e^u)` and `∫(1-e^v)/(1+e^v)` with their forced values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VavQuantizedIntegrals {
    pub iu: f64,
    pub iv: f64,
    pub expected_iu: f64,
    pub expected_iv: f64,
}

impl VavQuantizedIntegrals {
    /// Relative errors, or absolute ones where the expected value is zero.
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

#[derive(Debug, Clone)]
pub struct VavProblem {
    geometry: TorusGeometry,
    backgrounds: BackgroundSet,
    scalars: AdmissibilityScalars,
    /// `u0^1 - u0^2`
    wu: ScalarField,
    /// `v0^1 - v0^2`
    wv: ScalarField,
}

/// Inverse coupling matrix `[[8, -4], [-4, 4]]^{-1} = [[1/4, 1/4], [1/4, 1/2]]`.
fn inv_coupling(x: f64, y: f64) -> (f64, f64) {
    (0.25 * (x + y), 0.25 * x + 0.5 * y)
}

impl VavProblem {
    pub fn new(
        geometry: &TorusGeometry,
        config: &VortexConfiguration,
        sigma: f64,
    ) -> Result<Self, VavError> {
        check_admissibility(config, geometry)?;
        let set = BackgroundSet::build(geometry, config, sigma)?;
        Self::from_backgrounds(set)
    }

    /// Uses prebuilt backgrounds; admissibility is checked from their counts.
    pub fn from_backgrounds(backgrounds: BackgroundSet) -> Result<Self, VavError> {
        let geometry = backgrounds.geometry().clone();
        let scalars =
            AdmissibilityScalars::from_counts(backgrounds.counts, geometry.area()).check()?;
        Ok(Self {
            wu: &backgrounds.u01 - &backgrounds.u02,
            wv: &backgrounds.v01 - &backgrounds.v02,
            geometry,
            backgrounds,
            scalars,
        })
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geometry
    }
    pub fn backgrounds(&self) -> &BackgroundSet {
        &self.backgrounds
    }
    pub fn counts(&self) -> VortexCounts {
        self.backgrounds.counts
    }
    pub fn scalars(&self) -> AdmissibilityScalars {
        self.scalars
    }

    fn source_terms(&self) -> (f64, f64) {
        let c = self.counts();
        let area = self.geometry.area();
        (
            4.0 * PI * (c.n1 as f64 - c.p1 as f64) / area,
            4.0 * PI * (c.n2 as f64 - c.p2 as f64) / area,
        )
    }

    /// Applies `T` to mean-zero `(U', V')`.
    pub fn apply_t(&self, u: &ScalarField, v: &ScalarField) -> Result<TImage, VavError> {
        let area = self.geometry.area();
        let (a, b) = (self.scalars.a, self.scalars.b);
        let base_u = (&self.wu + u).into_values();
        let base_v = (&self.wv + v).into_values();
        let c1 = solve_shift(&base_u, &self.geometry, a * area)?;
        let c2 = solve_shift(&base_v, &self.geometry, b * area)?;
        let n = self.geometry.len();
        let mut ru = Vec::with_capacity(n);
        let mut rv = Vec::with_capacity(n);
        for k in 0..n {
            let fu = f_fun(base_u[k], 0.0, c1) - a;
            let fv = f_fun(base_v[k], 0.0, c2) - b;
            ru.push(8.0 * fu - 4.0 * fv);
            rv.push(-4.0 * fu + 4.0 * fv);
        }
        // strip the constraint residual (at the 1e-12 level) from the means
        let project = |mut r: Vec<f64>| {
            let m = r.iter().sum::<f64>() / n as f64;
            r.iter_mut().for_each(|x| *x -= m);
            ScalarField::from_raw(&self.geometry, r)
        };
        let u_next = project(ru).inv_laplacian().expect("mean removed");
        let v_next = project(rv).inv_laplacian().expect("mean removed");
        Ok(TImage {
            u: u_next,
            v: v_next,
            c1,
            c2,
        })
    }

    /// `G = -ΔU + 8f(u) - 4f(v) + 4π(N1-P1)/|S|` and its `V` counterpart,
    /// i.e. minus the residual of the shifted system.
    fn negative_residual(
        &self,
        u: &ScalarField,
        v: &ScalarField,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let (su, sv) = self.source_terms();
        let lu = u.laplacian();
        let lv = v.laplacian();
        let n = self.geometry.len();
        let (mut gu, mut gv) = (Vec::with_capacity(n), Vec::with_capacity(n));
        let (mut du, mut dv) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for k in 0..n {
            let tu = self.wu.values()[k] + u.values()[k];
            let tv = self.wv.values()[k] + v.values()[k];
            let fu = f_fun(tu, 0.0, 0.0);
            let fv = f_fun(tv, 0.0, 0.0);
            gu.push(-lu.values()[k] + 8.0 * fu - 4.0 * fv + su);
            gv.push(-lv.values()[k] - 4.0 * fu + 4.0 * fv + sv);
            du.push(f_fun_dt(tu, 0.0, 0.0));
            dv.push(f_fun_dt(tv, 0.0, 0.0));
        }
        (gu, gv, du, dv)
    }

    /// Residuals `ΔU - rhs`, `ΔV - rhs` of the shifted system.
    pub fn residuals(&self, u: &ScalarField, v: &ScalarField) -> (ScalarField, ScalarField) {
        let (gu, gv, _, _) = self.negative_residual(u, v);
        (
            ScalarField::from_raw(&self.geometry, gu.into_iter().map(|x| -x).collect()),
            ScalarField::from_raw(&self.geometry, gv.into_iter().map(|x| -x).collect()),
        )
    }

    pub fn solve(&self, opts: &VavOptions) -> Result<VavSolution, VavError> {
        match opts.method {
            VavMethod::Newton => self.solve_newton(opts),
            VavMethod::FixedPoint { relaxation } => self.solve_fixed_point(opts, relaxation),
        }
    }

    fn finish(
        &self,
        u_shift: ScalarField,
        v_shift: ScalarField,
        (c1, c2): (f64, f64),
        iterations: usize,
        final_residual: f64,
        trace: Vec<VavIterate>,
    ) -> VavSolution {
        VavSolution {
            u: &self.wu + &u_shift,
            v: &self.wv + &v_shift,
            u_shift,
            v_shift,
            c1,
            c2,
            iterations,
            final_residual,
            trace,
        }
    }

    fn solve_newton(&self, opts: &VavOptions) -> Result<VavSolution, VavError> {
        let g = &self.geometry;
        let n = g.len();
        let sup = |x: &[f64]| x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let sq = |a: &[f64], b: &[f64]| a.iter().chain(b).map(|x| x * x).sum::<f64>();

        let mut u = ScalarField::zeros(g);
        let mut v = ScalarField::zeros(g);
        let mut trace = Vec::new();
        let (mut last_step, mut last_inner) = (0.0, 0);
        let mut iteration = 0;
        let (mut gu, mut gv, mut du, mut dv) = self.negative_residual(&u, &v);
        loop {
            let res = sup(&gu).max(sup(&gv));
            trace.push(VavIterate {
                iteration,
                residual_sup: res,
                fixed_point_residual: None,
                step: last_step,
                inner_iterations: last_inner,
            });
            if res < opts.tol {
                return Ok(self.finish(u, v, (0.0, 0.0), iteration, res, trace));
            }
            if iteration >= opts.max_iter {
                return Err(VavError::MaxIterExceeded {
                    iterations: iteration,
                    residual: res,
                    trace,
                });
            }

            // Symmetrized Jacobian M^{-1}(-Δ) + diag(f'(u), f'(v)).
            let gu_bar = du.iter().sum::<f64>() / n as f64;
            let gv_bar = dv.iter().sum::<f64>() / n as f64;
            let apply = |x: &[f64]| -> Vec<f64> {
                let lx = g.apply_symbol(&x[..n], |k2| k2);
                let ly = g.apply_symbol(&x[n..], |k2| k2);
                let mut out = vec![0.0; 2 * n];
                for k in 0..n {
                    let (p, q) = inv_coupling(lx[k], ly[k]);
                    out[k] = p + du[k] * x[k];
                    out[n + k] = q + dv[k] * x[n + k];
                }
                out
            };
            let precondition = |r: &[f64]| -> Vec<f64> {
                let (x, y) = g.apply_block_symbol(&r[..n], &r[n..], |k2| {
                    let (m11, m12, m22) = (0.25 * k2 + gu_bar, 0.25 * k2, 0.5 * k2 + gv_bar);
                    let det = m11 * m22 - m12 * m12;
                    [[m22 / det, -m12 / det], [-m12 / det, m11 / det]]
                });
                [x, y].concat()
            };
            let mut rhs = vec![0.0; 2 * n];
            for k in 0..n {
                let (p, q) = inv_coupling(gu[k], gv[k]);
                rhs[k] = -p;
                rhs[n + k] = -q;
            }
            let eta = res.clamp(1e-10, 1e-1);
            let (dir, stats) = pcg(apply, precondition, &rhs, eta, 500);
            let d_u = ScalarField::from_raw(g, dir[..n].to_vec());
            let d_v = ScalarField::from_raw(g, dir[n..].to_vec());

            let norm0 = sq(&gu, &gv);
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..40 {
                let tu = u.axpy(alpha, &d_u);
                let tv = v.axpy(alpha, &d_v);
                let trial = self.negative_residual(&tu, &tv);
                if sq(&trial.0, &trial.1) <= (1.0 - 1e-4 * alpha) * norm0 {
                    accepted = Some((tu, tv, trial));
                    break;
                }
                alpha *= 0.5;
            }
            let Some((tu, tv, trial)) = accepted else {
                return Err(VavError::LineSearchFailed {
                    iteration,
                    residual: res,
                    trace,
                });
            };
            u = tu;
            v = tv;
            (gu, gv, du, dv) = trial;
            last_step = alpha;
            last_inner = stats.iterations;
            iteration += 1;
        }
    }

    fn solve_fixed_point(&self, opts: &VavOptions, omega: f64) -> Result<VavSolution, VavError> {
        let g = &self.geometry;
        let mut u = ScalarField::zeros(g);
        let mut v = ScalarField::zeros(g);
        let mut trace: Vec<VavIterate> = Vec::new();
        let mut iteration = 0;
        loop {
            let t = self.apply_t(&u, &v)?;
            let fp = t.u.max_abs_diff(&u).max(t.v.max_abs_diff(&v));
            let full_u = u.map(|x| x + t.c1);
            let full_v = v.map(|x| x + t.c2);
            let (r1, r2) = self.residuals(&full_u, &full_v);
            let res = r1.sup_norm().max(r2.sup_norm());
            trace.push(VavIterate {
                iteration,
                residual_sup: res,
                fixed_point_residual: Some(fp),
                step: if iteration == 0 { 0.0 } else { omega },
                inner_iterations: 0,
            });
            if fp < opts.tol && res < opts.tol {
                return Ok(self.finish(full_u, full_v, (t.c1, t.c2), iteration, res, trace));
            }
            if !fp.is_finite() || !res.is_finite() {
                return Err(VavError::Stagnation {
                    iterations: iteration,
                    residual: res,
                    trace,
                });
            }
            if iteration >= STAGNATION_WINDOW {
                let before = trace[iteration - STAGNATION_WINDOW]
                    .fixed_point_residual
                    .unwrap_or(f64::INFINITY);
                if fp > (1.0 - STAGNATION_REDUCTION) * before {
                    return Err(VavError::Stagnation {
                        iterations: iteration,
                        residual: res,
                        trace,
                    });
                }
            }
            if iteration >= opts.max_iter {
                return Err(VavError::MaxIterExceeded {
                    iterations: iteration,
                    residual: res,
                    trace,
                });
            }
            u = u.zip_map(&t.u, |x, y| (1.0 - omega) * x + omega * y);
            v = v.zip_map(&t.v, |x, y| (1.0 - omega) * x + omega * y);
            iteration += 1;
        }
    }

    pub fn quantized_integrals(&self, sol: &VavSolution) -> VavQuantizedIntegrals {
        let c = self.counts();
        let d1 = c.n1 as f64 - c.p1 as f64;
        let d2 = c.n2 as f64 - c.p2 as f64;
        VavQuantizedIntegrals {
            iu: -sol.u.map(|x| f_fun(x, 0.0, 0.0)).integrate(),
            iv: -sol.v.map(|x| f_fun(x, 0.0, 0.0)).integrate(),
            expected_iu: PI * (d1 + d2),
            expected_iv: PI * (d1 + 2.0 * d2),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sources::PointSource;
    use approx::assert_relative_eq;

    #[test]
    fn f_symmetric_cancellation_and_saturation() {
        assert_eq!(f_fun(1.7, 1.7, 0.0), 0.0);
        assert_eq!(f_fun(f64::NEG_INFINITY, 0.0, 3.0), -1.0);
        assert_eq!(f_fun(0.0, f64::NEG_INFINITY, 3.0), 1.0);
        assert_eq!(f_fun_dt(f64::INFINITY, 0.0, 0.0), 0.0);
        assert_eq!(f_fun_dt(0.0, 0.0, 0.0), 0.5);
        // matches the exponential form where that is safe
        let (s1, s2, t): (f64, f64, f64) = (0.3, -1.2, 0.4);
        let direct = ((s1 + t).exp() - s2.exp()) / ((s1 + t).exp() + s2.exp());
        assert_relative_eq!(f_fun(s1, s2, t), direct, epsilon = 1e-15);
    }

    #[test]
    fn admissibility_examples() {
        let g = TorusGeometry::square(6.0, 16).unwrap();
        let balanced = VortexConfiguration {
            zeros_q: vec![PointSource::unit(1.0, 1.0)],
            poles_q: vec![PointSource::unit(4.0, 4.0)],
            ..Default::default()
        };
        let s = check_admissibility(&balanced, &g).unwrap();
        assert_eq!((s.a, s.b), (0.0, 0.0));

        let g2 = TorusGeometry::square(2.0 * PI, 16).unwrap();
        let one = VortexConfiguration::vortices(vec![PointSource::unit(1.0, 1.0)], vec![]);
        let s = check_admissibility(&one, &g2).unwrap();
        assert_relative_eq!(s.a, -1.0 / (4.0 * PI), epsilon = 1e-15);
        assert_relative_eq!(s.b, -0.0796, epsilon = 1e-4);

        let g3 = TorusGeometry::new(PI, 1.0, 16, 16).unwrap();
        let four = VortexConfiguration::vortices(vec![PointSource::new(1.0, 0.5, 4)], vec![]);
        match check_admissibility(&four, &g3) {
            Err(VavError::Inadmissible { a, margin_c1, .. }) => {
                assert_relative_eq!(a, -4.0, epsilon = 1e-12);
                assert_relative_eq!(margin_c1, -3.0, epsilon = 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn shift_closed_forms() {
        let g = TorusGeometry::square(3.0, 16).unwrap();
        let z = ScalarField::zeros(&g);
        assert_eq!(constraint_shift(&z, &z, &z, 0.0).unwrap(), 0.0);
        let c = constraint_shift(&z, &z, &z, 0.5 * g.area()).unwrap();
        assert_relative_eq!(c, 3.0f64.ln(), epsilon = 1e-10);
        assert_relative_eq!(c, 1.0986, epsilon = 1e-4);
    }

    #[test]
    fn shift_bracket_failure() {
        let g = TorusGeometry::square(3.0, 16).unwrap();
        let z = ScalarField::zeros(&g);
        let err = constraint_shift(&z, &z, &z, g.area()).unwrap_err();
        assert!(matches!(err, VavError::BracketFailure { .. }));
    }

    #[test]
    fn degenerate_symmetric_fixed_point() {
        let g = TorusGeometry::square(6.0, 32).unwrap();
        let cfg = VortexConfiguration::vortices(vec![PointSource::unit(2.0, 2.0)], vec![]);
        let w = crate::sources::background(&g, &cfg.zeros_q, 2.0 * g.h1()).unwrap();
        let set = BackgroundSet {
            u01: w.clone(),
            u02: w,
            v01: ScalarField::zeros(&g),
            v02: ScalarField::zeros(&g),
            counts: VortexCounts::new(1, 1, 0, 0),
            sigma: 2.0 * g.h1(),
        };
        let p = VavProblem::from_backgrounds(set).unwrap();
        let z = ScalarField::zeros(&g);
        let t = p.apply_t(&z, &z).unwrap();
        assert_eq!((t.c1, t.c2), (0.0, 0.0));
        assert_eq!(t.u.sup_norm(), 0.0);
        assert_eq!(t.v.sup_norm(), 0.0);
    }

    #[test]
    fn vacuum_solves_exactly() {
        let g = TorusGeometry::square(4.0, 16).unwrap();
        let p = VavProblem::new(&g, &VortexConfiguration::default(), 2.0 * g.h1()).unwrap();
        for opts in [VavOptions::newton(), VavOptions::fixed_point(0.5)] {
            let sol = p.solve(&opts).unwrap();
            assert_eq!(sol.iterations, 0);
            assert_eq!(sol.u_shift.sup_norm(), 0.0);
            assert_eq!(sol.final_residual, 0.0);
        }
    }

    #[test]
    fn newton_single_vortex_small_grid() {
        let g = TorusGeometry::square(6.0, 32).unwrap();
        let cfg = VortexConfiguration::vortices(vec![PointSource::unit(3.0, 3.0)], vec![]);
        let p = VavProblem::new(&g, &cfg, 2.0 * g.h1()).unwrap();
        let sol = p.solve(&VavOptions::newton()).unwrap();
        assert!(sol.final_residual < 1e-8);
        let q = p.quantized_integrals(&sol);
        assert_relative_eq!(q.iu, PI, max_relative = 1e-8);
        assert_relative_eq!(q.iv, PI, max_relative = 1e-8);
    }
}
