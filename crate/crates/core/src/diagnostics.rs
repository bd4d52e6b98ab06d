//! Magnetic fields, fluxes and topological energies of solved fields.
//!
//! Every "expected" value here is computed from the vortex counts alone.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::sources::VortexCounts;
use crate::surface::ScalarField;
use crate::tw::{TwProblem, TwSolution};
use crate::vav::{VavProblem, VavSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Tw,
    Vav,
}

/// Hodge duals `*F̂` and `*F̃` of the two curvatures.
#[derive(Debug, Clone)]
pub struct Curvatures {
    pub f_hat: ScalarField,
    pub f_tilde: ScalarField,
}

/// `*F̂ = 1 - e^u`, `*F̃ = -[(1 - e^u) + (e^v - 1)]`.
pub fn curvatures_tw(u: &ScalarField, v: &ScalarField) -> Curvatures {
    let a = u.map(|x| -x.exp_m1());
    let b = v.map(f64::exp_m1);
    Curvatures {
        f_tilde: a.zip_map(&b, |x, y| -(x + y)),
        f_hat: a,
    }
}

/// `*F̂ = 2(1 - e^u)/(1 + e^u)`, `*F̃ = -2[(1 - e^u)/(1 + e^u) + (e^v - 1)/(1 + e^v)]`.
pub fn curvatures_vav(u: &ScalarField, v: &ScalarField) -> Curvatures {
    // (1 - e^w)/(1 + e^w) = -tanh(w/2)
    let a = u.map(|x| -(0.5 * x).tanh());
    let b = v.map(|x| (0.5 * x).tanh());
    Curvatures {
        f_hat: a.map(|x| 2.0 * x),
        f_tilde: a.zip_map(&b, |x, y| -2.0 * (x + y)),
    }
}

/// `∫*F̂`, `∫*F̃` and `∫(*F̂ - *F̃)` with their quantized values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fluxes {
    pub hat: f64,
    pub tilde: f64,
    pub hat_minus_tilde: f64,
    pub expected_hat: f64,
    pub expected_tilde: f64,
    pub expected_hat_minus_tilde: f64,
}

impl Fluxes {
    pub fn measure(model: Model, curv: &Curvatures, counts: VortexCounts) -> Self {
        let hat = curv.f_hat.integrate();
        let tilde = curv.f_tilde.integrate();
        let (d1, d2) = match model {
            Model::Tw => (counts.n1 as f64, counts.n2 as f64),
            Model::Vav => (
                counts.n1 as f64 - counts.p1 as f64,
                counts.n2 as f64 - counts.p2 as f64,
            ),
        };
        Self {
            hat,
            tilde,
            hat_minus_tilde: (&curv.f_hat - &curv.f_tilde).integrate(),
            expected_hat: 2.0 * PI * (d1 + d2),
            expected_tilde: 2.0 * PI * d2,
            expected_hat_minus_tilde: 2.0 * PI * d1,
        }
    }

    /// The three fluxes divided by `2π`.
    pub fn in_units_of_2pi(&self) -> [f64; 3] {
        let s = 2.0 * PI;
        [self.hat / s, self.tilde / s, self.hat_minus_tilde / s]
    }

    /// Largest deviation from the expected integers, in units of `2π`.
    pub fn max_integer_error(&self) -> f64 {
        let s = 2.0 * PI;
        [
            (self.hat - self.expected_hat) / s,
            (self.tilde - self.expected_tilde) / s,
            (self.hat_minus_tilde - self.expected_hat_minus_tilde) / s,
        ]
        .iter()
        .fold(0.0f64, |m, e| m.max(e.abs()))
    }
}

/// `E = 2π(N1 + N2)`.
pub fn energy_tw(counts: VortexCounts) -> f64 {
    2.0 * PI * (counts.n1 + counts.n2) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyDecomposition {
    pub total: f64,
    /// `2 · 2π(N1 - P1 + N2 - P2)`
    pub chern_flux: f64,
    /// `2 · 4π P1`
    pub thom_q: f64,
    /// `2 · 4π P2`
    pub thom_p: f64,
}

/// `E = 4π(N1 + N2 + P1 + P2)` with its Chern/Thom split.
pub fn energy_vav(counts: VortexCounts) -> EnergyDecomposition {
    let chern = counts.n1 as f64 - counts.p1 as f64 + counts.n2 as f64 - counts.p2 as f64;
    EnergyDecomposition {
        total: 4.0 * PI * (counts.n1 + counts.n2 + counts.p1 + counts.p2) as f64,
        chern_flux: 2.0 * (2.0 * PI * chern),
        thom_q: 2.0 * (4.0 * PI * counts.p1 as f64),
        thom_p: 2.0 * (4.0 * PI * counts.p2 as f64),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualNorms {
    pub sup: f64,
    pub l2: f64,
}

impl ResidualNorms {
    /// Norms of the pair `(r1, r2)`: max of sups, root-sum-square of L² norms.
    pub fn of_pair(r1: &ScalarField, r2: &ScalarField) -> Self {
        Self {
            sup: r1.sup_norm().max(r2.sup_norm()),
            l2: r1.l2_norm().hypot(r2.l2_norm()),
        }
    }
}

pub fn residual_report_tw(problem: &TwProblem, sol: &TwSolution) -> ResidualNorms {
    let (r1, r2) = problem.residuals(&sol.u_shift, &sol.v_shift);
    ResidualNorms::of_pair(&r1, &r2)
}

pub fn residual_report_vav(problem: &VavProblem, sol: &VavSolution) -> ResidualNorms {
    let (r1, r2) = problem.residuals(&sol.u_shift, &sol.v_shift);
    ResidualNorms::of_pair(&r1, &r2)
}
