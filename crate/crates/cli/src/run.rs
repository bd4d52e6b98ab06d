//! Admissibility check, solve and diagnostics for one configuration.

use std::time::Instant;

use vortex_core::diagnostics::{
    curvatures_tw, curvatures_vav, energy_tw, energy_vav, residual_report_tw, residual_report_vav,
    Curvatures, Fluxes, Model,
};
use vortex_core::tw::{BradlowConstants, Initialization, TwError, TwMethod, TwOptions, TwProblem};
use vortex_core::vav::{AdmissibilityScalars, VavError, VavMethod, VavOptions, VavProblem};
use vortex_core::{default_sigma, BackgroundSet, ScalarField, VortexCounts};

use crate::config::{ConfigError, MethodTag, ModelTag, RunConfig};
use crate::report::{
    Admissibility, EnergyReport, Inputs, Iterates, QuantizedReport, SolveReport, SolverTrace,
    Status, Timings,
};

/// Amplitude of the random initial fields selected by `solver.seed`.
pub const RANDOM_INIT_AMPLITUDE: f64 = 1.0;

const BRADLOW: &str = "Bradlow bound";

/// Solved fields with their curvatures.
#[derive(Debug, Clone)]
pub struct SolvedFields {
    pub u: ScalarField,
    pub v: ScalarField,
    pub curvatures: Curvatures,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: SolveReport,
    pub fields: Option<SolvedFields>,
}

fn tw_admissibility(counts: VortexCounts, area: f64) -> Admissibility {
    let BradlowConstants { a1, a2 } = BradlowConstants::from_counts(counts.n1, counts.n2, area);
    let admissible = a2 > 0.0;
    Admissibility {
        admissible,
        condition: format!("{BRADLOW}: N1 + 2 N2 < |S|/(2 pi)"),
        violated: if admissible {
            vec![]
        } else {
            vec![BRADLOW.into()]
        },
        margins: [a1, a2],
        a1: Some(a1),
        a2: Some(a2),
        a: None,
        b: None,
    }
}

fn vav_admissibility(counts: VortexCounts, area: f64) -> Admissibility {
    let s = AdmissibilityScalars::from_counts(counts, area);
    let (m1, m2) = s.margins();
    let mut violated = Vec::new();
    if m1 <= 0.0 {
        violated.push("(C1) |a| < 1".to_string());
    }
    if m2 <= 0.0 {
        violated.push("(C2) |b| < 1".to_string());
    }
    Admissibility {
        admissible: s.is_admissible(),
        condition: "(C1) |N1 - P1 + N2 - P2| < |S|/pi and (C2) |N1 - P1 + 2(N2 - P2)| < |S|/pi"
            .into(),
        violated,
        margins: [m1, m2],
        a1: None,
        a2: None,
        a: Some(s.a),
        b: Some(s.b),
    }
}

fn quantized(
    iu: f64,
    iv: f64,
    expected_iu: f64,
    expected_iv: f64,
    errs: (f64, f64),
) -> QuantizedReport {
    QuantizedReport {
        iu,
        iv,
        expected_iu,
        expected_iv,
        rel_error_iu: errs.0,
        rel_error_iv: errs.1,
    }
}

fn method_name(m: MethodTag) -> String {
    match m {
        MethodTag::Newton => "newton",
        MethodTag::Gradient => "gradient",
        MethodTag::FixedPoint => "fixed_point",
    }
    .into()
}

/// Runs one configuration. `Err` means the configuration itself is
/// unusable (exit status 1); everything else yields a report.
pub fn run(cfg: &RunConfig) -> Result<Outcome, ConfigError> {
    let start = Instant::now();
    let geom = cfg.geometry()?;
    let sigma = default_sigma(&geom, cfg.solver.kappa);
    let vortices = cfg.vortices();
    let counts = vortices.counts();
    let area = geom.area();
    let inputs = Inputs {
        torus: cfg.torus,
        sources: cfg.sources.clone(),
        sigma,
        solver: cfg.solver,
    };
    let admissibility = match cfg.solver.model {
        ModelTag::Tw => tw_admissibility(counts, area),
        ModelTag::Vav => vav_admissibility(counts, area),
    };
    let mut report = SolveReport {
        model: cfg.solver.model,
        inputs,
        admissibility,
        solver_trace: None,
        quantized_integrals: None,
        fluxes: None,
        energy: None,
        timings: Timings { wall_seconds: 0.0 },
        status: Status::Inadmissible,
    };
    if !report.admissibility.admissible {
        report.timings.wall_seconds = start.elapsed().as_secs_f64();
        return Ok(Outcome {
            report,
            fields: None,
        });
    }
    let backgrounds = BackgroundSet::build(&geom, &vortices, sigma)
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let method = method_name(cfg.solver.method);

    let fields = match cfg.solver.model {
        ModelTag::Tw => {
            let problem = match TwProblem::from_backgrounds(&backgrounds) {
                Ok(p) => p,
                Err(e) => return Err(ConfigError::Invalid(e.to_string())),
            };
            let opts = TwOptions {
                tol: cfg.solver.tol,
                max_iter: cfg.solver.max_iter.unwrap_or(200),
                method: if cfg.solver.method == MethodTag::Gradient {
                    TwMethod::Gradient
                } else {
                    TwMethod::Newton
                },
                init: match cfg.solver.seed {
                    Some(seed) => Initialization::Random {
                        seed,
                        amplitude: RANDOM_INIT_AMPLITUDE,
                    },
                    None => Initialization::Zero,
                },
            };
            report.energy = Some(EnergyReport {
                total: energy_tw(counts),
                decomposition: None,
            });
            match problem.solve(&opts) {
                Ok(sol) => {
                    let q = problem.quantized_integrals(&sol);
                    let curv = curvatures_tw(&sol.u, &sol.v);
                    report.quantized_integrals = Some(quantized(
                        q.iu,
                        q.iv,
                        q.expected_iu,
                        q.expected_iv,
                        q.relative_errors(),
                    ));
                    report.fluxes = Some(Fluxes::measure(Model::Tw, &curv, counts));
                    report.solver_trace = Some(SolverTrace {
                        method,
                        converged: true,
                        iterations: sol.iterations,
                        residual: Some(residual_report_tw(&problem, &sol)),
                        final_gradient_norm: Some(sol.final_gradient_norm),
                        functional_value: Some(sol.functional_value),
                        functional_lower_bound: Some(problem.functional_lower_bound()),
                        shifts: None,
                        error: None,
                        iterates: Iterates::Tw(sol.trace),
                    });
                    report.status = Status::Solved;
                    Some(SolvedFields {
                        u: sol.u,
                        v: sol.v,
                        curvatures: curv,
                    })
                }
                Err(e) => {
                    let trace = e.trace().map(<[_]>::to_vec).unwrap_or_default();
                    if let TwError::Sources(_) | TwError::PolesNotAllowed { .. } = e {
                        return Err(ConfigError::Invalid(e.to_string()));
                    }
                    report.solver_trace = Some(SolverTrace {
                        method,
                        converged: false,
                        iterations: trace.last().map_or(0, |t| t.iteration),
                        residual: None,
                        final_gradient_norm: trace.last().map(|t| t.gradient_sup),
                        functional_value: trace.last().map(|t| t.functional),
                        functional_lower_bound: Some(problem.functional_lower_bound()),
                        shifts: None,
                        error: Some(e.to_string()),
                        iterates: Iterates::Tw(trace),
                    });
                    report.status = Status::Nonconverged;
                    None
                }
            }
        }
        ModelTag::Vav => {
            let problem = match VavProblem::from_backgrounds(backgrounds) {
                Ok(p) => p,
                Err(e) => return Err(ConfigError::Invalid(e.to_string())),
            };
            let mut opts = match cfg.solver.method {
                MethodTag::FixedPoint => VavOptions::fixed_point(cfg.solver.relaxation),
                _ => VavOptions::newton(),
            };
            opts.tol = cfg.solver.tol;
            if let Some(m) = cfg.solver.max_iter {
                opts.max_iter = m;
            }
            let e = energy_vav(counts);
            report.energy = Some(EnergyReport {
                total: e.total,
                decomposition: Some(e),
            });
            match problem.solve(&opts) {
                Ok(sol) => {
                    let q = problem.quantized_integrals(&sol);
                    let curv = curvatures_vav(&sol.u, &sol.v);
                    report.quantized_integrals = Some(quantized(
                        q.iu,
                        q.iv,
                        q.expected_iu,
                        q.expected_iv,
                        q.relative_errors(),
                    ));
                    report.fluxes = Some(Fluxes::measure(Model::Vav, &curv, counts));
                    report.solver_trace = Some(SolverTrace {
                        method,
                        converged: true,
                        iterations: sol.iterations,
                        residual: Some(residual_report_vav(&problem, &sol)),
                        final_gradient_norm: None,
                        functional_value: None,
                        functional_lower_bound: None,
                        shifts: matches!(opts.method, VavMethod::FixedPoint { .. })
                            .then_some([sol.c1, sol.c2]),
                        error: None,
                        iterates: Iterates::Vav(sol.trace),
                    });
                    report.status = Status::Solved;
                    Some(SolvedFields {
                        u: sol.u,
                        v: sol.v,
                        curvatures: curv,
                    })
                }
                Err(e) => {
                    if let VavError::Sources(_) | VavError::Inadmissible { .. } = e {
                        return Err(ConfigError::Invalid(e.to_string()));
                    }
                    let trace = e.trace().map(<[_]>::to_vec).unwrap_or_default();
                    report.solver_trace = Some(SolverTrace {
                        method,
                        converged: false,
                        iterations: trace.last().map_or(0, |t| t.iteration),
                        residual: None,
                        final_gradient_norm: None,
                        functional_value: None,
                        functional_lower_bound: None,
                        shifts: None,
                        error: Some(e.to_string()),
                        iterates: Iterates::Vav(trace),
                    });
                    report.status = Status::Nonconverged;
                    None
                }
            }
        }
    };
    report.timings.wall_seconds = start.elapsed().as_secs_f64();
    Ok(Outcome { report, fields })
}
