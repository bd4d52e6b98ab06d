//! Acceptance criteria 1-14. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vortex_cli::config::RunConfig;
use vortex_cli::report::{Iterates, SolveReport};
use vortex_cli::run::{run, Outcome};
use vortex_core::tw::{check_bradlow, TwIterate, TwProblem};
use vortex_core::vav::{
    check_admissibility, constraint_shift, f_fun, f_fun_dt, VavError, VavOptions, VavProblem,
};
use vortex_core::{
    background, default_sigma, PointSource, ScalarField, TorusGeometry, VortexConfiguration,
};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn cfg_json(l1: f64, l2: f64, n: usize, model: &str, sources: &str, solver: &str) -> String {
    format!(
        r#"{{"torus": {{"L1": {l1}, "L2": {l2}, "n1": {n}, "n2": {n}}},
            "sources": {{{sources}}},
            "solver": {{"model": "{model}"{solver}}}}}"#
    )
}

fn solve(l: f64, n: usize, model: &str, sources: &str, solver: &str) -> Outcome {
    let cfg = RunConfig::parse(&cfg_json(l, l, n, model, sources, solver)).expect("valid config");
    run(&cfg).expect("runs")
}

fn tw_trace(r: &SolveReport) -> Vec<TwIterate> {
    match r.solver_trace.as_ref().map(|t| &t.iterates) {
        Some(Iterates::Tw(t)) => t.clone(),
        _ => vec![],
    }
}

/// Accumulates every TW trace with its lower bound for criterion 7.
#[derive(Default)]
struct Bounds {
    checked: usize,
    violations: usize,
    worst_gap: f64,
}

impl Bounds {
    fn record(&mut self, r: &SolveReport) {
        let Some(bound) = r
            .solver_trace
            .as_ref()
            .and_then(|t| t.functional_lower_bound)
        else {
            return;
        };
        for it in tw_trace(r) {
            self.checked += 1;
            let gap = it.functional - bound;
            if self.checked == 1 || gap < self.worst_gap {
                self.worst_gap = gap;
            }
            if gap < 0.0 {
                self.violations += 1;
            }
        }
    }
}

fn vacuum() -> Verdict {
    let mut worst = 0.0f64;
    let mut zero = true;
    let mut energy_zero = true;
    for (model, solver) in [
        ("tw", ""),
        ("tw", r#", "method": "gradient""#),
        ("vav", ""),
        ("vav", r#", "method": "fixed_point""#),
    ] {
        let o = solve(6.0, 128, model, "", solver);
        let f = o.fields.as_ref().expect("solved");
        zero &= f.u.sup_norm() == 0.0 && f.v.sup_norm() == 0.0;
        worst = worst.max(
            o.report
                .solver_trace
                .as_ref()
                .unwrap()
                .residual
                .unwrap()
                .sup,
        );
        energy_zero &= o.report.energy.unwrap().total == 0.0;
    }
    verdict(
        zero && worst < 1e-12 && energy_zero,
        format!("fields identically zero: {zero}, max residual {worst:e}, energy 0: {energy_zero}"),
    )
}

const TW_INSTANCES: [(&str, u32, u32); 2] = [
    (r#""zeros_q": [[3, 3, 1]]"#, 1, 0),
    (r#""zeros_q": [[3, 3, 1]], "zeros_p": [[1, 4.5, 1]]"#, 1, 1),
];

fn tw_quantization(bounds: &mut Bounds) -> (Verdict, Verdict) {
    let mut ok2 = true;
    let mut ok3 = true;
    let mut d2 = Vec::new();
    let mut d3 = Vec::new();
    for (src, n1, n2) in TW_INSTANCES {
        let coarse = solve(6.0, 128, "tw", src, "");
        let fine = solve(6.0, 256, "tw", src, "");
        bounds.record(&coarse.report);
        bounds.record(&fine.report);
        let qc = coarse.report.quantized_integrals.unwrap();
        let qf = fine.report.quantized_integrals.unwrap();
        let ec = qc.rel_error_iu.max(qc.rel_error_iv);
        let ef = qf.rel_error_iu.max(qf.rel_error_iv);
        // The discrete identities hold to solver precision on every grid,
        // so refinement is judged against that floor.
        let floor = 1e-9;
        let refined = ef <= 0.5 * ec || ef.max(ec) <= floor;
        ok2 &= ec < 1e-2 && refined;
        d2.push(format!(
            "N=({n1},{n2}) err128 {ec:.2e} err256 {ef:.2e} (refinement {})",
            if ef <= 0.5 * ec { "halved" } else { "at floor" }
        ));

        let fl = coarse.report.fluxes.unwrap();
        let diff = fl.hat_minus_tilde / (2.0 * PI);
        let tilde = fl.tilde / (2.0 * PI);
        let energy = coarse.report.energy.unwrap().total;
        let exact = energy == 2.0 * PI * (n1 + n2) as f64;
        ok3 &= (diff - n1 as f64).abs() <= 0.01 && (tilde - n2 as f64).abs() <= 0.01 && exact;
        d3.push(format!(
            "N=({n1},{n2}) (F^-F~)/2pi {diff:.6} F~/2pi {tilde:.6} energy {energy:.12} exact {exact}"
        ));
    }
    (verdict(ok2, d2.join("; ")), verdict(ok3, d3.join("; ")))
}

fn cli_solve_exit(dir: &Path, l: f64, bounds: &mut Bounds) -> i32 {
    let cfg = cfg_json(
        l,
        l,
        128,
        "tw",
        r#""zeros_q": [[1, 1, 1]], "zeros_p": [[3, 2, 1]]"#,
        "",
    );
    let path = dir.join(format!("bradlow_{l}.json"));
    std::fs::write(&path, cfg).unwrap();
    let out = dir.join(format!("out_{l}"));
    let st = Command::new(env!("CARGO_BIN_EXE_vortexlab"))
        .args(["solve", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    if let Ok(text) = std::fs::read_to_string(out.join("report.json")) {
        let r: SolveReport = serde_json::from_str(&text).unwrap();
        bounds.record(&r);
    }
    st.status.code().unwrap_or(-1)
}

fn bradlow(bounds: &mut Bounds) -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let base = cfg_json(
        6.0,
        6.0,
        64,
        "tw",
        r#""zeros_q": [[1, 1, 1]], "zeros_p": [[3, 2, 1]]"#,
        "",
    );
    let path = dir.path().join("base.json");
    std::fs::write(&path, base).unwrap();
    let st = Command::new(env!("CARGO_BIN_EXE_vortexlab"))
        .args(["sweep", "--config"])
        .arg(&path)
        .args([
            "--lengths",
            "4,4.2,4.4,4.6,4.8,5,5.2,5.4,5.6,5.8,6",
            "--out",
        ])
        .arg(dir.path())
        .status()
        .unwrap();
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap_or_default();
    let mut sweep_ok = st.success();
    for line in text.lines().skip(1) {
        let c: Vec<&str> = line.split(',').collect();
        let area: f64 = c[0].parse().unwrap();
        sweep_ok &= (c[3] == "true") == (area > 6.0 * PI);
    }

    // exactly at |S| = 6π the bound fails; one ulp above it holds
    let counts = VortexConfiguration::vortices(
        vec![PointSource::unit(1.0, 1.0)],
        vec![PointSource::unit(2.0, 2.0)],
    );
    let at = TorusGeometry::new(2.0 * PI, 3.0, 16, 16).unwrap();
    let above = TorusGeometry::new(2.0 * PI, 3.0f64.next_up(), 16, 16).unwrap();
    let edge_ok = check_bradlow(&counts, &at).is_err() && check_bradlow(&counts, &above).is_ok();

    let codes: Vec<i32> = [5.0, 6.0, 4.0]
        .iter()
        .map(|&l| cli_solve_exit(dir.path(), l, bounds))
        .collect();
    let exits_ok = codes == [0, 0, 2];
    verdict(
        sweep_ok && edge_ok && exits_ok,
        format!(
            "sweep flag flips at 6pi: {sweep_ok}; exact edge: {edge_ok}; exit codes |S|=25,36,16: {codes:?}"
        ),
    )
}

fn uniqueness(bounds: &mut Bounds) -> Verdict {
    let src = r#""zeros_q": [[2, 2, 1], [5.5, 6, 1]], "zeros_p": [[6, 1.5, 1]]"#;
    let a = solve(8.0, 128, "tw", src, r#", "seed": 1"#);
    let b = solve(8.0, 128, "tw", src, r#", "seed": 2"#);
    bounds.record(&a.report);
    bounds.record(&b.report);
    let (fa, fb) = (a.fields.unwrap(), b.fields.unwrap());
    let d = fa.u.max_abs_diff(&fb.u).max(fa.v.max_abs_diff(&fb.v));
    verdict(d < 1e-6, format!("sup |(u,v)_1 - (u,v)_2| = {d:e}"))
}

fn random_field(g: &TorusGeometry, rng: &mut ChaCha8Rng, amp: f64) -> ScalarField {
    let modes: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.gen_range(-3..=3) as f64,
                rng.gen_range(-3..=3) as f64,
                rng.gen_range(-amp..amp),
                rng.gen_range(0.0..2.0 * PI),
            )
        })
        .collect();
    let (l1, l2) = (g.l1(), g.l2());
    ScalarField::from_fn(g, |x, y| {
        modes
            .iter()
            .map(|&(a, b, c, ph)| c * (2.0 * PI * (a * x / l1 + b * y / l2) + ph).cos())
            .sum::<f64>()
    })
}

fn gradient_consistency() -> Verdict {
    let g = TorusGeometry::square(6.0, 64).unwrap();
    let cfg = VortexConfiguration::vortices(
        vec![PointSource::unit(3.0, 3.0), PointSource::unit(1.0, 2.0)],
        vec![PointSource::unit(4.5, 1.0)],
    );
    let p = TwProblem::new(&g, &cfg, default_sigma(&g, 2.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let eps = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let f = random_field(&g, &mut rng, 0.5);
        let h = random_field(&g, &mut rng, 0.5);
        let df = random_field(&g, &mut rng, 1.0);
        let dh = random_field(&g, &mut rng, 1.0);
        let (gf, gh) = p.gradient(&f, &h).value;
        let analytic = gf.dot(&df) + gh.dot(&dh);
        let plus = p.functional(&f.axpy(eps, &df), &h.axpy(eps, &dh)).value;
        let minus = p.functional(&f.axpy(-eps, &df), &h.axpy(-eps, &dh)).value;
        let fd = (plus - minus) / (2.0 * eps);
        worst = worst.max((analytic - fd).abs() / analytic.abs());
    }
    verdict(
        worst < 1e-6,
        format!("max relative error {worst:.2e} over 10 random pairs"),
    )
}

fn vav_admissibility() -> Verdict {
    let single = |n: u32, second: bool| {
        let p = vec![PointSource::new(1.0, 1.0, n)];
        if second {
            VortexConfiguration::vortices(vec![], p)
        } else {
            VortexConfiguration::vortices(p, vec![])
        }
    };
    let geom = |area_over_pi: f64, nudge: i32| {
        let mut l2 = area_over_pi;
        for _ in 0..nudge.abs() {
            l2 = if nudge > 0 {
                l2.next_up()
            } else {
                l2.next_down()
            };
        }
        TorusGeometry::new(PI, l2, 16, 16).unwrap()
    };
    let ok = |c: &VortexConfiguration, g: &TorusGeometry| check_admissibility(c, g).is_ok();
    let n1 = single(3, false);
    let n1_ok = !ok(&n1, &geom(3.0, -1)) && !ok(&n1, &geom(3.0, 0)) && ok(&n1, &geom(3.0, 1));
    let n2 = single(2, true);
    let n2_ok = !ok(&n2, &geom(4.0, 0)) && ok(&n2, &geom(4.0, 1));
    // between 2π and 4π only (C2) binds
    let binding = match check_admissibility(&n2, &geom(3.0, 0)) {
        Err(VavError::Inadmissible {
            margin_c1,
            margin_c2,
            ..
        }) => margin_c1 > 0.0 && margin_c2 <= 0.0,
        _ => false,
    };
    verdict(
        n1_ok && n2_ok && binding,
        format!("N1=3 flips at 3pi: {n1_ok}; N2=2 flips at 4pi: {n2_ok}; (C2) binding: {binding}"),
    )
}

fn vav_quantization() -> Verdict {
    let one = solve(6.0, 128, "vav", r#""zeros_q": [[3, 3, 1]]"#, "");
    let q = one.report.quantized_integrals.unwrap();
    let ok1 = (q.iu - PI).abs() <= 0.01 * PI && (q.iv - PI).abs() <= 0.01 * PI;
    let bal = solve(
        6.0,
        128,
        "vav",
        r#""zeros_q": [[1.5, 1.5, 1]], "poles_q": [[4.5, 4.5, 1]]"#,
        "",
    );
    let qb = bal.report.quantized_integrals.unwrap();
    let ok2 = qb.iu.abs() <= 1e-2 * 36.0 && qb.iv.abs() <= 1e-2 * 36.0;
    verdict(
        ok1 && ok2,
        format!(
            "N1=1: Iu/pi {:.8} Iv/pi {:.8}; balanced: Iu {:.2e} Iv {:.2e}",
            q.iu / PI,
            q.iv / PI,
            qb.iu,
            qb.iv
        ),
    )
}

fn vav_fluxes() -> Verdict {
    let o = solve(
        6.0,
        128,
        "vav",
        r#""zeros_q": [[1.5, 1.5, 1], [4.5, 1.5, 1]], "poles_p": [[3, 4.5, 1]]"#,
        "",
    );
    let fl = o.report.fluxes.unwrap();
    let diff = fl.hat_minus_tilde / (2.0 * PI);
    let tilde = fl.tilde / (2.0 * PI);
    let e = o.report.energy.unwrap();
    let d = e.decomposition.unwrap();
    let energy_ok = e.total == 4.0 * PI * 3.0
        && d.chern_flux == 2.0 * 2.0 * PI
        && d.thom_q == 0.0
        && d.thom_p == 8.0 * PI;
    verdict(
        (diff - 2.0).abs() <= 0.01 && (tilde + 1.0).abs() <= 0.01 && energy_ok,
        format!(
            "(F^-F~)/2pi {diff:.6} F~/2pi {tilde:.6}; energy {:.12} = 12pi parts ({:.6}, {}, {:.6}) exact {energy_ok}",
            e.total, d.chern_flux, d.thom_q, d.thom_p
        ),
    )
}

fn shift_closed_form() -> Verdict {
    let g = TorusGeometry::square(5.0, 32).unwrap();
    let z = ScalarField::zeros(&g);
    let mut worst = 0.0f64;
    for a in [-0.9f64, 0.0, 0.5] {
        let c = constraint_shift(&z, &z, &z, a * g.area()).unwrap();
        worst = worst.max((c - 2.0 * a.atanh()).abs());
    }
    verdict(
        worst < 1e-10,
        format!("max |c - 2 artanh(a)| = {worst:.2e}"),
    )
}

fn f_properties() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let h = 1e-6;
    let (mut bounded, mut deriv_ok, mut analytic_ok) = (true, true, true);
    let (mut dmin, mut dmax) = (f64::INFINITY, 0.0f64);
    for _ in 0..10_000 {
        let (s1, s2, t): (f64, f64, f64) = (
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
        );
        bounded &= f_fun(s1, s2, t).abs() < 1.0;
        let d = (f_fun(s1, s2, t + h) - f_fun(s1, s2, t - h)) / (2.0 * h);
        deriv_ok &= d > 0.0 && d <= 0.5 + 1e-9;
        let a = f_fun_dt(s1, s2, t);
        analytic_ok &= a > 0.0 && a <= 0.5;
        dmin = dmin.min(d);
        dmax = dmax.max(d);
    }
    verdict(
        bounded && deriv_ok && analytic_ok,
        format!("|f| < 1: {bounded}; numeric df/dt in [{dmin:.3e}, {dmax:.12}]"),
    )
}

fn method_agreement() -> Verdict {
    let g = TorusGeometry::square(6.0, 128).unwrap();
    let cfg = VortexConfiguration {
        zeros_q: vec![PointSource::unit(1.5, 1.5)],
        poles_q: vec![PointSource::unit(4.5, 4.5)],
        ..Default::default()
    };
    let p = VavProblem::new(&g, &cfg, default_sigma(&g, 2.0)).unwrap();
    let newton = p.solve(&VavOptions::newton()).unwrap();
    match p.solve(&VavOptions::fixed_point(0.5)) {
        Ok(fp) => {
            let d = newton
                .u_shift
                .max_abs_diff(&fp.u_shift)
                .max(newton.v_shift.max_abs_diff(&fp.v_shift));
            verdict(
                d < 1e-5,
                format!(
                    "omega=0.5: sup difference {d:e} after {} iterations",
                    fp.iterations
                ),
            )
        }
        Err(e) => {
            let damped = p
                .solve(&VavOptions::fixed_point(0.25))
                .map(|fp| {
                    newton
                        .u_shift
                        .max_abs_diff(&fp.u_shift)
                        .max(newton.v_shift.max_abs_diff(&fp.v_shift))
                })
                .map_or_else(
                    |e| format!("also fails: {e}"),
                    |d| format!("sup difference {d:.2e}"),
                );
            verdict(
                false,
                format!("omega=0.5 fixed point: {e}; with omega=0.25: {damped}"),
            )
        }
    }
}

/// Direct mode sum of the mollified Green's function.
fn green_sum(l: f64, sigma: f64, src: [f64; 2], x: [f64; 2]) -> f64 {
    let kmax = (2.0 * 46.0f64).sqrt() / sigma;
    let m = (kmax * l / (2.0 * PI)).ceil() as i64;
    let (dx, dy) = (x[0] - src[0], x[1] - src[1]);
    let mut sum = 0.0;
    for a in -m..=m {
        for b in -m..=m {
            if a == 0 && b == 0 {
                continue;
            }
            let (k1, k2) = (2.0 * PI * a as f64 / l, 2.0 * PI * b as f64 / l);
            let ksq = k1 * k1 + k2 * k2;
            sum += (-0.5 * sigma * sigma * ksq).exp() * (k1 * dx + k2 * dy).cos() / ksq;
        }
    }
    -4.0 * PI / (l * l) * sum
}

fn green_oracle() -> Verdict {
    let g = TorusGeometry::square(6.0, 128).unwrap();
    let sigma = default_sigma(&g, 2.0);
    let z = g.node(32, 32);
    let w = background(&g, &[PointSource::unit(z[0], z[1])], sigma).unwrap();
    let got = w.get(96, 96);
    let oracle = green_sum(6.0, sigma, z, [z[0] + 3.0, z[1] + 3.0]);
    let d = (got - oracle).abs();
    verdict(
        d < 1e-6,
        format!("antipode {got:.12} oracle {oracle:.12} diff {d:.2e}"),
    )
}

fn main() {
    let mut bounds = Bounds::default();
    let mut results: Vec<(u32, &str, Verdict)> = Vec::new();
    results.push((1, "vacuum exactness", vacuum()));
    let (c2, c3) = tw_quantization(&mut bounds);
    results.push((2, "TW quantization", c2));
    results.push((3, "TW energy and flux", c3));
    results.push((4, "Bradlow threshold", bradlow(&mut bounds)));
    results.push((5, "TW uniqueness", uniqueness(&mut bounds)));
    results.push((6, "gradient consistency", gradient_consistency()));
    results.push((
        7,
        "functional lower bound",
        verdict(
            bounds.checked > 0 && bounds.violations == 0,
            format!(
                "{} iterates checked, {} below bound, smallest margin {:.6}",
                bounds.checked, bounds.violations, bounds.worst_gap
            ),
        ),
    ));
    results.push((8, "VAV admissibility", vav_admissibility()));
    results.push((9, "VAV quantization", vav_quantization()));
    results.push((10, "VAV fluxes and energy", vav_fluxes()));
    results.push((11, "constraint shift closed form", shift_closed_form()));
    results.push((12, "f-function properties", f_properties()));
    results.push((13, "method agreement", method_agreement()));
    results.push((14, "Green's sum oracle", green_oracle()));
    results.sort_by_key(|r| r.0);

    let mut failed = 0;
    for (n, name, v) in &results {
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {n:>2} {:<4} {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
