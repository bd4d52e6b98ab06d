//! The `solve`, `sweep` and `plotdata` subcommands. Each returns the
//! process exit status.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::config::RunConfig;
use crate::dump::FieldTable;
use crate::report::Status;
use crate::run::run;

/// I/O or configuration failure.
pub const EXIT_ERROR: i32 = 1;

fn resolve(out: &Path, name: &str) -> PathBuf {
    let p = Path::new(name);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        out.join(p)
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn solve_inner(config: &Path, out: &Path) -> Result<i32> {
    let cfg = RunConfig::load(config)?;
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let outcome = run(&cfg)?;
    write_file(
        &resolve(out, &cfg.outputs.report),
        &outcome.report.to_json(),
    )?;
    if let Some(f) = &outcome.fields {
        let table = FieldTable::from_fields(&f.u, &f.v, &f.curvatures);
        table.write(&resolve(out, &cfg.outputs.fields), cfg.outputs.format)?;
    }
    let report = &outcome.report;
    match report.status {
        Status::Inadmissible => eprintln!(
            "inadmissible: violates {} (margins {:e}, {:e})",
            report.admissibility.violated.join(", "),
            report.admissibility.margins[0],
            report.admissibility.margins[1]
        ),
        Status::Nonconverged => eprintln!(
            "solver did not converge: {}",
            report
                .solver_trace
                .as_ref()
                .and_then(|t| t.error.clone())
                .unwrap_or_default()
        ),
        Status::Solved => {}
    }
    Ok(report.status.exit_code())
}

/// `solve --config <path> [--out <dir>]`
pub fn cmd_solve(config: &Path, out: &Path) -> i32 {
    solve_inner(config, out).unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        EXIT_ERROR
    })
}

pub const SWEEP_HEADER: &str =
    "area,L1,L2,admissible,margin1,margin2,sup_e_u,sup_e_v,err_iu,err_iv,iterations,status";

/// One CSV row of a sweep; inadmissible rows carry flag and margins only.
pub fn sweep_row(cfg: &RunConfig) -> String {
    let area = cfg.torus.l1 * cfg.torus.l2;
    let mut row = format!("{area},{},{}", cfg.torus.l1, cfg.torus.l2);
    match run(cfg) {
        Err(e) => {
            let _ = write!(row, ",,,,,,,,,error: {}", e.to_string().replace(',', ";"));
        }
        Ok(o) => {
            let a = &o.report.admissibility;
            let _ = write!(row, ",{},{},{}", a.admissible, a.margins[0], a.margins[1]);
            let status = match o.report.status {
                Status::Solved => "solved",
                Status::Inadmissible => "inadmissible",
                Status::Nonconverged => "nonconverged",
            };
            match (
                &o.fields,
                &o.report.quantized_integrals,
                &o.report.solver_trace,
            ) {
                (Some(f), Some(q), Some(t)) => {
                    let _ = write!(
                        row,
                        ",{},{},{:e},{:e},{},{status}",
                        f.u.max().exp(),
                        f.v.max().exp(),
                        q.rel_error_iu,
                        q.rel_error_iv,
                        t.iterations
                    );
                }
                (_, _, Some(t)) => {
                    let _ = write!(row, ",,,,,{},{status}", t.iterations);
                }
                _ => {
                    let _ = write!(row, ",,,,,,{status}");
                }
            }
        }
    }
    row
}

pub fn parse_lengths(list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .map(|s| {
            let s = s.trim();
            let l: f64 = s.parse().with_context(|| format!("bad length {s:?}"))?;
            anyhow::ensure!(l > 0.0 && l.is_finite(), "length must be positive: {s}");
            Ok(l)
        })
        .collect()
}

fn sweep_inner(config: &Path, lengths: &str, out: &Path) -> Result<i32> {
    let base = RunConfig::load(config)?;
    let lengths = parse_lengths(lengths)?;
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let rows: Vec<String> = std::thread::scope(|s| {
        let handles: Vec<_> = lengths
            .iter()
            .map(|&l| {
                let base = &base;
                s.spawn(move || match base.rescaled(l) {
                    Ok(cfg) => sweep_row(&cfg),
                    Err(e) => format!(",{l},,,,,,,,,,error: {}", e.to_string().replace(',', ";")),
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep row"))
            .collect()
    });
    let mut text = String::from(SWEEP_HEADER);
    text.push('\n');
    for r in rows {
        text.push_str(&r);
        text.push('\n');
    }
    write_file(&out.join("sweep.csv"), &text)?;
    Ok(0)
}

/// `sweep --config <path> --lengths <l,l,...> --out <dir>`; writes
/// `<dir>/sweep.csv`.
pub fn cmd_sweep(config: &Path, lengths: &str, out: &Path) -> i32 {
    sweep_inner(config, lengths, out).unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        EXIT_ERROR
    })
}

/// `plotdata --fields <dump> --out <path>`
pub fn cmd_plotdata(fields: &Path, out: &Path) -> i32 {
    let res = FieldTable::read(fields)
        .map_err(anyhow::Error::from)
        .and_then(|t| write_file(out, &t.plot_text()));
    match res {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}
