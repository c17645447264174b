use std::path::Path;

use hj_core::analytic::{eps_min_energy, eps_solution, EpsExample};
use hj_core::characteristics::{
    derivative_identity_check, dissipation_check, ArcStatus, Tracer, DISSIPATION_TOL,
};
use hj_core::hopf::{hopf_value, make_slice_window};
use hj_core::superdiff::{monotonicity_check, superdifferential, SuperDiffOptions};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Loaded;
use crate::output::{coord_names, num, write_file, Csv};
use crate::{CliError, Suite};

fn parse_list(flag: &str, raw: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("--{flag}: cannot parse {s:?} as a number")))
        })
        .collect()
}

fn parse_counts(raw: &str, expected: usize) -> Result<Vec<usize>, CliError> {
    let counts: Vec<usize> = raw
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .ok()
                .filter(|n| *n >= 1)
                .ok_or_else(|| CliError::Config(format!("--grid: {s:?} is not a positive count")))
        })
        .collect::<Result<_, _>>()?;
    if counts.len() != expected {
        return Err(CliError::Config(format!(
            "--grid expects {expected} comma-separated counts, got {}",
            counts.len()
        )));
    }
    Ok(counts)
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn spatial_axes(l: &Loaded, counts: &[usize]) -> Result<Vec<Vec<f64>>, CliError> {
    let n = l.form.dim();
    let (lo, hi) = match (&l.config.grid.lower, &l.config.grid.upper) {
        (Some(lo), Some(hi)) => (lo.clone(), hi.clone()),
        (None, None) => l
            .problem
            .domain()
            .bounding_box()
            .unwrap_or_else(|| (vec![-2.0; n], vec![2.0; n])),
        _ => return Err(l.error_at("grid", "lower", "give both lower and upper, or neither")),
    };
    if lo.len() != n || hi.len() != n {
        return Err(l.error_at("grid", "lower", format!("bounds must have {n} entries")));
    }
    Ok((0..n).map(|j| linspace(lo[j], hi[j], counts[j])).collect())
}

/// Row-major product of the axes, last axis fastest.
fn product(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(*v);
                    q
                })
            })
            .collect();
    }
    out
}

pub fn solve(l: &Loaded, grid: &str, out: &Path) -> Result<(), CliError> {
    let n = l.form.dim();
    let counts = parse_counts(grid, n + 1)?;
    let t_min = l.config.grid.t_min.unwrap_or(0.1);
    let t_max = l.config.grid.t_max.unwrap_or(2.0);
    if !(t_min > 0.0 && t_max >= t_min) {
        return Err(l.error_at("grid", "t_min", format!("need 0 < t_min ≤ t_max, got [{t_min}, {t_max}]")));
    }
    let mut axes = vec![linspace(t_min, t_max, counts[0])];
    axes.extend(spatial_axes(l, &counts[1..])?);
    let domain = l.problem.domain();
    let points: Vec<Vec<f64>> = product(&axes)
        .into_iter()
        .filter(|p| domain.contains_closed(&p[1..]))
        .collect();
    let rows: Vec<(f64, usize)> = points
        .par_iter()
        .map(|p| {
            hopf_value(&l.problem, &l.form, p[0], &p[1..], &l.hopf).map(|h| (h.value, h.n_minimizers()))
        })
        .collect::<Result<_, _>>()?;
    let mut header = vec!["t".to_string()];
    header.extend(coord_names("x", n));
    header.extend(["u".to_string(), "n_minimizers".to_string()]);
    let mut csv = Csv::new(&header);
    for (p, (u, k)) in points.iter().zip(rows) {
        let mut cells: Vec<String> = p.iter().map(|v| num(*v)).collect();
        cells.push(num(u));
        cells.push(k.to_string());
        csv.row(&cells);
    }
    csv.write(out)
}

pub fn singular_scan(l: &Loaded, t: f64, grid: &str, out: &Path) -> Result<(), CliError> {
    let n = l.form.dim();
    if !(t > 0.0) {
        return Err(CliError::Config(format!("--t must be > 0, got {t}")));
    }
    let counts = parse_counts(grid, n)?;
    // D⁺u lives on the open set; boundary and exterior grid points are skipped.
    let domain = l.problem.domain();
    let points: Vec<Vec<f64>> = product(&spatial_axes(l, &counts)?)
        .into_iter()
        .filter(|x| domain.contains(x))
        .collect();
    let rows: Vec<(f64, usize, bool)> = points
        .par_iter()
        .map(|x| {
            superdifferential(&l.problem, &l.form, t, x, &l.hopf, &l.superdiff)
                .map(|sd| (sd.min_energy, sd.vertices.len(), sd.singular))
        })
        .collect::<Result<_, _>>()?;
    let mut header = coord_names("x", n);
    header.extend(["min_energy", "n_vertices", "singular"].map(String::from));
    let mut csv = Csv::new(&header);
    for (x, (e, k, s)) in points.iter().zip(rows) {
        let mut cells: Vec<String> = x.iter().map(|v| num(*v)).collect();
        cells.extend([num(e), k.to_string(), u8::from(s).to_string()]);
        csv.row(&cells);
    }
    csv.write(out)
}

fn tracer(l: &Loaded) -> Tracer<'_> {
    let mut t = Tracer::new(&l.problem, &l.form);
    t.hopf = l.hopf;
    t.superdiff = l.superdiff;
    t.options = l.trace;
    t.window = l.window;
    t
}

pub fn trace(l: &Loaded, start: &str, dt: Option<f64>, tmax: f64, out: &Path) -> Result<(), CliError> {
    let n = l.form.dim();
    let start = parse_list("start", start)?;
    if start.len() != n + 1 {
        return Err(CliError::Config(format!(
            "--start expects t0 and {n} coordinate(s), got {} values",
            start.len()
        )));
    }
    let mut tr = tracer(l);
    if let Some(dt) = dt {
        if !(dt > 0.0) {
            return Err(CliError::Config(format!("--dt must be > 0, got {dt}")));
        }
        tr.options.dt = dt;
    }
    let arc = tr.trace(start[0], &start[1..], tmax, None)?;
    let mut header = vec!["s".to_string()];
    header.extend(coord_names("gamma", n));
    header.push("tau".into());
    header.extend(coord_names("p", n));
    header.extend(["F", "u", "singular"].map(String::from));
    let mut csv = Csv::new(&header);
    for w in &arc.samples {
        let mut cells = vec![num(w.s)];
        cells.extend(w.gamma.iter().map(|v| num(*v)));
        cells.push(num(w.tau));
        cells.extend(w.p.iter().map(|v| num(*v)));
        cells.extend([num(w.energy), num(w.u), u8::from(w.singular).to_string()]);
        csv.row(&cells);
    }
    csv.write(out)?;
    if let Some(d) = arc.diagnostic {
        eprintln!("hj: trace stopped early at s = {}: {d}", arc.samples.last().map_or(start[0], |w| w.s));
    }
    Ok(())
}

#[derive(Serialize)]
struct Report {
    suite: &'static str,
    n_checks: usize,
    max_excess: f64,
    pass: bool,
}

fn start_point(l: &Loaded, suite: &str) -> Result<(f64, Vec<f64>, f64), CliError> {
    let n = l.form.dim();
    let v = &l.config.verify;
    let start = v
        .start
        .clone()
        .ok_or_else(|| l.error_at("verify", "start", format!("suite {suite} needs start = [t0, x0...]")))?;
    if start.len() != n + 1 || !(start[0] > 0.0) {
        return Err(l.error_at("verify", "start", format!("expected [t0 > 0, {n} coordinate(s)]")));
    }
    let t_max = v
        .t_max
        .ok_or_else(|| l.error_at("verify", "t_max", format!("suite {suite} needs t_max")))?;
    if !(t_max > start[0]) {
        return Err(l.error_at("verify", "t_max", "t_max must exceed t0"));
    }
    Ok((start[0], start[1..].to_vec(), t_max))
}

pub fn verify(l: &Loaded, suite: Suite, out: &Path) -> Result<(), CliError> {
    let report = match suite {
        Suite::Monotonicity => {
            let n = l.form.dim();
            let w = l.config.verify.window.clone().unwrap_or_else(|| {
                let mut w = vec![1.0];
                w.extend(match l.problem.domain().bounding_box() {
                    Some((lo, hi)) => lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect::<Vec<_>>(),
                    None => vec![0.0; n],
                });
                w
            });
            if w.len() != n + 1 {
                return Err(l.error_at("verify", "window", format!("expected [t', {n} coordinate(s)]")));
            }
            let window = make_slice_window(&l.problem, &l.form, w[0], &w[1..], &l.window)
                .map_err(|e| l.error_at("verify", "window", e))?;
            let pairs = l.config.verify.pairs.unwrap_or(500);
            let r = monotonicity_check(&l.problem, &l.form, &window, pairs, l.config.seed, &l.hopf, &l.superdiff)?;
            Report {
                suite: "monotonicity",
                n_checks: r.pairs + r.pairs.min(200),
                max_excess: r.max_excess.max(r.same_time_max_excess),
                pass: r.pass,
            }
        }
        Suite::Dissipation => {
            let (t0, x0, t_max) = start_point(l, "dissipation")?;
            let t_bar = l.config.verify.t_bar.unwrap_or(0.0);
            let arc = tracer(l).trace(t0, &x0, t_max, None)?;
            let r = dissipation_check(&arc, t_bar).map_err(|e| l.error_at("verify", "t_bar", e))?;
            Report {
                suite: "dissipation",
                n_checks: r.per_sample.len(),
                max_excess: r.max_ratio_excess,
                pass: r.pass && arc.diagnostic.is_none(),
            }
        }
        Suite::Persistence => {
            let (t0, x0, t_max) = start_point(l, "persistence")?;
            let r = tracer(l).persistence_run(t0, &x0, t_max)?;
            // Singular means F < −singular_tol, so the excess is max F + singular_tol.
            let worst = r.arc.samples.iter().map(|w| w.energy).fold(f64::NEG_INFINITY, f64::max);
            Report {
                suite: "persistence",
                n_checks: r.samples,
                max_excess: worst + l.superdiff.singular_tol,
                pass: r.pass,
            }
        }
        Suite::Identity => {
            let (t0, x0, t_max) = start_point(l, "identity")?;
            let arc = tracer(l).trace(t0, &x0, t_max, None)?;
            let r = derivative_identity_check(&arc, &l.form)?;
            Report {
                suite: "identity",
                n_checks: r.checked,
                max_excess: r.max_err - (r.fitted_c * arc.dt + 1e-4),
                pass: r.pass,
            }
        }
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(out, format!("{json}\n").as_bytes())?;
    if report.pass {
        Ok(())
    } else {
        Err(CliError::Suite(format!(
            "suite {} failed (max excess {:e}); report: {}",
            report.suite,
            report.max_excess,
            out.display()
        )))
    }
}

struct Row {
    id: &'static str,
    what: &'static str,
    measured: f64,
    threshold: f64,
    pass: bool,
}

pub fn example(eps: f64) -> Result<(), CliError> {
    let ex = EpsExample::new(eps)?;
    let (problem, form) = ex.problem()?;
    let mut tr = Tracer::new(&problem, &form);
    tr.options.dt = 1e-3;
    let hopf = tr.hopf;
    let mut rows = Vec::new();

    let t_axis = linspace(0.1, 2.0, 100);
    let x_axis = linspace(-2.0, 2.0, 100);
    let pts: Vec<(f64, f64)> = t_axis.iter().flat_map(|t| x_axis.iter().map(move |x| (*t, *x))).collect();
    let errs: Vec<f64> = pts
        .par_iter()
        .map(|(t, x)| hopf_value(&problem, &form, *t, &[*x], &hopf).map(|h| (h.value - eps_solution(eps, *t, *x)).abs()))
        .collect::<Result<_, _>>()?;
    let a1 = errs.iter().copied().fold(0.0, f64::max);
    rows.push(Row {
        id: "A1",
        what: "max |u - closed form| on 100x100 grid",
        measured: a1,
        threshold: 1e-6,
        pass: a1 <= 1e-6,
    });

    let mut a2: f64 = 0.0;
    for s in [0.4, 0.9, 1.9] {
        let sd = superdifferential(&problem, &form, s, &[0.0], &hopf, &SuperDiffOptions::default())?;
        let exact = eps_min_energy(eps, s);
        a2 = a2
            .max((sd.min_selection.tau - exact.tau).abs())
            .max((sd.min_selection.p[0] - exact.p[0]).abs());
    }
    rows.push(Row {
        id: "A2",
        what: "energy-minimizing selection at (s,0)",
        measured: a2,
        threshold: 1e-6,
        pass: a2 <= 1e-6,
    });

    let arc = tr.trace(0.9, &[0.0], 1.9, None)?;
    let f0 = arc.samples[0].energy;
    let sharp = arc
        .samples
        .iter()
        .map(|w| (w.energy - ((0.9 + eps) / (w.s + eps)).powi(2) * f0).abs())
        .fold(0.0, f64::max);
    let general = dissipation_check(&arc, 0.0)?;
    rows.push(Row {
        id: "A3",
        what: "sharp dissipation along arc from (0.9,0)",
        measured: sharp,
        threshold: 1e-4,
        pass: sharp <= 1e-4,
    });
    rows.push(Row {
        id: "A3",
        what: "general dissipation excess (t_bar = 0)",
        measured: general.max_ratio_excess,
        threshold: DISSIPATION_TOL,
        pass: general.pass,
    });

    let r = tr.persistence_run(0.9, &[0.0], 10.0)?;
    let lost = r.arc.samples.iter().filter(|w| !w.singular).count();
    rows.push(Row {
        id: "A4",
        what: "non-singular samples to t = 10 (max_time)",
        measured: lost as f64,
        threshold: 0.0,
        pass: lost == 0 && r.status == ArcStatus::MaxTime,
    });

    println!("{:<4} {:<44} {:>12} {:>10}  result", "id", "check", "measured", "threshold");
    for row in &rows {
        println!(
            "{:<4} {:<44} {:>12.3e} {:>10.1e}  {}",
            row.id,
            row.what,
            row.measured,
            row.threshold,
            if row.pass { "PASS" } else { "FAIL" }
        );
    }
    let failed = rows.iter().filter(|r| !r.pass).count();
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Suite(format!("{failed} example check(s) failed")))
    }
}
