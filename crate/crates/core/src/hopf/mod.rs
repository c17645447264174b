//! Evaluation of the viscosity solution through the Hopf formula
//!
//! ```text
//! u(t,x) = min { (t−s) L((x−y)/(t−s)) + φ(s,y) : (s,y) ∈ ∂Q, s < t }
//! ```
//!
//! and through its time-slice form over `{t̄}×Ω`, together with the full set of
//! minimizers, which is what the superdifferential calculus needs.
//!
//! The minimization scans a tensor grid over each piece of ∂Q (the initial
//! slice, then every box face or the sphere for bounded domains) and refines
//! every grid-local minimum with projected Newton steps. Refined minima whose
//! objective is within `cluster_tol` of the best one are reported as distinct
//! minimizers when their positions differ by more than `separation`.

mod search;
mod window;

use serde::{Deserialize, Serialize};

pub use search::SliceData;
pub use window::{make_slice_window, SliceWindow, WindowCheck, WindowOptions};

use crate::domain::Domain;
use crate::error::{check_dim, Error, Result};
use crate::problem::Problem;
use crate::quadform::SpdForm;
use search::{Candidate, Ctx, Family, InitialSlice, SearchKnobs};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HopfOptions {
    /// Grid points per parameter axis.
    pub resolution: usize,
    /// Cap on grid points per searched family; the per-axis count shrinks
    /// (never below 8) in high dimension.
    pub max_grid_points: usize,
    /// Newton steps per refinement.
    pub refine_steps: usize,
    /// Objective gap under which two refined minima both count as minimizers.
    pub cluster_tol: f64,
    /// Sup-norm distance above which two minimizers are distinct wells.
    pub separation: f64,
    /// Grid-local minima refined per family, best first.
    pub max_starts: usize,
    /// Multiplier on the coercivity radius used to truncate whole-space searches.
    pub truncation_safety: f64,
}

impl Default for HopfOptions {
    fn default() -> Self {
        Self {
            resolution: 64,
            max_grid_points: 32_768,
            refine_steps: 40,
            cluster_tol: 1e-7,
            separation: 1e-4,
            max_starts: 24,
            truncation_safety: 2.0,
        }
    }
}

impl HopfOptions {
    pub fn validate(&self) -> Result<()> {
        if self.resolution < 8 {
            return Err(Error::InvalidInput("resolution must be ≥ 8".into()));
        }
        if self.max_grid_points < 8 {
            return Err(Error::InvalidInput("max_grid_points must be ≥ 8".into()));
        }
        if !(self.cluster_tol > 0.0) || !(self.separation > 0.0) {
            return Err(Error::InvalidInput("tolerances must be > 0".into()));
        }
        if self.max_starts == 0 || !(self.truncation_safety >= 1.0) {
            return Err(Error::InvalidInput(
                "max_starts must be ≥ 1 and truncation_safety ≥ 1".into(),
            ));
        }
        Ok(())
    }

    fn knobs(&self) -> SearchKnobs {
        SearchKnobs {
            resolution: self.resolution,
            max_grid_points: self.max_grid_points,
            refine_steps: self.refine_steps,
            max_starts: self.max_starts,
        }
    }
}

/// A point (s, y) of ∂Q (or of the slice {t̄}×Ω) attaining the minimum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Minimizer {
    pub s: f64,
    pub y: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HopfValue {
    pub value: f64,
    pub minimizers: Vec<Minimizer>,
    /// Every reported minimizer came out of a converged refinement.
    pub refined: bool,
    /// Set by [`slice_value`] when the point is not inside a verified window.
    pub outside_certified_window: bool,
}

impl HopfValue {
    pub fn n_minimizers(&self) -> usize {
        self.minimizers.len()
    }
}

/// `u(t,x)` by the Hopf formula.
pub fn hopf_value(problem: &Problem, form: &SpdForm, t: f64, x: &[f64], opts: &HopfOptions) -> Result<HopfValue> {
    check_dim(problem.dim(), form.dim())?;
    check_dim(problem.dim(), x.len())?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::EmptyAdmissibleSet(format!("t must be > 0, got {t}")));
    }
    let domain = problem.domain();
    if !domain.contains_closed(x) {
        return Err(Error::InvalidInput(format!("x = {x:?} lies outside Ω̄")));
    }
    let data = problem.data();
    let ctx = Ctx { form, t, x };
    let initial = InitialSlice(data);
    let (lo, hi, clip) = match domain.bounding_box() {
        Some((lo, hi)) => (lo, hi, matches!(domain, Domain::Ball { .. }).then_some(domain)),
        None => {
            let r = truncation_radius(form, t, initial.value(x), data.lower_bound(), opts, |z| data.initial(z), x);
            (x.iter().map(|v| v - r).collect(), x.iter().map(|v| v + r).collect(), None)
        }
    };
    let slice = Family::slice(x.len(), 0.0, &initial, lo, hi, clip);
    let mut cands = search::search(&slice, &ctx, opts.knobs());
    if domain.is_bounded() {
        let best = cands.iter().map(|c| c.objective).fold(f64::INFINITY, f64::min);
        let lateral_lb = data.lateral_lower_bound();
        for fam in Family::lateral(domain, data, t) {
            // (t−s)L((x−y)/(t−s)) ≥ |x−y|²/(2Λt) with Λ = λ_max(A).
            if let Some(lb) = lateral_lb {
                let d = fam.distance_from(x);
                if d * d / (2.0 * form.lambda_max() * t) + lb > best + opts.cluster_tol {
                    continue;
                }
            }
            cands.extend(search::search(&fam, &ctx, opts.knobs()));
        }
    }
    Ok(cluster(cands, opts, false))
}

/// `min_y [(t−t̄)L((x−y)/(t−t̄)) + u(t̄,y)]` over y ∈ Ω, with `u(t̄,·)` supplied by `slice`.
///
/// The result is flagged `outside_certified_window` unless `window` is given,
/// verifies, uses the same `t̄`, and contains (t, x).
#[allow(clippy::too_many_arguments)]
pub fn slice_value(
    problem: &Problem,
    form: &SpdForm,
    t_bar: f64,
    t: f64,
    x: &[f64],
    slice: &dyn SliceData,
    window: Option<&SliceWindow>,
    opts: &HopfOptions,
) -> Result<HopfValue> {
    check_dim(problem.dim(), form.dim())?;
    check_dim(problem.dim(), x.len())?;
    if !(t > t_bar) || !(t_bar >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "need t > t_bar ≥ 0, got t = {t}, t_bar = {t_bar}"
        )));
    }
    let domain = problem.domain();
    let ctx = Ctx { form, t, x };
    let (lo, hi, clip) = match domain.bounding_box() {
        Some((lo, hi)) => (lo, hi, matches!(domain, Domain::Ball { .. }).then_some(domain)),
        None => {
            let r = truncation_radius(
                form,
                t - t_bar,
                slice.value(x),
                problem.data().lower_bound(),
                opts,
                |z| slice.value(z),
                x,
            );
            (x.iter().map(|v| v - r).collect(), x.iter().map(|v| v + r).collect(), None)
        }
    };
    let fam = Family::slice(x.len(), t_bar, slice, lo, hi, clip);
    let cands = search::search(&fam, &ctx, opts.knobs());
    let certified = window.is_some_and(|w| {
        (w.t_bar - t_bar).abs() <= 1e-12 * (1.0 + t_bar) && w.contains(t, x) && w.check(domain).all()
    });
    Ok(cluster(cands, opts, !certified))
}

/// The solution slice `u(t̄,·)` evaluated by the Hopf formula, with the exact
/// gradient `A⁻¹(y−z)/(t̄−s)` read off the first minimizer.
pub struct HopfSlice<'a> {
    pub problem: &'a Problem,
    pub form: &'a SpdForm,
    pub t_bar: f64,
    pub opts: HopfOptions,
}

impl SliceData for HopfSlice<'_> {
    fn value(&self, y: &[f64]) -> f64 {
        hopf_value(self.problem, self.form, self.t_bar, y, &self.opts)
            .map(|h| h.value)
            .unwrap_or(f64::INFINITY)
    }

    fn gradient(&self, y: &[f64], out: &mut [f64]) {
        match hopf_value(self.problem, self.form, self.t_bar, y, &self.opts) {
            Ok(h) => {
                let m = &h.minimizers[0];
                let dt = self.t_bar - m.s;
                let d: Vec<f64> = y.iter().zip(&m.y).map(|(a, b)| (a - b) / dt).collect();
                self.form.apply_inv(&d, out);
            }
            Err(_) => out.iter_mut().for_each(|v| *v = 0.0),
        }
    }
}

/// Re-refines the well around a known minimizer at a new point (t, x), without a
/// grid scan. Used to follow individual wells of a multi-well minimum.
pub fn refine_well(
    problem: &Problem,
    form: &SpdForm,
    t: f64,
    x: &[f64],
    start: &Minimizer,
    opts: &HopfOptions,
) -> Option<Minimizer> {
    let domain = problem.domain();
    let data = problem.data();
    let ctx = Ctx { form, t, x };
    let initial = InitialSlice(data);
    if start.s == 0.0 {
        let (lo, hi, clip) = match domain.bounding_box() {
            Some((lo, hi)) => (lo, hi, matches!(domain, Domain::Ball { .. }).then_some(domain)),
            None => (
                start.y.iter().map(|v| v - 1e6).collect(),
                start.y.iter().map(|v| v + 1e6).collect(),
                None,
            ),
        };
        let fam = Family::slice(x.len(), 0.0, &initial, lo, hi, clip);
        let (theta, v, _) = search::refine(&fam, &ctx, &start.y, opts.refine_steps);
        let c = fam.to_candidate(&theta, v, true);
        return Some(Minimizer {
            s: c.s,
            y: c.y,
            objective: c.objective,
        });
    }
    if let Domain::Box { lower, upper } = domain {
        // Identify the face the minimizer sits on.
        let axis = (0..x.len()).find(|&k| start.y[k] == lower[k] || start.y[k] == upper[k])?;
        let fams = Family::lateral(domain, data, t);
        let side_idx = 2 * axis + usize::from(start.y[axis] == upper[axis]);
        let fam = &fams[side_idx];
        let mut theta0 = vec![start.s.min(t * (1.0 - 1e-9))];
        theta0.extend((0..x.len()).filter(|&j| j != axis).map(|j| start.y[j]));
        let (theta, v, _) = search::refine(fam, &ctx, &theta0, opts.refine_steps);
        let c = fam.to_candidate(&theta, v, true);
        return Some(Minimizer {
            s: c.s,
            y: c.y,
            objective: c.objective,
        });
    }
    None
}

/// Radius around x outside of which no y can beat the trivial candidate y = x:
/// λ|x−y|²/(2τ) ≤ g(x) − inf g.
fn truncation_radius(
    form: &SpdForm,
    tau: f64,
    value_at_x: f64,
    lower_bound: Option<f64>,
    opts: &HopfOptions,
    g: impl Fn(&[f64]) -> f64,
    x: &[f64],
) -> f64 {
    let lam = form.lambda_min();
    let radius_for = |lb: f64| (2.0 * tau * (value_at_x - lb).max(0.0) / lam).sqrt();
    let r = match lower_bound {
        Some(lb) => radius_for(lb),
        None => {
            // Grow a sampling ball until the implied radius fits inside it.
            let mut probe = 1.0;
            let mut lb = value_at_x;
            let n = x.len();
            let per_axis = ((4096f64).powf(1.0 / n as f64).floor() as usize).max(3);
            let mut z = vec![0.0; n];
            let mut r = 0.0;
            for _ in 0..30 {
                let total = per_axis.pow(n as u32);
                for idx in 0..total {
                    let mut rem = idx;
                    for k in 0..n {
                        let c = rem % per_axis;
                        rem /= per_axis;
                        z[k] = x[k] - probe + 2.0 * probe * c as f64 / (per_axis - 1) as f64;
                    }
                    lb = lb.min(g(&z));
                }
                r = radius_for(lb);
                if r <= probe {
                    break;
                }
                probe *= 2.0;
            }
            r
        }
    };
    (opts.truncation_safety * r).max(1e-3)
}

fn cluster(mut cands: Vec<Candidate>, opts: &HopfOptions, outside: bool) -> HopfValue {
    cands.retain(|c| c.objective.is_finite());
    let best = cands
        .iter()
        .map(|c| c.objective)
        .fold(f64::INFINITY, f64::min);
    cands.retain(|c| c.objective <= best + opts.cluster_tol);
    cands.sort_by(|a, b| a.objective.total_cmp(&b.objective));
    let mut kept: Vec<Candidate> = Vec::new();
    for c in cands {
        let dup = kept.iter().any(|k| {
            let gap = k
                .y
                .iter()
                .zip(&c.y)
                .map(|(a, b)| (a - b).abs())
                .fold((k.s - c.s).abs(), f64::max);
            gap <= opts.separation
        });
        if !dup {
            kept.push(c);
        }
    }
    kept.sort_by(|a, b| {
        a.s.total_cmp(&b.s).then_with(|| {
            a.y.iter()
                .zip(&b.y)
                .map(|(p, q)| p.total_cmp(q))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let refined = kept.iter().all(|c| c.converged);
    HopfValue {
        value: best,
        minimizers: kept
            .into_iter()
            .map(|c| Minimizer {
                s: c.s,
                y: c.y,
                objective: c.objective,
            })
            .collect(),
        refined,
        outside_certified_window: outside,
    }
}
