//! Generalized characteristics driven by the energy-minimizing selection.
//!
//! The arc is stepped forward with `γ(s+dt) = γ(s) + dt·A p(s)`, where
//! `(τ(s), p(s))` minimizes `F = τ + H(p)` over D⁺u(s, γ(s)). Along such an arc
//! the minimal energy obeys the dissipation bound
//! `F(s) ≤ ((t₀−t̄)/(s−t̄))² F(t₀)`, which is what keeps a singular point
//! singular for all later times.

use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::hopf::{
    hopf_value, make_slice_window, refine_well, HopfOptions, Minimizer, SliceWindow, WindowOptions,
};
use crate::problem::Problem;
use crate::quadform::SpdForm;
use crate::superdiff::{superdiff_from_value, SuperDiff, SuperDiffOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct TraceOptions {
    pub dt: f64,
    /// Fraction of the window radius at which a trace stops with `LeftWindow`.
    pub rewindow_fraction: f64,
    /// Retry a step with four quarter steps before accepting a loss of singularity.
    pub jitter_guard: bool,
    /// Pull a step that fell off a two-well shock back onto it.
    pub shock_projection: bool,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            rewindow_fraction: 0.8,
            jitter_guard: true,
            shock_projection: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArcSample {
    pub s: f64,
    pub gamma: Vec<f64>,
    pub tau: f64,
    pub p: Vec<f64>,
    /// Minimal energy F(τ(s), p(s)).
    pub energy: f64,
    pub u: f64,
    pub singular: bool,
    pub n_vertices: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ArcStatus {
    Running,
    HitBoundary,
    LeftWindow,
    MaxTime,
}

#[derive(Debug, Clone, Serialize)]
pub struct CharArc {
    pub samples: Vec<ArcSample>,
    pub t0: f64,
    pub dt: f64,
    pub status: ArcStatus,
    /// Why the arc stopped early, when it did so on an error.
    pub diagnostic: Option<String>,
}

impl CharArc {
    /// Largest |γ(s+dt) − γ(s)|/dt.
    pub fn max_speed(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| crate::domain::dist(&w[1].gamma, &w[0].gamma) / self.dt)
            .fold(0.0, f64::max)
    }

    /// Indices i where the vertex count changes between samples i and i+1.
    pub fn selection_jumps(&self) -> Vec<usize> {
        self.samples
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0].n_vertices != w[1].n_vertices)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Bundles the problem with every numerical knob used along an arc.
#[derive(Debug, Clone)]
pub struct Tracer<'a> {
    pub problem: &'a Problem,
    pub form: &'a SpdForm,
    pub hopf: HopfOptions,
    pub superdiff: SuperDiffOptions,
    pub options: TraceOptions,
    pub window: WindowOptions,
}

impl<'a> Tracer<'a> {
    pub fn new(problem: &'a Problem, form: &'a SpdForm) -> Self {
        Self {
            problem,
            form,
            hopf: HopfOptions::default(),
            superdiff: SuperDiffOptions::default(),
            options: TraceOptions::default(),
            window: WindowOptions::default(),
        }
    }

    pub fn superdiff_at(&self, t: f64, x: &[f64]) -> Result<SuperDiff> {
        let hv = hopf_value(self.problem, self.form, t, x, &self.hopf)?;
        superdiff_from_value(self.form, t, x, hv, &self.superdiff)
    }

    fn sample(&self, sd: &SuperDiff) -> ArcSample {
        ArcSample {
            s: sd.t,
            gamma: sd.x.clone(),
            tau: sd.min_selection.tau,
            p: sd.min_selection.p.clone(),
            energy: sd.min_energy,
            u: sd.value,
            singular: sd.singular,
            n_vertices: sd.vertices.len(),
        }
    }

    fn velocity(&self, sd: &SuperDiff) -> Vec<f64> {
        let mut v = vec![0.0; sd.x.len()];
        self.form.apply(&sd.min_selection.p, &mut v);
        v
    }

    /// Traces from (t₀, x₀) until `t_max`, the boundary, or (with a window) until the
    /// arc leaves `rewindow_fraction` of the window radius.
    pub fn trace(&self, t0: f64, x0: &[f64], t_max: f64, window: Option<&SliceWindow>) -> Result<CharArc> {
        check_dim(self.problem.dim(), x0.len())?;
        let dt = self.options.dt;
        if !(dt > 0.0) || !(t0 > 0.0) || !(t_max >= t0) {
            return Err(Error::InvalidInput(format!(
                "need dt > 0 and 0 < t0 ≤ t_max, got dt = {dt}, t0 = {t0}, t_max = {t_max}"
            )));
        }
        if let Some(w) = window {
            if !(w.t_bar < t0) {
                return Err(Error::InvalidInput("window t_bar must precede t0".into()));
            }
        }
        let domain = self.problem.domain();
        if domain.is_bounded() && !domain.contains(x0) {
            return Err(Error::InvalidInput(format!("x0 = {x0:?} is not in Ω")));
        }
        let mut sd = self.superdiff_at(t0, x0)?;
        let mut arc = CharArc {
            samples: vec![self.sample(&sd)],
            t0,
            dt,
            status: ArcStatus::Running,
            diagnostic: None,
        };
        let mut k = 0usize;
        loop {
            let s_next = t0 + (k + 1) as f64 * dt;
            if s_next > t_max * (1.0 + 1e-12) {
                arc.status = ArcStatus::MaxTime;
                break;
            }
            let next = match self.step(&sd, s_next, dt) {
                Ok(Some(next)) => next,
                Ok(None) => {
                    arc.status = ArcStatus::HitBoundary;
                    break;
                }
                Err(e) => {
                    arc.diagnostic = Some(e.to_string());
                    break;
                }
            };
            sd = next;
            arc.samples.push(self.sample(&sd));
            k += 1;
            if let Some(w) = window {
                if w.relative_offset(sd.t, &sd.x) > self.options.rewindow_fraction {
                    arc.status = ArcStatus::LeftWindow;
                    break;
                }
            }
        }
        Ok(arc)
    }

    /// One step of length `h` ending at time `s_next`. `None` when the step reaches ∂Ω.
    fn step(&self, sd: &SuperDiff, s_next: f64, h: f64) -> Result<Option<SuperDiff>> {
        let next = match self.euler(sd, s_next, h)? {
            Some(n) => n,
            None => return Ok(None),
        };
        let fell_off = sd.min_energy < -10.0 * self.superdiff.singular_tol && !next.singular;
        if !(self.options.jitter_guard && fell_off) {
            return Ok(Some(next));
        }
        let mut cur = sd.clone();
        let quarter = h / 4.0;
        for j in 1..=4 {
            let s = if j == 4 { s_next } else { sd.t + j as f64 * quarter };
            cur = match self.euler(&cur, s, quarter)? {
                Some(n) => n,
                None => return Ok(None),
            };
        }
        Ok(Some(cur))
    }

    fn euler(&self, sd: &SuperDiff, s_next: f64, h: f64) -> Result<Option<SuperDiff>> {
        let v = self.velocity(sd);
        let x_next: Vec<f64> = sd.x.iter().zip(&v).map(|(a, b)| a + h * b).collect();
        if self.off_domain(&x_next) {
            return Ok(None);
        }
        let next = self.superdiff_at(s_next, &x_next)?;
        if next.singular || !self.options.shock_projection {
            return Ok(Some(next));
        }
        let wells = if sd.singular && sd.minimizers.len() == 2 {
            sd.minimizers.clone()
        } else if let Some(pair) = self.crossed_wells(sd, &next) {
            pair.to_vec()
        } else {
            return Ok(Some(next));
        };
        match self.project_on_shock(&wells, s_next, &x_next)? {
            Some(proj) if proj.singular => Ok(Some(proj)),
            _ => Ok(Some(next)),
        }
    }

    /// The old and new wells when a smooth step jumped across a shock into another well.
    fn crossed_wells(&self, sd: &SuperDiff, next: &SuperDiff) -> Option<[Minimizer; 2]> {
        if sd.minimizers.len() != 1 || next.minimizers.len() != 1 {
            return None;
        }
        let new = &next.minimizers[0];
        let old = refine_well(self.problem, self.form, next.t, &next.x, &sd.minimizers[0], &self.hopf)?;
        let gap = old
            .y
            .iter()
            .zip(&new.y)
            .map(|(a, b)| (a - b).abs())
            .fold((old.s - new.s).abs(), f64::max);
        (gap > self.hopf.separation && old.objective > next.value + self.hopf.cluster_tol)
            .then(|| [old, new.clone()])
    }

    fn off_domain(&self, x: &[f64]) -> bool {
        let d = self.problem.domain();
        d.is_bounded() && (!d.contains(x) || d.boundary_distance(x) <= 1e-9)
    }

    /// Newton on g(x) = v₁(x) − v₂(x), the gap between the two well values, along ∇g = p₁ − p₂.
    fn project_on_shock(&self, wells: &[Minimizer], s: f64, x: &[f64]) -> Result<Option<SuperDiff>> {
        let n = x.len();
        let mut x = x.to_vec();
        let mut starts = wells.to_vec();
        for _ in 0..6 {
            let mut vals = [0.0; 2];
            let mut grads = [vec![0.0; n], vec![0.0; n]];
            for i in 0..2 {
                let m = match refine_well(self.problem, self.form, s, &x, &starts[i], &self.hopf) {
                    Some(m) => m,
                    None => return Ok(None),
                };
                let dt = s - m.s;
                let q: Vec<f64> = x.iter().zip(&m.y).map(|(a, b)| (a - b) / dt).collect();
                self.form.apply_inv(&q, &mut grads[i]);
                vals[i] = m.objective;
                starts[i] = m;
            }
            let g = vals[0] - vals[1];
            let dg: Vec<f64> = grads[0].iter().zip(&grads[1]).map(|(a, b)| a - b).collect();
            let dg2: f64 = dg.iter().map(|v| v * v).sum();
            if dg2 <= 1e-300 {
                return Ok(None);
            }
            if g.abs() <= 1e-14 * (1.0 + vals[0].abs()) {
                break;
            }
            for j in 0..n {
                x[j] -= g / dg2 * dg[j];
            }
            if self.off_domain(&x) {
                return Ok(None);
            }
        }
        Ok(Some(self.superdiff_at(s, &x)?))
    }

    /// Follows a singular point forward, re-windowing whenever the arc leaves the
    /// current window, and checks that every sample stays singular.
    pub fn persistence_run(&self, t0: f64, x0: &[f64], t_max: f64) -> Result<PersistenceReport> {
        let start = self.superdiff_at(t0, x0)?;
        if !start.singular {
            return Err(Error::InvalidInput(format!(
                "(t0, x0) = ({t0}, {x0:?}) is not singular: min energy {:e}",
                start.min_energy
            )));
        }
        let bounded = self.problem.domain().is_bounded();
        let mut samples: Vec<ArcSample> = Vec::new();
        let mut windows = 0usize;
        let mut window_failures = 0usize;
        let (mut t, mut x) = (t0, x0.to_vec());
        let (status, diagnostic) = loop {
            let window = if bounded {
                match make_slice_window(self.problem, self.form, t, &x, &self.window) {
                    Ok(w) => {
                        windows += 1;
                        Some(w)
                    }
                    Err(_) => {
                        window_failures += 1;
                        None
                    }
                }
            } else {
                None
            };
            let arc = self.trace(t, &x, t_max, window.as_ref())?;
            let skip = usize::from(!samples.is_empty());
            samples.extend(arc.samples.iter().skip(skip).cloned());
            let last = samples.last().expect("non-empty");
            if arc.status != ArcStatus::LeftWindow || arc.diagnostic.is_some() || arc.samples.len() < 2 {
                break (arc.status, arc.diagnostic);
            }
            t = last.s;
            x = last.gamma.clone();
        };
        let falsification = samples.iter().find(|s| !s.singular).cloned();
        let last_singular = samples
            .iter()
            .take_while(|s| s.singular)
            .last()
            .map_or(t0, |s| s.s);
        Ok(PersistenceReport {
            singular_duration: last_singular - t0,
            status,
            samples: samples.len(),
            windows,
            window_failures,
            pass: falsification.is_none()
                && diagnostic.is_none()
                && matches!(status, ArcStatus::HitBoundary | ArcStatus::MaxTime),
            falsification,
            diagnostic,
            arc: CharArc {
                samples,
                t0,
                dt: self.options.dt,
                status,
                diagnostic: None,
            },
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PersistenceReport {
    pub singular_duration: f64,
    pub status: ArcStatus,
    pub samples: usize,
    pub windows: usize,
    pub window_failures: usize,
    /// First sample that lost singularity; a FALSIFICATION when present.
    pub falsification: Option<ArcSample>,
    pub diagnostic: Option<String>,
    pub pass: bool,
    #[serde(skip)]
    pub arc: CharArc,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub checked: usize,
    /// max |(u(ξ(s+dt)) − u(ξ(s)))/dt − (τ(s) + Ap(s)·p(s))|.
    pub max_err: f64,
    /// max |second difference of u along the arc| / dt².
    pub fitted_c: f64,
    pub pass: bool,
}

/// Samples closer than this many steps to a selection jump are skipped.
pub const JUMP_GUARD: usize = 5;

/// Forward differences of u along the arc against `τ + Ap·p`.
pub fn derivative_identity_check(arc: &CharArc, form: &SpdForm) -> Result<IdentityReport> {
    let n = arc.samples.len();
    if n < 3 {
        return Err(Error::InvalidInput("identity check needs ≥ 3 samples".into()));
    }
    let jumps = arc.selection_jumps();
    let near_jump = |i: usize| jumps.iter().any(|&j| i + JUMP_GUARD > j && i <= j + JUMP_GUARD);
    let dt = arc.dt;
    let mut max_err: f64 = 0.0;
    let mut fitted_c: f64 = 0.0;
    let mut checked = 0;
    for i in 0..n - 1 {
        if near_jump(i) {
            continue;
        }
        let w = &arc.samples[i];
        let fd = (arc.samples[i + 1].u - w.u) / dt;
        let rhs = w.tau + form.bilinear(&w.p, &w.p);
        max_err = max_err.max((fd - rhs).abs());
        checked += 1;
        if i + 2 < n && !near_jump(i + 1) {
            let d2 = (arc.samples[i + 2].u - 2.0 * arc.samples[i + 1].u + w.u) / (dt * dt);
            fitted_c = fitted_c.max(d2.abs());
        }
    }
    Ok(IdentityReport {
        checked,
        max_err,
        fitted_c,
        pass: max_err <= fitted_c * dt + 1e-4,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DissipationReport {
    pub t_bar: f64,
    /// max over samples of F(s) − ((t₀−t̄)/(s−t̄))² F(t₀).
    pub max_ratio_excess: f64,
    pub per_sample: Vec<f64>,
    pub pass: bool,
}

pub const DISSIPATION_TOL: f64 = 1e-5;

pub fn dissipation_check(arc: &CharArc, t_bar: f64) -> Result<DissipationReport> {
    let first = arc
        .samples
        .first()
        .ok_or_else(|| Error::InvalidInput("empty arc".into()))?;
    if !(t_bar < first.s) {
        return Err(Error::InvalidInput(format!("t_bar = {t_bar} must precede t0 = {}", first.s)));
    }
    let f0 = first.energy;
    let per_sample: Vec<f64> = arc
        .samples
        .iter()
        .map(|w| w.energy - ((first.s - t_bar) / (w.s - t_bar)).powi(2) * f0)
        .collect();
    let max_ratio_excess = per_sample.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(DissipationReport {
        t_bar,
        max_ratio_excess,
        per_sample,
        pass: max_ratio_excess <= DISSIPATION_TOL,
    })
}
