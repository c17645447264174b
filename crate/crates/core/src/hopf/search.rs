//! Grid scan plus projected Newton refinement of the Hopf objective
//! `J(s,y) = L(x−y)/(t−s) + φ(s,y)` over one parameterized piece of ∂Q.

use nalgebra::{DMatrix, DVector};

use crate::data::BoundaryData;
use crate::domain::Domain;
use crate::quadform::{SpdForm, MAX_DIM};

/// Values on a time slice, with an optional analytic gradient.
pub trait SliceData: Sync {
    fn value(&self, y: &[f64]) -> f64;

    fn gradient(&self, y: &[f64], out: &mut [f64]) {
        let mut z = y.to_vec();
        for i in 0..y.len() {
            let h = 1e-6 * (1.0 + y[i].abs());
            z[i] = y[i] + h;
            let up = self.value(&z);
            z[i] = y[i] - h;
            let down = self.value(&z);
            z[i] = y[i];
            out[i] = (up - down) / (2.0 * h);
        }
    }
}

/// The initial datum viewed as slice data at s = 0.
pub(crate) struct InitialSlice<'a>(pub &'a dyn BoundaryData);

impl SliceData for InitialSlice<'_> {
    fn value(&self, y: &[f64]) -> f64 {
        self.0.initial(y)
    }

    fn gradient(&self, y: &[f64], out: &mut [f64]) {
        self.0.initial_gradient(y, out)
    }
}

pub(crate) struct Ctx<'a> {
    pub form: &'a SpdForm,
    pub t: f64,
    pub x: &'a [f64],
}

pub(crate) enum Kind<'a> {
    /// θ = y at a fixed time `s`; `clip` projects y onto Ω̄ (balls).
    Slice {
        s: f64,
        source: &'a dyn SliceData,
        clip: Option<&'a Domain>,
    },
    /// θ = (s, y without `axis`), with y[axis] = `side`.
    BoxFace {
        axis: usize,
        side: f64,
        data: &'a dyn BoundaryData,
    },
    /// θ = (s, hyperspherical angles), y = center + radius·u(angles).
    Sphere {
        center: &'a [f64],
        radius: f64,
        data: &'a dyn BoundaryData,
    },
}

pub(crate) struct Family<'a> {
    pub kind: Kind<'a>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub n: usize,
}

/// A refined candidate.
#[derive(Debug, Clone)]
pub(crate) struct Candidate {
    pub s: f64,
    pub y: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SearchKnobs {
    pub resolution: usize,
    pub max_grid_points: usize,
    pub refine_steps: usize,
    pub max_starts: usize,
}

impl<'a> Family<'a> {
    pub fn slice(n: usize, s: f64, source: &'a dyn SliceData, lo: Vec<f64>, hi: Vec<f64>, clip: Option<&'a Domain>) -> Self {
        Self {
            kind: Kind::Slice { s, source, clip },
            lo,
            hi,
            n,
        }
    }

    /// Lateral pieces of ∂Q for a bounded domain, restricted to s ∈ [0, t).
    pub fn lateral(domain: &'a Domain, data: &'a dyn BoundaryData, t: f64) -> Vec<Self> {
        let s_hi = t * (1.0 - 1e-9);
        match domain {
            Domain::Box { lower, upper } => {
                let n = lower.len();
                let mut out = Vec::with_capacity(2 * n);
                for axis in 0..n {
                    for side in [lower[axis], upper[axis]] {
                        let mut lo = vec![0.0];
                        let mut hi = vec![s_hi];
                        for j in (0..n).filter(|&j| j != axis) {
                            lo.push(lower[j]);
                            hi.push(upper[j]);
                        }
                        out.push(Self {
                            kind: Kind::BoxFace { axis, side, data },
                            lo,
                            hi,
                            n,
                        });
                    }
                }
                out
            }
            Domain::Ball { center, radius } if center.len() == 1 => [center[0] - radius, center[0] + radius]
                .into_iter()
                .map(|side| Self {
                    kind: Kind::BoxFace { axis: 0, side, data },
                    lo: vec![0.0],
                    hi: vec![s_hi],
                    n: 1,
                })
                .collect(),
            Domain::Ball { center, radius } => {
                let n = center.len();
                let mut lo = vec![0.0];
                let mut hi = vec![s_hi];
                for k in 0..n - 1 {
                    lo.push(0.0);
                    hi.push(if k + 1 == n - 1 {
                        2.0 * std::f64::consts::PI
                    } else {
                        std::f64::consts::PI
                    });
                }
                vec![Self {
                    kind: Kind::Sphere {
                        center,
                        radius: *radius,
                        data,
                    },
                    lo,
                    hi,
                    n,
                }]
            }
            Domain::WholeSpace { .. } => Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Lower bound on |x − y| over the spatial points of a lateral family.
    pub fn distance_from(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::Slice { .. } => 0.0,
            Kind::BoxFace { axis, side, .. } => (x[*axis] - side).abs(),
            Kind::Sphere { center, radius, .. } => (radius - crate::domain::dist(x, center)).abs(),
        }
    }

    /// Maps θ to (s, y). Returns `None` for grid points outside the admissible set.
    fn point(&self, theta: &[f64], y: &mut [f64]) -> Option<f64> {
        match &self.kind {
            Kind::Slice { s, clip, .. } => {
                y.copy_from_slice(theta);
                if let Some(d) = clip {
                    d.project_closure(y);
                }
                Some(*s)
            }
            Kind::BoxFace { axis, side, .. } => {
                let mut k = 1;
                for (j, v) in y.iter_mut().enumerate() {
                    if j == *axis {
                        *v = *side;
                    } else {
                        *v = theta[k];
                        k += 1;
                    }
                }
                Some(theta[0])
            }
            Kind::Sphere { center, radius, .. } => {
                let n = center.len();
                let mut sin_prod = 1.0;
                for i in 0..n {
                    let u = if i < n - 1 {
                        let a = theta[1 + i];
                        let u = sin_prod * a.cos();
                        sin_prod *= a.sin();
                        u
                    } else {
                        sin_prod
                    };
                    y[i] = center[i] + radius * u;
                }
                Some(theta[0])
            }
        }
    }

    fn is_grid_admissible(&self, theta: &[f64]) -> bool {
        match &self.kind {
            Kind::Slice { clip: Some(d), .. } => d.contains_closed(theta),
            _ => true,
        }
    }

    fn boundary_value(&self, s: f64, y: &[f64]) -> f64 {
        match &self.kind {
            Kind::Slice { source, .. } => source.value(y),
            Kind::BoxFace { data, .. } | Kind::Sphere { data, .. } => data.lateral(s, y),
        }
    }

    pub fn eval(&self, ctx: &Ctx, theta: &[f64]) -> f64 {
        let mut y = [0.0; MAX_DIM];
        let y = &mut y[..self.n];
        let s = match self.point(theta, y) {
            Some(s) => s,
            None => return f64::INFINITY,
        };
        let dt = ctx.t - s;
        if !(dt > 0.0) {
            return f64::INFINITY;
        }
        let mut d = [0.0; MAX_DIM];
        for i in 0..self.n {
            d[i] = ctx.x[i] - y[i];
        }
        ctx.form.l(&d[..self.n]) / dt + self.boundary_value(s, y)
    }

    /// Gradient in θ; returns the objective.
    fn gradient(&self, ctx: &Ctx, theta: &[f64], g: &mut [f64]) -> f64 {
        let n = self.n;
        let mut y = vec![0.0; n];
        let s = self.point(theta, &mut y).unwrap_or(0.0);
        let dt = ctx.t - s;
        let d: Vec<f64> = (0..n).map(|i| ctx.x[i] - y[i]).collect();
        let mut ad = vec![0.0; n];
        ctx.form.apply_inv(&d, &mut ad);
        let cost = ctx.form.l(&d) / dt;
        // ∂J/∂y = −A⁻¹(x−y)/dt + ∇φ, ∂J/∂s = L(x−y)/dt² + ∂ₛφ
        let mut gy = vec![0.0; n];
        let (value, phi_s) = match &self.kind {
            Kind::Slice { source, .. } => {
                source.gradient(&y, &mut gy);
                (source.value(&y), 0.0)
            }
            Kind::BoxFace { data, .. } | Kind::Sphere { data, .. } => {
                let ps = data.lateral_gradient(s, &y, &mut gy);
                (data.lateral(s, &y), ps)
            }
        };
        for i in 0..n {
            gy[i] -= ad[i] / dt;
        }
        let gs = cost / dt + phi_s;
        match &self.kind {
            Kind::Slice { .. } => g.copy_from_slice(&gy),
            Kind::BoxFace { axis, .. } => {
                g[0] = gs;
                let mut k = 1;
                for (j, v) in gy.iter().enumerate() {
                    if j != *axis {
                        g[k] = *v;
                        k += 1;
                    }
                }
            }
            Kind::Sphere { .. } => {
                g[0] = gs;
                // Chain rule through the angle map by central differences.
                let mut th = theta.to_vec();
                let mut yp = vec![0.0; n];
                let mut ym = vec![0.0; n];
                for k in 1..theta.len() {
                    let h = 1e-7;
                    th[k] = theta[k] + h;
                    self.point(&th, &mut yp);
                    th[k] = theta[k] - h;
                    self.point(&th, &mut ym);
                    th[k] = theta[k];
                    g[k] = (0..n).map(|i| gy[i] * (yp[i] - ym[i]) / (2.0 * h)).sum();
                }
            }
        }
        cost + value
    }

    fn hessian(&self, ctx: &Ctx, theta: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        let mut hess = DMatrix::zeros(d, d);
        let mut gp = vec![0.0; d];
        let mut gm = vec![0.0; d];
        match &self.kind {
            Kind::Slice { s, source, .. } => {
                // Exact model of the quadratic part, differences for the data.
                let dt = ctx.t - s;
                let ai = ctx.form.inverse();
                let mut z = theta.to_vec();
                for k in 0..d {
                    let h = 1e-5 * (1.0 + theta[k].abs());
                    z[k] = theta[k] + h;
                    source.gradient(&z, &mut gp);
                    z[k] = theta[k] - h;
                    source.gradient(&z, &mut gm);
                    z[k] = theta[k];
                    for i in 0..d {
                        hess[(i, k)] = (gp[i] - gm[i]) / (2.0 * h) + ai[i * d + k] / dt;
                    }
                }
            }
            _ => {
                let mut z = theta.to_vec();
                for k in 0..d {
                    let h = 1e-5 * (1.0 + theta[k].abs());
                    z[k] = theta[k] + h;
                    self.gradient(ctx, &z, &mut gp);
                    z[k] = theta[k] - h;
                    self.gradient(ctx, &z, &mut gm);
                    z[k] = theta[k];
                    for i in 0..d {
                        hess[(i, k)] = (gp[i] - gm[i]) / (2.0 * h);
                    }
                }
            }
        }
        (&hess + hess.transpose()) * 0.5
    }

    pub fn to_candidate(&self, theta: &[f64], objective: f64, converged: bool) -> Candidate {
        let mut y = vec![0.0; self.n];
        let s = self.point(theta, &mut y).unwrap_or(0.0);
        Candidate {
            s,
            y,
            objective,
            converged,
        }
    }
}

fn grid_coord(lo: f64, hi: f64, m: usize, k: usize) -> f64 {
    if m == 1 {
        0.5 * (lo + hi)
    } else {
        lo + (hi - lo) * (k as f64 / (m - 1) as f64)
    }
}

/// Scans a tensor grid and returns the grid-local minima (axial neighbours), best first.
pub(crate) fn scan(fam: &Family, ctx: &Ctx, m: usize, max_starts: usize) -> Vec<(Vec<f64>, f64)> {
    let d = fam.dim();
    let total = m.checked_pow(d as u32).expect("grid too large");
    let mut values = vec![f64::INFINITY; total];
    let mut theta = vec![0.0; d];
    for (idx, slot) in values.iter_mut().enumerate() {
        decode(idx, m, d, &fam.lo, &fam.hi, &mut theta);
        if fam.is_grid_admissible(&theta) {
            *slot = fam.eval(ctx, &theta);
        }
    }
    let mut minima: Vec<(usize, f64)> = Vec::new();
    let mut stride = vec![1usize; d];
    for k in 1..d {
        stride[k] = stride[k - 1] * m;
    }
    for idx in 0..total {
        let v = values[idx];
        if !v.is_finite() {
            continue;
        }
        let mut is_min = true;
        for k in 0..d {
            let c = (idx / stride[k]) % m;
            if c > 0 && values[idx - stride[k]] < v {
                is_min = false;
                break;
            }
            if c + 1 < m && values[idx + stride[k]] < v {
                is_min = false;
                break;
            }
        }
        if is_min {
            minima.push((idx, v));
        }
    }
    minima.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    minima.truncate(max_starts);
    minima
        .into_iter()
        .map(|(idx, v)| {
            let mut th = vec![0.0; d];
            decode(idx, m, d, &fam.lo, &fam.hi, &mut th);
            (th, v)
        })
        .collect()
}

fn decode(mut idx: usize, m: usize, d: usize, lo: &[f64], hi: &[f64], out: &mut [f64]) {
    for k in 0..d {
        out[k] = grid_coord(lo[k], hi[k], m, idx % m);
        idx /= m;
    }
}

/// Projected damped Newton from `start`, staying inside the family's parameter box.
pub(crate) fn refine(fam: &Family, ctx: &Ctx, start: &[f64], steps: usize) -> (Vec<f64>, f64, bool) {
    let d = fam.dim();
    let mut theta = start.to_vec();
    let mut g = vec![0.0; d];
    let mut value = fam.gradient(ctx, &theta, &mut g);
    if !value.is_finite() {
        return (theta, value, false);
    }
    let mut converged = false;
    for _ in 0..steps {
        // Bound-active coordinates pushing outward are frozen.
        let free: Vec<usize> = (0..d)
            .filter(|&k| {
                let at_lo = theta[k] <= fam.lo[k] && g[k] > 0.0;
                let at_hi = theta[k] >= fam.hi[k] && g[k] < 0.0;
                !(at_lo || at_hi)
            })
            .collect();
        let gnorm = free.iter().map(|&k| g[k].abs()).fold(0.0, f64::max);
        if free.is_empty() || gnorm <= 1e-13 * (1.0 + value.abs()) {
            converged = true;
            break;
        }
        let hess = fam.hessian(ctx, &theta);
        let nf = free.len();
        let mut hr = DMatrix::from_fn(nf, nf, |i, j| hess[(free[i], free[j])]);
        let gr = DVector::from_fn(nf, |i, _| -g[free[i]]);
        let scale = (0..nf).map(|i| hr[(i, i)].abs()).fold(1e-12, f64::max);
        let mut shift = 0.0;
        let dir = loop {
            if let Some(ch) = hr.clone().cholesky() {
                break ch.solve(&gr);
            }
            shift = if shift == 0.0 { 1e-10 * scale } else { shift * 10.0 };
            for i in 0..nf {
                hr[(i, i)] += shift;
            }
            if shift > 1e12 * scale {
                break gr.clone();
            }
        };
        let mut alpha = 1.0;
        let mut accepted = false;
        let mut trial = theta.clone();
        for _ in 0..50 {
            trial.copy_from_slice(&theta);
            for (i, &k) in free.iter().enumerate() {
                trial[k] = (theta[k] + alpha * dir[i]).clamp(fam.lo[k], fam.hi[k]);
            }
            let tv = fam.eval(ctx, &trial);
            if tv <= value {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // No representable decrease left: stationary to machine precision when the
            // gradient is already tiny relative to the curvature.
            let newton_len: f64 = dir.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let tnorm = theta.iter().map(|v| v.abs()).fold(1.0, f64::max);
            converged = newton_len <= 1e-7 * tnorm;
            break;
        }
        let step = trial
            .iter()
            .zip(&theta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        theta.copy_from_slice(&trial);
        value = fam.gradient(ctx, &theta, &mut g);
        let tnorm = theta.iter().map(|v| v.abs()).fold(1.0, f64::max);
        if step <= 1e-14 * tnorm {
            converged = true;
            break;
        }
    }
    (theta, value, converged)
}

/// Full search over one family: scan, then refine every grid-local minimum.
pub(crate) fn search(fam: &Family, ctx: &Ctx, knobs: SearchKnobs) -> Vec<Candidate> {
    let d = fam.dim() as u32;
    let mut m = knobs.resolution;
    while m > 8 && m.checked_pow(d).map_or(true, |total| total > knobs.max_grid_points) {
        m -= 1;
    }
    let starts = scan(fam, ctx, m, knobs.max_starts);
    let mut out = Vec::with_capacity(starts.len());
    for (theta0, v0) in starts {
        let (theta, v, conv) = refine(fam, ctx, &theta0, knobs.refine_steps);
        if v.is_finite() && v <= v0 {
            out.push(fam.to_candidate(&theta, v, conv));
        } else {
            out.push(fam.to_candidate(&theta0, v0, false));
        }
    }
    out
}
