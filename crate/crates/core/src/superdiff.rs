//! Superdifferential calculus at a point X = (t,x) of Q.
//!
//! The reachable gradients D*u(X) are read off the Hopf minimizers: a
//! minimizer (s,y) contributes `τ = −L((x−y)/(t−s))`, `p = A⁻¹(x−y)/(t−s)`.
//! D⁺u(X) is their convex hull, so every quantity below (minimum of the full
//! Hamiltonian `F(τ,p) = τ + H(p)`, minima of linear functionals, exposed
//! faces) is computed from the vertex list alone.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::dot;
use crate::error::{check_dim, Error, Result};
use crate::hopf::{hopf_value, slice_value, HopfOptions, HopfSlice, HopfValue, Minimizer, SliceWindow};
use crate::problem::Problem;
use crate::quadform::SpdForm;

/// A space-time slope (τ, p) with its energy `F = τ + H(p)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Covector {
    pub tau: f64,
    pub p: Vec<f64>,
    pub energy: f64,
}

impl Covector {
    pub fn new(form: &SpdForm, tau: f64, p: Vec<f64>) -> Result<Self> {
        let energy = tau + form.hamiltonian(&p)?;
        Ok(Self { tau, p, energy })
    }

    /// `(τ, p₁, …, pₙ)`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.p.len() + 1);
        v.push(self.tau);
        v.extend_from_slice(&self.p);
        v
    }

    fn pairing(&self, v: &[f64]) -> f64 {
        self.tau * v[0] + dot(&self.p, &v[1..])
    }

    fn sup_gap(&self, other: &Covector) -> f64 {
        self.p
            .iter()
            .zip(&other.p)
            .map(|(a, b)| (a - b).abs())
            .fold((self.tau - other.tau).abs(), f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuperDiffOptions {
    /// `min F < −singular_tol` marks a singular point.
    pub singular_tol: f64,
    /// Allowed |F| on reachable gradients.
    pub energy_tol: f64,
    /// Sup-norm radius under which two reachable gradients are merged.
    pub dedup_tol: f64,
    pub qp_iterations: usize,
    pub qp_tol: f64,
}

impl Default for SuperDiffOptions {
    fn default() -> Self {
        Self {
            singular_tol: 1e-6,
            energy_tol: 1e-6,
            dedup_tol: 1e-6,
            qp_iterations: 500,
            qp_tol: 1e-10,
        }
    }
}

impl SuperDiffOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.singular_tol > 0.0 && self.energy_tol > 0.0 && self.dedup_tol > 0.0 && self.qp_tol > 0.0) {
            return Err(Error::InvalidInput("superdifferential tolerances must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuperDiff {
    pub t: f64,
    pub x: Vec<f64>,
    /// Deduplicated reachable gradients.
    pub vertices: Vec<Covector>,
    pub min_energy: f64,
    pub min_selection: Covector,
    /// Barycentric coordinates of `min_selection` over `vertices`.
    pub weights: Vec<f64>,
    pub singular: bool,
    /// The solution value u(t,x).
    pub value: f64,
    /// The Hopf minimizers the vertices came from.
    pub minimizers: Vec<Minimizer>,
}

/// Reachable gradients from a list of minimizers of the Hopf (or slice) objective at (t, x).
pub fn gradients_from_minimizers(
    form: &SpdForm,
    t: f64,
    x: &[f64],
    minimizers: &[Minimizer],
    dedup_tol: f64,
) -> Result<Vec<Covector>> {
    if minimizers.is_empty() {
        return Err(Error::Superdifferential {
            t,
            x: x.to_vec(),
            reason: "no minimizers".into(),
        });
    }
    let n = x.len();
    let mut out: Vec<Covector> = Vec::with_capacity(minimizers.len());
    for m in minimizers {
        check_dim(n, m.y.len())?;
        let dt = t - m.s;
        let q: Vec<f64> = x.iter().zip(&m.y).map(|(a, b)| (a - b) / dt).collect();
        let mut p = vec![0.0; n];
        form.apply_inv(&q, &mut p);
        let tau = -form.l(&q);
        let c = Covector::new(form, tau, p)?;
        if !out.iter().any(|o| o.sup_gap(&c) <= dedup_tol) {
            out.push(c);
        }
    }
    Ok(out)
}

/// D*u(t,x). With `t_bar = 0` the vertices come from the Hopf formula itself;
/// with `t_bar > 0` from the slice representation over `u(t̄,·)`.
pub fn reachable_gradients(
    problem: &Problem,
    form: &SpdForm,
    t: f64,
    x: &[f64],
    t_bar: f64,
    hopf: &HopfOptions,
    dedup_tol: f64,
) -> Result<Vec<Covector>> {
    let hv = representation(problem, form, t, x, t_bar, hopf)?;
    gradients_from_minimizers(form, t, x, &hv.minimizers, dedup_tol)
}

fn representation(
    problem: &Problem,
    form: &SpdForm,
    t: f64,
    x: &[f64],
    t_bar: f64,
    hopf: &HopfOptions,
) -> Result<HopfValue> {
    if t_bar == 0.0 {
        hopf_value(problem, form, t, x, hopf)
    } else {
        let slice = HopfSlice {
            problem,
            form,
            t_bar,
            opts: *hopf,
        };
        slice_value(problem, form, t_bar, t, x, &slice, None, hopf)
    }
}

/// The full superdifferential record at (t, x) from the Hopf formula.
pub fn superdifferential(
    problem: &Problem,
    form: &SpdForm,
    t: f64,
    x: &[f64],
    hopf: &HopfOptions,
    opts: &SuperDiffOptions,
) -> Result<SuperDiff> {
    let hv = hopf_value(problem, form, t, x, hopf)?;
    superdiff_from_value(form, t, x, hv, opts)
}

pub fn superdiff_from_value(
    form: &SpdForm,
    t: f64,
    x: &[f64],
    hv: HopfValue,
    opts: &SuperDiffOptions,
) -> Result<SuperDiff> {
    let vertices = gradients_from_minimizers(form, t, x, &hv.minimizers, opts.dedup_tol)?;
    let (min_selection, weights) = min_selection_with_weights(&vertices, form, opts)?;
    let min_energy = min_selection.energy;
    Ok(SuperDiff {
        t,
        x: x.to_vec(),
        singular: min_energy < -opts.singular_tol,
        vertices,
        min_energy,
        min_selection,
        weights,
        value: hv.value,
        minimizers: hv.minimizers,
    })
}

/// argmin of F over the convex hull of `vertices`.
pub fn energy_min_selection(vertices: &[Covector], form: &SpdForm) -> Result<Covector> {
    min_selection_with_weights(vertices, form, &SuperDiffOptions::default()).map(|(c, _)| c)
}

/// As [`energy_min_selection`], also returning the barycentric weights.
pub fn min_selection_with_weights(
    vertices: &[Covector],
    form: &SpdForm,
    opts: &SuperDiffOptions,
) -> Result<(Covector, Vec<f64>)> {
    if vertices.is_empty() {
        return Err(Error::InvalidInput("empty vertex list".into()));
    }
    let n = form.dim();
    for v in vertices {
        check_dim(n, v.p.len())?;
    }
    let k = vertices.len();
    // F(Σλτ, Σλp) = c·λ + ½ λᵀQλ with c = τ, Q = PᵀAP.
    let c: Vec<f64> = vertices.iter().map(|v| v.tau).collect();
    let q = DMatrix::from_fn(k, k, |i, j| form.bilinear(&vertices[i].p, &vertices[j].p));
    let w = simplex_qp(&c, &q, n + 2, opts.qp_iterations, opts.qp_tol);
    let tau: f64 = w.iter().zip(&c).map(|(a, b)| a * b).sum();
    let mut p = vec![0.0; n];
    for (wi, v) in w.iter().zip(vertices) {
        for (pj, vj) in p.iter_mut().zip(&v.p) {
            *pj += wi * vj;
        }
    }
    Ok((Covector::new(form, tau, p)?, w))
}

/// Minimizes `c·λ + ½λᵀQλ` over the unit simplex. Q is positive semidefinite.
///
/// Some optimum is supported on at most `max_support` vertices. For small
/// vertex counts every such face is solved exactly; otherwise projected
/// gradient with a KKT polish on the detected support.
pub(crate) fn simplex_qp(c: &[f64], q: &DMatrix<f64>, max_support: usize, iterations: usize, tol: f64) -> Vec<f64> {
    let k = c.len();
    let f = |w: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 0..k {
            acc += c[i] * w[i];
            for j in 0..k {
                acc += 0.5 * w[i] * q[(i, j)] * w[j];
            }
        }
        acc
    };
    match k {
        1 => return vec![1.0],
        2 => {
            // λ on vertex 0: f'(λ) = (c₀−c₁) + (Q₀₀ − 2Q₀₁ + Q₁₁)λ + (Q₀₁ − Q₁₁).
            let curv = q[(0, 0)] - 2.0 * q[(0, 1)] + q[(1, 1)];
            let slope = c[0] - c[1] + q[(0, 1)] - q[(1, 1)];
            let lam = if curv > 1e-300 {
                (-slope / curv).clamp(0.0, 1.0)
            } else if slope < 0.0 {
                1.0
            } else {
                0.0
            };
            return vec![lam, 1.0 - lam];
        }
        _ => {}
    }
    if k <= FACE_ENUMERATION_LIMIT {
        if let Some(w) = best_face(c, q, max_support.min(k), &f) {
            return w;
        }
    }
    let lip = (0..k).map(|i| (0..k).map(|j| q[(i, j)].abs()).sum::<f64>()).fold(1e-12, f64::max);
    let mut w = vec![1.0 / k as f64; k];
    let mut g = vec![0.0; k];
    for _ in 0..iterations {
        for i in 0..k {
            g[i] = c[i] + (0..k).map(|j| q[(i, j)] * w[j]).sum::<f64>();
        }
        let target: Vec<f64> = w.iter().zip(&g).map(|(a, b)| a - b / lip).collect();
        let proj = project_simplex(&target);
        let d: Vec<f64> = proj.iter().zip(&w).map(|(a, b)| a - b).collect();
        let dnorm = d.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if dnorm <= tol {
            break;
        }
        // Exact line search along d within [0, 1].
        let gd: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        let dqd: f64 = (0..k)
            .map(|i| d[i] * (0..k).map(|j| q[(i, j)] * d[j]).sum::<f64>())
            .sum();
        let alpha = if dqd > 1e-300 { (-gd / dqd).clamp(0.0, 1.0) } else { 1.0 };
        for i in 0..k {
            w[i] += alpha * d[i];
        }
    }
    // Polish: solve the equality-constrained problem on the detected support.
    let support: Vec<usize> = (0..k).filter(|&i| w[i] > 1e-9).collect();
    if let Some(ws) = kkt_on_support(c, q, &support) {
        let mut cand = vec![0.0; k];
        for (i, &s) in support.iter().enumerate() {
            cand[s] = ws[i];
        }
        if cand.iter().all(|v| *v >= -1e-12) {
            cand.iter_mut().for_each(|v| *v = v.max(0.0));
            let sum: f64 = cand.iter().sum();
            cand.iter_mut().for_each(|v| *v /= sum);
            if f(&cand) <= f(&w) {
                return cand;
            }
        }
    }
    w
}

const FACE_ENUMERATION_LIMIT: usize = 14;

fn best_face(c: &[f64], q: &DMatrix<f64>, max_support: usize, f: &dyn Fn(&[f64]) -> f64) -> Option<Vec<f64>> {
    let k = c.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1u32 << k) {
        if mask.count_ones() as usize > max_support {
            continue;
        }
        let support: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        let Some(ws) = kkt_on_support(c, q, &support) else {
            continue;
        };
        if ws.iter().any(|v| *v < -1e-12) {
            continue;
        }
        let mut cand = vec![0.0; k];
        for (i, &s) in support.iter().enumerate() {
            cand[s] = ws[i].max(0.0);
        }
        let sum: f64 = cand.iter().sum();
        cand.iter_mut().for_each(|v| *v /= sum);
        let val = f(&cand);
        if best.as_ref().map_or(true, |(b, _)| val < *b) {
            best = Some((val, cand));
        }
    }
    best.map(|(_, w)| w)
}

fn kkt_on_support(c: &[f64], q: &DMatrix<f64>, support: &[usize]) -> Option<Vec<f64>> {
    let m = support.len();
    if m == 0 {
        return None;
    }
    let mut kkt = DMatrix::zeros(m + 1, m + 1);
    let mut rhs = nalgebra::DVector::zeros(m + 1);
    for (a, &i) in support.iter().enumerate() {
        for (b, &j) in support.iter().enumerate() {
            kkt[(a, b)] = q[(i, j)];
        }
        kkt[(a, m)] = 1.0;
        kkt[(m, a)] = 1.0;
        rhs[a] = -c[i];
    }
    rhs[m] = 1.0;
    let lu = kkt.lu();
    // Singular systems mean a non-unique face minimizer; a smaller face carries it.
    let det = lu.determinant();
    let scale = (0..m).map(|i| q[(support[i], support[i])].abs()).fold(1.0, f64::max);
    if !(det.abs() > 1e-12 * scale.powi(m as i32)) {
        return None;
    }
    let sol = lu.solve(&rhs)?;
    sol.iter().all(|v| v.is_finite()).then(|| sol.iter().take(m).copied().collect())
}

/// Euclidean projection onto the unit simplex (sort-based).
pub(crate) fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, ui) in u.iter().enumerate() {
        cum += ui;
        let th = (cum - 1.0) / (i + 1) as f64;
        if ui - th > 0.0 {
            theta = th;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// ∂u(X, V) = min over vertices of ⟨(τ,p), V⟩.
pub fn directional_derivative(vertices: &[Covector], v: &[f64]) -> Result<f64> {
    if vertices.is_empty() {
        return Err(Error::InvalidInput("empty vertex list".into()));
    }
    check_dim(vertices[0].p.len() + 1, v.len())?;
    Ok(vertices
        .iter()
        .map(|c| c.pairing(v))
        .fold(f64::INFINITY, f64::min))
}

/// Vertices attaining min ⟨·, V⟩ within 1e−9.
pub fn exposed_face(vertices: &[Covector], v: &[f64]) -> Result<Vec<Covector>> {
    let best = directional_derivative(vertices, v)?;
    Ok(vertices
        .iter()
        .filter(|c| c.pairing(v) <= best + 1e-9)
        .cloned()
        .collect())
}

/// D⁺v_t̄(t,x) = (u, 0) + (t − t̄) D⁺u(t,x) for `v_t̄ = (t − t̄) u`, as `(τ, p…)` vectors.
pub fn v_transform_superdiff(u_value: f64, t: f64, t_bar: f64, vertices: &[Covector]) -> Result<Vec<Vec<f64>>> {
    if !(t > t_bar) {
        return Err(Error::InvalidInput(format!("need t > t_bar, got {t} ≤ {t_bar}")));
    }
    let h = t - t_bar;
    Ok(vertices
        .iter()
        .map(|c| {
            let mut out = Vec::with_capacity(c.p.len() + 1);
            out.push(u_value + h * c.tau);
            out.extend(c.p.iter().map(|v| h * v));
            out
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub pairs: usize,
    /// max ⟨P₁−P₂, X₁−X₂⟩ − 2L(x₁−x₂) over sampled pairs.
    pub max_excess: f64,
    /// max ⟨p−q, x−y⟩ − Λ|x−y|²/(t′−t̄) over same-time pairs at t′.
    pub same_time_max_excess: f64,
    pub pass: bool,
}

/// Tolerance for [`monotonicity_check`].
pub const MONOTONICITY_TOL: f64 = 1e-7;

/// Samples pairs in the window and checks the joint space-time monotonicity of
/// `D⁺v_t̄`, using random hull points of each superdifferential.
pub fn monotonicity_check(
    problem: &Problem,
    form: &SpdForm,
    window: &SliceWindow,
    pair_count: usize,
    rng_seed: u64,
    hopf: &HopfOptions,
    opts: &SuperDiffOptions,
) -> Result<MonotonicityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let n = window.center_x.len();
    let draw = |rng: &mut ChaCha8Rng, same_time: Option<f64>| -> (f64, Vec<f64>) {
        loop {
            let dir = crate::domain::unit_vector(n + 1, rng);
            let r = window.radius * rng.gen::<f64>().powf(1.0 / (n + 1) as f64);
            let mut t = window.center_t + r * dir[0];
            let x: Vec<f64> = window.center_x.iter().zip(&dir[1..]).map(|(c, d)| c + r * d).collect();
            if let Some(ts) = same_time {
                t = ts;
                let dx = crate::domain::dist(&x, &window.center_x);
                if dx >= window.radius {
                    continue;
                }
            }
            if t > window.t_bar && (same_time.is_some() || window.contains(t, &x)) {
                return (t, x);
            }
        }
    };
    let hull_point = |rng: &mut ChaCha8Rng, sd: &SuperDiff| -> (f64, Vec<f64>) {
        let w: Vec<f64> = (0..sd.vertices.len()).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
        let total: f64 = w.iter().sum();
        let mut tau = 0.0;
        let mut p = vec![0.0; n];
        for (wi, v) in w.iter().zip(&sd.vertices) {
            tau += wi / total * v.tau;
            for j in 0..n {
                p[j] += wi / total * v.p[j];
            }
        }
        (tau, p)
    };

    let points: Vec<((f64, Vec<f64>), (f64, Vec<f64>))> =
        (0..pair_count).map(|_| (draw(&mut rng, None), draw(&mut rng, None))).collect();
    let sds: Vec<(SuperDiff, SuperDiff)> = {
        use rayon::prelude::*;
        points
            .par_iter()
            .map(|((t1, x1), (t2, x2))| {
                Ok((
                    superdifferential(problem, form, *t1, x1, hopf, opts)?,
                    superdifferential(problem, form, *t2, x2, hopf, opts)?,
                ))
            })
            .collect::<Result<_>>()?
    };
    let mut max_excess = f64::NEG_INFINITY;
    for (((t1, x1), (t2, x2)), (s1, s2)) in points.iter().zip(&sds) {
        let (tau1, p1) = hull_point(&mut rng, s1);
        let (tau2, p2) = hull_point(&mut rng, s2);
        let c1 = Covector::new(form, tau1, p1)?;
        let c2 = Covector::new(form, tau2, p2)?;
        let v1 = &v_transform_superdiff(s1.value, *t1, window.t_bar, &[c1])?[0];
        let v2 = &v_transform_superdiff(s2.value, *t2, window.t_bar, &[c2])?[0];
        let dx: Vec<f64> = x1.iter().zip(x2).map(|(a, b)| a - b).collect();
        let mut lhs = (v1[0] - v2[0]) * (t1 - t2);
        for j in 0..n {
            lhs += (v1[1 + j] - v2[1 + j]) * dx[j];
        }
        max_excess = max_excess.max(lhs - 2.0 * form.l(&dx));
    }

    // Spatial semiconcavity corollary on the slice t = t′.
    let tp = window.center_t;
    let c_semi = form.lambda_max() / (tp - window.t_bar);
    let same: Vec<(Vec<f64>, Vec<f64>)> = (0..pair_count.min(200))
        .map(|_| (draw(&mut rng, Some(tp)).1, draw(&mut rng, Some(tp)).1))
        .collect();
    let same_sds: Vec<(SuperDiff, SuperDiff)> = {
        use rayon::prelude::*;
        same.par_iter()
            .map(|(x1, x2)| {
                Ok((
                    superdifferential(problem, form, tp, x1, hopf, opts)?,
                    superdifferential(problem, form, tp, x2, hopf, opts)?,
                ))
            })
            .collect::<Result<_>>()?
    };
    let mut same_time_max_excess = f64::NEG_INFINITY;
    for ((x1, x2), (s1, s2)) in same.iter().zip(&same_sds) {
        let (_, p1) = hull_point(&mut rng, s1);
        let (_, p2) = hull_point(&mut rng, s2);
        let dx: Vec<f64> = x1.iter().zip(x2).map(|(a, b)| a - b).collect();
        let lhs: f64 = (0..n).map(|j| (p1[j] - p2[j]) * dx[j]).sum();
        same_time_max_excess = same_time_max_excess.max(lhs - c_semi * dot(&dx, &dx));
    }
    Ok(MonotonicityReport {
        pairs: pair_count,
        max_excess,
        same_time_max_excess,
        pass: max_excess <= MONOTONICITY_TOL && same_time_max_excess <= MONOTONICITY_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest};

    fn cv(form: &SpdForm, tau: f64, p: &[f64]) -> Covector {
        Covector::new(form, tau, p.to_vec()).unwrap()
    }

    #[test]
    fn symmetric_pair_selects_zero_slope() {
        let f = SpdForm::identity(1).unwrap();
        let v = [cv(&f, -0.5, &[1.0]), cv(&f, -0.5, &[-1.0])];
        let sel = energy_min_selection(&v, &f).unwrap();
        assert!((sel.tau + 0.5).abs() < 1e-15 && sel.p[0].abs() < 1e-15);
        assert!((sel.energy + 0.5).abs() < 1e-15);
    }

    #[test]
    fn singleton_selection_is_the_vertex() {
        let f = SpdForm::diagonal(&[2.0, 1.0]).unwrap();
        let v = cv(&f, 0.3, &[0.2, -0.7]);
        assert_eq!(energy_min_selection(std::slice::from_ref(&v), &f).unwrap(), v);
        assert!(energy_min_selection(&[], &f).is_err());
    }

    #[test]
    fn hull_containing_zero_slope_selects_it() {
        let f = SpdForm::identity(1).unwrap();
        let v = [cv(&f, 0.0, &[2.0]), cv(&f, 0.0, &[-1.0])];
        let sel = energy_min_selection(&v, &f).unwrap();
        assert!(sel.p[0].abs() < 1e-14 && sel.energy.abs() < 1e-14);
        // Enumeration oracle over 10⁴ hull points.
        let best = (0..=10_000)
            .map(|i| {
                let l = i as f64 / 10_000.0;
                let p = 2.0 * l - (1.0 - l);
                0.5 * p * p
            })
            .fold(f64::INFINITY, f64::min);
        assert!(sel.energy <= best + 1e-15);
    }

    #[test]
    fn directional_derivative_examples() {
        let f = SpdForm::identity(1).unwrap();
        let v = [cv(&f, -0.5, &[1.0]), cv(&f, -0.5, &[-1.0])];
        assert_eq!(directional_derivative(&v, &[1.0, 0.0]).unwrap(), -0.5);
        assert_eq!(directional_derivative(&v, &[0.0, 0.0]).unwrap(), 0.0);
        let single = [cv(&f, 0.25, &[-2.0])];
        assert_eq!(directional_derivative(&single, &[2.0, 3.0]).unwrap(), 0.5 - 6.0);
        assert!(directional_derivative(&v, &[1.0]).is_err());
    }

    #[test]
    fn exposed_face_examples() {
        let f = SpdForm::identity(1).unwrap();
        let v = [cv(&f, -0.5, &[1.0]), cv(&f, -0.5, &[-1.0])];
        let face = exposed_face(&v, &[0.0, 1.0]).unwrap();
        assert_eq!(face, vec![v[1].clone()]);
        assert_eq!(exposed_face(&v, &[0.0, 0.0]).unwrap().len(), 2);
        assert_eq!(exposed_face(&v, &[1.0, 0.0]).unwrap().len(), 2);
    }

    #[test]
    fn v_transform_examples() {
        let f = SpdForm::identity(1).unwrap();
        let out = v_transform_superdiff(0.5, 1.5, 0.5, &[cv(&f, -0.5, &[1.0])]).unwrap();
        assert_eq!(out, vec![vec![0.0, 1.0]]);
        let out = v_transform_superdiff(2.0, 1.0, 0.2, &[cv(&f, 0.0, &[0.0])]).unwrap();
        assert_eq!(out, vec![vec![2.0, 0.0]]);
        assert!(v_transform_superdiff(0.0, 1.0, 1.0, &[]).is_err());
    }

    #[test]
    fn simplex_projection_lands_on_simplex() {
        let p = project_simplex(&[0.9, 0.8, -3.0, 0.1]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(p.iter().all(|v| *v >= 0.0));
        assert!((p[0] - 0.55).abs() < 1e-15 && (p[1] - 0.45).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn selection_beats_random_hull_points(
            taus in proptest::collection::vec(-1.0f64..0.0, 4),
            ps in proptest::collection::vec(-2.0f64..2.0, 8),
            seed in 0u64..1000,
        ) {
            let f = SpdForm::new(2, &[1.3, 0.2, 0.2, 0.7]).unwrap();
            let verts: Vec<Covector> = (0..4)
                .map(|i| cv(&f, taus[i], &ps[2 * i..2 * i + 2]))
                .collect();
            let (sel, w) = min_selection_with_weights(&verts, &f, &SuperDiffOptions::default()).unwrap();
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(w.iter().all(|v| *v >= -1e-10));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..10_000 {
                let raw: Vec<f64> = (0..4).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
                let s: f64 = raw.iter().sum();
                let tau: f64 = (0..4).map(|i| raw[i] / s * taus[i]).sum();
                let p = [
                    (0..4).map(|i| raw[i] / s * ps[2 * i]).sum::<f64>(),
                    (0..4).map(|i| raw[i] / s * ps[2 * i + 1]).sum::<f64>(),
                ];
                prop_assert!(sel.energy <= tau + f.h(&p) + 1e-12);
            }
            for v in &verts {
                prop_assert!(sel.energy <= v.energy + 1e-12);
            }
        }
    }
}
