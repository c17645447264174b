//! Certified windows `B_t̄((t′,x′),R)` on which u is the inf-convolution of
//! its own t̄-slice, built from the constructive constants K, M, l, λ.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{dist, Domain};
use crate::error::{check_dim, Error, Result};
use crate::problem::Problem;
use crate::quadform::SpdForm;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceWindow {
    pub center_t: f64,
    pub center_x: Vec<f64>,
    pub radius: f64,
    pub t_bar: f64,
    /// Radius of the space-time ball containing every relevant minimizer.
    pub k: f64,
    /// Upper bound for |u| on that ball.
    pub m: f64,
    /// Lipschitz constant of u used for K.
    pub l: f64,
    pub lambda_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowCheck {
    /// t̄ > 0 and the closed spatial ball stays inside Ω.
    pub closure_in_q: bool,
    /// K > R and λ(K−R)²/(l(1+K+R)) ≥ 1.
    pub coercive: bool,
    /// (d(x′)−R)²/(t′−t̄+R) > 4M/λ; vacuous without lateral boundary.
    pub boundary_clearance: bool,
}

impl WindowCheck {
    pub fn all(&self) -> bool {
        self.closure_in_q && self.coercive && self.boundary_clearance
    }
}

impl SliceWindow {
    /// Membership in `B_t̄((t′,x′),R) = {t > t̄} ∩ B((t′,x′),R)`.
    pub fn contains(&self, t: f64, x: &[f64]) -> bool {
        if !(t > self.t_bar) {
            return false;
        }
        let dx = dist(x, &self.center_x);
        ((t - self.center_t).powi(2) + dx * dx).sqrt() < self.radius
    }

    /// Space-time distance from the center, relative to the radius.
    pub fn relative_offset(&self, t: f64, x: &[f64]) -> f64 {
        let dx = dist(x, &self.center_x);
        ((t - self.center_t).powi(2) + dx * dx).sqrt() / self.radius
    }

    pub fn check(&self, domain: &Domain) -> WindowCheck {
        let d = domain.boundary_distance(&self.center_x);
        let closure_in_q = self.t_bar > 0.0
            && self.t_bar < self.center_t
            && self.radius > 0.0
            && (!domain.is_bounded() || (domain.contains(&self.center_x) && self.radius < d));
        let coercive = self.k > self.radius
            && (self.l == 0.0
                || self.lambda_min * (self.k - self.radius).powi(2) / (self.l * (1.0 + self.k + self.radius))
                    >= 1.0);
        let boundary_clearance = !domain.is_bounded()
            || (d - self.radius).powi(2) / (self.center_t - self.t_bar + self.radius)
                > 4.0 * self.m / self.lambda_min;
        WindowCheck {
            closure_in_q,
            coercive,
            boundary_clearance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowOptions {
    pub m_samples: usize,
    pub m_safety: f64,
    pub seed: u64,
    pub bisection_steps: usize,
}

impl Default for WindowOptions {
    fn default() -> Self {
        Self {
            m_samples: 10_000,
            m_safety: 1.25,
            seed: 0,
            bisection_steps: 60,
        }
    }
}

/// Smallest K ≥ R′ with λ(K−R′)² = l(1+K+R′), plus 1e−6.
pub fn coercivity_radius(lambda_min: f64, l: f64, r_prime: f64) -> f64 {
    // With z = K − R′: λz² − lz − l(1 + 2R′) = 0.
    let z = (l + (l * l + 4.0 * lambda_min * l * (1.0 + 2.0 * r_prime)).sqrt()) / (2.0 * lambda_min);
    r_prime + z + 1e-6
}

/// Builds a window around (t′, x′).
///
/// R′ = ½ min(d(x′), t′); K from the coercivity equation; M bounds |u| on
/// B((t′,x′),K) from above by sampled `u ≤ u₀` and from below by sampled
/// `u ≥ inf φ`, inflated by `m_safety`. R and t̄ then shrink together along
/// `R = θR′`, `t̄ = t′ − θ(t′ − max(0, t′−½))/2` until the boundary clearance
/// holds, bisecting on θ.
pub fn make_slice_window(
    problem: &Problem,
    form: &SpdForm,
    t_prime: f64,
    x_prime: &[f64],
    opts: &WindowOptions,
) -> Result<SliceWindow> {
    check_dim(problem.dim(), x_prime.len())?;
    let fail = |reason: &str| Error::WindowConstruction {
        t: t_prime,
        x: x_prime.to_vec(),
        reason: reason.to_string(),
    };
    let domain = problem.domain();
    if !(t_prime > 0.0) || !domain.contains(x_prime) {
        return Err(fail("(t′, x′) is not in Q"));
    }
    let d = domain.boundary_distance(x_prime);
    let r_prime = 0.5 * d.min(t_prime);
    let lam = form.lambda_min();
    let l = problem.data().lipschitz_bound();
    let k = coercivity_radius(lam, l, r_prime);
    let m = opts.m_safety * sup_abs_bound(problem, t_prime, x_prime, k, opts);

    let t_lo = (t_prime - 0.5).max(0.0);
    let gap = t_prime - t_lo;
    let build = |theta: f64| SliceWindow {
        center_t: t_prime,
        center_x: x_prime.to_vec(),
        radius: theta * r_prime,
        t_bar: t_prime - 0.5 * theta * gap,
        k,
        m,
        l,
        lambda_min: lam,
    };
    let theta_max = 0.999;
    let w = build(theta_max);
    if w.check(domain).all() {
        return Ok(w);
    }
    let (mut lo, mut hi) = (0.0, theta_max);
    for _ in 0..opts.bisection_steps {
        let mid = 0.5 * (lo + hi);
        if build(mid).check(domain).all() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo > 0.0 && build(lo).check(domain).all() {
        Ok(build(lo))
    } else {
        Err(fail("no (R, t̄) satisfies the window invariants"))
    }
}

fn sup_abs_bound(problem: &Problem, t_prime: f64, x_prime: &[f64], k: f64, opts: &WindowOptions) -> f64 {
    let domain = problem.domain();
    let data = problem.data();
    let n = x_prime.len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let half = (opts.m_samples / 2).max(1);
    let mut upper = f64::NEG_INFINITY;
    let mut lower = f64::INFINITY;
    let mut y = vec![0.0; n];
    for _ in 0..half {
        // u(t,x) ≤ u₀(x) for x in the spatial shadow of B((t′,x′),K).
        let dir = crate::domain::unit_vector(n, &mut rng);
        let r = k * rng.gen::<f64>().powf(1.0 / n as f64);
        for i in 0..n {
            y[i] = x_prime[i] + r * dir[i];
        }
        domain.project_closure(&mut y);
        upper = upper.max(data.initial(&y));
    }
    match data.lower_bound() {
        Some(lb) if !domain.is_bounded() => lower = lb,
        _ => {
            for _ in 0..half {
                if domain.is_bounded() {
                    if rng.gen::<bool>() {
                        let z = domain.sample_interior(&mut rng).unwrap();
                        lower = lower.min(data.initial(&z));
                    } else {
                        let z = domain.sample_boundary(&mut rng).unwrap();
                        let s = rng.gen::<f64>() * (t_prime + k);
                        lower = lower.min(data.lateral(s, &z));
                    }
                } else {
                    let dir = crate::domain::unit_vector(n, &mut rng);
                    let r = 10.0 * k * rng.gen::<f64>();
                    for i in 0..n {
                        y[i] = x_prime[i] + r * dir[i];
                    }
                    lower = lower.min(data.initial(&y));
                }
            }
        }
    }
    upper.abs().max(lower.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coercivity_root_closed_form() {
        let k = coercivity_radius(1.0, 1.0, 1.0);
        assert!((k - ((3.0 + 13f64.sqrt()) / 2.0 + 1e-6)).abs() < 1e-12);
        // Bisection oracle on λ(K−R′)² − l(1+K+R′).
        let f = |k: f64| (k - 1.0) * (k - 1.0) - (1.0 + k + 1.0);
        let (mut lo, mut hi) = (1.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((k - 1e-6 - lo).abs() < 1e-10);
    }

    #[test]
    fn coercivity_radius_grows_with_lipschitz_constant() {
        let base = coercivity_radius(1.0, 1.0, 0.5);
        assert!(coercivity_radius(1.0, 4.0, 0.5) > base);
        assert!(coercivity_radius(0.5, 1.0, 0.5) > base);
    }
}
