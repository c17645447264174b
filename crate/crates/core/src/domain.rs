//! Spatial domains Ω: axis-aligned boxes, balls and the whole space.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    WholeSpace { n: usize },
}

impl Domain {
    pub fn new_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(Error::InvalidInput("box needs at least one axis".into()));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(u - l > 0.0) || !l.is_finite() || !u.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "box axis {i} has non-positive length [{l}, {u}]"
                )));
            }
        }
        Ok(Domain::Box { lower, upper })
    }

    pub fn new_ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::InvalidInput("ball center is empty".into()));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidInput(format!("ball radius must be > 0, got {radius}")));
        }
        Ok(Domain::Ball { center, radius })
    }

    pub fn whole_space(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        Ok(Domain::WholeSpace { n })
    }

    /// Re-checks the constructor invariants, for domains that came through serde.
    pub fn validate(&self) -> Result<()> {
        match self {
            Domain::Box { lower, upper } => Self::new_box(lower.clone(), upper.clone()).map(|_| ()),
            Domain::Ball { center, radius } => Self::new_ball(center.clone(), *radius).map(|_| ()),
            Domain::WholeSpace { n } => Self::whole_space(*n).map(|_| ()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { lower, .. } => lower.len(),
            Domain::Ball { center, .. } => center.len(),
            Domain::WholeSpace { n } => *n,
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, Domain::WholeSpace { .. })
    }

    /// Open-set membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v > *l && *v < *u),
            Domain::Ball { center, radius } => dist(x, center) < *radius,
            Domain::WholeSpace { .. } => true,
        }
    }

    /// Euclidean distance from `x` to ∂Ω (inside or outside). Infinite for the whole space.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        match self {
            Domain::Box { lower, upper } => {
                if self.contains_closed(x) {
                    x.iter()
                        .zip(lower.iter().zip(upper))
                        .map(|(v, (l, u))| (v - l).min(u - v))
                        .fold(f64::INFINITY, f64::min)
                } else {
                    x.iter()
                        .zip(lower.iter().zip(upper))
                        .map(|(v, (l, u))| {
                            let e = (l - v).max(v - u).max(0.0);
                            e * e
                        })
                        .sum::<f64>()
                        .sqrt()
                }
            }
            Domain::Ball { center, radius } => (dist(x, center) - radius).abs(),
            Domain::WholeSpace { .. } => f64::INFINITY,
        }
    }

    pub fn contains_closed(&self, x: &[f64]) -> bool {
        match self {
            Domain::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= *l && *v <= *u),
            Domain::Ball { center, radius } => dist(x, center) <= *radius,
            Domain::WholeSpace { .. } => true,
        }
    }

    /// Nearest point of Ω̄.
    pub fn project_closure(&self, x: &mut [f64]) {
        match self {
            Domain::Box { lower, upper } => {
                for ((v, l), u) in x.iter_mut().zip(lower).zip(upper) {
                    *v = v.clamp(*l, *u);
                }
            }
            Domain::Ball { center, radius } => {
                let d = dist(x, center);
                if d > *radius {
                    for (v, c) in x.iter_mut().zip(center) {
                        *v = c + (*v - c) * radius / d;
                    }
                }
            }
            Domain::WholeSpace { .. } => {}
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| (u - l) * (u - l))
                .sum::<f64>()
                .sqrt(),
            Domain::Ball { radius, .. } => 2.0 * radius,
            Domain::WholeSpace { .. } => f64::INFINITY,
        }
    }

    /// Axis-aligned bounding box of Ω̄, if bounded.
    pub fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            Domain::Box { lower, upper } => Some((lower.clone(), upper.clone())),
            Domain::Ball { center, radius } => Some((
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            )),
            Domain::WholeSpace { .. } => None,
        }
    }

    /// Uniform draw on ∂Ω: per-face for boxes (faces weighted by area), uniform on spheres.
    pub fn sample_boundary<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Vec<f64>> {
        match self {
            Domain::Box { lower, upper } => {
                let n = lower.len();
                let widths: Vec<f64> = lower.iter().zip(upper).map(|(l, u)| u - l).collect();
                // Face normal to axis k has area ∏_{j≠k} w_j; two such faces.
                let areas: Vec<f64> = (0..n)
                    .map(|k| {
                        (0..n)
                            .filter(|&j| j != k)
                            .map(|j| widths[j])
                            .product::<f64>()
                    })
                    .collect();
                let total: f64 = areas.iter().sum();
                let mut pick = rng.gen::<f64>() * total;
                let mut axis = n - 1;
                for (k, a) in areas.iter().enumerate() {
                    if pick < *a {
                        axis = k;
                        break;
                    }
                    pick -= a;
                }
                let mut x: Vec<f64> = lower
                    .iter()
                    .zip(&widths)
                    .map(|(l, w)| l + w * rng.gen::<f64>())
                    .collect();
                x[axis] = if rng.gen::<bool>() { upper[axis] } else { lower[axis] };
                Some(x)
            }
            Domain::Ball { center, radius } => {
                let dir = unit_vector(center.len(), rng);
                Some(center.iter().zip(&dir).map(|(c, d)| c + radius * d).collect())
            }
            Domain::WholeSpace { .. } => None,
        }
    }

    /// Uniform draw in Ω̄ (bounded domains only).
    pub fn sample_interior<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Vec<f64>> {
        match self {
            Domain::Box { lower, upper } => Some(
                lower
                    .iter()
                    .zip(upper)
                    .map(|(l, u)| l + (u - l) * rng.gen::<f64>())
                    .collect(),
            ),
            Domain::Ball { center, radius } => {
                let n = center.len();
                let dir = unit_vector(n, rng);
                let r = radius * rng.gen::<f64>().powf(1.0 / n as f64);
                Some(center.iter().zip(&dir).map(|(c, d)| c + r * d).collect())
            }
            Domain::WholeSpace { .. } => None,
        }
    }
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn unit_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    use rand::distributions::Distribution;
    let normal = rand::distributions::Uniform::new(-1.0f64, 1.0);
    // Rejection sampling from the cube keeps us off rand_distr.
    loop {
        let v: Vec<f64> = (0..n).map(|_| normal.sample(rng)).collect();
        let r2: f64 = v.iter().map(|x| x * x).sum();
        if r2 > 1e-8 && r2 <= 1.0 {
            let r = r2.sqrt();
            return v.into_iter().map(|x| x / r).collect();
        }
        if n == 1 {
            return vec![if v[0] >= 0.0 { 1.0 } else { -1.0 }];
        }
    }
}
