//! The space-time cylinder Q = (0,∞)×Ω with its boundary data, and the
//! sampled compatibility check that licenses the Hopf representation.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::BoundaryData;
use crate::domain::Domain;
use crate::error::{check_dim, Error, Result};
use crate::quadform::SpdForm;

/// Absolute slack on the compatibility inequality.
pub const COMPATIBILITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Problem {
    domain: Domain,
    data: Arc<dyn BoundaryData>,
    horizon: f64,
}

impl Problem {
    /// `horizon` bounds the lateral times sampled by the compatibility check.
    pub fn new(domain: Domain, data: Arc<dyn BoundaryData>, horizon: f64) -> Result<Self> {
        domain.validate()?;
        check_dim(domain.dim(), data.dim())?;
        if domain.is_bounded() && !data.has_lateral() {
            return Err(Error::InvalidInput(
                "bounded domains need lateral boundary data".into(),
            ));
        }
        if !(horizon > 0.0) {
            return Err(Error::InvalidInput(format!("horizon must be > 0, got {horizon}")));
        }
        Ok(Self {
            domain,
            data,
            horizon,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn data(&self) -> &dyn BoundaryData {
        self.data.as_ref()
    }

    pub fn data_arc(&self) -> Arc<dyn BoundaryData> {
        Arc::clone(&self.data)
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// φ at a point of ∂Q: the initial datum at s = 0, otherwise the lateral one.
    pub fn boundary_value(&self, s: f64, y: &[f64]) -> f64 {
        if s <= 0.0 || !self.data.has_lateral() {
            self.data.initial(y)
        } else {
            self.data.lateral(s, y)
        }
    }

    /// Samples the data invariants: initial and lateral data agree on {0}×∂Ω and
    /// difference quotients respect the declared Lipschitz bound.
    pub fn validate_data(&self, samples: usize, seed: u64) -> DataReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut max_corner_gap: f64 = 0.0;
        let mut max_quotient: f64 = 0.0;
        let l = self.data.lipschitz_bound();
        for _ in 0..samples {
            if let Some(x) = self.domain.sample_boundary(&mut rng) {
                let gap = (self.data.initial(&x) - self.data.lateral(0.0, &x)).abs();
                max_corner_gap = max_corner_gap.max(gap);
                let y = self.domain.sample_boundary(&mut rng).unwrap();
                let (t, s) = (rng.gen::<f64>() * self.horizon, rng.gen::<f64>() * self.horizon);
                let d = ((t - s).powi(2) + crate::domain::dist(&x, &y).powi(2)).sqrt();
                if d > 1e-9 {
                    let q = (self.data.lateral(t, &x) - self.data.lateral(s, &y)).abs() / d;
                    max_quotient = max_quotient.max(q);
                }
            }
            if let (Some(x), Some(y)) = (
                self.domain.sample_interior(&mut rng),
                self.domain.sample_interior(&mut rng),
            ) {
                let d = crate::domain::dist(&x, &y);
                if d > 1e-9 {
                    let q = (self.data.initial(&x) - self.data.initial(&y)).abs() / d;
                    max_quotient = max_quotient.max(q);
                }
            }
        }
        DataReport {
            max_corner_gap,
            max_quotient,
            lipschitz_bound: l,
            ok: max_corner_gap <= 1e-10 && max_quotient <= l * (1.0 + 1e-6),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DataReport {
    pub max_corner_gap: f64,
    pub max_quotient: f64,
    pub lipschitz_bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub t: f64,
    pub x: Vec<f64>,
    pub s: f64,
    pub y: Vec<f64>,
    pub excess: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompatibilityReport {
    pub samples: usize,
    pub violations: Vec<Violation>,
    /// Largest `φ(t,x) − φ(s,y) − (t−s)L((x−y)/(t−s))` over the sample.
    pub max_excess: f64,
    /// No lateral boundary: the condition has nothing to check.
    pub vacuous: bool,
}

impl CompatibilityReport {
    pub fn compatible(&self) -> bool {
        self.vacuous || self.violations.is_empty()
    }
}

/// Samples pairs `(t,x), (s,y) ∈ ∂Q` with `t > s ≥ 0` and reports every pair with
/// `φ(t,x) − φ(s,y) > (t−s)L((x−y)/(t−s)) + 1e−9`.
///
/// The later point is always lateral (t > 0 forces x ∈ ∂Ω). The earlier point is
/// drawn from the initial slice, from the lateral boundary, or as the same
/// boundary point at an earlier time, in equal proportions.
pub fn check_compatibility(
    problem: &Problem,
    form: &SpdForm,
    sample_count: usize,
    rng_seed: u64,
) -> Result<CompatibilityReport> {
    if sample_count == 0 {
        return Err(Error::InvalidInput("sample_count must be ≥ 1".into()));
    }
    check_dim(problem.dim(), form.dim())?;
    if !problem.domain.is_bounded() {
        return Ok(CompatibilityReport {
            samples: 0,
            violations: Vec::new(),
            max_excess: f64::NEG_INFINITY,
            vacuous: true,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let dom = &problem.domain;
    let n = dom.dim();
    let mut violations = Vec::new();
    let mut max_excess = f64::NEG_INFINITY;
    let mut q = vec![0.0; n];
    for _ in 0..sample_count {
        let t = problem.horizon * (1.0 - rng.gen::<f64>()); // (0, T]
        let x = dom.sample_boundary(&mut rng).expect("bounded");
        let (s, y) = match rng.gen_range(0..3) {
            0 => (0.0, dom.sample_interior(&mut rng).expect("bounded")),
            1 => (t * rng.gen::<f64>(), dom.sample_boundary(&mut rng).expect("bounded")),
            _ => (t * rng.gen::<f64>(), x.clone()),
        };
        let dt = t - s;
        if !(dt > 0.0) {
            continue;
        }
        for i in 0..n {
            q[i] = (x[i] - y[i]) / dt;
        }
        let cost = dt * form.l(&q);
        let excess = problem.boundary_value(t, &x) - problem.boundary_value(s, &y) - cost;
        max_excess = max_excess.max(excess);
        if excess > COMPATIBILITY_SLACK {
            violations.push(Violation { t, x, s, y, excess });
        }
    }
    Ok(CompatibilityReport {
        samples: sample_count,
        violations,
        max_excess,
        vacuous: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Affine, QuadraticWells};

    #[derive(Debug)]
    struct Ramp(f64);

    impl BoundaryData for Ramp {
        fn dim(&self) -> usize {
            1
        }
        fn initial(&self, _y: &[f64]) -> f64 {
            0.0
        }
        fn has_lateral(&self) -> bool {
            true
        }
        fn lateral(&self, t: f64, _x: &[f64]) -> f64 {
            self.0 * t
        }
        fn lipschitz_bound(&self) -> f64 {
            self.0
        }
    }

    fn box1() -> Domain {
        Domain::new_box(vec![-1.0], vec![1.0]).unwrap()
    }

    #[test]
    fn zero_data_is_compatible() {
        let f = SpdForm::identity(2).unwrap();
        let dom = Domain::new_box(vec![-1.0, 0.0], vec![1.0, 3.0]).unwrap();
        let p = Problem::new(dom, Arc::new(Affine::constant(2, 0.0, true)), 2.0).unwrap();
        let r = check_compatibility(&p, &f, 1000, 1).unwrap();
        assert!(r.violations.is_empty());
        assert!(r.max_excess <= 0.0);
        assert!(r.compatible());
    }

    #[test]
    fn increasing_lateral_data_violates_at_fixed_points() {
        // φ(t,x) − φ(s,x) = c(t−s) > 0 = (t−s)L(0)
        let f = SpdForm::identity(1).unwrap();
        let p = Problem::new(box1(), Arc::new(Ramp(0.5)), 2.0).unwrap();
        let r = check_compatibility(&p, &f, 300, 2).unwrap();
        assert!(!r.violations.is_empty());
        assert!(r.max_excess > 0.0);
        assert!(r.violations.iter().any(|v| v.x == v.y));
    }

    #[test]
    fn whole_space_is_vacuous() {
        let f = SpdForm::identity(1).unwrap();
        let w = QuadraticWells::new(&f, vec![vec![-1.0], vec![1.0]], vec![0.0; 2], 5.0, 8.0, false)
            .unwrap();
        let p = Problem::new(Domain::whole_space(1).unwrap(), Arc::new(w), 2.0).unwrap();
        let r = check_compatibility(&p, &f, 10, 0).unwrap();
        assert!(r.vacuous && r.compatible());
    }

    #[test]
    fn restricted_whole_space_solutions_are_compatible() {
        let f = SpdForm::new(2, &[1.5, 0.3, 0.3, 0.8]).unwrap();
        let dom = Domain::new_box(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
        let centers = vec![vec![-1.0, 0.2], vec![0.7, 0.5], vec![0.1, -1.2]];
        let w = QuadraticWells::new(&f, centers, vec![0.0, 0.3, -0.1], 1.3, dom.diameter(), true)
            .unwrap();
        let p = Problem::new(dom, Arc::new(w), 3.0).unwrap();
        let r = check_compatibility(&p, &f, 5000, 9).unwrap();
        assert!(r.violations.is_empty(), "{:?}", r.violations.first());
        assert!(p.validate_data(500, 4).ok);
    }

    #[test]
    fn rejects_bad_arguments() {
        let f = SpdForm::identity(1).unwrap();
        let p = Problem::new(box1(), Arc::new(Ramp(0.0)), 1.0).unwrap();
        assert!(check_compatibility(&p, &f, 0, 0).is_err());
        let f2 = SpdForm::identity(2).unwrap();
        assert!(check_compatibility(&p, &f2, 5, 0).is_err());
        assert!(Problem::new(box1(), Arc::new(Affine::constant(1, 0.0, false)), 1.0).is_err());
    }
}
