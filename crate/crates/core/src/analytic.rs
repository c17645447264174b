//! Closed-form oracles.
//!
//! The ε-family on the line, `u₀(x) = (|x|−1)²/(2ε)` with `H(p) = p²/2`, has the
//! explicit solution `u_ε(t,x) = (|x|−1)²/(2(t+ε))`, singular exactly on
//! `(0,∞)×{0}`. Everything here is evaluated by formula and never through the
//! numerical Hopf path, so comparisons against it are independent checks.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{Affine, BoundaryData, GridData, QuadraticWells, TensorGrid};
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::problem::Problem;
use crate::quadform::SpdForm;
use crate::superdiff::Covector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsExample {
    epsilon: f64,
}

impl EpsExample {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidInput(format!("epsilon must be > 0, got {epsilon}")));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn solution(&self, t: f64, x: f64) -> f64 {
        eps_solution(self.epsilon, t, x)
    }

    pub fn min_energy(&self, s: f64) -> Covector {
        eps_min_energy(self.epsilon, s)
    }

    /// Minimizers y of `(x−y)²/(2t) + (|y|−1)²/(2ε)`.
    pub fn minimizers(&self, t: f64, x: f64) -> Vec<f64> {
        let e = self.epsilon;
        let right = (x * e + t) / (e + t);
        let left = (x * e - t) / (e + t);
        let cost = |y: f64| (x - y).powi(2) / (2.0 * t) + (y.abs() - 1.0).powi(2) / (2.0 * e);
        let mut cands = Vec::with_capacity(2);
        if left < 0.0 {
            cands.push(left);
        }
        if right >= 0.0 {
            cands.push(right);
        }
        let best = cands.iter().map(|y| cost(*y)).fold(f64::INFINITY, f64::min);
        cands.retain(|y| cost(*y) <= best + 1e-15);
        cands
    }

    /// Problem on the whole line with A = 1.
    pub fn problem(&self) -> Result<(Problem, SpdForm)> {
        let form = SpdForm::identity(1)?;
        let data = QuadraticWells::new(
            &form,
            vec![vec![-1.0], vec![1.0]],
            vec![0.0, 0.0],
            0.5 / self.epsilon,
            8.0,
            false,
        )?;
        let problem = Problem::new(Domain::whole_space(1)?, Arc::new(data), 10.0)?;
        Ok((problem, form))
    }
}

/// `(|x|−1)² / (2(t+ε))`.
pub fn eps_solution(eps: f64, t: f64, x: f64) -> f64 {
    (x.abs() - 1.0).powi(2) / (2.0 * (t + eps))
}

/// The energy-minimizing element of D⁺u_ε(s,0): `(−1/(2(s+ε)²), 0)`.
pub fn eps_min_energy(eps: f64, s: f64) -> Covector {
    let tau = -1.0 / (2.0 * (s + eps).powi(2));
    Covector {
        tau,
        p: vec![0.0],
        energy: tau,
    }
}

/// `u₀(y) = sharpness · min_w |y − w|²` with its exact evolution as lateral data.
pub fn two_well_data(form: &SpdForm, domain: &Domain, wells: Vec<Vec<f64>>, sharpness: f64) -> Result<QuadraticWells> {
    if wells.len() < 2 {
        return Err(Error::InvalidInput("two_well_data needs at least two wells".into()));
    }
    for (i, a) in wells.iter().enumerate() {
        if a.len() != form.dim() {
            return Err(Error::DimensionMismatch {
                expected: form.dim(),
                got: a.len(),
            });
        }
        if domain.is_bounded() && !domain.contains(a) {
            return Err(Error::InvalidInput(format!("well {a:?} lies outside Ω")));
        }
        if wells[..i].iter().any(|b| b == a) {
            return Err(Error::InvalidInput(format!("duplicate well {a:?}")));
        }
    }
    let extent = if domain.is_bounded() {
        domain.diameter()
    } else {
        // Region of interest: wells plus a margin of 4.
        2.0 * (wells
            .iter()
            .map(|w| w.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
            + 4.0)
    };
    let offsets = vec![0.0; wells.len()];
    QuadraticWells::new(form, wells, offsets, sharpness, extent, domain.is_bounded())
}

/// Named data sources referenced from run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "key", rename_all = "snake_case", deny_unknown_fields)]
pub enum NamedData {
    EpsExample {
        eps: f64,
    },
    TwoWell {
        wells: Vec<Vec<f64>>,
        sharpness: f64,
    },
    Affine {
        slope: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    Grid {
        initial: String,
        #[serde(default)]
        lateral: Option<String>,
    },
}

impl NamedData {
    pub const KEYS: [&'static str; 4] = ["eps_example", "two_well", "affine", "grid"];

    /// Grid paths are resolved against `base_dir`.
    pub fn build(&self, form: &SpdForm, domain: &Domain, base_dir: &std::path::Path) -> Result<Arc<dyn BoundaryData>> {
        Ok(match self {
            NamedData::EpsExample { eps } => {
                if form.dim() != 1 {
                    return Err(Error::InvalidInput("eps_example is one-dimensional".into()));
                }
                if !(*eps > 0.0) {
                    return Err(Error::InvalidInput(format!("eps must be > 0, got {eps}")));
                }
                Arc::new(QuadraticWells::new(
                    form,
                    vec![vec![-1.0], vec![1.0]],
                    vec![0.0, 0.0],
                    0.5 / eps,
                    if domain.is_bounded() { domain.diameter() } else { 8.0 },
                    domain.is_bounded(),
                )?)
            }
            NamedData::TwoWell { wells, sharpness } => {
                Arc::new(two_well_data(form, domain, wells.clone(), *sharpness)?)
            }
            NamedData::Affine { slope, offset } => {
                Arc::new(Affine::new(form, slope.clone(), *offset, domain.is_bounded())?)
            }
            NamedData::Grid { initial, lateral } => {
                let n = form.dim();
                let init = TensorGrid::read_csv(&base_dir.join(initial), n)?;
                let lat = lateral
                    .as_ref()
                    .map(|p| TensorGrid::read_csv(&base_dir.join(p), n + 1))
                    .transpose()?;
                Arc::new(GridData::new(init, lat)?)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eps_solution_examples() {
        let v = eps_solution(0.1, 1.0, 0.5);
        assert!((v - 0.25 / 2.2).abs() < 1e-15);
        assert!((v - 0.113_636_363_636_363_6).abs() < 1e-15);
        for t in [0.0, 0.3, 7.0] {
            assert_eq!(eps_solution(0.1, t, 1.0), 0.0);
            assert_eq!(eps_solution(0.1, t, -1.0), 0.0);
        }
        assert!((eps_solution(0.1, 0.0, 0.4) - 0.36 / 0.2).abs() < 1e-15);
    }

    #[test]
    fn eps_min_energy_examples() {
        let c = eps_min_energy(0.1, 0.9);
        assert!((c.tau + 0.5).abs() < 1e-15 && c.p == vec![0.0] && c.energy == c.tau);
        assert!(eps_min_energy(0.1, 1e9).energy > -1e-17);
        assert!(eps_min_energy(0.1, 1e9).energy < 0.0);
        let (t0, s, e) = (0.4, 2.3, 0.1);
        let ratio = eps_min_energy(e, s).energy / eps_min_energy(e, t0).energy;
        assert!((ratio - ((t0 + e) / (s + e)).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn closed_form_minimizers_at_the_kink() {
        let ex = EpsExample::new(0.1).unwrap();
        let m = ex.minimizers(0.9, 0.0);
        assert_eq!(m.len(), 2);
        assert!((m[0] + 0.9).abs() < 1e-15 && (m[1] - 0.9).abs() < 1e-15);
        // 10⁶-point grid oracle on y ↦ y²/(2t) + (|y|−1)²/(2ε).
        let (t, e) = (0.9, 0.1);
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=1_000_000 {
            let y = -2.0 + 4.0 * i as f64 / 1e6;
            let c = y * y / (2.0 * t) + (y.abs() - 1.0).powi(2) / (2.0 * e);
            if c < best.0 {
                best = (c, y);
            }
        }
        assert!((best.0 - 0.5).abs() < 1e-10);
        assert!((best.1.abs() - 0.9).abs() < 1e-5);
        assert_eq!(ex.minimizers(1.0, 0.5).len(), 1);
    }

    #[test]
    fn two_well_validation() {
        let f = SpdForm::identity(1).unwrap();
        let dom = Domain::new_box(vec![-2.0], vec![2.0]).unwrap();
        assert!(two_well_data(&f, &dom, vec![vec![-1.0], vec![3.0]], 1.0).is_err());
        assert!(two_well_data(&f, &dom, vec![vec![1.0]], 1.0).is_err());
        assert!(two_well_data(&f, &dom, vec![vec![1.0], vec![1.0]], 1.0).is_err());
        let ws = Domain::whole_space(1).unwrap();
        assert!(two_well_data(&f, &ws, vec![vec![-1.0], vec![3.0]], 1.0).is_ok());
    }

    #[test]
    fn two_well_reproduces_example_datum() {
        let f = SpdForm::identity(1).unwrap();
        let ws = Domain::whole_space(1).unwrap();
        let eps = 0.1;
        let d = two_well_data(&f, &ws, vec![vec![-1.0], vec![1.0]], 0.5 / eps).unwrap();
        for k in 0..=40 {
            let y = -2.0 + 0.1 * k as f64;
            assert!((d.initial(&[y]) - eps_solution(eps, 0.0, y)).abs() < 1e-12);
        }
    }

    #[test]
    fn named_data_parses_from_toml() {
        let d: NamedData = toml::from_str("key = \"two_well\"\nwells = [[-1.0], [1.0]]\nsharpness = 0.5\n").unwrap();
        assert!(matches!(d, NamedData::TwoWell { .. }));
        assert!(toml::from_str::<NamedData>("key = \"nope\"").is_err());
    }
}
