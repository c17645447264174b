use std::sync::Arc;

use hj_core::data::QuadraticWells;
use hj_core::domain::Domain;
use hj_core::hopf::{hopf_value, HopfOptions};
use hj_core::superdiff::{superdiff_from_value, SuperDiffOptions};
use hj_core::{Problem, SpdForm};
use proptest::prelude::*;

fn form2(a: f64, b: f64, c: f64) -> SpdForm {
    // Diagonally dominant, hence SPD.
    SpdForm::new(2, &[a + b.abs(), b, b, c + b.abs()]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hopf_matches_closed_form_wells(
        a in 0.5f64..2.0, b in -0.4f64..0.4, c in 0.5f64..2.0,
        w in proptest::collection::vec(-1.5f64..1.5, 6),
        offsets in proptest::collection::vec(0.0f64..0.3, 3),
        sharpness in 0.5f64..2.0,
        t in 0.2f64..2.0,
        x in proptest::collection::vec(-1.8f64..1.8, 2),
        bounded in any::<bool>(),
    ) {
        let f = form2(a, b, c);
        let dom = if bounded {
            Domain::new_box(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap()
        } else {
            Domain::whole_space(2).unwrap()
        };
        let centers = vec![w[0..2].to_vec(), w[2..4].to_vec(), w[4..6].to_vec()];
        let data = QuadraticWells::new(&f, centers, offsets, sharpness, 8.0, bounded).unwrap();
        let p = Problem::new(dom, Arc::new(data.clone()), 10.0).unwrap();
        let h = hopf_value(&p, &f, t, &x, &HopfOptions::default()).unwrap();
        prop_assert!((h.value - data.solution(t, &x)).abs() < 1e-8);
        // u ≤ u₀ along the trivial path y = x.
        prop_assert!(h.value <= p.boundary_value(0.0, &x) + 1e-12);

        let sd = superdiff_from_value(&f, t, &x, h, &SuperDiffOptions::default()).unwrap();
        for v in &sd.vertices {
            prop_assert!(v.energy.abs() < 1e-9);
        }
        prop_assert!(sd.min_energy <= 1e-12);
        prop_assert_eq!(sd.singular, sd.min_energy < -1e-6);
    }

    #[test]
    fn solution_is_semiconcave_in_space(
        a in 0.5f64..2.0, b in -0.4f64..0.4, c in 0.5f64..2.0,
        t in 0.3f64..2.0,
        x in proptest::collection::vec(-1.5f64..1.5, 2),
        dir in proptest::collection::vec(-1.0f64..1.0, 2),
    ) {
        let f = form2(a, b, c);
        let data = QuadraticWells::new(&f, vec![vec![-1.0, 0.0], vec![1.0, 0.3]], vec![0.0, 0.1], 1.0, 8.0, false).unwrap();
        let p = Problem::new(Domain::whole_space(2).unwrap(), Arc::new(data), 10.0).unwrap();
        let h = 0.05;
        let norm = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt().max(1e-3);
        let d = [h * dir[0] / norm, h * dir[1] / norm];
        let o = HopfOptions::default();
        let u = |y: [f64; 2]| hopf_value(&p, &f, t, &y, &o).unwrap().value;
        let mid = u([x[0], x[1]]);
        let second = u([x[0] + d[0], x[1] + d[1]]) - 2.0 * mid + u([x[0] - d[0], x[1] - d[1]]);
        // u(t,·) − |·|²Λ/(2t) is concave, Λ = λ_max(A⁻¹) = 1/λ_min(A).
        prop_assert!(second <= h * h / (f.lambda_min() * t) + 1e-9);
    }
}
