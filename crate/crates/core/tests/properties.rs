use approx::assert_relative_eq;
use proptest::prelude::*;

use twophase::nalgebra::{DMatrix, DVector};
use twophase::piecewise_linear::{jump_condition_check, lift_from_g0, transmission_data, PiecewiseLinearSolution};
use twophase::tensor::{Phase, Tensor4};
use twophase::twoscale::Mollifier;

/// Symmetric, strongly elliptic `2m x 2m` block built as `I + B Bᵀ / 4`.
fn spd_tensor(m: usize, entries: &[f64]) -> Tensor4 {
    let n = 2 * m;
    let b = DMatrix::from_row_slice(n, n, &entries[..n * n]);
    let a = DMatrix::identity(n, n) + &b * b.transpose() * 0.25;
    Tensor4::from_block(m, a.as_slice().to_vec()).unwrap()
}

fn tensor_and_vector(m: usize) -> impl Strategy<Value = (Tensor4, Vec<f64>)> {
    (
        prop::collection::vec(-1.0..1.0f64, 4 * m * m),
        prop::collection::vec(-5.0..5.0f64, m),
    )
        .prop_map(move |(e, g)| (spd_tensor(m, &e), g))
}

proptest! {
    #[test]
    fn lift_reaches_every_transmission_value((a_plus, g0) in (1usize..=3).prop_flat_map(tensor_and_vector)) {
        let m = a_plus.m();
        let a_minus = Tensor4::isotropic(m, 1.0);
        let ell = lift_from_g0(&DVector::from_vec(g0.clone()), &a_plus).unwrap();
        let t = transmission_data(&ell, &a_plus, &a_minus);
        for a in 0..m {
            assert_relative_eq!(t[a], g0[a], epsilon = 1e-10, max_relative = 1e-10);
        }
        prop_assert!(ell.continuity_defect(16) < 1e-12);
    }

    #[test]
    fn transmission_data_is_linear(
        p in prop::collection::vec(-3.0..3.0f64, 4),
        q in prop::collection::vec(-3.0..3.0f64, 4),
        s in -2.0..2.0f64,
    ) {
        let a_plus = Tensor4::isotropic(1, 3.0);
        let a_minus = Tensor4::scalar([[2.0, 0.5], [0.5, 1.0]]);
        let l1 = PiecewiseLinearSolution::from_params(1, &p).unwrap();
        let l2 = PiecewiseLinearSolution::from_params(1, &q).unwrap();
        let combined = transmission_data(&l1.add(&l2.scale(s)), &a_plus, &a_minus)[0];
        let separate = transmission_data(&l1, &a_plus, &a_minus)[0] + s * transmission_data(&l2, &a_plus, &a_minus)[0];
        assert_relative_eq!(combined, separate, epsilon = 1e-12, max_relative = 1e-12);
    }

    #[test]
    fn slopes_of_piecewise_linear_solutions_jump_across_the_normal(
        p in prop::collection::vec(-3.0..3.0f64, 8),
    ) {
        let ell = PiecewiseLinearSolution::from_params(2, &p).unwrap();
        let q = jump_condition_check(&ell.m_plus(), &ell.slope(Phase::Minus), 1e-12);
        prop_assert!(q.is_some());
    }

    #[test]
    fn smoothing_preserves_affine_functions(
        c in -5.0..5.0f64,
        g in prop::array::uniform2(-5.0..5.0f64),
        x in prop::array::uniform2(-1.0..1.0f64),
        t in 0.001..0.5f64,
    ) {
        let s = Mollifier::default();
        let mut out = [0.0];
        s.smooth_at(x, t, 1, |y, o| o[0] = c + g[0] * y[0] + g[1] * y[1], &mut out);
        assert_relative_eq!(out[0], c + g[0] * x[0] + g[1] * x[1], epsilon = 1e-11, max_relative = 1e-11);
    }

    #[test]
    fn rayleigh_bounds_bracket_the_block((a, _) in tensor_and_vector(2)) {
        let (lo, hi) = a.rayleigh_bounds();
        prop_assert!(lo >= 1.0 - 1e-12);
        prop_assert!(hi >= lo);
        prop_assert!(a.is_symmetric(1e-12));
    }
}
