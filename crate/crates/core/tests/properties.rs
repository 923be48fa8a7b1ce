use choquard::manifold::{
    fiber_value, nehari_level, nehari_scale, nodal_project, stationarity_residuals, FiberPoint,
};
use choquard::ChoquardBrackets;
use proptest::prelude::*;

fn brackets() -> impl Strategy<Value = ChoquardBrackets> {
    (
        0.1..20.0f64,
        0.1..20.0f64,
        1e-3..10.0f64,
        1e-3..10.0f64,
        0.0..0.9f64,
    )
        .prop_map(|(qp, qm, dpp, dmm, rho)| ChoquardBrackets {
            q_plus: qp,
            q_minus: qm,
            q_cross: 0.0,
            d_pp: dpp,
            d_mm: dmm,
            d_pm: rho * (dpp * dmm).sqrt(),
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn nehari_scale_balances_both_terms(p in 1.2..4.5f64, q in 1e-3..1e3f64, d in 1e-3..1e3f64) {
        let t = nehari_scale(p, q, d).unwrap();
        let (qt, dt) = (t * t * q, t.powf(2.0 * p) * d);
        prop_assert!((qt - dt).abs() <= 1e-12 * qt);
        let level = 0.5 * qt - dt / (2.0 * p);
        prop_assert!((level - nehari_level(p, q, d)).abs() <= 1e-12 * level.abs());
    }

    #[test]
    fn nodal_projection_is_the_fiber_maximum(p in 2.1..4.0f64, b in brackets()) {
        let proj = nodal_project(p, &b).unwrap();
        let (sp, sm) = proj.point.scalings(p);
        let (rp, rm) = stationarity_residuals(p, &b, sp, sm);
        prop_assert!(rp.abs() <= 1e-10 && rm.abs() <= 1e-10, "residuals {rp:e} {rm:e}");
        let top = fiber_value(p, &b, proj.point);
        for (fp, fm) in [(1.01, 1.0), (0.99, 1.0), (1.0, 1.01), (1.0, 0.99), (1.01, 0.99)] {
            let near = FiberPoint::new(proj.point.t_plus * fp, proj.point.t_minus * fm).unwrap();
            prop_assert!(fiber_value(p, &b, near) <= top + 1e-13 * top.abs());
        }
    }
}
