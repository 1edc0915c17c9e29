use proptest::prelude::*;

use supmeas_core::geometry::{hausdorff_distance, project};
use supmeas_core::vector::{dist, dot, sub};
use supmeas_core::{ConvexBody, HalfSpace};

fn polygon() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 2), 4..9)
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, 2)
}

fn bodies(vertices: Vec<Vec<f64>>) -> Option<Vec<ConvexBody>> {
    let v = ConvexBody::vpolytope(vertices.clone()).ok()?;
    let ball = ConvexBody::ball(vec![0.2, -0.1], 0.8).ok()?;
    let cut = ConvexBody::ball_cut(
        vec![0.0, 0.0],
        1.0,
        vec![HalfSpace::new(vec![1.0, 0.0], 0.5).unwrap(), HalfSpace::normalized(&[-1.0, 1.0], 0.6).unwrap()],
    )
    .ok()?;
    let rounded = ConvexBody::vpolytope(vertices).ok()?.with_outer_radius(0.3).ok()?;
    Some(vec![v, ball, cut, rounded])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projection_is_a_nonexpansive_retraction(vs in polygon(), x in point(), y in point()) {
        let Some(bs) = bodies(vs) else { return Ok(()) };
        for k in &bs {
            let px = project(k, &x).unwrap();
            let py = project(k, &y).unwrap();
            // idempotent
            let again = project(k, &px.p).unwrap();
            prop_assert!(again.d < 1e-9);
            prop_assert!(dist(&again.p, &px.p) < 1e-9);
            // 1-Lipschitz
            prop_assert!(dist(&px.p, &py.p) <= dist(&x, &y) + 1e-9);
            prop_assert!((px.d - dist(&x, &px.p)).abs() < 1e-9);
        }
    }

    #[test]
    fn foot_and_direction_form_a_normal_pair(vs in polygon(), x in point()) {
        let Some(bs) = bodies(vs) else { return Ok(()) };
        for k in &bs {
            let r = project(k, &x).unwrap();
            let Some(u) = r.u else { continue };
            // u is an outer normal at p: h_K(u) = <p, u>
            let h = k.support_function(&u).unwrap();
            prop_assert!((h - dot(&r.p, &u)).abs() < 1e-7, "h={h} <p,u>={}", dot(&r.p, &u));
            prop_assert!((supmeas_core::vector::norm(&u) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_commutes_with_translation(vs in polygon(), x in point(), t in point()) {
        let Some(bs) = bodies(vs) else { return Ok(()) };
        for k in &bs {
            let kt = k.translated(&t).unwrap();
            let xt: Vec<f64> = x.iter().zip(&t).map(|(a, b)| a + b).collect();
            let a = project(k, &x).unwrap();
            let b = project(&kt, &xt).unwrap();
            prop_assert!(dist(&sub(&b.p, &t), &a.p) < 1e-8);
            prop_assert!((a.d - b.d).abs() < 1e-8);
        }
    }

    #[test]
    fn translates_are_at_the_shift_distance(vs in polygon(), t in prop::collection::vec(-0.5..0.5f64, 2)) {
        let Ok(k) = ConvexBody::vpolytope(vs) else { return Ok(()) };
        let d = hausdorff_distance(&k, &k.translated(&t).unwrap()).unwrap();
        let len = supmeas_core::vector::norm(&t);
        prop_assert!(d >= len - 1e-9 && d <= len + 1e-3 * (1.0 + len));
    }
}
