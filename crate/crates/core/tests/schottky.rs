use limitdim::hyperbolic::*;
use limitdim::num::approx_eq;
use limitdim::schottky::*;
use limitdim::Precision;
use proptest::prelude::*;
use rug::Float;

const P: Precision = Precision::DEFAULT;

#[test]
fn pairing_j1_residuals_and_orientation() {
    let r = pairing_check(1, P).unwrap();
    assert!(r.pass && r.orientation_ok);
    assert!(r.residual.to_big(P).unwrap() <= P.pow2(-240));
}

// The endpoint identities read literally (images x_j ± r_j) are off by
// r_j^2 / (x_j + x'_j); kept as a record of that discrepancy.
#[test]
#[ignore]
fn pairing_literal_endpoints() {
    for j in 1..=12 {
        let r = pairing_check(j, P).unwrap();
        assert!(
            r.literal_residual.to_big(P).unwrap() <= P.pow2(-240),
            "j = {j}"
        );
    }
}

#[test]
fn pairing_sweep_to_twelve() {
    for j in 1..=12 {
        assert!(pairing_check(j, P).unwrap().pass, "j = {j}");
    }
}

#[test]
fn translation_length_is_log_lambda() {
    let f = GeneratorFamily::new(1, 5).unwrap();
    for j in 1..=5 {
        let p = f.params(j);
        let m = conjugator(j, f.precision()).unwrap();
        // points of the axis are m_j(i e^s)
        let mut best: Option<Float> = None;
        for s in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            let w = m.apply_point(&UHPoint::new(P.zero(), P.float(s).exp()).unwrap());
            let d = hyp_distance(&w, &f.generator(j).apply_point(&w));
            best = Some(match best {
                Some(b) if b < d => b,
                _ => d,
            });
        }
        let lam = Float::with_val(f.precision().bits(), p.lambda.ln_ref());
        assert!(approx_eq(&best.unwrap(), &lam, &f.precision().tolerance()));
        let lower = f.precision().ln2() * (2 * j * j + 2 * j + 6);
        assert!(lam >= lower);
    }
}

#[test]
fn axis_is_invariant() {
    let f = GeneratorFamily::new(1, 4).unwrap();
    for j in f.alphabet() {
        let x = f.params(j).x.clone();
        let h = f.generator(j);
        for e in [x.clone(), -x] {
            let b = BoundaryPoint::Finite(e);
            assert!(h
                .apply_boundary(&b)
                .approx_eq(&b, &f.precision().tolerance()));
        }
    }
}

#[test]
fn orbit_point_of_i_leaves_domain() {
    let f = GeneratorFamily::new(1, 6).unwrap();
    let i = UHPoint::origin(P);
    assert!(f.in_fundamental_domain(&i).unwrap());
    for j in f.alphabet() {
        assert!(!f
            .in_fundamental_domain(&f.generator(j).apply_point(&i))
            .unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // h_j sends the closed exterior of C_{-j} into the closed disk of C_j
    #[test]
    fn ping_pong(j in prop_oneof![Just(2), Just(3), Just(4), Just(-2), Just(-3), Just(-4)],
                 x in -40.0f64..40.0, y in 0.01f64..40.0) {
        let f = GeneratorFamily::new(2, 4).unwrap();
        let z = UHPoint::from_f64(P, x, y).unwrap();
        let outside = !f.circle(-j).strictly_inside(&z);
        prop_assume!(outside);
        let img = f.generator(j).apply_point(&z);
        let c = f.circle(j);
        let (p, q) = c.bounds().unwrap();
        let cx = c.center().unwrap();
        let r = c.radius().unwrap();
        let dx = Float::with_val(512, img.x() - &cx);
        let d2 = dx.square() + Float::with_val(512, img.y().square_ref());
        let slack = Float::with_val(512, r.square_ref()) * (1.0 + 1e-30);
        prop_assert!(d2 <= slack, "image outside C_{} ({} .. {})", j, p, q);
    }

    #[test]
    fn disjoint_base_circles(k in 1i32..4, span in 0i32..6) {
        let f = GeneratorFamily::new(k, k + span).unwrap();
        prop_assert!(f.circles_disjoint());
    }
}
