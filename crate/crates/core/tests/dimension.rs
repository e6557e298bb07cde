use limitdim::dimension::*;
use limitdim::hyperbolic::{hyp_distance, BoundaryPoint, UHPoint};
use limitdim::schottky::GeneratorFamily;
use limitdim::words::{mu, word_track, ReducedWord, DEFAULT_BUDGET};
use limitdim::{BigReal, Error, Precision};
use proptest::prelude::*;
use rug::ops::Pow;
use rug::Float;

const P: Precision = Precision::DEFAULT;

fn alpha_of(r: &DimensionReport) -> f64 {
    r.alpha_certified
        .as_ref()
        .unwrap()
        .to_big(P)
        .unwrap()
        .to_f64()
}

#[test]
fn certificate_k2() {
    let f = GeneratorFamily::new(2, 6).unwrap();
    let r = certify_hd_upper(4, &f, DEFAULT_BUDGET, 4).unwrap();
    assert!(r.pass, "{:?}", r.violation);
    assert_eq!(alpha_of(&r), 0.25);
    assert_eq!(r.covering.len(), 4);
}

#[test]
fn certificate_k5() {
    let f = GeneratorFamily::new(5, 25).unwrap();
    let r = certify_hd_upper(2, &f, DEFAULT_BUDGET, 4).unwrap();
    assert!(r.pass, "{:?}", r.violation);
    assert_eq!(alpha_of(&r), 0.1);
}

#[test]
fn certificate_refuses_k1() {
    let f = GeneratorFamily::new(1, 4).unwrap();
    assert!(matches!(
        certify_hd_upper(2, &f, DEFAULT_BUDGET, 1),
        Err(Error::Precondition(_))
    ));
}

fn dist_abs(a: &BigReal, b: &BigReal) -> BigReal {
    Float::with_val(a.prec(), a - b).abs()
}

#[test]
fn samples_lie_in_their_first_circle() {
    let f = GeneratorFamily::new(2, 5).unwrap();
    let pts = sample_limit_points(4, 300, &f, 9).unwrap();
    for s in &pts {
        let c = f.circle(s.word.letters()[0]);
        assert!(c.boundary_inside(&s.center), "{}", s.word);
    }
    // distinct words
    let mut words: Vec<_> = pts.iter().map(|s| s.word.clone()).collect();
    words.sort();
    words.dedup();
    assert_eq!(words.len(), 300);
}

#[test]
fn refinement_stays_within_parent_radius() {
    let f = GeneratorFamily::new(2, 5).unwrap();
    for s in sample_limit_points(4, 200, &f, 3).unwrap() {
        let parent = word_track(&s.word.prefix().unwrap(), &f).unwrap();
        let r = Float::with_val(P.bits(), &parent.width / 2u32);
        assert!(dist_abs(&s.center, &parent.center()) <= r);
    }
}

#[test]
fn depth3_radii_within_two_contractions() {
    let f = GeneratorFamily::new(2, 5).unwrap();
    for s in sample_limit_points(3, 200, &f, 4).unwrap() {
        let w = s.word.letters();
        let bound = Float::with_val(
            P.bits(),
            mu(w[1], w[0], &f).unwrap() * mu(w[2], w[1], &f).unwrap(),
        )
        .square()
            * &f.params(w[2]).r;
        let r = Float::with_val(P.bits(), &word_track(&s.word, &f).unwrap().width / 2u32);
        assert!(r <= bound, "{}", s.word);
    }
}

#[test]
fn depth_below_three_refused() {
    let f = GeneratorFamily::new(2, 5).unwrap();
    assert!(sample_limit_points(2, 10, &f, 1).is_err());
}

#[test]
fn box_count_single_point() {
    let pts = vec![P.float(0.3); 1000];
    let b = box_count_dimension(&pts, 5..=30).unwrap();
    assert_eq!(b.slope, 0.0);
}

#[test]
fn box_count_unit_grid() {
    let pts: Vec<BigReal> = (0..=10_000)
        .map(|i| P.float(f64::from(i) / 10_000.0))
        .collect();
    let b = box_count_dimension(&pts, 3..=13).unwrap();
    println!("grid slope {:.4} ± {:.4}", b.slope, b.stderr);
    assert!((b.slope - 1.0).abs() < 0.05);
}

// left endpoints of the depth-12 middle-thirds intervals, built exactly
fn cantor(depth: u32) -> Vec<BigReal> {
    let mut pts = vec![P.zero()];
    for level in 1..=depth {
        let step = Float::with_val(P.bits(), 2u32) / Float::with_val(P.bits(), 3u32).pow(level);
        let shifted: Vec<BigReal> = pts
            .iter()
            .map(|p| Float::with_val(P.bits(), p + &step))
            .collect();
        pts.extend(shifted);
    }
    pts
}

#[test]
fn box_count_cantor_set() {
    let pts = cantor(12);
    assert_eq!(pts.len(), 4096);
    let b = box_count_dimension(&pts, 2..=16).unwrap();
    let want = 2f64.ln() / 3f64.ln();
    println!("cantor slope {:.4} (ln2/ln3 = {want:.4})", b.slope);
    assert!((b.slope - want).abs() < 0.05);
}

#[test]
fn box_count_preconditions_and_saturation() {
    let few = vec![P.one(); 10];
    assert!(matches!(
        box_count_dimension(&few, 5..=30),
        Err(Error::Precondition(_))
    ));
    let pts: Vec<BigReal> = (0..1000).map(|i| P.float(f64::from(i))).collect();
    assert!(matches!(
        box_count_dimension(&pts, 0..=3),
        Err(Error::Precondition(_))
    ));
    assert!(matches!(
        box_count_dimension(&pts, 20..=30),
        Err(Error::DegenerateFit(_))
    ));
}

#[test]
fn box_count_limit_set_k2_and_k3() {
    let f2 = GeneratorFamily::new(2, 6).unwrap();
    let f3 = GeneratorFamily::new(3, 7).unwrap();
    let est = |f: &GeneratorFamily| {
        let c: Vec<BigReal> = sample_limit_points(5, 10_000, f, 1)
            .unwrap()
            .into_iter()
            .map(|s| s.center)
            .collect();
        box_count_dimension(&c, 5..=30).unwrap()
    };
    let (b2, b3) = (est(&f2), est(&f3));
    println!("box slopes k=2 {:.4} k=3 {:.4}", b2.slope, b3.slope);
    assert!(b2.slope <= 0.35 && b2.slope >= 0.0);
    assert!(b3.slope <= b2.slope);
}

#[test]
fn orbit_counts_and_generator_distances() {
    let f = GeneratorFamily::new(2, 5).unwrap();
    let r = orbit_count(&f, 3, 0.5, &[0.2, 0.5, 1.0], 100_000, 2).unwrap();
    for (rr, n) in r.r_grid.iter().zip(&r.counts) {
        if *rr < r.min_generator_distance {
            assert_eq!(*n, 1);
        }
    }
    let o = UHPoint::origin(f.precision());
    for j in f.alphabet() {
        let d = hyp_distance(&o, &f.generator(j).apply_point(&o));
        let lam = Float::with_val(f.precision().bits(), f.params(j).lambda.ln_ref());
        assert!(d >= lam);
        assert!(lam >= f.precision().ln2() * (2 * j * j + 2 * j.abs() + 6));
    }
    // P(s) grows with word length and shrinks as s grows
    let big = |row: &Vec<limitdim::BigNum>| -> Vec<BigReal> {
        row.iter().map(|v| v.to_big(P).unwrap()).collect()
    };
    let table: Vec<Vec<BigReal>> = r.poincare.iter().map(big).collect();
    for row in table.windows(2) {
        assert!(row[1].iter().zip(&row[0]).all(|(a, b)| a > b));
    }
    // the identity alone contributes 1 for every s
    assert!(table[0].iter().all(|v| *v == 1));
    for row in &table[1..] {
        assert!(row.windows(2).all(|p| p[1] < p[0]));
    }
}

#[test]
fn orbit_budget_guard() {
    let f = GeneratorFamily::new(2, 8).unwrap();
    assert!(matches!(
        orbit_count(&f, 6, 0.5, &[0.5], 100_000, 1),
        Err(Error::BudgetExceeded { .. })
    ));
}

#[test]
fn delta_hat_k2() {
    let budget = 100_000;
    let f = GeneratorFamily::new(2, 8).unwrap();
    let n = max_length_within(2, 8, budget);
    let r = orbit_count(&f, n, 0.5, &[0.25, 0.5], budget, 4).unwrap();
    println!(
        "delta_hat {:?} window {:?} full-range {:?} completeness radius {:.2}",
        r.delta_hat, r.fit_window, r.delta_full_range, r.completeness_radius
    );
    assert!(r.delta_hat.unwrap() <= 0.30);
    let mut csv = Vec::new();
    write_counts_csv(&r, &mut csv).unwrap();
    assert!(String::from_utf8(csv).unwrap().lines().nth(1) == Some("R,N"));
}

#[test]
fn orbit_report_independent_of_jobs() {
    let f = GeneratorFamily::new(2, 5).unwrap();
    let a = orbit_count(&f, 3, 0.5, &[0.5], 100_000, 1).unwrap();
    let b = orbit_count(&f, 3, 0.5, &[0.5], 100_000, 8).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}

#[test]
fn escape_toward_fixed_point_is_radial() {
    let f = GeneratorFamily::new(2, 4).unwrap();
    let xi = BoundaryPoint::Finite(f.params(2).x.clone());
    let e = escape_profile(&xi, 50.0, 1.0, &f, 10_000, 4).unwrap();
    assert!(!e.budget_limited);
    assert_eq!(e.classification, Some(EscapeClass::RadialLike));
    // returns close to the axis distance more than once
    let returns = e
        .samples
        .iter()
        .filter(|s| s.t > 10.0 && s.delta < 4.0)
        .count();
    assert!(returns >= 2);
}

#[test]
fn escape_through_fundamental_domain_is_linear() {
    let f = GeneratorFamily::new(2, 4).unwrap();
    let e = escape_profile(&BoundaryPoint::Finite(P.zero()), 40.0, 2.0, &f, 10_000, 4).unwrap();
    match e.classification {
        Some(EscapeClass::LinearEscapeLike { alpha_hat }) => assert!(alpha_hat >= 1.0 - 1e-9),
        other => panic!("{other:?}"),
    }
}

#[test]
fn escape_toward_word_circle_center_grows() {
    let f = GeneratorFamily::new(2, 4).unwrap();
    let w = ReducedWord::new(vec![2, 3, 2], 2).unwrap();
    let xi = BoundaryPoint::Finite(word_track(&w, &f).unwrap().center());
    let e = escape_profile(&xi, 120.0, 4.0, &f, 10_000, 4).unwrap();
    let half = e.samples.len() / 2;
    let early = e.samples[..half]
        .iter()
        .map(|s| s.delta)
        .fold(0.0, f64::max);
    let last = e.samples.last().unwrap().delta;
    println!(
        "early max {early:.2}, Δ(T) {last:.2}, budget-limited {}",
        e.budget_limited
    );
    assert!(last > early);
    // the ray ends in the image of the truncated generators' region
    assert!(e.budget_limited && e.classification.is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn escape_profile_is_one_lipschitz(x in -40.0f64..40.0) {
        let f = GeneratorFamily::new(2, 3).unwrap();
        let e = escape_profile(&BoundaryPoint::Finite(P.float(x)), 30.0, 0.5, &f, 2_000, 2).unwrap();
        for p in e.samples.windows(2) {
            prop_assert!((p[1].delta - p[0].delta).abs() <= p[1].t - p[0].t + 1e-9);
        }
    }
}
