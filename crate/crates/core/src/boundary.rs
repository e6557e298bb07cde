//! Gromov products, the visual metric on `∂H²` seen from `o = i`, shadows
//! of balls, and randomized checks of the comparison lemmas used in the
//! dimension argument.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rug::Float;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{precondition, Error, Result};
use crate::hyperbolic::{
    angle_gap, boundary_angle, boundary_from_angle, direction_angle, dist_to_ray,
    geodesic_ray_point, hyp_distance, BoundaryPoint, UHPoint,
};
use crate::num::{BigNum, BigReal, Precision};

/// `⟨w1, w2⟩_z = (d(w1, z) + d(z, w2) - d(w1, w2)) / 2`.
pub fn gromov_product(z: &UHPoint, w1: &UHPoint, w2: &UHPoint) -> BigReal {
    let a = hyp_distance(w1, z);
    let b = hyp_distance(z, w2);
    let c = hyp_distance(w1, w2);
    (a + b - c) / 2u32
}

/// Ray parameters start here and grow by [`LIMIT_STEP`].
const LIMIT_START: f64 = 10.0;
const LIMIT_STEP: f64 = 10.0;
const LIMIT_CAP: f64 = 200.0;
const LIMIT_AGREEMENT_LOG2: i64 = -40;

/// Boundary Gromov product: the products of the points at distance `t` on
/// the rays `[z, ξ1)`, `[z, ξ2)`, evaluated at `t` and `t + 10` until two
/// successive values agree within `2^-40` (`t` capped at 200).
pub fn gromov_product_boundary(
    z: &UHPoint,
    xi1: &BoundaryPoint,
    xi2: &BoundaryPoint,
) -> Result<BigReal> {
    if xi1 == xi2 {
        return Err(precondition(
            "boundary Gromov product needs distinct points",
        ));
    }
    let prec = Precision::new(z.x().prec().max(z.y().prec()))?;
    let tol = prec.pow2(LIMIT_AGREEMENT_LOG2);
    let at = |t: f64| -> Result<BigReal> {
        let t = prec.float(t);
        let p1 = geodesic_ray_point(z, xi1, &t)?;
        let p2 = geodesic_ray_point(z, xi2, &t)?;
        Ok(gromov_product(z, &p1, &p2))
    };
    let mut t = LIMIT_START;
    let mut prev = at(t)?;
    let mut iterations = 0;
    loop {
        t += LIMIT_STEP;
        iterations += 1;
        let next = at(t)?;
        let gap = Float::with_val(prec.bits(), &next - &prev).abs();
        if gap <= tol {
            return Ok(next);
        }
        if t >= LIMIT_CAP {
            return Err(Error::NonConvergence {
                iterations,
                last_gap: gap.to_f64(),
            });
        }
        prev = next;
    }
}

/// `ρ_o(ξ1, ξ2) = exp(-⟨ξ1, ξ2⟩_o)`, zero on the diagonal.
pub fn visual_distance(xi1: &BoundaryPoint, xi2: &BoundaryPoint) -> Result<BigReal> {
    let bits = match (xi1, xi2) {
        (BoundaryPoint::Finite(a), _) => a.prec(),
        (_, BoundaryPoint::Finite(b)) => b.prec(),
        _ => Precision::DEFAULT.bits(),
    };
    let prec = Precision::new(bits)?;
    if xi1 == xi2 {
        return Ok(prec.zero());
    }
    let g = gromov_product_boundary(&UHPoint::origin(prec), xi1, xi2)?;
    Ok((-g).exp())
}

/// Shadow `O_o(z, R)`: boundary points whose ray from `o` meets `B(z, R)`.
/// Stored as an arc of boundary angles (see [`boundary_angle`]) centred on
/// the direction of `z`.
#[derive(Clone, Debug)]
pub struct ShadowInterval {
    pub lo: BoundaryPoint,
    pub hi: BoundaryPoint,
    /// The arc contains `∞`.
    pub wraps: bool,
    /// The whole boundary (`o` lies in the ball).
    pub full: bool,
    center: BigReal,
    half_width: BigReal,
}

impl ShadowInterval {
    pub fn center_angle(&self) -> &BigReal {
        &self.center
    }

    pub fn half_width(&self) -> &BigReal {
        &self.half_width
    }

    pub fn contains(&self, xi: &BoundaryPoint) -> bool {
        if self.full {
            return true;
        }
        let prec = Precision::new(self.center.prec()).expect("valid precision");
        let a = boundary_angle(xi, prec);
        angle_gap(&a, &self.center, prec) <= self.half_width
    }

    /// `self ⊆ other` as arcs.
    pub fn is_subset_of(&self, other: &ShadowInterval) -> bool {
        if other.full {
            return true;
        }
        if self.full {
            return false;
        }
        let prec = Precision::new(self.center.prec()).expect("valid precision");
        let gap = angle_gap(&self.center, &other.center, prec);
        gap + &self.half_width <= other.half_width
    }
}

fn in_shadow(z: &UHPoint, o: &UHPoint, angle: &BigReal, r: &BigReal) -> Result<bool> {
    Ok(dist_to_ray(z, o, &boundary_from_angle(angle))? <= *r)
}

/// Bisection depth relative to the bracket found by halving.
const SHADOW_BISECTIONS: u32 = 60;

pub fn shadow_interval(z: &UHPoint, r: &BigReal) -> Result<ShadowInterval> {
    if !(*r > 0) {
        return Err(precondition("shadow radius must be positive"));
    }
    let prec = Precision::new(z.x().prec().max(z.y().prec()))?;
    let bits = prec.bits();
    let o = UHPoint::origin(prec);
    if hyp_distance(&o, z) <= *r {
        return Ok(ShadowInterval {
            lo: BoundaryPoint::Infinity,
            hi: BoundaryPoint::Infinity,
            wraps: true,
            full: true,
            center: prec.zero(),
            half_width: prec.pi(),
        });
    }
    let center = direction_angle(z, prec);
    let offset = |psi: &BigReal, sign: i32| Float::with_val(bits, psi * sign) + &center;
    let member = |psi: &BigReal| -> Result<bool> {
        Ok(in_shadow(z, &o, &offset(psi, 1), r)? && in_shadow(z, &o, &offset(psi, -1), r)?)
    };
    // halve from π until inside, then bisect the bracket [inside, 2·inside]
    let mut outside = prec.pi();
    let mut inside = Float::with_val(bits, &outside / 2u32);
    while !member(&inside)? {
        outside = inside.clone();
        inside /= 2u32;
        if inside.is_zero() || inside < prec.exhaustion_floor() {
            return Err(Error::PrecisionExhausted {
                context: "shadow narrower than the working precision".into(),
            });
        }
    }
    for _ in 0..SHADOW_BISECTIONS {
        let mid = Float::with_val(bits, &inside + &outside) / 2u32;
        if member(&mid)? {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    let half_width = inside;
    let lo_a = offset(&half_width, -1);
    let hi_a = offset(&half_width, 1);
    let wraps = angle_gap(&center, &prec.zero(), prec) <= half_width;
    Ok(ShadowInterval {
        lo: boundary_from_angle(&lo_a),
        hi: boundary_from_angle(&hi_a),
        wraps,
        full: false,
        center,
        half_width,
    })
}

/// Outcome of a randomized lemma check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LemmaSampleReport {
    pub lemma: String,
    pub samples: u64,
    pub failures: u64,
    /// Smallest slack over all samples (negative on failure).
    pub worst_margin: BigNum,
    pub params: serde_json::Value,
    pub seed: u64,
}

impl LemmaSampleReport {
    pub fn pass(&self) -> bool {
        self.failures == 0
    }
}

fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Reduces per-sample margins; `None` means the sample was skipped.
fn summarize(
    lemma: &str,
    seed: u64,
    params: serde_json::Value,
    margins: Vec<Result<BigReal>>,
    prec: Precision,
) -> Result<LemmaSampleReport> {
    let mut failures = 0;
    let mut worst: Option<BigReal> = None;
    let samples = margins.len() as u64;
    for m in margins {
        let m = m?;
        if m < 0 {
            failures += 1;
        }
        if worst.as_ref().is_none_or(|w| m < *w) {
            worst = Some(m);
        }
    }
    Ok(LemmaSampleReport {
        lemma: lemma.to_string(),
        samples,
        failures,
        worst_margin: BigNum::new(&worst.unwrap_or_else(|| prec.zero())),
        params,
        seed,
    })
}

/// Default constant of the Kaimanovich sandwich.
pub const KAIMANOVICH_C: f64 = 10.0;

/// Checks `𝔅(ξ, e^-t/c) ⊂ O_o(ξ_t, 1) ⊂ 𝔅(ξ, c e^-t)` for one pair; the
/// margin is the log-slack of the tighter inclusion.
pub fn kaimanovich_margin(xi: &BoundaryPoint, t: &BigReal, c: &BigReal) -> Result<BigReal> {
    let prec = Precision::new(t.prec())?;
    let bits = prec.bits();
    let o = UHPoint::origin(prec);
    let xt = geodesic_ray_point(&o, xi, t)?;
    let shadow = shadow_interval(&xt, &prec.one())?;
    let et = Float::with_val(bits, t.exp_ref());
    if shadow.full {
        // only the outer inclusion is informative
        return Ok((Float::with_val(bits, c / &et) / 2u32).ln());
    }
    let r_lo = visual_distance(xi, &shadow.lo)?;
    let r_hi = visual_distance(xi, &shadow.hi)?;
    let (near, far) = if r_lo <= r_hi {
        (r_lo, r_hi)
    } else {
        (r_hi, r_lo)
    };
    let inner = (near * c * &et).ln();
    let outer = (Float::with_val(bits, c / &et) / far).ln();
    Ok(if inner < outer { inner } else { outer })
}

pub fn check_kaimanovich(
    t_range: (f64, f64),
    samples: u64,
    c: f64,
    seed: u64,
) -> Result<LemmaSampleReport> {
    if c < 1.0 {
        return Err(precondition("the sandwich constant must be >= 1"));
    }
    let (t0, t1) = t_range;
    if !(1.0..=40.0).contains(&t0) || !(t0..=40.0).contains(&t1) {
        return Err(precondition("t range must lie in [1, 40]"));
    }
    let prec = Precision::DEFAULT;
    let cb = prec.float(c);
    let margins: Vec<Result<BigReal>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            let phi = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            let t = rng.gen_range(t0..=t1);
            let xi = boundary_from_angle(&prec.float(phi));
            kaimanovich_margin(&xi, &prec.float(t), &cb)
        })
        .collect();
    summarize(
        "kaimanovich",
        seed,
        json!({"c": c, "t_min": t0, "t_max": t1}),
        margins,
        prec,
    )
}

/// Point at hyperbolic distance `s` from `z` in a uniformly random direction.
fn random_point_at(z: &UHPoint, s: f64, rng: &mut ChaCha8Rng, prec: Precision) -> Result<UHPoint> {
    let phi = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    crate::hyperbolic::point_at(z, &prec.float(phi), &prec.float(s))
}

/// `z` with log-uniform `d(o, z) ∈ [scale, 4 scale]`, `w` uniform in
/// `B(z, β d(o, z))`.
fn sample_pair(
    beta: f64,
    min_scale: f64,
    rng: &mut ChaCha8Rng,
    prec: Precision,
) -> Result<(UHPoint, UHPoint, f64)> {
    let o = UHPoint::origin(prec);
    let dz = (rng.gen_range(min_scale.ln()..=(4.0 * min_scale).ln())).exp();
    let z = random_point_at(&o, dz, rng, prec)?;
    let rho = beta * dz;
    // area of a hyperbolic disk is proportional to cosh(s) - 1
    let u: f64 = rng.gen_range(0.0..1.0);
    let s = if rho == 0.0 {
        0.0
    } else {
        (1.0 + u * (rho.cosh() - 1.0)).acosh()
    };
    let w = random_point_at(&z, s, rng, prec)?;
    Ok((z, w, dz))
}

/// `d(o,w)/(1+β) ≤ d(o,z) ≤ d(o,w)/(1-β)` whenever `d(z,w) ≤ β d(o,z)`.
pub fn check_lemma_main1(
    samples: u64,
    beta: f64,
    min_scale: f64,
    seed: u64,
) -> Result<LemmaSampleReport> {
    if !(0.0..1.0).contains(&beta) {
        return Err(precondition("β must lie in [0, 1)"));
    }
    if !(min_scale > 0.0) {
        return Err(precondition("min_scale must be positive"));
    }
    let prec = Precision::DEFAULT;
    let o = UHPoint::origin(prec);
    let margins: Vec<Result<BigReal>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            let (z, w, _) = sample_pair(beta, min_scale, &mut rng, prec)?;
            let doz = hyp_distance(&o, &z);
            let dow = hyp_distance(&o, &w);
            let lower = Float::with_val(
                prec.bits(),
                &doz - Float::with_val(prec.bits(), &dow / (1.0 + beta)),
            );
            let upper = Float::with_val(prec.bits(), &dow / (1.0 - beta)) - &doz;
            Ok(if lower < upper { lower } else { upper })
        })
        .collect();
    summarize(
        "distance_comparison",
        seed,
        json!({"beta": beta, "min_scale": min_scale}),
        margins,
        prec,
    )
}

/// Step of the march along `[o, w⁺)` before bisection.
const MARCH_STEP: f64 = 0.5;
const MARCH_BISECTIONS: u32 = 50;

/// Largest `s` with `d(p_s, [o, z⁺)) ≤ 1`, `p_s` the point at distance `s`
/// on `[o, w⁺)`, searched up to `s_max`.
pub fn farthest_close_point(
    z_dir: &BoundaryPoint,
    w_dir: &BoundaryPoint,
    s_max: f64,
    prec: Precision,
) -> Result<BigReal> {
    let o = UHPoint::origin(prec);
    let one = prec.one();
    let close = |s: f64| -> Result<bool> {
        let p = geodesic_ray_point(&o, w_dir, &prec.float(s))?;
        Ok(dist_to_ray(&p, &o, z_dir)? <= one)
    };
    let mut inside = 0.0;
    let mut outside = None;
    let mut s = MARCH_STEP;
    while s <= s_max {
        if close(s)? {
            inside = s;
        } else {
            outside = Some(s);
            break;
        }
        s += MARCH_STEP;
    }
    let Some(mut hi) = outside else {
        return Ok(prec.float(s_max));
    };
    let mut lo = inside;
    for _ in 0..MARCH_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if close(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(prec.float(lo))
}

/// Smallest `min_scale` at which the second comparison lemma is asserted.
pub const LEMMA_MAIN2_MIN_SCALE: f64 = 10.0;

/// Existence of `p ∈ [o, w⁺)` with `d(p, [o, z⁺)) ≤ 1` and
/// `d(o, p) ≥ (1 - 2β - β²)/(1 - β²) d(o, w)`.
pub fn check_lemma_main2(
    samples: u64,
    beta: f64,
    min_scale: f64,
    seed: u64,
) -> Result<LemmaSampleReport> {
    if !(beta > 0.0 && beta < 0.2) {
        return Err(precondition("β must lie in (0, 1/5)"));
    }
    if min_scale < LEMMA_MAIN2_MIN_SCALE {
        return Err(precondition(format!(
            "min_scale must be at least {LEMMA_MAIN2_MIN_SCALE}"
        )));
    }
    let prec = Precision::DEFAULT;
    let o = UHPoint::origin(prec);
    let kappa = (1.0 - 2.0 * beta - beta * beta) / (1.0 - beta * beta);
    let margins: Vec<Result<BigReal>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            let (z, w, _) = sample_pair(beta, min_scale, &mut rng, prec)?;
            let dow = hyp_distance(&o, &w);
            let z_dir = boundary_from_angle(&direction_angle(&z, prec));
            let w_dir = boundary_from_angle(&direction_angle(&w, prec));
            let need = Float::with_val(prec.bits(), &dow * kappa);
            // searching past d(o, w) is never needed for the conclusion
            let s_max = dow.to_f64() + 1.0;
            let s_star = farthest_close_point(&z_dir, &w_dir, s_max, prec)?;
            Ok(s_star - need)
        })
        .collect();
    summarize(
        "ray_comparison",
        seed,
        json!({"beta": beta, "min_scale": min_scale, "kappa": kappa}),
        margins,
        prec,
    )
}

/// Largest observed `ρ(ξ1, ξ3) / max(ρ(ξ1, ξ2), ρ(ξ2, ξ3))` over random
/// triples.
pub fn quasi_ultrametric_constant(samples: u64, seed: u64) -> Result<f64> {
    let prec = Precision::DEFAULT;
    let ratios: Vec<Result<f64>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            let mut pick = || boundary_from_angle(&prec.float(rng.gen_range(-3.0..3.0)));
            let (a, b, c) = (pick(), pick(), pick());
            let ac = visual_distance(&a, &c)?;
            let ab = visual_distance(&a, &b)?;
            let bc = visual_distance(&b, &c)?;
            let m = if ab > bc { ab } else { bc };
            Ok((ac / m).to_f64())
        })
        .collect();
    ratios
        .into_iter()
        .try_fold(0.0f64, |acc, r| Ok(acc.max(r?)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::approx_eq;

    const P: Precision = Precision::DEFAULT;

    fn bp(x: f64) -> BoundaryPoint {
        BoundaryPoint::Finite(P.float(x))
    }

    #[test]
    fn trivial_products() {
        let i = UHPoint::origin(P);
        let w = UHPoint::from_f64(P, 1.0, 3.0).unwrap();
        assert!(approx_eq(
            &gromov_product(&i, &w, &w),
            &hyp_distance(&i, &w),
            &P.tolerance()
        ));
        let a = UHPoint::from_f64(P, 0.0, 0.5).unwrap();
        let b = UHPoint::from_f64(P, 0.0, 4.0).unwrap();
        assert!(approx_eq(
            &gromov_product(&i, &a, &b),
            &P.zero(),
            &P.tolerance()
        ));
    }

    #[test]
    fn boundary_products_on_geodesics() {
        let i = UHPoint::origin(P);
        let g = gromov_product_boundary(&i, &bp(-1.0), &bp(1.0)).unwrap();
        assert!(g.to_f64().abs() < 1e-12);
        let g = gromov_product_boundary(&i, &bp(0.0), &BoundaryPoint::Infinity).unwrap();
        assert!(g.to_f64().abs() < 1e-12);
        assert!(gromov_product_boundary(&i, &bp(1.0), &bp(1.0)).is_err());
    }

    #[test]
    fn visual_distance_basics() {
        assert!(visual_distance(&bp(2.0), &bp(2.0)).unwrap().is_zero());
        let d = visual_distance(&bp(-1.0), &bp(1.0)).unwrap();
        assert!((d.to_f64() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_shadow_when_origin_in_ball() {
        let z = UHPoint::from_f64(P, 0.0, 1.5).unwrap();
        let s = shadow_interval(&z, &P.one()).unwrap();
        assert!(s.full && s.contains(&bp(-7.0)));
    }

    #[test]
    fn margin_signs() {
        let m =
            kaimanovich_margin(&BoundaryPoint::Infinity, &P.float(5.0), &P.float(10.0)).unwrap();
        assert!(m > 0);
        // c = 1 is too small for the outer inclusion
        let m = kaimanovich_margin(&BoundaryPoint::Infinity, &P.float(5.0), &P.float(1.0)).unwrap();
        assert!(m < 0);
    }

    #[test]
    fn parameter_validation() {
        assert!(check_kaimanovich((0.5, 3.0), 1, 10.0, 0).is_err());
        assert!(check_kaimanovich((1.0, 3.0), 1, 0.5, 0).is_err());
        assert!(check_lemma_main1(1, 1.0, 1.0, 0).is_err());
        assert!(check_lemma_main2(1, 0.25, 10.0, 0).is_err());
        assert!(check_lemma_main2(1, 0.1, 5.0, 0).is_err());
    }
}
