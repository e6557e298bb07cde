//! Möbius algebra on the upper half-plane and the elementary hyperbolic
//! geometry (distances, geodesic rays, circle images) used by every other
//! module.
//!
//! Maps are stored with real coefficients normalized to `ad - bc = 1` and
//! the sign convention `c > 0`, or `c = 0` and `a > 0`. Half-circles are
//! stored by their two endpoints on the extended real line.

use std::cmp::Ordering;

use rug::Float;

use crate::error::{precondition, Error, Result};
use crate::num::{approx_eq, approx_eq_scaled, BigReal, Precision};

/// A point of the closed boundary `R ∪ {∞}`.
#[derive(Clone, Debug, PartialEq)]
pub enum BoundaryPoint {
    Finite(BigReal),
    Infinity,
}

impl BoundaryPoint {
    pub fn finite(&self) -> Option<&BigReal> {
        match self {
            BoundaryPoint::Finite(x) => Some(x),
            BoundaryPoint::Infinity => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, BoundaryPoint::Infinity)
    }

    pub fn approx_eq(&self, other: &BoundaryPoint, tol: &BigReal) -> bool {
        match (self, other) {
            (BoundaryPoint::Infinity, BoundaryPoint::Infinity) => true,
            (BoundaryPoint::Finite(a), BoundaryPoint::Finite(b)) => approx_eq_scaled(a, b, tol),
            _ => false,
        }
    }
}

impl From<BigReal> for BoundaryPoint {
    fn from(x: BigReal) -> Self {
        if x.is_infinite() {
            BoundaryPoint::Infinity
        } else {
            BoundaryPoint::Finite(x)
        }
    }
}

/// Interior point `x + iy`, `y > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct UHPoint {
    x: BigReal,
    y: BigReal,
}

impl UHPoint {
    pub fn new(x: BigReal, y: BigReal) -> Result<Self> {
        if !(y > 0) || !x.is_finite() || !y.is_finite() {
            return Err(precondition(format!("not an interior point: ({x}, {y})")));
        }
        Ok(UHPoint { x, y })
    }

    /// The base point `o = i`.
    pub fn origin(prec: Precision) -> Self {
        UHPoint {
            x: prec.zero(),
            y: prec.one(),
        }
    }

    pub fn from_f64(prec: Precision, x: f64, y: f64) -> Result<Self> {
        Self::new(prec.float(x), prec.float(y))
    }

    pub fn x(&self) -> &BigReal {
        &self.x
    }

    pub fn y(&self) -> &BigReal {
        &self.y
    }

    fn prec(&self) -> u32 {
        self.x.prec().max(self.y.prec())
    }

    pub fn approx_eq(&self, other: &UHPoint, tol: &BigReal) -> bool {
        approx_eq_scaled(&self.x, &other.x, tol) && approx_eq_scaled(&self.y, &other.y, tol)
    }
}

/// Trace classification of an orientation-preserving isometry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IsometryKind {
    Identity,
    Hyperbolic,
    Parabolic,
    Elliptic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Classification {
    pub kind: IsometryKind,
    /// `|trace|` lies within `2^(-bits/2)` of 2 without being exactly 2.
    pub near_degenerate: bool,
}

/// Fixed point set of a non-identity isometry.
#[derive(Clone, Debug, PartialEq)]
pub enum FixedPoints {
    /// Two distinct boundary points for hyperbolic maps (ascending order,
    /// `∞` last), one for parabolic maps.
    Boundary(Vec<BoundaryPoint>),
    /// The single interior fixed point of an elliptic map.
    Interior(UHPoint),
}

/// `z ↦ (az + b)/(cz + d)` with `ad - bc = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct MoebiusMap {
    a: BigReal,
    b: BigReal,
    c: BigReal,
    d: BigReal,
}

impl MoebiusMap {
    /// Normalizes arbitrary real coefficients with positive determinant.
    pub fn new(a: BigReal, b: BigReal, c: BigReal, d: BigReal) -> Result<Self> {
        let prec = a.prec().max(b.prec()).max(c.prec()).max(d.prec());
        let ad = Float::with_val(prec, &a * &d);
        let bc = Float::with_val(prec, &b * &c);
        let det = Float::with_val(prec, &ad - &bc);
        if !(det > 0) {
            return Err(precondition(
                "Möbius coefficients must have positive determinant",
            ));
        }
        let scale = larger_abs(&ad, &bc);
        let floor = Precision::new(prec)?.exhaustion_floor();
        if det < Float::with_val(prec, &floor * &scale) {
            return Err(Error::PrecisionExhausted {
                context: "Möbius normalization".into(),
            });
        }
        let s = det.sqrt();
        let map = MoebiusMap {
            a: a / &s,
            b: b / &s,
            c: c / &s,
            d: d / &s,
        };
        Ok(map.with_sign_convention())
    }

    /// Coefficients already known to satisfy `ad - bc = 1` analytically;
    /// only the sign convention is applied.
    pub fn from_unimodular(a: BigReal, b: BigReal, c: BigReal, d: BigReal) -> Self {
        MoebiusMap { a, b, c, d }.with_sign_convention()
    }

    pub fn identity(prec: Precision) -> Self {
        MoebiusMap {
            a: prec.one(),
            b: prec.zero(),
            c: prec.zero(),
            d: prec.one(),
        }
    }

    /// `z ↦ λ z` for `λ > 0`.
    pub fn dilation(lambda: &BigReal) -> Result<Self> {
        if !(*lambda > 0) {
            return Err(precondition("dilation factor must be positive"));
        }
        let prec = lambda.prec();
        let s = Float::with_val(prec, lambda.sqrt_ref());
        Ok(MoebiusMap {
            b: Float::new(prec),
            c: Float::new(prec),
            d: Float::with_val(prec, 1) / &s,
            a: s,
        })
    }

    /// `z ↦ z + t`.
    pub fn translation(t: &BigReal) -> Self {
        let prec = t.prec();
        MoebiusMap {
            a: Float::with_val(prec, 1),
            b: t.clone(),
            c: Float::new(prec),
            d: Float::with_val(prec, 1),
        }
    }

    pub fn a(&self) -> &BigReal {
        &self.a
    }
    pub fn b(&self) -> &BigReal {
        &self.b
    }
    pub fn c(&self) -> &BigReal {
        &self.c
    }
    pub fn d(&self) -> &BigReal {
        &self.d
    }

    pub fn prec(&self) -> u32 {
        self.a.prec()
    }

    fn precision(&self) -> Precision {
        Precision::new(self.prec()).expect("maps are built at >= 64 bits")
    }

    fn norm(&self) -> BigReal {
        let mut m = larger_abs(&self.a, &self.b);
        m = larger_abs(&m, &self.c);
        larger_abs(&m, &self.d)
    }

    fn with_sign_convention(mut self) -> Self {
        let prec = self.prec();
        let tol = Precision::new(prec).expect("valid precision").tolerance();
        let c_zero = self.c.is_zero()
            || Float::with_val(prec, self.c.abs_ref())
                <= Float::with_val(prec, &tol * &self.norm());
        let flip = if c_zero {
            self.a.is_sign_negative()
        } else {
            self.c.is_sign_negative()
        };
        if flip {
            self.a = -self.a;
            self.b = -self.b;
            self.c = -self.c;
            self.d = -self.d;
        }
        self
    }

    pub fn inverse(&self) -> Self {
        MoebiusMap {
            a: self.d.clone(),
            b: Float::with_val(self.prec(), -&self.b),
            c: Float::with_val(self.prec(), -&self.c),
            d: self.a.clone(),
        }
        .with_sign_convention()
    }

    /// `self ∘ other`. The product of two unimodular matrices is unimodular,
    /// so only the sign convention is reapplied; the call fails when the
    /// determinant can no longer be resolved at the session precision.
    pub fn compose(&self, other: &MoebiusMap) -> Result<Self> {
        let prec = self.prec().max(other.prec());
        let mul = |x: &BigReal, y: &BigReal, u: &BigReal, v: &BigReal| {
            let mut s = Float::with_val(prec, x * y);
            s += Float::with_val(prec, u * v);
            s
        };
        let a = mul(&self.a, &other.a, &self.b, &other.c);
        let b = mul(&self.a, &other.b, &self.b, &other.d);
        let c = mul(&self.c, &other.a, &self.d, &other.c);
        let d = mul(&self.c, &other.b, &self.d, &other.d);
        let ad = Float::with_val(prec, &a * &d);
        let bc = Float::with_val(prec, &b * &c);
        let scale = larger_abs(&ad, &bc);
        let floor = Precision::new(prec)?.exhaustion_floor();
        if Float::with_val(prec, &scale * &floor) > 1 {
            return Err(Error::PrecisionExhausted {
                context: "Möbius composition".into(),
            });
        }
        Ok(MoebiusMap { a, b, c, d }.with_sign_convention())
    }

    /// Coefficient-wise equality relative to the larger coefficient norm.
    pub fn approx_eq(&self, other: &MoebiusMap, tol: &BigReal) -> bool {
        let prec = self.prec().max(other.prec());
        let mut scale = larger_abs(&self.norm(), &other.norm());
        if scale < 1 {
            scale = Float::with_val(prec, 1);
        }
        let t = Float::with_val(prec, tol * &scale);
        approx_eq(&self.a, &other.a, &t)
            && approx_eq(&self.b, &other.b, &t)
            && approx_eq(&self.c, &other.c, &t)
            && approx_eq(&self.d, &other.d, &t)
    }

    pub fn determinant(&self) -> BigReal {
        let prec = self.prec();
        Float::with_val(prec, &self.a * &self.d) - Float::with_val(prec, &self.b * &self.c)
    }

    pub fn trace(&self) -> BigReal {
        Float::with_val(self.prec(), &self.a + &self.d)
    }

    /// `cz + d` may cancel only when `|cz|` is comparable to `|d|`; there the
    /// form `a/c - 1/(c(cz + d))` is used, elsewhere the plain quotient
    /// (which also covers `c ≈ 0` after long cancelling compositions).
    fn pole_form(&self, x: &BigReal, y: &BigReal) -> bool {
        if self.c.is_zero() {
            return false;
        }
        let mag = Float::with_val(32, x.abs_ref()) + Float::with_val(32, y.abs_ref());
        let cz = Float::with_val(32, self.c.abs_ref()) * mag * 2u32;
        cz >= Float::with_val(32, self.d.abs_ref())
    }

    /// Image of an interior point; the imaginary part is `Im z / |cz+d|^2`.
    pub fn apply_point(&self, z: &UHPoint) -> UHPoint {
        let prec = self.prec().max(z.prec());
        // w = cz + d
        let wr = Float::with_val(prec, &self.c * &z.x) + &self.d;
        let wi = Float::with_val(prec, &self.c * &z.y);
        let m2 = Float::with_val(prec, wr.square_ref()) + Float::with_val(prec, wi.square_ref());
        let y = Float::with_val(prec, &z.y / &m2);
        let x = if !self.pole_form(&z.x, &z.y) {
            // Re((az + b) conj(cz + d)) / |cz + d|^2
            let num = Float::with_val(prec, &self.a * &z.x) + &self.b;
            let ay = Float::with_val(prec, &self.a * &z.y);
            (num * &wr + ay * &wi) / &m2
        } else {
            // Re(1/(c w)) = wr / (c |w|^2)
            let corr = Float::with_val(prec, &wr / &m2) / &self.c;
            Float::with_val(prec, &self.a / &self.c) - corr
        };
        UHPoint { x, y }
    }

    /// Image of a boundary point; the pole `cx + d = 0` maps to `∞`.
    pub fn apply_boundary(&self, p: &BoundaryPoint) -> BoundaryPoint {
        let prec = self.prec();
        match p {
            BoundaryPoint::Infinity => {
                if self.c.is_zero() {
                    BoundaryPoint::Infinity
                } else {
                    BoundaryPoint::Finite(Float::with_val(prec, &self.a / &self.c))
                }
            }
            BoundaryPoint::Finite(x) => {
                let den = Float::with_val(prec, &self.c * x) + &self.d;
                if den.is_zero() {
                    return BoundaryPoint::Infinity;
                }
                if !self.pole_form(x, &Float::new(prec)) {
                    let num = Float::with_val(prec, &self.a * x) + &self.b;
                    BoundaryPoint::Finite(num / den)
                } else {
                    let corr = Float::with_val(prec, &self.c * &den);
                    let v = Float::with_val(prec, &self.a / &self.c) - corr.recip();
                    BoundaryPoint::Finite(v)
                }
            }
        }
    }

    /// `1 / (cx + d)^2`, the derivative at a finite boundary point.
    pub fn derivative_at(&self, x: &BigReal) -> BigReal {
        let prec = self.prec();
        let den = Float::with_val(prec, &self.c * x) + &self.d;
        den.square().recip()
    }

    pub fn classify(&self) -> Classification {
        let prec = self.precision();
        let tr = Float::with_val(prec.bits(), self.trace().abs_ref());
        let tol = prec.pow2(-(i64::from(prec.bits()) / 2));
        let two = prec.int(2);
        let gap = Float::with_val(prec.bits(), &tr - &two);
        let near = Float::with_val(prec.bits(), gap.abs_ref()) <= tol;
        let map_tol = prec.tolerance();
        if near {
            if self.approx_eq(&MoebiusMap::identity(prec), &map_tol) {
                return Classification {
                    kind: IsometryKind::Identity,
                    near_degenerate: !gap.is_zero(),
                };
            }
            return Classification {
                kind: IsometryKind::Parabolic,
                near_degenerate: !gap.is_zero(),
            };
        }
        let kind = if gap > 0 {
            IsometryKind::Hyperbolic
        } else {
            IsometryKind::Elliptic
        };
        Classification {
            kind,
            near_degenerate: false,
        }
    }

    pub fn fixed_points(&self) -> Result<FixedPoints> {
        let cls = self.classify();
        let bits = self.prec();
        match cls.kind {
            IsometryKind::Identity => Err(precondition("the identity fixes every point")),
            IsometryKind::Hyperbolic | IsometryKind::Parabolic => {
                let tr = self.trace();
                let disc = if cls.kind == IsometryKind::Parabolic {
                    Float::new(bits)
                } else {
                    (Float::with_val(bits, tr.square_ref()) - 4u32).sqrt()
                };
                if self.c.is_zero() {
                    // z ↦ (az + b)/d fixes ∞ and b/(d - a) when a ≠ d.
                    let mut pts = Vec::new();
                    if cls.kind == IsometryKind::Hyperbolic {
                        let den = Float::with_val(bits, &self.d - &self.a);
                        pts.push(BoundaryPoint::Finite(Float::with_val(bits, &self.b / &den)));
                    }
                    pts.push(BoundaryPoint::Infinity);
                    return Ok(FixedPoints::Boundary(pts));
                }
                let amd = Float::with_val(bits, &self.a - &self.d);
                let two_c = Float::with_val(bits, &self.c * 2u32);
                if cls.kind == IsometryKind::Parabolic {
                    return Ok(FixedPoints::Boundary(vec![BoundaryPoint::Finite(
                        amd / two_c,
                    )]));
                }
                let lo = Float::with_val(bits, &amd - &disc) / &two_c;
                let hi = Float::with_val(bits, &amd + &disc) / &two_c;
                let mut v = vec![lo, hi];
                v.sort_by(|x, y| x.partial_cmp(y).unwrap_or(Ordering::Equal));
                Ok(FixedPoints::Boundary(
                    v.into_iter().map(BoundaryPoint::Finite).collect(),
                ))
            }
            IsometryKind::Elliptic => {
                let tr = self.trace();
                let s = (4u32 - Float::with_val(bits, tr.square_ref())).sqrt();
                let two_c = Float::with_val(bits, self.c.abs_ref()) * 2u32;
                let x = Float::with_val(bits, &self.a - &self.d)
                    / Float::with_val(bits, &self.c * 2u32);
                let y = s / two_c;
                Ok(FixedPoints::Interior(UHPoint::new(x, y)?))
            }
        }
    }
}

fn larger_abs(x: &BigReal, y: &BigReal) -> BigReal {
    let prec = x.prec().max(y.prec());
    let ax = Float::with_val(prec, x.abs_ref());
    let ay = Float::with_val(prec, y.abs_ref());
    if ax >= ay {
        ax
    } else {
        ay
    }
}

/// Euclidean half-circle orthogonal to the real axis, or a vertical line
/// when one endpoint is `∞`. Stored by endpoints, `p < q` when both finite.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfCircle {
    p: BoundaryPoint,
    q: BoundaryPoint,
}

impl HalfCircle {
    pub fn from_endpoints(u: BoundaryPoint, v: BoundaryPoint) -> Result<Self> {
        match (&u, &v) {
            (BoundaryPoint::Infinity, BoundaryPoint::Infinity) => {
                Err(precondition("half-circle endpoints must differ"))
            }
            (BoundaryPoint::Infinity, BoundaryPoint::Finite(_)) => Ok(HalfCircle { p: v, q: u }),
            (BoundaryPoint::Finite(_), BoundaryPoint::Infinity) => Ok(HalfCircle { p: u, q: v }),
            (BoundaryPoint::Finite(a), BoundaryPoint::Finite(b)) => match a.partial_cmp(b) {
                Some(Ordering::Less) => Ok(HalfCircle { p: u, q: v }),
                Some(Ordering::Greater) => Ok(HalfCircle { p: v, q: u }),
                _ => Err(precondition("half-circle endpoints must differ")),
            },
        }
    }

    /// `C(center, radius)`.
    pub fn new(center: &BigReal, radius: &BigReal) -> Result<Self> {
        if !(*radius > 0) {
            return Err(precondition("radius must be positive"));
        }
        let prec = center.prec().max(radius.prec());
        Self::from_endpoints(
            BoundaryPoint::Finite(Float::with_val(prec, center - radius)),
            BoundaryPoint::Finite(Float::with_val(prec, center + radius)),
        )
    }

    pub fn p(&self) -> &BoundaryPoint {
        &self.p
    }

    pub fn q(&self) -> &BoundaryPoint {
        &self.q
    }

    pub fn is_vertical(&self) -> bool {
        self.q.is_infinite()
    }

    /// Finite endpoints `(p, q)` of a bounded half-circle.
    pub fn bounds(&self) -> Option<(&BigReal, &BigReal)> {
        match (&self.p, &self.q) {
            (BoundaryPoint::Finite(p), BoundaryPoint::Finite(q)) => Some((p, q)),
            _ => None,
        }
    }

    pub fn center(&self) -> Option<BigReal> {
        self.bounds()
            .map(|(p, q)| Float::with_val(p.prec(), p + q) / 2u32)
    }

    pub fn radius(&self) -> Option<BigReal> {
        self.bounds()
            .map(|(p, q)| Float::with_val(p.prec(), q - p) / 2u32)
    }

    /// Closed interval of `self` contains that of `other` (bounded circles).
    pub fn encloses(&self, other: &HalfCircle) -> bool {
        match (self.bounds(), other.bounds()) {
            (Some((p, q)), Some((u, v))) => p <= u && v <= q,
            _ => false,
        }
    }

    /// Closed intervals are disjoint (bounded circles).
    pub fn disjoint_closure(&self, other: &HalfCircle) -> bool {
        match (self.bounds(), other.bounds()) {
            (Some((p, q)), Some((u, v))) => q < u || v < p,
            _ => false,
        }
    }

    /// Strictly inside the open half-disk bounded by this circle.
    pub fn strictly_inside(&self, z: &UHPoint) -> bool {
        match self.bounds() {
            Some((p, q)) => {
                let prec = p.prec().max(z.prec());
                let c = Float::with_val(prec, p + q) / 2u32;
                let r = Float::with_val(prec, q - p) / 2u32;
                let dx = Float::with_val(prec, &z.x - &c);
                let d2 = dx.square() + Float::with_val(prec, z.y.square_ref());
                d2 < r.square()
            }
            None => false,
        }
    }

    /// Position of a boundary point relative to the closed interval.
    pub fn boundary_inside(&self, x: &BigReal) -> bool {
        match self.bounds() {
            Some((p, q)) => p <= x && x <= q,
            None => false,
        }
    }

    pub fn approx_eq(&self, other: &HalfCircle, tol: &BigReal) -> bool {
        self.p.approx_eq(&other.p, tol) && self.q.approx_eq(&other.q, tol)
    }
}

/// Complete geodesic with distinct endpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct Geodesic {
    u: BoundaryPoint,
    v: BoundaryPoint,
}

impl Geodesic {
    pub fn new(u: BoundaryPoint, v: BoundaryPoint) -> Result<Self> {
        HalfCircle::from_endpoints(u.clone(), v.clone())?;
        Ok(Geodesic { u, v })
    }

    pub fn endpoints(&self) -> (&BoundaryPoint, &BoundaryPoint) {
        (&self.u, &self.v)
    }
}

impl From<&HalfCircle> for Geodesic {
    fn from(c: &HalfCircle) -> Self {
        Geodesic {
            u: c.p.clone(),
            v: c.q.clone(),
        }
    }
}

/// `d(z, w) = 2 asinh(|z - w| / (2 sqrt(Im z Im w)))`.
pub fn hyp_distance(z: &UHPoint, w: &UHPoint) -> BigReal {
    let prec = z.prec().max(w.prec());
    let dx = Float::with_val(prec, &z.x - &w.x);
    let dy = Float::with_val(prec, &z.y - &w.y);
    let chord = (dx.square() + dy.square()).sqrt();
    let den = Float::with_val(prec, &z.y * &w.y).sqrt() * 2u32;
    (chord / den).asinh() * 2u32
}

/// Distance from an interior point to a complete geodesic.
pub fn dist_to_geodesic(z: &UHPoint, g: &Geodesic) -> BigReal {
    let prec = z.prec();
    let s = match (&g.u, &g.v) {
        (BoundaryPoint::Finite(c), BoundaryPoint::Infinity)
        | (BoundaryPoint::Infinity, BoundaryPoint::Finite(c)) => {
            Float::with_val(prec, &z.x - c).abs() / &z.y
        }
        (BoundaryPoint::Finite(u), BoundaryPoint::Finite(v)) => {
            let c = Float::with_val(prec, u + v) / 2u32;
            let rho = Float::with_val(prec, v - u).abs() / 2u32;
            let dx = Float::with_val(prec, &z.x - &c);
            let gap = dx.square() + Float::with_val(prec, z.y.square_ref())
                - Float::with_val(prec, rho.square_ref());
            gap.abs() / (rho * &z.y * 2u32)
        }
        (BoundaryPoint::Infinity, BoundaryPoint::Infinity) => unreachable!("validated geodesic"),
    };
    s.asinh()
}

/// Distance from `z` to the closed region enclosed by a bounded half-circle
/// (zero inside).
pub fn dist_to_half_disk(z: &UHPoint, c: &HalfCircle) -> BigReal {
    if c.strictly_inside(z) {
        return Float::new(z.prec());
    }
    dist_to_geodesic(z, &Geodesic::from(c))
}

/// Image of a half-circle: the endpoints are mapped and re-canonicalized.
pub fn image_halfcircle(g: &MoebiusMap, c: &HalfCircle) -> Result<HalfCircle> {
    HalfCircle::from_endpoints(g.apply_boundary(&c.p), g.apply_boundary(&c.q))
}

// Complex helpers for the Cayley transform between H and the unit disk.
#[derive(Clone, Debug)]
struct Cx {
    re: BigReal,
    im: BigReal,
}

impl Cx {
    fn div(&self, o: &Cx) -> Cx {
        let prec = self.re.prec();
        let den =
            Float::with_val(prec, o.re.square_ref()) + Float::with_val(prec, o.im.square_ref());
        let re = Float::with_val(prec, &self.re * &o.re) + Float::with_val(prec, &self.im * &o.im);
        let im = Float::with_val(prec, &self.im * &o.re) - Float::with_val(prec, &self.re * &o.im);
        Cx {
            re: re / &den,
            im: im / den,
        }
    }
}

/// Angle of a boundary point as seen from `o = i` under the Cayley map
/// `z ↦ (z - i)/(z + i)`; `∞` has angle 0, `0` has angle `π`. Values lie in
/// `(-π, π]`.
pub fn boundary_angle(p: &BoundaryPoint, prec: Precision) -> BigReal {
    match p {
        BoundaryPoint::Infinity => prec.zero(),
        BoundaryPoint::Finite(x) => {
            // (x - i)^2 / (x^2 + 1) = (x^2 - 1 - 2ix)/(x^2 + 1)
            let bits = prec.bits();
            let x = Float::with_val(bits, x);
            let re = Float::with_val(bits, x.square_ref()) - 1u32;
            let mut im = Float::with_val(bits, &x * -2i32);
            if im.is_zero() {
                im = Float::new(bits);
            }
            im.atan2(&re)
        }
    }
}

/// Inverse of [`boundary_angle`]: `ξ = -cot(θ/2)`.
pub fn boundary_from_angle(theta: &BigReal) -> BoundaryPoint {
    let prec = theta.prec();
    let half = Float::with_val(prec, theta / 2u32);
    let (s, c) = half.sin_cos(Float::new(prec));
    if s.is_zero() {
        return BoundaryPoint::Infinity;
    }
    BoundaryPoint::Finite(-(c / s))
}

/// Point at hyperbolic distance `t` from `o` on the ray `[o, ξ)`.
pub fn geodesic_ray_point(o: &UHPoint, xi: &BoundaryPoint, t: &BigReal) -> Result<UHPoint> {
    if *t < 0 {
        return Err(precondition("ray parameter must be nonnegative"));
    }
    let prec = o.prec().max(t.prec());
    let bits = prec;
    // Move o to i by w ↦ (w - x_o)/y_o.
    let xi_local = match xi {
        BoundaryPoint::Infinity => BoundaryPoint::Infinity,
        BoundaryPoint::Finite(x) => BoundaryPoint::Finite(Float::with_val(bits, x - &o.x) / &o.y),
    };
    let p = Precision::new(bits)?;
    let theta = boundary_angle(&xi_local, p);
    let (s, c) = theta.clone().sin_cos(Float::new(bits));
    let tau = Float::with_val(bits, t / 2u32).tanh();
    // 1 - tanh(t/2) computed without cancellation.
    let one_minus_tau = Float::with_val(bits, 2u32) / (Float::with_val(bits, t.exp_ref()) + 1u32);
    let u_re = Float::with_val(bits, &tau * &c);
    let u_im = Float::with_val(bits, &tau * &s);
    // 1 - u, with 1 - τ cos θ = (1 - τ) + τ (1 - cos θ), 1 - cos θ = 2 sin^2(θ/2).
    let half = Float::with_val(bits, &theta / 2u32);
    let sh = half.sin();
    let one_minus_cos = Float::with_val(bits, sh.square_ref()) * 2u32;
    let den_re = one_minus_tau + Float::with_val(bits, &tau * &one_minus_cos);
    let den = Cx {
        re: den_re,
        im: -u_im.clone(),
    };
    let num = Cx {
        re: Float::with_val(bits, 1u32) + &u_re,
        im: u_im,
    };
    let q = num.div(&den);
    // z = i * q
    let local = UHPoint::new(-q.im, q.re)?;
    Ok(UHPoint {
        x: Float::with_val(bits, &local.x * &o.y) + &o.x,
        y: Float::with_val(bits, &local.y * &o.y),
    })
}

/// Point at distance `s` from `z` in direction `phi` (angle measured in the
/// disk picture centred at `z`).
pub fn point_at(z: &UHPoint, phi: &BigReal, s: &BigReal) -> Result<UHPoint> {
    let dir = boundary_from_angle(phi);
    geodesic_ray_point(z, &dir, s)
}

/// Distance from `z` to the ray `[o, ξ)`.
pub fn dist_to_ray(z: &UHPoint, o: &UHPoint, xi: &BoundaryPoint) -> Result<BigReal> {
    // Foot of the perpendicular falls on the ray iff the angle at o between
    // the ray and the direction of z is at most π/2.
    let prec = Precision::new(z.prec().max(o.prec()))?;
    let local_z = UHPoint {
        x: Float::with_val(prec.bits(), &z.x - &o.x) / &o.y,
        y: Float::with_val(prec.bits(), &z.y / &o.y),
    };
    let local_xi = match xi {
        BoundaryPoint::Infinity => BoundaryPoint::Infinity,
        BoundaryPoint::Finite(x) => {
            BoundaryPoint::Finite(Float::with_val(prec.bits(), x - &o.x) / &o.y)
        }
    };
    let dz = direction_angle(&local_z, prec);
    let dxi = boundary_angle(&local_xi, prec);
    let diff = angle_gap(&dz, &dxi, prec);
    let half_pi = prec.pi() / 2u32;
    if diff > half_pi {
        return Ok(hyp_distance(z, o));
    }
    let opposite = Float::with_val(prec.bits(), &dxi + prec.pi());
    let g = Geodesic::new(local_xi, boundary_from_angle(&opposite))?;
    Ok(dist_to_geodesic(&local_z, &g))
}

/// Direction angle of `z ≠ i` seen from `i` (same convention as
/// [`boundary_angle`]).
pub fn direction_angle(z: &UHPoint, prec: Precision) -> BigReal {
    let bits = prec.bits();
    // Cayley image (z - i)/(z + i)
    let num = Cx {
        re: Float::with_val(bits, &z.x),
        im: Float::with_val(bits, &z.y) - 1u32,
    };
    let den = Cx {
        re: Float::with_val(bits, &z.x),
        im: Float::with_val(bits, &z.y) + 1u32,
    };
    let w = num.div(&den);
    w.im.atan2(&w.re)
}

/// Absolute angular gap in `[0, π]`.
pub fn angle_gap(a: &BigReal, b: &BigReal, prec: Precision) -> BigReal {
    let bits = prec.bits();
    let two_pi = prec.pi() * 2u32;
    let mut d = Float::with_val(bits, a - b).abs();
    d %= &two_pi;
    let alt = Float::with_val(bits, &two_pi - &d);
    if alt < d {
        alt
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> Precision {
        Precision::DEFAULT
    }

    fn bp(x: f64) -> BoundaryPoint {
        BoundaryPoint::Finite(p().float(x))
    }

    fn map(a: f64, b: f64, c: f64, d: f64) -> MoebiusMap {
        MoebiusMap::new(p().float(a), p().float(b), p().float(c), p().float(d)).unwrap()
    }

    #[test]
    fn normalization_and_sign() {
        let g = map(-2.0, 0.0, -1.0, -1.0);
        assert!(approx_eq(&g.determinant(), &p().one(), &p().tolerance()));
        assert!(*g.c() > 0);
        let t = map(-1.0, -1.0, 0.0, -1.0);
        assert!(*t.a() > 0);
        assert!(MoebiusMap::new(p().one(), p().zero(), p().zero(), p().float(-1.0)).is_err());
    }

    #[test]
    fn identity_and_inverse() {
        let g = map(2.0, 1.0, 3.0, 2.0);
        let id = MoebiusMap::identity(p());
        let tol = p().tolerance();
        assert!(id.compose(&g).unwrap().approx_eq(&g, &tol));
        assert!(g.compose(&g.inverse()).unwrap().approx_eq(&id, &tol));
        let i = UHPoint::origin(p());
        assert!(id.apply_point(&i).approx_eq(&i, &tol));
    }

    #[test]
    fn classification() {
        let tol = p().tolerance();
        let _ = tol;
        assert_eq!(
            map(1.0, 1.0, 0.0, 1.0).classify().kind,
            IsometryKind::Parabolic
        );
        assert_eq!(
            map(0.0, -1.0, 1.0, 0.0).classify().kind,
            IsometryKind::Elliptic
        );
        assert_eq!(
            map(2.0, 0.0, 0.0, 0.5).classify().kind,
            IsometryKind::Hyperbolic
        );
        assert_eq!(
            MoebiusMap::identity(p()).classify().kind,
            IsometryKind::Identity
        );
        // trace 2 + 2^-400 is indistinguishable from parabolic at 512 bits
        let eps = p().pow2(-400);
        let a = Float::with_val(512, 1u32) + &eps;
        let d = Float::with_val(512, 1u32);
        let c = Float::with_val(512, &eps / &a);
        let g = MoebiusMap::new(a, p().one(), c, d).unwrap();
        let cls = g.classify();
        assert_eq!(cls.kind, IsometryKind::Parabolic);
        assert!(cls.near_degenerate);
    }

    #[test]
    fn fixed_points_of_standard_maps() {
        let tol = p().tolerance();
        assert!(map(1.0, 0.0, 0.0, 1.0).fixed_points().is_err());
        match map(1.0, 1.0, 0.0, 1.0).fixed_points().unwrap() {
            FixedPoints::Boundary(v) => assert_eq!(v, vec![BoundaryPoint::Infinity]),
            other => panic!("{other:?}"),
        }
        match map(0.0, -1.0, 1.0, 0.0).fixed_points().unwrap() {
            FixedPoints::Interior(z) => assert!(z.approx_eq(&UHPoint::origin(p()), &tol)),
            other => panic!("{other:?}"),
        }
        match map(2.0, 0.0, 0.0, 0.5).fixed_points().unwrap() {
            FixedPoints::Boundary(v) => {
                assert!(v[0].approx_eq(&bp(0.0), &tol));
                assert!(v[1].is_infinite());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pole_maps_to_infinity() {
        let g = map(0.0, -1.0, 1.0, 0.0);
        assert_eq!(g.apply_boundary(&bp(0.0)), BoundaryPoint::Infinity);
        assert!(g
            .apply_boundary(&BoundaryPoint::Infinity)
            .approx_eq(&bp(0.0), &p().tolerance()));
    }

    #[test]
    fn vertical_distance_is_log_ratio() {
        let i = UHPoint::origin(p());
        let two_i = UHPoint::from_f64(p(), 0.0, 2.0).unwrap();
        let d = hyp_distance(&i, &two_i);
        assert!(approx_eq(&d, &p().ln2(), &p().tolerance()));
        assert!(hyp_distance(&i, &i).is_zero());
    }

    #[test]
    fn ray_points() {
        let tol = p().tolerance();
        let i = UHPoint::origin(p());
        let t = p().float(3.0);
        let z = geodesic_ray_point(&i, &BoundaryPoint::Infinity, &t).unwrap();
        assert!(approx_eq(z.x(), &p().zero(), &tol));
        assert!(approx_eq_scaled(
            z.y(),
            &Float::with_val(512, t.exp_ref()),
            &tol
        ));
        let z0 = geodesic_ray_point(&i, &bp(1.0), &p().zero()).unwrap();
        assert!(z0.approx_eq(&i, &tol));
        // toward 0 the ray descends the imaginary axis
        let z1 = geodesic_ray_point(&i, &bp(0.0), &t).unwrap();
        assert!(approx_eq_scaled(
            z1.y(),
            &Float::with_val(512, (-t.clone()).exp_ref()),
            &tol
        ));
        assert!(geodesic_ray_point(&i, &bp(0.0), &p().float(-1.0)).is_err());
    }

    #[test]
    fn distance_to_geodesics() {
        let tol = p().tolerance();
        let i = UHPoint::origin(p());
        let unit = Geodesic::new(bp(-1.0), bp(1.0)).unwrap();
        assert!(approx_eq(&dist_to_geodesic(&i, &unit), &p().zero(), &tol));
        let axis = Geodesic::new(bp(0.0), BoundaryPoint::Infinity).unwrap();
        let two_i = UHPoint::from_f64(p(), 0.0, 2.0).unwrap();
        assert!(approx_eq(
            &dist_to_geodesic(&two_i, &axis),
            &p().zero(),
            &tol
        ));
    }

    #[test]
    fn halfcircle_canonical_order() {
        let c = HalfCircle::from_endpoints(bp(3.0), bp(1.0)).unwrap();
        assert_eq!(c.p(), &bp(1.0));
        assert_eq!(c.center().unwrap(), p().float(2.0));
        assert_eq!(c.radius().unwrap(), p().float(1.0));
        let v = HalfCircle::from_endpoints(BoundaryPoint::Infinity, bp(1.0)).unwrap();
        assert!(v.is_vertical());
        assert!(HalfCircle::from_endpoints(bp(1.0), bp(1.0)).is_err());
    }

    #[test]
    fn angles_round_trip() {
        let prec = p();
        for x in [-7.5, -1.0, 0.0, 0.3, 1.0, 42.0] {
            let b = bp(x);
            let a = boundary_angle(&b, prec);
            assert!(
                boundary_from_angle(&a).approx_eq(&b, &prec.tolerance()),
                "{x}"
            );
        }
        assert!(boundary_angle(&BoundaryPoint::Infinity, prec).is_zero());
        let a0 = boundary_angle(&bp(0.0), prec);
        assert!(approx_eq(&a0, &prec.pi(), &prec.tolerance()));
    }
}
