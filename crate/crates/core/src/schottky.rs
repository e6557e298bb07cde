//! The generator family `h_j`, `x_j = 2^(j^2)`, `r_j = 2^(-|j|-2)`, its
//! circle pairing and the fundamental domain of `Γ_k`.

use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::hyperbolic::{image_halfcircle, BoundaryPoint, HalfCircle, MoebiusMap, UHPoint};
use crate::num::{approx_eq_scaled, BigNum, BigReal, Precision};

/// Closed-form data of one generator.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorParams {
    pub j: i32,
    /// `sign(j) 2^(j^2)`.
    pub x: BigReal,
    /// `2^(-|j|-2)`.
    pub r: BigReal,
    /// `sign(j) sqrt(x^2 + r^2)`, the centre of `C_j`.
    pub x_prime: BigReal,
    /// Dilation factor; `λ_{-j} = λ_j`.
    pub lambda: BigReal,
}

impl GeneratorParams {
    pub fn new(j: i32, prec: Precision) -> Result<Self> {
        if j == 0 {
            return Err(precondition("generator index must be nonzero"));
        }
        let n = i64::from(j.unsigned_abs());
        prec.check_range(n * n, -(n + 2))?;
        let bits = prec.bits();
        let xa = prec.pow2(n * n);
        let r = prec.pow2(-(n + 2));
        let r2 = Float::with_val(bits, r.square_ref());
        let xpa = (Float::with_val(bits, xa.square_ref()) + &r2).sqrt();
        // λ = 1 + (2x^2 + 2x x') / r^2
        let num = Float::with_val(bits, xa.square_ref()) * 2u32
            + Float::with_val(bits, &xa * &xpa) * 2u32;
        let lambda = num / &r2 + 1u32;
        let (x, x_prime) = if j > 0 { (xa, xpa) } else { (-xa, -xpa) };
        Ok(GeneratorParams {
            j,
            x,
            r,
            x_prime,
            lambda,
        })
    }

    /// Lower bound `4x^2/r^2 = 2^(2j^2 + 2|j| + 6)`.
    pub fn lambda_lower_bound(&self, prec: Precision) -> BigReal {
        let n = i64::from(self.j.unsigned_abs());
        prec.pow2(2 * n * n + 2 * n + 6)
    }

    pub fn circle(&self) -> HalfCircle {
        HalfCircle::new(&self.x_prime, &self.r).expect("positive radius")
    }
}

/// `m_j(z) = (x_j z - x_j)/(z + 1)`: sends `0 ↦ -x_j`, `∞ ↦ x_j`,
/// `i ↦ x_j i`.
pub fn conjugator(j: i32, prec: Precision) -> Result<MoebiusMap> {
    let p = GeneratorParams::new(j.abs(), prec)?;
    MoebiusMap::new(p.x.clone(), -p.x, prec.one(), prec.one())
}

/// `z ↦ λ z`.
pub fn dilation(lambda: &BigReal) -> Result<MoebiusMap> {
    MoebiusMap::dilation(lambda)
}

/// `h_j` built from its closed-form coefficients; `h_{-j} = h_j^{-1}`.
pub fn build_generator(j: i32, prec: Precision) -> Result<MoebiusMap> {
    let p = GeneratorParams::new(j.abs(), prec)?;
    let bits = prec.bits();
    // Dividing the coefficients by sqrt(4 λ x^2) gives a = d = cosh(l/2),
    // b = x sinh(l/2), c = sinh(l/2)/x with e^(l/2) = sqrt(λ).
    let s = Float::with_val(bits, p.lambda.sqrt_ref());
    let si = Float::with_val(bits, s.recip_ref());
    let ch = Float::with_val(bits, &s + &si) / 2u32;
    let sh = Float::with_val(bits, &s - &si) / 2u32;
    let b = Float::with_val(bits, &p.x * &sh);
    let c = sh / &p.x;
    let h = MoebiusMap::from_unimodular(ch.clone(), b, c, ch);
    Ok(if j > 0 { h } else { h.inverse() })
}

/// `C_j = C(x'_j, r_j)`.
pub fn base_circle(j: i32, prec: Precision) -> Result<HalfCircle> {
    Ok(GeneratorParams::new(j, prec)?.circle())
}

/// Residuals of the pairing `h_j(C_{-j}) = C_j`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairingReport {
    pub j: i32,
    /// `h_j(x'_{-j} - r_j)` and `h_j(x'_{-j} + r_j)`.
    pub images: [BigNum; 2],
    /// Max distance of the images to `x'_j ± r_j`, the endpoints of `C_j`.
    pub residual: BigNum,
    /// Max distance of the images to `x_j ± r_j`.
    pub literal_residual: BigNum,
    /// `x'_j - x_j = r_j^2 / (x_j + x'_j)`, the gap between the two readings.
    pub center_gap: BigNum,
    /// `h_j(0)` lies inside `C_j` (exterior of `C_{-j}` goes to the interior).
    pub orientation_ok: bool,
    pub tolerance: BigNum,
    pub pass: bool,
}

pub fn pairing_check(j: i32, prec: Precision) -> Result<PairingReport> {
    if j < 1 {
        return Err(precondition("pairing_check needs j >= 1"));
    }
    let bits = prec.bits();
    let p = GeneratorParams::new(j, prec)?;
    let q = GeneratorParams::new(-j, prec)?;
    let h = build_generator(j, prec)?;
    let lo_src = Float::with_val(bits, &q.x_prime - &q.r);
    let hi_src = Float::with_val(bits, &q.x_prime + &q.r);
    let img = |v: BigReal| -> Result<BigReal> {
        match h.apply_boundary(&BoundaryPoint::Finite(v)) {
            BoundaryPoint::Finite(y) => Ok(y),
            BoundaryPoint::Infinity => Err(Error::PrecisionExhausted {
                context: "pairing endpoint hit the pole".into(),
            }),
        }
    };
    let im_lo = img(lo_src)?;
    let im_hi = img(hi_src)?;
    let gap = |a: &BigReal, b: BigReal| Float::with_val(bits, a - &b).abs();
    let residual = max2(
        gap(&im_lo, Float::with_val(bits, &p.x_prime + &p.r)),
        gap(&im_hi, Float::with_val(bits, &p.x_prime - &p.r)),
    );
    let literal = max2(
        gap(&im_lo, Float::with_val(bits, &p.x + &p.r)),
        gap(&im_hi, Float::with_val(bits, &p.x - &p.r)),
    );
    let center_gap =
        Float::with_val(bits, p.r.square_ref()) / Float::with_val(bits, &p.x + &p.x_prime);
    let inside = match h.apply_boundary(&BoundaryPoint::Finite(prec.zero())) {
        BoundaryPoint::Finite(y) => p.circle().boundary_inside(&y),
        BoundaryPoint::Infinity => false,
    };
    let tol = prec.tolerance();
    let pass = residual <= tol && inside;
    Ok(PairingReport {
        j,
        images: [BigNum::new(&im_lo), BigNum::new(&im_hi)],
        residual: BigNum::new(&residual),
        literal_residual: BigNum::new(&literal),
        center_gap: BigNum::new(&center_gap),
        orientation_ok: inside,
        tolerance: BigNum::new(&tol),
        pass,
    })
}

fn max2(a: BigReal, b: BigReal) -> BigReal {
    if a >= b {
        a
    } else {
        b
    }
}

#[derive(Clone, Debug)]
struct Generator {
    params: GeneratorParams,
    map: MoebiusMap,
    circle: HalfCircle,
}

/// Generators `h_j`, `k ≤ |j| ≤ J_max`, at one session precision.
/// Immutable after construction.
#[derive(Clone, Debug)]
pub struct GeneratorFamily {
    k: i32,
    j_max: i32,
    precision: Precision,
    // index |j| - k; entry 0 is +j, entry 1 is -j
    gens: Vec<[Generator; 2]>,
}

impl GeneratorFamily {
    pub const DEFAULT_SPAN: i32 = 20;

    /// Builds at the precision needed to resolve the whole alphabet.
    pub fn new(k: i32, j_max: i32) -> Result<Self> {
        Self::with_precision(k, j_max, Precision::for_alphabet(j_max))
    }

    pub fn with_precision(k: i32, j_max: i32, precision: Precision) -> Result<Self> {
        if k < 1 || j_max < k {
            return Err(precondition(format!(
                "need 1 <= k <= J_max, got k = {k}, J_max = {j_max}"
            )));
        }
        let mut gens = Vec::with_capacity((j_max - k + 1) as usize);
        for j in k..=j_max {
            let make = |s: i32| -> Result<Generator> {
                let params = GeneratorParams::new(s, precision)?;
                let map = build_generator(s, precision)?;
                let circle = params.circle();
                Ok(Generator {
                    params,
                    map,
                    circle,
                })
            };
            gens.push([make(j)?, make(-j)?]);
        }
        Ok(GeneratorFamily {
            k,
            j_max,
            precision,
            gens,
        })
    }

    pub fn k(&self) -> i32 {
        self.k
    }

    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    /// `{-J_max, …, -k, k, …, J_max}` in ascending order.
    pub fn alphabet(&self) -> Vec<i32> {
        let mut v: Vec<i32> = (self.k..=self.j_max).rev().map(|j| -j).collect();
        v.extend(self.k..=self.j_max);
        v
    }

    pub fn contains(&self, j: i32) -> bool {
        let a = j.abs();
        a >= self.k && a <= self.j_max
    }

    fn entry(&self, j: i32) -> &Generator {
        assert!(self.contains(j), "index {j} outside the family alphabet");
        &self.gens[(j.abs() - self.k) as usize][usize::from(j < 0)]
    }

    pub fn params(&self, j: i32) -> &GeneratorParams {
        &self.entry(j).params
    }

    pub fn generator(&self, j: i32) -> &MoebiusMap {
        &self.entry(j).map
    }

    pub fn circle(&self, j: i32) -> &HalfCircle {
        &self.entry(j).circle
    }

    /// Every pair of base circles has disjoint closures.
    pub fn circles_disjoint(&self) -> bool {
        let mut cs: Vec<&HalfCircle> = self.alphabet().iter().map(|&j| self.circle(j)).collect();
        cs.sort_by(|a, b| {
            a.bounds()
                .unwrap()
                .0
                .partial_cmp(b.bounds().unwrap().0)
                .unwrap()
        });
        cs.windows(2).all(|w| w[0].disjoint_closure(w[1]))
    }

    /// Inner edge `x'_{J+1} - r_{J+1}` of the first circle beyond the
    /// truncation.
    pub fn truncation_radius(&self) -> Result<BigReal> {
        let next = GeneratorParams::new(self.j_max + 1, self.precision)?;
        Ok(Float::with_val(
            self.precision.bits(),
            &next.x_prime - &next.r,
        ))
    }

    /// Open fundamental domain test: strictly exterior to every `C_j`,
    /// `|j| ≥ k`. Points on a circle are not in the domain.
    pub fn in_fundamental_domain(&self, z: &UHPoint) -> Result<bool> {
        let bits = self.precision.bits();
        let reach = Float::with_val(bits, z.x().abs_ref()) + z.y();
        self.guard_truncation(&reach)?;
        for j in self.alphabet() {
            let (p, q) = self.circle(j).bounds().expect("bounded circle");
            let c = Float::with_val(bits, p + q) / 2u32;
            let r = Float::with_val(bits, q - p) / 2u32;
            let dx = Float::with_val(bits, z.x() - &c);
            let d2 = dx.square() + Float::with_val(bits, z.y().square_ref());
            if d2 <= r.square() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Boundary version of [`Self::in_fundamental_domain`]. `∞` is not in
    /// `H ∪ R` and is reported outside.
    pub fn boundary_in_fundamental_domain(&self, xi: &BoundaryPoint) -> Result<bool> {
        let x = match xi {
            BoundaryPoint::Infinity => return Ok(false),
            BoundaryPoint::Finite(x) => x,
        };
        let reach = Float::with_val(self.precision.bits(), x.abs_ref());
        self.guard_truncation(&reach)?;
        Ok(!self
            .alphabet()
            .iter()
            .any(|&j| self.circle(j).boundary_inside(x)))
    }

    fn guard_truncation(&self, reach: &BigReal) -> Result<()> {
        if *reach >= self.truncation_radius()? {
            return Err(Error::Indeterminate { j_max: self.j_max });
        }
        Ok(())
    }

    pub fn manifest(&self) -> FamilyManifest {
        FamilyManifest {
            k: self.k,
            j_max: self.j_max,
            precision: self.precision.bits(),
            generators: (self.k..=self.j_max)
                .map(|j| {
                    let p = self.params(j);
                    GeneratorRecord {
                        j,
                        x: BigNum::new(&p.x),
                        r: BigNum::new(&p.r),
                        x_prime: BigNum::new(&p.x_prime),
                        lambda: BigNum::new(&p.lambda),
                    }
                })
                .collect(),
        }
    }

    /// Rebuilds a family from its manifest and checks the recorded values.
    pub fn from_manifest(m: &FamilyManifest) -> Result<Self> {
        let fam = Self::with_precision(m.k, m.j_max, Precision::new(m.precision)?)?;
        if fam.manifest() != *m {
            return Err(precondition(
                "manifest values do not match the rebuilt family",
            ));
        }
        Ok(fam)
    }
}

/// JSON manifest of a family; only positive indices are listed since the
/// negative ones are mirror images.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyManifest {
    pub k: i32,
    pub j_max: i32,
    pub precision: u32,
    pub generators: Vec<GeneratorRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorRecord {
    pub j: i32,
    pub x: BigNum,
    pub r: BigNum,
    pub x_prime: BigNum,
    pub lambda: BigNum,
}

/// Image of `C_{-j}` under `h_j` compared with `C_j` endpoint-wise.
pub fn pairs_onto(
    h: &MoebiusMap,
    from: &HalfCircle,
    to: &HalfCircle,
    tol: &BigReal,
) -> Result<bool> {
    let img = image_halfcircle(h, from)?;
    Ok(img.approx_eq(to, tol))
}

/// Scaled equality helper used by the tests of this module and callers.
pub fn close(a: &BigReal, b: &BigReal, prec: Precision) -> bool {
    approx_eq_scaled(a, b, &prec.tolerance())
}
