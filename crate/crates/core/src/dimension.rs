//! Dimension estimates for the limit set: the covering-sum certificate,
//! limit-point sampling with a box-counting cross-check, orbit counting for
//! the critical exponent and escape profiles `Δ(ξ_t) = d(ξ_t, Γ·o)`.

use std::collections::HashSet;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rug::{Float, Integer};
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::hyperbolic::{geodesic_ray_point, hyp_distance, BoundaryPoint, MoebiusMap, UHPoint};
use crate::num::{log2_f64, BigNum, BigReal};
use crate::schottky::{GeneratorFamily, GeneratorParams};
use crate::words::{
    check_mu_sum, covering_sums_upto, word_count, word_track, CircleTrack, CoverReport,
    MuSumReport, ReducedWord,
};

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| precondition(format!("cannot start worker pool: {e}")))
}

/// Box-counting estimate with its fit diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxEstimate {
    pub slope: f64,
    pub stderr: f64,
    /// `slope ± 2 stderr`, clipped at 0 from below.
    pub band: (f64, f64),
    pub points: usize,
    pub distinct: usize,
    /// `(s, N(2^-s))` per scale.
    pub counts: Vec<(i32, u64)>,
}

/// Outcome of the Hausdorff-dimension certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub k: i32,
    pub j_max: i32,
    pub n: usize,
    pub precision: u32,
    pub pass: bool,
    /// `1/(2k)` when the certificate passes.
    pub alpha_certified: Option<BigNum>,
    pub alpha: BigNum,
    pub violation: Option<String>,
    pub mu_sum: MuSumReport,
    pub covering: Vec<CoverReport>,
    pub box_estimate: Option<BoxEstimate>,
    pub delta_hat: Option<f64>,
    pub seed: Option<u64>,
}

/// Runs the μ-sum and covering-sum checks at `α = 1/(2k)` for lengths
/// `1..=n`. The report is returned whether or not the certificate passes.
pub fn certify_hd_upper(
    n: usize,
    family: &GeneratorFamily,
    budget: u64,
    jobs: usize,
) -> Result<DimensionReport> {
    let k = family.k();
    if k < 2 {
        return Err(precondition("the dimension certificate needs k >= 2"));
    }
    if n == 0 {
        return Err(precondition("word length must be >= 1"));
    }
    let bits = family.precision().bits();
    let alpha = Float::with_val(bits, 1u32) / (2 * k as u32);
    let mu = check_mu_sum(family)?;
    let covering = covering_sums_upto(n, &alpha, family, budget, jobs)?;

    let mut violation = None;
    if !mu.pass {
        violation = Some(format!("mu-sum total {} exceeds 1", mu.total.decimal));
    } else {
        let prec = family.precision();
        for w in covering.windows(2) {
            let a = w[0].truncated_sum.to_big(prec)?;
            let b = w[1].truncated_sum.to_big(prec)?;
            if b > a {
                violation = Some(format!(
                    "covering sum increases: S({}) = {} > S({}) = {}",
                    w[1].n, w[1].truncated_sum.decimal, w[0].n, w[0].truncated_sum.decimal
                ));
                break;
            }
        }
    }
    let pass = violation.is_none();
    Ok(DimensionReport {
        k,
        j_max: family.j_max(),
        n,
        precision: bits,
        pass,
        alpha_certified: pass.then(|| BigNum::new(&alpha)),
        alpha: BigNum::new(&alpha),
        violation,
        mu_sum: mu,
        covering,
        box_estimate: None,
        delta_hat: None,
        seed: None,
    })
}

/// Center of a word circle, a limit-point proxy within `r_w` of `Λ`.
#[derive(Clone, Debug)]
pub struct LimitSample {
    pub word: ReducedWord,
    pub center: BigReal,
    pub log2_radius: f64,
}

fn random_word(rng: &mut ChaCha8Rng, alphabet: &[i32], depth: usize) -> Vec<i32> {
    let mut w = Vec::with_capacity(depth);
    let first = alphabet[rng.gen_range(0..alphabet.len())];
    w.push(first);
    while w.len() < depth {
        let prev = w[w.len() - 1];
        // uniform over the alphabet minus the cancelling letter
        let mut j = alphabet[rng.gen_range(0..alphabet.len() - 1)];
        if j == -prev {
            j = alphabet[alphabet.len() - 1];
        }
        w.push(j);
    }
    w
}

/// `count` distinct random reduced words of length `depth`, in draw order,
/// with the centers of their circles.
pub fn sample_limit_points(
    depth: usize,
    count: usize,
    family: &GeneratorFamily,
    seed: u64,
) -> Result<Vec<LimitSample>> {
    if depth < 3 {
        return Err(precondition("limit-point sampling needs depth >= 3"));
    }
    let available = word_count(family.k(), depth, family.j_max());
    if count as u128 > available {
        return Err(precondition(format!(
            "{count} distinct words requested, only {available} exist"
        )));
    }
    let alphabet = family.alphabet();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::with_capacity(count);
    let mut words = Vec::with_capacity(count);
    while words.len() < count {
        let w = random_word(&mut rng, &alphabet, depth);
        if seen.insert(w.clone()) {
            words.push(ReducedWord::new(w, family.k())?);
        }
    }
    words
        .into_par_iter()
        .map(|word| {
            let t = word_track(&word, family)?;
            let log2_radius = log2_f64(&t.width) - 1.0;
            Ok(LimitSample {
                center: t.center(),
                word,
                log2_radius,
            })
        })
        .collect()
}

/// Slack over `1/(2k)` allowed to a finite-depth box estimate.
pub const BOX_SLACK: f64 = 0.10;

/// Box-counting cross-check of the certificate on sampled limit points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitBoxReport {
    pub k: i32,
    pub j_max: i32,
    pub depth: usize,
    pub count: usize,
    pub seed: u64,
    pub scales: (i32, i32),
    pub estimate: BoxEstimate,
    /// `1/(2k)`.
    pub certificate_bound: f64,
    pub slack: f64,
    pub pass: bool,
}

pub fn box_count_limit_set(
    family: &GeneratorFamily,
    depth: usize,
    count: usize,
    seed: u64,
    scales: std::ops::RangeInclusive<i32>,
) -> Result<LimitBoxReport> {
    let centers: Vec<BigReal> = sample_limit_points(depth, count, family, seed)?
        .into_iter()
        .map(|s| s.center)
        .collect();
    let (s0, s1) = (*scales.start(), *scales.end());
    let estimate = box_count_dimension(&centers, scales)?;
    let bound = 1.0 / (2.0 * f64::from(family.k()));
    Ok(LimitBoxReport {
        k: family.k(),
        j_max: family.j_max(),
        depth,
        count,
        seed,
        scales: (s0, s1),
        pass: estimate.slope <= bound + BOX_SLACK,
        estimate,
        certificate_bound: bound,
        slack: BOX_SLACK,
    })
}

/// Least-squares slope of `ln N(2^-s)` against `s ln 2` for dyadic boxes
/// `[m 2^-s, (m+1) 2^-s)` anchored at 0.
pub fn box_count_dimension(
    points: &[BigReal],
    scales: std::ops::RangeInclusive<i32>,
) -> Result<BoxEstimate> {
    const MIN_POINTS: usize = 1000;
    const MIN_OCTAVES: i32 = 10;
    if points.len() < MIN_POINTS {
        return Err(precondition(format!(
            "box counting needs >= {MIN_POINTS} points, got {}",
            points.len()
        )));
    }
    let (s0, s1) = (*scales.start(), *scales.end());
    if s1 - s0 < MIN_OCTAVES {
        return Err(precondition(format!(
            "scale range 2^-{s0}..2^-{s1} spans fewer than {MIN_OCTAVES} octaves"
        )));
    }
    let distinct = {
        let mut v: Vec<&BigReal> = points.iter().collect();
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite points"));
        v.dedup_by(|a, b| a == b);
        v.len()
    };
    let counts: Vec<(i32, u64)> = scales
        .map(|s| {
            let mut boxes: Vec<Integer> = points
                .iter()
                .map(|p| {
                    let mut v = Float::with_val(p.prec(), p << s);
                    v.floor_mut();
                    v.to_integer().expect("finite point")
                })
                .collect();
            boxes.sort_unstable();
            boxes.dedup();
            (s, boxes.len() as u64)
        })
        .collect();
    if distinct > 1 {
        let saturated = counts
            .iter()
            .filter(|&&(_, n)| n as usize == distinct)
            .count();
        if 2 * saturated >= counts.len() {
            return Err(Error::DegenerateFit(format!(
                "box counts saturate at {distinct} on {saturated} of {} scales; too few points for the scale range",
                counts.len()
            )));
        }
    }
    let xs: Vec<f64> = counts
        .iter()
        .map(|&(s, _)| f64::from(s) * std::f64::consts::LN_2)
        .collect();
    let ys: Vec<f64> = counts.iter().map(|&(_, n)| (n as f64).ln()).collect();
    let (slope, _, stderr) = linear_fit(&xs, &ys);
    Ok(BoxEstimate {
        slope,
        stderr,
        band: ((slope - 2.0 * stderr).max(0.0), slope + 2.0 * stderr),
        points: points.len(),
        distinct,
        counts,
    })
}

/// Ordinary least squares; returns `(slope, intercept, stderr of slope)`.
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return (0.0, my, 0.0);
    }
    let slope = sxy / sxx;
    let icept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - icept - slope * x).powi(2))
        .sum();
    let stderr = if xs.len() > 2 {
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, icept, stderr)
}

/// Region known to contain every orbit point `h_w·o` the enumeration skipped.
#[derive(Clone, Debug)]
enum GuardRegion {
    /// `{|z| ≥ X}`: all circles with `|j| > J` lie in it.
    Exterior(BigReal),
    /// Half-disk over an interval.
    Disk(CircleTrack),
}

impl GuardRegion {
    fn distance(&self, z: &UHPoint) -> BigReal {
        let bits = z.x().prec();
        match self {
            GuardRegion::Exterior(x) => {
                let r2 = Float::with_val(bits, z.x().square_ref())
                    + Float::with_val(bits, z.y().square_ref());
                let gap = Float::with_val(bits, x.square_ref()) - r2;
                if gap <= 0 {
                    return Float::new(bits);
                }
                (gap / (Float::with_val(bits, x * z.y()) * 2u32)).asinh()
            }
            GuardRegion::Disk(t) => {
                let rho = Float::with_val(bits, &t.width / 2u32);
                let dx = Float::with_val(bits, z.x() - &t.lo) - &rho;
                let num = dx.square() + Float::with_val(bits, z.y().square_ref())
                    - Float::with_val(bits, rho.square_ref());
                if num <= 0 {
                    return Float::new(bits);
                }
                (num / (rho * z.y() * 2u32)).asinh()
            }
        }
    }
}

/// Image of `{|z| ≥ X}` under `g` when the pole of `g` lies in `(-X, X)`:
/// the interval `[g(X), g(-X)]`.
fn exterior_image(g: &MoebiusMap, x: &BigReal) -> CircleTrack {
    let bits = x.prec();
    let cx = Float::with_val(bits, g.c() * x);
    let lo_den = Float::with_val(bits, g.d() - &cx);
    let hi_den = Float::with_val(bits, g.d() + &cx);
    let width = (Float::with_val(bits, x * 2u32) / (lo_den * hi_den)).abs();
    let lo = match g.apply_boundary(&BoundaryPoint::Finite(x.clone())) {
        BoundaryPoint::Finite(v) => v,
        BoundaryPoint::Infinity => unreachable!("X is not the pole"),
    };
    CircleTrack { lo, width }
}

#[derive(Clone, Debug)]
struct OrbitPoint {
    word: Vec<i32>,
    point: UHPoint,
    dist: BigReal,
}

/// Truncated orbit `{h_w·o : |w| ≤ n}` together with regions that contain
/// every orbit point outside it.
#[derive(Clone, Debug)]
pub struct TruncatedOrbit {
    k: i32,
    j_max: i32,
    n_max: usize,
    points: Vec<OrbitPoint>,
    regions: Vec<(BigReal, GuardRegion)>,
}

/// Longest word length whose cumulative word count fits in `budget`.
pub fn max_length_within(k: i32, j_max: i32, budget: u64) -> usize {
    let mut total = 0u128;
    let mut n = 0;
    loop {
        total = total.saturating_add(word_count(k, n + 1, j_max));
        if total > u128::from(budget) || n >= 64 {
            return n;
        }
        n += 1;
    }
}

impl TruncatedOrbit {
    pub fn build(family: &GeneratorFamily, n_max: usize, budget: u64, jobs: usize) -> Result<Self> {
        if n_max == 0 {
            return Err(precondition("orbit enumeration needs n_max >= 1"));
        }
        let (k, j_max) = (family.k(), family.j_max());
        let total: u128 = (1..=n_max)
            .map(|n| word_count(k, n, j_max))
            .fold(0, u128::saturating_add);
        if total > u128::from(budget) {
            return Err(Error::BudgetExceeded {
                requested: total,
                budget,
            });
        }
        let prec = family.precision();
        let bits = prec.bits();
        let o = UHPoint::origin(prec);
        let next = GeneratorParams::new(j_max + 1, prec)?;
        let big_x = Float::with_val(bits, &next.x_prime - &next.r);
        let alphabet = family.alphabet();

        type Part = (Vec<OrbitPoint>, Vec<(BigReal, GuardRegion)>);
        let run = |root: i32| -> Result<Part> {
            let g = family.generator(root);
            let mut pts = Vec::new();
            let mut regs = Vec::new();
            let start = (
                vec![root],
                g.apply_point(&o),
                CircleTrack::of_circle(family.circle(root)),
                exterior_image(g, &big_x),
            );
            let mut stack = vec![start];
            while let Some((word, point, disk, ext)) = stack.pop() {
                let dist = hyp_distance(&o, &point);
                if word.len() == n_max {
                    let r = GuardRegion::Disk(disk.clone());
                    regs.push((r.distance(&o), r));
                } else {
                    let r = GuardRegion::Disk(ext.clone());
                    regs.push((r.distance(&o), r));
                    for &j in alphabet.iter().rev() {
                        if j == -word[0] {
                            continue;
                        }
                        let h = family.generator(j);
                        let mut w = Vec::with_capacity(word.len() + 1);
                        w.push(j);
                        w.extend_from_slice(&word);
                        stack.push((
                            w,
                            h.apply_point(&point),
                            disk.push_through(h)?,
                            ext.push_through(h)?,
                        ));
                    }
                }
                pts.push(OrbitPoint { word, point, dist });
            }
            Ok((pts, regs))
        };
        let parts: Vec<Result<Part>> =
            pool(jobs)?.install(|| alphabet.par_iter().map(|&r| run(r)).collect());

        let mut points = vec![OrbitPoint {
            word: Vec::new(),
            point: o.clone(),
            dist: Float::new(bits),
        }];
        let ext = GuardRegion::Exterior(big_x);
        let mut regions = vec![(ext.distance(&o), ext)];
        for part in parts {
            let (p, r) = part?;
            points.extend(p);
            regions.extend(r);
        }
        // stable sorts keep the fixed enumeration order among ties
        points.sort_by(|a, b| a.dist.partial_cmp(&b.dist).expect("finite distances"));
        regions.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distances"));
        Ok(TruncatedOrbit {
            k,
            j_max,
            n_max,
            points,
            regions,
        })
    }

    /// Number of enumerated orbit points, identity included.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Every orbit point with `d(o, γ·o)` below this radius is enumerated.
    pub fn completeness_radius(&self) -> &BigReal {
        &self.regions[0].0
    }

    /// `d(o, h_w·o)` in enumeration order sorted by distance.
    pub fn distances(&self) -> impl Iterator<Item = (&[i32], &BigReal)> {
        self.points.iter().map(|p| (p.word.as_slice(), &p.dist))
    }

    /// Nearest enumerated orbit point to `z`, and whether no skipped orbit
    /// point can be closer.
    pub fn nearest(&self, z: &UHPoint) -> (BigReal, Vec<i32>, bool) {
        let o = &self.points[0].point;
        let t = hyp_distance(o, z);
        let mut best = t.clone();
        let mut best_word: &[i32] = &[];
        // |d(o,p) - d(o,z)| <= d(z,p): scan the band around d(o,z)
        let start = self
            .points
            .partition_point(|p| Float::with_val(53, &t - &p.dist) >= best);
        for p in &self.points[start..] {
            if Float::with_val(53, &p.dist - &t) >= best {
                break;
            }
            let d = hyp_distance(z, &p.point);
            if d < best {
                best = d;
                best_word = &p.word;
            }
        }
        // d(z, D) >= d(o, D) - d(o, z)
        let mut exact = true;
        for (d_o, region) in &self.regions {
            if Float::with_val(53, d_o - &t) >= best {
                break;
            }
            if region.distance(z) < best {
                exact = false;
                break;
            }
        }
        (best, best_word.to_vec(), exact)
    }
}

/// Orbit counts `N(R)`, the fitted growth rate and Poincaré partial sums.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitReport {
    pub k: i32,
    pub j_max: i32,
    pub n_max: usize,
    pub budget: u64,
    pub orbit_points: u64,
    pub precision: u32,
    pub completeness_radius: f64,
    pub min_generator_distance: f64,
    pub r_step: f64,
    pub r_grid: Vec<f64>,
    pub counts: Vec<u64>,
    pub delta_hat: Option<f64>,
    pub fit_window: Option<(f64, f64)>,
    pub fit_stderr: Option<f64>,
    /// Slope over every grid point with `N > 1`, for comparison.
    pub delta_full_range: Option<f64>,
    pub s_grid: Vec<f64>,
    /// `poincare[n][i] = Σ_{|w| ≤ n} e^(-s_i d(o, h_w·o))`.
    pub poincare: Vec<Vec<BigNum>>,
}

/// Relative residual `|ln N - fit| / ln N` allowed at every point of the δ̂
/// fitting window.
pub const FIT_RESIDUAL: f64 = 0.05;

/// Counts `N(R)` on `R = step, 2 step, …` up to the completeness radius and
/// fits `ln N(R) ≈ δ R + c` on the longest window where every point obeys
/// `|residual| < 5% · ln N(R)`.
pub fn orbit_count(
    family: &GeneratorFamily,
    n_max: usize,
    r_step: f64,
    s_grid: &[f64],
    budget: u64,
    jobs: usize,
) -> Result<OrbitReport> {
    if !(r_step > 0.0) {
        return Err(precondition("R step must be positive"));
    }
    if s_grid.iter().any(|s| !(*s > 0.0)) {
        return Err(precondition("Poincaré exponents must be positive"));
    }
    let orbit = TruncatedOrbit::build(family, n_max, budget, jobs)?;
    let r_c = orbit.completeness_radius().to_f64();
    let dists: Vec<(usize, f64)> = orbit
        .points
        .iter()
        .map(|p| (p.word.len(), p.dist.to_f64()))
        .collect();
    let min_gen = dists
        .iter()
        .filter(|(l, _)| *l == 1)
        .map(|&(_, d)| d)
        .fold(f64::INFINITY, f64::min);

    let steps = (r_c / r_step).floor() as usize;
    let r_grid: Vec<f64> = (1..=steps).map(|i| i as f64 * r_step).collect();
    let counts: Vec<u64> = r_grid
        .iter()
        .map(|&r| dists.iter().filter(|&&(_, d)| d <= r).count() as u64)
        .collect();

    let bits = family.precision().bits();
    let mut sums = vec![vec![Float::new(bits); s_grid.len()]; n_max + 1];
    for p in &orbit.points {
        for (i, s) in s_grid.iter().enumerate() {
            sums[p.word.len()][i] += Float::with_val(bits, &p.dist * -s).exp();
        }
    }
    for n in 1..=n_max {
        let (done, rest) = sums.split_at_mut(n);
        for (acc, prev) in rest[0].iter_mut().zip(&done[n - 1]) {
            *acc += prev;
        }
    }
    let poincare = sums
        .iter()
        .map(|row| row.iter().map(BigNum::new).collect())
        .collect();

    let fit = fit_growth(&r_grid, &counts);
    let full = {
        let (xs, ys): (Vec<f64>, Vec<f64>) = r_grid
            .iter()
            .zip(&counts)
            .filter(|(_, &n)| n > 1)
            .map(|(&r, &n)| (r, (n as f64).ln()))
            .unzip();
        (xs.len() >= 2).then(|| linear_fit(&xs, &ys).0)
    };
    Ok(OrbitReport {
        k: orbit.k,
        j_max: orbit.j_max,
        n_max,
        budget,
        orbit_points: orbit.len() as u64,
        precision: family.precision().bits(),
        completeness_radius: r_c,
        min_generator_distance: min_gen,
        r_step,
        r_grid,
        counts,
        delta_hat: fit.map(|f| f.0),
        fit_window: fit.map(|f| (f.1, f.2)),
        fit_stderr: fit.map(|f| f.3),
        delta_full_range: full,
        s_grid: s_grid.to_vec(),
        poincare,
    })
}

/// `(slope, R_lo, R_hi, stderr)` over the longest admissible window with
/// `N > 1`, at least three grid points and two distinct counts; ties go to
/// the window reaching the largest `R`.
fn fit_growth(r: &[f64], counts: &[u64]) -> Option<(f64, f64, f64, f64)> {
    let first = counts.iter().position(|&n| n > 1)?;
    let xs = &r[first..];
    let ys: Vec<f64> = counts[first..].iter().map(|&n| (n as f64).ln()).collect();
    let m = xs.len();
    for len in (3..=m).rev() {
        for a in (0..=m - len).rev() {
            let (x, y) = (&xs[a..a + len], &ys[a..a + len]);
            if y.iter().all(|v| *v == y[0]) {
                continue;
            }
            let (slope, icept, stderr) = linear_fit(x, y);
            let ok = x
                .iter()
                .zip(y)
                .all(|(xi, yi)| (yi - icept - slope * xi).abs() < FIT_RESIDUAL * yi);
            if ok {
                return Some((slope, x[0], x[len - 1], stderr));
            }
        }
    }
    None
}

/// `N(R)` table with a comment line naming the grid and budget.
pub fn write_counts_csv(report: &OrbitReport, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(
        out,
        "# k={} j_max={} n_max={} budget={} r_step={} completeness_radius={}",
        report.k,
        report.j_max,
        report.n_max,
        report.budget,
        report.r_step,
        report.completeness_radius
    )?;
    writeln!(out, "R,N")?;
    for (r, n) in report.r_grid.iter().zip(&report.counts) {
        writeln!(out, "{r},{n}")?;
    }
    Ok(())
}

/// `P(s)` table, one row per maximal word length.
pub fn write_poincare_csv(report: &OrbitReport, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(
        out,
        "# k={} j_max={} n_max={} budget={} s_grid={:?}",
        report.k, report.j_max, report.n_max, report.budget, report.s_grid
    )?;
    let head: Vec<String> = report.s_grid.iter().map(|s| format!("s={s}")).collect();
    writeln!(out, "n,{}", head.join(","))?;
    for (n, row) in report.poincare.iter().enumerate() {
        let cells: Vec<&str> = row.iter().map(|v| v.decimal.as_str()).collect();
        writeln!(out, "{n},{}", cells.join(","))?;
    }
    Ok(())
}

/// Finite-horizon escape behavior. The labels describe the sampled profile
/// only; the asymptotic classes cannot be decided from finite data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EscapeClass {
    RadialLike,
    TransientLike,
    LinearEscapeLike { alpha_hat: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeSample {
    pub t: f64,
    pub delta: f64,
    /// Nearest enumerated orbit point, as a word (empty for `o`).
    pub word: Vec<i32>,
    /// No orbit point outside the enumeration can be closer.
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeProfile {
    pub xi: String,
    pub horizon: f64,
    pub step: f64,
    pub k: i32,
    pub j_max: i32,
    pub n_max: usize,
    pub word_budget: u64,
    pub samples: Vec<EscapeSample>,
    pub budget_limited: bool,
    /// Withheld when the profile is budget-limited.
    pub classification: Option<EscapeClass>,
    /// `min Δ̂` over the late half `t ≥ T/2`.
    pub late_min: f64,
    /// `min Δ̂(t)/t` over the late half.
    pub late_rate: f64,
}

/// Late-half minimum at or below which a profile counts as radial-like.
pub const RADIAL_BOUND: f64 = 10.0;
/// Late-half rate from which a profile counts as linear-escape-like.
pub const LINEAR_RATE: f64 = 0.1;

fn xi_label(xi: &BoundaryPoint) -> String {
    match xi {
        BoundaryPoint::Infinity => "inf".to_string(),
        BoundaryPoint::Finite(x) => BigNum::new(x).binary,
    }
}

/// `Δ̂(ξ_t)` on `t = 0, step, …, T` along the ray from `i`, using every
/// orbit point `h_w·i` with `|w|` up to the longest length within budget.
pub fn escape_profile(
    xi: &BoundaryPoint,
    horizon: f64,
    step: f64,
    family: &GeneratorFamily,
    word_budget: u64,
    jobs: usize,
) -> Result<EscapeProfile> {
    if !(horizon > 0.0) || !(step > 0.0) {
        return Err(precondition("horizon and step must be positive"));
    }
    let n_max = max_length_within(family.k(), family.j_max(), word_budget);
    if n_max == 0 {
        return Err(precondition("word budget admits no words"));
    }
    let orbit = TruncatedOrbit::build(family, n_max, word_budget, jobs)?;
    let prec = family.precision();
    let o = UHPoint::origin(prec);
    let steps = (horizon / step).floor() as usize;
    let ts: Vec<f64> = (0..=steps).map(|i| i as f64 * step).collect();
    let samples: Vec<EscapeSample> = pool(jobs)?.install(|| {
        ts.par_iter()
            .map(|&t| {
                let z = geodesic_ray_point(&o, xi, &prec.float(t))?;
                let (d, word, exact) = orbit.nearest(&z);
                Ok(EscapeSample {
                    t,
                    delta: d.to_f64(),
                    word,
                    exact,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let budget_limited = samples.iter().any(|s| !s.exact);
    let late: Vec<&EscapeSample> = samples
        .iter()
        .filter(|s| 2.0 * s.t >= horizon && s.t > 0.0)
        .collect();
    let late_min = late.iter().map(|s| s.delta).fold(f64::INFINITY, f64::min);
    let late_rate = late
        .iter()
        .map(|s| s.delta / s.t)
        .fold(f64::INFINITY, f64::min);
    let classification = (!budget_limited).then_some({
        if late_min <= RADIAL_BOUND {
            EscapeClass::RadialLike
        } else if late_rate >= LINEAR_RATE {
            EscapeClass::LinearEscapeLike {
                alpha_hat: late_rate,
            }
        } else {
            EscapeClass::TransientLike
        }
    });
    Ok(EscapeProfile {
        xi: xi_label(xi),
        horizon,
        step,
        k: family.k(),
        j_max: family.j_max(),
        n_max,
        word_budget,
        samples,
        budget_limited,
        classification,
        late_min,
        late_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Precision;

    #[test]
    fn linear_fit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let (s, c, e) = linear_fit(&xs, &ys);
        assert!((s - 2.0).abs() < 1e-12 && (c - 1.0).abs() < 1e-12 && e < 1e-12);
    }

    #[test]
    fn random_words_are_reduced() {
        let alphabet = [-3, -2, 2, 3];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let w = random_word(&mut rng, &alphabet, 6);
            assert!(w.windows(2).all(|p| p[0] != -p[1]));
        }
    }

    #[test]
    fn exterior_distance_formula() {
        let p = Precision::DEFAULT;
        let r = GuardRegion::Exterior(p.float(4.0));
        let d = r.distance(&UHPoint::origin(p)).to_f64();
        // geodesic |z| = 4 is at distance ln 4 from i
        assert!((d - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn disk_distance_formula() {
        let p = Precision::DEFAULT;
        let t = CircleTrack {
            lo: p.float(-0.5),
            width: p.float(1.0),
        };
        let d = GuardRegion::Disk(t).distance(&UHPoint::origin(p)).to_f64();
        assert!((d - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn k1_refused() {
        let f = GeneratorFamily::new(1, 4).unwrap();
        assert!(matches!(
            certify_hd_upper(2, &f, 1000, 1),
            Err(Error::Precondition(_))
        ));
    }
}
