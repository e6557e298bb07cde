#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod output;
mod render;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use limitdim::boundary::{check_kaimanovich, check_lemma_main1, check_lemma_main2};
use limitdim::dimension::{
    box_count_limit_set, certify_hd_upper, escape_profile, max_length_within, orbit_count,
    write_counts_csv, write_poincare_csv, EscapeClass,
};
use limitdim::hyperbolic::BoundaryPoint;
use limitdim::schottky::{pairing_check, GeneratorFamily};
use limitdim::words::{
    check_mu_sum, contraction_sweep, covering_sums_upto, export_words_csv, word_track, ReducedWord,
    DEFAULT_BUDGET,
};
use limitdim::{BigReal, Error, Precision};
use rug::Float;

use config::ConfigFile;
use output::RunOutput;
use render::{render_svg, RenderSpec};

#[derive(Parser)]
#[command(
    name = "limitdim",
    version,
    about = "Schottky-type Fuchsian groups: certificates, oracles and renderings"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Smallest generator index |j|.
    #[arg(long, global = true)]
    k: Option<i32>,
    /// Largest generator index kept.
    #[arg(long, global = true)]
    jmax: Option<i32>,
    /// Maximal word length.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Exponent override for cover-sum, as a decimal or p/q.
    #[arg(long, global = true)]
    alpha: Option<String>,
    /// Working precision in bits (default: enough for the alphabet).
    #[arg(long, global = true)]
    precision: Option<u32>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap on enumerated words.
    #[arg(long, global = true)]
    budget: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Flat key = value file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write the generator family manifest.
    Family,
    /// Hausdorff-dimension certificate at α = 1/(2k).
    Certify,
    /// Covering sums Σ r_w^α for word lengths 1..=n.
    CoverSum {
        /// Also export the length-n word circles as CSV.
        #[arg(long)]
        csv: bool,
    },
    /// Contraction-constant sum over k < |i|, |j|.
    MuSum,
    /// Pairing, contraction and boundary comparison checks.
    VerifyLemmas(LemmaArgs),
    /// Box-counting slope of sampled limit points.
    Boxcount(BoxArgs),
    /// Orbit counts N(R), critical-exponent fit and Poincaré sums.
    Orbit(OrbitArgs),
    /// Distance from a ray to the orbit, Δ(ξ_t).
    Profile(ProfileArgs),
    /// SVG of the word circles up to a depth.
    Render(RenderArgs),
}

#[derive(Args)]
struct LemmaArgs {
    #[arg(long)]
    samples: Option<u64>,
    /// (ξ, t) pairs for the shadow sandwich.
    #[arg(long)]
    pairs: Option<u64>,
    #[arg(long)]
    beta_distance: Option<f64>,
    #[arg(long)]
    beta_ray: Option<f64>,
    #[arg(long)]
    min_scale: Option<f64>,
    #[arg(long)]
    shadow_c: Option<f64>,
}

#[derive(Args)]
struct BoxArgs {
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    count: Option<usize>,
    /// Coarsest scale 2^-s.
    #[arg(long)]
    scale_min: Option<i32>,
    /// Finest scale 2^-s.
    #[arg(long)]
    scale_max: Option<i32>,
}

#[derive(Args)]
struct OrbitArgs {
    #[arg(long)]
    r_step: Option<f64>,
    /// Comma-separated Poincaré exponents.
    #[arg(long)]
    s_grid: Option<String>,
}

#[derive(Args)]
struct ProfileArgs {
    /// Boundary point: a number, `inf`, `x<j>` (attracting fixed point of
    /// h_j) or `c<j1,j2,...>` (center of a word circle).
    #[arg(long, allow_hyphen_values = true)]
    xi: Option<String>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    xmin: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    xmax: Option<String>,
    #[arg(long)]
    height: Option<String>,
    #[arg(long)]
    stroke: Option<f64>,
    /// Shade the fundamental domain.
    #[arg(long)]
    shade: bool,
}

const CONFIG_KEYS: &[&str] = &[
    "k",
    "jmax",
    "n",
    "alpha",
    "precision",
    "seed",
    "budget",
    "jobs",
    "out",
    "csv",
    "samples",
    "pairs",
    "beta-distance",
    "beta-ray",
    "min-scale",
    "shadow-c",
    "depth",
    "count",
    "scale-min",
    "scale-max",
    "r-step",
    "s-grid",
    "xi",
    "horizon",
    "step",
    "xmin",
    "xmax",
    "height",
    "stroke",
    "shade",
];

enum Fail {
    Usage(String),
    Lib(Error),
    Io(std::io::Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

impl From<std::io::Error> for Fail {
    fn from(e: std::io::Error) -> Self {
        Fail::Io(e)
    }
}

impl From<String> for Fail {
    fn from(e: String) -> Self {
        Fail::Usage(e)
    }
}

impl Fail {
    fn code(&self) -> u8 {
        match self {
            Fail::Usage(_) => 2,
            Fail::Lib(Error::Precondition(_) | Error::BudgetExceeded { .. }) => 2,
            Fail::Lib(Error::DegenerateFit(_)) => 1,
            Fail::Lib(_) | Fail::Io(_) => 3,
        }
    }

    fn message(&self) -> String {
        match self {
            Fail::Usage(m) => m.clone(),
            Fail::Lib(e) => e.to_string(),
            Fail::Io(e) => format!("i/o: {e}"),
        }
    }
}

/// Settings shared by every command after merging flags and config.
struct Run {
    cfg: ConfigFile,
    k: i32,
    jmax: Option<i32>,
    n: Option<usize>,
    alpha: Option<String>,
    precision: Option<u32>,
    seed: u64,
    budget: Option<u64>,
    out: PathBuf,
    jobs: usize,
    params: BTreeMap<&'static str, String>,
}

impl Run {
    fn new(c: Common) -> Result<Self, Fail> {
        let cfg = match &c.config {
            Some(p) => ConfigFile::load(p, CONFIG_KEYS)?,
            None => ConfigFile::default(),
        };
        let default_jobs = std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1);
        let run = Run {
            k: cfg.pick(c.k, "k")?.unwrap_or(2),
            jmax: cfg.pick(c.jmax, "jmax")?,
            n: cfg.pick(c.n, "n")?,
            alpha: cfg.pick(c.alpha, "alpha")?,
            precision: cfg.pick(c.precision, "precision")?,
            seed: cfg.pick(c.seed, "seed")?.unwrap_or(1),
            budget: cfg.pick(c.budget, "budget")?,
            out: cfg
                .pick(c.out, "out")?
                .unwrap_or_else(|| PathBuf::from("out")),
            jobs: cfg.pick(c.jobs, "jobs")?.unwrap_or(default_jobs).max(1),
            params: BTreeMap::new(),
            cfg,
        };
        if let Some(bits) = run.precision {
            Precision::new(bits)?;
        }
        Ok(run)
    }

    fn param(&mut self, key: &'static str, value: impl ToString) {
        self.params.insert(key, value.to_string());
    }

    fn family(&mut self, default_span: i32) -> Result<GeneratorFamily, Fail> {
        let jmax = self.jmax.unwrap_or(self.k + default_span);
        self.param("k", self.k);
        self.param("jmax", jmax);
        let fam = match self.precision {
            Some(bits) => GeneratorFamily::with_precision(self.k, jmax, Precision::new(bits)?)?,
            None => GeneratorFamily::new(self.k, jmax)?,
        };
        self.param("precision", fam.precision().bits());
        Ok(fam)
    }

    fn output(&self, command: &str) -> RunOutput {
        RunOutput::new(&self.out, command, &self.params)
    }

    fn reject_alpha(&self, command: &str) -> Result<(), Fail> {
        if self.alpha.is_some() {
            return Err(Fail::Usage(format!(
                "{command} fixes α = 1/(2k); --alpha is not accepted"
            )));
        }
        Ok(())
    }
}

fn parse_alpha(s: &str, prec: Precision) -> Result<BigReal, Fail> {
    let v = match s.split_once('/') {
        Some((p, q)) => {
            let p = prec.parse(p)?;
            let q = prec.parse(q)?;
            Float::with_val(prec.bits(), &p / &q)
        }
        None => prec.parse(s)?,
    };
    if !(v > 0) {
        return Err(Fail::Usage(format!("α must be positive, got {s}")));
    }
    Ok(v)
}

fn parse_grid(s: &str) -> Result<Vec<f64>, Fail> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Fail::Usage(format!("bad grid value {t:?}: {e}")))
        })
        .collect()
}

fn parse_xi(s: &str, family: &GeneratorFamily) -> Result<BoundaryPoint, Fail> {
    let prec = family.precision();
    if let Some(j) = s.strip_prefix('x') {
        let j: i32 = j
            .parse()
            .map_err(|_| Fail::Usage(format!("bad generator index in {s:?}")))?;
        if !family.contains(j) {
            return Err(Fail::Usage(format!("generator {j} is not in the family")));
        }
        let x = &family.params(j).x;
        return Ok(BoundaryPoint::Finite(if j > 0 {
            x.clone()
        } else {
            Float::with_val(prec.bits(), -x)
        }));
    }
    if let Some(w) = s.strip_prefix('c') {
        let letters: Vec<i32> = w
            .split(',')
            .map(|t| {
                t.trim()
                    .parse()
                    .map_err(|_| Fail::Usage(format!("bad word {s:?}")))
            })
            .collect::<Result<_, _>>()?;
        let word = ReducedWord::new(letters, family.k())?;
        return Ok(BoundaryPoint::Finite(word_track(&word, family)?.center()));
    }
    if s == "inf" {
        return Ok(BoundaryPoint::Infinity);
    }
    Ok(BoundaryPoint::Finite(prec.parse(s)?))
}

fn announce(path: &std::path::Path) {
    println!("wrote {}", path.display());
}

fn cmd_family(run: &mut Run) -> Result<u8, Fail> {
    let fam = run.family(4)?;
    let path = run.output("family").write_json(None, &fam.manifest())?;
    announce(&path);
    println!("generators {}", fam.alphabet().len());
    Ok(0)
}

fn cmd_certify(run: &mut Run) -> Result<u8, Fail> {
    run.reject_alpha("certify")?;
    let fam = run.family(GeneratorFamily::DEFAULT_SPAN)?;
    let n = run.n.unwrap_or(3);
    let budget = run.budget.unwrap_or(DEFAULT_BUDGET);
    run.param("n", n);
    run.param("budget", budget);
    let report = certify_hd_upper(n, &fam, budget, run.jobs)?;
    announce(&run.output("certify").write_json(None, &report)?);
    match &report.alpha_certified {
        Some(a) => {
            println!(
                "certificate passed: HD <= alpha = {} ({})",
                a.decimal, a.binary
            );
            Ok(0)
        }
        None => {
            println!(
                "certificate failed: {}",
                report.violation.as_deref().unwrap_or("unknown")
            );
            Ok(1)
        }
    }
}

fn cmd_cover_sum(run: &mut Run, csv: bool) -> Result<u8, Fail> {
    let csv = run.cfg.flag(csv, "csv")?;
    let fam = run.family(4)?;
    let n = run.n.unwrap_or(3);
    let budget = run.budget.unwrap_or(DEFAULT_BUDGET);
    let prec = fam.precision();
    let alpha = match &run.alpha {
        Some(s) => parse_alpha(s, prec)?,
        None => Float::with_val(prec.bits(), 1u32) / (2 * run.k.max(1) as u32),
    };
    run.param("n", n);
    run.param("budget", budget);
    run.param("alpha", limitdim::num::binary_string(&alpha));
    let reports = covering_sums_upto(n, &alpha, &fam, budget, run.jobs)?;
    let out = run.output("cover-sum");
    announce(&out.write_json(None, &reports)?);
    if csv {
        let mut buf = Vec::new();
        export_words_csv(n, &fam, budget, &mut buf)?;
        announce(&out.write(Some("words"), "csv", &buf)?);
    }
    let mut monotone = true;
    for w in reports.windows(2) {
        if w[1].truncated_sum.to_big(prec)? > w[0].truncated_sum.to_big(prec)? {
            monotone = false;
        }
    }
    for r in &reports {
        println!(
            "S({}) = {} (+ tail <= {})",
            r.n, r.truncated_sum.decimal, r.tail_bound.decimal
        );
    }
    println!("non-increasing: {monotone}");
    Ok(if monotone { 0 } else { 1 })
}

fn cmd_mu_sum(run: &mut Run) -> Result<u8, Fail> {
    run.reject_alpha("mu-sum")?;
    let fam = run.family(GeneratorFamily::DEFAULT_SPAN)?;
    let report = check_mu_sum(&fam)?;
    announce(&run.output("mu-sum").write_json(None, &report)?);
    println!(
        "mu-sum total {} (tail <= {}), reference {} : pass {} within reference {}",
        report.total.decimal,
        report.tail_bound.decimal,
        report.reference_bound.decimal,
        report.pass,
        report.within_reference
    );
    Ok(if report.pass { 0 } else { 1 })
}

fn cmd_verify_lemmas(run: &mut Run, a: LemmaArgs) -> Result<u8, Fail> {
    let cfg = &run.cfg;
    let samples = cfg.pick(a.samples, "samples")?.unwrap_or(10_000);
    let pairs = cfg.pick(a.pairs, "pairs")?.unwrap_or(1_000);
    let beta_d = cfg.pick(a.beta_distance, "beta-distance")?.unwrap_or(0.15);
    let beta_r = cfg.pick(a.beta_ray, "beta-ray")?.unwrap_or(0.1);
    let min_scale = cfg.pick(a.min_scale, "min-scale")?.unwrap_or(10.0);
    let c = cfg.pick(a.shadow_c, "shadow-c")?.unwrap_or(10.0);
    let fam = run.family(2)?;
    let n = run.n.unwrap_or(3);
    for (key, v) in [
        ("n", n.to_string()),
        ("samples", samples.to_string()),
        ("pairs", pairs.to_string()),
        ("beta-distance", beta_d.to_string()),
        ("beta-ray", beta_r.to_string()),
        ("min-scale", min_scale.to_string()),
        ("shadow-c", c.to_string()),
        ("seed", run.seed.to_string()),
    ] {
        run.param(key, v);
    }
    let out = run.output("verify-lemmas");
    let mut failed = Vec::new();

    let pairing: Vec<_> = (1..=12)
        .map(|j| pairing_check(j, Precision::DEFAULT))
        .collect::<Result<_, _>>()?;
    if !pairing.iter().all(|r| r.pass) {
        failed.push("pairing");
    }
    announce(&out.write_json(Some("pairing"), &pairing)?);

    let sweep = contraction_sweep(&fam, n)?;
    if !sweep.pass() {
        failed.push("contraction");
    }
    announce(&out.write_json(Some("contraction"), &sweep)?);

    let seed = run.seed;
    let checks = [
        (
            "distance_comparison",
            check_lemma_main1(samples, beta_d, 1.0, seed)?,
        ),
        (
            "ray_comparison",
            check_lemma_main2(samples, beta_r, min_scale, seed)?,
        ),
        (
            "shadow_sandwich",
            check_kaimanovich((1.0, 40.0), pairs, c, seed)?,
        ),
    ];
    for (name, report) in checks {
        println!(
            "{name}: {} samples, {} failures",
            report.samples, report.failures
        );
        if !report.pass() {
            failed.push(name);
        }
        announce(&out.write_json(Some(name), &report)?);
    }
    println!(
        "pairing j=1..12 pass {}; contraction: {} words, {} violations",
        !failed.contains(&"pairing"),
        sweep.words,
        sweep.violations
    );
    if failed.is_empty() {
        Ok(0)
    } else {
        eprintln!("failed: {}", failed.join(", "));
        Ok(1)
    }
}

fn cmd_boxcount(run: &mut Run, a: BoxArgs) -> Result<u8, Fail> {
    let cfg = &run.cfg;
    let depth = cfg.pick(a.depth, "depth")?.unwrap_or(5);
    let count = cfg.pick(a.count, "count")?.unwrap_or(10_000);
    let s0 = cfg.pick(a.scale_min, "scale-min")?.unwrap_or(5);
    let s1 = cfg.pick(a.scale_max, "scale-max")?.unwrap_or(30);
    let fam = run.family(4)?;
    for (key, v) in [
        ("depth", depth.to_string()),
        ("count", count.to_string()),
        ("scale-min", s0.to_string()),
        ("scale-max", s1.to_string()),
        ("seed", run.seed.to_string()),
    ] {
        run.param(key, v);
    }
    let report = box_count_limit_set(&fam, depth, count, run.seed, s0..=s1)?;
    announce(&run.output("boxcount").write_json(None, &report)?);
    println!(
        "box slope {:.4} (band {:.4}..{:.4}); bound 1/(2k) = {:.4} + slack {}: pass {}",
        report.estimate.slope,
        report.estimate.band.0,
        report.estimate.band.1,
        report.certificate_bound,
        report.slack,
        report.pass
    );
    Ok(if report.pass { 0 } else { 1 })
}

/// δ̂ may exceed the certified bound by this much before the run fails.
const DELTA_SLACK: f64 = 0.05;

fn cmd_orbit(run: &mut Run, a: OrbitArgs) -> Result<u8, Fail> {
    let r_step = run.cfg.pick(a.r_step, "r-step")?.unwrap_or(0.5);
    let s_grid = parse_grid(
        &run.cfg
            .pick(a.s_grid, "s-grid")?
            .unwrap_or_else(|| "0.1,0.2,0.3,0.5,1".into()),
    )?;
    let fam = run.family(6)?;
    let budget = run.budget.unwrap_or(100_000);
    let n = run
        .n
        .unwrap_or_else(|| max_length_within(fam.k(), fam.j_max(), budget));
    run.param("n", n);
    run.param("budget", budget);
    run.param("r-step", r_step);
    run.param("s-grid", format!("{s_grid:?}"));
    let report = orbit_count(&fam, n, r_step, &s_grid, budget, run.jobs)?;
    let out = run.output("orbit");
    announce(&out.write_json(None, &report)?);
    let mut buf = Vec::new();
    write_counts_csv(&report, &mut buf)?;
    announce(&out.write(Some("counts"), "csv", &buf)?);
    let mut buf = Vec::new();
    write_poincare_csv(&report, &mut buf)?;
    announce(&out.write(Some("poincare"), "csv", &buf)?);
    let bound = 1.0 / (2.0 * f64::from(fam.k())) + DELTA_SLACK;
    match (report.delta_hat, report.fit_window) {
        (Some(d), Some((lo, hi))) => {
            println!(
                "delta_hat {d:.4} on R in [{lo}, {hi}] (full range {:.4}); completeness radius {:.2}; bound {bound:.3}",
                report.delta_full_range.unwrap_or(f64::NAN),
                report.completeness_radius
            );
            Ok(if d <= bound { 0 } else { 1 })
        }
        _ => {
            println!(
                "no admissible fitting window below R = {:.2}",
                report.completeness_radius
            );
            Ok(1)
        }
    }
}

fn cmd_profile(run: &mut Run, a: ProfileArgs) -> Result<u8, Fail> {
    let xi_s = run
        .cfg
        .pick(a.xi, "xi")?
        .ok_or_else(|| Fail::Usage("profile needs --xi".into()))?;
    let horizon = run.cfg.pick(a.horizon, "horizon")?.unwrap_or(60.0);
    let step = run.cfg.pick(a.step, "step")?.unwrap_or(0.5);
    let fam = run.family(2)?;
    let budget = run.budget.unwrap_or(10_000);
    let xi = parse_xi(&xi_s, &fam)?;
    run.param("xi", &xi_s);
    run.param("horizon", horizon);
    run.param("step", step);
    run.param("budget", budget);
    let prof = escape_profile(&xi, horizon, step, &fam, budget, run.jobs)?;
    announce(&run.output("profile").write_json(None, &prof)?);
    match &prof.classification {
        None => {
            println!("budget-limited: the truncation guard failed; classification withheld");
            Ok(1)
        }
        Some(c) => {
            let label = match c {
                EscapeClass::RadialLike => "radial-like".to_string(),
                EscapeClass::TransientLike => "transient-like".to_string(),
                EscapeClass::LinearEscapeLike { alpha_hat } => {
                    format!("linear-escape-like (alpha_hat {alpha_hat:.3})")
                }
            };
            println!(
                "{label} at horizon {horizon}: late min {:.3}, late rate {:.3}",
                prof.late_min, prof.late_rate
            );
            Ok(0)
        }
    }
}

fn cmd_render(run: &mut Run, a: RenderArgs) -> Result<u8, Fail> {
    let cfg = run.cfg.clone();
    let depth = cfg.pick(a.depth, "depth")?.unwrap_or(1);
    let stroke = cfg.pick(a.stroke, "stroke")?.unwrap_or(1.0);
    let shade = cfg.flag(a.shade, "shade")?;
    let fam = run.family(2)?;
    let prec = fam.precision();
    let (dx0, dx1, dh) = RenderSpec::default_viewport(&fam);
    let big = |v: Option<String>, d: BigReal| -> Result<BigReal, Fail> {
        match v {
            Some(s) => Ok(prec.parse(&s)?),
            None => Ok(d),
        }
    };
    let spec = RenderSpec {
        depth,
        x_min: big(cfg.pick(a.xmin, "xmin")?, dx0)?,
        x_max: big(cfg.pick(a.xmax, "xmax")?, dx1)?,
        height: big(cfg.pick(a.height, "height")?, dh)?,
        stroke,
        shade,
        budget: run.budget.unwrap_or(100_000),
    };
    if spec.x_max <= spec.x_min || !(spec.height > 0) {
        return Err(Fail::Usage("empty viewport".into()));
    }
    run.param("depth", depth);
    run.param("stroke", stroke);
    run.param("shade", shade);
    run.param("budget", spec.budget);
    run.param("xmin", limitdim::num::binary_string(&spec.x_min));
    run.param("xmax", limitdim::num::binary_string(&spec.x_max));
    run.param("height", limitdim::num::binary_string(&spec.height));
    let svg = render_svg(&fam, &spec)?;
    announce(&run.output("render").write(None, "svg", svg.as_bytes())?);
    Ok(0)
}

fn dispatch(cli: Cli) -> Result<u8, Fail> {
    let mut run = Run::new(cli.common)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(run.jobs)
        .build_global()
        .map_err(|e| Fail::Usage(format!("cannot start worker pool: {e}")))?;
    match cli.cmd {
        Cmd::Family => cmd_family(&mut run),
        Cmd::Certify => cmd_certify(&mut run),
        Cmd::CoverSum { csv } => cmd_cover_sum(&mut run, csv),
        Cmd::MuSum => cmd_mu_sum(&mut run),
        Cmd::VerifyLemmas(a) => cmd_verify_lemmas(&mut run, a),
        Cmd::Boxcount(a) => cmd_boxcount(&mut run, a),
        Cmd::Orbit(a) => cmd_orbit(&mut run, a),
        Cmd::Profile(a) => cmd_profile(&mut run, a),
        Cmd::Render(a) => cmd_render(&mut run, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
