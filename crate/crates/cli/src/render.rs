//! SVG 1.1 rendering of the word-circle hierarchy.

use std::fmt::Write;

use limitdim::schottky::GeneratorFamily;
use limitdim::words::{enumerate_reduced, word_count, word_track};
use limitdim::{BigReal, Error, Result};
use rug::Float;

const WIDTH_PX: f64 = 1200.0;
const PALETTE: [&str; 6] = [
    "#1f4e9c", "#c0392b", "#1e8449", "#8e44ad", "#d68910", "#117a65",
];

pub struct RenderSpec {
    pub depth: usize,
    pub x_min: BigReal,
    pub x_max: BigReal,
    pub height: BigReal,
    pub stroke: f64,
    pub shade: bool,
    pub budget: u64,
}

impl RenderSpec {
    /// Viewport covering every base circle of the family.
    pub fn default_viewport(family: &GeneratorFamily) -> (BigReal, BigReal, BigReal) {
        let p = family.params(family.j_max());
        let bits = family.precision().bits();
        let reach = Float::with_val(bits, &p.x_prime + &p.r) * 1.05;
        let height = Float::with_val(bits, &reach / 2u32);
        (Float::with_val(bits, -&reach), reach, height)
    }
}

fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e12).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn word_id(letters: &[i32]) -> String {
    let parts: Vec<String> = letters
        .iter()
        .map(|j| {
            if *j < 0 {
                format!("m{}", -j)
            } else {
                j.to_string()
            }
        })
        .collect();
    format!("w_{}", parts.join("_"))
}

pub fn render_svg(family: &GeneratorFamily, spec: &RenderSpec) -> Result<String> {
    if spec.depth == 0 {
        return Err(Error::Precondition("render depth must be >= 1".into()));
    }
    if spec.x_max <= spec.x_min || !(spec.height > 0) {
        return Err(Error::Precondition("empty viewport".into()));
    }
    let (k, j_max) = (family.k(), family.j_max());
    let total: u128 = (1..=spec.depth).map(|n| word_count(k, n, j_max)).sum();
    if total > u128::from(spec.budget) {
        return Err(Error::BudgetExceeded {
            requested: total,
            budget: spec.budget,
        });
    }
    let bits = family.precision().bits();
    let span = Float::with_val(bits, &spec.x_max - &spec.x_min);
    let scale = Float::with_val(bits, WIDTH_PX) / &span;
    let h_px = Float::with_val(bits, &spec.height * &scale)
        .to_f64()
        .round()
        .max(1.0);
    let px = |x: &BigReal| (Float::with_val(bits, x - &spec.x_min) * &scale).to_f64();

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = num(WIDTH_PX),
        h = num(h_px)
    );
    let _ = writeln!(
        svg,
        "<desc>k={k} J_max={j_max} depth={} x=[{}, {}] height={}</desc>",
        spec.depth,
        spec.x_min.to_string_radix(10, Some(12)),
        spec.x_max.to_string_radix(10, Some(12)),
        spec.height.to_string_radix(10, Some(12))
    );

    let mut arcs: Vec<(usize, String, f64, f64, f64)> = Vec::new();
    for n in 1..=spec.depth {
        for w in enumerate_reduced(k, n, j_max)? {
            let t = word_track(&w, family)?;
            let a = px(&t.lo);
            let b = px(&Float::with_val(bits, &t.lo + &t.width));
            let r = (Float::with_val(bits, &t.width / 2u32) * &scale).to_f64();
            arcs.push((n, word_id(w.letters()), a, b, r));
        }
    }

    if spec.shade {
        let _ = writeln!(svg, r##"<g id="fundamental-domain" stroke="none">"##);
        let _ = writeln!(
            svg,
            r##"<rect x="0" y="0" width="{}" height="{}" fill="#eef3fb"/>"##,
            num(WIDTH_PX),
            num(h_px)
        );
        for (_, _, a, b, r) in arcs.iter().filter(|a| a.0 == 1) {
            let _ = writeln!(
                svg,
                r##"<path d="M {} {y} A {r} {r} 0 0 1 {} {y} Z" fill="#ffffff"/>"##,
                num(*a),
                num(*b),
                y = num(h_px),
                r = num(*r)
            );
        }
        let _ = writeln!(svg, "</g>");
    }
    let _ = writeln!(
        svg,
        r##"<line id="real-axis" x1="0" y1="{y}" x2="{}" y2="{y}" stroke="#000000" stroke-width="{}"/>"##,
        num(WIDTH_PX),
        num(spec.stroke),
        y = num(h_px)
    );
    for (n, id, a, b, r) in &arcs {
        let _ = writeln!(
            svg,
            r#"<path id="{id}" class="depth{n}" d="M {} {y} A {r} {r} 0 0 1 {} {y}" fill="none" stroke="{}" stroke-width="{}"/>"#,
            num(*a),
            num(*b),
            PALETTE[(n - 1) % PALETTE.len()],
            num(spec.stroke / *n as f64),
            y = num(h_px),
            r = num(*r)
        );
    }
    let _ = writeln!(svg, "</svg>");
    Ok(svg)
}
