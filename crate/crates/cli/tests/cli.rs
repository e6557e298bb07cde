use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use limitdim::schottky::{FamilyManifest, GeneratorFamily};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("limitdim-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_limitdim"))
        .args(args)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

/// Paths announced on stdout.
fn written(o: &Output) -> Vec<PathBuf> {
    String::from_utf8_lossy(&o.stdout)
        .lines()
        .filter_map(|l| l.strip_prefix("wrote "))
        .map(PathBuf::from)
        .collect()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn family_manifest_round_trip() {
    let d = scratch("family");
    let o = run(&d, &["family", "--k", "2", "--jmax", "6"]);
    assert_eq!(code(&o), 0);
    let path = &written(&o)[0];
    let m: FamilyManifest = serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap();
    let fam = GeneratorFamily::from_manifest(&m).unwrap();
    assert_eq!(fam.alphabet().len(), 10);
    assert_eq!(
        fam.manifest(),
        GeneratorFamily::new(2, 6).unwrap().manifest()
    );
}

#[test]
fn family_exponent_range() {
    let d = scratch("range");
    assert_eq!(
        code(&run(
            &d,
            &["family", "--k", "2", "--jmax", "6", "--precision", "64"]
        )),
        0
    );
    let o = run(
        &d,
        &["family", "--k", "2", "--jmax", "40", "--precision", "64"],
    );
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn certify_exit_codes() {
    let d = scratch("certify");
    let o = run(&d, &["certify", "--k", "2", "--n", "4", "--jmax", "6"]);
    assert_eq!(code(&o), 0);
    let r = json(&written(&o)[0]);
    assert_eq!(r["alpha_certified"]["binary"], "1*2^-2");
    assert_eq!(code(&run(&d, &["certify", "--k", "1"])), 2);
    assert_eq!(
        code(&run(&d, &["certify", "--k", "2", "--alpha", "0.3"])),
        2
    );
    let o = run(&d, &["certify", "--k", "3", "--n", "3"]);
    assert_eq!(code(&o), 0);
    let a: f64 = json(&written(&o)[0])["alpha_certified"]["decimal"]
        .as_str()
        .unwrap()
        .parse()
        .unwrap();
    assert!((a - 1.0 / 6.0).abs() < 1e-15);
}

#[test]
fn usage_errors_exit_2() {
    let d = scratch("usage");
    assert_eq!(code(&run(&d, &["certify", "--bogus"])), 2);
    assert_eq!(code(&run(&d, &["family", "--precision", "8"])), 2);
    assert_eq!(
        code(&run(
            &d,
            &["render", "--k", "1", "--jmax", "3", "--xmin", "1", "--xmax", "0"]
        )),
        2
    );
    assert_eq!(
        code(&run(
            &d,
            &["render", "--k", "1", "--jmax", "3", "--depth", "0"]
        )),
        2
    );
    assert_eq!(
        code(&run(
            &d,
            &[
                "cover-sum",
                "--k",
                "2",
                "--jmax",
                "6",
                "--n",
                "4",
                "--budget",
                "100"
            ]
        )),
        2
    );
    assert_eq!(code(&run(&d, &["profile", "--k", "2"])), 2);
}

#[test]
fn config_file_and_precedence() {
    let d = scratch("config");
    let cfg = d.join("run.conf");
    std::fs::write(&cfg, "# family settings\nk = 3\njmax = 5\n").unwrap();
    let c = cfg.to_str().unwrap();
    let from_file = run(&d, &["family", "--config", c]);
    assert_eq!(code(&from_file), 0);
    assert_eq!(json(&written(&from_file)[0])["k"], 3);
    let overridden = run(&d, &["family", "--config", c, "--k", "2"]);
    let m = json(&written(&overridden)[0]);
    assert_eq!((m["k"].as_i64(), m["j_max"].as_i64()), (Some(2), Some(5)));
    std::fs::write(&cfg, "colour = red\n").unwrap();
    assert_eq!(code(&run(&d, &["family", "--config", c])), 2);
}

#[test]
fn artifacts_are_never_overwritten() {
    let d = scratch("immutable");
    let a = written(&run(&d, &["mu-sum", "--k", "3"]));
    let b = written(&run(&d, &["mu-sum", "--k", "3", "--jobs", "1"]));
    assert_eq!(a, b);
    let original = std::fs::read(&a[0]).unwrap();
    std::fs::write(&a[0], b"tampered").unwrap();
    let c = written(&run(&d, &["mu-sum", "--k", "3"]));
    assert_ne!(c, a);
    assert_eq!(std::fs::read(&a[0]).unwrap(), b"tampered");
    assert_eq!(std::fs::read(&c[0]).unwrap(), original);
}

#[test]
fn cover_sum_with_word_export() {
    let d = scratch("cover");
    let o = run(
        &d,
        &[
            "cover-sum",
            "--k",
            "2",
            "--jmax",
            "6",
            "--n",
            "3",
            "--alpha",
            "1/4",
            "--csv",
        ],
    );
    assert_eq!(code(&o), 0);
    let files = written(&o);
    let reports = json(&files[0]);
    let counts: Vec<_> = reports
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["word_count"].clone())
        .collect();
    assert_eq!(counts, [10, 90, 810]);
    let csv = std::fs::read_to_string(&files[1]).unwrap();
    assert_eq!(csv.lines().count(), 1 + 810);
}

fn arcs(svg: &str) -> Vec<(String, f64, f64)> {
    svg.lines()
        .filter(|l| l.contains(r#"<path id="w_"#))
        .map(|l| {
            let id = l.split('"').nth(1).unwrap().to_string();
            let d = l
                .split(r#" d=""#)
                .nth(1)
                .unwrap()
                .split('"')
                .next()
                .unwrap();
            let t: Vec<&str> = d.split_whitespace().collect();
            (id, t[1].parse().unwrap(), t[9].parse().unwrap())
        })
        .collect()
}

#[test]
fn render_depth_one_k1() {
    let d = scratch("render1");
    let o = run(&d, &["render", "--k", "1", "--jmax", "3", "--depth", "1"]);
    assert_eq!(code(&o), 0);
    let svg = std::fs::read_to_string(&written(&o)[0]).unwrap();
    assert!(svg.contains(r#"version="1.1""#));
    assert_eq!(arcs(&svg).len(), 6);
    assert!(svg.contains(r#"id="real-axis""#));
}

#[test]
fn render_nesting_and_determinism() {
    let d = scratch("render2");
    // zoom onto C_1 so depth-2 circles are resolvable in f64 pixels
    let args = [
        "render", "--k", "1", "--jmax", "3", "--depth", "2", "--xmin", "1.8", "--xmax", "2.3",
        "--shade",
    ];
    let o = run(&d, &args);
    assert_eq!(code(&o), 0);
    let path = written(&o)[0].clone();
    let svg = std::fs::read_to_string(&path).unwrap();
    assert!(svg.contains("fundamental-domain"));
    let all = arcs(&svg);
    let parent = all.iter().find(|a| a.0 == "w_1").unwrap();
    let children: Vec<_> = all.iter().filter(|a| a.0.starts_with("w_1_")).collect();
    assert_eq!(children.len(), 5);
    for c in children {
        assert!(
            c.1 > parent.1 && c.2 < parent.2,
            "{c:?} not inside {parent:?}"
        );
    }
    let again = run(&d, &args);
    assert_eq!(written(&again)[0], path);
    let d2 = scratch("render3");
    let other = run(&d2, &args);
    assert_eq!(std::fs::read(&written(&other)[0]).unwrap(), svg.as_bytes());
}

#[test]
fn profile_and_boxcount_exit_codes() {
    let d = scratch("profile");
    let o = run(
        &d,
        &[
            "profile",
            "--k",
            "2",
            "--jmax",
            "4",
            "--xi",
            "x2",
            "--horizon",
            "50",
        ],
    );
    assert_eq!(code(&o), 0);
    assert_eq!(json(&written(&o)[0])["classification"], "radial_like");
    let o = run(
        &d,
        &[
            "profile",
            "--k",
            "2",
            "--jmax",
            "4",
            "--xi",
            "c2,3,2",
            "--horizon",
            "120",
            "--step",
            "4",
        ],
    );
    assert_eq!(code(&o), 1);
    assert_eq!(json(&written(&o)[0])["budget_limited"], true);
    let o = run(
        &d,
        &["boxcount", "--k", "2", "--jmax", "6", "--count", "2000"],
    );
    assert_eq!(code(&o), 0);
    // fewer than ten octaves
    assert_eq!(
        code(&run(
            &d,
            &[
                "boxcount",
                "--k",
                "2",
                "--count",
                "1000",
                "--scale-max",
                "10"
            ]
        )),
        2
    );
}

#[test]
fn orbit_writes_tables() {
    let d = scratch("orbit");
    let o = run(
        &d,
        &[
            "orbit", "--k", "2", "--jmax", "5", "--budget", "20000", "--s-grid", "0.25,0.5",
        ],
    );
    let files = written(&o);
    assert_eq!(files.len(), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let counts = std::fs::read_to_string(&files[1]).unwrap();
    assert!(counts.starts_with('#'));
    assert_eq!(counts.lines().nth(1), Some("R,N"));
    let poincare = std::fs::read_to_string(&files[2]).unwrap();
    assert!(poincare.lines().any(|l| l.contains("0.25")));
}
