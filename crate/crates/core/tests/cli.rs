use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "\
seed = 5
grid.n = 32
pde.dt = 0.01
gramian.m = 9
walk.samples = 20000
walk.horizon = 2000
equilibria.random_starts = 4
equilibria.radii = 0.2
equilibria.radius_samples = 2
equilibria.radius_horizon = 5
";

fn mixlab(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_mixlab"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .arg("--quiet")
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn walk_writes_table_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = mixlab(dir.path(), SMALL, &["walk"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = fs::read_to_string(dir.path().join("out/walk_table.csv")).unwrap();
    assert!(table.lines().count() > 3);
    let manifest = fs::read_to_string(dir.path().join("out/walk.manifest")).unwrap();
    for key in ["command", "seed", "status", "walk.p"] {
        assert!(manifest.contains(key), "manifest lacks {key}:\n{manifest}");
    }
}

#[test]
fn equilibria_finds_the_three_constants() {
    let dir = tempfile::tempdir().unwrap();
    let o = mixlab(dir.path(), SMALL, &["equilibria"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("out/equilibria.csv")).unwrap();
    let rows = csv.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 4, "{csv}");
}

#[test]
fn seed_override_changes_noise() {
    let dir = tempfile::tempdir().unwrap();
    let read = |seed: &str| {
        let o = mixlab(dir.path(), SMALL, &["--seed", seed, "sample-noise"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        fs::read_to_string(dir.path().join("out/noise_kick_0.csv")).unwrap()
    };
    let (a, b, c) = (read("1"), read("2"), read("1"));
    assert_eq!(a, c);
    assert_ne!(a, b);
}

#[test]
fn decay_at_most_one_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = mixlab(dir.path(), &format!("{SMALL}noise.decay = 1\n"), &["sample-noise"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("q > 1"), "{}", stderr(&o));
}

#[test]
fn syntax_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let o = mixlab(dir.path(), "seed = 1\nbogus.key = 3\n", &["walk"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    let o = mixlab(dir.path(), "grid.n = 30\n", &["walk"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_mixlab")).arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}
