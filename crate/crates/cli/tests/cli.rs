use std::path::Path;
use std::process::{Command, Output};

fn supmeas(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_supmeas"))
        .args(args)
        .current_dir(dir)
        .env_remove("SUPMEAS_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const SQUARE: &str = r#"kind = "vpolytope"
vertices = [[0, 0], [1, 0], [1, 1], [0, 1]]
"#;

const LADDER: &str = r#"samples = 3000
ladder = [0.2, 0.1, 0.05]

[body]
kind = "vpolytope"
vertices = [[0, 0], [1, 0], [1, 1], [0, 1]]

[family]
kind = "translate"
direction = [1, 0]
"#;

#[test]
fn distance_of_a_measure_to_itself_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("sq.toml"), SQUARE).unwrap();
    let o = supmeas(&["measure", "sq.toml", "--samples", "2000", "--out", "sq"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("# supmeas masses v1\nindex,mass,stderr,atoms\n0,"));
    let o = supmeas(&["dbl", "sq1.msr", "sq1.msr"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "0.0\n");
    let o = supmeas(&["dbl", "sq0.msr", "sq1.msr", "--format", "json"], dir.path());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["dbl"].as_f64().unwrap() > 0.0);
}

#[test]
fn hausdorff_of_translates() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.toml"), "kind = \"ball\"\ncenter = [0, 0]\nradius = 1\n").unwrap();
    std::fs::write(dir.path().join("b.toml"), "kind = \"ball\"\ncenter = [0.5, 0]\nradius = 1\n").unwrap();
    let o = supmeas(&["hausdorff", "a.toml", "b.toml", "--format", "csv"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!(row[0] <= 0.5 + 1e-12 && row[1] >= 0.5 - 1e-12 && row[1] - row[0] < 1e-3);
}

#[test]
fn ladder_csv_is_reproducible_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("caps.cfg"), LADDER).unwrap();
    let run = |extra: &[&str]| {
        let mut args = vec!["theorem1", "--config", "caps.cfg", "--seed", "7"];
        args.extend_from_slice(extra);
        let o = supmeas(&args, dir.path());
        assert!(matches!(o.status.code(), Some(0) | Some(2)), "{}", String::from_utf8_lossy(&o.stderr));
        stdout(&o)
    };
    let a = run(&[]);
    assert!(a.starts_with("# supmeas theorem1 v1\n"));
    assert_eq!(a, run(&[]));
    assert_eq!(run(&["--workers", "1"]), run(&["--workers", "8"]));
}

#[test]
fn seed_comes_from_the_environment_when_not_given() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("caps.cfg"), LADDER.replace("3000", "1500")).unwrap();
    let env_run = Command::new(env!("CARGO_BIN_EXE_supmeas"))
        .args(["theorem1", "--config", "caps.cfg"])
        .current_dir(dir.path())
        .env("SUPMEAS_SEED", "11")
        .output()
        .unwrap();
    let flag_run = supmeas(&["theorem1", "--config", "caps.cfg", "--seed", "11"], dir.path());
    assert_eq!(env_run.stdout, flag_run.stdout);
    assert!(stdout(&flag_run).contains(",1500,11,"));
}

#[test]
fn tightness_table_has_the_documented_schema() {
    let dir = tempfile::tempdir().unwrap();
    let o = supmeas(
        &["tightness", "--n", "3", "--i", "1", "--grid", "0.3,0.2", "--samples", "3000"],
        dir.path(),
    );
    assert!(matches!(o.status.code(), Some(0) | Some(2)));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# supmeas tightness v1"));
    assert_eq!(
        lines.next(),
        Some("n,i,h,N,gap_analytic,lip_measured,lower_bound,dH_bound,dbl_empirical,mc_stderr")
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    for r in rows {
        assert_eq!(r.split(',').count(), 10);
        assert!(r.starts_with("3,1,"));
    }
}

#[test]
fn coupling_inequality_for_two_bodies() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("sq.toml"), SQUARE).unwrap();
    std::fs::write(dir.path().join("round.toml"), format!("{SQUARE}outer_radius = 0.1\n")).unwrap();
    let o = supmeas(&["lemma41", "sq.toml", "round.toml", "--rho", "0.5", "--samples", "1000"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let row = text.lines().nth(2).unwrap();
    assert!(row.contains(",true,"));
}

#[test]
fn usage_and_operational_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = supmeas(&["frobnicate"], dir.path());
    assert_eq!(o.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Commands:"));
    assert_eq!(supmeas(&["tightness", "--n", "x", "--i", "1"], dir.path()).status.code(), Some(64));
    assert_eq!(supmeas(&["dbl", "missing.msr", "missing.msr"], dir.path()).status.code(), Some(1));
    assert_eq!(supmeas(&["theorem1"], dir.path()).status.code(), Some(1));
    std::fs::write(dir.path().join("bad.msr"), "supmeas-measure 9\n").unwrap();
    let o = supmeas(&["dbl", "bad.msr", "bad.msr"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unsupported version"));
    assert_eq!(supmeas(&["--help"], dir.path()).status.code(), Some(0));
}
