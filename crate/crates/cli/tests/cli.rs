use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dpmean::io::{parse_polygons_csv, parse_reports_csv};

fn dpmean(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpmean")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_input(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn estimate(input: &str, mech: &str, seed: &str) -> Output {
    dpmean(&[
        "estimate", "--input", input, "--lower", "0", "--upper", "1", "--epsilon", "0.5", "--mechanism", mech, "--seed",
        seed,
    ])
}

#[test]
fn estimate_is_deterministic_and_in_range() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), "d.txt", "0.2\n0.4\n0.6\n");
    let a = estimate(&input, "transformed", "11");
    let b = estimate(&input, "transformed", "11");
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(stdout(&a), stdout(&b));

    let out = stdout(&a);
    let mut lines = out.lines();
    let value: f64 = lines.next().unwrap().parse().unwrap();
    assert!((0.0..=1.0).contains(&value));
    let record: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(record["mechanism"], "transformed");
    assert_eq!(record["n_is_private"], true);
    assert_eq!(record["epsilon"], 0.5);
    assert_eq!(record["seed"], 11);
    assert_eq!(record["estimate"].as_f64().unwrap(), value);
    assert!(record.get("n").is_none() && record.get("true_mean").is_none());
    assert!(stderr(&a).contains("linearly"));
}

#[test]
fn estimate_mechanisms_differ_on_same_seed() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), "d.txt", "0.2\n0.4\n0.6\n");
    let s = stdout(&estimate(&input, "shifted", "5"));
    let t = stdout(&estimate(&input, "transformed", "5"));
    let i = stdout(&estimate(&input, "independent", "5"));
    for out in [&s, &t, &i] {
        let v: f64 = out.lines().next().unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&v));
    }
    assert_ne!(s.lines().next(), t.lines().next());
}

#[test]
fn estimate_without_seed_echoes_entropy_seed() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), "d.txt", "0.5\n");
    let o = dpmean(&["estimate", "--input", &input, "--lower", "0", "--upper", "1", "--epsilon", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let record: serde_json::Value = serde_json::from_str(out.lines().nth(1).unwrap()).unwrap();
    assert_eq!(record["seed_source"], "entropy");
    assert!(record["seed"].is_u64());
}

#[test]
fn out_of_bounds_value_is_rejected_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), "d.txt", "0.5\n0.25\n1.5\n");
    let o = estimate(&input, "transformed", "1");
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).is_empty());
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let input = write_input(dir.path(), "e.txt", "0.5\nhalf\n");
    let o = estimate(&input, "transformed", "1");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn validation_and_internal_exit_codes() {
    let o = dpmean(&["bounds", "--epsilon", "0", "--lower", "0", "--upper", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = dpmean(&["bounds", "--epsilon", "0.5", "--lower", "1", "--upper", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = dpmean(&["estimate", "--lower", "0", "--upper", "1", "--epsilon", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = dpmean(&["figures", "--preset", "fig9", "--output", "x.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let o = dpmean(&[
        "estimate", "--input", "/nonexistent/d.txt", "--lower", "0", "--upper", "1", "--epsilon", "1",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = dpmean(&["geometry", "--output", "/nonexistent/dir/p.csv"]);
    assert_eq!(o.status.code(), Some(1));
}

fn table_value(out: &str, label: &str) -> f64 {
    let line = out.lines().find(|l| l.starts_with(label)).unwrap_or_else(|| panic!("no row {label:?} in\n{out}"));
    line.split_whitespace().last().unwrap().parse().unwrap()
}

#[test]
fn bounds_table() {
    let o = dpmean(&["bounds", "--epsilon", "0.5", "--lower", "0", "--upper", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(table_value(&out, "swap min-max risk"), 8.0);
    assert_eq!(table_value(&out, "add-remove min-max risk (upper)"), 8.0);
    assert_eq!(table_value(&out, "add-remove min-max risk (lower)"), 8.0);
    assert_eq!(table_value(&out, "shifted / transformed"), 2.0);

    let o = dpmean(&["bounds", "--epsilon", "0.5", "--lower", "0", "--upper", "1", "--n", "1000", "--mean", "0.5"]);
    let out = stdout(&o);
    assert!((table_value(&out, "transformed n^2 * MSE, this dataset") - 4.0).abs() < 1e-12);
    assert!(table_value(&out, "transformed MSE upper bound, this dataset") > 4e-6);
}

#[test]
fn geometry_export() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("balls.csv");
    let o = dpmean(&["geometry", "--output", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("polygon_id,vertex_index,x,y\n"));
    let polys = parse_polygons_csv(&text).unwrap();
    let ids: Vec<&str> = polys.iter().map(|p| p.0.as_str()).collect();
    assert_eq!(ids, ["naive", "shifted", "transformed"]);
    for (_, v) in &polys {
        assert!(v.iter().all(|p| v.iter().any(|q| p[0] == -q[0] && p[1] == -q[1])));
    }
    assert_eq!(polys[2].1, vec![[1.0, 1.0], [0.0, 1.0], [-1.0, -1.0], [0.0, -1.0]]);

    let out = stdout(&o);
    let row = |id: &str| out.lines().find(|l| l.starts_with(id)).unwrap().split_whitespace().collect::<Vec<_>>().join(" ");
    assert!(row("naive").starts_with("naive 2 "));
    assert!(row("transformed").starts_with("transformed 1 2 true true"));
}

fn run_figures(dir: &Path, name: &str, extra: &[&str]) -> (String, Output) {
    let path = dir.join(name);
    let mut args = vec!["figures", "--output", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = dpmean(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    (fs::read_to_string(&path).unwrap(), o)
}

#[test]
fn single_trial_smoke_run() {
    let dir = tempfile::tempdir().unwrap();
    for preset in ["fig2a", "fig2b", "fig2c"] {
        let (csv, _) = run_figures(dir.path(), &format!("{preset}.csv"), &["--preset", preset, "--trials", "1"]);
        let rows = parse_reports_csv(&csv).unwrap();
        assert!(!rows.is_empty());
        assert!(rows.iter().all(|r| r.report.trials == 1 && r.report.stderr == 0.0));
    }
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fig2c.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["preset"], "fig2c");
    assert_eq!(meta["seed_source"], "default");
    assert_eq!(meta["columns"].as_array().unwrap().last().unwrap(), "ratio");
}

#[test]
fn config_file_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"mechanisms":["independent","shifted"],"epsilons":[1.0],
        "dataset_specs":[{"kind":"constant","size":50,"target_mean":0.3}],"trials":20,"seed":3}"#;
    let cfg_path = write_input(dir.path(), "cfg.json", cfg);
    let (csv, _) = run_figures(dir.path(), "sweep.csv", &["--config", &cfg_path]);
    let rows = parse_reports_csv(&csv).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].report.mechanism, "independent");
    assert!(rows.iter().all(|r| r.report.seed == 3 && r.ratio.is_none()));

    let bad = write_input(dir.path(), "bad.json", r#"{"mechanisms":[],"epsilons":[1.0],"dataset_specs":[],"trials":1,"seed":0}"#);
    let o = dpmean(&["figures", "--config", &bad, "--output", dir.path().join("x.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fig2c_ratios_near_two_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, _) = run_figures(dir.path(), "a.csv", &["--preset", "fig2c", "--seed", "7"]);
    let (b, _) = run_figures(dir.path(), "b.csv", &["--preset", "fig2c", "--seed", "7"]);
    let (one, _) = run_figures(dir.path(), "one.csv", &["--preset", "fig2c", "--seed", "7", "--workers", "1"]);
    let (three, _) = run_figures(dir.path(), "three.csv", &["--preset", "fig2c", "--seed", "7", "--workers", "3"]);
    assert_eq!(a, b);
    assert_eq!(one, three);
    assert_eq!(a, one);

    let rows = parse_reports_csv(&a).unwrap();
    assert_eq!(rows.len(), 60);
    for pair in rows.chunks(2) {
        assert_eq!(pair[0].report.mechanism, "shifted");
        assert_eq!(pair[1].report.mechanism, "transformed");
        let r = pair[0].ratio.unwrap();
        assert_eq!(Some(r), pair[1].ratio);
        assert!((1.5..=2.5).contains(&r), "ratio {r} at eps={} mu={}", pair[0].report.epsilon, pair[0].report.target_mean);
    }
}

#[test]
fn fig2b_peak_at_small_means() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, _) = run_figures(dir.path(), "b.csv", &["--preset", "fig2b"]);
    let rows = parse_reports_csv(&csv).unwrap();
    assert_eq!(rows.len(), 6);
    let best = rows
        .iter()
        .max_by(|x, y| x.ratio.unwrap().total_cmp(&y.ratio.unwrap()))
        .unwrap();
    // 1/(n eps) = 0.002; the peak must sit within a factor of ten of it.
    let mu = best.report.target_mean;
    assert!((0.0002..=0.02).contains(&mu), "peak at mu={mu}");
    for r in &rows {
        let expect = r.report.normalized_mse / (2.0 / 0.25);
        assert_eq!(r.ratio, Some(expect));
    }
}
