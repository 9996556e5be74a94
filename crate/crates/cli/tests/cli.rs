use std::path::Path;
use std::process::{Command, Output};

fn dprank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dprank"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn three_groups() -> String {
    let mut s = String::from("group,value\n");
    for i in 0..30 {
        s.push_str(&format!("{},{}\n", ["a", "b", "c"][i % 3], (i * 7 % 11) as f64 + (i % 3) as f64));
    }
    s
}

#[test]
fn test_command_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "g.csv", &three_groups());
    let args = [
        "test", "--test", "kwabs", "--epsilon", "1", "--seed", "42", "--reps", "5000", "--input", &input,
    ];
    let a = dprank(&args);
    let b = dprank(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    for key in ["test", "statistic", "p_value", "n", "g", "epsilon", "delta", "split", "reps", "seed", "reference"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["n"], 30);
    assert_eq!(v["g"], 3);
}

#[test]
fn simulation_commands_are_deterministic() {
    let runs: [&[&str]; 3] = [
        &["power", "--test", "mw", "--epsilon", "1", "--n", "40,60", "--effect", "1", "--trials", "50", "--reps", "2000", "--seed", "3"],
        &["qq", "--test", "wilcoxon", "--epsilon", "1", "--n", "40", "--trials", "50", "--reps", "2000", "--seed", "3"],
        &["critval", "--test", "kw", "--epsilon", "1", "--n", "30", "--alphas", "0.05,0.1", "--reps", "2000"],
    ];
    for args in runs {
        let a = dprank(args);
        assert!(a.status.success(), "{args:?}: {}", String::from_utf8_lossy(&a.stderr));
        assert_eq!(a.stdout, dprank(args).stdout, "{args:?}");
    }
}

#[test]
fn mw_requires_delta() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "g.csv", "group,value\na,1\na,2\nb,3\nb,4\n");
    let out = dprank(&["test", "--test", "mw", "--epsilon", "1", "--reps", "1000", "--input", &input]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let ok = dprank(&[
        "test", "--test", "mw", "--epsilon", "1", "--reps", "1000", "--input", &input, "--known-equal-groups",
    ]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dprank(&["test", "--test", "kw", "--epsilon", "1"]);
    assert_eq!(missing.status.code(), Some(2));

    let range = write(dir.path(), "s.csv", "value\n1.5\n");
    let out = dprank(&["test", "--test", "ttest", "--epsilon", "1", "--reps", "1000", "--input", &range]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rescale"));

    let nofile = dir.path().join("absent.csv");
    let out = dprank(&["test", "--test", "kw", "--epsilon", "1", "--input", nofile.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));

    let bad = write(dir.path(), "b.csv", "group,value\na,1\nb,oops\n");
    let out = dprank(&["test", "--test", "kw", "--epsilon", "1", "--input", &bad]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let one_group = write(dir.path(), "o.csv", "group,value\na,1\na,2\n");
    let out = dprank(&["test", "--test", "kw", "--epsilon", "1", "--reps", "1000", "--input", &one_group]);
    assert_eq!(out.status.code(), Some(3));

    let out = dprank(&["test", "--test", "kw", "--epsilon", "0", "--input", &one_group]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn separated_wilcoxon_rejects() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = String::from("u,v\n");
    for i in 0..200 {
        body.push_str(&format!("{},{}\n", i % 13, (i % 13) as f64 + 1.0 + (i % 7) as f64 * 0.1));
    }
    let input = write(dir.path(), "p.csv", &body);
    let out = dprank(&["test", "--test", "wilcoxon", "--epsilon", "1e9", "--reps", "10000", "--input", &input]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["p_value"].as_f64().unwrap() < 0.01);
    assert_eq!(v["reject"], true);
}

#[test]
fn critval_matches_table() {
    let out = dprank(&["critval", "--test", "wilcoxon", "--epsilon", "0.1", "--n", "100", "--alphas", "0.05", "--reps", "1000000"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,alpha,critical_value"));
    let value: f64 = lines.next().unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!((value - 6073.0).abs() <= 60.0, "{value}");
}

#[test]
fn null_power_is_near_alpha() {
    let out = dprank(&["power", "--test", "kw", "--epsilon", "1", "--n", "60", "--trials", "400", "--reps", "5000"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!(row[2] <= 0.05 + 3.0 * (0.05f64 * 0.95 / 400.0).sqrt(), "{text}");
}
