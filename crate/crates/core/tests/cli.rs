use std::fs;
use std::process::Command;

fn ifacm(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_ifacm")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

const SMALL: &str = "data = example2\nn = 600\nbase = standard\nstart = -1,-5\nsegments = x=1; x=2\n";

#[test]
fn usage_errors_exit_1() {
    assert_eq!(ifacm(&[]).0, 1);
    assert_eq!(ifacm(&["frobnicate"]).0, 1);
    assert_eq!(ifacm(&["run"]).0, 1);
    assert_eq!(ifacm(&["run", "--config", "/definitely/missing.conf"]).0, 1);
    assert_eq!(ifacm(&["properties", "--instances", "0"]).0, 1);
    assert_eq!(ifacm(&["--help"]).0, 0);
}

#[test]
fn config_errors_exit_1_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("c.conf");
    fs::write(&conf, SMALL).unwrap();
    let (code, _, err) = ifacm(&["run", "--config", conf.to_str().unwrap(), "--confidence", "1.5"]);
    assert_eq!(code, 1);
    assert_eq!(err.trim().lines().count(), 1, "{err}");
    fs::write(&conf, "data = example2\n").unwrap();
    assert_eq!(ifacm(&["run", "--config", conf.to_str().unwrap()]).0, 1);
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.csv"), "x,y\n1,2\n3,oops\n4,5\n").unwrap();
    let conf = dir.path().join("c.conf");
    fs::write(&conf, "data = csv\ncsv.path = bad.csv\nsplit = 1,1,1\n").unwrap();
    let (code, _, err) = ifacm(&["run", "--config", conf.to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("row 2"), "{err}");
    fs::write(&conf, SMALL).unwrap();
    let (code, _, err) = ifacm(&["run", "--config", conf.to_str().unwrap(), "--base", "scoring"]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn run_writes_outputs_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("c.conf");
    fs::write(&conf, SMALL).unwrap();
    let out = dir.path().join("out");
    let (code, stdout, _) = ifacm(&[
        "run",
        "--config",
        conf.to_str().unwrap(),
        "--seed",
        "5",
        "--C",
        "2",
        "--out",
        out.to_str().unwrap(),
        "--skip-ifacm",
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("Base ICP") && !stdout.contains("IFACM"));
    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(report.lines().nth(1).unwrap().starts_with("training,Base ICP,0.9,2,"));
}

#[test]
fn properties_pass_and_print_each_suite() {
    let (code, stdout, _) = ifacm(&["properties", "--seed", "3", "--instances", "1"]);
    assert_eq!(code, 0);
    assert_eq!(stdout.lines().filter(|l| l.contains(" PASS ")).count(), 7, "{stdout}");
}

#[test]
fn synth_writes_requested_rows() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("e.csv");
    assert_eq!(
        ifacm(&[
            "synth",
            "--kind",
            "example2",
            "--n",
            "100",
            "--out",
            p.to_str().unwrap()
        ])
        .0,
        0
    );
    let text = fs::read_to_string(&p).unwrap();
    assert_eq!(text.lines().count(), 101);
    let p = dir.path().join("h.csv");
    let args = [
        "synth",
        "--kind",
        "heteroscedastic",
        "--n",
        "10",
        "--m",
        "3",
        "--out",
        p.to_str().unwrap(),
    ];
    assert_eq!(ifacm(&args).0, 0);
    assert_eq!(fs::read_to_string(&p).unwrap().lines().next().unwrap(), "x1,x2,x3,y");
    assert_eq!(
        ifacm(&["synth", "--kind", "example2", "--n", "-4", "--out", p.to_str().unwrap()]).0,
        1
    );
}
