use std::path::Path;
use std::process::{Command, Output};

fn qrdv(args: &[&str], env_seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qrdv"));
    cmd.args(args).env("RUST_LOG", "warn");
    match env_seed {
        Some(s) => cmd.env("QRDV_SEED", s),
        None => cmd.env_remove("QRDV_SEED"),
    };
    cmd.output().expect("binary runs")
}

const SMALL: [&str; 10] = [
    "--schemes",
    "1x1,adaptive",
    "--pi-grid",
    "0.3,0.8",
    "--users",
    "6",
    "--seeds",
    "2",
    "--slots",
    "3000",
];

fn small_run(out: &Path, extra: &[&str], env_seed: Option<&str>) -> Output {
    let mut args = SMALL.to_vec();
    args.extend(["--out", out.to_str().unwrap()]);
    args.extend(extra);
    qrdv(&args, env_seed)
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn writes_tables_reports_and_figure_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = small_run(dir.path(), &[], None);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let cells = read(dir.path(), "cells.csv");
    let mut lines = cells.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("scheme,n,N,users,p_i,seed,slots,total_rdv"));
    assert_eq!(lines.count(), 2 * 2 * 2);
    for name in [
        "cells.json",
        "tables.json",
        "table_rdv.csv",
        "table_ttr.csv",
        "table_energy.csv",
        "table_blocking.csv",
        "fig4_rdv.dat",
        "fig5_ttr.dat",
        "fig6_energy.dat",
        "fig7_blocking.dat",
        "fig8_adaptive_rdv.dat",
        "fig9_adaptive_ttr.dat",
        "fig10_adaptive_energy.dat",
    ] {
        assert!(dir.path().join(name).is_file(), "missing {name}");
    }
    let json: serde_json::Value = serde_json::from_str(&read(dir.path(), "cells.json")).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 8);
}

#[test]
fn reruns_are_byte_identical_across_parallelism() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(small_run(a.path(), &["--parallelism", "1"], None)
        .status
        .success());
    assert!(small_run(b.path(), &["--parallelism", "3"], None)
        .status
        .success());
    for name in [
        "cells.csv",
        "table_ttr.csv",
        "cells.json",
        "fig8_adaptive_rdv.dat",
    ] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name}");
    }
}

#[test]
fn seed_precedence_file_env_flag() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    std::fs::write(&config, r#"{ "base-seed": 11, "format": "csv" }"#).unwrap();
    let cfg = config.to_str().unwrap();
    let seeds = |out: &Path| -> Vec<String> {
        read(out, "cells.csv")
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(5).unwrap().to_string())
            .collect()
    };
    let run = |sub: &str, extra: &[&str], env: Option<&str>| {
        let out = dir.path().join(sub);
        let mut args = vec!["--config", cfg];
        args.extend(extra);
        assert!(small_run(&out, &args, env).status.success());
        assert!(!out.join("cells.json").exists());
        seeds(&out)
    };
    assert_eq!(run("file", &[], None)[..2], ["11", "12"]);
    assert_eq!(run("env", &[], Some("40"))[..2], ["40", "41"]);
    assert_eq!(
        run("flag", &["--base-seed", "7"], Some("40"))[..2],
        ["7", "8"]
    );
}

#[test]
fn invalid_configuration_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["--schemes", "3x3"],
        vec!["--pi-grid", "1.2"],
        vec!["--users", "1"],
        vec!["--no-such-flag"],
        vec!["--slots", "10", "--paper-scale"],
    ] {
        let mut full = args.clone();
        full.extend(["--out", dir.path().to_str().unwrap()]);
        let out = qrdv(&full, None);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
    }
    let out = small_run(dir.path(), &[], Some("not-a-number"));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("QRDV_SEED"));

    let config = dir.path().join("bad.json");
    std::fs::write(&config, r#"{ "seeds": 3, "colour": "red" }"#).unwrap();
    let out = qrdv(&["--config", config.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unwritable_output_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = small_run(&blocker.join("out"), &[], None);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn help_exits_zero() {
    let out = qrdv(&["--help"], None);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("--pi-grid"));
}
