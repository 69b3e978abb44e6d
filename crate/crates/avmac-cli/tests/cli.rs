//! Behavioral tests of the command-line surface: exit codes, unit
//! conversion, file loading, and append semantics of attack reports.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_avmac"))
}

#[test]
fn missing_channel_file_exits_2() {
    let output = bin()
        .args(["symm", "--channel", "does-not-exist.json"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn symmetrizable_channel_fails_the_pipeline_with_exit_3() {
    let status = bin()
        .args(["simulate", "--channel", "xor", "--c1", "1", "--n", "3"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&status.stderr);
    assert!(stderr.contains("symmetrizable"), "{stderr}");
}

#[test]
fn dichotomy_without_conferencing_exits_2() {
    let output = bin()
        .args(["dichotomy", "--channel", "gubner"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn channel_files_are_loaded_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chan.json");
    // A one-state binary channel with distinct rows.
    std::fs::write(
        &path,
        r#"{"nx":2,"ny":1,"nz":2,"ns":1,
            "w":[[[[1.0,0.0]],[[0.0,1.0]]]],
            "labels":{"note":"identity on x"}}"#,
    )
    .unwrap();
    let output = bin()
        .args(["symm", "--channel", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(output.status.success());
    let report = String::from_utf8(output.stdout).unwrap();
    assert!(report.contains("nx=2 ny=1 nz=2 ns=1"), "{report}");
    assert!(report.contains("XY: symmetrizable=false"), "{report}");
}

#[test]
fn nats_flag_converts_conferencing_capacities() {
    // ln(2) nats = 1 bit; the two runs must agree byte for byte.
    let dir = tempfile::tempdir().unwrap();
    let bits = dir.path().join("bits.csv");
    let nats = dir.path().join("nats.csv");
    let base = [
        "region",
        "--channel",
        "gubner",
        "--seed",
        "5",
        "--p-restarts",
        "16",
    ];
    assert!(bin()
        .args(base)
        .args(["--c1", "1", "--out", bits.to_str().unwrap()])
        .status()
        .unwrap()
        .success());
    let ln2 = format!("{}", std::f64::consts::LN_2);
    assert!(bin()
        .args(base)
        .args(["--c1", &ln2, "--nats", "--out", nats.to_str().unwrap()])
        .status()
        .unwrap()
        .success());
    let a = std::fs::read_to_string(&bits).unwrap();
    let b = std::fs::read_to_string(&nats).unwrap();
    // Headers record the converted value, so compare from the data on.
    let tail = |s: &str| {
        s.lines()
            .skip_while(|l| l.starts_with('#'))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(tail(&a), tail(&b));
    // And the recorded capacity is 1 bit in both.
    assert!(a.contains("# c1=1 "));
    assert!(b.contains("# c1=1 ") || b.contains("# c1=0.9999999999999999 "));
}

#[test]
fn attack_reports_append_to_an_existing_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.csv");
    let run = |seed: &str| {
        assert!(bin()
            .args([
                "attack",
                "--channel",
                "xor",
                "--n",
                "4",
                "--seed",
                seed,
                "--out",
                path.to_str().unwrap(),
            ])
            .status()
            .unwrap()
            .success());
    };
    run("1");
    let first = std::fs::read_to_string(&path).unwrap();
    run("2");
    let second = std::fs::read_to_string(&path).unwrap();
    assert!(second.starts_with(&first), "append must preserve the file head");
    assert!(second.len() > first.len());
    // Exactly one header line in the appended file.
    assert_eq!(
        second
            .lines()
            .filter(|l| l.starts_with("n,m1,m2"))
            .count(),
        1
    );
}

#[test]
fn region_to_stdout_has_header_and_origin() {
    let output = bin()
        .args([
            "region",
            "--channel",
            "adder-noiseless",
            "--p-restarts",
            "8",
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let csv = String::from_utf8(output.stdout).unwrap();
    let mut lines = csv.lines().skip_while(|l| l.starts_with('#'));
    assert_eq!(lines.next(), Some("R1,R2"));
    assert_eq!(lines.next(), Some("0,0"));
}
