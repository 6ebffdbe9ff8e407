// SPDX-License-Identifier: Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

fn polargen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polargen"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Vector lines with comments and blank lines removed.
fn data_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split('#').next().unwrap().trim().to_string())
        .filter(|l| !l.is_empty())
        .collect()
}

#[test]
fn formula_texts() {
    let o = polargen(&["formula", "-N", "32", "-M", "8"]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o).trim(),
        "(I4xXP)(I2xP4)(I4xS4)(I4xXP)(I4xS2)(I4xXP)(P8)(I4xXP)(I2xP4)(I4xS4)(I4xXP)"
    );
    let o = polargen(&["formula", "-N", "32", "-M", "8", "--general"]);
    assert_eq!(
        stdout(&o).trim(),
        "(I4xXP)(I2xP4)(I4xW4)(I4xXP)(I4xW2)(I4xXP)(W1)(I4xXP)(I2xP4)(I4xS4)(I4xXP)"
    );
}

#[test]
fn invalid_parameters_exit_2() {
    let o = polargen(&["formula", "-N", "31", "-M", "8"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("N must be a power of two"),
        "{}",
        stderr(&o)
    );

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = polargen(&["gen", "-N", "16", "-M", "16", "-o", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("M must be at most N/2"));

    // Clap's own usage errors share the code.
    assert_eq!(polargen(&["formula", "-N", "x"]).status.code(), Some(2));
    assert_eq!(polargen(&["nonsense"]).status.code(), Some(2));
}

#[test]
fn gen_writes_cost_and_tree() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for (n, m, xor, mem, lat) in [("32", "8", 20, 40, 5), ("8", "4", 6, 8, 2)] {
        let o = polargen(&["gen", "-N", n, "-M", m, "-o", out]);
        assert!(o.status.success(), "{}", stderr(&o));
        let design = dir.path().join(format!("polar_enc_N{n}_M{m}"));
        let cost: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(design.join("cost.json")).unwrap())
                .unwrap();
        assert_eq!(cost["xor_count"], xor);
        assert_eq!(cost["mem_count"], mem);
        assert_eq!(cost["latency"], lat);
        for f in [
            "top.v",
            "cells.v",
            "tb.v",
            "netlist.json",
            "stimulus.txt",
            "expected.txt",
        ] {
            assert!(design.join(f).is_file(), "{f}");
        }
    }
}

#[test]
fn gen_into_unwritable_path_fails() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "not a directory").unwrap();
    let o = polargen(&["gen", "-N", "8", "-M", "4", "-o", blocker.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_sweeps() {
    let o = polargen(&[
        "verify", "-N", "8..1024", "-M", "all", "--frames", "10", "--seed", "1",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.contains(" PASS")).count(), 36);
    assert!(text.contains("36/36 design points passed"));

    let o = polargen(&["verify", "-N", "8", "-M", "4", "--exhaustive"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("256/256"));

    let o = polargen(&["verify", "-N", "64", "-M", "8", "--gap", "3"]);
    assert!(o.status.success());
}

#[test]
fn verify_output_is_ordered() {
    let o = polargen(&["verify", "-N", "16,8", "-M", "4"]);
    let lines: Vec<_> = stdout(&o).lines().map(String::from).collect();
    assert!(lines[0].starts_with("N=16 "));
    assert!(lines[1].starts_with("N=8 "));
}

#[test]
fn explore_rows_and_throughput() {
    let o = polargen(&["explore", "-N", "1024"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 1 + 8);

    let o = polargen(&["explore", "-N", "1024", "--freq", "4=519.535,512=356.223"]);
    let text = stdout(&o);
    let row = |m: &str| {
        text.lines()
            .find(|l| l.split_whitespace().next() == Some(m))
            .unwrap()
            .to_string()
    };
    assert!(row("4").trim_end().ends_with("2.078"), "{}", row("4"));
    assert!(row("512").trim_end().ends_with("182.386"));
    assert!(row("8").trim_end().ends_with('-'));

    assert_eq!(polargen(&["explore", "-N", "8"]).status.code(), Some(0));
    assert_eq!(polargen(&["explore", "-N", "12"]).status.code(), Some(2));
    assert_eq!(
        polargen(&["explore", "-N", "64", "--freq", "zero"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn sim_reports_latency() {
    let o = polargen(&["sim", "-N", "32", "-M", "8", "--frames", "1", "--seed", "7"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("latency: 5 cycles"), "{text}");
    assert!(text.contains("bits/cycle: 8"));
}

#[test]
fn sim_matches_gen_expected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = polargen(&[
        "gen", "-N", "64", "-M", "16", "-o", out, "--frames", "4", "--seed", "5",
    ]);
    assert!(o.status.success());
    let design = dir.path().join("polar_enc_N64_M16");
    let response = dir.path().join("response.txt");

    // Random frames from the same seed.
    let o = polargen(&[
        "sim",
        "-N",
        "64",
        "-M",
        "16",
        "--frames",
        "4",
        "--seed",
        "5",
        "--response",
        response.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(
        data_lines(&response),
        data_lines(&design.join("expected.txt"))
    );

    // And by replaying gen's stimulus file.
    let o = polargen(&[
        "sim",
        "-N",
        "64",
        "-M",
        "16",
        "--stimulus",
        design.join("stimulus.txt").to_str().unwrap(),
        "--response",
        response.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("frames: 4"));
    assert_eq!(
        data_lines(&response),
        data_lines(&design.join("expected.txt"))
    );
}

#[test]
fn sim_zero_frame_gives_zero_response() {
    let dir = tempfile::tempdir().unwrap();
    let stim = dir.path().join("zero.txt");
    std::fs::write(&stim, "# zeros\n00\n00\n").unwrap();
    let response = dir.path().join("r.txt");
    let o = polargen(&[
        "sim",
        "-N",
        "16",
        "-M",
        "8",
        "--stimulus",
        stim.to_str().unwrap(),
        "--response",
        response.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(data_lines(&response), vec!["00", "00"]);
}

#[test]
fn malformed_stimulus_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let stim = dir.path().join("bad.txt");
    std::fs::write(&stim, "# header\n0\n0\n0\nzz\n").unwrap();
    let o = polargen(&[
        "sim",
        "-N",
        "16",
        "-M",
        "4",
        "--stimulus",
        stim.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 5"), "{}", stderr(&o));
}

#[test]
fn config_file_defaults_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("polargen.toml");
    std::fs::write(&cfg, "N = 32\nM = 8\ngeneral = true\n").unwrap();
    let cfg = cfg.to_str().unwrap();

    let o = polargen(&["--config", cfg, "formula"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("(W1)"));

    // Command-line values win over the file.
    let o = polargen(&["formula", "--config", cfg, "-M", "4"]);
    assert!(stdout(&o).starts_with("(I2xXP)(P4)"), "{}", stdout(&o));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "colour = 3\n").unwrap();
    let o = polargen(&[
        "--config",
        bad.to_str().unwrap(),
        "formula",
        "-N",
        "8",
        "-M",
        "4",
    ]);
    assert_eq!(o.status.code(), Some(2));
}
