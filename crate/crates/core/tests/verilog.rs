// SPDX-License-Identifier: Apache-2.0

//! Runs emitted testbenches under an external simulator when one is
//! installed; otherwise the tests report a skip and pass.

mod common;

use common::{compile_tb, find_verilator, run_tb, write_point};

#[test]
fn emitted_testbenches_pass() {
    let Some(verilator) = find_verilator() else {
        eprintln!("skipped: no Verilog simulator found");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    for (n, m) in [(8, 4), (32, 8), (64, 16)] {
        let design = write_point(dir.path(), n, m, 4, 11);
        let exe = compile_tb(&verilator, &design).unwrap();
        for gap in ["+gap=0", "+gap=3"] {
            let run = run_tb(&exe, &design, &[gap]);
            assert!(run.passed, "N={n} M={m} {gap}:\n{}", run.log);
        }
    }
}

#[test]
fn corrupted_expectations_fail() {
    let Some(verilator) = find_verilator() else {
        eprintln!("skipped: no Verilog simulator found");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let design = write_point(dir.path(), 16, 4, 2, 3);
    let exe = compile_tb(&verilator, &design).unwrap();

    let expected = std::fs::read_to_string(design.join("expected.txt")).unwrap();
    let mut lines: Vec<String> = expected.lines().map(String::from).collect();
    let target = lines
        .iter()
        .position(|l| !l.is_empty() && !l.starts_with('#'))
        .unwrap();
    lines[target] = if lines[target] == "0" {
        "1".into()
    } else {
        "0".into()
    };
    std::fs::write(design.join("bad.txt"), lines.join("\n") + "\n").unwrap();
    let run = run_tb(&exe, &design, &["+expected=bad.txt"]);
    assert!(!run.passed);
    assert!(run.log.contains("first mismatch at cycle"), "{}", run.log);

    // A truncated file is caught before simulation starts.
    std::fs::write(design.join("short.txt"), lines[..target + 1].join("\n")).unwrap();
    let run = run_tb(&exe, &design, &["+expected=short.txt"]);
    assert!(!run.passed);
    assert!(run.log.contains("vector files hold"), "{}", run.log);
}
