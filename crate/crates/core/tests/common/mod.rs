// SPDX-License-Identifier: Apache-2.0

//! Shared helpers for integration tests.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use polargen::netlist::build;
use polargen::rtl::write_design;
use polargen::sim::random_frames;
use polargen::DesignPoint;

/// A Verilog simulator found on `PATH` (or named by `POLARGEN_VERILATOR`).
pub fn find_verilator() -> Option<PathBuf> {
    let candidates = std::env::var_os("POLARGEN_VERILATOR")
        .map(|v| vec![PathBuf::from(v)])
        .unwrap_or_else(|| vec!["verilator".into(), "verilator-cli".into()]);
    candidates.into_iter().find(|exe| {
        Command::new(exe)
            .arg("--version")
            .output()
            .is_ok_and(|o| o.status.success())
    })
}

pub struct TbRun {
    pub passed: bool,
    pub log: String,
}

/// Compiles the testbench in `design` once; returns the executable.
pub fn compile_tb(verilator: &Path, design: &Path) -> Result<PathBuf, String> {
    let out = Command::new(verilator)
        .current_dir(design)
        .args([
            "--binary",
            "--timing",
            "-Wno-fatal",
            "-Wno-lint",
            "--output-split",
            "0",
            "--top-module",
            "tb",
            "-o",
            "simv",
            "tb.v",
            "top.v",
            "cells.v",
            // Some packaged builds call a bare `python` from their makefiles.
            "-MAKEFLAGS",
            "PYTHON3=python3",
        ])
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    Ok(design.join("obj_dir").join("simv"))
}

pub fn run_tb(exe: &Path, design: &Path, plusargs: &[&str]) -> TbRun {
    let out = Command::new(exe)
        .current_dir(design)
        .args(plusargs)
        .output()
        .expect("testbench executable runs");
    let log =
        String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    TbRun {
        passed: out.status.success() && log.contains("PASS:") && !log.contains("FAIL"),
        log,
    }
}

/// Writes the design tree for `(n, m)` with seeded random frames.
pub fn write_point(dir: &Path, n: usize, m: usize, frames: usize, seed: u64) -> PathBuf {
    let p = DesignPoint::new(n, m).unwrap();
    write_design(dir, &build(p), &random_frames(p, frames, seed)).unwrap()
}
