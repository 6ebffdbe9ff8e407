// SPDX-License-Identifier: Apache-2.0

//! `polargen`: generate, simulate and verify pipelined polar encoders.
//!
//! Exit status: 0 on success, 1 when a verification fails, 2 for usage
//! and other errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use polargen::explore::{explore, ExploreTable, FrequencyPlan};
use polargen::formula::{general_formula, specialized_formula};
use polargen::netlist::{build, cost_report};
use polargen::rtl::write_design;
use polargen::sim::{
    assemble_input, expected_output, format_vectors, parse_vectors, random_frames, run_frames,
    verify_exhaustive, verify_sweep,
};
use polargen::{BitVector, DesignPoint};

#[derive(Parser, Debug)]
#[command(
    name = "polargen",
    version,
    about = "Pipelined polar encoder generator"
)]
struct Cli {
    /// TOML file supplying defaults for any flag (keys match the long
    /// flag names, plus `N` and `M`). Flags on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the stage formula for a design point.
    Formula {
        #[command(flatten)]
        point: PointArgs,
        /// Print the unspecialized form with W placeholders.
        #[arg(long)]
        general: bool,
    },
    /// Write Verilog, testbench, netlist, cost report and test vectors.
    Gen {
        #[command(flatten)]
        point: PointArgs,
        /// Output directory; the design goes in a subdirectory named after
        /// the top module.
        #[arg(short = 'o', long = "out", value_name = "DIR")]
        out: Option<PathBuf>,
        /// Random frames in the testbench vectors (default 10).
        #[arg(long)]
        frames: Option<usize>,
        /// Seed for the random frames (default 1).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check simulated netlists against the golden encoder.
    Verify {
        /// Code length: `1024`, a list `8,32`, or a range `8..1024`
        /// (powers of two only).
        #[arg(short = 'N', value_name = "N")]
        n: Option<String>,
        /// Parallelism, or `all` for every valid M.
        #[arg(short = 'M', value_name = "M")]
        m: Option<String>,
        /// Random frames per design point (default 10).
        #[arg(long)]
        frames: Option<usize>,
        /// Default 1.
        #[arg(long)]
        seed: Option<u64>,
        /// Idle cycles between frames (default 0).
        #[arg(long)]
        gap: Option<usize>,
        /// Try every source word instead of random frames (N <= 16).
        #[arg(long)]
        exhaustive: bool,
    },
    /// Tabulate cost and throughput for every M at one code length.
    Explore {
        #[arg(short = 'N', value_name = "N")]
        n: Option<usize>,
        /// Clock in MHz: one value for all rows, or `M=MHz,...` per row.
        #[arg(long, value_name = "MHZ")]
        freq: Option<String>,
    },
    /// Run the cycle-accurate simulator and write the response.
    Sim {
        #[command(flatten)]
        point: PointArgs,
        /// Input slices in the `stimulus.txt` format written by `gen`.
        #[arg(long, value_name = "FILE")]
        stimulus: Option<PathBuf>,
        /// Random frames when no stimulus is given (default 1).
        #[arg(long)]
        frames: Option<usize>,
        /// Default 1.
        #[arg(long)]
        seed: Option<u64>,
        /// Where to write the output slices.
        #[arg(long, value_name = "FILE")]
        response: Option<PathBuf>,
        /// Idle cycles between frames (default 0).
        #[arg(long)]
        gap: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct PointArgs {
    /// Code length.
    #[arg(short = 'N', value_name = "N")]
    n: Option<usize>,
    /// Parallelism: bits in and out per clock.
    #[arg(short = 'M', value_name = "M")]
    m: Option<usize>,
}

/// Flag defaults read from `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(rename = "N")]
    n: Option<toml::Value>,
    #[serde(rename = "M")]
    m: Option<toml::Value>,
    general: Option<bool>,
    out: Option<PathBuf>,
    frames: Option<usize>,
    seed: Option<u64>,
    gap: Option<usize>,
    exhaustive: Option<bool>,
    freq: Option<toml::Value>,
    stimulus: Option<PathBuf>,
    response: Option<PathBuf>,
}

impl FileConfig {
    fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    fn n_text(&self) -> Option<String> {
        self.n.as_ref().map(value_text)
    }

    fn m_text(&self) -> Option<String> {
        self.m.as_ref().map(value_text)
    }
}

fn value_text(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn parse_usize(what: &str, text: &str) -> Result<usize> {
    text.trim()
        .parse()
        .map_err(|_| anyhow!("{what} must be a positive integer (got '{text}')"))
}

impl PointArgs {
    fn resolve(&self, cfg: &FileConfig) -> Result<DesignPoint> {
        let n = match self.n {
            Some(n) => n,
            None => parse_usize("N", &cfg.n_text().ok_or_else(|| anyhow!("missing -N"))?)?,
        };
        let m = match self.m {
            Some(m) => m,
            None => parse_usize("M", &cfg.m_text().ok_or_else(|| anyhow!("missing -M"))?)?,
        };
        Ok(DesignPoint::new(n, m)?)
    }
}

/// `8`, `8,16,64` or `8..1024` (powers of two inside the bounds).
fn parse_code_lengths(text: &str) -> Result<Vec<usize>> {
    let text = text.trim();
    if let Some((lo, hi)) = text.split_once("..") {
        let (lo, hi) = (parse_usize("N", lo)?, parse_usize("N", hi)?);
        if lo > hi {
            bail!("empty range {text}");
        }
        let ns: Vec<usize> = (0..usize::BITS)
            .map(|k| 1usize << k)
            .filter(|p| (lo..=hi).contains(p))
            .collect();
        if ns.is_empty() {
            bail!("range {text} holds no power of two");
        }
        return Ok(ns);
    }
    text.split(',').map(|s| parse_usize("N", s)).collect()
}

fn parse_points(n_text: &str, m_text: &str) -> Result<Vec<DesignPoint>> {
    let mut points = Vec::new();
    for n in parse_code_lengths(n_text)? {
        if m_text.trim() == "all" {
            points.extend(DesignPoint::all_for(n)?);
        } else {
            points.push(DesignPoint::new(n, parse_usize("M", m_text)?)?);
        }
    }
    Ok(points)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Formula { point, general } => {
            let p = point.resolve(&cfg)?;
            let f = if general || cfg.general.unwrap_or(false) {
                general_formula(p)
            } else {
                specialized_formula(p)
            };
            println!("{f}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Gen {
            point,
            out,
            frames,
            seed,
        } => {
            let p = point.resolve(&cfg)?;
            let out = out
                .or(cfg.out.clone())
                .ok_or_else(|| anyhow!("missing -o/--out"))?;
            let frames = frames.or(cfg.frames).unwrap_or(10);
            let seed = seed.or(cfg.seed).unwrap_or(1);
            let nl = build(p);
            let cost = cost_report(&nl)?;
            let dir = write_design(&out, &nl, &random_frames(p, frames, seed))?;
            println!("wrote {}", dir.display());
            println!(
                "xor: {}  mem: {}  latency: {} cycles  bits/cycle: {}",
                cost.xor_count, cost.mem_count, cost.latency, cost.bits_per_cycle
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify {
            n,
            m,
            frames,
            seed,
            gap,
            exhaustive,
        } => {
            let n = n.or(cfg.n_text()).ok_or_else(|| anyhow!("missing -N"))?;
            let m = m.or(cfg.m_text()).unwrap_or_else(|| "all".into());
            let points = parse_points(&n, &m)?;
            if exhaustive || cfg.exhaustive.unwrap_or(false) {
                cmd_verify_exhaustive(&points)
            } else {
                let frames = frames.or(cfg.frames).unwrap_or(10);
                let seed = seed.or(cfg.seed).unwrap_or(1);
                let gap = gap.or(cfg.gap).unwrap_or(0);
                let reports = verify_sweep(&points, frames, seed, gap);
                let failed = reports.iter().filter(|r| !r.passed).count();
                for r in &reports {
                    println!("{r}");
                }
                println!(
                    "{}/{} design points passed",
                    reports.len() - failed,
                    reports.len()
                );
                Ok(if failed == 0 {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                })
            }
        }
        Command::Explore { n, freq } => {
            let n = match n {
                Some(n) => n,
                None => parse_usize("N", &cfg.n_text().ok_or_else(|| anyhow!("missing -N"))?)?,
            };
            let plan: FrequencyPlan = match freq.or(cfg.freq.as_ref().map(value_text)) {
                Some(text) => text.parse()?,
                None => FrequencyPlan::None,
            };
            let rows = explore(n, &plan)?;
            print!("{}", ExploreTable(&rows));
            Ok(ExitCode::SUCCESS)
        }
        Command::Sim {
            point,
            stimulus,
            frames,
            seed,
            response,
            gap,
        } => {
            let p = point.resolve(&cfg)?;
            let stimulus = stimulus.or(cfg.stimulus.clone());
            let response = response.or(cfg.response.clone());
            let gap = gap.or(cfg.gap).unwrap_or(0);
            let words = match &stimulus {
                Some(path) => read_stimulus(path, p)?,
                None => random_frames(
                    p,
                    frames.or(cfg.frames).unwrap_or(1),
                    seed.or(cfg.seed).unwrap_or(1),
                ),
            };
            cmd_sim(p, &words, gap, response.as_deref())
        }
    }
}

fn cmd_verify_exhaustive(points: &[DesignPoint]) -> Result<ExitCode> {
    let mut ok = true;
    for &p in points {
        if p.n() > 16 {
            bail!("exhaustive check is limited to N <= 16 (got {p})");
        }
        let report = verify_exhaustive(p)?;
        println!("{p}: {}/{} source words pass", report.passed, report.total);
        if let Some((word, r)) = &report.first_failure {
            println!("  first failure at u = {word:#x}: {r}");
            ok = false;
        }
    }
    Ok(if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn read_stimulus(path: &Path, p: DesignPoint) -> Result<Vec<BitVector>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let frames = parse_vectors(&text, p.m()).with_context(|| format!("{}", path.display()))?;
    frames
        .iter()
        .enumerate()
        .map(|(i, slices)| {
            assemble_input(slices, p).with_context(|| format!("{}: frame {i}", path.display()))
        })
        .collect()
}

fn cmd_sim(
    p: DesignPoint,
    words: &[BitVector],
    gap: usize,
    response: Option<&Path>,
) -> Result<ExitCode> {
    let nl = build(p);
    let run = run_frames(&nl, words, gap)?;
    match run.latency {
        Some(l) => println!("latency: {l} cycles"),
        None => println!("latency: - (no output)"),
    }

    // Bits delivered per cycle over the span of valid outputs.
    let cycles: Vec<u64> = run.emit_cycles.iter().flatten().copied().collect();
    if let (Some(first), Some(last)) = (cycles.iter().min(), cycles.iter().max()) {
        let bits = cycles.len() * p.m();
        let span = (last - first + 1) as usize;
        if bits.is_multiple_of(span) {
            println!("bits/cycle: {}", bits / span);
        } else {
            println!("bits/cycle: {:.3}", bits as f64 / span as f64);
        }
    }

    let mut ok = run.extra_outputs == 0 && run.outputs.len() == words.len();
    for (u, got) in words.iter().zip(&run.outputs) {
        ok &= expected_output(u, p)? == *got;
    }
    println!(
        "frames: {}  golden check: {}",
        words.len(),
        if ok { "PASS" } else { "FAIL" }
    );

    if let Some(path) = response {
        let header = format!(
            "{} response: N={} M={}",
            polargen::rtl::top_name(p.n(), p.m()),
            p.n(),
            p.m()
        );
        std::fs::write(path, format_vectors(&header, &run.outputs))
            .with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
