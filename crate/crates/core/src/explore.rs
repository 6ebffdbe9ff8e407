// SPDX-License-Identifier: Apache-2.0

//! Design-space sweep over the parallelism M for a fixed code length.
//!
//! Every row is taken from an elaborated netlist rather than the closed
//! forms. Throughput estimates need a clock frequency, which the toolchain
//! never guesses: it is supplied by the caller (e.g. from a synthesis run).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::netlist::{build, cost_report, NetlistError};
use crate::{DesignPoint, ParamError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExploreRow {
    pub m: usize,
    pub xor_count: usize,
    pub mem_count: usize,
    pub latency_cycles: usize,
    pub bits_per_cycle: usize,
    /// Bits per second at the supplied clock, when one was given.
    pub est_throughput: Option<f64>,
}

impl ExploreRow {
    pub fn est_throughput_gbps(&self) -> Option<f64> {
        self.est_throughput.map(|bps| bps / 1e9)
    }
}

/// Clock frequencies in MHz.
#[derive(Debug, Clone, Default, PartialEq)]
pub enum FrequencyPlan {
    #[default]
    None,
    Uniform(f64),
    PerM(BTreeMap<usize, f64>),
}

impl FrequencyPlan {
    pub fn mhz(&self, m: usize) -> Option<f64> {
        match self {
            FrequencyPlan::None => None,
            FrequencyPlan::Uniform(f) => Some(*f),
            FrequencyPlan::PerM(map) => map.get(&m).copied(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExploreError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error("bad frequency list: {0}")]
    Frequency(String),
}

/// Parses `"350"` (one frequency for every M) or `"4=519.5,512=356.2"`.
impl FromStr for FrequencyPlan {
    type Err = ExploreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(FrequencyPlan::None);
        }
        let positive = |text: &str| -> Result<f64, ExploreError> {
            match text.trim().parse::<f64>() {
                Ok(f) if f.is_finite() && f > 0.0 => Ok(f),
                _ => Err(ExploreError::Frequency(format!(
                    "'{}' is not a positive frequency",
                    text.trim()
                ))),
            }
        };
        if !s.contains('=') {
            return positive(s).map(FrequencyPlan::Uniform);
        }
        let mut map = BTreeMap::new();
        for item in s.split(',') {
            let (m, f) = item
                .split_once('=')
                .ok_or_else(|| ExploreError::Frequency(format!("expected M=MHz, got '{item}'")))?;
            let m: usize = m.trim().parse().map_err(|_| {
                ExploreError::Frequency(format!("'{}' is not a parallelism", m.trim()))
            })?;
            if map.insert(m, positive(f)?).is_some() {
                return Err(ExploreError::Frequency(format!("M={m} given twice")));
            }
        }
        Ok(FrequencyPlan::PerM(map))
    }
}

/// One row per valid M = 4, 8, ..., N/2, in increasing M.
pub fn explore(n: usize, freq: &FrequencyPlan) -> Result<Vec<ExploreRow>, ExploreError> {
    let points = DesignPoint::all_for(n)?;
    if let FrequencyPlan::PerM(map) = freq {
        if let Some(m) = map.keys().find(|m| !points.iter().any(|p| p.m() == **m)) {
            return Err(ExploreError::Frequency(format!(
                "M={m} is not a design point for N={n}"
            )));
        }
    }
    points
        .par_iter()
        .map(|&p| {
            let cost = cost_report(&build(p))?;
            Ok(ExploreRow {
                m: p.m(),
                xor_count: cost.xor_count,
                mem_count: cost.mem_count,
                latency_cycles: cost.latency,
                bits_per_cycle: cost.bits_per_cycle,
                est_throughput: freq
                    .mhz(p.m())
                    .map(|f| cost.bits_per_cycle as f64 * f * 1e6),
            })
        })
        .collect()
}

/// Fixed-width table, one line per row.
pub struct ExploreTable<'a>(pub &'a [ExploreRow]);

impl fmt::Display for ExploreTable<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>6} {:>8} {:>8} {:>9} {:>10} {:>12}",
            "M", "XOR", "MEM", "latency", "bits/cyc", "T/P (Gbps)"
        )?;
        for r in self.0 {
            let tp = r
                .est_throughput_gbps()
                .map_or_else(|| "-".to_string(), |g| format!("{g:.3}"));
            writeln!(
                f,
                "{:>6} {:>8} {:>8} {:>9} {:>10} {:>12}",
                r.m, r.xor_count, r.mem_count, r.latency_cycles, r.bits_per_cycle, tp
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_counts() {
        assert_eq!(explore(8, &FrequencyPlan::None).unwrap().len(), 1);
        for k in 4..=11 {
            let rows = explore(1 << k, &FrequencyPlan::None).unwrap();
            assert_eq!(rows.len(), k - 2);
            let ms: Vec<usize> = rows.iter().map(|r| r.m).collect();
            let want: Vec<usize> = (2..k).map(|j| 1 << j).collect();
            assert_eq!(ms, want);
        }
    }

    #[test]
    fn rows_match_cost() {
        let rows = explore(32, &FrequencyPlan::None).unwrap();
        let r8 = rows.iter().find(|r| r.m == 8).unwrap();
        assert_eq!(
            (
                r8.xor_count,
                r8.mem_count,
                r8.latency_cycles,
                r8.bits_per_cycle
            ),
            (20, 40, 5, 8)
        );
        assert!(r8.est_throughput.is_none());
    }

    #[test]
    fn throughput_scales_with_m() {
        let plan: FrequencyPlan = "4=519.535,512=356.223".parse().unwrap();
        let rows = explore(1024, &plan).unwrap();
        let gbps = |m| {
            rows.iter()
                .find(|r| r.m == m)
                .unwrap()
                .est_throughput_gbps()
        };
        assert!((gbps(4).unwrap() - 2.07814).abs() < 1e-9);
        assert!((gbps(512).unwrap() - 182.386176).abs() < 1e-9);
        assert_eq!(gbps(8), None);
    }

    #[test]
    fn frequency_parsing() {
        assert_eq!(
            "300".parse::<FrequencyPlan>().unwrap(),
            FrequencyPlan::Uniform(300.0)
        );
        assert_eq!("".parse::<FrequencyPlan>().unwrap(), FrequencyPlan::None);
        for bad in ["0", "-5", "abc", "4=", "x=3", "4=1,4=2", "4=nan"] {
            assert!(bad.parse::<FrequencyPlan>().is_err(), "{bad}");
        }
        let plan: FrequencyPlan = "16=200".parse().unwrap();
        assert!(matches!(
            explore(16, &plan),
            Err(ExploreError::Frequency(_))
        ));
    }

    #[test]
    fn invalid_n() {
        assert!(matches!(
            explore(24, &FrequencyPlan::None),
            Err(ExploreError::Param(_))
        ));
        assert!(matches!(
            explore(4, &FrequencyPlan::None),
            Err(ExploreError::Param(_))
        ));
    }
}
