// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParamError {
    #[error("N must be a power of two (got {0})")]
    CodeLengthNotPowerOfTwo(usize),
    #[error("M must be a power of two (got {0})")]
    ParallelismNotPowerOfTwo(usize),
    #[error("N must be at least 8 (got {0})")]
    CodeLengthTooSmall(usize),
    #[error("M must be at least 4 (got {0})")]
    ParallelismTooSmall(usize),
    #[error("M must be at most N/2 (got N={n}, M={m})")]
    ParallelismTooLarge { n: usize, m: usize },
}

/// A validated `(N, M)` pair: powers of two with `4 <= M <= N/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DesignPoint {
    n: usize,
    m: usize,
}

impl DesignPoint {
    pub fn new(n: usize, m: usize) -> Result<Self, ParamError> {
        if !n.is_power_of_two() {
            return Err(ParamError::CodeLengthNotPowerOfTwo(n));
        }
        if n < 8 {
            return Err(ParamError::CodeLengthTooSmall(n));
        }
        if !m.is_power_of_two() {
            return Err(ParamError::ParallelismNotPowerOfTwo(m));
        }
        if m < 4 {
            return Err(ParamError::ParallelismTooSmall(m));
        }
        if m > n / 2 {
            return Err(ParamError::ParallelismTooLarge { n, m });
        }
        Ok(Self { n, m })
    }

    /// Every valid parallelism for code length `n`, ascending.
    pub fn all_for(n: usize) -> Result<Vec<Self>, ParamError> {
        DesignPoint::new(n, 4)?;
        Ok((2..n.trailing_zeros())
            .map(|k| Self { n, m: 1 << k })
            .collect())
    }

    /// Code length `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Parallelism `M`: lanes in and out per clock.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn log_n(&self) -> usize {
        self.n.trailing_zeros() as usize
    }

    pub fn log_m(&self) -> usize {
        self.m.trailing_zeros() as usize
    }

    /// Cycles one frame occupies the input port.
    pub fn frame_cycles(&self) -> usize {
        self.n / self.m
    }

    /// `3N/(2M) - 1` clock cycles from first input to first output.
    pub fn latency(&self) -> usize {
        3 * self.n / (2 * self.m) - 1
    }

    /// `(M/2) log2 N`
    pub fn xor_count(&self) -> usize {
        self.m / 2 * self.log_n()
    }

    /// `3N/2 - M`
    pub fn mem_count(&self) -> usize {
        3 * self.n / 2 - self.m
    }
}

impl std::fmt::Display for DesignPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "N={} M={}", self.n, self.m)
    }
}
