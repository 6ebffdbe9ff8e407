// SPDX-License-Identifier: Apache-2.0

//! Generator toolchain for pipelined polar encoders.
//!
//! Given a code length `N` and a parallelism `M`, the crate derives the stage
//! formula of the streaming architecture, elaborates it into a structural
//! netlist of XOR-and-pass cells, delay registers, switches and fixed
//! permutations, emits Verilog for it, and runs a cycle-accurate bit-true
//! simulation that is checked against a golden-model encoder.
//!
//! ```
//! use polargen::{formula, netlist, DesignPoint};
//!
//! let point = DesignPoint::new(32, 8).unwrap();
//! let f = formula::specialize(&formula::general_formula(point)).unwrap();
//! let nl = netlist::elaborate(&f).unwrap();
//! let cost = netlist::cost_report(&nl).unwrap();
//! assert_eq!((cost.xor_count, cost.mem_count, cost.latency), (20, 40, 5));
//! ```

pub mod explore;
pub mod formula;
pub mod netlist;
mod params;
pub mod polar;
pub mod rtl;
pub mod sim;

pub use params::{DesignPoint, ParamError};
pub use polar::BitVector;
