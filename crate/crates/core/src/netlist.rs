// SPDX-License-Identifier: Apache-2.0

//! Structural netlists elaborated from specialized formulas.
//!
//! Every stage maps onto cells over `M` lanes:
//!
//! * `I_k (x) XP`  -> `k` XOR-and-pass cells on consecutive lane pairs;
//! * `I_k (x) S_K` -> `k` switches, each a two-lane crossbar driven by a
//!   modulus-`K` counter (cross while the counter MSB is set) with `K/2`
//!   delay cells before and `K/2` after it;
//! * `I_k (x) P_P` -> `k` fixed rewirings from [`permutation_table`].
//!
//! All storage lives in delay cells, so walking the netlist gives `#MEM`
//! directly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{validate, Atom, Formula};
use crate::{DesignPoint, ParamError};

pub type WireId = usize;

/// Which sides of a switch carry its two delay lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DelaySide {
    /// Delays on lane 0 before the crossbar and on lane 1 after it.
    #[serde(rename = "top-in/bottom-out")]
    TopInBottomOut,
    /// Delays on lane 1 before the crossbar and on lane 0 after it.
    #[serde(rename = "bottom-in/top-out")]
    BottomInTopOut,
}

impl DelaySide {
    pub const ALL: [DelaySide; 2] = [DelaySide::TopInBottomOut, DelaySide::BottomInTopOut];

    pub fn as_str(self) -> &'static str {
        match self {
            DelaySide::TopInBottomOut => "top-in/bottom-out",
            DelaySide::BottomInTopOut => "bottom-in/top-out",
        }
    }
}

/// Delay placement that reproduces the golden model (see `sim::calibrate`).
pub const CALIBRATED_DELAY_SIDE: DelaySide = DelaySide::BottomInTopOut;

/// Counter value of every switch at reset (see `sim::calibrate`).
pub const CALIBRATED_PHASE: usize = 0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CellKind {
    /// `out0 = in0 ^ in1`, `out1 = in1`.
    Xp,
    /// One register bit.
    Delay,
    /// Crossbar; the counter starts at `phase` and advances on valid data
    /// at input 0.
    Switch { modulus: usize, phase: usize },
    /// `out[i] = in[table[i]]`.
    Perm { table: Vec<usize> },
}

impl CellKind {
    pub fn name(&self) -> &'static str {
        match self {
            CellKind::Xp => "xp",
            CellKind::Delay => "delay",
            CellKind::Switch { .. } => "switch",
            CellKind::Perm { .. } => "perm",
        }
    }

    fn ports(&self) -> usize {
        match self {
            CellKind::Xp | CellKind::Switch { .. } => 2,
            CellKind::Delay => 1,
            CellKind::Perm { table } => table.len(),
        }
    }

    /// Input port feeding output port `port` along the straight-through path.
    fn through(&self, port: usize) -> usize {
        match self {
            CellKind::Perm { table } => table[port],
            _ => port,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub id: usize,
    pub kind: CellKind,
    pub inputs: Vec<WireId>,
    pub outputs: Vec<WireId>,
    /// Index of the formula stage this cell was elaborated from.
    pub stage: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Netlist {
    pub n: usize,
    pub m: usize,
    pub cells: Vec<Cell>,
    pub inputs: Vec<WireId>,
    pub outputs: Vec<WireId>,
    pub wire_count: usize,
    pub delay_side: DelaySide,
    /// Canonical text of each source stage.
    pub stages: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetlistError {
    #[error("stage {0} holds a W placeholder; specialize the formula first")]
    Unspecialized(usize),
    #[error("formula is not elaboratable: {0}")]
    InvalidFormula(String),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("permutation size {0} must be a power of two >= 4")]
    PermSize(usize),
    #[error("cell {id}: {reason}")]
    BadCell { id: usize, reason: String },
    #[error("wire {0} has no driver")]
    Undriven(WireId),
    #[error("wire {0} has more than one driver")]
    MultipleDrivers(WireId),
    #[error("wire {0} is out of range")]
    WireOutOfRange(WireId),
    #[error("combinational cycle through cell {0}")]
    CombinationalCycle(usize),
    #[error("{what}: walked {walked}, closed form {expected}")]
    CostMismatch {
        what: &'static str,
        walked: usize,
        expected: usize,
    },
    #[error("lane {lane} has delay depth {depth}, lane 0 has {first}")]
    UnevenDepth {
        lane: usize,
        depth: usize,
        first: usize,
    },
    #[error("netlist json: {0}")]
    Json(String),
}

/// Fixed permutation on P lanes that swaps lane-index bits 0 and log2(P)-1,
/// as an output-to-input map `x[i] = u[table[i]]`.
pub fn permutation_table(p: usize) -> Result<Vec<usize>, NetlistError> {
    if p < 4 || !p.is_power_of_two() {
        return Err(NetlistError::PermSize(p));
    }
    let half = p / 2;
    let mut table = vec![usize::MAX; p];
    for i in (0..half).step_by(2) {
        table[i] = i;
    }
    let mut i = p - 1;
    while i > half {
        table[i] = i;
        i -= 2;
    }
    for i in (1..half).step_by(2) {
        table[i] = i - 1 + half;
        table[i - 1 + half] = i;
    }
    Ok(table)
}

/// Switch parameters used during elaboration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElabConfig {
    pub delay_side: DelaySide,
    /// Reset phase per switch stage, in stage order. Missing entries use
    /// [`CALIBRATED_PHASE`].
    pub phases: Vec<usize>,
}

impl Default for ElabConfig {
    fn default() -> Self {
        Self {
            delay_side: CALIBRATED_DELAY_SIDE,
            phases: Vec::new(),
        }
    }
}

/// Elaborates with the calibrated switch arrangement.
pub fn elaborate(f: &Formula) -> Result<Netlist, NetlistError> {
    elaborate_with(f, &ElabConfig::default())
}

pub fn elaborate_with(f: &Formula, config: &ElabConfig) -> Result<Netlist, NetlistError> {
    if let Some(idx) = f.stages.iter().position(|s| matches!(s.atom, Atom::W(_))) {
        return Err(NetlistError::Unspecialized(idx));
    }
    let violations = validate(f);
    if !violations.is_empty() {
        let text: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(NetlistError::InvalidFormula(text.join("; ")));
    }

    let mut b = Builder {
        cells: Vec::new(),
        next_wire: f.m,
        stage: 0,
    };
    let inputs: Vec<WireId> = (0..f.m).collect();
    let mut lanes = inputs.clone();
    let mut switch_stage = 0;

    for (idx, stage) in f.stages.iter().enumerate() {
        b.stage = idx;
        let mut next = Vec::with_capacity(f.m);
        match stage.atom {
            Atom::Xp => {
                for pair in lanes.chunks(2) {
                    next.extend(b.cell(CellKind::Xp, pair.to_vec(), 2));
                }
            }
            Atom::Switch(k) => {
                let depth = k / 2;
                let phase = config
                    .phases
                    .get(switch_stage)
                    .copied()
                    .unwrap_or(CALIBRATED_PHASE);
                switch_stage += 1;
                let kind = CellKind::Switch { modulus: k, phase };
                for pair in lanes.chunks(2) {
                    let (top, bottom) = match config.delay_side {
                        DelaySide::BottomInTopOut => {
                            let b_in = b.delay_line(pair[1], depth);
                            let out = b.cell(kind.clone(), vec![pair[0], b_in], 2);
                            (b.delay_line(out[0], depth), out[1])
                        }
                        DelaySide::TopInBottomOut => {
                            let a_in = b.delay_line(pair[0], depth);
                            let out = b.cell(kind.clone(), vec![a_in, pair[1]], 2);
                            (out[0], b.delay_line(out[1], depth))
                        }
                    };
                    next.push(top);
                    next.push(bottom);
                }
            }
            Atom::Perm(p) => {
                let table = permutation_table(p)?;
                for group in lanes.chunks(p) {
                    next.extend(b.cell(
                        CellKind::Perm {
                            table: table.clone(),
                        },
                        group.to_vec(),
                        p,
                    ));
                }
            }
            Atom::W(_) => unreachable!("rejected above"),
        }
        debug_assert_eq!(next.len(), f.m);
        lanes = next;
    }

    let nl = Netlist {
        n: f.n,
        m: f.m,
        cells: b.cells,
        inputs,
        outputs: lanes,
        wire_count: b.next_wire,
        delay_side: config.delay_side,
        stages: f.stages.iter().map(|s| s.to_string()).collect(),
    };
    nl.check()?;
    Ok(nl)
}

struct Builder {
    cells: Vec<Cell>,
    next_wire: WireId,
    stage: usize,
}

impl Builder {
    fn cell(&mut self, kind: CellKind, inputs: Vec<WireId>, outs: usize) -> Vec<WireId> {
        let outputs: Vec<WireId> = (self.next_wire..self.next_wire + outs).collect();
        self.next_wire += outs;
        self.cells.push(Cell {
            id: self.cells.len(),
            kind,
            inputs,
            outputs: outputs.clone(),
            stage: self.stage,
        });
        outputs
    }

    fn delay_line(&mut self, mut wire: WireId, depth: usize) -> WireId {
        for _ in 0..depth {
            wire = self.cell(CellKind::Delay, vec![wire], 1)[0];
        }
        wire
    }
}

/// Who drives a wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Driver {
    Input(usize),
    Cell { cell: usize, port: usize },
}

impl Netlist {
    pub fn point(&self) -> Result<DesignPoint, ParamError> {
        DesignPoint::new(self.n, self.m)
    }

    /// Driver of every wire; fails on undriven or multiply driven wires.
    pub fn drivers(&self) -> Result<Vec<Driver>, NetlistError> {
        let mut drivers: Vec<Option<Driver>> = vec![None; self.wire_count];
        let mut claim = |wire: WireId, d: Driver| -> Result<(), NetlistError> {
            let slot = drivers
                .get_mut(wire)
                .ok_or(NetlistError::WireOutOfRange(wire))?;
            if slot.replace(d).is_some() {
                return Err(NetlistError::MultipleDrivers(wire));
            }
            Ok(())
        };
        for (lane, &w) in self.inputs.iter().enumerate() {
            claim(w, Driver::Input(lane))?;
        }
        for cell in &self.cells {
            for (port, &w) in cell.outputs.iter().enumerate() {
                claim(
                    w,
                    Driver::Cell {
                        cell: cell.id,
                        port,
                    },
                )?;
            }
        }
        drivers
            .into_iter()
            .enumerate()
            .map(|(w, d)| d.ok_or(NetlistError::Undriven(w)))
            .collect()
    }

    /// Combinational cells in evaluation order; delay outputs count as
    /// sources.
    pub fn comb_order(&self) -> Result<Vec<usize>, NetlistError> {
        let drivers = self.drivers()?;
        let is_comb = |id: usize| !matches!(self.cells[id].kind, CellKind::Delay);
        let mut pending = vec![0usize; self.cells.len()];
        let mut fanout: Vec<Vec<usize>> = vec![Vec::new(); self.cells.len()];
        for cell in self.cells.iter().filter(|c| is_comb(c.id)) {
            for &w in &cell.inputs {
                if let Driver::Cell { cell: src, .. } = drivers[w] {
                    if is_comb(src) {
                        pending[cell.id] += 1;
                        fanout[src].push(cell.id);
                    }
                }
            }
        }
        let mut ready: Vec<usize> = (0..self.cells.len())
            .rev()
            .filter(|&id| is_comb(id) && pending[id] == 0)
            .collect();
        let mut order = Vec::new();
        while let Some(id) = ready.pop() {
            order.push(id);
            for &next in fanout[id].iter().rev() {
                pending[next] -= 1;
                if pending[next] == 0 {
                    ready.push(next);
                }
            }
        }
        let comb_total = self.cells.iter().filter(|c| is_comb(c.id)).count();
        if order.len() != comb_total {
            let stuck = (0..self.cells.len())
                .find(|&id| is_comb(id) && pending[id] > 0)
                .unwrap_or(0);
            return Err(NetlistError::CombinationalCycle(stuck));
        }
        Ok(order)
    }

    /// Structural validity: ids, port counts, parameters, single drivers,
    /// no combinational loops.
    pub fn check(&self) -> Result<(), NetlistError> {
        self.point()?;
        if self.inputs.len() != self.m || self.outputs.len() != self.m {
            return Err(NetlistError::Json(format!(
                "expected {} input and output lanes, found {} and {}",
                self.m,
                self.inputs.len(),
                self.outputs.len()
            )));
        }
        for (idx, cell) in self.cells.iter().enumerate() {
            let bad = |reason: String| NetlistError::BadCell {
                id: cell.id,
                reason,
            };
            if cell.id != idx {
                return Err(bad(format!("id out of sequence (expected {idx})")));
            }
            let ports = cell.kind.ports();
            if cell.inputs.len() != ports || cell.outputs.len() != ports {
                return Err(bad(format!(
                    "{} cell needs {ports} inputs and outputs",
                    cell.kind.name()
                )));
            }
            match &cell.kind {
                CellKind::Switch { modulus, phase } => {
                    if *modulus < 2 || !modulus.is_power_of_two() {
                        return Err(bad(format!(
                            "switch modulus {modulus} is not a power of two >= 2"
                        )));
                    }
                    if phase >= modulus {
                        return Err(bad(format!("phase {phase} >= modulus {modulus}")));
                    }
                }
                CellKind::Perm { table } => {
                    let mut seen = vec![false; table.len()];
                    for &t in table {
                        if t >= table.len() || std::mem::replace(&mut seen[t], true) {
                            return Err(bad("permutation table is not a bijection".into()));
                        }
                    }
                }
                _ => {}
            }
            for &w in &cell.inputs {
                if w >= self.wire_count {
                    return Err(NetlistError::WireOutOfRange(w));
                }
            }
        }
        if let Some(&w) = self.outputs.iter().find(|&&w| w >= self.wire_count) {
            return Err(NetlistError::WireOutOfRange(w));
        }
        self.comb_order()?;
        Ok(())
    }

    /// Delay cells crossed by each output lane along its straight-through
    /// path, split per stage.
    fn lane_depths(&self) -> Result<Vec<BTreeMap<usize, usize>>, NetlistError> {
        let drivers = self.drivers()?;
        self.outputs
            .iter()
            .map(|&out| {
                let mut per_stage = BTreeMap::new();
                let mut wire = out;
                let mut steps = 0;
                while let Driver::Cell { cell, port } = drivers[wire] {
                    let c = &self.cells[cell];
                    if c.kind == CellKind::Delay {
                        *per_stage.entry(c.stage).or_insert(0) += 1;
                    }
                    wire = c.inputs[c.kind.through(port)];
                    steps += 1;
                    if steps > self.cells.len() {
                        return Err(NetlistError::CombinationalCycle(cell));
                    }
                }
                Ok(per_stage)
            })
            .collect()
    }

    pub fn census(&self) -> CellCensus {
        let mut census = CellCensus::default();
        for cell in &self.cells {
            match cell.kind {
                CellKind::Xp => census.xp += 1,
                CellKind::Delay => census.delay += 1,
                CellKind::Switch { .. } => census.switch += 1,
                CellKind::Perm { .. } => census.perm += 1,
            }
        }
        census
    }

    pub fn to_json(&self) -> String {
        let doc = NetlistDoc {
            n: self.n,
            m: self.m,
            cells: self
                .cells
                .iter()
                .map(|c| {
                    let mut params = CellParams {
                        stage: c.stage,
                        modulus: None,
                        phase: None,
                        table: None,
                    };
                    match &c.kind {
                        CellKind::Switch { modulus, phase } => {
                            params.modulus = Some(*modulus);
                            params.phase = Some(*phase);
                        }
                        CellKind::Perm { table } => params.table = Some(table.clone()),
                        _ => {}
                    }
                    CellDoc {
                        id: c.id,
                        kind: c.kind.name().to_string(),
                        params,
                        inputs: c.inputs.clone(),
                        outputs: c.outputs.clone(),
                    }
                })
                .collect(),
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
            delay_side: self.delay_side,
            wires: self.wire_count,
            stages: self.stages.clone(),
        };
        let mut text = serde_json::to_string_pretty(&doc).expect("netlist serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, NetlistError> {
        let doc: NetlistDoc =
            serde_json::from_str(text).map_err(|e| NetlistError::Json(e.to_string()))?;
        let cells = doc
            .cells
            .into_iter()
            .map(|c| {
                let missing = |what: &str| NetlistError::BadCell {
                    id: c.id,
                    reason: format!("missing param `{what}`"),
                };
                let kind = match c.kind.as_str() {
                    "xp" => CellKind::Xp,
                    "delay" => CellKind::Delay,
                    "switch" => CellKind::Switch {
                        modulus: c.params.modulus.ok_or_else(|| missing("modulus"))?,
                        phase: c.params.phase.ok_or_else(|| missing("phase"))?,
                    },
                    "perm" => CellKind::Perm {
                        table: c.params.table.clone().ok_or_else(|| missing("table"))?,
                    },
                    other => {
                        return Err(NetlistError::BadCell {
                            id: c.id,
                            reason: format!("unknown kind `{other}`"),
                        })
                    }
                };
                Ok(Cell {
                    id: c.id,
                    kind,
                    inputs: c.inputs,
                    outputs: c.outputs,
                    stage: c.params.stage,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let nl = Netlist {
            n: doc.n,
            m: doc.m,
            cells,
            inputs: doc.inputs,
            outputs: doc.outputs,
            wire_count: doc.wires,
            delay_side: doc.delay_side,
            stages: doc.stages,
        };
        nl.check()?;
        Ok(nl)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CellCensus {
    pub xp: usize,
    pub delay: usize,
    pub switch: usize,
    pub perm: usize,
}

#[derive(Serialize, Deserialize)]
struct NetlistDoc {
    n: usize,
    m: usize,
    cells: Vec<CellDoc>,
    inputs: Vec<WireId>,
    outputs: Vec<WireId>,
    delay_side: DelaySide,
    wires: usize,
    stages: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct CellDoc {
    id: usize,
    kind: String,
    params: CellParams,
    #[serde(rename = "in")]
    inputs: Vec<WireId>,
    #[serde(rename = "out")]
    outputs: Vec<WireId>,
}

#[derive(Serialize, Deserialize)]
struct CellParams {
    stage: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    modulus: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    phase: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    table: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCost {
    pub index: usize,
    pub formula: String,
    pub xor_count: usize,
    pub mem_count: usize,
    /// Delay cells crossed per lane in this stage.
    pub latency: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub n: usize,
    pub m: usize,
    pub xor_count: usize,
    pub mem_count: usize,
    pub latency: usize,
    pub bits_per_cycle: usize,
    pub stages: Vec<StageCost>,
}

/// Counts obtained by walking the netlist, cross-checked against the closed
/// forms for `#XOR`, `#MEM` and latency.
pub fn cost_report(nl: &Netlist) -> Result<CostReport, NetlistError> {
    let point = nl.point()?;
    let depths = nl.lane_depths()?;
    let lane_total = |d: &BTreeMap<usize, usize>| d.values().sum::<usize>();
    let first = lane_total(&depths[0]);
    for (lane, d) in depths.iter().enumerate() {
        let depth = lane_total(d);
        if depth != first {
            return Err(NetlistError::UnevenDepth { lane, depth, first });
        }
    }

    let mut stages: Vec<StageCost> = nl
        .stages
        .iter()
        .enumerate()
        .map(|(index, formula)| StageCost {
            index,
            formula: formula.clone(),
            xor_count: 0,
            mem_count: 0,
            latency: depths[0].get(&index).copied().unwrap_or(0),
        })
        .collect();
    for cell in &nl.cells {
        let Some(stage) = stages.get_mut(cell.stage) else {
            return Err(NetlistError::BadCell {
                id: cell.id,
                reason: format!("stage {} has no annotation", cell.stage),
            });
        };
        match cell.kind {
            CellKind::Xp => stage.xor_count += 1,
            CellKind::Delay => stage.mem_count += 1,
            _ => {}
        }
    }

    let report = CostReport {
        n: nl.n,
        m: nl.m,
        xor_count: stages.iter().map(|s| s.xor_count).sum(),
        mem_count: stages.iter().map(|s| s.mem_count).sum(),
        latency: first,
        bits_per_cycle: nl.inputs.len(),
        stages,
    };
    for (what, walked, expected) in [
        ("#XOR", report.xor_count, point.xor_count()),
        ("#MEM", report.mem_count, point.mem_count()),
        ("latency", report.latency, point.latency()),
        ("bits per cycle", report.bits_per_cycle, point.m()),
    ] {
        if walked != expected {
            return Err(NetlistError::CostMismatch {
                what,
                walked,
                expected,
            });
        }
    }
    Ok(report)
}

/// `3N/(2M) - 1` cycles.
pub fn latency(n: usize, m: usize) -> Result<usize, ParamError> {
    Ok(DesignPoint::new(n, m)?.latency())
}

/// Specializes and elaborates `f_{N,M}` with the calibrated switches.
pub fn build(point: DesignPoint) -> Netlist {
    elaborate(&crate::formula::specialized_formula(point)).expect("generated formulas elaborate")
}
