// SPDX-License-Identifier: Apache-2.0

//! Verilog emission.
//!
//! The top module instantiates one leaf module per netlist cell, so the
//! emitted structure corresponds cell for cell to the netlist the simulator
//! interprets. Leaf cells are behavioral Verilog-2001 with a synchronous,
//! active-high reset. `out_valid` comes from a shift chain of `in_valid`
//! whose length equals the pipeline latency; each switch counter is enabled
//! by the tap of that chain matching its input depth.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::netlist::{cost_report, CellKind, Netlist, NetlistError};
use crate::polar::BitVector;
use crate::sim::{expected_output, format_vectors, input_schedule, SimError};

pub const XP_MODULE: &str = "polar_xp";
pub const DELAY_MODULE: &str = "polar_delay";
pub const SWITCH_MODULE: &str = "polar_switch";

#[derive(Debug, Error)]
pub enum RtlError {
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("stimulus has {stimulus} frames but expected has {expected}")]
    FrameCount { stimulus: usize, expected: usize },
    #[error("frame {frame}: {what} has {actual} vectors, expected {expected}")]
    FrameShape {
        frame: usize,
        what: &'static str,
        actual: usize,
        expected: usize,
    },
    #[error("cannot parse emitted verilog: {0}")]
    Census(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Manifest {
    pub n: usize,
    pub m: usize,
    pub top: String,
    pub latency: usize,
    pub xor_count: usize,
    pub mem_count: usize,
    pub delay_side: String,
    pub frames: usize,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RtlBundle {
    pub top_name: String,
    /// Top module source (`top.v`).
    pub top: String,
    /// Leaf cell library (`cells.v`).
    pub cells: String,
    pub manifest: Manifest,
}

pub fn top_name(n: usize, m: usize) -> String {
    format!("polar_enc_N{n}_M{m}")
}

fn perm_module(p: usize) -> String {
    format!("polar_perm_p{p}")
}

fn instance_name(kind: &CellKind, id: usize) -> String {
    format!("{}_{id}", kind.name())
}

/// Delay cells between the primary inputs and each wire, following the
/// straight-through path.
fn wire_depths(nl: &Netlist) -> Result<Vec<usize>, NetlistError> {
    nl.check()?;
    let mut depth = vec![usize::MAX; nl.wire_count];
    for &w in &nl.inputs {
        depth[w] = 0;
    }
    // Cells are stored in signal-flow order, so one pass settles every wire.
    for cell in &nl.cells {
        for (port, &out) in cell.outputs.iter().enumerate() {
            let src = match &cell.kind {
                CellKind::Perm { table } => cell.inputs[table[port]],
                CellKind::Delay => cell.inputs[0],
                _ => cell.inputs[port],
            };
            let d = depth[src];
            if d == usize::MAX {
                return Err(NetlistError::BadCell {
                    id: cell.id,
                    reason: "cells are not in signal-flow order".into(),
                });
            }
            depth[out] = d + usize::from(cell.kind == CellKind::Delay);
        }
    }
    Ok(depth)
}

/// Emits `top.v` and `cells.v` for `nl`.
pub fn emit_verilog(nl: &Netlist) -> Result<RtlBundle, RtlError> {
    let cost = cost_report(nl)?;
    let depths = wire_depths(nl)?;
    let name = top_name(nl.n, nl.m);
    let (m, latency) = (nl.m, cost.latency);

    let mut top = String::new();
    let t = &mut top;
    writeln!(t, "// {name}: pipelined polar encoder, N={} M={m}", nl.n).unwrap();
    writeln!(
        t,
        "// {} XOR cells, {} delay cells, latency {latency} cycles",
        cost.xor_count, cost.mem_count
    )
    .unwrap();
    writeln!(t, "// formula: {}", nl.stages.concat()).unwrap();
    writeln!(t, "module {name} (").unwrap();
    writeln!(t, "    input  wire clk,").unwrap();
    writeln!(t, "    input  wire rst,").unwrap();
    writeln!(t, "    input  wire in_valid,").unwrap();
    writeln!(t, "    input  wire [{}:0] u,", m - 1).unwrap();
    writeln!(t, "    output wire out_valid,").unwrap();
    writeln!(t, "    output wire [{}:0] x", m - 1).unwrap();
    writeln!(t, ");").unwrap();
    writeln!(t).unwrap();
    // One scalar net per netlist wire; simulators handle these far better
    // than a single wide bus with thousands of bit selects.
    let nets: Vec<String> = (0..nl.wire_count).map(|w| format!("w{w}")).collect();
    for chunk in nets.chunks(16) {
        writeln!(t, "    wire {};", chunk.join(", ")).unwrap();
    }
    writeln!(t, "    reg [{}:0] vpipe;", latency - 1).unwrap();
    writeln!(t).unwrap();
    writeln!(t, "    always @(posedge clk) begin").unwrap();
    writeln!(t, "        if (rst)").unwrap();
    writeln!(t, "            vpipe <= {latency}'d0;").unwrap();
    writeln!(t, "        else").unwrap();
    if latency == 1 {
        writeln!(t, "            vpipe <= in_valid;").unwrap();
    } else {
        writeln!(
            t,
            "            vpipe <= {{vpipe[{}:0], in_valid}};",
            latency - 2
        )
        .unwrap();
    }
    writeln!(t, "    end").unwrap();
    writeln!(t, "    assign out_valid = vpipe[{}];", latency - 1).unwrap();
    writeln!(t).unwrap();
    for (lane, &w) in nl.inputs.iter().enumerate() {
        writeln!(t, "    assign w{w} = u[{lane}];").unwrap();
    }
    for (lane, &w) in nl.outputs.iter().enumerate() {
        writeln!(t, "    assign x[{lane}] = w{w};").unwrap();
    }

    let valid_tap = |depth: usize| {
        if depth == 0 {
            "in_valid".to_string()
        } else {
            format!("vpipe[{}]", depth - 1)
        }
    };
    let concat = |wires: &[usize]| {
        let parts: Vec<String> = wires.iter().rev().map(|w| format!("w{w}")).collect();
        format!("{{{}}}", parts.join(", "))
    };

    let mut stage = usize::MAX;
    let mut perm_sizes = BTreeMap::new();
    for cell in &nl.cells {
        if cell.stage != stage {
            stage = cell.stage;
            writeln!(t).unwrap();
            writeln!(t, "    // stage {stage}: {}", nl.stages[stage]).unwrap();
        }
        let inst = instance_name(&cell.kind, cell.id);
        let (i, o) = (&cell.inputs, &cell.outputs);
        match &cell.kind {
            CellKind::Xp => writeln!(
                t,
                "    {XP_MODULE} {inst} (.a(w{}), .b(w{}), .x0(w{}), .x1(w{}));",
                i[0], i[1], o[0], o[1]
            ),
            CellKind::Delay => writeln!(
                t,
                "    {DELAY_MODULE} {inst} (.clk(clk), .rst(rst), .d(w{}), .q(w{}));",
                i[0], o[0]
            ),
            CellKind::Switch { modulus, phase } => writeln!(
                t,
                "    {SWITCH_MODULE} #(.LOG2K({}), .PHASE({phase})) {inst} (.clk(clk), .rst(rst), \
                 .en({}), .a(w{}), .b(w{}), .y0(w{}), .y1(w{}));",
                modulus.trailing_zeros(),
                valid_tap(depths[i[0]]),
                i[0],
                i[1],
                o[0],
                o[1]
            ),
            CellKind::Perm { table } => {
                perm_sizes.insert(table.len(), table.clone());
                writeln!(
                    t,
                    "    {} {inst} (.u({}), .x({}));",
                    perm_module(table.len()),
                    concat(i),
                    concat(o)
                )
            }
        }
        .unwrap();
    }
    writeln!(t).unwrap();
    writeln!(t, "endmodule").unwrap();

    let cells = cell_library(&perm_sizes);
    Ok(RtlBundle {
        top_name: name.clone(),
        top,
        cells,
        manifest: Manifest {
            n: nl.n,
            m: nl.m,
            top: name,
            latency,
            xor_count: cost.xor_count,
            mem_count: cost.mem_count,
            delay_side: nl.delay_side.as_str().to_string(),
            frames: 0,
            files: DESIGN_FILES.iter().map(|s| s.to_string()).collect(),
        },
    })
}

fn cell_library(perms: &BTreeMap<usize, Vec<usize>>) -> String {
    let mut s = String::new();
    s.push_str(
        "// Leaf cells for generated polar encoders.

// XOR-and-pass: x0 = a ^ b, x1 = b.
module polar_xp (
    input  wire a,
    input  wire b,
    output wire x0,
    output wire x1
);
    assign x0 = a ^ b;
    assign x1 = b;
endmodule

// One delay element.
module polar_delay (
    input  wire clk,
    input  wire rst,
    input  wire d,
    output reg  q
);
    always @(posedge clk) begin
        if (rst)
            q <= 1'b0;
        else
            q <= d;
    end
endmodule

// Two-lane crossbar with a free-running modulus-2^LOG2K counter that
// advances while `en` is high. Counter MSB 0: pass straight, 1: cross.
module polar_switch #(
    parameter LOG2K = 1,
    parameter PHASE = 0
) (
    input  wire clk,
    input  wire rst,
    input  wire en,
    input  wire a,
    input  wire b,
    output wire y0,
    output wire y1
);
    reg [LOG2K-1:0] count;
    wire swap = count[LOG2K-1];

    always @(posedge clk) begin
        if (rst)
            count <= PHASE;
        else if (en)
            count <= count + 1'b1;
    end

    assign y0 = swap ? b : a;
    assign y1 = swap ? a : b;
endmodule
",
    );
    for (&p, table) in perms {
        writeln!(s).unwrap();
        writeln!(s, "// Fixed {p}-lane permutation: x[i] = u[table[i]].").unwrap();
        writeln!(s, "module {} (", perm_module(p)).unwrap();
        writeln!(s, "    input  wire [{}:0] u,", p - 1).unwrap();
        writeln!(s, "    output wire [{}:0] x", p - 1).unwrap();
        writeln!(s, ");").unwrap();
        for (i, &src) in table.iter().enumerate() {
            writeln!(s, "    assign x[{i}] = u[{src}];").unwrap();
        }
        writeln!(s, "endmodule").unwrap();
    }
    s
}

/// Self-checking testbench driving `stimulus` gapless and comparing every
/// valid output cycle against `expected`. Vectors are read at run time
/// from `stimulus.txt` / `expected.txt` (overridable with
/// `+stimulus=` / `+expected=`); `+gap=` inserts idle cycles between frames.
pub fn emit_testbench(
    nl: &Netlist,
    stimulus: &[Vec<BitVector>],
    expected: &[Vec<BitVector>],
) -> Result<String, RtlError> {
    if stimulus.len() != expected.len() {
        return Err(RtlError::FrameCount {
            stimulus: stimulus.len(),
            expected: expected.len(),
        });
    }
    let per_frame = nl.n / nl.m;
    for (frame, (s, e)) in stimulus.iter().zip(expected).enumerate() {
        for (what, v) in [("stimulus", s), ("expected", e)] {
            if v.len() != per_frame {
                return Err(RtlError::FrameShape {
                    frame,
                    what,
                    actual: v.len(),
                    expected: per_frame,
                });
            }
        }
    }
    let latency = nl.point().map_err(NetlistError::from)?.latency();
    let count = stimulus.len() * per_frame;
    let alloc = count.max(1);
    let name = top_name(nl.n, nl.m);
    let m = nl.m;
    let shift_in = if m == 4 {
        "acc = nibble;".to_string()
    } else {
        format!("acc = {{acc[{}:0], nibble}};", m - 5)
    };

    Ok(format!(
        r#"`timescale 1ns/1ps
// Self-checking testbench for {name}: {frames} frame(s), {count} vectors.
// +gap=G inserts G idle cycles between frames (default 0, gapless).
// Exits through $fatal on mismatch (define POLAR_TB_NO_FATAL for $finish).
module tb;
    localparam M = {m};
    localparam LATENCY = {latency};
    localparam FRAME = {per_frame};
    localparam NSTIM = {count};
    localparam NEXP = {count};

    reg clk;
    reg rst;
    reg in_valid;
    reg [M-1:0] u;
    wire out_valid;
    wire [M-1:0] x;

    reg [M-1:0] stim_mem [0:{last}];
    reg [M-1:0] exp_mem [0:{last}];
    reg [8*256-1:0] stim_path;
    reg [8*256-1:0] exp_path;

    integer fd, ch, digits, count, which;
    integer loaded_stim, loaded_exp;
    integer cycle, seen, errors, i, g, gap;
    reg [M-1:0] acc;
    reg [3:0] nibble;
    reg in_comment;

    {name} dut (
        .clk(clk),
        .rst(rst),
        .in_valid(in_valid),
        .u(u),
        .out_valid(out_valid),
        .x(x)
    );

    initial begin
        clk = 1'b0;
        forever #5 clk = ~clk;
    end

    always @(posedge clk) cycle <= cycle + 1;

    task store;
        begin
            if (count < NSTIM) begin
                if (which == 0)
                    stim_mem[count] = acc;
                else
                    exp_mem[count] = acc;
            end
            count = count + 1;
        end
    endtask

    task load;
        begin
            count = 0;
            digits = 0;
            acc = {{M{{1'b0}}}};
            in_comment = 0;
            if (which == 0)
                fd = $fopen(stim_path, "r");
            else
                fd = $fopen(exp_path, "r");
            if (fd == 0) begin
                $display("FAIL: cannot open vector file %0d", which);
                fail;
            end
            ch = $fgetc(fd);
            while (ch != -1) begin
                if (ch == 10) begin
                    if (digits > 0)
                        store;
                    digits = 0;
                    acc = {{M{{1'b0}}}};
                    in_comment = 0;
                end else if (!in_comment) begin
                    if (ch == 35)
                        in_comment = 1;
                    else if (ch >= 48 && ch <= 57) begin
                        nibble = ch[3:0];
                        {shift_in}
                        digits = digits + 1;
                    end else if (ch >= 97 && ch <= 102) begin
                        nibble = ch[3:0] + 4'd9;
                        {shift_in}
                        digits = digits + 1;
                    end else if (ch >= 65 && ch <= 70) begin
                        nibble = ch[3:0] + 4'd9;
                        {shift_in}
                        digits = digits + 1;
                    end
                end
                ch = $fgetc(fd);
            end
            if (digits > 0)
                store;
            $fclose(fd);
        end
    endtask

    task fail;
        begin
`ifdef POLAR_TB_NO_FATAL
            $finish;
`else
            $fatal(1, "testbench failed");
`endif
        end
    endtask

    initial forever begin
        @(negedge clk);
        if (!rst && out_valid) begin
            if (seen >= NEXP) begin
                if (errors == 0)
                    $display("FAIL: unexpected output at cycle %0d: %h", cycle, x);
                errors = errors + 1;
            end else if (x !== exp_mem[seen]) begin
                if (errors == 0)
                    $display("FAIL: first mismatch at cycle %0d vector %0d: expected %h got %h",
                             cycle, seen, exp_mem[seen], x);
                errors = errors + 1;
            end
            seen = seen + 1;
        end
    end

    initial begin
        rst = 1'b1;
        in_valid = 1'b0;
        u = {{M{{1'b0}}}};
        cycle = 0;
        seen = 0;
        errors = 0;
        if (!$value$plusargs("gap=%d", gap))
            gap = 0;
        if (!$value$plusargs("stimulus=%s", stim_path))
            stim_path = "stimulus.txt";
        if (!$value$plusargs("expected=%s", exp_path))
            exp_path = "expected.txt";
        which = 0;
        load;
        loaded_stim = count;
        which = 1;
        load;
        loaded_exp = count;
        if (loaded_stim != NSTIM || loaded_exp != NEXP) begin
            $display("FAIL: vector files hold %0d/%0d vectors, expected %0d/%0d",
                     loaded_stim, loaded_exp, NSTIM, NEXP);
            fail;
        end

        repeat (4) @(posedge clk);
        #1 rst = 1'b0;
        for (i = 0; i < NSTIM; i = i + 1) begin
            if (i > 0 && i % FRAME == 0) begin
                for (g = 0; g < gap; g = g + 1) begin
                    @(posedge clk);
                    #1;
                    in_valid = 1'b0;
                    u = {{M{{1'b0}}}};
                end
            end
            @(posedge clk);
            #1;
            u = stim_mem[i];
            in_valid = 1'b1;
        end
        @(posedge clk);
        #1;
        in_valid = 1'b0;
        u = {{M{{1'b0}}}};
        repeat (LATENCY + 4) @(posedge clk);
        #1;

        if (seen != NEXP) begin
            if (errors == 0)
                $display("FAIL: saw %0d output vectors, expected %0d", seen, NEXP);
            errors = errors + 1;
        end
        if (errors == 0) begin
            $display("PASS: %0d vectors matched", NEXP);
            $finish;
        end else begin
            $display("FAIL: %0d error(s)", errors);
            fail;
        end
    end
endmodule
"#,
        frames = stimulus.len(),
        last = alloc - 1,
        shift_in = shift_in,
    ))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StructuralCounts {
    pub xor_count: usize,
    /// Data register bits (delay elements); switch counters and the valid
    /// chain are control state and not included.
    pub register_count: usize,
    /// Instances per leaf module in the top module.
    pub instances: BTreeMap<String, usize>,
}

/// Instance and operator census of an emitted bundle, by parsing its text.
pub fn structural_counts(bundle: &RtlBundle) -> Result<StructuralCounts, RtlError> {
    let modules = parse_modules(&bundle.cells)?;
    let mut instances: BTreeMap<String, usize> = BTreeMap::new();
    for line in bundle.top.lines() {
        let line = line.trim_start();
        if let Some(module) = line.split_whitespace().next() {
            if module.starts_with("polar_") && line.ends_with(");") {
                if !modules.contains_key(module) {
                    return Err(RtlError::Census(format!(
                        "instance of unknown module {module}"
                    )));
                }
                *instances.entry(module.to_string()).or_default() += 1;
            }
        }
    }
    let mut xor_count = 0;
    for (module, &count) in &instances {
        xor_count += count * modules[module].matches('^').count();
    }
    let delay_body = modules
        .get(DELAY_MODULE)
        .ok_or_else(|| RtlError::Census(format!("missing module {DELAY_MODULE}")))?;
    let register_count = instances.get(DELAY_MODULE).copied().unwrap_or(0) * reg_bits(delay_body)?;
    Ok(StructuralCounts {
        xor_count,
        register_count,
        instances,
    })
}

/// Module name to body text.
fn parse_modules(text: &str) -> Result<BTreeMap<String, String>, RtlError> {
    let mut out = BTreeMap::new();
    let mut current: Option<(String, String)> = None;
    for line in text.lines() {
        let code = line.split("//").next().unwrap_or("");
        let trimmed = code.trim();
        if let Some(rest) = trimmed.strip_prefix("module ") {
            let name: String = rest
                .chars()
                .take_while(|c| c.is_alphanumeric() || *c == '_')
                .collect();
            if current.is_some() {
                return Err(RtlError::Census(format!("nested module {name}")));
            }
            current = Some((name, String::new()));
        } else if trimmed == "endmodule" {
            let (name, body) = current
                .take()
                .ok_or_else(|| RtlError::Census("endmodule without module".into()))?;
            out.insert(name, body);
        } else if let Some((_, body)) = current.as_mut() {
            body.push_str(code);
            body.push('\n');
        }
    }
    if let Some((name, _)) = current {
        return Err(RtlError::Census(format!("module {name} is not closed")));
    }
    Ok(out)
}

/// Bits declared with `reg` in a module body.
fn reg_bits(body: &str) -> Result<usize, RtlError> {
    let mut bits = 0;
    for decl in body.split([';', ',', '(']) {
        let mut words = decl.split_whitespace().peekable();
        while let Some(word) = words.next() {
            if word != "reg" {
                continue;
            }
            let width = match words.peek() {
                Some(range) if range.starts_with('[') => {
                    let inner = range.trim_start_matches('[').trim_end_matches(']');
                    let (hi, lo) = inner
                        .split_once(':')
                        .ok_or_else(|| RtlError::Census(format!("bad range {range}")))?;
                    let parse = |s: &str| {
                        s.trim()
                            .parse::<usize>()
                            .map_err(|_| RtlError::Census(format!("non-constant range {range}")))
                    };
                    parse(hi)? - parse(lo)? + 1
                }
                _ => 1,
            };
            bits += width;
        }
    }
    Ok(bits)
}

pub const DESIGN_FILES: [&str; 8] = [
    "top.v",
    "cells.v",
    "tb.v",
    "netlist.json",
    "cost.json",
    "stimulus.txt",
    "expected.txt",
    "manifest.json",
];

/// Writes the full output tree for `nl` under `out/polar_enc_N{N}_M{M}/`,
/// with `frames` as testbench stimulus. Returns the design directory.
pub fn write_design(out: &Path, nl: &Netlist, frames: &[BitVector]) -> Result<PathBuf, RtlError> {
    let point = nl.point().map_err(NetlistError::from)?;
    let mut bundle = emit_verilog(nl)?;
    bundle.manifest.frames = frames.len();
    let cost = cost_report(nl)?;

    let stimulus = frames
        .iter()
        .map(|u| input_schedule(u, point))
        .collect::<Result<Vec<_>, _>>()?;
    let expected = frames
        .iter()
        .map(|u| expected_output(u, point))
        .collect::<Result<Vec<_>, _>>()?;
    let tb = emit_testbench(nl, &stimulus, &expected)?;
    let header = |kind: &str| format!("{} {kind}: N={} M={}", bundle.top_name, nl.n, nl.m);

    let dir = out.join(&bundle.top_name);
    std::fs::create_dir_all(&dir).map_err(|source| RtlError::Io {
        path: dir.clone(),
        source,
    })?;
    let json = |v: &dyn erased::Json| v.pretty();
    let contents: [(&str, String); 8] = [
        ("top.v", bundle.top.clone()),
        ("cells.v", bundle.cells.clone()),
        ("tb.v", tb),
        ("netlist.json", nl.to_json()),
        ("cost.json", json(&cost)),
        (
            "stimulus.txt",
            format_vectors(&header("stimulus"), &stimulus),
        ),
        (
            "expected.txt",
            format_vectors(&header("expected"), &expected),
        ),
        ("manifest.json", json(&bundle.manifest)),
    ];
    for (file, text) in contents {
        let path = dir.join(file);
        std::fs::write(&path, text).map_err(|source| RtlError::Io { path, source })?;
    }
    Ok(dir)
}

mod erased {
    pub trait Json {
        fn pretty(&self) -> String;
    }

    impl<T: serde::Serialize> Json for T {
        fn pretty(&self) -> String {
            let mut s = serde_json::to_string_pretty(self).expect("serializable");
            s.push('\n');
            s
        }
    }
}
