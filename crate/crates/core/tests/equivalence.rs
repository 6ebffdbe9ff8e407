// SPDX-License-Identifier: Apache-2.0

//! End-to-end checks of generated netlists against an independent encoder.

use polargen::netlist::{build, cost_report, Netlist};
use polargen::polar::{encode_reference, CodeParams};
use polargen::sim::{
    assemble_input, input_schedule, random_frames, run_frames, verify_netlist, verify_sweep,
};
use polargen::{BitVector, DesignPoint};
use proptest::prelude::*;

/// z[i] = XOR of u[j] over every j whose bits include those of i; this is
/// the transform without the output reordering, i.e. the natural-order
/// stream the hardware emits.
fn subset_transform(u: &BitVector) -> BitVector {
    let n = u.len();
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|j| j & i == i)
                .fold(false, |acc, j| acc ^ u.get(j))
        })
        .collect()
}

fn all_points(max_n: usize) -> Vec<DesignPoint> {
    (3..=max_n.trailing_zeros())
        .flat_map(|k| DesignPoint::all_for(1 << k).unwrap())
        .collect()
}

fn outputs_flat(nl: &Netlist, frames: &[BitVector], gap: usize) -> Vec<BitVector> {
    let run = run_frames(nl, frames, gap).unwrap();
    assert_eq!(run.extra_outputs, 0);
    run.outputs
        .iter()
        .map(|slices| slices.iter().flat_map(|s| s.as_slice().to_vec()).collect())
        .collect()
}

#[test]
fn every_point_up_to_1024() {
    let points = all_points(1024);
    assert_eq!(points.len(), 36);
    for report in verify_sweep(&points, 10, 2024, 0) {
        assert!(report.passed, "{report}");
        assert_eq!(
            report.latency_measured,
            Some(report.latency_expected as u64)
        );
        let n = report.n;
        let m = report.m;
        assert_eq!(report.latency_expected, 3 * n / (2 * m) - 1);
    }
}

#[test]
fn streams_equal_subset_transform() {
    for p in all_points(256) {
        let nl = build(p);
        let frames = random_frames(p, 3, 99);
        for (u, got) in frames.iter().zip(outputs_flat(&nl, &frames, 0)) {
            assert_eq!(got, subset_transform(u), "{p}");
        }
    }
}

#[test]
fn large_code_length() {
    // Beyond the CLI sweep: N = 4096 at a few parallelisms.
    for m in [4, 64, 2048] {
        let p = DesignPoint::new(4096, m).unwrap();
        let nl = build(p);
        let rep = verify_netlist(&nl, &random_frames(p, 2, 5), 0).unwrap();
        assert!(rep.passed, "{rep}");
        let cost = cost_report(&nl).unwrap();
        assert_eq!(cost.xor_count, m / 2 * 12);
        assert_eq!(cost.mem_count, 3 * 4096 / 2 - m);
    }
}

#[test]
fn netlist_json_round_trip_simulates_identically() {
    let p = DesignPoint::new(128, 16).unwrap();
    let nl = build(p);
    let back = Netlist::from_json(&nl.to_json()).unwrap();
    assert_eq!(back, nl);
    let frames = random_frames(p, 4, 1);
    assert_eq!(
        outputs_flat(&back, &frames, 1),
        outputs_flat(&nl, &frames, 1)
    );
}

fn point_strategy() -> impl Strategy<Value = DesignPoint> {
    (3u32..=10)
        .prop_flat_map(|k| (2u32..k).prop_map(move |j| DesignPoint::new(1 << k, 1 << j).unwrap()))
}

fn word(n: usize) -> impl Strategy<Value = BitVector> {
    proptest::collection::vec(any::<bool>(), n).prop_map(BitVector::from)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gaps_do_not_change_results(p in point_strategy(), gap in 0usize..20, seed in any::<u64>()) {
        let nl = build(p);
        let frames = random_frames(p, 3, seed);
        let rep = verify_netlist(&nl, &frames, gap).unwrap();
        prop_assert!(rep.passed, "{}", rep);
    }

    #[test]
    fn hardware_is_linear(
        (p, a, b) in point_strategy().prop_flat_map(|p| (Just(p), word(p.n()), word(p.n())))
    ) {
        let nl = build(p);
        let sum = &a ^ &b;
        let outs = outputs_flat(&nl, &[a, b, sum], 0);
        prop_assert_eq!(&outs[0] ^ &outs[1], outs[2].clone());
    }

    #[test]
    fn schedule_round_trip(
        (p, u) in point_strategy().prop_flat_map(|p| (Just(p), word(p.n())))
    ) {
        let slices = input_schedule(&u, p).unwrap();
        prop_assert_eq!(slices.len(), p.n() / p.m());
        prop_assert_eq!(assemble_input(&slices, p).unwrap(), u);
    }

    #[test]
    fn oracle_agrees_with_subset_rule(u in (3u32..=9).prop_flat_map(|k| word(1 << k))) {
        let x = encode_reference(&u, CodeParams::new(u.len()).unwrap()).unwrap();
        let z = subset_transform(&u);
        let bits = u.len().trailing_zeros();
        for i in 0..u.len() {
            let r = polargen::polar::bitrev_index(i, bits).unwrap();
            prop_assert_eq!(x.get(i), z.get(r));
        }
    }
}
