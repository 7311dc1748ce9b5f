use std::collections::{BTreeMap, BTreeSet};

use approx::assert_abs_diff_eq;
use num_complex::Complex64;

use linopt::dna::layout::{nested_delay_total, pump_delay_schedule};
use linopt::dna::ops::is_node_local;
use linopt::dna::protocol::{
    attempt_success_probabilities, exact_distribution, replay, run_protocol, Message, MessageKind, ProtocolScenario,
    ProtocolTranscript,
};
use linopt::fock::{Mode, ModeRegister, PureState};
use linopt::herald::HeraldOutcome;
use linopt::multirail::{adaptive_measure, passive_multiplex, Attempt, Basis, Mechanism, MultirailQubit};
use linopt::optics;
use linopt::scenarios::{ProtocolChoice, RunConfig};

const TOY_SEEDS: [u64; 6] = [51, 62, 85, 105, 111, 112];

#[test]
fn seven_node_toy_completes_with_agreeing_z() {
    let s = ProtocolScenario::seven_node_toy();
    for seed in TOY_SEEDS {
        let run = run_protocol(&s, seed).unwrap();
        let out = run.result.as_ref().unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        assert_eq!(out.len(), 2);
        assert!(out[0].value.is_some(), "seed {seed}");
        assert_eq!(out[0].value, out[1].value, "seed {seed}");
        assert_eq!(run.transcript.of_kind(MessageKind::HeraldReport).count(), 7 * s.groups.bsg_attempts);
    }
}

/// Nodes with at least one click in the generator herald reports of `messages`.
fn clicked_nodes(messages: &[Message]) -> BTreeSet<usize> {
    messages
        .iter()
        .filter(|m| m.kind == MessageKind::HeraldReport && m.payload["stage"] == "bsg")
        .filter(|m| m.payload["pattern"].as_array().unwrap().iter().any(|c| c.as_u64() != Some(0)))
        .map(|m| m.node.unwrap())
        .collect()
}

#[test]
fn cross_node_heralds_are_classified_globally() {
    for bases in [[Basis::Z, Basis::Z], [Basis::X, Basis::X]] {
        let d = exact_distribution(&ProtocolScenario::bell_pair(4, bases), 0).unwrap();
        let (mut cross, mut same) = (0.0, 0.0);
        for (key, p) in &d.reports {
            let messages: Vec<Message> = key.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
            let outcomes: Vec<&Message> = messages.iter().filter(|m| m.kind == MessageKind::OutcomeReport).collect();
            if outcomes.is_empty() {
                continue;
            }
            match clicked_nodes(&messages).len() {
                1 => same += p,
                _ => cross += p,
            }
        }
        assert!(cross > 0.0 && same > 0.0, "{bases:?}: same {same}, cross {cross}");
        assert_abs_diff_eq!(same + cross, 1.0 - d.abort_probability(), epsilon = 1e-9);
        let correlated = d.logical_probability(|o| match (o[0].value, o[1].value) {
            (Some(a), Some(b)) => if bases[0] == Basis::Z { a == b } else { a * b == 1 },
            _ => false,
        });
        assert_abs_diff_eq!(correlated, same + cross, epsilon = 1e-9);
    }
}

#[test]
fn transcripts_replay_and_round_trip() {
    let scenarios = [
        ProtocolScenario::seven_node_toy(),
        ProtocolScenario::fused_pairs(2, 2, 3, 0.7, [Basis::X, Basis::X]),
        ProtocolScenario::bell_pair(4, [Basis::X, Basis::Z]),
    ];
    for s in &scenarios {
        for seed in [0, 62] {
            let run = run_protocol(s, seed).unwrap();
            assert_eq!(replay(s, &run.transcript).unwrap(), run.transcript.commands());
            let text = run.transcript.to_jsonl();
            assert_eq!(ProtocolTranscript::from_jsonl(&text).unwrap(), run.transcript);
            assert_eq!(run_protocol(s, seed).unwrap().transcript.to_jsonl(), text);
        }
    }
}

#[test]
fn node_networks_are_local() {
    for s in [ProtocolScenario::seven_node_toy(), ProtocolScenario::fused_pairs(4, 1, 2, 1.0, [Basis::X, Basis::X])] {
        let layout = s.validate().unwrap().layout;
        for seed in 0..4 {
            let run = run_protocol(&s, seed).unwrap();
            assert!(!run.networks.is_empty());
            assert!(run.networks.iter().all(|n| is_node_local(n, &layout)));
        }
    }
}

#[test]
fn rounds_never_go_backwards() {
    let s = ProtocolScenario::fused_pairs(2, 2, 3, 0.7, [Basis::X, Basis::Z]);
    for seed in 0..8 {
        let run = run_protocol(&s, seed).unwrap();
        let rounds: Vec<u32> = run.transcript.messages.iter().map(|m| m.round).collect();
        assert!(rounds.windows(2).all(|w| w[0] <= w[1]), "seed {seed}: {rounds:?}");
    }
}

#[test]
fn attempts_compose_into_group_success() {
    let s = ProtocolScenario::fused_pairs(2, 2, 3, 0.7, [Basis::X, Basis::X]);
    for seed in 0..4 {
        let p = attempt_success_probabilities(&s, seed).unwrap();
        for row in &p {
            let group = 1.0 - row.iter().map(|q| 1.0 - q).product::<f64>();
            let best = row.iter().copied().fold(0.0, f64::max);
            assert!(group >= best - 1e-12);
            assert!(group <= 1.0 + 1e-12);
        }
    }
}

#[test]
fn block_commands_cover_failed_attempts() {
    let s = ProtocolScenario::fused_pairs(2, 2, 3, 0.7, [Basis::X, Basis::X]);
    let geom = s.validate().unwrap();
    let mut checked = 0;
    for seed in 0..40 {
        let run = run_protocol(&s, seed).unwrap();
        for d in run.transcript.of_kind(MessageKind::Decision).filter(|m| m.payload["stage"] == "multiplex") {
            let pair = d.payload["pair"].as_u64().unwrap() as usize;
            let survivor = d.payload["survivor"].as_u64().unwrap() as usize;
            let blocked: BTreeSet<Mode> = run
                .transcript
                .of_kind(MessageKind::BlockCommand)
                .filter(|m| m.payload["pair"].as_u64() == Some(pair as u64) && m.payload.get("modes").is_some())
                .flat_map(|m| serde_json::from_value::<Vec<Mode>>(m.payload["modes"].clone()).unwrap())
                .collect();
            let ports = |a: usize| -> BTreeSet<Mode> {
                (0..geom.layout.nodes).flat_map(|i| (0..4).map(move |r| (i, r))).map(|(i, r)| geom.layout.mode(i, geom.slot(pair, a, r))).collect()
            };
            for a in 0..s.groups.bsg_attempts {
                if a == survivor {
                    assert!(blocked.is_disjoint(&ports(a)), "seed {seed}: survivor blocked");
                } else {
                    assert!(ports(a).is_subset(&blocked), "seed {seed}: attempt {a} left open");
                }
            }
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn pump_schedule_aligns_outputs() {
    let latency = 5;
    let d = pump_delay_schedule(4, latency).unwrap();
    assert_eq!(d.len(), 4);
    // Attempt i is pumped at i·latency and leaves after its delay.
    let leave: BTreeSet<u32> = d.iter().enumerate().map(|(i, x)| i as u32 * latency + x).collect();
    assert_eq!(leave.len(), 1);
    assert_eq!(nested_delay_total(&[(4, 5), (3, 40)]).unwrap(), 3 * 5 + 2 * 40);
    assert!(pump_delay_schedule(0, 1).is_err());
}

fn marginals(out: &[HeraldOutcome]) -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    for o in out {
        *m.entry(o.classification.to_string()).or_default() += o.probability;
    }
    m
}

#[test]
fn multiplexed_survivor_is_hidden() {
    let attempts = 4u32;
    let qubits: Vec<MultirailQubit> =
        (0..attempts).map(|a| MultirailQubit::dual_rail(Mode::spatial(2 * a), Mode::spatial(2 * a + 1)).unwrap()).collect();
    let reg = ModeRegister::spatial(2 * attempts).unwrap();
    let spread = optics::hadamard_matrix(2).unwrap();
    let (alpha, beta) = (Complex64::new(0.6, 0.0), Complex64::from_polar(0.8, 0.7));
    let mut stats: Vec<(BTreeMap<String, f64>, BTreeMap<String, f64>)> = Vec::new();
    for s in 0..attempts as usize {
        let zero = PureState::make_state(reg.clone(), &[qubits[s].zero()[0]]).unwrap();
        let one = PureState::make_state(reg.clone(), &[qubits[s].one()[0]]).unwrap();
        let input = PureState::superpose(&[(alpha, &zero), (beta, &one)]).unwrap();
        let list: Vec<Attempt> = qubits.iter().enumerate().map(|(a, q)| Attempt { success: a == s, qubits: vec![q.clone()] }).collect();
        let res = passive_multiplex(&input, &list, &spread).unwrap();
        assert_eq!(res.report.survivor, Some(s));
        let out = res.pure_state().unwrap();
        let q = &res.qubits[0];
        stats.push((
            marginals(&adaptive_measure(&out, q, Basis::X, Mechanism::DetectOnly).unwrap()),
            marginals(&adaptive_measure(&out, q, Basis::Z, Mechanism::DetectOnly).unwrap()),
        ));
    }
    for (x, z) in &stats[1..] {
        for (a, b) in [(x, &stats[0].0), (z, &stats[0].1)] {
            assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
            for (k, p) in a {
                assert_abs_diff_eq!(*p, b[k], epsilon = 1e-9);
            }
        }
    }
    assert_abs_diff_eq!(stats[0].1["success(z-zero)"], 0.36, epsilon = 1e-9);
}

#[test]
fn scenario_toml_round_trip() {
    for s in [
        ProtocolScenario::seven_node_toy(),
        ProtocolScenario::fused_pairs(4, 2, 3, 0.7, [Basis::X, Basis::Z]),
    ] {
        let text = s.to_toml().unwrap();
        assert_eq!(ProtocolScenario::from_toml(&text).unwrap(), s);
    }
    let cfg = RunConfig::from_toml(
        r#"
        seed = 7
        phase_vectors = 3

        [protocol]
        nodes = 2
        fusion_plan = []
        seed = 0
        measurements = [{ qubit = 0, basis = "Z" }, { qubit = 1, basis = "Z" }]
        groups = { sources = 1, bsg_attempts = 1, pairs = 1, efficiency = 1.0 }
        noise = { node_phases = [], mode_phases = [] }
        "#,
    )
    .unwrap();
    assert_eq!(cfg.protocol.unwrap().resolve().unwrap(), ProtocolScenario::bell_pair(2, [Basis::Z, Basis::Z]));
    let named = RunConfig::from_toml("protocol = \"seven-node-toy\"").unwrap();
    assert_eq!(named.protocol, Some(ProtocolChoice::Named("seven-node-toy".into())));
    assert!(RunConfig::from_toml("protocol = \"nope\"").unwrap().protocol.unwrap().resolve().is_err());
}
