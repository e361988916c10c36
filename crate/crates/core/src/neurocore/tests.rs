#![allow(clippy::type_complexity)]

use proptest::prelude::*;

use super::*;
use crate::schedule::{build_checking_table, finalize_queue};
use crate::snn::LifParams;

const HOME: Coord = Coord::new(0, 0);
const A: Coord = Coord::new(1, 0);
const B: Coord = Coord::new(0, 1);
const C: Coord = Coord::new(1, 1);
const FIRE: f64 = 1000.0;

fn program(n: u32, dests: &[(Coord, &[u32])], synapses: &[(Coord, u32, &[(u32, i16)])]) -> CoreProgram {
    let dest_map: DestMap = dests.iter().map(|(c, ns)| (*c, ns.iter().copied().collect())).collect();
    let (q, table) = build_checking_table(&dest_map);
    CoreProgram {
        coord: HOME,
        neurons: (0..n).map(NeuronId).collect(),
        models: vec![NeuronModel::Lif(LifParams::default())],
        model_of: vec![0; n as usize],
        synapses: synapses
            .iter()
            .map(|(src, index, posts)| {
                (
                    SynapseKey {
                        src: *src,
                        index: *index,
                    },
                    posts
                        .iter()
                        .map(|&(post, w)| LocalSynapse {
                            post,
                            weight: Weight(w),
                        })
                        .collect(),
                )
            })
            .collect(),
        connections: dest_map
            .iter()
            .map(|(c, ns)| (*c, Bitmap::from_indices(n as usize, ns.iter().copied()).unwrap()))
            .collect(),
        queue: finalize_queue(&q, n),
        table,
        frac_bits: 8,
    }
}

fn packet(src: Coord, indices: &[u32]) -> SpikePacket {
    SpikePacket {
        dest: HOME,
        src,
        neuron_indices: indices.to_vec(),
        injection_time: 0,
    }
}

#[test]
fn decode_single_synapse() {
    let mut core = CoreState::new(program(2, &[], &[(A, 0, &[(1, 77)])]), Mode::Baseline).unwrap();
    assert_eq!(core.decode_packet(&packet(A, &[0])).unwrap(), 1);
    assert_eq!(core.accumulators(), &[0, 77]);
}

#[test]
fn decode_merged_enumerates_all_synapses() {
    let table: &[(Coord, u32, &[(u32, i16)])] = &[(A, 0, &[(0, 5), (2, -3)]), (A, 1, &[(1, 11)])];
    let mut merged = CoreState::new(program(3, &[], table), Mode::UniSpike).unwrap();
    assert_eq!(merged.decode_packet(&packet(A, &[0, 1])).unwrap(), 3);
    assert_eq!(merged.accumulators(), &[5, 11, -3]);

    let mut single = CoreState::new(program(3, &[], table), Mode::Baseline).unwrap();
    single.decode_packet(&packet(A, &[1])).unwrap();
    single.decode_packet(&packet(A, &[0])).unwrap();
    assert_eq!(single.accumulators(), merged.accumulators());
}

#[test]
fn unknown_synapse_key_aborts() {
    let mut core = CoreState::new(program(2, &[], &[(A, 0, &[(1, 1)])]), Mode::Baseline).unwrap();
    assert!(matches!(
        core.decode_packet(&packet(A, &[4])),
        Err(Error::UnknownSynapseKey { index: 4, .. })
    ));
    assert!(core.decode_packet(&packet(B, &[0])).is_err());
}

#[test]
fn update_outcomes() {
    // Q = [1, 2], table {1: [A], 2: [B, C]}, neuron 0 appended last
    let p = program(3, &[(A, &[1]), (B, &[1, 2]), (C, &[1, 2])], &[]);
    assert_eq!(p.queue.0, vec![1, 2, 0]);
    let mut core = CoreState::new(p, Mode::UniSpike).unwrap();
    let stim = [0.0, FIRE, 0.0];
    let first = core.update_next_neuron(&stim, 1.0).unwrap();
    assert_eq!((first.fired, first.dispatch.clone()), (true, vec![A]));
    assert!(core.activation().get(1));
    let second = core.update_next_neuron(&stim, 1.0).unwrap();
    assert_eq!((second.neuron, second.fired, second.dispatch), (2, false, vec![B, C]));
    let third = core.update_next_neuron(&stim, 1.0).unwrap();
    assert_eq!((third.fired, third.dispatch), (false, vec![]));
    assert!(matches!(
        core.update_next_neuron(&stim, 1.0),
        Err(Error::CursorExhausted(_))
    ));
}

#[test]
fn idle_timestep_costs_updates_only() {
    let mut core = CoreState::new(program(5, &[(A, &[0, 1])], &[]), Mode::UniSpike).unwrap();
    let timing = CoreTiming::default();
    let step = core.run_timestep(&[], &[0.0; 5], 1.0, &timing, 0).unwrap();
    assert!(step.emitted.is_empty());
    assert_eq!(step.busy_ps, 5 * 4 * 2000);
    assert_eq!(step.dispatched, vec![A]);
}

#[test]
fn micro_case_flit_counts() {
    let dests: &[(Coord, &[u32])] = &[(A, &[0, 1, 2])];
    let timing = CoreTiming::default();
    let stim = [FIRE; 3];
    let mut flits = Vec::new();
    for mode in [Mode::Baseline, Mode::UniSpike] {
        let mut core = CoreState::new(program(3, dests, &[]), mode).unwrap();
        let step = core.run_timestep(&[], &stim, 1.0, &timing, 0).unwrap();
        flits.push(step.emitted.iter().map(SpikePacket::flit_len).sum::<usize>());
    }
    assert_eq!(flits, vec![6, 4]);
}

#[test]
fn intra_core_spikes_arrive_next_step() {
    let p = program(2, &[], &[(HOME, 0, &[(1, 100 * 256)])]);
    let mut core = CoreState::new(p, Mode::Baseline).unwrap();
    let timing = CoreTiming::default();
    let s0 = core.run_timestep(&[], &[FIRE, 0.0], 1.0, &timing, 0).unwrap();
    assert_eq!(s0.fired, vec![0]);
    assert!(s0.emitted.is_empty());
    // 390 alone stays below threshold, 390 + 100 crosses it
    let s1 = core.run_timestep(&[], &[0.0, 390.0], 1.0, &timing, s0.busy_ps).unwrap();
    assert_eq!(s1.fired, vec![1]);
    assert_eq!(s1.activity.accumulations, 1);
    assert_eq!(s1.busy_ps, (1 + 2 * 4) * 2000);
}

#[test]
fn corrupted_program_is_rejected() {
    let mut p = program(3, &[(A, &[0, 2])], &[]);
    p.queue.0.swap(0, 1);
    assert!(!p.check().is_empty());
    assert!(CoreState::new(p, Mode::UniSpike).is_err());
}

fn arb_core() -> impl Strategy<Value = (u32, Vec<(Coord, Vec<u32>)>, Vec<bool>, usize)> {
    (2u32..40).prop_flat_map(|n| {
        (
            Just(n),
            proptest::collection::btree_map(
                (1u16..5, 0u16..4).prop_map(|(x, y)| Coord::new(x, y)),
                proptest::collection::btree_set(0..n, 1..=n as usize),
                0..8,
            )
            .prop_map(|m| m.into_iter().map(|(c, s)| (c, s.into_iter().collect())).collect()),
            proptest::collection::vec(any::<bool>(), n as usize),
            1usize..6,
        )
    })
}

proptest! {
    #[test]
    fn modes_emit_same_spike_multiset((n, dests, fire, max_body) in arb_core()) {
        let dests_ref: Vec<(Coord, &[u32])> = dests.iter().map(|(c, v)| (*c, v.as_slice())).collect();
        let stim: Vec<f64> = fire.iter().map(|&f| if f { FIRE } else { 0.0 }).collect();
        let timing = CoreTiming { max_body_flits: max_body, ..CoreTiming::default() };
        let mut pairs = Vec::new();
        let mut flit_totals = Vec::new();
        for mode in [Mode::Baseline, Mode::UniSpike] {
            let p = program(n, &dests_ref, &[]);
            let queue_pos: BTreeMap<u32, usize> = p.queue.iter().enumerate().map(|(i, q)| (q, i)).collect();
            let mut core = CoreState::new(p, mode).unwrap();
            let step = core.run_timestep(&[], &stim, 1.0, &timing, 0).unwrap();
            let mut set: Vec<(Coord, u32)> = step
                .emitted
                .iter()
                .flat_map(|p| p.neuron_indices.iter().map(move |&i| (p.dest, i)))
                .collect();
            set.sort_unstable();
            pairs.push(set);
            flit_totals.push(step.emitted.iter().map(SpikePacket::flit_len).sum::<usize>());
            if mode == Mode::UniSpike {
                let mut seen = step.dispatched.clone();
                seen.sort_unstable();
                prop_assert_eq!(seen, dests.iter().map(|(c, _)| *c).collect::<Vec<_>>());
                for p in &step.emitted {
                    prop_assert!(p.neuron_indices.len() <= max_body);
                    // emitted no earlier than the last contributor's update
                    let last = p.neuron_indices.iter().map(|i| queue_pos[i]).max().unwrap();
                    prop_assert!(p.injection_time >= (last as u64 + 1) * 4 * 2000);
                }
            }
        }
        let mut want: Vec<(Coord, u32)> = dests
            .iter()
            .flat_map(|(c, ns)| ns.iter().filter(|&&i| fire[i as usize]).map(move |&i| (*c, i)))
            .collect();
        want.sort_unstable();
        prop_assert_eq!(&pairs[0], &want);
        prop_assert_eq!(&pairs[1], &want);
        prop_assert!(flit_totals[1] <= flit_totals[0]);
    }
}
