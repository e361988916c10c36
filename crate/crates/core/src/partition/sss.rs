//! Stochastic segment swap refinement.
//!
//! Annealing over swaps of equal-length contiguous segments between two
//! clusters. The objective counts, per cluster, the distinct *other*
//! clusters it sends spikes to; spikes within a cluster never leave the
//! core.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{MemoryBudget, Partition};
use crate::error::{Error, Result};
use crate::snn::{NeuronId, SnnGraph};

/// Sum over clusters of the number of distinct external destination
/// clusters.
pub fn destination_objective(partition: &Partition, graph: &SnnGraph) -> u64 {
    let cluster_of = partition.cluster_of();
    partition
        .clusters()
        .iter()
        .enumerate()
        .map(|(c, members)| {
            members
                .iter()
                .flat_map(|&n| graph.outgoing(n))
                .map(|s| cluster_of[s.post.index()])
                .filter(|&d| d != c as u32)
                .collect::<BTreeSet<u32>>()
                .len() as u64
        })
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SssParams {
    pub seg_ratio: f64,
    /// Initial temperature; defaults to a tenth of the initial objective.
    pub t0: Option<f64>,
    pub cooling: f64,
    /// Iteration count; defaults to 200 per cluster.
    pub iters: Option<u64>,
    pub seed: u64,
}

impl Default for SssParams {
    fn default() -> Self {
        Self {
            seg_ratio: 0.1,
            t0: None,
            cooling: 0.995,
            iters: None,
            seed: 0,
        }
    }
}

/// Incrementally maintained objective: `counts[c][d]` is the number of
/// synapses from cluster `c` into cluster `d`.
struct SwapState<'a> {
    graph: &'a SnnGraph,
    budget: &'a MemoryBudget,
    // (pre, index into pre's adjacency) for every synapse into a neuron
    incoming: Vec<Vec<(u32, u32)>>,
    in_deg: Vec<u32>,
    clusters: Vec<Vec<NeuronId>>,
    cluster_of: Vec<u32>,
    counts: Vec<HashMap<u32, u32>>,
    ext_dests: Vec<u32>,
    syn_bytes: Vec<u64>,
    objective: u64,
    scratch: Vec<(u32, u32)>,
    touched: Vec<u32>,
}

impl<'a> SwapState<'a> {
    fn new(partition: &Partition, graph: &'a SnnGraph, budget: &'a MemoryBudget) -> Self {
        let n = graph.neuron_count();
        let mut incoming = vec![Vec::new(); n];
        for pre in graph.neurons() {
            for (k, s) in graph.outgoing(pre).iter().enumerate() {
                incoming[s.post.index()].push((pre.0, k as u32));
            }
        }
        let in_deg: Vec<u32> = incoming.iter().map(|v| v.len() as u32).collect();
        let clusters = partition.clusters().to_vec();
        let cluster_of = partition.cluster_of().to_vec();
        let mut state = Self {
            graph,
            budget,
            incoming,
            in_deg,
            counts: vec![HashMap::new(); clusters.len()],
            ext_dests: vec![0; clusters.len()],
            syn_bytes: vec![0; clusters.len()],
            clusters,
            cluster_of,
            objective: 0,
            scratch: Vec::new(),
            touched: Vec::new(),
        };
        for c in 0..state.clusters.len() {
            state.syn_bytes[c] = state.clusters[c]
                .iter()
                .map(|n| u64::from(state.in_deg[n.index()]) * budget.bytes_per_synapse)
                .sum();
        }
        for pre in graph.neurons() {
            for s in graph.outgoing(pre) {
                let (a, b) = (state.cluster_of[pre.index()], state.cluster_of[s.post.index()]);
                state.add_edge(a, b, 1);
            }
        }
        state
    }

    fn add_edge(&mut self, from: u32, to: u32, delta: i32) {
        let entry = self.counts[from as usize].entry(to).or_insert(0);
        let before = *entry;
        *entry = (i64::from(*entry) + i64::from(delta)) as u32;
        let after = *entry;
        if after == 0 {
            self.counts[from as usize].remove(&to);
        }
        if from != to {
            if before == 0 && after > 0 {
                self.ext_dests[from as usize] += 1;
                self.objective += 1;
            } else if before > 0 && after == 0 {
                self.ext_dests[from as usize] -= 1;
                self.objective -= 1;
            }
        }
    }

    /// Exchanges `a[sa..sa+len]` with `b[sb..sb+len]`. Applying the same
    /// swap twice restores the original state.
    fn swap(&mut self, a: usize, sa: usize, b: usize, sb: usize, len: usize) {
        let mut edges = std::mem::take(&mut self.scratch);
        edges.clear();
        let moved: Vec<NeuronId> = self.clusters[a][sa..sa + len]
            .iter()
            .chain(&self.clusters[b][sb..sb + len])
            .copied()
            .collect();
        for &m in &moved {
            edges.extend((0..self.graph.outgoing(m).len() as u32).map(|k| (m.0, k)));
            edges.extend_from_slice(&self.incoming[m.index()]);
        }
        edges.sort_unstable();
        edges.dedup();

        self.touched.clear();
        for &(pre, k) in &edges {
            let post = self.graph.outgoing(NeuronId(pre))[k as usize].post;
            let (from, to) = (self.cluster_of[pre as usize], self.cluster_of[post.index()]);
            self.add_edge(from, to, -1);
            self.touched.push(from);
        }
        for i in 0..len {
            let (x, y) = (self.clusters[a][sa + i], self.clusters[b][sb + i]);
            self.clusters[a][sa + i] = y;
            self.clusters[b][sb + i] = x;
            self.cluster_of[x.index()] = b as u32;
            self.cluster_of[y.index()] = a as u32;
            let (dx, dy) = (
                u64::from(self.in_deg[x.index()]) * self.budget.bytes_per_synapse,
                u64::from(self.in_deg[y.index()]) * self.budget.bytes_per_synapse,
            );
            self.syn_bytes[a] = self.syn_bytes[a] - dx + dy;
            self.syn_bytes[b] = self.syn_bytes[b] - dy + dx;
        }
        for &(pre, k) in &edges {
            let post = self.graph.outgoing(NeuronId(pre))[k as usize].post;
            let (from, to) = (self.cluster_of[pre as usize], self.cluster_of[post.index()]);
            self.add_edge(from, to, 1);
            self.touched.push(from);
        }
        self.touched.push(a as u32);
        self.touched.push(b as u32);
        self.touched.sort_unstable();
        self.touched.dedup();
        self.scratch = edges;
    }

    fn touched_fit(&self) -> bool {
        self.touched.iter().all(|&c| {
            let c = c as usize;
            self.syn_bytes[c] <= self.budget.synapse_bytes
                && self.clusters[c].len() as u64 * self.budget.bytes_per_neuron_state <= self.budget.neuron_bytes
                && u64::from(self.ext_dests[c]) * self.budget.bytes_per_dest_entry <= self.budget.post_conn_bytes
        })
    }
}

fn acceptance_probability(delta: i64, temperature: f64) -> f64 {
    if delta <= 0 {
        1.0
    } else if temperature <= 0.0 {
        0.0
    } else {
        (-(delta as f64) / temperature).exp()
    }
}

/// Refines `partition` by annealed segment swaps and returns the best
/// partition observed, so the objective never increases.
pub fn sss_refine(
    partition: &Partition,
    graph: &SnnGraph,
    budget: &MemoryBudget,
    params: &SssParams,
) -> Result<Partition> {
    if !(0.0..=1.0).contains(&params.seg_ratio) {
        return Err(Error::InvalidParameter(format!(
            "seg_ratio {} outside [0, 1]",
            params.seg_ratio
        )));
    }
    if !(params.cooling > 0.0 && params.cooling <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "cooling {} outside (0, 1]",
            params.cooling
        )));
    }
    let k = partition.cluster_count();
    let iters = params.iters.unwrap_or(200 * k as u64);
    if k < 2 || iters == 0 {
        return Ok(partition.clone());
    }
    let mut state = SwapState::new(partition, graph, budget);
    let min_size = state.clusters.iter().map(Vec::len).min().unwrap_or(1);
    let seg_len = ((params.seg_ratio * min_size as f64).floor() as usize).clamp(1, min_size);
    let mut temperature = params.t0.unwrap_or(state.objective as f64 / 10.0);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut best_objective = state.objective;
    let mut best = state.clusters.clone();
    for _ in 0..iters {
        let a = rng.gen_range(0..k);
        let mut b = rng.gen_range(0..k - 1);
        if b >= a {
            b += 1;
        }
        let sa = rng.gen_range(0..=state.clusters[a].len() - seg_len);
        let sb = rng.gen_range(0..=state.clusters[b].len() - seg_len);
        let u: f64 = rng.gen();

        let before = state.objective;
        state.swap(a, sa, b, sb, seg_len);
        let delta = state.objective as i64 - before as i64;
        let accept = state.touched_fit() && (delta < 0 || u < acceptance_probability(delta, temperature));
        if !accept {
            state.swap(a, sa, b, sb, seg_len);
        } else if state.objective < best_objective {
            best_objective = state.objective;
            best.clone_from(&state.clusters);
        }
        temperature *= params.cooling;
    }
    log::debug!(
        "sss: objective {} -> {} over {iters} iterations (segment {seg_len})",
        destination_objective(partition, graph),
        best_objective
    );
    Partition::from_clusters(best, graph.neuron_count())
}
