//! Memory-constrained partitioning of a spiking network into per-core
//! clusters, and placement of clusters on the mesh.
//!
//! The pipeline is: order neurons along a Hilbert curve over each layer's
//! spatial plane, cut the order greedily into clusters that fit the core
//! SRAM budget, then refine with stochastic segment swaps that reduce the
//! number of distinct destination clusters per cluster.

mod hilbert;
mod sss;

pub use hilbert::{hilbert_index, hilbert_point, order_for_extent};
pub use sss::{destination_objective, sss_refine, SssParams};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::snn::{NeuronId, SnnGraph};
use crate::Coord;

/// Per-core SRAM budget and the cost coefficients used to charge it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemoryBudget {
    pub synapse_bytes: u64,
    pub neuron_bytes: u64,
    pub post_conn_bytes: u64,
    pub checking_table_bytes: u64,
    pub bytes_per_synapse: u64,
    pub bytes_per_neuron_state: u64,
    pub bytes_per_dest_entry: u64,
    pub bytes_per_table_binding: u64,
}

/// Destination entry: 2-byte coordinate plus one connection bitmap bit per
/// local neuron slot.
pub fn dest_entry_bytes(core_neuron_capacity: u64) -> u64 {
    2 + core_neuron_capacity.div_ceil(8)
}

impl Default for MemoryBudget {
    /// 100.75 KB synapse, 3 KB neuron, 32.625 KB post-connection and
    /// 1.125 KB checking-table SRAM.
    fn default() -> Self {
        Self::with_neuron_bytes(3 * 1024)
    }
}

impl MemoryBudget {
    /// Default SRAM sizes with a different neuron-state budget; the
    /// destination entry size follows the resulting capacity.
    pub fn with_neuron_bytes(neuron_bytes: u64) -> Self {
        let bytes_per_neuron_state = 24;
        Self {
            synapse_bytes: 103_168,
            neuron_bytes,
            post_conn_bytes: 33_408,
            checking_table_bytes: 1_152,
            bytes_per_synapse: 1,
            bytes_per_neuron_state,
            bytes_per_dest_entry: dest_entry_bytes(neuron_bytes / bytes_per_neuron_state),
            bytes_per_table_binding: 4,
        }
    }

    pub fn neuron_capacity(&self) -> u64 {
        self.neuron_bytes / self.bytes_per_neuron_state.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.synapse_bytes,
            self.neuron_bytes,
            self.post_conn_bytes,
            self.checking_table_bytes,
        ];
        if all.contains(&0) {
            return Err(Error::InvalidParameter("memory budgets must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterCost {
    pub synapse_bytes: u64,
    pub neuron_bytes: u64,
    pub post_conn_bytes: u64,
    pub fits: bool,
}

/// SRAM cost of placing `cluster` on one core. Destination entries are
/// counted per distinct cluster (per `cluster_of`) receiving synapses from
/// the cluster, excluding neurons of the cluster itself.
pub fn memory_cost(
    cluster: &[NeuronId],
    graph: &SnnGraph,
    budget: &MemoryBudget,
    cluster_of: &[u32],
    in_degrees: &[u32],
) -> ClusterCost {
    let members: BTreeSet<NeuronId> = cluster.iter().copied().collect();
    let incoming: u64 = cluster.iter().map(|n| u64::from(in_degrees[n.index()])).sum();
    let dests: BTreeSet<u32> = cluster
        .iter()
        .flat_map(|&n| graph.outgoing(n))
        .filter(|s| !members.contains(&s.post))
        .map(|s| cluster_of[s.post.index()])
        .collect();
    let synapse_bytes = incoming * budget.bytes_per_synapse;
    let neuron_bytes = cluster.len() as u64 * budget.bytes_per_neuron_state;
    let post_conn_bytes = dests.len() as u64 * budget.bytes_per_dest_entry;
    ClusterCost {
        synapse_bytes,
        neuron_bytes,
        post_conn_bytes,
        fits: synapse_bytes <= budget.synapse_bytes
            && neuron_bytes <= budget.neuron_bytes
            && post_conn_bytes <= budget.post_conn_bytes,
    }
}

/// Neurons split into ordered clusters; cluster `i` runs on one core with
/// local indices given by position in `clusters[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    clusters: Vec<Vec<NeuronId>>,
    cluster_of: Vec<u32>,
}

impl Partition {
    pub fn from_clusters(clusters: Vec<Vec<NeuronId>>, neuron_count: usize) -> Result<Self> {
        let mut cluster_of = vec![u32::MAX; neuron_count];
        for (c, members) in clusters.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::InvalidPartition(format!("cluster {c} is empty")));
            }
            for n in members {
                let slot = cluster_of
                    .get_mut(n.index())
                    .ok_or_else(|| Error::InvalidPartition(format!("{n} out of range")))?;
                if *slot != u32::MAX {
                    return Err(Error::InvalidPartition(format!("{n} in clusters {} and {c}", *slot)));
                }
                *slot = c as u32;
            }
        }
        if let Some(n) = cluster_of.iter().position(|&c| c == u32::MAX) {
            return Err(Error::InvalidPartition(format!("n{n} unassigned")));
        }
        Ok(Self { clusters, cluster_of })
    }

    pub fn clusters(&self) -> &[Vec<NeuronId>] {
        &self.clusters
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    pub fn cluster_of(&self) -> &[u32] {
        &self.cluster_of
    }

    pub fn cluster_of_neuron(&self, n: NeuronId) -> u32 {
        self.cluster_of[n.index()]
    }

    pub fn neuron_count(&self) -> usize {
        self.cluster_of.len()
    }

    pub fn cost(&self, cluster: usize, graph: &SnnGraph, budget: &MemoryBudget) -> ClusterCost {
        memory_cost(
            &self.clusters[cluster],
            graph,
            budget,
            &self.cluster_of,
            &graph.in_degrees(),
        )
    }

    /// Indices of clusters that violate the budget.
    pub fn violations(&self, graph: &SnnGraph, budget: &MemoryBudget) -> Vec<usize> {
        let deg = graph.in_degrees();
        (0..self.clusters.len())
            .filter(|&c| !memory_cost(&self.clusters[c], graph, budget, &self.cluster_of, &deg).fits)
            .collect()
    }
}

/// Neurons sorted by `(layer, Hilbert index of (x, y), channel)`. Each
/// layer's plane is padded to the next power-of-two square. Untagged graphs
/// keep id order.
pub fn hsfc_order(graph: &SnnGraph) -> Vec<NeuronId> {
    let Some(tags) = graph.tags() else {
        return graph.neurons().collect();
    };
    let mut extent: BTreeMap<u16, u32> = BTreeMap::new();
    for t in tags {
        let e = extent.entry(t.layer).or_default();
        *e = (*e).max(u32::from(t.x) + 1).max(u32::from(t.y) + 1);
    }
    let mut keyed: Vec<((u16, u64, u16), NeuronId)> = graph
        .neurons()
        .map(|n| {
            let t = tags[n.index()];
            let order = order_for_extent(extent[&t.layer]);
            let h = hilbert_index(u32::from(t.x), u32::from(t.y), order).expect("tag inside its layer's padded grid");
            ((t.layer, h, t.channel), n)
        })
        .collect();
    keyed.sort();
    keyed.into_iter().map(|(_, n)| n).collect()
}

/// Greedy segmentation of `order`: a cluster grows while its synapse and
/// neuron memory fit and is closed only on violation. Clusters whose
/// destination entries overflow are then split in half until they fit.
pub fn segment_order(order: &[NeuronId], graph: &SnnGraph, budget: &MemoryBudget) -> Result<Partition> {
    budget.validate()?;
    let deg = graph.in_degrees();
    let mut clusters: Vec<Vec<NeuronId>> = Vec::new();
    let mut current: Vec<NeuronId> = Vec::new();
    let (mut syn, mut neu) = (0u64, 0u64);
    for &n in order {
        let add_syn = u64::from(deg[n.index()]) * budget.bytes_per_synapse;
        let add_neu = budget.bytes_per_neuron_state;
        if add_syn > budget.synapse_bytes {
            return Err(Error::Unpartitionable {
                neuron: n.0,
                resource: "synapse",
            });
        }
        if add_neu > budget.neuron_bytes {
            return Err(Error::Unpartitionable {
                neuron: n.0,
                resource: "neuron",
            });
        }
        if syn + add_syn > budget.synapse_bytes || neu + add_neu > budget.neuron_bytes {
            clusters.push(std::mem::take(&mut current));
            syn = 0;
            neu = 0;
        }
        current.push(n);
        syn += add_syn;
        neu += add_neu;
    }
    if !current.is_empty() {
        clusters.push(current);
    }

    loop {
        let partition = Partition::from_clusters(clusters, graph.neuron_count())?;
        let over = (0..partition.cluster_count()).find(|&c| {
            memory_cost(&partition.clusters[c], graph, budget, &partition.cluster_of, &deg).post_conn_bytes
                > budget.post_conn_bytes
        });
        let Some(c) = over else {
            return Ok(partition);
        };
        clusters = partition.clusters;
        if clusters[c].len() == 1 {
            return Err(Error::Unpartitionable {
                neuron: clusters[c][0].0,
                resource: "post-connection",
            });
        }
        let half = clusters[c].len() / 2;
        let tail = clusters[c].split_off(half);
        clusters.insert(c + 1, tail);
    }
}

/// Hilbert-ordered greedy partition.
pub fn initial_partition(graph: &SnnGraph, budget: &MemoryBudget) -> Result<Partition> {
    segment_order(&hsfc_order(graph), graph, budget)
}

/// Greedy partition in plain id order (the comparison baseline).
pub fn naive_partition(graph: &SnnGraph, budget: &MemoryBudget) -> Result<Partition> {
    let order: Vec<NeuronId> = graph.neurons().collect();
    segment_order(&order, graph, budget)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    #[default]
    Hilbert,
    RowMajor,
}

/// Placement of clusters on mesh coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreMap {
    pub mesh_width: u16,
    pub mesh_height: u16,
    pub placement: Vec<Coord>,
}

impl CoreMap {
    pub fn coord_of(&self, cluster: usize) -> Coord {
        self.placement[cluster]
    }
}

/// Mesh cells in placement order.
pub fn mesh_cells(width: u16, height: u16, placement: Placement) -> Vec<Coord> {
    match placement {
        Placement::RowMajor => (0..width as usize * height as usize)
            .map(|i| Coord::from_index(i, width))
            .collect(),
        Placement::Hilbert => {
            let order = order_for_extent(u32::from(width.max(height)));
            (0..1u64 << (2 * order))
                .map(|d| hilbert_point(d, order))
                .filter(|&(x, y)| x < u32::from(width) && y < u32::from(height))
                .map(|(x, y)| Coord::new(x as u16, y as u16))
                .collect()
        }
    }
}

/// Cluster `i` goes to the `i`-th cell in placement order.
pub fn map_clusters(partition: &Partition, mesh_width: u16, mesh_height: u16, placement: Placement) -> Result<CoreMap> {
    let cells = mesh_width as usize * mesh_height as usize;
    if mesh_width == 0 || mesh_height == 0 || partition.cluster_count() > cells {
        return Err(Error::MeshTooSmall {
            width: mesh_width,
            height: mesh_height,
            clusters: partition.cluster_count(),
        });
    }
    let placement = mesh_cells(mesh_width, mesh_height, placement)
        .into_iter()
        .take(partition.cluster_count())
        .collect();
    Ok(CoreMap {
        mesh_width,
        mesh_height,
        placement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::{
        build_brunel, build_conv_topology, ConvLayer, ConvSpec, NeuronKind, RandomNetSpec, Synapse, Weight,
    };

    fn conv(input: [u16; 3], out_channels: u16) -> SnnGraph {
        build_conv_topology(&ConvSpec {
            input,
            layers: vec![ConvLayer {
                out_channels,
                kernel: 3,
                stride: 1,
                padding: 1,
            }],
            weight_min: 1.0,
            weight_max: 1.0,
            seed: 0,
            model: NeuronKind::Lif.default_model(),
            frac_bits: 8,
        })
        .unwrap()
    }

    fn isolated(n: usize) -> SnnGraph {
        SnnGraph::new(
            vec![NeuronKind::Lif.default_model()],
            vec![0; n],
            vec![vec![]; n],
            None,
            8,
        )
        .unwrap()
    }

    #[test]
    fn default_budget_matches_sram_sizes() {
        let b = MemoryBudget::default();
        assert_eq!(b.synapse_bytes, 103_168); // 100.75 KB
        assert_eq!(b.neuron_bytes, 3_072);
        assert_eq!(b.post_conn_bytes, 33_408); // 32.625 KB
        assert_eq!(b.checking_table_bytes, 1_152); // 1.125 KB
        assert_eq!(b.neuron_capacity(), 128);
        assert_eq!(b.bytes_per_dest_entry, 18);
    }

    #[test]
    fn hsfc_single_neuron_and_untagged_fallback() {
        let g = build_conv_topology(&ConvSpec {
            input: [1, 1, 1],
            layers: vec![],
            weight_min: 1.0,
            weight_max: 1.0,
            seed: 0,
            model: NeuronKind::Lif.default_model(),
            frac_bits: 8,
        })
        .unwrap();
        assert_eq!(hsfc_order(&g), vec![NeuronId(0)]);
        let b = build_brunel(&RandomNetSpec::brunel(8, 2, 1)).unwrap();
        assert_eq!(hsfc_order(&b), b.neurons().collect::<Vec<_>>());
    }

    #[test]
    fn hsfc_keeps_channels_adjacent() {
        let g = build_conv_topology(&ConvSpec {
            input: [2, 2, 2],
            layers: vec![],
            weight_min: 1.0,
            weight_max: 1.0,
            seed: 0,
            model: NeuronKind::Lif.default_model(),
            frac_bits: 8,
        })
        .unwrap();
        let order = hsfc_order(&g);
        assert_eq!(order.len(), 8);
        for pair in order.chunks(2) {
            let (a, b) = (g.tag(pair[0]).unwrap(), g.tag(pair[1]).unwrap());
            assert_eq!((a.x, a.y), (b.x, b.y));
            assert_ne!(a.channel, b.channel);
        }
        let positions: Vec<(u16, u16)> = order
            .chunks(2)
            .map(|p| {
                let t = g.tag(p[0]).unwrap();
                (t.x, t.y)
            })
            .collect();
        assert_eq!(positions, vec![(0, 0), (0, 1), (1, 1), (1, 0)]);
    }

    #[test]
    fn memory_cost_arithmetic() {
        // n0, n1 in the cluster; 5 incoming synapses from n2; both feed n3.
        let w = Weight(1);
        let mut syn = vec![vec![]; 4];
        syn[0].push(Synapse {
            post: NeuronId(3),
            weight: w,
        });
        syn[1].push(Synapse {
            post: NeuronId(3),
            weight: w,
        });
        for _ in 0..3 {
            syn[2].push(Synapse {
                post: NeuronId(0),
                weight: w,
            });
        }
        for _ in 0..2 {
            syn[2].push(Synapse {
                post: NeuronId(1),
                weight: w,
            });
        }
        let g = SnnGraph::new(vec![NeuronKind::Lif.default_model()], vec![0; 4], syn, None, 8).unwrap();
        let mut budget = MemoryBudget {
            bytes_per_synapse: 1,
            bytes_per_neuron_state: 24,
            bytes_per_dest_entry: 34,
            ..MemoryBudget::default()
        };
        let p = Partition::from_clusters(
            vec![vec![NeuronId(0), NeuronId(1)], vec![NeuronId(2)], vec![NeuronId(3)]],
            4,
        )
        .unwrap();
        let c = p.cost(0, &g, &budget);
        assert_eq!((c.synapse_bytes, c.neuron_bytes, c.post_conn_bytes), (5, 48, 34));
        assert!(c.fits);
        let empty = memory_cost(&[], &g, &budget, p.cluster_of(), &g.in_degrees());
        assert_eq!(
            (empty.synapse_bytes, empty.neuron_bytes, empty.post_conn_bytes),
            (0, 0, 0)
        );
        assert!(empty.fits);
        budget.neuron_bytes = 47;
        assert!(!p.cost(0, &g, &budget).fits);
    }

    #[test]
    fn greedy_segmentation_4_4_2() {
        let g = isolated(10);
        let budget = MemoryBudget::with_neuron_bytes(4 * 24);
        let p = initial_partition(&g, &budget).unwrap();
        let sizes: Vec<usize> = p.clusters().iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![4, 4, 2]);
        assert_eq!(p.clusters()[2], vec![NeuronId(8), NeuronId(9)]);
    }

    #[test]
    fn fits_in_one_core() {
        let g = conv([2, 4, 4], 2);
        let p = initial_partition(&g, &MemoryBudget::default()).unwrap();
        assert_eq!(p.cluster_count(), 1);
    }

    #[test]
    fn budget_below_one_neuron() {
        let g = isolated(3);
        let budget = MemoryBudget::with_neuron_bytes(10);
        assert!(matches!(
            initial_partition(&g, &budget),
            Err(Error::Unpartitionable { resource: "neuron", .. })
        ));
    }

    #[test]
    fn post_conn_overflow_is_split() {
        // n0 feeds four different downstream clusters' worth of neurons.
        let mut syn = vec![vec![]; 9];
        for post in 1..9 {
            syn[0].push(Synapse {
                post: NeuronId(post),
                weight: Weight(1),
            });
            syn[1].push(Synapse {
                post: NeuronId(post),
                weight: Weight(1),
            });
        }
        let g = SnnGraph::new(vec![NeuronKind::Lif.default_model()], vec![0; 9], syn, None, 8).unwrap();
        let mut budget = MemoryBudget::with_neuron_bytes(2 * 24);
        budget.bytes_per_dest_entry = 10;
        budget.post_conn_bytes = 40;
        let p = initial_partition(&g, &budget).unwrap();
        assert!(p.violations(&g, &budget).is_empty());
        budget.post_conn_bytes = 5;
        assert!(initial_partition(&g, &budget).is_err());
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::from_clusters(vec![vec![NeuronId(0)], vec![NeuronId(0)]], 1).is_err());
        assert!(Partition::from_clusters(vec![vec![NeuronId(0)]], 2).is_err());
        assert!(Partition::from_clusters(vec![vec![]], 0).is_err());
    }

    #[test]
    fn mapping() {
        let one = Partition::from_clusters(vec![(0..4).map(NeuronId).collect()], 4).unwrap();
        assert_eq!(
            map_clusters(&one, 1, 1, Placement::Hilbert).unwrap().placement,
            vec![Coord::new(0, 0)]
        );
        let four = Partition::from_clusters((0..4).map(|i| vec![NeuronId(i)]).collect(), 4).unwrap();
        let m = map_clusters(&four, 2, 2, Placement::Hilbert).unwrap();
        for (i, c) in m.placement.iter().enumerate() {
            assert_eq!(hilbert_index(u32::from(c.x), u32::from(c.y), 1).unwrap(), i as u64);
        }
        let five = Partition::from_clusters((0..5).map(|i| vec![NeuronId(i)]).collect(), 5).unwrap();
        assert!(matches!(
            map_clusters(&five, 2, 2, Placement::Hilbert),
            Err(Error::MeshTooSmall { .. })
        ));
        let rm = map_clusters(&four, 4, 1, Placement::RowMajor).unwrap();
        assert_eq!(rm.placement[3], Coord::new(3, 0));
    }

    #[test]
    fn hilbert_cells_cover_non_square_mesh() {
        let mut cells = mesh_cells(5, 3, Placement::Hilbert);
        assert_eq!(cells.len(), 15);
        cells.sort();
        cells.dedup();
        assert_eq!(cells.len(), 15);
    }
}
