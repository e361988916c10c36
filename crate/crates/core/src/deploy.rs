//! Per-core deployment artifacts and the bundle file that carries them.
//!
//! Bundle layout, all integers little-endian:
//!
//! ```text
//! magic "USDB", u32 version (1)
//! u16 config digest length, digest bytes (UTF-8)
//! u16 partitioner label length, label bytes (UTF-8)
//! u16 mesh width, u16 mesh height, u8 frac_bits, u32 neuron count
//! u64 destination objective
//! 8 x u64 memory budget (synapse, neuron, post_conn, checking_table,
//!        bytes_per_synapse, bytes_per_neuron_state, bytes_per_dest_entry,
//!        bytes_per_table_binding)
//! neuron count x u16 layer
//! u32 core count, then per core:
//!   u16 x, u16 y
//!   u32 local count n, n x u32 global neuron id
//!   u16 model count, models (tag u8: 0 LIF, 1 Izhikevich, 2 AdEx; f64 params)
//!   n x u16 model index
//!   u32 synapse keys, per key: u16 src x, u16 src y, u32 src index,
//!       u32 fanout, fanout x (u32 local post, i16 raw weight)
//!   u32 destinations, per destination: u16 x, u16 y, ceil(n/64) x u64 bitmap words
//!   u32 queue length, entries x u32 local index
//!   u32 barriers, per barrier: u32 local index, u16 count, count x (u16 x, u16 y)
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neurocore::{Bitmap, CoreProgram, LocalSynapse, SynapseKey};
use crate::partition::{destination_objective, CoreMap, MemoryBudget, Partition};
use crate::schedule::{build_checking_table, finalize_queue, CheckingTable, DestMap, ExecQueue};
use crate::snn::io::{read_model_binary, write_model_binary};
use crate::snn::{NeuronId, SnnGraph, Weight};
use crate::Coord;

const MAGIC: &[u8; 4] = b"USDB";
const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeReport {
    pub coord: Coord,
    pub neurons: usize,
    pub synapse_bytes: u64,
    pub neuron_bytes: u64,
    pub post_conn_bytes: u64,
    pub checking_table_bytes: u64,
    pub fits: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub config_digest: String,
    /// Name of the partitioner that produced the clusters.
    pub partitioner: String,
    pub mesh_width: u16,
    pub mesh_height: u16,
    pub frac_bits: u8,
    pub neuron_count: usize,
    pub destination_objective: u64,
    pub budget: MemoryBudget,
    /// Layer of every global neuron (0 for untagged graphs).
    pub layers: Vec<u16>,
    pub cores: Vec<CoreProgram>,
}

impl Deployment {
    pub fn size_report(&self) -> Vec<SizeReport> {
        let b = &self.budget;
        self.cores
            .iter()
            .map(|p| {
                let synapses: u64 = p.synapses.values().map(|v| v.len() as u64).sum();
                let r = SizeReport {
                    coord: p.coord,
                    neurons: p.local_count(),
                    synapse_bytes: synapses * b.bytes_per_synapse,
                    neuron_bytes: p.local_count() as u64 * b.bytes_per_neuron_state,
                    post_conn_bytes: p.connections.len() as u64 * b.bytes_per_dest_entry,
                    checking_table_bytes: p.table.bindings() as u64 * b.bytes_per_table_binding,
                    fits: false,
                };
                SizeReport {
                    fits: r.synapse_bytes <= b.synapse_bytes
                        && r.neuron_bytes <= b.neuron_bytes
                        && r.post_conn_bytes <= b.post_conn_bytes
                        && r.checking_table_bytes <= b.checking_table_bytes,
                    ..r
                }
            })
            .collect()
    }

    /// Every inconsistency found, one message each; empty when deployable.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut coords = BTreeSet::new();
        let mut seen = vec![0u32; self.neuron_count];
        if self.layers.len() != self.neuron_count {
            out.push(format!(
                "{} layer tags for {} neurons",
                self.layers.len(),
                self.neuron_count
            ));
        }
        for p in &self.cores {
            if p.coord.x >= self.mesh_width || p.coord.y >= self.mesh_height {
                out.push(format!(
                    "core {} outside the {}x{} mesh",
                    p.coord, self.mesh_width, self.mesh_height
                ));
            }
            if !coords.insert(p.coord) {
                out.push(format!("two cores placed at {}", p.coord));
            }
            if p.frac_bits != self.frac_bits {
                out.push(format!("core {} uses {} fractional bits", p.coord, p.frac_bits));
            }
            for n in &p.neurons {
                match seen.get_mut(n.index()) {
                    Some(c) => *c += 1,
                    None => out.push(format!("core {} holds unknown neuron {n}", p.coord)),
                }
            }
            out.extend(p.check().into_iter().map(|m| format!("core {}: {m}", p.coord)));
        }
        for p in &self.cores {
            for (dest, bits) in &p.connections {
                match self.cores.iter().find(|q| q.coord == *dest) {
                    None => out.push(format!("core {} connects to unplaced core {dest}", p.coord)),
                    Some(q) => {
                        for i in bits.iter_ones() {
                            if !q.synapses.contains_key(&SynapseKey { src: p.coord, index: i }) {
                                out.push(format!("core {dest} has no synapses for {}#{i}", p.coord));
                            }
                        }
                    }
                }
            }
        }
        for (i, c) in seen.iter().enumerate() {
            if *c != 1 {
                out.push(format!("neuron n{i} deployed {c} times"));
            }
        }
        for r in self.size_report() {
            if !r.fits {
                out.push(format!(
                    "core {} exceeds its memory budget (synapse {} B, neuron {} B, post-conn {} B, table {} B)",
                    r.coord, r.synapse_bytes, r.neuron_bytes, r.post_conn_bytes, r.checking_table_bytes
                ));
            }
        }
        out
    }
}

/// Builds one core program per cluster: local synapse tables, connection
/// bitmaps, execution queue and checking table.
pub fn build_deployment(
    graph: &SnnGraph,
    partition: &Partition,
    core_map: &CoreMap,
    budget: &MemoryBudget,
    config_digest: &str,
    partitioner: &str,
) -> Result<Deployment> {
    if partition.neuron_count() != graph.neuron_count() {
        return Err(Error::InvalidPartition(format!(
            "partition covers {} neurons, graph has {}",
            partition.neuron_count(),
            graph.neuron_count()
        )));
    }
    if core_map.placement.len() != partition.cluster_count() {
        return Err(Error::InvalidPartition(
            "core map and partition disagree on cluster count".into(),
        ));
    }
    let clusters = partition.clusters();
    let mut local_of = vec![0u32; graph.neuron_count()];
    for cluster in clusters {
        for (j, n) in cluster.iter().enumerate() {
            local_of[n.index()] = j as u32;
        }
    }
    let mut synapses: Vec<BTreeMap<SynapseKey, Vec<LocalSynapse>>> = vec![BTreeMap::new(); clusters.len()];
    let mut dest_maps: Vec<DestMap> = vec![DestMap::new(); clusters.len()];
    for (i, cluster) in clusters.iter().enumerate() {
        let src = core_map.coord_of(i);
        for (j, &n) in cluster.iter().enumerate() {
            for s in graph.outgoing(n) {
                let k = partition.cluster_of_neuron(s.post) as usize;
                synapses[k]
                    .entry(SynapseKey { src, index: j as u32 })
                    .or_default()
                    .push(LocalSynapse {
                        post: local_of[s.post.index()],
                        weight: s.weight,
                    });
                if k != i {
                    dest_maps[i].entry(core_map.coord_of(k)).or_default().insert(j as u32);
                }
            }
        }
    }
    let mut cores = Vec::with_capacity(clusters.len());
    for (i, (cluster, (syn, dest_map))) in clusters.iter().zip(synapses.into_iter().zip(dest_maps)).enumerate() {
        let n = cluster.len();
        let (q, table) = build_checking_table(&dest_map);
        let connections = dest_map
            .iter()
            .map(|(c, members)| Ok((*c, Bitmap::from_indices(n, members.iter().copied())?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        cores.push(CoreProgram {
            coord: core_map.coord_of(i),
            neurons: cluster.clone(),
            models: graph.models().to_vec(),
            model_of: cluster.iter().map(|&id| graph.model_index(id)).collect(),
            synapses: syn,
            connections,
            queue: finalize_queue(&q, n as u32),
            table,
            frac_bits: graph.frac_bits(),
        });
    }
    Ok(Deployment {
        config_digest: config_digest.to_string(),
        partitioner: partitioner.to_string(),
        mesh_width: core_map.mesh_width,
        mesh_height: core_map.mesh_height,
        frac_bits: graph.frac_bits(),
        neuron_count: graph.neuron_count(),
        destination_objective: destination_objective(partition, graph),
        budget: budget.clone(),
        layers: graph.neurons().map(|id| graph.tag(id).map_or(0, |t| t.layer)).collect(),
        cores,
    })
}

fn put_coord<W: Write>(w: &mut W, c: Coord) -> Result<()> {
    w.write_u16::<LittleEndian>(c.x)?;
    w.write_u16::<LittleEndian>(c.y)?;
    Ok(())
}

fn get_coord<R: Read>(r: &mut R) -> Result<Coord> {
    Ok(Coord::new(r.read_u16::<LittleEndian>()?, r.read_u16::<LittleEndian>()?))
}

fn put_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    let len = u16::try_from(s.len()).map_err(|_| Error::Artifact(format!("string of {} bytes too long", s.len())))?;
    w.write_u16::<LittleEndian>(len)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn get_str<R: Read>(r: &mut R) -> Result<String> {
    let mut buf = vec![0u8; r.read_u16::<LittleEndian>()? as usize];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| Error::Artifact("string field is not UTF-8".into()))
}

fn put_len<W: Write>(w: &mut W, n: usize) -> Result<()> {
    let n = u32::try_from(n).map_err(|_| Error::Artifact(format!("length {n} exceeds u32")))?;
    w.write_u32::<LittleEndian>(n)?;
    Ok(())
}

/// Reads a u32 length, rejecting values larger than `limit` before any allocation.
fn get_len<R: Read>(r: &mut R, limit: usize, what: &str) -> Result<usize> {
    let n = r.read_u32::<LittleEndian>()? as usize;
    if n > limit {
        return Err(Error::Artifact(format!("{what} count {n} exceeds limit {limit}")));
    }
    Ok(n)
}

const MAX_ITEMS: usize = 1 << 26;

pub fn write_bundle<W: Write>(d: &Deployment, w: &mut W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    put_str(w, &d.config_digest)?;
    put_str(w, &d.partitioner)?;
    w.write_u16::<LittleEndian>(d.mesh_width)?;
    w.write_u16::<LittleEndian>(d.mesh_height)?;
    w.write_u8(d.frac_bits)?;
    put_len(w, d.neuron_count)?;
    w.write_u64::<LittleEndian>(d.destination_objective)?;
    let b = &d.budget;
    for v in [
        b.synapse_bytes,
        b.neuron_bytes,
        b.post_conn_bytes,
        b.checking_table_bytes,
        b.bytes_per_synapse,
        b.bytes_per_neuron_state,
        b.bytes_per_dest_entry,
        b.bytes_per_table_binding,
    ] {
        w.write_u64::<LittleEndian>(v)?;
    }
    if d.layers.len() != d.neuron_count {
        return Err(Error::Artifact("layer list does not match neuron count".into()));
    }
    for &l in &d.layers {
        w.write_u16::<LittleEndian>(l)?;
    }
    put_len(w, d.cores.len())?;
    for p in &d.cores {
        put_coord(w, p.coord)?;
        put_len(w, p.neurons.len())?;
        for n in &p.neurons {
            w.write_u32::<LittleEndian>(n.0)?;
        }
        w.write_u16::<LittleEndian>(
            u16::try_from(p.models.len()).map_err(|_| Error::Artifact("too many neuron models".into()))?,
        )?;
        for m in &p.models {
            write_model_binary(w, m)?;
        }
        for &m in &p.model_of {
            w.write_u16::<LittleEndian>(m)?;
        }
        put_len(w, p.synapses.len())?;
        for (key, posts) in &p.synapses {
            put_coord(w, key.src)?;
            w.write_u32::<LittleEndian>(key.index)?;
            put_len(w, posts.len())?;
            for s in posts {
                w.write_u32::<LittleEndian>(s.post)?;
                w.write_i16::<LittleEndian>(s.weight.0)?;
            }
        }
        put_len(w, p.connections.len())?;
        for (c, bits) in &p.connections {
            put_coord(w, *c)?;
            if bits.len() != p.neurons.len() {
                return Err(Error::Artifact(format!(
                    "bitmap for {c} does not match core {}",
                    p.coord
                )));
            }
            for &word in bits.words() {
                w.write_u64::<LittleEndian>(word)?;
            }
        }
        put_len(w, p.queue.len())?;
        for q in p.queue.iter() {
            w.write_u32::<LittleEndian>(q)?;
        }
        put_len(w, p.table.0.len())?;
        for (barrier, dests) in &p.table.0 {
            w.write_u32::<LittleEndian>(*barrier)?;
            w.write_u16::<LittleEndian>(
                u16::try_from(dests.len()).map_err(|_| Error::Artifact("too many bindings".into()))?,
            )?;
            for &c in dests {
                put_coord(w, c)?;
            }
        }
    }
    Ok(())
}

pub fn read_bundle<R: Read>(r: &mut R) -> Result<Deployment> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Artifact("not a deployment bundle (bad magic)".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(Error::Artifact(format!("bundle version {version}, expected {VERSION}")));
    }
    let config_digest = get_str(r)?;
    let partitioner = get_str(r)?;
    let mesh_width = r.read_u16::<LittleEndian>()?;
    let mesh_height = r.read_u16::<LittleEndian>()?;
    let frac_bits = r.read_u8()?;
    let neuron_count = get_len(r, MAX_ITEMS, "neuron")?;
    let destination_objective = r.read_u64::<LittleEndian>()?;
    let mut b = [0u64; 8];
    for v in &mut b {
        *v = r.read_u64::<LittleEndian>()?;
    }
    let budget = MemoryBudget {
        synapse_bytes: b[0],
        neuron_bytes: b[1],
        post_conn_bytes: b[2],
        checking_table_bytes: b[3],
        bytes_per_synapse: b[4],
        bytes_per_neuron_state: b[5],
        bytes_per_dest_entry: b[6],
        bytes_per_table_binding: b[7],
    };
    let layers = (0..neuron_count)
        .map(|_| r.read_u16::<LittleEndian>())
        .collect::<std::io::Result<Vec<_>>>()?;
    let core_count = get_len(r, usize::from(mesh_width) * usize::from(mesh_height), "core")?;
    let mut cores = Vec::with_capacity(core_count);
    for _ in 0..core_count {
        let coord = get_coord(r)?;
        let n = get_len(r, neuron_count, "local neuron")?;
        let neurons = (0..n)
            .map(|_| r.read_u32::<LittleEndian>().map(NeuronId))
            .collect::<std::io::Result<Vec<_>>>()?;
        let model_count = r.read_u16::<LittleEndian>()?;
        let models = (0..model_count)
            .map(|_| read_model_binary(r))
            .collect::<Result<Vec<_>>>()?;
        let model_of = (0..n)
            .map(|_| r.read_u16::<LittleEndian>())
            .collect::<std::io::Result<Vec<_>>>()?;
        let mut synapses = BTreeMap::new();
        for _ in 0..get_len(r, MAX_ITEMS, "synapse key")? {
            let src = get_coord(r)?;
            let index = r.read_u32::<LittleEndian>()?;
            let fanout = get_len(r, n, "fanout")?;
            let posts = (0..fanout)
                .map(|_| {
                    Ok(LocalSynapse {
                        post: r.read_u32::<LittleEndian>()?,
                        weight: Weight(r.read_i16::<LittleEndian>()?),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            synapses.insert(SynapseKey { src, index }, posts);
        }
        let mut connections = BTreeMap::new();
        for _ in 0..get_len(r, core_count, "destination")? {
            let c = get_coord(r)?;
            let words = (0..n.div_ceil(64))
                .map(|_| r.read_u64::<LittleEndian>())
                .collect::<std::io::Result<Vec<_>>>()?;
            connections.insert(c, Bitmap::from_words(n, words)?);
        }
        let queue = (0..get_len(r, MAX_ITEMS, "queue")?)
            .map(|_| r.read_u32::<LittleEndian>())
            .collect::<std::io::Result<Vec<_>>>()?;
        let mut table = BTreeMap::new();
        for _ in 0..get_len(r, n, "barrier")? {
            let barrier = r.read_u32::<LittleEndian>()?;
            let count = r.read_u16::<LittleEndian>()?;
            let dests = (0..count).map(|_| get_coord(r)).collect::<Result<Vec<_>>>()?;
            table.insert(barrier, dests);
        }
        cores.push(CoreProgram {
            coord,
            neurons,
            models,
            model_of,
            synapses,
            connections,
            queue: ExecQueue(queue),
            table: CheckingTable(table),
            frac_bits,
        });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Artifact("trailing bytes after bundle".into()));
    }
    Ok(Deployment {
        config_digest,
        partitioner,
        mesh_width,
        mesh_height,
        frac_bits,
        neuron_count,
        destination_objective,
        budget,
        layers,
        cores,
    })
}
