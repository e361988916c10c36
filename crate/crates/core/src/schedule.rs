//! Per-core execution order and checking table.
//!
//! Destinations are visited in ascending order of how many local neurons
//! feed them. Each destination is bound to a *barrier neuron*: the neuron
//! after whose update every contributor to that destination has been
//! updated, so the destination's spikes can be dispatched together.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::Coord;

/// Destination core -> local neurons with post-synaptic targets there.
pub type DestMap = BTreeMap<Coord, BTreeSet<u32>>;

/// Local neuron update order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecQueue(pub Vec<u32>);

impl ExecQueue {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.iter().copied()
    }
}

/// Barrier neuron -> destinations unlocked by it, in binding order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckingTable(pub BTreeMap<u32, Vec<Coord>>);

impl CheckingTable {
    pub fn get(&self, neuron: u32) -> Option<&[Coord]> {
        self.0.get(&neuron).map(Vec::as_slice)
    }

    pub fn bindings(&self) -> usize {
        self.0.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Builds the execution queue and checking table for one core.
///
/// Ties in contributor count are broken by row-major destination order;
/// newly enqueued neurons are appended in ascending id. Neurons that feed
/// no remote destination are not enqueued here; see [`finalize_queue`].
pub fn build_checking_table(dest_map: &DestMap) -> (ExecQueue, CheckingTable) {
    let mut order: Vec<(&Coord, &BTreeSet<u32>)> = dest_map.iter().collect();
    // stable sort keeps the row-major key order for equal sizes
    order.sort_by_key(|(_, members)| members.len());

    let mut queue: Vec<u32> = Vec::new();
    let mut position: HashMap<u32, usize> = HashMap::new();
    let mut table: BTreeMap<u32, Vec<Coord>> = BTreeMap::new();
    for (&dest, members) in order {
        let fresh: Vec<u32> = members.iter().copied().filter(|n| !position.contains_key(n)).collect();
        let barrier = if let Some(&last) = fresh.last() {
            for n in fresh {
                position.insert(n, queue.len());
                queue.push(n);
            }
            last
        } else {
            match members.iter().copied().max_by_key(|n| position[n]) {
                Some(n) => n,
                None => continue,
            }
        };
        table.entry(barrier).or_default().push(dest);
    }
    (ExecQueue(queue), CheckingTable(table))
}

/// Appends the remaining local neurons (`0..local_count`) in ascending id.
pub fn finalize_queue(queue: &ExecQueue, local_count: u32) -> ExecQueue {
    let present: BTreeSet<u32> = queue.iter().collect();
    let mut q = queue.0.clone();
    q.extend((0..local_count).filter(|n| !present.contains(n)));
    ExecQueue(q)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    DuplicateInQueue { neuron: u32 },
    MissingFromQueue { neuron: u32, dest: Coord },
    BarrierNotInQueue { barrier: u32 },
    BarrierBeforeContributor { dest: Coord, barrier: u32, neuron: u32 },
    Unbound { dest: Coord },
    BoundMoreThanOnce { dest: Coord, times: usize },
    UnknownDestination { dest: Coord, barrier: u32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateInQueue { neuron } => write!(f, "neuron {neuron} queued more than once"),
            Violation::MissingFromQueue { neuron, dest } => {
                write!(f, "neuron {neuron} feeding {dest} is not in the execution queue")
            }
            Violation::BarrierNotInQueue { barrier } => write!(f, "barrier {barrier} is not in the execution queue"),
            Violation::BarrierBeforeContributor { dest, barrier, neuron } => write!(
                f,
                "destination {dest}: neuron {neuron} is updated after its barrier {barrier}"
            ),
            Violation::Unbound { dest } => write!(f, "destination {dest} has no barrier"),
            Violation::BoundMoreThanOnce { dest, times } => write!(f, "destination {dest} bound {times} times"),
            Violation::UnknownDestination { dest, barrier } => {
                write!(f, "barrier {barrier} binds {dest}, which no local neuron feeds")
            }
        }
    }
}

/// Checks barrier dominance, exactly-once binding and queue coverage.
pub fn validate_schedule(queue: &ExecQueue, table: &CheckingTable, dest_map: &DestMap) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut position: HashMap<u32, usize> = HashMap::new();
    for (i, n) in queue.iter().enumerate() {
        if position.insert(n, i).is_some() {
            violations.push(Violation::DuplicateInQueue { neuron: n });
        }
    }
    let mut bound: BTreeMap<Coord, Vec<u32>> = BTreeMap::new();
    for (&barrier, dests) in &table.0 {
        if !position.contains_key(&barrier) {
            violations.push(Violation::BarrierNotInQueue { barrier });
        }
        for &d in dests {
            bound.entry(d).or_default().push(barrier);
        }
    }
    for (&dest, members) in dest_map {
        for &n in members {
            if !position.contains_key(&n) {
                violations.push(Violation::MissingFromQueue { neuron: n, dest });
            }
        }
        match bound.get(&dest).map(Vec::as_slice) {
            None | Some([]) => violations.push(Violation::Unbound { dest }),
            Some([barrier]) => {
                if let Some(&bp) = position.get(barrier) {
                    for &n in members {
                        if position.get(&n).is_some_and(|&np| np > bp) {
                            violations.push(Violation::BarrierBeforeContributor {
                                dest,
                                barrier: *barrier,
                                neuron: n,
                            });
                        }
                    }
                }
            }
            Some(many) => violations.push(Violation::BoundMoreThanOnce {
                dest,
                times: many.len(),
            }),
        }
    }
    for (dest, barriers) in &bound {
        if !dest_map.contains_key(dest) {
            violations.push(Violation::UnknownDestination {
                dest: *dest,
                barrier: barriers[0],
            });
        }
    }
    violations
}
