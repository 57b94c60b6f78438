//! Partition exchange planning for stencil members owned by other
//! partitions, exercised with in-process simulated partitions.

use std::collections::{BTreeMap, BTreeSet};

use super::Stencil;
use crate::mesh::Mesh;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeerExchange {
    pub peer: usize,
    /// Locally owned cells the peer needs.
    pub send: Vec<usize>,
    /// Peer-owned cells this partition needs.
    pub receive: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExchangeMap {
    /// Indexed by partition; peers in ascending order.
    pub partitions: Vec<Vec<PeerExchange>>,
}

impl ExchangeMap {
    pub fn is_empty(&self) -> bool {
        self.partitions.iter().all(|p| p.is_empty())
    }

    /// Total number of cell values received over all partitions.
    pub fn total_received(&self) -> usize {
        self.partitions.iter().flatten().map(|e| e.receive.len()).sum()
    }

    pub fn total_sent(&self) -> usize {
        self.partitions.iter().flatten().map(|e| e.send.len()).sum()
    }
}

/// A stencil belongs to the partition of its owner cell. Every member owned
/// elsewhere becomes one receive entry there and one send entry at its owner.
pub fn build_exchange_map(assignment: &[usize], n_parts: usize, stencils: &[Stencil]) -> ExchangeMap {
    let mut need: BTreeMap<(usize, usize), BTreeSet<usize>> = BTreeMap::new();
    for s in stencils {
        let p = assignment[s.owner];
        for &m in &s.members {
            let q = assignment[m];
            if q != p {
                need.entry((p, q)).or_default().insert(m);
            }
        }
    }
    let mut parts: Vec<BTreeMap<usize, PeerExchange>> = vec![BTreeMap::new(); n_parts];
    for ((p, q), cells) in need {
        let cells: Vec<usize> = cells.into_iter().collect();
        parts[p]
            .entry(q)
            .or_insert_with(|| PeerExchange { peer: q, send: vec![], receive: vec![] })
            .receive = cells.clone();
        parts[q]
            .entry(p)
            .or_insert_with(|| PeerExchange { peer: p, send: vec![], receive: vec![] })
            .send = cells;
    }
    ExchangeMap { partitions: parts.into_iter().map(|m| m.into_values().collect()).collect() }
}

/// Replays the exchange: each partition packs its send lists from its own
/// local storage and the receiver unpacks them into a ghost table.
pub fn simulate_gather(map: &ExchangeMap, assignment: &[usize], field: &[f64]) -> Vec<BTreeMap<usize, f64>> {
    let n_parts = map.partitions.len();
    // Local storage per partition holds only owned cells.
    let local: Vec<BTreeMap<usize, f64>> = (0..n_parts)
        .map(|p| {
            (0..field.len())
                .filter(|&c| assignment[c] == p)
                .map(|c| (c, field[c]))
                .collect()
        })
        .collect();
    let mut messages: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for (p, peers) in map.partitions.iter().enumerate() {
        for e in peers {
            if !e.send.is_empty() {
                messages.insert((p, e.peer), e.send.iter().map(|c| local[p][c]).collect());
            }
        }
    }
    let mut ghosts = vec![BTreeMap::new(); n_parts];
    for (p, peers) in map.partitions.iter().enumerate() {
        for e in peers {
            if e.receive.is_empty() {
                continue;
            }
            let buf = &messages[&(e.peer, p)];
            for (c, v) in e.receive.iter().zip(buf) {
                ghosts[p].insert(*c, *v);
            }
        }
    }
    ghosts
}

/// Recursive coordinate bisection of cell centres into `n_parts` parts of
/// near-equal size.
pub fn recursive_bisection(mesh: &Mesh, n_parts: usize) -> Vec<usize> {
    let mut out = vec![0; mesh.n_cells()];
    let cells: Vec<usize> = (0..mesh.n_cells()).collect();
    split(mesh, cells, 0, n_parts.max(1), &mut out);
    out
}

fn split(mesh: &Mesh, mut cells: Vec<usize>, first: usize, parts: usize, out: &mut [usize]) {
    if parts == 1 || cells.len() <= 1 {
        for c in cells {
            out[c] = first;
        }
        return;
    }
    let mut lo = crate::Vec3::repeat(f64::INFINITY);
    let mut hi = crate::Vec3::repeat(f64::NEG_INFINITY);
    for &c in &cells {
        lo = lo.inf(&mesh.centre(c));
        hi = hi.sup(&mesh.centre(c));
    }
    let ext = hi - lo;
    let axis = (0..3).max_by(|&a, &b| ext[a].total_cmp(&ext[b]).then(b.cmp(&a))).unwrap();
    cells.sort_by(|&a, &b| mesh.centre(a)[axis].total_cmp(&mesh.centre(b)[axis]).then(a.cmp(&b)));
    let left_parts = parts / 2;
    let cut = cells.len() * left_parts / parts;
    let right = cells.split_off(cut);
    split(mesh, cells, first, left_parts, out);
    split(mesh, right, first + left_parts, parts - left_parts, out);
}
