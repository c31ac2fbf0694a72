use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use super::{NodeId, World};
use crate::error::{Error, Result};

#[derive(Copy, Clone, PartialEq)]
struct State {
    cost: f64,
    node: NodeId,
}

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn adjacency(world: &World) -> BTreeMap<NodeId, Vec<(NodeId, f64)>> {
    let mut adj: BTreeMap<NodeId, Vec<(NodeId, f64)>> = world.nodes.keys().map(|&n| (n, Vec::new())).collect();
    for e in &world.edges {
        adj.entry(e.a).or_default().push((e.b, e.length));
        adj.entry(e.b).or_default().push((e.a, e.length));
    }
    for list in adj.values_mut() {
        list.sort_by_key(|&(n, _)| n);
    }
    adj
}

/// Single-source shortest paths. Returns distance and predecessor maps;
/// unreachable nodes are absent.
pub fn dijkstra(world: &World, source: NodeId) -> Result<(BTreeMap<NodeId, f64>, BTreeMap<NodeId, NodeId>)> {
    if !world.contains(source) {
        return Err(Error::UnknownNode(source));
    }
    let adj = adjacency(world);
    let mut dist: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut pred = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    dist.insert(source, 0.0);
    heap.push(State { cost: 0.0, node: source });
    while let Some(State { cost, node }) = heap.pop() {
        if cost > dist[&node] {
            continue;
        }
        for &(next, len) in &adj[&node] {
            let cand = cost + len;
            if dist.get(&next).is_none_or(|&d| cand < d) {
                dist.insert(next, cand);
                pred.insert(next, node);
                heap.push(State { cost: cand, node: next });
            }
        }
    }
    Ok((dist, pred))
}

pub fn shortest_path_distance(world: &World, a: NodeId, b: NodeId) -> Result<f64> {
    if !world.contains(b) {
        return Err(Error::UnknownNode(b));
    }
    let (dist, _) = dijkstra(world, a)?;
    dist.get(&b).copied().ok_or_else(|| Error::Invalid(format!("node {b} unreachable from {a}")))
}

pub fn shortest_path(world: &World, a: NodeId, b: NodeId) -> Result<Vec<NodeId>> {
    if !world.contains(b) {
        return Err(Error::UnknownNode(b));
    }
    let (dist, pred) = dijkstra(world, a)?;
    if !dist.contains_key(&b) {
        return Err(Error::Invalid(format!("node {b} unreachable from {a}")));
    }
    let mut path = vec![b];
    let mut cur = b;
    while cur != a {
        cur = pred[&cur];
        path.push(cur);
    }
    path.reverse();
    Ok(path)
}

/// All-pairs graph distances plus first-hop routing, for bulk metric
/// evaluation and teacher actions.
#[derive(Debug, Clone)]
pub struct DistanceTable {
    index: BTreeMap<NodeId, usize>,
    dist: Vec<Vec<f64>>,
}

impl DistanceTable {
    pub fn new(world: &World) -> Self {
        let index: BTreeMap<NodeId, usize> = world.nodes.keys().enumerate().map(|(i, &n)| (n, i)).collect();
        let n = index.len();
        let mut dist = vec![vec![f64::INFINITY; n]; n];
        for (&node, &i) in &index {
            let (d, _) = dijkstra(world, node).expect("node exists");
            for (other, value) in d {
                dist[i][index[&other]] = value;
            }
        }
        DistanceTable { index, dist }
    }

    pub fn distance(&self, a: NodeId, b: NodeId) -> Result<f64> {
        let i = *self.index.get(&a).ok_or(Error::UnknownNode(a))?;
        let j = *self.index.get(&b).ok_or(Error::UnknownNode(b))?;
        Ok(self.dist[i][j])
    }

    pub fn has_unreachable(&self) -> bool {
        self.dist.iter().flatten().any(|d| !d.is_finite())
    }

    /// Neighbor of `from` on a shortest path to `goal`, or `None` at the
    /// goal. Ties go to the lowest neighbor id.
    pub fn next_hop(&self, world: &World, from: NodeId, goal: NodeId) -> Result<Option<NodeId>> {
        if from == goal {
            return Ok(None);
        }
        let target = self.distance(from, goal)?;
        let mut best: Option<(f64, NodeId)> = None;
        for n in world.neighbors(from)? {
            let len = world.edge_length(from, n).expect("view implies edge");
            let via = len + self.distance(n, goal)?;
            if best.is_none_or(|(b, _)| via < b - 1e-12) {
                best = Some((via, n));
            }
        }
        let (via, n) = best.ok_or_else(|| Error::Invalid(format!("node {from} has no neighbors")))?;
        debug_assert!((via - target).abs() < 1e-9);
        Ok(Some(n))
    }
}
