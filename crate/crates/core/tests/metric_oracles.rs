//! Metrics checked against slow, independent implementations on small worlds.

use navhint::metrics::{dtw, navigation_error, ndtw, PathPair, DEFAULT_SUCCESS_THRESHOLD};
use navhint::world::{generate_world, DistanceTable, NodeId, World, WorldConfig};

fn small_world(seed: u64) -> World {
    let cfg = WorldConfig { node_count: 10, ..WorldConfig::default() };
    generate_world(seed, &cfg).unwrap()
}

fn ids(world: &World) -> Vec<NodeId> {
    world.nodes.keys().copied().collect()
}

/// All-pairs distances by Floyd-Warshall over the raw edge list.
fn floyd(world: &World) -> Vec<Vec<f64>> {
    let ids = ids(world);
    let n = ids.len();
    let idx = |v: NodeId| ids.iter().position(|&x| x == v).unwrap();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for i in 0..n {
        d[i][i] = 0.0;
    }
    for e in &world.edges {
        let (a, b) = (idx(e.a), idx(e.b));
        d[a][b] = d[a][b].min(e.length);
        d[b][a] = d[b][a].min(e.length);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

/// Shortest distance by enumerating every simple path from `a` to `b`.
fn brute_distance(world: &World, a: NodeId, b: NodeId) -> f64 {
    fn go(world: &World, at: NodeId, goal: NodeId, seen: &mut Vec<NodeId>, acc: f64, best: &mut f64) {
        if at == goal {
            *best = best.min(acc);
            return;
        }
        for e in &world.edges {
            let next = if e.a == at {
                e.b
            } else if e.b == at {
                e.a
            } else {
                continue;
            };
            if !seen.contains(&next) {
                seen.push(next);
                go(world, next, goal, seen, acc + e.length, best);
                seen.pop();
            }
        }
    }
    let mut best = f64::INFINITY;
    go(world, a, b, &mut vec![a], 0.0, &mut best);
    best
}

/// Minimum over every monotone alignment of the two sequences.
fn brute_dtw(p: &[usize], r: &[usize], d: &[Vec<f64>]) -> f64 {
    fn go(i: usize, j: usize, p: &[usize], r: &[usize], d: &[Vec<f64>], acc: f64, best: &mut f64) {
        let acc = acc + d[r[i]][p[j]];
        if i + 1 == r.len() && j + 1 == p.len() {
            *best = best.min(acc);
            return;
        }
        if i + 1 < r.len() {
            go(i + 1, j, p, r, d, acc, best);
        }
        if j + 1 < p.len() {
            go(i, j + 1, p, r, d, acc, best);
        }
        if i + 1 < r.len() && j + 1 < p.len() {
            go(i + 1, j + 1, p, r, d, acc, best);
        }
    }
    let mut best = f64::INFINITY;
    go(0, 0, p, r, d, 0.0, &mut best);
    best
}

/// Every walk along edges with 1..=max_len nodes.
fn walks(world: &World, max_len: usize) -> Vec<Vec<NodeId>> {
    let mut out: Vec<Vec<NodeId>> = ids(world).into_iter().map(|v| vec![v]).collect();
    let mut frontier = out.clone();
    for _ in 1..max_len {
        let mut next = Vec::new();
        for w in &frontier {
            for n in world.neighbors(*w.last().unwrap()).unwrap() {
                let mut v = w.clone();
                v.push(n);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

#[test]
fn distance_table_matches_floyd_and_path_enumeration() {
    for seed in 0..5 {
        let world = small_world(seed);
        let table = DistanceTable::new(&world);
        let f = floyd(&world);
        let ids = ids(&world);
        for (i, &a) in ids.iter().enumerate() {
            for (j, &b) in ids.iter().enumerate() {
                let got = table.distance(a, b).unwrap();
                assert!((got - f[i][j]).abs() < 1e-9, "seed {seed} {a}->{b}");
                assert!((got - brute_distance(&world, a, b)).abs() < 1e-9);
                let ne = navigation_error(&PathPair::new(vec![ids[0], a], vec![ids[0], b]), &table).unwrap();
                assert!((ne - f[i][j]).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn dtw_matches_alignment_enumeration() {
    let world = small_world(11);
    let table = DistanceTable::new(&world);
    let f = floyd(&world);
    let ids = ids(&world);
    let idx =
        |path: &[NodeId]| -> Vec<usize> { path.iter().map(|v| ids.iter().position(|x| x == v).unwrap()).collect() };
    let all = walks(&world, 4);
    // Every 7th walk on each side keeps the test quick while still mixing
    // lengths; the acceptance suite runs the full cross product.
    let sample: Vec<&Vec<NodeId>> = all.iter().step_by(7).collect();
    assert!(sample.len() > 20);
    for p in &sample {
        for r in &sample {
            let want = brute_dtw(&idx(p), &idx(r), &f);
            let got = dtw(p, r, &table).unwrap();
            assert!((got - want).abs() < 1e-9, "{p:?} vs {r:?}: {got} != {want}");
            let n = ndtw(&PathPair::new(p.to_vec(), r.to_vec()), &table).unwrap();
            let want_n = (-want / (r.len() as f64 * DEFAULT_SUCCESS_THRESHOLD)).exp();
            assert!((n - want_n).abs() < 1e-9);
        }
    }
}

#[test]
fn dtw_of_identical_paths_is_zero() {
    let world = small_world(3);
    let table = DistanceTable::new(&world);
    for w in walks(&world, 3) {
        assert_eq!(dtw(&w, &w, &table).unwrap(), 0.0);
        assert_eq!(ndtw(&PathPair::new(w.clone(), w.clone()), &table).unwrap(), 1.0);
    }
}
