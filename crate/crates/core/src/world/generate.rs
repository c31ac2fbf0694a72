use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{wrap_angle, CandidateView, DistanceTable, Edge, NodeId, VisualObject, World, WORLD_SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    pub node_count: usize,
    /// Mean spacing between nodes in meters; the sampling box side is
    /// `spacing * sqrt(node_count)`.
    pub spacing: f64,
    /// Node heights are drawn from `[-z_range, z_range]`.
    pub z_range: f64,
    pub min_node_distance: f64,
    pub knn: usize,
    /// Minimum angle between two candidate views at the same node.
    pub min_view_separation_deg: f64,
    pub max_views: usize,
    pub own_objects: (usize, usize),
    pub ambient_objects: (usize, usize),
    pub objects_per_view: (usize, usize),
    pub ambient_view_prob: f64,
    pub attribute_prob: f64,
    pub max_retries: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            node_count: 16,
            spacing: 3.0,
            z_range: 1.5,
            min_node_distance: 1.5,
            knn: 3,
            min_view_separation_deg: 46.0,
            max_views: 8,
            own_objects: (3, 5),
            ambient_objects: (1, 3),
            objects_per_view: (2, 3),
            ambient_view_prob: 0.6,
            attribute_prob: 0.5,
            max_retries: 64,
        }
    }
}

/// Generates a connected world from `seed`. The returned world has id
/// `w{seed}`; callers that lay out datasets rename it.
pub fn generate_world(seed: u64, cfg: &WorldConfig) -> Result<World> {
    if cfg.node_count < 4 {
        return Err(Error::Invalid(format!("node_count {} < 4", cfg.node_count)));
    }
    let lexicon = Lexicon::bundled();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cfg.max_retries {
        let Some(nodes) = sample_positions(&mut rng, cfg) else {
            continue;
        };
        let Some(edges) = build_edges(&nodes, cfg) else {
            continue;
        };
        let object_seed: u64 = rng.random();
        let views = place_objects(object_seed, &nodes, &edges, lexicon, cfg);
        let world = World {
            schema_version: WORLD_SCHEMA_VERSION,
            id: format!("w{seed}"),
            nodes,
            edges,
            views,
            object_lexicon_seed: object_seed,
        };
        if DistanceTable::new(&world).has_unreachable() {
            continue;
        }
        return Ok(world);
    }
    Err(Error::GenerationFailure(format!("no valid world for seed {seed} after {} attempts", cfg.max_retries)))
}

fn sample_positions(rng: &mut ChaCha8Rng, cfg: &WorldConfig) -> Option<BTreeMap<NodeId, [f64; 3]>> {
    let side = cfg.spacing * (cfg.node_count as f64).sqrt();
    let mut pts: Vec<[f64; 3]> = Vec::with_capacity(cfg.node_count);
    let mut attempts = 0;
    while pts.len() < cfg.node_count {
        attempts += 1;
        if attempts > cfg.node_count * 200 {
            return None;
        }
        let p =
            [rng.random_range(0.0..side), rng.random_range(0.0..side), rng.random_range(-cfg.z_range..=cfg.z_range)];
        if pts.iter().all(|q| planar(&p, q) >= cfg.min_node_distance) {
            pts.push(p);
        }
    }
    Some(pts.into_iter().enumerate().map(|(i, p)| (i as NodeId, p)).collect())
}

fn planar(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn euclid(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn heading(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    wrap_angle((b[1] - a[1]).atan2(b[0] - a[0]))
}

fn angle_gap(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

/// Planar minimum spanning tree (its edges meet at >= 60 degrees) plus
/// k-nearest-neighbor edges that keep views well separated.
fn build_edges(nodes: &BTreeMap<NodeId, [f64; 3]>, cfg: &WorldConfig) -> Option<Vec<Edge>> {
    let ids: Vec<NodeId> = nodes.keys().copied().collect();
    let n = ids.len();
    let min_sep = cfg.min_view_separation_deg.to_radians();
    let mut headings: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut present: BTreeSet<(usize, usize)> = BTreeSet::new();

    let fits = |headings: &[Vec<f64>], i: usize, j: usize| {
        let hij = heading(&nodes[&ids[i]], &nodes[&ids[j]]);
        let hji = heading(&nodes[&ids[j]], &nodes[&ids[i]]);
        headings[i].len() < cfg.max_views
            && headings[j].len() < cfg.max_views
            && headings[i].iter().all(|&h| angle_gap(h, hij) >= min_sep)
            && headings[j].iter().all(|&h| angle_gap(h, hji) >= min_sep)
    };
    let add = |headings: &mut [Vec<f64>], present: &mut BTreeSet<(usize, usize)>, i: usize, j: usize| {
        headings[i].push(heading(&nodes[&ids[i]], &nodes[&ids[j]]));
        headings[j].push(heading(&nodes[&ids[j]], &nodes[&ids[i]]));
        present.insert((i.min(j), i.max(j)));
    };

    // Prim on planar distances.
    let mut in_tree = vec![false; n];
    let mut best = vec![(f64::INFINITY, usize::MAX); n];
    best[0] = (0.0, usize::MAX);
    for _ in 0..n {
        let u = (0..n).filter(|&i| !in_tree[i]).min_by(|&a, &b| best[a].0.total_cmp(&best[b].0))?;
        in_tree[u] = true;
        let parent = best[u].1;
        if parent != usize::MAX {
            if !fits(&headings, u, parent) {
                return None;
            }
            add(&mut headings, &mut present, u, parent);
        }
        for v in 0..n {
            let d = planar(&nodes[&ids[u]], &nodes[&ids[v]]);
            if !in_tree[v] && d < best[v].0 {
                best[v] = (d, u);
            }
        }
    }

    let by_distance = |i: usize| {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| {
            euclid(&nodes[&ids[i]], &nodes[&ids[a]]).total_cmp(&euclid(&nodes[&ids[i]], &nodes[&ids[b]]))
        });
        others
    };
    for i in 0..n {
        for &j in by_distance(i).iter().take(cfg.knn) {
            if !present.contains(&(i.min(j), i.max(j))) && fits(&headings, i, j) {
                add(&mut headings, &mut present, i, j);
            }
        }
    }
    // Top up nodes that still have a single view.
    for i in 0..n {
        if headings[i].len() >= 2 {
            continue;
        }
        for j in by_distance(i) {
            if !present.contains(&(i.min(j), i.max(j))) && fits(&headings, i, j) {
                add(&mut headings, &mut present, i, j);
                break;
            }
        }
        if headings[i].len() < 2 {
            return None;
        }
    }

    Some(
        present
            .into_iter()
            .map(|(i, j)| Edge { a: ids[i], b: ids[j], length: euclid(&nodes[&ids[i]], &nodes[&ids[j]]) })
            .collect(),
    )
}

fn random_object(rng: &mut ChaCha8Rng, noun: &str, lexicon: &Lexicon, cfg: &WorldConfig) -> VisualObject {
    let mut attrs: Vec<&str> = Vec::new();
    for _ in 0..2 {
        if rng.random_bool(cfg.attribute_prob) {
            let a = lexicon.attributes.choose(rng).expect("attributes non-empty");
            if !attrs.contains(&a.as_str()) {
                attrs.push(a);
            }
        }
    }
    VisualObject::new(noun, &attrs)
}

fn place_objects(
    seed: u64,
    nodes: &BTreeMap<NodeId, [f64; 3]>,
    edges: &[Edge],
    lexicon: &Lexicon,
    cfg: &WorldConfig,
) -> BTreeMap<NodeId, Vec<CandidateView>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut own: BTreeMap<NodeId, Vec<VisualObject>> = BTreeMap::new();
    let mut ambient: BTreeMap<NodeId, Vec<VisualObject>> = BTreeMap::new();
    for &node in nodes.keys() {
        let count = rng.random_range(cfg.own_objects.0..=cfg.own_objects.1);
        let nouns: Vec<&String> = lexicon.nouns.choose_multiple(&mut rng, count).collect();
        own.insert(node, nouns.iter().map(|n| random_object(&mut rng, n, lexicon, cfg)).collect());
        let count = rng.random_range(cfg.ambient_objects.0..=cfg.ambient_objects.1);
        let nouns: Vec<&String> = lexicon.ambient.choose_multiple(&mut rng, count).collect();
        ambient.insert(node, nouns.iter().map(|n| random_object(&mut rng, n, lexicon, cfg)).collect());
    }

    let mut views: BTreeMap<NodeId, Vec<CandidateView>> = nodes.keys().map(|&n| (n, Vec::new())).collect();
    let mut directed: Vec<(NodeId, NodeId)> = edges.iter().flat_map(|e| [(e.a, e.b), (e.b, e.a)]).collect();
    directed.sort_unstable();
    for (from, to) in directed {
        let (pa, pb) = (&nodes[&from], &nodes[&to]);
        let rise = (pb[2] - pa[2]).atan2(planar(pa, pb));
        let elevation = if rise > PI / 12.0 {
            PI / 6.0
        } else if rise < -PI / 12.0 {
            -PI / 6.0
        } else {
            0.0
        };
        let target_own = &own[&to];
        let take = rng.random_range(cfg.objects_per_view.0..=cfg.objects_per_view.1).min(target_own.len());
        let mut picks: Vec<usize> = (0..target_own.len()).collect();
        picks.shuffle(&mut rng);
        picks.truncate(take);
        picks.sort_unstable();
        let mut objects: Vec<VisualObject> = picks.into_iter().map(|i| target_own[i].clone()).collect();
        for amb in &ambient[&from] {
            if rng.random_bool(cfg.ambient_view_prob) {
                objects.push(amb.clone());
            }
        }
        views.get_mut(&from).expect("node").push(CandidateView {
            neighbor: to,
            heading: heading(pa, pb),
            elevation,
            objects,
        });
    }
    for list in views.values_mut() {
        list.sort_by_key(|v| v.neighbor);
    }
    views
}
