//! Weighted undirected graphs and the network measures the cohesion indices
//! are built on: connected components, Barrat weighted clustering, hop-count
//! average path length, Louvain communities and exact K4 counting.

use std::collections::{BTreeMap, VecDeque};

use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("edge weight must be finite and positive, got {0}")]
    InvalidWeight(f64),
    #[error("node {0} out of range (graph has {1} nodes)")]
    NodeOutOfRange(usize, usize),
    #[error("graph needs at least 2 nodes, has {0}")]
    TooFewNodes(usize),
    #[error("graph is empty")]
    EmptyGraph,
}

/// Simple weighted undirected graph over nodes `0..n`.
///
/// Zero weight means "no edge"; self-loops and parallel edges are rejected
/// or merged.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightedGraph {
    adj: Vec<BTreeMap<usize, f64>>,
}

impl WeightedGraph {
    pub fn new(node_count: usize) -> Self {
        Self {
            adj: vec![BTreeMap::new(); node_count],
        }
    }

    pub fn from_edges(
        node_count: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, GraphError> {
        let mut g = Self::new(node_count);
        for (u, v, w) in edges {
            g.set_edge(u, v, w)?;
        }
        Ok(g)
    }

    pub fn add_node(&mut self) -> usize {
        self.adj.push(BTreeMap::new());
        self.adj.len() - 1
    }

    fn check(&self, u: usize, v: usize, w: f64) -> Result<(), GraphError> {
        let n = self.adj.len();
        for x in [u, v] {
            if x >= n {
                return Err(GraphError::NodeOutOfRange(x, n));
            }
        }
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        if !w.is_finite() || w <= 0.0 {
            return Err(GraphError::InvalidWeight(w));
        }
        Ok(())
    }

    /// Insert or overwrite the edge `{u, v}`.
    pub fn set_edge(&mut self, u: usize, v: usize, w: f64) -> Result<(), GraphError> {
        self.check(u, v, w)?;
        self.adj[u].insert(v, w);
        self.adj[v].insert(u, w);
        Ok(())
    }

    /// Add `w` to the weight of `{u, v}`, creating the edge if needed.
    pub fn add_weight(&mut self, u: usize, v: usize, w: f64) -> Result<(), GraphError> {
        self.check(u, v, w)?;
        *self.adj[u].entry(v).or_insert(0.0) += w;
        *self.adj[v].entry(u).or_insert(0.0) += w;
        Ok(())
    }

    pub fn remove_edge(&mut self, u: usize, v: usize) -> Option<f64> {
        let w = self.adj.get_mut(u)?.remove(&v);
        if w.is_some() {
            self.adj[v].remove(&u);
        }
        w
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(BTreeMap::len).sum::<usize>() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<f64> {
        self.adj.get(u)?.get(&v).copied()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.weight(u, v).is_some()
    }

    /// Neighbors of `u` in ascending id order with edge weights.
    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.adj[u].iter().map(|(&v, &w)| (v, w))
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adj[u].len()
    }

    pub fn strength(&self, u: usize) -> f64 {
        self.adj[u].values().sum()
    }

    /// Each undirected edge once as `(u, v, w)` with `u < v`, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adj.iter().enumerate().flat_map(|(u, nbrs)| {
            nbrs.range(u + 1..).map(move |(&v, &w)| (u, v, w))
        })
    }

    pub fn total_weight(&self) -> f64 {
        self.edges().map(|(_, _, w)| w).sum()
    }
}

/// Maximal connected node sets, each sorted, ordered by smallest member.
pub fn connected_components(g: &WeightedGraph) -> Vec<Vec<usize>> {
    let n = g.node_count();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for (v, _) in g.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    comp.push(v);
                    queue.push_back(v);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Barrat weighted clustering coefficient of every node.
///
/// `wc_j = 1 / (s_j (k_j - 1)) * sum_{h,k} (w_jh + w_jk) / 2 * a_jh a_hk a_jk`
/// over ordered neighbor pairs; nodes with degree < 2 get 0.
pub fn local_weighted_clustering(g: &WeightedGraph) -> Vec<f64> {
    (0..g.node_count())
        .map(|j| {
            let k = g.degree(j);
            if k < 2 {
                return 0.0;
            }
            let nbrs: Vec<(usize, f64)> = g.neighbors(j).collect();
            let mut sum = 0.0;
            for (a, &(h, w_jh)) in nbrs.iter().enumerate() {
                for &(m, w_jm) in &nbrs[a + 1..] {
                    if g.has_edge(h, m) {
                        // both orders (h, m) and (m, h) contribute (w_jh + w_jm) / 2
                        sum += w_jh + w_jm;
                    }
                }
            }
            sum / (g.strength(j) * (k - 1) as f64)
        })
        .collect()
}

/// Weighted average clustering coefficient (WCC) over all nodes; 0 for an
/// empty graph.
pub fn weighted_clustering(g: &WeightedGraph) -> f64 {
    let local = local_weighted_clustering(g);
    if local.is_empty() {
        0.0
    } else {
        local.iter().sum::<f64>() / local.len() as f64
    }
}

/// Average hop-count shortest path length over all node pairs; unreachable
/// pairs count as distance `n`.
pub fn average_path_length(g: &WeightedGraph) -> Result<f64, GraphError> {
    let n = g.node_count();
    if n < 2 {
        return Err(GraphError::TooFewNodes(n));
    }
    let mut total: u64 = 0;
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for src in 0..n {
        dist.fill(usize::MAX);
        dist[src] = 0;
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            for (v, _) in g.neighbors(u) {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        for d in &dist[src + 1..] {
            total += if *d == usize::MAX { n as u64 } else { *d as u64 };
        }
    }
    Ok(2.0 * total as f64 / (n as f64 * (n - 1) as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityPartition {
    /// `assignment[node]` is the community id; ids are dense from 0 and
    /// numbered in order of each community's smallest member.
    pub assignment: Vec<usize>,
    pub modularity: f64,
    /// Modularity after each aggregation level.
    pub level_modularity: Vec<f64>,
}

impl CommunityPartition {
    pub fn community_count(&self) -> usize {
        self.assignment.iter().max().map_or(0, |m| m + 1)
    }

    /// Member lists indexed by community id.
    pub fn communities(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.community_count()];
        for (node, &c) in self.assignment.iter().enumerate() {
            out[c].push(node);
        }
        out
    }
}

/// Weighted Newman modularity of `assignment` on `g`; 0 when `g` has no edges.
pub fn modularity(g: &WeightedGraph, assignment: &[usize]) -> f64 {
    let m = g.total_weight();
    if m == 0.0 {
        return 0.0;
    }
    let k = assignment.iter().max().map_or(0, |x| x + 1);
    let mut inner = vec![0.0; k];
    let mut tot = vec![0.0; k];
    for (u, v, w) in g.edges() {
        tot[assignment[u]] += w;
        tot[assignment[v]] += w;
        if assignment[u] == assignment[v] {
            inner[assignment[u]] += w;
        }
    }
    inner
        .iter()
        .zip(&tot)
        .map(|(i, t)| i / m - (t / (2.0 * m)).powi(2))
        .sum()
}

/// Aggregated graph used between Louvain levels; self-loops hold the
/// internal weight of merged communities.
struct LevelGraph {
    adj: Vec<Vec<(usize, f64)>>,
    self_loop: Vec<f64>,
}

impl LevelGraph {
    fn strength(&self, u: usize) -> f64 {
        self.adj[u].iter().map(|(_, w)| w).sum::<f64>() + 2.0 * self.self_loop[u]
    }
}

const GAIN_EPS: f64 = 1e-12;
const MAX_SWEEPS: usize = 1000;

/// Independent Louvain passes per call; the best partition wins.
pub const LOUVAIN_RESTARTS: usize = 8;

/// Louvain modularity optimisation on edge weights.
///
/// Node visiting order in each level is a seed-keyed shuffle; a node moves
/// only for a strictly positive gain over staying, and equal-gain targets
/// resolve to the smallest community id. After the multilevel phase, a
/// Kernighan–Lin sweep over the original nodes refines the result, and the
/// multilevel phase resumes while that refinement raises modularity.
/// Greedy moves can still lock into a poor local optimum for an unlucky
/// order, so [`LOUVAIN_RESTARTS`] passes with successive shuffles from the
/// same seeded stream are run and the first best partition is kept.
pub fn louvain(g: &WeightedGraph, seed: u64) -> Result<CommunityPartition, GraphError> {
    let n = g.node_count();
    if n == 0 {
        return Err(GraphError::EmptyGraph);
    }
    if g.total_weight() == 0.0 {
        return Ok(CommunityPartition {
            assignment: (0..n).collect(),
            modularity: 0.0,
            level_modularity: vec![0.0],
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = louvain_pass(g, &mut rng);
    for _ in 1..LOUVAIN_RESTARTS {
        let candidate = louvain_pass(g, &mut rng);
        if candidate.modularity > best.modularity + GAIN_EPS {
            best = candidate;
        }
    }
    Ok(best)
}

fn louvain_pass(g: &WeightedGraph, rng: &mut ChaCha8Rng) -> CommunityPartition {
    let n = g.node_count();
    let m = g.total_weight();
    let base = LevelGraph {
        adj: (0..n).map(|u| g.neighbors(u).collect()).collect(),
        self_loop: vec![0.0; n],
    };
    // node -> current top-level community (dense ids)
    let mut membership: Vec<usize> = (0..n).collect();
    let mut level_modularity = vec![modularity(g, &membership)];

    for _ in 0..MAX_SWEEPS {
        let (dense, k) = densify(&membership);
        for c in membership.iter_mut() {
            *c = dense[*c];
        }
        let mut level = aggregate(&base, &membership, k);
        loop {
            let count = level.adj.len();
            let mut comm: Vec<usize> = (0..count).collect();
            if !local_moving(&level, &mut comm, m, rng) {
                break;
            }
            let (dense, k) = densify(&comm);
            let labels: Vec<usize> = comm.iter().map(|&c| dense[c]).collect();
            for c in membership.iter_mut() {
                *c = labels[*c];
            }
            level_modularity.push(modularity(g, &membership));
            level = aggregate(&level, &labels, k);
            if k == count {
                break;
            }
        }

        // Refinement on the original nodes: a Kernighan–Lin sweep can leave
        // local optima that greedy moves cannot; resume aggregation if it helps.
        let before = modularity(g, &membership);
        let refined = kl_refine(g, &membership);
        let after = modularity(g, &refined);
        if after <= before + GAIN_EPS {
            break;
        }
        membership = refined;
        level_modularity.push(after);
    }

    let (dense, _) = densify(&membership);
    let assignment: Vec<usize> = membership.iter().map(|&c| dense[c]).collect();
    let modularity = modularity(g, &assignment);
    CommunityPartition {
        assignment,
        modularity,
        level_modularity,
    }
}

/// One Kernighan–Lin sweep over the nodes of `g`: repeatedly apply the
/// best single-node move (possibly negative, possibly into an empty
/// community), each node moving at most once, and return the best partition
/// seen along the way. Ties go to the smallest node, then smallest community.
fn kl_refine(g: &WeightedGraph, membership: &[usize]) -> Vec<usize> {
    let n = g.node_count();
    let m = g.total_weight();
    let strength: Vec<f64> = (0..n).map(|u| g.strength(u)).collect();
    let mut comm = membership.to_vec();
    let mut tot = vec![0.0; n];
    let mut size = vec![0usize; n];
    for u in 0..n {
        tot[comm[u]] += strength[u];
        size[comm[u]] += 1;
    }
    let mut locked = vec![false; n];
    let mut current = 0.0;
    let mut best_gain = 0.0;
    let mut best = comm.clone();

    for _ in 0..n {
        let mut choice: Option<(f64, usize, usize)> = None;
        let empty = size.iter().position(|&s| s == 0);
        for u in (0..n).filter(|&u| !locked[u]) {
            let a = comm[u];
            let mut links: BTreeMap<usize, f64> = BTreeMap::new();
            for (v, w) in g.neighbors(u) {
                *links.entry(comm[v]).or_insert(0.0) += w;
            }
            let k_a = links.get(&a).copied().unwrap_or(0.0);
            let targets = links.keys().copied().chain(empty.filter(|_| size[a] > 1));
            for b in targets.filter(|&b| b != a) {
                let k_b = links.get(&b).copied().unwrap_or(0.0);
                let delta = (k_b - k_a) / m
                    - strength[u] * (tot[b] - tot[a] + strength[u]) / (2.0 * m * m);
                if choice.is_none_or(|(d, _, _)| delta > d + GAIN_EPS) {
                    choice = Some((delta, u, b));
                }
            }
        }
        let Some((delta, u, b)) = choice else { break };
        let a = comm[u];
        tot[a] -= strength[u];
        size[a] -= 1;
        tot[b] += strength[u];
        size[b] += 1;
        comm[u] = b;
        locked[u] = true;
        current += delta;
        if current > best_gain + GAIN_EPS {
            best_gain = current;
            best.clone_from(&comm);
        }
    }
    best
}

/// Move single nodes of `level` while some move has strictly positive
/// modularity gain. `comm` holds community ids below `level.adj.len()`.
/// Returns whether any node moved.
fn local_moving(level: &LevelGraph, comm: &mut [usize], m: f64, rng: &mut ChaCha8Rng) -> bool {
    let count = level.adj.len();
    let strength: Vec<f64> = (0..count).map(|u| level.strength(u)).collect();
    let mut tot = vec![0.0; count];
    for u in 0..count {
        tot[comm[u]] += strength[u];
    }
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(rng);

    let mut any_move = false;
    for _ in 0..MAX_SWEEPS {
        let mut moved = false;
        for &u in &order {
            let current = comm[u];
            let mut links: BTreeMap<usize, f64> = BTreeMap::new();
            for &(v, w) in &level.adj[u] {
                *links.entry(comm[v]).or_insert(0.0) += w;
            }
            tot[current] -= strength[u];
            let gain = |c: usize, link: f64| link - tot[c] * strength[u] / (2.0 * m);
            let mut best = current;
            let mut best_gain = gain(current, links.get(&current).copied().unwrap_or(0.0));
            for (&c, &link) in &links {
                let cand = gain(c, link);
                if cand > best_gain + GAIN_EPS {
                    best = c;
                    best_gain = cand;
                }
            }
            tot[best] += strength[u];
            if best != current {
                comm[u] = best;
                moved = true;
            }
        }
        if !moved {
            break;
        }
        any_move = true;
    }
    any_move
}

/// Collapse each community (dense `labels`, `k` of them) into one node;
/// internal weight becomes a self-loop.
fn aggregate(level: &LevelGraph, labels: &[usize], k: usize) -> LevelGraph {
    let mut self_loop = vec![0.0; k];
    let mut between: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); k];
    for (u, nbrs) in level.adj.iter().enumerate() {
        let cu = labels[u];
        self_loop[cu] += level.self_loop[u];
        for &(v, w) in nbrs {
            let cv = labels[v];
            if cu == cv {
                if u < v {
                    self_loop[cu] += w;
                }
            } else {
                *between[cu].entry(cv).or_insert(0.0) += w;
            }
        }
    }
    LevelGraph {
        adj: between.into_iter().map(|b| b.into_iter().collect()).collect(),
        self_loop,
    }
}

/// Renumber labels densely in order of first appearance. Returns the
/// label → dense id map (indexed by label) and the number of ids.
fn densify(labels: &[usize]) -> (Vec<usize>, usize) {
    let size = labels.iter().max().map_or(0, |m| m + 1);
    let mut map = vec![usize::MAX; size.max(labels.len())];
    let mut next = 0;
    for &l in labels {
        if map[l] == usize::MAX {
            map[l] = next;
            next += 1;
        }
    }
    (map, next)
}

/// Degeneracy ordering: repeatedly remove a minimum-degree node. Returns the
/// removal rank of every node.
pub fn degeneracy_rank(g: &WeightedGraph) -> Vec<usize> {
    let n = g.node_count();
    let mut degree: Vec<usize> = (0..n).map(|u| g.degree(u)).collect();
    let mut queue: std::collections::BTreeSet<(usize, usize)> =
        (0..n).map(|u| (degree[u], u)).collect();
    let mut rank = vec![usize::MAX; n];
    let mut next = 0;
    while let Some((_, u)) = queue.pop_first() {
        rank[u] = next;
        next += 1;
        for (v, _) in g.neighbors(u) {
            if rank[v] == usize::MAX {
                queue.remove(&(degree[v], v));
                degree[v] -= 1;
                queue.insert((degree[v], v));
            }
        }
    }
    rank
}

/// Exact number of 4-cliques, ignoring weights.
///
/// Edges are oriented along the degeneracy order so each clique is found
/// once, from its lowest-ranked node.
pub fn count_k4(g: &WeightedGraph) -> u64 {
    let n = g.node_count();
    let rank = degeneracy_rank(g);
    let out: Vec<Vec<usize>> = (0..n)
        .map(|u| {
            let mut v: Vec<usize> = g
                .neighbors(u)
                .map(|(v, _)| v)
                .filter(|&v| rank[v] > rank[u])
                .collect();
            v.sort_unstable();
            v
        })
        .collect();

    let mut count = 0u64;
    for u in 0..n {
        for &v in &out[u] {
            let common_uv = intersect(&out[u], &out[v]);
            for &w in &common_uv {
                count += intersect(&common_uv, &out[w]).len() as u64;
            }
        }
    }
    count
}

fn intersect(a: &[usize], b: &[usize]) -> Vec<usize> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}
