use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::graph::{SignedPathwayGraph, Topology};
use super::PathwayError;

/// Caps on simple-path enumeration per (gene, endpoint) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathCaps {
    pub max_len: usize,
    pub max_paths: usize,
}

impl Default for PathCaps {
    fn default() -> Self {
        Self {
            max_len: 8,
            max_paths: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Polarity {
    /// Mean product of edge signs over enumerated paths; 0 when there is no path.
    pub value: f64,
    pub paths: usize,
    pub no_path: bool,
    /// True when some (gene, endpoint) pair hit `max_paths`.
    pub overflow: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Downstream,
    Upstream,
}

/// Average path polarity from `gene` to the given endpoint symbols.
pub fn path_polarity(
    g: &SignedPathwayGraph,
    gene: &str,
    endpoints: &[&str],
) -> Result<Polarity, PathwayError> {
    let start = g.require(gene)?;
    let targets = endpoints
        .iter()
        .map(|e| g.require(e))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(path_polarity_idx(g, start, &targets, PathCaps::default()))
}

pub fn path_polarity_idx(
    g: &SignedPathwayGraph,
    start: usize,
    endpoints: &[usize],
    caps: PathCaps,
) -> Polarity {
    let sorted_succ: Vec<Vec<usize>> = (0..g.node_count())
        .map(|v| {
            let mut s = g.successors(v).to_vec();
            s.sort_by(|a, b| g.label(*a).cmp(g.label(*b)));
            s
        })
        .collect();
    let mut targets: Vec<usize> = endpoints.to_vec();
    targets.sort_unstable();
    targets.dedup();

    let mut total_paths = 0usize;
    let mut sign_sum = 0i64;
    let mut overflow = false;
    for &target in &targets {
        if target == start {
            continue;
        }
        let dist = distance_to(g, target);
        let mut walk = PathWalk {
            g,
            succ: &sorted_succ,
            target,
            caps,
            dist: &dist,
            on_path: vec![false; g.node_count()],
            count: 0,
            sum: 0,
        };
        walk.on_path[start] = true;
        walk.dfs(start, 0, 1);
        if walk.count >= caps.max_paths {
            overflow = true;
        }
        total_paths += walk.count;
        sign_sum += walk.sum;
    }
    if total_paths == 0 {
        return Polarity {
            value: 0.0,
            paths: 0,
            no_path: true,
            overflow,
        };
    }
    Polarity {
        value: sign_sum as f64 / total_paths as f64,
        paths: total_paths,
        no_path: false,
        overflow,
    }
}

/// Reverse-BFS hop distance from every node to `target` (usize::MAX if unreachable).
fn distance_to(g: &impl Topology, target: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; g.node_count()];
    dist[target] = 0;
    let mut q = VecDeque::from([target]);
    while let Some(v) = q.pop_front() {
        for &u in g.predecessors(v) {
            if dist[u] == usize::MAX {
                dist[u] = dist[v] + 1;
                q.push_back(u);
            }
        }
    }
    dist
}

struct PathWalk<'a> {
    g: &'a SignedPathwayGraph,
    succ: &'a [Vec<usize>],
    target: usize,
    caps: PathCaps,
    dist: &'a [usize],
    on_path: Vec<bool>,
    count: usize,
    sum: i64,
}

impl PathWalk<'_> {
    fn dfs(&mut self, v: usize, len: usize, sign: i64) {
        for &w in &self.succ[v] {
            if self.count >= self.caps.max_paths {
                return;
            }
            if self.on_path[w] || self.dist[w] == usize::MAX {
                continue;
            }
            if len + 1 + self.dist[w] > self.caps.max_len {
                continue;
            }
            let s = sign * self.g.weight(v, w).expect("successor edge") as i64;
            if w == self.target {
                self.count += 1;
                self.sum += s;
                continue;
            }
            self.on_path[w] = true;
            self.dfs(w, len + 1, s);
            self.on_path[w] = false;
        }
    }
}

/// Unnormalized directed betweenness with unit edge lengths (Brandes).
pub fn betweenness(g: &impl Topology) -> Vec<f64> {
    let n = g.node_count();
    let mut cb = vec![0.0; n];
    let mut stack = Vec::with_capacity(n);
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut sigma = vec![0f64; n];
    let mut dist = vec![-1i64; n];
    let mut delta = vec![0f64; n];
    for s in 0..n {
        stack.clear();
        for v in 0..n {
            preds[v].clear();
            sigma[v] = 0.0;
            dist[v] = -1;
            delta[v] = 0.0;
        }
        sigma[s] = 1.0;
        dist[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            stack.push(v);
            for &w in g.successors(v) {
                if dist[w] < 0 {
                    dist[w] = dist[v] + 1;
                    q.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                cb[w] += delta[w];
            }
        }
    }
    cb
}

pub fn betweenness_map(g: &impl Topology) -> BTreeMap<String, f64> {
    betweenness(g)
        .into_iter()
        .enumerate()
        .map(|(i, c)| (g.label(i).to_string(), c))
        .collect()
}

/// Strongly connected components (iterative Tarjan). Each component is sorted,
/// and components are ordered by their smallest member.
pub fn strongly_connected_components(g: &impl Topology) -> Vec<Vec<usize>> {
    let n = g.node_count();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut next = 0usize;
    let mut out = Vec::new();

    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        // (node, next successor position)
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            let succ = g.successors(v);
            if *pos < succ.len() {
                let w = succ[*pos];
                *pos += 1;
                if index[w] == usize::MAX {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                out.push(comp);
            }
        }
    }
    out.sort_by_key(|c| c[0]);
    out
}

/// Nodes lying on a directed cycle.
pub fn cycle_nodes(g: &impl Topology) -> BTreeSet<usize> {
    strongly_connected_components(g)
        .into_iter()
        .filter(|c| c.len() > 1)
        .flatten()
        .collect()
}

/// Nodes reachable in 1..=k forward (downstream) or reverse (upstream) steps,
/// excluding the start node.
pub fn k_step_neighborhood(
    g: &impl Topology,
    node: usize,
    k: usize,
    direction: Direction,
) -> Result<BTreeSet<usize>, PathwayError> {
    if node >= g.node_count() {
        return Err(PathwayError::NodeNotFound(format!("#{node}")));
    }
    let mut seen = BTreeSet::new();
    let mut frontier = vec![node];
    let mut visited = vec![false; g.node_count()];
    visited[node] = true;
    for _ in 0..k {
        let mut next = Vec::new();
        for v in frontier {
            let nbrs = match direction {
                Direction::Downstream => g.successors(v),
                Direction::Upstream => g.predecessors(v),
            };
            for &w in nbrs {
                if !visited[w] {
                    visited[w] = true;
                    seen.insert(w);
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Ok(seen)
}

/// Nodes with out-degree zero.
pub fn terminal_endpoints(g: &impl Topology) -> BTreeSet<usize> {
    (0..g.node_count())
        .filter(|&v| g.successors(v).is_empty())
        .collect()
}
