//! Graph measures on the effective connectivity of a brain.

use std::collections::VecDeque;

use crate::brain::{ConnectivityMatrix, NODE_COUNT};
use crate::num::Real;

type Adjacency = [[bool; NODE_COUNT]; NODE_COUNT];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BrainGraphMetrics<R = f64> {
    /// Size of the largest strongly connected component (singletons count 1).
    pub lscc_size: usize,
    /// Mean shortest path length over reachable ordered pairs `i != j`;
    /// zero if no pair is reachable.
    pub avg_shortest_path: R,
    /// Mean normalized directed betweenness.
    pub avg_betweenness: R,
    /// Mean number of distinct neighbours, ignoring direction and self-loops.
    pub avg_degree: R,
    /// Ordered pairs `i != j` with no path from `i` to `j`.
    pub unreachable_pairs: usize,
}

pub const METRICS_CSV_HEADER: &str = "lscc,avg_shortest_path,avg_betweenness,avg_degree,unreachable_pairs";

impl<R: Real> BrainGraphMetrics<R> {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.lscc_size,
            self.avg_shortest_path.to_f64_lossy(),
            self.avg_betweenness.to_f64_lossy(),
            self.avg_degree.to_f64_lossy(),
            self.unreachable_pairs
        )
    }
}

/// Strongly connected components (Tarjan), each as a list of nodes.
pub fn strongly_connected_components(adj: &Adjacency) -> Vec<Vec<usize>> {
    struct Tarjan<'a> {
        adj: &'a Adjacency,
        index: [Option<usize>; NODE_COUNT],
        low: [usize; NODE_COUNT],
        on_stack: [bool; NODE_COUNT],
        stack: Vec<usize>,
        next: usize,
        out: Vec<Vec<usize>>,
    }

    impl Tarjan<'_> {
        fn visit(&mut self, v: usize) {
            self.index[v] = Some(self.next);
            self.low[v] = self.next;
            self.next += 1;
            self.stack.push(v);
            self.on_stack[v] = true;
            for w in 0..NODE_COUNT {
                if !self.adj[v][w] {
                    continue;
                }
                match self.index[w] {
                    None => {
                        self.visit(w);
                        self.low[v] = self.low[v].min(self.low[w]);
                    }
                    Some(iw) if self.on_stack[w] => self.low[v] = self.low[v].min(iw),
                    Some(_) => {}
                }
            }
            if Some(self.low[v]) == self.index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = self.stack.pop().expect("component root on stack");
                    self.on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                self.out.push(comp);
            }
        }
    }

    let mut t = Tarjan {
        adj,
        index: [None; NODE_COUNT],
        low: [0; NODE_COUNT],
        on_stack: [false; NODE_COUNT],
        stack: Vec::new(),
        next: 0,
        out: Vec::new(),
    };
    for v in 0..NODE_COUNT {
        if t.index[v].is_none() {
            t.visit(v);
        }
    }
    t.out
}

pub fn lscc_size(cm: &ConnectivityMatrix) -> usize {
    strongly_connected_components(cm.adjacency()).iter().map(Vec::len).max().unwrap_or(0)
}

/// Breadth-first distances from `s`.
fn distances(adj: &Adjacency, s: usize) -> [Option<usize>; NODE_COUNT] {
    let mut dist = [None; NODE_COUNT];
    dist[s] = Some(0);
    let mut queue = VecDeque::from([s]);
    while let Some(v) = queue.pop_front() {
        let d = dist[v].unwrap();
        for w in 0..NODE_COUNT {
            if adj[v][w] && dist[w].is_none() {
                dist[w] = Some(d + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Brandes betweenness for an unweighted directed graph, scaled by
/// `1 / ((n-1)(n-2))`.
fn betweenness(adj: &Adjacency) -> [f64; NODE_COUNT] {
    let mut cb = [0.0; NODE_COUNT];
    for s in 0..NODE_COUNT {
        let mut order = Vec::with_capacity(NODE_COUNT);
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); NODE_COUNT];
        let mut sigma = [0.0f64; NODE_COUNT];
        let mut dist = [usize::MAX; NODE_COUNT];
        sigma[s] = 1.0;
        dist[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for w in 0..NODE_COUNT {
                if !adj[v][w] || w == v {
                    continue;
                }
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        let mut delta = [0.0f64; NODE_COUNT];
        for &w in order.iter().rev() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                cb[w] += delta[w];
            }
        }
    }
    let n = NODE_COUNT as f64;
    cb.map(|c| c / ((n - 1.0) * (n - 2.0)))
}

pub fn brain_graph_metrics<R: Real>(cm: &ConnectivityMatrix) -> BrainGraphMetrics<R> {
    let adj = cm.adjacency();
    let (mut total, mut reachable, mut unreachable) = (0usize, 0usize, 0usize);
    for s in 0..NODE_COUNT {
        let d = distances(adj, s);
        for (t, dt) in d.iter().enumerate() {
            if t == s {
                continue;
            }
            match dt {
                Some(k) => {
                    total += k;
                    reachable += 1;
                }
                None => unreachable += 1,
            }
        }
    }
    let avg_shortest_path = if reachable == 0 { 0.0 } else { total as f64 / reachable as f64 };
    let bc = betweenness(adj);
    let degree: usize = (0..NODE_COUNT)
        .map(|v| (0..NODE_COUNT).filter(|&w| w != v && (adj[v][w] || adj[w][v])).count())
        .sum();
    let r = |x: f64| R::from_f64(x).expect("finite metric");
    BrainGraphMetrics {
        lscc_size: lscc_size(cm),
        avg_shortest_path: r(avg_shortest_path),
        avg_betweenness: r(bc.iter().sum::<f64>() / NODE_COUNT as f64),
        avg_degree: r(degree as f64 / NODE_COUNT as f64),
        unreachable_pairs: unreachable,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(edges: &[(usize, usize)]) -> ConnectivityMatrix {
        let mut adj = [[false; NODE_COUNT]; NODE_COUNT];
        for &(a, b) in edges {
            adj[a][b] = true;
        }
        ConnectivityMatrix::from_adjacency(adj)
    }

    #[test]
    fn empty_graph() {
        let m: BrainGraphMetrics = brain_graph_metrics(&matrix(&[]));
        assert_eq!(m.lscc_size, 1);
        assert_eq!(m.avg_degree, 0.0);
        assert_eq!(m.avg_shortest_path, 0.0);
        assert_eq!(m.unreachable_pairs, 56);
    }

    #[test]
    fn full_recurrent_core_is_six() {
        let edges: Vec<_> = (0..8).flat_map(|a| (2..8).map(move |b| (a, b))).collect();
        let m: BrainGraphMetrics = brain_graph_metrics(&matrix(&edges));
        assert_eq!(m.lscc_size, 6);
        // hidden and motor nodes touch all 7 others, sensors only the 6 writable nodes
        assert_eq!(m.avg_degree, 54.0 / 8.0);
    }

    #[test]
    fn directed_path_metrics() {
        // 2 -> 3 -> 4; pairs (2,3),(3,4) at 1 and (2,4) at 2
        let m: BrainGraphMetrics = brain_graph_metrics(&matrix(&[(2, 3), (3, 4)]));
        assert_eq!(m.lscc_size, 1);
        assert!((m.avg_shortest_path - 4.0 / 3.0).abs() < 1e-12);
        // node 3 lies on the only 2 -> 4 path: 1 / (7 * 6), averaged over 8
        assert!((m.avg_betweenness - 1.0 / 42.0 / 8.0).abs() < 1e-12);
        assert_eq!(m.avg_degree, 4.0 / 8.0);
        assert_eq!(m.unreachable_pairs, 53);
    }

    #[test]
    fn split_shortest_paths_share_betweenness() {
        // 2 -> {3,4} -> 5: nodes 3 and 4 each carry half of the 2 -> 5 pair
        let cm = matrix(&[(2, 3), (2, 4), (3, 5), (4, 5)]);
        let bc = betweenness(cm.adjacency());
        assert!((bc[3] - 0.5 / 42.0).abs() < 1e-12);
        assert_eq!(bc[3], bc[4]);
        assert_eq!(bc[2], 0.0);
    }

    #[test]
    fn self_loops_ignored_for_degree() {
        let m: BrainGraphMetrics = brain_graph_metrics(&matrix(&[(3, 3), (3, 4), (4, 3)]));
        assert_eq!(m.avg_degree, 2.0 / 8.0);
        assert_eq!(m.lscc_size, 2);
    }
}
