//! Residual graph with integral capacities and real costs.

use std::collections::VecDeque;

const RELAX_EPS: f64 = 1e-12;

#[derive(Clone, Debug)]
struct Edge {
    to: usize,
    cap: i64,
    cost: f64,
}

/// Edges are stored in pairs: `2i` forward, `2i + 1` its reverse.
#[derive(Clone, Debug, Default)]
pub struct Graph {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl Graph {
    pub fn new(nodes: usize) -> Self {
        Graph { edges: Vec::new(), adj: vec![Vec::new(); nodes] }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: i64, cost: f64) -> usize {
        let id = self.edges.len();
        self.edges.push(Edge { to, cap, cost });
        self.edges.push(Edge { to: from, cap: 0, cost: -cost });
        self.adj[from].push(id);
        self.adj[to].push(id + 1);
        id
    }

    /// Units currently sent along forward edge `id`.
    pub fn flow(&self, id: usize) -> i64 {
        self.edges[id + 1].cap
    }

    /// Label-correcting shortest paths from `s` over residual edges; costs
    /// may be negative.
    fn shortest_paths(&self, s: usize) -> (Vec<f64>, Vec<Option<usize>>) {
        let n = self.adj.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut prev = vec![None; n];
        let mut queued = vec![false; n];
        let mut relaxations = vec![0usize; n];
        let mut queue = VecDeque::new();
        dist[s] = 0.0;
        queue.push_back(s);
        queued[s] = true;
        while let Some(u) = queue.pop_front() {
            queued[u] = false;
            for &e in &self.adj[u] {
                let edge = &self.edges[e];
                if edge.cap <= 0 {
                    continue;
                }
                let nd = dist[u] + edge.cost;
                if nd < dist[edge.to] - RELAX_EPS {
                    dist[edge.to] = nd;
                    prev[edge.to] = Some(e);
                    relaxations[edge.to] += 1;
                    // Rounding can fake a tiny negative cycle; stop relaxing then.
                    if !queued[edge.to] && relaxations[edge.to] <= n {
                        queued[edge.to] = true;
                        queue.push_back(edge.to);
                    }
                }
            }
        }
        (dist, prev)
    }

    /// Sends `amount` units from `s` to `t` by successive shortest paths.
    /// Returns the cost, or `None` if fewer units can be routed.
    pub fn min_cost_flow(&mut self, s: usize, t: usize, amount: i64) -> Option<f64> {
        let mut sent = 0;
        let mut cost = 0.0;
        while sent < amount {
            let (dist, prev) = self.shortest_paths(s);
            if !dist[t].is_finite() {
                return None;
            }
            let mut push = amount - sent;
            let mut v = t;
            while let Some(e) = prev[v] {
                push = push.min(self.edges[e].cap);
                v = self.edges[e ^ 1].to;
            }
            let mut v = t;
            while let Some(e) = prev[v] {
                self.edges[e].cap -= push;
                self.edges[e ^ 1].cap += push;
                cost += push as f64 * self.edges[e].cost;
                v = self.edges[e ^ 1].to;
            }
            sent += push;
        }
        Some(cost)
    }

    /// Maximum flow value by shortest augmenting paths, costs ignored.
    pub fn max_flow(&mut self, s: usize, t: usize) -> i64 {
        let n = self.adj.len();
        let mut total = 0;
        loop {
            let mut prev: Vec<Option<usize>> = vec![None; n];
            let mut seen = vec![false; n];
            seen[s] = true;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &e in &self.adj[u] {
                    let to = self.edges[e].to;
                    if self.edges[e].cap > 0 && !seen[to] {
                        seen[to] = true;
                        prev[to] = Some(e);
                        queue.push_back(to);
                    }
                }
            }
            if !seen[t] {
                return total;
            }
            let mut push = i64::MAX;
            let mut v = t;
            while let Some(e) = prev[v] {
                push = push.min(self.edges[e].cap);
                v = self.edges[e ^ 1].to;
            }
            let mut v = t;
            while let Some(e) = prev[v] {
                self.edges[e].cap -= push;
                self.edges[e ^ 1].cap += push;
                v = self.edges[e ^ 1].to;
            }
            total += push;
        }
    }
}
