//! Instances built from 3-regular bipartite graphs, whose most-compliant
//! worlds are tied to perfect matchings.

use rand::seq::SliceRandom;
use rand::Rng;

use super::FlowError;
use crate::bid::{BidRelation, BidTuple, Block};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BipartiteGraph {
    pub vertices: usize,
    pub edges: Vec<(usize, usize)>,
}

impl BipartiteGraph {
    /// One `u v` pair of vertex numbers per line; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut edges = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let nums: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| format!("line {}: `{t}` is not a vertex number", i + 1)))
                .collect::<Result<_, _>>()?;
            match nums.as_slice() {
                [u, v] => edges.push((*u, *v)),
                _ => return Err(format!("line {}: expected two vertex numbers", i + 1)),
            }
        }
        let vertices = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
        Ok(BipartiteGraph { vertices, edges })
    }

    pub fn to_text(&self) -> String {
        self.edges.iter().map(|(u, v)| format!("{u} {v}\n")).collect()
    }

    pub fn complete_3_3() -> Self {
        let edges = (0..3).flat_map(|l| (3..6).map(move |r| (l, r))).collect();
        BipartiteGraph { vertices: 6, edges }
    }

    /// Side of each vertex (`false` = left) by 2-colouring from the lowest
    /// unvisited vertex.
    fn sides(&self) -> Result<Vec<bool>, FlowError> {
        let mut adj = vec![Vec::new(); self.vertices];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut colour: Vec<Option<bool>> = vec![None; self.vertices];
        for start in 0..self.vertices {
            if colour[start].is_some() {
                continue;
            }
            colour[start] = Some(false);
            let mut stack = vec![start];
            while let Some(u) = stack.pop() {
                let cu = colour[u].unwrap();
                for &v in &adj[u] {
                    match colour[v] {
                        None => {
                            colour[v] = Some(!cu);
                            stack.push(v);
                        }
                        Some(cv) if cv == cu => return Err(FlowError::NotBipartite),
                        Some(_) => {}
                    }
                }
            }
        }
        Ok(colour.into_iter().map(Option::unwrap).collect())
    }

    fn check(&self) -> Result<Vec<bool>, FlowError> {
        let mut degree = vec![0usize; self.vertices];
        let mut seen = std::collections::BTreeSet::new();
        for &(u, v) in &self.edges {
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(FlowError::RepeatedEdge(u, v));
            }
            degree[u] += 1;
            degree[v] += 1;
        }
        if let Some((vertex, &degree)) = degree.iter().enumerate().find(|(_, &d)| d != 3) {
            return Err(FlowError::NotThreeRegular { vertex, degree });
        }
        let sides = self.sides()?;
        let right = sides.iter().filter(|&&s| s).count();
        let left = sides.len() - right;
        if left != right {
            return Err(FlowError::UnbalancedSides { left, right });
        }
        Ok(sides)
    }
}

/// One row per edge; a block per left vertex choosing one of its three
/// edges; two blocks per right vertex over consecutive pairs of its edges.
/// Returns the relation and the uniform induced distribution. Use with
/// [`crate::compliance::DistanceKind::Matchings`].
pub fn matchings_instance(g: &BipartiteGraph) -> Result<(BidRelation, Vec<f64>), FlowError> {
    let sides = g.check()?;
    let oriented: Vec<(usize, usize)> =
        g.edges.iter().map(|&(u, v)| if sides[u] { (v, u) } else { (u, v) }).collect();
    let row = |e: usize| vec![format!("{}-{}", oriented[e].0, oriented[e].1)];
    let block = |origin: String, edges: &[usize]| {
        let p = 1.0 / edges.len() as f64;
        Block {
            tuples: edges
                .iter()
                .enumerate()
                .map(|(i, &e)| BidTuple { tid: format!("{origin}#{}", i + 1), values: row(e), prob: p })
                .collect(),
            origin,
        }
    };
    let incident = |x: usize| -> Vec<usize> {
        (0..oriented.len()).filter(|&e| oriented[e].0 == x || oriented[e].1 == x).collect()
    };
    let mut blocks = Vec::new();
    for x in (0..g.vertices).filter(|&x| !sides[x]) {
        blocks.push(block(format!("L{x}"), &incident(x)));
    }
    for x in (0..g.vertices).filter(|&x| sides[x]) {
        let es = incident(x);
        blocks.push(block(format!("R{x}a"), &es[0..2]));
        blocks.push(block(format!("R{x}b"), &es[1..3]));
    }
    let rel = BidRelation { name: "M".into(), attributes: vec!["edge".into()], blocks };
    let induced = vec![1.0 / g.edges.len() as f64; g.edges.len()];
    Ok((rel, induced))
}

/// Perfect matchings by exhaustive search over left vertices.
pub fn count_perfect_matchings(g: &BipartiteGraph) -> Result<u64, FlowError> {
    let sides = g.sides()?;
    let left: Vec<usize> = (0..g.vertices).filter(|&x| !sides[x]).collect();
    let right = g.vertices - left.len();
    if left.len() != right {
        return Ok(0);
    }
    let mut adj = vec![Vec::new(); g.vertices];
    for &(u, v) in &g.edges {
        if sides[u] {
            adj[v].push(u);
        } else {
            adj[u].push(v);
        }
    }
    fn go(i: usize, left: &[usize], adj: &[Vec<usize>], used: &mut Vec<bool>) -> u64 {
        let Some(&u) = left.get(i) else { return 1 };
        let mut total = 0;
        for &v in &adj[u] {
            if !used[v] {
                used[v] = true;
                total += go(i + 1, left, adj, used);
                used[v] = false;
            }
        }
        total
    }
    Ok(go(0, &left, &adj, &mut vec![false; g.vertices]))
}

/// Union of three edge-disjoint random perfect matchings between left
/// vertices `0..side` and right vertices `side..2·side`.
pub fn random_cubic_bipartite<R: Rng>(side: usize, rng: &mut R) -> BipartiteGraph {
    assert!(side >= 3, "a 3-regular bipartite graph needs at least 3 vertices per side");
    loop {
        let mut edges = Vec::with_capacity(3 * side);
        let mut seen = std::collections::BTreeSet::new();
        let mut ok = true;
        for _ in 0..3 {
            let mut perm: Vec<usize> = (0..side).collect();
            perm.shuffle(rng);
            for (l, &r) in perm.iter().enumerate() {
                ok &= seen.insert((l, r));
                edges.push((l, side + r));
            }
        }
        if ok {
            edges.sort_unstable();
            return BipartiteGraph { vertices: 2 * side, edges };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compliance::DistanceKind;
    use crate::flow::{count_mcc, enumerate_mcc};
    use crate::worlds::{class_world_count, support_of};
    use rand::SeedableRng;

    #[test]
    fn k33_instance_shape() {
        let g = BipartiteGraph::complete_3_3();
        assert_eq!(count_perfect_matchings(&g).unwrap(), 6);
        let (rel, p) = matchings_instance(&g).unwrap();
        assert_eq!(rel.blocks.len(), 9);
        let s = support_of(&rel);
        assert_eq!(s.m(), 9);
        assert!(p.iter().all(|&x| (x - 1.0 / 9.0).abs() < 1e-15));
        let (classes, _) = enumerate_mcc(&s, DistanceKind::Matchings, &p, 100).unwrap();
        assert_eq!(classes, vec![vec![1; 9]]);
        assert_eq!(count_mcc(&s, DistanceKind::Matchings, &p, 100).unwrap(), 1);
        // The worlds of the single zero-cost class are the perfect matchings.
        assert_eq!(class_world_count(&s, &[1; 9], 1 << 20).unwrap(), 6);
    }

    #[test]
    fn rejects_bad_graphs() {
        let c6 = BipartiteGraph { vertices: 6, edges: (0..6).map(|i| (i, (i + 1) % 6)).collect() };
        assert_eq!(matchings_instance(&c6).unwrap_err(), FlowError::NotThreeRegular { vertex: 0, degree: 2 });
        // K4 is 3-regular but has triangles.
        let k4 = BipartiteGraph { vertices: 4, edges: vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] };
        assert_eq!(matchings_instance(&k4).unwrap_err(), FlowError::NotBipartite);
    }

    #[test]
    fn random_graph_is_cubic() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let g = random_cubic_bipartite(4, &mut rng);
        assert!(matchings_instance(&g).is_ok());
        assert_eq!(BipartiteGraph::parse(&g.to_text()).unwrap(), g);
        let (rel, _) = matchings_instance(&g).unwrap();
        let s = support_of(&rel);
        let n = count_perfect_matchings(&g).unwrap() as u128;
        assert_eq!(class_world_count(&s, &[1; 12], 1 << 24).unwrap(), n);
    }
}
