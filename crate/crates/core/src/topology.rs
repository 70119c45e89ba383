//! Undirected, connected communication graphs.

use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_RESAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "EdgeList", into = "EdgeList")]
pub struct Graph {
    adjacency: Vec<BTreeSet<usize>>,
}

/// Serialized form: agent count plus `(i, j)` pairs with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeList {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

impl From<Graph> for EdgeList {
    fn from(g: Graph) -> Self {
        EdgeList {
            n: g.n(),
            edges: g.edges(),
        }
    }
}

impl TryFrom<EdgeList> for Graph {
    type Error = Error;

    fn try_from(list: EdgeList) -> Result<Self> {
        Graph::from_edges(list.n, &list.edges)
    }
}

impl Graph {
    fn empty(n: usize) -> Self {
        Self {
            adjacency: vec![BTreeSet::new(); n],
        }
    }

    fn add_edge(&mut self, i: usize, j: usize) {
        self.adjacency[i].insert(j);
        self.adjacency[j].insert(i);
    }

    /// Builds a graph from explicit edges; it must be connected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("graph needs at least one node".into()));
        }
        let mut g = Self::empty(n);
        for &(i, j) in edges {
            if i >= n || j >= n || i == j {
                return Err(Error::InvalidParameter(format!("invalid edge ({i}, {j}) for n = {n}")));
            }
            g.add_edge(i, j);
        }
        if !g.is_connected() {
            return Err(Error::InvalidParameter("graph is not connected".into()));
        }
        Ok(g)
    }

    /// A single isolated agent.
    pub fn singleton() -> Self {
        Self::empty(1)
    }

    pub fn ring(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParameter(format!("ring needs n >= 3, got {n}")));
        }
        let mut g = Self::empty(n);
        for i in 0..n {
            g.add_edge(i, (i + 1) % n);
        }
        Ok(g)
    }

    pub fn complete(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("complete graph needs n >= 2, got {n}")));
        }
        let mut g = Self::empty(n);
        for i in 0..n {
            for j in i + 1..n {
                g.add_edge(i, j);
            }
        }
        Ok(g)
    }

    /// Erdős–Rényi draws until one is connected; after the retry budget a
    /// random spanning tree is overlaid on the last draw.
    pub fn random_connected(n: usize, edge_prob: f64, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("random graph needs n >= 2, got {n}")));
        }
        if !(edge_prob > 0.0 && edge_prob <= 1.0) {
            return Err(Error::InvalidParameter(format!("edge_prob {edge_prob} not in (0, 1]")));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut g = Self::empty(n);
        for _ in 0..MAX_RESAMPLES {
            g = Self::empty(n);
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random_bool(edge_prob) {
                        g.add_edge(i, j);
                    }
                }
            }
            if g.is_connected() {
                return Ok(g);
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        for k in 1..n {
            let parent = order[rng.random_range(0..k)];
            g.add_edge(order[k], parent);
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, i: usize) -> Result<&BTreeSet<usize>> {
        self.adjacency.get(i).ok_or(Error::AgentOutOfRange(i))
    }

    pub fn degree(&self, i: usize) -> Result<usize> {
        self.neighbors(i).map(BTreeSet::len)
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(BTreeSet::len).collect()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, nb)| nb.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
            .collect()
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n();
        if n == 0 {
            return false;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == n
    }

    pub fn is_symmetric(&self) -> bool {
        self.adjacency
            .iter()
            .enumerate()
            .all(|(i, nb)| !nb.contains(&i) && nb.iter().all(|&j| self.adjacency[j].contains(&i)))
    }
}
