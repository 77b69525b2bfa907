//! Sensor-network topology and the weight matrices used by fusion.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("edge ({0}, {1}) references a node outside 0..{2}")]
    IndexOutOfRange(usize, usize, usize),
    #[error("self-loop on node {0} is not allowed")]
    SelfLoop(usize),
    #[error("graph is disconnected: nodes {unreachable:?} are not reachable from node 0")]
    Disconnected { unreachable: Vec<usize> },
    #[error("graph needs at least one node")]
    Empty,
    #[error("unknown topology preset {0:?}")]
    UnknownPreset(String),
}

/// Connected undirected graph without self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n_nodes: usize,
    adjacency: Vec<Vec<bool>>,
}

impl Graph {
    /// Build from an undirected edge list; duplicates are harmless.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut adjacency = vec![vec![false; n]; n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(GraphError::IndexOutOfRange(a, b, n));
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            adjacency[a][b] = true;
            adjacency[b][a] = true;
        }
        let g = Self { n_nodes: n, adjacency };
        let unreachable = g.unreachable_from_first();
        if !unreachable.is_empty() {
            return Err(GraphError::Disconnected { unreachable });
        }
        Ok(g)
    }

    pub fn ring(n: usize) -> Result<Self, GraphError> {
        let edges: Vec<_> = match n {
            0 | 1 => vec![],
            2 => vec![(0, 1)],
            _ => (0..n).map(|i| (i, (i + 1) % n)).collect(),
        };
        Self::new(n, &edges)
    }

    /// Node 0 is the hub.
    pub fn star(n: usize) -> Result<Self, GraphError> {
        let edges: Vec<_> = (1..n).map(|i| (0, i)).collect();
        Self::new(n, &edges)
    }

    pub fn path(n: usize) -> Result<Self, GraphError> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::new(n, &edges)
    }

    pub fn complete(n: usize) -> Result<Self, GraphError> {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                edges.push((i, j));
            }
        }
        Self::new(n, &edges)
    }

    /// Named presets: `ring4`, `ringN`, `starN`, `pathN`, `completeN`.
    pub fn preset(name: &str) -> Result<Self, GraphError> {
        let split = name.find(|c: char| c.is_ascii_digit());
        let (kind, count) = match split {
            Some(pos) => (&name[..pos], name[pos..].parse::<usize>().ok()),
            None => (name, None),
        };
        let n = count.ok_or_else(|| GraphError::UnknownPreset(name.to_string()))?;
        match kind {
            "ring" => Self::ring(n),
            "star" => Self::star(n),
            "path" => Self::path(n),
            "complete" => Self::complete(n),
            _ => Err(GraphError::UnknownPreset(name.to_string())),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        self.adjacency[i][j]
    }

    /// Sorted neighbor indices of `i`, excluding `i`.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n_nodes).filter(|&j| self.adjacency[i][j]).collect()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].iter().filter(|&&a| a).count()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n_nodes).map(|i| self.degree(i)).max().unwrap_or(0)
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n_nodes {
            for j in (i + 1)..self.n_nodes {
                if self.adjacency[i][j] {
                    out.push((i, j));
                }
            }
        }
        out
    }

    fn unreachable_from_first(&self) -> Vec<usize> {
        let mut seen = vec![false; self.n_nodes];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..self.n_nodes {
                if self.adjacency[i][j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        (0..self.n_nodes).filter(|&i| !seen[i]).collect()
    }
}

/// Free-standing form of [`Graph::neighbors`].
pub fn neighbors(g: &Graph, i: usize) -> Vec<usize> {
    g.neighbors(i)
}

/// Nonnegative weight matrix with unit row sums, zero off the graph pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    rows: Vec<Vec<f64>>,
}

/// Row-stochastic diffusion weights `C`.
pub type DiffusionWeights = WeightMatrix;

impl WeightMatrix {
    /// Wrap explicit rows; each row must be nonnegative and sum to one.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, String> {
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(format!("row {i} has {} entries, expected {n}", row.len()));
            }
            if row.iter().any(|&w| !(w >= 0.0)) {
                return Err(format!("row {i} has a negative or NaN weight"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(format!("row {i} sums to {sum}, not 1"));
            }
        }
        Ok(Self { rows })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: (0..n)
                .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }
}

/// `c_ij = 1 / (1 + Delta)` for neighbors, where `Delta` is the maximum node
/// degree; the self weight takes the remainder of the row.
pub fn diffusion_weights(g: &Graph) -> DiffusionWeights {
    let n = g.n_nodes();
    let c = 1.0 / (1.0 + g.max_degree() as f64);
    let rows = (0..n)
        .map(|i| {
            let mut row = vec![0.0; n];
            for j in g.neighbors(i) {
                row[j] = c;
            }
            row[i] = 1.0 - g.degree(i) as f64 * c;
            row
        })
        .collect();
    WeightMatrix { rows }
}

/// Metropolis weights `w_ij = 1 / (1 + max(d_i, d_j))`, doubly stochastic on
/// undirected graphs; used by the consensus baselines.
pub fn metropolis_weights(g: &Graph) -> WeightMatrix {
    let n = g.n_nodes();
    let rows = (0..n)
        .map(|i| {
            let mut row = vec![0.0; n];
            let mut off = 0.0;
            for j in g.neighbors(i) {
                let w = 1.0 / (1.0 + g.degree(i).max(g.degree(j)) as f64);
                row[j] = w;
                off += w;
            }
            row[i] = 1.0 - off;
            row
        })
        .collect();
    WeightMatrix { rows }
}

/// Topology as it appears in configuration: a preset name or an explicit edge list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TopologySpec {
    Preset(String),
    Edges { edges: Vec<(usize, usize)> },
}

impl Default for TopologySpec {
    fn default() -> Self {
        TopologySpec::Preset("ring4".to_string())
    }
}

impl TopologySpec {
    pub fn build(&self, n_nodes: usize) -> Result<Graph, GraphError> {
        match self {
            TopologySpec::Preset(name) => Graph::preset(name),
            TopologySpec::Edges { edges } => Graph::new(n_nodes, edges),
        }
    }
}
