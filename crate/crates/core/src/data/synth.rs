use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::GraphDataset;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphKind {
    /// Directed N-cycle, `i → i+1 mod N`.
    Cycle,
    /// Two communities with asymmetric inter-block edge rates.
    TwoBlock,
    /// Random strictly upper-triangular adjacency.
    RandomDag,
}

impl FromStr for GraphKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "cycle" => Ok(Self::Cycle),
            "two_block" => Ok(Self::TwoBlock),
            "random_dag" | "dag" => Ok(Self::RandomDag),
            other => Err(Error::Config(format!("unknown graph kind '{other}'"))),
        }
    }
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Cycle => "cycle",
            Self::TwoBlock => "two_block",
            Self::RandomDag => "random_dag",
        })
    }
}

const DAG_EDGE_PROB: f64 = 0.2;

fn graph(name: String, adjacency: DenseMatrix, labels: Option<Vec<Option<usize>>>, names: Vec<String>) -> GraphDataset {
    let n = adjacency.rows();
    GraphDataset {
        name,
        adjacency,
        labels,
        label_names: names,
        node_ids: (0..n).map(|i| i.to_string()).collect(),
    }
}

/// Two blocks of sizes ⌈N/2⌉ and ⌊N/2⌋. Edges appear with probability
/// `p_in` inside a block, `p_ab` from the first block to the second and
/// `p_ba` back. Nodes are labeled by block.
pub fn synth_two_block(n: usize, p_in: f64, p_ab: f64, p_ba: f64, seed: u64) -> Result<GraphDataset> {
    if n < 3 {
        return Err(Error::Config(format!("synthetic graphs need at least 3 nodes, got {n}")));
    }
    for p in [p_in, p_ab, p_ba] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!("edge probability {p} outside [0, 1]")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = n.div_ceil(2);
    let block = |i: usize| usize::from(i >= half);
    let mut a = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let p = match (block(i), block(j)) {
                (0, 1) => p_ab,
                (1, 0) => p_ba,
                _ => p_in,
            };
            if rng.gen::<f64>() < p {
                a[(i, j)] = 1.0;
            }
        }
    }
    let labels = (0..n).map(|i| Some(block(i))).collect();
    Ok(graph(
        format!("two_block_{n}_{seed}"),
        a,
        Some(labels),
        vec!["A".into(), "B".into()],
    ))
}

/// Synthetic directed graphs for tests and benchmarks. `TwoBlock` uses
/// `p_in = 0.5`, `p_ab = 0.3`, `p_ba = 0.05`; `RandomDag` keeps each
/// upper-triangular edge with probability 0.2.
pub fn synth_directed_graph(kind: GraphKind, n: usize, seed: u64) -> Result<GraphDataset> {
    if n < 3 {
        return Err(Error::Config(format!("synthetic graphs need at least 3 nodes, got {n}")));
    }
    match kind {
        GraphKind::Cycle => {
            let a = DenseMatrix::from_fn(n, n, |i, j| if j == (i + 1) % n { 1.0 } else { 0.0 });
            Ok(graph(format!("cycle_{n}"), a, None, Vec::new()))
        }
        GraphKind::TwoBlock => synth_two_block(n, 0.5, 0.3, 0.05, seed),
        GraphKind::RandomDag => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut a = DenseMatrix::zeros(n, n);
            for i in 0..n {
                for j in i + 1..n {
                    if rng.gen::<f64>() < DAG_EDGE_PROB {
                        a[(i, j)] = 1.0;
                    }
                }
            }
            Ok(graph(format!("random_dag_{n}_{seed}"), a, None, Vec::new()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{svd_exact, RANK_TOL};

    #[test]
    fn cycle_is_a_permutation() {
        let g = synth_directed_graph(GraphKind::Cycle, 4, 0).unwrap();
        assert_eq!(g.adjacency[(3, 0)], 1.0);
        assert_eq!(g.edge_count(), 4);
        let s = svd_exact(&g.adjacency, RANK_TOL).unwrap().s;
        assert_eq!(s.len(), 4);
        assert!(s.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn dag_is_strictly_upper() {
        let g = synth_directed_graph(GraphKind::RandomDag, 30, 3).unwrap();
        let a = &g.adjacency;
        let mut asym = 0.0;
        for i in 0..30 {
            for j in 0..30 {
                if j <= i {
                    assert_eq!(a[(i, j)], 0.0);
                }
                asym += (a[(i, j)] - a[(j, i)]).abs();
            }
        }
        assert_eq!(asym, 2.0 * g.edge_count() as f64);
    }

    #[test]
    fn two_block_asymmetry() {
        let g = synth_two_block(100, 0.5, 0.3, 0.05, 11).unwrap();
        let a = &g.adjacency;
        let (mut ab, mut ba) = (0.0, 0.0);
        for i in 0..50 {
            for j in 50..100 {
                ab += a[(i, j)];
                ba += a[(j, i)];
            }
        }
        assert!((ab - ba) / 2500.0 > 0.15);
        assert_eq!(g, synth_two_block(100, 0.5, 0.3, 0.05, 11).unwrap());
    }
}
