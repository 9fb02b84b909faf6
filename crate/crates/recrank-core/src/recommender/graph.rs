//! Symmetric-normalized user-item bipartite graph propagation.
//!
//! Nodes 0..n_users are users, n_users..n_users+n_items are items.
//! Edge (u, i) carries weight 1 / sqrt(deg(u) * deg(i)).

use super::mat::Mat;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct BipartiteGraph {
    pub n_users: usize,
    pub n_items: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl BipartiteGraph {
    /// Build from (user index, item index) pairs.
    pub fn new(n_users: usize, n_items: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut udeg = vec![0usize; n_users];
        let mut ideg = vec![0usize; n_items];
        for &(u, i) in pairs {
            udeg[u] += 1;
            ideg[i] += 1;
        }
        if udeg.iter().any(|&d| d == 0) || ideg.iter().any(|&d| d == 0) {
            return Err(Error::InvalidInput(
                "isolated node in interaction graph".into(),
            ));
        }
        let edges = pairs
            .iter()
            .map(|&(u, i)| (u, i, 1.0 / ((udeg[u] * ideg[i]) as f64).sqrt()))
            .collect();
        Ok(BipartiteGraph {
            n_users,
            n_items,
            edges,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_users + self.n_items
    }

    /// One round of A * x; A is symmetric so this is also the backward map.
    pub fn propagate(&self, x: &Mat) -> Mat {
        debug_assert_eq!(x.rows, self.n_nodes());
        let mut out = Mat::zeros(x.rows, x.cols);
        for &(u, i, w) in &self.edges {
            let item_node = self.n_users + i;
            for c in 0..x.cols {
                out.data[u * x.cols + c] += w * x.data[item_node * x.cols + c];
                out.data[item_node * x.cols + c] += w * x.data[u * x.cols + c];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge_hand_propagation() {
        // one user, one item, weight 1: propagation swaps the two rows
        let g = BipartiteGraph::new(1, 1, &[(0, 0)]).unwrap();
        let mut x = Mat::zeros(2, 2);
        x.row_mut(0).copy_from_slice(&[1.0, 2.0]); // e_u
        x.row_mut(1).copy_from_slice(&[3.0, 4.0]); // e_i
        let l1 = g.propagate(&x);
        assert_eq!(l1.row(0), &[3.0, 4.0]);
        assert_eq!(l1.row(1), &[1.0, 2.0]);
        let l2 = g.propagate(&l1);
        assert_eq!(l2.row(0), x.row(0));
        // mean of layers 0..2 from the hand calculation: ((2eu+ei)/3, (eu+2ei)/3)
        let mean0: Vec<f64> = (0..2)
            .map(|c| (x.row(0)[c] + l1.row(0)[c] + l2.row(0)[c]) / 3.0)
            .collect();
        assert_eq!(mean0, vec![(2.0 * 1.0 + 3.0) / 3.0, (2.0 * 2.0 + 4.0) / 3.0]);
    }

    #[test]
    fn propagation_is_linear() {
        let g = BipartiteGraph::new(2, 3, &[(0, 0), (0, 1), (1, 1), (1, 2)]).unwrap();
        let mut x = Mat::zeros(5, 3);
        for (i, v) in x.data.iter_mut().enumerate() {
            *v = (i as f64 * 0.37).sin();
        }
        let mut ax = g.propagate(&x);
        ax.scale(2.5);
        let mut x2 = x.clone();
        x2.scale(2.5);
        let a2x = g.propagate(&x2);
        for (a, b) in ax.data.iter().zip(&a2x.data) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn isolated_node_rejected() {
        assert!(BipartiteGraph::new(2, 1, &[(0, 0)]).is_err());
    }
}
