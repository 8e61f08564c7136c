use std::collections::HashSet;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A directed acyclic graph over `d` nodes, edges stored as ordered
/// parent→child pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    d: usize,
    edges: Vec<(usize, usize)>,
    node_labels: Option<Vec<String>>,
}

impl Dag {
    /// Builds a DAG, validating endpoints, self-loops, duplicates and
    /// acyclicity.
    pub fn new(d: usize, mut edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = HashSet::new();
        for &(p, c) in &edges {
            if p >= d || c >= d {
                return Err(Error::Dimension(format!(
                    "edge ({p},{c}) out of range for {d} nodes"
                )));
            }
            if p == c {
                return Err(Error::Cyclic(format!("self-loop at node {p}")));
            }
            if !seen.insert((p, c)) {
                return Err(Error::Precondition(format!("duplicate edge ({p},{c})")));
            }
        }
        edges.sort_unstable();
        let dag = Dag {
            d,
            edges,
            node_labels: None,
        };
        if dag.topological_order().is_none() {
            return Err(Error::Cyclic("edge set contains a cycle".into()));
        }
        Ok(dag)
    }

    /// The empty graph on `d` nodes.
    pub fn empty(d: usize) -> Self {
        Dag {
            d,
            edges: Vec::new(),
            node_labels: None,
        }
    }

    /// The complete DAG consistent with the node order 0 < 1 < … < d−1.
    pub fn complete(d: usize) -> Self {
        let mut edges = Vec::new();
        for p in 0..d {
            for c in (p + 1)..d {
                edges.push((p, c));
            }
        }
        Dag {
            d,
            edges,
            node_labels: None,
        }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.d {
            return Err(Error::Dimension(format!(
                "{} labels for {} nodes",
                labels.len(),
                self.d
            )));
        }
        self.node_labels = Some(labels);
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.d
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, parent: usize, child: usize) -> bool {
        self.edges.binary_search(&(parent, child)).is_ok()
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.node_labels.as_deref()
    }

    pub fn label_of(&self, node: usize) -> String {
        match &self.node_labels {
            Some(l) => l[node].clone(),
            None => node.to_string(),
        }
    }

    /// Node index for a label; numeric strings fall back to 0-based indices
    /// when no labels are set.
    pub fn node_by_label(&self, label: &str) -> Option<usize> {
        match &self.node_labels {
            Some(l) => l.iter().position(|x| x == label),
            None => label.parse::<usize>().ok().filter(|&i| i < self.d),
        }
    }

    pub fn parents(&self, node: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|&&(_, c)| c == node)
            .map(|&(p, _)| p)
            .collect()
    }

    pub fn children(&self, node: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|&&(p, _)| p == node)
            .map(|&(_, c)| c)
            .collect()
    }

    /// Kahn topological order; `None` if a cycle exists.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        topological_order(self.d, &self.edges)
    }

    /// A copy with one edge removed.
    pub fn without_edge(&self, parent: usize, child: usize) -> Result<Self> {
        if !self.has_edge(parent, child) {
            return Err(Error::Precondition(format!(
                "edge ({parent},{child}) not in graph"
            )));
        }
        let edges = self
            .edges
            .iter()
            .copied()
            .filter(|&e| e != (parent, child))
            .collect();
        Ok(Dag {
            d: self.d,
            edges,
            node_labels: self.node_labels.clone(),
        })
    }

    /// True when `other`'s edges are a subset of this graph's edges.
    pub fn contains(&self, other: &Dag) -> bool {
        self.d == other.d && other.edges.iter().all(|&(p, c)| self.has_edge(p, c))
    }
}

fn topological_order(d: usize, edges: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut indeg = vec![0usize; d];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); d];
    for &(p, c) in edges {
        indeg[c] += 1;
        out[p].push(c);
    }
    let mut queue: Vec<usize> = (0..d).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(d);
    while let Some(n) = queue.pop() {
        order.push(n);
        for &c in &out[n] {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                queue.push(c);
            }
        }
    }
    if order.len() == d {
        Some(order)
    } else {
        None
    }
}

/// Whether the support of a weight matrix (entries with |w| > tol) admits a
/// topological order.
pub fn is_dag(b: &DMatrix<f64>, tol: f64) -> Result<bool> {
    if b.nrows() != b.ncols() {
        return Err(Error::Dimension(format!(
            "weight matrix is {}x{}",
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(topological_order(b.nrows(), &support_edges(b, tol)).is_some())
}

/// Edges of the support of a weight matrix: (i,j) with |b[i][j]| > tol.
pub fn support_edges(b: &DMatrix<f64>, tol: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..b.nrows() {
        for j in 0..b.ncols() {
            if i != j && b[(i, j)].abs() > tol {
                edges.push((i, j));
            }
        }
    }
    edges
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_matrix_is_dag() {
        let b = DMatrix::zeros(3, 3);
        assert!(is_dag(&b, 0.0).unwrap());
    }

    #[test]
    fn two_cycle_is_not_dag() {
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(!is_dag(&b, 0.0).unwrap());
    }

    #[test]
    fn scm_one_matrix_is_dag() {
        let b = DMatrix::from_row_slice(3, 3, &[0.0, -0.9, -0.8, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(is_dag(&b, 0.0).unwrap());
    }

    #[test]
    fn non_square_errors() {
        let b = DMatrix::zeros(2, 3);
        assert!(matches!(is_dag(&b, 0.0), Err(Error::Dimension(_))));
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(Dag::new(3, vec![(0, 3)]).is_err());
        assert!(Dag::new(3, vec![(1, 1)]).is_err());
        assert!(Dag::new(3, vec![(0, 1), (0, 1)]).is_err());
        assert!(Dag::new(3, vec![(0, 1), (1, 2), (2, 0)]).is_err());
    }

    #[test]
    fn parents_and_order() {
        let g = Dag::new(3, vec![(0, 1), (0, 2)]).unwrap();
        assert_eq!(g.parents(1), vec![0]);
        assert_eq!(g.parents(0), Vec::<usize>::new());
        let order = g.topological_order().unwrap();
        let pos = |n: usize| order.iter().position(|&x| x == n).unwrap();
        assert!(pos(0) < pos(1) && pos(0) < pos(2));
    }

    #[test]
    fn labels_resolve() {
        let g = Dag::new(2, vec![(0, 1)])
            .unwrap()
            .with_labels(vec!["a".into(), "b".into()])
            .unwrap();
        assert_eq!(g.node_by_label("b"), Some(1));
        assert_eq!(g.node_by_label("c"), None);
    }
}
