//! Precinct adjacency graphs, district plans, and the tally/contiguity
//! primitives everything else is built on.
//!
//! Graphs and plans are immutable after construction and safe to share
//! across worker threads. Node subsets are dense boolean masks over the
//! full node range; induced-subgraph operations filter through the mask
//! instead of copying edge lists.

use crate::error::{Error, Result};

/// Undirected adjacency graph over `0..node_count`.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a validated graph from an edge list.
    ///
    /// Edges are normalized to `(min, max)` and sorted. Self-loops,
    /// duplicate edges (in either orientation), and out-of-range indices
    /// are rejected.
    pub fn new(node_count: usize, edge_list: &[(usize, usize)]) -> Result<Graph> {
        let mut edges = Vec::with_capacity(edge_list.len());
        for &(a, b) in edge_list {
            if a >= node_count {
                return Err(Error::BadIndex { index: a, node_count });
            }
            if b >= node_count {
                return Err(Error::BadIndex { index: b, node_count });
            }
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            edges.push((a.min(b), a.max(b)));
        }
        edges.sort_unstable();
        for w in edges.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DuplicateEdge(w[0].0, w[0].1));
            }
        }
        let mut neighbors = vec![Vec::new(); node_count];
        for &(a, b) in &edges {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for n in &mut neighbors {
            n.sort_unstable();
        }
        Ok(Graph { node_count, edges, neighbors })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Normalized `(min, max)` edge pairs in sorted order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.neighbors[node].len()
    }

    /// True when the whole graph is one connected component.
    pub fn is_connected(&self) -> bool {
        if self.node_count == 0 {
            return false;
        }
        self.connected_within(&NodeMask::full(self.node_count))
    }

    /// True when the subgraph induced by `mask` is connected.
    /// An empty mask is not connected; a singleton is.
    pub fn connected_within(&self, mask: &NodeMask) -> bool {
        let start = match mask.iter().next() {
            Some(s) => s,
            None => return false,
        };
        let mut seen = vec![false; self.node_count];
        let mut stack = vec![start];
        seen[start] = true;
        let mut reached = 1;
        while let Some(u) = stack.pop() {
            for &v in self.neighbors(u) {
                if mask.contains(v) && !seen[v] {
                    seen[v] = true;
                    reached += 1;
                    stack.push(v);
                }
            }
        }
        reached == mask.count()
    }

    /// Number of graph edges with one endpoint in `a` and the other in `b`.
    pub fn edges_between(&self, a: &NodeMask, b: &NodeMask) -> usize {
        let mut count = 0;
        for u in a.iter() {
            for &v in self.neighbors(u) {
                if b.contains(v) {
                    count += 1;
                }
            }
        }
        count
    }
}

/// Dense boolean mask over the nodes of a graph, with a cached popcount.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeMask {
    bits: Vec<bool>,
    count: usize,
}

impl NodeMask {
    pub fn empty(universe: usize) -> NodeMask {
        NodeMask { bits: vec![false; universe], count: 0 }
    }

    pub fn full(universe: usize) -> NodeMask {
        NodeMask { bits: vec![true; universe], count: universe }
    }

    pub fn from_indices(universe: usize, indices: &[usize]) -> NodeMask {
        let mut m = NodeMask::empty(universe);
        for &i in indices {
            m.set(i, true);
        }
        m
    }

    pub fn set(&mut self, index: usize, value: bool) {
        if self.bits[index] != value {
            self.bits[index] = value;
            if value {
                self.count += 1;
            } else {
                self.count -= 1;
            }
        }
    }

    #[inline]
    pub fn contains(&self, index: usize) -> bool {
        self.bits[index]
    }

    /// Number of set nodes.
    pub fn count(&self) -> usize {
        self.count
    }

    /// Size of the underlying node range.
    pub fn universe(&self) -> usize {
        self.bits.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    /// Nodes of `self` minus the nodes of `other`.
    pub fn difference(&self, other: &NodeMask) -> NodeMask {
        let mut out = NodeMask::empty(self.bits.len());
        for i in self.iter() {
            if !other.contains(i) {
                out.set(i, true);
            }
        }
        out
    }
}

/// Assignment of every node to a district label in `1..=ndists`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plan {
    assignment: Vec<u16>,
    ndists: u16,
}

impl Plan {
    /// Validates that every label is in `1..=ndists` and every district is
    /// nonempty.
    pub fn new(assignment: Vec<u16>, ndists: u16) -> Result<Plan> {
        if ndists == 0 {
            return Err(Error::Domain("ndists must be at least 1".into()));
        }
        let mut used = vec![false; ndists as usize];
        for (i, &d) in assignment.iter().enumerate() {
            if d == 0 || d > ndists {
                return Err(Error::Domain(format!(
                    "label {d} at node {i} outside 1..={ndists}"
                )));
            }
            used[d as usize - 1] = true;
        }
        if let Some(missing) = used.iter().position(|&u| !u) {
            return Err(Error::Domain(format!("district {} is empty", missing + 1)));
        }
        Ok(Plan { assignment, ndists })
    }

    pub fn assignment(&self) -> &[u16] {
        &self.assignment
    }

    pub fn ndists(&self) -> u16 {
        self.ndists
    }

    pub fn node_count(&self) -> usize {
        self.assignment.len()
    }

    /// Mask of the nodes assigned to district `d` (1-based).
    pub fn district_mask(&self, d: u16) -> NodeMask {
        let mut m = NodeMask::empty(self.assignment.len());
        for (i, &label) in self.assignment.iter().enumerate() {
            if label == d {
                m.set(i, true);
            }
        }
        m
    }

    /// Applies a label permutation: district `d` becomes `perm[d-1]`.
    pub fn relabeled(&self, perm: &[u16]) -> Result<Plan> {
        if perm.len() != self.ndists as usize {
            return Err(Error::Shape(format!(
                "permutation length {} != ndists {}",
                perm.len(),
                self.ndists
            )));
        }
        let mut seen = vec![false; perm.len()];
        for &p in perm {
            if p == 0 || p > self.ndists || seen[p as usize - 1] {
                return Err(Error::Domain("not a permutation of 1..=ndists".into()));
            }
            seen[p as usize - 1] = true;
        }
        let assignment = self.assignment.iter().map(|&d| perm[d as usize - 1]).collect();
        Plan::new(assignment, self.ndists)
    }
}

/// True iff every district of `plan` induces a connected subgraph of `graph`.
pub fn is_contiguous(graph: &Graph, plan: &Plan) -> Result<bool> {
    if plan.node_count() != graph.node_count() {
        return Err(Error::Shape(format!(
            "plan length {} != graph node count {}",
            plan.node_count(),
            graph.node_count()
        )));
    }
    // One BFS pass per district seed instead of a mask per district: flood
    // each district from its first node and count what was reached.
    let n = graph.node_count();
    let mut seen = vec![false; n];
    let mut district_size = vec![0usize; plan.ndists() as usize + 1];
    let mut first_node = vec![usize::MAX; plan.ndists() as usize + 1];
    for (i, &d) in plan.assignment().iter().enumerate() {
        district_size[d as usize] += 1;
        if first_node[d as usize] == usize::MAX {
            first_node[d as usize] = i;
        }
    }
    let mut stack = Vec::new();
    for d in 1..=plan.ndists() as usize {
        let start = first_node[d];
        stack.clear();
        stack.push(start);
        seen[start] = true;
        let mut reached = 1;
        while let Some(u) = stack.pop() {
            for &v in graph.neighbors(u) {
                if !seen[v] && plan.assignment()[v] as usize == d {
                    seen[v] = true;
                    reached += 1;
                    stack.push(v);
                }
            }
        }
        if reached != district_size[d] {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Sums `weights` into per-district totals. Output length is `ndists` and
/// the grand total is preserved.
pub fn tally(plan: &Plan, weights: &[f64]) -> Result<Vec<f64>> {
    if weights.len() != plan.node_count() {
        return Err(Error::Shape(format!(
            "weight vector length {} != plan length {}",
            weights.len(),
            plan.node_count()
        )));
    }
    let mut out = vec![0.0; plan.ndists() as usize];
    for (&d, &w) in plan.assignment().iter().zip(weights) {
        out[d as usize - 1] += w;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_graph_degrees() {
        let g = Graph::new(3, &[(0, 1), (1, 2)]).unwrap();
        let degs: Vec<usize> = (0..3).map(|i| g.degree(i)).collect();
        assert_eq!(degs, vec![1, 2, 1]);
    }

    #[test]
    fn cycle_degrees() {
        let g = Graph::new(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        assert!((0..4).all(|i| g.degree(i) == 2));
    }

    #[test]
    fn self_loop_rejected() {
        match Graph::new(3, &[(0, 1), (2, 2)]) {
            Err(Error::SelfLoop(2)) => {}
            other => panic!("expected SelfLoop, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_edge_rejected() {
        match Graph::new(3, &[(0, 1), (1, 0)]) {
            Err(Error::DuplicateEdge(0, 1)) => {}
            other => panic!("expected DuplicateEdge, got {other:?}"),
        }
    }

    #[test]
    fn bad_index_rejected() {
        assert!(matches!(
            Graph::new(2, &[(0, 5)]),
            Err(Error::BadIndex { index: 5, node_count: 2 })
        ));
    }

    #[test]
    fn contiguity_on_path() {
        let g = Graph::new(3, &[(0, 1), (1, 2)]).unwrap();
        let split = Plan::new(vec![1, 2, 1], 2).unwrap();
        assert!(!is_contiguous(&g, &split).unwrap());
        let ok = Plan::new(vec![1, 1, 2], 2).unwrap();
        assert!(is_contiguous(&g, &ok).unwrap());
    }

    #[test]
    fn contiguity_on_cycle() {
        let g = Graph::new(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let p = Plan::new(vec![1, 1, 2, 2], 2).unwrap();
        assert!(is_contiguous(&g, &p).unwrap());
    }

    #[test]
    fn contiguity_shape_error() {
        let g = Graph::new(3, &[(0, 1), (1, 2)]).unwrap();
        let p = Plan::new(vec![1, 2], 2).unwrap();
        assert!(matches!(is_contiguous(&g, &p), Err(Error::Shape(_))));
    }

    #[test]
    fn tally_examples() {
        let p = Plan::new(vec![1, 1, 2], 2).unwrap();
        assert_eq!(tally(&p, &[1.0, 2.0, 3.0]).unwrap(), vec![3.0, 3.0]);
        assert_eq!(tally(&p, &[0.0, 0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let q = Plan::new(vec![1, 2, 1, 2], 2).unwrap();
        assert_eq!(tally(&q, &[5.0, 5.0, 5.0, 5.0]).unwrap(), vec![10.0, 10.0]);
    }

    #[test]
    fn plan_label_validation() {
        assert!(Plan::new(vec![1, 3], 2).is_err()); // label out of range
        assert!(Plan::new(vec![1, 1], 2).is_err()); // district 2 empty
        assert!(Plan::new(vec![1, 2], 2).is_ok());
    }

    #[test]
    fn relabel_preserves_tallies_as_multiset() {
        let p = Plan::new(vec![1, 1, 2, 3], 3).unwrap();
        let w = [1.0, 2.0, 4.0, 8.0];
        let mut before = tally(&p, &w).unwrap();
        let q = p.relabeled(&[3, 1, 2]).unwrap();
        let mut after = tally(&q, &w).unwrap();
        before.sort_by(f64::total_cmp);
        after.sort_by(f64::total_cmp);
        assert_eq!(before, after);
    }

    #[test]
    fn mask_difference_and_iter() {
        let a = NodeMask::from_indices(5, &[0, 1, 3]);
        let b = NodeMask::from_indices(5, &[1, 4]);
        let d = a.difference(&b);
        assert_eq!(d.iter().collect::<Vec<_>>(), vec![0, 3]);
        assert_eq!(d.count(), 2);
    }

    #[test]
    fn edges_between_masks() {
        let g = Graph::new(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let a = NodeMask::from_indices(4, &[0, 1]);
        let b = NodeMask::from_indices(4, &[2, 3]);
        assert_eq!(g.edges_between(&a, &b), 2);
    }
}
