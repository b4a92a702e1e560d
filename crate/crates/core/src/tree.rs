//! Random spanning trees and spanning-tree counts on induced subgraphs.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeMask};

/// Rooted spanning tree of the subgraph induced by a node subset.
///
/// Parent pointers are indexed by graph node; nodes outside the subset have
/// no parent and are not listed in `nodes`.
#[derive(Debug, Clone)]
pub struct SpanningTree {
    root: usize,
    parent: Vec<usize>,
    nodes: Vec<usize>,
}

const NO_PARENT: usize = usize::MAX;

impl SpanningTree {
    pub fn root(&self) -> usize {
        self.root
    }

    /// Subset nodes in ascending order.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// Parent of `node`, or `None` for the root.
    pub fn parent(&self, node: usize) -> Option<usize> {
        match self.parent[node] {
            NO_PARENT => None,
            p => Some(p),
        }
    }

    /// Tree edges as `(child, parent)` pairs; exactly `nodes.len() - 1`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.nodes
            .iter()
            .filter(|&&u| u != self.root)
            .map(|&u| (u, self.parent[u]))
            .collect()
    }

    /// Nodes ordered root-first so that every parent precedes its children.
    pub fn top_down_order(&self) -> Vec<usize> {
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); self.parent.len()];
        for &u in &self.nodes {
            if u != self.root {
                children[self.parent[u]].push(u);
            }
        }
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(u) = stack.pop() {
            order.push(u);
            stack.extend_from_slice(&children[u]);
        }
        order
    }

    /// The side of the cut containing `node` when its parent edge is removed,
    /// i.e. the subtree rooted at `node`.
    pub fn subtree_mask(&self, node: usize) -> NodeMask {
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); self.parent.len()];
        for &u in &self.nodes {
            if u != self.root {
                children[self.parent[u]].push(u);
            }
        }
        let mut mask = NodeMask::empty(self.parent.len());
        let mut stack = vec![node];
        while let Some(u) = stack.pop() {
            mask.set(u, true);
            stack.extend_from_slice(&children[u]);
        }
        mask
    }

    /// Validates the tree invariants against its graph: edge count, edge
    /// membership, connectivity over the subset.
    pub fn check(&self, graph: &Graph, subset: &NodeMask) -> Result<()> {
        if self.nodes.len() != subset.count() {
            return Err(Error::Shape("tree nodes disagree with subset".into()));
        }
        let mut edge_count = 0;
        for &u in &self.nodes {
            if u == self.root {
                continue;
            }
            let p = self.parent[u];
            if !graph.neighbors(u).contains(&p) {
                return Err(Error::Shape(format!("tree edge ({u}, {p}) not in graph")));
            }
            edge_count += 1;
        }
        if edge_count + 1 != self.nodes.len() {
            return Err(Error::Shape("tree edge count != |subset| - 1".into()));
        }
        if self.top_down_order().len() != self.nodes.len() {
            return Err(Error::Shape("tree is not connected".into()));
        }
        Ok(())
    }
}

/// Draws a uniformly random spanning tree of the subgraph induced by
/// `subset`, using Wilson's loop-erased random walk algorithm.
///
/// Walks start from each unvisited subset node, stepping to a uniformly
/// random in-subset neighbor; the loop-erased path is grafted onto the
/// growing tree. The resulting tree is exactly uniform over all spanning
/// trees of the induced subgraph.
///
/// Reference: Wilson, "Generating random spanning trees more quickly than
/// the cover time", STOC 1996.
pub fn random_spanning_tree<R: Rng + ?Sized>(
    graph: &Graph,
    subset: &NodeMask,
    rng: &mut R,
) -> Result<SpanningTree> {
    if !graph.connected_within(subset) {
        return Err(Error::NotConnected(Some("spanning tree subset".into())));
    }
    let n_full = graph.node_count();
    let nodes: Vec<usize> = subset.iter().collect();
    let root = nodes[rng.gen_range(0..nodes.len())];

    let mut in_tree = vec![false; n_full];
    let mut next = vec![NO_PARENT; n_full];
    in_tree[root] = true;

    let mut scratch: Vec<usize> = Vec::new();
    for &start in &nodes {
        let mut u = start;
        while !in_tree[u] {
            scratch.clear();
            scratch.extend(graph.neighbors(u).iter().copied().filter(|&v| subset.contains(v)));
            let v = scratch[rng.gen_range(0..scratch.len())];
            next[u] = v;
            u = v;
        }
        u = start;
        while !in_tree[u] {
            in_tree[u] = true;
            u = next[u];
        }
    }
    // Loop erasure leaves stale pointers on nodes whose walks were
    // overwritten later; only pointers on in-tree nodes are part of the tree,
    // and all subset nodes are in-tree here.
    next[root] = NO_PARENT;
    Ok(SpanningTree { root, parent: next, nodes })
}

/// Log of the number of spanning trees of the subgraph induced by `subset`,
/// via the matrix-tree theorem: the determinant of the reduced Laplacian,
/// evaluated through a Cholesky factorization so large counts stay in the
/// log domain.
pub fn log_spanning_tree_count(graph: &Graph, subset: &NodeMask) -> Result<f64> {
    if !graph.connected_within(subset) {
        return Err(Error::NotConnected(Some("spanning tree count subset".into())));
    }
    let nodes: Vec<usize> = subset.iter().collect();
    let n = nodes.len();
    if n <= 1 {
        return Ok(0.0); // single node: one (empty) tree
    }
    let m = n - 1; // drop the last subset node
    let mut index = vec![usize::MAX; graph.node_count()];
    for (i, &u) in nodes.iter().enumerate() {
        index[u] = i;
    }
    // Reduced Laplacian, row-major.
    let mut a = vec![0.0f64; m * m];
    for (i, &u) in nodes.iter().enumerate().take(m) {
        let mut deg = 0.0;
        for &v in graph.neighbors(u) {
            if !subset.contains(v) {
                continue;
            }
            deg += 1.0;
            let j = index[v];
            if j < m {
                a[i * m + j] -= 1.0;
            }
        }
        a[i * m + i] = deg;
    }
    // In-place Cholesky; the reduced Laplacian of a connected graph is
    // symmetric positive definite.
    let mut log_det = 0.0;
    for j in 0..m {
        let mut d = a[j * m + j];
        for k in 0..j {
            d -= a[j * m + k] * a[j * m + k];
        }
        if d <= 0.0 {
            return Err(Error::Domain(
                "reduced Laplacian lost positive definiteness".into(),
            ));
        }
        let l_jj = d.sqrt();
        log_det += 2.0 * l_jj.ln();
        a[j * m + j] = l_jj;
        for i in (j + 1)..m {
            let mut s = a[i * m + j];
            for k in 0..j {
                s -= a[i * m + k] * a[j * m + k];
            }
            a[i * m + j] = s / l_jj;
        }
    }
    Ok(log_det)
}
