//! Synthetic grid instances for tests, benchmarks, and examples.
//!
//! Grids get unit-square geometry, horizontal county bands, a deterministic
//! east-west partisan gradient with hash jitter, and a demographic gradient
//! by row. Everything is closed-form, so instances are identical across
//! runs and platforms.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::graph::{Graph, Plan};
use crate::ingest::{MapParams, PrecinctRecord, RedistMap, VAP_SUBGROUPS};

/// Rook-adjacency edges of a `rows x cols` grid, node index `r * cols + c`.
pub fn grid_edges(rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if c + 1 < cols {
                edges.push((i, i + 1));
            }
            if r + 1 < rows {
                edges.push((i, i + cols));
            }
        }
    }
    edges
}

pub fn grid_graph(rows: usize, cols: usize) -> Graph {
    Graph::new(rows * cols, &grid_edges(rows, cols)).expect("grid edges are valid")
}

/// Balanced column-band plan: district labels increase west to east.
pub fn column_plan(rows: usize, cols: usize, ndists: u16) -> Plan {
    let assignment = (0..rows * cols)
        .map(|i| {
            let c = i % cols;
            (c * ndists as usize / cols) as u16 + 1
        })
        .collect();
    Plan::new(assignment, ndists).expect("column plan is valid")
}

fn jitter(i: usize, salt: u64) -> f64 {
    let h = (i as u64)
        .wrapping_mul(0x9e3779b97f4a7c15)
        .wrapping_add(salt)
        .rotate_left(17)
        .wrapping_mul(0xbf58476d1ce4e5b9);
    ((h >> 32) % 21) as f64 - 10.0
}

/// Builder for synthetic grid maps.
#[derive(Debug, Clone)]
pub struct GridMapBuilder {
    rows: usize,
    cols: usize,
    ndists: u16,
    pop_tol: f64,
    pop_per_node: f64,
    ncounties: usize,
    munis: bool,
    elections: bool,
    geometry: bool,
    cd_2020: Option<Plan>,
}

/// Starts a grid map with unit populations per node.
pub fn grid_map(rows: usize, cols: usize, ndists: u16, pop_tol: f64) -> GridMapBuilder {
    GridMapBuilder {
        rows,
        cols,
        ndists,
        pop_tol,
        pop_per_node: 1.0,
        ncounties: rows.min(3),
        munis: false,
        elections: true,
        geometry: true,
        cd_2020: None,
    }
}

impl GridMapBuilder {
    pub fn pop_per_node(mut self, pop: f64) -> Self {
        self.pop_per_node = pop;
        self
    }

    /// Number of horizontal county bands.
    pub fn counties(mut self, n: usize) -> Self {
        self.ncounties = n.clamp(1, self.rows);
        self
    }

    /// Gives every first-row node a municipality label.
    pub fn munis(mut self, on: bool) -> Self {
        self.munis = on;
        self
    }

    pub fn elections(mut self, on: bool) -> Self {
        self.elections = on;
        self
    }

    pub fn geometry(mut self, on: bool) -> Self {
        self.geometry = on;
        self
    }

    /// Stores a plan in the `cd_2020` column for reference-plan workflows.
    pub fn reference(mut self, plan: Plan) -> Self {
        self.cd_2020 = Some(plan);
        self
    }

    pub fn build(self) -> Result<RedistMap> {
        let (rows, cols) = (self.rows, self.cols);
        let n = rows * cols;
        let graph = grid_graph(rows, cols);
        let mut records = Vec::with_capacity(n);
        for r in 0..rows {
            for c in 0..cols {
                let i = r * cols + c;
                let pop = self.pop_per_node;
                let vap = (pop * 0.8).ceil();
                let row_frac = if rows > 1 { r as f64 / (rows - 1) as f64 } else { 0.0 };
                let black = (vap * 0.8 * row_frac).round();
                let white = vap - black;
                let mut vap_subgroups = BTreeMap::new();
                for name in VAP_SUBGROUPS {
                    vap_subgroups.insert(name.to_string(), 0.0);
                }
                vap_subgroups.insert("vap_black".to_string(), black);
                vap_subgroups.insert("vap_white".to_string(), white);

                let mut votes = BTreeMap::new();
                if self.elections {
                    let col_frac = if cols > 1 { c as f64 / (cols - 1) as f64 } else { 0.5 };
                    votes.insert("pre_16_dem_aaa".to_string(), 30.0 + 70.0 * col_frac + jitter(i, 1));
                    votes.insert("pre_16_rep_bbb".to_string(), 100.0 - 70.0 * col_frac + jitter(i, 2));
                    votes.insert("gov_18_dem_ccc".to_string(), 25.0 + 75.0 * col_frac + jitter(i, 3));
                    votes.insert("gov_18_rep_ddd".to_string(), 95.0 - 75.0 * col_frac + jitter(i, 4));
                }

                let county = format!("C{}", r * self.ncounties / rows);
                let muni = if self.munis && r == 0 { Some(format!("M{c}")) } else { None };
                let county_muni = match &muni {
                    Some(m) => format!("{county}_{m}"),
                    None => county.clone(),
                };

                let mut shared_edge_lengths = BTreeMap::new();
                if self.geometry {
                    for &v in graph.neighbors(i) {
                        shared_edge_lengths.insert(v, 1.0);
                    }
                }

                records.push(PrecinctRecord {
                    geoid: format!("r{r:03}c{c:03}"),
                    county,
                    muni,
                    county_muni,
                    pop,
                    vap,
                    vap_subgroups,
                    votes,
                    cd_2010: None,
                    cd_2020: self.cd_2020.as_ref().map(|p| p.assignment()[i]),
                    area: self.geometry.then_some(1.0),
                    perimeter: self.geometry.then_some(4.0),
                    shared_edge_lengths,
                });
            }
        }
        RedistMap::from_parts(graph, records, &MapParams::new(self.ndists, self.pop_tol))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_map_is_valid_and_complete() {
        let map = grid_map(4, 4, 2, 0.05).build().unwrap();
        assert_eq!(map.node_count(), 16);
        assert!(map.geometry_complete());
        assert_eq!(map.graph().edge_count(), 24);
        assert!((map.parity_population() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn column_plan_is_contiguous_and_balanced() {
        let map = grid_map(4, 4, 2, 0.05).build().unwrap();
        let plan = column_plan(4, 4, 2);
        assert!(crate::graph::is_contiguous(map.graph(), &plan).unwrap());
        let pops = crate::graph::tally(&plan, map.pops()).unwrap();
        assert_eq!(pops, vec![8.0, 8.0]);
    }

    #[test]
    fn reference_column_round_trips() {
        let plan = column_plan(2, 4, 2);
        let map = grid_map(2, 4, 2, 0.05).reference(plan.clone()).build().unwrap();
        let restored = map.reference_plan("cd_2020").unwrap();
        assert_eq!(restored.assignment(), plan.assignment());
    }
}
