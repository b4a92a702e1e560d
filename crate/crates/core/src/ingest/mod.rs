//! Assembling a [`RedistMap`] from attribute tables, adjacency lists, and
//! optional polygon geometry.
//!
//! File formats:
//! - attributes: delimited text with a header row (`geoid`, `county`,
//!   optional `muni`, `pop`, `vap`, the eight `vap_*` subgroups, election
//!   columns named `{office}_{year}_{party}_{candidate}`, optional
//!   `cd_2010`/`cd_2020`, optional `area`/`perimeter`);
//! - adjacency: JSON object `{"geoid": ["neighbor geoid", ...]}`;
//! - geometry: polygon feature collection with a `geoid` property per
//!   feature (used to derive adjacency when no adjacency file is given,
//!   and always used for areas, perimeters, and shared edge lengths).

pub mod geometry;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{Graph, Plan};
use geometry::{GeometryAttrs, PrecinctGeometry, DEFAULT_SNAP_TOLERANCE};

/// Column names of the voting-age-population subgroups, in export order.
pub const VAP_SUBGROUPS: [&str; 8] = [
    "vap_hisp", "vap_white", "vap_black", "vap_aian", "vap_asian", "vap_nhpi", "vap_other",
    "vap_two",
];

/// Sentinel label for precincts that belong to no municipality.
pub const MISSING_MUNI: &str = "<none>";

/// One precinct's joined attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecinctRecord {
    pub geoid: String,
    pub county: String,
    pub muni: Option<String>,
    /// `county` when `muni` is absent, otherwise `county_muni` concatenated.
    pub county_muni: String,
    pub pop: f64,
    pub vap: f64,
    /// Subgroup counts keyed by the `vap_*` column name; always all eight.
    pub vap_subgroups: BTreeMap<String, f64>,
    /// Election vote counts keyed by `{office}_{year}_{party}_{candidate}`.
    pub votes: BTreeMap<String, f64>,
    pub cd_2010: Option<u16>,
    pub cd_2020: Option<u16>,
    pub area: Option<f64>,
    pub perimeter: Option<f64>,
    /// Shared boundary length with each adjacent node; empty when unknown.
    pub shared_edge_lengths: BTreeMap<usize, f64>,
}

/// Problem parameters needed to assemble a map.
#[derive(Debug, Clone)]
pub struct MapParams {
    pub ndists: u16,
    pub pop_tol: f64,
    pub snap_tolerance: f64,
}

impl MapParams {
    pub fn new(ndists: u16, pop_tol: f64) -> MapParams {
        MapParams { ndists, pop_tol, snap_tolerance: DEFAULT_SNAP_TOLERANCE }
    }
}

/// The joined, validated problem instance: adjacency graph plus aligned
/// precinct attributes and problem parameters. Immutable once built.
#[derive(Debug, Clone)]
pub struct RedistMap {
    graph: Graph,
    records: Vec<PrecinctRecord>,
    ndists: u16,
    pop_tol: f64,
    pops: Vec<f64>,
    vap: Vec<f64>,
    subgroup_columns: BTreeMap<String, Vec<f64>>,
    vote_columns: BTreeMap<String, Vec<f64>>,
    admin_units: BTreeMap<String, Vec<String>>,
    geoid_index: HashMap<String, usize>,
    ignored_columns: Vec<String>,
}

impl RedistMap {
    /// Validates and assembles a map from parts already in memory.
    pub fn from_parts(graph: Graph, records: Vec<PrecinctRecord>, params: &MapParams) -> Result<RedistMap> {
        if records.len() != graph.node_count() {
            return Err(Error::Shape(format!(
                "{} records for a graph of {} nodes",
                records.len(),
                graph.node_count()
            )));
        }
        if params.ndists == 0 {
            return Err(Error::Schema("ndists must be at least 1".into()));
        }
        if !(params.pop_tol > 0.0 && params.pop_tol < 1.0) {
            return Err(Error::Schema(format!("pop_tol {} outside (0, 1)", params.pop_tol)));
        }
        if !graph.is_connected() {
            return Err(Error::NotConnected(Some("precinct adjacency graph".into())));
        }
        let mut geoid_index = HashMap::new();
        for (i, r) in records.iter().enumerate() {
            if geoid_index.insert(r.geoid.clone(), i).is_some() {
                return Err(Error::Schema(format!("duplicate geoid {}", r.geoid)));
            }
            validate_record(r, i, &graph)?;
        }
        let total_pop: f64 = records.iter().map(|r| r.pop).sum();
        if total_pop < params.ndists as f64 {
            return Err(Error::Schema(format!(
                "total population {total_pop} cannot fill {} districts",
                params.ndists
            )));
        }
        let pops = records.iter().map(|r| r.pop).collect();
        let vap = records.iter().map(|r| r.vap).collect();
        let mut subgroup_columns = BTreeMap::new();
        for name in VAP_SUBGROUPS {
            subgroup_columns.insert(
                name.to_string(),
                records.iter().map(|r| r.vap_subgroups[name]).collect(),
            );
        }
        let mut vote_columns: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            for (col, &v) in &r.votes {
                vote_columns
                    .entry(col.clone())
                    .or_insert_with(|| vec![0.0; records.len()])[i] = v;
            }
        }
        let mut admin_units = BTreeMap::new();
        admin_units.insert("county".to_string(), records.iter().map(|r| r.county.clone()).collect());
        admin_units.insert(
            "muni".to_string(),
            records
                .iter()
                .map(|r| r.muni.clone().unwrap_or_else(|| MISSING_MUNI.to_string()))
                .collect(),
        );
        admin_units.insert(
            "county_muni".to_string(),
            records.iter().map(|r| r.county_muni.clone()).collect(),
        );
        Ok(RedistMap {
            graph,
            records,
            ndists: params.ndists,
            pop_tol: params.pop_tol,
            pops,
            vap,
            subgroup_columns,
            vote_columns,
            admin_units,
            geoid_index,
            ignored_columns: Vec::new(),
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn records(&self) -> &[PrecinctRecord] {
        &self.records
    }

    pub fn node_count(&self) -> usize {
        self.records.len()
    }

    pub fn ndists(&self) -> u16 {
        self.ndists
    }

    pub fn pop_tol(&self) -> f64 {
        self.pop_tol
    }

    pub fn pops(&self) -> &[f64] {
        &self.pops
    }

    pub fn vap(&self) -> &[f64] {
        &self.vap
    }

    pub fn total_pop(&self) -> f64 {
        self.pops.iter().sum()
    }

    /// Ideal district population: total population / ndists.
    pub fn parity_population(&self) -> f64 {
        self.total_pop() / self.ndists as f64
    }

    /// Absolute parity tolerance in persons: `pop_tol` x parity population.
    pub fn abs_pop_tolerance(&self) -> f64 {
        self.pop_tol * self.parity_population()
    }

    /// Per-node subgroup counts for one of the `vap_*` columns.
    pub fn subgroup_column(&self, name: &str) -> Option<&[f64]> {
        self.subgroup_columns.get(name).map(Vec::as_slice)
    }

    /// Per-node vote counts for an election column.
    pub fn vote_column(&self, name: &str) -> Option<&[f64]> {
        self.vote_columns.get(name).map(Vec::as_slice)
    }

    pub fn vote_column_names(&self) -> impl Iterator<Item = &str> {
        self.vote_columns.keys().map(String::as_str)
    }

    /// Named admin-unit label vector ("county", "muni", "county_muni").
    pub fn admin_unit(&self, name: &str) -> Option<&[String]> {
        self.admin_units.get(name).map(Vec::as_slice)
    }

    pub fn admin_unit_names(&self) -> impl Iterator<Item = &str> {
        self.admin_units.keys().map(String::as_str)
    }

    /// Interns an admin-unit vector as dense ids; returns per-node ids and
    /// the unit count. Ids follow first appearance in node order.
    pub fn unit_ids(&self, name: &str) -> Option<(Vec<u32>, usize)> {
        let labels = self.admin_unit(name)?;
        let mut map: HashMap<&str, u32> = HashMap::new();
        let mut ids = Vec::with_capacity(labels.len());
        for l in labels {
            let next = map.len() as u32;
            let id = *map.entry(l.as_str()).or_insert(next);
            ids.push(id);
        }
        Some((ids, map.len()))
    }

    pub fn node_index(&self, geoid: &str) -> Option<usize> {
        self.geoid_index.get(geoid).copied()
    }

    /// Columns present in the attribute input but not part of the schema.
    pub fn ignored_columns(&self) -> &[String] {
        &self.ignored_columns
    }

    /// True when every record carries area, perimeter, and a shared length
    /// for each of its graph neighbors, so district perimeters can be
    /// reconstructed by inclusion-exclusion.
    pub fn geometry_complete(&self) -> bool {
        self.records.iter().enumerate().all(|(i, r)| {
            r.area.is_some()
                && r.perimeter.is_some()
                && self.graph.neighbors(i).iter().all(|v| r.shared_edge_lengths.contains_key(v))
        })
    }

    /// Builds a district plan from the `cd_2010` or `cd_2020` column.
    pub fn reference_plan(&self, column: &str) -> Result<Plan> {
        let assignment: Vec<u16> = self
            .records
            .iter()
            .map(|r| {
                let v = match column {
                    "cd_2010" => r.cd_2010,
                    "cd_2020" => r.cd_2020,
                    other => {
                        return Err(Error::Config(format!(
                            "unknown reference plan column {other:?}"
                        )))
                    }
                };
                v.ok_or_else(|| {
                    Error::Schema(format!("precinct {} has no {column} value", r.geoid))
                })
            })
            .collect::<Result<_>>()?;
        Plan::new(assignment, self.ndists)
    }
}

fn validate_record(r: &PrecinctRecord, node: usize, graph: &Graph) -> Result<()> {
    let ctx = |msg: String| Error::Schema(format!("precinct {} (row {node}): {msg}", r.geoid));
    for (name, v) in [("pop", r.pop), ("vap", r.vap)] {
        if !v.is_finite() || v < 0.0 {
            return Err(ctx(format!("{name} = {v} must be a non-negative count")));
        }
    }
    if r.pop < r.vap {
        return Err(ctx(format!("pop {} < vap {}", r.pop, r.vap)));
    }
    let mut subgroup_sum = 0.0;
    for name in VAP_SUBGROUPS {
        let v = *r
            .vap_subgroups
            .get(name)
            .ok_or_else(|| ctx(format!("missing subgroup {name}")))?;
        if !v.is_finite() || v < 0.0 {
            return Err(ctx(format!("{name} = {v} must be a non-negative count")));
        }
        if v > r.vap {
            return Err(ctx(format!("{name} = {v} exceeds vap {}", r.vap)));
        }
        subgroup_sum += v;
    }
    if (subgroup_sum - r.vap).abs() > 1e-6 * r.vap.max(1.0) {
        return Err(ctx(format!("vap subgroups sum to {subgroup_sum}, vap is {}", r.vap)));
    }
    for (_, &v) in &r.votes {
        if !v.is_finite() || v < 0.0 {
            return Err(ctx("negative or non-finite vote count".into()));
        }
    }
    for (&nbr, &len) in &r.shared_edge_lengths {
        if !graph.neighbors(node).contains(&nbr) {
            return Err(ctx(format!("shared edge length for non-neighbor node {nbr}")));
        }
        if !len.is_finite() || len < 0.0 {
            return Err(ctx(format!("shared edge length {len} with node {nbr} invalid")));
        }
    }
    Ok(())
}

/// Splits an election column name into (office, year, party, candidate);
/// `None` when the column does not follow the naming convention.
pub fn parse_vote_column(name: &str) -> Option<(&str, &str, &str, &str)> {
    let parts: Vec<&str> = name.split('_').collect();
    if parts.len() != 4 {
        return None;
    }
    let (office, year, party, cand) = (parts[0], parts[1], parts[2], parts[3]);
    if office.is_empty() || cand.is_empty() {
        return None;
    }
    if year.len() != 2 || !year.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if party != "dem" && party != "rep" {
        return None;
    }
    Some((office, year, party, cand))
}

const KNOWN_COLUMNS: [&str; 8] =
    ["geoid", "county", "muni", "pop", "vap", "cd_2010", "cd_2020", "area"];

fn parse_count(field: &str, row: usize, col: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Schema(format!("row {row}: column {col} value {field:?} is not numeric")))
}

/// Loads and joins the problem instance from open-format files.
///
/// Exactly one of `adjacency` and `geometry` may be omitted: with no
/// adjacency file the graph is derived from polygon rook adjacency. The
/// returned map reports parity population and the absolute parity
/// tolerance via [`RedistMap::parity_population`] and
/// [`RedistMap::abs_pop_tolerance`].
pub fn load_map(
    attributes: &Path,
    adjacency: Option<&Path>,
    geometry: Option<&Path>,
    params: &MapParams,
) -> Result<RedistMap> {
    let (mut records, ignored) = read_attributes(attributes)?;
    let geoms = match geometry {
        Some(path) => Some(align_geometry(&records, path)?),
        None => None,
    };
    let edges = match (adjacency, &geoms) {
        (Some(path), _) => read_adjacency_edges(&records, path)?,
        (None, Some(geoms)) => geometry::derive_adjacency(geoms, params.snap_tolerance)?,
        (None, None) => {
            return Err(Error::Config(
                "either an adjacency file or polygon geometry is required".into(),
            ))
        }
    };
    let graph = Graph::new(records.len(), &edges)?;
    if let Some(geoms) = &geoms {
        let attrs: GeometryAttrs = geometry::derive_edge_lengths(geoms, &graph, params.snap_tolerance)?;
        for (i, r) in records.iter_mut().enumerate() {
            r.area = Some(attrs.area[i]);
            r.perimeter = Some(attrs.perimeter[i]);
            r.shared_edge_lengths = attrs.shared[i].clone();
        }
    }
    let mut map = RedistMap::from_parts(graph, records, params)?;
    map.ignored_columns = ignored;
    Ok(map)
}

fn read_attributes(path: &Path) -> Result<(Vec<PrecinctRecord>, Vec<String>)> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Schema(format!("cannot read attributes {}: {e}", path.display())))?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let required = |name: &str| {
        col(name).ok_or_else(|| Error::Schema(format!("attributes missing column {name:?}")))
    };
    let geoid_ix = required("geoid")?;
    let county_ix = required("county")?;
    let pop_ix = required("pop")?;
    let vap_ix = required("vap")?;
    let mut subgroup_ix = BTreeMap::new();
    for name in VAP_SUBGROUPS {
        subgroup_ix.insert(name, required(name)?);
    }
    let muni_ix = col("muni");
    let cd10_ix = col("cd_2010");
    let cd20_ix = col("cd_2020");
    let area_ix = col("area");
    let perim_ix = col("perimeter");

    let mut vote_ix: Vec<(String, usize)> = Vec::new();
    let mut ignored = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        let known = KNOWN_COLUMNS.contains(&h.as_str())
            || h == "perimeter"
            || VAP_SUBGROUPS.contains(&h.as_str());
        if known {
            continue;
        }
        if parse_vote_column(h).is_some() {
            vote_ix.push((h.clone(), i));
        } else {
            ignored.push(h.clone());
        }
    }

    let mut records = Vec::new();
    for (row_num, row) in reader.records().enumerate() {
        let row = row?;
        let field = |ix: usize| row.get(ix).unwrap_or("").to_string();
        let opt_field = |ix: Option<usize>| {
            ix.map(|i| field(i)).filter(|s| !s.trim().is_empty())
        };
        let geoid = field(geoid_ix);
        if geoid.trim().is_empty() {
            return Err(Error::Schema(format!("row {row_num}: empty geoid")));
        }
        let county = field(county_ix);
        let muni = opt_field(muni_ix);
        let county_muni = match &muni {
            Some(m) => format!("{county}_{m}"),
            None => county.clone(),
        };
        let mut vap_subgroups = BTreeMap::new();
        for (name, &ix) in &subgroup_ix {
            vap_subgroups.insert(name.to_string(), parse_count(&field(ix), row_num, name)?);
        }
        let mut votes = BTreeMap::new();
        for (name, ix) in &vote_ix {
            votes.insert(name.clone(), parse_count(&field(*ix), row_num, name)?);
        }
        let parse_cd = |s: Option<String>, col: &str| -> Result<Option<u16>> {
            match s {
                None => Ok(None),
                Some(v) => v
                    .trim()
                    .parse::<u16>()
                    .map(Some)
                    .map_err(|_| Error::Schema(format!("row {row_num}: bad {col} value {v:?}"))),
            }
        };
        let parse_opt = |s: Option<String>, col: &str| -> Result<Option<f64>> {
            match s {
                None => Ok(None),
                Some(v) => parse_count(&v, row_num, col).map(Some),
            }
        };
        records.push(PrecinctRecord {
            geoid,
            county,
            county_muni,
            muni,
            pop: parse_count(&field(pop_ix), row_num, "pop")?,
            vap: parse_count(&field(vap_ix), row_num, "vap")?,
            vap_subgroups,
            votes,
            cd_2010: parse_cd(opt_field(cd10_ix), "cd_2010")?,
            cd_2020: parse_cd(opt_field(cd20_ix), "cd_2020")?,
            area: parse_opt(opt_field(area_ix), "area")?,
            perimeter: parse_opt(opt_field(perim_ix), "perimeter")?,
            shared_edge_lengths: BTreeMap::new(),
        });
    }
    if records.is_empty() {
        return Err(Error::Schema("attributes file has no rows".into()));
    }
    Ok((records, ignored))
}

fn read_adjacency_edges(records: &[PrecinctRecord], path: &Path) -> Result<Vec<(usize, usize)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Schema(format!("cannot read adjacency {}: {e}", path.display())))?;
    let doc: BTreeMap<String, Vec<String>> = serde_json::from_str(&text)?;
    let index: HashMap<&str, usize> =
        records.iter().enumerate().map(|(i, r)| (r.geoid.as_str(), i)).collect();
    for r in records {
        if !doc.contains_key(&r.geoid) {
            return Err(Error::Join(format!("geoid {} missing from adjacency document", r.geoid)));
        }
    }
    let mut edges = Vec::new();
    for (geoid, neighbors) in &doc {
        let &u = index
            .get(geoid.as_str())
            .ok_or_else(|| Error::Join(format!("adjacency geoid {geoid} not in attributes")))?;
        for nbr in neighbors {
            let &v = index.get(nbr.as_str()).ok_or_else(|| {
                Error::Join(format!("adjacency neighbor {nbr} of {geoid} not in attributes"))
            })?;
            if !doc[nbr].contains(geoid) {
                return Err(Error::Schema(format!(
                    "adjacency is asymmetric: {geoid} lists {nbr} but not vice versa"
                )));
            }
            if u < v {
                edges.push((u, v));
            }
        }
    }
    Ok(edges)
}

fn align_geometry(records: &[PrecinctRecord], path: &Path) -> Result<Vec<PrecinctGeometry>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Geometry(format!("cannot read geometry {}: {e}", path.display())))?;
    let geoms = geometry::parse_feature_collection(&text)?;
    let mut by_geoid: HashMap<String, PrecinctGeometry> =
        geoms.into_iter().map(|g| (g.geoid.clone(), g)).collect();
    let mut aligned = Vec::with_capacity(records.len());
    for r in records {
        let g = by_geoid
            .remove(&r.geoid)
            .ok_or_else(|| Error::Join(format!("geoid {} missing from geometry", r.geoid)))?;
        aligned.push(g);
    }
    if let Some(extra) = by_geoid.keys().next() {
        return Err(Error::Join(format!("geometry feature {extra} not in attributes")));
    }
    Ok(aligned)
}
