//! Polygon geometry: rook adjacency and shared-boundary lengths.
//!
//! Input is a polygon feature collection (GeoJSON-style) with a `geoid`
//! property per feature. Coordinates must already share a planar system;
//! no reprojection happens here.

use std::collections::BTreeMap;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Default snapping tolerance for shared-segment detection, in input units.
pub const DEFAULT_SNAP_TOLERANCE: f64 = 1e-9;

/// One polygon: an exterior ring followed by optional hole rings.
#[derive(Debug, Clone)]
pub struct Polygon {
    pub rings: Vec<Vec<(f64, f64)>>,
}

/// Geometry for one precinct (possibly multiple disjoint polygons).
#[derive(Debug, Clone)]
pub struct PrecinctGeometry {
    pub geoid: String,
    pub polygons: Vec<Polygon>,
}

/// Per-precinct quantities derived from polygon geometry.
#[derive(Debug, Clone)]
pub struct GeometryAttrs {
    pub area: Vec<f64>,
    pub perimeter: Vec<f64>,
    /// For each node, shared boundary length with each adjacent node.
    pub shared: Vec<BTreeMap<usize, f64>>,
}

fn ring_from_json(v: &Value) -> Result<Vec<(f64, f64)>> {
    let arr = v.as_array().ok_or_else(|| Error::Geometry("ring is not an array".into()))?;
    let mut ring = Vec::with_capacity(arr.len());
    for pt in arr {
        let c = pt.as_array().ok_or_else(|| Error::Geometry("coordinate is not a pair".into()))?;
        if c.len() < 2 {
            return Err(Error::Geometry("coordinate has fewer than 2 components".into()));
        }
        let x = c[0].as_f64().ok_or_else(|| Error::Geometry("non-numeric coordinate".into()))?;
        let y = c[1].as_f64().ok_or_else(|| Error::Geometry("non-numeric coordinate".into()))?;
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::Geometry("non-finite coordinate".into()));
        }
        ring.push((x, y));
    }
    validate_ring(&ring)?;
    Ok(ring)
}

fn validate_ring(ring: &[(f64, f64)]) -> Result<()> {
    if ring.len() < 4 {
        return Err(Error::Geometry(format!(
            "ring has {} points; a closed ring needs at least 4",
            ring.len()
        )));
    }
    if ring[0] != ring[ring.len() - 1] {
        return Err(Error::Geometry("ring is not closed".into()));
    }
    Ok(())
}

fn polygon_from_json(coords: &Value) -> Result<Polygon> {
    let rings_json =
        coords.as_array().ok_or_else(|| Error::Geometry("polygon coordinates not an array".into()))?;
    if rings_json.is_empty() {
        return Err(Error::Geometry("polygon has no rings".into()));
    }
    let rings = rings_json.iter().map(ring_from_json).collect::<Result<Vec<_>>>()?;
    Ok(Polygon { rings })
}

/// Parses a feature collection with one (Multi)Polygon per precinct.
pub fn parse_feature_collection(json: &str) -> Result<Vec<PrecinctGeometry>> {
    let root: Value = serde_json::from_str(json)?;
    let features = root
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Geometry("missing features array".into()))?;
    let mut out = Vec::with_capacity(features.len());
    for (i, feat) in features.iter().enumerate() {
        let geoid = feat
            .get("properties")
            .and_then(|p| p.get("geoid").or_else(|| p.get("GEOID")))
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Geometry(format!("feature {i} missing geoid property")))?
            .to_string();
        let geom = feat
            .get("geometry")
            .ok_or_else(|| Error::Geometry(format!("feature {i} missing geometry")))?;
        let gtype = geom.get("type").and_then(Value::as_str).unwrap_or("");
        let coords = geom
            .get("coordinates")
            .ok_or_else(|| Error::Geometry(format!("feature {i} missing coordinates")))?;
        let polygons = match gtype {
            "Polygon" => vec![polygon_from_json(coords)?],
            "MultiPolygon" => {
                let parts = coords
                    .as_array()
                    .ok_or_else(|| Error::Geometry("multipolygon coordinates not an array".into()))?;
                parts.iter().map(polygon_from_json).collect::<Result<Vec<_>>>()?
            }
            other => {
                return Err(Error::Geometry(format!(
                    "feature {i}: unsupported geometry type {other:?}"
                )))
            }
        };
        out.push(PrecinctGeometry { geoid, polygons });
    }
    Ok(out)
}

fn segments(geom: &PrecinctGeometry) -> Vec<((f64, f64), (f64, f64))> {
    let mut segs = Vec::new();
    for poly in &geom.polygons {
        for ring in &poly.rings {
            for w in ring.windows(2) {
                segs.push((w[0], w[1]));
            }
        }
    }
    segs
}

fn bbox(geom: &PrecinctGeometry) -> (f64, f64, f64, f64) {
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for poly in &geom.polygons {
        for ring in &poly.rings {
            for &(x, y) in ring {
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
            }
        }
    }
    (x0, y0, x1, y1)
}

/// Length of the collinear overlap of two segments, or 0 when they are not
/// collinear within `tol` or touch in at most a point.
fn collinear_overlap(a: ((f64, f64), (f64, f64)), b: ((f64, f64), (f64, f64)), tol: f64) -> f64 {
    let (p, q) = a;
    let d = (q.0 - p.0, q.1 - p.1);
    let len = (d.0 * d.0 + d.1 * d.1).sqrt();
    if len <= tol {
        return 0.0;
    }
    // Both endpoints of b must lie on the line through a.
    for pt in [b.0, b.1] {
        let cross = d.0 * (pt.1 - p.1) - d.1 * (pt.0 - p.0);
        if cross.abs() / len > tol {
            return 0.0;
        }
    }
    let t0 = ((b.0 .0 - p.0) * d.0 + (b.0 .1 - p.1) * d.1) / len;
    let t1 = ((b.1 .0 - p.0) * d.0 + (b.1 .1 - p.1) * d.1) / len;
    let (lo, hi) = (t0.min(t1), t0.max(t1));
    (hi.min(len) - lo.max(0.0)).max(0.0)
}

fn shared_length(a: &PrecinctGeometry, b: &PrecinctGeometry, tol: f64) -> f64 {
    let mut total = 0.0;
    for sa in segments(a) {
        for sb in segments(b) {
            total += collinear_overlap(sa, sb, tol);
        }
    }
    total
}

fn boxes_touch(a: (f64, f64, f64, f64), b: (f64, f64, f64, f64), tol: f64) -> bool {
    a.0 <= b.2 + tol && b.0 <= a.2 + tol && a.1 <= b.3 + tol && b.1 <= a.3 + tol
}

/// Rook adjacency: two precincts are adjacent iff they share a boundary
/// segment of positive length. Point (corner) contact does not count.
pub fn derive_adjacency(geoms: &[PrecinctGeometry], tol: f64) -> Result<Vec<(usize, usize)>> {
    let boxes: Vec<_> = geoms.iter().map(bbox).collect();
    let mut edges = Vec::new();
    for i in 0..geoms.len() {
        for j in (i + 1)..geoms.len() {
            if !boxes_touch(boxes[i], boxes[j], tol) {
                continue;
            }
            if shared_length(&geoms[i], &geoms[j], tol) > tol {
                edges.push((i, j));
            }
        }
    }
    Ok(edges)
}

fn ring_area_signed(ring: &[(f64, f64)]) -> f64 {
    let mut s = 0.0;
    for w in ring.windows(2) {
        s += w[0].0 * w[1].1 - w[1].0 * w[0].1;
    }
    s / 2.0
}

fn ring_length(ring: &[(f64, f64)]) -> f64 {
    ring.windows(2)
        .map(|w| ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt())
        .sum()
}

/// Computes per-precinct area, perimeter, and shared boundary lengths for
/// every adjacent pair in `graph` (node order must match `geoms`).
pub fn derive_edge_lengths(geoms: &[PrecinctGeometry], graph: &Graph, tol: f64) -> Result<GeometryAttrs> {
    if geoms.len() != graph.node_count() {
        return Err(Error::Shape(format!(
            "{} geometries for a graph of {} nodes",
            geoms.len(),
            graph.node_count()
        )));
    }
    let mut area = vec![0.0; geoms.len()];
    let mut perimeter = vec![0.0; geoms.len()];
    for (i, g) in geoms.iter().enumerate() {
        for poly in &g.polygons {
            // Exterior ring adds area; hole rings subtract. Every ring
            // contributes boundary length.
            for (k, ring) in poly.rings.iter().enumerate() {
                let a = ring_area_signed(ring).abs();
                area[i] += if k == 0 { a } else { -a };
                perimeter[i] += ring_length(ring);
            }
        }
        if area[i] <= 0.0 {
            return Err(Error::Geometry(format!("precinct {} has non-positive area", g.geoid)));
        }
    }
    let mut shared: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); geoms.len()];
    for &(i, j) in graph.edges() {
        let len = shared_length(&geoms[i], &geoms[j], tol);
        shared[i].insert(j, len);
        shared[j].insert(i, len);
    }
    for i in 0..geoms.len() {
        let total: f64 = shared[i].values().sum();
        if total > perimeter[i] + tol.max(1e-9) * shared[i].len().max(1) as f64 {
            return Err(Error::Geometry(format!(
                "precinct {}: shared boundary {total} exceeds perimeter {}",
                geoms[i].geoid, perimeter[i]
            )));
        }
    }
    Ok(GeometryAttrs { area, perimeter, shared })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x0: f64, y0: f64) -> Polygon {
        Polygon {
            rings: vec![vec![(x0, y0), (x0 + 1.0, y0), (x0 + 1.0, y0 + 1.0), (x0, y0 + 1.0), (x0, y0)]],
        }
    }

    fn geom(geoid: &str, p: Polygon) -> PrecinctGeometry {
        PrecinctGeometry { geoid: geoid.into(), polygons: vec![p] }
    }

    #[test]
    fn squares_sharing_full_edge_are_adjacent() {
        let g = vec![geom("a", square(0.0, 0.0)), geom("b", square(1.0, 0.0))];
        let edges = derive_adjacency(&g, DEFAULT_SNAP_TOLERANCE).unwrap();
        assert_eq!(edges, vec![(0, 1)]);
    }

    #[test]
    fn corner_contact_is_not_adjacent() {
        let g = vec![geom("a", square(0.0, 0.0)), geom("b", square(1.0, 1.0))];
        let edges = derive_adjacency(&g, DEFAULT_SNAP_TOLERANCE).unwrap();
        assert!(edges.is_empty());
    }

    #[test]
    fn disjoint_squares_not_adjacent() {
        let g = vec![geom("a", square(0.0, 0.0)), geom("b", square(3.0, 0.0))];
        let edges = derive_adjacency(&g, DEFAULT_SNAP_TOLERANCE).unwrap();
        assert!(edges.is_empty());
    }

    #[test]
    fn partial_edge_overlap_counts_with_true_length() {
        // b sits to the right of a, offset by half a unit vertically
        let a = geom("a", square(0.0, 0.0));
        let b = geom("b", square(1.0, 0.5));
        let len = shared_length(&a, &b, DEFAULT_SNAP_TOLERANCE);
        assert!((len - 0.5).abs() < 1e-12);
    }

    #[test]
    fn edge_lengths_for_square_pair() {
        let geoms = vec![geom("a", square(0.0, 0.0)), geom("b", square(1.0, 0.0))];
        let graph = Graph::new(2, &[(0, 1)]).unwrap();
        let attrs = derive_edge_lengths(&geoms, &graph, DEFAULT_SNAP_TOLERANCE).unwrap();
        assert!((attrs.area[0] - 1.0).abs() < 1e-12);
        assert!((attrs.perimeter[0] - 4.0).abs() < 1e-12);
        assert!((attrs.shared[0][&1] - 1.0).abs() < 1e-12);
        assert!((attrs.shared[1][&0] - 1.0).abs() < 1e-12);
        // merged 2x1 rectangle perimeter by inclusion-exclusion
        let merged = attrs.perimeter[0] + attrs.perimeter[1] - 2.0 * attrs.shared[0][&1];
        assert!((merged - 6.0).abs() < 1e-12);
    }

    #[test]
    fn isolated_square_has_no_shared_length() {
        let geoms = vec![geom("a", square(0.0, 0.0))];
        let graph = Graph::new(1, &[]).unwrap();
        let attrs = derive_edge_lengths(&geoms, &graph, DEFAULT_SNAP_TOLERANCE).unwrap();
        assert!(attrs.shared[0].is_empty());
        assert!((attrs.perimeter[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn open_ring_rejected() {
        let json = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","properties":{"geoid":"a"},
             "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1]]]}}]}"#;
        assert!(matches!(parse_feature_collection(json), Err(Error::Geometry(_))));
    }

    #[test]
    fn parses_multipolygon() {
        let json = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","properties":{"geoid":"a"},
             "geometry":{"type":"MultiPolygon","coordinates":[
               [[[0,0],[1,0],[1,1],[0,1],[0,0]]],
               [[[5,5],[6,5],[6,6],[5,6],[5,5]]]]}}]}"#;
        let geoms = parse_feature_collection(json).unwrap();
        assert_eq!(geoms.len(), 1);
        assert_eq!(geoms[0].polygons.len(), 2);
    }
}
