//! Region contiguity (queen rule) and neighbor-mean imputation.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::ingest::{csv_field, format_f64, read_csv, Dataset};

/// Symmetric, irreflexive neighbor relation over an ordered region list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyGraph {
    region_ids: Vec<String>,
    index: HashMap<String, usize>,
    neighbors: Vec<BTreeSet<usize>>,
}

impl AdjacencyGraph {
    /// Graph over `region_ids` with no edges.
    pub fn new(region_ids: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(region_ids.len());
        for (i, id) in region_ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateKey {
                    kind: "region_id",
                    key: id.clone(),
                });
            }
        }
        let neighbors = vec![BTreeSet::new(); region_ids.len()];
        Ok(AdjacencyGraph {
            region_ids,
            index,
            neighbors,
        })
    }

    pub fn add_edge(&mut self, a: usize, b: usize) -> Result<()> {
        if a == b {
            return Err(Error::SelfLoop(self.region_ids[a].clone()));
        }
        self.neighbors[a].insert(b);
        self.neighbors[b].insert(a);
        Ok(())
    }

    pub fn add_edge_by_id(&mut self, a: &str, b: &str) -> Result<()> {
        let ia = self.index_of(a).ok_or_else(|| Error::UnknownRegion(a.to_string()))?;
        let ib = self.index_of(b).ok_or_else(|| Error::UnknownRegion(b.to_string()))?;
        self.add_edge(ia, ib)
    }

    pub fn region_ids(&self) -> &[String] {
        &self.region_ids
    }

    pub fn len(&self) -> usize {
        self.region_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.region_ids.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn neighbors(&self, i: usize) -> &BTreeSet<usize> {
        &self.neighbors[i]
    }

    pub fn neighbor_ids(&self, id: &str) -> Option<Vec<&str>> {
        let i = self.index_of(id)?;
        Some(
            self.neighbors[i]
                .iter()
                .map(|&j| self.region_ids[j].as_str())
                .collect(),
        )
    }

    pub fn are_neighbors(&self, a: &str, b: &str) -> bool {
        match (self.index_of(a), self.index_of(b)) {
            (Some(i), Some(j)) => self.neighbors[i].contains(&j),
            _ => false,
        }
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    /// True when the relation is symmetric and irreflexive.
    pub fn is_well_formed(&self) -> bool {
        self.neighbors.iter().enumerate().all(|(i, ns)| {
            !ns.contains(&i) && ns.iter().all(|&j| self.neighbors[j].contains(&i))
        })
    }

    /// Edge list CSV `region_id,neighbor_id`, one row per unordered pair.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("region_id,neighbor_id\n");
        for (i, ns) in self.neighbors.iter().enumerate() {
            for &j in ns.range(i + 1..) {
                out.push_str(&format!(
                    "{},{}\n",
                    csv_field(&self.region_ids[i]),
                    csv_field(&self.region_ids[j])
                ));
            }
        }
        out
    }
}

/// Reads a `region_id,neighbor_id` edge list; the graph is its symmetric
/// closure over `region_ids`.
pub fn load_adjacency_list(path: &Path, region_ids: &[String]) -> Result<AdjacencyGraph> {
    let mut g = AdjacencyGraph::new(region_ids.to_vec())?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.trim().is_empty() {
        return Ok(g);
    }
    let (header, rows) = read_csv(path)?;
    if header.len() < 2 || header[0] != "region_id" || header[1] != "neighbor_id" {
        return Err(Error::schema(
            path.display().to_string(),
            "header must be `region_id,neighbor_id`",
        ));
    }
    for (_, row) in rows {
        g.add_edge_by_id(&row[0], &row[1])?;
    }
    Ok(g)
}

pub type Point = [f64; 2];

/// Closed ring: first and last positions are equal.
pub type Ring = Vec<Point>;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFeature {
    pub region_id: String,
    /// Rings of every polygon part, exterior and interior alike.
    pub rings: Vec<Ring>,
    /// The original GeoJSON geometry, passed through to map outputs.
    pub geometry: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Boundaries {
    pub features: Vec<BoundaryFeature>,
}

impl Boundaries {
    pub fn region_ids(&self) -> Vec<String> {
        self.features.iter().map(|f| f.region_id.clone()).collect()
    }
}

pub fn load_boundaries(path: &Path) -> Result<Boundaries> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    parse_boundaries(&value)
}

pub fn parse_boundaries(value: &Value) -> Result<Boundaries> {
    let features = value
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::schema("boundaries", "expected a FeatureCollection with `features`"))?;
    let mut out: Vec<BoundaryFeature> = Vec::with_capacity(features.len());
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (k, f) in features.iter().enumerate() {
        let region_id = match f.get("properties").and_then(|p| p.get("region_id")) {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => {
                return Err(Error::Geometry {
                    feature: format!("#{k}"),
                    message: "missing `region_id` property".into(),
                })
            }
        };
        let geometry = f.get("geometry").cloned().unwrap_or(Value::Null);
        let rings = geometry_rings(&geometry).map_err(|message| Error::Geometry {
            feature: region_id.clone(),
            message,
        })?;
        // repeated ids are parts of the same region
        if let Some(&i) = seen.get(&region_id) {
            out[i].rings.extend(rings);
            continue;
        }
        seen.insert(region_id.clone(), out.len());
        out.push(BoundaryFeature {
            region_id,
            rings,
            geometry,
        });
    }
    Ok(Boundaries { features: out })
}

fn geometry_rings(geometry: &Value) -> std::result::Result<Vec<Ring>, String> {
    let kind = geometry
        .get("type")
        .and_then(Value::as_str)
        .ok_or("geometry without `type`")?;
    let coords = geometry.get("coordinates").ok_or("geometry without `coordinates`")?;
    let polygons: Vec<&Value> = match kind {
        "Polygon" => vec![coords],
        "MultiPolygon" => coords
            .as_array()
            .ok_or("MultiPolygon coordinates must be an array")?
            .iter()
            .collect(),
        other => return Err(format!("unsupported geometry type `{other}`")),
    };
    let mut rings = Vec::new();
    for poly in polygons {
        for ring in poly.as_array().ok_or("polygon must be an array of rings")? {
            rings.push(parse_ring(ring)?);
        }
    }
    if rings.is_empty() {
        return Err("geometry has no rings".into());
    }
    Ok(rings)
}

fn parse_ring(ring: &Value) -> std::result::Result<Ring, String> {
    let positions = ring.as_array().ok_or("ring must be an array of positions")?;
    let mut out = Vec::with_capacity(positions.len());
    for p in positions {
        let xy = p.as_array().ok_or("position must be an array")?;
        let x = xy.first().and_then(Value::as_f64);
        let y = xy.get(1).and_then(Value::as_f64);
        match (x, y) {
            (Some(x), Some(y)) if x.is_finite() && y.is_finite() => out.push([x, y]),
            _ => return Err("position needs two finite coordinates".into()),
        }
    }
    if out.len() < 4 {
        return Err(format!("ring has {} positions, need at least 4", out.len()));
    }
    if out.first() != out.last() {
        return Err("ring is not closed".into());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
struct BBox {
    min: Point,
    max: Point,
}

impl BBox {
    fn of(points: impl IntoIterator<Item = Point>) -> Self {
        let mut b = BBox {
            min: [f64::INFINITY; 2],
            max: [f64::NEG_INFINITY; 2],
        };
        for p in points {
            for (d, v) in p.iter().enumerate() {
                b.min[d] = b.min[d].min(*v);
                b.max[d] = b.max[d].max(*v);
            }
        }
        b
    }

    fn overlaps(&self, o: &BBox, tol: f64) -> bool {
        (0..2).all(|d| self.min[d] <= o.max[d] + tol && o.min[d] <= self.max[d] + tol)
    }
}

fn vertex_key(p: Point) -> (u64, u64) {
    // +0.0 folds -0.0 onto 0.0
    ((p[0] + 0.0).to_bits(), (p[1] + 0.0).to_bits())
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

/// Closed-segment intersection, touching endpoints included.
pub fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a[0] + t * dx, a[1] + t * dy);
    ((p[0] - qx).powi(2) + (p[1] - qy).powi(2)).sqrt()
}

pub fn segment_distance(a: Point, b: Point, c: Point, d: Point) -> f64 {
    if segments_intersect(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

type Segment = (Point, Point);

fn segments_of(rings: &[Ring]) -> Vec<Segment> {
    rings
        .iter()
        .flat_map(|r| r.windows(2).map(|w| (w[0], w[1])))
        .collect()
}

fn segment_bbox(s: &Segment) -> BBox {
    BBox::of([s.0, s.1])
}

fn touches(a: &[Segment], b: &[Segment], window: &BBox, tol: f64) -> bool {
    let near = |segs: &[Segment]| -> Vec<Segment> {
        segs.iter()
            .filter(|s| segment_bbox(s).overlaps(window, tol))
            .copied()
            .collect()
    };
    let (sa, sb) = (near(a), near(b));
    sa.iter().any(|&(p, q)| {
        let bb = BBox::of([p, q]);
        sb.iter().any(|&(r, s)| {
            bb.overlaps(&segment_bbox(&(r, s)), tol)
                && if tol > 0.0 {
                    segment_distance(p, q, r, s) <= tol
                } else {
                    segments_intersect(p, q, r, s)
                }
        })
    })
}

/// Queen contiguity: two regions are neighbors when their boundaries share
/// at least one point, either a common vertex or an edge-edge intersection.
/// `snap_tolerance` widens the intersection test to segments within that
/// distance; `0.0` means exact comparison.
pub fn build_adjacency_from_polygons(b: &Boundaries, snap_tolerance: f64) -> Result<AdjacencyGraph> {
    if !(snap_tolerance >= 0.0 && snap_tolerance.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "snap tolerance {snap_tolerance} must be finite and non-negative"
        )));
    }
    let mut g = AdjacencyGraph::new(b.region_ids())?;
    let n = b.features.len();
    let segs: Vec<Vec<Segment>> = b.features.iter().map(|f| segments_of(&f.rings)).collect();
    let boxes: Vec<BBox> = b
        .features
        .iter()
        .map(|f| BBox::of(f.rings.iter().flatten().copied()))
        .collect();

    let mut by_vertex: HashMap<(u64, u64), BTreeSet<usize>> = HashMap::new();
    for (i, f) in b.features.iter().enumerate() {
        for p in f.rings.iter().flatten() {
            by_vertex.entry(vertex_key(*p)).or_default().insert(i);
        }
    }
    for owners in by_vertex.values() {
        let owners: Vec<usize> = owners.iter().copied().collect();
        for (k, &i) in owners.iter().enumerate() {
            for &j in &owners[k + 1..] {
                g.add_edge(i, j)?;
            }
        }
    }

    for i in 0..n {
        for j in (i + 1)..n {
            if g.neighbors(i).contains(&j) || !boxes[i].overlaps(&boxes[j], snap_tolerance) {
                continue;
            }
            let window = BBox {
                min: [
                    boxes[i].min[0].max(boxes[j].min[0]),
                    boxes[i].min[1].max(boxes[j].min[1]),
                ],
                max: [
                    boxes[i].max[0].min(boxes[j].max[0]),
                    boxes[i].max[1].min(boxes[j].max[1]),
                ],
            };
            if touches(&segs[i], &segs[j], &window, snap_tolerance) {
                g.add_edge(i, j)?;
            }
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputationSource {
    NeighborMean,
    ColumnMean,
}

impl ImputationSource {
    pub fn as_str(self) -> &'static str {
        match self {
            ImputationSource::NeighborMean => "neighbor_mean",
            ImputationSource::ColumnMean => "column_mean",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationEntry {
    pub region_id: String,
    pub short_form: String,
    pub value: f64,
    pub source: ImputationSource,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImputationLog {
    pub entries: Vec<ImputationEntry>,
}

impl ImputationLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("region_id,short_form,value,source\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{}\n",
                csv_field(&e.region_id),
                csv_field(&e.short_form),
                format_f64(e.value),
                e.source.as_str()
            ));
        }
        out
    }
}

/// Order-independent mean: values are summed in ascending order.
fn sorted_mean(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Fills every missing cell with the mean of that variable over the
/// region's neighbors, using observed values only. Regions with no observed
/// neighbor fall back to the mean of all observed values in the column.
///
/// The graph may list regions absent from `d` (for example omitted ones);
/// those are ignored. Every region of `d` must be in the graph.
pub fn impute_neighbor_mean(d: &Dataset, g: &AdjacencyGraph) -> Result<(Dataset, ImputationLog)> {
    let to_graph: Vec<usize> = d
        .regions()
        .iter()
        .map(|r| {
            g.index_of(&r.region_id)
                .ok_or_else(|| Error::UnknownRegion(r.region_id.clone()))
        })
        .collect::<Result<_>>()?;
    let mut from_graph: HashMap<usize, usize> = HashMap::with_capacity(to_graph.len());
    for (i, &gi) in to_graph.iter().enumerate() {
        from_graph.insert(gi, i);
    }

    let mut out = d.clone();
    let mut log = ImputationLog::default();
    for j in 0..d.n_variables() {
        let col = d.column(j);
        if col.iter().all(Option::is_none) {
            if col.is_empty() {
                continue;
            }
            return Err(Error::Unimputable(d.variables()[j].short_form.clone()));
        }
        let mut column_mean: Option<f64> = None;
        for (i, cell) in col.iter().enumerate() {
            if cell.is_some() {
                continue;
            }
            let observed: Vec<f64> = g
                .neighbors(to_graph[i])
                .iter()
                .filter_map(|gj| from_graph.get(gj))
                .filter_map(|&k| col[k])
                .collect();
            let (value, source) = if observed.is_empty() {
                let m = *column_mean.get_or_insert_with(|| sorted_mean(col.iter().flatten().copied().collect()));
                (m, ImputationSource::ColumnMean)
            } else {
                (sorted_mean(observed), ImputationSource::NeighborMean)
            };
            out.set(i, j, Some(value));
            log.entries.push(ImputationEntry {
                region_id: d.regions()[i].region_id.clone(),
                short_form: d.variables()[j].short_form.clone(),
                value,
                source,
            });
        }
    }
    // row-major order for the log
    let row_of: HashMap<&str, usize> = d
        .regions()
        .iter()
        .enumerate()
        .map(|(i, r)| (r.region_id.as_str(), i))
        .collect();
    let col_of: HashMap<&str, usize> = d
        .variables()
        .iter()
        .enumerate()
        .map(|(j, v)| (v.short_form.as_str(), j))
        .collect();
    log.entries.sort_by_key(|e| (row_of[e.region_id.as_str()], col_of[e.short_form.as_str()]));
    Ok((out, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{RegionRecord, VariableMeta};
    use serde_json::json;

    fn square(x: f64, y: f64) -> Value {
        json!([[[x, y], [x + 1.0, y], [x + 1.0, y + 1.0], [x, y + 1.0], [x, y]]])
    }

    fn collection(polys: &[(&str, Value)]) -> Boundaries {
        let features: Vec<Value> = polys
            .iter()
            .map(|(id, coords)| {
                json!({"type": "Feature", "properties": {"region_id": id},
                       "geometry": {"type": "Polygon", "coordinates": coords}})
            })
            .collect();
        parse_boundaries(&json!({"type": "FeatureCollection", "features": features})).unwrap()
    }

    #[test]
    fn shared_edge_is_adjacent() {
        let g = build_adjacency_from_polygons(&collection(&[("A", square(0.0, 0.0)), ("B", square(1.0, 0.0))]), 0.0).unwrap();
        assert!(g.are_neighbors("A", "B"));
        assert!(g.are_neighbors("B", "A"));
    }

    #[test]
    fn corner_touch_is_adjacent() {
        let g = build_adjacency_from_polygons(&collection(&[("A", square(0.0, 0.0)), ("B", square(1.0, 1.0))]), 0.0).unwrap();
        assert!(g.are_neighbors("A", "B"));
    }

    #[test]
    fn disjoint_is_not_adjacent() {
        let g = build_adjacency_from_polygons(&collection(&[("A", square(0.0, 0.0)), ("B", square(2.0, 0.0))]), 0.0).unwrap();
        assert!(!g.are_neighbors("A", "B"));
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn t_junction_without_shared_vertex() {
        // B's corner lies in the middle of A's top edge
        let b = json!([[[0.5, 1.0], [2.0, 1.0], [2.0, 2.0], [0.5, 2.0], [0.5, 1.0]]]);
        let wide = json!([[[0.0, 0.0], [3.0, 0.0], [3.0, 1.0], [0.0, 1.0], [0.0, 0.0]]]);
        let g = build_adjacency_from_polygons(&collection(&[("A", wide), ("B", b)]), 0.0).unwrap();
        assert!(g.are_neighbors("A", "B"));
    }

    #[test]
    fn snap_tolerance_bridges_small_gaps() {
        let polys = [("A", square(0.0, 0.0)), ("B", square(1.001, 0.0))];
        let exact = build_adjacency_from_polygons(&collection(&polys), 0.0).unwrap();
        assert!(!exact.are_neighbors("A", "B"));
        let snapped = build_adjacency_from_polygons(&collection(&polys), 0.01).unwrap();
        assert!(snapped.are_neighbors("A", "B"));
    }

    #[test]
    fn grid_queen_neighbors() {
        let mut polys = Vec::new();
        let ids: Vec<String> = (0..9).map(|i| format!("C{i}")).collect();
        for (i, id) in ids.iter().enumerate() {
            polys.push((id.as_str(), square((i % 3) as f64, (i / 3) as f64)));
        }
        let g = build_adjacency_from_polygons(&collection(&polys), 0.0).unwrap();
        assert_eq!(g.neighbors(4).len(), 8);
        assert_eq!(g.neighbors(0).len(), 3);
        assert!(g.is_well_formed());
    }

    #[test]
    fn feature_without_id_or_unclosed_ring() {
        let v = json!({"type": "FeatureCollection", "features": [
            {"type": "Feature", "properties": {}, "geometry": {"type": "Polygon", "coordinates": square(0.0, 0.0)}}
        ]});
        assert!(matches!(parse_boundaries(&v), Err(Error::Geometry { .. })));
        let v = json!({"type": "FeatureCollection", "features": [
            {"type": "Feature", "properties": {"region_id": "A"},
             "geometry": {"type": "Polygon", "coordinates": [[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]]}}
        ]});
        assert!(matches!(parse_boundaries(&v), Err(Error::Geometry { .. })));
    }

    #[test]
    fn multipolygon_parts() {
        let v = json!({"type": "FeatureCollection", "features": [
            {"type": "Feature", "properties": {"region_id": "A"},
             "geometry": {"type": "MultiPolygon", "coordinates": [square(0.0, 0.0), square(5.0, 5.0)]}},
            {"type": "Feature", "properties": {"region_id": "B"},
             "geometry": {"type": "Polygon", "coordinates": square(6.0, 5.0)}}
        ]});
        let g = build_adjacency_from_polygons(&parse_boundaries(&v).unwrap(), 0.0).unwrap();
        assert!(g.are_neighbors("A", "B"));
    }

    #[test]
    fn adjacency_list_closure_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let ids: Vec<String> = vec!["A".into(), "B".into(), "C".into()];
        let p = dir.path().join("adj.csv");
        std::fs::write(&p, "region_id,neighbor_id\nA,B\n").unwrap();
        let g = load_adjacency_list(&p, &ids).unwrap();
        assert_eq!(g.neighbor_ids("A").unwrap(), vec!["B"]);
        assert_eq!(g.neighbor_ids("B").unwrap(), vec!["A"]);
        assert!(g.neighbor_ids("C").unwrap().is_empty());

        std::fs::write(&p, "").unwrap();
        assert_eq!(load_adjacency_list(&p, &ids).unwrap().edge_count(), 0);
        std::fs::write(&p, "region_id,neighbor_id\n").unwrap();
        assert_eq!(load_adjacency_list(&p, &ids).unwrap().edge_count(), 0);

        std::fs::write(&p, "region_id,neighbor_id\nA,A\n").unwrap();
        assert!(matches!(load_adjacency_list(&p, &ids), Err(Error::SelfLoop(_))));
        std::fs::write(&p, "region_id,neighbor_id\nA,Z\n").unwrap();
        assert!(matches!(load_adjacency_list(&p, &ids), Err(Error::UnknownRegion(_))));
    }

    fn dataset(ids: &[&str], col: Vec<Option<f64>>) -> Dataset {
        let regions = ids
            .iter()
            .map(|id| RegionRecord {
                region_id: id.to_string(),
                name: id.to_string(),
                state: None,
                remoteness: None,
                is_spatial: true,
            })
            .collect();
        Dataset::new(regions, vec![VariableMeta::new("V", "v")], col).unwrap()
    }

    fn graph(ids: &[&str], edges: &[(&str, &str)]) -> AdjacencyGraph {
        let mut g = AdjacencyGraph::new(ids.iter().map(|s| s.to_string()).collect()).unwrap();
        for (a, b) in edges {
            g.add_edge_by_id(a, b).unwrap();
        }
        g
    }

    #[test]
    fn neighbor_mean_fill() {
        let ids = ["R", "A", "B", "C"];
        let d = dataset(&ids, vec![None, Some(2.0), Some(4.0), Some(100.0)]);
        let g = graph(&ids, &[("R", "A"), ("R", "B")]);
        let (out, log) = impute_neighbor_mean(&d, &g).unwrap();
        assert_eq!(out.get(0, 0), Some(3.0));
        assert_eq!(log.entries.len(), 1);
        assert_eq!(log.entries[0].source, ImputationSource::NeighborMean);
    }

    #[test]
    fn isolated_region_uses_column_mean() {
        let ids = ["R", "A", "B"];
        let d = dataset(&ids, vec![None, Some(4.0), Some(10.0)]);
        let g = graph(&ids, &[("A", "B")]);
        let (out, log) = impute_neighbor_mean(&d, &g).unwrap();
        assert_eq!(out.get(0, 0), Some(7.0));
        assert_eq!(log.entries[0].source, ImputationSource::ColumnMean);
    }

    #[test]
    fn mutually_adjacent_missing_use_original_data_only() {
        // R1 and R2 are each other's only neighbor and both missing: neither
        // sees the other's fill, so both fall back to the column mean (5).
        let ids = ["R1", "R2", "A", "B"];
        let d = dataset(&ids, vec![None, None, Some(4.0), Some(6.0)]);
        let g = graph(&ids, &[("R1", "R2"), ("A", "B")]);
        let (out, log) = impute_neighbor_mean(&d, &g).unwrap();
        assert_eq!(out.get(0, 0), Some(5.0));
        assert_eq!(out.get(1, 0), Some(5.0));
        assert!(log.entries.iter().all(|e| e.source == ImputationSource::ColumnMean));
        assert_eq!(out.missing_count(), 0);
    }

    #[test]
    fn unimputable_and_uncovered() {
        let ids = ["A", "B"];
        let d = dataset(&ids, vec![None, None]);
        assert!(matches!(
            impute_neighbor_mean(&d, &graph(&ids, &[])),
            Err(Error::Unimputable(_))
        ));
        let d = dataset(&ids, vec![Some(1.0), None]);
        assert!(matches!(
            impute_neighbor_mean(&d, &graph(&["A"], &[])),
            Err(Error::UnknownRegion(_))
        ));
    }

    #[test]
    fn neighbors_outside_dataset_are_ignored() {
        let d = dataset(&["A", "B"], vec![None, Some(3.0)]);
        let g = graph(&["A", "B", "GONE"], &[("A", "GONE")]);
        let (out, log) = impute_neighbor_mean(&d, &g).unwrap();
        assert_eq!(out.get(0, 0), Some(3.0));
        assert_eq!(log.entries[0].source, ImputationSource::ColumnMean);
    }
}
