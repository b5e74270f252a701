//! Training-free fingerprint map.
//!
//! Every grid cell is labelled with its *location sequence*: the AP ids
//! ordered by straight-line distance from the cell centroid, nearest first.
//! The map only needs AP positions, so it can be rebuilt at any time without
//! a site survey.

use std::cmp::Ordering;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Bounds, Point2D};

/// Identifier of an access point. Ascending id order is the canonical AP order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ApId(pub u32);

impl fmt::Display for ApId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "ApRecord", into = "ApRecord")]
pub struct AccessPoint {
    pub id: ApId,
    pub position: Point2D,
}

impl AccessPoint {
    pub fn new(id: u32, x: f64, y: f64) -> Self {
        Self {
            id: ApId(id),
            position: Point2D::new(x, y),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ApRecord {
    id: u32,
    x: f64,
    y: f64,
}

impl From<ApRecord> for AccessPoint {
    fn from(r: ApRecord) -> Self {
        AccessPoint::new(r.id, r.x, r.y)
    }
}

impl From<AccessPoint> for ApRecord {
    fn from(ap: AccessPoint) -> Self {
        ApRecord {
            id: ap.id.0,
            x: ap.position.x,
            y: ap.position.y,
        }
    }
}

/// Validates a deployment: at least two APs, unique ids, finite positions.
pub fn validate_aps(aps: &[AccessPoint]) -> Result<()> {
    if aps.len() < 2 {
        return Err(Error::config(format!(
            "need at least 2 access points, got {}",
            aps.len()
        )));
    }
    let mut ids: Vec<ApId> = aps.iter().map(|ap| ap.id).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::config("duplicate access point id"));
    }
    if let Some(ap) = aps.iter().find(|ap| !ap.position.is_finite()) {
        return Err(Error::config(format!(
            "AP {} has a non-finite position",
            ap.id
        )));
    }
    Ok(())
}

/// Ordered list of AP ids without duplicates.
///
/// Used both for location sequences (ranked by distance) and RSS sequences
/// (ranked by signal strength).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<ApId>", into = "Vec<ApId>")]
pub struct ApSequence(Vec<ApId>);

impl ApSequence {
    pub fn new(ids: Vec<ApId>) -> Result<Self> {
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::SequenceDomain(format!(
                "duplicate id in sequence {ids:?}"
            )));
        }
        Ok(Self(ids))
    }

    pub fn from_ids(ids: &[u32]) -> Result<Self> {
        Self::new(ids.iter().copied().map(ApId).collect())
    }

    pub fn ids(&self) -> &[ApId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, id: ApId) -> bool {
        self.0.contains(&id)
    }

    pub fn position_of(&self, id: ApId) -> Option<usize> {
        self.0.iter().position(|&x| x == id)
    }

    pub fn reversed(&self) -> Self {
        Self(self.0.iter().rev().copied().collect())
    }
}

impl TryFrom<Vec<ApId>> for ApSequence {
    type Error = Error;

    fn try_from(ids: Vec<ApId>) -> Result<Self> {
        Self::new(ids)
    }
}

impl From<ApSequence> for Vec<ApId> {
    fn from(s: ApSequence) -> Self {
        s.0
    }
}

impl fmt::Display for ApSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, id) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{id}")?;
        }
        Ok(())
    }
}

/// Ranks APs by Euclidean distance from `p`, nearest first. Equal distances
/// fall back to ascending id so the order is total.
pub fn location_sequence(p: Point2D, aps: &[AccessPoint]) -> Result<ApSequence> {
    if aps.len() < 2 {
        return Err(Error::config(format!(
            "location sequence needs at least 2 APs, got {}",
            aps.len()
        )));
    }
    if !p.is_finite() {
        return Err(Error::config(format!("non-finite query point {p:?}")));
    }
    let mut ranked: Vec<(f64, ApId)> = aps
        .iter()
        .map(|ap| (p.distance_sq(&ap.position), ap.id))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    ApSequence::new(ranked.into_iter().map(|(_, id)| id).collect())
}

/// One grid tile of the map: its centroid and the location sequence there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "CellRecord", into = "CellRecord")]
pub struct Cell {
    pub anchor: Point2D,
    pub sequence: ApSequence,
}

#[derive(Serialize, Deserialize)]
struct CellRecord {
    cx: f64,
    cy: f64,
    sequence: ApSequence,
}

impl From<CellRecord> for Cell {
    fn from(r: CellRecord) -> Self {
        Cell {
            anchor: Point2D::new(r.cx, r.cy),
            sequence: r.sequence,
        }
    }
}

impl From<Cell> for CellRecord {
    fn from(c: Cell) -> Self {
        CellRecord {
            cx: c.anchor.x,
            cy: c.anchor.y,
            sequence: c.sequence,
        }
    }
}

/// Grid fingerprint map. Immutable once built; share it behind an `Arc`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MapFile", into = "MapFile")]
pub struct FingerprintMap {
    aps: Vec<AccessPoint>,
    bounds: Bounds,
    grid_size: f64,
    cols: usize,
    rows: usize,
    cells: Vec<Cell>,
}

#[derive(Serialize, Deserialize)]
struct MapFile {
    aps: Vec<AccessPoint>,
    bounds: Bounds,
    grid_size: f64,
    cells: Vec<Cell>,
}

impl TryFrom<MapFile> for FingerprintMap {
    type Error = Error;

    fn try_from(f: MapFile) -> Result<Self> {
        validate_aps(&f.aps)?;
        f.bounds.validate()?;
        let (cols, rows) = grid_dims(&f.bounds, f.grid_size)?;
        if f.cells.len() != cols * rows {
            return Err(Error::config(format!(
                "map has {} cells, grid implies {}",
                f.cells.len(),
                cols * rows
            )));
        }
        for (i, cell) in f.cells.iter().enumerate() {
            if cell.sequence.len() != f.aps.len()
                || !f.aps.iter().all(|ap| cell.sequence.contains(ap.id))
            {
                return Err(Error::config(format!(
                    "cell {i} sequence is not a permutation of the deployment's AP ids"
                )));
            }
            if !f.bounds.contains(&cell.anchor) {
                return Err(Error::config(format!(
                    "cell {i} anchor lies outside bounds"
                )));
            }
        }
        Ok(FingerprintMap {
            aps: f.aps,
            bounds: f.bounds,
            grid_size: f.grid_size,
            cols,
            rows,
            cells: f.cells,
        })
    }
}

impl From<FingerprintMap> for MapFile {
    fn from(m: FingerprintMap) -> Self {
        MapFile {
            aps: m.aps,
            bounds: m.bounds,
            grid_size: m.grid_size,
            cells: m.cells,
        }
    }
}

// Tolerance so that e.g. 1.1 / 0.1 does not round up to 12 tiles.
const TILE_EPS: f64 = 1e-9;

fn grid_dims(bounds: &Bounds, grid_size: f64) -> Result<(usize, usize)> {
    if !(grid_size > 0.0 && grid_size.is_finite()) {
        return Err(Error::config(format!(
            "grid size must be > 0, got {grid_size}"
        )));
    }
    let cols = (bounds.width() / grid_size - TILE_EPS).ceil().max(0.0) as usize;
    let rows = (bounds.height() / grid_size - TILE_EPS).ceil().max(0.0) as usize;
    if cols == 0 || rows == 0 {
        return Err(Error::config("grid produces zero cells"));
    }
    Ok((cols, rows))
}

/// Tiles `bounds` with square cells of side `grid_size` and labels each cell
/// with the location sequence of its centroid. Partial tiles along the max
/// edges keep their true (clipped) centroid.
pub fn build_map(bounds: Bounds, grid_size: f64, aps: &[AccessPoint]) -> Result<FingerprintMap> {
    bounds.validate()?;
    validate_aps(aps)?;
    let (cols, rows) = grid_dims(&bounds, grid_size)?;

    let mut cells = Vec::with_capacity(cols * rows);
    for row in 0..rows {
        let y0 = bounds.min_y + row as f64 * grid_size;
        let y1 = (y0 + grid_size).min(bounds.max_y);
        for col in 0..cols {
            let x0 = bounds.min_x + col as f64 * grid_size;
            let x1 = (x0 + grid_size).min(bounds.max_x);
            let anchor = Point2D::new(0.5 * (x0 + x1), 0.5 * (y0 + y1));
            cells.push(Cell {
                anchor,
                sequence: location_sequence(anchor, aps)?,
            });
        }
    }

    let mut aps = aps.to_vec();
    aps.sort_by_key(|ap| ap.id);
    Ok(FingerprintMap {
        aps,
        bounds,
        grid_size,
        cols,
        rows,
        cells,
    })
}

impl FingerprintMap {
    pub fn aps(&self) -> &[AccessPoint] {
        &self.aps
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn grid_size(&self) -> f64 {
        self.grid_size
    }

    /// (columns, rows) of the grid.
    pub fn dims(&self) -> (usize, usize) {
        (self.cols, self.rows)
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Row-major index of the cell containing `p`, or `None` outside bounds.
    /// Points on an interior tile edge belong to the tile above/right of it.
    pub fn cell_index(&self, p: &Point2D) -> Option<usize> {
        if !self.bounds.contains(p) {
            return None;
        }
        let col = ((p.x - self.bounds.min_x) / self.grid_size).floor() as usize;
        let row = ((p.y - self.bounds.min_y) / self.grid_size).floor() as usize;
        Some(row.min(self.rows - 1) * self.cols + col.min(self.cols - 1))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// The `k` cells whose sequences are most similar to `seq`, best first.
///
/// Cells for which `sim` fails (e.g. too little AP overlap) are passed over;
/// if every cell fails, the last error is returned. Equal similarities are
/// ordered by row-major cell index. Fewer than `k` results are returned only
/// when fewer cells produced a score.
pub fn nearest_cells<F>(
    map: &FingerprintMap,
    seq: &ApSequence,
    k: usize,
    sim: F,
) -> Result<Vec<(usize, f64)>>
where
    F: Fn(&ApSequence, &ApSequence) -> Result<f64>,
{
    if k == 0 || k > map.len() {
        return Err(Error::config(format!(
            "k must be in 1..={}, got {k}",
            map.len()
        )));
    }
    let mut scored = Vec::with_capacity(map.len());
    let mut last_err = None;
    for (i, cell) in map.cells.iter().enumerate() {
        match sim(seq, &cell.sequence) {
            Ok(s) => scored.push((i, s)),
            Err(e) => last_err = Some(e),
        }
    }
    if scored.is_empty() {
        return Err(last_err.unwrap_or_else(|| Error::config("map has no cells")));
    }
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    scored.truncate(k);
    Ok(scored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::similarity::sim;

    fn corners() -> Vec<AccessPoint> {
        vec![
            AccessPoint::new(1, 0.0, 0.0),
            AccessPoint::new(2, 10.0, 0.0),
            AccessPoint::new(3, 0.0, 10.0),
            AccessPoint::new(4, 10.0, 10.0),
        ]
    }

    fn ids(seq: &ApSequence) -> Vec<u32> {
        seq.ids().iter().map(|id| id.0).collect()
    }

    #[test]
    fn point_near_ap1_ties_break_by_id() {
        let s = location_sequence(Point2D::new(1.0, 1.0), &corners()).unwrap();
        assert_eq!(ids(&s), vec![1, 2, 3, 4]);
    }

    #[test]
    fn point_near_ap2_with_tie() {
        // d2 = sqrt(2), d1 = d4 = sqrt(82), d3 = sqrt(162)
        let s = location_sequence(Point2D::new(9.0, 1.0), &corners()).unwrap();
        assert_eq!(ids(&s), vec![2, 1, 4, 3]);
    }

    #[test]
    fn four_corner_aps_rank_by_distance() {
        // A sits closest to AP3, then AP4, AP2, AP1.
        let aps = vec![
            AccessPoint::new(1, 0.0, 0.0),
            AccessPoint::new(2, 8.0, 0.0),
            AccessPoint::new(3, 2.0, 8.0),
            AccessPoint::new(4, 8.0, 8.0),
        ];
        let s = location_sequence(Point2D::new(4.5, 6.5), &aps).unwrap();
        assert_eq!(ids(&s), vec![3, 4, 2, 1]);
    }

    #[test]
    fn fewer_than_two_aps_is_config_error() {
        let err = location_sequence(Point2D::new(0.0, 0.0), &corners()[..1]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn grid_counts_use_ceiling_division() {
        let b = Bounds::new(0.0, 0.0, 25.0, 14.0).unwrap();
        assert_eq!(build_map(b, 2.0, &corners()).unwrap().len(), 91);
        assert_eq!(build_map(b, 1.0, &corners()).unwrap().len(), 350);
        let small = Bounds::new(0.0, 0.0, 1.1, 0.7).unwrap();
        assert_eq!(build_map(small, 0.1, &corners()).unwrap().dims(), (11, 7));
    }

    #[test]
    fn edge_cells_keep_true_centroid() {
        let b = Bounds::new(0.0, 0.0, 25.0, 14.0).unwrap();
        let m = build_map(b, 2.0, &corners()).unwrap();
        let last_in_row = &m.cells()[12];
        assert!((last_in_row.anchor.x - 24.5).abs() < 1e-12);
        assert!((last_in_row.anchor.y - 1.0).abs() < 1e-12);
        assert!(m.cells().iter().all(|c| b.contains(&c.anchor)));
    }

    #[test]
    fn corner_map_cells_start_with_nearest_corner() {
        let aps = vec![
            AccessPoint::new(1, 0.0, 0.0),
            AccessPoint::new(2, 4.0, 0.0),
            AccessPoint::new(3, 0.0, 4.0),
            AccessPoint::new(4, 4.0, 4.0),
        ];
        let m = build_map(Bounds::new(0.0, 0.0, 4.0, 4.0).unwrap(), 2.0, &aps).unwrap();
        let firsts: Vec<u32> = m.cells().iter().map(|c| c.sequence.ids()[0].0).collect();
        assert_eq!(firsts, vec![1, 2, 3, 4]);
    }

    #[test]
    fn zero_grid_is_rejected() {
        let b = Bounds::new(0.0, 0.0, 4.0, 4.0).unwrap();
        assert!(build_map(b, 0.0, &corners()).is_err());
        assert!(build_map(b, -1.0, &corners()).is_err());
    }

    #[test]
    fn nearest_cells_identity_and_full_sort() {
        let b = Bounds::new(0.0, 0.0, 10.0, 10.0).unwrap();
        let m = build_map(b, 2.0, &corners()).unwrap();
        let target = m.cells()[7].sequence.clone();
        let top = nearest_cells(&m, &target, 1, sim).unwrap();
        assert_eq!(top[0].1, 1.0);
        assert_eq!(m.cells()[top[0].0].sequence, target);

        let all = nearest_cells(&m, &target, m.len(), sim).unwrap();
        assert_eq!(all.len(), m.len());
        assert!(all
            .windows(2)
            .all(|w| w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0)));
    }

    #[test]
    fn nearest_cells_matches_exhaustive_scan() {
        let aps = vec![
            AccessPoint::new(1, 0.0, 0.0),
            AccessPoint::new(2, 4.0, 0.0),
            AccessPoint::new(3, 0.0, 4.0),
            AccessPoint::new(4, 4.0, 4.0),
        ];
        let m = build_map(Bounds::new(0.0, 0.0, 4.0, 4.0).unwrap(), 1.0, &aps).unwrap();
        let q = ApSequence::from_ids(&[1, 2, 3, 4]).unwrap();

        // oracle: score every cell, then pick best two by repeated max scan
        let mut scores: Vec<(usize, f64)> = m
            .cells()
            .iter()
            .enumerate()
            .map(|(i, c)| (i, sim(&q, &c.sequence).unwrap()))
            .collect();
        let mut expected = Vec::new();
        for _ in 0..2 {
            let mut best = 0;
            for j in 1..scores.len() {
                if scores[j].1 > scores[best].1 {
                    best = j;
                }
            }
            expected.push(scores.remove(best));
        }
        assert_eq!(nearest_cells(&m, &q, 2, sim).unwrap(), expected);
    }

    #[test]
    fn nearest_cells_rejects_bad_k() {
        let b = Bounds::new(0.0, 0.0, 4.0, 4.0).unwrap();
        let m = build_map(b, 2.0, &corners()).unwrap();
        let q = m.cells()[0].sequence.clone();
        assert!(nearest_cells(&m, &q, 0, sim).is_err());
        assert!(nearest_cells(&m, &q, 5, sim).is_err());
    }

    #[test]
    fn cell_index_covers_bounds() {
        let b = Bounds::new(0.0, 0.0, 25.0, 14.0).unwrap();
        let m = build_map(b, 2.0, &corners()).unwrap();
        assert_eq!(m.cell_index(&Point2D::new(0.0, 0.0)), Some(0));
        assert_eq!(m.cell_index(&Point2D::new(25.0, 14.0)), Some(90));
        assert_eq!(m.cell_index(&Point2D::new(24.9, 0.1)), Some(12));
        assert_eq!(m.cell_index(&Point2D::new(-0.1, 3.0)), None);
    }

    #[test]
    fn map_file_round_trip_and_field_names() {
        let b = Bounds::new(0.0, 0.0, 4.0, 4.0).unwrap();
        let m = build_map(b, 2.0, &corners()).unwrap();
        let v = serde_json::to_value(&m).unwrap();
        assert_eq!(v["aps"][0]["id"], 1);
        assert_eq!(v["bounds"]["max_x"], 4.0);
        assert_eq!(v["grid_size"], 2.0);
        assert_eq!(v["cells"][0]["cx"], 1.0);
        assert_eq!(v["cells"][0]["sequence"].as_array().unwrap().len(), 4);
        let back: FingerprintMap = serde_json::from_value(v).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn map_file_with_wrong_cell_count_is_rejected() {
        let b = Bounds::new(0.0, 0.0, 4.0, 4.0).unwrap();
        let m = build_map(b, 2.0, &corners()).unwrap();
        let mut v = serde_json::to_value(&m).unwrap();
        v["cells"].as_array_mut().unwrap().pop();
        assert!(serde_json::from_value::<FingerprintMap>(v).is_err());
    }
}
