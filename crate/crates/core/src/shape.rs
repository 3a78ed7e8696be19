//! Rescaled-shape extraction and comparison.
//!
//! Clusters and analytic regions are brought to a common normalization
//! (unit area, source at the origin, no rotational or translational
//! registration) and compared by the symmetric-difference fraction of a
//! common rasterization and by the Hausdorff distance between boundary
//! polylines. The lattice quarter-plane models grow around the diagonal
//! while the analytic quarter-angle region is bisected by the positive
//! x-axis; [`canonical_rotation`] returns the fixed frame rotation that
//! aligns the two conventions.

use crate::defaults::{RASTER_GRID, RASTER_STABLE_TOL};
use crate::error::{Error, Result};
use crate::lattice::{connected_components, AngleSides, BoundaryCondition, LatticeCluster, Site};
use crate::maps::{boundary_sample, ConformalMap};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::io::Write;

pub type Point = [f64; 2];

/// A closed boundary polyline normalized to unit enclosed area, anchored at
/// the source frame (no registration).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormalizedShape {
    /// Closed polyline (last point connects back to the first).
    pub boundary: Vec<Point>,
    /// Enclosed area after normalization (1 up to roundoff).
    pub area: f64,
    pub origin_inside: bool,
}

pub fn polygon_area(points: &[Point]) -> f64 {
    let n = points.len();
    let mut twice = 0.0;
    for i in 0..n {
        let [x1, y1] = points[i];
        let [x2, y2] = points[(i + 1) % n];
        twice += x1 * y2 - x2 * y1;
    }
    twice / 2.0
}

fn bounding_box(points: &[Point]) -> (Point, Point) {
    let mut lo = [f64::INFINITY, f64::INFINITY];
    let mut hi = [f64::NEG_INFINITY, f64::NEG_INFINITY];
    for p in points {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (lo, hi)
}

/// Even-odd point-in-polygon test; the query point is nudged off any edge
/// so vertex hits do not flip parity.
pub fn point_in_polygon(p: Point, poly: &[Point]) -> bool {
    let (px, py) = (p[0] + 1.0e-12, p[1] + 3.0e-13);
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let [x1, y1] = poly[i];
        let [x2, y2] = poly[(i + 1) % n];
        if (y1 <= py) != (y2 <= py) {
            let x_cross = x1 + (py - y1) * (x2 - x1) / (y2 - y1);
            if px < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

impl NormalizedShape {
    fn from_raw_boundary(mut boundary: Vec<Point>) -> Result<NormalizedShape> {
        let raw_area = polygon_area(&boundary).abs();
        if raw_area <= 0.0 {
            return Err(Error::domain("normalize", "degenerate boundary with zero area"));
        }
        let s = raw_area.sqrt().recip();
        for p in &mut boundary {
            p[0] *= s;
            p[1] *= s;
        }
        let area = polygon_area(&boundary).abs();
        let origin_inside = point_in_polygon([0.0, 0.0], &boundary);
        Ok(NormalizedShape { boundary, area, origin_inside })
    }

    /// Rigid rotation about the origin.
    pub fn rotate(&self, angle: f64) -> NormalizedShape {
        let (s, c) = angle.sin_cos();
        let boundary = self
            .boundary
            .iter()
            .map(|&[x, y]| [c * x - s * y, s * x + c * y])
            .collect();
        NormalizedShape { boundary, area: self.area, origin_inside: self.origin_inside }
    }

    /// Rigid translation (for invariance tests; comparisons assume the
    /// source-at-origin frame).
    pub fn translate(&self, dx: f64, dy: f64) -> NormalizedShape {
        let boundary = self.boundary.iter().map(|&[x, y]| [x + dx, y + dy]).collect();
        NormalizedShape { boundary, area: self.area, origin_inside: self.origin_inside }
    }

    /// True when some pair of non-adjacent segments properly crosses
    /// (collinear overlaps, like a slit traversed both ways, are allowed).
    pub fn has_proper_crossings(&self) -> bool {
        let pts = &self.boundary;
        let n = pts.len();
        let seg = |i: usize| (pts[i], pts[(i + 1) % n]);
        let orient = |a: Point, b: Point, c: Point| -> f64 {
            (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        };
        for i in 0..n {
            let (a1, a2) = seg(i);
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (b1, b2) = seg(j);
                let d1 = orient(a1, a2, b1);
                let d2 = orient(a1, a2, b2);
                let d3 = orient(b1, b2, a1);
                let d4 = orient(b1, b2, a2);
                if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
                    return true;
                }
            }
        }
        false
    }
}

// ---------------------------------------------------------------------------
// Cluster contour tracing.
// ---------------------------------------------------------------------------

/// Trace the boundary loops of a union of unit cells centered at the given
/// sites. Loops are stitched so that touching corners split rather than
/// cross; the outer contour is the loop of largest absolute area.
///
/// Corner coordinates: cell (x, y) spans corners (x, y)..(x+1, y+1), where
/// corner (i, j) sits at the physical point (i − 1/2, j − 1/2).
pub fn trace_cell_union(sites: &[Site]) -> Vec<Vec<Point>> {
    let cells: HashSet<Site> = sites.iter().copied().collect();
    // Directed CCW boundary edges: interior on the left. An edge between
    // two occupied cells appears in both directions and cancels.
    let mut edges: HashSet<(Site, Site)> = HashSet::new();
    for &(x, y) in &cells {
        let corners = [(x, y), (x + 1, y), (x + 1, y + 1), (x, y + 1)];
        let neighbors = [(x, y - 1), (x + 1, y), (x, y + 1), (x - 1, y)];
        for k in 0..4 {
            if !cells.contains(&neighbors[k]) {
                edges.insert((corners[k], corners[(k + 1) % 4]));
            }
        }
    }
    let mut outgoing: HashMap<Site, Vec<Site>> = HashMap::new();
    for &(from, to) in &edges {
        outgoing.entry(from).or_default().push(to);
    }
    for v in outgoing.values_mut() {
        v.sort_unstable(); // deterministic stitching
    }

    let mut used: HashSet<(Site, Site)> = HashSet::new();
    let mut loops = Vec::new();
    let mut starts: Vec<(Site, Site)> = edges.iter().copied().collect();
    starts.sort_unstable();
    for start in starts {
        if used.contains(&start) {
            continue;
        }
        let mut corners: Vec<Site> = vec![start.0];
        let (mut from, mut to) = start;
        used.insert(start);
        loop {
            corners.push(to);
            if to == start.0 {
                break; // loop closed
            }
            let dir = (to.0 - from.0, to.1 - from.1);
            let options = &outgoing[&to];
            // prefer the sharpest left turn so touching corners pinch off
            let left = (to.0 - dir.1, to.1 + dir.0);
            let straight = (to.0 + dir.0, to.1 + dir.1);
            let right = (to.0 + dir.1, to.1 - dir.0);
            let next = [left, straight, right]
                .into_iter()
                .find(|cand| options.contains(cand) && !used.contains(&(to, *cand)));
            match next {
                Some(n) => {
                    used.insert((to, n));
                    from = to;
                    to = n;
                }
                None => break, // defensive: open chain (cannot happen)
            }
            if corners.len() > 4 * edges.len() + 8 {
                break; // defensive: malformed edge set
            }
        }
        // drop the duplicated closing corner
        if corners.last() == corners.first() {
            corners.pop();
        }
        loops.push(
            corners
                .into_iter()
                .map(|(i, j)| [i as f64 - 0.5, j as f64 - 0.5])
                .collect::<Vec<Point>>(),
        );
    }
    loops
}

/// Outer contour of the cell union (largest-area loop).
pub fn outer_contour(sites: &[Site]) -> Result<Vec<Point>> {
    let loops = trace_cell_union(sites);
    loops
        .into_iter()
        .max_by(|a, b| {
            polygon_area(a)
                .abs()
                .partial_cmp(&polygon_area(b).abs())
                .unwrap()
        })
        .ok_or_else(|| Error::domain("outer_contour", "empty cluster"))
}

/// Normalize a cluster: trace the outer contour of its cell union and
/// rescale to unit enclosed area.
///
/// The rescaling divides by the square root of the traced polygon area
/// rather than exactly √N, so the unit-area invariant holds exactly even
/// when the cluster has interior holes (the two differ by O(holes/N)).
pub fn normalize_cluster(cluster: &LatticeCluster) -> Result<NormalizedShape> {
    if cluster.n() < 100 {
        return Err(Error::param("cluster", "need at least 100 sites to trace a boundary"));
    }
    let components = connected_components(cluster.sites());
    if components != 1 {
        return Err(Error::Disconnected { n_components: components });
    }
    NormalizedShape::from_raw_boundary(outer_contour(cluster.sites())?)
}

/// Normalize an analytic region: boundary polyline at `n` arc samples,
/// rescaled to unit polygon area.
pub fn normalize_map_region(map: &ConformalMap, n: usize) -> Result<NormalizedShape> {
    if n < 256 {
        return Err(Error::param("n", "need at least 256 boundary samples"));
    }
    let pts = boundary_sample(map, n)?;
    let boundary: Vec<Point> = pts.iter().map(|p| [p.z.re, p.z.im]).collect();
    NormalizedShape::from_raw_boundary(boundary)
}

/// Fixed frame rotation applied to a cluster before comparing it with the
/// analytic region for its boundary condition: the lattice quarter plane is
/// bisected by the diagonal, the quarter-angle region by the positive
/// x-axis, so that cluster is rotated by −π/4. Every other condition shares
/// the analytic frame already.
pub fn canonical_rotation(bc: &BoundaryCondition) -> f64 {
    match bc {
        BoundaryCondition::KillAngleSides(AngleSides::Quarter) => -std::f64::consts::FRAC_PI_4,
        _ => 0.0,
    }
}

// ---------------------------------------------------------------------------
// Metrics.
// ---------------------------------------------------------------------------

fn fill_mask(poly: &[Point], lo: Point, cell: f64, nx: usize, ny: usize, mask: &mut [bool]) {
    mask.iter_mut().for_each(|m| *m = false);
    let n = poly.len();
    for row in 0..ny {
        let yc = lo[1] + (row as f64 + 0.5) * cell;
        let mut crossings: Vec<f64> = Vec::new();
        for i in 0..n {
            let [x1, y1] = poly[i];
            let [x2, y2] = poly[(i + 1) % n];
            if (y1 <= yc) != (y2 <= yc) {
                crossings.push(x1 + (yc - y1) * (x2 - x1) / (y2 - y1));
            }
        }
        crossings.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let row_base = row * nx;
        let mut k = 0;
        while k + 1 < crossings.len() {
            let (xa, xb) = (crossings[k], crossings[k + 1]);
            let ia = ((xa - lo[0]) / cell - 0.5).ceil().max(0.0) as usize;
            let ib = ((xb - lo[0]) / cell - 0.5).floor();
            if ib >= 0.0 {
                for ix in ia..=(ib as usize).min(nx - 1) {
                    mask[row_base + ix] = true;
                }
            }
            k += 2;
        }
    }
}

fn sym_diff_at_grid(a: &NormalizedShape, b: &NormalizedShape, grid: usize) -> f64 {
    let (lo_a, hi_a) = bounding_box(&a.boundary);
    let (lo_b, hi_b) = bounding_box(&b.boundary);
    let lo = [lo_a[0].min(lo_b[0]) - 1e-3, lo_a[1].min(lo_b[1]) - 1e-3];
    let hi = [hi_a[0].max(hi_b[0]) + 1e-3, hi_a[1].max(hi_b[1]) + 1e-3];
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let cell = span / grid as f64;
    let nx = ((hi[0] - lo[0]) / cell).ceil() as usize + 1;
    let ny = ((hi[1] - lo[1]) / cell).ceil() as usize + 1;
    let mut mask_a = vec![false; nx * ny];
    let mut mask_b = vec![false; nx * ny];
    fill_mask(&a.boundary, lo, cell, nx, ny, &mut mask_a);
    fill_mask(&b.boundary, lo, cell, nx, ny, &mut mask_b);
    let count = mask_a.iter().zip(&mask_b).filter(|&(&xa, &xb)| xa != xb).count();
    count as f64 * cell * cell
}

/// Area of the symmetric difference between two unit-area shapes, by
/// rasterization on a common grid, refined until stable. Ranges over
/// [0, 2]; 0 iff the shapes coincide at raster resolution.
pub fn symmetric_difference_fraction(a: &NormalizedShape, b: &NormalizedShape) -> f64 {
    let mut grid = RASTER_GRID / 2;
    let mut prev = sym_diff_at_grid(a, b, grid);
    loop {
        grid *= 2;
        let next = sym_diff_at_grid(a, b, grid);
        if (next - prev).abs() < RASTER_STABLE_TOL || grid >= 4 * RASTER_GRID {
            return next;
        }
        prev = next;
    }
}

fn dist_point_segment(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (a[0] + t * dx, a[1] + t * dy);
    ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt()
}

/// Vertices plus edge midpoints of a closed polyline.
fn sample_points(poly: &[Point]) -> Vec<Point> {
    let n = poly.len();
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        let [x1, y1] = poly[i];
        let [x2, y2] = poly[(i + 1) % n];
        out.push([x1, y1]);
        out.push([0.5 * (x1 + x2), 0.5 * (y1 + y2)]);
    }
    out
}

/// Coarse spatial index over the segments of a closed polyline for
/// nearest-distance queries.
struct SegmentGrid<'a> {
    poly: &'a [Point],
    lo: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl<'a> SegmentGrid<'a> {
    fn new(poly: &'a [Point]) -> SegmentGrid<'a> {
        let (lo, hi) = bounding_box(poly);
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
        let nx = 64usize;
        let ny = 64usize;
        let cell = span / nx as f64;
        let mut buckets = vec![Vec::new(); nx * ny];
        let clampi = |v: f64, n: usize| (v.max(0.0) as usize).min(n - 1);
        for i in 0..poly.len() {
            let a = poly[i];
            let b = poly[(i + 1) % poly.len()];
            let x0 = clampi((a[0].min(b[0]) - lo[0]) / cell, nx);
            let x1 = clampi((a[0].max(b[0]) - lo[0]) / cell, nx);
            let y0 = clampi((a[1].min(b[1]) - lo[1]) / cell, ny);
            let y1 = clampi((a[1].max(b[1]) - lo[1]) / cell, ny);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    buckets[y * nx + x].push(i as u32);
                }
            }
        }
        SegmentGrid { poly, lo, cell, nx, ny, buckets }
    }

    fn distance(&self, p: Point) -> f64 {
        let n = self.poly.len();
        let cx = (((p[0] - self.lo[0]) / self.cell).max(0.0) as usize).min(self.nx - 1);
        let cy = (((p[1] - self.lo[1]) / self.cell).max(0.0) as usize).min(self.ny - 1);
        let mut best = f64::INFINITY;
        let mut ring = 0usize;
        loop {
            let x0 = cx.saturating_sub(ring);
            let x1 = (cx + ring).min(self.nx - 1);
            let y0 = cy.saturating_sub(ring);
            let y1 = (cy + ring).min(self.ny - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    // only the newly added ring
                    if ring > 0 && x != x0 && x != x1 && y != y0 && y != y1 {
                        continue;
                    }
                    for &i in &self.buckets[y * self.nx + x] {
                        let a = self.poly[i as usize];
                        let b = self.poly[(i as usize + 1) % n];
                        best = best.min(dist_point_segment(p, a, b));
                    }
                }
            }
            // anything outside the searched rings is at least (ring−1)·cell
            // away from p, so the current best cannot be beaten
            if best.is_finite() && ring >= 1 && best <= (ring - 1) as f64 * self.cell {
                return best;
            }
            if ring > self.nx + self.ny {
                return best;
            }
            ring += 1;
        }
    }
}

/// Symmetric Hausdorff distance between two boundary polylines: vertices
/// plus edge midpoints of each, measured against the other's segments.
pub fn hausdorff_distance(a: &NormalizedShape, b: &NormalizedShape) -> f64 {
    let grid_a = SegmentGrid::new(&a.boundary);
    let grid_b = SegmentGrid::new(&b.boundary);
    let d_ab = sample_points(&a.boundary)
        .into_iter()
        .map(|p| grid_b.distance(p))
        .fold(0.0, f64::max);
    let d_ba = sample_points(&b.boundary)
        .into_iter()
        .map(|p| grid_a.distance(p))
        .fold(0.0, f64::max);
    d_ab.max(d_ba)
}

// ---------------------------------------------------------------------------
// Reports.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub shape_a: String,
    pub shape_b: String,
    pub sym_diff: f64,
    pub hausdorff: f64,
    /// Rasterization grid (per side) used for the symmetric difference.
    pub grid: usize,
    pub seeds: Vec<u64>,
}

/// Compare two normalized shapes and assemble the report.
pub fn compare_shapes(
    label_a: &str,
    label_b: &str,
    a: &NormalizedShape,
    b: &NormalizedShape,
    seeds: Vec<u64>,
) -> ComparisonReport {
    ComparisonReport {
        shape_a: label_a.to_string(),
        shape_b: label_b.to_string(),
        sym_diff: symmetric_difference_fraction(a, b),
        hausdorff: hausdorff_distance(a, b),
        grid: RASTER_GRID,
        seeds,
    }
}

/// SVG overlay of two shapes: one black outline, one red, no fill.
pub fn write_svg_overlay<W: Write>(
    a: &NormalizedShape,
    b: &NormalizedShape,
    mut out: W,
) -> std::io::Result<()> {
    let (lo_a, hi_a) = bounding_box(&a.boundary);
    let (lo_b, hi_b) = bounding_box(&b.boundary);
    let lo = [lo_a[0].min(lo_b[0]), lo_a[1].min(lo_b[1])];
    let hi = [hi_a[0].max(hi_b[0]), hi_a[1].max(hi_b[1])];
    let pad = 0.05 * ((hi[0] - lo[0]).max(hi[1] - lo[1]));
    let (w, h) = (hi[0] - lo[0] + 2.0 * pad, hi[1] - lo[1] + 2.0 * pad);
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{:.6} {:.6} {:.6} {:.6}">"#,
        lo[0] - pad,
        -(hi[1] + pad), // flip y so positive y points up
        w,
        h
    )?;
    for (shape, stroke) in [(a, "black"), (b, "red")] {
        write!(
            out,
            r#"<polygon fill="none" stroke="{stroke}" stroke-width="{:.6}" points=""#,
            w / 800.0
        )?;
        for p in &shape.boundary {
            write!(out, "{:.6},{:.6} ", p[0], -p[1])?;
        }
        writeln!(out, r#""/>"#)?;
    }
    writeln!(out, "</svg>")
}
