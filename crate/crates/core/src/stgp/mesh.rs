//! Two-zone triangular mesh: a fine inner zone around the data and a coarse
//! outer buffer that pushes the boundary away from the stations.
//!
//! The inner zone is the convex hull of the data grown by `inner_max_edge`.
//! The outer boundary is a circle about the hull centroid whose radius
//! exceeds the farthest inner-boundary point by `buffer`.

use serde::{Deserialize, Serialize};
use spade::{DelaunayTriangulation, Point2, Triangulation};

use super::projection::PlanarPoint;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeshSettings {
    pub inner_max_edge: f64,
    pub outer_max_edge: f64,
    pub buffer: f64,
}

impl Default for MeshSettings {
    /// Tuned so the 20-station Irish network gives a mesh of about 360 nodes.
    fn default() -> Self {
        Self {
            inner_max_edge: 38.0,
            outer_max_edge: 110.0,
            buffer: 150.0,
        }
    }
}

impl MeshSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.inner_max_edge > 0.0
            && self.outer_max_edge.is_finite()
            && self.inner_max_edge < self.outer_max_edge
            && self.buffer >= 0.0
            && self.buffer.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "mesh settings need 0 < inner_max_edge < outer_max_edge and buffer >= 0, got {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub nodes: Vec<PlanarPoint>,
    /// Counter-clockwise node-index triples.
    pub triangles: Vec<[usize; 3]>,
    pub inner_boundary: Vec<PlanarPoint>,
    pub outer_boundary: Vec<PlanarPoint>,
}

/// Barycentric location of a point: up to three `(node, weight)` pairs.
pub type Barycentric = Vec<(usize, f64)>;

fn cross(o: PlanarPoint, a: PlanarPoint, b: PlanarPoint) -> f64 {
    (a.east - o.east) * (b.north - o.north) - (a.north - o.north) * (b.east - o.east)
}

/// Convex hull (counter-clockwise, no collinear points).
pub fn convex_hull(points: &[PlanarPoint]) -> Vec<PlanarPoint> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.east.total_cmp(&b.east).then(a.north.total_cmp(&b.north)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<PlanarPoint> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &PlanarPoint>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Polygonal approximation of the Minkowski sum of a convex polygon with a
/// disc of radius `r`.
fn offset_convex(hull: &[PlanarPoint], r: f64) -> Vec<PlanarPoint> {
    const DIRECTIONS: usize = 24;
    if r <= 0.0 {
        return hull.to_vec();
    }
    // Scale so the polygon circumscribes the disc.
    let rr = r / (std::f64::consts::PI / DIRECTIONS as f64).cos();
    let mut pts = Vec::with_capacity(hull.len() * DIRECTIONS);
    for p in hull {
        for k in 0..DIRECTIONS {
            let a = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / DIRECTIONS as f64;
            pts.push(PlanarPoint::new(p.east + rr * a.cos(), p.north + rr * a.sin()));
        }
    }
    convex_hull(&pts)
}

pub fn point_in_convex(poly: &[PlanarPoint], p: PlanarPoint) -> bool {
    let n = poly.len();
    (0..n).all(|i| cross(poly[i], poly[(i + 1) % n], p) >= -1e-9)
}

fn sample_boundary(poly: &[PlanarPoint], spacing: f64) -> Vec<PlanarPoint> {
    let n = poly.len();
    let mut out = Vec::new();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let segs = (a.distance(&b) / spacing).ceil().max(1.0) as usize;
        for s in 0..segs {
            let t = s as f64 / segs as f64;
            out.push(PlanarPoint::new(
                a.east + t * (b.east - a.east),
                a.north + t * (b.north - a.north),
            ));
        }
    }
    out
}

/// Regular polygon on a circle with sides no longer than `max_edge`.
fn circle(center: PlanarPoint, radius: f64, max_edge: f64) -> Vec<PlanarPoint> {
    let k = ((2.0 * std::f64::consts::PI * radius / max_edge).ceil() as usize).max(8);
    (0..k)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
            PlanarPoint::new(center.east + radius * a.cos(), center.north + radius * a.sin())
        })
        .collect()
}

fn lattice(poly: &[PlanarPoint], h: f64) -> Vec<PlanarPoint> {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in poly {
        x0 = x0.min(p.east);
        x1 = x1.max(p.east);
        y0 = y0.min(p.north);
        y1 = y1.max(p.north);
    }
    let dy = h * 3f64.sqrt() / 2.0;
    let mut out = Vec::new();
    let mut row = 0usize;
    let mut y = y0;
    while y <= y1 {
        let shift = if row % 2 == 1 { h / 2.0 } else { 0.0 };
        let mut x = x0 + shift;
        while x <= x1 {
            out.push(PlanarPoint::new(x, y));
            x += h;
        }
        y += dy;
        row += 1;
    }
    out
}

/// Uniform bucket grid for "is there a node within r of p" queries.
struct NodeGrid {
    cell: f64,
    buckets: std::collections::HashMap<(i64, i64), Vec<PlanarPoint>>,
}

impl NodeGrid {
    fn new(cell: f64) -> Self {
        Self {
            cell,
            buckets: Default::default(),
        }
    }

    fn key(&self, p: PlanarPoint) -> (i64, i64) {
        ((p.east / self.cell).floor() as i64, (p.north / self.cell).floor() as i64)
    }

    fn insert(&mut self, p: PlanarPoint) {
        let k = self.key(p);
        self.buckets.entry(k).or_default().push(p);
    }

    fn near(&self, p: PlanarPoint, r: f64) -> bool {
        let (kx, ky) = self.key(p);
        let reach = (r / self.cell).ceil() as i64;
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                if let Some(b) = self.buckets.get(&(kx + dx, ky + dy)) {
                    if b.iter().any(|q| q.distance(&p) < r) {
                        return true;
                    }
                }
            }
        }
        false
    }
}

pub fn build_mesh(data_points: &[PlanarPoint], settings: &MeshSettings) -> Result<Mesh> {
    settings.validate()?;
    if data_points.iter().any(|p| !p.east.is_finite() || !p.north.is_finite()) {
        return Err(Error::Mesh("non-finite data point".into()));
    }
    let hull = convex_hull(data_points);
    if hull.len() < 3 {
        return Err(Error::Mesh(format!(
            "need at least 3 distinct non-collinear points, hull has {}",
            hull.len()
        )));
    }
    let hull_area = polygon_area(&hull);
    let extent = hull
        .iter()
        .flat_map(|a| hull.iter().map(move |b| a.distance(b)))
        .fold(0.0, f64::max);
    if hull_area <= 1e-9 * extent * extent {
        return Err(Error::Mesh("data points are collinear".into()));
    }

    let h_in = settings.inner_max_edge;
    let h_out = settings.outer_max_edge;
    let inner = offset_convex(&hull, h_in);
    // The outer boundary is a circle: its samples are strictly convex, so no
    // boundary node can sit on a hull edge and form a sliver.
    let n_hull = hull.len() as f64;
    let center = PlanarPoint::new(
        hull.iter().map(|p| p.east).sum::<f64>() / n_hull,
        hull.iter().map(|p| p.north).sum::<f64>() / n_hull,
    );
    let radius = inner.iter().map(|p| p.distance(&center)).fold(0.0, f64::max) + settings.buffer;
    let outer = circle(center, radius, h_out);

    let mut grid = NodeGrid::new(h_in);
    let mut points: Vec<PlanarPoint> = Vec::new();
    let mut push = |p: PlanarPoint, grid: &mut NodeGrid, min_dist: f64| {
        if min_dist <= 0.0 || !grid.near(p, min_dist) {
            grid.insert(p);
            points.push(p);
        }
    };
    for &p in data_points {
        push(p, &mut grid, 0.0);
    }
    for &p in &outer {
        push(p, &mut grid, 0.0);
    }
    for p in sample_boundary(&inner, h_in) {
        if p.distance(&center) < radius - 0.45 * h_in {
            push(p, &mut grid, 0.45 * h_in);
        }
    }
    let li = 0.9 * h_in;
    for p in lattice(&inner, li) {
        if point_in_convex(&inner, p) && p.distance(&center) < radius - 0.5 * li {
            push(p, &mut grid, 0.5 * li);
        }
    }
    let lo = 0.9 * h_out;
    for p in lattice(&outer, lo) {
        if p.distance(&center) < radius - 0.5 * lo && !point_in_convex(&inner, p) {
            push(p, &mut grid, 0.5 * lo);
        }
    }

    let mut tri: DelaunayTriangulation<Point2<f64>> = DelaunayTriangulation::new();
    for p in &points {
        tri.insert(Point2::new(p.east, p.north))
            .map_err(|e| Error::Mesh(format!("triangulation insert failed: {e:?}")))?;
    }

    // Split edges longer than the limit of their zone until none remain;
    // boundary edges are split on the circle.
    let on_circle = |p: Point2<f64>| ((p.x - center.east).hypot(p.y - center.north) - radius).abs() < 1e-9 * radius;
    for _ in 0..64 {
        let mut splits = Vec::new();
        for e in tri.undirected_edges() {
            let [a, b] = e.vertices();
            let (pa, pb) = (a.position(), b.position());
            let mut mid = PlanarPoint::new((pa.x + pb.x) / 2.0, (pa.y + pb.y) / 2.0);
            let len = (pa.x - pb.x).hypot(pa.y - pb.y);
            let limit = if point_in_convex(&inner, mid) { h_in } else { h_out };
            if len > limit {
                if on_circle(pa) && on_circle(pb) {
                    let d = mid.distance(&center);
                    mid = PlanarPoint::new(
                        center.east + (mid.east - center.east) * radius / d,
                        center.north + (mid.north - center.north) * radius / d,
                    );
                }
                splits.push(mid);
            }
        }
        if splits.is_empty() {
            break;
        }
        for m in splits {
            tri.insert(Point2::new(m.east, m.north))
                .map_err(|e| Error::Mesh(format!("refinement insert failed: {e:?}")))?;
        }
    }

    let nodes: Vec<PlanarPoint> = tri
        .vertices()
        .map(|v| PlanarPoint::new(v.position().x, v.position().y))
        .collect();
    let mut triangles = Vec::with_capacity(tri.num_inner_faces());
    for f in tri.inner_faces() {
        let [a, b, c] = f.vertices().map(|v| v.fix().index());
        if cross(nodes[a], nodes[b], nodes[c]) > 0.0 {
            triangles.push([a, b, c]);
        } else {
            triangles.push([a, c, b]);
        }
    }
    Ok(Mesh {
        nodes,
        triangles,
        inner_boundary: inner,
        outer_boundary: outer,
    })
}

fn polygon_area(poly: &[PlanarPoint]) -> f64 {
    let n = poly.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a.east * b.north - b.east * a.north
        })
        .sum::<f64>()
}

impl Mesh {
    /// Structured mesh on `[0, nx·h] × [0, ny·h]` with each square split into
    /// two triangles; nodes in row-major order from `origin`.
    pub fn regular(origin: PlanarPoint, nx: usize, ny: usize, h: f64) -> Self {
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push(PlanarPoint::new(
                    origin.east + i as f64 * h,
                    origin.north + j as f64 * h,
                ));
            }
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                // Alternate the diagonal to keep the mesh isotropic on average.
                if (i + j) % 2 == 0 {
                    triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                    triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
                } else {
                    triangles.push([id(i, j), id(i + 1, j), id(i, j + 1)]);
                    triangles.push([id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
                }
            }
        }
        let corners = vec![
            nodes[id(0, 0)],
            nodes[id(nx, 0)],
            nodes[id(nx, ny)],
            nodes[id(0, ny)],
        ];
        Self {
            nodes,
            triangles,
            inner_boundary: corners.clone(),
            outer_boundary: corners,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        0.5 * cross(self.nodes[a], self.nodes[b], self.nodes[c])
    }

    /// Barycentric weights of `p` in its containing triangle; weights below
    /// `1e-12` are dropped so node hits have a single entry.
    pub fn locate(&self, p: PlanarPoint) -> Option<Barycentric> {
        let mut best: Option<(f64, [usize; 3], [f64; 3])> = None;
        for &[a, b, c] in &self.triangles {
            let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
            let (lo_e, hi_e) = (pa.east.min(pb.east).min(pc.east), pa.east.max(pb.east).max(pc.east));
            let (lo_n, hi_n) = (
                pa.north.min(pb.north).min(pc.north),
                pa.north.max(pb.north).max(pc.north),
            );
            let tol = 1e-9 * (hi_e - lo_e + hi_n - lo_n);
            if p.east < lo_e - tol || p.east > hi_e + tol || p.north < lo_n - tol || p.north > hi_n + tol {
                continue;
            }
            let area = cross(pa, pb, pc);
            let w = [cross(p, pb, pc) / area, cross(pa, p, pc) / area, cross(pa, pb, p) / area];
            let worst = w.iter().copied().fold(f64::INFINITY, f64::min);
            if worst >= -1e-10 && best.as_ref().is_none_or(|(bw, _, _)| worst > *bw) {
                best = Some((worst, [a, b, c], w));
            }
        }
        let (_, idx, w) = best?;
        let w = w.map(|x| x.max(0.0));
        let s: f64 = w.iter().sum();
        Some(
            idx.iter()
                .zip(w)
                .filter(|(_, x)| *x / s >= 1e-12)
                .map(|(&i, x)| (i, x / s))
                .collect(),
        )
    }

    pub fn contains(&self, p: PlanarPoint) -> bool {
        self.locate(p).is_some()
    }

    /// Node lookup by exact position.
    pub fn node_index(&self, p: PlanarPoint) -> Option<usize> {
        self.nodes.iter().position(|q| q.distance(&p) < 1e-9)
    }

    /// Geometric audit: positive orientation, every interior edge shared by
    /// exactly two triangles and total area equal to the hull area.
    pub fn audit(&self) -> Result<()> {
        use std::collections::HashMap;
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        let mut area = 0.0;
        for (t, tri) in self.triangles.iter().enumerate() {
            let a = self.triangle_area(t);
            if a <= 0.0 {
                return Err(Error::Mesh(format!("triangle {t} not positively oriented")));
            }
            area += a;
            for k in 0..3 {
                let (u, v) = (tri[k], tri[(k + 1) % 3]);
                *edges.entry((u.min(v), u.max(v))).or_default() += 1;
            }
        }
        if edges.values().any(|&c| c > 2) {
            return Err(Error::Mesh("edge shared by more than two triangles".into()));
        }
        let hull = convex_hull(&self.nodes);
        let hull_area = polygon_area(&hull);
        if (area - hull_area).abs() > 1e-8 * hull_area {
            return Err(Error::Mesh(format!(
                "triangles cover {area} but hull area is {hull_area}"
            )));
        }
        // Conformity: boundary edges (count 1) must lie on the hull.
        for (&(u, v), &c) in &edges {
            if c == 1 {
                let (pu, pv) = (self.nodes[u], self.nodes[v]);
                let on_hull = (0..hull.len()).any(|i| {
                    let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
                    let scale = a.distance(&b).max(1.0);
                    cross(a, b, pu).abs() <= 1e-7 * scale * scale
                        && cross(a, b, pv).abs() <= 1e-7 * scale * scale
                });
                if !on_hull {
                    return Err(Error::Mesh(format!("hanging edge ({u}, {v})")));
                }
            }
        }
        Ok(())
    }
}
