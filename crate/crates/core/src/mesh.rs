//! Conforming triangular meshes, their boundary topology, generators and the ASCII file format.
//!
//! File layout:
//! ```text
//! shapegrad-mesh v1
//! nodes N
//! x y            (N lines)
//! triangles M
//! i j k          (M lines, 0-based, counter-clockwise)
//! boundary B
//! i j marker     (B lines)
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::tensor::Vec2;

pub const MESH_HEADER: &str = "shapegrad-mesh v1";
pub const DEFAULT_MARKER: i32 = 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundingBox {
    pub lo: Vec2,
    pub hi: Vec2,
}

impl BoundingBox {
    pub fn of_points(points: &[Vec2]) -> Self {
        let mut lo = Vec2::xy(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::xy(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        BoundingBox { lo, hi }
    }

    /// Box grown by `fraction` of its extent on every side.
    pub fn inflated(&self, fraction: f64) -> Self {
        let pad = Vec2::xy(fraction * (self.hi.x() - self.lo.x()), fraction * (self.hi.y() - self.lo.y()));
        BoundingBox { lo: self.lo - pad, hi: self.hi + pad }
    }

    pub fn strictly_contains(&self, p: &Vec2) -> bool {
        (0..2).all(|d| p[d] > self.lo[d] && p[d] < self.hi[d])
    }

    pub fn intersects(&self, other: &BoundingBox) -> bool {
        (0..2).all(|d| self.lo[d] < other.hi[d] && other.lo[d] < self.hi[d])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub marker: i32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    nodes: Vec<Vec2>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEdge>,
    holdall: BoundingBox,
    /// For each boundary edge, the owning triangle and the local edge index `l`
    /// (edge from local vertex `l` to `(l + 1) % 3`).
    owners: Vec<(usize, usize)>,
}

fn signed_area(a: &Vec2, b: &Vec2, c: &Vec2) -> f64 {
    0.5 * (*b - *a).cross(&(*c - *a))
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Mesh {
    /// Validates and builds a mesh; the hold-all box is the bounding box inflated by 25%.
    pub fn new(nodes: Vec<Vec2>, triangles: Vec<[usize; 3]>, boundary: Vec<BoundaryEdge>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::MeshValidation("mesh has no nodes".into()));
        }
        let holdall = BoundingBox::of_points(&nodes).inflated(0.25);
        Self::with_holdall(nodes, triangles, boundary, holdall)
    }

    pub fn with_holdall(
        nodes: Vec<Vec2>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<BoundaryEdge>,
        holdall: BoundingBox,
    ) -> Result<Self> {
        let v = |m: String| Err(Error::MeshValidation(m));
        if triangles.is_empty() {
            return v("mesh has no triangles".into());
        }
        for (i, p) in nodes.iter().enumerate() {
            if !p.is_finite() {
                return v(format!("node {i} has non-finite coordinates"));
            }
            if !holdall.strictly_contains(p) {
                return v(format!("node {i} lies outside the hold-all box"));
            }
        }
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= nodes.len()) {
                return v(format!("triangle {t} references a missing node"));
            }
            let area = signed_area(&nodes[tri[0]], &nodes[tri[1]], &nodes[tri[2]]);
            if !(area > 0.0) {
                return v(format!("triangle {t} has non-positive signed area {area}"));
            }
        }
        let mut edge_tris: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for l in 0..3 {
                edge_tris.entry(edge_key(tri[l], tri[(l + 1) % 3])).or_default().push((t, l));
            }
        }
        let mut owners = Vec::with_capacity(boundary.len());
        let mut seen = HashMap::new();
        let mut degree = HashMap::<usize, usize>::new();
        for (b, e) in boundary.iter().enumerate() {
            let [i, j] = e.nodes;
            if i >= nodes.len() || j >= nodes.len() || i == j {
                return v(format!("boundary edge {b} has invalid nodes ({i}, {j})"));
            }
            let key = edge_key(i, j);
            if seen.insert(key, b).is_some() {
                return v(format!("boundary edge {b} is listed twice"));
            }
            match edge_tris.get(&key).map(Vec::as_slice) {
                Some([owner]) => owners.push(*owner),
                Some(_) => return v(format!("boundary edge {b} ({i}, {j}) is shared by two triangles")),
                None => return v(format!("boundary edge {b} ({i}, {j}) is dangling: it belongs to no triangle")),
            }
            *degree.entry(i).or_default() += 1;
            *degree.entry(j).or_default() += 1;
        }
        for (key, tris) in &edge_tris {
            match tris.len() {
                1 if !seen.contains_key(key) => {
                    return v(format!(
                        "edge ({}, {}) lies on the boundary but is not listed as a boundary edge",
                        key.0, key.1
                    ))
                }
                1 | 2 => {}
                _ => return v(format!("edge ({}, {}) is shared by more than two triangles", key.0, key.1)),
            }
        }
        let mut odd: Vec<_> = degree.iter().filter(|(_, &d)| d != 2).map(|(n, _)| *n).collect();
        odd.sort_unstable();
        if let Some(n) = odd.first() {
            return v(format!("boundary edges do not form closed loops at node {n}"));
        }
        Ok(Mesh { nodes, triangles, boundary, holdall, owners })
    }

    /// Same connectivity and hold-all box with moved nodes.
    ///
    /// A triangle whose orientation flips is reported as a flow degeneracy.
    pub fn with_nodes(&self, nodes: Vec<Vec2>) -> Result<Self> {
        if nodes.len() != self.nodes.len() {
            return Err(Error::invalid("node count mismatch"));
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            let area = signed_area(&nodes[tri[0]], &nodes[tri[1]], &nodes[tri[2]]);
            if !(area > 0.0) {
                return Err(Error::FlowDegenerate {
                    s: f64::NAN,
                    triangle: Some(t),
                    detail: format!("triangle {t} inverted (signed area {area})"),
                });
            }
        }
        for (i, p) in nodes.iter().enumerate() {
            if !self.holdall.strictly_contains(p) {
                return Err(Error::MeshValidation(format!("node {i} left the hold-all box")));
            }
        }
        Ok(Mesh { nodes, ..self.clone() })
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    pub fn holdall(&self) -> &BoundingBox {
        &self.holdall
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_vertices(&self, t: usize) -> [Vec2; 3] {
        self.triangles[t].map(|i| self.nodes[i])
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_vertices(t);
        signed_area(&a, &b, &c)
    }

    pub fn area(&self) -> f64 {
        let mut sum = Neumaier::default();
        for t in 0..self.triangles.len() {
            sum.add(self.triangle_area(t));
        }
        sum.total()
    }

    /// Owning triangle and local edge index of a boundary edge.
    pub fn boundary_owner(&self, edge: usize) -> (usize, usize) {
        self.owners[edge]
    }

    pub fn has_marker(&self, marker: i32) -> bool {
        self.boundary.iter().any(|e| e.marker == marker)
    }

    pub fn edge_length(&self, edge: usize) -> f64 {
        let [i, j] = self.boundary[edge].nodes;
        (self.nodes[j] - self.nodes[i]).norm()
    }

    /// Unit normal of a boundary edge pointing away from its triangle.
    pub fn outward_normal(&self, edge: usize) -> Result<Vec2> {
        let e =
            self.boundary.get(edge).ok_or_else(|| Error::invalid(format!("{edge} is not a boundary edge index")))?;
        let [i, j] = e.nodes;
        let (a, b) = (self.nodes[i], self.nodes[j]);
        let tangent = (b - a) * (1.0 / (b - a).norm());
        let mut n = Vec2::xy(tangent.y(), -tangent.x());
        let (t, _) = self.owners[edge];
        let [p, q, r] = self.triangle_vertices(t);
        let centroid = (p + q + r) * (1.0 / 3.0);
        if n.dot(&(centroid - a)) > 0.0 {
            n = -n;
        }
        Ok(n)
    }

    /// Number of distinct edges.
    pub fn edge_count(&self) -> usize {
        let mut set = std::collections::HashSet::new();
        for tri in &self.triangles {
            for l in 0..3 {
                set.insert(edge_key(tri[l], tri[(l + 1) % 3]));
            }
        }
        set.len()
    }

    /// Largest edge length.
    pub fn max_edge_length(&self) -> f64 {
        let mut h: f64 = 0.0;
        for t in 0..self.triangles.len() {
            let v = self.triangle_vertices(t);
            for l in 0..3 {
                h = h.max((v[(l + 1) % 3] - v[l]).norm());
            }
        }
        h
    }

    /// Shoelace area enclosed by the boundary loops (oriented by the owning triangles).
    pub fn boundary_polygon_area(&self) -> f64 {
        let mut sum = Neumaier::default();
        for (b, e) in self.boundary.iter().enumerate() {
            let (t, l) = self.owners[b];
            let tri = self.triangles[t];
            // The triangle traverses the edge counter-clockwise, i.e. with the interior on the left.
            let (i, j) = (tri[l], tri[(l + 1) % 3]);
            debug_assert!(edge_key(i, j) == edge_key(e.nodes[0], e.nodes[1]));
            sum.add(0.5 * self.nodes[i].cross(&self.nodes[j]));
        }
        sum.total()
    }

    /// Canonical text serialization.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(32 * (self.nodes.len() + self.triangles.len()));
        let _ = writeln!(s, "{MESH_HEADER}");
        let _ = writeln!(s, "nodes {}", self.nodes.len());
        for p in &self.nodes {
            let _ = writeln!(s, "{:?} {:?}", p.x(), p.y());
        }
        let _ = writeln!(s, "triangles {}", self.triangles.len());
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        let _ = writeln!(s, "boundary {}", self.boundary.len());
        for e in &self.boundary {
            let _ = writeln!(s, "{} {} {}", e.nodes[0], e.nodes[1], e.marker);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        let mut cur = LineCursor { lines: &lines, pos: 0 };
        let (ln, header) = cur.next()?;
        if header != MESH_HEADER {
            return Err(parse_err(ln, format!("expected header '{MESH_HEADER}', found '{header}'")));
        }
        let n = cur.section("nodes")?;
        let mut nodes = Vec::with_capacity(n);
        for _ in 0..n {
            let (ln, toks) = cur.row(2)?;
            let x: f64 = parse_tok(ln, toks[0], "float")?;
            let y: f64 = parse_tok(ln, toks[1], "float")?;
            nodes.push(Vec2::try_new([x, y]).map_err(|_| parse_err(ln, "non-finite coordinate".into()))?);
        }
        let m = cur.section("triangles")?;
        let mut triangles = Vec::with_capacity(m);
        for _ in 0..m {
            let (ln, toks) = cur.row(3)?;
            triangles.push([
                parse_tok(ln, toks[0], "index")?,
                parse_tok(ln, toks[1], "index")?,
                parse_tok(ln, toks[2], "index")?,
            ]);
        }
        let b = cur.section("boundary")?;
        let mut boundary = Vec::with_capacity(b);
        for _ in 0..b {
            let (ln, toks) = cur.row(3)?;
            boundary.push(BoundaryEdge {
                nodes: [parse_tok(ln, toks[0], "index")?, parse_tok(ln, toks[1], "index")?],
                marker: parse_tok(ln, toks[2], "marker")?,
            });
        }
        if let Some((ln, _)) = lines.get(cur.pos) {
            return Err(parse_err(*ln, "unexpected trailing content".into()));
        }
        Mesh::new(nodes, triangles, boundary)
    }

    /// Short content hash of the canonical serialization.
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        format!("{digest:x}")[..16].to_string()
    }

    /// Crossed-triangle rectangle: each of the `nx × ny` cells is split into four
    /// triangles through its center node. Node count `(nx+1)(ny+1) + nx·ny`,
    /// triangle count `4·nx·ny`. Vertex nodes come first in row-major order, then
    /// cell centers. All boundary edges carry marker 1.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(x1 > x0 && y1 > y0) || nx == 0 || ny == 0 || ![x0, y0, x1, y1].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid(format!("degenerate rectangle ({x0}, {y0})–({x1}, {y1}) with {nx}×{ny} cells")));
        }
        let hx = (x1 - x0) / nx as f64;
        let hy = (y1 - y0) / ny as f64;
        let coord = |i: usize, n: usize, a: f64, b: f64, h: f64| {
            if i == n {
                b
            } else {
                a + i as f64 * h
            }
        };
        let vid = |i: usize, j: usize| j * (nx + 1) + i;
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1) + nx * ny);
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push(Vec2::xy(coord(i, nx, x0, x1, hx), coord(j, ny, y0, y1, hy)));
            }
        }
        let mut triangles = Vec::with_capacity(4 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let c = nodes.len();
                let (a, b) = (nodes[vid(i, j)], nodes[vid(i + 1, j + 1)]);
                nodes.push((a + b) * 0.5);
                let (sw, se, ne, nw) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
                triangles.push([sw, se, c]);
                triangles.push([se, ne, c]);
                triangles.push([ne, nw, c]);
                triangles.push([nw, sw, c]);
            }
        }
        let mut boundary = Vec::with_capacity(2 * (nx + ny));
        let mut push = |a: usize, b: usize| boundary.push(BoundaryEdge { nodes: [a, b], marker: DEFAULT_MARKER });
        for i in 0..nx {
            push(vid(i, 0), vid(i + 1, 0));
        }
        for j in 0..ny {
            push(vid(nx, j), vid(nx, j + 1));
        }
        for i in (0..nx).rev() {
            push(vid(i + 1, ny), vid(i, ny));
        }
        for j in (0..ny).rev() {
            push(vid(0, j + 1), vid(0, j));
        }
        Mesh::new(nodes, triangles, boundary)
    }

    /// Disk mesh: a hexagon fan refined `refinement` times by midpoint subdivision,
    /// projecting each new boundary midpoint onto the circle. Level `k` has
    /// `6·4^k` triangles and `6·2^k` boundary edges.
    pub fn disk(center: Vec2, radius: f64, refinement: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || !center.is_finite() {
            return Err(Error::invalid(format!("degenerate disk radius {radius}")));
        }
        if refinement > 10 {
            return Err(Error::invalid("disk refinement above 10 is not supported"));
        }
        let mut nodes = vec![center];
        for k in 0..6 {
            let a = std::f64::consts::PI * k as f64 / 3.0;
            nodes.push(center + Vec2::xy(a.cos(), a.sin()) * radius);
        }
        let mut triangles: Vec<[usize; 3]> = (0..6).map(|k| [0, 1 + k, 1 + (k + 1) % 6]).collect();
        let mut boundary: Vec<[usize; 2]> = (0..6).map(|k| [1 + k, 1 + (k + 1) % 6]).collect();
        for _ in 0..refinement {
            let on_boundary: std::collections::HashSet<_> = boundary.iter().map(|e| edge_key(e[0], e[1])).collect();
            let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
            let mut midpoint = |a: usize, b: usize, nodes: &mut Vec<Vec2>| -> usize {
                let key = edge_key(a, b);
                if let Some(&m) = mid.get(&key) {
                    return m;
                }
                let mut p = (nodes[a] + nodes[b]) * 0.5;
                if on_boundary.contains(&key) {
                    let r = p - center;
                    p = center + r * (radius / r.norm());
                }
                nodes.push(p);
                mid.insert(key, nodes.len() - 1);
                nodes.len() - 1
            };
            let mut refined = Vec::with_capacity(4 * triangles.len());
            for &[a, b, c] in &triangles {
                let ab = midpoint(a, b, &mut nodes);
                let bc = midpoint(b, c, &mut nodes);
                let ca = midpoint(c, a, &mut nodes);
                refined.push([a, ab, ca]);
                refined.push([ab, b, bc]);
                refined.push([ca, bc, c]);
                refined.push([ab, bc, ca]);
            }
            triangles = refined;
            let mut new_boundary = Vec::with_capacity(2 * boundary.len());
            for &[a, b] in &boundary {
                let m = midpoint(a, b, &mut nodes);
                new_boundary.push([a, m]);
                new_boundary.push([m, b]);
            }
            boundary = new_boundary;
        }
        let boundary = boundary.into_iter().map(|nodes| BoundaryEdge { nodes, marker: DEFAULT_MARKER }).collect();
        Mesh::new(nodes, triangles, boundary)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_text().as_bytes())
    }
}

fn parse_err(line: usize, message: String) -> Error {
    Error::Parse { line, message }
}

fn parse_tok<T: std::str::FromStr>(line: usize, tok: &str, what: &str) -> Result<T> {
    tok.parse().map_err(|_| parse_err(line, format!("bad {what} '{tok}'")))
}

struct LineCursor<'a> {
    lines: &'a [(usize, &'a str)],
    pos: usize,
}

impl<'a> LineCursor<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        let last = self.lines.last().map_or(1, |l| l.0);
        let item = self.lines.get(self.pos).copied().ok_or_else(|| parse_err(last, "unexpected end of file".into()))?;
        self.pos += 1;
        Ok(item)
    }

    fn section(&mut self, name: &str) -> Result<usize> {
        let (ln, l) = self.next()?;
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.len() != 2 || parts[0] != name {
            return Err(parse_err(ln, format!("expected '{name} <count>', found '{l}'")));
        }
        parse_tok(ln, parts[1], "count")
    }

    fn row(&mut self, width: usize) -> Result<(usize, Vec<&'a str>)> {
        let (ln, l) = self.next()?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != width {
            return Err(parse_err(ln, format!("expected {width} values, found {}", toks.len())));
        }
        Ok((ln, toks))
    }
}

/// Compensated summation giving results independent of magnitude ordering effects.
#[derive(Default, Clone, Copy, Debug)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}
