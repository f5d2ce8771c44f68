//! Triangle surfaces and STL input (ASCII and binary), with watertightness
//! checking, inside tests, nearest-point queries and extrusion.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::Vect;

type V3 = Vect<3>;

/// Indexed triangle mesh with per-triangle unit normals and areas.
#[derive(Debug, Clone)]
pub struct TriangleSurface {
    pub vertices: Vec<V3>,
    pub triangles: Vec<[u32; 3]>,
    pub normals: Vec<V3>,
    pub areas: Vec<f64>,
    pub total_area: f64,
    pub watertight: bool,
}

impl TriangleSurface {
    /// Builds the indexed mesh from raw triangle vertex triples, welding
    /// exactly-equal vertices. Degenerate triangles are rejected.
    pub fn from_triangle_soup(soup: &[[V3; 3]]) -> Result<Self> {
        if soup.is_empty() {
            return Err(Error::Geometry("mesh has no triangles".into()));
        }
        let mut vertices: Vec<V3> = Vec::new();
        let mut lookup: HashMap<[u64; 3], u32> = HashMap::new();
        let mut triangles = Vec::with_capacity(soup.len());
        let key = |v: &V3| [v[0].to_bits(), v[1].to_bits(), v[2].to_bits()];
        for tri in soup {
            let mut idx = [0u32; 3];
            for (k, v) in tri.iter().enumerate() {
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Geometry("non-finite vertex coordinate".into()));
                }
                idx[k] = *lookup.entry(key(v)).or_insert_with(|| {
                    vertices.push(*v);
                    (vertices.len() - 1) as u32
                });
            }
            triangles.push(idx);
        }
        Self::from_indexed(vertices, triangles)
    }

    pub fn from_indexed(vertices: Vec<V3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        let mut normals = Vec::with_capacity(triangles.len());
        let mut areas = Vec::with_capacity(triangles.len());
        let mut total_area = 0.0;
        for (t, tri) in triangles.iter().enumerate() {
            let [a, b, c] = tri.map(|i| vertices[i as usize]);
            let cross = (b - a).cross(&(c - a));
            let norm = cross.norm();
            if norm <= 0.0 {
                return Err(Error::Geometry(format!("degenerate triangle {t}")));
            }
            normals.push(cross / norm);
            areas.push(0.5 * norm);
            total_area += 0.5 * norm;
        }
        let watertight = check_watertight(&triangles);
        Ok(Self {
            vertices,
            triangles,
            normals,
            areas,
            total_area,
            watertight,
        })
    }

    pub fn bounds(&self) -> (V3, V3) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices {
            for d in 0..3 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        (lo, hi)
    }

    pub fn triangle(&self, t: usize) -> [V3; 3] {
        self.triangles[t].map(|i| self.vertices[i as usize])
    }

    /// Signed volume by the divergence theorem (watertight meshes only).
    pub fn enclosed_volume(&self) -> f64 {
        let mut six_v = 0.0;
        for tri in &self.triangles {
            let [a, b, c] = tri.map(|i| self.vertices[i as usize]);
            six_v += a.dot(&b.cross(&c));
        }
        six_v / 6.0
    }

    /// Ray-parity inside test along +x with a deterministic fallback
    /// direction for rays that graze edges.
    pub fn contains(&self, p: &V3) -> bool {
        for dir in [
            V3::new(1.0, 0.0, 0.0),
            V3::new(0.577_350_269, 0.577_350_269, 0.577_350_269),
            V3::new(0.267_261_24, 0.534_522_48, 0.801_783_73),
        ] {
            if let Some(crossings) = self.count_ray_crossings(p, &dir) {
                return crossings % 2 == 1;
            }
        }
        false
    }

    fn count_ray_crossings(&self, origin: &V3, dir: &V3) -> Option<usize> {
        let mut count = 0;
        for tri in &self.triangles {
            let [a, b, c] = tri.map(|i| self.vertices[i as usize]);
            match ray_triangle(origin, dir, &a, &b, &c) {
                RayHit::Miss => {}
                RayHit::Hit => count += 1,
                RayHit::Grazing => return None,
            }
        }
        Some(count)
    }

    /// Closest point on the surface and the index of its triangle.
    pub fn nearest_point(&self, p: &V3) -> (V3, usize) {
        let mut best = (f64::INFINITY, V3::zeros(), 0usize);
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.triangle(t);
            let q = closest_point_on_triangle(p, &a, &b, &c);
            let d2 = (p - q).norm_squared();
            if d2 < best.0 {
                best = (d2, q, t);
            }
        }
        (best.1, best.2)
    }

    /// Grid-accelerated nearest-point queries for repeated use.
    pub fn locator(&self) -> TriangleLocator<'_> {
        TriangleLocator::new(self)
    }

    /// Distance to the surface, negative inside (watertight meshes).
    pub fn signed_distance(&self, p: &V3) -> f64 {
        let (q, _) = self.nearest_point(p);
        let d = (p - q).norm();
        if self.watertight && self.contains(p) {
            -d
        } else {
            d
        }
    }

    /// Area-weighted unit vertex normals.
    pub fn vertex_normals(&self) -> Vec<V3> {
        let mut normals = vec![V3::zeros(); self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &i in tri {
                normals[i as usize] += self.normals[t] * self.areas[t];
            }
        }
        for n in normals.iter_mut() {
            let len = n.norm();
            if len > 0.0 {
                *n /= len;
            }
        }
        normals
    }
}

fn check_watertight(triangles: &[[u32; 3]]) -> bool {
    // every undirected edge shared by exactly two triangles, once in each
    // direction (consistent orientation)
    let mut edges: HashMap<(u32, u32), i32> = HashMap::new();
    for tri in triangles {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            if a == b {
                return false;
            }
            let (key, dir) = if a < b { ((a, b), 1) } else { ((b, a), -1) };
            *edges.entry(key).or_insert(0) += dir;
        }
    }
    !edges.is_empty() && edges.values().all(|&v| v == 0)
}

enum RayHit {
    Miss,
    Hit,
    Grazing,
}

/// Moller-Trumbore with explicit grazing detection so the parity test can
/// retry along a different direction.
fn ray_triangle(origin: &V3, dir: &V3, a: &V3, b: &V3, c: &V3) -> RayHit {
    let eps = 1e-12;
    let e1 = b - a;
    let e2 = c - a;
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    if det.abs() < eps {
        return RayHit::Miss; // parallel to the plane
    }
    let inv = 1.0 / det;
    let tvec = origin - a;
    let u = tvec.dot(&pvec) * inv;
    let qvec = tvec.cross(&e1);
    let v = dir.dot(&qvec) * inv;
    let t = e2.dot(&qvec) * inv;
    let graze = 1e-9;
    if u < -graze || v < -graze || u + v > 1.0 + graze || t.abs() < graze {
        if (u.abs() < graze || v.abs() < graze || (u + v - 1.0).abs() < graze)
            && t > graze
            && (-graze..=1.0 + graze).contains(&u)
            && (-graze..=1.0 + graze).contains(&v)
            && u + v <= 1.0 + graze
        {
            return RayHit::Grazing;
        }
        return RayHit::Miss;
    }
    if u < graze || v < graze || u + v > 1.0 - graze {
        return RayHit::Grazing; // too close to an edge to trust parity
    }
    if t > 0.0 {
        RayHit::Hit
    } else {
        RayHit::Miss
    }
}

/// Uniform grid over triangle bounding boxes; nearest-point queries expand
/// cell rings until no closer triangle can exist.
pub struct TriangleLocator<'a> {
    mesh: &'a TriangleSurface,
    lo: V3,
    cell: f64,
    dims: [usize; 3],
    cells: Vec<Vec<u32>>,
}

impl<'a> TriangleLocator<'a> {
    fn new(mesh: &'a TriangleSurface) -> Self {
        let (lo, hi) = mesh.bounds();
        let extent = hi - lo;
        let target_cells = (mesh.triangles.len() as f64).cbrt().ceil().max(1.0);
        let cell = (extent.max() / target_cells).max(1e-12);
        let mut dims = [1usize; 3];
        for d in 0..3 {
            dims[d] = ((extent[d] / cell).floor() as usize + 1).max(1);
        }
        let mut cells = vec![Vec::new(); dims[0] * dims[1] * dims[2]];
        let clampi = |x: f64, n: usize| (x.max(0.0) as usize).min(n - 1);
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let vs = tri.map(|i| mesh.vertices[i as usize]);
            let mut tlo = vs[0];
            let mut thi = vs[0];
            for v in &vs[1..] {
                for d in 0..3 {
                    tlo[d] = tlo[d].min(v[d]);
                    thi[d] = thi[d].max(v[d]);
                }
            }
            let i0: Vec<usize> = (0..3)
                .map(|d| clampi(((tlo[d] - lo[d]) / cell).floor(), dims[d]))
                .collect();
            let i1: Vec<usize> = (0..3)
                .map(|d| clampi(((thi[d] - lo[d]) / cell).floor(), dims[d]))
                .collect();
            for ix in i0[0]..=i1[0] {
                for iy in i0[1]..=i1[1] {
                    for iz in i0[2]..=i1[2] {
                        cells[(iz * dims[1] + iy) * dims[0] + ix].push(t as u32);
                    }
                }
            }
        }
        Self {
            mesh,
            lo,
            cell,
            dims,
            cells,
        }
    }

    pub fn nearest_point(&self, p: &V3) -> (V3, usize) {
        let coord = |d: usize, x: f64| -> i64 { ((x - self.lo[d]) / self.cell).floor() as i64 };
        let c = [coord(0, p[0]), coord(1, p[1]), coord(2, p[2])];
        let mut best = (f64::INFINITY, V3::zeros(), usize::MAX);
        let max_ring = self.dims.iter().max().unwrap() + 2;
        for ring in 0..=max_ring as i64 {
            // once a hit exists, stop when the next ring cannot beat it
            if best.2 != usize::MAX {
                let ring_min = (ring - 1).max(0) as f64 * self.cell;
                if ring_min * ring_min > best.0 {
                    break;
                }
            }
            for ix in c[0] - ring..=c[0] + ring {
                if ix < 0 || ix >= self.dims[0] as i64 {
                    continue;
                }
                for iy in c[1] - ring..=c[1] + ring {
                    if iy < 0 || iy >= self.dims[1] as i64 {
                        continue;
                    }
                    for iz in c[2] - ring..=c[2] + ring {
                        if iz < 0 || iz >= self.dims[2] as i64 {
                            continue;
                        }
                        let on_shell = (ix - c[0]).abs() == ring
                            || (iy - c[1]).abs() == ring
                            || (iz - c[2]).abs() == ring;
                        if !on_shell {
                            continue;
                        }
                        let cell_idx = ((iz as usize) * self.dims[1] + iy as usize)
                            * self.dims[0]
                            + ix as usize;
                        for &t in &self.cells[cell_idx] {
                            let [a, b, cc] = self.mesh.triangle(t as usize);
                            let q = closest_point_on_triangle(p, &a, &b, &cc);
                            let d2 = (p - q).norm_squared();
                            if d2 < best.0 {
                                best = (d2, q, t as usize);
                            }
                        }
                    }
                }
            }
        }
        if best.2 == usize::MAX {
            return self.mesh.nearest_point(p);
        }
        (best.1, best.2)
    }
}

/// Closest point on a triangle (Ericson, Real-Time Collision Detection).
pub fn closest_point_on_triangle(p: &V3, a: &V3, b: &V3, c: &V3) -> V3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Offsets every vertex along its area-weighted normal. Fails when the
/// offset flips or collapses any triangle, reporting the offenders.
pub fn extrude_surface(surface: &TriangleSurface, offset: f64) -> Result<TriangleSurface> {
    if !(offset > 0.0) || !offset.is_finite() {
        return Err(Error::InvalidInput(format!(
            "extrusion offset must be positive, got {offset}"
        )));
    }
    let vnormals = surface.vertex_normals();
    let vertices: Vec<V3> = surface
        .vertices
        .iter()
        .zip(vnormals.iter())
        .map(|(v, n)| v + n * offset)
        .collect();
    let extruded = TriangleSurface::from_indexed(vertices, surface.triangles.clone())
        .map_err(|e| Error::Geometry(format!("extrusion collapsed the mesh: {e}")))?;
    let mut offending = Vec::new();
    for t in 0..surface.triangles.len() {
        // a fold flips the facet normal; an overrun past a center of
        // curvature reverses edge vectors while preserving the normal
        let flipped_normal = extruded.normals[t].dot(&surface.normals[t]) <= 0.0;
        let tri0 = surface.triangle(t);
        let tri1 = extruded.triangle(t);
        let reversed_edge = (0..3).any(|k| {
            let e0 = tri0[(k + 1) % 3] - tri0[k];
            let e1 = tri1[(k + 1) % 3] - tri1[k];
            e0.dot(&e1) <= 0.0
        });
        if flipped_normal || reversed_edge {
            offending.push(t);
        }
    }
    if !offending.is_empty() {
        return Err(Error::Geometry(format!(
            "extrusion by {offset} self-intersects at triangles {offending:?}"
        )));
    }
    Ok(extruded)
}

/// Loads an STL file, auto-detecting the binary and ASCII variants.
pub fn load_stl(path: &Path) -> Result<TriangleSurface> {
    let bytes = std::fs::read(path)?;
    parse_stl(&bytes)
}

pub fn parse_stl(bytes: &[u8]) -> Result<TriangleSurface> {
    // A well-formed binary file has length 84 + 50 n; the "solid" prefix is
    // not a reliable discriminator.
    if bytes.len() >= 84 {
        let count = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
        if bytes.len() == 84 + 50 * count {
            return parse_stl_binary(bytes, count);
        }
    }
    if bytes.starts_with(b"solid") {
        return parse_stl_ascii(bytes);
    }
    if bytes.len() < 84 {
        return Err(Error::MeshParse {
            offset: bytes.len(),
            reason: "file too short for a binary STL header".into(),
        });
    }
    let count = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
    Err(Error::MeshParse {
        offset: 84 + 50 * count.min(bytes.len()),
        reason: format!(
            "binary STL length mismatch: header promises {count} triangles \
             ({} bytes) but the file has {}",
            84 + 50 * count,
            bytes.len()
        ),
    })
}

fn parse_stl_binary(bytes: &[u8], count: usize) -> Result<TriangleSurface> {
    let mut soup = Vec::with_capacity(count);
    let mut off = 84;
    for _ in 0..count {
        let mut tri = [V3::zeros(); 3];
        off += 12; // stored facet normal is recomputed from the vertices
        for v in tri.iter_mut() {
            for d in 0..3 {
                let raw = f32::from_le_bytes([
                    bytes[off],
                    bytes[off + 1],
                    bytes[off + 2],
                    bytes[off + 3],
                ]);
                if !raw.is_finite() {
                    return Err(Error::MeshParse {
                        offset: off,
                        reason: "non-finite vertex coordinate".into(),
                    });
                }
                v[d] = raw as f64;
                off += 4;
            }
        }
        off += 2; // attribute byte count
        soup.push(tri);
    }
    TriangleSurface::from_triangle_soup(&soup)
}

fn parse_stl_ascii(bytes: &[u8]) -> Result<TriangleSurface> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::MeshParse {
        offset: e.valid_up_to(),
        reason: "ASCII STL is not valid UTF-8".into(),
    })?;
    let mut soup: Vec<[V3; 3]> = Vec::new();
    let mut current: Vec<V3> = Vec::new();
    let mut offset = 0usize;
    for line in text.lines() {
        let trimmed = line.trim();
        let mut words = trimmed.split_whitespace();
        match words.next() {
            Some("vertex") => {
                let mut v = V3::zeros();
                for d in 0..3 {
                    let w = words.next().ok_or(Error::MeshParse {
                        offset,
                        reason: "vertex line needs three coordinates".into(),
                    })?;
                    v[d] = w.parse().map_err(|_| Error::MeshParse {
                        offset,
                        reason: format!("cannot parse coordinate `{w}`"),
                    })?;
                }
                current.push(v);
            }
            Some("endfacet") => {
                if current.len() != 3 {
                    return Err(Error::MeshParse {
                        offset,
                        reason: format!("facet closed with {} vertices", current.len()),
                    });
                }
                soup.push([current[0], current[1], current[2]]);
                current.clear();
            }
            _ => {}
        }
        offset += line.len() + 1;
    }
    if !current.is_empty() {
        return Err(Error::MeshParse {
            offset,
            reason: "unterminated facet at end of file".into(),
        });
    }
    if soup.is_empty() {
        return Err(Error::MeshParse {
            offset: 0,
            reason: "no facets found in ASCII STL".into(),
        });
    }
    TriangleSurface::from_triangle_soup(&soup)
}

/// Axis-aligned UV-sphere mesh used by tests and synthetic scenarios.
pub fn uv_sphere(center: V3, radius: f64, rings: usize, segments: usize) -> TriangleSurface {
    let mut vertices = vec![center + V3::new(0.0, 0.0, radius)];
    for r in 1..rings {
        let theta = std::f64::consts::PI * r as f64 / rings as f64;
        for s in 0..segments {
            let phi = 2.0 * std::f64::consts::PI * s as f64 / segments as f64;
            vertices.push(
                center
                    + V3::new(
                        radius * theta.sin() * phi.cos(),
                        radius * theta.sin() * phi.sin(),
                        radius * theta.cos(),
                    ),
            );
        }
    }
    vertices.push(center + V3::new(0.0, 0.0, -radius));
    let bottom = (vertices.len() - 1) as u32;
    let ring = |r: usize, s: usize| -> u32 { (1 + (r - 1) * segments + (s % segments)) as u32 };
    let mut triangles = Vec::new();
    for s in 0..segments {
        triangles.push([0, ring(1, s), ring(1, s + 1)]);
        triangles.push([bottom, ring(rings - 1, s + 1), ring(rings - 1, s)]);
    }
    for r in 1..rings - 1 {
        for s in 0..segments {
            let (a, b, c, d) = (ring(r, s), ring(r, s + 1), ring(r + 1, s + 1), ring(r + 1, s));
            triangles.push([a, d, c]);
            triangles.push([a, c, b]);
        }
    }
    TriangleSurface::from_indexed(vertices, triangles).expect("sphere mesh is valid")
}

/// Open cylinder lateral surface along an axis, used by synthetic scenarios.
pub fn open_cylinder(
    start: V3,
    axis_dir: V3,
    radius: f64,
    length: f64,
    rings: usize,
    segments: usize,
) -> TriangleSurface {
    let axis = axis_dir.normalize();
    let mut smallest = 0;
    for d in 1..3 {
        if axis[d].abs() < axis[smallest].abs() {
            smallest = d;
        }
    }
    let mut up = V3::zeros();
    up[smallest] = 1.0;
    let t1 = (up - axis * axis[smallest]).normalize();
    let t2 = axis.cross(&t1);
    let mut vertices = Vec::new();
    for r in 0..=rings {
        let z = length * r as f64 / rings as f64;
        for s in 0..segments {
            let phi = 2.0 * std::f64::consts::PI * s as f64 / segments as f64;
            vertices.push(start + axis * z + (t1 * phi.cos() + t2 * phi.sin()) * radius);
        }
    }
    let at = |r: usize, s: usize| -> u32 { (r * segments + (s % segments)) as u32 };
    let mut triangles = Vec::new();
    for r in 0..rings {
        for s in 0..segments {
            triangles.push([at(r, s), at(r, s + 1), at(r + 1, s + 1)]);
            triangles.push([at(r, s), at(r + 1, s + 1), at(r + 1, s)]);
        }
    }
    TriangleSurface::from_indexed(vertices, triangles).expect("cylinder mesh is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_cube_ascii() -> String {
        // 12 triangles, consistently outward-oriented
        let quads: [([f64; 3], [[f64; 3]; 4]); 6] = [
            ([0.0, 0.0, -1.0], [[0., 0., 0.], [0., 1., 0.], [1., 1., 0.], [1., 0., 0.]]),
            ([0.0, 0.0, 1.0], [[0., 0., 1.], [1., 0., 1.], [1., 1., 1.], [0., 1., 1.]]),
            ([0.0, -1.0, 0.0], [[0., 0., 0.], [1., 0., 0.], [1., 0., 1.], [0., 0., 1.]]),
            ([0.0, 1.0, 0.0], [[0., 1., 0.], [0., 1., 1.], [1., 1., 1.], [1., 1., 0.]]),
            ([-1.0, 0.0, 0.0], [[0., 0., 0.], [0., 0., 1.], [0., 1., 1.], [0., 1., 0.]]),
            ([1.0, 0.0, 0.0], [[1., 0., 0.], [1., 1., 0.], [1., 1., 1.], [1., 0., 1.]]),
        ];
        let mut out = String::from("solid cube\n");
        for (n, q) in quads {
            for tri in [[q[0], q[1], q[2]], [q[0], q[2], q[3]]] {
                out.push_str(&format!(
                    "  facet normal {} {} {}\n    outer loop\n",
                    n[0], n[1], n[2]
                ));
                for v in tri {
                    out.push_str(&format!("      vertex {} {} {}\n", v[0], v[1], v[2]));
                }
                out.push_str("    endloop\n  endfacet\n");
            }
        }
        out.push_str("endsolid cube\n");
        out
    }

    fn binary_stl(tris: &[[[f32; 3]; 3]]) -> Vec<u8> {
        let mut bytes = vec![0u8; 80];
        bytes.extend_from_slice(&(tris.len() as u32).to_le_bytes());
        for tri in tris {
            for _ in 0..3 {
                bytes.extend_from_slice(&0f32.to_le_bytes());
            }
            for v in tri {
                for x in v {
                    bytes.extend_from_slice(&x.to_le_bytes());
                }
            }
            bytes.extend_from_slice(&0u16.to_le_bytes());
        }
        bytes
    }

    #[test]
    fn ascii_cube_roundtrip() {
        let surf = parse_stl(unit_cube_ascii().as_bytes()).unwrap();
        assert_eq!(surf.triangles.len(), 12);
        assert_relative_eq!(surf.total_area, 6.0, epsilon = 1e-12);
        assert!(surf.watertight);
        assert_relative_eq!(surf.enclosed_volume(), 1.0, epsilon = 1e-12);
        assert!(surf.contains(&V3::new(0.5, 0.5, 0.5)));
        assert!(!surf.contains(&V3::new(1.5, 0.5, 0.5)));
        assert!(surf.signed_distance(&V3::new(0.5, 0.5, 0.5)) < 0.0);
        assert_relative_eq!(
            surf.signed_distance(&V3::new(0.5, 0.5, 1.3)),
            0.3,
            epsilon = 1e-12
        );
    }

    #[test]
    fn binary_parse_and_truncation() {
        let tris = [
            [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            [[0.0, 0.0, 1.0], [1.0, 0.0, 1.0], [0.0, 1.0, 1.0]],
        ];
        let bytes = binary_stl(&tris);
        let surf = parse_stl(&bytes).unwrap();
        assert_eq!(surf.triangles.len(), 2);
        assert!(!surf.watertight);

        // truncated binary file reports the expected length
        let truncated = &bytes[..bytes.len() - 7];
        match parse_stl(truncated) {
            Err(Error::MeshParse { reason, .. }) => {
                assert!(reason.contains("length mismatch"), "{reason}")
            }
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn sphere_mesh_properties() {
        let r = 0.35;
        let sphere = uv_sphere(V3::zeros(), r, 24, 48);
        assert!(sphere.watertight);
        let a_exact = 4.0 * std::f64::consts::PI * r * r;
        assert_relative_eq!(sphere.total_area, a_exact, max_relative = 0.01);
        let v_exact = 4.0 / 3.0 * std::f64::consts::PI * r.powi(3);
        assert_relative_eq!(sphere.enclosed_volume(), v_exact, max_relative = 0.02);
        assert!(sphere.contains(&V3::new(0.2, 0.1, -0.15)));
        assert!(!sphere.contains(&V3::new(0.3, 0.3, 0.3)));
    }

    #[test]
    fn extrusion_offsets_cylinder_radius() {
        let r = 0.2;
        let t = 0.03;
        let cyl = open_cylinder(V3::zeros(), V3::new(1.0, 0.0, 0.0), r, 1.0, 10, 64);
        let outer = extrude_surface(&cyl, t).unwrap();
        for v in &outer.vertices {
            let radial = (v[1] * v[1] + v[2] * v[2]).sqrt();
            // vertex normals of a faceted cylinder sit slightly inside the
            // circumscribed radius; 64 segments keep that below 1e-3
            assert_relative_eq!(radial, r + t, max_relative = 2e-3);
        }
        assert!(extrude_surface(&cyl, 0.0).is_err());

        // extruded slab volume ~ area * thickness for small offsets
        let sphere = uv_sphere(V3::zeros(), 0.3, 32, 64);
        let outer = extrude_surface(&sphere, 0.003).unwrap();
        let slab = outer.enclosed_volume() - sphere.enclosed_volume();
        assert_relative_eq!(slab, sphere.total_area * 0.003, max_relative = 0.05);

        // offsetting past the center of curvature must fail loudly:
        // invert a small sphere so its normals point inward
        let tiny = uv_sphere(V3::zeros(), 0.01, 8, 12);
        let inverted = TriangleSurface::from_indexed(
            tiny.vertices.clone(),
            tiny.triangles.iter().map(|t| [t[0], t[2], t[1]]).collect(),
        )
        .unwrap();
        assert!(extrude_surface(&inverted, 0.05).is_err());
    }

    #[test]
    fn nearest_point_on_triangles() {
        let a = V3::new(0.0, 0.0, 0.0);
        let b = V3::new(1.0, 0.0, 0.0);
        let c = V3::new(0.0, 1.0, 0.0);
        // interior projection
        let q = closest_point_on_triangle(&V3::new(0.2, 0.2, 0.7), &a, &b, &c);
        assert_relative_eq!((q - V3::new(0.2, 0.2, 0.0)).norm(), 0.0, epsilon = 1e-12);
        // vertex region
        let q = closest_point_on_triangle(&V3::new(-1.0, -1.0, 0.0), &a, &b, &c);
        assert_eq!(q, a);
        // edge region
        let q = closest_point_on_triangle(&V3::new(0.5, -2.0, 0.0), &a, &b, &c);
        assert_relative_eq!((q - V3::new(0.5, 0.0, 0.0)).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn malformed_ascii_reports_offsets() {
        let text = "solid x\n facet normal 0 0 1\n outer loop\n vertex 0 0\n";
        match parse_stl(text.as_bytes()) {
            Err(Error::MeshParse { reason, .. }) => {
                assert!(reason.contains("three coordinates"))
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
