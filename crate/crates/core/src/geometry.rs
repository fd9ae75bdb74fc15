//! Two-subdomain triangulation of a circular cell with a concentric nucleus.
//!
//! The mesher places concentric polygonal rings of vertices and zips each
//! pair of neighbouring rings into a strip of triangles. The nuclear
//! envelope and any extra feature radii are rings of the mesh, so every
//! element lies entirely on one side of them and the interface is
//! conforming by construction.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::Compartment;

pub type Point = [f64; 2];

/// Upper bound on `max element diameter / target_h` for meshes produced by
/// [`build_disk_mesh`].
pub const DIAMETER_BOUND: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CellGeometry {
    /// μm
    pub cell_radius: f64,
    /// μm
    pub nucleus_radius: f64,
    /// μm
    pub center: Point,
}

impl Default for CellGeometry {
    fn default() -> Self {
        Self {
            cell_radius: 10.0,
            nucleus_radius: 4.0,
            center: [0.0, 0.0],
        }
    }
}

impl CellGeometry {
    pub fn new(cell_radius: f64, nucleus_radius: f64) -> Result<Self> {
        let g = Self {
            cell_radius,
            nucleus_radius,
            center: [0.0, 0.0],
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.nucleus_radius > 0.0
            && self.cell_radius.is_finite()
            && self.nucleus_radius < self.cell_radius
            && self.center.iter().all(|c| c.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Geometry(format!(
                "need 0 < nucleus_radius < cell_radius, got nucleus_radius = {} and cell_radius = {}",
                self.nucleus_radius, self.cell_radius
            )))
        }
    }

    pub fn radius_of(&self, x: Point) -> f64 {
        (x[0] - self.center[0]).hypot(x[1] - self.center[1])
    }

    /// Exact area of the cytoplasmic annulus.
    pub fn cytoplasm_area(&self) -> f64 {
        PI * (self.cell_radius.powi(2) - self.nucleus_radius.powi(2))
    }

    pub fn nucleus_area(&self) -> f64 {
        PI * self.nucleus_radius.powi(2)
    }

    /// Exact length of the nuclear envelope.
    pub fn envelope_length(&self) -> f64 {
        2.0 * PI * self.nucleus_radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaceKind {
    OuterBoundary,
    Interior,
    Transmission,
}

impl FaceKind {
    fn code(self) -> &'static str {
        match self {
            FaceKind::OuterBoundary => "boundary",
            FaceKind::Interior => "interior",
            FaceKind::Transmission => "transmission",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    /// Counter-clockwise vertex indices.
    pub vertices: [usize; 3],
    pub compartment: Compartment,
    pub degree: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub vertices: [usize; 2],
    /// The `+` side. Normals stored on the face point out of this element.
    pub left: usize,
    /// The `-` side, absent on the outer boundary.
    pub right: Option<usize>,
    pub kind: FaceKind,
    pub normal: Point,
    pub length: f64,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub elements: Vec<Element>,
    pub faces: Vec<Face>,
    /// Face ids of each element, in no particular order.
    pub element_faces: Vec<[usize; 3]>,
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

impl Mesh {
    /// Builds faces and classifications from raw elements. Triangles are
    /// reoriented counter-clockwise; degenerate triangles are rejected.
    pub fn from_parts(vertices: Vec<Point>, mut elements: Vec<Element>) -> Result<Self> {
        for (e, el) in elements.iter_mut().enumerate() {
            if el.vertices.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::Mesh(format!("element {e} references a missing vertex")));
            }
            let [a, b, c] = el.vertices.map(|v| vertices[v]);
            let area2 = cross(sub(b, a), sub(c, a));
            let scale = dist(a, b).max(dist(b, c)).max(dist(c, a));
            if area2.abs() <= 1e-12 * scale * scale || !area2.is_finite() {
                return Err(Error::Mesh(format!("element {e} is degenerate")));
            }
            if area2 < 0.0 {
                el.vertices.swap(1, 2);
            }
        }

        let mut edge_map: HashMap<(usize, usize), (usize, Option<usize>)> = HashMap::new();
        let mut order: Vec<(usize, usize)> = Vec::new();
        for (e, el) in elements.iter().enumerate() {
            for k in 0..3 {
                let a = el.vertices[k];
                let b = el.vertices[(k + 1) % 3];
                let key = (a.min(b), a.max(b));
                match edge_map.get_mut(&key) {
                    None => {
                        edge_map.insert(key, (e, None));
                        order.push(key);
                    }
                    Some((_, slot @ None)) => *slot = Some(e),
                    Some(_) => {
                        return Err(Error::Mesh(format!(
                            "edge ({}, {}) shared by more than two elements",
                            key.0, key.1
                        )))
                    }
                }
            }
        }

        let mut faces = Vec::with_capacity(order.len());
        let mut element_faces = vec![[usize::MAX; 3]; elements.len()];
        let mut filled = vec![0usize; elements.len()];
        for key in order {
            let (left, right) = edge_map[&key];
            let kind = match right {
                None => FaceKind::OuterBoundary,
                Some(r) if elements[r].compartment != elements[left].compartment => {
                    FaceKind::Transmission
                }
                Some(_) => FaceKind::Interior,
            };
            let (pa, pb) = (vertices[key.0], vertices[key.1]);
            let t = sub(pb, pa);
            let length = t[0].hypot(t[1]);
            let mut normal = [t[1] / length, -t[0] / length];
            let centroid = element_centroid(&vertices, &elements[left]);
            let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
            if normal[0] * (mid[0] - centroid[0]) + normal[1] * (mid[1] - centroid[1]) < 0.0 {
                normal = [-normal[0], -normal[1]];
            }
            let id = faces.len();
            for e in std::iter::once(left).chain(right) {
                element_faces[e][filled[e]] = id;
                filled[e] += 1;
            }
            faces.push(Face {
                vertices: [key.0, key.1],
                left,
                right,
                kind,
                normal,
                length,
            });
        }

        Ok(Mesh {
            vertices,
            elements,
            faces,
            element_faces,
        })
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn corners(&self, element: usize) -> [Point; 3] {
        self.elements[element].vertices.map(|v| self.vertices[v])
    }

    pub fn area(&self, element: usize) -> f64 {
        let [a, b, c] = self.corners(element);
        0.5 * cross(sub(b, a), sub(c, a))
    }

    pub fn centroid(&self, element: usize) -> Point {
        element_centroid(&self.vertices, &self.elements[element])
    }

    /// Element diameter: the longest edge of a triangle.
    pub fn diameter(&self, element: usize) -> f64 {
        let [a, b, c] = self.corners(element);
        dist(a, b).max(dist(b, c)).max(dist(c, a))
    }

    pub fn face(&self, face_id: usize) -> Result<&Face> {
        self.faces.get(face_id).ok_or(Error::UnknownFace(face_id))
    }

    pub fn classify_face(&self, face_id: usize) -> Result<FaceKind> {
        Ok(self.face(face_id)?.kind)
    }

    /// Unit normal of `face_id` pointing out of `from_element`.
    pub fn face_normal(&self, face_id: usize, from_element: usize) -> Result<Point> {
        let f = self.face(face_id)?;
        if f.left == from_element {
            Ok(f.normal)
        } else if f.right == Some(from_element) {
            Ok([-f.normal[0], -f.normal[1]])
        } else {
            Err(Error::NotAdjacent {
                face: face_id,
                element: from_element,
            })
        }
    }

    pub fn face_midpoint(&self, face_id: usize) -> Point {
        let f = &self.faces[face_id];
        let (a, b) = (self.vertices[f.vertices[0]], self.vertices[f.vertices[1]]);
        [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
    }

    /// Face mean of the element diameters.
    pub fn face_h(&self, face_id: usize) -> f64 {
        let f = &self.faces[face_id];
        match f.right {
            Some(r) => 0.5 * (self.diameter(f.left) + self.diameter(r)),
            None => self.diameter(f.left),
        }
    }

    /// Face mean of the element degrees.
    pub fn face_m(&self, face_id: usize) -> f64 {
        let f = &self.faces[face_id];
        match f.right {
            Some(r) => 0.5 * (self.elements[f.left].degree + self.elements[r].degree) as f64,
            None => self.elements[f.left].degree as f64,
        }
    }

    pub fn compartment_area(&self, compartment: Compartment) -> f64 {
        (0..self.n_elements())
            .filter(|&e| self.elements[e].compartment == compartment)
            .map(|e| self.area(e))
            .sum()
    }

    pub fn faces_of_kind(&self, kind: FaceKind) -> impl Iterator<Item = usize> + '_ {
        self.faces
            .iter()
            .enumerate()
            .filter(move |(_, f)| f.kind == kind)
            .map(|(i, _)| i)
    }

    pub fn max_diameter(&self) -> f64 {
        (0..self.n_elements()).map(|e| self.diameter(e)).fold(0.0, f64::max)
    }

    /// Plain-text dump: a header line with counts, then vertices, elements
    /// (`v0 v1 v2 subdomain degree`) and faces (`v0 v1 left right kind`,
    /// `right = -1` on the boundary).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# ran-import mesh v1: {} vertices, {} elements, {} faces",
            self.vertices.len(),
            self.elements.len(),
            self.faces.len()
        );
        let _ = writeln!(
            s,
            "{} {} {}",
            self.vertices.len(),
            self.elements.len(),
            self.faces.len()
        );
        for v in &self.vertices {
            let _ = writeln!(s, "{:.17e} {:.17e}", v[0], v[1]);
        }
        for el in &self.elements {
            let [a, b, c] = el.vertices;
            let _ = writeln!(s, "{a} {b} {c} {} {}", el.compartment.tag(), el.degree);
        }
        for f in &self.faces {
            let right = f.right.map_or(-1, |r| r as i64);
            let _ = writeln!(
                s,
                "{} {} {} {} {}",
                f.vertices[0],
                f.vertices[1],
                f.left,
                right,
                f.kind.code()
            );
        }
        s
    }

    pub fn write_text(&self, path: &std::path::Path) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn set_degree(&mut self, degree: usize) {
        for el in &mut self.elements {
            el.degree = degree;
        }
    }
}

fn element_centroid(vertices: &[Point], el: &Element) -> Point {
    let [a, b, c] = el.vertices.map(|v| vertices[v]);
    [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
}

/// Triangulates the cell with nominal element size `target_h` and uniform
/// polynomial degree. `feature_radii` adds extra rings (e.g. the edge of an
/// initial-condition band) so that piecewise data aligns with elements.
pub fn build_disk_mesh_with_features(
    geometry: &CellGeometry,
    target_h: f64,
    degree: usize,
    feature_radii: &[f64],
) -> Result<Mesh> {
    geometry.validate()?;
    if !(target_h > 0.0 && target_h.is_finite()) {
        return Err(Error::Geometry(format!("target_h must be positive, got {target_h}")));
    }
    if degree < 1 {
        return Err(Error::Geometry("mesh degree must be at least 1".into()));
    }
    let (a, r_cell) = (geometry.nucleus_radius, geometry.cell_radius);

    let mut breaks = vec![0.0, a, r_cell];
    for &r in feature_radii {
        if r > 0.0 && r < r_cell && (r - a).abs() > 1e-9 * r_cell {
            breaks.push(r);
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|x, y| (*x - *y).abs() <= 1e-9 * r_cell);

    // ring radii, each flagged with whether the layer inside it is nuclear
    let mut radii = vec![0.0];
    for w in breaks.windows(2) {
        let layers = ((w[1] - w[0]) / target_h).ceil().max(1.0) as usize;
        for k in 1..=layers {
            radii.push(w[0] + (w[1] - w[0]) * k as f64 / layers as f64);
        }
    }
    let ring_count = |r: f64| ((2.0 * PI * r / target_h).ceil() as usize).max(6);

    let c = geometry.center;
    let mut vertices = vec![c];
    let mut rings: Vec<Vec<usize>> = vec![vec![0]];
    for (k, &r) in radii.iter().enumerate().skip(1) {
        let n = ring_count(r);
        // stagger alternate rings by half a segment
        let offset = if k % 2 == 0 { 0.5 } else { 0.0 };
        let start = vertices.len();
        for j in 0..n {
            let theta = 2.0 * PI * (j as f64 + offset) / n as f64;
            vertices.push([c[0] + r * theta.cos(), c[1] + r * theta.sin()]);
        }
        rings.push((start..start + n).collect());
    }

    let mut elements = Vec::new();
    let angle = |v: usize| {
        let p = vertices[v];
        let t = (p[1] - c[1]).atan2(p[0] - c[0]);
        if t < -1e-12 {
            t + 2.0 * PI
        } else {
            t.max(0.0)
        }
    };
    for k in 1..rings.len() {
        let compartment = if radii[k] <= a * (1.0 + 1e-12) {
            Compartment::Nucleus
        } else {
            Compartment::Cytoplasm
        };
        let outer = &rings[k];
        let mut push = |vs: [usize; 3]| {
            elements.push(Element {
                vertices: vs,
                compartment,
                degree,
            })
        };
        if k == 1 {
            let n = outer.len();
            for j in 0..n {
                push([0, outer[j], outer[(j + 1) % n]]);
            }
            continue;
        }
        let inner = &rings[k - 1];
        let (na, nb) = (inner.len(), outer.len());
        let ang_a: Vec<f64> = inner.iter().map(|&v| angle(v)).collect();
        let ang_b: Vec<f64> = outer.iter().map(|&v| angle(v)).collect();
        let next_angle = |angles: &[f64], i: usize| {
            if i + 1 < angles.len() {
                angles[i + 1]
            } else {
                angles[0] + 2.0 * PI
            }
        };
        let (mut i, mut j) = (0usize, 0usize);
        while i < na || j < nb {
            let advance_inner = if i == na {
                false
            } else if j == nb {
                true
            } else {
                next_angle(&ang_a, i) <= next_angle(&ang_b, j)
            };
            if advance_inner {
                push([inner[i], inner[(i + 1) % na], outer[j % nb]]);
                i += 1;
            } else {
                push([inner[i % na], outer[(j + 1) % nb], outer[j]]);
                j += 1;
            }
        }
    }

    Mesh::from_parts(vertices, elements)
}

/// Triangulates the cell with nominal element size `target_h`.
pub fn build_disk_mesh(geometry: &CellGeometry, target_h: f64, degree: usize) -> Result<Mesh> {
    build_disk_mesh_with_features(geometry, target_h, degree, &[])
}
