//! Conforming triangulations of rectangles.

use std::collections::HashMap;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("cell counts must be positive (got nx = {nx}, ny = {ny})")]
    CellCount { nx: usize, ny: usize },
    #[error("degenerate bounds: [{x0}, {x1}] x [{y0}, {y1}]")]
    DegenerateBounds { x0: f64, x1: f64, y0: f64, y1: f64 },
    #[error("triangle {0} is degenerate or clockwise")]
    DegenerateElement(usize),
    #[error("triangle {triangle} references vertex {vertex}, but the mesh has {count} vertices")]
    VertexIndex { triangle: usize, vertex: usize, count: usize },
    #[error("edge ({0}, {1}) is shared by more than two triangles")]
    NonManifoldEdge(usize, usize),
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub const UNIT: Rect = Rect { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 };

    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self, MeshError> {
        let r = Rect { x0, x1, y0, y1 };
        if !(x1 > x0 && y1 > y0) || ![x0, x1, y0, y1].iter().all(|v| v.is_finite()) {
            return Err(MeshError::DegenerateBounds { x0, x1, y0, y1 });
        }
        Ok(r)
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    /// True for sides whose outward normal is `(±1, 0)`.
    pub fn is_vertical(self) -> bool {
        matches!(self, Side::Left | Side::Right)
    }

    fn bit(self) -> u8 {
        match self {
            Side::Left => 1,
            Side::Right => 2,
            Side::Bottom => 4,
            Side::Top => 8,
        }
    }
}

/// Set of boundary sides a vertex lies on. Corners carry two.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct SideSet(u8);

impl SideSet {
    pub fn insert(&mut self, side: Side) {
        self.0 |= side.bit();
    }

    pub fn contains(self, side: Side) -> bool {
        self.0 & side.bit() != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn has_vertical(self) -> bool {
        self.contains(Side::Left) || self.contains(Side::Right)
    }

    pub fn has_horizontal(self) -> bool {
        self.contains(Side::Bottom) || self.contains(Side::Top)
    }

    pub fn iter(self) -> impl Iterator<Item = Side> {
        Side::ALL.into_iter().filter(move |s| self.contains(*s))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    /// `None` for boundary edges that do not lie on a side of the bounding
    /// box (only possible for meshes built with [`Mesh::from_triangles`]).
    pub side: Option<Side>,
    pub triangle: usize,
}

/// Cached affine data of one triangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElementGeometry {
    pub area: f64,
    /// Gradients of the barycentric coordinates, constant on the element.
    pub grad_lambda: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn from_vertices(p: [[f64; 2]; 3]) -> Option<Self> {
        let [[x0, y0], [x1, y1], [x2, y2]] = p;
        let det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
        let scale = ((x1 - x0).abs() + (x2 - x0).abs() + (y1 - y0).abs() + (y2 - y0).abs()).powi(2);
        if !(det > 1e-14 * scale) {
            return None;
        }
        let inv = 1.0 / det;
        Some(ElementGeometry {
            area: 0.5 * det,
            grad_lambda: [
                [(y1 - y2) * inv, (x2 - x1) * inv],
                [(y2 - y0) * inv, (x0 - x2) * inv],
                [(y0 - y1) * inv, (x1 - x0) * inv],
            ],
        })
    }
}

/// Triangulation with boundary classification and per-element geometry.
///
/// Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    vertex_sides: Vec<SideSet>,
    geometry: Vec<ElementGeometry>,
    bounds: Rect,
}

impl Mesh {
    /// Uniform `nx` by `ny` grid on `bounds`, each cell split along its
    /// lower-left to upper-right diagonal.
    pub fn rectangle(nx: usize, ny: usize, bounds: Rect) -> Result<Self, MeshError> {
        if nx == 0 || ny == 0 {
            return Err(MeshError::CellCount { nx, ny });
        }
        let bounds = Rect::new(bounds.x0, bounds.x1, bounds.y0, bounds.y1)?;
        let hx = (bounds.x1 - bounds.x0) / nx as f64;
        let hy = (bounds.y1 - bounds.y0) / ny as f64;
        let coord = |i: usize, n: usize, lo: f64, hi: f64, h: f64| {
            // pin the last node so boundary coordinates match the bounds exactly
            if i == n {
                hi
            } else {
                lo + i as f64 * h
            }
        };
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([coord(i, nx, bounds.x0, bounds.x1, hx), coord(j, ny, bounds.y0, bounds.y1, hy)]);
            }
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        Self::build(vertices, triangles, bounds)
    }

    /// Unit square `nx` by `ny` grid.
    pub fn unit_square(nx: usize, ny: usize) -> Result<Self, MeshError> {
        Self::rectangle(nx, ny, Rect::UNIT)
    }

    /// Mesh from explicit vertices and counter-clockwise triangles. Boundary
    /// edges are tagged with the side of the bounding box they lie on.
    pub fn from_triangles(vertices: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &[x, y] in &vertices {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        let bounds = Rect::new(x0, x1, y0, y1)?;
        Self::build(vertices, triangles, bounds)
    }

    fn build(vertices: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>, bounds: Rect) -> Result<Self, MeshError> {
        let mut geometry = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= vertices.len() {
                    return Err(MeshError::VertexIndex { triangle: t, vertex: v, count: vertices.len() });
                }
            }
            let g = ElementGeometry::from_vertices([vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]])
                .ok_or(MeshError::DegenerateElement(t))?;
            geometry.push(g);
        }

        // edge -> (first triangle, use count), in first-seen order for determinism
        let mut edge_use: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        let mut order = Vec::new();
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let entry = edge_use.entry(key).or_insert_with(|| {
                    order.push((key, [a, b]));
                    (t, 0)
                });
                entry.1 += 1;
                if entry.1 > 2 {
                    return Err(MeshError::NonManifoldEdge(key.0, key.1));
                }
            }
        }

        let mut boundary_edges = Vec::new();
        let mut vertex_sides = vec![SideSet::default(); vertices.len()];
        for (key, oriented) in order {
            let (triangle, count) = edge_use[&key];
            if count != 1 {
                continue;
            }
            let (p, q) = (vertices[oriented[0]], vertices[oriented[1]]);
            let side = if p[0] == bounds.x0 && q[0] == bounds.x0 {
                Some(Side::Left)
            } else if p[0] == bounds.x1 && q[0] == bounds.x1 {
                Some(Side::Right)
            } else if p[1] == bounds.y0 && q[1] == bounds.y0 {
                Some(Side::Bottom)
            } else if p[1] == bounds.y1 && q[1] == bounds.y1 {
                Some(Side::Top)
            } else {
                None
            };
            if let Some(s) = side {
                vertex_sides[oriented[0]].insert(s);
                vertex_sides[oriented[1]].insert(s);
            }
            boundary_edges.push(BoundaryEdge { vertices: oriented, side, triangle });
        }

        Ok(Mesh { vertices, triangles, boundary_edges, vertex_sides, geometry, bounds })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn bounds(&self) -> Rect {
        self.bounds
    }

    /// Boundary sides the vertex lies on (empty for interior vertices).
    pub fn vertex_sides(&self, v: usize) -> SideSet {
        self.vertex_sides[v]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        !self.vertex_sides[v].is_empty()
    }

    pub fn geometry(&self, t: usize) -> &ElementGeometry {
        &self.geometry[t]
    }

    pub fn triangle_points(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Physical point of barycentric coordinates `bary` in triangle `t`.
    pub fn map_point(&self, t: usize, bary: [f64; 3]) -> [f64; 2] {
        let p = self.triangle_points(t);
        [
            bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0],
            bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1],
        ]
    }

    pub fn total_area(&self) -> f64 {
        self.geometry.iter().map(|g| g.area).sum()
    }

    /// Largest element diameter.
    pub fn h_max(&self) -> f64 {
        (0..self.num_triangles())
            .map(|t| {
                let p = self.triangle_points(t);
                let d = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
                d(p[0], p[1]).max(d(p[1], p[2])).max(d(p[2], p[0]))
            })
            .fold(0.0, f64::max)
    }
}

/// Area and barycentric gradients of triangle `t`.
pub fn element_geometry(mesh: &Mesh, t: usize) -> Result<ElementGeometry, MeshError> {
    if t >= mesh.num_triangles() {
        return Err(MeshError::DegenerateElement(t));
    }
    ElementGeometry::from_vertices(mesh.triangle_points(t)).ok_or(MeshError::DegenerateElement(t))
}
