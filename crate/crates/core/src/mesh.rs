//! Structured triangulations of axis-aligned rectangles.
//!
//! An `N x N` grid of quadrilaterals is bisected along the bottom-left to
//! top-right diagonal of every quad, giving `2*N*N` counter-clockwise
//! triangles. The mesh stores full cell-facet connectivity: every facet
//! knows its one or two incident cells, and for interior facets the "+"
//! side is the incident cell with the lower index.

use crate::error::Error;

/// Exterior boundary segment of the rectangular domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Bottom,
    Top,
    Left,
    Right,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 4] = [
        BoundaryTag::Bottom,
        BoundaryTag::Top,
        BoundaryTag::Left,
        BoundaryTag::Right,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundaryTag::Bottom => "bottom",
            BoundaryTag::Top => "top",
            BoundaryTag::Left => "left",
            BoundaryTag::Right => "right",
        }
    }
}

/// Axis-aligned rectangle `(x0, y0) .. (x1, y1)`.
#[derive(Clone, Copy, Debug)]
pub struct Rectangle {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rectangle {
    pub fn unit() -> Self {
        Rectangle { x0: 0.0, y0: 0.0, x1: 1.0, y1: 1.0 }
    }

    /// The `(-1, 1)^2` square.
    pub fn biunit() -> Self {
        Rectangle { x0: -1.0, y0: -1.0, x1: 1.0, y1: 1.0 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        p[0] >= self.x0 - tol && p[0] <= self.x1 + tol && p[1] >= self.y0 - tol && p[1] <= self.y1 + tol
    }

    /// Clamp a point onto the closed rectangle.
    pub fn clamp(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0].clamp(self.x0, self.x1), p[1].clamp(self.y0, self.y1)]
    }
}

/// One side of a facet: the incident cell and the local facet index within
/// that cell (local facet `k` is opposite local vertex `k`).
#[derive(Clone, Copy, Debug)]
pub struct FacetSide {
    pub cell: usize,
    pub local_facet: usize,
}

/// Mesh facet (edge). `vertices` are sorted by global index, which fixes the
/// parametrization `x(t) = v[0] + t (v[1] - v[0])` used for facet quadrature
/// on both sides.
#[derive(Clone, Debug)]
pub struct Facet {
    pub vertices: [usize; 2],
    /// One side for exterior facets, two for interior. `sides[0]` is the "+"
    /// side; for interior facets it is the incident cell with the lower index.
    pub sides: Vec<FacetSide>,
    pub length: f64,
    /// Unit normal outward from the "+" side cell. The "-" side normal is the
    /// exact negation.
    pub normal: [f64; 2],
    /// Boundary tag for exterior facets.
    pub tag: Option<BoundaryTag>,
}

impl Facet {
    pub fn is_interior(&self) -> bool {
        self.sides.len() == 2
    }

    /// Outward unit normal seen from side `s` (0 = "+", 1 = "-").
    pub fn side_normal(&self, s: usize) -> [f64; 2] {
        if s == 0 {
            self.normal
        } else {
            [-self.normal[0], -self.normal[1]]
        }
    }
}

/// Conforming triangulation of a rectangle.
#[derive(Clone, Debug)]
pub struct TriangularMesh {
    pub vertices: Vec<[f64; 2]>,
    /// Vertex indices per cell, counter-clockwise.
    pub cells: Vec<[usize; 3]>,
    pub facets: Vec<Facet>,
    /// Global facet index per cell and local facet.
    pub cell_facets: Vec<[usize; 3]>,
    pub cell_area: Vec<f64>,
    pub domain: Rectangle,
    /// Quadrilaterals per direction of the structured grid.
    pub divisions: usize,
}

impl TriangularMesh {
    /// Build the structured triangulation with `n x n` quads, each bisected
    /// along its bottom-left to top-right diagonal.
    pub fn structured(domain: Rectangle, n: usize) -> Result<Self, Error> {
        if n == 0 {
            return Err(Error::InvalidMesh("division count must be at least 1".into()));
        }
        if !(domain.width() > 0.0) || !(domain.height() > 0.0) {
            return Err(Error::InvalidMesh(format!(
                "degenerate rectangle: width {}, height {}",
                domain.width(),
                domain.height()
            )));
        }

        let nv = n + 1;
        let mut vertices = Vec::with_capacity(nv * nv);
        for j in 0..nv {
            for i in 0..nv {
                // Exact end coordinates keep boundary tagging robust.
                let x = if i == n { domain.x1 } else { domain.x0 + domain.width() * (i as f64) / (n as f64) };
                let y = if j == n { domain.y1 } else { domain.y0 + domain.height() * (j as f64) / (n as f64) };
                vertices.push([x, y]);
            }
        }
        let vid = |i: usize, j: usize| j * nv + i;

        let mut cells = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let a = vid(i, j);
                let b = vid(i + 1, j);
                let c = vid(i + 1, j + 1);
                let d = vid(i, j + 1);
                // Diagonal a -> c; both triangles counter-clockwise.
                cells.push([a, b, c]);
                cells.push([a, c, d]);
            }
        }

        let mut mesh = TriangularMesh {
            vertices,
            cells,
            facets: Vec::new(),
            cell_facets: Vec::new(),
            cell_area: Vec::new(),
            domain,
            divisions: n,
        };
        mesh.build_connectivity()?;
        Ok(mesh)
    }

    fn build_connectivity(&mut self) -> Result<(), Error> {
        use std::collections::HashMap;

        self.cell_area = self
            .cells
            .iter()
            .map(|c| {
                let [a, b, d] = [self.vertices[c[0]], self.vertices[c[1]], self.vertices[c[2]]];
                0.5 * ((b[0] - a[0]) * (d[1] - a[1]) - (b[1] - a[1]) * (d[0] - a[0]))
            })
            .collect();
        if let Some((c, &area)) = self.cell_area.iter().enumerate().find(|(_, &a)| !(a > 0.0)) {
            return Err(Error::InvalidMesh(format!("cell {c} is degenerate or inverted (area {area})")));
        }

        let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut facets: Vec<Facet> = Vec::new();
        self.cell_facets = vec![[usize::MAX; 3]; self.cells.len()];

        for (cell, verts) in self.cells.iter().enumerate() {
            for local in 0..3 {
                // Local facet k is opposite local vertex k.
                let va = verts[(local + 1) % 3];
                let vb = verts[(local + 2) % 3];
                let key = (va.min(vb), va.max(vb));
                let fid = *edge_ids.entry(key).or_insert_with(|| {
                    let pa = self.vertices[key.0];
                    let pb = self.vertices[key.1];
                    let length = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
                    facets.push(Facet {
                        vertices: [key.0, key.1],
                        sides: Vec::new(),
                        length,
                        normal: [0.0, 0.0],
                        tag: None,
                    });
                    facets.len() - 1
                });
                facets[fid].sides.push(FacetSide { cell, local_facet: local });
                self.cell_facets[cell][local] = fid;
            }
        }

        for facet in facets.iter_mut() {
            facet.sides.sort_by_key(|s| s.cell);
            match facet.sides.len() {
                1 => {
                    facet.tag = Some(self.classify_exterior(facet.vertices)?);
                }
                2 => {}
                k => {
                    return Err(Error::InvalidMesh(format!("facet shared by {k} cells")));
                }
            }
            facet.normal = self.outward_normal(facet.sides[0]);
        }

        self.facets = facets;
        Ok(())
    }

    fn classify_exterior(&self, verts: [usize; 2]) -> Result<BoundaryTag, Error> {
        let a = self.vertices[verts[0]];
        let b = self.vertices[verts[1]];
        let tol = 1e-12 * self.domain.width().max(self.domain.height());
        let on = |v: f64, bound: f64| (v - bound).abs() <= tol;
        if on(a[1], self.domain.y0) && on(b[1], self.domain.y0) {
            Ok(BoundaryTag::Bottom)
        } else if on(a[1], self.domain.y1) && on(b[1], self.domain.y1) {
            Ok(BoundaryTag::Top)
        } else if on(a[0], self.domain.x0) && on(b[0], self.domain.x0) {
            Ok(BoundaryTag::Left)
        } else if on(a[0], self.domain.x1) && on(b[0], self.domain.x1) {
            Ok(BoundaryTag::Right)
        } else {
            Err(Error::InvalidMesh(format!("exterior facet {verts:?} lies on no domain side")))
        }
    }

    /// Outward unit normal of a cell's local facet, computed from the
    /// counter-clockwise vertex order.
    pub fn outward_normal(&self, side: FacetSide) -> [f64; 2] {
        let verts = self.cells[side.cell];
        let pa = self.vertices[verts[(side.local_facet + 1) % 3]];
        let pb = self.vertices[verts[(side.local_facet + 2) % 3]];
        let dx = pb[0] - pa[0];
        let dy = pb[1] - pa[1];
        let len = (dx * dx + dy * dy).sqrt();
        [dy / len, -dx / len]
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn cell_coords(&self, cell: usize) -> [[f64; 2]; 3] {
        let v = self.cells[cell];
        [self.vertices[v[0]], self.vertices[v[1]], self.vertices[v[2]]]
    }

    pub fn cell_centroid(&self, cell: usize) -> [f64; 2] {
        let [a, b, c] = self.cell_coords(cell);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Partition all facet indices into (interior, exterior).
    pub fn classify_facets(&self) -> (Vec<usize>, Vec<usize>) {
        let mut interior = Vec::new();
        let mut exterior = Vec::new();
        for (f, facet) in self.facets.iter().enumerate() {
            if facet.is_interior() {
                interior.push(f);
            } else {
                exterior.push(f);
            }
        }
        (interior, exterior)
    }

    pub fn exterior_facets_tagged(&self, tag: BoundaryTag) -> Vec<usize> {
        self.facets
            .iter()
            .enumerate()
            .filter(|(_, f)| f.tag == Some(tag))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn total_area(&self) -> f64 {
        self.cell_area.iter().sum()
    }

    /// Typical element size: the quad edge length of the structured grid.
    pub fn mesh_size(&self) -> f64 {
        self.domain.width().max(self.domain.height()) / self.divisions as f64
    }

    /// Dump `vertices.csv` (id,x,y) and `cells.csv` (id,v0,v1,v2) into `dir`.
    pub fn write_csv(&self, dir: &std::path::Path) -> std::io::Result<()> {
        use std::io::Write;
        std::fs::create_dir_all(dir)?;
        let mut vf = std::io::BufWriter::new(std::fs::File::create(dir.join("vertices.csv"))?);
        writeln!(vf, "id,x,y")?;
        for (i, v) in self.vertices.iter().enumerate() {
            writeln!(vf, "{i},{:.16e},{:.16e}", v[0], v[1])?;
        }
        let mut cf = std::io::BufWriter::new(std::fs::File::create(dir.join("cells.csv"))?);
        writeln!(cf, "id,v0,v1,v2")?;
        for (i, c) in self.cells.iter().enumerate() {
            writeln!(cf, "{i},{},{},{}", c[0], c[1], c[2])?;
        }
        Ok(())
    }
}
