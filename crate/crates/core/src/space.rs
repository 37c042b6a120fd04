//! Global continuous function spaces over a triangulation.
//!
//! DOFs are numbered vertices first, then `p - 1` DOFs per mesh facet
//! (ordered along the facet from its lower-indexed global vertex), then
//! cell-interior DOFs. Shared facets therefore receive identical global
//! indices from both incident cells, which is the C0 conformity the stream
//! function space relies on.

use std::sync::Arc;

use crate::element::{CellGeometry, NodeEntity, ReferenceElement};
use crate::error::Error;
use crate::mesh::{BoundaryTag, TriangularMesh};

/// Prescribed constant value per tagged boundary segment.
#[derive(Clone, Debug, Default)]
pub struct DirichletSpec {
    pub segments: Vec<(BoundaryTag, f64)>,
}

impl DirichletSpec {
    pub fn none() -> Self {
        DirichletSpec { segments: Vec::new() }
    }

    /// Constrain the whole boundary to one value.
    pub fn whole_boundary(value: f64) -> Self {
        DirichletSpec { segments: BoundaryTag::ALL.iter().map(|&t| (t, value)).collect() }
    }

    pub fn new(segments: Vec<(BoundaryTag, f64)>) -> Self {
        DirichletSpec { segments }
    }
}

/// Cell-to-global DOF numbering plus boundary constraint bookkeeping.
#[derive(Clone, Debug)]
pub struct DofMap {
    pub cell_to_global: Vec<Vec<usize>>,
    pub total_dofs: usize,
    /// Physical coordinates of every global DOF (Lagrange node).
    pub dof_coords: Vec<[f64; 2]>,
    /// Constraint value per DOF, `None` when free.
    pub constraint: Vec<Option<f64>>,
    /// Position in the reduced (free) numbering, `usize::MAX` when constrained.
    pub free_index: Vec<usize>,
    pub n_free: usize,
}

impl DofMap {
    pub fn n_constrained(&self) -> usize {
        self.total_dofs - self.n_free
    }

    #[inline]
    pub fn is_constrained(&self, dof: usize) -> bool {
        self.constraint[dof].is_some()
    }
}

/// A continuous Lagrange space of fixed degree on a mesh, with Dirichlet
/// constraints resolved at build time.
pub struct FunctionSpace {
    pub mesh: Arc<TriangularMesh>,
    pub element: ReferenceElement,
    pub dofmap: DofMap,
    /// Cached affine geometry per cell.
    pub geometry: Vec<CellGeometry>,
}

impl FunctionSpace {
    pub fn new(mesh: Arc<TriangularMesh>, degree: usize, dirichlet: &DirichletSpec) -> Result<Arc<Self>, Error> {
        if degree > 6 {
            return Err(Error::InvalidSpace(format!("degree {degree} exceeds the supported maximum of 6")));
        }
        let element = ReferenceElement::new(degree)?;
        for (tag, _) in &dirichlet.segments {
            if mesh.exterior_facets_tagged(*tag).is_empty() {
                return Err(Error::InvalidSpace(format!("boundary tag {} not present in mesh", tag.name())));
            }
        }

        let p = degree;
        let n_vertices = mesh.n_vertices();
        let n_facets = mesh.n_facets();
        let per_facet = p - 1;
        let per_cell = if p >= 3 { (p - 1) * (p - 2) / 2 } else { 0 };
        let total_dofs = n_vertices + n_facets * per_facet + mesh.n_cells() * per_cell;

        let geometry: Vec<CellGeometry> = (0..mesh.n_cells())
            .map(|c| CellGeometry::new(mesh.cell_coords(c)))
            .collect::<Result<_, _>>()?;

        let mut cell_to_global = Vec::with_capacity(mesh.n_cells());
        let mut dof_coords = vec![[0.0; 2]; total_dofs];
        for cell in 0..mesh.n_cells() {
            let verts = mesh.cells[cell];
            let mut globals = Vec::with_capacity(element.dof_count());
            for (local, entity) in element.node_entities().iter().enumerate() {
                let g = match *entity {
                    NodeEntity::Vertex(k) => verts[k],
                    NodeEntity::Edge { edge, pos } => {
                        let ga = verts[(edge + 1) % 3];
                        let gb = verts[(edge + 2) % 3];
                        let facet = mesh.cell_facets[cell][edge];
                        // Orientation-safe position along the facet, counted
                        // from the lower-indexed global vertex.
                        let gpos = if ga < gb { pos } else { p - pos };
                        n_vertices + facet * per_facet + (gpos - 1)
                    }
                    NodeEntity::Interior(m) => n_vertices + n_facets * per_facet + cell * per_cell + m,
                };
                dof_coords[g] = geometry[cell].to_physical(element.nodes()[local]);
                globals.push(g);
            }
            cell_to_global.push(globals);
        }

        let mut constraint = vec![None; total_dofs];
        for (tag, value) in &dirichlet.segments {
            for fid in mesh.exterior_facets_tagged(*tag) {
                let facet = &mesh.facets[fid];
                for v in facet.vertices {
                    constraint[v] = Some(*value);
                }
                for k in 0..per_facet {
                    constraint[n_vertices + fid * per_facet + k] = Some(*value);
                }
            }
        }

        let mut free_index = vec![usize::MAX; total_dofs];
        let mut n_free = 0;
        for dof in 0..total_dofs {
            if constraint[dof].is_none() {
                free_index[dof] = n_free;
                n_free += 1;
            }
        }

        Ok(Arc::new(FunctionSpace {
            mesh,
            element,
            dofmap: DofMap { cell_to_global, total_dofs, dof_coords, constraint, free_index, n_free },
            geometry,
        }))
    }

    pub fn degree(&self) -> usize {
        self.element.degree()
    }

    pub fn total_dofs(&self) -> usize {
        self.dofmap.total_dofs
    }
}

/// Stack-buffer capacity for per-cell basis evaluation (covers `p <= 6`).
const MAX_CELL_DOFS: usize = 28;

/// Coefficient vector over a [`FunctionSpace`].
#[derive(Clone)]
pub struct ScalarField {
    pub space: Arc<FunctionSpace>,
    pub coeffs: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(space: Arc<FunctionSpace>) -> Self {
        let n = space.total_dofs();
        ScalarField { space, coeffs: vec![0.0; n] }
    }

    /// Nodal interpolant: coefficients are the field values at the Lagrange
    /// nodes.
    pub fn interpolate(space: Arc<FunctionSpace>, f: impl Fn([f64; 2]) -> f64) -> Self {
        let coeffs = space.dofmap.dof_coords.iter().map(|&x| f(x)).collect();
        ScalarField { space, coeffs }
    }

    /// Rebuild the full coefficient vector from a reduced solution on the
    /// free DOFs, filling constrained DOFs with their prescribed values.
    pub fn from_free(space: Arc<FunctionSpace>, free: &[f64]) -> Self {
        assert_eq!(free.len(), space.dofmap.n_free);
        let coeffs = (0..space.total_dofs())
            .map(|dof| match space.dofmap.constraint[dof] {
                Some(v) => v,
                None => free[space.dofmap.free_index[dof]],
            })
            .collect();
        ScalarField { space, coeffs }
    }

    pub fn eval_in_cell(&self, cell: usize, ref_pt: [f64; 2]) -> f64 {
        let el = &self.space.element;
        let n = el.dof_count();
        let mut buf = [0.0f64; MAX_CELL_DOFS];
        el.eval_values(ref_pt, &mut buf[..n]);
        self.space.dofmap.cell_to_global[cell]
            .iter()
            .zip(&buf[..n])
            .map(|(&g, v)| self.coeffs[g] * v)
            .sum()
    }

    /// Physical gradient at a reference point of a cell.
    pub fn gradient_in_cell(&self, cell: usize, ref_pt: [f64; 2]) -> [f64; 2] {
        let el = &self.space.element;
        let n = el.dof_count();
        let mut buf = [[0.0f64; 2]; MAX_CELL_DOFS];
        el.eval_gradients(ref_pt, &mut buf[..n]);
        let mut g = [0.0; 2];
        for (&gl, gr) in self.space.dofmap.cell_to_global[cell].iter().zip(&buf[..n]) {
            g[0] += self.coeffs[gl] * gr[0];
            g[1] += self.coeffs[gl] * gr[1];
        }
        self.space.geometry[cell].push_gradient(g)
    }

    /// Physical Hessian at a reference point of a cell.
    pub fn hessian_in_cell(&self, cell: usize, ref_pt: [f64; 2]) -> [[f64; 2]; 2] {
        let el = &self.space.element;
        let n = el.dof_count();
        let mut buf = [[0.0f64; 3]; MAX_CELL_DOFS];
        el.eval_hessians(ref_pt, &mut buf[..n]);
        let mut h = [0.0; 3];
        for (&gl, hr) in self.space.dofmap.cell_to_global[cell].iter().zip(&buf[..n]) {
            h[0] += self.coeffs[gl] * hr[0];
            h[1] += self.coeffs[gl] * hr[1];
            h[2] += self.coeffs[gl] * hr[2];
        }
        self.space.geometry[cell].push_hessian(h)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Export `(x, y, value)` per node.
    pub fn write_csv(&self, path: &std::path::Path) -> std::io::Result<()> {
        use std::io::Write;
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "x,y,value")?;
        for (x, c) in self.space.dofmap.dof_coords.iter().zip(&self.coeffs) {
            writeln!(f, "{:.16e},{:.16e},{:.16e}", x[0], x[1], c)?;
        }
        Ok(())
    }
}

/// Velocity view of a stream function field: `u = curl(phi)`.
pub struct VelocityField<'a> {
    pub stream: &'a ScalarField,
}

impl<'a> VelocityField<'a> {
    pub fn new(stream: &'a ScalarField) -> Self {
        VelocityField { stream }
    }

    pub fn eval_in_cell(&self, cell: usize, ref_pt: [f64; 2]) -> [f64; 2] {
        crate::element::curl_from_gradient(self.stream.gradient_in_cell(cell, ref_pt))
    }

    pub fn strain_in_cell(&self, cell: usize, ref_pt: [f64; 2]) -> [[f64; 2]; 2] {
        crate::element::strain_from_hessian(&self.stream.hessian_in_cell(cell, ref_pt))
    }
}
