//! C0-RIPG assembly of the stream function Stokes operator.
//!
//! The discrete operator acts on a continuous degree-`p` stream function
//! `phi` through the velocity `u = curl(phi)`:
//!
//! * volume term `(2 mu eps(u), eps(v))`,
//! * facet consistency terms `-<[[u]], {2 mu eps(v)}_w> - <{2 mu eps(u)}_w, [[v]]>`,
//! * facet penalty `<beta [[u]], [[v]]>`,
//!
//! where `[[v]] = v+ (x) n+ + v- (x) n-` is the tensor jump and `{.}_w` the
//! weighted average. Weights and penalty come from the robust-IPG closed
//! form: per facet side
//!
//! `zeta = 1 / (delta sqrt(3 p (p-1)/2 |F|/|k|) ||2 mu||_Linf(F) ||(2 mu)^(-1/2)||_Linf(k))`
//!
//! with `w+- = zeta+- / (zeta+ + zeta-)`, `beta = (zeta+ + zeta-)^-2` on
//! interior facets and `(zeta+)^-2` on exterior ones. The scheme is coercive
//! for `delta > sqrt(2)`.
//!
//! Boundary facets enter the facet terms only where the full velocity is
//! prescribed (zero-penetration segments with weak tangential data). On
//! free-slip segments impermeability is exact through the strong `phi = 0`
//! constraint and the tangential traction condition is natural, so those
//! facets carry no terms at all.

use std::sync::Arc;

use crate::element::{curl_from_gradient, strain_from_hessian, DerivOrder};
use crate::error::Error;
use crate::linalg::{PatternCache, SparseSymmetricMatrix};
use crate::mesh::BoundaryTag;
use crate::quadrature::{EdgeRule, TriangleRule};
use crate::space::FunctionSpace;

/// Coercivity threshold for the penalty scaling `delta`.
pub const DELTA_THRESHOLD: f64 = std::f64::consts::SQRT_2;

/// Pointwise viscosity evaluator. Assembly always knows the cell containing
/// the evaluation point, so field-backed viscosities can avoid point
/// location; side-dependent values across facets are supported by
/// construction.
pub trait Viscosity {
    fn eval(&self, cell: usize, ref_pt: [f64; 2], phys: [f64; 2]) -> f64;
}

impl<F: Fn([f64; 2]) -> f64> Viscosity for F {
    fn eval(&self, _cell: usize, _ref_pt: [f64; 2], phys: [f64; 2]) -> f64 {
        self(phys)
    }
}

/// Uniform viscosity.
pub struct ConstantViscosity(pub f64);

impl Viscosity for ConstantViscosity {
    fn eval(&self, _cell: usize, _ref_pt: [f64; 2], _phys: [f64; 2]) -> f64 {
        self.0
    }
}

/// Body force evaluator, cell-aware for field-backed forcings.
pub trait BodyForce {
    fn eval(&self, cell: usize, ref_pt: [f64; 2], phys: [f64; 2]) -> [f64; 2];
}

impl<F: Fn([f64; 2]) -> [f64; 2]> BodyForce for F {
    fn eval(&self, _cell: usize, _ref_pt: [f64; 2], phys: [f64; 2]) -> [f64; 2] {
        self(phys)
    }
}

/// Treatment of one tagged boundary segment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BcKind {
    /// `u . n = 0` strongly via the stream function constraint; tangential
    /// traction-free naturally. No facet terms.
    FreeSlip,
    /// `u . n = 0` strongly; tangential velocity data imposed weakly through
    /// the facet terms and the right-hand side.
    ZeroPenetration,
    /// Natural traction data `g_N`; no facet terms, no constraint.
    Neumann,
}

/// Per-tag boundary treatment.
#[derive(Clone, Copy, Debug)]
pub struct StokesBcs {
    kinds: [BcKind; 4],
}

impl StokesBcs {
    pub fn all_free_slip() -> Self {
        StokesBcs { kinds: [BcKind::FreeSlip; 4] }
    }

    pub fn all_zero_penetration() -> Self {
        StokesBcs { kinds: [BcKind::ZeroPenetration; 4] }
    }

    pub fn with(mut self, tag: BoundaryTag, kind: BcKind) -> Self {
        self.kinds[tag_index(tag)] = kind;
        self
    }

    pub fn kind(&self, tag: BoundaryTag) -> BcKind {
        self.kinds[tag_index(tag)]
    }
}

fn tag_index(tag: BoundaryTag) -> usize {
    match tag {
        BoundaryTag::Bottom => 0,
        BoundaryTag::Top => 1,
        BoundaryTag::Left => 2,
        BoundaryTag::Right => 3,
    }
}

/// Robust-IPG weights and penalty for every mesh facet.
#[derive(Clone, Debug)]
pub struct PenaltyData {
    pub delta: f64,
    pub degree: usize,
    /// `zeta[1]`, `weights[1]` are meaningful on interior facets only.
    pub zeta: Vec<[f64; 2]>,
    pub weights: Vec<[f64; 2]>,
    pub beta: Vec<f64>,
    /// Min and max of the sampled viscosity over all quadrature points.
    pub viscosity_range: [f64; 2],
    /// Set when `delta` is at or below the coercivity threshold `sqrt(2)`.
    pub below_threshold: bool,
}

/// Inverse-inequality constant `||v||_F <= C_inv ||v||_k` for degree-`p`
/// polynomials on a triangle: `sqrt((p+1)(p+2)/2 * |F|/|k|)`.
pub fn inverse_constant(cell_area: f64, facet_length: f64, p: usize) -> f64 {
    let d = 2.0;
    ((p as f64 + 1.0) * (p as f64 + d) / d * facet_length / cell_area).sqrt()
}

/// One side's `zeta` from the closed form, given the sampled viscosity
/// bounds `||2 mu||_Linf(F)` and `||(2 mu)^(-1/2)||_Linf(k)`. Equals
/// `1 / (delta sqrt(m_k) C_inv(k, F, p - 2) ...)` with `m_k = 3` facets per
/// triangle.
pub fn ripg_zeta(
    delta: f64,
    p: usize,
    facet_length: f64,
    cell_area: f64,
    two_mu_face_sup: f64,
    inv_sqrt_two_mu_sup: f64,
) -> f64 {
    let scale = (3.0 * (p * (p - 1)) as f64 / 2.0 * facet_length / cell_area).sqrt();
    1.0 / (delta * scale * two_mu_face_sup * inv_sqrt_two_mu_sup)
}

/// Evaluate the RIPG weights and penalty from local geometry, degree and
/// sampled viscosity bounds.
pub fn compute_penalty(
    space: &FunctionSpace,
    viscosity: &dyn Viscosity,
    delta: f64,
) -> Result<PenaltyData, Error> {
    let p = space.degree();
    if p < 2 {
        return Err(Error::InvalidPenalty(format!("stream function degree must be >= 2, got {p}")));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidPenalty(format!("delta must be positive, got {delta}")));
    }
    let mesh = &space.mesh;
    let volume_rule = TriangleRule::with_degree(2 * p);
    let edge_rule = EdgeRule::with_degree(2 * p);

    // ||(2 mu)^(-1/2)||_Linf(k) via the quadrature-point max per cell.
    let mut mu_min = f64::INFINITY;
    let mut mu_max = f64::NEG_INFINITY;
    let mut inv_sqrt_bound = vec![0.0; mesh.n_cells()];
    for cell in 0..mesh.n_cells() {
        let geom = &space.geometry[cell];
        let mut bound = 0.0f64;
        for &r in &volume_rule.points {
            let mu = viscosity.eval(cell, r, geom.to_physical(r));
            if !(mu > 0.0) || !mu.is_finite() {
                return Err(Error::InvalidPenalty(format!("non-positive viscosity sample {mu} in cell {cell}")));
            }
            mu_min = mu_min.min(mu);
            mu_max = mu_max.max(mu);
            bound = bound.max(1.0 / (2.0 * mu).sqrt());
        }
        inv_sqrt_bound[cell] = bound;
    }

    let mut zeta = vec![[f64::NAN; 2]; mesh.n_facets()];
    let mut weights = vec![[1.0, 0.0]; mesh.n_facets()];
    let mut beta = vec![0.0; mesh.n_facets()];

    for (fid, facet) in mesh.facets.iter().enumerate() {
        let pa = mesh.vertices[facet.vertices[0]];
        let pb = mesh.vertices[facet.vertices[1]];
        for (s, side) in facet.sides.iter().enumerate() {
            let geom = &space.geometry[side.cell];
            // ||2 mu||_Linf(F) sampled from this side.
            let mut face_bound = 0.0f64;
            for &t in &edge_rule.points {
                let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
                let r = geom.to_reference(x);
                let mu = viscosity.eval(side.cell, r, x);
                if !(mu > 0.0) || !mu.is_finite() {
                    return Err(Error::InvalidPenalty(format!("non-positive viscosity sample {mu} on facet {fid}")));
                }
                mu_min = mu_min.min(mu);
                mu_max = mu_max.max(mu);
                face_bound = face_bound.max(2.0 * mu);
            }
            let area = mesh.cell_area[side.cell];
            zeta[fid][s] = ripg_zeta(delta, p, facet.length, area, face_bound, inv_sqrt_bound[side.cell]);
        }
        if facet.is_interior() {
            let sum = zeta[fid][0] + zeta[fid][1];
            // The complement keeps w+ + w- = 1 exact in floating point.
            let w_plus = zeta[fid][0] / sum;
            weights[fid] = [w_plus, 1.0 - w_plus];
            beta[fid] = 1.0 / (sum * sum);
        } else {
            weights[fid] = [1.0, 0.0];
            beta[fid] = 1.0 / (zeta[fid][0] * zeta[fid][0]);
        }
    }

    Ok(PenaltyData {
        delta,
        degree: p,
        zeta,
        weights,
        beta,
        viscosity_range: [mu_min, mu_max],
        below_threshold: delta <= DELTA_THRESHOLD,
    })
}

/// One Stokes problem ready for assembly.
pub struct StokesProblem<'a> {
    pub space: &'a Arc<FunctionSpace>,
    pub viscosity: &'a dyn Viscosity,
    pub penalty: &'a PenaltyData,
    pub body_force: &'a dyn BodyForce,
    pub bcs: StokesBcs,
    /// Velocity data on zero-penetration segments (tangential part is what
    /// acts; its normal part must vanish).
    pub dirichlet_velocity: Option<&'a dyn Fn([f64; 2]) -> [f64; 2]>,
    /// Traction data on Neumann segments.
    pub neumann_traction: Option<&'a dyn Fn([f64; 2]) -> [f64; 2]>,
}

/// Term toggles, used by the assembly oracles in the test suite.
#[derive(Clone, Copy, Debug)]
pub struct AssemblyOptions {
    pub volume: bool,
    pub consistency: bool,
    pub penalty: bool,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions { volume: true, consistency: true, penalty: true }
    }
}

struct FacetTraces {
    /// `u[side][q * n + i]`: velocity trace of basis `i`.
    u: [Vec<[f64; 2]>; 2],
    /// `stress[side][q * n + i]`: `2 mu eps(curl basis_i)`, upper triangle
    /// `(11, 12, 22)`.
    stress: [Vec<[f64; 3]>; 2],
}

/// Assemble the reduced (free-DOF) system.
pub fn assemble_system(
    problem: &StokesProblem,
    options: &AssemblyOptions,
    mut pattern: Option<&mut PatternCache>,
) -> Result<(SparseSymmetricMatrix, Vec<f64>), Error> {
    let space = problem.space;
    if problem.penalty.degree != space.degree() {
        return Err(Error::Assembly(format!(
            "penalty computed for degree {} but space has degree {}",
            problem.penalty.degree,
            space.degree()
        )));
    }
    if problem.penalty.beta.len() != space.mesh.n_facets() {
        return Err(Error::Assembly("penalty data does not match the mesh".into()));
    }
    let p = space.degree();
    let n = space.element.dof_count();
    let dofmap = &space.dofmap;
    let mesh = &space.mesh;

    let volume_rule = TriangleRule::with_degree(2 * p);
    let edge_rule = EdgeRule::with_degree(2 * p);
    let ref_tables = space.element.tabulate(&volume_rule.points, DerivOrder::Hessian);

    let mut rows = Vec::new();
    let mut cols = Vec::new();
    let mut values = Vec::new();
    let mut rhs = vec![0.0; dofmap.n_free];

    // Scatter an accumulated local matrix once per cell or facet; constrained
    // columns lift their prescribed values to the right-hand side.
    let mut scatter_local = |local: &[f64], row_dofs: &[usize], col_dofs: &[usize], rhs: &mut [f64]| {
        let nc = col_dofs.len();
        for (jl, &gj) in row_dofs.iter().enumerate() {
            let rj = dofmap.free_index[gj];
            if rj == usize::MAX {
                continue;
            }
            for (il, &gi) in col_dofs.iter().enumerate() {
                let value = local[jl * nc + il];
                if value == 0.0 {
                    continue;
                }
                match dofmap.constraint[gi] {
                    None => {
                        rows.push(rj);
                        cols.push(dofmap.free_index[gi]);
                        values.push(value);
                    }
                    Some(g) => {
                        if g != 0.0 {
                            rhs[rj] -= value * g;
                        }
                    }
                }
            }
        }
    };

    // Volume terms.
    let mut strain = vec![[0.0f64; 3]; n];
    let mut curls = vec![[0.0f64; 2]; n];
    let mut local = vec![0.0f64; n * n];
    for cell in 0..mesh.n_cells() {
        let geom = &space.geometry[cell];
        let globals = &dofmap.cell_to_global[cell];
        let jac = geom.det.abs();
        local.iter_mut().for_each(|v| *v = 0.0);
        for (q, &r) in volume_rule.points.iter().enumerate() {
            let x = geom.to_physical(r);
            let w = volume_rule.weights[q] * jac;
            if options.volume {
                let mu2 = 2.0 * problem.viscosity.eval(cell, r, x);
                for i in 0..n {
                    let h = geom.push_hessian(ref_tables.hessian(q, i));
                    let e = strain_from_hessian(&h);
                    strain[i] = [e[0][0], e[0][1], e[1][1]];
                }
                for j in 0..n {
                    let ej = strain[j];
                    let row = &mut local[j * n..(j + 1) * n];
                    for i in 0..n {
                        let ei = strain[i];
                        let contraction = ei[0] * ej[0] + 2.0 * ei[1] * ej[1] + ei[2] * ej[2];
                        row[i] += w * mu2 * contraction;
                    }
                }
            }
            // Right-hand side (f, curl psi).
            let f = problem.body_force.eval(cell, r, x);
            for i in 0..n {
                curls[i] = curl_from_gradient(geom.push_gradient(ref_tables.gradient(q, i)));
            }
            for (j, &g) in globals.iter().enumerate() {
                let rj = dofmap.free_index[g];
                if rj != usize::MAX {
                    rhs[rj] += w * (f[0] * curls[j][0] + f[1] * curls[j][1]);
                }
            }
        }
        if options.volume {
            scatter_local(&local, globals, globals, &mut rhs);
        }
    }

    // Facet terms.
    let mut traces = FacetTraces {
        u: [vec![[0.0; 2]; edge_rule.len() * n], vec![[0.0; 2]; edge_rule.len() * n]],
        stress: [vec![[0.0; 3]; edge_rule.len() * n], vec![[0.0; 3]; edge_rule.len() * n]],
    };
    let mut grads = vec![[0.0f64; 2]; n];
    let mut hessians = vec![[0.0f64; 3]; n];

    for (fid, facet) in mesh.facets.iter().enumerate() {
        let participates = match facet.tag {
            None => true,
            Some(tag) => problem.bcs.kind(tag) == BcKind::ZeroPenetration,
        };
        if let Some(tag) = facet.tag {
            if problem.bcs.kind(tag) == BcKind::Neumann {
                assemble_neumann_rhs(problem, fid, &edge_rule, &mut rhs);
            }
        }
        if !participates {
            continue;
        }

        let n_sides = facet.sides.len();
        let pa = mesh.vertices[facet.vertices[0]];
        let pb = mesh.vertices[facet.vertices[1]];
        for (s, side) in facet.sides.iter().enumerate() {
            let geom = &space.geometry[side.cell];
            for (q, &t) in edge_rule.points.iter().enumerate() {
                let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
                let r = geom.to_reference(x);
                space.element.eval_gradients(r, &mut grads);
                space.element.eval_hessians(r, &mut hessians);
                let mu2 = 2.0 * problem.viscosity.eval(side.cell, r, x);
                for i in 0..n {
                    traces.u[s][q * n + i] = curl_from_gradient(geom.push_gradient(grads[i]));
                    let h = geom.push_hessian(hessians[i]);
                    let e = strain_from_hessian(&h);
                    traces.stress[s][q * n + i] = [mu2 * e[0][0], mu2 * e[0][1], mu2 * e[1][1]];
                }
            }
        }

        let beta = problem.penalty.beta[fid];
        let w_avg = problem.penalty.weights[fid];
        // Local block over (side, basis) pairs, test-major.
        let nn_total = n_sides * n;
        let mut flocal = vec![0.0f64; nn_total * nn_total];
        let mut fdofs = Vec::with_capacity(nn_total);
        for side in &facet.sides[..n_sides] {
            fdofs.extend_from_slice(&dofmap.cell_to_global[side.cell]);
        }
        for (q, &wq) in edge_rule.weights.iter().enumerate() {
            let ds = wq * facet.length;
            for ss in 0..n_sides {
                let ns = facet.side_normal(ss);
                for tt in 0..n_sides {
                    let nt = facet.side_normal(tt);
                    let nn = ns[0] * nt[0] + ns[1] * nt[1];
                    for j in 0..n {
                        let uj = traces.u[tt][q * n + j];
                        let sj = traces.stress[tt][q * n + j];
                        let row = &mut flocal[(tt * n + j) * nn_total..(tt * n + j + 1) * nn_total];
                        for i in 0..n {
                            let ui = traces.u[ss][q * n + i];
                            let si = traces.stress[ss][q * n + i];
                            let mut entry = 0.0;
                            if options.penalty {
                                entry += beta * nn * (ui[0] * uj[0] + ui[1] * uj[1]);
                            }
                            if options.consistency {
                                // -[[u]] : {2 mu eps(v)}_w
                                let sj_ns = [sj[0] * ns[0] + sj[1] * ns[1], sj[1] * ns[0] + sj[2] * ns[1]];
                                entry -= w_avg[tt] * (ui[0] * sj_ns[0] + ui[1] * sj_ns[1]);
                                // -{2 mu eps(u)}_w : [[v]]
                                let si_nt = [si[0] * nt[0] + si[1] * nt[1], si[1] * nt[0] + si[2] * nt[1]];
                                entry -= w_avg[ss] * (uj[0] * si_nt[0] + uj[1] * si_nt[1]);
                            }
                            row[ss * n + i] += ds * entry;
                        }
                    }
                }
            }
        }
        scatter_local(&flocal, &fdofs, &fdofs, &mut rhs);

        // Weak tangential data on exterior zero-penetration facets:
        // <u_D (x) n, beta v (x) n - 2 mu eps(v)>.
        if facet.tag.is_some() {
            let ud_fn = problem
                .dirichlet_velocity
                .ok_or_else(|| Error::Assembly("zero-penetration segment without velocity data".into()))?;
            let nrm = facet.normal;
            for (q, &wq) in edge_rule.weights.iter().enumerate() {
                let t = edge_rule.points[q];
                let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
                let ud = ud_fn(x);
                let ds = wq * facet.length;
                for j in 0..n {
                    let gj = dofmap.cell_to_global[facet.sides[0].cell][j];
                    let rj = dofmap.free_index[gj];
                    if rj == usize::MAX {
                        continue;
                    }
                    let uj = traces.u[0][q * n + j];
                    let sj = traces.stress[0][q * n + j];
                    let sj_n = [sj[0] * nrm[0] + sj[1] * nrm[1], sj[1] * nrm[0] + sj[2] * nrm[1]];
                    let mut entry = 0.0;
                    if options.penalty {
                        entry += beta * (ud[0] * uj[0] + ud[1] * uj[1]);
                    }
                    if options.consistency {
                        entry -= ud[0] * sj_n[0] + ud[1] * sj_n[1];
                    }
                    rhs[rj] += ds * entry;
                }
            }
        }
    }

    let matrix = match pattern.as_deref_mut() {
        Some(cache) => SparseSymmetricMatrix::from_pattern_cache(cache, dofmap.n_free, &rows, &cols, &values)?,
        None => {
            let triplets: Vec<(usize, usize, f64)> =
                rows.iter().zip(&cols).zip(&values).map(|((&r, &c), &v)| (r, c, v)).collect();
            SparseSymmetricMatrix::from_triplets(dofmap.n_free, &triplets)?
        }
    };
    Ok((matrix, rhs))
}

fn assemble_neumann_rhs(problem: &StokesProblem, fid: usize, edge_rule: &EdgeRule, rhs: &mut [f64]) {
    let space = problem.space;
    let mesh = &space.mesh;
    let facet = &mesh.facets[fid];
    let n = space.element.dof_count();
    let g_fn = match problem.neumann_traction {
        Some(g) => g,
        None => return,
    };
    let pa = mesh.vertices[facet.vertices[0]];
    let pb = mesh.vertices[facet.vertices[1]];
    let side = facet.sides[0];
    let geom = &space.geometry[side.cell];
    let mut grads = vec![[0.0f64; 2]; n];
    for (q, &t) in edge_rule.points.iter().enumerate() {
        let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
        let g = g_fn(x);
        let r = geom.to_reference(x);
        space.element.eval_gradients(r, &mut grads);
        let ds = edge_rule.weights[q] * facet.length;
        for j in 0..n {
            let gj = space.dofmap.cell_to_global[side.cell][j];
            let rj = space.dofmap.free_index[gj];
            if rj != usize::MAX {
                let v = curl_from_gradient(geom.push_gradient(grads[j]));
                rhs[rj] += ds * (g[0] * v[0] + g[1] * v[1]);
            }
        }
    }
}

/// Assemble only the right-hand side; used when the operator (viscosity and
/// penalty) is unchanged between fixed-point iterations.
pub fn assemble_rhs(problem: &StokesProblem) -> Result<Vec<f64>, Error> {
    let space = problem.space;
    let p = space.degree();
    let n = space.element.dof_count();
    let dofmap = &space.dofmap;
    let mesh = &space.mesh;
    let volume_rule = TriangleRule::with_degree(2 * p);
    let edge_rule = EdgeRule::with_degree(2 * p);
    let ref_tables = space.element.tabulate(&volume_rule.points, DerivOrder::Gradient);

    let mut rhs = vec![0.0; dofmap.n_free];
    let mut curls = vec![[0.0f64; 2]; n];
    for cell in 0..mesh.n_cells() {
        let geom = &space.geometry[cell];
        let globals = &dofmap.cell_to_global[cell];
        let jac = geom.det.abs();
        for (q, &r) in volume_rule.points.iter().enumerate() {
            let x = geom.to_physical(r);
            let w = volume_rule.weights[q] * jac;
            let f = problem.body_force.eval(cell, r, x);
            for i in 0..n {
                curls[i] = curl_from_gradient(geom.push_gradient(ref_tables.gradient(q, i)));
            }
            for (j, &g) in globals.iter().enumerate() {
                let rj = dofmap.free_index[g];
                if rj != usize::MAX {
                    rhs[rj] += w * (f[0] * curls[j][0] + f[1] * curls[j][1]);
                }
            }
        }
    }

    for (fid, facet) in mesh.facets.iter().enumerate() {
        if let Some(tag) = facet.tag {
            match problem.bcs.kind(tag) {
                BcKind::Neumann => assemble_neumann_rhs(problem, fid, &edge_rule, &mut rhs),
                BcKind::ZeroPenetration => {
                    // The boundary-data terms require the facet traces; reuse
                    // the full assembly for such problems instead.
                    if problem.dirichlet_velocity.is_some() {
                        return Err(Error::Assembly(
                            "rhs-only assembly does not support zero-penetration data; use assemble_system".into(),
                        ));
                    }
                }
                BcKind::FreeSlip => {}
            }
        }
    }
    Ok(rhs)
}
