//! Thermal convection coupling: temperature advection-diffusion, benchmark
//! viscosity models and the Stokes/temperature fixed-point driver.
//!
//! The cavity is the unit square with `T = 0` on `y = 0`, `T = 1` on
//! `y = 1` and insulated sides. The hot wall is at `y = 1`, so the thermal
//! body force `f = Ra T b` accelerates hot fluid toward `y = 0`
//! (`b = (0, -1)`); depth for the pressure-dependent viscosity term
//! increases toward the hot wall, `z = y`. The work functional uses the same
//! direction, `<W> = sqrt(int T u . b)`.

use std::sync::Arc;

use crate::analysis::nusselt;
use crate::element::{curl_from_gradient, strain_from_hessian, DerivOrder};
use crate::error::Error;
use crate::linalg::{PatternCache, SparseMatrix};
use crate::mesh::{BoundaryTag, TriangularMesh};
use crate::quadrature::TriangleRule;
use crate::space::{DirichletSpec, FunctionSpace, ScalarField};
use crate::stokes::{
    assemble_rhs, assemble_system, compute_penalty, AssemblyOptions, BodyForce, StokesBcs, StokesProblem, Viscosity,
};

/// Unit direction of the thermal buoyancy force (toward the cold wall).
pub const BUOYANCY_DIR: [f64; 2] = [0.0, -1.0];

/// Additive floor inside the plastic viscosity branch.
pub const PLASTIC_FLOOR: f64 = 1e-3;

/// Guard on the strain invariant to avoid division by zero at stagnation
/// points.
pub const STRAIN_FLOOR: f64 = 1e-12;

/// One thermal convection benchmark configuration with reference values.
#[derive(Clone, Copy, Debug)]
pub struct BenchmarkCase {
    pub name: &'static str,
    pub ra: f64,
    pub d_mu_t: f64,
    pub d_mu_z: f64,
    pub sigma_y: f64,
    pub nu_ref: f64,
    pub u_rms_ref: f64,
}

impl BenchmarkCase {
    pub fn bb1a() -> Self {
        BenchmarkCase { name: "BB1a", ra: 1e4, d_mu_t: 1.0, d_mu_z: 1.0, sigma_y: 0.0, nu_ref: 4.884409, u_rms_ref: 42.864947 }
    }

    pub fn bb2a() -> Self {
        BenchmarkCase { name: "BB2a", ra: 1e4, d_mu_t: 1e4, d_mu_z: 1.0, sigma_y: 0.0, nu_ref: 10.065899, u_rms_ref: 480.433425 }
    }

    pub fn t2() -> Self {
        BenchmarkCase { name: "T2", ra: 1e2, d_mu_t: 1e5, d_mu_z: 1.0, sigma_y: 1.0, nu_ref: 8.559459, u_rms_ref: 140.775535 }
    }

    pub fn t4() -> Self {
        BenchmarkCase { name: "T4", ra: 1e2, d_mu_t: 1e5, d_mu_z: 10.0, sigma_y: 1.0, nu_ref: 6.615419, u_rms_ref: 79.088809 }
    }

    pub fn all() -> [BenchmarkCase; 4] {
        [Self::bb1a(), Self::bb2a(), Self::t2(), Self::t4()]
    }

    pub fn by_name(name: &str) -> Option<BenchmarkCase> {
        Self::all().into_iter().find(|c| c.name.eq_ignore_ascii_case(name))
    }
}

/// Temperature, strain-rate and depth dependent viscosity.
#[derive(Clone, Copy, Debug)]
pub struct ViscosityModel {
    pub d_mu_t: f64,
    pub d_mu_z: f64,
    pub sigma_y: f64,
}

impl ViscosityModel {
    pub fn from_case(case: &BenchmarkCase) -> Self {
        ViscosityModel { d_mu_t: case.d_mu_t, d_mu_z: case.d_mu_z, sigma_y: case.sigma_y }
    }

    /// True when the model reduces to `mu = 1` everywhere.
    pub fn is_constant(&self) -> bool {
        self.d_mu_t == 1.0 && self.d_mu_z == 1.0 && self.sigma_y == 0.0
    }

    /// `strain_norm` is `sqrt(eps : eps)`; `depth` increases toward the hot
    /// wall.
    pub fn eval(&self, temperature: f64, strain_norm: f64, depth: f64) -> f64 {
        let mu_lin = (-self.d_mu_t.ln() * temperature + self.d_mu_z.ln() * depth).exp();
        if self.sigma_y == 0.0 {
            mu_lin
        } else {
            let mu_plast = PLASTIC_FLOOR + self.sigma_y / strain_norm.max(STRAIN_FLOOR);
            2.0 / (1.0 / mu_lin + 1.0 / mu_plast)
        }
    }
}

/// Field-backed viscosity for Stokes assembly: temperature from the current
/// iterate, strain invariant from the current stream function.
pub struct ModelViscosity<'a> {
    pub model: ViscosityModel,
    pub temperature: &'a ScalarField,
    pub stream: Option<&'a ScalarField>,
}

impl Viscosity for ModelViscosity<'_> {
    fn eval(&self, cell: usize, ref_pt: [f64; 2], phys: [f64; 2]) -> f64 {
        let t = self.temperature.eval_in_cell(cell, ref_pt);
        let strain_norm = match (self.model.sigma_y > 0.0, self.stream) {
            (true, Some(stream)) => {
                let eps = strain_from_hessian(&stream.hessian_in_cell(cell, ref_pt));
                (eps[0][0] * eps[0][0] + 2.0 * eps[0][1] * eps[0][1] + eps[1][1] * eps[1][1]).sqrt()
            }
            _ => 0.0,
        };
        self.model.eval(t, strain_norm, phys[1])
    }
}

/// Thermal body force `Ra T b`.
pub struct BuoyancyForce<'a> {
    pub temperature: &'a ScalarField,
    pub ra: f64,
}

impl BodyForce for BuoyancyForce<'_> {
    fn eval(&self, cell: usize, ref_pt: [f64; 2], _phys: [f64; 2]) -> [f64; 2] {
        let t = self.temperature.eval_in_cell(cell, ref_pt);
        [self.ra * t * BUOYANCY_DIR[0], self.ra * t * BUOYANCY_DIR[1]]
    }
}

/// Assemble the advection-diffusion system
/// `(u . grad T, s) + (grad T, grad s) = 0` on the free temperature DOFs,
/// lifting the prescribed wall values to the right-hand side. With
/// `stream = None` the velocity is zero and the system is pure conduction.
pub fn assemble_heat(
    t_space: &Arc<FunctionSpace>,
    stream: Option<&ScalarField>,
    cache: &mut PatternCache,
) -> Result<(SparseMatrix, Vec<f64>), Error> {
    let p = t_space.degree();
    let mesh = &t_space.mesh;
    let dofmap = &t_space.dofmap;
    let n = t_space.element.dof_count();

    // u . grad(T) s is degree 3p - 2; keep the Galerkin system exact.
    let rule = TriangleRule::with_degree((2 * p).max(3 * p - 2));
    let tables = t_space.element.tabulate(&rule.points, DerivOrder::Gradient);
    let stream_tables = stream.map(|s| s.space.element.tabulate(&rule.points, DerivOrder::Gradient));

    let mut rows = Vec::new();
    let mut cols = Vec::new();
    let mut values = Vec::new();
    let mut rhs = vec![0.0; dofmap.n_free];

    let mut grads = vec![[0.0f64; 2]; n];
    for cell in 0..mesh.n_cells() {
        let geom = &t_space.geometry[cell];
        let globals = &dofmap.cell_to_global[cell];
        let jac = geom.det.abs();
        for (q, &w) in rule.weights.iter().enumerate() {
            let dv = w * jac;
            let u = match (&stream_tables, stream) {
                (Some(st), Some(sf)) => {
                    let s_globals = &sf.space.dofmap.cell_to_global[cell];
                    let mut g = [0.0; 2];
                    for i in 0..st.n_basis {
                        let c = sf.coeffs[s_globals[i]];
                        let gr = st.gradient(q, i);
                        g[0] += c * gr[0];
                        g[1] += c * gr[1];
                    }
                    curl_from_gradient(sf.space.geometry[cell].push_gradient(g))
                }
                _ => [0.0, 0.0],
            };
            for i in 0..n {
                grads[i] = geom.push_gradient(tables.gradient(q, i));
            }
            for j in 0..n {
                let rj = dofmap.free_index[globals[j]];
                let sval = tables.value(q, j);
                let gj = grads[j];
                for i in 0..n {
                    let gi = grads[i];
                    let advect = (u[0] * gi[0] + u[1] * gi[1]) * sval;
                    let diffuse = gi[0] * gj[0] + gi[1] * gj[1];
                    let entry = dv * (advect + diffuse);
                    if rj == usize::MAX {
                        continue;
                    }
                    match dofmap.constraint[globals[i]] {
                        None => {
                            rows.push(rj);
                            cols.push(dofmap.free_index[globals[i]]);
                            values.push(entry);
                        }
                        Some(g) => {
                            if g != 0.0 {
                                rhs[rj] -= entry * g;
                            }
                        }
                    }
                }
            }
        }
    }

    let matrix = SparseMatrix::from_pattern_cache(cache, dofmap.n_free, &rows, &cols, &values)?;
    Ok((matrix, rhs))
}

/// Fixed-point options for the coupled steady solve.
#[derive(Clone, Copy, Debug)]
pub struct PicardOptions {
    pub max_iterations: usize,
    /// Under-relaxation factor on the temperature update.
    pub relaxation: f64,
    pub tol_temperature: f64,
    pub tol_nusselt: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions { max_iterations: 500, relaxation: 1.0, tol_temperature: 1e-8, tol_nusselt: 1e-8 }
    }
}

impl PicardOptions {
    /// Case defaults: full steps when the viscosity is temperature- and
    /// strain-independent, half steps otherwise (full steps oscillate once
    /// the operator feeds back on the iterate).
    pub fn for_case(case: &BenchmarkCase) -> Self {
        let relaxation = if case.d_mu_t > 1.0 || case.sigma_y > 0.0 { 0.5 } else { 1.0 };
        PicardOptions { relaxation, ..Default::default() }
    }
}

/// One row of the fixed-point iteration trace.
#[derive(Clone, Copy, Debug)]
pub struct PicardRecord {
    pub iteration: usize,
    pub nu: f64,
    pub u_rms: f64,
    pub dt_inf: f64,
    pub mu_min: f64,
    pub mu_max: f64,
}

/// Converged (or stalled) coupled state.
pub struct SteadyState {
    pub case: BenchmarkCase,
    pub stream: ScalarField,
    pub temperature: ScalarField,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<PicardRecord>,
}

/// Default initial temperature: conduction profile plus a single-mode
/// perturbation that vanishes on the prescribed walls and selects the
/// one-cell circulation pattern.
pub fn initial_temperature(space: Arc<FunctionSpace>) -> ScalarField {
    let pi = std::f64::consts::PI;
    ScalarField::interpolate(space, move |x| x[1] + 0.1 * (pi * x[0]).cos() * (pi * x[1]).sin())
}

/// Alternating fixed point for the coupled Stokes/temperature system on the
/// unit square: solve Stokes with the current temperature and viscosity,
/// solve the heat system with the new velocity, under-relax the temperature,
/// and repeat until both the temperature update and the Nusselt number
/// settle. Penalty data is recomputed from the operative viscosity on every
/// iteration; for the constant-viscosity case the operator and its
/// factorization are built once.
pub fn solve_steady(
    case: &BenchmarkCase,
    mesh: Arc<TriangularMesh>,
    degree: usize,
    delta: f64,
    opts: &PicardOptions,
    warm_start: Option<&ScalarField>,
) -> Result<SteadyState, Error> {
    if !(opts.relaxation > 0.0 && opts.relaxation <= 1.0) {
        return Err(Error::InvalidSpace(format!("relaxation must lie in (0, 1], got {}", opts.relaxation)));
    }
    let model = ViscosityModel::from_case(case);
    let phi_space = FunctionSpace::new(mesh.clone(), degree, &DirichletSpec::whole_boundary(0.0))?;
    let t_spec = DirichletSpec::new(vec![(BoundaryTag::Bottom, 0.0), (BoundaryTag::Top, 1.0)]);
    let t_space = FunctionSpace::new(mesh.clone(), degree, &t_spec)?;

    let mut temperature = match warm_start {
        Some(prev) => resample(prev, t_space.clone()),
        None => initial_temperature(t_space.clone()),
    };
    let mut stream = ScalarField::zeros(phi_space.clone());

    let mut stokes_pattern = PatternCache::new();
    let mut heat_pattern = PatternCache::new();
    let mut heat_symbolic = None;
    let mut constant_operator: Option<(crate::linalg::CholeskyFactor, crate::linalg::SparseSymmetricMatrix, [f64; 2])> =
        None;

    let mut trace = Vec::new();
    let mut nu_prev = f64::NAN;
    let mut converged = false;
    let mut iterations = 0;

    for iteration in 1..=opts.max_iterations {
        iterations = iteration;
        let mu_min;
        let mu_max;

        // Stokes step.
        let free = {
            let viscosity = ModelViscosity { model, temperature: &temperature, stream: Some(&stream) };
            let force = BuoyancyForce { temperature: &temperature, ra: case.ra };
            match &constant_operator {
                Some((factor, matrix, range)) => {
                    mu_min = range[0];
                    mu_max = range[1];
                    let placeholder = constant_penalty_placeholder(degree, delta);
                    let problem = StokesProblem {
                        space: &phi_space,
                        viscosity: &viscosity,
                        penalty: &placeholder,
                        body_force: &force,
                        bcs: StokesBcs::all_free_slip(),
                        dirichlet_velocity: None,
                        neumann_traction: None,
                    };
                    let rhs = assemble_rhs(&problem)?;
                    factor.solve(matrix, &rhs)?
                }
                None => {
                    let penalty = compute_penalty(&phi_space, &viscosity, delta)?;
                    mu_min = penalty.viscosity_range[0];
                    mu_max = penalty.viscosity_range[1];
                    let problem = StokesProblem {
                        space: &phi_space,
                        viscosity: &viscosity,
                        penalty: &penalty,
                        body_force: &force,
                        bcs: StokesBcs::all_free_slip(),
                        dirichlet_velocity: None,
                        neumann_traction: None,
                    };
                    let (matrix, rhs) = assemble_system(&problem, &AssemblyOptions::default(), Some(&mut stokes_pattern))?;
                    let factor = matrix.factorize()?;
                    let solution = factor.solve(&matrix, &rhs)?;
                    if model.is_constant() {
                        constant_operator = Some((factor, matrix, penalty.viscosity_range));
                    }
                    solution
                }
            }
        };
        stream = ScalarField::from_free(phi_space.clone(), &free);
        if !stream.is_finite() {
            return Err(Error::NonFiniteField(iteration));
        }

        // Heat step.
        let (heat_matrix, heat_rhs) = assemble_heat(&t_space, Some(&stream), &mut heat_pattern)?;
        let t_free = heat_matrix.lu_solve_cached(&mut heat_symbolic, &heat_rhs)?;
        let t_raw = ScalarField::from_free(t_space.clone(), &t_free);
        if !t_raw.is_finite() {
            return Err(Error::NonFiniteField(iteration));
        }

        let dt_inf = temperature
            .coeffs
            .iter()
            .zip(&t_raw.coeffs)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        for (t, raw) in temperature.coeffs.iter_mut().zip(&t_raw.coeffs) {
            *t += opts.relaxation * (raw - *t);
        }

        let nu = nusselt(&temperature);
        let u_rms = crate::analysis::u_rms(&stream, 2 * degree);
        trace.push(PicardRecord { iteration, nu, u_rms, dt_inf, mu_min, mu_max });

        let dnu = if nu_prev.is_finite() { (nu - nu_prev).abs() / nu.abs().max(1e-30) } else { f64::INFINITY };
        nu_prev = nu;
        if dt_inf <= opts.tol_temperature && dnu <= opts.tol_nusselt {
            converged = true;
            break;
        }
    }

    Ok(SteadyState { case: *case, stream, temperature, iterations, converged, trace })
}

// The constant-viscosity fast path never touches the penalty (operator
// reused, and the free-slip RHS has no facet terms), but the problem struct
// needs one.
fn constant_penalty_placeholder(degree: usize, delta: f64) -> crate::stokes::PenaltyData {
    crate::stokes::PenaltyData {
        delta,
        degree,
        zeta: Vec::new(),
        weights: Vec::new(),
        beta: Vec::new(),
        viscosity_range: [1.0, 1.0],
        below_threshold: delta <= crate::stokes::DELTA_THRESHOLD,
    }
}

/// Evaluate a field from one space at the nodes of another (same mesh family
/// not required; points are located geometrically).
pub fn resample(field: &ScalarField, target: Arc<FunctionSpace>) -> ScalarField {
    let src_mesh = &field.space.mesh;
    ScalarField::interpolate(target, move |x| {
        let clamped = src_mesh.domain.clamp(x);
        match crate::tracers::locate(src_mesh, clamped) {
            Ok((cell, r)) => field.eval_in_cell(cell, r),
            Err(_) => 0.0,
        }
    })
}

/// Write the iteration trace as CSV.
pub fn write_trace_csv(trace: &[PicardRecord], path: &std::path::Path) -> std::io::Result<()> {
    use std::io::Write;
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "iter,Nu,u_rms,dT_inf,mu_min,mu_max")?;
    for r in trace {
        writeln!(
            f,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.iteration, r.nu, r.u_rms, r.dt_inf, r.mu_min, r.mu_max
        )?;
    }
    Ok(())
}
