//! Experiment drivers shared by the CLI and the acceptance suite: the
//! manufactured-solution study, the penalty-scaling sweep and the thermal
//! convection benchmark sequences.

use std::sync::Arc;

use crate::analysis::{self, ErrorNorms, ExactFields, FunctionalReport};
use crate::error::Error;
use crate::heat::{self, BenchmarkCase, ModelViscosity, PicardOptions, SteadyState, ViscosityModel};
use crate::manufactured;
use crate::mesh::{Rectangle, TriangularMesh};
use crate::space::{DirichletSpec, FunctionSpace, ScalarField};
use crate::stokes::{assemble_system, compute_penalty, AssemblyOptions, PenaltyData, StokesBcs, StokesProblem};

/// Solved manufactured-solution problem on `(-1, 1)^2`.
pub struct MmsSolution {
    pub stream: ScalarField,
    pub penalty: PenaltyData,
    pub n: usize,
    pub delta: f64,
}

/// Assemble and solve the manufactured problem: exact impermeable boundary
/// (`phi = 0` strongly) with the analytic tangential velocity imposed weakly
/// on all four sides.
pub fn solve_mms(n: usize, degree: usize, delta: f64) -> Result<MmsSolution, Error> {
    let mesh = Arc::new(TriangularMesh::structured(Rectangle::biunit(), n)?);
    let space = FunctionSpace::new(mesh, degree, &DirichletSpec::whole_boundary(0.0))?;
    let viscosity = manufactured::viscosity;
    let penalty = compute_penalty(&space, &viscosity, delta)?;
    let forcing = manufactured::forcing;
    let u_d = manufactured::velocity;
    let problem = StokesProblem {
        space: &space,
        viscosity: &viscosity,
        penalty: &penalty,
        body_force: &forcing,
        bcs: StokesBcs::all_zero_penetration(),
        dirichlet_velocity: Some(&u_d),
        neumann_traction: None,
    };
    let (matrix, rhs) = assemble_system(&problem, &AssemblyOptions::default(), None)?;
    let free = matrix.cholesky_solve(&rhs)?;
    let stream = ScalarField::from_free(space, &free);
    Ok(MmsSolution { stream, penalty, n, delta })
}

/// Error norms of a manufactured solve against the analytic fields.
pub fn mms_error_norms(solution: &MmsSolution) -> ErrorNorms {
    let exact = ExactFields {
        stream: &manufactured::stream,
        velocity: &manufactured::velocity,
        velocity_gradient: &manufactured::velocity_gradient,
    };
    analysis::error_norms(&solution.stream, &exact, &manufactured::viscosity, &solution.penalty, true)
}

/// One row of the manufactured convergence table.
#[derive(Clone, Copy, Debug)]
pub struct MmsRun {
    pub n: usize,
    pub degree: usize,
    pub delta: f64,
    pub dofs: usize,
    pub h: f64,
    /// False when the factorization hit a non-positive pivot.
    pub spd: bool,
    pub norms: Option<ErrorNorms>,
}

/// Solve one manufactured configuration; an indefinite operator is data, not
/// an error.
pub fn run_mms_case(n: usize, degree: usize, delta: f64) -> Result<MmsRun, Error> {
    let mesh = TriangularMesh::structured(Rectangle::biunit(), n)?;
    let h = mesh.mesh_size();
    match solve_mms(n, degree, delta) {
        Ok(solution) => {
            let dofs = solution.stream.space.total_dofs();
            let norms = mms_error_norms(&solution);
            Ok(MmsRun { n, degree, delta, dofs, h, spd: true, norms: Some(norms) })
        }
        Err(Error::NotSpd { .. }) => Ok(MmsRun { n, degree, delta, dofs: 0, h, spd: false, norms: None }),
        Err(e) => Err(e),
    }
}

/// One completed benchmark level.
pub struct BenchmarkRun {
    pub state: SteadyState,
    pub report: FunctionalReport,
}

/// Functionals of a converged state under its case's viscosity model.
pub fn benchmark_report(state: &SteadyState) -> FunctionalReport {
    let model = ViscosityModel::from_case(&state.case);
    let viscosity = ModelViscosity { model, temperature: &state.temperature, stream: Some(&state.stream) };
    analysis::functionals(&state.stream, &state.temperature, &viscosity, state.case.ra, heat::BUOYANCY_DIR)
}

/// Run a benchmark case over a mesh sequence at fixed degree, warm-starting
/// every level from the previous temperature field.
pub fn run_benchmark_sequence(
    case: &BenchmarkCase,
    divisions: &[usize],
    degree: usize,
    delta: f64,
    opts: &PicardOptions,
) -> Result<Vec<BenchmarkRun>, Error> {
    let mut runs: Vec<BenchmarkRun> = Vec::new();
    for &n in divisions {
        let mesh = Arc::new(TriangularMesh::structured(Rectangle::unit(), n)?);
        let warm = runs.last().map(|r| &r.state.temperature);
        let state = heat::solve_steady(case, mesh, degree, delta, opts, warm)?;
        let report = benchmark_report(&state);
        runs.push(BenchmarkRun { state, report });
    }
    Ok(runs)
}
