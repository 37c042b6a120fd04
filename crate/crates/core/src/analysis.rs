//! Error norms, benchmark functionals and convergence-rate estimation.

use crate::element::{strain_from_hessian, velocity_gradient_from_hessian, DerivOrder};
use crate::error::Error;
use crate::mesh::BoundaryTag;
use crate::quadrature::{EdgeRule, TriangleRule};
use crate::space::{ScalarField, VelocityField};
use crate::stokes::{PenaltyData, Viscosity};

/// Error norms of a computed stream function against exact fields.
#[derive(Clone, Copy, Debug)]
pub struct ErrorNorms {
    pub l2_stream: f64,
    pub l2_velocity: f64,
    pub h1_velocity: f64,
    pub dg: f64,
}

/// Exact reference fields for the error norms.
pub struct ExactFields<'a> {
    pub stream: &'a dyn Fn([f64; 2]) -> f64,
    pub velocity: &'a dyn Fn([f64; 2]) -> [f64; 2],
    pub velocity_gradient: &'a dyn Fn([f64; 2]) -> [[f64; 2]; 2],
}

/// All four norms by cell and facet quadrature. The DG norm combines the
/// weighted strain volume term with the beta-weighted facet jumps of the
/// velocity error, using the same penalty data as assembly. Exterior facets
/// contribute jumps `(u_D - u_h) (x) n` when `include_exterior` is set (the
/// zero-penetration regime).
pub fn error_norms(
    stream_h: &ScalarField,
    exact: &ExactFields,
    viscosity: &dyn Viscosity,
    penalty: &PenaltyData,
    include_exterior: bool,
) -> ErrorNorms {
    let space = &stream_h.space;
    let p = space.degree();
    let mesh = &space.mesh;
    let volume_rule = TriangleRule::with_degree(2 * p + 4);
    let edge_rule = EdgeRule::with_degree(2 * p + 4);
    let tables = space.element.tabulate(&volume_rule.points, DerivOrder::Hessian);
    let n = space.element.dof_count();

    let mut l2_stream2 = 0.0;
    let mut l2_velocity2 = 0.0;
    let mut h1_velocity2 = 0.0;
    let mut dg_volume2 = 0.0;

    for cell in 0..mesh.n_cells() {
        let geom = &space.geometry[cell];
        let globals = &space.dofmap.cell_to_global[cell];
        let jac = geom.det.abs();
        for (q, &r) in volume_rule.points.iter().enumerate() {
            let x = geom.to_physical(r);
            let w = volume_rule.weights[q] * jac;

            let mut value = 0.0;
            let mut grad = [0.0; 2];
            let mut hess = [0.0; 3];
            for i in 0..n {
                let c = stream_h.coeffs[globals[i]];
                value += c * tables.value(q, i);
                let g = tables.gradient(q, i);
                grad[0] += c * g[0];
                grad[1] += c * g[1];
                let h = tables.hessian(q, i);
                hess[0] += c * h[0];
                hess[1] += c * h[1];
                hess[2] += c * h[2];
            }
            let pg = geom.push_gradient(grad);
            let ph = geom.push_hessian(hess);
            let u_h = crate::element::curl_from_gradient(pg);
            let grad_u_h = velocity_gradient_from_hessian(&ph);
            let eps_h = strain_from_hessian(&ph);

            let d_phi = value - (exact.stream)(x);
            let u = (exact.velocity)(x);
            let du = [u_h[0] - u[0], u_h[1] - u[1]];
            let g_exact = (exact.velocity_gradient)(x);
            let eps_exact = [
                [g_exact[0][0], 0.5 * (g_exact[0][1] + g_exact[1][0])],
                [0.5 * (g_exact[0][1] + g_exact[1][0]), g_exact[1][1]],
            ];

            l2_stream2 += w * d_phi * d_phi;
            l2_velocity2 += w * (du[0] * du[0] + du[1] * du[1]);
            let mut dg2 = 0.0;
            let mut eps_err2 = 0.0;
            for r_ in 0..2 {
                for c_ in 0..2 {
                    let d = grad_u_h[r_][c_] - g_exact[r_][c_];
                    dg2 += d * d;
                    let de = eps_h[r_][c_] - eps_exact[r_][c_];
                    eps_err2 += de * de;
                }
            }
            h1_velocity2 += w * dg2;
            let mu = viscosity.eval(cell, r, x);
            dg_volume2 += w * 2.0 * mu * eps_err2;
        }
    }

    // Facet jump contribution of the DG norm.
    let mut dg_jump2 = 0.0;
    for (fid, facet) in mesh.facets.iter().enumerate() {
        if !facet.is_interior() && !include_exterior {
            continue;
        }
        let beta = penalty.beta[fid];
        let pa = mesh.vertices[facet.vertices[0]];
        let pb = mesh.vertices[facet.vertices[1]];
        for (&t, &wq) in edge_rule.points.iter().zip(&edge_rule.weights) {
            let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
            let jump2 = if facet.is_interior() {
                // The exact velocity is continuous, so the error jump is the
                // discrete jump.
                let mut sides = [[0.0; 2]; 2];
                for (s, side) in facet.sides.iter().enumerate() {
                    let r = space.geometry[side.cell].to_reference(x);
                    sides[s] = VelocityField::new(stream_h).eval_in_cell(side.cell, r);
                }
                let d = [sides[0][0] - sides[1][0], sides[0][1] - sides[1][1]];
                d[0] * d[0] + d[1] * d[1]
            } else {
                let side = facet.sides[0];
                let r = space.geometry[side.cell].to_reference(x);
                let u_h = VelocityField::new(stream_h).eval_in_cell(side.cell, r);
                let u = (exact.velocity)(x);
                let d = [u_h[0] - u[0], u_h[1] - u[1]];
                d[0] * d[0] + d[1] * d[1]
            };
            dg_jump2 += wq * facet.length * beta * jump2;
        }
    }

    ErrorNorms {
        l2_stream: l2_stream2.sqrt(),
        l2_velocity: l2_velocity2.sqrt(),
        h1_velocity: h1_velocity2.sqrt(),
        dg: (dg_volume2 + dg_jump2).sqrt(),
    }
}

/// Benchmark functionals of a converged state.
///
/// `work_rate` is the average rate of work done against gravity,
/// `int T u . b`, and `dissipation_rate` the viscous dissipation
/// `int 2 mu eps : eps`; at a Boussinesq steady state these balance as
/// `W = Phi / Ra`, which is what `delta` measures.
#[derive(Clone, Copy, Debug)]
pub struct FunctionalReport {
    pub nu: f64,
    pub u_rms: f64,
    /// `<W>`, floored at zero (see `w_integral` for the raw value).
    pub work_rate: f64,
    /// `<Phi>`.
    pub dissipation_rate: f64,
    /// Relative energy-balance defect, `None` when `ra == 0`.
    pub delta: Option<f64>,
    /// Raw work integral before the flooring guard.
    pub w_integral: f64,
    pub dofs: usize,
    pub h: f64,
    pub degree: usize,
}

/// Nusselt number: outward temperature flux through the tagged top boundary.
pub fn nusselt(temperature: &ScalarField) -> f64 {
    let space = &temperature.space;
    let mesh = &space.mesh;
    let rule = EdgeRule::with_degree(2 * space.degree() + 2);
    let mut nu = 0.0;
    for fid in mesh.exterior_facets_tagged(BoundaryTag::Top) {
        let facet = &mesh.facets[fid];
        let side = facet.sides[0];
        let geom = &space.geometry[side.cell];
        let pa = mesh.vertices[facet.vertices[0]];
        let pb = mesh.vertices[facet.vertices[1]];
        for (&t, &w) in rule.points.iter().zip(&rule.weights) {
            let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
            let g = temperature.gradient_in_cell(side.cell, geom.to_reference(x));
            nu += w * facet.length * (g[0] * facet.normal[0] + g[1] * facet.normal[1]);
        }
    }
    nu
}

/// Root-mean-square speed over the domain at a chosen quadrature degree.
pub fn u_rms(stream: &ScalarField, quad_degree: usize) -> f64 {
    let space = &stream.space;
    let rule = TriangleRule::with_degree(quad_degree);
    let tables = space.element.tabulate(&rule.points, DerivOrder::Gradient);
    let n = space.element.dof_count();
    let mut total = 0.0;
    for cell in 0..space.mesh.n_cells() {
        let geom = &space.geometry[cell];
        let globals = &space.dofmap.cell_to_global[cell];
        let jac = geom.det.abs();
        for (q, &w) in rule.weights.iter().enumerate() {
            let mut grad = [0.0; 2];
            for i in 0..n {
                let c = stream.coeffs[globals[i]];
                let g = tables.gradient(q, i);
                grad[0] += c * g[0];
                grad[1] += c * g[1];
            }
            let u = crate::element::curl_from_gradient(geom.push_gradient(grad));
            total += w * jac * (u[0] * u[0] + u[1] * u[1]);
        }
    }
    total.sqrt()
}

/// Compute all benchmark functionals. `buoyancy_dir` is the unit direction
/// of the thermal body force (the "up" of the work integral).
pub fn functionals(
    stream: &ScalarField,
    temperature: &ScalarField,
    viscosity: &dyn Viscosity,
    ra: f64,
    buoyancy_dir: [f64; 2],
) -> FunctionalReport {
    let space = &stream.space;
    let p = space.degree();
    let rule = TriangleRule::with_degree(2 * p + 2);
    let tables = space.element.tabulate(&rule.points, DerivOrder::Hessian);
    let t_tables = temperature.space.element.tabulate(&rule.points, DerivOrder::Value);
    let n = space.element.dof_count();
    let nt = temperature.space.element.dof_count();

    let mut u2 = 0.0;
    let mut w_int = 0.0;
    let mut phi_int = 0.0;
    for cell in 0..space.mesh.n_cells() {
        let geom = &space.geometry[cell];
        let globals = &space.dofmap.cell_to_global[cell];
        let t_globals = &temperature.space.dofmap.cell_to_global[cell];
        let jac = geom.det.abs();
        for (q, &w) in rule.weights.iter().enumerate() {
            let mut grad = [0.0; 2];
            let mut hess = [0.0; 3];
            for i in 0..n {
                let c = stream.coeffs[globals[i]];
                let g = tables.gradient(q, i);
                grad[0] += c * g[0];
                grad[1] += c * g[1];
                let h = tables.hessian(q, i);
                hess[0] += c * h[0];
                hess[1] += c * h[1];
                hess[2] += c * h[2];
            }
            let mut t_val = 0.0;
            for i in 0..nt {
                t_val += temperature.coeffs[t_globals[i]] * t_tables.value(q, i);
            }
            let u = crate::element::curl_from_gradient(geom.push_gradient(grad));
            let eps = strain_from_hessian(&geom.push_hessian(hess));
            let eps2 = eps[0][0] * eps[0][0] + 2.0 * eps[0][1] * eps[0][1] + eps[1][1] * eps[1][1];
            let x = geom.to_physical(rule.points[q]);
            let mu = viscosity.eval(cell, rule.points[q], x);
            let dv = w * jac;
            u2 += dv * (u[0] * u[0] + u[1] * u[1]);
            w_int += dv * t_val * (u[0] * buoyancy_dir[0] + u[1] * buoyancy_dir[1]);
            phi_int += dv * 2.0 * mu * eps2;
        }
    }

    let work_rate = w_int.max(0.0);
    let dissipation_rate = phi_int;
    let delta = if ra == 0.0 {
        None
    } else {
        let phi_over_ra = dissipation_rate / ra;
        let m = work_rate.max(phi_over_ra);
        if m == 0.0 {
            None
        } else {
            Some((work_rate - phi_over_ra).abs() / m)
        }
    };

    FunctionalReport {
        nu: nusselt(temperature),
        u_rms: u2.sqrt(),
        work_rate,
        dissipation_rate,
        delta,
        w_integral: w_int,
        dofs: space.total_dofs(),
        h: space.mesh.mesh_size(),
        degree: p,
    }
}

/// Least-squares convergence rates from `(h, error)` pairs.
#[derive(Clone, Copy, Debug)]
pub struct RateEstimate {
    /// Slope over the three finest levels.
    pub slope: f64,
    /// Slope over all levels.
    pub slope_all: f64,
    /// False when the error sequence is not monotonically decreasing with h.
    pub monotone: bool,
}

fn ls_slope(data: &[(f64, f64)]) -> f64 {
    let n = data.len() as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for &(h, e) in data {
        sx += h.ln();
        sy += e.ln();
    }
    let (mx, my) = (sx / n, sy / n);
    let mut num = 0.0;
    let mut den = 0.0;
    for &(h, e) in data {
        num += (h.ln() - mx) * (e.ln() - my);
        den += (h.ln() - mx) * (h.ln() - mx);
    }
    num / den
}

/// Estimate convergence rates; requires at least three levels. Data may be
/// passed in any order; it is sorted by decreasing `h` internally.
pub fn convergence_rates(data: &[(f64, f64)]) -> Result<RateEstimate, Error> {
    if data.len() < 3 {
        return Err(Error::InvalidSpace(format!("need at least 3 levels for a rate, got {}", data.len())));
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let monotone = sorted.windows(2).all(|w| w[1].1 < w[0].1);
    let finest = &sorted[sorted.len() - 3..];
    Ok(RateEstimate { slope: ls_slope(finest), slope_all: ls_slope(&sorted), monotone })
}

/// Largest `|div u|` over all volume quadrature points together with the
/// largest `|u|`, for the pointwise mass-conservation check.
pub fn solenoidality(stream: &ScalarField) -> (f64, f64) {
    let space = &stream.space;
    let rule = TriangleRule::with_degree(2 * space.degree());
    let tables = space.element.tabulate(&rule.points, DerivOrder::Hessian);
    let n = space.element.dof_count();
    let mut max_div = 0.0f64;
    let mut max_u = 0.0f64;
    for cell in 0..space.mesh.n_cells() {
        let geom = &space.geometry[cell];
        let globals = &space.dofmap.cell_to_global[cell];
        for q in 0..rule.len() {
            let mut grad = [0.0; 2];
            let mut hess = [0.0; 3];
            for i in 0..n {
                let c = stream.coeffs[globals[i]];
                let g = tables.gradient(q, i);
                grad[0] += c * g[0];
                grad[1] += c * g[1];
                let h = tables.hessian(q, i);
                hess[0] += c * h[0];
                hess[1] += c * h[1];
                hess[2] += c * h[2];
            }
            let u = crate::element::curl_from_gradient(geom.push_gradient(grad));
            let gu = velocity_gradient_from_hessian(&geom.push_hessian(hess));
            max_div = max_div.max((gu[0][0] + gu[1][1]).abs());
            max_u = max_u.max((u[0] * u[0] + u[1] * u[1]).sqrt());
        }
    }
    (max_div, max_u)
}

/// Largest `|u . n|` over all boundary quadrature points together with the
/// largest boundary `|u|`, for the impermeability check.
pub fn boundary_flux(stream: &ScalarField) -> (f64, f64) {
    let space = &stream.space;
    let mesh = &space.mesh;
    let rule = EdgeRule::with_degree(2 * space.degree() + 2);
    let vel = VelocityField::new(stream);
    let mut max_un = 0.0f64;
    let mut max_u = 0.0f64;
    for facet in mesh.facets.iter().filter(|f| !f.is_interior()) {
        let side = facet.sides[0];
        let geom = &space.geometry[side.cell];
        let pa = mesh.vertices[facet.vertices[0]];
        let pb = mesh.vertices[facet.vertices[1]];
        for &t in &rule.points {
            let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
            let u = vel.eval_in_cell(side.cell, geom.to_reference(x));
            max_un = max_un.max((u[0] * facet.normal[0] + u[1] * facet.normal[1]).abs());
            max_u = max_u.max((u[0] * u[0] + u[1] * u[1]).sqrt());
        }
    }
    (max_un, max_u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Rectangle, TriangularMesh};
    use crate::space::{DirichletSpec, FunctionSpace};
    use crate::stokes::{compute_penalty, ConstantViscosity};
    use std::sync::Arc;

    #[test]
    fn synthetic_rate_is_two() {
        let data = [(1.0, 1.0), (0.5, 0.25), (0.25, 0.0625)];
        let est = convergence_rates(&data).unwrap();
        assert!((est.slope - 2.0).abs() < 1e-12);
        assert!(est.monotone);
    }

    #[test]
    fn non_monotone_is_flagged_but_reported() {
        let data = [(1.0, 1.0), (0.5, 1.2), (0.25, 0.3), (0.125, 0.1)];
        let est = convergence_rates(&data).unwrap();
        assert!(!est.monotone);
        assert!(est.slope.is_finite());
        assert!(convergence_rates(&data[..2]).is_err());
    }

    #[test]
    fn zero_error_for_exactly_representable_stream() {
        // phi = x(1-x) y(1-y) is degree 4 and C-infinity, so at p = 4 the
        // interpolant is the function itself: all norms vanish.
        let mesh = Arc::new(TriangularMesh::structured(Rectangle::unit(), 2).unwrap());
        let space = FunctionSpace::new(mesh, 4, &DirichletSpec::whole_boundary(0.0)).unwrap();
        let phi_exact = |x: [f64; 2]| x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]);
        let field = crate::space::ScalarField::interpolate(space.clone(), phi_exact);
        let mu = ConstantViscosity(1.0);
        let penalty = compute_penalty(&space, &mu, 2.0).unwrap();
        let velocity = |x: [f64; 2]| {
            let (a, b) = (x[0], x[1]);
            [a * (1.0 - a) * (1.0 - 2.0 * b), -(1.0 - 2.0 * a) * b * (1.0 - b)]
        };
        let velocity_gradient = |x: [f64; 2]| {
            let (a, b) = (x[0], x[1]);
            [
                [(1.0 - 2.0 * a) * (1.0 - 2.0 * b), -2.0 * a * (1.0 - a)],
                [2.0 * b * (1.0 - b), -(1.0 - 2.0 * a) * (1.0 - 2.0 * b)],
            ]
        };
        let exact = ExactFields {
            stream: &phi_exact,
            velocity: &velocity,
            velocity_gradient: &velocity_gradient,
        };
        let norms = error_norms(&field, &exact, &mu, &penalty, true);
        assert!(norms.l2_stream < 1e-13, "{:?}", norms);
        assert!(norms.l2_velocity < 1e-12);
        assert!(norms.h1_velocity < 1e-11);
        assert!(norms.dg < 1e-10);
    }

    #[test]
    fn conduction_nusselt_is_one() {
        for (n, p) in [(2usize, 1usize), (3, 2), (4, 3)] {
            let mesh = Arc::new(TriangularMesh::structured(Rectangle::unit(), n).unwrap());
            let space = FunctionSpace::new(mesh, p, &DirichletSpec::none()).unwrap();
            let t = crate::space::ScalarField::interpolate(space, |x| x[1]);
            assert!((nusselt(&t) - 1.0).abs() < 1e-10, "n={n} p={p}");
        }
    }

    #[test]
    fn zero_velocity_functionals() {
        let mesh = Arc::new(TriangularMesh::structured(Rectangle::unit(), 3).unwrap());
        let space = FunctionSpace::new(mesh.clone(), 2, &DirichletSpec::whole_boundary(0.0)).unwrap();
        let t_space = FunctionSpace::new(mesh, 2, &DirichletSpec::none()).unwrap();
        let phi = crate::space::ScalarField::zeros(space);
        let t = crate::space::ScalarField::interpolate(t_space, |x| x[1]);
        let mu = ConstantViscosity(1.0);
        let report = functionals(&phi, &t, &mu, 1e4, [0.0, -1.0]);
        assert!((report.nu - 1.0).abs() < 1e-10);
        assert!(report.u_rms.abs() < 1e-14);
        assert!(report.work_rate.abs() < 1e-14);
        // Ra = 0 guards the balance ratio.
        let r0 = functionals(&phi, &t, &mu, 0.0, [0.0, -1.0]);
        assert!(r0.delta.is_none());
    }

    #[test]
    fn u_rms_agrees_across_quadrature_degrees() {
        let mesh = Arc::new(TriangularMesh::structured(Rectangle::unit(), 4).unwrap());
        let space = FunctionSpace::new(mesh, 3, &DirichletSpec::whole_boundary(0.0)).unwrap();
        let phi = crate::space::ScalarField::interpolate(space, |x| {
            (std::f64::consts::PI * x[0]).sin() * (std::f64::consts::PI * x[1]).sin()
        });
        let a = u_rms(&phi, 2 * 3);
        let b = u_rms(&phi, 2 * 3 + 4);
        assert!((a - b).abs() <= 1e-10 * a.max(1.0), "{a} vs {b}");
    }
}
