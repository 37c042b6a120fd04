//! Passive particle advection through a computed velocity field, with
//! point location on the structured triangulation and per-cell occupancy
//! statistics.

use crate::error::Error;
use crate::mesh::{Rectangle, TriangularMesh};
use crate::space::ScalarField;

/// A set of tracer positions.
#[derive(Clone, Debug)]
pub struct ParticleSet {
    pub positions: Vec<[f64; 2]>,
}

impl ParticleSet {
    /// `per_side^2` cell-centered equidistant particles over the domain.
    pub fn equidistant(domain: Rectangle, per_side: usize) -> Self {
        let mut positions = Vec::with_capacity(per_side * per_side);
        for j in 0..per_side {
            for i in 0..per_side {
                positions.push([
                    domain.x0 + domain.width() * (i as f64 + 0.5) / per_side as f64,
                    domain.y0 + domain.height() * (j as f64 + 0.5) / per_side as f64,
                ]);
            }
        }
        ParticleSet { positions }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Snapshot rows `step,id,x,y` appended to an open writer.
    pub fn write_snapshot<W: std::io::Write>(&self, w: &mut W, step: usize) -> std::io::Result<()> {
        for (id, p) in self.positions.iter().enumerate() {
            writeln!(w, "{step},{id},{:.16e},{:.16e}", p[0], p[1])?;
        }
        Ok(())
    }
}

/// Containing cell and reference coordinates of a point.
///
/// The structured grid gives the candidate quadrilateral directly; its two
/// triangles and, near quad borders, the neighboring ring are tested in
/// ascending cell order so that points on shared edges or vertices resolve
/// to the lowest incident cell index.
pub fn locate(mesh: &TriangularMesh, point: [f64; 2]) -> Result<(usize, [f64; 2]), Error> {
    let scale = mesh.domain.width().max(mesh.domain.height());
    let tol = 1e-10 * scale;
    if !mesh.domain.contains(point, tol) {
        return Err(Error::PointOutsideDomain(point[0], point[1]));
    }
    let p = mesh.domain.clamp(point);
    let n = mesh.divisions;
    let hx = mesh.domain.width() / n as f64;
    let hy = mesh.domain.height() / n as f64;
    let qi = (((p[0] - mesh.domain.x0) / hx).floor() as isize).clamp(0, n as isize - 1) as usize;
    let qj = (((p[1] - mesh.domain.y0) / hy).floor() as isize).clamp(0, n as isize - 1) as usize;

    let bary = |cell: usize| -> [f64; 3] {
        let [a, b, c] = mesh.cell_coords(cell);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (p[1] - a[1]) * (c[0] - a[0])) / det;
        let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])) / det;
        [1.0 - l1 - l2, l1, l2]
    };
    let accept = |cell: usize| -> Option<(usize, [f64; 2])> {
        let l = bary(cell);
        if l[0] >= -tol && l[1] >= -tol && l[2] >= -tol {
            Some((cell, [l[1], l[2]]))
        } else {
            None
        }
    };

    // Fast path: strictly inside the home quad's triangles.
    let home = [2 * (qj * n + qi), 2 * (qj * n + qi) + 1];
    let fast_tol = tol;
    for &cell in &home {
        let l = bary(cell);
        if l.iter().all(|&v| v > fast_tol) {
            return Ok((cell, [l[1], l[2]]));
        }
    }

    // Near an edge or vertex: scan the neighborhood in ascending cell order.
    let mut candidates = Vec::with_capacity(18);
    for dj in -1isize..=1 {
        for di in -1isize..=1 {
            let (i, j) = (qi as isize + di, qj as isize + dj);
            if i >= 0 && j >= 0 && (i as usize) < n && (j as usize) < n {
                let q = j as usize * n + i as usize;
                candidates.push(2 * q);
                candidates.push(2 * q + 1);
            }
        }
    }
    candidates.sort_unstable();
    let mut best: Option<(usize, [f64; 2], f64)> = None;
    for cell in candidates {
        if let Some(hit) = accept(cell) {
            return Ok(hit);
        }
        let l = bary(cell);
        let worst = l[0].min(l[1]).min(l[2]);
        if best.map_or(true, |(_, _, b)| worst > b) {
            best = Some((cell, [l[1], l[2]], worst));
        }
    }
    // Roundoff fallback: the clamped point sits on the candidate closure.
    match best {
        Some((cell, r, worst)) if worst > -1e-6 * scale => Ok((cell, r)),
        _ => Err(Error::PointOutsideDomain(point[0], point[1])),
    }
}

/// Velocity sampler at arbitrary points of a stream function field.
pub struct VelocitySampler<'a> {
    stream: &'a ScalarField,
}

impl<'a> VelocitySampler<'a> {
    pub fn new(stream: &'a ScalarField) -> Self {
        VelocitySampler { stream }
    }

    pub fn eval(&self, point: [f64; 2]) -> Result<[f64; 2], Error> {
        let mesh = &self.stream.space.mesh;
        let clamped = mesh.domain.clamp(point);
        let (cell, r) = locate(mesh, clamped)?;
        Ok(crate::element::curl_from_gradient(self.stream.gradient_in_cell(cell, r)))
    }
}

/// Outcome of an advection run.
#[derive(Clone, Copy, Debug, Default)]
pub struct AdvectionReport {
    pub steps: usize,
    /// Particles projected back onto the boundary at least once.
    pub projected: usize,
    /// Largest distance any particle left the domain before projection.
    pub max_escape: f64,
}

/// Advance all particles by `n_steps` of the explicit three-stage
/// third-order Runge-Kutta scheme through the frozen velocity field.
/// Particles drifting out of the closed domain by roundoff are projected
/// back to the nearest boundary point; excursions beyond `escape_tol` are
/// still projected but counted in the report.
pub fn advect_rk3(
    particles: &mut ParticleSet,
    stream: &ScalarField,
    dt: f64,
    n_steps: usize,
) -> Result<AdvectionReport, Error> {
    assert!(dt > 0.0, "time step must be positive");
    let sampler = VelocitySampler::new(stream);
    let mesh = &stream.space.mesh;
    let escape_tol = 1e-9 * mesh.domain.width().max(mesh.domain.height());
    let mut report = AdvectionReport { steps: n_steps, ..Default::default() };

    for _ in 0..n_steps {
        for p in particles.positions.iter_mut() {
            let x0 = *p;
            let k1 = sampler.eval(x0)?;
            let x1 = mesh.domain.clamp([x0[0] + dt * k1[0], x0[1] + dt * k1[1]]);
            let k2 = sampler.eval(x1)?;
            let x2 = mesh.domain.clamp([
                0.75 * x0[0] + 0.25 * (x1[0] + dt * k2[0]),
                0.75 * x0[1] + 0.25 * (x1[1] + dt * k2[1]),
            ]);
            let k3 = sampler.eval(x2)?;
            let xn = [
                x0[0] / 3.0 + 2.0 / 3.0 * (x2[0] + dt * k3[0]),
                x0[1] / 3.0 + 2.0 / 3.0 * (x2[1] + dt * k3[1]),
            ];
            let clamped = mesh.domain.clamp(xn);
            let escape = ((xn[0] - clamped[0]).powi(2) + (xn[1] - clamped[1]).powi(2)).sqrt();
            if escape > 0.0 {
                report.max_escape = report.max_escape.max(escape);
                if escape > escape_tol {
                    report.projected += 1;
                }
            }
            *p = clamped;
        }
    }
    Ok(report)
}

/// Mean and population standard deviation of the per-cell particle counts.
pub fn occupancy_stats(particles: &ParticleSet, mesh: &TriangularMesh) -> Result<(f64, f64), Error> {
    let mut counts = vec![0usize; mesh.n_cells()];
    for &p in &particles.positions {
        let (cell, _) = locate(mesh, p)?;
        counts[cell] += 1;
    }
    let m = mesh.n_cells() as f64;
    let mean = particles.len() as f64 / m;
    let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / m;
    Ok((mean, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{DirichletSpec, FunctionSpace};
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;

    fn unit_mesh(n: usize) -> Arc<TriangularMesh> {
        Arc::new(TriangularMesh::structured(Rectangle::unit(), n).unwrap())
    }

    #[test]
    fn centroid_locates_its_own_cell() {
        let mesh = unit_mesh(3);
        for cell in 0..mesh.n_cells() {
            let (found, _) = locate(&mesh, mesh.cell_centroid(cell)).unwrap();
            assert_eq!(found, cell);
        }
    }

    #[test]
    fn shared_vertex_resolves_to_lowest_incident_cell() {
        let mesh = unit_mesh(2);
        let point = [0.5, 0.5];
        let incident: Vec<usize> = (0..mesh.n_cells())
            .filter(|&c| {
                mesh.cells[c]
                    .iter()
                    .any(|&v| (mesh.vertices[v][0] - 0.5).abs() < 1e-15 && (mesh.vertices[v][1] - 0.5).abs() < 1e-15)
            })
            .collect();
        assert!(incident.len() >= 3);
        let (found, _) = locate(&mesh, point).unwrap();
        assert_eq!(found, *incident.iter().min().unwrap());
    }

    #[test]
    fn locate_round_trip_reconstructs_coordinates() {
        let mesh = Arc::new(
            TriangularMesh::structured(Rectangle { x0: -1.3, y0: 0.2, x1: 2.1, y1: 1.7 }, 7).unwrap(),
        );
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..10_000 {
            let p = [
                rng.gen_range(mesh.domain.x0..=mesh.domain.x1),
                rng.gen_range(mesh.domain.y0..=mesh.domain.y1),
            ];
            let (cell, r) = locate(&mesh, p).unwrap();
            let [a, b, c] = mesh.cell_coords(cell);
            let x = [
                a[0] * (1.0 - r[0] - r[1]) + b[0] * r[0] + c[0] * r[1],
                a[1] * (1.0 - r[0] - r[1]) + b[1] * r[0] + c[1] * r[1],
            ];
            assert!((x[0] - p[0]).abs() < 1e-12 && (x[1] - p[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn point_outside_domain_is_rejected() {
        let mesh = unit_mesh(2);
        assert!(locate(&mesh, [1.5, 0.5]).is_err());
        assert!(locate(&mesh, [0.5, -0.1]).is_err());
    }

    #[test]
    fn zero_velocity_leaves_positions_unchanged() {
        let mesh = unit_mesh(4);
        let space = FunctionSpace::new(mesh.clone(), 2, &DirichletSpec::none()).unwrap();
        let stream = ScalarField::zeros(space);
        let mut particles = ParticleSet::equidistant(mesh.domain, 16);
        let before = particles.positions.clone();
        let report = advect_rk3(&mut particles, &stream, 0.01, 25).unwrap();
        assert_eq!(report.projected, 0);
        assert_eq!(before, particles.positions);
    }

    #[test]
    fn rigid_rotation_conserves_radius_and_rk3_order() {
        // phi = ((x-c)^2 + (y-c)^2)/2 gives u = (y - c, -(x - c)): a rigid
        // rotation, exactly representable at p = 2.
        let mesh = unit_mesh(6);
        let space = FunctionSpace::new(mesh.clone(), 2, &DirichletSpec::none()).unwrap();
        let stream = ScalarField::interpolate(space, |x| {
            0.5 * ((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2))
        });

        let start = [0.8, 0.5];
        let total_time = 2.0;
        let exact = |t: f64| {
            // Clockwise rotation with unit angular speed.
            [0.5 + 0.3 * t.cos(), 0.5 - 0.3 * t.sin()]
        };

        let mut errors = Vec::new();
        for steps in [40usize, 80, 160] {
            let dt = total_time / steps as f64;
            let mut particles = ParticleSet { positions: vec![start] };
            advect_rk3(&mut particles, &stream, dt, steps).unwrap();
            let p = particles.positions[0];
            let e = exact(total_time);
            let radius = ((p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2)).sqrt();
            assert!((radius - 0.3).abs() < 1e-4, "radius drift {radius}");
            errors.push((dt, ((p[0] - e[0]).powi(2) + (p[1] - e[1]).powi(2)).sqrt()));
        }
        let slope = (errors[0].1 / errors[2].1).log2() / 2.0;
        assert!((slope - 3.0).abs() < 0.2, "RK3 order {slope}");
    }

    #[test]
    fn occupancy_closed_forms() {
        let mesh = unit_mesh(8);
        // 256^2 equidistant particles over 128 cells average to 512.
        let particles = ParticleSet::equidistant(mesh.domain, 256);
        let (mean, std) = occupancy_stats(&particles, &mesh).unwrap();
        assert!((mean - 512.0).abs() < 1e-12);
        assert!(std >= 0.0);

        // All particles in one cell: std = count sqrt(M - 1)/M.
        let centroid = mesh.cell_centroid(0);
        let clustered = ParticleSet { positions: vec![centroid; 1000] };
        let (mean_c, std_c) = occupancy_stats(&clustered, &mesh).unwrap();
        let m = mesh.n_cells() as f64;
        assert!((mean_c - 1000.0 / m).abs() < 1e-12);
        assert!((std_c - 1000.0 * (m - 1.0).sqrt() / m).abs() < 1e-9);
    }
}
