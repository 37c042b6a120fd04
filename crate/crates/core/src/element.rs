//! Lagrange reference elements on the unit triangle with derivative tables
//! up to second order, and the affine push-forward to physical cells.
//!
//! Basis functions are represented by their monomial coefficients, obtained
//! from the inverse of the Vandermonde matrix at the equispaced lattice
//! nodes. This supports evaluation at arbitrary reference points, which the
//! tracer point-location path needs in addition to fixed quadrature tables.

use crate::error::Error;
use faer::linalg::solvers::Solve;
use faer::Mat;

/// Mesh entity a Lagrange node is attached to, used for conforming DOF
/// numbering.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeEntity {
    /// Local vertex 0, 1 or 2.
    Vertex(usize),
    /// Local edge `edge` (opposite local vertex `edge`), position
    /// `pos` in `1..=p-1` counted from the edge's first local vertex.
    Edge { edge: usize, pos: usize },
    /// Cell-interior node.
    Interior(usize),
}

/// How many derivative tables to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd)]
pub enum DerivOrder {
    Value = 0,
    Gradient = 1,
    Hessian = 2,
}

/// Basis tables at a fixed set of reference points, laid out point-major.
#[derive(Clone, Debug)]
pub struct BasisTables {
    pub n_points: usize,
    pub n_basis: usize,
    pub values: Vec<f64>,
    /// Reference gradients `(d/dxi, d/deta)`; empty unless requested.
    pub gradients: Vec<[f64; 2]>,
    /// Reference Hessians `(xx, xy, yy)`; empty unless requested.
    pub hessians: Vec<[f64; 3]>,
}

impl BasisTables {
    #[inline]
    pub fn value(&self, point: usize, basis: usize) -> f64 {
        self.values[point * self.n_basis + basis]
    }

    #[inline]
    pub fn gradient(&self, point: usize, basis: usize) -> [f64; 2] {
        self.gradients[point * self.n_basis + basis]
    }

    #[inline]
    pub fn hessian(&self, point: usize, basis: usize) -> [f64; 3] {
        self.hessians[point * self.n_basis + basis]
    }
}

/// Largest supported polynomial degree (buffer sizing).
const MAX_DEGREE: usize = 6;
const MAX_MONOMIALS: usize = (MAX_DEGREE + 1) * (MAX_DEGREE + 2) / 2;

/// Lagrange element of total degree `p >= 1` on the reference triangle with
/// vertices (0,0), (1,0), (0,1).
#[derive(Clone, Debug)]
pub struct ReferenceElement {
    degree: usize,
    nodes: Vec<[f64; 2]>,
    entities: Vec<NodeEntity>,
    /// Monomial exponents `(a, b)` for `x^a y^b`, fixed order.
    monomials: Vec<(u32, u32)>,
    /// `coeffs[i * n + j]`: coefficient of monomial `j` in basis function `i`.
    coeffs: Vec<f64>,
}

impl ReferenceElement {
    pub fn new(degree: usize) -> Result<Self, Error> {
        if degree < 1 {
            return Err(Error::InvalidElement("degree must be at least 1".into()));
        }
        if degree > MAX_DEGREE {
            return Err(Error::InvalidElement(format!("degree {degree} exceeds the supported maximum {MAX_DEGREE}")));
        }
        let p = degree;
        let mut nodes = Vec::new();
        let mut entities = Vec::new();

        let vertex = |k: usize| -> [f64; 2] {
            match k {
                0 => [0.0, 0.0],
                1 => [1.0, 0.0],
                _ => [0.0, 1.0],
            }
        };
        for k in 0..3 {
            nodes.push(vertex(k));
            entities.push(NodeEntity::Vertex(k));
        }
        // Edge k runs from local vertex (k+1)%3 to (k+2)%3.
        for edge in 0..3 {
            let a = vertex((edge + 1) % 3);
            let b = vertex((edge + 2) % 3);
            for pos in 1..p {
                let t = pos as f64 / p as f64;
                nodes.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
                entities.push(NodeEntity::Edge { edge, pos });
            }
        }
        let mut interior = 0;
        for j in 1..p {
            for i in 1..p {
                if i + j <= p.saturating_sub(1) {
                    nodes.push([i as f64 / p as f64, j as f64 / p as f64]);
                    entities.push(NodeEntity::Interior(interior));
                    interior += 1;
                }
            }
        }

        let mut monomials = Vec::new();
        for d in 0..=p as u32 {
            for a in (0..=d).rev() {
                monomials.push((a, d - a));
            }
        }
        let n = monomials.len();
        debug_assert_eq!(n, nodes.len());

        // Lagrange coefficients: columns of the Vandermonde inverse.
        let vmat = Mat::from_fn(n, n, |row, col| {
            let (a, b) = monomials[col];
            let [x, y] = nodes[row];
            x.powi(a as i32) * y.powi(b as i32)
        });
        let lu = vmat.partial_piv_lu();
        let inv = lu.solve(Mat::<f64>::identity(n, n));
        let mut coeffs = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                coeffs[i * n + j] = inv[(j, i)];
            }
        }

        Ok(ReferenceElement { degree, nodes, entities, monomials, coeffs })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dof_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn node_entities(&self) -> &[NodeEntity] {
        &self.entities
    }

    /// Powers `x^0 .. x^p` into a stack buffer.
    #[inline]
    fn powers(v: f64, p: usize, out: &mut [f64; MAX_DEGREE + 1]) {
        out[0] = 1.0;
        for k in 1..=p {
            out[k] = out[k - 1] * v;
        }
    }

    /// Evaluate every basis function at one reference point.
    pub fn eval_values(&self, point: [f64; 2], out: &mut [f64]) {
        let n = self.dof_count();
        let p = self.degree;
        let mut xp = [0.0; MAX_DEGREE + 1];
        let mut yp = [0.0; MAX_DEGREE + 1];
        Self::powers(point[0], p, &mut xp);
        Self::powers(point[1], p, &mut yp);
        let mut mono = [0.0f64; MAX_MONOMIALS];
        for (j, &(a, b)) in self.monomials.iter().enumerate() {
            mono[j] = xp[a as usize] * yp[b as usize];
        }
        for i in 0..n {
            let mut v = 0.0;
            for j in 0..n {
                v += self.coeffs[i * n + j] * mono[j];
            }
            out[i] = v;
        }
    }

    /// Evaluate every basis gradient at one reference point.
    pub fn eval_gradients(&self, point: [f64; 2], out: &mut [[f64; 2]]) {
        let n = self.dof_count();
        let p = self.degree;
        let mut xp = [0.0; MAX_DEGREE + 1];
        let mut yp = [0.0; MAX_DEGREE + 1];
        Self::powers(point[0], p, &mut xp);
        Self::powers(point[1], p, &mut yp);
        let mut dmono = [[0.0f64; 2]; MAX_MONOMIALS];
        for (j, &(a, b)) in self.monomials.iter().enumerate() {
            let (a, b) = (a as usize, b as usize);
            dmono[j] = [
                if a == 0 { 0.0 } else { a as f64 * xp[a - 1] * yp[b] },
                if b == 0 { 0.0 } else { b as f64 * xp[a] * yp[b - 1] },
            ];
        }
        for i in 0..n {
            let mut g = [0.0; 2];
            for j in 0..n {
                let c = self.coeffs[i * n + j];
                g[0] += c * dmono[j][0];
                g[1] += c * dmono[j][1];
            }
            out[i] = g;
        }
    }

    /// Evaluate every basis Hessian `(xx, xy, yy)` at one reference point.
    pub fn eval_hessians(&self, point: [f64; 2], out: &mut [[f64; 3]]) {
        let n = self.dof_count();
        let p = self.degree;
        let mut xp = [0.0; MAX_DEGREE + 1];
        let mut yp = [0.0; MAX_DEGREE + 1];
        Self::powers(point[0], p, &mut xp);
        Self::powers(point[1], p, &mut yp);
        let mut hmono = [[0.0f64; 3]; MAX_MONOMIALS];
        for (j, &(a, b)) in self.monomials.iter().enumerate() {
            let (a, b) = (a as usize, b as usize);
            hmono[j] = [
                if a < 2 { 0.0 } else { (a * (a - 1)) as f64 * xp[a - 2] * yp[b] },
                if a < 1 || b < 1 { 0.0 } else { (a * b) as f64 * xp[a - 1] * yp[b - 1] },
                if b < 2 { 0.0 } else { (b * (b - 1)) as f64 * xp[a] * yp[b - 2] },
            ];
        }
        for i in 0..n {
            let mut h = [0.0; 3];
            for j in 0..n {
                let c = self.coeffs[i * n + j];
                h[0] += c * hmono[j][0];
                h[1] += c * hmono[j][1];
                h[2] += c * hmono[j][2];
            }
            out[i] = h;
        }
    }

    /// Tabulate basis values and derivatives at a set of reference points.
    pub fn tabulate(&self, points: &[[f64; 2]], order: DerivOrder) -> BasisTables {
        let n = self.dof_count();
        let m = points.len();
        let mut tables = BasisTables {
            n_points: m,
            n_basis: n,
            values: vec![0.0; m * n],
            gradients: if order >= DerivOrder::Gradient { vec![[0.0; 2]; m * n] } else { Vec::new() },
            hessians: if order >= DerivOrder::Hessian { vec![[0.0; 3]; m * n] } else { Vec::new() },
        };
        for (q, &pt) in points.iter().enumerate() {
            self.eval_values(pt, &mut tables.values[q * n..(q + 1) * n]);
            if order >= DerivOrder::Gradient {
                self.eval_gradients(pt, &mut tables.gradients[q * n..(q + 1) * n]);
            }
            if order >= DerivOrder::Hessian {
                self.eval_hessians(pt, &mut tables.hessians[q * n..(q + 1) * n]);
            }
        }
        tables
    }
}

/// Affine geometry of one physical triangle.
#[derive(Clone, Copy, Debug)]
pub struct CellGeometry {
    pub coords: [[f64; 2]; 3],
    /// Columns are the edge vectors `v1 - v0` and `v2 - v0`.
    pub jacobian: [[f64; 2]; 2],
    pub inverse_jacobian: [[f64; 2]; 2],
    pub det: f64,
    pub area: f64,
}

impl CellGeometry {
    pub fn new(coords: [[f64; 2]; 3]) -> Result<Self, Error> {
        let j = [
            [coords[1][0] - coords[0][0], coords[2][0] - coords[0][0]],
            [coords[1][1] - coords[0][1], coords[2][1] - coords[0][1]],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if !(det.abs() > 0.0) {
            return Err(Error::InvalidElement("singular cell Jacobian".into()));
        }
        let inv = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
        Ok(CellGeometry { coords, jacobian: j, inverse_jacobian: inv, det, area: 0.5 * det.abs() })
    }

    #[inline]
    pub fn to_physical(&self, r: [f64; 2]) -> [f64; 2] {
        [
            self.coords[0][0] + self.jacobian[0][0] * r[0] + self.jacobian[0][1] * r[1],
            self.coords[0][1] + self.jacobian[1][0] * r[0] + self.jacobian[1][1] * r[1],
        ]
    }

    #[inline]
    pub fn to_reference(&self, x: [f64; 2]) -> [f64; 2] {
        let d = [x[0] - self.coords[0][0], x[1] - self.coords[0][1]];
        [
            self.inverse_jacobian[0][0] * d[0] + self.inverse_jacobian[0][1] * d[1],
            self.inverse_jacobian[1][0] * d[0] + self.inverse_jacobian[1][1] * d[1],
        ]
    }

    /// Physical gradient `J^{-T} g`.
    #[inline]
    pub fn push_gradient(&self, g: [f64; 2]) -> [f64; 2] {
        let k = &self.inverse_jacobian;
        [k[0][0] * g[0] + k[1][0] * g[1], k[0][1] * g[0] + k[1][1] * g[1]]
    }

    /// Physical Hessian `J^{-T} H J^{-1}` from the reference `(xx, xy, yy)`
    /// triple. The off-diagonal entries are accumulated independently so the
    /// divergence identity can be checked on genuinely computed numbers.
    #[inline]
    pub fn push_hessian(&self, h: [f64; 3]) -> [[f64; 2]; 2] {
        let k = &self.inverse_jacobian; // K = J^{-1}; we need K^T H K
        let href = [[h[0], h[1]], [h[1], h[2]]];
        let mut out = [[0.0; 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                let mut acc = 0.0;
                for a in 0..2 {
                    for b in 0..2 {
                        acc += k[a][r] * href[a][b] * k[b][c];
                    }
                }
                out[r][c] = acc;
            }
        }
        out
    }
}

/// Curl of a scalar field from its physical gradient: `(d/dy, -d/dx)`.
#[inline]
pub fn curl_from_gradient(g: [f64; 2]) -> [f64; 2] {
    [g[1], -g[0]]
}

/// Symmetric gradient of `curl(phi)` from the physical Hessian of `phi`.
///
/// With `u = (phi_y, -phi_x)`: `eps_11 = phi_xy`, `eps_22 = -phi_yx`,
/// `eps_12 = (phi_yy - phi_xx) / 2`. The trace vanishes identically, which
/// is the pointwise mass conservation the scheme is built around.
#[inline]
pub fn strain_from_hessian(h: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let off = 0.5 * (h[1][1] - h[0][0]);
    [[h[0][1], off], [off, -h[1][0]]]
}

/// Velocity gradient of `curl(phi)` from the physical Hessian of `phi`.
#[inline]
pub fn velocity_gradient_from_hessian(h: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [[h[0][1], h[1][1]], [-h[0][0], -h[1][0]]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::TriangleRule;

    #[test]
    fn rejects_degree_zero() {
        assert!(ReferenceElement::new(0).is_err());
    }

    #[test]
    fn dof_counts() {
        for p in 1..=4 {
            let el = ReferenceElement::new(p).unwrap();
            assert_eq!(el.dof_count(), (p + 1) * (p + 2) / 2);
        }
    }

    #[test]
    fn kronecker_property() {
        for p in 1..=4 {
            let el = ReferenceElement::new(p).unwrap();
            let n = el.dof_count();
            let mut vals = vec![0.0; n];
            for (k, &node) in el.nodes().iter().enumerate() {
                el.eval_values(node, &mut vals);
                for i in 0..n {
                    let expect = if i == k { 1.0 } else { 0.0 };
                    assert!((vals[i] - expect).abs() < 1e-10, "p={p} node {k} basis {i}: {}", vals[i]);
                }
            }
        }
    }

    #[test]
    fn vertex_value_at_origin() {
        let el = ReferenceElement::new(2).unwrap();
        let mut vals = vec![0.0; el.dof_count()];
        el.eval_values([0.0, 0.0], &mut vals);
        assert!((vals[0] - 1.0).abs() < 1e-12);
        for v in &vals[1..] {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn partition_of_unity_and_derivative_sums() {
        let rule = TriangleRule::with_degree(8);
        for p in 1..=4 {
            let el = ReferenceElement::new(p).unwrap();
            let t = el.tabulate(&rule.points, DerivOrder::Hessian);
            for q in 0..t.n_points {
                let sum: f64 = (0..t.n_basis).map(|i| t.value(q, i)).sum();
                assert!((sum - 1.0).abs() < 1e-12);
                let gx: f64 = (0..t.n_basis).map(|i| t.gradient(q, i)[0]).sum();
                let gy: f64 = (0..t.n_basis).map(|i| t.gradient(q, i)[1]).sum();
                assert!(gx.abs() < 1e-11 && gy.abs() < 1e-11);
                for c in 0..3 {
                    let h: f64 = (0..t.n_basis).map(|i| t.hessian(q, i)[c]).sum();
                    assert!(h.abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn quadratic_hessians_are_constant() {
        let el = ReferenceElement::new(2).unwrap();
        let pts = [[0.1, 0.2], [0.6, 0.3], [0.05, 0.9], [1.0 / 3.0, 1.0 / 3.0]];
        let t = el.tabulate(&pts, DerivOrder::Hessian);
        for i in 0..t.n_basis {
            let h0 = t.hessian(0, i);
            for q in 1..t.n_points {
                let h = t.hessian(q, i);
                for c in 0..3 {
                    assert!((h[c] - h0[c]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn basis_integrals_sum_to_cell_measure() {
        // Exact quadrature of the partition of unity.
        let rule = TriangleRule::with_degree(6);
        let el = ReferenceElement::new(3).unwrap();
        let t = el.tabulate(&rule.points, DerivOrder::Value);
        let total: f64 = (0..t.n_basis)
            .map(|i| -> f64 { rule.weights.iter().enumerate().map(|(q, w)| w * t.value(q, i)).sum() })
            .sum();
        assert!((total - 0.5).abs() < 1e-13);
    }

    #[test]
    fn push_forward_identity_and_scaling() {
        let el = ReferenceElement::new(3).unwrap();
        let pts = [[0.25, 0.5], [0.1, 0.1]];
        let t = el.tabulate(&pts, DerivOrder::Hessian);

        let ident = CellGeometry::new([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let scaled = CellGeometry::new([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]]).unwrap();
        for q in 0..pts.len() {
            for i in 0..t.n_basis {
                let g = t.gradient(q, i);
                let gi = ident.push_gradient(g);
                let gs = scaled.push_gradient(g);
                for c in 0..2 {
                    assert!((gi[c] - g[c]).abs() < 1e-14);
                    assert!((gs[c] - 0.5 * g[c]).abs() < 1e-14);
                }
                let h = t.hessian(q, i);
                let hi = ident.push_hessian(h);
                let hs = scaled.push_hessian(h);
                assert!((hi[0][0] - h[0]).abs() < 1e-12 && (hi[0][1] - h[1]).abs() < 1e-12);
                assert!((hs[0][0] - 0.25 * h[0]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hessian_of_interpolated_quadratic_on_random_affine_cell() {
        // x^2 + y^2 has Hessian 2 I everywhere; interpolation at p = 2 is
        // exact, so the pushed-forward Hessian must reproduce it.
        let el = ReferenceElement::new(2).unwrap();
        let geom = CellGeometry::new([[0.3, -0.2], [1.7, 0.4], [0.6, 1.9]]).unwrap();
        let f = |x: [f64; 2]| x[0] * x[0] + x[1] * x[1];
        let coeffs: Vec<f64> = el.nodes().iter().map(|&r| f(geom.to_physical(r))).collect();

        let pts = [[0.2, 0.3], [0.5, 0.25]];
        let t = el.tabulate(&pts, DerivOrder::Hessian);
        for q in 0..pts.len() {
            let mut h = [[0.0; 2]; 2];
            for i in 0..t.n_basis {
                let hp = geom.push_hessian(t.hessian(q, i));
                for r in 0..2 {
                    for c in 0..2 {
                        h[r][c] += coeffs[i] * hp[r][c];
                    }
                }
            }
            assert!((h[0][0] - 2.0).abs() < 1e-9, "{:?}", h);
            assert!((h[1][1] - 2.0).abs() < 1e-9);
            assert!(h[0][1].abs() < 1e-9 && h[1][0].abs() < 1e-9);
        }
    }

    #[test]
    fn curl_sign_convention() {
        // phi = y -> curl = (1, 0); phi = x -> curl = (0, -1).
        assert_eq!(curl_from_gradient([0.0, 1.0]), [1.0, 0.0]);
        assert_eq!(curl_from_gradient([1.0, 0.0]), [0.0, -1.0]);
    }

    #[test]
    fn divergence_of_curl_vanishes_on_tables() {
        let el = ReferenceElement::new(4).unwrap();
        let geom = CellGeometry::new([[0.1, 0.0], [1.3, 0.2], [0.4, 1.1]]).unwrap();
        let rule = TriangleRule::with_degree(8);
        let t = el.tabulate(&rule.points, DerivOrder::Hessian);
        for q in 0..t.n_points {
            for i in 0..t.n_basis {
                let h = geom.push_hessian(t.hessian(q, i));
                // div(curl phi) = phi_yx - phi_xy from the full Hessian.
                let div = h[0][1] - h[1][0];
                assert!(div.abs() < 1e-12, "div {div}");
            }
        }
    }

    #[test]
    fn edge_rule_integrates_trace_products_exactly() {
        // Products of two degree-p traces are degree 2p along the edge; the
        // degree-2p rule must agree with a much higher-order reference rule.
        use crate::quadrature::EdgeRule;
        for p in 2..=4usize {
            let el = ReferenceElement::new(p).unwrap();
            let rule = EdgeRule::with_degree(2 * p);
            let fine = EdgeRule::with_degree(2 * p + 10);
            let n = el.dof_count();
            let trace = |rule: &EdgeRule, i: usize, j: usize| -> f64 {
                let mut vals = vec![0.0; n];
                rule.points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&s, &w)| {
                        // Hypotenuse from (1,0) to (0,1).
                        el.eval_values([1.0 - s, s], &mut vals);
                        w * vals[i] * vals[j]
                    })
                    .sum()
            };
            for i in 0..n {
                for j in 0..n {
                    assert!((trace(&rule, i, j) - trace(&fine, i, j)).abs() < 1e-13);
                }
            }
        }
    }
}
