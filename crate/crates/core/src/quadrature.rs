//! Quadrature on the reference triangle and the unit edge.
//!
//! Triangle rules are collapsed tensor-product Gauss rules on the square
//! mapped by `(a, b) -> (a (1 - b), b)`; the Jacobian `1 - b` is absorbed
//! into the weights. With `n` points per direction the rule integrates all
//! polynomials of total degree `2n - 2` exactly, so `n` is chosen from the
//! requested degree. Edge rules are plain Gauss-Legendre on `[0, 1]`.

/// Quadrature rule on the reference triangle `{x, y >= 0, x + y <= 1}`.
#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

/// Quadrature rule on the unit edge `[0, 1]`.
#[derive(Clone, Debug)]
pub struct EdgeRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on the
/// Legendre polynomial.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P_{n-1}(x).
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let (pn, pnm1) = if n == 1 { (x, 1.0) } else { (p1, p0) };
            let dp = n as f64 * (x * pn - pnm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let mut p0 = 1.0;
        let mut p1 = x;
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let (pn, pnm1) = if n == 1 { (x, 1.0) } else { (p1, p0) };
        let dp = n as f64 * (x * pn - pnm1) / (x * x - 1.0);
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

impl EdgeRule {
    /// Rule exact for polynomials of degree `degree` on `[0, 1]`.
    pub fn with_degree(degree: usize) -> Self {
        let n = degree / 2 + 1;
        let (xs, ws) = gauss_legendre(n);
        let points = xs.iter().map(|x| 0.5 * (x + 1.0)).collect();
        let weights = ws.iter().map(|w| 0.5 * w).collect();
        EdgeRule { points, weights, degree }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl TriangleRule {
    /// Rule exact for polynomials of total degree `degree` on the triangle.
    pub fn with_degree(degree: usize) -> Self {
        // The collapsed map makes the integrand degree `degree + 1` in the
        // second direction (Jacobian), degree `degree` in the first.
        let na = degree / 2 + 1;
        let nb = (degree + 1) / 2 + 1;
        let (xa, wa) = gauss_legendre(na);
        let (xb, wb) = gauss_legendre(nb);
        let mut points = Vec::with_capacity(na * nb);
        let mut weights = Vec::with_capacity(na * nb);
        for (b, wb) in xb.iter().map(|x| 0.5 * (x + 1.0)).zip(wb.iter().map(|w| 0.5 * w)) {
            for (a, wa) in xa.iter().map(|x| 0.5 * (x + 1.0)).zip(wa.iter().map(|w| 0.5 * w)) {
                points.push([a * (1.0 - b), b]);
                weights.push(wa * wb * (1.0 - b));
            }
        }
        TriangleRule { points, weights, degree }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
