//! Closed-form fields for the manufactured-solution study on `(-1, 1)^2`.
//!
//! Stream function `phi = sin(pi x) sin(pi y) / pi` with viscosity
//! `mu = 1 + sin^2(pi x) sin^2(pi y)`, giving the velocity
//! `u = (sin(pi x) cos(pi y), -cos(pi x) sin(pi y))`. The forcing is the
//! momentum balance `f = -div(2 mu eps(u))` with zero pressure; any gradient
//! component of `f` is invisible to the divergence-free weak form, so this
//! choice is immaterial. The closed forms below were derived symbolically
//! offline; a finite-difference cross-check lives in the tests.

use std::f64::consts::PI;

pub fn stream(x: [f64; 2]) -> f64 {
    (PI * x[0]).sin() * (PI * x[1]).sin() / PI
}

pub fn velocity(x: [f64; 2]) -> [f64; 2] {
    [(PI * x[0]).sin() * (PI * x[1]).cos(), -(PI * x[0]).cos() * (PI * x[1]).sin()]
}

pub fn velocity_gradient(x: [f64; 2]) -> [[f64; 2]; 2] {
    let (sx, cx) = (PI * x[0]).sin_cos();
    let (sy, cy) = (PI * x[1]).sin_cos();
    [[PI * cx * cy, -PI * sx * sy], [PI * sx * sy, -PI * cx * cy]]
}

pub fn viscosity(x: [f64; 2]) -> f64 {
    let sx = (PI * x[0]).sin();
    let sy = (PI * x[1]).sin();
    1.0 + sx * sx * sy * sy
}

/// Body force `-div(2 mu eps(u))` of the exact fields.
pub fn forcing(x: [f64; 2]) -> [f64; 2] {
    let (sx, cx) = (PI * x[0]).sin_cos();
    let (sy, cy) = (PI * x[1]).sin_cos();
    let sx2 = sx * sx;
    let sy2 = sy * sy;
    let two_pi2 = 2.0 * PI * PI;
    [
        two_pi2 * (3.0 * sx2 * sy2 - 2.0 * sy2 + 1.0) * sx * cy,
        two_pi2 * (-3.0 * sx2 * sy2 + 2.0 * sx2 - 1.0) * sy * cx,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_vanishes_on_boundary_and_velocity_matches_curl() {
        for &x in &[[-1.0, 0.3], [1.0, -0.7], [0.2, 1.0], [0.9, -1.0]] {
            assert!(stream(x).abs() < 1e-15);
        }
        // u = (d phi/dy, -d phi/dx) by central differences.
        let h = 1e-6;
        for &x in &[[0.31, 0.57], [-0.42, 0.11], [0.83, -0.66]] {
            let dy = (stream([x[0], x[1] + h]) - stream([x[0], x[1] - h])) / (2.0 * h);
            let dx = (stream([x[0] + h, x[1]]) - stream([x[0] - h, x[1]])) / (2.0 * h);
            let u = velocity(x);
            assert!((u[0] - dy).abs() < 1e-8);
            assert!((u[1] + dx).abs() < 1e-8);
        }
    }

    #[test]
    fn forcing_frozen_values() {
        // Reference values computed with extended-precision symbolic
        // evaluation of -div(2 mu eps(u)).
        let cases = [
            ([0.3, 0.7], [-9.1624675997869751, -9.1624675997869769]),
            ([-0.45, 0.12], [-20.403256548244073, 0.63026895012142947]),
            ([0.9, -0.9], [-4.8519729446816759, -4.8519729446816759]),
        ];
        for (x, expect) in cases {
            let f = forcing(x);
            for c in 0..2 {
                assert!(
                    (f[c] - expect[c]).abs() <= 1e-12 * expect[c].abs().max(1.0),
                    "f({x:?})[{c}] = {}, expected {}",
                    f[c],
                    expect[c]
                );
            }
        }
    }

    #[test]
    fn forcing_matches_finite_difference_divergence() {
        // sigma = 2 mu eps(u) from the closed-form u and mu; f = -div sigma
        // by central differences with step 1e-5, agreement 1e-6 relative.
        let sigma = |x: [f64; 2]| -> [[f64; 2]; 2] {
            let g = velocity_gradient(x);
            let m = viscosity(x);
            [
                [2.0 * m * g[0][0], m * (g[0][1] + g[1][0])],
                [m * (g[0][1] + g[1][0]), 2.0 * m * g[1][1]],
            ]
        };
        let h = 1e-5;
        let pts = [[0.3, 0.7], [-0.45, 0.12], [0.9, -0.9], [0.05, -0.33], [0.5, 0.5]];
        for x in pts {
            let dxx = |f: &dyn Fn([f64; 2]) -> f64| (f([x[0] + h, x[1]]) - f([x[0] - h, x[1]])) / (2.0 * h);
            let dyy = |f: &dyn Fn([f64; 2]) -> f64| (f([x[0], x[1] + h]) - f([x[0], x[1] - h])) / (2.0 * h);
            let fd = [
                -(dxx(&|p| sigma(p)[0][0]) + dyy(&|p| sigma(p)[0][1])),
                -(dxx(&|p| sigma(p)[1][0]) + dyy(&|p| sigma(p)[1][1])),
            ];
            let f = forcing(x);
            for c in 0..2 {
                let scale = f[c].abs().max(1.0);
                assert!((f[c] - fd[c]).abs() <= 1e-6 * scale, "at {x:?}: {} vs {}", f[c], fd[c]);
            }
        }
    }

    #[test]
    fn velocity_has_zero_normal_component_on_boundary() {
        for t in 0..=20 {
            let s = -1.0 + 0.1 * t as f64;
            assert!(velocity([1.0, s])[0].abs() < 1e-14);
            assert!(velocity([-1.0, s])[0].abs() < 1e-14);
            assert!(velocity([s, 1.0])[1].abs() < 1e-14);
            assert!(velocity([s, -1.0])[1].abs() < 1e-14);
        }
    }
}
