//! Reference Lagrangians and default evaluation points.

use num_complex::Complex64;

use crate::expr::Signomial;

fn mono(dim: usize, coef: f64, exps: &[(usize, f64)]) -> Signomial {
    let mut e = vec![0.0; dim];
    for &(i, p) in exps {
        e[i] = p;
    }
    Signomial::monomial(Complex64::new(coef, 0.0), &e).expect("finite exponents")
}

/// `Σ_i (y^i)²`.
pub fn lagrangian_y2(n: usize) -> Signomial {
    (0..n).fold(Signomial::zero(2 * n), |acc, i| acc.add(&mono(2 * n, 1.0, &[(n + i, 2.0)])))
}

/// `Σ_i (x^i)² (y^i)²`.
pub fn lagrangian_x2y2(n: usize) -> Signomial {
    (0..n).fold(Signomial::zero(2 * n), |acc, i| {
        acc.add(&mono(2 * n, 1.0, &[(i, 2.0), (n + i, 2.0)]))
    })
}

/// `Σ_i (x^{i+1})⁴ (y^i)²` with cyclic index shift; couples the position
/// variables for n ≥ 2 and has curved horizontal metric there.
pub fn lagrangian_coupled(n: usize) -> Signomial {
    (0..n).fold(Signomial::zero(2 * n), |acc, i| {
        acc.add(&mono(2 * n, 1.0, &[((i + 1) % n, 4.0), (n + i, 2.0)]))
    })
}

/// `(y^1)^4 + Σ_{i≥2} (y^i)²`: no x-dependence, nonzero torsion.
pub fn lagrangian_y4(n: usize) -> Signomial {
    let mut l = mono(2 * n, 1.0, &[(n, 4.0)]);
    for i in 1..n {
        l = l.add(&mono(2 * n, 1.0, &[(n + i, 2.0)]));
    }
    l
}

/// Five fixed points in the positive orthant of `R^{2n}`.
pub fn default_sample_points(n: usize) -> Vec<Vec<f64>> {
    const BASE: [[f64; 2]; 5] = [[1.0, 1.0], [0.5, 2.0], [2.0, 0.7], [1.3, 1.7], [0.8, 0.6]];
    BASE.iter()
        .enumerate()
        .map(|(k, &[x, y])| {
            let mut p = vec![0.0; 2 * n];
            for i in 0..n {
                // small per-coordinate shift keeps the points generic
                let s = 1.0 + 0.1 * ((i + k) % 3) as f64;
                p[i] = x * s;
                p[n + i] = y / s;
            }
            p
        })
        .collect()
}
