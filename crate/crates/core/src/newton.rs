//! Damped Gauss-Newton iteration for square and overdetermined systems.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::linalg::{lstsq, norm, RANK_TOL};

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    /// Stop once the residual norm drops below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-10, max_iter: 50 }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `|r(x)|` from `x0` with backtracking on the Gauss-Newton step.
///
/// `system` returns the residual and its Jacobian, or an error when `x` has left
/// the admissible region; such trial points are treated as infinitely bad.
pub fn solve<S>(system: S, x0: &[f64], opts: NewtonOptions) -> Option<NewtonOutcome>
where
    S: Fn(&[f64]) -> Result<(Vec<f64>, DMatrix<f64>)>,
{
    let (mut r, mut j) = system(x0).ok()?;
    let mut x = x0.to_vec();
    let mut rn = norm(&r);
    let mut iterations = 0;
    // Past the tolerance, keep stepping while the iterate still moves: at
    // degenerate roots convergence is only linear and the residual reaches the
    // tolerance long before the point does.
    while iterations < opts.max_iter {
        iterations += 1;
        let rhs = DVector::from_iterator(r.len(), r.iter().map(|v| -v));
        let step = lstsq(&j, &rhs, RANK_TOL);
        if step.iter().any(|v| !v.is_finite()) {
            break;
        }
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + scale * d).collect();
            if let Ok((tr, tj)) = system(&trial) {
                let tn = norm(&tr);
                if tn.is_finite() && tn < rn {
                    accepted = Some((trial, tr, tj, tn));
                    break;
                }
            }
            scale *= 0.5;
        }
        let Some((nx, nr, nj, nn)) = accepted else {
            break;
        };
        let moved = step.norm() * scale;
        x = nx;
        r = nr;
        j = nj;
        rn = nn;
        if rn < opts.tol && moved <= 1e-13 * (1.0 + norm(&x)) {
            break;
        }
    }
    Some(NewtonOutcome {
        x,
        residual: rn,
        iterations,
        converged: rn < opts.tol,
    })
}
