//! Entropy-maximising reconstruction of a droplet number density function
//! from its first four size moments.
//!
//! The NDF over droplet surface `S` in [0, 1] is parametrised as
//! `n(S) = exp(-(l0 + l1*sqrt(S) + l2*S + l3*S^(3/2)))`, and the moments of
//! half-integer order `m_j = integral S^(j/2) n(S) dS` (j = 0..3) pin the
//! four coefficients. Substituting `t = sqrt(S)` turns every moment into
//! `2 * integral t^(j+1) exp(-P(t)) dt` over [0, 1] with `P` a cubic in `t`,
//! which a fixed Gauss-Legendre rule evaluates; the Jacobian of the moment
//! map is the (negated) Hankel matrix of the same integrals, so a damped
//! Newton iteration converges in a handful of steps for interior moment
//! vectors.

use std::sync::OnceLock;

use thiserror::Error;

use super::quad::gauss_legendre_unit;

/// Number of quadrature points used for the moment integrals. Polynomials
/// of degree up to 47 times the exponential factor are resolved far below
/// the Newton tolerance.
const QUAD_POINTS: usize = 24;

/// Newton convergence tolerance on the relative moment residual.
const TOLERANCE: f64 = 1e-10;

const MAX_ITERATIONS: u32 = 50;

const MAX_HALVINGS: u32 = 30;

/// Result of a successful reconstruction.
#[derive(Clone, Copy, Debug)]
pub struct NdfFit {
    /// Exponent coefficients `(l0, l1, l2, l3)`.
    pub lambda: [f64; 4],
    /// NDF value at zero size, `exp(-l0)`.
    pub n0: f64,
    /// Moment of order -1/2, `integral S^(-1/2) n(S) dS`.
    pub m_neg_half: f64,
    /// Newton iterations used (0 when the initial guess already fits).
    pub iterations: u32,
}

#[derive(Clone, Debug, Error)]
pub enum NdfError {
    #[error("moment vector not realizable: {0}")]
    NotRealizable(String),

    #[error("moment inversion stalled after {iterations} iterations (relative residual {residual:.3e})")]
    NoConvergence { iterations: u32, residual: f64 },

    #[error("singular Hankel system in moment inversion")]
    Singular,
}

fn quad() -> &'static (Vec<f64>, Vec<f64>) {
    static QUAD: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    QUAD.get_or_init(|| gauss_legendre_unit(QUAD_POINTS))
}

/// Checks strict realizability of `(m0, m1, m2, m3)` for a positive density
/// on [0, 1]: positive moments, strictly decreasing in order, and strict
/// Hankel inequalities. Returns a description of the first violation.
pub fn realizability_violation(m: &[f64]) -> Option<String> {
    for (k, &v) in m.iter().enumerate().take(4) {
        if v.is_nan() || v <= 0.0 {
            return Some(format!("m{k} = {v} is not positive"));
        }
    }
    for k in 0..3 {
        if m[k + 1] >= m[k] {
            return Some(format!(
                "m{} = {} does not decrease from m{} = {}",
                k + 1,
                m[k + 1],
                k,
                m[k]
            ));
        }
    }
    if m[1] * m[1] >= m[0] * m[2] {
        return Some(format!(
            "Hankel bound violated: m1^2 = {} >= m0*m2 = {}",
            m[1] * m[1],
            m[0] * m[2]
        ));
    }
    if m[2] * m[2] >= m[1] * m[3] {
        return Some(format!(
            "Hankel bound violated: m2^2 = {} >= m1*m3 = {}",
            m[2] * m[2],
            m[1] * m[3]
        ));
    }
    None
}

/// Moments `m_0 .. m_{count-1}` of the NDF with exponent coefficients
/// `lambda`, written into `out[..count]`.
pub fn moments_of_lambda(lambda: &[f64; 4], out: &mut [f64]) {
    let (t, w) = quad();
    out.fill(0.0);
    for (&tq, &wq) in t.iter().zip(w) {
        let p = lambda[0] + tq * (lambda[1] + tq * (lambda[2] + tq * lambda[3]));
        let density = (-p).exp();
        // Moment j integrates t^(j+1); start the power ladder at t^1.
        let mut power = tq;
        for slot in out.iter_mut() {
            *slot += wq * power * density;
            power *= tq;
        }
    }
    for slot in out.iter_mut() {
        *slot *= 2.0;
    }
}

/// Reconstructs the NDF whose first four half-integer-order moments are `m`.
pub fn reconstruct_ndf(m: &[f64; 4]) -> Result<NdfFit, NdfError> {
    if let Some(violation) = realizability_violation(m) {
        return Err(NdfError::NotRealizable(violation));
    }

    // With lambda = (-ln m0, 0, 0, 0) the zeroth moment matches exactly; the
    // remaining coefficients start from the flat profile.
    let mut lambda = [-m[0].ln(), 0.0, 0.0, 0.0];
    let mut mu = [0.0; 7];
    moments_of_lambda(&lambda, &mut mu);
    let mut residual = residual_norm(&mu, m);

    let mut iterations = 0;
    while residual > TOLERANCE {
        if iterations >= MAX_ITERATIONS {
            return Err(NdfError::NoConvergence {
                iterations,
                residual,
            });
        }

        // Newton step: the Hankel matrix H[j][l] = mu_{j+l} solves
        // H * delta = (mu - m).
        let mut h = [[0.0; 4]; 4];
        for (j, row) in h.iter_mut().enumerate() {
            row.copy_from_slice(&mu[j..j + 4]);
        }
        let r = [mu[0] - m[0], mu[1] - m[1], mu[2] - m[2], mu[3] - m[3]];
        let mut delta = solve4(h, r).ok_or(NdfError::Singular)?;

        // Damping: halve the step until the residual actually drops.
        let mut halvings = 0;
        loop {
            let trial = [
                lambda[0] + delta[0],
                lambda[1] + delta[1],
                lambda[2] + delta[2],
                lambda[3] + delta[3],
            ];
            let mut trial_mu = [0.0; 7];
            moments_of_lambda(&trial, &mut trial_mu);
            let trial_residual = residual_norm(&trial_mu, m);
            if trial_residual < residual {
                lambda = trial;
                mu = trial_mu;
                residual = trial_residual;
                break;
            }
            halvings += 1;
            if halvings > MAX_HALVINGS {
                return Err(NdfError::NoConvergence {
                    iterations,
                    residual,
                });
            }
            for d in &mut delta {
                *d *= 0.5;
            }
        }
        iterations += 1;
    }

    Ok(NdfFit {
        lambda,
        n0: (-lambda[0]).exp(),
        m_neg_half: m_neg_half_of_lambda(&lambda),
        iterations,
    })
}

/// Moment of order -1/2 of the NDF with coefficients `lambda`; the
/// substitution `t = sqrt(S)` integrates `2 * exp(-P(t))`.
fn m_neg_half_of_lambda(lambda: &[f64; 4]) -> f64 {
    let (t, w) = quad();
    let mut acc = 0.0;
    for (&tq, &wq) in t.iter().zip(w) {
        let p = lambda[0] + tq * (lambda[1] + tq * (lambda[2] + tq * lambda[3]));
        acc += wq * (-p).exp();
    }
    2.0 * acc
}

fn residual_norm(mu: &[f64; 7], m: &[f64; 4]) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..4 {
        worst = worst.max(((mu[j] - m[j]) / m[j]).abs());
    }
    worst
}

/// Solves the 4x4 system `a * x = b` by Gaussian elimination with partial
/// pivoting. Returns None for a numerically singular matrix.
fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let mut pivot = col;
        for row in col + 1..4 {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let lead = a[col];
        for row in col + 1..4 {
            let f = a[row][col] / lead[col];
            for (entry, l) in a[row].iter_mut().zip(&lead).skip(col) {
                *entry -= f * l;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for col in (0..4).rev() {
        let mut s = b[col];
        for k in col + 1..4 {
            s -= a[col][k] * x[k];
        }
        x[col] = s / a[col][col];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    /// Moments of the flat NDF `n = 1` on [0, 1]: `2/(j+2)`.
    const FLAT: [f64; 4] = [1.0, 2.0 / 3.0, 0.5, 0.4];

    #[test]
    fn flat_profile_is_recovered_without_iterating() {
        let fit = reconstruct_ndf(&FLAT).unwrap();
        assert_eq!(fit.iterations, 0);
        for l in fit.lambda {
            assert!(l.abs() < 1e-12, "lambda = {:?}", fit.lambda);
        }
        assert_relative_eq!(fit.n0, 1.0, max_relative = 1e-12);
        assert_relative_eq!(fit.m_neg_half, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn exponential_profile_round_trips() {
        // n(S) = exp(-sqrt(S)): lambda = (0, 1, 0, 0), and the order -1/2
        // moment is 2*(1 - 1/e).
        let target = [0.0, 1.0, 0.0, 0.0];
        let mut m = [0.0; 4];
        moments_of_lambda(&target, &mut m);
        let fit = reconstruct_ndf(&m).unwrap();
        for (got, want) in fit.lambda.iter().zip(&target) {
            assert!((got - want).abs() < 1e-8, "lambda = {:?}", fit.lambda);
        }
        assert_relative_eq!(fit.n0, 1.0, max_relative = 1e-10);
        assert_relative_eq!(fit.m_neg_half, 1.2642411176571153, max_relative = 1e-10);
        assert!(fit.iterations >= 1);
    }

    #[test]
    fn random_coefficient_vectors_round_trip_through_moments() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let lambda = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            ];
            let mut m = [0.0; 4];
            moments_of_lambda(&lambda, &mut m);
            let fit = reconstruct_ndf(&m).unwrap();
            let mut back = [0.0; 4];
            moments_of_lambda(&fit.lambda, &mut back);
            for j in 0..4 {
                assert_relative_eq!(back[j], m[j], max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn unrealizable_moments_are_rejected_with_a_reason() {
        assert!(realizability_violation(&[0.0, 0.5, 0.4, 0.3]).is_some());
        assert!(realizability_violation(&[1.0, 1.0, 0.5, 0.4]).is_some());
        // Monotone but violating the first Hankel bound.
        let bad = [1.0, 0.9, 0.5, 0.4];
        assert!(realizability_violation(&bad).unwrap().contains("Hankel"));
        assert!(matches!(
            reconstruct_ndf(&bad),
            Err(NdfError::NotRealizable(_))
        ));
        assert!(realizability_violation(&FLAT).is_none());
    }
}
