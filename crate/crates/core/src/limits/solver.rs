//! Least squares over the probability simplex.
//!
//! Minimizes `½ xᵀ G x − bᵀ x` subject to `x ≥ 0`, `Σ x = 1`, where `G` is a
//! Gram matrix (symmetric positive semidefinite). Accelerated projected
//! gradient with restart on objective increase.

use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions<F> {
    pub max_iter: usize,
    /// Stop once an iteration improves the objective by less than this.
    pub tol: F,
}

impl<F: Real> Default for SolverOptions<F> {
    fn default() -> Self {
        SolverOptions {
            max_iter: 10_000,
            tol: F::lit(1e-10),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimplexSolution<F> {
    pub x: Vec<F>,
    pub objective: F,
    pub iterations: usize,
    pub converged: bool,
}

/// Euclidean projection onto `{x ≥ 0, Σ x = 1}` (sort and threshold).
pub fn project_simplex<F: Real>(v: &[F]) -> Vec<F> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cum = F::zero();
    let mut theta = F::zero();
    for (i, &ui) in u.iter().enumerate() {
        cum = cum + ui;
        let t = (cum - F::one()) / F::from_usize(i + 1).unwrap();
        if ui - t > F::zero() {
            theta = t;
        }
    }
    v.iter().map(|&vi| (vi - theta).max(F::zero())).collect()
}

pub(crate) fn objective<F: Real>(gram: &[F], lin: &[F], x: &[F]) -> F {
    let k = x.len();
    let mut quad = F::zero();
    for i in 0..k {
        let mut row = F::zero();
        for j in 0..k {
            row = row + gram[i * k + j] * x[j];
        }
        quad = quad + x[i] * row;
    }
    let lin_term = x.iter().zip(lin).fold(F::zero(), |s, (&a, &b)| s + a * b);
    quad / F::lit(2.0) - lin_term
}

fn gradient<F: Real>(gram: &[F], lin: &[F], x: &[F]) -> Vec<F> {
    let k = x.len();
    (0..k)
        .map(|i| {
            let mut g = -lin[i];
            for j in 0..k {
                g = g + gram[i * k + j] * x[j];
            }
            g
        })
        .collect()
}

/// Solve from the given starting point (projected first).
pub fn simplex_least_squares<F: Real>(
    gram: &[F],
    lin: &[F],
    start: &[F],
    opts: SolverOptions<F>,
) -> SimplexSolution<F> {
    let k = lin.len();
    assert_eq!(gram.len(), k * k, "gram matrix shape");
    assert_eq!(start.len(), k, "start vector length");
    // Gershgorin bound on the largest eigenvalue.
    let lip = (0..k)
        .map(|i| (0..k).fold(F::zero(), |s, j| s + gram[i * k + j].abs()))
        .fold(F::zero(), F::max);
    let mut x = project_simplex(start);
    if lip <= F::zero() {
        let objective = objective(gram, lin, &x);
        return SimplexSolution {
            x,
            objective,
            iterations: 0,
            converged: true,
        };
    }
    let step = F::one() / lip;
    let mut y = x.clone();
    let mut t = F::one();
    let mut f = objective(gram, lin, &x);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let g = gradient(gram, lin, &y);
        let trial: Vec<F> = y.iter().zip(&g).map(|(&yi, &gi)| yi - step * gi).collect();
        let x_new = project_simplex(&trial);
        let f_new = objective(gram, lin, &x_new);
        if f_new > f {
            // restart momentum from the last accepted point
            y = x.clone();
            t = F::one();
            if iterations > 1 && (f_new - f) <= opts.tol {
                converged = true;
                break;
            }
            continue;
        }
        let t_new = (F::one() + (F::one() + F::lit(4.0) * t * t).sqrt()) / F::lit(2.0);
        let beta = (t - F::one()) / t_new;
        let moved = x_new
            .iter()
            .zip(&x)
            .fold(F::zero(), |m, (&a, &b)| m.max((a - b).abs()));
        y = x_new
            .iter()
            .zip(&x)
            .map(|(&a, &b)| a + beta * (a - b))
            .collect();
        let improvement = f - f_new;
        x = x_new;
        f = f_new;
        t = t_new;
        if improvement < opts.tol && moved < opts.tol.sqrt() {
            converged = true;
            break;
        }
    }
    SimplexSolution {
        x,
        objective: f,
        iterations,
        converged,
    }
}
