//! Upper bound for maximizing a homogeneous quadratic form over an ellitope:
//! `Opt(C) = min_λ {φ_𝒯(λ) : λ ≥ 0, Σ_k λ_k T_k ⪰ C}`, which dominates the
//! true maximum `Opt_*(C)` within the factor `3 ln(√3 K)`, together with a
//! random-search lower-bound oracle.

use crate::conic::encode::{support_epigraph, weighted_matrix_sum};
use crate::conic::{ConicProgram, SolveSettings};
use crate::error::{Error, Result};
use crate::geometry::linalg::{min_eigenvalue, symmetrize};
use crate::geometry::Ellitope;
use crate::{Mat, Vec64};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

/// Certified upper bound for `max_{x∈X} xᵀCx`.
#[derive(Clone, Debug)]
pub struct QuadBound {
    /// The relaxation value `Opt(C)`.
    pub value: f64,
    /// Optimal multipliers `λ ≥ 0` with `Σ_k λ_k T_k − C ⪰ 0`.
    pub lambda: Vec64,
    /// `3 ln(√3 K)`: the guaranteed tightness factor of the relaxation.
    pub tightness: f64,
}

impl QuadBound {
    /// Smallest eigenvalue of the certificate residual `Σ λ_k T_k − C`;
    /// values above `-1e-7` are accepted from interior-point output.
    pub fn certificate_residual(&self, c: &Mat, set: &Ellitope) -> Result<f64> {
        let s = set.weighted_sum(&self.lambda)?;
        Ok(min_eigenvalue(&(s - symmetrize(c))))
    }
}

/// Tightness factor `3 ln(√3 K)` of the semidefinite relaxation.
pub fn tightness_factor(k: usize) -> f64 {
    3.0 * (3f64.sqrt() * k as f64).ln()
}

/// Solve the relaxation for a basic ellitope. Feasibility is guaranteed by
/// `Σ_k T_k ≻ 0`; solver breakdown is surfaced as an error.
pub fn opt_upper(c: &Mat, set: &Ellitope, settings: &SolveSettings) -> Result<QuadBound> {
    if !set.is_basic() {
        return Err(Error::Domain("opt_upper needs a basic ellitope".into()));
    }
    let n = set.latent_dim();
    if c.nrows() != n || c.ncols() != n {
        return Err(Error::dim(
            "opt_upper",
            format!("{n}x{n}"),
            format!("{}x{}", c.nrows(), c.ncols()),
        ));
    }
    let csym = symmetrize(c);
    let mut prog = ConicProgram::new();
    let lambda = prog.nonneg_scalars(set.k());
    let lhs = weighted_matrix_sum(set.tks(), &lambda).add_const(&(-&csym));
    prog.psd(&lhs)?;
    let phi = support_epigraph(&mut prog, set.base(), &lambda)?;
    prog.minimize(phi);
    let sol = prog.solve_optimal(settings)?;
    Ok(QuadBound {
        value: sol.objective,
        lambda: sol.vector(&lambda).map(|v| v.max(0.0)),
        tightness: tightness_factor(set.k()),
    })
}

/// Certified lower bound on `Opt_*(C)`: projected random search plus local
/// ascent on the gauge sphere from `budget` starts. The returned value is
/// attained at a point with gauge ≤ 1 + 1e-9.
pub fn opt_bruteforce(c: &Mat, set: &Ellitope, budget: usize) -> Result<f64> {
    if !set.is_basic() {
        return Err(Error::Domain("opt_bruteforce needs a basic ellitope".into()));
    }
    let n = set.latent_dim();
    if c.nrows() != n || c.ncols() != n {
        return Err(Error::dim(
            "opt_bruteforce",
            format!("{n}x{n}"),
            format!("{}x{}", c.nrows(), c.ncols()),
        ));
    }
    let csym = symmetrize(c);
    let value = |x: &Vec64| (x.transpose() * &csym * x)[(0, 0)];

    // seed starts: eigenvectors, generalized eigenvectors of (C, Σ_k T_k)
    // (exact maximizer directions when K = 1), coordinate directions, then
    // random
    let eig = csym.clone().symmetric_eigen();
    let mut top = 0usize;
    for i in 0..n {
        if eig.eigenvalues[i] > eig.eigenvalues[top] {
            top = i;
        }
    }
    let mut seeds: Vec<Vec64> = vec![eig.eigenvectors.column(top).into()];
    {
        let mut tsum = Mat::zeros(n, n);
        for t in set.tks() {
            tsum += t;
        }
        let te = tsum.symmetric_eigen();
        let inv_sqrt = &te.eigenvectors
            * Mat::from_diagonal(&te.eigenvalues.map(|v| 1.0 / v.max(1e-300).sqrt()))
            * te.eigenvectors.transpose();
        let whitened = (&inv_sqrt * &csym * &inv_sqrt).symmetric_eigen();
        for i in 0..n {
            seeds.push(&inv_sqrt * Vec64::from(whitened.eigenvectors.column(i)));
        }
    }
    for j in 0..n {
        let mut e = Vec64::zeros(n);
        e[j] = 1.0;
        seeds.push(e.clone());
        seeds.push(-e);
    }
    // sign-pattern corners help box-like ellitopes
    let corners = 1usize << n.min(8);
    for mask in 0..corners.min(budget) {
        let v = Vec64::from_iterator(
            n,
            (0..n).map(|j| if mask >> j & 1 == 1 { 1.0 } else { -1.0 }),
        );
        seeds.push(v);
    }

    let n_random = budget.saturating_sub(seeds.len());
    let best = (0..seeds.len() + n_random)
        .into_par_iter()
        .map(|idx| {
            let start = if idx < seeds.len() {
                seeds[idx].clone()
            } else {
                let mut rng = ChaCha12Rng::seed_from_u64(0x9e3779b97f4a7c15);
                rng.set_stream(idx as u64);
                Vec64::from_iterator(n, (0..n).map(|_| {
                    let u: f64 = rng.random();
                    2.0 * u - 1.0
                }))
            };
            let g0 = match set.gauge(&start) {
                Ok(g) if g > 0.0 => g,
                _ => return 0.0,
            };
            let mut x = start / g0;
            let mut val = value(&x);
            let mut step = 0.5;
            for _ in 0..200 {
                if step < 1e-12 {
                    break;
                }
                let grad = &csym * &x * 2.0;
                let cand = &x + &grad * step;
                let g = match set.gauge(&cand) {
                    Ok(g) if g > 0.0 => g,
                    _ => {
                        step *= 0.5;
                        continue;
                    }
                };
                let cand = cand / g;
                let cval = value(&cand);
                if cval > val + 1e-15 {
                    x = cand;
                    val = cval;
                    step *= 1.5;
                } else {
                    step *= 0.5;
                }
            }
            // certify feasibility exactly by renormalizing
            let g = set.gauge(&x).unwrap_or(f64::INFINITY);
            if g > 1.0 {
                x /= g;
            }
            debug_assert!(set.gauge(&x).unwrap() <= 1.0 + 1e-9);
            value(&x)
        })
        .reduce(|| 0.0f64, f64::max);

    // x = 0 is always feasible
    Ok(best.max(0.0))
}
