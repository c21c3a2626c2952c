//! Noise and perturbation samplers, concentration-bound utilities, and the
//! Monte Carlo harness used to verify certificates empirically.
//!
//! All sampling is driven by counter-split ChaCha streams: a root seed plus a
//! stream index give an independent generator per worker, so parallel runs
//! are bit-reproducible.

use crate::error::{Error, Result};
use crate::geometry::linalg::max_eigenvalue;
use crate::geometry::ErrorNorm;
use crate::linear::UncertaintyModel;
use crate::{Mat, Vec64};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// A unit-parameter noise law: Gaussian and Rademacher are sub-Gaussian with
/// parameter 1; Student-t (scaled to unit variance) only satisfies the
/// second-moment condition; column-erasure is the two-point perturbation law
/// of the erasure model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseLaw {
    Gaussian,
    Rademacher,
    ColumnErasure { gamma: f64, rho: f64 },
    StudentT { dof: f64 },
}

impl NoiseLaw {
    pub fn student_t_unit_variance(dof: f64) -> Result<Self> {
        if dof <= 2.0 {
            return Err(Error::Domain(
                "student-t law needs dof > 2 for a finite variance".into(),
            ));
        }
        Ok(NoiseLaw::StudentT { dof })
    }

    fn draw(&self, rng: &mut ChaCha12Rng) -> f64 {
        match *self {
            NoiseLaw::Gaussian => StandardNormal.sample(rng),
            NoiseLaw::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            NoiseLaw::ColumnErasure { gamma, rho } => {
                let u: f64 = rng.random();
                if u < gamma {
                    (gamma - 1.0) * rho
                } else {
                    gamma * rho
                }
            }
            NoiseLaw::StudentT { dof } => {
                let t: f64 = StudentT::new(dof).expect("dof > 2").sample(rng);
                t * ((dof - 2.0) / dof).sqrt()
            }
        }
    }
}

/// Independent generator for worker `stream` under root seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draw a `dim × count` matrix of i.i.d. samples. Deterministic under a fixed
/// generator state.
pub fn sample(law: &NoiseLaw, dim: usize, count: usize, rng: &mut ChaCha12Rng) -> Mat {
    Mat::from_fn(dim, count, |_, _| law.draw(rng))
}

/// Tail bound for a Gaussian quadratic form: with ζ ~ N(0, I_d) and `Q ⪰ 0`,
/// `P{ζᵀQζ ≥ Tr(Q) + 2‖Q‖_F √ln(1/ε) + 2 λ_max(Q) ln(1/ε)} ≤ ε`.
pub fn quadform_tail_bound(q: &Mat, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("eps must be in (0,1), got {eps}")));
    }
    if q.nrows() != q.ncols() {
        return Err(Error::dim("quadform_tail_bound", q.nrows(), q.ncols()));
    }
    let log_term = (1.0 / eps).ln();
    Ok(q.trace() + 2.0 * q.norm() * log_term.sqrt() + 2.0 * max_eigenvalue(q).max(0.0) * log_term)
}

/// Uniform bound over a finite family of quadratic forms of a sub-Gaussian
/// vector υ ~ SG(0, V): `P{max_ℓ υᵀW_ℓυ ≥ [1+√(2 ln(L/ε))]² max_ℓ Tr(W_ℓ V)} ≤ ε`.
pub fn maxquad_bound(ws: &[Mat], v: &Mat, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("eps must be in (0,1), got {eps}")));
    }
    if ws.is_empty() {
        return Err(Error::Domain("maxquad_bound needs at least one W_l".into()));
    }
    let l = ws.len() as f64;
    let coeff = (1.0 + (2.0 * (l / eps).ln()).sqrt()).powi(2);
    let mut top = 0.0f64;
    for w in ws {
        if w.nrows() != v.nrows() {
            return Err(Error::dim("maxquad_bound", v.nrows(), w.nrows()));
        }
        top = top.max((w * v).trace());
    }
    Ok(coeff * top)
}

/// `ψ(α, β) = (1−α) ln((1−α)/(1−β)) + α ln(α/β)`, the large-deviation rate
/// behind the geometric-median aggregation constant 0.1070.
pub fn psi(alpha: f64, beta: f64) -> f64 {
    (1.0 - alpha) * ((1.0 - alpha) / (1.0 - beta)).ln() + alpha * (alpha / beta).ln()
}

/// The aggregation rate `ψ(√3/(2+√3), 1/4) = 0.1070...` used by the reliable
/// estimate's repetition count.
pub fn aggregation_rate() -> f64 {
    let alpha = 3f64.sqrt() / (2.0 + 3f64.sqrt());
    psi(alpha, 0.25)
}

#[derive(Clone, Debug)]
pub struct MonteCarloRisk {
    /// Per-signal empirical (1−ε)-quantiles of the recovery error.
    pub quantiles: Vec<f64>,
    /// Per-signal error samples in draw order.
    pub samples: Vec<Vec<f64>>,
}

/// Empirical (1−ε)-quantile as the `⌈(1−ε)n⌉`-th order statistic.
pub fn empirical_quantile(sorted: &[f64], eps: f64) -> f64 {
    let n = sorted.len();
    let idx = ((1.0 - eps) * n as f64).ceil() as usize;
    sorted[idx.clamp(1, n) - 1]
}

/// Draw `n` observations per signal, run the estimator, and record the error
/// `‖ŵ − Bx‖` per draw. Streams are split per (signal, draw), so the result
/// does not depend on the parallel schedule.
pub fn monte_carlo_risk<F>(
    estimator: &F,
    model: &UncertaintyModel,
    signals: &[Vec64],
    norm: &ErrorNorm,
    n: usize,
    eps: f64,
    seed: u64,
) -> Result<MonteCarloRisk>
where
    F: Fn(&Vec64) -> Vec64 + Sync,
{
    monte_carlo_risk_repeated(
        &|obs: &[Vec64]| estimator(&obs[0]),
        model,
        signals,
        norm,
        1,
        n,
        eps,
        seed,
    )
}

/// K-repeated variant: the estimator consumes the whole observation sample.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_risk_repeated<F>(
    estimator: &F,
    model: &UncertaintyModel,
    signals: &[Vec64],
    norm: &ErrorNorm,
    k_rep: usize,
    n: usize,
    eps: f64,
    seed: u64,
) -> Result<MonteCarloRisk>
where
    F: Fn(&[Vec64]) -> Vec64 + Sync,
{
    if n < 1 {
        return Err(Error::Domain("monte carlo needs at least one draw".into()));
    }
    if k_rep < 1 {
        return Err(Error::Domain("repetition count must be >= 1".into()));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("eps must be in (0,1), got {eps}")));
    }
    let mut quantiles = Vec::with_capacity(signals.len());
    let mut samples = Vec::with_capacity(signals.len());
    for (i, x) in signals.iter().enumerate() {
        if x.len() != model.n() {
            return Err(Error::dim("monte carlo signal", model.n(), x.len()));
        }
        let target = &model.b * x;
        let errs: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut rng = stream_rng(seed, ((i as u64) << 32) ^ j as u64);
                let obs: Vec<Vec64> = (0..k_rep).map(|_| model.observe(x, &mut rng)).collect();
                let w = estimator(&obs);
                norm.eval(&(w - &target)).expect("dimension checked")
            })
            .collect();
        let mut sorted = errs.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        quantiles.push(empirical_quantile(&sorted, eps));
        samples.push(errs);
    }
    Ok(MonteCarloRisk { quantiles, samples })
}
