//! The deconvolution scenario: recovery of the leading entries of a signal
//! observed through a discrete-time convolution with an uncertain kernel.
//!
//! `Āx` is the convolution of `x` with a length-`q` kernel restricted to the
//! horizon `{1..n}`; the perturbation matrices shift energy per kernel tap
//! and are pre-scaled by γ so the Gaussian perturbation keeps a unit
//! sub-Gaussian parameter; the signal set is the ellipsoid
//! `{x : Σ_i i²[Dx]_i² ≤ 1}` with `D` the inverse discrete cosine transform.

use nalgebra::{DMatrix, DVector};
use robinv_core::geometry::{Ellitope, ErrorNorm};
use robinv_core::linear::UncertaintyModel;
use robinv_core::polyhedral::dct_matrix;
use robinv_core::stochastics::NoiseLaw;
use robinv_core::{Error, Result};
use serde::{Deserialize, Serialize};

type Mat = DMatrix<f64>;
type Vec64 = DVector<f64>;

/// Configuration of the deconvolution experiment.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DeconvConfig {
    pub n: usize,
    pub m: usize,
    pub nu: usize,
    /// Convolution kernel taps; `None` uses the built-in default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<Vec<f64>>,
    pub gammas: Vec<f64>,
    pub sigma: f64,
    pub eps: f64,
    pub n_mc: usize,
    pub seed: u64,
    /// Rademacher/DCT extraction trials per contrast block.
    pub trials: usize,
}

impl Default for DeconvConfig {
    fn default() -> Self {
        DeconvConfig {
            n: 32,
            m: 32,
            nu: 16,
            kernel: None,
            gammas: vec![1e-3, 1e-2, 1e-1, 1.0],
            sigma: 1e-4,
            eps: 0.05,
            n_mc: 500,
            seed: 7,
            trials: 20,
        }
    }
}

/// Length-9 truncated Gaussian kernel (half-width 2), normalized to unit sum.
pub fn default_kernel() -> Vec<f64> {
    let raw: Vec<f64> = (0..9)
        .map(|i| (-((i as f64 - 4.0).powi(2)) / (2.0 * 2.0f64.powi(2))).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// The deconvolution model pieces: observation model, signal ellipsoid, and
/// the error norm on the recovered window.
pub struct DeconvModel {
    pub model: UncertaintyModel,
    pub signal_set: Ellitope,
    pub norm: ErrorNorm,
    /// `T_1^{1/2}`: maps signal coordinates to ball coordinates.
    pub to_ball: Mat,
    /// `T_1^{-1/2}`: maps ball coordinates back to signal coordinates.
    pub from_ball: Mat,
}

impl DeconvModel {
    /// The same model expressed over the unit ball (`x = T_1^{-1/2}·x̃`),
    /// which is what the polyhedral synthesis needs.
    pub fn ball_variant(&self) -> Result<(UncertaintyModel, Ellitope)> {
        let n = self.model.n();
        let fold = |m: &Mat| m * &self.from_ball;
        Ok((
            UncertaintyModel::new(
                fold(&self.model.a),
                self.model.a_perturb.iter().map(fold).collect(),
                fold(&self.model.b),
                self.model.sigma,
                self.model.noise_law.clone(),
                self.model.perturbation_law.clone(),
            )?,
            Ellitope::unit_ball(n),
        ))
    }

    /// Signals on the boundary of the ellipsoid: DCT coefficient profiles
    /// normalized to `Σ_i i² c_i² = 1`, then mapped back to signal space.
    pub fn boundary_signals(&self, count: usize) -> Vec<Vec64> {
        let n = self.model.n();
        let o = dct_matrix(n); // x = O c recovers a signal from coefficients
        let profiles: Vec<Vec<f64>> = vec![
            // smooth: geometric decay across frequencies
            (0..n).map(|i| 0.5f64.powi(i as i32)).collect(),
            // mid-band bump
            (0..n)
                .map(|i| (-((i as f64 - n as f64 / 4.0).powi(2)) / 8.0).exp())
                .collect(),
            // slow polynomial decay with alternating signs
            (0..n)
                .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } / (1.0 + i as f64))
                .collect(),
        ];
        profiles
            .into_iter()
            .take(count)
            .map(|w| {
                let scale: f64 = w
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| ((i + 1) as f64 * v).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let c = Vec64::from_iterator(n, w.into_iter().map(|v| v / scale));
                &o * c
            })
            .collect()
    }
}

/// Assemble the deconvolution model for one uncertainty level γ.
pub fn build_deconv_model(
    n: usize,
    m: usize,
    nu: usize,
    kernel: &[f64],
    gamma: f64,
    sigma: f64,
) -> Result<DeconvModel> {
    if n == 0 || m == 0 || nu == 0 || nu > n {
        return Err(Error::Config(format!(
            "bad deconvolution dimensions n={n}, m={m}, nu={nu}"
        )));
    }
    if kernel.is_empty() || kernel.len() > m {
        return Err(Error::Config(format!(
            "kernel length {} must be in 1..={m}",
            kernel.len()
        )));
    }
    if gamma < 0.0 {
        return Err(Error::Config(format!("gamma must be >= 0, got {gamma}")));
    }
    let q = kernel.len();
    // truncated convolution: (Ax)_i = sum_j kernel[i-j] x_j on the horizon
    let a = Mat::from_fn(m, n, |i, j| {
        if i >= j && i - j < q {
            kernel[i - j]
        } else {
            0.0
        }
    });
    // per-tap perturbation directions, pre-scaled by gamma
    let a_perturb: Vec<Mat> = if gamma == 0.0 {
        Vec::new()
    } else {
        (0..q)
            .map(|alpha| {
                Mat::from_fn(m, n, |i, j| {
                    if i >= j && i - j == alpha {
                        gamma
                    } else {
                        0.0
                    }
                })
            })
            .collect()
    };
    let b = Mat::from_fn(nu, n, |i, j| if i == j { 1.0 } else { 0.0 });
    // X = {x : Σ_i i² [Dx]_i² <= 1}, D the inverse DCT
    let d = dct_matrix(n).transpose();
    let weights = Mat::from_diagonal(&Vec64::from_iterator(
        n,
        (0..n).map(|i| ((i + 1) as f64).powi(2)),
    ));
    let t1 = d.transpose() * &weights * &d;
    let signal_set = Ellitope::ellipsoid(t1)?;
    let inv_sqrt = Mat::from_diagonal(&Vec64::from_iterator(
        n,
        (0..n).map(|i| 1.0 / ((i + 1) as f64)),
    ));
    let sqrt_w = Mat::from_diagonal(&Vec64::from_iterator(
        n,
        (0..n).map(|i| (i + 1) as f64),
    ));
    let from_ball = d.transpose() * inv_sqrt * &d;
    let to_ball = d.transpose() * sqrt_w * &d;
    let model = UncertaintyModel::new(
        a,
        a_perturb,
        b,
        sigma,
        NoiseLaw::Gaussian,
        NoiseLaw::Gaussian,
    )?;
    Ok(DeconvModel {
        model,
        signal_set,
        norm: ErrorNorm::euclidean(nu),
        to_ball,
        from_ball,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn impulse_kernel_gives_identity() {
        let dm = build_deconv_model(6, 6, 3, &[1.0], 0.0, 1e-4).unwrap();
        assert_eq!(dm.model.a, Mat::identity(6, 6));
        assert_eq!(dm.model.q(), 0);
    }

    #[test]
    fn default_kernel_length_and_normalization() {
        let k = default_kernel();
        assert_eq!(k.len(), 9);
        let total: f64 = k.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let dm = build_deconv_model(32, 32, 16, &k, 0.01, 1e-4).unwrap();
        assert_eq!(dm.model.q(), 9);
    }

    #[test]
    fn boundary_signals_have_unit_weighted_energy() {
        let dm = build_deconv_model(16, 16, 8, &default_kernel(), 0.01, 1e-4).unwrap();
        for x in dm.boundary_signals(3) {
            let g = dm.signal_set.gauge(&x).unwrap();
            assert!((g - 1.0).abs() <= 1e-9, "gauge {g}");
        }
    }

    #[test]
    fn ball_variant_matches_original_errors() {
        let dm = build_deconv_model(8, 8, 4, &default_kernel()[..5], 0.05, 1e-3).unwrap();
        let (ball_model, ball_set) = dm.ball_variant().unwrap();
        let x = &dm.boundary_signals(1)[0];
        let x_ball = &dm.to_ball * x;
        assert!((ball_set.gauge(&x_ball).unwrap() - 1.0).abs() <= 1e-9);
        // same forward map
        let lhs = &dm.model.a * x;
        let rhs = &ball_model.a * &x_ball;
        assert!((lhs - rhs).norm() <= 1e-10);
    }

    #[test]
    fn config_round_trip_is_identity() {
        let cfg = DeconvConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: DeconvConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
        let text2 = serde_json::to_string(&back).unwrap();
        assert_eq!(text, text2);
    }
}
