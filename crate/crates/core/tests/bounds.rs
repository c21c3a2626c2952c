//! Cross-operation invariants: oracle/bound sandwiches, monotonicity,
//! certificate validity, the √ϰ tightness chain, and worst-case coverage of
//! the uncertain-but-bounded polyhedral estimate.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use robinv_core::conic::SolveSettings;
use robinv_core::geometry::{Ellitope, ErrorNorm};
use robinv_core::linear::{reliable_estimate, risk_bound_linear, synthesize_linear, UncertaintyModel};
use robinv_core::polyhedral::{
    extract_contrasts, p_oracle, recover_poly, risk_bound_poly, synthesize_poly_ball,
};
use robinv_core::robust::{
    robust_norm_bound, snb_bound, synthesize_poly_ubb_ball, GeneralBlock, StructuredUncertainty,
};
use robinv_core::stochastics::{empirical_quantile, monte_carlo_risk, sample, stream_rng, NoiseLaw};

type Mat = DMatrix<f64>;
type Vec64 = DVector<f64>;

fn st() -> SolveSettings {
    SolveSettings::default()
}

fn random_model(seed: u64, m: usize, q: usize, sigma: f64) -> UncertaintyModel {
    let mut rng = stream_rng(seed, 0);
    let a = Mat::from_fn(m, m, |i, j| {
        if i == j { 1.0 } else { 0.2 * (rng.random::<f64>() - 0.5) }
    });
    let a_perturb = (0..q)
        .map(|_| Mat::from_fn(m, m, |_, _| 0.2 * (rng.random::<f64>() - 0.5)))
        .collect();
    let b = Mat::from_fn(m, m, |i, j| if i == j { 1.0 } else { 0.0 });
    UncertaintyModel::new(a, a_perturb, b, sigma, NoiseLaw::Gaussian, NoiseLaw::Gaussian).unwrap()
}

#[test]
fn risk_bound_is_monotone_in_sigma() {
    for seed in 0..4u64 {
        let mut model = random_model(seed, 4, 2, 0.4);
        let x = Ellitope::unit_ball(4);
        let norm = ErrorNorm::euclidean(4);
        let mut rng = stream_rng(77, seed);
        let h = Mat::from_fn(4, 4, |_, _| rng.random::<f64>() - 0.5);
        let hi = risk_bound_linear(&h, &model, &x, &norm, 0.05, &st()).unwrap();
        model.sigma = 0.2;
        let lo = risk_bound_linear(&h, &model, &x, &norm, 0.05, &st()).unwrap();
        assert!(
            lo.bound <= hi.bound + 1e-9,
            "seed {seed}: bound not monotone in sigma ({} vs {})",
            lo.bound,
            hi.bound
        );
    }
}

#[test]
fn certificates_satisfy_their_lmis() {
    for seed in 0..4u64 {
        let model = random_model(seed, 4, 2, 0.3);
        let x = if seed % 2 == 0 {
            Ellitope::unit_ball(4)
        } else {
            Ellitope::unit_box(4)
        };
        let norm = ErrorNorm::euclidean(4);
        let mut rng = stream_rng(78, seed);
        let h = Mat::from_fn(4, 4, |_, _| rng.random::<f64>() - 0.5);
        let cert = risk_bound_linear(&h, &model, &x, &norm, 0.05, &st()).unwrap();
        let violation = cert.violation(&h, &model, &x, &norm).unwrap();
        assert!(
            violation >= -1e-7,
            "seed {seed}: certificate violation {violation}"
        );
        // synthesized certificates validate too
        let (h_opt, cert) = synthesize_linear(&model, &x, &norm, 0.05, &st()).unwrap();
        let violation = cert.violation(&h_opt, &model, &x, &norm).unwrap();
        assert!(violation >= -1e-7, "synthesized violation {violation}");
    }
}

#[test]
fn p_oracle_never_exceeds_analysis_bound() {
    for seed in 0..3u64 {
        let model = random_model(seed + 10, 5, 1, 0.3);
        let norm = ErrorNorm::euclidean(5);
        let synth = synthesize_poly_ball(&model, &norm, 0.05, &st()).unwrap();
        let contrast = extract_contrasts(&synth, 8, seed, &st()).unwrap();
        let ball = Ellitope::unit_ball(5);
        let bound = risk_bound_poly(
            &contrast, &model.b, &model.a, &ball, &norm, &synth.hspec, &st(),
        )
        .unwrap();
        let oracle = p_oracle(&contrast, &model.b, &model.a, &ball, &norm, 150).unwrap();
        assert!(
            oracle <= bound * (1.0 + 1e-6) + 1e-9,
            "seed {seed}: oracle {oracle} above bound {bound}"
        );
    }
}

#[test]
fn sqrt_kappa_tightness_chain() {
    // converting the cone-relaxation optimum into a feasible point of the
    // analysis program multiplies the objective by at most sqrt(kappa)
    let model = random_model(3, 6, 2, 0.25);
    let norm = ErrorNorm::euclidean(6);
    let synth = synthesize_poly_ball(&model, &norm, 0.05, &st()).unwrap();
    let contrast = extract_contrasts(&synth, 12, 5, &st()).unwrap();
    let kappa = synth.varkappa;
    for l in 0..norm.l() {
        let lam_bar = synth.lambda_bars[l].max(1e-300);
        let mu_bar = synth.mu_bars[l];
        let varrho = synth.cone_points[l].varrho;
        let theta = contrast.block_gauges[l];
        let m_cols = contrast.blocks[l].ncols() as f64;
        // per-column weights after scaling the block by 1/theta
        let upsilon_bar_sum = m_cols * theta * theta;
        assert!(
            upsilon_bar_sum <= kappa * varrho * (1.0 + 1e-9) + 1e-12,
            "component {l}: extracted weights {upsilon_bar_sum} above kappa*varrho {}",
            kappa * varrho
        );
        let gamma = ((mu_bar + kappa * varrho) / lam_bar).sqrt();
        let objective = gamma * lam_bar + (mu_bar + upsilon_bar_sum) / gamma;
        assert!(
            objective <= kappa.sqrt() * synth.opt * (1.0 + 1e-7) + 1e-12,
            "component {l}: converted objective {objective} above sqrt(kappa) rho_bar {}",
            kappa.sqrt() * synth.opt
        );
    }
}

#[test]
fn ubb_poly_worst_case_coverage() {
    // adversarial perturbations on the unit sphere plus noise draws stay
    // within the 2 sqrt(kappa) Opt guarantee of the UBB ball synthesis
    let m = 6;
    let mut rng = stream_rng(91, 0);
    let a = Mat::from_fn(m, m, |i, j| {
        if i == j { 1.0 } else { 0.15 * (rng.random::<f64>() - 0.5) }
    });
    let a_perturb: Vec<Mat> = (0..2)
        .map(|_| Mat::from_fn(m, m, |_, _| 0.1 * (rng.random::<f64>() - 0.5)))
        .collect();
    let model = UncertaintyModel::new(
        a,
        a_perturb.clone(),
        Mat::identity(m, m),
        0.05,
        NoiseLaw::Gaussian,
        NoiseLaw::Gaussian,
    )
    .unwrap();
    let norm = ErrorNorm::euclidean(m);
    let eps = 0.05;
    let synth = synthesize_poly_ubb_ball(&model, &norm, eps, &st()).unwrap();
    let contrast = extract_contrasts(&synth, 12, 9, &st()).unwrap();
    let ball = Ellitope::unit_ball(m);
    let settings = st();
    let x = {
        let mut e = Vec64::zeros(m);
        e[0] = 0.8;
        e[1] = -0.6;
        e
    };
    let q = a_perturb.len();
    let draws = 100usize;
    let mut worst_quantile = 0.0f64;
    for adv in 0..50u64 {
        let mut rng = stream_rng(92, adv);
        let mut eta = Vec64::from_iterator(q, (0..q).map(|_| rng.random::<f64>() * 2.0 - 1.0));
        let n2 = eta.norm();
        if n2 > 0.0 {
            eta /= n2; // boundary of the unit ball
        }
        let realized = model.realized(&eta).unwrap();
        let clean = &realized * &x;
        let mut errs: Vec<f64> = (0..draws)
            .map(|d| {
                let mut rng = stream_rng(93, (adv << 32) | d as u64);
                let xi = sample(&NoiseLaw::Gaussian, m, 1, &mut rng) * model.sigma;
                let omega = &clean + xi.column(0);
                let (_, what) =
                    recover_poly(&contrast, &omega, &model.a, &ball, &model.b, &settings).unwrap();
                (what - &x).norm()
            })
            .collect();
        errs.sort_by(|p, q| p.partial_cmp(q).unwrap());
        worst_quantile = worst_quantile.max(empirical_quantile(&errs, eps));
    }
    assert!(
        worst_quantile <= synth.risk_bound,
        "worst-case quantile {worst_quantile} above guarantee {}",
        synth.risk_bound
    );
}

#[test]
fn robust_norm_bound_scales_linearly() {
    let base = StructuredUncertainty {
        scalar_blocks: vec![Mat::from_row_slice(2, 2, &[0.4, 0.1, 0.0, 0.3])],
        general_blocks: vec![GeneralBlock {
            left: Mat::from_row_slice(1, 2, &[0.5, 0.2]),
            right: Mat::from_row_slice(1, 2, &[0.3, -0.4]),
        }],
    };
    let ball = Ellitope::unit_ball(2);
    let (v1, _) = robust_norm_bound(&base, &ball, &ball, &st()).unwrap();
    for c in [0.5f64, 2.0] {
        let scaled = StructuredUncertainty {
            scalar_blocks: base.scalar_blocks.iter().map(|a| a * c).collect(),
            general_blocks: base
                .general_blocks
                .iter()
                .map(|g| GeneralBlock {
                    left: &g.left * c,
                    right: g.right.clone(),
                })
                .collect(),
        };
        let (vc, _) = robust_norm_bound(&scaled, &ball, &ball, &st()).unwrap();
        assert!(
            (vc - c * v1).abs() <= 1e-6 * (1.0 + c * v1),
            "scaling by {c}: {vc} vs {}",
            c * v1
        );
    }
    // the snb route sees the same scaling through the induced matrix
    let norm = ErrorNorm::euclidean(2);
    let h = Mat::identity(2, 2);
    let s1 = snb_bound(&h, &base, &ball, &norm, &st()).unwrap();
    let doubled = StructuredUncertainty {
        scalar_blocks: base.scalar_blocks.iter().map(|a| a * 2.0).collect(),
        general_blocks: base
            .general_blocks
            .iter()
            .map(|g| GeneralBlock {
                left: &g.left * 2.0,
                right: g.right.clone(),
            })
            .collect(),
    };
    let s2 = snb_bound(&h, &doubled, &ball, &norm, &st()).unwrap();
    assert!((s2 - 2.0 * s1).abs() <= 1e-6 * (1.0 + 2.0 * s1));
}

#[test]
fn reliable_estimate_multi_component_feasibility() {
    // two seminorm components; medians close together: intersection holds
    let r1 = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.25]);
    let r2 = Mat::from_row_slice(2, 2, &[0.25, 0.0, 0.0, 1.0]);
    let norm = ErrorNorm::new(vec![r1, r2]).unwrap();
    let blocks = vec![Mat::identity(2, 2), Mat::identity(2, 2)];
    let obs: Vec<Vec64> = (0..9)
        .map(|k| Vec64::from_column_slice(&[1.0 + 0.01 * k as f64, -0.5]))
        .collect();
    let est = reliable_estimate(&blocks, &obs, &[0.5, 0.5], &norm, 0.05, &st()).unwrap();
    assert!(est.feasible);
    assert!((est.w[0] - 1.04).abs() < 0.2);

    // incompatible radii force the empty-intersection fallback to zero
    let far_blocks = vec![Mat::identity(2, 2), -Mat::identity(2, 2)];
    let est = reliable_estimate(&far_blocks, &obs, &[1e-4, 1e-4], &norm, 0.05, &st()).unwrap();
    assert!(!est.feasible);
    assert_eq!(est.w, Vec64::zeros(2));
}

#[test]
fn monte_carlo_rejects_zero_draws_and_is_exact_for_perfect_estimator() {
    let model = random_model(5, 3, 1, 0.1);
    let x = Ellitope::unit_ball(3);
    let norm = ErrorNorm::euclidean(3);
    let sig = vec![{
        let mut e = Vec64::zeros(3);
        e[0] = 0.5;
        e
    }];
    let _ = x;
    let b = model.b.clone();
    let target = &b * &sig[0];
    let err = monte_carlo_risk(
        &|_omega: &Vec64| target.clone(),
        &model,
        &sig,
        &norm,
        0,
        0.05,
        1,
    );
    assert!(err.is_err());
    let mc = monte_carlo_risk(
        &|_omega: &Vec64| target.clone(),
        &model,
        &sig,
        &norm,
        25,
        0.05,
        1,
    )
    .unwrap();
    assert!(mc.samples[0].iter().all(|&e| e == 0.0));
}
