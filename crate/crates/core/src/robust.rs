//! Uncertain-but-bounded perturbations `A[η] = A + D[η]`, `η ∈ 𝒰`: scenario
//! bounds, robust norms of matrices with structured norm-bounded uncertainty,
//! robust bounds for linear forms over spectratopes, and the UBB flavors of
//! the polyhedral analysis/synthesis.

use crate::conic::encode::{support_epigraph, xnorm_bound_epigraph, weighted_matrix_sum};
use crate::conic::{ConicProgram, LinExpr, MatExpr, SolveSettings, SymMatVar};
use crate::error::{Error, Result};
use crate::geometry::linalg::{mat_from_rows, mat_to_rows, numerical_rank, symmetrize};
use crate::geometry::{Ellitope, ErrorNorm, SpectraBlock, Spectratope};
use crate::linear::UncertaintyModel;
use crate::polyhedral::{
    chi, ContrastMatrix, PolyBallSynthesis,
};
use crate::stochastics::stream_rng;
use crate::{Mat, Vec64};
use rand::prelude::*;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// `ϑ(k)`: 0, 1, π/2, 1.7348, 2 for k ≤ 4 and the bound `π√k/2` beyond;
/// enters tightness factors only, never the bounds themselves.
pub fn theta_factor(k: usize) -> f64 {
    const TABLE: [f64; 5] = [0.0, 1.0, std::f64::consts::FRAC_PI_2, 1.7348, 2.0];
    if k <= 4 {
        TABLE[k]
    } else {
        std::f64::consts::PI * (k as f64).sqrt() / 2.0
    }
}

/// `ϰ(J) = 1` for `J = 1`, else `2.5 √(ln 2J)`.
pub fn varkappa_factor(j: usize) -> f64 {
    if j <= 1 {
        1.0
    } else {
        2.5 * (2.0 * j as f64).ln().sqrt()
    }
}

/// `ς̄(J) = √(2 ln 5J)`.
pub fn sigma_bar_factor(j: usize) -> f64 {
    (2.0 * (5.0 * j as f64).ln()).sqrt()
}

/// `ς(J) = 2 √(2 ln 2J)`.
pub fn sigma_factor(j: usize) -> f64 {
    2.0 * (2.0 * (2.0 * j as f64).ln()).sqrt()
}

/// One general perturbation block `L_tᵀ Δ_t R_t` with `‖Δ_t‖_{2,2} ≤ 1`.
#[derive(Clone, Debug)]
pub struct GeneralBlock {
    pub left: Mat,
    pub right: Mat,
}

/// Structured norm-bounded uncertainty
/// `D[η] = Σ_s δ_s A_s + Σ_t L_tᵀ Δ_t R_t`, `|δ_s| ≤ 1`, `‖Δ_t‖_{2,2} ≤ 1`.
#[derive(Clone, Debug, Default)]
pub struct StructuredUncertainty {
    pub scalar_blocks: Vec<Mat>,
    pub general_blocks: Vec<GeneralBlock>,
}

impl StructuredUncertainty {
    pub fn validate_dims(&self, m: usize, n: usize) -> Result<()> {
        for (s, a) in self.scalar_blocks.iter().enumerate() {
            if a.nrows() != m || a.ncols() != n {
                return Err(Error::dim(
                    "scalar block",
                    format!("{m}x{n}"),
                    format!("{}x{} (s = {s})", a.nrows(), a.ncols()),
                ));
            }
        }
        for (t, g) in self.general_blocks.iter().enumerate() {
            if g.left.ncols() != m || g.right.ncols() != n {
                return Err(Error::dim(
                    "general block",
                    format!("L: ?x{m}, R: ?x{n}"),
                    format!(
                        "L: {}x{}, R: {}x{} (t = {t})",
                        g.left.nrows(),
                        g.left.ncols(),
                        g.right.nrows(),
                        g.right.ncols()
                    ),
                ));
            }
            if g.left.norm() == 0.0 {
                return Err(Error::Geometry(format!("general block {t} has zero L")));
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.scalar_blocks.is_empty() && self.general_blocks.is_empty()
    }

    /// `κ = max_s rank(A_s)` (0 without scalar blocks), rank thresholded at
    /// `1e-9 σ_max`.
    pub fn kappa_rank(&self) -> usize {
        self.scalar_blocks
            .iter()
            .map(numerical_rank)
            .max()
            .unwrap_or(0)
    }

    /// Realize `D[η]` for given scalar values and general-block matrices.
    pub fn realize(&self, deltas: &[f64], big: &[Mat]) -> Result<Mat> {
        if deltas.len() != self.scalar_blocks.len() || big.len() != self.general_blocks.len() {
            return Err(Error::dim(
                "realize uncertainty",
                format!("{}+{}", self.scalar_blocks.len(), self.general_blocks.len()),
                format!("{}+{}", deltas.len(), big.len()),
            ));
        }
        let (m, n) = self.shape().ok_or_else(|| Error::Geometry("empty uncertainty".into()))?;
        let mut d = Mat::zeros(m, n);
        for (s, a) in self.scalar_blocks.iter().enumerate() {
            d += a * deltas[s];
        }
        for (t, g) in self.general_blocks.iter().enumerate() {
            d += g.left.transpose() * &big[t] * &g.right;
        }
        Ok(d)
    }

    pub fn shape(&self) -> Option<(usize, usize)> {
        if let Some(a) = self.scalar_blocks.first() {
            return Some((a.nrows(), a.ncols()));
        }
        self.general_blocks
            .first()
            .map(|g| (g.left.ncols(), g.right.ncols()))
    }
}

#[derive(Serialize, Deserialize)]
struct UncDto {
    scalar_blocks: Vec<Vec<Vec<f64>>>,
    general_blocks: Vec<GeneralDto>,
}

#[derive(Serialize, Deserialize)]
struct GeneralDto {
    #[serde(rename = "L")]
    left: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    right: Vec<Vec<f64>>,
}

impl Serialize for StructuredUncertainty {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        UncDto {
            scalar_blocks: self.scalar_blocks.iter().map(mat_to_rows).collect(),
            general_blocks: self
                .general_blocks
                .iter()
                .map(|g| GeneralDto {
                    left: mat_to_rows(&g.left),
                    right: mat_to_rows(&g.right),
                })
                .collect(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for StructuredUncertainty {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let dto = UncDto::deserialize(de)?;
        let scalar_blocks = dto
            .scalar_blocks
            .iter()
            .map(|rows| mat_from_rows(rows))
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        let general_blocks = dto
            .general_blocks
            .iter()
            .map(|g| {
                Ok(GeneralBlock {
                    left: mat_from_rows(&g.left)?,
                    right: mat_from_rows(&g.right)?,
                })
            })
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        Ok(StructuredUncertainty {
            scalar_blocks,
            general_blocks,
        })
    }
}

/// Observation data for the uncertain-but-bounded setting.
#[derive(Clone, Debug)]
pub struct UbbModel {
    pub a: Mat,
    pub b: Mat,
    pub sigma: f64,
    pub uncertainty: StructuredUncertainty,
}

/// The (X,2) operator-norm bound `Opt[Q] = min{λ + φ_𝒯(μ) : LMI}` for a fixed
/// matrix acting on the ambient space of `X` (the image map is folded in).
pub fn xnorm_opt(q: &Mat, x: &Ellitope, settings: &SolveSettings) -> Result<f64> {
    let folded = x.fold_map(q)?;
    if folded.norm() == 0.0 {
        return Ok(0.0);
    }
    let basic = x.basic_part();
    let mut prog = ConicProgram::new();
    let bound = xnorm_bound_epigraph(&mut prog, &MatExpr::from_const(&folded), &basic)?;
    prog.minimize(bound.total);
    Ok(prog.solve_optimal(settings)?.objective)
}

/// Scenario uncertainty: `𝒰 = Conv{η¹,...,η^S}` with `D[η] = Σ_α η_α A_α`.
/// Returns `max_{s,ℓ} Opt[R_ℓ^{1/2}HᵀD[η^s]]`, exact when X is an ellipsoid.
pub fn scenario_bound(
    h: &Mat,
    scenarios: &[Vec64],
    a_perturb: &[Mat],
    x: &Ellitope,
    norm: &ErrorNorm,
    settings: &SolveSettings,
) -> Result<f64> {
    let mut best = 0.0f64;
    for eta in scenarios {
        if eta.len() != a_perturb.len() {
            return Err(Error::dim("scenario", a_perturb.len(), eta.len()));
        }
        let mut d = Mat::zeros(h.nrows(), x.ambient_dim());
        for (alpha, pa) in a_perturb.iter().enumerate() {
            d += pa * eta[alpha];
        }
        for r_sqrt in norm.sqrts() {
            let q = r_sqrt * h.transpose() * &d;
            best = best.max(xnorm_opt(&q, x, settings)?);
        }
    }
    Ok(best)
}

struct RobustNormVars {
    /// `½(φ_𝒮(μ) + φ_𝒯(υ))` at the current multipliers.
    objective: LinExpr,
}

/// Core of the ellitopic robust-norm program: the image-side set is given by
/// its quadratic matrices `s_mats` over `ℝ^M` plus a base set, which covers
/// both the general `ℬ_* = Q𝒵` case and the Euclidean-ball specialization.
fn robust_norm_core(
    prog: &mut ConicProgram,
    scalar_maps: &[MatExpr],  // QᵀA_sP, M×N (affine in H when synthesizing)
    general_left: &[MatExpr], // L_t Q mapped to M side: p_t×M
    general_right: &[Mat],    // R_t P: q_t×N
    image_tks: &[Mat],
    image_base: &crate::geometry::BaseSet,
    signal: &Ellitope, // basic, over ℝ^N
) -> Result<RobustNormVars> {
    let m_dim = image_tks[0].nrows();
    let n_dim = signal.latent_dim();
    let mut u_sum = MatExpr::zeros(m_dim, m_dim);
    let mut v_sum = MatExpr::zeros(n_dim, n_dim);
    for map in scalar_maps {
        let us = prog.sym_var(m_dim);
        let vs = prog.sym_var(n_dim);
        let off = map.scaled(-1.0);
        prog.build_lmi_block([[&us.as_expr(), &off], [&off.transpose(), &vs.as_expr()]])?;
        u_sum = u_sum.add(&us.as_expr());
        v_sum = v_sum.add(&vs.as_expr());
    }
    for (lq, rp) in general_left.iter().zip(general_right.iter()) {
        let p_t = lq.nrows();
        let ut = prog.sym_var(m_dim);
        let lam_t = prog.nonneg_scalar();
        let off = lq.transpose().scaled(-1.0);
        let corner = MatExpr::scaled_identity(&lam_t, p_t);
        prog.build_lmi_block([[&ut.as_expr(), &off], [&off.transpose(), &corner]])?;
        // V^t = λ_t PᵀR_tᵀR_tP is optimal; substitute it directly
        let rr = rp.transpose() * rp;
        let mut vt = MatExpr::zeros(n_dim, n_dim);
        for j in 0..n_dim {
            for i in 0..n_dim {
                if rr[(i, j)] != 0.0 {
                    *vt.entry_mut(i, j) = lam_t.scaled(rr[(i, j)]);
                }
            }
        }
        u_sum = u_sum.add(&ut.as_expr());
        v_sum = v_sum.add(&vt);
    }
    let mu = prog.nonneg_scalars(image_tks.len());
    let upsilon = prog.nonneg_scalars(signal.k());
    let lhs_u = weighted_matrix_sum(image_tks, &mu).add(&u_sum.scaled(-1.0));
    prog.psd(&lhs_u)?;
    let lhs_v = weighted_matrix_sum(signal.tks(), &upsilon).add(&v_sum.scaled(-1.0));
    prog.psd(&lhs_v)?;
    let phi_mu = support_epigraph(prog, image_base, &mu)?;
    let phi_up = support_epigraph(prog, signal.base(), &upsilon)?;
    Ok(RobustNormVars {
        objective: (phi_mu + phi_up).scaled(0.5),
    })
}

/// Robust norm of an uncertain matrix over ellitopes: an upper bound on
/// `max_{D∈𝒰} max_{x∈X} ‖Dx‖_ℬ` with `ℬ` the polar of `ℬ_* = Q𝒵`, within
/// the factor `ϰ(K)ϰ(L)·max[ϑ(2κ), π/2]`.
pub fn robust_norm_bound(
    unc: &StructuredUncertainty,
    x: &Ellitope,
    bstar: &Ellitope,
    settings: &SolveSettings,
) -> Result<(f64, f64)> {
    let kappa = unc.kappa_rank();
    let factor = varkappa_factor(x.k())
        * varkappa_factor(bstar.k())
        * theta_factor(2 * kappa).max(std::f64::consts::FRAC_PI_2);
    if unc.is_empty() {
        return Ok((0.0, factor));
    }
    let (m, n) = unc.shape().expect("nonempty");
    if x.ambient_dim() != n || bstar.ambient_dim() != m {
        return Err(Error::dim(
            "robust_norm_bound",
            format!("X in R^{n}, B* in R^{m}"),
            format!("X in R^{}, B* in R^{}", x.ambient_dim(), bstar.ambient_dim()),
        ));
    }
    let p = x.p_map().cloned().unwrap_or_else(|| Mat::identity(n, n));
    let q = bstar
        .p_map()
        .cloned()
        .unwrap_or_else(|| Mat::identity(m, m));
    let mut prog = ConicProgram::new();
    let scalar_maps: Vec<MatExpr> = unc
        .scalar_blocks
        .iter()
        .map(|a| MatExpr::from_const(&(q.transpose() * a * &p)))
        .collect();
    let general_left: Vec<MatExpr> = unc
        .general_blocks
        .iter()
        .map(|g| MatExpr::from_const(&(&g.left * &q)))
        .collect();
    let general_right: Vec<Mat> = unc.general_blocks.iter().map(|g| &g.right * &p).collect();
    let core = robust_norm_core(
        &mut prog,
        &scalar_maps,
        &general_left,
        &general_right,
        bstar.tks(),
        bstar.base(),
        &x.basic_part(),
    )?;
    prog.minimize(core.objective);
    Ok((prog.solve_optimal(settings)?.objective, factor))
}

/// Sampling lower bound on the robust norm: maximize
/// `Σ_s |zᵀQᵀA_sPy| + Σ_t ‖L_tQz‖‖R_tPy‖` over gauge-normalized `(z, y)`.
pub fn robust_norm_oracle(
    unc: &StructuredUncertainty,
    x: &Ellitope,
    bstar: &Ellitope,
    budget: usize,
) -> Result<f64> {
    if unc.is_empty() {
        return Ok(0.0);
    }
    let (m, n) = unc.shape().expect("nonempty");
    let p = x.p_map().cloned().unwrap_or_else(|| Mat::identity(n, n));
    let q = bstar
        .p_map()
        .cloned()
        .unwrap_or_else(|| Mat::identity(m, m));
    let xb = x.basic_part();
    let zb = bstar.basic_part();
    let scalar_maps: Vec<Mat> = unc
        .scalar_blocks
        .iter()
        .map(|a| q.transpose() * a * &p)
        .collect();
    let lefts: Vec<Mat> = unc.general_blocks.iter().map(|g| &g.left * &q).collect();
    let rights: Vec<Mat> = unc.general_blocks.iter().map(|g| &g.right * &p).collect();
    let value = |z: &Vec64, y: &Vec64| -> f64 {
        let mut v = 0.0;
        for map in &scalar_maps {
            v += (z.transpose() * map * y)[(0, 0)].abs();
        }
        for (l, r) in lefts.iter().zip(rights.iter()) {
            v += (l * z).norm() * (r * y).norm();
        }
        v
    };
    let best = (0..budget.max(1))
        .into_par_iter()
        .map(|idx| {
            let mut rng = stream_rng(0x51ab_33c7_0e19_4d88, idx as u64);
            let mut draw = |dim: usize| {
                Vec64::from_iterator(dim, (0..dim).map(|_| {
                    let u: f64 = rng.random();
                    2.0 * u - 1.0
                }))
            };
            let (mut z, mut y) = (draw(zb.latent_dim()), draw(xb.latent_dim()));
            let gz = zb.gauge(&z).unwrap_or(f64::INFINITY);
            let gy = xb.gauge(&y).unwrap_or(f64::INFINITY);
            if !(gz > 0.0 && gz.is_finite() && gy > 0.0 && gy.is_finite()) {
                return 0.0;
            }
            z /= gz;
            y /= gy;
            let mut val = value(&z, &y);
            let mut step = 0.5;
            for _ in 0..120 {
                if step < 1e-10 {
                    break;
                }
                // subgradient in (z, y)
                let mut gz_dir = Vec64::zeros(z.len());
                let mut gy_dir = Vec64::zeros(y.len());
                for map in &scalar_maps {
                    let s = (z.transpose() * map * &y)[(0, 0)].signum();
                    gz_dir += map * &y * s;
                    gy_dir += map.transpose() * &z * s;
                }
                for (l, r) in lefts.iter().zip(rights.iter()) {
                    let lz = l * &z;
                    let ry = r * &y;
                    if lz.norm() > 1e-12 {
                        gz_dir += l.transpose() * &lz * (ry.norm() / lz.norm());
                    }
                    if ry.norm() > 1e-12 {
                        gy_dir += r.transpose() * &ry * (lz.norm() / ry.norm());
                    }
                }
                let zc = &z + &gz_dir * step;
                let yc = &y + &gy_dir * step;
                let (gz2, gy2) = (
                    zb.gauge(&zc).unwrap_or(f64::INFINITY),
                    xb.gauge(&yc).unwrap_or(f64::INFINITY),
                );
                if !(gz2 > 0.0 && gz2.is_finite() && gy2 > 0.0 && gy2.is_finite()) {
                    step *= 0.5;
                    continue;
                }
                let zc = zc / gz2;
                let yc = yc / gy2;
                let cand = value(&zc, &yc);
                if cand > val + 1e-15 {
                    z = zc;
                    y = yc;
                    val = cand;
                    step *= 1.5;
                } else {
                    step *= 0.5;
                }
            }
            val
        })
        .reduce(|| 0.0f64, f64::max);
    Ok(best)
}

fn snb_component(
    prog: &mut ConicProgram,
    h_expr: &MatExpr,
    unc: &StructuredUncertainty,
    x: &Ellitope,
    r_sqrt: &Mat,
) -> Result<LinExpr> {
    let nu = r_sqrt.nrows();
    let n = x.ambient_dim();
    let n_lat = x.latent_dim();
    let p = x.p_map().cloned().unwrap_or_else(|| Mat::identity(n, n));
    let rh = h_expr.transpose().left_mul(r_sqrt); // ν×m affine
    let mut u_sum = MatExpr::zeros(nu, nu);
    let mut v_sum = MatExpr::zeros(n_lat, n_lat);
    for a_s in &unc.scalar_blocks {
        // A_{sl}[H]·P = R^{1/2}HᵀA_s P
        let map = rh.right_mul(&(a_s * &p));
        let us = prog.sym_var(nu);
        let vs = prog.sym_var(n_lat);
        let off = map.scaled(-1.0);
        prog.build_lmi_block([[&us.as_expr(), &off], [&off.transpose(), &vs.as_expr()]])?;
        u_sum = u_sum.add(&us.as_expr());
        v_sum = v_sum.add(&vs.as_expr());
    }
    for g in &unc.general_blocks {
        // L_{tl}[H] = L_t H R^{1/2} : p_t×ν
        let p_t = g.left.nrows();
        let ltl = h_expr.left_mul(&g.left).right_mul(r_sqrt);
        let ut = prog.sym_var(nu);
        let lam_t = prog.nonneg_scalar();
        let off = ltl.transpose().scaled(-1.0);
        let corner = MatExpr::scaled_identity(&lam_t, p_t);
        prog.build_lmi_block([[&ut.as_expr(), &off], [&off.transpose(), &corner]])?;
        let rr = (&g.right * &p).transpose() * (&g.right * &p);
        let mut vt = MatExpr::zeros(n_lat, n_lat);
        for jj in 0..n_lat {
            for ii in 0..n_lat {
                if rr[(ii, jj)] != 0.0 {
                    *vt.entry_mut(ii, jj) = lam_t.scaled(rr[(ii, jj)]);
                }
            }
        }
        u_sum = u_sum.add(&ut.as_expr());
        v_sum = v_sum.add(&vt);
    }
    let mu = prog.nonneg_scalar();
    let upsilon = prog.nonneg_scalars(x.k());
    let lhs_u = MatExpr::scaled_identity(&mu, nu).add(&u_sum.scaled(-1.0));
    prog.psd(&lhs_u)?;
    let lhs_v = weighted_matrix_sum(x.tks(), &upsilon).add(&v_sum.scaled(-1.0));
    prog.psd(&lhs_v)?;
    let phi = support_epigraph(prog, x.base(), &upsilon)?;
    Ok((mu + phi).scaled(0.5))
}

/// Upper bound on `𝔰(H) = max_{x∈X, η∈𝒰} ‖HᵀD[η]x‖` for structured
/// norm-bounded uncertainty, within `ϰ(K)·max[ϑ(2κ), π/2]`.
pub fn snb_bound(
    h: &Mat,
    unc: &StructuredUncertainty,
    x: &Ellitope,
    norm: &ErrorNorm,
    settings: &SolveSettings,
) -> Result<f64> {
    if unc.is_empty() || h.norm() == 0.0 {
        return Ok(0.0);
    }
    let mut best = 0.0f64;
    for r_sqrt in norm.sqrts() {
        let mut prog = ConicProgram::new();
        let h_expr = MatExpr::from_const(h);
        let obj = snb_component(&mut prog, &h_expr, unc, x, r_sqrt)?;
        prog.minimize(obj);
        best = best.max(prog.solve_optimal(settings)?.objective);
    }
    Ok(best)
}

/// Decomposed certificate returned by the UBB linear synthesis.
#[derive(Clone, Debug)]
pub struct UbbLinearBound {
    pub total: f64,
    pub noise: f64,
    pub uncertainty: f64,
    pub bias: f64,
}

/// Synthesis of a linear estimate under structured norm-bounded uncertainty:
/// minimizes the sum of the sub-Gaussian noise term
/// `[1+√(2 ln(L/ε))]·σ·max_ℓ‖HR_ℓ^{1/2}‖_Fro`, the robust uncertainty bound,
/// and the bias bound, jointly over the contrast and all multipliers.
pub fn synthesize_linear_ubb(
    model: &UbbModel,
    x: &Ellitope,
    norm: &ErrorNorm,
    eps: f64,
    settings: &SolveSettings,
) -> Result<(Mat, UbbLinearBound)> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("eps must be in (0,1), got {eps}")));
    }
    let (m, n) = (model.a.nrows(), model.a.ncols());
    let nu = model.b.nrows();
    model.uncertainty.validate_dims(m, n).or_else(|e| {
        if model.uncertainty.is_empty() {
            Ok(())
        } else {
            Err(e)
        }
    })?;
    if x.ambient_dim() != n {
        return Err(Error::dim("signal set", n, x.ambient_dim()));
    }
    let coeff = 1.0 + (2.0 * (norm.l() as f64 / eps).ln()).sqrt();
    let p = x.p_map().cloned().unwrap_or_else(|| Mat::identity(n, n));

    let mut prog = ConicProgram::new();
    let h_expr = prog.mat_var(m, nu);
    let t_unc = prog.nonneg_scalar();
    let t_bias = prog.nonneg_scalar();
    for r_sqrt in norm.sqrts() {
        if !model.uncertainty.is_empty() {
            let comp = snb_component(&mut prog, &h_expr, &model.uncertainty, x, r_sqrt)?;
            prog.le(comp, t_unc.clone());
        }
        // bias: Opt[R^{1/2}(B − HᵀA)P] over the latent ellitope
        let rb = r_sqrt * &model.b * &p;
        let rha = h_expr
            .transpose()
            .left_mul(r_sqrt)
            .right_mul(&(&model.a * &p));
        let off = MatExpr::from_const(&rb).add(&rha.scaled(-1.0));
        let bias = xnorm_bound_epigraph(&mut prog, &off, &x.basic_part())?;
        prog.le(bias.total, t_bias.clone());
    }
    let mut objective = t_unc.clone() + t_bias.clone();
    let mut fro_expr = None;
    if model.sigma > 0.0 {
        let fro = prog.nonneg_scalar();
        for r_sqrt in norm.sqrts() {
            let hr = h_expr.right_mul(r_sqrt);
            let mut body = Vec::with_capacity(m * nu);
            for j in 0..hr.ncols() {
                for i in 0..hr.nrows() {
                    body.push(hr.entry(i, j).clone());
                }
            }
            prog.soc(fro.clone(), &body);
        }
        objective += fro.scaled(coeff * model.sigma);
        fro_expr = Some(fro);
    }
    prog.minimize(objective);
    let sol = prog.solve_optimal(settings)?;
    let h_opt = sol.matrix(&h_expr);
    let noise = fro_expr
        .map(|f| coeff * model.sigma * sol.value(&f))
        .unwrap_or(0.0);
    Ok((
        h_opt,
        UbbLinearBound {
            total: sol.objective,
            noise,
            uncertainty: sol.value(&t_unc),
            bias: sol.value(&t_bias),
        },
    ))
}

/// `[Tr(V S^{i}S^{j})]_{i,j}` as a matrix expression in a symmetric matrix
/// variable `V`, for one spectratope block.
fn trace_quad_matrix(var: &SymMatVar, block: &SpectraBlock) -> MatExpr {
    let n = block.coord_mats().len();
    let mut out = MatExpr::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let prod = symmetrize(&(&block.coord_mats()[i] * &block.coord_mats()[j]));
            let e = var.trace_product(&prod);
            *out.entry_mut(i, j) = e.clone();
            if i != j {
                *out.entry_mut(j, i) = e;
            }
        }
    }
    out
}

fn spectra_multiplier(
    prog: &mut ConicProgram,
    set: &Spectratope,
) -> (Vec<SymMatVar>, Vec<LinExpr>, MatExpr) {
    let n = set.latent_dim();
    let mut vars = Vec::with_capacity(set.blocks().len());
    let mut traces = Vec::with_capacity(set.blocks().len());
    let mut total = MatExpr::zeros(n, n);
    for block in set.blocks() {
        let v = prog.psd_var(block.dim());
        total = total.add(&trace_quad_matrix(&v, block));
        traces.push(v.trace());
        vars.push(v);
    }
    (vars, traces, total)
}

/// Robust bound on a linear form's uncertainty term:
/// `r̄_b(h) ≥ max_{x∈X, η∈𝒰} ηᵀ𝒜[h]x` for spectratopes `𝒰 = Q𝒱`, `X = P𝒴`,
/// within the factor `ς̄(Σ_k f_k)·ς̄(Σ_ℓ d_ℓ)`.
pub fn linform_bound(
    h: &Vec64,
    a_perturb: &[Mat],
    u: &Spectratope,
    x: &Spectratope,
    settings: &SolveSettings,
) -> Result<(f64, f64)> {
    let factor = sigma_bar_factor(x.spectra_dim()) * sigma_bar_factor(u.spectra_dim());
    if a_perturb.is_empty() || h.norm() == 0.0 {
        return Ok((0.0, factor));
    }
    let q_count = a_perturb.len();
    let n = a_perturb[0].ncols();
    if u.ambient_dim() != q_count {
        return Err(Error::dim("uncertainty set", q_count, u.ambient_dim()));
    }
    if x.ambient_dim() != n {
        return Err(Error::dim("signal set", n, x.ambient_dim()));
    }
    let mut sens = Mat::zeros(q_count, n);
    for (alpha, pa) in a_perturb.iter().enumerate() {
        sens.set_row(alpha, &(pa.transpose() * h).transpose());
    }
    let qm = u
        .p_map()
        .cloned()
        .unwrap_or_else(|| Mat::identity(q_count, q_count));
    let pm = x.p_map().cloned().unwrap_or_else(|| Mat::identity(n, n));
    let map = qm.transpose() * &sens * &pm; // M_u × N
    if map.norm() == 0.0 {
        return Ok((0.0, factor));
    }
    let mut prog = ConicProgram::new();
    let (_, u_traces, u_total) = spectra_multiplier(&mut prog, u);
    let (_, x_traces, x_total) = spectra_multiplier(&mut prog, x);
    let off = MatExpr::from_const(&map);
    prog.build_lmi_block([[&u_total, &off], [&off.transpose(), &x_total]])?;
    let phi_u = support_epigraph(&mut prog, u.base(), &u_traces)?;
    let phi_x = support_epigraph(&mut prog, x.base(), &x_traces)?;
    prog.minimize((phi_u + phi_x).scaled(0.5));
    Ok((prog.solve_optimal(settings)?.objective, factor))
}

/// Spectratopic robust norm: like [`robust_norm_bound`] with matrix
/// multipliers for both sides; factor `ς(Σf_k)·ς(Σd_ℓ)·max[ϑ(2κ), π/2]`.
pub fn robust_norm_bound_spectr(
    unc: &StructuredUncertainty,
    x: &Spectratope,
    bstar: &Spectratope,
    settings: &SolveSettings,
) -> Result<(f64, f64)> {
    let kappa = unc.kappa_rank();
    let factor = sigma_factor(x.spectra_dim())
        * sigma_factor(bstar.spectra_dim())
        * theta_factor(2 * kappa).max(std::f64::consts::FRAC_PI_2);
    if unc.is_empty() {
        return Ok((0.0, factor));
    }
    let (m, n) = unc.shape().expect("nonempty");
    if x.ambient_dim() != n || bstar.ambient_dim() != m {
        return Err(Error::dim(
            "robust_norm_bound_spectr",
            format!("X in R^{n}, B* in R^{m}"),
            format!("X in R^{}, B* in R^{}", x.ambient_dim(), bstar.ambient_dim()),
        ));
    }
    let p = x
        .p_map()
        .cloned()
        .unwrap_or_else(|| Mat::identity(n, n));
    let q = bstar
        .p_map()
        .cloned()
        .unwrap_or_else(|| Mat::identity(m, m));
    let m_dim = bstar.latent_dim();
    let n_dim = x.latent_dim();

    let mut prog = ConicProgram::new();
    let mut u_sum = MatExpr::zeros(m_dim, m_dim);
    let mut v_sum = MatExpr::zeros(n_dim, n_dim);
    for a_s in &unc.scalar_blocks {
        let map = q.transpose() * a_s * &p;
        let us = prog.sym_var(m_dim);
        let vs = prog.sym_var(n_dim);
        let off = MatExpr::from_const(&(-&map));
        prog.build_lmi_block([[&us.as_expr(), &off], [&off.transpose(), &vs.as_expr()]])?;
        u_sum = u_sum.add(&us.as_expr());
        v_sum = v_sum.add(&vs.as_expr());
    }
    for g in &unc.general_blocks {
        let lq = &g.left * &q;
        let p_t = lq.nrows();
        let ut = prog.sym_var(m_dim);
        let lam_t = prog.nonneg_scalar();
        let off = MatExpr::from_const(&(-lq.transpose()));
        let corner = MatExpr::scaled_identity(&lam_t, p_t);
        prog.build_lmi_block([[&ut.as_expr(), &off], [&off.transpose(), &corner]])?;
        let rr = (&g.right * &p).transpose() * (&g.right * &p);
        let mut vt = MatExpr::zeros(n_dim, n_dim);
        for jj in 0..n_dim {
            for ii in 0..n_dim {
                if rr[(ii, jj)] != 0.0 {
                    *vt.entry_mut(ii, jj) = lam_t.scaled(rr[(ii, jj)]);
                }
            }
        }
        u_sum = u_sum.add(&ut.as_expr());
        v_sum = v_sum.add(&vt);
    }
    let (_, b_traces, b_total) = spectra_multiplier(&mut prog, bstar);
    let (_, x_traces, x_total) = spectra_multiplier(&mut prog, x);
    prog.psd(&b_total.add(&u_sum.scaled(-1.0)))?;
    prog.psd(&x_total.add(&v_sum.scaled(-1.0)))?;
    let phi_b = support_epigraph(&mut prog, bstar.base(), &b_traces)?;
    let phi_x = support_epigraph(&mut prog, x.base(), &x_traces)?;
    prog.minimize((phi_b + phi_x).scaled(0.5));
    Ok((prog.solve_optimal(settings)?.objective, factor))
}

/// Spectratopic polyhedral analysis under uncertain-but-bounded perturbations:
/// `𝔭₊[H] = 2 min ρ` over `(λ_ℓ, Υ^ℓ, υ^ℓ)`, after verifying every column
/// against `‖h‖₂ ≤ [σχ(δ)]^{-1}` and `r̄_b(h) ≤ 1/2` with `δ = ε/(ML)`.
#[allow(clippy::too_many_arguments)]
pub fn risk_bound_poly_ubb(
    h: &ContrastMatrix,
    a: &Mat,
    b: &Mat,
    sigma: f64,
    a_perturb: &[Mat],
    u: &Spectratope,
    x: &Spectratope,
    norm: &ErrorNorm,
    eps: f64,
    settings: &SolveSettings,
) -> Result<f64> {
    if h.blocks.len() != norm.l() {
        return Err(Error::dim("contrast blocks", norm.l(), h.blocks.len()));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("eps must be in (0,1), got {eps}")));
    }
    let m_cols = h.total_columns();
    let delta = eps / m_cols.max(1) as f64;
    let radius_cap = if sigma > 0.0 {
        1.0 / (sigma * chi(delta)?)
    } else {
        f64::INFINITY
    };
    for (j, col) in h.columns().enumerate() {
        if col.norm() > radius_cap * (1.0 + 1e-8) {
            return Err(Error::InadmissibleColumn {
                column: j,
                reason: format!("norm {:.4e} above cap {:.4e}", col.norm(), radius_cap),
            });
        }
        let (rb, _) = linform_bound(&col, a_perturb, u, x, settings)?;
        if rb > 0.5 + 1e-8 {
            return Err(Error::InadmissibleColumn {
                column: j,
                reason: format!("linear-form bound {rb:.4e} above 1/2"),
            });
        }
    }

    let nu = b.nrows();
    let n = a.ncols();
    let pm = x.p_map().cloned().unwrap_or_else(|| Mat::identity(n, n));
    let n_lat = x.latent_dim();
    let mut prog = ConicProgram::new();
    let rho = prog.nonneg_scalar();
    for (l, r_sqrt) in norm.sqrts().iter().enumerate() {
        let block = &h.blocks[l];
        let lam = prog.scalar();
        let upsilon = prog.nonneg_scalars(block.ncols());
        let (_, traces, total) = spectra_multiplier(&mut prog, x);
        let mut bottom = total;
        for j in 0..block.ncols() {
            let w = pm.transpose() * a.transpose() * block.column(j);
            let outer = &w * w.transpose();
            for c in 0..n_lat {
                for r in 0..n_lat {
                    if outer[(r, c)] != 0.0 {
                        *bottom.entry_mut(r, c) += upsilon[j].scaled(outer[(r, c)]);
                    }
                }
            }
        }
        let off = MatExpr::from_const(&(r_sqrt * b * &pm * 0.5));
        let top_left = MatExpr::scaled_identity(&lam, nu);
        prog.build_lmi_block([[&top_left, &off], [&off.transpose(), &bottom]])?;
        let phi = support_epigraph(&mut prog, x.base(), &traces)?;
        prog.le(lam + phi + LinExpr::sum(upsilon.iter()), rho.clone());
    }
    prog.minimize(rho);
    Ok(2.0 * prog.solve_optimal(settings)?.objective)
}

/// Ball-case UBB polyhedral synthesis: the random-perturbation program with
/// the uncertainty block constant χ(δ) replaced by 2 (the set (equivto));
/// extraction and decomposition reuse the same machinery through the
/// returned admissible-set description.
pub fn synthesize_poly_ubb_ball(
    model: &UncertaintyModel,
    norm: &ErrorNorm,
    eps: f64,
    settings: &SolveSettings,
) -> Result<PolyBallSynthesis> {
    let delta = eps / (norm.l() * model.m()) as f64;
    let c = chi(delta)?;
    crate::polyhedral::synthesize_poly_ball_with_constants(model, norm, delta, c, 2.0, settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn st() -> SolveSettings {
        SolveSettings::default()
    }

    #[test]
    fn factor_tables() {
        assert_eq!(theta_factor(0), 0.0);
        assert_eq!(theta_factor(1), 1.0);
        assert_abs_diff_eq!(theta_factor(2), std::f64::consts::FRAC_PI_2);
        assert_abs_diff_eq!(theta_factor(3), 1.7348);
        assert_eq!(theta_factor(4), 2.0);
        for k in 1..=12 {
            assert!(theta_factor(k) <= std::f64::consts::PI * (k as f64).sqrt() / 2.0 + 1e-12);
            if k > 1 {
                assert!(theta_factor(k) >= theta_factor(k - 1) - 1e-12);
            }
        }
        assert_eq!(varkappa_factor(1), 1.0);
        assert!(varkappa_factor(2) >= 1.0);
        assert!(sigma_bar_factor(1) >= 1.0);
        assert!(sigma_factor(1) >= 1.0);
    }

    #[test]
    fn empty_uncertainty_is_zero() {
        let unc = StructuredUncertainty::default();
        let ball2 = Ellitope::unit_ball(2);
        let (opt, _) = robust_norm_bound(&unc, &ball2, &ball2, &st()).unwrap();
        assert_eq!(opt, 0.0);
        assert_eq!(robust_norm_oracle(&unc, &ball2, &ball2, 10).unwrap(), 0.0);
    }

    #[test]
    fn identity_general_block_between_balls() {
        let n = 3;
        let unc = StructuredUncertainty {
            scalar_blocks: vec![],
            general_blocks: vec![GeneralBlock {
                left: Mat::identity(n, n),
                right: Mat::identity(n, n),
            }],
        };
        let ball = Ellitope::unit_ball(n);
        let (opt, factor) = robust_norm_bound(&unc, &ball, &ball, &st()).unwrap();
        // true norm is 1; bound within π/2
        assert!(opt >= 1.0 - 1e-6, "opt {opt}");
        assert!(opt <= std::f64::consts::FRAC_PI_2 * (1.0 + 1e-6), "opt {opt}");
        assert_abs_diff_eq!(factor, std::f64::consts::FRAC_PI_2, epsilon = 1e-12);
        let oracle = robust_norm_oracle(&unc, &ball, &ball, 100).unwrap();
        assert!(oracle >= 1.0 - 1e-3);
        assert!(opt >= oracle - 1e-6);
    }

    #[test]
    fn identity_scalar_block_between_balls() {
        let unc = StructuredUncertainty {
            scalar_blocks: vec![Mat::identity(2, 2)],
            general_blocks: vec![],
        };
        let ball = Ellitope::unit_ball(2);
        let (opt, _) = robust_norm_bound(&unc, &ball, &ball, &st()).unwrap();
        assert!(opt >= 1.0 - 1e-6);
        assert!(opt <= theta_factor(4) * (1.0 + 1e-6), "opt {opt}");
        let oracle = robust_norm_oracle(&unc, &ball, &ball, 100).unwrap();
        assert!(oracle >= 1.0 - 1e-3);
    }

    #[test]
    fn oracle_scaling_is_linear() {
        let unc = StructuredUncertainty {
            scalar_blocks: vec![Mat::identity(2, 2) * 2.0],
            general_blocks: vec![],
        };
        let base = StructuredUncertainty {
            scalar_blocks: vec![Mat::identity(2, 2)],
            general_blocks: vec![],
        };
        let ball = Ellitope::unit_ball(2);
        let a = robust_norm_oracle(&unc, &ball, &ball, 60).unwrap();
        let b = robust_norm_oracle(&base, &ball, &ball, 60).unwrap();
        assert_abs_diff_eq!(a, 2.0 * b, epsilon = 1e-6);
    }

    #[test]
    fn scenario_bound_svd_exact_on_ball() {
        let m = 3;
        let h = Mat::identity(m, m);
        let a1 = Mat::from_row_slice(3, 3, &[0.5, 0.1, 0.0, 0.0, 0.2, 0.0, 0.3, 0.0, 0.7]);
        let ball = Ellitope::unit_ball(m);
        let norm = ErrorNorm::euclidean(m);
        let eta = Vec64::from_column_slice(&[1.0]);
        let bound =
            scenario_bound(&h, &[eta], std::slice::from_ref(&a1), &ball, &norm, &st()).unwrap();
        let svd = crate::geometry::linalg::spectral_norm(&a1);
        assert_abs_diff_eq!(bound, svd, epsilon = 1e-6);
        // zero scenario
        let z = Vec64::from_column_slice(&[0.0]);
        let b0 = scenario_bound(&h, &[z], std::slice::from_ref(&a1), &ball, &norm, &st()).unwrap();
        assert_eq!(b0, 0.0);
        // dominated scenario leaves the max unchanged
        let both = vec![
            Vec64::from_column_slice(&[1.0]),
            Vec64::from_column_slice(&[0.5]),
        ];
        let b2 = scenario_bound(&h, &both, std::slice::from_ref(&a1), &ball, &norm, &st()).unwrap();
        assert_abs_diff_eq!(b2, bound, epsilon = 1e-9);
    }

    #[test]
    fn snb_agrees_with_robust_norm_on_induced_matrix() {
        // L = 1, R = I, H fixed: s(H) is the robust norm of {HᵀD[η]} from X
        // to the Euclidean ball
        let n = 3;
        let h = Mat::from_row_slice(3, 3, &[1.0, 0.0, 0.2, 0.0, 0.8, 0.0, 0.1, 0.0, 1.0]);
        let a1 = Mat::from_row_slice(3, 3, &[0.4, 0.0, 0.1, 0.2, 0.5, 0.0, 0.0, 0.0, 0.3]);
        let unc = StructuredUncertainty {
            scalar_blocks: vec![a1.clone()],
            general_blocks: vec![],
        };
        let ball = Ellitope::unit_ball(n);
        let norm = ErrorNorm::euclidean(n);
        let snb = snb_bound(&h, &unc, &ball, &norm, &st()).unwrap();
        let induced = StructuredUncertainty {
            scalar_blocks: vec![h.transpose() * &a1],
            general_blocks: vec![],
        };
        let (rn, _) = robust_norm_bound(&induced, &ball, &ball, &st()).unwrap();
        assert_abs_diff_eq!(snb, rn, epsilon = 1e-6);
        assert_eq!(snb_bound(&Mat::zeros(3, 3), &unc, &ball, &norm, &st()).unwrap(), 0.0);
    }

    #[test]
    fn ubb_synthesis_clean_inversion() {
        let model = UbbModel {
            a: Mat::identity(3, 3),
            b: Mat::identity(3, 3),
            sigma: 0.0,
            uncertainty: StructuredUncertainty::default(),
        };
        let ball = Ellitope::unit_ball(3);
        let norm = ErrorNorm::euclidean(3);
        let (h, bound) = synthesize_linear_ubb(&model, &ball, &norm, 0.05, &st()).unwrap();
        assert!(bound.total <= 1e-6, "total {}", bound.total);
        assert_abs_diff_eq!((h - Mat::identity(3, 3)).norm(), 0.0, epsilon = 1e-4);
    }

    #[test]
    fn ubb_synthesis_terms_recompute() {
        let a1 = Mat::from_row_slice(2, 2, &[0.3, 0.0, 0.0, 0.2]);
        let model = UbbModel {
            a: Mat::identity(2, 2),
            b: Mat::identity(2, 2),
            sigma: 0.05,
            uncertainty: StructuredUncertainty {
                scalar_blocks: vec![a1],
                general_blocks: vec![],
            },
        };
        let ball = Ellitope::unit_ball(2);
        let norm = ErrorNorm::euclidean(2);
        let eps = 0.05;
        let (h, bound) = synthesize_linear_ubb(&model, &ball, &norm, eps, &st()).unwrap();
        let coeff = 1.0 + (2.0 * (1.0f64 / eps).ln()).sqrt();
        let noise = coeff * model.sigma * (&h * &norm.sqrts()[0]).norm();
        let unc_term = snb_bound(&h, &model.uncertainty, &ball, &norm, &st()).unwrap();
        let bias = xnorm_opt(&(&norm.sqrts()[0] * (&model.b - h.transpose() * &model.a)), &ball, &st()).unwrap();
        let total = noise + unc_term + bias;
        let rel = (total - bound.total).abs() / bound.total.max(1.0);
        assert!(rel <= 1e-5, "separate {total}, joint {} (rel {rel:.2e})", bound.total);
    }

    #[test]
    fn linform_zero_cases_and_alignment() {
        let u = Spectratope::unit_ball(2);
        let x = Spectratope::unit_ball(3);
        let zero = vec![Mat::zeros(3, 3); 2];
        let h = Vec64::from_column_slice(&[1.0, 0.0, 0.0]);
        let (v, _) = linform_bound(&h, &zero, &u, &x, &st()).unwrap();
        assert_eq!(v, 0.0);
        let a1 = Mat::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let a2 = Mat::zeros(3, 3);
        let (v0, _) = linform_bound(&Vec64::zeros(3), &[a1.clone(), a2.clone()], &u, &x, &st()).unwrap();
        assert_eq!(v0, 0.0);
        // single active perturbation between unit balls: the true value is
        // max_{|η|≤..} ηᵀ A[h] x = ‖A[h]‖_{2,2}
        let (v1, factor) = linform_bound(&h, &[a1.clone(), a2], &u, &x, &st()).unwrap();
        let truth = (a1.transpose() * &h).norm();
        assert!(v1 >= truth - 1e-6, "bound {v1} below truth {truth}");
        assert!(v1 <= factor * truth + 1e-6, "bound {v1} above factor x truth");
    }

    #[test]
    fn spectr_robust_norm_reduces_to_ellitopic_on_1x1_blocks() {
        // box-shaped sets expressed both ways
        let n = 2;
        let ell = Ellitope::unit_box(n);
        let spect = Spectratope::from_rank1_ellitope(&ell).unwrap();
        let unc = StructuredUncertainty {
            scalar_blocks: vec![Mat::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.4])],
            general_blocks: vec![],
        };
        let (a, _) = robust_norm_bound(&unc, &ell, &ell, &st()).unwrap();
        let (b, _) = robust_norm_bound_spectr(&unc, &spect, &spect, &st()).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-6);
    }

    #[test]
    fn poly_ubb_bias_only_matches_random_case() {
        // H = 0, B = I, ball spectratopes, R = I: the bound is 2
        let n = 3;
        let x = Spectratope::unit_ball(n);
        let u = Spectratope::unit_ball(1);
        let norm = ErrorNorm::euclidean(n);
        let h = ContrastMatrix::new(vec![Mat::zeros(n, 2)], 0.01);
        let bound = risk_bound_poly_ubb(
            &h,
            &Mat::identity(n, n),
            &Mat::identity(n, n),
            0.5,
            &[Mat::zeros(n, n)],
            &u,
            &x,
            &norm,
            0.05,
            &st(),
        )
        .unwrap();
        assert_abs_diff_eq!(bound, 2.0, epsilon = 1e-5);
        let zero = risk_bound_poly_ubb(
            &h,
            &Mat::identity(n, n),
            &Mat::zeros(n, n),
            0.5,
            &[Mat::zeros(n, n)],
            &u,
            &x,
            &norm,
            0.05,
            &st(),
        )
        .unwrap();
        assert_abs_diff_eq!(zero, 0.0, epsilon = 1e-6);
    }

    #[test]
    fn structured_uncertainty_serde() {
        let unc = StructuredUncertainty {
            scalar_blocks: vec![Mat::identity(2, 2)],
            general_blocks: vec![GeneralBlock {
                left: Mat::identity(2, 2),
                right: Mat::from_row_slice(1, 2, &[1.0, 0.0]),
            }],
        };
        let text = serde_json::to_string(&unc).unwrap();
        assert!(text.contains("\"L\""));
        let back: StructuredUncertainty = serde_json::from_str(&text).unwrap();
        assert_eq!(back.scalar_blocks[0], unc.scalar_blocks[0]);
        assert_eq!(back.general_blocks[0].right, unc.general_blocks[0].right);
    }

    #[test]
    fn ubb_ball_synthesis_smoke() {
        use crate::stochastics::NoiseLaw;
        let m = 3;
        let model = UncertaintyModel::new(
            Mat::identity(m, m),
            vec![Mat::identity(m, m) * 0.1],
            Mat::identity(m, m),
            0.1,
            NoiseLaw::Gaussian,
            NoiseLaw::Gaussian,
        )
        .unwrap();
        let norm = ErrorNorm::euclidean(m);
        let s = synthesize_poly_ubb_ball(&model, &norm, 0.05, &st()).unwrap();
        assert!(s.opt > 0.0);
        assert!(s.risk_bound >= 2.0 * s.opt);
        // q = 0 reduces to the random-case program with the chi block absent
        let model0 = UncertaintyModel::new(
            Mat::identity(m, m),
            vec![],
            Mat::identity(m, m),
            0.1,
            NoiseLaw::Gaussian,
            NoiseLaw::Gaussian,
        )
        .unwrap();
        let s_ubb = synthesize_poly_ubb_ball(&model0, &norm, 0.05, &st()).unwrap();
        let s_rand = crate::polyhedral::synthesize_poly_ball(&model0, &norm, 0.05, &st()).unwrap();
        assert_abs_diff_eq!(s_ubb.opt, s_rand.opt, epsilon = 1e-7);
    }
}
