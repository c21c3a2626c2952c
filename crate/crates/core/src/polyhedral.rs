//! Polyhedral estimates `x̂ ∈ Argmin_{u∈X} ‖Hᵀ(Au−ω)‖_∞`: risk analysis for a
//! given contrast, ball-case synthesis through the compatible spectratope
//! cone, randomized contrast extraction along a Rademacher/DCT rotation,
//! recovery programs, and the median-of-means variant for heavy-tailed noise.

use crate::conic::encode::{ellitope_membership, support_epigraph, weighted_matrix_sum};
use crate::conic::{ConicProgram, LinExpr, MatExpr, SolveSettings};
use crate::error::{Error, Result};
use crate::geometry::linalg::{
    mat_from_rows, mat_to_rows, max_eigenvalue, min_eigenvalue, psd_sqrt, symmetrize,
};
use crate::geometry::{arrow, arrow_unit, BaseSet, Ellitope, ErrorNorm, SpectraBlock, Spectratope};
use crate::linear::UncertaintyModel;
use crate::stochastics::stream_rng;
use crate::{Mat, Vec64};
use rand::prelude::*;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// `χ(δ) = 2 √(2 ln(2/δ))`.
pub fn chi(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!(
            "chi needs delta in (0,1), got {delta}"
        )));
    }
    Ok(2.0 * (2.0 * (2.0 / delta).ln()).sqrt())
}

/// Description of the admissible-column set ℋ: `σ·c_norm·‖h‖₂ ≤ 1` and
/// `c_opt·Opt[h] ≤ 1`, with `Opt[h]` the semidefinite bound on
/// `‖𝒜[h]‖_{X,2}`, `𝒜[h] = [hᵀA_1; ...; hᵀA_q]`.
///
/// Three regimes share this shape: the sub-Gaussian single-observation set
/// ℋ_δ (`c_norm = c_opt = χ(δ)`), the second-moment median-of-means set
/// (`c_norm = c_opt = 8`), and the uncertain-but-bounded ball set
/// (`c_norm = χ(δ)`, `c_opt = 2`).
#[derive(Clone, Debug)]
pub struct HSetSpec {
    pub sigma: f64,
    pub delta: Option<f64>,
    pub chi_norm: f64,
    pub chi_opt: f64,
    pub a_perturb: Vec<Mat>,
    pub x: Ellitope,
}

impl HSetSpec {
    /// The sub-Gaussian set ℋ_δ.
    pub fn new(sigma: f64, delta: f64, a_perturb: Vec<Mat>, x: Ellitope) -> Result<Self> {
        let c = chi(delta)?;
        Self::with_constants(sigma, Some(delta), c, c, a_perturb, x)
    }

    /// The moment-condition set with both thresholds 1/8.
    pub fn moment(sigma: f64, a_perturb: Vec<Mat>, x: Ellitope) -> Result<Self> {
        Self::with_constants(sigma, None, 8.0, 8.0, a_perturb, x)
    }

    /// The uncertain-but-bounded ball set: `‖h‖₂ ≤ [σχ(δ)]^{-1}` and
    /// `‖𝒜[h]‖_{2,2} ≤ 1/2`.
    pub fn ubb_ball(sigma: f64, delta: f64, a_perturb: Vec<Mat>, x: Ellitope) -> Result<Self> {
        let c = chi(delta)?;
        Self::with_constants(sigma, Some(delta), c, 2.0, a_perturb, x)
    }

    pub fn with_constants(
        sigma: f64,
        delta: Option<f64>,
        chi_norm: f64,
        chi_opt: f64,
        a_perturb: Vec<Mat>,
        x: Ellitope,
    ) -> Result<Self> {
        if sigma < 0.0 {
            return Err(Error::Domain("sigma must be >= 0".into()));
        }
        if !x.is_basic() {
            return Err(Error::Domain("HSetSpec needs a basic signal set".into()));
        }
        for pa in &a_perturb {
            if pa.ncols() != x.latent_dim() {
                return Err(Error::dim(
                    "HSetSpec perturbation",
                    x.latent_dim(),
                    pa.ncols(),
                ));
            }
        }
        Ok(HSetSpec {
            sigma,
            delta,
            chi_norm,
            chi_opt,
            a_perturb,
            x,
        })
    }

    pub fn q(&self) -> usize {
        self.a_perturb.len()
    }

    pub fn m(&self) -> usize {
        self.a_perturb
            .first()
            .map(|a| a.nrows())
            .unwrap_or_else(|| self.x.latent_dim())
    }

    /// `𝒜[h]`: the q×n matrix with rows `hᵀA_α`.
    pub fn sensitivity(&self, h: &Vec64) -> Mat {
        let n = self.x.latent_dim();
        let mut out = Mat::zeros(self.q(), n);
        for (alpha, pa) in self.a_perturb.iter().enumerate() {
            out.set_row(alpha, &(pa.transpose() * h).transpose());
        }
        out
    }

    /// Whether the signal set is the unit Euclidean ball (the only case with
    /// a spectratopic ℋ and hence with synthesis support).
    pub fn is_ball_case(&self) -> bool {
        self.x.k() == 1
            && (&self.x.tks()[0] - Mat::identity(self.x.latent_dim(), self.x.latent_dim())).norm()
                <= 1e-12
    }
}

/// `Opt[h] = min {λ + φ_𝒯(μ) : μ ≥ 0, [[λI_q, 𝒜[h]/2],[𝒜[h]ᵀ/2, Σμ_kT_k]] ⪰ 0}`,
/// an upper bound on `‖𝒜[h]‖_{X,2}`, exact when X is the unit ball.
pub fn hset_opt(h: &Vec64, spec: &HSetSpec, settings: &SolveSettings) -> Result<f64> {
    if spec.q() == 0 {
        return Ok(0.0);
    }
    let sens = spec.sensitivity(h);
    if sens.norm() == 0.0 {
        return Ok(0.0);
    }
    let mut prog = ConicProgram::new();
    let bound =
        crate::conic::encode::xnorm_bound_epigraph(&mut prog, &MatExpr::from_const(&sens), &spec.x)?;
    prog.minimize(bound.total);
    Ok(prog.solve_optimal(settings)?.objective)
}

/// Membership in ℋ: `‖h‖₂ ≤ (σ·c_norm)^{-1}` and `Opt[h] ≤ c_opt^{-1}`,
/// with the interior-point residual tolerance 1e-7 on both tests.
pub fn hset_member(h: &Vec64, spec: &HSetSpec, settings: &SolveSettings) -> Result<bool> {
    let tol = 1e-7;
    if spec.sigma * spec.chi_norm * h.norm() > 1.0 + tol {
        return Ok(false);
    }
    Ok(spec.chi_opt * hset_opt(h, spec, settings)? <= 1.0 + tol)
}

/// Contrast matrix of a polyhedral estimate: `L` blocks of `M` columns each,
/// all columns admissible for the recorded δ; the seed reproduces the
/// randomized extraction bit for bit.
#[derive(Clone, Debug)]
pub struct ContrastMatrix {
    pub blocks: Vec<Mat>,
    pub delta: f64,
    pub seed: Option<u64>,
    /// Gauge values θ(G_ℓ) of the pre-scaling extraction candidates; empty
    /// for hand-built matrices.
    pub block_gauges: Vec<f64>,
}

impl ContrastMatrix {
    pub fn new(blocks: Vec<Mat>, delta: f64) -> Self {
        ContrastMatrix {
            blocks,
            delta,
            seed: None,
            block_gauges: Vec::new(),
        }
    }

    pub fn total_columns(&self) -> usize {
        self.blocks.iter().map(|b| b.ncols()).sum()
    }

    pub fn columns(&self) -> impl Iterator<Item = Vec64> + '_ {
        self.blocks
            .iter()
            .flat_map(|b| (0..b.ncols()).map(move |j| b.column(j).into()))
    }
}

#[derive(Serialize, Deserialize)]
struct ContrastDto {
    blocks: Vec<Vec<Vec<f64>>>,
    delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    block_gauges: Vec<f64>,
}

impl Serialize for ContrastMatrix {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ContrastDto {
            blocks: self.blocks.iter().map(mat_to_rows).collect(),
            delta: self.delta,
            seed: self.seed,
            block_gauges: self.block_gauges.clone(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for ContrastMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let dto = ContrastDto::deserialize(de)?;
        let blocks = dto
            .blocks
            .iter()
            .map(|rows| mat_from_rows(rows))
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        Ok(ContrastMatrix {
            blocks,
            delta: dto.delta,
            seed: dto.seed,
            block_gauges: dto.block_gauges,
        })
    }
}

/// The analysis bound `𝔭₊[H] = 2·min ρ` of the polyhedral estimate, valid
/// when every column of `H` is admissible (columns are checked first and an
/// inadmissible one is an error, not a projection).
pub fn risk_bound_poly(
    h: &ContrastMatrix,
    b: &Mat,
    a: &Mat,
    x: &Ellitope,
    norm: &ErrorNorm,
    hspec: &HSetSpec,
    settings: &SolveSettings,
) -> Result<f64> {
    if h.blocks.len() != norm.l() {
        return Err(Error::dim("contrast blocks", norm.l(), h.blocks.len()));
    }
    if !x.is_basic() {
        return Err(Error::Domain("risk_bound_poly needs a basic signal set".into()));
    }
    for (j, col) in h.columns().enumerate() {
        if !hset_member(&col, hspec, settings)? {
            return Err(Error::InadmissibleColumn {
                column: j,
                reason: format!(
                    "norm {:.4e} (cap {:.4e}), opt {:.4e} (cap {:.4e})",
                    col.norm(),
                    1.0 / (hspec.sigma * hspec.chi_norm),
                    hset_opt(&col, hspec, settings)?,
                    1.0 / hspec.chi_opt
                ),
            });
        }
    }

    let nu = b.nrows();
    let mut prog = ConicProgram::new();
    let rho = prog.nonneg_scalar();
    for (l, r_sqrt) in norm.sqrts().iter().enumerate() {
        let block = &h.blocks[l];
        let m_cols = block.ncols();
        let lam = prog.scalar();
        let mu = prog.nonneg_scalars(x.k());
        let upsilon = prog.nonneg_scalars(m_cols);
        // bottom-right: AᵀH_l Diag{υ} H_lᵀA + Σ_k μ_k T_k
        let mut bottom = weighted_matrix_sum(x.tks(), &mu);
        for j in 0..m_cols {
            let w = a.transpose() * block.column(j);
            let outer = &w * w.transpose();
            for c in 0..outer.ncols() {
                for r in 0..outer.nrows() {
                    let coeff = outer[(r, c)];
                    if coeff != 0.0 {
                        *bottom.entry_mut(r, c) += upsilon[j].scaled(coeff);
                    }
                }
            }
        }
        let off = MatExpr::from_const(&(r_sqrt * b * 0.5));
        let top_left = MatExpr::scaled_identity(&lam, nu);
        prog.build_lmi_block([[&top_left, &off], [&off.transpose(), &bottom]])?;
        let phi = support_epigraph(&mut prog, x.base(), &mu)?;
        let total = lam + phi + LinExpr::sum(upsilon.iter());
        prog.le(total, rho.clone());
    }
    prog.minimize(rho);
    Ok(2.0 * prog.solve_optimal(settings)?.objective)
}

/// Sampling lower bound for `𝔭[H] = sup{‖By‖ : y ∈ 2X, ‖HᵀAy‖_∞ ≤ 2}`:
/// random feasible directions plus local ascent, certified feasible.
pub fn p_oracle(
    h: &ContrastMatrix,
    b: &Mat,
    a: &Mat,
    x: &Ellitope,
    norm: &ErrorNorm,
    budget: usize,
) -> Result<f64> {
    if !x.is_basic() {
        return Err(Error::Domain("p_oracle needs a basic signal set".into()));
    }
    let n = x.latent_dim();
    let cols: Vec<Vec64> = h.columns().map(|c| a.transpose() * c).collect();
    let linf = |y: &Vec64| {
        cols.iter()
            .map(|w| w.dot(y).abs())
            .fold(0.0f64, f64::max)
    };
    // largest feasible multiple of a direction
    let fit = |d: &Vec64| -> Option<f64> {
        let g = x.gauge(d).ok()?;
        let mut s = f64::INFINITY;
        if g > 0.0 {
            s = s.min(2.0 / g);
        }
        let c = linf(d);
        if c > 0.0 {
            s = s.min(2.0 / c);
        }
        if s.is_finite() {
            Some(s)
        } else {
            None
        }
    };
    let objective = |y: &Vec64| norm.eval(&(b * y)).expect("dims fixed");

    let best = (0..budget.max(1))
        .into_par_iter()
        .map(|idx| {
            let mut rng = stream_rng(0x8f1b_2ce4_9d37_5a10, idx as u64);
            let mut d = Vec64::from_iterator(n, (0..n).map(|_| {
                let u: f64 = rng.random();
                2.0 * u - 1.0
            }));
            let Some(s) = fit(&d) else { return 0.0 };
            let mut y = &d * s;
            let mut val = objective(&y);
            let mut step = 0.5;
            for _ in 0..150 {
                if step < 1e-10 {
                    break;
                }
                // ascent on the active seminorm component
                let by = b * &y;
                let mut grad = Vec64::zeros(n);
                let mut top = -1.0;
                for r in norm.rs() {
                    let v = (by.transpose() * r * &by)[(0, 0)];
                    if v > top {
                        top = v;
                        grad = b.transpose() * (r * &by);
                    }
                }
                if grad.norm() == 0.0 {
                    break;
                }
                d = &y + &grad * (step / grad.norm().max(1e-300));
                let Some(s) = fit(&d) else {
                    step *= 0.5;
                    continue;
                };
                let cand = &d * s;
                let cval = objective(&cand);
                if cval > val + 1e-15 {
                    y = cand;
                    val = cval;
                    step *= 1.6;
                } else {
                    step *= 0.5;
                }
            }
            // certify feasibility exactly
            let mut scale: f64 = 1.0;
            if let Ok(g) = x.gauge(&y) {
                if g > 2.0 {
                    scale = scale.min(2.0 / g);
                }
            }
            let c = linf(&y);
            if c > 2.0 {
                scale = scale.min(2.0 / c);
            }
            objective(&(&y * scale))
        })
        .reduce(|| 0.0f64, f64::max);
    Ok(best)
}

/// Membership of `(Σ, ρ)` in the compatible cone
/// `𝐊 = {(Σ,ρ): Σ ⪰ 0, ∃r ∈ ℛ: 𝒮_i[Σ] ⪯ ρ r_i I}` of a basic spectratope,
/// with the witnessing `r` when the test passes.
pub fn spectratope_cone_member(
    sigma_mat: &Mat,
    rho: f64,
    set: &Spectratope,
) -> Result<(bool, Option<Vec64>)> {
    if sigma_mat.nrows() != set.latent_dim() {
        return Err(Error::dim(
            "cone member",
            set.latent_dim(),
            sigma_mat.nrows(),
        ));
    }
    if rho < 0.0 || min_eigenvalue(sigma_mat) < -1e-9 * sigma_mat.norm().max(1.0) {
        return Ok((false, None));
    }
    let tops = Vec64::from_iterator(
        set.blocks().len(),
        set.blocks()
            .iter()
            .map(|blk| max_eigenvalue(&blk.quadratic_map(sigma_mat)).max(0.0)),
    );
    if rho == 0.0 {
        let ok = sigma_mat.norm() <= 1e-12;
        return Ok((ok, ok.then(|| Vec64::zeros(set.blocks().len()))));
    }
    let scaled = &tops / rho;
    let ok = set.base().contains(&scaled, 1e-9);
    Ok((ok, ok.then(|| scaled)))
}

/// Orthonormal DCT-II matrix: first row `1/√m`, rows `i ≥ 1` equal
/// `√(2/m)·cos(π i (2j+1)/(2m))`; all entries at most `√(2/m)` in magnitude.
pub fn dct_matrix(m: usize) -> Mat {
    assert!(m >= 1);
    Mat::from_fn(m, m, |i, j| {
        if i == 0 {
            1.0 / (m as f64).sqrt()
        } else {
            (2.0 / m as f64).sqrt()
                * ((std::f64::consts::PI * i as f64 * (2 * j + 1) as f64) / (2.0 * m as f64)).cos()
        }
    })
}

/// Output of the randomized rank-one decomposition of a cone point.
#[derive(Clone, Debug)]
pub struct ConeDecomposition {
    pub vectors: Vec<Vec64>,
    pub weights: Vec<f64>,
    /// Number of Rademacher rounds consumed (1 = first try succeeded).
    pub rounds_used: u32,
    /// The weight budget `ϰρ` with `ϰ = 4 ln(4DN)`.
    pub weight_budget: f64,
}

impl ConeDecomposition {
    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn reconstruction(&self, dim: usize) -> Mat {
        let mut acc = Mat::zeros(dim, dim);
        for (g, &w) in self.vectors.iter().zip(self.weights.iter()) {
            acc += g * g.transpose() * w;
        }
        acc
    }
}

/// The tightness constant `ϰ = 4 ln(4DN)` of the spectratope cone.
pub fn cone_tightness(set: &Spectratope) -> f64 {
    4.0 * (4.0 * set.spectra_dim() as f64 * set.latent_dim() as f64).ln()
}

/// Randomized decomposition `Σ = Σ_j λ_j g_j g_jᵀ` with `g_j ∈ ℋ` and
/// `Σλ_j ≤ ϰρ`: per round, rotate `Σ^{1/2}` by a Rademacher sign pattern and
/// the DCT basis and keep the columns if they all fall inside ℋ. Each round
/// succeeds with probability at least 1/2.
pub fn decompose_cone_point(
    sigma_mat: &Mat,
    rho: f64,
    set: &Spectratope,
    max_rounds: u32,
    seed: u64,
) -> Result<ConeDecomposition> {
    let n = set.latent_dim();
    if sigma_mat.nrows() != n || sigma_mat.ncols() != n {
        return Err(Error::dim(
            "decompose_cone_point",
            format!("{n}x{n}"),
            format!("{}x{}", sigma_mat.nrows(), sigma_mat.ncols()),
        ));
    }
    let d = set.spectra_dim();
    let gamma = 2.0 * (4.0 * d as f64 * n as f64).ln();
    let varkappa = 2.0 * gamma;
    if sigma_mat.norm() <= 1e-14 {
        return Ok(ConeDecomposition {
            vectors: Vec::new(),
            weights: Vec::new(),
            rounds_used: 0,
            weight_budget: varkappa * rho.max(0.0),
        });
    }
    if rho <= 0.0 {
        return Err(Error::Domain(
            "nonzero matrix cannot be decomposed at rho = 0".into(),
        ));
    }
    let z = psd_sqrt(sigma_mat);
    let dct = dct_matrix(n);
    let scale = (n as f64 / (2.0 * gamma * rho)).sqrt();
    let weight = 2.0 * gamma * rho / n as f64;
    for round in 0..max_rounds {
        let mut rng = stream_rng(seed, round as u64);
        let signs = Mat::from_diagonal(&Vec64::from_iterator(n, (0..n).map(|_| {
            if rng.random::<bool>() {
                1.0
            } else {
                -1.0
            }
        })));
        let rotated = &z * signs * &dct;
        let mut ok = true;
        let mut vectors = Vec::with_capacity(n);
        for j in 0..n {
            let g: Vec64 = rotated.column(j) * scale;
            if g.norm() <= 1e-14 {
                continue;
            }
            if set.gauge(&g)? > 1.0 + 1e-9 {
                ok = false;
                break;
            }
            vectors.push(g);
        }
        if ok {
            let weights = vec![weight; vectors.len()];
            return Ok(ConeDecomposition {
                vectors,
                weights,
                rounds_used: round + 1,
                weight_budget: varkappa * rho,
            });
        }
    }
    Err(Error::DecompositionExhausted { rounds: max_rounds })
}

/// One `(Θ_ℓ, ϱ_ℓ)` pair of the compatible-cone synthesis, with the cone
/// certificate when available.
#[derive(Clone, Debug)]
pub struct CompatibleConePoint {
    pub theta: Mat,
    pub varrho: f64,
    pub certificate: Option<Vec64>,
}

/// Result of the ball-case polyhedral synthesis.
#[derive(Clone, Debug)]
pub struct PolyBallSynthesis {
    pub cone_points: Vec<CompatibleConePoint>,
    /// Optimal values of the auxiliary multipliers, per component.
    pub lambda_bars: Vec<f64>,
    pub mu_bars: Vec<f64>,
    /// Optimal value of the relaxed synthesis program.
    pub opt: f64,
    /// `2 √ϰ · Opt`: the guaranteed risk bound of the extracted estimate.
    pub risk_bound: f64,
    /// `ϰ = 4 ln(4DN)`; equals `4 ln(4m(m+n+q+1))` when q > 0.
    pub varkappa: f64,
    pub delta: f64,
    /// The admissible-column set the synthesis was run against.
    pub hspec: HSetSpec,
}

/// The ball-case admissible set as a basic spectratope over ℝ^m: block
/// `σ·c_norm·[[0,h],[hᵀ,0]]` (size m+1) plus, when q > 0, block
/// `c_opt·[[0,𝒜[h]],[𝒜[h]ᵀ,0]]` (size q+n), with a unit-box base.
pub fn hdelta_spectratope(hspec: &HSetSpec) -> Result<Spectratope> {
    if !hspec.is_ball_case() {
        return Err(Error::Domain(
            "the admissible set is a spectratope only when X is the unit ball".into(),
        ));
    }
    let m = hspec.m();
    let mut blocks = Vec::new();
    if hspec.sigma > 0.0 {
        let c = hspec.sigma * hspec.chi_norm;
        blocks.push(SpectraBlock::new(
            (0..m).map(|j| arrow_unit(m, j) * c).collect(),
        )?);
    }
    if hspec.q() > 0 {
        let c = hspec.chi_opt;
        let coords = (0..m)
            .map(|j| {
                let mut e = Vec64::zeros(m);
                e[j] = 1.0;
                arrow(&hspec.sensitivity(&e)) * c
            })
            .collect();
        blocks.push(SpectraBlock::new(coords)?);
    }
    if blocks.is_empty() {
        return Err(Error::Domain(
            "admissible set is unbounded: sigma = 0 and no perturbations".into(),
        ));
    }
    let dim = blocks.len();
    Spectratope::new(blocks, BaseSet::unit_box(dim))
}

/// Ball-case synthesis of the polyhedral estimate (X the unit Euclidean
/// ball): solves the compatible-cone relaxation with `δ = ε/(Lm)`, `M = m`.
pub fn synthesize_poly_ball(
    model: &UncertaintyModel,
    norm: &ErrorNorm,
    eps: f64,
    settings: &SolveSettings,
) -> Result<PolyBallSynthesis> {
    let delta = eps / (norm.l() * model.m()) as f64;
    let c = chi(delta)?;
    synthesize_poly_ball_with_constants(model, norm, delta, c, c, settings)
}

/// Moment-regime variant used with median-of-means recovery: both admissible
/// thresholds are 1/8 and the same constants replace χ(δ) in the program.
pub fn synthesize_poly_ball_moment(
    model: &UncertaintyModel,
    norm: &ErrorNorm,
    eps: f64,
    settings: &SolveSettings,
) -> Result<PolyBallSynthesis> {
    let delta = eps / (norm.l() * model.m()) as f64;
    synthesize_poly_ball_with_constants(model, norm, delta, 8.0, 8.0, settings)
}

/// Shared engine: `chi_sigma` scales the noise block (`σ²·chi_sigma²·Tr(Θ) ≤ ϱ`)
/// and `chi_unc` the uncertainty block (`blockdiag ⪯ chi_unc^{-2}·ϱ·I`).
pub fn synthesize_poly_ball_with_constants(
    model: &UncertaintyModel,
    norm: &ErrorNorm,
    delta: f64,
    chi_sigma: f64,
    chi_unc: f64,
    settings: &SolveSettings,
) -> Result<PolyBallSynthesis> {
    if model.sigma <= 0.0 {
        return Err(Error::Domain(
            "poly synthesis needs sigma > 0 (the trace block is otherwise unbounded)".into(),
        ));
    }
    let (m, n, nu, q) = (model.m(), model.n(), model.nu(), model.q());
    if norm.dim() != nu {
        return Err(Error::dim("norm dimension", nu, norm.dim()));
    }
    let hspec = HSetSpec::with_constants(
        model.sigma,
        Some(delta),
        chi_sigma,
        chi_unc,
        model.a_perturb.clone(),
        Ellitope::unit_ball(n),
    )?;
    let hset = hdelta_spectratope(&hspec)?;
    let varkappa = cone_tightness(&hset);

    let mut prog = ConicProgram::new();
    let rho_bar = prog.nonneg_scalar();
    let mut thetas = Vec::with_capacity(norm.l());
    let mut varrhos = Vec::with_capacity(norm.l());
    let mut lambda_bars = Vec::with_capacity(norm.l());
    let mut mu_bars = Vec::with_capacity(norm.l());

    // cross products A_alphaᵀ e_p e_qᵀ A_beta enter through trace terms
    let cross: Vec<Vec<Mat>> = (0..q)
        .map(|alpha| {
            (0..q)
                .map(|beta| &model.a_perturb[beta] * model.a_perturb[alpha].transpose())
                .collect()
        })
        .collect();

    for r_sqrt in norm.sqrts() {
        let theta = prog.psd_var(m);
        let varrho = prog.nonneg_scalar();
        let lam = prog.scalar();
        let mu = prog.nonneg_scalar();
        // noise block of the cone membership
        prog.le(
            theta.trace().scaled(model.sigma * model.sigma * chi_sigma * chi_sigma),
            varrho.clone(),
        );
        // uncertainty block: [[Tr(A_aᵀ Θ A_b)], Σ_a A_aᵀ Θ A_a] ⪯ chi^{-2} ϱ I
        if q > 0 {
            let inv = 1.0 / (chi_unc * chi_unc);
            let mut big = MatExpr::zeros(q + n, q + n);
            for alpha in 0..q {
                for beta in 0..q {
                    let tr = theta.trace_product(&cross[alpha][beta]);
                    *big.entry_mut(alpha, beta) = tr.scaled(-1.0);
                }
                *big.entry_mut(alpha, alpha) += varrho.scaled(inv);
            }
            let theta_expr = theta.as_expr();
            let mut quad = MatExpr::zeros(n, n);
            for pa in &model.a_perturb {
                let t = theta_expr.left_mul(&pa.transpose()).right_mul(pa);
                quad = quad.add(&t);
            }
            for j in 0..n {
                for i in 0..n {
                    *big.entry_mut(q + i, q + j) += quad.entry(i, j).scaled(-1.0);
                }
                *big.entry_mut(q + j, q + j) += varrho.scaled(inv);
            }
            prog.psd(&big)?;
        }
        // target LMI: [[λ̄ I_ν, R^{1/2}B/2],[·, AᵀΘA + μ̄ I_n]] ⪰ 0
        let off = MatExpr::from_const(&(r_sqrt * &model.b * 0.5));
        let top_left = MatExpr::scaled_identity(&lam, nu);
        let bottom = theta
            .as_expr()
            .left_mul(&model.a.transpose())
            .right_mul(&model.a)
            .add(&MatExpr::scaled_identity(&mu, n));
        prog.build_lmi_block([[&top_left, &off], [&off.transpose(), &bottom]])?;
        prog.le(lam.clone() + mu.clone() + varrho.clone(), rho_bar.clone());

        thetas.push(theta);
        varrhos.push(varrho);
        lambda_bars.push(lam);
        mu_bars.push(mu);
    }
    prog.minimize(rho_bar.clone());
    let sol = prog.solve_optimal(settings)?;

    let mut cone_points = Vec::with_capacity(norm.l());
    for (theta, varrho) in thetas.iter().zip(varrhos.iter()) {
        let t = symmetrize(&theta.value(&sol));
        let r = sol.value(varrho).max(0.0);
        let (_, cert) = spectratope_cone_member(&t, r.max(1e-300), &hset)?;
        cone_points.push(CompatibleConePoint {
            theta: t,
            varrho: r,
            certificate: cert,
        });
    }
    let opt = sol.objective;
    Ok(PolyBallSynthesis {
        cone_points,
        lambda_bars: lambda_bars.iter().map(|e| sol.value(e)).collect(),
        mu_bars: mu_bars.iter().map(|e| sol.value(e).max(0.0)).collect(),
        opt,
        risk_bound: 2.0 * varkappa.sqrt() * opt,
        varkappa,
        delta,
        hspec,
    })
}

/// Gauge evaluated at unit Euclidean scale and rescaled by homogeneity, so
/// the bisection's absolute tolerance stays a relative one for arbitrarily
/// scaled inputs.
fn scaled_gauge(set: &Spectratope, v: &Vec64) -> Result<f64> {
    let n = v.norm();
    if n == 0.0 {
        return Ok(0.0);
    }
    Ok(n * set.gauge(&(v / n))?)
}

/// Convert the cone points of a synthesis into a contrast matrix: per block,
/// draw `trials` Rademacher/DCT candidates `G = Θ^{1/2} Diag{ς} O`, keep the
/// one with the smallest maximal column gauge θ, and scale by 1/θ. All
/// resulting columns are admissible; the probability that some block misses
/// the √ϰ weight guarantee is at most `L·2^{-trials}`.
pub fn extract_contrasts(
    synthesis: &PolyBallSynthesis,
    trials: usize,
    seed: u64,
    settings: &SolveSettings,
) -> Result<ContrastMatrix> {
    let hset = hdelta_spectratope(&synthesis.hspec)?;
    let m = hset.latent_dim();
    let dct = dct_matrix(m);
    let mut blocks = Vec::with_capacity(synthesis.cone_points.len());
    let mut gauges = Vec::with_capacity(synthesis.cone_points.len());
    for (l, point) in synthesis.cone_points.iter().enumerate() {
        if point.theta.norm() <= 1e-14 {
            blocks.push(Mat::zeros(m, m));
            gauges.push(0.0);
            continue;
        }
        let z = psd_sqrt(&point.theta);
        let mut best: Option<(f64, Mat)> = None;
        for k in 0..trials.max(1) {
            let mut rng = stream_rng(seed, ((l as u64) << 32) | k as u64);
            let signs = Mat::from_diagonal(&Vec64::from_iterator(m, (0..m).map(|_| {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            })));
            let cand = &z * signs * &dct;
            let mut theta_val = 0.0f64;
            for j in 0..m {
                let col: Vec64 = cand.column(j).into();
                theta_val = theta_val.max(scaled_gauge(&hset, &col)?);
            }
            if best.as_ref().map_or(true, |(t, _)| theta_val < *t) {
                best = Some((theta_val, cand));
            }
        }
        let (theta_val, g) = best.expect("trials >= 1");
        if theta_val <= 1e-14 {
            blocks.push(Mat::zeros(m, m));
            gauges.push(0.0);
            continue;
        }
        let block = g / theta_val;
        // audit: every column must pass the closed-form membership test
        for j in 0..block.ncols() {
            let col: Vec64 = block.column(j).into();
            if !hset_member(&col, &synthesis.hspec, settings)? {
                return Err(Error::InadmissibleColumn {
                    column: j,
                    reason: format!("extracted column of block {l} failed the membership audit"),
                });
            }
        }
        blocks.push(block);
        gauges.push(theta_val);
    }
    Ok(ContrastMatrix {
        blocks,
        delta: synthesis.delta,
        seed: Some(seed),
        block_gauges: gauges,
    })
}

fn linf_recovery(
    directions: &[Vec64],
    targets: &[f64],
    x: &Ellitope,
    settings: &SolveSettings,
) -> Result<Vec64> {
    let n = x.latent_dim();
    let mut prog = ConicProgram::new();
    let u = prog.scalars(n);
    let t = prog.nonneg_scalar();
    for (w, &y) in directions.iter().zip(targets.iter()) {
        let mut resid = LinExpr::constant(-y);
        for j in 0..n {
            resid += u[j].scaled(w[j]);
        }
        prog.le(resid.clone(), t.clone());
        prog.le(resid.scaled(-1.0), t.clone());
    }
    ellitope_membership(&mut prog, &u, x)?;
    prog.minimize(t);
    let sol = prog.solve_optimal(settings)?;
    Ok(sol.vector(&u))
}

/// Polyhedral recovery: `x̂ ∈ Argmin_{u∈X} ‖Hᵀ(Au − ω)‖_∞`, `ŵ = Bx̂`.
pub fn recover_poly(
    h: &ContrastMatrix,
    omega: &Vec64,
    a: &Mat,
    x: &Ellitope,
    b: &Mat,
    settings: &SolveSettings,
) -> Result<(Vec64, Vec64)> {
    let mut directions = Vec::with_capacity(h.total_columns());
    let mut targets = Vec::with_capacity(h.total_columns());
    for col in h.columns() {
        directions.push(a.transpose() * &col);
        targets.push(col.dot(omega));
    }
    let xhat = linf_recovery(&directions, &targets, x, settings)?;
    let what = b * &xhat;
    Ok((xhat, what))
}

/// Lower median: the `⌈K/2⌉`-th order statistic.
pub fn lower_median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = sorted.len();
    sorted[k.div_ceil(2) - 1]
}

/// Median-of-means polyhedral recovery for K-repeated observations:
/// per-column empirical medians `y_j = med{h_jᵀω_k}` followed by
/// `Argmin_{u∈X} ‖y − HᵀAu‖_∞`. Requires `K ≥ 2.5 ln(M/ε)` for the ε-risk
/// guarantee `≤ 𝔭[H]`; a shortfall is warned about and the recovery proceeds.
pub fn mom_recover_poly(
    h: &ContrastMatrix,
    observations: &[Vec64],
    a: &Mat,
    x: &Ellitope,
    b: &Mat,
    eps: f64,
    settings: &SolveSettings,
) -> Result<(Vec64, Vec64)> {
    if observations.is_empty() {
        return Err(Error::Domain("mom_recover_poly needs observations".into()));
    }
    let m_cols = h.total_columns();
    let k_rep = observations.len();
    let needed = (2.5 * (m_cols as f64 / eps).ln()).ceil() as usize;
    if k_rep < needed {
        log::warn!(
            "mom_recover_poly: K = {k_rep} repetitions below the guarantee threshold {needed}"
        );
    }
    let mut directions = Vec::with_capacity(m_cols);
    let mut targets = Vec::with_capacity(m_cols);
    for col in h.columns() {
        directions.push(a.transpose() * &col);
        let vals: Vec<f64> = observations.iter().map(|w| col.dot(w)).collect();
        targets.push(lower_median(&vals));
    }
    let xhat = linf_recovery(&directions, &targets, x, settings)?;
    let what = b * &xhat;
    Ok((xhat, what))
}

/// Membership in the Euclidean-ball compatible cone of radius `R`:
/// `Θ ⪰ 0` and `Tr(Θ) ≤ R²ϱ`.
pub fn ball_cone_member(theta: &Mat, varrho: f64, radius: f64) -> bool {
    min_eigenvalue(theta) >= -1e-9 * theta.norm().max(1.0)
        && theta.trace() <= radius * radius * varrho * (1.0 + 1e-9) + 1e-12
}

/// Exact decomposition in the ball cone: eigenvectors scaled to radius `R`
/// with weights `λ_j / R²` (the deterministic route the randomized algorithm
/// is checked against in the ball case).
pub fn ball_cone_decompose(theta: &Mat, varrho: f64, radius: f64) -> Result<ConeDecomposition> {
    if !ball_cone_member(theta, varrho, radius) {
        return Err(Error::Domain("not a member of the ball cone".into()));
    }
    let eig = symmetrize(theta).symmetric_eigen();
    let mut vectors = Vec::new();
    let mut weights = Vec::new();
    for i in 0..theta.nrows() {
        let lam = eig.eigenvalues[i];
        if lam > 1e-14 {
            let f: Vec64 = eig.eigenvectors.column(i).into();
            vectors.push(f * radius);
            weights.push(lam / (radius * radius));
        }
    }
    Ok(ConeDecomposition {
        vectors,
        weights,
        rounds_used: 0,
        weight_budget: varrho,
    })
}
