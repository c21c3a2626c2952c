//! Conic encodings of the geometric primitives: support-function epigraphs
//! for the three base-set kinds, q-norm cones via geometric-mean towers,
//! ellitope membership, and the recurring arrow-LMI operator-norm bound.

use super::expr::{LinExpr, MatExpr};
use super::ConicProgram;
use crate::error::{Error, Result};
use crate::geometry::{BaseSet, BaseSetKind, Ellitope};

/// Rationalize a positive exponent by continued fractions, denominator ≤ 64.
fn rationalize(x: f64) -> Result<(u64, u64)> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::Domain(format!("exponent {x} not representable")));
    }
    let (mut a, mut b) = (x.round() as i64, 1i64);
    let mut best = (a, b, (x - a as f64 / 1.0).abs());
    for den in 1..=64i64 {
        let num = (x * den as f64).round() as i64;
        if num <= 0 {
            continue;
        }
        let err = (x - num as f64 / den as f64).abs();
        if err < best.2 - 1e-15 {
            best = (num, den, err);
            a = num;
            b = den;
        }
        if best.2 < 1e-12 {
            break;
        }
    }
    let _ = (a, b);
    if best.2 > 1e-9 {
        return Err(Error::Domain(format!(
            "exponent {x} is not a small rational; use p with denominator <= 64"
        )));
    }
    let g = gcd(best.0 as u64, best.1 as u64);
    Ok((best.0 as u64 / g, best.1 as u64 / g))
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a.max(1)
    } else {
        gcd(b, a % b)
    }
}

/// Hypograph of the geometric mean: `t ≤ (∏ terms)^{1/len}` for a power-of-two
/// number of nonnegative terms, by a binary tree of rotated second-order cones.
fn geo_mean_hypograph(prog: &mut ConicProgram, terms: &[LinExpr], t: &LinExpr) {
    debug_assert!(terms.len().is_power_of_two());
    match terms.len() {
        1 => prog.le(t.clone(), terms[0].clone()),
        2 => prog.quad_le(std::slice::from_ref(t), terms[0].clone(), terms[1].clone()),
        n => {
            let mut next = Vec::with_capacity(n / 2);
            for pair in terms.chunks(2) {
                let u = prog.nonneg_scalar();
                prog.quad_le(std::slice::from_ref(&u), pair[0].clone(), pair[1].clone());
                next.push(u);
            }
            geo_mean_hypograph(prog, &next, t);
        }
    }
}

/// `‖m‖_q ≤ bound` for entrywise-nonnegative expressions `m` and rational
/// `q = num/den ≥ 1`.
pub fn qnorm_le(
    prog: &mut ConicProgram,
    m: &[LinExpr],
    bound: LinExpr,
    num: u64,
    den: u64,
) -> Result<()> {
    if num < den {
        return Err(Error::Domain(format!("q-norm exponent {num}/{den} < 1")));
    }
    if num == den {
        let total = LinExpr::sum(m.iter());
        prog.le(total, bound);
        return Ok(());
    }
    if num > 64 {
        return Err(Error::Domain(format!(
            "q-norm exponent {num}/{den} too fine for the SOC tower"
        )));
    }
    let a = num as usize;
    let b = den as usize;
    let padded = a.next_power_of_two();
    let mut weights = Vec::with_capacity(m.len());
    for mk in m {
        // m_k <= w_k^{1/q} bound^{1-1/q}, padded with copies of m_k itself
        let w = prog.nonneg_scalar();
        let mut terms: Vec<LinExpr> = Vec::with_capacity(padded);
        terms.extend(std::iter::repeat_with(|| w.clone()).take(b));
        terms.extend(std::iter::repeat_with(|| bound.clone()).take(a - b));
        terms.extend(std::iter::repeat_with(|| mk.clone()).take(padded - a));
        geo_mean_hypograph(prog, &terms, mk);
        weights.push(w);
    }
    prog.le(LinExpr::sum(weights.iter()), bound);
    Ok(())
}

/// Epigraph of the support function `φ_𝒯(y)` of a base set: returns an
/// expression `t` with `t ≥ φ_𝒯(y)` enforced; minimizing `t` makes it tight.
pub fn support_epigraph(
    prog: &mut ConicProgram,
    base: &BaseSet,
    y: &[LinExpr],
) -> Result<LinExpr> {
    if y.len() != base.dim() {
        return Err(Error::dim("support epigraph", base.dim(), y.len()));
    }
    let scale = base.scale();
    // positive parts of the scaled coordinates
    let mut pos = Vec::with_capacity(y.len());
    for (k, yk) in y.iter().enumerate() {
        let mk = prog.nonneg_scalar();
        prog.ge_zero(mk.clone() - yk.scaled(scale[k]));
        pos.push(mk);
    }
    match *base.kind() {
        BaseSetKind::Box => Ok(LinExpr::sum(pos.iter())),
        BaseSetKind::SimplexScaled => {
            let t = prog.nonneg_scalar();
            for mk in &pos {
                prog.le(mk.clone(), t.clone());
            }
            Ok(t)
        }
        BaseSetKind::PBall(p) => {
            let t = prog.nonneg_scalar();
            if p <= 2.0 + 1e-12 {
                // dual exponent is infinity: t >= max_k pos_k
                for mk in &pos {
                    prog.le(mk.clone(), t.clone());
                }
            } else {
                let (pn, pd) = rationalize(p)?;
                // (p/2)* = p/(p-2)
                let qn = pn;
                let qd = pn.checked_sub(2 * pd).ok_or_else(|| {
                    Error::Domain(format!("p = {p} below 2 in dual exponent"))
                })?;
                if qd == 0 {
                    for mk in &pos {
                        prog.le(mk.clone(), t.clone());
                    }
                } else {
                    let g = gcd(qn, qd);
                    qnorm_le(prog, &pos, t.clone(), qn / g, qd / g)?;
                }
            }
            Ok(t)
        }
    }
}

/// Constrain `t ∈ 𝒯` for a vector of expressions.
pub fn base_membership(prog: &mut ConicProgram, base: &BaseSet, t: &[LinExpr]) -> Result<()> {
    if t.len() != base.dim() {
        return Err(Error::dim("base membership", base.dim(), t.len()));
    }
    let scale = base.scale();
    for tk in t {
        prog.ge_zero(tk.clone());
    }
    match *base.kind() {
        BaseSetKind::Box => {
            for (k, tk) in t.iter().enumerate() {
                prog.le(tk.clone(), LinExpr::constant(scale[k]));
            }
        }
        BaseSetKind::SimplexScaled => {
            let total = LinExpr::sum(
                t.iter()
                    .enumerate()
                    .map(|(k, tk)| tk.scaled(1.0 / scale[k]))
                    .collect::<Vec<_>>()
                    .iter(),
            );
            prog.le(total, LinExpr::constant(1.0));
        }
        BaseSetKind::PBall(p) => {
            let scaled: Vec<LinExpr> = t
                .iter()
                .enumerate()
                .map(|(k, tk)| tk.scaled(1.0 / scale[k]))
                .collect();
            let (pn, pd) = rationalize(p / 2.0)?;
            qnorm_le(prog, &scaled, LinExpr::constant(1.0), pn, pd)?;
        }
    }
    Ok(())
}

/// Constrain a point (given coordinatewise as expressions) to lie in a basic
/// ellitope: introduces `t ∈ 𝒯` and the quadratic constraints `xᵀT_k x ≤ t_k`.
pub fn ellitope_membership(
    prog: &mut ConicProgram,
    x: &[LinExpr],
    set: &Ellitope,
) -> Result<()> {
    if !set.is_basic() {
        return Err(Error::Domain(
            "membership encoding needs a basic ellitope".into(),
        ));
    }
    if x.len() != set.latent_dim() {
        return Err(Error::dim("ellitope membership", set.latent_dim(), x.len()));
    }
    let xm = column_expr(x);
    let t = prog.nonneg_scalars(set.k());
    for (k, w) in set.tk_sqrts().iter().enumerate() {
        let wx = xm.left_mul(w);
        let rows: Vec<LinExpr> = (0..wx.nrows()).map(|i| wx.entry(i, 0).clone()).collect();
        prog.quad_le(&rows, t[k].clone(), LinExpr::constant(1.0));
    }
    base_membership(prog, set.base(), &t)
}

/// Column vector of expressions as a `n×1` matrix expression.
pub fn column_expr(x: &[LinExpr]) -> MatExpr {
    let mut out = MatExpr::zeros(x.len(), 1);
    for (i, e) in x.iter().enumerate() {
        *out.entry_mut(i, 0) = e.clone();
    }
    out
}

/// `Σ_k μ_k T_k` as a matrix expression for multiplier expressions `μ`.
pub fn weighted_matrix_sum(mats: &[crate::Mat], mu: &[LinExpr]) -> MatExpr {
    assert_eq!(mats.len(), mu.len());
    let n = mats[0].nrows();
    let mut out = MatExpr::zeros(n, n);
    for (t, m) in mats.iter().zip(mu.iter()) {
        for j in 0..n {
            for i in 0..n {
                let c = t[(i, j)];
                if c != 0.0 {
                    *out.entry_mut(i, j) += m.scaled(c);
                }
            }
        }
    }
    out
}

/// Multiplier handles produced by [`xnorm_bound_epigraph`].
pub struct XNormBound {
    /// `λ + φ_𝒯(μ)`: upper-bounds `‖Q‖_{X,2}` at any feasible point.
    pub total: LinExpr,
    pub lam: LinExpr,
    pub mu: Vec<LinExpr>,
}

/// The recurring arrow-LMI bound on the (X,2)-operator norm of an affine
/// matrix `Q(x)` (r×n over the latent space of the basic ellitope `X`):
/// adds multipliers `λ, μ ≥ 0` and the constraint
/// `[[λ I_r, Q/2],[Qᵀ/2, Σ_k μ_k T_k]] ⪰ 0`.
pub fn xnorm_bound_epigraph(
    prog: &mut ConicProgram,
    q_expr: &MatExpr,
    set: &Ellitope,
) -> Result<XNormBound> {
    if q_expr.ncols() != set.latent_dim() {
        return Err(Error::dim(
            "xnorm bound",
            set.latent_dim(),
            q_expr.ncols(),
        ));
    }
    let r = q_expr.nrows();
    let lam = prog.scalar();
    let mu = prog.nonneg_scalars(set.k());
    let top_left = MatExpr::scaled_identity(&lam, r);
    let off = q_expr.scaled(0.5);
    let bottom_right = weighted_matrix_sum(set.tks(), &mu);
    prog.build_lmi_block([[&top_left, &off], [&off.transpose(), &bottom_right]])?;
    let phi = support_epigraph(prog, set.base(), &mu)?;
    Ok(XNormBound {
        total: lam.clone() + phi,
        lam,
        mu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::SolveSettings;
    use crate::geometry::BaseSetKind;
    use crate::{Mat, Vec64};
    use approx::assert_abs_diff_eq;

    fn minimize_support(base: &BaseSet, y: &[f64]) -> f64 {
        let mut prog = ConicProgram::new();
        let exprs: Vec<LinExpr> = y.iter().map(|&v| LinExpr::constant(v)).collect();
        let t = support_epigraph(&mut prog, base, &exprs).unwrap();
        prog.minimize(t);
        prog.solve_optimal(&SolveSettings::default()).unwrap().objective
    }

    #[test]
    fn epigraph_matches_closed_form_box() {
        let base = BaseSet::unit_box(3);
        let y = [1.5, -2.0, 0.25];
        let closed = base.support(&Vec64::from_column_slice(&y)).unwrap();
        assert_abs_diff_eq!(minimize_support(&base, &y), closed, epsilon = 1e-6);
    }

    #[test]
    fn epigraph_matches_closed_form_pball() {
        for p in [2.0, 3.0, 4.0, 6.0] {
            let base = BaseSet::new(BaseSetKind::PBall(p), 3).unwrap();
            let y = [0.8, -0.3, 1.7];
            let closed = base.support(&Vec64::from_column_slice(&y)).unwrap();
            assert_abs_diff_eq!(minimize_support(&base, &y), closed, epsilon = 1e-6);
        }
    }

    #[test]
    fn epigraph_matches_closed_form_simplex() {
        let base = BaseSet::with_scale(
            BaseSetKind::SimplexScaled,
            Vec64::from_column_slice(&[2.0, 1.0]),
        )
        .unwrap();
        let y = [1.0, 1.5];
        let closed = base.support(&Vec64::from_column_slice(&y)).unwrap();
        assert_abs_diff_eq!(minimize_support(&base, &y), closed, epsilon = 1e-6);
    }

    #[test]
    fn qnorm_tower_three_halves() {
        // minimize t with ||(1,1)||_{3/2} <= t: t = 2^{2/3}
        let mut prog = ConicProgram::new();
        let t = prog.nonneg_scalar();
        qnorm_le(
            &mut prog,
            &[LinExpr::constant(1.0), LinExpr::constant(1.0)],
            t.clone(),
            3,
            2,
        )
        .unwrap();
        prog.minimize(t);
        let sol = prog.solve_optimal(&SolveSettings::default()).unwrap();
        assert_abs_diff_eq!(sol.objective, 2f64.powf(2.0 / 3.0), epsilon = 1e-6);
    }

    #[test]
    fn ellitope_membership_maximizes_to_boundary() {
        // maximize e1ᵀx over the unit ball and over an lp ball
        for set in [Ellitope::unit_ball(3), Ellitope::lp_ball(3, 4.0).unwrap()] {
            let mut prog = ConicProgram::new();
            let x = prog.scalars(3);
            ellitope_membership(&mut prog, &x, &set).unwrap();
            prog.minimize(x[0].scaled(-1.0));
            let sol = prog.solve_optimal(&SolveSettings::default()).unwrap();
            assert_abs_diff_eq!(-sol.objective, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn xnorm_bound_exact_on_ball() {
        // K = 1 ball: the bound equals the spectral norm
        let q = Mat::from_row_slice(2, 3, &[1.0, 0.0, 2.0, 0.0, -1.0, 0.5]);
        let set = Ellitope::unit_ball(3);
        let mut prog = ConicProgram::new();
        let qe = MatExpr::from_const(&q);
        let bound = xnorm_bound_epigraph(&mut prog, &qe, &set).unwrap();
        prog.minimize(bound.total);
        let sol = prog.solve_optimal(&SolveSettings::default()).unwrap();
        let spectral = crate::geometry::linalg::spectral_norm(&q);
        assert_abs_diff_eq!(sol.objective, spectral, epsilon = 1e-6);
    }
}
