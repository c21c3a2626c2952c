//! Ellitopes: sets `{x = Py : ∃t ∈ 𝒯, yᵀT_k y ≤ t_k, k ≤ K}` with PSD `T_k`
//! summing to a positive-definite matrix and 𝒯 a monotone base set.

use super::base::BaseSet;
use super::linalg::{self, mat_from_rows, mat_to_rows, min_eigenvalue, psd_sqrt, symmetrize};
use crate::error::{Error, Result};
use crate::{Mat, Vec64};
use serde::{Deserialize, Serialize};

/// Eigenvalues of a quadratic-constraint matrix above this are clipped when
/// negative; below minus this they make the spec invalid.
const PSD_CLIP: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct Ellitope {
    /// Optional linear image map `P` (n×N); identity when absent (basic case).
    p_map: Option<Mat>,
    /// Quadratic-form matrices `T_k`, symmetric PSD, over the latent space.
    tks: Vec<Mat>,
    base: BaseSet,
    /// Cached PSD square roots of the `T_k`.
    sqrts: Vec<Mat>,
}

impl Ellitope {
    pub fn new(tks: Vec<Mat>, base: BaseSet) -> Result<Self> {
        Self::with_map(None, tks, base)
    }

    pub fn with_map(p_map: Option<Mat>, tks: Vec<Mat>, base: BaseSet) -> Result<Self> {
        if tks.is_empty() {
            return Err(Error::Geometry("ellitope needs at least one T_k".into()));
        }
        if tks.len() != base.dim() {
            return Err(Error::dim("ellitope base", tks.len(), base.dim()));
        }
        let latent = tks[0].nrows();
        let mut clipped = Vec::with_capacity(tks.len());
        let mut sum = Mat::zeros(latent, latent);
        for (k, t) in tks.iter().enumerate() {
            if t.nrows() != latent || t.ncols() != latent {
                return Err(Error::dim(
                    "ellitope T_k",
                    format!("{latent}x{latent}"),
                    format!("{}x{}", t.nrows(), t.ncols()),
                ));
            }
            let sym = symmetrize(t);
            let min_eig = min_eigenvalue(&sym);
            if min_eig < -PSD_CLIP {
                return Err(Error::Geometry(format!(
                    "T_{k} is not PSD (min eigenvalue {min_eig:.3e})"
                )));
            }
            // clip tiny negative eigenvalues so noisy inputs round to PSD
            let t_clipped = if min_eig < 0.0 {
                let r = psd_sqrt(&sym);
                &r * &r
            } else {
                sym
            };
            sum += &t_clipped;
            clipped.push(t_clipped);
        }
        if min_eigenvalue(&sum) <= PSD_CLIP {
            return Err(Error::Geometry(
                "sum of T_k is singular; the ellitope would be unbounded".into(),
            ));
        }
        if let Some(p) = &p_map {
            if p.ncols() != latent {
                return Err(Error::dim("ellitope P map", latent, p.ncols()));
            }
        }
        let sqrts = clipped.iter().map(psd_sqrt).collect();
        Ok(Ellitope {
            p_map,
            tks: clipped,
            base,
            sqrts,
        })
    }

    /// Unit Euclidean ball in dimension `n`: `K = 1`, `T_1 = I`, 𝒯 = [0,1].
    pub fn unit_ball(n: usize) -> Self {
        Ellitope::new(vec![Mat::identity(n, n)], BaseSet::segment()).expect("valid")
    }

    /// Ellipsoid `{x : xᵀQx ≤ 1}` for positive-definite `Q`.
    pub fn ellipsoid(q: Mat) -> Result<Self> {
        Ellitope::new(vec![q], BaseSet::segment())
    }

    /// Unit box `{x : ‖x‖_∞ ≤ 1}`: coordinate matrices with a box base.
    pub fn unit_box(n: usize) -> Self {
        let tks = (0..n)
            .map(|k| {
                let mut t = Mat::zeros(n, n);
                t[(k, k)] = 1.0;
                t
            })
            .collect();
        Ellitope::new(tks, BaseSet::unit_box(n)).expect("valid")
    }

    /// ℓ_p ball for `p ≥ 2`: coordinate matrices with a nonnegative
    /// p/2-norm-ball base.
    pub fn lp_ball(n: usize, p: f64) -> Result<Self> {
        let tks = (0..n)
            .map(|k| {
                let mut t = Mat::zeros(n, n);
                t[(k, k)] = 1.0;
                t
            })
            .collect();
        Ellitope::new(tks, BaseSet::new(super::base::BaseSetKind::PBall(p), n)?)
    }

    pub fn is_basic(&self) -> bool {
        self.p_map.is_none()
    }

    /// Ambient dimension (of `x = Py`).
    pub fn ambient_dim(&self) -> usize {
        match &self.p_map {
            Some(p) => p.nrows(),
            None => self.latent_dim(),
        }
    }

    /// Latent dimension (of `y`).
    pub fn latent_dim(&self) -> usize {
        self.tks[0].nrows()
    }

    /// Ellitopic dimension `K`.
    pub fn k(&self) -> usize {
        self.tks.len()
    }

    pub fn tks(&self) -> &[Mat] {
        &self.tks
    }

    pub fn tk_sqrts(&self) -> &[Mat] {
        &self.sqrts
    }

    pub fn base(&self) -> &BaseSet {
        &self.base
    }

    pub fn p_map(&self) -> Option<&Mat> {
        self.p_map.as_ref()
    }

    /// `Σ_k μ_k T_k` for a numeric multiplier vector.
    pub fn weighted_sum(&self, mu: &Vec64) -> Result<Mat> {
        if mu.len() != self.k() {
            return Err(Error::dim("weighted_sum", self.k(), mu.len()));
        }
        let n = self.latent_dim();
        let mut acc = Mat::zeros(n, n);
        for (k, t) in self.tks.iter().enumerate() {
            acc += t * mu[k];
        }
        Ok(acc)
    }

    /// Vector of quadratic values `(vᵀT_k v)_k`.
    pub fn quad_values(&self, v: &Vec64) -> Result<Vec64> {
        if v.len() != self.latent_dim() {
            return Err(Error::dim("quad_values", self.latent_dim(), v.len()));
        }
        Ok(Vec64::from_iterator(
            self.k(),
            self.tks.iter().map(|t| (v.transpose() * t * v)[(0, 0)].max(0.0)),
        ))
    }

    /// Membership test for a basic ellitope, up to `tol` on the gauge.
    pub fn contains(&self, v: &Vec64, tol: f64) -> Result<bool> {
        Ok(self.gauge(v)? <= 1.0 + tol)
    }

    /// Minkowski gauge `inf{s > 0 : v/s ∈ X}` of a basic ellitope.
    ///
    /// Bisection over `s` with a closed-form membership test per candidate
    /// (absolute tolerance 1e-9, at most 200 iterations).
    pub fn gauge(&self, v: &Vec64) -> Result<f64> {
        if !self.is_basic() {
            return Err(Error::Domain(
                "gauge is defined for basic ellitopes only (P = identity)".into(),
            ));
        }
        let quads = self.quad_values(v)?;
        if quads.iter().all(|&q| q == 0.0) {
            return Ok(0.0);
        }
        // member(s) <=> (quads / s^2) in base; base gauge gives a tight bracket
        let est = self.base.gauge_nonneg(&quads)?.sqrt();
        gauge_bisect(est, |s| self.base.contains(&(&quads / (s * s)), 0.0))
    }

    /// Structural diagnostics: PSD violations, singular `Σ T_k`, malformed base.
    pub fn validate(&self) -> Vec<String> {
        let mut report = self.base.validate();
        let n = self.latent_dim();
        let mut sum = Mat::zeros(n, n);
        for (k, t) in self.tks.iter().enumerate() {
            let me = min_eigenvalue(t);
            if me < -PSD_CLIP {
                report.push(format!("T_{k} not PSD: min eigenvalue {me:.3e}"));
            }
            sum += t;
        }
        let se = min_eigenvalue(&sum);
        if se <= PSD_CLIP {
            report.push(format!("sum of T_k singular: min eigenvalue {se:.3e}"));
        }
        report
    }

    /// Fold the image map into external matrices: returns `M P` (for a matrix
    /// acting on ambient points), or a copy when the ellitope is basic.
    pub fn fold_map(&self, m: &Mat) -> Result<Mat> {
        if m.ncols() != self.ambient_dim() {
            return Err(Error::dim("fold_map", self.ambient_dim(), m.ncols()));
        }
        Ok(match &self.p_map {
            Some(p) => m * p,
            None => m.clone(),
        })
    }

    /// Drop the image map, keeping the latent basic ellitope.
    pub fn basic_part(&self) -> Ellitope {
        Ellitope {
            p_map: None,
            tks: self.tks.clone(),
            base: self.base.clone(),
            sqrts: self.sqrts.clone(),
        }
    }
}

/// Shared bisection driver: `member(s)` must be monotone in `s` and `est`
/// must satisfy `member(est (1 + eps))` for small eps.
pub(crate) fn gauge_bisect(est: f64, member: impl Fn(f64) -> bool) -> Result<f64> {
    if est == 0.0 {
        return Ok(0.0);
    }
    if !est.is_finite() {
        return Err(Error::Domain("gauge bracket is not finite".into()));
    }
    let mut hi = est * 2.0 + 1e-12;
    let mut lo = 0.0;
    if !member(hi) {
        // widen defensively; the closed-form estimate should already cover it
        for _ in 0..60 {
            hi *= 2.0;
            if member(hi) {
                break;
            }
        }
        if !member(hi) {
            return Err(Error::Domain("gauge bisection failed to bracket".into()));
        }
    }
    for _ in 0..200 {
        if hi - lo < 1e-9 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if member(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Serialize, Deserialize)]
struct EllitopeDto {
    #[serde(rename = "T")]
    tks: Vec<Vec<Vec<f64>>>,
    base: BaseSet,
    #[serde(rename = "P", default, skip_serializing_if = "Option::is_none")]
    p_map: Option<Vec<Vec<f64>>>,
}

impl Serialize for Ellitope {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        EllitopeDto {
            tks: self.tks.iter().map(mat_to_rows).collect(),
            base: self.base.clone(),
            p_map: self.p_map.as_ref().map(mat_to_rows),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Ellitope {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let dto = EllitopeDto::deserialize(de)?;
        let tks = dto
            .tks
            .iter()
            .map(|rows| mat_from_rows(rows))
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        let p_map = dto
            .p_map
            .as_ref()
            .map(|rows| mat_from_rows(rows))
            .transpose()
            .map_err(D::Error::custom)?;
        Ellitope::with_map(p_map, tks, dto.base).map_err(D::Error::custom)
    }
}

/// Exposed for tests and oracles: numerical rank helper re-export.
pub use linalg::numerical_rank;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(s: &[f64]) -> Vec64 {
        Vec64::from_column_slice(s)
    }

    #[test]
    fn unit_ball_gauge_is_euclidean() {
        let ball = Ellitope::unit_ball(3);
        let x = v(&[0.3, 0.0, 0.4]); // norm 0.5
        assert_abs_diff_eq!(ball.gauge(&x).unwrap(), 0.5, epsilon = 1e-8);
    }

    #[test]
    fn gauge_of_zero_is_zero() {
        let ball = Ellitope::unit_ball(2);
        assert_eq!(ball.gauge(&v(&[0.0, 0.0])).unwrap(), 0.0);
    }

    #[test]
    fn box_ellitope_gauge_is_linf() {
        // {x : x_k^2 <= t_k, t in [0,1]^2}; direct maximization gives max |v_k|
        let setx = Ellitope::unit_box(2);
        let x = v(&[1.0, 0.3]);
        assert_abs_diff_eq!(setx.gauge(&x).unwrap(), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn validate_flags_singular_sum() {
        // constructor rejects it; validate() reports it on a hand-built value
        let err = Ellitope::new(vec![Mat::zeros(2, 2)], BaseSet::segment());
        assert!(err.is_err());
        let ok = Ellitope::unit_ball(2);
        assert!(ok.validate().is_empty());
    }

    #[test]
    fn non_basic_gauge_rejected() {
        let e = Ellitope::with_map(
            Some(Mat::identity(2, 2)),
            vec![Mat::identity(2, 2)],
            BaseSet::segment(),
        )
        .unwrap();
        assert!(e.gauge(&v(&[0.1, 0.1])).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let e = Ellitope::lp_ball(3, 4.0).unwrap();
        let s = serde_json::to_string(&e).unwrap();
        let back: Ellitope = serde_json::from_str(&s).unwrap();
        assert_eq!(back.k(), 3);
        assert_eq!(back.latent_dim(), 3);
        let x = v(&[0.5, 0.5, 0.5]);
        assert_abs_diff_eq!(
            back.gauge(&x).unwrap(),
            e.gauge(&x).unwrap(),
            epsilon = 1e-12
        );
    }
}
