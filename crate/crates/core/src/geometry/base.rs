//! Base sets 𝒯 (and ℛ for spectratopes): convex, compact, monotone subsets of
//! the nonnegative orthant with closed-form support functions.
//!
//! Three kinds are admitted so that every support function stays exactly
//! representable inside a conic program: the box `[0, scale]`, the nonnegative
//! part of a `p/2`-norm ball, and a scaled simplex. Arbitrary monotone convex
//! sets are rejected at construction.

use crate::error::{Error, Result};
use crate::Vec64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq)]
pub enum BaseSetKind {
    /// `{t : 0 ≤ t_k ≤ scale_k}`.
    Box,
    /// `{t ≥ 0 : ‖t ./ scale‖_{p/2} ≤ 1}` for `p ≥ 2` (so the ℓ_p ball of the
    /// ambient space becomes an ellitope with coordinate matrices).
    PBall(f64),
    /// `{t ≥ 0 : Σ_k t_k / scale_k ≤ 1}`.
    SimplexScaled,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaseSet {
    kind: BaseSetKind,
    scale: Vec64,
}

impl BaseSet {
    pub fn new(kind: BaseSetKind, dim: usize) -> Result<Self> {
        Self::with_scale(kind, Vec64::from_element(dim, 1.0))
    }

    pub fn with_scale(kind: BaseSetKind, scale: Vec64) -> Result<Self> {
        if scale.len() == 0 {
            return Err(Error::Geometry("base set must have dimension >= 1".into()));
        }
        if scale.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::Geometry(
                "base set scale entries must be positive and finite".into(),
            ));
        }
        if let BaseSetKind::PBall(p) = kind {
            if !(p >= 2.0) || !p.is_finite() {
                return Err(Error::Geometry(format!(
                    "p-ball base set requires finite p >= 2, got {p}"
                )));
            }
        }
        Ok(BaseSet { kind, scale })
    }

    pub fn unit_box(dim: usize) -> Self {
        BaseSet::new(BaseSetKind::Box, dim).expect("dim >= 1")
    }

    /// The base set of the segment `[0,1]`: what an ellipsoid uses (`K = 1`).
    pub fn segment() -> Self {
        BaseSet::unit_box(1)
    }

    pub fn kind(&self) -> &BaseSetKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.scale.len()
    }

    pub fn scale(&self) -> &Vec64 {
        &self.scale
    }

    /// Support function `φ_𝒯(y) = sup_{t∈𝒯} yᵀt` in closed form.
    pub fn support(&self, y: &Vec64) -> Result<f64> {
        if y.len() != self.dim() {
            return Err(Error::dim("support_function", self.dim(), y.len()));
        }
        let pos = |v: f64| v.max(0.0);
        Ok(match self.kind {
            BaseSetKind::Box => y
                .iter()
                .zip(self.scale.iter())
                .map(|(&yk, &ck)| pos(yk * ck))
                .sum(),
            BaseSetKind::SimplexScaled => y
                .iter()
                .zip(self.scale.iter())
                .map(|(&yk, &ck)| pos(yk * ck))
                .fold(0.0, f64::max),
            BaseSetKind::PBall(p) => {
                // dual exponent of p/2: (p/2)* = p/(p-2), +inf at p = 2
                let scaled: Vec<f64> = y
                    .iter()
                    .zip(self.scale.iter())
                    .map(|(&yk, &ck)| pos(yk * ck))
                    .collect();
                if p <= 2.0 {
                    scaled.into_iter().fold(0.0, f64::max)
                } else {
                    let q = p / (p - 2.0);
                    scaled.into_iter().map(|v| v.powf(q)).sum::<f64>().powf(1.0 / q)
                }
            }
        })
    }

    /// Gauge of a nonnegative vector with respect to this set: the smallest
    /// `s ≥ 0` with `t/s` in the set. Members are exactly `gauge ≤ 1`.
    pub fn gauge_nonneg(&self, t: &Vec64) -> Result<f64> {
        if t.len() != self.dim() {
            return Err(Error::dim("base gauge", self.dim(), t.len()));
        }
        if t.iter().any(|&v| v < -1e-12) {
            return Err(Error::Domain("base gauge needs a nonnegative vector".into()));
        }
        let scaled: Vec<f64> = t
            .iter()
            .zip(self.scale.iter())
            .map(|(&tk, &ck)| tk.max(0.0) / ck)
            .collect();
        Ok(match self.kind {
            BaseSetKind::Box => scaled.into_iter().fold(0.0, f64::max),
            BaseSetKind::SimplexScaled => scaled.into_iter().sum(),
            BaseSetKind::PBall(p) => {
                let r = p / 2.0;
                scaled.into_iter().map(|v| v.powf(r)).sum::<f64>().powf(1.0 / r)
            }
        })
    }

    /// Membership of a nonnegative vector, up to `tol` on the gauge.
    pub fn contains(&self, t: &Vec64, tol: f64) -> bool {
        if t.iter().any(|&v| v < -tol) {
            return false;
        }
        match self.gauge_nonneg(t) {
            Ok(g) => g <= 1.0 + tol,
            Err(_) => false,
        }
    }

    /// Structural diagnostics: empty when the set is well-formed.
    pub fn validate(&self) -> Vec<String> {
        let mut report = Vec::new();
        if self.scale.iter().any(|&s| !(s > 0.0)) {
            report.push("base set has nonpositive scale entry".into());
        }
        if let BaseSetKind::PBall(p) = self.kind {
            if !(p >= 2.0) {
                report.push(format!("p-ball base set with p = {p} < 2"));
            }
        }
        report
    }
}

#[derive(Serialize, Deserialize)]
struct BaseSetDto {
    kind: String,
    #[serde(rename = "K")]
    k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scale: Option<Vec<f64>>,
}

impl Serialize for BaseSet {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let (kind, p) = match self.kind {
            BaseSetKind::Box => ("box", None),
            BaseSetKind::PBall(p) => ("p-ball", Some(p)),
            BaseSetKind::SimplexScaled => ("simplex-scaled", None),
        };
        let all_ones = self.scale.iter().all(|&s| s == 1.0);
        BaseSetDto {
            kind: kind.to_string(),
            k: self.dim(),
            p,
            scale: if all_ones {
                None
            } else {
                Some(self.scale.iter().cloned().collect())
            },
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for BaseSet {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let dto = BaseSetDto::deserialize(de)?;
        let kind = match dto.kind.as_str() {
            "box" => BaseSetKind::Box,
            "p-ball" => BaseSetKind::PBall(
                dto.p
                    .ok_or_else(|| D::Error::custom("p-ball base set needs field `p`"))?,
            ),
            "simplex-scaled" => BaseSetKind::SimplexScaled,
            other => return Err(D::Error::custom(format!("unknown base set kind `{other}`"))),
        };
        let scale = match dto.scale {
            Some(v) => {
                if v.len() != dto.k {
                    return Err(D::Error::custom("scale length differs from K"));
                }
                Vec64::from_vec(v)
            }
            None => Vec64::from_element(dto.k, 1.0),
        };
        BaseSet::with_scale(kind, scale).map_err(D::Error::custom)
    }
}
