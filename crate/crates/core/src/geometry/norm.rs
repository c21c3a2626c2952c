//! The recovery-error norm `‖u‖ = max_ℓ √(uᵀR_ℓu)`: a maximum of Euclidean
//! seminorms with `R_ℓ ⪰ 0` and `Σ_ℓ R_ℓ ≻ 0`.

use super::linalg::{mat_from_rows, mat_to_rows, min_eigenvalue, psd_sqrt, symmetrize};
use crate::error::{Error, Result};
use crate::{Mat, Vec64};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug)]
pub struct ErrorNorm {
    rs: Vec<Mat>,
    sqrts: Vec<Mat>,
}

impl ErrorNorm {
    pub fn new(rs: Vec<Mat>) -> Result<Self> {
        if rs.is_empty() {
            return Err(Error::Geometry("error norm needs at least one R_l".into()));
        }
        let nu = rs[0].nrows();
        let mut sum = Mat::zeros(nu, nu);
        let mut cleaned = Vec::with_capacity(rs.len());
        for (l, r) in rs.iter().enumerate() {
            if r.nrows() != nu || r.ncols() != nu {
                return Err(Error::dim(
                    "error norm R_l",
                    format!("{nu}x{nu}"),
                    format!("{}x{}", r.nrows(), r.ncols()),
                ));
            }
            let sym = symmetrize(r);
            let me = min_eigenvalue(&sym);
            if me < -1e-10 {
                return Err(Error::Geometry(format!(
                    "R_{l} is not PSD (min eigenvalue {me:.3e})"
                )));
            }
            sum += &sym;
            cleaned.push(sym);
        }
        if min_eigenvalue(&sum) <= 1e-10 {
            return Err(Error::Geometry(
                "sum of R_l is singular; the maximum of seminorms is not a norm".into(),
            ));
        }
        let sqrts = cleaned.iter().map(psd_sqrt).collect();
        Ok(ErrorNorm { rs: cleaned, sqrts })
    }

    /// Plain Euclidean norm: `L = 1`, `R_1 = I`.
    pub fn euclidean(nu: usize) -> Self {
        ErrorNorm::new(vec![Mat::identity(nu, nu)]).expect("valid")
    }

    pub fn dim(&self) -> usize {
        self.rs[0].nrows()
    }

    pub fn l(&self) -> usize {
        self.rs.len()
    }

    pub fn rs(&self) -> &[Mat] {
        &self.rs
    }

    /// Precomputed PSD square roots `R_ℓ^{1/2}`.
    pub fn sqrts(&self) -> &[Mat] {
        &self.sqrts
    }

    pub fn eval(&self, u: &Vec64) -> Result<f64> {
        if u.len() != self.dim() {
            return Err(Error::dim("error norm", self.dim(), u.len()));
        }
        Ok(self
            .rs
            .iter()
            .map(|r| (u.transpose() * r * u)[(0, 0)].max(0.0).sqrt())
            .fold(0.0, f64::max))
    }

    pub fn validate(&self) -> Vec<String> {
        let mut report = Vec::new();
        let nu = self.dim();
        let mut sum = Mat::zeros(nu, nu);
        for (l, r) in self.rs.iter().enumerate() {
            let me = min_eigenvalue(r);
            if me < -1e-10 {
                report.push(format!("R_{l} not PSD: min eigenvalue {me:.3e}"));
            }
            sum += r;
        }
        if min_eigenvalue(&sum) <= 1e-10 {
            report.push("sum of R_l singular".into());
        }
        report
    }
}

#[derive(Serialize, Deserialize)]
struct ErrorNormDto {
    #[serde(rename = "R")]
    rs: Vec<Vec<Vec<f64>>>,
}

impl Serialize for ErrorNorm {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ErrorNormDto {
            rs: self.rs.iter().map(mat_to_rows).collect(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for ErrorNorm {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let dto = ErrorNormDto::deserialize(de)?;
        let rs = dto
            .rs
            .iter()
            .map(|rows| mat_from_rows(rows))
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        ErrorNorm::new(rs).map_err(D::Error::custom)
    }
}
