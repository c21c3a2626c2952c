//! Spectratopes: sets `{x = Py : ∃r ∈ ℛ, S_i[y]² ⪯ r_i I_{d_i}, i ≤ I}` with
//! `S_i[y] = Σ_j y_j S^{ij}` symmetric and the linear map `y ↦ (S_i[y])_i`
//! injective. Every ellitope with rank-one quadratic matrices embeds as a
//! spectratope with 1×1 blocks.

use super::base::BaseSet;
use super::ellitope::{gauge_bisect, Ellitope};
use super::linalg::{mat_from_rows, mat_to_rows, min_eigenvalue, symmetrize};
use crate::error::{Error, Result};
use crate::{Mat, Vec64};
use serde::{Deserialize, Serialize};

/// One block of spectratopic data: the coordinate matrices `S^{ij}`, `j ≤ N`,
/// all symmetric of size `d_i`.
#[derive(Clone, Debug)]
pub struct SpectraBlock {
    coord_mats: Vec<Mat>,
    dim: usize,
}

impl SpectraBlock {
    pub fn new(coord_mats: Vec<Mat>) -> Result<Self> {
        if coord_mats.is_empty() {
            return Err(Error::Geometry("spectratope block with no coordinates".into()));
        }
        let dim = coord_mats[0].nrows();
        for (j, m) in coord_mats.iter().enumerate() {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::dim(
                    "spectratope block",
                    format!("{dim}x{dim}"),
                    format!("{}x{} (coordinate {j})", m.nrows(), m.ncols()),
                ));
            }
        }
        let coord_mats = coord_mats.iter().map(symmetrize).collect();
        Ok(SpectraBlock { coord_mats, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coord_mats(&self) -> &[Mat] {
        &self.coord_mats
    }

    /// `S_i[v] = Σ_j v_j S^{ij}`.
    pub fn linear(&self, v: &Vec64) -> Mat {
        let mut acc = Mat::zeros(self.dim, self.dim);
        for (j, m) in self.coord_mats.iter().enumerate() {
            if v[j] != 0.0 {
                acc += m * v[j];
            }
        }
        acc
    }

    /// `λ_max(S_i[v]²) = ‖S_i[v]‖²_{2,2}`.
    pub fn square_top_eigenvalue(&self, v: &Vec64) -> f64 {
        let s = self.linear(v);
        s.symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(0.0f64, |a, &b| a.max(b.abs()))
            .powi(2)
    }

    /// `𝒮_i[G] = Σ_{p,q} G_{pq} S^{ip} S^{iq}` via the eigendecomposition of
    /// the symmetric `G` (exact by linearity: `𝒮_i[uuᵀ] = S_i[u]²`).
    pub fn quadratic_map(&self, g: &Mat) -> Mat {
        let eig = symmetrize(g).symmetric_eigen();
        let mut acc = Mat::zeros(self.dim, self.dim);
        for (idx, &lam) in eig.eigenvalues.iter().enumerate() {
            if lam == 0.0 {
                continue;
            }
            let u: Vec64 = eig.eigenvectors.column(idx).into();
            let s = self.linear(&u);
            acc += &s * &s * lam;
        }
        acc
    }

    /// The literal double sum, used to spot-check `quadratic_map`.
    pub fn quadratic_map_naive(&self, g: &Mat) -> Mat {
        let n = self.coord_mats.len();
        let mut acc = Mat::zeros(self.dim, self.dim);
        for p in 0..n {
            for q in 0..n {
                if g[(p, q)] != 0.0 {
                    acc += &self.coord_mats[p] * &self.coord_mats[q] * g[(p, q)];
                }
            }
        }
        acc
    }
}

#[derive(Clone, Debug)]
pub struct Spectratope {
    p_map: Option<Mat>,
    blocks: Vec<SpectraBlock>,
    base: BaseSet,
    latent: usize,
}

impl Spectratope {
    pub fn new(blocks: Vec<SpectraBlock>, base: BaseSet) -> Result<Self> {
        Self::with_map(None, blocks, base)
    }

    pub fn with_map(p_map: Option<Mat>, blocks: Vec<SpectraBlock>, base: BaseSet) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Geometry("spectratope needs at least one block".into()));
        }
        if blocks.len() != base.dim() {
            return Err(Error::dim("spectratope base", blocks.len(), base.dim()));
        }
        let latent = blocks[0].coord_mats.len();
        for b in &blocks {
            if b.coord_mats.len() != latent {
                return Err(Error::dim(
                    "spectratope coordinates",
                    latent,
                    b.coord_mats.len(),
                ));
            }
        }
        if let Some(p) = &p_map {
            if p.ncols() != latent {
                return Err(Error::dim("spectratope P map", latent, p.ncols()));
            }
        }
        let set = Spectratope {
            p_map,
            blocks,
            base,
            latent,
        };
        let gram_min = min_eigenvalue(&set.gram_matrix());
        if gram_min <= 1e-10 {
            return Err(Error::Geometry(format!(
                "spectratope map y -> (S_i[y])_i is not injective (Gram min eigenvalue {gram_min:.3e})"
            )));
        }
        Ok(set)
    }

    /// Unit Euclidean ball of dimension `m` as a basic spectratope: one block
    /// `S[h] = [[0, h],[hᵀ, 0]]` with `ℛ = [0,1]`.
    pub fn unit_ball(m: usize) -> Self {
        let block = SpectraBlock::new(
            (0..m).map(|j| arrow_unit(m, j)).collect(),
        )
        .expect("valid");
        Spectratope::new(vec![block], BaseSet::segment()).expect("valid")
    }

    /// Embed an ellitope whose `T_k` all have rank one (`T_k = a_k a_kᵀ`) as a
    /// spectratope with 1×1 blocks `S_k[x] = a_kᵀ x`.
    pub fn from_rank1_ellitope(e: &Ellitope) -> Result<Self> {
        let n = e.latent_dim();
        let mut blocks = Vec::with_capacity(e.k());
        for (k, t) in e.tks().iter().enumerate() {
            let eig = t.clone().symmetric_eigen();
            let mut top = 0usize;
            for i in 0..n {
                if eig.eigenvalues[i] > eig.eigenvalues[top] {
                    top = i;
                }
            }
            let lam = eig.eigenvalues[top];
            let resid: f64 = (0..n)
                .filter(|&i| i != top)
                .map(|i| eig.eigenvalues[i].abs())
                .sum();
            if resid > 1e-9 * lam.max(1e-300) {
                return Err(Error::Geometry(format!(
                    "T_{k} has rank > 1; only rank-one ellitopes embed with 1x1 blocks"
                )));
            }
            let a = eig.eigenvectors.column(top) * lam.sqrt();
            let mats = (0..n)
                .map(|j| Mat::from_element(1, 1, a[j]))
                .collect::<Vec<_>>();
            blocks.push(SpectraBlock::new(mats)?);
        }
        Spectratope::with_map(e.p_map().cloned(), blocks, e.base().clone())
    }

    pub fn is_basic(&self) -> bool {
        self.p_map.is_none()
    }

    pub fn latent_dim(&self) -> usize {
        self.latent
    }

    pub fn ambient_dim(&self) -> usize {
        match &self.p_map {
            Some(p) => p.nrows(),
            None => self.latent,
        }
    }

    pub fn blocks(&self) -> &[SpectraBlock] {
        &self.blocks
    }

    pub fn base(&self) -> &BaseSet {
        &self.base
    }

    pub fn p_map(&self) -> Option<&Mat> {
        self.p_map.as_ref()
    }

    /// Spectratopic dimension `D = Σ_i d_i`.
    pub fn spectra_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim()).sum()
    }

    /// Gram matrix `Q_{jl} = Σ_i Tr(S^{ij} S^{il})` of the coordinate map;
    /// positive definiteness certifies injectivity of `y ↦ (S_i[y])_i`.
    pub fn gram_matrix(&self) -> Mat {
        let n = self.latent;
        let mut q = Mat::zeros(n, n);
        for b in &self.blocks {
            for j in 0..n {
                for l in j..n {
                    let tr = (&b.coord_mats[j] * &b.coord_mats[l]).trace();
                    q[(j, l)] += tr;
                    if l != j {
                        q[(l, j)] += tr;
                    }
                }
            }
        }
        q
    }

    /// Minkowski gauge of a basic spectratope, by the same bisection contract
    /// as the ellitope gauge (membership per candidate `s` is an eigenvalue
    /// test on the blocks).
    pub fn gauge(&self, v: &Vec64) -> Result<f64> {
        if !self.is_basic() {
            return Err(Error::Domain(
                "gauge is defined for basic spectratopes only".into(),
            ));
        }
        if v.len() != self.latent {
            return Err(Error::dim("spectratope gauge", self.latent, v.len()));
        }
        let tops = Vec64::from_iterator(
            self.blocks.len(),
            self.blocks.iter().map(|b| b.square_top_eigenvalue(v)),
        );
        if tops.iter().all(|&c| c == 0.0) {
            return Ok(0.0);
        }
        let est = self.base.gauge_nonneg(&tops)?.sqrt();
        gauge_bisect(est, |s| self.base.contains(&(&tops / (s * s)), 0.0))
    }

    pub fn contains(&self, v: &Vec64, tol: f64) -> Result<bool> {
        Ok(self.gauge(v)? <= 1.0 + tol)
    }

    /// Structural diagnostics: Gram singularity, malformed base, and a
    /// spot-check of the identity `𝒮_i[Σ_j g_j g_jᵀ] = Σ_j S_i[g_j]²` on a
    /// fixed pseudo-random family.
    pub fn validate(&self) -> Vec<String> {
        let mut report = self.base.validate();
        let gram_min = min_eigenvalue(&self.gram_matrix());
        if gram_min <= 1e-10 {
            report.push(format!(
                "coordinate map not injective: Gram min eigenvalue {gram_min:.3e}"
            ));
        }
        // deterministic pseudo-random directions for the identity spot check
        let n = self.latent;
        let gs: Vec<Vec64> = (0..3)
            .map(|t| {
                Vec64::from_iterator(n, (0..n).map(|j| (((j + 1) * (t + 2)) as f64 * 0.7254).sin()))
            })
            .collect();
        let mut g_sum = Mat::zeros(n, n);
        for g in &gs {
            g_sum += g * g.transpose();
        }
        for (i, b) in self.blocks.iter().enumerate() {
            let via_map = b.quadratic_map_naive(&g_sum);
            let mut via_squares = Mat::zeros(b.dim(), b.dim());
            for g in &gs {
                let s = b.linear(g);
                via_squares += &s * &s;
            }
            let denom = via_squares.norm().max(1e-300);
            let rel = (via_map - via_squares).norm() / denom;
            if rel > 1e-10 {
                report.push(format!(
                    "block {i}: quadratic-map identity violated (relative error {rel:.3e})"
                ));
            }
        }
        report
    }
}

/// `[[0, M],[Mᵀ, 0]]` for a rectangular `M` (r×c), a symmetric matrix of size
/// `r + c` whose square is `diag(MMᵀ, MᵀM)`.
pub fn arrow(m: &Mat) -> Mat {
    let (r, c) = (m.nrows(), m.ncols());
    let mut out = Mat::zeros(r + c, r + c);
    out.view_mut((0, r), (r, c)).copy_from(m);
    out.view_mut((r, 0), (c, r)).copy_from(&m.transpose());
    out
}

/// Arrow matrix of the `j`-th unit vector in dimension `m` (size `m+1`).
pub fn arrow_unit(m: usize, j: usize) -> Mat {
    let mut out = Mat::zeros(m + 1, m + 1);
    out[(j, m)] = 1.0;
    out[(m, j)] = 1.0;
    out
}

#[derive(Serialize, Deserialize)]
struct SpectratopeDto {
    #[serde(rename = "S")]
    blocks: Vec<Vec<Vec<Vec<f64>>>>,
    base: BaseSet,
    #[serde(rename = "P", default, skip_serializing_if = "Option::is_none")]
    p_map: Option<Vec<Vec<f64>>>,
}

impl Serialize for Spectratope {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        SpectratopeDto {
            blocks: self
                .blocks
                .iter()
                .map(|b| b.coord_mats.iter().map(mat_to_rows).collect())
                .collect(),
            base: self.base.clone(),
            p_map: self.p_map.as_ref().map(mat_to_rows),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Spectratope {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let dto = SpectratopeDto::deserialize(de)?;
        let blocks = dto
            .blocks
            .iter()
            .map(|mats| {
                let coord = mats
                    .iter()
                    .map(|rows| mat_from_rows(rows))
                    .collect::<Result<Vec<_>>>()?;
                SpectraBlock::new(coord)
            })
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        let p_map = dto
            .p_map
            .as_ref()
            .map(|rows| mat_from_rows(rows))
            .transpose()
            .map_err(D::Error::custom)?;
        Spectratope::with_map(p_map, blocks, dto.base).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(s: &[f64]) -> Vec64 {
        Vec64::from_column_slice(s)
    }

    #[test]
    fn ball_spectratope_gauge_is_euclidean() {
        let ball = Spectratope::unit_ball(3);
        assert_abs_diff_eq!(ball.gauge(&v(&[0.3, 0.0, 0.4])).unwrap(), 0.5, epsilon = 1e-8);
        assert_eq!(ball.spectra_dim(), 4);
    }

    #[test]
    fn negated_block_does_not_change_the_set_but_bad_gram_is_flagged() {
        // negating a block leaves S^2 unchanged; a genuinely broken spectratope
        // is one whose coordinate map loses injectivity
        let ball = Spectratope::unit_ball(2);
        assert!(ball.validate().is_empty());
        let zero_block = SpectraBlock::new(vec![Mat::zeros(2, 2), Mat::zeros(2, 2)]);
        assert!(zero_block.is_ok());
        let bad = Spectratope::new(vec![zero_block.unwrap()], BaseSet::segment());
        assert!(bad.is_err());
    }

    #[test]
    fn quadratic_map_matches_naive_double_sum() {
        let ball = Spectratope::unit_ball(3);
        let g = Mat::from_row_slice(
            3,
            3,
            &[2.0, 0.3, -0.1, 0.3, 1.0, 0.2, -0.1, 0.2, 0.5],
        );
        let b = &ball.blocks()[0];
        let a = b.quadratic_map(&g);
        let c = b.quadratic_map_naive(&g);
        assert_abs_diff_eq!((a - c).norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn rank1_embedding_preserves_gauge() {
        let e = Ellitope::unit_box(3);
        let s = Spectratope::from_rank1_ellitope(&e).unwrap();
        let x = v(&[0.4, -0.9, 0.2]);
        assert_abs_diff_eq!(
            s.gauge(&x).unwrap(),
            e.gauge(&x).unwrap(),
            epsilon = 1e-8
        );
    }

    #[test]
    fn serde_round_trip() {
        let s = Spectratope::unit_ball(2);
        let text = serde_json::to_string(&s).unwrap();
        let back: Spectratope = serde_json::from_str(&text).unwrap();
        assert_eq!(back.spectra_dim(), 3);
        assert_abs_diff_eq!(
            back.gauge(&v(&[0.6, 0.8])).unwrap(),
            1.0,
            epsilon = 1e-8
        );
    }
}
