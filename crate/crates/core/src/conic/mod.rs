//! A thin conic-program builder and solve contract: linear, second-order and
//! PSD cones over scalar/matrix variables, affine constraints, linear
//! objective. Every semidefinite program in the crate is assembled through
//! this layer; the engine behind [`ConicProgram::solve`] is Clarabel's
//! interior-point method.

pub mod encode;
pub mod expr;

pub use expr::{LinExpr, MatExpr};

use crate::error::{Error, Result};
use crate::Mat;
use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus,
    SupportedConeT::{self, NonnegativeConeT, PSDTriangleConeT, SecondOrderConeT, ZeroConeT},
};
use std::fmt;
use std::io::Write;
use std::sync::Once;

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NumericalFailure => "numerical-failure",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug)]
pub struct SolveSettings {
    /// Relative duality-gap tolerance.
    pub gap_tol: f64,
    /// Feasibility-residual tolerance.
    pub feas_tol: f64,
    pub max_iter: u32,
    pub verbose: bool,
    /// When set, the assembled program is dumped to this path before solving.
    pub dump_path: Option<std::path::PathBuf>,
}

impl Default for SolveSettings {
    fn default() -> Self {
        SolveSettings {
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            max_iter: 200,
            verbose: false,
            dump_path: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: u32,
}

impl ConicSolution {
    pub fn value(&self, e: &LinExpr) -> f64 {
        e.eval(&self.x)
    }

    pub fn matrix(&self, m: &MatExpr) -> Mat {
        m.eval(&self.x)
    }

    pub fn vector(&self, exprs: &[LinExpr]) -> crate::Vec64 {
        crate::Vec64::from_iterator(exprs.len(), exprs.iter().map(|e| e.eval(&self.x)))
    }
}

#[derive(Clone, Debug)]
enum ConeSpec {
    Zero(usize),
    Nonneg(usize),
    Soc(usize),
    PsdTriangle(usize),
}

/// Handle to a symmetric matrix variable: upper-triangle scalars mirrored
/// into a full matrix expression.
#[derive(Clone, Debug)]
pub struct SymMatVar {
    base: usize,
    dim: usize,
}

impl SymMatVar {
    pub fn dim(&self) -> usize {
        self.dim
    }

    fn tri_index(&self, i: usize, j: usize) -> usize {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        self.base + c * (c + 1) / 2 + r
    }

    pub fn entry(&self, i: usize, j: usize) -> LinExpr {
        LinExpr::variable(self.tri_index(i, j))
    }

    pub fn as_expr(&self) -> MatExpr {
        let mut out = MatExpr::zeros(self.dim, self.dim);
        for j in 0..self.dim {
            for i in 0..self.dim {
                *out.entry_mut(i, j) = self.entry(i, j);
            }
        }
        out
    }

    /// `Tr(C · X)` for numeric symmetric `C`.
    pub fn trace_product(&self, c: &Mat) -> LinExpr {
        let mut e = LinExpr::zero();
        for j in 0..self.dim {
            for i in 0..=j {
                let coeff = if i == j {
                    c[(i, i)]
                } else {
                    c[(i, j)] + c[(j, i)]
                };
                e.push(self.tri_index(i, j), coeff);
            }
        }
        e.compact();
        e
    }

    pub fn trace(&self) -> LinExpr {
        let mut e = LinExpr::zero();
        for i in 0..self.dim {
            e.push(self.tri_index(i, i), 1.0);
        }
        e
    }

    pub fn value(&self, sol: &ConicSolution) -> Mat {
        Mat::from_fn(self.dim, self.dim, |i, j| sol.x[self.tri_index(i, j)])
    }
}

/// Opaque handle to a registered constraint block.
#[derive(Clone, Copy, Debug)]
pub struct ConstraintHandle(pub usize);

#[derive(Debug, Default)]
pub struct ConicProgram {
    nvars: usize,
    objective: LinExpr,
    objective_constant: f64,
    rows: Vec<LinExpr>,
    cones: Vec<ConeSpec>,
}

impl ConicProgram {
    pub fn new() -> Self {
        ConicProgram::default()
    }

    pub fn num_vars(&self) -> usize {
        self.nvars
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// A free scalar variable.
    pub fn scalar(&mut self) -> LinExpr {
        let idx = self.nvars;
        self.nvars += 1;
        LinExpr::variable(idx)
    }

    pub fn scalars(&mut self, n: usize) -> Vec<LinExpr> {
        (0..n).map(|_| self.scalar()).collect()
    }

    /// A scalar constrained to be nonnegative.
    pub fn nonneg_scalar(&mut self) -> LinExpr {
        let v = self.scalar();
        self.ge_zero(v.clone());
        v
    }

    pub fn nonneg_scalars(&mut self, n: usize) -> Vec<LinExpr> {
        (0..n).map(|_| self.nonneg_scalar()).collect()
    }

    /// A free rectangular matrix variable.
    pub fn mat_var(&mut self, nrows: usize, ncols: usize) -> MatExpr {
        let mut out = MatExpr::zeros(nrows, ncols);
        for j in 0..ncols {
            for i in 0..nrows {
                *out.entry_mut(i, j) = self.scalar();
            }
        }
        out
    }

    /// A symmetric matrix variable (not constrained PSD by itself).
    pub fn sym_var(&mut self, dim: usize) -> SymMatVar {
        let base = self.nvars;
        self.nvars += dim * (dim + 1) / 2;
        SymMatVar { base, dim }
    }

    /// A symmetric PSD matrix variable.
    pub fn psd_var(&mut self, dim: usize) -> SymMatVar {
        let v = self.sym_var(dim);
        self.psd(&v.as_expr()).expect("square by construction");
        v
    }

    pub fn minimize(&mut self, objective: LinExpr) {
        let mut obj = objective;
        obj.compact();
        self.objective_constant = obj.constant_part();
        self.objective = obj;
    }

    pub fn eq_zero(&mut self, e: LinExpr) {
        let mut e = e;
        e.compact();
        self.rows.push(e);
        self.cones.push(ConeSpec::Zero(1));
    }

    /// `e >= 0`.
    pub fn ge_zero(&mut self, e: LinExpr) {
        let mut e = e;
        e.compact();
        self.rows.push(e);
        self.cones.push(ConeSpec::Nonneg(1));
    }

    /// `lhs <= rhs`.
    pub fn le(&mut self, lhs: LinExpr, rhs: LinExpr) {
        self.ge_zero(rhs - lhs);
    }

    /// `‖body‖₂ ≤ head`.
    pub fn soc(&mut self, head: LinExpr, body: &[LinExpr]) {
        let mut h = head;
        h.compact();
        self.rows.push(h);
        for e in body {
            let mut e = e.clone();
            e.compact();
            self.rows.push(e);
        }
        self.cones.push(ConeSpec::Soc(body.len() + 1));
    }

    /// `‖w‖₂² ≤ a·b` with `a, b ≥ 0` implied (rotated second-order cone via
    /// `‖(2w; a−b)‖ ≤ a+b`).
    pub fn quad_le(&mut self, w: &[LinExpr], a: LinExpr, b: LinExpr) {
        let mut body: Vec<LinExpr> = w.iter().map(|e| e.scaled(2.0)).collect();
        body.push(a.clone() - b.clone());
        self.soc(a + b, &body);
    }

    /// Register `M(x) ⪰ 0` for a square matrix expression; the expression is
    /// symmetrized before vectorization.
    pub fn psd(&mut self, m: &MatExpr) -> Result<ConstraintHandle> {
        if m.nrows() != m.ncols() {
            return Err(Error::dim(
                "psd constraint",
                format!("{0}x{0}", m.nrows()),
                format!("{}x{}", m.nrows(), m.ncols()),
            ));
        }
        let d = m.nrows();
        if d == 0 {
            return Ok(ConstraintHandle(self.cones.len()));
        }
        for j in 0..d {
            for i in 0..=j {
                // scaled svec entry of (M + Mᵀ)/2, column-major upper triangle
                let mut e = m.entry(i, j).clone() + m.entry(j, i).clone();
                e = e.scaled(0.5);
                if i != j {
                    e = e.scaled(SQRT2);
                }
                e.compact();
                self.rows.push(e);
            }
        }
        self.cones.push(ConeSpec::PsdTriangle(d));
        Ok(ConstraintHandle(self.cones.len() - 1))
    }

    /// Assemble a 2×2 grid of affine matrix blocks into one symmetric PSD
    /// constraint `[[A, B],[C, D]] ⪰ 0`; diagonal blocks must be square and
    /// dimensions must agree.
    pub fn build_lmi_block(&mut self, blocks: [[&MatExpr; 2]; 2]) -> Result<ConstraintHandle> {
        let [[a, b], [c, d]] = blocks;
        if a.nrows() != a.ncols() || d.nrows() != d.ncols() {
            return Err(Error::dim(
                "lmi diagonal blocks",
                "square",
                format!(
                    "{}x{} and {}x{}",
                    a.nrows(),
                    a.ncols(),
                    d.nrows(),
                    d.ncols()
                ),
            ));
        }
        if b.nrows() != a.nrows() || b.ncols() != d.ncols() || c.nrows() != d.nrows() || c.ncols() != a.ncols() {
            return Err(Error::dim(
                "lmi off-diagonal blocks",
                format!("{}x{} / {}x{}", a.nrows(), d.ncols(), d.nrows(), a.ncols()),
                format!("{}x{} / {}x{}", b.nrows(), b.ncols(), c.nrows(), c.ncols()),
            ));
        }
        let grid = MatExpr::block2x2(a, b, c, d);
        self.psd(&grid)
    }

    fn clarabel_cones(&self) -> Vec<SupportedConeT<f64>> {
        // merge consecutive scalar cones of the same kind to keep the cone
        // list short
        let mut out: Vec<SupportedConeT<f64>> = Vec::new();
        for c in &self.cones {
            match c {
                ConeSpec::Zero(n) => {
                    if let Some(ZeroConeT(k)) = out.last_mut() {
                        *k += n;
                    } else {
                        out.push(ZeroConeT(*n));
                    }
                }
                ConeSpec::Nonneg(n) => {
                    if let Some(NonnegativeConeT(k)) = out.last_mut() {
                        *k += n;
                    } else {
                        out.push(NonnegativeConeT(*n));
                    }
                }
                ConeSpec::Soc(n) => out.push(SecondOrderConeT(*n)),
                ConeSpec::PsdTriangle(d) => out.push(PSDTriangleConeT(*d)),
            }
        }
        out
    }

    /// Solve and report. `status == Optimal` implies the reported residuals
    /// and relative gap are within the requested tolerances; the same program
    /// solved twice returns identical output.
    pub fn solve(&self, settings: &SolveSettings) -> Result<ConicSolution> {
        static BLAS_SINGLE_THREAD: Once = Once::new();
        BLAS_SINGLE_THREAD.call_once(|| {
            // keep dense kernels deterministic and avoid oversubscription
            if std::env::var_os("OPENBLAS_NUM_THREADS").is_none() {
                std::env::set_var("OPENBLAS_NUM_THREADS", "1");
            }
        });

        if let Some(path) = &settings.dump_path {
            let mut file = std::fs::File::create(path)?;
            self.dump(&mut file)?;
        }

        let nvars = self.nvars.max(1);
        let mut q = vec![0.0; nvars];
        for &(i, c) in &self.objective.terms {
            q[i] += c;
        }

        // rows are e(x) = Fx + g with e(x) in cone; clarabel wants Ax + s = b,
        // s in cone, so A = -F and b = g
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        let mut b = vec![0.0; self.rows.len()];
        for (r, row) in self.rows.iter().enumerate() {
            b[r] = row.constant_part();
            for &(i, c) in &row.terms {
                triplets.push((r, i, -c));
            }
        }
        triplets.sort_unstable_by_key(|&(r, c, _)| (c, r));
        let nnz = triplets.len();
        let mut colptr = vec![0usize; nvars + 1];
        let mut rowval = Vec::with_capacity(nnz);
        let mut nzval = Vec::with_capacity(nnz);
        for &(r, c, v) in &triplets {
            colptr[c + 1] += 1;
            rowval.push(r);
            nzval.push(v);
        }
        for c in 0..nvars {
            colptr[c + 1] += colptr[c];
        }
        let a = CscMatrix::new(self.rows.len(), nvars, colptr, rowval, nzval);
        let p = CscMatrix::zeros((nvars, nvars));

        // chordal decomposition splits block-arrow LMIs (the shape of every
        // certificate constraint here) into small cliques
        let clarabel_settings = DefaultSettingsBuilder::default()
            .verbose(settings.verbose)
            .max_iter(settings.max_iter)
            .tol_gap_abs(settings.gap_tol)
            .tol_gap_rel(settings.gap_tol)
            .tol_feas(settings.feas_tol)
            .chordal_decomposition_enable(true)
            .chordal_decomposition_merge_method("clique_graph".to_string())
            .chordal_decomposition_compact(true)
            .chordal_decomposition_complete_dual(true)
            .direct_solve_method("faer".to_string())
            .build()
            .map_err(|e| Error::Config(format!("solver settings: {e}")))?;

        let cones = self.clarabel_cones();
        let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, clarabel_settings);
        solver.solve();
        let sol = &solver.solution;

        let status = match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                SolveStatus::Infeasible
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                SolveStatus::Unbounded
            }
            _ => SolveStatus::NumericalFailure,
        };

        let gap = {
            let p = sol.obj_val;
            let d = sol.obj_val_dual;
            (p - d).abs() / f64::max(1.0, f64::max(p.abs(), d.abs()))
        };

        Ok(ConicSolution {
            status,
            x: sol.x.clone(),
            objective: sol.obj_val + self.objective_constant,
            primal_residual: sol.r_prim,
            dual_residual: sol.r_dual,
            gap,
            iterations: sol.iterations,
        })
    }

    /// Like [`solve`], but any non-optimal status becomes an error.
    pub fn solve_optimal(&self, settings: &SolveSettings) -> Result<ConicSolution> {
        let sol = self.solve(settings)?;
        if sol.status != SolveStatus::Optimal {
            return Err(Error::Solver { status: sol.status });
        }
        Ok(sol)
    }

    /// Text dump of the assembled program in a CBF-style sparse triplet
    /// layout (PSD blocks appear in scaled-triangle vectorized form), for
    /// external cross-checking.
    pub fn dump(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "# conic program dump (CBF-style; PSD rows are scaled svec)")?;
        writeln!(w, "VER 1")?;
        writeln!(w, "OBJSENSE\nMIN")?;
        writeln!(w, "VAR\n{} 1\nF {}", self.nvars, self.nvars)?;
        writeln!(w, "CON\n{} {}", self.rows.len(), self.cones.len())?;
        for c in &self.cones {
            match c {
                ConeSpec::Zero(n) => writeln!(w, "L= {n}")?,
                ConeSpec::Nonneg(n) => writeln!(w, "L+ {n}")?,
                ConeSpec::Soc(n) => writeln!(w, "Q {n}")?,
                ConeSpec::PsdTriangle(d) => writeln!(w, "SVECPSD {d}")?,
            }
        }
        let obj_nnz = self.objective.terms.len();
        writeln!(w, "OBJACOORD\n{obj_nnz}")?;
        for &(i, c) in &self.objective.terms {
            writeln!(w, "{i} {c:.17e}")?;
        }
        if self.objective_constant != 0.0 {
            writeln!(w, "OBJBCOORD\n{:.17e}", self.objective_constant)?;
        }
        let nnz: usize = self.rows.iter().map(|r| r.terms.len()).sum();
        writeln!(w, "ACOORD\n{nnz}")?;
        for (r, row) in self.rows.iter().enumerate() {
            for &(i, c) in &row.terms {
                writeln!(w, "{r} {i} {c:.17e}")?;
            }
        }
        let bnnz = self.rows.iter().filter(|r| r.constant_part() != 0.0).count();
        writeln!(w, "BCOORD\n{bnnz}")?;
        for (r, row) in self.rows.iter().enumerate() {
            if row.constant_part() != 0.0 {
                writeln!(w, "{r} {:.17e}", row.constant_part())?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn settings() -> SolveSettings {
        SolveSettings::default()
    }

    #[test]
    fn min_x_subject_to_x_ge_3() {
        let mut p = ConicProgram::new();
        let x = p.scalar();
        p.ge_zero(x.clone() - LinExpr::constant(3.0));
        p.minimize(x);
        let sol = p.solve_optimal(&settings()).unwrap();
        assert_abs_diff_eq!(sol.objective, 3.0, epsilon = 1e-7);
    }

    #[test]
    fn min_lambda_identity_dominates_diagonal() {
        // min λ s.t. λI ⪰ diag(1,2) -> 2 (top eigenvalue)
        let mut p = ConicProgram::new();
        let lam = p.scalar();
        let m = MatExpr::scaled_identity(&lam, 2)
            .add_const(&Mat::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]));
        p.psd(&m).unwrap();
        p.minimize(lam);
        let sol = p.solve_optimal(&settings()).unwrap();
        assert_abs_diff_eq!(sol.objective, 2.0, epsilon = 1e-6);
    }

    #[test]
    fn min_t_norm_cone() {
        // min t s.t. ||(3,4)|| <= t -> 5
        let mut p = ConicProgram::new();
        let t = p.scalar();
        p.soc(t.clone(), &[LinExpr::constant(3.0), LinExpr::constant(4.0)]);
        p.minimize(t);
        let sol = p.solve_optimal(&settings()).unwrap();
        assert_abs_diff_eq!(sol.objective, 5.0, epsilon = 1e-7);
    }

    #[test]
    fn lmi_block_diag_scalars() {
        // [[λI,0],[0,μI]] PSD is exactly λ,μ >= 0
        let mut p = ConicProgram::new();
        let lam = p.scalar();
        let mu = p.scalar();
        let a = MatExpr::scaled_identity(&lam, 2);
        let d = MatExpr::scaled_identity(&mu, 2);
        let z = MatExpr::zeros(2, 2);
        p.build_lmi_block([[&a, &z], [&z, &d]]).unwrap();
        p.minimize(lam.clone() + mu.clone());
        let sol = p.solve_optimal(&settings()).unwrap();
        assert_abs_diff_eq!(sol.objective, 0.0, epsilon = 1e-7);
        assert!(sol.value(&lam) >= -1e-8);
        assert!(sol.value(&mu) >= -1e-8);
    }

    #[test]
    fn lmi_correlation_bound() {
        // [[1,c],[c,1]] PSD iff |c| <= 1: maximize c
        let mut p = ConicProgram::new();
        let c = p.scalar();
        let mut m = MatExpr::from_const(&Mat::identity(2, 2));
        *m.entry_mut(0, 1) = c.clone();
        *m.entry_mut(1, 0) = c.clone();
        p.psd(&m).unwrap();
        p.minimize(c.scaled(-1.0));
        let sol = p.solve_optimal(&settings()).unwrap();
        assert_abs_diff_eq!(sol.value(&c), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn indefinite_constant_lmi_is_infeasible() {
        // [[0,I],[I,0]] cannot be PSD
        let mut p = ConicProgram::new();
        let z = MatExpr::zeros(2, 2);
        let i = MatExpr::from_const(&Mat::identity(2, 2));
        p.build_lmi_block([[&z, &i], [&i, &z]]).unwrap();
        p.minimize(LinExpr::zero());
        let sol = p.solve(&settings()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn objective_matches_recomputed_primal_value() {
        let mut p = ConicProgram::new();
        let x = p.scalars(3);
        p.soc(
            x[2].clone(),
            &[x[0].clone(), x[1].clone()],
        );
        p.ge_zero(x[0].clone() - LinExpr::constant(1.0));
        p.ge_zero(x[1].clone() - LinExpr::constant(2.0));
        let obj = x[2].clone() + x[0].clone();
        p.minimize(obj.clone());
        let sol = p.solve_optimal(&settings()).unwrap();
        let recomputed = sol.value(&obj);
        let rel = (sol.objective - recomputed).abs() / recomputed.abs().max(1.0);
        assert!(rel <= 1e-7, "rel error {rel}");
    }

    #[test]
    fn resolve_is_deterministic() {
        let build = || {
            let mut p = ConicProgram::new();
            let lam = p.scalar();
            let m = MatExpr::scaled_identity(&lam, 3).add_const(
                &Mat::from_row_slice(3, 3, &[-1.0, 0.5, 0.0, 0.5, -2.0, 0.2, 0.0, 0.2, -0.7]),
            );
            p.psd(&m).unwrap();
            p.minimize(lam);
            p
        };
        let a = build().solve_optimal(&settings()).unwrap();
        let b = build().solve_optimal(&settings()).unwrap();
        assert!((a.objective - b.objective).abs() <= 1e-9);
    }

    #[test]
    fn quad_le_is_rotated_cone() {
        // min a s.t. ||(1,1)||^2 <= a * 2  -> a = 1
        let mut p = ConicProgram::new();
        let a = p.scalar();
        p.quad_le(
            &[LinExpr::constant(1.0), LinExpr::constant(1.0)],
            a.clone(),
            LinExpr::constant(2.0),
        );
        p.minimize(a);
        let sol = p.solve_optimal(&settings()).unwrap();
        assert_abs_diff_eq!(sol.objective, 1.0, epsilon = 1e-7);
    }

    #[test]
    fn dump_writes_headers() {
        let mut p = ConicProgram::new();
        let x = p.scalar();
        p.ge_zero(x.clone() - LinExpr::constant(3.0));
        p.minimize(x);
        let mut buf = Vec::new();
        p.dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("OBJSENSE"));
        assert!(text.contains("ACOORD"));
    }
}
