//! Truncated symmetric Fock space over one partition interval `((k-1)h, kh]`.
//!
//! `L²` of the interval is discretised into `G` equal cells; functions are piecewise
//! constant on cells with inner product `(h/G) Σ_c`. The one-particle space is spanned
//! by real orthonormal spatial profiles `B_r` times the channels `e_i`, mode index
//! `r*m + i`. Profile 0 is always the normalised constant `1/√h`, so mode `(0, i)` is
//! `χ^i`. [`IntervalSpace::full`] uses a complete profile basis;
//! [`IntervalSpace::spanning`] uses the span of given profiles, which is invariant
//! under every operator here and keeps dimensions small.
//!
//! Vectors in `h0 ⊗ Γ` are stored as `dim x d` matrices whose column `a` is the Fock
//! component paired with the `a`-th basis vector of `h0`.

use crate::linalg::{c64, op_norm, CMatrix, CVector};
use crate::testfn::TestFunction;
use num_complex::Complex64 as C64;
use std::collections::HashMap;
use thiserror::Error;

/// Largest acceptable Poisson tail of a truncated exponential vector.
pub const TAIL_TOL: f64 = 1e-8;
/// Cutoff used when the requested one leaves too large a tail.
pub const ESCALATED_CUTOFF: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FockError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("truncation tail {tail:e} exceeds {TAIL_TOL:e} at cutoff {cutoff}; use a larger cutoff")]
    TailTooLarge { tail: f64, cutoff: usize },
    #[error("invalid space parameters: {0}")]
    Parameters(String),
}

#[derive(Debug, Clone)]
pub struct IntervalSpace {
    m: usize,
    cells: usize,
    cutoff: usize,
    h: f64,
    profiles: Vec<Vec<f64>>,
    states: Vec<Vec<u16>>,
    raise: Vec<Vec<Option<(usize, f64)>>>,
    lower: Vec<Vec<Option<(usize, f64)>>>,
}

fn compositions(total: usize, parts: usize, prefix: &mut Vec<u16>, out: &mut Vec<Vec<u16>>) {
    if parts == 1 {
        prefix.push(total as u16);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in (0..=total).rev() {
        prefix.push(first as u16);
        compositions(total - first, parts - 1, prefix, out);
        prefix.pop();
    }
}

impl IntervalSpace {
    /// Space whose spatial profiles are the constant followed by a Gram-Schmidt
    /// orthonormalisation of `extra` (cell values); dependent profiles are dropped.
    pub fn spanning(
        m: usize,
        cells: usize,
        cutoff: usize,
        h: f64,
        extra: &[Vec<f64>],
    ) -> Result<Self, FockError> {
        if m == 0 || cells == 0 || !(h > 0.0) {
            return Err(FockError::Parameters(format!("m={m}, G={cells}, h={h}")));
        }
        let w = h / cells as f64;
        let dot = |p: &[f64], q: &[f64]| w * p.iter().zip(q).map(|(a, b)| a * b).sum::<f64>();
        let mut profiles = vec![vec![1.0 / h.sqrt(); cells]];
        for p in extra {
            if p.len() != cells {
                return Err(FockError::Shape(format!("profile has {} cells, expected {cells}", p.len())));
            }
            let scale = dot(p, p).sqrt();
            if scale == 0.0 {
                continue;
            }
            let mut r: Vec<f64> = p.iter().map(|v| v / scale).collect();
            // Two passes keep the basis orthonormal to working precision.
            for _ in 0..2 {
                for b in &profiles {
                    let c = dot(&r, b);
                    r.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
            }
            let n = dot(&r, &r).sqrt();
            if n > 1e-10 {
                r.iter_mut().for_each(|x| *x /= n);
                profiles.push(r);
            }
        }
        Ok(Self::build(m, cells, cutoff, h, profiles))
    }

    /// Space over the complete cell basis, `M1 = G*m` modes.
    pub fn full(m: usize, cells: usize, cutoff: usize, h: f64) -> Result<Self, FockError> {
        let indicators: Vec<Vec<f64>> = (0..cells)
            .map(|c| (0..cells).map(|k| if k == c { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::spanning(m, cells, cutoff, h, &indicators)
    }

    /// Spanning space for the restrictions of `fs` to `[start, start + h]`.
    pub fn for_functions(
        m: usize,
        cells: usize,
        cutoff: usize,
        h: f64,
        start: f64,
        fs: &[&TestFunction],
    ) -> Result<Self, FockError> {
        let mut extra = Vec::new();
        for f in fs {
            if f.channels() != m {
                return Err(FockError::Shape(format!("test function has {} channels, expected {m}", f.channels())));
            }
            for i in 0..m {
                extra.push(f.cell_averages(i, start, h, cells));
            }
        }
        Self::spanning(m, cells, cutoff, h, &extra)
    }

    fn build(m: usize, cells: usize, cutoff: usize, h: f64, profiles: Vec<Vec<f64>>) -> Self {
        let modes = profiles.len() * m;
        let mut states = Vec::new();
        for n in 0..=cutoff {
            compositions(n, modes, &mut Vec::with_capacity(modes), &mut states);
        }
        let index: HashMap<Vec<u16>, usize> =
            states.iter().enumerate().map(|(k, s)| (s.clone(), k)).collect();
        let mut raise = vec![vec![None; states.len()]; modes];
        let mut lower = vec![vec![None; states.len()]; modes];
        for (k, s) in states.iter().enumerate() {
            let total: usize = s.iter().map(|&n| n as usize).sum();
            for mode in 0..modes {
                let n = s[mode] as usize;
                if total < cutoff {
                    let mut t = s.clone();
                    t[mode] += 1;
                    raise[mode][k] = Some((index[&t], ((n + 1) as f64).sqrt()));
                }
                if n > 0 {
                    let mut t = s.clone();
                    t[mode] -= 1;
                    lower[mode][k] = Some((index[&t], (n as f64).sqrt()));
                }
            }
        }
        Self {
            m,
            cells,
            cutoff,
            h,
            profiles,
            states,
            raise,
            lower,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn modes(&self) -> usize {
        self.profiles.len() * self.m
    }

    pub fn profiles(&self) -> &[Vec<f64>] {
        &self.profiles
    }

    pub fn occupation(&self, state: usize) -> &[u16] {
        &self.states[state]
    }

    pub fn sector(&self, state: usize) -> usize {
        self.states[state].iter().map(|&n| n as usize).sum()
    }

    /// Basis index of `χ^i` (single occupation of the constant mode of channel `i`).
    pub fn chi(&self, i: usize) -> usize {
        self.raise[i][0].expect("cutoff is at least one").0
    }

    /// Coefficients `α_{r,i} = <B_r, f_i>` of `f` restricted to `[start, start + h]`.
    pub fn mode_coefficients(&self, f: &TestFunction, start: f64) -> Vec<C64> {
        let w = self.h / self.cells as f64;
        let avgs: Vec<Vec<f64>> = (0..self.m)
            .map(|i| f.cell_averages(i, start, self.h, self.cells))
            .collect();
        let mut alpha = vec![c64(0.0, 0.0); self.modes()];
        for (r, b) in self.profiles.iter().enumerate() {
            for i in 0..self.m {
                let v: f64 = b.iter().zip(&avgs[i]).map(|(p, q)| p * q).sum();
                alpha[r * self.m + i] = c64(w * v, 0.0);
            }
        }
        alpha
    }

    /// `Σ_{n ≤ max_n} ⊗ f^{⊗n}/√(n!)` in the occupation basis.
    pub fn exp_vector(&self, alpha: &[C64], max_n: usize) -> ExpVector {
        assert_eq!(alpha.len(), self.modes(), "mode coefficient count");
        let max_n = max_n.min(self.cutoff);
        let mut v = CVector::zeros(self.dim());
        for (k, s) in self.states.iter().enumerate() {
            if s.iter().map(|&n| n as usize).sum::<usize>() > max_n {
                continue;
            }
            let mut c = c64(1.0, 0.0);
            for (mode, &n) in s.iter().enumerate() {
                for p in 1..=n as usize {
                    c *= alpha[mode] / (p as f64).sqrt();
                }
            }
            v[k] = c;
        }
        let a: f64 = alpha.iter().map(|z| z.norm_sqr()).sum();
        ExpVector {
            vector: v,
            truncation: max_n,
            norm_sq_param: a,
            tail: poisson_tail(a, max_n),
        }
    }

    pub fn vacuum(&self) -> CVector {
        let mut v = CVector::zeros(self.dim());
        v[0] = c64(1.0, 0.0);
        v
    }

    fn apply_table(&self, table: &[Option<(usize, f64)>], x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(x.nrows(), x.ncols());
        for (k, entry) in table.iter().enumerate() {
            if let Some((t, amp)) = *entry {
                for c in 0..x.ncols() {
                    out[(t, c)] += x[(k, c)] * amp;
                }
            }
        }
        out
    }

    /// Creation operator `a†` of one mode, column-wise.
    pub fn raise(&self, mode: usize, x: &CMatrix) -> CMatrix {
        self.apply_table(&self.raise[mode], x)
    }

    /// Annihilation operator `a` of one mode, column-wise.
    pub fn lower(&self, mode: usize, x: &CMatrix) -> CMatrix {
        self.apply_table(&self.lower[mode], x)
    }

    fn mask(&self, x: &CMatrix, keep: impl Fn(usize) -> bool) -> CMatrix {
        let mut out = x.clone();
        for k in 0..self.dim() {
            if !keep(k) {
                out.row_mut(k).fill(c64(0.0, 0.0));
            }
        }
        out
    }

    fn is_p1(&self, k: usize) -> bool {
        let s = &self.states[k];
        s.iter().map(|&n| n as usize).sum::<usize>() == 1 && s[..self.m].contains(&1)
    }

    pub fn project_vacuum(&self, x: &CMatrix) -> CMatrix {
        self.mask(x, |k| k == 0)
    }

    /// Projection onto `span{χ^i}`.
    pub fn project_p1(&self, x: &CMatrix) -> CMatrix {
        self.mask(x, |k| self.is_p1(k))
    }

    /// `P_h = P_0 + Σ_i |χ^i><χ^i|`.
    pub fn project_ph(&self, x: &CMatrix) -> CMatrix {
        self.mask(x, |k| k == 0 || self.is_p1(k))
    }

    /// Projection onto the full one-particle sector.
    pub fn project_one_particle(&self, x: &CMatrix) -> CMatrix {
        self.mask(x, |k| self.sector(k) == 1)
    }

    /// Dense matrix of a linear map on `h0 ⊗ Γ`, flat index `a*dim + state`.
    pub fn operator_matrix(&self, d: usize, op: impl Fn(&IntervalVector) -> IntervalVector) -> CMatrix {
        let dim = self.dim();
        let mut out = CMatrix::zeros(d * dim, d * dim);
        for col in 0..d * dim {
            let mut e = CMatrix::zeros(dim, d);
            e[(col % dim, col / dim)] = c64(1.0, 0.0);
            let image = op(&IntervalVector { data: e });
            for a in 0..d {
                for s in 0..dim {
                    out[(a * dim + s, col)] = image.data[(s, a)];
                }
            }
        }
        out
    }
}

/// `a^{N+1} e^a / (N+1)!`, a bound on `Σ_{n>N} a^n/n!`.
pub fn poisson_tail(a: f64, n: usize) -> f64 {
    let mut term = a.exp();
    for p in 1..=n + 1 {
        term *= a / p as f64;
    }
    term
}

/// Truncated exponential vector with its truncation data.
#[derive(Debug, Clone)]
pub struct ExpVector {
    pub vector: CVector,
    pub truncation: usize,
    /// `‖f‖²` over the interval (on the grid).
    pub norm_sq_param: f64,
    /// Bound on the squared norm of the discarded sectors.
    pub tail: f64,
}

impl ExpVector {
    /// `Σ_{n ≤ N} a^n / n!`.
    pub fn series_norm_sq(&self) -> f64 {
        let mut term = 1.0;
        let mut acc = 1.0;
        for p in 1..=self.truncation {
            term *= self.norm_sq_param / p as f64;
            acc += term;
        }
        acc
    }
}

/// A vector in `h0 ⊗ Γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalVector {
    pub data: CMatrix,
}

impl IntervalVector {
    pub fn product(u: &CVector, psi: &CVector) -> Self {
        Self {
            data: psi * u.transpose(),
        }
    }

    pub fn d(&self) -> usize {
        self.data.ncols()
    }

    pub fn norm(&self) -> f64 {
        self.data.norm()
    }

    pub fn inner(&self, other: &Self) -> C64 {
        self.data.iter().zip(other.data.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            data: &self.data - &other.data,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            data: &self.data * c64(s, 0.0),
        }
    }

    /// Applies `A ⊗ 1` for a `d x d` matrix `A`.
    pub fn apply_h0(&self, a: &CMatrix) -> Self {
        Self {
            data: &self.data * a.transpose(),
        }
    }
}

/// The four fundamental processes over one interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Process {
    /// `Λ¹_S = h S`.
    Time,
    /// `Λ²_R = a_R`.
    Annihilation,
    /// `Λ³_R = a†_R`.
    Creation,
    /// `Λ⁴_T`, second quantisation of `T`.
    Conservation,
}

impl Process {
    pub const ALL: [Process; 4] = [
        Process::Time,
        Process::Annihilation,
        Process::Creation,
        Process::Conservation,
    ];

    pub fn level(self) -> usize {
        match self {
            Process::Time => 1,
            Process::Annihilation => 2,
            Process::Creation => 3,
            Process::Conservation => 4,
        }
    }

    fn expected_shape(self, d: usize, m: usize) -> (usize, usize) {
        match self {
            Process::Time => (d, d),
            Process::Annihilation | Process::Creation => (d * m, d),
            Process::Conservation => (d * m, d * m),
        }
    }
}

/// `d x d` block `i` of a `(d*m) x d` operator.
pub fn column_block(r: &CMatrix, m: usize, i: usize) -> CMatrix {
    let d = r.ncols();
    CMatrix::from_fn(d, d, |a, b| r[(a * m + i, b)])
}

/// `d x d` block `(i, j)` of a `(d*m) x (d*m)` operator.
pub fn square_block(t: &CMatrix, m: usize, i: usize, j: usize) -> CMatrix {
    let d = t.nrows() / m;
    CMatrix::from_fn(d, d, |a, b| t[(a * m + i, b * m + j)])
}

impl IntervalSpace {
    fn check_coeff(&self, p: Process, coeff: &CMatrix, v: &IntervalVector) -> Result<(), FockError> {
        if v.data.nrows() != self.dim() {
            return Err(FockError::Shape(format!(
                "vector has {} Fock coefficients, space has {}",
                v.data.nrows(),
                self.dim()
            )));
        }
        let want = p.expected_shape(v.d(), self.m);
        if coeff.shape() != want {
            return Err(FockError::Shape(format!(
                "{p:?} coefficient must be {}x{}, got {}x{}",
                want.0,
                want.1,
                coeff.nrows(),
                coeff.ncols()
            )));
        }
        Ok(())
    }

    /// `Λ^l_coeff` applied to `v`.
    pub fn fundamental_apply(
        &self,
        p: Process,
        coeff: &CMatrix,
        v: &IntervalVector,
    ) -> Result<IntervalVector, FockError> {
        self.check_coeff(p, coeff, v)?;
        let m = self.m;
        let sq = self.h.sqrt();
        let mut out = CMatrix::zeros(v.data.nrows(), v.data.ncols());
        match p {
            Process::Time => out = &v.data * (coeff * c64(self.h, 0.0)).transpose(),
            Process::Creation => {
                for i in 0..m {
                    out += self.raise(i, &v.data) * (column_block(coeff, m, i) * c64(sq, 0.0)).transpose();
                }
            }
            Process::Annihilation => {
                for i in 0..m {
                    out += self.lower(i, &v.data)
                        * (column_block(coeff, m, i).adjoint() * c64(sq, 0.0)).transpose();
                }
            }
            Process::Conservation => {
                for i in 0..m {
                    for j in 0..m {
                        let tij = square_block(coeff, m, i, j);
                        if tij.iter().all(|z| *z == c64(0.0, 0.0)) {
                            continue;
                        }
                        let mut hop = CMatrix::zeros(v.data.nrows(), v.data.ncols());
                        for r in 0..self.profiles.len() {
                            hop += self.raise(r * m + i, &self.lower(r * m + j, &v.data));
                        }
                        out += hop * tij.transpose();
                    }
                }
            }
        }
        Ok(IntervalVector { data: out })
    }

    /// The basic operators `N¹_S = S P0`, `N²_R = Λ²_R P1 / √h`, `N³_R = P1 Λ³_R / √h`,
    /// `N⁴_T = P1 Λ⁴_T P1`.
    pub fn basic_apply(
        &self,
        p: Process,
        coeff: &CMatrix,
        v: &IntervalVector,
    ) -> Result<IntervalVector, FockError> {
        self.check_coeff(p, coeff, v)?;
        let inv = 1.0 / self.h.sqrt();
        Ok(match p {
            Process::Time => IntervalVector {
                data: self.project_vacuum(&v.data),
            }
            .apply_h0(coeff),
            Process::Annihilation => {
                let w = IntervalVector {
                    data: self.project_p1(&v.data),
                };
                self.fundamental_apply(p, coeff, &w)?.scale(inv)
            }
            Process::Creation => {
                let w = self.fundamental_apply(p, coeff, v)?;
                IntervalVector {
                    data: self.project_p1(&w.data),
                }
                .scale(inv)
            }
            Process::Conservation => {
                let w = IntervalVector {
                    data: self.project_p1(&v.data),
                };
                let w = self.fundamental_apply(p, coeff, &w)?;
                IntervalVector {
                    data: self.project_p1(&w.data),
                }
            }
        })
    }
}

/// Which form of a two-sided estimate is checked: the vector norm, or the modulus of a
/// matrix element between exponential vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckMode {
    Norm,
    MatrixElement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// Truncation and grid allowance.
    pub slack: f64,
    pub safety: f64,
}

impl BoundCheck {
    pub fn pass(&self) -> bool {
        self.lhs <= self.safety * self.rhs + self.slack
    }

    /// Whether the inequality holds with its literal constant and no allowances.
    pub fn raw_pass(&self) -> bool {
        self.lhs <= self.rhs
    }

    pub fn ratio(&self) -> f64 {
        if self.rhs > 0.0 {
            self.lhs / self.rhs
        } else if self.lhs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Relative rounding allowance folded into every slack.
const ROUNDING: f64 = 1e-13;

/// Safety factor applied to the single-interval estimates.
pub const LEMMA_SAFETY: f64 = 4.0;

/// One interval `[start, start + h]` with truncated exponential vectors of `f` and `g`
/// in a space whose cutoff is one above their truncation, so a single creation is exact.
#[derive(Debug, Clone)]
pub struct LemmaSetup {
    pub space: IntervalSpace,
    pub f: TestFunction,
    pub g: TestFunction,
    pub start: f64,
    pub ef: ExpVector,
    pub eg: ExpVector,
}

impl LemmaSetup {
    pub fn new(
        f: &TestFunction,
        g: &TestFunction,
        start: f64,
        h: f64,
        cells: usize,
        cutoff: usize,
    ) -> Result<Self, FockError> {
        let m = f.channels();
        if g.channels() != m {
            return Err(FockError::Shape("f and g have different channel counts".into()));
        }
        let grid_norm = |f: &TestFunction| -> f64 {
            let w = h / cells as f64;
            (0..m)
                .map(|i| f.cell_averages(i, start, h, cells).iter().map(|v| w * v * v).sum::<f64>())
                .sum()
        };
        let a = grid_norm(f).max(grid_norm(g));
        let mut n = cutoff;
        if poisson_tail(a, n) > TAIL_TOL && n < ESCALATED_CUTOFF {
            n = ESCALATED_CUTOFF;
        }
        let tail = poisson_tail(a, n);
        if tail > TAIL_TOL {
            return Err(FockError::TailTooLarge { tail, cutoff: n });
        }
        let space = IntervalSpace::for_functions(m, cells, n + 1, h, start, &[f, g])?;
        let ef = space.exp_vector(&space.mode_coefficients(f, start), n);
        let eg = space.exp_vector(&space.mode_coefficients(g, start), n);
        Ok(Self {
            space,
            f: f.clone(),
            g: g.clone(),
            start,
            ef,
            eg,
        })
    }

    pub fn h(&self) -> f64 {
        self.space.h()
    }

    pub fn truncation(&self) -> usize {
        self.ef.truncation
    }

    fn grid_slack(&self) -> f64 {
        let g = self.space.cells() as f64;
        let h = self.h();
        self.ef.tail.max(self.eg.tail).sqrt() + h * self.f.c_f().max(self.g.c_f()) / g + ROUNDING
    }

    /// `‖(1 - P_h) e(f)‖ ≤ h (c_f + ‖f‖∞) ‖e(f)‖`.
    pub fn check_norm_diff(&self) -> NormDiffReport {
        let e = CMatrix::from_column_slice(self.space.dim(), 1, self.ef.vector.as_slice());
        let enorm = e.norm();
        let h = self.h();
        let off = &e - self.space.project_ph(&e);
        let one = self.space.project_one_particle(&e) - self.space.project_p1(&e);
        let multi = &e - self.space.project_one_particle(&e) - self.space.project_vacuum(&e);
        let (cf, sup) = (self.f.c_f(), self.f.sup_norm());
        NormDiffReport {
            check: BoundCheck {
                name: "norm-diff".into(),
                lhs: off.norm(),
                rhs: h * (cf + sup) * enorm,
                slack: self.grid_slack(),
                safety: LEMMA_SAFETY,
            },
            one_particle: (one.norm(), h.powf(1.5) * cf),
            multi_particle: (multi.norm(), h * sup * sup * enorm),
        }
    }

    /// One of the eight single-interval estimates comparing `N^l` with `Λ^l`.
    pub fn check_n_vs_lambda(
        &self,
        p: Process,
        coeff: &CMatrix,
        u: &CVector,
        v: &CVector,
        mode: CheckMode,
    ) -> Result<BoundCheck, FockError> {
        let sp = &self.space;
        let h = self.h();
        let sq = h.sqrt();
        let uf = IntervalVector::product(u, &self.ef.vector);
        let n_part = sp.basic_apply(p, coeff, &uf)?;
        let l_part = sp.fundamental_apply(p, coeff, &uf)?;
        let scaled = match p {
            Process::Time => n_part.scale(h),
            Process::Annihilation | Process::Creation => n_part.scale(sq),
            Process::Conservation => n_part,
        };
        let diff = scaled.sub(&l_part);
        let ef = self.ef.vector.norm();
        let eg = self.eg.vector.norm();
        let fs = self.f.sup_norm();
        let gs = self.g.sup_norm();
        let cf = self.f.c_f();
        let un = u.norm();
        let vn = v.norm();
        let cnorm = op_norm(coeff);
        let coeff_u = match p {
            Process::Time | Process::Creation => (coeff * u).norm(),
            _ => 0.0,
        };
        let n1 = (self.truncation() + 1) as f64;
        let scale = match p {
            Process::Time => h * cnorm * un,
            Process::Annihilation | Process::Creation => sq * cnorm * un * n1.sqrt(),
            Process::Conservation => cnorm * un * n1,
        };
        let (lhs, rhs, scale) = match mode {
            CheckMode::Norm => {
                let rhs = match p {
                    Process::Time => h.powf(1.5) * coeff_u * fs * ef,
                    Process::Annihilation => h.powf(1.5) * cnorm * un * fs * fs * ef,
                    Process::Creation => 2.0 * h * coeff_u * fs * ef,
                    Process::Conservation => 2.0 * h * cnorm * (cf + fs * fs) * un * ef,
                };
                (diff.norm(), rhs, scale)
            }
            CheckMode::MatrixElement => {
                let vg = IntervalVector::product(v, &self.eg.vector);
                let vge = vn * eg;
                let rhs = match p {
                    Process::Time => h.powf(1.5) * coeff_u * fs * ef * vge,
                    Process::Annihilation => h.powf(1.5) * cnorm * un * fs * fs * gs * ef * vge,
                    Process::Creation => 2.0 * h * h * coeff_u * vn * fs * gs * ef * ef * eg * eg,
                    Process::Conservation => {
                        h * h * ((fs + cf) * gs).powi(2) * cnorm * un * vn * ef * ef * eg * eg
                    }
                };
                (vg.inner(&diff).norm(), rhs, scale * vge)
            }
        };
        let tag = match mode {
            CheckMode::Norm => "a",
            CheckMode::MatrixElement => "b",
        };
        Ok(BoundCheck {
            name: format!("N-lambda ({tag})({})", p.level()),
            lhs,
            rhs,
            slack: self.grid_slack() * scale,
            safety: LEMMA_SAFETY,
        })
    }

    /// Norm identities for creation and conservation:
    /// `‖Λ³_R u e(f)‖² = (h‖Ru‖² + ‖Σ_j (∫f_j) R_j u‖²) ‖e(f)‖²` and
    /// `‖Λ⁴_T u e(f)‖² = (∫‖T(u⊗f(s))‖² ds + ‖Σ_ij (∫f_i f_j) T_ij u‖²) ‖e(f)‖²`.
    pub fn lambda_norm_identities(
        &self,
        r: &CMatrix,
        t: &CMatrix,
        u: &CVector,
    ) -> Result<[IdentityCheck; 2], FockError> {
        let sp = &self.space;
        let m = sp.m();
        let h = self.h();
        let uf = IntervalVector::product(u, &self.ef.vector);
        let enorm_sq = self.ef.vector.norm_squared();
        let (a0, a1) = (self.start, self.start + h);

        let lhs3 = sp.fundamental_apply(Process::Creation, r, &uf)?.norm().powi(2);
        let mut mixed = CVector::zeros(u.len());
        for j in 0..m {
            mixed += column_block(r, m, j) * u * c64(self.f.integral(j, a0, a1), 0.0);
        }
        let rhs3 = (h * (r * u).norm_squared() + mixed.norm_squared()) * enorm_sq;

        let lhs4 = sp.fundamental_apply(Process::Conservation, t, &uf)?.norm().powi(2);
        let cells = sp.cells();
        let w = h / cells as f64;
        let avgs: Vec<Vec<f64>> = (0..m).map(|i| self.f.cell_averages(i, a0, h, cells)).collect();
        let mut pointwise = 0.0;
        for c in 0..cells {
            let fc = CVector::from_fn(m, |i, _| c64(avgs[i][c], 0.0));
            let ufc = crate::linalg::kron_vec(u.as_slice(), fc.as_slice());
            pointwise += w * (t * CVector::from_vec(ufc)).norm_squared();
        }
        let mut pair = CVector::zeros(u.len());
        for i in 0..m {
            for j in 0..m {
                let fij: f64 = (0..cells).map(|c| w * avgs[i][c] * avgs[j][c]).sum();
                pair += square_block(t, m, i, j) * u * c64(fij, 0.0);
            }
        }
        let rhs4 = (pointwise + pair.norm_squared()) * enorm_sq;

        let a = self.ef.norm_sq_param;
        let n = self.truncation();
        let edge = poisson_tail(a, n.saturating_sub(1)) * (n + 1) as f64;
        let tol3 = 1e-8 + edge * rhs3.max(1.0);
        let tol4 = 1e-8 + edge * rhs4.max(1.0);
        Ok([
            IdentityCheck {
                name: "creation norm identity",
                residual: (lhs3 - rhs3).abs(),
                tolerance: tol3,
            },
            IdentityCheck {
                name: "conservation norm identity",
                residual: (lhs4 - rhs4).abs(),
                tolerance: tol4,
            },
        ])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormDiffReport {
    pub check: BoundCheck,
    /// `‖(P_one - P_h) e(f)‖` and `h^{3/2} c_f`.
    pub one_particle: (f64, f64),
    /// `‖(1 - P_0 - P_one) e(f)‖` and `h ‖f‖∞² ‖e(f)‖`.
    pub multi_particle: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
}

impl IdentityCheck {
    pub fn pass(&self) -> bool {
        self.residual <= self.tolerance
    }
}

/// `‖(1 - P_h) e(f_{t]})‖` over `[0, n h]`, from per-interval factors:
/// `Π_k ‖e(f_[k])‖² - Π_k ‖P_h e(f_[k])‖²`.
pub fn ph_defect(f: &TestFunction, h: f64, n: usize, cells: usize, cutoff: usize) -> Result<f64, FockError> {
    let mut full = 1.0;
    let mut proj = 1.0;
    for k in 0..n {
        let start = k as f64 * h;
        let sp = IntervalSpace::for_functions(f.channels(), cells, cutoff, h, start, &[f])?;
        let e = sp.exp_vector(&sp.mode_coefficients(f, start), cutoff);
        if e.tail > TAIL_TOL {
            return Err(FockError::TailTooLarge { tail: e.tail, cutoff });
        }
        let v = CMatrix::from_column_slice(sp.dim(), 1, e.vector.as_slice());
        full *= v.norm_squared();
        proj *= sp.project_ph(&v).norm_squared();
    }
    Ok((full - proj).max(0.0).sqrt())
}

/// Residual of one operator identity among the basic operators.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionResidual {
    pub name: &'static str,
    pub residual: f64,
}

/// Random coefficients for the composition table.
#[derive(Debug, Clone)]
pub struct CompositionInputs {
    pub s1: CMatrix,
    pub s2: CMatrix,
    pub r1: CMatrix,
    pub r2: CMatrix,
    pub t1: CMatrix,
    pub t2: CMatrix,
}

impl CompositionInputs {
    pub fn random<G: rand::Rng + ?Sized>(rng: &mut G, d: usize, m: usize) -> Self {
        use crate::linalg::random_matrix;
        Self {
            s1: random_matrix(rng, d, d),
            s2: random_matrix(rng, d, d),
            r1: random_matrix(rng, d * m, d),
            r2: random_matrix(rng, d * m, d),
            t1: random_matrix(rng, d * m, d * m),
            t2: random_matrix(rng, d * m, d * m),
        }
    }
}

/// The composition identities among `N¹..N⁴` and the adjoint relations, evaluated
/// as dense operators on `h0 ⊗ Γ` for the given space.
pub fn composition_table(space: &IntervalSpace, c: &CompositionInputs) -> Vec<CompositionResidual> {
    let d = c.s1.nrows();
    let m = space.m();
    let op = |p: Process, coeff: &CMatrix| {
        space.operator_matrix(d, |v| space.basic_apply(p, coeff, v).expect("shapes are consistent"))
    };
    let n1 = |s: &CMatrix| op(Process::Time, s);
    let n2 = |r: &CMatrix| op(Process::Annihilation, r);
    let n3 = |r: &CMatrix| op(Process::Creation, r);
    let n4 = |t: &CMatrix| op(Process::Conservation, t);
    let res = |a: CMatrix, b: CMatrix| crate::linalg::max_abs(&(a - b));
    let zero = CMatrix::zeros(d * space.dim(), d * space.dim());
    let s_amp = crate::linalg::ampliate(&c.s1, m);
    let s_ph = space.operator_matrix(d, |v| {
        IntervalVector {
            data: space.project_ph(&v.data),
        }
        .apply_h0(&c.s1)
    });
    let rs1 = &c.r1 * c.s1.adjoint();
    let rs2 = &c.r1 * &c.s1;
    vec![
        CompositionResidual {
            name: "(N2_R)^2 = 0",
            residual: res(n2(&c.r1) * n2(&c.r1), zero.clone()),
        },
        CompositionResidual {
            name: "(N3_R)^2 = 0",
            residual: res(n3(&c.r1) * n3(&c.r1), zero),
        },
        CompositionResidual {
            name: "N1_S1 N1_S2 = N1_{S1 S2}",
            residual: res(n1(&c.s1) * n1(&c.s2), n1(&(&c.s1 * &c.s2))),
        },
        CompositionResidual {
            name: "N2_R1 N3_R2 = N1_{R1* R2}",
            residual: res(n2(&c.r1) * n3(&c.r2), n1(&(c.r1.adjoint() * &c.r2))),
        },
        CompositionResidual {
            name: "N1_S N2_R = N2_{R S*}",
            residual: res(n1(&c.s1) * n2(&c.r1), n2(&rs1)),
        },
        CompositionResidual {
            name: "N2_R N4_T = N2_{T* R}",
            residual: res(n2(&c.r1) * n4(&c.t1), n2(&(c.t1.adjoint() * &c.r1))),
        },
        CompositionResidual {
            name: "N3_R N1_S = N3_{R S}",
            residual: res(n3(&c.r1) * n1(&c.s1), n3(&rs2)),
        },
        CompositionResidual {
            name: "N4_T N3_R = N3_{T R}",
            residual: res(n4(&c.t1) * n3(&c.r1), n3(&(&c.t1 * &c.r1))),
        },
        CompositionResidual {
            name: "N3_R1 N2_R2 = N4_{R1 R2*}",
            residual: res(n3(&c.r1) * n2(&c.r2), n4(&(&c.r1 * c.r2.adjoint()))),
        },
        CompositionResidual {
            name: "N4_T1 N4_T2 = N4_{T1 T2}",
            residual: res(n4(&c.t1) * n4(&c.t2), n4(&(&c.t1 * &c.t2))),
        },
        CompositionResidual {
            name: "N1_S + N4_{S⊗1} = S⊗P_h",
            residual: res(n1(&c.s1) + n4(&s_amp), s_ph),
        },
    ]
}

/// `(N²_R)* = N³_R`, `(N¹_S)* = N¹_{S*}` and `(N⁴_T)* = N⁴_{T*}` as dense operators.
pub fn adjoint_relations(space: &IntervalSpace, c: &CompositionInputs) -> Vec<CompositionResidual> {
    let d = c.s1.nrows();
    let op = |p: Process, coeff: &CMatrix| {
        space.operator_matrix(d, |v| space.basic_apply(p, coeff, v).expect("shapes are consistent"))
    };
    let res = |a: CMatrix, b: CMatrix| crate::linalg::max_abs(&(a - b));
    vec![
        CompositionResidual {
            name: "(N2_R)* = N3_R",
            residual: res(op(Process::Annihilation, &c.r1).adjoint(), op(Process::Creation, &c.r1)),
        },
        CompositionResidual {
            name: "(N1_S)* = N1_{S*}",
            residual: res(op(Process::Time, &c.s1).adjoint(), op(Process::Time, &c.s1.adjoint())),
        },
        CompositionResidual {
            name: "(N4_T)* = N4_{T*}",
            residual: res(
                op(Process::Conservation, &c.t1).adjoint(),
                op(Process::Conservation, &c.t1.adjoint()),
            ),
        },
        CompositionResidual {
            name: "(Λ2_R)* = Λ3_R",
            residual: res(
                space
                    .operator_matrix(d, |v| space.fundamental_apply(Process::Annihilation, &c.r1, v).unwrap())
                    .adjoint(),
                space.operator_matrix(d, |v| space.fundamental_apply(Process::Creation, &c.r1, v).unwrap()),
            ),
        },
    ]
}
