//! The quantum random walk `p_{nh} = ρ_1 ⋯ ρ_n` on the toy Fock space.
//!
//! The toy space has one `k̂0 = C ⊕ k0` leg per time slot with basis `(Ω, χ^1..χ^m)`.
//! States in `h0 ⊗ k̂0^{⊗n}` use flat index `a (1+m)^n + Σ_k j_k (1+m)^{n-k}`, slot 1
//! leftmost. Two engines are provided: a dense one that materialises operators or
//! states on the whole toy space, and a streaming one that contracts each slot against
//! the exponential-vector data as soon as it is produced and only ever holds a `d x d`
//! matrix.

mod hybrid;

pub use hybrid::{decomposition_check, DecompositionReport, DECOMPOSITION_TOL, HYBRID_CAP};

use crate::fock::FockError;
use crate::gksl::{GkslModel, ModelError, StepUnitary};
use crate::linalg::{c64, CMatrix, CVector};
use crate::testfn::TestFunction;
use num_complex::Complex64 as C64;
use thiserror::Error;

/// Default bound on the dense toy-space dimension `d (1+m)^n`.
pub const DEFAULT_DENSE_CAP: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WalkError {
    #[error("dense dimension {dim} exceeds the cap {cap}")]
    Cap { dim: usize, cap: usize },
    #[error("t = {t} is not an integer multiple of h = {h}")]
    NonIntegerSteps { t: f64, h: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Fock(#[from] FockError),
}

/// `n = t/h`, rejecting non-integer ratios.
pub fn step_count(t: f64, h: f64) -> Result<usize, WalkError> {
    if !(h > 0.0) || !(t >= 0.0) {
        return Err(WalkError::NonIntegerSteps { t, h });
    }
    let n = (t / h).round();
    if (n * h - t).abs() > 1e-9 * t.max(h) {
        return Err(WalkError::NonIntegerSteps { t, h });
    }
    Ok(n as usize)
}

/// `F[k][i] = h^{-1/2} ∫_{kh}^{(k+1)h} f_i` for slots `k = 0..n` (zero based).
#[derive(Debug, Clone, PartialEq)]
pub struct SlotAverages {
    pub h: f64,
    pub values: Vec<Vec<C64>>,
}

impl SlotAverages {
    pub fn zero(m: usize, h: f64, n: usize) -> Self {
        Self {
            h,
            values: vec![vec![c64(0.0, 0.0); m]; n],
        }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn m(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// `f̂_k = (1, F[k])`.
    pub fn hat(&self, k: usize) -> Vec<C64> {
        std::iter::once(c64(1.0, 0.0))
            .chain(self.values[k].iter().copied())
            .collect()
    }

    /// First `n` slots.
    pub fn prefix(&self, n: usize) -> Self {
        Self {
            h: self.h,
            values: self.values[..n].to_vec(),
        }
    }
}

pub fn slot_averages(f: &TestFunction, h: f64, n: usize) -> Result<SlotAverages, WalkError> {
    if !(h > 0.0) || n == 0 {
        return Err(WalkError::Shape(format!("need h > 0 and n ≥ 1, got h={h}, n={n}")));
    }
    let scale = 1.0 / h.sqrt();
    let values = (0..n)
        .map(|k| {
            let a = k as f64 * h;
            (0..f.channels())
                .map(|i| c64(scale * f.integral(i, a, a + h), 0.0))
                .collect()
        })
        .collect();
    Ok(SlotAverages { h, values })
}

/// A vector in `h0 ⊗ k̂0^{⊗n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyState {
    pub d: usize,
    pub m: usize,
    pub n: usize,
    pub data: CVector,
}

impl ToyState {
    pub fn product(u: &CVector, avgs: &SlotAverages) -> Self {
        let e = toy_exp_embed(avgs);
        Self {
            d: u.len(),
            m: avgs.m(),
            n: avgs.n(),
            data: CVector::from_vec(crate::linalg::kron_vec(u.as_slice(), e.as_slice())),
        }
    }

    pub fn inner(&self, other: &Self) -> C64 {
        self.data.dotc(&other.data)
    }
}

/// `⊗_k (1, F[k])`, the projection of the exponential vector onto the toy space.
pub fn toy_exp_embed(avgs: &SlotAverages) -> CVector {
    let mut v = vec![c64(1.0, 0.0)];
    for k in 0..avgs.n() {
        v = crate::linalg::kron_vec(&v, &avgs.hat(k));
    }
    CVector::from_vec(v)
}

/// `Π_k (1 + Σ_i conj(G[k][i]) F[k][i])`.
pub fn toy_exp_pairing(g: &SlotAverages, f: &SlotAverages) -> C64 {
    g.values
        .iter()
        .zip(&f.values)
        .map(|(gk, fk)| {
            c64(1.0, 0.0) + gk.iter().zip(fk).map(|(a, b)| a.conj() * b).sum::<C64>()
        })
        .product()
}

fn dense_dim(d: usize, m: usize, n: usize, cap: usize) -> Result<usize, WalkError> {
    let w = 1 + m;
    let dim = u32::try_from(n)
        .ok()
        .and_then(|n| w.checked_pow(n))
        .and_then(|p| p.checked_mul(d))
        .unwrap_or(usize::MAX);
    if dim > cap {
        return Err(WalkError::Cap { dim, cap });
    }
    Ok(dim)
}

/// The walk with a fixed model and step size.
#[derive(Debug, Clone)]
pub struct Walk {
    step: StepUnitary,
    u_flat: CMatrix,
}

impl Walk {
    pub fn new(model: &GkslModel, h: f64) -> Result<Self, WalkError> {
        let step = model.step(h)?;
        let u_flat = step.unitary().to_flat();
        Ok(Self { step, u_flat })
    }

    pub fn step(&self) -> &StepUnitary {
        &self.step
    }

    pub fn h(&self) -> f64 {
        self.step.h()
    }

    pub fn d(&self) -> usize {
        self.step.d()
    }

    pub fn m(&self) -> usize {
        self.step.m()
    }

    fn check_observable(&self, x: &CMatrix) -> Result<(), WalkError> {
        let d = self.d();
        if x.shape() != (d, d) {
            return Err(WalkError::Shape(format!("observable must be {d}x{d}")));
        }
        Ok(())
    }

    fn check_vector(&self, u: &CVector) -> Result<(), WalkError> {
        if u.len() != self.d() {
            return Err(WalkError::Shape(format!("vector must have length {}", self.d())));
        }
        Ok(())
    }

    fn check_averages(&self, a: &SlotAverages) -> Result<(), WalkError> {
        if a.n() > 0 && a.m() != self.m() {
            return Err(WalkError::Shape(format!("slot averages have {} channels, model has {}", a.m(), self.m())));
        }
        Ok(())
    }

    /// `M · Ũ` where `Ũ` is `U(h)` acting on the `h0` leg and the leg right after it,
    /// with `rest` trailing dimensions untouched.
    fn right_mul_step(&self, mat: &CMatrix, rest: usize) -> CMatrix {
        let (d, w) = (self.d(), 1 + self.m());
        let u = &self.u_flat;
        let cols = d * w * rest;
        let mut out = CMatrix::zeros(mat.nrows(), cols);
        for b in 0..d {
            for jp in 0..w {
                for a in 0..d {
                    for j in 0..w {
                        let coef = u[(a * w + j, b * w + jp)];
                        if coef == c64(0.0, 0.0) {
                            continue;
                        }
                        for kappa in 0..rest {
                            let src = (a * w + j) * rest + kappa;
                            let dst = (b * w + jp) * rest + kappa;
                            let col = mat.column(src) * coef;
                            let mut target = out.column_mut(dst);
                            target += col;
                        }
                    }
                }
            }
        }
        out
    }

    /// `p_{nh}(x)` as a dense operator, built outward from step `n` to step 1 by
    /// inserting each new `k̂0` leg directly after `h0`.
    pub fn dense_operator(&self, x: &CMatrix, n: usize, cap: usize) -> Result<CMatrix, WalkError> {
        self.check_observable(x)?;
        let d = self.d();
        let w = 1 + self.m();
        dense_dim(d, self.m(), n, cap)?;
        let mut xm = x.clone();
        for _ in 0..n {
            let rest = xm.nrows() / d;
            let big = d * w * rest;
            let mut xhat = CMatrix::zeros(big, big);
            for a in 0..d {
                for b in 0..d {
                    for k in 0..rest {
                        for kp in 0..rest {
                            let val = xm[(a * rest + k, b * rest + kp)];
                            if val == c64(0.0, 0.0) {
                                continue;
                            }
                            for j in 0..w {
                                xhat[((a * w + j) * rest + k, (b * w + j) * rest + kp)] = val;
                            }
                        }
                    }
                }
            }
            let y = self.right_mul_step(&xhat, rest);
            xm = self.right_mul_step(&y.adjoint(), rest).adjoint();
        }
        Ok(xm)
    }

    /// `p_{nh}(x) (u ⊗ P_h e(f))` from the dense operator.
    pub fn dense_state(
        &self,
        x: &CMatrix,
        u: &CVector,
        f: &SlotAverages,
        cap: usize,
    ) -> Result<ToyState, WalkError> {
        self.check_vector(u)?;
        self.check_averages(f)?;
        let op = self.dense_operator(x, f.n(), cap)?;
        let input = ToyState::product(u, f);
        Ok(ToyState {
            data: op * input.data,
            ..input
        })
    }

    /// Same state by the leg-keeping recursion with the closed-form `β`:
    /// `W_{k-1}[(j, κ)] = Σ_{j'} f̂_k[j'] β^{(j,j')}(W_k[κ])`, `W_n = [x]`.
    pub fn dense_state_by_legs(
        &self,
        x: &CMatrix,
        u: &CVector,
        f: &SlotAverages,
        cap: usize,
    ) -> Result<ToyState, WalkError> {
        self.check_observable(x)?;
        self.check_vector(u)?;
        self.check_averages(f)?;
        let (d, m, n) = (self.d(), self.m(), f.n());
        let dim = dense_dim(d, m, n, cap)?;
        let w = 1 + m;
        let mut legs = vec![x.clone()];
        for k in (0..n).rev() {
            let fhat = f.hat(k);
            let mut next = vec![CMatrix::zeros(d, d); w * legs.len()];
            for (kappa, wk) in legs.iter().enumerate() {
                let beta = self.step.beta(wk);
                for j in 0..w {
                    let slot = &mut next[j * legs.len() + kappa];
                    for (jp, fj) in fhat.iter().enumerate() {
                        *slot += beta.block(j, jp) * *fj;
                    }
                }
            }
            legs = next;
        }
        let per = dim / d;
        let mut data = CVector::zeros(dim);
        for (kappa, wk) in legs.iter().enumerate() {
            let col = wk * u;
            for a in 0..d {
                data[a * per + kappa] = col[a];
            }
        }
        Ok(ToyState { d, m, n, data })
    }

    /// `A = U(h) K_f` with `K_f u = u ⊗ f̂`.
    fn dressed(&self, fhat: &[C64]) -> CMatrix {
        let (d, w) = (self.d(), 1 + self.m());
        CMatrix::from_fn(d * w, d, |r, b| {
            fhat.iter()
                .enumerate()
                .map(|(j, fj)| self.u_flat[(r, b * w + j)] * fj)
                .sum()
        })
    }

    /// One streaming step: `Σ_{j,j'} conj(ĝ[j]) f̂[j'] β^{(j,j')}(Y) = (U K_g)*(Y⊗1)(U K_f)`.
    pub fn contract_step(&self, y: &CMatrix, ghat: &[C64], fhat: &[C64]) -> CMatrix {
        let (d, w) = (self.d(), 1 + self.m());
        let ag = self.dressed(ghat);
        let af = self.dressed(fhat);
        let mut out = CMatrix::zeros(d, d);
        for j in 0..w {
            let gj = CMatrix::from_fn(d, d, |a, b| ag[(a * w + j, b)]);
            let fj = CMatrix::from_fn(d, d, |a, b| af[(a * w + j, b)]);
            out += gj.adjoint() * y * fj;
        }
        out
    }

    /// `Y_n, Y_{n-1}, ..., Y_0` of the streaming recursion.
    pub fn trace(&self, x: &CMatrix, f: &SlotAverages, g: &SlotAverages) -> Result<Vec<CMatrix>, WalkError> {
        self.check_observable(x)?;
        self.check_averages(f)?;
        self.check_averages(g)?;
        if f.n() != g.n() {
            return Err(WalkError::Shape("f and g cover different numbers of slots".into()));
        }
        let mut ys = vec![x.clone()];
        for k in (0..f.n()).rev() {
            let y = self.contract_step(ys.last().unwrap(), &g.hat(k), &f.hat(k));
            ys.push(y);
        }
        Ok(ys)
    }

    /// `<v ⊗ P_h e(g), p_{nh}(x) u ⊗ P_h e(f)>` by streaming contraction.
    pub fn matrix_element(
        &self,
        x: &CMatrix,
        u: &CVector,
        v: &CVector,
        f: &SlotAverages,
        g: &SlotAverages,
    ) -> Result<C64, WalkError> {
        self.check_vector(u)?;
        self.check_vector(v)?;
        self.check_observable(x)?;
        self.check_averages(f)?;
        self.check_averages(g)?;
        if f.n() != g.n() {
            return Err(WalkError::Shape("f and g cover different numbers of slots".into()));
        }
        let mut y = x.clone();
        for k in (0..f.n()).rev() {
            y = self.contract_step(&y, &g.hat(k), &f.hat(k));
        }
        Ok(v.dotc(&(y * u)))
    }

    /// `‖p_{nh}(x) u ⊗ P_h e(f)‖² = <u e(f), p(x*x) u e(f)>`.
    pub fn norm_sq(&self, x: &CMatrix, u: &CVector, f: &SlotAverages) -> Result<C64, WalkError> {
        self.matrix_element(&(x.adjoint() * x), u, u, f, f)
    }
}

/// `<v, β_1(h)^{∘n}(x) u>` by literal iteration of the vacuum block.
pub fn vacuum_iteration(step: &StepUnitary, x: &CMatrix, u: &CVector, v: &CVector, n: usize) -> C64 {
    let mut y = x.clone();
    for _ in 0..n {
        y = step.beta(&y).top_left();
    }
    v.dotc(&(y * u))
}

/// The composition `ρ_1 ⋯ ρ_n` evaluated literally by the defining recursion
/// `P_{kh}(x e(f)) = Σ_l P_{(k-1)h}(N^l_{β_l(x)}[k] e(f))` on toy vectors, for small `n`.
/// Used as an independent check of the leg ordering.
pub fn literal_recursion_state(
    step: &StepUnitary,
    x: &CMatrix,
    u: &CVector,
    f: &SlotAverages,
) -> ToyState {
    // P_{kh}(y e(f)) u with y acting on h0: apply N_{β(y)}[k] in slot k, then recurse
    // on the remaining slots 1..k-1 with the slot-k leg kept fixed.
    fn go(step: &StepUnitary, y: &CMatrix, u: &CVector, f: &SlotAverages, k: usize) -> CVector {
        let d = u.len();
        let w = 1 + step.m();
        if k == 0 {
            return y * u;
        }
        let beta = step.beta(y);
        let fhat = f.hat(k - 1);
        let inner_dim = d * w.pow((k - 1) as u32);
        let per_inner = inner_dim / d;
        let mut out = CVector::zeros(inner_dim * w);
        for j in 0..w {
            let mut yj = CMatrix::zeros(d, d);
            for (jp, fj) in fhat.iter().enumerate() {
                yj += beta.block(j, jp) * *fj;
            }
            let part = go(step, &yj, u, f, k - 1);
            for a in 0..d {
                for kappa in 0..per_inner {
                    out[a * per_inner * w + kappa * w + j] = part[a * per_inner + kappa];
                }
            }
        }
        out
    }
    let n = f.n();
    ToyState {
        d: u.len(),
        m: step.m(),
        n,
        data: go(step, x, u, f, n),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_rows, identity, max_abs, random_matrix, random_unit_vector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_averages(rng: &mut ChaCha8Rng, m: usize, h: f64, n: usize) -> SlotAverages {
        SlotAverages {
            h,
            values: (0..n)
                .map(|_| {
                    (0..m)
                        .map(|_| c64(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)))
                        .collect()
                })
                .collect(),
        }
    }

    fn random_case(rng: &mut ChaCha8Rng, dmax: usize, mmax: usize) -> (GkslModel, f64) {
        let d = rng.random_range(1..=dmax);
        let m = rng.random_range(1..=mmax);
        let norm = rng.random_range(0.2..2.0);
        let model = GkslModel::random(rng, d, m, norm);
        (model, rng.random_range(0.01..0.5))
    }

    #[test]
    fn step_count_guard() {
        assert_eq!(step_count(1.0, 0.125).unwrap(), 8);
        assert!(matches!(step_count(1.0, 0.3), Err(WalkError::NonIntegerSteps { .. })));
        assert!(step_count(1.0, 0.0).is_err());
    }

    #[test]
    fn slot_average_examples() {
        let zero = TestFunction::zero(2);
        let a = slot_averages(&zero, 0.1, 3).unwrap();
        assert!(a.values.iter().flatten().all(|z| z.norm() == 0.0));

        let c = TestFunction::constant(&[0.3, -0.2], 0.0, 1.0).unwrap();
        let a = slot_averages(&c, 0.25, 4).unwrap();
        for k in 0..4 {
            assert!((a.values[k][0] - c64(0.5 * 0.3, 0.0)).norm() < 1e-15);
            assert!((a.values[k][1] - c64(-0.5 * 0.2, 0.0)).norm() < 1e-15);
        }

        let ramp = TestFunction::ramp(1, 0, 0.0, 1.0, 0.0, 1.0).unwrap();
        let a = slot_averages(&ramp, 0.5, 2).unwrap();
        assert!((a.values[0][0].re - 0.17678).abs() < 1e-5);
        assert!((a.values[1][0].re - 0.53033).abs() < 1e-5);
        assert!((a.values[0][0].re - 0.125 / 0.5f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn slot_average_bound() {
        let f = TestFunction::new(vec![0.0, 0.2, 0.7], vec![vec![1.0, -0.5, 0.3], vec![0.2, 0.9, -0.4]]).unwrap();
        for h in [0.05, 0.1, 0.35] {
            let a = slot_averages(&f, h, (0.7f64 / h).ceil() as usize).unwrap();
            for row in &a.values {
                for z in row {
                    assert!(z.norm() <= h.sqrt() * f.sup_norm() + 1e-15);
                }
            }
        }
    }

    #[test]
    fn toy_embed_examples() {
        let zero = SlotAverages::zero(1, 0.1, 3);
        let e = toy_exp_embed(&zero);
        assert_eq!(e.len(), 8);
        assert_eq!(e[0], c64(1.0, 0.0));
        assert!((e.norm() - 1.0).abs() < 1e-15);

        let one = SlotAverages {
            h: 0.1,
            values: vec![vec![c64(0.3, 0.0)]],
        };
        let e = toy_exp_embed(&one);
        assert!((e.norm_squared() - 1.09).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_averages(&mut rng, 2, 0.1, 3);
        let expected: f64 = a
            .values
            .iter()
            .map(|r| 1.0 + r.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .product();
        assert!((toy_exp_embed(&a).norm_squared() - expected).abs() < 1e-13);
    }

    #[test]
    fn toy_embed_matches_interval_projection() {
        use crate::fock::IntervalSpace;
        let f = TestFunction::new(vec![0.0, 0.1, 0.2], vec![vec![0.4, 0.9, -0.1]]).unwrap();
        let h = 0.2;
        let a = slot_averages(&f, h, 1).unwrap();
        let sp = IntervalSpace::for_functions(1, 8, 6, h, 0.0, &[&f]).unwrap();
        let e = sp.exp_vector(&sp.mode_coefficients(&f, 0.0), 6);
        let col = CMatrix::from_column_slice(sp.dim(), 1, e.vector.as_slice());
        let ph = sp.project_ph(&col).norm_squared();
        assert!((ph - toy_exp_embed(&a).norm_squared()).abs() < 1e-12);
    }

    #[test]
    fn dense_operator_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = GkslModel::random(&mut rng, 2, 1, 1.3);
        let walk = Walk::new(&model, 0.2).unwrap();
        let id = walk.dense_operator(&identity(2), 3, DEFAULT_DENSE_CAP).unwrap();
        assert!(max_abs(&(id - identity(16))) < 1e-12);

        let trivial = GkslModel::new(2, 2, CMatrix::zeros(4, 2)).unwrap();
        let tw = Walk::new(&trivial, 0.2).unwrap();
        let x = random_matrix(&mut rng, 2, 2);
        let p = tw.dense_operator(&x, 2, DEFAULT_DENSE_CAP).unwrap();
        assert!(max_abs(&(p - crate::linalg::ampliate(&x, 9))) < 1e-15);

        let p1 = walk.dense_operator(&x, 1, DEFAULT_DENSE_CAP).unwrap();
        let b = walk.step().beta(&x).to_flat();
        assert!(max_abs(&(p1 - b)) < 1e-12);

        assert!(matches!(
            walk.dense_operator(&x, 12, DEFAULT_DENSE_CAP),
            Err(WalkError::Cap { .. })
        ));
    }

    #[test]
    fn dense_operator_is_homomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let (model, h) = random_case(&mut rng, 2, 1);
            let walk = Walk::new(&model, h).unwrap();
            let d = model.d();
            let n = rng.random_range(1..=5);
            let x = random_matrix(&mut rng, d, d);
            let y = random_matrix(&mut rng, d, d);
            let px = walk.dense_operator(&x, n, DEFAULT_DENSE_CAP).unwrap();
            let py = walk.dense_operator(&y, n, DEFAULT_DENSE_CAP).unwrap();
            let pxy = walk.dense_operator(&(&x * &y), n, DEFAULT_DENSE_CAP).unwrap();
            let pxs = walk.dense_operator(&x.adjoint(), n, DEFAULT_DENSE_CAP).unwrap();
            assert!(max_abs(&(pxy - &px * &py)) < 1e-9);
            assert!(max_abs(&(pxs - px.adjoint())) < 1e-9);
            assert!(crate::linalg::op_norm(&px) <= crate::linalg::op_norm(&x) * (1.0 + 1e-9));
            let pos = walk.dense_operator(&(x.adjoint() * &x), n, DEFAULT_DENSE_CAP).unwrap();
            let eig = crate::linalg::herm_eigen(&((&pos + pos.adjoint()) * c64(0.5, 0.0))).unwrap();
            assert!(eig.eigenvalues[0] >= -1e-9);
        }
    }

    #[test]
    fn dense_state_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let (model, h) = random_case(&mut rng, 3, 2);
            let walk = Walk::new(&model, h).unwrap();
            let d = model.d();
            let n = rng.random_range(1..=3);
            let x = random_matrix(&mut rng, d, d);
            let u = random_unit_vector(&mut rng, d);
            let f = random_averages(&mut rng, model.m(), h, n);
            let a = walk.dense_state(&x, &u, &f, DEFAULT_DENSE_CAP).unwrap();
            let b = walk.dense_state_by_legs(&x, &u, &f, DEFAULT_DENSE_CAP).unwrap();
            let c = literal_recursion_state(walk.step(), &x, &u, &f);
            assert!((&a.data - &b.data).camax() < 1e-10);
            assert!((&a.data - &c.data).camax() < 1e-10);
        }
    }

    #[test]
    fn dense_state_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trivial = GkslModel::new(2, 1, CMatrix::zeros(2, 2)).unwrap();
        let tw = Walk::new(&trivial, 0.1).unwrap();
        let u = random_unit_vector(&mut rng, 2);
        let f = random_averages(&mut rng, 1, 0.1, 3);
        let s = tw.dense_state(&identity(2), &u, &f, DEFAULT_DENSE_CAP).unwrap();
        assert!((&s.data - ToyState::product(&u, &f).data).camax() < 1e-15);

        let model = GkslModel::random(&mut rng, 2, 1, 1.0);
        let walk = Walk::new(&model, 0.1).unwrap();
        let x = random_matrix(&mut rng, 2, 2);
        let zero = SlotAverages::zero(1, 0.1, 3);
        let s = walk.dense_state(&x, &u, &zero, DEFAULT_DENSE_CAP).unwrap();
        let mut y = x.clone();
        for _ in 0..3 {
            y = walk.step().beta(&y).top_left();
        }
        let vac = y * &u;
        for a in 0..2 {
            assert!((s.data[a * 8] - vac[a]).norm() < 1e-12);
        }
    }

    #[test]
    fn streaming_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let trivial = GkslModel::new(2, 2, CMatrix::zeros(4, 2)).unwrap();
        let tw = Walk::new(&trivial, 0.1).unwrap();
        let x = random_matrix(&mut rng, 2, 2);
        let u = random_unit_vector(&mut rng, 2);
        let v = random_unit_vector(&mut rng, 2);
        let f = random_averages(&mut rng, 2, 0.1, 5);
        let g = random_averages(&mut rng, 2, 0.1, 5);
        let val = tw.matrix_element(&x, &u, &v, &f, &g).unwrap();
        let expected = v.dotc(&(&x * &u)) * toy_exp_pairing(&g, &f);
        assert!((val - expected).norm() < 1e-13);

        let model = GkslModel::random(&mut rng, 2, 2, 1.4);
        let walk = Walk::new(&model, 0.05).unwrap();
        let zero = SlotAverages::zero(2, 0.05, 7);
        let val = walk.matrix_element(&x, &u, &v, &zero, &zero).unwrap();
        let lit = vacuum_iteration(walk.step(), &x, &u, &v, 7);
        assert!((val - lit).norm() < 1e-12);
    }

    #[test]
    fn engines_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..30 {
            let (model, h) = random_case(&mut rng, 3, 2);
            let walk = Walk::new(&model, h).unwrap();
            let d = model.d();
            let n = rng.random_range(1..=4);
            let x = random_matrix(&mut rng, d, d);
            let u = random_unit_vector(&mut rng, d);
            let v = random_unit_vector(&mut rng, d);
            let f = random_averages(&mut rng, model.m(), h, n);
            let g = random_averages(&mut rng, model.m(), h, n);
            let stream = walk.matrix_element(&x, &u, &v, &f, &g).unwrap();
            let state = walk.dense_state(&x, &u, &f, DEFAULT_DENSE_CAP).unwrap();
            let dense = ToyState::product(&v, &g).inner(&state);
            assert!((stream - dense).norm() <= 1e-10, "{stream} vs {dense}");
        }
    }

    #[test]
    fn identity_walk_is_isometric_on_embedding() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let model = GkslModel::random(&mut rng, 3, 2, 1.5);
        let walk = Walk::new(&model, 0.1).unwrap();
        let f = random_averages(&mut rng, 2, 0.1, 20);
        let g = random_averages(&mut rng, 2, 0.1, 20);
        let trace = walk.trace(&identity(3), &f, &g).unwrap();
        let pairing = toy_exp_pairing(&g, &f);
        // Y_k = Π_{slots ≥ k} (1 + <G, F>) · 1.
        let mut partial = c64(1.0, 0.0);
        for (step, y) in trace.iter().enumerate().skip(1) {
            let k = f.n() - step;
            partial *= c64(1.0, 0.0) + g.values[k].iter().zip(&f.values[k]).map(|(a, b)| a.conj() * b).sum::<C64>();
            assert!(max_abs(&(y - identity(3) * partial)) < 1e-12);
        }
        assert!((partial - pairing).norm() < 1e-12);
    }

    #[test]
    fn norm_sq_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let (model, h) = random_case(&mut rng, 2, 2);
            let walk = Walk::new(&model, h).unwrap();
            let d = model.d();
            let n = rng.random_range(1..=4);
            let x = random_matrix(&mut rng, d, d);
            let u = random_unit_vector(&mut rng, d);
            let f = random_averages(&mut rng, model.m(), h, n);
            let ns = walk.norm_sq(&x, &u, &f).unwrap();
            assert!(ns.im.abs() < 1e-10);
            let state = walk.dense_state(&x, &u, &f, DEFAULT_DENSE_CAP).unwrap();
            assert!((ns.re - state.data.norm_squared()).abs() < 1e-10);
            let direct = walk.matrix_element(&(x.adjoint() * &x), &u, &u, &f, &f).unwrap();
            assert!((ns - direct).norm() < 1e-12);
            let bound = crate::linalg::op_norm(&x).powi(2) * ToyState::product(&u, &f).data.norm_squared();
            assert!(ns.re <= bound * (1.0 + 1e-9));
        }
        let model = GkslModel::random(&mut rng, 2, 1, 1.0);
        let walk = Walk::new(&model, 0.1).unwrap();
        let u = random_unit_vector(&mut rng, 2);
        let f = random_averages(&mut rng, 1, 0.1, 6);
        let ns = walk.norm_sq(&identity(2), &u, &f).unwrap();
        assert!((ns.re - toy_exp_embed(&f).norm_squared()).abs() < 1e-12);
    }

    #[test]
    fn step_locality() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let model = GkslModel::random(&mut rng, 2, 1, 1.2);
        let walk = Walk::new(&model, 0.1).unwrap();
        let x = random_matrix(&mut rng, 2, 2);
        let f = random_averages(&mut rng, 1, 0.1, 6);
        let g = random_averages(&mut rng, 1, 0.1, 6);
        let base = walk.trace(&x, &f, &g).unwrap();
        for changed in 0..6 {
            let mut f2 = f.clone();
            f2.values[changed][0] += c64(0.7, -0.2);
            let other = walk.trace(&x, &f2, &g).unwrap();
            // trace[s] is Y_{n-s}; Y_j only sees slots j+1..n (1-based), i.e. indices ≥ j.
            for (s, (a, b)) in base.iter().zip(&other).enumerate() {
                let j = 6 - s;
                if changed < j {
                    assert_eq!(a, b, "Y_{j} changed after editing slot {}", changed + 1);
                }
            }
        }
    }

    #[test]
    fn shape_errors() {
        let model = GkslModel::amplitude_damping(1.0);
        let walk = Walk::new(&model, 0.1).unwrap();
        let x = from_rows(1, 1, &[c64(1.0, 0.0)]);
        let u = CVector::zeros(2);
        let f = SlotAverages::zero(1, 0.1, 2);
        assert!(matches!(walk.matrix_element(&x, &u, &u, &f, &f), Err(WalkError::Shape(_))));
        let f3 = SlotAverages::zero(3, 0.1, 2);
        assert!(matches!(
            walk.matrix_element(&identity(2), &u, &u, &f3, &f3),
            Err(WalkError::Shape(_))
        ));
    }
}
