//! The walk compared against the exponential vector in `h0 ⊗ Γ_1 ⊗ ⋯ ⊗ Γ_n`, one
//! truncated interval space per slot.
//!
//! With `Z_k = 𝓟_{kh}(x e(f)) u` projected by `P_h` on slots `≤ k` and left exact on
//! slots `> k`, telescoping `Z_n - Z_0` splits into the `β - b` terms and the
//! remainder `F`, which only sees `(1 - P_h) e(f)` in one slot at a time.

use super::{SlotAverages, Walk, WalkError};
use crate::fock::{IntervalSpace, LemmaSetup, LEMMA_SAFETY};
use crate::gksl::{BlockOperator, GkslModel};
use crate::linalg::{c64, kron_vec, op_norm, CMatrix, CVector};
use crate::testfn::TestFunction;
use num_complex::Complex64 as C64;

/// Bound on `d Π_k dim Γ_k`.
pub const HYBRID_CAP: usize = 1 << 16;

/// Tolerance on the telescoping identity.
pub const DECOMPOSITION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionReport {
    pub n: usize,
    pub h: f64,
    pub hybrid_dim: usize,
    /// `‖LHS - (x u e(f) + Σ (β - b) terms + F)‖`.
    pub residual: f64,
    pub f_norm_sq: f64,
    /// `h c(f, t) ‖x‖² ‖u‖²`.
    pub bound: f64,
    pub slack: f64,
}

impl DecompositionReport {
    pub fn identity_pass(&self) -> bool {
        self.residual <= DECOMPOSITION_TOL
    }

    pub fn bound_pass(&self) -> bool {
        self.f_norm_sq <= LEMMA_SAFETY * self.bound + self.slack
    }

    pub fn pass(&self) -> bool {
        self.identity_pass() && self.bound_pass()
    }

    pub fn ratio(&self) -> f64 {
        if self.bound > 0.0 {
            self.f_norm_sq / self.bound
        } else if self.f_norm_sq == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

struct Slot {
    space: IntervalSpace,
    e: CVector,
    slack: f64,
}

impl Slot {
    fn toy_index(&self, j: usize) -> usize {
        if j == 0 {
            0
        } else {
            self.space.chi(j - 1)
        }
    }

    fn one_minus_ph(&self) -> CVector {
        let col = CMatrix::from_column_slice(self.e.len(), 1, self.e.as_slice());
        let off = &col - self.space.project_ph(&col);
        CVector::from_column_slice(off.as_slice())
    }
}

/// Embeds a toy state over `slots.len()` legs into `h0 ⊗ Γ_1 ⊗ ⋯`.
fn embed(data: &CVector, d: usize, m: usize, slots: &[Slot]) -> CVector {
    let w = 1 + m;
    let toy_per = w.pow(slots.len() as u32);
    let dims: Vec<usize> = slots.iter().map(|s| s.space.dim()).collect();
    let hyb_per: usize = dims.iter().product();
    let mut out = CVector::zeros(d * hyb_per);
    for a in 0..d {
        for kappa in 0..toy_per {
            let val = data[a * toy_per + kappa];
            if val == c64(0.0, 0.0) {
                continue;
            }
            let mut rem = kappa;
            let mut idx = 0;
            let mut stride = hyb_per;
            for (l, slot) in slots.iter().enumerate() {
                let place = w.pow((slots.len() - 1 - l) as u32);
                let j = rem / place;
                rem %= place;
                stride /= dims[l];
                idx += slot.toy_index(j) * stride;
            }
            out[a * hyb_per + idx] = val;
        }
    }
    out
}

fn tensor(parts: &[&CVector]) -> CVector {
    let mut v = vec![c64(1.0, 0.0)];
    for p in parts {
        v = kron_vec(&v, p.as_slice());
    }
    CVector::from_vec(v)
}

fn unit(dim: usize, idx: usize, scale: C64) -> CVector {
    let mut v = CVector::zeros(dim);
    v[idx] = scale;
    v
}

/// Assembles both sides of the telescoping identity for `n` slots and measures `F`.
#[allow(clippy::too_many_arguments)]
pub fn decomposition_check(
    model: &GkslModel,
    x: &CMatrix,
    u: &CVector,
    f: &TestFunction,
    h: f64,
    n: usize,
    cells: usize,
    cutoff: usize,
    cap: usize,
) -> Result<DecompositionReport, WalkError> {
    let (d, m) = (model.d(), model.m());
    if f.channels() != m {
        return Err(WalkError::Shape(format!("test function has {} channels, model has {m}", f.channels())));
    }
    if n == 0 {
        return Err(WalkError::Shape("need at least one slot".into()));
    }
    let walk = Walk::new(model, h)?;
    let avgs: SlotAverages = super::slot_averages(f, h, n)?;

    let mut slots = Vec::with_capacity(n);
    let mut hybrid_dim = d;
    for k in 0..n {
        let setup = LemmaSetup::new(f, f, k as f64 * h, h, cells, cutoff)?;
        let slack = setup.ef.tail.sqrt() + h * f.c_f() / cells as f64;
        hybrid_dim = hybrid_dim.saturating_mul(setup.space.dim());
        slots.push(Slot {
            e: setup.ef.vector.clone(),
            space: setup.space,
            slack,
        });
    }
    if hybrid_dim > cap {
        return Err(WalkError::Cap { dim: hybrid_dim, cap });
    }

    let lhs = embed(
        &walk.dense_state_by_legs(x, u, &avgs, usize::MAX)?.data,
        d,
        m,
        &slots,
    );

    let xu = x * u;
    let mut parts: Vec<&CVector> = vec![&xu];
    parts.extend(slots.iter().map(|s| &s.e));
    let term0 = tensor(&parts);

    let beta = walk.step().beta(x);
    let alpha = beta.sub(&BlockOperator::ampliated(x, m));
    let mut middle = CVector::zeros(hybrid_dim);
    let mut remainder = CVector::zeros(hybrid_dim);
    for k in 0..n {
        let prefix = avgs.prefix(k);
        let fhat = avgs.hat(k);
        let tail: Vec<&CVector> = slots[k + 1..].iter().map(|s| &s.e).collect();
        let tail_vec = tensor(&tail);
        for j in 0..=m {
            let mut y = CMatrix::zeros(d, d);
            for (jp, fj) in fhat.iter().enumerate() {
                y += alpha.block(j, jp) * *fj;
            }
            let head = embed(&walk.dense_state_by_legs(&y, u, &prefix, usize::MAX)?.data, d, m, &slots[..k]);
            let slot_vec = unit(slots[k].space.dim(), slots[k].toy_index(j), c64(1.0, 0.0));
            middle += tensor(&[&head, &slot_vec, &tail_vec]);
        }
        let head = embed(&walk.dense_state_by_legs(x, u, &prefix, usize::MAX)?.data, d, m, &slots[..k]);
        remainder -= tensor(&[&head, &slots[k].one_minus_ph(), &tail_vec]);
    }

    let residual = (&lhs - (&term0 + &middle + &remainder)).norm();
    let f_norm_sq = remainder.norm_squared();
    let t = n as f64 * h;
    let e_norm = (0.5 * f.norm_sq_on(0.0, t)).exp();
    let c = 2.0 * t * (f.c_f() + f.sup_norm()) * e_norm;
    let scale = op_norm(x).powi(2) * u.norm_squared();
    let bound = h * c * scale;
    let e_sq: f64 = slots.iter().map(|s| s.e.norm_squared()).product();
    let slack = scale * e_sq * (2.0 * slots.iter().map(|s| s.slack).sum::<f64>() + 1e-13);
    Ok(DecompositionReport {
        n,
        h,
        hybrid_dim,
        residual,
        f_norm_sq,
        bound,
        slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_matrix, random_unit_vector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_function_gives_zero_remainder() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let model = GkslModel::random(&mut rng, 2, 1, 1.0);
        let x = random_matrix(&mut rng, 2, 2);
        let u = random_unit_vector(&mut rng, 2);
        let f = TestFunction::zero(1);
        for n in 1..=2 {
            let r = decomposition_check(&model, &x, &u, &f, 0.25, n, 4, 3, HYBRID_CAP).unwrap();
            assert_eq!(r.f_norm_sq, 0.0);
            assert!(r.pass(), "{r:?}");
        }
    }

    #[test]
    fn constant_function_single_slot() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let model = GkslModel::random(&mut rng, 2, 1, 1.3);
        let x = random_matrix(&mut rng, 2, 2);
        let u = random_unit_vector(&mut rng, 2);
        let f = TestFunction::constant(&[0.8], 0.0, 1.0).unwrap();
        let h = 0.2;
        let r = decomposition_check(&model, &x, &u, &f, h, 1, 4, 4, HYBRID_CAP).unwrap();
        let setup = LemmaSetup::new(&f, &f, 0.0, h, 4, 4).unwrap();
        let off = setup.check_norm_diff().check.lhs;
        let expected = (&x * &u).norm_squared() * off * off;
        assert!((r.f_norm_sq - expected).abs() < 1e-9);
        assert!(r.pass(), "{r:?}");
    }

    #[test]
    fn identity_and_bound_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for n in 1..=2 {
            for _ in 0..4 {
                let model = GkslModel::random(&mut rng, 2, 1, 1.5);
                let x = random_matrix(&mut rng, 2, 2);
                let u = random_unit_vector(&mut rng, 2);
                let f = TestFunction::new(vec![0.0, 0.15, 0.4], vec![vec![0.3, -0.9, 0.6]]).unwrap();
                let r = decomposition_check(&model, &x, &u, &f, 0.2, n, 4, 4, HYBRID_CAP).unwrap();
                assert!(r.identity_pass(), "{r:?}");
                assert!(r.bound_pass(), "{r:?}");
                assert!(r.f_norm_sq > 0.0);
            }
        }
    }

    #[test]
    fn cap_is_enforced() {
        let model = GkslModel::amplitude_damping(1.0);
        let f = TestFunction::constant(&[0.5], 0.0, 1.0).unwrap();
        let x = crate::linalg::identity(2);
        let u = CVector::from_vec(vec![c64(1.0, 0.0), c64(0.0, 0.0)]);
        assert!(matches!(
            decomposition_check(&model, &x, &u, &f, 0.5, 2, 4, 4, 10),
            Err(WalkError::Cap { .. })
        ));
    }
}
