//! Reference values for the limit flow `j_t` between exponential vectors.
//!
//! `m_t(x) = <v e(g_{t]}), j_t(x) u e(f_{t]})>` obeys
//! `m_t' = m_t ∘ (𝓛^{g(t),f(t)} + <g(t), f(t)>)` with `m_0(x) = <v, x u>`, where
//! `𝓛^{g,f}(x) = L(x) + Σ_i conj(g_i) δ_i(x) + Σ_i f_i δ†_i(x)`. Writing
//! `m_t(x) = Σ_{ab} W_{ab} x_{ab}` turns this into a linear ODE on `W`, integrated
//! here with classical RK4 on the pieces where `f` and `g` are linear.

use crate::gksl::{vec_rows, GkslModel};
use crate::linalg::{c64, CMatrix, CVector};
use crate::testfn::TestFunction;
use crate::walk::{slot_averages, step_count, SlotAverages, Walk, WalkError};
use num_complex::Complex64 as C64;

pub const MIN_STEPS: usize = 64;
pub const MAX_STEPS: usize = 1 << 20;
pub const REFINE_TOL: f64 = 1e-8;

/// `𝓛^{g,f}(x)` straight from the structure maps.
pub fn weak_generator(model: &GkslModel, x: &CMatrix, g: &[C64], f: &[C64]) -> Result<CMatrix, WalkError> {
    let (d, m) = (model.d(), model.m());
    if g.len() != m || f.len() != m {
        return Err(WalkError::Shape(format!("noise vectors must have length {m}")));
    }
    let mut out = model.lindblad(x)?;
    let delta = model.delta(x)?;
    let dagger = model.delta_dagger(x)?;
    for i in 0..m {
        out += CMatrix::from_fn(d, d, |a, b| g[i].conj() * delta[(a * m + i, b)]);
        out += CMatrix::from_fn(d, d, |a, b| f[i] * dagger[(a, b * m + i)]);
    }
    Ok(out)
}

/// `∫_a^b Σ_i g_i f_i`, exact for piecewise-linear inputs.
pub fn pairing_integral(g: &TestFunction, f: &TestFunction, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut pts = vec![a];
    pts.extend(g.joint_breakpoints(f, a, b));
    pts.push(b);
    let mut acc = 0.0;
    for w in pts.windows(2) {
        let (s, e) = (w[0], w[1]);
        let mid = 0.5 * (s + e);
        let prod = |t: f64| -> f64 {
            (0..f.channels())
                .map(|i| g.value_near(i, t, mid) * f.value_near(i, t, mid))
                .sum()
        };
        acc += (e - s) / 6.0 * (prod(s) + 4.0 * prod(mid) + prod(e));
    }
    acc
}

/// `x ↦ Σ_{ab} W_{ab} x_{ab}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakFunctional {
    pub w: CMatrix,
}

impl WeakFunctional {
    pub fn initial(u: &CVector, v: &CVector) -> Self {
        Self {
            w: CMatrix::from_fn(u.len(), u.len(), |a, b| v[a].conj() * u[b]),
        }
    }

    pub fn apply(&self, x: &CMatrix) -> C64 {
        self.w.iter().zip(x.iter()).map(|(a, b)| a * b).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowValue {
    pub value: C64,
    pub steps: usize,
    /// Change from the previous refinement level.
    pub change: f64,
    pub converged: bool,
}

/// Superoperator matrices of `L`, `δ_i` and `δ†_i` on row-major vectorised operators.
#[derive(Debug, Clone)]
pub struct FlowOracle {
    d: usize,
    m: usize,
    lindblad: CMatrix,
    delta: Vec<CMatrix>,
    delta_dagger: Vec<CMatrix>,
}

fn superop(d: usize, map: impl Fn(&CMatrix) -> CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(d * d, d * d);
    for a in 0..d {
        for b in 0..d {
            let mut e = CMatrix::zeros(d, d);
            e[(a, b)] = c64(1.0, 0.0);
            out.set_column(a * d + b, &vec_rows(&map(&e)).column(0));
        }
    }
    out
}

impl FlowOracle {
    pub fn new(model: &GkslModel) -> Self {
        let (d, m) = (model.d(), model.m());
        let lindblad = superop(d, |e| model.lindblad(e).expect("square"));
        let delta = (0..m)
            .map(|i| {
                superop(d, |e| {
                    let full = model.delta(e).expect("square");
                    CMatrix::from_fn(d, d, |a, b| full[(a * m + i, b)])
                })
            })
            .collect();
        let delta_dagger = (0..m)
            .map(|i| {
                superop(d, |e| {
                    let full = model.delta_dagger(e).expect("square");
                    CMatrix::from_fn(d, d, |a, b| full[(a, b * m + i)])
                })
            })
            .collect();
        Self {
            d,
            m,
            lindblad,
            delta,
            delta_dagger,
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `𝓛^{g,f}` as a `d² x d²` matrix.
    pub fn generator_matrix(&self, g: &[C64], f: &[C64]) -> CMatrix {
        let mut out = self.lindblad.clone();
        for i in 0..self.m {
            out += &self.delta[i] * g[i].conj();
            out += &self.delta_dagger[i] * f[i];
        }
        out
    }

    /// Transposed generator plus the pairing, at time `t` on the piece containing `anchor`.
    fn rate(&self, f: &TestFunction, g: &TestFunction, t: f64, anchor: f64) -> CMatrix {
        let fv: Vec<C64> = (0..self.m).map(|i| c64(f.value_near(i, t, anchor), 0.0)).collect();
        let gv: Vec<C64> = (0..self.m).map(|i| c64(g.value_near(i, t, anchor), 0.0)).collect();
        let pair: C64 = gv.iter().zip(&fv).map(|(a, b)| a.conj() * b).sum();
        let mut a = self.generator_matrix(&gv, &fv).transpose();
        for k in 0..self.d * self.d {
            a[(k, k)] += pair;
        }
        a
    }

    fn check(&self, u: &CVector, v: &CVector, f: &TestFunction, g: &TestFunction, t: f64) -> Result<(), WalkError> {
        if u.len() != self.d || v.len() != self.d {
            return Err(WalkError::Shape(format!("vectors must have length {}", self.d)));
        }
        if f.channels() != self.m || g.channels() != self.m {
            return Err(WalkError::Shape(format!("test functions must have {} channels", self.m)));
        }
        if !(t >= 0.0) || !t.is_finite() {
            return Err(WalkError::Shape(format!("t must be finite and non-negative, got {t}")));
        }
        Ok(())
    }

    /// `W_t` after RK4 with about `steps` steps, split over the linear pieces of `f, g`.
    pub fn functional(
        &self,
        u: &CVector,
        v: &CVector,
        f: &TestFunction,
        g: &TestFunction,
        t: f64,
        steps: usize,
    ) -> Result<WeakFunctional, WalkError> {
        self.check(u, v, f, g, t)?;
        let init = WeakFunctional::initial(u, v);
        if t == 0.0 {
            return Ok(init);
        }
        let mut pts = vec![0.0];
        pts.extend(f.joint_breakpoints(g, 0.0, t));
        pts.push(t);
        let mut w = vec_rows(&init.w);
        let half = c64(0.5, 0.0);
        for seg in pts.windows(2) {
            let (s, e) = (seg[0], seg[1]);
            let count = ((steps as f64 * (e - s) / t).ceil() as usize).max(1);
            let dt = (e - s) / count as f64;
            let anchor = 0.5 * (s + e);
            let a0 = self.rate(f, g, s, anchor);
            let mut prev = a0;
            for k in 0..count {
                let t0 = s + k as f64 * dt;
                let t1 = if k + 1 == count { e } else { t0 + dt };
                let am = self.rate(f, g, t0 + 0.5 * dt, anchor);
                let a1 = self.rate(f, g, t1, anchor);
                let k1 = &prev * &w;
                let k2 = &am * (&w + &k1 * (half * dt));
                let k3 = &am * (&w + &k2 * (half * dt));
                let k4 = &a1 * (&w + &k3 * c64(dt, 0.0));
                w += (k1 + (k2 + k3) * c64(2.0, 0.0) + k4) * c64(dt / 6.0, 0.0);
                prev = a1;
            }
        }
        let d = self.d;
        Ok(WeakFunctional {
            w: CMatrix::from_fn(d, d, |a, b| w[(a * d + b, 0)]),
        })
    }

    /// `m_t(x)`, doubling the step count from `steps` until successive values differ
    /// by less than `REFINE_TOL`.
    #[allow(clippy::too_many_arguments)]
    pub fn matrix_element(
        &self,
        x: &CMatrix,
        u: &CVector,
        v: &CVector,
        f: &TestFunction,
        g: &TestFunction,
        t: f64,
        steps: usize,
    ) -> Result<FlowValue, WalkError> {
        if x.shape() != (self.d, self.d) {
            return Err(WalkError::Shape(format!("observable must be {0}x{0}", self.d)));
        }
        let mut n = steps.max(MIN_STEPS);
        let mut prev = self.functional(u, v, f, g, t, n)?.apply(x);
        loop {
            let next_n = n * 2;
            let next = self.functional(u, v, f, g, t, next_n)?.apply(x);
            let change = (next - prev).norm();
            let converged = change < REFINE_TOL;
            if converged || next_n >= MAX_STEPS {
                return Ok(FlowValue {
                    value: next,
                    steps: next_n,
                    change,
                    converged,
                });
            }
            n = next_n;
            prev = next;
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn flow_matrix_element(
    model: &GkslModel,
    x: &CMatrix,
    u: &CVector,
    v: &CVector,
    f: &TestFunction,
    g: &TestFunction,
    t: f64,
    steps: usize,
) -> Result<FlowValue, WalkError> {
    FlowOracle::new(model).matrix_element(x, u, v, f, g, t, steps)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub walk: C64,
    pub oracle: C64,
    pub abs_err: f64,
}

impl Comparison {
    pub fn new(walk: C64, oracle: C64) -> Self {
        Self {
            walk,
            oracle,
            abs_err: (walk - oracle).norm(),
        }
    }
}

/// Walk at `f = g = 0` against `<v, T_t(x) u>`.
pub fn vacuum_check(
    model: &GkslModel,
    x: &CMatrix,
    u: &CVector,
    v: &CVector,
    t: f64,
    h: f64,
) -> Result<Comparison, WalkError> {
    let n = step_count(t, h)?;
    let walk = Walk::new(model, h)?;
    let zero = SlotAverages::zero(model.m(), h, n);
    let w = walk.matrix_element(x, u, v, &zero, &zero)?;
    let oracle = v.dotc(&(model.semigroup(x, t)? * u));
    Ok(Comparison::new(w, oracle))
}

/// The streaming walk at a fine step, used as a second reference.
#[allow(clippy::too_many_arguments)]
pub fn fine_walk_reference(
    model: &GkslModel,
    x: &CMatrix,
    u: &CVector,
    v: &CVector,
    f: &TestFunction,
    g: &TestFunction,
    t: f64,
    h_ref: f64,
) -> Result<C64, WalkError> {
    let n = step_count(t, h_ref)?;
    let walk = Walk::new(model, h_ref)?;
    let (fa, ga) = if n == 0 {
        (SlotAverages::zero(model.m(), h_ref, 0), SlotAverages::zero(model.m(), h_ref, 0))
    } else {
        (slot_averages(f, h_ref, n)?, slot_averages(g, h_ref, n)?)
    };
    walk.matrix_element(x, u, v, &fa, &ga)
}

/// Observed order of the RK4 integrator: errors at each of `steps` against a run
/// with `reference_steps`, fitted on a log-log scale.
#[allow(clippy::too_many_arguments)]
pub fn integrator_order(
    oracle: &FlowOracle,
    x: &CMatrix,
    u: &CVector,
    v: &CVector,
    f: &TestFunction,
    g: &TestFunction,
    t: f64,
    steps: &[usize],
    reference_steps: usize,
) -> Result<(f64, Vec<f64>), WalkError> {
    let reference = oracle.functional(u, v, f, g, t, reference_steps)?.apply(x);
    let mut errs = Vec::with_capacity(steps.len());
    for &s in steps {
        errs.push((oracle.functional(u, v, f, g, t, s)?.apply(x) - reference).norm());
    }
    let xs: Vec<f64> = steps.iter().map(|&s| s as f64).collect();
    Ok((-crate::gksl::log_log_slope(&xs, &errs), errs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, identity, max_abs, random_matrix, random_unit_vector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_fn(rng: &mut ChaCha8Rng, m: usize, end: f64) -> TestFunction {
        let knots = vec![0.0, 0.3 * end, 0.7 * end, end];
        let values = (0..m)
            .map(|_| (0..4).map(|_| rng.random_range(-0.8..0.8)).collect())
            .collect();
        TestFunction::new(knots, values).unwrap()
    }

    fn c(v: f64) -> C64 {
        c64(v, 0.0)
    }

    #[test]
    fn generator_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let model = GkslModel::random(&mut rng, 3, 2, 1.4);
        let oracle = FlowOracle::new(&model);
        let x = random_matrix(&mut rng, 3, 3);
        let zero = [c(0.0); 2];
        let l = weak_generator(&model, &x, &zero, &zero).unwrap();
        assert!(max_abs(&(l - model.lindblad(&x).unwrap())) < 1e-14);

        let g = [c64(0.3, -0.2), c64(-0.5, 0.1)];
        let f = [c64(0.7, 0.4), c64(0.2, -0.6)];
        let direct = weak_generator(&model, &identity(3), &g, &f).unwrap();
        assert!(max_abs(&direct) < 1e-12);

        let direct = weak_generator(&model, &x, &g, &f).unwrap();
        let via_matrix = oracle.generator_matrix(&g, &f) * vec_rows(&x);
        let via_matrix = CMatrix::from_fn(3, 3, |a, b| via_matrix[(a * 3 + b, 0)]);
        assert!(max_abs(&(direct - via_matrix)) < 1e-13);

        let blocks = model.structure_maps(&x).unwrap();
        let mut expect = blocks.block(0, 0).clone();
        for i in 0..2 {
            expect += blocks.block(i + 1, 0) * g[i].conj() + blocks.block(0, i + 1) * f[i];
        }
        let direct = weak_generator(&model, &x, &g, &f).unwrap();
        assert!(max_abs(&(direct - expect)) < 1e-13);
    }

    #[test]
    fn generator_matches_derivative_at_zero() {
        let model = GkslModel::amplitude_damping(1.0);
        let oracle = FlowOracle::new(&model);
        let x = diag(&[0.0, 1.0]);
        let u = CVector::from_vec(vec![c(0.6), c64(0.0, 0.8)]);
        let v = CVector::from_vec(vec![c(0.8), c(-0.6)]);
        let cst = 0.4;
        let f = TestFunction::constant(&[cst], 0.0, 1.0).unwrap();
        let gen = weak_generator(&model, &x, &[c(cst)], &[c(cst)]).unwrap();
        let expected = v.dotc(&(gen * &u)) + c(cst * cst) * v.dotc(&(&x * &u));
        let s = 1e-3;
        let m0 = v.dotc(&(&x * &u));
        let m1 = oracle.matrix_element(&x, &u, &v, &f, &f, s, 64).unwrap().value;
        let m2 = oracle.matrix_element(&x, &u, &v, &f, &f, 0.5 * s, 64).unwrap().value;
        let fd = (m2 * 4.0 - m1 - m0 * 3.0) / s;
        assert!((fd - expected).norm() < 1e-6, "{fd} vs {expected}");
    }

    #[test]
    fn pairing_integral_exact() {
        let f = TestFunction::ramp(1, 0, 0.0, 1.0, 0.0, 1.0).unwrap();
        let g = TestFunction::constant(&[2.0], 0.5, 2.0).unwrap();
        assert!((pairing_integral(&g, &f, 0.0, 3.0) - 0.75).abs() < 1e-15);
        assert!((pairing_integral(&f, &f, 0.0, 1.0) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn semigroup_reduction_and_unitality() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..5 {
            let d = rng.random_range(1..=3);
            let m = rng.random_range(1..=2);
            let norm = rng.random_range(0.3..2.0);
            let model = GkslModel::random(&mut rng, d, m, norm);
            let oracle = FlowOracle::new(&model);
            let x = random_matrix(&mut rng, d, d);
            let u = random_unit_vector(&mut rng, d);
            let v = random_unit_vector(&mut rng, d);
            let t = rng.random_range(0.1..2.0);
            let zero = TestFunction::zero(m);
            let got = oracle.matrix_element(&x, &u, &v, &zero, &zero, t, 64).unwrap();
            assert!(got.converged);
            let expect = v.dotc(&(model.semigroup(&x, t).unwrap() * &u));
            assert!((got.value - expect).norm() < 1e-9);

            let f = random_fn(&mut rng, m, t);
            let g = random_fn(&mut rng, m, t);
            let one = oracle.matrix_element(&identity(d), &u, &v, &f, &g, t, 64).unwrap();
            let expect = v.dotc(&u) * pairing_integral(&g, &f, 0.0, t).exp();
            assert!((one.value - expect).norm() < 1e-9);
        }
    }

    #[test]
    fn trivial_model_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let model = GkslModel::new(2, 1, CMatrix::zeros(2, 2)).unwrap();
        let x = random_matrix(&mut rng, 2, 2);
        let u = random_unit_vector(&mut rng, 2);
        let v = random_unit_vector(&mut rng, 2);
        let f = random_fn(&mut rng, 1, 1.0);
        let g = random_fn(&mut rng, 1, 1.0);
        let got = flow_matrix_element(&model, &x, &u, &v, &f, &g, 1.0, 64).unwrap();
        let expect = v.dotc(&(&x * &u)) * pairing_integral(&g, &f, 0.0, 1.0).exp();
        assert!((got.value - expect).norm() < 1e-10);
        let zero = TestFunction::zero(1);
        let got = flow_matrix_element(&model, &identity(2), &u, &v, &zero, &zero, 1.0, 64).unwrap();
        assert!((got.value - v.dotc(&u)).norm() < 1e-14);
    }

    #[test]
    fn hermitian_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let model = GkslModel::random(&mut rng, 2, 2, 1.2);
        let oracle = FlowOracle::new(&model);
        let x = random_matrix(&mut rng, 2, 2);
        let u = random_unit_vector(&mut rng, 2);
        let v = random_unit_vector(&mut rng, 2);
        let f = random_fn(&mut rng, 2, 1.5);
        let g = random_fn(&mut rng, 2, 1.5);
        let a = oracle.matrix_element(&x.adjoint(), &u, &v, &f, &g, 1.5, 64).unwrap().value;
        let b = oracle.matrix_element(&x, &v, &u, &g, &f, 1.5, 64).unwrap().value;
        assert!((a - b.conj()).norm() < 1e-9);
    }

    #[test]
    fn rk4_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let model = GkslModel::random(&mut rng, 2, 1, 3.0);
        let oracle = FlowOracle::new(&model);
        let x = random_matrix(&mut rng, 2, 2);
        let u = random_unit_vector(&mut rng, 2);
        let v = random_unit_vector(&mut rng, 2);
        let f = TestFunction::bump(1, 0, 2.0, 0.0, 4.0).unwrap();
        let (order, errs) = integrator_order(&oracle, &x, &u, &v, &f, &f, 4.0, &[128, 256, 512], 8192).unwrap();
        assert!(errs[2] > 1e-13, "{errs:?}");
        assert!(order >= 3.8, "order {order}, errors {errs:?}");
    }

    #[test]
    fn vacuum_check_examples() {
        let model = GkslModel::new(2, 1, CMatrix::zeros(2, 2)).unwrap();
        let x = diag(&[0.3, -1.0]);
        let u = CVector::from_vec(vec![c(0.6), c(0.8)]);
        let r = vacuum_check(&model, &x, &u, &u, 1.0, 0.125).unwrap();
        assert!(r.abs_err < 1e-15);

        let model = GkslModel::amplitude_damping(1.0);
        let x = diag(&[0.0, 1.0]);
        let s = 1.0 / 2f64.sqrt();
        let u = CVector::from_vec(vec![c(s), c(s)]);
        let mut errs = Vec::new();
        for k in 2..=7 {
            let r = vacuum_check(&model, &x, &u, &u, 1.0, 0.5f64.powi(k)).unwrap();
            assert!((r.oracle.re - 0.5 * (-1f64).exp()).abs() < 1e-12);
            errs.push(r.abs_err);
        }
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
        let ratio = errs[4] / errs[5];
        assert!((ratio - 2.0).abs() < 0.2, "ratio {ratio}");
        assert!(matches!(vacuum_check(&model, &x, &u, &u, 1.0, 0.3), Err(WalkError::NonIntegerSteps { .. })));
    }

    #[test]
    fn fine_walk_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let trivial = GkslModel::new(2, 1, CMatrix::zeros(2, 2)).unwrap();
        let x = random_matrix(&mut rng, 2, 2);
        let u = random_unit_vector(&mut rng, 2);
        let v = random_unit_vector(&mut rng, 2);
        let f = TestFunction::bump(1, 0, 0.5, 0.0, 1.0).unwrap();
        let got = fine_walk_reference(&trivial, &x, &u, &v, &f, &f, 1.0, 1.0 / 256.0).unwrap();
        let avgs = slot_averages(&f, 1.0 / 256.0, 256).unwrap();
        let expect = v.dotc(&(&x * &u)) * crate::walk::toy_exp_pairing(&avgs, &avgs);
        assert!((got - expect).norm() < 1e-12);

        let model = GkslModel::random(&mut rng, 2, 1, 1.0);
        let oracle = FlowOracle::new(&model);
        let g = TestFunction::ramp(1, 0, 0.0, 1.0, 0.4, -0.3).unwrap();
        let exact = oracle.matrix_element(&x, &u, &v, &f, &g, 1.0, 64).unwrap().value;
        let errs: Vec<f64> = [8, 10]
            .iter()
            .map(|&k| (fine_walk_reference(&model, &x, &u, &v, &f, &g, 1.0, 0.5f64.powi(k)).unwrap() - exact).norm())
            .collect();
        assert!(errs[1] < errs[0], "{errs:?}");
    }
}
