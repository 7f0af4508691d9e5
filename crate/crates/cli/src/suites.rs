//! Property suites over models, interval spaces, walks and the flow oracle.
//!
//! Each suite returns one [`CheckLine`] per property with the worst value seen over
//! its sample.

use qrw_core::flow::{integrator_order, pairing_integral, FlowOracle};
use qrw_core::fock::{
    adjoint_relations, composition_table, BoundCheck, CheckMode, CompositionInputs, IntervalSpace,
    LemmaSetup, Process,
};
use qrw_core::gksl::{homomorphism_residuals, log_log_slope, EPSILON};
use qrw_core::linalg::{c64, expm, herm_eigen, identity, max_abs, op_norm, random_matrix, random_unit_vector};
use qrw_core::walk::{decomposition_check, SlotAverages, ToyState, HYBRID_CAP};
use qrw_core::{CMatrix, GkslModel, TestFunction, Walk};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::fmt;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    /// Should vanish: `value ≤ limit`.
    Residual,
    /// Worst excess over an inequality, zero when it holds.
    Bound,
    /// A measured rate or order: `value ≥ limit`.
    AtLeast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub suite: &'static str,
    pub name: String,
    pub kind: CheckKind,
    pub value: f64,
    pub limit: f64,
    pub note: String,
}

impl CheckLine {
    pub fn residual(suite: &'static str, name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            suite,
            name: name.into(),
            kind: CheckKind::Residual,
            value,
            limit,
            note: String::new(),
        }
    }

    pub fn bound(suite: &'static str, name: impl Into<String>, excess: f64) -> Self {
        Self {
            suite,
            name: name.into(),
            kind: CheckKind::Bound,
            value: excess,
            limit: 0.0,
            note: String::new(),
        }
    }

    pub fn at_least(suite: &'static str, name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            suite,
            name: name.into(),
            kind: CheckKind::AtLeast,
            value,
            limit,
            note: String::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    pub fn pass(&self) -> bool {
        match self.kind {
            CheckKind::Residual | CheckKind::Bound => self.value <= self.limit,
            CheckKind::AtLeast => self.value >= self.limit,
        }
    }
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.pass() { "PASS" } else { "FAIL" };
        write!(f, "{status} {}/{}: ", self.suite, self.name)?;
        match self.kind {
            CheckKind::Residual => write!(f, "{:.3e} <= {:.3e}", self.value, self.limit)?,
            CheckKind::AtLeast => write!(f, "{:.3e} >= {:.3e}", self.value, self.limit)?,
            CheckKind::Bound => write!(f, "excess over bound {:.3e}", self.value)?,
        }
        if !self.note.is_empty() {
            write!(f, "  [{}]", self.note)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub lines: Vec<CheckLine>,
}

impl Report {
    pub fn extend(&mut self, lines: Vec<CheckLine>) {
        self.lines.extend(lines);
    }

    pub fn pass(&self) -> bool {
        self.lines.iter().all(CheckLine::pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckLine> {
        self.lines.iter().filter(|l| !l.pass())
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for line in &self.lines {
            writeln!(f, "{line}")?;
        }
        let failed = self.failures().count();
        write!(f, "{} checks, {failed} failed", self.lines.len())
    }
}

/// Models with `d ≤ 4`, `m ≤ 3` and `‖R‖ ≤ 2`.
pub fn random_models(rng: &mut ChaCha8Rng, count: usize) -> Vec<GkslModel> {
    (0..count)
        .map(|_| {
            let d = rng.random_range(1..=4);
            let m = rng.random_range(1..=3);
            let norm = rng.random_range(0.05..=2.0);
            GkslModel::random(rng, d, m, norm)
        })
        .collect()
}

/// Test function on `[start, start + len]` with sup norm drawn from `[lo, hi]`.
pub fn random_test_function(rng: &mut ChaCha8Rng, m: usize, start: f64, len: f64, lo: f64, hi: f64) -> TestFunction {
    let knots = vec![start, start + 0.4 * len, start + len];
    let mut values: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let raw = TestFunction::new(knots.clone(), values.clone()).expect("valid knots");
    let scale = rng.random_range(lo..=hi) / raw.sup_norm().max(1e-12);
    values.iter_mut().flatten().for_each(|v| *v *= scale);
    TestFunction::new(knots, values).expect("valid knots")
}

const UNITARITY_TOL: f64 = 1e-10;
const EXPM_TOL: f64 = 1e-9;

pub fn unitary_suite(models: &[GkslModel], hs: &[f64]) -> Result<Vec<CheckLine>, CliError> {
    let mut unit: f64 = 0.0;
    let mut vs_expm: f64 = 0.0;
    for model in models {
        for &h in hs {
            let u = model.u_h(h)?.to_flat();
            let n = u.nrows();
            unit = unit.max(op_norm(&(u.adjoint() * &u - identity(n))));
            let e = expm(&(model.r_tilde() * c64(h.sqrt(), 0.0)));
            vs_expm = vs_expm.max(max_abs(&(u - e)));
        }
    }
    Ok(vec![
        CheckLine::residual("unitary", "U*U - 1", unit, UNITARITY_TOL),
        CheckLine::residual("unitary", "closed form vs expm", vs_expm, EXPM_TOL),
    ])
}

pub fn estimate_suite(models: &[GkslModel], hs: &[f64]) -> Result<Vec<CheckLine>, CliError> {
    let mut worst: Vec<(&'static str, f64)> = Vec::new();
    for model in models {
        for &h in hs {
            for (k, chk) in model.step(h)?.unitary_estimates(model).into_iter().enumerate() {
                let excess = (chk.lhs - chk.rhs).max(0.0);
                if worst.len() <= k {
                    worst.push((chk.name, excess));
                } else {
                    worst[k].1 = worst[k].1.max(excess);
                }
            }
        }
    }
    Ok(worst
        .into_iter()
        .map(|(name, excess)| CheckLine::bound("estimates", name, excess))
        .collect())
}

const HOMOMORPHISM_TOL: f64 = 1e-10;

pub fn homomorphism_suite(
    rng: &mut ChaCha8Rng,
    models: &[GkslModel],
    hs: &[f64],
    pairs: usize,
    corrupt: bool,
) -> Result<Vec<CheckLine>, CliError> {
    let names = [
        "β(xy) = β(x)β(y)",
        "β(x*) = β(x)*",
        "component adjoints",
        "β1 of a product",
        "β2 of a product",
        "β3 of a product",
        "β4 of a product",
    ];
    let mut worst = [0.0f64; 7];
    for k in 0..pairs {
        let model = &models[k % models.len()];
        let h = hs[k % hs.len()];
        let d = model.d();
        let x = random_matrix(rng, d, d);
        let y = random_matrix(rng, d, d);
        let step = model.step(h)?;
        let beta = |z: &CMatrix| {
            let mut b = step.beta(z);
            if corrupt {
                *b.block_mut(0, 0) *= c64(1.001, 0.0);
            }
            b
        };
        let r = homomorphism_residuals(beta, &x, &y);
        let vals = [
            r.multiplicative,
            r.adjoint,
            r.components[0],
            r.components[1],
            r.components[2],
            r.components[3],
            r.components[4],
        ];
        for (w, v) in worst.iter_mut().zip(vals) {
            *w = w.max(v);
        }
    }
    Ok(names
        .iter()
        .zip(worst)
        .map(|(n, w)| CheckLine::residual("homomorphism", *n, w, HOMOMORPHISM_TOL))
        .collect())
}

/// Step sizes for the defect scaling fit.
pub const DEFECT_SCALING_H: [f64; 3] = [1e-2, 1e-3, 1e-4];

pub fn defect_suite(rng: &mut ChaCha8Rng, models: &[GkslModel], hs: &[f64]) -> Result<Vec<CheckLine>, CliError> {
    let names = ["β1", "β2*", "β3", "β4"];
    let mut excess = [0.0f64; 4];
    let mut slopes = [f64::INFINITY; 4];
    let mut skipped = [0usize; 4];
    for model in models {
        let d = model.d();
        let x = random_matrix(rng, d, d);
        for &h in hs.iter().filter(|&&h| h <= 1.0) {
            let rep = model.defect(&x, h)?;
            for (l, b) in rep.blocks.iter().enumerate() {
                excess[l] = excess[l].max(b.norm - b.bound);
            }
        }
        let mut norms = [[0.0; 3]; 4];
        for (k, &h) in DEFECT_SCALING_H.iter().enumerate() {
            let rep = model.defect(&x, h)?;
            for l in 0..4 {
                norms[l][k] = rep.blocks[l].norm;
            }
        }
        for l in 0..4 {
            // Blocks that vanish identically (scalar h0, commuting data) carry no rate.
            if norms[l].iter().any(|&v| v < 1e-13 * op_norm(&x).max(1.0)) {
                skipped[l] += 1;
                continue;
            }
            slopes[l] = slopes[l].min(log_log_slope(&DEFECT_SCALING_H, &norms[l]));
        }
    }
    let mut out = Vec::new();
    for l in 0..4 {
        out.push(CheckLine::bound("defect", format!("{} bound", names[l]), excess[l].max(0.0)));
    }
    for l in 0..4 {
        let line = CheckLine::at_least(
            "defect",
            format!("{} exponent", names[l]),
            slopes[l],
            1.0 + EPSILON[l] - 0.2,
        );
        out.push(line.with_note(format!("{} degenerate samples skipped", skipped[l])));
    }
    Ok(out)
}

const COMPOSITION_TOL: f64 = 1e-11;

pub fn composition_suite(rng: &mut ChaCha8Rng, cases: usize) -> Result<Vec<CheckLine>, CliError> {
    let mut worst: Vec<(&'static str, f64)> = Vec::new();
    for _ in 0..cases {
        let d = rng.random_range(1..=3);
        let m = rng.random_range(1..=2);
        let h = rng.random_range(0.05..0.5);
        let extra: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let space = IntervalSpace::spanning(m, 4, 3, h, &[extra])?;
        let inputs = CompositionInputs::random(rng, d, m);
        let rows = composition_table(&space, &inputs)
            .into_iter()
            .chain(adjoint_relations(&space, &inputs));
        for (k, r) in rows.enumerate() {
            if worst.len() <= k {
                worst.push((r.name, r.residual));
            } else {
                worst[k].1 = worst[k].1.max(r.residual);
            }
        }
    }
    Ok(worst
        .into_iter()
        .map(|(n, w)| CheckLine::residual("composition", n, w, COMPOSITION_TOL))
        .collect())
}

#[derive(Default)]
struct BoundTally {
    excess: f64,
    ratio: f64,
    raw_violations: usize,
    samples: usize,
}

impl BoundTally {
    fn add(&mut self, c: &BoundCheck) {
        self.excess = self.excess.max(c.lhs - (c.safety * c.rhs + c.slack));
        self.ratio = self.ratio.max(c.ratio());
        if !c.raw_pass() {
            self.raw_violations += 1;
        }
        self.samples += 1;
    }

    fn line(&self, name: &str) -> CheckLine {
        CheckLine::bound("lemmas", name, self.excess.max(0.0)).with_note(format!(
            "max lhs/rhs {:.3}, raw-constant violations {}/{}",
            self.ratio, self.raw_violations, self.samples
        ))
    }
}

/// Norm-difference bound, the eight `N` vs `Λ` estimates and the two norm identities
/// on random single-interval instances.
pub fn lemma_suite(
    rng: &mut ChaCha8Rng,
    samples: usize,
    cells: usize,
    cutoff: usize,
    hs: &[f64],
) -> Result<Vec<CheckLine>, CliError> {
    let mut norm_diff = BoundTally::default();
    let mut n_lambda: Vec<(String, BoundTally)> = Vec::new();
    let mut ids: Vec<(&'static str, f64)> = Vec::new();
    for k in 0..samples {
        let d = rng.random_range(1..=2);
        let m = rng.random_range(1..=2);
        let h = hs[k % hs.len()];
        let f = random_test_function(rng, m, 0.0, h, 0.5, 1.0);
        let g = random_test_function(rng, m, 0.0, h, 0.5, 1.0);
        let setup = LemmaSetup::new(&f, &g, 0.0, h, cells, cutoff)?;
        norm_diff.add(&setup.check_norm_diff().check);
        let u = random_unit_vector(rng, d);
        let v = random_unit_vector(rng, d);
        let coeffs = [
            random_matrix(rng, d, d),
            random_matrix(rng, d * m, d),
            random_matrix(rng, d * m, d),
            random_matrix(rng, d * m, d * m),
        ];
        let mut idx = 0;
        for (p, c) in Process::ALL.iter().zip(&coeffs) {
            for mode in [CheckMode::Norm, CheckMode::MatrixElement] {
                let chk = setup.check_n_vs_lambda(*p, c, &u, &v, mode)?;
                if n_lambda.len() <= idx {
                    n_lambda.push((chk.name.clone(), BoundTally::default()));
                }
                n_lambda[idx].1.add(&chk);
                idx += 1;
            }
        }
        for (j, id) in setup.lambda_norm_identities(&coeffs[2], &coeffs[3], &u)?.iter().enumerate() {
            let excess = (id.residual - id.tolerance).max(0.0);
            if ids.len() <= j {
                ids.push((id.name, excess));
            } else {
                ids[j].1 = ids[j].1.max(excess);
            }
        }
    }
    let mut out = vec![norm_diff.line("norm-diff")];
    out.extend(n_lambda.iter().map(|(n, t)| t.line(n)));
    out.extend(ids.into_iter().map(|(n, e)| CheckLine::bound("lemmas", n, e)));
    Ok(out)
}

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

const ENGINE_TOL: f64 = 1e-10;
const DENSE_HOM_TOL: f64 = 1e-9;

/// Dense and streaming walk engines on random instances. With `model = None` each
/// instance draws its own model with `d ≤ 2`, `m ≤ 2`.
pub fn engine_suite(
    rng: &mut ChaCha8Rng,
    model: Option<&GkslModel>,
    instances: usize,
    max_n: usize,
    cap: usize,
) -> Result<Vec<CheckLine>, CliError> {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for _ in 0..instances {
        let owned;
        let model = match model {
            Some(m) => m,
            None => {
                let d = rng.random_range(1..=2);
                let m = rng.random_range(1..=2);
                let norm = rng.random_range(0.2..2.0);
                owned = GkslModel::random(rng, d, m, norm);
                &owned
            }
        };
        let (d, m) = (model.d(), model.m());
        let h = rng.random_range(0.01..0.5);
        let mut n = rng.random_range(1..=max_n);
        while n > 1 && d * (1 + m).pow(n as u32) > cap {
            n -= 1;
        }
        let walk = Walk::new(model, h)?;
        let x = random_matrix(rng, d, d);
        let u = random_unit_vector(rng, d);
        let v = random_unit_vector(rng, d);
        let f = random_averages(rng, m, h, n);
        let g = random_averages(rng, m, h, n);
        let stream = walk.matrix_element(&x, &u, &v, &f, &g)?;
        let dense = ToyState::product(&v, &g).inner(&walk.dense_state(&x, &u, &f, cap)?);
        worst = worst.max((stream - dense).norm());
        count += 1;
    }
    Ok(vec![CheckLine::residual("walk", "dense vs streaming", worst, ENGINE_TOL)
        .with_note(format!("{count} instances"))])
}

/// Multiplicativity, adjoints, positivity and contractivity of the dense walk operator.
pub fn walk_homomorphism_suite(
    rng: &mut ChaCha8Rng,
    model: Option<&GkslModel>,
    instances: usize,
    max_n: usize,
    cap: usize,
) -> Result<Vec<CheckLine>, CliError> {
    let (mut mult, mut adj, mut neg, mut contraction): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..instances {
        let owned;
        let model = match model {
            Some(m) => m,
            None => {
                let d = rng.random_range(1..=2);
                let norm = rng.random_range(0.2..2.0);
                owned = GkslModel::random(rng, d, 1, norm);
                &owned
            }
        };
        let d = model.d();
        let mut n = rng.random_range(1..=max_n);
        while n > 1 && d * (1 + model.m()).pow(n as u32) > cap {
            n -= 1;
        }
        let walk = Walk::new(model, rng.random_range(0.01..0.5))?;
        let x = random_matrix(rng, d, d);
        let y = random_matrix(rng, d, d);
        let px = walk.dense_operator(&x, n, cap)?;
        let py = walk.dense_operator(&y, n, cap)?;
        let pxy = walk.dense_operator(&(&x * &y), n, cap)?;
        let pxs = walk.dense_operator(&x.adjoint(), n, cap)?;
        mult = mult.max(max_abs(&(pxy - &px * &py)));
        adj = adj.max(max_abs(&(pxs - px.adjoint())));
        contraction = contraction.max(op_norm(&px) - op_norm(&x) * (1.0 + 1e-9));
        let pos = walk.dense_operator(&(x.adjoint() * &x), n, cap)?;
        let eig = herm_eigen(&((&pos + pos.adjoint()) * c64(0.5, 0.0)))?;
        neg = neg.max(-eig.eigenvalues[0]);
    }
    Ok(vec![
        CheckLine::residual("walk", "p(xy) = p(x)p(y)", mult, DENSE_HOM_TOL),
        CheckLine::residual("walk", "p(x*) = p(x)*", adj, DENSE_HOM_TOL),
        CheckLine::residual("walk", "p(x*x) ≥ 0", neg.max(0.0), DENSE_HOM_TOL),
        CheckLine::bound("walk", "‖p(x)‖ ≤ ‖x‖", contraction.max(0.0)),
    ])
}

/// Telescoping identity and remainder bound in the hybrid space for `n ∈ {1, 2}`.
pub fn decomposition_suite(
    rng: &mut ChaCha8Rng,
    model: Option<&GkslModel>,
    instances: usize,
) -> Result<Vec<CheckLine>, CliError> {
    let h = 0.2;
    let mut out = Vec::new();
    for n in 1..=2 {
        let (mut residual, mut excess, mut ratio): (f64, f64, f64) = (0.0, 0.0, 0.0);
        for _ in 0..instances {
            let owned;
            let model = match model {
                Some(m) => m,
                None => {
                    let d = rng.random_range(1..=2);
                    let norm = rng.random_range(0.2..2.0);
                    owned = GkslModel::random(rng, d, 1, norm);
                    &owned
                }
            };
            let d = model.d();
            let x = random_matrix(rng, d, d);
            let u = random_unit_vector(rng, d);
            let f = random_test_function(rng, model.m(), 0.0, n as f64 * h, 0.3, 1.0);
            let rep = decomposition_check(model, &x, &u, &f, h, n, 4, 4, HYBRID_CAP)?;
            residual = residual.max(rep.residual);
            excess = excess.max(rep.f_norm_sq - (qrw_core::fock::LEMMA_SAFETY * rep.bound + rep.slack));
            ratio = ratio.max(rep.ratio());
        }
        out.push(CheckLine::residual(
            "hybrid",
            format!("telescoping identity n={n}"),
            residual,
            qrw_core::walk::DECOMPOSITION_TOL,
        ));
        out.push(
            CheckLine::bound("hybrid", format!("remainder bound n={n}"), excess.max(0.0))
                .with_note(format!("max ‖F‖²/(h c ‖x‖²‖u‖²) {ratio:.3}")),
        );
    }
    Ok(out)
}

const ORACLE_TOL: f64 = 1e-9;

/// Reduction to the semigroup at `f = g = 0`, unitality, Hermitian symmetry and the
/// observed RK4 order.
pub fn oracle_suite(rng: &mut ChaCha8Rng, models: &[GkslModel]) -> Result<Vec<CheckLine>, CliError> {
    let (mut semigroup, mut unital, mut symmetry): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for model in models {
        let (d, m) = (model.d(), model.m());
        let oracle = FlowOracle::new(model);
        let x = random_matrix(rng, d, d);
        let u = random_unit_vector(rng, d);
        let v = random_unit_vector(rng, d);
        let t = rng.random_range(0.1..2.0);
        let zero = TestFunction::zero(m);
        let got = oracle.matrix_element(&x, &u, &v, &zero, &zero, t, 64)?;
        let expect = v.dotc(&(model.semigroup(&x, t)? * &u));
        semigroup = semigroup.max((got.value - expect).norm());

        let f = random_test_function(rng, m, 0.0, t, 0.2, 1.0);
        let g = random_test_function(rng, m, 0.0, t, 0.2, 1.0);
        let one = oracle.matrix_element(&identity(d), &u, &v, &f, &g, t, 64)?;
        let expect = v.dotc(&u) * pairing_integral(&g, &f, 0.0, t).exp();
        unital = unital.max((one.value - expect).norm());

        let a = oracle.matrix_element(&x.adjoint(), &u, &v, &f, &g, t, 64)?.value;
        let b = oracle.matrix_element(&x, &v, &u, &g, &f, t, 64)?.value;
        symmetry = symmetry.max((a - b.conj()).norm());
    }
    let (order, errs) = {
        let model = GkslModel::random(rng, 2, 1, 3.0);
        let oracle = FlowOracle::new(&model);
        let x = random_matrix(rng, 2, 2);
        let u = random_unit_vector(rng, 2);
        let v = random_unit_vector(rng, 2);
        let f = TestFunction::bump(1, 0, 2.0, 0.0, 4.0)?;
        integrator_order(&oracle, &x, &u, &v, &f, &f, 4.0, &[128, 256, 512], 8192)?
    };
    Ok(vec![
        CheckLine::residual("oracle", "f=g=0 vs semigroup", semigroup, ORACLE_TOL),
        CheckLine::residual("oracle", "m_t(1) unitality", unital, ORACLE_TOL),
        CheckLine::residual("oracle", "Hermitian symmetry", symmetry, ORACLE_TOL),
        CheckLine::at_least("oracle", "RK4 order", order, 3.8)
            .with_note(format!("errors {:.2e} {:.2e} {:.2e}", errs[0], errs[1], errs[2])),
    ])
}
