//! Lindblad generator with a single noise operator, its structure maps, the
//! one-step dilation unitary and the induced *-homomorphism.
//!
//! Conventions:
//! - `R` maps `h0 -> h0 ⊗ k0` and is stored as a `(d*m) x d` matrix, row `a*m + i`
//!   holding system index `a` and noise channel `i` (zero based).
//! - Operators on `h0 ⊗ k̂0` with `k̂0 = C ⊕ k0` are addressed by `(1+m) x (1+m)`
//!   blocks of `d x d` matrices; block index 0 is the vacuum direction. The flat
//!   form uses row `a*(1+m) + j`.

use crate::linalg::{self, ampliate, c64, identity, op_norm, CMatrix, LinalgError};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("step size must be non-negative, got {0}")]
    NegativeStep(f64),
    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Scaling exponents `ε_l` of the four structure-map components.
pub const EPSILON: [f64; 4] = [1.0, 0.5, 0.5, 0.0];

#[derive(Debug, Clone, PartialEq)]
pub struct GkslModel {
    d: usize,
    m: usize,
    r: CMatrix,
    norm_r: f64,
}

impl GkslModel {
    pub fn new(d: usize, m: usize, r: CMatrix) -> Result<Self, ModelError> {
        if d == 0 || m == 0 {
            return Err(ModelError::Shape(format!("d={d}, m={m} must be positive")));
        }
        if r.shape() != (d * m, d) {
            return Err(ModelError::Shape(format!(
                "R must be {}x{d}, got {}x{}",
                d * m,
                r.nrows(),
                r.ncols()
            )));
        }
        if r.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(ModelError::NonFinite("R"));
        }
        let norm_r = op_norm(&r);
        Ok(Self { d, m, r, norm_r })
    }

    /// Two-level decay `R = sqrt(γ) |0><1|` with one noise channel.
    pub fn amplitude_damping(gamma: f64) -> Self {
        let mut r = CMatrix::zeros(2, 2);
        r[(0, 1)] = c64(gamma.max(0.0).sqrt(), 0.0);
        Self::new(2, 1, r).expect("fixed shape")
    }

    /// Complex Gaussian `R` rescaled to operator norm `norm`.
    pub fn random<G: Rng + ?Sized>(rng: &mut G, d: usize, m: usize, norm: f64) -> Self {
        let raw = linalg::random_matrix(rng, d * m, d);
        let n = op_norm(&raw);
        let r = if n > 0.0 { raw * c64(norm / n, 0.0) } else { raw };
        Self::new(d, m, r).expect("sampled shape is consistent")
    }

    /// Same model with `R` rescaled to the given norm (zero gives the trivial model).
    pub fn rescaled(&self, norm: f64) -> Self {
        let r = if self.norm_r > 0.0 {
            &self.r * c64(norm / self.norm_r, 0.0)
        } else {
            self.r.clone()
        };
        Self::new(self.d, self.m, r).expect("rescaling keeps the shape")
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn r(&self) -> &CMatrix {
        &self.r
    }

    pub fn norm_r(&self) -> f64 {
        self.norm_r
    }

    /// `M = 5(‖R‖² + ‖R‖³ + ‖R‖⁴)`.
    pub fn defect_constant(&self) -> f64 {
        let n = self.norm_r;
        5.0 * (n.powi(2) + n.powi(3) + n.powi(4))
    }

    fn check_square(&self, x: &CMatrix) -> Result<(), ModelError> {
        if x.shape() != (self.d, self.d) {
            return Err(ModelError::Shape(format!(
                "expected {0}x{0} observable, got {1}x{2}",
                self.d,
                x.nrows(),
                x.ncols()
            )));
        }
        Ok(())
    }

    /// `L(x) = R*(x⊗1)R - ½R*Rx - ½xR*R`.
    pub fn lindblad(&self, x: &CMatrix) -> Result<CMatrix, ModelError> {
        self.check_square(x)?;
        let rr = self.r.adjoint() * &self.r;
        let jump = self.r.adjoint() * ampliate(x, self.m) * &self.r;
        Ok(jump - (&rr * x + x * &rr) * c64(0.5, 0.0))
    }

    /// `δ(x) = (x⊗1)R - Rx`, a `(d*m) x d` matrix.
    pub fn delta(&self, x: &CMatrix) -> Result<CMatrix, ModelError> {
        self.check_square(x)?;
        Ok(ampliate(x, self.m) * &self.r - &self.r * x)
    }

    /// `δ†(x) = (δ(x*))* = R*(x⊗1) - xR*`, a `d x (d*m)` matrix.
    pub fn delta_dagger(&self, x: &CMatrix) -> Result<CMatrix, ModelError> {
        self.check_square(x)?;
        Ok(self.r.adjoint() * ampliate(x, self.m) - x * self.r.adjoint())
    }

    /// `Θ(x) = (L(x), δ†(x); δ(x), 0)`.
    pub fn structure_maps(&self, x: &CMatrix) -> Result<BlockOperator, ModelError> {
        let l = self.lindblad(x)?;
        let top_right = self.delta_dagger(x)?;
        let column = self.delta(x)?;
        let zero = CMatrix::zeros(self.d * self.m, self.d * self.m);
        Ok(BlockOperator::from_components(
            self.d, self.m, &l, &top_right, &column, &zero,
        ))
    }

    /// `Θ(h, x)`: components of `Θ(x)` scaled by `h^{ε_l}`.
    pub fn theta_h(&self, x: &CMatrix, h: f64) -> Result<BlockOperator, ModelError> {
        if !(h >= 0.0) {
            return Err(ModelError::NegativeStep(h));
        }
        let mut theta = self.structure_maps(x)?;
        let sq = c64(h.sqrt(), 0.0);
        for j in 0..=self.m {
            for k in 0..=self.m {
                let factor = match (j, k) {
                    (0, 0) => c64(h, 0.0),
                    (0, _) | (_, 0) => sq,
                    _ => c64(1.0, 0.0),
                };
                *theta.block_mut(j, k) *= factor;
            }
        }
        Ok(theta)
    }

    /// Precomputes the step unitary `U(h) = exp(√h R̃)` in closed form.
    pub fn step(&self, h: f64) -> Result<StepUnitary, ModelError> {
        StepUnitary::new(self, h)
    }

    pub fn u_h(&self, h: f64) -> Result<BlockOperator, ModelError> {
        Ok(self.step(h)?.unitary())
    }

    pub fn beta(&self, x: &CMatrix, h: f64) -> Result<BlockOperator, ModelError> {
        self.check_square(x)?;
        Ok(self.step(h)?.beta(x))
    }

    /// `R̃ = (0, -R*; R, 0)` in flat form.
    pub fn r_tilde(&self) -> CMatrix {
        let zero_d = CMatrix::zeros(self.d, self.d);
        let zero_k = CMatrix::zeros(self.d * self.m, self.d * self.m);
        BlockOperator::from_components(
            self.d,
            self.m,
            &zero_d,
            &(-self.r.adjoint()),
            &self.r,
            &zero_k,
        )
        .to_flat()
    }

    /// Defect map `E(h, x)` together with the per-component norm bounds.
    pub fn defect(&self, x: &CMatrix, h: f64) -> Result<DefectReport, ModelError> {
        self.check_square(x)?;
        let step = self.step(h)?;
        Ok(step.defect(self, x))
    }

    /// Matrix of `L` acting on row-major vectorised `d x d` matrices.
    pub fn superoperator(&self) -> SemigroupOracle {
        let d = self.d;
        let mut gen = CMatrix::zeros(d * d, d * d);
        for a in 0..d {
            for b in 0..d {
                let mut e = CMatrix::zeros(d, d);
                e[(a, b)] = c64(1.0, 0.0);
                let image = self.lindblad(&e).expect("square basis element");
                for p in 0..d {
                    for q in 0..d {
                        gen[(p * d + q, a * d + b)] = image[(p, q)];
                    }
                }
            }
        }
        SemigroupOracle { d, generator: gen }
    }

    /// `T_t(x) = e^{tL}(x)`.
    pub fn semigroup(&self, x: &CMatrix, t: f64) -> Result<CMatrix, ModelError> {
        self.check_square(x)?;
        self.superoperator().apply(x, t)
    }
}

/// The Lindblad generator as a `d² x d²` matrix on row-major vectorised operators.
#[derive(Debug, Clone)]
pub struct SemigroupOracle {
    pub d: usize,
    pub generator: CMatrix,
}

impl SemigroupOracle {
    pub fn apply(&self, x: &CMatrix, t: f64) -> Result<CMatrix, ModelError> {
        if !(t >= 0.0) {
            return Err(ModelError::NegativeTime(t));
        }
        if t == 0.0 {
            return Ok(x.clone());
        }
        let prop = linalg::expm(&(&self.generator * c64(t, 0.0)));
        Ok(unvec(&(prop * vec_rows(x)), self.d))
    }

    /// Largest entry of `L̂ vec(1)`.
    pub fn conservativity_residual(&self) -> f64 {
        linalg::max_abs(&(&self.generator * vec_rows(&identity(self.d))))
    }
}

pub fn vec_rows(x: &CMatrix) -> CMatrix {
    let (r, c) = x.shape();
    CMatrix::from_fn(r * c, 1, |k, _| x[(k / c, k % c)])
}

pub fn unvec(v: &CMatrix, d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |a, b| v[(a * d + b, 0)])
}

/// An operator on `h0 ⊗ k̂0` stored as `(1+m)²` blocks of `d x d` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOperator {
    d: usize,
    m: usize,
    blocks: Vec<CMatrix>,
}

impl BlockOperator {
    pub fn zeros(d: usize, m: usize) -> Self {
        Self {
            d,
            m,
            blocks: vec![CMatrix::zeros(d, d); (1 + m) * (1 + m)],
        }
    }

    /// `b(x) = x ⊗ 1_{k̂0}`.
    pub fn ampliated(x: &CMatrix, m: usize) -> Self {
        let d = x.nrows();
        let mut out = Self::zeros(d, m);
        for j in 0..=m {
            *out.block_mut(j, j) = x.clone();
        }
        out
    }

    pub fn identity(d: usize, m: usize) -> Self {
        Self::ampliated(&identity(d), m)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn block(&self, j: usize, k: usize) -> &CMatrix {
        &self.blocks[j * (1 + self.m) + k]
    }

    pub fn block_mut(&mut self, j: usize, k: usize) -> &mut CMatrix {
        &mut self.blocks[j * (1 + self.m) + k]
    }

    pub fn from_flat(d: usize, m: usize, flat: &CMatrix) -> Self {
        let w = 1 + m;
        assert_eq!(flat.shape(), (d * w, d * w), "flat operator shape");
        let mut out = Self::zeros(d, m);
        for j in 0..w {
            for k in 0..w {
                *out.block_mut(j, k) = CMatrix::from_fn(d, d, |a, b| flat[(a * w + j, b * w + k)]);
            }
        }
        out
    }

    pub fn to_flat(&self) -> CMatrix {
        let w = 1 + self.m;
        let d = self.d;
        CMatrix::from_fn(d * w, d * w, |r, c| {
            self.block(r % w, c % w)[(r / w, c / w)]
        })
    }

    /// Assembles blocks from the four components in `h0 ⊗ k0` form:
    /// top-left `d x d`, top-right `d x dm`, bottom-left `dm x d`, bottom-right `dm x dm`.
    pub fn from_components(
        d: usize,
        m: usize,
        top_left: &CMatrix,
        top_right: &CMatrix,
        bottom_left: &CMatrix,
        bottom_right: &CMatrix,
    ) -> Self {
        let mut out = Self::zeros(d, m);
        *out.block_mut(0, 0) = top_left.clone();
        for i in 0..m {
            *out.block_mut(0, i + 1) = CMatrix::from_fn(d, d, |a, b| top_right[(a, b * m + i)]);
            *out.block_mut(i + 1, 0) = CMatrix::from_fn(d, d, |a, b| bottom_left[(a * m + i, b)]);
            for k in 0..m {
                *out.block_mut(i + 1, k + 1) =
                    CMatrix::from_fn(d, d, |a, b| bottom_right[(a * m + i, b * m + k)]);
            }
        }
        out
    }

    /// Component 1 (`β₁`, `θ₁`): the vacuum-vacuum block.
    pub fn top_left(&self) -> CMatrix {
        self.block(0, 0).clone()
    }

    /// The `d x dm` top-right component (`β₂*`, `δ†`).
    pub fn top_right(&self) -> CMatrix {
        let (d, m) = (self.d, self.m);
        CMatrix::from_fn(d, d * m, |a, c| self.block(0, c % m + 1)[(a, c / m)])
    }

    /// The `dm x d` bottom-left component (`β₃`, `δ`).
    pub fn bottom_left(&self) -> CMatrix {
        let (d, m) = (self.d, self.m);
        CMatrix::from_fn(d * m, d, |r, b| self.block(r % m + 1, 0)[(r / m, b)])
    }

    /// The `dm x dm` bottom-right component (`β₄`, `σ`).
    pub fn bottom_right(&self) -> CMatrix {
        let (d, m) = (self.d, self.m);
        CMatrix::from_fn(d * m, d * m, |r, c| {
            self.block(r % m + 1, c % m + 1)[(r / m, c / m)]
        })
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.d, self.m);
        for j in 0..=self.m {
            for k in 0..=self.m {
                *out.block_mut(j, k) = self.block(k, j).adjoint();
            }
        }
        out
    }

    pub fn compose(&self, other: &Self) -> Self {
        let w = 1 + self.m;
        let mut out = Self::zeros(self.d, self.m);
        for j in 0..w {
            for k in 0..w {
                let acc = out.block_mut(j, k);
                for l in 0..w {
                    *acc += self.block(j, l) * other.block(l, k);
                }
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            d: self.d,
            m: self.m,
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// Largest absolute entry over all blocks.
    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().map(linalg::max_abs).fold(0.0, f64::max)
    }
}

/// Closed-form pieces of `U(h)`: `cos(√h|R|)`, `cos(√h|R*|)`, `D(h)` and `S = √h R D(h)`,
/// so that `U(h) = (C, -S*; S, C')`.
#[derive(Debug, Clone)]
pub struct StepUnitary {
    d: usize,
    m: usize,
    h: f64,
    cos_r: CMatrix,
    cos_r_star: CMatrix,
    d_h: CMatrix,
    s: CMatrix,
}

impl StepUnitary {
    pub fn new(model: &GkslModel, h: f64) -> Result<Self, ModelError> {
        if !(h > 0.0) {
            return Err(ModelError::NegativeStep(h));
        }
        let r = model.r();
        let left = linalg::psd_trig(&(r.adjoint() * r), h)?;
        let right = linalg::psd_trig(&(r * r.adjoint()), h)?;
        // R f(R*R) = f(RR*) R lets D(h) be computed on the |R| side only.
        let s = r * &left.sinc_part * c64(h.sqrt(), 0.0);
        Ok(Self {
            d: model.d(),
            m: model.m(),
            h,
            cos_r: left.cos_part,
            cos_r_star: right.cos_part,
            d_h: left.sinc_part,
            s,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn cos_r(&self) -> &CMatrix {
        &self.cos_r
    }

    pub fn cos_r_star(&self) -> &CMatrix {
        &self.cos_r_star
    }

    pub fn sinc_factor(&self) -> &CMatrix {
        &self.d_h
    }

    pub fn unitary(&self) -> BlockOperator {
        BlockOperator::from_components(
            self.d,
            self.m,
            &self.cos_r,
            &(-self.s.adjoint()),
            &self.s,
            &self.cos_r_star,
        )
    }

    /// `β(h, x) = U(h)* (x ⊗ 1) U(h)` from the closed-form block expressions.
    pub fn beta(&self, x: &CMatrix) -> BlockOperator {
        let xa = ampliate(x, self.m);
        let c = &self.cos_r;
        let cs = &self.cos_r_star;
        let s = &self.s;
        let s_adj = s.adjoint();
        let b1 = c * x * c + &s_adj * &xa * s;
        let b2_adj = -(c * x * &s_adj) + &s_adj * &xa * cs;
        let b3 = -(s * x * c) + cs * &xa * s;
        let b4 = s * x * &s_adj + cs * &xa * cs;
        BlockOperator::from_components(self.d, self.m, &b1, &b2_adj, &b3, &b4)
    }

    /// `β(h, x)` by direct conjugation with the flat unitary.
    pub fn beta_by_conjugation(&self, x: &CMatrix) -> BlockOperator {
        let u = self.unitary().to_flat();
        let xa = ampliate(x, 1 + self.m);
        BlockOperator::from_flat(self.d, self.m, &(u.adjoint() * xa * &u))
    }

    pub fn defect(&self, model: &GkslModel, x: &CMatrix) -> DefectReport {
        let h = self.h;
        let beta = self.beta(x);
        let xnorm = op_norm(x);
        let xa = ampliate(x, self.m);
        let diffs = [
            beta.top_left() - x - model.lindblad(x).expect("checked") * c64(h, 0.0),
            beta.top_right() - model.delta_dagger(x).expect("checked") * c64(h.sqrt(), 0.0),
            beta.bottom_left() - model.delta(x).expect("checked") * c64(h.sqrt(), 0.0),
            beta.bottom_right() - xa,
        ];
        let big_m = model.defect_constant();
        let mut blocks = [DefectBlock::default(); 4];
        for (l, diff) in diffs.iter().enumerate() {
            let power = 1.0 + EPSILON[l];
            let norm = op_norm(diff);
            blocks[l] = DefectBlock {
                norm,
                bound: big_m * xnorm * h.powf(power),
                exponent: power,
            };
        }
        let scaled = diffs
            .iter()
            .enumerate()
            .map(|(l, m)| m * c64(h.powf(-(1.0 + EPSILON[l])), 0.0))
            .collect::<Vec<_>>();
        let e = BlockOperator::from_components(
            self.d, self.m, &scaled[0], &scaled[1], &scaled[2], &scaled[3],
        );
        let pass = blocks.iter().all(|b| b.norm <= b.bound);
        DefectReport { e, blocks, pass }
    }

    /// The six elementary estimates on `cos(√h|R|)`, `cos(√h|R*|)` and `D(h)`.
    pub fn unitary_estimates(&self, model: &GkslModel) -> Vec<EstimateCheck> {
        let h = self.h;
        let n = model.norm_r();
        let r = model.r();
        let eye_d = identity(self.d);
        let eye_k = identity(self.d * self.m);
        let abs_sq = r.adjoint() * r;
        let unit_slack = 1e-12;
        vec![
            EstimateCheck::new(
                "cos(√h|R|) - 1 + h|R|²/2 ≤ h²‖R‖⁴",
                op_norm(&(&self.cos_r - &eye_d + abs_sq * c64(0.5 * h, 0.0))),
                h * h * n.powi(4),
            ),
            EstimateCheck::new(
                "cos(√h|R|) - 1 ≤ h‖R‖²",
                op_norm(&(&self.cos_r - &eye_d)),
                h * n * n,
            ),
            EstimateCheck::new(
                "cos(√h|R*|) - 1 ≤ h‖R‖²",
                op_norm(&(&self.cos_r_star - &eye_k)),
                h * n * n,
            ),
            EstimateCheck::new(
                "D(h) - 1 ≤ h‖R‖²",
                op_norm(&(&self.d_h - &eye_d)),
                h * n * n,
            ),
            EstimateCheck::new("‖cos(√h|R|)‖ ≤ 1", op_norm(&self.cos_r), 1.0 + unit_slack),
            EstimateCheck::new("‖D(h)‖ ≤ 1", op_norm(&self.d_h), 1.0 + unit_slack),
        ]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DefectBlock {
    /// `‖β_l - b_l - h^{ε_l} θ_l‖`.
    pub norm: f64,
    /// `M ‖x‖ h^{1+ε_l}`.
    pub bound: f64,
    /// `1 + ε_l`.
    pub exponent: f64,
}

#[derive(Debug, Clone)]
pub struct DefectReport {
    /// `E(h, x)`, each component divided by `h^{1+ε_l}`.
    pub e: BlockOperator,
    pub blocks: [DefectBlock; 4],
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateCheck {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
}

impl EstimateCheck {
    fn new(name: &'static str, lhs: f64, rhs: f64) -> Self {
        Self { name, lhs, rhs }
    }

    pub fn pass(&self) -> bool {
        self.lhs <= self.rhs
    }
}

/// Residuals of the *-homomorphism property of `β(h)` for a pair `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomomorphismResiduals {
    /// `β(xy) - β(x)β(y)` on the flat operator.
    pub multiplicative: f64,
    /// `β(x*) - β(x)*`.
    pub adjoint: f64,
    /// The five component relations, in order: adjoint relations, then `β₁..β₄` of a product.
    pub components: [f64; 5],
}

impl HomomorphismResiduals {
    pub fn max(&self) -> f64 {
        self.components
            .iter()
            .copied()
            .fold(self.multiplicative.max(self.adjoint), f64::max)
    }
}

/// Evaluates the *-homomorphism relations of `beta` (any map `x -> β(x)`) at `(x, y)`.
pub fn homomorphism_residuals(
    beta: impl Fn(&CMatrix) -> BlockOperator,
    x: &CMatrix,
    y: &CMatrix,
) -> HomomorphismResiduals {
    let bx = beta(x);
    let by = beta(y);
    let bxy = beta(&(x * y));
    let bxs = beta(&x.adjoint());
    let multiplicative = bxy.sub(&bx.compose(&by)).max_abs();
    let adjoint = bxs.sub(&bx.adjoint()).max_abs();

    // β₂ is defined through the top-right component, which equals β₂*.
    let b1 = |b: &BlockOperator| b.top_left();
    let b2 = |b: &BlockOperator| b.top_right().adjoint();
    let b3 = |b: &BlockOperator| b.bottom_left();
    let b4 = |b: &BlockOperator| b.bottom_right();
    let res = |a: CMatrix, b: CMatrix| linalg::max_abs(&(a - b));

    let star = res(b1(&bxs), b1(&bx).adjoint())
        .max(res(b4(&bxs), b4(&bx).adjoint()))
        .max(res(b3(&bxs), b2(&bx)));
    let r1 = res(b1(&bxy), b1(&bx) * b1(&by) + b2(&bx).adjoint() * b3(&by));
    let r2 = res(
        b2(&bxy).adjoint(),
        b1(&bx) * b2(&by).adjoint() + b2(&bx).adjoint() * b4(&by),
    );
    let r3 = res(b3(&bxy), b3(&bx) * b1(&by) + b4(&bx) * b3(&by));
    let r4 = res(b4(&bxy), b3(&bx) * b2(&by).adjoint() + b4(&bx) * b4(&by));
    HomomorphismResiduals {
        multiplicative,
        adjoint,
        components: [star, r1, r2, r3, r4],
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
