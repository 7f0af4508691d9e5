//! Dense complex linear algebra kernels.
//!
//! Tensor products use a single global convention: row-major, left-factor-major
//! flattening, i.e. row `(p, q)` of `a ⊗ b` is `p * b.nrows() + q`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Tolerance used when checking that an input is Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalues of a PSD input may dip this far below zero before it is rejected.
pub const PSD_TOL: f64 = 1e-10;
/// Below this value of `sqrt(h * lambda)` the sinc factor takes its limit value 1.
pub const SINC_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("result dimensions {rows}x{cols} overflow")]
    Size { rows: usize, cols: usize },
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (residual {residual:e})")]
    NotHermitian { residual: f64 },
    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:e})")]
    NotPsd { eigenvalue: f64 },
    #[error("step size must be positive, got {0}")]
    StepSize(f64),
}

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Builds a matrix from row-major entries.
pub fn from_rows(rows: usize, cols: usize, entries: &[C64]) -> CMatrix {
    CMatrix::from_row_slice(rows, cols, entries)
}

/// Real diagonal matrix.
pub fn diag(values: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(
        values.len(),
        values.iter().map(|&v| c64(v, 0.0)),
    ))
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> Result<CMatrix, LinalgError> {
    let rows = a.nrows().checked_mul(b.nrows());
    let cols = a.ncols().checked_mul(b.ncols());
    match (rows, cols) {
        (Some(r), Some(c)) if r.checked_mul(c).is_some() => Ok(kron_unchecked(a, b)),
        _ => Err(LinalgError::Size {
            rows: a.nrows().saturating_mul(b.nrows()),
            cols: a.ncols().saturating_mul(b.ncols()),
        }),
    }
}

fn kron_unchecked(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (br, bc) = b.shape();
    let mut out = CMatrix::zeros(a.nrows() * br, a.ncols() * bc);
    for p in 0..a.nrows() {
        for s in 0..a.ncols() {
            let ap = a[(p, s)];
            if ap == C64::new(0.0, 0.0) {
                continue;
            }
            for q in 0..br {
                for t in 0..bc {
                    out[(p * br + q, s * bc + t)] = ap * b[(q, t)];
                }
            }
        }
    }
    out
}

/// `x ⊗ 1_m`, the ampliation of an operator on the left factor.
pub fn ampliate(x: &CMatrix, m: usize) -> CMatrix {
    kron_unchecked(x, &identity(m))
}

/// Kronecker product of two vectors with the same left-major convention.
pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        out.extend(b.iter().map(|&y| x * y));
    }
    out
}

/// Conjugate transpose.
pub fn dagger(a: &CMatrix) -> CMatrix {
    a.adjoint()
}

/// Largest absolute entry of `a - a*`.
pub fn hermitian_residual(a: &CMatrix) -> f64 {
    if !a.is_square() {
        return f64::INFINITY;
    }
    max_abs(&(a - a.adjoint()))
}

/// Largest absolute entry, zero for empty matrices.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermEigen {
    pub eigenvalues: Vec<f64>,
    /// Unitary matrix whose columns are the eigenvectors.
    pub vectors: CMatrix,
}

impl HermEigen {
    /// `V f(Λ) V*` for a real function of the eigenvalues.
    pub fn apply_fn(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.eigenvalues.len();
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            let w = f(lam);
            for i in 0..n {
                scaled[(i, j)] *= w;
            }
        }
        &scaled * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.apply_fn(|l| l)
    }
}

pub fn herm_eigen(h: &CMatrix) -> Result<HermEigen, LinalgError> {
    if !h.is_square() {
        return Err(LinalgError::NotSquare {
            rows: h.nrows(),
            cols: h.ncols(),
        });
    }
    let n = h.nrows();
    if n == 0 {
        return Ok(HermEigen {
            eigenvalues: Vec::new(),
            vectors: CMatrix::zeros(0, 0),
        });
    }
    let scale = max_abs(h).max(1.0);
    let residual = hermitian_residual(h);
    if residual > HERMITIAN_TOL * scale {
        return Err(LinalgError::NotHermitian { residual });
    }
    let sym = (h + h.adjoint()) * c64(0.5, 0.0);
    if sym.iter().all(|z| *z == C64::new(0.0, 0.0)) {
        return Ok(HermEigen {
            eigenvalues: vec![0.0; n],
            vectors: identity(n),
        });
    }
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(HermEigen {
        eigenvalues,
        vectors,
    })
}

/// `cos(sqrt(h p))` and `sinc(sqrt(h p))` of a positive semidefinite `p`.
#[derive(Debug, Clone)]
pub struct PsdTrig {
    pub cos_part: CMatrix,
    pub sinc_part: CMatrix,
}

pub fn psd_trig(p: &CMatrix, h: f64) -> Result<PsdTrig, LinalgError> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(LinalgError::StepSize(h));
    }
    let eig = herm_eigen(p)?;
    let scale = eig
        .eigenvalues
        .iter()
        .fold(1.0_f64, |acc, l| acc.max(l.abs()));
    if let Some(&lowest) = eig.eigenvalues.first() {
        if lowest < -PSD_TOL * scale {
            return Err(LinalgError::NotPsd { eigenvalue: lowest });
        }
    }
    let arg = |lam: f64| (h * lam.max(0.0)).sqrt();
    let cos_part = eig.apply_fn(|lam| arg(lam).cos());
    let sinc_part = eig.apply_fn(|lam| sinc(arg(lam)));
    Ok(PsdTrig {
        cos_part,
        sinc_part,
    })
}

/// `sin(s)/s` with the continuous limit 1 near zero.
pub fn sinc(s: f64) -> f64 {
    if s.abs() < SINC_THRESHOLD {
        1.0
    } else {
        s.sin() / s
    }
}

/// Operator 2-norm (largest singular value).
pub fn op_norm(a: &CMatrix) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    let gram = if a.nrows() >= a.ncols() {
        a.adjoint() * a
    } else {
        a * a.adjoint()
    };
    match herm_eigen(&gram) {
        Ok(eig) => eig.eigenvalues.last().copied().unwrap_or(0.0).max(0.0).sqrt(),
        // Gram matrices are Hermitian by construction up to rounding; fall back to SVD.
        Err(_) => a.clone().singular_values().max(),
    }
}

fn one_norm(a: &CMatrix) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
#[allow(clippy::excessive_precision)]
const THETA: [(f64, usize); 4] = [
    (1.495585217958292e-2, 3),
    (2.539398330063230e-1, 5),
    (9.504178996162932e-1, 7),
    (2.097847961257068e0, 9),
];
const THETA13: f64 = 5.371920351148152e0;

/// Matrix exponential by Padé scaling and squaring (degrees 3 to 13).
pub fn expm(a: &CMatrix) -> CMatrix {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.nrows();
    let norm = one_norm(a);
    let eye = identity(n);
    if norm == 0.0 {
        return eye;
    }
    for &(theta, degree) in &THETA {
        if norm <= theta {
            let coeffs: &[f64] = match degree {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            return pade_low(a, coeffs);
        }
    }
    let s = (norm / THETA13).log2().ceil().max(0.0) as i32;
    let scaled = a * c64(0.5_f64.powi(s), 0.0);
    let mut r = pade13(&scaled);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

fn solve_pade(u: &CMatrix, v: &CMatrix) -> CMatrix {
    let lhs = v - u;
    let rhs = v + u;
    lhs.lu()
        .solve(&rhs)
        .expect("Padé denominator is nonsingular for scaled input")
}

fn pade_low(a: &CMatrix, b: &[f64]) -> CMatrix {
    let n = a.nrows();
    let a2 = a * a;
    let mut even_power = identity(n);
    let mut u_acc = CMatrix::zeros(n, n);
    let mut v_acc = CMatrix::zeros(n, n);
    for k in 0..b.len() / 2 {
        u_acc += &even_power * c64(b[2 * k + 1], 0.0);
        v_acc += &even_power * c64(b[2 * k], 0.0);
        if k + 1 < b.len() / 2 {
            even_power = &even_power * &a2;
        }
    }
    let u = a * u_acc;
    solve_pade(&u, &v_acc)
}

fn pade13(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let b = |i: usize| c64(PADE13[i], 0.0);
    let eye = identity(n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * b(13) + &a4 * b(11) + &a2 * b(9);
    let u = a * (&a6 * inner_u + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &eye * b(1));
    let inner_v = &a6 * b(12) + &a4 * b(10) + &a2 * b(8);
    let v = &a6 * inner_v + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &eye * b(0);
    solve_pade(&u, &v)
}

/// Matrix with independent standard complex Gaussian entries.
pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c64(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Random vector normalized to unit length.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVector {
    let v = random_matrix(rng, n, 1);
    let norm = v.norm();
    CVector::from_iterator(n, v.iter().map(|z| z / norm))
}
