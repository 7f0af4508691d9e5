//! Seeded inputs shared by the benchmarks.

use qrw_core::linalg::{random_matrix, random_unit_vector};
use qrw_core::walk::slot_averages;
use qrw_core::{CMatrix, CVector, GkslModel, SlotAverages, TestFunction, Walk};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct Fixture {
    pub model: GkslModel,
    pub walk: Walk,
    pub x: CMatrix,
    pub u: CVector,
    pub v: CVector,
    pub f: TestFunction,
    pub g: TestFunction,
    pub fa: SlotAverages,
    pub ga: SlotAverages,
}

impl Fixture {
    /// A random model on `C^d ⊗ C^m` walked for `n` steps of size `h`.
    pub fn new(d: usize, m: usize, n: usize, h: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = GkslModel::random(&mut rng, d, m, 1.0);
        let walk = Walk::new(&model, h).expect("valid step");
        let x = random_matrix(&mut rng, d, d);
        let u = random_unit_vector(&mut rng, d);
        let v = random_unit_vector(&mut rng, d);
        let t = n as f64 * h;
        let f = TestFunction::bump(m, 0, 1.0, 0.0, t).expect("bump");
        let g = TestFunction::ramp(m, m - 1, 0.0, t, 0.5, -0.5).expect("ramp");
        let fa = slot_averages(&f, h, n).expect("averages");
        let ga = slot_averages(&g, h, n).expect("averages");
        Self { model, walk, x, u, v, f, g, fa, ga }
    }

    pub fn t(&self) -> f64 {
        self.fa.n() as f64 * self.walk.h()
    }
}
