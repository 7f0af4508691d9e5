//! Piecewise-linear, compactly supported `k0`-valued test functions.
//!
//! A function is given by ascending knots `t_0 < ... < t_K` and per-channel values at
//! each knot; it is linear between knots and zero outside `[t_0, t_K]`. Endpoint
//! values need not vanish, so constants on an interval are representable.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TestFnError {
    #[error("test function needs at least two knots, got {0}")]
    TooFewKnots(usize),
    #[error("knots must be strictly increasing and finite")]
    BadKnots,
    #[error("channel {channel} has {got} values for {expected} knots")]
    ValueCount {
        channel: usize,
        got: usize,
        expected: usize,
    },
    #[error("non-finite value in channel {0}")]
    NonFinite(usize),
    #[error("at least one channel is required")]
    NoChannels,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    knots: Vec<f64>,
    /// `values[i][p]` is channel `i` at knot `p`.
    values: Vec<Vec<f64>>,
}

impl TestFunction {
    pub fn new(knots: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self, TestFnError> {
        if values.is_empty() {
            return Err(TestFnError::NoChannels);
        }
        if knots.len() < 2 {
            return Err(TestFnError::TooFewKnots(knots.len()));
        }
        if knots.iter().any(|t| !t.is_finite()) || knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(TestFnError::BadKnots);
        }
        for (i, ch) in values.iter().enumerate() {
            if ch.len() != knots.len() {
                return Err(TestFnError::ValueCount {
                    channel: i,
                    got: ch.len(),
                    expected: knots.len(),
                });
            }
            if ch.iter().any(|v| !v.is_finite()) {
                return Err(TestFnError::NonFinite(i));
            }
        }
        Ok(Self { knots, values })
    }

    pub fn zero(m: usize) -> Self {
        Self {
            knots: vec![0.0, 1.0],
            values: vec![vec![0.0, 0.0]; m.max(1)],
        }
    }

    /// `f ≡ c` on `[start, end]`.
    pub fn constant(c: &[f64], start: f64, end: f64) -> Result<Self, TestFnError> {
        Self::new(vec![start, end], c.iter().map(|&v| vec![v, v]).collect())
    }

    /// Triangle of the given height in one channel, vanishing at `start` and `end`
    /// with its peak at the midpoint.
    pub fn bump(m: usize, channel: usize, height: f64, start: f64, end: f64) -> Result<Self, TestFnError> {
        let mut values = vec![vec![0.0; 3]; m];
        values[channel][1] = height;
        Self::new(vec![start, 0.5 * (start + end), end], values)
    }

    /// Linear from `v0` at `start` to `v1` at `end` in one channel.
    pub fn ramp(m: usize, channel: usize, start: f64, end: f64, v0: f64, v1: f64) -> Result<Self, TestFnError> {
        let mut values = vec![vec![0.0; 2]; m];
        values[channel] = vec![v0, v1];
        Self::new(vec![start, end], values)
    }

    pub fn channels(&self) -> usize {
        self.values.len()
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().flatten().all(|&v| v == 0.0)
    }

    pub fn support(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().unwrap())
    }

    /// `‖f‖∞ = sup_s ‖f(s)‖` with the Euclidean norm over channels; attained at a knot.
    pub fn sup_norm(&self) -> f64 {
        (0..self.knots.len())
            .map(|p| {
                self.values
                    .iter()
                    .map(|ch| ch[p] * ch[p])
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// `c_f = Σ_i sup |f_i'|` over the linear pieces.
    pub fn c_f(&self) -> f64 {
        self.values
            .iter()
            .map(|ch| {
                self.knots
                    .windows(2)
                    .zip(ch.windows(2))
                    .map(|(t, v)| ((v[1] - v[0]) / (t[1] - t[0])).abs())
                    .fold(0.0, f64::max)
            })
            .sum()
    }

    /// Index of the piece containing `t`, or `None` outside the support.
    fn piece(&self, t: f64) -> Option<usize> {
        let (lo, hi) = self.support();
        if t < lo || t > hi {
            return None;
        }
        let p = self.knots.partition_point(|&k| k <= t);
        Some(p.saturating_sub(1).min(self.knots.len() - 2))
    }

    fn eval_piece(&self, channel: usize, p: usize, t: f64) -> f64 {
        let (t0, t1) = (self.knots[p], self.knots[p + 1]);
        let (v0, v1) = (self.values[channel][p], self.values[channel][p + 1]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    pub fn value(&self, channel: usize, t: f64) -> f64 {
        self.piece(t).map_or(0.0, |p| self.eval_piece(channel, p, t))
    }

    /// Value at `t` using the linear piece that contains `anchor`. Integrators use
    /// this to take one-sided limits at knots and support endpoints.
    pub fn value_near(&self, channel: usize, t: f64, anchor: f64) -> f64 {
        self.piece(anchor)
            .map_or(0.0, |p| self.eval_piece(channel, p, t))
    }

    /// `∫_a^b f_i(s) ds`, exact.
    pub fn integral(&self, channel: usize, a: f64, b: f64) -> f64 {
        let (lo, hi) = self.support();
        let (a, b) = (a.max(lo), b.min(hi));
        if b <= a {
            return 0.0;
        }
        let mut acc = 0.0;
        for p in 0..self.knots.len() - 1 {
            let s = a.max(self.knots[p]);
            let e = b.min(self.knots[p + 1]);
            if e > s {
                acc += 0.5 * (e - s) * (self.eval_piece(channel, p, s) + self.eval_piece(channel, p, e));
            }
        }
        acc
    }

    /// `∫_a^b f_i(s) f_j(s) ds`, exact (Simpson on each piece).
    pub fn cross_integral(&self, i: usize, j: usize, a: f64, b: f64) -> f64 {
        let (lo, hi) = self.support();
        let (a, b) = (a.max(lo), b.min(hi));
        if b <= a {
            return 0.0;
        }
        let mut acc = 0.0;
        for p in 0..self.knots.len() - 1 {
            let s = a.max(self.knots[p]);
            let e = b.min(self.knots[p + 1]);
            if e > s {
                let mid = 0.5 * (s + e);
                let prod = |t: f64| self.eval_piece(i, p, t) * self.eval_piece(j, p, t);
                acc += (e - s) / 6.0 * (prod(s) + 4.0 * prod(mid) + prod(e));
            }
        }
        acc
    }

    /// `∫_a^b ‖f(s)‖² ds`.
    pub fn norm_sq_on(&self, a: f64, b: f64) -> f64 {
        (0..self.channels())
            .map(|i| self.cross_integral(i, i, a, b))
            .sum()
    }

    /// Cell averages of channel `i` on `cells` equal cells of `[a, a + h]`.
    pub fn cell_averages(&self, channel: usize, a: f64, h: f64, cells: usize) -> Vec<f64> {
        let w = h / cells as f64;
        (0..cells)
            .map(|c| {
                let s = a + c as f64 * w;
                self.integral(channel, s, s + w) / w
            })
            .collect()
    }

    /// Union of knots of `self` and `other` inside the open interval `(a, b)`.
    pub fn joint_breakpoints(&self, other: &Self, a: f64, b: f64) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .knots
            .iter()
            .chain(other.knots.iter())
            .copied()
            .filter(|&t| t > a && t < b)
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * (1.0 + y.abs()));
        pts
    }
}
