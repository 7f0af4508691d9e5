//! h-sweeps of walk matrix elements against the flow oracle, and their CSV form.

use qrw_core::flow::FlowOracle;
use qrw_core::linalg::c64;
use qrw_core::walk::{slot_averages, SlotAverages, ToyState};
use qrw_core::{Walk, C64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::time::Instant;

use crate::config::Experiment;
use crate::CliError;

pub const CSV_HEADER: &str = "quantity,h,n,walk_re,walk_im,oracle_re,oracle_im,abs_err,wall_ms";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Quantity {
    /// `<v, p(x) u>` with `f = g = 0`, against the semigroup.
    VacuumMe,
    /// `<v e(g), p(x) u e(f)>`.
    ExpMe,
    /// `<u e(f), p(x*x) u e(f)>`.
    NormSq,
    /// `ExpMe` from the dense engine, where the cap allows.
    DenseExpMe,
}

impl Quantity {
    pub const ALL: [Quantity; 4] = [Quantity::VacuumMe, Quantity::ExpMe, Quantity::NormSq, Quantity::DenseExpMe];

    pub fn tag(self) -> &'static str {
        match self {
            Quantity::VacuumMe => "vacuum_me",
            Quantity::ExpMe => "exp_me",
            Quantity::NormSq => "norm_sq",
            Quantity::DenseExpMe => "dense_exp_me",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|q| q.tag() == tag)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub quantity: String,
    pub h: f64,
    pub n: usize,
    pub walk_re: f64,
    pub walk_im: f64,
    pub oracle_re: f64,
    pub oracle_im: f64,
    pub abs_err: f64,
    pub wall_ms: f64,
}

impl SweepRecord {
    fn new(q: Quantity, h: f64, n: usize, walk: C64, oracle: C64, wall_ms: f64) -> Self {
        Self {
            quantity: q.tag().to_string(),
            h,
            n,
            walk_re: walk.re,
            walk_im: walk.im,
            oracle_re: oracle.re,
            oracle_im: oracle.im,
            abs_err: (walk - oracle).norm(),
            wall_ms,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub records: Vec<SweepRecord>,
    /// Oracle values whose step refinement did not settle.
    pub flags: Vec<String>,
}

struct Oracles {
    vacuum: C64,
    exp: C64,
    norm: C64,
}

fn oracles(exp: &Experiment, flags: &mut Vec<String>) -> Result<Oracles, CliError> {
    let model = &exp.model;
    let vacuum = exp.v.dotc(&(model.semigroup(&exp.x, exp.t)? * &exp.u));
    let flow = FlowOracle::new(model);
    let me = flow.matrix_element(&exp.x, &exp.u, &exp.v, &exp.f, &exp.g, exp.t, 256)?;
    let xx = exp.x.adjoint() * &exp.x;
    let ns = flow.matrix_element(&xx, &exp.u, &exp.u, &exp.f, &exp.f, exp.t, 256)?;
    for (name, val) in [("exp_me", &me), ("norm_sq", &ns)] {
        if !val.converged {
            flags.push(format!(
                "{name}: oracle refinement stopped at {} steps with change {:.3e}",
                val.steps, val.change
            ));
        }
    }
    Ok(Oracles {
        vacuum,
        exp: me.value,
        norm: ns.value,
    })
}

fn run_point(exp: &Experiment, q: Quantity, idx: usize, o: &Oracles, cap: usize) -> Result<SweepRecord, CliError> {
    let h = exp.h_list[idx];
    let n = exp.steps[idx];
    let start = Instant::now();
    let walk = Walk::new(&exp.model, h)?;
    let m = exp.model.m();
    let (value, oracle) = match q {
        Quantity::VacuumMe => {
            let zero = SlotAverages::zero(m, h, n);
            (walk.matrix_element(&exp.x, &exp.u, &exp.v, &zero, &zero)?, o.vacuum)
        }
        Quantity::ExpMe => {
            let f = slot_averages(&exp.f, h, n)?;
            let g = slot_averages(&exp.g, h, n)?;
            (walk.matrix_element(&exp.x, &exp.u, &exp.v, &f, &g)?, o.exp)
        }
        Quantity::NormSq => {
            let f = slot_averages(&exp.f, h, n)?;
            (walk.norm_sq(&exp.x, &exp.u, &f)?, o.norm)
        }
        Quantity::DenseExpMe => {
            let f = slot_averages(&exp.f, h, n)?;
            let g = slot_averages(&exp.g, h, n)?;
            let state = walk.dense_state(&exp.x, &exp.u, &f, cap)?;
            (ToyState::product(&exp.v, &g).inner(&state), o.exp)
        }
    };
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(SweepRecord::new(q, h, n, value, oracle, wall_ms))
}

/// One record per `(quantity, h)`, ordered by quantity then by position in `h_list`.
/// Dense rows are added only for the step sizes that fit under `dense_cap`.
pub fn run_sweep(exp: &Experiment, dense_cap: usize) -> Result<SweepOutcome, CliError> {
    let mut flags = Vec::new();
    let o = oracles(exp, &mut flags)?;
    let (d, m) = (exp.model.d(), exp.model.m());
    let fits = |n: usize| {
        u32::try_from(n)
            .ok()
            .and_then(|n| (1 + m).checked_pow(n))
            .and_then(|p| p.checked_mul(d))
            .is_some_and(|dim| dim <= dense_cap)
    };
    let mut jobs = Vec::new();
    for q in Quantity::ALL {
        for (idx, &n) in exp.steps.iter().enumerate() {
            if q != Quantity::DenseExpMe || fits(n) {
                jobs.push((q, idx));
            }
        }
    }
    let records = jobs
        .par_iter()
        .map(|&(q, idx)| run_point(exp, q, idx, &o, dense_cap))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SweepOutcome { records, flags })
}

pub fn write_csv<W: Write>(out: W, records: &[SweepRecord]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<SweepRecord>, CliError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != CSV_HEADER {
        return Err(CliError::Csv(format!("unexpected header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(CliError::from)).collect()
}

/// The walk value and the oracle value of a record.
pub fn record_values(r: &SweepRecord) -> (C64, C64) {
    (c64(r.walk_re, r.walk_im), c64(r.oracle_re, r.oracle_im))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ExperimentConfig, ModelSpec};

    #[test]
    fn trivial_model_sweep_is_exact() {
        let mut cfg = ExperimentConfig::reference();
        cfg.model = ModelSpec::Preset {
            preset: "amplitude_damping(1)".into(),
            norm: Some(0.0),
        };
        cfg.f = None;
        cfg.g = None;
        let exp = cfg.experiment().unwrap();
        let out = run_sweep(&exp, 4096).unwrap();
        assert!(out.records.iter().all(|r| r.abs_err <= 1e-12));
    }

    #[test]
    fn records_are_ordered_and_round_trip() {
        let mut cfg = ExperimentConfig::reference();
        cfg.h_list = vec![0.25, 0.125, 0.0625];
        let exp = cfg.experiment().unwrap();
        let out = run_sweep(&exp, 64).unwrap();
        let tags: Vec<&str> = out.records.iter().map(|r| r.quantity.as_str()).collect();
        assert_eq!(
            tags,
            ["vacuum_me", "vacuum_me", "vacuum_me", "exp_me", "exp_me", "exp_me", "norm_sq", "norm_sq", "norm_sq", "dense_exp_me"]
        );
        for r in &out.records {
            let (w, o) = record_values(r);
            assert!(((w - o).norm() - r.abs_err).abs() <= 1e-15);
        }
        let dense = out.records.last().unwrap();
        let stream = &out.records[3];
        assert_eq!(dense.n, stream.n);
        assert!((dense.walk_re - stream.walk_re).abs() < 1e-10);

        let mut buf = Vec::new();
        write_csv(&mut buf, &out.records).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, out.records);
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
