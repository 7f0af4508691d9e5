//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.

use qrw_cli::config::ExperimentConfig;
use qrw_cli::rate::fit_rate;
use qrw_cli::suites::{self, CheckLine};
use qrw_cli::sweep::{run_sweep, SweepRecord};
use qrw_core::flow::{fine_walk_reference, vacuum_check, FlowOracle};
use qrw_core::GkslModel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

struct Outcome {
    id: usize,
    title: &'static str,
    pass: bool,
    summary: String,
    details: Vec<String>,
}

fn from_lines(id: usize, title: &'static str, lines: Vec<CheckLine>, extra: Option<(bool, String)>) -> Outcome {
    let failed = lines.iter().filter(|l| !l.pass()).count();
    let mut pass = failed == 0;
    let mut summary = format!("{} checks, {failed} failed", lines.len());
    if let Some((ok, text)) = extra {
        pass &= ok;
        summary = format!("{summary}; {text}");
    }
    Outcome {
        id,
        title,
        pass,
        summary,
        details: lines.iter().map(ToString::to_string).collect(),
    }
}

fn errors(records: &[SweepRecord], quantity: &str) -> Vec<f64> {
    records.iter().filter(|r| r.quantity == quantity).map(|r| r.abs_err).collect()
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn fmt_errs(v: &[f64]) -> String {
    v.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(" ")
}

const STEP_SIZES: [f64; 4] = [1.0, 0.1, 0.01, 1e-4];

fn main() {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let models = suites::random_models(&mut rng, 50);

    let clock = Instant::now();
    let lines = suites::unitary_suite(&models, &STEP_SIZES).expect("unitary suite");
    let secs = clock.elapsed().as_secs_f64();
    out.push(from_lines(
        1,
        "step unitary and closed-form blocks",
        lines,
        Some((secs < 10.0, format!("{secs:.2}s < 10s"))),
    ));

    let lines = suites::estimate_suite(&models, &STEP_SIZES).expect("estimate suite");
    out.push(from_lines(2, "elementary unitary estimates, raw constants", lines, None));

    let lines = suites::homomorphism_suite(&mut rng, &models, &STEP_SIZES, 200, false).expect("homomorphism suite");
    out.push(from_lines(3, "β homomorphism and component relations", lines, None));

    let lines = suites::defect_suite(&mut rng, &models, &STEP_SIZES).expect("defect suite");
    out.push(from_lines(4, "defect bounds and h-scaling exponents", lines, None));

    let lines = suites::composition_suite(&mut rng, 8).expect("composition suite");
    out.push(from_lines(5, "composition table of the basic operators", lines, None));

    let lines = suites::lemma_suite(&mut rng, 12, 8, 4, &[0.2, 0.1, 0.05]).expect("lemma suite");
    out.push(from_lines(6, "norm-diff and N vs Λ estimates", lines, None));

    let lines = suites::engine_suite(&mut rng, None, 100, 6, 4096).expect("engine suite");
    out.push(from_lines(7, "dense vs streaming walk engines", lines, None));

    let cfg = ExperimentConfig::reference();
    let exp = cfg.experiment().expect("reference config");
    let clock = Instant::now();
    let vac: Vec<f64> = exp
        .h_list
        .iter()
        .map(|&h| vacuum_check(&exp.model, &exp.x, &exp.u, &exp.v, exp.t, h).expect("vacuum check").abs_err)
        .collect();
    let secs = clock.elapsed().as_secs_f64();
    let sweep = run_sweep(&exp, cfg.dense_cap).expect("reference sweep");
    let vac_sweep = errors(&sweep.records, "vacuum_me");
    let slope = fit_rate(&sweep.records, "vacuum_me").ok().and_then(|f| f.slope()).unwrap_or(f64::NAN);
    let pass = strictly_decreasing(&vac)
        && vac == vac_sweep
        && (0.8..=1.2).contains(&slope)
        && vac.last().is_some_and(|&e| e < 1e-2)
        && secs < 5.0;
    out.push(Outcome {
        id: 8,
        title: "vacuum convergence",
        pass,
        summary: format!("slope {slope:.4} in [0.8, 1.2]; final {:.2e} < 1e-2; {secs:.3}s < 5s", vac.last().unwrap()),
        details: vec![format!("abs_err {}", fmt_errs(&vac))],
    });

    let exp_errs = errors(&sweep.records, "exp_me");
    let slope = fit_rate(&sweep.records, "exp_me").ok().and_then(|f| f.slope()).unwrap_or(f64::NAN);
    out.push(Outcome {
        id: 9,
        title: "exponential-vector weak convergence",
        pass: strictly_decreasing(&exp_errs) && slope >= 0.4 && sweep.flags.is_empty(),
        summary: format!("slope {slope:.4} >= 0.4; strictly decreasing {}", strictly_decreasing(&exp_errs)),
        details: vec![format!("abs_err {}", fmt_errs(&exp_errs))],
    });

    let oracle_models: Vec<GkslModel> = models.iter().take(10).cloned().collect();
    let lines = suites::oracle_suite(&mut rng, &oracle_models).expect("oracle suite");
    out.push(from_lines(10, "flow oracle self-consistency", lines, None));

    let oracle = FlowOracle::new(&exp.model)
        .matrix_element(&exp.x, &exp.u, &exp.v, &exp.f, &exp.g, exp.t, 256)
        .expect("oracle");
    let fine = fine_walk_reference(&exp.model, &exp.x, &exp.u, &exp.v, &exp.f, &exp.g, exp.t, 0.5f64.powi(12))
        .expect("fine walk");
    let gap = (fine - oracle.value).norm();
    out.push(Outcome {
        id: 11,
        title: "fine walk vs flow oracle",
        pass: gap <= 5e-3 && oracle.converged,
        summary: format!("|walk(2^-12) - oracle| {gap:.3e} <= 5e-3"),
        details: vec![format!("oracle {:.12} after {} steps", oracle.value, oracle.steps)],
    });

    let ns = errors(&sweep.records, "norm_sq");
    let slope = fit_rate(&sweep.records, "norm_sq").ok().and_then(|f| f.slope()).unwrap_or(f64::NAN);
    out.push(Outcome {
        id: 12,
        title: "norm-square convergence",
        pass: slope >= 0.4,
        summary: format!("slope {slope:.4} >= 0.4"),
        details: vec![format!("abs_err {}", fmt_errs(&ns))],
    });

    let mut lines = suites::decomposition_suite(&mut rng, None, 4).expect("hybrid suite");
    lines.extend(suites::decomposition_suite(&mut rng, Some(&exp.model), 2).expect("hybrid suite"));
    out.push(from_lines(13, "telescoping identity and remainder bound, n in {1, 2}", lines, None));

    let mut failed = 0;
    for o in &out {
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {status} {}: {}", o.id, o.title, o.summary);
        for d in &o.details {
            println!("    {d}");
        }
        if !o.pass {
            failed += 1;
        }
    }
    println!("{} criteria, {failed} failed", out.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
