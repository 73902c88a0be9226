//! Acceptance criteria 1 to 10, one line each. Runs without the libtest
//! harness so the verdict lines are always printed.

use std::time::{Duration, Instant};

use levy_penal::verification::{self, McReport, VerifyConfig};
use levy_penal::Result;

struct Criterion {
    id: usize,
    title: &'static str,
    budget: Option<Duration>,
    min_rows: usize,
    run: fn(&VerifyConfig) -> Result<Vec<McReport>>,
}

fn h_laws(cfg: &VerifyConfig) -> Result<Vec<McReport>> {
    verification::h_properties(cfg)
}

fn criteria() -> Vec<Criterion> {
    vec![
        Criterion { id: 1, title: "Brownian closed forms", budget: Some(Duration::from_secs(5)), min_rows: 1, run: |_| verification::brownian_closed_forms() },
        Criterion { id: 2, title: "stable closed form of h", budget: Some(Duration::from_secs(60)), min_rows: 9, run: |_| verification::stable_closed_forms() },
        Criterion { id: 3, title: "subadditivity and limit slopes", budget: None, min_rows: 1, run: h_laws },
        Criterion { id: 4, title: "gambler's-ruin battery", budget: Some(Duration::from_secs(600)), min_rows: 12, run: verification::hit_probabilities },
        Criterion { id: 5, title: "exponential law of L at T_a", budget: None, min_rows: 6, run: verification::exponential_local_time },
        Criterion { id: 6, title: "martingale constancy", budget: None, min_rows: 1, run: verification::martingales },
        Criterion { id: 7, title: "clock-limit consistency", budget: None, min_rows: 4, run: |_| verification::clock_limits() },
        Criterion { id: 8, title: "inverse-local-time law", budget: None, min_rows: 3, run: verification::inverse_local_time },
        Criterion { id: 9, title: "penalised law of L_inf", budget: None, min_rows: 3, run: verification::penalized_l_infinity },
        Criterion { id: 10, title: "transient suite", budget: None, min_rows: 3, run: verification::transient },
    ]
}

fn describe(r: &McReport) -> String {
    format!("{} [{}] {} estimate={:.6e} target={:.6e} sigmas={:?}", r.name, r.model, r.params, r.estimate, r.target, r.sigmas)
}

fn main() {
    let cfg = VerifyConfig::default();
    let mut failed = Vec::new();
    for c in criteria() {
        let start = Instant::now();
        let outcome = (c.run)(&cfg);
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok(rows) => {
                let bad: Vec<&McReport> = rows.iter().filter(|r| !r.pass).collect();
                for r in &bad {
                    eprintln!("    failing row: {}", describe(r));
                }
                let in_time = c.budget.is_none_or(|b| elapsed <= b);
                let pass = bad.is_empty() && in_time && rows.len() >= c.min_rows;
                let mut detail = format!("{} rows, {} failing", rows.len(), bad.len());
                if !in_time {
                    detail.push_str(", over time budget");
                }
                if rows.len() < c.min_rows {
                    detail.push_str(&format!(", fewer than {} rows", c.min_rows));
                }
                (pass, detail)
            }
            Err(e) => (false, format!("error: {e}")),
        };
        println!("criterion {:>2} {:<32} {} ({detail}, {:.1?})", c.id, c.title, if pass { "PASS" } else { "FAIL" }, elapsed);
        if !pass {
            failed.push(c.id);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
