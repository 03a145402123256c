//! Quick invariant checks runnable from the command line.

use std::fmt;

use rand::Rng;
use serde::Serialize;

use crate::analytics::{ols, pearson_columns, ModelForm, SweepRecord};
use crate::hurst::{dfa, default_scales, estimate_hurst, FitRange, Segmentation};
use crate::lob::{OrderBook, OrderId, PlacementOutcome, Side, TickPrice};
use crate::mmf::CancellationModel;
use crate::rng::{derive_seed, seeded};
use crate::stochastic::{generate_fgn, iaaft, sample_student_t};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{mark}  {:<28} {}", self.name, self.detail)
    }
}

fn check(name: &'static str, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        name,
        passed,
        detail: detail.into(),
    }
}

/// Run every check; the suite passes when all entries pass.
pub fn run_all(seed: u64) -> Vec<Check> {
    vec![
        fgn_dfa(seed),
        iaaft_multiset(seed),
        book_vs_brute_force(seed),
        cancellation_bounds(),
        dfa_invariance(seed),
        ols_recovery(),
        pearson_affine(seed),
        seed_collisions(seed),
    ]
}

fn fgn_dfa(seed: u64) -> Check {
    let mut rng = seeded(seed);
    let mut worst: f64 = 0.0;
    for &h in &[0.5, 0.7, 0.9] {
        let mut sum = 0.0;
        for _ in 0..3 {
            let x = match generate_fgn(1 << 14, h, &mut rng) {
                Ok(x) => x,
                Err(e) => return check("fgn_dfa", false, e.to_string()),
            };
            match estimate_hurst(&x.values, FitRange::default(), Segmentation::BothEnds) {
                Ok(fit) => sum += fit.hurst,
                Err(e) => return check("fgn_dfa", false, e.to_string()),
            }
        }
        worst = worst.max((sum / 3.0 - h).abs());
    }
    check("fgn_dfa", worst < 0.06, format!("max |mean H - H| = {worst:.4}"))
}

fn iaaft_multiset(seed: u64) -> Check {
    let mut rng = seeded(seed ^ 1);
    let amps = match sample_student_t(4096, 1.3, &mut rng) {
        Ok(a) => a,
        Err(e) => return check("iaaft_multiset", false, e.to_string()),
    };
    let source = match generate_fgn(4096, 0.8, &mut rng) {
        Ok(s) => s,
        Err(e) => return check("iaaft_multiset", false, e.to_string()),
    };
    match iaaft(&amps, &source, 50) {
        Ok(s) => {
            let mut a = amps.clone();
            let mut b = s.values.clone();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            check(
                "iaaft_multiset",
                a == b,
                format!("{} iterations, converged = {}", s.report.iterations, s.report.converged),
            )
        }
        Err(e) => check("iaaft_multiset", false, e.to_string()),
    }
}

fn book_vs_brute_force(seed: u64) -> Check {
    let mut rng = seeded(seed ^ 2);
    let mut book = OrderBook::new();
    let mut shadow: Vec<(OrderId, Side, i64)> = Vec::new();
    for t in 0..5000u64 {
        if !shadow.is_empty() && rng.random_bool(0.3) {
            let k = rng.random_range(0..shadow.len());
            let (id, _, _) = shadow.swap_remove(k);
            if !book.cancel(id) {
                return check("book_vs_brute_force", false, format!("cancel of live order {id} failed"));
            }
        } else {
            let side = if rng.random_bool(0.5) { Side::Buy } else { Side::Sell };
            let price = rng.random_range(-20..=20);
            match book.place(side, TickPrice(price), t) {
                PlacementOutcome::Rested(id) => shadow.push((id, side, price)),
                PlacementOutcome::Executed { resting_id, .. } => shadow.retain(|o| o.0 != resting_id),
            }
        }
        let bid = shadow.iter().filter(|o| o.1 == Side::Buy).map(|o| o.2).max();
        let ask = shadow.iter().filter(|o| o.1 == Side::Sell).map(|o| o.2).min();
        let quotes = book.quotes();
        if quotes != (bid.map(TickPrice), ask.map(TickPrice)) {
            return check("book_vs_brute_force", false, format!("quote mismatch at step {t}"));
        }
        if let (Some(b), Some(a)) = quotes {
            if b >= a {
                return check("book_vs_brute_force", false, format!("crossed book at step {t}"));
            }
        }
        if book.len() != shadow.len() {
            return check("book_vs_brute_force", false, format!("size mismatch at step {t}"));
        }
    }
    let c = book.counters();
    let conserved = c.placed == book.len() as u64 + c.crossed + c.filled + c.cancelled;
    check("book_vs_brute_force", conserved, format!("5000 operations, {} resting", book.len()))
}

fn cancellation_bounds() -> Check {
    let model = CancellationModel::default();
    let mut ok = true;
    for n in [1usize, 2, 5, 100] {
        for i in 0..=20 {
            let imb = i as f64 / 20.0;
            let mut prev = -1.0;
            for k in 0..=40 {
                let y = k as f64 / 10.0;
                let p = model.probability(y, imb, n);
                ok &= (0.0..=1.0).contains(&p) && p >= prev;
                prev = p;
            }
        }
    }
    check("cancellation_bounds", ok, "P in [0, 1] and nondecreasing in Y")
}

fn dfa_invariance(seed: u64) -> Check {
    let mut rng = seeded(seed ^ 3);
    // Dyadic values keep every operation exact.
    let x: Vec<f64> = (0..4096).map(|_| rng.random_range(-512i32..512) as f64 / 64.0).collect();
    let scales = default_scales(x.len(), FitRange::default());
    let base = dfa(&x, &scales, Segmentation::BothEnds);
    let shifted: Vec<f64> = x.iter().map(|v| v + 3.0).collect();
    let scaled: Vec<f64> = x.iter().map(|v| v * 4.0).collect();
    match (
        base,
        dfa(&shifted, &scales, Segmentation::BothEnds),
        dfa(&scaled, &scales, Segmentation::BothEnds),
    ) {
        (Ok(b), Ok(s), Ok(c)) => {
            let shift_ok = b.fluctuations == s.fluctuations;
            let scale_ok = b.fluctuations.iter().zip(&c.fluctuations).all(|(u, v)| 4.0 * u == *v);
            check(
                "dfa_invariance",
                shift_ok && scale_ok,
                format!("shift exact = {shift_ok}, scale exact = {scale_ok}"),
            )
        }
        _ => check("dfa_invariance", false, "dfa failed"),
    }
}

fn ols_recovery() -> Check {
    let grid = [0.5, 0.6, 0.7, 0.8, 0.9];
    let mut recs = Vec::new();
    for &a in &[1.0, 1.3, 1.6] {
        for &s in &grid {
            for &x in &grid {
                recs.push(SweepRecord {
                    alpha_x: a,
                    hurst_x: x,
                    hurst_s: s,
                    rep_index: 0,
                    hurst_r: 0.25 - 0.02 * a - 0.08 * x + 0.52 * s,
                    r2: 1.0,
                    seed: 0,
                    runtime_ms: 0,
                });
            }
        }
    }
    match ols(&recs, ModelForm::Linear3) {
        Ok(rep) => {
            let err = rep
                .coefficients()
                .iter()
                .zip([0.25, -0.02, -0.08, 0.52])
                .map(|(g, w)| ((g - w) / w).abs())
                .fold(0.0, f64::max);
            check("ols_recovery", err < 1e-10, format!("max relative error {err:.2e}"))
        }
        Err(e) => check("ols_recovery", false, e.to_string()),
    }
}

fn pearson_affine(seed: u64) -> Check {
    let mut rng = seeded(seed ^ 4);
    let xs: Vec<f64> = (0..500).map(|_| rng.random::<f64>()).collect();
    let ys: Vec<f64> = xs.iter().map(|x| x + rng.random::<f64>()).collect();
    let zs: Vec<f64> = ys.iter().map(|y| 2.5 * y - 7.0).collect();
    match (pearson_columns(&xs, &ys, "x"), pearson_columns(&xs, &zs, "x")) {
        (Ok(a), Ok(b)) => check(
            "pearson_affine",
            (a - b).abs() < 1e-12,
            format!("|rho - rho'| = {:.1e}", (a - b).abs()),
        ),
        _ => check("pearson_affine", false, "pearson failed"),
    }
}

fn seed_collisions(seed: u64) -> Check {
    let mut seen = std::collections::HashSet::with_capacity(100_000);
    for cell in 0..1000 {
        for rep in 0..100 {
            seen.insert(derive_seed(seed, cell, rep));
        }
    }
    check("seed_collisions", seen.len() == 100_000, format!("{} distinct of 100000", seen.len()))
}
