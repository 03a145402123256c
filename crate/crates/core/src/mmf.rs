//! The modified Mike-Farmer simulation loop.
//!
//! Each event first gives every resting order a chance to be cancelled, using
//! probabilities computed from the book as it stood at the start of the
//! event, then places one unit order whose side comes from the sign series
//! and whose price is the same-side best quote shifted by the relative price:
//! `pi = pi_b(t-1) + x` for a buy and `pi = pi_a(t-1) - x` for a sell. The
//! recorded return is the change of the log mid-quote over the event.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lob::{Order, OrderBook, OrderId, PlacementOutcome, Side, TickPrice, TICK_SIZE};
use crate::rng::{stream, Stream};
use crate::stochastic::{
    generate_fgn, signs_from_fgn, IaaftReport, RelativePriceSeries, DEFAULT_IAAFT_MAX_ITER,
};

/// Event count of a full-scale run.
pub const FULL_EVENTS: usize = 200_000;
/// Returns kept from a full-scale run.
pub const FULL_KEPT_RETURNS: usize = 40_000;
/// Default transient share of a run; the last `(1 - f) * n_events` recorded
/// returns are kept.
pub const DEFAULT_TRANSIENT_FRACTION: f64 = 1.0 - FULL_KEPT_RETURNS as f64 / FULL_EVENTS as f64;
/// Fraction of post-transient events allowed to end with an empty book.
pub const MAX_EMPTY_BOOK_FRACTION: f64 = 0.01;

/// Relative prices beyond this many ticks are clipped before rounding.
const MAX_OFFSET_TICKS: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha_x: f64,
    pub hurst_x: f64,
    pub hurst_s: f64,
    pub n_events: usize,
    pub transient_fraction: f64,
    pub seed: u64,
    #[serde(default = "default_iaaft_max_iter")]
    pub iaaft_max_iter: usize,
    /// Log-price units per unit of the Student-t relative price.
    #[serde(default = "default_price_scale")]
    pub price_scale: f64,
}

fn default_iaaft_max_iter() -> usize {
    DEFAULT_IAAFT_MAX_ITER
}

/// Default Student-t scale of relative prices in log-price units: one tick.
pub const DEFAULT_PRICE_SCALE: f64 = TICK_SIZE;

fn default_price_scale() -> f64 {
    DEFAULT_PRICE_SCALE
}

impl ModelParams {
    pub fn new(alpha_x: f64, hurst_x: f64, hurst_s: f64, n_events: usize, seed: u64) -> Self {
        Self {
            alpha_x,
            hurst_x,
            hurst_s,
            n_events,
            transient_fraction: DEFAULT_TRANSIENT_FRACTION,
            seed,
            iaaft_max_iter: DEFAULT_IAAFT_MAX_ITER,
            price_scale: default_price_scale(),
        }
    }

    /// Transient fraction that keeps `keep` returns out of `n_events`.
    pub fn with_kept_returns(mut self, keep: usize) -> Self {
        self.transient_fraction = 1.0 - keep.min(self.n_events) as f64 / self.n_events as f64;
        self
    }

    /// Number of trailing recorded returns kept after the transient.
    pub fn kept_len(&self) -> usize {
        ((1.0 - self.transient_fraction) * self.n_events as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidParameter(what));
        if !(self.alpha_x > 0.0 && self.alpha_x.is_finite()) {
            return bad(format!("alpha_x must be > 0, got {}", self.alpha_x));
        }
        for (name, h) in [("hurst_x", self.hurst_x), ("hurst_s", self.hurst_s)] {
            if !(0.5..1.0).contains(&h) {
                return bad(format!("{name} must lie in [0.5, 1), got {h}"));
            }
        }
        if self.n_events < 16 {
            return bad(format!("n_events must be >= 16, got {}", self.n_events));
        }
        if !(0.0..1.0).contains(&self.transient_fraction) {
            return bad(format!("transient_fraction must lie in [0, 1), got {}", self.transient_fraction));
        }
        if self.iaaft_max_iter == 0 {
            return bad("iaaft_max_iter must be >= 1".into());
        }
        if !(self.price_scale > 0.0 && self.price_scale.is_finite()) {
            return bad(format!("price_scale must be > 0, got {}", self.price_scale));
        }
        Ok(())
    }
}

/// How the order book imbalance entering the cancellation law is measured
/// for an order on side `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Imbalance {
    /// Share of resting orders on the order's own side, `n_s / n_tot`, in `[0, 1]`.
    #[default]
    OwnShare,
    /// Side-signed difference `s (n_buy - n_sell) / n_tot`, in `[-1, 1]`.
    SignedDifference,
}

impl Imbalance {
    pub fn value(self, side: Side, n_buy: usize, n_sell: usize) -> f64 {
        let total = n_buy + n_sell;
        if total == 0 {
            return 0.0;
        }
        let (own, other) = match side {
            Side::Buy => (n_buy, n_sell),
            Side::Sell => (n_sell, n_buy),
        };
        match self {
            Imbalance::OwnShare => own as f64 / total as f64,
            Imbalance::SignedDifference => (own as f64 - other as f64) / total as f64,
        }
    }
}

/// Constants of the cancellation law `P = A (1 - exp(-Y)) (imb + B) / n_tot`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CancellationModel {
    pub a: f64,
    pub b: f64,
    #[serde(default)]
    pub imbalance: Imbalance,
}

impl Default for CancellationModel {
    fn default() -> Self {
        Self {
            a: 1.12,
            b: 0.2,
            imbalance: Imbalance::default(),
        }
    }
}

impl CancellationModel {
    /// `P` from its ingredients, clamped into `[0, 1]`.
    pub fn probability(&self, y: f64, imbalance: f64, n_total: usize) -> f64 {
        if n_total == 0 {
            return 0.0;
        }
        let p = self.a * (1.0 - (-y).exp()) * (imbalance + self.b) / n_total as f64;
        if p.is_nan() {
            0.0
        } else {
            p.clamp(0.0, 1.0)
        }
    }
}

/// Current distance to execution over distance at entry. Orders that entered
/// against an empty opposite side or at zero distance, and orders whose
/// opposite side is now empty, get `Y = 1`.
pub fn distance_ratio(order: &Order, opposite_best: Option<TickPrice>) -> f64 {
    match (order.distance_to(opposite_best), order.initial_distance) {
        (Some(now), Some(initial)) if initial > 0 => now as f64 / initial as f64,
        _ => 1.0,
    }
}

pub fn cancellation_probability(order: &Order, book: &OrderBook, model: &CancellationModel) -> f64 {
    let y = distance_ratio(order, book.best(order.side.opposite()));
    let imb = model.imbalance.value(order.side, book.n_buy(), book.n_sell());
    model.probability(y, imb, book.len())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    pub values: Vec<f64>,
    pub events_simulated: usize,
    /// Returns recorded before the transient cut.
    pub recorded: usize,
    pub kept: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    pub placed: u64,
    pub rested: u64,
    pub executed: u64,
    pub cancelled: u64,
    pub mean_depth: f64,
    pub final_depth: usize,
    pub mean_spread_ticks: f64,
    /// Events without a two-sided quote before or after the event.
    pub missing_quote_events: usize,
    /// Post-transient events after which both book sides were empty.
    pub post_transient_empty: usize,
    pub iaaft: IaaftReport,
    pub runtime_ms: u64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub returns: ReturnSeries,
    pub diagnostics: RunDiagnostics,
    /// Book state after the last event.
    pub book: OrderBook,
}

/// Input streams of one run.
#[derive(Debug, Clone)]
pub struct OrderFlow {
    pub signs: Vec<i8>,
    /// Relative prices in log-price units.
    pub relative_prices: Vec<f64>,
    pub iaaft: IaaftReport,
}

impl OrderFlow {
    pub fn generate(params: &ModelParams) -> Result<Self> {
        let n = params.n_events;
        let fgn = generate_fgn(n, params.hurst_s, &mut stream(params.seed, Stream::Signs))?;
        let signs = signs_from_fgn(&fgn)?.values;
        let prices = RelativePriceSeries::generate(
            n,
            params.alpha_x,
            params.hurst_x,
            params.iaaft_max_iter,
            &mut stream(params.seed, Stream::RelativePrices),
            &mut stream(params.seed, Stream::SpectrumSource),
        )?;
        let relative_prices = prices.values.iter().map(|x| x * params.price_scale).collect();
        Ok(Self {
            signs,
            relative_prices,
            iaaft: prices.iaaft,
        })
    }
}

/// Simulate one run and return the post-transient mid-quote returns.
pub fn run(params: &ModelParams) -> Result<RunResult> {
    params.validate()?;
    let started = Instant::now();
    let flow = OrderFlow::generate(params)?;
    let mut result = simulate(&flow, params, &CancellationModel::default())?;
    result.diagnostics.runtime_ms = started.elapsed().as_millis() as u64;
    Ok(result)
}

/// Drive a seeded book with a prepared order flow.
pub fn simulate(flow: &OrderFlow, params: &ModelParams, model: &CancellationModel) -> Result<RunResult> {
    let n = flow.signs.len().min(flow.relative_prices.len());
    let mut cancel_rng = stream(params.seed, Stream::Cancellation);
    let mut book = OrderBook::seeded(TickPrice(0));
    let (mut ref_bid, mut ref_ask) = match book.quotes() {
        (Some(b), Some(a)) => (b, a),
        _ => unreachable!("seeded book has both quotes"),
    };

    let transient_events = (params.transient_fraction * n as f64).floor() as usize;
    let mut recorded = Vec::with_capacity(n);
    let mut missing = 0;
    let mut post_transient_empty = 0;
    let mut depth_sum = 0.0;
    let mut spread_sum = 0.0;
    let mut spread_obs = 0usize;
    let mut doomed: Vec<OrderId> = Vec::new();

    for t in 0..n {
        let (bid0, ask0) = book.quotes();

        sweep_cancellations(&book, model, &mut cancel_rng, &mut doomed);
        for &id in &doomed {
            book.cancel(id);
        }

        // An empty side keeps its last quote, pulled back to at least one
        // tick outside the opposite best so it never sits across the book.
        match (bid0, ask0) {
            (Some(b), Some(a)) => {
                ref_bid = b;
                ref_ask = a;
            }
            (Some(b), None) => {
                ref_bid = b;
                ref_ask = ref_ask.max(b.offset(1));
            }
            (None, Some(a)) => {
                ref_ask = a;
                ref_bid = ref_bid.min(a.offset(-1));
            }
            (None, None) => {}
        }
        let side = Side::from_sign(flow.signs[t]);
        let offset = (flow.relative_prices[t] / TICK_SIZE)
            .clamp(-MAX_OFFSET_TICKS, MAX_OFFSET_TICKS)
            .round() as i64;
        let price = match side {
            Side::Buy => ref_bid.offset(offset),
            Side::Sell => ref_ask.offset(-offset),
        };
        let _: PlacementOutcome = book.place(side, price, t as u64 + 1);

        let (bid1, ask1) = book.quotes();
        depth_sum += book.len() as f64;
        match (bid0, ask0, bid1, ask1) {
            (Some(b0), Some(a0), Some(b1), Some(a1)) => {
                let r = 0.5 * TICK_SIZE * ((a1.0 - a0.0) + (b1.0 - b0.0)) as f64;
                recorded.push(r);
                spread_sum += (a1.0 - b1.0) as f64;
                spread_obs += 1;
            }
            _ => missing += 1,
        }
        if t >= transient_events && book.is_empty() {
            post_transient_empty += 1;
        }
    }

    let post_events = n - transient_events;
    if post_transient_empty as f64 > MAX_EMPTY_BOOK_FRACTION * post_events as f64 {
        return Err(Error::DegenerateRun {
            empty: post_transient_empty,
            events: post_events,
        });
    }

    let cut = recorded.len().saturating_sub(params.kept_len());
    let total_recorded = recorded.len();
    let values = recorded.split_off(cut);
    let counters = book.counters();
    Ok(RunResult {
        returns: ReturnSeries {
            kept: values.len(),
            values,
            events_simulated: n,
            recorded: total_recorded,
        },
        diagnostics: RunDiagnostics {
            placed: counters.placed,
            rested: counters.rested,
            executed: counters.crossed + counters.filled,
            cancelled: counters.cancelled,
            mean_depth: depth_sum / n.max(1) as f64,
            final_depth: book.len(),
            mean_spread_ticks: if spread_obs > 0 { spread_sum / spread_obs as f64 } else { f64::NAN },
            missing_quote_events: missing,
            post_transient_empty,
            iaaft: flow.iaaft,
            runtime_ms: 0,
        },
        book,
    })
}

/// Ids of the resting orders that are cancelled this event. Probabilities
/// all refer to the book state on entry; one uniform is drawn per resting
/// order in canonical book order.
fn sweep_cancellations<R: Rng + ?Sized>(
    book: &OrderBook,
    model: &CancellationModel,
    rng: &mut R,
    doomed: &mut Vec<OrderId>,
) {
    doomed.clear();
    let n_total = book.len();
    if n_total == 0 {
        return;
    }
    let (best_bid, best_ask) = book.quotes();
    let buy_imb = model.imbalance.value(Side::Buy, book.n_buy(), book.n_sell());
    let sell_imb = model.imbalance.value(Side::Sell, book.n_buy(), book.n_sell());
    for order in book.iter() {
        let (opposite, imb) = match order.side {
            Side::Buy => (best_ask, buy_imb),
            Side::Sell => (best_bid, sell_imb),
        };
        let p = model.probability(distance_ratio(order, opposite), imb, n_total);
        let u: f64 = rng.random();
        if u < p {
            doomed.push(order.id);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probability_examples() {
        let m = CancellationModel::default();
        assert_eq!(m.probability(0.0, 0.7, 10), 0.0);
        let far = m.probability(f64::INFINITY, 0.5, 10);
        assert!((far - 0.0784).abs() < 1e-15, "{far}");
        assert_eq!(m.probability(1e9, -0.2, 1), 0.0);
        // clamped above
        assert_eq!(CancellationModel { a: 100.0, ..Default::default() }.probability(5.0, 1.0, 1), 1.0);
    }

    #[test]
    fn distance_ratio_conventions() {
        let mut o = Order {
            id: 0,
            side: Side::Buy,
            price: TickPrice(95),
            entry_time: 0,
            initial_distance: Some(5),
        };
        assert_eq!(distance_ratio(&o, Some(TickPrice(105))), 2.0);
        assert_eq!(distance_ratio(&o, None), 1.0);
        o.initial_distance = Some(0);
        assert_eq!(distance_ratio(&o, Some(TickPrice(105))), 1.0);
        o.initial_distance = None;
        assert_eq!(distance_ratio(&o, Some(TickPrice(105))), 1.0);
    }

    #[test]
    fn imbalance_conventions() {
        let signed = Imbalance::SignedDifference;
        assert_eq!(signed.value(Side::Buy, 6, 4), 0.2);
        assert_eq!(signed.value(Side::Sell, 6, 4), -0.2);
        assert_eq!(signed.value(Side::Sell, 0, 0), 0.0);
        let share = Imbalance::OwnShare;
        assert_eq!(share.value(Side::Buy, 6, 4), 0.6);
        assert_eq!(share.value(Side::Sell, 6, 4), 0.4);
        assert_eq!(share.value(Side::Buy, 0, 0), 0.0);
    }

    #[test]
    fn bid_improvement_gives_half_log_change() {
        // One buy that improves the bid inside the spread, no cancellation.
        let flow = OrderFlow {
            signs: vec![1],
            relative_prices: vec![0.01],
            iaaft: IaaftReport { iterations: 0, converged: true, spectrum_mismatch: 0.0 },
        };
        let mut params = ModelParams::new(1.3, 0.8, 0.75, 16, 1);
        params.transient_fraction = 0.0;
        let model = CancellationModel { a: 0.0, ..Default::default() };
        let res = simulate(&flow, &params, &model).unwrap();
        // bid moves from -1 to 0 ticks, ask stays at +1
        assert_eq!(res.returns.values, vec![0.5 * 0.01]);
    }

    #[test]
    fn params_validation() {
        let ok = ModelParams::new(1.3, 0.8, 0.75, 1000, 1);
        assert!(ok.validate().is_ok());
        let mut bad = ok;
        bad.hurst_s = 1.0;
        assert!(bad.validate().is_err());
        let mut bad = ok;
        bad.alpha_x = 0.0;
        assert!(bad.validate().is_err());
        let mut bad = ok;
        bad.transient_fraction = 1.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn kept_returns_maps_to_transient_fraction() {
        let p = ModelParams::new(1.3, 0.8, 0.75, 200_000, 1).with_kept_returns(40_000);
        assert!((p.transient_fraction - 0.8).abs() < 1e-15);
        assert!((DEFAULT_TRANSIENT_FRACTION - 0.8).abs() < 1e-15);
    }
}
