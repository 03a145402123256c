//! Price-time priority limit order book for unit-size orders.
//!
//! Prices live on an integer grid of log-price ticks (one tick = 0.01 in
//! log-price). Each side keeps its levels in a `BTreeMap` with a FIFO queue
//! per level; an id index makes cancellation by id cheap. With unit sizes a
//! crossing order consumes exactly one resting order at the opposite best.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

/// Log-price increment of one tick.
pub const TICK_SIZE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TickPrice(pub i64);

impl TickPrice {
    pub fn log_price(self) -> f64 {
        self.0 as f64 * TICK_SIZE
    }

    /// Nearest tick to a real log-price, ties away from zero.
    /// Values beyond the representable grid saturate.
    pub fn from_log_price(log_price: f64) -> Self {
        TickPrice((log_price / TICK_SIZE).round() as i64)
    }

    pub fn offset(self, ticks: i64) -> Self {
        TickPrice(self.0.saturating_add(ticks))
    }
}

impl fmt::Display for TickPrice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    pub fn sign(self) -> i64 {
        match self {
            Side::Buy => 1,
            Side::Sell => -1,
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Side::Buy => Side::Sell,
            Side::Sell => Side::Buy,
        }
    }

    pub fn from_sign(sign: i8) -> Self {
        if sign >= 0 {
            Side::Buy
        } else {
            Side::Sell
        }
    }
}

pub type OrderId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Order {
    pub id: OrderId,
    pub side: Side,
    pub price: TickPrice,
    pub entry_time: u64,
    /// Ticks to the opposite best at entry; `None` if that side was empty.
    pub initial_distance: Option<u64>,
}

impl Order {
    /// Ticks between this order and the current opposite best, if any.
    pub fn distance_to(&self, opposite_best: Option<TickPrice>) -> Option<u64> {
        opposite_best.map(|q| (q.0 - self.price.0).unsigned_abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlacementOutcome {
    Rested(OrderId),
    Executed { trade_price: TickPrice, resting_id: OrderId },
}

/// Counters for order conservation: `placed = resting + executed + cancelled`,
/// where `executed` counts resting orders consumed by crossing orders and
/// crossing orders themselves.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BookCounters {
    pub placed: u64,
    pub rested: u64,
    pub crossed: u64,
    pub filled: u64,
    pub cancelled: u64,
}

#[derive(Debug, Default, Clone)]
struct BookSide {
    levels: BTreeMap<i64, VecDeque<Order>>,
    count: usize,
}

impl BookSide {
    fn push(&mut self, order: Order) {
        self.levels.entry(order.price.0).or_default().push_back(order);
        self.count += 1;
    }

    fn remove(&mut self, price: TickPrice, id: OrderId) -> Option<Order> {
        let queue = self.levels.get_mut(&price.0)?;
        let pos = queue.iter().position(|o| o.id == id)?;
        let order = queue.remove(pos);
        if queue.is_empty() {
            self.levels.remove(&price.0);
        }
        self.count -= 1;
        order
    }

    fn pop_front_at(&mut self, price: i64) -> Option<Order> {
        let queue = self.levels.get_mut(&price)?;
        let order = queue.pop_front();
        if queue.is_empty() {
            self.levels.remove(&price);
        }
        if order.is_some() {
            self.count -= 1;
        }
        order
    }

    fn find(&self, price: TickPrice, id: OrderId) -> Option<&Order> {
        self.levels.get(&price.0)?.iter().find(|o| o.id == id)
    }
}

#[derive(Debug, Default, Clone)]
pub struct OrderBook {
    bids: BookSide,
    asks: BookSide,
    index: HashMap<OrderId, (Side, TickPrice)>,
    next_id: OrderId,
    counters: BookCounters,
}

impl OrderBook {
    pub fn new() -> Self {
        Self::default()
    }

    /// Book primed with one bid one tick below and one ask one tick above `mid`.
    pub fn seeded(mid: TickPrice) -> Self {
        let mut book = Self::new();
        book.place(Side::Buy, mid.offset(-1), 0);
        book.place(Side::Sell, mid.offset(1), 0);
        book
    }

    pub fn best_bid(&self) -> Option<TickPrice> {
        self.bids.levels.keys().next_back().map(|&p| TickPrice(p))
    }

    pub fn best_ask(&self) -> Option<TickPrice> {
        self.asks.levels.keys().next().map(|&p| TickPrice(p))
    }

    pub fn quotes(&self) -> (Option<TickPrice>, Option<TickPrice>) {
        (self.best_bid(), self.best_ask())
    }

    pub fn best(&self, side: Side) -> Option<TickPrice> {
        match side {
            Side::Buy => self.best_bid(),
            Side::Sell => self.best_ask(),
        }
    }

    pub fn n_buy(&self) -> usize {
        self.bids.count
    }

    pub fn n_sell(&self) -> usize {
        self.asks.count
    }

    pub fn len(&self) -> usize {
        self.bids.count + self.asks.count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn counters(&self) -> BookCounters {
        self.counters
    }

    pub fn get(&self, id: OrderId) -> Option<&Order> {
        let &(side, price) = self.index.get(&id)?;
        self.side(side).find(price, id)
    }

    fn side(&self, side: Side) -> &BookSide {
        match side {
            Side::Buy => &self.bids,
            Side::Sell => &self.asks,
        }
    }

    fn side_mut(&mut self, side: Side) -> &mut BookSide {
        match side {
            Side::Buy => &mut self.bids,
            Side::Sell => &mut self.asks,
        }
    }

    /// Submit a unit order. Crosses against the opposite best when
    /// marketable, otherwise rests with time priority `now`.
    pub fn place(&mut self, side: Side, price: TickPrice, now: u64) -> PlacementOutcome {
        self.counters.placed += 1;
        let opposite = self.best(side.opposite());
        let marketable = match (side, opposite) {
            (Side::Buy, Some(ask)) => price >= ask,
            (Side::Sell, Some(bid)) => price <= bid,
            (_, None) => false,
        };

        if let (true, Some(trade_price)) = (marketable, opposite) {
            let resting = self
                .side_mut(side.opposite())
                .pop_front_at(trade_price.0)
                .expect("best level is nonempty");
            self.index.remove(&resting.id);
            self.counters.crossed += 1;
            self.counters.filled += 1;
            return PlacementOutcome::Executed {
                trade_price,
                resting_id: resting.id,
            };
        }

        let id = self.next_id;
        self.next_id += 1;
        let order = Order {
            id,
            side,
            price,
            entry_time: now,
            initial_distance: opposite.map(|q| (q.0 - price.0).unsigned_abs()),
        };
        self.index.insert(id, (side, price));
        self.side_mut(side).push(order);
        self.counters.rested += 1;
        PlacementOutcome::Rested(id)
    }

    pub fn cancel(&mut self, id: OrderId) -> bool {
        let Some((side, price)) = self.index.remove(&id) else {
            return false;
        };
        let removed = self.side_mut(side).remove(price, id);
        debug_assert!(removed.is_some(), "id index and price levels out of sync");
        self.counters.cancelled += 1;
        true
    }

    /// Resting orders in canonical order: bids from best to worst, then asks
    /// from best to worst, each level in time priority.
    pub fn iter(&self) -> impl Iterator<Item = &Order> + '_ {
        let bids = self.bids.levels.values().rev().flat_map(|q| q.iter());
        let asks = self.asks.levels.values().flat_map(|q| q.iter());
        bids.chain(asks)
    }

    /// `(side, price, depth)` rows, bids best-first then asks best-first.
    pub fn depth(&self) -> Vec<(Side, TickPrice, usize)> {
        let bids = self
            .bids
            .levels
            .iter()
            .rev()
            .map(|(&p, q)| (Side::Buy, TickPrice(p), q.len()));
        let asks = self
            .asks
            .levels
            .iter()
            .map(|(&p, q)| (Side::Sell, TickPrice(p), q.len()));
        bids.chain(asks).collect()
    }

    /// Tab-separated depth snapshot with a header line.
    pub fn write_depth<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "side\tticks\tlog_price\tdepth")?;
        for (side, price, depth) in self.depth() {
            let side = match side {
                Side::Buy => "bid",
                Side::Sell => "ask",
            };
            writeln!(out, "{side}\t{}\t{:.2}\t{depth}", price.0, price.log_price())?;
        }
        Ok(())
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_is_nearest_ties_away() {
        assert_eq!(TickPrice::from_log_price(0.014), TickPrice(1));
        assert_eq!(TickPrice::from_log_price(0.025), TickPrice(3));
        assert_eq!(TickPrice::from_log_price(-0.025), TickPrice(-3));
        assert_eq!(TickPrice::from_log_price(-0.004), TickPrice(0));
        assert_eq!(TickPrice(-7).log_price(), -0.07);
    }

    #[test]
    fn buy_at_ask_executes() {
        let mut book = OrderBook::new();
        book.place(Side::Sell, TickPrice(101), 0);
        book.place(Side::Sell, TickPrice(102), 1);
        let out = book.place(Side::Buy, TickPrice(101), 2);
        assert!(matches!(out, PlacementOutcome::Executed { trade_price: TickPrice(101), .. }));
        assert_eq!(book.n_sell(), 1);
        assert_eq!(book.best_ask(), Some(TickPrice(102)));
    }

    #[test]
    fn buy_below_ask_rests() {
        let mut book = OrderBook::new();
        book.place(Side::Sell, TickPrice(101), 0);
        book.place(Side::Buy, TickPrice(97), 1);
        let out = book.place(Side::Buy, TickPrice(99), 2);
        let PlacementOutcome::Rested(id) = out else { panic!("expected rest") };
        assert_eq!(book.best_bid(), Some(TickPrice(99)));
        assert_eq!(book.get(id).unwrap().initial_distance, Some(2));
    }

    #[test]
    fn empty_book_sell_rests_without_distance() {
        let mut book = OrderBook::new();
        let PlacementOutcome::Rested(id) = book.place(Side::Sell, TickPrice(100), 0) else {
            panic!("expected rest")
        };
        assert_eq!(book.quotes(), (None, Some(TickPrice(100))));
        assert_eq!(book.get(id).unwrap().initial_distance, None);
    }

    #[test]
    fn cancel_paths() {
        let mut book = OrderBook::new();
        let PlacementOutcome::Rested(b1) = book.place(Side::Buy, TickPrice(99), 0) else { panic!() };
        book.place(Side::Buy, TickPrice(98), 1);
        let PlacementOutcome::Rested(a1) = book.place(Side::Sell, TickPrice(101), 2) else { panic!() };
        assert!(book.cancel(b1));
        assert_eq!(book.best_bid(), Some(TickPrice(98)));
        assert!(!book.cancel(b1));
        assert!(!book.cancel(12345));
        assert!(book.cancel(a1));
        assert_eq!(book.best_ask(), None);
    }

    #[test]
    fn quotes_examples() {
        let mut book = OrderBook::new();
        assert_eq!(book.quotes(), (None, None));
        book.place(Side::Buy, TickPrice(99), 0);
        book.place(Side::Buy, TickPrice(98), 1);
        book.place(Side::Sell, TickPrice(101), 2);
        assert_eq!(book.quotes(), (Some(TickPrice(99)), Some(TickPrice(101))));
        book.place(Side::Buy, TickPrice(150), 3);
        assert_eq!(book.quotes(), (Some(TickPrice(99)), None));
    }

    #[test]
    fn time_priority_within_level() {
        let mut book = OrderBook::new();
        let PlacementOutcome::Rested(first) = book.place(Side::Sell, TickPrice(101), 0) else { panic!() };
        let PlacementOutcome::Rested(second) = book.place(Side::Sell, TickPrice(101), 1) else { panic!() };
        let out = book.place(Side::Buy, TickPrice(105), 2);
        assert_eq!(out, PlacementOutcome::Executed { trade_price: TickPrice(101), resting_id: first });
        let out = book.place(Side::Buy, TickPrice(101), 3);
        assert_eq!(out, PlacementOutcome::Executed { trade_price: TickPrice(101), resting_id: second });
    }

    #[test]
    fn seeded_book_has_one_tick_quotes() {
        let book = OrderBook::seeded(TickPrice(0));
        assert_eq!(book.quotes(), (Some(TickPrice(-1)), Some(TickPrice(1))));
        assert_eq!(book.len(), 2);
    }

    #[test]
    fn depth_dump() {
        let mut book = OrderBook::new();
        book.place(Side::Buy, TickPrice(99), 0);
        book.place(Side::Buy, TickPrice(99), 1);
        book.place(Side::Sell, TickPrice(103), 2);
        let mut out = Vec::new();
        book.write_depth(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "side\tticks\tlog_price\tdepth\nbid\t99\t0.99\t2\nask\t103\t1.03\t1\n");
    }
}
