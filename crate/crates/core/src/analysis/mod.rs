//! Estimators over time-tag streams.
//!
//! Every estimator is an [`AnchorTask`]: it walks "anchor" events (an idler
//! click or a logged memory operation) in a time range and looks for signal
//! clicks in windows around each anchor, accumulating integer counts. Counts
//! of disjoint anchor ranges add up, so the same code runs on a complete
//! in-memory record ([`TagSet`]) and on a stream processed in chunks
//! ([`stream::Chunked`]).

pub mod decay;
pub mod g2;
pub mod histogram;
pub mod hom;
pub mod rates;
pub mod stream;

pub use decay::{DecayCurve, DecayPoint, DecayTask};
pub use g2::{g2h_estimate, G2Counts, G2Task};
pub use histogram::{
    accumulate_cross, cross_correlation, locate_window, temporal_overlap,
    temporal_overlap_estimate, BinSpec, Histogram,
};
pub use hom::{HomPoint, HomScan, HomStocTask, HomSyncTask};
pub use rates::{pair_rates, ElectronicsRates, LogCounts, PairMode, StocTask, SyncTask};
pub use stream::Chunked;

use alloc::vec::Vec;

use crate::sim::{Channel, LogEntry, TagRecord, TimeTag};

/// One completed memory operation, from the event log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Op {
    pub ddg2_time: Option<u64>,
    pub ddg1_time: u64,
    pub store_time: u64,
    pub retrieve_time: u64,
}

impl Op {
    pub fn from_log(e: &LogEntry) -> Option<Op> {
        match *e {
            LogEntry::PcRetrieve {
                time,
                store_time,
                ddg2_time,
                ddg1_time,
            } => Some(Op {
                ddg2_time,
                ddg1_time,
                store_time,
                retrieve_time: time,
            }),
            _ => None,
        }
    }

    pub fn storage_time_ps(&self) -> i64 {
        self.retrieve_time as i64 - self.store_time as i64
    }

    /// Latest time this operation refers to.
    pub fn last_time(&self) -> u64 {
        self.retrieve_time.max(self.store_time)
    }
}

/// Borrowed per-channel tag streams and memory operations, all time-sorted.
#[derive(Debug, Clone, Copy)]
pub struct TagView<'a> {
    pub channels: [&'a [u64]; 4],
    pub ops: &'a [Op],
}

impl<'a> TagView<'a> {
    pub fn channel(&self, ch: Channel) -> &'a [u64] {
        self.channels[ch as usize]
    }
}

/// Owned per-channel tag streams of a complete record.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TagSet {
    pub channels: [Vec<u64>; 4],
    pub ops: Vec<Op>,
    pub log: Vec<LogEntry>,
}

impl TagSet {
    pub fn from_parts(tags: &[TimeTag], log: &[LogEntry]) -> Self {
        let mut s = TagSet::default();
        for t in tags {
            s.channels[t.channel as usize].push(t.time);
        }
        for c in &mut s.channels {
            if !c.windows(2).all(|w| w[0] <= w[1]) {
                c.sort_unstable();
            }
        }
        s.ops = log.iter().filter_map(Op::from_log).collect();
        s.log = log.to_vec();
        s
    }

    pub fn from_record(r: &TagRecord) -> Self {
        Self::from_parts(&r.tags, &r.log)
    }

    pub fn view(&self) -> TagView<'_> {
        TagView {
            channels: [
                &self.channels[0],
                &self.channels[1],
                &self.channels[2],
                &self.channels[3],
            ],
            ops: &self.ops,
        }
    }

    /// Runs a task over all anchors before `end_ps`.
    pub fn run<T: AnchorTask>(&self, task: &mut T, end_ps: u64) {
        task.process(&self.view(), 0, end_ps);
    }
}

/// Coincidence windows of the analysis.
///
/// Offsets are window centers relative to the anchor, in ps; windows span
/// `center ± herald_window/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub herald_window: u64,
    /// Half-width of the idler-idler accidental coincidence window.
    pub accidental_window: u64,
    pub offsets: Offsets,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Offsets {
    pub idler1_sig_a: i64,
    pub idler1_sig_b: i64,
    pub idler2_sig_a: i64,
    pub idler2_sig_b: i64,
    pub retrieval_sig_a: i64,
    pub retrieval_sig_b: i64,
}

impl Offsets {
    /// Same offset for every idler-signal pair.
    pub fn uniform(idler_to_signal: i64, retrieval_to_signal: i64) -> Self {
        Offsets {
            idler1_sig_a: idler_to_signal,
            idler1_sig_b: idler_to_signal,
            idler2_sig_a: idler_to_signal,
            idler2_sig_b: idler_to_signal,
            retrieval_sig_a: retrieval_to_signal,
            retrieval_sig_b: retrieval_to_signal,
        }
    }

    pub fn get(&self, herald: Channel, signal: Channel) -> i64 {
        match (herald, signal) {
            (Channel::Idler1, Channel::SigA) => self.idler1_sig_a,
            (Channel::Idler1, _) => self.idler1_sig_b,
            (_, Channel::SigA) => self.idler2_sig_a,
            _ => self.idler2_sig_b,
        }
    }
}

impl WindowSpec {
    pub const DEFAULT_HERALD: u64 = 3_500;
    pub const DEFAULT_ACCIDENTAL: u64 = 300;

    pub fn new(offsets: Offsets) -> Self {
        WindowSpec {
            herald_window: Self::DEFAULT_HERALD,
            accidental_window: Self::DEFAULT_ACCIDENTAL,
            offsets,
        }
    }

    /// Locates every window center from the data, keeping `base` where a
    /// histogram has no peak.
    ///
    /// Idler-2 windows use the idler-2 clicks of logged memory operations
    /// when there are any (the retrieved photon is only correlated with
    /// those); retrieval windows use the retrieval pulse times.
    pub fn locate(view: &TagView<'_>, base: Offsets, end_ps: u64) -> Self {
        let spec = BinSpec {
            bin_width: 100,
            t_min: -100_000,
            t_max: 500_000,
        };
        let w = Self::DEFAULT_HERALD;
        let before =
            |ts: &[u64]| -> Vec<u64> { ts.iter().copied().take_while(|&t| t < end_ps).collect() };
        let find = |anchors: &[u64], target: Channel, fallback: i64| -> i64 {
            let h = cross_correlation(anchors, view.channel(target), spec).expect("valid geometry");
            locate_window(&h, w).unwrap_or(fallback)
        };
        let i1 = before(view.channel(Channel::Idler1));
        let i2: Vec<u64> = if view.ops.is_empty() {
            before(view.channel(Channel::Idler2))
        } else {
            view.ops
                .iter()
                .filter_map(|o| o.ddg2_time)
                .take_while(|&t| t < end_ps)
                .collect()
        };
        let ret: Vec<u64> = view
            .ops
            .iter()
            .map(|o| o.retrieve_time)
            .take_while(|&t| t < end_ps)
            .collect();
        let o = Offsets {
            idler1_sig_a: find(&i1, Channel::SigA, base.idler1_sig_a),
            idler1_sig_b: find(&i1, Channel::SigB, base.idler1_sig_b),
            idler2_sig_a: find(&i2, Channel::SigA, base.idler2_sig_a),
            idler2_sig_b: find(&i2, Channel::SigB, base.idler2_sig_b),
            retrieval_sig_a: find(&ret, Channel::SigA, base.retrieval_sig_a),
            retrieval_sig_b: find(&ret, Channel::SigB, base.retrieval_sig_b),
        };
        Self::new(o)
    }

    /// Whether `ts` has a click in the window centered `offset` after `anchor`.
    #[inline]
    pub fn hit(&self, ts: &[u64], anchor: u64, offset: i64) -> bool {
        let c = anchor as i64 + offset;
        let half = (self.herald_window / 2) as i64;
        any_in(ts, c - half, c + half)
    }
}

/// Whether a sorted stream has an element in `[lo, hi]`.
#[inline]
pub fn any_in(ts: &[u64], lo: i64, hi: i64) -> bool {
    if hi < 0 {
        return false;
    }
    let lo = lo.max(0) as u64;
    let i = ts.partition_point(|&t| t < lo);
    i < ts.len() && ts[i] <= hi as u64
}

/// Sub-slice of a sorted stream with times in `[lo, hi)`.
#[inline]
pub fn time_range(ts: &[u64], lo: u64, hi: u64) -> &[u64] {
    let a = ts.partition_point(|&t| t < lo);
    let b = ts.partition_point(|&t| t < hi);
    &ts[a..b.max(a)]
}

/// Operations whose key time lies in `[lo, hi)`; `key` must be monotone over the log.
#[inline]
pub fn op_range<F: Fn(&Op) -> u64>(ops: &[Op], lo: u64, hi: u64, key: F) -> &[Op] {
    let a = ops.partition_point(|o| key(o) < lo);
    let b = ops.partition_point(|o| key(o) < hi);
    &ops[a..b.max(a)]
}

/// An estimator that accumulates counts over anchors in a time range.
pub trait AnchorTask {
    /// Processes the anchors with times in `[lo, hi)`. The view must contain
    /// every tag that a window around those anchors can reach.
    fn process(&mut self, view: &TagView<'_>, lo: u64, hi: u64);
}

impl<T: AnchorTask> AnchorTask for Option<T> {
    fn process(&mut self, view: &TagView<'_>, lo: u64, hi: u64) {
        if let Some(t) = self {
            t.process(view, lo, hi);
        }
    }
}

impl<T: AnchorTask> AnchorTask for Vec<T> {
    fn process(&mut self, view: &TagView<'_>, lo: u64, hi: u64) {
        for t in self {
            t.process(view, lo, hi);
        }
    }
}

macro_rules! tuple_task {
    ($($name:ident $idx:tt),+) => {
        impl<$($name: AnchorTask),+> AnchorTask for ($($name,)+) {
            fn process(&mut self, view: &TagView<'_>, lo: u64, hi: u64) {
                $(self.$idx.process(view, lo, hi);)+
            }
        }
    };
}

tuple_task!(A 0, B 1);
tuple_task!(A 0, B 1, C 2);
tuple_task!(A 0, B 1, C 2, D 3);
tuple_task!(A 0, B 1, C 2, D 3, E 4);

/// Accumulates a cross-correlation histogram between an anchor stream and a channel.
#[derive(Debug, Clone)]
pub struct HistTask {
    pub anchor: Anchor,
    pub target: Channel,
    pub hist: Histogram,
}

/// Which events serve as anchors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    Tags(Channel),
    /// Idler-2 clicks that started a memory operation.
    OpIdler2,
    /// Retrieval pulses.
    OpRetrieval,
}

impl Anchor {
    /// Anchor times in `[lo, hi)`, in order.
    pub fn times(self, view: &TagView<'_>, lo: u64, hi: u64) -> Vec<u64> {
        match self {
            Anchor::Tags(ch) => time_range(view.channel(ch), lo, hi).to_vec(),
            Anchor::OpIdler2 => op_range(view.ops, lo, hi, |o| o.ddg2_time.unwrap_or(o.ddg1_time))
                .iter()
                .filter_map(|o| o.ddg2_time)
                .collect(),
            Anchor::OpRetrieval => op_range(view.ops, lo, hi, |o| o.retrieve_time)
                .iter()
                .map(|o| o.retrieve_time)
                .collect(),
        }
    }
}

impl HistTask {
    pub fn new(anchor: Anchor, target: Channel, spec: BinSpec) -> Self {
        HistTask {
            anchor,
            target,
            hist: Histogram::new(spec),
        }
    }
}

impl AnchorTask for HistTask {
    fn process(&mut self, view: &TagView<'_>, lo: u64, hi: u64) {
        let anchors = self.anchor.times(view, lo, hi);
        accumulate_cross(&mut self.hist, &anchors, view.channel(self.target));
    }
}
