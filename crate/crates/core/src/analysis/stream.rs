//! Chunked analysis of a tag stream, without holding the whole record.

use alloc::vec::Vec;

use super::{AnchorTask, LogCounts, Op, TagView};
use crate::params::ElectronicsParams;
use crate::sim::{LogEntry, RecordSink, TimeTag};

/// Runs an [`AnchorTask`] while tags arrive in time order.
///
/// Anchors are processed once every tag they can reach has arrived, i.e.
/// up to `lookahead` before the newest tag; tags older than `lookback`
/// before the processed frontier are dropped. The counts equal those of a
/// single pass over the complete record as long as every window lies
/// within `[anchor − lookback, anchor + lookahead]`.
#[derive(Debug)]
pub struct Chunked<T> {
    pub task: T,
    pub log_counts: LogCounts,
    electronics: ElectronicsParams,
    end_ps: u64,
    lookahead: u64,
    lookback: u64,
    chunk: usize,
    channels: [Vec<u64>; 4],
    ops: Vec<Op>,
    frontier: u64,
    processed_to: u64,
    since_flush: usize,
}

impl<T: AnchorTask> Chunked<T> {
    /// Default reach of the windows around an anchor.
    pub const DEFAULT_REACH_PS: u64 = 2_000_000;
    const CHUNK: usize = 1 << 16;

    /// Analyzes anchors before `end_ps`.
    pub fn new(task: T, electronics: ElectronicsParams, end_ps: u64) -> Self {
        Self::with_reach(
            task,
            electronics,
            end_ps,
            Self::DEFAULT_REACH_PS,
            Self::DEFAULT_REACH_PS,
        )
    }

    pub fn with_reach(
        task: T,
        electronics: ElectronicsParams,
        end_ps: u64,
        lookahead: u64,
        lookback: u64,
    ) -> Self {
        Chunked {
            task,
            log_counts: LogCounts::default(),
            electronics,
            end_ps,
            lookahead,
            lookback,
            chunk: Self::CHUNK,
            channels: Default::default(),
            ops: Vec::new(),
            frontier: 0,
            processed_to: 0,
            since_flush: 0,
        }
    }

    /// Processes after every `n` records instead of the default.
    pub fn chunk_size(mut self, n: usize) -> Self {
        self.chunk = n.max(1);
        self
    }

    fn process_to(&mut self, hi: u64) {
        let hi = hi.min(self.end_ps);
        if hi <= self.processed_to {
            return;
        }
        let view = TagView {
            channels: [
                &self.channels[0],
                &self.channels[1],
                &self.channels[2],
                &self.channels[3],
            ],
            ops: &self.ops,
        };
        self.task.process(&view, self.processed_to, hi);
        self.processed_to = hi;
        let cut = self.processed_to.saturating_sub(self.lookback);
        for c in &mut self.channels {
            let n = c.partition_point(|&t| t < cut);
            c.drain(..n);
        }
        let n = self.ops.partition_point(|o| o.last_time() < cut);
        self.ops.drain(..n);
    }

    fn bump(&mut self, t: u64) {
        self.frontier = self.frontier.max(t);
        self.since_flush += 1;
        if self.since_flush >= self.chunk {
            self.since_flush = 0;
            self.process_to(self.frontier.saturating_sub(self.lookahead));
        }
    }

    /// Processes the remaining anchors and returns the task and log counts.
    pub fn finish(mut self) -> (T, LogCounts) {
        self.process_to(u64::MAX);
        (self.task, self.log_counts)
    }
}

impl<T: AnchorTask> RecordSink for Chunked<T> {
    fn tag(&mut self, tag: TimeTag) {
        let c = &mut self.channels[tag.channel as usize];
        // Tags normally arrive sorted; keep the slices sorted regardless.
        let at = if c.last().is_none_or(|&l| l <= tag.time) {
            c.len()
        } else {
            c.partition_point(|&t| t <= tag.time)
        };
        c.insert(at, tag.time);
        self.bump(tag.time);
    }

    fn log(&mut self, entry: LogEntry) {
        self.log_counts
            .observe(&entry, &self.electronics, self.end_ps);
        if let Some(op) = Op::from_log(&entry) {
            self.ops.push(op);
        }
        self.bump(entry.time());
    }
}
