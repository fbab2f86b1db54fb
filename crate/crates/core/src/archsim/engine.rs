use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt::{self, Write as _};

/// Simulated time in femtoseconds.
pub type SimTime = u64;

pub const FS_PER_SECOND: f64 = 1e15;

pub fn ns_to_fs(ns: f64) -> SimTime {
    (ns * 1e6).round() as SimTime
}

pub fn seconds_to_fs(s: f64) -> SimTime {
    (s * FS_PER_SECOND).round() as SimTime
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Resource {
    XpeArray,
    Pca,
    Edram,
    Router,
    Bus,
    Reduction,
    Activation,
    Pooling,
    Io,
    EoTuning,
    ToTuning,
}

pub const RESOURCE_COUNT: usize = 11;

impl Resource {
    pub const ALL: [Resource; RESOURCE_COUNT] = [
        Self::XpeArray,
        Self::Pca,
        Self::Edram,
        Self::Router,
        Self::Bus,
        Self::Reduction,
        Self::Activation,
        Self::Pooling,
        Self::Io,
        Self::EoTuning,
        Self::ToTuning,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::XpeArray => "xpe_array",
            Self::Pca => "pca",
            Self::Edram => "edram",
            Self::Router => "router",
            Self::Bus => "bus",
            Self::Reduction => "reduction",
            Self::Activation => "activation",
            Self::Pooling => "pooling",
            Self::Io => "io",
            Self::EoTuning => "eo_tuning",
            Self::ToTuning => "to_tuning",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EventKind {
    Pass,
    MemoryRead,
    MemoryWrite,
    Transfer,
    Reduction,
    Activation,
    Pooling,
    Readout,
    Tuning,
    Stall,
    Io,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Pass => "pass",
            Self::MemoryRead => "memory_read",
            Self::MemoryWrite => "memory_write",
            Self::Transfer => "transfer",
            Self::Reduction => "reduction",
            Self::Activation => "activation",
            Self::Pooling => "pooling",
            Self::Readout => "readout",
            Self::Tuning => "tuning",
            Self::Stall => "stall",
            Self::Io => "io",
        }
    }
}

/// One occupancy of a resource. `count` is the number of elementary
/// operations the transaction carries (vector pairs, psums, reductions).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimEvent {
    pub start: SimTime,
    pub duration: SimTime,
    pub resource: Resource,
    pub kind: EventKind,
    pub layer: u32,
    pub batch: u32,
    pub index: u32,
    pub count: u64,
}

impl SimEvent {
    pub fn end(&self) -> SimTime {
        self.start + self.duration
    }
}

impl fmt::Display for SimEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} layer={} batch={} idx={} n={} dur={}",
            self.start,
            self.resource.name(),
            self.kind.name(),
            self.layer,
            self.batch,
            self.index,
            self.count,
            self.duration
        )
    }
}

pub const TRACE_HEADER: &str = "# timestamp_fs resource kind payload";

pub fn format_trace(events: &[SimEvent]) -> String {
    let mut out = String::with_capacity(events.len() * 64);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for e in events {
        let _ = writeln!(out, "{e}");
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AuditReport {
    pub events: usize,
    /// Pairs of events occupying one resource over intersecting intervals.
    pub overlaps: Vec<(SimEvent, SimEvent)>,
    /// Positions where a timestamp is earlier than its predecessor's.
    pub non_monotone: Vec<usize>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.overlaps.is_empty() && self.non_monotone.is_empty()
    }
}

/// Checks a trace in dequeue order for per-resource exclusivity and
/// non-decreasing timestamps. Zero-length events occupy nothing.
pub fn audit(events: &[SimEvent]) -> AuditReport {
    let mut report = AuditReport { events: events.len(), ..Default::default() };
    let mut by_resource: Vec<Vec<SimEvent>> = vec![Vec::new(); RESOURCE_COUNT];
    for (i, e) in events.iter().enumerate() {
        if i > 0 && e.start < events[i - 1].start {
            report.non_monotone.push(i);
        }
        if e.duration > 0 {
            by_resource[e.resource.index()].push(*e);
        }
    }
    for list in &mut by_resource {
        list.sort_by_key(|e| (e.start, e.end()));
        for w in list.windows(2) {
            if w[1].start < w[0].end() {
                report.overlaps.push((w[0], w[1]));
            }
        }
    }
    report
}

struct Entry<A> {
    time: SimTime,
    seq: u64,
    action: A,
}

impl<A> PartialEq for Entry<A> {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}

impl<A> Eq for Entry<A> {}

impl<A> PartialOrd for Entry<A> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<A> Ord for Entry<A> {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

enum Slot<A> {
    Begin(SimEvent),
    Fire(A),
}

/// Discrete-event core: a time-ordered queue with FIFO tie-breaking and
/// single-server resources reserved in request order.
pub struct Engine<A> {
    now: SimTime,
    seq: u64,
    queue: BinaryHeap<Reverse<Entry<Slot<A>>>>,
    free_at: [SimTime; RESOURCE_COUNT],
    busy: [SimTime; RESOURCE_COUNT],
    horizon: SimTime,
    event_count: u64,
    last_end: [SimTime; RESOURCE_COUNT],
    overlaps: u64,
    trace: Option<Vec<SimEvent>>,
}

impl<A> Engine<A> {
    pub fn new(record_trace: bool) -> Self {
        Self {
            now: 0,
            seq: 0,
            queue: BinaryHeap::new(),
            free_at: [0; RESOURCE_COUNT],
            busy: [0; RESOURCE_COUNT],
            horizon: 0,
            event_count: 0,
            last_end: [0; RESOURCE_COUNT],
            overlaps: 0,
            trace: record_trace.then(Vec::new),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Latest end time of any event so far.
    pub fn horizon(&self) -> SimTime {
        self.horizon
    }

    pub fn event_count(&self) -> u64 {
        self.event_count
    }

    /// Occupancies that started before their resource was released,
    /// detected as events begin.
    pub fn overlaps(&self) -> u64 {
        self.overlaps
    }

    pub fn busy_time(&self, resource: Resource) -> SimTime {
        self.busy[resource.index()]
    }

    pub fn take_trace(&mut self) -> Option<Vec<SimEvent>> {
        self.trace.take()
    }

    fn push(&mut self, time: SimTime, slot: Slot<A>) {
        self.seq += 1;
        self.queue.push(Reverse(Entry { time, seq: self.seq, action: slot }));
    }

    /// Moves the clock forward while the queue is empty.
    pub fn advance_to(&mut self, time: SimTime) {
        assert!(self.queue.is_empty(), "cannot jump the clock with pending events");
        self.now = self.now.max(time);
    }

    /// Reserves `resource` for `duration` from the earliest time it is free,
    /// logs the occupancy when it begins, and fires `then` when it ends.
    /// Returns the reserved start time.
    pub fn request(&mut self, mut event: SimEvent, then: Option<A>) -> SimTime {
        let r = event.resource.index();
        let start = self.now.max(self.free_at[r]);
        event.start = start;
        self.free_at[r] = start + event.duration;
        self.busy[r] += event.duration;
        self.push(start, Slot::Begin(event));
        if let Some(action) = then {
            self.push(start + event.duration, Slot::Fire(action));
        }
        start
    }

    /// Pops the next action, logging any occupancies that begin first.
    pub fn next(&mut self) -> Option<A> {
        while let Some(Reverse(entry)) = self.queue.pop() {
            debug_assert!(entry.time >= self.now);
            self.now = entry.time;
            match entry.action {
                Slot::Begin(e) => {
                    let r = e.resource.index();
                    if e.duration > 0 {
                        if e.start < self.last_end[r] {
                            self.overlaps += 1;
                        }
                        self.last_end[r] = e.end();
                    }
                    self.horizon = self.horizon.max(e.end());
                    self.event_count += 1;
                    if let Some(t) = self.trace.as_mut() {
                        t.push(e);
                    }
                }
                Slot::Fire(a) => return Some(a),
            }
        }
        None
    }
}
