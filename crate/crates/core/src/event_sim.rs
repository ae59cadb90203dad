//! Cycle-accurate simulator for one fold on one sub-array.
//!
//! A fold is the unit of work a sub-array executes between refills: `rows`
//! occupied PE rows, `cols` occupied PE columns and a temporal depth of
//! `temporal` elements streamed through every PE. The simulator advances one
//! cycle at a time, firing injection, MAC and drain events from the timing
//! rules below, and reports the inclusive span from the first injection to
//! the last output exit. It exists to ground-truth the closed forms in
//! [`crate::analytic`], so nothing here may consult those formulas.
//!
//! Timing contract (part of the model, asserted by tests):
//!
//! * Output-stationary (OS): row-operand element `(i, t)` enters row `i` at
//!   cycle `t + i` and moves one column per cycle; column-operand element
//!   `(t, j)` enters column `j` at cycle `t + j` and moves one row per cycle.
//!   The two elements with equal `t` meet at PE `(i, j)` at cycle
//!   `t + i + j`, which is when that MAC fires. Once the bottom PE of column
//!   `j` has fired its last accumulate, the column drains one result per
//!   cycle starting the next cycle, bottom row first.
//! * Weight-stationary (WS): the stationary operand is preloaded from the
//!   top, one PE row per cycle, for `rows` cycles; the row destined for PE
//!   row `i` enters at cycle `rows - 1 - i` and is resident everywhere by
//!   cycle `rows - 1`. The streamed element `(t, i)` enters row `i` at cycle
//!   `(rows - 1) + t + i`, overlapping the final preload cycle by exactly
//!   one cycle, and partial sums flow down; the result for `(t, j)` exits
//!   the bottom of column `j` one cycle after its bottom-row accumulate.
//! * Input-stationary (IS): identical timing to WS with the roles of the
//!   stationary and streamed operands exchanged. Which GEMM matrix rides
//!   which port is decided by the dataflow mapping in [`crate::analytic`];
//!   the fold engine only distinguishes row-injected from column-injected
//!   traffic.
//!
//! Reads are counted at injection, outputs at drain.

use crate::domain::Dataflow;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("fold dimension {name} must be >= 1")]
    ZeroDim { name: &'static str },
    #[error("fold {name} = {value} exceeds the simulator bound {limit}")]
    BoundExceeded {
        name: &'static str,
        value: u64,
        limit: u64,
    },
    #[error("event log refused: {events} events exceed the {limit} event cap")]
    EventLogTooLarge { events: u64, limit: u64 },
}

/// Occupied extent of one fold. `rows`/`cols` are the used PE rows/columns
/// (R' and C'), `temporal` the streamed depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FoldSpec {
    pub rows: u64,
    pub cols: u64,
    pub temporal: u64,
}

impl FoldSpec {
    pub fn new(rows: u64, cols: u64, temporal: u64) -> Result<Self, SimError> {
        for (name, v) in [("rows", rows), ("cols", cols), ("temporal", temporal)] {
            if v == 0 {
                return Err(SimError::ZeroDim { name });
            }
        }
        Ok(Self {
            rows,
            cols,
            temporal,
        })
    }
}

/// Refusal bounds. The engine is meant for ground-truthing small instances;
/// anything bigger belongs to the closed forms.
#[derive(Debug, Clone, Copy)]
pub struct SimLimits {
    pub max_rows: u64,
    pub max_cols: u64,
    pub max_temporal: u64,
}

impl Default for SimLimits {
    fn default() -> Self {
        Self {
            max_rows: 64,
            max_cols: 64,
            max_temporal: 4096,
        }
    }
}

/// Cap on logged events; logging is for instances small enough to eyeball.
pub const EVENT_LOG_CAP: u64 = 65_536;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// Row-operand element with temporal index `t` enters at the left edge.
    InjectRow { t: u64 },
    /// Column-operand element with temporal index `t` enters at the top edge.
    InjectCol { t: u64 },
    /// Stationary element enters at the top edge, destined for `dest_row`.
    Preload { dest_row: u64 },
    /// PE fires its multiply-accumulate for temporal index `t`.
    Mac { t: u64 },
    /// A finished result leaves the array.
    Drain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventRecord {
    pub cycle: u64,
    pub unit_row: u64,
    pub unit_col: u64,
    pub event: EventKind,
}

impl EventRecord {
    /// One CSV row in the `cycle,unit_row,unit_col,event` dump format.
    pub fn csv_row(&self) -> String {
        let ev = match self.event {
            EventKind::InjectRow { t } => format!("inject_row(t={t})"),
            EventKind::InjectCol { t } => format!("inject_col(t={t})"),
            EventKind::Preload { dest_row } => format!("preload(dest_row={dest_row})"),
            EventKind::Mac { t } => format!("mac(t={t})"),
            EventKind::Drain => "drain".to_string(),
        };
        format!("{},{},{},{}", self.cycle, self.unit_row, self.unit_col, ev)
    }
}

/// Outcome of one fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldTrace {
    pub cycles: u64,
    pub reads_row_operand: u64,
    pub reads_col_operand: u64,
    pub outputs_drained: u64,
    pub events: Option<Vec<EventRecord>>,
}

pub fn simulate_fold(
    spec: FoldSpec,
    dataflow: Dataflow,
    limits: &SimLimits,
    log_events: bool,
) -> Result<FoldTrace, SimError> {
    let checks = [
        ("rows", spec.rows, limits.max_rows),
        ("cols", spec.cols, limits.max_cols),
        ("temporal", spec.temporal, limits.max_temporal),
    ];
    for (name, value, limit) in checks {
        if value == 0 {
            return Err(SimError::ZeroDim { name });
        }
        if value > limit {
            return Err(SimError::BoundExceeded { name, value, limit });
        }
    }
    if log_events {
        // Rough upper bound on emitted events: every MAC plus boundary traffic.
        let events = spec.rows * spec.cols * spec.temporal
            + 2 * (spec.rows + spec.cols) * spec.temporal
            + spec.rows * spec.cols;
        if events > EVENT_LOG_CAP {
            return Err(SimError::EventLogTooLarge {
                events,
                limit: EVENT_LOG_CAP,
            });
        }
    }
    Ok(match dataflow {
        Dataflow::Os => output_stationary_fold(spec, log_events),
        Dataflow::Ws | Dataflow::Is => stationary_operand_fold(spec, log_events),
    })
}

struct EventSink {
    records: Option<Vec<EventRecord>>,
    last_cycle: u64,
    any: bool,
}

impl EventSink {
    fn new(log: bool) -> Self {
        Self {
            records: log.then(Vec::new),
            last_cycle: 0,
            any: false,
        }
    }

    fn push(&mut self, cycle: u64, unit_row: u64, unit_col: u64, event: EventKind) {
        self.any = true;
        self.last_cycle = self.last_cycle.max(cycle);
        if let Some(r) = &mut self.records {
            r.push(EventRecord {
                cycle,
                unit_row,
                unit_col,
                event,
            });
        }
    }

    /// Inclusive cycle count: events on cycles `0..=last` span `last + 1`.
    fn cycles(&self) -> u64 {
        debug_assert!(self.any, "a fold always fires at least one event");
        self.last_cycle + 1
    }
}

fn output_stationary_fold(spec: FoldSpec, log: bool) -> FoldTrace {
    let (rp, cp, t_len) = (spec.rows, spec.cols, spec.temporal);
    let mut sink = EventSink::new(log);
    let mut fired = vec![0u64; (rp * cp) as usize];
    let mut drain_schedule: BTreeMap<u64, Vec<(u64, u64)>> = BTreeMap::new();
    let mut reads_row = 0u64;
    let mut reads_col = 0u64;
    let mut drained = 0u64;
    let total_outputs = rp * cp;
    // Generous wedge guard; the drain of the top-right result is the last
    // event and lands well inside this.
    let guard = 4 * (rp + cp + t_len) + 16;

    let mut cycle = 0u64;
    while drained < total_outputs {
        assert!(cycle <= guard, "output-stationary fold wedged at cycle {cycle}");
        // Skewed boundary injections: element (i, t) enters row i at t + i,
        // element (t, j) enters column j at t + j.
        for i in 0..rp {
            if cycle >= i && cycle - i < t_len {
                reads_row += 1;
                sink.push(cycle, i, 0, EventKind::InjectRow { t: cycle - i });
            }
        }
        for j in 0..cp {
            if cycle >= j && cycle - j < t_len {
                reads_col += 1;
                sink.push(cycle, 0, j, EventKind::InjectCol { t: cycle - j });
            }
        }
        // One hop per cycle in both directions means the row element (i, t)
        // and the column element (t, j) co-arrive at PE (i, j) at cycle
        // t + i + j; the MAC fires on arrival.
        for i in 0..rp {
            for j in 0..cp {
                if cycle < i + j {
                    continue;
                }
                let t = cycle - i - j;
                if t >= t_len {
                    continue;
                }
                let slot = &mut fired[(i * cp + j) as usize];
                debug_assert_eq!(*slot, t, "MACs fire in temporal order");
                *slot += 1;
                sink.push(cycle, i, j, EventKind::Mac { t });
                // The bottom PE finishing its accumulation opens the column
                // drain: one result per cycle, bottom row first.
                if i == rp - 1 && *slot == t_len {
                    for q in 0..rp {
                        drain_schedule
                            .entry(cycle + 1 + q)
                            .or_default()
                            .push((rp - 1 - q, j));
                    }
                }
            }
        }
        if let Some(exits) = drain_schedule.remove(&cycle) {
            for (i, j) in exits {
                debug_assert_eq!(
                    fired[(i * cp + j) as usize],
                    t_len,
                    "PE must finish accumulating before draining"
                );
                drained += 1;
                sink.push(cycle, i, j, EventKind::Drain);
            }
        }
        cycle += 1;
    }
    debug_assert!(drain_schedule.is_empty());
    debug_assert!(fired.iter().all(|&f| f == t_len));

    FoldTrace {
        cycles: sink.cycles(),
        reads_row_operand: reads_row,
        reads_col_operand: reads_col,
        outputs_drained: drained,
        events: sink.records,
    }
}

/// Shared engine for WS and IS; the stationary operand rides the column
/// port, the streamed operand the row port, and results exit at the bottom.
fn stationary_operand_fold(spec: FoldSpec, log: bool) -> FoldTrace {
    let (rp, cp, t_len) = (spec.rows, spec.cols, spec.temporal);
    let mut sink = EventSink::new(log);
    let mut fired = vec![0u64; (rp * cp) as usize];
    let mut drain_schedule: BTreeMap<u64, Vec<(u64, u64)>> = BTreeMap::new();
    let mut reads_row = 0u64;
    let mut reads_col = 0u64;
    let mut drained = 0u64;
    let total_outputs = cp * t_len;
    let guard = 4 * (rp + cp + t_len) + 16;
    // Preload takes cycles 0..rows; the first streamed injection lands on
    // cycle rows - 1, overlapping the last preload cycle.
    let stream_base = rp - 1;

    let mut cycle = 0u64;
    while drained < total_outputs {
        assert!(cycle <= guard, "stationary-operand fold wedged at cycle {cycle}");
        // Descending preload: the row entering at cycle p settles in PE row
        // rows - 1 - p exactly when streaming reaches it.
        if cycle < rp {
            let dest_row = rp - 1 - cycle;
            for j in 0..cp {
                reads_col += 1;
                sink.push(cycle, 0, j, EventKind::Preload { dest_row });
            }
        }
        for i in 0..rp {
            if cycle >= stream_base + i && cycle - stream_base - i < t_len {
                reads_row += 1;
                sink.push(
                    cycle,
                    i,
                    0,
                    EventKind::InjectRow {
                        t: cycle - stream_base - i,
                    },
                );
            }
        }
        for i in 0..rp {
            for j in 0..cp {
                if cycle < stream_base + i + j {
                    continue;
                }
                let t = cycle - stream_base - i - j;
                if t >= t_len {
                    continue;
                }
                // All stationary rows are resident by cycle rows - 1.
                debug_assert!(cycle >= rp - 1, "MAC before preload finished");
                let slot = &mut fired[(i * cp + j) as usize];
                debug_assert_eq!(*slot, t);
                *slot += 1;
                sink.push(cycle, i, j, EventKind::Mac { t });
                // The partial sum exits one cycle after the bottom-row
                // accumulate; columns are independent pipelines.
                if i == rp - 1 {
                    drain_schedule.entry(cycle + 1).or_default().push((i, j));
                }
            }
        }
        if let Some(exits) = drain_schedule.remove(&cycle) {
            for (i, j) in exits {
                drained += 1;
                sink.push(cycle, i, j, EventKind::Drain);
            }
        }
        cycle += 1;
    }
    debug_assert!(drain_schedule.is_empty());
    debug_assert!(fired.iter().all(|&f| f == t_len));

    FoldTrace {
        cycles: sink.cycles(),
        reads_row_operand: reads_row,
        reads_col_operand: reads_col,
        outputs_drained: drained,
        events: sink.records,
    }
}
