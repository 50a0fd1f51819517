//! Brute-force ground truth for small traces.
//!
//! Everything here is computed from definitions, independently of the
//! engines: the event happens-before relation is the transitive closure of
//! "earlier and conflicting", transactions are related when any of their
//! events are, and serializability of a single transaction is decided by
//! exhaustively swapping adjacent commuting events.
//!
//! Open transactions at the end of the trace take part in every check.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec::Vec;

use thiserror::Error;

use crate::trace::{validate, Event, LabelId, Op, StructuralIssue, ThreadId, Trace};

/// Largest trace accepted by the closure-based checks.
pub const MAX_CLOSURE_EVENTS: usize = 2048;
/// Largest trace accepted by the swap search.
pub const MAX_SWAP_EVENTS: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("trace has {events} events; the limit for this check is {limit}")]
    TooLarge { events: usize, limit: usize },
    #[error("structural error: {0}")]
    Structural(StructuralIssue),
    #[error("no transaction with ordinal {ordinal} on thread {thread}")]
    NoSuchTransaction { thread: u32, ordinal: u64 },
}

/// Whether two events conflict: same variable with at least one write, same
/// lock, or same thread. Region boundaries touch no variable or lock.
pub fn conflicts(a: &Event, b: &Event) -> bool {
    if a.thread == b.thread {
        return true;
    }
    match (a.op, b.op) {
        (Op::Read(x), Op::Write(y)) | (Op::Write(x), Op::Read(y)) | (Op::Write(x), Op::Write(y)) => x == y,
        (Op::Acquire(m) | Op::Release(m), Op::Acquire(n) | Op::Release(n)) => m == n,
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(n: usize) -> Self {
        Bits(alloc::vec![0; n.div_ceil(64)])
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    fn union(&mut self, other: &Bits) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a |= b;
        }
    }

    fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(w, &word)| {
            let mut word = word;
            core::iter::from_fn(move || {
                if word == 0 {
                    return None;
                }
                let bit = word.trailing_zeros() as usize;
                word &= word - 1;
                Some(w * 64 + bit)
            })
        })
    }
}

/// Event happens-before, transitively closed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HbClosure {
    n: usize,
    /// `before[j]` holds every `i` (0-based) with `e_i -> e_j`.
    before: Vec<Bits>,
}

impl HbClosure {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `e_i -> e_j` for 1-based trace indices. Irreflexive.
    pub fn reaches(&self, i: usize, j: usize) -> bool {
        i >= 1 && i < j && j <= self.n && self.before[j - 1].get(i - 1)
    }

    /// 1-based indices of every event that happens before `e_j`.
    pub fn predecessors(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        self.before[j - 1].ones().map(|i| i + 1)
    }
}

fn guard(trace: &Trace, limit: usize) -> Result<(), OracleError> {
    if trace.len() > limit {
        return Err(OracleError::TooLarge {
            events: trace.len(),
            limit,
        });
    }
    match validate(trace).first() {
        Some(&issue) => Err(OracleError::Structural(issue)),
        None => Ok(()),
    }
}

pub fn event_closure(trace: &Trace) -> Result<HbClosure, OracleError> {
    guard(trace, MAX_CLOSURE_EVENTS)?;
    Ok(closure_unchecked(trace))
}

fn closure_unchecked(trace: &Trace) -> HbClosure {
    let n = trace.len();
    let events = trace.events();
    let mut before: Vec<Bits> = Vec::with_capacity(n);
    for j in 0..n {
        let mut row = Bits::new(n);
        for i in 0..j {
            if !row.get(i) && conflicts(&events[i], &events[j]) {
                row.set(i);
                row.union(&before[i]);
            }
        }
        before.push(row);
    }
    HbClosure { n, before }
}

/// A transaction as the oracle sees it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxInfo {
    pub thread: ThreadId,
    /// 1-based position among the thread's transactions, unary ones included.
    pub ordinal: u64,
    /// `None` for a unary transaction.
    pub label: Option<LabelId>,
    /// 1-based indices of the events, `begin` (or the single event) first.
    pub events: Vec<usize>,
    /// Whether the transaction was still running at the end of the trace.
    pub open: bool,
}

impl TxInfo {
    pub fn begin(&self) -> usize {
        self.events[0]
    }

    pub fn key(&self) -> (ThreadId, u64) {
        (self.thread, self.ordinal)
    }
}

/// Splits a structurally valid trace into transactions, in order of their
/// first event.
pub fn transactions(trace: &Trace) -> Vec<TxInfo> {
    let mut out: Vec<TxInfo> = Vec::new();
    let mut open: Vec<Option<usize>> = alloc::vec![None; trace.thread_count()];
    let mut count: Vec<u64> = alloc::vec![0; trace.thread_count()];
    for e in trace.events() {
        let t = e.thread.index();
        match (e.op, open[t]) {
            (_, Some(k)) => {
                out[k].events.push(e.index);
                if let Op::End(_) = e.op {
                    out[k].open = false;
                    open[t] = None;
                }
            }
            (op, None) => {
                count[t] += 1;
                let label = match op {
                    Op::Begin(l) => Some(l),
                    _ => None,
                };
                if label.is_some() {
                    open[t] = Some(out.len());
                }
                out.push(TxInfo {
                    thread: e.thread,
                    ordinal: count[t],
                    label,
                    events: alloc::vec![e.index],
                    open: label.is_some(),
                });
            }
        }
    }
    out
}

/// Transactional happens-before over [`transactions`], transitively closed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThbClosure {
    pub transactions: Vec<TxInfo>,
    reach: Vec<Bits>,
}

impl ThbClosure {
    /// `tx_a ~> tx_b` by position in `transactions`.
    pub fn reaches(&self, a: usize, b: usize) -> bool {
        self.reach[a].get(b)
    }

    pub fn position(&self, thread: ThreadId, ordinal: u64) -> Option<usize> {
        self.transactions
            .iter()
            .position(|tx| tx.thread == thread && tx.ordinal == ordinal)
    }

    /// A pair of transactions on different threads reaching each other.
    pub fn cross_thread_cycle(&self) -> Option<(usize, usize)> {
        let txs = &self.transactions;
        for a in 0..txs.len() {
            for b in self.reach[a].ones() {
                if b > a && txs[a].thread != txs[b].thread && self.reaches(b, a) {
                    return Some((a, b));
                }
            }
        }
        None
    }
}

pub fn thb_closure(trace: &Trace) -> Result<ThbClosure, OracleError> {
    guard(trace, MAX_CLOSURE_EVENTS)?;
    let hb = closure_unchecked(trace);
    Ok(thb_from(trace, &hb))
}

fn thb_from(trace: &Trace, hb: &HbClosure) -> ThbClosure {
    let txs = transactions(trace);
    let m = txs.len();
    let mut owner = alloc::vec![0usize; trace.len()];
    for (k, tx) in txs.iter().enumerate() {
        for &i in &tx.events {
            owner[i - 1] = k;
        }
    }
    let mut reach: Vec<Bits> = (0..m).map(|_| Bits::new(m)).collect();
    for j in 0..trace.len() {
        for i in hb.before[j].ones() {
            if owner[i] != owner[j] {
                reach[owner[i]].set(owner[j]);
            }
        }
    }
    // program order between consecutive transactions of a thread
    let mut last: BTreeMap<ThreadId, usize> = BTreeMap::new();
    for (k, tx) in txs.iter().enumerate() {
        if let Some(prev) = last.insert(tx.thread, k) {
            reach[prev].set(k);
        }
    }
    // Transactions are in order of first event and every edge goes from an
    // earlier event to a later one, but a long transaction can reach one that
    // started before it ended, so close with a full Warshall pass.
    for k in 0..m {
        let via = reach[k].clone();
        for row in reach.iter_mut() {
            if row.get(k) {
                row.union(&via);
            }
        }
    }
    ThbClosure {
        transactions: txs,
        reach,
    }
}

/// Ground-truth verdicts for one trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleVerdict {
    pub nonserializable: bool,
    /// Unserializable transactions as `(thread, ordinal)`.
    pub violations: BTreeSet<(ThreadId, u64)>,
    pub transactions: Vec<TxInfo>,
}

impl OracleVerdict {
    pub fn label_of(&self, key: (ThreadId, u64)) -> Option<LabelId> {
        self.transactions
            .iter()
            .find(|tx| tx.key() == key)
            .and_then(|tx| tx.label)
    }
}

/// Both verdicts from a single closure computation.
pub fn check(trace: &Trace) -> Result<OracleVerdict, OracleError> {
    guard(trace, MAX_CLOSURE_EVENTS)?;
    let hb = closure_unchecked(trace);
    let thb = thb_from(trace, &hb);
    let violations = violations_from(trace, &hb, &thb.transactions);
    Ok(OracleVerdict {
        nonserializable: thb.cross_thread_cycle().is_some(),
        violations,
        transactions: thb.transactions,
    })
}

/// A transaction is unserializable iff some `e_m` in it and some `e_x` on
/// another thread satisfy `tx.begin -> e_x -> e_m`.
pub fn oracle_violations(trace: &Trace) -> Result<BTreeSet<(ThreadId, u64)>, OracleError> {
    guard(trace, MAX_CLOSURE_EVENTS)?;
    let hb = closure_unchecked(trace);
    Ok(violations_from(trace, &hb, &transactions(trace)))
}

fn violations_from(trace: &Trace, hb: &HbClosure, txs: &[TxInfo]) -> BTreeSet<(ThreadId, u64)> {
    let events = trace.events();
    txs.iter()
        .filter(|tx| {
            let begin = tx.begin();
            tx.events.iter().any(|&m| {
                hb.predecessors(m)
                    .any(|x| events[x - 1].thread != tx.thread && hb.reaches(begin, x))
            })
        })
        .map(TxInfo::key)
        .collect()
}

/// Two transactions of different threads reach each other.
pub fn oracle_nonserializable(trace: &Trace) -> Result<bool, OracleError> {
    Ok(thb_closure(trace)?.cross_thread_cycle().is_some())
}

/// Whether transaction `(thread, ordinal)` runs without interleaving in some
/// trace reachable by swapping adjacent non-conflicting events.
pub fn swap_serializability(trace: &Trace, thread: ThreadId, ordinal: u64) -> Result<bool, OracleError> {
    let all = swap_serializable_all(trace)?;
    all.get(&(thread, ordinal))
        .copied()
        .ok_or(OracleError::NoSuchTransaction {
            thread: thread.0,
            ordinal,
        })
}

/// [`swap_serializability`] for every transaction, from one breadth-first
/// search over the equivalence class of the trace.
pub fn swap_serializable_all(trace: &Trace) -> Result<BTreeMap<(ThreadId, u64), bool>, OracleError> {
    guard(trace, MAX_SWAP_EVENTS)?;
    let n = trace.len();
    let events = trace.events();
    let txs = transactions(trace);

    let mut conflict = [0u16; MAX_SWAP_EVENTS];
    for i in 0..n {
        for j in 0..n {
            if i != j && conflicts(&events[i], &events[j]) {
                conflict[i] |= 1 << j;
            }
        }
    }
    // A state is a permutation packed four bits per slot: slot k holds the
    // 0-based index of the event at position k.
    let get = |s: u64, k: usize| ((s >> (4 * k)) & 0xf) as usize;
    let start = (0..n).fold(0u64, |s, k| s | (k as u64) << (4 * k));

    let mut result: BTreeMap<(ThreadId, u64), bool> = BTreeMap::new();
    let mut pending: Vec<(usize, u16)> = Vec::new();
    for (k, tx) in txs.iter().enumerate() {
        let mask = tx.events.iter().fold(0u16, |m, &i| m | 1 << (i - 1));
        result.insert(tx.key(), tx.events.len() == 1);
        if tx.events.len() > 1 {
            pending.push((k, mask));
        }
    }

    let mut seen: hashbrown::HashSet<u64> = hashbrown::HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(start);
    queue.push_back(start);
    while let Some(s) = queue.pop_front() {
        if pending.is_empty() {
            break;
        }
        pending.retain(|&(k, mask)| {
            let len = txs[k].events.len();
            let first = (0..n)
                .find(|&p| mask >> get(s, p) & 1 == 1)
                .expect("event present");
            let contiguous = (first..first + len).all(|p| p < n && mask >> get(s, p) & 1 == 1);
            if contiguous {
                result.insert(txs[k].key(), true);
            }
            !contiguous
        });
        for k in 0..n.saturating_sub(1) {
            let (a, b) = (get(s, k), get(s, k + 1));
            if conflict[a] >> b & 1 == 1 {
                continue;
            }
            let cleared = s & !(0xffu64 << (4 * k));
            let next = cleared | (b as u64) << (4 * k) | (a as u64) << (4 * (k + 1));
            if seen.insert(next) {
                queue.push_back(next);
            }
        }
    }
    Ok(result)
}
