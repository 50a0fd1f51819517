//! Events, traces and the line-oriented trace format.
//!
//! A trace file holds one event per line: `<thread> <op> <operand>`, where
//! `<op>` is one of `r`, `w`, `acq`, `rel`, `begin`, `end`. Fields are
//! separated by spaces or tabs, `#` starts a comment and blank lines are
//! ignored. Thread and operand tokens match `[A-Za-z0-9_.$-]+`.
//!
//! Names are interned on construction: threads, variables, locks and region
//! labels each get a dense id in first-appearance order. Variables and locks
//! live in separate namespaces, so `x` used as a variable and `x` used as a
//! lock are unrelated objects.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }

            #[inline]
            pub fn from_index(i: usize) -> Self {
                Self(u32::try_from(i).expect("id space exhausted"))
            }
        }
    };
}

id_type!(
    /// Dense thread index, assigned in first-appearance order.
    ThreadId
);
id_type!(
    /// Interned variable.
    VarId
);
id_type!(
    /// Interned lock.
    LockId
);
id_type!(
    /// Interned atomic-region label.
    LabelId
);

/// Operation kind without its operand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpKind {
    Read,
    Write,
    Acquire,
    Release,
    Begin,
    End,
}

impl OpKind {
    pub fn token(self) -> &'static str {
        match self {
            OpKind::Read => "r",
            OpKind::Write => "w",
            OpKind::Acquire => "acq",
            OpKind::Release => "rel",
            OpKind::Begin => "begin",
            OpKind::End => "end",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        Some(match token {
            "r" => OpKind::Read,
            "w" => OpKind::Write,
            "acq" => OpKind::Acquire,
            "rel" => OpKind::Release,
            "begin" => OpKind::Begin,
            "end" => OpKind::End,
            _ => return None,
        })
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// An operation with its interned operand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Read(VarId),
    Write(VarId),
    Acquire(LockId),
    Release(LockId),
    Begin(LabelId),
    End(LabelId),
}

impl Op {
    pub fn kind(self) -> OpKind {
        match self {
            Op::Read(_) => OpKind::Read,
            Op::Write(_) => OpKind::Write,
            Op::Acquire(_) => OpKind::Acquire,
            Op::Release(_) => OpKind::Release,
            Op::Begin(_) => OpKind::Begin,
            Op::End(_) => OpKind::End,
        }
    }

    pub fn is_boundary(self) -> bool {
        matches!(self, Op::Begin(_) | Op::End(_))
    }

    pub fn var(self) -> Option<VarId> {
        match self {
            Op::Read(x) | Op::Write(x) => Some(x),
            _ => None,
        }
    }

    pub fn lock(self) -> Option<LockId> {
        match self {
            Op::Acquire(m) | Op::Release(m) => Some(m),
            _ => None,
        }
    }
}

/// One trace entry. `index` is the 1-based position in the owning trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    pub index: usize,
    pub thread: ThreadId,
    pub op: Op,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Symbols {
    names: Vec<String>,
    lookup: BTreeMap<String, u32>,
}

impl Symbols {
    fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.lookup.get(name) {
            return id;
        }
        let id = u32::try_from(self.names.len()).expect("symbol table overflow");
        self.names.push(name.to_string());
        self.lookup.insert(name.to_string(), id);
        id
    }

    fn get(&self, name: &str) -> Option<u32> {
        self.lookup.get(name).copied()
    }

    fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }
}

/// An ordered sequence of events plus the symbol tables naming them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    events: Vec<Event>,
    threads: Symbols,
    vars: Symbols,
    locks: Symbols,
    labels: Symbols,
}

impl Trace {
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Event at a 1-based trace index.
    pub fn event(&self, index: usize) -> Option<&Event> {
        index.checked_sub(1).and_then(|i| self.events.get(i))
    }

    pub fn thread_count(&self) -> usize {
        self.threads.names.len()
    }

    pub fn var_count(&self) -> usize {
        self.vars.names.len()
    }

    pub fn lock_count(&self) -> usize {
        self.locks.names.len()
    }

    pub fn label_count(&self) -> usize {
        self.labels.names.len()
    }

    pub fn thread_name(&self, t: ThreadId) -> &str {
        self.threads.name(t.0)
    }

    pub fn var_name(&self, x: VarId) -> &str {
        self.vars.name(x.0)
    }

    pub fn lock_name(&self, m: LockId) -> &str {
        self.locks.name(m.0)
    }

    pub fn label_name(&self, l: LabelId) -> &str {
        self.labels.name(l.0)
    }

    pub fn thread_id(&self, name: &str) -> Option<ThreadId> {
        self.threads.get(name).map(ThreadId)
    }

    pub fn label_id(&self, name: &str) -> Option<LabelId> {
        self.labels.get(name).map(LabelId)
    }

    pub fn operand_name(&self, op: Op) -> &str {
        match op {
            Op::Read(x) | Op::Write(x) => self.var_name(x),
            Op::Acquire(m) | Op::Release(m) => self.lock_name(m),
            Op::Begin(l) | Op::End(l) => self.label_name(l),
        }
    }

    /// Copies the trace keeping only events matching `keep`. Symbol tables are
    /// shared with the original so ids stay valid; indices are renumbered.
    /// Returns the new trace and, per new event, its original 1-based index.
    pub fn retain_events(&self, mut keep: impl FnMut(&Event) -> bool) -> (Trace, Vec<usize>) {
        let mut events = Vec::with_capacity(self.events.len());
        let mut origin = Vec::with_capacity(self.events.len());
        for e in self.events.iter().filter(|e| keep(e)) {
            origin.push(e.index);
            events.push(Event {
                index: events.len() + 1,
                ..*e
            });
        }
        let trace = Trace {
            events,
            threads: self.threads.clone(),
            vars: self.vars.clone(),
            locks: self.locks.clone(),
            labels: self.labels.clone(),
        };
        (trace, origin)
    }
}

/// Rejected token or line while building a trace.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TokenError {
    #[error("empty {0} token")]
    Empty(&'static str),
    #[error("invalid character {ch:?} in {what} token {token:?}")]
    BadChar {
        what: &'static str,
        token: String,
        ch: char,
    },
}

fn check_token(what: &'static str, token: &str) -> Result<(), TokenError> {
    if token.is_empty() {
        return Err(TokenError::Empty(what));
    }
    if let Some(ch) = token
        .chars()
        .find(|c| !(c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '$' | '-')))
    {
        return Err(TokenError::BadChar {
            what,
            token: token.to_string(),
            ch,
        });
    }
    Ok(())
}

/// Incrementally builds a [`Trace`], interning names as they appear.
#[derive(Debug, Default)]
pub struct TraceBuilder {
    trace: Trace,
}

impl TraceBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an event, validating both tokens.
    pub fn push(&mut self, thread: &str, kind: OpKind, operand: &str) -> Result<&Event, TokenError> {
        check_token("thread", thread)?;
        check_token("operand", operand)?;
        let t = &mut self.trace;
        let thread = ThreadId(t.threads.intern(thread));
        let op = match kind {
            OpKind::Read => Op::Read(VarId(t.vars.intern(operand))),
            OpKind::Write => Op::Write(VarId(t.vars.intern(operand))),
            OpKind::Acquire => Op::Acquire(LockId(t.locks.intern(operand))),
            OpKind::Release => Op::Release(LockId(t.locks.intern(operand))),
            OpKind::Begin => Op::Begin(LabelId(t.labels.intern(operand))),
            OpKind::End => Op::End(LabelId(t.labels.intern(operand))),
        };
        let index = t.events.len() + 1;
        t.events.push(Event { index, thread, op });
        Ok(t.events.last().expect("just pushed"))
    }

    /// Appends an event; panics on an invalid token. Convenient for
    /// programmatically built traces whose names are known to be valid.
    pub fn event(&mut self, thread: &str, kind: OpKind, operand: &str) -> &mut Self {
        self.push(thread, kind, operand).expect("invalid token");
        self
    }

    pub fn len(&self) -> usize {
        self.trace.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trace.events.is_empty()
    }

    pub fn finish(self) -> Trace {
        self.trace
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}: expected `<thread> <op> <operand>`, found {fields} field(s)")]
    Malformed { line: usize, fields: usize },
    #[error("line {line}: unknown op token {token:?}")]
    UnknownOp { line: usize, token: String },
    #[error("line {line}: {source}")]
    Token {
        line: usize,
        #[source]
        source: TokenError,
    },
}

impl ParseError {
    pub fn line(&self) -> usize {
        match *self {
            ParseError::Malformed { line, .. }
            | ParseError::UnknownOp { line, .. }
            | ParseError::Token { line, .. } => line,
        }
    }
}

/// Parses the line-oriented trace format.
pub fn parse_trace(text: &str) -> Result<Trace, ParseError> {
    let mut builder = TraceBuilder::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut fields = content.split([' ', '\t']).filter(|f| !f.is_empty());
        let (thread, op, operand) = match (fields.next(), fields.next(), fields.next()) {
            (None, _, _) => continue,
            (Some(t), Some(o), Some(x)) => (t, o, x),
            (Some(_), o, x) => {
                let fields = 1 + o.is_some() as usize + x.is_some() as usize;
                return Err(ParseError::Malformed { line, fields });
            }
        };
        let extra = fields.count();
        if extra > 0 {
            return Err(ParseError::Malformed {
                line,
                fields: 3 + extra,
            });
        }
        let kind = OpKind::from_token(op).ok_or_else(|| ParseError::UnknownOp {
            line,
            token: op.to_string(),
        })?;
        builder
            .push(thread, kind, operand)
            .map_err(|source| ParseError::Token { line, source })?;
    }
    Ok(builder.finish())
}

/// Writes a trace in the canonical form: one `<thread> <op> <operand>` line
/// per event, single-space separated, newline terminated.
pub fn serialize_trace(trace: &Trace) -> String {
    let mut out = String::with_capacity(trace.len() * 12);
    for e in trace.events() {
        out.push_str(trace.thread_name(e.thread));
        out.push(' ');
        out.push_str(e.op.kind().token());
        out.push(' ');
        out.push_str(trace.operand_name(e.op));
        out.push('\n');
    }
    out
}

/// Structural rule broken by an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    /// `begin` while a region is already open on the thread.
    NestedBegin,
    /// `end` with no open region on the thread.
    EndWithoutBegin,
    /// `end` whose label differs from the open region's label.
    LabelMismatch,
    /// Region still open at end of trace. A warning only.
    UnclosedRegion,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::NestedBegin => "nested-begin",
            Rule::EndWithoutBegin => "end-without-begin",
            Rule::LabelMismatch => "label-mismatch",
            Rule::UnclosedRegion => "unclosed-region",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StructuralIssue {
    pub index: usize,
    pub rule: Rule,
}

impl fmt::Display for StructuralIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at index {}", self.rule, self.index)
    }
}

/// Open region per thread after scanning the trace, plus every rule broken
/// on the way. Shared by [`validate`] and [`unclosed_regions`].
fn scan(trace: &Trace) -> (Vec<Option<(LabelId, usize)>>, Vec<StructuralIssue>) {
    let mut open: Vec<Option<(LabelId, usize)>> = alloc::vec![None; trace.thread_count()];
    let mut issues = Vec::new();
    for e in trace.events() {
        let slot = &mut open[e.thread.index()];
        match e.op {
            Op::Begin(l) => {
                if slot.is_some() {
                    issues.push(StructuralIssue {
                        index: e.index,
                        rule: Rule::NestedBegin,
                    });
                } else {
                    *slot = Some((l, e.index));
                }
            }
            Op::End(l) => match *slot {
                None => issues.push(StructuralIssue {
                    index: e.index,
                    rule: Rule::EndWithoutBegin,
                }),
                Some((open_label, _)) if open_label != l => issues.push(StructuralIssue {
                    index: e.index,
                    rule: Rule::LabelMismatch,
                }),
                Some(_) => *slot = None,
            },
            _ => {}
        }
    }
    (open, issues)
}

/// Returns every structural error, in trace order. Empty iff the trace is
/// well formed. Unclosed regions are not errors; see [`unclosed_regions`].
pub fn validate(trace: &Trace) -> Vec<StructuralIssue> {
    scan(trace).1
}

/// Regions still open at end of trace, reported at their `begin` index.
pub fn unclosed_regions(trace: &Trace) -> Vec<StructuralIssue> {
    let mut out: Vec<StructuralIssue> = scan(trace)
        .0
        .into_iter()
        .flatten()
        .map(|(_, index)| StructuralIssue {
            index,
            rule: Rule::UnclosedRegion,
        })
        .collect();
    out.sort_by_key(|i| i.index);
    out
}
