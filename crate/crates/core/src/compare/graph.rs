//! Transaction-graph checkers.
//!
//! Nodes are transactions. A cross-thread edge is added wherever the
//! region-tracking engine would join clocks (last write, last reads, last
//! release), and a program-order edge links consecutive transactions of a
//! thread, from the end of one to the begin of the next. Every edge carries
//! the trace indices of its source event (head) and sink event (tail).
//!
//! Finished nodes that no running transaction can reach are dropped after
//! every transaction end: edges only ever enter running transactions, so such
//! nodes can never lie on a future cycle.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use super::{drive, TxEngine};
use crate::checker::AnalysisError;
use crate::report::{EngineKind, GraphStats, Report, Stats, Violation};
use crate::trace::{LabelId, Op, ThreadId, Trace};

type NodeId = u64;

#[derive(Debug, Clone, Copy)]
struct Edge {
    to: NodeId,
    head: usize,
    tail: usize,
}

#[derive(Debug)]
struct Node {
    thread: ThreadId,
    ordinal: u64,
    label: Option<LabelId>,
    out: Vec<Edge>,
}

#[derive(Debug, Clone, Copy)]
struct Access {
    node: NodeId,
    thread: usize,
    index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Policy {
    /// One edge per ordered node pair; blame increasing cycles only.
    KeepFirst,
    /// Every edge; blame the transaction closing any cycle.
    Exact,
}

struct GraphEngine {
    policy: Policy,
    nodes: BTreeMap<NodeId, Node>,
    next_id: NodeId,
    current: Vec<Option<NodeId>>,
    previous: Vec<Option<(NodeId, usize)>>,
    ordinals: Vec<u64>,
    writes: Vec<Option<Access>>,
    reads: Vec<Vec<Option<Access>>>,
    releases: Vec<Option<Access>>,
    blamed: BTreeSet<(NodeId, NodeId)>,
    stats: GraphStats,
    report: Report,
}

impl GraphEngine {
    fn new(policy: Policy, kind: EngineKind, threads: usize) -> Self {
        GraphEngine {
            policy,
            nodes: BTreeMap::new(),
            next_id: 0,
            current: alloc::vec![None; threads],
            previous: alloc::vec![None; threads],
            ordinals: alloc::vec![0; threads],
            writes: Vec::new(),
            reads: Vec::new(),
            releases: Vec::new(),
            blamed: BTreeSet::new(),
            stats: GraphStats::default(),
            report: Report::new(kind, Stats::Graph(GraphStats::default())),
        }
    }

    fn finish(mut self) -> Report {
        self.report.stats = Stats::Graph(self.stats);
        self.report
    }

    fn running(&self, t: usize) -> NodeId {
        self.current[t].expect("access outside a transaction")
    }

    fn add_cross_edge(&mut self, src: Access, t: usize, index: usize) {
        let cur = self.running(t);
        if src.node == cur || src.thread == t {
            return;
        }
        let Some(node) = self.nodes.get_mut(&src.node) else {
            return;
        };
        let edge = Edge {
            to: cur,
            head: src.index,
            tail: index,
        };
        match self.policy {
            Policy::KeepFirst => {
                if node.out.iter().any(|e| e.to == cur) {
                    return;
                }
                node.out.push(edge);
                self.stats.edges += 1;
                self.velodrome_cycle(cur, src, index);
            }
            Policy::Exact => {
                node.out.push(edge);
                self.stats.edges += 1;
                self.naive_cycle(cur, src, index);
            }
        }
    }

    /// Depth-first search from `cur` for `src.node`; on success checks
    /// whether the cycle closed by the new edge is increasing.
    fn velodrome_cycle(&mut self, cur: NodeId, src: Access, index: usize) {
        self.stats.cycle_checks += 1;
        let Some(path) = self.find_path(cur, src.node) else {
            return;
        };
        self.report.mark_non_serializable(index);
        // `path[i]` enters the (i+1)-th node; that node is left by
        // `path[i+1]`, or by the new edge for the last node.
        let increasing = path.iter().enumerate().all(|(i, entry)| {
            let exit = path.get(i + 1).map_or(src.index, |e| e.head);
            entry.tail <= exit
        });
        if increasing {
            self.blame(cur, src, index);
        }
    }

    fn naive_cycle(&mut self, cur: NodeId, src: Access, index: usize) {
        self.stats.cycle_checks += 1;
        if self.find_path(cur, src.node).is_some() {
            self.report.mark_non_serializable(index);
            self.blame(cur, src, index);
        }
    }

    fn blame(&mut self, cur: NodeId, src: Access, index: usize) {
        if !self.blamed.insert((cur, src.node)) {
            return;
        }
        let node = &self.nodes[&cur];
        self.report.violations.push(Violation {
            event: index,
            thread: node.thread,
            label: node.label,
            ordinal: node.ordinal,
            source_thread: ThreadId::from_index(src.thread),
        });
    }

    /// Edges of the first path found depth-first, following out-edges in
    /// insertion order.
    fn find_path(&self, from: NodeId, to: NodeId) -> Option<Vec<Edge>> {
        let mut visited = BTreeSet::from([from]);
        let mut stack: Vec<(NodeId, usize)> = alloc::vec![(from, 0)];
        let mut path: Vec<Edge> = Vec::new();
        while let Some(top) = stack.last_mut() {
            let (node, next) = *top;
            let out = &self.nodes[&node].out;
            let Some(&edge) = out.get(next) else {
                stack.pop();
                path.pop();
                continue;
            };
            top.1 += 1;
            if !self.nodes.contains_key(&edge.to) || !visited.insert(edge.to) {
                continue;
            }
            path.push(edge);
            if edge.to == to {
                return Some(path);
            }
            stack.push((edge.to, 0));
        }
        None
    }

    fn collect(&mut self) {
        let mut live: BTreeSet<NodeId> = self.current.iter().flatten().copied().collect();
        let mut work: Vec<NodeId> = live.iter().copied().collect();
        while let Some(n) = work.pop() {
            for e in &self.nodes[&n].out {
                if self.nodes.contains_key(&e.to) && live.insert(e.to) {
                    work.push(e.to);
                }
            }
        }
        self.nodes.retain(|id, _| live.contains(id));
    }
}

impl TxEngine for GraphEngine {
    fn begin(&mut self, t: usize, label: Option<LabelId>, index: usize) {
        self.ordinals[t] += 1;
        let id = self.next_id;
        self.next_id += 1;
        self.nodes.insert(
            id,
            Node {
                thread: ThreadId::from_index(t),
                ordinal: self.ordinals[t],
                label,
                out: Vec::new(),
            },
        );
        self.current[t] = Some(id);
        self.stats.transactions += 1;
        self.stats.max_live_nodes = self.stats.max_live_nodes.max(self.nodes.len() as u64);
        if let Some((prev, end)) = self.previous[t] {
            if let Some(node) = self.nodes.get_mut(&prev) {
                node.out.push(Edge {
                    to: id,
                    head: end,
                    tail: index,
                });
                self.stats.edges += 1;
            }
        }
    }

    fn end(&mut self, t: usize, index: usize) {
        let id = self.current[t].take().expect("end outside a transaction");
        self.previous[t] = Some((id, index));
        self.collect();
    }

    fn access(&mut self, t: usize, op: Op, index: usize) {
        let here = Access {
            node: self.running(t),
            thread: t,
            index,
        };
        match op {
            Op::Read(x) => {
                let x = x.index();
                if let Some(Some(w)) = self.writes.get(x).copied() {
                    self.add_cross_edge(w, t, index);
                }
                if x >= self.reads.len() {
                    self.reads.resize_with(x + 1, Vec::new);
                }
                let readers = &mut self.reads[x];
                if t >= readers.len() {
                    readers.resize(t + 1, None);
                }
                readers[t] = Some(here);
            }
            Op::Write(x) => {
                let x = x.index();
                let readers: Vec<Access> = self
                    .reads
                    .get(x)
                    .map_or(Vec::new(), |r| r.iter().flatten().copied().collect());
                if readers.is_empty() {
                    if let Some(Some(w)) = self.writes.get(x).copied() {
                        self.add_cross_edge(w, t, index);
                    }
                } else {
                    for r in readers {
                        self.add_cross_edge(r, t, index);
                    }
                }
                if x >= self.writes.len() {
                    self.writes.resize(x + 1, None);
                }
                self.writes[x] = Some(here);
                if let Some(r) = self.reads.get_mut(x) {
                    r.iter_mut().for_each(|slot| *slot = None);
                }
            }
            Op::Acquire(m) => {
                if let Some(Some(rel)) = self.releases.get(m.index()).copied() {
                    self.add_cross_edge(rel, t, index);
                }
            }
            Op::Release(m) => {
                let m = m.index();
                if m >= self.releases.len() {
                    self.releases.resize(m + 1, None);
                }
                self.releases[m] = Some(here);
            }
            Op::Begin(_) | Op::End(_) => unreachable!("boundaries are not accesses"),
        }
    }
}

/// One edge per ordered node pair, increasing-cycle blame.
pub fn velodrome_check(trace: &Trace) -> Result<Report, AnalysisError> {
    let mut g = GraphEngine::new(Policy::KeepFirst, EngineKind::Velodrome, trace.thread_count());
    drive(trace, &mut g)?;
    Ok(g.finish())
}

/// Exact graph; blames the transaction that completes any cycle.
pub fn naive_blame_check(trace: &Trace) -> Result<Report, AnalysisError> {
    let mut g = GraphEngine::new(Policy::Exact, EngineKind::NaiveBlame, trace.thread_count());
    drive(trace, &mut g)?;
    Ok(g.finish())
}
