//! Forward reachability in the coordinate-dependency digraph.
//!
//! Row `n` of every power `A^k` is supported inside the set of indices
//! reachable from `n` along edges `i → j` (column `j` appears in row `i`).
//! The generation criterion holds structurally when every such set is
//! finite. For the periodic regime the digraph folds onto a finite quotient
//! over residues mod `p`, with edge weight equal to the column offset; an
//! infinite reachable set exists iff that quotient has a cycle of positive
//! total weight.
//!
//! Certificates go both ways: a closed finite set `S` (every row indexed by
//! `S` is supported in `S`), or a concrete stem and cycle whose repetition
//! climbs to arbitrarily large column indices.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::operator::RowFiniteOperator;

/// A node of the quotient graph: an exceptional row (`< n0`) or a residue
/// class of the periodic regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Node {
    Row(usize),
    Residue(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotientEdge {
    pub from: Node,
    pub to: Node,
    /// Column offset `target - source`.
    pub weight: i64,
    /// Absolute target column, for edges leaving an exceptional row.
    pub target_index: Option<usize>,
}

/// Finite presentation of the dependency digraph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuotientGraph {
    n0: usize,
    period: usize,
    edges: Vec<QuotientEdge>,
    outgoing: Vec<Vec<usize>>,
}

impl QuotientGraph {
    pub fn new(op: &RowFiniteOperator) -> Self {
        let n0 = op.n0();
        let period = op.period();
        let node_of_column = |col: usize| {
            if col < n0 {
                Node::Row(col)
            } else {
                Node::Residue(col % period)
            }
        };
        let mut edges = Vec::new();
        for (&row, entries) in op.exceptional_rows() {
            for col in entries.support() {
                edges.push(QuotientEdge {
                    from: Node::Row(row),
                    to: node_of_column(col),
                    weight: col as i64 - row as i64,
                    target_index: Some(col),
                });
            }
        }
        for (r, entries) in op.pattern().iter().enumerate() {
            for (d, _) in entries {
                edges.push(QuotientEdge {
                    from: Node::Residue(r),
                    to: Node::Residue((r as i64 + d).rem_euclid(period as i64) as usize),
                    weight: *d,
                    target_index: None,
                });
            }
        }
        let mut graph = Self {
            n0,
            period,
            edges,
            outgoing: Vec::new(),
        };
        let mut outgoing = vec![Vec::new(); graph.node_count()];
        for (i, e) in graph.edges.iter().enumerate() {
            outgoing[graph.index(e.from)].push(i);
        }
        graph.outgoing = outgoing;
        graph
    }

    pub fn node_count(&self) -> usize {
        self.n0 - 1 + self.period
    }

    pub fn nodes(&self) -> Vec<Node> {
        (1..self.n0)
            .map(Node::Row)
            .chain((0..self.period).map(Node::Residue))
            .collect()
    }

    pub fn edges(&self) -> &[QuotientEdge] {
        &self.edges
    }

    fn index(&self, node: Node) -> usize {
        match node {
            Node::Row(i) => i - 1,
            Node::Residue(r) => self.n0 - 1 + r,
        }
    }

    fn reachable_from(&self, from: Node) -> Vec<bool> {
        let mut seen = vec![false; self.node_count()];
        let mut queue = VecDeque::from([self.index(from)]);
        seen[self.index(from)] = true;
        while let Some(u) = queue.pop_front() {
            for &e in &self.outgoing[u] {
                let v = self.index(self.edges[e].to);
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    /// Shortest (fewest edges) path from `from` to any node in `targets`.
    fn path_to_any(&self, from: Node, targets: &BTreeSet<Node>) -> Option<Vec<QuotientEdge>> {
        let start = self.index(from);
        let mut pred: Vec<Option<usize>> = vec![None; self.node_count()];
        let mut seen = vec![false; self.node_count()];
        seen[start] = true;
        let mut queue = VecDeque::from([from]);
        while let Some(node) = queue.pop_front() {
            if targets.contains(&node) {
                let mut path = Vec::new();
                let mut cur = self.index(node);
                while let Some(e) = pred[cur] {
                    path.push(self.edges[e].clone());
                    cur = self.index(self.edges[e].from);
                }
                path.reverse();
                return Some(path);
            }
            for &e in &self.outgoing[self.index(node)] {
                let to = self.edges[e].to;
                let v = self.index(to);
                if !seen[v] {
                    seen[v] = true;
                    pred[v] = Some(e);
                    queue.push_back(to);
                }
            }
        }
        None
    }
}

pub fn quotient_graph(op: &RowFiniteOperator) -> QuotientGraph {
    QuotientGraph::new(op)
}

/// A reachable cycle of strictly positive total weight, if one exists.
///
/// Bellman–Ford on negated weights over the subgraph reachable from `from`;
/// a relaxation surviving `|V| - 1` rounds exposes a negative (i.e. positive
/// in the original weights) cycle, which is then read off the predecessor
/// chain.
pub fn has_positive_cycle(g: &QuotientGraph, from: Node) -> Option<Vec<QuotientEdge>> {
    let reachable = g.reachable_from(from);
    let count = reachable.iter().filter(|r| **r).count();
    let mut dist: Vec<Option<i128>> = vec![None; g.node_count()];
    let mut pred: Vec<Option<usize>> = vec![None; g.node_count()];
    dist[g.index(from)] = Some(0);

    let relax = |dist: &mut Vec<Option<i128>>, pred: &mut Vec<Option<usize>>| {
        let mut changed = None;
        for (i, e) in g.edges.iter().enumerate() {
            let u = g.index(e.from);
            if !reachable[u] {
                continue;
            }
            let Some(du) = dist[u] else { continue };
            let v = g.index(e.to);
            let cand = du - e.weight as i128;
            if dist[v].is_none_or(|dv| cand < dv) {
                dist[v] = Some(cand);
                pred[v] = Some(i);
                changed = Some(v);
            }
        }
        changed
    };

    for _ in 1..count {
        relax(&mut dist, &mut pred)?;
    }
    let mut node = relax(&mut dist, &mut pred)?;
    // step back far enough to land on the cycle
    for _ in 0..g.node_count() {
        node = g.index(g.edges[pred[node].expect("relaxed node has predecessor")].from);
    }
    let mut cycle = Vec::new();
    let mut cur = node;
    loop {
        let e = pred[cur].expect("cycle node has predecessor");
        cycle.push(g.edges[e].clone());
        cur = g.index(g.edges[e].from);
        if cur == node {
            break;
        }
    }
    cycle.reverse();
    debug_assert!(cycle.iter().map(|e| e.weight).sum::<i64>() > 0);
    Some(cycle)
}

/// One step `from → to` at concrete indices; `weight = to - from`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateEdge {
    pub from: usize,
    pub to: usize,
    pub weight: i64,
}

/// Witness of an infinite reachable set: a path from `start` to the cycle
/// start, then a cycle of positive weight that can be repeated forever
/// because every row it passes through lies in the periodic regime.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub start: usize,
    pub stem: Vec<CertificateEdge>,
    pub cycle: Vec<CertificateEdge>,
}

impl Certificate {
    pub fn cycle_weight(&self) -> i64 {
        self.cycle.iter().map(|e| e.weight).sum()
    }

    pub fn cycle_start(&self) -> usize {
        self.cycle.first().map(|e| e.from).unwrap_or(self.start)
    }

    /// Index sequence of `start`, the stem, then `loops` traversals of the
    /// cycle (each shifted by the cycle weight).
    pub fn walk(&self, loops: usize) -> Vec<usize> {
        let mut path = vec![self.start];
        path.extend(self.stem.iter().map(|e| e.to));
        let w = self.cycle_weight();
        for l in 0..loops {
            let shift = l as i64 * w;
            path.extend(self.cycle.iter().map(|e| (e.to as i64 + shift) as usize));
        }
        path
    }

    /// Checks the chain is connected, the cycle closes up to its weight,
    /// every step (for the first `loops` traversals) is a nonzero matrix
    /// entry, and the pumped index reaches at least `start + loops · weight`.
    pub fn verify(&self, op: &RowFiniteOperator, loops: usize) -> bool {
        if self.cycle.is_empty() || self.cycle_weight() < 1 {
            return false;
        }
        let mut at = self.start;
        for e in &self.stem {
            if e.from != at || e.to as i64 - e.from as i64 != e.weight {
                return false;
            }
            at = e.to;
        }
        for e in &self.cycle {
            if e.from != at || e.to as i64 - e.from as i64 != e.weight {
                return false;
            }
            at = e.to;
        }
        if at as i64 != self.cycle_start() as i64 + self.cycle_weight() {
            return false;
        }
        let walk = self.walk(loops.max(1));
        if !walk.windows(2).all(|w| op.row(w[0]).get(w[1]).is_some()) {
            return false;
        }
        let last = *walk.last().expect("walk is non-empty");
        last as i64 >= self.start as i64 + loops.max(1) as i64 * self.cycle_weight()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReachabilityResult {
    /// `set` is closed under taking row supports and contains the start row.
    Finite {
        set: BTreeSet<usize>,
        bound: usize,
    },
    Infinite(Certificate),
}

impl ReachabilityResult {
    pub fn is_finite(&self) -> bool {
        matches!(self, Self::Finite { .. })
    }
}

#[derive(Debug, Clone)]
struct EscapePlan {
    approach: Vec<i64>,
    cycle: Vec<i64>,
}

/// Outcome of a multi-source exploration.
pub(crate) enum Exploration {
    Closed(BTreeSet<usize>),
    Escapes {
        source: usize,
        certificate: Certificate,
    },
}

/// Per-operator analysis shared by all reachability queries.
pub struct DependencyAnalyzer<'a> {
    op: &'a RowFiniteOperator,
    graph: QuotientGraph,
    escape: Vec<Option<EscapePlan>>,
}

impl<'a> DependencyAnalyzer<'a> {
    pub fn new(op: &'a RowFiniteOperator) -> Self {
        let graph = QuotientGraph::new(op);
        let escape = (0..op.period())
            .map(|r| {
                let from = Node::Residue(r);
                let cycle = has_positive_cycle(&graph, from)?;
                let on_cycle: BTreeSet<Node> = cycle.iter().map(|e| e.from).collect();
                let approach = graph
                    .path_to_any(from, &on_cycle)
                    .expect("cycle was reached from this node");
                let entry = approach.last().map(|e| e.to).unwrap_or(from);
                let pos = cycle
                    .iter()
                    .position(|e| e.from == entry)
                    .expect("approach ends on the cycle");
                let cycle = cycle[pos..]
                    .iter()
                    .chain(&cycle[..pos])
                    .map(|e| e.weight)
                    .collect();
                Some(EscapePlan {
                    approach: approach.iter().map(|e| e.weight).collect(),
                    cycle,
                })
            })
            .collect();
        Self { op, graph, escape }
    }

    pub fn graph(&self) -> &QuotientGraph {
        &self.graph
    }

    /// True when the periodic quotient carries a positive cycle.
    pub fn has_escape(&self) -> bool {
        self.escape.iter().any(Option::is_some)
    }

    /// Follows `plan` from row `j` at concrete indices. Fails if a step would
    /// leave the periodic regime or drop a column below 1, or if the cycle
    /// would start below `origin`.
    fn realize(
        &self,
        plan: &EscapePlan,
        j: usize,
        origin: usize,
    ) -> Option<(Vec<CertificateEdge>, Vec<CertificateEdge>)> {
        let n0 = self.op.n0() as i64;
        let step = |idx: &mut i64, d: i64| -> Option<CertificateEdge> {
            if *idx < n0 || *idx + d < 1 {
                return None;
            }
            let e = CertificateEdge {
                from: *idx as usize,
                to: (*idx + d) as usize,
                weight: d,
            };
            *idx += d;
            Some(e)
        };
        let mut idx = j as i64;
        let approach = plan
            .approach
            .iter()
            .map(|&d| step(&mut idx, d))
            .collect::<Option<Vec<_>>>()?;
        if idx < origin as i64 {
            return None;
        }
        let cycle = plan
            .cycle
            .iter()
            .map(|&d| step(&mut idx, d))
            .collect::<Option<Vec<_>>>()?;
        Some((approach, cycle))
    }

    /// Breadth-first exploration over concrete indices from `sources`.
    ///
    /// Terminates without the cap: if the union is infinite, some reachable
    /// row far enough inside the periodic regime has a residue that reaches
    /// a positive cycle, and `realize` succeeds there.
    pub(crate) fn explore(&self, sources: &[usize]) -> Result<Exploration> {
        let cap = self.op.support_cap();
        let period = self.op.period();
        let n0 = self.op.n0();
        let mut parent: HashMap<usize, Option<usize>> = HashMap::new();
        let mut origin: HashMap<usize, usize> = HashMap::new();
        let mut queue = VecDeque::new();
        for &s in sources {
            if s == 0 {
                return Err(Error::ZeroIndex);
            }
            if parent.insert(s, None).is_none() {
                origin.insert(s, s);
                queue.push_back(s);
            }
        }
        while let Some(j) = queue.pop_front() {
            let from = origin[&j];
            if j >= n0 {
                if let Some(plan) = &self.escape[j % period] {
                    if let Some((approach, cycle)) = self.realize(plan, j, from) {
                        let mut stem = Vec::new();
                        let mut cur = j;
                        while let Some(Some(p)) = parent.get(&cur) {
                            stem.push(CertificateEdge {
                                from: *p,
                                to: cur,
                                weight: cur as i64 - *p as i64,
                            });
                            cur = *p;
                        }
                        stem.reverse();
                        stem.extend(approach);
                        return Ok(Exploration::Escapes {
                            source: from,
                            certificate: Certificate {
                                start: from,
                                stem,
                                cycle,
                            },
                        });
                    }
                }
            }
            for col in self.op.row(j).support() {
                if let std::collections::hash_map::Entry::Vacant(slot) = parent.entry(col) {
                    slot.insert(Some(j));
                    origin.insert(col, from);
                    queue.push_back(col);
                    if parent.len() > cap {
                        return Err(Error::ResourceLimit {
                            what: "reachable set",
                            reached: parent.len(),
                            cap,
                        });
                    }
                }
            }
        }
        Ok(Exploration::Closed(parent.into_keys().collect()))
    }

    pub fn dependency_closure(&self, n: usize) -> Result<ReachabilityResult> {
        Ok(match self.explore(&[n])? {
            Exploration::Closed(set) => {
                let bound = *set.last().expect("contains n");
                ReachabilityResult::Finite { set, bound }
            }
            Exploration::Escapes { certificate, .. } => ReachabilityResult::Infinite(certificate),
        })
    }

    /// Closure of `{1..=n}`, or the first structural failure found.
    pub fn closure_of_prefix(&self, n: usize) -> Result<BTreeSet<usize>> {
        let sources: Vec<usize> = (1..=n).collect();
        match self.explore(&sources)? {
            Exploration::Closed(set) => Ok(set),
            Exploration::Escapes {
                source,
                certificate,
            } => Err(Error::StructuralFailure {
                row: source,
                certificate: Box::new(certificate),
            }),
        }
    }

    /// Longest-path weights from each residue in the periodic quotient.
    /// Only meaningful without positive cycles.
    fn max_offsets(&self) -> Vec<i64> {
        let p = self.op.period();
        let residue_edges: Vec<(usize, usize, i64)> = self
            .graph
            .edges
            .iter()
            .filter_map(|e| match (e.from, e.to) {
                (Node::Residue(a), Node::Residue(b)) => Some((a, b, e.weight)),
                _ => None,
            })
            .collect();
        (0..p)
            .map(|r| {
                let mut best: Vec<Option<i64>> = vec![None; p];
                best[r] = Some(0);
                for _ in 0..p {
                    let mut changed = false;
                    for &(a, b, w) in &residue_edges {
                        if let Some(da) = best[a] {
                            if best[b].is_none_or(|db| da + w > db) {
                                best[b] = Some(da + w);
                                changed = true;
                            }
                        }
                    }
                    if !changed {
                        break;
                    }
                }
                best.into_iter().flatten().max().unwrap_or(0)
            })
            .collect()
    }

    /// Closed form for `m(n)` on the periodic regime of a generating
    /// operator.
    pub fn periodic_rule(&self) -> Result<PeriodicRule> {
        let n0 = self.op.n0();
        let p = self.op.period();
        let low_reach = if n0 > 1 {
            *self.closure_of_prefix(n0 - 1)?.last().expect("non-empty")
        } else {
            0
        };
        let valid_from = (n0 + p * self.op.max_abs_offset() as usize).max(low_reach + 1);
        Ok(PeriodicRule {
            valid_from,
            max_offset: self.max_offsets(),
        })
    }

    pub fn decide_generation(&self, rows_to_report: &[usize]) -> Result<GeneratorVerdict> {
        if self.has_escape() {
            let p = self.op.period();
            let limit = self.op.n0() + 2 * p * self.op.max_abs_offset() as usize + p;
            for n in 1..=limit {
                if let ReachabilityResult::Infinite(certificate) = self.dependency_closure(n)? {
                    return Ok(GeneratorVerdict::FailsStructurally {
                        row: n,
                        certificate,
                    });
                }
            }
            unreachable!("a positive cycle is realized from some row at most {limit}");
        }
        let rule = self.periodic_rule()?;
        let mut m_table = BTreeMap::new();
        for &n in rows_to_report {
            if n == 0 {
                return Err(Error::ZeroIndex);
            }
            let m = match rule.m_of_n(n) {
                Some(m) => m,
                None => *self.closure_of_prefix(n)?.last().expect("non-empty"),
            };
            m_table.insert(n, m);
        }
        Ok(GeneratorVerdict::Generates { m_table, rule })
    }
}

/// For rows `j >= valid_from` the largest reachable column is
/// `j + max_offset[j mod p]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicRule {
    pub valid_from: usize,
    pub max_offset: Vec<i64>,
}

impl PeriodicRule {
    pub fn max_reach(&self, j: usize) -> Option<usize> {
        (j >= self.valid_from)
            .then(|| (j as i64 + self.max_offset[j % self.max_offset.len()]) as usize)
    }

    /// `m(n) = max_{n-p < j <= n} (j + δ(j mod p))`, once the whole window
    /// lies at or beyond `valid_from`.
    pub fn m_of_n(&self, n: usize) -> Option<usize> {
        let p = self.max_offset.len();
        if n + 1 < self.valid_from + p {
            return None;
        }
        (n + 1 - p..=n).filter_map(|j| self.max_reach(j)).max()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GeneratorVerdict {
    Generates {
        m_table: BTreeMap<usize, usize>,
        rule: PeriodicRule,
    },
    FailsStructurally {
        row: usize,
        certificate: Certificate,
    },
}

impl GeneratorVerdict {
    pub fn generates(&self) -> bool {
        matches!(self, Self::Generates { .. })
    }

    pub fn to_json(&self) -> Value {
        match self {
            Self::Generates { m_table, rule } => json!({
                "verdict": "generates",
                "m_table": m_table.iter().map(|(n, m)| (n.to_string(), json!(m))).collect::<serde_json::Map<_, _>>(),
                "rule": rule,
            }),
            Self::FailsStructurally { row, certificate } => json!({
                "verdict": "fails",
                "row": row,
                "witness": {
                    "stem": certificate.stem,
                    "cycle": certificate.cycle,
                    "cycle_weight": certificate.cycle_weight(),
                },
            }),
        }
    }
}

pub fn dependency_closure(op: &RowFiniteOperator, n: usize) -> Result<ReachabilityResult> {
    DependencyAnalyzer::new(op).dependency_closure(n)
}

pub fn decide_generation(
    op: &RowFiniteOperator,
    rows_to_report: &[usize],
) -> Result<GeneratorVerdict> {
    DependencyAnalyzer::new(op).decide_generation(rows_to_report)
}
