use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};

/// `offset = displayed_a − displayed_b` at `epoch`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Edge {
    pub a: String,
    pub b: String,
    pub offset: f64,
    pub uncertainty: f64,
    pub epoch: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OffsetGraph {
    nodes: Vec<String>,
    index: HashMap<String, usize>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<usize>>,
}

impl OffsetGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, id: &str) -> Result<usize> {
        if let Some(&i) = self.index.get(id) {
            return Ok(i);
        }
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            return Err(Error::input(format!(
                "node id {id:?} must be non-empty without whitespace"
            )));
        }
        self.nodes.push(id.to_owned());
        self.adjacency.push(Vec::new());
        self.index.insert(id.to_owned(), self.nodes.len() - 1);
        Ok(self.nodes.len() - 1)
    }

    pub fn add_edge(&mut self, edge: Edge) -> Result<()> {
        if edge.a == edge.b {
            return Err(Error::input(format!("edge from {} to itself", edge.a)));
        }
        if !(edge.offset.is_finite() && edge.epoch.is_finite()) {
            return Err(Error::input("edge offset and epoch must be finite"));
        }
        if !(edge.uncertainty.is_finite() && edge.uncertainty >= 0.0) {
            return Err(Error::input(format!(
                "edge uncertainty {} must be ≥ 0",
                edge.uncertainty
            )));
        }
        let a = self.add_node(&edge.a)?;
        let b = self.add_node(&edge.b)?;
        self.adjacency[a].push(self.edges.len());
        self.adjacency[b].push(self.edges.len());
        self.edges.push(edge);
        Ok(())
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Most recent edge between `a` and `b`, oriented from `a`.
    pub fn latest(&self, a: &str, b: &str) -> Option<f64> {
        let ia = *self.index.get(a)?;
        let mut best: Option<(f64, f64)> = None;
        for &e in &self.adjacency[ia] {
            let edge = &self.edges[e];
            let signed = if edge.a == a && edge.b == b {
                edge.offset
            } else if edge.a == b && edge.b == a {
                -edge.offset
            } else {
                continue;
            };
            if best.is_none_or(|(epoch, _)| edge.epoch >= epoch) {
                best = Some((edge.epoch, signed));
            }
        }
        best.map(|(_, o)| o)
    }

    /// Every triple of nodes joined pairwise by at least one edge, each
    /// triple listed once in ascending node order.
    pub fn triangles(&self) -> Vec<[String; 3]> {
        let n = self.nodes.len();
        let mut linked = vec![vec![false; n]; n];
        for e in &self.edges {
            let (a, b) = (self.index[&e.a], self.index[&e.b]);
            linked[a][b] = true;
            linked[b][a] = true;
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| self.nodes[x].cmp(&self.nodes[y]));
        let mut out = Vec::new();
        for (p, &i) in order.iter().enumerate() {
            for (q, &j) in order.iter().enumerate().skip(p + 1) {
                if !linked[i][j] {
                    continue;
                }
                for &k in order.iter().skip(q + 1) {
                    if linked[j][k] && linked[i][k] {
                        out.push([self.nodes[i].clone(), self.nodes[j].clone(), self.nodes[k].clone()]);
                    }
                }
            }
        }
        out
    }
}

#[derive(PartialEq)]
struct Frontier {
    cost: f64,
    node: usize,
}

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// Offset `a − b` and its uncertainty along the minimum-variance path.
///
/// Each edge contributes its own variance plus a staleness term
/// `((now − epoch) · staleness_rate)²`. `None` means the two clocks share
/// no chain of comparisons. The search always runs from the
/// lexicographically smaller id so that reversing the query negates the
/// offset exactly.
pub fn query_offset(g: &OffsetGraph, a: &str, b: &str, now: f64, staleness_rate: f64) -> Option<(f64, f64)> {
    if a == b {
        return Some((0.0, 0.0));
    }
    if a > b {
        return query_offset(g, b, a, now, staleness_rate).map(|(o, u)| (-o, u));
    }
    let (&src, &dst) = (g.index.get(a)?, g.index.get(b)?);
    let n = g.nodes.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut via: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(Frontier { cost: 0.0, node: src });
    while let Some(Frontier { cost, node }) = heap.pop() {
        if done[node] {
            continue;
        }
        done[node] = true;
        if node == dst {
            break;
        }
        for &e in &g.adjacency[node] {
            let edge = &g.edges[e];
            let next = if g.index[&edge.a] == node {
                g.index[&edge.b]
            } else {
                g.index[&edge.a]
            };
            let stale = (now - edge.epoch).abs() * staleness_rate;
            let c = cost + edge.uncertainty * edge.uncertainty + stale * stale;
            if c < dist[next] {
                dist[next] = c;
                via[next] = Some((e, node));
                heap.push(Frontier { cost: c, node: next });
            }
        }
    }
    if !dist[dst].is_finite() {
        return None;
    }
    let mut hops = Vec::new();
    let mut at = dst;
    while let Some((e, from)) = via[at] {
        hops.push((e, from));
        at = from;
    }
    let mut offset = 0.0;
    for &(e, from) in hops.iter().rev() {
        let edge = &g.edges[e];
        offset += if g.index[&edge.a] == from {
            edge.offset
        } else {
            -edge.offset
        };
    }
    Some((offset, dist[dst].sqrt()))
}

/// Signed sum of the most recent offsets around `cycle`. The cycle may be
/// given open (`[a, b, c]`) or closed (`[a, b, c, a]`).
pub fn cycle_residual(g: &OffsetGraph, cycle: &[&str]) -> Result<f64> {
    let mut nodes = cycle.to_vec();
    if nodes.len() > 1 && nodes.first() == nodes.last() {
        nodes.pop();
    }
    if nodes.len() < 2 {
        return Err(Error::input("a cycle needs at least two distinct nodes"));
    }
    let mut sum = 0.0;
    for i in 0..nodes.len() {
        let (a, b) = (nodes[i], nodes[(i + 1) % nodes.len()]);
        sum += g.latest(a, b).ok_or_else(|| Error::MissingEdge {
            a: a.to_owned(),
            b: b.to_owned(),
        })?;
    }
    Ok(sum)
}

/// One edge per line: `a b offset uncertainty epoch`, numbers with 18
/// significant digits.
pub fn write_snapshot(g: &OffsetGraph) -> String {
    let mut out = String::from("# a b offset_s uncertainty_s epoch_s\n");
    for e in &g.edges {
        let _ = writeln!(
            out,
            "{} {} {:.17e} {:.17e} {:.17e}",
            e.a, e.b, e.offset, e.uncertainty, e.epoch
        );
    }
    out
}

/// Inverse of [`write_snapshot`]. Blank lines and `#` comments are skipped.
pub fn parse_snapshot(text: &str) -> Result<OffsetGraph> {
    let mut g = OffsetGraph::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                line,
                message: format!("expected 5 fields, found {}", fields.len()),
            });
        }
        let number = |k: usize, name: &str| -> Result<f64> {
            fields[k].parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("{name} {:?} is not a number", fields[k]),
            })
        };
        let edge = Edge {
            a: fields[0].to_owned(),
            b: fields[1].to_owned(),
            offset: number(2, "offset")?,
            uncertainty: number(3, "uncertainty")?,
            epoch: number(4, "epoch")?,
        };
        g.add_edge(edge).map_err(|e| Error::Parse {
            line,
            message: match e {
                Error::Input(m) => m,
                other => other.to_string(),
            },
        })?;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn edge(a: &str, b: &str, offset: f64, uncertainty: f64, epoch: f64) -> Edge {
        Edge {
            a: a.into(),
            b: b.into(),
            offset,
            uncertainty,
            epoch,
        }
    }

    fn chain() -> OffsetGraph {
        let mut g = OffsetGraph::new();
        g.add_edge(edge("a", "b", 5e-9, 1e-9, 0.0)).unwrap();
        g.add_edge(edge("b", "c", 7e-9, 1e-9, 0.0)).unwrap();
        g
    }

    #[test]
    fn self_query_is_zero() {
        assert_eq!(query_offset(&chain(), "a", "a", 0.0, 0.0), Some((0.0, 0.0)));
    }

    #[test]
    fn chain_composes_offsets_and_variances() {
        let (o, u) = query_offset(&chain(), "a", "c", 0.0, 0.0).unwrap();
        assert!((o - 12e-9).abs() < 1e-24);
        assert!((u - 2f64.sqrt() * 1e-9).abs() < 1e-24);
    }

    #[test]
    fn disconnected_nodes_have_no_relation() {
        let mut g = chain();
        g.add_edge(edge("x", "y", 1e-9, 1e-9, 0.0)).unwrap();
        assert_eq!(query_offset(&g, "a", "x", 0.0, 0.0), None);
        assert_eq!(query_offset(&g, "a", "nowhere", 0.0, 0.0), None);
    }

    #[test]
    fn staleness_steers_path_choice() {
        let mut g = OffsetGraph::new();
        // Direct edge is precise but old; the two-hop route is fresh.
        g.add_edge(edge("a", "c", 1e-9, 0.1e-9, 0.0)).unwrap();
        g.add_edge(edge("a", "b", 2e-9, 1e-9, 1000.0)).unwrap();
        g.add_edge(edge("b", "c", 3e-9, 1e-9, 1000.0)).unwrap();
        let (fresh, _) = query_offset(&g, "a", "c", 1000.0, 0.0).unwrap();
        assert_eq!(fresh, 1e-9);
        let (stale, u) = query_offset(&g, "a", "c", 1000.0, 1e-11).unwrap();
        assert!((stale - 5e-9).abs() < 1e-24);
        assert!((u - 2f64.sqrt() * 1e-9).abs() < 1e-24);
    }

    #[test]
    fn cycle_residuals() {
        let mut g = chain();
        g.add_edge(edge("c", "a", -12e-9, 1e-9, 0.0)).unwrap();
        assert!(cycle_residual(&g, &["a", "b", "c"]).unwrap().abs() < 1e-24);
        assert_eq!(
            cycle_residual(&g, &["a", "b", "c", "a"]).unwrap(),
            cycle_residual(&g, &["a", "b", "c"]).unwrap()
        );
        let err = cycle_residual(&chain(), &["a", "b", "c"]).unwrap_err();
        assert!(matches!(err, Error::MissingEdge { .. }));
    }

    #[test]
    fn latest_edge_wins_in_cycles() {
        let mut g = chain();
        g.add_edge(edge("c", "a", -12e-9, 1e-9, 0.0)).unwrap();
        g.add_edge(edge("a", "c", 13e-9, 1e-9, 50.0)).unwrap();
        assert!((cycle_residual(&g, &["a", "b", "c"]).unwrap() + 1e-9).abs() < 1e-24);
    }

    #[test]
    fn triangles_listed_once() {
        let mut g = chain();
        g.add_edge(edge("c", "a", 0.0, 1e-9, 0.0)).unwrap();
        g.add_edge(edge("c", "a", 0.0, 1e-9, 1.0)).unwrap();
        g.add_edge(edge("c", "d", 0.0, 1e-9, 0.0)).unwrap();
        assert_eq!(g.triangles(), vec![["a".to_string(), "b".to_string(), "c".to_string()]]);
    }

    #[test]
    fn snapshot_round_trip_is_exact() {
        let mut g = chain();
        g.add_edge(edge("c", "a", -1.0 / 3.0 * 1e-8, 1e-9 / 7.0, 86_400.0 / 9.0))
            .unwrap();
        let text = write_snapshot(&g);
        let first = text.lines().nth(1).unwrap().split_whitespace().nth(2).unwrap();
        let mantissa = first.split('e').next().unwrap().replace(['.', '-'], "");
        assert_eq!(mantissa.len(), 18, "{first}");
        assert_eq!(parse_snapshot(&text).unwrap(), g);
    }

    #[test]
    fn snapshot_errors_carry_line_numbers() {
        let err = parse_snapshot("# header\na b 1 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_snapshot("a b 1 x 3\n").unwrap_err();
        assert!(err.to_string().contains("uncertainty"));
        assert!(parse_snapshot("a a 1 1 1").is_err());
        assert!(parse_snapshot("a b 1 -1 1").is_err());
        assert!(parse_snapshot("a b NaN 1 1").is_err());
    }

    proptest! {
        #[test]
        fn queries_are_antisymmetric(
            offsets in prop::collection::vec((-1e-6f64..1e-6, 0.0f64..1e-8, 0.0f64..1e5), 1..30),
            links in prop::collection::vec((0usize..8, 0usize..8), 1..30),
            now in 0.0f64..2e5,
        ) {
            let mut g = OffsetGraph::new();
            for ((a, b), (o, u, t)) in links.iter().zip(&offsets) {
                if a != b {
                    g.add_edge(edge(&format!("n{a}"), &format!("n{b}"), *o, *u, *t)).unwrap();
                }
            }
            for i in 0..8 {
                for j in 0..8 {
                    let (x, y) = (format!("n{i}"), format!("n{j}"));
                    let fwd = query_offset(&g, &x, &y, now, 1e-12);
                    let back = query_offset(&g, &y, &x, now, 1e-12);
                    match (fwd, back) {
                        (Some((o1, u1)), Some((o2, u2))) => {
                            prop_assert_eq!(o1, -o2);
                            prop_assert_eq!(u1, u2);
                        }
                        (None, None) => {}
                        _ => prop_assert!(false, "relation exists one way only"),
                    }
                }
            }
        }

        #[test]
        fn consistent_graphs_agree_on_every_path(
            truth in prop::collection::vec(-1e-3f64..1e-3, 6),
            links in prop::collection::vec((0usize..6, 0usize..6), 5..25),
        ) {
            // Noise-free simultaneous edges built from one set of true offsets.
            let mut g = OffsetGraph::new();
            for (a, b) in &links {
                if a != b {
                    g.add_edge(edge(&format!("n{a}"), &format!("n{b}"), truth[*a] - truth[*b], 0.0, 0.0)).unwrap();
                }
            }
            for i in 0..6 {
                for j in 0..6 {
                    if let Some((o, _)) = query_offset(&g, &format!("n{i}"), &format!("n{j}"), 0.0, 0.0) {
                        prop_assert!((o - (truth[i] - truth[j])).abs() < 1e-15);
                    }
                }
            }
        }
    }
}
