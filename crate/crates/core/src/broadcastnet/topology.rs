use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Authority,
    Dependent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub role: Role,
}

/// Half-open interval `[start, end)` of coordinate time during which a link
/// carries nothing.
pub type Window = (f64, f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Link {
    pub a: String,
    pub b: String,
    /// Mean one-way delay, seconds.
    pub base_delay: f64,
    /// `delay(a→b) − delay(b→a)`, seconds.
    #[serde(default)]
    pub asymmetry: f64,
    #[serde(default)]
    pub loss_probability: f64,
    #[serde(default)]
    pub disruption_windows: Vec<Window>,
}

impl Link {
    pub fn new(a: impl Into<String>, b: impl Into<String>, base_delay: f64) -> Self {
        Self {
            a: a.into(),
            b: b.into(),
            base_delay,
            asymmetry: 0.0,
            loss_probability: 0.0,
            disruption_windows: Vec::new(),
        }
    }

    /// One-way delay in the given direction.
    pub fn delay(&self, from_a: bool) -> f64 {
        if from_a {
            self.base_delay + 0.5 * self.asymmetry
        } else {
            self.base_delay - 0.5 * self.asymmetry
        }
    }

    pub fn is_disrupted(&self, t: f64) -> bool {
        self.disruption_windows.iter().any(|&(s, e)| t >= s && t < e)
    }

    pub fn validate(&self) -> Result<()> {
        let name = format!("link {}–{}", self.a, self.b);
        if !(self.base_delay.is_finite() && self.asymmetry.is_finite()) {
            return Err(Error::config(format!("{name}: non-finite delay")));
        }
        if self.delay(true) < 0.0 || self.delay(false) < 0.0 {
            return Err(Error::config(format!("{name}: delay must be ≥ 0 in both directions")));
        }
        if !(0.0..1.0).contains(&self.loss_probability) {
            return Err(Error::config(format!(
                "{name}: loss_probability must satisfy 0 ≤ loss < 1 (got {})",
                self.loss_probability
            )));
        }
        let mut windows = self.disruption_windows.clone();
        for &(s, e) in &windows {
            if !(s.is_finite() && e.is_finite() && e > s) {
                return Err(Error::config(format!(
                    "{name}: window [{s}, {e}) is empty or non-finite"
                )));
            }
        }
        windows.sort_by(|x, y| x.0.total_cmp(&y.0));
        for pair in windows.windows(2) {
            if pair[1].0 < pair[0].1 {
                return Err(Error::config(format!(
                    "{name}: disruption windows [{}, {}) and [{}, {}) overlap",
                    pair[0].0, pair[0].1, pair[1].0, pair[1].1
                )));
            }
        }
        Ok(())
    }
}

/// Nodes and links, with node indices matching the order of `nodes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    nodes: Vec<Node>,
    links: Vec<Link>,
    /// Per node: (link index, neighbour index, sending from the link's `a` side).
    adjacency: Vec<Vec<(usize, usize, bool)>>,
    index: HashMap<String, usize>,
}

impl Topology {
    pub fn new(nodes: Vec<Node>, links: Vec<Link>) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id.clone(), i).is_some() {
                return Err(Error::config(format!("duplicate node id {:?}", n.id)));
            }
        }
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (l, link) in links.iter().enumerate() {
            link.validate()?;
            let a = *index
                .get(&link.a)
                .ok_or_else(|| Error::config(format!("link references unknown node {:?}", link.a)))?;
            let b = *index
                .get(&link.b)
                .ok_or_else(|| Error::config(format!("link references unknown node {:?}", link.b)))?;
            if a == b {
                return Err(Error::config(format!("link from {:?} to itself", link.a)));
            }
            adjacency[a].push((l, b, true));
            adjacency[b].push((l, a, false));
        }
        Ok(Self {
            nodes,
            links,
            adjacency,
            index,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, l: usize) -> &Link {
        &self.links[l]
    }

    pub fn neighbours(&self, node: usize) -> &[(usize, usize, bool)] {
        &self.adjacency[node]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, node: usize) -> &str {
        &self.nodes[node].id
    }

    pub fn role(&self, node: usize) -> Role {
        self.nodes[node].role
    }

    pub fn authorities(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].role == Role::Authority)
    }

    pub fn dependents(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].role == Role::Dependent)
    }
}
