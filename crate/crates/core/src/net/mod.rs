//! Network model: geometry, channel gains, SINR accounting, the system
//! potential energy and the scheduling objective.

mod neighborhood;
mod sinr;
mod topology;

pub use neighborhood::NeighborhoodSystem;
pub use sinr::{
    channel_gain, exact_residual, exact_residuals, inverse_sinr, inverse_sinr_local,
    objective_value, outage_probability, potential_energy, unit_step, GainTable, Objective,
    Outage,
};
pub use topology::{generate_topology, linear_chain, PlacementRule};

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: u64,
    pub position: Point,
    pub power: f64,
}

/// A directed link. `tx` and `rx` are node indices into [`Network::nodes`].
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub id: u64,
    pub tx: usize,
    pub rx: usize,
}

/// Node positions, transmit powers, the directed link set and the
/// power-law channel parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkDoc", into = "NetworkDoc")]
pub struct Network {
    nodes: Vec<Node>,
    links: Vec<Link>,
    alpha: f64,
    noise: f64,
    area_side: f64,
}

pub const MIN_ALPHA: f64 = 2.0;
pub const MAX_ALPHA: f64 = 6.0;

impl Network {
    pub fn new(
        nodes: Vec<Node>,
        links: Vec<Link>,
        alpha: f64,
        noise: f64,
        area_side: f64,
    ) -> Result<Self> {
        if !(MIN_ALPHA..=MAX_ALPHA).contains(&alpha) {
            return Err(Error::Network(format!(
                "attenuation exponent {alpha} outside [{MIN_ALPHA}, {MAX_ALPHA}]"
            )));
        }
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(Error::Network(format!("noise must be finite and >= 0, got {noise}")));
        }
        if !(area_side > 0.0 && area_side.is_finite()) {
            return Err(Error::Network(format!("area side must be > 0, got {area_side}")));
        }
        let mut node_ids = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if !(n.power > 0.0 && n.power.is_finite()) {
                return Err(Error::Network(format!("node {} has non-positive power", n.id)));
            }
            if !(n.position.x.is_finite() && n.position.y.is_finite()) {
                return Err(Error::Network(format!("node {} has a non-finite position", n.id)));
            }
            if node_ids.insert(n.id, i).is_some() {
                return Err(Error::Network(format!("duplicate node id {}", n.id)));
            }
        }
        let mut link_ids = HashMap::with_capacity(links.len());
        for l in &links {
            if l.tx >= nodes.len() || l.rx >= nodes.len() {
                return Err(Error::Network(format!("link {} references a missing node", l.id)));
            }
            if l.tx == l.rx {
                return Err(Error::Network(format!("link {} has tx == rx", l.id)));
            }
            if nodes[l.tx].position.distance(&nodes[l.rx].position) <= 0.0 {
                return Err(Error::Network(format!("link {} has zero length", l.id)));
            }
            if link_ids.insert(l.id, ()).is_some() {
                return Err(Error::Network(format!("duplicate link id {}", l.id)));
            }
        }
        Ok(Network { nodes, links, alpha, noise, area_side })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn n_links(&self) -> usize {
        self.links.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn area_side(&self) -> f64 {
        self.area_side
    }

    /// Same geometry with a different attenuation exponent.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Network::new(self.nodes.clone(), self.links.clone(), alpha, self.noise, self.area_side)
    }

    pub fn with_noise(&self, noise: f64) -> Result<Self> {
        Network::new(self.nodes.clone(), self.links.clone(), self.alpha, noise, self.area_side)
    }

    pub fn tx_pos(&self, link: usize) -> Point {
        self.nodes[self.links[link].tx].position
    }

    pub fn rx_pos(&self, link: usize) -> Point {
        self.nodes[self.links[link].rx].position
    }

    pub fn tx_power(&self, link: usize) -> f64 {
        self.nodes[self.links[link].tx].power
    }

    pub fn link_length(&self, link: usize) -> f64 {
        self.tx_pos(link).distance(&self.rx_pos(link))
    }

    /// P_i l_ij^(-alpha): received signal power of a link.
    pub fn signal_power(&self, link: usize) -> f64 {
        self.tx_power(link) * self.link_length(link).powf(-self.alpha)
    }

    /// Power received at the receiver of `victim` from the transmitter of
    /// `source`. Infinite when the two points coincide (a node cannot
    /// receive while it is itself transmitting).
    pub fn received_power(&self, victim: usize, source: usize) -> f64 {
        let d = self.tx_pos(source).distance(&self.rx_pos(victim));
        if d == 0.0 {
            f64::INFINITY
        } else {
            self.tx_power(source) * d.powf(-self.alpha)
        }
    }

    /// Largest pairwise distance between any two node positions.
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.nodes.iter().enumerate() {
            for b in &self.nodes[i + 1..] {
                d = d.max(a.position.distance(&b.position));
            }
        }
        d
    }

    /// Node label pair `(tx id, rx id)` for display.
    pub fn link_label(&self, link: usize) -> (u64, u64) {
        let l = &self.links[link];
        (self.nodes[l.tx].id, self.nodes[l.rx].id)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NodeDoc {
    id: u64,
    x: f64,
    y: f64,
    power: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LinkDoc {
    id: u64,
    tx: u64,
    rx: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NetworkDoc {
    nodes: Vec<NodeDoc>,
    links: Vec<LinkDoc>,
    alpha: f64,
    noise: f64,
    area_side: f64,
}

impl TryFrom<NetworkDoc> for Network {
    type Error = Error;

    fn try_from(doc: NetworkDoc) -> Result<Self> {
        let index: HashMap<u64, usize> =
            doc.nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let resolve = |id: u64| {
            index
                .get(&id)
                .copied()
                .ok_or_else(|| Error::Network(format!("link references unknown node {id}")))
        };
        let links = doc
            .links
            .iter()
            .map(|l| Ok(Link { id: l.id, tx: resolve(l.tx)?, rx: resolve(l.rx)? }))
            .collect::<Result<Vec<_>>>()?;
        let nodes = doc
            .nodes
            .into_iter()
            .map(|n| Node { id: n.id, position: Point::new(n.x, n.y), power: n.power })
            .collect();
        Network::new(nodes, links, doc.alpha, doc.noise, doc.area_side)
    }
}

impl From<Network> for NetworkDoc {
    fn from(net: Network) -> Self {
        let links = net
            .links
            .iter()
            .map(|l| LinkDoc { id: l.id, tx: net.nodes[l.tx].id, rx: net.nodes[l.rx].id })
            .collect();
        let nodes = net
            .nodes
            .iter()
            .map(|n| NodeDoc { id: n.id, x: n.position.x, y: n.position.y, power: n.power })
            .collect();
        NetworkDoc { nodes, links, alpha: net.alpha, noise: net.noise, area_side: net.area_side }
    }
}

/// Binary activity vector over the links of one network.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    active: Vec<bool>,
}

impl Configuration {
    pub fn empty(n_links: usize) -> Self {
        Configuration { active: vec![false; n_links] }
    }

    pub fn from_bits(active: Vec<bool>) -> Self {
        Configuration { active }
    }

    pub fn from_active(n_links: usize, active: &[usize]) -> Result<Self> {
        let mut bits = vec![false; n_links];
        for &i in active {
            if i >= n_links {
                return Err(Error::Argument(format!("link index {i} out of range")));
            }
            bits[i] = true;
        }
        Ok(Configuration { active: bits })
    }

    /// Low bit = link 0.
    pub fn from_mask(n_links: usize, mask: u64) -> Self {
        Configuration { active: (0..n_links).map(|i| mask >> i & 1 == 1).collect() }
    }

    pub fn mask(&self) -> u64 {
        self.active
            .iter()
            .enumerate()
            .fold(0u64, |m, (i, &a)| if a { m | 1 << i } else { m })
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn is_active(&self, link: usize) -> bool {
        self.active[link]
    }

    pub fn set(&mut self, link: usize, on: bool) {
        self.active[link] = on;
    }

    pub fn bits(&self) -> &[bool] {
        &self.active
    }

    pub fn active_links(&self) -> Vec<usize> {
        self.active.iter().enumerate().filter(|(_, &a)| a).map(|(i, _)| i).collect()
    }

    pub fn count_active(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn check_domain(&self, net: &Network) -> Result<()> {
        if self.active.len() != net.n_links() {
            return Err(Error::Argument(format!(
                "configuration covers {} links, network has {}",
                self.active.len(),
                net.n_links()
            )));
        }
        Ok(())
    }
}

impl Serialize for Configuration {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.active_links().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Configuration {
    /// Deserializes from an active-index list; the link count is taken as
    /// one past the largest index, so callers that need an exact domain
    /// should rebuild with [`Configuration::from_active`].
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let idx = Vec::<usize>::deserialize(d)?;
        let n = idx.iter().max().map_or(0, |m| m + 1);
        Configuration::from_active(n, &idx).map_err(serde::de::Error::custom)
    }
}

/// R_0, R_th = 1/SINR_th and the constraint penalty beta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulingParams {
    pub r0: f64,
    pub r_th: f64,
    pub beta: f64,
}

impl SchedulingParams {
    pub fn new(r0: f64, r_th: f64, beta: f64, net: &Network) -> Result<Self> {
        if !(r_th > 0.0 && r_th.is_finite()) {
            return Err(Error::Argument(format!("R_th must be > 0, got {r_th}")));
        }
        if !(beta > 0.0) {
            return Err(Error::Argument(format!("beta must be > 0, got {beta}")));
        }
        let floor = max_noise_ratio(net);
        if !(r0 > floor) {
            return Err(Error::Argument(format!(
                "R_0 = {r0} must exceed the largest noise-only inverse SINR {floor}"
            )));
        }
        Ok(SchedulingParams { r0, r_th, beta })
    }

    /// R_0 = 10 * max N_b/(P_i l^-alpha) + R_th and beta = 10 R_0.
    pub fn for_network(net: &Network, sinr_th: f64) -> Result<Self> {
        if !(sinr_th > 0.0) {
            return Err(Error::Argument(format!("SINR threshold must be > 0, got {sinr_th}")));
        }
        let r_th = 1.0 / sinr_th;
        let r0 = 10.0 * max_noise_ratio(net) + r_th;
        SchedulingParams::new(r0, r_th, 10.0 * r0, net)
    }

    pub fn sinr_th(&self) -> f64 {
        1.0 / self.r_th
    }
}

fn max_noise_ratio(net: &Network) -> f64 {
    (0..net.n_links()).map(|i| net.noise() / net.signal_power(i)).fold(0.0, f64::max)
}
