use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Link, Network, Node, Point};
use crate::error::{Error, Result};
use crate::rng::stream;

const MAX_PLACEMENT_RETRIES: usize = 10_000;

/// How the receiver of each generated link is placed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlacementRule {
    /// Transmitter uniform on the square, receiver uniform (by area) on the
    /// disk of `radius` around it; receivers outside the square are redrawn.
    DiskAroundTransmitter { radius: f64 },
}

impl Default for PlacementRule {
    fn default() -> Self {
        PlacementRule::DiskAroundTransmitter { radius: 1.0 }
    }
}

/// Random network of `n_links` links, each with its own transmitter and
/// receiver node (node ids 2k and 2k+1 for link k). Unit transmit power.
pub fn generate_topology(
    seed: u64,
    n_links: usize,
    area_side: f64,
    rule: PlacementRule,
    alpha: f64,
    noise: f64,
) -> Result<Network> {
    if n_links == 0 {
        return Err(Error::Argument("n_links must be > 0".into()));
    }
    if !(area_side > 0.0 && area_side.is_finite()) {
        return Err(Error::Argument(format!("area side must be > 0, got {area_side}")));
    }
    let PlacementRule::DiskAroundTransmitter { radius } = rule;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Argument(format!("placement radius must be > 0, got {radius}")));
    }

    let mut rng = stream(seed, &[0x7090]);
    let mut nodes = Vec::with_capacity(2 * n_links);
    let mut links = Vec::with_capacity(n_links);
    for k in 0..n_links {
        let tx = Point::new(rng.random::<f64>() * area_side, rng.random::<f64>() * area_side);
        let mut rx = None;
        for _ in 0..MAX_PLACEMENT_RETRIES {
            let r = radius * rng.random::<f64>().sqrt();
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            let p = Point::new(tx.x + r * theta.cos(), tx.y + r * theta.sin());
            let inside = (0.0..=area_side).contains(&p.x) && (0.0..=area_side).contains(&p.y);
            if inside && p.distance(&tx) > 0.0 {
                rx = Some(p);
                break;
            }
        }
        let rx = rx.ok_or_else(|| {
            Error::Generation(format!(
                "no in-area receiver for link {k} after {MAX_PLACEMENT_RETRIES} draws"
            ))
        })?;
        let id = k as u64;
        nodes.push(Node { id: 2 * id, position: tx, power: 1.0 });
        nodes.push(Node { id: 2 * id + 1, position: rx, power: 1.0 });
        links.push(Link { id, tx: 2 * k, rx: 2 * k + 1 });
    }
    Network::new(nodes, links, alpha, noise, area_side)
}

/// `n_nodes` nodes on a line at `spacing`, with directed links (k, k+1).
/// Node ids start at 1 and link ids at 0.
pub fn linear_chain(n_nodes: usize, spacing: f64, alpha: f64, noise: f64) -> Result<Network> {
    if n_nodes < 2 {
        return Err(Error::Argument("a chain needs at least two nodes".into()));
    }
    let nodes = (0..n_nodes)
        .map(|k| Node { id: k as u64 + 1, position: Point::new(k as f64 * spacing, 0.0), power: 1.0 })
        .collect();
    let links = (0..n_nodes - 1).map(|k| Link { id: k as u64, tx: k, rx: k + 1 }).collect();
    Network::new(nodes, links, alpha, noise, (n_nodes - 1) as f64 * spacing)
}
