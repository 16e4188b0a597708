use serde::{Deserialize, Serialize};

use super::Network;
use crate::error::{argument, Result};

/// Per link (i,j), the links (m,n) whose transmitter lies within `gamma_f`
/// of receiver j. Boundary ties are included. Member lists are sorted by
/// link index and never contain the link itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodSystem {
    gamma_f: f64,
    in_range: Vec<Vec<usize>>,
    out_range: Vec<Vec<usize>>,
}

impl NeighborhoodSystem {
    pub fn new(net: &Network, gamma_f: f64) -> Result<Self> {
        if !(gamma_f > 0.0) {
            return Err(argument(format!("neighborhood radius must be > 0, got {gamma_f}")));
        }
        let n = net.n_links();
        let mut in_range = vec![Vec::new(); n];
        let mut out_range = vec![Vec::new(); n];
        for j in 0..n {
            let rx = net.rx_pos(j);
            for m in (0..n).filter(|&m| m != j) {
                if net.tx_pos(m).distance(&rx) <= gamma_f {
                    in_range[j].push(m);
                } else {
                    out_range[j].push(m);
                }
            }
        }
        Ok(NeighborhoodSystem { gamma_f, in_range, out_range })
    }

    pub fn gamma_f(&self) -> f64 {
        self.gamma_f
    }

    pub fn len(&self) -> usize {
        self.in_range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.in_range.is_empty()
    }

    /// N_ij.
    pub fn neighbors(&self, link: usize) -> &[usize] {
        &self.in_range[link]
    }

    /// Every link other than `link` that is not in N_ij.
    pub fn outside(&self, link: usize) -> &[usize] {
        &self.out_range[link]
    }

    pub fn contains(&self, link: usize, other: usize) -> bool {
        self.in_range[link].binary_search(&other).is_ok()
    }
}
