//! Bipartite factor graph: one variable node per link and one function
//! node per link whose scope is the link together with its neighborhood.

use crate::net::{Configuration, NeighborhoodSystem};

#[derive(Debug, Clone, PartialEq)]
pub struct FactorGraph {
    /// scope[j] = N_j plus j itself, sorted.
    scopes: Vec<Vec<usize>>,
    /// members[m] = function nodes whose scope contains m, sorted.
    members: Vec<Vec<usize>>,
}

impl FactorGraph {
    pub fn new(nbhd: &NeighborhoodSystem) -> Self {
        let n = nbhd.len();
        let scopes: Vec<Vec<usize>> = (0..n)
            .map(|j| {
                let mut s = nbhd.neighbors(j).to_vec();
                s.push(j);
                s.sort_unstable();
                s
            })
            .collect();
        let mut members = vec![Vec::new(); n];
        for (j, scope) in scopes.iter().enumerate() {
            for &m in scope {
                members[m].push(j);
            }
        }
        FactorGraph { scopes, members }
    }

    pub fn n_links(&self) -> usize {
        self.scopes.len()
    }

    pub fn scope(&self, function: usize) -> &[usize] {
        &self.scopes[function]
    }

    /// Function nodes adjacent to variable `link`.
    pub fn adjacent_functions(&self, link: usize) -> &[usize] {
        &self.members[link]
    }

    pub fn edge_count(&self) -> usize {
        self.scopes.iter().map(Vec::len).sum()
    }

    /// Read access to `config` restricted to the scope of `function`.
    pub fn view<'a>(&'a self, function: usize, config: &'a Configuration) -> LocalView<'a> {
        LocalView { owner: function, scope: &self.scopes[function], config }
    }
}

/// State visible to one function node. Links outside the scope read as
/// `None`, so message computations cannot consult them.
#[derive(Debug, Clone, Copy)]
pub struct LocalView<'a> {
    owner: usize,
    scope: &'a [usize],
    config: &'a Configuration,
}

impl<'a> LocalView<'a> {
    pub fn owner(&self) -> usize {
        self.owner
    }

    pub fn state(&self, link: usize) -> Option<bool> {
        self.scope.binary_search(&link).ok().map(|_| self.config.is_active(link))
    }

    /// Active links in scope other than the owner.
    pub fn active_neighbors(&self) -> impl Iterator<Item = usize> + 'a {
        let owner = self.owner;
        let config = self.config;
        self.scope.iter().copied().filter(move |&m| m != owner && config.is_active(m))
    }

    pub fn scope(&self) -> &'a [usize] {
        self.scope
    }
}
