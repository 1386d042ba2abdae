//! Hierarchical semantic tree over map tiles.
//!
//! Tiles are split recursively into `L` groups by spectral clustering of
//! their pairwise rotation-searched descriptor distances. A query walks down
//! from the root, scoring a random sample of every child's tiles and
//! following the child whose best sample is closest, then scans the leaf.

mod spectral;

pub use spectral::{affinity, kmeans, spectral_embedding, spectral_split};

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matcher::{min_rotation_distance, FovMask, MatchResult, TileScorer};
use crate::ssl_descriptor::SslDescriptor;

/// `D[i][j]` = full-mask rotation-searched distance from descriptor `i`
/// (as query) to descriptor `j`.
pub fn pairwise_distance_matrix(descriptors: &[&SslDescriptor]) -> Result<DMatrix<f64>> {
    let n = descriptors.len();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let mask = FovMask::full(descriptors[0].n_rings, descriptors[0].n_sectors);
    let rows = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        Ok(0.0)
                    } else {
                        min_rotation_distance(descriptors[i], descriptors[j], &mask).map(|d| d.0)
                    }
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    /// Children per internal node (`L`).
    pub branches: usize,
    pub leaf_capacity: usize,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            branches: 3,
            leaf_capacity: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub id: usize,
    /// Root is layer 0.
    pub layer: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Tile ids under this node.
    pub tiles: Vec<usize>,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// Nodes are stored breadth-first; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticTree {
    pub params: TreeParams,
    pub nodes: Vec<TreeNode>,
}

impl SemanticTree {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.layer).max().unwrap_or(0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    /// Rebuilds child links from parent links (used when loading).
    pub fn from_nodes(params: TreeParams, mut nodes: Vec<TreeNode>) -> Result<Self> {
        nodes.sort_by_key(|n| n.id);
        if nodes.iter().enumerate().any(|(i, n)| n.id != i) || nodes.is_empty() {
            return Err(Error::Validation("tree node ids must be dense starting at 0".into()));
        }
        for n in &mut nodes {
            n.children.clear();
        }
        for i in 0..nodes.len() {
            if let Some(p) = nodes[i].parent {
                if p >= i {
                    return Err(Error::Validation(format!("node {i} lists parent {p} which does not precede it")));
                }
                nodes[p].children.push(i);
            } else if i != 0 {
                return Err(Error::Validation(format!("node {i} has no parent")));
            }
        }
        Ok(Self { params, nodes })
    }

    /// For every layer below the root, each tile's node at that layer (or
    /// its leaf when the leaf is shallower): `(layer, tile_id, node_id)`.
    pub fn layer_assignments(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for layer in 1..=self.depth() {
            let mut rows: Vec<(usize, usize, usize)> = self
                .nodes
                .iter()
                .filter(|n| n.layer == layer || (n.is_leaf() && n.layer < layer))
                .flat_map(|n| n.tiles.iter().map(move |t| (layer, *t, n.id)))
                .collect();
            rows.sort();
            out.extend(rows);
        }
        out
    }
}

/// Recursively splits the tiles until every node holds at most
/// `leaf_capacity` of them. `tile_ids[i]` names `descriptors[i]`.
pub fn build_tree(tile_ids: &[usize], descriptors: &[&SslDescriptor], params: TreeParams) -> Result<SemanticTree> {
    if tile_ids.is_empty() || tile_ids.len() != descriptors.len() {
        return Err(Error::Parameter("tree needs one descriptor per tile and at least one tile".into()));
    }
    if params.branches < 2 || params.leaf_capacity == 0 {
        return Err(Error::Parameter("tree needs at least 2 branches and a positive leaf capacity".into()));
    }
    let distances = pairwise_distance_matrix(descriptors)?;
    build_tree_from_distances(tile_ids, &distances, params)
}

pub fn build_tree_from_distances(tile_ids: &[usize], distances: &DMatrix<f64>, params: TreeParams) -> Result<SemanticTree> {
    let mut nodes = vec![TreeNode {
        id: 0,
        layer: 0,
        parent: None,
        children: vec![],
        tiles: tile_ids.to_vec(),
    }];
    // positions into `tile_ids` for each node, processed breadth-first
    let mut members: Vec<Vec<usize>> = vec![(0..tile_ids.len()).collect()];
    let mut cursor = 0;
    while cursor < nodes.len() {
        let idx = members[cursor].clone();
        if idx.len() > params.leaf_capacity {
            let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| distances[(idx[i], idx[j])]);
            let seed = params.seed ^ (cursor as u64).wrapping_mul(0x2545_F491_4F6C_DD1D);
            match spectral_split(&sub, params.branches, seed) {
                Ok(labels) => {
                    for c in 0..params.branches {
                        let child: Vec<usize> = idx.iter().zip(&labels).filter(|(_, l)| **l == c).map(|(i, _)| *i).collect();
                        let id = nodes.len();
                        nodes.push(TreeNode {
                            id,
                            layer: nodes[cursor].layer + 1,
                            parent: Some(cursor),
                            children: vec![],
                            tiles: child.iter().map(|i| tile_ids[*i]).collect(),
                        });
                        nodes[cursor].children.push(id);
                        members.push(child);
                    }
                }
                Err(Error::DegenerateSplit { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        cursor += 1;
    }
    Ok(SemanticTree { params, nodes })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraversalBudget {
    /// Tiles sampled per child at every level (`M`).
    pub samples: usize,
    pub seed: u64,
    /// Children followed per level; 1 means no spilling.
    pub spill: usize,
}

impl Default for TraversalBudget {
    fn default() -> Self {
        Self {
            samples: 5,
            seed: 0,
            spill: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeSearchResult {
    pub best: MatchResult,
    /// Distinct tiles scored.
    pub comparisons: usize,
    /// Every scored tile, ranked.
    pub scored: Vec<MatchResult>,
    /// Nodes visited, root first.
    pub path: Vec<usize>,
}

/// Randomised best-child descent.
///
/// Each child of a visited node is represented by `min(M, |child|)` of its
/// tiles; tiles already scored higher up count toward that sample and are
/// topped up with fresh draws without replacement. The child whose best
/// sampled distance is smallest is followed (the best `spill` children when
/// spilling). Reached leaves are scanned exhaustively, and the best of all
/// scored tiles is returned.
pub fn tree_search<'d>(
    tree: &SemanticTree,
    descriptor_of: &dyn Fn(usize) -> Option<&'d SslDescriptor>,
    scorer: &TileScorer<'_>,
    budget: TraversalBudget,
) -> Result<TreeSearchResult> {
    if budget.samples == 0 || budget.spill == 0 {
        return Err(Error::Parameter("traversal budget needs M >= 1 and spill >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let mut cache: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    let score = |tile: usize, cache: &mut BTreeMap<usize, (f64, usize)>| -> Result<f64> {
        if let Some(s) = cache.get(&tile) {
            return Ok(s.0);
        }
        let desc = descriptor_of(tile).ok_or_else(|| Error::Contract(format!("tree references unknown tile {tile}")))?;
        let s = scorer.score(tile, desc)?;
        cache.insert(tile, s);
        Ok(s.0)
    };

    let mut frontier = vec![0usize];
    let mut path = vec![0usize];
    while !frontier.is_empty() {
        let mut candidates: Vec<(f64, usize)> = Vec::new();
        for node_id in &frontier {
            let node = &tree.nodes[*node_id];
            if node.is_leaf() {
                for t in &node.tiles {
                    score(*t, &mut cache)?;
                }
                continue;
            }
            for child_id in &node.children {
                let child = &tree.nodes[*child_id];
                let want = budget.samples.min(child.tiles.len());
                let seen: Vec<usize> = child.tiles.iter().copied().filter(|t| cache.contains_key(t)).collect();
                let fresh: Vec<usize> = child.tiles.iter().copied().filter(|t| !cache.contains_key(t)).collect();
                let need = want.saturating_sub(seen.len()).min(fresh.len());
                let mut best = f64::INFINITY;
                for t in seen {
                    best = best.min(cache[&t].0);
                }
                for i in sample(&mut rng, fresh.len(), need).into_vec() {
                    best = best.min(score(fresh[i], &mut cache)?);
                }
                candidates.push((best, *child_id));
            }
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        frontier = candidates.iter().take(budget.spill).map(|c| c.1).collect();
        path.extend(&frontier);
    }

    let mut scored: Vec<MatchResult> = cache
        .iter()
        .map(|(t, (d, k))| MatchResult {
            tile_id: *t,
            distance: *d,
            best_shift: *k,
            rank: 0,
        })
        .collect();
    crate::matcher::sort_results(&mut scored);
    Ok(TreeSearchResult {
        best: scored[0],
        comparisons: scored.len(),
        scored,
        path,
    })
}
