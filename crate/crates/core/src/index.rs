//! Persisted tile index (`SEMIDX 1`).
//!
//! ```text
//! SEMIDX 1
//! GRID cols rows side stride x0 y0
//! LAYOUT sectors rings radius_1 sigma_1 ... radius_r sigma_r
//! CONCEPTS k
//! id name vertical
//! ACTIVE c1 c2 ...
//! TILE id col row cx cy side empty
//! GMM tile concept m
//! COMP weight mean_x mean_y cov_xx cov_xy cov_yy      (m lines)
//! VEC tile v1 v2 ...
//! PRES tile bits
//! TREE branches leaf_capacity seed                     (optional)
//! NODE id layer parent|- tile_ids...
//! ```

use std::fmt::Write;

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::map_model::format::{expect_header, num, Lines};
use crate::map_model::{validate_concepts, ConceptGmm, ConceptLabel, GaussianComponent, TileGrid};
use crate::semantic_tree::{SemanticTree, TreeNode, TreeParams};
use crate::ssl_descriptor::{PoolingLayout, PresenceVector, SslDescriptor, NORTH};

/// A tile as stored in the index.
#[derive(Debug, Clone, PartialEq)]
pub struct TileRecord {
    pub id: usize,
    pub grid: (usize, usize),
    pub center: Point,
    pub side: f64,
    pub empty: bool,
    /// One mixture per map concept.
    pub gmms: Vec<ConceptGmm>,
    pub descriptor: SslDescriptor,
}

impl TileRecord {
    /// A record carrying only a descriptor; used by tests and benchmarks.
    pub fn bare(id: usize, descriptor: SslDescriptor) -> Self {
        Self {
            id,
            grid: (id, 0),
            center: Point::new(id as f64, 0.0),
            side: 0.0,
            empty: descriptor.presence.count() == 0,
            gmms: Vec::new(),
            descriptor,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TileIndex {
    pub concepts: Vec<ConceptLabel>,
    /// Concept ids carried by the descriptors, in block order.
    pub active: Vec<usize>,
    pub layout: PoolingLayout,
    pub grid: TileGrid,
    pub tiles: Vec<TileRecord>,
    pub tree: Option<SemanticTree>,
}

impl TileIndex {
    pub fn tile(&self, id: usize) -> Option<&TileRecord> {
        self.tiles.get(id).filter(|t| t.id == id).or_else(|| self.tiles.iter().find(|t| t.id == id))
    }

    pub fn descriptor(&self, id: usize) -> Option<&SslDescriptor> {
        self.tile(id).map(|t| &t.descriptor)
    }
}

pub fn write_index(index: &TileIndex) -> String {
    let mut out = String::from("SEMIDX 1\n");
    let g = &index.grid;
    writeln!(out, "GRID {} {} {} {} {} {}", g.cols, g.rows, g.side, g.stride, g.first_center.x, g.first_center.y).unwrap();
    write!(out, "LAYOUT {} {}", index.layout.n_sectors, index.layout.n_rings()).unwrap();
    for (r, s) in index.layout.ring_radii.iter().zip(&index.layout.sigmas) {
        write!(out, " {r} {s}").unwrap();
    }
    out.push('\n');
    writeln!(out, "CONCEPTS {}", index.concepts.len()).unwrap();
    for c in &index.concepts {
        writeln!(out, "{} {} {}", c.id, c.name, u8::from(c.vertical)).unwrap();
    }
    let active: Vec<String> = index.active.iter().map(|c| c.to_string()).collect();
    writeln!(out, "ACTIVE {}", active.join(" ")).unwrap();
    for t in &index.tiles {
        writeln!(out, "TILE {} {} {} {} {} {} {}", t.id, t.grid.0, t.grid.1, t.center.x, t.center.y, t.side, u8::from(t.empty)).unwrap();
        for (c, gmm) in t.gmms.iter().enumerate() {
            if gmm.is_empty() {
                continue;
            }
            writeln!(out, "GMM {} {} {}", t.id, c, gmm.len()).unwrap();
            for (w, g) in gmm.weights.iter().zip(&gmm.components) {
                writeln!(out, "COMP {w} {} {} {} {} {}", g.mean.x, g.mean.y, g.cov[(0, 0)], g.cov[(0, 1)], g.cov[(1, 1)]).unwrap();
            }
        }
        write!(out, "VEC {}", t.id).unwrap();
        for v in &t.descriptor.values {
            write!(out, " {v}").unwrap();
        }
        out.push('\n');
        writeln!(out, "PRES {} {}", t.id, t.descriptor.presence.to_bitstring()).unwrap();
    }
    if let Some(tree) = &index.tree {
        let p = tree.params;
        writeln!(out, "TREE {} {} {}", p.branches, p.leaf_capacity, p.seed).unwrap();
        for n in &tree.nodes {
            let parent = n.parent.map_or_else(|| "-".to_string(), |p| p.to_string());
            write!(out, "NODE {} {} {}", n.id, n.layer, parent).unwrap();
            for t in &n.tiles {
                write!(out, " {t}").unwrap();
            }
            out.push('\n');
        }
    }
    out
}

fn floats(line: usize, toks: &[&str], what: &str) -> Result<Vec<f64>> {
    toks.iter().map(|t| num(line, t, what)).collect()
}

pub fn parse_index(text: &str) -> Result<TileIndex> {
    let mut lines = Lines::new(text);
    expect_header(&mut lines, "SEMIDX")?;
    let mut grid = None;
    let mut layout = None;
    let mut concepts: Vec<ConceptLabel> = Vec::new();
    let mut active = Vec::new();
    let mut tiles: Vec<TileRecord> = Vec::new();
    let mut tree_params = None;
    let mut nodes = Vec::new();

    while let Some((line, toks)) = lines.next() {
        let err = |msg: &str| Error::parse(line, msg);
        match toks[0] {
            "GRID" => {
                if toks.len() != 7 {
                    return Err(err("GRID needs cols rows side stride x0 y0"));
                }
                let v = floats(line, &toks[3..], "grid value")?;
                grid = Some(TileGrid {
                    cols: num(line, toks[1], "cols")?,
                    rows: num(line, toks[2], "rows")?,
                    side: v[0],
                    stride: v[1],
                    first_center: Point::new(v[2], v[3]),
                });
            }
            "LAYOUT" => {
                let sectors: usize = num(line, toks.get(1).copied().unwrap_or(""), "sector count")?;
                let rings: usize = num(line, toks.get(2).copied().unwrap_or(""), "ring count")?;
                if toks.len() != 3 + 2 * rings {
                    return Err(err("LAYOUT needs a radius and sigma per ring"));
                }
                let v = floats(line, &toks[3..], "ring parameter")?;
                let radii = v.iter().step_by(2).copied().collect();
                let sigmas = v.iter().skip(1).step_by(2).copied().collect();
                layout = Some(PoolingLayout::new(sectors, radii, sigmas).map_err(|e| Error::parse(line, e))?);
            }
            "CONCEPTS" => {
                let k: usize = num(line, toks.get(1).copied().unwrap_or(""), "concept count")?;
                for _ in 0..k {
                    let (line, toks) = lines.next().ok_or_else(|| Error::parse(line, "truncated concept table"))?;
                    if toks.len() < 3 {
                        return Err(Error::parse(line, "concept line needs `id name vertical`"));
                    }
                    concepts.push(ConceptLabel::new(
                        num(line, toks[0], "concept id")?,
                        toks[1..toks.len() - 1].join(" "),
                        *toks.last().unwrap() == "1",
                    ));
                }
                validate_concepts(&concepts)?;
            }
            "ACTIVE" => {
                active = toks[1..].iter().map(|t| num(line, t, "concept id")).collect::<Result<_>>()?;
            }
            "TILE" => {
                if toks.len() != 8 {
                    return Err(err("TILE needs id col row cx cy side empty"));
                }
                let layout = layout.as_ref().ok_or_else(|| err("TILE before LAYOUT"))?;
                let v = floats(line, &toks[4..7], "tile value")?;
                let id: usize = num(line, toks[1], "tile id")?;
                let blocks = active.len();
                tiles.push(TileRecord {
                    id,
                    grid: (num(line, toks[2], "col")?, num(line, toks[3], "row")?),
                    center: Point::new(v[0], v[1]),
                    side: v[2],
                    empty: toks[7] == "1",
                    gmms: vec![ConceptGmm::default(); concepts.len()],
                    descriptor: SslDescriptor {
                        concepts: active.clone(),
                        n_rings: layout.n_rings(),
                        n_sectors: layout.n_sectors,
                        values: vec![0.0; blocks * layout.block_len()],
                        presence: PresenceVector(vec![false; blocks]),
                        origin: Point::new(v[0], v[1]),
                        orientation: NORTH,
                    },
                });
            }
            "GMM" => {
                let tile: usize = num(line, toks.get(1).copied().unwrap_or(""), "tile id")?;
                let concept: usize = num(line, toks.get(2).copied().unwrap_or(""), "concept id")?;
                let m: usize = num(line, toks.get(3).copied().unwrap_or(""), "component count")?;
                let rec = tiles.last_mut().filter(|t| t.id == tile).ok_or_else(|| err("GMM does not follow its TILE"))?;
                if concept >= rec.gmms.len() {
                    return Err(err("GMM concept is not declared"));
                }
                let mut gmm = ConceptGmm::default();
                for _ in 0..m {
                    let (line, toks) = lines.next().ok_or_else(|| Error::parse(line, "truncated GMM"))?;
                    if toks.len() != 7 || toks[0] != "COMP" {
                        return Err(Error::parse(line, "expected COMP weight mx my cxx cxy cyy"));
                    }
                    let v = floats(line, &toks[1..], "component value")?;
                    gmm.weights.push(v[0]);
                    gmm.components.push(GaussianComponent::new(Vector2::new(v[1], v[2]), Matrix2::new(v[3], v[4], v[4], v[5])));
                }
                rec.gmms[concept] = gmm;
            }
            "VEC" => {
                let tile: usize = num(line, toks.get(1).copied().unwrap_or(""), "tile id")?;
                let rec = tiles.last_mut().filter(|t| t.id == tile).ok_or_else(|| err("VEC does not follow its TILE"))?;
                let v = floats(line, &toks[2..], "descriptor value")?;
                if v.len() != rec.descriptor.values.len() {
                    return Err(err("descriptor length does not match layout and active concepts"));
                }
                rec.descriptor.values = v;
            }
            "PRES" => {
                let tile: usize = num(line, toks.get(1).copied().unwrap_or(""), "tile id")?;
                let rec = tiles.last_mut().filter(|t| t.id == tile).ok_or_else(|| err("PRES does not follow its TILE"))?;
                let bits = toks.get(2).and_then(|b| PresenceVector::from_bitstring(b)).unwrap_or_default();
                if bits.len() != rec.descriptor.presence.len() {
                    return Err(err("presence bits do not match the active concepts"));
                }
                rec.descriptor.presence = bits;
            }
            "TREE" => {
                if toks.len() != 4 {
                    return Err(err("TREE needs branches leaf_capacity seed"));
                }
                tree_params = Some(TreeParams {
                    branches: num(line, toks[1], "branches")?,
                    leaf_capacity: num(line, toks[2], "leaf capacity")?,
                    seed: num(line, toks[3], "seed")?,
                });
            }
            "NODE" => {
                if toks.len() < 4 {
                    return Err(err("NODE needs id layer parent"));
                }
                nodes.push(TreeNode {
                    id: num(line, toks[1], "node id")?,
                    layer: num(line, toks[2], "layer")?,
                    parent: if toks[3] == "-" { None } else { Some(num(line, toks[3], "parent")?) },
                    children: vec![],
                    tiles: toks[4..].iter().map(|t| num(line, t, "tile id")).collect::<Result<_>>()?,
                });
            }
            other => return Err(err(&format!("unknown record `{other}`"))),
        }
    }
    let grid = grid.ok_or_else(|| Error::Validation("index has no GRID record".into()))?;
    let layout = layout.ok_or_else(|| Error::Validation("index has no LAYOUT record".into()))?;
    if let Some(c) = active.iter().find(|c| **c >= concepts.len()) {
        return Err(Error::Validation(format!("active concept {c} is not declared")));
    }
    let tree = match tree_params {
        Some(p) => Some(SemanticTree::from_nodes(p, nodes)?),
        None if nodes.is_empty() => None,
        None => return Err(Error::Validation("NODE records without a TREE header".into())),
    };
    Ok(TileIndex {
        concepts,
        active,
        layout,
        grid,
        tiles,
        tree,
    })
}
