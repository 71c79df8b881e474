//! One-dimensional node hierarchy and hat basis.
//!
//! Level 0 holds the single center node 0.5 with a constant basis. Level 1
//! holds the two boundary nodes 0 and 1 with half-width hats. Every level
//! `l >= 2` holds the odd positions `i` in `1..2^l` at `i * 2^-l` with hats
//! of half-width `2^-l`. Each new basis function vanishes at every node of a
//! coarser level, which is what makes one-pass hierarchization possible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Deepest 1D level a node may have. Positions are packed into 27 bits.
pub const MAX_LEVEL: u8 = 26;

/// Multi-index node identifier: per-dimension level and position.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId {
    pub level: Vec<u8>,
    pub index: Vec<u32>,
}

impl NodeId {
    pub fn new(level: Vec<u8>, index: Vec<u32>) -> Result<Self> {
        if level.len() != index.len() {
            return Err(Error::DimensionMismatch {
                expected: level.len(),
                got: index.len(),
            });
        }
        for (&l, &i) in level.iter().zip(&index) {
            validate(l, i)?;
        }
        Ok(Self { level, index })
    }

    pub fn root(dim: usize) -> Self {
        Self {
            level: vec![0; dim],
            index: vec![0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.level.len()
    }

    pub fn level_sum(&self) -> usize {
        self.level.iter().map(|&l| l as usize).sum()
    }

    /// Coordinates of the node in the unit cube.
    pub fn coordinates(&self) -> Vec<f64> {
        self.level
            .iter()
            .zip(&self.index)
            .map(|(&l, &i)| coordinate(l, i))
            .collect()
    }
}

pub fn is_valid(level: u8, index: u32) -> bool {
    match level {
        0 => index == 0,
        1 => index <= 1,
        l if l <= MAX_LEVEL => index % 2 == 1 && index < (1u32 << l),
        _ => false,
    }
}

pub fn validate(level: u8, index: u32) -> Result<()> {
    if is_valid(level, index) {
        Ok(())
    } else {
        Err(Error::InvalidNode { level, index })
    }
}

/// Unit-interval coordinate of a valid 1D node.
#[inline]
pub fn coordinate(level: u8, index: u32) -> f64 {
    match level {
        0 => 0.5,
        1 => index as f64,
        l => index as f64 / (1u64 << l) as f64,
    }
}

/// Hat basis value of a 1D node at `x`, for a node already known to be valid.
#[inline]
pub(crate) fn hat(level: u8, index: u32, x: f64) -> f64 {
    match level {
        0 => 1.0,
        1 => {
            if index == 0 {
                (1.0 - 2.0 * x).max(0.0)
            } else {
                (2.0 * x - 1.0).max(0.0)
            }
        }
        l => {
            let scale = (1u64 << l) as f64;
            (1.0 - (x * scale - index as f64).abs()).max(0.0)
        }
    }
}

/// Value of the 1D basis function of node `(level, index)` at `x` in `[0, 1]`.
pub fn basis_value(level: u8, index: u32, x: f64) -> Result<f64> {
    validate(level, index)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfDomain { point: vec![x] });
    }
    Ok(hat(level, index, x))
}

/// Integral of the 1D basis function over `[0, 1]`.
#[inline]
pub fn basis_integral(level: u8) -> f64 {
    match level {
        0 => 1.0,
        1 => 0.25,
        l => 1.0 / (1u64 << l) as f64,
    }
}

/// Unique hierarchical parent of a 1D node; `None` for the root.
pub fn parent(level: u8, index: u32) -> Option<(u8, u32)> {
    match level {
        0 => None,
        1 => Some((0, 0)),
        2 => Some((1, if index == 1 { 0 } else { 1 })),
        l => {
            let down = (index - 1) / 2;
            let up = (index + 1) / 2;
            Some((l - 1, if down % 2 == 1 { down } else { up }))
        }
    }
}

/// Hierarchical children of a 1D node (left, right). Boundary nodes have one.
pub fn children(level: u8, index: u32) -> [Option<(u8, u32)>; 2] {
    match level {
        0 => [Some((1, 0)), Some((1, 1))],
        1 => {
            if index == 0 {
                [Some((2, 1)), None]
            } else {
                [None, Some((2, 3))]
            }
        }
        l if l < MAX_LEVEL => [Some((l + 1, 2 * index - 1)), Some((l + 1, 2 * index + 1))],
        _ => [None, None],
    }
}

/// Node sitting at a dyadic coordinate `numerator * 2^-level`.
pub(crate) fn node_at(numerator: u64, level: u8) -> (u8, u32) {
    if numerator == 0 {
        return (1, 0);
    }
    let denom = 1u64 << level;
    if numerator == denom {
        return (1, 1);
    }
    let shift = numerator.trailing_zeros().min(level as u32);
    let (num, lvl) = (numerator >> shift, level - shift as u8);
    if lvl == 1 {
        (0, 0)
    } else {
        (lvl, num as u32)
    }
}

/// The two nodes adjacent to a level >= 2 node on the coarser grid; both are
/// ancestors of it.
pub(crate) fn neighbors(level: u8, index: u32) -> [(u8, u32); 2] {
    debug_assert!(level >= 2);
    [
        node_at(index as u64 - 1, level),
        node_at(index as u64 + 1, level),
    ]
}

#[inline]
pub(crate) fn pack(level: u8, index: u32) -> u32 {
    (index << 5) | level as u32
}

#[inline]
pub(crate) fn unpack(code: u32) -> (u8, u32) {
    ((code & 31) as u8, code >> 5)
}

/// Number of nodes first appearing on a level: 1, 2, 2, 4, 8, ...
pub fn nodes_on_level(level: u8) -> u64 {
    match level {
        0 => 1,
        1 => 2,
        l => 1u64 << (l - 1),
    }
}
