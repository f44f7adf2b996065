use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::HalfInt;

/// Which of the four intersections of the two bipartitions a block belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Membership {
    #[serde(rename = "AC")]
    AC,
    #[serde(rename = "AD")]
    AD,
    #[serde(rename = "BC")]
    BC,
    #[serde(rename = "BD")]
    BD,
}

impl Membership {
    pub const ALL: [Membership; 4] = [Membership::AC, Membership::AD, Membership::BC, Membership::BD];

    pub fn in_a(self) -> bool {
        matches!(self, Membership::AC | Membership::AD)
    }

    pub fn in_c(self) -> bool {
        matches!(self, Membership::AC | Membership::BC)
    }
}

/// The two bipartitions of the ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "AB")]
    AB,
    #[serde(rename = "CD")]
    CD,
}

impl Scheme {
    pub fn other(self) -> Scheme {
        match self {
            Scheme::AB => Scheme::CD,
            Scheme::CD => Scheme::AB,
        }
    }

    /// The two intersection pairs coupled first, in tree order.
    pub(crate) fn groups(self) -> [[Membership; 2]; 2] {
        use Membership::*;
        match self {
            Scheme::AB => [[AC, AD], [BC, BD]],
            Scheme::CD => [[AC, BC], [AD, BD]],
        }
    }

    /// Per-block weights of `j_X^+ - j_Y^+` for this partition (X = A or C).
    pub fn difference_weights(self, system: &BlockSystem) -> Vec<f64> {
        system
            .blocks
            .iter()
            .map(|b| {
                let first = match self {
                    Scheme::AB => b.membership.in_a(),
                    Scheme::CD => b.membership.in_c(),
                };
                if first {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    #[serde(rename = "twice_spin")]
    pub spin: HalfInt,
    pub membership: Membership,
}

/// An ordered list of block spins tagged with their subset membership.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawBlockSystem")]
pub struct BlockSystem {
    blocks: Vec<Block>,
}

#[derive(Deserialize)]
struct RawBlockSystem {
    blocks: Vec<Block>,
}

impl TryFrom<RawBlockSystem> for BlockSystem {
    type Error = crate::Error;
    fn try_from(raw: RawBlockSystem) -> Result<Self> {
        BlockSystem::new(raw.blocks)
    }
}

impl BlockSystem {
    pub fn new(blocks: Vec<Block>) -> Result<Self> {
        if blocks.is_empty() {
            return domain("a block system needs at least one block");
        }
        if let Some(b) = blocks.iter().find(|b| !b.spin.is_nonneg()) {
            return domain(format!("negative block spin {}", b.spin));
        }
        Ok(BlockSystem { blocks })
    }

    /// One block per intersection, all with the same spin, in the order AC, AD, BC, BD.
    pub fn uniform_quartet(spin: HalfInt) -> Self {
        BlockSystem {
            blocks: Membership::ALL.iter().map(|&membership| Block { spin, membership }).collect(),
        }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Product dimension; `None` on overflow.
    pub fn dimension(&self) -> Option<usize> {
        self.blocks.iter().try_fold(1usize, |acc, b| acc.checked_mul(b.spin.multiplicity()))
    }

    /// Index strides of the product basis; block 0 is the most significant digit.
    pub(crate) fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.blocks.len()];
        for i in (0..self.blocks.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.blocks[i + 1].spin.multiplicity();
        }
        strides
    }

    /// Block indices belonging to an intersection, in system order.
    pub fn indices_of(&self, membership: Membership) -> Vec<usize> {
        self.blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| b.membership == membership)
            .map(|(i, _)| i)
            .collect()
    }

    /// Sum of all block spins.
    pub fn total_block_spin(&self) -> HalfInt {
        self.blocks.iter().fold(HalfInt::ZERO, |acc, b| acc + b.spin)
    }

    /// Projections `(m_0, ..., m_{n-1})` of product state `index`.
    pub fn product_projections(&self, index: usize) -> Vec<HalfInt> {
        let strides = self.strides();
        self.blocks
            .iter()
            .zip(&strides)
            .map(|(b, &stride)| {
                let digit = (index / stride) % b.spin.multiplicity();
                HalfInt::from_twice(2 * digit as i32 - b.spin.twice())
            })
            .collect()
    }
}
