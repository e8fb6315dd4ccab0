use std::ops::Range;

use crate::error::{Error, Result};

/// Allowed deviation of a block sum from one.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-6;

/// A product of probability simplices: the feasible set of split vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSimplexSpace {
    block_sizes: Vec<usize>,
    offsets: Vec<usize>,
    dim: usize,
}

impl BlockSimplexSpace {
    pub fn new(block_sizes: Vec<usize>) -> Result<Self> {
        if let Some(b) = block_sizes.iter().position(|&s| s == 0) {
            return Err(Error::Constraint {
                block: b,
                reason: "empty block".into(),
            });
        }
        let mut offsets = Vec::with_capacity(block_sizes.len());
        let mut dim = 0;
        for &s in &block_sizes {
            offsets.push(dim);
            dim += s;
        }
        Ok(Self {
            block_sizes,
            offsets,
            dim,
        })
    }

    /// `n_blocks` blocks of `size` coordinates each.
    pub fn uniform(n_blocks: usize, size: usize) -> Result<Self> {
        Self::new(vec![size; n_blocks])
    }

    pub fn n_blocks(&self) -> usize {
        self.block_sizes.len()
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn block_range(&self, block: usize) -> Range<usize> {
        let start = self.offsets[block];
        start..start + self.block_sizes[block]
    }

    /// Index of the block holding coordinate `coord`.
    pub fn block_of(&self, coord: usize) -> usize {
        self.offsets.partition_point(|&o| o <= coord) - 1
    }

    pub fn blocks<'a>(&'a self, values: &'a [f64]) -> impl Iterator<Item = &'a [f64]> + 'a {
        (0..self.n_blocks()).map(move |b| &values[self.block_range(b)])
    }

    pub fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: len,
            });
        }
        Ok(())
    }

    /// Checks non-negativity and unit block sums.
    pub fn validate(&self, values: &[f64]) -> Result<()> {
        self.check_dim(values.len())?;
        for (b, block) in self.blocks(values).enumerate() {
            if let Some(v) = block.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(Error::Constraint {
                    block: b,
                    reason: format!("entry {v} is not a non-negative fraction"),
                });
            }
            let sum: f64 = block.iter().sum();
            if (sum - 1.0).abs() > FEASIBILITY_TOLERANCE {
                return Err(Error::Constraint {
                    block: b,
                    reason: format!("fractions sum to {sum}"),
                });
            }
        }
        Ok(())
    }

    /// Every block split uniformly.
    pub fn equal_split(&self) -> SplitAction {
        let mut values = Vec::with_capacity(self.dim);
        for &s in &self.block_sizes {
            values.extend(std::iter::repeat_n(1.0 / s as f64, s));
        }
        SplitAction(values)
    }
}

/// A feasible point of a [`BlockSimplexSpace`], stored as a flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitAction(Vec<f64>);

impl SplitAction {
    pub fn new(space: &BlockSimplexSpace, values: Vec<f64>) -> Result<Self> {
        space.validate(&values)?;
        Ok(Self(values))
    }

    /// Wraps values the caller has constructed to be feasible.
    pub fn from_vec_unchecked(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn distance(&self, other: &SplitAction) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}
