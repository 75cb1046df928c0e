//! Variable subsets `u ⊆ [1:s]` and partitions of `[1:s]` into disjoint blocks.
//!
//! Subsets are stored as a 64-bit mask, so the dimension is limited to
//! [`MAX_DIM`]. Indices are 1-based at every public boundary (`x1 … xs`);
//! bit `i - 1` of the mask represents variable `i`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Largest supported dimension.
pub const MAX_DIM: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IndexError {
    #[error("dimension {0} is outside the supported range 1..={MAX_DIM}")]
    InvalidDimension(usize),
    #[error("variable index {index} is outside [1:{dim}]")]
    OutOfRange { index: usize, dim: usize },
    #[error("block {position} is empty")]
    EmptyBlock { position: usize },
    #[error("blocks {first} and {second} overlap on index {index}")]
    Overlap {
        index: usize,
        first: VariableSubset,
        second: VariableSubset,
    },
    #[error("blocks do not cover [1:{dim}]; missing {missing}")]
    Gap { missing: VariableSubset, dim: usize },
    #[error("cannot parse {text:?}: {reason}")]
    Parse { text: String, reason: String },
}

fn check_dim(dim: usize) -> Result<(), IndexError> {
    if dim == 0 || dim > MAX_DIM {
        Err(IndexError::InvalidDimension(dim))
    } else {
        Ok(())
    }
}

/// Mask with bits `0..dim` set, i.e. the full set `[1:dim]`.
pub(crate) fn full_mask(dim: usize) -> u64 {
    if dim >= 64 {
        u64::MAX
    } else {
        (1u64 << dim) - 1
    }
}

/// A set of 1-based variable indices.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct VariableSubset(u64);

impl VariableSubset {
    pub const EMPTY: VariableSubset = VariableSubset(0);

    pub fn from_mask(mask: u64) -> Self {
        VariableSubset(mask)
    }

    /// `[1:dim]`.
    pub fn full(dim: usize) -> Result<Self, IndexError> {
        check_dim(dim)?;
        Ok(VariableSubset(full_mask(dim)))
    }

    pub fn singleton(index: usize) -> Result<Self, IndexError> {
        if index == 0 || index > MAX_DIM {
            return Err(IndexError::OutOfRange {
                index,
                dim: MAX_DIM,
            });
        }
        Ok(VariableSubset(1 << (index - 1)))
    }

    /// Builds a subset from 1-based indices. Duplicates collapse.
    pub fn from_indices<I>(indices: I) -> Result<Self, IndexError>
    where
        I: IntoIterator<Item = usize>,
    {
        let mut mask = 0u64;
        for index in indices {
            mask |= Self::singleton(index)?.0;
        }
        Ok(VariableSubset(mask))
    }

    pub fn mask(self) -> u64 {
        self.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, index: usize) -> bool {
        (1..=MAX_DIM).contains(&index) && self.0 & (1 << (index - 1)) != 0
    }

    pub fn insert(self, index: usize) -> Result<Self, IndexError> {
        Ok(VariableSubset(self.0 | Self::singleton(index)?.0))
    }

    pub fn union(self, other: Self) -> Self {
        VariableSubset(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        VariableSubset(self.0 & other.0)
    }

    pub fn difference(self, other: Self) -> Self {
        VariableSubset(self.0 & !other.0)
    }

    pub fn is_disjoint(self, other: Self) -> bool {
        self.0 & other.0 == 0
    }

    pub fn is_subset_of(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    /// Smallest index, if any.
    pub fn first(self) -> Option<usize> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as usize + 1)
    }

    /// Largest index, if any.
    pub fn last(self) -> Option<usize> {
        (self.0 != 0).then(|| 64 - self.0.leading_zeros() as usize)
    }

    /// Indices in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                return None;
            }
            let bit = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            Some(bit + 1)
        })
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }

    /// Checks that every index lies in `[1:dim]`.
    pub fn check_within(self, dim: usize) -> Result<(), IndexError> {
        check_dim(dim)?;
        match self.last() {
            Some(max) if max > dim => Err(IndexError::OutOfRange { index: max, dim }),
            _ => Ok(()),
        }
    }

    /// `[1:dim] \ self`.
    pub fn complement(self, dim: usize) -> Result<Self, IndexError> {
        self.check_within(dim)?;
        Ok(VariableSubset(full_mask(dim) & !self.0))
    }

    /// All subsets of `self`, in increasing mask order (the empty set first).
    pub fn subsets(self) -> impl Iterator<Item = VariableSubset> {
        let full = self.0;
        let mut next = Some(0u64);
        std::iter::from_fn(move || {
            let current = next?;
            next = if current == full {
                None
            } else {
                Some((current.wrapping_sub(full)) & full)
            };
            Some(VariableSubset(current))
        })
    }
}

/// Complement of `u` in `[1:dim]`.
pub fn complement(u: VariableSubset, dim: usize) -> Result<VariableSubset, IndexError> {
    u.complement(dim)
}

impl fmt::Display for VariableSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, index) in self.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{index}")?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for VariableSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for VariableSubset {
    type Err = IndexError;

    /// Parses `{2,4}`. Braces are optional; `{}` is the empty set.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let parse_err = |reason: &str| IndexError::Parse {
            text: text.to_string(),
            reason: reason.to_string(),
        };
        let trimmed = text.trim();
        let inner = match (trimmed.strip_prefix('{'), trimmed.ends_with('}')) {
            (Some(rest), true) => &rest[..rest.len() - 1],
            (None, false) => trimmed,
            _ => return Err(parse_err("unbalanced braces")),
        };
        if inner.trim().is_empty() {
            return Ok(VariableSubset::EMPTY);
        }
        let mut mask = 0u64;
        for item in inner.split(',') {
            let index: usize = item
                .trim()
                .parse()
                .map_err(|_| parse_err(&format!("{:?} is not a variable index", item.trim())))?;
            let bit = VariableSubset::singleton(index)?;
            if mask & bit.0 != 0 {
                return Err(parse_err(&format!("index {index} repeated")));
            }
            mask |= bit.0;
        }
        Ok(VariableSubset(mask))
    }
}

impl Serialize for VariableSubset {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for VariableSubset {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let indices = Vec::<usize>::deserialize(deserializer)?;
        VariableSubset::from_indices(indices).map_err(serde::de::Error::custom)
    }
}

/// `m` disjoint nonempty blocks covering `[1:s]`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    dim: usize,
    blocks: Vec<VariableSubset>,
}

impl Partition {
    /// Validates disjointness, nonemptiness and coverage. Blocks are stored sorted
    /// by their smallest element.
    pub fn new(blocks: Vec<VariableSubset>, dim: usize) -> Result<Self, IndexError> {
        check_dim(dim)?;
        let mut seen = VariableSubset::EMPTY;
        for (position, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(IndexError::EmptyBlock { position });
            }
            block.check_within(dim)?;
            let shared = seen.intersection(*block);
            if let Some(index) = shared.first() {
                let first = *blocks[..position]
                    .iter()
                    .find(|b| b.contains(index))
                    .expect("overlapping index belongs to an earlier block");
                return Err(IndexError::Overlap {
                    index,
                    first,
                    second: *block,
                });
            }
            seen = seen.union(*block);
        }
        let missing = seen.complement(dim)?;
        if !missing.is_empty() {
            return Err(IndexError::Gap { missing, dim });
        }
        let mut blocks = blocks;
        blocks.sort_by_key(|b| b.first());
        Ok(Partition { dim, blocks })
    }

    /// The single block `[1:dim]`.
    pub fn trivial(dim: usize) -> Result<Self, IndexError> {
        Ok(Partition {
            dim,
            blocks: vec![VariableSubset::full(dim)?],
        })
    }

    /// `{1}|{2}|…|{dim}`.
    pub fn singletons(dim: usize) -> Result<Self, IndexError> {
        check_dim(dim)?;
        let blocks = (1..=dim)
            .map(|j| VariableSubset::singleton(j).expect("index within MAX_DIM"))
            .collect();
        Ok(Partition { dim, blocks })
    }

    /// `{u, -u}` for a proper nonempty subset `u`; the trivial partition when `u = [1:dim]`.
    pub fn split(u: VariableSubset, dim: usize) -> Result<Self, IndexError> {
        let rest = u.complement(dim)?;
        if rest.is_empty() {
            return Partition::new(vec![u], dim);
        }
        Partition::new(vec![u, rest], dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[VariableSubset] {
        &self.blocks
    }

    /// Number of blocks `m`.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Parses `{1}|{2,4}|{3,5}` against dimension `dim`.
    pub fn parse(text: &str, dim: usize) -> Result<Self, IndexError> {
        let blocks = text
            .split('|')
            .map(str::parse)
            .collect::<Result<Vec<VariableSubset>, _>>()?;
        Partition::new(blocks, dim)
    }

    /// True when every block of `self` lies inside some block of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        self.dim == coarser.dim
            && self
                .blocks
                .iter()
                .all(|b| coarser.blocks.iter().any(|c| b.is_subset_of(*c)))
    }
}

/// Free-function form of [`Partition::new`].
pub fn validate_partition(
    blocks: Vec<VariableSubset>,
    dim: usize,
) -> Result<Partition, IndexError> {
    Partition::new(blocks, dim)
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, block) in self.blocks.iter().enumerate() {
            if k > 0 {
                f.write_str("|")?;
            }
            write!(f, "{block}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Partition({self}; s={})", self.dim)
    }
}

impl Serialize for Partition {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

/// Candidate blocks tested at rank `r`: `v ∪ {r}` for every `v ⊆ [1:r-1] \ excluded`.
///
/// Ordered by the size of `v`, then lexicographically over the allowed indices,
/// e.g. `r = 4` with nothing excluded yields
/// `{4},{1,4},{2,4},{3,4},{1,2,4},{1,3,4},{2,3,4},{1,2,3,4}`.
pub fn enumerate_candidates(r: usize, excluded: VariableSubset) -> Vec<VariableSubset> {
    assert!(
        (1..=MAX_DIM).contains(&r),
        "rank {r} is outside 1..={MAX_DIM}"
    );
    let below = VariableSubset(full_mask(r - 1));
    Candidates::new(r, below.difference(excluded)).collect()
}

/// Lazy form of [`enumerate_candidates`] over an arbitrary set of allowed
/// companions: yields `head ∪ v` for `v ⊆ allowed`, by size then lexicographically.
#[derive(Debug, Clone)]
pub struct Candidates {
    head: VariableSubset,
    allowed: Vec<usize>,
    // positions into `allowed` of the current combination; None when exhausted
    picked: Option<Vec<usize>>,
}

impl Candidates {
    pub fn new(head: usize, allowed: VariableSubset) -> Self {
        Candidates {
            head: VariableSubset::singleton(head).expect("head index within MAX_DIM"),
            allowed: allowed
                .difference(VariableSubset::singleton(head).unwrap())
                .to_vec(),
            picked: Some(Vec::new()),
        }
    }

    fn advance(&mut self) {
        let Some(picked) = self.picked.as_mut() else {
            return;
        };
        let n = self.allowed.len();
        let k = picked.len();
        // rightmost position that can still move right
        let mut i = k;
        while i > 0 {
            i -= 1;
            if picked[i] < n - k + i {
                picked[i] += 1;
                for j in i + 1..k {
                    picked[j] = picked[j - 1] + 1;
                }
                return;
            }
        }
        if k < n {
            *picked = (0..k + 1).collect();
        } else {
            self.picked = None;
        }
    }
}

impl Iterator for Candidates {
    type Item = VariableSubset;

    fn next(&mut self) -> Option<VariableSubset> {
        let picked = self.picked.as_ref()?;
        let u = picked.iter().fold(self.head, |acc, &p| {
            acc.union(VariableSubset(1 << (self.allowed[p] - 1)))
        });
        self.advance();
        Some(u)
    }
}
