//! Subsets of a product grid `X × Y`, stored as a bit mask.

use crate::error::{Error, Result};

/// Largest grid a [`CellSet`] can address.
pub const MAX_CELLS: usize = 128;

/// A set of cells `(x, y)` with cell index `x * cols + y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellSet {
    rows: usize,
    cols: usize,
    bits: u128,
}

impl CellSet {
    pub fn empty(rows: usize, cols: usize) -> Result<Self> {
        if rows * cols > MAX_CELLS {
            return Err(Error::SizeLimit {
                cells: rows * cols,
                limit: MAX_CELLS,
            });
        }
        Ok(CellSet { rows, cols, bits: 0 })
    }

    pub fn full(rows: usize, cols: usize) -> Result<Self> {
        let mut s = Self::empty(rows, cols)?;
        s.bits = low_bits(rows * cols);
        Ok(s)
    }

    pub fn from_bits(rows: usize, cols: usize, bits: u128) -> Result<Self> {
        let mut s = Self::empty(rows, cols)?;
        s.bits = bits & low_bits(rows * cols);
        Ok(s)
    }

    pub fn from_cells(rows: usize, cols: usize, cells: &[(usize, usize)]) -> Result<Self> {
        let mut s = Self::empty(rows, cols)?;
        for &(x, y) in cells {
            if x >= rows || y >= cols {
                return Err(Error::InvalidParameter(format!(
                    "cell ({x}, {y}) outside a {rows}x{cols} grid"
                )));
            }
            s.insert(x, y);
        }
        Ok(s)
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> bool) -> Result<Self> {
        let mut s = Self::empty(rows, cols)?;
        for x in 0..rows {
            for y in 0..cols {
                if f(x, y) {
                    s.insert(x, y);
                }
            }
        }
        Ok(s)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bits(&self) -> u128 {
        self.bits
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.bits >> (x * self.cols + y) & 1 == 1
    }

    pub fn insert(&mut self, x: usize, y: usize) {
        self.bits |= 1 << (x * self.cols + y);
    }

    pub fn remove(&mut self, x: usize, y: usize) {
        self.bits &= !(1 << (x * self.cols + y));
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn is_subset(&self, other: &CellSet) -> bool {
        self.bits & !other.bits == 0
    }

    pub fn union(&self, other: &CellSet) -> CellSet {
        CellSet {
            bits: self.bits | other.bits,
            ..*self
        }
    }

    pub fn intersection(&self, other: &CellSet) -> CellSet {
        CellSet {
            bits: self.bits & other.bits,
            ..*self
        }
    }

    pub fn complement(&self) -> CellSet {
        CellSet {
            bits: !self.bits & low_bits(self.rows * self.cols),
            ..*self
        }
    }

    pub fn transpose(&self) -> CellSet {
        let mut t = CellSet {
            rows: self.cols,
            cols: self.rows,
            bits: 0,
        };
        for (x, y) in self.iter() {
            t.insert(y, x);
        }
        t
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let cols = self.cols;
        let mut bits = self.bits;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some((i / cols, i % cols))
        })
    }

    /// Bit mask of rows that meet the set.
    pub fn row_projection(&self) -> u128 {
        self.iter().fold(0, |acc, (x, _)| acc | 1 << x)
    }

    /// Bit mask of columns that meet the set.
    pub fn col_projection(&self) -> u128 {
        self.iter().fold(0, |acc, (_, y)| acc | 1 << y)
    }
}

pub(crate) fn low_bits(n: usize) -> u128 {
    if n >= 128 {
        u128::MAX
    } else {
        (1u128 << n) - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_operations() {
        let s = CellSet::from_cells(2, 3, &[(0, 1), (1, 2)]).unwrap();
        assert!(s.contains(0, 1) && s.contains(1, 2) && !s.contains(0, 0));
        assert_eq!(s.len(), 2);
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
        assert_eq!(s.complement().len(), 4);
        assert_eq!(s.row_projection(), 0b11);
        assert_eq!(s.col_projection(), 0b110);
        let t = s.transpose();
        assert_eq!(t.iter().collect::<Vec<_>>(), vec![(1, 0), (2, 1)]);
        assert!(CellSet::from_cells(2, 2, &[(2, 0)]).is_err());
        assert!(CellSet::empty(12, 11).is_err());
    }
}
