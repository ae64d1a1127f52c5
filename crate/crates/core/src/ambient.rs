//! Dense ambient-space storage shared by points and tangent vectors.
//!
//! Every manifold in this crate is embedded in a product of matrix spaces,
//! so a point or a tangent direction is a short list of dense blocks: one
//! column vector for the sphere, two matrices for the Stiefel product, one
//! symmetric matrix for the SPD cone.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct Ambient {
    blocks: Vec<DMatrix<f64>>,
}

impl Ambient {
    pub fn new(blocks: Vec<DMatrix<f64>>) -> Self {
        Self { blocks }
    }

    pub fn single(block: DMatrix<f64>) -> Self {
        Self {
            blocks: vec![block],
        }
    }

    pub fn pair(first: DMatrix<f64>, second: DMatrix<f64>) -> Self {
        Self {
            blocks: vec![first, second],
        }
    }

    pub fn from_vector(v: DVector<f64>) -> Self {
        let n = v.len();
        Self::single(DMatrix::from_column_slice(n, 1, v.as_slice()))
    }

    pub fn zeros_like(other: &Ambient) -> Self {
        Self {
            blocks: other
                .blocks
                .iter()
                .map(|b| DMatrix::zeros(b.nrows(), b.ncols()))
                .collect(),
        }
    }

    /// The `index`-th canonical basis element of the ambient space, counting
    /// entries block by block in column-major order.
    pub fn unit_like(other: &Ambient, mut index: usize) -> Self {
        let mut out = Self::zeros_like(other);
        for block in &mut out.blocks {
            let len = block.len();
            if index < len {
                block.as_mut_slice()[index] = 1.0;
                return out;
            }
            index -= len;
        }
        panic!("canonical index out of range");
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &DMatrix<f64> {
        &self.blocks[i]
    }

    pub fn into_blocks(self) -> Vec<DMatrix<f64>> {
        self.blocks
    }

    /// Sole block of a single-block value.
    pub fn into_single(mut self) -> DMatrix<f64> {
        assert_eq!(self.blocks.len(), 1, "expected a single-block value");
        self.blocks.pop().unwrap()
    }

    /// The first column of the first block, as a vector.
    pub fn as_vector(&self) -> DVector<f64> {
        self.blocks[0].column(0).into_owned()
    }

    /// Total number of scalar entries.
    pub fn len(&self) -> usize {
        self.blocks.iter().map(|b| b.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn same_shape(&self, other: &Ambient) -> bool {
        self.blocks.len() == other.blocks.len()
            && self
                .blocks
                .iter()
                .zip(&other.blocks)
                .all(|(a, b)| a.shape() == b.shape())
    }

    /// Frobenius inner product summed over blocks.
    pub fn dot(&self, other: &Ambient) -> f64 {
        debug_assert!(self.same_shape(other));
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.dot(b))
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().map(|b| b.amax()).fold(0.0, f64::max)
    }

    pub fn scale(&self, s: f64) -> Ambient {
        Ambient {
            blocks: self.blocks.iter().map(|b| b * s).collect(),
        }
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &Ambient) {
        debug_assert!(self.same_shape(x));
        for (s, xb) in self.blocks.iter_mut().zip(&x.blocks) {
            *s += xb * a;
        }
    }

    pub fn map_blocks(&self, mut f: impl FnMut(usize, &DMatrix<f64>) -> DMatrix<f64>) -> Ambient {
        Ambient {
            blocks: self
                .blocks
                .iter()
                .enumerate()
                .map(|(i, b)| f(i, b))
                .collect(),
        }
    }
}

impl Add for &Ambient {
    type Output = Ambient;
    fn add(self, rhs: &Ambient) -> Ambient {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub for &Ambient {
    type Output = Ambient;
    fn sub(self, rhs: &Ambient) -> Ambient {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Mul<f64> for &Ambient {
    type Output = Ambient;
    fn mul(self, rhs: f64) -> Ambient {
        self.scale(rhs)
    }
}

impl Neg for &Ambient {
    type Output = Ambient;
    fn neg(self) -> Ambient {
        self.scale(-1.0)
    }
}

impl From<DMatrix<f64>> for Ambient {
    fn from(m: DMatrix<f64>) -> Self {
        Ambient::single(m)
    }
}

impl From<DVector<f64>> for Ambient {
    fn from(v: DVector<f64>) -> Self {
        Ambient::from_vector(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_elements_walk_blocks_in_order() {
        let shape = Ambient::pair(DMatrix::zeros(2, 2), DMatrix::zeros(3, 1));
        assert_eq!(shape.len(), 7);
        let e4 = Ambient::unit_like(&shape, 4);
        assert_eq!(e4.block(0).sum(), 0.0);
        assert_eq!(e4.block(1)[(0, 0)], 1.0);
        let e1 = Ambient::unit_like(&shape, 1);
        assert_eq!(e1.block(0)[(1, 0)], 1.0);
    }

    #[test]
    fn arithmetic_is_blockwise() {
        let a = Ambient::pair(
            DMatrix::from_element(2, 1, 1.0),
            DMatrix::from_element(1, 2, 2.0),
        );
        let b = &a * 3.0;
        assert_eq!(a.dot(&b), 3.0 * (2.0 + 8.0));
        let c = &b - &a;
        assert_eq!(c, a.scale(2.0));
        assert_eq!((&a + &(-&a)).norm(), 0.0);
    }
}
