//! Packed binary masks and their run-length encoding.
//!
//! Bits are stored row-major: pixel `(x, y)` lives at bit index `y * width + x`,
//! packed little-endian into `u64` words. Padding bits past `width * height`
//! are always zero.
//!
//! ## RLE convention
//!
//! A mask serializes to a flat list of run lengths over the row-major bit
//! stream. Runs alternate between unset and set pixels and the list always
//! begins with an unset run, which is `0` when the first pixel is set. The
//! runs sum to `width * height`. Trailing unset pixels produce a final run;
//! an all-empty mask encodes as `[width * height]`.

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    words: Vec<u64>,
}

impl std::fmt::Debug for Mask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Mask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("area", &self.area())
            .finish()
    }
}

fn word_count(width: u32, height: u32) -> usize {
    (width as usize * height as usize).div_ceil(64)
}

impl Mask {
    pub fn empty(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Validation(format!(
                "mask dimensions must be positive, got {width}x{height}"
            )));
        }
        Ok(Mask {
            width,
            height,
            words: vec![0; word_count(width, height)],
        })
    }

    /// Builds a mask from a row-major boolean slice of length `width * height`.
    pub fn from_bools(width: u32, height: u32, bits: &[bool]) -> Result<Self> {
        let mut mask = Mask::empty(width, height)?;
        if bits.len() != mask.len() {
            return Err(Error::Validation(format!(
                "mask bit count {} does not match {width}x{height}",
                bits.len()
            )));
        }
        for (i, _) in bits.iter().enumerate().filter(|(_, b)| **b) {
            mask.words[i / 64] |= 1 << (i % 64);
        }
        Ok(mask)
    }

    /// Axis-aligned filled rectangle covering `[x0, x1) x [y0, y1)`, clipped to the image.
    pub fn rect(width: u32, height: u32, x0: i64, y0: i64, x1: i64, y1: i64) -> Result<Self> {
        let mut mask = Mask::empty(width, height)?;
        let xa = x0.clamp(0, width as i64) as u32;
        let xb = x1.clamp(0, width as i64) as u32;
        let ya = y0.clamp(0, height as i64) as u32;
        let yb = y1.clamp(0, height as i64) as u32;
        for y in ya..yb {
            for x in xa..xb {
                mask.set(x, y, true);
            }
        }
        Ok(mask)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Total pixel count, `width * height`.
    pub fn len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        if x >= self.width || y >= self.height {
            return false;
        }
        let i = y as usize * self.width as usize + x as usize;
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        assert!(x < self.width && y < self.height, "pixel out of bounds");
        let i = y as usize * self.width as usize + x as usize;
        if value {
            self.words[i / 64] |= 1 << (i % 64);
        } else {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn area(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn same_shape(&self, other: &Mask) -> bool {
        self.width == other.width && self.height == other.height
    }

    fn check_shape(&self, other: &Mask) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Geometry(format!(
                "mask dimensions differ: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }

    pub fn intersection(&self, other: &Mask) -> Result<Mask> {
        self.check_shape(other)?;
        Ok(self.zip_words(other, |a, b| a & b))
    }

    pub fn union(&self, other: &Mask) -> Result<Mask> {
        self.check_shape(other)?;
        Ok(self.zip_words(other, |a, b| a | b))
    }

    /// Pixels of `self` that are not in `other`.
    pub fn difference(&self, other: &Mask) -> Result<Mask> {
        self.check_shape(other)?;
        Ok(self.zip_words(other, |a, b| a & !b))
    }

    pub fn intersection_area(&self, other: &Mask) -> Result<u64> {
        self.check_shape(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as u64)
            .sum())
    }

    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.same_shape(other) && self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    fn zip_words(&self, other: &Mask, op: impl Fn(u64, u64) -> u64) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| op(*a, *b))
                .collect(),
        }
    }

    /// Iterates set pixels in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let width = self.width as usize;
        self.words.iter().enumerate().flat_map(move |(wi, &word)| {
            let mut rest = word;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let bit = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                let i = wi * 64 + bit;
                Some(((i % width) as u32, (i / width) as u32))
            })
        })
    }

    /// Arithmetic mean of set pixel coordinates, or `None` for an empty mask.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let (mut sx, mut sy, mut n) = (0f64, 0f64, 0u64);
        for (x, y) in self.pixels() {
            sx += x as f64;
            sy += y as f64;
            n += 1;
        }
        (n > 0).then(|| (sx / n as f64, sy / n as f64))
    }

    /// Set pixel closest (Euclidean) to `(px, py)`; ties go to the first in row-major order.
    pub fn nearest_pixel(&self, px: f64, py: f64) -> Option<(u32, u32)> {
        let mut best: Option<((u32, u32), f64)> = None;
        for (x, y) in self.pixels() {
            let d = (x as f64 - px).powi(2) + (y as f64 - py).powi(2);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some(((x, y), d));
            }
        }
        best.map(|(p, _)| p)
    }

    pub fn to_rle(&self) -> Vec<u32> {
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0u32;
        for i in 0..self.len() {
            let bit = self.words[i / 64] >> (i % 64) & 1 == 1;
            if bit != current {
                counts.push(run);
                run = 0;
                current = bit;
            }
            run += 1;
        }
        counts.push(run);
        counts
    }

    pub fn from_rle(width: u32, height: u32, counts: &[u32]) -> Result<Self> {
        let mut mask = Mask::empty(width, height)?;
        let total: u64 = counts.iter().map(|c| *c as u64).sum();
        if total != mask.len() as u64 {
            return Err(Error::Validation(format!(
                "rle runs sum to {total}, expected {}",
                mask.len()
            )));
        }
        let mut pos = 0usize;
        for (k, &run) in counts.iter().enumerate() {
            if k % 2 == 1 {
                for i in pos..pos + run as usize {
                    mask.words[i / 64] |= 1 << (i % 64);
                }
            }
            pos += run as usize;
        }
        Ok(mask)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rle_starts_with_zero_run() {
        let mut m = Mask::empty(3, 2).unwrap();
        m.set(0, 0, true);
        m.set(1, 0, true);
        m.set(2, 1, true);
        assert_eq!(m.to_rle(), vec![0, 2, 3, 1]);
        let empty = Mask::empty(4, 4).unwrap();
        assert_eq!(empty.to_rle(), vec![16]);
    }

    #[test]
    fn rle_rejects_wrong_total() {
        assert!(Mask::from_rle(2, 2, &[1, 2]).is_err());
    }

    #[test]
    fn zero_dimensions_rejected() {
        assert!(Mask::empty(0, 4).is_err());
    }

    #[test]
    fn rect_area_and_centroid() {
        let m = Mask::rect(20, 20, 2, 3, 7, 6).unwrap();
        assert_eq!(m.area(), 15);
        assert_eq!(m.centroid(), Some((4.0, 4.0)));
    }

    #[test]
    fn mismatched_shapes_are_geometry_errors() {
        let a = Mask::empty(4, 4).unwrap();
        let b = Mask::empty(4, 5).unwrap();
        assert!(matches!(a.intersection(&b), Err(Error::Geometry(_))));
    }

    proptest! {
        #[test]
        fn rle_round_trip(w in 1u32..40, h in 1u32..40, seed in any::<u64>()) {
            let n = (w * h) as usize;
            let bits: Vec<bool> = (0..n).map(|i| (seed.rotate_left(i as u32 % 64) ^ i as u64).is_multiple_of(3)).collect();
            let m = Mask::from_bools(w, h, &bits).unwrap();
            let back = Mask::from_rle(w, h, &m.to_rle()).unwrap();
            prop_assert_eq!(&back, &m);
            prop_assert_eq!(m.area() as usize, bits.iter().filter(|b| **b).count());
        }
    }
}
