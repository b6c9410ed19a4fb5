//! Scalar abstraction shared by every numeric module.
//!
//! All math is written against [`Scalar`], so the same network, loss and
//! environment code runs in `f32` or `f64`. Gradient checks and the
//! acceptance tolerances assume `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type usable throughout the crate.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + LinalgScalar
    + ScalarOperand
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Tag written into checkpoints so a file is only loaded as the type it was saved from.
    const DTYPE: &'static str;

    /// Lossless for `f64`, rounding for `f32`.
    fn of(v: f64) -> Self;

    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    const DTYPE: &'static str = "f32";

    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    const DTYPE: &'static str = "f64";

    #[inline]
    fn of(v: f64) -> Self {
        v
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// Index of the largest element; ties go to the lowest index. NaN never wins.
pub fn argmax<T: Scalar>(values: &[T]) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

pub(crate) fn l2_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Cosine similarity; zero when either vector has zero norm.
pub fn cosine_similarity<T: Scalar>(a: &[T], b: &[T]) -> T {
    let na = l2_norm(a);
    let nb = l2_norm(b);
    if na == T::zero() || nb == T::zero() {
        return T::zero();
    }
    let dot: T = a.iter().zip(b).map(|(&x, &y)| x * y).sum();
    dot / (na * nb)
}

/// Euclidean distance between equal-length vectors.
pub fn euclidean_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<T>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[0.2_f64, 0.5, 0.5]), Some(1));
        assert_eq!(argmax(&[1.0_f32, 1.0]), Some(0));
        assert_eq!(argmax::<f64>(&[]), None);
        assert_eq!(argmax(&[f64::NAN, -1.0]), Some(1));
    }

    #[test]
    fn cosine_of_zero_vector_is_zero() {
        assert_eq!(cosine_similarity(&[0.0_f64, 0.0], &[1.0, 2.0]), 0.0);
        let c = cosine_similarity(&[1.0_f64, 0.0], &[2.0, 0.0]);
        assert!((c - 1.0).abs() < 1e-15);
    }

    #[test]
    fn distance_of_three_four_five() {
        assert_eq!(euclidean_distance(&[3.0_f64, 4.0, 0.0], &[0.0, 0.0, 0.0]), 5.0);
        assert_eq!(euclidean_distance(&[3.0_f32, 4.0], &[0.0, 0.0]), 5.0);
    }
}
