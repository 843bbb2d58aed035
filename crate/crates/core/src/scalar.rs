use std::fmt::{Debug, Display};
use std::hash::Hash;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, PrimInt, Unsigned};

/// Unsigned integer edge weight / distance type.
///
/// `max_value()` doubles as the "unreachable" sentinel, and all path sums
/// saturate at it.
pub trait Weight:
    PrimInt + Unsigned + Hash + Debug + Display + Send + Sync + Default + 'static
{
    #[inline]
    fn infinity() -> Self {
        Self::max_value()
    }

    #[inline]
    fn is_infinite(self) -> bool {
        self == Self::max_value()
    }

    /// Saturating path concatenation.
    #[inline]
    fn plus(self, other: Self) -> Self {
        self.saturating_add(other)
    }

    #[inline]
    fn from_u64_lossless(x: u64) -> Option<Self> {
        Self::from(x)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::INFINITY)
    }

    #[inline]
    fn as_u128(self) -> u128 {
        self.to_u128().expect("unsigned weights fit in u128")
    }
}

impl<T> Weight for T where
    T: PrimInt + Unsigned + Hash + Debug + Display + Send + Sync + Default + 'static
{
}

/// Floating point scalar used by the flow solver and the compressed kernels.
pub trait Real: Float + FromPrimitive + Sum + Debug + Display + Send + Sync + Default + 'static {
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("representable constant")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where
    T: Float + FromPrimitive + Sum + Debug + Display + Send + Sync + Default + 'static
{
}

/// Neumaier-compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum<F> {
    sum: F,
    comp: F,
}

impl<F: Real> KahanSum<F> {
    pub fn new() -> Self {
        Self {
            sum: F::zero(),
            comp: F::zero(),
        }
    }

    #[inline]
    pub fn add(&mut self, x: F) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp = self.comp + ((self.sum - t) + x);
        } else {
            self.comp = self.comp + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> F {
        self.sum + self.comp
    }
}

impl<F: Real> FromIterator<F> for KahanSum<F> {
    fn from_iter<I: IntoIterator<Item = F>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator.
pub fn kahan_sum<F: Real, I: IntoIterator<Item = F>>(iter: I) -> F {
    iter.into_iter().collect::<KahanSum<F>>().value()
}
