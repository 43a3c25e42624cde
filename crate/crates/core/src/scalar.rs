//! Scalar abstraction: the model math is generic over the floating-point
//! type through [`Real`], implemented for `f32` and `f64`.

use nalgebra::RealField;
use num_traits::FromPrimitive;
use rand::Rng;
use rand_distr::Distribution;

/// Floating-point scalar usable throughout the model, samplers, and
/// evaluation code.
///
/// Field arithmetic and elementary functions come from
/// [`nalgebra::RealField`]; the remaining methods embed constants and
/// route random draws through `rand_distr` for the concrete type.
pub trait Real:
    RealField + FromPrimitive + Copy + Default + std::fmt::Display + std::fmt::LowerExp + 'static
{
    /// Embed an `f64` constant. Non-finite values map to the
    /// corresponding non-finite value of `Self`.
    fn of(x: f64) -> Self;

    /// Widen to `f64` (exact for `f64`, lossy for `f32`).
    fn as_f64(self) -> f64;

    fn nan() -> Self {
        Self::of(f64::NAN)
    }

    fn infinity() -> Self {
        Self::of(f64::INFINITY)
    }

    fn neg_infinity() -> Self {
        Self::of(f64::NEG_INFINITY)
    }

    /// Machine epsilon of the concrete type.
    fn eps() -> Self;

    /// Smallest representable value strictly greater than `self`.
    fn next_up(self) -> Self;

    /// Largest representable value strictly less than `self`.
    fn next_down(self) -> Self {
        -(-self).next_up()
    }

    /// One draw from the standard normal distribution.
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// One draw from the uniform distribution on `[0, 1)`.
    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// One draw from the gamma distribution with the given shape and rate.
    ///
    /// Panics if `shape` or `rate` is not strictly positive; callers
    /// validate first.
    fn gamma_draw<R: Rng + ?Sized>(shape: Self, rate: Self, rng: &mut R) -> Self;
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            #[inline]
            fn of(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }

            #[inline]
            fn eps() -> Self {
                <$t>::EPSILON
            }

            #[inline]
            fn next_up(self) -> Self {
                if self.is_nan() || self == <$t>::INFINITY {
                    return self;
                }
                let bits = if self == 0.0 {
                    1
                } else if self > 0.0 {
                    self.to_bits() + 1
                } else {
                    self.to_bits() - 1
                };
                <$t>::from_bits(bits)
            }

            #[inline]
            fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rand_distr::StandardNormal.sample(rng)
            }

            #[inline]
            fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rng.random::<$t>()
            }

            fn gamma_draw<R: Rng + ?Sized>(shape: Self, rate: Self, rng: &mut R) -> Self {
                let gamma = rand_distr::Gamma::new(shape, 1.0 / rate)
                    .expect("gamma_draw requires positive shape and rate");
                gamma.sample(rng)
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn constants_embed_for_both_widths() {
        assert_eq!(<f64 as Real>::of(0.25), 0.25);
        assert_eq!(<f32 as Real>::of(0.25), 0.25f32);
        assert!(<f64 as Real>::infinity().is_infinite());
        assert!(<f32 as Real>::nan().is_nan());
    }

    #[test]
    fn draws_are_finite() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let x: f64 = Real::std_normal(&mut rng);
            assert!(x.is_finite());
            let u: f64 = Real::unit_uniform(&mut rng);
            assert!((0.0..1.0).contains(&u));
            let g: f64 = Real::gamma_draw(2.0, 3.0, &mut rng);
            assert!(g > 0.0);
        }
    }
}
