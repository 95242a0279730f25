use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use nalgebra::{DMatrix, SymmetricEigen};
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Floating point scalar the simulator runs on: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Eigenvalues of a dense symmetric `n x n` matrix given row-major.
    fn symmetric_eigenvalues(m: &[Self], n: usize) -> Vec<Self>;

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Converts an `f64` constant. Panics only if the value is not
    /// representable at all, which never happens for finite inputs.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 literal")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn symmetric_eigenvalues(m: &[Self], n: usize) -> Vec<Self> {
                let mat = DMatrix::<$t>::from_row_slice(n, n, m);
                SymmetricEigen::new(mat)
                    .eigenvalues
                    .iter()
                    .copied()
                    .collect()
            }

            fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);
