//! Uniform access to the three concrete error structures.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{derive_substream, RngStream};
use crate::sample::{ExtendedSample, Payload, TripletSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Capabilities {
    pub triplet: bool,
    pub extended: bool,
    pub known_density: bool,
}

/// A simulator able to draw `X` together with `Γ[X]` and `A[X]`.
///
/// Implementations hold no mutable state; concurrent use from several
/// workers with distinct streams is always allowed.
pub trait StructureProvider: Send + Sync {
    fn dimension(&self) -> usize;

    fn capabilities(&self) -> Capabilities;

    fn sample_triplet(&self, rng: &mut RngStream) -> Result<TripletSample>;

    /// Scalar draw with `Γ[X, Γ[X]]`. Only providers advertising `extended` implement it.
    fn sample_extended(&self, _rng: &mut RngStream) -> Result<ExtendedSample> {
        Err(Error::Unsupported("extended sampling"))
    }

    /// Exact density of `X`, for validation models.
    fn exact_density(&self, _x: f64) -> Option<f64> {
        None
    }
}

/// Draw `count` triplets; draw `i` uses stream `(seed, family, i)`.
pub fn sample_triplets<P: StructureProvider + ?Sized>(
    provider: &P,
    seed: u64,
    family: u64,
    count: usize,
) -> Result<Vec<TripletSample>> {
    sample_triplets_range(provider, seed, family, 0, count)
}

/// Draws `start..start + count` of the sequence produced by [`sample_triplets`].
pub fn sample_triplets_range<P: StructureProvider + ?Sized>(
    provider: &P,
    seed: u64,
    family: u64,
    start: usize,
    count: usize,
) -> Result<Vec<TripletSample>> {
    (start as u64..(start + count) as u64)
        .into_par_iter()
        .map(|i| provider.sample_triplet(&mut derive_substream(seed, family, i)))
        .collect()
}

/// Draw `count` extended samples, optionally attaching a payload `G = φ(X)`.
pub fn sample_extended<P: StructureProvider + ?Sized>(
    provider: &P,
    seed: u64,
    family: u64,
    count: usize,
    payload: Option<&Payload>,
) -> Result<Vec<ExtendedSample>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let s = provider.sample_extended(&mut derive_substream(seed, family, i))?;
            Ok(match payload {
                Some(p) => s.with_payload(p),
                None => s,
            })
        })
        .collect()
}

/// `k` independent copies of a scalar provider, stacked into a `k`-dimensional
/// sample with block-diagonal `Γ`.
pub struct IndependentCopies<P> {
    pub inner: P,
    pub copies: usize,
}

impl<P: StructureProvider> StructureProvider for IndependentCopies<P> {
    fn dimension(&self) -> usize {
        self.copies * self.inner.dimension()
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            triplet: true,
            extended: false,
            known_density: false,
        }
    }

    fn sample_triplet(&self, rng: &mut RngStream) -> Result<TripletSample> {
        let d1 = self.inner.dimension();
        let d = self.dimension();
        let mut x = nalgebra::DVector::zeros(d);
        let mut a = nalgebra::DVector::zeros(d);
        let mut gamma = nalgebra::DMatrix::zeros(d, d);
        for c in 0..self.copies {
            let s = self.inner.sample_triplet(rng)?;
            let o = c * d1;
            x.rows_mut(o, d1).copy_from(&s.x);
            a.rows_mut(o, d1).copy_from(&s.a);
            gamma.view_mut((o, o), (d1, d1)).copy_from(&s.gamma);
        }
        Ok(TripletSample::new(x, gamma, a))
    }
}
