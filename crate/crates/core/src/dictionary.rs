//! Center dictionary with approximate-linear-dependency (ALD) admission.
//!
//! The dictionary keeps the centers `cᵢ`, their Gram matrix `K̃` and an
//! incrementally maintained `K̃⁻¹`. A candidate `u` is tested by
//!
//! ```text
//! h  = [κ(c₁,u), …, κ(c_K,u)]ᵀ
//! a  = K̃⁻¹ h
//! d₂ = κ(u,u) − hᵀa
//! ```
//!
//! and admitted when `d₂ > δ`. On admission the inverse is extended with the
//! block identity
//!
//! ```text
//! K̃'⁻¹ = (1/d₂) · [[d₂K̃⁻¹ + a aᵀ, −a], [−aᵀ, 1]]
//! ```
//!
//! which reuses `a` and `d₂` from the test, so growth costs O(K²).

use sha2::{Digest, Sha256};

use crate::error::{KafError, Result};
use crate::kernels::{check_finite, KernelSpec};
use crate::matrix::{dot, identity_residual, GrowMatrix};

/// Smallest residual accepted when extending the dictionary.
pub const D2_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Dictionary {
    spec: KernelSpec,
    dim: usize,
    centers: Vec<f64>,
    gram: GrowMatrix,
    gram_inv: GrowMatrix,
}

/// Outcome of an ALD test against the current dictionary.
#[derive(Debug, Clone, PartialEq)]
pub struct AldResult {
    /// Best expansion coefficients of `φ(u)` on the current centers.
    pub a: Vec<f64>,
    /// Approximation residual, clamped at zero.
    pub d2: f64,
    /// Residual before clamping.
    pub d2_raw: f64,
    /// Kernel vector of `u` against the centers.
    pub h: Vec<f64>,
    /// `κ(u, u)`.
    pub kuu: f64,
    pub admitted: bool,
}

impl Dictionary {
    /// Starts a dictionary with `first` as its only center.
    pub fn new(spec: KernelSpec, first: &[f64]) -> Result<Self> {
        spec.validate()?;
        if first.is_empty() {
            return Err(KafError::invalid("input", "input dimension must be >= 1"));
        }
        check_finite(first, "dictionary center")?;
        let k11 = spec.self_similarity(first);
        if !(k11.is_finite() && k11 > 0.0) {
            return Err(KafError::Degenerate {
                what: "κ(u₁, u₁)",
                value: k11,
            });
        }
        Ok(Dictionary {
            spec,
            dim: first.len(),
            centers: first.to_vec(),
            gram: GrowMatrix::from_scalar(k11),
            gram_inv: GrowMatrix::from_scalar(1.0 / k11),
        })
    }

    /// Rebuilds a dictionary from an ordered center list by replaying growth.
    pub fn from_centers<P: AsRef<[f64]>>(spec: KernelSpec, centers: &[P]) -> Result<Self> {
        let (first, rest) = centers
            .split_first()
            .ok_or_else(|| KafError::invalid("centers", "at least one center is required"))?;
        let mut dict = Dictionary::new(spec, first.as_ref())?;
        for c in rest {
            let ald = dict.ald_test(c.as_ref(), 0.0)?;
            if !ald.admitted {
                return Err(KafError::NearSingularExtension {
                    d2: ald.d2,
                    floor: D2_FLOOR,
                });
            }
            dict.grow(c.as_ref(), &ald)?;
        }
        Ok(dict)
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    /// Input dimension `L`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of centers `K`.
    pub fn len(&self) -> usize {
        self.gram.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i * self.dim..(i + 1) * self.dim]
    }

    pub fn centers(&self) -> impl Iterator<Item = &[f64]> {
        self.centers.chunks_exact(self.dim)
    }

    /// Centers as a flat row-major block.
    pub fn centers_flat(&self) -> &[f64] {
        &self.centers
    }

    pub fn centers_vec(&self) -> Vec<Vec<f64>> {
        self.centers().map(<[f64]>::to_vec).collect()
    }

    pub fn gram(&self) -> &GrowMatrix {
        &self.gram
    }

    pub fn gram_inv(&self) -> &GrowMatrix {
        &self.gram_inv
    }

    pub fn check_input(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim {
            return Err(KafError::DimensionMismatch {
                expected: self.dim,
                got: u.len(),
            });
        }
        check_finite(u, "input")
    }

    /// `h(u)`: kernel evaluations of `u` against every center.
    pub fn kernel_vector(&self, u: &[f64]) -> Vec<f64> {
        let mut h = Vec::with_capacity(self.len());
        self.spec.kernel_vector_into(&self.centers, u, &mut h);
        h
    }

    /// ALD test of `u` against the current centers. Read-only.
    pub fn ald_test(&self, u: &[f64], delta: f64) -> Result<AldResult> {
        self.check_input(u)?;
        check_delta(delta)?;
        self.ald_unchecked(u, self.kernel_vector(u), delta)
    }

    /// ALD test with a precomputed kernel vector and an already validated `u`.
    pub(crate) fn ald_unchecked(&self, u: &[f64], h: Vec<f64>, delta: f64) -> Result<AldResult> {
        let mut a = Vec::with_capacity(h.len());
        self.gram_inv.mul_vec(&h, &mut a);
        let kuu = self.spec.self_similarity(u);
        let d2_raw = kuu - dot(&h, &a);
        if !d2_raw.is_finite() {
            return Err(KafError::IllConditioned {
                condition: self.condition_estimate(),
            });
        }
        let d2 = d2_raw.max(0.0);
        Ok(AldResult {
            a,
            d2,
            d2_raw,
            h,
            kuu,
            admitted: d2 > delta,
        })
    }

    /// Checks that `ald` permits extending the dictionary. No mutation.
    pub(crate) fn check_growth(&self, ald: &AldResult) -> Result<()> {
        if !ald.admitted {
            return Err(KafError::invalid(
                "ald",
                "growth requested for a sample that failed the admission test",
            ));
        }
        if ald.h.len() != self.len() || ald.a.len() != self.len() {
            return Err(KafError::DimensionMismatch {
                expected: self.len(),
                got: ald.h.len(),
            });
        }
        if ald.d2 < D2_FLOOR {
            return Err(KafError::NearSingularExtension {
                d2: ald.d2,
                floor: D2_FLOOR,
            });
        }
        Ok(())
    }

    /// Appends `u` as a new center using the quantities from its ALD test.
    pub fn grow(&mut self, u: &[f64], ald: &AldResult) -> Result<()> {
        self.check_input(u)?;
        self.check_growth(ald)?;
        self.grow_unchecked(u, ald);
        Ok(())
    }

    pub(crate) fn grow_unchecked(&mut self, u: &[f64], ald: &AldResult) {
        let inv_d2 = 1.0 / ald.d2;
        self.gram.push_border(&ald.h, &ald.h, ald.kuu);
        self.gram_inv.rank_one_update(inv_d2, &ald.a, &ald.a);
        let border: Vec<f64> = ald.a.iter().map(|x| -x * inv_d2).collect();
        self.gram_inv.push_border(&border, &border, inv_d2);
        self.centers.extend_from_slice(u);
    }

    /// `‖K̃ K̃⁻¹ − I‖∞`.
    pub fn inverse_residual(&self) -> f64 {
        identity_residual(&self.gram, &self.gram_inv)
    }

    /// `‖K̃‖∞ ‖K̃⁻¹‖∞`, an upper estimate of the ∞-norm condition number.
    pub fn condition_estimate(&self) -> f64 {
        self.gram.norm_inf() * self.gram_inv.norm_inf()
    }

    /// SHA-256 over the input dimension and the bit patterns of all centers.
    pub fn centers_checksum(&self) -> String {
        centers_checksum(self.dim, self.centers())
    }
}

pub fn centers_checksum<'a>(dim: usize, centers: impl Iterator<Item = &'a [f64]>) -> String {
    let mut hasher = Sha256::new();
    hasher.update((dim as u64).to_le_bytes());
    for c in centers {
        for x in c {
            hasher.update(x.to_bits().to_le_bytes());
        }
    }
    hex::encode(hasher.finalize())
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if delta.is_nan() || delta < 0.0 {
        return Err(KafError::invalid(
            "delta",
            format!("must be >= 0, got {delta}"),
        ));
    }
    Ok(())
}
