//! Feature bases over the functional argument Z.
//!
//! A basis descriptor is a comma-separated list of tokens:
//!
//! * `intercept`: the constant-1 feature;
//! * `raw`: the coordinates z_1, ..., z_k themselves;
//! * `poly:<d>`: monomials z_i, z_i^2, ..., z_i^d for every coordinate;
//! * `interactions`: pairwise products z_i * z_j for i < j.
//!
//! The expanded feature order is deterministic regardless of token order:
//! intercept first, then degree-1 coordinates, then interaction pairs in
//! lexicographic order, then powers of degree >= 2 grouped by coordinate.
//! Duplicate features (for example `raw,poly:2`, whose degree-1 terms
//! coincide) are rejected rather than silently merged. No implicit
//! centering or scaling is applied.

use std::fmt;
use std::str::FromStr;

use crate::data::ZPoint;
use crate::error::{Error, Result};

/// One token of the basis descriptor grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisToken {
    Intercept,
    Raw,
    Poly(u32),
    Interactions,
}

impl fmt::Display for BasisToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisToken::Intercept => write!(f, "intercept"),
            BasisToken::Raw => write!(f, "raw"),
            BasisToken::Poly(d) => write!(f, "poly:{d}"),
            BasisToken::Interactions => write!(f, "interactions"),
        }
    }
}

/// A parsed basis descriptor. Parsing validates token syntax only; the
/// expansion against a concrete Z arity happens in [`FeatureBasis::build`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisSpec {
    tokens: Vec<BasisToken>,
}

impl BasisSpec {
    pub fn tokens(&self) -> &[BasisToken] {
        &self.tokens
    }
}

impl FromStr for BasisSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().is_empty() {
            return Err(Error::EmptyBasis);
        }
        let mut tokens = Vec::new();
        for raw_token in s.split(',') {
            let token = raw_token.trim();
            tokens.push(match token {
                "intercept" => BasisToken::Intercept,
                "raw" => BasisToken::Raw,
                "interactions" => BasisToken::Interactions,
                _ => {
                    if let Some(deg) = token.strip_prefix("poly:") {
                        let degree: u32 = deg.parse().map_err(|_| Error::InvalidBasis {
                            reason: format!("polynomial degree {deg:?} is not an integer"),
                        })?;
                        if degree == 0 {
                            return Err(Error::InvalidBasis {
                                reason: "polynomial degree must be at least 1".to_string(),
                            });
                        }
                        BasisToken::Poly(degree)
                    } else {
                        return Err(Error::InvalidBasis {
                            reason: format!("unknown token {token:?}"),
                        });
                    }
                }
            });
        }
        Ok(BasisSpec { tokens })
    }
}

impl fmt::Display for BasisSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

/// A single feature φ_j: Z → ℝ. Coordinates are zero-based internally and
/// rendered one-based for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Feature {
    Intercept,
    /// z_i
    Coord(usize),
    /// z_i * z_j with i < j
    Product(usize, usize),
    /// z_i^d with d >= 2
    Power(usize, u32),
}

impl Feature {
    pub fn eval(&self, z: &ZPoint) -> f64 {
        match *self {
            Feature::Intercept => 1.0,
            Feature::Coord(i) => z[i],
            Feature::Product(i, j) => z[i] * z[j],
            Feature::Power(i, d) => z[i].powi(d as i32),
        }
    }

    fn max_coord(&self) -> Option<usize> {
        match *self {
            Feature::Intercept => None,
            Feature::Coord(i) => Some(i),
            Feature::Product(i, j) => Some(i.max(j)),
            Feature::Power(i, _) => Some(i),
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Feature::Intercept => write!(f, "1"),
            Feature::Coord(i) => write!(f, "z{}", i + 1),
            Feature::Product(i, j) => write!(f, "z{}*z{}", i + 1, j + 1),
            Feature::Power(i, d) => write!(f, "z{}^{}", i + 1, d),
        }
    }
}

/// An ordered family φ = [φ_1, ..., φ_p] of functions Z → ℝ, fixed to a
/// Z arity at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBasis {
    features: Vec<Feature>,
    z_arity: usize,
}

impl FeatureBasis {
    /// Expands a descriptor against a concrete Z arity.
    pub fn build(spec: &BasisSpec, z_arity: usize) -> Result<Self> {
        let mut intercepts = Vec::new();
        let mut coords = Vec::new();
        let mut products = Vec::new();
        let mut powers = Vec::new();
        for token in spec.tokens() {
            match *token {
                BasisToken::Intercept => intercepts.push(Feature::Intercept),
                BasisToken::Raw => {
                    coords.extend((0..z_arity).map(Feature::Coord));
                }
                BasisToken::Interactions => {
                    for i in 0..z_arity {
                        for j in (i + 1)..z_arity {
                            products.push(Feature::Product(i, j));
                        }
                    }
                }
                BasisToken::Poly(degree) => {
                    coords.extend((0..z_arity).map(Feature::Coord));
                    for i in 0..z_arity {
                        for d in 2..=degree {
                            powers.push(Feature::Power(i, d));
                        }
                    }
                }
            }
        }
        let mut features = intercepts;
        features.extend(coords);
        features.extend(products);
        features.extend(powers);
        Self::from_features(features, z_arity)
    }

    /// Builds directly from a feature list, validating coordinate ranges
    /// and rejecting duplicates.
    pub fn from_features(features: Vec<Feature>, z_arity: usize) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::EmptyBasis);
        }
        let mut seen = std::collections::HashSet::new();
        for feature in &features {
            if let Some(coord) = feature.max_coord() {
                if coord >= z_arity {
                    return Err(Error::CoordOutOfRange { coord, z_arity });
                }
            }
            if !seen.insert(*feature) {
                return Err(Error::DuplicateFeature {
                    feature: feature.to_string(),
                });
            }
        }
        Ok(FeatureBasis { features, z_arity })
    }

    /// Parses and expands a descriptor string in one step.
    pub fn parse(descriptor: &str, z_arity: usize) -> Result<Self> {
        Self::build(&descriptor.parse()?, z_arity)
    }

    pub fn p(&self) -> usize {
        self.features.len()
    }

    pub fn z_arity(&self) -> usize {
        self.z_arity
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.to_string()).collect()
    }

    /// Evaluates φ(z) into a fresh vector.
    pub fn eval(&self, z: &ZPoint) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.p()];
        self.eval_into(z, &mut out)?;
        Ok(out)
    }

    /// Evaluates φ(z) into a caller-owned buffer of length p.
    pub fn eval_into(&self, z: &ZPoint, out: &mut [f64]) -> Result<()> {
        if z.len() != self.z_arity {
            return Err(Error::ArityMismatch {
                basis_arity: self.z_arity,
                z_arity: z.len(),
            });
        }
        if out.len() != self.p() {
            return Err(Error::DimensionMismatch {
                context: "feature buffer",
                got: out.len(),
                expected: self.p(),
            });
        }
        for (slot, feature) in out.iter_mut().zip(&self.features) {
            *slot = feature.eval(z);
        }
        Ok(())
    }
}
