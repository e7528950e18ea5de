//! Sparse multivariate polynomials and polynomial singular systems.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Scalar;
use crate::system::SingularField;

/// Highest total degree accepted for user-defined systems.
pub const MAX_INLINE_DEGREE: u32 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: f64,
    pub exps: Vec<u32>,
}

/// Σ coeff · Π u_i^{exps_i}.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poly {
    pub terms: Vec<Term>,
}

impl Poly {
    pub fn new(terms: Vec<Term>) -> Self {
        Poly { terms }
    }

    /// Shorthand from (coefficient, exponents) pairs.
    pub fn from_pairs(pairs: &[(f64, &[u32])]) -> Self {
        Poly {
            terms: pairs
                .iter()
                .map(|(c, e)| Term {
                    coeff: *c,
                    exps: e.to_vec(),
                })
                .collect(),
        }
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|t| t.exps.iter().sum()).max().unwrap_or(0)
    }

    pub fn validate(&self, nvars: usize, max_degree: u32) -> Result<()> {
        for t in &self.terms {
            if t.exps.len() != nvars {
                return Err(Error::InvalidInput(format!(
                    "term has {} exponents, expected {nvars}",
                    t.exps.len()
                )));
            }
            if !t.coeff.is_finite() {
                return Err(Error::InvalidInput("non-finite coefficient".into()));
            }
        }
        if self.degree() > max_degree {
            return Err(Error::InvalidInput(format!(
                "polynomial degree {} exceeds {max_degree}",
                self.degree()
            )));
        }
        Ok(())
    }

    pub fn eval<T: Scalar>(&self, u: &[T]) -> T {
        let mut acc = u[0].constant(0.0);
        for t in &self.terms {
            let mut m = u[0].constant(t.coeff);
            for (x, &e) in u.iter().zip(&t.exps) {
                if e > 0 {
                    m = m * x.powi(e as i32);
                }
            }
            acc = acc + m;
        }
        acc
    }
}

/// A singular system whose F and ζ are polynomials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolySystem {
    pub dim: usize,
    pub f: Vec<Poly>,
    pub zeta: Poly,
}

impl PolySystem {
    pub fn new(dim: usize, f: Vec<Poly>, zeta: Poly) -> Result<Self> {
        let sys = PolySystem { dim, f, zeta };
        sys.validate()?;
        Ok(sys)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if self.f.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: self.f.len(),
            });
        }
        for p in self.f.iter().chain(std::iter::once(&self.zeta)) {
            p.validate(self.dim, MAX_INLINE_DEGREE)?;
        }
        Ok(())
    }
}

impl SingularField for PolySystem {
    fn dim(&self) -> usize {
        self.dim
    }
    fn field<T: Scalar>(&self, u: &[T]) -> Vec<T> {
        self.f.iter().map(|p| p.eval(u)).collect()
    }
    fn zeta<T: Scalar>(&self, u: &[T]) -> T {
        self.zeta.eval(u)
    }
}
