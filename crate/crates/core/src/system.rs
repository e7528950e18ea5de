//! Singular systems dU/dt = F(U)/ζ(U) and their derivative data.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::jet::{Jet, JetSpace, Scalar};

/// Tolerance for |F| and |ζ| at a singular equilibrium.
pub const TOL_EQ: f64 = 1e-10;

/// A pair (F, ζ) written once against [`Scalar`].
///
/// `field` is the regular vector field F and `zeta` the scalar whose zero set
/// is the singular set. Both must be smooth near the states of interest.
pub trait SingularField: Send + Sync {
    fn dim(&self) -> usize;
    fn field<T: Scalar>(&self, u: &[T]) -> Vec<T>;
    fn zeta<T: Scalar>(&self, u: &[T]) -> T;
}

/// Object-safe view of a [`SingularField`].
pub trait DynField: Send + Sync {
    fn dim(&self) -> usize;
    fn field_f64(&self, u: &[f64]) -> Vec<f64>;
    fn zeta_f64(&self, u: &[f64]) -> f64;
    fn field_jet(&self, u: &[Jet]) -> Vec<Jet>;
    fn zeta_jet(&self, u: &[Jet]) -> Jet;
}

impl<S: SingularField> DynField for S {
    fn dim(&self) -> usize {
        SingularField::dim(self)
    }
    fn field_f64(&self, u: &[f64]) -> Vec<f64> {
        self.field(u)
    }
    fn zeta_f64(&self, u: &[f64]) -> f64 {
        self.zeta(u)
    }
    fn field_jet(&self, u: &[Jet]) -> Vec<Jet> {
        self.field(u)
    }
    fn zeta_jet(&self, u: &[Jet]) -> Jet {
        self.zeta(u)
    }
}

/// How first and second derivatives are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DerivativeMode {
    /// Exact, through jet evaluation.
    #[default]
    Analytic,
    /// Central differences with h = ε^{1/3}(1 + |U|).
    FiniteDifference,
}

/// A singular ODE instance.
#[derive(Clone)]
pub struct SystemSpec {
    name: String,
    field: Arc<dyn DynField>,
    origin: DVector<f64>,
    derivatives: DerivativeMode,
}

impl fmt::Debug for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemSpec")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("origin", &self.origin.as_slice())
            .field("derivatives", &self.derivatives)
            .finish()
    }
}

/// Finite-difference step for a state.
pub fn fd_step(u: &DVector<f64>) -> f64 {
    f64::EPSILON.cbrt() * (1.0 + u.norm())
}

impl SystemSpec {
    /// Wraps `field` with the zero vector as distinguished point.
    pub fn new(name: impl Into<String>, field: impl SingularField + 'static) -> Result<Self> {
        let d = SingularField::dim(&field);
        Self::with_origin(name, field, DVector::zeros(d))
    }

    pub fn with_origin(
        name: impl Into<String>,
        field: impl SingularField + 'static,
        origin: DVector<f64>,
    ) -> Result<Self> {
        Self::from_dyn(name, Arc::new(field), origin)
    }

    pub fn from_dyn(
        name: impl Into<String>,
        field: Arc<dyn DynField>,
        origin: DVector<f64>,
    ) -> Result<Self> {
        if field.dim() == 0 {
            return Err(Error::InvalidInput("system dimension must be positive".into()));
        }
        if origin.len() != field.dim() {
            return Err(Error::DimensionMismatch {
                expected: field.dim(),
                got: origin.len(),
            });
        }
        let spec = SystemSpec {
            name: name.into(),
            field,
            origin,
            derivatives: DerivativeMode::Analytic,
        };
        let f_norm = spec.f(&spec.origin).norm();
        let zeta = spec.zeta(&spec.origin);
        if !(f_norm <= TOL_EQ && zeta.abs() <= TOL_EQ) {
            return Err(Error::OriginNotEquilibrium { f_norm, zeta });
        }
        Ok(spec)
    }

    pub fn with_derivatives(mut self, mode: DerivativeMode) -> Self {
        self.derivatives = mode;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn origin(&self) -> &DVector<f64> {
        &self.origin
    }

    pub fn derivative_mode(&self) -> DerivativeMode {
        self.derivatives
    }

    pub fn check_dim(&self, u: &DVector<f64>) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: u.len(),
            });
        }
        Ok(())
    }

    pub fn f(&self, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(self.field.field_f64(u.as_slice()))
    }

    pub fn f_slice(&self, u: &[f64]) -> Vec<f64> {
        self.field.field_f64(u)
    }

    pub fn zeta(&self, u: &DVector<f64>) -> f64 {
        self.field.zeta_f64(u.as_slice())
    }

    pub fn zeta_slice(&self, u: &[f64]) -> f64 {
        self.field.zeta_f64(u)
    }

    pub fn field_jet(&self, u: &[Jet]) -> Vec<Jet> {
        self.field.field_jet(u)
    }

    pub fn zeta_jet(&self, u: &[Jet]) -> Jet {
        self.field.zeta_jet(u)
    }

    /// Jets `u + δ` in `dim` variables truncated at `order`.
    pub fn seed_jets(u: &DVector<f64>, order: usize) -> Vec<Jet> {
        let space = JetSpace::get(u.len(), order);
        (0..u.len())
            .map(|i| Jet::variable(&space, i, u[i]))
            .collect()
    }

    /// ∇ζ · F, the quantity Hypothesis (4) asks to vanish on S.
    pub fn zeta_flux(&self, u: &DVector<f64>) -> f64 {
        self.grad_zeta(u).dot(&self.f(u))
    }

    pub fn jacobian(&self, u: &DVector<f64>) -> DMatrix<f64> {
        match self.derivatives {
            DerivativeMode::Analytic => self.jacobian_analytic(u),
            DerivativeMode::FiniteDifference => self.jacobian_fd(u),
        }
    }

    pub fn grad_zeta(&self, u: &DVector<f64>) -> DVector<f64> {
        match self.derivatives {
            DerivativeMode::Analytic => self.grad_zeta_analytic(u),
            DerivativeMode::FiniteDifference => self.grad_zeta_fd(u),
        }
    }

    /// ∇(∇ζ · F) at `u`.
    pub fn flux_gradient(&self, u: &DVector<f64>) -> DVector<f64> {
        match self.derivatives {
            DerivativeMode::Analytic => self.flux_gradient_analytic(u),
            DerivativeMode::FiniteDifference => self.flux_gradient_fd(u),
        }
    }

    pub fn jacobian_analytic(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let d = self.dim();
        let jets = Self::seed_jets(u, 1);
        let f = self.field_jet(&jets);
        DMatrix::from_fn(d, d, |i, j| f[i].gradient_entry(j))
    }

    pub fn grad_zeta_analytic(&self, u: &DVector<f64>) -> DVector<f64> {
        let jets = Self::seed_jets(u, 1);
        let z = self.zeta_jet(&jets);
        DVector::from_fn(self.dim(), |i, _| z.gradient_entry(i))
    }

    pub fn hessian_zeta_analytic(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let d = self.dim();
        let jets = Self::seed_jets(u, 2);
        let z = self.zeta_jet(&jets);
        DMatrix::from_fn(d, d, |i, j| z.hessian_entry(i, j))
    }

    pub fn flux_gradient_analytic(&self, u: &DVector<f64>) -> DVector<f64> {
        // ∇(∇ζ·F) = H_ζ F + DFᵀ ∇ζ
        let h = self.hessian_zeta_analytic(u);
        let j = self.jacobian_analytic(u);
        let g = self.grad_zeta_analytic(u);
        &h * self.f(u) + j.transpose() * g
    }

    pub fn jacobian_fd(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let d = self.dim();
        let h = fd_step(u);
        let mut jac = DMatrix::zeros(d, d);
        for j in 0..d {
            let mut up = u.clone();
            let mut um = u.clone();
            up[j] += h;
            um[j] -= h;
            let col = (self.f(&up) - self.f(&um)) / (2.0 * h);
            jac.set_column(j, &col);
        }
        jac
    }

    pub fn grad_zeta_fd(&self, u: &DVector<f64>) -> DVector<f64> {
        central_gradient(|v| self.zeta(v), u)
    }

    pub fn flux_gradient_fd(&self, u: &DVector<f64>) -> DVector<f64> {
        central_gradient(|v| self.grad_zeta_fd(v).dot(&self.f(v)), u)
    }
}

pub(crate) fn central_gradient(f: impl Fn(&DVector<f64>) -> f64, u: &DVector<f64>) -> DVector<f64> {
    let h = fd_step(u);
    DVector::from_fn(u.len(), |i, _| {
        let mut up = u.clone();
        let mut um = u.clone();
        up[i] += h;
        um[i] -= h;
        (f(&up) - f(&um)) / (2.0 * h)
    })
}
