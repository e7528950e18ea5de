//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Jet`] is a polynomial in `n` variables truncated at total degree `k`.
//! Evaluating a vector field on jets seeded with the coordinate variables
//! yields its Taylor expansion to degree `k`, which is how every analytic
//! derivative in this crate is produced (Jacobians, Hessians of ζ, and the
//! order-by-order invariance equations of the manifold solvers).
//!
//! Vector fields are written once against the [`Scalar`] trait and evaluated
//! either on plain `f64` or on jets.

use std::collections::HashMap;
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

/// Number type a vector field can be evaluated on.
pub trait Scalar:
    Clone
    + Debug
    + Send
    + Sync
    + Neg<Output = Self>
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// Constant (degree-0) part.
    fn value(&self) -> f64;
    /// A constant living in the same algebra as `self`.
    fn constant(&self, c: f64) -> Self;
    fn recip(&self) -> Self;
    fn powi(&self, n: i32) -> Self;
    fn powf(&self, p: f64) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sqrt(&self) -> Self {
        self.powf(0.5)
    }
}

impl Scalar for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn constant(&self, c: f64) -> Self {
        c
    }
    fn recip(&self) -> Self {
        1.0 / *self
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
    fn powf(&self, p: f64) -> Self {
        f64::powf(*self, p)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
}

/// Monomial layout and product table shared by all jets of one shape.
#[derive(Debug)]
pub struct JetSpace {
    nvars: usize,
    order: usize,
    monomials: Vec<Vec<u32>>,
    degree_start: Vec<usize>,
    lookup: HashMap<Vec<u32>, usize>,
    products: Vec<(u32, u32, u32)>,
}

fn monomials_of_degree(nvars: usize, degree: u32) -> Vec<Vec<u32>> {
    fn rec(pos: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if pos + 1 == cur.len() {
            cur[pos] = left;
            out.push(cur.clone());
            return;
        }
        for e in (0..=left).rev() {
            cur[pos] = e;
            rec(pos + 1, left - e, cur, out);
        }
        cur[pos] = 0;
    }
    if nvars == 0 {
        return if degree == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    rec(0, degree, &mut vec![0; nvars], &mut out);
    out
}

/// All exponent vectors in `nvars` variables of exactly `degree`, in the
/// order used by jets and manifold polynomials.
pub fn homogeneous_monomials(nvars: usize, degree: usize) -> Vec<Vec<u32>> {
    monomials_of_degree(nvars, degree as u32)
}

impl JetSpace {
    fn build(nvars: usize, order: usize) -> Self {
        let mut monomials = Vec::new();
        let mut degree_start = Vec::with_capacity(order + 2);
        for d in 0..=order {
            degree_start.push(monomials.len());
            monomials.extend(monomials_of_degree(nvars, d as u32));
        }
        degree_start.push(monomials.len());
        let lookup: HashMap<Vec<u32>, usize> = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        let deg = |m: &Vec<u32>| m.iter().sum::<u32>() as usize;
        let mut products = Vec::new();
        for (i, a) in monomials.iter().enumerate() {
            for (j, b) in monomials.iter().enumerate() {
                if deg(a) + deg(b) > order {
                    continue;
                }
                let sum: Vec<u32> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                products.push((i as u32, j as u32, lookup[&sum] as u32));
            }
        }
        JetSpace {
            nvars,
            order,
            monomials,
            degree_start,
            lookup,
            products,
        }
    }

    /// Shared space for `nvars` variables truncated at `order`.
    pub fn get(nvars: usize, order: usize) -> Arc<JetSpace> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetSpace>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet space cache poisoned");
        guard
            .entry((nvars, order))
            .or_insert_with(|| Arc::new(JetSpace::build(nvars, order)))
            .clone()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomial(&self, i: usize) -> &[u32] {
        &self.monomials[i]
    }

    pub fn index_of(&self, exps: &[u32]) -> Option<usize> {
        self.lookup.get(exps).copied()
    }

    /// Index range of the monomials of exactly `degree`.
    pub fn degree_range(&self, degree: usize) -> std::ops::Range<usize> {
        if degree > self.order {
            return 0..0;
        }
        self.degree_start[degree]..self.degree_start[degree + 1]
    }
}

/// Truncated Taylor polynomial.
#[derive(Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    coeffs: Vec<f64>,
}

impl Debug for Jet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Jet")
            .field("nvars", &self.space.nvars)
            .field("order", &self.space.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl Jet {
    pub fn constant_in(space: &Arc<JetSpace>, c: f64) -> Self {
        let mut coeffs = vec![0.0; space.len()];
        coeffs[0] = c;
        Jet {
            space: space.clone(),
            coeffs,
        }
    }

    /// `value + x_var`.
    pub fn variable(space: &Arc<JetSpace>, var: usize, value: f64) -> Self {
        let mut j = Jet::constant_in(space, value);
        if space.order >= 1 {
            let mut e = vec![0; space.nvars];
            e[var] = 1;
            j.coeffs[space.lookup[&e]] = 1.0;
        }
        j
    }

    pub fn zero_in(space: &Arc<JetSpace>) -> Self {
        Jet::constant_in(space, 0.0)
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    /// Taylor coefficient of the monomial with exponents `exps` (0 if truncated).
    pub fn coeff(&self, exps: &[u32]) -> f64 {
        self.space.index_of(exps).map_or(0.0, |i| self.coeffs[i])
    }

    /// First partial derivative with respect to `var` at the expansion point.
    pub fn gradient_entry(&self, var: usize) -> f64 {
        let mut e = vec![0; self.space.nvars];
        e[var] = 1;
        self.coeff(&e)
    }

    /// Second partial derivative ∂²/∂x_i∂x_j at the expansion point.
    pub fn hessian_entry(&self, i: usize, j: usize) -> f64 {
        let mut e = vec![0; self.space.nvars];
        e[i] += 1;
        e[j] += 1;
        let c = self.coeff(&e);
        if i == j {
            2.0 * c
        } else {
            c
        }
    }

    fn same_space(&self, other: &Jet) {
        debug_assert!(
            Arc::ptr_eq(&self.space, &other.space),
            "jets from different spaces"
        );
    }

    fn mul_ref(&self, other: &Jet) -> Jet {
        self.same_space(other);
        let mut out = vec![0.0; self.coeffs.len()];
        for &(i, j, k) in &self.space.products {
            out[k as usize] += self.coeffs[i as usize] * other.coeffs[j as usize];
        }
        Jet {
            space: self.space.clone(),
            coeffs: out,
        }
    }

    /// Σ series[n] · (self − self₀)ⁿ, the composition of a scalar function with
    /// Taylor coefficients `series` at self₀ with this jet.
    pub fn compose(&self, series: &[f64]) -> Jet {
        let mut t = self.clone();
        t.coeffs[0] = 0.0;
        let k = self.space.order.min(series.len().saturating_sub(1));
        let mut r = Jet::constant_in(&self.space, series[k]);
        for n in (0..k).rev() {
            r = r.mul_ref(&t);
            r.coeffs[0] += series[n];
        }
        r
    }
}

fn binomial_real(p: f64, n: usize) -> f64 {
    let mut c = 1.0;
    for i in 0..n {
        c *= (p - i as f64) / (i as f64 + 1.0);
    }
    c
}

impl Scalar for Jet {
    fn value(&self) -> f64 {
        self.coeffs[0]
    }
    fn constant(&self, c: f64) -> Self {
        Jet::constant_in(&self.space, c)
    }
    fn recip(&self) -> Self {
        let a = self.coeffs[0];
        let series: Vec<f64> = (0..=self.space.order)
            .map(|n| {
                let s = if n % 2 == 0 { 1.0 } else { -1.0 };
                s / a.powi(n as i32 + 1)
            })
            .collect();
        self.compose(&series)
    }
    fn powi(&self, n: i32) -> Self {
        if n < 0 {
            return self.powi(-n).recip();
        }
        let mut result = self.constant(1.0);
        let mut base = self.clone();
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul_ref(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_ref(&base);
            }
        }
        result
    }
    fn powf(&self, p: f64) -> Self {
        let a = self.coeffs[0];
        let series: Vec<f64> = (0..=self.space.order)
            .map(|n| binomial_real(p, n) * a.powf(p - n as f64))
            .collect();
        self.compose(&series)
    }
    fn exp(&self) -> Self {
        let ea = self.coeffs[0].exp();
        let mut fact = 1.0;
        let series: Vec<f64> = (0..=self.space.order)
            .map(|n| {
                if n > 0 {
                    fact *= n as f64;
                }
                ea / fact
            })
            .collect();
        self.compose(&series)
    }
    fn ln(&self) -> Self {
        let a = self.coeffs[0];
        let series: Vec<f64> = (0..=self.space.order)
            .map(|n| {
                if n == 0 {
                    a.ln()
                } else {
                    let s = if n % 2 == 1 { 1.0 } else { -1.0 };
                    s / (n as f64 * a.powi(n as i32))
                }
            })
            .collect();
        self.compose(&series)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        self.coeffs.iter_mut().for_each(|c| *c = -*c);
        self
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        self.same_space(&rhs);
        self.coeffs
            .iter_mut()
            .zip(&rhs.coeffs)
            .for_each(|(a, b)| *a += b);
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: Jet) -> Jet {
        self.same_space(&rhs);
        self.coeffs
            .iter_mut()
            .zip(&rhs.coeffs)
            .for_each(|(a, b)| *a -= b);
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        self.mul_ref(&rhs)
    }
}

#[allow(clippy::suspicious_arithmetic_impl)]
impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        self.mul_ref(&rhs.recip())
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.coeffs[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.coeffs[0] -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, rhs: f64) -> Jet {
        self.coeffs.iter_mut().for_each(|c| *c *= rhs);
        self
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(mut self, rhs: f64) -> Jet {
        self.coeffs.iter_mut().for_each(|c| *c /= rhs);
        self
    }
}
