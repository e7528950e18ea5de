//! Polynomial graphs y = h(x) over a subspace and the order-by-order solver
//! for their invariance equation.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{homogeneous_monomials, Jet, JetSpace, Scalar};
use crate::linalg::hstack;
use crate::system::{SystemSpec, TOL_EQ};

/// Invariance residual threshold defining the validity radius.
pub const VALIDITY_RESIDUAL: f64 = 1e-6;

/// Vector-valued polynomial with terms of degree 2..=order.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphPoly {
    nvars: usize,
    ncomp: usize,
    order: usize,
    /// (exponents, coefficient per codomain component), graded order.
    terms: Vec<(Vec<u32>, Vec<f64>)>,
}

impl GraphPoly {
    pub fn zero(nvars: usize, ncomp: usize, order: usize) -> Self {
        let mut terms = Vec::new();
        for deg in 2..=order {
            for e in homogeneous_monomials(nvars, deg) {
                terms.push((e, vec![0.0; ncomp]));
            }
        }
        GraphPoly {
            nvars,
            ncomp,
            order,
            terms,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn terms(&self) -> &[(Vec<u32>, Vec<f64>)] {
        &self.terms
    }

    pub fn coefficient(&self, exps: &[u32]) -> Option<&[f64]> {
        self.terms.iter().find(|(e, _)| e.as_slice() == exps).map(|(_, c)| c.as_slice())
    }

    fn set(&mut self, exps: &[u32], comp: usize, value: f64) {
        if let Some((_, c)) = self.terms.iter_mut().find(|(e, _)| e.as_slice() == exps) {
            c[comp] = value;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|(_, c)| c.iter().all(|&v| v == 0.0))
    }

    fn monomial<T: Scalar>(x: &[T], e: &[u32]) -> T {
        let mut m = x[0].constant(1.0);
        for (xi, &k) in x.iter().zip(e) {
            if k > 0 {
                m = m * xi.powi(k as i32);
            }
        }
        m
    }

    pub fn eval<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        if x.is_empty() {
            return Vec::new();
        }
        let mut out = vec![x[0].constant(0.0); self.ncomp];
        for (e, c) in &self.terms {
            if c.iter().all(|&v| v == 0.0) {
                continue;
            }
            let m = Self::monomial(x, e);
            for (o, &ci) in out.iter_mut().zip(c) {
                if ci != 0.0 {
                    *o = o.clone() + m.clone() * ci;
                }
            }
        }
        out
    }

    /// ∂h/∂x_var evaluated at `x`.
    pub fn eval_partial<T: Scalar>(&self, x: &[T], var: usize) -> Vec<T> {
        if x.is_empty() {
            return Vec::new();
        }
        let mut out = vec![x[0].constant(0.0); self.ncomp];
        for (e, c) in &self.terms {
            if e[var] == 0 || c.iter().all(|&v| v == 0.0) {
                continue;
            }
            let mut de = e.clone();
            de[var] -= 1;
            let m = Self::monomial(x, &de) * e[var] as f64;
            for (o, &ci) in out.iter_mut().zip(c) {
                if ci != 0.0 {
                    *o = o.clone() + m.clone() * ci;
                }
            }
        }
        out
    }

    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.ncomp, self.nvars);
        for v in 0..self.nvars {
            let col = self.eval_partial(x.as_slice(), v);
            for (i, c) in col.into_iter().enumerate() {
                j[(i, v)] = c;
            }
        }
        j
    }
}

/// Residual of the invariance equation at one sphere radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualSample {
    pub radius: f64,
    pub defect: f64,
}

/// Local invariant manifold {base + P x + Q h(x)}.
#[derive(Debug, Clone)]
pub struct TaylorManifold {
    base: DVector<f64>,
    domain: DMatrix<f64>,
    codomain: DMatrix<f64>,
    tinv: DMatrix<f64>,
    poly: GraphPoly,
    order: usize,
    residual: Vec<ResidualSample>,
    validity_radius: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientRecord {
    pub multi_index: Vec<u32>,
    pub codomain_coeffs: Vec<f64>,
}

/// JSON layout of a [`TaylorManifold`]; bases are stored row by row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifoldRecord {
    pub base: Vec<f64>,
    pub domain_basis: Vec<Vec<f64>>,
    pub codomain_basis: Vec<Vec<f64>>,
    pub coefficients: Vec<CoefficientRecord>,
    pub order: usize,
    pub residual: Vec<ResidualSample>,
    pub validity_radius: f64,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl TaylorManifold {
    pub fn base(&self) -> &DVector<f64> {
        &self.base
    }

    pub fn domain(&self) -> &DMatrix<f64> {
        &self.domain
    }

    pub fn codomain(&self) -> &DMatrix<f64> {
        &self.codomain
    }

    pub fn poly(&self) -> &GraphPoly {
        &self.poly
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    /// Dimension of the manifold.
    pub fn k(&self) -> usize {
        self.domain.ncols()
    }

    pub fn residual(&self) -> &[ResidualSample] {
        &self.residual
    }

    pub fn validity_radius(&self) -> f64 {
        self.validity_radius
    }

    /// Coefficients of the monomial x^exps in codomain coordinates.
    pub fn coefficient(&self, exps: &[u32]) -> Vec<f64> {
        self.poly
            .coefficient(exps)
            .map_or_else(|| vec![0.0; self.poly.ncomp()], |c| c.to_vec())
    }

    /// (x, y) with U = base + P x + Q y.
    pub fn coords(&self, u: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let w = &self.tinv * (u - &self.base);
        let k = self.k();
        (w.rows(0, k).into_owned(), w.rows(k, w.len() - k).into_owned())
    }

    pub fn graph(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(self.poly.eval(x.as_slice()))
    }

    pub fn point(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.base + &self.domain * x + &self.codomain * self.graph(x)
    }

    /// Q·(y − h(x)): the offset of `u` from the graph along the codomain.
    pub fn offset(&self, u: &DVector<f64>) -> DVector<f64> {
        let (x, y) = self.coords(u);
        &self.codomain * (y - self.graph(&x))
    }

    pub fn distance(&self, u: &DVector<f64>) -> f64 {
        self.offset(u).norm()
    }

    /// Tangent basis P + Q·Dh(x) at graph coordinate `x`.
    pub fn tangent(&self, x: &DVector<f64>) -> DMatrix<f64> {
        if self.codomain.ncols() == 0 {
            return self.domain.clone();
        }
        &self.domain + &self.codomain * self.poly.jacobian(x)
    }

    /// (ẋ, ẏ) for the desingularized field at the graph point over `x`.
    pub fn split_field(&self, spec: &SystemSpec, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let g = &self.tinv * spec.f(&self.point(x));
        let k = self.k();
        (g.rows(0, k).into_owned(), g.rows(k, g.len() - k).into_owned())
    }

    /// |Dh(x)·ẋ − ẏ| at the graph point over `x`.
    pub fn invariance_defect(&self, spec: &SystemSpec, x: &DVector<f64>) -> f64 {
        let (gx, gy) = self.split_field(spec, x);
        if gy.is_empty() {
            return 0.0;
        }
        (self.poly.jacobian(x) * gx - gy).norm()
    }

    /// Max invariance defect over sample points of the sphere |x| = r.
    pub fn residual_on_sphere(&self, spec: &SystemSpec, r: f64) -> f64 {
        sphere_directions(self.k())
            .iter()
            .map(|dir| self.invariance_defect(spec, &(dir * r)))
            .fold(0.0, f64::max)
    }

    pub fn residual_at(&self, r: f64) -> Option<f64> {
        self.residual
            .iter()
            .find(|s| (s.radius - r).abs() <= 1e-12 * r)
            .map(|s| s.defect)
    }

    fn measure(&mut self, spec: &SystemSpec) {
        let radii: Vec<f64> = (0..=20).map(|i| 1e-3 * 2f64.powf(i as f64 * 0.5)).collect();
        self.residual = radii
            .iter()
            .map(|&r| ResidualSample {
                radius: r,
                defect: self.residual_on_sphere(spec, r),
            })
            .collect();
        self.validity_radius = self
            .residual
            .iter()
            .take_while(|s| s.defect <= VALIDITY_RESIDUAL)
            .last()
            .map_or(0.0, |s| s.radius);
    }

    /// Graph coordinates of points of the manifold on S inside |x| ≤ radius,
    /// found by Newton iteration on ζ along the graph.
    pub fn singular_intersections(&self, spec: &SystemSpec, radius: f64, n: usize, tol_s: f64) -> Vec<DVector<f64>> {
        let k = self.k();
        let mut found = Vec::new();
        for seed in grid_points(k, radius, n) {
            let mut x = seed;
            for _ in 0..60 {
                let u = self.point(&x);
                let z = spec.zeta(&u);
                if z.abs() <= tol_s {
                    break;
                }
                let gx = self.tangent(&x).transpose() * spec.grad_zeta(&u);
                let n2 = gx.norm_squared();
                if n2 == 0.0 || !n2.is_finite() {
                    break;
                }
                x -= gx * (z / n2);
            }
            let u = self.point(&x);
            if spec.zeta(&u).abs() <= tol_s && x.norm() <= 2.0 * radius {
                found.push(x);
            }
        }
        found
    }

    pub fn to_record(&self) -> ManifoldRecord {
        ManifoldRecord {
            base: self.base.iter().copied().collect(),
            domain_basis: rows(&self.domain),
            codomain_basis: rows(&self.codomain),
            coefficients: self
                .poly
                .terms()
                .iter()
                .map(|(e, c)| CoefficientRecord {
                    multi_index: e.clone(),
                    codomain_coeffs: c.clone(),
                })
                .collect(),
            order: self.order,
            residual: self.residual.clone(),
            validity_radius: self.validity_radius,
        }
    }
}

/// Deterministic unit directions in R^k: ± axes, normalized corners, and a
/// fixed pseudo-random set.
pub fn sphere_directions(k: usize) -> Vec<DVector<f64>> {
    let mut dirs = Vec::new();
    if k == 0 {
        return vec![DVector::zeros(0)];
    }
    for i in 0..k {
        for s in [1.0, -1.0] {
            let mut v = DVector::zeros(k);
            v[i] = s;
            dirs.push(v);
        }
    }
    if k > 1 && k <= 5 {
        for mask in 0..(1usize << k) {
            let v = DVector::from_fn(k, |i, _| if mask >> i & 1 == 1 { -1.0 } else { 1.0 });
            dirs.push(v.normalize());
        }
    }
    if k > 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..16 {
            let v = DVector::from_fn(k, |_, _| rng.gen_range(-1.0..1.0));
            if v.norm() > 1e-3 {
                dirs.push(v.normalize());
            }
        }
    }
    dirs
}

/// About `n` points of a uniform grid in [−r, r]^k (cell midpoints).
pub fn grid_points(k: usize, r: f64, n: usize) -> Vec<DVector<f64>> {
    if k == 0 {
        return vec![DVector::zeros(0)];
    }
    let m = (n.max(1) as f64).powf(1.0 / k as f64).ceil().max(1.0) as usize;
    let total = m.pow(k as u32);
    (0..total)
        .map(|mut idx| {
            DVector::from_fn(k, |_, _| {
                let i = idx % m;
                idx /= m;
                -r + 2.0 * r * (i as f64 + 0.5) / m as f64
            })
        })
        .collect()
}

/// Solves the invariance equation for a graph over span(`domain`) with
/// values in span(`codomain`) through `base`, degrees 2..=order.
///
/// Both spans must be invariant under DF(base).
pub fn solve_graph(
    spec: &SystemSpec,
    base: &DVector<f64>,
    domain: &DMatrix<f64>,
    codomain: &DMatrix<f64>,
    order: usize,
) -> Result<TaylorManifold> {
    let d = spec.dim();
    spec.check_dim(base)?;
    if order < 2 {
        return Err(Error::InvalidInput(format!("expansion order must be at least 2, got {order}")));
    }
    let k = domain.ncols();
    let m = codomain.ncols();
    if k + m != d || domain.nrows() != d || codomain.nrows() != d {
        return Err(Error::InvalidInput("domain and codomain must be complementary".into()));
    }
    let f0 = spec.f(base).norm();
    if f0 > TOL_EQ {
        return Err(Error::OriginNotEquilibrium {
            f_norm: f0,
            zeta: spec.zeta(base),
        });
    }
    let t = hstack(&[domain, codomain]);
    let separation = t.singular_values().min();
    let tinv = t.clone().try_inverse().filter(|_| separation > 1e-10).ok_or(Error::IllConditioned { separation })?;
    let a = spec.jacobian_analytic(base);
    let ahat = &tinv * &a * &t;
    let ax = ahat.view((0, 0), (k, k)).into_owned();
    let ay = ahat.view((k, k), (m, m)).into_owned();

    let mut poly = GraphPoly::zero(k, m, order);
    if m > 0 && k > 0 {
        for deg in 2..=order {
            let space = JetSpace::get(k, deg);
            let x: Vec<Jet> = (0..k).map(|i| Jet::variable(&space, i, 0.0)).collect();
            let h = poly.eval(&x);
            let u: Vec<Jet> = (0..d)
                .map(|i| {
                    let mut acc = Jet::constant_in(&space, base[i]);
                    for (j, xj) in x.iter().enumerate() {
                        if domain[(i, j)] != 0.0 {
                            acc = acc + xj.clone() * domain[(i, j)];
                        }
                    }
                    for (l, hl) in h.iter().enumerate() {
                        if codomain[(i, l)] != 0.0 {
                            acc = acc + hl.clone() * codomain[(i, l)];
                        }
                    }
                    acc
                })
                .collect();
            let f = spec.field_jet(&u);
            let g: Vec<Jet> = (0..d)
                .map(|r| {
                    let mut acc = Jet::zero_in(&space);
                    for (c, fc) in f.iter().enumerate() {
                        if tinv[(r, c)] != 0.0 {
                            acc = acc + fc.clone() * tinv[(r, c)];
                        }
                    }
                    acc
                })
                .collect();
            let dh: Vec<Vec<Jet>> = (0..k).map(|v| poly.eval_partial(&x, v)).collect();
            let monos = homogeneous_monomials(k, deg);
            let nm = monos.len();
            let mut rhs = DVector::zeros(nm * m);
            for l in 0..m {
                let mut r = -g[k + l].clone();
                for (v, dhv) in dh.iter().enumerate() {
                    r = r + dhv[l].clone() * g[v].clone();
                }
                for (a_idx, e) in monos.iter().enumerate() {
                    rhs[a_idx * m + l] = -r.coeff(e);
                }
            }
            let index = |e: &[u32]| monos.iter().position(|q| q.as_slice() == e);
            let mut lmat = DMatrix::zeros(nm * m, nm * m);
            for (a_idx, e) in monos.iter().enumerate() {
                for l in 0..m {
                    let col = a_idx * m + l;
                    // D(x^α)·A_x x
                    for i in 0..k {
                        if e[i] == 0 {
                            continue;
                        }
                        for q in 0..k {
                            let c = e[i] as f64 * ax[(i, q)];
                            if c == 0.0 {
                                continue;
                            }
                            let mut ne = e.clone();
                            ne[i] -= 1;
                            ne[q] += 1;
                            let row = index(&ne).expect("same degree") * m + l;
                            lmat[(row, col)] += c;
                        }
                    }
                    // −A_y e_l x^α
                    for lp in 0..m {
                        lmat[(a_idx * m + lp, col)] -= ay[(lp, l)];
                    }
                }
            }
            let svd = lmat.svd(true, true);
            let smax: f64 = svd.singular_values.max();
            let smin = svd.singular_values.min();
            if !(smin > 1e-11 * smax.max(1e-300)) {
                return Err(Error::ResolutionFailure { degree: deg });
            }
            let sol = svd.solve(&rhs, 0.0).expect("U and Vᵗ were requested");
            for (a_idx, e) in monos.iter().enumerate() {
                for l in 0..m {
                    let mut c = sol[a_idx * m + l];
                    if c.abs() < 1e-15 {
                        c = 0.0;
                    }
                    poly.set(e, l, c);
                }
            }
        }
    }
    let mut mfd = TaylorManifold {
        base: base.clone(),
        domain: domain.clone(),
        codomain: codomain.clone(),
        tinv,
        poly,
        order,
        residual: Vec::new(),
        validity_radius: 0.0,
    };
    mfd.measure(spec);
    Ok(mfd)
}
