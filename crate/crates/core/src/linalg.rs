//! Real invariant subspaces grouped by the sign of Re λ.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

/// Smallest singular value of the stacked bases [center | stable | unstable]
/// below which the splitting is rejected.
pub const SEPARATION_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SpectralSplit {
    pub center: DMatrix<f64>,
    pub stable: DMatrix<f64>,
    pub unstable: DMatrix<f64>,
    /// Eigenvalues as (re, im), grouped like the bases.
    pub center_eigs: Vec<(f64, f64)>,
    pub stable_eigs: Vec<(f64, f64)>,
    pub unstable_eigs: Vec<(f64, f64)>,
    /// Smallest singular value of the stacked bases.
    pub separation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Group {
    Center,
    Stable,
    Unstable,
}

fn classify(re: f64, tol: f64) -> Group {
    if re < -tol {
        Group::Stable
    } else if re > tol {
        Group::Unstable
    } else {
        Group::Center
    }
}

/// Pairs conjugate eigenvalues; returns (re, im ≥ 0, is_pair).
fn real_factors(eigs: &[Complex<f64>], scale: f64) -> Vec<(f64, f64, bool)> {
    let tol = 1e-10 * scale.max(1.0);
    let mut used = vec![false; eigs.len()];
    let mut out = Vec::new();
    for i in 0..eigs.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let l = eigs[i];
        if l.im.abs() <= tol {
            out.push((l.re, 0.0, false));
            continue;
        }
        let partner = (0..eigs.len())
            .filter(|&j| !used[j])
            .min_by(|&a, &b| {
                let da = (eigs[a] - l.conj()).norm();
                let db = (eigs[b] - l.conj()).norm();
                da.partial_cmp(&db).expect("finite eigenvalues")
            });
        if let Some(j) = partner {
            used[j] = true;
        }
        out.push((l.re, l.im.abs(), true));
    }
    out
}

/// Columns of `m` rewritten so that chosen pivot rows form an identity block,
/// then orthonormalized in pivot-row order.
pub fn canonical_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (d, k) = m.shape();
    if k == 0 {
        return DMatrix::zeros(d, 0);
    }
    let mut b = m.clone();
    let mut pivots = Vec::with_capacity(k);
    for j in 0..k {
        let mut best = (0, -1.0);
        for r in 0..d {
            if pivots.contains(&r) {
                continue;
            }
            let a = b[(r, j)].abs();
            if a > best.1 {
                best = (r, a);
            }
        }
        let r = best.0;
        pivots.push(r);
        let p = b[(r, j)];
        let col = b.column(j) / p;
        b.set_column(j, &col);
        for jj in 0..k {
            if jj != j {
                let f = b[(r, jj)];
                let c = b.column(jj) - &col * f;
                b.set_column(jj, &c);
            }
        }
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&j| pivots[j]);
    let mut q = DMatrix::zeros(d, k);
    for (out_j, &j) in order.iter().enumerate() {
        let mut v: DVector<f64> = b.column(j).into_owned();
        for _ in 0..2 {
            for prev in 0..out_j {
                let qp = q.column(prev).into_owned();
                let c = qp.dot(&v);
                v -= qp * c;
            }
        }
        let n = v.norm();
        q.set_column(out_j, &(v / n));
    }
    for x in q.iter_mut() {
        if x.abs() < 1e-15 {
            *x = 0.0;
        }
    }
    q
}

fn invariant_subspace(
    a: &DMatrix<f64>,
    factors: &[(f64, f64, bool)],
    groups: &[Group],
    keep: Group,
    dim: usize,
) -> DMatrix<f64> {
    let d = a.nrows();
    if dim == 0 {
        return DMatrix::zeros(d, 0);
    }
    let id = DMatrix::<f64>::identity(d, d);
    let mut p = id.clone();
    for (&(re, im, pair), &g) in factors.iter().zip(groups) {
        if g == keep {
            continue;
        }
        let f = if pair {
            a * a - a * (2.0 * re) + &id * (re * re + im * im)
        } else {
            a - &id * re
        };
        p = f * p;
        let n = p.amax();
        if n > 0.0 {
            p /= n;
        }
    }
    let svd = p.svd(true, false);
    let u = svd.u.expect("requested U");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&x, &y| {
        svd.singular_values[y]
            .partial_cmp(&svd.singular_values[x])
            .expect("finite singular values")
    });
    let cols: Vec<DVector<f64>> = idx[..dim].iter().map(|&i| u.column(i).into_owned()).collect();
    canonical_basis(&DMatrix::from_columns(&cols))
}

/// Splits R^d into the real invariant subspaces of `a` with Re λ < −tol,
/// |Re λ| ≤ tol and Re λ > tol.
pub fn spectral_split(a: &DMatrix<f64>, tol_center: f64) -> Result<SpectralSplit> {
    let d = a.nrows();
    if a.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: a.ncols(),
        });
    }
    let scale = a.amax();
    let s = if scale > 0.0 { scale } else { 1.0 };
    let a_scaled = a / s;
    let eigs: Vec<Complex<f64>> = a.complex_eigenvalues().iter().copied().collect();
    let factors = real_factors(&eigs, scale);
    let groups: Vec<Group> = factors.iter().map(|f| classify(f.0, tol_center)).collect();
    let scaled: Vec<(f64, f64, bool)> = factors.iter().map(|&(r, i, p)| (r / s, i / s, p)).collect();

    let mut eig_lists: [Vec<(f64, f64)>; 3] = Default::default();
    let mut dims = [0usize; 3];
    for (&(re, im, pair), &g) in factors.iter().zip(&groups) {
        let slot = match g {
            Group::Center => 0,
            Group::Stable => 1,
            Group::Unstable => 2,
        };
        eig_lists[slot].push((re, im));
        if pair {
            eig_lists[slot].push((re, -im));
            dims[slot] += 2;
        } else {
            dims[slot] += 1;
        }
    }
    let center = invariant_subspace(&a_scaled, &scaled, &groups, Group::Center, dims[0]);
    let stable = invariant_subspace(&a_scaled, &scaled, &groups, Group::Stable, dims[1]);
    let unstable = invariant_subspace(&a_scaled, &scaled, &groups, Group::Unstable, dims[2]);

    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(d);
    for m in [&center, &stable, &unstable] {
        cols.extend(m.column_iter().map(|c| c.into_owned()));
    }
    let separation = if cols.is_empty() {
        1.0
    } else {
        let all = DMatrix::from_columns(&cols);
        all.singular_values().min()
    };
    if separation < SEPARATION_TOL {
        return Err(Error::IllConditioned { separation });
    }
    let [center_eigs, stable_eigs, unstable_eigs] = eig_lists;
    Ok(SpectralSplit {
        center,
        stable,
        unstable,
        center_eigs,
        stable_eigs,
        unstable_eigs,
        separation,
    })
}

/// Concatenates matrices with equal row counts.
pub fn hstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols: Vec<DVector<f64>> = blocks
        .iter()
        .flat_map(|b| b.column_iter().map(|c| c.into_owned()))
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(rows, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Numerical rank with threshold `rel_tol · σ_max`.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> (usize, DVector<f64>) {
    if m.ncols() == 0 || m.nrows() == 0 {
        return (0, DVector::zeros(0));
    }
    let sv = m.singular_values();
    let smax = sv.max();
    let rank = sv.iter().filter(|&&s| s > rel_tol * smax).count();
    (rank, sv)
}

/// Least-squares / minimum-norm solution of m·x = b via SVD.
pub fn min_norm_solve(m: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    svd.solve(b, 1e-12 * smax.max(f64::MIN_POSITIVE))
        .expect("U and Vᵗ were requested")
}
