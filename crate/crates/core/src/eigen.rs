//! Dense eigensolver for general (non-normal) complex matrices.
//!
//! Eigenvalues come from Householder reduction to upper Hessenberg form
//! followed by explicitly shifted QR sweeps with Wilkinson shifts. Eigenvectors
//! are recovered afterwards by inverse iteration, one eigenvalue cluster at a
//! time, which copes with the semisimple repeated eigenvalues that appear in
//! the walk operators (a plain Schur back-substitution divides by zero there).

use crate::error::{Error, Result};
use crate::linalg::{inner, norm, normalize, re, CMatrix, C64, ONE, ZERO};

/// Default ceiling on the matrix dimension accepted by [`eig`].
pub const DEFAULT_SIZE_LIMIT: usize = 256;

/// Eigenvalues closer than this are reported as one cluster.
pub const CLUSTER_TOL: f64 = 1e-8;

/// Largest eigenvalue split still examined for a hidden Jordan block.
const DEFECTIVE_SPLIT_TOL: f64 = 1e-5;

const MAX_SWEEPS_PER_EIGENVALUE: usize = 60;

#[derive(Debug, Clone)]
pub struct Cluster {
    pub center: C64,
    /// Indices into [`Eigensystem::values`].
    pub members: Vec<usize>,
    /// Number of linearly independent eigenvectors found for the cluster.
    pub geometric_multiplicity: usize,
}

impl Cluster {
    pub fn algebraic_multiplicity(&self) -> usize {
        self.members.len()
    }

    pub fn is_semisimple(&self) -> bool {
        self.geometric_multiplicity == self.members.len()
    }
}

#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub values: Vec<C64>,
    /// Unit-norm right eigenvectors, `vectors[j]` belongs to `values[j]`.
    pub vectors: Vec<Vec<C64>>,
    pub clusters: Vec<Cluster>,
}

impl Eigensystem {
    /// Largest `‖A x - λ x‖` over all pairs.
    pub fn max_residual(&self, a: &CMatrix) -> f64 {
        self.values
            .iter()
            .zip(&self.vectors)
            .map(|(&l, x)| {
                let ax = a.mul_vec(x);
                ax.iter()
                    .zip(x)
                    .map(|(p, q)| (p - l * q).norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn is_diagonalizable(&self) -> bool {
        self.clusters.iter().all(Cluster::is_semisimple)
    }

    /// Index of the eigenvalue nearest to `target`.
    pub fn nearest(&self, target: C64) -> usize {
        self.values
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - target).norm().total_cmp(&(b.1 - target).norm()))
            .map(|(i, _)| i)
            .expect("empty spectrum")
    }
}

/// Eigenvalues only. Order follows deflation (bottom of the Hessenberg form
/// first) and carries no meaning.
pub fn eigenvalues(a: &CMatrix) -> Result<Vec<C64>> {
    if !a.is_square() {
        return Err(Error::InvalidArgument(format!(
            "eigenvalues of a {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    let mut h = a.clone();
    hessenberg_in_place(&mut h);
    shifted_qr(&mut h)
}

/// Full eigendecomposition with the default size limit.
pub fn eig(a: &CMatrix) -> Result<Eigensystem> {
    eig_with_limit(a, DEFAULT_SIZE_LIMIT)
}

pub fn eig_with_limit(a: &CMatrix, limit: usize) -> Result<Eigensystem> {
    if a.rows() > limit {
        return Err(Error::MatrixTooLarge { dim: a.rows(), limit });
    }
    let mut values = eigenvalues(a)?;
    values.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));

    let scale = a.frobenius_norm().max(1.0);
    let groups = merge_defective_splits(a, &values, group_values(&values, CLUSTER_TOL * scale), scale)?;
    let mut vectors = vec![Vec::new(); values.len()];
    let mut clusters = Vec::with_capacity(groups.len());
    for members in groups {
        let center = members.iter().map(|&i| values[i]).sum::<C64>() / members.len() as f64;
        // The mean of a split cluster is far more accurate than its members.
        for &idx in &members {
            values[idx] = center;
        }
        let basis = eigenspace_basis(a, center, members.len(), scale)?;
        let geometric = basis.len();
        for (slot, &idx) in members.iter().enumerate() {
            // A defective cluster has fewer independent vectors than members;
            // the surplus members reuse the last vector found.
            vectors[idx] = basis[slot.min(geometric - 1)].clone();
        }
        clusters.push(Cluster {
            center,
            members,
            geometric_multiplicity: geometric,
        });
    }
    Ok(Eigensystem {
        values,
        vectors,
        clusters,
    })
}

/// A Jordan block splits its eigenvalue by roughly `eps^(1/size)`, well
/// beyond [`CLUSTER_TOL`]. Nearby groups whose eigenvectors are parallel are
/// such splits and get merged.
fn merge_defective_splits(
    a: &CMatrix,
    values: &[C64],
    mut groups: Vec<Vec<usize>>,
    scale: f64,
) -> Result<Vec<Vec<usize>>> {
    let center = |g: &[usize]| g.iter().map(|&i| values[i]).sum::<C64>() / g.len() as f64;
    loop {
        let mut merged = false;
        'search: for i in 0..groups.len() {
            for j in i + 1..groups.len() {
                let (ci, cj) = (center(&groups[i]), center(&groups[j]));
                if (ci - cj).norm() > DEFECTIVE_SPLIT_TOL * scale {
                    continue;
                }
                let xi = eigenspace_basis(a, ci, 1, scale)?.remove(0);
                let xj = eigenspace_basis(a, cj, 1, scale)?.remove(0);
                if inner(&xi, &xj).norm() >= 1.0 - 1e-6 {
                    let moved = groups.remove(j);
                    groups[i].extend(moved);
                    groups[i].sort_unstable();
                    merged = true;
                    break 'search;
                }
            }
        }
        if !merged {
            return Ok(groups);
        }
    }
}

/// Groups indices of `values` whose members lie within `tol` of some other
/// member (single linkage).
pub fn group_values(values: &[C64], tol: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while parent[r] != r {
            r = parent[r];
        }
        parent[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if (values[i] - values[j]).norm() <= tol {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[rj] = ri;
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if root_slot[r] == usize::MAX {
            root_slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[root_slot[r]].push(i);
    }
    groups
}

/// Orthonormal basis of the (numerical) eigenspace of `a` at `lambda`,
/// holding at most `count` vectors.
///
/// A simple eigenvalue uses inverse iteration. A cluster reads the null
/// space of `a - lambda` off a column-pivoted QR factorization, which also
/// exposes Jordan blocks as missing vectors.
pub fn eigenspace_basis(a: &CMatrix, lambda: C64, count: usize, scale: f64) -> Result<Vec<Vec<C64>>> {
    let shifted = a.shifted(lambda);
    if count > 1 {
        let basis: Vec<Vec<C64>> = null_space(&shifted, 1e-7 * scale, count)
            .into_iter()
            .filter(|v| residual(a, lambda, v) <= 1e-6 * scale)
            .collect();
        if !basis.is_empty() {
            return Ok(basis);
        }
    }
    let n = a.rows();
    let iteration = shifted.shifted(re(-1e-11 * scale));
    let floor = 1e-14 * scale;
    let mut best: Option<(f64, Vec<C64>)> = None;
    // A second start guards against a start vector orthogonal to the
    // eigenvector.
    for start in 0..2 {
        let mut x = start_vector(n, start);
        for _ in 0..3 {
            x = iteration.solve(&x, floor)?;
            normalize(&mut x);
        }
        let r = residual(a, lambda, &x);
        if best.as_ref().is_none_or(|(rb, _)| r < *rb) {
            best = Some((r, x));
        }
    }
    Ok(vec![best.expect("at least one start").1])
}

/// Orthonormal basis of the numerical null space of `b` (at most `max`
/// vectors), from Householder QR with column pivoting. Columns whose
/// remaining norm drops below `tol` are treated as dependent.
pub fn null_space(b: &CMatrix, tol: f64, max: usize) -> Vec<Vec<C64>> {
    let (rows, cols) = (b.rows(), b.cols());
    let mut r = b.clone();
    let mut perm: Vec<usize> = (0..cols).collect();
    let mut rank = 0;
    for j in 0..cols.min(rows) {
        let col_norm = |r: &CMatrix, c: usize| (j..rows).map(|i| r[(i, c)].norm_sqr()).sum::<f64>().sqrt();
        let (p, best) = (j..cols)
            .map(|c| (c, col_norm(&r, c)))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("non-empty range");
        if best <= tol {
            break;
        }
        if p != j {
            for i in 0..rows {
                let tmp = r[(i, j)];
                r[(i, j)] = r[(i, p)];
                r[(i, p)] = tmp;
            }
            perm.swap(j, p);
        }
        let x0 = r[(j, j)];
        let phase = if x0.norm() == 0.0 { ONE } else { x0 / x0.norm() };
        let mut v: Vec<C64> = (j..rows).map(|i| r[(i, j)]).collect();
        v[0] += phase * best;
        let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        for c in j..cols {
            let s: C64 = (0..v.len()).map(|i| v[i].conj() * r[(j + i, c)]).sum();
            let f = s * 2.0 / vnorm2;
            for i in 0..v.len() {
                r[(j + i, c)] -= f * v[i];
            }
        }
        rank = j + 1;
    }
    let mut basis: Vec<Vec<C64>> = Vec::new();
    for free in rank..cols {
        if basis.len() == max {
            break;
        }
        // Solve R11 z = -R12[:, free] by back substitution.
        let mut z = vec![ZERO; rank];
        for i in (0..rank).rev() {
            let mut acc = -r[(i, free)];
            for k in i + 1..rank {
                acc -= r[(i, k)] * z[k];
            }
            z[i] = acc / r[(i, i)];
        }
        let mut w = vec![ZERO; cols];
        for i in 0..rank {
            w[perm[i]] = z[i];
        }
        w[perm[free]] = ONE;
        for q in &basis {
            let p = inner(q, &w);
            w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= p * qi);
        }
        if normalize(&mut w) > 0.0 {
            basis.push(w);
        }
    }
    basis
}

fn residual(a: &CMatrix, lambda: C64, x: &[C64]) -> f64 {
    let ax = a.mul_vec(x);
    let diff: Vec<C64> = ax.iter().zip(x).map(|(p, q)| p - lambda * q).collect();
    norm(&diff)
}

/// Deterministic, generic-looking start vectors.
fn start_vector(n: usize, seed: usize) -> Vec<C64> {
    let mut v: Vec<C64> = (0..n)
        .map(|i| {
            let t = (i as f64 + 1.0) * (seed as f64 * 0.754_877_666 + 0.569_840_29);
            C64::new((t * 2.399_963).sin() + 1.1, (t * 1.618_034).cos() * 0.7)
        })
        .collect();
    normalize(&mut v);
    v
}

/// Householder reduction to upper Hessenberg form (similarity transform).
fn hessenberg_in_place(h: &mut CMatrix) {
    let n = h.rows();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let alpha: f64 = (k + 1..n).map(|i| h[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if alpha == 0.0 {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let phase = if x0.norm() == 0.0 { ONE } else { x0 / x0.norm() };
        // v = x + phase * alpha * e1, reflector I - 2 v v* / (v* v)
        let mut v: Vec<C64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        v[0] += phase * alpha;
        let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // Left application: rows k+1.., all columns from k.
        for j in k..n {
            let s: C64 = (0..v.len()).map(|i| v[i].conj() * h[(k + 1 + i, j)]).sum();
            let f = s * 2.0 / vnorm2;
            for i in 0..v.len() {
                h[(k + 1 + i, j)] -= f * v[i];
            }
        }
        // Right application: all rows, columns k+1..
        for i in 0..n {
            let s: C64 = (0..v.len()).map(|j| h[(i, k + 1 + j)] * v[j]).sum();
            let f = s * 2.0 / vnorm2;
            for j in 0..v.len() {
                h[(i, k + 1 + j)] -= f * v[j].conj();
            }
        }
        for i in k + 2..n {
            h[(i, k)] = ZERO;
        }
    }
}

fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half_tr = (a + d) * 0.5;
    let disc = ((a - d) * 0.5).powi(2) + b * c;
    let root = disc.sqrt();
    let l1 = half_tr + root;
    let l2 = half_tr - root;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// Explicitly shifted QR on an upper Hessenberg matrix, returning all
/// eigenvalues. Only the active window is updated.
fn shifted_qr(h: &mut CMatrix) -> Result<Vec<C64>> {
    let n = h.rows();
    let mut values = vec![ZERO; n];
    if n == 0 {
        return Ok(values);
    }
    let eps = f64::EPSILON;
    let hnorm = h.frobenius_norm().max(f64::MIN_POSITIVE);
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    loop {
        if hi == 0 {
            values[0] = h[(0, 0)];
            break;
        }
        // Locate the start of the unreduced block ending at `hi`.
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let diag = h[(lo, lo)].norm() + h[(lo - 1, lo - 1)].norm();
            let thresh = if diag == 0.0 { eps * hnorm } else { eps * diag };
            if sub <= thresh {
                h[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            values[hi] = h[(hi, hi)];
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if iter > MAX_SWEEPS_PER_EIGENVALUE {
            return Err(Error::NoConvergence {
                iterations: total,
                index: hi,
            });
        }
        let mu = if iter % 11 == 0 {
            // Exceptional shift to break cycles.
            h[(hi, hi)] + re(0.75 * h[(hi, hi - 1)].norm())
        } else {
            wilkinson_shift(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };
        qr_sweep(h, lo, hi, mu);
    }
    Ok(values)
}

fn qr_sweep(h: &mut CMatrix, lo: usize, hi: usize, mu: C64) {
    for i in lo..=hi {
        h[(i, i)] -= mu;
    }
    let mut rotations = Vec::with_capacity(hi - lo);
    for k in lo..hi {
        let a = h[(k, k)];
        let b = h[(k + 1, k)];
        let r = a.norm().hypot(b.norm());
        let (cs, sn) = if r == 0.0 { (ONE, ZERO) } else { (a / r, b / r) };
        for j in k..=hi {
            let x = h[(k, j)];
            let y = h[(k + 1, j)];
            h[(k, j)] = cs.conj() * x + sn.conj() * y;
            h[(k + 1, j)] = -sn * x + cs * y;
        }
        rotations.push((cs, sn));
    }
    for (offset, (cs, sn)) in rotations.into_iter().enumerate() {
        let k = lo + offset;
        for i in lo..=(k + 1).min(hi) {
            let x = h[(i, k)];
            let y = h[(i, k + 1)];
            h[(i, k)] = x * cs + y * sn;
            h[(i, k + 1)] = -x * sn.conj() + y * cs.conj();
        }
    }
    for i in lo..=hi {
        h[(i, i)] += mu;
    }
}

/// Unit right and left eigenvectors of a simple eigenvalue near `lambda`,
/// with the left vector scaled so that `⟨l, r⟩ = 1`. The spectral projection
/// is then `r l*`.
pub fn biorthogonal_pair(a: &CMatrix, lambda: C64) -> Result<(Vec<C64>, Vec<C64>)> {
    let scale = a.frobenius_norm().max(1.0);
    let right = eigenspace_basis(a, lambda, 1, scale)?.remove(0);
    let left = eigenspace_basis(&a.adjoint(), lambda.conj(), 1, scale)?.remove(0);
    let overlap = inner(&left, &right);
    if overlap.norm() < 1e-14 {
        return Err(Error::InvalidArgument(format!(
            "left and right eigenvectors at {lambda} are orthogonal; eigenvalue is not simple"
        )));
    }
    // ⟨l', r⟩ = 1 with l' = l / conj(⟨l, r⟩).
    let scale_left = overlap.conj().inv();
    let left = left.into_iter().map(|x| x * scale_left).collect();
    Ok((right, left))
}

/// Spectral projection `r l*` of the simple eigenvalue of `a` near `lambda`.
pub fn spectral_projection(a: &CMatrix, lambda: C64) -> Result<CMatrix> {
    let (r, l) = biorthogonal_pair(a, lambda)?;
    Ok(CMatrix::outer(&r, &l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn sorted(mut v: Vec<C64>) -> Vec<C64> {
        v.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
        v
    }

    #[test]
    fn triangular_matrix_eigenvalues_are_its_diagonal() {
        let a = CMatrix::from_rows(&[
            vec![c(1.0, 1.0), re(2.0), c(0.0, 3.0)],
            vec![ZERO, re(-2.0), re(1.0)],
            vec![ZERO, ZERO, c(0.5, -0.5)],
        ]);
        let got = sorted(eigenvalues(&a).unwrap());
        let want = sorted(vec![c(1.0, 1.0), re(-2.0), c(0.5, -0.5)]);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).norm() < 1e-13, "{g} vs {w}");
        }
    }

    #[test]
    fn rotation_has_conjugate_pair() {
        let (s, co) = 0.3f64.sin_cos();
        let a = CMatrix::from_real_rows(&[&[co, -s], &[s, co]]);
        let got = sorted(eigenvalues(&a).unwrap());
        assert!((got[0] - c(co, -s)).norm() < 1e-14);
        assert!((got[1] - c(co, s)).norm() < 1e-14);
    }

    #[test]
    fn companion_matrix_recovers_polynomial_roots() {
        // (z - 1)(z + 2)(z - i)(z - 3 + i)
        let roots = [re(1.0), re(-2.0), c(0.0, 1.0), c(3.0, -1.0)];
        let mut coeffs = vec![ONE];
        for r in roots {
            let mut next = vec![ZERO; coeffs.len() + 1];
            for (k, a) in coeffs.iter().enumerate() {
                next[k] += *a;
                next[k + 1] -= a * r;
            }
            coeffs = next;
        }
        let n = roots.len();
        let mut comp = CMatrix::zeros(n, n);
        for j in 0..n {
            comp[(0, j)] = -coeffs[j + 1];
        }
        for i in 1..n {
            comp[(i, i - 1)] = ONE;
        }
        let es = eig(&comp).unwrap();
        for r in roots {
            let i = es.nearest(r);
            assert!((es.values[i] - r).norm() < 1e-12);
        }
        assert!(es.max_residual(&comp) < 1e-10 * comp.frobenius_norm());
    }

    #[test]
    fn jordan_block_is_reported_defective() {
        let a = CMatrix::from_real_rows(&[&[2.0, 1.0], &[0.0, 2.0]]);
        let es = eig(&a).unwrap();
        assert_eq!(es.clusters.len(), 1);
        assert_eq!(es.clusters[0].algebraic_multiplicity(), 2);
        assert_eq!(es.clusters[0].geometric_multiplicity, 1);
        assert!(!es.is_diagonalizable());
    }

    #[test]
    fn repeated_semisimple_eigenvalue_gets_full_basis() {
        // diag(1, 1, 3) conjugated by a non-unitary similarity.
        let s = CMatrix::from_rows(&[
            vec![re(1.0), c(0.5, 0.2), re(0.0)],
            vec![re(0.3), re(1.0), c(0.0, -0.4)],
            vec![re(0.0), re(0.7), re(1.0)],
        ]);
        let d = CMatrix::from_real_rows(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 3.0]]);
        let a = &(&s * &d) * &s.inverse().unwrap();
        let es = eig(&a).unwrap();
        assert!(es.is_diagonalizable());
        assert!(es.max_residual(&a) < 1e-10 * a.frobenius_norm());
        let one = es.clusters.iter().find(|c| (c.center - ONE).norm() < 1e-8).unwrap();
        assert_eq!(one.geometric_multiplicity, 2);
    }

    #[test]
    fn spectral_projection_is_idempotent_and_commutes() {
        let a = CMatrix::from_rows(&[
            vec![re(0.5), re(2.0), ZERO],
            vec![ZERO, c(0.0, 0.4), re(1.0)],
            vec![re(0.1), ZERO, re(-0.3)],
        ]);
        let es = eig(&a).unwrap();
        for &l in &es.values {
            let p = spectral_projection(&a, l).unwrap();
            assert!((&p * &p).max_abs_diff(&p) < 1e-10);
            assert!((&p * &a).max_abs_diff(&(&a * &p)) < 1e-10);
            assert!((p.trace() - ONE).norm() < 1e-10);
        }
    }
}
