use super::{dot, norm2, DenseMatrix, LinalgError, Lu};
use crate::{from_usize, lit, Scalar};

/// Eigenvalue `re + i·im` with its eigenvector `vector + i·vector_im`.
///
/// The complex vector has unit 2-norm and its largest-magnitude component is
/// real and positive; for real eigenvalues `vector_im` is all zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenPair<S> {
    pub re: S,
    pub im: S,
    pub vector: Vec<S>,
    pub vector_im: Vec<S>,
    /// `‖M w − λ w‖₂` for the complex vector `w`.
    pub residual: S,
}

impl<S: Scalar> EigenPair<S> {
    pub fn is_real(&self) -> bool {
        self.im == S::zero()
    }

    /// Real unit direction used by the trackers: the real part of the
    /// eigenvector, renormalized, largest component positive.
    pub fn direction(&self) -> Vec<S> {
        let base = if norm2(&self.vector) > lit(1e-8) { &self.vector } else { &self.vector_im };
        let mut d = base.clone();
        super::normalize(&mut d);
        fix_sign(&mut d);
        d
    }
}

/// Tuning for [`min_abs_real_eigenpair_with`].
#[derive(Clone, Debug)]
pub struct EigenOptions {
    /// Full QR decomposition up to this dimension, inverse subspace iteration above.
    pub dense_limit: usize,
    pub block: usize,
    pub max_iter: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { dense_limit: 200, block: 4, max_iter: 500 }
    }
}

/// Eigenpair whose eigenvalue has the smallest `|Re λ|`.
pub fn min_abs_real_eigenpair<S: Scalar>(m: &DenseMatrix<S>) -> Result<EigenPair<S>, LinalgError> {
    min_abs_real_eigenpair_with(m, &EigenOptions::default())
}

pub fn min_abs_real_eigenpair_with<S: Scalar>(
    m: &DenseMatrix<S>,
    opts: &EigenOptions,
) -> Result<EigenPair<S>, LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::DimensionMismatch { expected: m.rows(), found: m.cols() });
    }
    if !m.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    if m.rows() <= opts.dense_limit {
        let vals = eigenvalues(m)?;
        let (re, im) = pick_min_abs_real(&vals);
        eigenvector_at(m, re, im)
    } else {
        subspace_min_abs_real(m, opts)
    }
}

/// Picks the smallest `|Re|`; near-ties prefer real values, then the smaller real part.
fn pick_min_abs_real<S: Scalar>(vals: &[(S, S)]) -> (S, S) {
    let scale = vals.iter().fold(S::one(), |a, &(r, i)| a.max(r.abs()).max(i.abs()));
    let tie = lit::<S>(1e-12) * scale;
    let mut best = vals[0];
    for &(r, i) in &vals[1..] {
        let (br, bi) = best;
        let d = r.abs() - br.abs();
        let better = if d < -tie {
            true
        } else if d > tie {
            false
        } else if (i == S::zero()) != (bi == S::zero()) {
            i == S::zero()
        } else if (r - br).abs() > tie {
            r < br
        } else {
            i > bi
        };
        if better {
            best = (r, i);
        }
    }
    best
}

/// All eigenvalues as `(re, im)` pairs: balancing, Householder reduction to
/// Hessenberg form, then shifted Francis QR.
pub fn eigenvalues<S: Scalar>(m: &DenseMatrix<S>) -> Result<Vec<(S, S)>, LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::DimensionMismatch { expected: m.rows(), found: m.cols() });
    }
    let mut a = m.clone();
    balance(&mut a);
    hessenberg(&mut a);
    hqr(&a)
}

fn balance<S: Scalar>(a: &mut DenseMatrix<S>) {
    let n = a.rows();
    let radix = lit::<S>(2.0);
    let sqrdx = radix * radix;
    let mut done = false;
    let mut sweeps = 0;
    while !done && sweeps < 100 {
        done = true;
        sweeps += 1;
        for i in 0..n {
            let mut r = S::zero();
            let mut c = S::zero();
            for j in 0..n {
                if j != i {
                    c = c + a[(j, i)].abs();
                    r = r + a[(i, j)].abs();
                }
            }
            if c == S::zero() || r == S::zero() {
                continue;
            }
            let s = c + r;
            let mut f = S::one();
            let mut g = r / radix;
            while c < g {
                f = f * radix;
                c = c * sqrdx;
            }
            g = r * radix;
            while c > g {
                f = f / radix;
                c = c / sqrdx;
            }
            if (c + r) / f < lit::<S>(0.95) * s {
                done = false;
                let gi = S::one() / f;
                for j in 0..n {
                    a[(i, j)] = a[(i, j)] * gi;
                }
                for j in 0..n {
                    a[(j, i)] = a[(j, i)] * f;
                }
            }
        }
    }
}

fn hessenberg<S: Scalar>(a: &mut DenseMatrix<S>) {
    let n = a.rows();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let mut v: Vec<S> = (k + 1..n).map(|i| a[(i, k)]).collect();
        let alpha = norm2(&v);
        if alpha == S::zero() {
            continue;
        }
        let alpha = if v[0] > S::zero() { -alpha } else { alpha };
        v[0] = v[0] - alpha;
        let vn = norm2(&v);
        if vn == S::zero() {
            continue;
        }
        for x in v.iter_mut() {
            *x = *x / vn;
        }
        let two = lit::<S>(2.0);
        // Left: rows k+1.. of A.
        for j in 0..n {
            let mut s = S::zero();
            for (t, &vi) in v.iter().enumerate() {
                s = s + vi * a[(k + 1 + t, j)];
            }
            s = s * two;
            for (t, &vi) in v.iter().enumerate() {
                a[(k + 1 + t, j)] = a[(k + 1 + t, j)] - s * vi;
            }
        }
        // Right: columns k+1.. of A.
        for i in 0..n {
            let mut s = S::zero();
            for (t, &vi) in v.iter().enumerate() {
                s = s + a[(i, k + 1 + t)] * vi;
            }
            s = s * two;
            for (t, &vi) in v.iter().enumerate() {
                a[(i, k + 1 + t)] = a[(i, k + 1 + t)] - s * vi;
            }
        }
        for i in k + 2..n {
            a[(i, k)] = S::zero();
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (eigenvalues only).
fn hqr<S: Scalar>(h: &DenseMatrix<S>) -> Result<Vec<(S, S)>, LinalgError> {
    let n = h.rows();
    // 1-based working copy keeps the classic index arithmetic readable.
    let mut a = vec![vec![S::zero(); n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            a[i + 1][j + 1] = h[(i, j)];
        }
    }
    let mut wr = vec![S::zero(); n + 1];
    let mut wi = vec![S::zero(); n + 1];
    let eps = S::epsilon();
    let half = lit::<S>(0.5);
    let mut anorm = S::zero();
    for i in 1..=n {
        for j in (i.max(2) - 1)..=n {
            anorm = anorm + a[i][j].abs();
        }
    }
    let mut nn = n;
    let mut t = S::zero();
    while nn >= 1 {
        let mut its = 0usize;
        loop {
            let mut l = nn;
            while l >= 2 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == S::zero() {
                    s = anorm;
                }
                if a[l][l - 1].abs() <= eps * s {
                    a[l][l - 1] = S::zero();
                    break;
                }
                l -= 1;
            }
            let mut x = a[nn][nn];
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = S::zero();
                nn -= 1;
            } else {
                let mut y = a[nn - 1][nn - 1];
                let mut w = a[nn][nn - 1] * a[nn - 1][nn];
                if l == nn - 1 {
                    let p = half * (y - x);
                    let q = p * p + w;
                    let mut z = q.abs().sqrt();
                    x = x + t;
                    if q >= S::zero() {
                        z = p + if p >= S::zero() { z } else { -z };
                        wr[nn - 1] = x + z;
                        wr[nn] = x + z;
                        if z != S::zero() {
                            wr[nn] = x - w / z;
                        }
                        wi[nn - 1] = S::zero();
                        wi[nn] = S::zero();
                    } else {
                        wr[nn - 1] = x + p;
                        wr[nn] = x + p;
                        wi[nn - 1] = -z;
                        wi[nn] = z;
                    }
                    nn = nn.saturating_sub(2);
                } else {
                    if its == 60 {
                        return Err(LinalgError::NoConvergence { iterations: its });
                    }
                    if its % 10 == 0 && its > 0 {
                        t = t + x;
                        for i in 1..=nn {
                            a[i][i] = a[i][i] - x;
                        }
                        let s = a[nn][nn - 1].abs() + a[nn - 1][nn - 2].abs();
                        x = lit::<S>(0.75) * s;
                        y = x;
                        w = lit::<S>(-0.4375) * s * s;
                    }
                    its += 1;
                    let mut m = nn - 2;
                    let (mut p, mut q, mut r);
                    loop {
                        let z = a[m][m];
                        r = x - z;
                        let s = y - z;
                        p = (r * s - w) / a[m + 1][m] + a[m][m + 1];
                        q = a[m + 1][m + 1] - z - r - s;
                        r = a[m + 2][m + 1];
                        let s = p.abs() + q.abs() + r.abs();
                        p = p / s;
                        q = q / s;
                        r = r / s;
                        if m == l {
                            break;
                        }
                        let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                        let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                        if u <= eps * v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in m + 2..=nn {
                        a[i][i - 2] = S::zero();
                        if i != m + 2 {
                            a[i][i - 3] = S::zero();
                        }
                    }
                    let mut k = m;
                    while k + 1 <= nn {
                        if k != m {
                            p = a[k][k - 1];
                            q = a[k + 1][k - 1];
                            r = S::zero();
                            if k != nn - 1 {
                                r = a[k + 2][k - 1];
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != S::zero() {
                                p = p / x;
                                q = q / x;
                                r = r / x;
                            }
                        }
                        let sq = (p * p + q * q + r * r).sqrt();
                        let s = if p >= S::zero() { sq } else { -sq };
                        if s != S::zero() {
                            if k == m {
                                if l != m {
                                    a[k][k - 1] = -a[k][k - 1];
                                }
                            } else {
                                a[k][k - 1] = -s * x;
                            }
                            p = p + s;
                            x = p / s;
                            y = q / s;
                            let z = r / s;
                            q = q / p;
                            r = r / p;
                            for j in k..=nn {
                                let mut pp = a[k][j] + q * a[k + 1][j];
                                if k != nn - 1 {
                                    pp = pp + r * a[k + 2][j];
                                    a[k + 2][j] = a[k + 2][j] - pp * z;
                                }
                                a[k + 1][j] = a[k + 1][j] - pp * y;
                                a[k][j] = a[k][j] - pp * x;
                            }
                            let mmin = if nn < k + 3 { nn } else { k + 3 };
                            for i in l..=mmin {
                                let mut pp = x * a[i][k] + y * a[i][k + 1];
                                if k != nn - 1 {
                                    pp = pp + z * a[i][k + 2];
                                    a[i][k + 2] = a[i][k + 2] - pp * r;
                                }
                                a[i][k + 1] = a[i][k + 1] - pp * q;
                                a[i][k] = a[i][k] - pp;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if nn < 2 || l + 1 >= nn {
                break;
            }
        }
    }
    Ok((1..=n).map(|i| (wr[i], wi[i])).collect())
}

/// Flips `v` so its largest-magnitude component is positive. Components
/// equal in magnitude up to rounding go to the first one.
pub fn fix_sign<S: Scalar>(v: &mut [S]) {
    let big = v.iter().fold(S::zero(), |m, x| m.max(x.abs()));
    let tie = big * (S::one() - lit::<S>(64.0) * S::epsilon());
    let k = v.iter().position(|x| x.abs() >= tie).unwrap_or(0);
    if !v.is_empty() && v[k] < S::zero() {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

fn start_vector<S: Scalar>(n: usize, salt: usize) -> Vec<S> {
    let mut v: Vec<S> = (0..n)
        .map(|i| {
            let t = from_usize::<S>(i * 7 + salt * 13 + 1);
            S::one() + lit::<S>(0.5) * (t * lit(0.618_033_988_7)).sin()
        })
        .collect();
    super::normalize(&mut v);
    v
}

/// Eigenvector for a known eigenvalue `re + i·im` by shifted inverse iteration.
/// Complex eigenvalues go through the real `2n` form
/// `[[M − aI, bI], [−bI, M − aI]] (x; y) = 0`.
pub fn eigenvector_at<S: Scalar>(m: &DenseMatrix<S>, re: S, im: S) -> Result<EigenPair<S>, LinalgError> {
    let n = m.rows();
    let mscale = m.norm_inf().max(S::min_positive_value().sqrt());
    let complex = im != S::zero();
    let dim = if complex { 2 * n } else { n };
    let mut delta = S::epsilon().sqrt() * lit(1e-3) * mscale;
    let mut lu = None;
    for _ in 0..12 {
        let mu = re + delta;
        let sys = if complex {
            DenseMatrix::from_fn(dim, dim, |i, j| {
                let (bi, bj) = (i / n, j / n);
                let (ii, jj) = (i % n, j % n);
                if bi == bj {
                    m[(ii, jj)] - if ii == jj { mu } else { S::zero() }
                } else if ii == jj {
                    if bi == 0 {
                        im
                    } else {
                        -im
                    }
                } else {
                    S::zero()
                }
            })
        } else {
            m.add_diag(-mu)
        };
        match Lu::factor_with_threshold(&sys, S::zero()) {
            Ok(f) => {
                lu = Some(f);
                break;
            }
            Err(_) => delta = delta * lit(10.0),
        }
    }
    let lu = lu.ok_or(LinalgError::NoConvergence { iterations: 12 })?;
    let mut x = start_vector::<S>(dim, 0);
    let mut best: Option<EigenPair<S>> = None;
    for it in 0..8 {
        let mut y = lu.solve(&x);
        let ny = norm2(&y);
        if !ny.is_finite() || ny == S::zero() {
            x = start_vector(dim, it + 1);
            continue;
        }
        for v in y.iter_mut() {
            *v = *v / ny;
        }
        x = y;
        let pair = finish_pair(m, re, im, &x, complex);
        let done = pair.residual <= lit::<S>(1e-13) * mscale;
        if best.as_ref().map_or(true, |b| pair.residual < b.residual) {
            best = Some(pair);
        }
        if done && it >= 1 {
            break;
        }
    }
    best.ok_or(LinalgError::NoConvergence { iterations: 8 })
}

/// Normalizes phase and norm and measures the residual.
fn finish_pair<S: Scalar>(m: &DenseMatrix<S>, re: S, im: S, x: &[S], complex: bool) -> EigenPair<S> {
    let n = m.rows();
    let (mut vr, mut vi) = if complex {
        (x[..n].to_vec(), x[n..].to_vec())
    } else {
        (x.to_vec(), vec![S::zero(); n])
    };
    // Rotate so the largest-modulus component is real positive; near ties
    // go to the first index, as in `fix_sign`.
    let mags: Vec<S> = (0..n).map(|i| (vr[i] * vr[i] + vi[i] * vi[i]).sqrt()).collect();
    let big = mags.iter().fold(S::zero(), |a, &b| a.max(b));
    let tie = big * (S::one() - lit::<S>(64.0) * S::epsilon());
    let k = mags.iter().position(|&x| x >= tie).unwrap_or(0);
    let kmax = mags.get(k).copied().unwrap_or(S::zero());
    if kmax > S::zero() {
        let (c, s) = (vr[k] / kmax, -vi[k] / kmax);
        for i in 0..n {
            let (a, b) = (vr[i], vi[i]);
            vr[i] = a * c - b * s;
            vi[i] = a * s + b * c;
        }
        vi[k] = S::zero();
    }
    let nrm = (dot(&vr, &vr) + dot(&vi, &vi)).sqrt();
    if nrm > S::zero() {
        for i in 0..n {
            vr[i] = vr[i] / nrm;
            vi[i] = vi[i] / nrm;
        }
    }
    let mr = m.matvec(&vr);
    let mi = m.matvec(&vi);
    let mut res = S::zero();
    for i in 0..n {
        let rr = mr[i] - (re * vr[i] - im * vi[i]);
        let ri = mi[i] - (re * vi[i] + im * vr[i]);
        res = res + rr * rr + ri * ri;
    }
    EigenPair { re, im, vector: vr, vector_im: vi, residual: res.sqrt() }
}

/// Inverse subspace iteration with Rayleigh–Ritz on a small block; targets
/// the smallest-`|Re|` value among the block's Ritz values.
fn subspace_min_abs_real<S: Scalar>(m: &DenseMatrix<S>, opts: &EigenOptions) -> Result<EigenPair<S>, LinalgError> {
    let n = m.rows();
    let k = opts.block.clamp(1, n);
    let mscale = m.norm_inf();
    let mut shift = S::zero();
    let mut lu = Lu::factor_with_threshold(m, S::zero());
    let mut tries = 0;
    while lu.is_err() && tries < 12 {
        shift = if shift == S::zero() { S::epsilon().sqrt() * lit(1e-3) * mscale } else { shift * lit(10.0) };
        lu = Lu::factor_with_threshold(&m.add_diag(-shift), S::zero());
        tries += 1;
    }
    let lu = lu.map_err(|_| LinalgError::NoConvergence { iterations: 0 })?;
    let mut x: Vec<Vec<S>> = (0..k).map(|j| start_vector(n, j)).collect();
    orthonormalize(&mut x);
    let mut prev: Option<(S, S)> = None;
    for it in 0..opts.max_iter {
        let mut y: Vec<Vec<S>> = x.iter().map(|c| lu.solve(c)).collect();
        orthonormalize(&mut y);
        x = y;
        let mx: Vec<Vec<S>> = x.iter().map(|c| m.matvec(c)).collect();
        let h = DenseMatrix::from_fn(k, k, |i, j| dot(&x[i], &mx[j]));
        let vals = eigenvalues(&h)?;
        let (re, im) = pick_min_abs_real(&vals);
        let stable = prev.map_or(false, |(pr, pi)| {
            (re - pr).abs() + (im.abs() - pi.abs()).abs() <= lit::<S>(1e-11) * mscale.max(S::one())
        });
        prev = Some((re, im));
        if stable || it + 1 == opts.max_iter {
            let small = eigenvector_at(&h, re, im)?;
            let mut vr = vec![S::zero(); n];
            let mut vi = vec![S::zero(); n];
            for j in 0..k {
                for i in 0..n {
                    vr[i] = vr[i] + x[j][i] * small.vector[j];
                    vi[i] = vi[i] + x[j][i] * small.vector_im[j];
                }
            }
            let mut packed = vr;
            if im != S::zero() {
                packed.extend(vi);
            }
            let pair = finish_pair(m, re, im, &packed, im != S::zero());
            if pair.residual <= lit::<S>(1e-8) * mscale.max(S::one()) {
                return Ok(pair);
            }
            if it + 1 == opts.max_iter {
                return Err(LinalgError::NoConvergence { iterations: opts.max_iter });
            }
        }
    }
    Err(LinalgError::NoConvergence { iterations: opts.max_iter })
}

/// Modified Gram–Schmidt, applied twice for stability. Columns that collapse
/// are replaced by fresh start vectors.
pub(crate) fn orthonormalize<S: Scalar>(cols: &mut [Vec<S>]) {
    for pass in 0..2 {
        for j in 0..cols.len() {
            let before = norm2(&cols[j]);
            project_out(cols, j);
            let mut nv = norm2(&cols[j]);
            if !(nv > lit::<S>(1e-10) * before) || nv == S::zero() {
                cols[j] = start_vector(cols[j].len(), j + 17 * (pass + 1));
                project_out(cols, j);
                nv = norm2(&cols[j]);
            }
            for x in cols[j].iter_mut() {
                *x = *x / nv;
            }
        }
    }
}

fn project_out<S: Scalar>(cols: &mut [Vec<S>], j: usize) {
    let (done, rest) = cols.split_at_mut(j);
    for q in done.iter() {
        let r = dot(q, &rest[0]);
        for (x, &qi) in rest[0].iter_mut().zip(q) {
            *x = *x - r * qi;
        }
    }
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Returns
/// eigenvalues ascending and matching unit eigenvectors.
pub fn symmetric_eigen<S: Scalar>(m: &DenseMatrix<S>) -> Result<(Vec<S>, Vec<Vec<S>>), LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::DimensionMismatch { expected: m.rows(), found: m.cols() });
    }
    let n = m.rows();
    let mut a = m.clone();
    let mut v = DenseMatrix::<S>::identity(n);
    for sweep in 0..100 {
        let mut off = S::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off = off + a[(i, j)] * a[(i, j)];
                }
            }
        }
        // Rounding leaves off-diagonal mass of order n·ε‖A‖.
        let floor = lit::<S>(n as f64) * S::epsilon() * a.norm_fro().max(S::min_positive_value());
        if off.sqrt() <= floor {
            break;
        }
        if sweep == 99 {
            return Err(LinalgError::NoConvergence { iterations: 100 });
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == S::zero() {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (lit::<S>(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + S::one()).sqrt());
                let t = if theta == S::zero() { S::one() } else { t };
                let c = S::one() / (t * t + S::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap_or(std::cmp::Ordering::Equal));
    let vals = idx.iter().map(|&i| a[(i, i)]).collect();
    let vecs = idx.iter().map(|&i| v.column(i)).collect();
    Ok((vals, vecs))
}
