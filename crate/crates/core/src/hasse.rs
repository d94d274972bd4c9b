//! Generic first vertices of curve Newton polygons and Hasse polynomials.
//!
//! The first-slope part of L(f, T) is governed by a Frobenius-twisted
//! (σ-linear) endomorphism of a finite-dimensional space indexed by the
//! minimal support of the degree range: the polygon's first vertex abscissa
//! is (p−1)·dim V_ss, where V_ss is the stable image of the map, and the
//! vertex is attained generically exactly when a single polynomial in the
//! coefficients of f (the Hasse polynomial) does not vanish. This module
//! implements the semi-linear algebra, the per-range supports, matrices,
//! predicted vertices and Hasse evaluators, and a verifier that compares the
//! prediction against a directly computed polygon.

use crate::error::{Error, Result};
use crate::ff::{FieldCtx, FieldElement};
use crate::lfun::{self, ASPolynomial, Budget};
use crate::modeq;
use crate::Rat;
use std::collections::BTreeSet;

// --- dense matrices over F_{p^m} ---

/// Row-major dense matrix over a fixed field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mat {
    ctx: FieldCtx,
    rows: usize,
    cols: usize,
    data: Vec<FieldElement>,
}

impl Mat {
    pub fn zero(ctx: &FieldCtx, rows: usize, cols: usize) -> Mat {
        Mat {
            ctx: ctx.clone(),
            rows,
            cols,
            data: vec![ctx.zero(); rows * cols],
        }
    }

    pub fn identity(ctx: &FieldCtx, n: usize) -> Mat {
        let mut m = Mat::zero(ctx, n, n);
        for i in 0..n {
            m.set(i, i, ctx.one());
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &FieldElement {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: FieldElement) {
        self.data[r * self.cols + c] = v;
    }

    pub fn mul(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.cols, rhs.rows);
        let mut out = Mat::zero(&self.ctx, self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let b = rhs.get(k, j);
                    if b.is_zero() {
                        continue;
                    }
                    let cur = out.get(i, j).add(&a.mul(b));
                    out.set(i, j, cur);
                }
            }
        }
        out
    }

    /// Entrywise Frobenius x ↦ x^{p^e}.
    pub fn frobenius(&self, e: usize) -> Mat {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v = v.frobenius(e);
        }
        out
    }

    pub fn det(&self) -> FieldElement {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut m = self.clone();
        let mut det = self.ctx.one();
        for col in 0..n {
            let pivot = (col..n).find(|&r| !m.get(r, col).is_zero());
            let pivot = match pivot {
                Some(r) => r,
                None => return self.ctx.zero(),
            };
            if pivot != col {
                for j in 0..n {
                    let a = m.get(col, j).clone();
                    let b = m.get(pivot, j).clone();
                    m.set(col, j, b);
                    m.set(pivot, j, a);
                }
                det = det.neg();
            }
            let piv = m.get(col, col).clone();
            det = det.mul(&piv);
            let inv = piv.inv();
            for r in col + 1..n {
                let f = m.get(r, col).mul(&inv);
                if f.is_zero() {
                    continue;
                }
                for j in col..n {
                    let v = m.get(r, j).sub(&f.mul(m.get(col, j)));
                    m.set(r, j, v);
                }
            }
        }
        det
    }

    /// Basis of the column space, as columns of the returned matrix.
    pub fn column_space(&self) -> Mat {
        let mut basis: Vec<Vec<FieldElement>> = Vec::new();
        for c in 0..self.cols {
            let mut v: Vec<FieldElement> = (0..self.rows).map(|r| self.get(r, c).clone()).collect();
            reduce_against(&mut v, &basis);
            if v.iter().any(|x| !x.is_zero()) {
                normalize(&mut v);
                basis.push(v);
                basis.sort_by_key(|w| w.iter().position(|x| !x.is_zero()));
            }
        }
        let mut out = Mat::zero(&self.ctx, self.rows, basis.len());
        for (j, v) in basis.iter().enumerate() {
            for (i, x) in v.iter().enumerate() {
                out.set(i, j, x.clone());
            }
        }
        out
    }

    /// Basis of the null space, as columns of the returned matrix.
    pub fn null_space(&self) -> Mat {
        let (rref, pivots) = self.rref();
        let pivot_set: BTreeSet<usize> = pivots.iter().copied().collect();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivot_set.contains(c)).collect();
        let mut out = Mat::zero(&self.ctx, self.cols, free.len());
        for (j, &fc) in free.iter().enumerate() {
            out.set(fc, j, self.ctx.one());
            for (ri, &pc) in pivots.iter().enumerate() {
                out.set(pc, j, rref.get(ri, fc).neg());
            }
        }
        out
    }

    /// Reduced row echelon form together with the pivot columns.
    fn rref(&self) -> (Mat, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..m.cols {
            if row >= m.rows {
                break;
            }
            let pr = (row..m.rows).find(|&r| !m.get(r, col).is_zero());
            let pr = match pr {
                Some(r) => r,
                None => continue,
            };
            if pr != row {
                for j in 0..m.cols {
                    let a = m.get(row, j).clone();
                    let b = m.get(pr, j).clone();
                    m.set(row, j, b);
                    m.set(pr, j, a);
                }
            }
            let inv = m.get(row, col).inv();
            for j in 0..m.cols {
                let v = m.get(row, j).mul(&inv);
                m.set(row, j, v);
            }
            for r in 0..m.rows {
                if r == row || m.get(r, col).is_zero() {
                    continue;
                }
                let f = m.get(r, col).clone();
                for j in 0..m.cols {
                    let v = m.get(r, j).sub(&f.mul(m.get(row, j)));
                    m.set(r, j, v);
                }
            }
            pivots.push(col);
            row += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Solves self · X = rhs for X (self with full column rank).
    pub fn solve(&self, rhs: &Mat) -> Result<Mat> {
        assert_eq!(self.rows, rhs.rows);
        let mut aug = Mat::zero(&self.ctx, self.rows, self.cols + rhs.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                aug.set(r, c, self.get(r, c).clone());
            }
            for c in 0..rhs.cols {
                aug.set(r, self.cols + c, rhs.get(r, c).clone());
            }
        }
        let (rref, pivots) = aug.rref();
        if pivots.len() < self.cols || pivots.iter().any(|&c| c >= self.cols) {
            return Err(Error::internal("solve: left factor is column-rank deficient"));
        }
        // consistency: no pivot may appear in the augmented block beyond rank
        for r in pivots.len()..self.rows {
            for c in 0..rhs.cols {
                if !rref.get(r, self.cols + c).is_zero() {
                    return Err(Error::internal("solve: inconsistent system"));
                }
            }
        }
        let mut x = Mat::zero(&self.ctx, self.cols, rhs.cols);
        for (ri, &pc) in pivots.iter().enumerate() {
            for c in 0..rhs.cols {
                x.set(pc, c, rref.get(ri, self.cols + c).clone());
            }
        }
        Ok(x)
    }

    /// Horizontal concatenation.
    fn hcat(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.rows, rhs.rows);
        let mut out = Mat::zero(&self.ctx, self.rows, self.cols + rhs.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(r, c, self.get(r, c).clone());
            }
            for c in 0..rhs.cols {
                out.set(r, self.cols + c, rhs.get(r, c).clone());
            }
        }
        out
    }
}

fn reduce_against(v: &mut [FieldElement], basis: &[Vec<FieldElement>]) {
    for b in basis {
        let lead = b.iter().position(|x| !x.is_zero()).unwrap();
        if !v[lead].is_zero() {
            let f = v[lead].mul(&b[lead].inv());
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi = vi.sub(&f.mul(bi));
            }
        }
    }
}

fn normalize(v: &mut [FieldElement]) {
    let lead = v.iter().position(|x| !x.is_zero()).unwrap();
    let inv = v[lead].inv();
    for x in v.iter_mut() {
        *x = x.mul(&inv);
    }
}

/// Characteristic polynomial det(λI − B), monic, coefficients ascending in λ
/// (Hessenberg reduction, then the standard last-column expansion).
pub fn char_poly(b: &Mat) -> Vec<FieldElement> {
    assert_eq!(b.rows, b.cols);
    let ctx = &b.ctx;
    let n = b.rows;
    if n == 0 {
        return vec![ctx.one()];
    }
    let mut h = b.clone();
    // similarity reduction to upper Hessenberg form
    for col in 0..n.saturating_sub(2) {
        let pivot = (col + 1..n).find(|&r| !h.get(r, col).is_zero());
        let pivot = match pivot {
            Some(r) => r,
            None => continue,
        };
        if pivot != col + 1 {
            for j in 0..n {
                let a = h.get(col + 1, j).clone();
                let x = h.get(pivot, j).clone();
                h.set(col + 1, j, x);
                h.set(pivot, j, a);
            }
            for i in 0..n {
                let a = h.get(i, col + 1).clone();
                let x = h.get(i, pivot).clone();
                h.set(i, col + 1, x);
                h.set(i, pivot, a);
            }
        }
        let inv = h.get(col + 1, col).inv();
        for row in col + 2..n {
            let f = h.get(row, col).mul(&inv);
            if f.is_zero() {
                continue;
            }
            // row_row -= f * row_{col+1}; col_{col+1} += f * col_row
            for j in 0..n {
                let v = h.get(row, j).sub(&f.mul(h.get(col + 1, j)));
                h.set(row, j, v);
            }
            for i in 0..n {
                let v = h.get(i, col + 1).add(&f.mul(h.get(i, row)));
                h.set(i, col + 1, v);
            }
        }
    }
    // p_k(λ) = (λ − H[k-1][k-1]) p_{k-1} − Σ_i H[i][k-1]·(Π subdiagonals)·p_i
    let mut polys: Vec<Vec<FieldElement>> = vec![vec![ctx.one()]];
    for k in 1..=n {
        let mut pk = poly_shift_mul(ctx, &polys[k - 1], &h.get(k - 1, k - 1).neg());
        let mut subdiag = ctx.one();
        for i in (0..k - 1).rev() {
            // product of subdiagonal entries H[j][j-1] for j = i+1 .. k-1
            subdiag = subdiag.mul(h.get(i + 1, i));
            let c = h.get(i, k - 1).mul(&subdiag);
            if c.is_zero() {
                continue;
            }
            for (t, v) in polys[i].iter().enumerate() {
                pk[t] = pk[t].sub(&c.mul(v));
            }
        }
        polys.push(pk);
    }
    polys.pop().unwrap()
}

/// (λ + c) · poly, padding the degree by one.
fn poly_shift_mul(ctx: &FieldCtx, poly: &[FieldElement], c: &FieldElement) -> Vec<FieldElement> {
    let mut out = vec![ctx.zero(); poly.len() + 1];
    for (i, v) in poly.iter().enumerate() {
        out[i + 1] = out[i + 1].add(v);
        out[i] = out[i].add(&c.mul(v));
    }
    out
}

// --- semi-linear maps ---

/// A σ-linear endomorphism v ↦ A·σ(v) of k^N, σ the p-power Frobenius
/// applied entrywise; the columns of A are the images of the basis vectors.
#[derive(Clone, Debug)]
pub struct SemiLinearMap {
    mat: Mat,
}

impl SemiLinearMap {
    pub fn new(mat: Mat) -> Result<SemiLinearMap> {
        if mat.rows != mat.cols || mat.rows == 0 {
            return Err(Error::domain("semi-linear map needs a square matrix, N >= 1"));
        }
        Ok(SemiLinearMap { mat })
    }

    pub fn ctx(&self) -> &FieldCtx {
        &self.mat.ctx
    }

    pub fn dim(&self) -> usize {
        self.mat.rows
    }

    pub fn matrix(&self) -> &Mat {
        &self.mat
    }

    pub fn apply(&self, v: &[FieldElement]) -> Vec<FieldElement> {
        let n = self.dim();
        let mut out = vec![self.ctx().zero(); n];
        for (j, x) in v.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            let xs = x.frobenius(1);
            for (i, o) in out.iter_mut().enumerate() {
                *o = o.add(&self.mat.get(i, j).mul(&xs));
            }
        }
        out
    }

    /// Matrix of the m-fold iterate as a linear map: A·A^σ···A^{σ^{m−1}}.
    fn iterate_matrix(&self, steps: usize) -> Mat {
        let mut acc = Mat::identity(self.ctx(), self.dim());
        for e in 0..steps {
            acc = acc.mul(&self.mat.frobenius(e % self.ctx().degree()));
        }
        acc
    }
}

/// The composite A^{σ^{m−1}}·A^{σ^{m−2}}···A over F_{p^m}.
pub fn semilinear_composite(map: &SemiLinearMap) -> Mat {
    let m = map.ctx().degree();
    let mut acc = Mat::identity(map.ctx(), map.dim());
    for e in (0..m).rev() {
        acc = acc.mul(&map.mat.frobenius(e));
    }
    acc
}

/// The stable image / kernel splitting V = V_ss ⊕ V_nil of a semi-linear map.
#[derive(Clone, Debug)]
pub struct SsDecomposition {
    /// Basis of V_ss = ∩ Im φ^n (columns).
    pub ss_basis: Mat,
    /// Basis of V_nil = ∪ Ker φ^n (columns).
    pub nil_basis: Mat,
    /// Matrix of φ restricted to V_ss in the ss basis (columns = images).
    pub a_ss: Mat,
}

impl SsDecomposition {
    pub fn ss_dim(&self) -> usize {
        self.ss_basis.cols
    }

    pub fn nil_dim(&self) -> usize {
        self.nil_basis.cols
    }
}

pub fn ss_decompose(map: &SemiLinearMap) -> Result<SsDecomposition> {
    let n = map.dim();
    let ctx = map.ctx();
    let m = ctx.degree();
    let mn = map.iterate_matrix(n);
    let ss_basis = mn.column_space();
    // Ker φ^n = σ^{-n}(null space of the iterate matrix)
    let mut nil_basis = mn.null_space();
    let back = (m - (n % m)) % m;
    nil_basis = nil_basis.frobenius(back);
    if ss_basis.cols + nil_basis.cols != n {
        return Err(Error::internal("stable image and kernel dimensions do not add up"));
    }
    if ss_basis.cols + nil_basis.cols > 0 {
        let combined = ss_basis.hcat(&nil_basis);
        if combined.rank() != n {
            return Err(Error::internal("stable image and kernel are not transverse"));
        }
    }
    // φ(s_j) expressed in the ss basis
    let s = ss_basis.cols;
    let a_ss = if s == 0 {
        Mat::zero(ctx, 0, 0)
    } else {
        let mut images = Mat::zero(ctx, n, s);
        for j in 0..s {
            let v: Vec<FieldElement> = (0..n).map(|i| ss_basis.get(i, j).clone()).collect();
            let img = map.apply(&v);
            for (i, x) in img.into_iter().enumerate() {
                images.set(i, j, x);
            }
        }
        let a_ss = ss_basis.solve(&images)?;
        if a_ss.det().is_zero() {
            return Err(Error::internal("restriction to the stable image is singular"));
        }
        a_ss
    };
    Ok(SsDecomposition {
        ss_basis,
        nil_basis,
        a_ss,
    })
}

/// det(I − T·B) for B the composite of the map, as coefficients over F_p
/// (ascending in T). The polynomial has degree dim V_ss and leading
/// coefficient (−1)^{dim V_ss}·N_{k/F_p}(det A_ss); both are verified here,
/// as is agreement with the same computation on V_ss alone.
pub fn charpoly_first_slope(map: &SemiLinearMap) -> Result<Vec<u64>> {
    let dec = ss_decompose(map)?;
    let full = det_one_minus_t(&semilinear_composite(map));
    let restricted = det_one_minus_t(&semilinear_composite(&SemiLinearMap {
        mat: dec.a_ss.clone(),
    }));
    let full_fp = to_prime_coeffs(&full)?;
    let s = dec.ss_dim();
    if s == 0 {
        if full_fp != vec![1] {
            return Err(Error::internal("zero stable image but nonconstant polynomial"));
        }
        return Ok(full_fp);
    }
    let restricted_fp = to_prime_coeffs(&restricted)?;
    if full_fp != restricted_fp {
        return Err(Error::internal(
            "first-slope polynomial differs between V and V_ss",
        ));
    }
    if full_fp.len() != s + 1 {
        return Err(Error::internal(format!(
            "first-slope polynomial has degree {} but dim V_ss = {s}",
            full_fp.len() - 1
        )));
    }
    let p = map.ctx().p();
    let norm = dec.a_ss.det().norm_to_prime();
    let sign_norm = if s % 2 == 1 { (p - norm) % p } else { norm };
    if full_fp[s] != sign_norm {
        return Err(Error::internal(
            "leading coefficient does not match the norm of det A_ss",
        ));
    }
    Ok(full_fp)
}

/// det(I − T·B) with trailing zeros trimmed (constant 1 for nilpotent B).
fn det_one_minus_t(b: &Mat) -> Vec<FieldElement> {
    let n = b.rows;
    let cp = char_poly(b); // det(λI − B), ascending, length n+1
    let mut out: Vec<FieldElement> = (0..=n).map(|j| cp[n - j].clone()).collect();
    while out.len() > 1 && out.last().unwrap().is_zero() {
        out.pop();
    }
    out
}

fn to_prime_coeffs(coeffs: &[FieldElement]) -> Result<Vec<u64>> {
    coeffs
        .iter()
        .map(|c| {
            if c.coords()[1..].iter().any(|&x| x != 0) {
                Err(Error::internal(
                    "first-slope polynomial has a coefficient outside F_p",
                ))
            } else {
                Ok(c.coords()[0])
            }
        })
        .collect::<Result<Vec<u64>>>()
        .map(|mut v| {
            while v.len() > 1 && *v.last().unwrap() == 0 {
                v.pop();
            }
            v
        })
}

// --- degree ranges, supports, predicted vertices, Hasse evaluators ---

/// Degree range of d relative to p; carries the parameters that shape the
/// minimal support and the Hasse polynomial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DegreeCase {
    /// 2 ≤ d < p − 2: one support point, Hasse {f^h}_{p−1}, h = ⌈(p−1)/d⌉.
    Small { h: u64 },
    /// d = p − 2 (p ≥ 5): support {1, 2}.
    PMinusTwo,
    /// i(p^n − 1) ≤ d < (i+1)(p^n − 1) in the low part of the density band:
    /// support {k·p^j}, Hasse an i×i determinant of coefficients; t = i·p^n − d
    /// clamped to [1, i] gates the edges leaving the top chain.
    Band { n: u32, i: u64, t: u64 },
    /// n = 1 with d above p(p−1)/2: the support gains the point p and the
    /// determinant a row of degree-2 coefficients.
    BandP { i: u64, t: u64 },
    /// d = p^{n+1} − t, p+1 ≤ t ≤ p²−1, n ≥ 2: long-tail support, Hasse a
    /// (p−1)×(p−1) determinant with a θ row.
    Theta { n: u32, t: u64 },
    /// d = p² − t, p+1 ≤ t ≤ 2p−2: the n = 1 analogue; θ uses {f²}.
    ThetaSquare { t: u64 },
    /// d = p^{n+1} − t, 2 ≤ t ≤ p−1: a single cycle through p^n; the Hasse
    /// polynomial is a sum of coefficient products.
    Top { n: u32, t: u64 },
}

impl DegreeCase {
    pub fn tag(&self) -> &'static str {
        match self {
            DegreeCase::Small { .. } => "small",
            DegreeCase::PMinusTwo => "p-minus-2",
            DegreeCase::Band { .. } => "band",
            DegreeCase::BandP { .. } => "band-p",
            DegreeCase::Theta { .. } => "theta",
            DegreeCase::ThetaSquare { .. } => "theta-square",
            DegreeCase::Top { .. } => "top",
        }
    }
}

/// Tail support points of the long-tail range d = p^{n+1} − t, n ≥ 2: a tail
/// value i needs an onward single-coefficient edge p^{n−1}·i − n_prev with
/// n_prev ≤ p−1, so it only survives while p^{n−1}·i − (p−1) ≤ d. For n ≥ 3
/// the gate is vacuous; for n = 2 it empties the tail at the top of the t
/// range and the degree falls back to the plain band case.
fn theta_tails(p: u64, n: u32, d: u64, t: u64) -> Vec<u64> {
    let pnm1 = modeq::pow_u64(p, n - 1);
    ((t..=p * p - 1).filter(|i| i % p != 0))
        .filter(|&i| pnm1 * i <= d + p - 1)
        .collect()
}

/// Tail support points of d = p² − t, p+1 ≤ t ≤ 2p−2: the onward edge out of
/// a tail value i carries two coefficients summing to p·i − n_next, so i
/// survives only if such a pair exists inside {1..d} for an admissible
/// n_next (1 needs i < 2p−2; 2..p−1 always allowed).
fn theta_square_tails(p: u64, d: u64, t: u64) -> Vec<u64> {
    let pair_exists = |target: u64| -> bool {
        let lo = target.saturating_sub(d).max(1);
        (lo..=target / 2).any(|x| {
            let y = target - x;
            x % p != 0 && y % p != 0 && x <= d && y <= d
        })
    };
    (t..=2 * p - 2)
        .filter(|i| i % p != 0)
        .filter(|&i| {
            let l3 = i < 2 * p - 2 && pair_exists(p * i - 1);
            let l4 = (2..=p - 1).any(|n3| pair_exists(p * i - n3));
            l3 || l4
        })
        .collect()
}

/// Classifies d ≥ 2 prime to p into its degree range.
pub fn classify(p: u64, d: u64) -> Result<DegreeCase> {
    if !modeq::is_prime(p) || p == 2 {
        return Err(Error::domain(format!("p = {p} must be an odd prime")));
    }
    if d < 2 {
        return Err(Error::domain("d must be at least 2 (d = 1 is a rational curve)"));
    }
    if d % p == 0 {
        return Err(Error::domain(format!(
            "gcd(d, p) != 1 for d = {d}; apply Artin-Schreier reduction first"
        )));
    }
    if d < p - 2 {
        let h = (p - 2) / d + 1; // ⌈(p−1)/d⌉ for d not dividing... computed exactly below
        let h = if (p - 1) % d == 0 { (p - 1) / d } else { h };
        return Ok(DegreeCase::Small { h });
    }
    if d == p - 2 {
        return Ok(DegreeCase::PMinusTwo);
    }
    let mut n = 1u32;
    loop {
        let hi = (p as u128).pow(n + 1) - 2;
        if (d as u128) > hi {
            n += 1;
            continue;
        }
        let pn = modeq::pow_u64(p, n);
        let pn1 = modeq::pow_u64(p, n + 1);
        let band = |i: u64, pw: u64| DegreeCase::Band {
            n,
            i,
            t: (i * pw).saturating_sub(d).max(1),
        };
        if n == 1 {
            if d <= (p - 1) * (p - 1) {
                let i = (d / (p - 1)).min(p - 1);
                if 2 * d <= p * (p - 1) - 2 {
                    return Ok(band(i, p));
                }
                return Ok(DegreeCase::BandP {
                    i,
                    t: (i * p).saturating_sub(d).max(1),
                });
            }
            if d <= p * p - p - 1 {
                let t = p * p - d;
                // with no surviving tail the support is that of the band
                // range with the extra point p
                if theta_square_tails(p, d, t).is_empty() {
                    return Ok(DegreeCase::BandP {
                        i: p - 1,
                        t: ((p - 1) * p).saturating_sub(d).max(1),
                    });
                }
                return Ok(DegreeCase::ThetaSquare { t });
            }
            return Ok(DegreeCase::Top { n: 1, t: p * p - d });
        }
        if d <= pn1 - p * p - 1 {
            return Ok(band((d / (pn - 1)).min(p - 1), pn));
        }
        if d <= pn1 - p - 1 {
            let t = pn1 - d;
            // an empty tail collapses the support to the plain band case
            if theta_tails(p, n, d, t).is_empty() {
                return Ok(band((d / (pn - 1)).min(p - 1), pn));
            }
            return Ok(DegreeCase::Theta { n, t });
        }
        return Ok(DegreeCase::Top { n, t: pn1 - d });
    }
}

/// The index set of basis vectors underlying the transition matrix.
pub fn minimal_support(p: u64, d: u64) -> Result<BTreeSet<u64>> {
    let case = classify(p, d)?;
    let mut s = BTreeSet::new();
    match case {
        DegreeCase::Small { .. } => {
            s.insert(1);
        }
        DegreeCase::PMinusTwo => {
            s.insert(1);
            s.insert(2);
        }
        DegreeCase::Band { n, i, .. } => {
            for k in 1..=i {
                for j in 0..n {
                    s.insert(k * modeq::pow_u64(p, j));
                }
            }
        }
        DegreeCase::BandP { i, .. } => {
            for k in 1..=i {
                s.insert(k);
            }
            s.insert(p);
        }
        DegreeCase::Theta { n, t } => {
            for k in 1..=p - 1 {
                for j in 0..n {
                    s.insert(k * modeq::pow_u64(p, j));
                }
            }
            s.insert(modeq::pow_u64(p, n));
            for k in theta_tails(p, n, d, t) {
                for j in 0..n - 1 {
                    s.insert(k * modeq::pow_u64(p, j));
                }
            }
        }
        DegreeCase::ThetaSquare { t } => {
            for k in 1..=p {
                s.insert(k);
            }
            for k in theta_square_tails(p, d, t) {
                s.insert(k);
            }
        }
        DegreeCase::Top { n, t } => {
            for j in 0..=n {
                s.insert(modeq::pow_u64(p, j));
            }
            for k in t..=p - 1 {
                for j in 0..n {
                    s.insert(k * modeq::pow_u64(p, j));
                }
            }
        }
    }
    Ok(s)
}

/// Predicted first vertex of the curve polygon, with its Hasse evaluator.
#[derive(Clone, Debug)]
pub struct VertexPrediction {
    p: u64,
    d: u64,
    case: DegreeCase,
    vertex: (u64, u64),
    support: BTreeSet<u64>,
}

/// Case tag, vertex and Hasse polynomial of the generic first vertex.
pub fn predicted_first_vertex(p: u64, d: u64) -> Result<VertexPrediction> {
    let case = classify(p, d)?;
    let vertex = match case {
        DegreeCase::Small { h } => (p - 1, h),
        DegreeCase::PMinusTwo => (2 * (p - 1), 4),
        DegreeCase::Band { n, i, .. } => ((p - 1) * n as u64 * i, i),
        DegreeCase::BandP { i, .. } => ((p - 1) * (i + 1), i + 1),
        DegreeCase::Theta { n, .. } => (n as u64 * (p - 1) * p, p),
        DegreeCase::ThetaSquare { .. } => ((p + 1) * (p - 1), p + 1),
        DegreeCase::Top { n, .. } => ((2 * n as u64 + 1) * (p - 1), 2),
    };
    Ok(VertexPrediction {
        p,
        d,
        case,
        vertex,
        support: minimal_support(p, d)?,
    })
}

impl VertexPrediction {
    pub fn case(&self) -> DegreeCase {
        self.case
    }

    pub fn vertex(&self) -> (u64, u64) {
        self.vertex
    }

    pub fn support(&self) -> &BTreeSet<u64> {
        &self.support
    }

    /// Slope of the ray to the predicted vertex.
    pub fn slope(&self) -> Rat {
        Rat::new(self.vertex.1 as i64, self.vertex.0 as i64)
    }

    /// Human-readable formula for the Hasse polynomial.
    pub fn describe(&self) -> String {
        let p = self.p;
        match self.case {
            DegreeCase::Small { h } => format!("{{f^{h}}}_{}", p - 1),
            DegreeCase::PMinusTwo => format!("c_{} * {{f^3}}_{}", p - 2, 2 * p - 1),
            DegreeCase::Band { n, i, t } => band_symbolic(p, n, i, t)
                .unwrap_or_else(|| format!("det of the {i}x{i} matrix (c_(a*p^{n}-b))")),
            DegreeCase::BandP { i, .. } => format!(
                "det of the {}x{} matrix (c_(a*p-b)) bordered by the support point {p}",
                i + 1,
                i + 1
            ),
            DegreeCase::Theta { n, .. } => format!(
                "det of the {0}x{0} matrix with rows c_(a*p^{n}-b) and a theta row",
                p - 1
            ),
            DegreeCase::ThetaSquare { .. } => format!(
                "det of the {0}x{0} matrix with rows c_(a*p-b) and a degree-2 theta row",
                p - 1
            ),
            DegreeCase::Top { n, t } => {
                format!("sum over i in [{t}, {}] of c_(p^{}-i)^(p^{n}) * c_(i*p^{n}-1)", p - 1, n + 1)
            }
        }
    }

    /// Evaluates the Hasse polynomial at the (reduced) coefficients of f.
    pub fn eval_hasse(&self, f: &ASPolynomial) -> Result<FieldElement> {
        let ctx = f.ctx();
        let p = self.p;
        if ctx.p() != p {
            return Err(Error::domain("field characteristic does not match"));
        }
        if f.degree() != self.d {
            return Err(Error::domain(format!(
                "polynomial has degree {}, prediction is for degree {}",
                f.degree(),
                self.d
            )));
        }
        if !f.is_reduced() {
            return Err(Error::domain("polynomial must be reduced"));
        }
        let c = |i: u64| f.coeff(i);
        Ok(match self.case {
            DegreeCase::Small { h } => poly_power_coeff(f, h, p - 1),
            DegreeCase::PMinusTwo => c(p - 2).mul(&poly_power_coeff(f, 3, 2 * p - 1)),
            DegreeCase::Band { n, i, t } => band_matrix(f, n, i, t).det(),
            DegreeCase::BandP { i, t } => band_p_matrix(f, i, t).det(),
            DegreeCase::Theta { n, t } => theta_matrix(f, n, t).det(),
            DegreeCase::ThetaSquare { t } => theta_square_matrix(f, t).det(),
            DegreeCase::Top { n, t } => {
                let pn1 = modeq::pow_u64(p, n + 1);
                let pn = modeq::pow_u64(p, n);
                let mut acc = ctx.zero();
                for i in t..=p - 1 {
                    acc = acc.add(&c(pn1 - i).frobenius(n as usize).mul(&c(i * pn - 1)));
                }
                acc
            }
        })
    }
}

/// Symbolic Leibniz expansion of the band determinant for i ≤ 4 (24 terms at
/// most); returns None for larger sizes.
fn band_symbolic(p: u64, n: u32, i: u64, t: u64) -> Option<String> {
    if i > 4 {
        return None;
    }
    let pn = modeq::pow_u64(p, n);
    let entry = |a: u64, b: u64| -> Option<u64> {
        if a == i {
            (b >= t).then(|| i * pn - b)
        } else if b == i && t >= i {
            None
        } else {
            Some(a * pn - b)
        }
    };
    let idx: Vec<u64> = (1..=i).collect();
    let mut terms: Vec<(bool, Vec<u64>)> = Vec::new();
    permute(&idx, &mut Vec::new(), &mut vec![false; idx.len()], &mut |perm, sign| {
        let mut factors = Vec::with_capacity(perm.len());
        for (a_pos, &b) in perm.iter().enumerate() {
            match entry(idx[a_pos], b) {
                Some(c) => factors.push(c),
                None => return,
            }
        }
        factors.sort_unstable();
        terms.push((sign, factors));
    });
    if terms.is_empty() {
        return Some("0".to_string());
    }
    let mut out = String::new();
    for (k, (sign, factors)) in terms.iter().enumerate() {
        if k == 0 {
            if !sign {
                out.push('-');
            }
        } else {
            out.push_str(if *sign { " + " } else { " - " });
        }
        let term: Vec<String> = factors.iter().map(|c| format!("c_{c}")).collect();
        out.push_str(&term.join("*"));
    }
    Some(out)
}

fn permute(
    vals: &[u64],
    cur: &mut Vec<u64>,
    used: &mut Vec<bool>,
    visit: &mut impl FnMut(&[u64], bool),
) {
    if cur.len() == vals.len() {
        // parity of the permutation by counting inversions
        let mut inv = 0;
        for a in 0..cur.len() {
            for b in a + 1..cur.len() {
                if cur[a] > cur[b] {
                    inv += 1;
                }
            }
        }
        visit(cur, inv % 2 == 0);
        return;
    }
    for (k, &v) in vals.iter().enumerate() {
        if used[k] {
            continue;
        }
        used[k] = true;
        cur.push(v);
        permute(vals, cur, used, visit);
        cur.pop();
        used[k] = false;
    }
}

/// Coefficient of x^j in f^k (dense multiplication, truncated at j).
pub fn poly_power_coeff(f: &ASPolynomial, k: u64, j: u64) -> FieldElement {
    let ctx = f.ctx();
    if k == 0 {
        return if j == 0 { ctx.one() } else { ctx.zero() };
    }
    let cap = j as usize;
    let mut base = vec![ctx.zero(); cap + 1];
    for (&i, c) in f.coeffs() {
        if i as usize <= cap {
            base[i as usize] = c.clone();
        }
    }
    let mut acc = base.clone();
    for _ in 1..k {
        let mut next = vec![ctx.zero(); cap + 1];
        for (a, ca) in acc.iter().enumerate() {
            if ca.is_zero() {
                continue;
            }
            for (b, cb) in base.iter().enumerate() {
                if a + b > cap {
                    break;
                }
                if cb.is_zero() {
                    continue;
                }
                next[a + b] = next[a + b].add(&ca.mul(cb));
            }
        }
        acc = next;
    }
    acc[cap].clone()
}

fn inv_small(ctx: &FieldCtx, n: u64) -> FieldElement {
    ctx.from_u64(n).inv()
}

/// Entry of the band determinant: edges a → b among the chain tops, with the
/// departures from the top chain i gated by b ≥ t (and the arrivals into i
/// present only when some departure other than the loop exists, i.e. t < i).
fn band_entry(f: &ASPolynomial, n: u32, i: u64, t: u64, a: u64, b: u64) -> FieldElement {
    let p = f.ctx().p();
    let pn = modeq::pow_u64(p, n);
    if a == i {
        if b >= t {
            f.coeff(i * pn - b)
        } else {
            f.ctx().zero()
        }
    } else if b == i && t >= i {
        f.ctx().zero()
    } else {
        f.coeff(a * pn - b)
    }
}

fn band_matrix(f: &ASPolynomial, n: u32, i: u64, t: u64) -> Mat {
    let ctx = f.ctx();
    let k = i as usize;
    let mut m = Mat::zero(ctx, k, k);
    for a in 1..=i {
        for b in 1..=i {
            m.set(a as usize - 1, b as usize - 1, band_entry(f, n, i, t, a, b));
        }
    }
    m
}

/// The (i+1)×(i+1) bordered matrix for the n = 1 upper band: the band block,
/// the single chain edge 1 → p, and the degree-2 row out of p.
fn band_p_matrix(f: &ASPolynomial, i: u64, t: u64) -> Mat {
    let ctx = f.ctx();
    let p = ctx.p();
    let k = i as usize + 1;
    let mut m = Mat::zero(ctx, k, k);
    for a in 1..=i {
        for b in 1..=i {
            m.set(a as usize - 1, b as usize - 1, band_entry(f, 1, i, t, a, b));
        }
    }
    m.set(0, k - 1, ctx.one()); // edge 1 -> p
    let inv2 = inv_small(ctx, 2);
    for b in 1..=i {
        // departures p -> b carry two coefficients; the arrival into the top
        // chain i needs an onward edge, hence the same t < i gate
        let v = if b < i || t < i {
            inv2.mul(&poly_power_coeff(f, 2, p * p - b))
        } else {
            ctx.zero()
        };
        m.set(k - 1, b as usize - 1, v);
    }
    m
}

/// Rows a = 2..p−1 of single coefficients plus the θ row collecting the two
/// chain steps through p^n.
fn theta_matrix(f: &ASPolynomial, n: u32, t: u64) -> Mat {
    let ctx = f.ctx();
    let p = ctx.p();
    let k = p as usize - 1;
    let pn = modeq::pow_u64(p, n);
    let pn1 = modeq::pow_u64(p, n + 1);
    let pnm1 = modeq::pow_u64(p, n - 1);
    let mut m = Mat::zero(ctx, k, k);
    for a in 2..=p - 1 {
        for b in 1..=p - 1 {
            m.set(a as usize - 2, b as usize - 1, f.coeff(a * pn - b));
        }
    }
    for b in 1..=p - 1 {
        let mut theta = ctx.zero();
        for i in (t..=p * p - 1).filter(|i| i % p != 0) {
            let lead = f.coeff(pn1 - i).frobenius(n as usize - 1);
            if lead.is_zero() {
                continue;
            }
            theta = theta.add(&lead.mul(&f.coeff(pnm1 * i - b)));
        }
        m.set(k - 1, b as usize - 1, theta);
    }
    m
}

fn theta_square_matrix(f: &ASPolynomial, t: u64) -> Mat {
    let ctx = f.ctx();
    let p = ctx.p();
    let k = p as usize - 1;
    let inv2 = inv_small(ctx, 2);
    let mut m = Mat::zero(ctx, k, k);
    for a in 2..=p - 1 {
        for b in 1..=p - 1 {
            m.set(a as usize - 2, b as usize - 1, f.coeff(a * p - b));
        }
    }
    for b in 1..=p - 1 {
        let mut theta = ctx.zero();
        for i in t..=2 * p - 2 {
            let lead = f.coeff(p * p - i).frobenius(1);
            if lead.is_zero() {
                continue;
            }
            theta = theta.add(&lead.mul(&poly_power_coeff(f, 2, p * i - b)));
        }
        m.set(k - 1, b as usize - 1, inv2.mul(&theta));
    }
    m
}

/// The mod-p transition matrix over the minimal-support basis (columns are
/// the images of the basis vectors under the semi-linear map).
pub fn mbar_matrix(f: &ASPolynomial) -> Result<SemiLinearMap> {
    let ctx = f.ctx();
    let p = ctx.p();
    if !f.is_reduced() {
        return Err(Error::domain("polynomial must be reduced"));
    }
    let d = f.degree();
    let case = classify(p, d)?;
    let support: Vec<u64> = minimal_support(p, d)?.into_iter().collect();
    let index = |x: u64| -> usize { support.binary_search(&x).expect("support point") };
    let n_dim = support.len();
    let mut mat = Mat::zero(ctx, n_dim, n_dim);
    let mut edge = |src: u64, dst: u64, v: FieldElement| {
        if !v.is_zero() {
            let cur = mat.get(index(dst), index(src)).add(&v);
            mat.set(index(dst), index(src), cur);
        }
    };
    let c = |i: u64| f.coeff(i);
    match case {
        DegreeCase::Small { h } => {
            let factorial = (1..=h).product::<u64>();
            let v = poly_power_coeff(f, h, p - 1).mul(&inv_small(ctx, factorial % p));
            edge(1, 1, v);
        }
        DegreeCase::PMinusTwo => {
            edge(1, 1, inv_small(ctx, 2).mul(&poly_power_coeff(f, 2, p - 1)));
            edge(1, 2, c(p - 2));
            edge(2, 1, inv_small(ctx, 6).mul(&poly_power_coeff(f, 3, 2 * p - 1)));
        }
        DegreeCase::Band { n, i, t } => {
            let pn1m = modeq::pow_u64(p, n - 1);
            for k in 1..=i {
                for j in 0..n - 1 {
                    let x = k * modeq::pow_u64(p, j);
                    edge(x, x * p, ctx.one());
                }
                for b in 1..=i {
                    edge(k * pn1m, b, band_entry(f, n, i, t, k, b));
                }
            }
        }
        DegreeCase::BandP { i, t } => {
            let bp = band_p_matrix(f, i, t);
            for a in 1..=i {
                for b in 1..=i {
                    edge(a, b, bp.get(a as usize - 1, b as usize - 1).clone());
                }
            }
            edge(1, p, ctx.one());
            for b in 1..=i {
                edge(p, b, bp.get(i as usize, b as usize - 1).clone());
            }
        }
        DegreeCase::Theta { n, t } => {
            let pn = modeq::pow_u64(p, n);
            let pn1 = modeq::pow_u64(p, n + 1);
            let pnm1 = modeq::pow_u64(p, n - 1);
            for k in 1..=p - 1 {
                for j in 0..n - 1 {
                    let x = k * modeq::pow_u64(p, j);
                    edge(x, x * p, ctx.one());
                }
                for b in 1..=p - 1 {
                    edge(k * pnm1, b, c(k * pn - b));
                }
            }
            edge(pnm1, pn, ctx.one());
            for i in theta_tails(p, n, d, t) {
                edge(pn, i, c(pn1 - i));
                for j in 0..n.saturating_sub(2) {
                    let x = i * modeq::pow_u64(p, j);
                    edge(x, x * p, ctx.one());
                }
                let top = i * modeq::pow_u64(p, n - 2);
                for b in 1..=p - 1 {
                    edge(top, b, c(pnm1 * i - b));
                }
            }
        }
        DegreeCase::ThetaSquare { t } => {
            let inv2 = inv_small(ctx, 2);
            for a in 1..=p - 1 {
                for b in 1..=p - 1 {
                    edge(a, b, c(a * p - b));
                }
            }
            edge(1, p, ctx.one());
            for b in 1..=p - 1 {
                // pair-type departures straight from p into the base
                edge(p, b, inv2.mul(&poly_power_coeff(f, 2, p * p - b)));
            }
            for i in theta_square_tails(p, d, t) {
                edge(p, i, c(p * p - i));
                for b in 1..=p - 1 {
                    edge(i, b, inv2.mul(&poly_power_coeff(f, 2, p * i - b)));
                }
            }
        }
        DegreeCase::Top { n, t } => {
            let pn = modeq::pow_u64(p, n);
            let pn1 = modeq::pow_u64(p, n + 1);
            for j in 0..n {
                let x = modeq::pow_u64(p, j);
                edge(x, x * p, ctx.one());
            }
            for i in t..=p - 1 {
                edge(pn, i, c(pn1 - i));
                for j in 0..n - 1 {
                    let x = i * modeq::pow_u64(p, j);
                    edge(x, x * p, ctx.one());
                }
                edge(i * modeq::pow_u64(p, n - 1), 1, c(i * pn - 1));
            }
        }
    }
    SemiLinearMap::new(mat)
}

/// Comparison of the predicted first vertex against the computed polygon.
#[derive(Clone, Debug)]
pub struct VertexReport {
    pub p: u64,
    pub m: usize,
    pub d: u64,
    pub case_tag: &'static str,
    pub hasse: FieldElement,
    pub hasse_nonzero: bool,
    pub predicted: (u64, u64),
    pub actual: (u64, Rat),
    pub agrees: bool,
    pub lies_on_or_above: bool,
}

/// Computes the curve polygon of f, evaluates the Hasse polynomial, and
/// reports whether the predicted generic first vertex is attained. The
/// contract (a nonzero Hasse value forces agreement; the polygon never dips
/// below the vertex) is what the sweep drivers check.
pub fn verify_first_vertex(f: &ASPolynomial, budget: Budget) -> Result<VertexReport> {
    let reduced = if f.is_reduced() {
        f.clone()
    } else {
        f.as_reduce()?
    };
    let ctx = reduced.ctx();
    let p = ctx.p();
    let m = ctx.degree();
    let d = reduced.degree();
    let prediction = predicted_first_vertex(p, d)?;
    let hasse = prediction.eval_hasse(&reduced)?;
    let engine = lfun::engine(p, m, d, budget)?;
    let l = engine.l_polynomial(&reduced)?;
    let curve = l.newton_polygon()?.dilate(p - 1);
    let actual = curve
        .first_vertex()
        .ok_or_else(|| Error::internal("curve polygon has no vertex"))?;
    let (vx, vy) = prediction.vertex();
    let agrees = actual == (vx, Rat::from_integer(vy as i64));
    let at = curve
        .y_at(vx)
        .ok_or_else(|| Error::internal("predicted abscissa outside the polygon"))?;
    let lies_on_or_above = at >= Rat::from_integer(vy as i64);
    Ok(VertexReport {
        p,
        m,
        d,
        case_tag: prediction.case().tag(),
        hasse_nonzero: !hasse.is_zero(),
        hasse,
        predicted: (vx, vy),
        actual,
        agrees,
        lies_on_or_above,
    })
}
