//! Exact arithmetic in F_p and F_{p^m}.
//!
//! A [`FieldCtx`] fixes an odd prime `p`, an extension degree `m` and the
//! lexicographically smallest monic irreducible modulus of degree `m` over
//! F_p, so the same `(p, m)` always names the same field. Elements are dense
//! coordinate vectors in the polynomial basis `1, t, ..., t^{m-1}`.

use crate::error::{Error, Result};
use std::fmt;
use std::sync::Arc;

#[derive(Debug)]
struct Inner {
    p: u64,
    m: usize,
    /// Monic modulus; `modulus[i]` is the coefficient of `t^i`, length `m + 1`.
    modulus: Vec<u64>,
    /// `reduction[j]` = coordinates of `t^{m+j} mod modulus`, for `j < m - 1`.
    reduction: Vec<Vec<u64>>,
    /// `trace[j]` = Tr_{F_q/F_p}(t^j) for `j < m`.
    trace: Vec<u64>,
}

/// An ambient field F_{p^m} with a fixed deterministic modulus. Cheap to clone.
#[derive(Clone, Debug)]
pub struct FieldCtx {
    inner: Arc<Inner>,
}

impl PartialEq for FieldCtx {
    fn eq(&self, other: &Self) -> bool {
        self.same_field(other)
    }
}
impl Eq for FieldCtx {}

/// An element of F_{p^m}, carrying a handle to its field.
#[derive(Clone, Debug)]
pub struct FieldElement {
    ctx: FieldCtx,
    coords: Vec<u64>,
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

// --- dense polynomial helpers over F_p (used for the irreducibility scan) ---

fn poly_trim(a: &mut Vec<u64>) {
    while a.last() == Some(&0) {
        a.pop();
    }
}

fn poly_rem(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    debug_assert!(!b.is_empty());
    let mut r = a.to_vec();
    poly_trim(&mut r);
    let db = b.len() - 1;
    let lb_inv = mod_inv(b[db], p);
    while r.len() > db {
        let dr = r.len() - 1;
        let c = (r[dr] * lb_inv) % p;
        if c != 0 {
            for i in 0..=db {
                let idx = dr - db + i;
                r[idx] = (r[idx] + (p - 1) * c % p * b[i]) % p;
            }
        }
        r.pop();
        poly_trim(&mut r);
    }
    r
}

fn poly_mul_mod(a: &[u64], b: &[u64], f: &[u64], p: u64) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut prod = vec![0u64; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            prod[i + j] = (prod[i + j] + ai * bj) % p;
        }
    }
    poly_rem(&prod, f, p)
}

fn poly_gcd(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    poly_trim(&mut a);
    poly_trim(&mut b);
    while !b.is_empty() {
        let r = poly_rem(&a, &b, p);
        a = b;
        b = r;
    }
    a
}

fn mod_inv(a: u64, p: u64) -> u64 {
    // p is prime and a != 0 mod p.
    mod_pow(a % p, p - 2, p)
}

fn mod_pow(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut acc = 1u64;
    b %= p;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    acc
}

/// `x^{p^j} mod f` by repeated p-th powering of the polynomial `x`.
fn x_pow_p_pow(j: usize, f: &[u64], p: u64) -> Vec<u64> {
    let x = vec![0, 1];
    let mut g = poly_rem(&x, f, p);
    for _ in 0..j {
        // g <- g^p mod f
        let mut acc = vec![1u64];
        let mut base = g.clone();
        let mut e = p;
        while e > 0 {
            if e & 1 == 1 {
                acc = poly_mul_mod(&acc, &base, f, p);
            }
            base = poly_mul_mod(&base, &base, f, p);
            e >>= 1;
        }
        g = acc;
    }
    g
}

/// A monic `f` of degree `m` is irreducible over F_p iff it shares no factor
/// with `x^{p^j} - x` for any `j <= m/2` (a reducible `f` has an irreducible
/// factor of degree at most `m/2`).
fn is_irreducible(f: &[u64], p: u64) -> bool {
    let m = f.len() - 1;
    if m == 1 {
        return true;
    }
    for j in 1..=(m / 2) {
        let mut g = x_pow_p_pow(j, f, p);
        // g - x
        if g.len() < 2 {
            g.resize(2, 0);
        }
        g[1] = (g[1] + p - 1) % p;
        poly_trim(&mut g);
        let gcd = poly_gcd(f, &g, p);
        if gcd.len() != 1 {
            return false;
        }
    }
    true
}

impl FieldCtx {
    /// Builds F_{p^m} with the lexicographically smallest monic irreducible
    /// modulus of degree `m` (scanning `t^m + a_{m-1} t^{m-1} + ... + a_0` in
    /// lex order of `(a_{m-1}, ..., a_0)`).
    pub fn new(p: u64, m: usize) -> Result<FieldCtx> {
        if !is_prime(p) {
            return Err(Error::domain(format!("p = {p} is not prime")));
        }
        if p == 2 {
            return Err(Error::domain("p must be odd"));
        }
        if m == 0 {
            return Err(Error::domain("extension degree m must be >= 1"));
        }
        let count = (p as u128).checked_pow(m as u32).ok_or_else(|| {
            Error::budget(format!("p^m overflows for p = {p}, m = {m}"))
        })?;
        if count > 1 << 40 {
            return Err(Error::budget(format!(
                "field F_{p}^{m} has more than 2^40 elements"
            )));
        }
        let mut modulus = None;
        for v in 0..count {
            let mut f = vec![0u64; m + 1];
            f[m] = 1;
            let mut vv = v;
            for i in 0..m {
                f[i] = (vv % p as u128) as u64;
                vv /= p as u128;
            }
            if is_irreducible(&f, p) {
                modulus = Some(f);
                break;
            }
        }
        let modulus = modulus
            .ok_or_else(|| Error::internal(format!("no irreducible modulus for ({p}, {m})")))?;

        // t^{m+j} mod f for the schoolbook reduction step.
        let mut reduction: Vec<Vec<u64>> = Vec::with_capacity(m.saturating_sub(1));
        let mut cur: Vec<u64> = modulus[..m].iter().map(|&c| (p - c % p) % p).collect(); // t^m
        for _ in 0..m.saturating_sub(1) {
            reduction.push(cur.clone());
            // cur <- t * cur mod f
            let top = cur[m - 1];
            let mut next = vec![0u64; m];
            for i in (1..m).rev() {
                next[i] = cur[i - 1];
            }
            if top != 0 {
                for i in 0..m {
                    next[i] = (next[i] + top * (p - modulus[i] % p) % p) % p;
                }
            }
            cur = next;
        }

        // Tr(t^j) = trace of the multiply-by-t^j map; column i of that map is
        // t^{j+i} mod f, so the trace is the sum of the i-th coordinates.
        let mut powers: Vec<Vec<u64>> = Vec::with_capacity(2 * m);
        let mut pw = vec![0u64; m];
        pw[0] = 1;
        for _ in 0..2 * m {
            powers.push(pw.clone());
            let top = pw[m - 1];
            let mut next = vec![0u64; m];
            for i in (1..m).rev() {
                next[i] = pw[i - 1];
            }
            if top != 0 {
                for i in 0..m {
                    next[i] = (next[i] + top * (p - modulus[i] % p) % p) % p;
                }
            }
            pw = next;
        }
        let trace = (0..m)
            .map(|j| (0..m).map(|i| powers[j + i][i]).sum::<u64>() % p)
            .collect();

        Ok(FieldCtx {
            inner: Arc::new(Inner {
                p,
                m,
                modulus,
                reduction,
                trace,
            }),
        })
    }

    pub fn p(&self) -> u64 {
        self.inner.p
    }

    pub fn degree(&self) -> usize {
        self.inner.m
    }

    /// Field size p^m.
    pub fn order(&self) -> u64 {
        (self.inner.p as u128).pow(self.inner.m as u32) as u64
    }

    /// Modulus coefficients, constant term first, length `m + 1` (monic).
    pub fn modulus(&self) -> &[u64] {
        &self.inner.modulus
    }

    pub fn same_field(&self, other: &FieldCtx) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.p == other.inner.p && self.inner.modulus == other.inner.modulus)
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement {
            ctx: self.clone(),
            coords: vec![0; self.inner.m],
        }
    }

    pub fn one(&self) -> FieldElement {
        self.from_u64(1)
    }

    pub fn from_u64(&self, a: u64) -> FieldElement {
        let mut coords = vec![0; self.inner.m];
        coords[0] = a % self.inner.p;
        FieldElement {
            ctx: self.clone(),
            coords,
        }
    }

    /// The class of `t`, a generator of the polynomial basis (not necessarily
    /// of the multiplicative group).
    pub fn gen(&self) -> FieldElement {
        let mut coords = vec![0; self.inner.m];
        if self.inner.m == 1 {
            // Degenerate degree-1 modulus t + a0: t = -a0.
            coords[0] = (self.inner.p - self.inner.modulus[0] % self.inner.p) % self.inner.p;
        } else {
            coords[1] = 1;
        }
        FieldElement {
            ctx: self.clone(),
            coords,
        }
    }

    pub fn from_coords(&self, coords: &[u64]) -> Result<FieldElement> {
        if coords.len() != self.inner.m {
            return Err(Error::domain(format!(
                "expected {} coordinates, got {}",
                self.inner.m,
                coords.len()
            )));
        }
        Ok(FieldElement {
            ctx: self.clone(),
            coords: coords.iter().map(|&c| c % self.inner.p).collect(),
        })
    }

    /// Element number `idx` in the little-endian coordinate enumeration
    /// (coordinate of `1` varies fastest).
    pub fn element_from_index(&self, idx: u64) -> FieldElement {
        let p = self.inner.p;
        let mut coords = vec![0; self.inner.m];
        let mut v = idx;
        for c in coords.iter_mut() {
            *c = v % p;
            v /= p;
        }
        FieldElement {
            ctx: self.clone(),
            coords,
        }
    }

    pub fn index_of(&self, x: &FieldElement) -> u64 {
        let p = self.inner.p;
        let mut idx = 0u64;
        for &c in x.coords.iter().rev() {
            idx = idx * p + c;
        }
        idx
    }

    /// All field elements in index order.
    pub fn elements(&self) -> impl Iterator<Item = FieldElement> + '_ {
        (0..self.order()).map(move |i| self.element_from_index(i))
    }
}

impl PartialEq for FieldElement {
    fn eq(&self, other: &Self) -> bool {
        self.ctx.same_field(&other.ctx) && self.coords == other.coords
    }
}
impl Eq for FieldElement {}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}

impl FieldElement {
    pub fn ctx(&self) -> &FieldCtx {
        &self.ctx
    }

    pub fn coords(&self) -> &[u64] {
        &self.coords
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|&c| c == 0)
    }

    pub fn add(&self, rhs: &FieldElement) -> FieldElement {
        debug_assert!(self.ctx.same_field(&rhs.ctx));
        let p = self.ctx.inner.p;
        let coords = self
            .coords
            .iter()
            .zip(&rhs.coords)
            .map(|(&a, &b)| (a + b) % p)
            .collect();
        FieldElement {
            ctx: self.ctx.clone(),
            coords,
        }
    }

    pub fn sub(&self, rhs: &FieldElement) -> FieldElement {
        debug_assert!(self.ctx.same_field(&rhs.ctx));
        let p = self.ctx.inner.p;
        let coords = self
            .coords
            .iter()
            .zip(&rhs.coords)
            .map(|(&a, &b)| (a + p - b) % p)
            .collect();
        FieldElement {
            ctx: self.ctx.clone(),
            coords,
        }
    }

    pub fn neg(&self) -> FieldElement {
        let p = self.ctx.inner.p;
        let coords = self.coords.iter().map(|&a| (p - a) % p).collect();
        FieldElement {
            ctx: self.ctx.clone(),
            coords,
        }
    }

    pub fn mul(&self, rhs: &FieldElement) -> FieldElement {
        debug_assert!(self.ctx.same_field(&rhs.ctx));
        let inner = &self.ctx.inner;
        let (p, m) = (inner.p, inner.m);
        if m == 1 {
            return FieldElement {
                ctx: self.ctx.clone(),
                coords: vec![self.coords[0] * rhs.coords[0] % p],
            };
        }
        let mut prod = vec![0u64; 2 * m - 1];
        for (i, &a) in self.coords.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in rhs.coords.iter().enumerate() {
                prod[i + j] += a * b;
            }
        }
        for v in prod.iter_mut() {
            *v %= p;
        }
        // Fold the high part using the precomputed images of t^{m+j}.
        let mut coords: Vec<u64> = prod[..m].to_vec();
        for j in 0..m - 1 {
            let c = prod[m + j];
            if c != 0 {
                let red = &inner.reduction[j];
                for i in 0..m {
                    coords[i] = (coords[i] + c * red[i]) % p;
                }
            }
        }
        FieldElement {
            ctx: self.ctx.clone(),
            coords,
        }
    }

    pub fn square(&self) -> FieldElement {
        self.mul(self)
    }

    pub fn scalar_mul(&self, a: u64) -> FieldElement {
        let p = self.ctx.inner.p;
        let a = a % p;
        let coords = self.coords.iter().map(|&c| c * a % p).collect();
        FieldElement {
            ctx: self.ctx.clone(),
            coords,
        }
    }

    pub fn pow(&self, mut e: u128) -> FieldElement {
        let mut base = self.clone();
        let mut acc = self.ctx.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.square();
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse. Panics on zero.
    pub fn inv(&self) -> FieldElement {
        assert!(!self.is_zero(), "inverse of zero");
        self.pow(self.ctx.order() as u128 - 2)
    }

    /// `x^(p^e)`; `frobenius(x, m) == x`.
    pub fn frobenius(&self, e: usize) -> FieldElement {
        let m = self.ctx.inner.m;
        let e = e % m;
        if e == 0 {
            return self.clone();
        }
        let exp = (self.ctx.inner.p as u128).pow(e as u32);
        self.pow(exp)
    }

    /// Absolute trace down to F_p: sum of `x^{p^j}` over `j < m`.
    pub fn trace_to_prime(&self) -> u64 {
        let inner = &self.ctx.inner;
        let mut acc = 0u64;
        for (j, &c) in self.coords.iter().enumerate() {
            acc = (acc + c * inner.trace[j]) % inner.p;
        }
        acc
    }

    /// Absolute norm down to F_p: product of `x^{p^j}` over `j < m`.
    pub fn norm_to_prime(&self) -> u64 {
        if self.is_zero() {
            return 0;
        }
        let m = self.ctx.inner.m;
        let mut acc = self.clone();
        let mut pow = self.clone();
        for _ in 1..m {
            pow = pow.frobenius(1);
            acc = acc.mul(&pow);
        }
        debug_assert!(acc.coords[1..].iter().all(|&c| c == 0));
        acc.coords[0]
    }
}

impl<'a> std::ops::Add for &'a FieldElement {
    type Output = FieldElement;
    fn add(self, rhs: &'a FieldElement) -> FieldElement {
        FieldElement::add(self, rhs)
    }
}
impl<'a> std::ops::Sub for &'a FieldElement {
    type Output = FieldElement;
    fn sub(self, rhs: &'a FieldElement) -> FieldElement {
        FieldElement::sub(self, rhs)
    }
}
impl<'a> std::ops::Mul for &'a FieldElement {
    type Output = FieldElement;
    fn mul(self, rhs: &'a FieldElement) -> FieldElement {
        FieldElement::mul(self, rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_elt(ctx: &FieldCtx, rng: &mut impl Rng) -> FieldElement {
        ctx.element_from_index(rng.random_range(0..ctx.order()))
    }

    /// Exhaustive irreducibility oracle: no monic divisor of degree 1..m-1.
    fn irreducible_oracle(f: &[u64], p: u64) -> bool {
        let m = f.len() - 1;
        for dd in 1..m {
            let count = p.pow(dd as u32);
            for v in 0..count {
                let mut g = vec![0u64; dd + 1];
                g[dd] = 1;
                let mut vv = v;
                for c in g.iter_mut().take(dd) {
                    *c = vv % p;
                    vv /= p;
                }
                if poly_rem(f, &g, p).is_empty() {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn modulus_examples() {
        // (3,1): degenerate modulus t.
        let f31 = FieldCtx::new(3, 1).unwrap();
        assert_eq!(f31.modulus(), &[0, 1]);

        // (3,2): lex-first irreducible is t^2 + 1.
        let f32 = FieldCtx::new(3, 2).unwrap();
        assert_eq!(f32.modulus(), &[1, 0, 1]);
        assert!(irreducible_oracle(f32.modulus(), 3));

        // (3,3): lex-first monic irreducible cubic; cross-check against the
        // exhaustive oracle scanning in the same order.
        let f33 = FieldCtx::new(3, 3).unwrap();
        assert!(irreducible_oracle(f33.modulus(), 3));
        'outer: for v in 0..27u64 {
            let mut g = vec![0u64; 4];
            g[3] = 1;
            let mut vv = v;
            for c in g.iter_mut().take(3) {
                *c = vv % 3;
                vv /= 3;
            }
            if irreducible_oracle(&g, 3) {
                assert_eq!(f33.modulus(), &g[..]);
                break 'outer;
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(FieldCtx::new(4, 1).is_err());
        assert!(FieldCtx::new(2, 3).is_err());
        assert!(FieldCtx::new(5, 0).is_err());
    }

    #[test]
    fn frobenius_examples() {
        let f9 = FieldCtx::new(3, 2).unwrap();
        let t = f9.gen();
        // t^3 = -t in F_9 with modulus t^2 + 1.
        assert_eq!(t.frobenius(1), t.scalar_mul(2));
        assert_eq!(t.frobenius(0), t);
        let c = f9.from_u64(2);
        assert_eq!(c.frobenius(1), c);
        assert_eq!(t.frobenius(2), t);
    }

    #[test]
    fn trace_and_norm_examples() {
        let f9 = FieldCtx::new(3, 2).unwrap();
        assert_eq!(f9.one().trace_to_prime(), 2);
        assert_eq!(f9.zero().trace_to_prime(), 0);
        let t = f9.gen();
        // Tr(t) = t + t^3 = t + 2t = 0; N(t) = t * t^3 = t^4 = 1.
        assert_eq!(t.trace_to_prime(), 0);
        assert_eq!(t.norm_to_prime(), 1);
        assert_eq!(f9.one().norm_to_prime(), 1);
        assert_eq!(f9.zero().norm_to_prime(), 0);
    }

    #[test]
    fn field_properties_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for (p, m) in [(3, 1), (3, 2), (3, 3), (5, 2), (7, 2)] {
            let ctx = FieldCtx::new(p, m).unwrap();
            let q = ctx.order();
            for _ in 0..200 {
                let x = rand_elt(&ctx, &mut rng);
                let y = rand_elt(&ctx, &mut rng);
                // frobenius is a field automorphism with frob^m = id
                assert_eq!(x.frobenius(m), x);
                assert_eq!(
                    x.add(&y).frobenius(1),
                    x.frobenius(1).add(&y.frobenius(1))
                );
                assert_eq!(
                    x.mul(&y).frobenius(1),
                    x.frobenius(1).mul(&y.frobenius(1))
                );
                // multiplicative group order
                if !x.is_zero() {
                    assert_eq!(x.pow(q as u128 - 1), ctx.one());
                    assert_eq!(x.mul(&x.inv()), ctx.one());
                }
                // trace is F_p-linear, norm multiplicative
                assert_eq!(
                    x.add(&y).trace_to_prime(),
                    (x.trace_to_prime() + y.trace_to_prime()) % p
                );
                assert_eq!(
                    x.mul(&y).norm_to_prime(),
                    x.norm_to_prime() * y.norm_to_prime() % p
                );
            }
        }
    }

    #[test]
    fn element_index_roundtrip() {
        let ctx = FieldCtx::new(5, 2).unwrap();
        for i in 0..ctx.order() {
            let x = ctx.element_from_index(i);
            assert_eq!(ctx.index_of(&x), i);
        }
    }
}
