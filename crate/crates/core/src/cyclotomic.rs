//! Exact arithmetic in Z\[ζ_p\] and the valuations used for Newton polygons.
//!
//! Elements are stored on the Z-basis `1, ζ, ..., ζ^{p-2}` (the power basis
//! modulo the p-th cyclotomic polynomial). The prime p is totally ramified in
//! Q(ζ_p): the unique prime above it is generated by λ = ζ - 1, and
//! λ^{p-1} and p agree up to a unit. Valuations are computed in π-units
//! normalized by `v_π(p) = p - 1` (π, the standard uniformizer with
//! π^{p-1} = -p, differs from λ by a unit, so v_π = v_λ and π itself is never
//! constructed); the q-adic normalization `v_q(q) = 1` is `v_π / (m(p-1))`.

use crate::error::{Error, Result};
use crate::Rat;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use std::fmt;

/// An element of Z\[ζ_p\] in the basis `1, ζ, ..., ζ^{p-2}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CycInt {
    p: u64,
    coords: Vec<BigInt>,
}

/// A π-adic or q-adic valuation: exact rational, or +∞ for the zero element.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Valuation {
    Finite(Rat),
    Infinite,
}

impl Valuation {
    pub fn finite(self) -> Option<Rat> {
        match self {
            Valuation::Finite(v) => Some(v),
            Valuation::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Valuation::Infinite)
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Infinite => write!(f, "inf"),
            Valuation::Finite(v) => {
                if v.denom() == &1 {
                    write!(f, "{}", v.numer())
                } else {
                    write!(f, "{}/{}", v.numer(), v.denom())
                }
            }
        }
    }
}

impl PartialOrd for Valuation {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Valuation {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use Valuation::*;
        match (self, other) {
            (Infinite, Infinite) => std::cmp::Ordering::Equal,
            (Infinite, Finite(_)) => std::cmp::Ordering::Greater,
            (Finite(_), Infinite) => std::cmp::Ordering::Less,
            (Finite(a), Finite(b)) => a.cmp(b),
        }
    }
}

impl CycInt {
    pub fn zero(p: u64) -> CycInt {
        CycInt {
            p,
            coords: vec![BigInt::zero(); (p - 1) as usize],
        }
    }

    pub fn from_int(p: u64, n: i64) -> CycInt {
        let mut x = CycInt::zero(p);
        x.coords[0] = BigInt::from(n);
        x
    }

    pub fn one(p: u64) -> CycInt {
        CycInt::from_int(p, 1)
    }

    pub fn from_coords(p: u64, coords: Vec<BigInt>) -> Result<CycInt> {
        if coords.len() != (p - 1) as usize {
            return Err(Error::domain(format!(
                "expected {} coordinates for p = {p}, got {}",
                p - 1,
                coords.len()
            )));
        }
        Ok(CycInt { p, coords })
    }

    /// `Σ_a n_a ζ^a` from the p exponent counts `n_0, ..., n_{p-1}`, reduced
    /// to the power basis via `ζ^{p-1} = -(1 + ζ + ... + ζ^{p-2})`.
    pub fn from_exponent_counts(p: u64, counts: &[i64]) -> Result<CycInt> {
        if counts.len() != p as usize {
            return Err(Error::domain(format!(
                "expected {p} exponent counts, got {}",
                counts.len()
            )));
        }
        let mut x = CycInt::zero(p);
        let top = BigInt::from(counts[(p - 1) as usize]);
        for (a, &n) in counts.iter().enumerate().take((p - 1) as usize) {
            x.coords[a] = BigInt::from(n) - &top;
        }
        Ok(x)
    }

    /// ζ^a for any integer exponent (taken mod p).
    pub fn zeta_pow(p: u64, a: u64) -> CycInt {
        let a = (a % p) as usize;
        let mut x = CycInt::zero(p);
        if a == (p - 1) as usize {
            for c in x.coords.iter_mut() {
                *c = BigInt::from(-1);
            }
        } else {
            x.coords[a] = BigInt::one();
        }
        x
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn coords(&self) -> &[BigInt] {
        &self.coords
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| c.is_zero())
    }

    pub fn add(&self, rhs: &CycInt) -> CycInt {
        debug_assert_eq!(self.p, rhs.p);
        CycInt {
            p: self.p,
            coords: self
                .coords
                .iter()
                .zip(&rhs.coords)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, rhs: &CycInt) -> CycInt {
        debug_assert_eq!(self.p, rhs.p);
        CycInt {
            p: self.p,
            coords: self
                .coords
                .iter()
                .zip(&rhs.coords)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn neg(&self) -> CycInt {
        CycInt {
            p: self.p,
            coords: self.coords.iter().map(|a| -a).collect(),
        }
    }

    pub fn scalar_mul(&self, n: &BigInt) -> CycInt {
        CycInt {
            p: self.p,
            coords: self.coords.iter().map(|a| a * n).collect(),
        }
    }

    pub fn mul(&self, rhs: &CycInt) -> CycInt {
        debug_assert_eq!(self.p, rhs.p);
        let p = self.p as usize;
        let n = p - 1;
        let mut conv = vec![BigInt::zero(); 2 * n - 1];
        for (i, a) in self.coords.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coords.iter().enumerate() {
                conv[i + j] += a * b;
            }
        }
        let mut out = CycInt::zero(self.p);
        for (e, v) in conv.into_iter().enumerate() {
            if v.is_zero() {
                continue;
            }
            let k = e % p;
            if k == n {
                for c in out.coords.iter_mut() {
                    *c -= &v;
                }
            } else {
                out.coords[k] += v;
            }
        }
        out
    }

    /// The Galois image ζ ↦ ζ^a, for a prime to p.
    pub fn galois(&self, a: u64) -> Result<CycInt> {
        if a % self.p == 0 {
            return Err(Error::domain("galois exponent must be prime to p"));
        }
        let p = self.p;
        let mut out = CycInt::zero(p);
        for (i, c) in self.coords.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let k = (a as u128 * i as u128 % p as u128) as usize;
            if k == (p - 1) as usize {
                for o in out.coords.iter_mut() {
                    *o -= c;
                }
            } else {
                out.coords[k] += c;
            }
        }
        Ok(out)
    }

    /// Complex conjugation ζ ↦ ζ^{-1}.
    pub fn conj(&self) -> CycInt {
        self.galois(self.p - 1).expect("p - 1 is prime to p")
    }

    /// Exact division by a positive integer; errors if any coordinate is not
    /// divisible (the basis is a Z-basis, so divisibility is coordinatewise).
    pub fn div_exact(&self, n: u64) -> Result<CycInt> {
        let n = BigInt::from(n);
        let mut coords = Vec::with_capacity(self.coords.len());
        for c in &self.coords {
            let (q, r) = c.div_rem(&n);
            if !r.is_zero() {
                return Err(Error::internal(format!(
                    "non-exact division of cyclotomic integer by {n}"
                )));
            }
            coords.push(q);
        }
        Ok(CycInt {
            p: self.p,
            coords,
        })
    }

    /// π-adic valuation with `v_π(p) = p - 1`; +∞ for zero.
    ///
    /// Substituting ζ = 1 + λ rewrites the element as `Σ_j b_j λ^j` with
    /// integer `b_j` and λ-degree < p-1; since `v_π(λ) = 1` the candidate
    /// values `j + (p-1)·v_p(b_j)` are pairwise incongruent mod p-1, so the
    /// minimum over nonzero `b_j` is attained uniquely and equals the
    /// valuation exactly.
    pub fn pi_valuation(&self) -> Valuation {
        if self.is_zero() {
            return Valuation::Infinite;
        }
        let n = self.coords.len();
        // b_j = Σ_{i >= j} c_i * C(i, j)
        let mut binom = vec![vec![0i64; n]; n];
        for i in 0..n {
            binom[i][0] = 1;
            for j in 1..=i {
                binom[i][j] = binom[i - 1][j - 1] + if j <= i - 1 { binom[i - 1][j] } else { 0 };
            }
        }
        let mut best: Option<u64> = None;
        for j in 0..n {
            let mut bj = BigInt::zero();
            for i in j..n {
                if !self.coords[i].is_zero() {
                    bj += &self.coords[i] * BigInt::from(binom[i][j]);
                }
            }
            if bj.is_zero() {
                continue;
            }
            let val = j as u64 + (self.p - 1) * vp_big(&bj, self.p);
            best = Some(match best {
                None => val,
                Some(b) => b.min(val),
            });
        }
        Valuation::Finite(Rat::from_integer(
            best.expect("nonzero element has a finite valuation") as i64,
        ))
    }

    /// q-adic valuation normalized by `v_q(q) = 1` over the base field
    /// F_{p^m}: `v_π / (m(p-1))`.
    pub fn vq(&self, m: usize) -> Valuation {
        match self.pi_valuation() {
            Valuation::Infinite => Valuation::Infinite,
            Valuation::Finite(v) => {
                Valuation::Finite(v / Rat::from_integer((m as u64 * (self.p - 1)) as i64))
            }
        }
    }

    /// Coordinates as decimal strings (arbitrary precision safe for JSON).
    pub fn coords_strings(&self) -> Vec<String> {
        self.coords.iter().map(|c| c.to_string()).collect()
    }
}

/// p-adic valuation of a nonzero integer.
fn vp_big(x: &BigInt, p: u64) -> u64 {
    debug_assert!(!x.is_zero());
    let p = BigInt::from(p);
    let mut x = x.abs();
    let mut v = 0;
    loop {
        let (q, r) = x.div_rem(&p);
        if !r.is_zero() {
            return v;
        }
        v += 1;
        x = q;
    }
}

impl fmt::Display for CycInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}
