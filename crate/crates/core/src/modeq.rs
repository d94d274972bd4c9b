//! Solutions of the modular equation Σ_D d·u_d ≡ 0 mod p^ℓ − 1.
//!
//! A solution assigns to each exponent d ∈ D a value u_d ∈ [0, p^ℓ − 1]; its
//! weight is the total base-p digit sum, and its density is
//! weight / ((p−1)·length). The p-density of D is the minimum density over
//! all lengths; this module provides the exact BFS oracle for minimal
//! weights, the closed-form densities for the interval sets
//! D = {1 ≤ i ≤ d, gcd(i, p) = 1}, generators for the minimal irreducible
//! solutions of the degree families that admit them, and an exhaustive
//! brute-force enumerator used to validate the generators.

use crate::error::{Error, Result};
use crate::Rat;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Hard cap on p^ℓ − 1 for the BFS residue graph.
const BFS_STATE_CAP: u64 = 100_000_000;
/// Hard cap on the brute-force multiset enumeration size.
const BRUTE_CAP: u128 = 40_000_000;

/// A finite set of positive exponents together with the prime p.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExponentSet {
    p: u64,
    elems: BTreeSet<u64>,
}

impl ExponentSet {
    pub fn new(p: u64, elems: BTreeSet<u64>) -> Result<ExponentSet> {
        if p < 3 || p % 2 == 0 || !is_prime(p) {
            return Err(Error::domain(format!("p = {p} must be an odd prime")));
        }
        if elems.is_empty() {
            return Err(Error::domain("exponent set must be non-empty"));
        }
        if elems.iter().any(|&d| d == 0) {
            return Err(Error::domain("exponents must be positive"));
        }
        Ok(ExponentSet { p, elems })
    }

    /// The canonical interval set {1 ≤ i ≤ d, gcd(i, p) = 1}.
    pub fn interval(p: u64, d: u64) -> Result<ExponentSet> {
        if d == 0 {
            return Err(Error::domain("d must be positive"));
        }
        if d % p == 0 {
            return Err(Error::domain(format!(
                "gcd(d, p) != 1 for d = {d}, p = {p}; apply Artin-Schreier reduction first"
            )));
        }
        let elems = (1..=d).filter(|i| i % p != 0).collect();
        ExponentSet::new(p, elems)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn elems(&self) -> &BTreeSet<u64> {
        &self.elems
    }

    pub fn max(&self) -> u64 {
        *self.elems.iter().next_back().unwrap()
    }

    pub fn contains(&self, d: u64) -> bool {
        self.elems.contains(&d)
    }
}

pub(crate) fn is_prime(n: u64) -> bool {
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

/// Cyclic rotation of the base-p digits of u in a window of `len` digits:
/// p^len − 1 maps to itself, every other u to p·u mod (p^len − 1).
pub fn shift_digits(p: u64, len: u32, u: u64) -> u64 {
    let m = pow_u64(p, len) - 1;
    if u == m {
        m
    } else {
        (u as u128 * p as u128 % m as u128) as u64
    }
}

pub(crate) fn pow_u64(p: u64, e: u32) -> u64 {
    p.checked_pow(e).expect("p^l overflows u64")
}

fn checked_modulus(p: u64, len: u32) -> Result<u64> {
    let m = (p as u128)
        .checked_pow(len)
        .filter(|&m| m - 1 <= u64::MAX as u128)
        .ok_or_else(|| Error::budget(format!("p^l overflows for p = {p}, l = {len}")))?;
    Ok((m - 1) as u64)
}

/// A tuple (u_d) with Σ d·u_d ≡ 0 mod p^ℓ − 1 and Σ d·u_d > 0.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Solution {
    p: u64,
    #[serde(rename = "l")]
    len: u32,
    u: BTreeMap<u64, u64>,
}

impl Solution {
    /// Builds a solution candidate; zero coordinates are dropped. Membership
    /// in E_{D,p}(ℓ) is checked by [`verify_solution`], not here.
    pub fn new(p: u64, len: u32, pairs: &[(u64, u64)]) -> Result<Solution> {
        if len == 0 {
            return Err(Error::domain("length must be >= 1"));
        }
        let m = checked_modulus(p, len)?;
        let mut u = BTreeMap::new();
        for &(d, v) in pairs {
            if v == 0 {
                continue;
            }
            let slot = u.entry(d).or_insert(0u64);
            *slot += v;
            if *slot > m {
                return Err(Error::domain(format!(
                    "coordinate u_{d} = {slot} exceeds p^l - 1 = {m}"
                )));
            }
        }
        Ok(Solution { p, len, u })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn len(&self) -> u32 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn coords(&self) -> &BTreeMap<u64, u64> {
        &self.u
    }

    pub fn modulus(&self) -> u64 {
        pow_u64(self.p, self.len) - 1
    }

    /// Base-p digit u_{d,r}.
    pub fn digit(&self, d: u64, r: u32) -> u64 {
        let v = self.u.get(&d).copied().unwrap_or(0);
        v / pow_u64(self.p, r) % self.p
    }

    /// Total weight Σ_d s_p(u_d).
    pub fn weight(&self) -> u64 {
        self.u.values().map(|&v| digit_sum(self.p, v)).sum()
    }

    /// r-th weight w_r = Σ_d u_{d,r}.
    pub fn weight_at(&self, r: u32) -> u64 {
        self.u.keys().map(|&d| self.digit(d, r)).sum()
    }

    /// Σ_d d·u_d.
    pub fn total(&self) -> u128 {
        self.u
            .iter()
            .map(|(&d, &v)| d as u128 * v as u128)
            .sum()
    }

    pub fn density(&self) -> Rat {
        Rat::new(
            self.weight() as i64,
            ((self.p - 1) * self.len as u64) as i64,
        )
    }

    /// Coordinatewise digit rotation; preserves weight, length and density.
    pub fn shift(&self) -> Solution {
        let u = self
            .u
            .iter()
            .map(|(&d, &v)| (d, shift_digits(self.p, self.len, v)))
            .collect();
        Solution {
            p: self.p,
            len: self.len,
            u,
        }
    }

    /// Canonical representative of the shift orbit: the rotation with the
    /// lexicographically smallest coordinate map.
    pub fn canonical(&self) -> Solution {
        let mut best = self.clone();
        let mut cur = self.clone();
        for _ in 1..self.len {
            cur = cur.shift();
            if cur < best {
                best = cur.clone();
            }
        }
        best
    }
}

fn digit_sum(p: u64, mut v: u64) -> u64 {
    let mut s = 0;
    while v > 0 {
        s += v % p;
        v /= p;
    }
    s
}

/// Membership test for E_{D,p}(ℓ): coordinates indexed by D, each below p^ℓ,
/// the congruence holds and the total is positive.
pub fn verify_solution(set: &ExponentSet, sol: &Solution) -> bool {
    if sol.p != set.p {
        return false;
    }
    let m = match checked_modulus(sol.p, sol.len) {
        Ok(m) => m,
        Err(_) => return false,
    };
    if sol.u.iter().any(|(d, &v)| !set.contains(*d) || v > m) {
        return false;
    }
    let total = sol.total();
    total > 0 && total % m as u128 == 0
}

/// The support map of a solution: φ(k) = Σ_d d·shift^k(u_d) / (p^ℓ − 1).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupportMap {
    pub len: u32,
    pub values: Vec<u64>,
    /// (position i, jump p·φ(i) − φ(i+1)) at the non-geometric steps.
    pub jumps: Vec<(u32, u64)>,
    pub irreducible: bool,
}

impl SupportMap {
    /// |φ| = Σ_i φ(i).
    pub fn total(&self) -> u64 {
        self.values.iter().sum()
    }
}

pub fn support_map(set: &ExponentSet, sol: &Solution) -> Result<SupportMap> {
    if !verify_solution(set, sol) {
        return Err(Error::domain("not a solution of the modular equation"));
    }
    let m = sol.modulus() as u128;
    let mut values = Vec::with_capacity(sol.len as usize);
    let mut cur = sol.clone();
    for _ in 0..sol.len {
        let t = cur.total();
        debug_assert!(t % m == 0);
        values.push((t / m) as u64);
        cur = cur.shift();
    }
    let l = sol.len as usize;
    let mut jumps = Vec::new();
    for i in 0..l {
        let next = values[(i + 1) % l];
        let pv = sol.p * values[i];
        if pv != next {
            debug_assert!(pv > next);
            jumps.push((i as u32, pv - next));
        }
    }
    let distinct: BTreeSet<u64> = values.iter().copied().collect();
    let irreducible = distinct.len() == l;
    Ok(SupportMap {
        len: sol.len,
        values,
        jumps,
        irreducible,
    })
}

pub fn is_irreducible(set: &ExponentSet, sol: &Solution) -> Result<bool> {
    Ok(support_map(set, sol)?.irreducible)
}

/// Reconstructs the solution determined by a support map all of whose steps
/// jump by elements of D (valid when the support has exactly `weight` jumps):
/// u_d sums p^i over the positions i with p·φ(ℓ−1−i) − φ(ℓ−i) = d.
pub fn solution_from_support(set: &ExponentSet, support: &SupportMap) -> Result<Solution> {
    let p = set.p;
    let l = support.len;
    let m = checked_modulus(p, l)?;
    let vals = &support.values;
    let n = vals.len();
    let mut pairs: BTreeMap<u64, u64> = BTreeMap::new();
    for i in 1..=n {
        let a = vals[(2 * n - 1 - i) % n]; // φ(ℓ−1−i)
        let b = vals[(2 * n - i) % n]; // φ(ℓ−i)
        let jump = p * a - b;
        if jump > 0 {
            if !set.contains(jump) {
                return Err(Error::domain(format!("jump {jump} not in D")));
            }
            let pw = pow_u64(p, (i as u32) % l) % m;
            *pairs.entry(jump).or_insert(0) += pw;
        }
    }
    Solution::new(p, l, &pairs.into_iter().collect::<Vec<_>>())
}

/// Exact minimal weight σ_{D,p}(ℓ) by breadth-first search on residues
/// mod p^ℓ − 1, one unit of weight per step d·p^r.
///
/// Digit caps never bind: a minimal multiset using the same atom p times is
/// beaten by replacing those p copies with one copy of the shifted atom, so
/// minimal solutions respect the digit bound automatically.
pub fn sigma_min_weight(set: &ExponentSet, len: u32) -> Result<u64> {
    let p = set.p;
    let m = checked_modulus(p, len)?;
    if m > BFS_STATE_CAP {
        return Err(Error::budget(format!(
            "p^l - 1 = {m} exceeds the BFS state cap {BFS_STATE_CAP}"
        )));
    }
    let mut atoms: BTreeSet<u64> = BTreeSet::new();
    for &d in &set.elems {
        let mut a = (d % m) as u128;
        for _ in 0..len {
            atoms.insert(a as u64);
            a = a * p as u128 % m as u128;
        }
    }
    if atoms.contains(&0) {
        return Ok(1);
    }
    let atoms: Vec<u64> = atoms.into_iter().collect();
    let mut dist = vec![u16::MAX; m as usize];
    let mut queue = VecDeque::new();
    for &a in &atoms {
        if dist[a as usize] == u16::MAX {
            dist[a as usize] = 1;
            queue.push_back(a);
        }
    }
    while let Some(s) = queue.pop_front() {
        let ds = dist[s as usize];
        for &a in &atoms {
            let t = s + a;
            let t = if t >= m { t - m } else { t };
            if t == 0 {
                return Ok(ds as u64 + 1);
            }
            if dist[t as usize] == u16::MAX {
                dist[t as usize] = ds + 1;
                queue.push_back(t);
            }
        }
    }
    Err(Error::internal("BFS found no solution; D empty?"))
}

/// Closed-form p-density of the interval set {1..d} (d prime to p):
/// 1/(n(p−1)) on [p^n − 1, p^{n+1} − p − 1], 2/((2n+1)(p−1)) on
/// [p^{n+1} − p + 1, p^{n+1} − 2], and 2/(p−1) on [(p−1)/2, p−2] for p ≥ 5.
pub fn density_closed_form(p: u64, d: u64) -> Result<Rat> {
    if !is_prime(p) || p == 2 {
        return Err(Error::domain(format!("p = {p} must be an odd prime")));
    }
    if d == 0 {
        return Err(Error::domain("d must be positive"));
    }
    if d % p == 0 {
        return Err(Error::domain(format!(
            "gcd(d, p) != 1 for d = {d}; apply Artin-Schreier reduction first"
        )));
    }
    if p >= 5 && d >= (p - 1) / 2 && d <= p - 2 {
        return Ok(Rat::new(2, (p - 1) as i64));
    }
    if d >= p - 1 {
        // largest n with p^n - 1 <= d
        let mut n = 1u32;
        while (p as u128).pow(n + 1) - 1 <= d as u128 {
            n += 1;
        }
        let upper = pow_u64(p, n + 1);
        if d <= upper - p - 1 {
            return Ok(Rat::new(1, (n as u64 * (p - 1)) as i64));
        }
        if d >= upper - p + 1 && d <= upper - 2 {
            return Ok(Rat::new(2, ((2 * n as u64 + 1) * (p - 1)) as i64));
        }
    }
    Err(Error::domain(format!(
        "no closed-form density for (p, d) = ({p}, {d})"
    )))
}

/// Minimum of σ(ℓ)/((p−1)ℓ) over 1 ≤ ℓ ≤ lmax, with the smallest attaining ℓ.
pub fn density_bruteforce(set: &ExponentSet, lmax: u32) -> Result<(Rat, u32)> {
    if lmax == 0 {
        return Err(Error::domain("lmax must be >= 1"));
    }
    let mut best: Option<(Rat, u32)> = None;
    for l in 1..=lmax {
        let sigma = sigma_min_weight(set, l)?;
        let dens = Rat::new(sigma as i64, ((set.p - 1) * l as u64) as i64);
        match best {
            Some((b, _)) if b <= dens => {}
            _ => best = Some((dens, l)),
        }
    }
    Ok(best.unwrap())
}

/// Default search window for [`density_bruteforce`]: 2n + 3 where
/// n = ⌊log_p(d+1)⌋.
pub fn default_density_window(p: u64, d: u64) -> u32 {
    let mut n = 0u32;
    while (p as u128).pow(n + 1) <= d as u128 + 1 {
        n += 1;
    }
    2 * n + 3
}

/// First `count` terms of the ordered set ∪_{b ∈ E_s} {p^j b}, where E_s is
/// the set of the first s integers prime to p.
pub fn c_sequence(p: u64, s: u64, count: usize) -> Result<Vec<u64>> {
    if s == 0 {
        return Err(Error::domain("s must be >= 1"));
    }
    // E_s = {1 <= i <= s + ceil(s/(p-1) - 1), gcd(i, p) = 1}
    let b = (p - 1) as i128;
    let bound = s as i128 + (s as i128 - b + b - 1).div_euclid(b);
    let es: Vec<u64> = (1..=bound.max(1) as u64).filter(|i| i % p != 0).collect();
    if es.len() != s as usize {
        return Err(Error::internal(format!(
            "E_s has {} elements, expected {s}",
            es.len()
        )));
    }
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;
    let mut heap: BinaryHeap<Reverse<u64>> = es.iter().map(|&x| Reverse(x)).collect();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let Reverse(v) = heap.pop().ok_or_else(|| Error::internal("heap empty"))?;
        out.push(v);
        let next = v
            .checked_mul(p)
            .ok_or_else(|| Error::budget("c-sequence term overflows u64"))?;
        heap.push(Reverse(next));
    }
    Ok(out)
}

/// Lower bound for |φ| over irreducible support maps of length ℓ with at
/// most s jumps: with ℓ = qs + r, 1 ≤ r ≤ s, the bound is
/// s(s+1)/2 · (p^q − 1)/(p − 1) + r(r+1)/2 · p^q.
pub fn support_weight_lower_bound(p: u64, len: u32, s: u32) -> Result<u64> {
    if s == 0 || s > len {
        return Err(Error::domain("need 1 <= s <= l"));
    }
    let q = (len - 1) / s;
    let r = (len - q * s) as u128;
    let s = s as u128;
    let pq = (p as u128).pow(q);
    let bound = s * (s + 1) / 2 * ((pq - 1) / (p as u128 - 1)) + r * (r + 1) / 2 * pq;
    u64::try_from(bound).map_err(|_| Error::budget("support weight bound overflows u64"))
}

// --- brute-force enumeration ---

/// All solutions of length ℓ and weight exactly w (canonicalized up to
/// shift), optionally filtered to the irreducible ones.
pub fn enumerate_minimal_brute(
    set: &ExponentSet,
    len: u32,
    weight: u64,
    irreducible_only: bool,
) -> Result<Vec<Solution>> {
    let p = set.p;
    let m = checked_modulus(p, len)?;
    if weight == 0 {
        return Ok(Vec::new());
    }
    let atoms: Vec<(u64, u32)> = set
        .elems
        .iter()
        .flat_map(|&d| (0..len).map(move |r| (d, r)))
        .collect();
    // multiset count estimate C(n + w - 1, w)
    let mut est: u128 = 1;
    for k in 0..weight {
        est = est.saturating_mul(atoms.len() as u128 + k as u128) / (k as u128 + 1);
        if est > BRUTE_CAP {
            return Err(Error::budget(format!(
                "brute-force census over {} atoms at weight {weight} exceeds cap",
                atoms.len()
            )));
        }
    }
    let mut found: BTreeSet<Solution> = BTreeSet::new();
    let mut stack: Vec<(usize, u64)> = Vec::new(); // (atom index, multiplicity)
    rec_brute(
        set,
        &atoms,
        len,
        m,
        weight,
        0,
        0,
        &mut stack,
        irreducible_only,
        &mut found,
    )?;
    Ok(found.into_iter().collect())
}

#[allow(clippy::too_many_arguments)]
fn rec_brute(
    set: &ExponentSet,
    atoms: &[(u64, u32)],
    len: u32,
    m: u64,
    remaining: u64,
    start: usize,
    total: u128,
    stack: &mut Vec<(usize, u64)>,
    irreducible_only: bool,
    found: &mut BTreeSet<Solution>,
) -> Result<()> {
    let p = set.p;
    if remaining == 0 {
        if total > 0 && total % m as u128 == 0 {
            let mut pairs: BTreeMap<u64, u64> = BTreeMap::new();
            for &(idx, mult) in stack.iter() {
                let (d, r) = atoms[idx];
                *pairs.entry(d).or_insert(0) += mult * pow_u64(p, r);
            }
            let sol = Solution::new(p, len, &pairs.into_iter().collect::<Vec<_>>())?;
            if !irreducible_only || is_irreducible(set, &sol)? {
                found.insert(sol.canonical());
            }
        }
        return Ok(());
    }
    for idx in start..atoms.len() {
        let (d, r) = atoms[idx];
        let step = d as u128 * pow_u64(p, r) as u128;
        let max_mult = (p - 1).min(remaining);
        let mut t = total;
        for mult in 1..=max_mult {
            t += step;
            stack.push((idx, mult));
            rec_brute(
                set,
                atoms,
                len,
                m,
                remaining - mult,
                idx + 1,
                t,
                stack,
                irreducible_only,
                found,
            )?;
            stack.pop();
        }
    }
    Ok(())
}

// --- closed-form generators for minimal irreducible solutions ---

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Family {
    /// d = p^{n+1} − 2, n ≥ 1
    TopMinusTwo { n: u32 },
    /// d = p^{n+1} − p − 1, n ≥ 2
    TopMinusPMinusOne { n: u32 },
    /// d = p² − p − 1
    QuadMinusPMinusOne,
    /// d = i(p^n − 1), 1 ≤ i ≤ p − 1
    Geometric { n: u32, i: u64 },
}

fn detect_family(p: u64, d: u64) -> Option<Family> {
    for n in 1..40 {
        let pw = (p as u128).pow(n + 1);
        if pw > d as u128 + p as u128 + 1 {
            break;
        }
        if d as u128 == pw - 2 {
            return Some(Family::TopMinusTwo { n });
        }
        if n >= 2 && d as u128 == pw - p as u128 - 1 {
            return Some(Family::TopMinusPMinusOne { n });
        }
    }
    if d == p * p - p - 1 {
        return Some(Family::QuadMinusPMinusOne);
    }
    for n in 1..40 {
        let base = (p as u128).pow(n) - 1;
        if base > d as u128 {
            break;
        }
        if d as u128 % base == 0 {
            let i = (d as u128 / base) as u64;
            if i >= 1 && i <= p - 1 {
                return Some(Family::Geometric { n, i });
            }
        }
    }
    None
}

/// Emits the minimal irreducible solutions (up to shift) for the implemented
/// degree families; every emitted solution is checked against
/// [`verify_solution`], [`is_irreducible`] and [`density_closed_form`].
pub fn enumerate_minimal_closed(p: u64, d: u64) -> Result<Vec<Solution>> {
    if !is_prime(p) || p == 2 {
        return Err(Error::domain(format!("p = {p} must be an odd prime")));
    }
    let family = detect_family(p, d).ok_or_else(|| {
        Error::domain(format!(
            "(p, d) = ({p}, {d}) is not in an implemented closed-form family"
        ))
    })?;
    let mut out: BTreeSet<Solution> = BTreeSet::new();
    match family {
        Family::TopMinusTwo { n } => {
            // weight-2 classes of length 2n+1: u_{p^{n+1}-i} = p^n, u_{ip^n-1} = 1.
            // The i = 1 tuple would use the index p^{n+1}-1 > d, so i starts at 2.
            for i in 2..=p - 1 {
                let sol = Solution::new(
                    p,
                    2 * n + 1,
                    &[
                        (pow_u64(p, n + 1) - i, pow_u64(p, n)),
                        (i * pow_u64(p, n) - 1, 1),
                    ],
                )?;
                out.insert(sol.canonical());
            }
        }
        Family::TopMinusPMinusOne { n } => {
            let vals: Vec<u64> = (1..=p - 1).collect();
            cycles_into(p, n, &vals, &mut out)?;
            tail_type_into(p, n, &mut out)?;
        }
        Family::QuadMinusPMinusOne => {
            let vals: Vec<u64> = (1..=p - 1).collect();
            cycles_into(p, 1, &vals, &mut out)?;
            let mids: Vec<u64> = (2..=p - 1).collect();
            pair_type_into(p, d, &mids, &mut out)?;
            double_pair_type_into(p, &mut out)?;
        }
        Family::Geometric { n, i } => {
            let vals: Vec<u64> = (1..i).collect();
            if !vals.is_empty() {
                cycles_into(p, n, &vals, &mut out)?;
            }
            // the solitary class 1 · i(p^n − 1)
            out.insert(Solution::new(p, n, &[(d, 1)])?.canonical());
            if n == 1 && i >= (p + 1) / 2 {
                let mids: Vec<u64> = (2..i).collect();
                pair_type_into(p, d, &mids, &mut out)?;
            }
        }
    }
    let set = ExponentSet::interval(p, d)?;
    let delta = density_closed_form(p, d)?;
    for sol in &out {
        if !verify_solution(&set, sol) {
            return Err(Error::internal(format!("generated non-solution {sol:?}")));
        }
        if !is_irreducible(&set, sol)? {
            return Err(Error::internal(format!("generated reducible {sol:?}")));
        }
        if sol.density() != delta {
            return Err(Error::internal(format!("generated non-minimal {sol:?}")));
        }
    }
    Ok(out.into_iter().collect())
}

/// Cyclic-support solutions Σ_k p^{nk}·(n_{k+1}p^n − n_k) over pairwise
/// distinct values from `vals`, the minimum placed first.
fn cycles_into(p: u64, n: u32, vals: &[u64], out: &mut BTreeSet<Solution>) -> Result<()> {
    for w in 1..=vals.len() {
        let mut chosen = Vec::with_capacity(w);
        let mut used = vec![false; vals.len()];
        cycles_rec(p, n, vals, w, &mut chosen, &mut used, out)?;
    }
    Ok(())
}

fn cycles_rec(
    p: u64,
    n: u32,
    vals: &[u64],
    w: usize,
    chosen: &mut Vec<u64>,
    used: &mut Vec<bool>,
    out: &mut BTreeSet<Solution>,
) -> Result<()> {
    if chosen.len() == w {
        if chosen[0] != *chosen.iter().min().unwrap() {
            return Ok(());
        }
        let mut pairs: BTreeMap<u64, u64> = BTreeMap::new();
        for k in 0..w {
            let a = chosen[k];
            let b = chosen[(k + 1) % w];
            let idx = b * pow_u64(p, n) - a;
            *pairs.entry(idx).or_insert(0) += pow_u64(p, n * k as u32);
        }
        let sol = Solution::new(p, n * w as u32, &pairs.into_iter().collect::<Vec<_>>())?;
        out.insert(sol.canonical());
        return Ok(());
    }
    for (i, &v) in vals.iter().enumerate() {
        if used[i] {
            continue;
        }
        used[i] = true;
        chosen.push(v);
        cycles_rec(p, n, vals, w, chosen, used, out)?;
        chosen.pop();
        used[i] = false;
    }
    Ok(())
}

/// The tail family for d = p^{n+1} − p − 1, n ≥ 2: a chain through the
/// support point p^n with final value n_{w-1} ∈ [p+1, p²−1] prime to p.
fn tail_type_into(p: u64, n: u32, out: &mut BTreeSet<Solution>) -> Result<()> {
    let mids: Vec<u64> = (2..=p - 1).collect();
    for w in 2..=p as usize {
        let mut chain = vec![1u64];
        let mut used = vec![false; mids.len()];
        tail_rec(p, n, &mids, w, &mut chain, &mut used, out)?;
    }
    Ok(())
}

fn tail_rec(
    p: u64,
    n: u32,
    mids: &[u64],
    w: usize,
    chain: &mut Vec<u64>,
    used: &mut Vec<bool>,
    out: &mut BTreeSet<Solution>,
) -> Result<()> {
    if chain.len() == w - 1 {
        // chain = (n_0 = 1, n_1, ..., n_{w-2}); pick n_{w-1} in [p+1, p²−1]
        for tail in p + 1..=p * p - 1 {
            if tail % p == 0 {
                continue;
            }
            let mut pairs: BTreeMap<u64, u64> = BTreeMap::new();
            for k in 0..w - 2 {
                let idx = chain[k + 1] * pow_u64(p, n) - chain[k];
                *pairs.entry(idx).or_insert(0) += pow_u64(p, n * k as u32);
            }
            let idx1 = tail * pow_u64(p, n - 1) - chain[w - 2];
            *pairs.entry(idx1).or_insert(0) += pow_u64(p, n * (w as u32 - 2));
            let idx2 = pow_u64(p, n + 1) - tail;
            *pairs.entry(idx2).or_insert(0) += pow_u64(p, n * (w as u32 - 1) - 1);
            let sol = Solution::new(p, n * w as u32, &pairs.into_iter().collect::<Vec<_>>())?;
            out.insert(sol.canonical());
        }
        return Ok(());
    }
    for (i, &v) in mids.iter().enumerate() {
        if used[i] {
            continue;
        }
        used[i] = true;
        chain.push(v);
        tail_rec(p, n, mids, w, chain, used, out)?;
        chain.pop();
        used[i] = false;
    }
    Ok(())
}

/// The pair family (length = weight): support (1, p, n_2, ..., n_{ℓ-1}) with
/// a two-term jump x + y = p² − n_2 out of the point p, middle values drawn
/// from `mids`, and every index at most `d`.
fn pair_type_into(p: u64, d: u64, mids: &[u64], out: &mut BTreeSet<Solution>) -> Result<()> {
    for l in 2..=(2 + mids.len()) {
        let mut middle = Vec::new();
        let mut used = vec![false; mids.len()];
        pair_rec(p, d, mids, l as u32, &mut middle, &mut used, out)?;
    }
    Ok(())
}

fn pair_rec(
    p: u64,
    d: u64,
    mids: &[u64],
    l: u32,
    middle: &mut Vec<u64>,
    used: &mut Vec<bool>,
    out: &mut BTreeSet<Solution>,
) -> Result<()> {
    if middle.len() == l as usize - 2 {
        // support (1, p, n_2, ..., n_{l-1}), n_l = 1
        let n2 = middle.first().copied().unwrap_or(1);
        let target = p * p - n2;
        let lo = target.saturating_sub(d).max(1);
        for x in lo..=target / 2 {
            let y = target - x;
            if x % p == 0 || y % p == 0 || x > d || y > d {
                continue;
            }
            let mut pairs: BTreeMap<u64, u64> = BTreeMap::new();
            *pairs.entry(x).or_insert(0) += pow_u64(p, l - 2);
            *pairs.entry(y).or_insert(0) += pow_u64(p, l - 2);
            let mut ok = true;
            for k in 0..middle.len() {
                let from = middle[k];
                let to = if k + 1 < middle.len() { middle[k + 1] } else { 1 };
                let idx = p * from - to;
                if idx > d || idx % p == 0 {
                    ok = false;
                    break;
                }
                *pairs.entry(idx).or_insert(0) += pow_u64(p, l - 1 - (k as u32 + 2));
            }
            if !ok {
                continue;
            }
            let sol = Solution::new(p, l, &pairs.into_iter().collect::<Vec<_>>())?;
            out.insert(sol.canonical());
        }
        return Ok(());
    }
    for (i, &v) in mids.iter().enumerate() {
        if used[i] {
            continue;
        }
        used[i] = true;
        middle.push(v);
        pair_rec(p, d, mids, l, middle, used, out)?;
        middle.pop();
        used[i] = false;
    }
    Ok(())
}

/// The high-support family for d = p² − p − 1: support (1, p, n_2, ...) with
/// n_2 ∈ [p+1, 2p−2] and a two-term jump out of n_2.
fn double_pair_type_into(p: u64, out: &mut BTreeSet<Solution>) -> Result<()> {
    let d = p * p - p - 1;
    // length 3: n_2 strictly below 2p−2
    for n2 in p + 1..2 * p - 2 {
        if n2 % p == 0 {
            continue;
        }
        let target = p * n2 - 1;
        emit_double_pair(p, d, n2, target, 3, &[], out)?;
    }
    // length >= 4: n_2 up to 2p−2, middles from {2..p−1}, n_l = 1
    let mids: Vec<u64> = (2..=p - 1).collect();
    for l in 4..=(3 + mids.len()) as u32 {
        for n2 in p + 1..=2 * p - 2 {
            if n2 % p == 0 {
                continue;
            }
            let mut middle = Vec::new();
            let mut used = vec![false; mids.len()];
            double_pair_rec(p, d, n2, &mids, l, &mut middle, &mut used, out)?;
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn double_pair_rec(
    p: u64,
    d: u64,
    n2: u64,
    mids: &[u64],
    l: u32,
    middle: &mut Vec<u64>,
    used: &mut Vec<bool>,
    out: &mut BTreeSet<Solution>,
) -> Result<()> {
    if middle.len() == l as usize - 3 {
        let n3 = middle.first().copied().unwrap_or(1);
        let target = p * n2 - n3;
        emit_double_pair(p, d, n2, target, l, middle, out)?;
        return Ok(());
    }
    for (i, &v) in mids.iter().enumerate() {
        if used[i] {
            continue;
        }
        used[i] = true;
        middle.push(v);
        double_pair_rec(p, d, n2, mids, l, middle, used, out)?;
        middle.pop();
        used[i] = false;
    }
    Ok(())
}

fn emit_double_pair(
    p: u64,
    d: u64,
    n2: u64,
    target: u64,
    l: u32,
    middle: &[u64],
    out: &mut BTreeSet<Solution>,
) -> Result<()> {
    let lo = target.saturating_sub(d).max(1);
    for d1 in lo..=target / 2 {
        let d2 = target - d1;
        if d1 % p == 0 || d2 % p == 0 || d1 > d || d2 > d {
            continue;
        }
        let mut pairs: BTreeMap<u64, u64> = BTreeMap::new();
        *pairs.entry(p * p - n2).or_insert(0) += pow_u64(p, l - 2);
        *pairs.entry(d1).or_insert(0) += pow_u64(p, l - 3);
        *pairs.entry(d2).or_insert(0) += pow_u64(p, l - 3);
        let mut ok = true;
        for k in 0..middle.len() {
            let from = middle[k];
            let to = if k + 1 < middle.len() { middle[k + 1] } else { 1 };
            let idx = p * from - to;
            if idx > d || idx % p == 0 {
                ok = false;
                break;
            }
            *pairs.entry(idx).or_insert(0) += pow_u64(p, l - 1 - (k as u32 + 3));
        }
        if !ok {
            continue;
        }
        let sol = Solution::new(p, l, &pairs.into_iter().collect::<Vec<_>>())?;
        out.insert(sol.canonical());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval(p: u64, d: u64) -> ExponentSet {
        ExponentSet::interval(p, d).unwrap()
    }

    fn sol(p: u64, l: u32, pairs: &[(u64, u64)]) -> Solution {
        Solution::new(p, l, pairs).unwrap()
    }

    /// Exhaustive σ oracle over all coordinate vectors (tiny cases only).
    fn sigma_oracle(set: &ExponentSet, len: u32) -> u64 {
        let p = set.p();
        let m = pow_u64(p, len) - 1;
        let ds: Vec<u64> = set.elems().iter().copied().collect();
        let span = (m + 1).pow(ds.len() as u32);
        let mut best = u64::MAX;
        for code in 0..span {
            let mut c = code;
            let mut total: u128 = 0;
            let mut weight = 0u64;
            for &d in &ds {
                let v = c % (m + 1);
                c /= m + 1;
                total += d as u128 * v as u128;
                weight += digit_sum(p, v);
            }
            if total > 0 && total % m as u128 == 0 {
                best = best.min(weight);
            }
        }
        best
    }

    #[test]
    fn verify_examples() {
        let e = interval(3, 7);
        assert!(verify_solution(&e, &sol(3, 3, &[(7, 3), (5, 1)])));
        assert!(!verify_solution(&e, &sol(3, 3, &[])));
        let e1 = ExponentSet::new(3, [1u64].into_iter().collect()).unwrap();
        assert!(verify_solution(&e1, &sol(3, 1, &[(1, 2)])));
    }

    #[test]
    fn shift_examples() {
        assert_eq!(shift_digits(3, 3, 3), 9);
        assert_eq!(shift_digits(3, 2, 8), 8);
        let e = interval(3, 7);
        let s = sol(3, 3, &[(7, 3), (5, 1)]);
        let mut t = s.clone();
        for _ in 0..3 {
            t = t.shift();
            assert!(verify_solution(&e, &t));
            assert_eq!(t.weight(), s.weight());
            assert_eq!(t.density(), s.density());
            assert_eq!(
                is_irreducible(&e, &t).unwrap(),
                is_irreducible(&e, &s).unwrap()
            );
        }
        assert_eq!(t, s);
    }

    #[test]
    fn support_examples() {
        let e = interval(3, 7);
        let s = sol(3, 3, &[(7, 3), (5, 1)]);
        let sup = support_map(&e, &s).unwrap();
        assert_eq!(sup.values, vec![1, 3, 2]);
        let jumps: BTreeSet<u64> = sup.jumps.iter().map(|&(_, j)| j).collect();
        assert_eq!(jumps, [5u64, 7].into_iter().collect());
        assert!(sup.irreducible);

        let e1 = ExponentSet::new(3, [1u64].into_iter().collect()).unwrap();
        let s1 = sol(3, 1, &[(1, 2)]);
        let sup1 = support_map(&e1, &s1).unwrap();
        assert_eq!(sup1.values, vec![1]);
        assert_eq!(sup1.jumps, vec![(0, 2)]);

        // telescoped identity: Σ (p−1)·φ = Σ_d d·s_p(u_d)
        let lhs: u64 = 2 * sup.total();
        let rhs: u64 = s
            .coords()
            .iter()
            .map(|(&d, &v)| d * digit_sum(3, v))
            .sum();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn irreducibility_examples() {
        let e = interval(3, 7);
        assert!(is_irreducible(&e, &sol(3, 3, &[(7, 3), (5, 1)])).unwrap());
        let e1 = ExponentSet::new(3, [1u64].into_iter().collect()).unwrap();
        assert!(is_irreducible(&e1, &sol(3, 1, &[(1, 2)])).unwrap());
        // concatenation doubles the period: reducible
        let cat = sol(3, 6, &[(7, 3 + 81), (5, 1 + 27)]);
        assert!(verify_solution(&e, &cat));
        assert!(!is_irreducible(&e, &cat).unwrap());
    }

    #[test]
    fn sigma_examples_and_oracle() {
        let e12 = ExponentSet::new(3, [1u64, 2].into_iter().collect()).unwrap();
        assert_eq!(sigma_min_weight(&e12, 1).unwrap(), 1);
        assert_eq!(sigma_oracle(&e12, 1), 1);
        assert_eq!(sigma_min_weight(&e12, 2).unwrap(), sigma_oracle(&e12, 2));

        assert_eq!(sigma_min_weight(&interval(3, 7), 3).unwrap(), 2);
        // D = {1}: u_1 = p − 1 forced at length 1
        for p in [3u64, 5, 7] {
            let e1 = ExponentSet::new(p, [1u64].into_iter().collect()).unwrap();
            assert_eq!(sigma_min_weight(&e1, 1).unwrap(), p - 1);
        }
        // cross-check a few more small windows against the exhaustive oracle
        let e = interval(3, 5);
        for l in 1..=2 {
            assert_eq!(sigma_min_weight(&e, l).unwrap(), sigma_oracle(&e, l));
        }
        let e54 = interval(5, 4);
        assert_eq!(sigma_min_weight(&e54, 1).unwrap(), sigma_oracle(&e54, 1));
    }

    #[test]
    fn density_closed_form_examples() {
        assert_eq!(density_closed_form(3, 7).unwrap(), Rat::new(1, 3));
        assert_eq!(density_closed_form(5, 24).unwrap(), Rat::new(1, 8));
        assert_eq!(density_closed_form(5, 2).unwrap(), Rat::new(1, 2));
        assert_eq!(density_closed_form(3, 8).unwrap(), Rat::new(1, 4));
        assert_eq!(density_closed_form(3, 25).unwrap(), Rat::new(1, 5));
        assert!(density_closed_form(3, 6).is_err());
        assert!(density_closed_form(3, 1).is_err());
        assert!(density_closed_form(5, 1).is_err());
    }

    #[test]
    fn density_bruteforce_examples() {
        let (d1, l1) = density_bruteforce(&interval(3, 7), 5).unwrap();
        assert_eq!((d1, l1), (Rat::new(1, 3), 3));
        let e12 = ExponentSet::new(3, [1u64, 2].into_iter().collect()).unwrap();
        assert_eq!(density_bruteforce(&e12, 3).unwrap(), (Rat::new(1, 2), 1));
        let e12_5 = ExponentSet::new(5, [1u64, 2].into_iter().collect()).unwrap();
        let (d5, l5) = density_bruteforce(&e12_5, 3).unwrap();
        assert_eq!((d5, l5), (Rat::new(1, 2), 1));
        assert_eq!(d5, density_closed_form(5, 2).unwrap());
    }

    #[test]
    fn c_sequence_examples() {
        assert_eq!(c_sequence(3, 2, 6).unwrap(), vec![1, 2, 3, 6, 9, 18]);
        assert_eq!(c_sequence(5, 1, 4).unwrap(), vec![1, 5, 25, 125]);
        for p in [3u64, 5, 7] {
            for s in 1..=6u64 {
                let c = c_sequence(p, s, 12).unwrap();
                for n in 1..=s.min(12) {
                    assert_eq!(c[n as usize - 1], n);
                }
                // c_n >= p^q r with n = qs + r, 1 <= r <= s
                for (k, &cn) in c.iter().enumerate() {
                    let n = k as u64 + 1;
                    let q = (n - 1) / s;
                    let r = n - q * s;
                    assert!(cn >= pow_u64(p, q as u32) * r);
                }
            }
        }
    }

    #[test]
    fn support_weight_bound_examples() {
        assert_eq!(support_weight_lower_bound(3, 3, 2).unwrap(), 6);
        assert_eq!(support_weight_lower_bound(3, 1, 1).unwrap(), 1);
        let b = support_weight_lower_bound(3, 4, 2).unwrap();
        assert_eq!(b, 12);
        let c: u64 = c_sequence(3, 2, 4).unwrap().iter().sum();
        assert_eq!(b, c);
    }

    #[test]
    fn closed_enumeration_examples() {
        // (3,7): the single weight-2 class u_7 = 3, u_5 = 1 of length 3
        let sols = enumerate_minimal_closed(3, 7).unwrap();
        assert_eq!(sols.len(), 1);
        assert_eq!(sols[0], sol(3, 3, &[(7, 3), (5, 1)]).canonical());

        // (3,8) = 1·(3²−1): the lone weight-1 class u_8 = 1 of length 2
        let sols = enumerate_minimal_closed(3, 8).unwrap();
        assert_eq!(sols.len(), 1);
        assert_eq!(sols[0], sol(3, 2, &[(8, 1)]).canonical());

        // (5,19) = 5²−5−1 contains the four weight-1 classes u_{4k} = 1
        let sols = enumerate_minimal_closed(5, 19).unwrap();
        for k in 1..=4u64 {
            let s = sol(5, 1, &[(4 * k, 1)]);
            assert!(sols.contains(&s.canonical()), "missing u_{{{}}}", 4 * k);
        }
    }

    #[test]
    fn brute_examples() {
        let e12 = ExponentSet::new(3, [1u64, 2].into_iter().collect()).unwrap();
        let found = enumerate_minimal_brute(&e12, 1, 1, false).unwrap();
        assert_eq!(found, vec![sol(3, 1, &[(2, 1)])]);
        assert!(enumerate_minimal_brute(&e12, 2, 0, false)
            .unwrap()
            .is_empty());
    }

    /// Census comparisons: the closed-form generator sliced at (ℓ, w) must
    /// reproduce the exhaustive irreducible enumeration exactly.
    fn census(p: u64, d: u64, slices: &[(u32, u64)]) {
        let set = interval(p, d);
        let closed = enumerate_minimal_closed(p, d).unwrap();
        for &(l, w) in slices {
            let want: BTreeSet<Solution> = closed
                .iter()
                .filter(|s| s.len() == l && s.weight() == w)
                .cloned()
                .collect();
            let got: BTreeSet<Solution> = enumerate_minimal_brute(&set, l, w, true)
                .unwrap()
                .into_iter()
                .filter(|s| s.density() == density_closed_form(p, d).unwrap())
                .collect();
            assert_eq!(want, got, "census mismatch at (p,d,l,w)=({p},{d},{l},{w})");
        }
    }

    #[test]
    fn census_small_interval_sets() {
        census(3, 4, &[(1, 1), (2, 2)]);
        census(3, 5, &[(1, 1), (2, 2), (3, 3), (4, 4)]);
        census(3, 7, &[(3, 2)]);
        census(3, 8, &[(2, 1)]);
    }

    #[test]
    fn census_deeper_families() {
        // d = 23 = 3³ − 3 − 1: weight-1 and weight-2 slices of the n = 2 family
        census(3, 23, &[(2, 1), (4, 2)]);
        // d = 19 = 5² − 5 − 1: every weight of the family (lengths 1..5)
        census(5, 19, &[(1, 1), (2, 2), (3, 3), (4, 4), (5, 5)]);
    }

    #[test]
    fn no_minimal_irreducibles_beyond_family_weights() {
        // weight-2 classes exhaust d = 3² − 2 (all minimal irreducible
        // solutions have length 2n+1), and weights stop at p for the
        // d = 3³ − 3 − 1 family: the next slices up must come back empty
        for (d, l, w) in [(7u64, 6u32, 4u64), (23, 8, 4)] {
            let set = interval(3, d);
            let delta = density_closed_form(3, d).unwrap();
            let extra: Vec<Solution> = enumerate_minimal_brute(&set, l, w, true)
                .unwrap()
                .into_iter()
                .filter(|s| s.density() == delta)
                .collect();
            assert!(extra.is_empty(), "unexpected minimal classes at ({l},{w}): {extra:?}");
        }
    }

    #[test]
    fn high_support_boundary_is_empty() {
        // For length 3 the support (1, p, 2p−2) would need a two-element jump
        // p(2p−2) − 1 > 2·max D, so no minimal irreducible solution lives
        // there; the exhaustive census at (3,3) agrees with the generator
        // which excludes the boundary value.
        for p in [3u64, 5] {
            let d = p * p - p - 1;
            census(p, d, &[(3, 3)]);
        }
    }

    #[test]
    fn enumerated_solutions_satisfy_structure() {
        for (p, d) in [(3u64, 5u64), (3, 7), (3, 8), (3, 23), (5, 19), (5, 23)] {
            let set = interval(p, d);
            let sols = enumerate_minimal_closed(p, d).unwrap();
            assert!(!sols.is_empty());
            for s in &sols {
                let sup = support_map(&set, s).unwrap();
                let w = s.weight();
                // weight decomposes over digit positions
                let by_pos: u64 = (0..s.len()).map(|r| s.weight_at(r)).sum();
                assert_eq!(w, by_pos);
                // digitwise jump equation: Σ_d d·u_{d,r} = p·φ(ℓ−r−1) − φ(ℓ−r)
                let l = s.len() as usize;
                for r in 0..l {
                    let lhs: u64 = s
                        .coords()
                        .keys()
                        .map(|&dd| dd * s.digit(dd, r as u32))
                        .sum();
                    let a = sup.values[(2 * l - 1 - r) % l];
                    let b = sup.values[(2 * l - r) % l];
                    assert_eq!(lhs, p * a - b);
                    // per-position weights bound the jumps
                    assert!(lhs <= s.weight_at(r as u32) * set.max());
                }
                // every support value is at most (max jump)/(p−1), and with
                // s jumps also at most (w−s+1)·max D/(p−1)
                let max_jump = sup.jumps.iter().map(|&(_, j)| j).max().unwrap();
                let s_cnt = sup.jumps.len() as u64;
                for &v in &sup.values {
                    assert!(v * (p - 1) <= max_jump);
                    assert!(v * (p - 1) <= (w - s_cnt + 1) * set.max());
                }
                // with exactly w jumps, all jumps are in D and the support
                // determines the solution
                if sup.jumps.len() as u64 == w {
                    for &(_, j) in &sup.jumps {
                        assert!(set.contains(j));
                    }
                    let back = solution_from_support(&set, &sup).unwrap();
                    assert_eq!(back.canonical(), s.canonical());
                }
                // support total respects the c-sequence bound
                let s_jumps = sup.jumps.len() as u32;
                let bound = support_weight_lower_bound(p, s.len(), s_jumps.min(w as u32)).unwrap();
                assert!(sup.total() >= bound);
            }
        }
    }

    #[test]
    fn sigma_matches_ceiling_formula() {
        // σ(ℓ) = ⌈ℓ(p−1)δ⌉ on the tested interval sets
        for (p, d) in [(3u64, 5u64), (3, 7), (3, 8)] {
            let set = interval(p, d);
            let delta = density_closed_form(p, d).unwrap();
            for l in 1..=5u32 {
                let sigma = sigma_min_weight(&set, l).unwrap();
                let want = (Rat::from_integer((l as u64 * (p - 1)) as i64) * delta).ceil();
                assert_eq!(Rat::from_integer(sigma as i64), want, "p={p} d={d} l={l}");
            }
        }
    }

    #[test]
    fn solution_json_roundtrip() {
        let s = sol(3, 3, &[(7, 3), (5, 1)]);
        let js = serde_json::to_string(&s).unwrap();
        assert!(js.contains("\"l\":3"));
        let back: Solution = serde_json::from_str(&js).unwrap();
        assert_eq!(back, s);
    }
}
