//! Character sums, L-polynomials and Newton polygons of the curves
//! y^p − y = f(x).
//!
//! For f over k = F_{p^m} the sums S_r(f) = Σ_{x ∈ F_{p^{mr}}} ψ(Tr f(x))
//! (ψ the additive character x ↦ ζ_p^x on F_p, composed with the absolute
//! trace) determine L(f,T) = exp(Σ S_r T^r / r), a polynomial of degree
//! d − 1 over Z\[ζ_p\]. Its q-adic Newton polygon dilated by p − 1 is the
//! Newton polygon of the numerator of the zeta function of the curve, a
//! symmetric polygon from (0,0) to (2g, g) with 2g = (p−1)(d−1).

use crate::cyclotomic::{CycInt, Valuation};
use crate::error::{Error, Result};
use crate::ff::{FieldCtx, FieldElement};
use crate::Rat;
use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

/// Enumeration budget: the maximum number of points a single character sum
/// may range over (p^{mr} per S_r).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Budget {
    pub max_points: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_points: 5_000_000,
        }
    }
}

impl Budget {
    pub fn new(max_points: u64) -> Self {
        Budget { max_points }
    }

    fn check(&self, points: u128) -> Result<()> {
        if points > self.max_points as u128 {
            Err(Error::budget(format!(
                "enumeration needs {points} points, budget is {}; rerun with a budget of at least {points}",
                self.max_points
            )))
        } else {
            Ok(())
        }
    }
}

/// A polynomial f = Σ c_i x^i, i ≥ 1, defining the curve y^p − y = f(x).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ASPolynomial {
    ctx: FieldCtx,
    coeffs: BTreeMap<u64, FieldElement>,
}

impl ASPolynomial {
    pub fn new(ctx: &FieldCtx, pairs: Vec<(u64, FieldElement)>) -> Result<ASPolynomial> {
        let mut coeffs = BTreeMap::new();
        for (i, c) in pairs {
            if i == 0 {
                return Err(Error::domain("constant terms are not allowed"));
            }
            if c.is_zero() {
                continue;
            }
            if !c.ctx().same_field(ctx) {
                return Err(Error::domain("coefficient from a different field"));
            }
            let slot = coeffs.entry(i).or_insert_with(|| ctx.zero());
            *slot = slot.add(&c);
        }
        coeffs.retain(|_, c| !c.is_zero());
        if coeffs.is_empty() {
            return Err(Error::domain("polynomial must be nonzero"));
        }
        Ok(ASPolynomial {
            ctx: ctx.clone(),
            coeffs,
        })
    }

    pub fn ctx(&self) -> &FieldCtx {
        &self.ctx
    }

    pub fn coeffs(&self) -> &BTreeMap<u64, FieldElement> {
        &self.coeffs
    }

    pub fn degree(&self) -> u64 {
        *self.coeffs.keys().next_back().unwrap()
    }

    /// Coefficient of x^i (zero when absent).
    pub fn coeff(&self, i: u64) -> FieldElement {
        self.coeffs
            .get(&i)
            .cloned()
            .unwrap_or_else(|| self.ctx.zero())
    }

    pub fn is_reduced(&self) -> bool {
        let p = self.ctx.p();
        self.coeffs.keys().all(|&i| i % p != 0)
    }

    /// Removes every exponent divisible by p by replacing c·x^{pj} with
    /// c^{1/p}·x^j (the p-th root is c^{p^{m-1}}); the sums S_r are
    /// unchanged because Tr(a^p) = Tr(a). Errors if everything cancels:
    /// then f = g^p − g and the curve is rational.
    pub fn as_reduce(&self) -> Result<ASPolynomial> {
        let p = self.ctx.p();
        let m = self.ctx.degree();
        let mut coeffs = self.coeffs.clone();
        while let Some(&i) = coeffs.keys().find(|&&i| i % p == 0) {
            let c = coeffs.remove(&i).unwrap();
            let root = c.frobenius(m - 1); // c^{p^{m-1}} = c^{1/p}
            let slot = coeffs.entry(i / p).or_insert_with(|| self.ctx.zero());
            *slot = slot.add(&root);
            if slot.is_zero() {
                coeffs.remove(&(i / p));
            }
        }
        if coeffs.is_empty() {
            return Err(Error::domain(
                "polynomial reduces to zero: the curve is rational",
            ));
        }
        Ok(ASPolynomial {
            ctx: self.ctx.clone(),
            coeffs,
        })
    }

    /// Dense evaluation after embedding the coefficients into `top` via the
    /// supplied embedding of the base field.
    fn embedded_dense(&self, amb: &Ambient) -> Vec<FieldElement> {
        let deg = self.degree() as usize;
        let mut dense = vec![amb.top.zero(); deg + 1];
        for (&i, c) in &self.coeffs {
            dense[i as usize] = amb.embed(c);
        }
        dense
    }
}

/// F_{p^{mr}} together with the embedding of F_{p^m} that maps the base
/// generator to the first root of the base modulus in enumeration order.
pub struct Ambient {
    pub top: FieldCtx,
    base_powers: Vec<FieldElement>,
}

impl Ambient {
    fn build(p: u64, m: usize, r: usize, budget: Budget) -> Result<Ambient> {
        let points = (p as u128)
            .checked_pow((m * r) as u32)
            .ok_or_else(|| Error::budget("field size overflows"))?;
        budget.check(points)?;
        let top = FieldCtx::new(p, m * r)?;
        if m == 1 {
            return Ok(Ambient {
                top,
                base_powers: vec![],
            });
        }
        let base = FieldCtx::new(p, m)?;
        let modulus = base.modulus().to_vec();
        let mut root = None;
        for x in top.elements() {
            // Horner with scalar coefficients
            let mut acc = top.from_u64(modulus[m]);
            for j in (0..m).rev() {
                acc = acc.mul(&x).add(&top.from_u64(modulus[j]));
            }
            if acc.is_zero() {
                root = Some(x);
                break;
            }
        }
        let root = root.ok_or_else(|| {
            Error::internal(format!("no root of the degree-{m} modulus in F_{p}^{}", m * r))
        })?;
        let mut base_powers = Vec::with_capacity(m);
        let mut cur = top.one();
        for _ in 0..m {
            base_powers.push(cur.clone());
            cur = cur.mul(&root);
        }
        Ok(Ambient { top, base_powers })
    }

    /// Image of a base-field element.
    pub fn embed(&self, x: &FieldElement) -> FieldElement {
        if self.base_powers.is_empty() {
            return self.top.from_u64(x.coords()[0]);
        }
        let mut acc = self.top.zero();
        for (j, &a) in x.coords().iter().enumerate() {
            if a != 0 {
                acc = acc.add(&self.base_powers[j].scalar_mul(a));
            }
        }
        acc
    }
}

fn ambient_cache() -> &'static Mutex<HashMap<(u64, usize, usize), Arc<Ambient>>> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, usize, usize), Arc<Ambient>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Shared handle on F_{p^{mr}} with the base embedding (built once). The
/// budget is checked on every call: it bounds the enumeration the caller is
/// about to run, not just the construction cost.
pub fn ambient(p: u64, m: usize, r: usize, budget: Budget) -> Result<Arc<Ambient>> {
    let points = (p as u128)
        .checked_pow((m * r) as u32)
        .ok_or_else(|| Error::budget("field size overflows"))?;
    budget.check(points)?;
    if let Some(a) = ambient_cache().lock().unwrap().get(&(p, m, r)) {
        return Ok(a.clone());
    }
    let built = Arc::new(Ambient::build(p, m, r, budget)?);
    let mut guard = ambient_cache().lock().unwrap();
    Ok(guard.entry((p, m, r)).or_insert(built).clone())
}

/// S_r(f) = Σ_{x ∈ F_{p^{mr}}} ζ^{Tr f(x)} by direct enumeration.
pub fn exp_sum(f: &ASPolynomial, r: usize, budget: Budget) -> Result<CycInt> {
    if r == 0 {
        return Err(Error::domain("r must be >= 1"));
    }
    let p = f.ctx.p();
    let m = f.ctx.degree();
    let amb = ambient(p, m, r, budget)?;
    let dense = f.embedded_dense(&amb);
    let mut counts = vec![0i64; p as usize];
    for x in amb.top.elements() {
        let mut acc = dense.last().unwrap().clone();
        for c in dense[..dense.len() - 1].iter().rev() {
            acc = acc.mul(&x).add(c);
        }
        counts[acc.trace_to_prime() as usize] += 1;
    }
    CycInt::from_exponent_counts(p, &counts)
}

/// The L-polynomial 1 + b_1 T + ... + b_{d-1} T^{d-1} over Z\[ζ_p\].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LPolynomial {
    p: u64,
    m: usize,
    coeffs: Vec<CycInt>,
}

impl LPolynomial {
    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn base_degree(&self) -> usize {
        self.m
    }

    /// b_0 .. b_{d-1}.
    pub fn coeffs(&self) -> &[CycInt] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// The points (i, v_q(b_i)) feeding the Newton polygon.
    pub fn valuation_points(&self) -> Vec<(u64, Valuation)> {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, b)| (i as u64, b.vq(self.m)))
            .collect()
    }

    pub fn newton_polygon(&self) -> Result<NewtonPolygon> {
        let np = NewtonPolygon::from_valuations(&self.valuation_points())?;
        // polygons of L-polynomials have all slopes in [0, 1]
        if let Some((s, _)) = np.slope_segments().first() {
            if *s < Rat::new(0, 1) {
                return Err(Error::internal("negative slope in an L-polygon"));
            }
        }
        if let Some((s, _)) = np.slope_segments().last() {
            if *s > Rat::new(1, 1) {
                return Err(Error::internal("slope above 1 in an L-polygon"));
            }
        }
        Ok(np)
    }
}

/// Newton's identity i·b_i = Σ_{k=1..i} S_k b_{i-k}; the division by i is
/// exact in Z\[ζ_p\].
pub fn l_from_sums(p: u64, m: usize, degree: usize, sums: &[CycInt]) -> Result<LPolynomial> {
    if sums.len() < degree {
        return Err(Error::internal("not enough power sums"));
    }
    let mut coeffs = vec![CycInt::one(p)];
    for i in 1..=degree {
        let mut acc = CycInt::zero(p);
        for k in 1..=i {
            acc = acc.add(&sums[k - 1].mul(&coeffs[i - k]));
        }
        coeffs.push(acc.div_exact(i as u64)?);
    }
    if degree > 0 && coeffs[degree].is_zero() {
        return Err(Error::internal(
            "leading L-coefficient vanished; degree or sums are wrong",
        ));
    }
    Ok(LPolynomial { p, m, coeffs })
}

/// L(f, T) from the sums S_1 .. S_{d-1} (enumerated directly).
pub fn l_polynomial(f: &ASPolynomial, budget: Budget) -> Result<LPolynomial> {
    if !f.is_reduced() {
        return Err(Error::domain(
            "polynomial has exponents divisible by p; reduce it first",
        ));
    }
    let d = f.degree() as usize;
    let mut sums = Vec::with_capacity(d.saturating_sub(1));
    for r in 1..d {
        sums.push(exp_sum(f, r, budget)?);
    }
    l_from_sums(f.ctx.p(), f.ctx.degree(), d - 1, &sums)
}

/// The curve polygon from the L-polynomial polygon: dilation by p − 1.
pub fn np_of_curve(np_f: &NewtonPolygon, p: u64) -> NewtonPolygon {
    np_f.dilate(p - 1)
}

/// 2g = (p−1)(d−1) for gcd(d, p) = 1.
pub fn genus(p: u64, d: u64) -> Result<u64> {
    if d == 0 || d % p == 0 {
        return Err(Error::domain(format!("gcd(d, p) != 1 required, got d = {d}")));
    }
    Ok((p - 1) * (d - 1) / 2)
}

/// Lower convex hull of valuation points, exact rational ordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NewtonPolygon {
    vertices: Vec<(u64, Rat)>,
}

impl NewtonPolygon {
    /// Builds the hull. The first point must be (0, 0); +∞ ordinates are
    /// skipped; collinear interior points are merged into single segments.
    pub fn from_valuations(points: &[(u64, Valuation)]) -> Result<NewtonPolygon> {
        let finite: Vec<(u64, Rat)> = points
            .iter()
            .filter_map(|&(x, v)| v.finite().map(|y| (x, y)))
            .collect();
        if finite.is_empty() {
            return Err(Error::domain("no finite points"));
        }
        if finite[0] != (0, Rat::new(0, 1)) {
            return Err(Error::domain("polygon must start at (0, 0)"));
        }
        for w in finite.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(Error::domain("abscissas must be strictly increasing"));
            }
        }
        let mut hull: Vec<(u64, Rat)> = Vec::new();
        for &(x, y) in &finite {
            while hull.len() >= 2 {
                let (ox, oy) = hull[hull.len() - 2];
                let (ax, ay) = hull[hull.len() - 1];
                // z-component of (a-o) x (pt-o); pop when the middle point is
                // on or above the chord
                let cross = Rat::from_integer((ax - ox) as i64) * (y - oy)
                    - (ay - oy) * Rat::from_integer((x - ox) as i64);
                if cross <= Rat::new(0, 1) {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push((x, y));
        }
        Ok(NewtonPolygon { vertices: hull })
    }

    pub fn from_vertices(vertices: Vec<(u64, Rat)>) -> NewtonPolygon {
        NewtonPolygon { vertices }
    }

    pub fn vertices(&self) -> &[(u64, Rat)] {
        &self.vertices
    }

    /// First vertex after the origin, if any.
    pub fn first_vertex(&self) -> Option<(u64, Rat)> {
        self.vertices.get(1).copied()
    }

    pub fn end(&self) -> (u64, Rat) {
        *self.vertices.last().unwrap()
    }

    /// Dilation (x, y) ↦ (k·x, k·y); the curve polygon is the (p−1)-dilation
    /// of the L-polynomial polygon.
    pub fn dilate(&self, k: u64) -> NewtonPolygon {
        NewtonPolygon {
            vertices: self
                .vertices
                .iter()
                .map(|&(x, y)| (x * k, y * Rat::from_integer(k as i64)))
                .collect(),
        }
    }

    /// Piecewise-linear value at integer abscissa `x` (None outside range).
    pub fn y_at(&self, x: u64) -> Option<Rat> {
        if self.vertices.len() == 1 {
            return (x == self.vertices[0].0).then(|| self.vertices[0].1);
        }
        for w in self.vertices.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if x0 <= x && x <= x1 {
                let t = Rat::new((x - x0) as i64, (x1 - x0) as i64);
                return Some(y0 + (y1 - y0) * t);
            }
        }
        None
    }

    /// Segment slopes with their horizontal lengths (slopes strictly
    /// increase along the hull).
    pub fn slope_segments(&self) -> Vec<(Rat, u64)> {
        self.vertices
            .windows(2)
            .map(|w| {
                let ((x0, y0), (x1, y1)) = (w[0], w[1]);
                ((y1 - y0) / Rat::from_integer((x1 - x0) as i64), x1 - x0)
            })
            .collect()
    }

    /// Multiset of slopes, each repeated by its horizontal length.
    pub fn slope_multiset(&self) -> Vec<Rat> {
        let mut out = Vec::new();
        for (s, len) in self.slope_segments() {
            for _ in 0..len {
                out.push(s);
            }
        }
        out
    }

    pub fn first_slope(&self) -> Option<Rat> {
        self.slope_segments().first().map(|&(s, _)| s)
    }

    /// True iff the polygon is the single segment from (0,0) to (2g, g).
    /// Errors when the endpoint does not lie on y = x/2 (not a curve polygon).
    pub fn is_supersingular(&self) -> Result<bool> {
        if self.vertices.len() < 2 {
            return Err(Error::domain("degenerate polygon (genus 0)"));
        }
        let (x, y) = self.end();
        if y * Rat::from_integer(2) != Rat::from_integer(x as i64) {
            return Err(Error::domain(
                "polygon does not end at (2g, g); not a curve polygon",
            ));
        }
        Ok(self.vertices.len() == 2)
    }
}

// --- batched sums via trace tables ---

/// Per-point table of Tr(ω_s · x^i) values over F_{p^{mr}}, for ω_s the
/// embedded base basis: reduces each S_r to one small dot product per point.
pub struct SumTable {
    p: u64,
    lanes: usize,
    data: Vec<u8>,
}

impl SumTable {
    pub fn build(p: u64, m: usize, r: usize, d_max: u64, budget: Budget) -> Result<SumTable> {
        if p > 251 {
            return Err(Error::budget("trace tables require p < 256"));
        }
        let amb = ambient(p, m, r, budget)?;
        let top = &amb.top;
        let mr = top.degree();
        // TRS[s][j] = Tr(ω_s · t^j), so traces of ω_s · y are dot products.
        let omegas: Vec<FieldElement> = if m == 1 {
            vec![top.one()]
        } else {
            amb.base_powers.clone()
        };
        let mut trs = vec![vec![0u8; mr]; m];
        for (s, w) in omegas.iter().enumerate() {
            let mut tj = top.one();
            for j in 0..mr {
                trs[s][j] = w.mul(&tj).trace_to_prime() as u8;
                if j + 1 < mr {
                    tj = tj.mul(&top.gen());
                }
            }
        }
        let lanes = d_max as usize * m;
        let n = top.order();
        let mut data = vec![0u8; n as usize * lanes];
        for (idx, x) in top.elements().enumerate() {
            let row = &mut data[idx * lanes..(idx + 1) * lanes];
            let mut cur = top.one();
            for i in 0..d_max as usize {
                cur = cur.mul(&x);
                for (s, t) in trs.iter().enumerate() {
                    let mut acc = 0u64;
                    for (j, &c) in cur.coords().iter().enumerate() {
                        acc += c * t[j] as u64;
                    }
                    row[i * m + s] = (acc % p) as u8;
                }
            }
        }
        Ok(SumTable { p, lanes, data })
    }

    /// The lane vector of f: coordinates of c_i in the base field, laid out
    /// as lane i·m + s for exponent i+1 and basis index s.
    pub fn coeff_lanes(f: &ASPolynomial, d_max: u64) -> Vec<u8> {
        let m = f.ctx().degree();
        let mut lanes = vec![0u8; d_max as usize * m];
        for (&i, c) in f.coeffs() {
            for (s, &a) in c.coords().iter().enumerate() {
                lanes[(i as usize - 1) * m + s] = a as u8;
            }
        }
        lanes
    }

    pub fn exp_sum_lanes(&self, lanes: &[u8]) -> CycInt {
        debug_assert_eq!(lanes.len(), self.lanes);
        let p = self.p as u32;
        let mut counts = vec![0i64; self.p as usize];
        for row in self.data.chunks_exact(self.lanes) {
            let mut acc = 0u32;
            for (a, b) in lanes.iter().zip(row) {
                acc += *a as u32 * *b as u32;
            }
            counts[(acc % p) as usize] += 1;
        }
        CycInt::from_exponent_counts(self.p, &counts).expect("counts length is p")
    }
}

/// Precomputed tables for all the sums S_1 .. S_{d_max - 1} over one base
/// field; amortizes sweeps over many polynomials of bounded degree.
pub struct LfunEngine {
    p: u64,
    m: usize,
    d_max: u64,
    tables: Vec<SumTable>,
}

impl LfunEngine {
    pub fn new(p: u64, m: usize, d_max: u64, budget: Budget) -> Result<LfunEngine> {
        if d_max == 0 {
            return Err(Error::domain("d_max must be >= 1"));
        }
        let mut tables = Vec::new();
        for r in 1..d_max as usize {
            tables.push(SumTable::build(p, m, r, d_max, budget)?);
        }
        Ok(LfunEngine {
            p,
            m,
            d_max,
            tables,
        })
    }

    pub fn exp_sum(&self, f: &ASPolynomial, r: usize) -> Result<CycInt> {
        if r == 0 || r > self.tables.len() {
            return Err(Error::domain(format!("r = {r} outside the engine range")));
        }
        let lanes = SumTable::coeff_lanes(f, self.d_max);
        Ok(self.tables[r - 1].exp_sum_lanes(&lanes))
    }

    pub fn l_polynomial(&self, f: &ASPolynomial) -> Result<LPolynomial> {
        if !f.is_reduced() {
            return Err(Error::domain(
                "polynomial has exponents divisible by p; reduce it first",
            ));
        }
        let d = f.degree();
        if d > self.d_max {
            return Err(Error::domain(format!(
                "degree {d} exceeds engine bound {}",
                self.d_max
            )));
        }
        let lanes = SumTable::coeff_lanes(f, self.d_max);
        let sums: Vec<CycInt> = self.tables[..d as usize - 1]
            .iter()
            .map(|t| t.exp_sum_lanes(&lanes))
            .collect();
        l_from_sums(self.p, self.m, d as usize - 1, &sums)
    }
}

fn engine_cache() -> &'static Mutex<HashMap<(u64, usize, u64, u64), Arc<LfunEngine>>> {
    #[allow(clippy::type_complexity)]
    static CACHE: OnceLock<Mutex<HashMap<(u64, usize, u64, u64), Arc<LfunEngine>>>> =
        OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Shared engine for (p, m, d_max); built once per budget.
pub fn engine(p: u64, m: usize, d_max: u64, budget: Budget) -> Result<Arc<LfunEngine>> {
    let key = (p, m, d_max, budget.max_points);
    if let Some(e) = engine_cache().lock().unwrap().get(&key) {
        return Ok(e.clone());
    }
    let built = Arc::new(LfunEngine::new(p, m, d_max, budget)?);
    let mut guard = engine_cache().lock().unwrap();
    Ok(guard.entry(key).or_insert(built).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn f3() -> FieldCtx {
        FieldCtx::new(3, 1).unwrap()
    }

    fn poly(ctx: &FieldCtx, pairs: &[(u64, u64)]) -> ASPolynomial {
        ASPolynomial::new(
            ctx,
            pairs.iter().map(|&(i, c)| (i, ctx.from_u64(c))).collect(),
        )
        .unwrap()
    }

    #[test]
    fn as_reduce_examples() {
        let ctx = f3();
        // x^3 -> x
        let f = poly(&ctx, &[(3, 1)]);
        let red = f.as_reduce().unwrap();
        assert_eq!(red, poly(&ctx, &[(1, 1)]));
        // already reduced is a fixed point
        let g = poly(&ctx, &[(2, 1), (1, 2)]);
        assert_eq!(g.as_reduce().unwrap(), g);
        // x^6 + x -> x^2 + x, with S_1 preserved
        let h = poly(&ctx, &[(6, 1), (1, 1)]);
        let hr = h.as_reduce().unwrap();
        assert_eq!(hr, poly(&ctx, &[(2, 1), (1, 1)]));
        let b = Budget::default();
        assert_eq!(exp_sum(&h, 1, b).unwrap(), exp_sum(&hr, 1, b).unwrap());
        // x^3 - x reduces to zero: rational curve
        let z = poly(&ctx, &[(3, 1), (1, 2)]);
        assert!(z.as_reduce().is_err());
    }

    #[test]
    fn as_reduce_preserves_sums_randomly() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let b = Budget::default();
        for (p, m) in [(3u64, 1usize), (3, 2), (5, 1)] {
            let ctx = FieldCtx::new(p, m).unwrap();
            for _ in 0..10 {
                let pairs: Vec<(u64, FieldElement)> = (1..=6u64)
                    .map(|i| (i, ctx.element_from_index(rng.random_range(0..ctx.order()))))
                    .collect();
                let f = match ASPolynomial::new(&ctx, pairs) {
                    Ok(f) => f,
                    Err(_) => continue,
                };
                let red = match f.as_reduce() {
                    Ok(r) => r,
                    Err(_) => continue,
                };
                for r in 1..=3usize {
                    assert_eq!(exp_sum(&f, r, b).unwrap(), exp_sum(&red, r, b).unwrap());
                }
            }
        }
    }

    #[test]
    fn exp_sum_examples() {
        let ctx = f3();
        let b = Budget::default();
        // Σ ζ^x over F_3 vanishes
        assert!(exp_sum(&poly(&ctx, &[(1, 1)]), 1, b).unwrap().is_zero());
        // f = x^2: S_1 = 1 + 2ζ, S_2 = 3
        let f = poly(&ctx, &[(2, 1)]);
        let s1 = exp_sum(&f, 1, b).unwrap();
        assert_eq!(
            s1,
            CycInt::from_coords(3, vec![BigInt::from(1), BigInt::from(2)]).unwrap()
        );
        let s2 = exp_sum(&f, 2, b).unwrap();
        assert_eq!(s2, CycInt::from_int(3, 3));
        // |S_r|^2 = 3^r under every complex embedding
        assert_eq!(s1.mul(&s1.conj()), CycInt::from_int(3, 3));
        assert_eq!(s2.mul(&s2.conj()), CycInt::from_int(3, 9));
    }

    #[test]
    fn character_choice_permutes_coordinates() {
        // replacing ψ by ψ_a is the Galois map ζ -> ζ^a on the sums, which
        // leaves every valuation unchanged
        let ctx = f3();
        let b = Budget::default();
        let f = poly(&ctx, &[(2, 1), (1, 1)]);
        let s = exp_sum(&f, 1, b).unwrap();
        for a in 1..3u64 {
            // ψ_a(x) = ζ^{ax}: recompute with scaled polynomial a·f
            let fa = poly(&ctx, &[(2, a), (1, a)]);
            let sa = exp_sum(&fa, 1, b).unwrap();
            assert_eq!(sa, s.galois(a).unwrap());
            assert_eq!(sa.pi_valuation(), s.pi_valuation());
        }
    }

    #[test]
    fn l_polynomial_examples() {
        let ctx = f3();
        let b = Budget::default();
        // f = x^2 over F_3: L = 1 + (1 + 2ζ)T
        let f = poly(&ctx, &[(2, 1)]);
        let l = l_polynomial(&f, b).unwrap();
        assert_eq!(l.degree(), 1);
        assert_eq!(
            l.coeffs()[1],
            CycInt::from_coords(3, vec![BigInt::from(1), BigInt::from(2)]).unwrap()
        );
        // d = 1: L = 1
        let g = poly(&ctx, &[(1, 1)]);
        let lg = l_polynomial(&g, b).unwrap();
        assert_eq!(lg.degree(), 0);
        // degree-4 sample: endpoint ordinate (d-1)/2
        let h = poly(&ctx, &[(4, 1), (1, 1)]);
        let lh = l_polynomial(&h, b).unwrap();
        let np = lh.newton_polygon().unwrap();
        assert_eq!(np.end(), (3, Rat::new(3, 2)));
    }

    #[test]
    fn engine_matches_direct_enumeration() {
        let b = Budget::default();
        for (p, m, d) in [(3u64, 1usize, 5u64), (3, 2, 4), (5, 1, 4)] {
            let ctx = FieldCtx::new(p, m).unwrap();
            let eng = LfunEngine::new(p, m, d, b).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(d);
            for _ in 0..5 {
                let pairs: Vec<(u64, FieldElement)> = (1..=d)
                    .filter(|i| i % p != 0)
                    .map(|i| (i, ctx.element_from_index(rng.random_range(0..ctx.order()))))
                    .collect();
                let f = match ASPolynomial::new(&ctx, pairs) {
                    Ok(f) => f,
                    Err(_) => continue,
                };
                for r in 1..d as usize {
                    assert_eq!(
                        eng.exp_sum(&f, r).unwrap(),
                        exp_sum(&f, r, b).unwrap(),
                        "(p,m,d,r)=({p},{m},{d},{r})"
                    );
                }
            }
        }
    }

    #[test]
    fn newton_polygon_examples() {
        let fin = |x: u64, n: i64, d: i64| (x, Valuation::Finite(Rat::new(n, d)));
        // single slope 1/2
        let np = NewtonPolygon::from_valuations(&[fin(0, 0, 1), fin(1, 1, 2)]).unwrap();
        assert_eq!(np.vertices(), &[(0, Rat::new(0, 1)), (1, Rat::new(1, 2))]);
        // interior point on the chord is merged
        let np = NewtonPolygon::from_valuations(&[fin(0, 0, 1), fin(1, 1, 1), fin(2, 1, 1)])
            .unwrap();
        assert_eq!(np.vertices().len(), 2);
        assert_eq!(np.end(), (2, Rat::new(1, 1)));
        // convex chain is kept
        let np = NewtonPolygon::from_valuations(&[fin(0, 0, 1), fin(1, 1, 4), fin(2, 1, 1)])
            .unwrap();
        assert_eq!(np.vertices().len(), 3);
        assert_eq!(np.first_vertex(), Some((1, Rat::new(1, 4))));
        // infinite ordinates are skipped
        let np = NewtonPolygon::from_valuations(&[
            fin(0, 0, 1),
            (1, Valuation::Infinite),
            fin(2, 1, 1),
        ])
        .unwrap();
        assert_eq!(np.vertices().len(), 2);
    }

    #[test]
    fn dilation_and_genus() {
        let fin = |x: u64, n: i64, d: i64| (x, Valuation::Finite(Rat::new(n, d)));
        let np = NewtonPolygon::from_valuations(&[fin(0, 0, 1), fin(1, 1, 2)]).unwrap();
        let curve = np_of_curve(&np, 3);
        assert_eq!(curve.end(), (2, Rat::new(1, 1)));
        let np2 = NewtonPolygon::from_valuations(&[fin(0, 0, 1), fin(3, 1, 1)]).unwrap();
        assert_eq!(
            np_of_curve(&np2, 3).vertices(),
            &[(0, Rat::new(0, 1)), (6, Rat::new(2, 1))]
        );

        assert_eq!(genus(3, 2).unwrap(), 1);
        assert_eq!(genus(3, 8).unwrap(), 7);
        assert_eq!(genus(7, 5).unwrap(), 12);
        assert!(genus(3, 6).is_err());
    }

    #[test]
    fn supersingular_example() {
        let ctx = f3();
        let b = Budget::default();
        let f = poly(&ctx, &[(2, 1)]);
        let l = l_polynomial(&f, b).unwrap();
        let curve = l.newton_polygon().unwrap().dilate(2);
        assert_eq!(
            curve.vertices(),
            &[(0, Rat::new(0, 1)), (2, Rat::new(1, 1))]
        );
        assert!(curve.is_supersingular().unwrap());

        // a polygon with first slope 1/4 is not supersingular
        let fin = |x: u64, n: i64, d: i64| (x, Valuation::Finite(Rat::new(n, d)));
        let np = NewtonPolygon::from_valuations(&[fin(0, 0, 1), fin(4, 1, 1), fin(8, 4, 1)])
            .unwrap();
        assert!(!np.is_supersingular().unwrap());
        // degenerate polygon rejected
        let single = NewtonPolygon::from_valuations(&[fin(0, 0, 1)]).unwrap();
        assert!(single.is_supersingular().is_err());
    }

    #[test]
    fn budget_is_enforced() {
        let ctx = f3();
        let f = poly(&ctx, &[(2, 1)]);
        let tiny = Budget::new(2);
        match exp_sum(&f, 1, tiny) {
            Err(Error::Budget(_)) => {}
            other => panic!("expected budget error, got {other:?}"),
        }
    }
}
