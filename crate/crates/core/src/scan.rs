//! Reproducible parameter sweeps: full-coefficient scans over curve
//! families, first-vertex verification sweeps, tightness witness searches,
//! density tables and census comparisons.
//!
//! Every driver is deterministic given its parameters: field moduli are
//! fixed, curves are enumerated row-major little-endian in the coefficient
//! serialization, and the worker pool writes into indexed slots so reruns
//! produce byte-identical CSV output.

use crate::error::{Error, Result};
use crate::ff::FieldCtx;
use crate::hasse;
use crate::lfun::{self, ASPolynomial, Budget};
use crate::modeq::{self, ExponentSet, Solution};
use crate::Rat;
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;

/// Upper bound on enumerated curves per sweep.
const SWEEP_CAP: u128 = 50_000_000;

/// A sweep request, as driven by the CLI.
#[derive(Clone, Debug)]
pub struct ScanJob {
    pub kind: ScanKind,
    pub p: u64,
    pub d: u64,
    pub m: usize,
    pub budget: Budget,
    pub lmax: u32,
    pub workers: usize,
    pub support: Vec<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanKind {
    DensityTable,
    SolutionCensus,
    SupersingularScan,
    VertexScan,
    TightnessSearch,
}

impl ScanJob {
    /// Runs the job, streaming CSV rows to `out` (tightness searches produce
    /// no rows) and returning the JSON summary.
    pub fn run(&self, out: &mut dyn Write) -> Result<serde_json::Value> {
        match self.kind {
            ScanKind::SupersingularScan => {
                let s =
                    scan_supersingular(self.p, self.d, self.m, self.budget, self.workers, out)?;
                Ok(serde_json::to_value(&s).expect("serializable"))
            }
            ScanKind::VertexScan => {
                let s = scan_vertex(self.p, self.d, self.m, self.budget, self.workers, out)?;
                Ok(serde_json::to_value(&s).expect("serializable"))
            }
            ScanKind::TightnessSearch => {
                let r = tightness_search(self.p, self.d, self.m, &self.support, self.budget)?;
                Ok(serde_json::to_value(&r).expect("serializable"))
            }
            ScanKind::DensityTable => {
                let rows = density_table(self.p, self.d, self.lmax, out)?;
                Ok(serde_json::json!({
                    "p": self.p, "d_max": self.d, "lmax": self.lmax,
                    "rows": rows.len(),
                    "all_agree": rows
                        .iter()
                        .all(|r| r.closed.is_none() || r.closed.as_deref() == Some(r.brute.as_str())),
                }))
            }
            ScanKind::SolutionCensus => {
                // compare on every (length, weight) slice the generator emits
                let closed = modeq::enumerate_minimal_closed(self.p, self.d)?;
                let mut slices: Vec<(u32, u64)> =
                    closed.iter().map(|s| (s.len(), s.weight())).collect();
                slices.sort_unstable();
                slices.dedup();
                let rows = census_compare(self.p, self.d, &slices)?;
                census_csv(&rows, out)?;
                Ok(serde_json::json!({
                    "p": self.p, "d": self.d,
                    "classes": rows.len(),
                    "all_match": rows.iter().all(|r| r.matches),
                }))
            }
        }
    }
}

/// Number of degree-d curves in the full coefficient sweep: c_d ranges over
/// the q − 1 nonzero elements, c_1..c_{d-1} over all of F_q.
pub fn curve_count(q: u64, d: u64) -> Result<u64> {
    let n = (q as u128 - 1)
        .saturating_mul((q as u128).checked_pow(d as u32 - 1).unwrap_or(u128::MAX));
    if n > SWEEP_CAP {
        return Err(Error::budget(format!(
            "sweep of {n} curves exceeds the cap {SWEEP_CAP}"
        )));
    }
    Ok(n as u64)
}

/// Curve number `idx` in the sweep: little-endian digits of idx in base q
/// give c_1, ..., c_{d-1}, and the top digit selects the nonzero c_d.
pub fn curve_from_index(ctx: &FieldCtx, d: u64, idx: u64) -> Result<ASPolynomial> {
    let q = ctx.order();
    let mut pairs = Vec::with_capacity(d as usize);
    let mut v = idx;
    for i in 1..d {
        pairs.push((i, ctx.element_from_index(v % q)));
        v /= q;
    }
    pairs.push((d, ctx.element_from_index(1 + v)));
    ASPolynomial::new(ctx, pairs)
}

/// Coefficient serialization used in CSV rows: exponent:ascending-coords
/// pairs joined by `;`, e.g. `1:[2];8:[1]`.
pub fn coeffs_to_string(f: &ASPolynomial) -> String {
    f.coeffs()
        .iter()
        .map(|(i, c)| {
            let coords: Vec<String> = c.coords().iter().map(|x| x.to_string()).collect();
            format!("{i}:[{}]", coords.join(" "))
        })
        .collect::<Vec<_>>()
        .join(";")
}

/// Parses the CSV coefficient serialization back into a polynomial.
pub fn coeffs_from_string(ctx: &FieldCtx, s: &str) -> Result<ASPolynomial> {
    let mut pairs = Vec::new();
    for part in s.split(';') {
        let (i, rest) = part
            .split_once(":[")
            .ok_or_else(|| Error::domain(format!("bad coefficient pair {part:?}")))?;
        let i: u64 = i
            .parse()
            .map_err(|_| Error::domain(format!("bad exponent {i:?}")))?;
        let rest = rest
            .strip_suffix(']')
            .ok_or_else(|| Error::domain("missing closing bracket"))?;
        let coords: Vec<u64> = rest
            .split_whitespace()
            .map(|x| x.parse().map_err(|_| Error::domain("bad coordinate")))
            .collect::<Result<_>>()?;
        pairs.push((i, ctx.from_coords(&coords)?));
    }
    ASPolynomial::new(ctx, pairs)
}

fn fmt_rat(r: Rat) -> String {
    if r.denom() == &1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Deterministic worker pool: index space split into `workers` contiguous
/// chunks, results concatenated in index order.
fn parallel_rows<T: Send, F>(n: u64, workers: usize, f: F) -> Result<Vec<T>>
where
    F: Fn(u64) -> Result<T> + Sync,
{
    let workers = workers.max(1).min(n.max(1) as usize);
    if workers <= 1 {
        return (0..n).map(&f).collect();
    }
    let chunk = n.div_ceil(workers as u64);
    let results: Vec<Result<Vec<T>>> = std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for w in 0..workers as u64 {
            let lo = w * chunk;
            let hi = ((w + 1) * chunk).min(n);
            let f = &f;
            handles.push(scope.spawn(move || (lo..hi).map(f).collect::<Result<Vec<T>>>()));
        }
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(n as usize);
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// Preflight for curve sweeps: checks the enumeration budget before any
/// output is produced, so a refusal never leaves a partial file.
pub fn sweep_preflight(p: u64, d: u64, m: usize, budget: Budget) -> Result<()> {
    let ctx = FieldCtx::new(p, m)?;
    curve_count(ctx.order(), d)?;
    if d >= 2 {
        let points = (p as u128)
            .checked_pow((m as u32) * (d as u32 - 1))
            .ok_or_else(|| Error::budget("field size overflows"))?;
        if points > budget.max_points as u128 {
            return Err(Error::budget(format!(
                "character sums need {points} points, budget is {}; rerun with --budget {points}",
                budget.max_points
            )));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct SupersingularSummary {
    pub p: u64,
    pub d: u64,
    pub m: usize,
    pub rows: u64,
    pub supersingular: u64,
    /// first slope (as "num/den") -> number of curves
    pub first_slopes: BTreeMap<String, u64>,
}

/// Full coefficient sweep of degree-d curves: one CSV row per curve with its
/// first slope and supersingularity flag.
pub fn scan_supersingular(
    p: u64,
    d: u64,
    m: usize,
    budget: Budget,
    workers: usize,
    out: &mut dyn Write,
) -> Result<SupersingularSummary> {
    sweep_preflight(p, d, m, budget)?;
    let ctx = FieldCtx::new(p, m)?;
    let n = curve_count(ctx.order(), d)?;
    let engine = lfun::engine(p, m, d, budget)?;
    writeln!(out, "index,coeffs,first_slope,supersingular")?;
    let rows = parallel_rows(n, workers, |idx| {
        let f = curve_from_index(&ctx, d, idx)?;
        let reduced = f.as_reduce()?;
        let l = engine.l_polynomial(&reduced)?;
        let curve = l.newton_polygon()?.dilate(p - 1);
        let slope = curve
            .first_slope()
            .ok_or_else(|| Error::internal("degenerate polygon in sweep"))?;
        let ss = curve.is_supersingular()?;
        Ok((coeffs_to_string(&f), slope, ss))
    })?;
    let mut summary = SupersingularSummary {
        p,
        d,
        m,
        rows: n,
        supersingular: 0,
        first_slopes: BTreeMap::new(),
    };
    for (idx, (coeffs, slope, ss)) in rows.iter().enumerate() {
        writeln!(out, "{idx},{coeffs},{},{ss}", fmt_rat(*slope))?;
        if *ss {
            summary.supersingular += 1;
        }
        *summary.first_slopes.entry(fmt_rat(*slope)).or_insert(0) += 1;
    }
    Ok(summary)
}

#[derive(Clone, Debug, Serialize)]
pub struct VertexScanSummary {
    pub p: u64,
    pub d: u64,
    pub m: usize,
    pub rows: u64,
    pub case: String,
    pub predicted: (u64, u64),
    pub hasse_nonzero: u64,
    pub agrees: u64,
    /// curves violating "nonzero Hasse value implies the predicted vertex"
    pub contract_violations: u64,
    /// curves whose polygon dips below the predicted vertex (must stay 0)
    pub below_vertex: u64,
}

/// Full coefficient sweep comparing predicted and computed first vertices.
pub fn scan_vertex(
    p: u64,
    d: u64,
    m: usize,
    budget: Budget,
    workers: usize,
    out: &mut dyn Write,
) -> Result<VertexScanSummary> {
    sweep_preflight(p, d, m, budget)?;
    let ctx = FieldCtx::new(p, m)?;
    let n = curve_count(ctx.order(), d)?;
    let prediction = hasse::predicted_first_vertex(p, d)?;
    writeln!(
        out,
        "index,coeffs,case,hasse,predicted_x,predicted_y,actual_x,actual_y,agrees,above"
    )?;
    let rows = parallel_rows(n, workers, |idx| {
        let f = curve_from_index(&ctx, d, idx)?;
        let rep = hasse::verify_first_vertex(&f, budget)?;
        Ok((coeffs_to_string(&f), rep))
    })?;
    let mut summary = VertexScanSummary {
        p,
        d,
        m,
        rows: n,
        case: prediction.case().tag().to_string(),
        predicted: prediction.vertex(),
        hasse_nonzero: 0,
        agrees: 0,
        contract_violations: 0,
        below_vertex: 0,
    };
    for (idx, (coeffs, rep)) in rows.iter().enumerate() {
        writeln!(
            out,
            "{idx},{coeffs},{},{},{},{},{},{},{},{}",
            rep.case_tag,
            rep.hasse,
            rep.predicted.0,
            rep.predicted.1,
            rep.actual.0,
            fmt_rat(rep.actual.1),
            rep.agrees,
            rep.lies_on_or_above
        )?;
        if rep.hasse_nonzero {
            summary.hasse_nonzero += 1;
            if !rep.agrees {
                summary.contract_violations += 1;
            }
        }
        if rep.agrees {
            summary.agrees += 1;
        }
        if !rep.lies_on_or_above {
            summary.below_vertex += 1;
        }
    }
    Ok(summary)
}

#[derive(Clone, Debug, Serialize)]
pub struct TightnessReport {
    pub p: u64,
    pub d: u64,
    pub m: usize,
    pub support: Vec<u64>,
    pub target: String,
    pub checked: u64,
    pub witness: Option<BTreeMap<u64, Vec<u64>>>,
    pub witness_vq: Option<String>,
}

/// Searches polynomials supported on the given exponents for one whose first
/// character sum attains the density bound v_q(S_1) = δ(p, d).
pub fn tightness_search(
    p: u64,
    d: u64,
    m: usize,
    support: &[u64],
    budget: Budget,
) -> Result<TightnessReport> {
    if support.is_empty() {
        return Err(Error::domain("support must be non-empty"));
    }
    let mut exps: Vec<u64> = support.to_vec();
    exps.sort_unstable();
    exps.dedup();
    if exps.len() != support.len() {
        return Err(Error::domain("support exponents must be distinct"));
    }
    if *exps.last().unwrap() != d {
        return Err(Error::domain("the largest support exponent must equal d"));
    }
    if exps.iter().any(|&e| e % p == 0) {
        return Err(Error::domain("support exponents must be prime to p"));
    }
    let delta = modeq::density_closed_form(p, d)?;
    let ctx = FieldCtx::new(p, m)?;
    let q = ctx.order();
    let candidates = (q as u128 - 1) * (q as u128).pow(exps.len() as u32 - 1);
    if candidates > 10_000_000 {
        return Err(Error::budget(format!(
            "tightness search over {candidates} candidates exceeds the cap"
        )));
    }
    let mut checked = 0u64;
    for idx in 0..candidates as u64 {
        let mut v = idx;
        let mut pairs = Vec::with_capacity(exps.len());
        for &e in &exps[..exps.len() - 1] {
            pairs.push((e, ctx.element_from_index(v % q)));
            v /= q;
        }
        pairs.push((d, ctx.element_from_index(1 + v)));
        let f = ASPolynomial::new(&ctx, pairs)?;
        let s1 = lfun::exp_sum(&f, 1, budget)?;
        checked += 1;
        if s1.vq(m).finite() == Some(delta) {
            let witness = f
                .coeffs()
                .iter()
                .map(|(&i, c)| (i, c.coords().to_vec()))
                .collect();
            return Ok(TightnessReport {
                p,
                d,
                m,
                support: exps,
                target: fmt_rat(delta),
                checked,
                witness: Some(witness),
                witness_vq: Some(fmt_rat(delta)),
            });
        }
    }
    Ok(TightnessReport {
        p,
        d,
        m,
        support: exps,
        target: fmt_rat(delta),
        checked,
        witness: None,
        witness_vq: None,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DensityRow {
    pub p: u64,
    pub d: u64,
    pub closed: Option<String>,
    pub brute: String,
    pub attained_at: u32,
}

/// Closed-form vs brute-force densities for every d ≤ d_max prime to p.
pub fn density_table(
    p: u64,
    d_max: u64,
    lmax: u32,
    out: &mut dyn Write,
) -> Result<Vec<DensityRow>> {
    writeln!(out, "p,d,closed,brute,attained_at")?;
    let mut rows = Vec::new();
    for d in 1..=d_max {
        if d % p == 0 {
            continue;
        }
        let set = ExponentSet::interval(p, d)?;
        let closed = modeq::density_closed_form(p, d).ok().map(fmt_rat);
        let (brute, at) = modeq::density_bruteforce(&set, lmax)?;
        let row = DensityRow {
            p,
            d,
            closed: closed.clone(),
            brute: fmt_rat(brute),
            attained_at: at,
        };
        writeln!(
            out,
            "{p},{d},{},{},{at}",
            closed.unwrap_or_default(),
            fmt_rat(brute)
        )?;
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Clone, Debug, Serialize)]
pub struct CensusRow {
    pub p: u64,
    pub d: u64,
    pub class_id: String,
    pub length: u32,
    pub weight: u64,
    /// present in both the generator output and the exhaustive enumeration
    pub matches: bool,
}

fn class_id(sol: &Solution) -> String {
    sol.coords()
        .iter()
        .map(|(d, u)| format!("{d}:{u}"))
        .collect::<Vec<_>>()
        .join("|")
}

/// Compares the closed-form generator against the exhaustive enumeration on
/// the given (length, weight) slices; one row per solution class.
pub fn census_compare(p: u64, d: u64, slices: &[(u32, u64)]) -> Result<Vec<CensusRow>> {
    let set = ExponentSet::interval(p, d)?;
    let delta = modeq::density_closed_form(p, d)?;
    let closed = modeq::enumerate_minimal_closed(p, d)?;
    let mut rows = Vec::new();
    for &(l, w) in slices {
        let want: std::collections::BTreeSet<Solution> = closed
            .iter()
            .filter(|s| s.len() == l && s.weight() == w)
            .cloned()
            .collect();
        let got: std::collections::BTreeSet<Solution> =
            modeq::enumerate_minimal_brute(&set, l, w, true)?
                .into_iter()
                .filter(|s| s.density() == delta)
                .collect();
        for s in want.union(&got) {
            rows.push(CensusRow {
                p,
                d,
                class_id: class_id(s),
                length: l,
                weight: w,
                matches: want.contains(s) && got.contains(s),
            });
        }
    }
    Ok(rows)
}

pub fn census_csv(rows: &[CensusRow], out: &mut dyn Write) -> Result<()> {
    writeln!(out, "p,d,class_id,length,weight,match")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.p, r.d, r.class_id, r.length, r.weight, r.matches
        )?;
    }
    Ok(())
}
