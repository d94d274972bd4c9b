//! Command-line driver: machine-readable JSON on stdout, human summaries on
//! stderr. Exit codes: 0 ok, 2 domain error, 3 budget refusal.

use asnp::cyclotomic::Valuation;
use asnp::ff::FieldCtx;
use asnp::hasse;
use asnp::lfun::{self, ASPolynomial, Budget, NewtonPolygon};
use asnp::modeq::{self, ExponentSet, Solution};
use asnp::scan;
use asnp::{Error, Rat, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use std::io::Write;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "asnp",
    about = "p-densities of exponent sets and Newton polygons of Artin-Schreier curves",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct BudgetArg {
    /// Maximum number of points per character sum
    #[arg(long, default_value_t = 5_000_000)]
    budget: u64,
}

impl BudgetArg {
    fn get(&self) -> Budget {
        Budget::new(self.budget)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Closed-form (and optionally brute-force) p-density of {1..d}
    Density {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        d: u64,
        /// Also run the BFS oracle over lengths 1..lmax
        #[arg(long)]
        brute: bool,
        /// Search window for --brute (default 2n+3, n = floor log_p(d+1))
        #[arg(long)]
        lmax: Option<u32>,
    },
    /// Minimal solution weights sigma(l) for l = 1..lmax
    Sigma {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        d: u64,
        #[arg(long, default_value_t = 6)]
        lmax: u32,
    },
    /// Minimal irreducible solutions: closed-form generators, or the
    /// exhaustive census at one (length, weight) slice with --brute
    Solutions {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        d: u64,
        #[arg(long)]
        brute: bool,
        #[arg(long)]
        l: Option<u32>,
        #[arg(long)]
        w: Option<u64>,
    },
    /// Support map of a solution (JSON as printed by `solutions`)
    Support {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        d: u64,
        /// e.g. '{"p":3,"l":3,"u":{"5":1,"7":3}}'
        #[arg(long)]
        solution: String,
    },
    /// L-polynomial, Newton polygons, genus and supersingularity of
    /// y^p - y = f(x)
    Lpoly {
        #[arg(long)]
        p: u64,
        #[arg(long, default_value_t = 1)]
        m: usize,
        /// Coefficients as exponent:element pairs, e.g. "8:1,1:2" (m = 1) or
        /// "2:[1,0,2]" (coordinate lists for m > 1)
        #[arg(long)]
        coeffs: String,
        #[command(flatten)]
        budget: BudgetArg,
    },
    /// Lower convex hull of points "x:v" with exact rational v (or "inf")
    Np {
        #[arg(long)]
        points: String,
    },
    /// Predicted generic first vertex, minimal support and Hasse polynomial
    Vertex {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        d: u64,
    },
    /// Verify the predicted first vertex against the computed polygon
    Hasse {
        #[arg(long)]
        p: u64,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long)]
        coeffs: String,
        #[command(flatten)]
        budget: BudgetArg,
    },
    /// Full coefficient sweep: first slopes and supersingularity flags
    ScanSupersingular {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        d: u64,
        #[arg(long, default_value_t = 1)]
        m: usize,
        /// CSV output path
        #[arg(long)]
        out: String,
        #[arg(long, default_value_t = 4)]
        workers: usize,
        #[command(flatten)]
        budget: BudgetArg,
    },
    /// Search for a polynomial on the given support attaining v_q(S_1) = density
    Tightness {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        d: u64,
        #[arg(long, default_value_t = 1)]
        m: usize,
        /// Comma-separated exponents, e.g. "7,5"
        #[arg(long)]
        support: String,
        #[command(flatten)]
        budget: BudgetArg,
    },
    /// Quick end-to-end self check
    Selftest,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(value) => {
            println!("{}", serde_json::to_string(&value).expect("serializable"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Budget(_) => ExitCode::from(3),
                Error::Domain(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn fmt_rat(r: Rat) -> String {
    if r.denom() == &1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn polygon_json(np: &NewtonPolygon) -> Value {
    Value::Array(
        np.vertices()
            .iter()
            .map(|&(x, y)| json!([x, fmt_rat(y)]))
            .collect(),
    )
}

/// Parses "8:1,1:2" / "2:[1,0,2],1:[0,1]" coefficient lists.
fn parse_coeffs(ctx: &FieldCtx, s: &str) -> Result<ASPolynomial> {
    let mut pairs = Vec::new();
    let mut rest = s.trim();
    while !rest.is_empty() {
        let (exp, tail) = rest
            .split_once(':')
            .ok_or_else(|| Error::domain(format!("expected exponent:element in {rest:?}")))?;
        let i: u64 = exp
            .trim()
            .parse()
            .map_err(|_| Error::domain(format!("bad exponent {exp:?}")))?;
        let (elem_str, next) = if let Some(t) = tail.strip_prefix('[') {
            let (inside, after) = t
                .split_once(']')
                .ok_or_else(|| Error::domain("unclosed coordinate list"))?;
            (inside.to_string(), after.trim_start_matches(','))
        } else {
            match tail.split_once(',') {
                Some((e, after)) => (e.to_string(), after),
                None => (tail.to_string(), ""),
            }
        };
        let coords: Vec<u64> = elem_str
            .split([',', ' '])
            .filter(|t| !t.trim().is_empty())
            .map(|t| {
                t.trim()
                    .parse()
                    .map_err(|_| Error::domain(format!("bad coordinate {t:?}")))
            })
            .collect::<Result<_>>()?;
        let elem = if coords.len() == ctx.degree() {
            ctx.from_coords(&coords)?
        } else if coords.len() == 1 {
            ctx.from_u64(coords[0])
        } else {
            return Err(Error::domain(format!(
                "element needs {} coordinates, got {}",
                ctx.degree(),
                coords.len()
            )));
        };
        pairs.push((i, elem));
        rest = next.trim();
    }
    ASPolynomial::new(ctx, pairs)
}

fn coeffs_json(f: &ASPolynomial) -> Value {
    let mut map = serde_json::Map::new();
    for (i, c) in f.coeffs() {
        map.insert(i.to_string(), json!(c.coords()));
    }
    Value::Object(map)
}

fn parse_rat(s: &str) -> Result<Valuation> {
    let s = s.trim();
    if s == "inf" {
        return Ok(Valuation::Infinite);
    }
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (
            n.parse::<i64>()
                .map_err(|_| Error::domain(format!("bad rational {s:?}")))?,
            d.parse::<i64>()
                .map_err(|_| Error::domain(format!("bad rational {s:?}")))?,
        ),
        None => (
            s.parse::<i64>()
                .map_err(|_| Error::domain(format!("bad rational {s:?}")))?,
            1,
        ),
    };
    Ok(Valuation::Finite(Rat::new(n, d)))
}

fn run(cmd: Cmd) -> Result<Value> {
    match cmd {
        Cmd::Density { p, d, brute, lmax } => {
            let closed = modeq::density_closed_form(p, d);
            if !brute {
                let c = closed?;
                eprintln!("density({p}, {d}) = {}", fmt_rat(c));
                return Ok(json!({"p": p, "d": d, "closed": fmt_rat(c)}));
            }
            let set = ExponentSet::interval(p, d)?;
            let lmax = lmax.unwrap_or_else(|| modeq::default_density_window(p, d));
            let (b, l) = modeq::density_bruteforce(&set, lmax)?;
            let closed_json = match &closed {
                Ok(c) => json!(fmt_rat(*c)),
                Err(_) => Value::Null,
            };
            eprintln!(
                "density({p}, {d}): closed {} brute {} attained at l = {l}",
                closed.map(fmt_rat).unwrap_or_else(|_| "-".into()),
                fmt_rat(b)
            );
            Ok(json!({"p": p, "d": d, "closed": closed_json, "brute": fmt_rat(b), "l": l}))
        }
        Cmd::Sigma { p, d, lmax } => {
            let set = ExponentSet::interval(p, d)?;
            let mut rows = Vec::new();
            for l in 1..=lmax {
                let sigma = modeq::sigma_min_weight(&set, l)?;
                rows.push(json!({"l": l, "sigma": sigma}));
            }
            eprintln!("sigma({p}, {d}) over l = 1..{lmax}");
            Ok(json!({"p": p, "d": d, "rows": rows}))
        }
        Cmd::Solutions { p, d, brute, l, w } => {
            let sols = if brute {
                let l = l.ok_or_else(|| Error::domain("--brute requires --l"))?;
                let w = w.ok_or_else(|| Error::domain("--brute requires --w"))?;
                let set = ExponentSet::interval(p, d)?;
                modeq::enumerate_minimal_brute(&set, l, w, true)?
            } else {
                modeq::enumerate_minimal_closed(p, d)?
            };
            eprintln!("{} shift classes", sols.len());
            let vals: Vec<Value> = sols
                .iter()
                .map(|s| serde_json::to_value(s).expect("serializable"))
                .collect();
            Ok(json!({"p": p, "d": d, "solutions": vals}))
        }
        Cmd::Support { p, d, solution } => {
            let sol: Solution = serde_json::from_str(&solution)
                .map_err(|e| Error::domain(format!("bad solution JSON: {e}")))?;
            let set = ExponentSet::interval(p, d)?;
            let sup = modeq::support_map(&set, &sol)?;
            eprintln!(
                "support of length {} with {} jumps",
                sup.len,
                sup.jumps.len()
            );
            Ok(json!({
                "p": p, "d": d,
                "values": sup.values,
                "jumps": sup.jumps.iter().map(|&(i, j)| json!([i, j])).collect::<Vec<_>>(),
                "irreducible": sup.irreducible,
            }))
        }
        Cmd::Lpoly { p, m, coeffs, budget } => {
            let ctx = FieldCtx::new(p, m)?;
            let f = parse_coeffs(&ctx, &coeffs)?;
            let reduced = f.as_reduce()?;
            let d = reduced.degree();
            let l = lfun::l_polynomial(&reduced, budget.get())?;
            let l_json: Vec<Value> = l
                .coeffs()
                .iter()
                .map(|b| json!({"p": p, "coords": b.coords_strings()}))
                .collect();
            let np_f = l.newton_polygon()?;
            let np_curve = np_f.dilate(p - 1);
            let genus = lfun::genus(p, d)?;
            let supersingular = if genus == 0 {
                Value::Null
            } else {
                json!(np_curve.is_supersingular()?)
            };
            eprintln!(
                "deg f = {d}, genus {genus}, L-degree {}, first slope {}",
                l.degree(),
                np_f.first_slope().map(fmt_rat).unwrap_or_else(|| "-".into())
            );
            Ok(json!({
                "p": p, "m": m,
                "coeffs": coeffs_json(&f),
                "reduced": coeffs_json(&reduced),
                "L": l_json,
                "np_f": polygon_json(&np_f),
                "np_curve": polygon_json(&np_curve),
                "genus": genus,
                "supersingular": supersingular,
            }))
        }
        Cmd::Np { points } => {
            let pts: Vec<(u64, Valuation)> = points
                .split(',')
                .map(|t| {
                    let (x, v) = t
                        .split_once(':')
                        .ok_or_else(|| Error::domain(format!("expected x:v in {t:?}")))?;
                    Ok((
                        x.trim()
                            .parse::<u64>()
                            .map_err(|_| Error::domain(format!("bad abscissa {x:?}")))?,
                        parse_rat(v)?,
                    ))
                })
                .collect::<Result<_>>()?;
            let np = NewtonPolygon::from_valuations(&pts)?;
            eprintln!("{} hull vertices", np.vertices().len());
            Ok(json!({"vertices": polygon_json(&np)}))
        }
        Cmd::Vertex { p, d } => {
            let pr = hasse::predicted_first_vertex(p, d)?;
            eprintln!(
                "case {}: first vertex {:?}, support size {}",
                pr.case().tag(),
                pr.vertex(),
                pr.support().len()
            );
            Ok(json!({
                "p": p, "d": d,
                "case": pr.case().tag(),
                "vertex": [pr.vertex().0, pr.vertex().1],
                "support": pr.support().iter().collect::<Vec<_>>(),
                "hasse": pr.describe(),
            }))
        }
        Cmd::Hasse { p, m, coeffs, budget } => {
            let ctx = FieldCtx::new(p, m)?;
            let f = parse_coeffs(&ctx, &coeffs)?;
            let rep = hasse::verify_first_vertex(&f, budget.get())?;
            eprintln!(
                "case {}: predicted {:?}, actual ({}, {}), agrees: {}",
                rep.case_tag,
                rep.predicted,
                rep.actual.0,
                fmt_rat(rep.actual.1),
                rep.agrees
            );
            Ok(json!({
                "p": rep.p, "m": rep.m, "d": rep.d,
                "case": rep.case_tag,
                "hasse_value": rep.hasse.coords(),
                "hasse_nonzero": rep.hasse_nonzero,
                "predicted": [rep.predicted.0, rep.predicted.1],
                "actual": [rep.actual.0, fmt_rat(rep.actual.1)],
                "agrees": rep.agrees,
                "above": rep.lies_on_or_above,
            }))
        }
        Cmd::ScanSupersingular {
            p,
            d,
            m,
            out,
            workers,
            budget,
        } => {
            // refuse before creating the file so a budget error leaves nothing
            scan::sweep_preflight(p, d, m, budget.get())?;
            let job = scan::ScanJob {
                kind: scan::ScanKind::SupersingularScan,
                p,
                d,
                m,
                budget: budget.get(),
                lmax: 0,
                workers,
                support: Vec::new(),
            };
            let mut file = std::io::BufWriter::new(std::fs::File::create(&out)?);
            let summary = job.run(&mut file)?;
            file.flush()?;
            eprintln!(
                "{} curves, {} supersingular -> {}",
                summary["rows"], summary["supersingular"], out
            );
            Ok(summary)
        }
        Cmd::Tightness {
            p,
            d,
            m,
            support,
            budget,
        } => {
            let exps: Vec<u64> = support
                .split(',')
                .filter(|t| !t.trim().is_empty())
                .map(|t| {
                    t.trim()
                        .parse()
                        .map_err(|_| Error::domain(format!("bad exponent {t:?}")))
                })
                .collect::<Result<_>>()?;
            let rep = scan::tightness_search(p, d, m, &exps, budget.get())?;
            match &rep.witness {
                Some(w) => eprintln!("witness after {} candidates: {:?}", rep.checked, w),
                None => eprintln!("no witness among {} candidates", rep.checked),
            }
            Ok(serde_json::to_value(&rep).expect("serializable"))
        }
        Cmd::Selftest => selftest(),
    }
}

fn selftest() -> Result<Value> {
    let mut checks: Vec<(&str, bool)> = Vec::new();
    let budget = Budget::default();

    // densities
    checks.push((
        "density(3,7) = 1/3",
        modeq::density_closed_form(3, 7)? == Rat::new(1, 3),
    ));
    let set = ExponentSet::interval(3, 7)?;
    checks.push((
        "brute density(3,7) attained at l = 3",
        modeq::density_bruteforce(&set, 5)? == (Rat::new(1, 3), 3),
    ));

    // elliptic sanity: y^3 - y = x^2 over F_3 is supersingular
    let ctx = FieldCtx::new(3, 1)?;
    let f = ASPolynomial::new(&ctx, vec![(2, ctx.one())])?;
    let l = lfun::l_polynomial(&f, budget)?;
    let curve = l.newton_polygon()?.dilate(2);
    checks.push(("x^2 over F_3 is supersingular", curve.is_supersingular()?));

    // first vertex of a degree-7 curve
    let f = ASPolynomial::new(&ctx, vec![(7, ctx.one()), (5, ctx.one())])?;
    let rep = hasse::verify_first_vertex(&f, budget)?;
    checks.push(("vertex (6,2) for x^7 + x^5 over F_3", rep.agrees));

    // a small sweep
    let mut sink = Vec::new();
    let summary = scan::scan_supersingular(3, 2, 1, budget, 2, &mut sink)?;
    checks.push((
        "all 6 elliptic curves over F_3 supersingular",
        summary.supersingular == 6,
    ));

    let mut failed = 0;
    for (name, ok) in &checks {
        eprintln!("{} {}", if *ok { "ok " } else { "FAIL" }, name);
        if !ok {
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(Error::internal(format!("{failed} selftest checks failed")));
    }
    Ok(json!({"passed": checks.len(), "failed": 0}))
}
