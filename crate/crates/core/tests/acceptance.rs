//! Acceptance suite: one test per criterion, one PASS/FAIL line each.
//!
//! Run with `cargo test -p asnp --test acceptance -- --nocapture` to see the
//! per-criterion lines.

use asnp::cyclotomic::CycInt;
use asnp::ff::FieldCtx;
use asnp::hasse;
use asnp::lfun::{self, ASPolynomial, Budget};
use asnp::modeq::{self, ExponentSet};
use asnp::scan;
use asnp::Rat;
use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn criterion(n: u32, name: &str, body: impl FnOnce() -> Result<(), String>) {
    match body() {
        Ok(()) => println!("criterion {n} ({name}): PASS"),
        Err(e) => {
            println!("criterion {n} ({name}): FAIL - {e}");
            panic!("criterion {n} ({name}) failed: {e}");
        }
    }
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {
        if !$cond {
            return Err(format!($($msg)*));
        }
    };
}

fn err<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

#[test]
fn criterion_1_density_oracle_agreement() {
    criterion(1, "density oracle agreement", || {
        for d in 1..=26u64 {
            if d % 3 == 0 {
                continue;
            }
            let set = err(ExponentSet::interval(3, d))?;
            let (brute, _) = err(modeq::density_bruteforce(&set, 7))?;
            match modeq::density_closed_form(3, d) {
                Ok(closed) => {
                    ensure!(closed == brute, "(3,{d}): closed {closed} != brute {brute}")
                }
                Err(_) => {
                    // the only degree without a closed form in this range
                    ensure!(d == 1, "(3,{d}): closed form unexpectedly undefined");
                    ensure!(
                        brute == Rat::new(1, 1),
                        "(3,1): brute density should be 1, got {brute}"
                    );
                }
            }
        }
        for d in [2u64, 3, 4, 18, 19, 23, 24] {
            let set = err(ExponentSet::interval(5, d))?;
            let closed = err(modeq::density_closed_form(5, d))?;
            let (brute, _) = err(modeq::density_bruteforce(&set, 4))?;
            ensure!(closed == brute, "(5,{d}): closed {closed} != brute {brute}");
        }
        Ok(())
    });
}

#[test]
fn criterion_2_sigma_formula() {
    criterion(2, "sigma matches the ceiling formula", || {
        for d in [2u64, 5, 7, 8, 23] {
            let set = err(ExponentSet::interval(3, d))?;
            let delta = err(modeq::density_closed_form(3, d))?;
            for l in 1..=6u32 {
                let sigma = err(modeq::sigma_min_weight(&set, l))?;
                let want = (Rat::from_integer(2 * l as i64) * delta).ceil();
                ensure!(
                    Rat::from_integer(sigma as i64) == want,
                    "(3,{d}) l={l}: sigma {sigma} != ceil {want}"
                );
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_3_minimal_solution_census() {
    criterion(3, "minimal-solution census", || {
        // (3,7) at (l,w) = (3,2): exactly one shift class on both sides
        let rows = err(scan::census_compare(3, 7, &[(3, 2)]))?;
        ensure!(rows.len() == 1 && rows[0].matches, "(3,7) census mismatch");

        // (3,8) at (2,1)
        let rows = err(scan::census_compare(3, 8, &[(2, 1)]))?;
        ensure!(rows.len() == 1 && rows[0].matches, "(3,8) census mismatch");

        // (3,23) at (5,2): weight-2 solutions of length 5 would have density
        // 1/5 below the minimum 1/4, so both enumerations must be empty...
        let set = err(ExponentSet::interval(3, 23))?;
        let brute52 = err(modeq::enumerate_minimal_brute(&set, 5, 2, true))?;
        ensure!(brute52.is_empty(), "(3,23) has length-5 weight-2 solutions");
        let rows = err(scan::census_compare(3, 23, &[(5, 2)]))?;
        ensure!(rows.is_empty(), "(3,23)@(5,2) census not empty");
        // ...and the family's real parameters must agree exactly
        let rows = err(scan::census_compare(3, 23, &[(2, 1), (4, 2)]))?;
        ensure!(!rows.is_empty(), "(3,23) census unexpectedly empty");
        for r in &rows {
            ensure!(
                r.matches,
                "(3,23) class {} at ({},{}) only on one side",
                r.class_id,
                r.length,
                r.weight
            );
        }
        Ok(())
    });
}

#[test]
fn criterion_4_elliptic_sanity() {
    criterion(4, "elliptic sanity for x^2 over F_3", || {
        let ctx = err(FieldCtx::new(3, 1))?;
        let f = err(ASPolynomial::new(&ctx, vec![(2, ctx.one())]))?;
        let l = err(lfun::l_polynomial(&f, Budget::default()))?;
        let want = CycInt::from_coords(3, vec![BigInt::from(1), BigInt::from(2)]).unwrap();
        ensure!(
            l.coeffs() == [CycInt::one(3), want],
            "L(x^2, T) != 1 + (1+2z)T"
        );
        let curve = err(l.newton_polygon())?.dilate(2);
        ensure!(
            curve.vertices() == [(0, Rat::new(0, 1)), (2, Rat::new(1, 1))],
            "curve polygon is not the segment (0,0)-(2,1)"
        );
        ensure!(err(curve.is_supersingular())?, "curve not supersingular");
        Ok(())
    });
}

#[test]
fn criterion_5_supersingularity_exclusion() {
    criterion(5, "supersingularity exclusion for (3, 8)", || {
        let mut sink = Vec::new();
        let summary = err(scan::scan_supersingular(
            3,
            8,
            1,
            Budget::default(),
            4,
            &mut sink,
        ))?;
        ensure!(summary.rows == 4374, "expected 4374 curves, got {}", summary.rows);
        ensure!(
            summary.supersingular == 0,
            "{} supersingular curves found",
            summary.supersingular
        );
        ensure!(
            summary.first_slopes.len() == 1 && summary.first_slopes.get("1/4") == Some(&4374),
            "first slopes not uniformly 1/4: {:?}",
            summary.first_slopes
        );
        Ok(())
    });
}

#[test]
fn criterion_6_first_vertex_hasse_agreement() {
    criterion(6, "first-vertex agreement for (3, 7)", || {
        let ctx = err(FieldCtx::new(3, 1))?;
        let budget = Budget::default();
        let n = err(scan::curve_count(3, 7))?;
        ensure!(n == 1458, "expected 1458 curves, got {n}");
        let engine = err(lfun::engine(3, 1, 7, budget))?;
        for idx in 0..n {
            let f = err(scan::curve_from_index(&ctx, 7, idx))?;
            let c5_zero = f.coeff(5).is_zero();
            let reduced = err(f.as_reduce())?;
            let l = err(engine.l_polynomial(&reduced))?;
            let curve = err(l.newton_polygon())?.dilate(2);
            let at6 = curve.y_at(6).ok_or("polygon too short")?;
            if c5_zero {
                ensure!(
                    at6 > Rat::new(2, 1),
                    "curve {idx}: c_5 = 0 but polygon passes through (6, 2)"
                );
            } else {
                ensure!(
                    curve.first_vertex() == Some((6, Rat::new(2, 1))),
                    "curve {idx}: c_5 != 0 but first vertex is {:?}",
                    curve.first_vertex()
                );
            }
            // cross-check the packaged verifier on a subsample
            if idx % 97 == 0 {
                let rep = err(hasse::verify_first_vertex(&reduced, budget))?;
                ensure!(rep.hasse_nonzero == !c5_zero, "curve {idx}: Hasse split wrong");
                ensure!(rep.lies_on_or_above, "curve {idx}: below predicted vertex");
                ensure!(rep.agrees == !c5_zero, "curve {idx}: agreement split wrong");
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_7_tightness_witness() {
    criterion(7, "tightness witness for (3, 7) over F_27", || {
        let rep = err(scan::tightness_search(3, 7, 3, &[7, 5], Budget::default()))?;
        ensure!(rep.target == "1/3", "target density is {}", rep.target);
        ensure!(
            rep.witness.is_some(),
            "no witness among {} candidates",
            rep.checked
        );
        ensure!(rep.witness_vq.as_deref() == Some("1/3"), "witness valuation off");
        Ok(())
    });
}

#[test]
fn criterion_8_semilinear_property_suite() {
    criterion(8, "semi-linear characteristic polynomial suite", || {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for (p, m) in [(3u64, 1usize), (3, 2), (5, 1), (5, 2)] {
            let ctx = err(FieldCtx::new(p, m))?;
            for trial in 0..1000 {
                let n = rng.random_range(1..=6usize);
                let mut mat = hasse::Mat::zero(&ctx, n, n);
                for r in 0..n {
                    for c in 0..n {
                        mat.set(r, c, ctx.element_from_index(rng.random_range(0..ctx.order())));
                    }
                }
                let map = err(hasse::SemiLinearMap::new(mat))?;
                let dec = err(hasse::ss_decompose(&map))?;
                ensure!(
                    dec.ss_dim() + dec.nil_dim() == n,
                    "(p,m)=({p},{m}) trial {trial}: dims do not add to {n}"
                );
                // degree, leading coefficient (-1)^s * Norm(det A_ss) and the
                // V vs V_ss agreement are all asserted inside:
                let poly = err(hasse::charpoly_first_slope(&map))?;
                ensure!(
                    poly.len() == dec.ss_dim() + 1,
                    "(p,m)=({p},{m}) trial {trial}: degree {} != dim V_ss {}",
                    poly.len() - 1,
                    dec.ss_dim()
                );
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_9_lower_bound_and_symmetry() {
    criterion(9, "global lower bound and slope symmetry", || {
        // all (p, m, d) with p in {3,5}, m <= 2, 2 <= d <= 8 prime to p whose
        // character sums fit the enumeration budget p^{m(d-1)} <= 5e6
        let budget = Budget::default();
        let mut configs = Vec::new();
        for &p in &[3u64, 5] {
            for m in [1usize, 2] {
                for d in 2..=8u64 {
                    if d % p == 0 {
                        continue;
                    }
                    let points = (p as u128).pow((m as u32) * (d as u32 - 1));
                    if points <= budget.max_points as u128 {
                        configs.push((p, m, d));
                    }
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(777);
        let mut done = 0;
        while done < 500 {
            let &(p, m, d) = &configs[rng.random_range(0..configs.len())];
            let ctx = err(FieldCtx::new(p, m))?;
            let q = ctx.order();
            let mut pairs = vec![(d, ctx.element_from_index(rng.random_range(1..q)))];
            for i in 1..d {
                if i % p != 0 {
                    pairs.push((i, ctx.element_from_index(rng.random_range(0..q))));
                }
            }
            let f = err(ASPolynomial::new(&ctx, pairs))?;
            let dmax = configs
                .iter()
                .filter(|&&(pp, mm, _)| pp == p && mm == m)
                .map(|&(_, _, dd)| dd)
                .max()
                .unwrap();
            let engine = err(lfun::engine(p, m, dmax, budget))?;
            let l = err(engine.l_polynomial(&f))?;
            let np = err(l.newton_polygon())?;
            let delta = err(modeq::density_closed_form(p, d))?;
            let first = np.first_slope().ok_or("empty polygon")?;
            ensure!(
                first >= delta,
                "(p,m,d)=({p},{m},{d}): first slope {first} below density {delta}"
            );
            let mut slopes = np.slope_multiset();
            let mut mirror: Vec<Rat> = slopes.iter().map(|s| Rat::new(1, 1) - *s).collect();
            slopes.sort();
            mirror.sort();
            ensure!(
                slopes == mirror,
                "(p,m,d)=({p},{m},{d}): slope multiset not symmetric"
            );
            ensure!(
                np.end() == (d - 1, Rat::new(d as i64 - 1, 2)),
                "(p,m,d)=({p},{m},{d}): endpoint {:?}",
                np.end()
            );
            done += 1;
        }
        Ok(())
    });
}
