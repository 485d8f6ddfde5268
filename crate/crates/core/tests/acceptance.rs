//! End-to-end acceptance run. Prints one PASS/FAIL/WARN line per criterion
//! and fails unless every criterion passes (the box-count cross-check may
//! downgrade to WARN when everything else passes and its counts are
//! monotone).

use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use toral_recurrence::cantor_mass::{build_tree, mass_bounds_check, select_levels};
use toral_recurrence::conjugacy::{commutation_check, lipschitz_sandwich, random_small_rationals, rational_diagonalize};
use toral_recurrence::periodic_lattice::{count_in_ball, count_in_ellipsoid, enumerate_periodic, PeriodicLattice};
use toral_recurrence::recurrence_geometry::{
    box_count_dimension, boshernitzan_statistic, decompose_rn, lattice_min_distance, membership, membership_dynamical,
    membership_dynamical_f64, membership_f64, random_rational_point, upper_bound_sum, BoxRegion, EllipsoidShape,
    SeriesVerdict,
};
use toral_recurrence::spectrum_dim::{alpha_threshold, dim_corollary_equal_moduli, dim_theorem1, dim_theorem2};
use toral_recurrence::{eigen_moduli, Alpha, IntegerMatrix, RateFunction, Spectrum};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Status {
    Pass,
    Fail,
    Warn,
}

struct Outcome {
    ok: bool,
    detail: String,
}

fn check(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        ok,
        detail: detail.into(),
    }
}

fn mats() -> Vec<(&'static str, IntegerMatrix)> {
    vec![
        ("[[2]]", IntegerMatrix::diag(&[2])),
        ("[[3]]", IntegerMatrix::diag(&[3])),
        ("[[3,1],[1,2]]", IntegerMatrix::from_i64_rows(&[[3, 1], [1, 2]]).unwrap()),
        ("[[2,0],[0,3]]", IntegerMatrix::diag(&[2, 3])),
        ("[[4,1],[0,2]]", IntegerMatrix::from_i64_rows(&[[4, 1], [0, 2]]).unwrap()),
    ]
}

fn small(m: &IntegerMatrix) -> Vec<Vec<i64>> {
    m.rows().iter().map(|r| r.iter().map(|v| v.to_i64().unwrap()).collect()).collect()
}

/// `A^n - I` by repeated i64 multiplication.
fn shift_i64(a: &[Vec<i64>], n: u32) -> Vec<Vec<i64>> {
    let d = a.len();
    let mut p: Vec<Vec<i64>> = (0..d).map(|i| (0..d).map(|j| (i == j) as i64).collect()).collect();
    for _ in 0..n {
        p = (0..d)
            .map(|i| (0..d).map(|j| (0..d).map(|k| p[i][k] * a[k][j]).sum()).collect())
            .collect();
    }
    for (i, row) in p.iter_mut().enumerate() {
        row[i] -= 1;
    }
    p
}

fn det_small(m: &[Vec<i64>]) -> i64 {
    match m.len() {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => unreachable!(),
    }
}

fn criterion_1() -> Outcome {
    let cap = BigInt::from(10_000_000);
    let mut brute_checked = 0;
    for (name, a) in mats() {
        let ai = small(&a);
        for n in 1..=6 {
            let m = shift_i64(&ai, n);
            let h = det_small(&m).unsigned_abs();
            let set = enumerate_periodic(&a, n, &cap).unwrap();
            if set.len() as u64 != h {
                return check(false, format!("{name} n={n}: {} points, |det| = {h}", set.len()));
            }
            let mm = a.pow(n).minus_identity();
            for x in set.points() {
                if !mm.mul_rational_vec(&x).iter().all(BigRational::is_integer) {
                    return check(false, format!("{name} n={n}: point fails the congruence"));
                }
            }
            if h <= 10_000 {
                // every period-n point has denominator dividing H_n
                let hh = h as i64;
                let mut brute: Vec<Vec<u64>> = Vec::new();
                if ai.len() == 1 {
                    for k in 0..hh {
                        if (m[0][0] * k).rem_euclid(hh) == 0 {
                            brute.push(vec![k as u64]);
                        }
                    }
                } else {
                    for k0 in 0..hh {
                        let (r0, r1) = (m[0][0] * k0, m[1][0] * k0);
                        for k1 in 0..hh {
                            if (r0 + m[0][1] * k1) % hh == 0 && (r1 + m[1][1] * k1) % hh == 0 {
                                brute.push(vec![k0 as u64, k1 as u64]);
                            }
                        }
                    }
                }
                let q = set.denom();
                let mut ours: Vec<Vec<u64>> = set
                    .iter()
                    .map(|num| num.iter().map(|&v| v * (h / q)).collect())
                    .collect();
                brute.sort();
                ours.sort();
                if brute != ours {
                    return check(false, format!("{name} n={n}: grid oracle disagrees"));
                }
                brute_checked += 1;
            }
        }
    }
    check(true, format!("30 (A, n) pairs exact; grid oracle on {brute_checked} with H_n <= 1e4"))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for trial in 0..200 {
        let d = rng.random_range(1..=6);
        let vals: Vec<i64> = (0..d).map(|_| rng.random_range(2..=40)).collect();
        let spec = Spectrum::from_integers(&vals).unwrap();
        let t1_zero = dim_theorem1(&spec, &Alpha::Log(BigRational::one())).unwrap().value;
        if (t1_zero - d as f64).abs() > 1e-12 {
            return check(false, format!("trial {trial}: alpha = 0 gives {t1_zero}"));
        }
        let lo = *vals.iter().min().unwrap();
        let hi = *vals.iter().max().unwrap();
        // exactly at the threshold, then strictly above it
        let at = BigRational::new(hi.into(), lo.into());
        let above = &at * BigRational::new(rng.random_range(100..400).into(), 100.into());
        for alpha in [Alpha::Log(at.clone()), Alpha::Log(above)] {
            let t1 = dim_theorem1(&spec, &alpha).unwrap().value;
            let t2 = dim_theorem2(&spec, &alpha).unwrap().value;
            worst = worst.max((t1 - t2).abs());
            if (t1 - t2).abs() > 1e-12 {
                return check(false, format!("trial {trial}: formula values {t1} vs {t2} for {alpha}"));
            }
            for t in [2u32, 3] {
                let s1 = dim_theorem1(&spec.powered(t), &alpha.scaled(t)).unwrap().value;
                let s2 = dim_theorem2(&spec.powered(t), &alpha.scaled(t)).unwrap().value;
                if (s1 - t1).abs() > 1e-10 || (s2 - t2).abs() > 1e-10 {
                    return check(false, format!("trial {trial}: scaling t={t} moved the value"));
                }
            }
        }
        let lambda = rng.random_range(2..=40);
        let eq = Spectrum::from_integers(&vec![lambda; d]).unwrap();
        let alpha = Alpha::Log(BigRational::new(rng.random_range(1..60).into(), 7.into()).max(BigRational::one()));
        let c = dim_corollary_equal_moduli(d, lambda as f64, alpha.value());
        let t1 = dim_theorem1(&eq, &alpha).unwrap().value;
        if (c - t1).abs() > 1e-12 {
            return check(false, format!("trial {trial}: equal moduli {c} vs {t1}"));
        }
    }
    check(true, format!("200 spectra, max formula gap {worst:.1e}"))
}

fn criterion_3() -> Outcome {
    let alpha = Alpha::ln(4);
    let psi = RateFunction::exponential(alpha.clone()).unwrap();
    let mut checked = 0;
    let mut tightest = f64::INFINITY;
    for (name, a) in mats() {
        let spec = eigen_moduli(&a, 1e-12).unwrap();
        if alpha.interval().lo < alpha_threshold(&spec).hi {
            return check(false, format!("{name}: alpha below the threshold"));
        }
        for n in 1..=8 {
            let lattice = PeriodicLattice::new(&a, n).unwrap();
            let shape = EllipsoidShape::new(&a, lattice.spectrum(), n, &psi).unwrap();
            let rep = lattice_min_distance(&psi, &lattice, &shape).unwrap();
            if !rep.holds {
                return check(false, format!("{name} n={n}: distance {:?} < {}", rep.distance, rep.required));
            }
            if let Some(dist) = rep.distance {
                tightest = tightest.min(dist / rep.required);
                checked += 1;
            }
        }
    }
    check(true, format!("{checked} families separated; min distance/bound = {tightest:.3}"))
}

fn criterion_4() -> Outcome {
    let a = IntegerMatrix::from_i64_rows(&[[3, 1], [1, 2]]).unwrap();
    let (n, r) = (6, 0.2);
    let lattice = PeriodicLattice::new(&a, n).unwrap();
    let l1 = lattice.spectrum().min().value;
    if (l1.powi(n as i32) - 1.0) * r <= 1.0 {
        return check(false, "scale condition fails for the chosen n, r");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut lo, mut hi, mut constant) = (f64::INFINITY, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let c = [rng.random::<f64>(), rng.random::<f64>()];
        let rep = count_in_ball(&lattice, &c, r).unwrap();
        let v = rep.volume_ratio.unwrap();
        lo = lo.min(v);
        hi = hi.max(v);
        constant = constant.max(rep.bound_ratio);
    }
    let ok = lo >= 1.0 / 50.0 && hi <= 50.0 && constant <= 64.0;
    check(
        ok,
        format!("H_6 = {}, ratio in [{lo:.3}, {hi:.3}], calibrated product constant {constant:.3} (<= 8^d)", lattice.len()),
    )
}

fn criterion_5() -> Outcome {
    let a = IntegerMatrix::diag(&[2]);
    let psi = RateFunction::exponential(Alpha::ln(8)).unwrap();
    let cap = BigInt::from(10_000);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for (n, m) in [(1, 6), (2, 8), (2, 10)] {
        let fam = decompose_rn(&a, n, &psi, &cap).unwrap();
        let lattice = PeriodicLattice::new(&a, m).unwrap();
        for ell in fam.members() {
            let rep = count_in_ellipsoid(&lattice, &ell).unwrap();
            if !rep.hypothesis_met {
                return check(false, format!("(n, m) = ({n}, {m}): scale hypothesis fails"));
            }
            lo = lo.min(rep.ratio);
            hi = hi.max(rep.ratio);
        }
    }
    check(lo >= 1.0 / 50.0 && hi <= 50.0, format!("ratios in [{lo:.3}, {hi:.3}]"))
}

fn criterion_6() -> Outcome {
    let a = IntegerMatrix::diag(&[2]);
    let spec = Spectrum::from_integers(&[2]).unwrap();
    let psi = RateFunction::exponential(Alpha::ln(2)).unwrap();
    let seq = select_levels(&spec, &psi, 2, 0.5).unwrap();
    // separation condition rechecked from scratch in exact arithmetic
    let strict = seq.levels.windows(2).all(|w| {
        let lhs = psi.rational(w[0]) / BigRational::from_integer(BigInt::from(2).pow(w[0]) - 1);
        let rhs = BigRational::new(1.into(), BigInt::from(2).pow(w[1]) - 1);
        lhs > rhs
    });
    let tree = build_tree(&a, &psi, &seq, 100_000).unwrap();
    let total_ok = (0..tree.depth()).all(|j| tree.level_total(j) == BigRational::one());
    let mb = mass_bounds_check(&tree);
    let ok = strict && tree.conservation_holds() && total_ok && mb.c1 <= 64.0;
    check(
        ok,
        format!(
            "levels {:?}, {} leaves, exact conservation {}, C1 = {:.4}",
            seq.levels,
            tree.leaves().nodes.len(),
            tree.conservation_holds(),
            mb.c1
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let psi = RateFunction::exponential(Alpha::ln(4)).unwrap();
    let all = mats();
    let lattices: Vec<PeriodicLattice> = all
        .iter()
        .flat_map(|(_, a)| (1..=5).map(move |n| PeriodicLattice::new(a, n).unwrap()))
        .collect();
    let shifts: Vec<Vec<Vec<f64>>> = lattices.iter().map(|l| l.shift_matrix().to_f64_rows()).collect();
    let (mut inside, mut skipped) = (0, 0);
    for i in 0..10_000 {
        let (name, a) = &all[i % all.len()];
        let d = a.dim();
        let n = rng.random_range(1..=5);
        // half the points are pushed next to a periodic point so both answers occur
        let lattice = &lattices[(i % all.len()) * 5 + n as usize - 1];
        let q = lattice.denom();
        let c = lattice.numerators(rng.random_range(0..lattice.len()));
        let x: Vec<BigRational> = (0..d)
            .map(|k| {
                let base = BigRational::new(c[k].into(), q.into());
                if i % 2 == 0 {
                    base + BigRational::new(rng.random_range(-50_000i64..50_000).into(), 10_000_000.into())
                } else {
                    BigRational::new(rng.random_range(0..10_007i64).into(), 10_007.into())
                }
            })
            .map(|v| &v - v.floor())
            .collect();
        let alg = membership(&x, a, n, &psi).unwrap();
        let dyn_ = membership_dynamical(&x, a, n, &psi).unwrap();
        if alg != dyn_ {
            return check(false, format!("{name} n={n}: exact memberships differ"));
        }
        inside += alg as u32;
        let xf: Vec<f64> = x.iter().map(|v| v.to_f64().unwrap()).collect();
        // skip floats whose algebraic distance is within 1e-9 of the radius
        let m = &shifts[(i % all.len()) * 5 + n as usize - 1];
        let y: Vec<f64> = m.iter().map(|r| r.iter().zip(&xf).map(|(p, q)| p * q).sum()).collect();
        let dist = y.iter().map(|v| (v - v.round()).powi(2)).sum::<f64>().sqrt();
        if (dist - psi.value(n)).abs() < 1e-9 {
            skipped += 1;
            continue;
        }
        if membership_f64(&xf, a, n, &psi).unwrap() != membership_dynamical_f64(&xf, a, n, &psi).unwrap() {
            return check(false, format!("{name} n={n}: float memberships differ"));
        }
    }
    check(true, format!("10^4 points agree ({inside} inside, {skipped} float boundary skips)"))
}

fn criterion_8() -> Outcome {
    let u = IntegerMatrix::from_i64_rows(&[[2, 1], [1, 1]]).unwrap();
    let uinv = IntegerMatrix::from_i64_rows(&[[1, -1], [-1, 2]]).unwrap();
    let u3 = IntegerMatrix::from_i64_rows(&[[1, 1, 0], [0, 1, 1], [0, 0, 1]]).unwrap();
    let u3inv = IntegerMatrix::from_i64_rows(&[[1, -1, 1], [0, 1, -1], [0, 0, 1]]).unwrap();
    let cases = vec![
        IntegerMatrix::diag(&[2, 3]),
        IntegerMatrix::from_i64_rows(&[[4, 1], [0, 2]]).unwrap(),
        &(&uinv * &IntegerMatrix::diag(&[2, 8])) * &u,
        IntegerMatrix::from_i64_rows(&[[3, 1], [0, -2]]).unwrap(),
        &(&u3inv * &IntegerMatrix::diag(&[2, 3, 5])) * &u3,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for a in &cases {
        let cd = match rational_diagonalize(a) {
            Ok(cd) => cd,
            Err(e) => return check(false, format!("{a}: {e}")),
        };
        if !cd.identity_holds(a) {
            return check(false, format!("{a}: conjugation identity fails"));
        }
        let xs = random_small_rationals(&mut rng, a.dim(), 1000, 10_000);
        let rep = commutation_check(&cd, a, &xs);
        if !rep.passed() {
            return check(false, format!("{a}: {} commutation failures", rep.failures.len()));
        }
        let sw = lipschitz_sandwich(&cd, &[0.01, 0.1, 0.4]).unwrap();
        if !sw.iter().all(|s| s.inner_holds && s.outer_holds) {
            return check(false, format!("{a}: sandwich inclusions not certified"));
        }
        let spec = eigen_moduli(a, 1e-12).unwrap();
        let mut diag: Vec<f64> = cd.d.iter().map(|v| v.abs().to_f64().unwrap()).collect();
        diag.sort_by(f64::total_cmp);
        if spec.values().iter().zip(&diag).any(|(s, t)| (s - t).abs() > 1e-12 * t) {
            return check(false, format!("{a}: spectrum differs from |D|"));
        }
    }
    check(true, "5 matrices: exact identity, 5000 exact commutations, sandwiches certified")
}

fn criterion_9() -> Outcome {
    let spec = Spectrum::from_integers(&[2, 4]).unwrap();
    let psi = RateFunction::exponential(Alpha::ln(8)).unwrap();
    let formula = dim_theorem1(&spec, &Alpha::ln(8)).unwrap().value;
    let hi = upper_bound_sum(&spec, &psi, 0.80, 5, 60).unwrap();
    let lo = upper_bound_sum(&spec, &psi, 0.70, 5, 60).unwrap();
    check(
        (formula - 0.75).abs() < 1e-12 && hi.verdict == SeriesVerdict::Converging && lo.verdict == SeriesVerdict::Diverging,
        format!(
            "formula {formula}; s=0.80 {:?} (tail ratio {:.4}), s=0.70 {:?} (tail ratio {:.4})",
            hi.verdict, hi.tail_ratio, lo.verdict, lo.tail_ratio
        ),
    )
}

fn criterion_10() -> (Outcome, bool) {
    let a = IntegerMatrix::diag(&[2]);
    let psi = RateFunction::exponential(Alpha::ln(2)).unwrap();
    let region = BoxRegion::new(&a, &psi, 6, 12, &BigInt::from(100_000)).unwrap();
    let exps: Vec<u32> = (4..=14).collect();
    let rep = box_count_dimension(&region, &exps).unwrap();
    let counts: Vec<u64> = rep.scales.iter().map(|s| s.count).collect();
    let matched = rep
        .matched_slope
        .map_or("n/a".to_string(), |s| format!("{s:.3}"));
    (
        check(
            (rep.slope - 0.5).abs() <= 0.15,
            format!(
                "slope {:.3} (target 0.5 +- 0.15), counts {counts:?}, monotone {}, matched-level slope {matched}",
                rep.slope, rep.monotone
            ),
        ),
        rep.monotone,
    )
}

fn criterion_11() -> Outcome {
    let a = IntegerMatrix::diag(&[2, 3]);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut below = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let x = random_rational_point(&mut rng, 2);
        let s = boshernitzan_statistic(&x, &a, 2.0, 10_000).unwrap();
        worst = worst.max(s.value);
        below += (s.value < 10.0) as u32;
    }
    check(below >= 950, format!("{below}/1000 starts below 10 (max {worst:.3})"))
}

fn main() {
    let budgets = [5.0, 1.0, 30.0, 30.0, 10.0, 30.0, 5.0, 5.0, 1.0, 60.0, 60.0];
    let runners: [fn() -> Outcome; 9] = [
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
        criterion_9,
    ];
    let mut statuses = Vec::new();
    let report = |i: usize, out: Outcome, took: Duration, status: Status| {
        println!(
            "criterion {:>2}: {} ({:.2} s, budget {} s) {}",
            i + 1,
            format!("{status:?}").to_uppercase(),
            took.as_secs_f64(),
            budgets[i],
            out.detail
        );
        status
    };
    for (i, run) in runners.iter().enumerate() {
        let t = Instant::now();
        let out = run();
        let took = t.elapsed();
        let status = if out.ok && took.as_secs_f64() <= budgets[i] {
            Status::Pass
        } else {
            Status::Fail
        };
        statuses.push(report(i, out, took, status));
    }
    let first_nine = statuses.iter().all(|&s| s == Status::Pass);
    let t = Instant::now();
    let (out, monotone) = criterion_10();
    let took = t.elapsed();
    let in_budget = took.as_secs_f64() <= budgets[9];
    let status = match (out.ok && in_budget, first_nine && monotone && in_budget) {
        (true, _) => Status::Pass,
        (false, true) => Status::Warn,
        (false, false) => Status::Fail,
    };
    statuses.push(report(9, out, took, status));
    let t = Instant::now();
    let out = criterion_11();
    let took = t.elapsed();
    let status = if out.ok && took.as_secs_f64() <= budgets[10] {
        Status::Pass
    } else {
        Status::Fail
    };
    statuses.push(report(10, out, took, status));
    let failed = statuses.iter().filter(|&&s| s == Status::Fail).count();
    println!("acceptance: {} of {} criteria failed", failed, statuses.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
