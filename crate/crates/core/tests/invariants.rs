use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use proptest::prelude::*;

use toral_recurrence::cantor_mass::{ball_mass, build_tree, select_levels};
use toral_recurrence::exact_linalg::smith_normal_form;
use toral_recurrence::periodic_lattice::{apply_map, enumerate_periodic, PeriodicLattice};
use toral_recurrence::spectrum_dim::{dim_theorem1, dim_theorem2};
use toral_recurrence::{Alpha, Exec, IntegerMatrix, RateFunction, Spectrum};

fn matrix(d: usize, range: i64) -> impl Strategy<Value = IntegerMatrix> {
    prop::collection::vec(-range..=range, d * d).prop_map(move |e| {
        let rows: Vec<Vec<i64>> = e.chunks(d).map(<[i64]>::to_vec).collect();
        IntegerMatrix::from_i64_rows(&rows).unwrap()
    })
}

fn any_matrix() -> impl Strategy<Value = IntegerMatrix> {
    (1usize..=3).prop_flat_map(|d| matrix(d, 5))
}

/// `A^n - I` invertible with a manageable periodic count, spectrum free of
/// zero and roots of unity.
fn periodic_case() -> impl Strategy<Value = (IntegerMatrix, u32)> {
    ((1usize..=2).prop_flat_map(|d| matrix(d, 4)), 1u32..=3).prop_filter("small nonzero H_n", |(a, n)| {
        let h = a.pow(*n).minus_identity().det().abs();
        !h.is_zero() && h <= BigInt::from(5_000) && PeriodicLattice::new(a, *n).is_ok()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn powers_add(a in any_matrix(), m in 0u32..5, n in 0u32..5) {
        prop_assert_eq!(&a.pow(m) * &a.pow(n), a.pow(m + n));
    }

    #[test]
    fn determinant_of_power(a in any_matrix(), n in 0u32..6) {
        prop_assert_eq!(a.pow(n).det(), num_traits::pow(a.det(), n as usize));
    }

    #[test]
    fn smith_form_reconstructs(m in any_matrix()) {
        prop_assume!(!m.det().is_zero());
        let snf = smith_normal_form(&m).unwrap();
        prop_assert_eq!(&(&snf.u * &snf.s) * &snf.v, m.clone());
        prop_assert!(snf.s.is_diagonal());
        let f = snf.invariant_factors();
        prop_assert!(f.iter().all(|s| s.is_positive()));
        prop_assert!(f.windows(2).all(|w| (&w[1] % &w[0]).is_zero()));
        let prod: BigInt = f.iter().product();
        prop_assert_eq!(prod, m.det().abs());
        prop_assert_eq!(snf.v.det().abs(), BigInt::one());
        prop_assert_eq!(snf.u.det().abs(), BigInt::one());
    }

    #[test]
    fn formulas_agree_above_threshold(
        vals in prop::collection::vec(2i64..50, 1..=6),
        stretch in 100i64..1000,
    ) {
        let spec = Spectrum::from_integers(&vals).unwrap();
        let lo = *vals.iter().min().unwrap();
        let hi = *vals.iter().max().unwrap();
        let alpha = Alpha::Log(BigRational::new((hi * stretch).into(), (lo * 100).into()));
        let t1 = dim_theorem1(&spec, &alpha).unwrap().value;
        let t2 = dim_theorem2(&spec, &alpha).unwrap().value;
        prop_assert!((t1 - t2).abs() <= 1e-12, "{} vs {}", t1, t2);
        prop_assert!(t1 > 0.0 && t1 <= vals.len() as f64 + 1e-12);
    }

    #[test]
    fn dimension_is_invariant_under_powers(
        vals in prop::collection::vec(2i64..50, 1..=6),
        num in 1i64..200,
        t in 2u32..=3,
    ) {
        let spec = Spectrum::from_integers(&vals).unwrap();
        let alpha = Alpha::Log(BigRational::new((num + 7).into(), 7.into()));
        let base = dim_theorem1(&spec, &alpha).unwrap().value;
        let scaled = dim_theorem1(&spec.powered(t), &alpha.scaled(t)).unwrap().value;
        prop_assert!((base - scaled).abs() <= 1e-10);
        let base2 = dim_theorem2(&spec, &alpha).unwrap().value;
        let scaled2 = dim_theorem2(&spec.powered(t), &alpha.scaled(t)).unwrap().value;
        prop_assert!((base2 - scaled2).abs() <= 1e-10);
    }

    #[test]
    fn dimension_decreases_in_alpha(vals in prop::collection::vec(2i64..50, 1..=4), a in 1i64..100, b in 1i64..100) {
        let spec = Spectrum::from_integers(&vals).unwrap();
        let (small, big) = (a.min(b), a.max(b));
        let lo = dim_theorem1(&spec, &Alpha::Log(BigRational::new((small + 3).into(), 3.into()))).unwrap().value;
        let hi = dim_theorem1(&spec, &Alpha::Log(BigRational::new((big + 3).into(), 3.into()))).unwrap().value;
        prop_assert!(hi <= lo + 1e-12);
    }

    #[test]
    fn periodic_sets_are_invariant((a, n) in periodic_case()) {
        let set = enumerate_periodic(&a, n, &BigInt::from(10_000)).unwrap();
        prop_assert_eq!(BigInt::from(set.len()), a.pow(n).minus_identity().det().abs());
        let q = set.denom();
        for num in set.iter() {
            prop_assert!(set.contains(&apply_map(&a, num, q)));
        }
    }

    #[test]
    fn sequential_and_parallel_counts_match((a, n) in periodic_case(), shift in 0u64..7) {
        let lattice = PeriodicLattice::new(&a, n).unwrap();
        let pred = |num: &[u64]| num.iter().sum::<u64>() % 7 == shift;
        prop_assert_eq!(
            lattice.count_where(Exec::Sequential, pred),
            lattice.count_where(Exec::Parallel, pred)
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ball_mass_is_monotone_in_radius(x in 0.0f64..1.0, r1 in 0.001f64..0.5, r2 in 0.001f64..0.5) {
        let a = IntegerMatrix::diag(&[2]);
        let spec = Spectrum::from_integers(&[2]).unwrap();
        let psi = RateFunction::exponential(Alpha::ln(2)).unwrap();
        let seq = select_levels(&spec, &psi, 2, 0.5).unwrap();
        let tree = build_tree(&a, &psi, &seq, 10_000).unwrap();
        let (lo, hi) = (r1.min(r2), r1.max(r2));
        let (m_lo, _) = ball_mass(&tree, &[x], lo);
        let (m_hi, _) = ball_mass(&tree, &[x], hi);
        prop_assert!(m_lo <= m_hi);
        prop_assert!(m_hi <= BigRational::one());
        prop_assert!(m_lo.to_f64().unwrap() >= 0.0);
    }
}

#[test]
fn origin_is_periodic_of_every_period() {
    for a in [IntegerMatrix::diag(&[2]), IntegerMatrix::from_i64_rows(&[[3, 1], [1, 2]]).unwrap()] {
        for n in 1..=4 {
            let set = enumerate_periodic(&a, n, &BigInt::from(100_000)).unwrap();
            assert!(set.contains(&vec![0; a.dim()]));
            assert!(set.point(0).iter().all(Zero::is_zero));
        }
    }
}
