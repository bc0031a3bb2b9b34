//! Per-field scoring kernels.

use serde::{Deserialize, Serialize};

use super::ledger::Ledger;
use super::params::ScoreParams;
use super::ranges::ReferenceTable;
use crate::report::{approx_eq_rel, CmrRecord, FieldId, FieldValue, RECORD_REL_TOL};

/// Plausibility of `v` under the field's reference distribution:
/// `exp(-½((v-μ)/(ασ))²)`, maximized over the available sex rows.
/// Null values and fields without a reference row get the default score.
pub fn distribution_score(
    field: FieldId,
    v: FieldValue,
    ranges: &ReferenceTable,
    p: &ScoreParams,
) -> f64 {
    let Some(x) = v.value() else {
        return p.default_score;
    };
    ranges
        .for_field(field)
        .map(|r| {
            let z = (x - r.mu) / (p.alpha * r.sigma);
            (-0.5 * z * z).exp()
        })
        .reduce(f64::max)
        .unwrap_or(p.default_score)
}

/// Agreement between two values: 1 when both are null, 0.5 when exactly
/// one is, otherwise `exp(-β·|a-b|/(|a|+|b|))` (1 when both are zero).
/// The absolute values only matter for a negative formula result.
pub fn pair_score(a: FieldValue, b: FieldValue, beta: f64) -> f64 {
    match (a, b) {
        (FieldValue::Null, FieldValue::Null) => 1.0,
        (FieldValue::Null, _) | (_, FieldValue::Null) => 0.5,
        (FieldValue::Present(x), FieldValue::Present(y)) => {
            let sum = x.abs() + y.abs();
            if sum == 0.0 {
                1.0
            } else {
                (-beta * (x - y).abs() / sum).exp()
            }
        }
    }
}

/// Mean pairwise agreement over all sample pairs (three pairs for three
/// samples). A single sample is perfectly stable.
pub fn stability_score(samples: &[FieldValue], p: &ScoreParams) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            total += pair_score(samples[i], samples[j], p.beta);
            pairs += 1;
        }
    }
    if pairs == 0 {
        1.0
    } else {
        total / pairs as f64
    }
}

/// Chooses the final value from repeated samples.
///
/// A value (null included) shared by a strict majority wins. Otherwise the
/// median of the present values is returned (the mean of the middle two for
/// an even count). Present values compare equal within the record
/// tolerance. The result does not depend on input order.
pub fn vote(samples: &[FieldValue]) -> FieldValue {
    let n = samples.len();
    let nulls = samples.iter().filter(|v| v.is_null()).count();
    if nulls * 2 > n {
        return FieldValue::Null;
    }
    let mut present: Vec<f64> = samples.iter().filter_map(|v| v.value()).collect();
    if present.is_empty() {
        return FieldValue::Null;
    }
    present.sort_by(f64::total_cmp);

    // Equal values are contiguous after sorting; a group is represented by
    // its smallest member.
    let mut best: Option<(usize, f64)> = None;
    let mut start = 0;
    while start < present.len() {
        let mut end = start + 1;
        while end < present.len() && approx_eq_rel(present[start], present[end], RECORD_REL_TOL) {
            end += 1;
        }
        let count = end - start;
        if best.is_none_or(|(c, _)| count > c) {
            best = Some((count, present[start]));
        }
        start = end;
    }
    if let Some((count, v)) = best {
        if count * 2 > n {
            return FieldValue::Present(v);
        }
    }

    let m = present.len();
    let median = if m % 2 == 1 {
        present[m / 2]
    } else {
        (present[m / 2 - 1] + present[m / 2]) / 2.0
    };
    FieldValue::Present(median)
}

/// One evaluable formula applied to a record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormulaCheck {
    pub id: String,
    pub lhs: FieldId,
    pub operands: Vec<FieldId>,
    pub lhs_value: f64,
    pub rhs_value: f64,
    pub score: f64,
}

/// Every formula whose lhs and operands are all present, with its
/// agreement score.
pub fn formula_checks(record: &CmrRecord, ledger: &Ledger, p: &ScoreParams) -> Vec<FormulaCheck> {
    ledger
        .formulas()
        .iter()
        .filter_map(|f| {
            let (lhs, rhs) = f.evaluate(record)?;
            Some(FormulaCheck {
                id: f.id.clone(),
                lhs: f.lhs,
                operands: f.operands.clone(),
                lhs_value: lhs,
                rhs_value: rhs,
                score: pair_score(FieldValue::Present(lhs), FieldValue::Present(rhs), p.beta),
            })
        })
        .collect()
}

/// Per-field consistency score, indexed by [`FieldId::index`].
///
/// Each evaluable formula contributes its score to its lhs and to every
/// operand; a field's score is the mean of its contributions, or the
/// default score when it has none.
pub fn consistency_score(record: &CmrRecord, ledger: &Ledger, p: &ScoreParams) -> [f64; FieldId::COUNT] {
    let mut sum = [0.0; FieldId::COUNT];
    let mut count = [0usize; FieldId::COUNT];
    for check in formula_checks(record, ledger, p) {
        for f in std::iter::once(check.lhs).chain(check.operands.iter().copied()) {
            sum[f.index()] += check.score;
            count[f.index()] += 1;
        }
    }
    std::array::from_fn(|i| {
        if count[i] == 0 {
            p.default_score
        } else {
            sum[i] / count[i] as f64
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confidence::ranges::{ReferenceRange, Sex};
    use proptest::prelude::*;

    fn p() -> ScoreParams {
        ScoreParams::default()
    }

    fn one_row(mu: f64, sigma: f64) -> ReferenceTable {
        ReferenceTable::new([ReferenceRange { field: FieldId::Lvef, sex: Sex::Male, mu, sigma }]).unwrap()
    }

    fn present(v: f64) -> FieldValue {
        FieldValue::Present(v)
    }

    #[test]
    fn distribution_at_mean_and_one_alpha_sigma() {
        let t = one_row(65.0, 6.0);
        assert_eq!(distribution_score(FieldId::Lvef, present(65.0), &t, &p()), 1.0);
        let s = distribution_score(FieldId::Lvef, present(65.0 + 6.0 * 6.0), &t, &p());
        assert!((s - (-0.5f64).exp()).abs() < 1e-12);
        assert!((s - 0.606531).abs() < 1e-6);
    }

    #[test]
    fn distribution_defaults() {
        let t = ReferenceTable::builtin();
        assert_eq!(distribution_score(FieldId::Ral2ch, present(7.0), &t, &p()), 0.7);
        assert_eq!(distribution_score(FieldId::Lvef, FieldValue::Null, &t, &p()), 0.7);
    }

    #[test]
    fn distribution_takes_higher_sex() {
        let t = ReferenceTable::new([
            ReferenceRange { field: FieldId::Lvef, sex: Sex::Male, mu: 50.0, sigma: 5.0 },
            ReferenceRange { field: FieldId::Lvef, sex: Sex::Female, mu: 70.0, sigma: 5.0 },
        ])
        .unwrap();
        assert_eq!(distribution_score(FieldId::Lvef, present(70.0), &t, &p()), 1.0);
        assert_eq!(distribution_score(FieldId::Lvef, present(50.0), &t, &p()), 1.0);
    }

    #[test]
    fn pair_rules() {
        assert_eq!(pair_score(FieldValue::Null, FieldValue::Null, 2.0), 1.0);
        assert_eq!(pair_score(FieldValue::Null, present(3.0), 2.0), 0.5);
        assert_eq!(pair_score(present(3.0), FieldValue::Null, 2.0), 0.5);
        assert_eq!(pair_score(present(60.0), present(60.0), 2.0), 1.0);
        assert_eq!(pair_score(present(0.0), present(0.0), 2.0), 1.0);
        let s = pair_score(present(60.0), present(40.0), 2.0);
        assert!((s - (-0.4f64).exp()).abs() < 1e-15);
        assert!((s - 0.670320).abs() < 1e-6);
    }

    #[test]
    fn negative_formula_result_stays_bounded() {
        // e.g. stroke volume recomputed from a swapped EDV/ESV pair
        let s = pair_score(present(80.0), present(-20.0), 2.0);
        assert!((s - (-2.0f64).exp()).abs() < 1e-15);
        assert_eq!(pair_score(present(-5.0), present(-5.0), 2.0), 1.0);
        assert!((0.0..=1.0).contains(&pair_score(present(1.0), present(-1.0), 2.0)));
    }

    #[test]
    fn stability_examples() {
        assert_eq!(stability_score(&[present(85.0); 3], &p()), 1.0);
        assert_eq!(stability_score(&[FieldValue::Null; 3], &p()), 1.0);
        let s = stability_score(&[present(85.0), present(85.0), FieldValue::Null], &p());
        assert!((s - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn vote_examples() {
        assert_eq!(vote(&[present(60.0), present(60.0), present(62.0)]), present(60.0));
        assert_eq!(vote(&[FieldValue::Null, FieldValue::Null, present(60.0)]), FieldValue::Null);
        assert_eq!(vote(&[present(60.0), present(62.0), present(64.0)]), present(62.0));
        assert_eq!(vote(&[present(60.0), FieldValue::Null, present(64.0)]), present(62.0));
        assert_eq!(vote(&[present(60.0), FieldValue::Null, present(60.0)]), present(60.0));
        assert_eq!(vote(&[FieldValue::Null; 3]), FieldValue::Null);
    }

    /// Brute-force vote: tally every candidate, including null, by exact
    /// equality over all inputs; majority wins, else median of presents.
    fn vote_oracle(xs: [Option<u8>; 3]) -> Option<f64> {
        for cand in xs {
            let c = xs.iter().filter(|x| **x == cand).count();
            if c >= 2 {
                return cand.map(f64::from);
            }
        }
        let mut ps: Vec<f64> = xs.iter().flatten().map(|x| f64::from(*x)).collect();
        ps.sort_by(f64::total_cmp);
        match ps.len() {
            3 => Some(ps[1]),
            2 => Some((ps[0] + ps[1]) / 2.0),
            _ => unreachable!("two or more nulls always form a majority"),
        }
    }

    #[test]
    fn vote_matches_oracle_exhaustively() {
        let domain: Vec<Option<u8>> = std::iter::once(None).chain((0..5).map(Some)).collect();
        for &a in &domain {
            for &b in &domain {
                for &c in &domain {
                    let got = vote(&[a, b, c].map(|x| x.map(f64::from).into()));
                    assert_eq!(got.value(), vote_oracle([a, b, c]), "{a:?} {b:?} {c:?}");
                }
            }
        }
    }

    #[test]
    fn consistency_f3_examples() {
        let ledger = Ledger::builtin();
        let r = CmrRecord::empty()
            .with(FieldId::Lvedv, 150.0)
            .with(FieldId::Lvesv, 60.0)
            .with(FieldId::Lvsv, 90.0)
            .with(FieldId::Lvef, 60.0);
        let cons = consistency_score(&r, &ledger, &p());
        assert_eq!(cons[FieldId::Lvef.index()], 1.0);
        assert_eq!(cons[FieldId::Lvsv.index()], 1.0);
        assert_eq!(cons[FieldId::Sbp.index()], 0.7);
        assert_eq!(cons[FieldId::Bsa.index()], 0.7);

        let r55 = r.clone().with(FieldId::Lvef, 55.0);
        let cons = consistency_score(&r55, &ledger, &p());
        let f3 = (-2.0f64 * 5.0 / 115.0).exp();
        assert!((f3 - 0.916717).abs() < 1e-6);
        assert!((cons[FieldId::Lvef.index()] - f3).abs() < 1e-15);
        // LVSV and LVEDV also sit in F1, which still agrees exactly.
        assert!((cons[FieldId::Lvsv.index()] - (1.0 + f3) / 2.0).abs() < 1e-15);
        assert!((cons[FieldId::Lvedv.index()] - (1.0 + f3) / 2.0).abs() < 1e-15);
        assert_eq!(cons[FieldId::Lvesv.index()], 1.0);
    }

    fn fv() -> impl Strategy<Value = FieldValue> {
        prop_oneof![Just(FieldValue::Null), (0.0f64..500.0).prop_map(FieldValue::Present)]
    }

    proptest! {
        #[test]
        fn pair_score_bounded_and_symmetric(a in fv(), b in fv(), beta in 0.1f64..5.0) {
            let s = pair_score(a, b, beta);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert_eq!(s, pair_score(b, a, beta));
            if let FieldValue::Present(_) = a {
                prop_assert_eq!(pair_score(a, a, beta), 1.0);
            }
        }

        #[test]
        fn pair_score_decreases_with_gap(sum in 1.0f64..1000.0, d1 in 0.0f64..1.0, d2 in 0.0f64..1.0) {
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let at = |d: f64| {
                let gap = d * sum;
                pair_score(FieldValue::Present((sum + gap) / 2.0), FieldValue::Present((sum - gap) / 2.0), 2.0)
            };
            prop_assert!(at(lo) >= at(hi));
        }

        #[test]
        fn distribution_symmetric_and_peaked(mu in 1.0f64..200.0, sigma in 0.1f64..50.0, d in 0.0f64..100.0) {
            let t = one_row(mu, sigma);
            let up = distribution_score(FieldId::Lvef, FieldValue::Present(mu + d), &t, &p());
            let down = distribution_score(FieldId::Lvef, FieldValue::Present(mu - d), &t, &p());
            prop_assert!((up - down).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&up));
        }

        #[test]
        fn two_sex_max_is_order_invariant(m1 in 1.0f64..100.0, m2 in 1.0f64..100.0, v in 0.0f64..150.0) {
            let rows = [
                ReferenceRange { field: FieldId::Lvef, sex: Sex::Male, mu: m1, sigma: 5.0 },
                ReferenceRange { field: FieldId::Lvef, sex: Sex::Female, mu: m2, sigma: 4.0 },
            ];
            let a = ReferenceTable::new(rows).unwrap();
            let b = ReferenceTable::new([rows[1], rows[0]]).unwrap();
            prop_assert_eq!(
                distribution_score(FieldId::Lvef, FieldValue::Present(v), &a, &p()),
                distribution_score(FieldId::Lvef, FieldValue::Present(v), &b, &p())
            );
        }

        #[test]
        fn vote_is_permutation_invariant(a in fv(), b in fv(), c in fv()) {
            let v = vote(&[a, b, c]);
            for perm in [[a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
                prop_assert_eq!(vote(&perm), v);
            }
        }

        #[test]
        fn ejection_fraction_check_is_scale_free(
            edv in 50.0f64..300.0, ef in 10.0f64..80.0, wrong in 0.5f64..1.5, k in 0.1f64..10.0
        ) {
            let ledger = Ledger::builtin();
            let esv = edv * (1.0 - ef / 100.0);
            let build = |s: f64| CmrRecord::empty()
                .with(FieldId::Lvedv, edv * s)
                .with(FieldId::Lvesv, esv * s)
                .with(FieldId::Lvsv, (edv - esv) * s)
                .with(FieldId::Lvef, ef * wrong);
            let f3 = |r: &CmrRecord| formula_checks(r, &ledger, &p())
                .into_iter().find(|c| c.id == "F3").unwrap().score;
            prop_assert!((f3(&build(1.0)) - f3(&build(k))).abs() < 1e-9);
        }
    }
}
