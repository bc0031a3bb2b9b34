use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::confidence::{Ledger, ReferenceTable, Sex};
use crate::report::{CmrRecord, DiagnosisCategory, FieldId, FieldValue};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    /// Per-field probability that a generated value is left out of the
    /// report.
    pub null_rate: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { null_rate: 0.1 }
    }
}

/// Independently sampled quantities and the decimals they are reported to.
const BASE_FIELDS: [(FieldId, i32); 22] = [
    (FieldId::Height, 0),
    (FieldId::Weight, 1),
    (FieldId::Sbp, 0),
    (FieldId::Dbp, 0),
    (FieldId::Bhr, 0),
    (FieldId::Lvedv, 1),
    (FieldId::Lvmass, 1),
    (FieldId::Rvedv, 1),
    (FieldId::Rvmass, 1),
    (FieldId::Lvedd, 0),
    (FieldId::Rvedd, 0),
    (FieldId::Lvesd, 0),
    (FieldId::Rvesd, 0),
    (FieldId::Lvawt, 1),
    (FieldId::Lviwt, 1),
    (FieldId::Laa2ch, 1),
    (FieldId::Laa4ch, 1),
    (FieldId::Lal2ch, 1),
    (FieldId::Lal4ch, 1),
    (FieldId::Raa4ch, 1),
    (FieldId::Ral4ch, 1),
    (FieldId::Hct, 2),
];

/// Multiplier on the reference mean of a sampled quantity.
fn shift(category: DiagnosisCategory, field: FieldId) -> f64 {
    use DiagnosisCategory::*;
    use FieldId::*;
    match (category, field) {
        (Dcm, Lvedv) => 1.5,
        (Dcm, Lvedd) => 1.2,
        (Dcm, Lvesd) => 1.4,
        (Dcm, Lvef) => 0.55,
        (Hcm, Lvawt) => 1.8,
        (Hcm, Lviwt) => 1.4,
        (Hcm, Lvmass) => 1.5,
        (Hcm, Lvef) => 1.08,
        (Pah, Rvedv) => 1.3,
        (Pah, Rvmass) => 1.6,
        (Pah, Rvedd) => 1.2,
        (Pah, Rvef) => 0.7,
        (Pah, Raa4ch) => 1.3,
        (Ebstein, Rvedv) => 1.6,
        (Ebstein, Rvedd) => 1.3,
        (Ebstein, Raa4ch) => 1.7,
        (Ebstein, Ral4ch) => 1.2,
        (Ebstein, Rvef) => 0.8,
        (Cad, Lvef) => 0.8,
        (Cad, Ecv) => 1.15,
        _ => 1.0,
    }
}

fn round_to(x: f64, decimals: i32) -> f64 {
    let k = 10f64.powi(decimals);
    (x * k).round() / k
}

/// Draws uniformly from the shifted `mu ± 2 sigma` window of `range_field`.
fn draw(
    rng: &mut ChaCha8Rng,
    ranges: &ReferenceTable,
    range_field: FieldId,
    sex: Sex,
    mult: f64,
) -> f64 {
    let r = ranges
        .get(range_field, sex)
        .unwrap_or_else(|| panic!("reference table has no {range_field} row for sampling"));
    let (mu, sigma) = (r.mu * mult, r.sigma * mult);
    let lo = (mu - 2.0 * sigma).max(0.0);
    rng.random_range(lo..=mu + 2.0 * sigma)
}

/// A physiologically self-consistent record for `category`.
///
/// Base quantities are drawn from the reference table, then every field
/// with a formula is derived through `ledger`, so each evaluable formula
/// holds exactly. Finally fields are nulled at `cfg.null_rate`.
pub fn sample_gold(
    seed: u64,
    category: DiagnosisCategory,
    ranges: &ReferenceTable,
    ledger: &Ledger,
    cfg: &GenConfig,
) -> CmrRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sex = if rng.random::<bool>() { Sex::Male } else { Sex::Female };
    let mut rec = CmrRecord::empty();
    rec.category = category;

    for (field, decimals) in BASE_FIELDS {
        let v = draw(&mut rng, ranges, field, sex, shift(category, field));
        rec.set(field, FieldValue::Present(round_to(v, decimals)));
    }
    // No reference rows for the two-chamber right atrium; the four-chamber
    // rows stand in.
    let raa2 = draw(&mut rng, ranges, FieldId::Raa4ch, sex, shift(category, FieldId::Raa4ch));
    let ral2 = draw(&mut rng, ranges, FieldId::Ral4ch, sex, shift(category, FieldId::Ral4ch));
    rec.set(FieldId::Raa2ch, FieldValue::Present(round_to(raa2, 1)));
    rec.set(FieldId::Ral2ch, FieldValue::Present(round_to(ral2, 1)));

    // End-systolic volumes follow from an ejection-fraction target.
    for (edv, esv, ef) in [
        (FieldId::Lvedv, FieldId::Lvesv, FieldId::Lvef),
        (FieldId::Rvedv, FieldId::Rvesv, FieldId::Rvef),
    ] {
        let target = draw(&mut rng, ranges, ef, sex, shift(category, ef)).clamp(10.0, 85.0);
        let edv_v = rec.get(edv).value().expect("sampled above");
        rec.set(esv, FieldValue::Present(round_to(edv_v * (1.0 - target / 100.0), 1)));
    }

    // T1 times: post-contrast myocardium solved from an ECV target.
    let pre_m = round_to(draw(&mut rng, ranges, FieldId::Pret1m, sex, 1.0), 0);
    let pre_b = round_to(draw(&mut rng, ranges, FieldId::Pret1b, sex, 1.0), 0);
    let post_b = round_to(draw(&mut rng, ranges, FieldId::Postt1b, sex, 1.0), 0);
    let ecv = draw(&mut rng, ranges, FieldId::Ecv, sex, shift(category, FieldId::Ecv));
    let hct = rec.get(FieldId::Hct).value().expect("sampled above");
    let inv_post_m = 1.0 / pre_m + ecv / (100.0 * (1.0 - hct)) * (1.0 / post_b - 1.0 / pre_b);
    rec.set(FieldId::Pret1m, FieldValue::Present(pre_m));
    rec.set(FieldId::Pret1b, FieldValue::Present(pre_b));
    rec.set(FieldId::Postt1b, FieldValue::Present(post_b));
    rec.set(FieldId::Postt1m, FieldValue::Present(round_to(1.0 / inv_post_m, 0)));

    ledger.derive_missing(&mut rec);

    for f in FieldId::ALL {
        if rng.random::<f64>() < cfg.null_rate {
            rec.set(f, FieldValue::Null);
        }
    }
    rec
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confidence::{consistency_score, formula_checks, ScoreParams};
    use crate::report::check_bounds;

    fn gen(seed: u64, cat: DiagnosisCategory, null_rate: f64) -> CmrRecord {
        sample_gold(seed, cat, &ReferenceTable::builtin(), &Ledger::builtin(), &GenConfig { null_rate })
    }

    #[test]
    fn complete_record_without_nulls() {
        for seed in 0..50 {
            let r = gen(seed, DiagnosisCategory::Dcm, 0.0);
            assert_eq!(r.present_count(), 52, "seed {seed}");
            assert_eq!(r.category, DiagnosisCategory::Dcm);
            for (f, v) in r.iter() {
                check_bounds(f, v.value().unwrap()).unwrap();
            }
        }
    }

    #[test]
    fn ef_identity_holds_exactly() {
        let r = gen(3, DiagnosisCategory::Unspecified, 0.0);
        let (sv, edv) = (r[FieldId::Lvsv].value().unwrap(), r[FieldId::Lvedv].value().unwrap());
        assert_eq!(r[FieldId::Lvef].value().unwrap(), sv / edv * 100.0);
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(gen(11, DiagnosisCategory::Pah, 0.2), gen(11, DiagnosisCategory::Pah, 0.2));
        assert_ne!(gen(11, DiagnosisCategory::Pah, 0.2), gen(12, DiagnosisCategory::Pah, 0.2));
    }

    #[test]
    fn every_evaluable_formula_is_exact() {
        let ledger = Ledger::builtin();
        let p = ScoreParams::default();
        for seed in 0..100 {
            let r = gen(seed, DiagnosisCategory::ALL[seed as usize % 6], 0.15);
            for c in formula_checks(&r, &ledger, &p) {
                assert_eq!(c.score, 1.0, "{} seed {seed}", c.id);
            }
            let cons = consistency_score(&r, &ledger, &p);
            assert!(cons.iter().all(|&c| c == 1.0 || c == 0.7));
        }
    }

    #[test]
    fn null_rate_applies() {
        let nulls: usize = (0..200).map(|s| 52 - gen(s, DiagnosisCategory::Cad, 0.25).present_count()).sum();
        let rate = nulls as f64 / (200.0 * 52.0);
        assert!((rate - 0.25).abs() < 0.03, "{rate}");
    }

    #[test]
    fn category_shifts_means() {
        let mean = |cat| {
            (0..200).map(|s| gen(s, cat, 0.0)[FieldId::Lvedv].value().unwrap()).sum::<f64>() / 200.0
        };
        assert!(mean(DiagnosisCategory::Dcm) > 1.3 * mean(DiagnosisCategory::Unspecified));
    }
}
