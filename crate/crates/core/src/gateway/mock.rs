//! Offline stand-in for an inference endpoint.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::client::{CompletionBackend, CompletionRequest, TransportError};
use super::prompt::{report_from_prompt, requested_key};
use crate::report::{serialize_record, CmrRecord, FieldId, FieldValue, CATEGORY_KEY};
use crate::synth::rule_extract;

/// Perturbations a mock applies to each answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseProfile {
    /// Fields always returned as null.
    pub drop_fields: Vec<FieldId>,
    /// Per-field probability that a present value is returned as null.
    pub dropout_rate: f64,
    /// Per-field probability that a present value is perturbed.
    pub jitter_rate: f64,
    /// Largest relative perturbation, e.g. 0.1 for ±10%.
    pub jitter_max: f64,
    /// Probability that two present values trade places.
    pub swap_rate: f64,
    /// Probability that the whole answer is cut off mid-object.
    pub truncation_rate: f64,
    pub seed: u64,
}

impl Default for NoiseProfile {
    fn default() -> Self {
        NoiseProfile {
            drop_fields: Vec::new(),
            dropout_rate: 0.0,
            jitter_rate: 0.0,
            jitter_max: 0.1,
            swap_rate: 0.0,
            truncation_rate: 0.0,
            seed: 0,
        }
    }
}

impl NoiseProfile {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn truncating() -> Self {
        NoiseProfile { truncation_rate: 1.0, ..Self::default() }
    }

    pub fn dropping(fields: impl IntoIterator<Item = FieldId>) -> Self {
        NoiseProfile { drop_fields: fields.into_iter().collect(), ..Self::default() }
    }

    pub fn is_none(&self) -> bool {
        self.drop_fields.is_empty()
            && self.dropout_rate == 0.0
            && self.jitter_rate == 0.0
            && self.swap_rate == 0.0
            && self.truncation_rate == 0.0
    }
}

/// SplitMix64 finalizer; spreads nearby seeds over the whole state space.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a, used to derive a stable per-report stream from its text.
pub fn text_seed(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// Serializes `gold`, perturbed by `noise`. Deterministic in
/// `(gold, noise, stream)`.
pub fn mock_extract(gold: &CmrRecord, noise: &NoiseProfile, stream: u64) -> String {
    if noise.is_none() {
        return serialize_record(gold);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(noise.seed, stream));
    let truncate = rng.random::<f64>() < noise.truncation_rate;

    let mut rec = gold.clone();
    for &f in &noise.drop_fields {
        rec.set(f, FieldValue::Null);
    }
    for f in FieldId::ALL {
        // Fixed draws per field keep streams aligned across profiles.
        let (u_drop, u_jit, mag): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
        let FieldValue::Present(v) = rec.get(f) else { continue };
        if u_drop < noise.dropout_rate {
            rec.set(f, FieldValue::Null);
        } else if u_jit < noise.jitter_rate {
            let rel = (2.0 * mag - 1.0) * noise.jitter_max;
            rec.set(f, FieldValue::Present(v * (1.0 + rel)));
        }
    }
    if rng.random::<f64>() < noise.swap_rate {
        let present: Vec<FieldId> = rec.iter().filter(|(_, v)| !v.is_null()).map(|(f, _)| f).collect();
        if present.len() >= 2 {
            let i = rng.random_range(0..present.len());
            let mut j = rng.random_range(0..present.len() - 1);
            if j >= i {
                j += 1;
            }
            let (a, b) = (rec.get(present[i]), rec.get(present[j]));
            rec.set(present[i], b);
            rec.set(present[j], a);
        }
    }

    let text = serialize_record(&rec);
    if truncate {
        text[..text.len() / 2].to_string()
    } else {
        text
    }
}

/// Where the mock's answers come from.
#[derive(Debug, Clone, PartialEq)]
pub enum MockSource {
    /// Re-extract the report embedded in the prompt with the template rules.
    RuleBased,
    /// Echo a fixed record regardless of the prompt.
    Gold(CmrRecord),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockBackend {
    pub source: MockSource,
    pub noise: NoiseProfile,
}

impl MockBackend {
    pub fn rule_based(noise: NoiseProfile) -> Self {
        MockBackend { source: MockSource::RuleBased, noise }
    }

    pub fn gold(record: CmrRecord, noise: NoiseProfile) -> Self {
        MockBackend { source: MockSource::Gold(record), noise }
    }
}

impl CompletionBackend for MockBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, TransportError> {
        let report = report_from_prompt(&request.prompt).unwrap_or("");
        let gold = match &self.source {
            MockSource::RuleBased => rule_extract(report),
            MockSource::Gold(r) => r.clone(),
        };
        let stream = mix_seed(text_seed(report), request.sample_index as u64);
        let answer = mock_extract(&gold, &self.noise, stream);

        // Per-field prompts get the single requested value.
        match requested_key(&request.prompt) {
            None => Ok(answer),
            Some(key) => {
                let Ok(rec) = crate::report::parse_record(&answer) else {
                    return Ok(answer);
                };
                if key == CATEGORY_KEY {
                    return Ok(match rec.category {
                        crate::report::DiagnosisCategory::Unspecified => "null".into(),
                        c => c.as_str().into(),
                    });
                }
                let field: FieldId = key
                    .parse()
                    .map_err(|_| TransportError::BadResponse(format!("unknown key {key}")))?;
                Ok(rec.get(field).to_string())
            }
        }
    }
}
