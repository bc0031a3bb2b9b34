use serde::{Deserialize, Serialize};

use super::client::{record_schema, CompletionBackend, CompletionRequest, PromptMode, TransportError};
use super::prompt::{build_category_prompt, build_field_prompt, build_prompt, strip_code_fence};
use crate::report::{
    field_specs, normalize_value, parse_record, CmrRecord, DiagnosisCategory, FieldId, ParseError,
};

/// The outcome of sampling one report several times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub report_id: String,
    pub temperature: f64,
    #[serde(with = "attempts_serde")]
    pub attempts: Vec<Result<CmrRecord, ParseError>>,
    /// Raw model output per attempt, kept for review of unparseable answers.
    #[serde(default)]
    pub raw: Vec<String>,
}

impl SampleSet {
    pub fn parsed(&self) -> impl Iterator<Item = &CmrRecord> {
        self.attempts.iter().filter_map(|a| a.as_ref().ok())
    }

    pub fn failures(&self) -> usize {
        self.attempts.iter().filter(|a| a.is_err()).count()
    }
}

mod attempts_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Ok { record: CmrRecord },
        Err { error: ParseError },
    }

    pub fn serialize<S: Serializer>(
        attempts: &[Result<CmrRecord, ParseError>],
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let reprs: Vec<Repr> = attempts
            .iter()
            .map(|a| match a {
                Ok(r) => Repr::Ok { record: r.clone() },
                Err(e) => Repr::Err { error: e.clone() },
            })
            .collect();
        reprs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<Vec<Result<CmrRecord, ParseError>>, D::Error> {
        Ok(Vec::<Repr>::deserialize(d)?
            .into_iter()
            .map(|r| match r {
                Repr::Ok { record } => Ok(record),
                Repr::Err { error } => Err(error),
            })
            .collect())
    }
}

/// Sampling settings for [`extract_sampled`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingConfig {
    pub n_samples: usize,
    pub temperature: f64,
    pub prompt_mode: PromptMode,
    pub structured: bool,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            n_samples: 3,
            temperature: 0.3,
            prompt_mode: PromptMode::WholeReport,
            structured: false,
        }
    }
}

/// Requests `n_samples` independent completions for an already scrubbed
/// report and parses each. The requests run concurrently. A parse failure
/// is recorded for its attempt and never aborts the set; a transport
/// failure does.
pub fn extract_sampled(
    report_id: &str,
    report_text: &str,
    backend: &dyn CompletionBackend,
    cfg: &SamplingConfig,
) -> Result<SampleSet, TransportError> {
    let outcomes: Vec<Result<(Result<CmrRecord, ParseError>, String), TransportError>> =
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..cfg.n_samples)
                .map(|i| scope.spawn(move || one_sample(report_text, backend, cfg, i)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("sampling thread panicked"))
                .collect()
        });

    let mut attempts = Vec::with_capacity(cfg.n_samples);
    let mut raw = Vec::with_capacity(cfg.n_samples);
    for o in outcomes {
        let (parsed, text) = o?;
        attempts.push(parsed);
        raw.push(text);
    }
    Ok(SampleSet {
        report_id: report_id.to_string(),
        temperature: cfg.temperature,
        attempts,
        raw,
    })
}

fn one_sample(
    report_text: &str,
    backend: &dyn CompletionBackend,
    cfg: &SamplingConfig,
    index: usize,
) -> Result<(Result<CmrRecord, ParseError>, String), TransportError> {
    let request = |prompt: String, schema: Option<serde_json::Value>| CompletionRequest {
        prompt,
        temperature: cfg.temperature,
        sample_index: index,
        schema,
    };
    match cfg.prompt_mode {
        PromptMode::WholeReport => {
            let schema = cfg.structured.then(record_schema);
            let text = backend.complete(&request(build_prompt(report_text, field_specs()), schema))?;
            Ok((parse_record(strip_code_fence(&text)), text))
        }
        PromptMode::PerField => {
            let mut record = CmrRecord::empty();
            let mut transcript = Vec::with_capacity(FieldId::COUNT + 1);
            let mut failure = None;
            for spec in field_specs() {
                let text = backend.complete(&request(build_field_prompt(report_text, spec), None))?;
                match normalize_value(spec.id, strip_code_fence(&text).trim_matches('"')) {
                    Ok(v) => record.set(spec.id, v),
                    Err(e) => {
                        failure.get_or_insert(ParseError::Invalid {
                            message: format!("{}: {e}", spec.id),
                        });
                    }
                }
                transcript.push(format!("{}: {}", spec.id, text.trim()));
            }
            let text = backend.complete(&request(build_category_prompt(report_text), None))?;
            let answer = strip_code_fence(&text).trim_matches('"');
            record.category = if answer.eq_ignore_ascii_case("null") || answer.is_empty() {
                DiagnosisCategory::Unspecified
            } else {
                answer.parse().unwrap_or_else(|_| {
                    failure.get_or_insert(ParseError::Invalid {
                        message: format!("unknown category `{answer}`"),
                    });
                    DiagnosisCategory::Unspecified
                })
            };
            transcript.push(format!("CATEGORY: {}", text.trim()));
            let raw = transcript.join("\n");
            Ok((failure.map_or(Ok(record), Err), raw))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::mock::{MockBackend, NoiseProfile};
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn gold() -> CmrRecord {
        let mut r = CmrRecord::empty()
            .with(FieldId::Lvef, 60.0)
            .with(FieldId::Lvedv, 150.0)
            .with(FieldId::Hct, 0.41);
        r.category = DiagnosisCategory::Dcm;
        r
    }

    #[test]
    fn constant_mock_gives_three_identical_records() {
        let backend = MockBackend::gold(gold(), NoiseProfile::none());
        let set = extract_sampled("r1", "text", &backend, &SamplingConfig::default()).unwrap();
        assert_eq!(set.attempts.len(), 3);
        assert_eq!(set.temperature, 0.3);
        assert!(set.attempts.iter().all(|a| a.as_ref() == Ok(&gold())));
    }

    /// Returns malformed text on the second sample only.
    struct FaultOnSecond(CmrRecord);

    impl CompletionBackend for FaultOnSecond {
        fn complete(&self, req: &CompletionRequest) -> Result<String, TransportError> {
            if req.sample_index == 1 {
                Ok("{\"HEIGHT\": 17".into())
            } else {
                Ok(crate::report::serialize_record(&self.0))
            }
        }
    }

    #[test]
    fn parse_failure_is_recorded_per_attempt() {
        let set = extract_sampled("r", "t", &FaultOnSecond(gold()), &SamplingConfig::default()).unwrap();
        assert_eq!(set.attempts.len(), 3);
        assert!(set.attempts[0].is_ok());
        assert!(matches!(set.attempts[1], Err(ParseError::Invalid { .. })));
        assert!(set.attempts[2].is_ok());
        assert_eq!(set.failures(), 1);
    }

    struct Down(AtomicUsize);

    impl CompletionBackend for Down {
        fn complete(&self, _: &CompletionRequest) -> Result<String, TransportError> {
            self.0.fetch_add(1, Ordering::SeqCst);
            Err(TransportError::Connection("refused".into()))
        }
    }

    #[test]
    fn transport_error_propagates() {
        let down = Down(AtomicUsize::new(0));
        let err = extract_sampled("r", "t", &down, &SamplingConfig::default()).unwrap_err();
        assert!(matches!(err, TransportError::Connection(_)));
        assert_eq!(down.0.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn per_field_mode_assembles_record() {
        let backend = MockBackend::gold(gold(), NoiseProfile::none());
        let cfg = SamplingConfig { prompt_mode: PromptMode::PerField, ..Default::default() };
        let set = extract_sampled("r", "t", &backend, &cfg).unwrap();
        for a in &set.attempts {
            assert_eq!(a.as_ref().unwrap(), &gold());
        }
    }

    #[test]
    fn sample_set_serde_round_trip() {
        let set = extract_sampled("r", "t", &FaultOnSecond(gold()), &SamplingConfig::default()).unwrap();
        let json = serde_json::to_string(&set).unwrap();
        let back: SampleSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, set);
    }
}
