use cmrx_core::confidence::Scorer;
use cmrx_core::gateway::{CompletionBackend, SamplingConfig, TransportError};
use cmrx_core::pipeline::{run_report, Extraction};

use crate::CliError;

/// Runs the pipeline over `reports` on a pool of `workers` threads.
/// Results keep input order.
pub fn extract_batch(
    reports: &[(String, String)],
    backend: &dyn CompletionBackend,
    sampling: &SamplingConfig,
    scorer: &Scorer,
    workers: usize,
) -> Result<Vec<Result<Extraction, TransportError>>, CliError> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(|| {
        reports
            .par_iter()
            .map(|(id, text)| run_report(id, text, backend, sampling, scorer))
            .collect()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use cmrx_core::gateway::{MockBackend, NoiseProfile};
    use cmrx_core::report::{CmrRecord, FieldId};
    use cmrx_core::synth::{render_report, TemplateStyle};

    #[test]
    fn order_is_kept_and_width_does_not_matter() {
        let reports: Vec<(String, String)> = (0..12)
            .map(|i| {
                let rec = CmrRecord::empty().with(FieldId::Lvef, 40.0 + i as f64);
                (format!("R{i}"), render_report(&rec, TemplateStyle::Tabular, i))
            })
            .collect();
        let backend = MockBackend::rule_based(NoiseProfile::none());
        let run = |w| {
            extract_batch(&reports, &backend, &SamplingConfig::default(), &Scorer::default(), w)
                .unwrap()
                .into_iter()
                .map(|r| r.unwrap().output())
                .collect::<Vec<_>>()
        };
        let one = run(1);
        assert_eq!(one, run(4));
        for (i, o) in one.iter().enumerate() {
            assert_eq!(o.report_id, format!("R{i}"));
            assert_eq!(o.record.as_ref().unwrap().get(FieldId::Lvef).value(), Some(40.0 + i as f64));
        }
    }
}
