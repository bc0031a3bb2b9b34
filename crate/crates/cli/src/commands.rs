use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use cmrx_core::confidence::ConfidenceBundle;
use cmrx_core::gateway::{CompletionBackend, HttpBackend, MockBackend, NoiseProfile};
use cmrx_core::pipeline::ExtractionOutput;
use cmrx_core::report::scrub_phi;
use cmrx_core::synth::{generate_corpus, write_corpus, CorpusConfig, CorruptionPlan, GenConfig, TemplateStyle};
use cmrx_core::triage::{render_corpus, ExportFilter, TriageStore};

use crate::batch::extract_batch;
use crate::lines::{self, emit, to_ndjson, ExtractLine};
use crate::{evaluate, CliError, PipelineConfig};

#[derive(Debug, Parser)]
#[command(name = "cmrx", version, about = "Cardiac MR report extraction with confidence triage")]
#[command(arg_required_else_help = true)]
pub struct Cli {
    /// TOML pipeline config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Drop identifier lines from a report.
    Scrub {
        /// Report file, or `-` for stdin.
        #[arg(default_value = "-")]
        input: PathBuf,
    },
    /// Extract records from report files or an ndjson corpus.
    Extract(ExtractArgs),
    /// Score sample sets or single records.
    Score {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Put extraction output into the review queue.
    Triage {
        input: PathBuf,
        /// Corpus with reference records to attach for evaluation.
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// Compare predictions against reference records.
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Print JSON instead of the table.
        #[arg(long)]
        json: bool,
    },
    /// Generate a synthetic corpus.
    Synth(SynthArgs),
    /// Write the reviewed training corpus.
    ExportCorpus {
        #[arg(long, default_value = "all_reviewed")]
        filter: ExportFilter,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        listen: Option<String>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        mock: bool,
    },
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Offline rule-based extractor.
    #[arg(long)]
    pub mock: bool,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Also write the raw sample sets, for `score`.
    #[arg(long)]
    pub dump_samples: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "tabular,narrative")]
    pub styles: Vec<TemplateStyle>,
    /// Either one total rate split over omission, inexact and confusion,
    /// or `kind=rate` pairs, e.g. `omission=0.02,truncation=0.01`.
    #[arg(long)]
    pub corrupt_rates: Option<String>,
    #[arg(long, default_value_t = 0.1)]
    pub null_rate: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = PipelineConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Scrub { input } => emit(None, &scrub_phi(&lines::read_text(&input)?)),
        Command::Extract(args) => extract(cfg, args),
        Command::Score { input, out } => score(&cfg, &input, out.as_deref()),
        Command::Triage { input, gold, data_dir } => triage(&cfg, &input, gold.as_deref(), data_dir),
        Command::Eval { gold, pred, json } => eval(&cfg, &gold, &pred, json),
        Command::Synth(args) => synth(&cfg, args),
        Command::ExportCorpus { filter, data_dir, out } => {
            let store = open_store(data_dir.unwrap_or(cfg.data_dir))?;
            let bytes = render_corpus(&store.export_corpus(filter));
            emit(out.as_deref(), std::str::from_utf8(&bytes).expect("utf-8 json"))
        }
        Command::Serve { listen, data_dir, mock } => {
            let cfg = PipelineConfig {
                listen: listen.unwrap_or(cfg.listen),
                data_dir: data_dir.unwrap_or(cfg.data_dir),
                mock: mock || cfg.mock,
                ..cfg
            };
            serve(cfg)
        }
    }
}

fn backend(cfg: &PipelineConfig) -> Result<Box<dyn CompletionBackend>, CliError> {
    if cfg.mock {
        Ok(Box::new(MockBackend::rule_based(NoiseProfile::none())))
    } else {
        let b = HttpBackend::new(cfg.endpoint.clone()).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Box::new(b))
    }
}

fn open_store(dir: PathBuf) -> Result<TriageStore, CliError> {
    TriageStore::open(dir).map_err(|e| CliError::Data(e.to_string()))
}

fn extract(mut cfg: PipelineConfig, args: ExtractArgs) -> Result<(), CliError> {
    if let Some(url) = args.endpoint {
        cfg.endpoint.base_url = url;
    }
    if let Some(n) = args.samples {
        cfg.scoring.n_samples = n;
    }
    if let Some(t) = args.temperature {
        cfg.scoring.temperature = t;
    }
    cfg.mock |= args.mock;
    cfg.validate()?;

    let reports = lines::read_reports(&args.inputs)?;
    let backend = backend(&cfg)?;
    let results = extract_batch(&reports, backend.as_ref(), &cfg.sampling(), &cfg.scorer()?, cfg.workers)?;
    let mut out = Vec::with_capacity(results.len());
    let mut samples = Vec::new();
    for (r, (id, _)) in results.into_iter().zip(&reports) {
        let ex = r.map_err(|e| CliError::Data(format!("{id}: {e}")))?;
        out.push(ExtractLine { output: ex.output(), scrubbed_text: ex.scrubbed_text });
        samples.push(ex.samples);
    }
    if let Some(p) = &args.dump_samples {
        emit(Some(p), &to_ndjson(&samples))?;
    }
    emit(args.out.as_deref(), &to_ndjson(&out))
}

fn score(cfg: &PipelineConfig, input: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let scorer = cfg.scorer()?;
    let mut rows = Vec::new();
    for v in lines::read_ndjson(input)? {
        let set = lines::samples_of(&v)?;
        let outcome = scorer.aggregate(&set);
        let ex = cmrx_core::pipeline::Extraction {
            report_id: set.report_id.clone(),
            scrubbed_text: String::new(),
            samples: set,
            outcome,
        };
        rows.push(ex.output());
    }
    emit(out, &to_ndjson(&rows))
}

fn triage(cfg: &PipelineConfig, input: &Path, gold: Option<&Path>, data_dir: Option<PathBuf>) -> Result<(), CliError> {
    let mut store = open_store(data_dir.unwrap_or_else(|| cfg.data_dir.clone()))?;
    let data = |e: cmrx_core::triage::TriageError| CliError::Data(e.to_string());
    let mut queued = 0;
    for v in lines::read_ndjson(input)? {
        let line: ExtractLine =
            serde_json::from_value(v).map_err(|e| CliError::Data(format!("{}: {e}", input.display())))?;
        let ExtractionOutput { report_id, record, confidence_bundle, .. } = line.output;
        let fresh = match (record, confidence_bundle) {
            (Some(r), Some(b)) => store.enqueue(&r, &b, &report_id, &line.scrubbed_text),
            _ => store.enqueue_unparsed(&report_id, &line.scrubbed_text),
        }
        .map_err(data)?;
        queued += fresh.len();
    }
    if let Some(g) = gold {
        for v in lines::read_ndjson(g)? {
            let id = lines::report_id(&v)?;
            if store.report(&id).is_some() {
                store.set_gold(&id, lines::gold_of(&v)?).map_err(data)?;
            }
        }
    }
    let c = store.counts();
    eprintln!("queued {queued} new items; pending {} accepted {} corrected {}", c.pending, c.accepted, c.corrected);
    Ok(())
}

fn eval(cfg: &PipelineConfig, gold: &Path, pred: &Path, json: bool) -> Result<(), CliError> {
    let mut by_id: BTreeMap<String, serde_json::Value> = BTreeMap::new();
    for v in lines::read_ndjson(pred)? {
        by_id.insert(lines::report_id(&v)?, v);
    }
    let (mut golds, mut preds, mut bundles) = (Vec::new(), Vec::new(), Vec::new());
    for v in lines::read_ndjson(gold)? {
        let id = lines::report_id(&v)?;
        let p = by_id.get(&id).ok_or_else(|| CliError::Data(format!("no prediction for {id}")))?;
        golds.push(lines::gold_of(&v)?);
        preds.push(lines::pred_of(p)?);
        let bundle: Option<ConfidenceBundle> = p
            .get("confidence_bundle")
            .filter(|b| !b.is_null())
            .and_then(|b| serde_json::from_value(b.clone()).ok());
        bundles.push(bundle);
    }
    let bundles: Option<Vec<ConfidenceBundle>> = bundles.into_iter().collect();
    let report = evaluate(&golds, &preds, bundles.as_deref(), cfg.scoring.review_threshold)
        .map_err(|e| CliError::Data(e.to_string()))?;
    if json {
        emit(None, &format!("{}\n", serde_json::to_string_pretty(&report).expect("serializable")))
    } else {
        emit(None, &report.render_table())
    }
}

/// Parses `--corrupt-rates`.
pub fn parse_plan(arg: &str, seed: u64) -> Result<CorruptionPlan, CliError> {
    let bad = |m: String| CliError::Config(format!("--corrupt-rates: {m}"));
    let plan = if let Ok(rate) = arg.trim().parse::<f64>() {
        CorruptionPlan::mixed(rate, seed)
    } else {
        let mut plan = CorruptionPlan::none(seed);
        for part in arg.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| bad(format!("expected kind=rate, got `{part}`")))?;
            let v: f64 = v.trim().parse().map_err(|_| bad(format!("`{v}` is not a number")))?;
            match k.trim() {
                "omission" => plan.omission = v,
                "inexact" => plan.inexact = v,
                "confusion" => plan.confusion = v,
                "fabrication" => plan.fabrication = v,
                "truncation" => plan.truncation = v,
                other => return Err(bad(format!("unknown kind `{other}`"))),
            }
        }
        plan
    };
    plan.validate().map_err(|e| bad(e.to_string()))?;
    Ok(plan)
}

fn synth(cfg: &PipelineConfig, args: SynthArgs) -> Result<(), CliError> {
    if args.styles.is_empty() {
        return Err(CliError::Config("--styles needs at least one style".into()));
    }
    if !(0.0..=1.0).contains(&args.null_rate) {
        return Err(CliError::Config(format!("--null-rate must be in [0, 1], got {}", args.null_rate)));
    }
    let plan = args.corrupt_rates.as_deref().map(|s| parse_plan(s, args.seed)).transpose()?;
    let scorer = cfg.scorer()?;
    let corpus_cfg = CorpusConfig {
        n: args.n,
        seed: args.seed,
        styles: args.styles,
        gen: GenConfig { null_rate: args.null_rate },
        plan,
    };
    let corpus = generate_corpus(&corpus_cfg, &scorer.ranges, &scorer.ledger);
    let mut buf = Vec::new();
    write_corpus(&corpus, &mut buf).map_err(|e| CliError::Data(e.to_string()))?;
    emit(args.out.as_deref(), std::str::from_utf8(&buf).expect("utf-8 json"))
}

fn serve(cfg: PipelineConfig) -> Result<(), CliError> {
    let store = open_store(cfg.data_dir.clone())?;
    let state = crate::service::AppState::new(
        store,
        backend(&cfg)?,
        cfg.scorer()?,
        cfg.sampling(),
        cfg.workers,
        cfg.auth_token.clone(),
    );
    let app = crate::service::router(state.clone(), cfg.static_dir.as_deref());
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Data(e.to_string()))?;
    // The HTTP backend must not be dropped inside the runtime.
    let _keep = state;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&cfg.listen)
            .await
            .map_err(|e| CliError::Config(format!("cannot listen on {}: {e}", cfg.listen)))?;
        eprintln!("listening on {}", cfg.listen);
        axum::serve(listener, app).await.map_err(|e| CliError::Data(e.to_string()))
    })
}
