//! File-level workflow: ingest → train → discover / progression.
//!
//! Every command writes its artifacts into one directory together with a
//! `manifest.json` recording seeds, parameters and SHA-256 digests of the
//! files read and written. Nothing time- or path-dependent is recorded, so
//! reruns with the same inputs and seeds are byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cvae::{train as train_cvae, CvaeCheckpoint, CvaeHyper, EpochLoss};
use crate::dataset::{
    parse_labeled_csv, parse_uci_csv, write_labeled_csv, AgeBucket, Dataset, FactorTable,
    NormalizationSpec, SplitRole,
};
use crate::discovery::{
    archetype_hull, extant_baseline, extremal_formulas_csv, filter_dominating,
    generate_candidates, progression_experiment, reduction_row, sample_conditions,
    strength_spectrum_export, AlphaMode, ArchetypeConfig, BandPlan, HullDocument, ModelSet,
    ProgressionReport, ReductionReport, StrengthBand,
};
use crate::nn::FORMAT_VERSION;
use crate::predictors::{
    evaluate_impacts, evaluate_strength, train_impact_predictor, train_strength_predictors,
    MetricsTable, PredictorCheckpoint, PredictorHyper, StrengthPredictorSet,
};
use crate::{rng, Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_TEST_FRACTION: f64 = 0.2;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LABELED_FILE: &str = "labeled.csv";
pub const DATASET_FILE: &str = "dataset.json";
pub const CVAE_FILE: &str = "cvae.json";
pub const IMPACT_FILE: &str = "impact_predictor.json";
pub const LOSS_TRACE_FILE: &str = "loss_trace.csv";
pub const IMPACT_METRICS_CSV: &str = "metrics_impact.csv";
pub const IMPACT_METRICS_JSON: &str = "metrics_impact.json";
pub const STRENGTH_METRICS_CSV: &str = "metrics_strength.csv";
pub const STRENGTH_METRICS_JSON: &str = "metrics_strength.json";
pub const REDUCTION_CSV: &str = "reduction.csv";
pub const REDUCTION_JSON: &str = "reduction.json";
pub const PROGRESSION_RMSE_CSV: &str = "progression_rmse.csv";

pub fn strength_file(bucket: AgeBucket) -> String {
    format!("strength_{bucket}.json")
}

pub fn spectrum_file(bucket: AgeBucket) -> String {
    format!("spectrum_{bucket}.json")
}

pub fn hull_file(bucket: AgeBucket, band: StrengthBand) -> String {
    format!("hull_{bucket}_{}_{}.json", band.center, band.half_width)
}

pub fn extremal_file(bucket: AgeBucket) -> String {
    format!("extremal_{bucket}.csv")
}

pub fn progression_file(bucket: AgeBucket) -> String {
    format!("progression_{bucket}.json")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })
}

/// Provenance of one command's run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CommandRecord {
    pub seeds: BTreeMap<String, u64>,
    pub parameters: BTreeMap<String, serde_json::Value>,
    /// File name → SHA-256.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub tool_version: String,
    pub format_version: u32,
    /// Keyed by command name, so the file does not depend on command order.
    pub commands: BTreeMap<String, CommandRecord>,
}

impl Manifest {
    pub const SCHEMA: &'static str = "manifest/v1";

    fn empty() -> Self {
        Manifest {
            schema: Self::SCHEMA.into(),
            tool_version: TOOL_VERSION.into(),
            format_version: FORMAT_VERSION,
            commands: BTreeMap::new(),
        }
    }

    pub fn load(dir: &Path) -> Result<Option<Self>> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(None);
        }
        Ok(Some(serde_json::from_slice(&read_file(&path)?)?))
    }
}

/// Collects outputs of one command and writes them with their digests.
struct ArtifactWriter {
    dir: PathBuf,
    record: CommandRecord,
}

impl ArtifactWriter {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|source| Error::File {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(ArtifactWriter {
            dir: dir.to_path_buf(),
            record: CommandRecord::default(),
        })
    }

    fn input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = read_file(path)?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        self.record.inputs.insert(name, sha256_hex(&bytes));
        Ok(bytes)
    }

    fn seed(&mut self, name: &str, seed: u64) {
        self.record.seeds.insert(name.into(), seed);
    }

    fn param(&mut self, name: &str, value: impl Serialize) -> Result<()> {
        self.record.parameters.insert(name.into(), serde_json::to_value(value)?);
        Ok(())
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|source| Error::File { path, source })?;
        self.record.outputs.insert(name.into(), sha256_hex(bytes));
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Merges this command's record into the directory manifest.
    fn finish(self, command: &str) -> Result<()> {
        let mut manifest = match Manifest::load(&self.dir)? {
            Some(m) if m.schema == Manifest::SCHEMA => m,
            _ => Manifest::empty(),
        };
        manifest.tool_version = TOOL_VERSION.into();
        manifest.format_version = FORMAT_VERSION;
        manifest.commands.insert(command.into(), self.record);
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        let path = self.dir.join(MANIFEST_FILE);
        fs::write(&path, bytes).map_err(|source| Error::File { path, source })
    }
}

/// Split and normalisation metadata stored next to `labeled.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub schema: String,
    pub seed: u64,
    pub test_fraction: f64,
    pub n_records: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub bucket_counts: BTreeMap<AgeBucket, usize>,
    pub normalization: NormalizationSpec,
    pub roles: Vec<SplitRole>,
}

impl DatasetMeta {
    pub const SCHEMA: &'static str = "dataset/v1";

    pub fn describe(dataset: &Dataset, seed: u64, test_fraction: f64) -> Self {
        let mut bucket_counts = BTreeMap::new();
        for r in dataset.records() {
            *bucket_counts.entry(r.bucket).or_insert(0) += 1;
        }
        let n_train = dataset.train().count();
        DatasetMeta {
            schema: Self::SCHEMA.into(),
            seed,
            test_fraction,
            n_records: dataset.records().len(),
            n_train,
            n_test: dataset.records().len() - n_train,
            bucket_counts,
            normalization: dataset.normalization().clone(),
            roles: dataset.roles().to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub uci: PathBuf,
    pub factors: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub test_fraction: f64,
}

/// Labels the UCI data with the factor table, splits it and writes
/// `labeled.csv` and `dataset.json`.
pub fn ingest(opts: &IngestOptions) -> Result<DatasetMeta> {
    let mut w = ArtifactWriter::new(&opts.out)?;
    let raw = parse_uci_csv(&w.input(&opts.uci)?)?;
    let factors = FactorTable::from_json(&w.input(&opts.factors)?)?;
    let dataset = Dataset::build(&raw, &factors, opts.test_fraction, opts.seed)?;
    let meta = DatasetMeta::describe(&dataset, opts.seed, opts.test_fraction);
    w.seed("split", opts.seed);
    w.param("test_fraction", opts.test_fraction)?;
    w.write(LABELED_FILE, write_labeled_csv(dataset.records()).as_bytes())?;
    w.write_json(DATASET_FILE, &meta)?;
    w.finish("ingest")?;
    Ok(meta)
}

fn dataset_from_bytes(labeled: &[u8], meta: &[u8]) -> Result<(Dataset, DatasetMeta)> {
    let records = parse_labeled_csv(labeled)?;
    let meta: DatasetMeta = serde_json::from_slice(meta)?;
    if meta.schema != DatasetMeta::SCHEMA {
        return Err(Error::Config(format!("unsupported dataset schema {:?}", meta.schema)));
    }
    let dataset = Dataset::from_parts(records, meta.roles.clone())?;
    if *dataset.normalization() != meta.normalization {
        return Err(Error::Domain(format!(
            "{DATASET_FILE} normalisation does not match the training rows of {LABELED_FILE}"
        )));
    }
    Ok((dataset, meta))
}

pub fn load_dataset(dir: &Path) -> Result<(Dataset, DatasetMeta)> {
    dataset_from_bytes(
        &read_file(&dir.join(LABELED_FILE))?,
        &read_file(&dir.join(DATASET_FILE))?,
    )
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub data: PathBuf,
    pub out: PathBuf,
    /// Overrides the epoch count of every model.
    pub epochs: Option<usize>,
    pub seed: u64,
    pub kl_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub trace: Vec<EpochLoss>,
    pub impact: MetricsTable,
    pub strength: MetricsTable,
}

fn loss_trace_csv(trace: &[EpochLoss]) -> String {
    let mut out = String::from("epoch,loss,reconstruction_mse,kl\n");
    for e in trace {
        let _ = writeln!(out, "{},{},{},{}", e.epoch, e.loss, e.reconstruction_mse, e.kl);
    }
    out
}

/// Trains the generator and all predictors and writes eight checkpoints,
/// the loss trace and held-out metric tables. The dataset files are copied
/// alongside so the directory is self-contained.
pub fn train(opts: &TrainOptions) -> Result<TrainSummary> {
    let mut w = ArtifactWriter::new(&opts.out)?;
    let labeled = w.input(&opts.data.join(LABELED_FILE))?;
    let meta_bytes = w.input(&opts.data.join(DATASET_FILE))?;
    let (dataset, _) = dataset_from_bytes(&labeled, &meta_bytes)?;

    let mut cvae_hyper = CvaeHyper {
        seed: rng::derive_seed(opts.seed, 0),
        kl_weight: opts.kl_weight,
        ..CvaeHyper::default()
    };
    let mut pred_hyper = PredictorHyper {
        seed: rng::derive_seed(opts.seed, 1),
        ..PredictorHyper::default()
    };
    if let Some(e) = opts.epochs {
        cvae_hyper.epochs = e;
        pred_hyper.epochs = e;
    }
    let strength_hyper = PredictorHyper {
        seed: rng::derive_seed(opts.seed, 2),
        ..pred_hyper
    };
    let (cvae, (impact, strength)) = rayon::join(
        || train_cvae(&dataset, &cvae_hyper),
        || {
            rayon::join(
                || train_impact_predictor(&dataset, &pred_hyper),
                || train_strength_predictors(&dataset, &strength_hyper),
            )
        },
    );
    let (cvae, impact, strength) = (cvae?, impact?, strength?);

    w.seed("train", opts.seed);
    w.seed("cvae", cvae_hyper.seed);
    w.seed("impact_predictor", pred_hyper.seed);
    w.seed("strength_predictors", strength_hyper.seed);
    w.param("cvae", cvae_hyper)?;
    w.param("predictors", pred_hyper)?;

    w.write(CVAE_FILE, CvaeCheckpoint::new(&cvae).to_json()?.as_bytes())?;
    w.write(IMPACT_FILE, PredictorCheckpoint::impact(&impact, &pred_hyper).to_json()?.as_bytes())?;
    for b in AgeBucket::ALL {
        let ck = PredictorCheckpoint::strength(&strength, b, &strength_hyper)?;
        w.write(&strength_file(b), ck.to_json()?.as_bytes())?;
    }
    w.write(LOSS_TRACE_FILE, loss_trace_csv(&cvae.trace).as_bytes())?;

    let im = evaluate_impacts(&impact, &dataset)?;
    let impact_table = MetricsTable::new(
        "impact predictor, held-out split",
        ["GWP", "AP", "CBW"].iter().zip(im).map(|(n, m)| (n.to_string(), m)).collect(),
    );
    let strength_table = MetricsTable::new(
        "strength predictors, held-out split",
        evaluate_strength(&strength, &dataset)?
            .into_iter()
            .map(|(b, m)| (b.to_string(), m))
            .collect(),
    );
    w.write(IMPACT_METRICS_CSV, impact_table.to_csv().as_bytes())?;
    w.write_json(IMPACT_METRICS_JSON, &impact_table)?;
    w.write(STRENGTH_METRICS_CSV, strength_table.to_csv().as_bytes())?;
    w.write_json(STRENGTH_METRICS_JSON, &strength_table)?;
    w.write(LABELED_FILE, &labeled)?;
    w.write(DATASET_FILE, &meta_bytes)?;
    w.finish("train")?;
    Ok(TrainSummary {
        trace: cvae.trace,
        impact: impact_table,
        strength: strength_table,
    })
}

/// Models and data loaded from a `train` output directory.
#[derive(Debug, Clone)]
pub struct LoadedModels {
    pub models: ModelSet,
    pub dataset: Dataset,
    pub meta: DatasetMeta,
    pub format_version: u32,
    /// Digests of every file read, keyed by file name.
    pub digests: BTreeMap<String, String>,
}

pub fn load_models(dir: &Path) -> Result<LoadedModels> {
    let mut digests = BTreeMap::new();
    let mut read = |name: &str| -> Result<Vec<u8>> {
        let bytes = read_file(&dir.join(name))?;
        digests.insert(name.to_string(), sha256_hex(&bytes));
        Ok(bytes)
    };
    let cvae = CvaeCheckpoint::from_json(&read(CVAE_FILE)?)?;
    let impact = PredictorCheckpoint::from_json(&read(IMPACT_FILE)?)?.into_impact()?;
    let mut nets = BTreeMap::new();
    for b in AgeBucket::ALL {
        let ck = PredictorCheckpoint::from_json(&read(&strength_file(b))?)?;
        if ck.bucket != Some(b) {
            return Err(Error::Checkpoint(format!("{} holds bucket {:?}", strength_file(b), ck.bucket)));
        }
        if ck.normalization != impact.normalization {
            return Err(Error::Checkpoint(format!("{} uses a different normalisation", strength_file(b))));
        }
        nets.insert(b, ck.network);
    }
    let strength = StrengthPredictorSet::new(nets, impact.normalization.clone())?;
    let (dataset, meta) = dataset_from_bytes(&read(LABELED_FILE)?, &read(DATASET_FILE)?)?;
    let models = ModelSet {
        cvae: cvae.params(),
        impact,
        strength,
    };
    models.validate()?;
    if *dataset.normalization() != models.cvae.normalization {
        return Err(Error::Checkpoint("models were trained on a different dataset".into()));
    }
    Ok(LoadedModels {
        models,
        dataset,
        meta,
        format_version: cvae.format_version,
        digests,
    })
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[derive(Debug, Clone)]
pub struct DiscoverOptions {
    pub models: PathBuf,
    pub out: PathBuf,
    /// Candidates per bucket.
    pub n: usize,
    pub bands: BandPlan,
    pub seed: u64,
    pub archetypes: ArchetypeConfig,
    /// Worker threads for generation; `None` uses the global pool.
    pub jobs: Option<usize>,
}

/// Generates candidates per bucket and writes the reduction report,
/// strength spectra, archetype hulls and extremal formula tables.
pub fn discover(opts: &DiscoverOptions) -> Result<ReductionReport> {
    let loaded = load_models(&opts.models)?;
    let mut w = ArtifactWriter::new(&opts.out)?;
    w.record.inputs = loaded.digests.clone();
    w.seed("discover", opts.seed);
    w.param("n", opts.n)?;
    w.param("bands", opts.bands.to_string())?;
    w.param("archetypes", opts.archetypes)?;

    let spec = loaded.dataset.normalization();
    let mut rows = Vec::new();
    for bucket in opts.bands.buckets() {
        let b = bucket.index() as u64;
        let cond_seed = rng::derive_seed(opts.seed, 2 * b);
        let latent_seed = rng::derive_seed(opts.seed, 2 * b + 1);
        w.seed(&format!("conditions_{bucket}"), cond_seed);
        w.seed(&format!("latent_{bucket}"), latent_seed);
        let conditions = sample_conditions(opts.n, bucket, spec, cond_seed);
        let candidates = with_jobs(opts.jobs, || {
            generate_candidates(&loaded.models, &conditions, bucket, latent_seed)
        })??;
        let spectrum = strength_spectrum_export(&candidates, bucket);
        w.write(&spectrum_file(bucket), &serde_json::to_vec(&spectrum)?)?;

        let mut hulls: Vec<(StrengthBand, Option<HullDocument>)> = Vec::new();
        for &band in &opts.bands.0[&bucket] {
            let baseline = extant_baseline(&loaded.dataset, bucket, band);
            let filtered = match &baseline {
                Some(base) => filter_dominating(&candidates, base, band),
                None => Vec::new(),
            };
            rows.push(reduction_row(bucket, band, baseline.as_ref(), &filtered));
            let hull = archetype_hull(spec, bucket, band, &filtered, &opts.archetypes)?;
            if let Some(h) = &hull {
                w.write_json(&hull_file(bucket, band), h)?;
            }
            hulls.push((band, hull));
        }
        let columns: Vec<_> = hulls.iter().map(|(b, h)| (*b, h.as_ref())).collect();
        w.write(&extremal_file(bucket), extremal_formulas_csv(&columns).as_bytes())?;
    }
    let report = ReductionReport::new(rows);
    w.write(REDUCTION_CSV, report.to_csv().as_bytes())?;
    w.write_json(REDUCTION_JSON, &report)?;
    w.finish("discover")?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct ProgressionOptions {
    pub models: PathBuf,
    pub out: PathBuf,
    pub n: usize,
    pub seed: u64,
    pub mode: AlphaMode,
}

/// Runs the strength progression for all six buckets.
pub fn progression(opts: &ProgressionOptions) -> Result<Vec<ProgressionReport>> {
    let loaded = load_models(&opts.models)?;
    let mut w = ArtifactWriter::new(&opts.out)?;
    w.record.inputs = loaded.digests.clone();
    w.seed("progression", opts.seed);
    w.param("n", opts.n)?;
    w.param("mode", opts.mode)?;
    let mut reports = Vec::new();
    let mut table = String::from("bucket,age_days,x_min,x_max,n,rmse\n");
    for bucket in AgeBucket::ALL {
        let seed = rng::derive_seed(opts.seed, bucket.index() as u64);
        let r = progression_experiment(&loaded.models, &loaded.dataset, bucket, opts.n, seed, opts.mode)?;
        w.write_json(&progression_file(bucket), &r)?;
        let _ = writeln!(
            table,
            "{bucket},{},{},{},{},{}",
            bucket.center_days(),
            r.x_min,
            r.x_max,
            r.points.len(),
            r.rmse
        );
        reports.push(r);
    }
    w.write(PROGRESSION_RMSE_CSV, table.as_bytes())?;
    w.finish("progression")?;
    Ok(reports)
}
