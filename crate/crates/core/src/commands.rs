//! The command-line subcommands, operating on a run directory:
//!
//! ```text
//! manifest.toml              generate
//! edges.tsv                  generate
//! splits/{split}.csv         generate (label records)
//! stats.toml                 describe (fitted on train only)
//! descriptors/{split}.csv    describe (raw histograms)
//! features/{split}.csv       describe (structural features)
//! heatmaps/{split}/*.pgm     describe, optional
//! models/{model}.ckpt        train
//! models/{model}_history.csv train (networks)
//! report/*.csv, summary.txt  evaluate
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::checkpoint::Checkpoint;
use crate::config::{InstanceConfig, RunConfig};
use crate::data::{
    downsample_zero_growth, instances_from_labels, mse, read_labels, split_instances, stage_seed, temporal_split,
    verify_split, write_labels, GeneratorSpec, LabelRecord, LabeledInstance, Split, SplitSet, SplitSpec,
    TemporalEdgeList,
};
use crate::descriptor::{DescriptorConfig, DescriptorStats, GraphDescriptor, PixelStats};
use crate::error::{Error, Result};
use crate::features::FEATURE_NAMES;
use crate::graph::{read_edge_list_file, write_edge_list};
use crate::nn::train::write_history_csv;
use crate::pipeline::{describe_splits, features_of, fit_model, stage, FitOptions, FittedModel, ModelKind};

pub const MANIFEST_FORMAT: &str = "deepgraph-benchmark";

/// Exit status for a failed command: 2 for configuration problems, 3 for
/// numerical failures, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        3
    } else if matches!(e, Error::Config(_) | Error::SplitOrder(_) | Error::InvalidArgument(_)) {
        2
    } else {
        1
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// File locations inside a run directory.
#[derive(Clone, Debug)]
pub struct RunDir(PathBuf);

impl RunDir {
    pub fn new(root: &Path) -> Self {
        Self(root.to_path_buf())
    }

    pub fn root(&self) -> &Path {
        &self.0
    }

    pub fn manifest(&self) -> PathBuf {
        self.0.join("manifest.toml")
    }

    pub fn edges(&self) -> PathBuf {
        self.0.join("edges.tsv")
    }

    pub fn labels(&self, s: Split) -> PathBuf {
        self.0.join("splits").join(format!("{}.csv", s.name()))
    }

    pub fn stats(&self) -> PathBuf {
        self.0.join("stats.toml")
    }

    pub fn descriptors(&self, s: Split) -> PathBuf {
        self.0.join("descriptors").join(format!("{}.csv", s.name()))
    }

    pub fn features(&self, s: Split) -> PathBuf {
        self.0.join("features").join(format!("{}.csv", s.name()))
    }

    pub fn heatmaps(&self, s: Split) -> PathBuf {
        self.0.join("heatmaps").join(s.name())
    }

    pub fn checkpoint(&self, kind: ModelKind) -> PathBuf {
        self.0.join("models").join(format!("{}.ckpt", kind.name()))
    }

    pub fn history(&self, kind: ModelKind) -> PathBuf {
        self.0.join("models").join(format!("{}_history.csv", kind.name()))
    }

    pub fn report(&self, file: &str) -> PathBuf {
        self.0.join("report").join(file)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSeeds {
    pub generate: u64,
    pub split: u64,
    pub downsample: u64,
    pub features: u64,
    pub init: u64,
    pub train: u64,
}

impl StageSeeds {
    pub fn from_root(root: u64) -> Self {
        Self {
            generate: stage_seed(root, stage::GENERATE),
            split: stage_seed(root, stage::SPLIT),
            downsample: stage_seed(root, stage::DOWNSAMPLE),
            features: stage_seed(root, stage::FEATURES),
            init: stage_seed(root, stage::INIT),
            train: stage_seed(root, stage::TRAIN),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitCounts {
    pub edges: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileHashes {
    pub edges: String,
    pub train: String,
    pub val: String,
    pub test: String,
}

/// Everything needed to regenerate a benchmark.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub config_sha256: String,
    #[serde(default)]
    pub generator: Option<GeneratorSpec>,
    #[serde(default)]
    pub edges_source: Option<PathBuf>,
    pub instances: InstanceConfig,
    pub split: SplitSpec,
    pub stage_seeds: StageSeeds,
    pub counts: SplitCounts,
    pub sha256: FileHashes,
}

fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::Config(format!("cannot encode TOML: {e}")))
}

fn from_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Format { path: path.to_path_buf(), message: e.to_string() })
}

pub fn load_edges(cfg: &RunConfig, seeds: &StageSeeds) -> Result<TemporalEdgeList> {
    match (&cfg.generator, &cfg.edges) {
        (Some(g), None) => g.generate(seeds.generate),
        (None, Some(path)) => Ok(TemporalEdgeList::from_records(read_edge_list_file(path)?)),
        _ => Err(Error::Config("set exactly one of `generator` and `edges`".into())),
    }
}

/// Instances of every split, from computed or external labels, with the
/// zero-growth downsampling applied.
pub fn build_splits(cfg: &RunConfig, el: &TemporalEdgeList, seeds: &StageSeeds) -> Result<SplitSet> {
    let spec = cfg.split.to_spec(seeds.split);
    let mut splits = match &cfg.instances.labels {
        None => temporal_split(el, &spec, cfg.instances.k_hop, cfg.instances.target)?,
        Some(path) => {
            let file = fs::File::open(path)?;
            let records = read_labels(std::io::BufReader::new(file))?;
            let instances = instances_from_labels(el, &records, cfg.instances.k_hop)?;
            split_instances(instances, spec.fractions, spec.seed)
        }
    };
    if cfg.instances.downsample_zero > 0.0 {
        for (i, s) in Split::ALL.into_iter().enumerate() {
            let kept = downsample_zero_growth(
                std::mem::take(splits.get_mut(s)),
                cfg.instances.downsample_zero,
                stage_seed(seeds.downsample, i as u64),
            )?;
            *splits.get_mut(s) = kept;
        }
    }
    verify_split(&splits)?;
    Ok(splits)
}

fn labels_bytes(instances: &[LabeledInstance]) -> Result<Vec<u8>> {
    let records: Vec<LabelRecord> = instances.iter().map(LabelRecord::from).collect();
    let mut buf = Vec::new();
    write_labels(&mut buf, &records)?;
    Ok(buf)
}

#[derive(Clone, Debug)]
pub struct GenerateSummary {
    pub manifest: Manifest,
    pub splits: SplitSet,
}

/// Writes edges, split labels and the manifest. Refuses to touch an
/// existing directory unless `force` is set.
pub fn cmd_generate(cfg: &RunConfig, force: bool) -> Result<GenerateSummary> {
    cfg.validate()?;
    let dir = RunDir::new(cfg.out_dir()?);
    if dir.root().exists() && fs::read_dir(dir.root())?.next().is_some() && !force {
        return Err(Error::Config(format!(
            "output directory {} already exists; pass --force to overwrite",
            dir.root().display()
        )));
    }
    let seeds = StageSeeds::from_root(cfg.seed);
    let el = load_edges(cfg, &seeds)?;
    let splits = build_splits(cfg, &el, &seeds)?;
    if splits.train.is_empty() {
        return Err(Error::Config("the training split is empty; check the split times".into()));
    }

    let mut edges = Vec::new();
    write_edge_list(&mut edges, &el.edges)?;
    let labels: Vec<Vec<u8>> = Split::ALL.iter().map(|&s| labels_bytes(splits.get(s))).collect::<Result<_>>()?;
    let hashes: Vec<String> = labels.iter().map(|b| sha256_hex(b)).collect();
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        version: 1,
        seed: cfg.seed,
        config_sha256: sha256_hex(cfg.benchmark_key().as_bytes()),
        generator: cfg.generator.clone(),
        edges_source: cfg.edges.clone(),
        instances: cfg.instances.clone(),
        split: cfg.split.to_spec(seeds.split),
        stage_seeds: seeds,
        counts: SplitCounts { edges: el.edges.len(), train: splits.train.len(), val: splits.val.len(), test: splits.test.len() },
        sha256: FileHashes {
            edges: sha256_hex(&edges),
            train: hashes[0].clone(),
            val: hashes[1].clone(),
            test: hashes[2].clone(),
        },
    };
    let manifest_text = to_toml(&manifest)?;
    write_file(&dir.edges(), &edges)?;
    for (s, bytes) in Split::ALL.into_iter().zip(&labels) {
        write_file(&dir.labels(s), bytes)?;
    }
    write_file(&dir.manifest(), manifest_text.as_bytes())?;
    Ok(GenerateSummary { manifest, splits })
}

/// Reads the benchmark back and checks it belongs to `cfg`.
pub fn load_benchmark(cfg: &RunConfig, dir: &RunDir) -> Result<(Manifest, SplitSet)> {
    if !dir.manifest().exists() {
        return Err(Error::Config(format!("no benchmark in {}; run `generate` first", dir.root().display())));
    }
    let manifest: Manifest = from_toml(&dir.manifest())?;
    if manifest.format != MANIFEST_FORMAT {
        return Err(Error::Format { path: dir.manifest(), message: "not a benchmark manifest".into() });
    }
    if manifest.config_sha256 != sha256_hex(cfg.benchmark_key().as_bytes()) {
        return Err(Error::Config(format!(
            "benchmark in {} was generated from a different configuration or seed",
            dir.root().display()
        )));
    }
    if sha256_file(&dir.edges())? != manifest.sha256.edges {
        return Err(Error::Provenance("edges.tsv does not match the manifest".into()));
    }
    let el = TemporalEdgeList::from_records(read_edge_list_file(&dir.edges())?);
    let mut splits = SplitSet::default();
    let expected = [&manifest.sha256.train, &manifest.sha256.val, &manifest.sha256.test];
    for (s, hash) in Split::ALL.into_iter().zip(expected) {
        let bytes = fs::read(dir.labels(s))?;
        if &sha256_hex(&bytes) != hash {
            return Err(Error::Provenance(format!("{} labels do not match the manifest", s.name())));
        }
        let records = read_labels(bytes.as_slice())?;
        let instances = instances_from_labels(&el, &records, manifest.instances.k_hop)?;
        if instances.len() != records.len() {
            return Err(Error::Format { path: dir.labels(s), message: "label origins missing from the edge list".into() });
        }
        *splits.get_mut(s) = instances;
    }
    verify_split(&splits)?;
    Ok((manifest, splits))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Moments {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

/// Normalization statistics and where they came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsFile {
    pub provenance_split: String,
    /// Hash of the label file of the split the statistics were fitted on.
    pub fitted_on_sha256: String,
    pub n_instances: usize,
    pub descriptor: DescriptorConfig,
    pub hks: Moments,
    pub pixel: Moments,
}

impl StatsFile {
    pub fn descriptor_stats(&self) -> Result<DescriptorStats> {
        DescriptorStats::new(self.hks.means.clone(), self.hks.sds.clone())
    }

    pub fn pixel_stats(&self) -> PixelStats {
        PixelStats {
            n_bins: self.descriptor.n_bins,
            n_steps: self.descriptor.n_steps,
            means: self.pixel.means.clone(),
            sds: self.pixel.sds.clone(),
        }
    }
}

/// Loads `stats.toml` and checks it was fitted on the current training
/// split. Returns it with its hash.
pub fn load_stats(dir: &RunDir) -> Result<(StatsFile, String)> {
    if !dir.stats().exists() {
        return Err(Error::Config(format!("no statistics in {}; run `describe` first", dir.root().display())));
    }
    let bytes = fs::read(dir.stats())?;
    let stats: StatsFile = toml::from_str(std::str::from_utf8(&bytes).unwrap_or(""))
        .map_err(|e| Error::Format { path: dir.stats(), message: e.to_string() })?;
    if stats.provenance_split != Split::Train.name() {
        return Err(Error::Provenance(format!("statistics were fitted on the {} split", stats.provenance_split)));
    }
    if stats.fitted_on_sha256 != sha256_file(&dir.labels(Split::Train))? {
        return Err(Error::Provenance("statistics were not fitted on the current training split".into()));
    }
    Ok((stats, sha256_hex(&bytes)))
}

fn descriptor_header(n_bins: usize, n_steps: usize) -> String {
    let mut h = String::from("origin_id,scaled_label");
    for b in 0..n_bins {
        for s in 0..n_steps {
            let _ = write!(h, ",b{b}_s{s}");
        }
    }
    h
}

fn rows_csv(comment: &str, header: &str, rows: &[(u64, f64, &[f64])]) -> Vec<u8> {
    let mut out = String::new();
    let _ = writeln!(out, "# {comment}");
    let _ = writeln!(out, "{header}");
    for (id, label, values) in rows {
        let _ = write!(out, "{id},{label}");
        for v in *values {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out.into_bytes()
}

/// Rows of a descriptor or feature file.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixFile {
    pub comment: String,
    pub origins: Vec<u64>,
    pub labels: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_matrix_csv(path: &Path, width: usize) -> Result<MatrixFile> {
    let text = fs::read_to_string(path)?;
    let bad = |line: usize, message: &str| Error::Format { path: path.to_path_buf(), message: format!("line {line}: {message}") };
    let mut lines = text.lines();
    let comment = lines
        .next()
        .and_then(|l| l.strip_prefix("# "))
        .ok_or_else(|| bad(1, "missing comment line"))?
        .to_string();
    lines.next().ok_or_else(|| bad(2, "missing header"))?;
    let mut out = MatrixFile { comment, origins: vec![], labels: vec![], rows: vec![] };
    for (i, line) in lines.enumerate() {
        let mut fields = line.split(',');
        let id = fields.next().and_then(|f| f.parse().ok()).ok_or_else(|| bad(i + 3, "bad origin id"))?;
        let values: Vec<f64> = fields.map(|f| f.parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad(i + 3, "bad number"))?;
        if values.len() != width + 1 {
            return Err(bad(i + 3, &format!("expected {} values, found {}", width + 1, values.len())));
        }
        out.origins.push(id);
        out.labels.push(values[0]);
        out.rows.push(values[1..].to_vec());
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct DescribeSummary {
    pub stats_sha256: String,
    pub counts: [usize; 3],
}

/// Fits descriptor and pixel statistics on the training split, then writes
/// descriptors and structural features for every split.
pub fn cmd_describe(cfg: &RunConfig) -> Result<DescribeSummary> {
    cfg.validate()?;
    let dir = RunDir::new(cfg.out_dir()?);
    let (manifest, splits) = load_benchmark(cfg, &dir)?;
    let described = describe_splits(&splits, &cfg.descriptor)?;
    let stats = StatsFile {
        provenance_split: Split::Train.name().into(),
        fitted_on_sha256: manifest.sha256.train.clone(),
        n_instances: splits.train.len(),
        descriptor: cfg.descriptor.clone(),
        hks: Moments { means: described.stats.means.clone(), sds: described.stats.sds.clone() },
        pixel: Moments { means: described.pixel.means.clone(), sds: described.pixel.sds.clone() },
    };
    let stats_text = to_toml(&stats)?;
    let stats_sha256 = sha256_hex(stats_text.as_bytes());
    write_file(&dir.stats(), stats_text.as_bytes())?;

    let (n_bins, n_steps) = (cfg.descriptor.n_bins, cfg.descriptor.n_steps);
    let header = descriptor_header(n_bins, n_steps);
    let feature_header = format!("origin_id,scaled_label,{}", FEATURE_NAMES.join(","));
    let mut counts = [0; 3];
    for (i, s) in Split::ALL.into_iter().enumerate() {
        let instances = splits.get(s);
        counts[i] = instances.len();
        let descs: &[GraphDescriptor] = &described.descriptors[i];
        let rows: Vec<(u64, f64, &[f64])> =
            instances.iter().zip(descs).map(|(inst, d)| (inst.origin, inst.scaled_label, d.as_slice())).collect();
        write_file(&dir.descriptors(s), &rows_csv(&format!("stats_sha256={stats_sha256}"), &header, &rows))?;

        let feats = features_of(instances, cfg.seed);
        let rows: Vec<(u64, f64, &[f64])> =
            instances.iter().zip(&feats).map(|(inst, f)| (inst.origin, inst.scaled_label, f.as_slice())).collect();
        write_file(&dir.features(s), &rows_csv(&format!("split={}", s.name()), &feature_header, &rows))?;

        if cfg.heatmaps {
            let hdir = dir.heatmaps(s);
            fs::create_dir_all(&hdir)?;
            for (inst, d) in instances.iter().zip(descs) {
                let mut buf = Vec::new();
                d.write_pgm(&mut buf)?;
                fs::write(hdir.join(format!("{}.pgm", inst.origin)), buf)?;
            }
        }
    }
    Ok(DescribeSummary { stats_sha256, counts })
}

/// Model inputs for one split, checked against the current statistics.
pub struct SplitInputs {
    pub origins: Vec<u64>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

pub fn load_inputs(dir: &RunDir, kind: ModelKind, s: Split, stats: &(StatsFile, String)) -> Result<SplitInputs> {
    let (file, hash) = stats;
    if kind.uses_features() {
        let m = read_matrix_csv(&dir.features(s), FEATURE_NAMES.len())?;
        return Ok(SplitInputs { origins: m.origins, x: m.rows, y: m.labels });
    }
    let width = file.descriptor.n_bins * file.descriptor.n_steps;
    let m = read_matrix_csv(&dir.descriptors(s), width)?;
    if m.comment != format!("stats_sha256={hash}") {
        return Err(Error::Provenance(format!("{} descriptors were not built with the current statistics", s.name())));
    }
    let pixel = file.pixel_stats();
    let x = m
        .rows
        .into_iter()
        .map(|r| pixel.normalize(&GraphDescriptor::from_row_major(file.descriptor.n_bins, file.descriptor.n_steps, r)?))
        .collect::<Result<_>>()?;
    Ok(SplitInputs { origins: m.origins, x, y: m.labels })
}

pub fn fit_options(cfg: &RunConfig) -> FitOptions {
    let seeds = StageSeeds::from_root(cfg.seed);
    let mut train = cfg.train.clone();
    train.seed = seeds.train;
    let mut opts = FitOptions::new(train, cfg.model.init, cfg.seed, cfg.descriptor.n_bins, cfg.descriptor.n_steps);
    opts.l2_grid = cfg.model.l2_grid.clone();
    opts
}

/// Trains one model on the training split with validation-based
/// selection, writing its checkpoint (and history for networks).
pub fn cmd_train(cfg: &RunConfig, kind: ModelKind) -> Result<FittedModel> {
    cfg.validate()?;
    let dir = RunDir::new(cfg.out_dir()?);
    let stats = load_stats(&dir)?;
    if stats.0.descriptor != cfg.descriptor {
        return Err(Error::Config("descriptor settings differ from the ones used by `describe`".into()));
    }
    let train = load_inputs(&dir, kind, Split::Train, &stats)?;
    let val = load_inputs(&dir, kind, Split::Val, &stats)?;
    let fitted = fit_model(kind, &train.x, &train.y, &val.x, &val.y, &fit_options(cfg))?;
    let hash = (!kind.uses_features()).then(|| stats.1.clone());
    let ck = Checkpoint::from_fitted(&fitted, hash);
    let mut buf = Vec::new();
    ck.write(&mut buf)?;
    write_file(&dir.checkpoint(kind), &buf)?;
    if let FittedModel::Net { outcome, .. } = &fitted {
        let mut csv = Vec::new();
        write_history_csv(&mut csv, &outcome.history)?;
        write_file(&dir.history(kind), &csv)?;
    }
    Ok(fitted)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub kind: ModelKind,
    pub n_test: usize,
    pub test_mse: f64,
    pub val_mse: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub origins: Vec<u64>,
    pub labels: Vec<f64>,
    pub predictions: Vec<Vec<f64>>,
}

impl Report {
    pub fn test_mse(&self, kind: ModelKind) -> Option<f64> {
        self.rows.iter().find(|r| r.kind == kind).map(|r| r.test_mse)
    }
}

pub const REPORT_HEADER: &str = "model,n_test,test_mse,val_mse";

/// Test-set MSE of every listed model from its checkpoint, plus
/// per-instance predictions and paired squared-error differences.
pub fn cmd_evaluate(cfg: &RunConfig, kinds: &[ModelKind]) -> Result<Report> {
    cfg.validate()?;
    if kinds.is_empty() {
        return Err(Error::Config("no models to evaluate".into()));
    }
    let dir = RunDir::new(cfg.out_dir()?);
    let stats = load_stats(&dir)?;
    let mut rows = Vec::new();
    let mut predictions = Vec::new();
    let mut reference: Option<(Vec<u64>, Vec<f64>)> = None;
    for &kind in kinds {
        let path = dir.checkpoint(kind);
        if !path.exists() {
            return Err(Error::Config(format!("no checkpoint for {}; run `train --model {}` first", kind.name(), kind.name())));
        }
        let ck = Checkpoint::load(&path)?;
        if ck.header.kind != kind {
            return Err(Error::Format { path, message: format!("checkpoint holds a {} model", ck.header.kind.name()) });
        }
        if !kind.uses_features() && ck.header.stats_sha256.as_deref() != Some(stats.1.as_str()) {
            return Err(Error::Provenance(format!("{} was trained with different statistics", kind.name())));
        }
        let test = load_inputs(&dir, kind, Split::Test, &stats)?;
        match &reference {
            None => reference = Some((test.origins.clone(), test.y.clone())),
            Some((o, y)) if *o != test.origins || *y != test.y => {
                return Err(Error::Provenance(format!("test inputs of {} do not match the other models", kind.name())));
            }
            _ => {}
        }
        let refs: Vec<&[f64]> = test.x.iter().map(Vec::as_slice).collect();
        let pred = ck.predict_many(&refs)?;
        rows.push(ReportRow { kind, n_test: pred.len(), test_mse: mse(&pred, &test.y)?, val_mse: ck.header.val_mse });
        predictions.push(pred);
    }
    let (origins, labels) = reference.expect("at least one model");
    let report = Report { rows, origins, labels, predictions };
    write_report(&dir, &report)?;
    Ok(report)
}

fn write_report(dir: &RunDir, report: &Report) -> Result<()> {
    let mut table = format!("{REPORT_HEADER}\n");
    for r in &report.rows {
        let _ = writeln!(table, "{},{},{},{}", r.kind.name(), r.n_test, r.test_mse, r.val_mse);
    }
    write_file(&dir.report("test_mse.csv"), table.as_bytes())?;

    let names: Vec<&str> = report.rows.iter().map(|r| r.kind.name()).collect();
    let mut preds = format!("origin_id,scaled_label,{}\n", names.join(","));
    // squared errors per model, then differences against the first model
    let reference = names[0];
    let mut paired = format!("origin_id,{}", names.iter().map(|n| format!("sq_err_{n}")).collect::<Vec<_>>().join(","));
    for n in &names[1..] {
        let _ = write!(paired, ",diff_{n}_minus_{reference}");
    }
    paired.push('\n');
    for (i, (id, y)) in report.origins.iter().zip(&report.labels).enumerate() {
        let _ = write!(preds, "{id},{y}");
        let _ = write!(paired, "{id}");
        let sq: Vec<f64> = report.predictions.iter().map(|p| (p[i] - y) * (p[i] - y)).collect();
        for p in &report.predictions {
            let _ = write!(preds, ",{}", p[i]);
        }
        for e in &sq {
            let _ = write!(paired, ",{e}");
        }
        for e in &sq[1..] {
            let _ = write!(paired, ",{}", e - sq[0]);
        }
        preds.push('\n');
        paired.push('\n');
    }
    write_file(&dir.report("predictions.csv"), preds.as_bytes())?;
    write_file(&dir.report("paired_sq_err.csv"), paired.as_bytes())?;

    let mut summary = String::from("Test MSE (lower is better)\n\n");
    let width = names.iter().map(|n| n.len()).max().unwrap_or(5).max(5);
    let _ = writeln!(summary, "{:<width$}  {:>10}  {:>10}  {:>6}", "model", "test_mse", "val_mse", "n");
    for r in &report.rows {
        let _ = writeln!(summary, "{:<width$}  {:>10.5}  {:>10.5}  {:>6}", r.kind.name(), r.test_mse, r.val_mse, r.n_test);
    }
    write_file(&dir.report("summary.txt"), summary.as_bytes())?;
    Ok(())
}

/// Trains every model listed in the config, then evaluates them together.
pub fn cmd_compare(cfg: &RunConfig) -> Result<Report> {
    for &kind in &cfg.model.compare {
        cmd_train(cfg, kind)?;
    }
    cmd_evaluate(cfg, &cfg.model.compare)
}
