//! Subcommand bodies. Each writes its outputs plus a `manifest.json` into an
//! output directory; nothing goes to stdout.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use log::info;
use num_bigint::BigUint;

use hwnas_core::{
    DeviceProfile, SearchReport, SearchSpace, ShrinkTrace, SimDeviceConfig,
};

use crate::config::{DeviceSource, RunConfig};
use crate::formats::{self, Document, MeasurementLog};
use crate::manifest::RunManifest;
use crate::parallel::Pool;
use crate::pipeline::{self, Seeds};
use crate::render;

pub const MANIFEST: &str = "manifest.json";
pub const DEVICE: &str = "device.json";
pub const PROFILE: &str = "profile.json";
pub const MEASUREMENTS: &str = "measurements.json";
pub const SHRUNK_SPACE: &str = "shrunk_space.json";
pub const SHRINK_TRACE: &str = "shrink_trace.json";
pub const SHRINK_TABLE: &str = "shrink_trace.txt";
pub const SEARCH_REPORT: &str = "search_report.json";
pub const POPULATION: &str = "population.csv";
pub const HISTOGRAM: &str = "histogram.csv";
pub const SUMMARY: &str = "summary.txt";

const NOTES: [&str; 2] = [
    "crossover_prob is applied once per child; a child not produced by crossover clones one parent",
    "mutation_prob is applied per gene (per slot under mutation_scope per-slot); a redrawn slot is uniform over its domain including the current value",
];

/// Collects outputs and timings for the manifest of one command.
pub struct Recorder {
    out_dir: PathBuf,
    manifest: RunManifest,
}

impl Recorder {
    pub fn new(out_dir: &Path, command: &str, seed: u64, jobs: usize) -> Result<Self> {
        fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
        let mut manifest = RunManifest::new(command, seed);
        manifest.metadata.jobs = jobs;
        manifest.metadata.notes = NOTES.iter().map(|s| s.to_string()).collect();
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            manifest,
        })
    }

    pub fn input(&mut self, name: &str, path: &Path) {
        self.manifest.inputs.insert(name.into(), path.display().to_string());
    }

    fn path_for(&mut self, name: &str, file: &str) -> PathBuf {
        self.manifest.outputs.insert(name.into(), file.into());
        self.out_dir.join(file)
    }

    pub fn doc<T: Document>(&mut self, name: &str, file: &str, doc: &T) -> Result<()> {
        let path = self.path_for(name, file);
        formats::write(&path, doc)
    }

    pub fn text(&mut self, name: &str, file: &str, text: &str) -> Result<()> {
        let path = self.path_for(name, file);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn with_path<F>(&mut self, name: &str, file: &str, f: F) -> Result<()>
    where
        F: FnOnce(&Path) -> Result<()>,
    {
        let path = self.path_for(name, file);
        f(&path)
    }

    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f(self)?;
        let ms = start.elapsed().as_secs_f64() * 1e3;
        info!("{stage}: {ms:.1} ms");
        self.manifest.metadata.timings_ms.insert(stage.into(), ms);
        Ok(out)
    }

    /// Checks that every named output exists and writes the manifest.
    pub fn finish(mut self) -> Result<PathBuf> {
        for file in self.manifest.outputs.values() {
            let p = self.out_dir.join(file);
            ensure!(p.is_file(), "output {} was not written", p.display());
        }
        let path = self.path_for("manifest", MANIFEST);
        formats::write(&path, &self.manifest)?;
        Ok(path)
    }
}

pub fn load_space(path: Option<&Path>) -> Result<SearchSpace> {
    match path {
        Some(p) => formats::read(p),
        None => Ok(SearchSpace::shufflenet_like()),
    }
}

pub fn gen_device(template: &str, seed: u64, space: Option<&Path>, out: &Path) -> Result<()> {
    let space = load_space(space)?;
    let device = pipeline::generate_device(template, &space, seed)?;
    formats::write(out, &device)
}

pub struct ProfileArgs<'a> {
    pub device: &'a Path,
    pub space: Option<&'a Path>,
    pub m: usize,
    pub holdout: usize,
    pub seed: u64,
    pub out_dir: &'a Path,
}

pub fn profile(args: &ProfileArgs<'_>) -> Result<()> {
    let mut rec = Recorder::new(args.out_dir, "profile", args.seed, 1)?;
    rec.input("device", args.device);
    if let Some(s) = args.space {
        rec.input("space", s);
    }
    let space = load_space(args.space)?;
    let device: SimDeviceConfig = formats::read(args.device)?;
    rec.time("profile", |rec| {
        let (profile, log) = pipeline::profile_device(&device, &space, args.m, args.holdout, args.seed)?;
        report_profile(&profile, &log);
        rec.doc("profile", PROFILE, &profile)?;
        rec.doc("measurements", MEASUREMENTS, &log)
    })?;
    rec.finish()?;
    Ok(())
}

fn report_profile(profile: &DeviceProfile, log: &MeasurementLog) {
    info!(
        "{}: bias {:.4} ms, in-sample rmse {:.4} ms over {} records",
        profile.device_name,
        profile.bias_ms,
        profile.calibration_rmse_ms.unwrap_or(f64::NAN),
        log.calibration.len()
    );
    if let Some(r) = log.holdout_rmse_ms {
        info!("held-out rmse {r:.4} ms over {} records", log.holdout.len());
    }
}

/// A parsed run config with paths resolved and seeds derived.
pub struct Session {
    pub config: RunConfig,
    pub config_path: PathBuf,
    base: PathBuf,
    pub seed: u64,
    pub seeds: Seeds,
    pub pool: Pool,
}

impl Session {
    pub fn open(config_path: &Path, seed: Option<u64>, jobs: usize) -> Result<Self> {
        let config: RunConfig = formats::read(config_path)?;
        let seed = seed.unwrap_or(config.seed);
        let base = config_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        Ok(Self {
            config,
            config_path: config_path.to_path_buf(),
            base,
            seed,
            seeds: Seeds::derive(seed),
            pool: Pool::new(jobs)?,
        })
    }

    fn path(&self, p: &Path) -> PathBuf {
        formats::resolve(&self.base, p)
    }

    fn recorder(&self, out_dir: &Path, command: &str) -> Result<Recorder> {
        let mut rec = Recorder::new(out_dir, command, self.seed, self.pool.threads())?;
        rec.input("config", &self.config_path);
        Ok(rec)
    }

    fn space(&self, rec: &mut Recorder) -> Result<SearchSpace> {
        match &self.config.space {
            Some(p) => {
                let p = self.path(p);
                rec.input("space", &p);
                formats::read(&p)
            }
            None => Ok(SearchSpace::shufflenet_like()),
        }
    }

    /// Loads the profile named in the config, or simulates a device and
    /// profiles it, recording the intermediate documents.
    fn profile(&self, space: &SearchSpace, rec: &mut Recorder) -> Result<DeviceProfile> {
        if let Some(p) = &self.config.profile {
            let p = self.path(p);
            rec.input("profile", &p);
            return formats::read(&p);
        }
        let device = match &self.config.device {
            DeviceSource::Template(t) => {
                let device = pipeline::generate_device(t, space, self.seeds.device)?;
                rec.doc("device", DEVICE, &device)?;
                device
            }
            DeviceSource::Path(p) => {
                let p = self.path(p);
                rec.input("device", &p);
                formats::read(&p)?
            }
        };
        rec.time("profile", |rec| {
            let (profile, log) = pipeline::profile_device(
                &device,
                space,
                self.config.measurements,
                self.config.holdout,
                self.seeds.profile,
            )?;
            report_profile(&profile, &log);
            rec.doc("profile", PROFILE, &profile)?;
            rec.doc("measurements", MEASUREMENTS, &log)?;
            Ok(profile)
        })
    }

    fn run_shrink(
        &self,
        space: &SearchSpace,
        profile: &DeviceProfile,
        rec: &mut Recorder,
    ) -> Result<SearchSpace> {
        let oracle = pipeline::build_oracle(&self.config.oracle, space, self.seeds.oracle)?;
        let obj = pipeline::objective(self.config.objective, profile, oracle.as_ref(), space)?;
        rec.time("shrink", |rec| {
            let (shrunk, trace) =
                pipeline::shrink(space, &self.config.shrink, &obj, self.seeds.shrink, &self.pool)?;
            info!(
                "shrink: {} estimates, size {} -> {}",
                trace.total_evaluated,
                space.size(),
                shrunk.size()
            );
            rec.doc("shrunk_space", SHRUNK_SPACE, &shrunk)?;
            rec.doc("shrink_trace", SHRINK_TRACE, &trace)?;
            rec.text("shrink_table", SHRINK_TABLE, &render::shrink_table(&trace, space))?;
            Ok(shrunk)
        })
    }

    /// The oracle is always generated over the unshrunk space so that
    /// shrinking and search score architectures identically.
    fn run_search(
        &self,
        full: &SearchSpace,
        space: &SearchSpace,
        profile: &DeviceProfile,
        rec: &mut Recorder,
    ) -> Result<SearchReport> {
        let oracle = pipeline::build_oracle(&self.config.oracle, full, self.seeds.oracle)?;
        let obj = pipeline::objective(self.config.objective, profile, oracle.as_ref(), space)?;
        rec.time("search", |rec| {
            let report = pipeline::search(space, &obj, &self.config.ea, self.seeds.search, &self.pool)?;
            info!(
                "search: best score {:.6} at {:.3} ms after {} evaluations",
                report.best.score, report.best.latency_ms, report.evaluations
            );
            write_search_outputs(rec, &report, Some(space))?;
            Ok(report)
        })
    }

    pub fn shrink(&self, out_dir: &Path) -> Result<PathBuf> {
        let mut rec = self.recorder(out_dir, "shrink")?;
        let space = self.space(&mut rec)?;
        let profile = self.profile(&space, &mut rec)?;
        self.run_shrink(&space, &profile, &mut rec)?;
        rec.finish()
    }

    pub fn search(&self, out_dir: &Path) -> Result<PathBuf> {
        let mut rec = self.recorder(out_dir, "search")?;
        let space = self.space(&mut rec)?;
        let profile = self.profile(&space, &mut rec)?;
        self.run_search(&space, &space, &profile, &mut rec)?;
        rec.finish()
    }

    pub fn pipeline(&self, out_dir: &Path) -> Result<PathBuf> {
        let mut rec = self.recorder(out_dir, "pipeline")?;
        let start = Instant::now();
        let space = self.space(&mut rec)?;
        let profile = self.profile(&space, &mut rec)?;
        let shrunk = self.run_shrink(&space, &profile, &mut rec)?;
        self.run_search(&space, &shrunk, &profile, &mut rec)?;
        rec.manifest
            .metadata
            .timings_ms
            .insert("total".into(), start.elapsed().as_secs_f64() * 1e3);
        rec.finish()
    }
}

fn write_search_outputs(rec: &mut Recorder, report: &SearchReport, space: Option<&SearchSpace>) -> Result<()> {
    rec.doc("search_report", SEARCH_REPORT, report)?;
    rec.with_path("population", POPULATION, |p| render::write_population_csv(p, report))?;
    rec.with_path("histogram", HISTOGRAM, |p| render::write_histogram_csv(p, report))?;
    rec.text("summary", SUMMARY, &render::summary(report, space))
}

/// Re-renders the summary and histogram of an existing search report.
pub fn report(report_path: &Path, space: Option<&Path>, out_dir: &Path) -> Result<()> {
    let report: SearchReport = formats::read(report_path)?;
    check_report(&report).with_context(|| format!("checking {}", report_path.display()))?;
    let space = space.map(formats::read::<SearchSpace>).transpose()?;
    let mut rec = Recorder::new(out_dir, "report", report.seed, 1)?;
    rec.input("search_report", report_path);
    rec.with_path("histogram", HISTOGRAM, |p| render::write_histogram_csv(p, &report))?;
    rec.text("summary", SUMMARY, &render::summary(&report, space.as_ref()))?;
    rec.finish()?;
    Ok(())
}

fn check_report(r: &SearchReport) -> Result<()> {
    r.config.validate()?;
    ensure!(
        r.generations.len() == r.config.generations + 1,
        "{} generation records for {} generations",
        r.generations.len(),
        r.config.generations
    );
    for g in &r.generations {
        let total: u32 = g.histogram.iter().sum();
        ensure!(
            total as usize == r.config.population_size,
            "generation {} histogram holds {total} individuals, population is {}",
            g.generation,
            r.config.population_size
        );
        ensure!(
            g.best_score <= r.best.score,
            "generation {} beats the reported best",
            g.generation
        );
    }
    Ok(())
}

fn check_trace(t: &ShrinkTrace) -> Result<()> {
    let total: usize = t.records.iter().map(|r| r.candidates.len()).sum();
    ensure!(total == t.total_evaluated, "total_evaluated {} but {total} candidates", t.total_evaluated);
    for r in &t.records {
        ensure!(
            r.candidates.iter().any(|c| c.operator == r.chosen),
            "layer {}: chosen operator was not a candidate",
            r.layer
        );
        let k = BigUint::from(r.candidates.len());
        ensure!(
            &r.size_after * k == r.size_before,
            "layer {}: size {} does not shrink to {} by the candidate count",
            r.layer,
            r.size_before,
            r.size_after
        );
    }
    Ok(())
}

fn check_manifest(m: &RunManifest, dir: &Path) -> Result<()> {
    for file in m.outputs.values() {
        let p = dir.join(file);
        ensure!(p.is_file(), "listed output {} is missing", p.display());
    }
    Ok(())
}

/// Parses a document according to its schema tag and checks its contents.
/// Returns the schema.
pub fn validate(path: &Path) -> Result<String> {
    let schema = formats::peek_schema(path)?;
    let kind = schema
        .strip_prefix("hwnas.")
        .and_then(|s| s.strip_suffix("/v1"))
        .with_context(|| format!("{}: unknown schema {schema}", path.display()))?;
    let ctx = || format!("validating {}", path.display());
    match kind {
        "space" => {
            formats::read::<SearchSpace>(path)?;
        }
        "device" => formats::read::<SimDeviceConfig>(path)?.validate().with_context(ctx)?,
        "profile" => {
            let p: DeviceProfile = formats::read(path)?;
            ensure!(p.bias_ms.is_finite(), "{}: non-finite bias", path.display());
            ensure!(!p.table.is_empty(), "{}: empty latency table", path.display());
        }
        "measurements" => {
            let log: MeasurementLog = formats::read(path)?;
            ensure!(!log.calibration.is_empty(), "{}: no calibration records", path.display());
        }
        "config" => {
            let c: RunConfig = formats::read(path)?;
            c.objective.validate().with_context(ctx)?;
            c.ea.validate().with_context(ctx)?;
            ensure!(c.shrink.n_samples > 0, "{}: shrink.n_samples must be >= 1", path.display());
            ensure!(c.measurements > 0, "{}: measurements must be >= 1", path.display());
            if let DeviceSource::Template(t) = &c.device {
                t.parse::<hwnas_core::DeviceTemplate>().with_context(ctx)?;
            }
        }
        "shrink-trace" => check_trace(&formats::read(path)?).with_context(ctx)?,
        "search-report" => check_report(&formats::read(path)?).with_context(ctx)?,
        "manifest" => {
            let dir = path.parent().unwrap_or(Path::new("."));
            check_manifest(&formats::read(path)?, dir).with_context(ctx)?;
        }
        _ => bail!("{}: unknown schema {schema}", path.display()),
    }
    Ok(schema)
}
