//! `clustercap bench`: timing runs and the CSV report.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::Args;
use clustercap::cuts::{CutCache, CutMatrix};
use clustercap::generate::GenParams;
use clustercap::instance::{read_instance, Instance};
use clustercap::models::{solve_capacity, ModelKind, SolveOptions};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Instance files, or directories of `*.json` instances.
    pub instances: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "generalized,alternative")]
    pub models: Vec<ModelKind>,
    #[arg(long, default_value_t = 3)]
    pub repetitions: usize,
    /// Instances processed concurrently.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub const HEADER: [&str; 20] = [
    "record",
    "instance",
    "sizecat",
    "shape",
    "locked",
    "density",
    "chambers",
    "seed",
    "model",
    "repetition",
    "rows",
    "columns",
    "nonzeros",
    "build_ms",
    "solve_ms",
    "rho",
    "status",
    "speedup",
    "size_ratio",
    "error",
];

/// One CSV line. `record` is `run`, `instance` or `group`.
#[derive(Debug, Clone, Default, Serialize)]
pub struct BenchRecord {
    pub record: &'static str,
    pub instance: String,
    pub sizecat: Option<u8>,
    pub shape: Option<String>,
    pub locked: Option<u8>,
    pub density: Option<u8>,
    pub chambers: Option<usize>,
    pub seed: Option<u64>,
    pub model: Option<ModelKind>,
    pub repetition: Option<usize>,
    pub rows: Option<usize>,
    pub columns: Option<usize>,
    pub nonzeros: Option<usize>,
    pub build_ms: Option<f64>,
    pub solve_ms: Option<f64>,
    pub rho: Option<f64>,
    pub status: Option<String>,
    /// Median generalized time over median alternative time; above 1 the alternative is faster.
    pub speedup: Option<f64>,
    /// Generalized nonzeros over alternative nonzeros.
    pub size_ratio: Option<f64>,
    pub error: Option<String>,
}

impl BenchRecord {
    fn labelled(record: &'static str, name: &str, chambers: usize) -> Self {
        let mut r = BenchRecord { record, instance: name.to_string(), chambers: Some(chambers), ..Default::default() };
        if let Some(p) = GenParams::from_name(name) {
            r.sizecat = Some(p.sizecat);
            r.shape = Some(p.shape.to_string());
            r.locked = Some(p.locked);
            r.density = Some(p.density);
            r.seed = Some(p.seed);
        }
        r
    }
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let k = values.len() / 2;
    Some(if values.len() % 2 == 1 { values[k] } else { 0.5 * (values[k - 1] + values[k]) })
}

/// Expands directories into their `*.json` files, sorted by name.
pub fn collect_instances(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut inner: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "json"))
                .collect();
            inner.sort();
            files.extend(inner);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn instance_name(inst: &Instance, path: &Path) -> String {
    if inst.name.is_empty() {
        path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
    } else {
        inst.name.clone()
    }
}

/// All runs for one instance plus its `instance` summary line.
fn bench_instance(
    path: &Path,
    models: &[ModelKind],
    repetitions: usize,
    cuts: &HashMap<usize, Arc<CutMatrix>>,
) -> Vec<BenchRecord> {
    let inst = match read_instance(path) {
        Ok(inst) => inst,
        Err(e) => {
            let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            return vec![BenchRecord { record: "run", instance: name, error: Some(e.to_string()), ..Default::default() }];
        }
    };
    let name = instance_name(&inst, path);
    let opts = SolveOptions { cuts: cuts.get(&inst.chambers).cloned(), cache: None };
    let mut out = Vec::new();
    let mut times: BTreeMap<ModelKind, Vec<f64>> = BTreeMap::new();
    let mut sizes: BTreeMap<ModelKind, usize> = BTreeMap::new();
    for &model in models {
        for rep in 0..repetitions {
            let mut rec = BenchRecord::labelled("run", &name, inst.chambers);
            rec.model = Some(model);
            rec.repetition = Some(rep);
            match solve_capacity(&inst, model, &opts) {
                Ok(res) => {
                    rec.rows = Some(res.stats.rows);
                    rec.columns = Some(res.stats.columns);
                    rec.nonzeros = Some(res.stats.nonzeros);
                    rec.build_ms = Some(res.build_ms);
                    rec.solve_ms = Some(res.solve_ms);
                    rec.rho = Some(res.rho);
                    rec.status = Some(res.status.to_string());
                    times.entry(model).or_default().push(res.build_ms + res.solve_ms);
                    sizes.insert(model, res.stats.nonzeros);
                }
                Err(e) => rec.error = Some(e.to_string()),
            }
            out.push(rec);
        }
    }
    let mut summary = BenchRecord::labelled("instance", &name, inst.chambers);
    let mut med = |k| times.get_mut(&k).and_then(|t| median(t));
    if let (Some(g), Some(a)) = (med(ModelKind::Generalized), med(ModelKind::Alternative)) {
        summary.speedup = Some(g / a);
    }
    if let (Some(&g), Some(&a)) = (sizes.get(&ModelKind::Generalized), sizes.get(&ModelKind::Alternative)) {
        summary.size_ratio = Some(g as f64 / a as f64);
    }
    out.push(summary);
    out
}

/// Median speedup and size ratio over instances sharing every generator parameter but the seed.
fn group_summaries(records: &[BenchRecord]) -> Vec<BenchRecord> {
    type Key = (Option<u8>, Option<String>, Option<u8>, Option<u8>, Option<usize>);
    let mut groups: BTreeMap<Key, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.record == "instance" && r.sizecat.is_some()) {
        let g = groups.entry((r.sizecat, r.shape.clone(), r.locked, r.density, r.chambers)).or_default();
        g.0.extend(r.speedup);
        g.1.extend(r.size_ratio);
    }
    groups
        .into_iter()
        .map(|((sizecat, shape, locked, density, chambers), (mut s, mut z))| BenchRecord {
            record: "group",
            sizecat,
            shape,
            locked,
            density,
            chambers,
            speedup: median(&mut s),
            size_ratio: median(&mut z),
            ..Default::default()
        })
        .collect()
}

pub fn run_bench(
    files: &[PathBuf],
    models: &[ModelKind],
    repetitions: usize,
    workers: usize,
) -> Result<Vec<BenchRecord>> {
    if repetitions == 0 {
        bail!("--repetitions must be at least 1");
    }
    // Cut matrices are loaded up front so they never count towards build time.
    let mut cuts = HashMap::new();
    if models.contains(&ModelKind::Generalized) {
        let cache = CutCache::default_location();
        for f in files {
            if let Ok(inst) = read_instance(f) {
                if let std::collections::hash_map::Entry::Vacant(e) = cuts.entry(inst.chambers) {
                    e.insert(Arc::new(cache.load_or_build(inst.chambers)?));
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?;
    let per_instance: Vec<Vec<BenchRecord>> =
        pool.install(|| files.par_iter().map(|f| bench_instance(f, models, repetitions, &cuts)).collect());
    let mut records: Vec<BenchRecord> = per_instance.into_iter().flatten().collect();
    let groups = group_summaries(&records);
    records.extend(groups);
    Ok(records)
}

pub fn write_report(records: &[BenchRecord], w: impl Write) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wtr.write_record(HEADER)?;
    for r in records {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn run(args: &BenchArgs) -> Result<()> {
    let files = collect_instances(&args.instances)?;
    let records = run_bench(&files, &args.models, args.repetitions, args.workers)?;
    match &args.out {
        Some(path) => {
            let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_report(&records, f)
        }
        None => write_report(&records, std::io::stdout().lock()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&mut []), None);
    }

    #[test]
    fn empty_set_gives_header_only() {
        let mut buf = Vec::new();
        write_report(&run_bench(&[], &ModelKind::ALL, 3, 1).unwrap(), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), HEADER.join(",") + "\n");
    }

    #[test]
    fn record_serializes_to_header_width() {
        let mut buf = Vec::new();
        write_report(&[BenchRecord::labelled("run", "sc0-sh1x1-l0-d2-n3-s7", 3)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let line = text.lines().nth(1).unwrap();
        assert_eq!(line.split(',').count(), HEADER.len());
        assert!(line.starts_with("run,sc0-sh1x1-l0-d2-n3-s7,0,1:1,0,2,3,7,"));
    }
}
