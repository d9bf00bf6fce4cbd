//! Experiment orchestration: mask and tonal pipelines, density sweeps,
//! timing benchmarks and their CSV output.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{psnr, Image, KnownData, Mask};
use crate::pnm;
use crate::solver::{inpaint, SolverParams};
use crate::spatial::{mask_analytic, mask_random, nlpe, sparsify, NlpeParams, SparsifyParams};
use crate::tonal::{self, TonalMethod, TonalParams};

pub const CSV_HEADER: &str = "image,method,density,psnr,time_s,seed";
pub const SUMMARY_HEADER: &str = "method,density,mean_psnr,mean_time_s,count";

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "INPAINT_OPT_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Random,
    Aa,
    Ps,
    PsNlpe,
    Masknet,
    TonalLsq,
    TonalEcho,
    Tonalnet,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Random,
        Method::Aa,
        Method::Ps,
        Method::PsNlpe,
        Method::Masknet,
        Method::TonalLsq,
        Method::TonalEcho,
        Method::Tonalnet,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::Aa => "aa",
            Method::Ps => "ps",
            Method::PsNlpe => "ps_nlpe",
            Method::Masknet => "masknet",
            Method::TonalLsq => "tonal_lsq",
            Method::TonalEcho => "tonal_echo",
            Method::Tonalnet => "tonalnet",
        }
    }

    /// Methods computed here that produce a mask.
    pub fn is_spatial(self) -> bool {
        matches!(self, Method::Random | Method::Aa | Method::Ps | Method::PsNlpe)
    }

    pub fn is_tonal(self) -> bool {
        matches!(self, Method::TonalLsq | Method::TonalEcho)
    }

    /// Methods whose results are read from exported neural outputs.
    pub fn is_neural(self) -> bool {
        matches!(self, Method::Masknet | Method::Tonalnet)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['+', '-'], "_");
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == norm)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method '{s}'")))
    }
}

/// Parses a comma separated list such as `random,aa,ps+nlpe`.
pub fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|e| Error::InvalidParameter(format!("'{t}': {e}"))))
        .collect()
}

/// One measurement row.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub image: String,
    pub method: Method,
    pub density: f64,
    pub psnr: f64,
    pub time_s: f64,
    pub seed: u64,
}

/// Shortest round-trip decimal, `inf` for the identical-image sentinel.
pub fn format_psnr(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v}")
    }
}

impl RunRecord {
    fn fields(&self) -> [String; 6] {
        [
            self.image.clone(),
            self.method.to_string(),
            self.density.to_string(),
            format_psnr(self.psnr),
            format!("{:.6}", self.time_s),
            self.seed.to_string(),
        ]
    }
}

fn csv_text(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let write = |w: &mut csv::Writer<Vec<u8>>| -> csv::Result<()> {
        w.write_record(header.split(','))?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
        Ok(())
    };
    write(&mut w).expect("writing to memory");
    String::from_utf8(w.into_inner().expect("flushed")).expect("fields are UTF-8")
}

/// Every tunable of the mask and tonal pipelines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    pub candidate_fraction: f64,
    pub return_fraction: f64,
    pub cycles: usize,
    pub swap_size: usize,
    pub solver: SolverParams,
    pub tonal: TonalParams,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        let ps = SparsifyParams::new(0.1, 0);
        let nl = NlpeParams::new(0);
        Self {
            candidate_fraction: ps.candidate_fraction,
            return_fraction: ps.return_fraction,
            cycles: nl.cycles,
            swap_size: nl.swap_size,
            solver: SolverParams::default(),
            tonal: TonalParams::default(),
        }
    }
}

impl PipelineOptions {
    fn sparsify_params(&self, density: f64, seed: u64) -> SparsifyParams {
        SparsifyParams {
            candidate_fraction: self.candidate_fraction,
            return_fraction: self.return_fraction,
            target_density: density,
            seed,
        }
    }

    fn nlpe_params(&self, seed: u64) -> NlpeParams {
        NlpeParams {
            cycles: self.cycles,
            swap_size: self.swap_size,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MaskRun {
    pub mask: Mask,
    /// The analytic method saw no structure and used a random mask instead.
    pub fell_back: bool,
    pub time_s: f64,
}

/// Computes a mask with one of the spatial methods. Only the optimisation
/// itself is timed.
pub fn compute_mask(method: Method, f: &Image, density: f64, seed: u64, opts: &PipelineOptions) -> Result<MaskRun> {
    if !(density > 0.0 && density < 1.0) {
        if density == 0.0 {
            return Err(Error::EmptyMask);
        }
        return Err(Error::InvalidParameter(format!("density {density} outside (0, 1)")));
    }
    let start = Instant::now();
    let (mask, fell_back) = match method {
        Method::Random => (mask_random(f.dims(), density, seed)?, false),
        Method::Aa => {
            let out = mask_analytic(f, density, seed)?;
            (out.mask, out.fell_back)
        }
        Method::Ps => (sparsify(f, &opts.sparsify_params(density, seed), &opts.solver)?.mask, false),
        Method::PsNlpe => {
            let ps = sparsify(f, &opts.sparsify_params(density, seed), &opts.solver)?;
            (nlpe(f, &ps.mask, &opts.nlpe_params(seed), &opts.solver)?.mask, false)
        }
        other => {
            return Err(Error::InvalidParameter(format!("'{other}' does not compute a mask")));
        }
    };
    Ok(MaskRun {
        mask,
        fell_back,
        time_s: start.elapsed().as_secs_f64(),
    })
}

/// Tonal optimisation of the values at `mask`, timed.
pub fn compute_tonal(method: TonalMethod, f: &Image, mask: &Mask, seed: u64, opts: &PipelineOptions) -> Result<(KnownData, f64)> {
    let params = TonalParams {
        method,
        seed,
        ..opts.tonal
    };
    let start = Instant::now();
    let out = tonal::optimise(f, mask, &params)?;
    Ok((out.known, start.elapsed().as_secs_f64()))
}

/// PSNR of the inpainting from `known` against `f`.
pub fn evaluate(f: &Image, known: &KnownData, solver: &SolverParams) -> Result<f64> {
    psnr(&inpaint(known, solver)?, f)
}

pub fn evaluate_mask(f: &Image, mask: &Mask, solver: &SolverParams) -> Result<f64> {
    evaluate(f, &KnownData::from_image(f, mask)?, solver)
}

/// File name of an exported neural result, relative to the neural directory:
/// `<image>.masknet.<density>.pgm` or `<image>.tonalnet.<density>.tonal`.
pub fn neural_file_name(image: &str, method: Method, density: f64) -> String {
    let ext = if method == Method::Tonalnet { "tonal" } else { "pgm" };
    format!("{image}.{method}.{density}.{ext}")
}

/// Loads every PGM/PPM image of a directory, sorted by file name. The image
/// id is the file stem.
pub fn load_images(dir: &Path) -> Result<Vec<(String, Image)>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "pgm" | "ppm" | "pnm"))
        })
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let id = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            Ok((id, pnm::load_image(&p)?))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub methods: Vec<Method>,
    pub densities: Vec<f64>,
    pub seed: u64,
    /// Spatial method whose mask the tonal methods optimise.
    pub tonal_base: Method,
    pub neural_dir: Option<PathBuf>,
    pub options: PipelineOptions,
}

impl SweepConfig {
    pub fn new(methods: Vec<Method>, densities: Vec<f64>, seed: u64) -> Self {
        Self {
            methods,
            densities,
            seed,
            tonal_base: Method::PsNlpe,
            neural_dir: None,
            options: PipelineOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepResult {
    pub records: Vec<RunRecord>,
    /// `(image, method, density, message)` of every failed run.
    pub failures: Vec<(String, Method, f64, String)>,
}

/// Thread pool sized by `INPAINT_OPT_THREADS` when set, otherwise by rayon's
/// default.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::InvalidParameter(format!("{THREADS_ENV}={v} is not a positive integer")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))
}

/// Runs every requested method at one density on one image. Masks are
/// shared between methods so that `ps_nlpe` reuses `ps` and tonal rows
/// reuse their base mask; shared work is charged to every row using it.
fn run_cell(image: &str, f: &Image, density: f64, cfg: &SweepConfig) -> Vec<std::result::Result<RunRecord, (Method, String)>> {
    let opts = &cfg.options;
    let seed = cfg.seed;
    let mut masks: HashMap<Method, (Mask, f64)> = HashMap::new();

    let mask_for = |m: Method, masks: &mut HashMap<Method, (Mask, f64)>| -> Result<(Mask, f64)> {
        if let Some(hit) = masks.get(&m) {
            return Ok(hit.clone());
        }
        let got = if m == Method::PsNlpe {
            let (ps, t_ps) = match masks.get(&Method::Ps) {
                Some(hit) => hit.clone(),
                None => {
                    let run = compute_mask(Method::Ps, f, density, seed, opts)?;
                    masks.insert(Method::Ps, (run.mask.clone(), run.time_s));
                    (run.mask, run.time_s)
                }
            };
            let start = Instant::now();
            let out = nlpe(f, &ps, &opts.nlpe_params(seed), &opts.solver)?;
            (out.mask, t_ps + start.elapsed().as_secs_f64())
        } else {
            let run = compute_mask(m, f, density, seed, opts)?;
            if run.fell_back {
                log::warn!("{image}: density {density}: flat image, analytic mask fell back to random");
            }
            (run.mask, run.time_s)
        };
        masks.insert(m, got.clone());
        Ok(got)
    };

    let mut one = |m: Method| -> Result<RunRecord> {
        let (psnr, time_s) = if m.is_spatial() {
            let (mask, t) = mask_for(m, &mut masks)?;
            (evaluate_mask(f, &mask, &opts.solver)?, t)
        } else if m.is_tonal() {
            // timing covers the tonal optimisation only
            let (mask, _) = mask_for(cfg.tonal_base, &mut masks)?;
            let tm = if m == Method::TonalLsq { TonalMethod::Lsq } else { TonalMethod::Echo };
            let (known, t) = compute_tonal(tm, f, &mask, seed, opts)?;
            (evaluate(f, &known, &opts.solver)?, t)
        } else {
            let dir = cfg
                .neural_dir
                .as_ref()
                .ok_or_else(|| Error::InvalidParameter(format!("'{m}' needs a neural output directory")))?;
            let path = dir.join(neural_file_name(image, m, density));
            let known = if m == Method::Masknet {
                KnownData::from_image(f, &pnm::load_mask(&path)?)?
            } else {
                tonal::load_known(&path)?
            };
            if known.dims() != f.dims() {
                return Err(Error::dims(f.dims(), known.dims()));
            }
            // neural runtimes are not measured here
            (evaluate(f, &known, &opts.solver)?, 0.0)
        };
        Ok(RunRecord {
            image: image.to_string(),
            method: m,
            density,
            psnr,
            time_s,
            seed,
        })
    };

    cfg.methods
        .iter()
        .map(|&m| one(m).map_err(|e| (m, e.to_string())))
        .collect()
}

/// Runs the sweep over `images × densities × methods`. Cells run in
/// parallel on the given pool; records come back in a fixed order (image,
/// density, then method as requested) whatever the scheduling.
pub fn run_sweep(images: &[(String, Image)], cfg: &SweepConfig, pool: &rayon::ThreadPool) -> Result<SweepResult> {
    if cfg.methods.is_empty() || cfg.densities.is_empty() {
        return Err(Error::InvalidParameter("a sweep needs at least one method and one density".into()));
    }
    if !cfg.tonal_base.is_spatial() {
        return Err(Error::InvalidParameter(format!("tonal base '{}' is not a spatial method", cfg.tonal_base)));
    }
    let cells: Vec<(usize, f64)> = (0..images.len())
        .flat_map(|i| cfg.densities.iter().map(move |&d| (i, d)))
        .collect();
    let outputs: Vec<_> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(i, d)| run_cell(&images[i].0, &images[i].1, d, cfg))
            .collect()
    });
    let mut result = SweepResult::default();
    for (&(i, d), cell) in cells.iter().zip(outputs) {
        for r in cell {
            match r {
                Ok(rec) => result.records.push(rec),
                Err((m, msg)) => {
                    log::error!("{}: {m} at density {d}: {msg}", images[i].0);
                    result.failures.push((images[i].0.clone(), m, d, msg));
                }
            }
        }
    }
    Ok(result)
}

/// Runs the sweep `repeats` times, keeping every row. Used for timing.
pub fn run_bench(images: &[(String, Image)], cfg: &SweepConfig, repeats: usize, pool: &rayon::ThreadPool) -> Result<SweepResult> {
    if repeats == 0 {
        return Err(Error::InvalidParameter("repeats must be >= 1".into()));
    }
    let mut all = SweepResult::default();
    for _ in 0..repeats {
        let r = run_sweep(images, cfg, pool)?;
        all.records.extend(r.records);
        all.failures.extend(r.failures);
    }
    Ok(all)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub density: f64,
    pub mean_psnr: f64,
    pub mean_time_s: f64,
    pub count: usize,
}

/// Means per `(method, density)`, ordered by method then density.
pub fn summarise(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(Method, u64), (f64, f64, usize)> = BTreeMap::new();
    for r in records {
        // density bits sort correctly for non-negative floats
        let e = groups.entry((r.method, r.density.to_bits())).or_default();
        e.0 += r.psnr;
        e.1 += r.time_s;
        e.2 += 1;
    }
    groups
        .into_iter()
        .map(|((method, bits), (p, t, n))| SummaryRow {
            method,
            density: f64::from_bits(bits),
            mean_psnr: p / n as f64,
            mean_time_s: t / n as f64,
            count: n,
        })
        .collect()
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension("csv.partial");
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(text.as_bytes()).map_err(|e| Error::io(&tmp, e))?;
    drop(file);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn records_csv(records: &[RunRecord]) -> String {
    csv_text(CSV_HEADER, records.iter().map(|r| r.fields().to_vec()))
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    csv_text(
        SUMMARY_HEADER,
        rows.iter().map(|r| {
            vec![
                r.method.to_string(),
                r.density.to_string(),
                format_psnr(r.mean_psnr),
                format!("{:.6}", r.mean_time_s),
                r.count.to_string(),
            ]
        }),
    )
}

/// Path of the summary written next to a sweep CSV.
pub fn summary_path(csv: &Path) -> PathBuf {
    csv.with_file_name("summary.csv")
}

/// Writes the records to `csv` and their summary to `summary.csv` beside it.
pub fn write_outputs(csv: &Path, records: &[RunRecord]) -> Result<()> {
    write_atomic(csv, &records_csv(records))?;
    write_atomic(&summary_path(csv), &summary_csv(&summarise(records)))
}

/// Reads a CSV written by [`write_outputs`] back into records.
pub fn read_records(text: &str) -> Result<Vec<RunRecord>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::InvalidParameter(format!("CSV header: {e}")))?;
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(Error::InvalidParameter(format!("CSV header must be '{CSV_HEADER}'")));
    }
    reader
        .records()
        .enumerate()
        .map(|(n, rec)| {
            let bad = |what: &str| Error::InvalidParameter(format!("CSV record {}: bad {what}", n + 1));
            let rec = rec.map_err(|e| Error::InvalidParameter(format!("CSV record {}: {e}", n + 1)))?;
            if rec.len() != 6 {
                return Err(bad("column count"));
            }
            Ok(RunRecord {
                image: rec[0].to_string(),
                method: rec[1].parse()?,
                density: rec[2].parse().map_err(|_| bad("density"))?,
                psnr: rec[3].parse().map_err(|_| bad("psnr"))?,
                time_s: rec[4].parse().map_err(|_| bad("time"))?,
                seed: rec[5].parse().map_err(|_| bad("seed"))?,
            })
        })
        .collect()
}

/// Pearson correlation; NaN when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// Parses a `key=value` configuration file. Blank lines and lines starting
/// with `#` are ignored; dashes in keys are read as underscores.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidParameter(format!("config line {}: expected key=value", n + 1)))?;
        let key = k.trim().replace('-', "_");
        if key.is_empty() {
            return Err(Error::InvalidParameter(format!("config line {}: empty key", n + 1)));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}
