use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};

use inpaint_opt::harness::{self, Method, PipelineOptions, SweepConfig};
use inpaint_opt::tonal::{self, TonalMethod};
use inpaint_opt::{corpus, inpaint, pnm, psnr, Image, KnownData, SolverParams};

#[derive(Parser)]
#[command(name = "inpaint-opt", version, about = "Sparse data optimisation for diffusion inpainting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a mask and write it as a {0,255} PGM.
    Mask(MaskArgs),
    /// Inpaint from a mask or a TONAL file and print the PSNR.
    Inpaint(InpaintArgs),
    /// Optimise the values stored at a mask and write a TONAL file.
    Tonal(TonalArgs),
    /// Run every method at every density on a directory of images.
    Sweep(SweepArgs),
    /// Time methods over densities with repeats.
    Bench(SweepArgs),
    /// Write the bundled synthetic images as PGM files.
    Corpus(CorpusArgs),
}

#[derive(Args, Default)]
struct Tunables {
    /// Candidate fraction of probabilistic sparsification.
    #[arg(long)]
    p: Option<f64>,
    /// Fraction of candidates put back per sparsification step.
    #[arg(long)]
    q: Option<f64>,
    /// Pixel exchange cycles.
    #[arg(long)]
    cycles: Option<usize>,
    /// Pixels moved per exchange.
    #[arg(long)]
    swap_size: Option<usize>,
    /// Relative residual tolerance of the inpainting solver.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Echo sweeps of the echo tonal method.
    #[arg(long)]
    sweeps: Option<usize>,
    /// Stopping tolerance of the least squares tonal method.
    #[arg(long)]
    tonal_tolerance: Option<f64>,
}

#[derive(Args)]
struct MaskArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// random, aa, ps or ps+nlpe
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    density: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    tune: Tunables,
}

#[derive(Args)]
struct InpaintArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Stored values to use instead of the original ones.
    #[arg(long)]
    tonal: Option<PathBuf>,
    /// Where to write the reconstruction.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Args)]
struct TonalArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// lsq or echo
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Clamp the stored values to [0, 1].
    #[arg(long)]
    clamp: bool,
    #[command(flatten)]
    tune: Tunables,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory of PGM/PPM images.
    #[arg(long)]
    images: Option<PathBuf>,
    /// Comma separated, e.g. random,aa,ps,ps+nlpe,tonal_lsq
    #[arg(long)]
    methods: Option<String>,
    /// Comma separated, e.g. 0.01,0.05,0.1,0.2
    #[arg(long)]
    densities: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Mask method optimised by the tonal methods.
    #[arg(long)]
    tonal_base: Option<String>,
    /// Directory of exported neural masks and TONAL files.
    #[arg(long)]
    neural_dir: Option<PathBuf>,
    /// Centre crop every image to WxH first.
    #[arg(long)]
    crop: Option<String>,
    /// Repetitions (bench only).
    #[arg(long)]
    repeats: Option<usize>,
    #[command(flatten)]
    tune: Tunables,
}

#[derive(Args)]
struct CorpusArgs {
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 64)]
    size: usize,
}

/// `key=value` settings from `--config`; flags take precedence.
struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    fn load(path: Option<&Path>, allowed: &[&str]) -> anyhow::Result<Self> {
        let values = match path {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                harness::parse_config(&text)?
            }
            None => BTreeMap::new(),
        };
        if let Some(k) = values.keys().find(|k| !allowed.contains(&k.as_str())) {
            bail!("unknown config key '{k}'");
        }
        Ok(Self { values })
    }

    fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> anyhow::Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.values
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| anyhow!("config key {key}: {e}")))
            .transpose()
    }

    fn require<T: FromStr>(&self, flag: Option<T>, key: &str) -> anyhow::Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.pick(flag, key)?
            .ok_or_else(|| anyhow!("missing --{}", key.replace('_', "-")))
    }
}

const TUNABLE_KEYS: [&str; 7] = ["p", "q", "cycles", "swap_size", "tolerance", "sweeps", "tonal_tolerance"];

fn keys(extra: &[&'static str]) -> Vec<&'static str> {
    TUNABLE_KEYS.iter().chain(extra).copied().collect()
}

fn options(cfg: &Config, t: Tunables) -> anyhow::Result<PipelineOptions> {
    let mut o = PipelineOptions::default();
    if let Some(v) = cfg.pick(t.p, "p")? {
        o.candidate_fraction = v;
    }
    if let Some(v) = cfg.pick(t.q, "q")? {
        o.return_fraction = v;
    }
    if let Some(v) = cfg.pick(t.cycles, "cycles")? {
        o.cycles = v;
    }
    if let Some(v) = cfg.pick(t.swap_size, "swap_size")? {
        o.swap_size = v;
    }
    if let Some(v) = cfg.pick(t.tolerance, "tolerance")? {
        o.solver = SolverParams::with_tolerance(v);
    }
    if let Some(v) = cfg.pick(t.sweeps, "sweeps")? {
        o.tonal.echo_sweeps = v;
    }
    if let Some(v) = cfg.pick(t.tonal_tolerance, "tonal_tolerance")? {
        o.tonal.outer_tolerance = v;
    }
    Ok(o)
}

fn parse_crop(s: &str) -> anyhow::Result<(usize, usize)> {
    let (w, h) = s.split_once('x').ok_or_else(|| anyhow!("crop '{s}' is not WxH"))?;
    Ok((w.trim().parse()?, h.trim().parse()?))
}

fn cmd_mask(a: MaskArgs) -> anyhow::Result<()> {
    let cfg = Config::load(a.config.as_deref(), &keys(&["input", "output", "method", "density", "seed"]))?;
    let input: PathBuf = cfg.require(a.input, "input")?;
    let output: PathBuf = cfg.require(a.output, "output")?;
    let method: Method = cfg.require::<String>(a.method, "method")?.parse()?;
    let density: f64 = cfg.require(a.density, "density")?;
    let seed = cfg.pick(a.seed, "seed")?.unwrap_or(0);
    let opts = options(&cfg, a.tune)?;
    if !method.is_spatial() {
        bail!("mask method must be one of random, aa, ps, ps+nlpe");
    }
    let f = pnm::load_image(&input)?;
    let run = harness::compute_mask(method, &f, density, seed, &opts)?;
    if run.fell_back {
        println!("fallback=random");
    }
    pnm::save_mask(&run.mask, &output)?;
    println!("density={} time_s={:.6}", run.mask.density(), run.time_s);
    Ok(())
}

fn cmd_inpaint(a: InpaintArgs) -> anyhow::Result<()> {
    let cfg = Config::load(a.config.as_deref(), &["input", "mask", "tonal", "output", "tolerance"])?;
    let input: PathBuf = cfg.require(a.input, "input")?;
    let mask: Option<PathBuf> = cfg.pick(a.mask, "mask")?;
    let tonal_path: Option<PathBuf> = cfg.pick(a.tonal, "tonal")?;
    let output: Option<PathBuf> = cfg.pick(a.output, "output")?;
    let solver = match cfg.pick(a.tolerance, "tolerance")? {
        Some(t) => SolverParams::with_tolerance(t),
        None => SolverParams::default(),
    };
    let f = pnm::load_image(&input)?;
    let known = match (&tonal_path, &mask) {
        (Some(t), m) => {
            let kd = tonal::load_known(t)?;
            if let Some(m) = m {
                if pnm::load_mask(m)? != kd.mask() {
                    bail!("TONAL positions differ from the mask");
                }
            }
            kd
        }
        (None, Some(m)) => KnownData::from_image(&f, &pnm::load_mask(m)?)?,
        (None, None) => bail!("missing --mask or --tonal"),
    };
    if known.dims() != f.dims() || known.channels() != f.channels() {
        return Err(inpaint_opt::Error::DimensionMismatch {
            expected: format!("{} x{}", f.dims(), f.channels()),
            found: format!("{} x{}", known.dims(), known.channels()),
        }
        .into());
    }
    let u = inpaint(&known, &solver)?;
    if let Some(out) = output {
        pnm::save_image(&u, &out)?;
    }
    println!("psnr={}", harness::format_psnr(psnr(&u, &f)?));
    Ok(())
}

fn cmd_tonal(a: TonalArgs) -> anyhow::Result<()> {
    let cfg = Config::load(a.config.as_deref(), &keys(&["input", "mask", "output", "method", "seed", "clamp"]))?;
    let input: PathBuf = cfg.require(a.input, "input")?;
    let mask: PathBuf = cfg.require(a.mask, "mask")?;
    let output: PathBuf = cfg.require(a.output, "output")?;
    let method: TonalMethod = cfg.pick::<String>(a.method, "method")?.as_deref().unwrap_or("lsq").parse()?;
    let seed = cfg.pick(a.seed, "seed")?.unwrap_or(0);
    let clamp = a.clamp || cfg.pick::<bool>(None, "clamp")?.unwrap_or(false);
    let opts = options(&cfg, a.tune)?;
    let f = pnm::load_image(&input)?;
    let c = pnm::load_mask(&mask)?;
    let (known, time_s) = harness::compute_tonal(method, &f, &c, seed, &opts)?;
    let known = if clamp { known.clamped() } else { known };
    tonal::save_known(&known, &output)?;
    println!("time_s={time_s:.6}");
    Ok(())
}

const SWEEP_KEYS: [&str; 9] = [
    "images",
    "methods",
    "densities",
    "seed",
    "csv",
    "tonal_base",
    "neural_dir",
    "crop",
    "repeats",
];

/// Images, sweep configuration, CSV path and repeat count.
type SweepSetup = (Vec<(String, Image)>, SweepConfig, Option<PathBuf>, usize);

fn sweep_setup(a: SweepArgs) -> anyhow::Result<SweepSetup> {
    let cfg = Config::load(a.config.as_deref(), &keys(&SWEEP_KEYS))?;
    let images: PathBuf = cfg.require(a.images, "images")?;
    let methods = harness::parse_list::<Method>(&cfg.require::<String>(a.methods, "methods")?)?;
    let densities = harness::parse_list::<f64>(&cfg.require::<String>(a.densities, "densities")?)?;
    let seed = cfg.pick(a.seed, "seed")?.unwrap_or(0);
    let csv: Option<PathBuf> = cfg.pick(a.csv, "csv")?;
    let crop = cfg.pick::<String>(a.crop, "crop")?;
    let repeats = cfg.pick(a.repeats, "repeats")?.unwrap_or(1);
    let mut sc = SweepConfig::new(methods, densities, seed);
    if let Some(b) = cfg.pick::<String>(a.tonal_base, "tonal_base")? {
        sc.tonal_base = b.parse()?;
    }
    sc.neural_dir = cfg.pick(a.neural_dir, "neural_dir")?;
    sc.options = options(&cfg, a.tune)?;

    let mut imgs = harness::load_images(&images)?;
    if imgs.is_empty() {
        bail!("no PGM/PPM images in {}", images.display());
    }
    if let Some(c) = crop {
        let (w, h) = parse_crop(&c)?;
        for (_, img) in imgs.iter_mut() {
            *img = img.crop_center(w, h)?;
        }
    }
    Ok((imgs, sc, csv, repeats))
}

fn report_failures(n: usize) -> anyhow::Result<()> {
    if n > 0 {
        bail!("{n} run(s) failed");
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> anyhow::Result<()> {
    let (images, sc, csv, _) = sweep_setup(a)?;
    let csv = csv.ok_or_else(|| anyhow!("missing --csv"))?;
    let pool = harness::thread_pool()?;
    let out = harness::run_sweep(&images, &sc, &pool)?;
    harness::write_outputs(&csv, &out.records)?;
    println!("rows={} failures={}", out.records.len(), out.failures.len());
    report_failures(out.failures.len())
}

fn cmd_bench(a: SweepArgs) -> anyhow::Result<()> {
    let (images, sc, csv, repeats) = sweep_setup(a)?;
    let pool = harness::thread_pool()?;
    let out = harness::run_bench(&images, &sc, repeats, &pool)?;
    if let Some(csv) = csv {
        harness::write_outputs(&csv, &out.records)?;
    }
    let rows = harness::summarise(&out.records);
    println!("method,density,mean_time_s,mean_psnr");
    for r in &rows {
        println!("{},{},{:.6},{}", r.method, r.density, r.mean_time_s, harness::format_psnr(r.mean_psnr));
    }
    for m in &sc.methods {
        let (d, t): (Vec<f64>, Vec<f64>) = out
            .records
            .iter()
            .filter(|r| r.method == *m)
            .map(|r| (r.density, r.time_s))
            .unzip();
        if d.len() > 1 {
            println!("time_density_r {m} {:.4}", harness::pearson(&d, &t));
        }
    }
    report_failures(out.failures.len())
}

fn cmd_corpus(a: CorpusArgs) -> anyhow::Result<()> {
    fs::create_dir_all(&a.output).with_context(|| format!("creating {}", a.output.display()))?;
    for (name, img) in corpus::synthetic_corpus(a.size) {
        pnm::save_image(&img, a.output.join(format!("{name}.pgm")))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Mask(a) => cmd_mask(a),
        Command::Inpaint(a) => cmd_inpaint(a),
        Command::Tonal(a) => cmd_tonal(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Corpus(a) => cmd_corpus(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
