use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use inpaint_opt::harness::{read_records, CSV_HEADER};
use inpaint_opt::{pnm, tonal, Image, Mask};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_inpaint-opt"))
}

fn corpus_image(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/corpus").join(format!("{name}.pgm"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn field(out: &str, key: &str) -> String {
    out.split_whitespace()
        .find_map(|t| t.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key}= in {out:?}"))
        .to_string()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn bundled_corpus_is_64_square() {
    for name in inpaint_opt::corpus::NAMES {
        let img = pnm::load_image(corpus_image(name)).unwrap();
        assert_eq!((img.width(), img.height()), (64, 64));
        assert_eq!(&img, &inpaint_opt::corpus::synthetic(name, 64).unwrap());
    }
}

#[test]
fn mask_random_hits_exact_count() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("big.pgm");
    pnm::save_image(&inpaint_opt::corpus::synthetic("scene", 128).unwrap(), &img).unwrap();
    let mask = dir.path().join("m.pgm");
    let o = run(&["mask", "--method", "random", "--density", "0.10", "--input", p(&img), "--output", p(&mask)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(pnm::load_mask(&mask).unwrap().count(), 1638);
    let out = stdout(&o);
    assert_eq!(field(&out, "density").parse::<f64>().unwrap(), 1638.0 / 16384.0);
    assert!(field(&out, "time_s").parse::<f64>().unwrap() >= 0.0);
}

#[test]
fn mask_aa_on_constant_image_warns() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("flat.pgm");
    pnm::save_image(&Image::filled(32, 32, 1, 0.5).unwrap(), &img).unwrap();
    let mask = dir.path().join("m.pgm");
    let o = run(&["mask", "--method", "aa", "--density", "0.1", "--input", p(&img), "--output", p(&mask)]);
    assert!(o.status.success());
    assert!(stdout(&o).lines().any(|l| l == "fallback=random"), "{}", stdout(&o));
}

#[test]
fn mask_ps_nlpe_density_within_one_pixel() {
    let dir = tempfile::tempdir().unwrap();
    let mask = dir.path().join("m.pgm");
    let o = run(&[
        "mask", "--method", "ps+nlpe", "--cycles", "5", "--density", "0.05", "--input",
        p(&corpus_image("blobs")), "--output", p(&mask),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let count = pnm::load_mask(&mask).unwrap().count() as f64;
    assert!((count - 0.05 * 4096.0).abs() <= 1.0, "{count}");
}

#[test]
fn mask_rejects_unknown_method_and_bad_density() {
    let dir = tempfile::tempdir().unwrap();
    let mask = dir.path().join("m.pgm");
    let img = corpus_image("edges");
    for args in [["--method", "tonal_lsq", "--density", "0.1"], ["--method", "aa", "--density", "1.5"]] {
        let mut all = vec!["mask", "--input", p(&img), "--output", p(&mask)];
        all.extend(args);
        let o = run(&all);
        assert_eq!(o.status.code(), Some(1));
        assert!(stderr(&o).starts_with("error: "));
    }
}

#[test]
fn inpaint_full_mask_prints_inf() {
    let dir = tempfile::tempdir().unwrap();
    let mask = dir.path().join("full.pgm");
    pnm::save_mask(&Mask::full(inpaint_opt::Dims::new(64, 64)), &mask).unwrap();
    let out_img = dir.path().join("u.pgm");
    let o = run(&["inpaint", "--input", p(&corpus_image("ramps")), "--mask", p(&mask), "--output", p(&out_img)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "psnr=inf");
    assert!(out_img.exists());
}

#[test]
fn inpaint_empty_mask_fails() {
    let dir = tempfile::tempdir().unwrap();
    let mask = dir.path().join("empty.pgm");
    pnm::save_mask(&Mask::empty(inpaint_opt::Dims::new(64, 64)), &mask).unwrap();
    let o = run(&["inpaint", "--input", p(&corpus_image("ramps")), "--mask", p(&mask)]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr(&o).trim(), "error: empty mask");
}

#[test]
fn inpaint_dimension_mismatch_fails() {
    let dir = tempfile::tempdir().unwrap();
    let mask = dir.path().join("small.pgm");
    pnm::save_mask(&Mask::full(inpaint_opt::Dims::new(8, 8)), &mask).unwrap();
    let o = run(&["inpaint", "--input", p(&corpus_image("ramps")), "--mask", p(&mask)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("dimension"), "{}", stderr(&o));
}

#[test]
fn tonal_file_improves_psnr() {
    let dir = tempfile::tempdir().unwrap();
    let img = corpus_image("texture");
    let mask = dir.path().join("m.pgm");
    let tf = dir.path().join("t.tonal");
    assert!(run(&["mask", "--method", "aa", "--density", "0.05", "--input", p(&img), "--output", p(&mask)]).status.success());
    let o = run(&["tonal", "--input", p(&img), "--mask", p(&mask), "--output", p(&tf), "--method", "lsq"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(field(&stdout(&o), "time_s").parse::<f64>().unwrap() >= 0.0);

    let plain = run(&["inpaint", "--input", p(&img), "--mask", p(&mask)]);
    let tuned = run(&["inpaint", "--input", p(&img), "--mask", p(&mask), "--tonal", p(&tf)]);
    let a: f64 = field(&stdout(&plain), "psnr").parse().unwrap();
    let b: f64 = field(&stdout(&tuned), "psnr").parse().unwrap();
    assert!(b >= a, "{b} < {a}");
    // the TONAL file alone is enough
    let alone = run(&["inpaint", "--input", p(&img), "--tonal", p(&tf)]);
    assert_eq!(stdout(&alone), stdout(&tuned));
}

#[test]
fn tonal_single_pixel_stores_the_mean() {
    let dir = tempfile::tempdir().unwrap();
    let img = corpus_image("blobs");
    let f = pnm::load_image(&img).unwrap();
    let mask = dir.path().join("one.pgm");
    pnm::save_mask(&Mask::from_indices(f.dims(), [2080]).unwrap(), &mask).unwrap();
    let tf = dir.path().join("t.tonal");
    let o = run(&["tonal", "--input", p(&img), "--mask", p(&mask), "--output", p(&tf), "--tonal-tolerance", "1e-10"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let kd = tonal::load_known(&tf).unwrap();
    let mean = f.data().iter().sum::<f64>() / f.data().len() as f64;
    assert!((kd.value(0, 0) - mean).abs() < 1e-6, "{} vs {mean}", kd.value(0, 0));
}

#[test]
fn tonal_lsq_and_echo_agree_on_crop() {
    let dir = tempfile::tempdir().unwrap();
    let crop = pnm::load_image(corpus_image("scene")).unwrap().crop_center(32, 32).unwrap();
    let img = dir.path().join("crop.pgm");
    pnm::save_image(&crop, &img).unwrap();
    let mask = dir.path().join("m.pgm");
    assert!(run(&["mask", "--method", "random", "--density", "0.05", "--input", p(&img), "--output", p(&mask)]).status.success());
    let mut psnrs = Vec::new();
    for method in ["lsq", "echo"] {
        let tf = dir.path().join(format!("{method}.tonal"));
        let o = run(&[
            "tonal", "--input", p(&img), "--mask", p(&mask), "--output", p(&tf), "--method", method, "--sweeps", "50",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let inp = run(&["inpaint", "--input", p(&img), "--tonal", p(&tf)]);
        psnrs.push(field(&stdout(&inp), "psnr").parse::<f64>().unwrap());
    }
    assert!((psnrs[0] - psnrs[1]).abs() <= 0.05, "{psnrs:?}");
}

#[test]
fn tonal_empty_mask_fails() {
    let dir = tempfile::tempdir().unwrap();
    let mask = dir.path().join("empty.pgm");
    pnm::save_mask(&Mask::empty(inpaint_opt::Dims::new(64, 64)), &mask).unwrap();
    let tf = dir.path().join("t.tonal");
    let o = run(&["tonal", "--input", p(&corpus_image("edges")), "--mask", p(&mask), "--output", p(&tf)]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr(&o).trim(), "error: empty mask");
    assert!(!tf.exists());
}

#[test]
fn tonal_clamp_keeps_values_in_range() {
    let dir = tempfile::tempdir().unwrap();
    let img = corpus_image("edges");
    let mask = dir.path().join("m.pgm");
    assert!(run(&["mask", "--method", "aa", "--density", "0.03", "--input", p(&img), "--output", p(&mask)]).status.success());
    let tf = dir.path().join("t.tonal");
    assert!(run(&["tonal", "--input", p(&img), "--mask", p(&mask), "--output", p(&tf), "--clamp"]).status.success());
    let kd = tonal::load_known(&tf).unwrap();
    assert!(kd.values().iter().all(|v| (0.0..=1.0).contains(v)));
}

fn corpus_dir(dir: &Path, names: &[&str]) -> PathBuf {
    let d = dir.join("imgs");
    fs::create_dir_all(&d).unwrap();
    for n in names {
        fs::copy(corpus_image(n), d.join(format!("{n}.pgm"))).unwrap();
    }
    d
}

#[test]
fn sweep_writes_rows_summary_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let imgs = corpus_dir(dir.path(), &["edges", "scene"]);
    let mut columns = Vec::new();
    for (k, threads) in ["1", "2"].iter().enumerate() {
        let csv = dir.path().join(format!("run{k}.csv"));
        let o = bin()
            .env("INPAINT_OPT_THREADS", threads)
            .args([
                "sweep", "--images", p(&imgs), "--methods", "random,aa", "--densities", "0.01,0.05,0.10,0.20",
                "--seed", "4", "--csv", p(&csv),
            ])
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        let text = fs::read_to_string(&csv).unwrap();
        assert_eq!(text.lines().next(), Some(CSV_HEADER));
        let records = read_records(&text).unwrap();
        assert_eq!(records.len(), 16);
        for image in ["edges", "scene"] {
            assert_eq!(records.iter().filter(|r| r.image == image).count(), 8);
        }
        assert!(records.iter().all(|r| r.seed == 4 && r.time_s >= 0.0));
        columns.push(records.iter().map(|r| r.psnr.to_bits()).collect::<Vec<_>>());
        let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(summary.lines().next(), Some("method,density,mean_psnr,mean_time_s,count"));
        assert_eq!(summary.lines().count(), 1 + 8);
    }
    assert_eq!(columns[0], columns[1]);
}

#[test]
fn sweep_continues_past_failures_and_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let imgs = corpus_dir(dir.path(), &["ramps"]);
    let csv = dir.path().join("out.csv");
    let o = run(&["sweep", "--images", p(&imgs), "--methods", "random,masknet", "--densities", "0.1", "--csv", p(&csv)]);
    assert_eq!(o.status.code(), Some(1));
    let records = read_records(&fs::read_to_string(&csv).unwrap()).unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0].method.as_str(), "random");
}

#[test]
fn sweep_reads_exported_neural_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let imgs = corpus_dir(dir.path(), &["blobs"]);
    let neural = dir.path().join("neural");
    fs::create_dir_all(&neural).unwrap();
    let f = pnm::load_image(imgs.join("blobs.pgm")).unwrap();
    let mask = inpaint_opt::spatial::mask_random(f.dims(), 0.1, 8).unwrap();
    pnm::save_mask(&mask, neural.join("blobs.masknet.0.1.pgm")).unwrap();
    let kd = inpaint_opt::KnownData::from_image(&f, &mask).unwrap();
    tonal::save_known(&kd, neural.join("blobs.tonalnet.0.1.tonal")).unwrap();

    let csv = dir.path().join("out.csv");
    let o = run(&[
        "sweep", "--images", p(&imgs), "--methods", "masknet,tonalnet", "--densities", "0.1", "--csv", p(&csv),
        "--neural-dir", p(&neural),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let records = read_records(&fs::read_to_string(&csv).unwrap()).unwrap();
    assert_eq!(records.len(), 2);
    // the same known data through both paths, up to the nine digits of the file
    assert!((records[0].psnr - records[1].psnr).abs() < 1e-6);
    assert!(records.iter().all(|r| r.time_s == 0.0));
}

#[test]
fn sweep_with_tonal_rows() {
    let dir = tempfile::tempdir().unwrap();
    let imgs = corpus_dir(dir.path(), &["texture"]);
    let csv = dir.path().join("out.csv");
    let o = run(&[
        "sweep", "--images", p(&imgs), "--methods", "aa,tonal_lsq,tonal_echo", "--densities", "0.05", "--csv", p(&csv),
        "--tonal-base", "aa",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = read_records(&fs::read_to_string(&csv).unwrap()).unwrap();
    assert_eq!(r.len(), 3);
    assert!(r[1].psnr > r[0].psnr && r[2].psnr > r[0].psnr, "{r:?}");
}

#[test]
fn config_file_with_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let mask = dir.path().join("m.pgm");
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        format!("# mask settings\nmethod = random\ndensity = 0.2\ninput = {}\noutput = {}\n", p(&corpus_image("edges")), p(&mask)),
    )
    .unwrap();
    let o = run(&["mask", "--config", p(&cfg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(pnm::load_mask(&mask).unwrap().count(), 819);
    let o = run(&["mask", "--config", p(&cfg), "--density", "0.05"]);
    assert!(o.status.success());
    assert_eq!(pnm::load_mask(&mask).unwrap().count(), 205);

    fs::write(&cfg, "colour = blue\n").unwrap();
    let o = run(&["mask", "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown config key"));
}

#[test]
fn bench_reports_trends() {
    let dir = tempfile::tempdir().unwrap();
    let imgs = corpus_dir(dir.path(), &["scene"]);
    let csv = dir.path().join("bench.csv");
    let o = run(&[
        "bench", "--images", p(&imgs), "--methods", "random,aa", "--densities", "0.05,0.1,0.2", "--repeats", "2", "--csv",
        p(&csv),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.lines().any(|l| l.starts_with("time_density_r aa ")), "{out}");
    assert_eq!(read_records(&fs::read_to_string(&csv).unwrap()).unwrap().len(), 12);
}

#[test]
fn bad_thread_cap_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let imgs = corpus_dir(dir.path(), &["scene"]);
    let csv = dir.path().join("out.csv");
    let o = bin()
        .env("INPAINT_OPT_THREADS", "zero")
        .args(["sweep", "--images", p(&imgs), "--methods", "random", "--densities", "0.1", "--csv", p(&csv)])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("INPAINT_OPT_THREADS"));
}

#[test]
fn corpus_subcommand_writes_images() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["corpus", "--output", p(dir.path()), "--size", "16"]);
    assert!(o.status.success());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 5);
}
