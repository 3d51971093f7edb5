use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bmi_core::io::{self, read_measurement};
use bmi_core::mask::{generate, MaskSpec};
use bmi_core::solvers::{admm_solve, gap_solve, EtaSchedule, SolverConfig};
use bmi_core::{Image, SensingOperator};
use tempfile::TempDir;

/// Wrong-mask (seed 43) GAP-TV PSNR on the camera fixture, from the dense
/// numpy reference in crates/core/tests/oracle.
const WRONG_MASK_PSNR_DB: f64 = 14.6621;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/camera_center64.pgm")
}

fn bmi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bmi"))
        .args(args)
        .output()
        .expect("spawn bmi")
}

fn ok(args: &[&str]) -> String {
    let out = bmi(args);
    assert!(
        out.status.success(),
        "bmi {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn stderr_line(out: &Output) -> String {
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert_eq!(err.lines().count(), 1, "expected one line, got {err:?}");
    err.trim_end().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn psnr_of(reference: &Path, test: &Path) -> f64 {
    let out = ok(&["metrics", "--reference", s(reference), "--test", s(test)]);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("psnr_db,ssim"));
    let row = lines.next().unwrap();
    assert_eq!(lines.next(), None);
    row.split(',').next().unwrap().parse().unwrap()
}

fn gradient(h: usize, w: usize, phase: usize) -> Image {
    Image::from_fn(h, w, |r, c| ((r * 7 + c * 3 + phase * 11) % 256) as f32 / 255.0).unwrap()
}

struct Encoded {
    dir: TempDir,
    measurement: PathBuf,
}

fn encode_fixture(seed: &str, grid: &str) -> Encoded {
    let dir = tempfile::tempdir().unwrap();
    let mask = dir.path().join("m.bmik");
    let y = dir.path().join("y.bmim");
    ok(&["mask-gen", "--height", "64", "--width", "64", "--seed", seed, "--out", s(&mask)]);
    ok(&["encode", "--image", s(&fixture()), "--mask", s(&mask), "--grid", grid, "--out", s(&y)]);
    Encoded { dir, measurement: y }
}

#[test]
fn unit_ratio_round_trip_is_lossless() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    ok(&["mask-gen", "--height", "64", "--width", "64", "--ones", "--out", s(&p("ones.bmik"))]);
    ok(&[
        "encode", "--image", s(&fixture()), "--mask", s(&p("ones.bmik")), "--grid", "1x1",
        "--out", s(&p("y.bmim")),
    ]);
    ok(&[
        "decode", "--measurement", s(&p("y.bmim")), "--tv-weight", "0", "--out", s(&p("r.f32")),
    ]);
    assert_eq!(psnr_of(&fixture(), &p("r.f32")), 100.0);
}

#[test]
fn wrong_mask_degrades_reconstruction() {
    let e = encode_fixture("42", "2x2");
    let p = |n: &str| e.dir.path().join(n);
    ok(&["mask-gen", "--height", "64", "--width", "64", "--seed", "43", "--out", s(&p("w.bmik"))]);
    ok(&["decode", "--measurement", s(&e.measurement), "--out", s(&p("good.f32"))]);
    ok(&[
        "decode", "--measurement", s(&e.measurement), "--mask", s(&p("w.bmik")),
        "--out", s(&p("bad.f32")),
    ]);
    let good = psnr_of(&fixture(), &p("good.f32"));
    let bad = psnr_of(&fixture(), &p("bad.f32"));
    assert!((bad - WRONG_MASK_PSNR_DB).abs() <= 1.0, "wrong-mask psnr {bad}");
    assert!(good - bad > 5.0, "correct {good} vs wrong {bad}");
}

#[test]
fn indivisible_grid_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("big.pgm");
    let mask = dir.path().join("m.bmik");
    io::write_image(&gradient(512, 512, 0), &img).unwrap();
    ok(&["mask-gen", "--height", "512", "--width", "512", "--seed", "1", "--out", s(&mask)]);
    let out = bmi(&[
        "encode", "--image", s(&img), "--mask", s(&mask), "--grid", "3x3",
        "--out", s(&dir.path().join("y.bmim")),
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr_line(&out).starts_with("ERROR IndivisibleGrid: "));

    ok(&[
        "encode", "--image", s(&img), "--mask", s(&mask), "--grid", "3x3", "--pad",
        "--out", s(&dir.path().join("y.bmim")),
    ]);
    ok(&[
        "decode", "--measurement", s(&dir.path().join("y.bmim")), "--iters", "2",
        "--out", s(&dir.path().join("r.pgm")),
    ]);
    let r = io::read_image(dir.path().join("r.pgm")).unwrap();
    assert_eq!(r.shape(), (512, 512));
}

fn f32_bytes(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap()
}

fn library_raw(m: &Path, cfg: &SolverConfig, out: &Path) {
    let meas = read_measurement(m).unwrap();
    let (h, w) = meas.original_shape();
    let mask = generate(&MaskSpec::new(h, w, 0.5, 42)).unwrap();
    let op = SensingOperator::new(&mask, meas.grid()).unwrap();
    let rec = match cfg.algorithm {
        bmi_core::solvers::Algorithm::Gap => gap_solve(&meas, &op, cfg, &cfg.tv_denoiser()),
        bmi_core::solvers::Algorithm::Admm => admm_solve(&meas, &op, cfg, &cfg.tv_denoiser()),
    }
    .unwrap();
    io::write_raw(&rec.image, out).unwrap();
}

#[test]
fn decode_matches_library_bytes() {
    let e = encode_fixture("42", "2x2");
    let p = |n: &str| e.dir.path().join(n);

    ok(&["decode", "--measurement", s(&e.measurement), "--out", s(&p("cli.f32"))]);
    library_raw(&e.measurement, &SolverConfig::default(), &p("lib.f32"));
    assert_eq!(f32_bytes(&p("cli.f32")), f32_bytes(&p("lib.f32")));

    ok(&[
        "decode", "--measurement", s(&e.measurement), "--preset", "stages10",
        "--eta", "0.5,0.1,0", "--tv-weight", "0.05", "--tv-inner", "8", "--no-clamp",
        "--out", s(&p("cli2.f32")),
    ]);
    let cfg = SolverConfig {
        eta_schedule: EtaSchedule::PerIteration(vec![0.5, 0.1, 0.0]),
        tv_weight: 0.05,
        tv_inner_iters: 8,
        clamp_final: false,
        ..SolverConfig::stages10()
    };
    library_raw(&e.measurement, &cfg, &p("lib2.f32"));
    assert_eq!(f32_bytes(&p("cli2.f32")), f32_bytes(&p("lib2.f32")));

    ok(&[
        "decode", "--measurement", s(&e.measurement), "--algorithm", "admm", "--rho", "0.02",
        "--iters", "20", "--out", s(&p("cli3.f32")),
    ]);
    let cfg = SolverConfig {
        algorithm: bmi_core::solvers::Algorithm::Admm,
        rho: 0.02,
        max_iters: 20,
        ..SolverConfig::default()
    };
    library_raw(&e.measurement, &cfg, &p("lib3.f32"));
    assert_eq!(f32_bytes(&p("cli3.f32")), f32_bytes(&p("lib3.f32")));
}

#[test]
fn trace_and_config_precedence() {
    let e = encode_fixture("42", "2x2");
    let p = |n: &str| e.dir.path().join(n);
    fs::write(p("run.cfg"), "# decode defaults\niters = 4\ntv-weight=0.2\n").unwrap();
    let rows = |f: &str| fs::read_to_string(p(f)).unwrap().lines().count() - 1;

    ok(&[
        "--config", s(&p("run.cfg")), "decode", "--measurement", s(&e.measurement),
        "--out", s(&p("a.f32")), "--trace", s(&p("a.csv")),
    ]);
    assert_eq!(rows("a.csv"), 4);
    ok(&[
        "decode", "--config", s(&p("run.cfg")), "--measurement", s(&e.measurement),
        "--iters", "2", "--out", s(&p("b.f32")), "--trace", s(&p("b.csv")),
    ]);
    assert_eq!(rows("b.csv"), 2);
    let header = fs::read_to_string(p("a.csv")).unwrap();
    assert!(header.starts_with("iter,residual_l2,change_l2\n"));

    fs::write(p("bad.cfg"), "iters\n").unwrap();
    let out = bmi(&["--config", s(&p("bad.cfg")), "decode", "--measurement", "x", "--out", "y"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn color_images_split_and_recombine() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let channels: Vec<Image> = (0..3).map(|k| gradient(32, 48, k)).collect();
    io::write_channels(&channels, p("rgb.ppm")).unwrap();
    ok(&["mask-gen", "--height", "32", "--width", "48", "--seed", "5", "--out", s(&p("m.bmik"))]);
    ok(&[
        "encode", "--image", s(&p("rgb.ppm")), "--mask", s(&p("m.bmik")), "--grid", "2x3",
        "--out", s(&p("y.bmim")),
    ]);
    assert!(!p("y.bmim").exists());
    let parts: Vec<PathBuf> = (0..3).map(|k| p(&format!("y.c{k}.bmim"))).collect();
    let rgb_out = p("r.ppm");
    let mut args = vec!["decode"];
    for part in &parts {
        args.extend(["--measurement", s(part)]);
    }
    args.extend(["--iters", "5", "--out", s(&rgb_out)]);
    ok(&args);

    let rec = io::read_channels(p("r.ppm")).unwrap();
    assert_eq!(rec.len(), 3);
    for (k, part) in parts.iter().enumerate() {
        ok(&["decode", "--measurement", s(part), "--iters", "5", "--out", s(&p("one.pgm"))]);
        assert_eq!(rec[k], io::read_image(p("one.pgm")).unwrap(), "channel {k}");
    }
    let psnr = psnr_of(&p("rgb.ppm"), &p("r.ppm"));
    assert!(psnr.is_finite() && psnr < 100.0, "{psnr}");
}

#[test]
fn directory_batches_match_single_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    fs::create_dir(p("in")).unwrap();
    io::write_image(&gradient(32, 32, 1), p("in/a.pgm")).unwrap();
    io::write_image(&gradient(32, 32, 2), p("in/b.pgm")).unwrap();
    let rgb: Vec<Image> = (0..3).map(|k| gradient(32, 32, k + 3)).collect();
    io::write_channels(&rgb, p("in/c.ppm")).unwrap();
    fs::write(p("in/notes.txt"), "ignored").unwrap();
    ok(&["mask-gen", "--height", "32", "--width", "32", "--seed", "9", "--out", s(&p("m.bmik"))]);

    ok(&[
        "encode", "--image", s(&p("in")), "--mask", s(&p("m.bmik")), "--grid", "2x2",
        "--out", s(&p("enc")), "--jobs", "2",
    ]);
    let mut names: Vec<_> = fs::read_dir(p("enc"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["a.bmim", "b.bmim", "c.c0.bmim", "c.c1.bmim", "c.c2.bmim"]);

    ok(&[
        "decode", "--measurement", s(&p("enc")), "--iters", "3", "--out", s(&p("dec")),
        "--jobs", "3",
    ]);
    for (name, out) in [("a.bmim", "a.pgm"), ("b.bmim", "b.pgm")] {
        ok(&[
            "decode", "--measurement", s(&p(&format!("enc/{name}"))), "--iters", "3",
            "--out", s(&p("single.pgm")),
        ]);
        assert_eq!(fs::read(p("single.pgm")).unwrap(), fs::read(p(&format!("dec/{out}"))).unwrap());
    }
    assert_eq!(io::read_channels(p("dec/c.ppm")).unwrap().len(), 3);

    let table = ok(&["metrics", "--reference", s(&p("in")), "--test", s(&p("dec"))]);
    let lines: Vec<_> = table.lines().collect();
    assert_eq!(lines[0], "file,psnr_db,ssim");
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("c.ppm,"));
}

#[test]
fn metrics_on_identical_images() {
    let out = ok(&["metrics", "--reference", s(&fixture()), "--test", s(&fixture())]);
    assert_eq!(out, "psnr_db,ssim\n100.000000,1.000000\n");
}

#[test]
fn metrics_rejects_mismatched_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let small = dir.path().join("s.pgm");
    io::write_image(&gradient(16, 16, 0), &small).unwrap();
    let out = bmi(&["metrics", "--reference", s(&fixture()), "--test", s(&small)]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr_line(&out).starts_with("ERROR DimensionMismatch: "));
}

#[test]
fn bench_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("b.csv");
    ok(&[
        "bench", "--resolutions", "64,32x48", "--grid", "2x2", "--repeats", "2",
        "--out", s(&csv),
    ]);
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "resolution,pixels,mean_ms,stddev_ms");
    assert!(lines[1].starts_with("64x64,4096,"));
    assert!(lines[2].starts_with("32x48,1536,"));
    assert_eq!(lines.len(), 3);
}

#[test]
fn damaged_inputs_report_structured_errors() {
    let e = encode_fixture("42", "2x2");
    let p = |n: &str| e.dir.path().join(n);
    let bytes = fs::read(&e.measurement).unwrap();

    fs::write(p("short.bmim"), &bytes[..30]).unwrap();
    let out = bmi(&["decode", "--measurement", s(&p("short.bmim")), "--out", s(&p("o.pgm"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr_line(&out).starts_with("ERROR Malformed: "));

    let mut hot = bytes.clone();
    hot[43] = 0x7F;
    fs::write(p("hot.bmim"), &hot).unwrap();
    let out = bmi(&["decode", "--measurement", s(&p("hot.bmim")), "--out", s(&p("o.pgm"))]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr_line(&out).starts_with("ERROR InvariantViolation: "));

    let out = bmi(&["decode", "--measurement", s(&fixture()), "--out", s(&p("o.pgm"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr_line(&out).starts_with("ERROR BadMagic: "));

    let out = bmi(&["encode", "--image", s(&fixture()), "--mask", s(&e.measurement), "--grid", "2x2", "--out", s(&p("x"))]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        vec!["decode"],
        vec!["encode", "--grid", "0x2", "--image", "a", "--mask", "b", "--out", "c"],
        vec!["mask-gen", "--height", "4", "--width", "4", "--density", "1.5", "--out", "/dev/null"],
        vec!["decode", "--measurement", "x", "--out", "y", "--preset", "stages99"],
        vec!["decode", "--measurement", "x", "--out", "y", "--rho", "-1"],
    ] {
        let out = bmi(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(stderr_line(&out).starts_with("ERROR "), "{args:?}");
    }
}

#[test]
fn mask_gen_is_seed_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    for n in ["a", "b"] {
        ok(&["mask-gen", "--height", "20", "--width", "30", "--seed", "7", "--out", s(&p(n))]);
    }
    assert_eq!(fs::read(p("a")).unwrap(), fs::read(p("b")).unwrap());
    let mf = io::read_mask(p("a")).unwrap();
    assert_eq!(mf.mask, generate(&MaskSpec::new(20, 30, 0.5, 7)).unwrap());
}
