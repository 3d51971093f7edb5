use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use bmi_core::encoder::{bench_csv, bench_encode, encode_with, Accumulation, EncodeOptions};
use bmi_core::io::{self, MaskFile};
use bmi_core::mask::{self, MaskSpec};
use bmi_core::metrics::{psnr, ssim};
use bmi_core::solvers::{solve, EtaSchedule, Reconstruction, SolverConfig};
use bmi_core::{Image, Mask, MaskProvenance, Measurement, SensingOperator, ZeroCoverage};
use rayon::prelude::*;

use crate::args::{BenchArgs, DecodeArgs, EncodeArgs, MaskGenArgs, MetricsArgs};
use crate::CliError;

const IMAGE_EXTENSIONS: &[&str] = &["pgm", "ppm", "pnm", "f32", "raw"];
const MEASUREMENT_EXTENSION: &str = "bmim";

pub fn mask_gen(a: MaskGenArgs) -> Result<(), CliError> {
    let mf = if a.ones {
        MaskFile::external(Mask::ones(a.height, a.width)?)
    } else {
        MaskFile::generated(&MaskSpec::new(a.height, a.width, a.density, a.seed))?
    };
    io::write_mask(&mf, &a.out).map_err(|e| CliError::from(e).context(a.out.display()))
}

/// `out.bmim` becomes `out.c1.bmim` for channel 1.
fn channel_path(path: &Path, k: usize) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.c{k}.{}", ext.to_string_lossy()),
        None => format!("{stem}.c{k}"),
    };
    path.with_file_name(name)
}

/// Inverse of [`channel_path`] on a file stem: `img.c2` gives `("img", Some(2))`.
fn split_channel(stem: &str) -> (&str, Option<usize>) {
    if let Some((base, tail)) = stem.rsplit_once(".c") {
        if !base.is_empty() && !tail.is_empty() && tail.bytes().all(|b| b.is_ascii_digit()) {
            if let Ok(k) = tail.parse() {
                return (base, Some(k));
            }
        }
    }
    (stem, None)
}

fn has_extension(path: &Path, exts: &[&str]) -> bool {
    path.extension()
        .map(|e| exts.iter().any(|x| e.eq_ignore_ascii_case(x)))
        .unwrap_or(false)
}

fn list_dir(dir: &Path, exts: &[&str]) -> Result<Vec<PathBuf>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for entry in entries {
        let p = entry
            .map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?
            .path();
        if p.is_file() && has_extension(&p, exts) {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    if jobs == Some(0) {
        return Err(CliError::usage("--jobs must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::usage(format!("worker pool: {e}")))
}

/// Runs `f` over `items` on the pool and returns the first error in input
/// order, after every item has been attempted.
fn run_all<T: Sync>(
    jobs: Option<usize>,
    items: &[T],
    f: impl Fn(&T) -> Result<(), CliError> + Sync,
) -> Result<(), CliError> {
    let results: Vec<_> = pool(jobs)?.install(|| items.par_iter().map(&f).collect());
    results.into_iter().collect()
}

fn encode_file(
    image: &Path,
    out: &Path,
    mf: &MaskFile,
    a: &EncodeArgs,
) -> Result<(), CliError> {
    let ctx = |e: bmi_core::BmiError| CliError::from(e).context(image.display());
    let channels = io::read_channels(image).map_err(ctx)?;
    let opts = EncodeOptions {
        pad: a.pad,
        accumulation: if a.f64_accumulate {
            Accumulation::F64
        } else {
            Accumulation::F32
        },
    };
    let many = channels.len() > 1;
    for (k, ch) in channels.iter().enumerate() {
        let m = encode_with(ch, &mf.mask, a.grid, mf.provenance(), opts).map_err(ctx)?;
        let dest = if many { channel_path(out, k) } else { out.to_path_buf() };
        io::write_measurement(&m, &dest).map_err(|e| CliError::from(e).context(dest.display()))?;
    }
    Ok(())
}

pub fn encode(a: EncodeArgs) -> Result<(), CliError> {
    let mf = io::read_mask(&a.mask).map_err(|e| CliError::from(e).context(a.mask.display()))?;
    if a.image.is_dir() {
        create_dir(&a.out)?;
        let files = list_dir(&a.image, IMAGE_EXTENSIONS)?;
        let jobs: Vec<_> = files
            .into_iter()
            .map(|f| {
                let stem = f.file_stem().unwrap_or_default().to_owned();
                let dest = a.out.join(stem).with_extension(MEASUREMENT_EXTENSION);
                (f, dest)
            })
            .collect();
        run_all(a.jobs, &jobs, |(src, dest)| encode_file(src, dest, &mf, &a))
    } else {
        encode_file(&a.image, &a.out, &mf, &a)
    }
}

fn solver_config(a: &DecodeArgs) -> Result<SolverConfig, CliError> {
    let mut cfg = match a.preset.as_deref() {
        None => SolverConfig::default(),
        Some("stages10") => SolverConfig::stages10(),
        Some(p) => return Err(CliError::usage(format!("unknown preset {p:?}"))),
    };
    cfg.algorithm = a.algorithm.parse()?;
    if let Some(n) = a.iters {
        cfg.max_iters = n;
    }
    if let Some(list) = &a.eta {
        let etas = list
            .split(',')
            .map(|s| s.trim().parse::<f32>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::usage(format!("--eta {list:?}: {e}")))?;
        cfg.eta_schedule = match etas.as_slice() {
            [one] => EtaSchedule::Constant(*one),
            _ => EtaSchedule::PerIteration(etas),
        };
    }
    if let Some(w) = a.tv_weight {
        cfg.tv_weight = w;
    }
    if let Some(n) = a.tv_inner {
        cfg.tv_inner_iters = n;
    }
    if let Some(r) = a.rho {
        cfg.rho = r;
    }
    if let Some(t) = a.stop_tol {
        cfg.stop_tol = t;
    }
    if a.strict_coverage {
        cfg.zero_coverage = ZeroCoverage::Strict;
    }
    if a.no_clamp {
        cfg.clamp_final = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// The mask a measurement was taken with: `--mask` if given, else whatever
/// the header records.
fn resolve_mask(m: &Measurement, over: Option<&MaskFile>) -> Result<Mask, CliError> {
    if let Some(mf) = over {
        return Ok(mf.mask.clone());
    }
    Ok(match m.mask_provenance() {
        MaskProvenance::Embedded(mask) => mask.clone(),
        MaskProvenance::Seeded { seed, density } => {
            let (h, w) = m.original_shape();
            mask::generate(&MaskSpec::new(h, w, *density, *seed))?
        }
    })
}

fn decode_one(
    path: &Path,
    over: Option<&MaskFile>,
    cfg: &SolverConfig,
) -> Result<Reconstruction, CliError> {
    let ctx = |e: bmi_core::BmiError| CliError::from(e).context(path.display());
    let m = io::read_measurement(path).map_err(ctx)?;
    let mask = resolve_mask(&m, over).map_err(|e| e.context(path.display()))?;
    let op = if m.is_padded() {
        SensingOperator::new_padded(&mask, m.grid())
    } else {
        SensingOperator::new(&mask, m.grid())
    }
    .map_err(ctx)?;
    solve(&m, &op, cfg, &cfg.tv_denoiser()).map_err(ctx)
}

/// Decodes one image from its per-channel measurements.
fn decode_channels(
    inputs: &[PathBuf],
    out: &Path,
    trace: Option<&Path>,
    over: Option<&MaskFile>,
    cfg: &SolverConfig,
) -> Result<(), CliError> {
    let recs: Vec<Reconstruction> = inputs
        .par_iter()
        .map(|p| decode_one(p, over, cfg))
        .collect::<Result<_, _>>()?;
    if let Some(t) = trace {
        for (k, r) in recs.iter().enumerate() {
            let dest = if recs.len() > 1 { channel_path(t, k) } else { t.to_path_buf() };
            fs::write(&dest, r.trace.to_csv())
                .map_err(|e| CliError::io(format!("{}: {e}", dest.display())))?;
        }
    }
    let images: Vec<Image> = recs.into_iter().map(|r| r.image).collect();
    io::write_channels(&images, out).map_err(|e| CliError::from(e).context(out.display()))
}

/// Groups `name.bmim` and `name.c0.bmim, name.c1.bmim, ...` into images.
fn group_measurements(files: Vec<PathBuf>) -> Result<BTreeMap<String, Vec<PathBuf>>, CliError> {
    let mut groups: BTreeMap<String, Vec<(Option<usize>, PathBuf)>> = BTreeMap::new();
    for f in files {
        let stem = f.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let (base, k) = split_channel(&stem);
        groups.entry(base.to_string()).or_default().push((k, f));
    }
    let mut out = BTreeMap::new();
    for (base, mut members) in groups {
        members.sort();
        let single = matches!(members.as_slice(), [(None, _)]);
        let channels_ok = members.iter().enumerate().all(|(i, (k, _))| *k == Some(i));
        if !single && !channels_ok {
            return Err(CliError::usage(format!(
                "{base}: channel files must be numbered c0, c1, ... without gaps"
            )));
        }
        out.insert(base, members.into_iter().map(|(_, p)| p).collect());
    }
    Ok(out)
}

pub fn decode(a: DecodeArgs) -> Result<(), CliError> {
    let cfg = solver_config(&a)?;
    let over = match &a.mask {
        Some(p) => Some(io::read_mask(p).map_err(|e| CliError::from(e).context(p.display()))?),
        None => None,
    };
    if let [dir] = a.measurement.as_slice() {
        if dir.is_dir() {
            if a.trace.is_some() {
                return Err(CliError::usage("--trace needs a single measurement input"));
            }
            create_dir(&a.out)?;
            let groups = group_measurements(list_dir(dir, &[MEASUREMENT_EXTENSION])?)?;
            let jobs: Vec<_> = groups
                .into_iter()
                .map(|(base, inputs)| {
                    let ext = if inputs.len() == 1 { "pgm" } else { "ppm" };
                    (a.out.join(format!("{base}.{ext}")), inputs)
                })
                .collect();
            return run_all(a.jobs, &jobs, |(dest, inputs)| {
                decode_channels(inputs, dest, None, over.as_ref(), &cfg)
            });
        }
    }
    pool(a.jobs)?.install(|| {
        decode_channels(&a.measurement, &a.out, a.trace.as_deref(), over.as_ref(), &cfg)
    })
}

/// Channel-averaged PSNR and SSIM of one file pair.
fn score(reference: &Path, test: &Path) -> Result<(f64, f64), CliError> {
    let r = io::read_channels(reference).map_err(|e| CliError::from(e).context(reference.display()))?;
    let t = io::read_channels(test).map_err(|e| CliError::from(e).context(test.display()))?;
    if r.len() != t.len() {
        return Err(CliError {
            code: "ShapeMismatch",
            message: format!("{} channels against {}", r.len(), t.len()),
            exit: crate::error::EXIT_INVARIANT,
        });
    }
    let (mut p, mut s) = (0.0, 0.0);
    for (a, b) in r.iter().zip(&t) {
        p += psnr(a, b)?;
        s += ssim(a, b)?;
    }
    let n = r.len() as f64;
    Ok((p / n, s / n))
}

pub fn metrics(a: MetricsArgs) -> Result<(), CliError> {
    if a.reference.is_dir() != a.test.is_dir() {
        return Err(CliError::usage("--reference and --test must both be files or both directories"));
    }
    if !a.reference.is_dir() {
        let (p, s) = score(&a.reference, &a.test)?;
        println!("psnr_db,ssim");
        println!("{p:.6},{s:.6}");
        return Ok(());
    }
    let mut lines = vec!["file,psnr_db,ssim".to_string()];
    for r in list_dir(&a.reference, IMAGE_EXTENSIONS)? {
        let name = r.file_name().unwrap_or_default();
        let t = a.test.join(name);
        if !t.is_file() {
            return Err(CliError::io(format!("{}: no matching test image", t.display())));
        }
        let (p, s) = score(&r, &t)?;
        lines.push(format!("{},{p:.6},{s:.6}", name.to_string_lossy()));
    }
    println!("{}", lines.join("\n"));
    Ok(())
}

fn parse_resolution(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::usage(format!("resolution {s:?} is not HxW or N"));
    let s = s.trim();
    match s.split_once(['x', 'X']) {
        Some((h, w)) => Ok((h.parse().map_err(|_| bad())?, w.parse().map_err(|_| bad())?)),
        None => {
            let n = s.parse().map_err(|_| bad())?;
            Ok((n, n))
        }
    }
}

pub fn bench(a: BenchArgs) -> Result<(), CliError> {
    let res = a
        .resolutions
        .iter()
        .map(|s| parse_resolution(s))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = bench_encode(&res, a.grid, a.repeats, a.seed)?;
    let csv = bench_csv(&rows);
    match &a.out {
        Some(p) => fs::write(p, csv).map_err(|e| CliError::io(format!("{}: {e}", p.display()))),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}
