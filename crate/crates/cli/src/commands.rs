use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use odisal::data::{build_patch_dataset, load_pairs, synth_corpus, write_corpus, FrustumMode, PatchDatasetConfig, SamplePair};
use odisal::metrics::{ablation_report, evaluate, AblationInput, AblationTable, FixationSet, ReportTable};
use odisal::model::{build_network, load_weights, save_weights, train_stage1, train_stage2, TrainLog, TrainSample};
use odisal::pipeline::{extract_views, predict_odi};
use odisal::raster::{read_png, read_saliency, write_png, write_sal, Raster};
use odisal::Error;

use crate::config::Config;
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// Writes `patch_{i}.png`, `coords_{i}.sal` (theta rows above phi rows)
/// and `frustums.txt` for the six fixed views. Returns the written paths.
pub fn extract(odi_path: &Path, out_dir: &Path, cfg: &Config) -> Result<Vec<PathBuf>> {
    let odi = read_png(odi_path)?;
    let views = extract_views(&odi.to_rgb(), &cfg.pipeline())?;
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let mut manifest = String::from("# index yaw pitch fov width height\n");
    for (i, v) in views.iter().enumerate() {
        let png = out_dir.join(format!("patch_{i}.png"));
        write_png(&png, &v.image)?;
        let (theta, phi) = (v.theta_raster(), v.phi_raster());
        let (w, h) = (theta.width(), theta.height());
        let mut data = theta.into_vec();
        data.extend(phi.into_vec());
        let sal = out_dir.join(format!("coords_{i}.sal"));
        write_sal(&sal, &Raster::from_vec(w, 2 * h, 1, data)?)?;
        let f = &v.frustum;
        manifest.push_str(&format!("{i} {} {} {} {} {}\n", f.yaw, f.pitch, f.fov, f.out_w, f.out_h));
        written.extend([png, sal]);
    }
    let m = out_dir.join("frustums.txt");
    fs::write(&m, manifest)?;
    written.push(m);
    Ok(written)
}

/// The input image next to the image tinted red by the saliency map.
pub fn preview(odi: &Raster, map: &Raster) -> Raster {
    let rgb = odi.to_rgb();
    let (w, h) = (rgb.width(), rgb.height());
    Raster::from_fn(2 * w, h, 3, |c, x, y| {
        if x < w {
            return rgb.get(c, x, y);
        }
        let x = x - w;
        let gray = (rgb.get(0, x, y) + rgb.get(1, x, y) + rgb.get(2, x, y)) / 3.0;
        let a = 0.75 * map.get(0, x, y).clamp(0.0, 1.0);
        let tint = if c == 0 { 255.0 } else { 0.0 };
        (1.0 - a) * gray + a * tint
    })
}

/// Full pipeline on one image; writes the map as `.sal` and the preview
/// PNG (default: the output path with a `.png` extension).
pub fn predict(odi_path: &Path, weights: &Path, out: &Path, preview_path: Option<&Path>, cfg: &Config) -> Result<Raster> {
    let net = load_weights(weights)?;
    let odi = read_png(odi_path)?;
    let map = predict_odi(&net, &odi, &cfg.pipeline())?;
    write_sal(out, &map)?;
    let p = preview_path.map(Path::to_path_buf).unwrap_or_else(|| out.with_extension("png"));
    write_png(p, &preview(&odi, &map))?;
    Ok(map)
}

fn resize_pair(p: &SamplePair, w: usize, h: usize) -> std::result::Result<SamplePair, Error> {
    SamplePair::new(
        p.id.clone(),
        p.image.resize_bilinear(w, h),
        p.saliency.resize_bilinear(w, h).map(|v| v.max(0.0)),
    )
}

pub struct TrainRequest<'a> {
    pub manifest: &'a Path,
    pub stage: u8,
    pub weights_in: Option<&'a Path>,
    pub weights_out: &'a Path,
    /// Defaults to `train.log` inside `weights_out`.
    pub log: Option<&'a Path>,
    /// Directory of `conv1`..`conv3` tensors for the first layers.
    pub pretrained: Option<&'a Path>,
}

/// Stage 1 trains the base network on whole images; stage 2 trains the
/// whole network on random views and needs the stage-1 weights.
pub fn train(req: &TrainRequest, cfg: &Config) -> Result<TrainLog> {
    if req.stage == 2 && req.weights_in.is_none() {
        return Err(CliError::Usage("stage 2 needs --weights-in".into()));
    }
    let pairs = load_pairs(req.manifest)?;
    let mut net = match (req.stage, req.weights_in) {
        (1, Some(w)) | (2, Some(w)) => load_weights(w)?,
        (1, None) => build_network(cfg.seed),
        (s, _) => return Err(CliError::Usage(format!("stage must be 1 or 2, got {s}"))),
    };
    if let Some(dir) = req.pretrained {
        net.load_pretrained_front(dir)?;
    }
    let log = if req.stage == 1 {
        let samples: Vec<TrainSample> = pairs
            .iter()
            .map(|p| {
                let p = if cfg.train_w > 0 {
                    resize_pair(p, cfg.train_w, cfg.train_h)?
                } else {
                    p.clone()
                };
                Ok(TrainSample::from_pair(&p, &net.norm_mean))
            })
            .collect::<std::result::Result<_, Error>>()?;
        train_stage1(&mut net, &samples, &cfg.train())?
    } else {
        let pcfg = PatchDatasetConfig {
            n_per_odi: cfg.n_per_odi,
            fov: cfg.fov_deg.to_radians(),
            out_w: cfg.patch_w,
            out_h: cfg.patch_h,
            seed: cfg.seed,
            mode: FrustumMode::Random(cfg.pitch_sampling),
            mean: net.norm_mean.clone(),
            ..PatchDatasetConfig::default()
        };
        let samples: Vec<TrainSample> = build_patch_dataset(&pairs, &pcfg)?
            .iter()
            .map(TrainSample::from_patch)
            .collect();
        train_stage2(&mut net, &samples, &cfg.train())?
    };
    save_weights(&net, req.weights_out)?;
    let log_path = req
        .log
        .map(Path::to_path_buf)
        .unwrap_or_else(|| req.weights_out.join("train.log"));
    log.write(&log_path)?;
    info!(
        "stage {}: train loss {:.4e} -> {:.4e}, log {}",
        req.stage,
        log.initial_train_loss,
        log.final_train_loss,
        log_path.display()
    );
    Ok(log)
}

/// `dir/stem.ext` for the first extension that exists.
fn find_with_stem(dir: &Path, stem: &str, exts: &[&str]) -> Option<PathBuf> {
    exts.iter().map(|e| dir.join(format!("{stem}.{e}"))).find(|p| p.is_file())
}

fn read_fixations(path: &Path, width: usize, height: usize) -> std::result::Result<FixationSet, Error> {
    if path.extension().and_then(|e| e.to_str()) == Some("txt") {
        let text = fs::read_to_string(path)?;
        let mut points = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split([' ', ',', '\t']).filter(|s| !s.is_empty()).collect();
            let parsed = match f.as_slice() {
                [x, y] => x.parse().ok().zip(y.parse().ok()),
                _ => None,
            };
            points.push(parsed.ok_or_else(|| Error::CorruptFile {
                path: path.to_path_buf(),
                reason: format!("line {}: expected `x y`", n + 1),
            })?);
        }
        return FixationSet::new(points, width, height);
    }
    let m = read_saliency(path)?;
    if (m.width(), m.height()) != (width, height) {
        return Err(Error::ShapeMismatch(format!("fixation map {} does not match the prediction", path.display())));
    }
    Ok(FixationSet::from_map(&m))
}

/// Scores every `.sal`/`.png` map in `pred_dir` against the ground truth
/// of the same stem in `gt_dir`. Fixations (`<stem>.txt` with `x y` lines,
/// or a binary map) come from `fx_dir` when given, otherwise they are
/// synthesized from the ground truth.
pub fn eval(pred_dir: &Path, gt_dir: &Path, fx_dir: Option<&Path>, out_csv: &Path, cfg: &Config) -> Result<ReportTable> {
    let mut preds: Vec<(String, PathBuf)> = fs::read_dir(pred_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("sal" | "png")))
        .filter_map(|p| Some((p.file_stem()?.to_str()?.to_owned(), p)))
        .collect();
    preds.sort();
    if preds.is_empty() {
        return Err(Error::EmptyDataset.into());
    }
    let opts = cfg.metrics();
    let mut rows = Vec::with_capacity(preds.len());
    for (stem, path) in preds {
        let pred = read_saliency(&path)?;
        let gt_path = find_with_stem(gt_dir, &stem, &["sal", "png"]).ok_or_else(|| {
            Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("no ground truth for {stem} in {}", gt_dir.display()),
            ))
        })?;
        let gt = read_saliency(&gt_path)?;
        let fx = match fx_dir.and_then(|d| find_with_stem(d, &stem, &["txt", "png", "sal"])) {
            Some(p) => Some(read_fixations(&p, pred.width(), pred.height())?),
            None => None,
        };
        rows.push((stem, evaluate(&pred, &gt, fx.as_ref(), &opts)?));
    }
    let table = ReportTable::new(rows);
    fs::write(out_csv, table.to_csv()?)?;
    Ok(table)
}

/// The three-scenario comparison over every image of a manifest, written
/// as CSV.
pub fn ablate(manifest: &Path, weights: &Path, out_csv: &Path, cfg: &Config) -> Result<AblationTable> {
    let net = load_weights(weights)?;
    let pairs = load_pairs(manifest)?;
    let inputs: Vec<AblationInput> = pairs
        .iter()
        .map(|p| AblationInput {
            id: &p.id,
            odi: &p.image,
            gt: &p.saliency,
            fixations: None,
        })
        .collect();
    let table = ablation_report(&net, &inputs, &cfg.pipeline(), &cfg.metrics())?;
    fs::write(out_csv, table.to_csv())?;
    Ok(table)
}

/// Writes a synthetic corpus and returns its manifest path.
pub fn synth(out_dir: &Path, n: usize, width: usize, height: usize, seed: u64) -> Result<PathBuf> {
    if n == 0 || width == 0 || height == 0 {
        return Err(CliError::Usage("synth needs a positive count and size".into()));
    }
    Ok(write_corpus(out_dir, &synth_corpus(n, width, height, seed))?)
}
