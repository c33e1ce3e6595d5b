use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use ned_core::data::{generate_dataset, read_track, write_track, Dataset, DomainSpec};
use ned_core::geometry::{
    default_levels, erode_soft, estimate_similarity, multiband_blend, warp, ImageBuffer, Landmarks68, MaskBuffer,
    DEFAULT_ERODE_RADIUS,
};
use ned_core::inference::{extract_style, label_style, translate_track, MergeKernel};
use ned_core::metrics::{apd, fapd, mapd, track_jaw_pcc, MetricReport};
use ned_core::networks::{EmotionLabel, ManipulatorParams};
use ned_core::sequence::StyleVector;
use ned_core::trainer::{TrainConfig, TrainState, Trainer};
use ned_core::{Error, Result};

/// Expression-level emotion manipulation toolkit.
#[derive(Parser)]
#[command(name = "ned", version, about)]
struct Cli {
    /// Seed for every random choice made by the command.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-domain dataset of expression tracks.
    GenData {
        /// Output directory for clips, manifest.json and domain_spec.json.
        #[arg(long)]
        out: PathBuf,
        /// Domain spec JSON; a fresh one is drawn from the seed when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 40)]
        clips_per_domain: usize,
        /// Frames per clip.
        #[arg(long, default_value_t = 100)]
        length: usize,
        /// Training window length recorded in the manifest.
        #[arg(long, default_value_t = 10)]
        window: usize,
    },
    /// Train the manipulator networks.
    Train {
        /// Training config JSON; missing fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dataset manifest.
        #[arg(long)]
        data: PathBuf,
        /// Output directory for model.nedm and train_log.csv.
        #[arg(long)]
        out: PathBuf,
        /// Checkpoint to start from (fine-tuning or resume).
        #[arg(long)]
        init: Option<PathBuf>,
        /// Print a progress line every this many iterations (0 = silent).
        #[arg(long, default_value_t = 100)]
        log_every: u64,
    },
    /// Translate an expression track toward a target emotion or a reference clip's style.
    Translate {
        #[arg(long)]
        model: PathBuf,
        /// Input track CSV.
        #[arg(long)]
        input: PathBuf,
        /// Target emotion (name or index); the style is drawn from the mapping network.
        #[arg(long, conflicts_with = "reference", required_unless_present = "reference")]
        label: Option<EmotionLabel>,
        /// Reference track CSV whose style is extracted and applied.
        #[arg(long = "ref")]
        reference: Option<PathBuf>,
        /// Output track CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract the speaking style of a reference track.
    ExtractStyle {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Output JSON `{"style": [16 numbers]}`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score generated frames or tracks against ground truth.
    Eval {
        /// Directory of PNG frames, or a track CSV.
        #[arg(long)]
        gen: PathBuf,
        /// Directory of PNG frames with the same names, or a track CSV.
        #[arg(long)]
        gt: PathBuf,
        /// Directory of face masks with the same file names (enables the face-area metric).
        #[arg(long)]
        masks: Option<PathBuf>,
        /// JSON object mapping frame file names to mouth centres `[x, y]` (enables the mouth metric).
        #[arg(long)]
        mouth: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Align a face image to a landmark template with a similarity transform.
    Align {
        /// JSON array of the image's 68 `[x, y]` landmarks.
        #[arg(long)]
        landmarks: PathBuf,
        /// Template landmarks; the bundled 256×256 template when omitted.
        #[arg(long)]
        template: Option<PathBuf>,
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Output size `WxH`; defaults to the input size.
        #[arg(long, value_parser = parse_size)]
        size: Option<(usize, usize)>,
    },
    /// Composite a foreground into a background with multi-band blending.
    Blend {
        #[arg(long)]
        fg: PathBuf,
        #[arg(long)]
        bg: PathBuf,
        /// Grayscale mask; white selects the foreground.
        #[arg(long)]
        mask: PathBuf,
        /// Pyramid levels; derived from the image size when omitted.
        #[arg(long)]
        levels: Option<usize>,
        /// Soft erosion radius applied to the mask, in pixels.
        #[arg(long, default_value_t = DEFAULT_ERODE_RADIUS)]
        erode: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

const TEMPLATE: &str = include_str!("../../data/face_template_256.json");

#[derive(Serialize, Deserialize)]
struct StyleFile {
    style: StyleVector,
}

fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WxH")?;
    let w: usize = w.parse().map_err(|_| "bad width")?;
    let h: usize = h.parse().map_err(|_| "bad height")?;
    if w == 0 || h == 0 {
        return Err("size must be positive".into());
    }
    Ok((w, h))
}

fn kernel_for(params: &ManipulatorParams) -> Result<MergeKernel> {
    MergeKernel::default_for(params.window)
}

fn pngs(dir: &Path) -> Result<Vec<String>> {
    let mut names: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.to_ascii_lowercase().ends_with(".png"))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::Invalid(format!("{}: no PNG frames", dir.display())));
    }
    Ok(names)
}

fn eval_tracks(gen: &Path, gt: &Path) -> Result<MetricReport> {
    let (a, b) = (read_track(gen)?, read_track(gt)?);
    let jaw = track_jaw_pcc(&b, &a)?;
    let mut report = MetricReport::new((0..a.len()).map(|t| t.to_string()).collect());
    let dist = a
        .frames()
        .zip(b.frames())
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| ((p - q) as f64).powi(2)).sum::<f64>().sqrt())
        .collect();
    report.insert("expression_l2", dist)?;
    report.aggregate.insert("jaw_pcc".into(), jaw);
    Ok(report)
}

fn eval_frames(gen: &Path, gt: &Path, masks: Option<&Path>, mouth: Option<&Path>) -> Result<MetricReport> {
    let names = pngs(gen)?;
    let centres: Option<BTreeMap<String, [f64; 2]>> =
        mouth.map(|p| Ok::<_, Error>(serde_json::from_str(&fs::read_to_string(p)?)?)).transpose()?;
    let mut report = MetricReport::new(names.clone());
    let (mut a, mut f, mut m) = (Vec::new(), Vec::new(), Vec::new());
    for name in &names {
        let g = ImageBuffer::read_png(&gen.join(name), 3)?;
        let t = ImageBuffer::read_png(&gt.join(name), 3)?;
        a.push(apd(&g, &t)?);
        if let Some(dir) = masks {
            f.push(fapd(&g, &t, &MaskBuffer::read_png(&dir.join(name), 1)?)?);
        }
        if let Some(c) = &centres {
            let centre = c
                .get(name)
                .ok_or_else(|| Error::Invalid(format!("no mouth centre for {name}")))?;
            m.push(mapd(&g, &t, *centre)?);
        }
    }
    report.insert("apd", a)?;
    if masks.is_some() {
        report.insert("fapd", f)?;
    }
    if centres.is_some() {
        report.insert("mapd", m)?;
    }
    Ok(report)
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::GenData {
            out,
            spec,
            clips_per_domain,
            length,
            window,
        } => {
            let seed = seed.unwrap_or(0);
            let spec = match spec {
                Some(p) => DomainSpec::read(&p)?,
                None => DomainSpec::synthetic(seed),
            };
            let manifest = generate_dataset(&spec, clips_per_domain, length, window, seed, &out)?;
            eprintln!("wrote {} clips to {}", manifest.clips.len(), out.display());
        }
        Command::Train {
            config,
            data,
            out,
            init,
            log_every,
        } => {
            let mut cfg = match config {
                Some(p) => TrainConfig::read(&p)?,
                None => TrainConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let dataset = Dataset::load(&data)?;
            let init = init.as_deref().map(TrainState::load).transpose()?;
            let mut trainer = Trainer::new(cfg, &dataset, init)?;
            let total = trainer.config.iterations;
            let ckpt = trainer.run(&out, |it, r| {
                if log_every > 0 && (it + 1) % log_every == 0 {
                    eprintln!(
                        "iter {}/{total}  adv_d {:.4}  adv_g {:.4}  sty {:.4}  cyc {:.4}  mouth {:.4}",
                        it + 1,
                        r[0].adv_d,
                        r[0].adv_g,
                        r[0].sty,
                        r[0].cyc,
                        r[0].mouth
                    );
                }
            })?;
            eprintln!("wrote {}", ckpt.display());
        }
        Command::Translate {
            model,
            input,
            label,
            reference,
            out,
        } => {
            let params = ManipulatorParams::load(&model)?;
            let track = read_track(&input)?;
            let style = match (label, reference) {
                (Some(l), _) => label_style(&params, l, seed.unwrap_or(0))?,
                (None, Some(r)) => extract_style(&params, &read_track(&r)?, params.window)?,
                (None, None) => unreachable!("clap requires --label or --ref"),
            };
            let result = translate_track(&params, &track, &style, &kernel_for(&params)?)?;
            write_track(&out, &result)?;
        }
        Command::ExtractStyle { model, reference, out } => {
            let params = ManipulatorParams::load(&model)?;
            let style = extract_style(&params, &read_track(&reference)?, params.window)?;
            fs::write(&out, serde_json::to_string_pretty(&StyleFile { style })?)?;
        }
        Command::Eval {
            gen,
            gt,
            masks,
            mouth,
            out,
        } => {
            let report = if gen.is_dir() {
                eval_frames(&gen, &gt, masks.as_deref(), mouth.as_deref())?
            } else {
                eval_tracks(&gen, &gt)?
            };
            report.write(&out)?;
        }
        Command::Align {
            landmarks,
            template,
            image,
            out,
            size,
        } => {
            let src = Landmarks68::read(&landmarks)?;
            let dst: Landmarks68 = match template {
                Some(p) => Landmarks68::read(&p)?,
                None => serde_json::from_str(TEMPLATE)?,
            };
            let img = ImageBuffer::read_png(&image, 3)?;
            let (w, h) = size.unwrap_or((img.width(), img.height()));
            let t = estimate_similarity(&src, &dst)?;
            warp(&img, &t, w, h)?.write_png(&out)?;
        }
        Command::Blend {
            fg,
            bg,
            mask,
            levels,
            erode,
            out,
        } => {
            let fg = ImageBuffer::read_png(&fg, 3)?;
            let bg = ImageBuffer::read_png(&bg, 3)?;
            let mask = erode_soft(&MaskBuffer::read_png(&mask, 1)?, erode)?;
            let levels = levels.unwrap_or_else(|| default_levels(fg.width(), fg.height()));
            multiband_blend(&fg, &bg, &mask, levels)?.write_png(&out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
