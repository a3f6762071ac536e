use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use asplund::io::{load_image, save_image, save_map, save_map_preview};
use asplund::matching::{extract_matches, overlay};
use asplund::metrics::{color_region_distance, d1_region, dinf_region, tolerance_region_distance};
use asplund::synth::{add_noise, apply_drift, global_relight, Axis, BrickLayout, DiscLayout, DriftSpec, NoiseSpec, Scene};
use asplund::{Error, GrayScale, Image, MapEngine, MatchParams, Probe, Region, Tolerance};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "asplund", version, about = "Lighting-invariant template matching with the Asplund distance")]
struct Cli {
    /// Upper bound M of the grey scale.
    #[arg(long, global = true, default_value_t = 256.0)]
    m: f64,
    /// Floor of the clamp applied before the LIP logarithm.
    #[arg(long = "v-min", global = true, default_value_t = 1.0)]
    v_min: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Distance between an image and a probe of the same size.
    Dist {
        image: PathBuf,
        probe: PathBuf,
        /// Restrict the comparison to x,y,w,h.
        #[arg(long)]
        region: Option<Quad>,
        /// Fraction of pixels kept, in (0, 1].
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long, value_enum, default_value_t = Agg::Global)]
        agg: Agg,
    },
    /// Sliding-window distance map, written as PFM.
    Map {
        image: PathBuf,
        probe: PathBuf,
        out: PathBuf,
        #[command(flatten)]
        probe_opts: ProbeOpts,
        /// 8-bit rendering of the map (PNG or PGM).
        #[arg(long)]
        preview: Option<PathBuf>,
    },
    /// Probe positions found at the minima of the distance map.
    Match {
        image: PathBuf,
        probe: PathBuf,
        #[command(flatten)]
        probe_opts: ProbeOpts,
        /// Minimum depth of a retained minimum.
        #[arg(long, default_value_t = 0.0)]
        h: f64,
        /// Largest accepted distance.
        #[arg(long = "score-max", default_value_t = f64::INFINITY)]
        score_max: f64,
        /// Minimum Chebyshev distance between two matches.
        #[arg(long = "min-sep", default_value_t = 0)]
        min_sep: usize,
        /// Draw the matched windows onto a copy of the image.
        #[arg(long)]
        overlay: Option<PathBuf>,
    },
    /// Generate a synthetic scene with known probe positions.
    Synth {
        #[command(subcommand)]
        scene: SceneKind,
    },
    /// Relight, drift and add noise to an image.
    Perturb {
        input: PathBuf,
        output: PathBuf,
        /// Global LIP multiplier (> 1 darkens).
        #[arg(long)]
        relight: Option<f64>,
        #[arg(long = "drift-axis", value_enum, default_value_t = AxisArg::Vertical)]
        drift_axis: AxisArg,
        /// Multiplier at the first and last row (or column): a,b.
        #[arg(long)]
        drift: Option<Pair>,
        #[arg(long = "noise-density", default_value_t = 0.0)]
        noise_density: f64,
        /// Noise variance on the [0, 1] intensity scale.
        #[arg(long = "noise-variance", default_value_t = 2.6)]
        noise_variance: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Debug)]
struct ProbeOpts {
    /// Fraction of probe pixels kept, in (0, 1].
    #[arg(long)]
    tolerance: Option<f64>,
    /// Probe anchor ax,ay (default: centre).
    #[arg(long)]
    anchor: Option<Pair<usize>>,
}

#[derive(Subcommand, Debug)]
enum SceneKind {
    /// Coloured discs on a flat background, plus distractor discs.
    Discs {
        #[arg(long, default_value_t = 96)]
        width: usize,
        #[arg(long, default_value_t = 72)]
        height: usize,
        #[arg(long, default_value_t = 6)]
        radius: usize,
        #[arg(long, default_value_t = 3)]
        count: usize,
        #[arg(long, default_value_t = 2)]
        distractors: usize,
        #[command(flatten)]
        out: SceneOut,
    },
    /// A wall of shaded bricks.
    Bricks {
        #[arg(long, default_value_t = 3)]
        columns: usize,
        #[arg(long, default_value_t = 3)]
        rows: usize,
        #[arg(long = "brick-width", default_value_t = 40)]
        brick_width: usize,
        #[arg(long = "brick-height", default_value_t = 30)]
        brick_height: usize,
        #[arg(long, default_value_t = 2)]
        mortar: usize,
        #[command(flatten)]
        out: SceneOut,
    },
}

#[derive(Args, Debug)]
struct SceneOut {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth anchors, one "x y" line each.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Reference probe cut from the scene.
    #[arg(long)]
    probe: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Agg {
    /// Bounds over every pixel and channel of the region.
    Global,
    /// Mean of the per-pixel distances.
    D1,
    /// Maximum of the per-pixel distances.
    Dinf,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum AxisArg {
    Horizontal,
    Vertical,
}

/// Comma-separated list of exactly N numbers.
#[derive(Clone, Copy, Debug)]
struct Tuple<T, const N: usize>([T; N]);

type Quad = Tuple<usize, 4>;
type Pair<T = f64> = Tuple<T, 2>;

impl<T: FromStr + Copy + Default, const N: usize> FromStr for Tuple<T, N> {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != N {
            return Err(format!("expected {N} comma-separated numbers, got {s:?}"));
        }
        let mut out = [T::default(); N];
        for (slot, p) in out.iter_mut().zip(parts) {
            *slot = p.parse().map_err(|_| format!("not a number: {p:?}"))?;
        }
        Ok(Tuple(out))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("asplund: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Domain(_) | Error::Usage(_) => 2,
        Error::Io { .. } | Error::Format { .. } => 3,
    }
}

fn run(cli: Cli) -> asplund::Result<String> {
    let scale = GrayScale::new(cli.m)?.with_v_min(cli.v_min)?;
    match cli.command {
        Command::Dist {
            image,
            probe,
            region,
            tolerance,
            agg,
        } => cmd_dist(scale, &image, &probe, region, tolerance, agg),
        Command::Map {
            image,
            probe,
            out,
            probe_opts,
            preview,
        } => {
            let map = compute_map(scale, &image, &probe, &probe_opts)?.1;
            save_map(&map, out)?;
            if let Some(path) = preview {
                save_map_preview(&map, path)?;
            }
            Ok(String::new())
        }
        Command::Match {
            image,
            probe,
            probe_opts,
            h,
            score_max,
            min_sep,
            overlay: overlay_path,
        } => {
            let (img, map, probe) = compute_map(scale, &image, &probe, &probe_opts)?;
            let params = MatchParams {
                h,
                score_max,
                min_separation: min_sep,
            };
            let set = extract_matches(&map, probe.shape(), params)?;
            if let Some(path) = overlay_path {
                save_image(&overlay(&img, &set, None)?, path)?;
            }
            Ok(set.to_text())
        }
        Command::Synth { scene } => cmd_synth(scale, scene),
        Command::Perturb {
            input,
            output,
            relight,
            drift_axis,
            drift,
            noise_density,
            noise_variance,
            seed,
        } => {
            let mut img = load_image(&input, scale)?;
            if let Some(alpha) = relight {
                img = global_relight(&img, alpha)?;
            }
            if let Some(Tuple([a, b])) = drift {
                let axis = match drift_axis {
                    AxisArg::Horizontal => Axis::Horizontal,
                    AxisArg::Vertical => Axis::Vertical,
                };
                img = apply_drift(
                    &img,
                    DriftSpec {
                        axis,
                        alpha_start: a,
                        alpha_end: b,
                    },
                )?;
            }
            let noise = NoiseSpec {
                variance: noise_variance,
                density: noise_density,
                seed,
            };
            img = add_noise(&img, noise)?;
            save_image(&img, output)?;
            Ok(String::new())
        }
    }
}

fn tolerance(p: Option<f64>) -> asplund::Result<Option<Tolerance>> {
    p.map(Tolerance::new).transpose()
}

fn cmd_dist(
    scale: GrayScale,
    image: &Path,
    probe: &Path,
    region: Option<Quad>,
    p: Option<f64>,
    agg: Agg,
) -> asplund::Result<String> {
    let mut value = load_image(image, scale)?;
    let mut template = load_image(probe, scale)?;
    if let Some(Tuple([x, y, w, h])) = region {
        value = value.crop(x, y, w, h)?;
        template = template.crop(x, y, w, h)?;
    }
    let tol = tolerance(p)?;
    let full = Region::Full;
    let mut out = String::new();
    match agg {
        Agg::Global => {
            let b = color_region_distance(&template, &value, &full)?;
            writeln!(out, "d={:.6} mu={:.6} lambda={:.6}", b.distance(), b.mu, b.lambda).unwrap();
            if let Some(tol) = tol.filter(|t| t.max_discard(value.pixel_count()) > 0) {
                let t = tolerance_region_distance(&template, &value, &full, tol)?;
                writeln!(
                    out,
                    "d_tol={:.6} mu_tol={:.6} lambda_tol={:.6} discarded={}",
                    t.distance(),
                    t.bounds.mu,
                    t.bounds.lambda,
                    t.discarded.len()
                )
                .unwrap();
            }
        }
        Agg::D1 | Agg::Dinf => {
            if tol.is_some() {
                return Err(Error::Usage("--tolerance only applies to --agg global".into()));
            }
            let d = match agg {
                Agg::D1 => d1_region(&template, &value, &full)?,
                _ => dinf_region(&template, &value, &full)?,
            };
            writeln!(out, "d={d:.6}").unwrap();
        }
    }
    Ok(out)
}

fn compute_map(
    scale: GrayScale,
    image: &Path,
    probe: &Path,
    opts: &ProbeOpts,
) -> asplund::Result<(Image, asplund::DistanceMap, Probe)> {
    let img = load_image(image, scale)?;
    let template = load_image(probe, scale)?;
    let probe = match opts.anchor {
        Some(Tuple([ax, ay])) => Probe::with_anchor(template, ax, ay)?,
        None => Probe::new(template),
    };
    let engine = MapEngine::from_env();
    let map = match tolerance(opts.tolerance)? {
        Some(tol) => engine.distance_map_tol(&img, &probe, tol)?,
        None => engine.distance_map(&img, &probe)?,
    };
    Ok((img, map, probe))
}

fn cmd_synth(scale: GrayScale, kind: SceneKind) -> asplund::Result<String> {
    let (scene, out): (Scene, SceneOut) = match kind {
        SceneKind::Discs {
            width,
            height,
            radius,
            count,
            distractors,
            out,
        } => {
            let layout = DiscLayout {
                width,
                height,
                radius,
                count,
                distractors,
                seed: out.seed,
                ..DiscLayout::default()
            };
            (layout.generate(scale)?, out)
        }
        SceneKind::Bricks {
            columns,
            rows,
            brick_width,
            brick_height,
            mortar,
            out,
        } => {
            let layout = BrickLayout {
                columns,
                rows,
                brick_width,
                brick_height,
                mortar,
                seed: out.seed,
                ..BrickLayout::default()
            };
            (layout.generate(scale)?, out)
        }
    };
    save_image(&scene.image, &out.out)?;
    if let Some(path) = &out.probe {
        save_image(scene.probe().image(), path)?;
    }
    if let Some(path) = &out.truth {
        let mut text = String::new();
        for (x, y) in &scene.truth {
            writeln!(text, "{x} {y}").unwrap();
        }
        std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
    }
    Ok(String::new())
}
