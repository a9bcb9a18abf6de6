use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use world4d::io::{read_sequence, write_sequence, IoError};
use world4d::losses::gradcheck::{gradcheck, LossId};
use world4d::losses::{geometry_terms, motion_terms, LossWeights};
use world4d::metrics::{evaluate_sequence, EvalOptions, DEFAULT_TAU};
use world4d::pipeline::{preprocess, PreprocessOptions};
use world4d::synth::{generate, SceneConfig};
use world4d::types::{validate_sequence, NormMode};

#[derive(Parser)]
#[command(name = "world4d", version, about = "World-frame 4D point maps and scene flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Norm {
    Canonical,
    Max,
    None,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene into <out>/gt_world and <out>/gt_camera.
    Synth {
        /// Scene description (key = value lines); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert a camera-frame sequence into a world-frame one.
    Preprocess {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "canonical")]
        norm: Norm,
        /// Fill invalid pixels from coarser pyramid levels.
        #[arg(long)]
        pad: bool,
    },
    /// Score a predicted sequence against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
        #[arg(long)]
        gamma: f64,
        /// Also write the report to this file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print geometry and motion loss terms, averaged over frames.
    Loss {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Loss weights (key = value lines).
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Check every analytic loss gradient against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check a sequence directory against the data invariants.
    Validate {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn fmt6(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

fn run(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Synth { config, seed, out } => {
            let mut cfg: SceneConfig = match config {
                Some(p) => read_text(&p)?.parse()?,
                None => SceneConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let scene = generate(&cfg)?;
            write_sequence(&scene.gt_world, &out.join("gt_world"))?;
            write_sequence(&scene.gt_camera, &out.join("gt_camera"))?;
        }
        Command::Preprocess { input, out, norm, pad } => {
            let seq = read_sequence(&input)?;
            let norm = match norm {
                Norm::Canonical => Some(NormMode::Canonical),
                Norm::Max => Some(NormMode::Max),
                Norm::None => None,
            };
            write_sequence(&preprocess(&seq, PreprocessOptions { norm, pad })?, &out)?;
        }
        Command::Eval { pred, gt, tau, gamma, report } => {
            let pred = read_sequence(&pred)?;
            let gt = read_sequence(&gt)?;
            let text = evaluate_sequence(&pred, &gt, EvalOptions::new(tau, gamma))?.to_kv();
            print!("{text}");
            if let Some(path) = report {
                fs::write(&path, &text).with_context(|| format!("cannot write {}", path.display()))?;
            }
        }
        Command::Loss { pred, gt, weights } => {
            let weights: LossWeights = match weights {
                Some(p) => read_text(&p)?.parse()?,
                None => LossWeights::default(),
            };
            let pred = read_sequence(&pred)?;
            let gt = read_sequence(&gt)?;
            if pred.frames() != gt.frames() {
                bail!("prediction has {} frames, target {}", pred.frames(), gt.frames());
            }
            let mut geo = [0.0; 5];
            for i in 0..gt.frames() {
                let t = geometry_terms(&pred.point_maps[i], &gt.point_maps[i], &gt.poses[i], &gt.intrinsics, &weights)?;
                for (acc, v) in geo.iter_mut().zip([t.point, t.depth_l1, t.patch_depth, t.normal, t.total.value]) {
                    *acc += v / gt.frames() as f64;
                }
            }
            let mut mot = [0.0; 3];
            for (p, g) in pred.flows.iter().zip(&gt.flows) {
                let t = motion_terms(p, g, &g.mask, &weights)?;
                for (acc, v) in mot.iter_mut().zip([t.reconstruction, t.regularizer, t.total.value]) {
                    *acc += v / gt.flows.len() as f64;
                }
            }
            let keys = ["point", "depth_l1", "patch_depth", "normal", "geometry", "motion_reconstruction", "motion_regularizer", "motion"];
            for (k, v) in keys.iter().zip(geo.iter().chain(&mot)) {
                println!("{k}={}", fmt6(*v));
            }
        }
        Command::Gradcheck { trials, seed } => {
            let mut failed = Vec::new();
            for id in LossId::ALL {
                let r = gradcheck(id, trials, seed)?;
                println!(
                    "loss={} trials={} skipped={} max_rel_error={:.3e} tolerance={:.0e} {}",
                    id,
                    r.trials,
                    r.skipped,
                    r.max_rel_error,
                    r.tolerance,
                    if r.passed() { "pass" } else { "FAIL" }
                );
                if !r.passed() {
                    failed.push(id.name());
                }
            }
            if !failed.is_empty() {
                bail!("gradient check failed for {}", failed.join(", "));
            }
        }
        Command::Validate { input } => {
            let seq = read_sequence(&input)?;
            let violations = validate_sequence(&seq);
            for v in &violations {
                println!("{v}");
            }
            if !violations.is_empty() {
                bail!("{} violation(s) in {}", violations.len(), input.display());
            }
            println!("ok");
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<IoError>() {
            return e.code();
        }
        if let Some(world4d::Error::Io(e)) = cause.downcast_ref::<world4d::Error>() {
            return e.code();
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            // keep usage errors to a single line
            let text = e.to_string();
            let line: Vec<&str> =
                text.lines().map(str::trim).take_while(|l| !l.starts_with("Usage:")).filter(|l| !l.is_empty()).collect();
            eprintln!("{}", line.join(" "));
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::from(exit_code(&e))
        }
    }
}
