use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use surround_calib::Exec;
use surround_calib_cli::{
    cmd_calibrate, cmd_evaluate, cmd_synth, exit_code, CalibrateOptions, SynthConfig,
};

/// Photometric extrinsic refinement for four-camera surround-view rigs.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic scene and rig; write views and rig files.
    Synth {
        /// Synthetic-scene settings (JSON); defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "synth")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// 195 degree fisheye rig at 1280x1080 instead of the pinhole rig.
        #[arg(long)]
        fisheye: bool,
    },
    /// Refine left, right and rear extrinsics against the fixed front camera.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "calib")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        batch_size: Option<usize>,
        /// Write per-camera BEV images and validity masks.
        #[arg(long)]
        dump_bev: bool,
        /// Write texture point CSVs and overlays.
        #[arg(long)]
        dump_texture: bool,
        /// Run every loop on the calling thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Per-axis error table of a report against a ground-truth rig file.
    Evaluate {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// CSV output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Synth {
            config,
            out,
            seed,
            fisheye,
        } => {
            let mut cfg = match config {
                Some(p) => SynthConfig::load(&p)?,
                None => SynthConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.fisheye |= fisheye;
            let res = cmd_synth(&cfg, &out, Exec::Parallel)?;
            println!("rig file: {}", res.rig_path.display());
            println!("ground truth: {}", res.gt_path.display());
            Ok(0)
        }
        Command::Calibrate {
            config,
            out,
            seed,
            batch_size,
            dump_bev,
            dump_texture,
            sequential,
        } => {
            let opts = CalibrateOptions {
                seed,
                batch_size,
                dump_bev,
                dump_texture,
                exec: if sequential {
                    Exec::Sequential
                } else {
                    Exec::Parallel
                },
            };
            let res = cmd_calibrate(&config, &out, &opts)?;
            println!("report: {}", res.report_path.display());
            Ok(exit_code(res.status))
        }
        Command::Evaluate { report, gt, out } => {
            cmd_evaluate(&report, &gt, out.as_deref())?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
