use std::process::ExitCode;

use clap::Parser;
use pcrobust_cli::args::{Cli, Command};
use pcrobust_cli::corrupt::cmd_corrupt;
use pcrobust_cli::denoise::cmd_denoise;
use pcrobust_cli::error::{CliError, CliResult};
use pcrobust_cli::evaluate::cmd_evaluate;
use pcrobust_cli::report::cmd_report;
use pcrobust_cli::{Manifest, Settings};
use pcrobust_core::synth::{write_kitti_dataset, SynthConfig};

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Corrupt {
            root,
            output,
            subset,
            symlink_clean,
            common,
        } => {
            let extra = Manifest {
                root,
                output,
                subset,
                symlink_clean: symlink_clean.then_some(true),
                ..Default::default()
            };
            let s = Settings::resolve(common.merged(extra)?)?;
            let summary = cmd_corrupt(&s)?;
            println!("{} outputs written", summary.outputs);
        }
        Command::Denoise {
            input,
            output,
            local_threshold,
            common,
        } => {
            let extra = Manifest {
                local_threshold: local_threshold.then_some(true),
                ..Default::default()
            };
            let s = Settings::resolve(common.merged(extra)?)?;
            let rows = cmd_denoise(&input, &output, &s)?;
            let removed: usize = rows.iter().map(|r| r.removed).sum();
            println!("{} files, {removed} points removed", rows.len());
        }
        Command::Evaluate {
            dets,
            root,
            labels,
            calib,
            corrupt_root,
            detector,
            score_floor,
            output,
            common,
        } => {
            let extra = Manifest {
                detections: dets,
                root,
                label_dir: labels,
                calib_dir: calib,
                corrupt_root,
                detector,
                score_floor,
                output,
                ..Default::default()
            };
            let s = Settings::resolve(common.merged(extra)?)?;
            let report = cmd_evaluate(&s)?;
            print!("{}", pcrobust_cli::report::render_tables(&report.rows));
        }
        Command::Report { inputs, output } => {
            print!("{}", cmd_report(&inputs, output.as_deref())?);
        }
        Command::Synth {
            output,
            frames,
            seed,
            small,
        } => {
            let cfg = if small { SynthConfig::small() } else { SynthConfig::default() };
            let ids = write_kitti_dataset(&output, frames, seed, &cfg).map_err(CliError::Core)?;
            println!("{} frames written to {}", ids.len(), output.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    env_logger::Builder::new().parse_filters(&cli.log).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
