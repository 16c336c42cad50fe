mod args;
mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use lrmm::data::SyntheticConfig;

use args::{Cli, Command};
use commands::{Failure, Outcome};

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Ingest { data, common, out } => commands::ingest(&data, &common, &out),
        Command::Train { data, common, out } => commands::train(&data, &common, &out),
        Command::Evaluate {
            ckpt,
            regime,
            data,
            out,
        } => commands::evaluate_cmd(&ckpt, &regime, &data, out.as_deref()),
        Command::SparsifyExperiment { data, common, k, out } => commands::sparsify(&data, &common, &k, out.as_deref()),
        Command::LengthSweep {
            data,
            common,
            lengths,
            out,
        } => commands::lengths(&data, &common, &lengths, out.as_deref()),
        Command::CrossDomain {
            source_ckpt,
            target_data,
            meta,
            features,
            out,
        } => commands::cross(
            &source_ckpt,
            &target_data,
            meta.as_deref(),
            features.as_deref(),
            out.as_deref(),
        ),
        Command::DumpEmbeddings { ckpt, split, data, out } => commands::dump(&ckpt, &split, &data, out.as_deref()),
        Command::ExtractOffset { data, common, out } => commands::offset(&data, &common, out.as_deref()),
        Command::Synth {
            out,
            seed,
            n_reviews,
            n_users,
            n_items,
            feature_dim,
            correlation,
        } => {
            if !(0.0..=1.0).contains(&correlation) {
                return Err(Failure::Usage("--correlation must lie in [0, 1]".into()));
            }
            if n_users == 0 || n_items == 0 || feature_dim == 0 {
                return Err(Failure::Usage("--n-users, --n-items and --feature-dim must be positive".into()));
            }
            let cfg = SyntheticConfig {
                n_reviews,
                n_users,
                n_items,
                feature_dim,
                user_item_correlation: correlation,
                seed,
                ..Default::default()
            };
            commands::synth(&out, &cfg)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code() as u8)
        }
    }
}
