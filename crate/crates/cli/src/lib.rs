//! Command-line front end for `pcosync_core`: parameter sweeps with CSV
//! output, restabilisation runs, Monte Carlo estimates, explicit-state
//! export and hardware profiles.

pub mod args;
pub mod config;
pub mod export;
pub mod profile;
pub mod simulate;
pub mod sweep;
pub mod values;

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use pcosync_core::{build_dtmc, Error, InitialMode};

use args::{Cli, Command, ExportArgs, ProfileCommand};

/// Exit status for invalid input.
pub const EXIT_INVALID: u8 = 1;
/// Exit status when a build exceeds its limits or a solve fails.
pub const EXIT_SOLVER: u8 = 2;

pub fn exit_code(err: &anyhow::Error) -> u8 {
    let solver_failure = err.chain().any(|e| {
        matches!(
            e.downcast_ref::<Error>(),
            Some(Error::NotConverged { .. } | Error::LinearSolve(_) | Error::ResourceLimit { .. })
        )
    });
    if solver_failure {
        EXIT_SOLVER
    } else {
        EXIT_INVALID
    }
}

/// CSV writer with LF line endings on a file or standard output.
pub fn csv_writer(path: Option<&Path>) -> Result<csv::Writer<Box<dyn Write>>> {
    let sink: Box<dyn Write> = match path {
        Some(p) => {
            Box::new(std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?)
        }
        None => Box::new(std::io::stdout().lock()),
    };
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze(a) => sweep::run_analyze(&a, false),
        Command::Restab(a) => sweep::run_analyze(&a, true),
        Command::Simulate(a) => simulate::run_simulate(&a),
        Command::Export(a) => run_export(&a),
        Command::Profile(p) => run_profile(p),
    }
}

fn run_export(args: &ExportArgs) -> Result<()> {
    let cfg = sweep::load_config(&args.model)?;
    let space = sweep::ModelSpace::resolve(&args.model, &cfg)?;
    let points = space.points()?;
    let [point] = &points[..] else {
        bail!(
            "export takes a single model; got {} parameter combinations",
            points.len()
        );
    };
    let model = build_dtmc(&point.params, &space.profile, point.mode, space.limits)?;
    let paths = export::write_model(&model, &args.out, &args.basename)?;
    let mode = match point.mode {
        InitialMode::Full => String::new(),
        m => format!(" ({m})"),
    };
    eprintln!(
        "wrote {} states and {} transitions{mode} to {}",
        model.num_states(),
        model.num_transitions(),
        paths.transitions.display()
    );
    Ok(())
}

fn run_profile(cmd: ProfileCommand) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match cmd {
        ProfileCommand::List { profile_dir } => {
            for name in profile::list(profile_dir.as_deref())? {
                writeln!(out, "{name}")?;
            }
        }
        ProfileCommand::Show {
            name,
            t,
            profile_dir,
        } => {
            if t < 2 {
                bail!("T must satisfy T ≥ 2 (got T={t})");
            }
            let p = profile::resolve(&name, profile_dir.as_deref())?;
            let e = p.energies(t);
            write!(out, "{}", profile::to_text(&p))?;
            writeln!(out, "# per-step energies for T={t}, in Wh")?;
            writeln!(out, "# W_I = {:e}", e.idle_wh)?;
            writeln!(out, "# W_R = {:e}", e.receive_wh)?;
            writeln!(out, "# W_T = {:e}", e.transmit_wh)?;
        }
        ProfileCommand::Save {
            name,
            from,
            idle_a,
            receive_a,
            transmit_a,
            voltage_v,
            cycle_s,
            message_s,
            profile_dir,
        } => {
            let dir = profile_dir.context("--profile-dir is required")?;
            let mut p = profile::resolve(&from, Some(&dir))?;
            p.name = name;
            for (slot, v) in [
                (&mut p.idle_a, idle_a),
                (&mut p.receive_a, receive_a),
                (&mut p.transmit_a, transmit_a),
                (&mut p.voltage_v, voltage_v),
                (&mut p.cycle_s, cycle_s),
                (&mut p.message_s, message_s),
            ] {
                if let Some(v) = v {
                    *slot = v;
                }
            }
            let path = profile::save(&dir, &p)?;
            writeln!(out, "{}", path.display())?;
        }
    }
    Ok(())
}
