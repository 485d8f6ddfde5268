//! `torec`: batch front end for the toral-recurrence laboratory.
//!
//! Every run prints a header echoing the configuration, seed and precision,
//! followed by the command's result. Identical arguments give byte-identical
//! output. Exit codes: 0 success, 1 usage, 2 hypothesis violated, 3 resource
//! cap, 4 precision failure.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{BoxdimArgs, CantorArgs, ConjArgs, DimArgs, PeriodicArgs, VerifyArgs};
use config::Common;
use output::Header;

#[derive(Parser, Debug)]
#[command(name = "torec", version, about = "Recurrence sets of integer toral endomorphisms")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Hausdorff dimension of the recurrence set from the eigenvalue moduli.
    Dim(DimArgs),
    /// Count or list the points of period n.
    Periodic(PeriodicArgs),
    /// Run one of the geometric verifiers.
    Verify(VerifyArgs),
    /// Build the Cantor-type subset and its mass distribution.
    Cantor(CantorArgs),
    /// Box-counting cross-check of the dimension (d <= 2).
    Boxdim(BoxdimArgs),
    /// Rational conjugacy to the diagonal form.
    Conj(ConjArgs),
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
    let common = &cli.common;
    let (name, params, result) = match &cli.command {
        Command::Dim(a) => ("dim", a.echo(), commands::dim(common, a)),
        Command::Periodic(a) => ("periodic", a.echo(), commands::periodic(common, a)),
        Command::Verify(a) => ("verify", a.echo(), commands::verify(common, a)),
        Command::Cantor(a) => ("cantor", a.echo(), commands::cantor(common, a)),
        Command::Boxdim(a) => ("boxdim", a.echo(), commands::boxdim(common, a)),
        Command::Conj(a) => ("conj", a.echo(), commands::conj(common, a)),
    };
    let header = Header::new(name, common, params);
    let code = match result.and_then(|report| output::emit(&header, &report, common)) {
        Ok(()) => 0,
        Err(e) => output::fail(&header, &e, common),
    };
    ExitCode::from(code as u8)
}
