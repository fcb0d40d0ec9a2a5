// SPDX-License-Identifier: Apache-2.0

//! `cnd`: build, sample and verify canonical noise distributions.
//!
//! Exit status is 0 on success, 1 if a verification entry fails and 2 on
//! usage or construction errors.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
