mod args;
mod run;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use run::{execute, read_manifest, write_outputs, Failure, RunManifest};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}

fn real_main(cli: Cli) -> Result<u8, Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::input("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::input(e.to_string()))?;
    }
    let command = match &cli.command {
        Command::Replay(r) => read_manifest(&r.manifest)?.command,
        other => other.clone(),
    };
    if let Command::Replay(_) = command {
        return Err(Failure::input("a manifest cannot record a replay"));
    }
    let report = execute(&command)?;
    print!("{}", report.stdout);
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(dir) = &cli.out {
        write_outputs(dir, &RunManifest::new(&command), &report)
            .map_err(|e| Failure::input(format!("{}: {e}", dir.display())))?;
    }
    if report.converged {
        Ok(0)
    } else {
        eprintln!("error: a requested computation did not converge");
        Ok(1)
    }
}
