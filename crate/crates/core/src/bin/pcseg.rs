use std::io::{self, Write};
use std::process::ExitCode;

use clap::error::ErrorKind;

#[cfg(feature = "parallel")]
fn init_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("AOIA_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("AOIA_THREADS must be a positive integer, got '{raw}'"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

#[cfg(not(feature = "parallel"))]
fn init_threads() -> Result<(), String> {
    Ok(())
}

fn main() -> ExitCode {
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::FAILURE;
    }
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let result = pcseg::cli::run(std::env::args_os(), &mut out);
    let _ = out.flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if let Some(clap_err) = err.downcast_ref::<clap::Error>() {
                if matches!(
                    clap_err.kind(),
                    ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
                ) {
                    let _ = clap_err.print();
                    return ExitCode::SUCCESS;
                }
                let text = clap_err.to_string();
                let first = text.lines().next().unwrap_or("invalid arguments");
                eprintln!("{first}");
                return ExitCode::from(2);
            }
            // reader went away (e.g. piped into `head`)
            if err
                .chain()
                .filter_map(|e| e.downcast_ref::<io::Error>())
                .any(|e| e.kind() == io::ErrorKind::BrokenPipe)
            {
                return ExitCode::SUCCESS;
            }
            let chain: Vec<String> = err.chain().map(|e| e.to_string()).collect();
            eprintln!("error: {}", chain.join(": "));
            ExitCode::FAILURE
        }
    }
}
