use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::init();
    ExitCode::from(pcmlp::harness::cli_run(std::env::args()) as u8)
}
