use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(semistereo::cli::run(std::env::args_os()))
}
