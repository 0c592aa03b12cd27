use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(girnet::cli::run(std::env::args_os()))
}
