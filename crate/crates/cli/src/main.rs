use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(mtica_cli::run(std::env::args_os()))
}
