use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(fairaudit::cli::run(std::env::args_os()))
}
