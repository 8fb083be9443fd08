use std::process::ExitCode;

fn main() -> ExitCode {
    dimcert_cli::run(std::env::args_os())
}
