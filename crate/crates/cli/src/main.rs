use std::process::ExitCode;

fn main() -> ExitCode {
    drivetalk_cli::main_with(std::env::args_os())
}
