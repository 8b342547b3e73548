use std::process::ExitCode;

fn main() -> ExitCode {
    fadmit::cli::main_with_args(std::env::args_os())
}
