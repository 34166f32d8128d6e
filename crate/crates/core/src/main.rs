use std::process::ExitCode;

fn main() -> ExitCode {
    patchviz::cli::main_with_args(std::env::args_os())
}
