use std::process::ExitCode;

fn main() -> ExitCode {
    batchlab_cli::main_with(std::env::args_os())
}
