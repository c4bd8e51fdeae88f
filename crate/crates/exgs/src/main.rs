use std::process::ExitCode;

fn main() -> ExitCode {
    exgs::cli::main()
}
