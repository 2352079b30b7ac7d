use std::process::ExitCode;

fn main() -> ExitCode {
    wfrecon::cli::main()
}
