use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(liquidation::run(std::env::args_os()))
}
