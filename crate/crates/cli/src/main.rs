use std::process::ExitCode;

fn main() -> ExitCode {
    hidden_rewards_cli::run(std::env::args_os())
}
