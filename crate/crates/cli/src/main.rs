use clap::Parser;
use marketacf_cli::{run, Cli};

fn main() {
    let code = run(Cli::parse());
    std::process::exit(i32::from(code));
}
