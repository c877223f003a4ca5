use clap::Parser;

fn main() {
    std::process::exit(advclaim_cli::run(advclaim_cli::Cli::parse()));
}
