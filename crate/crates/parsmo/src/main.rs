use clap::Parser;

fn main() {
    let cli = parsmo::cli::Cli::parse();
    std::process::exit(parsmo::cli::run(cli));
}
