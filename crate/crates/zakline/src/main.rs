use clap::Parser;

fn main() {
    let cli = zakline::cli::Cli::parse();
    std::process::exit(zakline::cli::run(cli));
}
