use clap::Parser;

fn main() {
    let cli = occsim::cli::Cli::parse();
    std::process::exit(occsim::cli::run(cli));
}
