use clap::Parser;

fn main() {
    let cli = hover_es::cli::Cli::parse();
    std::process::exit(hover_es::cli::run(cli));
}
