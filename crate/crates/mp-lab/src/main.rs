use clap::Parser;

fn main() {
    let cli = mp_lab::cli::Cli::parse();
    std::process::exit(mp_lab::cli::run(cli));
}
