use clap::Parser;

fn main() {
    let cli = uamn_cli::run::Cli::parse();
    std::process::exit(uamn_cli::run::run(cli));
}
