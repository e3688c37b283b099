use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = guideqa::cli::Cli::parse();
    if let Err(e) = guideqa::cli::run(cli) {
        eprintln!("{}", e.line());
        std::process::exit(e.exit_code());
    }
}
