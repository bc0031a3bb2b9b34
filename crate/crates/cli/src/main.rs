use clap::Parser;

fn main() {
    let cli = cmrx::commands::Cli::parse();
    if let Err(e) = cmrx::commands::run(cli) {
        eprintln!("cmrx: {e}");
        std::process::exit(e.exit_code());
    }
}
