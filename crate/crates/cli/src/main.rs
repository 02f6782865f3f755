use clap::Parser;

fn main() {
    let cli = spherelab_cli::Cli::parse();
    if let Err(e) = spherelab_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
