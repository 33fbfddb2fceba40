use clap::Parser;

fn main() {
    let cli = noteflow_cli::Cli::parse();
    if let Err(e) = noteflow_cli::run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(noteflow_cli::exit_code(&e));
    }
}
