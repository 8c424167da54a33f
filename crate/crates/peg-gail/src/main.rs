use clap::Parser;

fn main() {
    let cli = peg_gail::cli::Cli::parse();
    if let Err(e) = peg_gail::cli::run(cli) {
        let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
        eprintln!("{line}");
        std::process::exit(e.exit_code());
    }
}
