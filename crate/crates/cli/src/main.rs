use clap::Parser;
use tracing_subscriber::EnvFilter;

fn main() {
    let cli = argrid_cli::config::Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_new(&cli.log).unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    match argrid_cli::run(cli) {
        Ok(serde_json::Value::Null) => {}
        Ok(summary) => println!("{summary}"),
        Err(e) => {
            eprintln!("argrid: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
