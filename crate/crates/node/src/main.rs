use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;

use certchain_core::clock::SystemClock;
use certchain_core::gateway::GatewayConfig;

/// Runs the credential ledger gateway over HTTP.
#[derive(Parser)]
#[command(name = "certchain-node", version)]
struct Args {
    /// Gateway configuration file (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Overrides the listen address from the configuration.
    #[arg(long)]
    listen: Option<String>,
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .init();
    let args = Args::parse();
    let config = match GatewayConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let listen = args.listen.unwrap_or_else(|| config.listen.clone());
    let gateway = match config.build(Arc::new(SystemClock)) {
        Ok(g) => Arc::new(g),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let listener = match tokio::net::TcpListener::bind(&listen).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: cannot listen on {listen}: {e}");
            return ExitCode::from(1);
        }
    };
    tracing::info!(height = gateway.height(), "listening on {listen}");
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    match certchain_node::serve(listener, gateway, shutdown).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
