use std::net::SocketAddr;
use std::path::PathBuf;

use cartogram_service::{router, AppState, ServiceOptions};
use clap::Parser;

/// Serves interactive cartogram steering sessions over HTTP.
#[derive(Parser, Debug)]
#[command(name = "cartogram-service", version)]
struct Args {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Built frontend to serve at `/`.
    #[arg(long)]
    static_dir: Option<PathBuf>,
    /// Keep sessions and frames across restarts.
    #[arg(long)]
    persist_dir: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let state = AppState::new(ServiceOptions { static_dir: args.static_dir, persist_dir: args.persist_dir });
    let listener = tokio::net::TcpListener::bind(args.addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
