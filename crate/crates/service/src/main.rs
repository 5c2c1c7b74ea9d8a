use std::net::SocketAddr;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Parser;

use dpg_service::session::parse_speed;
use dpg_service::{router, AppState, ServerConfig};

#[derive(Parser)]
#[command(
    name = "dpg-serve",
    version,
    about = "Serve live DPG training sessions over HTTP and WebSocket"
)]
struct Cli {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Where finished sessions write their curve and event log.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Default decisions per second; 0 for unthrottled.
    #[arg(long, default_value_t = 5.0)]
    speed: f64,
}

#[tokio::main]
async fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let default_speed = parse_speed(cli.speed).map_err(anyhow::Error::msg)?;
    let app = router(AppState::new(ServerConfig {
        out_dir: cli.out_dir,
        default_speed,
    }));
    let listener = tokio::net::TcpListener::bind(cli.addr)
        .await
        .with_context(|| format!("binding {}", cli.addr))?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app).await?;
    Ok(())
}
