//! HTTP facade over the drama engine: script storage, live sessions backed
//! by append-only event logs, and asynchronous generation jobs.

mod app;
mod config;
mod error;
mod store;

pub use app::{
    router, AppState, CreateSession, GenerateRequest, PlayerMessage, PlotView, ScriptCreated, SessionView,
    TranscriptView, TurnResponse,
};
pub use config::{RuntimeSettings, ServiceConfig, ServiceConfigError};
pub use error::ApiError;
pub use store::{GenerationJob, JobState, SessionHandle, Store};

use stagecraft_core::llm::ConfigError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Builds the gateway from the config and serves until the process stops.
pub async fn serve(config: ServiceConfig) -> Result<(), ServeError> {
    let gateway = config.provider.gateway()?;
    let bind = config.bind.clone();
    let state = AppState::new(config, gateway)?;
    let listener = tokio::net::TcpListener::bind(&bind).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}

/// [`serve`] on a fresh multi-threaded runtime.
pub fn serve_blocking(config: ServiceConfig) -> Result<(), ServeError> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(serve(config))
}
