//! HTTP+JSON front end for interactive shift sessions.

mod api;
mod config;
mod error;
mod store;

use std::sync::Arc;

pub use api::router;
pub use config::{Config, ConfigError, TreatmentTerms, LOG_DIR_VAR, PORT_VAR};
pub use error::ApiError;
pub use store::{CreateRequest, Entry, Handle, Store};

/// Builds the store for `config`, restoring any logged sessions.
pub fn build_store(config: &Config) -> Result<Arc<Store>, StartError> {
    let store = Store::new(config.treatment_specs()?, config.log_dir.clone())?;
    let (restored, failed) = store.restore();
    if restored > 0 {
        tracing::info!(restored, "restored sessions from the log directory");
    }
    for (path, err) in failed {
        tracing::warn!(path = %path.display(), "could not restore session: {err}");
    }
    Ok(Arc::new(store))
}

#[derive(Debug, thiserror::Error)]
pub enum StartError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
}

/// Binds `config.addr()` and serves until ctrl-c.
pub async fn serve(config: Config) -> Result<(), StartError> {
    let listener = tokio::net::TcpListener::bind(config.addr()).await?;
    serve_on(listener, &config).await
}

/// Serves on an already bound listener until ctrl-c.
pub async fn serve_on(listener: tokio::net::TcpListener, config: &Config) -> Result<(), StartError> {
    let store = build_store(config)?;
    let app = router(store, config.static_dir.as_deref());
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
