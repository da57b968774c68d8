//! HTTP/JSON gateway over a file-backed store.
//!
//! `serve` loads the snapshot, replays the event log and starts listening.
//! All mutations go through one writer lock, so events have a total order.

pub mod api;
pub mod config;
pub mod error;
pub mod store;

use std::net::SocketAddr;
use std::sync::Arc;

use ipoi_core::chat::{ChatConfig, ChatEngine, FoodDayCalendar, IntentSet};
use ipoi_core::geofence::GeofenceConfig;
use parking_lot::RwLock;
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

pub use api::{router, Shared};
pub use config::Config;
pub use error::{ApiError, ConfigError, ServeError, StoreError};
pub use store::{Event, EventRecord, Rules, State, Store};

fn read_content(path: &std::path::Path) -> Result<String, ServeError> {
    std::fs::read_to_string(path)
        .map_err(|e| ServeError::Config(ConfigError::Read(path.display().to_string(), e.to_string())))
}

/// Builds the chat engine from the configured (or shipped) content.
pub fn engine_for(config: &Config) -> Result<ChatEngine, ServeError> {
    let intents = match &config.intents_path {
        Some(p) => IntentSet::from_json(&read_content(p)?)?,
        None => IntentSet::shipped(),
    };
    let calendar = match &config.calendar_path {
        Some(p) => FoodDayCalendar::from_json(&read_content(p)?)?,
        None => FoodDayCalendar::shipped(),
    };
    Ok(ChatEngine::new(
        intents,
        calendar,
        ChatConfig {
            threshold: config.threshold,
            context_window: config.context_window,
        },
    ))
}

pub fn rules_for(config: &Config, engine: &ChatEngine) -> Rules {
    Rules {
        geofence: GeofenceConfig {
            cooldown_secs: config.cooldown_secs,
            ..GeofenceConfig::default()
        },
        context_window: config.context_window,
        fallback_intent: engine.intents.fallback().name.clone(),
    }
}

/// Loads content and store without binding a socket.
pub fn open(config: Config) -> Result<Arc<Shared>, ServeError> {
    config.validate()?;
    let engine = engine_for(&config)?;
    let store = Store::open(&config.data_dir, rules_for(&config, &engine), config.compact_every)?;
    Ok(Arc::new(Shared {
        store: RwLock::new(store),
        engine,
        config,
    }))
}

/// A running service.
pub struct Service {
    addr: SocketAddr,
    shared: Arc<Shared>,
    shutdown: Option<oneshot::Sender<()>>,
    task: JoinHandle<std::io::Result<()>>,
}

impl Service {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn shared(&self) -> &Arc<Shared> {
        &self.shared
    }

    /// Hash of the full in-memory state.
    pub fn state_hash(&self) -> String {
        self.shared.store.read().state().hash()
    }

    /// Stops accepting connections and waits for in-flight requests.
    pub async fn shutdown(mut self) -> std::io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        self.task.await.map_err(std::io::Error::other)?
    }

    /// Runs until the server exits on its own.
    pub async fn wait(mut self) -> std::io::Result<()> {
        let _keep = self.shutdown.take();
        (&mut self.task).await.map_err(std::io::Error::other)?
    }
}

pub async fn serve(config: Config) -> Result<Service, ServeError> {
    let listen = config.listen;
    let shared = open(config)?;
    let listener = TcpListener::bind(listen).await.map_err(|source| ServeError::Bind {
        addr: listen.to_string(),
        source,
    })?;
    let addr = listener.local_addr().map_err(|source| ServeError::Bind {
        addr: listen.to_string(),
        source,
    })?;
    let (tx, rx) = oneshot::channel::<()>();
    let app = router(shared.clone());
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
    });
    tracing::info!(%addr, "listening");
    Ok(Service {
        addr,
        shared,
        shutdown: Some(tx),
        task,
    })
}

/// Serves until Ctrl-C on a fresh runtime. `on_ready` sees the bound address.
pub fn run_blocking(config: Config, on_ready: impl FnOnce(SocketAddr)) -> Result<(), ServeError> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|source| ServeError::Bind {
            addr: config.listen.to_string(),
            source,
        })?;
    runtime.block_on(async {
        let service = serve(config).await?;
        on_ready(service.local_addr());
        let _ = tokio::signal::ctrl_c().await;
        let _ = service.shutdown().await;
        Ok(())
    })
}
