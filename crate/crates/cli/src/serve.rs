use std::io::Write;

use veil_core::backends::Backends;
use veil_service::AppState;

use crate::args::{BackendKind, ServeArgs};
use crate::error::{CliError, EXIT_FAILURE};
use crate::setup;

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
    tracing::info!("shutdown requested, draining in-flight requests");
}

pub fn run(a: &ServeArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = setup::load_config(&a.backends)?;
    let backends = match a.backend {
        BackendKind::Mock => setup::mock_backends(&a.backends)?,
        BackendKind::Live => Backends::from_config(&cfg).map_err(|e| CliError::validation(e.to_string()))?,
    };
    let mut settings = cfg.service.clone();
    if let Some(p) = a.port {
        settings.port = p;
    }
    let addr = format!("{}:{}", a.host, settings.port);

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::new(EXIT_FAILURE, e.to_string()))?;
    // Blocking HTTP clients must not be dropped on a runtime thread, so the
    // last handle lives out here.
    let keep_alive = backends.clone();
    let result = runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::new(EXIT_FAILURE, format!("cannot bind {addr}: {e}")))?;
        let local = listener
            .local_addr()
            .map_err(|e| CliError::new(EXIT_FAILURE, e.to_string()))?;
        writeln!(stdout, "listening on http://{local}")
            .and_then(|_| stdout.flush())
            .ok();
        tracing::info!(%local, "service started");
        veil_service::serve(listener, AppState::new(backends, &settings), shutdown_signal())
            .await
            .map_err(|e| CliError::new(EXIT_FAILURE, e.to_string()))
    });
    runtime.shutdown_background();
    drop(keep_alive);
    result
}
