use std::net::SocketAddr;
use std::process::ExitCode;

use cloudcap::service::{api, Config, Service};
use tracing_subscriber::EnvFilter;

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();

    let config = match Config::from_env() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("cloudcap-server: configuration: {e}");
            return ExitCode::from(2);
        }
    };
    let svc = match Service::open(config.clone()) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("cloudcap-server: {e}");
            return ExitCode::FAILURE;
        }
    };
    let resumed = svc.recover();
    if !resumed.is_empty() {
        tracing::info!(count = resumed.len(), "re-queued unfinished analyses");
    }
    svc.spawn_workers();

    let addr = SocketAddr::new(config.bind, config.port);
    let listener = match std::net::TcpListener::bind(addr) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("cloudcap-server: binding {addr}: {e}");
            return ExitCode::FAILURE;
        }
    };
    let local = listener.local_addr().expect("bound socket has an address");
    let app = api::router(svc);

    let served = match config.tls() {
        Some((cert, key)) => {
            // reqwest links ring too, so pick the provider explicitly
            let _ = rustls::crypto::ring::default_provider().install_default();
            let tls = match axum_server::tls_rustls::RustlsConfig::from_pem_file(cert, key).await {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("cloudcap-server: loading TLS certificate: {e}");
                    return ExitCode::FAILURE;
                }
            };
            println!("listening on https://{local}");
            let handle = axum_server::Handle::new();
            tokio::spawn({
                let handle = handle.clone();
                async move {
                    shutdown_signal().await;
                    handle.graceful_shutdown(None);
                }
            });
            axum_server::from_tcp_rustls(listener, tls)
                .handle(handle)
                .serve(app.into_make_service())
                .await
        }
        None => {
            println!("listening on http://{local}");
            listener.set_nonblocking(true).expect("nonblocking listener");
            let listener = tokio::net::TcpListener::from_std(listener).expect("tokio listener");
            axum::serve(listener, app).with_graceful_shutdown(shutdown_signal()).await
        }
    };
    match served {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cloudcap-server: {e}");
            ExitCode::FAILURE
        }
    }
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        if let Ok(mut s) = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            s.recv().await;
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}
