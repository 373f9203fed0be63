//! REST routes under `/api/v1`.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::{Body, BodyDataStream, Bytes};
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use cloudcap_core::flow::flows_csv;
use cloudcap_core::time::iso_micros;
use cloudcap_core::{aggregate, DissectedPacket, FlowTimeouts};
use futures_util::StreamExt;
use serde::Serialize;
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

use super::analysis::{read_all_packets, read_packet_page};
use super::error::ApiError;
use super::index::{ArchiveEntry, Status};
use super::store::{FLOWS_CSV, PACKETS_NDJSON, REPORT_JSON};
use super::Service;

pub const DEFAULT_PAGE_LIMIT: u64 = 100;
pub const MAX_PAGE_LIMIT: u64 = 1000;

type Shared = State<Arc<Service>>;

pub fn router(svc: Arc<Service>) -> Router {
    let api = Router::new()
        .route("/captures", get(list_captures).post(upload_capture))
        .route("/captures/{id}", get(get_status))
        .route("/captures/{id}/report", get(get_report))
        .route("/captures/{id}/packets", get(get_packets))
        .route("/captures/{id}/flows", get(get_flows))
        .route("/healthz", get(healthz));
    let app = Router::new()
        .nest("/api/v1", api)
        .route("/healthz", get(healthz))
        .layer(axum::extract::DefaultBodyLimit::disable())
        .layer(CorsLayer::permissive());
    let app = match &svc.config.static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.fallback(no_route),
    };
    app.with_state(svc)
}

async fn healthz() -> &'static str {
    "ok"
}

async fn no_route(uri: Uri) -> ApiError {
    ApiError::not_found(uri.path())
}

#[derive(Serialize)]
struct Created<'a> {
    capture_id: &'a str,
    status: Status,
}

async fn upload_capture(State(svc): Shared, headers: HeaderMap, request: Request) -> Result<Response, ApiError> {
    let limit = svc.config.max_upload_bytes;
    let declared = headers
        .get(header::CONTENT_LENGTH)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.parse::<u64>().ok());
    let mut stream = request.into_body().into_data_stream();
    if declared.is_some_and(|n| n > limit) {
        discard_rest(stream, limit);
        return Err(ApiError::too_large(limit));
    }
    let mut body = Vec::new();
    while let Some(chunk) = stream.next().await {
        let chunk = chunk.map_err(ApiError::internal)?;
        if (body.len() + chunk.len()) as u64 > limit {
            discard_rest(stream, limit);
            return Err(ApiError::too_large(limit));
        }
        body.extend_from_slice(&chunk);
    }
    let body = Bytes::from(body);
    let name = headers
        .get("x-filename")
        .and_then(|v| v.to_str().ok())
        .map(str::to_string)
        .unwrap_or_else(|| "upload.pcap".to_string());

    let entry = tokio::task::spawn_blocking({
        let svc = Arc::clone(&svc);
        move || svc.submit(&body, &name)
    })
    .await
    .map_err(ApiError::internal)??;
    let created = Created {
        capture_id: &entry.capture_id,
        status: entry.status,
    };
    Ok((StatusCode::CREATED, Json(created)).into_response())
}

/// Reads and drops up to `budget` more bytes of a rejected upload so the
/// client sees the error response instead of a reset connection.
fn discard_rest(mut stream: BodyDataStream, budget: u64) {
    tokio::spawn(async move {
        let mut left = budget;
        while let Some(Ok(chunk)) = stream.next().await {
            left = left.saturating_sub(chunk.len() as u64);
            if left == 0 {
                break;
            }
        }
    });
}

async fn list_captures(State(svc): Shared) -> Json<Vec<ArchiveEntry>> {
    Json(svc.index.scan())
}

fn lookup(svc: &Service, id: &str) -> Result<ArchiveEntry, ApiError> {
    svc.index.get(id).ok_or_else(|| ApiError::unknown_id(id))
}

fn complete(svc: &Service, id: &str) -> Result<ArchiveEntry, ApiError> {
    let entry = lookup(svc, id)?;
    if entry.status != Status::Complete {
        return Err(ApiError::not_ready(id, entry.status.as_str()));
    }
    Ok(entry)
}

async fn get_status(State(svc): Shared, Path(id): Path<String>) -> Result<Json<ArchiveEntry>, ApiError> {
    lookup(&svc, &id).map(Json)
}

async fn get_report(State(svc): Shared, Path(id): Path<String>) -> Result<Response, ApiError> {
    complete(&svc, &id)?;
    let bytes = tokio::fs::read(svc.layout.artifact(&id, REPORT_JSON))
        .await
        .map_err(ApiError::internal)?;
    Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

#[derive(Debug, Serialize, PartialEq, Eq)]
pub struct PacketItem {
    pub index: u64,
    pub timestamp: String,
    pub src: String,
    pub dst: String,
    pub protocol_label: String,
    pub frame_len: u32,
    pub payload_preview_hex: String,
}

impl From<&DissectedPacket> for PacketItem {
    fn from(p: &DissectedPacket) -> Self {
        PacketItem {
            index: p.index,
            timestamp: iso_micros(p.ts_us),
            src: p.src_addr.map(|a| a.to_string()).unwrap_or_default(),
            dst: p.dst_addr.map(|a| a.to_string()).unwrap_or_default(),
            protocol_label: p.protocol_label.clone(),
            frame_len: p.frame_len,
            payload_preview_hex: hex::encode(&p.payload_preview),
        }
    }
}

#[derive(Serialize)]
struct PacketPage {
    offset: u64,
    limit: u64,
    total: u64,
    items: Vec<PacketItem>,
}

/// Parses `offset` and `limit`; `0 <= offset`, `1 <= limit <= 1000`.
pub fn pagination(query: &HashMap<String, String>) -> Result<(u64, u64), ApiError> {
    let offset = match query.get("offset") {
        None => 0,
        Some(v) => v
            .parse::<u64>()
            .map_err(|_| ApiError::bad_pagination(format!("offset must be a non-negative integer, got {v:?}")))?,
    };
    let limit = match query.get("limit") {
        None => DEFAULT_PAGE_LIMIT,
        Some(v) => v
            .parse::<u64>()
            .ok()
            .filter(|n| (1..=MAX_PAGE_LIMIT).contains(n))
            .ok_or_else(|| ApiError::bad_pagination(format!("limit must be an integer from 1 to {MAX_PAGE_LIMIT}, got {v:?}")))?,
    };
    Ok((offset, limit))
}

async fn get_packets(
    State(svc): Shared,
    Path(id): Path<String>,
    Query(query): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let entry = complete(&svc, &id)?;
    let (offset, limit) = pagination(&query)?;
    let total = entry.packet_count.unwrap_or(0);
    let path = svc.layout.artifact(&id, PACKETS_NDJSON);
    let packets = if offset >= total {
        Vec::new()
    } else {
        tokio::task::spawn_blocking(move || read_packet_page(&path, offset, limit))
            .await
            .map_err(ApiError::internal)?
            .map_err(ApiError::internal)?
    };
    let page = PacketPage {
        offset,
        limit,
        total,
        items: packets.iter().map(PacketItem::from).collect(),
    };
    Ok(Json(page).into_response())
}

/// Reads `idle_timeout_s` and `active_timeout_s`, falling back to the
/// defaults for the ones not given.
pub fn flow_timeouts(query: &HashMap<String, String>) -> Result<FlowTimeouts, ApiError> {
    let defaults = FlowTimeouts::default();
    let read = |name: &str, default: i64| -> Result<f64, ApiError> {
        match query.get(name) {
            None => Ok(default as f64 / 1e6),
            Some(v) => v
                .parse::<f64>()
                .map_err(|_| ApiError::non_positive_timeout(format!("{name} must be a positive number of seconds, got {v:?}"))),
        }
    };
    let idle = read("idle_timeout_s", defaults.idle_us())?;
    let active = read("active_timeout_s", defaults.active_us())?;
    FlowTimeouts::from_secs(idle, active).map_err(|e| ApiError::non_positive_timeout(e.to_string()))
}

async fn get_flows(
    State(svc): Shared,
    Path(id): Path<String>,
    Query(query): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    complete(&svc, &id)?;
    let timeouts = flow_timeouts(&query)?;
    let bytes = if timeouts.is_default() {
        tokio::fs::read(svc.layout.artifact(&id, FLOWS_CSV))
            .await
            .map_err(ApiError::internal)?
    } else {
        let path = svc.layout.artifact(&id, PACKETS_NDJSON);
        tokio::task::spawn_blocking(move || {
            read_all_packets(&path).map(|packets| flows_csv(&aggregate(&packets, &timeouts)))
        })
        .await
        .map_err(ApiError::internal)?
        .map_err(ApiError::internal)?
    };
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], Body::from(bytes)).into_response())
}
