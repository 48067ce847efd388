#![allow(dead_code)]

use std::{
    collections::BTreeSet,
    io::{BufRead, BufReader, Read, Write},
    net::{TcpListener, TcpStream},
    path::PathBuf,
    sync::{
        atomic::{AtomicUsize, Ordering},
        Arc,
    },
    thread,
};

use serde_json::{json, Value};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// How the fake sidecar misbehaves, if at all.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SidecarMode {
    Healthy,
    /// `/v1/embed` returns vectors one element shorter than the health dim.
    WrongDim,
    /// `/v1/nsp` returns one score too few.
    ShortScores,
    /// `/v1/health` reports `dim: 0`.
    ZeroDim,
    /// Every POST answers 500.
    ServerError,
}

pub struct MockSidecar {
    pub url: String,
    pub requests: Arc<AtomicUsize>,
}

pub const MOCK_DIM: usize = 8;

fn words(s: &str) -> BTreeSet<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|w| w.len() > 3)
        .map(str::to_lowercase)
        .collect()
}

fn jaccard(a: &str, b: &str) -> f64 {
    let (x, y) = (words(a), words(b));
    let union = x.union(&y).count();
    if union == 0 {
        0.0
    } else {
        x.intersection(&y).count() as f64 / union as f64
    }
}

fn embedding(entity: &str, dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[0] = 1.0;
    for (i, b) in entity.bytes().enumerate() {
        v[1 + (usize::from(b) + i) % (dim - 1)] += 0.25;
    }
    v
}

fn read_request(stream: &mut TcpStream) -> Option<(String, String, Vec<u8>)> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut line = String::new();
    reader.read_line(&mut line).ok()?;
    let mut parts = line.split_whitespace();
    let method = parts.next()?.to_string();
    let path = parts.next()?.to_string();
    let mut length = 0usize;
    let mut chunked = false;
    loop {
        let mut h = String::new();
        reader.read_line(&mut h).ok()?;
        let h = h.trim_end();
        if h.is_empty() {
            break;
        }
        let lower = h.to_ascii_lowercase();
        if let Some(v) = lower.strip_prefix("content-length:") {
            length = v.trim().parse().ok()?;
        }
        if lower.starts_with("transfer-encoding:") && lower.contains("chunked") {
            chunked = true;
        }
    }
    let mut body = Vec::new();
    if chunked {
        loop {
            let mut size = String::new();
            reader.read_line(&mut size).ok()?;
            let n = usize::from_str_radix(size.trim(), 16).ok()?;
            let mut chunk = vec![0; n + 2];
            reader.read_exact(&mut chunk).ok()?;
            if n == 0 {
                break;
            }
            body.extend_from_slice(&chunk[..n]);
        }
    } else {
        body.resize(length, 0);
        reader.read_exact(&mut body).ok()?;
    }
    Some((method, path, body))
}

fn respond(stream: &mut TcpStream, status: u16, body: &Value) {
    let text = body.to_string();
    let reason = match status {
        200 => "OK",
        404 => "Not Found",
        422 => "Unprocessable Entity",
        _ => "Internal Server Error",
    };
    let _ = write!(
        stream,
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
        text.len()
    );
}

fn handle(stream: &mut TcpStream, mode: SidecarMode) {
    let Some((method, path, body)) = read_request(stream) else {
        return;
    };
    let request: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
    if method == "POST" && mode == SidecarMode::ServerError {
        respond(stream, 500, &json!({"error": "boom"}));
        return;
    }
    match (method.as_str(), path.as_str()) {
        ("GET", "/v1/health") => {
            let dim = if mode == SidecarMode::ZeroDim { 0 } else { MOCK_DIM };
            respond(stream, 200, &json!({"name": "mock", "dim": dim, "model": "test-double"}));
        }
        ("POST", "/v1/nsp") => {
            let Some(pairs) = request["pairs"].as_array() else {
                respond(stream, 422, &json!({"error": "pairs missing"}));
                return;
            };
            let mut scores: Vec<f64> = pairs
                .iter()
                .map(|p| jaccard(p["a"].as_str().unwrap_or(""), p["b"].as_str().unwrap_or("")))
                .collect();
            if mode == SidecarMode::ShortScores {
                scores.pop();
            }
            respond(stream, 200, &json!({"scores": scores}));
        }
        ("POST", "/v1/embed") => {
            let Some(entities) = request["entities"].as_array() else {
                respond(stream, 422, &json!({"error": "entities missing"}));
                return;
            };
            let dim = if mode == SidecarMode::WrongDim { MOCK_DIM - 1 } else { MOCK_DIM };
            let vectors: Vec<Vec<f64>> = entities
                .iter()
                .map(|e| embedding(e.as_str().unwrap_or(""), dim))
                .collect();
            respond(stream, 200, &json!({"vectors": vectors, "dim": MOCK_DIM}));
        }
        _ => respond(stream, 404, &json!({"error": "not found"})),
    }
}

/// Start a fake sidecar on an ephemeral port; it lives until the test
/// process exits.
pub fn spawn_sidecar(mode: SidecarMode) -> MockSidecar {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
    let url = format!("http://{}", listener.local_addr().unwrap());
    let requests = Arc::new(AtomicUsize::new(0));
    let counter = Arc::clone(&requests);
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            counter.fetch_add(1, Ordering::SeqCst);
            thread::spawn(move || handle(&mut stream, mode));
        }
    });
    MockSidecar { url, requests }
}
