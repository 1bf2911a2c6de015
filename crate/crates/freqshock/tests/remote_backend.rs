//! Wire-level tests for the remote backend against a minimal in-process
//! HTTP server.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use freqshock::error::Error;
use freqshock::remote::{RemoteBackend, RemoteConfig};

fn read_request(stream: &mut TcpStream) -> String {
    let mut buf = Vec::new();
    let mut byte = [0u8; 1];
    // Read headers.
    while !buf.ends_with(b"\r\n\r\n") {
        if stream.read(&mut byte).unwrap_or(0) == 0 {
            break;
        }
        buf.push(byte[0]);
    }
    let head = String::from_utf8_lossy(&buf).to_string();
    let content_length: usize = head
        .lines()
        .find_map(|l| {
            l.to_ascii_lowercase()
                .strip_prefix("content-length:")
                .map(|v| v.trim().parse().unwrap())
        })
        .unwrap_or(0);
    let mut body = vec![0u8; content_length];
    stream.read_exact(&mut body).unwrap();
    format!("{head}{}", String::from_utf8_lossy(&body))
}

fn respond(stream: &mut TcpStream, status: &str, body: &str) {
    let response = format!(
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(response.as_bytes()).unwrap();
}

/// Serves `n` requests with a fixed status/body, then stops.
fn serve_fixed(n: usize, status: &'static str, body: &'static str) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let endpoint = format!("http://{}", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    std::thread::spawn(move || {
        for _ in 0..n {
            let (mut stream, _) = listener.accept().unwrap();
            let request = read_request(&mut stream);
            counter.fetch_add(1, Ordering::SeqCst);
            assert!(request.starts_with("POST /v1/predict"), "bad request: {request}");
            respond(&mut stream, status, body);
        }
    });
    (endpoint, hits)
}

fn quick_config(endpoint: &str) -> RemoteConfig {
    let mut config = RemoteConfig::new(endpoint);
    config.timeout = Duration::from_secs(5);
    config
}

#[test]
fn maps_outputs_and_exponentiates_logprobs() {
    let body = r#"{"outputs":[{"text":"<extra_id_0> Paris <extra_id_1>","logprob":0.0},{"text":"<extra_id_0> Rome <extra_id_1>","logprob":-0.6931471805599453}]}"#;
    let (endpoint, hits) = serve_fixed(1, "200 OK", body);
    let backend = RemoteBackend::new(quick_config(&endpoint)).unwrap();
    let outputs = backend.remote_predict("q", 5).unwrap();
    assert_eq!(outputs.len(), 2);
    assert_eq!(outputs[0].text, "<extra_id_0> Paris <extra_id_1>");
    assert!((outputs[0].probability - 1.0).abs() < 1e-12);
    assert!((outputs[1].probability - 0.5).abs() < 1e-12);
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[test]
fn retries_exactly_then_reports_transport_error() {
    // Server accepts and drops each connection without responding.
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let endpoint = format!("http://{}", listener.local_addr().unwrap());
    let attempts = Arc::new(AtomicUsize::new(0));
    let counter = attempts.clone();
    std::thread::spawn(move || {
        while let Ok((stream, _)) = listener.accept() {
            counter.fetch_add(1, Ordering::SeqCst);
            drop(stream);
        }
    });
    let mut config = quick_config(&endpoint);
    config.retries = 2;
    let backend = RemoteBackend::new(config).unwrap();
    let err = backend.remote_predict("q", 5).unwrap_err();
    assert!(matches!(err, Error::Transport(_)), "got {err:?}");
    assert_eq!(attempts.load(Ordering::SeqCst), 3);
}

#[test]
fn non_success_status_is_remote_error() {
    let (endpoint, _) = serve_fixed(1, "500 Internal Server Error", "{}");
    let backend = RemoteBackend::new(quick_config(&endpoint)).unwrap();
    match backend.remote_predict("q", 5) {
        Err(Error::RemoteStatus(500)) => {}
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn malformed_body_is_protocol_error() {
    let (endpoint, _) = serve_fixed(1, "200 OK", r#"{"not_outputs": []}"#);
    let backend = RemoteBackend::new(quick_config(&endpoint)).unwrap();
    assert!(matches!(
        backend.remote_predict("q", 5),
        Err(Error::Protocol(_))
    ));
}
