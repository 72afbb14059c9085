//! A live server on a real socket, labelled the way the console does it.

mod common;

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};

use label_service::ServerHandle;
use metadrift::active::{ActiveConfig, QueryStatus};
use metadrift::streamgen::DriftKind;

/// Minimal HTTP/1.1 exchange; returns the status code and body.
fn http(addr: SocketAddr, method: &str, path: &str, body: Option<&str>) -> (u16, String) {
    let mut stream = TcpStream::connect(addr).unwrap();
    let body = body.unwrap_or("");
    write!(
        stream,
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut raw = String::new();
    stream.read_to_string(&mut raw).unwrap();
    let code = raw.split_whitespace().nth(1).unwrap().parse().unwrap();
    let body = raw.split_once("\r\n\r\n").map(|(_, b)| b.to_string()).unwrap_or_default();
    (code, body)
}

#[test]
fn operator_labels_three_queries() {
    let mut det = common::live(ActiveConfig {
        label_budget: Some(3),
        query_expiry: 100,
        ..ActiveConfig::default()
    });
    let server = ServerHandle::spawn(det.queue(), "127.0.0.1:0".parse().unwrap()).unwrap();
    let addr = server.addr();
    let before = det.detector().prototypes.counts.clone();

    common::run_emissions(&mut det, 4, 11);
    let (code, body) = http(addr, "GET", "/api/queries?status=pending", None);
    assert_eq!(code, 200);
    let pending: Vec<serde_json::Value> = serde_json::from_str(&body).unwrap();
    assert_eq!(pending.len(), 3);

    let classes = ["sudden", "gradual", "sudden"];
    for (q, class) in pending.iter().zip(classes) {
        let id = q["id"].as_u64().unwrap();
        let (code, _) = http(addr, "POST", &format!("/api/queries/{id}/label"), Some(&format!(r#"{{"class":"{class}"}}"#)));
        assert_eq!(code, 204);
    }

    // Answers are folded in at the next emission.
    common::run_emissions(&mut det, 1, 12);
    let run = det.finish();
    assert_eq!(run.labels_applied, 3);
    assert!(run.queries.iter().all(|q| q.status == QueryStatus::Answered && q.applied));
    let after = &run.detector.prototypes.counts;
    assert_eq!(after[DriftKind::Sudden.index()], before[DriftKind::Sudden.index()] + 2);
    assert_eq!(after[DriftKind::Gradual.index()], before[DriftKind::Gradual.index()] + 1);
    assert_eq!(after.iter().sum::<usize>(), before.iter().sum::<usize>() + 3);
    server.shutdown().unwrap();
}

#[test]
fn racing_double_submit_records_one_label() {
    let mut det = common::live(ActiveConfig {
        label_budget: Some(1),
        query_expiry: 100,
        ..ActiveConfig::default()
    });
    let server = ServerHandle::spawn(det.queue(), "127.0.0.1:0".parse().unwrap()).unwrap();
    let addr = server.addr();
    common::run_emissions(&mut det, 1, 13);

    let codes: Vec<u16> = std::thread::scope(|s| {
        let handles: Vec<_> = ["sudden", "incremental"]
            .into_iter()
            .map(|class| {
                s.spawn(move || http(addr, "POST", "/api/queries/0/label", Some(&format!(r#"{{"class":"{class}"}}"#))).0)
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut sorted = codes.clone();
    sorted.sort_unstable();
    assert_eq!(sorted, vec![204, 409]);

    common::run_emissions(&mut det, 1, 14);
    let run = det.finish();
    assert_eq!(run.labels_applied, 1);
    assert_eq!(run.queries.iter().filter(|q| q.label.is_some()).count(), 1);
}
