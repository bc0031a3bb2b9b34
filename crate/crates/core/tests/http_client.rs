use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;

use cmrx_core::gateway::{
    extract_sampled, record_schema, CompletionBackend, CompletionRequest, EndpointConfig, HttpBackend,
    SamplingConfig, TransportError,
};
use cmrx_core::report::{serialize_record, CmrRecord, FieldId};

/// Serves canned `(status, body)` responses in order, one per connection,
/// and records each request body.
fn serve(responses: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    thread::spawn(move || {
        for (status, body) in responses {
            let Ok((stream, _)) = listener.accept() else { return };
            let req = read_body(&stream);
            log.lock().unwrap().push(req);
            respond(stream, status, &body);
        }
    });
    (format!("http://{addr}/v1"), seen)
}

fn read_body(stream: &TcpStream) -> String {
    let mut reader = BufReader::new(stream);
    let mut len = 0;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        if line == "\r\n" || line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                len = v.trim().parse().unwrap();
            }
        }
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body).unwrap();
    String::from_utf8(body).unwrap()
}

fn respond(mut stream: TcpStream, status: u16, body: &str) {
    let head = format!(
        "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n",
        body.len()
    );
    stream.write_all(head.as_bytes()).unwrap();
    stream.write_all(body.as_bytes()).unwrap();
}

fn completion(content: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string()
}

fn config(url: String, retries: u32) -> EndpointConfig {
    EndpointConfig { base_url: url, max_retries: retries, backoff_base_ms: 5, timeout_s: 5.0, ..Default::default() }
}

fn request() -> CompletionRequest {
    CompletionRequest { prompt: "p".into(), temperature: 0.3, sample_index: 0, schema: None }
}

#[test]
fn unreachable_endpoint_exhausts_retries() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let backend = HttpBackend::new(config(format!("http://127.0.0.1:{port}/v1"), 2)).unwrap();
    match backend.complete(&request()) {
        Err(TransportError::Exhausted { attempts, last }) => {
            assert_eq!(attempts, 3);
            assert!(matches!(*last, TransportError::Connection(_)));
        }
        other => panic!("expected exhaustion, got {other:?}"),
    }
}

#[test]
fn unreachable_endpoint_fails_the_sample_set() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let backend = HttpBackend::new(config(format!("http://127.0.0.1:{port}/v1"), 0)).unwrap();
    let err = extract_sampled("r", "text", &backend, &SamplingConfig::default()).unwrap_err();
    assert!(matches!(err, TransportError::Exhausted { .. }));
}

#[test]
fn server_error_is_retried() {
    let (url, seen) = serve(vec![(503, "busy".into()), (200, completion("hello"))]);
    let backend = HttpBackend::new(config(url, 3)).unwrap();
    assert_eq!(backend.complete(&request()).unwrap(), "hello");
    assert_eq!(seen.lock().unwrap().len(), 2);
}

#[test]
fn client_error_is_not_retried() {
    let (url, seen) = serve(vec![(400, "bad".into()), (200, completion("unused"))]);
    let backend = HttpBackend::new(config(url, 3)).unwrap();
    assert_eq!(
        backend.complete(&request()),
        Err(TransportError::Status { status: 400, body: "bad".into() })
    );
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn structured_request_carries_schema_and_parses_fenced_output() {
    let rec = CmrRecord::empty().with(FieldId::Lvef, 58.0);
    let fenced = format!("```json\n{}\n```", serialize_record(&rec));
    let (url, seen) = serve(vec![(200, completion(&fenced))]);
    let cfg = EndpointConfig { structured_mode: true, ..config(url, 0) };
    let backend = HttpBackend::new(cfg).unwrap();
    let sampling = SamplingConfig { n_samples: 1, structured: true, ..Default::default() };
    let set = extract_sampled("r", "LVEF 58 %", &backend, &sampling).unwrap();
    assert_eq!(set.attempts, vec![Ok(rec)]);

    let body: serde_json::Value = serde_json::from_str(&seen.lock().unwrap()[0]).unwrap();
    assert_eq!(body["model"], "cmr-extract");
    assert_eq!(body["temperature"], 0.3);
    assert_eq!(body["response_format"]["json_schema"]["schema"], record_schema());
    assert!(body["messages"][0]["content"].as_str().unwrap().contains("LVEF 58 %"));
}
