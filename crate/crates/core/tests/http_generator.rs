use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use formatkit::generator::{GenParams, GeneratorClient, GeneratorError, HttpGenerator};

struct Captured {
    auth: Option<String>,
    body: serde_json::Value,
}

/// Serves one canned `(status, body)` per connection, in order.
fn serve(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Captured>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/completions", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let seen2 = Arc::clone(&seen);
    thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut auth = None;
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if lower.starts_with("authorization:") {
                    auth = Some(line["authorization:".len()..].trim().to_string());
                }
            }
            let mut buf = vec![0u8; len];
            reader.read_exact(&mut buf).unwrap();
            seen2.lock().unwrap().push(Captured {
                auth,
                body: serde_json::from_slice(&buf).unwrap_or(serde_json::Value::Null),
            });
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, seen)
}

fn ok(text: &str) -> (u16, String) {
    (
        200,
        serde_json::json!({"id": "cmpl-1", "choices": [{"text": text}], "usage": {"prompt_tokens": 3, "completion_tokens": 1}})
            .to_string(),
    )
}

#[derive(Clone, Default)]
struct SharedLog(Arc<Mutex<Vec<u8>>>);

impl Write for SharedLog {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

#[test]
fn sends_completion_request_and_reads_text() {
    let (url, seen) = serve(vec![ok("OK")]);
    let g = HttpGenerator::new(url, "toy-model", Some("sk-test".into())).unwrap();
    let params = GenParams {
        stop_sequences: vec!["\n\n".into()],
        ..GenParams::default()
    };
    assert_eq!(g.generate("Say OK", &params).unwrap(), "OK");
    let seen = seen.lock().unwrap();
    assert_eq!(seen[0].auth.as_deref(), Some("Bearer sk-test"));
    assert_eq!(seen[0].body["model"], "toy-model");
    assert_eq!(seen[0].body["prompt"], "Say OK");
    assert_eq!(seen[0].body["temperature"], 0.0);
    assert_eq!(seen[0].body["stop"][0], "\n\n");
}

#[test]
fn retries_server_errors_then_succeeds() {
    let (url, seen) = serve(vec![(500, "{}".into()), (503, "{}".into()), ok("fine")]);
    let log = SharedLog::default();
    let g = HttpGenerator::new(url, "m", Some("k".into()))
        .unwrap()
        .with_backoff(Duration::from_millis(5))
        .with_request_log(Box::new(log.clone()));
    assert_eq!(g.generate("p", &GenParams::default()).unwrap(), "fine");
    assert_eq!(seen.lock().unwrap().len(), 3);
    let text = String::from_utf8(log.0.lock().unwrap().clone()).unwrap();
    let statuses: Vec<u64> = text
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["status"].as_u64().unwrap())
        .collect();
    assert_eq!(statuses, vec![500, 503, 200]);
}

#[test]
fn gives_up_after_max_attempts() {
    let (url, _) = serve(vec![(502, "bad gateway".into()), (502, "bad gateway".into())]);
    let g = HttpGenerator::new(url, "m", Some("k".into()))
        .unwrap()
        .with_backoff(Duration::from_millis(1))
        .with_max_attempts(2);
    match g.generate("p", &GenParams::default()) {
        Err(GeneratorError::Backend { status: 502, .. }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn client_errors_are_not_retried() {
    let (url, seen) = serve(vec![(401, "{\"error\":\"nope\"}".into()), ok("unreachable")]);
    let g = HttpGenerator::new(url, "m", Some("k".into())).unwrap().with_backoff(Duration::from_millis(1));
    assert!(matches!(g.generate("p", &GenParams::default()), Err(GeneratorError::Backend { status: 401, .. })));
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn malformed_body_is_reported() {
    let (url, _) = serve(vec![(200, "{\"choices\": []}".into())]);
    let g = HttpGenerator::new(url, "m", Some("k".into())).unwrap();
    assert!(matches!(g.generate("p", &GenParams::default()), Err(GeneratorError::MalformedResponse(_))));
}

#[test]
fn missing_key_is_rejected_up_front() {
    assert!(matches!(HttpGenerator::new("http://x", "m", None), Err(GeneratorError::AuthMissing)));
    assert!(matches!(HttpGenerator::new("http://x", "m", Some("  ".into())), Err(GeneratorError::AuthMissing)));
}
