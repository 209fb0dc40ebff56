//! A loopback HTTP server standing in for a chat-completions endpoint.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde_json::json;

use dualad_core::reasoner::{
    build_prompt, DecisionSource, ReasonerBackendConfig, RemoteReasoner,
};

#[derive(Debug, Clone)]
pub enum Behavior {
    /// 200 with a well-formed completion whose message content is this.
    Content(String),
    /// This status and raw body.
    Raw(u16, String),
    /// Accept the request and say nothing for this long.
    Hang(Duration),
}

#[derive(Debug, Clone)]
pub struct Captured {
    pub path: String,
    pub authorization: Option<String>,
    pub body: serde_json::Value,
}

pub struct StubServer {
    pub url: String,
    pub requests: Arc<Mutex<Vec<Captured>>>,
}

impl StubServer {
    pub fn start(behavior: Behavior) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind loopback");
        let url = format!(
            "http://{}/v1/chat/completions",
            listener.local_addr().unwrap()
        );
        let requests = Arc::new(Mutex::new(Vec::new()));
        let log = Arc::clone(&requests);
        thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                let log = Arc::clone(&log);
                let behavior = behavior.clone();
                thread::spawn(move || serve(stream, &behavior, &log));
            }
        });
        Self { url, requests }
    }

    pub fn request_count(&self) -> usize {
        self.requests.lock().unwrap().len()
    }
}

fn serve(stream: TcpStream, behavior: &Behavior, log: &Mutex<Vec<Captured>>) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut request_line = String::new();
    if reader.read_line(&mut request_line).is_err() {
        return;
    }
    let path = request_line.split_whitespace().nth(1).unwrap_or("").to_string();
    let mut length = 0;
    let mut chunked = false;
    let mut authorization = None;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            let value = value.trim();
            match name.to_ascii_lowercase().as_str() {
                "content-length" => length = value.parse().unwrap_or(0),
                "transfer-encoding" => chunked = value.eq_ignore_ascii_case("chunked"),
                "authorization" => authorization = Some(value.to_string()),
                _ => {}
            }
        }
    }
    let body = if chunked {
        read_chunked(&mut reader)
    } else {
        let mut buf = vec![0; length];
        reader.read_exact(&mut buf).ok();
        buf
    };
    log.lock().unwrap().push(Captured {
        path,
        authorization,
        body: serde_json::from_slice(&body).unwrap_or(serde_json::Value::Null),
    });

    let (status, payload) = match behavior {
        Behavior::Content(content) => (
            200,
            json!({
                "id": "stub",
                "object": "chat.completion",
                "choices": [{"index": 0, "message": {"role": "assistant", "content": content}}],
            })
            .to_string(),
        ),
        Behavior::Raw(status, body) => (*status, body.clone()),
        Behavior::Hang(d) => {
            thread::sleep(*d);
            return;
        }
    };
    let mut stream = stream;
    let _ = write!(
        stream,
        "HTTP/1.1 {status} Stub\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    );
}

fn read_chunked(reader: &mut impl BufRead) -> Vec<u8> {
    let mut body = Vec::new();
    loop {
        let mut size = String::new();
        if reader.read_line(&mut size).unwrap_or(0) == 0 {
            break;
        }
        let n = usize::from_str_radix(size.trim(), 16).unwrap_or(0);
        if n == 0 {
            break;
        }
        let mut chunk = vec![0; n + 2];
        if reader.read_exact(&mut chunk).is_err() {
            break;
        }
        body.extend_from_slice(&chunk[..n]);
    }
    body
}

pub const STUB_KEY_VAR: &str = "DUALAD_STUB_API_KEY";

pub fn backend(url: &str, timeout: f64, max_retries: u32) -> ReasonerBackendConfig {
    ReasonerBackendConfig {
        endpoint_url: url.to_string(),
        model_name: "stub-model".into(),
        api_key_env_var: STUB_KEY_VAR.into(),
        timeout,
        max_retries,
        ..Default::default()
    }
}

/// Runs the valid, out-of-range, malformed and timeout paths of the query
/// contract against stub servers. Returns one line per path.
pub fn check_query_contract() -> Result<Vec<String>, String> {
    std::env::set_var(STUB_KEY_VAR, "stub-secret");
    let prompt = build_prompt(&[], 6.0, 13.9, 8000);
    let mut report = Vec::new();

    let server = StubServer::start(Behavior::Content(
        "Slowing down. {\"speed\": 8.0, \"rationale\": \"pedestrian ahead\"}".into(),
    ));
    let mut remote = RemoteReasoner::new(backend(&server.url, 5.0, 2));
    let (d, reply) = remote.query(&prompt);
    if d.suggested_speed != 8.0 || d.source != DecisionSource::RemoteLlm || d.clamped {
        return Err(format!("valid reply: got {d:?}"));
    }
    if reply.is_none() || remote_failures(&remote) != 0 || server.request_count() != 1 {
        return Err("valid reply: expected one request and no failure".into());
    }
    let req = server.requests.lock().unwrap()[0].clone();
    let body = &req.body;
    let wire_ok = req.path == "/v1/chat/completions"
        && req.authorization.as_deref() == Some("Bearer stub-secret")
        && body["model"] == "stub-model"
        && body["temperature"] == 0
        && body["messages"][0]["role"] == "system"
        && body["messages"][0]["content"] == prompt.system.as_str()
        && body["messages"][1]["role"] == "user"
        && body["messages"][1]["content"] == prompt.user.as_str();
    if !wire_ok {
        return Err(format!("valid reply: unexpected request {req:?}"));
    }
    report.push("valid reply -> 8.0 m/s from remote_llm, wire format checked".to_string());

    let server = StubServer::start(Behavior::Content("{\"speed\": 22}".into()));
    let mut remote = RemoteReasoner::new(backend(&server.url, 5.0, 0));
    let (d, _) = remote.query(&prompt);
    if d.suggested_speed != 15.0 || !d.clamped || d.source != DecisionSource::RemoteLlm {
        return Err(format!("out-of-range reply: got {d:?}"));
    }
    report.push("out-of-range reply -> clamped to 15.0 m/s".to_string());

    for (what, behavior) in [
        ("prose reply", Behavior::Content("I would slow down a little.".into())),
        ("non-JSON body", Behavior::Raw(200, "<html>oops</html>".into())),
        ("server error", Behavior::Raw(500, "{}".into())),
    ] {
        let server = StubServer::start(behavior);
        let mut remote = RemoteReasoner::new(backend(&server.url, 5.0, 2));
        let (d, reply) = remote.query(&prompt);
        if d.source != DecisionSource::Fallback || d.suggested_speed != 15.0 || reply.is_some() {
            return Err(format!("{what}: got {d:?}"));
        }
        if remote_failures(&remote) != 1 || server.request_count() != 3 {
            return Err(format!(
                "{what}: {} requests, {} failures",
                server.request_count(),
                remote_failures(&remote)
            ));
        }
        report.push(format!("{what} -> fallback 15.0 m/s after 3 attempts, 1 failure"));
    }

    let server = StubServer::start(Behavior::Hang(Duration::from_secs(5)));
    let mut remote = RemoteReasoner::new(backend(&server.url, 0.3, 1));
    let started = Instant::now();
    let (d, _) = remote.query(&prompt);
    let elapsed = started.elapsed();
    if d.source != DecisionSource::Fallback || d.suggested_speed != 15.0 {
        return Err(format!("timeout: got {d:?}"));
    }
    if remote_failures(&remote) != 1 || elapsed > Duration::from_secs(3) {
        return Err(format!("timeout: took {elapsed:?}"));
    }
    report.push(format!("timeout -> fallback 15.0 m/s, 1 failure, {:.1} s", elapsed.as_secs_f64()));
    Ok(report)
}

fn remote_failures(remote: &RemoteReasoner) -> usize {
    use dualad_core::reasoner::Reasoner;
    remote.failures()
}
