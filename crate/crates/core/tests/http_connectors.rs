use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use evalkit_core::connectors::PatternGateway;
use evalkit_core::connectors::{
    ChatMessage, CrsConnector, CrsEndpoint, CrsError, GatewayError, GatewayOptions, HttpCrs,
    HttpGateway, LlmGateway, SessionMode,
};
use evalkit_core::dialogue::{Slot, TerminationReason, UserGoal};
use evalkit_core::simulation::{run_conversation, LlmUserSimulator, RunLimits};
use serde_json::{json, Value};

#[derive(Debug, Clone)]
struct Recorded {
    headers: Vec<(String, String)>,
    body: Value,
}

impl Recorded {
    fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

struct Reply {
    status: u16,
    body: String,
    delay: Duration,
}

fn reply(status: u16, body: Value) -> Reply {
    Reply {
        status,
        body: body.to_string(),
        delay: Duration::ZERO,
    }
}

/// Serves the scripted replies in order, one per connection, and records
/// every request it reads.
fn serve(replies: Vec<Reply>) -> (String, Arc<Mutex<Vec<Recorded>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/chat", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    thread::spawn(move || {
        for r in replies {
            let Ok((stream, _)) = listener.accept() else {
                return;
            };
            handle(stream, r, &log);
        }
    });
    (url, seen)
}

fn handle(mut stream: TcpStream, r: Reply, log: &Mutex<Vec<Recorded>>) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut line = String::new();
    reader.read_line(&mut line).unwrap();
    let mut headers = Vec::new();
    loop {
        line.clear();
        reader.read_line(&mut line).unwrap();
        let trimmed = line.trim_end();
        if trimmed.is_empty() {
            break;
        }
        if let Some((k, v)) = trimmed.split_once(':') {
            headers.push((k.trim().to_string(), v.trim().to_string()));
        }
    }
    let length: usize = headers
        .iter()
        .find(|(k, _)| k.eq_ignore_ascii_case("content-length"))
        .map(|(_, v)| v.parse().unwrap())
        .unwrap_or(0);
    let mut body = vec![0; length];
    reader.read_exact(&mut body).unwrap();
    log.lock().unwrap().push(Recorded {
        headers,
        body: serde_json::from_slice(&body).unwrap_or(Value::Null),
    });
    thread::sleep(r.delay);
    let response = format!(
        "HTTP/1.1 {} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        r.status,
        r.body.len(),
        r.body
    );
    let _ = stream.write_all(response.as_bytes());
}

fn options(url: &str) -> GatewayOptions {
    let mut o = GatewayOptions::new(url, "test-model");
    o.timeout = Duration::from_secs(5);
    o
}

#[test]
fn gateway_sends_deterministic_non_streaming_requests() {
    let (url, seen) = serve(vec![reply(
        200,
        json!({"message": {"role": "assistant", "content": "hello"}}),
    )]);
    let mut opts = options(&url);
    opts.api_key = Some("secret".into());
    let gw = HttpGateway::new(opts).unwrap();
    let out = gw
        .complete(&[ChatMessage::system("be brief"), ChatMessage::user("hi")])
        .unwrap();
    assert_eq!(out, "hello");
    let req = seen.lock().unwrap()[0].clone();
    assert_eq!(req.body["temperature"], json!(0.0));
    assert_eq!(req.body["stream"], json!(false));
    assert_eq!(req.body["model"], json!("test-model"));
    assert_eq!(
        req.body["messages"][1],
        json!({"role": "user", "content": "hi"})
    );
    assert_eq!(req.header("authorization"), Some("Bearer secret"));
}

#[test]
fn gateway_retries_server_errors_but_not_client_errors() {
    let (url, seen) = serve(vec![
        reply(503, json!({"error": "busy"})),
        reply(200, json!({"choices": [{"message": {"content": "ok"}}]})),
    ]);
    let gw = HttpGateway::new(options(&url)).unwrap();
    assert_eq!(gw.complete(&[ChatMessage::user("x")]).unwrap(), "ok");
    assert_eq!(seen.lock().unwrap().len(), 2);

    let (url, seen) = serve(vec![reply(400, json!({"error": "bad"}))]);
    let gw = HttpGateway::new(options(&url)).unwrap();
    assert!(matches!(
        gw.complete(&[ChatMessage::user("x")]),
        Err(GatewayError::Status { status: 400, .. })
    ));
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn gateway_times_out() {
    let (url, _) = serve(vec![Reply {
        status: 200,
        body: json!({"response": "late"}).to_string(),
        delay: Duration::from_secs(3),
    }]);
    let mut opts = options(&url);
    opts.timeout = Duration::from_millis(200);
    opts.max_retries = 0;
    let gw = HttpGateway::new(opts).unwrap();
    assert_eq!(
        gw.complete(&[ChatMessage::user("x")]),
        Err(GatewayError::Timeout)
    );
}

#[test]
fn gateway_rejects_unreadable_bodies_and_bad_config() {
    let (url, _) = serve(vec![reply(200, json!({"unexpected": true}))]);
    let gw = HttpGateway::new(options(&url)).unwrap();
    assert!(matches!(
        gw.complete(&[ChatMessage::user("x")]),
        Err(GatewayError::Malformed(_))
    ));
    let mut opts = options(&url);
    opts.streaming = true;
    assert!(HttpGateway::new(opts).is_err());
}

#[test]
fn crs_round_trip_with_body_and_header_sessions() {
    let (url, seen) = serve(vec![
        reply(200, json!({"text": "Try Heat.", "items": ["Heat"]})),
        reply(200, json!({"text": "Bye", "end": true})),
    ]);
    let crs = HttpCrs::new(CrsEndpoint::new("remote", url.clone()));
    let r = crs.send("s-1", "hello", Duration::from_secs(5)).unwrap();
    assert_eq!(
        (r.text.as_str(), r.items.clone(), r.end),
        ("Try Heat.", vec!["Heat".to_string()], false)
    );
    assert_eq!(
        seen.lock().unwrap()[0].body,
        json!({"session_id": "s-1", "message": "hello"})
    );

    let mut endpoint = CrsEndpoint::new("remote", url);
    endpoint.session_mode = SessionMode::Header {
        name: "X-Session".into(),
    };
    let crs = HttpCrs::new(endpoint);
    assert!(crs.send("s-2", "bye", Duration::from_secs(5)).unwrap().end);
    let req = seen.lock().unwrap()[1].clone();
    assert_eq!(req.header("x-session"), Some("s-2"));
    assert_eq!(req.body, json!({"message": "bye"}));
}

#[test]
fn crs_errors_are_classified() {
    let (url, _) = serve(vec![Reply {
        status: 500,
        body: "<html>down</html>".into(),
        delay: Duration::ZERO,
    }]);
    let crs = HttpCrs::new(CrsEndpoint::new("remote", url));
    assert!(matches!(
        crs.send("s", "x", Duration::from_secs(5)),
        Err(CrsError::Status { status: 500, .. })
    ));

    let closed = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/", closed.local_addr().unwrap());
    drop(closed);
    let crs = HttpCrs::new(CrsEndpoint::new("remote", url));
    assert!(matches!(
        crs.send("s", "x", Duration::from_secs(5)),
        Err(CrsError::Transport(_))
    ));
}

#[test]
fn slow_crs_truncates_the_dialogue() {
    let (url, _) = serve(vec![
        reply(200, json!({"text": "What genre?"})),
        Reply {
            status: 200,
            body: json!({"text": "late"}).to_string(),
            delay: Duration::from_secs(3),
        },
    ]);
    let crs = HttpCrs::new(CrsEndpoint::new("remote", url));
    let gw: Arc<dyn LlmGateway> = Arc::new(PatternGateway::new(
        vec![("continue, stop or abort".into(), "continue".into())],
        Some("I'm looking for a comedy.".into()),
    ));
    let sim = LlmUserSimulator::new(gw);
    let goal = UserGoal {
        constraints: vec![Slot::new("genre", "comedy")],
        requests: vec![],
    };
    let limits = RunLimits {
        per_call_timeout: Duration::from_millis(300),
        ..RunLimits::default()
    };
    let d = run_conversation(&sim, &crs, &goal, &limits, "slow").unwrap();
    assert_eq!(
        d.termination_reason,
        Some(TerminationReason::ConnectorTimeout)
    );
    assert_eq!(d.len(), 3);
}
