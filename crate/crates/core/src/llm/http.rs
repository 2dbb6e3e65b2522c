use std::time::Duration;

use serde_json::{json, Value};

use super::{estimate_tokens, ChatRequest, ChatResponse, ChatTransport, LlmError, UsageTotals};

/// OpenAI-style `/v1/chat/completions` client. Covers hosted APIs and
/// local servers such as Ollama on port 11434.
pub struct HttpTransport {
    url: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    retry_backoff: Duration,
}

fn endpoint(base: &str) -> String {
    let base = base.trim_end_matches('/');
    if base.ends_with("/chat/completions") {
        base.to_string()
    } else if base.ends_with("/v1") {
        format!("{base}/chat/completions")
    } else {
        format!("{base}/v1/chat/completions")
    }
}

impl HttpTransport {
    pub fn new(base_url: &str, api_key: Option<String>, timeout: Duration) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(HttpTransport { url: endpoint(base_url), api_key, client, retry_backoff: Duration::from_secs(2) })
    }

    pub fn with_retry_backoff(mut self, d: Duration) -> Self {
        self.retry_backoff = d;
        self
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn attempt(&self, body: &Value) -> Result<Value, LlmError> {
        let mut rb = self.client.post(&self.url).json(body);
        if let Some(key) = &self.api_key {
            rb = rb.bearer_auth(key);
        }
        let resp = rb.send().map_err(|e| {
            if e.is_timeout() {
                LlmError::Timeout
            } else {
                LlmError::Transport(e.to_string())
            }
        })?;
        let status = resp.status();
        let text = resp.text().map_err(|e| if e.is_timeout() { LlmError::Timeout } else { LlmError::Transport(e.to_string()) })?;
        if !status.is_success() {
            let body: String = text.chars().take(300).collect();
            return Err(LlmError::HttpStatus { code: status.as_u16(), body });
        }
        serde_json::from_str(&text).map_err(|e| LlmError::MalformedResponse(e.to_string()))
    }
}

fn retryable(e: &LlmError) -> bool {
    match e {
        LlmError::Timeout => true,
        LlmError::HttpStatus { code, .. } => *code >= 500,
        _ => false,
    }
}

fn parse_completion(v: &Value, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
    let choice = v
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| LlmError::MalformedResponse("no choices[0]".into()))?;
    let content = choice
        .pointer("/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| LlmError::MalformedResponse("no choices[0].message.content".into()))?
        .to_string();
    let usage = match v.get("usage") {
        Some(u) => {
            let field = |k: &str| {
                u.get(k)
                    .and_then(Value::as_u64)
                    .ok_or_else(|| LlmError::MalformedResponse(format!("usage.{k} missing")))
            };
            UsageTotals::new(field("prompt_tokens")?, field("completion_tokens")?)
        }
        None => UsageTotals::new(req.estimated_tokens(), estimate_tokens(&content)),
    };
    Ok(ChatResponse {
        content,
        usage,
        model: v.get("model").and_then(Value::as_str).unwrap_or(&req.model).to_string(),
        finish_reason: choice.get("finish_reason").and_then(Value::as_str).unwrap_or("stop").to_string(),
    })
}

impl ChatTransport for HttpTransport {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let mut body = json!({
            "model": req.model,
            "messages": req.messages,
            "temperature": req.temperature,
        });
        if let Some(n) = req.max_output_tokens {
            body["max_tokens"] = json!(n);
        }
        let value = match self.attempt(&body) {
            Err(e) if retryable(&e) => {
                std::thread::sleep(self.retry_backoff);
                self.attempt(&body)?
            }
            other => other?,
        };
        parse_completion(&value, req)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::Message;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::{Arc, Mutex};

    /// Serves the given (status, body) pairs in order, recording request bodies.
    fn stub(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<String>>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let seen = Arc::new(Mutex::new(Vec::new()));
        let log = seen.clone();
        std::thread::spawn(move || {
            for (status, body) in replies {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream);
                let mut len = 0usize;
                let mut head = String::new();
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    head.push_str(&line);
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                log.lock().unwrap().push(format!("{head}{}", String::from_utf8_lossy(&buf)));
                let mut stream = reader.into_inner();
                let resp = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(resp.as_bytes()).unwrap();
            }
        });
        (format!("http://{addr}"), seen)
    }

    const OK: &str = r#"{"model":"m","choices":[{"message":{"role":"assistant","content":"hello"},"finish_reason":"stop"}],"usage":{"prompt_tokens":100,"completion_tokens":50}}"#;

    fn req() -> ChatRequest {
        ChatRequest::new("m", vec![Message::system("s"), Message::user("u")])
    }

    #[test]
    fn usage_passthrough_and_wire_format() {
        let (base, seen) = stub(vec![(200, OK.into())]);
        let t = HttpTransport::new(&base, Some("k123".into()), Duration::from_secs(5)).unwrap();
        let r = t.complete(&req()).unwrap();
        assert_eq!(r.content, "hello");
        assert_eq!(r.usage, UsageTotals::new(100, 50));
        let raw = seen.lock().unwrap()[0].clone();
        assert!(raw.starts_with("POST /v1/chat/completions"), "{raw}");
        assert!(raw.to_ascii_lowercase().contains("authorization: bearer k123"));
        let body: Value = serde_json::from_str(raw.split("\r\n\r\n").nth(1).unwrap()).unwrap();
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["temperature"], 0.0);
    }

    #[test]
    fn retries_once_on_5xx() {
        let (base, seen) = stub(vec![(503, "busy".into()), (200, OK.into())]);
        let t = HttpTransport::new(&base, None, Duration::from_secs(5)).unwrap().with_retry_backoff(Duration::ZERO);
        assert_eq!(t.complete(&req()).unwrap().content, "hello");
        let seen = seen.lock().unwrap();
        assert_eq!(seen.len(), 2);
        assert!(!seen[0].to_ascii_lowercase().contains("authorization"));
    }

    #[test]
    fn no_retry_on_4xx() {
        let (base, seen) = stub(vec![(401, "nope".into()), (200, OK.into())]);
        let t = HttpTransport::new(&base, None, Duration::from_secs(5)).unwrap().with_retry_backoff(Duration::ZERO);
        assert!(matches!(t.complete(&req()), Err(LlmError::HttpStatus { code: 401, .. })));
        assert_eq!(seen.lock().unwrap().len(), 1);
    }

    #[test]
    fn malformed_body() {
        let (base, _) = stub(vec![(200, r#"{"choices":[]}"#.into())]);
        let t = HttpTransport::new(&base, None, Duration::from_secs(5)).unwrap();
        assert!(matches!(t.complete(&req()), Err(LlmError::MalformedResponse(_))));
    }

    #[test]
    fn endpoint_joining() {
        assert_eq!(endpoint("http://localhost:11434"), "http://localhost:11434/v1/chat/completions");
        assert_eq!(endpoint("https://api.x.com/v1/"), "https://api.x.com/v1/chat/completions");
    }
}
