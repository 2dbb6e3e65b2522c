use std::collections::VecDeque;
use std::path::Path;
use std::sync::Mutex;

use super::{estimate_tokens, read_json_file, ChatRequest, ChatResponse, ChatTransport, LlmError, UsageTotals};

/// Replays a fixed list of responses in order. Usage is synthesized from
/// the request and response sizes.
pub struct ScriptedTransport {
    queue: Mutex<VecDeque<String>>,
}

impl ScriptedTransport {
    pub fn new(responses: Vec<String>) -> Self {
        ScriptedTransport { queue: Mutex::new(responses.into()) }
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().unwrap().len()
    }
}

impl ChatTransport for ScriptedTransport {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let content = self.queue.lock().unwrap().pop_front().ok_or(LlmError::ScriptExhausted)?;
        let usage = UsageTotals::new(req.estimated_tokens(), estimate_tokens(&content));
        Ok(ChatResponse { content, usage, model: req.model.clone(), finish_reason: "stop".into() })
    }
}

/// Reads a script file: a JSON array of response strings.
pub fn load_script(path: &Path) -> Result<Vec<String>, LlmError> {
    let value = read_json_file(path)?;
    serde_json::from_value(value)
        .map_err(|e| LlmError::InvalidConfig(format!("{}: script must be an array of strings: {e}", path.display())))
}
