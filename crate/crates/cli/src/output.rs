//! JSON output envelope: command name, echoed config, result, optional
//! timestamp. Field order is fixed by construction so identical runs emit
//! identical bytes.

use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Serialize)]
pub struct Envelope {
    pub command: &'static str,
    /// The fully resolved configuration (defaults filled in), echoed for
    /// provenance.
    pub config: Value,
    pub result: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

impl Envelope {
    pub fn new(command: &'static str, config: Value, result: Value) -> Self {
        Self { command, config, result, timestamp: None }
    }

    /// Renders to a JSON line, stamping the current Unix time unless
    /// suppressed.
    pub fn render(mut self, with_timestamp: bool) -> String {
        if with_timestamp {
            self.timestamp = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .ok();
        }
        serde_json::to_string(&self).expect("envelope serialization cannot fail")
    }
}
