use std::io::Write;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

/// JSON-lines event log shared by the round participants.
#[derive(Clone, Default)]
pub struct RunLog {
    sink: Option<Arc<Mutex<Box<dyn Write + Send>>>>,
}

#[derive(Serialize)]
struct Event<'a> {
    event: &'a str,
    timestamp: f64,
    client_id: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    detail: Option<&'a str>,
}

impl RunLog {
    pub fn disabled() -> Self {
        RunLog { sink: None }
    }

    pub fn new(sink: impl Write + Send + 'static) -> Self {
        RunLog {
            sink: Some(Arc::new(Mutex::new(Box::new(sink)))),
        }
    }

    pub fn record(&self, event: &str, client_id: Option<u32>, detail: Option<&str>) {
        log::debug!("{event} client={client_id:?} {}", detail.unwrap_or(""));
        let Some(sink) = &self.sink else { return };
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0);
        let line = Event {
            event,
            timestamp,
            client_id,
            detail,
        };
        if let Ok(mut w) = sink.lock() {
            // Logging is best effort; a failed write never fails the round.
            if let Ok(json) = serde_json::to_string(&line) {
                let _ = writeln!(w, "{json}");
                let _ = w.flush();
            }
        }
    }
}

impl std::fmt::Debug for RunLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RunLog").field("enabled", &self.sink.is_some()).finish()
    }
}
