//! JSONL progress events on stderr.

use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde_json::{Map, Value};

fn emit(level: &str, stage: &str, event: &str, fields: Value) {
    let ts_ms = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0);
    let mut obj = Map::new();
    obj.insert("ts_ms".into(), ts_ms.into());
    obj.insert("level".into(), level.into());
    obj.insert("stage".into(), stage.into());
    obj.insert("event".into(), event.into());
    if let Value::Object(extra) = fields {
        obj.extend(extra);
    }
    eprintln!("{}", Value::Object(obj));
}

pub struct StageLog {
    stage: &'static str,
    start: Instant,
}

impl StageLog {
    pub fn start(stage: &'static str) -> Self {
        emit("info", stage, "start", Value::Null);
        StageLog {
            stage,
            start: Instant::now(),
        }
    }

    pub fn info(&self, event: &str, fields: Value) {
        emit("info", self.stage, event, fields);
    }

    pub fn warn(&self, event: &str, fields: Value) {
        emit("warn", self.stage, event, fields);
    }

    pub fn finish(&self, counts: Value) {
        let mut fields = match counts {
            Value::Object(m) => m,
            _ => Map::new(),
        };
        fields.insert("duration_ms".into(), (self.start.elapsed().as_millis() as u64).into());
        emit("info", self.stage, "done", Value::Object(fields));
    }
}
