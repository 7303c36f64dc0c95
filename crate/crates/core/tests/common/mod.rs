#![allow(dead_code)]

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::thread::JoinHandle;

use exitlens::features::{AgeSource, CompanyProfile};
use exitlens::prompt::{
    compile_records, serialize_chat, PromptSettings, PromptVariant, RenderMode, SftRecord,
};
use exitlens::synth::{synthesize, SynthConfig};
use exitlens::tokens::DefaultCounter;
use serde_json::Value;

/// Local chat-completions stand-in. Each worker thread serves one request
/// at a time, so `threads` bounds the server-side parallelism.
pub struct MockServer {
    pub base_url: String,
    server: Arc<tiny_http::Server>,
    workers: Vec<JoinHandle<()>>,
}

pub type Handler = dyn Fn(&Value) -> (u16, String) + Send + Sync;

impl MockServer {
    pub fn start(threads: usize, handler: Arc<Handler>) -> Self {
        let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").expect("bind mock"));
        let port = server.server_addr().to_ip().expect("ip listener").port();
        let workers = (0..threads)
            .map(|_| {
                let server = Arc::clone(&server);
                let handler = Arc::clone(&handler);
                std::thread::spawn(move || {
                    while let Ok(mut req) = server.recv() {
                        let mut body = String::new();
                        let _ = req.as_reader().read_to_string(&mut body);
                        let json: Value = serde_json::from_str(&body).unwrap_or(Value::Null);
                        let (status, text) = handler(&json);
                        let resp = tiny_http::Response::from_string(text)
                            .with_status_code(status)
                            .with_header(
                                "Content-Type: application/json"
                                    .parse::<tiny_http::Header>()
                                    .unwrap(),
                            );
                        let _ = req.respond(resp);
                    }
                })
            })
            .collect();
        MockServer {
            base_url: format!("http://127.0.0.1:{port}/v1"),
            server,
            workers,
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        for _ in &self.workers {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

pub fn completion_body(text: &str) -> String {
    serde_json::json!({
        "id": "mock",
        "object": "chat.completion",
        "choices": [{"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": "stop"}]
    })
    .to_string()
}

pub fn answer(label: u8) -> String {
    let word = if label == 1 { "Successful" } else { "Unsuccessful" };
    format!("Prediction: {word}\nJustification: The profile points this way.")
}

/// Content of the last user turn of a request body.
pub fn last_user_content(body: &Value) -> String {
    body["messages"]
        .as_array()
        .and_then(|m| m.iter().rev().find(|m| m["role"] == "user"))
        .and_then(|m| m["content"].as_str())
        .unwrap_or_default()
        .to_string()
}

/// Answers every known prompt with its true label.
pub fn oracle_handler(records: &[SftRecord]) -> Arc<Handler> {
    let truth: HashMap<String, u8> = records
        .iter()
        .map(|r| {
            let user = r
                .chat
                .messages
                .iter()
                .rev()
                .find(|m| m.role == exitlens::prompt::Role::User)
                .expect("user turn");
            (user.content.clone(), r.target_label)
        })
        .collect();
    Arc::new(move |body: &Value| match truth.get(&last_user_content(body)) {
        Some(&l) => (200, completion_body(&answer(l))),
        None => (200, completion_body("no idea")),
    })
}

pub fn fixture_profile() -> CompanyProfile {
    CompanyProfile {
        org_id: "org-fixture".into(),
        name: "Northwind Analytics".into(),
        description: "Northwind Analytics builds forecasting software for regional grocers. \
                      The founders previously sold a logistics startup and were Acquired by a larger rival, \
                      and the board has discussed a future IPO. Its acquisition pipeline of small data vendors \
                      continues, with customers across twelve states and a growing partner network \
                      that resells the platform to wholesalers and independent stores. The product combines \
                      point-of-sale history, weather feeds and promotional calendars to predict demand for \
                      perishable goods, and store managers use its daily order suggestions to cut waste while \
                      keeping shelves full during holidays, heat waves and local events across the season."
            .into(),
        age_years: 6.4271,
        age_source: AgeSource::FoundedOn,
        total_raised_usd: 18_250_000.0,
        raised_imputed: false,
        num_funding_rounds: 3,
        num_investors: 7,
        num_acquisitions_made: 2,
        num_executives: 4,
        had_ipo: 0,
        was_acquired: 1,
        success: 1,
    }
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

pub fn golden_path(v: PromptVariant) -> PathBuf {
    golden_dir().join(format!("{}.txt", v.as_str().to_ascii_lowercase()))
}

/// Serialized SFT rendering of the fixture profile under default settings.
pub fn render_fixture(v: PromptVariant) -> String {
    let settings = PromptSettings {
        variant: v,
        ..PromptSettings::default()
    };
    let rec = compile_records(&[fixture_profile()], &settings, &DefaultCounter)
        .expect("fixture compiles")
        .remove(0);
    serialize_chat(&rec.chat.messages).expect("fixture serializes")
}

/// Profiles from a synthetic corpus, derived through the normal pipeline.
pub fn synthetic_profiles(cfg: &SynthConfig) -> Vec<CompanyProfile> {
    let corpus = synthesize(cfg).expect("synthesize");
    let store = exitlens::ingest::CompanyStore::build(corpus.tables);
    exitlens::features::derive_all(
        &store,
        cfg.reference_date,
        &exitlens::features::ExecutiveTitles::default(),
    )
}

pub fn inference_records(profiles: &[CompanyProfile]) -> Vec<SftRecord> {
    let settings = PromptSettings {
        mode: RenderMode::Inference,
        ..PromptSettings::default()
    };
    compile_records(profiles, &settings, &DefaultCounter).expect("compile")
}

pub fn exe() -> &'static str {
    env!("CARGO_BIN_EXE_exitlens")
}

/// Runs the CLI inside `dir` and returns (exit code, stdout, stderr).
pub fn run_cli(dir: &Path, args: &[&str]) -> (i32, String, String) {
    let out = std::process::Command::new(exe())
        .args(args)
        .current_dir(dir)
        .env_remove("OPENAI_API_KEY")
        .output()
        .expect("spawn exitlens");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}
