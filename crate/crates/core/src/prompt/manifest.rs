//! Fine-tuning configuration manifest. The pipeline does not train; the
//! manifest records the schedule an external trainer should use.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::PromptError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraConfig {
    pub rank: u32,
    pub alpha: u32,
    pub dropout: f64,
    /// Adapter target modules per model family.
    pub target_modules: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingManifest {
    pub epochs: u32,
    pub optimizer: String,
    pub lr_scheduler: String,
    pub learning_rate: f64,
    pub warmup_steps: u32,
    pub weight_decay: f64,
    pub per_device_batch_size: u32,
    pub gradient_accumulation_steps: u32,
    pub precision: String,
    pub quantization: String,
    pub max_length: u32,
    pub chat_delimiters: [String; 2],
    pub padding_token: String,
    pub lora: LoraConfig,
    pub rank_sweep: Vec<u32>,
}

impl Default for TrainingManifest {
    fn default() -> Self {
        let modules = |m: &[&str]| m.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let target_modules = BTreeMap::from([
            ("qwen".to_string(), modules(&["q_proj", "v_proj"])),
            ("llama".to_string(), modules(&["q_proj", "v_proj"])),
            ("gpt2".to_string(), modules(&["c_attn"])),
        ]);
        TrainingManifest {
            epochs: 5,
            optimizer: "adamw".into(),
            lr_scheduler: "cosine".into(),
            learning_rate: 5e-4,
            warmup_steps: 20,
            weight_decay: 0.01,
            per_device_batch_size: 1,
            gradient_accumulation_steps: 2,
            precision: "bf16".into(),
            quantization: "nf4-4bit".into(),
            max_length: 256,
            chat_delimiters: [super::chat::IM_START.into(), super::chat::IM_END.into()],
            padding_token: "eos".into(),
            lora: LoraConfig {
                rank: 16,
                alpha: 16,
                dropout: 0.1,
                target_modules,
            },
            rank_sweep: vec![8, 16, 32, 64, 128],
        }
    }
}

impl TrainingManifest {
    pub fn effective_batch_size(&self) -> u32 {
        self.per_device_batch_size * self.gradient_accumulation_steps
    }
}

fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), PromptError> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| PromptError::Manifest(format!("`{path}` descends into a non-object")))?;
        if i + 1 == parts.len() {
            if !obj.contains_key(*part) {
                return Err(PromptError::Manifest(format!("unknown manifest key `{path}`")));
            }
            obj.insert((*part).to_string(), value);
            return Ok(());
        }
        cur = obj
            .get_mut(*part)
            .ok_or_else(|| PromptError::Manifest(format!("unknown manifest key `{path}`")))?;
    }
    Ok(())
}

/// Builds the manifest with `key=value` overrides applied (dotted keys reach
/// nested fields, values parse as JSON and fall back to strings), and
/// renders it as pretty JSON.
pub fn emit_training_manifest(overrides: &[(String, String)]) -> Result<String, PromptError> {
    let mut value = serde_json::to_value(TrainingManifest::default()).expect("manifest serializes");
    for (k, v) in overrides {
        let parsed = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.clone()));
        set_path(&mut value, k, parsed)?;
    }
    let manifest: TrainingManifest = serde_json::from_value(value)
        .map_err(|e| PromptError::Manifest(format!("override produced an invalid manifest: {e}")))?;
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    Ok(text)
}
