//! Prompt variants and their instruction templates.
//!
//! V1 asks for a label only. V2 separates the prediction and justification
//! tasks. V3 switches the company data to a structured profile block. V4
//! adds the grounding requirement and a strict output format. The canonical
//! texts live in `templates/v{1,2,3,4}.txt`; each must end with the
//! `{profile}` placeholder.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PromptError;

pub const PROFILE_PLACEHOLDER: &str = "{profile}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PromptVariant {
    V1,
    V2,
    V3,
    V4,
}

impl PromptVariant {
    pub const ALL: [PromptVariant; 4] = [
        PromptVariant::V1,
        PromptVariant::V2,
        PromptVariant::V3,
        PromptVariant::V4,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptVariant::V1 => "V1",
            PromptVariant::V2 => "V2",
            PromptVariant::V3 => "V3",
            PromptVariant::V4 => "V4",
        }
    }

    /// Prediction and justification asked for as separate tasks.
    pub fn separates_tasks(self) -> bool {
        self >= PromptVariant::V2
    }

    /// Company data rendered as the structured profile block.
    pub fn structured_profile(self) -> bool {
        self >= PromptVariant::V3
    }

    /// Justification must cite observable fields; output format is fixed.
    pub fn grounded(self) -> bool {
        self >= PromptVariant::V4
    }
}

impl fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptVariant {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "V1" | "1" => Ok(PromptVariant::V1),
            "V2" | "2" => Ok(PromptVariant::V2),
            "V3" | "3" => Ok(PromptVariant::V3),
            "V4" | "4" => Ok(PromptVariant::V4),
            _ => Err(PromptError::UnknownVariant(s.to_string())),
        }
    }
}

/// Instruction templates for all four variants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    texts: [String; 4],
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            texts: [
                include_str!("../../templates/v1.txt").to_string(),
                include_str!("../../templates/v2.txt").to_string(),
                include_str!("../../templates/v3.txt").to_string(),
                include_str!("../../templates/v4.txt").to_string(),
            ],
        }
        .checked()
        .expect("bundled templates are well-formed")
    }
}

impl PromptTemplates {
    pub fn new(texts: [String; 4]) -> Result<Self, PromptError> {
        PromptTemplates { texts }.checked()
    }

    /// Loads `v1.txt`..`v4.txt` from `dir`; missing files fall back to the
    /// bundled text.
    pub fn from_dir(dir: &Path) -> Result<Self, PromptError> {
        let mut t = Self::default();
        for (i, v) in PromptVariant::ALL.iter().enumerate() {
            let path = dir.join(format!("{}.txt", v.as_str().to_lowercase()));
            if path.exists() {
                t.texts[i] = std::fs::read_to_string(&path)
                    .map_err(|e| PromptError::Template(format!("{}: {e}", path.display())))?;
            }
        }
        t.checked()
    }

    fn checked(self) -> Result<Self, PromptError> {
        for (v, text) in PromptVariant::ALL.iter().zip(&self.texts) {
            if text.matches(PROFILE_PLACEHOLDER).count() != 1
                || !text.trim_end().ends_with(PROFILE_PLACEHOLDER)
            {
                return Err(PromptError::Template(format!(
                    "{v} template must end with a single {PROFILE_PLACEHOLDER} placeholder"
                )));
            }
            if super::chat::contains_marker(text) {
                return Err(PromptError::Template(format!("{v} template contains a chat marker")));
            }
        }
        Ok(self)
    }

    pub fn text(&self, variant: PromptVariant) -> &str {
        &self.texts[variant as usize]
    }

    /// Instruction part of a variant: everything before the placeholder.
    pub fn instruction(&self, variant: PromptVariant) -> &str {
        let t = self.text(variant);
        &t[..t.find(PROFILE_PLACEHOLDER).expect("checked")]
    }

    pub fn fill(&self, variant: PromptVariant, profile: &str) -> String {
        format!("{}{}", self.instruction(variant), profile)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_parsing() {
        assert_eq!("v4".parse::<PromptVariant>().unwrap(), PromptVariant::V4);
        assert_eq!("2".parse::<PromptVariant>().unwrap(), PromptVariant::V2);
        assert!(matches!("V5".parse::<PromptVariant>(), Err(PromptError::UnknownVariant(_))));
    }

    #[test]
    fn feature_flags_nest() {
        use PromptVariant::*;
        assert!(!V1.separates_tasks() && V2.separates_tasks());
        assert!(!V2.structured_profile() && V3.structured_profile());
        assert!(!V3.grounded() && V4.grounded());
        for v in PromptVariant::ALL {
            assert!(!v.grounded() || v.structured_profile());
            assert!(!v.structured_profile() || v.separates_tasks());
        }
    }

    #[test]
    fn bundled_templates_nest_textually() {
        let t = PromptTemplates::default();
        let v2 = t.instruction(PromptVariant::V2);
        let two_task = v2
            .lines()
            .filter(|l| l.starts_with("Task "))
            .collect::<Vec<_>>()
            .join("\n");
        assert!(two_task.contains("Task 1:") && two_task.contains("Task 2:"));
        for v in [PromptVariant::V3, PromptVariant::V4] {
            assert!(t.instruction(v).contains(&two_task), "{v}");
        }
        assert!(!t.instruction(PromptVariant::V1).contains("Task 2:"));
        assert!(t.instruction(PromptVariant::V4).contains("Prediction:"));
    }

    #[test]
    fn malformed_templates_are_rejected() {
        let good = PromptTemplates::default().texts;
        let mut bad = good.clone();
        bad[0] = "no placeholder".into();
        assert!(PromptTemplates::new(bad).is_err());
        let mut bad = good.clone();
        bad[1] = "{profile} then more".into();
        assert!(PromptTemplates::new(bad).is_err());
        let mut bad = good;
        bad[2] = "<|im_end|> {profile}".into();
        assert!(PromptTemplates::new(bad).is_err());
    }
}
