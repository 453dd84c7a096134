//! The two label spaces: Maslow motivations and Plutchik emotions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown {space} label {value:?}")]
pub struct UnknownLabel {
    pub space: &'static str,
    pub value: String,
}

/// Maslow's hierarchy of needs, in hierarchy order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotivationLabel {
    Physiological,
    Stability,
    Love,
    Esteem,
    SpiritualGrowth,
}

impl MotivationLabel {
    pub const ALL: [MotivationLabel; 5] = [
        MotivationLabel::Physiological,
        MotivationLabel::Stability,
        MotivationLabel::Love,
        MotivationLabel::Esteem,
        MotivationLabel::SpiritualGrowth,
    ];

    pub fn id(self) -> &'static str {
        match self {
            MotivationLabel::Physiological => "physiological",
            MotivationLabel::Stability => "stability",
            MotivationLabel::Love => "love",
            MotivationLabel::Esteem => "esteem",
            MotivationLabel::SpiritualGrowth => "spiritual_growth",
        }
    }

    /// Name used inside prompt templates.
    pub fn display_name(self) -> &'static str {
        match self {
            MotivationLabel::Physiological => "physiological",
            MotivationLabel::Stability => "stability",
            MotivationLabel::Love => "love",
            MotivationLabel::Esteem => "esteem",
            MotivationLabel::SpiritualGrowth => "spiritual growth",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Resolves canonical ids, display names and the known aliases.
    pub fn parse(raw: &str) -> Result<Self, UnknownLabel> {
        let norm = normalize(raw);
        let label = match norm.as_str() {
            "physiological" | "physiological needs" | "physiological need" => {
                MotivationLabel::Physiological
            }
            "stability" | "safety" => MotivationLabel::Stability,
            "love" | "love and belonging" | "love/belonging" | "belonging" => MotivationLabel::Love,
            "esteem" => MotivationLabel::Esteem,
            "spiritual growth" | "spiritual_growth" | "spirit growth" | "self-actualization"
            | "self actualization" => MotivationLabel::SpiritualGrowth,
            _ => {
                return Err(UnknownLabel {
                    space: "motivation",
                    value: raw.to_string(),
                })
            }
        };
        Ok(label)
    }
}

/// Plutchik's eight basic emotions, in wheel order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmotionLabel {
    Joy,
    Trust,
    Sadness,
    Surprise,
    Fear,
    Disgust,
    Anger,
    Anticipation,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; 8] = [
        EmotionLabel::Joy,
        EmotionLabel::Trust,
        EmotionLabel::Sadness,
        EmotionLabel::Surprise,
        EmotionLabel::Fear,
        EmotionLabel::Disgust,
        EmotionLabel::Anger,
        EmotionLabel::Anticipation,
    ];

    pub fn id(self) -> &'static str {
        match self {
            EmotionLabel::Joy => "joy",
            EmotionLabel::Trust => "trust",
            EmotionLabel::Sadness => "sadness",
            EmotionLabel::Surprise => "surprise",
            EmotionLabel::Fear => "fear",
            EmotionLabel::Disgust => "disgust",
            EmotionLabel::Anger => "anger",
            EmotionLabel::Anticipation => "anticipation",
        }
    }

    pub fn display_name(self) -> &'static str {
        self.id()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn parse(raw: &str) -> Result<Self, UnknownLabel> {
        let norm = normalize(raw);
        EmotionLabel::ALL
            .into_iter()
            .find(|l| l.id() == norm)
            .ok_or_else(|| UnknownLabel {
                space: "emotion",
                value: raw.to_string(),
            })
    }
}

fn normalize(raw: &str) -> String {
    raw.trim().to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

impl fmt::Display for MotivationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for MotivationLabel {
    type Err = UnknownLabel;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl FromStr for EmotionLabel {
    type Err = UnknownLabel;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

/// Which label space a knowledge base or classifier works over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSpace {
    Motivation,
    Emotion,
}

impl LabelSpace {
    pub fn len(self) -> usize {
        match self {
            LabelSpace::Motivation => MotivationLabel::ALL.len(),
            LabelSpace::Emotion => EmotionLabel::ALL.len(),
        }
    }

    pub fn is_empty(self) -> bool {
        false
    }

    pub fn ids(self) -> Vec<&'static str> {
        match self {
            LabelSpace::Motivation => MotivationLabel::ALL.iter().map(|l| l.id()).collect(),
            LabelSpace::Emotion => EmotionLabel::ALL.iter().map(|l| l.id()).collect(),
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            LabelSpace::Motivation => "motivation",
            LabelSpace::Emotion => "emotion",
        }
    }

    /// Canonical id of the label at `index`.
    pub fn id_at(self, index: usize) -> &'static str {
        match self {
            LabelSpace::Motivation => MotivationLabel::ALL[index].id(),
            LabelSpace::Emotion => EmotionLabel::ALL[index].id(),
        }
    }

    /// Index of a canonical id (or alias) inside this space.
    pub fn index_of(self, raw: &str) -> Result<usize, UnknownLabel> {
        match self {
            LabelSpace::Motivation => MotivationLabel::parse(raw).map(|l| l.index()),
            LabelSpace::Emotion => EmotionLabel::parse(raw).map(|l| l.index()),
        }
    }
}

impl FromStr for LabelSpace {
    type Err = UnknownLabel;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match normalize(s).as_str() {
            "motivation" | "mu" => Ok(LabelSpace::Motivation),
            "emotion" | "eu" => Ok(LabelSpace::Emotion),
            _ => Err(UnknownLabel {
                space: "task",
                value: s.to_string(),
            }),
        }
    }
}

/// The three tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Emotion understanding: predict E from (H, A, C, M).
    Eu,
    /// Motivation understanding: predict M from (H, A, C, E).
    Mu,
    /// Conditioned action generation.
    Cag,
}

impl Task {
    pub fn id(self) -> &'static str {
        match self {
            Task::Eu => "eu",
            Task::Mu => "mu",
            Task::Cag => "cag",
        }
    }

    /// Label space predicted by an understanding task.
    pub fn target_space(self) -> Option<LabelSpace> {
        match self {
            Task::Eu => Some(LabelSpace::Emotion),
            Task::Mu => Some(LabelSpace::Motivation),
            Task::Cag => None,
        }
    }
}

impl FromStr for Task {
    type Err = UnknownLabel;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match normalize(s).as_str() {
            "eu" => Ok(Task::Eu),
            "mu" => Ok(Task::Mu),
            "cag" => Ok(Task::Cag),
            _ => Err(UnknownLabel {
                space: "task",
                value: s.to_string(),
            }),
        }
    }
}
