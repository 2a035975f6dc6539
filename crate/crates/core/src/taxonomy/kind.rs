use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// A characteristic family. Declaration order is the canonical block order
/// used when fused features are concatenated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CharacteristicKind {
    FigurativeMain,
    FigurativeSub,
    Color,
    Shape,
    Text,
    Sector,
    /// Unlabeled appearance block; owns no label space.
    Generic,
}

impl CharacteristicKind {
    pub const ALL: [CharacteristicKind; 7] = [
        Self::FigurativeMain,
        Self::FigurativeSub,
        Self::Color,
        Self::Shape,
        Self::Text,
        Self::Sector,
        Self::Generic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::FigurativeMain => "figurative_main",
            Self::FigurativeSub => "figurative_sub",
            Self::Color => "color",
            Self::Shape => "shape",
            Self::Text => "text",
            Self::Sector => "sector",
            Self::Generic => "generic",
        }
    }

    /// Byte tag used by the `NCF1` embedding store header.
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn is_labeled(self) -> bool {
        self != Self::Generic
    }
}

impl fmt::Display for CharacteristicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CharacteristicKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let kind = match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "figurative_main" | "main" | "main_category" | "category" => Self::FigurativeMain,
            "figurative_sub" | "sub" | "subcategory" => Self::FigurativeSub,
            "color" | "colour" => Self::Color,
            "shape" => Self::Shape,
            "text" => Self::Text,
            "sector" => Self::Sector,
            "generic" | "autoencoder" => Self::Generic,
            _ => return Err(Error::UnknownKind(s.to_string())),
        };
        Ok(kind)
    }
}
