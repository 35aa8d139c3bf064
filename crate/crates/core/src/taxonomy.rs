//! Fixed object taxonomy (48 categories in 17 semantic groups) and the
//! structural defect vocabulary.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefectType {
    Crack,
    Scratch,
    Concavity,
    Bulge,
    Broken,
    Hole,
    None,
}

impl DefectType {
    /// The six structural anomaly types, in canonical order.
    pub const STRUCTURAL: [DefectType; 6] = [
        DefectType::Crack,
        DefectType::Scratch,
        DefectType::Concavity,
        DefectType::Bulge,
        DefectType::Broken,
        DefectType::Hole,
    ];

    /// All seven answers of the defect-classification question.
    pub const ALL: [DefectType; 7] = [
        DefectType::Crack,
        DefectType::Scratch,
        DefectType::Concavity,
        DefectType::Bulge,
        DefectType::Broken,
        DefectType::Hole,
        DefectType::None,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            DefectType::Crack => "crack",
            DefectType::Scratch => "scratch",
            DefectType::Concavity => "concavity",
            DefectType::Bulge => "bulge",
            DefectType::Broken => "broken",
            DefectType::Hole => "hole",
            DefectType::None => "none",
        }
    }

    /// Option text shown in the defect-classification question.
    pub fn option_label(&self) -> &'static str {
        match self {
            DefectType::None => "no defect",
            other => other.as_str(),
        }
    }
}

impl fmt::Display for DefectType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DefectType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DefectType::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| Error::Taxonomy(format!("unknown defect type `{s}`")))
    }
}

/// One semantic group with its fine-grained categories and the published
/// standard-protocol clip counts.
#[derive(Debug, Clone, Copy)]
pub struct SemanticGroup {
    pub name: &'static str,
    pub categories: &'static [&'static str],
    pub train_clips: usize,
    pub test_clips: usize,
}

impl SemanticGroup {
    pub fn total_clips(&self) -> usize {
        self.train_clips + self.test_clips
    }
}

pub const GROUPS: [SemanticGroup; 17] = [
    SemanticGroup {
        name: "ashtray",
        categories: &["ashtray0"],
        train_clips: 54,
        test_clips: 18,
    },
    SemanticGroup {
        name: "bottle",
        categories: &["bottle0", "bottle1", "bottle3"],
        train_clips: 183,
        test_clips: 69,
    },
    SemanticGroup {
        name: "bowl",
        categories: &["bowl0", "bowl1", "bowl2", "bowl3", "bowl4", "bowl5"],
        train_clips: 378,
        test_clips: 129,
    },
    SemanticGroup {
        name: "bucket",
        categories: &["bucket0", "bucket1"],
        train_clips: 132,
        test_clips: 54,
    },
    SemanticGroup {
        name: "cabinet",
        categories: &["cabinet0"],
        train_clips: 75,
        test_clips: 15,
    },
    SemanticGroup {
        name: "cap",
        categories: &["cap0", "cap1", "cap2", "cap3", "cap4", "cap5"],
        train_clips: 360,
        test_clips: 144,
    },
    SemanticGroup {
        name: "chair",
        categories: &["chair0"],
        train_clips: 66,
        test_clips: 24,
    },
    SemanticGroup {
        name: "cup",
        categories: &["cup0", "cup1", "cup2"],
        train_clips: 162,
        test_clips: 54,
    },
    SemanticGroup {
        name: "desk",
        categories: &["desk0"],
        train_clips: 63,
        test_clips: 21,
    },
    SemanticGroup {
        name: "eraser",
        categories: &["eraser0"],
        train_clips: 54,
        test_clips: 18,
    },
    SemanticGroup {
        name: "headset",
        categories: &["headset0", "headset1"],
        train_clips: 108,
        test_clips: 36,
    },
    SemanticGroup {
        name: "helmet",
        categories: &["helmet0", "helmet1", "helmet2", "helmet3"],
        train_clips: 252,
        test_clips: 108,
    },
    SemanticGroup {
        name: "jar",
        categories: &["jar0"],
        train_clips: 54,
        test_clips: 18,
    },
    SemanticGroup {
        name: "microphone",
        categories: &["microphone0", "microphone1"],
        train_clips: 111,
        test_clips: 39,
    },
    SemanticGroup {
        name: "shelf",
        categories: &["shelf0"],
        train_clips: 66,
        test_clips: 30,
    },
    SemanticGroup {
        name: "tap",
        categories: &["tap0", "tap1"],
        train_clips: 126,
        test_clips: 54,
    },
    SemanticGroup {
        name: "vase",
        categories: &[
            "vase0", "vase1", "vase2", "vase3", "vase4", "vase5", "vase6", "vase7", "vase8",
            "vase9", "vase10",
        ],
        train_clips: 669,
        test_clips: 270,
    },
];

pub fn group_of(category: &str) -> Option<&'static SemanticGroup> {
    GROUPS.iter().find(|g| g.categories.contains(&category))
}

pub fn group_by_name(name: &str) -> Option<&'static SemanticGroup> {
    GROUPS.iter().find(|g| g.name == name)
}

pub fn all_categories() -> impl Iterator<Item = &'static str> {
    GROUPS.iter().flat_map(|g| g.categories.iter().copied())
}

pub fn is_category(name: &str) -> bool {
    group_of(name).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taxonomy_shape() {
        assert_eq!(GROUPS.len(), 17);
        assert_eq!(all_categories().count(), 48);
        let train: usize = GROUPS.iter().map(|g| g.train_clips).sum();
        let test: usize = GROUPS.iter().map(|g| g.test_clips).sum();
        assert_eq!((train, test, train + test), (2913, 1101, 4014));
    }

    #[test]
    fn category_lookup() {
        assert_eq!(group_of("vase10").unwrap().name, "vase");
        assert_eq!(group_of("bottle1").unwrap().name, "bottle");
        assert!(group_of("bottle2").is_none());
    }

    #[test]
    fn defect_parse() {
        assert_eq!("hole".parse::<DefectType>().unwrap(), DefectType::Hole);
        assert!("dent".parse::<DefectType>().is_err());
    }
}
