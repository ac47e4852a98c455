//! The three-level label hierarchy: fine class → category → benign/attack.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BENIGN: &str = "BENIGN";

/// Depth in the cascade. `Root` separates benign from attack traffic,
/// `Category` splits attacks into DoS and spoofing, `Fine` is the full
/// six-class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Level {
    Root,
    Category,
    Fine,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Root, Level::Category, Level::Fine];

    pub fn number(self) -> u8 {
        match self {
            Level::Root => 1,
            Level::Category => 2,
            Level::Fine => 3,
        }
    }

    pub fn index(self) -> usize {
        self.number() as usize - 1
    }
}

impl TryFrom<u8> for Level {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Level::Root),
            2 => Ok(Level::Category),
            3 => Ok(Level::Fine),
            other => Err(Error::InvalidConfig(format!(
                "level must be 1, 2 or 3, got {other}"
            ))),
        }
    }
}

impl From<Level> for u8 {
    fn from(l: Level) -> u8 {
        l.number()
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "level {}", self.number())
    }
}

/// Fine classes plus their category (level 2) and benign/attack (level 1) images.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelHierarchy {
    fine_classes: Vec<String>,
    level2_classes: Vec<String>,
    level1_classes: Vec<String>,
    level2_of: Vec<usize>,
    level1_of: Vec<usize>,
}

impl LabelHierarchy {
    pub fn new(
        fine_classes: Vec<String>,
        level2_classes: Vec<String>,
        level1_classes: Vec<String>,
        level2_of: Vec<usize>,
        level1_of: Vec<usize>,
    ) -> Result<Self> {
        let n = fine_classes.len();
        if n == 0 {
            return Err(Error::InvalidConfig("hierarchy has no classes".into()));
        }
        if level2_of.len() != n || level1_of.len() != n {
            return Err(Error::InvalidConfig(
                "every fine class must map at both coarser levels".into(),
            ));
        }
        for names in [&fine_classes, &level2_classes, &level1_classes] {
            let mut sorted: Vec<&String> = names.iter().collect();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != names.len() {
                return Err(Error::InvalidConfig("duplicate class name".into()));
            }
        }
        // level 1 must factor through level 2
        let mut l1_of_l2: Vec<Option<usize>> = vec![None; level2_classes.len()];
        for c in 0..n {
            let (c2, c1) = (level2_of[c], level1_of[c]);
            if c2 >= level2_classes.len() || c1 >= level1_classes.len() {
                return Err(Error::InvalidConfig(format!(
                    "class {} maps outside the coarse class lists",
                    fine_classes[c]
                )));
            }
            match l1_of_l2[c2] {
                Some(prev) if prev != c1 => {
                    return Err(Error::InvalidConfig(format!(
                        "category {} maps to two level-1 classes",
                        level2_classes[c2]
                    )))
                }
                _ => l1_of_l2[c2] = Some(c1),
            }
            let benign2 = level2_classes[c2] == BENIGN;
            let benign1 = level1_classes[c1] == BENIGN;
            if benign1 != benign2 {
                return Err(Error::InvalidConfig(format!(
                    "class {} is benign at one level but not the other",
                    fine_classes[c]
                )));
            }
        }
        Ok(LabelHierarchy {
            fine_classes,
            level2_classes,
            level1_classes,
            level2_of,
            level1_of,
        })
    }

    /// The CIC-IoV2024 hierarchy: BENIGN, DOS and four spoofing subtypes.
    pub fn iov() -> Self {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        LabelHierarchy::new(
            s(&[
                BENIGN,
                "DOS",
                "SPOOFING_GAS",
                "SPOOFING_RPM",
                "SPOOFING_SPEED",
                "SPOOFING_STEERING_WHEEL",
            ]),
            s(&[BENIGN, "DOS", "SPOOFING"]),
            s(&[BENIGN, "ATTACK"]),
            vec![0, 1, 2, 2, 2, 2],
            vec![0, 1, 1, 1, 1, 1],
        )
        .expect("built-in hierarchy is valid")
    }

    pub fn n_fine(&self) -> usize {
        self.fine_classes.len()
    }

    pub fn classes(&self, level: Level) -> &[String] {
        match level {
            Level::Root => &self.level1_classes,
            Level::Category => &self.level2_classes,
            Level::Fine => &self.fine_classes,
        }
    }

    pub fn n_classes(&self, level: Level) -> usize {
        self.classes(level).len()
    }

    /// Map a fine class id to its id at `level`.
    pub fn coarsen(&self, fine: usize, level: Level) -> Result<usize> {
        if fine >= self.fine_classes.len() {
            return Err(Error::UnknownLabel(fine.to_string()));
        }
        Ok(match level {
            Level::Root => self.level1_of[fine],
            Level::Category => self.level2_of[fine],
            Level::Fine => fine,
        })
    }

    /// Map a level-2 category id to its level-1 id.
    pub fn category_to_root(&self, category: usize) -> usize {
        let fine = self
            .level2_of
            .iter()
            .position(|&c| c == category)
            .expect("every category has at least one fine class");
        self.level1_of[fine]
    }

    pub fn class_id(&self, level: Level, name: &str) -> Option<usize> {
        self.classes(level).iter().position(|c| c == name)
    }

    /// Resolve a raw label spelling to a fine class id.
    ///
    /// Matching is case-insensitive and treats spaces and hyphens as
    /// underscores; a few dataset spellings are aliased (`SW`, `GAS`, `DoS`...).
    pub fn parse_label(&self, raw: &str) -> Result<usize> {
        let norm: String = raw
            .trim()
            .chars()
            .map(|c| match c {
                ' ' | '-' => '_',
                c => c.to_ascii_uppercase(),
            })
            .collect();
        if let Some(id) = self.class_id(Level::Fine, &norm) {
            return Ok(id);
        }
        let canonical = match norm.as_str() {
            "NORMAL" => BENIGN,
            "DOS_ATTACK" | "DDOS" => "DOS",
            "GAS" | "GAS_SPOOFING" => "SPOOFING_GAS",
            "RPM" | "RPM_SPOOFING" => "SPOOFING_RPM",
            "SPEED" | "SPEED_SPOOFING" => "SPOOFING_SPEED",
            "SW" | "STEERING_WHEEL" | "STEERING" | "STEERING_WHEEL_SPOOFING" | "SPOOFING_SW" => {
                "SPOOFING_STEERING_WHEEL"
            }
            _ => return Err(Error::UnknownLabel(raw.to_string())),
        };
        self.class_id(Level::Fine, canonical)
            .ok_or_else(|| Error::UnknownLabel(raw.to_string()))
    }
}

impl Default for LabelHierarchy {
    fn default() -> Self {
        LabelHierarchy::iov()
    }
}

/// Coarsen a fine label vector to `level`.
pub fn coarsen_labels(labels: &[usize], hierarchy: &LabelHierarchy, level: Level) -> Result<Vec<usize>> {
    labels.iter().map(|&l| hierarchy.coarsen(l, level)).collect()
}
