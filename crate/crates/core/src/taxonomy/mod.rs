//! Vienna codes and the grouped label spaces built on top of them.
//!
//! Codes 1 to 25 feed the figurative main and sub spaces, category 26 the
//! shape groups, 27 and 28 the text-presence space and the retained
//! category 29 sections the color space. Nice classes feed the sector
//! space. The grouping itself is data: every label lists the codes it owns
//! in an embedded tab-separated table, and a code maps to the label owning
//! its most specific listed ancestor.

mod code;
mod kind;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Error, Result};

pub use code::{format_code, parse_code, ViennaCode, MAX_CATEGORY};
pub use kind::CharacteristicKind;

/// The table compiled into the binary.
pub const EMBEDDED_TABLE: &str = include_str!("../../data/label_spaces.tsv");

/// Number of Nice classes.
pub const NICE_CLASSES: u8 = 45;

/// Where a label's membership comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "scheme", content = "code", rename_all = "snake_case")]
pub enum LabelSource {
    Vienna(ViennaCode),
    Nice(u8),
}

impl fmt::Display for LabelSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelSource::Vienna(c) => write!(f, "{c}"),
            LabelSource::Nice(n) => write!(f, "nice:{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Label {
    pub id: u32,
    pub name: String,
    pub sources: BTreeSet<LabelSource>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabelSpace {
    pub kind: CharacteristicKind,
    pub labels: Vec<Label>,
}

impl LabelSpace {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, id: u32) -> Option<&Label> {
        self.labels.get(id as usize)
    }

    pub fn find_by_name(&self, name: &str) -> Option<&Label> {
        self.labels
            .iter()
            .find(|l| l.name.eq_ignore_ascii_case(name))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct LabelRef {
    pub kind: CharacteristicKind,
    pub label: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    /// 29.01.11 to 29.01.15 describe how many colors appear, not which.
    ColorCount,
    ColorNotRetained,
    MissingLevel,
    UndefinedDivision,
    Disabled,
    Unmapped,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DropReason::ColorCount => "color-count code",
            DropReason::ColorNotRetained => "color section not retained",
            DropReason::MissingLevel => "code lacks the level its group is defined at",
            DropReason::UndefinedDivision => "undefined 2nd-level code",
            DropReason::Disabled => "grouping disabled by configuration",
            DropReason::Unmapped => "no label owns this code",
        })
    }
}

/// Result of grouping one Vienna code. A figurative code with a division
/// maps to both its main and its sub label, hence the list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupingOutcome {
    Mapped(Vec<LabelRef>),
    Dropped(DropReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaxonomyOptions {
    /// Treat category 28 ("Inscriptions in various characters") as text.
    pub inscriptions_are_text: bool,
}

impl Default for TaxonomyOptions {
    fn default() -> Self {
        Self {
            inscriptions_are_text: true,
        }
    }
}

/// All label spaces plus the reverse index used for grouping.
#[derive(Debug, Clone)]
pub struct Taxonomy {
    spaces: BTreeMap<CharacteristicKind, LabelSpace>,
    vienna_index: HashMap<ViennaCode, Vec<LabelRef>>,
    nice_index: HashMap<u8, u32>,
    /// Categories for which some space lists 2nd-level codes.
    divided_categories: BTreeSet<u16>,
    /// `(category, division)` pairs that some listed code lies under.
    defined_divisions: BTreeSet<(u16, u16)>,
    options: TaxonomyOptions,
}

impl Taxonomy {
    /// The embedded table with default options, built once per process.
    pub fn embedded() -> &'static Taxonomy {
        static CELL: OnceLock<Taxonomy> = OnceLock::new();
        CELL.get_or_init(|| {
            Taxonomy::from_table(EMBEDDED_TABLE, TaxonomyOptions::default())
                .expect("embedded label table is valid")
        })
    }

    pub fn with_options(options: TaxonomyOptions) -> Taxonomy {
        Taxonomy::from_table(EMBEDDED_TABLE, options).expect("embedded label table is valid")
    }

    /// Parses a `kind<TAB>label-id<TAB>name<TAB>code[,code...]` table.
    /// Blank lines and lines starting with `#` are ignored.
    pub fn from_table(table: &str, options: TaxonomyOptions) -> Result<Taxonomy> {
        let mut spaces: BTreeMap<CharacteristicKind, LabelSpace> = BTreeMap::new();
        for (lineno, line) in table.lines().enumerate() {
            let line_no = lineno + 1;
            let err = |message: String| Error::LabelTable {
                line: line_no,
                message,
            };
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(err(format!("expected 4 tab-separated fields, got {}", fields.len())));
            }
            let kind: CharacteristicKind = fields[0].parse().map_err(|e| err(format!("{e}")))?;
            if !kind.is_labeled() {
                return Err(err("the generic block owns no labels".into()));
            }
            let id: u32 = fields[1]
                .trim()
                .parse()
                .map_err(|_| err(format!("bad label id {:?}", fields[1])))?;
            let mut sources = BTreeSet::new();
            for raw in fields[3].split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let source = if kind == CharacteristicKind::Sector {
                    let n: u8 = raw
                        .parse()
                        .ok()
                        .filter(|n| (1..=NICE_CLASSES).contains(n))
                        .ok_or_else(|| err(format!("bad Nice class {raw:?}")))?;
                    LabelSource::Nice(n)
                } else {
                    LabelSource::Vienna(parse_code(raw).map_err(|e| err(e.to_string()))?)
                };
                if !sources.insert(source) {
                    return Err(err(format!("code {raw} listed twice")));
                }
            }
            let space = spaces.entry(kind).or_insert_with(|| LabelSpace {
                kind,
                labels: Vec::new(),
            });
            if id as usize != space.labels.len() {
                return Err(err(format!(
                    "{kind} label ids must be dense and ordered; expected {}, got {id}",
                    space.labels.len()
                )));
            }
            space.labels.push(Label {
                id,
                name: fields[2].trim().to_string(),
                sources,
            });
        }

        let mut vienna_index: HashMap<ViennaCode, Vec<LabelRef>> = HashMap::new();
        let mut nice_index = HashMap::new();
        let mut divided_categories = BTreeSet::new();
        let mut defined_divisions = BTreeSet::new();
        for space in spaces.values() {
            let mut seen = BTreeSet::new();
            for label in &space.labels {
                for source in &label.sources {
                    if !seen.insert(*source) {
                        return Err(Error::LabelTable {
                            line: 0,
                            message: format!("{source} owned by two {} labels", space.kind),
                        });
                    }
                    match source {
                        LabelSource::Nice(n) => {
                            nice_index.insert(*n, label.id);
                        }
                        LabelSource::Vienna(code) => {
                            if code.category() == 28 && !options.inscriptions_are_text {
                                continue;
                            }
                            if let Some(d) = code.division() {
                                divided_categories.insert(code.category());
                                defined_divisions.insert((code.category(), d));
                            }
                            vienna_index.entry(*code).or_default().push(LabelRef {
                                kind: space.kind,
                                label: label.id,
                            });
                        }
                    }
                }
            }
        }

        Ok(Taxonomy {
            spaces,
            vienna_index,
            nice_index,
            divided_categories,
            defined_divisions,
            options,
        })
    }

    pub fn options(&self) -> TaxonomyOptions {
        self.options
    }

    pub fn space(&self, kind: CharacteristicKind) -> Option<&LabelSpace> {
        self.spaces.get(&kind)
    }

    pub fn spaces(&self) -> impl Iterator<Item = &LabelSpace> {
        self.spaces.values()
    }

    /// Cardinality of a kind's label space; zero for the generic block.
    pub fn label_count(&self, kind: CharacteristicKind) -> usize {
        self.space(kind).map_or(0, LabelSpace::len)
    }

    pub fn label_name(&self, kind: CharacteristicKind, id: u32) -> Option<&str> {
        self.space(kind)?.label(id).map(|l| l.name.as_str())
    }

    /// Groups one code. Total over valid codes.
    pub fn group_code(&self, code: &ViennaCode) -> GroupingOutcome {
        let mut best: BTreeMap<CharacteristicKind, (usize, u32)> = BTreeMap::new();
        for ancestor in code.lineage() {
            if let Some(refs) = self.vienna_index.get(&ancestor) {
                for r in refs {
                    best.entry(r.kind).or_insert((ancestor.depth(), r.label));
                }
            }
        }

        let undefined = code.division().is_some_and(|d| {
            self.divided_categories.contains(&code.category())
                && !self.defined_divisions.contains(&(code.category(), d))
        });
        if undefined {
            return GroupingOutcome::Dropped(DropReason::UndefinedDivision);
        }
        if !best.is_empty() {
            return GroupingOutcome::Mapped(
                best.into_iter()
                    .map(|(kind, (_, label))| LabelRef { kind, label })
                    .collect(),
            );
        }

        let reason = match (code.category(), code.division(), code.section()) {
            (28, _, _) if !self.options.inscriptions_are_text => DropReason::Disabled,
            (29, Some(_), Some(11..=15)) => DropReason::ColorCount,
            (29, Some(_), Some(_)) => DropReason::ColorNotRetained,
            (29, _, None) | (26, None, _) => DropReason::MissingLevel,
            _ => DropReason::Unmapped,
        };
        GroupingOutcome::Dropped(reason)
    }

    /// Maps a Nice class (1 to 45) to its sector label.
    pub fn group_nice(&self, class: u8) -> Option<u32> {
        self.nice_index.get(&class).copied()
    }

    /// Text-space label for "present" and "absent".
    pub fn text_labels(&self) -> (u32, u32) {
        let space = self.space(CharacteristicKind::Text);
        let find = |name| space.and_then(|s| s.find_by_name(name)).map_or(0, |l| l.id);
        (find("Absent"), find("Present"))
    }

    /// Human readable explanation used by the `taxonomy explain` command.
    pub fn explain(&self, code: &ViennaCode) -> String {
        match self.group_code(code) {
            GroupingOutcome::Mapped(refs) => refs
                .iter()
                .map(|r| {
                    format!(
                        "{code} -> {} label {} ({})",
                        r.kind,
                        r.label,
                        self.label_name(r.kind, r.label).unwrap_or("?")
                    )
                })
                .collect::<Vec<_>>()
                .join("\n"),
            GroupingOutcome::Dropped(reason) => format!("{code} -> dropped: {reason}"),
        }
    }
}
