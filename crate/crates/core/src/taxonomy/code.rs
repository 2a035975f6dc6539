use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Highest top-level Vienna category.
pub const MAX_CATEGORY: u16 = 29;

/// A hierarchical Vienna code, `XX`, `XX.YY` or `XX.YY.ZZ`.
///
/// Ordering is lexicographic over (category, division, section) with a
/// missing level sorting before any present one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ViennaCode {
    category: u16,
    division: Option<u16>,
    section: Option<u16>,
}

impl ViennaCode {
    pub fn new(category: u16, division: Option<u16>, section: Option<u16>) -> Result<Self> {
        let invalid = |field, problem: &str| Error::InvalidCode {
            input: format!("{category}/{division:?}/{section:?}"),
            field,
            problem: problem.to_string(),
        };
        if !(1..=MAX_CATEGORY).contains(&category) {
            return Err(invalid("category", "is outside [1, 29]"));
        }
        if division == Some(0) {
            return Err(invalid("division", "must be at least 1"));
        }
        if section == Some(0) {
            return Err(invalid("section", "must be at least 1"));
        }
        if section.is_some() && division.is_none() {
            return Err(invalid("section", "requires a division"));
        }
        Ok(Self {
            category,
            division,
            section,
        })
    }

    pub fn category(&self) -> u16 {
        self.category
    }

    pub fn division(&self) -> Option<u16> {
        self.division
    }

    pub fn section(&self) -> Option<u16> {
        self.section
    }

    /// Number of levels present (1 to 3).
    pub fn depth(&self) -> usize {
        1 + self.division.is_some() as usize + self.section.is_some() as usize
    }

    /// The code truncated to its parent level, or `None` for a category.
    pub fn parent(&self) -> Option<Self> {
        match (self.division, self.section) {
            (_, Some(_)) => Some(Self {
                section: None,
                ..*self
            }),
            (Some(_), None) => Some(Self {
                division: None,
                ..*self
            }),
            (None, None) => None,
        }
    }

    /// Self followed by every ancestor, most specific first.
    pub fn lineage(&self) -> impl Iterator<Item = ViennaCode> {
        std::iter::successors(Some(*self), |c| c.parent())
    }
}

/// Parses `XX[.YY[.ZZ]]`; leading zeros are accepted, so `05.09.01` and
/// `5.9.1` are the same code.
pub fn parse_code(text: &str) -> Result<ViennaCode> {
    const FIELDS: [&str; 3] = ["category", "division", "section"];
    let trimmed = text.trim();
    let err = |field, problem: &str| Error::InvalidCode {
        input: text.to_string(),
        field,
        problem: problem.to_string(),
    };
    let parts: Vec<&str> = trimmed.split('.').collect();
    if parts.len() > 3 {
        return Err(err("code", "has more than three levels"));
    }
    let mut values = [None; 3];
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(err(FIELDS[i], "is empty"));
        }
        if !part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err(FIELDS[i], "is not a non-negative integer"));
        }
        let value: u16 = part
            .parse()
            .map_err(|_| err(FIELDS[i], "is too large"))?;
        values[i] = Some(value);
    }
    let category = values[0].expect("split yields at least one part");
    if !(1..=MAX_CATEGORY).contains(&category) {
        return Err(err("category", "is outside [1, 29]"));
    }
    if values[1] == Some(0) {
        return Err(err("division", "must be at least 1"));
    }
    if values[2] == Some(0) {
        return Err(err("section", "must be at least 1"));
    }
    Ok(ViennaCode {
        category,
        division: values[1],
        section: values[2],
    })
}

/// Canonical zero-padded form truncated to the levels present.
pub fn format_code(code: &ViennaCode) -> String {
    code.to_string()
}

impl fmt::Display for ViennaCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}", self.category)?;
        if let Some(d) = self.division {
            write!(f, ".{d:02}")?;
        }
        if let Some(s) = self.section {
            write!(f, ".{s:02}")?;
        }
        Ok(())
    }
}

impl FromStr for ViennaCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_code(s)
    }
}

impl Serialize for ViennaCode {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ViennaCode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_code(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn code(c: u16, d: Option<u16>, s: Option<u16>) -> ViennaCode {
        ViennaCode::new(c, d, s).unwrap()
    }

    #[test]
    fn parses_carrots_code() {
        assert_eq!(parse_code("5.9.1").unwrap(), code(5, Some(9), Some(1)));
        assert_eq!(parse_code("05.09.01").unwrap(), parse_code("5.9.1").unwrap());
    }

    #[test]
    fn parses_single_level_and_padded() {
        assert_eq!(parse_code("29").unwrap(), code(29, None, None));
        assert_eq!(parse_code("26.07.99").unwrap(), code(26, Some(7), Some(99)));
    }

    #[test]
    fn formats_canonically() {
        assert_eq!(format_code(&code(5, Some(9), Some(1))), "05.09.01");
        assert_eq!(format_code(&code(26, None, None)), "26");
        assert_eq!(format_code(&code(29, Some(1), Some(4))), "29.01.04");
    }

    #[test]
    fn rejects_malformed_codes_naming_the_field() {
        let field = |s: &str| match parse_code(s) {
            Err(Error::InvalidCode { field, .. }) => field,
            other => panic!("{s:?} parsed as {other:?}"),
        };
        assert_eq!(field("31.01"), "category");
        assert_eq!(field("0"), "category");
        assert_eq!(field(""), "category");
        assert_eq!(field("5..1"), "division");
        assert_eq!(field("5.9."), "section");
        assert_eq!(field("5.x"), "division");
        assert_eq!(field("5.0"), "division");
        assert_eq!(field("5.1.0"), "section");
        assert_eq!(field("1.2.3.4"), "code");
        assert_eq!(field("-5"), "category");
    }

    #[test]
    fn section_requires_division() {
        assert!(ViennaCode::new(5, None, Some(1)).is_err());
    }

    #[test]
    fn lineage_walks_to_category() {
        let l: Vec<String> = code(5, Some(9), Some(1)).lineage().map(|c| c.to_string()).collect();
        assert_eq!(l, ["05.09.01", "05.09", "05"]);
    }

    fn arb_code() -> impl Strategy<Value = ViennaCode> {
        (1u16..=29, proptest::option::of(1u16..=99), 1u16..=99, any::<bool>()).prop_map(
            |(c, d, s, with_s)| {
                let s = if with_s && d.is_some() { Some(s) } else { None };
                ViennaCode::new(c, d, s).unwrap()
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn format_then_parse_is_identity(c in arb_code()) {
            prop_assert_eq!(parse_code(&format_code(&c)).unwrap(), c);
        }
    }
}
