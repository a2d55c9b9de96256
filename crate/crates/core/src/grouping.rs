//! Customer groups restricting the buddy search space.
//!
//! The default mapping uses Elexon profile class, council tax band and the
//! presence of PV. Deployments without those attributes can supply their own
//! rule table as TOML or CSV.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{BuddyError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupId(pub u8);

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Domestic Elexon profile class: 1 (Standard) or 2 (Economy 7).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum ProfileClass {
    Standard,
    Economy7,
}

impl TryFrom<u8> for ProfileClass {
    type Error = BuddyError;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(ProfileClass::Standard),
            2 => Ok(ProfileClass::Economy7),
            other => Err(BuddyError::InvalidInput(format!(
                "profile class {other} is not domestic (expected 1 or 2)"
            ))),
        }
    }
}

impl From<ProfileClass> for u8 {
    fn from(c: ProfileClass) -> u8 {
        match c {
            ProfileClass::Standard => 1,
            ProfileClass::Economy7 => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CouncilTaxBand {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    H,
}

impl CouncilTaxBand {
    pub const ALL: [CouncilTaxBand; 8] = [
        CouncilTaxBand::A,
        CouncilTaxBand::B,
        CouncilTaxBand::C,
        CouncilTaxBand::D,
        CouncilTaxBand::E,
        CouncilTaxBand::F,
        CouncilTaxBand::G,
        CouncilTaxBand::H,
    ];

    pub fn letter(self) -> char {
        (b'A' + self as u8) as char
    }
}

impl FromStr for CouncilTaxBand {
    type Err = BuddyError;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let mut chars = t.chars();
        match (chars.next().map(|c| c.to_ascii_uppercase()), chars.next()) {
            (Some(c @ 'A'..='H'), None) => Ok(Self::ALL[(c as u8 - b'A') as usize]),
            _ => Err(BuddyError::InvalidInput(format!("unknown council tax band {t:?}"))),
        }
    }
}

/// The attributes a distribution operator holds for every customer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CustomerAttributes {
    pub profile_class: ProfileClass,
    pub council_tax_band: Option<CouncilTaxBand>,
    pub has_pv: bool,
}

impl CustomerAttributes {
    pub fn new(profile_class: ProfileClass, band: Option<CouncilTaxBand>, has_pv: bool) -> Self {
        Self {
            profile_class,
            council_tax_band: band,
            has_pv,
        }
    }
}

/// Which bands a rule applies to. An empty list matches any band, including unknown.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupRule {
    pub profile_class: ProfileClass,
    #[serde(default)]
    pub bands: Vec<CouncilTaxBand>,
    pub has_pv: bool,
    pub group: GroupId,
}

impl GroupRule {
    fn matches(&self, attrs: &CustomerAttributes) -> bool {
        self.profile_class == attrs.profile_class
            && self.has_pv == attrs.has_pv
            && (self.bands.is_empty() || attrs.council_tax_band.is_some_and(|b| self.bands.contains(&b)))
    }
}

/// An ordered rule table; the first matching rule wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMapping {
    pub rules: Vec<GroupRule>,
    /// Group used for attributes with no matching rule because the band is
    /// unknown. `None` makes such customers a hard error.
    #[serde(default)]
    pub unknown_band_group: Option<GroupId>,
}

impl Default for GroupMapping {
    /// Seven groups: class-1 non-PV split by band (A-C, D, E, F-H), class-2
    /// non-PV, class-2 PV and class-1 PV.
    fn default() -> Self {
        use CouncilTaxBand::*;
        use ProfileClass::*;
        let rule = |profile_class, bands: &[CouncilTaxBand], has_pv, g| GroupRule {
            profile_class,
            bands: bands.to_vec(),
            has_pv,
            group: GroupId(g),
        };
        Self {
            rules: vec![
                rule(Standard, &[A, B, C], false, 0),
                rule(Standard, &[D], false, 1),
                rule(Standard, &[E], false, 2),
                rule(Standard, &[F, G, H], false, 3),
                rule(Economy7, &[], false, 4),
                rule(Economy7, &[], true, 5),
                rule(Standard, &[], true, 6),
            ],
            unknown_band_group: Some(GroupId(1)),
        }
    }
}

#[derive(Debug, Deserialize)]
struct MappingRow {
    profile_class: u8,
    council_tax_band: String,
    has_pv: String,
    group: u8,
}

impl GroupMapping {
    /// The default table with the unknown-band fallback disabled.
    pub fn strict() -> Self {
        Self {
            unknown_band_group: None,
            ..Self::default()
        }
    }

    pub fn assign(&self, attrs: &CustomerAttributes) -> Result<GroupId> {
        if let Some(rule) = self.rules.iter().find(|r| r.matches(attrs)) {
            return Ok(rule.group);
        }
        match (attrs.council_tax_band, self.unknown_band_group) {
            (None, Some(g)) => {
                log::warn!("unknown council tax band for {attrs:?}; using group {g}");
                Ok(g)
            }
            _ => Err(BuddyError::Grouping(format!("no group rule matches {attrs:?}"))),
        }
    }

    /// Load a mapping from `.toml` (this struct's serde shape) or `.csv`
    /// (`profile_class,council_tax_band,has_pv,group`, band `Any` or `A|B|C`).
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => Ok(toml::from_str(&text)?),
            Some("csv") => Self::from_csv(text.as_bytes()),
            _ => Err(BuddyError::Config(format!(
                "group mapping {} must be .toml or .csv",
                path.display()
            ))),
        }
    }

    pub fn from_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut rules = Vec::new();
        for (i, rec) in rdr.deserialize::<MappingRow>().enumerate() {
            let row = i + 2;
            let rec = rec.map_err(|e| BuddyError::Schema {
                row,
                message: e.to_string(),
            })?;
            let schema = |message: String| BuddyError::Schema { row, message };
            let profile_class = ProfileClass::try_from(rec.profile_class).map_err(|e| schema(e.to_string()))?;
            let bands = if rec.council_tax_band.eq_ignore_ascii_case("any") {
                Vec::new()
            } else {
                rec.council_tax_band
                    .split('|')
                    .map(str::parse)
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| schema(e.to_string()))?
            };
            rules.push(GroupRule {
                profile_class,
                bands,
                has_pv: parse_flag(&rec.has_pv).map_err(|e| schema(e.to_string()))?,
                group: GroupId(rec.group),
            });
        }
        Ok(Self {
            rules,
            unknown_band_group: None,
        })
    }

    /// Attributes that map to `group` under this table, used when writing
    /// synthetic customers to a registry.
    pub fn representative(&self, group: GroupId) -> Option<CustomerAttributes> {
        self.rules.iter().find(|r| r.group == group).map(|r| {
            let band = r.bands.get(r.bands.len() / 2).copied().or(Some(CouncilTaxBand::C));
            CustomerAttributes::new(r.profile_class, band, r.has_pv)
        })
    }
}

/// Group of `attrs` under the default table.
pub fn assign_group(attrs: &CustomerAttributes) -> Result<GroupId> {
    GroupMapping::default().assign(attrs)
}

pub(crate) fn parse_flag(s: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "y" | "yes" | "true" | "1" => Ok(true),
        "n" | "no" | "false" | "0" | "" => Ok(false),
        other => Err(BuddyError::InvalidInput(format!("not a boolean flag: {other:?}"))),
    }
}
