//! Service-need classification and daily staff-time generation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::census::{ResidentProfile, Var};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
const MAX_WITNESSES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CaregiverType {
    #[serde(rename = "CNA")]
    Cna,
    #[serde(rename = "LPN")]
    Lpn,
    #[serde(rename = "RN")]
    Rn,
}

impl CaregiverType {
    pub const ALL: [CaregiverType; 3] = [CaregiverType::Cna, CaregiverType::Lpn, CaregiverType::Rn];

    pub fn as_str(self) -> &'static str {
        match self {
            CaregiverType::Cna => "CNA",
            CaregiverType::Lpn => "LPN",
            CaregiverType::Rn => "RN",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for CaregiverType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CaregiverType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CNA" => Ok(CaregiverType::Cna),
            "LPN" => Ok(CaregiverType::Lpn),
            "RN" => Ok(CaregiverType::Rn),
            _ => Err(Error::InvalidInput(format!("unknown caregiver type `{s}` (expected CNA, LPN or RN)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceNeedGroup {
    pub id: u32,
    pub label: String,
}

/// Equality or inclusive interval test on one variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cond {
    Value(u8),
    Range([u8; 2]),
}

impl Cond {
    fn bounds(self) -> (u8, u8) {
        match self {
            Cond::Value(v) => (v, v),
            Cond::Range([lo, hi]) => (lo, hi),
        }
    }

    pub fn matches(self, v: u8) -> bool {
        let (lo, hi) = self.bounds();
        v >= lo && v <= hi
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    #[serde(default)]
    pub when: BTreeMap<Var, Cond>,
    pub group: u32,
}

impl Rule {
    pub fn matches(&self, p: &ResidentProfile) -> bool {
        self.when.iter().all(|(var, c)| c.matches(p.get(*var)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conflict {
    pub profile: ResidentProfile,
    pub groups: Vec<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RulesReport {
    pub profiles_checked: usize,
    pub uncovered_count: usize,
    pub conflict_count: usize,
    /// Up to 20 witnesses each.
    pub uncovered: Vec<ResidentProfile>,
    pub conflicts: Vec<Conflict>,
    /// Structural problems (unknown group ids, bad ranges).
    pub errors: Vec<String>,
}

impl RulesReport {
    pub fn is_clean(&self) -> bool {
        self.uncovered_count == 0 && self.conflict_count == 0 && self.errors.is_empty()
    }
}

/// Ordered decision rules; the first matching rule assigns the group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationRules {
    pub schema_version: u32,
    pub groups: Vec<ServiceNeedGroup>,
    pub rules: Vec<Rule>,
}

/// Every profile in the discrete attribute lattice (26,112 points).
pub fn attribute_lattice() -> impl Iterator<Item = ResidentProfile> {
    let radix: Vec<u32> = Var::ALL.iter().map(|v| u32::from(v.range().1) + 1).collect();
    let total: u32 = radix.iter().product();
    (0..total).map(move |mut i| {
        let mut values = [0u8; 9];
        for (j, r) in radix.iter().enumerate() {
            values[j] = (i % r) as u8;
            i /= r;
        }
        ResidentProfile::from_values(values, 0).expect("lattice point in range")
    })
}

pub fn validate_rules(rules: &ClassificationRules) -> RulesReport {
    let mut report = RulesReport::default();
    if rules.schema_version != SCHEMA_VERSION {
        report.errors.push(format!("unsupported schema_version {}", rules.schema_version));
    }
    for (i, g) in rules.groups.iter().enumerate() {
        if g.id as usize != i + 1 {
            report.errors.push(format!("group ids must be contiguous from 1; found {} at position {}", g.id, i + 1));
        }
    }
    let known: BTreeSet<u32> = rules.groups.iter().map(|g| g.id).collect();
    for (i, r) in rules.rules.iter().enumerate() {
        if !known.contains(&r.group) {
            report.errors.push(format!("rule {} targets unknown group {}", i + 1, r.group));
        }
        for (var, c) in &r.when {
            let (lo, hi) = c.bounds();
            let (vlo, vhi) = var.range();
            if lo > hi || lo < vlo || hi > vhi {
                report.errors.push(format!("rule {}: {} test {lo}..={hi} outside {vlo}..={vhi}", i + 1, var.name()));
            }
        }
    }
    for p in attribute_lattice() {
        report.profiles_checked += 1;
        let hits: BTreeSet<u32> = rules.rules.iter().filter(|r| r.matches(&p)).map(|r| r.group).collect();
        match hits.len() {
            0 => {
                report.uncovered_count += 1;
                if report.uncovered.len() < MAX_WITNESSES {
                    report.uncovered.push(p);
                }
            }
            1 => {}
            _ => {
                report.conflict_count += 1;
                if report.conflicts.len() < MAX_WITNESSES {
                    report.conflicts.push(Conflict { profile: p, groups: hits.into_iter().collect() });
                }
            }
        }
    }
    report
}

impl ClassificationRules {
    /// Validated construction: rejects rule sets that leave any profile
    /// unclassified or send one profile to two different groups.
    pub fn new(groups: Vec<ServiceNeedGroup>, rules: Vec<Rule>) -> Result<Self> {
        let r = ClassificationRules { schema_version: SCHEMA_VERSION, groups, rules };
        r.validate()?;
        Ok(r)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: ClassificationRules = serde_json::from_str(s)?;
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let rep = validate_rules(self);
        if rep.is_clean() {
            return Ok(());
        }
        let mut msg = Vec::new();
        msg.extend(rep.errors.iter().cloned());
        if rep.uncovered_count > 0 {
            msg.push(format!("{} profiles match no rule, e.g. {:?}", rep.uncovered_count, rep.uncovered[0].values()));
        }
        if rep.conflict_count > 0 {
            let c = &rep.conflicts[0];
            msg.push(format!(
                "{} profiles match rules for different groups, e.g. {:?} -> {:?}",
                rep.conflict_count,
                c.profile.values(),
                c.groups
            ));
        }
        Err(Error::Config(format!("classification rules: {}", msg.join("; "))))
    }

    pub fn group(&self, id: u32) -> Option<&ServiceNeedGroup> {
        self.groups.get((id as usize).wrapping_sub(1))
    }
}

pub fn classify<'a>(profile: &ResidentProfile, rules: &'a ClassificationRules) -> &'a ServiceNeedGroup {
    let id = rules
        .rules
        .iter()
        .find(|r| r.matches(profile))
        .map(|r| r.group)
        .expect("validated rules cover every profile");
    rules.group(id).expect("validated rules reference known groups")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaffTime {
    pub direct_min: f64,
    pub indirect_min: f64,
}

impl StaffTime {
    pub fn mean(&self) -> f64 {
        self.direct_min + self.indirect_min
    }

    pub fn variance(&self) -> f64 {
        self.direct_min * self.direct_min + self.indirect_min * self.indirect_min
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StaffTimeFile {
    schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    note: Option<String>,
    times: BTreeMap<String, StaffTime>,
}

/// Mean direct and indirect daily minutes per (caregiver type, group).
/// Serialized as a map keyed `"CNA:3"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StaffTimeFile", into = "StaffTimeFile")]
pub struct StaffTimeTable {
    pub note: Option<String>,
    times: HashMap<(CaregiverType, u32), StaffTime>,
}

impl TryFrom<StaffTimeFile> for StaffTimeTable {
    type Error = Error;
    fn try_from(f: StaffTimeFile) -> Result<Self> {
        if f.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!("unsupported staff table schema_version {}", f.schema_version)));
        }
        let mut times = HashMap::new();
        for (key, t) in f.times {
            let (k, g) = key
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("staff table key `{key}` is not `type:group`")))?;
            let k: CaregiverType = k.parse()?;
            let g: u32 = g.parse().map_err(|_| Error::Config(format!("staff table key `{key}` has a bad group id")))?;
            times.insert((k, g), t);
        }
        let table = StaffTimeTable { note: f.note, times };
        table.check_values()?;
        Ok(table)
    }
}

impl From<StaffTimeTable> for StaffTimeFile {
    fn from(t: StaffTimeTable) -> Self {
        StaffTimeFile {
            schema_version: SCHEMA_VERSION,
            note: t.note,
            times: t.times.into_iter().map(|((k, g), v)| (format!("{k}:{g}"), v)).collect(),
        }
    }
}

impl StaffTimeTable {
    pub fn new(entries: impl IntoIterator<Item = (CaregiverType, u32, StaffTime)>) -> Result<Self> {
        let t = StaffTimeTable { note: None, times: entries.into_iter().map(|(k, g, s)| ((k, g), s)).collect() };
        t.check_values()?;
        Ok(t)
    }

    fn check_values(&self) -> Result<()> {
        for ((k, g), t) in &self.times {
            for m in [t.direct_min, t.indirect_min] {
                if !(m > 0.0 && m <= 1440.0) {
                    return Err(Error::Config(format!("staff time for {k}:{g} must be in (0, 1440] minutes, got {m}")));
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, k: CaregiverType, group: u32) -> Option<StaffTime> {
        self.times.get(&(k, group)).copied()
    }

    /// Every caregiver type must have an entry for every group.
    pub fn validate_against(&self, rules: &ClassificationRules) -> Result<()> {
        for g in &rules.groups {
            for k in CaregiverType::ALL {
                if self.get(k, g.id).is_none() {
                    return Err(Error::Config(format!("staff table has no entry for {k}:{}", g.id)));
                }
            }
        }
        Ok(())
    }
}

/// Hypoexponential draw: independent exponentials with the direct and
/// indirect means, summed.
pub fn sample_daily_staff_time<R: Rng + ?Sized>(time: StaffTime, rng: &mut R) -> f64 {
    let (a, b) = sample_staff_time_parts(time, rng);
    a + b
}

/// The (direct, indirect) components of one daily draw.
pub fn sample_staff_time_parts<R: Rng + ?Sized>(time: StaffTime, rng: &mut R) -> (f64, f64) {
    let a: f64 = Exp1.sample(rng);
    let b: f64 = Exp1.sample(rng);
    (time.direct_min * a, time.indirect_min * b)
}

/// Warn where rules that differ only in their ADL band carry CNA means
/// that fall as the band rises.
pub fn lint_monotone(rules: &ClassificationRules, table: &StaffTimeTable) -> Vec<String> {
    let mut families: BTreeMap<String, Vec<(u8, u32)>> = BTreeMap::new();
    for r in &rules.rules {
        let Some(adl) = r.when.get(&Var::X1) else { continue };
        let mut rest = r.when.clone();
        rest.remove(&Var::X1);
        let key = serde_json::to_string(&rest).unwrap_or_default();
        families.entry(key).or_default().push((adl.bounds().0, r.group));
    }
    let mut warnings = Vec::new();
    for members in families.values_mut() {
        members.sort_unstable();
        for w in members.windows(2) {
            let (lo, hi) = (w[0].1, w[1].1);
            let (Some(a), Some(b)) = (table.get(CaregiverType::Cna, lo), table.get(CaregiverType::Cna, hi)) else {
                continue;
            };
            if b.mean() < a.mean() {
                warnings.push(format!(
                    "group {hi} (ADL from {}) has lower CNA minutes ({:.1}) than group {lo} (ADL from {}, {:.1})",
                    w[1].0,
                    b.mean(),
                    w[0].0,
                    a.mean()
                ));
            }
        }
    }
    warnings
}
