use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use super::config::{self, ConfigError};
use super::{payload_or_mismatch, Checker, ExternalValidator};
use crate::model::{ErrorCode, FormatError, TaskInstance, TaskKind, Verdict};

const DEFAULT_ELEMENTS: &[&str] = &[
    "XDL", "Synthesis", "Hardware", "Component", "Reagents", "Reagent", "Procedure", "Prep", "Reaction",
    "Workup", "Purification", "Add", "AddSolid", "Transfer", "Stir", "StartStir", "StopStir", "HeatChill",
    "HeatChillToTemp", "StartHeatChill", "StopHeatChill", "Wait", "Filter", "FilterThrough", "WashSolid",
    "Separate", "Evaporate", "Dry", "Dissolve", "Crystallize", "Precipitate", "Recrystallize", "Sonicate",
    "CleanVessel", "Repeat", "Irradiate", "Evacuate", "Purge", "StartPurge", "StopPurge", "AdjustPH",
];

const DEFAULT_REQUIRED: &[(&str, &[&str])] = &[
    ("Component", &["id"]),
    ("Reagent", &["name"]),
    ("Add", &["vessel", "reagent"]),
    ("AddSolid", &["vessel", "reagent"]),
    ("Transfer", &["from_vessel", "to_vessel"]),
    ("Stir", &["vessel"]),
    ("HeatChill", &["vessel", "temp", "time"]),
    ("HeatChillToTemp", &["vessel", "temp"]),
    ("Wait", &["time"]),
    ("Filter", &["vessel"]),
    ("WashSolid", &["vessel", "solvent"]),
    ("Separate", &["purpose", "from_vessel", "separation_vessel", "to_vessel"]),
    ("Evaporate", &["vessel"]),
    ("Dry", &["vessel"]),
    ("Dissolve", &["vessel", "solvent"]),
];

/// A structural proxy for an XDL compiler; it does not know chemistry.
///
/// A program compiles iff it is well-formed XML whose root element is `XDL`,
/// every element name is allowed, and every element carries the attributes
/// its table entry requires. Configuration format:
///
/// ```text
/// allow = XDL Synthesis Hardware Reagents Procedure Add
/// require.Add = reagent vessel
/// ```
///
/// `allow` lines accumulate. A file that has no `allow` line keeps the
/// built-in element list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuralXdlValidator {
    allowed: BTreeSet<String>,
    required: BTreeMap<String, BTreeSet<String>>,
}

impl Default for StructuralXdlValidator {
    fn default() -> Self {
        StructuralXdlValidator {
            allowed: DEFAULT_ELEMENTS.iter().map(|s| s.to_string()).collect(),
            required: DEFAULT_REQUIRED
                .iter()
                .map(|(el, attrs)| (el.to_string(), attrs.iter().map(|a| a.to_string()).collect()))
                .collect(),
        }
    }
}

impl StructuralXdlValidator {
    pub fn new<I, S>(allowed: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        StructuralXdlValidator {
            allowed: allowed.into_iter().map(Into::into).collect(),
            required: BTreeMap::new(),
        }
    }

    pub fn require<I, S>(mut self, element: impl Into<String>, attrs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.required
            .entry(element.into())
            .or_default()
            .extend(attrs.into_iter().map(Into::into));
        self
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut allowed = BTreeSet::new();
        let mut required: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (line, key, value) in config::parse_pairs(text)? {
            if key == "allow" {
                allowed.extend(value.split_whitespace().map(String::from));
            } else if let Some(element) = key.strip_prefix("require.") {
                required
                    .entry(element.to_string())
                    .or_default()
                    .extend(value.split_whitespace().map(String::from));
            } else {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("unknown key {key:?}; expected `allow` or `require.<Element>`"),
                });
            }
        }
        if allowed.is_empty() {
            allowed = StructuralXdlValidator::default().allowed;
        }
        Ok(StructuralXdlValidator { allowed, required })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        StructuralXdlValidator::parse(&config::read(path)?)
    }

    fn first_violation(&self, program: &str) -> Option<String> {
        let doc = match roxmltree::Document::parse(program) {
            Ok(doc) => doc,
            Err(e) => return Some(format!("the program is not well-formed markup: {e}")),
        };
        let root = doc.root_element();
        if root.tag_name().name() != "XDL" {
            return Some(format!("the root element is <{}> but must be <XDL>", root.tag_name().name()));
        }
        for node in root.descendants().filter(|n| n.is_element()) {
            let name = node.tag_name().name();
            if !self.allowed.contains(name) {
                return Some(format!("<{name}> is not a known XDL element"));
            }
            if let Some(required) = self.required.get(name) {
                let missing: Vec<&str> = required
                    .iter()
                    .filter(|a| node.attribute(a.as_str()).is_none())
                    .map(String::as_str)
                    .collect();
                if !missing.is_empty() {
                    let pos = doc.text_pos_at(node.range().start);
                    return Some(format!(
                        "<{name}> at line {} is missing required attribute(s): {}",
                        pos.row,
                        missing.join(", ")
                    ));
                }
            }
        }
        None
    }
}

impl ExternalValidator for StructuralXdlValidator {
    fn validate(&self, payload: &str, _context: &TaskInstance) -> Verdict {
        match self.first_violation(payload.trim()) {
            None => Verdict::pass(),
            Some(msg) => Verdict::from_errors(vec![FormatError::new(
                ErrorCode::CompileFail,
                format!("compilation failed: {msg}"),
            )]),
        }
    }
}

/// Delegates to the configured compiler stand-in.
pub fn check_xdl(instance: &TaskInstance, response: &str, validator: &dyn ExternalValidator) -> Verdict {
    let _ = payload_or_mismatch!(instance, Xdl, TaskKind::Xdl);
    validator.validate(response, instance)
}

pub struct XdlChecker {
    validator: Arc<dyn ExternalValidator>,
}

impl XdlChecker {
    pub fn new(validator: Arc<dyn ExternalValidator>) -> Self {
        XdlChecker { validator }
    }
}

impl Checker for XdlChecker {
    fn task(&self) -> TaskKind {
        TaskKind::Xdl
    }

    fn check(&self, instance: &TaskInstance, response: &str) -> Verdict {
        check_xdl(instance, response, self.validator.as_ref())
    }
}
