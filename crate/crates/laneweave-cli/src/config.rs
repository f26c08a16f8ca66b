//! INI-style run configuration files.
//!
//! The format is flat and diff-friendly: three known sections, `key = value`
//! lines, `#`/`;` full-line comments. A file may carry any subset of the
//! sections — each command states which ones it needs.
//!
//! ```ini
//! [flows]
//! # either raw demand in vehicles per hour ...
//! f_enter = 200
//! f_exit = 200
//! f2 = 200
//! f1 = 800
//! # ... or already-normalized shares (n_enter/n_exit/n2), never both
//!
//! [coefficients]
//! alpha = 1.255
//! beta = 1.138
//! omega = 1.0
//! gamma = 2.384
//! rho = 1.0
//! delta = 3.094
//! # unit costs c1_t/c2_t/c1_m/c2_m are optional and default to 1
//!
//! [options]
//! seed = 42
//! ```
//!
//! Structural problems (unknown keys, duplicates, malformed numbers, missing
//! required keys) are parse errors carrying the offending line; values that
//! parse but violate model invariants (a negative flow, a zero coefficient)
//! are domain errors. The two classes map to different exit codes.

use std::path::Path;

use laneweave::{CostCoefficients, Error, FlowConfiguration, FlowRates, Result};

/// Parsed contents of a configuration file.
#[derive(Debug, Clone)]
pub struct ConfigFile {
    path: String,
    /// Normalized flows, when a `[flows]` section was present.
    pub flows: Option<FlowConfiguration>,
    /// Coefficients, when a `[coefficients]` section was present.
    pub coefficients: Option<CostCoefficients>,
    /// Seed from `[options]`, when given.
    pub seed: Option<u64>,
}

impl ConfigFile {
    /// The flows, or a parse error naming the missing section.
    pub fn require_flows(&self) -> Result<FlowConfiguration> {
        self.flows.ok_or_else(|| Error::Parse {
            path: self.path.clone(),
            line: 1,
            message: "this command needs a [flows] section".to_string(),
        })
    }

    /// The coefficients, or a parse error naming the missing section.
    pub fn require_coefficients(&self) -> Result<CostCoefficients> {
        self.coefficients.ok_or_else(|| Error::Parse {
            path: self.path.clone(),
            line: 1,
            message: "this command needs a [coefficients] section".to_string(),
        })
    }
}

/// Read and parse a configuration file.
pub fn read_config(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&path.display().to_string(), &text)
}

/// Read a file that must provide `[coefficients]` (for example one written
/// by `calibrate --out`).
pub fn read_coefficients(path: &Path) -> Result<CostCoefficients> {
    read_config(path)?.require_coefficients()
}

/// Write `coefficients` as a `[coefficients]` section, one key per line.
/// Values use the shortest decimal form that parses back to the same float,
/// so a write/read cycle is lossless.
pub fn write_coefficients(path: &Path, coefficients: &CostCoefficients) -> Result<()> {
    let mut text = String::from("[coefficients]\n");
    for (name, value) in coefficients.named_fields() {
        text.push_str(&format!("{name} = {value}\n"));
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// One `key = value` line.
struct Entry {
    line: usize,
    key: String,
    value: String,
}

/// One parsed section.
struct Section {
    header_line: usize,
    entries: Vec<Entry>,
}

impl Section {
    /// Reject keys outside `allowed` (with the offending line).
    fn check_keys(&self, path: &str, allowed: &[&str]) -> Result<()> {
        for entry in &self.entries {
            if !allowed.contains(&entry.key.as_str()) {
                return Err(Error::Parse {
                    path: path.to_string(),
                    line: entry.line,
                    message: format!(
                        "unknown key `{}` (expected one of: {})",
                        entry.key,
                        allowed.join(", ")
                    ),
                });
            }
        }
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|entry| entry.key == key)
    }

    /// Fetch a required key or fail pointing at the section header.
    fn require<'a>(&'a self, path: &str, section: &str, key: &str) -> Result<&'a Entry> {
        self.get(key).ok_or_else(|| Error::Parse {
            path: path.to_string(),
            line: self.header_line,
            message: format!("missing key `{key}` in [{section}]"),
        })
    }
}

/// Parse a float value, reporting the key and line on failure.
fn number(path: &str, entry: &Entry) -> Result<f64> {
    entry.value.parse().map_err(|_| Error::Parse {
        path: path.to_string(),
        line: entry.line,
        message: format!("key `{}`: `{}` is not a number", entry.key, entry.value),
    })
}

const RAW_FLOW_KEYS: [&str; 4] = ["f_enter", "f_exit", "f2", "f1"];
const NORMALIZED_FLOW_KEYS: [&str; 3] = ["n_enter", "n_exit", "n2"];
const WEIGHT_KEYS: [&str; 6] = ["alpha", "beta", "omega", "gamma", "rho", "delta"];
const UNIT_COST_KEYS: [&str; 4] = ["c1_t", "c2_t", "c1_m", "c2_m"];

/// Parse configuration text; `label` names the source in diagnostics.
pub fn parse_config(label: &str, text: &str) -> Result<ConfigFile> {
    let parse_error = |line: usize, message: String| Error::Parse {
        path: label.to_string(),
        line,
        message,
    };

    let mut flows_section: Option<Section> = None;
    let mut coefficients_section: Option<Section> = None;
    let mut options_section: Option<Section> = None;
    let mut current: Option<&mut Section> = None;

    for (index, raw_line) in text.lines().enumerate() {
        let line_no = index + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return Err(parse_error(line_no, "section header must close with `]`".into()));
            };
            let slot = match name {
                "flows" => &mut flows_section,
                "coefficients" => &mut coefficients_section,
                "options" => &mut options_section,
                other => {
                    return Err(parse_error(
                        line_no,
                        format!(
                            "unknown section `[{other}]` (expected [flows], [coefficients], \
                             or [options])"
                        ),
                    ))
                }
            };
            if slot.is_some() {
                return Err(parse_error(line_no, format!("duplicate section `[{name}]`")));
            }
            *slot = Some(Section { header_line: line_no, entries: Vec::new() });
            current = slot.as_mut();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(parse_error(line_no, "expected `key = value`".into()));
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(parse_error(line_no, "expected `key = value`".into()));
        }
        let Some(section) = current.as_deref_mut() else {
            return Err(parse_error(line_no, format!("key `{key}` appears outside any section")));
        };
        if let Some(previous) = section.get(key) {
            return Err(parse_error(
                line_no,
                format!("duplicate key `{key}` (first set on line {})", previous.line),
            ));
        }
        section.entries.push(Entry {
            line: line_no,
            key: key.to_string(),
            value: value.to_string(),
        });
    }

    let flows = flows_section
        .as_ref()
        .map(|section| parse_flows(label, section))
        .transpose()?;
    let coefficients = coefficients_section
        .as_ref()
        .map(|section| parse_coefficients(label, section))
        .transpose()?;
    let seed = options_section
        .as_ref()
        .map(|section| parse_options(label, section))
        .transpose()?
        .flatten();

    Ok(ConfigFile { path: label.to_string(), flows, coefficients, seed })
}

fn parse_flows(path: &str, section: &Section) -> Result<FlowConfiguration> {
    let allowed: Vec<&str> =
        RAW_FLOW_KEYS.iter().chain(&NORMALIZED_FLOW_KEYS).copied().collect();
    section.check_keys(path, &allowed)?;
    let has_raw = RAW_FLOW_KEYS.iter().any(|key| section.get(key).is_some());
    let has_normalized = NORMALIZED_FLOW_KEYS.iter().any(|key| section.get(key).is_some());
    match (has_raw, has_normalized) {
        (true, true) => Err(Error::Parse {
            path: path.to_string(),
            line: section.header_line,
            message: "provide either raw flows (f_*) or normalized shares (n_*), not both"
                .to_string(),
        }),
        (false, false) => Err(Error::Parse {
            path: path.to_string(),
            line: section.header_line,
            message: "section [flows] is empty".to_string(),
        }),
        (true, false) => {
            let mut values = [0.0; 4];
            for (slot, key) in values.iter_mut().zip(RAW_FLOW_KEYS) {
                *slot = number(path, section.require(path, "flows", key)?)?;
            }
            let [f_enter, f_exit, f2, f1] = values;
            FlowRates::new(f_enter, f_exit, f2, f1)?.normalize()
        }
        (false, true) => {
            let mut values = [0.0; 3];
            for (slot, key) in values.iter_mut().zip(NORMALIZED_FLOW_KEYS) {
                *slot = number(path, section.require(path, "flows", key)?)?;
            }
            let [n_enter, n_exit, n2] = values;
            FlowConfiguration::new(n_enter, n_exit, n2)
        }
    }
}

fn parse_coefficients(path: &str, section: &Section) -> Result<CostCoefficients> {
    let allowed: Vec<&str> = UNIT_COST_KEYS.iter().chain(&WEIGHT_KEYS).copied().collect();
    section.check_keys(path, &allowed)?;
    let mut weights = [0.0; 6];
    for (slot, key) in weights.iter_mut().zip(WEIGHT_KEYS) {
        *slot = number(path, section.require(path, "coefficients", key)?)?;
    }
    let mut unit_costs = [1.0; 4];
    for (slot, key) in unit_costs.iter_mut().zip(UNIT_COST_KEYS) {
        if let Some(entry) = section.get(key) {
            *slot = number(path, entry)?;
        }
    }
    let [alpha, beta, omega, gamma, rho, delta] = weights;
    let [c1_t, c2_t, c1_m, c2_m] = unit_costs;
    CostCoefficients::new(c1_t, c2_t, c1_m, c2_m, alpha, beta, omega, gamma, rho, delta)
}

fn parse_options(path: &str, section: &Section) -> Result<Option<u64>> {
    section.check_keys(path, &["seed"])?;
    section
        .get("seed")
        .map(|entry| {
            entry.value.parse::<u64>().map_err(|_| Error::Parse {
                path: path.to_string(),
                line: entry.line,
                message: format!(
                    "key `seed`: `{}` is not a non-negative integer",
                    entry.value
                ),
            })
        })
        .transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = "\
# reference setup
[flows]
f_enter = 200
f_exit = 200
f2 = 200
f1 = 800

[coefficients]
alpha = 1.255
beta = 1.138
omega = 1.0
gamma = 2.384
rho = 1.0
delta = 3.094

[options]
seed = 7
";

    #[test]
    fn parses_a_full_raw_flow_config() {
        let config = parse_config("test.ini", FULL).unwrap();
        let flows = config.require_flows().unwrap();
        assert!((flows.n_enter() - 1.0 / 3.0).abs() < 1e-15);
        let coefficients = config.require_coefficients().unwrap();
        assert_eq!(coefficients, CostCoefficients::reference());
        assert_eq!(config.seed, Some(7));
    }

    #[test]
    fn parses_normalized_flows_and_optional_unit_costs() {
        let text = "\
[flows]
n_enter = 0.5
n_exit = 0.25
n2 = 0.25
[coefficients]
alpha = 2
beta = 2
omega = 2
gamma = 2
rho = 2
delta = 2
c2_m = 3
";
        let config = parse_config("test.ini", text).unwrap();
        let flows = config.require_flows().unwrap();
        assert_eq!(flows.n_enter(), 0.5);
        let coefficients = config.require_coefficients().unwrap();
        assert_eq!(coefficients.c1_t, 1.0, "unit costs default to 1");
        assert_eq!(coefficients.c2_m, 3.0);
        assert_eq!(config.seed, None);
    }

    fn parse_err(text: &str) -> Error {
        parse_config("test.ini", text).unwrap_err()
    }

    #[test]
    fn rejects_mixed_flow_styles() {
        let error = parse_err("[flows]\nf_enter = 200\nn_exit = 0.3\n");
        match error {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 1);
                assert!(message.contains("not both"), "message: {message}");
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn missing_required_key_is_named() {
        let text = "\
[coefficients]
alpha = 1.255
beta = 1.138
omega = 1.0
rho = 1.0
delta = 3.094
";
        let error = parse_err(text);
        assert!(error.is_parse());
        match error {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 1);
                assert!(message.contains("`gamma`"), "message: {message}");
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn structural_errors_carry_their_line() {
        assert!(matches!(
            parse_err("[flows]\nf_enter = 200\nf_enter = 300\n"),
            Error::Parse { line: 3, .. }
        ));
        assert!(matches!(parse_err("[weights]\n"), Error::Parse { line: 1, .. }));
        assert!(matches!(
            parse_err("[options]\nspeed = 3\n"),
            Error::Parse { line: 2, .. }
        ));
        assert!(matches!(
            parse_err("[options]\nseed = -4\n"),
            Error::Parse { line: 2, .. }
        ));
        assert!(matches!(parse_err("alpha = 1\n"), Error::Parse { line: 1, .. }));
        assert!(matches!(parse_err("[flows\n"), Error::Parse { line: 1, .. }));
        assert!(matches!(
            parse_err("[flows]\nf_enter 200\n"),
            Error::Parse { line: 2, .. }
        ));
        assert!(matches!(
            parse_err("[flows]\nn_enter = zero\nn_exit = 0.3\nn2 = 0.2\n"),
            Error::Parse { line: 2, .. }
        ));
    }

    #[test]
    fn invariant_violations_are_domain_errors_not_parse_errors() {
        // Parses fine, but the value breaks a model invariant: exit code 1
        // territory, so is_parse() must be false.
        let error = parse_err("[flows]\nn_enter = 0.5\nn_exit = 0.4\nn2 = 0.3\n");
        assert!(!error.is_parse(), "off-simplex is a domain error, got {error}");
        let error = parse_err(
            "[coefficients]\nalpha = 0\nbeta = 1\nomega = 1\ngamma = 1\nrho = 1\ndelta = 1\n",
        );
        assert!(!error.is_parse(), "non-positive coefficient is a domain error");
    }

    #[test]
    fn missing_sections_are_reported_on_demand() {
        let config = parse_config("test.ini", "[options]\nseed = 3\n").unwrap();
        assert!(config.require_flows().unwrap_err().is_parse());
        assert!(config.require_coefficients().unwrap_err().is_parse());
    }

    #[test]
    fn coefficients_round_trip_through_a_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("coeffs.ini");
        let original = CostCoefficients::new(
            1.0,
            1.25,
            0.75,
            1.0,
            1.2345678901234,
            2.0 / 3.0,
            1.0,
            2.384,
            19.999999,
            3.094,
        )
        .unwrap();
        write_coefficients(&path, &original).unwrap();
        let back = read_coefficients(&path).unwrap();
        assert_eq!(back, original, "write/read must be lossless");
    }
}
