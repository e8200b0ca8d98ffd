//! Run configuration from a TOML document and command-line overrides.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Deserialize;
use twistsim_core::{ExperimentSpec, Sampling, Scheme, SequenceKind, Tolerances};

use crate::error::{CliError, Result};

pub const DEFAULT_N_CYCLES: usize = 50;
pub const DEFAULT_CHI: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    ScheduleText,
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::ScheduleText => "schedule-text",
        })
    }
}

impl FromStr for OutputFormat {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "schedule-text" | "schedule" | "text" => Ok(OutputFormat::ScheduleText),
            _ => Err(CliError::Validation(format!(
                "format: expected 'csv' or 'schedule-text', got '{s}'"
            ))),
        }
    }
}

/// Every field optional: a config document, a set of flags, or both merged.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub scheme: Option<String>,
    pub n_spins: Option<usize>,
    pub n_cycles: Option<usize>,
    pub chi: Option<f64>,
    pub t_total: Option<f64>,
    pub sampling: Option<String>,
    pub order: Option<u32>,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
    pub strictness: Option<f64>,
}

impl PartialConfig {
    /// Fields set in `over` replace those in `self`.
    pub fn overlay(self, over: PartialConfig) -> PartialConfig {
        PartialConfig {
            scheme: over.scheme.or(self.scheme),
            n_spins: over.n_spins.or(self.n_spins),
            n_cycles: over.n_cycles.or(self.n_cycles),
            chi: over.chi.or(self.chi),
            t_total: over.t_total.or(self.t_total),
            sampling: over.sampling.or(self.sampling),
            order: over.order.or(self.order),
            out: over.out.or(self.out),
            format: over.format.or(self.format),
            strictness: over.strictness.or(self.strictness),
        }
    }

    pub fn scheme(&self) -> Result<Scheme> {
        let raw = self
            .scheme
            .as_deref()
            .ok_or_else(|| CliError::Validation("missing required key 'scheme'".into()))?;
        let scheme: Scheme = raw.parse().map_err(|e| field_error("scheme", e))?;
        match (scheme, self.order) {
            (_, None) => Ok(scheme),
            (Scheme::Sequence(SequenceKind::General(_)), Some(order)) if raw.eq_ignore_ascii_case("general") => {
                SequenceKind::General(order)
                    .period_in_delta_t()
                    .map_err(|e| field_error("order", e))?;
                Ok(Scheme::Sequence(SequenceKind::General(order)))
            }
            (Scheme::Sequence(kind), Some(order)) if kind.order() == order => Ok(scheme),
            (_, Some(order)) => Err(CliError::Validation(format!(
                "order: {order} conflicts with scheme '{raw}'"
            ))),
        }
    }

    pub fn n_spins(&self) -> Result<usize> {
        match self.n_spins {
            None => Err(CliError::Validation("missing required key 'n_spins'".into())),
            Some(0) => Err(CliError::Validation("n_spins: must be at least 1".into())),
            Some(n) => Ok(n),
        }
    }

    pub fn n_cycles(&self) -> Result<usize> {
        match self.n_cycles.unwrap_or(DEFAULT_N_CYCLES) {
            0 => Err(CliError::Validation("n_cycles: must be at least 1".into())),
            n => Ok(n),
        }
    }

    pub fn chi(&self) -> Result<f64> {
        positive("chi", self.chi.unwrap_or(DEFAULT_CHI))
    }

    pub fn t_total(&self) -> Result<Option<f64>> {
        self.t_total.map(|t| positive("t_total", t)).transpose()
    }

    pub fn sampling(&self) -> Result<Sampling> {
        match &self.sampling {
            None => Ok(Sampling::Stroboscopic),
            Some(s) => s.parse().map_err(|e| field_error("sampling", e)),
        }
    }

    pub fn format(&self) -> Result<OutputFormat> {
        self.format.as_deref().map_or(Ok(OutputFormat::default()), str::parse)
    }

    pub fn tolerances(&self) -> Result<Tolerances> {
        Ok(match self.strictness {
            None => Tolerances::default(),
            Some(f) => Tolerances::with_strictness(positive("strictness", f)?),
        })
    }
}

fn positive(field: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Validation(format!(
            "{field}: must be positive and finite, got {v}"
        )))
    }
}

fn field_error(field: &str, e: impl fmt::Display) -> CliError {
    CliError::Validation(format!("{field}: {e}"))
}

/// A validated run. `t_total` is `None` until resolved against the optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scheme: Scheme,
    pub n_spins: usize,
    pub n_cycles: usize,
    pub chi: f64,
    pub t_total: Option<f64>,
    pub sampling: Sampling,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub tolerances: Tolerances,
}

impl RunConfig {
    pub fn from_partial(p: &PartialConfig) -> Result<RunConfig> {
        Ok(RunConfig {
            scheme: p.scheme()?,
            n_spins: p.n_spins()?,
            n_cycles: p.n_cycles()?,
            chi: p.chi()?,
            t_total: p.t_total()?,
            sampling: p.sampling()?,
            out: p.out.clone(),
            format: p.format()?,
            tolerances: p.tolerances()?,
        })
    }

    pub fn spec(&self, t_total: f64) -> ExperimentSpec {
        ExperimentSpec {
            scheme: self.scheme,
            n_spins: self.n_spins,
            n_cycles: self.n_cycles,
            chi: self.chi,
            t_total,
            sampling: self.sampling,
        }
    }
}

/// Parse a flat TOML table into a partial configuration.
pub fn parse_partial(document: &str) -> Result<PartialConfig> {
    toml::from_str(document).map_err(|e| {
        let key = e.span().and_then(|span| key_at(document, span.start));
        CliError::Validation(match key {
            Some(key) => format!("config: {key}: {}", e.message()),
            None => format!("config: {}", e.message()),
        })
    })
}

/// Key of the `key = value` line containing byte `offset`.
fn key_at(document: &str, offset: usize) -> Option<&str> {
    let start = document.get(..offset)?.rfind('\n').map_or(0, |i| i + 1);
    let line = document[start..].lines().next()?;
    let (key, _) = line.split_once('=')?;
    Some(key.trim()).filter(|k| !k.is_empty())
}

/// Parse and validate a complete run configuration.
pub fn parse_config(document: &str) -> Result<RunConfig> {
    RunConfig::from_partial(&parse_partial(document)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn validation(r: Result<RunConfig>) -> String {
        match r {
            Err(CliError::Validation(m)) => m,
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_document() {
        let c = parse_config("scheme = \"schemeA\"\nn_spins = 1250\nn_cycles = 50\n").unwrap();
        assert_eq!(c.scheme, Scheme::Sequence(SequenceKind::SchemeA));
        assert_eq!(c.n_spins, 1250);
        assert_eq!(c.n_cycles, 50);
        assert_eq!(c.chi, 1.0);
        assert_eq!(c.t_total, None);
        assert_eq!(c.sampling, Sampling::Stroboscopic);
        assert_eq!(c.format, OutputFormat::Csv);
    }

    #[test]
    fn full_document() {
        let doc = r#"
scheme = "general"
order = 6
n_spins = 20
n_cycles = 3
chi = 2.5
t_total = 0.01
sampling = "fine(4)"
out = "trace.csv"
format = "csv"
strictness = 10.0
"#;
        let c = parse_config(doc).unwrap();
        assert_eq!(c.scheme, Scheme::Sequence(SequenceKind::General(6)));
        assert_eq!(c.sampling, Sampling::Fine(4));
        assert_eq!(c.t_total, Some(0.01));
        assert_eq!(c.out, Some(PathBuf::from("trace.csv")));
        assert_eq!(c.tolerances, Tolerances::with_strictness(10.0));
    }

    #[test]
    fn zero_spins_names_field() {
        let m = validation(parse_config("scheme = \"schemeA\"\nn_spins = 0\n"));
        assert!(m.contains("n_spins"), "{m}");
    }

    #[test]
    fn unknown_key_is_listed() {
        let m = validation(parse_config(
            "scheme = \"schemeA\"\nn_spins = 4\npulse_shape = \"gauss\"\n",
        ));
        assert!(m.contains("pulse_shape"), "{m}");
    }

    #[test]
    fn missing_and_mistyped() {
        let m = validation(parse_config("n_spins = 4\n"));
        assert!(m.contains("scheme"), "{m}");
        let m = validation(parse_config("scheme = \"schemeA\"\n"));
        assert!(m.contains("n_spins"), "{m}");
        let m = validation(parse_config("scheme = \"schemeA\"\nn_spins = \"many\"\n"));
        assert!(m.contains("n_spins") || m.contains("integer"), "{m}");
        let m = validation(parse_config("scheme = \"schemeA\"\nn_spins = -3\n"));
        assert!(!m.is_empty());
    }

    #[test]
    fn integer_chi_is_accepted() {
        let c = parse_config("scheme = \"liu1\"\nn_spins = 4\nchi = 2\n");
        assert_eq!(c.unwrap().chi, 2.0);
    }

    #[test]
    fn bad_values() {
        for doc in [
            "scheme = \"schemeA\"\nn_spins = 4\nn_cycles = 0\n",
            "scheme = \"schemeA\"\nn_spins = 4\nchi = -1.0\n",
            "scheme = \"schemeA\"\nn_spins = 4\nt_total = 0.0\n",
            "scheme = \"schemeA\"\nn_spins = 4\nsampling = \"fine(0)\"\n",
            "scheme = \"schemeA\"\nn_spins = 4\nformat = \"json\"\n",
            "scheme = \"schemeA\"\nn_spins = 4\norder = 4\n",
            "scheme = \"general\"\nn_spins = 4\norder = 5\n",
            "scheme = \"warp\"\nn_spins = 4\n",
            "scheme = \"schemeA\"\nn_spins = 4\nstrictness = 0.0\n",
        ] {
            validation(parse_config(doc));
        }
    }

    #[test]
    fn matching_order_is_accepted() {
        let c = parse_config("scheme = \"schemeB\"\nn_spins = 4\norder = 4\n").unwrap();
        assert_eq!(c.scheme, Scheme::Sequence(SequenceKind::SchemeB));
    }

    #[test]
    fn overlay_prefers_flags() {
        let file = parse_partial("scheme = \"schemeA\"\nn_spins = 10\nchi = 3.0\n").unwrap();
        let flags = PartialConfig {
            n_spins: Some(20),
            ..Default::default()
        };
        let merged = file.overlay(flags);
        assert_eq!(merged.n_spins, Some(20));
        assert_eq!(merged.chi, Some(3.0));
        assert_eq!(merged.scheme.as_deref(), Some("schemeA"));
    }
}
