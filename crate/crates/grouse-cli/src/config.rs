//! Experiment configuration: a flat key-value text format, command-line
//! overrides, and validation.
//!
//! Files hold one `key = value` pair per line; `#` starts a comment and
//! blank lines are ignored. Every key has a default, so a config names only
//! what it changes. Serialization emits every key in a fixed order with
//! round-trip float precision, and parsing that output reproduces the
//! original value exactly.

use std::fmt::Write as _;
use std::path::Path;

use grouse_core::{RankPolicy, SamplingKind, StepSchedule, TrackerConfig};

use crate::error::{CliError, Result};

/// Which protocol a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Fixed planted subspace.
    Static,
    /// Planted subspace replaced at listed steps.
    Switching,
    /// Planted subspace spinning at a constant rate.
    Rotating,
    /// Vectors ingested from a stream CSV file.
    StreamCsv,
    /// Low-rank completion of a synthetically sampled matrix.
    Completion,
    /// Per-step timing across ambient dimensions.
    Bench,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Static => "static",
            ExperimentKind::Switching => "switching",
            ExperimentKind::Rotating => "rotating",
            ExperimentKind::StreamCsv => "stream_csv",
            ExperimentKind::Completion => "completion",
            ExperimentKind::Bench => "bench",
        }
    }

    fn parse(value: &str) -> Option<Self> {
        Some(match value {
            "static" => ExperimentKind::Static,
            "switching" => ExperimentKind::Switching,
            "rotating" => ExperimentKind::Rotating,
            "stream_csv" => ExperimentKind::StreamCsv,
            "completion" => ExperimentKind::Completion,
            "bench" => ExperimentKind::Bench,
            _ => return None,
        })
    }
}

/// Complete description of one run. Every field is concrete; unused fields
/// keep their defaults so serialization stays total.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub experiment: ExperimentKind,
    /// Ambient dimension for synthetic streams.
    pub n: usize,
    /// Tracked rank (and planted rank for synthetic data).
    pub d: usize,
    /// Fraction of coordinates observed per step (or entries, for
    /// completion).
    pub density: f64,
    pub sampling: SamplingKind,
    /// Standard deviation of additive Gaussian noise on observed values.
    pub noise_std: f64,
    /// Number of vectors presented (capped by file length for stream_csv).
    pub horizon: u64,
    /// Telemetry cadence: one row per this many steps.
    pub report_every: u64,
    pub schedule: ScheduleKind,
    /// Constant of the step schedule (`C/t` or `C`).
    pub step_c: f64,
    pub min_samples_factor: f64,
    pub residual_tol: f64,
    pub rank_policy: RankPolicy,
    /// Master seed; stream, mask, and initial-basis streams are derived
    /// from it.
    pub seed: u64,
    /// Steps at which a switching stream replaces its subspace.
    pub switch_steps: Vec<u64>,
    /// Rotation rate for rotating streams.
    pub delta: f64,
    /// Stream CSV path (stream_csv only; empty means unset).
    pub input: String,
    /// Passes over the columns (completion only).
    pub passes: usize,
    /// Matrix shape (completion only).
    pub rows: usize,
    pub cols: usize,
    /// When non-empty, the masked stream is dumped to this file name inside
    /// the output directory.
    pub dump_stream: String,
    /// When non-zero, the estimated and true bases are dumped every this
    /// many steps.
    pub dump_basis_every: u64,
    /// Output directory used when neither `--out` nor the environment
    /// redirect is given.
    pub output_path: String,
    /// Ambient dimensions timed by the bench experiment.
    pub bench_ns: Vec<usize>,
    pub bench_steps: u64,
    pub bench_warmup: u64,
}

/// Step schedule shape; combined with [`ExperimentSpec::step_c`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    Diminishing,
    Constant,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::Static,
            n: 700,
            d: 10,
            density: 0.17,
            sampling: SamplingKind::FixedSize,
            noise_std: 0.0,
            horizon: 14000,
            report_every: 1,
            schedule: ScheduleKind::Diminishing,
            step_c: 1.0,
            min_samples_factor: 1.0,
            residual_tol: 1e-14,
            rank_policy: RankPolicy::Skip,
            seed: 1,
            switch_steps: Vec::new(),
            delta: 1e-5,
            input: String::new(),
            passes: 10,
            rows: 700,
            cols: 700,
            dump_stream: String::new(),
            dump_basis_every: 0,
            output_path: "out".to_string(),
            bench_ns: vec![500, 1000, 2000, 4000],
            bench_steps: 1500,
            bench_warmup: 200,
        }
    }
}

fn parse_num<T: std::str::FromStr>(field: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::config(field, format!("cannot parse `{value}`: {e}")))
}

fn parse_num_list<T: std::str::FromStr>(field: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|part| parse_num(field, part.trim()))
        .collect()
}

fn join_list<T: std::fmt::Display>(items: &[T]) -> String {
    let mut out = String::new();
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{item}");
    }
    out
}

impl ExperimentSpec {
    /// Parses a config file's contents. Keys may appear in any order; each
    /// key at most once.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut spec = ExperimentSpec::default();
        let mut seen = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::config(
                    line.to_string(),
                    format!("line {}: expected `key = value`", idx + 1),
                )
            })?;
            let key = key.trim();
            if seen.iter().any(|k| k == key) {
                return Err(CliError::config(
                    key,
                    format!("duplicated on line {}", idx + 1),
                ));
            }
            seen.push(key.to_string());
            spec.set_key(key, value.trim())?;
        }
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("reading config {}", path.display()), e))?;
        Self::parse_str(&text)
    }

    /// Applies one `key=value` override (the `--set` flag).
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment.split_once('=').ok_or_else(|| {
            CliError::config(assignment, "override must have the form key=value")
        })?;
        self.set_key(key.trim(), value.trim())
    }

    /// Sets one field from its textual form. Unknown keys and unparseable
    /// values are errors naming the field.
    pub fn set_key(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "experiment" => {
                self.experiment = ExperimentKind::parse(value).ok_or_else(|| {
                    CliError::config(
                        key,
                        format!(
                            "unknown experiment `{value}` (expected static, switching, \
                             rotating, stream_csv, completion, or bench)"
                        ),
                    )
                })?;
            }
            "n" => self.n = parse_num(key, value)?,
            "d" => self.d = parse_num(key, value)?,
            "density" => self.density = parse_num(key, value)?,
            "sampling" => {
                self.sampling = match value {
                    "fixed" => SamplingKind::FixedSize,
                    "bernoulli" => SamplingKind::Bernoulli,
                    _ => {
                        return Err(CliError::config(
                            key,
                            format!("unknown sampling `{value}` (expected fixed or bernoulli)"),
                        ))
                    }
                };
            }
            "noise_std" => self.noise_std = parse_num(key, value)?,
            "horizon" => self.horizon = parse_num(key, value)?,
            "report_every" => self.report_every = parse_num(key, value)?,
            "schedule" => {
                self.schedule = match value {
                    "diminishing" => ScheduleKind::Diminishing,
                    "constant" => ScheduleKind::Constant,
                    _ => {
                        return Err(CliError::config(
                            key,
                            format!(
                                "unknown schedule `{value}` (expected diminishing or constant)"
                            ),
                        ))
                    }
                };
            }
            "step_c" => self.step_c = parse_num(key, value)?,
            "min_samples_factor" => self.min_samples_factor = parse_num(key, value)?,
            "residual_tol" => self.residual_tol = parse_num(key, value)?,
            "rank_policy" => {
                self.rank_policy = match value {
                    "skip" => RankPolicy::Skip,
                    "min_norm" => RankPolicy::MinNorm,
                    _ => {
                        return Err(CliError::config(
                            key,
                            format!("unknown rank_policy `{value}` (expected skip or min_norm)"),
                        ))
                    }
                };
            }
            "seed" => self.seed = parse_num(key, value)?,
            "switch_steps" => self.switch_steps = parse_num_list(key, value)?,
            "delta" => self.delta = parse_num(key, value)?,
            "input" => self.input = value.to_string(),
            "passes" => self.passes = parse_num(key, value)?,
            "rows" => self.rows = parse_num(key, value)?,
            "cols" => self.cols = parse_num(key, value)?,
            "dump_stream" => self.dump_stream = value.to_string(),
            "dump_basis_every" => self.dump_basis_every = parse_num(key, value)?,
            "output_path" => self.output_path = value.to_string(),
            "bench_ns" => self.bench_ns = parse_num_list(key, value)?,
            "bench_steps" => self.bench_steps = parse_num(key, value)?,
            "bench_warmup" => self.bench_warmup = parse_num(key, value)?,
            _ => return Err(CliError::config(key, "unknown key")),
        }
        Ok(())
    }

    /// Serializes every field in a fixed order. `parse_str` of the output
    /// reproduces this value exactly, floats included.
    pub fn to_config_string(&self) -> String {
        let sampling = match self.sampling {
            SamplingKind::FixedSize => "fixed",
            SamplingKind::Bernoulli => "bernoulli",
        };
        let schedule = match self.schedule {
            ScheduleKind::Diminishing => "diminishing",
            ScheduleKind::Constant => "constant",
        };
        let rank_policy = match self.rank_policy {
            RankPolicy::Skip => "skip",
            RankPolicy::MinNorm => "min_norm",
        };
        let mut out = String::new();
        let _ = writeln!(out, "experiment = {}", self.experiment.as_str());
        let _ = writeln!(out, "n = {}", self.n);
        let _ = writeln!(out, "d = {}", self.d);
        let _ = writeln!(out, "density = {}", self.density);
        let _ = writeln!(out, "sampling = {sampling}");
        let _ = writeln!(out, "noise_std = {}", self.noise_std);
        let _ = writeln!(out, "horizon = {}", self.horizon);
        let _ = writeln!(out, "report_every = {}", self.report_every);
        let _ = writeln!(out, "schedule = {schedule}");
        let _ = writeln!(out, "step_c = {}", self.step_c);
        let _ = writeln!(out, "min_samples_factor = {}", self.min_samples_factor);
        let _ = writeln!(out, "residual_tol = {}", self.residual_tol);
        let _ = writeln!(out, "rank_policy = {rank_policy}");
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "switch_steps = {}", join_list(&self.switch_steps));
        let _ = writeln!(out, "delta = {}", self.delta);
        let _ = writeln!(out, "input = {}", self.input);
        let _ = writeln!(out, "passes = {}", self.passes);
        let _ = writeln!(out, "rows = {}", self.rows);
        let _ = writeln!(out, "cols = {}", self.cols);
        let _ = writeln!(out, "dump_stream = {}", self.dump_stream);
        let _ = writeln!(out, "dump_basis_every = {}", self.dump_basis_every);
        let _ = writeln!(out, "output_path = {}", self.output_path);
        let _ = writeln!(out, "bench_ns = {}", join_list(&self.bench_ns));
        let _ = writeln!(out, "bench_steps = {}", self.bench_steps);
        let _ = writeln!(out, "bench_warmup = {}", self.bench_warmup);
        out
    }

    /// Step schedule assembled from the shape and constant.
    pub fn step_schedule(&self) -> StepSchedule {
        match self.schedule {
            ScheduleKind::Diminishing => StepSchedule::Diminishing { c: self.step_c },
            ScheduleKind::Constant => StepSchedule::Constant { c: self.step_c },
        }
    }

    pub fn tracker_config(&self) -> TrackerConfig {
        TrackerConfig {
            schedule: self.step_schedule(),
            min_samples_factor: self.min_samples_factor,
            residual_tol: self.residual_tol,
            rank_policy: self.rank_policy,
        }
    }

    /// Seed of the generative stream.
    pub fn stream_seed(&self) -> u64 {
        self.seed
    }

    /// Seed of the mask stream (kept distinct from the vector stream).
    pub fn mask_seed(&self) -> u64 {
        self.seed ^ 0x6d61_736b // "mask"
    }

    /// Seed of the tracker's random initial basis.
    pub fn init_seed(&self) -> u64 {
        self.seed ^ 0x696e_6974 // "init"
    }

    /// Checks cross-field consistency for the chosen experiment, naming the
    /// offending field.
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(CliError::config("horizon", "must be at least 1"));
        }
        if self.report_every == 0 {
            return Err(CliError::config("report_every", "must be at least 1"));
        }
        if self.d == 0 {
            return Err(CliError::config("d", "rank must be at least 1"));
        }
        if !self.density.is_finite() || self.density <= 0.0 || self.density > 1.0 {
            return Err(CliError::config("density", "must lie in (0, 1]"));
        }
        if !self.step_c.is_finite() || self.step_c <= 0.0 {
            return Err(CliError::config("step_c", "must be positive"));
        }
        if !self.noise_std.is_finite() || self.noise_std < 0.0 {
            return Err(CliError::config("noise_std", "must be non-negative"));
        }
        match self.experiment {
            ExperimentKind::Static | ExperimentKind::Switching | ExperimentKind::Rotating => {
                if self.n <= self.d {
                    return Err(CliError::config("n", "must exceed d for synthetic streams"));
                }
                if self.experiment == ExperimentKind::Switching && self.switch_steps.is_empty() {
                    return Err(CliError::config(
                        "switch_steps",
                        "switching runs need at least one switch step",
                    ));
                }
                if self.experiment == ExperimentKind::Rotating
                    && (!self.delta.is_finite() || self.delta <= 0.0)
                {
                    return Err(CliError::config("delta", "must be positive"));
                }
            }
            ExperimentKind::StreamCsv => {
                if self.input.is_empty() {
                    return Err(CliError::config("input", "stream_csv runs need an input file"));
                }
            }
            ExperimentKind::Completion => {
                if self.passes == 0 {
                    return Err(CliError::config("passes", "must be at least 1"));
                }
                if self.rows == 0 || self.cols == 0 {
                    return Err(CliError::config("rows", "matrix shape must be non-empty"));
                }
                if self.d > self.rows.min(self.cols) {
                    return Err(CliError::config("d", "rank exceeds the matrix shape"));
                }
            }
            ExperimentKind::Bench => {
                if self.bench_ns.len() < 3 {
                    return Err(CliError::config("bench_ns", "need at least 3 dimensions"));
                }
                if self.bench_ns.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(CliError::config(
                        "bench_ns",
                        "dimensions must be strictly increasing",
                    ));
                }
                if self.bench_steps < 1000 {
                    return Err(CliError::config(
                        "bench_steps",
                        "timing needs at least 1000 measured steps",
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_text() {
        let spec = ExperimentSpec::default();
        let text = spec.to_config_string();
        let parsed = ExperimentSpec::parse_str(&text).unwrap();
        assert_eq!(spec, parsed);
    }

    #[test]
    fn non_default_values_round_trip_exactly() {
        let spec = ExperimentSpec {
            experiment: ExperimentKind::Switching,
            n: 701,
            density: 0.173_542_190_001,
            noise_std: 1e-3,
            schedule: ScheduleKind::Constant,
            step_c: 0.062_317,
            residual_tol: 3.5e-13,
            switch_steps: vec![3500, 7000, 10500],
            sampling: SamplingKind::Bernoulli,
            rank_policy: grouse_core::RankPolicy::MinNorm,
            input: "data/stream.csv".to_string(),
            bench_ns: vec![250, 500, 1000],
            ..ExperimentSpec::default()
        };
        let parsed = ExperimentSpec::parse_str(&spec.to_config_string()).unwrap();
        assert_eq!(spec, parsed);
    }

    #[test]
    fn parses_comments_blank_lines_and_spacing() {
        let text = "\n# a comment\n  experiment = rotating  \n\nd=7\n  delta =  0.001\n";
        let spec = ExperimentSpec::parse_str(text).unwrap();
        assert_eq!(spec.experiment, ExperimentKind::Rotating);
        assert_eq!(spec.d, 7);
        assert_eq!(spec.delta, 0.001);
        assert_eq!(spec.n, 700, "unset keys keep their defaults");
    }

    #[test]
    fn unknown_key_is_an_error_naming_the_field() {
        let err = ExperimentSpec::parse_str("subspace_dim = 5\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("subspace_dim"), "message was: {msg}");
    }

    #[test]
    fn bad_value_is_an_error_naming_the_field() {
        let err = ExperimentSpec::parse_str("horizon = soon\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("horizon") && msg.contains("soon"), "message was: {msg}");
        let err = ExperimentSpec::parse_str("experiment = sideways\n").unwrap_err();
        assert!(err.to_string().contains("experiment"));
    }

    #[test]
    fn duplicate_key_is_rejected() {
        let err = ExperimentSpec::parse_str("d = 5\nd = 6\n").unwrap_err();
        assert!(err.to_string().contains('d'), "{err}");
    }

    #[test]
    fn overrides_apply_in_order() {
        let mut spec = ExperimentSpec::parse_str("experiment = static\nstep_c = 80\n").unwrap();
        spec.apply_override("step_c=160").unwrap();
        spec.apply_override("seed = 99").unwrap();
        assert_eq!(spec.step_c, 160.0);
        assert_eq!(spec.seed, 99);
        assert!(spec.apply_override("step_c").is_err(), "missing `=` must fail");
        assert!(spec.apply_override("nope=1").is_err());
    }

    #[test]
    fn validation_names_the_inconsistent_field() {
        let spec = ExperimentSpec {
            experiment: ExperimentKind::Switching,
            ..ExperimentSpec::default()
        };
        let msg = spec.validate().unwrap_err().to_string();
        assert!(msg.contains("switch_steps"), "{msg}");

        let spec = ExperimentSpec {
            experiment: ExperimentKind::StreamCsv,
            ..ExperimentSpec::default()
        };
        let msg = spec.validate().unwrap_err().to_string();
        assert!(msg.contains("input"), "{msg}");

        let spec = ExperimentSpec { n: 5, ..ExperimentSpec::default() }; // d = 10 > n
        let msg = spec.validate().unwrap_err().to_string();
        assert!(msg.contains('n'), "{msg}");

        let spec = ExperimentSpec {
            experiment: ExperimentKind::Bench,
            bench_ns: vec![500, 500, 1000],
            ..ExperimentSpec::default()
        };
        let msg = spec.validate().unwrap_err().to_string();
        assert!(msg.contains("bench_ns"), "{msg}");
    }

    #[test]
    fn derived_seeds_are_distinct() {
        let spec = ExperimentSpec::default();
        let seeds = [spec.stream_seed(), spec.mask_seed(), spec.init_seed()];
        assert_ne!(seeds[0], seeds[1]);
        assert_ne!(seeds[0], seeds[2]);
        assert_ne!(seeds[1], seeds[2]);
    }
}
