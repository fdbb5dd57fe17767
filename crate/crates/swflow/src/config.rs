//! INI-style run configuration: strict parsing (unknown keys rejected, every
//! error names the key and line) and an exact serializer so a parsed config
//! round-trips.

use std::path::PathBuf;

use crate::clifford::fiber_dimension;
use crate::diagnostics::csv::fmt_f64;
use crate::error::{Result, SwError};
use crate::fields::{InitKind, InitialDataSpec};
use crate::flow::Scheme;

/// Fully resolved configuration of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub m: usize,
    pub n: usize,
    pub length: f64,
    pub s_const: f64,
    /// None = choose from the chirality convention (half fiber in even
    /// dimension, full fiber in odd).
    pub fiber_dim: Option<usize>,
    pub integrator: Scheme,
    pub cfl: f64,
    pub t_end: f64,
    pub snapshot_every: usize,
    pub init: InitialDataSpec,
    pub out_dir: PathBuf,
}

impl RunConfig {
    /// Spinor fiber dimension after applying the `auto` rule.
    pub fn resolved_fiber(&self) -> Result<usize> {
        match self.fiber_dim {
            Some(n) => Ok(n),
            None => fiber_dimension(self.m, self.m % 2 == 0),
        }
    }
}

fn err(line: usize, key: &str, msg: impl std::fmt::Display) -> SwError {
    SwError::Config(format!("line {line}: key \"{key}\": {msg}"))
}

struct RawEntry {
    line: usize,
    value: String,
    used: bool,
}

struct RawConfig {
    entries: std::collections::BTreeMap<(String, String), RawEntry>,
}

impl RawConfig {
    fn take(&mut self, section: &str, key: &str) -> Option<(usize, String)> {
        self.entries
            .get_mut(&(section.to_string(), key.to_string()))
            .map(|e| {
                e.used = true;
                (e.line, e.value.clone())
            })
    }

    fn parse_num<T: std::str::FromStr>(
        &mut self,
        section: &str,
        key: &str,
        default: Option<T>,
    ) -> Result<T> {
        match self.take(section, key) {
            Some((line, value)) => value
                .parse::<T>()
                .map_err(|_| err(line, key, format!("cannot parse \"{value}\""))),
            None => default.ok_or_else(|| {
                SwError::Config(format!("missing required key \"{key}\" in [{section}]"))
            }),
        }
    }
}

fn lex(text: &str) -> Result<RawConfig> {
    let mut entries = std::collections::BTreeMap::new();
    let mut section = String::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| {
                SwError::Config(format!("line {line_no}: unterminated section header"))
            })?;
            section = name.trim().to_string();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| SwError::Config(format!("line {line_no}: expected key = value")))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if section.is_empty() {
            return Err(SwError::Config(format!(
                "line {line_no}: key \"{key}\" before any [section]"
            )));
        }
        if entries
            .insert(
                (section.clone(), key.clone()),
                RawEntry {
                    line: line_no,
                    value,
                    used: false,
                },
            )
            .is_some()
        {
            return Err(SwError::Config(format!(
                "line {line_no}: duplicate key \"{key}\" in [{section}]"
            )));
        }
    }
    Ok(RawConfig { entries })
}

const KNOWN_SECTIONS: &[&str] = &["lattice", "model", "flow", "init", "output"];

/// Parse an INI-style configuration; defaults: S = 0, fiber auto, rk4,
/// cfl 0.1, snapshot_every 10, random_fourier init at amplitude 0.5 with
/// seed 0, max_mode 2, centered bubble geometry, output dir "out".
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut raw = lex(text)?;

    let m: usize = raw.parse_num("lattice", "m", None)?;
    let n: usize = raw.parse_num("lattice", "n", None)?;
    let length: f64 = raw.parse_num("lattice", "length", None)?;
    if let Some((line, _)) = raw
        .entries
        .get(&("lattice".into(), "m".into()))
        .map(|e| (e.line, ()))
    {
        if !(4..=7).contains(&m) {
            return Err(err(line, "m", format!("must lie in 4..=7, got {m}")));
        }
    }
    let n_line = raw.entries[&("lattice".into(), "n".into())].line;
    if n < 4 {
        return Err(err(n_line, "n", format!("must be at least 4, got {n}")));
    }
    let l_line = raw.entries[&("lattice".into(), "length".into())].line;
    if !(length > 0.0 && length.is_finite()) {
        return Err(err(
            l_line,
            "length",
            format!("must be positive, got {length}"),
        ));
    }

    let s_const: f64 = raw.parse_num("model", "s_const", Some(0.0))?;
    let fiber_dim = match raw.take("model", "fiber_dim") {
        None => None,
        Some((_, v)) if v == "auto" => None,
        Some((line, v)) => {
            let fd: usize = v.parse().map_err(|_| {
                err(
                    line,
                    "fiber_dim",
                    format!("expected auto or integer, got \"{v}\""),
                )
            })?;
            if fd == 0 {
                return Err(err(line, "fiber_dim", "must be positive"));
            }
            Some(fd)
        }
    };

    let integrator = match raw.take("flow", "integrator") {
        None => Scheme::Rk4,
        Some((_, v)) if v == "rk4" => Scheme::Rk4,
        Some((_, v)) if v == "euler" => Scheme::Euler,
        Some((line, v)) => {
            return Err(err(
                line,
                "integrator",
                format!("expected euler or rk4, got \"{v}\""),
            ))
        }
    };
    let cfl: f64 = raw.parse_num("flow", "cfl", Some(0.1))?;
    if let Some(e) = raw.entries.get(&("flow".into(), "cfl".into())) {
        // cfl > 1 is deliberately allowed: it is how instability experiments
        // drive the flow into a recorded blow-up.
        if !(cfl > 0.0 && cfl.is_finite()) {
            return Err(err(e.line, "cfl", format!("must be positive, got {cfl}")));
        }
    }
    let t_end: f64 = raw.parse_num("flow", "t_end", None)?;
    let t_line = raw.entries[&("flow".into(), "t_end".into())].line;
    if !(t_end >= 0.0) {
        return Err(err(
            t_line,
            "t_end",
            format!("must be non-negative, got {t_end}"),
        ));
    }
    let snapshot_every: usize = raw.parse_num("flow", "snapshot_every", Some(10))?;
    if snapshot_every == 0 {
        let line = raw.entries[&("flow".into(), "snapshot_every".into())].line;
        return Err(err(line, "snapshot_every", "must be at least 1"));
    }

    let kind = match raw.take("init", "kind") {
        None => InitKind::RandomFourier,
        Some((_, v)) if v == "random_fourier" => InitKind::RandomFourier,
        Some((_, v)) if v == "bubble" => InitKind::Bubble,
        Some((_, v)) if v == "maxwell_mode" => InitKind::MaxwellMode,
        Some((_, v)) if v == "constant" => InitKind::Constant,
        Some((line, v)) => {
            return Err(err(
                line,
                "kind",
                format!("expected random_fourier|bubble|maxwell_mode|constant, got \"{v}\""),
            ))
        }
    };
    let seed: u64 = raw.parse_num("init", "seed", Some(0))?;
    let amplitude: f64 = raw.parse_num("init", "amplitude", Some(0.5))?;
    if let Some(e) = raw.entries.get(&("init".into(), "amplitude".into())) {
        if !(amplitude >= 0.0) {
            return Err(err(e.line, "amplitude", "must be non-negative"));
        }
    }
    let max_mode: usize = raw.parse_num("init", "max_mode", Some(2))?;
    if max_mode == 0 {
        let line = raw.entries[&("init".into(), "max_mode".into())].line;
        return Err(err(line, "max_mode", "must be at least 1"));
    }
    let center = match raw.take("init", "center") {
        None => vec![length / 2.0; m],
        Some((line, v)) => {
            let parts: Result<Vec<f64>> = v
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .map_err(|_| err(line, "center", format!("bad component \"{p}\"")))
                })
                .collect();
            let parts = parts?;
            if parts.len() != m {
                return Err(err(
                    line,
                    "center",
                    format!("needs {m} components, got {}", parts.len()),
                ));
            }
            parts
        }
    };
    let width: f64 = raw.parse_num("init", "width", Some(length / 8.0))?;
    if let Some(e) = raw.entries.get(&("init".into(), "width".into())) {
        if !(width > 0.0 && width <= length / 4.0) {
            return Err(err(
                e.line,
                "width",
                format!("must lie in (0, L/4], got {width}"),
            ));
        }
    }

    let out_dir = match raw.take("output", "dir") {
        None => PathBuf::from("out"),
        Some((_, v)) => PathBuf::from(v),
    };

    // Reject anything we did not consume.
    for ((section, key), entry) in &raw.entries {
        if !entry.used {
            return Err(SwError::Config(format!(
                "line {}: unknown key \"{key}\" in [{section}]",
                entry.line
            )));
        }
        if !KNOWN_SECTIONS.contains(&section.as_str()) {
            return Err(SwError::Config(format!(
                "line {}: unknown section [{section}]",
                entry.line
            )));
        }
    }

    let config = RunConfig {
        m,
        n,
        length,
        s_const,
        fiber_dim,
        integrator,
        cfl,
        t_end,
        snapshot_every,
        init: InitialDataSpec {
            kind,
            amplitude,
            seed,
            max_mode,
            center,
            width,
        },
        out_dir,
    };
    config.resolved_fiber()?;
    Ok(config)
}

fn kind_name(kind: InitKind) -> &'static str {
    match kind {
        InitKind::RandomFourier => "random_fourier",
        InitKind::Bubble => "bubble",
        InitKind::MaxwellMode => "maxwell_mode",
        InitKind::Constant => "constant",
    }
}

/// Render a config in the exact format `parse_config` reads back.
pub fn serialize_config(config: &RunConfig) -> String {
    let fiber = match config.fiber_dim {
        None => "auto".to_string(),
        Some(n) => n.to_string(),
    };
    let center = config
        .init
        .center
        .iter()
        .map(|&v| fmt_f64(v))
        .collect::<Vec<_>>()
        .join(",");
    format!(
        "[lattice]\nm = {}\nn = {}\nlength = {}\n\n\
         [model]\ns_const = {}\nfiber_dim = {}\n\n\
         [flow]\nintegrator = {}\ncfl = {}\nt_end = {}\nsnapshot_every = {}\n\n\
         [init]\nkind = {}\nseed = {}\namplitude = {}\nmax_mode = {}\ncenter = {}\nwidth = {}\n\n\
         [output]\ndir = {}\n",
        config.m,
        config.n,
        fmt_f64(config.length),
        fmt_f64(config.s_const),
        fiber,
        config.integrator.name(),
        fmt_f64(config.cfl),
        fmt_f64(config.t_end),
        config.snapshot_every,
        kind_name(config.init.kind),
        config.init.seed,
        fmt_f64(config.init.amplitude),
        config.init.max_mode,
        center,
        fmt_f64(config.init.width),
        config.out_dir.display(),
    )
}
