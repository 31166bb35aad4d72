//! Output plumbing shared by every subcommand: stdout-or-file sinks, the
//! metadata comment block carried by each report, fixed-precision float
//! formatting, and the assertion-failure error type that selects exit codes.

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};

use anyhow::{Context, Result};

use crate::config::ExperimentConfig;

/// Format a float with 17 significant digits; parses back to the same bits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// A quantitative check written into the run failed. Distinguished from
/// operational errors so the process can exit with a dedicated status code.
#[derive(Debug)]
pub struct AssertionFailure(pub String);

impl fmt::Display for AssertionFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "assertion failed: {}", self.0)
    }
}

impl std::error::Error for AssertionFailure {}

/// Fail the run with an [`AssertionFailure`] unless `cond` holds.
pub fn check(cond: bool, msg: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(AssertionFailure(msg.into()).into())
    }
}

/// Where report bytes go: standard output, or a file given by `--out`.
pub enum Sink {
    Stdout(io::Stdout),
    File(BufWriter<File>),
}

impl Sink {
    pub fn open(out: &str) -> Result<Self> {
        if out == "-" {
            Ok(Sink::Stdout(io::stdout()))
        } else {
            let file =
                File::create(out).with_context(|| format!("creating output file {out}"))?;
            Ok(Sink::File(BufWriter::new(file)))
        }
    }

    pub fn finish(mut self) -> Result<()> {
        self.flush()?;
        Ok(())
    }
}

impl Write for Sink {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        match self {
            Sink::Stdout(s) => s.write(buf),
            Sink::File(f) => f.write(buf),
        }
    }

    fn flush(&mut self) -> io::Result<()> {
        match self {
            Sink::Stdout(s) => s.flush(),
            Sink::File(f) => f.flush(),
        }
    }
}

/// The comment block opening every CSV report: tool and library versions, the
/// command, the hash of the effective configuration, the seed, then
/// command-specific entries. Nothing here depends on the clock, so reruns
/// with the same inputs are byte-identical.
pub fn write_meta(
    w: &mut impl Write,
    command: &str,
    config: &ExperimentConfig,
    extra: &[(&str, String)],
) -> Result<()> {
    writeln!(w, "# lamina-cli: {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(w, "# lamina-core: {}", lamina_core::VERSION)?;
    writeln!(w, "# command: {command}")?;
    writeln!(w, "# config-sha256: {}", config.sha256_hex())?;
    writeln!(w, "# seed: {}", config.map.seed)?;
    for (key, value) in extra {
        writeln!(w, "# {key}: {value}")?;
    }
    Ok(())
}

/// The same provenance block as [`write_meta`], as the `meta` object of a
/// JSON report.
pub fn meta_json(command: &str, config: &ExperimentConfig) -> serde_json::Value {
    serde_json::json!({
        "lamina-cli": env!("CARGO_PKG_VERSION"),
        "lamina-core": lamina_core::VERSION,
        "command": command,
        "config-sha256": config.sha256_hex(),
        "seed": config.map.seed,
    })
}

/// Write a JSON report: pretty-printed, trailing newline, keys sorted by the
/// serializer so reruns are byte-identical.
pub fn write_json(w: &mut impl Write, value: &serde_json::Value) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)?;
    Ok(())
}
