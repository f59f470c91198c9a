//! Machine-readable run reports.
//!
//! The schema is fixed: top-level keys `config`, `estimates`, `identities`,
//! `monte_carlo`, `meta` are always present, with null for sections the
//! command does not produce. Every float is emitted with 17 significant
//! digits so parsing the report reconstructs the exact doubles; identity
//! residuals survive serialization.

use std::io;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter, Serializer};

use mixedbias::{EstimateBundle, IdentityReport, McReport};

use crate::config::RunConfig;

#[derive(Debug, Serialize)]
pub struct Meta {
    pub artifact: &'static str,
    pub cli_version: &'static str,
    pub lib_version: &'static str,
    pub timestamp_unix_seconds: u64,
}

impl Meta {
    fn now() -> Self {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Meta {
            artifact: "mixedbias-cli",
            cli_version: env!("CARGO_PKG_VERSION"),
            lib_version: mixedbias::VERSION,
            timestamp_unix_seconds: timestamp,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub config: RunConfig,
    pub estimates: Option<EstimateBundle>,
    pub identities: Option<IdentityReport>,
    pub monte_carlo: Option<Vec<McReport>>,
    pub meta: Meta,
}

impl Report {
    pub fn new(
        config: RunConfig,
        estimates: Option<EstimateBundle>,
        identities: Option<IdentityReport>,
        monte_carlo: Option<Vec<McReport>>,
    ) -> Self {
        Report {
            config,
            estimates,
            identities,
            monte_carlo,
            meta: Meta::now(),
        }
    }
}

/// 17 significant digits: one before the point, sixteen after, which is
/// always enough to round-trip an f64 exactly.
fn format_float_17(value: f64) -> String {
    format!("{value:.16e}")
}

/// Pretty JSON with round-trippable floats.
struct Float17Formatter<'a> {
    inner: PrettyFormatter<'a>,
}

impl Float17Formatter<'_> {
    fn new() -> Self {
        Float17Formatter {
            inner: PrettyFormatter::new(),
        }
    }
}

impl Formatter for Float17Formatter<'_> {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        writer.write_all(format_float_17(value).as_bytes())
    }

    fn begin_array<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.begin_array(writer)
    }

    fn end_array<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.end_array(writer)
    }

    fn begin_array_value<W>(&mut self, writer: &mut W, first: bool) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.begin_array_value(writer, first)
    }

    fn end_array_value<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.end_array_value(writer)
    }

    fn begin_object<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.begin_object(writer)
    }

    fn end_object<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.end_object(writer)
    }

    fn begin_object_key<W>(&mut self, writer: &mut W, first: bool) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.begin_object_key(writer, first)
    }

    fn begin_object_value<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.begin_object_value(writer)
    }

    fn end_object_value<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.end_object_value(writer)
    }
}

/// Serializes a report to pretty JSON with a trailing newline.
pub fn to_json(report: &Report) -> String {
    let mut buffer = Vec::with_capacity(4096);
    let mut serializer = Serializer::with_formatter(&mut buffer, Float17Formatter::new());
    report
        .serialize(&mut serializer)
        .expect("report serialization cannot fail");
    buffer.push(b'\n');
    String::from_utf8(buffer).expect("serializer emits UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_exactly() {
        for value in [
            0.1,
            2.0,
            -5.0e-324,
            1.0 / 3.0,
            f64::MAX,
            -0.0,
            6.02e23,
            1e-17,
        ] {
            let text = format_float_17(value);
            let back: f64 = text.parse().unwrap();
            assert_eq!(back.to_bits(), value.to_bits(), "{value} -> {text}");
            let json: f64 = serde_json::from_str(&text).unwrap();
            assert_eq!(json.to_bits(), value.to_bits(), "{value} -> {text}");
        }
    }

    #[test]
    fn serialized_floats_keep_17_digits() {
        #[derive(Serialize)]
        struct Probe {
            x: f64,
            xs: Vec<f64>,
        }
        let probe = Probe {
            x: 1.0 / 3.0,
            xs: vec![2.0, 0.1],
        };
        let mut buffer = Vec::new();
        let mut serializer = Serializer::with_formatter(&mut buffer, Float17Formatter::new());
        probe.serialize(&mut serializer).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        assert!(text.contains("3.3333333333333331e-1"), "{text}");
        assert!(text.contains("2.0000000000000000e0"), "{text}");
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["x"].as_f64().unwrap().to_bits(), (1.0f64 / 3.0).to_bits());
    }
}
