//! Plain-text track files.
//!
//! ```text
//! # width = 20
//! # closed = true
//! # finish_s = 0
//! x,y
//! 0,0
//! 5,0
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::Track;
use crate::error::ConfigError;
use crate::kv::KeyValues;

const HEADER_KEYS: [&str; 3] = ["width", "closed", "finish_s"];

impl Track {
    /// Parses a track file. Header lines `# key = value` precede the `x,y` column row.
    pub fn parse(text: &str) -> Result<Track, ConfigError> {
        let mut header = String::new();
        let mut points = Vec::new();
        let mut in_body = false;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if !in_body {
                if let Some(rest) = line.strip_prefix('#') {
                    if rest.contains('=') {
                        header.push_str(rest);
                    }
                    header.push('\n');
                    continue;
                }
                if line.replace(' ', "") != "x,y" {
                    return Err(ConfigError::Parse {
                        line: line_no,
                        message: format!("expected column row `x,y`, found `{line}`"),
                    });
                }
                in_body = true;
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (Some(x), Some(y), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(ConfigError::Parse {
                    line: line_no,
                    message: format!("expected two columns, found `{line}`"),
                });
            };
            let num = |v: &str| {
                v.parse::<f64>().map_err(|e| ConfigError::Parse {
                    line: line_no,
                    message: format!("bad coordinate `{v}`: {e}"),
                })
            };
            points.push([num(x)?, num(y)?]);
        }
        if !in_body {
            return Err(ConfigError::validation("track file has no `x,y` column row"));
        }
        let kv = KeyValues::parse(&header)?;
        kv.ensure_known(&HEADER_KEYS)?;
        let width = kv
            .f64("width")?
            .ok_or_else(|| ConfigError::validation("track file lacks `width`"))?;
        let closed = kv.bool("closed")?.unwrap_or(false);
        let finish_s = kv.f64("finish_s")?.unwrap_or(0.0);
        Track::new(points, width, closed, finish_s)
    }

    pub fn load(path: &Path) -> Result<Track, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::io(path, e))?;
        Track::parse(&text)
    }

    /// Canonical text form; parsing it reproduces the track bit for bit.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# width = {}", self.width()).unwrap();
        writeln!(out, "# closed = {}", self.closed).unwrap();
        writeln!(out, "# finish_s = {}", self.finish_s).unwrap();
        out.push_str("x,y\n");
        for p in &self.points {
            writeln!(out, "{},{}", p[0], p[1]).unwrap();
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        crate::fsutil::write_atomic(path, self.to_csv().as_bytes())
    }
}
