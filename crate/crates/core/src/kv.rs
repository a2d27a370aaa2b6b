//! Flat `key = value` text format shared by scenario and experiment files.
//!
//! One entry per line, `#` starts a comment, blank lines are ignored. Keys
//! are case-sensitive and may appear at most once. List values are separated
//! by `;` and complex numbers are written as `re,im`.

use num_complex::Complex64;

use crate::error::{CrsError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

#[derive(Debug, Clone, Default)]
pub struct KvDocument {
    entries: Vec<Entry>,
}

fn parse_err(line: usize, msg: impl Into<String>) -> CrsError {
    CrsError::Parse {
        line,
        msg: msg.into(),
    }
}

impl KvDocument {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<Entry> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let content = content.trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| parse_err(line, "expected `key = value`"))?;
            let key = key.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(parse_err(line, format!("invalid key `{key}`")));
            }
            if entries.iter().any(|e| e.key == key) {
                return Err(parse_err(line, format!("duplicate key `{key}`")));
            }
            entries.push(Entry {
                line,
                key: key.to_string(),
                value: value.trim().to_string(),
            });
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn require(&self, key: &str) -> Result<&Entry> {
        self.get(key)
            .ok_or_else(|| parse_err(0, format!("missing key `{key}`")))
    }

    /// Rejects keys outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for e in &self.entries {
            if !allowed.contains(&e.key.as_str()) {
                return Err(parse_err(e.line, format!("unknown key `{}`", e.key)));
            }
        }
        Ok(())
    }
}

impl Entry {
    pub fn err(&self, msg: impl Into<String>) -> CrsError {
        parse_err(self.line, format!("`{}`: {}", self.key, msg.into()))
    }

    pub fn as_f64(&self) -> Result<f64> {
        parse_real(&self.value).map_err(|m| self.err(m))
    }

    pub fn as_usize(&self) -> Result<usize> {
        self.value
            .parse::<usize>()
            .map_err(|e| self.err(e.to_string()))
    }

    pub fn as_u64(&self) -> Result<u64> {
        self.value
            .parse::<u64>()
            .map_err(|e| self.err(e.to_string()))
    }

    pub fn as_f64_list(&self) -> Result<Vec<f64>> {
        split_list(&self.value)
            .map(|item| parse_real(item).map_err(|m| self.err(m)))
            .collect()
    }

    pub fn as_complex(&self) -> Result<Complex64> {
        parse_complex(&self.value).map_err(|m| self.err(m))
    }

    pub fn as_complex_list(&self) -> Result<Vec<Complex64>> {
        split_list(&self.value)
            .map(|item| parse_complex(item).map_err(|m| self.err(m)))
            .collect()
    }

    pub fn as_str_list(&self) -> Vec<String> {
        split_list(&self.value).map(str::to_string).collect()
    }
}

fn split_list(value: &str) -> impl Iterator<Item = &str> {
    value.split(';').map(str::trim).filter(|s| !s.is_empty())
}

/// Parses a finite real. Accepts plain numbers and multiples of pi such as
/// `pi`, `-pi/9`, `4pi/9`, `0.5*pi`.
pub fn parse_real(text: &str) -> std::result::Result<f64, String> {
    let t = text.trim();
    let value = if let Some(pos) = t.find("pi") {
        let (head, tail) = (&t[..pos], &t[pos + 2..]);
        let head = head.trim().trim_end_matches('*').trim();
        let factor = match head {
            "" | "+" => 1.0,
            "-" => -1.0,
            h => h
                .parse::<f64>()
                .map_err(|e| format!("bad pi multiplier `{h}`: {e}"))?,
        };
        let tail = tail.trim();
        let divisor = if tail.is_empty() {
            1.0
        } else if let Some(d) = tail.strip_prefix('/') {
            d.trim()
                .parse::<f64>()
                .map_err(|e| format!("bad pi divisor `{d}`: {e}"))?
        } else {
            return Err(format!("cannot parse `{t}`"));
        };
        factor * std::f64::consts::PI / divisor
    } else {
        t.parse::<f64>().map_err(|e| format!("`{t}`: {e}"))?
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("non-finite value `{t}`"))
    }
}

pub fn parse_complex(text: &str) -> std::result::Result<Complex64, String> {
    let (re, im) = text
        .split_once(',')
        .ok_or_else(|| format!("expected `re,im`, got `{}`", text.trim()))?;
    Ok(Complex64::new(parse_real(re)?, parse_real(im)?))
}

pub fn format_complex_list(values: &[Complex64]) -> String {
    values
        .iter()
        .map(|z| format!("{:?},{:?}", z.re, z.im))
        .collect::<Vec<_>>()
        .join("; ")
}

pub fn format_f64_list(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join("; ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blank_lines() {
        let doc = KvDocument::parse("# header\n\n a = 1 # trailing\nb=2;3\n").unwrap();
        assert_eq!(doc.entries().len(), 2);
        assert_eq!(doc.get("a").unwrap().as_f64().unwrap(), 1.0);
        assert_eq!(doc.get("b").unwrap().as_f64_list().unwrap(), vec![2.0, 3.0]);
    }

    #[test]
    fn rejects_duplicates_and_garbage() {
        assert!(KvDocument::parse("a = 1\na = 2").is_err());
        assert!(KvDocument::parse("no equals sign").is_err());
        assert!(KvDocument::parse("bad key = 1").is_err());
    }

    #[test]
    fn pi_multiples() {
        let pi = std::f64::consts::PI;
        assert_eq!(parse_real("pi/9").unwrap(), pi / 9.0);
        assert_eq!(parse_real("4pi/9").unwrap(), 4.0 * pi / 9.0);
        assert_eq!(parse_real("-pi").unwrap(), -pi);
        assert_eq!(parse_real("0.5*pi").unwrap(), 0.5 * pi);
        assert!(parse_real("pix").is_err());
        assert!(parse_real("inf").is_err());
        assert!(parse_real("NaN").is_err());
    }

    #[test]
    fn complex_pairs() {
        let z = parse_complex(" 1.5 , -2 ").unwrap();
        assert_eq!(z, Complex64::new(1.5, -2.0));
        assert!(parse_complex("1.5").is_err());
        let list = [Complex64::new(0.1, 0.2), Complex64::new(-3.0, 1e-300)];
        let text = format_complex_list(&list);
        let doc = KvDocument::parse(&format!("h = {text}")).unwrap();
        assert_eq!(doc.get("h").unwrap().as_complex_list().unwrap(), list);
    }
}
