//! `#`-prefixed header lines that make every artifact reproducible from its
//! own contents.

use std::io::{self, Write};

/// Ordered `key: value` pairs written ahead of CSV data.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Provenance {
    entries: Vec<(String, String)>,
}

impl Provenance {
    /// Starts a header for `command`, tagged with the tool version.
    pub fn new(command: &str) -> Provenance {
        let mut p = Provenance::default();
        p.push("tool", concat!("gil ", env!("CARGO_PKG_VERSION")));
        p.push("command", command);
        p
    }

    pub fn push(&mut self, key: &str, value: impl ToString) -> &mut Provenance {
        let v = value.to_string().replace('\n', " ");
        self.entries.push((key.to_string(), v));
        self
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Provenance {
        self.push(key, value);
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn write<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (k, v) in &self.entries {
            writeln!(w, "# {k}: {v}")?;
        }
        Ok(())
    }

    /// Reads the leading `# key: value` lines of an artifact.
    pub fn parse(text: &str) -> Provenance {
        let mut p = Provenance::default();
        for line in text.lines() {
            let Some(rest) = line.strip_prefix("# ") else {
                break;
            };
            if let Some((k, v)) = rest.split_once(": ") {
                p.push(k, v);
            }
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_text() {
        let p = Provenance::new("grid")
            .with("seeds", "0 1 2")
            .with("epochs", 30_000);
        let mut buf = Vec::new();
        p.write(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap() + "model,dataset\n";
        assert_eq!(Provenance::parse(&text), p);
        assert_eq!(p.get("epochs"), Some("30000"));
    }
}
