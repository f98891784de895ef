//! Output assembly: human-readable text or `key=value` records under
//! `[section]` headers. Everything is collected in memory and written once,
//! so identical invocations give byte-identical output.

use std::fmt::Display;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

pub struct Out {
    machine: bool,
    text: String,
}

impl Out {
    pub fn new(machine: bool) -> Out {
        Out { machine, text: String::new() }
    }

    pub fn machine(&self) -> bool {
        self.machine
    }

    /// Start a record group (machine mode only).
    pub fn section(&mut self, name: &str) {
        if self.machine {
            self.line(&format!("[{name}]"));
        }
    }

    /// A key/value record: `key=value` or `key: value`.
    pub fn kv(&mut self, key: &str, value: impl Display) {
        let sep = if self.machine { "=" } else { ": " };
        self.line(&format!("{key}{sep}{value}"));
    }

    pub fn line(&mut self, line: &str) {
        self.text.push_str(line);
        self.text.push('\n');
    }

    /// Emit a document: to `path` when given, else inline (under a
    /// `[document]` header in machine mode).
    pub fn document(&mut self, body: &str, path: Option<&Path>) -> Result<()> {
        match path {
            Some(p) => {
                fs::write(p, body).with_context(|| format!("writing {}", p.display()))?;
                self.kv("written", p.display());
            }
            None => {
                self.section("document");
                self.text.push_str(body);
            }
        }
        Ok(())
    }

    pub fn into_string(self) -> String {
        self.text
    }
}
