//! Check reports: every checker returns one of these instead of panicking,
//! so failures carry their witnessing terms and the CLI can render both a
//! human summary and a machine-readable JSON block.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Failure {
    /// Which law or condition failed.
    pub law: String,
    /// The witnessing data, pretty-printed.
    pub witness: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub checker: String,
    pub bound: usize,
    /// Number of law instances that were checked and held.
    pub checked: usize,
    pub failures: Vec<Failure>,
    /// Law instances skipped because the data fell outside the bound.
    pub skipped: usize,
    /// Free-form notes (bound warnings, certificate summaries).
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(checker: impl Into<String>, bound: usize) -> Report {
        Report {
            checker: checker.into(),
            bound,
            checked: 0,
            failures: Vec::new(),
            skipped: 0,
            notes: Vec::new(),
        }
    }

    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn pass(&mut self) {
        self.checked += 1;
    }

    pub fn fail(&mut self, law: impl Into<String>, witness: impl Into<String>) {
        self.failures.push(Failure {
            law: law.into(),
            witness: witness.into(),
        });
    }

    pub fn skip(&mut self) {
        self.skipped += 1;
    }

    pub fn note(&mut self, msg: impl Into<String>) {
        self.notes.push(msg.into());
    }

    /// Merge a sub-report, prefixing its failures with a context label.
    pub fn absorb(&mut self, label: &str, sub: Report) {
        self.checked += sub.checked;
        self.skipped += sub.skipped;
        for f in sub.failures {
            self.failures.push(Failure {
                law: format!("{label}: {}", f.law),
                witness: f.witness,
            });
        }
        for n in sub.notes {
            self.notes.push(format!("{label}: {n}"));
        }
    }

    /// Human-readable rendering, one line per failure.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{}: {} at bound {} ({} checked, {} skipped)\n",
            self.checker,
            if self.ok() { "PASS" } else { "FAIL" },
            self.bound,
            self.checked,
            self.skipped
        ));
        for f in &self.failures {
            out.push_str(&format!("  FAIL {}: {}\n", f.law, f.witness));
        }
        for n in &self.notes {
            out.push_str(&format!("  note: {n}\n"));
        }
        out
    }
}
