//! Reports rendered as aligned text tables or as schema-versioned JSON lines.

use serde::Serialize;
use serde_json::{json, Value as Json};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Human,
    Machine,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Body {
    Table { headers: Vec<String>, rows: Vec<Vec<String>> },
    Verdict { pass: bool, detail: String },
    Text { lines: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Section {
    pub title: String,
    #[serde(flatten)]
    pub body: Body,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Report {
    pub sections: Vec<Section>,
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    pub fn table<S: ToString>(&mut self, title: &str, headers: &[&str], rows: Vec<Vec<S>>) -> &mut Self {
        self.sections.push(Section {
            title: title.into(),
            body: Body::Table {
                headers: headers.iter().map(|h| h.to_string()).collect(),
                rows: rows.into_iter().map(|r| r.into_iter().map(|c| c.to_string()).collect()).collect(),
            },
        });
        self
    }

    pub fn verdict(&mut self, title: &str, pass: bool, detail: impl Into<String>) -> &mut Self {
        self.sections.push(Section {
            title: title.into(),
            body: Body::Verdict { pass, detail: detail.into() },
        });
        self
    }

    pub fn text(&mut self, title: &str, lines: Vec<String>) -> &mut Self {
        self.sections.push(Section { title: title.into(), body: Body::Text { lines } });
        self
    }

    pub fn all_pass(&self) -> bool {
        self.sections.iter().all(|s| !matches!(s.body, Body::Verdict { pass: false, .. }))
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Human => self.render_human(),
            Format::Machine => self.render_machine(),
        }
    }

    fn render_machine(&self) -> String {
        let mut out = json!({ "report_version": REPORT_VERSION }).to_string();
        out.push('\n');
        for s in &self.sections {
            let v: Json = serde_json::to_value(s).expect("report sections serialize");
            out.push_str(&v.to_string());
            out.push('\n');
        }
        out
    }

    fn render_human(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.sections.iter().enumerate() {
            let run_of_verdicts =
                i > 0 && matches!((&self.sections[i - 1].body, &s.body), (Body::Verdict { .. }, Body::Verdict { .. }));
            if i > 0 && !run_of_verdicts {
                out.push('\n');
            }
            match &s.body {
                Body::Verdict { pass, detail } => {
                    let tag = if *pass { "PASS" } else { "FAIL" };
                    if detail.is_empty() {
                        out.push_str(&format!("{tag} {}\n", s.title));
                    } else {
                        out.push_str(&format!("{tag} {}: {detail}\n", s.title));
                    }
                }
                Body::Text { lines } => {
                    out.push_str(&format!("== {} ==\n", s.title));
                    for l in lines {
                        out.push_str(l);
                        out.push('\n');
                    }
                }
                Body::Table { headers, rows } => {
                    out.push_str(&format!("== {} ==\n", s.title));
                    out.push_str(&render_table(headers, rows));
                }
            }
        }
        out
    }
}

fn render_table(headers: &[String], rows: &[Vec<String>]) -> String {
    let cols = headers.len();
    let mut width: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (i, c) in r.iter().enumerate().take(cols) {
            width[i] = width[i].max(c.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate().take(cols) {
            if i > 0 {
                s.push_str("  ");
            }
            s.push_str(c);
            if i + 1 < cols {
                s.push_str(&" ".repeat(width[i] - c.chars().count()));
            }
        }
        s.push('\n');
        s
    };
    let mut out = line(headers);
    let rule: Vec<String> = width.iter().map(|w| "-".repeat(*w)).collect();
    out.push_str(&line(&rule));
    for r in rows {
        out.push_str(&line(r));
    }
    out
}
