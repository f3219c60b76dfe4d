//! Matplotlib scripts for growth and convergence CSVs.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlotKind {
    Growth,
    Convergence,
}

impl PlotKind {
    fn header(self) -> &'static [&'static str] {
        match self {
            Self::Growth => &["t", "error", "eta"],
            Self::Convergence => &["dt", "error", "eta_drift"],
        }
    }
}

fn malformed(path: &Path, reason: impl Into<String>) -> HarnessError {
    HarnessError::MalformedCsv {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

/// Checks the header and that there is at least one parseable data row.
fn check_csv(path: &Path, kind: PlotKind) -> Result<(), HarnessError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| malformed(path, e.to_string()))?;
    let header = reader.headers().map_err(|e| malformed(path, e.to_string()))?.clone();
    if header.is_empty() {
        return Err(malformed(path, "empty file"));
    }
    let expected = kind.header();
    if header.iter().ne(expected.iter().copied()) {
        return Err(malformed(
            path,
            format!("header `{}`, expected `{}`", header.iter().collect::<Vec<_>>().join(","), expected.join(",")),
        ));
    }
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| malformed(path, e.to_string()))?;
        let x = record.get(0).unwrap_or("");
        if x.parse::<f64>().is_err() {
            return Err(malformed(path, format!("row {}: `{x}` is not a number", rows + 1)));
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(malformed(path, "no data rows"));
    }
    Ok(())
}

fn growth_label(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    if stem.contains("unrelaxed") {
        "Without relaxation".into()
    } else if stem.contains("relaxed") {
        "With relaxation".into()
    } else {
        stem
    }
}

fn convergence_label(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let kmax = stem
        .split('_')
        .find_map(|part| part.strip_prefix("kmax").and_then(|k| k.parse::<usize>().ok()));
    match kmax {
        Some(k) => format!("$k_{{\\max}}={k}$"),
        None => stem,
    }
}

fn py_str(s: &str) -> String {
    format!("{s:?}")
}

/// Builds a self-contained matplotlib script plotting `paths`.
///
/// Growth scripts draw the error on log-log axes and `η − η₀` on a second
/// panel; convergence scripts draw error over Δt on log-log axes, one curve
/// per file.
pub fn plot_script<P: AsRef<Path>>(paths: &[P], kind: PlotKind) -> Result<String, HarnessError> {
    if paths.is_empty() {
        return Err(HarnessError::InvalidSpec("no CSV files given".into()));
    }
    for p in paths {
        check_csv(p.as_ref(), kind)?;
    }
    let mut s = String::new();
    s.push_str("import csv\nimport matplotlib.pyplot as plt\n\n\n");
    s.push_str("def load(path):\n");
    s.push_str("    with open(path, newline='') as f:\n");
    s.push_str("        rows = list(csv.DictReader(f))\n");
    s.push_str("    return {k: [float(r[k]) if r[k] else float('nan') for r in rows] for k in rows[0]}\n\n\n");
    s.push_str("series = [\n");
    for p in paths {
        let p = p.as_ref();
        let label = match kind {
            PlotKind::Growth => growth_label(p),
            PlotKind::Convergence => convergence_label(p),
        };
        let _ = writeln!(s, "    ({}, {}),", py_str(&p.display().to_string()), py_str(&label));
    }
    s.push_str("]\n\n");
    match kind {
        PlotKind::Growth => {
            s.push_str("fig, (ax_err, ax_eta) = plt.subplots(1, 2, figsize=(10, 4))\n");
            s.push_str("for path, label in series:\n");
            s.push_str("    d = load(path)\n");
            s.push_str("    ax_err.loglog(d['t'], d['error'], label=label)\n");
            s.push_str("    eta0 = d['eta'][0]\n");
            s.push_str("    ax_eta.plot(d['t'], [e - eta0 for e in d['eta']], label=label)\n");
            s.push_str("ax_err.set_xlabel('$t$')\nax_err.set_ylabel('error')\nax_err.legend()\n");
            s.push_str("ax_eta.set_xlabel('$t$')\nax_eta.set_ylabel('$\\\\eta - \\\\eta_0$')\nax_eta.legend()\n");
        }
        PlotKind::Convergence => {
            s.push_str("fig, ax = plt.subplots(figsize=(5, 4))\n");
            s.push_str("for path, label in series:\n");
            s.push_str("    d = load(path)\n");
            s.push_str("    ax.loglog(d['dt'], d['error'], 'o-', label=label)\n");
            s.push_str("ax.set_xlabel('$\\\\Delta t$')\nax.set_ylabel('error')\nax.legend()\n");
        }
    }
    s.push_str("fig.tight_layout()\nplt.show()\n");
    Ok(s)
}
