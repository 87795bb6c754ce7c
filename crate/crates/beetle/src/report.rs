//! Output for the experiment workflows: a JSON envelope that pins the tool
//! version and every input parameter, CSV and aligned-text tables, plain-text
//! quartile bars, and a small self-contained SVG chart. All rendering is
//! deterministic — identical reports produce byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::{
    CompareReport, DiscoveryQualityReport, RoundRobinReport, SweepReport, WinLossReport,
};
use crate::stats::Quartiles;

/// What produced a results file.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

impl ToolInfo {
    pub fn current() -> ToolInfo {
        ToolInfo {
            name: "tuner",
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

/// Write `results.json` under `dir`: the command that ran, the exact
/// parameters it ran with, and its results. Nothing time- or host-dependent
/// goes in, so reruns are byte-identical.
pub fn write_results_json<P: Serialize, T: Serialize>(
    dir: &Path,
    command: &str,
    params: &P,
    results: &T,
) -> Result<PathBuf> {
    #[derive(Serialize)]
    struct Envelope<'a, P: Serialize, T: Serialize> {
        tool: ToolInfo,
        command: &'a str,
        params: &'a P,
        results: &'a T,
    }
    let envelope = Envelope {
        tool: ToolInfo::current(),
        command,
        params,
        results,
    };
    fs::create_dir_all(dir)?;
    let mut text = serde_json::to_string_pretty(&envelope)
        .map_err(|e| Error::Parse(format!("results are not serializable: {e}")))?;
    text.push('\n');
    let path = dir.join("results.json");
    fs::write(&path, text)?;
    Ok(path)
}

/// A rectangular table destined for `table.csv` and the terminal.
#[derive(Debug, Clone)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: Vec<S>) -> Table {
        Table {
            headers: headers.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<S: Into<String>>(&mut self, row: Vec<S>) {
        let row: Vec<String> = row.into_iter().map(Into::into).collect();
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(&self.headers)
            .and_then(|_| self.rows.iter().try_for_each(|r| writer.write_record(r)))
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        let bytes = writer
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        String::from_utf8(bytes).map_err(|e| Error::Parse(format!("table is not UTF-8: {e}")))
    }

    /// Column-aligned rendering for the terminal.
    pub fn to_text(&self) -> String {
        let mut widths: Vec<usize> = self.headers.iter().map(|h| h.chars().count()).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let render = |cells: &[String]| -> String {
            let mut line = String::new();
            for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
                if i > 0 {
                    line.push_str("  ");
                }
                line.push_str(cell);
                for _ in cell.chars().count()..*w {
                    line.push(' ');
                }
            }
            line.trim_end().to_string()
        };
        let mut out = render(&self.headers);
        out.push('\n');
        for _ in 0..widths.iter().sum::<usize>() + 2 * (widths.len() - 1) {
            out.push('-');
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&render(row));
            out.push('\n');
        }
        out
    }
}

/// Write the table as `table.csv` under `dir`.
pub fn write_table_csv(dir: &Path, table: &Table) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join("table.csv");
    fs::write(&path, table.to_csv()?)?;
    Ok(path)
}

/// Write a chart as `chart.svg` under `dir`.
pub fn write_chart_svg(dir: &Path, svg: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join("chart.svg");
    fs::write(&path, svg)?;
    Ok(path)
}

/// Plain-text quartile bar on a fixed `[lo, hi]` scale: `=` spans the
/// interquartile range and `|` marks the median.
///
/// ```text
/// ·····===|=======····
/// ```
pub fn quartile_bar(q: &Quartiles, lo: f64, hi: f64, width: usize) -> String {
    debug_assert!(width >= 3);
    let span = hi - lo;
    let clamp = |v: f64| -> usize {
        if span <= 0.0 {
            return 0;
        }
        let unit = ((v - lo) / span).clamp(0.0, 1.0);
        ((unit * (width - 1) as f64).round() as usize).min(width - 1)
    };
    let mut bar = vec!['·'; width];
    let (a, b) = (clamp(q.q25), clamp(q.q75));
    for cell in bar.iter_mut().take(b + 1).skip(a) {
        *cell = '=';
    }
    bar[clamp(q.median)] = '|';
    bar.into_iter().collect()
}

fn fmt2(v: f64) -> String {
    format!("{v:.2}")
}

fn fmt4(v: f64) -> String {
    format!("{v:.4}")
}

/// Fig.-style ranking table: rank, environment, median, spread, and a bar.
pub fn roundrobin_table(report: &RoundRobinReport) -> Table {
    let hi = report
        .rows
        .iter()
        .map(|r| r.nar.q75)
        .fold(100.0_f64, f64::max);
    let mut table = Table::new(vec![
        "rank",
        "environment",
        "median_nar",
        "iqr",
        "q25",
        "q75",
        "distribution",
    ]);
    for row in &report.rows {
        table.push(vec![
            row.rank.to_string(),
            row.env_id.clone(),
            fmt2(row.nar.median),
            fmt2(row.nar.iqr),
            fmt2(row.nar.q25),
            fmt2(row.nar.q75),
            quartile_bar(&row.nar, 0.0, hi, 20),
        ]);
    }
    table
}

/// Per-repeat view of the discovery-quality workflow.
pub fn discovery_table(report: &DiscoveryQualityReport) -> Table {
    let mut table = Table::new(vec![
        "repeat",
        "seed",
        "bellwether",
        "matched_exhaustive",
        "cost",
        "cost_fraction",
        "nar",
        "exhaustive_nar",
    ]);
    for row in &report.repeats {
        table.push(vec![
            row.repeat.to_string(),
            row.seed.to_string(),
            row.bellwether_id.clone(),
            row.matched_exhaustive.to_string(),
            row.cost.to_string(),
            fmt4(row.cost_fraction),
            fmt2(row.nar),
            fmt2(row.exhaustive_nar),
        ]);
    }
    table
}

/// Win/loss ladder: one row per sampling fraction.
pub fn winloss_table(report: &WinLossReport) -> Table {
    let mut table = Table::new(vec![
        "fraction",
        "wins",
        "losses",
        "transfer_median_nar",
        "within_median_nar",
        "transfer_median_cost",
        "within_median_cost",
    ]);
    for cell in &report.cells {
        table.push(vec![
            fmt2(cell.fraction),
            cell.wins.to_string(),
            cell.losses.to_string(),
            fmt2(cell.transfer_nar.median),
            fmt2(cell.within_nar.median),
            fmt2(cell.transfer_cost.median),
            fmt2(cell.within_cost.median),
        ]);
    }
    table
}

/// Method ranking with pooled residuals and measurement counts.
pub fn compare_table(report: &CompareReport) -> Table {
    let hi = report
        .rows
        .iter()
        .map(|r| r.nar.q75)
        .fold(100.0_f64, f64::max);
    let mut table = Table::new(vec![
        "rank",
        "method",
        "median_nar",
        "iqr",
        "q25",
        "q75",
        "median_measurements",
        "total_measurements",
        "distribution",
    ]);
    for row in &report.rows {
        table.push(vec![
            row.rank.to_string(),
            row.method.clone(),
            fmt2(row.nar.median),
            fmt2(row.nar.iqr),
            fmt2(row.nar.q25),
            fmt2(row.nar.q75),
            fmt2(row.measurements.median),
            row.total_measurements.to_string(),
            quartile_bar(&row.nar, 0.0, hi, 20),
        ]);
    }
    table
}

/// Budget × lives surface, one row per cell.
pub fn sweep_table(report: &SweepReport) -> Table {
    let mut table = Table::new(vec![
        "budget",
        "lives",
        "median_nar",
        "iqr_nar",
        "median_cost_fraction",
    ]);
    for cell in &report.cells {
        table.push(vec![
            fmt2(cell.budget),
            cell.lives.to_string(),
            fmt2(cell.nar.median),
            fmt2(cell.nar.iqr),
            fmt4(cell.cost_fraction.median),
        ]);
    }
    table
}

/// Self-contained horizontal quartile chart: one labeled bar per row, the box
/// spanning q25..q75 with a median tick, values scaled to `[lo, hi]`.
pub fn svg_quartile_chart(title: &str, rows: &[(String, Quartiles)], lo: f64, hi: f64) -> String {
    const LABEL_W: f64 = 150.0;
    const PLOT_W: f64 = 460.0;
    const ROW_H: f64 = 26.0;
    const TOP: f64 = 40.0;
    let height = TOP + rows.len() as f64 * ROW_H + 30.0;
    let span = if hi > lo { hi - lo } else { 1.0 };
    let x = |v: f64| LABEL_W + ((v - lo) / span).clamp(0.0, 1.0) * PLOT_W;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{height:.0}\" \
         font-family=\"monospace\" font-size=\"12\">\n",
        LABEL_W + PLOT_W + 30.0
    ));
    svg.push_str(&format!(
        "  <text x=\"{LABEL_W:.0}\" y=\"18\" font-size=\"14\">{}</text>\n",
        xml_escape(title)
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"{height_lbl:.1}\">{lo:.1}</text>\n",
        x(lo),
        height_lbl = height - 10.0,
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"{height_lbl:.1}\" text-anchor=\"end\">{hi:.1}</text>\n",
        x(hi),
        height_lbl = height - 10.0,
    ));
    for (i, (label, q)) in rows.iter().enumerate() {
        let y = TOP + i as f64 * ROW_H;
        let mid = y + ROW_H / 2.0;
        svg.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n",
            LABEL_W - 8.0,
            mid + 4.0,
            xml_escape(label)
        ));
        svg.push_str(&format!(
            "  <line x1=\"{:.1}\" y1=\"{mid:.1}\" x2=\"{:.1}\" y2=\"{mid:.1}\" \
             stroke=\"#999\" stroke-width=\"1\"/>\n",
            x(lo),
            x(hi),
        ));
        svg.push_str(&format!(
            "  <rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" \
             fill=\"#7aa6c2\" stroke=\"#335\"/>\n",
            x(q.q25),
            y + 6.0,
            (x(q.q75) - x(q.q25)).max(1.0),
            ROW_H - 12.0,
        ));
        svg.push_str(&format!(
            "  <line x1=\"{mx:.1}\" y1=\"{:.1}\" x2=\"{mx:.1}\" y2=\"{:.1}\" \
             stroke=\"#112\" stroke-width=\"2\"/>\n",
            y + 4.0,
            y + ROW_H - 4.0,
            mx = x(q.median),
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
