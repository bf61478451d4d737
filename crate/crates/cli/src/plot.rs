//! SVG plots from aggregate CSVs: one line per scheme with a ±1 std band.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use plotters::prelude::*;

use crate::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    /// Final-round accuracy against SNR.
    SnrCurve,
    /// Accuracy against round.
    RoundsCurve,
    /// Final-round accuracy against symbol budget.
    BudgetCurve,
}

impl PlotKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "snr_curve" => Some(PlotKind::SnrCurve),
            "rounds_curve" => Some(PlotKind::RoundsCurve),
            "budget_curve" => Some(PlotKind::BudgetCurve),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PlotKind::SnrCurve => "snr_curve",
            PlotKind::RoundsCurve => "rounds_curve",
            PlotKind::BudgetCurve => "budget_curve",
        }
    }

    fn x_label(self) -> &'static str {
        match self {
            PlotKind::SnrCurve => "channel SNR [dB]",
            PlotKind::RoundsCurve => "round",
            PlotKind::BudgetCurve => "symbol budget",
        }
    }
}

impl fmt::Display for PlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Global,
    Local,
}

impl Metric {
    fn columns(self) -> (&'static str, &'static str) {
        match self {
            Metric::Global => ("global_acc_mean", "global_acc_std"),
            Metric::Local => ("local_acc_mean", "local_acc_std"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlotOptions {
    pub metric: Metric,
    /// Keep only rows at this SNR.
    pub snr_db: Option<f64>,
    pub size: (u32, u32),
}

impl Default for PlotOptions {
    fn default() -> Self {
        Self {
            metric: Metric::Global,
            snr_db: None,
            size: (800, 500),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Row {
    scheme: String,
    snr_db: f64,
    budget: f64,
    round: f64,
    mean: f64,
    std: f64,
}

/// (x, mean, std) points per curve label.
pub type Curves = BTreeMap<String, Vec<(f64, f64, f64)>>;

fn read_rows(paths: &[&Path], metric: Metric) -> Result<Vec<Row>, HarnessError> {
    let (mean_col, std_col) = metric.columns();
    let mut rows = Vec::new();
    for &path in paths {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| HarnessError::from_csv(path, e))?;
        let headers = rdr.headers().map_err(|e| HarnessError::from_csv(path, e))?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| HarnessError::MissingColumn {
                    path: path.to_path_buf(),
                    column: name.to_string(),
                })
        };
        let idx = [
            col("scheme")?,
            col("snr_db")?,
            col("budget")?,
            col("round")?,
            col(mean_col)?,
            col(std_col)?,
        ];
        for rec in rdr.records() {
            let rec = rec.map_err(|e| HarnessError::from_csv(path, e))?;
            let num = |i: usize| -> Result<f64, HarnessError> {
                let s = rec.get(idx[i]).unwrap_or("");
                s.parse().map_err(|_| HarnessError::BadValue {
                    path: path.to_path_buf(),
                    value: s.to_string(),
                })
            };
            rows.push(Row {
                scheme: rec.get(idx[0]).unwrap_or("").to_string(),
                snr_db: num(1)?,
                budget: num(2)?,
                round: num(3)?,
                mean: num(4)?,
                std: num(5)?,
            });
        }
    }
    Ok(rows)
}

/// Builds the curves a plot of `kind` would draw.
pub fn curves(paths: &[&Path], kind: PlotKind, opts: &PlotOptions) -> Result<Curves, HarnessError> {
    let mut rows = read_rows(paths, opts.metric)?;
    if let Some(snr) = opts.snr_db {
        rows.retain(|r| r.snr_db == snr);
    }
    if rows.is_empty() {
        return Err(HarnessError::EmptyData);
    }
    if kind != PlotKind::RoundsCurve {
        // Keep the last round of every (scheme, snr, budget) group.
        let mut last: BTreeMap<(String, u64, u64), f64> = BTreeMap::new();
        for r in &rows {
            let e = last
                .entry((r.scheme.clone(), r.snr_db.to_bits(), r.budget.to_bits()))
                .or_insert(r.round);
            *e = e.max(r.round);
        }
        rows.retain(|r| last[&(r.scheme.clone(), r.snr_db.to_bits(), r.budget.to_bits())] == r.round);
    }
    let distinct = |f: fn(&Row) -> u64| {
        let mut v: Vec<u64> = rows.iter().map(f).collect();
        v.sort_unstable();
        v.dedup();
        v.len() > 1
    };
    let many_snr = distinct(|r| r.snr_db.to_bits());
    let many_budget = distinct(|r| r.budget.to_bits());

    let mut out = Curves::new();
    for r in &rows {
        let mut label = r.scheme.clone();
        let x = match kind {
            PlotKind::SnrCurve => {
                if many_budget {
                    label += &format!(" b={}", r.budget);
                }
                r.snr_db
            }
            PlotKind::BudgetCurve => {
                if many_snr {
                    label += &format!(" {} dB", r.snr_db);
                }
                r.budget
            }
            PlotKind::RoundsCurve => {
                if many_snr {
                    label += &format!(" {} dB", r.snr_db);
                }
                if many_budget {
                    label += &format!(" b={}", r.budget);
                }
                r.round
            }
        };
        out.entry(label).or_default().push((x, r.mean, r.std));
    }
    for pts in out.values_mut() {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    Ok(out)
}

/// Draws `kind` from the aggregate CSVs at `paths` into the SVG `out`.
/// Nothing is written when the inputs are empty or malformed.
pub fn plot(paths: &[&Path], kind: PlotKind, out: &Path, opts: &PlotOptions) -> Result<(), HarnessError> {
    let curves = curves(paths, kind, opts)?;
    let xs = curves.values().flatten().map(|p| p.0);
    let (mut x0, mut x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if x0 == x1 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    let title = match (kind, opts.metric) {
        (_, Metric::Global) => format!("{kind}: global model"),
        (_, Metric::Local) => format!("{kind}: local models"),
    };
    render(&curves, &title, kind.x_label(), (x0, x1), out, opts.size)
        .map_err(|e| HarnessError::Plot(e.to_string()))
}

fn render(
    curves: &Curves,
    title: &str,
    x_label: &str,
    x_range: (f64, f64),
    out: &Path,
    size: (u32, u32),
) -> Result<(), Box<dyn std::error::Error>> {
    let root = SVGBackend::new(out, size).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(x_range.0..x_range.1, 0.0..1.0)?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc("top-1 accuracy")
        .draw()?;
    for (i, (label, pts)) in curves.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        let band: Vec<(f64, f64)> = pts
            .iter()
            .map(|p| (p.0, (p.1 + p.2).min(1.0)))
            .chain(pts.iter().rev().map(|p| (p.0, (p.1 - p.2).max(0.0))))
            .collect();
        chart.draw_series(std::iter::once(Polygon::new(band, color.mix(0.15).filled())))?;
        chart
            .draw_series(LineSeries::new(pts.iter().map(|p| (p.0, p.1)), color.stroke_width(2)))?
            .label(label.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .position(SeriesLabelPosition::LowerRight)
        .draw()?;
    root.present()?;
    Ok(())
}
