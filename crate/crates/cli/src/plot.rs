//! Static SVG figures: rank-ordered district boxplots and plan-level
//! histograms, with reference draws overlaid as red markers.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::{bail, Result};

use districter_core::ingest::VAP_SUBGROUPS;
use districter_core::metrics::{StatsRow, StatsTable};
use districter_core::sampler::DrawId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PlotKind {
    Boxplot,
    Histogram,
}

/// Looks up a numeric stats column on one row; `Ok(None)` when the value
/// is absent for that row.
pub fn column_value(stats: &StatsTable, row: &StatsRow, column: &str) -> Result<Option<f64>> {
    if let Some(ix) = VAP_SUBGROUPS.iter().position(|&s| s == column) {
        return Ok(Some(row.vap_subgroups[ix]));
    }
    if let Some(year) = column.strip_prefix("adv_") {
        if let Some(ix) = stats.years.iter().position(|y| y == year) {
            return Ok(row.per_year.get(ix).map(|p| p.0));
        }
    }
    if let Some(year) = column.strip_prefix("arv_") {
        if let Some(ix) = stats.years.iter().position(|y| y == year) {
            return Ok(row.per_year.get(ix).map(|p| p.1));
        }
    }
    Ok(match column {
        "total_pop" => Some(row.total_pop),
        "plan_dev" => Some(row.plan_dev),
        "comp_edge" => Some(row.comp_edge),
        "comp_polsby" => row.comp_polsby,
        "county_splits" => Some(row.county_splits as f64),
        "muni_splits" => Some(row.muni_splits as f64),
        "vap" => Some(row.vap),
        "ndv" => row.ndv,
        "nrv" => row.nrv,
        "ndshare" => row.ndshare,
        "e_dvs" => row.e_dvs,
        "pr_dem" => row.pr_dem,
        "e_dem" => row.e_dem,
        "pbias" => row.pbias,
        "egap" => row.egap,
        other => bail!(
            "unknown stats column {other:?} (see the stats file header for valid names)"
        ),
    })
}

/// Values grouped by draw in row order: (draw, per-district values).
fn by_draw(stats: &StatsTable, column: &str) -> Result<Vec<(DrawId, Vec<f64>)>> {
    let mut order: Vec<DrawId> = Vec::new();
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for row in &stats.rows {
        let label = row.draw.label();
        if !groups.contains_key(&label) {
            order.push(row.draw.clone());
            groups.insert(label.clone(), Vec::new());
        }
        if let Some(v) = column_value(stats, row, column)? {
            groups.get_mut(&label).unwrap().push(v);
        }
    }
    Ok(order
        .into_iter()
        .map(|d| {
            let v = groups.remove(&d.label()).unwrap();
            (d, v)
        })
        .collect())
}

struct Frame {
    width: f64,
    height: f64,
    left: f64,
    right: f64,
    top: f64,
    bottom: f64,
}

const FRAME: Frame = Frame { width: 840.0, height: 520.0, left: 70.0, right: 30.0, top: 30.0, bottom: 60.0 };

impl Frame {
    fn plot_width(&self) -> f64 {
        self.width - self.left - self.right
    }

    fn plot_height(&self) -> f64 {
        self.height - self.top - self.bottom
    }

    fn y(&self, v: f64, lo: f64, hi: f64) -> f64 {
        let span = if hi > lo { hi - lo } else { 1.0 };
        self.top + (1.0 - (v - lo) / span) * self.plot_height()
    }
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let raw_step = span / 5.0;
    let mag = 10f64.powf(raw_step.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let start = (lo / step).ceil() * step;
    let mut ticks = Vec::new();
    let mut t = start;
    while t <= hi + 1e-9 * span {
        ticks.push(t);
        t += step;
    }
    ticks
}

fn fmt_tick(v: f64) -> String {
    let rounded = (v * 1e9).round() / 1e9;
    format!("{rounded}")
}

fn svg_header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">
<rect width="{w}" height="{h}" fill="white"/>
<text x="{cx}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{title}</text>
"##,
        w = FRAME.width,
        h = FRAME.height,
        cx = FRAME.width / 2.0,
    );
}

fn svg_axes(out: &mut String, lo: f64, hi: f64, x_label: &str, y_label: &str) {
    let f = &FRAME;
    let _ = write!(
        out,
        r##"<line x1="{l}" y1="{t}" x2="{l}" y2="{b}" stroke="black"/>
<line x1="{l}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>
"##,
        l = f.left,
        t = f.top,
        b = f.height - f.bottom,
        r = f.width - f.right,
    );
    for tick in nice_ticks(lo, hi) {
        let y = f.y(tick, lo, hi);
        let _ = write!(
            out,
            r##"<line x1="{x0}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="black"/>
<line x1="{x1}" y1="{y:.2}" x2="{xr}" y2="{y:.2}" stroke="#dddddd"/>
<text x="{xt}" y="{yt:.2}" text-anchor="end" font-family="sans-serif" font-size="11">{label}</text>
"##,
            x0 = f.left - 5.0,
            x1 = f.left,
            xr = f.width - f.right,
            xt = f.left - 8.0,
            yt = y + 4.0,
            label = fmt_tick(tick),
        );
    }
    let _ = write!(
        out,
        r##"<text x="{cx}" y="{by}" text-anchor="middle" font-family="sans-serif" font-size="12">{x_label}</text>
<text x="18" y="{cy}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 18 {cy})">{y_label}</text>
"##,
        cx = (f.left + f.width - f.right) / 2.0,
        by = f.height - 15.0,
        cy = (f.top + f.height - f.bottom) / 2.0,
    );
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p * (n - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < n {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[n - 1]
    }
}

/// Boxplots of a district-level column with districts rank-ordered within
/// each draw. Reference draws appear as red squares at their own ordered
/// positions.
pub fn boxplot(stats: &StatsTable, column: &str) -> Result<String> {
    let groups = by_draw(stats, column)?;
    let k = groups.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
    if k == 0 {
        bail!("column {column:?} has no values to plot");
    }
    let mut per_position: Vec<Vec<f64>> = vec![Vec::new(); k];
    let mut reference_marks: Vec<(String, usize, f64)> = Vec::new();
    let mut n_draws = 0usize;
    for (draw, mut values) in groups {
        if values.is_empty() {
            continue;
        }
        values.sort_by(f64::total_cmp);
        if draw.is_reference() {
            for (pos, &v) in values.iter().enumerate() {
                reference_marks.push((draw.label(), pos, v));
            }
        } else {
            n_draws += 1;
            for (pos, &v) in values.iter().enumerate() {
                per_position[pos].push(v);
            }
        }
    }
    if n_draws == 0 {
        bail!("no non-reference draws to plot");
    }
    let all: Vec<f64> = per_position
        .iter()
        .flatten()
        .copied()
        .chain(reference_marks.iter().map(|&(_, _, v)| v))
        .collect();
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if lo == hi { (lo - 0.5, hi + 0.5) } else { (lo, hi) };
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);

    let mut out = String::new();
    svg_header(&mut out, &format!("{column} by rank-ordered district"));
    svg_axes(&mut out, lo, hi, "ordered district", column);
    let f = &FRAME;
    let slot = f.plot_width() / k as f64;
    let box_w = (slot * 0.55).min(48.0);
    for (pos, values) in per_position.iter_mut().enumerate() {
        if values.is_empty() {
            continue;
        }
        values.sort_by(f64::total_cmp);
        let x = f.left + (pos as f64 + 0.5) * slot;
        let q1 = quantile(values, 0.25);
        let q2 = quantile(values, 0.5);
        let q3 = quantile(values, 0.75);
        let iqr = q3 - q1;
        let lo_fence = q1 - 1.5 * iqr;
        let hi_fence = q3 + 1.5 * iqr;
        let wlo = values.iter().copied().filter(|&v| v >= lo_fence).fold(f64::INFINITY, f64::min);
        let whi =
            values.iter().copied().filter(|&v| v <= hi_fence).fold(f64::NEG_INFINITY, f64::max);
        let (y1, y2, y3) = (f.y(q1, lo, hi), f.y(q2, lo, hi), f.y(q3, lo, hi));
        let (ywlo, ywhi) = (f.y(wlo, lo, hi), f.y(whi, lo, hi));
        let _ = write!(
            out,
            r##"<line x1="{x:.2}" y1="{ywlo:.2}" x2="{x:.2}" y2="{y1:.2}" stroke="black"/>
<line x1="{x:.2}" y1="{y3:.2}" x2="{x:.2}" y2="{ywhi:.2}" stroke="black"/>
<line x1="{cx0:.2}" y1="{ywlo:.2}" x2="{cx1:.2}" y2="{ywlo:.2}" stroke="black"/>
<line x1="{cx0:.2}" y1="{ywhi:.2}" x2="{cx1:.2}" y2="{ywhi:.2}" stroke="black"/>
<rect x="{bx:.2}" y="{y3:.2}" width="{bw:.2}" height="{bh:.2}" fill="#9ecae1" stroke="black"/>
<line x1="{bx:.2}" y1="{y2:.2}" x2="{bx1:.2}" y2="{y2:.2}" stroke="black" stroke-width="2"/>
"##,
            cx0 = x - box_w * 0.25,
            cx1 = x + box_w * 0.25,
            bx = x - box_w / 2.0,
            bx1 = x + box_w / 2.0,
            bw = box_w,
            bh = (y1 - y3).max(0.5),
        );
        for &v in values.iter().filter(|&&v| v < wlo || v > whi) {
            let _ = write!(
                out,
                "<circle cx=\"{x:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"black\"/>\n",
                f.y(v, lo, hi)
            );
        }
        let _ = write!(
            out,
            "<text x=\"{x:.2}\" y=\"{ty}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            pos + 1,
            ty = f.height - f.bottom + 16.0,
        );
    }
    for (name, pos, v) in &reference_marks {
        let x = f.left + (*pos as f64 + 0.5) * slot;
        let y = f.y(*v, lo, hi);
        let _ = write!(
            out,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"7\" height=\"7\" fill=\"#d62728\"><title>{name}</title></rect>\n",
            x - 3.5,
            y - 3.5,
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Histogram of a plan-level column over non-reference draws, with
/// reference values marked as vertical lines. Bin counts sum to the
/// number of non-reference draws.
pub fn histogram(stats: &StatsTable, column: &str, bins: usize) -> Result<String> {
    if bins == 0 {
        bail!("bins must be positive");
    }
    let groups = by_draw(stats, column)?;
    let mut values = Vec::new();
    let mut references = Vec::new();
    for (draw, v) in groups {
        let Some(&first) = v.first() else { continue };
        if draw.is_reference() {
            references.push((draw.label(), first));
        } else {
            values.push(first);
        }
    }
    if values.is_empty() {
        bail!("column {column:?} has no plan-level values to plot");
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if lo == hi { (lo - 0.5, hi + 0.5) } else { (lo, hi) };
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in &values {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    debug_assert_eq!(counts.iter().sum::<usize>(), values.len());

    let max_count = counts.iter().copied().max().unwrap() as f64;
    let f = &FRAME;
    let mut out = String::new();
    svg_header(&mut out, &format!("distribution of {column}"));
    svg_axes(&mut out, 0.0, max_count, column, "plans");
    let x_of = |v: f64| f.left + (v - lo) / (hi - lo) * f.plot_width();
    for (b, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let x0 = x_of(lo + b as f64 * width);
        let x1 = x_of(lo + (b + 1) as f64 * width);
        let y = f.y(c as f64, 0.0, max_count);
        let _ = write!(
            out,
            "<rect x=\"{x0:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" fill=\"#9ecae1\" stroke=\"black\"/>\n",
            w = (x1 - x0).max(0.5),
            h = (f.height - f.bottom as f64 - y).max(0.0),
        );
    }
    for tick in nice_ticks(lo, hi) {
        let x = x_of(tick);
        let _ = write!(
            out,
            "<text x=\"{x:.2}\" y=\"{ty}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            fmt_tick(tick),
            ty = f.height - f.bottom + 16.0,
        );
    }
    for (name, v) in &references {
        if *v < lo || *v > hi {
            continue;
        }
        let x = x_of(*v);
        let _ = write!(
            out,
            r##"<line x1="{x:.2}" y1="{t}" x2="{x:.2}" y2="{b}" stroke="#d62728" stroke-width="2" stroke-dasharray="5,3"/>
<text x="{x:.2}" y="{t2}" text-anchor="middle" font-family="sans-serif" font-size="10" fill="#d62728">{name}</text>
"##,
            t = f.top,
            b = f.height - f.bottom,
            t2 = f.top - 4.0,
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn render(stats: &StatsTable, kind: PlotKind, column: &str, bins: usize) -> Result<String> {
    match kind {
        PlotKind::Boxplot => boxplot(stats, column),
        PlotKind::Histogram => histogram(stats, column, bins),
    }
}
