use plotters::coord::Shift;
use plotters::prelude::*;

use super::run::TrialRow;
use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Grouped bars of success rate per difficulty level.
    SuccessVsDifficulty,
    /// Mean negated reward of successful trials per difficulty, with std error bars.
    RewardVsDifficulty,
    /// Box plot (min, quartiles, median, max) of realized cost per swept value.
    CostBox,
    /// Negated reward and success rate side by side per swept value.
    RewardSuccessBars,
}

impl PlotKind {
    pub const ALL: [PlotKind; 4] = [
        PlotKind::SuccessVsDifficulty,
        PlotKind::RewardVsDifficulty,
        PlotKind::CostBox,
        PlotKind::RewardSuccessBars,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlotKind::SuccessVsDifficulty => "success_vs_difficulty",
            PlotKind::RewardVsDifficulty => "reward_vs_difficulty",
            PlotKind::CostBox => "cost_box",
            PlotKind::RewardSuccessBars => "reward_success_bars",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

const WIDTH: u32 = 800;
const HEIGHT: u32 = 500;

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |v| format!("{v}"))
}

/// Swept variable used as the category axis, with each row's category label.
fn category_axis(rows: &[TrialRow], prefer_difficulty: bool) -> (&'static str, Vec<String>) {
    let distinct = |f: &dyn Fn(&TrialRow) -> String| {
        let mut v: Vec<String> = rows.iter().map(f).collect();
        v.dedup();
        v.sort();
        v.dedup();
        v.len()
    };
    let difficulty = |r: &TrialRow| fmt_opt(r.difficulty);
    let k = |r: &TrialRow| fmt_opt(r.k);
    let alpha = |r: &TrialRow| format!("{}", r.alpha);
    let (name, f): (&str, &dyn Fn(&TrialRow) -> String) = if prefer_difficulty {
        ("difficulty", &difficulty)
    } else if distinct(&k) > 1 {
        ("K", &k)
    } else if distinct(&alpha) > 1 {
        ("alpha", &alpha)
    } else {
        ("difficulty", &difficulty)
    };
    (name, rows.iter().map(f).collect())
}

/// Sorted unique labels, ordered numerically when they parse.
fn ordered(labels: &[String]) -> Vec<String> {
    let mut v = labels.to_vec();
    v.sort_by(|a, b| match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x.total_cmp(&y),
        _ => a.cmp(b),
    });
    v.dedup();
    v
}

struct Series {
    name: String,
    /// Per category: samples.
    values: Vec<Vec<f64>>,
}

fn group(
    rows: &[TrialRow],
    cats: &[String],
    labels: &[String],
    value: impl Fn(&TrialRow) -> Option<f64>,
) -> Vec<Series> {
    let mut algos: Vec<_> = rows.iter().map(|r| r.algorithm).collect();
    algos.sort();
    algos.dedup();
    algos
        .into_iter()
        .map(|a| Series {
            name: a.name().to_string(),
            values: cats
                .iter()
                .map(|c| {
                    rows.iter()
                        .zip(labels)
                        .filter(|(r, l)| r.algorithm == a && *l == c)
                        .filter_map(|(r, _)| value(r))
                        .collect()
                })
                .collect(),
        })
        .collect()
}

fn mean_std(xs: &[f64]) -> Option<(f64, Option<f64>)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let sd = (xs.len() > 1).then(|| (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    Some((m, sd))
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn draw_err<E: std::fmt::Display>(e: E) -> HarnessError {
    HarnessError::Plot(e.to_string())
}

/// Bar height with an optional error half-width.
type Bar = Option<(f64, Option<f64>)>;

/// Grouped bars with optional error bars. `agg` maps samples to a [`Bar`].
#[allow(clippy::too_many_arguments)]
fn bar_panel(
    area: &DrawingArea<SVGBackend, Shift>,
    title: &str,
    x_name: &str,
    y_name: &str,
    cats: &[String],
    series: &[Series],
    agg: impl Fn(&[f64]) -> Bar,
    y_max: Option<f64>,
) -> Result<(), HarnessError> {
    let bars: Vec<Vec<Bar>> = series
        .iter()
        .map(|s| s.values.iter().map(|v| agg(v)).collect())
        .collect();
    let top = y_max.unwrap_or_else(|| {
        let m = bars
            .iter()
            .flatten()
            .flatten()
            .map(|(h, e)| h + e.unwrap_or(0.0))
            .fold(0.0f64, f64::max);
        if m > 0.0 {
            m * 1.15
        } else {
            1.0
        }
    });
    let n_cat = cats.len();
    let mut chart = ChartBuilder::on(area)
        .caption(title, ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(-0.5f64..(n_cat as f64 - 0.5), 0f64..top)
        .map_err(draw_err)?;
    chart
        .configure_mesh()
        .disable_x_mesh()
        .x_desc(x_name)
        .y_desc(y_name)
        .x_labels(n_cat.max(2) * 2 + 1)
        .x_label_formatter(&|x| {
            let i = x.round();
            if (x - i).abs() < 1e-6 && i >= 0.0 && (i as usize) < n_cat {
                cats[i as usize].clone()
            } else {
                String::new()
            }
        })
        .draw()
        .map_err(draw_err)?;
    let width = 0.8 / series.len() as f64;
    for (si, (s, heights)) in series.iter().zip(&bars).enumerate() {
        let color = Palette99::pick(si).to_rgba();
        let offset = -0.4 + width * si as f64;
        let rects = heights.iter().enumerate().filter_map(|(ci, b)| {
            b.map(|(h, _)| {
                let x0 = ci as f64 + offset;
                Rectangle::new([(x0, 0.0), (x0 + width * 0.9, h)], color.filled())
            })
        });
        chart
            .draw_series(rects)
            .map_err(draw_err)?
            .label(s.name.clone())
            .legend(move |(x, y)| Rectangle::new([(x, y - 5), (x + 10, y + 5)], color.filled()));
        let errs = heights.iter().enumerate().filter_map(|(ci, b)| {
            let (h, e) = (*b)?;
            let e = e?;
            let xc = ci as f64 + offset + width * 0.45;
            Some(ErrorBar::new_vertical(
                xc,
                (h - e).max(0.0),
                h,
                h + e,
                BLACK.filled(),
                6,
            ))
        });
        chart.draw_series(errs).map_err(draw_err)?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(draw_err)?;
    Ok(())
}

fn box_panel(
    area: &DrawingArea<SVGBackend, Shift>,
    x_name: &str,
    cats: &[String],
    series: &[Series],
) -> Result<(), HarnessError> {
    let top = series
        .iter()
        .flat_map(|s| s.values.iter().flatten())
        .copied()
        .fold(0.0f64, f64::max);
    let top = if top > 0.0 { top * 1.1 } else { 1.0 };
    let n_cat = cats.len();
    let mut chart = ChartBuilder::on(area)
        .caption("realized cost", ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(-0.5f64..(n_cat as f64 - 0.5), 0f64..top)
        .map_err(draw_err)?;
    chart
        .configure_mesh()
        .disable_x_mesh()
        .x_desc(x_name)
        .y_desc("total cost")
        .x_labels(n_cat.max(2) * 2 + 1)
        .x_label_formatter(&|x| {
            let i = x.round();
            if (x - i).abs() < 1e-6 && i >= 0.0 && (i as usize) < n_cat {
                cats[i as usize].clone()
            } else {
                String::new()
            }
        })
        .draw()
        .map_err(draw_err)?;
    let width = 0.8 / series.len() as f64;
    for (si, s) in series.iter().enumerate() {
        let color = Palette99::pick(si).to_rgba();
        let offset = -0.4 + width * si as f64;
        let mut elems: Vec<DynElement<SVGBackend, (f64, f64)>> = Vec::new();
        for (ci, vals) in s.values.iter().enumerate() {
            if vals.is_empty() {
                continue;
            }
            let mut v = vals.clone();
            v.sort_by(f64::total_cmp);
            let (lo, q1, med, q3, hi) = (
                v[0],
                quantile(&v, 0.25),
                quantile(&v, 0.5),
                quantile(&v, 0.75),
                v[v.len() - 1],
            );
            let x0 = ci as f64 + offset + width * 0.1;
            let x1 = x0 + width * 0.8;
            let xc = 0.5 * (x0 + x1);
            elems.push(Rectangle::new([(x0, q1), (x1, q3)], color.mix(0.4).filled()).into_dyn());
            elems.push(Rectangle::new([(x0, q1), (x1, q3)], color.stroke_width(1)).into_dyn());
            elems.push(PathElement::new(vec![(x0, med), (x1, med)], BLACK.stroke_width(2)).into_dyn());
            elems.push(PathElement::new(vec![(xc, q3), (xc, hi)], color.stroke_width(1)).into_dyn());
            elems.push(PathElement::new(vec![(xc, q1), (xc, lo)], color.stroke_width(1)).into_dyn());
            for y in [lo, hi] {
                elems.push(
                    PathElement::new(
                        vec![(x0 + width * 0.2, y), (x1 - width * 0.2, y)],
                        color.stroke_width(1),
                    )
                    .into_dyn(),
                );
            }
        }
        chart
            .draw_series(elems)
            .map_err(draw_err)?
            .label(s.name.clone())
            .legend(move |(x, y)| Rectangle::new([(x, y - 5), (x + 10, y + 5)], color.filled()));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(draw_err)?;
    Ok(())
}

/// Renders `rows` as a self-contained SVG document.
pub fn emit_plot(rows: &[TrialRow], kind: PlotKind) -> Result<String, HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::Plot("empty table".into()));
    }
    let prefer_difficulty = matches!(kind, PlotKind::SuccessVsDifficulty | PlotKind::RewardVsDifficulty);
    let (x_name, labels) = category_axis(rows, prefer_difficulty);
    let cats = ordered(&labels);
    let mut svg = String::new();
    {
        let size = if kind == PlotKind::RewardSuccessBars {
            (2 * WIDTH, HEIGHT)
        } else {
            (WIDTH, HEIGHT)
        };
        let root = SVGBackend::with_string(&mut svg, size).into_drawing_area();
        root.fill(&WHITE).map_err(draw_err)?;
        let success = |r: &TrialRow| Some(if r.success { 1.0 } else { 0.0 });
        let reward = |r: &TrialRow| r.success.then_some(r.negated_reward);
        let rate = |v: &[f64]| mean_std(v).map(|(m, _)| (m, None));
        match kind {
            PlotKind::SuccessVsDifficulty => {
                let s = group(rows, &cats, &labels, success);
                bar_panel(
                    &root,
                    "success rate",
                    x_name,
                    "success rate",
                    &cats,
                    &s,
                    rate,
                    Some(1.0),
                )?;
            }
            PlotKind::RewardVsDifficulty => {
                let s = group(rows, &cats, &labels, reward);
                bar_panel(
                    &root,
                    "negated reward (successful trials)",
                    x_name,
                    "steps",
                    &cats,
                    &s,
                    mean_std,
                    None,
                )?;
            }
            PlotKind::CostBox => {
                let s = group(rows, &cats, &labels, |r| r.planned.then_some(r.realized_cost));
                box_panel(&root, x_name, &cats, &s)?;
            }
            PlotKind::RewardSuccessBars => {
                let (left, right) = root.split_horizontally(WIDTH);
                let s = group(rows, &cats, &labels, reward);
                bar_panel(
                    &left,
                    "negated reward (successful trials)",
                    x_name,
                    "steps",
                    &cats,
                    &s,
                    mean_std,
                    None,
                )?;
                let s = group(rows, &cats, &labels, success);
                bar_panel(
                    &right,
                    "success rate",
                    x_name,
                    "success rate",
                    &cats,
                    &s,
                    rate,
                    Some(1.0),
                )?;
            }
        }
        root.present().map_err(draw_err)?;
    }
    Ok(svg)
}
