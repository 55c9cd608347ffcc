//! Runtime profiles: the fraction of (run, target) pairs solved within a given
//! number of evaluations, per algorithm and group, plus the virtual best solver.
//!
//! Unsolved targets never enter the support; they only keep a curve below 1.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::harness::RunRecord;

pub const SCHEMA_VERSION: u32 = 1;
/// Algorithm id of the virtual best solver.
pub const VBS_ID: &str = "VBS";
const CSV_MARKER: &str = "# bono profile csv v";

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileCurve {
    pub group: String,
    pub algorithm: String,
    /// Whether the support counts evaluations divided by the dimension.
    pub per_dimension: bool,
    /// Strictly increasing.
    pub support: Vec<f64>,
    /// Non-decreasing, in `[0, 1]`.
    pub fraction_solved: Vec<f64>,
}

impl ProfileCurve {
    /// The fraction solved after `x` evaluations (or evaluations per variable).
    pub fn at(&self, x: f64) -> f64 {
        match self.support.partition_point(|&s| s <= x) {
            0 => 0.0,
            k => self.fraction_solved[k - 1],
        }
    }

    pub fn final_fraction(&self) -> f64 {
        self.fraction_solved.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum GroupKey {
    Class,
    Dimension,
}

/// How records are split into groups. Indicators are always kept apart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grouping {
    pub keys: Vec<GroupKey>,
    pub per_dimension: bool,
}

impl Default for Grouping {
    fn default() -> Self {
        Self {
            keys: Vec::new(),
            per_dimension: true,
        }
    }
}

impl FromStr for Grouping {
    type Err = Error;

    /// Comma-separated keys out of `class`, `dim`; `none` or empty for one group
    /// per indicator.
    fn from_str(s: &str) -> Result<Self> {
        let mut keys = BTreeSet::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "class" => keys.insert(GroupKey::Class),
                "dim" | "dimension" => keys.insert(GroupKey::Dimension),
                "indicator" | "none" => false,
                other => {
                    return Err(Error::Argument(format!(
                        "unknown group key {other:?}; expected class, dim or none"
                    )))
                }
            };
        }
        Ok(Self {
            keys: keys.into_iter().collect(),
            per_dimension: true,
        })
    }
}

impl Grouping {
    fn label(&self, r: &RunRecord) -> String {
        let mut label = r.indicator.clone();
        for k in &self.keys {
            match k {
                GroupKey::Class => write!(label, "/{}", r.instance.class),
                GroupKey::Dimension => write!(label, "/d{}", r.instance.dimension),
            }
            .expect("writing to a string");
        }
        label
    }
}

/// One ECDF per (group, algorithm), sorted by group then algorithm.
pub fn aggregate(records: &[RunRecord], grouping: &Grouping) -> Vec<ProfileCurve> {
    if records.is_empty() {
        log::warn!("no run records to aggregate");
        return Vec::new();
    }
    // (group, algorithm) -> (hitting times, total targets)
    let mut cells: BTreeMap<(String, String), (Vec<f64>, usize)> = BTreeMap::new();
    for r in records {
        let cell = cells
            .entry((grouping.label(r), r.algorithm.clone()))
            .or_default();
        let scale = if grouping.per_dimension {
            r.instance.dimension as f64
        } else {
            1.0
        };
        cell.0
            .extend(r.hits.iter().flatten().map(|&h| h as f64 / scale));
        cell.1 += r.hits.len();
    }
    cells
        .into_iter()
        .map(|((group, algorithm), (mut times, total))| {
            times.sort_by(f64::total_cmp);
            let mut support: Vec<f64> = Vec::new();
            let mut fraction_solved = Vec::new();
            for (i, &t) in times.iter().enumerate() {
                let f = (i + 1) as f64 / total as f64;
                if support.last() == Some(&t) {
                    *fraction_solved.last_mut().expect("parallel vectors") = f;
                } else {
                    support.push(t);
                    fraction_solved.push(f);
                }
            }
            ProfileCurve {
                group,
                algorithm,
                per_dimension: grouping.per_dimension,
                support,
                fraction_solved,
            }
        })
        .collect()
}

/// Per instance, indicator and target, the earliest hit over all algorithms.
/// Every algorithm must cover every (instance, indicator) cell.
pub fn virtual_best(records: &[RunRecord]) -> Result<Vec<RunRecord>> {
    let algorithms: BTreeSet<&str> = records
        .iter()
        .map(|r| r.algorithm.as_str())
        .filter(|a| *a != VBS_ID)
        .collect();
    let mut cells: BTreeMap<(String, usize, u64, &str), BTreeMap<&str, &RunRecord>> =
        BTreeMap::new();
    for r in records.iter().filter(|r| r.algorithm != VBS_ID) {
        let key = (
            r.instance.class.to_string(),
            r.instance.dimension,
            r.instance.seed,
            r.indicator.as_str(),
        );
        cells
            .entry(key)
            .or_default()
            .insert(r.algorithm.as_str(), r);
    }
    let mut missing = Vec::new();
    for ((class, d, seed, ind), runs) in &cells {
        for a in &algorithms {
            if !runs.contains_key(a) {
                missing.push(format!("{a} on {class} d={d} seed={seed} {ind}"));
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::Argument(format!(
            "virtual best needs every algorithm on every instance; missing: {}",
            missing.join("; ")
        )));
    }
    let mut out = Vec::with_capacity(cells.len());
    for runs in cells.values() {
        let first = *runs.values().next().expect("non-empty cell");
        if runs.values().any(|r| r.targets != first.targets) {
            return Err(Error::Argument(format!(
                "runs on {} {} use different targets",
                first.instance.class, first.indicator
            )));
        }
        let hits = (0..first.hits.len())
            .map(|i| runs.values().filter_map(|r| r.hits[i]).min())
            .collect();
        out.push(RunRecord {
            algorithm: VBS_ID.to_string(),
            instance: first.instance.clone(),
            indicator: first.indicator.clone(),
            targets: first.targets.clone(),
            hits,
            budget: runs.values().map(|r| r.budget).max().unwrap_or(0),
            budget_used: runs.values().map(|r| r.budget_used).max().unwrap_or(0),
            final_regret: runs
                .values()
                .map(|r| r.final_regret)
                .fold(f64::INFINITY, f64::min),
            failure: None,
        });
    }
    Ok(out)
}

fn x_column(per_dimension: bool) -> &'static str {
    if per_dimension {
        "evals_per_d"
    } else {
        "evals"
    }
}

/// Writes curves as CSV: a version comment, then `group,algorithm,evals_per_d,fraction_solved`
/// (`evals` instead of `evals_per_d` for unnormalized curves).
pub fn write_csv<W: Write>(curves: &[ProfileCurve], mut out: W) -> Result<()> {
    let per_dimension = curves.first().is_none_or(|c| c.per_dimension);
    if curves.iter().any(|c| c.per_dimension != per_dimension) {
        return Err(Error::Argument(
            "curves mix normalized and raw evaluation counts".into(),
        ));
    }
    writeln!(out, "{CSV_MARKER}{SCHEMA_VERSION}")?;
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record([
        "group",
        "algorithm",
        x_column(per_dimension),
        "fraction_solved",
    ])
    .map_err(io)?;
    for c in curves {
        if c.support.is_empty() {
            w.write_record([c.group.as_str(), &c.algorithm, "", "0"])
                .map_err(io)?;
        }
        for (x, f) in c.support.iter().zip(&c.fraction_solved) {
            w.write_record([
                c.group.as_str(),
                &c.algorithm,
                &x.to_string(),
                &f.to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads curves written by [`write_csv`]. A curve with no solved targets is a
/// single row with an empty x field.
pub fn read_csv<R: Read>(mut input: R) -> Result<Vec<ProfileCurve>> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let (first, rest) = text.split_once('\n').unwrap_or((&text, ""));
    match first.trim_end().strip_prefix(CSV_MARKER) {
        Some(v) if v == SCHEMA_VERSION.to_string() => {}
        _ => {
            return Err(Error::parse(
                "line 1",
                format!("expected \"{CSV_MARKER}{SCHEMA_VERSION}\""),
            ))
        }
    }
    let mut rd = csv::Reader::from_reader(rest.as_bytes());
    let header = rd
        .headers()
        .map_err(|e| Error::parse("header", e.to_string()))?;
    let per_dimension = match header.get(2) {
        Some("evals_per_d") => true,
        Some("evals") => false,
        _ => {
            return Err(Error::parse(
                "header",
                "third column must be evals_per_d or evals",
            ))
        }
    };
    if header.get(0) != Some("group")
        || header.get(1) != Some("algorithm")
        || header.get(3) != Some("fraction_solved")
    {
        return Err(Error::parse(
            "header",
            "expected group,algorithm,<x>,fraction_solved",
        ));
    }
    let mut curves: Vec<ProfileCurve> = Vec::new();
    for (n, row) in rd.records().enumerate() {
        let line = n + 3;
        let row = row.map_err(|e| Error::parse(format!("line {line}"), e.to_string()))?;
        let real = |i: usize| -> Result<f64> {
            row[i].parse().map_err(|_| {
                Error::parse(
                    format!("line {line}"),
                    format!("not a number: {:?}", &row[i]),
                )
            })
        };
        let empty = row[2].is_empty();
        let (x, f) = if empty {
            (f64::NAN, real(3)?)
        } else {
            (real(2)?, real(3)?)
        };
        if empty && f != 0.0 {
            return Err(Error::parse(
                format!("line {line}"),
                "a row without x must have fraction 0",
            ));
        }
        let same = curves
            .last()
            .is_some_and(|c| c.group == row[0] && c.algorithm == row[1]);
        if !same {
            curves.push(ProfileCurve {
                group: row[0].to_string(),
                algorithm: row[1].to_string(),
                per_dimension,
                support: Vec::new(),
                fraction_solved: Vec::new(),
            });
        }
        let c = curves.last_mut().expect("just pushed");
        if empty {
            if same {
                return Err(Error::parse(
                    format!("line {line}"),
                    "empty curve row inside a curve",
                ));
            }
            continue;
        }
        if c.support.last().is_some_and(|&s| s >= x)
            || c.fraction_solved.last().is_some_and(|&p| p > f)
        {
            return Err(Error::parse(
                format!("line {line}"),
                "curve is not increasing",
            ));
        }
        c.support.push(x);
        c.fraction_solved.push(f);
    }
    Ok(curves)
}

/// Look of the SVG output. Read from `key = value` lines with [`SvgStyle::parse`].
#[derive(Debug, Clone, PartialEq)]
pub struct SvgStyle {
    pub width: f64,
    pub panel_height: f64,
    pub font_family: String,
    pub font_size: f64,
    pub stroke_width: f64,
    pub background: String,
    pub palette: Vec<String>,
    pub title: Option<String>,
}

impl Default for SvgStyle {
    fn default() -> Self {
        Self {
            width: 720.0,
            panel_height: 360.0,
            font_family: "sans-serif".into(),
            font_size: 12.0,
            stroke_width: 1.5,
            background: "white".into(),
            palette: [
                "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2",
                "#17becf",
            ]
            .map(String::from)
            .to_vec(),
            title: None,
        }
    }
}

impl SvgStyle {
    /// Parses `key = value` lines; `#` starts a comment. Keys: width, panel_height,
    /// font_family, font_size, stroke_width, background, palette (comma-separated),
    /// title.
    pub fn parse(text: &str) -> Result<Self> {
        let mut style = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = format!("line {}", n + 1);
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(&at, "expected key = value"))?;
            let (key, value) = (key.trim(), value.trim());
            let number = || -> Result<f64> {
                value
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite() && *v > 0.0)
                    .ok_or_else(|| {
                        Error::parse(format!("{at}, {key}"), "expected a positive number")
                    })
            };
            match key {
                "width" => style.width = number()?,
                "panel_height" => style.panel_height = number()?,
                "font_size" => style.font_size = number()?,
                "stroke_width" => style.stroke_width = number()?,
                "font_family" => style.font_family = value.to_string(),
                "background" => style.background = value.to_string(),
                "title" => style.title = Some(value.to_string()),
                "palette" => {
                    style.palette = value
                        .split(',')
                        .map(|c| c.trim().to_string())
                        .filter(|c| !c.is_empty())
                        .collect();
                    if style.palette.is_empty() {
                        return Err(Error::parse(format!("{at}, palette"), "no colours given"));
                    }
                }
                other => return Err(Error::parse(&at, format!("unknown key {other:?}"))),
            }
        }
        Ok(style)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders curves as a standalone SVG: one panel per group, log-scaled x axis with
/// decade ticks, one step polyline per curve and a legend.
pub fn render_svg(curves: &[ProfileCurve], style: &SvgStyle) -> Result<String> {
    if curves.is_empty() {
        return Err(Error::Argument("no curves to draw".into()));
    }
    let mut groups: BTreeMap<&str, Vec<&ProfileCurve>> = BTreeMap::new();
    for c in curves {
        groups.entry(c.group.as_str()).or_default().push(c);
    }
    let algorithms: BTreeSet<&str> = curves.iter().map(|c| c.algorithm.as_str()).collect();
    let colour = |a: &str| -> String {
        if a == VBS_ID {
            return "black".into();
        }
        let i = algorithms
            .iter()
            .filter(|&&x| x != VBS_ID)
            .position(|&x| x == a)
            .unwrap_or(0);
        style.palette[i % style.palette.len()].clone()
    };

    let xs: Vec<f64> = curves
        .iter()
        .flat_map(|c| c.support.iter().copied())
        .filter(|&x| x > 0.0)
        .collect();
    let lo_exp = xs
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
        .log10()
        .floor();
    let hi_exp = xs
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
        .log10()
        .ceil();
    let (lo_exp, hi_exp) = if lo_exp.is_finite() && hi_exp.is_finite() {
        (lo_exp as i32, (hi_exp as i32).max(lo_exp as i32 + 1))
    } else {
        (0, 1)
    };
    let x_label = if curves[0].per_dimension {
        "evaluations / d"
    } else {
        "evaluations"
    };

    let fs = style.font_size;
    let (left, right, top, bottom) = (4.5 * fs, 11.0 * fs, 2.5 * fs, 3.5 * fs);
    let title_h = if style.title.is_some() { 2.0 * fs } else { 0.0 };
    let (w, ph) = (style.width, style.panel_height);
    let total_h = title_h + ph * groups.len() as f64;
    let plot_w = w - left - right;
    let plot_h = ph - top - bottom;

    let mut s = String::new();
    let out = &mut s;
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{total_h}" viewBox="0 0 {w} {total_h}" font-family="{}" font-size="{fs}">"#,
        escape(&style.font_family)
    );
    let _ = writeln!(
        out,
        r#"<rect width="100%" height="100%" fill="{}"/>"#,
        escape(&style.background)
    );
    if let Some(t) = &style.title {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="{}">{}</text>"#,
            w / 2.0,
            1.4 * fs,
            1.2 * fs,
            escape(t)
        );
    }
    for (p, (group, members)) in groups.iter().enumerate() {
        let y0 = title_h + p as f64 * ph + top;
        let x0 = left;
        let sx = |x: f64| x0 + (x.log10() - lo_exp as f64) / (hi_exp - lo_exp) as f64 * plot_w;
        let sy = |f: f64| y0 + (1.0 - f) * plot_h;
        let _ = writeln!(out, r#"<g class="panel">"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            x0 + plot_w / 2.0,
            y0 - 0.8 * fs,
            escape(group)
        );
        let _ = writeln!(
            out,
            r##"<rect x="{x0}" y="{y0}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#444"/>"##
        );
        for e in lo_exp..=hi_exp {
            let x = sx(10f64.powi(e));
            let _ = writeln!(
                out,
                r##"<line x1="{x}" y1="{y0}" x2="{x}" y2="{}" stroke="#ddd"/>"##,
                y0 + plot_h
            );
            let _ = writeln!(
                out,
                r#"<text class="xtick" x="{x}" y="{}" text-anchor="middle">10<tspan dy="{}" font-size="{}">{e}</tspan></text>"#,
                y0 + plot_h + 1.3 * fs,
                -0.5 * fs,
                0.75 * fs
            );
        }
        for k in 0..=4 {
            let f = k as f64 / 4.0;
            let y = sy(f);
            let _ = writeln!(
                out,
                r##"<line x1="{x0}" y1="{y}" x2="{}" y2="{y}" stroke="#ddd"/>"##,
                x0 + plot_w
            );
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" text-anchor="end">{f}</text>"#,
                x0 - 0.4 * fs,
                y + 0.35 * fs
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#,
            x0 + plot_w / 2.0,
            y0 + plot_h + 2.8 * fs
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle" transform="rotate(-90 {} {})">fraction of targets solved</text>"#,
            x0 - 3.2 * fs,
            y0 + plot_h / 2.0,
            x0 - 3.2 * fs,
            y0 + plot_h / 2.0
        );
        let x_end = 10f64.powi(hi_exp);
        for (i, c) in members.iter().enumerate() {
            let mut pts = vec![(10f64.powi(lo_exp), 0.0)];
            let mut prev = 0.0;
            for (&x, &f) in c.support.iter().zip(&c.fraction_solved) {
                let x = x.max(10f64.powi(lo_exp));
                pts.push((x, prev));
                pts.push((x, f));
                prev = f;
            }
            pts.push((x_end, prev));
            let coords: Vec<String> = pts
                .iter()
                .map(|&(x, f)| format!("{:.2},{:.2}", sx(x), sy(f)))
                .collect();
            let dash = if c.algorithm == VBS_ID {
                r#" stroke-dasharray="6 3""#
            } else {
                ""
            };
            let col = colour(&c.algorithm);
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{}" stroke-width="{}"{dash} points="{}"><title>{}</title></polyline>"#,
                escape(&col),
                style.stroke_width,
                coords.join(" "),
                escape(&c.algorithm)
            );
            let ly = y0 + (i as f64 + 0.5) * 1.5 * fs;
            let lx = x0 + plot_w + 1.0 * fs;
            let _ = writeln!(
                out,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="{}"{dash}/>"#,
                lx + 1.8 * fs,
                escape(&col),
                style.stroke_width
            );
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}">{}</text>"#,
                lx + 2.3 * fs,
                ly + 0.35 * fs,
                escape(&c.algorithm)
            );
        }
        let _ = writeln!(out, "</g>");
    }
    let _ = writeln!(out, "</svg>");
    Ok(s)
}
