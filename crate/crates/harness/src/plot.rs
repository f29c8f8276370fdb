//! Static SVG power curves, one panel per `(family, d)`.
//!
//! Output is a pure function of the CSV text: series keep their order of
//! first appearance and every coordinate is printed with two decimals.

use std::path::{Path, PathBuf};

use crate::error::{HarnessError, Result};
use crate::records::{parse_power_csv, write_text, PowerRecord};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 240.0;
const TOP: f64 = 44.0;
const BOTTOM: f64 = 56.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];
const DASHES: [&str; 3] = ["", "6 3", "2 3"];

/// A rendered panel.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub file_name: String,
    pub svg: String,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Frame {
    x_lo: f64,
    x_hi: f64,
}

impl Frame {
    fn px(&self, theta: f64) -> f64 {
        LEFT + (theta - self.x_lo) / (self.x_hi - self.x_lo) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, rate: f64) -> f64 {
        TOP + (1.0 - rate) * (HEIGHT - TOP - BOTTOM)
    }
}

fn render_panel(rows: &[&PowerRecord]) -> String {
    let first = rows[0];
    let (mut x_lo, mut x_hi) = rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| {
            (a.min(r.theta), b.max(r.theta))
        });
    if x_hi - x_lo < 1e-12 {
        let pad = 0.5 * x_lo.abs().max(1.0);
        x_lo -= pad;
        x_hi += pad;
    }
    let frame = Frame { x_lo, x_hi };

    let mut series: Vec<(String, Vec<&PowerRecord>)> = Vec::new();
    for r in rows {
        let key = r.series();
        match series.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => series.push((key, vec![r])),
        }
    }
    for (_, v) in &mut series {
        v.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    }

    let mut s = String::new();
    let w = |s: &mut String, line: String| {
        s.push_str(&line);
        s.push('\n');
    };
    w(&mut s, format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
    ));
    w(
        &mut s,
        format!("<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>"),
    );
    w(&mut s, format!(
        "<text x=\"{:.2}\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">{} / {} / d = {}</text>",
        (LEFT + WIDTH - RIGHT) / 2.0,
        escape(&first.study),
        escape(&first.family),
        first.d
    ));

    for k in 0..=4 {
        let v = k as f64 / 4.0;
        let y = frame.py(v);
        w(
            &mut s,
            format!(
            "<line x1=\"{LEFT:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#dddddd\"/>",
            WIDTH - RIGHT
        ),
        );
        w(
            &mut s,
            format!(
                "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{v:.2}</text>",
                LEFT - 6.0,
                y + 4.0
            ),
        );
    }
    let mut ticks: Vec<f64> = rows.iter().map(|r| r.theta).collect();
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    for t in ticks {
        let x = frame.px(t);
        w(
            &mut s,
            format!(
                "<text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
                HEIGHT - BOTTOM + 18.0,
                t
            ),
        );
    }
    w(&mut s, format!(
        "<rect x=\"{LEFT:.2}\" y=\"{TOP:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"black\"/>",
        WIDTH - LEFT - RIGHT,
        HEIGHT - TOP - BOTTOM
    ));
    w(
        &mut s,
        format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">theta</text>",
            (LEFT + WIDTH - RIGHT) / 2.0,
            HEIGHT - 14.0
        ),
    );
    w(&mut s, format!(
        "<text x=\"16\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2})\">rejection rate</text>",
        (TOP + HEIGHT - BOTTOM) / 2.0,
        (TOP + HEIGHT - BOTTOM) / 2.0
    ));

    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let dash = DASHES[(i / PALETTE.len()) % DASHES.len()];
        let dash_attr = if dash.is_empty() {
            String::new()
        } else {
            format!(" stroke-dasharray=\"{dash}\"")
        };
        if pts.len() > 1 {
            let band: Vec<String> = pts
                .iter()
                .map(|r| format!("{:.2},{:.2}", frame.px(r.theta), frame.py(r.lo)))
                .chain(
                    pts.iter()
                        .rev()
                        .map(|r| format!("{:.2},{:.2}", frame.px(r.theta), frame.py(r.hi))),
                )
                .collect();
            w(
                &mut s,
                format!(
                "<polygon points=\"{}\" fill=\"{color}\" fill-opacity=\"0.15\" stroke=\"none\"/>",
                band.join(" ")
            ),
            );
            let line: Vec<String> = pts
                .iter()
                .map(|r| format!("{:.2},{:.2}", frame.px(r.theta), frame.py(r.rate)))
                .collect();
            w(&mut s, format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash_attr}/>",
                line.join(" ")
            ));
        }
        for r in pts {
            w(
                &mut s,
                format!(
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>",
                    frame.px(r.theta),
                    frame.py(r.rate)
                ),
            );
        }
        let ly = TOP + 8.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 14.0;
        w(&mut s, format!(
            "<line x1=\"{lx:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"{color}\" stroke-width=\"1.5\"{dash_attr}/>",
            lx + 20.0
        ));
        w(
            &mut s,
            format!(
                "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\">{}</text>",
                lx + 26.0,
                ly + 4.0,
                escape(name)
            ),
        );
    }
    w(&mut s, "</svg>".to_string());
    s
}

/// Renders one panel per `(family, d)`, in order of first appearance.
pub fn render(records: &[PowerRecord]) -> Result<Vec<Panel>> {
    if records.is_empty() {
        return Err(HarnessError::Input(
            "nothing to plot: the CSV has no data rows".into(),
        ));
    }
    let mut groups: Vec<((String, usize), Vec<&PowerRecord>)> = Vec::new();
    for r in records {
        let key = (r.family.clone(), r.d);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    Ok(groups
        .into_iter()
        .map(|((family, d), rows)| Panel {
            file_name: format!("{family}_d{d}.svg"),
            svg: render_panel(&rows),
        })
        .collect())
}

pub fn render_csv(text: &str) -> Result<Vec<Panel>> {
    render(&parse_power_csv(text)?)
}

/// Writes the panels into `dir` and returns their paths.
pub fn write_panels(panels: &[Panel], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::write(dir, e))?;
    panels
        .iter()
        .map(|p| {
            let path = dir.join(&p.file_name);
            write_text(&path, &p.svg)?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::{power_csv, POWER_HEADER};

    fn rec(method: &str, d: usize, theta: f64, k: usize) -> PowerRecord {
        let mut r = PowerRecord {
            study: "method_comparison".into(),
            method: method.into(),
            filter: "none".into(),
            family: "gaussian_mean".into(),
            d,
            theta,
            n: 20,
            m: 20,
            big_n: 10,
            lambda: "none".into(),
            rate: 0.0,
            lo: 0.0,
            hi: 0.0,
            reps: 0,
            seed: 1,
        };
        r.set_counts(k, 10);
        r
    }

    #[test]
    fn empty_data_is_an_error() {
        let e = render_csv(&format!("{POWER_HEADER}\n")).unwrap_err();
        assert!(e.to_string().contains("no data rows"), "{e}");
    }

    #[test]
    fn single_row_draws_only_a_marker() {
        let panels = render(&[rec("energy_perm", 5, 0.0, 1)]).unwrap();
        assert_eq!(panels.len(), 1);
        let svg = &panels[0].svg;
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(!svg.contains("<polyline"));
        assert!(!svg.contains("<polygon"));
    }

    #[test]
    fn one_panel_per_family_and_dimension() {
        let rows = vec![
            rec("energy_perm", 5, 0.0, 1),
            rec("energy_perm", 5, 0.5, 6),
            rec("mmdagg_uniform", 5, 0.0, 0),
            rec("mmdagg_uniform", 5, 0.5, 8),
            rec("energy_perm", 10, 0.0, 0),
        ];
        let panels = render(&rows).unwrap();
        let names: Vec<&str> = panels.iter().map(|p| p.file_name.as_str()).collect();
        assert_eq!(names, ["gaussian_mean_d5.svg", "gaussian_mean_d10.svg"]);
        assert_eq!(panels[0].svg.matches("<polyline").count(), 2);
        assert_eq!(render_csv(&power_csv(&rows)).unwrap(), panels);
    }
}
