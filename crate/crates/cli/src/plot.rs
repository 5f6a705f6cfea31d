//! Reward-curve plots as standalone SVG. Reads any mix of per-seed and
//! aggregate metric CSVs, draws the evaluation reward and the discounted
//! return as two stacked panels, and shades the confidence band where the
//! input carries one. Rendering is pure string building, so the same inputs
//! always produce the same bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;
use crate::output::{self, AGGREGATE_HEADER, CURVE_HEADER};

const PALETTE: [&str; 6] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

const WIDTH: f64 = 900.0;
const PANEL_LEFT: f64 = 72.0;
const PANEL_RIGHT: f64 = 868.0;
const PANEL_HEIGHT: f64 = 240.0;

/// `*` in the file-name part matches any run of characters; the directory
/// part must be literal. Matches come back sorted so downstream output is
/// stable regardless of directory iteration order.
pub fn expand_glob(pattern: &str) -> Result<Vec<PathBuf>, CliError> {
    let path = Path::new(pattern);
    let name_pat = path
        .file_name()
        .and_then(|s| s.to_str())
        .ok_or_else(|| CliError::validation(format!("{pattern}: no file-name component")))?;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    if dir.to_string_lossy().contains('*') {
        return Err(CliError::validation(format!(
            "{pattern}: wildcards are only supported in the file name"
        )));
    }
    if !name_pat.contains('*') {
        if path.is_file() {
            return Ok(vec![path.to_path_buf()]);
        }
        return Err(CliError::validation(format!("{pattern}: no such file")));
    }
    let entries = fs::read_dir(dir)
        .map_err(|e| CliError::validation(format!("{}: {e}", dir.display())))?;
    let mut out = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| CliError::runtime(format!("{}: {e}", dir.display())))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if wildcard_match(name_pat, name) && entry.path().is_file() {
            out.push(dir.join(name));
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(CliError::validation(format!("{pattern}: matched no files")));
    }
    Ok(out)
}

fn wildcard_match(pattern: &str, name: &str) -> bool {
    let parts: Vec<&str> = pattern.split('*').collect();
    if parts.len() == 1 {
        return pattern == name;
    }
    let Some(mut rest) = name.strip_prefix(parts[0]) else { return false };
    let last = parts[parts.len() - 1];
    for part in &parts[1..parts.len() - 1] {
        if part.is_empty() {
            continue;
        }
        match rest.find(part) {
            Some(i) => rest = &rest[i + part.len()..],
            None => return false,
        }
    }
    rest.ends_with(last)
}

struct PlotPoint {
    x: f64,
    avg: f64,
    avg_ci: Option<f64>,
    disc: f64,
    disc_ci: Option<f64>,
}

struct Series {
    label: String,
    color: &'static str,
    points: Vec<PlotPoint>,
}

fn load_series(path: &Path, color: &'static str) -> Result<Series, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    let header = text.lines().next().unwrap_or("");
    let points = if header == CURVE_HEADER {
        output::parse_curve_csv(&text, path)?
            .into_iter()
            .map(|r| PlotPoint {
                x: r.iteration as f64,
                avg: r.avg_reward,
                avg_ci: None,
                disc: r.disc_return,
                disc_ci: None,
            })
            .collect()
    } else if header == AGGREGATE_HEADER {
        parse_aggregate(&text, path)?
    } else {
        return Err(CliError::runtime(format!(
            "{}: unrecognized header `{header}`",
            path.display()
        )));
    };
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("series");
    let label = stem.strip_suffix("_aggregate").unwrap_or(stem).to_string();
    Ok(Series { label, color, points })
}

fn parse_aggregate(text: &str, origin: &Path) -> Result<Vec<PlotPoint>, CliError> {
    let mut points = Vec::new();
    for (i, line) in text.lines().skip(1).enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let mut next = |what: &str| -> Result<&str, CliError> {
            fields.next().ok_or_else(|| {
                CliError::runtime(format!(
                    "{}: line {}: missing {what}",
                    origin.display(),
                    i + 2
                ))
            })
        };
        let parse = |field: &str, what: &str| -> Result<f64, CliError> {
            field.parse().map_err(|_| {
                CliError::runtime(format!(
                    "{}: line {}: bad {what} `{field}`",
                    origin.display(),
                    i + 2
                ))
            })
        };
        let x: f64 = parse(next("iteration")?, "iteration")?;
        let avg = parse(next("avg_reward_mean")?, "avg_reward_mean")?;
        let avg_ci = parse(next("avg_reward_ci95")?, "avg_reward_ci95")?;
        let disc = parse(next("disc_return_mean")?, "disc_return_mean")?;
        let disc_ci = parse(next("disc_return_ci95")?, "disc_return_ci95")?;
        points.push(PlotPoint { x, avg, avg_ci: Some(avg_ci), disc, disc_ci: Some(disc_ci) });
    }
    Ok(points)
}

pub fn plot_command(pattern: &str, out: &Path) -> Result<PathBuf, CliError> {
    let files = expand_glob(pattern)?;
    let mut series = Vec::with_capacity(files.len());
    for (i, file) in files.iter().enumerate() {
        series.push(load_series(file, PALETTE[i % PALETTE.len()])?);
    }
    let svg = render(&series)?;
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| CliError::runtime(format!("{}: {e}", parent.display())))?;
        }
    }
    fs::write(out, svg).map_err(|e| CliError::runtime(format!("{}: {e}", out.display())))?;
    Ok(out.to_path_buf())
}

fn fmt2(v: f64) -> String {
    format!("{v:.2}")
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    let s = if a >= 1000.0 {
        format!("{v:.0}")
    } else if a >= 1.0 {
        format!("{v:.2}")
    } else if a >= 0.001 {
        format!("{v:.4}")
    } else {
        format!("{v:.6}")
    };
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn finite_range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    (lo <= hi).then_some((lo, hi))
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    let span = hi - lo;
    let pad = if span < 1e-12 { lo.abs().max(1.0) * 0.05 } else { span * 0.05 };
    (lo - pad, hi + pad)
}

fn map(v: f64, from: (f64, f64), to: (f64, f64)) -> f64 {
    to.0 + (v - from.0) / (from.1 - from.0) * (to.1 - to.0)
}

fn render(series: &[Series]) -> Result<String, CliError> {
    let xr = finite_range(series.iter().flat_map(|s| s.points.iter().map(|p| p.x)))
        .ok_or_else(|| CliError::runtime("no data rows in matched files"))?;
    let xr = padded(xr.0, xr.1);

    // legend entries flow left to right and wrap; panel positions depend on
    // how many rows that takes
    let mut legend: Vec<(usize, f64)> = Vec::with_capacity(series.len());
    let mut row = 0usize;
    let mut x = PANEL_LEFT;
    for s in series {
        let w = 30.0 + 7.5 * s.label.len() as f64 + 18.0;
        if x > PANEL_LEFT && x + w > PANEL_RIGHT {
            row += 1;
            x = PANEL_LEFT;
        }
        legend.push((row, x));
        x += w;
    }
    let legend_h = (row + 1) as f64 * 16.0;

    let p1_top = 16.0 + legend_h + 26.0;
    let p2_top = p1_top + PANEL_HEIGHT + 64.0;
    let height = p2_top + PANEL_HEIGHT + 48.0;

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height}\" \
         viewBox=\"0 0 {WIDTH} {height}\" font-family=\"monospace\" font-size=\"12\">\n"
    );
    let _ = write!(svg, "<rect width=\"{WIDTH}\" height=\"{height}\" fill=\"#ffffff\"/>\n");

    for (s, &(row, x)) in series.iter().zip(&legend) {
        let y = 20.0 + row as f64 * 16.0;
        let _ = write!(
            svg,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
            fmt2(x),
            fmt2(y - 4.0),
            fmt2(x + 22.0),
            fmt2(y - 4.0),
            s.color
        );
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" fill=\"#222222\">{}</text>\n",
            fmt2(x + 28.0),
            fmt2(y),
            xml_escape(&s.label)
        );
    }

    draw_panel(&mut svg, series, |p| (p.avg, p.avg_ci), "average per-step reward", p1_top, xr);
    draw_panel(&mut svg, series, |p| (p.disc, p.disc_ci), "discounted return", p2_top, xr);

    svg.push_str("</svg>\n");
    Ok(svg)
}

fn draw_panel(
    svg: &mut String,
    series: &[Series],
    field: fn(&PlotPoint) -> (f64, Option<f64>),
    title: &str,
    top: f64,
    xr: (f64, f64),
) {
    let bottom = top + PANEL_HEIGHT;
    let yr = finite_range(series.iter().flat_map(|s| {
        s.points.iter().flat_map(move |p| {
            let (v, ci) = field(p);
            let half = ci.unwrap_or(0.0);
            [v - half, v + half]
        })
    }))
    .unwrap_or((0.0, 1.0));
    let yr = padded(yr.0, yr.1);

    let to_x = |v: f64| map(v, xr, (PANEL_LEFT, PANEL_RIGHT));
    let to_y = |v: f64| map(v, yr, (bottom, top));

    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"{}\" fill=\"#222222\" font-size=\"13\">{}</text>\n",
        fmt2(PANEL_LEFT),
        fmt2(top - 8.0),
        xml_escape(title)
    );

    const TICKS: usize = 5;
    for i in 0..TICKS {
        let f = i as f64 / (TICKS - 1) as f64;
        let yv = yr.0 + f * (yr.1 - yr.0);
        let y = to_y(yv);
        let _ = write!(
            svg,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#e0e0e0\"/>\n",
            fmt2(PANEL_LEFT),
            fmt2(y),
            fmt2(PANEL_RIGHT),
            fmt2(y)
        );
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" fill=\"#555555\" text-anchor=\"end\">{}</text>\n",
            fmt2(PANEL_LEFT - 6.0),
            fmt2(y + 4.0),
            tick_label(yv)
        );
        let xv = xr.0 + f * (xr.1 - xr.0);
        let x = to_x(xv);
        let _ = write!(
            svg,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#cccccc\"/>\n",
            fmt2(x),
            fmt2(bottom),
            fmt2(x),
            fmt2(bottom + 4.0)
        );
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" fill=\"#555555\" text-anchor=\"middle\">{}</text>\n",
            fmt2(x),
            fmt2(bottom + 17.0),
            tick_label(xv)
        );
    }

    for s in series {
        let has_band = s.points.iter().any(|p| field(p).1.is_some_and(|c| c > 0.0));
        if has_band {
            let mut pts = String::new();
            for p in &s.points {
                let (v, ci) = field(p);
                let _ = write!(pts, "{},{} ", fmt2(to_x(p.x)), fmt2(to_y(v + ci.unwrap_or(0.0))));
            }
            for p in s.points.iter().rev() {
                let (v, ci) = field(p);
                let _ = write!(pts, "{},{} ", fmt2(to_x(p.x)), fmt2(to_y(v - ci.unwrap_or(0.0))));
            }
            let _ = write!(
                svg,
                "<polygon points=\"{}\" fill=\"{}\" fill-opacity=\"0.18\" stroke=\"none\"/>\n",
                pts.trim_end(),
                s.color
            );
        }
    }

    for s in series {
        if s.points.is_empty() {
            continue;
        }
        let mut pts = String::new();
        for p in &s.points {
            let (v, _) = field(p);
            let _ = write!(pts, "{},{} ", fmt2(to_x(p.x)), fmt2(to_y(v)));
        }
        let _ = write!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
            pts.trim_end(),
            s.color
        );
    }

    let _ = write!(
        svg,
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444444\"/>\n",
        fmt2(PANEL_LEFT),
        fmt2(top),
        fmt2(PANEL_RIGHT - PANEL_LEFT),
        fmt2(PANEL_HEIGHT)
    );
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"{}\" fill=\"#555555\" text-anchor=\"middle\">iteration</text>\n",
        fmt2((PANEL_LEFT + PANEL_RIGHT) / 2.0),
        fmt2(bottom + 34.0)
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn scratch_dir(tag: &str) -> PathBuf {
        static NEXT: AtomicUsize = AtomicUsize::new(0);
        let dir = std::env::temp_dir().join(format!(
            "recmarl_plot_{tag}_{}_{}",
            std::process::id(),
            NEXT.fetch_add(1, Ordering::Relaxed)
        ));
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn wildcard_matching_covers_prefix_suffix_and_middle() {
        assert!(wildcard_match("run_seed3.csv", "run_seed3.csv"));
        assert!(!wildcard_match("run_seed3.csv", "run_seed4.csv"));
        assert!(wildcard_match("run_*.csv", "run_seed3.csv"));
        assert!(!wildcard_match("run_*.csv", "run_seed3.json"));
        assert!(wildcard_match("*_aggregate.csv", "power_aggregate.csv"));
        assert!(wildcard_match("a*mid*z", "a_XmidY_z"));
        assert!(!wildcard_match("a*mid*z", "a_dim_z"));
        assert!(wildcard_match("*", "anything"));
        assert!(wildcard_match("**", "a"));
        // the prefix and suffix may not overlap the same characters
        assert!(!wildcard_match("a*a", "a"));
    }

    #[test]
    fn glob_results_are_sorted_and_misses_are_errors() {
        let dir = scratch_dir("glob");
        for name in ["b_seed1.csv", "a_seed0.csv", "a_seed0.json"] {
            fs::write(dir.join(name), "x").unwrap();
        }
        let pattern = dir.join("*_seed*.csv");
        let found = expand_glob(pattern.to_str().unwrap()).unwrap();
        let names: Vec<_> = found
            .iter()
            .map(|p| p.file_name().unwrap().to_str().unwrap().to_string())
            .collect();
        assert_eq!(names, ["a_seed0.csv", "b_seed1.csv"]);

        let miss = dir.join("*.toml");
        let err = expand_glob(miss.to_str().unwrap()).unwrap_err();
        assert_eq!(err.exit_code(), 1);

        let literal = dir.join("a_seed0.csv");
        assert_eq!(expand_glob(literal.to_str().unwrap()).unwrap(), vec![literal]);
        assert!(expand_glob(dir.join("absent.csv").to_str().unwrap()).is_err());
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn rendering_is_deterministic_and_shades_aggregate_bands() {
        let dir = scratch_dir("svg");
        fs::write(
            dir.join("one_seed0.csv"),
            "iteration,avg_reward,disc_return,grad_norm\n10,0.5,5,0.1\n20,0.6,6,\n",
        )
        .unwrap();
        fs::write(
            dir.join("one_aggregate.csv"),
            "iteration,avg_reward_mean,avg_reward_ci95,disc_return_mean,disc_return_ci95\n\
             10,0.55,0.02,5.5,0.2\n20,0.65,0.02,6.5,0.2\n",
        )
        .unwrap();
        let pattern = dir.join("one_*.csv");
        let out_a = dir.join("a.svg");
        let out_b = dir.join("b.svg");
        plot_command(pattern.to_str().unwrap(), &out_a).unwrap();
        plot_command(pattern.to_str().unwrap(), &out_b).unwrap();
        let a = fs::read(&out_a).unwrap();
        let b = fs::read(&out_b).unwrap();
        assert_eq!(a, b);

        let text = String::from_utf8(a).unwrap();
        assert!(text.contains("<polygon"), "aggregate band missing");
        assert_eq!(text.matches("<polyline").count(), 4, "two series over two panels");
        assert!(text.contains("average per-step reward"));
        assert!(text.contains("discounted return"));
        // the aggregate's legend label drops the suffix
        assert!(!text.contains("one_aggregate"));
        assert!(text.contains(">one<"));
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn unreadable_headers_are_reported_with_the_file_name() {
        let dir = scratch_dir("hdr");
        let bad = dir.join("bad.csv");
        fs::write(&bad, "time,value\n1,2\n").unwrap();
        let err = plot_command(bad.to_str().unwrap(), &dir.join("out.svg")).unwrap_err();
        assert!(err.to_string().contains("bad.csv"));
        let _ = fs::remove_dir_all(&dir);
    }
}
