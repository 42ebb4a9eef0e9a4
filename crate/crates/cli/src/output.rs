//! Atomic file output and small static SVG plots.
//!
//! Every artifact is written through a temporary file in the target
//! directory and renamed into place, so a crashed run never leaves a
//! truncated file behind and reruns are byte-for-byte comparable.

use crate::error::CliError;
use leadflow_core::econometrics::{KdeCurve, ModelFit};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".tmp");
    path.with_file_name(name)
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    Ok(())
}

/// Streams `write` into `path` atomically (temp file + rename).
pub fn atomic_write<F>(path: &Path, write: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<(), CliError>,
{
    ensure_parent(path)?;
    let tmp = tmp_path(path);
    let result = (|| {
        let mut writer = BufWriter::new(File::create(&tmp)?);
        write(&mut writer)?;
        writer.flush()?;
        Ok(())
    })();
    match result {
        Ok(()) => {
            fs::rename(&tmp, path)?;
            Ok(())
        }
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(e)
        }
    }
}

/// Atomic variant for writers that take a path rather than a stream.
pub fn atomic_write_via_path<F>(path: &Path, write: F) -> Result<(), CliError>
where
    F: FnOnce(&Path) -> Result<(), CliError>,
{
    ensure_parent(path)?;
    let tmp = tmp_path(path);
    match write(&tmp) {
        Ok(()) => {
            fs::rename(&tmp, path)?;
            Ok(())
        }
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(e)
        }
    }
}

/// Writes a `key,value` summary table. Values are CSV-quoted when needed.
pub fn write_summary(path: &Path, entries: &[(String, String)]) -> Result<(), CliError> {
    atomic_write(path, |w| {
        writeln!(w, "key,value")?;
        for (k, v) in entries {
            writeln!(w, "{},{}", csv_field(k), csv_field(v))?;
        }
        Ok(())
    })
}

fn csv_field(raw: &str) -> String {
    if raw.contains([',', '"', '\n']) {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw.to_string()
    }
}

// ---------------------------------------------------------------------------
// SVG plots. Hand-assembled markup keeps the output free of plotting
// dependencies and byte-deterministic.
// ---------------------------------------------------------------------------

const SVG_WIDTH: f64 = 720.0;
const SVG_HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 56.0;

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        let span = (self.x_max - self.x_min).max(f64::MIN_POSITIVE);
        MARGIN_LEFT + (x - self.x_min) / span * (SVG_WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        let span = (self.y_max - self.y_min).max(f64::MIN_POSITIVE);
        SVG_HEIGHT - MARGIN_BOTTOM
            - (y - self.y_min) / span * (SVG_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn svg_header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_WIDTH}\" height=\"{SVG_HEIGHT}\" \
         viewBox=\"0 0 {SVG_WIDTH} {SVG_HEIGHT}\" font-family=\"sans-serif\">\n\
         <rect width=\"{SVG_WIDTH}\" height=\"{SVG_HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
        SVG_WIDTH / 2.0,
        escape_xml(title)
    )
}

fn escape_xml(raw: &str) -> String {
    raw.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(frame: &Frame, x_label: &str, y_label: &str) -> String {
    let mut out = String::new();
    let x0 = frame.px(frame.x_min);
    let x1 = frame.px(frame.x_max);
    let y0 = frame.py(frame.y_min);
    let y1 = frame.py(frame.y_max);
    out.push_str(&format!(
        "<line x1=\"{x0:.1}\" y1=\"{y0:.1}\" x2=\"{x1:.1}\" y2=\"{y0:.1}\" stroke=\"black\"/>\n\
         <line x1=\"{x0:.1}\" y1=\"{y0:.1}\" x2=\"{x0:.1}\" y2=\"{y1:.1}\" stroke=\"black\"/>\n"
    ));
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = frame.x_min + t * (frame.x_max - frame.x_min);
        let yv = frame.y_min + t * (frame.y_max - frame.y_min);
        let xp = frame.px(xv);
        let yp = frame.py(yv);
        out.push_str(&format!(
            "<line x1=\"{xp:.1}\" y1=\"{y0:.1}\" x2=\"{xp:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n\
             <text x=\"{xp:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            y0 + 5.0,
            y0 + 18.0,
            format_tick(xv)
        ));
        out.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{yp:.1}\" x2=\"{x0:.1}\" y2=\"{yp:.1}\" stroke=\"black\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            x0 - 5.0,
            x0 - 8.0,
            yp + 4.0,
            format_tick(yv)
        ));
    }
    out.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
        (MARGIN_LEFT + SVG_WIDTH - MARGIN_RIGHT) / 2.0,
        SVG_HEIGHT - 14.0,
        escape_xml(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"18\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\" \
         transform=\"rotate(-90 18 {:.1})\">{}</text>\n",
        (MARGIN_TOP + SVG_HEIGHT - MARGIN_BOTTOM) / 2.0,
        (MARGIN_TOP + SVG_HEIGHT - MARGIN_BOTTOM) / 2.0,
        escape_xml(y_label)
    ));
    out
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if !(0.001..1000.0).contains(&a) {
        format!("{v:.2e}")
    } else if a >= 10.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    }
}

/// Renders a fitted density curve as a standalone SVG document.
pub fn kde_svg(curve: &KdeCurve, title: &str) -> String {
    let x_min = curve.points.first().map(|p| p.0).unwrap_or(0.0);
    let x_max = curve.points.last().map(|p| p.0).unwrap_or(1.0);
    let y_max = curve
        .points
        .iter()
        .map(|p| p.1)
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE)
        * 1.05;
    let frame = Frame {
        x_min,
        x_max,
        y_min: 0.0,
        y_max,
    };
    let mut svg = svg_header(title);
    svg.push_str(&axes(&frame, "value", "density"));
    let points: Vec<String> = curve
        .points
        .iter()
        .map(|&(x, d)| format!("{:.2},{:.2}", frame.px(x), frame.py(d)))
        .collect();
    svg.push_str(&format!(
        "<polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"1.5\" points=\"{}\"/>\n",
        points.join(" ")
    ));
    svg.push_str("</svg>\n");
    svg
}

/// Renders a coefficient dot plot (estimate plus a 95% band) for one fit.
pub fn coefficient_svg(fit: &ModelFit, title: &str) -> String {
    let rows = &fit.coefficients;
    let mut lo = 0.0_f64;
    let mut hi = 0.0_f64;
    for c in rows {
        lo = lo.min(c.estimate - 1.96 * c.std_err);
        hi = hi.max(c.estimate + 1.96 * c.std_err);
    }
    let pad = ((hi - lo).abs()).max(1e-12) * 0.08;
    let frame = Frame {
        x_min: lo - pad,
        x_max: hi + pad,
        y_min: 0.0,
        y_max: rows.len() as f64,
    };
    let mut svg = svg_header(title);
    svg.push_str(&axes(&frame, "estimate", ""));
    let zero_x = frame.px(0.0);
    svg.push_str(&format!(
        "<line x1=\"{zero_x:.1}\" y1=\"{:.1}\" x2=\"{zero_x:.1}\" y2=\"{:.1}\" \
         stroke=\"#888888\" stroke-dasharray=\"4 3\"/>\n",
        frame.py(frame.y_min),
        frame.py(frame.y_max)
    ));
    for (idx, c) in rows.iter().enumerate() {
        let y = frame.py(idx as f64 + 0.5);
        let x_lo = frame.px(c.estimate - 1.96 * c.std_err);
        let x_hi = frame.px(c.estimate + 1.96 * c.std_err);
        let x_mid = frame.px(c.estimate);
        svg.push_str(&format!(
            "<line x1=\"{x_lo:.1}\" y1=\"{y:.1}\" x2=\"{x_hi:.1}\" y2=\"{y:.1}\" \
             stroke=\"#c23b22\" stroke-width=\"1.5\"/>\n\
             <circle cx=\"{x_mid:.1}\" cy=\"{y:.1}\" r=\"3.5\" fill=\"#c23b22\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            MARGIN_LEFT - 8.0,
            y + 4.0,
            escape_xml(&c.name)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use leadflow_core::econometrics::kde;

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested").join("out.csv");
        atomic_write(&path, |w| {
            writeln!(w, "a,b")?;
            Ok(())
        })
        .unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "a,b\n");
        let names: Vec<_> = std::fs::read_dir(path.parent().unwrap())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names, vec![std::ffi::OsString::from("out.csv")]);
    }

    #[test]
    fn failed_write_cleans_up_and_keeps_old_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        std::fs::write(&path, "old").unwrap();
        let err = atomic_write(&path, |w| {
            writeln!(w, "partial")?;
            Err(CliError::data("boom"))
        });
        assert!(err.is_err());
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "old");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn summary_quotes_awkward_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("summary.csv");
        write_summary(
            &path,
            &[("field".to_string(), "a,b \"c\"".to_string())],
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "key,value\nfield,\"a,b \"\"c\"\"\"\n");
    }

    #[test]
    fn kde_svg_is_wellformed_and_deterministic() {
        let sample = [0.1, 0.4, 0.45, 0.9, 1.3, 1.32, 2.0];
        let curve = kde(&sample).unwrap();
        let a = kde_svg(&curve, "density");
        let b = kde_svg(&curve, "density");
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.ends_with("</svg>\n"));
        assert!(a.contains("polyline"));
    }
}
