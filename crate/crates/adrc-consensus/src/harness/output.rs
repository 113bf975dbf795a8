//! Artifact emission: CSV tables and hand-emitted SVG line charts.
//!
//! Numbers in CSV output use C's `%.12g` rendering (12 significant digits,
//! scientific notation outside the fixed-point range, trailing zeros
//! stripped), which keeps files compact and diff-friendly while preserving
//! more precision than the plots need. Charts are minimal static SVG:
//! one polyline per series, a frame, ticks, and a legend — enough to
//! mirror the reference figure panels without a charting dependency.

use super::metrics::MetricsReport;
use super::scenario::Scenario;
use crate::engine::Trace;
use crate::plant::{total_disturbance_oracle, OracleError};

/// Render with `sig` significant digits following C's `%g` rules.
pub fn format_sig(x: f64, sig: usize) -> String {
    debug_assert!(sig >= 1);
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x < 0.0 { "-inf".into() } else { "inf".into() };
    }
    // Let the scientific formatter pick the decimal exponent (this also
    // accounts for rounding carrying into the next decade).
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("float formatting yields exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if exp < -4 || exp >= sig as i32 {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = sig as i32 - 1 - exp;
        if decimals <= 0 {
            format!("{x:.0}")
        } else {
            trim_fraction(&format!("{x:.*}", decimals as usize))
        }
    }
}

/// `%.12g`, the trace and metrics CSV number format.
pub fn format_g(x: f64) -> String {
    format_sig(x, 12)
}

fn trim_fraction(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Full trace as CSV with LF line endings. Header layout:
/// `t,x0_1..x0_n`, then per agent `x{i}_1..x{i}_n,xh{i}_1..xh{i}_{n+1},u{i},y{i}`.
pub fn trace_csv(trace: &Trace) -> String {
    let (n, m) = (trace.n(), trace.m());
    let mut header = vec!["t".to_string()];
    for q in 1..=n {
        header.push(format!("x0_{q}"));
    }
    for i in 1..=m {
        for q in 1..=n {
            header.push(format!("x{i}_{q}"));
        }
        for q in 1..=n + 1 {
            header.push(format!("xh{i}_{q}"));
        }
        header.push(format!("u{i}"));
        header.push(format!("y{i}"));
    }
    let mut out = header.join(",");
    out.push('\n');
    for k in 0..trace.len() {
        out.push_str(&format_g(trace.time(k)));
        for &v in trace.row(k) {
            out.push(',');
            out.push_str(&format_g(v));
        }
        out.push('\n');
    }
    out
}

/// Metrics summary CSV; one row per `(r, agent)` pair.
pub fn metrics_csv(reports: &[MetricsReport]) -> String {
    let mut out = String::from("r,agent,tail_sup_tracking,tail_sup_estimation,max_state_norm\n");
    for rep in reports {
        for a in &rep.agents {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                format_g(rep.r),
                a.agent,
                format_g(a.tail_sup_tracking),
                format_g(a.tail_sup_estimation),
                format_g(a.max_state_norm)
            ));
        }
    }
    out
}

/// One chart line.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];
const SVG_W: f64 = 880.0;
const SVG_H: f64 = 500.0;
const PLOT_X: (f64, f64) = (64.0, 680.0);
const PLOT_Y: (f64, f64) = (44.0, 456.0);
/// Points per series beyond which the polyline is decimated.
const MAX_POINTS: usize = 1600;

/// Emit a static line chart of `series` titled `title`; the x axis is
/// always time.
pub fn plot_svg(title: &str, y_label: &str, series: &[Series]) -> String {
    let mut xs = (f64::INFINITY, f64::NEG_INFINITY);
    let mut ys = (f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for &(x, y) in &s.points {
            xs = (xs.0.min(x), xs.1.max(x));
            ys = (ys.0.min(y), ys.1.max(y));
        }
    }
    if !xs.0.is_finite() || xs.0 >= xs.1 {
        xs = (xs.0.min(0.0), xs.0.min(0.0) + 1.0);
    }
    if !ys.0.is_finite() {
        ys = (-1.0, 1.0);
    }
    if ys.1 - ys.0 < 1e-12 {
        ys = (ys.0 - 1.0, ys.1 + 1.0);
    } else {
        let pad = 0.05 * (ys.1 - ys.0);
        ys = (ys.0 - pad, ys.1 + pad);
    }
    let px = |x: f64| PLOT_X.0 + (x - xs.0) / (xs.1 - xs.0) * (PLOT_X.1 - PLOT_X.0);
    let py = |y: f64| PLOT_Y.1 - (y - ys.0) / (ys.1 - ys.0) * (PLOT_Y.1 - PLOT_Y.0);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" \
         viewBox=\"0 0 {SVG_W} {SVG_H}\" font-family=\"sans-serif\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{:.0}\" y=\"26\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
        (PLOT_X.0 + PLOT_X.1) / 2.0,
        xml_escape(title)
    ));

    // Frame and ticks.
    svg.push_str(&format!(
        "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"#333\"/>\n",
        PLOT_X.0,
        PLOT_Y.0,
        PLOT_X.1 - PLOT_X.0,
        PLOT_Y.1 - PLOT_Y.0
    ));
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let xv = xs.0 + f * (xs.1 - xs.0);
        let yv = ys.0 + f * (ys.1 - ys.0);
        svg.push_str(&format!(
            "<line x1=\"{0:.1}\" y1=\"{1:.1}\" x2=\"{0:.1}\" y2=\"{2:.1}\" stroke=\"#333\"/>\n",
            px(xv),
            PLOT_Y.1,
            PLOT_Y.1 + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"11\">{}</text>\n",
            px(xv),
            PLOT_Y.1 + 18.0,
            format_sig(xv, 4)
        ));
        svg.push_str(&format!(
            "<line x1=\"{0:.1}\" y1=\"{1:.1}\" x2=\"{2:.1}\" y2=\"{1:.1}\" stroke=\"#333\"/>\n",
            PLOT_X.0 - 5.0,
            py(yv),
            PLOT_X.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"11\">{}</text>\n",
            PLOT_X.0 - 8.0,
            py(yv) + 4.0,
            format_sig(yv, 4)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.0}\" y=\"{:.0}\" text-anchor=\"middle\" font-size=\"13\">t</text>\n",
        (PLOT_X.0 + PLOT_X.1) / 2.0,
        SVG_H - 8.0
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{:.0}\" text-anchor=\"middle\" font-size=\"13\" \
         transform=\"rotate(-90 18 {:.0})\">{}</text>\n",
        (PLOT_Y.0 + PLOT_Y.1) / 2.0,
        (PLOT_Y.0 + PLOT_Y.1) / 2.0,
        xml_escape(y_label)
    ));

    // Zero line when the y range straddles zero.
    if ys.0 < 0.0 && ys.1 > 0.0 {
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{1:.1}\" x2=\"{2:.1}\" y2=\"{1:.1}\" stroke=\"#bbb\" \
             stroke-dasharray=\"4 3\"/>\n",
            PLOT_X.0,
            py(0.0),
            PLOT_X.1
        ));
    }

    for (s_idx, s) in series.iter().enumerate() {
        let color = PALETTE[s_idx % PALETTE.len()];
        let stride = s.points.len().div_ceil(MAX_POINTS).max(1);
        let mut pts = String::new();
        for (p_idx, &(x, y)) in s.points.iter().enumerate() {
            if p_idx % stride != 0 && p_idx != s.points.len() - 1 {
                continue;
            }
            pts.push_str(&format!("{:.2},{:.2} ", px(x), py(y)));
        }
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.4\" points=\"{}\"/>\n",
            pts.trim_end()
        ));
        // Legend row.
        let ly = PLOT_Y.0 + 14.0 + 18.0 * s_idx as f64;
        svg.push_str(&format!(
            "<line x1=\"{0:.1}\" y1=\"{ly:.1}\" x2=\"{1:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" \
             stroke-width=\"2\"/>\n",
            PLOT_X.1 + 14.0,
            PLOT_X.1 + 40.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\">{}</text>\n",
            PLOT_X.1 + 46.0,
            ly + 4.0,
            xml_escape(&s.label)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// The three standard run charts: output tracking errors, the highest
/// plotted plant state per agent, and total-disturbance estimation errors.
pub struct Charts {
    pub tracking: String,
    pub states: String,
    pub estimation: String,
}

pub fn standard_charts(trace: &Trace, scn: &Scenario) -> Result<Charts, OracleError> {
    let n = trace.n();
    let times: Vec<f64> = (0..trace.len()).map(|k| trace.time(k)).collect();

    let mut tracking = Vec::new();
    let mut states = Vec::new();
    let mut estimation = Vec::new();
    // Plot the second state when the order allows (the classic
    // boundedness panel); fall back to the first for order-1 chains.
    let state_idx = if n >= 2 { 1 } else { 0 };
    for agent in 1..=trace.m() {
        tracking.push(Series {
            label: format!("agent {agent}"),
            points: times
                .iter()
                .enumerate()
                .map(|(k, &t)| (t, trace.y(k, agent) - trace.x0(k)[0]))
                .collect(),
        });
        states.push(Series {
            label: format!("x{agent}_{}", state_idx + 1),
            points: times
                .iter()
                .enumerate()
                .map(|(k, &t)| (t, trace.x(k, agent)[state_idx]))
                .collect(),
        });
        // Charts show the signed error; the absolute-error helper in the
        // observer module is only the metrics path.
        let oracle = total_disturbance_oracle(&scn.followers[agent - 1], n, trace, agent)?;
        estimation.push(Series {
            label: format!("agent {agent}"),
            points: times
                .iter()
                .enumerate()
                .map(|(k, &t)| (t, trace.xhat(k, agent)[n] - oracle[k]))
                .collect(),
        });
    }
    Ok(Charts {
        tracking: plot_svg("Output tracking errors", "y_i - y_0", &tracking),
        states: plot_svg("Follower state trajectories", "x_i", &states),
        estimation: plot_svg(
            "Total-disturbance estimation errors",
            "estimate - reconstruction",
            &estimation,
        ),
    })
}
