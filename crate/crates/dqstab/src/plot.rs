//! Self-contained SVG renderers for the four plot kinds the CLI emits:
//! Nyquist loci of the minor loop, Bode magnitude/phase of its eigenvalue
//! loci, eigenvalue spectra across a parameter sweep, and simulation time
//! series. Output is plain SVG text with no script and no external assets,
//! rendered deterministically (fixed canvas, fixed palette, coordinates
//! printed with three decimals) so artifacts diff cleanly between runs.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::export::write_text;
use crate::freq::EigenLoci;
use crate::sim::TimeSeries;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

/// Longest polyline we emit; denser series are strided down. Keeps a 20 s
/// simulation plot near 100 kB instead of tens of MB.
const MAX_POINTS: usize = 2400;

pub fn write_svg(path: &Path, svg: &str) -> Result<()> {
    write_text(path, svg)
}

/// Nyquist plot of both eigenvalue loci with the unit circle and the
/// critical point marked. The view window is square and clamped so the
/// neighbourhood of -1 stays readable even when the low-frequency gain is
/// large; points outside the window are clipped, not dropped.
pub fn nyquist_svg(loci: &EigenLoci, title: &str) -> Result<String> {
    if loci.omega.is_empty() {
        return Err(Error::EmptyDataset("nyquist plot needs at least one locus point".into()));
    }
    let mut r: f64 = 1.6;
    for z in loci.lambda1.iter().chain(&loci.lambda2) {
        if z.re.is_finite() && z.im.is_finite() {
            r = r.max(z.re.abs()).max(z.im.abs());
        }
    }
    let r = (r * 1.08).min(8.0);

    let frame = Frame { x0: 80.0, y0: 46.0, w: 560.0, h: 560.0 };
    let xs = Scale::lin(-r, r, frame.x0, frame.x0 + frame.w);
    let ys = Scale::lin(-r, r, frame.y0 + frame.h, frame.y0);
    let mut c = Canvas::new(720.0, frame.y0 + frame.h + 58.0, title);

    c.begin_panel(&frame, "p0");
    c.grid_and_ticks(&frame, &xs, Dir::X, 7);
    c.grid_and_ticks(&frame, &ys, Dir::Y, 7);
    write!(
        c.defer,
        "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"{:.3}\" class=\"unit\"/>",
        xs.map(0.0),
        ys.map(0.0),
        xs.map(1.0) - xs.map(0.0)
    )
    .unwrap();
    let (cx, cy) = (xs.map(-1.0), ys.map(0.0));
    write!(
        c.defer,
        "<path d=\"M{:.3},{:.3} L{:.3},{:.3} M{:.3},{:.3} L{:.3},{:.3}\" class=\"crit\"/>",
        cx - 5.0,
        cy - 5.0,
        cx + 5.0,
        cy + 5.0,
        cx - 5.0,
        cy + 5.0,
        cx + 5.0,
        cy - 5.0
    )
    .unwrap();

    for (k, locus) in [&loci.lambda1, &loci.lambda2].into_iter().enumerate() {
        let pts: Vec<(f64, f64)> = locus.iter().map(|z| (z.re, z.im)).collect();
        c.polyline(&pts, &xs, &ys, PALETTE[k], 1.5);
        // Mirror image: the locus for negative frequencies is the conjugate.
        let conj: Vec<(f64, f64)> = locus.iter().map(|z| (z.re, -z.im)).collect();
        c.polyline_dashed(&conj, &xs, &ys, PALETTE[k], 1.0);
    }
    c.end_panel();

    c.text(cx + 9.0, cy + 4.0, "crit", "start", "-1");
    c.axis_label_x(&frame, "Re λ(jω)");
    c.axis_label_y(&frame, "Im λ(jω)");
    c.legend(&frame, &[("λ1", PALETTE[0]), ("λ2", PALETTE[1])]);
    Ok(c.finish())
}

/// Bode plot of the two eigenvalue loci: magnitude in dB and unwrapped phase
/// in degrees over a logarithmic frequency axis in Hz.
pub fn bode_svg(loci: &EigenLoci, title: &str) -> Result<String> {
    bode_render(
        &[
            BodeSeries { label: "λ1", loci, locus: 0, dashed: false },
            BodeSeries { label: "λ2", loci, locus: 1, dashed: false },
        ],
        title,
    )
}

/// Bode overlay of the extended-loop loci (solid) against the standard-loop
/// loci (dashed, primed labels). The two sample sets may sit on different
/// grids; each curve carries its own frequency axis.
pub fn bode_compare_svg(
    extended: &EigenLoci,
    standard: &EigenLoci,
    title: &str,
) -> Result<String> {
    bode_render(
        &[
            BodeSeries { label: "λ1", loci: extended, locus: 0, dashed: false },
            BodeSeries { label: "λ2", loci: extended, locus: 1, dashed: false },
            BodeSeries { label: "λ1'", loci: standard, locus: 0, dashed: true },
            BodeSeries { label: "λ2'", loci: standard, locus: 1, dashed: true },
        ],
        title,
    )
}

struct BodeSeries<'a> {
    label: &'a str,
    loci: &'a EigenLoci,
    /// 0 for `lambda1`, 1 for `lambda2`.
    locus: usize,
    dashed: bool,
}

fn bode_render(series: &[BodeSeries], title: &str) -> Result<String> {
    if series.iter().all(|s| s.loci.omega.is_empty()) {
        return Err(Error::EmptyDataset("bode plot needs at least one locus point".into()));
    }
    let curve = |s: &BodeSeries| -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
        let l = if s.locus == 0 { &s.loci.lambda1 } else { &s.loci.lambda2 };
        let f: Vec<f64> = s.loci.omega.iter().map(|w| w / TAU).collect();
        let mag = f
            .iter()
            .zip(l)
            .filter(|(_, z)| z.norm() > 0.0)
            .map(|(&fk, z)| (fk, 20.0 * z.norm().log10()))
            .collect();
        let deg = unwrap_deg(l.iter().map(|z| z.arg().to_degrees()));
        (mag, f.iter().copied().zip(deg).collect())
    };
    let curves: Vec<(Vec<(f64, f64)>, Vec<(f64, f64)>)> = series.iter().map(curve).collect();

    let mut f_lo = f64::INFINITY;
    let mut f_hi = f64::NEG_INFINITY;
    for s in series {
        if let (Some(first), Some(last)) = (s.loci.omega.first(), s.loci.omega.last()) {
            f_lo = f_lo.min(first / TAU);
            f_hi = f_hi.max(last / TAU);
        }
    }

    let (top, bot) = (
        Frame { x0: 80.0, y0: 46.0, w: 840.0, h: 230.0 },
        Frame { x0: 80.0, y0: 46.0 + 230.0 + 34.0, w: 840.0, h: 230.0 },
    );
    let mut c = Canvas::new(960.0, bot.y0 + bot.h + 58.0, title);

    let xs_top = Scale::log(f_lo, f_hi, top.x0, top.x0 + top.w);
    let (mut m_lo, mut m_hi) = y_extent(curves.iter().flat_map(|c| &c.0).map(|p| p.1));
    m_lo = m_lo.min(-1.0);
    m_hi = m_hi.max(1.0);
    let ys = Scale::lin(m_lo, m_hi, top.y0 + top.h, top.y0);
    c.begin_panel(&top, "p0");
    c.log_ticks(&top, &xs_top, false);
    c.grid_and_ticks(&top, &ys, Dir::Y, 6);
    c.ref_line_y(&top, &ys, 0.0);
    for (k, (mag, _)) in curves.iter().enumerate() {
        let color = PALETTE[k % 2];
        if series[k].dashed {
            c.polyline_dashed(mag, &xs_top, &ys, color, 1.2);
        } else {
            c.polyline(mag, &xs_top, &ys, color, 1.5);
        }
    }
    c.end_panel();
    c.axis_label_y(&top, "|λ| (dB)");

    let xs_bot = Scale::log(f_lo, f_hi, bot.x0, bot.x0 + bot.w);
    let (p_lo, p_hi) = y_extent(curves.iter().flat_map(|c| &c.1).map(|p| p.1));
    let ys = Scale::lin(p_lo, p_hi, bot.y0 + bot.h, bot.y0);
    c.begin_panel(&bot, "p1");
    c.log_ticks(&bot, &xs_bot, true);
    c.grid_and_ticks(&bot, &ys, Dir::Y, 6);
    for r in [-180.0, 180.0] {
        if r > p_lo && r < p_hi {
            c.ref_line_y(&bot, &ys, r);
        }
    }
    for (k, (_, phase)) in curves.iter().enumerate() {
        let color = PALETTE[k % 2];
        if series[k].dashed {
            c.polyline_dashed(phase, &xs_bot, &ys, color, 1.2);
        } else {
            c.polyline(phase, &xs_bot, &ys, color, 1.5);
        }
    }
    c.end_panel();
    c.axis_label_y(&bot, "∠λ (deg)");
    c.axis_label_x(&bot, "f (Hz)");
    let entries: Vec<(&str, &str)> =
        series.iter().enumerate().map(|(k, s)| (s.label, PALETTE[k % 2])).collect();
    c.legend(&top, &entries);
    Ok(c.finish())
}

/// Whole-system eigenvalue spectra for a family of parameter values, one
/// colour per value, drawn in the sub-synchronous window (growth rate and
/// frequency both within ±35 of the axes) where the stability boundary
/// crossings live. The imaginary axis is marked; a spectrum entirely outside
/// the window falls back to its full extent.
pub fn eigtrace_svg(traces: &[(f64, Vec<Complex64>)], param: &str, title: &str) -> Result<String> {
    if traces.iter().all(|(_, s)| s.is_empty()) {
        return Err(Error::EmptyDataset("eigenvalue trace plot needs at least one spectrum".into()));
    }
    let window = |z: &Complex64| z.re >= -35.0 && (z.im / TAU).abs() <= 35.0;
    let mut pts: Vec<(usize, f64, f64)> = Vec::new();
    for (k, (_, spec)) in traces.iter().enumerate() {
        for z in spec.iter().filter(|z| window(z)) {
            pts.push((k, z.re, z.im / TAU));
        }
    }
    if pts.is_empty() {
        for (k, (_, spec)) in traces.iter().enumerate() {
            for z in spec {
                pts.push((k, z.re, z.im / TAU));
            }
        }
    }

    let (mut x_lo, mut x_hi) = y_extent(pts.iter().map(|p| p.1));
    x_lo = x_lo.min(-0.5);
    x_hi = x_hi.max(0.5);
    let (y_lo, y_hi) = y_extent(pts.iter().map(|p| p.2));

    let frame = Frame { x0: 80.0, y0: 46.0, w: 700.0, h: 430.0 };
    let xs = Scale::lin(x_lo, x_hi, frame.x0, frame.x0 + frame.w);
    let ys = Scale::lin(y_lo, y_hi, frame.y0 + frame.h, frame.y0);
    let mut c = Canvas::new(960.0, frame.y0 + frame.h + 58.0, title);

    c.begin_panel(&frame, "p0");
    c.grid_and_ticks(&frame, &xs, Dir::X, 7);
    c.grid_and_ticks(&frame, &ys, Dir::Y, 7);
    c.ref_line_x(&frame, &xs, 0.0);
    for &(k, re, f) in &pts {
        write!(
            c.defer,
            "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"3\" fill=\"{}\" fill-opacity=\"0.85\"/>",
            xs.map(re),
            ys.map(f),
            PALETTE[k % PALETTE.len()]
        )
        .unwrap();
    }
    c.end_panel();

    c.axis_label_x(&frame, "growth rate (1/s)");
    c.axis_label_y(&frame, "f (Hz)");
    let labels: Vec<(String, &str)> = traces
        .iter()
        .enumerate()
        .map(|(k, (v, _))| (format!("{param}={v}"), PALETTE[k % PALETTE.len()]))
        .collect();
    let refs: Vec<(&str, &str)> = labels.iter().map(|(s, c)| (s.as_str(), *c)).collect();
    c.legend_outside(&frame, &refs);
    Ok(c.finish())
}

/// Stacked single-channel panels over a shared time axis. An empty channel
/// list plots every recorded channel; a truncated run gets its divergence
/// instant marked.
pub fn timeseries_svg(ts: &TimeSeries, channels: &[&str], title: &str) -> Result<String> {
    if ts.t.len() < 2 {
        return Err(Error::EmptyDataset(format!(
            "time-series plot needs at least two samples, got {}",
            ts.t.len()
        )));
    }
    let names: Vec<&str> = if channels.is_empty() {
        ts.names.iter().map(|s| s.as_str()).collect()
    } else {
        channels.to_vec()
    };

    let (ph, gap) = (150.0, 26.0);
    let n = names.len() as f64;
    let mut c = Canvas::new(960.0, 46.0 + n * ph + (n - 1.0) * gap + 58.0, title);
    let t_lo = ts.t[0];
    let t_hi = ts.t[ts.t.len() - 1];

    let mut last_frame = Frame { x0: 80.0, y0: 46.0, w: 840.0, h: ph };
    for (k, name) in names.iter().enumerate() {
        let data = ts.channel(name)?;
        let frame = Frame { x0: 80.0, y0: 46.0 + k as f64 * (ph + gap), w: 840.0, h: ph };
        let xs = Scale::lin(t_lo, t_hi, frame.x0, frame.x0 + frame.w);
        let (lo, hi) = y_extent(data.iter().copied());
        let ys = Scale::lin(lo, hi, frame.y0 + frame.h, frame.y0);

        c.begin_panel(&frame, &format!("p{k}"));
        c.grid_and_ticks(&frame, &xs, Dir::X, 8);
        c.grid_and_ticks(&frame, &ys, Dir::Y, 4);
        let series: Vec<(f64, f64)> = ts.t.iter().copied().zip(data.iter().copied()).collect();
        c.polyline(&series, &xs, &ys, PALETTE[k % PALETTE.len()], 1.2);
        if let Some(div) = &ts.divergence {
            if div.t >= t_lo && div.t <= t_hi {
                write!(
                    c.defer,
                    "<line x1=\"{0:.3}\" y1=\"{1:.3}\" x2=\"{0:.3}\" y2=\"{2:.3}\" class=\"crit\" stroke-dasharray=\"5,3\"/>",
                    xs.map(div.t),
                    frame.y0,
                    frame.y0 + frame.h
                )
                .unwrap();
            }
        }
        c.end_panel();
        c.text(frame.x0 + 8.0, frame.y0 + 15.0, "chan", "start", name);
        last_frame = frame;
    }
    if let Some(div) = &ts.divergence {
        c.text(
            last_frame.x0 + last_frame.w,
            last_frame.y0 + last_frame.h + 34.0,
            "crit-label",
            "end",
            &format!("diverged at t = {:.4} s ({})", div.t, div.state),
        );
    }
    c.axis_label_x(&last_frame, "t (s)");
    Ok(c.finish())
}

struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
}

#[derive(Clone, Copy)]
struct Scale {
    lo: f64,
    hi: f64,
    p0: f64,
    p1: f64,
    log: bool,
}

impl Scale {
    fn lin(lo: f64, hi: f64, p0: f64, p1: f64) -> Self {
        Self { lo, hi, p0, p1, log: false }
    }

    fn log(lo: f64, hi: f64, p0: f64, p1: f64) -> Self {
        Self { lo, hi, p0, p1, log: true }
    }

    fn map(&self, v: f64) -> f64 {
        let (a, b, x) = if self.log {
            (self.lo.log10(), self.hi.log10(), v.log10())
        } else {
            (self.lo, self.hi, v)
        };
        if b == a {
            return 0.5 * (self.p0 + self.p1);
        }
        self.p0 + (x - a) / (b - a) * (self.p1 - self.p0)
    }
}

enum Dir {
    X,
    Y,
}

/// Data range padded for display: 5% margin, degenerate ranges widened.
fn y_extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (-1.0, 1.0);
    }
    if hi - lo < 1e-12 * lo.abs().max(1.0) {
        let pad = lo.abs().max(1.0) * 0.5;
        return (lo - pad, hi + pad);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

fn nice_step(range: f64, target: usize) -> f64 {
    let raw = range / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let n = if norm <= 1.0 {
        1.0
    } else if norm <= 2.0 {
        2.0
    } else if norm <= 5.0 {
        5.0
    } else {
        10.0
    };
    n * mag
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let s = format!("{:.decimals$}", v + 0.0);
    if s == "-0" || s.starts_with("-0.") && s[3..].chars().all(|c| c == '0') {
        s[1..].to_string()
    } else {
        s
    }
}

fn unwrap_deg(raw: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out = Vec::new();
    let mut offset = 0.0;
    let mut prev: Option<f64> = None;
    for p in raw {
        let mut v = p + offset;
        if let Some(q) = prev {
            while v - q > 180.0 {
                offset -= 360.0;
                v -= 360.0;
            }
            while q - v > 180.0 {
                offset += 360.0;
                v += 360.0;
            }
        }
        prev = Some(v);
        out.push(v);
    }
    out
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Accumulates SVG markup. Panel content is clipped to the frame; `defer`
/// collects elements written inside the current panel group.
struct Canvas {
    head: String,
    defer: String,
    w: f64,
    h: f64,
}

impl Canvas {
    fn new(w: f64, h: f64, title: &str) -> Self {
        let mut head = String::new();
        write!(
            head,
            "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\
             <text x=\"{:.3}\" y=\"24\" class=\"title\" text-anchor=\"middle\">{}</text>",
            w / 2.0,
            esc(title)
        )
        .unwrap();
        Self { head, defer: String::new(), w, h }
    }

    fn begin_panel(&mut self, f: &Frame, id: &str) {
        write!(
            self.head,
            "<clipPath id=\"{id}\"><rect x=\"{:.3}\" y=\"{:.3}\" width=\"{:.3}\" height=\"{:.3}\"/></clipPath>\
             <rect x=\"{:.3}\" y=\"{:.3}\" width=\"{:.3}\" height=\"{:.3}\" class=\"frame\"/>",
            f.x0, f.y0, f.w, f.h, f.x0, f.y0, f.w, f.h
        )
        .unwrap();
        write!(self.defer, "<g clip-path=\"url(#{id})\">").unwrap();
    }

    fn end_panel(&mut self) {
        self.defer.push_str("</g>");
        self.head.push_str(&self.defer);
        self.defer.clear();
    }

    /// Grid lines with tick labels along one direction of the frame. Tick
    /// labels go outside the panel, grid lines inside (into `defer` so they
    /// are clipped with the data).
    fn grid_and_ticks(&mut self, f: &Frame, s: &Scale, dir: Dir, target: usize) {
        let step = nice_step(s.hi - s.lo, target);
        let mut v = (s.lo / step).ceil() * step;
        while v <= s.hi + step * 1e-9 {
            let p = s.map(v);
            match dir {
                Dir::X => {
                    write!(
                        self.defer,
                        "<line x1=\"{p:.3}\" y1=\"{:.3}\" x2=\"{p:.3}\" y2=\"{:.3}\" class=\"grid\"/>",
                        f.y0,
                        f.y0 + f.h
                    )
                    .unwrap();
                    self.text(p, f.y0 + f.h + 16.0, "tick", "middle", &tick_label(v, step));
                }
                Dir::Y => {
                    write!(
                        self.defer,
                        "<line x1=\"{:.3}\" y1=\"{p:.3}\" x2=\"{:.3}\" y2=\"{p:.3}\" class=\"grid\"/>",
                        f.x0,
                        f.x0 + f.w
                    )
                    .unwrap();
                    self.text(f.x0 - 6.0, p + 4.0, "tick", "end", &tick_label(v, step));
                }
            }
            v += step;
        }
    }

    /// Decade grid for a logarithmic x axis; labels optional so stacked
    /// panels can share one labelled axis.
    fn log_ticks(&mut self, f: &Frame, s: &Scale, label: bool) {
        let k_lo = s.lo.log10().ceil() as i32;
        let k_hi = s.hi.log10().floor() as i32;
        for k in k_lo..=k_hi {
            let v = 10f64.powi(k);
            let p = s.map(v);
            write!(
                self.defer,
                "<line x1=\"{p:.3}\" y1=\"{:.3}\" x2=\"{p:.3}\" y2=\"{:.3}\" class=\"grid\"/>",
                f.y0,
                f.y0 + f.h
            )
            .unwrap();
            if label {
                self.text(p, f.y0 + f.h + 16.0, "tick", "middle", &format!("{v}"));
            }
            for m in 2..10 {
                let vm = v * m as f64;
                if vm < s.hi {
                    let pm = s.map(vm);
                    write!(
                        self.defer,
                        "<line x1=\"{pm:.3}\" y1=\"{:.3}\" x2=\"{pm:.3}\" y2=\"{:.3}\" class=\"grid-minor\"/>",
                        f.y0,
                        f.y0 + f.h
                    )
                    .unwrap();
                }
            }
        }
    }

    fn ref_line_y(&mut self, f: &Frame, ys: &Scale, v: f64) {
        let p = ys.map(v);
        write!(
            self.defer,
            "<line x1=\"{:.3}\" y1=\"{p:.3}\" x2=\"{:.3}\" y2=\"{p:.3}\" class=\"refline\"/>",
            f.x0,
            f.x0 + f.w
        )
        .unwrap();
    }

    fn ref_line_x(&mut self, f: &Frame, xs: &Scale, v: f64) {
        let p = xs.map(v);
        write!(
            self.defer,
            "<line x1=\"{p:.3}\" y1=\"{:.3}\" x2=\"{p:.3}\" y2=\"{:.3}\" class=\"refline\"/>",
            f.y0,
            f.y0 + f.h
        )
        .unwrap();
    }

    /// Polyline through finite points, strided to `MAX_POINTS`, split into
    /// segments at non-finite gaps.
    fn polyline(&mut self, pts: &[(f64, f64)], xs: &Scale, ys: &Scale, color: &str, width: f64) {
        self.path(pts, xs, ys, color, width, None);
    }

    fn polyline_dashed(
        &mut self,
        pts: &[(f64, f64)],
        xs: &Scale,
        ys: &Scale,
        color: &str,
        width: f64,
    ) {
        self.path(pts, xs, ys, color, width, Some("4,4"));
    }

    fn path(
        &mut self,
        pts: &[(f64, f64)],
        xs: &Scale,
        ys: &Scale,
        color: &str,
        width: f64,
        dash: Option<&str>,
    ) {
        let stride = pts.len().div_ceil(MAX_POINTS).max(1);
        let mut d = String::new();
        let mut pen_down = false;
        for (i, &(x, y)) in pts.iter().enumerate() {
            if i % stride != 0 && i != pts.len() - 1 {
                continue;
            }
            if !(x.is_finite() && y.is_finite()) {
                pen_down = false;
                continue;
            }
            let cmd = if pen_down { 'L' } else { 'M' };
            write!(d, "{cmd}{:.3},{:.3}", xs.map(x), ys.map(y)).unwrap();
            pen_down = true;
        }
        if d.is_empty() {
            return;
        }
        let dash = dash.map(|p| format!(" stroke-dasharray=\"{p}\"")).unwrap_or_default();
        write!(
            self.defer,
            "<path d=\"{d}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\"{dash}/>"
        )
        .unwrap();
    }

    fn text(&mut self, x: f64, y: f64, class: &str, anchor: &str, s: &str) {
        let target = if self.defer.is_empty() { &mut self.head } else { &mut self.defer };
        write!(
            target,
            "<text x=\"{x:.3}\" y=\"{y:.3}\" class=\"{class}\" text-anchor=\"{anchor}\">{}</text>",
            esc(s)
        )
        .unwrap();
    }

    fn axis_label_x(&mut self, f: &Frame, s: &str) {
        self.text(f.x0 + f.w / 2.0, f.y0 + f.h + 40.0, "label", "middle", s);
    }

    fn axis_label_y(&mut self, f: &Frame, s: &str) {
        let (x, y) = (f.x0 - 52.0, f.y0 + f.h / 2.0);
        write!(
            self.head,
            "<text x=\"{x:.3}\" y=\"{y:.3}\" class=\"label\" text-anchor=\"middle\" transform=\"rotate(-90 {x:.3} {y:.3})\">{}</text>",
            esc(s)
        )
        .unwrap();
    }

    /// Swatch legend in the top-right corner of the frame.
    fn legend(&mut self, f: &Frame, entries: &[(&str, &str)]) {
        for (k, (name, color)) in entries.iter().enumerate() {
            let y = f.y0 + 16.0 + k as f64 * 16.0;
            let x = f.x0 + f.w - 86.0;
            write!(
                self.head,
                "<line x1=\"{x:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\" stroke=\"{color}\" stroke-width=\"2\"/>",
                y - 4.0,
                x + 20.0,
                y - 4.0
            )
            .unwrap();
            self.text(x + 26.0, y, "tick", "start", name);
        }
    }

    /// Legend to the right of the frame, for sweeps with many entries.
    fn legend_outside(&mut self, f: &Frame, entries: &[(&str, &str)]) {
        for (k, (name, color)) in entries.iter().enumerate() {
            let y = f.y0 + 16.0 + k as f64 * 16.0;
            let x = f.x0 + f.w + 16.0;
            write!(
                self.head,
                "<line x1=\"{x:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\" stroke=\"{color}\" stroke-width=\"2\"/>",
                y - 4.0,
                x + 20.0,
                y - 4.0
            )
            .unwrap();
            self.text(x + 26.0, y, "tick", "start", name);
        }
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">\
             <style>text{{font-family:'DejaVu Sans Mono',monospace;font-size:12px;fill:#333}}\
             .title{{font-size:14px;font-weight:bold}}.tick{{font-size:11px;fill:#555}}\
             .label{{font-size:12px;fill:#333}}.chan{{font-size:11px;font-weight:bold;fill:#333}}\
             .crit-label{{font-size:11px;fill:#d62728}}\
             .frame{{fill:none;stroke:#333;stroke-width:1}}.grid{{stroke:#dddddd;stroke-width:1}}\
             .grid-minor{{stroke:#f0f0f0;stroke-width:1}}\
             .refline{{stroke:#999999;stroke-width:1;stroke-dasharray:6,4}}\
             .unit{{fill:none;stroke:#888888;stroke-width:1;stroke-dasharray:3,3}}\
             .crit{{stroke:#d62728;stroke-width:1.5}}\
             .crit-mark{{stroke:#d62728;stroke-width:1.5}}</style>{body}</svg>\n",
            w = self.w,
            h = self.h,
            body = self.head
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn sample_loci() -> EigenLoci {
        let omega: Vec<f64> = (0..48).map(|k| 0.1 * TAU * 10f64.powf(k as f64 / 16.0)).collect();
        let lambda1 = omega
            .iter()
            .map(|w| {
                let s = Complex64::new(0.0, *w);
                Complex64::new(-2.4, 0.0) / (1.0 + s / 8.0) / (1.0 + s / 40.0)
            })
            .collect();
        let lambda2 = omega
            .iter()
            .map(|w| Complex64::new(0.05, 0.0) / Complex64::new(1.0, w / 100.0))
            .collect();
        EigenLoci { omega, lambda1, lambda2 }
    }

    fn sample_timeseries() -> TimeSeries {
        let t: Vec<f64> = (0..400).map(|k| k as f64 * 0.005).collect();
        let i_q = t.iter().map(|&t| (TAU * 1.2 * t).sin() * (-0.8 * t).exp()).collect();
        let u_d = t.iter().map(|&t| 325.0 + 2.0 * (TAU * 0.7 * t).cos()).collect();
        TimeSeries {
            t,
            names: vec!["u_d".into(), "i_q".into()],
            data: vec![u_d, i_q],
            divergence: None,
            final_state: dvector![0.0],
        }
    }

    #[test]
    fn renders_are_deterministic() {
        let loci = sample_loci();
        assert_eq!(nyquist_svg(&loci, "t").unwrap(), nyquist_svg(&loci, "t").unwrap());
        assert_eq!(bode_svg(&loci, "t").unwrap(), bode_svg(&loci, "t").unwrap());
        let ts = sample_timeseries();
        assert_eq!(
            timeseries_svg(&ts, &[], "t").unwrap(),
            timeseries_svg(&ts, &[], "t").unwrap()
        );
    }

    #[test]
    fn nyquist_marks_unit_circle_and_critical_point() {
        let svg = nyquist_svg(&sample_loci(), "minor loop").unwrap();
        assert!(svg.contains("class=\"unit\""));
        assert!(svg.contains("class=\"crit\""));
        assert!(svg.contains(">-1<"));
        assert!(svg.contains("minor loop"));
    }

    #[test]
    fn empty_inputs_are_refused() {
        let empty = EigenLoci { omega: vec![], lambda1: vec![], lambda2: vec![] };
        assert!(matches!(nyquist_svg(&empty, "t"), Err(Error::EmptyDataset(_))));
        assert!(matches!(bode_svg(&empty, "t"), Err(Error::EmptyDataset(_))));
        assert!(matches!(eigtrace_svg(&[], "p", "t"), Err(Error::EmptyDataset(_))));
        let ts = TimeSeries {
            t: vec![0.0],
            names: vec!["x".into()],
            data: vec![vec![1.0]],
            divergence: None,
            final_state: dvector![0.0],
        };
        assert!(matches!(timeseries_svg(&ts, &[], "t"), Err(Error::EmptyDataset(_))));
    }

    #[test]
    fn unit_modulus_loci_land_on_the_reference_circle() {
        // Both loci trace the unit circle exactly, so every rendered data
        // point must sit on the reference circle radius.
        let omega: Vec<f64> = (0..64).map(|k| 1.0 + k as f64).collect();
        let lambda1: Vec<Complex64> =
            omega.iter().map(|w| Complex64::from_polar(1.0, -w / 20.0)).collect();
        let lambda2: Vec<Complex64> = lambda1.iter().map(|z| z.conj()).collect();
        let loci = EigenLoci { omega, lambda1, lambda2 };
        let svg = nyquist_svg(&loci, "circle").unwrap();

        let circle = svg.split("class=\"unit\"").next().unwrap();
        let cx: f64 = circle.split("cx=\"").nth(1).unwrap().split('"').next().unwrap().parse().unwrap();
        let r_ref: f64 = circle.split(" r=\"").nth(1).unwrap().split('"').next().unwrap().parse().unwrap();
        let cy = 46.0 + 280.0;

        for seg in svg.split("<path d=\"").skip(1) {
            if !seg.contains("stroke=\"#") {
                continue;
            }
            let d = seg.split('"').next().unwrap();
            for pair in d.split(['M', 'L']).filter(|s| !s.is_empty()) {
                let mut it = pair.split(',');
                let x: f64 = it.next().unwrap().parse().unwrap();
                let y: f64 = it.next().unwrap().parse().unwrap();
                let r = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
                assert!((r - r_ref).abs() < 1.5, "point ({x},{y}) off circle: {r} vs {r_ref}");
            }
        }
    }

    #[test]
    fn compare_overlay_carries_primed_labels() {
        let loci = sample_loci();
        let svg = bode_compare_svg(&loci, &loci, "overlay").unwrap();
        assert!(svg.contains(">λ1'<") && svg.contains(">λ2'<"));
        assert!(svg.contains("stroke-dasharray=\"4,4\""));
    }

    #[test]
    fn unknown_channel_is_reported() {
        let ts = sample_timeseries();
        assert!(matches!(
            timeseries_svg(&ts, &["zebra"], "t"),
            Err(Error::UnknownChannel { .. })
        ));
    }

    #[test]
    fn long_series_are_strided_below_the_point_budget() {
        let n = 200_000;
        let t: Vec<f64> = (0..n).map(|k| k as f64 * 1e-3).collect();
        let y: Vec<f64> = t.iter().map(|&t| t.sin()).collect();
        let ts = TimeSeries {
            t,
            names: vec!["y".into()],
            data: vec![y],
            divergence: None,
            final_state: dvector![0.0],
        };
        let svg = timeseries_svg(&ts, &[], "big").unwrap();
        let segments = svg.matches('L').count();
        assert!(segments <= MAX_POINTS + 2, "{segments} line segments");
        assert!(svg.len() < 200_000, "{} bytes", svg.len());
    }

    #[test]
    fn eigtrace_windows_on_the_slow_modes() {
        let traces = vec![
            (
                100.0,
                vec![
                    Complex64::new(-0.43, TAU * 0.85),
                    Complex64::new(-0.43, -TAU * 0.85),
                    Complex64::new(-4000.0, TAU * 900.0),
                ],
            ),
            (70.0, vec![Complex64::new(0.07, TAU * 0.87), Complex64::new(0.07, -TAU * 0.87)]),
        ];
        let svg = eigtrace_svg(&traces, "alpha_cc", "sweep").unwrap();
        assert!(svg.contains("alpha_cc=100"));
        assert!(svg.contains("alpha_cc=70"));
        // Four markers total, the fast mode clipped by the window.
        assert_eq!(svg.matches("<circle").count(), 4);
    }

    #[test]
    fn bode_phase_is_continuous_across_the_wrap() {
        let omega: Vec<f64> = (1..200).map(|k| k as f64).collect();
        let lambda1: Vec<Complex64> = omega
            .iter()
            .map(|w| Complex64::from_polar(1.0, -3.0 * w / 199.0 * TAU))
            .collect();
        let lambda2 = vec![Complex64::new(0.1, 0.0); omega.len()];
        let deg = unwrap_deg(lambda1.iter().map(|z| z.arg().to_degrees()));
        for pair in deg.windows(2) {
            assert!((pair[1] - pair[0]).abs() < 30.0, "jump {} -> {}", pair[0], pair[1]);
        }
        assert!((deg[deg.len() - 1] - -1080.0 * 198.0 / 199.0).abs() < 15.0);
        let svg = bode_svg(&EigenLoci { omega, lambda1, lambda2 }, "t").unwrap();
        assert!(svg.contains("∠λ (deg)"));
    }
}
