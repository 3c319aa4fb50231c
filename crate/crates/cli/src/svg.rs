//! Self-contained SVG plots on a fixed 900×600 viewport.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use qaembed::stats::{box_stats, ols};

pub const WIDTH: f64 = 900.0;
pub const HEIGHT: f64 = 600.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 140.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 80.0;

/// Linear map of a data interval onto a pixel interval.
#[derive(Clone, Copy, Debug)]
pub struct Scale {
    lo: f64,
    hi: f64,
    p0: f64,
    p1: f64,
}

impl Scale {
    fn new(lo: f64, hi: f64, p0: f64, p1: f64) -> Self {
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        Scale { lo, hi, p0, p1 }
    }

    pub fn at(&self, v: f64) -> f64 {
        self.p0 + (v - self.lo) / (self.hi - self.lo) * (self.p1 - self.p0)
    }
}

fn range(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    values
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn label(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(title: &str) -> String {
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="13">"#
    )
    .unwrap();
    writeln!(s, r#"<rect class="background" x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="28" text-anchor="middle" font-size="16">{}</text>"#, WIDTH / 2.0, escape(title)).unwrap();
    s
}

/// Axis frame with the data minimum and maximum labelled on both axes.
fn axes(s: &mut String, x: &Scale, y: &Scale, xname: &str, yname: &str) {
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (HEIGHT - BOTTOM, TOP);
    writeln!(s, r#"<g class="axes" stroke="black" fill="none">"#).unwrap();
    writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/>"#).unwrap();
    writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/>"#).unwrap();
    s.push_str("</g>\n");
    for (v, anchor) in [(x.lo, "start"), (x.hi, "end")] {
        writeln!(
            s,
            r#"<text class="tick-x" x="{:.2}" y="{}" text-anchor="{anchor}">{}</text>"#,
            x.at(v),
            y0 + 20.0,
            label(v)
        )
        .unwrap();
    }
    for v in [y.lo, y.hi] {
        writeln!(s, r#"<text class="tick-y" x="{}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 8.0, y.at(v) + 4.0, label(v))
            .unwrap();
    }
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, HEIGHT - 30.0, escape(xname)).unwrap();
    writeln!(
        s,
        r#"<text x="24" y="{0}" text-anchor="middle" transform="rotate(-90 24 {0})">{1}</text>"#,
        (y0 + y1) / 2.0,
        escape(yname)
    )
    .unwrap();
}

/// Three-stop sequential palette for `t` in [0, 1].
pub fn color(t: f64) -> String {
    const STOPS: [(f64, f64, f64); 3] = [(68.0, 1.0, 84.0), (33.0, 145.0, 140.0), (253.0, 231.0, 37.0)];
    let t = t.clamp(0.0, 1.0) * 2.0;
    let i = (t.floor() as usize).min(1);
    let f = t - i as f64;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    let mix = |p: f64, q: f64| (p + (q - p) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Grid of colored cells, one per distinct (x, y) pair; repeated pairs are
/// averaged.
pub fn heatmap(points: &[(f64, f64, f64)], xname: &str, yname: &str, vname: &str, title: &str) -> String {
    let mut cells: BTreeMap<(u64, u64), (f64, f64, f64, usize)> = BTreeMap::new();
    for &(x, y, v) in points {
        let e = cells.entry((ordered(x), ordered(y))).or_insert((x, y, 0.0, 0));
        e.2 += v;
        e.3 += 1;
    }
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let mut ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    for v in [&mut xs, &mut ys] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    let (vlo, vhi) = range(cells.values().map(|c| c.2 / c.3 as f64));
    let (cw, ch) = ((WIDTH - LEFT - RIGHT) / xs.len() as f64, (HEIGHT - TOP - BOTTOM) / ys.len() as f64);
    // ticks label the centers of the outer cells
    let x = Scale::new(xs[0], xs[xs.len() - 1], LEFT + cw / 2.0, WIDTH - RIGHT - cw / 2.0);
    let y = Scale::new(ys[0], ys[ys.len() - 1], HEIGHT - BOTTOM - ch / 2.0, TOP + ch / 2.0);
    let mut s = header(title);
    s.push_str("<g class=\"cells\">\n");
    for &(cx, cy, sum, n) in cells.values() {
        let v = sum / n as f64;
        let i = xs.iter().position(|&a| a == cx).unwrap();
        let j = ys.iter().position(|&b| b == cy).unwrap();
        let t = if vhi > vlo { (v - vlo) / (vhi - vlo) } else { 0.5 };
        writeln!(
            s,
            r#"<rect class="cell" x="{:.2}" y="{:.2}" width="{cw:.2}" height="{ch:.2}" fill="{}"><title>{}={}, {}={}: {}</title></rect>"#,
            LEFT + i as f64 * cw,
            HEIGHT - BOTTOM - (j + 1) as f64 * ch,
            color(t),
            escape(xname),
            label(cx),
            escape(yname),
            label(cy),
            label(v)
        )
        .unwrap();
    }
    s.push_str("</g>\n");
    axes(&mut s, &x, &y, xname, yname);
    legend(&mut s, vlo, vhi, vname);
    s.push_str("</svg>\n");
    s
}

fn ordered(v: f64) -> u64 {
    let b = v.to_bits();
    if b >> 63 == 1 { !b } else { b | 1 << 63 }
}

fn legend(s: &mut String, lo: f64, hi: f64, name: &str) {
    let x = WIDTH - RIGHT + 30.0;
    let (top, bottom) = (TOP, HEIGHT - BOTTOM);
    let steps = 20;
    let h = (bottom - top) / steps as f64;
    s.push_str("<g class=\"legend\">\n");
    for k in 0..steps {
        let t = 1.0 - (k as f64 + 0.5) / steps as f64;
        writeln!(s, r#"<rect x="{x}" y="{:.2}" width="18" height="{:.2}" fill="{}"/>"#, top + k as f64 * h, h + 0.5, color(t)).unwrap();
    }
    writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, x + 24.0, top + 10.0, label(hi)).unwrap();
    writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, x + 24.0, bottom, label(lo)).unwrap();
    writeln!(s, r#"<text x="{x}" y="{}">{}</text>"#, top - 10.0, escape(name)).unwrap();
    s.push_str("</g>\n");
}

/// Scatter plot, optionally with the least-squares line drawn across the
/// x range of the data.
pub fn scatter(points: &[(f64, f64)], xname: &str, yname: &str, title: &str, fit: bool) -> String {
    let line = if fit { ols(points).ok() } else { None };
    let (xlo, xhi) = range(points.iter().map(|p| p.0));
    let mut ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    if let Some(f) = &line {
        ys.extend([f.intercept + f.slope * xlo, f.intercept + f.slope * xhi]);
    }
    let (ylo, yhi) = range(ys);
    let x = Scale::new(xlo, xhi, LEFT, WIDTH - RIGHT);
    let y = Scale::new(ylo, yhi, HEIGHT - BOTTOM, TOP);
    let mut s = header(title);
    axes(&mut s, &x, &y, xname, yname);
    s.push_str("<g class=\"points\" fill=\"#21918c\" fill-opacity=\"0.7\">\n");
    for &(px, py) in points {
        writeln!(s, r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="4"/>"#, x.at(px), y.at(py)).unwrap();
    }
    s.push_str("</g>\n");
    if let Some(f) = line {
        writeln!(
            s,
            r##"<line class="ols" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#c0392b" stroke-width="2"/>"##,
            x.at(xlo),
            y.at(f.intercept + f.slope * xlo),
            x.at(xhi),
            y.at(f.intercept + f.slope * xhi)
        )
        .unwrap();
        writeln!(
            s,
            r#"<text class="ols-label" x="{}" y="{}">slope {} intercept {} r {}</text>"#,
            LEFT + 10.0,
            TOP + 16.0,
            label(f.slope),
            label(f.intercept),
            label(f.r)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Box summary of y at each distinct x, with a line through the medians.
pub fn line(points: &[(f64, f64)], xname: &str, yname: &str, title: &str) -> String {
    let mut groups: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
    for &(px, py) in points {
        groups.entry(ordered(px)).or_insert((px, Vec::new())).1.push(py);
    }
    let (xlo, xhi) = range(points.iter().map(|p| p.0));
    let (ylo, yhi) = range(points.iter().map(|p| p.1));
    let x = Scale::new(xlo, xhi, LEFT + 20.0, WIDTH - RIGHT - 20.0);
    let y = Scale::new(ylo, yhi, HEIGHT - BOTTOM, TOP);
    let half = ((WIDTH - LEFT - RIGHT) / groups.len() as f64 / 4.0).min(20.0);
    let mut s = header(title);
    axes(&mut s, &x, &y, xname, yname);
    let mut medians = Vec::new();
    s.push_str("<g class=\"boxes\" stroke=\"#333\">\n");
    for (gx, values) in groups.values() {
        let b = box_stats(values).expect("group is non-empty");
        let cx = x.at(*gx);
        writeln!(
            s,
            r#"<line class="whisker" x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}"/>"#,
            y.at(b.whisker_lo),
            y.at(b.whisker_hi)
        )
        .unwrap();
        writeln!(
            s,
            r##"<rect class="box" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#b8dede"/>"##,
            cx - half,
            y.at(b.q3),
            2.0 * half,
            (y.at(b.q1) - y.at(b.q3)).max(0.5)
        )
        .unwrap();
        for o in &b.outliers {
            writeln!(s, r#"<circle class="outlier" cx="{cx:.2}" cy="{:.2}" r="2.5" fill="none"/>"#, y.at(*o)).unwrap();
        }
        medians.push((cx, y.at(b.median)));
    }
    s.push_str("</g>\n");
    let path: Vec<String> = medians.iter().map(|(a, b)| format!("{a:.2},{b:.2}")).collect();
    writeln!(s, r##"<polyline class="median-line" points="{}" fill="none" stroke="#c0392b" stroke-width="2"/>"##, path.join(" "))
        .unwrap();
    s.push_str("</svg>\n");
    s
}
