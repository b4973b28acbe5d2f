//! Minimal standalone SVG emitters for the analysis artifacts.

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN: f64 = 60.0;

pub const PALETTE: [&str; 6] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
];

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn from_points<'a, I: Iterator<Item = &'a (f64, f64)>>(points: I) -> Frame {
        let mut f = Frame {
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for &(x, y) in points {
            f.x_min = f.x_min.min(x);
            f.x_max = f.x_max.max(x);
            f.y_min = f.y_min.min(y);
            f.y_max = f.y_max.max(y);
        }
        if !f.x_min.is_finite() {
            f = Frame {
                x_min: 0.0,
                x_max: 1.0,
                y_min: 0.0,
                y_max: 1.0,
            };
        }
        if f.x_max - f.x_min < 1e-12 {
            f.x_max = f.x_min + 1.0;
        }
        if f.y_max - f.y_min < 1e-12 {
            f.y_max = f.y_min + 1.0;
        }
        f
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn document_open(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{tx}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"16\">{title}</text>\n",
        tx = WIDTH / 2.0
    )
}

fn axes(frame: &Frame, xlabel: &str, ylabel: &str) -> String {
    let x0 = MARGIN;
    let x1 = WIDTH - MARGIN;
    let y0 = HEIGHT - MARGIN;
    let y1 = MARGIN;
    format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n\
         <text x=\"{cx}\" y=\"{by}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{xlabel}</text>\n\
         <text x=\"16\" y=\"{cy}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 {cy})\">{ylabel}</text>\n\
         <text x=\"{x0}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"10\">{xmin:.1}</text>\n\
         <text x=\"{x1}\" y=\"{ty}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">{xmax:.1}</text>\n\
         <text x=\"{lx}\" y=\"{y0}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">{ymin:.1}</text>\n\
         <text x=\"{lx}\" y=\"{y1}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">{ymax:.1}</text>\n",
        cx = WIDTH / 2.0,
        by = HEIGHT - 16.0,
        cy = HEIGHT / 2.0,
        ty = HEIGHT - MARGIN + 16.0,
        lx = MARGIN - 6.0,
        xmin = frame.x_min,
        xmax = frame.x_max,
        ymin = frame.y_min,
        ymax = frame.y_max,
    )
}

fn legend(names: &[&str]) -> String {
    let mut out = String::new();
    for (i, name) in names.iter().enumerate() {
        let y = MARGIN + 16.0 * i as f64;
        let color = PALETTE[i % PALETTE.len()];
        out.push_str(&format!(
            "<rect x=\"{x}\" y=\"{ry}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n\
             <text x=\"{tx}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"11\">{name}</text>\n",
            x = WIDTH - MARGIN - 150.0,
            ry = y - 9.0,
            tx = WIDTH - MARGIN - 135.0,
            ty = y,
        ));
    }
    out
}

/// Multi-series line chart; `None` y values break the polyline.
pub fn line_chart(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[(String, Vec<(f64, Option<f64>)>)],
) -> String {
    let defined: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|(_, pts)| pts.iter().filter_map(|&(x, y)| y.map(|y| (x, y))))
        .collect();
    let frame = Frame::from_points(defined.iter());
    let mut out = document_open(title);
    out.push_str(&axes(&frame, xlabel, ylabel));
    for (i, (_, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut segment: Vec<String> = Vec::new();
        let flush = |seg: &mut Vec<String>, out: &mut String| {
            if seg.len() > 1 {
                out.push_str(&format!(
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                    seg.join(" ")
                ));
            }
            seg.clear();
        };
        for &(x, y) in pts {
            match y {
                Some(y) => segment.push(format!("{:.2},{:.2}", frame.px(x), frame.py(y))),
                None => flush(&mut segment, &mut out),
            }
        }
        flush(&mut segment, &mut out);
    }
    out.push_str(&legend(
        &series.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>(),
    ));
    out.push_str("</svg>\n");
    out
}

/// Grouped bar chart: one group per label, one bar per series entry.
pub fn bar_chart(title: &str, ylabel: &str, groups: &[(String, Vec<(String, f64)>)]) -> String {
    let y_max = groups
        .iter()
        .flat_map(|(_, bars)| bars.iter().map(|&(_, v)| v))
        .fold(1e-9f64, f64::max);
    let frame = Frame {
        x_min: 0.0,
        x_max: 1.0,
        y_min: 0.0,
        y_max,
    };
    let mut out = document_open(title);
    out.push_str(&axes(&frame, "", ylabel));
    let n_groups = groups.len().max(1);
    let group_w = (WIDTH - 2.0 * MARGIN) / n_groups as f64;
    let mut bar_names: Vec<&str> = Vec::new();
    for (g, (label, bars)) in groups.iter().enumerate() {
        let n_bars = bars.len().max(1);
        let bar_w = group_w * 0.8 / n_bars as f64;
        for (b, (name, value)) in bars.iter().enumerate() {
            if !bar_names.contains(&name.as_str()) {
                bar_names.push(name);
            }
            let color = PALETTE[bar_names.iter().position(|n| n == name).unwrap() % PALETTE.len()];
            let x = MARGIN + g as f64 * group_w + group_w * 0.1 + b as f64 * bar_w;
            let top = frame.py(*value);
            out.push_str(&format!(
                "<rect x=\"{x:.2}\" y=\"{top:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" fill=\"{color}\"/>\n",
                w = bar_w * 0.92,
                h = (HEIGHT - MARGIN) - top,
            ));
        }
        out.push_str(&format!(
            "<text x=\"{x:.2}\" y=\"{y}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{label}</text>\n",
            x = MARGIN + (g as f64 + 0.5) * group_w,
            y = HEIGHT - MARGIN + 16.0,
        ));
    }
    out.push_str(&legend(&bar_names));
    out.push_str("</svg>\n");
    out
}

/// Scatter chart with an optional identity diagonal.
pub fn scatter_chart(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[(String, Vec<(f64, f64)>)],
    diagonal: bool,
) -> String {
    let frame = Frame::from_points(series.iter().flat_map(|(_, p)| p.iter()));
    let mut out = document_open(title);
    out.push_str(&axes(&frame, xlabel, ylabel));
    if diagonal {
        let lo = frame.x_min.max(frame.y_min);
        let hi = frame.x_max.min(frame.y_max);
        if hi > lo {
            out.push_str(&format!(
                "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n",
                x1 = frame.px(lo),
                y1 = frame.py(lo),
                x2 = frame.px(hi),
                y2 = frame.py(hi),
            ));
        }
    }
    for (i, (_, points)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for &(x, y) in points {
            out.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"{color}\" fill-opacity=\"0.5\"/>\n",
                frame.px(x),
                frame.py(y)
            ));
        }
    }
    out.push_str(&legend(
        &series.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>(),
    ));
    out.push_str("</svg>\n");
    out
}
