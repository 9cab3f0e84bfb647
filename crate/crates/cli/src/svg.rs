//! Minimal SVG emission: line plots and heatmaps, no plotting dependency.
//!
//! Heatmaps use a fixed eight-stop blue-green-yellow colormap (linear
//! interpolation between stops, low value = dark blue, high = yellow).

const WIDTH: f64 = 840.0;
const HEIGHT: f64 = 560.0;
const MARGIN: f64 = 60.0;

const COLOR_STOPS: [(u8, u8, u8); 8] = [
    (68, 1, 84),
    (70, 50, 127),
    (54, 92, 141),
    (39, 127, 142),
    (31, 161, 135),
    (74, 194, 109),
    (159, 218, 58),
    (253, 231, 37),
];

fn colormap(t: f64) -> (u8, u8, u8) {
    let t = t.clamp(0.0, 1.0) * (COLOR_STOPS.len() - 1) as f64;
    let i = (t.floor() as usize).min(COLOR_STOPS.len() - 2);
    let f = t - i as f64;
    let (r0, g0, b0) = COLOR_STOPS[i];
    let (r1, g1, b1) = COLOR_STOPS[i + 1];
    let mix = |a: u8, b: u8| (a as f64 + f * (b as f64 - a as f64)).round() as u8;
    (mix(r0, r1), mix(g0, g1), mix(b0, b1))
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" font-family=\"monospace\" font-size=\"15\" \
         text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(x_label: &str, y_label: &str) -> String {
    let x0 = MARGIN;
    let x1 = WIDTH - MARGIN;
    let y0 = HEIGHT - MARGIN;
    let y1 = MARGIN;
    format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n\
         <text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"12\" \
         text-anchor=\"middle\">{}</text>\n\
         <text x=\"16\" y=\"{}\" font-family=\"monospace\" font-size=\"12\" \
         text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        (x0 + x1) / 2.0,
        HEIGHT - 18.0,
        escape(x_label),
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    )
}

/// Polyline chart: one series per (label, points) pair.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for (_, pts) in series {
        for &(x, y) in pts {
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
    }
    if !(xmin.is_finite() && ymin.is_finite()) {
        xmin = 0.0;
        xmax = 1.0;
        ymin = 0.0;
        ymax = 1.0;
    }
    if (ymax - ymin).abs() < 1e-300 {
        ymax = ymin + 1.0;
    }
    if (xmax - xmin).abs() < 1e-300 {
        xmax = xmin + 1.0;
    }
    let sx = |x: f64| MARGIN + (x - xmin) / (xmax - xmin) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - ymin) / (ymax - ymin) * (HEIGHT - 2.0 * MARGIN);

    let palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let mut body = header(title);
    body.push_str(&axes(x_label, y_label));
    for (k, (label, pts)) in series.iter().enumerate() {
        let color = palette[k % palette.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        body.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            path.join(" ")
        ));
        body.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"12\" fill=\"{color}\">{}</text>\n",
            WIDTH - MARGIN - 180.0,
            MARGIN + 16.0 * (k as f64 + 1.0),
            escape(label)
        ));
    }
    // min/max tick labels
    body.push_str(&format!(
        "<text x=\"{MARGIN}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\">{xmin:.3e}</text>\n\
         <text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"end\">{xmax:.3e}</text>\n\
         <text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\">{ymin:.3e}</text>\n\
         <text x=\"{}\" y=\"{MARGIN}\" font-family=\"monospace\" font-size=\"11\">{ymax:.3e}</text>\n",
        HEIGHT - MARGIN + 16.0,
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 16.0,
        8.0,
        HEIGHT - MARGIN,
        8.0,
    ));
    body.push_str("</svg>\n");
    body
}

/// Heatmap of values[row * ncols + col]; rows map to the y axis.
pub fn heatmap(title: &str, x_label: &str, y_label: &str, nrows: usize, ncols: usize, values: &[f64]) -> String {
    let mut vmin = f64::INFINITY;
    let mut vmax = f64::NEG_INFINITY;
    for &v in values {
        vmin = vmin.min(v);
        vmax = vmax.max(v);
    }
    if !vmin.is_finite() {
        vmin = 0.0;
        vmax = 1.0;
    }
    if (vmax - vmin).abs() < 1e-300 {
        vmax = vmin + 1.0;
    }
    let cell_w = (WIDTH - 2.0 * MARGIN) / ncols as f64;
    let cell_h = (HEIGHT - 2.0 * MARGIN) / nrows as f64;
    let mut body = header(title);
    body.push_str(&axes(x_label, y_label));
    for r in 0..nrows {
        for c in 0..ncols {
            let v = values[r * ncols + c];
            let (cr, cg, cb) = colormap((v - vmin) / (vmax - vmin));
            let x = MARGIN + c as f64 * cell_w;
            let y = HEIGHT - MARGIN - (r as f64 + 1.0) * cell_h;
            body.push_str(&format!(
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"rgb({cr},{cg},{cb})\"/>\n",
                cell_w + 0.5,
                cell_h + 0.5
            ));
        }
    }
    // colorbar
    for k in 0..32 {
        let t = k as f64 / 31.0;
        let (cr, cg, cb) = colormap(t);
        let y = HEIGHT - MARGIN - (t * (HEIGHT - 2.0 * MARGIN));
        body.push_str(&format!(
            "<rect x=\"{}\" y=\"{y:.2}\" width=\"12\" height=\"{:.2}\" fill=\"rgb({cr},{cg},{cb})\"/>\n",
            WIDTH - MARGIN + 18.0,
            (HEIGHT - 2.0 * MARGIN) / 32.0 + 0.5
        ));
    }
    body.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\">{vmin:.3e}</text>\n\
         <text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\">{vmax:.3e}</text>\n",
        WIDTH - MARGIN + 34.0,
        HEIGHT - MARGIN,
        WIDTH - MARGIN + 34.0,
        MARGIN + 4.0,
    ));
    body.push_str("</svg>\n");
    body
}
