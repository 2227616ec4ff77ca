//! Minimal SVG line charts for loss and PSNR curves.

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders `points` as a single polyline with min/max axis labels.
pub fn svg_line_chart(points: &[(f64, f64)], title: &str, x_label: &str, y_label: &str) -> String {
    let finite: Vec<(f64, f64)> = points.iter().copied().filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
    let (mut x0, mut x1, mut y0, mut y1) = finite.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
    );
    if finite.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
    let path: Vec<String> = finite.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    s.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    ));
    s.push_str(&format!(
        "<path d=\"M{m},{t} L{m},{b} L{r},{b}\" stroke=\"black\" fill=\"none\"/>\n",
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    ));
    let label = |x: f64, y: f64, anchor: &str, text: String| {
        format!(
            "<text x=\"{x:.1}\" y=\"{y:.1}\" text-anchor=\"{anchor}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            escape(&text)
        )
    };
    s.push_str(&label(MARGIN, HEIGHT - MARGIN + 16.0, "start", format!("{x0:.4}")));
    s.push_str(&label(WIDTH - MARGIN, HEIGHT - MARGIN + 16.0, "end", format!("{x1:.4}")));
    s.push_str(&label(MARGIN - 4.0, HEIGHT - MARGIN, "end", format!("{y0:.4}")));
    s.push_str(&label(MARGIN - 4.0, MARGIN + 4.0, "end", format!("{y1:.4}")));
    s.push_str(&label(WIDTH / 2.0, HEIGHT - 16.0, "middle", x_label.to_string()));
    s.push_str(&label(16.0, HEIGHT / 2.0, "middle", y_label.to_string()));
    if !path.is_empty() {
        s.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"#c0392b\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            path.join(" ")
        ));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_contains_all_points() {
        let svg = svg_line_chart(&[(0.0, 1.0), (1.0, 0.5), (2.0, f64::NAN), (3.0, 0.25)], "loss <L>", "iter", "loss");
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("loss &lt;L&gt;"));
        let pts = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(pts.split(' ').count(), 3);
    }

    #[test]
    fn empty_and_flat_series_render() {
        assert!(svg_line_chart(&[], "t", "x", "y").contains("</svg>"));
        assert!(svg_line_chart(&[(1.0, 2.0), (1.0, 2.0)], "t", "x", "y").contains("polyline"));
    }
}
