//! Plain-text (P2) portable graymaps.

/// Maps `[0, 1]` to `0..=255`, rounding half up.
pub fn level(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

/// One pixel per cell: `rows` tall, `cols` wide, row-major `values`.
pub fn encode(rows: usize, cols: usize, values: &[f64]) -> String {
    let mut out = format!("P2\n{cols} {rows}\n255\n");
    for r in 0..rows {
        let line: Vec<String> = values[r * cols..(r + 1) * cols]
            .iter()
            .map(|&v| level(v).to_string())
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}
