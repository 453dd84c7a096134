use std::collections::BTreeSet;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::labels::{EmotionLabel, MotivationLabel};

/// Mean emotion distribution per gold motivation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointMatrix {
    /// `values[m][e]`; NaN rows have no instances.
    pub values: Vec<Vec<f64>>,
    pub counts: Vec<usize>,
    pub empty_rows: Vec<MotivationLabel>,
}

/// Entry (m, e) is the mean of `p_f[e]` over records whose gold motivations
/// include m.
pub fn joint_matrix(records: &[(BTreeSet<MotivationLabel>, Vec<f64>)]) -> Result<JointMatrix, String> {
    let nm = MotivationLabel::ALL.len();
    let ne = EmotionLabel::ALL.len();
    let mut sums = vec![vec![0.0; ne]; nm];
    let mut counts = vec![0usize; nm];
    for (i, (ms, p)) in records.iter().enumerate() {
        if p.len() != ne {
            return Err(format!("record {i}: expected {ne} emotion probabilities, got {}", p.len()));
        }
        for m in ms {
            counts[m.index()] += 1;
            for (s, &v) in sums[m.index()].iter_mut().zip(p) {
                *s += v;
            }
        }
    }
    let mut empty_rows = Vec::new();
    let values = sums
        .into_iter()
        .zip(&counts)
        .enumerate()
        .map(|(m, (row, &c))| {
            if c == 0 {
                empty_rows.push(MotivationLabel::ALL[m]);
                vec![f64::NAN; ne]
            } else {
                row.into_iter().map(|s| s / c as f64).collect()
            }
        })
        .collect();
    Ok(JointMatrix { values, counts, empty_rows })
}

impl JointMatrix {
    /// CSV with a header of emotion ids; values multiplied by `scale`.
    pub fn to_csv(&self, scale: f64) -> String {
        let mut out = String::from("motivation");
        for e in EmotionLabel::ALL {
            out.push(',');
            out.push_str(e.id());
        }
        out.push('\n');
        for (m, row) in MotivationLabel::ALL.iter().zip(&self.values) {
            out.push_str(m.id());
            for v in row {
                if v.is_nan() {
                    out.push_str(",NaN");
                } else if scale == 1.0 {
                    let _ = write!(out, ",{v}");
                } else {
                    let _ = write!(out, ",{:.1}", v * scale);
                }
            }
            out.push('\n');
        }
        out
    }

    /// Heatmap with cell labels in units of 1e-3.
    pub fn to_svg(&self) -> String {
        let (cell_w, cell_h, left, top) = (90.0, 40.0, 130.0, 50.0);
        let width = left + cell_w * 8.0 + 10.0;
        let height = top + cell_h * 5.0 + 30.0;
        let mut s = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" font-family=\"sans-serif\" font-size=\"12\">\n"
        );
        for (j, e) in EmotionLabel::ALL.iter().enumerate() {
            let x = left + cell_w * (j as f64 + 0.5);
            let _ = writeln!(s, "<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\">{}</text>", top - 10.0, e.id());
        }
        for (i, (m, row)) in MotivationLabel::ALL.iter().zip(&self.values).enumerate() {
            let y = top + cell_h * i as f64;
            let _ = writeln!(
                s,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>",
                left - 8.0,
                y + cell_h * 0.6,
                m.id()
            );
            for (j, &v) in row.iter().enumerate() {
                let x = left + cell_w * j as f64;
                let shade = if v.is_nan() { 255 } else { (255.0 * (1.0 - v.clamp(0.0, 1.0))).round() as u8 };
                let _ = writeln!(
                    s,
                    "<rect x=\"{x}\" y=\"{y}\" width=\"{cell_w}\" height=\"{cell_h}\" fill=\"rgb({shade},{shade},255)\" stroke=\"#888\"/>"
                );
                let label = if v.is_nan() { "NaN".to_string() } else { format!("{:.1}", v * 1e3) };
                let _ = writeln!(
                    s,
                    "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{label}</text>",
                    x + cell_w / 2.0,
                    y + cell_h * 0.6
                );
            }
        }
        let _ = writeln!(
            s,
            "<text x=\"{left}\" y=\"{}\">values x 1e-3</text>\n</svg>",
            top + cell_h * 5.0 + 20.0
        );
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use MotivationLabel::*;

    #[test]
    fn constant_one_hot_rows() {
        let joy = {
            let mut v = vec![0.0; 8];
            v[EmotionLabel::Joy.index()] = 1.0;
            v
        };
        let recs = vec![(BTreeSet::from([Love]), joy.clone()), (BTreeSet::from([Esteem, Love]), joy.clone())];
        let m = joint_matrix(&recs).unwrap();
        assert_eq!(m.values[Love.index()], joy);
        assert_eq!(m.counts[Love.index()], 2);
        assert!(m.values[Physiological.index()][0].is_nan());
        assert_eq!(m.empty_rows, vec![Physiological, Stability, SpiritualGrowth]);
        let csv = m.to_csv(1e3);
        assert!(csv.lines().nth(3).unwrap().starts_with("love,1000.0,0.0"));
        assert!(m.to_svg().contains("1000.0"));
    }
}
