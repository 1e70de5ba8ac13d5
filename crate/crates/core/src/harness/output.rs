use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{EocTable, RowStatus};
use crate::Result;

const COLUMNS: &str =
    "family,k,integrator,level,n,h_max,h_min,n_free,lambda_max,dt,err_l2,err_h1,eoc_l2,eoc_h1,wall_time_s,status";

fn status_name(s: &RowStatus) -> &'static str {
    match s {
        RowStatus::Ok => "ok",
        RowStatus::UnstableByConfiguration => "unstable-by-configuration",
        RowStatus::Failed(_) => "failed",
    }
}

/// CSV for one or more tables; each line of `header` is emitted as a `#`
/// comment before the column names.
pub fn to_csv_string(tables: &[EocTable], header: Option<&str>) -> String {
    let mut s = String::new();
    if let Some(h) = header {
        for line in h.lines() {
            writeln!(s, "# {line}").unwrap();
        }
    }
    writeln!(s, "{COLUMNS}").unwrap();
    for t in tables {
        for (i, r) in t.rows.iter().enumerate() {
            let (e2, e1) = if i == 0 {
                (String::new(), String::new())
            } else {
                (format!("{:.6}", t.eoc_l2[i - 1]), format!("{:.6}", t.eoc_h1[i - 1]))
            };
            writeln!(
                s,
                "{},{},{},{},{},{:.10e},{:.10e},{},{:.10e},{:.10e},{:.10e},{:.10e},{e2},{e1},{:.3},{}",
                t.family,
                t.k,
                t.integrator,
                r.level,
                r.n,
                r.h_max,
                r.h_min,
                r.n_free,
                r.lambda_max,
                r.dt,
                r.err_l2,
                r.err_h1,
                r.wall_time,
                status_name(&r.status)
            )
            .unwrap();
        }
    }
    s
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Log-log plot of error against `h_max`: one polyline per norm per table and
/// dashed reference slopes 1 and 2.
pub fn to_svg_string(tables: &[EocTable]) -> String {
    let pts: Vec<(f64, f64)> = tables
        .iter()
        .flat_map(|t| t.rows.iter())
        .flat_map(|r| [(r.h_max, r.err_l2), (r.h_max, r.err_h1)])
        .filter(|(h, e)| *h > 0.0 && *e > 0.0 && e.is_finite())
        .map(|(h, e)| (h.log10(), e.log10()))
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if pts.is_empty() {
        (x0, x1, y0, y1) = (-2.0, 0.0, -4.0, 0.0);
    }
    let pad = |a: f64, b: f64| {
        let d = ((b - a) * 0.1).max(0.05);
        (a - d, b + d)
    };
    let (x0, x1) = pad(x0, x1);
    let (y0, y1) = pad(y0, y1);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#).unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    )
    .unwrap();
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">log10 h_max</text>"#, W / 2.0, H - 15.0).unwrap();
    writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" font-size="14" transform="rotate(-90 15 {})">log10 error</text>"#,
        H / 2.0,
        H / 2.0
    )
    .unwrap();

    let mut legend = 0;
    let mut color = 0;
    for t in tables {
        for (norm, get) in [("L2", 0usize), ("H1", 1usize)] {
            let line: Vec<String> = t
                .rows
                .iter()
                .map(|r| (r.h_max, if get == 0 { r.err_l2 } else { r.err_h1 }))
                .filter(|(h, e)| *h > 0.0 && *e > 0.0 && e.is_finite())
                .map(|(h, e)| format!("{:.2},{:.2}", sx(h.log10()), sy(e.log10())))
                .collect();
            let c = COLORS[color % COLORS.len()];
            color += 1;
            writeln!(s, r#"<polyline fill="none" stroke="{c}" stroke-width="2" points="{}"/>"#, line.join(" ")).unwrap();
            writeln!(
                s,
                r#"<text x="{}" y="{}" font-size="12" fill="{c}">{} {} {}</text>"#,
                MARGIN + 10.0,
                MARGIN + 18.0 + 16.0 * legend as f64,
                t.family,
                t.integrator,
                norm
            )
            .unwrap();
            legend += 1;
        }
    }

    // Reference slopes through the mid-height at the right edge.
    let ym = 0.5 * (y0 + y1);
    for slope in [1.0, 2.0] {
        let ya = ym + 0.5 * slope * (x0 - x1);
        writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="6,4"/>"#,
            sx(x0),
            sy(ya),
            sx(x1),
            sy(ym)
        )
        .unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="12" fill="gray">slope {slope}</text>"#, sx(x0) + 4.0, sy(ya) - 4.0).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Write the CSV (and optionally the SVG) for `tables`.
pub fn emit_outputs(tables: &[EocTable], header: Option<&str>, csv_path: &Path, svg_path: Option<&Path>) -> Result<()> {
    fs::write(csv_path, to_csv_string(tables, header))?;
    if let Some(p) = svg_path {
        fs::write(p, to_svg_string(tables))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::ErrorReport;
    use crate::mesh::MeshFamily;
    use crate::timeint::IntegratorKind;

    fn table(integrator: IntegratorKind) -> EocTable {
        let rows = (0..3)
            .map(|l| {
                let h = 0.25 / 2f64.powi(l);
                ErrorReport {
                    level: l as usize,
                    n: 4 << l,
                    h_max: h,
                    h_min: h,
                    n_free: 9,
                    lambda_max: 100.0,
                    dt: 0.01,
                    err_l2: h * h,
                    err_h1: h,
                    wall_time: 0.0,
                    status: RowStatus::Ok,
                }
            })
            .collect();
        EocTable::new(MeshFamily::DistortedQuad, 1, integrator, rows)
    }

    #[test]
    fn csv_shape() {
        let s = to_csv_string(&[table(IntegratorKind::Ssprk3)], Some("cmd convergence"));
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# cmd convergence");
        assert!(lines[1].starts_with("family,k,integrator,level"));
        assert_eq!(lines.len(), 5);
        assert!(lines[3].contains(",2.000000,1.000000,"));
    }

    #[test]
    fn svg_structure() {
        let s = to_svg_string(&[table(IntegratorKind::Ssprk3), table(IntegratorKind::Ssprk54)]);
        assert_eq!(s.matches("<polyline").count(), 4);
        assert_eq!(s.matches("stroke-dasharray").count(), 2);
        assert_eq!(s, to_svg_string(&[table(IntegratorKind::Ssprk3), table(IntegratorKind::Ssprk54)]));
    }

    #[test]
    fn emission_is_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("a.csv");
        let svg = dir.path().join("a.svg");
        let t = [table(IntegratorKind::Ssprk3)];
        emit_outputs(&t, None, &csv, Some(&svg)).unwrap();
        let first = (fs::read(&csv).unwrap(), fs::read(&svg).unwrap());
        emit_outputs(&t, None, &csv, Some(&svg)).unwrap();
        assert_eq!(first, (fs::read(&csv).unwrap(), fs::read(&svg).unwrap()));
        assert!(emit_outputs(&t, None, &dir.path().join("missing/x.csv"), None).is_err());
    }
}
