//! Report emission: a self-describing JSON document and a CSV convergence
//! table. Floating-point values are serialized with 17 significant digits,
//! and identical configurations produce byte-identical output.

use std::fmt::Write as _;

use crate::config::RunConfig;
use crate::mass::{MassReport, MassSeries};

/// `f64` with 17 significant digits; `NaN` (an unresolved exponent) becomes
/// `null`.
fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "null".to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn json_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn config_json(config: &RunConfig, k: usize) -> String {
    let mut params = String::from("{");
    for (i, (key, value)) in config.effective_params().iter().enumerate() {
        if i > 0 {
            params.push_str(", ");
        }
        let _ = write!(params, "{}: {}", json_string(key), fmt_f64(*value));
    }
    params.push('}');
    let radii: Vec<String> = config.radii.iter().map(|r| fmt_f64(*r)).collect();
    format!(
        concat!(
            "{{\"metric\": {}, \"params\": {}, \"n\": {}, \"k\": {}, ",
            "\"radii\": [{}], \"quad_degree\": {}, ",
            "\"fd\": {{\"conn_step_rel\": {}, \"d_step_rel\": {}}}, ",
            "\"two_term\": {}, \"seed\": {}}}"
        ),
        json_string(&config.metric),
        params,
        config.n,
        k,
        radii.join(", "),
        config.quad_degree,
        fmt_f64(config.fd.conn_step_rel),
        fmt_f64(config.fd.d_step_rel),
        config.two_term,
        config.seed,
    )
}

fn series_value(series: &MassSeries, i: usize) -> String {
    fmt_f64(series.values[i])
}

/// The JSON report for one `(family, k)` run:
/// `{config, per_radius, limits, exponents, discrepancies, warnings}`.
pub fn report_json(report: &MassReport, config: &RunConfig) -> String {
    let mut out = String::new();
    out.push_str("{\n");
    let _ = writeln!(out, "  \"config\": {},", config_json(config, report.k));
    out.push_str("  \"per_radius\": [\n");
    for (i, r) in report.radii.iter().enumerate() {
        let adm = match &report.adm {
            Some(s) => series_value(s, i),
            None => "null".to_string(),
        };
        let _ = write!(
            out,
            "    {{\"r\": {}, \"gbc\": {}, \"intrinsic\": {}, \"chern\": {}, \"adm\": {}, \"omega_starq\": {}}}",
            fmt_f64(*r),
            series_value(&report.gbc, i),
            series_value(&report.intrinsic, i),
            series_value(&report.chern, i),
            adm,
            series_value(&report.omega_starq, i),
        );
        out.push_str(if i + 1 < report.radii.len() { ",\n" } else { "\n" });
    }
    out.push_str("  ],\n");
    let adm_limit = match &report.adm {
        Some(s) => fmt_f64(s.limit),
        None => "null".to_string(),
    };
    let adm_expo = match &report.adm {
        Some(s) => fmt_f64(s.exponent),
        None => "null".to_string(),
    };
    let _ = writeln!(
        out,
        "  \"limits\": {{\"gbc\": {}, \"intrinsic\": {}, \"chern\": {}, \"adm\": {}, \"omega_starq\": {}}},",
        fmt_f64(report.gbc.limit),
        fmt_f64(report.intrinsic.limit),
        fmt_f64(report.chern.limit),
        adm_limit,
        fmt_f64(report.omega_starq.limit),
    );
    let _ = writeln!(
        out,
        "  \"exponents\": {{\"gbc\": {}, \"intrinsic\": {}, \"chern\": {}, \"adm\": {}, \"omega_starq\": {}}},",
        fmt_f64(report.gbc.exponent),
        fmt_f64(report.intrinsic.exponent),
        fmt_f64(report.chern.exponent),
        adm_expo,
        fmt_f64(report.omega_starq.exponent),
    );
    let _ = writeln!(
        out,
        "  \"discrepancies\": {{\"gbc_vs_intrinsic\": {}, \"gbc_vs_chern\": {}, \"intrinsic_vs_chern\": {}}},",
        fmt_f64(report.discrepancies.gbc_vs_intrinsic),
        fmt_f64(report.discrepancies.gbc_vs_chern),
        fmt_f64(report.discrepancies.intrinsic_vs_chern),
    );
    let warnings: Vec<String> = report.warnings.iter().map(|w| json_string(w)).collect();
    let _ = writeln!(out, "  \"warnings\": [{}]", warnings.join(", "));
    out.push_str("}\n");
    out
}

/// The CSV convergence table. Header row, comma separator, `.` decimal
/// point; the ADM column is empty unless `k = 1`.
pub fn report_csv(report: &MassReport) -> String {
    let mut out =
        String::from("r,m_GBC_partial,m_Ik_partial,m_kC_partial,adm_partial,omega_starq_partial\n");
    for (i, r) in report.radii.iter().enumerate() {
        let adm = match &report.adm {
            Some(s) => fmt_f64(s.values[i]),
            None => String::new(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_f64(*r),
            fmt_f64(report.gbc.values[i]),
            fmt_f64(report.intrinsic.values[i]),
            fmt_f64(report.chern.values[i]),
            adm,
            fmt_f64(report.omega_starq.values[i]),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mass::{Discrepancies, MassSeries};
    use std::collections::BTreeMap;

    fn sample_report() -> MassReport {
        let series = |v: f64| MassSeries {
            values: vec![v, v, v, v],
            limit: v,
            exponent: 1.0,
            fit_residual: 0.0,
        };
        MassReport {
            family: "flat".to_string(),
            params: BTreeMap::new(),
            dim: 4,
            k: 1,
            radii: vec![10.0, 20.0, 40.0, 80.0],
            gbc: series(0.0),
            intrinsic: series(0.0),
            chern: series(0.0),
            adm: Some(series(0.0)),
            omega_starq: series(0.0),
            discrepancies: Discrepancies {
                gbc_vs_intrinsic: 0.0,
                gbc_vs_chern: 0.0,
                intrinsic_vs_chern: 0.0,
            },
            warnings: vec!["note".to_string()],
        }
    }

    #[test]
    fn json_has_schema_keys_and_17_digits() {
        let report = sample_report();
        let config = RunConfig::default();
        let json = report_json(&report, &config);
        for key in [
            "\"config\"",
            "\"per_radius\"",
            "\"limits\"",
            "\"exponents\"",
            "\"discrepancies\"",
            "\"warnings\"",
            "\"gbc_vs_intrinsic\"",
        ] {
            assert!(json.contains(key), "missing {key} in {json}");
        }
        // 17 significant digits: 1.0000000000000000e1.
        assert!(json.contains("1.0000000000000000e1"));
    }

    #[test]
    fn csv_header_and_shape() {
        let report = sample_report();
        let csv = report_csv(&report);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "r,m_GBC_partial,m_Ik_partial,m_kC_partial,adm_partial,omega_starq_partial"
        );
        assert_eq!(lines.count(), 4);
    }

    #[test]
    fn k2_leaves_adm_column_empty() {
        let mut report = sample_report();
        report.k = 2;
        report.adm = None;
        let csv = report_csv(&report);
        let first_row = csv.lines().nth(1).unwrap();
        let fields: Vec<&str> = first_row.split(',').collect();
        assert_eq!(fields.len(), 6);
        assert!(fields[4].is_empty());
    }
}
