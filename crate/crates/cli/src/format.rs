//! Number formatting and the console/summary table.

use flra_core::{Protocol, Solution, SolveError};

/// `%g`-style rendering with 6 significant digits.
pub fn fmt_g(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    } else {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Blank for values that do not exist at this point.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_g).unwrap_or_default()
}

/// Side-by-side table of the solved protocols, winner marked with `*`.
pub fn summary_table(results: &[(Protocol, Result<Solution, SolveError>)]) -> String {
    let winner = results
        .iter()
        .filter_map(|(p, r)| r.as_ref().ok().map(|s| (*p, s.e_total)))
        .filter(|(_, e)| e.is_finite())
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(p, _)| p);

    type Column = (&'static str, fn(&Solution) -> f64);
    let rows: [Column; 10] = [
        ("T_tx^FL [s]", |s| s.t_tx_fl),
        ("T_tx^RA [us]", |s| s.t_pkt_avg * 1e6),
        ("E_b^FL [nJ/bit]", |s| s.e_bit_fl * 1e9),
        ("E_b^RA [nJ/bit]", |s| s.e_bit_ra * 1e9),
        ("E^FL [J]", |s| s.e_fl_total),
        ("E^RA [J]", |s| s.e_ra_total),
        ("E_tot [J]", |s| s.e_total),
        ("P_s", |s| s.p_success),
        ("rho*", |s| s.rho_star.get()),
        ("lambda* [1e5 pkt/s]", |s| s.lambda_star / 1e5),
    ];

    let mut out = String::new();
    out.push_str(&format!("{:<20}", "quantity"));
    for (p, _) in results {
        let mark = if Some(*p) == winner { "*" } else { "" };
        out.push_str(&format!("{:>22}", format!("{}{mark}", p.name())));
    }
    out.push('\n');
    for (label, get) in rows {
        out.push_str(&format!("{label:<20}"));
        for (_, r) in results {
            let cell = match r {
                Ok(s) => format!("{:.2}", get(s)),
                Err(_) => "-".into(),
            };
            out.push_str(&format!("{cell:>22}"));
        }
        out.push('\n');
    }
    out.push_str(&format!("{:<20}", "binding"));
    for (_, r) in results {
        let cell = match r {
            Ok(s) => s.binding.name().to_string(),
            Err(e) => format!("infeasible ({})", short_constraint(e)),
        };
        out.push_str(&format!("{cell:>22}"));
    }
    out.push('\n');
    if let Some(w) = winner {
        out.push_str(&format!("* lowest total energy: {}\n", w.name()));
    }
    for (_, r) in results {
        if let Err(e) = r {
            out.push_str(&format!("{e}\n"));
        }
    }
    out
}

fn short_constraint(e: &SolveError) -> &'static str {
    match e.constraint() {
        Some(flra_core::Constraint::Latency) => "latency",
        Some(flra_core::Constraint::Throughput) => "throughput",
        None => "options",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_format_matches_c() {
        let cases = [
            (1.0, "1"),
            (0.5, "0.5"),
            (1.285417, "1.28542"),
            (406312.7, "406313"),
            (1234567.0, "1.23457e+06"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (-2.5e-9, "-2.5e-09"),
            (999999.5, "1e+06"),
            (100.0, "100"),
            (0.0, "0"),
            (f64::INFINITY, "inf"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt_g(x), want, "{x}");
        }
    }
}
