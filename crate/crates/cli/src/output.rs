//! CSV rendering. Floats use Rust's formatter, which is locale independent.

use std::fmt::Write as _;

use tfqkd_core::{ObservedCounts, SecurityBounds, SweepRow};

pub const RATE_HEADER: &str = "L_km,mu,epsilon,lambda,p_x,key_rate,e1ph_upper,EZ,n1_lower";

fn sci(v: f64) -> String {
    format!("{v:.12e}")
}

/// One row per distance. `n1_lower` is per window; `key_rate` is per window
/// unless a repetition rate is given.
pub fn rates_csv(rows: &[SweepRow], per_second: Option<f64>) -> String {
    let mut s = String::from(RATE_HEADER);
    s.push('\n');
    let scale = per_second.unwrap_or(1.0);
    for r in rows {
        let p = &r.result.params;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.distance_km,
            sci(p.mu),
            sci(p.epsilon),
            sci(p.lambda),
            sci(p.p_x),
            sci(r.result.rate * scale),
            sci(r.e1ph_u()),
            sci(r.ez()),
            sci(r.n1_per_window()),
        );
    }
    s
}

/// Simulated and analytic tallies side by side, then the derived bounds.
pub fn simulation_csv(
    observed: &ObservedCounts,
    expected: &ObservedCounts,
    sim: &SecurityBounds,
    exact: &SecurityBounds,
    per_second: Option<f64>,
) -> String {
    let mut s = String::from("quantity,simulated,analytic\n");
    let mut row = |name: &str, a: f64, b: f64| {
        let _ = writeln!(s, "{name},{},{}", sci(a), sci(b));
    };
    row("windows", observed.windows, expected.windows);
    for ((name, a), b) in ObservedCounts::FIELD_NAMES
        .iter()
        .zip(observed.tallies())
        .zip(expected.tallies())
    {
        row(name, a, b);
    }
    let scale = per_second.unwrap_or(1.0);
    row("key_rate", sim.rate * scale, exact.rate * scale);
    row("e1ph_upper", sim.e1ph_u, exact.e1ph_u);
    row("EZ", sim.ez, exact.ez);
    row("n1_lower", sim.n1_l, exact.n1_l);
    s
}
