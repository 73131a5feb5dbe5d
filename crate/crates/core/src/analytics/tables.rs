//! CSV renderings of the metric tables.

use csv::Writer;

use super::metrics::MetricsReport;
use super::run::FeedbackComparison;

fn fmt(v: f64) -> String {
    format!("{v:.1}")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, fmt)
}

fn finish(w: Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
}

/// Per-family and overall W, B, delta and closure labels.
pub fn outcomes_csv(r: &MetricsReport) -> String {
    let mut w = Writer::from_writer(Vec::new());
    w.write_record([
        "family", "episodes", "W", "W_strict", "B", "delta", "FR", "NR", "IL", "honest", "aborted", "stop",
    ])
    .expect("write");
    let rows = r
        .per_family
        .iter()
        .map(|(f, m)| (f.as_str().to_string(), &m.rates))
        .chain(std::iter::once(("all".to_string(), &r.overall)));
    for (name, x) in rows {
        w.write_record([
            name,
            x.episodes.to_string(),
            fmt(x.w),
            fmt(x.w_strict),
            fmt(x.b),
            fmt(x.delta),
            fmt(x.fr),
            fmt(x.nr),
            fmt(x.il),
            fmt(x.honest_non_success),
            fmt(x.aborted),
            fmt(x.stop),
        ])
        .expect("write");
    }
    finish(w)
}

/// B under the actual and substituted report policies.
pub fn counterfactual_csv(r: &MetricsReport) -> String {
    let mut w = Writer::from_writer(Vec::new());
    w.write_record(["family", "B", "always_success", "random_expected", "oracle"]).expect("write");
    let rows = r
        .per_family
        .iter()
        .map(|(f, m)| (f.as_str().to_string(), &m.counterfactual))
        .chain(std::iter::once(("all".to_string(), &r.counterfactual)));
    for (name, c) in rows {
        w.write_record([name, fmt(c.actual), fmt(c.always_success), fmt(c.random_expected), fmt(c.oracle)])
            .expect("write");
    }
    finish(w)
}

/// Goal-reached count, mean lag, missed closures, and false-success buckets.
pub fn closure_lag_csv(r: &MetricsReport) -> String {
    let mut w = Writer::from_writer(Vec::new());
    w.write_record(["W_plus", "lag", "NR_given_W1", "FS", "at_zero_pct", "at_zero", "intermediate", "above_0.75"])
        .expect("write");
    let missed =
        r.conditional.no_report_given_w1.map_or(0, |p| (p * r.conditional.n_w1 as f64 / 100.0).round() as usize);
    let fs = &r.false_success;
    w.write_record([
        r.conditional.n_w1.to_string(),
        opt(r.belief_lag.mean),
        missed.to_string(),
        fs.count.to_string(),
        opt(fs.at_zero_pct),
        fs.at_zero.to_string(),
        fs.intermediate.to_string(),
        fs.above_075.to_string(),
    ])
    .expect("write");
    finish(w)
}

pub fn conditional_csv(r: &MetricsReport) -> String {
    let mut w = Writer::from_writer(Vec::new());
    w.write_record(["W", "B", "stop", "P_report_given_W0", "P_no_report_given_W1", "n_W0", "n_W1"]).expect("write");
    let c = &r.conditional;
    w.write_record([
        fmt(r.overall.w),
        fmt(r.overall.b),
        fmt(r.overall.stop),
        opt(c.report_given_w0),
        opt(c.no_report_given_w1),
        c.n_w0.to_string(),
        c.n_w1.to_string(),
    ])
    .expect("write");
    finish(w)
}

pub fn post_attainment_csv(r: &MetricsReport) -> String {
    let mut w = Writer::from_writer(Vec::new());
    w.write_record(["action", "steps", "percent"]).expect("write");
    for (k, v) in &r.post_attainment.counts {
        w.write_record([k.clone(), v.to_string(), fmt(r.post_attainment.fractions[k])]).expect("write");
    }
    finish(w)
}

pub fn feedback_csv(c: &FeedbackComparison) -> String {
    let mut w = Writer::from_writer(Vec::new());
    w.write_record(["run", "delta_W", "delta_B", "delta_FR", "delta_NR", "too_far", "path_blocked", "retry"])
        .expect("write");
    let e = &c.base_events;
    w.write_record([
        c.base_run.clone(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        format!("{:.3}", e.too_far),
        format!("{:.3}", e.path_blocked),
        format!("{:.3}", e.retry),
    ])
    .expect("write");
    let e = &c.feedback_events;
    w.write_record([
        c.feedback_run.clone(),
        fmt(c.delta_w),
        fmt(c.delta_b),
        fmt(c.delta_fr),
        fmt(c.delta_nr),
        format!("{:.3}", e.too_far),
        format!("{:.3}", e.path_blocked),
        format!("{:.3}", e.retry),
    ])
    .expect("write");
    finish(w)
}
