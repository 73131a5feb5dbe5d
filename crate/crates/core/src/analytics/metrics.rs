//! Aggregate metrics and step-level diagnostics over settled traces.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::contract::{parse_action, ReportStatus, Skill};
use crate::episodes::Family;
use crate::settlement::{match_report, ClosureCase, MatchMode, TerminalCause, Trace};

fn pct(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

fn rate(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| pct(num, den))
}

/// Headline rates for one slice of episodes, all in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub episodes: usize,
    pub w: f64,
    pub w_strict: f64,
    pub b: f64,
    /// W minus B, in points.
    pub delta: f64,
    pub fr: f64,
    pub nr: f64,
    pub il: f64,
    pub honest_non_success: f64,
    /// Transport failures; outside FR/NR/IL.
    pub aborted: f64,
    /// Episodes that ended with a report.
    pub stop: f64,
}

impl Rates {
    pub fn of(traces: &[&Trace]) -> Self {
        let n = traces.len();
        let count = |f: &dyn Fn(&Trace) -> bool| traces.iter().filter(|t| f(t)).count();
        let w = pct(count(&|t| t.settlement.w_sem), n);
        let b = pct(count(&|t| t.settlement.b), n);
        Self {
            episodes: n,
            w,
            w_strict: pct(count(&|t| t.settlement.w_strict), n),
            b,
            delta: w - b,
            fr: pct(count(&|t| t.settlement.labels.fr), n),
            nr: pct(count(&|t| t.settlement.labels.nr), n),
            il: pct(count(&|t| t.settlement.labels.il), n),
            honest_non_success: pct(count(&|t| t.settlement.closure == ClosureCase::HonestNonSuccess), n),
            aborted: pct(count(&|t| t.settlement.closure == ClosureCase::Aborted), n),
            stop: pct(count(&|t| t.settlement.terminal_cause == TerminalCause::Report), n),
        }
    }
}

/// Report behaviour conditioned on the world outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalRates {
    /// P(report | W = 0), percent; absent when no episode has W = 0.
    pub report_given_w0: Option<f64>,
    /// P(no report | W = 1), percent; absent when no episode has W = 1.
    pub no_report_given_w1: Option<f64>,
    pub n_w0: usize,
    pub n_w1: usize,
}

pub fn conditional_rates(traces: &[&Trace]) -> ConditionalRates {
    let (w1, w0): (Vec<&Trace>, Vec<&Trace>) = traces.iter().copied().partition(|t| t.settlement.w_sem);
    let reported = |t: &Trace| t.settlement.terminal_cause == TerminalCause::Report;
    ConditionalRates {
        report_given_w0: rate(w0.iter().filter(|t| reported(t)).count(), w0.len()),
        no_report_given_w1: rate(w1.iter().filter(|t| !reported(t)).count(), w1.len()),
        n_w0: w0.len(),
        n_w1: w1.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefLag {
    /// Mean over qualifying episodes; absent when none qualify.
    pub mean: Option<f64>,
    pub per_episode: BTreeMap<String, u32>,
}

/// Steps from first goal satisfaction to the correct report, over episodes with W = 1 and B = 1.
pub fn belief_lag(traces: &[&Trace]) -> BeliefLag {
    let lags: Vec<(&str, u32)> = traces
        .iter()
        .filter(|t| t.settlement.w_sem && t.settlement.b)
        .filter_map(|t| {
            let s = &t.settlement;
            Some((t.header.episode_id.as_str(), s.report_step?.checked_sub(s.first_goal_step?)?))
        })
        .collect();
    let mean = (!lags.is_empty()).then(|| lags.iter().map(|&(_, v)| f64::from(v)).sum::<f64>() / lags.len() as f64);
    let per_episode = lags.into_iter().map(|(id, v)| (id.to_string(), v)).collect();
    BeliefLag { mean, per_episode }
}

/// False-success reports split by task progress at the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FalseSuccess {
    pub count: usize,
    pub at_zero: usize,
    /// Progress in (0, 0.75].
    pub intermediate: usize,
    pub above_075: usize,
    /// Percent of `count` at zero progress; absent when there are none.
    pub at_zero_pct: Option<f64>,
}

pub fn false_success_buckets(traces: &[&Trace]) -> FalseSuccess {
    let mut fs = FalseSuccess { count: 0, at_zero: 0, intermediate: 0, above_075: 0, at_zero_pct: None };
    for t in traces {
        let s = &t.settlement;
        let success_report = s.report.as_ref().is_some_and(|r| r.status == ReportStatus::Success);
        if t.header.family.is_state_verification() || !s.labels.fr || !success_report {
            continue;
        }
        fs.count += 1;
        let p = s.progress_at_report.unwrap_or(0.0);
        if p == 0.0 {
            fs.at_zero += 1;
        } else if p <= 0.75 {
            fs.intermediate += 1;
        } else {
            fs.above_075 += 1;
        }
    }
    fs.at_zero_pct = rate(fs.at_zero, fs.count);
    fs
}

pub const ACTION_CLASSES: [&str; 5] = ["navigate", "look", "interact_pixel", "report", "invalid"];

/// What agents do after the world goal first holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostAttainment {
    pub steps: usize,
    pub counts: BTreeMap<String, usize>,
    /// Percent per action class; all zero when there are no such steps.
    pub fractions: BTreeMap<String, f64>,
}

pub fn post_attainment_distribution(traces: &[&Trace]) -> PostAttainment {
    let mut counts: BTreeMap<String, usize> = ACTION_CLASSES.iter().map(|c| (c.to_string(), 0)).collect();
    for t in traces.iter().filter(|t| t.settlement.w_sem) {
        let Some(first) = t.settlement.first_goal_step else { continue };
        for s in t.steps.iter().filter(|s| s.step > first) {
            let class = match s.skill {
                Some(k) if s.invalid.is_none() => k.as_str(),
                _ => "invalid",
            };
            *counts.get_mut(class).expect("known class") += 1;
        }
    }
    let steps = counts.values().sum();
    let fractions = counts.iter().map(|(k, &v)| (k.clone(), pct(v, steps))).collect();
    PostAttainment { steps, counts, fractions }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportPolicy {
    AlwaysSuccess,
    RandomExpected,
    Oracle,
}

impl ReportPolicy {
    pub const ALL: [ReportPolicy; 3] =
        [ReportPolicy::AlwaysSuccess, ReportPolicy::RandomExpected, ReportPolicy::Oracle];

    pub fn as_str(self) -> &'static str {
        match self {
            ReportPolicy::AlwaysSuccess => "always_success",
            ReportPolicy::RandomExpected => "random_expected",
            ReportPolicy::Oracle => "oracle",
        }
    }
}

impl std::str::FromStr for ReportPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ReportPolicy::ALL.into_iter().find(|p| p.as_str() == s).ok_or_else(|| format!("unknown report policy {s:?}"))
    }
}

/// Expected B contribution of one trace when only its terminal report is
/// replaced. Execution, stop timing and the final state are kept as recorded.
pub fn counterfactual_b(trace: &Trace, policy: ReportPolicy) -> f64 {
    let w = trace.settlement.w_sem;
    match policy {
        ReportPolicy::Oracle => f64::from(u8::from(w)),
        // either admissible label is equally likely; exactly one of them is right when W holds
        ReportPolicy::RandomExpected => 0.5 * f64::from(u8::from(w)),
        ReportPolicy::AlwaysSuccess => {
            let mode = if trace.header.family.is_state_verification() {
                MatchMode::StateVerification
            } else {
                MatchMode::GoalCompletion
            };
            // the expected label is not stored in the trace; a success status never equals one
            let expected = trace.header.family.is_state_verification().then_some(ReportStatus::On);
            f64::from(u8::from(w && match_report(mode, ReportStatus::Success, w, expected)))
        }
    }
}

/// B in percent under a substituted report policy.
pub fn rescore_counterfactual(traces: &[&Trace], policy: ReportPolicy) -> f64 {
    if traces.is_empty() {
        return 0.0;
    }
    100.0 * traces.iter().map(|t| counterfactual_b(t, policy)).sum::<f64>() / traces.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualPanel {
    pub actual: f64,
    pub always_success: f64,
    pub random_expected: f64,
    pub oracle: f64,
}

impl CounterfactualPanel {
    pub fn of(traces: &[&Trace]) -> Self {
        Self {
            actual: Rates::of(traces).b,
            always_success: rescore_counterfactual(traces, ReportPolicy::AlwaysSuccess),
            random_expected: rescore_counterfactual(traces, ReportPolicy::RandomExpected),
            oracle: rescore_counterfactual(traces, ReportPolicy::Oracle),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyMetrics {
    pub rates: Rates,
    pub counterfactual: CounterfactualPanel,
}

/// Everything derived from one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub overall: Rates,
    pub per_family: BTreeMap<Family, FamilyMetrics>,
    pub conditional: ConditionalRates,
    pub belief_lag: BeliefLag,
    pub false_success: FalseSuccess,
    pub post_attainment: PostAttainment,
    pub counterfactual: CounterfactualPanel,
    pub events: EventMeans,
}

/// Mean per-episode counts of execution signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventMeans {
    pub too_far: f64,
    pub path_blocked: f64,
    pub retry: f64,
}

/// interact_pixel steps repeating an earlier identical (intent, x, y) in the same episode.
pub fn retry_count(trace: &Trace) -> usize {
    let mut seen = BTreeSet::new();
    let mut retries = 0;
    for s in &trace.steps {
        let Ok(action) = parse_action(&s.raw) else { continue };
        if let Skill::InteractPixel { intent, coords } = action.skill {
            if !seen.insert((intent, coords)) {
                retries += 1;
            }
        }
    }
    retries
}

impl EventMeans {
    pub fn of(traces: &[&Trace]) -> Self {
        let n = traces.len().max(1) as f64;
        let sum = |f: &dyn Fn(&Trace) -> usize| traces.iter().map(|t| f(t)).sum::<usize>() as f64 / n;
        Self {
            too_far: sum(&|t| t.steps.iter().filter(|s| s.feedback.too_far).count()),
            path_blocked: sum(&|t| t.steps.iter().filter(|s| s.feedback.path_blocked).count()),
            retry: sum(&retry_count),
        }
    }
}

/// Aggregate a run's traces. Order-independent.
pub fn aggregate(traces: &[Trace]) -> MetricsReport {
    let all: Vec<&Trace> = traces.iter().collect();
    let mut by_family: BTreeMap<Family, Vec<&Trace>> = BTreeMap::new();
    for t in &all {
        by_family.entry(t.header.family).or_default().push(t);
    }
    MetricsReport {
        overall: Rates::of(&all),
        per_family: by_family
            .iter()
            .map(|(f, ts)| (*f, FamilyMetrics { rates: Rates::of(ts), counterfactual: CounterfactualPanel::of(ts) }))
            .collect(),
        conditional: conditional_rates(&all),
        belief_lag: belief_lag(&all),
        false_success: false_success_buckets(&all),
        post_attainment: post_attainment_distribution(&all),
        counterfactual: CounterfactualPanel::of(&all),
        events: EventMeans::of(&all),
    }
}
