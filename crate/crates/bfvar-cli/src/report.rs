//! Report schema: one structured JSON object per invocation, stable field
//! order, diff-friendly. Raw-scale Bayes factors that overflow f64 are
//! carried as mantissa/exponent strings so the data is never capped.

use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub kind: &'static str,
    pub seed: u64,
    pub alpha: AlphaInfo,
    pub groups: Vec<GroupInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hypotheses: Option<Vec<HypothesisInfo>>,
    pub results: Vec<BfRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub posterior: Option<PosteriorInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
}

#[derive(Serialize)]
pub struct AlphaInfo {
    pub alpha1: f64,
    pub alpha2: f64,
    pub information_consistent: bool,
}

#[derive(Serialize)]
pub struct GroupInfo {
    pub label: String,
    pub n: u64,
    pub ss: f64,
    pub sd_unbiased: Option<f64>,
}

#[derive(Serialize)]
pub struct HypothesisInfo {
    pub text: String,
    pub log_ml: f64,
    pub mc_se: Option<f64>,
    pub stochastic: bool,
    pub budget_flagged: bool,
}

#[derive(Serialize)]
pub struct BfRow {
    pub numerator: String,
    pub denominator: String,
    pub log_bf: f64,
    pub bf: serde_json::Value,
    pub mc_se: Option<f64>,
    pub method: &'static str,
}

#[derive(Serialize)]
pub struct PosteriorInfo {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<DeltaInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairwise_delta: Option<Vec<PairInfo>>,
}

#[derive(Serialize)]
pub struct DeltaInfo {
    pub definition: &'static str,
    pub mean: Option<f64>,
    pub median: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub level: f64,
}

#[derive(Serialize)]
pub struct PairInfo {
    pub group_i: usize,
    pub group_j: usize,
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub p_delta_gt_1: f64,
}

#[derive(Serialize)]
pub struct Diagnostics {
    pub chains: usize,
    pub draws: usize,
    pub acceptance_rate: f64,
    pub ess_min: f64,
    pub flagged: bool,
}

#[derive(Serialize)]
pub struct ErrorObject {
    pub error: ErrorBody,
}

#[derive(Serialize)]
pub struct ErrorBody {
    pub kind: &'static str,
    pub message: String,
}

/// Raw-scale BF: a JSON number when exp fits in f64, otherwise a
/// mantissa-exponent decimal string (never capped).
pub fn bf_value(log_bf: f64) -> serde_json::Value {
    let v = log_bf.exp();
    if v.is_finite() && v != 0.0 {
        serde_json::json!(v)
    } else {
        let log10 = log_bf / std::f64::consts::LN_10;
        let e = log10.floor();
        let mantissa = 10f64.powf(log10 - e);
        serde_json::Value::String(format!("{mantissa:.6}e{}", e as i64))
    }
}
