//! Canonical document serialization for models, distributions, PEFs,
//! certificates and plans.
//!
//! Documents are JSON with sorted keys, two-space indentation and reals
//! printed with 17 significant digits, so emission is byte-stable and every
//! document re-parses to an equal value. Non-finite reals (the running log of
//! an aborted run) are stored as `null`.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bellmodel::{InputDistribution, ModelKind, TrialDistribution, TrialModel};
use crate::pefopt::{Pef, PefSolveReport};
use crate::planner::PlanResult;
use crate::protocol::EntropyCertificate;
use crate::rates::RatePoint;
use crate::{Error, Result, NUM_CELLS, NUM_INPUTS};

/// Serializes any document type canonically.
pub fn to_canonical_json<T: Serialize>(doc: &T) -> Result<String> {
    let value = serde_json::to_value(doc).map_err(|e| Error::Format(e.to_string()))?;
    let mut out = String::new();
    write_value(&mut out, &value, 0);
    out.push('\n');
    Ok(out)
}

/// Parses a document emitted by [`to_canonical_json`] (or any JSON with the
/// same schema).
pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
}

fn write_value(out: &mut String, value: &Value, indent: usize) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else {
                let f = n.as_f64().unwrap_or(f64::NAN);
                if f.is_finite() {
                    out.push_str(&format!("{f:.16e}"));
                } else {
                    out.push_str("null");
                }
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string serialization"));
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            let scalars = items.iter().all(|v| !matches!(v, Value::Array(_) | Value::Object(_)));
            if scalars {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, item, indent);
                }
                out.push(']');
            } else {
                out.push_str("[\n");
                for (i, item) in items.iter().enumerate() {
                    push_indent(out, indent + 1);
                    write_value(out, item, indent + 1);
                    if i + 1 < items.len() {
                        out.push(',');
                    }
                    out.push('\n');
                }
                push_indent(out, indent);
                out.push(']');
            }
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            // serde_json's default map is ordered; sort defensively anyway
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, key) in keys.iter().enumerate() {
                push_indent(out, indent + 1);
                out.push_str(&serde_json::to_string(key).expect("key serialization"));
                out.push_str(": ");
                write_value(out, &map[*key], indent + 1);
                if i + 1 < keys.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            push_indent(out, indent);
            out.push('}');
        }
    }
}

fn push_indent(out: &mut String, indent: usize) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

/// Trial-model document: `{kind, input_dist: [4], vertices: [[16], ...]}`
/// with flat cell index `8x + 4y + 2a + b`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDoc {
    pub input_dist: [f64; NUM_INPUTS],
    pub kind: String,
    pub vertices: Vec<Vec<f64>>,
}

pub fn model_to_doc(model: &TrialModel) -> ModelDoc {
    let kind = match model.kind() {
        ModelKind::NonSignaling => "ns",
        ModelKind::NonSignalingTsirelson => "tsirelson",
        ModelKind::Custom => "custom",
    };
    ModelDoc {
        input_dist: model.input_dist().as_array(),
        kind: kind.to_string(),
        vertices: model.vertices().iter().map(|v| v.as_array().to_vec()).collect(),
    }
}

pub fn model_from_doc(doc: &ModelDoc) -> Result<TrialModel> {
    let kind = match doc.kind.as_str() {
        "ns" => ModelKind::NonSignaling,
        "tsirelson" => ModelKind::NonSignalingTsirelson,
        "custom" => ModelKind::Custom,
        other => return Err(Error::Format(format!("unknown model kind {other:?}"))),
    };
    let input = InputDistribution::new(doc.input_dist)?;
    let mut vertices = Vec::with_capacity(doc.vertices.len());
    for (i, row) in doc.vertices.iter().enumerate() {
        if row.len() != NUM_CELLS {
            return Err(Error::Format(format!(
                "vertex {i} has {} entries, expected {NUM_CELLS}",
                row.len()
            )));
        }
        let mut probs = [0.0; NUM_CELLS];
        probs.copy_from_slice(row);
        vertices.push(TrialDistribution::new(probs)?);
    }
    TrialModel::from_parts(kind, vertices, input)
}

/// Distribution document: `{input_dist: [4], probs: [16]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistributionDoc {
    pub input_dist: [f64; NUM_INPUTS],
    pub probs: Vec<f64>,
}

pub fn distribution_to_doc(dist: &TrialDistribution) -> DistributionDoc {
    let mut input = [0.0; NUM_INPUTS];
    for x in 0..2 {
        for y in 0..2 {
            input[2 * x + y] = dist.input_marginal(x, y);
        }
    }
    DistributionDoc { input_dist: input, probs: dist.as_array().to_vec() }
}

pub fn distribution_from_doc(doc: &DistributionDoc) -> Result<TrialDistribution> {
    if doc.probs.len() != NUM_CELLS {
        return Err(Error::Format(format!(
            "distribution has {} entries, expected {NUM_CELLS}",
            doc.probs.len()
        )));
    }
    let mut probs = [0.0; NUM_CELLS];
    probs.copy_from_slice(&doc.probs);
    let dist = TrialDistribution::new(probs)?;
    for x in 0..2 {
        for y in 0..2 {
            let gap = (dist.input_marginal(x, y) - doc.input_dist[2 * x + y]).abs();
            if gap > 1e-9 {
                return Err(Error::Format(format!(
                    "probs marginal disagrees with input_dist at ({x},{y}) by {gap:.3e}"
                )));
            }
        }
    }
    Ok(dist)
}

/// PEF document: `{beta, values: [16], report}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PefDoc {
    pub beta: f64,
    pub report: PefReportDoc,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PefReportDoc {
    pub max_constraint_lhs: f64,
    pub objective_bits: f64,
    pub rescale_factor: f64,
}

pub fn pef_to_doc(pef: &Pef, report: &PefSolveReport) -> PefDoc {
    PefDoc {
        beta: pef.beta(),
        report: PefReportDoc {
            max_constraint_lhs: report.max_constraint_lhs,
            objective_bits: report.objective_bits,
            rescale_factor: report.rescale_factor,
        },
        values: pef.values().to_vec(),
    }
}

pub fn pef_from_doc(doc: &PefDoc) -> Result<Pef> {
    if doc.values.len() != NUM_CELLS {
        return Err(Error::Format(format!(
            "PEF has {} values, expected {NUM_CELLS}",
            doc.values.len()
        )));
    }
    let mut values = [0.0; NUM_CELLS];
    values.copy_from_slice(&doc.values);
    Pef::new(values, doc.beta)
}

/// Certificate document:
/// `{success, beta, epsilon, kappa, p_log2, entropy_bits, log2_tn, n, pef_replans}`.
/// `log2_tn` is `null` for aborted runs (minus infinity).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateDoc {
    pub beta: f64,
    pub entropy_bits: f64,
    pub epsilon: f64,
    pub kappa: f64,
    pub log2_tn: Option<f64>,
    pub n: u64,
    pub p_log2: f64,
    pub pef_replans: u64,
    pub success: bool,
}

pub fn certificate_to_doc(cert: &EntropyCertificate) -> CertificateDoc {
    CertificateDoc {
        beta: cert.beta,
        entropy_bits: cert.entropy_bits,
        epsilon: cert.epsilon,
        kappa: cert.kappa,
        log2_tn: cert.log2_tn.is_finite().then_some(cert.log2_tn),
        n: cert.n,
        p_log2: cert.p_log2,
        pef_replans: cert.pef_replans,
        success: cert.success,
    }
}

pub fn certificate_from_doc(doc: &CertificateDoc) -> EntropyCertificate {
    EntropyCertificate {
        success: doc.success,
        p_log2: doc.p_log2,
        entropy_bits: doc.entropy_bits,
        epsilon: doc.epsilon,
        kappa: doc.kappa,
        beta: doc.beta,
        log2_tn: doc.log2_tn.unwrap_or(f64::NEG_INFINITY),
        n: doc.n,
        pef_replans: doc.pef_replans,
    }
}

/// Single-point plan document mirroring [`PlanResult`] plus its inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanDoc {
    pub b: f64,
    pub beta_star: f64,
    pub epsilon: f64,
    pub f_eat: f64,
    pub f_pm: f64,
    pub i_hat: f64,
    pub kappa: f64,
    pub n_eat: f64,
    pub n_pef: f64,
    pub n_pef_upper: f64,
    pub n_pm0: f64,
    pub p_t_star: f64,
}

pub fn plan_to_doc(plan: &PlanResult, i_hat: f64, b: f64, epsilon: f64, kappa: f64) -> PlanDoc {
    PlanDoc {
        b,
        beta_star: plan.beta_star,
        epsilon,
        f_eat: plan.f_eat,
        f_pm: plan.f_pm,
        i_hat,
        kappa,
        n_eat: plan.n_eat,
        n_pef: plan.n_pef,
        n_pef_upper: plan.n_pef_upper,
        n_pm0: plan.n_pm0,
        p_t_star: plan.p_t_star,
    }
}

/// Rate-curve CSV with header `beta,g_bits,beta_g_bits`.
pub fn rate_curve_csv(curve: &[RatePoint]) -> String {
    let mut out = String::from("beta,g_bits,beta_g_bits\n");
    for point in curve {
        out.push_str(&format!("{},{},{}\n", point.beta, point.g_bits, point.beta_g_bits));
    }
    out
}

/// Plan-sweep CSV with header `I_hat,n_pef,n_pef_upper,n_pm,n_eat,f_pm,f_eat`.
pub fn plan_csv(rows: &[(f64, PlanResult)]) -> String {
    let mut out = String::from("I_hat,n_pef,n_pef_upper,n_pm,n_eat,f_pm,f_eat\n");
    for (i_hat, plan) in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            i_hat, plan.n_pef, plan.n_pef_upper, plan.n_pm0, plan.n_eat, plan.f_pm, plan.f_eat
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bellmodel::ns_model;
    use crate::distributions::family_werner;

    #[test]
    fn canonical_output_is_byte_stable_and_sorted() {
        let model = ns_model(&InputDistribution::uniform()).unwrap();
        let doc = model_to_doc(&model);
        let a = to_canonical_json(&doc).unwrap();
        let b = to_canonical_json(&doc).unwrap();
        assert_eq!(a, b);
        let input_pos = a.find("\"input_dist\"").unwrap();
        let kind_pos = a.find("\"kind\"").unwrap();
        let vertices_pos = a.find("\"vertices\"").unwrap();
        assert!(input_pos < kind_pos && kind_pos < vertices_pos);
    }

    #[test]
    fn reals_carry_17_significant_digits() {
        #[derive(Serialize)]
        struct One {
            x: f64,
        }
        let text = to_canonical_json(&One { x: 1.0 / 3.0 }).unwrap();
        assert!(text.contains("3.3333333333333331e-1"), "{text}");
    }

    #[test]
    fn model_document_round_trips() {
        let model = ns_model(&InputDistribution::uniform()).unwrap();
        let text = to_canonical_json(&model_to_doc(&model)).unwrap();
        let parsed: ModelDoc = from_json(&text).unwrap();
        let rebuilt = model_from_doc(&parsed).unwrap();
        assert_eq!(model, rebuilt);
        assert_eq!(to_canonical_json(&model_to_doc(&rebuilt)).unwrap(), text);
    }

    #[test]
    fn distribution_document_round_trips() {
        let nu = family_werner(0.87).unwrap();
        let text = to_canonical_json(&distribution_to_doc(&nu)).unwrap();
        let parsed: DistributionDoc = from_json(&text).unwrap();
        let rebuilt = distribution_from_doc(&parsed).unwrap();
        assert_eq!(nu, rebuilt);
    }

    #[test]
    fn distribution_import_rejects_inconsistent_marginal() {
        let nu = family_werner(0.9).unwrap();
        let mut doc = distribution_to_doc(&nu);
        doc.input_dist = [0.3, 0.3, 0.2, 0.2];
        assert!(distribution_from_doc(&doc).is_err());
    }

    #[test]
    fn certificate_with_aborted_run_uses_null() {
        let cert = EntropyCertificate {
            success: false,
            p_log2: -10.0,
            entropy_bits: 0.0,
            epsilon: 0.01,
            kappa: 1.0,
            beta: 1.0,
            log2_tn: f64::NEG_INFINITY,
            n: 5,
            pef_replans: 0,
        };
        let text = to_canonical_json(&certificate_to_doc(&cert)).unwrap();
        assert!(text.contains("\"log2_tn\": null"));
        let parsed: CertificateDoc = from_json(&text).unwrap();
        let rebuilt = certificate_from_doc(&parsed);
        assert_eq!(rebuilt.log2_tn, f64::NEG_INFINITY);
    }

    #[test]
    fn csv_headers_match_formats() {
        let csv = rate_curve_csv(&[RatePoint { beta: 0.1, g_bits: 0.4, beta_g_bits: 0.04 }]);
        assert!(csv.starts_with("beta,g_bits,beta_g_bits\n"));
        let plan = PlanResult {
            n_pef: 1.0,
            n_pef_upper: 2.0,
            n_pm0: 3.0,
            n_eat: 4.0,
            f_pm: 1.5,
            f_eat: 2.0,
            beta_star: 0.1,
            p_t_star: 0.8,
        };
        let csv = plan_csv(&[(2.5, plan)]);
        assert!(csv.starts_with("I_hat,n_pef,n_pef_upper,n_pm,n_eat,f_pm,f_eat\n"));
    }
}
