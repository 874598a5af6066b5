//! Dataset documents.
//!
//! ```json
//! { "points": ["a", "b"], "weights": ["1/3", "2/3"], "features": { "f": ["0", "1/2"] } }
//! ```
//!
//! Numbers may be JSON numbers or strings holding integers, decimals or
//! `p/q` fractions. Emitted documents always use exact strings.

use std::io::Read;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use gds_core::constructions::{n_point_discrete, singleton_gds};
use gds_core::{DiscreteMeasure, FeatureFamily, GeometricDataSet, Scalar};

use crate::error::CliError;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    points: Vec<String>,
    weights: Vec<Value>,
    features: Map<String, Value>,
}

fn number<S: Scalar>(v: &Value, at: &str) -> Result<S, CliError> {
    let text = match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        _ => return Err(CliError::Schema(format!("{at}: expected a number, found {v}"))),
    };
    S::parse_str(&text).map_err(|e| CliError::Schema(format!("{at}: {e}")))
}

pub fn parse_dataset<S: Scalar>(text: &str) -> Result<GeometricDataSet<S>, CliError> {
    let doc: Document = serde_json::from_str(text).map_err(|e| CliError::Schema(e.to_string()))?;
    let weights = doc
        .weights
        .iter()
        .enumerate()
        .map(|(i, w)| number(w, &format!("weights[{i}]")))
        .collect::<Result<Vec<S>, _>>()?;
    let mut labels = Vec::with_capacity(doc.features.len());
    let mut rows = Vec::with_capacity(doc.features.len());
    for (label, values) in &doc.features {
        let Value::Array(values) = values else {
            return Err(CliError::Schema(format!("features.{label}: expected an array")));
        };
        let row = values
            .iter()
            .enumerate()
            .map(|(i, v)| number(v, &format!("features.{label}[{i}]")))
            .collect::<Result<Vec<S>, _>>()?;
        labels.push(label.clone());
        rows.push(row);
    }
    let schema = |e: gds_core::Error| CliError::Schema(e.to_string());
    let features = FeatureFamily::new(rows, labels).map_err(schema)?;
    let measure = DiscreteMeasure::new(weights).map_err(schema)?;
    GeometricDataSet::with_labels(doc.points, features, measure).map_err(schema)
}

pub fn emit_dataset<S: Scalar>(x: &GeometricDataSet<S>) -> String {
    let exact = |v: &S| Value::String(v.exact_string());
    let mut features = Map::new();
    for (label, row) in x.features().labels().iter().zip(x.features().rows()) {
        features.insert(label.clone(), Value::Array(row.iter().map(exact).collect()));
    }
    let doc = Document {
        points: x.points().to_vec(),
        weights: x.measure().weights().iter().map(exact).collect(),
        features,
    };
    serde_json::to_string_pretty(&doc).expect("documents serialise") + "\n"
}

/// Resolves dataset arguments: a file path, `-` for standard input,
/// `singleton:v1,v2,...` or `discrete:N`. Standard input is read at most once.
pub struct Inputs<'a> {
    stdin: &'a mut dyn Read,
    consumed: bool,
}

impl<'a> Inputs<'a> {
    pub fn new(stdin: &'a mut dyn Read) -> Self {
        Inputs {
            stdin,
            consumed: false,
        }
    }

    pub fn load<S: Scalar>(&mut self, spec: &str) -> Result<GeometricDataSet<S>, CliError> {
        let schema = |e: gds_core::Error| CliError::Schema(format!("{spec}: {e}"));
        if let Some(values) = spec.strip_prefix("singleton:") {
            let values = values
                .split(',')
                .map(|v| S::parse_str(v))
                .collect::<gds_core::Result<Vec<S>>>()
                .map_err(schema)?;
            return singleton_gds(&values).map_err(schema);
        }
        if let Some(n) = spec.strip_prefix("discrete:") {
            let n: usize = n
                .trim()
                .parse()
                .map_err(|_| CliError::Schema(format!("{spec}: expected a point count")))?;
            return n_point_discrete(n).map_err(schema);
        }
        let text = if spec == "-" {
            if self.consumed {
                return Err(CliError::Usage("standard input can be used once".into()));
            }
            self.consumed = true;
            let mut text = String::new();
            self.stdin.read_to_string(&mut text)?;
            text
        } else {
            std::fs::read_to_string(spec).map_err(|e| CliError::Input(format!("{spec}: {e}")))?
        };
        parse_dataset(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gds_core::constructions::random_gds;
    use gds_core::Rational;

    #[test]
    fn accepts_numbers_and_fractions() {
        let text = r#"{"points":["a","b"],"weights":["1/3", 0.5e0],"features":{"f":[0,"1/2"]}}"#;
        // weights 1/3 + 1/2 do not sum to one
        assert!(matches!(parse_dataset::<Rational>(text), Err(CliError::Schema(_))));
        let text = r#"{"points":["a","b"],"weights":["1/4", 0.75],"features":{"f":[0,"1/2"]}}"#;
        let x = parse_dataset::<Rational>(text).unwrap();
        assert_eq!(x.measure().weights()[1], Rational::from_ratio(3, 4));
        assert_eq!(x.features().label(0), "f");
    }

    #[test]
    fn rejects_bad_documents() {
        for text in [
            "{}",
            r#"{"points":["a"],"weights":["1"],"features":{}}"#,
            r#"{"points":["a"],"weights":["1"],"features":{"f":["x"]}}"#,
            r#"{"points":["a","b"],"weights":["1/2","1/2"],"features":{"f":[0,0]}}"#,
            r#"{"points":["a"],"weights":["1"],"features":{"f":[0]},"extra":1}"#,
        ] {
            assert!(matches!(parse_dataset::<f64>(text), Err(CliError::Schema(_))), "{text}");
        }
    }

    #[test]
    fn emitted_documents_parse_back() {
        let x = random_gds::<Rational>(4, 3, 2, 1).unwrap();
        assert_eq!(parse_dataset::<Rational>(&emit_dataset(&x)).unwrap(), x);
        let y = random_gds::<f64>(4, 3, 2, 1).unwrap();
        assert_eq!(parse_dataset::<f64>(&emit_dataset(&y)).unwrap(), y);
    }
}
