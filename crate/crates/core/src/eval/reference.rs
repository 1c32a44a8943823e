use serde::{Deserialize, Serialize};

use crate::zoo::ModelName;

/// Published per-model means, shipped for side-by-side comparison only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub model: ModelName,
    pub accuracy: f64,
    pub loss: f64,
    /// Mean training epochs where published.
    pub epochs: Option<f64>,
}

const TABLE1: &str = include_str!("../../reference/table1.csv");

pub fn table1_reference() -> Vec<ReferenceRow> {
    csv::Reader::from_reader(TABLE1.as_bytes())
        .deserialize()
        .collect::<Result<_, _>>()
        .expect("shipped reference table parses")
}

pub fn reference_for(model: ModelName) -> Option<ReferenceRow> {
    table1_reference().into_iter().find(|r| r.model == model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_rows() {
        let t = table1_reference();
        assert_eq!(t.len(), 9);
        assert_eq!(reference_for(ModelName::Cnn).unwrap().accuracy, 92.8);
        assert_eq!(reference_for(ModelName::ShallowNn).unwrap().loss, 0.71);
        assert_eq!(reference_for(ModelName::CnnGru).unwrap().epochs, None);
    }
}
