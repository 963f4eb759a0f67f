//! Common interface over everything that can assign workplace choice
//! probabilities: the estimated nested logit, trained networks, and the
//! synthetic ground-truth oracles. The evaluation suite works against this
//! trait so every model family is scored through the same code path.

use crate::domain::DatasetView;
use crate::error::Result;
use crate::nested_logit::{nl_choice_probabilities, NlParams};
use crate::neural::NeuralModel;
use crate::synthgen::Oracle;

pub trait ChoiceModel {
    /// Column label in comparison reports.
    fn label(&self) -> String;

    /// Choice probability vector over all zones for one view row.
    fn probabilities(&self, view: &DatasetView<'_>, row: usize) -> Result<Vec<f64>>;
}

impl ChoiceModel for NlParams {
    fn label(&self) -> String {
        "DCM".to_string()
    }

    fn probabilities(&self, view: &DatasetView<'_>, row: usize) -> Result<Vec<f64>> {
        Ok(nl_choice_probabilities(self, view, row)?.into_vec())
    }
}

impl ChoiceModel for NeuralModel {
    fn label(&self) -> String {
        match self.feature_spec.mode {
            crate::neural::FeatureMode::Car => "DNN-Car".to_string(),
            crate::neural::FeatureMode::All => "DNN-All".to_string(),
        }
    }

    fn probabilities(&self, view: &DatasetView<'_>, row: usize) -> Result<Vec<f64>> {
        Ok(self.predict_probabilities(view, row)?.into_vec())
    }
}

impl ChoiceModel for Oracle {
    fn label(&self) -> String {
        Oracle::label(self).to_string()
    }

    fn probabilities(&self, view: &DatasetView<'_>, row: usize) -> Result<Vec<f64>> {
        let utilities = self.utilities(
            view.zones(),
            view.accessibility_row(row),
            view.individual(row),
        )?;
        Ok(crate::prob::softmax(&utilities)?.into_vec())
    }
}
