use serde::{Deserialize, Serialize};

use crate::data::raw::SubjectId;
use crate::{Error, Result};

/// One leave-one-subject-out split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub index: usize,
    pub test_subject: SubjectId,
    pub train_subjects: Vec<SubjectId>,
}

/// One fold per subject, in ascending subject order.
pub fn make_loso_folds(subjects: &[SubjectId]) -> Result<Vec<FoldAssignment>> {
    let mut sorted = subjects.to_vec();
    sorted.sort_unstable();
    if let Some(pair) = sorted.windows(2).find(|p| p[0] == p[1]) {
        return Err(Error::DuplicateSubject(pair[0].0));
    }
    if sorted.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "leave-one-subject-out needs at least 2 subjects, got {}",
            sorted.len()
        )));
    }
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(index, &test_subject)| FoldAssignment {
            index,
            test_subject,
            train_subjects: sorted.iter().copied().filter(|&s| s != test_subject).collect(),
        })
        .collect())
}
