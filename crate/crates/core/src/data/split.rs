use std::collections::BTreeSet;

use super::LabeledDataset;
use crate::{Error, Result};

/// Train and test data partitioned by whether the label is being forgotten.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassSplit {
    /// Sorted, duplicate-free.
    pub forget_classes: Vec<usize>,
    pub d_f_train: LabeledDataset,
    pub d_r_train: LabeledDataset,
    pub d_f_test: LabeledDataset,
    pub d_r_test: LabeledDataset,
}

impl ClassSplit {
    pub fn is_forgotten(&self, class: usize) -> bool {
        self.forget_classes.binary_search(&class).is_ok()
    }

    pub fn num_classes(&self) -> usize {
        self.d_r_train.num_classes()
    }
}

pub fn split_forget_remain(
    train: &LabeledDataset,
    test: &LabeledDataset,
    forget_classes: &[usize],
) -> Result<ClassSplit> {
    let k = train.num_classes();
    if test.num_classes() != k {
        return Err(Error::invalid(format!(
            "train has {k} classes, test has {}",
            test.num_classes()
        )));
    }
    let set: BTreeSet<usize> = forget_classes.iter().copied().collect();
    if set.is_empty() {
        return Err(Error::invalid("forget set is empty"));
    }
    if let Some(&bad) = set.iter().find(|&&c| c >= k) {
        return Err(Error::invalid(format!("forget class {bad} out of range for {k} classes")));
    }
    if set.len() == k {
        return Err(Error::invalid("cannot forget every class"));
    }
    let forget: Vec<usize> = set.into_iter().collect();
    let is_f = |y: usize| forget.binary_search(&y).is_ok();
    Ok(ClassSplit {
        d_f_train: train.filter_labels(is_f),
        d_r_train: train.filter_labels(|y| !is_f(y)),
        d_f_test: test.filter_labels(is_f),
        d_r_test: test.filter_labels(|y| !is_f(y)),
        forget_classes: forget,
    })
}
