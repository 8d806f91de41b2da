//! The principal's record of past incentives and chosen arms.

use crate::error::HistoryError;
use crate::model::IncentiveRange;

/// One round of play as the principal recorded it.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRecord {
    /// 1-based step index.
    pub t: usize,
    pub pi: Vec<f64>,
    /// 0-based arm index.
    pub chosen_arm: usize,
    /// Principal reward realization.
    pub mu: f64,
    pub explored_pr: bool,
    pub explored_ag: bool,
}

/// Borrowed view of a stored record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordView<'a> {
    pub t: usize,
    pub pi: &'a [f64],
    pub chosen_arm: usize,
    pub mu: f64,
    pub explored_pr: bool,
    pub explored_ag: bool,
}

#[derive(Debug, Clone, PartialEq)]
struct Meta {
    t: usize,
    chosen_arm: usize,
    mu: f64,
    explored_pr: bool,
    explored_ag: bool,
}

/// Ordered sequence of records; incentive vectors are stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    n: usize,
    range: IncentiveRange,
    incentives: Vec<f64>,
    meta: Vec<Meta>,
}

impl History {
    pub fn new(n: usize, range: IncentiveRange) -> Self {
        Self {
            n,
            range,
            incentives: Vec::new(),
            meta: Vec::new(),
        }
    }

    /// Builds a history from `(pi, chosen_arm)` pairs numbered from step 1.
    pub fn from_choices<I, P>(
        n: usize,
        range: IncentiveRange,
        choices: I,
    ) -> Result<Self, HistoryError>
    where
        I: IntoIterator<Item = (P, usize)>,
        P: AsRef<[f64]>,
    {
        let mut h = Self::new(n, range);
        for (i, (pi, arm)) in choices.into_iter().enumerate() {
            h.push(HistoryRecord {
                t: i + 1,
                pi: pi.as_ref().to_vec(),
                chosen_arm: arm,
                mu: 0.0,
                explored_pr: false,
                explored_ag: false,
            })?;
        }
        Ok(h)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn range(&self) -> IncentiveRange {
        self.range
    }

    pub fn len(&self) -> usize {
        self.meta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.meta.is_empty()
    }

    pub fn push(&mut self, record: HistoryRecord) -> Result<(), HistoryError> {
        if record.pi.len() != self.n {
            return Err(HistoryError::DimensionMismatch {
                expected: self.n,
                got: record.pi.len(),
            });
        }
        if record.chosen_arm >= self.n {
            return Err(HistoryError::ArmOutOfRange {
                arm: record.chosen_arm,
                n: self.n,
            });
        }
        let prev = self.meta.last().map_or(0, |m| m.t);
        if record.t <= prev {
            return Err(HistoryError::StepNotIncreasing {
                previous: prev,
                got: record.t,
            });
        }
        if let Some((arm, &value)) = record
            .pi
            .iter()
            .enumerate()
            .find(|(_, &x)| !self.range.contains(x))
        {
            return Err(HistoryError::IncentiveOutOfRange {
                t: record.t,
                arm,
                value,
            });
        }
        self.incentives.extend_from_slice(&record.pi);
        self.meta.push(Meta {
            t: record.t,
            chosen_arm: record.chosen_arm,
            mu: record.mu,
            explored_pr: record.explored_pr,
            explored_ag: record.explored_ag,
        });
        Ok(())
    }

    pub fn get(&self, i: usize) -> Option<RecordView<'_>> {
        let m = self.meta.get(i)?;
        Some(RecordView {
            t: m.t,
            pi: &self.incentives[i * self.n..(i + 1) * self.n],
            chosen_arm: m.chosen_arm,
            mu: m.mu,
            explored_pr: m.explored_pr,
            explored_ag: m.explored_ag,
        })
    }

    pub fn records(&self) -> impl ExactSizeIterator<Item = RecordView<'_>> + '_ {
        (0..self.len()).map(move |i| self.get(i).expect("index in range"))
    }

    /// `(pi, chosen_arm)` pairs, the only inputs the estimator uses.
    pub fn choices(&self) -> impl ExactSizeIterator<Item = (&[f64], usize)> + '_ {
        self.incentives
            .chunks_exact(self.n.max(1))
            .zip(&self.meta)
            .map(|(pi, m)| (pi, m.chosen_arm))
    }

    /// History restricted to its first `len` records.
    pub fn prefix(&self, len: usize) -> History {
        let len = len.min(self.len());
        History {
            n: self.n,
            range: self.range,
            incentives: self.incentives[..len * self.n].to_vec(),
            meta: self.meta[..len].to_vec(),
        }
    }
}
