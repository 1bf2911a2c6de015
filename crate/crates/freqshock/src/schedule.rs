//! Mixture-batch scheduling: each training batch mixes knowledge-extraction
//! task items and pretraining-task items in ratio alpha:beta.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BATCH_SIZE: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixtureSchedule {
    /// Task queries per batch unit (alpha is conventionally fixed at 1).
    pub alpha: u32,
    /// Pretraining-task units per batch.
    pub beta: u32,
    pub batch_size: usize,
}

impl MixtureSchedule {
    pub fn new(alpha: u32, beta: u32, batch_size: usize) -> Result<Self> {
        if alpha < 1 {
            return Err(Error::InvalidInput("alpha must be >= 1".to_string()));
        }
        if batch_size == 0 {
            return Err(Error::InvalidInput("batch size must be positive".to_string()));
        }
        Ok(MixtureSchedule {
            alpha,
            beta,
            batch_size,
        })
    }

    /// Standard finetuning: ratio 1:0.
    pub fn standard() -> Self {
        MixtureSchedule {
            alpha: 1,
            beta: 0,
            batch_size: DEFAULT_BATCH_SIZE,
        }
    }
}

impl Default for MixtureSchedule {
    fn default() -> Self {
        MixtureSchedule::standard()
    }
}

/// One emitted batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<T, P> {
    pub task: Vec<T>,
    pub pretrain: Vec<P>,
}

/// Task-item count of batch `i` (0-based) under cumulative largest-remainder
/// rounding, so the long-run ratio error never exceeds one item per batch.
pub fn task_count_for_batch(schedule: &MixtureSchedule, batch_index: u64) -> usize {
    let units = (schedule.alpha + schedule.beta) as u128;
    let numer = schedule.batch_size as u128 * schedule.alpha as u128;
    let lo = (batch_index as u128 * numer) / units;
    let hi = ((batch_index as u128 + 1) * numer) / units;
    (hi - lo) as usize
}

/// Emits `n_batches` batches drawing from the two streams in order.
///
/// In cyclic mode exhausted streams wrap around; otherwise exhaustion before
/// `n_batches` is an error.
pub fn schedule_batches<T: Clone, P: Clone>(
    task_stream: &[T],
    pretrain_stream: &[P],
    schedule: &MixtureSchedule,
    n_batches: usize,
    cyclic: bool,
) -> Result<Vec<Batch<T, P>>> {
    let mut batches = Vec::with_capacity(n_batches);
    let mut task_pos = 0usize;
    let mut pretrain_pos = 0usize;
    for i in 0..n_batches {
        let n_task = task_count_for_batch(schedule, i as u64);
        let n_pretrain = schedule.batch_size - n_task;
        let task = take(task_stream, &mut task_pos, n_task, cyclic, "task")?;
        let pretrain = take(pretrain_stream, &mut pretrain_pos, n_pretrain, cyclic, "pretrain")?;
        batches.push(Batch { task, pretrain });
    }
    Ok(batches)
}

fn take<T: Clone>(
    stream: &[T],
    pos: &mut usize,
    n: usize,
    cyclic: bool,
    name: &str,
) -> Result<Vec<T>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if stream.is_empty() || (!cyclic && *pos + n > stream.len()) {
        return Err(Error::InsufficientData(format!(
            "{name} stream exhausted: need {n} more items at position {pos}, stream length {}",
            stream.len()
        )));
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(stream[*pos % stream.len()].clone());
        *pos += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_finetuning_is_all_task() {
        let schedule = MixtureSchedule::new(1, 0, 128).unwrap();
        let task: Vec<u32> = (0..1280).collect();
        let pretrain: Vec<u32> = Vec::new();
        let batches = schedule_batches(&task, &pretrain, &schedule, 10, false).unwrap();
        assert!(batches.iter().all(|b| b.task.len() == 128 && b.pretrain.is_empty()));
    }

    #[test]
    fn one_to_fifteen_divides_exactly() {
        let schedule = MixtureSchedule::new(1, 15, 128).unwrap();
        for i in 0..100 {
            assert_eq!(task_count_for_batch(&schedule, i), 8);
        }
        let task: Vec<u32> = (0..8).collect();
        let pretrain: Vec<u32> = (0..120).collect();
        let batches = schedule_batches(&task, &pretrain, &schedule, 4, true).unwrap();
        assert!(batches.iter().all(|b| b.task.len() == 8 && b.pretrain.len() == 120));
    }

    #[test]
    fn non_dividing_ratio_stays_within_one_item() {
        let schedule = MixtureSchedule::new(1, 5, 128).unwrap();
        let exact = 128.0 / 6.0;
        let mut cumulative = 0u64;
        for i in 0..100 {
            let n = task_count_for_batch(&schedule, i);
            assert!(n == 21 || n == 22, "batch {i} had {n} task items");
            cumulative += n as u64;
            let target = exact * (i + 1) as f64;
            assert!(
                (cumulative as f64 - target).abs() <= 1.0,
                "cumulative drift {} vs {target}",
                cumulative
            );
        }
    }

    #[test]
    fn non_cyclic_exhaustion_errors() {
        let schedule = MixtureSchedule::new(1, 0, 4).unwrap();
        let task: Vec<u32> = (0..7).collect();
        let pretrain: Vec<u32> = Vec::new();
        assert!(schedule_batches(&task, &pretrain, &schedule, 2, false).is_err());
        assert!(schedule_batches(&task, &pretrain, &schedule, 2, true).is_ok());
    }

    #[test]
    fn streams_consumed_in_order() {
        let schedule = MixtureSchedule::new(1, 1, 4).unwrap();
        let task: Vec<u32> = (0..4).collect();
        let pretrain: Vec<u32> = (10..14).collect();
        let batches = schedule_batches(&task, &pretrain, &schedule, 2, false).unwrap();
        assert_eq!(batches[0].task, vec![0, 1]);
        assert_eq!(batches[0].pretrain, vec![10, 11]);
        assert_eq!(batches[1].task, vec![2, 3]);
        assert_eq!(batches[1].pretrain, vec![12, 13]);
    }
}
