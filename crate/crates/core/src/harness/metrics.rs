/// Percentage of budgeted episodes that produced a violation.
pub fn violation_rate(violations: usize, budget: usize) -> f64 {
    if budget == 0 {
        0.0
    } else {
        100.0 * violations as f64 / budget as f64
    }
}

/// 1-based episode index at which the `k`-th violation was found.
pub fn top_k_index(violated: &[bool], k: usize) -> Option<usize> {
    if k == 0 {
        return None;
    }
    violated
        .iter()
        .enumerate()
        .filter(|(_, &v)| v)
        .nth(k - 1)
        .map(|(i, _)| i + 1)
}

/// Mean TOP-K over the repetitions that found it. Absent when fewer than
/// half of the repetitions reached `k` violations.
pub fn aggregate_top_k(per_repetition: &[Option<usize>]) -> Option<f64> {
    let found: Vec<usize> = per_repetition.iter().flatten().copied().collect();
    if found.is_empty() || 2 * found.len() < per_repetition.len() {
        return None;
    }
    Some(found.iter().sum::<usize>() as f64 / found.len() as f64)
}
