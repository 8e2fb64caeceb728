//! Pareto-front peeling for splitting trials into good and bad sets.
//! All objectives are maximized.

use super::HpoError;

/// `a` dominates `b` when it is no worse everywhere and better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return false;
        }
        if x > y {
            strictly = true;
        }
    }
    strictly
}

/// Fronts in order of increasing depth; each holds indices into `points`.
pub fn nondominated_fronts(points: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&points[i], &points[j]) {
                dominates_list[i].push(j);
                dominated_by[j] += 1;
            } else if dominates(&points[j], &points[i]) {
                dominates_list[j].push(i);
                dominated_by[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominates_list[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each member of a front; boundary points get infinity.
pub fn crowding_distance(points: &[Vec<f64>], front: &[usize]) -> Vec<f64> {
    let m = front.len();
    let mut distance = vec![0.0; m];
    if m <= 2 {
        return vec![f64::INFINITY; m];
    }
    let dims = points[front[0]].len();
    let mut order: Vec<usize> = (0..m).collect();
    for d in 0..dims {
        order.sort_by(|&a, &b| points[front[a]][d].total_cmp(&points[front[b]][d]).then(a.cmp(&b)));
        let lo = points[front[order[0]]][d];
        let hi = points[front[order[m - 1]]][d];
        distance[order[0]] = f64::INFINITY;
        distance[order[m - 1]] = f64::INFINITY;
        if hi > lo {
            for w in 1..m - 1 {
                let gap = points[front[order[w + 1]]][d] - points[front[order[w - 1]]][d];
                distance[order[w]] += gap / (hi - lo);
            }
        }
    }
    distance
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Split {
    pub good: Vec<usize>,
    pub bad: Vec<usize>,
    /// Members of `good` admitted from a partially taken front by crowding
    /// distance rather than by front depth alone.
    pub tie_broken: Vec<usize>,
}

/// Number of trials admitted to the good set.
pub fn good_set_size(count: usize, gamma: f64) -> usize {
    ((gamma * count as f64).floor() as usize).clamp(1, count.max(1))
}

/// Peels fronts into the good set until it holds [`good_set_size`] points.
pub fn split_by_dominance(points: &[Vec<f64>], gamma: f64) -> Result<Split, HpoError> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(HpoError::Config(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    if points.is_empty() {
        return Err(HpoError::NoCompleteTrials);
    }
    let target = good_set_size(points.len(), gamma);
    let mut split = Split::default();
    for front in nondominated_fronts(points) {
        let room = target - split.good.len();
        if room == 0 {
            split.bad.extend(front);
        } else if front.len() <= room {
            split.good.extend(front);
        } else {
            let crowd = crowding_distance(points, &front);
            let mut order: Vec<usize> = (0..front.len()).collect();
            order.sort_by(|&a, &b| crowd[b].total_cmp(&crowd[a]).then(front[a].cmp(&front[b])));
            for (rank, &i) in order.iter().enumerate() {
                if rank < room {
                    split.good.push(front[i]);
                    split.tie_broken.push(front[i]);
                } else {
                    split.bad.push(front[i]);
                }
            }
        }
    }
    split.good.sort_unstable();
    split.bad.sort_unstable();
    split.tie_broken.sort_unstable();
    Ok(split)
}
