//! Euclidean projection onto `{x >= 0, sum(x) <= 1}`, group by group.

/// Project one group onto the capped simplex.
pub fn project_group(v: &[f64]) -> Vec<f64> {
    let clipped: Vec<f64> = v.iter().map(|x| x.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= 1.0 {
        return clipped;
    }
    // Sorting-based projection onto the probability simplex.
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, ui) in u.iter().enumerate() {
        cum += ui;
        let t = (cum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Project each contiguous group of `w`; `groups` lists the group lengths.
pub fn project_constraints(w: &[f64], groups: &[usize]) -> Vec<f64> {
    assert_eq!(groups.iter().sum::<usize>(), w.len(), "groups cover the vector");
    let mut out = Vec::with_capacity(w.len());
    let mut at = 0;
    for &g in groups {
        out.extend(project_group(&w[at..at + g]));
        at += g;
    }
    out
}

pub fn is_feasible(w: &[f64], groups: &[usize], slack: f64) -> bool {
    let mut at = 0;
    groups.iter().all(|&g| {
        let grp = &w[at..at + g];
        at += g;
        grp.iter().all(|x| *x >= -slack) && grp.iter().sum::<f64>() <= 1.0 + slack
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn examples() {
        assert!(close(&project_group(&[0.6, 0.6]), &[0.5, 0.5]));
        assert!(close(&project_group(&[0.2, 0.3]), &[0.2, 0.3]));
        assert!(close(&project_group(&[2.0, 0.0]), &[1.0, 0.0]));
        assert!(close(&project_group(&[-0.5, 0.3]), &[0.0, 0.3]));
    }

    proptest! {
        #[test]
        fn idempotent_and_feasible(v in prop::collection::vec(-2.0f64..2.0, 1..8)) {
            let p = project_group(&v);
            prop_assert!(is_feasible(&p, &[p.len()], 1e-12));
            prop_assert!(close(&project_group(&p), &p));
        }
    }
}
