use crate::rational::Scalar;

/// Shortest augmenting path assignment (Jonker-Volgenant style potentials),
/// O(n³). `cost` is row-major `n × n`; returns `row -> column`.
pub(crate) fn min_assignment<T: Scalar>(n: usize, cost: &[T]) -> Vec<usize> {
    debug_assert_eq!(cost.len(), n * n);
    // 1-based internally; index 0 is the virtual column.
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv: Vec<Option<T>> = vec![None; n + 1];
    let mut used = vec![false; n + 1];

    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = None);
        used.iter_mut().for_each(|u| *u = false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta: Option<T> = None;
            let mut j1 = 0usize;
            let base = (i0 - 1) * n;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[base + j - 1].clone() - u[i0].clone() - v[j].clone();
                if minv[j].as_ref().is_none_or(|m| cur < *m) {
                    minv[j] = Some(cur);
                    way[j] = j0;
                }
                let mj = minv[j].as_ref().expect("set above");
                if delta.as_ref().is_none_or(|d| mj < d) {
                    delta = Some(mj.clone());
                    j1 = j;
                }
            }
            let delta = delta.expect("an unused column always remains");
            for j in 0..=n {
                if used[j] {
                    let i = owner[j];
                    u[i] = u[i].clone() + delta.clone();
                    v[j] = v[j].clone() - delta.clone();
                } else if let Some(m) = minv[j].as_mut() {
                    *m = m.clone() - delta.clone();
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![usize::MAX; n];
    for j in 1..=n {
        assignment[owner[j] - 1] = j - 1;
    }
    assignment
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::BigInt;

    #[test]
    fn small_known_instance() {
        let c: Vec<i128> = vec![4, 3, 5, 3, 5, 9, 4, 1, 4];
        let a = min_assignment(3, &c);
        let total: i128 = a.iter().enumerate().map(|(i, &j)| c[i * 3 + j]).sum();
        assert_eq!(total, 9);
    }

    #[test]
    fn bigint_matches_i128() {
        let c: Vec<i128> = vec![7, 2, 9, 1, 4, 8, 3, 3, 6, 5, 2, 7, 9, 1, 4, 4];
        let b: Vec<BigInt> = c.iter().map(|&x| BigInt::from(x)).collect();
        let a1 = min_assignment(4, &c);
        let a2 = min_assignment(4, &b);
        let t1: i128 = a1.iter().enumerate().map(|(i, &j)| c[i * 4 + j]).sum();
        let t2: i128 = a2.iter().enumerate().map(|(i, &j)| c[i * 4 + j]).sum();
        assert_eq!(t1, t2);
    }
}
