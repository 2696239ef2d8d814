use std::collections::VecDeque;

const NONE: usize = usize::MAX;

/// Maximum bipartite matching size by Hopcroft-Karp.
///
/// `adj[u]` lists the neighbours of left vertex `u` as half-open ranges of
/// right-vertex indices, so interval-structured graphs (sorted points within
/// a window) need no explicit edge list.
pub(crate) fn max_matching(n_right: usize, adj: &[Vec<(usize, usize)>]) -> usize {
    let n_left = adj.len();
    let mut match_l = vec![NONE; n_left];
    let mut match_r = vec![NONE; n_right];
    let mut size = 0usize;

    // greedy warm start
    for (u, ranges) in adj.iter().enumerate() {
        'outer: for &(a, b) in ranges {
            for v in a..b {
                if match_r[v] == NONE {
                    match_r[v] = u;
                    match_l[u] = v;
                    size += 1;
                    break 'outer;
                }
            }
        }
    }

    let mut dist = vec![usize::MAX; n_left];
    let mut cur_range = vec![0usize; n_left];
    let mut cur_pos = vec![0usize; n_left];
    let mut queue = VecDeque::new();
    loop {
        // layered BFS from free left vertices
        queue.clear();
        for u in 0..n_left {
            if match_l[u] == NONE {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = usize::MAX;
            }
        }
        let mut reachable_free = false;
        while let Some(u) = queue.pop_front() {
            for &(a, b) in &adj[u] {
                for v in a..b {
                    let w = match_r[v];
                    if w == NONE {
                        reachable_free = true;
                    } else if dist[w] == usize::MAX {
                        dist[w] = dist[u] + 1;
                        queue.push_back(w);
                    }
                }
            }
        }
        if !reachable_free {
            break;
        }
        cur_range.iter_mut().for_each(|c| *c = 0);
        cur_pos.iter_mut().for_each(|c| *c = 0);
        let mut augmented = 0;
        for root in 0..n_left {
            if match_l[root] == NONE
                && augment(root, adj, &mut match_l, &mut match_r, &mut dist, &mut cur_range, &mut cur_pos)
            {
                augmented += 1;
            }
        }
        if augmented == 0 {
            break;
        }
        size += augmented;
    }
    size
}

fn next_edge(u: usize, adj: &[Vec<(usize, usize)>], cur_range: &mut [usize], cur_pos: &mut [usize]) -> Option<usize> {
    while cur_range[u] < adj[u].len() {
        let (a, b) = adj[u][cur_range[u]];
        let pos = cur_pos[u].max(a);
        if pos < b {
            cur_pos[u] = pos + 1;
            return Some(pos);
        }
        cur_range[u] += 1;
        cur_pos[u] = 0;
    }
    None
}

fn augment(
    root: usize,
    adj: &[Vec<(usize, usize)>],
    match_l: &mut [usize],
    match_r: &mut [usize],
    dist: &mut [usize],
    cur_range: &mut [usize],
    cur_pos: &mut [usize],
) -> bool {
    let mut stack = vec![root];
    while let Some(&u) = stack.last() {
        match next_edge(u, adj, cur_range, cur_pos) {
            None => {
                dist[u] = usize::MAX;
                stack.pop();
            }
            Some(v) => {
                let w = match_r[v];
                if w == NONE {
                    let mut v = v;
                    for &u in stack.iter().rev() {
                        let prev = match_l[u];
                        match_l[u] = v;
                        match_r[v] = u;
                        v = prev;
                    }
                    return true;
                } else if dist[w] != usize::MAX && dist[w] == dist[u] + 1 {
                    stack.push(w);
                }
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_on_complete_graph() {
        let adj = vec![vec![(0, 4)]; 4];
        assert_eq!(max_matching(4, &adj), 4);
    }

    #[test]
    fn needs_augmenting_path() {
        // greedy takes 0-0, then 1 only likes 0
        let adj = vec![vec![(0, 2)], vec![(0, 1)]];
        assert_eq!(max_matching(2, &adj), 2);
    }

    #[test]
    fn isolated_vertices() {
        let adj = vec![vec![], vec![(1, 2)], vec![(1, 2)]];
        assert_eq!(max_matching(3, &adj), 1);
    }
}
