//! NSGA-II machinery: fast non-dominated sorting, crowding distance, the
//! (mu + lambda) environmental selection, and 2D hypervolume for monitoring
//! front progress. Both objectives are minimized.

/// Strict Pareto dominance on minimized objective pairs.
pub fn dominates(a: &[f64; 2], b: &[f64; 2]) -> bool {
    a[0] <= b[0] && a[1] <= b[1] && (a[0] < b[0] || a[1] < b[1])
}

/// Fast non-dominated sort; returns fronts of indices, best first. Indices
/// within a front keep their input order.
pub fn non_dominated_sort(points: &[[f64; 2]]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if dominates(&points[i], &points[j]) {
                dominated_by[i].push(j);
            } else if dominates(&points[j], &points[i]) {
                domination_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by[i] {
                domination_count[j] -= 1;
                if domination_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
    }
    fronts
}

/// Crowding distance of each member of one front (boundary points infinite).
/// Exact duplicates share one distance, so ties fall back to input order
/// rather than handing boundary credit to arbitrary copies.
pub fn crowding_distance(points: &[[f64; 2]], front: &[usize]) -> Vec<f64> {
    let mut uniq: Vec<[f64; 2]> = front.iter().map(|&i| points[i]).collect();
    uniq.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    uniq.dedup();
    let m = uniq.len();
    let mut udist = vec![0.0f64; m];
    if m <= 2 {
        udist.iter_mut().for_each(|d| *d = f64::INFINITY);
    } else {
        for obj in 0..2 {
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| {
                uniq[a][obj]
                    .partial_cmp(&uniq[b][obj])
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            udist[order[0]] = f64::INFINITY;
            udist[order[m - 1]] = f64::INFINITY;
            let span = uniq[order[m - 1]][obj] - uniq[order[0]][obj];
            if span <= 0.0 || !span.is_finite() {
                continue;
            }
            for k in 1..m - 1 {
                let gap = uniq[order[k + 1]][obj] - uniq[order[k - 1]][obj];
                udist[order[k]] += gap / span;
            }
        }
    }
    // Only the first occurrence of a vector carries its distance; clones get
    // zero so they cannot crowd out genuinely diverse points.
    let mut seen = vec![false; m];
    front
        .iter()
        .map(|&i| {
            let pos = uniq
                .binary_search_by(|u| {
                    u.partial_cmp(&points[i]).unwrap_or(std::cmp::Ordering::Equal)
                })
                .expect("every front point appears in the unique list");
            if seen[pos] {
                0.0
            } else {
                seen[pos] = true;
                udist[pos]
            }
        })
        .collect()
}

/// Rank (front index) and crowding distance per individual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedPoint {
    pub rank: usize,
    pub crowding: f64,
}

pub fn rank_population(points: &[[f64; 2]]) -> Vec<RankedPoint> {
    let fronts = non_dominated_sort(points);
    let mut out = vec![
        RankedPoint {
            rank: usize::MAX,
            crowding: 0.0
        };
        points.len()
    ];
    for (rank, front) in fronts.iter().enumerate() {
        let dist = crowding_distance(points, front);
        for (&i, &d) in front.iter().zip(&dist) {
            out[i] = RankedPoint { rank, crowding: d };
        }
    }
    out
}

/// NSGA-II environmental selection: whole fronts in order, the split front
/// by descending crowding distance with ties broken by input order.
pub fn nsga2_select(points: &[[f64; 2]], mu: usize) -> Vec<usize> {
    let fronts = non_dominated_sort(points);
    let mut chosen = Vec::with_capacity(mu);
    for front in fronts {
        if chosen.len() >= mu {
            break;
        }
        if chosen.len() + front.len() <= mu {
            chosen.extend_from_slice(&front);
            continue;
        }
        let dist = crowding_distance(points, &front);
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&a, &b| {
            dist[b]
                .partial_cmp(&dist[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(front[a].cmp(&front[b]))
        });
        for k in order {
            if chosen.len() >= mu {
                break;
            }
            chosen.push(front[k]);
        }
    }
    chosen
}

/// 2D hypervolume of the non-dominated subset against a reference point;
/// points not dominating the reference are ignored.
pub fn hypervolume_2d(points: &[[f64; 2]], reference: [f64; 2]) -> f64 {
    let fronts = non_dominated_sort(points);
    let Some(front) = fronts.first() else {
        return 0.0;
    };
    let mut pts: Vec<[f64; 2]> = front
        .iter()
        .map(|&i| points[i])
        .filter(|p| p[0] < reference[0] && p[1] < reference[1])
        .collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    let mut hv = 0.0;
    let mut prev_y = reference[1];
    for p in pts {
        if p[1] < prev_y {
            hv += (reference[0] - p[0]) * (prev_y - p[1]);
            prev_y = p[1];
        }
    }
    hv
}
