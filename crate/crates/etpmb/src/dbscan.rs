//! DBSCAN over planar points, used to cluster a scan into measurement cells.

use nalgebra::Vector2;

/// Cluster label per input point; `None` marks noise.
pub fn dbscan(points: &[Vector2<f64>], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    assert!(eps > 0.0, "eps must be positive");
    let n = points.len();
    let eps2 = eps * eps;
    let neighbors = |i: usize| -> Vec<usize> {
        // The neighborhood of a point contains the point itself.
        (0..n)
            .filter(|&j| (points[i] - points[j]).norm_squared() <= eps2)
            .collect()
    };

    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut visited = vec![false; n];
    let mut next_cluster = 0;

    for i in 0..n {
        if visited[i] {
            continue;
        }
        visited[i] = true;
        let seed = neighbors(i);
        if seed.len() < min_pts {
            continue; // noise unless later claimed as a border point
        }
        let cluster = next_cluster;
        next_cluster += 1;
        labels[i] = Some(cluster);
        let mut queue: Vec<usize> = seed;
        let mut qi = 0;
        while qi < queue.len() {
            let j = queue[qi];
            qi += 1;
            if labels[j].is_none() {
                labels[j] = Some(cluster);
            }
            if !visited[j] {
                visited[j] = true;
                let nb = neighbors(j);
                if nb.len() >= min_pts {
                    queue.extend(nb);
                }
            }
        }
    }
    labels
}
