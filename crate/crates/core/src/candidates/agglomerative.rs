use crate::embeddings::cosine_similarity;

/// Cosine distance, clamped at zero so identical vectors are exactly 0 apart.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    (1.0 - cosine_similarity(a, b)).max(0.0)
}

/// Average-linkage agglomeration on cosine distance.
///
/// Clusters are merged while the closest pair is strictly closer than
/// `cut_threshold`; ties go to the pair with the lowest indices. Returns the
/// member indices of each cluster, ordered by smallest member.
pub fn agglomerative_refine(embeddings: &[Vec<f64>], cut_threshold: f64) -> Vec<Vec<usize>> {
    let n = embeddings.len();
    let mut members: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = cosine_distance(&embeddings[i], &embeddings[j]);
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }

    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..n {
            if members[i].is_none() {
                continue;
            }
            for j in i + 1..n {
                if members[j].is_none() {
                    continue;
                }
                if best.is_none_or(|(_, _, d)| dist[i][j] < d) {
                    best = Some((i, j, dist[i][j]));
                }
            }
        }
        let Some((i, j, d)) = best else { break };
        if d >= cut_threshold {
            break;
        }
        let absorbed = members[j].take().expect("live cluster");
        let (ni, nj) = (members[i].as_ref().unwrap().len() as f64, absorbed.len() as f64);
        for k in 0..n {
            if k == i || k == j || members[k].is_none() {
                continue;
            }
            // Lance-Williams update for average linkage.
            let merged = (ni * dist[k][i] + nj * dist[k][j]) / (ni + nj);
            dist[k][i] = merged;
            dist[i][k] = merged;
        }
        members[i].as_mut().unwrap().extend(absorbed);
    }

    let mut clusters: Vec<Vec<usize>> = members
        .into_iter()
        .flatten()
        .map(|mut m| {
            m.sort_unstable();
            m
        })
        .collect();
    clusters.sort_by_key(|m| m[0]);
    clusters
}
