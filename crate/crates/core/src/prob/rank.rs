use super::linalg::CorrelationMatrix;

/// Rank-based pseudo-observations `rank / (p + 1)`, ties sharing their average rank.
pub fn empirical_cdf_scores(samples: &[f64]) -> Vec<f64> {
    let p = samples.len();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| samples[a].total_cmp(&samples[b]));
    let mut ranks = vec![0.0; p];
    let mut start = 0;
    while start < p {
        let mut end = start + 1;
        while end < p && samples[order[end]] == samples[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1 ..= end
        let average = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = average;
        }
        start = end;
    }
    let denom = (p + 1) as f64;
    ranks.into_iter().map(|r| r / denom).collect()
}

/// Sample Pearson correlation between columns (each slice is one column of
/// `p` observations). Constant columns get zero correlation with everything else.
pub fn pearson_correlation(columns: &[Vec<f64>]) -> CorrelationMatrix {
    let r = columns.len();
    let centered: Vec<(Vec<f64>, f64)> = columns
        .iter()
        .map(|col| {
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            let dev: Vec<f64> = col.iter().map(|x| x - mean).collect();
            let norm = dev.iter().map(|d| d * d).sum::<f64>().sqrt();
            (dev, norm)
        })
        .collect();
    let mut entries = vec![0.0; r * r];
    for i in 0..r {
        entries[i * r + i] = 1.0;
        for j in (i + 1)..r {
            let (di, ni) = &centered[i];
            let (dj, nj) = &centered[j];
            let rho = if *ni > 0.0 && *nj > 0.0 {
                let dot: f64 = di.iter().zip(dj).map(|(a, b)| a * b).sum();
                (dot / (ni * nj)).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            entries[i * r + j] = rho;
            entries[j * r + i] = rho;
        }
    }
    CorrelationMatrix::from_row_major_unchecked(r, entries)
}
