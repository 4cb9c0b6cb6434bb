use nalgebra::Vector3;

use super::BinGeometry;

/// Bins are adjacent iff their closed regions touch: some vertex of one
/// lies inside the other within `eps`. Returns neighbor lists by flat bin
/// position, each sorted ascending; the relation is symmetric and
/// irreflexive.
pub fn compute_adjacency(geometry: &[BinGeometry], eps: f64) -> Vec<Vec<u32>> {
    let boxes: Vec<(Vector3<f64>, Vector3<f64>)> = geometry
        .iter()
        .map(|g| {
            g.vertices.iter().fold(
                (Vector3::repeat(f64::INFINITY), Vector3::repeat(f64::NEG_INFINITY)),
                |(lo, hi), v| (lo.inf(v), hi.sup(v)),
            )
        })
        .collect();

    let mut order: Vec<usize> = (0..geometry.len()).collect();
    order.sort_by(|&a, &b| boxes[a].0.x.total_cmp(&boxes[b].0.x).then(a.cmp(&b)));

    let mut adjacency = vec![Vec::new(); geometry.len()];
    for (pos, &i) in order.iter().enumerate() {
        let (lo_i, hi_i) = &boxes[i];
        for &j in &order[pos + 1..] {
            let (lo_j, hi_j) = &boxes[j];
            if lo_j.x > hi_i.x + eps {
                break;
            }
            let overlap = (1..3).all(|k| lo_j[k] <= hi_i[k] + eps && lo_i[k] <= hi_j[k] + eps);
            if overlap && touches(&geometry[i], &geometry[j], eps) {
                adjacency[i].push(j as u32);
                adjacency[j].push(i as u32);
            }
        }
    }
    for list in &mut adjacency {
        list.sort_unstable();
    }
    adjacency
}

fn touches(a: &BinGeometry, b: &BinGeometry, eps: f64) -> bool {
    a.vertices.iter().any(|v| b.contains(v, eps)) || b.vertices.iter().any(|v| a.contains(v, eps))
}
