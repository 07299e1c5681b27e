//! Coulomb-repelled configurations: one explicit gradient step on the
//! pairwise energy, projected back onto the sphere.

use super::QuadratureNodes;
use crate::error::{Error, Result};
use crate::geom::UnitVector;
use std::time::Instant;

const COINCIDENT_TOL: f64 = 1e-12;

/// Move every node to (x + eps F(x)) / |x + eps F(x)| where F is the
/// pairwise repulsive force sum_{y != x} (x - y)/|x - y|^s evaluated on the
/// ORIGINAL configuration (simultaneous update). Weights are unchanged.
///
/// Coincident pairs (distance below 1e-12) contribute no force and are
/// counted in the diagnostics.
pub fn repel(nodes: &QuadratureNodes, eps: f64, s: f64) -> Result<QuadratureNodes> {
    let n = nodes.len();
    if n < 2 {
        return Err(Error::InvalidCount(n, 2));
    }
    if eps < 0.0 {
        return Err(Error::OutOfDomain("eps", eps));
    }
    if s <= 0.0 {
        return Err(Error::OutOfDomain("s", s));
    }
    let start = Instant::now();
    if eps == 0.0 {
        // Exact identity; keeps eps = 0 reference rows bit-identical to the
        // base process.
        let mut prov = nodes.provenance.clone();
        prov.method = format!("repelled:{}", prov.method);
        prov.params.push(("eps".into(), 0.0));
        prov.params.push(("s".into(), s));
        return Ok(QuadratureNodes {
            nodes: nodes.nodes.clone(),
            weights: nodes.weights.clone(),
            provenance: prov,
        });
    }
    let d = nodes.dim();
    let mut forces = vec![0.0; n * d];
    let mut dropped = 0u64;
    let mut diff = vec![0.0; d];
    for i in 0..n {
        let xi = nodes.nodes[i].coords();
        for j in (i + 1)..n {
            let xj = nodes.nodes[j].coords();
            let mut dist2 = 0.0;
            for k in 0..d {
                let t = xi[k] - xj[k];
                diff[k] = t;
                dist2 += t * t;
            }
            let dist = dist2.sqrt();
            if dist < COINCIDENT_TOL {
                dropped += 1;
                continue;
            }
            let scale = dist.powf(-s);
            for k in 0..d {
                let contrib = diff[k] * scale;
                forces[i * d + k] += contrib;
                forces[j * d + k] -= contrib;
            }
        }
    }
    let moved: Vec<UnitVector> = (0..n)
        .map(|i| {
            let coords: Vec<f64> = nodes.nodes[i]
                .coords()
                .iter()
                .zip(&forces[i * d..(i + 1) * d])
                .map(|(x, f)| x + eps * f)
                .collect();
            UnitVector::from_unnormalized(coords)
        })
        .collect::<Result<_>>()?;

    let mut prov = nodes.provenance.clone();
    prov.method = format!("repelled:{}", prov.method);
    prov.params.push(("eps".into(), eps));
    prov.params.push(("s".into(), s));
    prov.diagnostics.dropped_force_pairs += dropped;
    prov.gen_time = nodes.provenance.gen_time + start.elapsed();
    if let Some(meta) = prov.importance.as_mut() {
        // Stored pilot values refer to the pre-move positions; force fresh
        // evaluations. Repelling an importance-weighted configuration keeps
        // the stale proposal weights and is experimental.
        meta.pilot_count = 0;
        meta.pilot_values.clear();
        prov.params.push(("experimental_importance_composition".into(), 1.0));
    }
    Ok(QuadratureNodes {
        nodes: moved,
        weights: nodes.weights.clone(),
        provenance: prov,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::nodes_iid;
    use crate::rng::Seed;

    fn min_pairwise_distance(nodes: &QuadratureNodes) -> f64 {
        let n = nodes.len();
        let mut best = f64::INFINITY;
        for i in 0..n {
            for j in (i + 1)..n {
                let d2: f64 = nodes.nodes[i]
                    .coords()
                    .iter()
                    .zip(nodes.nodes[j].coords())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                best = best.min(d2.sqrt());
            }
        }
        best
    }

    #[test]
    fn zero_step_is_identity() {
        let base = nodes_iid(3, 20, Seed::new(80)).unwrap();
        let repelled = repel(&base, 0.0, 3.0).unwrap();
        for (a, b) in base.nodes.iter().zip(&repelled.nodes) {
            for (x, y) in a.coords().iter().zip(b.coords()) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn antipodal_pair_is_fixed() {
        // F(x) = (x - (-x)) / |2x|^s = 2x / 2^s points along x, so the
        // normalized update returns x.
        let x = UnitVector::axis(3, 0).unwrap();
        let nodes = QuadratureNodes::uniform_weights(
            vec![x.clone(), x.negated()],
            crate::quadrature::Provenance::plain("iid", Seed::new(0), 2),
        );
        let repelled = repel(&nodes, 0.1, 3.0).unwrap();
        assert!((repelled.nodes[0].dot(&x) - 1.0).abs() < 1e-14);
        assert!((repelled.nodes[1].dot(&x.negated()) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn small_step_increases_minimum_distance() {
        let base = nodes_iid(3, 3, Seed::new(81)).unwrap();
        let before = min_pairwise_distance(&base);
        let repelled = repel(&base, 1e-3, 3.0).unwrap();
        let after = min_pairwise_distance(&repelled);
        assert!(after > before, "{after} <= {before}");
    }

    #[test]
    fn simultaneous_update_uses_original_forces() {
        // Hand-computed three-point instance on the circle.
        let pts = vec![
            UnitVector::new(vec![1.0, 0.0]).unwrap(),
            UnitVector::new(vec![0.0, 1.0]).unwrap(),
            UnitVector::new(vec![-1.0, 0.0]).unwrap(),
        ];
        let nodes = QuadratureNodes::uniform_weights(
            pts.clone(),
            crate::quadrature::Provenance::plain("iid", Seed::new(0), 3),
        );
        let eps = 0.01;
        let s = 2.0;
        let repelled = repel(&nodes, eps, s).unwrap();
        // Brute-force oracle from the original positions.
        for i in 0..3 {
            let mut force = [0.0, 0.0];
            for j in 0..3 {
                if i == j {
                    continue;
                }
                let dx = pts[i][0] - pts[j][0];
                let dy = pts[i][1] - pts[j][1];
                let dist = (dx * dx + dy * dy).sqrt();
                force[0] += dx / dist.powf(s);
                force[1] += dy / dist.powf(s);
            }
            let raw = [pts[i][0] + eps * force[0], pts[i][1] + eps * force[1]];
            let norm = (raw[0] * raw[0] + raw[1] * raw[1]).sqrt();
            assert!((repelled.nodes[i][0] - raw[0] / norm).abs() < 1e-14);
            assert!((repelled.nodes[i][1] - raw[1] / norm).abs() < 1e-14);
        }
    }

    #[test]
    fn coincident_pair_is_dropped_with_diagnostic() {
        let x = UnitVector::axis(3, 1).unwrap();
        let y = UnitVector::axis(3, 2).unwrap();
        let nodes = QuadratureNodes::uniform_weights(
            vec![x.clone(), x.clone(), y],
            crate::quadrature::Provenance::plain("iid", Seed::new(0), 3),
        );
        let repelled = repel(&nodes, 1e-3, 3.0).unwrap();
        assert_eq!(repelled.provenance.diagnostics.dropped_force_pairs, 1);
        assert_eq!(repelled.len(), 3);
    }

    #[test]
    fn repelling_importance_nodes_drops_stale_pilot_values() {
        let f = |x: &UnitVector| 1.0 + x[0] * x[0];
        let base = crate::quadrature::nodes_isvmf(&f, 3, 30, 0.3, Seed::new(83)).unwrap();
        assert!(base.provenance.importance.as_ref().unwrap().pilot_count > 0);
        let moved = repel(&base, 1e-3, 3.0).unwrap();
        let meta = moved.provenance.importance.as_ref().unwrap();
        assert_eq!(meta.pilot_count, 0);
        assert!(meta.pilot_values.is_empty());
        assert!(moved
            .provenance
            .params
            .iter()
            .any(|(k, _)| k == "experimental_importance_composition"));
    }

    #[test]
    fn single_node_marginal_stays_uniform() {
        // Second-moment check on the first repelled node across replications.
        let reps = 4000;
        let mut m2 = [0.0; 3];
        for rep in 0..reps {
            let base = nodes_iid(3, 16, Seed::new(82).child(rep)).unwrap();
            let repelled = repel(&base, 1.0 / 16.0, 3.0).unwrap();
            for k in 0..3 {
                m2[k] += repelled.nodes[0][k] * repelled.nodes[0][k];
            }
        }
        for v in m2 {
            let m = v / reps as f64;
            assert!((m - 1.0 / 3.0).abs() < 0.02, "second moment {m}");
        }
    }
}
