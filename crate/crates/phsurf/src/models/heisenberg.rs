//! The Heisenberg group, coordinates (x, y, t):
//! theta = dt + x dy - y dx, X = dx-dir + y dt-dir, Y = dy-dir - x dt-dir.
//! Flat reference model: omega = 0, W = 0, torsion = 0. Kept for regression
//! tests; no catalog lemma depends on it.

use super::ModelGeometry;
use crate::chart::{ChartPoint, Covector, Frame, TangentVector};
use num_complex::Complex64;

pub fn make_heisenberg() -> ModelGeometry {
    ModelGeometry {
        name: "heisenberg".into(),
        kind: super::ModelKind::Heisenberg,
        periods: [None, None, None],
        domain: Box::new(|c| c.iter().all(|v| v.is_finite())),
        theta: Box::new(|p: ChartPoint| {
            let [x, y, _] = p.coords;
            Covector::new(p, [-y, x, 1.0])
        }),
        omega: Box::new(|p: ChartPoint| Covector::new(p, [0.0, 0.0, 0.0])),
        frame: Box::new(|p: ChartPoint| {
            let [x, y, _] = p.coords;
            Frame {
                x: TangentVector::new(p, [1.0, 0.0, y]),
                y: TangentVector::new(p, [0.0, 1.0, -x]),
                t: TangentVector::new(p, [0.0, 0.0, 1.0]),
            }
        }),
        torsion: Box::new(|_| Complex64::new(0.0, 0.0)),
        webster: Box::new(|_| 0.0),
        extras: Box::new(|_| Complex64::new(0.0, 0.0)),
        sample_box: [[-1.5, 1.5], [-1.5, 1.5], [-1.5, 1.5]],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn flat_invariants() {
        let m = make_heisenberg();
        let p = m.point([0.9, -1.2, 0.4]).unwrap();
        assert_eq!(m.webster_w(&p), 0.0);
        assert_eq!(m.torsion_a11(&p).norm(), 0.0);
        let fr = m.frame_at(&p);
        assert_relative_eq!(m.dtheta_fd(&p, fr.x.comps, fr.y.comps), 2.0, epsilon = 1e-9);
    }
}
