//! The expert-alleged transformations for each benchmark, with ground-truth labels.

use crate::batch::{CategoricalTransition, ContinuousTransition};
use crate::envs::acrobot::feature as ab;
use crate::envs::cartpole::feature as cp;
use crate::envs::grid::{self, GridSpec};
use crate::symmetry::Transformation;

/// Translation applied to the cart position by CartPole `TI`.
pub const CARTPOLE_SHIFT: f64 = 0.3;

#[derive(Debug, Clone)]
pub struct CatalogEntry<T> {
    pub transform: Transformation<T>,
    /// Whether the transformation is a true symmetry of the dynamics.
    pub is_symmetry: bool,
}

impl<T> CatalogEntry<T> {
    pub fn name(&self) -> &str {
        self.transform.name()
    }
}

fn entry<T: Clone + 'static>(
    name: &str,
    is_symmetry: bool,
    map: impl Fn(&T) -> T + Send + Sync + 'static,
) -> CatalogEntry<T> {
    CatalogEntry {
        transform: Transformation::new(name, map),
        is_symmetry,
    }
}

/// `(up, down, left, right) -> (right, left, up, down)`.
fn rotate_action(a: usize) -> usize {
    [grid::RIGHT, grid::LEFT, grid::UP, grid::DOWN][a]
}

/// Toroidal grid: TRSAI, SDAI, ODAI, ODWA, TI, TIOD.
pub fn grid_catalog(spec: &GridSpec) -> Vec<CatalogEntry<CategoricalTransition>> {
    let back_two = {
        let spec = *spec;
        move |t: &CategoricalTransition| {
            let (dx, dy) = grid::DIRECTIONS[t.a];
            spec.shift(t.s_next, -2 * dx, -2 * dy)
        }
    };
    let ahead_one = {
        let spec = *spec;
        move |t: &CategoricalTransition| spec.step_cell(t.s_next, t.a)
    };
    let back_two_wrong = back_two.clone();
    vec![
        entry("TRSAI", true, |t: &CategoricalTransition| {
            CategoricalTransition::new(t.s_next, grid::opposite(t.a), t.s)
        }),
        entry("SDAI", false, |t: &CategoricalTransition| {
            CategoricalTransition::new(t.s, grid::opposite(t.a), t.s_next)
        }),
        entry("ODAI", true, move |t: &CategoricalTransition| {
            CategoricalTransition::new(t.s, grid::opposite(t.a), back_two(t))
        }),
        entry("ODWA", false, move |t: &CategoricalTransition| {
            CategoricalTransition::new(t.s, rotate_action(t.a), back_two_wrong(t))
        }),
        entry("TI", true, move |t: &CategoricalTransition| {
            CategoricalTransition::new(t.s_next, t.a, ahead_one(t))
        }),
        entry("TIOD", false, |t: &CategoricalTransition| {
            CategoricalTransition::new(t.s_next, t.a, t.s)
        }),
    ]
}

fn negate_all(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| -x).collect()
}

fn negate_some(v: &[f64], idx: &[usize]) -> Vec<f64> {
    let mut out = v.to_vec();
    for &i in idx {
        out[i] = -out[i];
    }
    out
}

fn swap_binary(a: usize) -> usize {
    1 - a
}

/// `(-1, 0, 1) -> (1, 0, -1)` on action indices.
fn mirror_torque(a: usize) -> usize {
    2 - a
}

/// CartPole: SAR, ISR, AI, SFI, TI.
pub fn cartpole_catalog() -> Vec<CatalogEntry<ContinuousTransition>> {
    vec![
        entry("SAR", true, |t: &ContinuousTransition| {
            ContinuousTransition::new(negate_all(&t.s), swap_binary(t.a), negate_all(&t.s_next))
        }),
        entry("ISR", false, |t: &ContinuousTransition| {
            ContinuousTransition::new(negate_all(&t.s), t.a, t.s_next.clone())
        }),
        entry("AI", false, |t: &ContinuousTransition| {
            ContinuousTransition::new(t.s.clone(), swap_binary(t.a), t.s_next.clone())
        }),
        entry("SFI", false, |t: &ContinuousTransition| {
            ContinuousTransition::new(negate_some(&t.s, &[cp::X]), t.a, t.s_next.clone())
        }),
        entry("TI", true, |t: &ContinuousTransition| {
            let mut s = t.s.clone();
            let mut s_next = t.s_next.clone();
            s[cp::X] += CARTPOLE_SHIFT;
            s_next[cp::X] += CARTPOLE_SHIFT;
            ContinuousTransition::new(s, t.a, s_next)
        }),
    ]
}

/// Acrobot: AAVI, CAVI, AI, SSI.
pub fn acrobot_catalog() -> Vec<CatalogEntry<ContinuousTransition>> {
    const SINES_AND_RATES: [usize; 4] = [ab::SIN1, ab::SIN2, ab::OMEGA1, ab::OMEGA2];
    const COSINES_AND_RATES: [usize; 4] = [ab::COS1, ab::COS2, ab::OMEGA1, ab::OMEGA2];
    vec![
        entry("AAVI", true, |t: &ContinuousTransition| {
            ContinuousTransition::new(
                negate_some(&t.s, &SINES_AND_RATES),
                mirror_torque(t.a),
                negate_some(&t.s_next, &SINES_AND_RATES),
            )
        }),
        entry("CAVI", false, |t: &ContinuousTransition| {
            ContinuousTransition::new(
                negate_some(&t.s, &COSINES_AND_RATES),
                mirror_torque(t.a),
                negate_some(&t.s_next, &COSINES_AND_RATES),
            )
        }),
        entry("AI", false, |t: &ContinuousTransition| {
            ContinuousTransition::new(t.s.clone(), mirror_torque(t.a), t.s_next.clone())
        }),
        entry("SSI", false, |t: &ContinuousTransition| {
            ContinuousTransition::new(negate_all(&t.s), t.a, t.s_next.clone())
        }),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::batch::TransitionModel;

    fn find<'a, T>(cat: &'a [CatalogEntry<T>], name: &str) -> &'a CatalogEntry<T> {
        cat.iter().find(|e| e.name() == name).unwrap()
    }

    #[test]
    fn labels() {
        let g: Vec<_> = grid_catalog(&GridSpec::default())
            .iter()
            .map(|e| (e.name().to_string(), e.is_symmetry))
            .collect();
        assert_eq!(
            g,
            [("TRSAI", true), ("SDAI", false), ("ODAI", true), ("ODWA", false), ("TI", true), ("TIOD", false)]
                .map(|(n, b)| (n.to_string(), b))
        );
        let c: Vec<_> = cartpole_catalog().iter().map(|e| e.is_symmetry).collect();
        assert_eq!(c, [true, false, false, false, true]);
        let a: Vec<_> = acrobot_catalog().iter().map(|e| e.is_symmetry).collect();
        assert_eq!(a, [true, false, false, false]);
    }

    #[test]
    fn grid_rows_of_table() {
        let spec = GridSpec::default();
        let cat = grid_catalog(&spec);
        let t = CategoricalTransition::new(spec.index(1, 2), grid::UP, spec.index(1, 3));
        assert_eq!(
            find(&cat, "TIOD").transform.apply(&t),
            CategoricalTransition::new(spec.index(1, 3), grid::UP, spec.index(1, 2))
        );
        let t = CategoricalTransition::new(spec.index(4, 4), grid::UP, spec.index(4, 5));
        assert_eq!(
            find(&cat, "ODAI").transform.apply(&t),
            CategoricalTransition::new(spec.index(4, 4), grid::DOWN, spec.index(4, 3))
        );
        assert_eq!(
            find(&cat, "ODWA").transform.apply(&t),
            CategoricalTransition::new(spec.index(4, 4), grid::RIGHT, spec.index(4, 3))
        );
        assert_eq!(
            find(&cat, "TI").transform.apply(&t),
            CategoricalTransition::new(spec.index(4, 5), grid::UP, spec.index(4, 6))
        );
        // Wrap-around: left from x = 0 lands on x = 9; ODAI adds (2, 0) to s'.
        let t = CategoricalTransition::new(spec.index(0, 0), grid::LEFT, spec.index(9, 0));
        assert_eq!(
            find(&cat, "ODAI").transform.apply(&t),
            CategoricalTransition::new(spec.index(0, 0), grid::RIGHT, spec.index(1, 0))
        );
        let t = CategoricalTransition::new(spec.index(9, 9), grid::RIGHT, spec.index(0, 9));
        assert_eq!(
            find(&cat, "TI").transform.apply(&t),
            CategoricalTransition::new(spec.index(0, 9), grid::RIGHT, spec.index(1, 9))
        );
    }

    #[test]
    fn torus_closure() {
        let spec = GridSpec::default();
        for e in grid_catalog(&spec) {
            for s in 0..100 {
                for a in 0..4 {
                    for s2 in 0..100 {
                        let img = e.transform.apply(&CategoricalTransition::new(s, a, s2));
                        assert!(img.s < 100 && img.s_next < 100 && img.a < 4);
                    }
                }
            }
        }
    }

    // TRSAI is an exact invariance of the analytic tensor; the orthogonal-move
    // entries rule out SDAI, ODWA and TIOD.
    #[test]
    fn analytic_invariance_of_trsai() {
        let spec = GridSpec::default();
        let t = spec.true_model();
        let cat = grid_catalog(&spec);
        let exact = |name: &str| {
            let k = &find(&cat, name).transform;
            (0..100).all(|s| {
                (0..4).all(|a| {
                    (0..100).all(|s2| {
                        let img = k.apply(&CategoricalTransition::new(s, a, s2));
                        t.prob(s, a, s2) == t.prob(img.s, img.a, img.s_next)
                    })
                })
            })
        };
        assert!(exact("TRSAI"));
        for name in ["SDAI", "ODWA", "TIOD"] {
            assert!(!exact(name), "{name}");
        }
    }

    // ODAI and TI hold on every intended move (the 0.6 outcome): the image of an
    // intended transition is again an intended transition.
    #[test]
    fn odai_and_ti_preserve_intended_moves() {
        let spec = GridSpec::default();
        let t = spec.true_model();
        let cat = grid_catalog(&spec);
        for name in ["ODAI", "TI"] {
            let k = &find(&cat, name).transform;
            for s in 0..100 {
                for a in 0..4 {
                    let tr = CategoricalTransition::new(s, a, spec.step_cell(s, a));
                    let img = k.apply(&tr);
                    assert_eq!(t.prob(img.s, img.a, img.s_next), 0.6);
                }
            }
        }
    }

    #[test]
    fn cartpole_rows_of_table() {
        let cat = cartpole_catalog();
        let t = ContinuousTransition::new(vec![0.1, -0.2, 0.3, -0.4], 0, vec![0.5, 0.6, -0.7, 0.8]);
        let sar = find(&cat, "SAR").transform.apply(&t);
        assert_eq!(sar, ContinuousTransition::new(vec![-0.1, 0.2, -0.3, 0.4], 1, vec![-0.5, -0.6, 0.7, -0.8]));
        let sfi = find(&cat, "SFI").transform.apply(&t);
        assert_eq!(sfi, ContinuousTransition::new(vec![-0.1, -0.2, 0.3, -0.4], 0, t.s_next.clone()));
        let ti = find(&cat, "TI").transform.apply(&t);
        assert_eq!(ti.s[cp::X], 0.1 + 0.3);
        assert_eq!(ti.s_next[cp::X], 0.5 + 0.3);
        assert_eq!(&ti.s[1..], &t.s[1..]);
    }

    #[test]
    fn acrobot_rows_of_table() {
        let cat = acrobot_catalog();
        let t = ContinuousTransition::new(
            vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
            0,
            vec![-0.1, -0.2, -0.3, -0.4, -0.5, -0.6],
        );
        let aavi = find(&cat, "AAVI").transform.apply(&t);
        assert_eq!(aavi.s, vec![-0.1, 0.2, -0.3, 0.4, -0.5, -0.6]);
        assert_eq!(aavi.s_next, vec![0.1, -0.2, 0.3, -0.4, 0.5, 0.6]);
        assert_eq!(aavi.a, 2);
        let cavi = find(&cat, "CAVI").transform.apply(&t);
        assert_eq!(cavi.s, vec![0.1, -0.2, 0.3, -0.4, -0.5, -0.6]);
        assert_eq!(find(&cat, "AI").transform.apply(&t).a, 2);
        let zero = ContinuousTransition::new(t.s.clone(), 1, t.s_next.clone());
        assert_eq!(find(&cat, "AI").transform.apply(&zero).a, 1);
        let ssi = find(&cat, "SSI").transform.apply(&t);
        assert_eq!(ssi.s, vec![-0.1, -0.2, -0.3, -0.4, -0.5, -0.6]);
        assert_eq!(ssi.s_next, t.s_next);
    }
}
