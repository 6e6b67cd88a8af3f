//! Bisection attack against the brute-force oracle on 2-D toys.

use rfadv::attacks::{craft_adversarial_bisection, oracle_min_along_direction, oracle_min_perturbation, Classifier};

use super::toys::{points, random_planar, Radial};

pub const EPS_ACC: f64 = 1e-3;
pub const GRID_STEP: f64 = 5e-3;
pub const RAY_STEP: f64 = 1e-4;
pub const P_MAX: f64 = 1.5;
pub const RAY_REL_TOL: f64 = 0.10;

#[derive(Debug, Default, Clone, Copy)]
pub struct Summary {
    pub points: usize,
    pub fooled: usize,
    /// Largest `oracle - grid_step - eps*` (must stay <= 0).
    pub worst_below_oracle: f64,
    /// Largest `|eps* - ray| / ray` along the chosen direction.
    pub worst_ray_rel: f64,
    /// Largest final bracket width.
    pub max_bracket: f64,
    /// Fooled outcomes whose label did not actually change.
    pub false_fools: usize,
}

fn check_one<C: Classifier>(model: &C, x: &[f32], s: &mut Summary) {
    let l = model.predict_one(x).unwrap();
    let out = craft_adversarial_bisection(model, x, l, EPS_ACC, P_MAX).unwrap();
    let oracle = oracle_min_perturbation(model, x, l, GRID_STEP, P_MAX).unwrap();
    s.points += 1;
    s.worst_below_oracle = s.worst_below_oracle.max(oracle - GRID_STEP - out.epsilon_star);
    if let Some(w) = out.bracket_width {
        s.max_bracket = s.max_bracket.max(w);
    }
    if out.fooled {
        s.fooled += 1;
        let adv = out.perturbation.apply(x);
        if model.predict_one(&adv).unwrap() == l {
            s.false_fools += 1;
        }
        let dir: Vec<f64> = out.perturbation.values().iter().map(|&v| v as f64).collect();
        let ray = oracle_min_along_direction(model, x, l, &dir, RAY_STEP, P_MAX).unwrap();
        s.worst_ray_rel = s.worst_ray_rel.max((out.epsilon_star - ray).abs() / ray);
    }
}

/// Three random planar three-class toys and the radial toy, 8 points each.
pub fn run() -> Summary {
    let mut s = Summary::default();
    for seed in 0..3 {
        let m = random_planar(3, 40 + seed);
        for p in points(8, 1.0, 70 + seed) {
            check_one(&m, &p, &mut s);
        }
    }
    let radial = Radial { r: 1.0 };
    // Keep points off the circle by at least 0.1 so every distance is measurable.
    let mut k = 0;
    for p in points(64, 1.4, 99) {
        let n = ((p[0] * p[0] + p[1] * p[1]) as f64).sqrt();
        if (n - 1.0).abs() >= 0.1 && n > 0.1 && k < 8 {
            check_one(&radial, &p, &mut s);
            k += 1;
        }
    }
    s
}

impl Summary {
    pub fn passes(&self) -> bool {
        self.points >= 8
            && self.worst_below_oracle <= 0.0
            && self.worst_ray_rel <= RAY_REL_TOL
            && self.max_bracket <= EPS_ACC
            && self.false_fools == 0
    }
}
