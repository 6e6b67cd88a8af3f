use crate::attacks::Perturbation;

/// Rotates the I and Q rows of `p` together by `k` samples along time:
/// the value at time `t` moves to `(t + k) mod len`.
pub fn circular_shift(p: &Perturbation, k: i64) -> Perturbation {
    let values = p.values();
    let len = values.len() / 2;
    if len == 0 {
        return p.clone();
    }
    let k = k.rem_euclid(len as i64) as usize;
    let mut out = values.to_vec();
    for row in out.chunks_mut(len) {
        row.rotate_right(k);
    }
    Perturbation::from_parts(out, p.budget())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> Perturbation {
        let v: Vec<f32> = (0..256).map(|i| i as f32 / 256.0).collect();
        let b = crate::attacks::l2(&v);
        Perturbation::new(v, b).unwrap()
    }

    #[test]
    fn identity_cases() {
        let p = ramp();
        assert_eq!(circular_shift(&p, 0), p);
        assert_eq!(circular_shift(&p, 128), p);
        assert_eq!(circular_shift(&p, -256), p);
    }

    #[test]
    fn rows_move_separately() {
        let s = circular_shift(&ramp(), 1);
        assert_eq!(s.values()[1], 0.0);
        assert_eq!(s.values()[0], 127.0 / 256.0);
        assert_eq!(s.values()[128], 255.0 / 256.0);
        assert_eq!(s.values()[129], 128.0 / 256.0);
    }

    #[test]
    fn composition() {
        let p = ramp();
        assert_eq!(circular_shift(&circular_shift(&p, 100), 60), circular_shift(&p, 32));
    }
}
