use super::TrainConfig;

/// Step decay: `lr0 · decay_factor^⌊epoch / decay_every⌋`.
pub fn lr_at(epoch: usize, cfg: &TrainConfig) -> f64 {
    let k = (epoch / cfg.decay_every) as i32;
    cfg.lr0 * cfg.decay_factor.powi(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_increasing() {
        let cfg = TrainConfig::default();
        for e in 0..200 {
            assert!(lr_at(e + 1, &cfg) <= lr_at(e, &cfg));
        }
        for e in 0..4 {
            assert_eq!(lr_at(e, &cfg), 0.001);
        }
    }

    #[test]
    fn literal_table_factor() {
        let cfg = TrainConfig {
            decay_factor: 0.1,
            ..TrainConfig::default()
        };
        assert!((lr_at(4, &cfg) - 1e-4).abs() < 1e-18);
    }
}
