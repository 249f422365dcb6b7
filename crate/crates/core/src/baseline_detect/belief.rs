use rand::seq::IndexedRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::system_model::detect_change_points;

/// Two-sided CUSUM on step-to-step changes of `p`. A flag is raised when
/// either cumulative statistic exceeds `threshold`; both reset on a flag.
pub fn cusum_detect(p: &[f64], drift: f64, threshold: f64) -> Vec<bool> {
    let mut flags = vec![false; p.len()];
    let (mut up, mut down) = (0.0f64, 0.0f64);
    for t in 1..p.len() {
        let change = p[t] - p[t - 1];
        up = (up + change - drift).max(0.0);
        down = (down - change - drift).max(0.0);
        if up > threshold || down > threshold {
            flags[t] = true;
            up = 0.0;
            down = 0.0;
        }
    }
    flags
}

/// Each agent averages its belief with one uniformly drawn neighbor (using
/// the previous beliefs), then mixes in its binary change flag. Isolated
/// agents skip the averaging.
pub fn collaborate<R: Rng + ?Sized>(beliefs: &[f64], flags: &[bool], neighbors: &[Vec<usize>], mix: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&mix) {
        return Err(Error::Config(format!("mix {mix} outside [0, 1]")));
    }
    if beliefs.len() != flags.len() || beliefs.len() != neighbors.len() {
        return Err(Error::InputShape("beliefs, flags and neighborhoods differ in length".into()));
    }
    Ok(neighbors
        .iter()
        .enumerate()
        .map(|(j, nb)| {
            let avg = match nb.choose(rng) {
                Some(&i) => 0.5 * (beliefs[j] + beliefs[i]),
                None => beliefs[j],
            };
            let flag = if flags[j] { 1.0 } else { 0.0 };
            ((1.0 - mix) * avg + mix * flag).clamp(0.0, 1.0)
        })
        .collect())
}

/// Flags steps whose count exceeds the trailing-window mean plus `z`
/// standard deviations, then reports each run of flags the way
/// [`detect_change_points`] reports an excursion: at the first step after it.
pub fn detect_global_baseline(counts: &[f64], window: usize, z: f64) -> Vec<usize> {
    let flags: Vec<f64> = (0..counts.len())
        .map(|t| {
            let lo = t.saturating_sub(window);
            let past = &counts[lo..t];
            if past.len() < 2 {
                return 0.0;
            }
            let n = past.len() as f64;
            let mean = past.iter().sum::<f64>() / n;
            let sd = (past.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n).sqrt();
            if counts[t] > mean + z * sd {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    detect_change_points(&flags, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cusum_examples() {
        assert!(!cusum_detect(&[0.4; 100], 0.05, 0.5).iter().any(|&f| f));
        let step: Vec<f64> = (0..100).map(|t| if t < 50 { 0.9 } else { 0.1 }).collect();
        let flags = cusum_detect(&step, 0.05, 0.5);
        let hits: Vec<usize> = flags.iter().enumerate().filter(|(_, &f)| f).map(|(t, _)| t).collect();
        assert_eq!(hits, vec![50]);
        assert!(!cusum_detect(&step, 0.05, f64::INFINITY).iter().any(|&f| f));
    }

    #[test]
    fn collaborate_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let nb = vec![vec![1], vec![0]];
        let out = collaborate(&[0.2, 0.6], &[false, false], &nb, 0.0, &mut rng).unwrap();
        assert!((out[0] - 0.4).abs() < 1e-15 && (out[1] - 0.4).abs() < 1e-15);
        let out = collaborate(&[0.2, 0.6], &[true, false], &nb, 1.0, &mut rng).unwrap();
        assert_eq!(out, vec![1.0, 0.0]);
        let out = collaborate(&[0.4], &[true], &[vec![]], 0.05, &mut rng).unwrap();
        assert!((out[0] - 0.43).abs() < 1e-15);
        assert!(collaborate(&[0.4], &[true], &[vec![]], 2.0, &mut rng).is_err());
    }

    #[test]
    fn global_examples() {
        assert!(detect_global_baseline(&[4.0; 40], 10, 3.0).is_empty());
        let mut c: Vec<f64> = (0..40).map(|t| 5.0 + if t % 2 == 0 { 1.0 } else { -1.0 }).collect();
        c[25] = 15.0;
        assert_eq!(detect_global_baseline(&c, 10, 3.0), vec![26]);
        assert!(detect_global_baseline(&c, 10, f64::INFINITY).is_empty());
    }

    proptest! {
        #[test]
        fn beliefs_stay_in_unit_range(
            b in prop::collection::vec(0.0f64..=1.0, 6),
            flags in prop::collection::vec(any::<bool>(), 6),
            mix in 0.0f64..=1.0,
            rounds in 1usize..20,
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let nb: Vec<Vec<usize>> = (0..6).map(|j| vec![(j + 1) % 6, (j + 5) % 6]).collect();
            let mut b = b;
            for _ in 0..rounds {
                b = collaborate(&b, &flags, &nb, mix, &mut rng).unwrap();
                prop_assert!(b.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }
}
