/// Falling-edge detection: index `i + 1` is reported whenever `s[i] > c` and
/// `s[i + 1] <= c`. An excursion still above `c` at the end is not reported.
pub fn detect_change_points(scores: &[f64], c: f64) -> Vec<usize> {
    scores
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] > c && w[1] <= c)
        .map(|(i, _)| i + 1)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn falling_edges() {
        assert_eq!(detect_change_points(&[0.1, 0.6, 0.7, 0.2], 0.5), vec![3]);
        assert_eq!(detect_change_points(&[0.6, 0.2, 0.6], 0.5), vec![1]);
        assert!(detect_change_points(&[0.1, 0.5, 0.2], 0.5).is_empty());
        assert!(detect_change_points(&[], 0.5).is_empty());
        assert!(detect_change_points(&[0.9], 0.5).is_empty());
    }

    proptest! {
        #[test]
        fn points_increasing_and_interior(s in prop::collection::vec(0.0f64..1.0, 0..80), c in 0.0f64..1.0) {
            let p = detect_change_points(&s, c);
            prop_assert!(p.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(p.iter().all(|&i| i >= 1 && i + 1 <= s.len()));
        }
    }
}
