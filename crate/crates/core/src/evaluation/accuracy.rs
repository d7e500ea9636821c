/// Mean over pairs of the fraction of positions (out of the longer of the
/// two sequences) where hypothesis and reference agree.
pub fn token_accuracy<W: PartialEq>(hypotheses: &[Vec<W>], references: &[Vec<W>]) -> f64 {
    let n = hypotheses.len().min(references.len());
    if n == 0 {
        return 0.0;
    }
    let total: f64 = hypotheses
        .iter()
        .zip(references)
        .map(|(h, r)| {
            let len = h.len().max(r.len());
            if len == 0 {
                1.0
            } else {
                h.iter().zip(r).filter(|(a, b)| a == b).count() as f64 / len as f64
            }
        })
        .sum();
    total / n as f64
}
