use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::signals::Track;

/// Splits every track at Poisson cut times (`rate` per minute).
///
/// Segments keep the label and are named `{id}/{k}`; segments with fewer
/// than 2 samples are dropped. Rate 0 returns the tracks unchanged.
pub fn fragment_tracks(tracks: &[Track<f64>], rate: f64, seed: u64) -> Vec<Track<f64>> {
    if rate <= 0.0 {
        return tracks.to_vec();
    }
    let gap = Exp::new(rate / 60.0).expect("positive rate");
    let mut out = Vec::new();
    for (n, track) in tracks.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(n as u64);
        let (start, end) = (track.start_t(), track.end_t());
        let mut cuts = Vec::new();
        let mut t = start + gap.sample(&mut rng);
        while t < end {
            cuts.push(t);
            t += gap.sample(&mut rng);
        }
        let mut segment = Vec::new();
        let mut k = 0;
        let mut next_cut = cuts.iter().copied().peekable();
        let mut flush = |segment: &mut Vec<_>, k: &mut usize| {
            if segment.len() >= 2 {
                out.push(Track {
                    track_id: format!("{}/{}", track.track_id, k),
                    samples: std::mem::take(segment),
                    label: track.label.clone(),
                });
                *k += 1;
            } else {
                segment.clear();
            }
        };
        for s in &track.samples {
            while next_cut.peek().is_some_and(|&c| s.t >= c) {
                next_cut.next();
                flush(&mut segment, &mut k);
            }
            segment.push(*s);
        }
        flush(&mut segment, &mut k);
    }
    out
}
