//! Codebooks, exhaustive beam training and neighbourhood beam tracking.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{beam_vector, ArrayGeometry, Direction};

#[derive(Debug, Error, PartialEq)]
pub enum BeamformingError {
    #[error("empty angle range [{lo}, {hi}]")]
    EmptyRange { lo: f64, hi: f64 },
    #[error("resolution must be positive, got {0}")]
    Resolution(f64),
    #[error("invalid neighbourhood: {0}")]
    Neighborhood(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Beam {
    pub direction: Direction,
    /// Unit-norm weights.
    pub weights: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub beams: Vec<Beam>,
    pub resolution: f64,
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }
}

/// Sector and grid step used to build a codebook.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodebookConfig {
    pub azimuth: [f64; 2],
    pub elevation: [f64; 2],
    pub resolution: f64,
}

impl Default for CodebookConfig {
    fn default() -> Self {
        Self { azimuth: [-80.0, 80.0], elevation: [-45.0, 10.0], resolution: 5.0 }
    }
}

fn grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>, BeamformingError> {
    if !(hi >= lo) {
        return Err(BeamformingError::EmptyRange { lo, hi });
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|k| lo + k as f64 * step).collect())
}

/// Grid of steering beams, azimuth-major: index = `i_az * n_el + i_el`.
pub fn build_codebook(geom: &ArrayGeometry, cfg: &CodebookConfig) -> Result<Codebook, BeamformingError> {
    if !(cfg.resolution > 0.0) {
        return Err(BeamformingError::Resolution(cfg.resolution));
    }
    let az = grid(cfg.azimuth[0], cfg.azimuth[1], cfg.resolution)?;
    let el = grid(cfg.elevation[0], cfg.elevation[1], cfg.resolution)?;
    let beams = az
        .iter()
        .flat_map(|&a| el.iter().map(move |&e| Direction::new(a, e)))
        .map(|direction| Beam { direction, weights: beam_vector(direction, geom) })
        .collect();
    Ok(Codebook { beams, resolution: cfg.resolution })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingResult {
    pub index: usize,
    pub direction: Direction,
    pub snr_db: f64,
    /// Training overhead, a fixed third of the slot.
    pub tau_b: f64,
}

/// Overhead of a full codebook sweep.
pub fn handover_training_duration(slot_duration: f64) -> f64 {
    slot_duration / 3.0
}

/// Measure every beam and keep the best; ties go to the lowest index.
pub fn initial_beam_training<F>(codebook: &Codebook, slot_duration: f64, mut measure: F) -> TrainingResult
where
    F: FnMut(&Beam) -> f64,
{
    assert!(!codebook.is_empty(), "codebook must be non-empty");
    let mut best = (0, f64::NEG_INFINITY);
    for (i, beam) in codebook.beams.iter().enumerate() {
        let s = measure(beam);
        if s > best.1 {
            best = (i, s);
        }
    }
    TrainingResult {
        index: best.0,
        direction: codebook.beams[best.0].direction,
        snr_db: best.1,
        tau_b: handover_training_duration(slot_duration),
    }
}

/// Neighbourhood size and measurement resolution around the main direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeighborhoodSpec {
    pub max_dev_azimuth: f64,
    pub max_dev_elevation: f64,
    pub res_azimuth: f64,
    pub res_elevation: f64,
}

impl Default for NeighborhoodSpec {
    fn default() -> Self {
        Self { max_dev_azimuth: 10.0, max_dev_elevation: 10.0, res_azimuth: 5.0, res_elevation: 5.0 }
    }
}

impl NeighborhoodSpec {
    pub fn validate(&self) -> Result<(), BeamformingError> {
        if !(self.max_dev_azimuth >= 0.0 && self.max_dev_elevation >= 0.0) {
            return Err(BeamformingError::Neighborhood("deviations must be non-negative".into()));
        }
        if !(self.res_azimuth > 0.0 && self.res_elevation > 0.0) {
            return Err(BeamformingError::Neighborhood("resolutions must be positive".into()));
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        let (na, ne) = self.half_counts();
        (2 * na + 1) * (2 * ne + 1)
    }

    fn half_counts(&self) -> (usize, usize) {
        (
            (self.max_dev_azimuth / self.res_azimuth + 1e-9).floor() as usize,
            (self.max_dev_elevation / self.res_elevation + 1e-9).floor() as usize,
        )
    }
}

fn axis_offsets(half: usize, step: f64) -> impl Iterator<Item = f64> {
    let h = half as i64;
    (-h..=h).map(move |i| i as f64 * step)
}

/// Offsets `{(i δφ, j δθ)}` for `|i| ≤ ⌊Δφ/δφ⌋`, `|j| ≤ ⌊Δθ/δθ⌋`, azimuth-major.
pub fn neighborhood(spec: &NeighborhoodSpec) -> Vec<(f64, f64)> {
    let (na, ne) = spec.half_counts();
    axis_offsets(na, spec.res_azimuth)
        .flat_map(|a| axis_offsets(ne, spec.res_elevation).map(move |e| (a, e)))
        .collect()
}

/// Neighbourhood directions around `main`, nearest first; equal distances
/// are ordered by azimuth then elevation.
pub fn sorted_neighborhood(main: Direction, spec: &NeighborhoodSpec) -> Vec<Direction> {
    let mut offsets = neighborhood(spec);
    offsets.sort_by(|a, b| {
        let da = a.0 * a.0 + a.1 * a.1;
        let db = b.0 * b.0 + b.1 * b.1;
        da.total_cmp(&db).then(a.0.total_cmp(&b.0)).then(a.1.total_cmp(&b.1))
    });
    offsets.into_iter().map(|(a, e)| main.offset(a, e)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingResult {
    pub direction: Direction,
    pub snr_db: f64,
    /// Beams measured.
    pub cnt: usize,
    pub tau_b: f64,
    pub met_threshold: bool,
}

/// Sweep `sorted` in order and stop at the first direction reaching
/// `snr_threshold_db`. If none does, every direction is measured and the
/// strongest (first on ties) is returned unflagged.
pub fn track_beam<F>(sorted: &[Direction], snr_threshold_db: f64, beta: f64, mut measure: F) -> TrackingResult
where
    F: FnMut(Direction) -> f64,
{
    assert!(!sorted.is_empty(), "tracking set must be non-empty");
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &d) in sorted.iter().enumerate() {
        let s = measure(d);
        if s >= snr_threshold_db {
            let cnt = i + 1;
            return TrackingResult { direction: d, snr_db: s, cnt, tau_b: beta * cnt as f64, met_threshold: true };
        }
        if s > best.1 {
            best = (i, s);
        }
    }
    let cnt = sorted.len();
    TrackingResult {
        direction: sorted[best.0],
        snr_db: best.1,
        cnt,
        tau_b: beta * cnt as f64,
        met_threshold: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{assemble_channel, snr_db, LinkBudget, Path};
    use proptest::prelude::*;

    const G: ArrayGeometry = ArrayGeometry { rows: 8, cols: 8, spacing: 0.5 };
    const BETA: f64 = 10e-6;

    #[test]
    fn codebook_grid_count() {
        let cb = build_codebook(
            &G,
            &CodebookConfig { azimuth: [-60.0, 60.0], elevation: [-20.0, 20.0], resolution: 5.0 },
        )
        .unwrap();
        assert_eq!(cb.len(), 225);
        for b in &cb.beams {
            let n: f64 = b.weights.iter().map(|x| x.norm_sqr()).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
        assert_eq!(cb.beams[0].direction, Direction::new(-60.0, -20.0));
        assert_eq!(cb.beams[1].direction, Direction::new(-60.0, -15.0));
        assert_eq!(cb, build_codebook(&G, &CodebookConfig { azimuth: [-60.0, 60.0], elevation: [-20.0, 20.0], resolution: 5.0 }).unwrap());
    }

    #[test]
    fn coarse_resolution_gives_single_beam() {
        let cb = build_codebook(&G, &CodebookConfig { azimuth: [-10.0, 10.0], elevation: [0.0, 0.0], resolution: 45.0 }).unwrap();
        assert_eq!(cb.len(), 1);
    }

    #[test]
    fn codebook_errors() {
        assert!(build_codebook(&G, &CodebookConfig { resolution: 0.0, ..Default::default() }).is_err());
        assert!(build_codebook(&G, &CodebookConfig { azimuth: [10.0, -10.0], ..Default::default() }).is_err());
    }

    #[test]
    fn training_single_beam_codebook() {
        let cb = build_codebook(&G, &CodebookConfig { azimuth: [0.0, 0.0], elevation: [0.0, 0.0], resolution: 1.0 }).unwrap();
        let r = initial_beam_training(&cb, 10e-3, |_| -5.0);
        assert_eq!(r.index, 0);
        assert!((r.tau_b - 10e-3 / 3.0).abs() < 1e-18);
    }

    #[test]
    fn training_ties_pick_index_zero() {
        let cb = build_codebook(&G, &CodebookConfig::default()).unwrap();
        assert_eq!(initial_beam_training(&cb, 10e-3, |_| 3.0).index, 0);
    }

    #[test]
    fn training_finds_on_grid_path() {
        let cfg = CodebookConfig { azimuth: [-60.0, 60.0], elevation: [-20.0, 20.0], resolution: 5.0 };
        let cb = build_codebook(&G, &cfg).unwrap();
        let budget = LinkBudget::default();
        for aod in [Direction::new(25.0, -10.0), Direction::new(-60.0, 20.0), Direction::new(0.0, 0.0)] {
            let h = assemble_channel(&[Path::from_loss_db(90.0, aod)], &G).unwrap();
            let r = initial_beam_training(&cb, 10e-3, |b| snr_db(&h, &b.weights, &budget));
            // oracle: brute-force argmax of |hᴴf|²
            let oracle = cb
                .beams
                .iter()
                .enumerate()
                .fold((0, -1.0), |acc, (i, b)| {
                    let p = h.project(&b.weights).norm_sqr();
                    if p > acc.1 { (i, p) } else { acc }
                })
                .0;
            assert_eq!(r.index, oracle);
            assert_eq!(r.direction, aod);
        }
    }

    #[test]
    fn azimuth_neighborhood_values() {
        let spec = NeighborhoodSpec { max_dev_azimuth: 10.0, max_dev_elevation: 0.0, res_azimuth: 5.0, res_elevation: 5.0 };
        let az: Vec<f64> = neighborhood(&spec).iter().map(|o| o.0).collect();
        assert_eq!(az, vec![-10.0, -5.0, 0.0, 5.0, 10.0]);
    }

    #[test]
    fn default_neighborhood_has_25_offsets() {
        let spec = NeighborhoodSpec::default();
        assert_eq!(neighborhood(&spec).len(), 25);
        assert_eq!(spec.size(), 25);
    }

    #[test]
    fn degenerate_neighborhood() {
        let spec = NeighborhoodSpec { max_dev_azimuth: 0.0, max_dev_elevation: 0.0, res_azimuth: 5.0, res_elevation: 5.0 };
        assert_eq!(neighborhood(&spec), vec![(0.0, 0.0)]);
    }

    #[test]
    fn sorted_neighborhood_tiers() {
        let main = Direction::new(30.0, 0.0);
        let t = sorted_neighborhood(main, &NeighborhoodSpec::default());
        assert_eq!(t.len(), 25);
        assert_eq!(t[0], main);
        assert_eq!(
            &t[1..5],
            &[
                Direction::new(25.0, 0.0),
                Direction::new(30.0, -5.0),
                Direction::new(30.0, 5.0),
                Direction::new(35.0, 0.0)
            ]
        );
        // distances never decrease
        for w in t.windows(2) {
            assert!(w[0].distance(main) <= w[1].distance(main));
        }
        // permutation of main + N
        let mut expected: Vec<Direction> =
            neighborhood(&NeighborhoodSpec::default()).iter().map(|o| main.offset(o.0, o.1)).collect();
        let key = |d: &Direction| (d.azimuth as i64, d.elevation as i64);
        expected.sort_by_key(key);
        let mut got = t.clone();
        got.sort_by_key(key);
        assert_eq!(got, expected);
    }

    #[test]
    fn sort_oracle_distance_five_before_corners() {
        let main = Direction::new(30.0, 0.0);
        let t = sorted_neighborhood(main, &NeighborhoodSpec::default());
        let first_corner = t.iter().position(|d| (d.distance(main) - 50f64.sqrt()).abs() < 1e-9).unwrap();
        let last_five = t.iter().rposition(|d| (d.distance(main) - 5.0).abs() < 1e-9).unwrap();
        assert!(last_five < first_corner);
    }

    #[test]
    fn tracking_stops_at_main_direction() {
        let t = sorted_neighborhood(Direction::new(0.0, 0.0), &NeighborhoodSpec::default());
        let r = track_beam(&t, 2.0, BETA, |_| 10.0);
        assert_eq!(r.cnt, 1);
        assert!(r.met_threshold);
        assert!((r.tau_b - 10e-6).abs() < 1e-18);
    }

    #[test]
    fn tracking_meets_threshold_at_seventh() {
        let t = sorted_neighborhood(Direction::new(0.0, 0.0), &NeighborhoodSpec::default());
        let target = t[6];
        let r = track_beam(&t, 2.0, BETA, |d| if d == target { 5.0 } else { -3.0 });
        assert_eq!(r.cnt, 7);
        assert_eq!(r.direction, target);
        assert!((r.tau_b - 70e-6).abs() < 1e-15);
    }

    #[test]
    fn tracking_without_qualifier_measures_all() {
        let t = sorted_neighborhood(Direction::new(0.0, 0.0), &NeighborhoodSpec::default());
        // strongest at index 13, nothing reaches 2 dB
        let snr: Vec<f64> = (0..25).map(|i| if i == 13 { 1.5 } else { -10.0 + i as f64 * 0.1 }).collect();
        let r = track_beam(&t, 2.0, BETA, |d| snr[t.iter().position(|x| *x == d).unwrap()]);
        assert_eq!(r.cnt, 25);
        assert!(!r.met_threshold);
        assert_eq!(r.direction, t[13]);
        assert!((r.tau_b - 250e-6).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn neighborhood_is_symmetric(da in 0.0..30.0f64, de in 0.0..30.0f64, ra in 0.5..10.0f64, re in 0.5..10.0f64) {
            let spec = NeighborhoodSpec { max_dev_azimuth: da, max_dev_elevation: de, res_azimuth: ra, res_elevation: re };
            let n = neighborhood(&spec);
            for &(a, e) in &n {
                prop_assert!(n.iter().any(|&(b, f)| b == -a && f == -e));
            }
        }

        #[test]
        fn lowering_threshold_never_increases_cnt(snr in proptest::collection::vec(-20.0..20.0f64, 25), hi in -10.0..15.0f64, drop in 0.0..10.0f64) {
            let t = sorted_neighborhood(Direction::new(0.0, 0.0), &NeighborhoodSpec::default());
            let m = |d: Direction| snr[t.iter().position(|x| *x == d).unwrap()];
            let a = track_beam(&t, hi, BETA, m);
            let b = track_beam(&t, hi - drop, BETA, m);
            prop_assert!(b.cnt <= a.cnt);
        }
    }
}
