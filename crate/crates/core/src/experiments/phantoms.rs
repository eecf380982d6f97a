use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Signal};

/// Uniform ranges for the spot phantom, in unit-square coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpotRanges {
    pub radius_min: f64,
    pub radius_max: f64,
    pub intensity_min: f64,
    pub intensity_max: f64,
    /// Minimum free gap between two disks and between a disk and the border.
    pub gap: f64,
}

impl Default for SpotRanges {
    fn default() -> Self {
        Self {
            radius_min: 0.008,
            radius_max: 0.012,
            intensity_min: 0.8,
            intensity_max: 1.0,
            gap: 0.02,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Disk {
    pub center: (f64, f64),
    pub radius: f64,
    pub intensity: f64,
}

impl Disk {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (x - self.center.0).powi(2) + (y - self.center.1).powi(2) <= self.radius * self.radius
    }
}

const PLACEMENT_TRIES: usize = 10_000;

/// Random non-overlapping disks by rejection sampling.
pub fn place_spots(n_spots: usize, ranges: &SpotRanges, seed: u64) -> Result<Vec<Disk>> {
    let r = ranges;
    if !(0.0 < r.radius_min && r.radius_min <= r.radius_max && r.intensity_min <= r.intensity_max && r.gap >= 0.0) {
        return Err(Error::InvalidParameter(format!("invalid spot ranges {r:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut disks: Vec<Disk> = Vec::with_capacity(n_spots);
    let mut tries = 0;
    while disks.len() < n_spots {
        if tries == PLACEMENT_TRIES {
            return Err(Error::PhantomPlacement {
                requested: n_spots,
                placed: disks.len(),
            });
        }
        tries += 1;
        let radius = rng.random_range(r.radius_min..=r.radius_max);
        let lo = radius + r.gap;
        if 2.0 * lo >= 1.0 {
            continue;
        }
        let center = (rng.random_range(lo..1.0 - lo), rng.random_range(lo..1.0 - lo));
        let free = disks.iter().all(|d| {
            let dist = ((d.center.0 - center.0).powi(2) + (d.center.1 - center.1).powi(2)).sqrt();
            dist > d.radius + radius + r.gap
        });
        if free {
            let intensity = rng.random_range(r.intensity_min..=r.intensity_max);
            disks.push(Disk {
                center,
                radius,
                intensity,
            });
        }
    }
    Ok(disks)
}

/// Constant-intensity disks evaluated at cell centers.
pub fn rasterize_disks(grid: Grid, disks: &[Disk]) -> Result<Signal> {
    Signal::from_fn(grid, |x, y| disks.iter().find(|d| d.contains(x, y)).map_or(0.0, |d| d.intensity))
}

pub fn build_spots_phantom(grid: Grid, n_spots: usize, seed: u64) -> Result<Signal> {
    build_spots_phantom_with(grid, n_spots, &SpotRanges::default(), seed)
}

pub fn build_spots_phantom_with(grid: Grid, n_spots: usize, ranges: &SpotRanges, seed: u64) -> Result<Signal> {
    if grid.dim() != 2 {
        return Err(Error::InvalidGrid("spot phantom needs a 2D grid".into()));
    }
    rasterize_disks(grid, &place_spots(n_spots, ranges, seed)?)
}

/// Indicator of `[1/3, 2/3]` at cell centers of a 1D grid on `[0, 1]`.
pub fn build_indicator_1d(grid: Grid) -> Result<Signal> {
    if grid.dim() != 1 {
        return Err(Error::InvalidGrid("indicator phantom needs a 1D grid".into()));
    }
    Signal::from_fn(grid, |x, _| if (1.0 / 3.0..=2.0 / 3.0).contains(&x) { 1.0 } else { 0.0 })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SheppLoganTable {
    /// The original intensities (skull 1, brain 0.02, features ±0.01–0.02).
    #[default]
    Standard,
    /// The higher-contrast variant (brain 0.2, features 0.1–0.3).
    Modified,
}

// (intensity, semi-axis a, semi-axis b, x0, y0, rotation in degrees)
const SHEPP_LOGAN: [(f64, f64, f64, f64, f64, f64); 10] = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.98, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.02, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.02, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.01, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.01, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.01, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.01, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.01, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.01, 0.023, 0.046, 0.06, -0.605, 0.0),
];
const MODIFIED_INTENSITIES: [f64; 10] = [1.0, -0.8, -0.2, -0.2, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1];

/// Ten-ellipse Shepp-Logan phantom on `[-1, 1]²` mapped onto the unit square
/// (row 0 at the top), composed additively and clamped to `[0, 1]`.
pub fn build_shepp_logan(grid: Grid, table: SheppLoganTable) -> Result<Signal> {
    if grid.dim() != 2 || !grid.is_square() {
        return Err(Error::InvalidGrid("Shepp-Logan phantom needs a square 2D grid".into()));
    }
    let [ex, ey] = grid.extent();
    Signal::from_fn(grid, |x, y| {
        let (px, py) = (2.0 * x / ex - 1.0, 1.0 - 2.0 * y / ey);
        let mut v = 0.0;
        for (k, &(a0, a, b, x0, y0, deg)) in SHEPP_LOGAN.iter().enumerate() {
            let (s, c) = deg.to_radians().sin_cos();
            let (dx, dy) = (px - x0, py - y0);
            let (xr, yr) = (dx * c + dy * s, -dx * s + dy * c);
            if (xr / a).powi(2) + (yr / b).powi(2) <= 1.0 {
                v += match table {
                    SheppLoganTable::Standard => a0,
                    SheppLoganTable::Modified => MODIFIED_INTENSITIES[k],
                };
            }
        }
        v.clamp(0.0, 1.0)
    })
}
