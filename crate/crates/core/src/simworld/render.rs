use super::terrain::{TerrainClass, TerrainSpec};
use crate::noise::unit_noise;
use crate::util::derive_seed;

pub const IMAGE_SIZE: usize = 64;
pub const IMAGE_CHANNELS: usize = 3;
pub const OBSERVATION_LEN: usize = IMAGE_SIZE * IMAGE_SIZE * IMAGE_CHANNELS;

/// Ground area covered by one observation, meters (ahead x lateral).
const VIEW_LENGTH: f64 = 2.0;
const VIEW_WIDTH: f64 = 2.0;
/// Height that maps to a full half-range excursion of the height channel.
const HEIGHT_RANGE: f64 = 0.1;

/// A 64x64x3 terrain observation in row-major HWC layout, values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub data: Vec<f32>,
}

impl Observation {
    pub fn zeros() -> Self {
        Observation {
            data: vec![0.0; OBSERVATION_LEN],
        }
    }

    pub fn from_vec(data: Vec<f32>) -> crate::Result<Self> {
        if data.len() != OBSERVATION_LEN {
            return Err(crate::Error::invalid(format!(
                "observation must have {OBSERVATION_LEN} values, got {}",
                data.len()
            )));
        }
        Ok(Observation { data })
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> f32 {
        self.data[(row * IMAGE_SIZE + col) * IMAGE_CHANNELS + channel]
    }
}

struct Texture {
    level: f64,
    contrast: f64,
    frequency: f64,
    tint: f64,
}

fn texture(class: TerrainClass) -> Texture {
    match class {
        TerrainClass::Concrete => Texture {
            level: 0.60,
            contrast: 0.05,
            frequency: 3.0,
            tint: 0.75,
        },
        TerrainClass::Grass => Texture {
            level: 0.40,
            contrast: 0.20,
            frequency: 12.0,
            tint: 0.25,
        },
        TerrainClass::Gravel => Texture {
            level: 0.50,
            contrast: 0.30,
            frequency: 25.0,
            tint: 0.55,
        },
        TerrainClass::PebbleSidewalk => Texture {
            level: 0.55,
            contrast: 0.20,
            frequency: 8.0,
            tint: 0.40,
        },
    }
}

/// Renders the ground patch ahead of the robot at `position` meters along the path.
///
/// Channel 0 is the local heightmap (0.5 = flat), channel 1 a class texture
/// drawn from seeded value noise, channel 2 a constant class tint. Row 0 is
/// the far edge of the view.
pub fn render_observation(terrain: &TerrainSpec, position: f64) -> Observation {
    let tex = texture(terrain.terrain_class);
    let tex_seed = derive_seed(terrain.visual_seed, 0x7E47 + terrain.terrain_class.index());
    let cell_along = VIEW_LENGTH / IMAGE_SIZE as f64;
    let cell_lateral = VIEW_WIDTH / IMAGE_SIZE as f64;
    let mut data = Vec::with_capacity(OBSERVATION_LEN);
    for row in 0..IMAGE_SIZE {
        let along = position + (IMAGE_SIZE - 1 - row) as f64 * cell_along;
        for col in 0..IMAGE_SIZE {
            let lateral = (col as f64 - (IMAGE_SIZE as f64 - 1.0) / 2.0) * cell_lateral;
            let height = terrain.height_at(along, lateral);
            let h = (0.5 + 0.5 * height / HEIGHT_RANGE).clamp(0.0, 1.0);
            let t = (tex.level
                + tex.contrast
                    * unit_noise(tex_seed, along * tex.frequency, lateral * tex.frequency))
            .clamp(0.0, 1.0);
            data.push(h as f32);
            data.push(t as f32);
            data.push(tex.tint as f32);
        }
    }
    Observation { data }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simworld::make_terrain;

    #[test]
    fn zero_roughness_gives_flat_height_channel() {
        let mut t = make_terrain(TerrainClass::Grass, 3);
        t.roughness = 0.0;
        let img = render_observation(&t, 4.2);
        for r in 0..IMAGE_SIZE {
            for c in 0..IMAGE_SIZE {
                assert_eq!(img.get(r, c, 0), 0.5);
            }
        }
    }

    #[test]
    fn values_in_unit_range_and_deterministic() {
        for class in TerrainClass::ALL {
            let t = make_terrain(class, 99);
            let a = render_observation(&t, 12.5);
            assert_eq!(a.data.len(), OBSERVATION_LEN);
            assert!(a.data.iter().all(|v| (0.0..=1.0).contains(v)));
            let b = render_observation(&t, 12.5);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn distinct_visual_seeds_change_at_least_one_percent_of_pixels() {
        let min_diff = OBSERVATION_LEN / IMAGE_CHANNELS / 100;
        for pair in 0..100u64 {
            let class = TerrainClass::ALL[(pair % 4) as usize];
            let a = render_observation(&make_terrain(class, 2 * pair), 1.0);
            let b = render_observation(&make_terrain(class, 2 * pair + 1), 1.0);
            let differing = (0..IMAGE_SIZE * IMAGE_SIZE)
                .filter(|&p| {
                    (0..IMAGE_CHANNELS).any(|ch| {
                        a.data[p * IMAGE_CHANNELS + ch] != b.data[p * IMAGE_CHANNELS + ch]
                    })
                })
                .count();
            assert!(
                differing >= min_diff,
                "pair {pair}: only {differing} pixels differ"
            );
        }
    }
}
