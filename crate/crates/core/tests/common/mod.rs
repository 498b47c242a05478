//! Published score tables used as golden fixtures.
#![allow(dead_code, clippy::approx_constant)]

use genception::metrics::{aggregate_cells, score_table};
use genception::model::{CategorySet, Direction, ScoreTable};

pub const MODELS: [&str; 7] = [
    "Gemini1.5-Pro",
    "Claude3-Opus",
    "GPT-4o",
    "GPT-4V",
    "mPLUG-Owl2",
    "LLaVA-13B",
    "LLaVA-7B",
];

/// Per category, per model: MME accuracy sum, GC@3 cosine, GC@3 FID.
/// Categories follow `CategorySet::mme()` order.
pub const MAIN_CELLS: [[f64; 21]; 14] = [
    [190.0, 0.437, 269.8, 183.3, 0.382, 273.7, 195.0, 0.400, 266.5, 175.0, 0.422, 265.1, 185.0, 0.323, 296.9, 195.0, 0.305, 322.0, 195.0, 0.308, 318.1],
    [148.3, 0.389, 272.6, 116.7, 0.348, 285.3, 190.0, 0.388, 277.5, 153.3, 0.404, 277.4, 160.0, 0.299, 316.1, 165.0, 0.294, 319.7, 148.3, 0.253, 326.1],
    [105.0, 0.357, 253.7, 76.7, 0.357, 266.1, 145.0, 0.398, 260.6, 85.0, 0.408, 253.3, 75.0, 0.306, 294.0, 135.0, 0.255, 298.9, 123.3, 0.285, 286.0],
    [175.0, 0.474, 234.8, 118.3, 0.385, 267.6, 180.0, 0.421, 246.1, 141.7, 0.403, 243.7, 138.3, 0.290, 310.1, 165.0, 0.300, 305.6, 170.0, 0.284, 304.5],
    [175.2, 0.374, 206.0, 149.7, 0.360, 206.0, 192.2, 0.335, 203.7, 187.8, 0.324, 209.4, 154.8, 0.243, 209.2, 163.6, 0.215, 240.9, 154.1, 0.214, 244.3],
    [169.4, 0.362, 191.0, 77.6, 0.317, 192.5, 46.8, 0.331, 193.3, 53.5, 0.332, 189.1, 167.9, 0.232, 211.3, 144.4, 0.206, 223.7, 153.2, 0.188, 233.6],
    [147.0, 0.423, 173.7, 149.8, 0.374, 174.7, 148.5, 0.401, 171.5, 141.2, 0.393, 173.7, 157.8, 0.299, 194.4, 162.8, 0.277, 198.0, 160.8, 0.266, 196.3],
    [176.8, 0.375, 182.1, 113.0, 0.344, 188.9, 175.5, 0.372, 182.0, 104.0, 0.353, 182.6, 158.8, 0.275, 206.0, 150.8, 0.242, 224.3, 154.8, 0.252, 214.4],
    [152.2, 0.412, 171.1, 136.8, 0.385, 170.4, 144.0, 0.415, 169.2, 115.0, 0.421, 170.3, 136.0, 0.252, 202.2, 98.8, 0.212, 213.3, 110.0, 0.210, 215.3],
    [150.0, 0.464, 216.5, 115.0, 0.432, 210.4, 174.3, 0.448, 213.9, 155.0, 0.471, 208.1, 127.9, 0.353, 237.2, 115.7, 0.334, 248.9, 117.1, 0.294, 254.4],
    [117.5, 0.213, 310.0, 70.0, 0.245, 267.4, 182.5, 0.255, 299.7, 147.5, 0.193, 302.9, 65.0, 0.176, 327.6, 55.0, 0.144, 323.5, 50.0, 0.107, 398.2],
    [110.0, 0.268, 346.5, 67.5, 0.229, 349.3, 170.0, 0.282, 346.4, 80.0, 0.240, 322.5, 45.0, 0.192, 362.0, 35.0, 0.195, 367.4, 50.0, 0.155, 366.0],
    [162.5, 0.240, 334.6, 45.0, 0.236, 362.5, 192.5, 0.211, 326.9, 55.0, 0.157, 368.0, 112.5, 0.081, 365.2, 85.0, 0.116, 352.3, 65.0, 0.111, 424.4],
    [170.0, 0.367, 233.2, 167.5, 0.362, 245.5, 192.5, 0.362, 246.2, 177.5, 0.393, 238.0, 102.5, 0.276, 255.4, 95.0, 0.239, 270.6, 65.0, 0.222, 283.7],
];

/// Printed aggregate rows, same column layout as `MAIN_CELLS`.
pub const MAIN_VISUAL_MEAN: [f64; 21] = [158.9, 0.407, 217.1, 123.7, 0.368, 223.6, 159.1, 0.391, 218.4, 131.2, 0.393, 217.3, 146.2, 0.287, 247.7, 149.7, 0.264, 259.5, 148.7, 0.255, 259.3];
pub const MAIN_VISUAL_RANK: [u32; 21] = [2, 1, 1, 7, 4, 4, 1, 3, 3, 6, 2, 2, 5, 5, 5, 3, 6, 7, 5, 7, 6];
pub const MAIN_TEXTUAL_MEAN: [f64; 21] = [140.0, 0.272, 306.1, 87.5, 0.268, 306.2, 184.4, 0.278, 304.8, 115.0, 0.246, 307.9, 81.3, 0.181, 327.6, 67.5, 0.174, 328.5, 57.5, 0.149, 368.1];
pub const MAIN_TEXTUAL_RANK: [u32; 21] = [2, 2, 2, 4, 3, 3, 1, 1, 1, 3, 4, 4, 5, 5, 5, 6, 6, 6, 7, 7, 7];
pub const MAIN_OVERALL_MEAN: [f64; 21] = [153.5, 0.368, 242.5, 113.3, 0.340, 247.2, 166.3, 0.359, 243.1, 126.5, 0.351, 243.2, 127.6, 0.257, 270.5, 126.1, 0.238, 279.2, 122.6, 0.225, 290.1];
pub const MAIN_OVERALL_RANK: [u32; 21] = [2, 1, 1, 7, 4, 4, 1, 2, 2, 4, 3, 3, 3, 5, 5, 5, 6, 6, 6, 7, 7];

/// Column offset within each model's triple.
#[derive(Debug, Clone, Copy)]
pub enum Metric {
    Mme = 0,
    Cosine = 1,
    Fid = 2,
}

impl Metric {
    pub fn direction(self) -> Direction {
        match self {
            Metric::Fid => Direction::LowerBetter,
            _ => Direction::HigherBetter,
        }
    }

    /// Printed decimals.
    pub fn decimals(self) -> usize {
        match self {
            Metric::Cosine => 3,
            _ => 1,
        }
    }

    pub fn pick<T: Copy>(self, row: &[T; 21]) -> Vec<T> {
        (0..7).map(|m| row[3 * m + self as usize]).collect()
    }
}

pub fn main_table(metric: Metric) -> ScoreTable {
    let set = CategorySet::mme();
    let rows = (0..7)
        .map(|m| {
            let cells: Vec<Option<f64>> = MAIN_CELLS.iter().map(|r| Some(r[3 * m + metric as usize])).collect();
            (MODELS[m].to_string(), aggregate_cells(&cells, &set).unwrap())
        })
        .collect();
    score_table(format!("{metric:?}"), metric.direction(), metric.decimals(), &set, rows).unwrap()
}

/// GC@1 on the five-image subsets: seven models, then the human score and
/// the printed Δ% between human and best model.
pub const HUMAN_CELLS: [[f64; 9]; 14] = [
    [0.5841, 0.4563, 0.5578, 0.5434, 0.3967, 0.3524, 0.3782, 0.6402, 9.6045],
    [0.4140, 0.3799, 0.2725, 0.4882, 0.2364, 0.3535, 0.2038, 0.5476, 12.1671],
    [0.5546, 0.4959, 0.4086, 0.5639, 0.3527, 0.4285, 0.3899, 0.6409, 13.6549],
    [0.7081, 0.6206, 0.6139, 0.5516, 0.4047, 0.4314, 0.3506, 0.8380, 18.3449],
    [0.5046, 0.4362, 0.4939, 0.4681, 0.3998, 0.3208, 0.2905, 0.5456, 8.1252],
    [0.4182, 0.3988, 0.4369, 0.4447, 0.3714, 0.2545, 0.2160, 0.4671, 5.0371],
    [0.6080, 0.5828, 0.5229, 0.5919, 0.4842, 0.3906, 0.4057, 0.6236, 2.5658],
    [0.4903, 0.4932, 0.5236, 0.5702, 0.3613, 0.4174, 0.3845, 0.6045, 6.0154],
    [0.3725, 0.5304, 0.5297, 0.5252, 0.2938, 0.2924, 0.2336, 0.5421, 2.2059],
    [0.4338, 0.5375, 0.5047, 0.4012, 0.3244, 0.4153, 0.3532, 0.6417, 19.3860],
    [0.3689, 0.4085, 0.4043, 0.3690, 0.2923, 0.2963, 0.1975, 0.5376, 31.6034],
    [0.3652, 0.3958, 0.3940, 0.4241, 0.3474, 0.4409, 0.3423, 0.5160, 17.0333],
    [0.4480, 0.3949, 0.4333, 0.3803, 0.0931, 0.2372, 0.1981, 0.6196, 38.3036],
    [0.4382, 0.4329, 0.3334, 0.4455, 0.2663, 0.3371, 0.2912, 0.4696, 5.4097],
];

/// Printed aggregate rows of the human comparison, labelled as rendered.
pub const HUMAN_AGGREGATES: [(&str, [f64; 9]); 3] = [
    ("visual_intensive mean", [0.5088, 0.4932, 0.4865, 0.5148, 0.3625, 0.3657, 0.3206, 0.6091, 9.7107]),
    ("textual_intensive mean", [0.4051, 0.4080, 0.3913, 0.4047, 0.2498, 0.3279, 0.2573, 0.5357, 23.0875]),
    ("overall mean", [0.4792, 0.4688, 0.4593, 0.4834, 0.3303, 0.3549, 0.3025, 0.5882, 13.5327]),
];

/// Leaderboard scores printed under the main table, per model.
pub const LEADERBOARDS: [(&str, [f64; 7]); 5] = [
    ("HallusionBench", [45.2, 37.8, 51.7, 46.5, 25.7, 24.5, 27.6]),
    ("MMStar", [38.6, 45.7, 61.6, 47.7, 34.8, 40.1, 34.6]),
    ("SEEDBench", [70.7, 64.0, 76.4, 71.6, 64.5, 67.9, 66.4]),
    ("AI2D", [70.2, 70.6, 82.2, 75.5, 55.7, 61.3, 55.9]),
    ("OpenCompass", [62.7, 57.7, 66.3, 63.3, 46.3, 48.8, 46.7]),
];
