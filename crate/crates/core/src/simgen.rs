//! Generators for the five synthetic tissue settings with known communities.
//!
//! Distribution parameters are written in thousands: `U(a, b)` covers
//! `(1000a, 1000b)` and `N(mu, s2)` has mean `1000 mu` and variance `1000 s2`.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::datamodel::{CellRecord, CellTypeRegistry, Dataset};
use crate::error::{Error, Result};
use crate::pipelines::CommunityAssignment;
use crate::seed;

const UNIT: f64 = 1000.0;
/// Square carved out of the setting 3 and 5 type-2 cloud.
pub const CARVE: Rect = Rect {
    x: (3995.0, 4705.0),
    y: (3995.0, 4705.0),
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Rect {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.x.0 <= x && x <= self.x.1 && self.y.0 <= y && y <= self.y.1
    }
}

/// Spatial law for one group of cells, in final coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Law {
    Normal {
        mean: (f64, f64),
        sd: f64,
    },
    Uniform {
        rect: Rect,
    },
    /// Points on an ellipse outline at a uniform angle.
    Ellipse {
        center: (f64, f64),
        radii: (f64, f64),
    },
}

impl Law {
    fn normal(mx: f64, my: f64, var: f64) -> Self {
        Law::Normal {
            mean: (mx * UNIT, my * UNIT),
            sd: (var * UNIT).sqrt(),
        }
    }

    fn uniform(x: (f64, f64), y: (f64, f64)) -> Self {
        Law::Uniform {
            rect: Rect {
                x: (x.0 * UNIT, x.1 * UNIT),
                y: (y.0 * UNIT, y.1 * UNIT),
            },
        }
    }

    fn ring() -> Self {
        Law::Ellipse {
            center: (0.8 * UNIT, 0.0),
            radii: (0.4 * UNIT, 0.25 * UNIT),
        }
    }

    fn sample(&self, rng: &mut seed::Rng) -> (f64, f64) {
        match *self {
            Law::Normal { mean, sd } => {
                let n = Normal::new(0.0, sd).expect("finite sd");
                (mean.0 + n.sample(rng), mean.1 + n.sample(rng))
            }
            Law::Uniform { rect } => (
                rng.gen_range(rect.x.0..rect.x.1),
                rng.gen_range(rect.y.0..rect.y.1),
            ),
            Law::Ellipse { center, radii } => {
                let t = rng.gen_range(0.0..std::f64::consts::TAU);
                (center.0 + radii.0 * t.cos(), center.1 + radii.1 * t.sin())
            }
        }
    }
}

/// Where a cell-type count comes from, in thousands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "count", rename_all = "snake_case")]
pub enum CountLaw {
    /// The setting's common discrete uniform.
    Setting,
    Uniform {
        lo: u32,
        hi: u32,
    },
    /// Reuse the realized count of an earlier draw.
    SameAs {
        draw: usize,
    },
}

/// How one drawn count is divided among communities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "split", rename_all = "snake_case")]
pub enum Split {
    /// `(community, percent, law)`; percentages sum to 100.
    Shares(Vec<(usize, u32, Law)>),
    /// One cloud, labeled by whether each point falls inside `region`.
    Region {
        law: Law,
        region: Rect,
        inside: usize,
        outside: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    /// 1-based cell type.
    pub cell_type: usize,
    pub count: CountLaw,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSetting {
    pub id: u8,
    /// Common count support in thousands.
    pub count_range: (u32, u32),
    pub n_communities: usize,
    pub draws: Vec<Draw>,
}

fn single(cell_type: usize, count: CountLaw, community: usize, law: Law) -> Draw {
    Draw {
        cell_type,
        count,
        split: Split::Shares(vec![(community, 100, law)]),
    }
}

fn shares(cell_type: usize, parts: Vec<(usize, u32, Law)>) -> Draw {
    Draw {
        cell_type,
        count: CountLaw::Setting,
        split: Split::Shares(parts),
    }
}

impl SimSetting {
    pub fn get(id: u8) -> Result<Self> {
        use CountLaw::Setting as S;
        let top = (0.5, 1.0);
        let (draws, range, k) = match id {
            1 => (
                vec![
                    single(1, S, 0, Law::normal(0.0, 0.0, 250.0)),
                    single(2, S, 1, Law::normal(4.0, 4.0, 250.0)),
                    single(3, S, 2, Law::normal(10.0, 10.0, 250.0)),
                    single(
                        1,
                        CountLaw::Uniform { lo: 6, hi: 8 },
                        3,
                        Law::normal(8.0, 0.0, 50.0),
                    ),
                    single(
                        2,
                        CountLaw::SameAs { draw: 3 },
                        3,
                        Law::normal(8.0, 0.0, 50.0),
                    ),
                ],
                (10, 25),
                4,
            ),
            2 => (
                vec![
                    single(1, S, 0, Law::uniform((-0.25, 0.25), (-0.25, 0.25))),
                    shares(
                        2,
                        vec![
                            (1, 50, Law::uniform((-0.25, 0.25), top)),
                            (2, 50, Law::uniform((0.35, 0.85), top)),
                        ],
                    ),
                    shares(
                        3,
                        vec![
                            (2, 50, Law::uniform((0.35, 0.85), top)),
                            (3, 50, Law::uniform((1.15, 1.65), top)),
                        ],
                    ),
                    shares(
                        4,
                        vec![
                            (4, 50, Law::uniform((0.7, 1.0), (-0.15, 0.15))),
                            (4, 50, Law::ring()),
                        ],
                    ),
                ],
                (10, 15),
                5,
            ),
            3 => (
                vec![
                    single(1, S, 0, Law::normal(2.0, 2.0, 100.0)),
                    Draw {
                        cell_type: 2,
                        count: S,
                        split: Split::Region {
                            law: Law::normal(4.0, 4.0, 100.0),
                            region: CARVE,
                            inside: 3,
                            outside: 1,
                        },
                    },
                    single(3, S, 2, Law::normal(8.0, 8.0, 100.0)),
                    shares(
                        4,
                        vec![
                            (3, 44, Law::uniform((4.0, 4.7), (4.0, 4.7))),
                            (4, 56, Law::uniform((5.0, 6.0), (8.5, 9.2))),
                        ],
                    ),
                ],
                (100, 150),
                5,
            ),
            4 => (
                vec![
                    shares(
                        1,
                        vec![
                            (0, 45, Law::uniform((-0.55, -0.35), (-0.25, 0.25))),
                            (1, 55, Law::uniform((-0.25, 0.25), (-0.25, 0.25))),
                        ],
                    ),
                    shares(
                        2,
                        vec![
                            (2, 45, Law::uniform((-0.25, 0.25), top)),
                            (3, 55, Law::uniform((0.35, 0.85), top)),
                        ],
                    ),
                    shares(
                        3,
                        vec![
                            (3, 45, Law::uniform((0.35, 0.85), top)),
                            (4, 55, Law::uniform((1.15, 1.65), top)),
                        ],
                    ),
                    shares(
                        4,
                        vec![
                            (1, 45, Law::uniform((-0.25, 0.25), (-0.25, 0.25))),
                            (5, 55, Law::uniform((0.35, 0.85), (1.1, 1.35))),
                        ],
                    ),
                    shares(
                        5,
                        vec![
                            (6, 45, Law::uniform((0.7, 1.0), (-0.15, 0.15))),
                            (6, 55, Law::ring()),
                        ],
                    ),
                ],
                (90, 120),
                7,
            ),
            5 => {
                let c7 = Law::normal(8.0, 2.0, 90.0);
                let band = (8.5, 9.2);
                (
                    vec![
                        single(1, S, 0, Law::normal(2.0, 2.0, 100.0)),
                        Draw {
                            cell_type: 2,
                            count: S,
                            split: Split::Region {
                                law: Law::normal(4.0, 4.0, 100.0),
                                region: CARVE,
                                inside: 3,
                                outside: 1,
                            },
                        },
                        single(3, S, 2, Law::normal(8.0, 8.0, 100.0)),
                        shares(
                            4,
                            vec![
                                (3, 58, Law::uniform((4.0, 4.7), (4.0, 4.7))),
                                (4, 42, Law::uniform((5.5, 6.5), band)),
                            ],
                        ),
                        shares(
                            5,
                            vec![
                                (4, 58, Law::uniform((5.5, 6.5), band)),
                                (5, 42, Law::uniform((2.5, 4.5), band)),
                            ],
                        ),
                        single(1, CountLaw::Uniform { lo: 30, hi: 50 }, 6, c7),
                        single(2, CountLaw::Uniform { lo: 30, hi: 50 }, 6, c7),
                    ],
                    (150, 200),
                    7,
                )
            }
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown simulation setting {other}"
                )))
            }
        };
        Ok(Self {
            id,
            count_range: range,
            n_communities: k,
            draws,
        })
    }

    pub fn n_cell_types(&self) -> usize {
        self.draws.iter().map(|d| d.cell_type).max().unwrap_or(0)
    }
}

/// Splits `n` by integer percentages with largest-remainder rounding; ties
/// favor earlier shares.
pub fn split_count(n: usize, percents: &[u32]) -> Vec<usize> {
    let total: u64 = percents.iter().map(|&p| p as u64).sum();
    let exact: Vec<(u64, u64)> = percents
        .iter()
        .map(|&p| ((n as u64 * p as u64) / total, (n as u64 * p as u64) % total))
        .collect();
    let mut out: Vec<usize> = exact.iter().map(|e| e.0 as usize).collect();
    let mut left = n - out.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..percents.len()).collect();
    order.sort_by(|&a, &b| exact[b].1.cmp(&exact[a].1).then(a.cmp(&b)));
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        out[i] += 1;
        left -= 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDataset {
    pub setting: u8,
    pub seed: u64,
    pub scale: f64,
    pub dataset: Dataset,
    pub truth: CommunityAssignment,
}

impl SimDataset {
    /// Writes `cell_id,intended_community` with communities numbered from 1.
    pub fn write_truth<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["cell_id", "intended_community"])?;
        for (id, l) in self.truth.cell_ids.iter().zip(&self.truth.labels) {
            w.write_record([id.clone(), (l + 1).to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Generates one realization of a setting.
pub fn simulate(setting: u8, seed: u64, scale: f64) -> Result<SimDataset> {
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "scale {scale} outside (0, 1]"
        )));
    }
    let spec = SimSetting::get(setting)?;
    let mut realized: Vec<usize> = Vec::with_capacity(spec.draws.len());
    // (community, type, x, y) in draw order.
    let mut cells: Vec<(usize, usize, f64, f64)> = Vec::new();
    for (di, draw) in spec.draws.iter().enumerate() {
        let mut count_rng = seed::rng(seed, "simgen:count", di as u64);
        let scaled = |raw: u32| (f64::from(raw) * scale).round() as usize;
        let n = match draw.count {
            CountLaw::Setting => {
                scaled(count_rng.gen_range(spec.count_range.0 * 1000..=spec.count_range.1 * 1000))
            }
            CountLaw::Uniform { lo, hi } => scaled(count_rng.gen_range(lo * 1000..=hi * 1000)),
            CountLaw::SameAs { draw } => realized[draw],
        };
        realized.push(n);
        let mut rng = seed::rng(seed, "simgen:positions", di as u64);
        match &draw.split {
            Split::Shares(parts) => {
                let counts = split_count(n, &parts.iter().map(|p| p.1).collect::<Vec<_>>());
                for (&(community, _, law), &c) in parts.iter().zip(&counts) {
                    for _ in 0..c {
                        let (x, y) = law.sample(&mut rng);
                        cells.push((community, draw.cell_type - 1, x, y));
                    }
                }
            }
            Split::Region {
                law,
                region,
                inside,
                outside,
            } => {
                let start = cells.len();
                for _ in 0..n {
                    let (x, y) = law.sample(&mut rng);
                    let c = if region.contains(x, y) {
                        *inside
                    } else {
                        *outside
                    };
                    cells.push((c, draw.cell_type - 1, x, y));
                }
                let hits = cells[start..].iter().filter(|c| c.0 == *inside).count();
                for (community, k) in [(*inside, hits), (*outside, n - hits)] {
                    let rate = k as f64 / n.max(1) as f64;
                    if rate < 1e-4 {
                        return Err(Error::RejectionStall {
                            community: community + 1,
                            rate,
                        });
                    }
                }
            }
        }
    }
    cells.sort_by_key(|c| c.0);
    let sample = format!("sim{setting}");
    let width = cells.len().to_string().len();
    let registry = CellTypeRegistry::new(
        (1..=spec.n_cell_types())
            .map(|t| format!("type{t}"))
            .collect(),
    )?;
    let mut records = Vec::with_capacity(cells.len());
    let mut labels = Vec::with_capacity(cells.len());
    for (i, &(community, cell_type, x, y)) in cells.iter().enumerate() {
        records.push(CellRecord {
            cell_id: format!("c{:0width$}", i + 1),
            sample_id: sample.clone(),
            fov_id: None,
            x,
            y,
            cell_type,
        });
        labels.push(community);
    }
    let ids: Vec<String> = records.iter().map(|c| c.cell_id.clone()).collect();
    let n = ids.len();
    let truth = CommunityAssignment::new(
        "intended",
        ids,
        vec![sample; n],
        vec![None; n],
        labels,
        serde_json::json!({"setting": setting, "seed": seed, "scale": scale}),
    )?;
    if truth.n_communities != spec.n_communities {
        return Err(Error::DegenerateData(format!(
            "setting {setting} produced {} of {} communities at scale {scale}",
            truth.n_communities, spec.n_communities
        )));
    }
    Ok(SimDataset {
        setting,
        seed,
        scale,
        dataset: Dataset::new(records, registry)?,
        truth,
    })
}
