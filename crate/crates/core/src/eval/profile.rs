use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::datamodel::Dataset;
use crate::error::{Error, Result};
use crate::pipelines::CommunityAssignment;

/// Communities with the largest tumor, immune (B-plasma + T) and normal-BEC
/// shares; ties go to the lower index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileFlags {
    pub highest_tumor: usize,
    pub highest_immune: usize,
    pub highest_normal: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityProfile {
    pub cell_types: Vec<String>,
    /// `percentages[c][t]` is the share of type `t` in community `c`, in percent.
    pub percentages: Vec<Vec<f64>>,
    pub sizes: Vec<usize>,
    pub flags: Option<ProfileFlags>,
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

impl CommunityProfile {
    fn type_index(&self, name: &str) -> Result<usize> {
        self.cell_types
            .iter()
            .position(|t| t.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::UnknownCellType(name.to_string()))
    }

    /// Flags for the tumor, immune and normal-BEC communities; fails when
    /// any of those cell types is absent.
    pub fn flags(&self) -> Result<ProfileFlags> {
        let tumor = self.type_index("tumor")?;
        let b = self.type_index("B-plasma")?;
        let t = self.type_index("T")?;
        let normal = self.type_index("normal-BEC")?;
        let p = &self.percentages;
        Ok(ProfileFlags {
            highest_tumor: argmax(p.iter().map(|r| r[tumor])),
            highest_immune: argmax(p.iter().map(|r| r[b] + r[t])),
            highest_normal: argmax(p.iter().map(|r| r[normal])),
        })
    }

    /// Writes `community,size,<one percentage column per type>`.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        let mut header = vec!["community".to_string(), "size".into()];
        header.extend(self.cell_types.iter().cloned());
        w.write_record(&header)?;
        for (c, row) in self.percentages.iter().enumerate() {
            let mut rec = vec![c.to_string(), self.sizes[c].to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn cell_lookup(a: &CommunityAssignment, d: &Dataset) -> Result<Vec<usize>> {
    let index: HashMap<&str, usize> = d
        .cells()
        .iter()
        .enumerate()
        .map(|(i, c)| (c.cell_id.as_str(), i))
        .collect();
    a.cell_ids
        .iter()
        .map(|id| {
            index
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Error::InvalidConfig(format!("cell {id} not in dataset")))
        })
        .collect()
}

/// Cell-type percentages per community. Flags are attached when the
/// registry holds the tumor, immune and normal-BEC types.
pub fn community_profiles(a: &CommunityAssignment, d: &Dataset) -> Result<CommunityProfile> {
    let cells = cell_lookup(a, d)?;
    let m = d.registry().len();
    let mut counts = vec![vec![0usize; m]; a.n_communities];
    for (&ci, &l) in cells.iter().zip(&a.labels) {
        counts[l][d.cells()[ci].cell_type] += 1;
    }
    let sizes: Vec<usize> = counts.iter().map(|r| r.iter().sum()).collect();
    let percentages = counts
        .iter()
        .zip(&sizes)
        .map(|(r, &s)| r.iter().map(|&c| 100.0 * c as f64 / s as f64).collect())
        .collect();
    let mut profile = CommunityProfile {
        cell_types: d.registry().names().to_vec(),
        percentages,
        sizes,
        flags: None,
    };
    profile.flags = profile.flags().ok();
    Ok(profile)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionRow {
    pub sample: String,
    /// Percentage of the sample's labeled cells in the community.
    pub x: f64,
    /// 1 for a primary tumor sample.
    pub y: u8,
    pub k: usize,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFractionTable {
    pub community: usize,
    pub rows: Vec<FractionRow>,
}

impl SampleFractionTable {
    pub fn xs(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.x).collect()
    }

    pub fn ys(&self) -> Vec<u8> {
        self.rows.iter().map(|r| r.y).collect()
    }

    /// Writes `sample,x,y,k,n`.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["sample", "x", "y", "k", "n"])?;
        for r in &self.rows {
            w.write_record([
                r.sample.clone(),
                r.x.to_string(),
                r.y.to_string(),
                r.k.to_string(),
                r.n.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a table with at least `x` and `y` columns; `sample`, `k` and `n`
    /// are optional.
    pub fn read_csv<R: Read>(source: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(source);
        let headers = r.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let xc = col("x").ok_or_else(|| Error::MissingColumn { role: "x".into() })?;
        let yc = col("y").ok_or_else(|| Error::MissingColumn { role: "y".into() })?;
        let (sc, kc, nc) = (col("sample"), col("k"), col("n"));
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let row = i + 1;
            let rec = rec.map_err(|e| Error::Parse {
                row,
                message: e.to_string(),
            })?;
            let parse_f = |c: usize| {
                rec[c].trim().parse::<f64>().map_err(|_| Error::Parse {
                    row,
                    message: format!("bad number {:?}", &rec[c]),
                })
            };
            let parse_u = |c: Option<usize>| {
                c.map_or(Ok(0), |c| {
                    rec[c].trim().parse::<usize>().map_err(|_| Error::Parse {
                        row,
                        message: format!("bad count {:?}", &rec[c]),
                    })
                })
            };
            let y = match rec[yc].trim() {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(Error::Parse {
                        row,
                        message: format!("y must be 0 or 1, got {other:?}"),
                    })
                }
            };
            rows.push(FractionRow {
                sample: sc.map_or_else(|| row.to_string(), |c| rec[c].to_string()),
                x: parse_f(xc)?,
                y,
                k: parse_u(kc)?,
                n: parse_u(nc)?,
            });
        }
        if rows.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(Self { community: 0, rows })
    }
}

/// Percentage of each sample's labeled cells that fall in `community`.
/// Samples with no labeled cells are omitted.
pub fn sample_fractions(
    a: &CommunityAssignment,
    community: usize,
    d: &Dataset,
    primary: &HashMap<String, u8>,
) -> Result<SampleFractionTable> {
    if community >= a.n_communities {
        return Err(Error::InvalidConfig(format!(
            "community {community} not in 0..{}",
            a.n_communities
        )));
    }
    let cells = cell_lookup(a, d)?;
    let mut k = vec![0usize; d.samples().len()];
    let mut n = vec![0usize; d.samples().len()];
    for (&ci, &l) in cells.iter().zip(&a.labels) {
        let s = d
            .sample_index(&d.cells()[ci].sample_id)
            .expect("sample listed");
        n[s] += 1;
        if l == community {
            k[s] += 1;
        }
    }
    let mut rows = Vec::new();
    for (s, name) in d.samples().iter().enumerate() {
        if n[s] == 0 {
            continue;
        }
        let y = *primary
            .get(name)
            .ok_or_else(|| Error::InvalidConfig(format!("no stage for sample {name}")))?;
        rows.push(FractionRow {
            sample: name.clone(),
            x: 100.0 * k[s] as f64 / n[s] as f64,
            y,
            k: k[s],
            n: n[s],
        });
    }
    Ok(SampleFractionTable { community, rows })
}
