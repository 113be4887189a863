use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use spatial_community::cluster::{elbow_select_k, gap_select_k, kmeans, GapConfig, KMeansConfig};
use spatial_community::datamodel::{ingest_cells, write_cells, ColumnSchema, Dataset};
use spatial_community::eval::{
    ari, community_profiles, logistic_curve, logistic_fit, sample_fractions, write_curves_csv,
    LogisticOptions, SampleFractionTable,
};
use spatial_community::neighborhood::{
    diagnostics, disk_composition, knn_composition, CompositionMatrix, DiskConfig, Histogram,
    HistogramSpec, KnnConfig, ScopeMode,
};
use spatial_community::pipelines::{
    auto_radius, stm, tmhc, CommunityAssignment, FinalNodes, StmConfig, TmhcConfig,
};
use spatial_community::sigclust::Variant;
use spatial_community::simgen;
use spatial_community::transform::{clr_transform, ZeroPolicy};

use crate::{
    CellInput, ComposeArgs, DetectArgs, DetectMethod, DiagnoseArgs, EvaluateArgs, Finals,
    FractionsArgs, LogitArgs, Neighborhood, NullVariant, Preset, ProfileArgs, Scope, SimulateArgs,
    Transform,
};

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

fn manifest_path(explicit: &Option<PathBuf>, output: &Path) -> PathBuf {
    explicit.clone().unwrap_or_else(|| {
        let mut s = output.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    })
}

/// Writes `{command, version, args, ...extra}`; `args` can be fed back
/// through `--config` to repeat the run.
fn write_manifest<A: Serialize>(path: &Path, command: &str, args: &A, extra: Value) -> Result<()> {
    let mut m = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "args": serde_json::to_value(args)?,
    });
    if let (Some(obj), Value::Object(more)) = (m.as_object_mut(), extra) {
        obj.extend(more);
    }
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, &m)?;
    writeln!(w)?;
    Ok(())
}

fn read_cells(input: &CellInput) -> Result<Dataset> {
    let schema = ColumnSchema {
        sample: Some(input.col_sample.clone()),
        x: Some(input.col_x.clone()),
        y: Some(input.col_y.clone()),
        cell_type: Some(input.col_type.clone()),
        fov: Some(input.col_fov.clone()),
        cell_id: Some(input.col_id.clone()),
    };
    if !input.delimiter.is_ascii() {
        bail!("delimiter must be a single ASCII character");
    }
    let d = ingest_cells(open(&input.cells)?, &schema, input.delimiter as u8)
        .with_context(|| format!("reading cells from {}", input.cells.display()))?;
    Ok(d)
}

fn scope_mode(s: Scope) -> ScopeMode {
    match s {
        Scope::PerFov => ScopeMode::PerFov,
        Scope::Global => ScopeMode::Global,
    }
}

pub fn compose(a: &ComposeArgs) -> Result<()> {
    let d = read_cells(&a.input)?;
    let scope = scope_mode(a.scope);
    let (comp, radius) = match a.method {
        Neighborhood::Disk => {
            let template = DiskConfig {
                r: 1.0,
                boundary_margin: a.margin,
                min_cells: a.min_cells,
                scope,
            };
            let r = match (a.r, a.target_occupancy) {
                (Some(r), _) => r,
                (None, Some(t)) => auto_radius(&d, &template, t)?,
                (None, None) => bail!("disk compositions need --r or --target-occupancy"),
            };
            (
                disk_composition(&d, &DiskConfig { r, ..template })?,
                Some(r),
            )
        }
        Neighborhood::Knn => (knn_composition(&d, &KnnConfig { k: a.k, scope })?, None),
    };
    comp.write_csv(create(&a.output)?)?;
    if let Some(path) = &a.diagnostics {
        let sizes: Vec<f64> = comp.counts.iter().map(|&c| f64::from(c)).collect();
        Histogram::with_width(&sizes, 5.0).write_csv(create(path)?)?;
    }
    write_manifest(
        &manifest_path(&a.manifest, &a.output),
        "compose",
        a,
        json!({ "radius": radius, "cells": d.len(), "rows": comp.len(), "cell_types": comp.registry.names() }),
    )
}

fn tmhc_config(a: &DetectArgs) -> TmhcConfig {
    // The radius only matters for disk construction, which `detect` does not do.
    let mut cfg = match a.preset {
        Preset::Default => TmhcConfig::new(1.0, a.seed),
        Preset::Simulation => TmhcConfig::simulation(1.0, a.seed),
    };
    if let Some(v) = a.k1 {
        cfg.k1 = v;
    }
    if let Some(v) = a.size_cap {
        cfg.size_cap = v;
    }
    if let Some(v) = a.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = a.n_sim {
        cfg.n_sim = v;
    }
    if let Some(v) = a.variant {
        cfg.variant = match v {
            NullVariant::Soft => Variant::Soft,
            NullVariant::Hard => Variant::Hard,
            NullVariant::Sample => Variant::Sample,
        };
    }
    if a.max_test_rows.is_some() {
        cfg.max_test_rows = a.max_test_rows;
    }
    if let Some(v) = a.final_nodes {
        cfg.final_nodes = match v {
            Finals::Separate => FinalNodes::Separate,
            Finals::Agglomerate => FinalNodes::Agglomerate,
        };
    }
    if let Some(v) = a.min_child_fraction {
        cfg.min_child_fraction = v;
    }
    cfg.restarts = a.restarts;
    if let Some(t) = a.transform {
        cfg.transform = zero_policy(t);
    }
    cfg
}

fn zero_policy(t: Transform) -> ZeroPolicy {
    match t {
        Transform::Clr => ZeroPolicy::HALF_COUNT,
        Transform::Skip => ZeroPolicy::Skip,
    }
}

pub fn detect(a: &DetectArgs) -> Result<()> {
    let comp = CompositionMatrix::read_csv(open(&a.input)?)
        .with_context(|| format!("reading compositions from {}", a.input.display()))?;
    let tcfg = tmhc_config(a);
    let rows = clr_transform(&comp, tcfg.transform)?.rows;
    let mut extra = json!({});
    let labeled: Option<(Vec<usize>, Value)> = match a.method {
        DetectMethod::DcdTmhc => {
            let out = tmhc(&rows, &tcfg)?;
            let mut config = serde_json::to_value(tcfg)?;
            config["trace"] = serde_json::to_value(&out.trace)?;
            Some((out.partition.labels().to_vec(), config))
        }
        DetectMethod::Stm => {
            let (Some(k1), Some(k2)) = (a.k1, a.k2) else {
                bail!("stm needs --k1 and --k2")
            };
            let cfg = StmConfig {
                restarts: a.restarts,
                ..StmConfig::new(k1, k2, a.seed)
            };
            let p = stm(&rows, &cfg)?;
            Some((
                p.labels().to_vec(),
                json!({ "k1": k1, "k2": k2, "seed": a.seed, "transform": tcfg.transform }),
            ))
        }
        DetectMethod::Kmeans => {
            let Some(k) = a.k else {
                bail!("kmeans needs --k")
            };
            let res = kmeans(
                &rows,
                &KMeansConfig::new(k, a.seed).with_restarts(a.restarts),
            )?;
            extra["wcss"] = json!(res.wcss);
            Some((
                res.partition.labels().to_vec(),
                json!({ "k": k, "seed": a.seed, "restarts": a.restarts, "transform": tcfg.transform }),
            ))
        }
        DetectMethod::Elbow => {
            let res = elbow_select_k(&rows, a.k_min..=a.k_max, a.seed)?;
            if let Some(path) = &a.curve {
                res.wcss.write_csv(create(path)?)?;
            }
            extra["selected_k"] = json!(res.k);
            let km = kmeans(
                &rows,
                &KMeansConfig::new(res.k, a.seed).with_restarts(a.restarts),
            )?;
            Some((
                km.partition.labels().to_vec(),
                json!({ "k": res.k, "seed": a.seed, "k_range": [a.k_min, a.k_max], "transform": tcfg.transform }),
            ))
        }
        DetectMethod::Gap => {
            let cfg = GapConfig {
                references: a.references,
                restarts: a.restarts,
                ..GapConfig::default()
            };
            let res = gap_select_k(&rows, a.k_min..=a.k_max, &cfg, a.seed)?;
            if let Some(path) = &a.curve {
                res.gap.write_csv(create(path)?)?;
            }
            extra["selected_k"] = json!(res.k);
            match res.k {
                Some(k) => {
                    let km = kmeans(
                        &rows,
                        &KMeansConfig::new(k, a.seed).with_restarts(a.restarts),
                    )?;
                    Some((
                        km.partition.labels().to_vec(),
                        json!({ "k": k, "seed": a.seed, "k_range": [a.k_min, a.k_max], "transform": tcfg.transform }),
                    ))
                }
                None => None,
            }
        }
    };
    let method = serde_json::to_value(a.method)?
        .as_str()
        .unwrap_or_default()
        .to_string();
    let mpath = manifest_path(&a.manifest, &a.output);
    match labeled {
        Some((labels, config)) => {
            let mut asg = CommunityAssignment::for_rows(&comp, method, labels, config)?;
            if let Some(path) = &a.cells {
                let d = ingest_cells(open(path)?, &ColumnSchema::default(), b',')?;
                let fov: HashMap<&str, Option<String>> = d
                    .cells()
                    .iter()
                    .map(|c| (c.cell_id.as_str(), c.fov_id.clone()))
                    .collect();
                for (id, slot) in asg.cell_ids.iter().zip(asg.fovs.iter_mut()) {
                    *slot = fov
                        .get(id.as_str())
                        .cloned()
                        .with_context(|| format!("cell {id} not in {}", path.display()))?;
                }
            }
            asg.write_csv(create(&a.output)?)?;
            if let (Some(obj), Value::Object(m)) =
                (extra.as_object_mut(), serde_json::to_value(asg.manifest())?)
            {
                obj.extend(m);
            }
            write_manifest(&mpath, "detect", a, extra)
        }
        None => {
            eprintln!(
                "{}",
                json!({ "warning": "gap statistic selected no k in range; no assignment written" })
            );
            extra["method"] = json!(method);
            write_manifest(&mpath, "detect", a, extra)
        }
    }
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let sim = simgen::simulate(a.setting, a.seed, a.scale)?;
    write_cells(&sim.dataset, create(&a.output)?)?;
    sim.write_truth(create(&a.truth)?)?;
    write_manifest(
        &manifest_path(&a.manifest, &a.output),
        "simulate",
        a,
        json!({ "cells": sim.dataset.len(), "communities": sim.truth.n_communities, "community_sizes": sim.truth.sizes() }),
    )
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let asg = CommunityAssignment::read_csv(open(&a.assignment)?, "assignment")
        .with_context(|| format!("reading {}", a.assignment.display()))?;
    let truth = CommunityAssignment::read_csv(open(&a.truth)?, "truth")
        .with_context(|| format!("reading {}", a.truth.display()))?;
    let lookup = truth.label_map();
    let reference = asg
        .cell_ids
        .iter()
        .map(|id| {
            lookup
                .get(id.as_str())
                .copied()
                .with_context(|| format!("cell {id} has no reference label"))
        })
        .collect::<Result<Vec<_>>>()?;
    let rep = ari(
        &asg.partition(),
        &spatial_community::cluster::Partition::from_labels(&reference),
    )?;
    let report = json!({
        "ari": rep.ari,
        "n": rep.n,
        "assignment_communities": asg.n_communities,
        "reference_communities": truth.n_communities,
        "contingency": rep.contingency,
        "args": serde_json::to_value(a)?,
    });
    match &a.output {
        Some(path) => {
            let mut w = create(path)?;
            serde_json::to_writer_pretty(&mut w, &report)?;
            writeln!(w)?;
        }
        None => writeln!(
            std::io::stdout().lock(),
            "{}",
            serde_json::to_string_pretty(&report)?
        )?,
    }
    Ok(())
}

pub fn profile(a: &ProfileArgs) -> Result<()> {
    let d = read_cells(&a.input)?;
    let asg = CommunityAssignment::read_csv(open(&a.assignment)?, "assignment")?;
    let p = community_profiles(&asg, &d)?;
    p.write_csv(create(&a.output)?)?;
    write_manifest(
        &manifest_path(&a.manifest, &a.output),
        "profile",
        a,
        json!({ "sizes": p.sizes, "flags": p.flags }),
    )
}

fn read_stages(path: &Path) -> Result<HashMap<String, u8>> {
    let mut r = csv::Reader::from_reader(open(path)?);
    let headers = r.headers()?.clone();
    let col = |n: &str| {
        headers
            .iter()
            .position(|h| h == n)
            .with_context(|| format!("{} has no `{n}` column", path.display()))
    };
    let (sc, yc) = (col("sample")?, col("y")?);
    let mut out = HashMap::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let y = match rec[yc].trim() {
            "0" => 0,
            "1" => 1,
            other => bail!(
                "{} row {}: y must be 0 or 1, got {other:?}",
                path.display(),
                i + 1
            ),
        };
        out.insert(rec[sc].to_string(), y);
    }
    Ok(out)
}

pub fn fractions(a: &FractionsArgs) -> Result<()> {
    let d = read_cells(&a.input)?;
    let asg = CommunityAssignment::read_csv(open(&a.assignment)?, "assignment")?;
    let stages = read_stages(&a.stages)?;
    let table = sample_fractions(&asg, a.community, &d, &stages)?;
    table.write_csv(create(&a.output)?)?;
    write_manifest(
        &manifest_path(&a.manifest, &a.output),
        "fractions",
        a,
        json!({ "samples": table.rows.len() }),
    )
}

pub fn logit(a: &LogitArgs) -> Result<()> {
    let table = SampleFractionTable::read_csv(open(&a.input)?)
        .with_context(|| format!("reading {}", a.input.display()))?;
    let opts = LogisticOptions {
        max_iter: a.max_iter,
        ..LogisticOptions::default()
    };
    let fit = logistic_fit(&table.xs(), &table.ys(), opts)?;
    let mut w = create(&a.output)?;
    serde_json::to_writer_pretty(
        &mut w,
        &json!({ "fit": fit, "n": table.rows.len(), "args": serde_json::to_value(a)? }),
    )?;
    writeln!(w)?;
    if let Some(path) = &a.curve {
        if a.grid_points < 2 || a.grid_max <= a.grid_min {
            bail!("curve grid needs at least two points on an increasing range");
        }
        let step = (a.grid_max - a.grid_min) / (a.grid_points - 1) as f64;
        let grid: Vec<f64> = (0..a.grid_points)
            .map(|i| a.grid_min + step * i as f64)
            .collect();
        let points = logistic_curve(&fit, &grid);
        write_curves_csv(&[(a.label.as_str(), &points)], create(path)?)?;
    }
    Ok(())
}

pub fn diagnose(a: &DiagnoseArgs) -> Result<()> {
    let d = read_cells(&a.input)?;
    let disk = DiskConfig {
        r: a.r,
        boundary_margin: a.margin,
        min_cells: 1,
        scope: scope_mode(a.scope),
    };
    let spec = HistogramSpec {
        count_bin_width: a.count_bin_width,
        distance_bins: a.distance_bins,
    };
    let diag = diagnostics(&d, &disk, a.k, &spec)?;
    diag.disk_counts.write_csv(create(&a.counts_output)?)?;
    diag.kth_distances.write_csv(create(&a.distances_output)?)?;
    let mut occ = diag.occupancies.clone();
    occ.sort_unstable();
    writeln!(
        std::io::stdout().lock(),
        "{}",
        json!({
            "retained_disks": occ.len(),
            "median_occupancy": occ.get(occ.len() / 2),
            "max_kth_distance": diag.max_kth_distance,
        })
    )?;
    Ok(())
}
