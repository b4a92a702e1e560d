//! Open-format exports: plan matrices, weights sidecar, stats tables, and
//! map re-serialization. All writes are atomic (write-then-rename), and
//! float formatting uses the shortest round-trip representation so
//! identical runs produce byte-identical files.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Plan;
use crate::ingest::{RedistMap, VAP_SUBGROUPS};
use crate::metrics::{StatsRow, StatsTable};
use crate::sampler::{DrawId, EnsembleEntry, PlanEnsemble};

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Writes `bytes` to `path` atomically via a sibling temp file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn csv_bytes(rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row)?;
    }
    Ok(w.into_inner().map_err(|e| Error::Schema(format!("csv flush: {e}")))?)
}

/// Long-format plan export: one row per (draw, precinct) with columns
/// `draw, chain, district, geoid`.
pub fn write_plans_long(path: &Path, map: &RedistMap, ensemble: &PlanEnsemble) -> Result<()> {
    let mut rows = vec![vec![
        "draw".to_string(),
        "chain".to_string(),
        "district".to_string(),
        "geoid".to_string(),
    ]];
    for entry in ensemble.entries() {
        let chain = entry.chain.map(|c| c.to_string()).unwrap_or_default();
        for (i, &d) in entry.assignment.iter().enumerate() {
            rows.push(vec![
                entry.draw.label(),
                chain.clone(),
                d.to_string(),
                map.records()[i].geoid.clone(),
            ]);
        }
    }
    atomic_write(path, &csv_bytes(rows)?)
}

/// Wide plan export: one row per plan with columns `draw, chain` followed
/// by one district label per precinct geoid.
pub fn write_plans_wide(path: &Path, map: &RedistMap, ensemble: &PlanEnsemble) -> Result<()> {
    let mut header = vec!["draw".to_string(), "chain".to_string()];
    header.extend(map.records().iter().map(|r| r.geoid.clone()));
    let mut rows = vec![header];
    for entry in ensemble.entries() {
        let mut row = vec![
            entry.draw.label(),
            entry.chain.map(|c| c.to_string()).unwrap_or_default(),
        ];
        row.extend(entry.assignment.iter().map(|d| d.to_string()));
        rows.push(row);
    }
    atomic_write(path, &csv_bytes(rows)?)
}

/// Sidecar document carrying weights and sampler metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightsDoc {
    pub seed: u64,
    pub node_count: usize,
    pub ndists: u16,
    pub draws: Vec<DrawMeta>,
    pub stage_acceptance: Vec<Vec<f64>>,
    pub resampled_stages: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DrawMeta {
    pub draw: String,
    pub chain: Option<u32>,
    pub weight: f64,
    pub reference: bool,
}

pub fn write_weights(path: &Path, ensemble: &PlanEnsemble) -> Result<()> {
    let doc = WeightsDoc {
        seed: ensemble.seed,
        node_count: ensemble.node_count(),
        ndists: ensemble.ndists(),
        draws: ensemble
            .entries()
            .iter()
            .map(|e| DrawMeta {
                draw: e.draw.label(),
                chain: e.chain,
                weight: e.weight,
                reference: e.draw.is_reference(),
            })
            .collect(),
        stage_acceptance: ensemble.stage_acceptance.clone(),
        resampled_stages: ensemble.resampled_stages.clone(),
    };
    let mut bytes = serde_json::to_vec_pretty(&doc)?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

/// Rebuilds an ensemble from the wide plan file plus the weights sidecar.
pub fn read_ensemble(wide_path: &Path, weights_path: &Path, map: &RedistMap) -> Result<PlanEnsemble> {
    let doc: WeightsDoc = serde_json::from_str(&std::fs::read_to_string(weights_path)?)?;
    let mut reader = csv::Reader::from_path(wide_path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if headers.len() != map.node_count() + 2 || headers[0] != "draw" || headers[1] != "chain" {
        return Err(Error::Schema("wide plan file header mismatch".into()));
    }
    let node_for_col: Vec<usize> = headers[2..]
        .iter()
        .map(|g| {
            map.node_index(g)
                .ok_or_else(|| Error::Join(format!("plan file geoid {g} not in map")))
        })
        .collect::<Result<_>>()?;
    let mut entries = Vec::new();
    for (row_idx, row) in reader.records().enumerate() {
        let row = row?;
        let meta = doc
            .draws
            .get(row_idx)
            .ok_or_else(|| Error::Schema("weights sidecar shorter than plan file".into()))?;
        let label = row.get(0).unwrap_or_default();
        if label != meta.draw {
            return Err(Error::Schema(format!(
                "row {row_idx}: draw {label:?} disagrees with sidecar {:?}",
                meta.draw
            )));
        }
        let draw = if meta.reference {
            DrawId::Reference(label.to_string())
        } else {
            DrawId::Sim(label.parse().map_err(|_| {
                Error::Schema(format!("row {row_idx}: non-numeric draw {label:?}"))
            })?)
        };
        let mut assignment = vec![0u16; map.node_count()];
        for (col, field) in row.iter().skip(2).enumerate() {
            assignment[node_for_col[col]] = field
                .parse()
                .map_err(|_| Error::Schema(format!("row {row_idx}: bad label {field:?}")))?;
        }
        entries.push(EnsembleEntry { draw, chain: meta.chain, weight: meta.weight, assignment });
    }
    if entries.len() != doc.draws.len() {
        return Err(Error::Schema("weights sidecar longer than plan file".into()));
    }
    let mut ensemble = PlanEnsemble::from_entries(map.node_count(), map.ndists(), entries)?;
    ensemble.seed = doc.seed;
    ensemble.stage_acceptance = doc.stage_acceptance;
    ensemble.resampled_stages = doc.resampled_stages;
    Ok(ensemble)
}

fn stats_row_fields(row: &StatsRow) -> Vec<String> {
    let mut fields = vec![
        row.draw.label(),
        row.chain.map(|c| c.to_string()).unwrap_or_default(),
        row.district.to_string(),
        fmt_f64(row.total_pop),
        fmt_f64(row.plan_dev),
        fmt_f64(row.comp_edge),
        fmt_opt(row.comp_polsby),
        row.county_splits.to_string(),
        row.muni_splits.to_string(),
        fmt_f64(row.vap),
    ];
    fields.extend(row.vap_subgroups.iter().map(|&v| fmt_f64(v)));
    fields.push(fmt_opt(row.ndv));
    fields.push(fmt_opt(row.nrv));
    fields.push(fmt_opt(row.ndshare));
    fields.push(fmt_opt(row.e_dvs));
    fields.push(fmt_opt(row.pr_dem));
    fields.push(fmt_opt(row.e_dem));
    fields.push(fmt_opt(row.pbias));
    fields.push(fmt_opt(row.egap));
    for &(adv, arv) in &row.per_year {
        fields.push(fmt_f64(adv));
        fields.push(fmt_f64(arv));
    }
    fields
}

/// Writes the stats table with the documented header, one row per
/// (draw, district). Absent statistics are empty cells.
pub fn write_stats(path: &Path, stats: &StatsTable) -> Result<()> {
    let mut rows = vec![stats.header()];
    rows.extend(stats.rows.iter().map(stats_row_fields));
    atomic_write(path, &csv_bytes(rows)?)
}

/// Reads a stats table back. Draw labels that parse as integers become
/// simulated draws; everything else is a reference.
pub fn read_stats(path: &Path) -> Result<StatsTable> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let base: Vec<String> = StatsTable::default().header();
    if headers.len() < base.len() || headers[..base.len()] != base[..] {
        return Err(Error::Schema("stats file header mismatch".into()));
    }
    let mut years = Vec::new();
    let mut i = base.len();
    while i < headers.len() {
        let adv = &headers[i];
        let year = adv
            .strip_prefix("adv_")
            .ok_or_else(|| Error::Schema(format!("unexpected stats column {adv:?}")))?;
        if headers.get(i + 1).map(String::as_str) != Some(&format!("arv_{year}")) {
            return Err(Error::Schema(format!("adv_{year} without matching arv_{year}")));
        }
        years.push(year.to_string());
        i += 2;
    }
    let parse_f =
        |s: &str| -> Result<f64> { s.parse().map_err(|_| Error::Schema(format!("bad number {s:?}"))) };
    let parse_opt = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            parse_f(s).map(Some)
        }
    };
    let mut rows = Vec::new();
    for record in reader.records() {
        let r = record?;
        let get = |i: usize| r.get(i).unwrap_or_default();
        let draw = match get(0).parse::<u32>() {
            Ok(k) => DrawId::Sim(k),
            Err(_) => DrawId::Reference(get(0).to_string()),
        };
        let chain = if get(1).is_empty() { None } else { Some(parse_f(get(1))? as u32) };
        let mut vap_subgroups = [0.0; 8];
        for (k, slot) in vap_subgroups.iter_mut().enumerate() {
            *slot = parse_f(get(10 + k))?;
        }
        let mut per_year = Vec::new();
        for y in 0..years.len() {
            per_year.push((parse_f(get(26 + 2 * y))?, parse_f(get(27 + 2 * y))?));
        }
        rows.push(StatsRow {
            draw,
            chain,
            district: parse_f(get(2))? as u16,
            total_pop: parse_f(get(3))?,
            plan_dev: parse_f(get(4))?,
            comp_edge: parse_f(get(5))?,
            comp_polsby: parse_opt(get(6))?,
            county_splits: parse_f(get(7))? as u64,
            muni_splits: parse_f(get(8))? as u64,
            vap: parse_f(get(9))?,
            vap_subgroups,
            ndv: parse_opt(get(18))?,
            nrv: parse_opt(get(19))?,
            ndshare: parse_opt(get(20))?,
            e_dvs: parse_opt(get(21))?,
            pr_dem: parse_opt(get(22))?,
            e_dem: parse_opt(get(23))?,
            pbias: parse_opt(get(24))?,
            egap: parse_opt(get(25))?,
            per_year,
        });
    }
    Ok(StatsTable { rows, years })
}

/// Re-serializes a map's attribute table (election columns in sorted
/// order, optional columns included only when any record carries them).
pub fn write_attributes(path: &Path, map: &RedistMap) -> Result<()> {
    let records = map.records();
    let vote_cols: Vec<String> = map.vote_column_names().map(str::to_string).collect();
    let any_cd10 = records.iter().any(|r| r.cd_2010.is_some());
    let any_cd20 = records.iter().any(|r| r.cd_2020.is_some());
    let any_area = records.iter().any(|r| r.area.is_some());
    let any_perim = records.iter().any(|r| r.perimeter.is_some());
    let mut header =
        vec!["geoid".to_string(), "county".to_string(), "muni".to_string(), "pop".to_string(), "vap".to_string()];
    header.extend(VAP_SUBGROUPS.iter().map(|s| s.to_string()));
    header.extend(vote_cols.iter().cloned());
    if any_cd10 {
        header.push("cd_2010".into());
    }
    if any_cd20 {
        header.push("cd_2020".into());
    }
    if any_area {
        header.push("area".into());
    }
    if any_perim {
        header.push("perimeter".into());
    }
    let mut rows = vec![header];
    for r in records {
        let mut row = vec![
            r.geoid.clone(),
            r.county.clone(),
            r.muni.clone().unwrap_or_default(),
            fmt_f64(r.pop),
            fmt_f64(r.vap),
        ];
        row.extend(VAP_SUBGROUPS.iter().map(|name| fmt_f64(r.vap_subgroups[*name])));
        row.extend(vote_cols.iter().map(|c| fmt_f64(*r.votes.get(c).unwrap_or(&0.0))));
        if any_cd10 {
            row.push(r.cd_2010.map(|d| d.to_string()).unwrap_or_default());
        }
        if any_cd20 {
            row.push(r.cd_2020.map(|d| d.to_string()).unwrap_or_default());
        }
        if any_area {
            row.push(r.area.map(fmt_f64).unwrap_or_default());
        }
        if any_perim {
            row.push(r.perimeter.map(fmt_f64).unwrap_or_default());
        }
        rows.push(row);
    }
    atomic_write(path, &csv_bytes(rows)?)
}

/// Re-serializes the adjacency document `{"geoid": [neighbor geoids]}`.
pub fn write_adjacency(path: &Path, map: &RedistMap) -> Result<()> {
    let mut doc: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (i, r) in map.records().iter().enumerate() {
        let neighbors = map
            .graph()
            .neighbors(i)
            .iter()
            .map(|&v| map.records()[v].geoid.clone())
            .collect();
        doc.insert(r.geoid.clone(), neighbors);
    }
    let mut bytes = serde_json::to_vec_pretty(&doc)?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

/// Validates stored plans against the hard constraints: contiguity for
/// everything, parity and the split cap for non-reference draws. Returns
/// the offending draw labels.
pub fn verify_hard_constraints(
    map: &RedistMap,
    ensemble: &PlanEnsemble,
    pop_tol: f64,
    split_cap_units: Option<&str>,
) -> Result<Vec<String>> {
    let mut bad = Vec::new();
    let cap_labels = match split_cap_units {
        Some(name) => Some(
            map.admin_unit(name)
                .ok_or_else(|| Error::Config(format!("unknown admin unit {name:?}")))?,
        ),
        None => None,
    };
    for entry in ensemble.entries() {
        let plan = match Plan::new(entry.assignment.clone(), ensemble.ndists()) {
            Ok(p) => p,
            Err(_) => {
                bad.push(entry.draw.label());
                continue;
            }
        };
        if !crate::graph::is_contiguous(map.graph(), &plan)? {
            bad.push(entry.draw.label());
            continue;
        }
        if entry.draw.is_reference() {
            continue;
        }
        if crate::metrics::plan_dev(&plan, map.pops())? > pop_tol + 1e-12 {
            bad.push(entry.draw.label());
            continue;
        }
        if let Some(labels) = cap_labels {
            if crate::metrics::splits_count(&plan, labels)? > map.ndists() as u64 - 1 {
                bad.push(entry.draw.label());
            }
        }
    }
    Ok(bad)
}
