//! Network scenarios: cells, sector groups, users, budgets.
//!
//! A scenario describes which users sit in which sector of which cell, what
//! traffic they carry, which sectors overlap the radar band, and how much
//! spectrum each stage may hand out. Sectors with the same index are pooled
//! across cells into one group because they price against the same band.
//!
//! Scenarios load from and save to a single TOML document. Saving is
//! canonical: loading a saved document and saving it again reproduces the
//! bytes exactly, which keeps golden files stable.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::utility::UtilityFunction;

/// Current scenario document schema.
pub const SCHEMA_VERSION: u32 = 1;

/// A base station site; its users are listed in [`Scenario::ues`].
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub id: String,
}

/// One user: where it is attached and what it wants.
#[derive(Debug, Clone, PartialEq)]
pub struct Ue {
    pub id: String,
    pub cell: String,
    /// 1-based sector index inside the cell.
    pub sector: usize,
    pub utility: UtilityFunction,
}

/// Users of one sector index pooled across every cell. They bid into the
/// same band and therefore see one budget and one shadow price.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorGroup {
    /// 1-based sector index.
    pub index: usize,
    /// Positions into [`Scenario::ues`], in roster order.
    pub members: Vec<usize>,
    /// Whether this sector overlaps the radar band.
    pub interfering: bool,
}

/// A complete allocation problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub cells: Vec<Cell>,
    /// Number of sectors per cell (and of pooled sector groups).
    pub sector_count: usize,
    pub ues: Vec<Ue>,
    /// `interference_mask[l - 1]` is true when sector `l` overlaps the radar band.
    pub interference_mask: Vec<bool>,
    pub r_radar_total: f64,
    pub r_comm_total: f64,
    /// `r_max` applied to log utilities that do not override it.
    pub default_log_r_max: f64,
}

impl Scenario {
    /// Pools each sector index across cells into one group.
    pub fn sector_groups(&self) -> Vec<SectorGroup> {
        (1..=self.sector_count)
            .map(|index| SectorGroup {
                index,
                members: self
                    .ues
                    .iter()
                    .enumerate()
                    .filter(|(_, ue)| ue.sector == index)
                    .map(|(i, _)| i)
                    .collect(),
                interfering: self.interference_mask[index - 1],
            })
            .collect()
    }

    /// Number of users attached to a cell.
    pub fn cell_ue_count(&self, cell_id: &str) -> usize {
        self.ues.iter().filter(|ue| ue.cell == cell_id).count()
    }

    /// Copy of the scenario with the radar mask cleared, the "no radar in
    /// the vicinity" baseline.
    pub fn without_interference(&self) -> Scenario {
        let mut s = self.clone();
        s.interference_mask = vec![false; s.sector_count];
        s
    }

    fn validate(&self) -> Result<()> {
        if self.sector_count == 0 {
            return Err(Error::Validation("sector count must be at least 1".into()));
        }
        if self.interference_mask.len() != self.sector_count {
            return Err(Error::Validation(format!(
                "interference mask covers {} sectors, expected {}",
                self.interference_mask.len(),
                self.sector_count
            )));
        }
        if !self.r_radar_total.is_finite() || self.r_radar_total < 0.0 {
            return Err(Error::Validation(format!(
                "r_radar_total must be non-negative and finite, got {}",
                self.r_radar_total
            )));
        }
        if !self.r_comm_total.is_finite() || self.r_comm_total < 0.0 {
            return Err(Error::Validation(format!(
                "r_comm_total must be non-negative and finite, got {}",
                self.r_comm_total
            )));
        }
        if !self.default_log_r_max.is_finite() || self.default_log_r_max <= 0.0 {
            return Err(Error::Validation(format!(
                "default_log_r_max must be positive and finite, got {}",
                self.default_log_r_max
            )));
        }
        if self.cells.is_empty() {
            return Err(Error::Validation("a scenario needs at least one cell".into()));
        }
        let mut cell_ids = BTreeSet::new();
        for cell in &self.cells {
            if cell.id.is_empty() {
                return Err(Error::Validation("cell ids must be non-empty".into()));
            }
            if !cell_ids.insert(cell.id.as_str()) {
                return Err(Error::Validation(format!("duplicate cell id {:?}", cell.id)));
            }
        }
        if self.ues.is_empty() {
            return Err(Error::Validation("a scenario needs at least one UE".into()));
        }
        let mut ue_ids = BTreeSet::new();
        for ue in &self.ues {
            if ue.id.is_empty() {
                return Err(Error::Validation("UE ids must be non-empty".into()));
            }
            if !ue_ids.insert(ue.id.as_str()) {
                return Err(Error::Validation(format!("duplicate UE id {:?}", ue.id)));
            }
            if !cell_ids.contains(ue.cell.as_str()) {
                return Err(Error::Validation(format!(
                    "UE {:?} references unknown cell {:?}",
                    ue.id, ue.cell
                )));
            }
            if ue.sector == 0 || ue.sector > self.sector_count {
                return Err(Error::Validation(format!(
                    "UE {:?} sector {} is outside 1..={}",
                    ue.id, ue.sector, self.sector_count
                )));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// built-in scenario
// ---------------------------------------------------------------------------

/// The reference network: three cells (A, B, C), three sectors each, six
/// users per sector alternating three sigmoidal and three logarithmic
/// profiles, sector 3 overlapping the radar band, and budgets of 200 radar
/// and 400 communication bandwidth units.
pub fn builtin_table1() -> Scenario {
    // (sigmoid (a, b) triples, log k triples) per (cell, sector)
    let sig: [[(f64, f64); 3]; 9] = [
        [(3.0, 10.0), (3.0, 10.3), (1.0, 10.6)], // A sector 1
        [(3.0, 10.0), (3.0, 15.3), (3.0, 12.0)], // A sector 2
        [(3.0, 15.1), (3.0, 15.3), (3.0, 15.5)], // A sector 3
        [(3.0, 15.9), (3.0, 11.2), (1.0, 11.5)], // B sector 1
        [(3.0, 13.0), (3.0, 14.0), (1.0, 15.0)], // B sector 2
        [(3.0, 15.7), (3.0, 15.9), (3.0, 17.3)], // B sector 3
        [(3.0, 11.8), (3.0, 12.1), (1.0, 12.4)], // C sector 1
        [(3.0, 16.0), (3.0, 17.0), (1.0, 18.0)], // C sector 2
        [(3.0, 17.5), (3.0, 17.7), (3.0, 17.9)], // C sector 3
    ];
    let log_k: [[f64; 3]; 9] = [
        [1.1, 1.2, 1.3], // A sector 1
        [1.0, 2.0, 3.0], // A sector 2
        [10.0, 11.0, 12.0], // A sector 3
        [1.4, 1.5, 1.6], // B sector 1
        [4.0, 5.0, 6.0], // B sector 2
        [13.0, 14.0, 15.0], // B sector 3
        [1.7, 1.8, 1.9], // C sector 1
        [7.0, 8.0, 9.0], // C sector 2
        [16.0, 17.0, 18.0], // C sector 3
    ];
    let default_log_r_max = 100.0;
    let mut ues = Vec::with_capacity(54);
    for (block, cell) in ["A", "B", "C"].iter().enumerate() {
        for sector in 1..=3usize {
            let row = block * 3 + sector - 1;
            let base = (sector - 1) * 6;
            for i in 0..3 {
                let (a, b) = sig[row][i];
                ues.push(Ue {
                    id: format!("{cell}{}", base + i + 1),
                    cell: cell.to_string(),
                    sector,
                    utility: UtilityFunction::sigmoid(a, b).expect("static parameters"),
                });
            }
            for i in 0..3 {
                ues.push(Ue {
                    id: format!("{cell}{}", base + i + 4),
                    cell: cell.to_string(),
                    sector,
                    utility: UtilityFunction::logarithmic(log_k[row][i], default_log_r_max)
                        .expect("static parameters"),
                });
            }
        }
    }
    let scenario = Scenario {
        cells: ["A", "B", "C"].iter().map(|id| Cell { id: id.to_string() }).collect(),
        sector_count: 3,
        ues,
        interference_mask: vec![false, false, true],
        r_radar_total: 200.0,
        r_comm_total: 400.0,
        default_log_r_max,
    };
    scenario.validate().expect("builtin scenario is valid");
    scenario
}

// ---------------------------------------------------------------------------
// TOML document
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    schema_version: u32,
    #[serde(default)]
    interference: Vec<usize>,
    budgets: BudgetsDoc,
    sectors: SectorsDoc,
    #[serde(default)]
    defaults: DefaultsDoc,
    cells: Vec<CellDoc>,
    ues: Vec<UeDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BudgetsDoc {
    r_radar_total: f64,
    r_comm_total: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SectorsDoc {
    count: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DefaultsDoc {
    log_r_max: f64,
}

impl Default for DefaultsDoc {
    fn default() -> Self {
        DefaultsDoc { log_r_max: 100.0 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellDoc {
    id: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct UeDoc {
    id: String,
    cell: String,
    sector: usize,
    utility: UtilityDoc,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum UtilityDoc {
    Sigmoid { a: f64, b: f64 },
    Log { k: f64, r_max: Option<f64> },
}

/// Parses and validates a scenario document.
pub fn load_scenario(text: &str) -> Result<Scenario> {
    let doc: ScenarioDoc = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(Error::Validation(format!(
            "unsupported schema_version {}, expected {}",
            doc.schema_version, SCHEMA_VERSION
        )));
    }
    let mut interference_mask = vec![false; doc.sectors.count];
    for &sector in &doc.interference {
        if sector == 0 || sector > doc.sectors.count {
            return Err(Error::Validation(format!(
                "interference lists sector {}, outside 1..={}",
                sector, doc.sectors.count
            )));
        }
        interference_mask[sector - 1] = true;
    }
    let default_log_r_max = doc.defaults.log_r_max;
    let mut ues = Vec::with_capacity(doc.ues.len());
    for ue in doc.ues {
        let utility = match ue.utility {
            UtilityDoc::Sigmoid { a, b } => UtilityFunction::sigmoid(a, b),
            UtilityDoc::Log { k, r_max } => {
                UtilityFunction::logarithmic(k, r_max.unwrap_or(default_log_r_max))
            }
        }
        .map_err(|e| Error::Validation(format!("UE {:?}: {e}", ue.id)))?;
        ues.push(Ue { id: ue.id, cell: ue.cell, sector: ue.sector, utility });
    }
    let scenario = Scenario {
        cells: doc.cells.into_iter().map(|c| Cell { id: c.id }).collect(),
        sector_count: doc.sectors.count,
        ues,
        interference_mask,
        r_radar_total: doc.budgets.r_radar_total,
        r_comm_total: doc.budgets.r_comm_total,
        default_log_r_max,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Serializes a scenario in canonical form.
///
/// Field order, whitespace, and float formatting are fixed, so the output is
/// byte-stable: `save(load(save(s))) == save(s)`.
pub fn save_scenario(scenario: &Scenario) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "schema_version = {}", SCHEMA_VERSION);
    let interfering: Vec<String> = scenario
        .interference_mask
        .iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(i, _)| (i + 1).to_string())
        .collect();
    let _ = writeln!(out, "interference = [{}]", interfering.join(", "));
    out.push('\n');
    out.push_str("[budgets]\n");
    let _ = writeln!(out, "r_radar_total = {}", fmt_f64(scenario.r_radar_total));
    let _ = writeln!(out, "r_comm_total = {}", fmt_f64(scenario.r_comm_total));
    out.push('\n');
    out.push_str("[sectors]\n");
    let _ = writeln!(out, "count = {}", scenario.sector_count);
    out.push('\n');
    out.push_str("[defaults]\n");
    let _ = writeln!(out, "log_r_max = {}", fmt_f64(scenario.default_log_r_max));
    for cell in &scenario.cells {
        out.push('\n');
        out.push_str("[[cells]]\n");
        let _ = writeln!(out, "id = {:?}", cell.id);
    }
    for ue in &scenario.ues {
        out.push('\n');
        out.push_str("[[ues]]\n");
        let _ = writeln!(out, "id = {:?}", ue.id);
        let _ = writeln!(out, "cell = {:?}", ue.cell);
        let _ = writeln!(out, "sector = {}", ue.sector);
        let _ = match ue.utility {
            UtilityFunction::Sigmoid(p) => writeln!(
                out,
                "utility = {{ type = \"sigmoid\", a = {}, b = {} }}",
                fmt_f64(p.a()),
                fmt_f64(p.b())
            ),
            UtilityFunction::Log(p) => writeln!(
                out,
                "utility = {{ type = \"log\", k = {}, r_max = {} }}",
                fmt_f64(p.k()),
                fmt_f64(p.r_max())
            ),
        };
    }
    out
}

/// Shortest decimal form that round-trips, always with a decimal point so
/// the TOML value stays a float.
fn fmt_f64(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{v:.1}")
    } else {
        format!("{v}")
    }
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------
