//! Census and survey ingestion: village asset vectors, tehsil-level vectors
//! for both census rounds, district health vectors and demographics.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{AoiFootprint, LatLon};

mod factors;

pub use factors::HEALTH_FACTOR_DESCRIPTIONS;

/// Census row keyed by bracketed column index.
pub type CensusRow = BTreeMap<u32, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VillageRecord {
    pub village_id: String,
    pub lat: f64,
    pub lon: f64,
    pub population: f64,
    pub tehsil_id: String,
    pub district_id: String,
    pub state_id: String,
}

impl VillageRecord {
    pub fn centroid(&self) -> LatLon {
        LatLon::new(self.lat, self.lon)
    }

    pub fn footprint(&self) -> AoiFootprint {
        AoiFootprint::new(self.village_id.clone(), self.centroid())
    }
}

pub const ASSET_NAMES: [&str; 16] = [
    "rooms-under-3",
    "household-size-under-5",
    "water-treated",
    "water-untreated",
    "water-natural",
    "electric-like",
    "oil-like",
    "electronics",
    "has-phone",
    "transport-cycle",
    "transport-motorized",
    "no-assets",
    "banking-services-availability",
    "cook-fuel-processed",
    "bathroom-within",
    "permanent-house",
];

/// Village-level aggregation: sum of the listed columns divided by `divisor`.
pub struct AssetFormula {
    pub columns: &'static [u32],
    pub divisor: f64,
}

const fn sum(columns: &'static [u32]) -> AssetFormula {
    AssetFormula { columns, divisor: 1.0 }
}

/// Source columns of the 2011 household amenities table, in [`ASSET_NAMES`] order.
pub const ASSET_FORMULAS: [AssetFormula; 16] = [
    sum(&[49, 50, 51]),
    sum(&[56, 57, 58, 59]),
    sum(&[72, 74, 77]),
    sum(&[73, 75]),
    sum(&[76, 78, 79, 80, 81]),
    sum(&[85, 87]),
    sum(&[86, 88, 89]),
    AssetFormula {
        columns: &[128, 129, 130, 131],
        divisor: 3.0,
    },
    sum(&[132, 133, 134]),
    sum(&[135]),
    sum(&[136, 137]),
    sum(&[139]),
    sum(&[127]),
    sum(&[113, 114, 115]),
    sum(&[103, 104]),
    sum(&[140]),
];

/// Every column referenced by [`ASSET_FORMULAS`], ascending.
pub fn asset_columns() -> Vec<u32> {
    let mut cols: Vec<u32> = ASSET_FORMULAS.iter().flat_map(|f| f.columns.iter().copied()).collect();
    cols.sort_unstable();
    cols.dedup();
    cols
}

/// Sixteen household-asset fractions of a village, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssetVector16(pub [f64; 16]);

impl AssetVector16 {
    pub fn get(&self, name: &str) -> Option<f64> {
        ASSET_NAMES.iter().position(|n| *n == name).map(|i| self.0[i])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Applies each aggregation to a row of household percentages, converts to a
/// fraction and clamps to [0, 1].
pub fn build_asset_vector(row: &CensusRow) -> Result<AssetVector16> {
    let mut out = [0.0; 16];
    for (k, f) in ASSET_FORMULAS.iter().enumerate() {
        let mut total = 0.0;
        for col in f.columns {
            total += row.get(col).copied().ok_or_else(|| {
                Error::schema(format!("census column [{col}] missing (needed by {})", ASSET_NAMES[k]))
            })?;
        }
        out[k] = (total / f.divisor / 100.0).clamp(0.0, 1.0);
    }
    Ok(AssetVector16(out))
}

/// Census round of a tehsil table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CensusYear {
    Y2001,
    Y2011,
}

impl CensusYear {
    pub fn year(self) -> i32 {
        match self {
            CensusYear::Y2001 => 2001,
            CensusYear::Y2011 => 2011,
        }
    }

    pub fn from_year(year: i32) -> Result<Self> {
        match year {
            2001 => Ok(CensusYear::Y2001),
            2011 => Ok(CensusYear::Y2011),
            other => Err(Error::input(format!("no census round {other}"))),
        }
    }

    /// Tables that feed the tehsil vector for this round.
    pub fn tables(self) -> &'static [&'static str] {
        match self {
            CensusYear::Y2001 => &["H-9", "H-10", "H-11", "H-13"],
            CensusYear::Y2011 => &["HH-7", "HH-10", "HH-12"],
        }
    }
}

pub const TEHSIL_NAMES: [&str; 10] = [
    "electric-like",
    "oil-like",
    "electronics",
    "has-phone",
    "transport-cycle",
    "transport-motorized",
    "no-assets",
    "banking-services-availability",
    "cook-fuel-processed",
    "bathroom-within",
];

/// Position of each tehsil variable inside [`ASSET_NAMES`].
pub const TEHSIL_TO_ASSET: [usize; 10] = [5, 6, 7, 8, 9, 10, 11, 12, 13, 14];

/// Ratio of a weighted column sum to a denominator column, within one table.
pub struct TehsilFormula {
    pub table: &'static str,
    pub numerator: &'static [(u32, f64)],
    pub denominator: u32,
}

const fn ratio(table: &'static str, numerator: &'static [(u32, f64)], denominator: u32) -> TehsilFormula {
    TehsilFormula {
        table,
        numerator,
        denominator,
    }
}

const THIRD: f64 = 1.0 / 3.0;

pub const TEHSIL_FORMULAS_2011: [TehsilFormula; 10] = [
    ratio("HH-7", &[(9, 1.0), (11, 1.0)], 8),
    ratio("HH-7", &[(10, 1.0), (12, 1.0)], 8),
    ratio(
        "HH-12",
        &[(10, THIRD), (11, THIRD), (12, THIRD), (13, THIRD), (20, 1.0)],
        8,
    ),
    ratio("HH-12", &[(14, 1.0), (15, 1.0), (16, 1.0)], 8),
    ratio("HH-12", &[(17, 1.0)], 8),
    ratio("HH-12", &[(18, 1.0), (19, 1.0)], 8),
    ratio("HH-12", &[(21, 1.0)], 8),
    ratio("HH-12", &[(9, 1.0)], 8),
    ratio("HH-10", &[(14, 1.0), (15, 1.0)], 9),
    ratio("HH-10", &[(9, 1.0)], 8),
];

pub const TEHSIL_FORMULAS_2001: [TehsilFormula; 10] = [
    ratio("H-9", &[(3, 1.0), (5, 1.0)], 2),
    ratio("H-9", &[(4, 1.0), (6, 1.0)], 2),
    ratio("H-13", &[(4, 1.0), (5, 1.0)], 2),
    ratio("H-13", &[(6, 1.0)], 2),
    ratio("H-13", &[(7, 1.0)], 2),
    ratio("H-13", &[(8, 1.0), (9, 1.0)], 2),
    ratio("H-13", &[(10, 1.0)], 2),
    ratio("H-13", &[(3, 1.0)], 2),
    ratio("H-10", &[(8, 1.0), (9, 1.0)], 3),
    ratio("H-11", &[(3, 1.0)], 2),
];

pub fn tehsil_formulas(year: CensusYear) -> &'static [TehsilFormula; 10] {
    match year {
        CensusYear::Y2001 => &TEHSIL_FORMULAS_2001,
        CensusYear::Y2011 => &TEHSIL_FORMULAS_2011,
    }
}

/// Household counts of one tehsil, per census table and column.
pub type TehsilTables = BTreeMap<String, CensusRow>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TehsilVector10 {
    pub year: CensusYear,
    pub values: [f64; 10],
}

/// Builds the ten tehsil fractions for one round. A zero denominator is
/// reported as an input error so the caller can exclude the tehsil.
pub fn build_tehsil_vector(tables: &TehsilTables, year: CensusYear) -> Result<TehsilVector10> {
    let mut values = [0.0; 10];
    for (k, f) in tehsil_formulas(year).iter().enumerate() {
        let table = tables
            .get(f.table)
            .ok_or_else(|| Error::schema(format!("table {} missing", f.table)))?;
        let col = |c: u32| {
            table
                .get(&c)
                .copied()
                .ok_or_else(|| Error::schema(format!("{} column [{c}] missing", f.table)))
        };
        let denom = col(f.denominator)?;
        if denom <= 0.0 {
            return Err(Error::input(format!(
                "{} denominator [{}] is zero for {}",
                f.table, f.denominator, TEHSIL_NAMES[k]
            )));
        }
        let mut num = 0.0;
        for (c, w) in f.numerator {
            num += w * col(*c)?;
        }
        values[k] = (num / denom).clamp(0.0, 1.0);
    }
    Ok(TehsilVector10 { year, values })
}

/// Builds vectors for every tehsil, skipping (and logging) those with a zero denominator.
pub fn build_tehsil_vectors(
    tehsils: &BTreeMap<String, TehsilTables>,
    year: CensusYear,
) -> Result<BTreeMap<String, TehsilVector10>> {
    let mut out = BTreeMap::new();
    for (id, tables) in tehsils {
        match build_tehsil_vector(tables, year) {
            Ok(v) => {
                out.insert(id.clone(), v);
            }
            Err(Error::Input(msg)) => log::warn!("tehsil {id} excluded: {msg}"),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

pub const HEALTH_FACTORS: usize = 93;

/// Factors reported per 1,000 (sex ratios) or as a currency amount rather than a percentage.
pub const NON_PERCENT_FACTORS: [usize; 3] = [3, 4, 37];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SurveyRound {
    Nfhs4,
    Nfhs5,
}

impl SurveyRound {
    pub fn label(self) -> &'static str {
        match self {
            SurveyRound::Nfhs4 => "NFHS-4",
            SurveyRound::Nfhs5 => "NFHS-5",
        }
    }
}

/// District health outcomes; `None` marks a factor absent for the district.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthVector93 {
    pub round: SurveyRound,
    pub values: Vec<Option<f64>>,
}

impl HealthVector93 {
    pub fn new(round: SurveyRound, values: Vec<Option<f64>>) -> Result<Self> {
        if values.len() != HEALTH_FACTORS {
            return Err(Error::schema(format!(
                "health vector needs {HEALTH_FACTORS} factors, got {}",
                values.len()
            )));
        }
        for (i, v) in values.iter().enumerate() {
            let factor = i + 1;
            if let Some(v) = v {
                let ok = if NON_PERCENT_FACTORS.contains(&factor) {
                    *v >= 0.0
                } else {
                    (0.0..=100.0).contains(v)
                };
                if !ok || !v.is_finite() {
                    return Err(Error::input(format!("factor-{factor} value {v} out of range")));
                }
            }
        }
        Ok(HealthVector93 { round, values })
    }
}

/// Outcome of reading a survey export.
#[derive(Debug, Clone, Default)]
pub struct SurveyLoad {
    pub vectors: BTreeMap<String, HealthVector93>,
    pub rejected_rows: Vec<usize>,
}

/// Reads `district_id,factor-1..factor-93`. Rows with fewer than 93 factors
/// or unparsable values are rejected and logged; empty cells are absent.
pub fn load_health_vectors(path: &Path, round: SurveyRound) -> Result<SurveyLoad> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(true)
        .from_path(path)?;
    let mut out = SurveyLoad::default();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() < HEALTH_FACTORS + 1 {
            log::warn!("{}:{line}: {} columns, expected {}", path.display(), rec.len(), HEALTH_FACTORS + 1);
            out.rejected_rows.push(line);
            continue;
        }
        let parsed: std::result::Result<Vec<Option<f64>>, _> = rec
            .iter()
            .skip(1)
            .take(HEALTH_FACTORS)
            .map(|s| {
                let s = s.trim();
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse::<f64>().map(Some)
                }
            })
            .collect();
        let vector = parsed
            .map_err(|e| Error::input(e.to_string()))
            .and_then(|v| HealthVector93::new(round, v));
        match vector {
            Ok(v) => {
                out.vectors.insert(rec[0].to_string(), v);
            }
            Err(e) => {
                log::warn!("{}:{line}: row rejected: {e}", path.display());
                out.rejected_rows.push(line);
            }
        }
    }
    Ok(out)
}

pub fn write_health_vectors(path: &Path, vectors: &BTreeMap<String, HealthVector93>) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["district_id".to_string()];
    header.extend((1..=HEALTH_FACTORS).map(|k| format!("factor-{k}")));
    w.write_record(&header)?;
    for (id, v) in vectors {
        let mut row = vec![id.clone()];
        row.extend(v.values.iter().map(|x| x.map(|x| x.to_string()).unwrap_or_default()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub const DEMOGRAPHIC_NAMES: [&str; 4] = [
    "literacy_rate",
    "working_population_share",
    "scheduled_caste_share",
    "scheduled_tribe_share",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemographicVector {
    pub literacy_rate: f64,
    pub working_population_share: f64,
    pub scheduled_caste_share: f64,
    pub scheduled_tribe_share: f64,
}

impl DemographicVector {
    pub fn to_array(&self) -> [f64; 4] {
        [
            self.literacy_rate,
            self.working_population_share,
            self.scheduled_caste_share,
            self.scheduled_tribe_share,
        ]
    }

    pub fn from_array(v: [f64; 4]) -> Result<Self> {
        if v.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::input(format!("demographic shares {v:?} outside [0, 1]")));
        }
        Ok(DemographicVector {
            literacy_rate: v[0],
            working_population_share: v[1],
            scheduled_caste_share: v[2],
            scheduled_tribe_share: v[3],
        })
    }
}

/// Opens a CSV file for reading; failures name the path.
pub(crate) fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    File::open(path).map(csv::Reader::from_reader).map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    File::create(path).map(csv::Writer::from_writer).map_err(|e| Error::io(path, e))
}

fn header_column(name: &str) -> Option<u32> {
    name.trim().strip_prefix('[')?.strip_suffix(']')?.parse().ok()
}

/// Reads a census CSV whose first column is an id and remaining headers are `[n]`.
pub fn read_census_rows(path: &Path) -> Result<BTreeMap<String, CensusRow>> {
    let mut rdr = csv_reader(path)?;
    let headers = rdr.headers()?.clone();
    let cols: Vec<Option<u32>> = headers.iter().map(header_column).collect();
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let mut row = CensusRow::new();
        for (i, field) in rec.iter().enumerate().skip(1) {
            let Some(col) = cols.get(i).copied().flatten() else {
                continue;
            };
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::format(path, format!("column [{col}]: bad value '{field}'")))?;
            row.insert(col, v);
        }
        out.insert(rec[0].to_string(), row);
    }
    Ok(out)
}

pub fn write_census_rows(path: &Path, id_header: &str, rows: &BTreeMap<String, CensusRow>) -> Result<()> {
    let mut cols: Vec<u32> = rows.values().flat_map(|r| r.keys().copied()).collect();
    cols.sort_unstable();
    cols.dedup();
    let mut w = csv_writer(path)?;
    let mut header = vec![id_header.to_string()];
    header.extend(cols.iter().map(|c| format!("[{c}]")));
    w.write_record(&header)?;
    for (id, row) in rows {
        let mut rec = vec![id.clone()];
        for c in &cols {
            rec.push(row.get(c).map(|v| v.to_string()).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads one census table per tehsil from `dir/<table>.csv`.
pub fn read_tehsil_tables(dir: &Path, year: CensusYear) -> Result<BTreeMap<String, TehsilTables>> {
    let mut out: BTreeMap<String, TehsilTables> = BTreeMap::new();
    for table in year.tables() {
        let rows = read_census_rows(&dir.join(format!("{table}.csv")))?;
        for (tehsil, row) in rows {
            out.entry(tehsil).or_default().insert(table.to_string(), row);
        }
    }
    Ok(out)
}

pub fn write_tehsil_tables(dir: &Path, year: CensusYear, tehsils: &BTreeMap<String, TehsilTables>) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for table in year.tables() {
        let rows: BTreeMap<String, CensusRow> = tehsils
            .iter()
            .filter_map(|(id, t)| t.get(*table).map(|r| (id.clone(), r.clone())))
            .collect();
        write_census_rows(&dir.join(format!("{table}.csv")), "tehsil_id", &rows)?;
    }
    Ok(())
}

pub fn read_village_manifest(path: &Path) -> Result<Vec<VillageRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: VillageRecord = serde_json::from_str(&line)
            .map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))?;
        if !(rec.population >= 0.0) {
            return Err(Error::format(path, format!("line {}: negative population", i + 1)));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_village_manifest(path: &Path, villages: &[VillageRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for v in villages {
        serde_json::to_writer(&mut w, v)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads `village_id` plus the four demographic percentages.
pub fn read_demographics(path: &Path) -> Result<BTreeMap<String, DemographicVector>> {
    let mut rdr = csv_reader(path)?;
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() < 5 {
            return Err(Error::format(path, "demographic rows need 5 columns"));
        }
        let mut v = [0.0; 4];
        for (k, slot) in v.iter_mut().enumerate() {
            let pct: f64 = rec[k + 1]
                .trim()
                .parse()
                .map_err(|_| Error::format(path, format!("bad value '{}'", &rec[k + 1])))?;
            *slot = pct / 100.0;
        }
        out.insert(rec[0].to_string(), DemographicVector::from_array(v)?);
    }
    Ok(out)
}

pub fn write_demographics(path: &Path, rows: &BTreeMap<String, DemographicVector>) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["village_id".to_string()];
    header.extend(DEMOGRAPHIC_NAMES.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for (id, d) in rows {
        let mut rec = vec![id.clone()];
        rec.extend(d.to_array().iter().map(|v| (v * 100.0).to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes asset vectors in percentage units, one column per asset.
pub fn write_asset_vectors(path: &Path, rows: &BTreeMap<String, AssetVector16>) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["village_id".to_string()];
    header.extend(ASSET_NAMES.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for (id, v) in rows {
        let mut rec = vec![id.clone()];
        rec.extend(v.0.iter().map(|x| (x * 100.0).to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_asset_vectors(path: &Path) -> Result<BTreeMap<String, AssetVector16>> {
    let mut rdr = csv_reader(path)?;
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 17 {
            return Err(Error::format(path, format!("asset rows need 17 columns, got {}", rec.len())));
        }
        let mut v = [0.0; 16];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = rec[k + 1]
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::format(path, format!("bad value '{}'", &rec[k + 1])))?
                / 100.0;
        }
        out.insert(rec[0].to_string(), AssetVector16(v));
    }
    Ok(out)
}
