//! Region-by-variable tables: loading, validation, serialization and
//! removal of unpopulated or non-spatial regions.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tokens (besides the empty field) that parse to a missing cell.
pub const MISSING_TOKEN: &str = "NA";

/// Default screening fraction for [`validate_dataset`].
pub const DEFAULT_SCREEN_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum State {
    Nsw,
    Vic,
    Qld,
    Sa,
    Wa,
    Tas,
    Nt,
    Act,
    Other,
}

impl State {
    pub const ALL: [State; 9] = [
        State::Nsw,
        State::Vic,
        State::Qld,
        State::Sa,
        State::Wa,
        State::Tas,
        State::Nt,
        State::Act,
        State::Other,
    ];

    pub fn code(self) -> &'static str {
        match self {
            State::Nsw => "NSW",
            State::Vic => "VIC",
            State::Qld => "QLD",
            State::Sa => "SA",
            State::Wa => "WA",
            State::Tas => "TAS",
            State::Nt => "NT",
            State::Act => "ACT",
            State::Other => "OTHER",
        }
    }
}

impl FromStr for State {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        State::ALL
            .into_iter()
            .find(|st| st.code() == s)
            .ok_or_else(|| format!("unknown state code `{s}`"))
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Five-level remoteness classification, coded 1 (Major Cities) to 5 (Very Remote).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Remoteness {
    MajorCities = 1,
    InnerRegional = 2,
    OuterRegional = 3,
    Remote = 4,
    VeryRemote = 5,
}

impl Remoteness {
    pub const ALL: [Remoteness; 5] = [
        Remoteness::MajorCities,
        Remoteness::InnerRegional,
        Remoteness::OuterRegional,
        Remoteness::Remote,
        Remoteness::VeryRemote,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Remoteness::ALL.into_iter().find(|r| r.code() == code)
    }

    pub fn label(self) -> &'static str {
        match self {
            Remoteness::MajorCities => "Major Cities",
            Remoteness::InnerRegional => "Inner Regional",
            Remoteness::OuterRegional => "Outer Regional",
            Remoteness::Remote => "Remote",
            Remoteness::VeryRemote => "Very Remote",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub region_id: String,
    pub name: String,
    pub state: Option<State>,
    pub remoteness: Option<Remoteness>,
    /// False for entries without a boundary (migratory, no usual address, ...).
    pub is_spatial: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    #[default]
    None,
    Log1p,
}

impl Transform {
    pub fn as_str(self) -> &'static str {
        match self {
            Transform::None => "none",
            Transform::Log1p => "log1p",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableMeta {
    pub short_form: String,
    pub long_name: String,
    pub transform_applied: Transform,
}

impl VariableMeta {
    pub fn new(short_form: impl Into<String>, long_name: impl Into<String>) -> Self {
        VariableMeta {
            short_form: short_form.into(),
            long_name: long_name.into(),
            transform_applied: Transform::None,
        }
    }
}

/// Region-by-variable table. Rows follow region order, columns follow
/// variable order; `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    regions: Vec<RegionRecord>,
    variables: Vec<VariableMeta>,
    values: Vec<Option<f64>>,
}

impl Dataset {
    /// Builds a dataset from row-major cells, checking shape, key
    /// uniqueness and finiteness.
    pub fn new(
        regions: Vec<RegionRecord>,
        variables: Vec<VariableMeta>,
        values: Vec<Option<f64>>,
    ) -> Result<Self> {
        if values.len() != regions.len() * variables.len() {
            return Err(Error::Dimension(format!(
                "{} cells for {} regions x {} variables",
                values.len(),
                regions.len(),
                variables.len()
            )));
        }
        check_unique(regions.iter().map(|r| r.region_id.as_str()), "region_id")?;
        check_unique(variables.iter().map(|v| v.short_form.as_str()), "short_form")?;
        if let Some(i) = values.iter().position(|v| v.is_some_and(|x| !x.is_finite())) {
            let p = variables.len();
            return Err(Error::NonFinite(format!(
                "region `{}`, variable `{}`",
                regions[i / p].region_id,
                variables[i % p].short_form
            )));
        }
        Ok(Dataset {
            regions,
            variables,
            values,
        })
    }

    /// Builds a dataset from complete columns.
    pub fn from_columns(
        regions: Vec<RegionRecord>,
        variables: Vec<VariableMeta>,
        columns: &[Vec<f64>],
    ) -> Result<Self> {
        let n = regions.len();
        if columns.len() != variables.len() || columns.iter().any(|c| c.len() != n) {
            return Err(Error::Dimension(
                "column count or column length does not match metadata".into(),
            ));
        }
        let p = columns.len();
        let mut values = Vec::with_capacity(n * p);
        for i in 0..n {
            for c in columns {
                values.push(Some(c[i]));
            }
        }
        Dataset::new(regions, variables, values)
    }

    pub fn n_regions(&self) -> usize {
        self.regions.len()
    }

    pub fn n_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn regions(&self) -> &[RegionRecord] {
        &self.regions
    }

    pub fn variables(&self) -> &[VariableMeta] {
        &self.variables
    }

    pub fn region_ids(&self) -> Vec<String> {
        self.regions.iter().map(|r| r.region_id.clone()).collect()
    }

    pub fn short_forms(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.short_form.clone()).collect()
    }

    pub fn variable_index(&self, short_form: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.short_form == short_form)
    }

    pub fn get(&self, region: usize, variable: usize) -> Option<f64> {
        self.values[region * self.variables.len() + variable]
    }

    pub fn row(&self, region: usize) -> &[Option<f64>] {
        let p = self.variables.len();
        &self.values[region * p..(region + 1) * p]
    }

    pub fn column(&self, variable: usize) -> Vec<Option<f64>> {
        (0..self.n_regions()).map(|i| self.get(i, variable)).collect()
    }

    /// Column values, failing if any cell is missing.
    pub fn complete_column(&self, variable: usize) -> Result<Vec<f64>> {
        self.column(variable)
            .into_iter()
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| Error::MissingValues(self.variables[variable].short_form.clone()))
    }

    pub fn complete_columns(&self) -> Result<Vec<Vec<f64>>> {
        (0..self.n_variables())
            .map(|j| self.complete_column(j))
            .collect()
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    pub fn keep_regions(&self, keep: &[usize]) -> Dataset {
        let p = self.n_variables();
        let mut values = Vec::with_capacity(keep.len() * p);
        for &i in keep {
            values.extend_from_slice(self.row(i));
        }
        Dataset {
            regions: keep.iter().map(|&i| self.regions[i].clone()).collect(),
            variables: self.variables.clone(),
            values,
        }
    }

    pub fn keep_variables(&self, keep: &[usize]) -> Dataset {
        let mut values = Vec::with_capacity(self.n_regions() * keep.len());
        for i in 0..self.n_regions() {
            let row = self.row(i);
            values.extend(keep.iter().map(|&j| row[j]));
        }
        Dataset {
            regions: self.regions.clone(),
            variables: keep.iter().map(|&j| self.variables[j].clone()).collect(),
            values,
        }
    }

    pub(crate) fn set(&mut self, region: usize, variable: usize, value: Option<f64>) {
        let p = self.variables.len();
        self.values[region * p + variable] = value;
    }

    pub(crate) fn set_transform(&mut self, variable: usize, t: Transform) {
        self.variables[variable].transform_applied = t;
    }

    /// Writes `values.csv`, `regions.csv` and `variables.csv` into `dir`
    /// under the given file names.
    pub fn write_csv_set(
        &self,
        values_path: &Path,
        regions_path: &Path,
        variables_path: &Path,
    ) -> Result<()> {
        write_string(values_path, &self.values_csv())?;
        write_string(regions_path, &self.regions_csv())?;
        write_string(variables_path, &self.variables_csv())
    }

    /// Canonical `values.csv` text: shortest round-trip numbers, `\n` line
    /// endings, empty field for missing cells.
    pub fn values_csv(&self) -> String {
        let mut out = String::from("region_id");
        for v in &self.variables {
            out.push(',');
            out.push_str(&csv_field(&v.short_form));
        }
        out.push('\n');
        for (i, r) in self.regions.iter().enumerate() {
            out.push_str(&csv_field(&r.region_id));
            for cell in self.row(i) {
                out.push(',');
                if let Some(v) = cell {
                    out.push_str(&format_f64(*v));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn regions_csv(&self) -> String {
        regions_csv(&self.regions)
    }

    pub fn variables_csv(&self) -> String {
        let with_transform = self
            .variables
            .iter()
            .any(|v| v.transform_applied != Transform::None);
        let mut out = String::from(if with_transform {
            "short_form,long_name,transform\n"
        } else {
            "short_form,long_name\n"
        });
        for v in &self.variables {
            out.push_str(&csv_field(&v.short_form));
            out.push(',');
            out.push_str(&csv_field(&v.long_name));
            if with_transform {
                out.push(',');
                out.push_str(v.transform_applied.as_str());
            }
            out.push('\n');
        }
        out
    }
}

pub fn regions_csv(regions: &[RegionRecord]) -> String {
    let mut out = String::from("region_id,name,state,remoteness,is_spatial\n");
    for r in regions {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            csv_field(&r.region_id),
            csv_field(&r.name),
            r.state.map(|s| s.code()).unwrap_or(""),
            r.remoteness.map(|x| x.code().to_string()).unwrap_or_default(),
            r.is_spatial
        ));
    }
    out
}

fn check_unique<'a>(keys: impl Iterator<Item = &'a str>, kind: &'static str) -> Result<()> {
    let mut seen = HashSet::new();
    for k in keys {
        if !seen.insert(k) {
            return Err(Error::DuplicateKey {
                kind,
                key: k.to_string(),
            });
        }
    }
    Ok(())
}

/// Shortest decimal that parses back to the same `f64`; exponent form
/// outside `[1e-5, 1e16)`.
pub fn format_f64(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub(crate) fn write_string(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Data rows with their 1-based line numbers.
pub(crate) type CsvRows = Vec<(usize, Vec<String>)>;

pub(crate) fn read_csv(path: &Path) -> Result<(Vec<String>, CsvRows)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::csv(path, e))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        if rec.len() != header.len() {
            return Err(Error::schema(
                path.display().to_string(),
                format!(
                    "line {line}: {} fields, header has {}",
                    rec.len(),
                    header.len()
                ),
            ));
        }
        rows.push((line, rec.iter().map(|s| s.trim().to_string()).collect()));
    }
    Ok((header, rows))
}

fn expect_header(path: &Path, header: &[String], expected: &[&str]) -> Result<()> {
    if header.len() < expected.len() || header.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(Error::schema(
            path.display().to_string(),
            format!("header must start with `{}`", expected.join(",")),
        ));
    }
    Ok(())
}

pub(crate) fn parse_cell(s: &str) -> std::result::Result<Option<f64>, ()> {
    let s = s.trim();
    if s.is_empty() || s == MISSING_TOKEN {
        return Ok(None);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(()),
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

pub fn load_regions(path: &Path) -> Result<Vec<RegionRecord>> {
    let (header, rows) = read_csv(path)?;
    expect_header(
        path,
        &header,
        &["region_id", "name", "state", "remoteness", "is_spatial"],
    )?;
    let file = path.display().to_string();
    let mut out = Vec::with_capacity(rows.len());
    for (line, row) in rows {
        let bad = |msg: String| Error::schema(file.clone(), format!("line {line}: {msg}"));
        let state = match row[2].as_str() {
            "" | MISSING_TOKEN => None,
            s => Some(s.parse::<State>().map_err(bad)?),
        };
        let remoteness = match row[3].as_str() {
            "" | MISSING_TOKEN => None,
            s => Some(
                s.parse::<u8>()
                    .ok()
                    .and_then(Remoteness::from_code)
                    .ok_or_else(|| bad(format!("remoteness `{s}` not in 1..=5")))?,
            ),
        };
        let is_spatial =
            parse_bool(&row[4]).ok_or_else(|| bad(format!("is_spatial `{}` not boolean", row[4])))?;
        out.push(RegionRecord {
            region_id: row[0].clone(),
            name: row[1].clone(),
            state,
            remoteness,
            is_spatial,
        });
    }
    check_unique(out.iter().map(|r| r.region_id.as_str()), "region_id")?;
    Ok(out)
}

pub fn load_variables(path: &Path) -> Result<Vec<VariableMeta>> {
    let (header, rows) = read_csv(path)?;
    expect_header(path, &header, &["short_form", "long_name"])?;
    let has_transform = header.get(2).is_some_and(|h| h == "transform");
    let mut out = Vec::with_capacity(rows.len());
    for (line, row) in rows {
        let transform_applied = if has_transform {
            match row[2].as_str() {
                "" | "none" => Transform::None,
                "log1p" => Transform::Log1p,
                t => {
                    return Err(Error::schema(
                        path.display().to_string(),
                        format!("line {line}: unknown transform `{t}`"),
                    ))
                }
            }
        } else {
            Transform::None
        };
        out.push(VariableMeta {
            short_form: row[0].clone(),
            long_name: row[1].clone(),
            transform_applied,
        });
    }
    check_unique(out.iter().map(|v| v.short_form.as_str()), "short_form")?;
    Ok(out)
}

/// Loads the value table and joins it with region and variable metadata.
///
/// Row and column order follow `values.csv`. Every region and variable in
/// the value table must be described in the metadata files and vice versa.
pub fn load_dataset(values_path: &Path, regions_path: &Path, variables_path: &Path) -> Result<Dataset> {
    let regions_meta = load_regions(regions_path)?;
    let variables_meta = load_variables(variables_path)?;
    let (header, rows) = read_csv(values_path)?;
    let file = values_path.display().to_string();
    if header.first().map(String::as_str) != Some("region_id") {
        return Err(Error::schema(file, "first column must be `region_id`"));
    }
    let columns = &header[1..];
    check_unique(columns.iter().map(String::as_str), "short_form")?;

    let mut var_by_name: HashMap<&str, &VariableMeta> = variables_meta
        .iter()
        .map(|v| (v.short_form.as_str(), v))
        .collect();
    let mut variables = Vec::with_capacity(columns.len());
    for c in columns {
        let meta = var_by_name
            .remove(c.as_str())
            .ok_or_else(|| Error::schema(file.clone(), format!("column `{c}` missing from variables file")))?;
        variables.push(meta.clone());
    }
    if let Some(extra) = variables_meta
        .iter()
        .find(|v| var_by_name.contains_key(v.short_form.as_str()))
    {
        return Err(Error::schema(
            file,
            format!("variable `{}` has no column in the value table", extra.short_form),
        ));
    }

    let mut region_by_id: HashMap<&str, &RegionRecord> = regions_meta
        .iter()
        .map(|r| (r.region_id.as_str(), r))
        .collect();
    let mut regions = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len() * columns.len());
    for (line, row) in &rows {
        let id = row[0].as_str();
        let rec = match region_by_id.remove(id) {
            Some(r) => r,
            None if regions.iter().any(|r: &RegionRecord| r.region_id == id) => {
                return Err(Error::DuplicateKey {
                    kind: "region_id",
                    key: id.to_string(),
                })
            }
            None => {
                return Err(Error::schema(
                    file,
                    format!("line {line}: region `{id}` missing from regions file"),
                ))
            }
        };
        regions.push(rec.clone());
        for (cell, col) in row[1..].iter().zip(columns) {
            let v = parse_cell(cell).map_err(|_| Error::BadCell {
                file: file.clone(),
                line: *line,
                column: col.clone(),
                cell: cell.clone(),
            })?;
            values.push(v);
        }
    }
    if let Some(extra) = regions_meta
        .iter()
        .find(|r| region_by_id.contains_key(r.region_id.as_str()))
    {
        return Err(Error::schema(
            file,
            format!("region `{}` has no row in the value table", extra.region_id),
        ));
    }
    Dataset::new(regions, variables, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmissionReason {
    ZeroErp,
    NaErp,
    NonSpatial,
}

impl OmissionReason {
    pub fn as_str(self) -> &'static str {
        match self {
            OmissionReason::ZeroErp => "zero_erp",
            OmissionReason::NaErp => "na_erp",
            OmissionReason::NonSpatial => "non_spatial",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OmissionLog {
    pub removed: Vec<(String, OmissionReason)>,
}

impl OmissionLog {
    pub fn len(&self) -> usize {
        self.removed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.removed.is_empty()
    }

    pub fn count(&self, reason: OmissionReason) -> usize {
        self.removed.iter().filter(|(_, r)| *r == reason).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("region_id,reason\n");
        for (id, reason) in &self.removed {
            out.push_str(&format!("{},{}\n", csv_field(id), reason.as_str()));
        }
        out
    }
}

/// Drops regions with zero or missing population and regions flagged
/// non-spatial. A region matching several rules is logged once, with the
/// population rule taking precedence.
pub fn omit_unpopulated_regions(d: &Dataset, erp_variable: &str) -> Result<(Dataset, OmissionLog)> {
    let erp = d
        .variable_index(erp_variable)
        .ok_or_else(|| Error::UnknownVariable(erp_variable.to_string()))?;
    let mut keep = Vec::with_capacity(d.n_regions());
    let mut log = OmissionLog::default();
    for (i, r) in d.regions().iter().enumerate() {
        let reason = match d.get(i, erp) {
            Some(0.0) => Some(OmissionReason::ZeroErp),
            None => Some(OmissionReason::NaErp),
            Some(_) if !r.is_spatial => Some(OmissionReason::NonSpatial),
            Some(_) => None,
        };
        match reason {
            Some(reason) => log.removed.push((r.region_id.clone(), reason)),
            None => keep.push(i),
        }
    }
    Ok((d.keep_regions(&keep), log))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableScreen {
    pub short_form: String,
    pub missing: usize,
    pub zeros: usize,
    pub missing_fraction: f64,
    pub zero_fraction: f64,
    /// `(missing + zeros) / n > screen_fraction`
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n_regions: usize,
    pub screen_fraction: f64,
    pub variables: Vec<VariableScreen>,
}

impl ValidationReport {
    pub fn flagged(&self) -> Vec<&str> {
        self.variables
            .iter()
            .filter(|v| v.flagged)
            .map(|v| v.short_form.as_str())
            .collect()
    }
}

pub fn validate_dataset(d: &Dataset, screen_fraction: f64) -> ValidationReport {
    let n = d.n_regions();
    let variables = (0..d.n_variables())
        .map(|j| {
            let col = d.column(j);
            let missing = col.iter().filter(|v| v.is_none()).count();
            let zeros = col.iter().filter(|v| **v == Some(0.0)).count();
            let frac = |c: usize| if n == 0 { 0.0 } else { c as f64 / n as f64 };
            VariableScreen {
                short_form: d.variables()[j].short_form.clone(),
                missing,
                zeros,
                missing_fraction: frac(missing),
                zero_fraction: frac(zeros),
                flagged: frac(missing + zeros) > screen_fraction,
            }
        })
        .collect();
    ValidationReport {
        n_regions: n,
        screen_fraction,
        variables,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    pub(crate) fn region(id: &str) -> RegionRecord {
        RegionRecord {
            region_id: id.into(),
            name: format!("Region {id}"),
            state: Some(State::Nsw),
            remoteness: Some(Remoteness::MajorCities),
            is_spatial: true,
        }
    }

    fn write_set(dir: &Path, values: &str, regions: &str, variables: &str) -> (std::path::PathBuf, std::path::PathBuf, std::path::PathBuf) {
        let v = dir.join("values.csv");
        let r = dir.join("regions.csv");
        let m = dir.join("variables.csv");
        fs::write(&v, values).unwrap();
        fs::write(&r, regions).unwrap();
        fs::write(&m, variables).unwrap();
        (v, r, m)
    }

    const REGIONS: &str = "region_id,name,state,remoteness,is_spatial\nR1,One,NSW,1,true\nR2,Two,VIC,2,true\nR3,Three,NT,5,false\n";
    const VARIABLES: &str = "short_form,long_name\nERP,Population\nSMO,Smoking\n";

    #[test]
    fn loads_with_one_missing_cell() {
        let dir = tempfile::tempdir().unwrap();
        let (v, r, m) = write_set(
            dir.path(),
            "region_id,ERP,SMO\nR1,100,0.5\nR2,200,\nR3,NA,0.1\n",
            REGIONS,
            VARIABLES,
        );
        let d = load_dataset(&v, &r, &m).unwrap();
        assert_eq!((d.n_regions(), d.n_variables()), (3, 2));
        assert_eq!(d.missing_count(), 2);
        assert_eq!(d.get(1, 1), None);
        assert_eq!(d.get(0, 1), Some(0.5));
        assert_eq!(d.regions()[2].remoteness, Some(Remoteness::VeryRemote));
        assert!(!d.regions()[2].is_spatial);
    }

    #[test]
    fn single_empty_cell_is_one_missing() {
        let dir = tempfile::tempdir().unwrap();
        let (v, r, m) = write_set(
            dir.path(),
            "region_id,ERP,SMO\nR1,100,0.5\nR2,200,\nR3,5,0.1\n",
            REGIONS,
            VARIABLES,
        );
        assert_eq!(load_dataset(&v, &r, &m).unwrap().missing_count(), 1);
    }

    #[test]
    fn duplicate_region_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (v, r, m) = write_set(
            dir.path(),
            "region_id,ERP,SMO\nR1,100,0.5\nR1,200,1\n",
            REGIONS,
            VARIABLES,
        );
        assert!(matches!(
            load_dataset(&v, &r, &m),
            Err(Error::DuplicateKey { kind: "region_id", .. })
        ));
        let (v, r, m) = write_set(
            dir.path(),
            "region_id,ERP\nR1,1\n",
            "region_id,name,state,remoteness,is_spatial\nR1,a,NSW,1,true\nR1,b,NSW,1,true\n",
            "short_form,long_name\nERP,x\n",
        );
        assert!(matches!(
            load_dataset(&v, &r, &m),
            Err(Error::DuplicateKey { .. })
        ));
    }

    #[test]
    fn duplicate_short_form_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (v, r, m) = write_set(
            dir.path(),
            "region_id,ERP,ERP\nR1,1,2\n",
            "region_id,name,state,remoteness,is_spatial\nR1,a,NSW,1,true\n",
            VARIABLES,
        );
        assert!(matches!(
            load_dataset(&v, &r, &m),
            Err(Error::DuplicateKey { kind: "short_form", .. })
        ));
    }

    #[test]
    fn bad_cell_and_ragged_row() {
        let dir = tempfile::tempdir().unwrap();
        let (v, r, m) = write_set(
            dir.path(),
            "region_id,ERP,SMO\nR1,100,abc\nR2,1,1\nR3,1,1\n",
            REGIONS,
            VARIABLES,
        );
        match load_dataset(&v, &r, &m) {
            Err(Error::BadCell { line, column, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(column, "SMO");
            }
            other => panic!("expected bad cell, got {other:?}"),
        }
        let (v, r, m) = write_set(
            dir.path(),
            "region_id,ERP,SMO\nR1,100\n",
            REGIONS,
            VARIABLES,
        );
        assert!(matches!(load_dataset(&v, &r, &m), Err(Error::Schema { .. })));
        let (v, r, m) = write_set(
            dir.path(),
            "region_id,ERP,SMO\nR1,inf,1\nR2,1,1\nR3,1,1\n",
            REGIONS,
            VARIABLES,
        );
        assert!(matches!(load_dataset(&v, &r, &m), Err(Error::BadCell { .. })));
    }

    #[test]
    fn region_metadata_must_cover_table() {
        let dir = tempfile::tempdir().unwrap();
        let (v, r, m) = write_set(
            dir.path(),
            "region_id,ERP,SMO\nR1,1,1\nR9,1,1\n",
            REGIONS,
            VARIABLES,
        );
        assert!(matches!(load_dataset(&v, &r, &m), Err(Error::Schema { .. })));
    }

    #[test]
    fn bad_remoteness_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (v, r, m) = write_set(
            dir.path(),
            "region_id,ERP,SMO\nR1,1,1\n",
            "region_id,name,state,remoteness,is_spatial\nR1,a,NSW,6,true\n",
            VARIABLES,
        );
        assert!(matches!(load_dataset(&v, &r, &m), Err(Error::Schema { .. })));
    }

    fn small(erp: &[Option<f64>], spatial: &[bool]) -> Dataset {
        let regions = erp
            .iter()
            .zip(spatial)
            .enumerate()
            .map(|(i, (_, s))| RegionRecord {
                is_spatial: *s,
                ..region(&format!("R{i}"))
            })
            .collect();
        let mut values = Vec::new();
        for (i, e) in erp.iter().enumerate() {
            values.push(*e);
            values.push(Some(i as f64));
        }
        Dataset::new(
            regions,
            vec![VariableMeta::new("ERP", "pop"), VariableMeta::new("X", "x")],
            values,
        )
        .unwrap()
    }

    #[test]
    fn omission_reasons() {
        let d = small(
            &[Some(10.0), Some(0.0), None, Some(5.0), Some(3.0)],
            &[true, true, false, false, true],
        );
        let (kept, log) = omit_unpopulated_regions(&d, "ERP").unwrap();
        assert_eq!(kept.region_ids(), vec!["R0", "R4"]);
        assert_eq!(
            log.removed,
            vec![
                ("R1".to_string(), OmissionReason::ZeroErp),
                ("R2".to_string(), OmissionReason::NaErp),
                ("R3".to_string(), OmissionReason::NonSpatial),
            ]
        );
        assert_eq!(kept.n_regions() + log.len(), d.n_regions());
    }

    #[test]
    fn omission_noop_and_unknown_variable() {
        let d = small(&[Some(1.0), Some(2.0)], &[true, true]);
        let (kept, log) = omit_unpopulated_regions(&d, "ERP").unwrap();
        assert_eq!(kept, d);
        assert!(log.is_empty());
        assert!(matches!(
            omit_unpopulated_regions(&d, "NOPE"),
            Err(Error::UnknownVariable(_))
        ));
    }

    #[test]
    fn omission_is_idempotent() {
        let d = small(
            &[Some(10.0), Some(0.0), None, Some(5.0)],
            &[true, true, true, false],
        );
        let (once, _) = omit_unpopulated_regions(&d, "ERP").unwrap();
        let (twice, log2) = omit_unpopulated_regions(&once, "ERP").unwrap();
        assert_eq!(once, twice);
        assert!(log2.is_empty());
    }

    fn column_dataset(col: Vec<Option<f64>>) -> Dataset {
        let regions = (0..col.len()).map(|i| region(&format!("R{i}"))).collect();
        Dataset::new(regions, vec![VariableMeta::new("V", "v")], col).unwrap()
    }

    #[test]
    fn validation_thresholds() {
        let clean = column_dataset((0..10).map(|i| Some(i as f64 + 1.0)).collect());
        assert!(validate_dataset(&clean, 0.10).flagged().is_empty());

        let mut col: Vec<Option<f64>> = (0..10).map(|i| Some(i as f64 + 1.0)).collect();
        for c in col.iter_mut().take(4) {
            *c = None;
        }
        let r = validate_dataset(&column_dataset(col), 0.10);
        assert_eq!(r.flagged(), vec!["V"]);
        assert_eq!(r.variables[0].missing, 4);

        // exactly at the threshold: not flagged
        let mut col: Vec<Option<f64>> = (0..10).map(|i| Some(i as f64 + 1.0)).collect();
        col[0] = None;
        let r = validate_dataset(&column_dataset(col), 0.10);
        assert!(r.flagged().is_empty());

        // zeros count toward the screen
        let mut col: Vec<Option<f64>> = (0..10).map(|i| Some(i as f64 + 1.0)).collect();
        col[0] = None;
        col[1] = Some(0.0);
        let r = validate_dataset(&column_dataset(col), 0.10);
        assert_eq!(r.variables[0].zeros, 1);
        assert!(r.variables[0].flagged);
    }

    #[test]
    fn format_is_shortest_round_trip() {
        for v in [0.0, 1.0, -2.5, 0.1, 1e-7, 123456789.125, 1e20, f64::MIN_POSITIVE] {
            let s = format_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(format_f64(1.0), "1");
        assert_eq!(format_f64(1e-7), "1e-7");
    }

    #[test]
    fn state_codes_round_trip() {
        for s in State::ALL {
            assert_eq!(s.code().parse::<State>().unwrap(), s);
        }
        assert!("XX".parse::<State>().is_err());
    }
}
