//! GWAS summary-statistic ingestion and two-sample harmonization.
//!
//! Exposure and outcome files are parsed into [`GwasRow`]s, exposure rows are
//! filtered by p-value, and SNPs present in both files are aligned to the
//! exposure effect allele. Matching is by `snp_id` only.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Genome-wide significance threshold used when none is given.
pub const DEFAULT_PVAL_THRESHOLD: f64 = 5e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Allele {
    A,
    C,
    G,
    T,
}

impl Allele {
    pub fn complement(self) -> Allele {
        match self {
            Allele::A => Allele::T,
            Allele::T => Allele::A,
            Allele::C => Allele::G,
            Allele::G => Allele::C,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Allele::A => 'A',
            Allele::C => 'C',
            Allele::G => 'G',
            Allele::T => 'T',
        }
    }
}

impl FromStr for Allele {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" => Ok(Allele::A),
            "C" | "c" => Ok(Allele::C),
            "G" | "g" => Ok(Allele::G),
            "T" | "t" => Ok(Allele::T),
            other => Err(format!("allele '{other}' is not one of A, C, G, T")),
        }
    }
}

impl fmt::Display for Allele {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// True for A/T and C/G pairs, whose strand cannot be told from the alleles.
pub fn is_palindromic(a: Allele, b: Allele) -> bool {
    a.complement() == b
}

/// One row of a GWAS summary-statistics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GwasRow {
    pub snp_id: String,
    pub effect_allele: Allele,
    pub other_allele: Allele,
    pub beta: f64,
    pub se: f64,
    pub pvalue: f64,
    pub eaf: Option<f64>,
}

impl GwasRow {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.snp_id.is_empty() {
            return Err("empty snp id".into());
        }
        if self.effect_allele == self.other_allele {
            return Err(format!(
                "effect allele equals other allele ({})",
                self.effect_allele
            ));
        }
        if !self.beta.is_finite() {
            return Err(format!("beta is not finite ({})", self.beta));
        }
        if !(self.se.is_finite() && self.se > 0.0) {
            return Err(format!("se must be > 0 (got {})", self.se));
        }
        if !(0.0..=1.0).contains(&self.pvalue) {
            return Err(format!("pvalue outside [0, 1] ({})", self.pvalue));
        }
        if let Some(eaf) = self.eaf {
            if !(eaf > 0.0 && eaf < 1.0) {
                return Err(format!("eaf outside (0, 1) ({eaf})"));
            }
        }
        Ok(())
    }
}

/// Header names of the required (and optional) columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub snp: String,
    pub effect_allele: String,
    pub other_allele: String,
    pub beta: String,
    pub se: String,
    pub pvalue: String,
    pub eaf: Option<String>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            snp: "snp".into(),
            effect_allele: "ea".into(),
            other_allele: "oa".into(),
            beta: "beta".into(),
            se: "se".into(),
            pvalue: "p".into(),
            eaf: None,
        }
    }
}

impl ColumnMap {
    /// Applies `key=HEADER` overrides such as `snp=SNP,beta=BETA,eaf=FRQ`.
    pub fn with_overrides(mut self, spec: &str) -> Result<Self> {
        for pair in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, value) = pair.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("column mapping '{pair}' is not key=HEADER"))
            })?;
            let value = value.trim().to_string();
            if value.is_empty() {
                return Err(Error::InvalidConfig(format!("empty header for '{key}'")));
            }
            match key.trim() {
                "snp" => self.snp = value,
                "ea" | "effect_allele" => self.effect_allele = value,
                "oa" | "other_allele" => self.other_allele = value,
                "beta" => self.beta = value,
                "se" => self.se = value,
                "p" | "pval" | "pvalue" => self.pvalue = value,
                "eaf" => self.eaf = Some(value),
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown column key '{other}'"
                    )))
                }
            }
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Delimiter {
    Tab,
    Comma,
}

impl Delimiter {
    /// `.csv` files are comma-delimited, everything else tab-delimited.
    pub fn from_path(path: &Path) -> Delimiter {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Delimiter::Comma,
            _ => Delimiter::Tab,
        }
    }

    fn byte(self) -> u8 {
        match self {
            Delimiter::Tab => b'\t',
            Delimiter::Comma => b',',
        }
    }
}

impl FromStr for Delimiter {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "tab" | "tsv" | "\\t" => Ok(Delimiter::Tab),
            "comma" | "csv" | "," => Ok(Delimiter::Comma),
            other => Err(format!("unknown delimiter '{other}' (expected tab or comma)")),
        }
    }
}

/// Parses a delimited GWAS file. The delimiter is inferred from the extension
/// unless given explicitly.
pub fn parse_gwas_file(
    path: &Path,
    columns: &ColumnMap,
    delimiter: Option<Delimiter>,
) -> Result<Vec<GwasRow>> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    let delimiter = delimiter.unwrap_or_else(|| Delimiter::from_path(path));
    parse_gwas_reader(file, columns, delimiter, path)
}

/// Parses GWAS rows from any reader; `origin` is only used in error messages.
pub fn parse_gwas_reader<R: Read>(
    reader: R,
    columns: &ColumnMap,
    delimiter: Delimiter,
    origin: &Path,
) -> Result<Vec<GwasRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter.byte())
        .has_headers(true)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);

    let csv_err = |e: csv::Error| -> Error {
        let line = e.position().map(|p| p.line()).unwrap_or(0);
        match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::Io {
                path: origin.to_path_buf(),
                source,
            },
            kind => Error::MalformedRow {
                line,
                reason: format!("{kind:?}"),
            },
        }
    };

    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::EmptyFile(origin.to_path_buf()));
    }
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let idx_snp = find(&columns.snp)?;
    let idx_ea = find(&columns.effect_allele)?;
    let idx_oa = find(&columns.other_allele)?;
    let idx_beta = find(&columns.beta)?;
    let idx_se = find(&columns.se)?;
    let idx_p = find(&columns.pvalue)?;
    let idx_eaf = columns.eaf.as_deref().map(find).transpose()?;

    let mut rows = Vec::new();
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record).map_err(csv_err)? {
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let malformed = |reason: String| Error::MalformedRow { line, reason };
        let field = |idx: usize, name: &str| -> Result<&str> {
            match record.get(idx) {
                Some(v) if !v.is_empty() => Ok(v),
                _ => Err(malformed(format!("missing value for column '{name}'"))),
            }
        };
        let number = |idx: usize, name: &str| -> Result<f64> {
            let raw = field(idx, name)?;
            raw.parse::<f64>()
                .map_err(|_| malformed(format!("column '{name}' is not a number: '{raw}'")))
        };
        let allele = |idx: usize, name: &str| -> Result<Allele> {
            field(idx, name)?.parse::<Allele>().map_err(&malformed)
        };

        let eaf = match idx_eaf {
            Some(idx) => match record.get(idx) {
                None | Some("") | Some("NA") | Some("na") | Some("NaN") => None,
                Some(raw) => Some(raw.parse::<f64>().map_err(|_| {
                    malformed(format!("column 'eaf' is not a number: '{raw}'"))
                })?),
            },
            None => None,
        };
        let row = GwasRow {
            snp_id: field(idx_snp, &columns.snp)?.to_string(),
            effect_allele: allele(idx_ea, &columns.effect_allele)?,
            other_allele: allele(idx_oa, &columns.other_allele)?,
            beta: number(idx_beta, &columns.beta)?,
            se: number(idx_se, &columns.se)?,
            pvalue: number(idx_p, &columns.pvalue)?,
            eaf,
        };
        row.validate().map_err(&malformed)?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyFile(origin.to_path_buf()));
    }
    Ok(rows)
}

/// Harmonized exposure/outcome associations for one SNP.
///
/// `beta_y` refers to the same effect allele as `beta_x`. Standard errors may
/// be zero (no sampling error) but not negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentRecord {
    pub snp_id: String,
    pub beta_x: f64,
    pub se_x: f64,
    pub beta_y: f64,
    pub se_y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eaf_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eaf_y: Option<f64>,
}

impl InstrumentRecord {
    pub fn new(snp_id: impl Into<String>, beta_x: f64, se_x: f64, beta_y: f64, se_y: f64) -> Self {
        InstrumentRecord {
            snp_id: snp_id.into(),
            beta_x,
            se_x,
            beta_y,
            se_y,
            eaf_x: None,
            eaf_y: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Error::InvalidInstrument {
            snp_id: self.snp_id.clone(),
            reason: reason.to_string(),
        };
        if !(self.beta_x.is_finite() && self.beta_y.is_finite()) {
            return Err(bad("non-finite beta"));
        }
        if !(self.se_x.is_finite() && self.se_x >= 0.0) {
            return Err(bad("se_x must be finite and non-negative"));
        }
        if !(self.se_y.is_finite() && self.se_y >= 0.0) {
            return Err(bad("se_y must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeType {
    /// Continuous outcome; the causal effect is on the trait scale.
    #[default]
    Continuous,
    /// Rare binary outcome with log-OR associations read as log-RR.
    BinaryRare,
}

impl FromStr for OutcomeType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "continuous" => Ok(OutcomeType::Continuous),
            "binary-rare" | "binary_rare" => Ok(OutcomeType::BinaryRare),
            other => Err(format!(
                "unknown outcome type '{other}' (expected continuous or binary-rare)"
            )),
        }
    }
}

/// Where a harmonized set came from and what was dropped on the way.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub exposure_source: Option<String>,
    pub outcome_source: Option<String>,
    pub pval_threshold: Option<f64>,
    pub exposure_rows: usize,
    pub exposure_passing: usize,
    pub duplicate_exposure: usize,
    pub duplicate_outcome: usize,
    pub dropped_no_match: usize,
    pub dropped_mismatch: usize,
    pub dropped_palindromic: usize,
    pub retained: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonizedSet {
    pub records: Vec<InstrumentRecord>,
    pub outcome_type: OutcomeType,
    pub provenance: Provenance,
}

impl HarmonizedSet {
    /// Builds a set from already-aligned records (simulations, tests).
    pub fn new(records: Vec<InstrumentRecord>, outcome_type: OutcomeType) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            r.validate()?;
            if !seen.insert(r.snp_id.as_str()) {
                return Err(Error::DuplicateSnp(r.snp_id.clone()));
            }
        }
        let provenance = Provenance {
            retained: records.len(),
            ..Provenance::default()
        };
        Ok(HarmonizedSet {
            records,
            outcome_type,
            provenance,
        })
    }

    pub fn with_outcome_type(mut self, outcome_type: OutcomeType) -> Self {
        self.outcome_type = outcome_type;
        self
    }

    pub fn with_sources(mut self, exposure: impl Into<String>, outcome: impl Into<String>) -> Self {
        self.provenance.exposure_source = Some(exposure.into());
        self.provenance.outcome_source = Some(outcome.into());
        self
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

enum AlleleMatch {
    Direct,
    Swapped,
    Ambiguous,
    Incompatible,
}

fn match_alleles(exposure: &GwasRow, outcome: &GwasRow) -> AlleleMatch {
    let (xe, xo) = (exposure.effect_allele, exposure.other_allele);
    let (ye, yo) = (outcome.effect_allele, outcome.other_allele);
    if xe == ye && xo == yo {
        AlleleMatch::Direct
    } else if xe == yo && xo == ye {
        if is_palindromic(xe, xo) {
            // A swap on a palindrome is indistinguishable from a strand flip.
            AlleleMatch::Ambiguous
        } else {
            AlleleMatch::Swapped
        }
    } else {
        AlleleMatch::Incompatible
    }
}

/// Aligns outcome associations to the exposure effect allele.
///
/// Exposure rows are first filtered to `pvalue < pval_threshold`. Within each
/// file the first occurrence of a `snp_id` wins.
pub fn harmonize(
    exposure: &[GwasRow],
    outcome: &[GwasRow],
    pval_threshold: f64,
) -> Result<HarmonizedSet> {
    let mut prov = Provenance {
        pval_threshold: Some(pval_threshold),
        exposure_rows: exposure.len(),
        ..Provenance::default()
    };

    let mut outcome_by_id: HashMap<&str, &GwasRow> = HashMap::with_capacity(outcome.len());
    for row in outcome {
        if outcome_by_id.contains_key(row.snp_id.as_str()) {
            prov.duplicate_outcome += 1;
        } else {
            outcome_by_id.insert(row.snp_id.as_str(), row);
        }
    }

    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for x in exposure.iter().filter(|r| r.pvalue < pval_threshold) {
        prov.exposure_passing += 1;
        if !seen.insert(x.snp_id.as_str()) {
            prov.duplicate_exposure += 1;
            continue;
        }
        let Some(y) = outcome_by_id.get(x.snp_id.as_str()) else {
            prov.dropped_no_match += 1;
            continue;
        };
        let (beta_y, eaf_y) = match match_alleles(x, y) {
            AlleleMatch::Direct => (y.beta, y.eaf),
            AlleleMatch::Swapped => (-y.beta, y.eaf.map(|f| 1.0 - f)),
            AlleleMatch::Ambiguous => {
                prov.dropped_palindromic += 1;
                continue;
            }
            AlleleMatch::Incompatible => {
                prov.dropped_mismatch += 1;
                continue;
            }
        };
        records.push(InstrumentRecord {
            snp_id: x.snp_id.clone(),
            beta_x: x.beta,
            se_x: x.se,
            beta_y,
            se_y: y.se,
            eaf_x: x.eaf,
            eaf_y,
        });
    }

    prov.retained = records.len();
    if records.is_empty() {
        return Err(Error::NoOverlap);
    }
    Ok(HarmonizedSet {
        records,
        outcome_type: OutcomeType::Continuous,
        provenance: prov,
    })
}

/// Convenience: parse both files and harmonize them.
pub fn load_and_harmonize(
    exposure: &Path,
    outcome: &Path,
    exposure_cols: &ColumnMap,
    outcome_cols: &ColumnMap,
    delimiter: Option<Delimiter>,
    pval_threshold: f64,
) -> Result<HarmonizedSet> {
    let x = parse_gwas_file(exposure, exposure_cols, delimiter)?;
    let y = parse_gwas_file(outcome, outcome_cols, delimiter)?;
    let name = |p: &Path| -> String {
        p.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| PathBuf::from(p).display().to_string())
    };
    Ok(harmonize(&x, &y, pval_threshold)?.with_sources(name(exposure), name(outcome)))
}
