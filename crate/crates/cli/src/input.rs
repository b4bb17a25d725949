//! CSV ingestion of curve and response files.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::DMatrix;
use nlslope_core::FunctionalDataset;

use crate::CliError;

fn open(path: &Path) -> Result<csv::Reader<std::fs::File>, CliError> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn parse_number(path: &Path, line: u64, column: usize, field: &str) -> Result<f64, CliError> {
    field.parse::<f64>().map_err(|_| {
        CliError::Input(format!(
            "{}: line {line}, column {}: cannot parse {field:?} as a number",
            path.display(),
            column + 1
        ))
    })
}

/// `(ids, grid, rows)`.
pub type Curves = (Vec<String>, Vec<f64>, Vec<Vec<f64>>);

/// Curves on a common grid.
///
/// The header is `id,t_1,...,t_G`; each further row is a subject id followed
/// by `G` values.
pub fn read_curves(path: &Path) -> Result<Curves, CliError> {
    let mut reader = open(path)?;
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| csv_error(path, e))?,
        None => return Err(CliError::Input(format!("{}: file is empty", path.display()))),
    };
    let line = line_of(&header);
    let grid = header
        .iter()
        .enumerate()
        .skip(1)
        .map(|(c, f)| parse_number(path, line, c, f))
        .collect::<Result<Vec<_>, _>>()?;
    if grid.is_empty() {
        return Err(CliError::Input(format!("{}: line {line}: header has no grid times", path.display())));
    }

    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for record in records {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = line_of(&record);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != grid.len() + 1 {
            return Err(CliError::Input(format!(
                "{}: line {line}: expected {} fields, found {}",
                path.display(),
                grid.len() + 1,
                record.len()
            )));
        }
        let values = record
            .iter()
            .enumerate()
            .skip(1)
            .map(|(c, f)| parse_number(path, line, c, f))
            .collect::<Result<Vec<_>, _>>()?;
        ids.push(record[0].to_string());
        rows.push(values);
    }
    Ok((ids, grid, rows))
}

/// Responses keyed by subject id. A first row whose second field is not a
/// number is taken as a header.
pub fn read_responses(path: &Path) -> Result<Vec<(String, f64)>, CliError> {
    let mut reader = open(path)?;
    let mut out = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = line_of(&record);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != 2 {
            return Err(CliError::Input(format!(
                "{}: line {line}: expected 2 fields, found {}",
                path.display(),
                record.len()
            )));
        }
        if k == 0 && record[1].parse::<f64>().is_err() {
            continue;
        }
        out.push((record[0].to_string(), parse_number(path, line, 1, &record[1])?));
    }
    Ok(out)
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map(|p| p.line());
    match line {
        Some(line) => CliError::Input(format!("{}: line {line}: {e}", path.display())),
        None => CliError::Input(format!("{}: {e}", path.display())),
    }
}

/// Joins curves and responses on subject id, in curve-file order.
pub fn load_group(curves_path: &Path, responses_path: &Path) -> Result<FunctionalDataset, CliError> {
    let (ids, grid, rows) = read_curves(curves_path)?;
    let responses = read_responses(responses_path)?;

    let mut by_id: HashMap<&str, f64> = HashMap::with_capacity(responses.len());
    for (id, y) in &responses {
        if by_id.insert(id.as_str(), *y).is_some() {
            return Err(CliError::Input(format!("{}: duplicate subject id {id:?}", responses_path.display())));
        }
    }
    let mut seen = HashMap::with_capacity(ids.len());
    let mut y = Vec::with_capacity(ids.len());
    for id in &ids {
        if seen.insert(id.as_str(), ()).is_some() {
            return Err(CliError::Input(format!("{}: duplicate subject id {id:?}", curves_path.display())));
        }
        match by_id.get(id.as_str()) {
            Some(&v) => y.push(v),
            None => {
                return Err(CliError::Input(format!(
                    "subject {id:?} has a curve but no response in {}",
                    responses_path.display()
                )))
            }
        }
    }
    if let Some((id, _)) = responses.iter().find(|(id, _)| !seen.contains_key(id.as_str())) {
        return Err(CliError::Input(format!(
            "subject {id:?} has a response but no curve in {}",
            curves_path.display()
        )));
    }

    let g = grid.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let curves = DMatrix::from_row_slice(ids.len(), g, &flat);
    FunctionalDataset::new(grid, curves, y).map_err(|e| CliError::from_core(e, Some(curves_path)))
}
