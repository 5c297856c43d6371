use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::MapModel;
use crate::error::{Error, Result};
use crate::temporal::TimeSeriesDataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StatsOptions {
    pub id_column: String,
    /// Value column. Required in long format when the file has more than
    /// one candidate; in wide format restricts the file to a static column.
    pub value_column: Option<String>,
    /// Long format: one row per (region, time).
    pub time_column: Option<String>,
}

impl Default for StatsOptions {
    fn default() -> Self {
        StatsOptions { id_column: "id".into(), value_column: None, time_column: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttachedStatistics {
    Static(MapModel),
    Temporal(TimeSeriesDataset),
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Malformed(format!("CSV has no column {name:?}")))
}

fn number(cell: &str, row: usize, column: &str) -> Result<f64> {
    cell.trim().parse::<f64>().map_err(|_| Error::NonNumeric {
        row,
        column: column.to_owned(),
        value: cell.to_owned(),
    })
}

/// Joins CSV statistics onto the map by region id.
///
/// Wide files with a single value column produce a static map; several
/// value columns (or a `time_column`) produce a time series whose time
/// labels are the column headers (or the distinct time values in order of
/// first appearance).
pub fn attach_statistics(map: &MapModel, csv_bytes: &[u8], opts: &StatsOptions) -> Result<AttachedStatistics> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(csv_bytes);
    let headers = reader.headers()?.clone();
    let id_col = column(&headers, &opts.id_column)?;
    let n = map.regions.len();
    let index: HashMap<&str, usize> = map.regions.iter().enumerate().map(|(i, r)| (r.id.as_str(), i)).collect();

    let lookup = |id: &str| -> Result<usize> {
        index.get(id).copied().ok_or_else(|| Error::UnknownRegion(id.to_owned()))
    };

    let (times, table) = if let Some(time_name) = &opts.time_column {
        let time_col = column(&headers, time_name)?;
        let value_col = match &opts.value_column {
            Some(v) => column(&headers, v)?,
            None => {
                let rest: Vec<usize> = (0..headers.len()).filter(|&c| c != id_col && c != time_col).collect();
                match rest.as_slice() {
                    [only] => *only,
                    _ => return Err(Error::Malformed("long-format CSV needs exactly one value column or an explicit value column".into())),
                }
            }
        };
        let value_name = headers[value_col].to_owned();
        let mut times: Vec<String> = Vec::new();
        let mut time_index: HashMap<String, usize> = HashMap::new();
        let mut cells: HashMap<(usize, usize), f64> = HashMap::new();
        for (row_no, rec) in reader.records().enumerate() {
            let rec = rec?;
            let row = row_no + 2;
            let region = lookup(&rec[id_col])?;
            let t_label = rec[time_col].to_owned();
            let t = *time_index.entry(t_label.clone()).or_insert_with(|| {
                times.push(t_label);
                times.len() - 1
            });
            let v = number(&rec[value_col], row, &value_name)?;
            if cells.insert((t, region), v).is_some() {
                return Err(Error::Malformed(format!("duplicate row for region {} at time {}", &rec[id_col], &rec[time_col])));
            }
        }
        let mut table = vec![vec![0.0; n]; times.len()];
        for (t, row) in table.iter_mut().enumerate() {
            for (r, slot) in row.iter_mut().enumerate() {
                *slot = *cells.get(&(t, r)).ok_or_else(|| Error::MissingTimeStep {
                    id: map.regions[r].id.clone(),
                    time: times[t].clone(),
                })?;
            }
        }
        (times, table)
    } else {
        let value_cols: Vec<usize> = match &opts.value_column {
            Some(v) => vec![column(&headers, v)?],
            None => (0..headers.len()).filter(|&c| c != id_col).collect(),
        };
        if value_cols.is_empty() {
            return Err(Error::Malformed("CSV has no value column".into()));
        }
        let times: Vec<String> = value_cols.iter().map(|&c| headers[c].to_owned()).collect();
        let mut filled: Vec<Option<Vec<f64>>> = vec![None; n];
        for (row_no, rec) in reader.records().enumerate() {
            let rec = rec?;
            let row = row_no + 2;
            let region = lookup(&rec[id_col])?;
            let mut values = Vec::with_capacity(value_cols.len());
            for (&c, label) in value_cols.iter().zip(&times) {
                let cell = rec.get(c).unwrap_or("");
                if cell.is_empty() {
                    return Err(Error::MissingTimeStep { id: rec[id_col].to_owned(), time: label.clone() });
                }
                values.push(number(cell, row, label)?);
            }
            if filled[region].replace(values).is_some() {
                return Err(Error::Malformed(format!("duplicate row for region {}", &rec[id_col])));
            }
        }
        let mut table = vec![vec![0.0; n]; times.len()];
        for (r, values) in filled.into_iter().enumerate() {
            let values = values.ok_or_else(|| Error::MissingStatistic(map.regions[r].id.clone()))?;
            for (t, v) in values.into_iter().enumerate() {
                table[t][r] = v;
            }
        }
        (times, table)
    };

    for row in &table {
        for (r, &v) in row.iter().enumerate() {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::NonPositiveStatistic { id: map.regions[r].id.clone(), value: v });
            }
        }
    }

    if times.len() == 1 && opts.time_column.is_none() {
        Ok(AttachedStatistics::Static(map.with_statistics(&table[0])?))
    } else {
        let base = map.with_statistics(&table[0])?;
        Ok(AttachedStatistics::Temporal(TimeSeriesDataset::new(base, times, table)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{Point, Polygon, Region};

    fn two_regions() -> MapModel {
        let sq = |x: f64| Polygon {
            exterior: vec![Point::new(x, 0.0), Point::new(x + 1.0, 0.0), Point::new(x + 1.0, 1.0), Point::new(x, 1.0)],
            holes: vec![],
        };
        MapModel::new(vec![
            Region { id: "A".into(), name: "A".into(), polygons: vec![sq(0.0)], statistic: 1.0 },
            Region { id: "B".into(), name: "B".into(), polygons: vec![sq(1.0)], statistic: 1.0 },
        ])
    }

    #[test]
    fn static_column() {
        let out = attach_statistics(&two_regions(), b"id,value\nA,3\nB,7\n", &StatsOptions::default()).unwrap();
        match out {
            AttachedStatistics::Static(m) => assert_eq!(m.statistics(), vec![3.0, 7.0]),
            other => panic!("expected static, got {other:?}"),
        }
    }

    #[test]
    fn wide_temporal_sums() {
        let csv = b"id,2020,2021,2022\nA,1,2,3\nB,10,20,30\n";
        let out = attach_statistics(&two_regions(), csv, &StatsOptions::default()).unwrap();
        let AttachedStatistics::Temporal(ds) = out else { panic!("expected temporal") };
        assert_eq!(ds.times, vec!["2020", "2021", "2022"]);
        assert_eq!(ds.m_i, vec![11.0, 22.0, 33.0]);
    }

    #[test]
    fn long_temporal() {
        let csv = b"id,week,cases\nA,w1,1\nB,w1,2\nA,w2,3\nB,w2,4\n";
        let opts = StatsOptions { time_column: Some("week".into()), ..Default::default() };
        let AttachedStatistics::Temporal(ds) = attach_statistics(&two_regions(), csv, &opts).unwrap() else {
            panic!("expected temporal")
        };
        assert_eq!(ds.statistics, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(ds.m_i, vec![3.0, 7.0]);
    }

    #[test]
    fn errors_name_the_problem() {
        let err = attach_statistics(&two_regions(), b"id,value\nA,3\nXX,7\n", &StatsOptions::default()).unwrap_err();
        assert!(err.to_string().contains("XX"));
        let err = attach_statistics(&two_regions(), b"id,value\nA,3\nB,seven\n", &StatsOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NonNumeric { row: 3, .. }));
        let opts = StatsOptions { time_column: Some("t".into()), ..Default::default() };
        let err = attach_statistics(&two_regions(), b"id,t,v\nA,1,1\nB,1,1\nA,2,1\n", &opts).unwrap_err();
        assert!(matches!(err, Error::MissingTimeStep { .. }));
        let err = attach_statistics(&two_regions(), b"id,value\nA,3\n", &StatsOptions::default()).unwrap_err();
        assert!(matches!(err, Error::MissingStatistic(_)));
        let err = attach_statistics(&two_regions(), b"id,value\nA,3\nB,0\n", &StatsOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NonPositiveStatistic { .. }));
    }
}
