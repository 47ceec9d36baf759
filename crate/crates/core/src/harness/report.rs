use super::campaign::CampaignReport;
use std::collections::{BTreeMap, BTreeSet};

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Column key of a campaign: method, SUT and lane count.
pub fn column_key(r: &CampaignReport) -> String {
    format!("{}/{}/{}lanes", r.method, r.sut, r.lanes)
}

/// Aggregates campaigns into one table: a row per road type, a rate and a
/// TOP-K column per method/SUT/lane combination. A later report for the
/// same cell replaces an earlier one. Absent TOP-K values print as `None`.
pub fn aggregate_csv(reports: &[CampaignReport]) -> String {
    let mut cells: BTreeMap<(String, String), &CampaignReport> = BTreeMap::new();
    let mut columns = BTreeSet::new();
    let mut rows = BTreeSet::new();
    for r in reports {
        let col = column_key(r);
        columns.insert(col.clone());
        rows.insert(r.scenario.clone());
        cells.insert((r.scenario.clone(), col), r);
    }
    let k = reports.first().map_or(5, |r| r.k);
    let mut out = String::from("scenario");
    for c in &columns {
        out.push_str(&format!(",{},{}", csv_field(&format!("{c} rate%")), csv_field(&format!("{c} top{k}"))));
    }
    out.push('\n');
    for row in &rows {
        out.push_str(&csv_field(row));
        for c in &columns {
            match cells.get(&(row.clone(), c.clone())) {
                Some(r) => {
                    let top = r.top_k.map_or_else(|| "None".to_string(), |t| format!("{t:.1}"));
                    out.push_str(&format!(",{:.2},{top}", r.violation_rate));
                }
                None => out.push_str(",,"),
            }
        }
        out.push('\n');
    }
    out
}
