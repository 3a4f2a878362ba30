//! Update-hygiene metric: how far behind was the shipped TPC version.

use chrono::NaiveDate;

use crate::tpcdb::TpcDatabase;

use super::ReportError;

/// Days from `from` to `to`; negating the arguments negates the value.
pub(crate) fn days_between(from: NaiveDate, to: NaiveDate) -> i64 {
    (to - from).num_days()
}

/// Days between the release of the version a firmware uses and the
/// newest version available when that firmware shipped.
///
/// "Latest" is the version with the greatest release date at or before
/// `firmware_release`, not the absolute newest in the database. Zero
/// when the used version is that latest one.
pub fn delay_time(
    db: &TpcDatabase,
    tpc: &str,
    used_version: &str,
    firmware_release: NaiveDate,
) -> Result<i64, ReportError> {
    let record = db
        .tpc(tpc)
        .ok_or_else(|| ReportError::UnknownVersion(format!("{tpc} is not in the database")))?;
    let used = record
        .version(used_version)
        .ok_or_else(|| ReportError::UnknownVersion(format!("{tpc} {used_version}")))?;
    let used_date = used.release_date.ok_or_else(|| {
        ReportError::UnknownVersion(format!("{tpc} {used_version} has no release date"))
    })?;
    let latest_date = record
        .versions
        .iter()
        .filter_map(|v| v.release_date)
        .filter(|&d| d <= firmware_release)
        .max()
        .ok_or_else(|| ReportError::NoDatedVersions(tpc.to_string()))?;
    Ok(days_between(used_date, latest_date))
}
