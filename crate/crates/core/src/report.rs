//! JSON report helpers shared by the CLI and the library reports.

use serde::Serializer;

/// Serializes non-finite floats as `null`.
pub fn finite_or_null<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

/// Value of the top-level `schema` key of every JSON report.
pub const SCHEMA: &str = "blab-report-1";
