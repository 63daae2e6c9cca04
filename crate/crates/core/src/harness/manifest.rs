use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// The tail bound used for `P(|<Δ, t>| >= λ)`, recorded in every manifest.
pub const BERNSTEIN_FORM: &str =
    "2*exp(-lambda^2/(2*(V+W*lambda/3))) clamped to 1; V=sum w_i^2, W=max|w_i|, w_i=<a_i,t>";

/// Lowercase hex SHA-256 of the compact JSON encoding of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config types serialize");
    hex::encode(Sha256::digest(&bytes))
}

/// Result artifact of one run: metadata, per-cell results and checks. The
/// CSV view is carried alongside and is not part of the JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub bernstein_form: String,
    pub cells: Vec<serde_json::Value>,
    pub checks: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_clock_seconds: Option<f64>,
    #[serde(skip)]
    pub csv_header: String,
    #[serde(skip)]
    pub csv_rows: Vec<String>,
}

impl RunManifest {
    pub fn new<C: Serialize>(experiment: &str, config: &C, seed: u64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            experiment: experiment.to_string(),
            config_hash: config_hash(config),
            seed,
            bernstein_form: BERNSTEIN_FORM.to_string(),
            cells: Vec::new(),
            checks: serde_json::Value::Null,
            wall_clock_seconds: None,
            csv_header: String::new(),
            csv_rows: Vec::new(),
        }
    }

    /// Adds one result cell with its CSV row.
    pub fn push<T: Serialize>(&mut self, cell: &T, csv_row: String) {
        self.cells.push(serde_json::to_value(cell).expect("cell types serialize"));
        self.csv_rows.push(csv_row);
    }

    /// Header line plus one line per cell, newline-terminated.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.csv_rows.len() + 1));
        out.push_str(&self.csv_header);
        out.push('\n');
        for row in &self.csv_rows {
            out.push_str(row);
            out.push('\n');
        }
        out
    }

    /// Pretty JSON, newline-terminated.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

/// CSV field for an optional number (empty when absent).
pub(crate) fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = config_hash(&serde_json::json!({"n": 10, "p": 0.1}));
        assert_eq!(a, config_hash(&serde_json::json!({"n": 10, "p": 0.1})));
        assert_ne!(a, config_hash(&serde_json::json!({"n": 10, "p": 0.2})));
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn outputs_end_with_newline() {
        let mut m = RunManifest::new("test", &1u8, 3);
        m.csv_header = "a,b".into();
        m.push(&serde_json::json!({"a": 1}), "1,2".into());
        assert_eq!(m.to_csv(), "a,b\n1,2\n");
        assert!(m.to_json().ends_with("}\n"));
        assert!(!m.to_json().contains("wall_clock"));
    }
}
