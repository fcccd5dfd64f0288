//! CSV files: measured or simulated `|S21|` datasets and `(Δ, Ω)` maps.
//!
//! Frequencies are absolute, in Hz. Metadata travels in `# key: value`
//! comment lines ahead of the header. Floats are written in Rust's shortest
//! round-trip form, so reading a written file gives back the same bits.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use omit_core::fit::DataPoint;
use omit_core::sweep::{MapMeta, SweepMap};
use omit_core::{
    dbm_to_watts, hz_to_rad, rad_to_hz, watts_to_dbm, AxisKind, PumpDrive, PumpScheme, Samples, SweepTrace, TraceMeta,
};

pub const DATASET_COLUMNS: [&str; 3] = ["probe_freq_hz", "pump_freq_hz", "s21_mag"];
const MAP_CORNER: &str = "delta_hz\\omega_hz";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub probe_freq_hz: f64,
    pub pump_freq_hz: f64,
    pub s21_mag: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub scheme: PumpScheme,
    pub label: Option<String>,
    pub temperature_mk: Option<f64>,
    pub probe_power_dbm: Option<f64>,
    pub pump_power_dbm: Option<f64>,
    pub n_cav: Option<f64>,
    pub rows: Vec<Row>,
}

/// A problem at a 1-based line of the input.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

fn number(line: usize, what: &str, text: &str) -> Result<f64, ParseError> {
    let v: f64 = text
        .trim()
        .parse()
        .map_err(|_| ParseError::new(line, format!("{what}: '{}' is not a number", text.trim())))?;
    if !v.is_finite() {
        return Err(ParseError::new(line, format!("{what}: {v} is not finite")));
    }
    Ok(v)
}

/// `# key: value` lines before the header, keys lowercased, with line numbers.
fn header_comments(text: &str) -> Vec<(usize, String, String)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .take_while(|(_, l)| l.starts_with('#'))
        .filter_map(|(n, l)| {
            let (k, v) = l[1..].split_once(':')?;
            Some((n, k.trim().to_ascii_lowercase(), v.trim().to_string()))
        })
        .collect()
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

/// 1-based line of the header: the first line that is neither blank nor a comment.
fn header_line(text: &str) -> usize {
    text.lines()
        .position(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map_or(1, |i| i + 1)
}

fn record_line(record: &csv::StringRecord) -> usize {
    record.position().map_or(0, |p| p.line() as usize)
}

impl DatasetFile {
    /// Flattens traces taken at one pump setting (or one stepped-pump run)
    /// into a dataset. Metadata comes from the first trace.
    pub fn from_traces(traces: &[SweepTrace], label: Option<String>) -> Self {
        let meta = traces.first().map(|t| t.meta.clone());
        let (pump_power_dbm, n_cav) = match meta.as_ref().and_then(|m| m.drive) {
            Some(PumpDrive::PhotonNumber(n)) => (None, Some(n)),
            Some(PumpDrive::InputPower(w)) => (watts_to_dbm(w).ok(), None),
            None => (None, None),
        };
        let rows = traces
            .iter()
            .flat_map(|t| {
                let pump = rad_to_hz(t.meta.pump_omega);
                t.probe_omegas().into_iter().zip(t.magnitudes()).map(move |(w, m)| Row {
                    probe_freq_hz: rad_to_hz(w),
                    pump_freq_hz: pump,
                    s21_mag: m,
                })
            })
            .collect();
        Self {
            scheme: meta.as_ref().map_or(PumpScheme::Red, |m| m.scheme),
            label,
            temperature_mk: meta.as_ref().and_then(|m| m.temperature_mk),
            probe_power_dbm: meta.as_ref().and_then(|m| m.probe_power_dbm),
            pump_power_dbm,
            n_cav,
            rows,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if let Some(label) = &self.label {
            writeln!(out, "# label: {label}").unwrap();
        }
        writeln!(out, "# scheme: {}", self.scheme).unwrap();
        for (key, value) in [
            ("temperature_mK", self.temperature_mk),
            ("probe_power_dbm", self.probe_power_dbm),
            ("pump_power_dbm", self.pump_power_dbm),
            ("n_cav", self.n_cav),
        ] {
            if let Some(v) = value {
                writeln!(out, "# {key}: {v:e}").unwrap();
            }
        }
        writeln!(out, "{}", DATASET_COLUMNS.join(",")).unwrap();
        for r in &self.rows {
            writeln!(out, "{:e},{:e},{:e}", r.probe_freq_hz, r.pump_freq_hz, r.s21_mag).unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut scheme = None;
        let mut file = DatasetFile {
            scheme: PumpScheme::Red,
            label: None,
            temperature_mk: None,
            probe_power_dbm: None,
            pump_power_dbm: None,
            n_cav: None,
            rows: Vec::new(),
        };
        for (line, key, value) in header_comments(text) {
            match key.as_str() {
                "scheme" => scheme = Some(value.parse().map_err(|e: String| ParseError::new(line, e))?),
                "label" => file.label = Some(value),
                "temperature_mk" => file.temperature_mk = Some(number(line, &key, &value)?),
                "probe_power_dbm" => file.probe_power_dbm = Some(number(line, &key, &value)?),
                "pump_power_dbm" => file.pump_power_dbm = Some(number(line, &key, &value)?),
                "n_cav" => {
                    let n = number(line, &key, &value)?;
                    if n < 0.0 {
                        return Err(ParseError::new(line, format!("n_cav must be non-negative, got {n}")));
                    }
                    file.n_cav = Some(n);
                }
                _ => {}
            }
        }
        file.scheme = scheme.ok_or_else(|| ParseError::new(1, "missing '# scheme: red|blue' comment"))?;
        if file.pump_power_dbm.is_some() && file.n_cav.is_some() {
            return Err(ParseError::new(1, "give either pump_power_dbm or n_cav, not both"));
        }

        let mut rdr = reader(text);
        let header = rdr.headers().map_err(|e| ParseError::new(1, e.to_string()))?.clone();
        if header.iter().ne(DATASET_COLUMNS) {
            return Err(ParseError::new(
                header_line(text),
                format!("expected header '{}'", DATASET_COLUMNS.join(",")),
            ));
        }
        for record in rdr.records() {
            let record =
                record.map_err(|e| ParseError::new(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
            let line = record_line(&record);
            if record.len() != 3 {
                return Err(ParseError::new(
                    line,
                    format!("expected 3 fields, found {}", record.len()),
                ));
            }
            let row = Row {
                probe_freq_hz: number(line, DATASET_COLUMNS[0], &record[0])?,
                pump_freq_hz: number(line, DATASET_COLUMNS[1], &record[1])?,
                s21_mag: number(line, DATASET_COLUMNS[2], &record[2])?,
            };
            if row.s21_mag < 0.0 {
                return Err(ParseError::new(
                    line,
                    format!("s21_mag must be non-negative, got {}", row.s21_mag),
                ));
            }
            file.rows.push(row);
        }
        Ok(file)
    }

    /// Drive recorded in the metadata.
    pub fn drive(&self) -> Option<PumpDrive> {
        match (self.n_cav, self.pump_power_dbm) {
            (Some(n), _) => Some(PumpDrive::PhotonNumber(n)),
            (None, Some(p)) => Some(PumpDrive::InputPower(dbm_to_watts(p))),
            _ => None,
        }
    }

    pub fn fit_points(&self) -> Vec<DataPoint> {
        self.rows
            .iter()
            .map(|r| DataPoint {
                probe_omega: hz_to_rad(r.probe_freq_hz),
                pump_omega: hz_to_rad(r.pump_freq_hz),
                magnitude: r.s21_mag,
                weight: 1.0,
            })
            .collect()
    }

    /// One trace per distinct pump frequency, in order of first appearance,
    /// on the absolute probe axis.
    pub fn traces(&self) -> Vec<SweepTrace> {
        let mut by_pump: BTreeMap<u64, (usize, Vec<&Row>)> = BTreeMap::new();
        for (i, r) in self.rows.iter().enumerate() {
            by_pump
                .entry(r.pump_freq_hz.to_bits())
                .or_insert((i, Vec::new()))
                .1
                .push(r);
        }
        let mut groups: Vec<_> = by_pump.into_values().collect();
        groups.sort_by_key(|(first, _)| *first);
        groups
            .into_iter()
            .map(|(_, mut rows)| {
                rows.sort_by(|a, b| a.probe_freq_hz.total_cmp(&b.probe_freq_hz));
                SweepTrace {
                    omega: rows.iter().map(|r| hz_to_rad(r.probe_freq_hz)).collect(),
                    axis: AxisKind::AbsoluteProbe,
                    s21: Samples::Magnitude(rows.iter().map(|r| r.s21_mag).collect()),
                    meta: TraceMeta {
                        scheme: self.scheme,
                        pump_omega: hz_to_rad(rows[0].pump_freq_hz),
                        delta: None,
                        drive: self.drive(),
                        temperature_mk: self.temperature_mk,
                        probe_power_dbm: self.probe_power_dbm,
                        noise: None,
                    },
                }
            })
            .collect()
    }
}

/// Map CSV: `Δ` down the first column, `Ω` along the header row, both Hz.
pub fn map_to_csv(map: &SweepMap) -> String {
    let mut out = String::new();
    let meta = &map.meta;
    writeln!(out, "# scheme: {}", meta.scheme).unwrap();
    writeln!(out, "# fc_hz: {:e}", rad_to_hz(meta.omega_c)).unwrap();
    match meta.drive {
        PumpDrive::PhotonNumber(n) => writeln!(out, "# n_cav: {n:e}").unwrap(),
        PumpDrive::InputPower(w) => {
            if let Ok(p) = watts_to_dbm(w) {
                writeln!(out, "# pump_power_dbm: {p:e}").unwrap();
            }
        }
    }
    if let Some(t) = meta.temperature_mk {
        writeln!(out, "# temperature_mK: {t:e}").unwrap();
    }
    if let Some(p) = meta.probe_power_dbm {
        writeln!(out, "# probe_power_dbm: {p:e}").unwrap();
    }
    out.push_str(MAP_CORNER);
    for &w in &map.omega_axis {
        write!(out, ",{:e}", rad_to_hz(w)).unwrap();
    }
    out.push('\n');
    for (r, &delta) in map.delta_axis.iter().enumerate() {
        write!(out, "{:e}", rad_to_hz(delta)).unwrap();
        for v in map.row(r) {
            write!(out, ",{v:e}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Reads a map written by [`map_to_csv`]. Axes come back in rad/s.
pub fn map_from_csv(text: &str) -> Result<SweepMap, ParseError> {
    let mut scheme = None;
    let mut omega_c = None;
    let mut drive = None;
    let mut meta_t = None;
    let mut meta_p = None;
    for (line, key, value) in header_comments(text) {
        match key.as_str() {
            "scheme" => scheme = Some(value.parse().map_err(|e: String| ParseError::new(line, e))?),
            "fc_hz" => omega_c = Some(hz_to_rad(number(line, &key, &value)?)),
            "n_cav" => drive = Some(PumpDrive::PhotonNumber(number(line, &key, &value)?)),
            "pump_power_dbm" => drive = Some(PumpDrive::InputPower(dbm_to_watts(number(line, &key, &value)?))),
            "temperature_mk" => meta_t = Some(number(line, &key, &value)?),
            "probe_power_dbm" => meta_p = Some(number(line, &key, &value)?),
            _ => {}
        }
    }
    let missing = |what: &str| ParseError::new(1, format!("missing '# {what}' comment"));
    let meta = MapMeta {
        scheme: scheme.ok_or_else(|| missing("scheme"))?,
        drive: drive.ok_or_else(|| missing("n_cav or pump_power_dbm"))?,
        omega_c: omega_c.ok_or_else(|| missing("fc_hz"))?,
        temperature_mk: meta_t,
        probe_power_dbm: meta_p,
    };

    let mut rdr = reader(text);
    let header = rdr.headers().map_err(|e| ParseError::new(1, e.to_string()))?.clone();
    let header_line = header_line(text);
    if header.get(0) != Some(MAP_CORNER) {
        return Err(ParseError::new(
            header_line,
            format!("expected '{MAP_CORNER}' in the first header cell"),
        ));
    }
    let omega_axis = header
        .iter()
        .skip(1)
        .map(|h| number(header_line, "omega_hz", h).map(hz_to_rad))
        .collect::<Result<Vec<_>, _>>()?;
    let mut delta_axis = Vec::new();
    let mut s21_mag = Vec::new();
    for record in rdr.records() {
        let record =
            record.map_err(|e| ParseError::new(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = record_line(&record);
        if record.len() != omega_axis.len() + 1 {
            return Err(ParseError::new(
                line,
                format!("expected {} fields, found {}", omega_axis.len() + 1, record.len()),
            ));
        }
        delta_axis.push(hz_to_rad(number(line, "delta_hz", &record[0])?));
        for v in record.iter().skip(1) {
            s21_mag.push(number(line, "s21_mag", v)?);
        }
    }
    Ok(SweepMap {
        delta_axis,
        omega_axis,
        s21_mag,
        meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DatasetFile {
        DatasetFile {
            scheme: PumpScheme::Blue,
            label: Some("blue-250".into()),
            temperature_mk: Some(250.0),
            probe_power_dbm: Some(-116.0),
            pump_power_dbm: None,
            n_cav: Some(3.4e5),
            rows: vec![
                Row {
                    probe_freq_hz: 6.000_003_8e9 + 0.1,
                    pump_freq_hz: 6.0038e9,
                    s21_mag: 0.201_806_014_673_869_2,
                },
                Row {
                    probe_freq_hz: 6.000_003_9e9,
                    pump_freq_hz: 6.0038e9,
                    s21_mag: 1.0 / 3.0,
                },
            ],
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let f = sample();
        assert_eq!(DatasetFile::parse(&f.to_csv()).unwrap(), f);
    }

    #[test]
    fn bad_row_reports_its_line() {
        let mut text = sample().to_csv();
        text.push_str("6e9,6e9,abc\n");
        let err = DatasetFile::parse(&text).unwrap_err();
        assert_eq!(err.line, text.lines().count());
        assert!(err.message.contains("s21_mag"), "{}", err.message);
    }

    #[test]
    fn short_row_reports_its_line() {
        let text = "# scheme: red\nprobe_freq_hz,pump_freq_hz,s21_mag\n1,2,0.5\n1,2\n";
        assert_eq!(DatasetFile::parse(text).unwrap_err().line, 4);
    }

    #[test]
    fn invariants_are_enforced() {
        let text = "# scheme: red\nprobe_freq_hz,pump_freq_hz,s21_mag\n1,2,-0.5\n";
        assert_eq!(DatasetFile::parse(text).unwrap_err().line, 3);
        let text = "probe_freq_hz,pump_freq_hz,s21_mag\n1,2,0.5\n";
        assert!(DatasetFile::parse(text).is_err());
        let text = "# scheme: green\nprobe_freq_hz,pump_freq_hz,s21_mag\n";
        assert_eq!(DatasetFile::parse(text).unwrap_err().line, 1);
        let text = "# scheme: red\nprobe_freq_hz,pump_freq_hz,s21_mag\n1,inf,0.5\n";
        assert!(DatasetFile::parse(text).is_err());
        let text = "# scheme: red\nfreq,pump,mag\n";
        assert_eq!(DatasetFile::parse(text).unwrap_err().line, 2);
    }

    #[test]
    fn traces_split_by_pump_frequency() {
        let mut f = sample();
        f.rows.push(Row {
            probe_freq_hz: 6.0e9,
            pump_freq_hz: 6.0039e9,
            s21_mag: 0.5,
        });
        let traces = f.traces();
        assert_eq!(traces.len(), 2);
        assert_eq!(traces[0].omega.len(), 2);
        assert_eq!(traces[0].meta.drive, Some(PumpDrive::PhotonNumber(3.4e5)));
    }
}
