//! Hand-measurement datasets and population coverage against a reference anthropometry.
//!
//! Coverage of one measurement is the share of a normal reference population lying between
//! the smallest and largest value observed in the sample.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub const MEASUREMENTS_CSV: &str = include_str!("../data/measurements.csv");
pub const SAMPLE_CSV: &str = include_str!("../data/sample_stats.csv");
pub const REFERENCE_CSV: &str = include_str!("../data/reference_stats.csv");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementDef {
    pub id: u32,
    pub description: String,
    /// Base measurement ids summed to obtain a derived measurement; empty for measured ones.
    pub components: Vec<u32>,
}

impl MeasurementDef {
    pub fn derived(&self) -> bool {
        !self.components.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    #[serde(rename = "id")]
    pub measurement_id: u32,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub n: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceStats {
    #[serde(rename = "id")]
    pub measurement_id: u32,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

fn check_ordering(id: u32, mean: f64, sd: f64, min: f64, max: f64) -> Result<()> {
    let finite = [mean, sd, min, max].iter().all(|v| v.is_finite());
    if !finite || !(sd > 0.0) || !(min < max) || !(min <= mean && mean <= max) {
        return Err(Error::data(format!(
            "measurement {id}: need sd > 0 and min <= mean <= max with min < max (mean {mean}, sd {sd}, min {min}, max {max})"
        )));
    }
    Ok(())
}

impl SampleStats {
    pub fn validate(&self) -> Result<()> {
        check_ordering(self.measurement_id, self.mean, self.sd, self.min, self.max)?;
        if self.n == 0 {
            return Err(Error::data(format!("measurement {}: zero count", self.measurement_id)));
        }
        Ok(())
    }
}

impl ReferenceStats {
    pub fn validate(&self) -> Result<()> {
        check_ordering(self.measurement_id, self.mean, self.sd, self.min, self.max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    #[serde(rename = "id")]
    pub measurement_id: u32,
    pub p_min: f64,
    pub p_max: f64,
    pub coverage: f64,
}

/// Percentile of `x` in a normal population, in percent.
pub fn normal_percentile(x: f64, mean: f64, sd: f64) -> Result<f64> {
    if !(x.is_finite() && mean.is_finite() && sd.is_finite()) {
        return Err(Error::domain("normal_percentile needs finite inputs"));
    }
    if sd <= 0.0 {
        return Err(Error::domain(format!("standard deviation must be positive, got {sd}")));
    }
    let z = (x - mean) / sd;
    Ok(50.0 * erfc(-z / std::f64::consts::SQRT_2))
}

/// Rounds a percentile for display; anything at or above 99.995 shows as 100.
pub fn display_percent(p: f64) -> String {
    if p >= 99.995 {
        "100".to_string()
    } else {
        format!("{p:.2}")
    }
}

pub fn coverage(sample: &SampleStats, reference: &ReferenceStats) -> Result<CoverageResult> {
    if sample.measurement_id != reference.measurement_id {
        return Err(Error::usage(format!(
            "sample measurement {} compared against reference {}",
            sample.measurement_id, reference.measurement_id
        )));
    }
    let p_min = normal_percentile(sample.min, reference.mean, reference.sd)?;
    let p_max = normal_percentile(sample.max, reference.mean, reference.sd)?;
    Ok(CoverageResult { measurement_id: sample.measurement_id, p_min, p_max, coverage: p_max - p_min })
}

/// Coverage for every reference row, in reference order.
pub fn coverage_table(samples: &[SampleStats], references: &[ReferenceStats]) -> Result<Vec<CoverageResult>> {
    let by_id: HashMap<u32, &SampleStats> = samples.iter().map(|s| (s.measurement_id, s)).collect();
    references
        .iter()
        .map(|r| {
            let s = by_id
                .get(&r.measurement_id)
                .ok_or_else(|| Error::data(format!("no sample statistics for measurement {}", r.measurement_id)))?;
            coverage(s, r)
        })
        .collect()
}

/// Mean and sample standard deviation (n - 1 denominator) of the coverage column.
pub fn coverage_summary(results: &[CoverageResult]) -> Result<(f64, f64)> {
    let n = results.len();
    if n < 2 {
        return Err(Error::usage(format!("coverage summary needs at least two results, got {n}")));
    }
    let mean = results.iter().map(|r| r.coverage).sum::<f64>() / n as f64;
    let ss: f64 = results.iter().map(|r| (r.coverage - mean).powi(2)).sum();
    Ok((mean, (ss / (n - 1) as f64).sqrt()))
}

/// Count-weighted two-component mixture of the same measurement.
pub fn combine_populations(a: &SampleStats, b: &SampleStats) -> Result<SampleStats> {
    if a.measurement_id != b.measurement_id {
        return Err(Error::usage(format!(
            "cannot combine measurement {} with {}",
            a.measurement_id, b.measurement_id
        )));
    }
    if a.n == 0 || b.n == 0 {
        return Err(Error::domain("population counts must be positive"));
    }
    let (na, nb) = (a.n as f64, b.n as f64);
    let n = na + nb;
    let mean = (na * a.mean + nb * b.mean) / n;
    let second = (na * (a.sd * a.sd + a.mean * a.mean) + nb * (b.sd * b.sd + b.mean * b.mean)) / n;
    let var = (second - mean * mean).max(0.0);
    Ok(SampleStats {
        measurement_id: a.measurement_id,
        mean,
        sd: var.sqrt(),
        min: a.min.min(b.min),
        max: a.max.max(b.max),
        n: a.n + b.n,
    })
}

#[derive(Deserialize)]
struct DefRow {
    id: u32,
    description: String,
    components: String,
}

pub fn load_measurement_defs<R: Read>(reader: R) -> Result<Vec<MeasurementDef>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out: Vec<MeasurementDef> = Vec::new();
    for row in rdr.deserialize() {
        let row: DefRow = row?;
        let components = row
            .components
            .split('+')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<u32>().map_err(|_| Error::data(format!("measurement {}: bad component {s:?}", row.id))))
            .collect::<Result<Vec<_>>>()?;
        if out.iter().any(|d| d.id == row.id) {
            return Err(Error::data(format!("duplicate measurement id {}", row.id)));
        }
        out.push(MeasurementDef { id: row.id, description: row.description, components });
    }
    for d in &out {
        for c in &d.components {
            match out.iter().find(|o| o.id == *c) {
                Some(o) if !o.derived() => {}
                _ => return Err(Error::data(format!("measurement {} refers to unknown base id {c}", d.id))),
            }
        }
    }
    Ok(out)
}

fn load_rows<T: for<'de> Deserialize<'de>, R: Read>(reader: R) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn load_sample_stats<R: Read>(reader: R) -> Result<Vec<SampleStats>> {
    let rows: Vec<SampleStats> = load_rows(reader)?;
    rows.iter().try_for_each(SampleStats::validate)?;
    Ok(rows)
}

pub fn load_reference_stats<R: Read>(reader: R) -> Result<Vec<ReferenceStats>> {
    let rows: Vec<ReferenceStats> = load_rows(reader)?;
    rows.iter().try_for_each(ReferenceStats::validate)?;
    Ok(rows)
}

pub fn builtin_measurement_defs() -> Vec<MeasurementDef> {
    load_measurement_defs(MEASUREMENTS_CSV.as_bytes()).expect("builtin measurement table")
}

pub fn builtin_sample_stats() -> Vec<SampleStats> {
    load_sample_stats(SAMPLE_CSV.as_bytes()).expect("builtin sample table")
}

pub fn builtin_reference_stats() -> Vec<ReferenceStats> {
    load_reference_stats(REFERENCE_CSV.as_bytes()).expect("builtin reference table")
}

/// Fills in derived measurements for one hand from its base measurements.
pub fn derive_measurements(defs: &[MeasurementDef], base: &BTreeMap<u32, f64>) -> Result<BTreeMap<u32, f64>> {
    let mut out = base.clone();
    for d in defs.iter().filter(|d| d.derived()) {
        let mut total = 0.0;
        for c in &d.components {
            total += base
                .get(c)
                .ok_or_else(|| Error::data(format!("measurement {} needs base id {c}", d.id)))?;
        }
        out.insert(d.id, total);
    }
    Ok(out)
}

pub fn write_coverage_csv<W: std::io::Write>(w: W, results: &[CoverageResult]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["id", "p_min", "p_max", "coverage"])?;
    for r in results {
        wtr.write_record([r.measurement_id.to_string(), r.p_min.to_string(), r.p_max.to_string(), r.coverage.to_string()])?;
    }
    if let Ok((mean, sd)) = coverage_summary(results) {
        wtr.write_record(["mean", "", "", &mean.to_string()])?;
        wtr.write_record(["sd", "", "", &sd.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads the per-measurement rows of a coverage CSV, skipping the summary rows.
pub fn read_coverage_csv<R: Read>(reader: R) -> Result<Vec<CoverageResult>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let Ok(id) = rec[0].parse::<u32>() else { continue };
        let num = |i: usize| rec[i].parse::<f64>().map_err(|_| Error::data(format!("bad number {:?}", &rec[i])));
        out.push(CoverageResult { measurement_id: id, p_min: num(1)?, p_max: num(2)?, coverage: num(3)? });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_at_mean_is_half() {
        assert!((normal_percentile(26.76, 26.76, 2.62).unwrap() - 50.0).abs() < 1e-12);
    }

    #[test]
    fn percentile_rejects_bad_sd() {
        assert!(normal_percentile(1.0, 0.0, 0.0).is_err());
        assert!(normal_percentile(f64::NAN, 0.0, 1.0).is_err());
    }

    #[test]
    fn display_rounding() {
        assert_eq!(display_percent(99.9951), "100");
        assert_eq!(display_percent(37.4672), "37.47");
    }

    #[test]
    fn degenerate_span() {
        let s = SampleStats { measurement_id: 1, mean: 5.0, sd: 1.0, min: 5.0, max: 5.0, n: 3 };
        let r = ReferenceStats { measurement_id: 1, mean: 5.0, sd: 1.0, min: 0.0, max: 9.0 };
        assert_eq!(coverage(&s, &r).unwrap().coverage, 0.0);
        let other = ReferenceStats { measurement_id: 2, ..r };
        assert!(matches!(coverage(&s, &other), Err(Error::Usage(_))));
    }

    #[test]
    fn summary_of_two() {
        let mk = |c| CoverageResult { measurement_id: 1, p_min: 0.0, p_max: c, coverage: c };
        let (m, sd) = coverage_summary(&[mk(70.0), mk(80.0)]).unwrap();
        assert_eq!(m, 75.0);
        assert!((sd - 50f64.sqrt()).abs() < 1e-12);
        assert!(coverage_summary(&[mk(50.0)]).is_err());
        assert!(coverage_summary(&[]).is_err());
    }

    #[test]
    fn mixture_moments() {
        let a = SampleStats { measurement_id: 3, mean: 0.0, sd: 1.0, min: -3.0, max: 3.0, n: 10 };
        let b = SampleStats { mean: 10.0, min: 7.0, max: 13.0, ..a };
        let c = combine_populations(&a, &b).unwrap();
        assert!((c.mean - 5.0).abs() < 1e-12);
        assert!((c.sd - 26f64.sqrt()).abs() < 1e-12);
        assert_eq!((c.min, c.max, c.n), (-3.0, 13.0, 20));
        let same = combine_populations(&a, &a).unwrap();
        assert!((same.mean - a.mean).abs() < 1e-12 && (same.sd - a.sd).abs() < 1e-12);
        let m = SampleStats { measurement_id: 3, mean: 20.0, sd: 2.0, min: 10.0, max: 30.0, n: 1000 };
        let f = SampleStats { mean: 30.0, sd: 3.0, n: 1300, ..m };
        assert!((combine_populations(&m, &f).unwrap().mean - 25.652).abs() < 1e-3);
    }

    #[test]
    fn builtin_tables_load() {
        let defs = builtin_measurement_defs();
        assert_eq!(defs.len(), 28);
        let derived: Vec<u32> = defs.iter().filter(|d| d.derived()).map(|d| d.id).collect();
        assert_eq!(derived, vec![26, 27, 28]);
        assert_eq!(builtin_sample_stats().len(), 28);
        assert_eq!(builtin_reference_stats().len(), 11);
    }

    #[test]
    fn derived_sums_follow_table() {
        let defs = builtin_measurement_defs();
        let means: BTreeMap<u32, f64> = builtin_sample_stats().iter().map(|s| (s.measurement_id, s.mean)).collect();
        let derived = derive_measurements(&defs, &means).unwrap();
        for id in [26, 27, 28] {
            assert!((derived[&id] - means[&id]).abs() < 0.02, "id {id}: {} vs {}", derived[&id], means[&id]);
        }
    }

    #[test]
    fn loader_rejects_bad_rows() {
        let bad = "id,mean,sd,min,max,n\n1,5,0,1,9,3\n";
        assert!(load_sample_stats(bad.as_bytes()).is_err());
        let bad_def = "id,description,components\n1,a,\n2,b,1+7\n";
        assert!(load_measurement_defs(bad_def.as_bytes()).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let rows = coverage_table(&builtin_sample_stats(), &builtin_reference_stats()).unwrap();
        let mut buf = Vec::new();
        write_coverage_csv(&mut buf, &rows).unwrap();
        assert_eq!(read_coverage_csv(buf.as_slice()).unwrap(), rows);
    }
}
