//! Run summaries, cross-replication aggregates, paired comparisons and output formats.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};

/// One function's measurements at one point in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub arrival_rps: f64,
    pub lrt_ms: f64,
    pub rt_ms: f64,
    pub millicores: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub time_s: f64,
    /// Aligned with [`Series::functions`].
    pub samples: Vec<Sample>,
}

/// A time series of samples for a fixed list of functions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub functions: Vec<String>,
    pub records: Vec<Record>,
}

impl Series {
    pub fn new(functions: Vec<String>) -> Self {
        Series {
            functions,
            records: Vec::new(),
        }
    }

    pub fn column(&self, function: &str) -> Option<impl Iterator<Item = &Sample>> {
        let i = self.functions.iter().position(|f| f == function)?;
        Some(self.records.iter().map(move |r| &r.samples[i]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionSummary {
    pub function: String,
    pub sla_ms: Option<f64>,
    pub rt_mean_ms: f64,
    pub rt_std_ms: f64,
    pub cores_mean_millicores: f64,
    pub cores_std_millicores: f64,
    /// Share of windows whose total RT exceeded the SLA; 0 when `no_sla`.
    pub violation_pct: f64,
    pub no_sla: bool,
    pub windows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub mode: String,
    pub replication: u32,
    pub seed: u64,
    pub functions: Vec<FunctionSummary>,
}

/// Mean over the whole application: RT and cores averaged over functions,
/// violations averaged over functions that have an SLA.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Overall {
    pub rt_mean_ms: f64,
    pub cores_mean_millicores: f64,
    pub violation_pct: f64,
}

impl RunSummary {
    pub fn function(&self, name: &str) -> Option<&FunctionSummary> {
        self.functions.iter().find(|f| f.function == name)
    }

    pub fn overall(&self) -> Overall {
        let n = self.functions.len().max(1) as f64;
        let v: Vec<f64> = self.functions.iter().filter(|f| !f.no_sla).map(|f| f.violation_pct).collect();
        Overall {
            rt_mean_ms: self.functions.iter().map(|f| f.rt_mean_ms).sum::<f64>() / n,
            cores_mean_millicores: self.functions.iter().map(|f| f.cores_mean_millicores).sum::<f64>() / n,
            violation_pct: if v.is_empty() { 0.0 } else { mean(&v) },
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Population standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Summaries from per-window records, ignoring windows ending before `skip_s`.
/// `slas` is aligned with `series.functions`.
pub fn summarize_from(series: &Series, slas: &[Option<f64>], skip_s: f64) -> Result<Vec<FunctionSummary>> {
    if slas.len() != series.functions.len() {
        return Err(Error::GridMismatch(format!(
            "{} SLAs for {} functions",
            slas.len(),
            series.functions.len()
        )));
    }
    let kept: Vec<&Record> = series.records.iter().filter(|r| r.time_s > skip_s).collect();
    if kept.is_empty() {
        return Err(Error::EmptySeries);
    }
    Ok(series
        .functions
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let rt: Vec<f64> = kept.iter().map(|r| r.samples[i].rt_ms).collect();
            let cores: Vec<f64> = kept.iter().map(|r| f64::from(r.samples[i].millicores)).collect();
            let violation_pct = slas[i]
                .map_or(0.0, |sla| 100.0 * rt.iter().filter(|&&v| v > sla).count() as f64 / rt.len() as f64);
            FunctionSummary {
                function: name.clone(),
                sla_ms: slas[i],
                rt_mean_ms: mean(&rt),
                rt_std_ms: std_dev(&rt),
                cores_mean_millicores: mean(&cores),
                cores_std_millicores: std_dev(&cores),
                violation_pct,
                no_sla: slas[i].is_none(),
                windows: rt.len(),
            }
        })
        .collect())
}

/// Same as [`summarize_from`] with SLAs looked up by function name.
pub fn summarize(series: &Series, slas: &BTreeMap<String, f64>) -> Result<Vec<FunctionSummary>> {
    let aligned: Vec<Option<f64>> = series.functions.iter().map(|f| slas.get(f).copied()).collect();
    summarize_from(series, &aligned, 0.0)
}

/// Cross-replication statistics: `mu` is the mean and `sigma` the spread of
/// the per-replication means.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub function: String,
    pub sla_ms: Option<f64>,
    pub mode: String,
    pub rt_mu: f64,
    pub rt_sigma: f64,
    pub v_mu: f64,
    pub v_sigma: f64,
    pub c_mu: f64,
    pub c_sigma: f64,
}

pub const OVERALL: &str = "overall";

fn check_same_functions(runs: &[RunSummary]) -> Result<Vec<String>> {
    let first = runs.first().ok_or(Error::EmptySeries)?;
    let names: Vec<String> = first.functions.iter().map(|f| f.function.clone()).collect();
    for r in runs {
        let other: Vec<&str> = r.functions.iter().map(|f| f.function.as_str()).collect();
        if other != names.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::GridMismatch("replications cover different functions".into()));
        }
    }
    Ok(names)
}

/// One row per function plus a trailing [`OVERALL`] row.
pub fn aggregate(runs: &[RunSummary]) -> Result<Vec<AggregateRow>> {
    let names = check_same_functions(runs)?;
    let mode = runs[0].mode.clone();
    let mut rows = Vec::with_capacity(names.len() + 1);
    for (i, name) in names.iter().enumerate() {
        let rt: Vec<f64> = runs.iter().map(|r| r.functions[i].rt_mean_ms).collect();
        let c: Vec<f64> = runs.iter().map(|r| r.functions[i].cores_mean_millicores).collect();
        let v: Vec<f64> = runs.iter().map(|r| r.functions[i].violation_pct).collect();
        rows.push(AggregateRow {
            function: name.clone(),
            sla_ms: runs[0].functions[i].sla_ms,
            mode: mode.clone(),
            rt_mu: mean(&rt),
            rt_sigma: std_dev(&rt),
            v_mu: mean(&v),
            v_sigma: std_dev(&v),
            c_mu: mean(&c),
            c_sigma: std_dev(&c),
        });
    }
    let overall: Vec<Overall> = runs.iter().map(RunSummary::overall).collect();
    let rt: Vec<f64> = overall.iter().map(|o| o.rt_mean_ms).collect();
    let v: Vec<f64> = overall.iter().map(|o| o.violation_pct).collect();
    let c: Vec<f64> = overall.iter().map(|o| o.cores_mean_millicores).collect();
    rows.push(AggregateRow {
        function: OVERALL.into(),
        sla_ms: None,
        mode,
        rt_mu: mean(&rt),
        rt_sigma: std_dev(&rt),
        v_mu: mean(&v),
        v_sigma: std_dev(&v),
        c_mu: mean(&c),
        c_sigma: std_dev(&c),
    });
    Ok(rows)
}

/// Differences of A relative to B, averaged over seed-paired replications.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Delta {
    pub function: String,
    /// `(B − A) / B · 100`: positive when A uses fewer cores.
    pub cores_reduction_pct: f64,
    /// `(A − B) / B · 100`: negative when A responds faster.
    pub rt_delta_pct: f64,
    /// `A − B` in percentage points.
    pub violation_delta_pp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub a_mode: String,
    pub b_mode: String,
    pub pairs: usize,
    pub functions: Vec<Delta>,
    pub overall: Delta,
}

fn rel(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den * 100.0
    }
}

fn delta(name: &str, a: (f64, f64, f64), b: (f64, f64, f64)) -> Delta {
    let (a_rt, a_c, a_v) = a;
    let (b_rt, b_c, b_v) = b;
    Delta {
        function: name.to_string(),
        cores_reduction_pct: rel(b_c - a_c, b_c),
        rt_delta_pct: rel(a_rt - b_rt, b_rt),
        violation_delta_pp: a_v - b_v,
    }
}

fn mean_deltas(name: &str, ds: &[Delta]) -> Delta {
    let c: Vec<f64> = ds.iter().map(|d| d.cores_reduction_pct).collect();
    let r: Vec<f64> = ds.iter().map(|d| d.rt_delta_pct).collect();
    let v: Vec<f64> = ds.iter().map(|d| d.violation_delta_pp).collect();
    Delta {
        function: name.to_string(),
        cores_reduction_pct: mean(&c),
        rt_delta_pct: mean(&r),
        violation_delta_pp: mean(&v),
    }
}

/// Pairs replications of A and B by seed; both sides must cover the same seeds and functions.
pub fn compare(a: &[RunSummary], b: &[RunSummary]) -> Result<Comparison> {
    let names = check_same_functions(a)?;
    if check_same_functions(b)? != names {
        return Err(Error::GridMismatch("the two sides cover different functions".into()));
    }
    let by_seed = |runs: &[RunSummary]| -> Result<BTreeMap<u64, RunSummary>> {
        let mut m = BTreeMap::new();
        for r in runs {
            if m.insert(r.seed, r.clone()).is_some() {
                return Err(Error::GridMismatch(format!("seed {} appears twice", r.seed)));
            }
        }
        Ok(m)
    };
    let (ma, mb) = (by_seed(a)?, by_seed(b)?);
    if !ma.keys().eq(mb.keys()) {
        return Err(Error::GridMismatch("the two sides were run on different seeds".into()));
    }

    let mut per_fn: Vec<Vec<Delta>> = vec![Vec::new(); names.len()];
    let mut overall = Vec::new();
    for (ra, rb) in ma.values().zip(mb.values()) {
        for (i, name) in names.iter().enumerate() {
            let (fa, fb) = (&ra.functions[i], &rb.functions[i]);
            per_fn[i].push(delta(
                name,
                (fa.rt_mean_ms, fa.cores_mean_millicores, fa.violation_pct),
                (fb.rt_mean_ms, fb.cores_mean_millicores, fb.violation_pct),
            ));
        }
        let (oa, ob) = (ra.overall(), rb.overall());
        overall.push(delta(
            OVERALL,
            (oa.rt_mean_ms, oa.cores_mean_millicores, oa.violation_pct),
            (ob.rt_mean_ms, ob.cores_mean_millicores, ob.violation_pct),
        ));
    }
    Ok(Comparison {
        a_mode: a[0].mode.clone(),
        b_mode: b[0].mode.clone(),
        pairs: ma.len(),
        functions: names.iter().zip(&per_fn).map(|(n, ds)| mean_deltas(n, ds)).collect(),
        overall: mean_deltas(OVERALL, &overall),
    })
}

pub const TICK_HEADER: [&str; 6] = ["time_s", "function", "arrival_rps", "lrt_ms", "rt_ms", "millicores"];
pub const SUMMARY_HEADER: [&str; 9] = [
    "function", "sla_ms", "mode", "rt_mu", "rt_sigma", "v_mu", "v_sigma", "c_mu", "c_sigma",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Long format: one row per (time, function).
pub fn write_series_csv<W: Write>(series: &Series, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TICK_HEADER)?;
    for r in &series.records {
        for (name, s) in series.functions.iter().zip(&r.samples) {
            w.write_record([
                format!("{:.3}", r.time_s),
                name.clone(),
                s.arrival_rps.to_string(),
                s.lrt_ms.to_string(),
                s.rt_ms.to_string(),
                s.millicores.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(rows: &[AggregateRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.function.clone(),
            opt(r.sla_ms),
            r.mode.clone(),
            r.rt_mu.to_string(),
            r.rt_sigma.to_string(),
            r.v_mu.to_string(),
            r.v_sigma.to_string(),
            r.c_mu.to_string(),
            r.c_sigma.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

fn pm(mu: f64, sigma: f64, decimals: usize) -> String {
    format!("{mu:.decimals$} ± {sigma:.decimals$}")
}

/// Aligned plain-text table, one block per mode.
pub fn render_summary_table(rows: &[AggregateRow]) -> String {
    let mut cells: Vec<[String; 6]> = vec![[
        "function".into(),
        "SLA (ms)".into(),
        "mode".into(),
        "RT (ms)".into(),
        "violations (%)".into(),
        "cores (m)".into(),
    ]];
    for r in rows {
        cells.push([
            r.function.clone(),
            r.sla_ms.map(|s| format!("{s}")).unwrap_or_else(|| "-".into()),
            r.mode.clone(),
            pm(r.rt_mu, r.rt_sigma, 2),
            if r.sla_ms.is_some() || r.function == OVERALL {
                pm(r.v_mu, r.v_sigma, 2)
            } else {
                "no-sla".into()
            },
            pm(r.c_mu, r.c_sigma, 0),
        ]);
    }
    let mut widths = [0usize; 6];
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    for row in &cells {
        let line: Vec<String> = row
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

pub fn render_comparison(c: &Comparison) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} vs {} over {} paired replication(s)",
        c.a_mode, c.b_mode, c.pairs
    );
    let width = c.functions.iter().map(|d| d.function.len()).max().unwrap_or(0).max(OVERALL.len());
    let _ = writeln!(
        out,
        "{:width$}  {:>16}  {:>12}  {:>18}",
        "function", "cores reduction%", "RT delta%", "violation delta pp"
    );
    for d in c.functions.iter().chain(std::iter::once(&c.overall)) {
        let _ = writeln!(
            out,
            "{:width$}  {:>16.2}  {:>12.2}  {:>18.2}",
            d.function,
            d.cores_reduction_pct,
            d.rt_delta_pct,
            d.violation_delta_pp
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    fn series(values: &[(f64, f64, u32)]) -> Series {
        let mut s = Series::new(vec!["f".into()]);
        for (k, &(_, rt, mc)) in values.iter().enumerate() {
            s.records.push(Record {
                time_s: (k + 1) as f64,
                samples: vec![Sample {
                    arrival_rps: 1.0,
                    lrt_ms: rt,
                    rt_ms: rt,
                    millicores: mc,
                }],
            });
        }
        s
    }

    fn run(seed: u64, rt: f64, cores: f64, v: f64) -> RunSummary {
        RunSummary {
            mode: "x".into(),
            replication: seed as u32,
            seed,
            functions: vec![FunctionSummary {
                function: "f".into(),
                sla_ms: Some(10.0),
                rt_mean_ms: rt,
                rt_std_ms: 0.0,
                cores_mean_millicores: cores,
                cores_std_millicores: 0.0,
                violation_pct: v,
                no_sla: false,
                windows: 1,
            }],
        }
    }

    #[test]
    fn summary_stats() {
        let s = series(&[(0.0, 5.0, 100), (0.0, 12.0, 300), (0.0, 10.0, 200), (0.0, 13.0, 200)]);
        let f = &summarize_from(&s, &[Some(10.0)], 0.0).unwrap()[0];
        assert_relative_eq!(f.rt_mean_ms, 10.0);
        assert_relative_eq!(f.rt_std_ms, (38.0f64 / 4.0).sqrt());
        assert_relative_eq!(f.cores_mean_millicores, 200.0);
        assert_eq!(f.violation_pct, 50.0);

        let skipped = &summarize_from(&s, &[None], 2.0).unwrap()[0];
        assert_eq!(skipped.windows, 2);
        assert_eq!(skipped.violation_pct, 0.0);
        assert!(skipped.no_sla);
        assert!(matches!(summarize_from(&s, &[None], 10.0), Err(Error::EmptySeries)));
    }

    #[test]
    fn constant_series_has_zero_sigma() {
        let s = series(&[(0.0, 7.0, 400); 20]);
        let f = &summarize(&s, &BTreeMap::from([("f".to_string(), 7.0)])).unwrap()[0];
        assert_eq!(f.rt_std_ms, 0.0);
        assert_eq!(f.cores_std_millicores, 0.0);
        assert_eq!(f.violation_pct, 0.0);
    }

    #[test]
    fn aggregate_uses_replication_means() {
        let rows = aggregate(&[run(1, 10.0, 100.0, 0.0), run(2, 20.0, 300.0, 10.0)]).unwrap();
        assert_eq!(rows.len(), 2);
        assert_relative_eq!(rows[0].rt_mu, 15.0);
        assert_relative_eq!(rows[0].rt_sigma, 5.0);
        assert_relative_eq!(rows[0].c_sigma, 100.0);
        assert_eq!(rows[1].function, OVERALL);
    }

    #[test]
    fn comparison_deltas() {
        let a = [run(1, 8.0, 3760.0, 0.0)];
        let b = [run(1, 10.0, 6530.0, 2.0)];
        let c = compare(&a, &b).unwrap();
        assert_relative_eq!(c.functions[0].cores_reduction_pct, 42.4196, epsilon = 1e-4);
        assert_relative_eq!(c.functions[0].rt_delta_pct, -20.0);
        assert_eq!(c.functions[0].violation_delta_pp, -2.0);
        assert_relative_eq!(c.overall.cores_reduction_pct, c.functions[0].cores_reduction_pct);

        assert!(matches!(compare(&a, &[run(2, 1.0, 1.0, 0.0)]), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn csv_headers() {
        let mut buf = Vec::new();
        write_series_csv(&series(&[(0.0, 1.0, 100)]), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("time_s,function,arrival_rps,lrt_ms,rt_ms,millicores\n"));

        let mut buf = Vec::new();
        write_summary_csv(&aggregate(&[run(1, 1.0, 1.0, 0.0)]).unwrap(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("function,sla_ms,mode,rt_mu,rt_sigma,v_mu,v_sigma,c_mu,c_sigma\n"));
        assert!(render_summary_table(&aggregate(&[run(1, 1.0, 1.0, 0.0)]).unwrap()).contains("overall"));
    }
}
