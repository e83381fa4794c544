//! Round traces, summary statistics and the on-disk formats.
//!
//! Trace CSV header: `run,round,phase,population,lambda2,swaps,disconnected`.
//! `lambda2` is written with 9 significant digits and `disconnected` as
//! `0`/`1`. Traces store λ₂ already rounded to 9 significant digits, so
//! writing and re-reading a trace is lossless.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Join,
    Leave,
    BalanceMix,
    Mix,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::Join => "Join",
            Phase::Leave => "Leave",
            Phase::BalanceMix => "BalanceMix",
            Phase::Mix => "Mix",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Join" => Ok(Phase::Join),
            "Leave" => Ok(Phase::Leave),
            "BalanceMix" => Ok(Phase::BalanceMix),
            "Mix" => Ok(Phase::Mix),
            other => domain(format!("unknown phase label {other:?}")),
        }
    }
}

/// One measured round of one run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub run: usize,
    /// 1-based round index.
    pub round: usize,
    pub phase: Phase,
    pub population: usize,
    pub lambda2: f64,
    pub swaps: usize,
    pub disconnected: bool,
}

/// Formats like C's `%.9g`.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let fixed = format!("{x:.decimals$}");
        trim_fraction(&fixed).to_string()
    } else {
        let m = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Rounds to 9 significant digits (the precision traces are stored at).
pub fn round_sig9(x: f64) -> f64 {
    format_sig9(x).parse().expect("formatted float parses")
}

const CSV_HEADER: [&str; 7] = [
    "run",
    "round",
    "phase",
    "population",
    "lambda2",
    "swaps",
    "disconnected",
];

pub fn write_trace_csv<W: Write>(out: W, traces: &[RoundTrace]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Scenario(format!("writing trace CSV: {e}"));
    w.write_record(CSV_HEADER).map_err(io)?;
    for t in traces {
        w.write_record([
            t.run.to_string(),
            t.round.to_string(),
            t.phase.label().to_string(),
            t.population.to_string(),
            format_sig9(t.lambda2),
            t.swaps.to_string(),
            u8::from(t.disconnected).to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::Scenario(format!("writing trace CSV: {e}")))
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<RoundTrace>> {
    let mut r = csv::Reader::from_reader(input);
    let bad = |what: &str| Error::Domain(format!("trace CSV: bad {what}"));
    let headers = r.headers().map_err(|e| Error::Domain(format!("trace CSV: {e}")))?;
    if headers.iter().ne(CSV_HEADER) {
        return domain("trace CSV: unexpected header");
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Domain(format!("trace CSV: {e}")))?;
        if rec.len() != CSV_HEADER.len() {
            return Err(bad("row width"));
        }
        out.push(RoundTrace {
            run: rec[0].parse().map_err(|_| bad("run"))?,
            round: rec[1].parse().map_err(|_| bad("round"))?,
            phase: rec[2].parse()?,
            population: rec[3].parse().map_err(|_| bad("population"))?,
            lambda2: rec[4].parse().map_err(|_| bad("lambda2"))?,
            swaps: rec[5].parse().map_err(|_| bad("swaps"))?,
            disconnected: match &rec[6] {
                "0" => false,
                "1" => true,
                _ => return Err(bad("disconnected flag")),
            },
        });
    }
    Ok(out)
}

/// Whitespace-separated `round lambda2` lines for one run.
pub fn gnuplot_series(traces: &[RoundTrace], run: usize) -> String {
    traces
        .iter()
        .filter(|t| t.run == run)
        .map(|t| format!("{} {}\n", t.round, format_sig9(t.lambda2)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator; 0 for one value).
    pub stddev: f64,
}

impl SummaryStats {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return domain("summary of an empty series");
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Ok(Self {
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean,
            stddev: var.sqrt(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub stddev: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub pooled: SummaryStats,
    pub per_run: Vec<RunSummary>,
}

/// Pooled and per-run statistics of λ₂. Runs are reported in ascending
/// run order.
pub fn summarize(traces: &[RoundTrace]) -> Result<Summary> {
    let pooled = SummaryStats::of(&traces.iter().map(|t| t.lambda2).collect::<Vec<_>>())?;
    let mut runs: Vec<usize> = traces.iter().map(|t| t.run).collect();
    runs.sort_unstable();
    runs.dedup();
    let per_run = runs
        .into_iter()
        .map(|run| {
            let vals: Vec<f64> = traces.iter().filter(|t| t.run == run).map(|t| t.lambda2).collect();
            let s = SummaryStats::of(&vals)?;
            Ok(RunSummary {
                run,
                min: s.min,
                max: s.max,
                mean: s.mean,
                stddev: s.stddev,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Summary { pooled, per_run })
}

/// The JSON summary document: `{config, pooled, per_run}`.
pub fn summary_json<C: Serialize>(config: &C, summary: &Summary) -> Result<String> {
    #[derive(Serialize)]
    struct Doc<'a, C> {
        config: &'a C,
        pooled: &'a SummaryStats,
        per_run: &'a [RunSummary],
    }
    serde_json::to_string_pretty(&Doc {
        config,
        pooled: &summary.pooled,
        per_run: &summary.per_run,
    })
    .map_err(|e| Error::Scenario(format!("serializing summary: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(0.5), "0.5");
        assert_eq!(format_sig9(0.502123456789), "0.502123457");
        assert_eq!(format_sig9(2.0), "2");
        assert_eq!(format_sig9(123456789.0), "123456789");
        assert_eq!(format_sig9(1234567891.0), "1.23456789e+09");
        assert_eq!(format_sig9(1.5e-7), "1.5e-07");
        assert_eq!(format_sig9(0.0001), "0.0001");
        assert_eq!(format_sig9(-0.25), "-0.25");
    }

    #[test]
    fn constant_and_two_point_series() {
        let s = SummaryStats::of(&[0.5; 10]).unwrap();
        assert_eq!((s.min, s.max, s.mean, s.stddev), (0.5, 0.5, 0.5, 0.0));
        let s = SummaryStats::of(&[0.0, 1.0]).unwrap();
        assert_eq!(s.mean, 0.5);
        assert!((s.stddev - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(SummaryStats::of(&[]).is_err());
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn phase_labels_round_trip() {
        for p in [Phase::Join, Phase::Leave, Phase::BalanceMix, Phase::Mix] {
            assert_eq!(p.label().parse::<Phase>().unwrap(), p);
        }
        assert!("join".parse::<Phase>().is_err());
    }

    #[test]
    fn csv_header_and_rows() {
        let t = RoundTrace {
            run: 0,
            round: 1,
            phase: Phase::BalanceMix,
            population: 512,
            lambda2: 0.5,
            swaps: 77,
            disconnected: false,
        };
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &[t]).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "run,round,phase,population,lambda2,swaps,disconnected\n0,1,BalanceMix,512,0.5,77,0\n"
        );
        assert_eq!(read_trace_csv(&buf[..]).unwrap(), vec![t]);
        assert!(read_trace_csv(&b"a,b\n1,2\n"[..]).is_err());
    }
}
