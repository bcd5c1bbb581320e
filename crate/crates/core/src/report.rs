//! Plot-ready tables from a sweep summary.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::experiment::fmt_load;
use crate::policy::Policy;

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub policy: Policy,
    pub load: f64,
    pub seed: u64,
    pub normalized_value: f64,
    pub starved_fraction: f64,
    pub decile_slr: [Option<f64>; 10],
}

pub fn parse_summary(text: &str) -> Result<Vec<Row>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::Format(format!("summary header: {e}")))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("summary is missing column `{name}`")))
    };
    let (pi, li, si, vi, fi) = (col("policy")?, col("load")?, col("seed")?, col("normalized_value")?, col("starved_fraction")?);
    let deciles: Vec<usize> = (1..=10).map(|d| col(&format!("decile_slr_{d}"))).collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(format!("summary row {}: {e}", n + 1)))?;
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let bad = |what: &str| Error::Format(format!("summary row {}: bad {what} `{}`", n + 1, rec.iter().collect::<Vec<_>>().join(",")));
        let num = |i: usize, what: &str| field(i).parse::<f64>().map_err(|_| bad(what));
        let mut decile_slr = [None; 10];
        for (d, &i) in deciles.iter().enumerate() {
            if !field(i).is_empty() {
                decile_slr[d] = Some(num(i, "decile")?);
            }
        }
        rows.push(Row {
            policy: field(pi).parse().map_err(|_| bad("policy"))?,
            load: num(li, "load")?,
            seed: field(si).parse().map_err(|_| bad("seed"))?,
            normalized_value: num(vi, "normalized_value")?,
            starved_fraction: num(fi, "starved_fraction")?,
            decile_slr,
        });
    }
    Ok(rows)
}

/// Mean and sample standard deviation; a single sample has deviation 0.
pub fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tables {
    pub value_vs_load: String,
    pub starvation_vs_load: String,
    pub decile_slr: String,
    /// grid cells with no data
    pub missing: Vec<String>,
}

fn load_key(l: f64) -> u64 {
    l.to_bits()
}

/// Builds the three report tables. Every (policy, load) pair seen anywhere in
/// the input gets a line; pairs without data are left blank.
pub fn build_tables(rows: &[Row], decile_load: f64) -> Tables {
    let policies: BTreeSet<Policy> = rows.iter().map(|r| r.policy).collect();
    let mut loads: Vec<f64> = rows.iter().map(|r| r.load).collect();
    loads.sort_by(f64::total_cmp);
    loads.dedup();

    let mut groups: BTreeMap<(Policy, u64), Vec<&Row>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.policy, load_key(r.load))).or_default().push(r);
    }

    let mut missing = Vec::new();
    let mut value = String::from("policy,load,mean,stddev,n\n");
    let mut starve = String::from("policy,load,mean,stddev,n\n");
    for &p in &policies {
        for &l in &loads {
            let g = groups.get(&(p, load_key(l))).map(Vec::as_slice).unwrap_or(&[]);
            let vs: Vec<f64> = g.iter().map(|r| r.normalized_value).collect();
            let ss: Vec<f64> = g.iter().map(|r| r.starved_fraction).collect();
            for (out, xs) in [(&mut value, &vs), (&mut starve, &ss)] {
                match mean_std(xs) {
                    Some((m, s)) => writeln!(out, "{p},{},{m},{s},{}", fmt_load(l), xs.len()).unwrap(),
                    None => writeln!(out, "{p},{},,,0", fmt_load(l)).unwrap(),
                }
            }
            if g.is_empty() {
                missing.push(format!("{p} at load {}", fmt_load(l)));
            }
        }
    }

    let mut deciles = String::from("policy,decile,mean,stddev,n\n");
    for &p in &policies {
        let g = groups.get(&(p, load_key(decile_load))).map(Vec::as_slice).unwrap_or(&[]);
        if g.is_empty() {
            missing.push(format!("{p} deciles at load {}", fmt_load(decile_load)));
        }
        for d in 0..10 {
            let xs: Vec<f64> = g.iter().filter_map(|r| r.decile_slr[d]).collect();
            match mean_std(&xs) {
                Some((m, s)) => writeln!(deciles, "{p},{},{m},{s},{}", d + 1, xs.len()).unwrap(),
                None => writeln!(deciles, "{p},{},,,0", d + 1).unwrap(),
            }
        }
    }

    Tables { value_vs_load: value, starvation_vs_load: starve, decile_slr: deciles, missing }
}
