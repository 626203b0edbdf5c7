//! Seeded synthetic NetFlow-style records for offline runs.
//!
//! Rows carry the `L4_DST_PORT, L7_PROTO, TCP_FLAGS, Label, Attack` columns.
//! Class 0 is benign traffic; every other class is an attack category with
//! `Label = 1`. Per-row draws, all independent given the class:
//!
//! | column      | benign (class 0)                                          | attack (class c >= 1)                                        |
//! |-------------|-----------------------------------------------------------|--------------------------------------------------------------|
//! | L4_DST_PORT | 80 .30, 443 .25, 53 .15, 22 .05, 123 .05, U[1024, 65535] .20 | 80 .20, 445 .15, 21 .10, 53 .10, 111 .05, 0 .10, U[1, 1023] .30 |
//! | L7_PROTO    | 7.0 .35, 91.0 .30, 5.0 .20, 92.0 .10, 0.0 .05            | 0.0 .40, 7.0 .25, 5.0 .10, 11.0 .10, 131.0 .15               |
//! | TCP_FLAGS   | 27 .35, 24 .25, 30 .20, 16 .15, 2 .05                    | 2 .30, 22 .20, 20 .15, 194 .10, 222 .10, 27 .15              |
//!
//! Ports 80 and 53, protocols 0/5/7 and flag set 27 occur in both classes,
//! so single features overlap. A `(port, proto, flags)` triple is never
//! emitted for two different classes: a conflicting draw is redrawn up to
//! 16 times and then gets an unused high port, so every fixture is
//! perfectly separable by a deep enough tree.
//!
//! Class counts are exact: `n * w_c / sum(w)` rounded by largest remainder
//! (ties to the lower class). Labels are shuffled into row order.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::{PipelineError, Result};
use crate::flowdata::{FlowSchema, RecordTable, Value};
use crate::rng::{derive_seed, streams, SeededRng};

const ATTACKS: [&str; 5] = ["Exploits", "Fuzzers", "Reconnaissance", "DoS", "Generic"];

enum Port {
    Fixed(i64),
    Range(i64, i64),
}

const BENIGN_PORTS: [(Port, f64); 6] = [
    (Port::Fixed(80), 0.30),
    (Port::Fixed(443), 0.25),
    (Port::Fixed(53), 0.15),
    (Port::Fixed(22), 0.05),
    (Port::Fixed(123), 0.05),
    (Port::Range(1024, 65535), 0.20),
];
const ATTACK_PORTS: [(Port, f64); 7] = [
    (Port::Fixed(80), 0.20),
    (Port::Fixed(445), 0.15),
    (Port::Fixed(21), 0.10),
    (Port::Fixed(53), 0.10),
    (Port::Fixed(111), 0.05),
    (Port::Fixed(0), 0.10),
    (Port::Range(1, 1023), 0.30),
];
const BENIGN_PROTO: [(f64, f64); 5] = [(7.0, 0.35), (91.0, 0.30), (5.0, 0.20), (92.0, 0.10), (0.0, 0.05)];
const ATTACK_PROTO: [(f64, f64); 5] = [(0.0, 0.40), (7.0, 0.25), (5.0, 0.10), (11.0, 0.10), (131.0, 0.15)];
const BENIGN_FLAGS: [(i64, f64); 5] = [(27, 0.35), (24, 0.25), (30, 0.20), (16, 0.15), (2, 0.05)];
const ATTACK_FLAGS: [(i64, f64); 6] = [(2, 0.30), (22, 0.20), (20, 0.15), (194, 0.10), (222, 0.10), (27, 0.15)];

const REDRAWS: usize = 16;

fn pick<'a, T>(rng: &mut SeededRng, table: &'a [(T, f64)]) -> &'a T {
    let u = rng.unit();
    let mut acc = 0.0;
    for (v, p) in table {
        acc += p;
        if u < acc {
            return v;
        }
    }
    &table[table.len() - 1].0
}

/// Exact per-class counts for `n` rows by largest remainder.
pub fn class_counts(n: usize, weights: &[f64]) -> Result<Vec<usize>> {
    let total: f64 = weights.iter().sum();
    if weights.is_empty() || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || !(total > 0.0) {
        return Err(PipelineError::Config(
            "class weights must be non-negative, finite and not all zero".into(),
        ));
    }
    let quotas: Vec<f64> = weights.iter().map(|w| n as f64 * w / total).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let short = n - counts.iter().sum::<usize>();
    for &c in order.iter().take(short) {
        counts[c] += 1;
    }
    Ok(counts)
}

fn draw(rng: &mut SeededRng, class: usize) -> (i64, u64, i64) {
    let (ports, protos, flags): (&[(Port, f64)], &[(f64, f64)], &[(i64, f64)]) = if class == 0 {
        (&BENIGN_PORTS, &BENIGN_PROTO, &BENIGN_FLAGS)
    } else {
        (&ATTACK_PORTS, &ATTACK_PROTO, &ATTACK_FLAGS)
    };
    let port = match pick(rng, ports) {
        Port::Fixed(p) => *p,
        Port::Range(lo, hi) => lo + rng.below((hi - lo + 1) as u64) as i64,
    };
    let proto = *pick(rng, protos);
    let flag = *pick(rng, flags);
    (port, proto.to_bits(), flag)
}

/// Generate `n` rows with class proportions `weights` (one per class).
pub fn generate_synthetic(n: usize, weights: &[f64], seed: u64) -> Result<RecordTable> {
    let counts = class_counts(n, weights)?;
    let mut rng = SeededRng::new(derive_seed(seed, streams::SAMPLE));
    let mut classes: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(c, &k)| std::iter::repeat_n(c, k))
        .collect();
    rng.shuffle(&mut classes);

    let mut owner: BTreeMap<(i64, u64, i64), usize> = BTreeMap::new();
    let mut used_ports: BTreeSet<i64> = BTreeSet::new();
    let mut fallback_port = 65535;
    let mut rows = Vec::with_capacity(n);
    for &class in &classes {
        let mut triple = draw(&mut rng, class);
        let mut tries = 0;
        while owner.get(&triple).is_some_and(|&c| c != class) && tries < REDRAWS {
            triple = draw(&mut rng, class);
            tries += 1;
        }
        if owner.get(&triple).is_some_and(|&c| c != class) {
            while used_ports.contains(&fallback_port) {
                fallback_port -= 1;
            }
            triple.0 = fallback_port;
            fallback_port -= 1;
        }
        owner.insert(triple, class);
        used_ports.insert(triple.0);
        let (port, proto, flags) = triple;
        let attack = if class == 0 {
            "Benign"
        } else {
            ATTACKS[(class - 1) % ATTACKS.len()]
        };
        rows.push(vec![
            Value::Integer(port),
            Value::Real(f64::from_bits(proto)),
            Value::Integer(flags),
            Value::Integer(i64::from(class > 0)),
            Value::Text(attack.to_string()),
        ]);
    }
    Ok(RecordTable::new(FlowSchema::netflow_default().columns().to_vec(), rows)?)
}

pub fn write_synthetic(path: &Path, n: usize, weights: &[f64], seed: u64) -> Result<RecordTable> {
    let table = generate_synthetic(n, weights, seed)?;
    table.write_csv_file(path)?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn exact_counts() {
        assert_eq!(class_counts(1000, &[0.9, 0.1]).unwrap(), vec![900, 100]);
        assert_eq!(class_counts(10, &[1.0, 1.0, 1.0]).unwrap(), vec![4, 3, 3]);
        assert_eq!(class_counts(1, &[0.9, 0.1]).unwrap(), vec![1, 0]);
        assert!(class_counts(5, &[0.0, 0.0]).is_err());
        assert!(class_counts(5, &[-1.0, 2.0]).is_err());
        let t = generate_synthetic(1000, &[0.9, 0.1], 7).unwrap();
        let labels = t.column_values("Label").unwrap();
        assert_eq!(labels.iter().filter(|v| **v == Value::Integer(1)).count(), 100);
    }

    #[test]
    fn single_row_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        write_synthetic(&a, 1, &[0.9, 0.1], 3).unwrap();
        assert_eq!(std::fs::read_to_string(&a).unwrap().lines().count(), 2);
        write_synthetic(&a, 300, &[0.7, 0.3], 3).unwrap();
        write_synthetic(&b, 300, &[0.7, 0.3], 3).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        let reloaded = crate::flowdata::load_flow_csv(&a, &FlowSchema::netflow_default(), crate::flowdata::Policy::Strict).unwrap();
        assert_eq!(reloaded, generate_synthetic(300, &[0.7, 0.3], 3).unwrap());
    }

    #[test]
    fn no_conflicting_triples() {
        for seed in 0..5 {
            let t = generate_synthetic(2000, &[0.5, 0.3, 0.2], seed).unwrap();
            let mut seen: BTreeMap<String, String> = BTreeMap::new();
            for r in t.rows() {
                let key = format!("{}|{}|{}", r[0], r[1], r[2]);
                let class = r[4].to_string();
                assert_eq!(seen.entry(key).or_insert_with(|| class.clone()), &class);
            }
        }
    }
}
