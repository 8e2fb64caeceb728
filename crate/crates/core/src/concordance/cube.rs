use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ConcordanceError;
use crate::metrics::Metric;

/// One test of the suite: a metric measured on a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TestPoint {
    pub dataset: String,
    pub metric: Metric,
}

impl TestPoint {
    pub fn new(dataset: impl Into<String>, metric: Metric) -> Self {
        Self {
            dataset: dataset.into(),
            metric,
        }
    }
}

impl fmt::Display for TestPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.dataset, self.metric)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureReason {
    Oom,
    Timeout,
    Crash,
    Nonfinite,
}

impl FailureReason {
    pub fn name(self) -> &'static str {
        match self {
            FailureReason::Oom => "oom",
            FailureReason::Timeout => "timeout",
            FailureReason::Crash => "crash",
            FailureReason::Nonfinite => "nonfinite",
        }
    }
}

impl FromStr for FailureReason {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oom" => Ok(Self::Oom),
            "timeout" => Ok(Self::Timeout),
            "crash" => Ok(Self::Crash),
            "nonfinite" => Ok(Self::Nonfinite),
            other => Err(format!("unknown failure reason `{other}`")),
        }
    }
}

/// A performance value or a recorded failure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cell {
    Value(f64),
    Failed(FailureReason),
}

impl Cell {
    /// Finite values pass through; non-finite ones become failures.
    pub fn from_value(value: f64) -> Self {
        if value.is_finite() {
            Cell::Value(value)
        } else {
            Cell::Failed(FailureReason::Nonfinite)
        }
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            Cell::Value(v) if v.is_finite() => Some(v),
            _ => None,
        }
    }

    pub fn is_failed(&self) -> bool {
        self.value().is_none()
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Value(v) => write!(f, "{v}"),
            Cell::Failed(r) => write!(f, "FAILED:{}", r.name()),
        }
    }
}

impl FromStr for Cell {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("failed") {
            return Ok(Cell::Failed(FailureReason::Crash));
        }
        if let Some(reason) = s.strip_prefix("FAILED:") {
            return reason.parse().map(Cell::Failed);
        }
        s.parse::<f64>()
            .map(Cell::from_value)
            .map_err(|_| format!("bad value `{s}`"))
    }
}

/// Dense `(algorithm, seed, test)` grid of results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsCube {
    algorithms: Vec<String>,
    seeds: Vec<u64>,
    tests: Vec<TestPoint>,
    cells: Vec<Cell>,
}

impl ResultsCube {
    /// Cells in algorithm-major, then seed, then test order.
    pub fn new(
        algorithms: Vec<String>,
        seeds: Vec<u64>,
        tests: Vec<TestPoint>,
        cells: Vec<Cell>,
    ) -> Result<Self, ConcordanceError> {
        let expected = algorithms.len() * seeds.len() * tests.len();
        if cells.len() != expected {
            return Err(ConcordanceError::Shape(format!(
                "{} cells for {} x {} x {} grid",
                cells.len(),
                algorithms.len(),
                seeds.len(),
                tests.len()
            )));
        }
        check_unique(&algorithms, "algorithm")?;
        check_unique(&seeds, "seed")?;
        check_unique(&tests, "test")?;
        Ok(Self {
            algorithms,
            seeds,
            tests,
            cells,
        })
    }

    pub fn builder(algorithms: Vec<String>, seeds: Vec<u64>, tests: Vec<TestPoint>) -> CubeBuilder {
        let len = algorithms.len() * seeds.len() * tests.len();
        CubeBuilder {
            algorithms,
            seeds,
            tests,
            cells: vec![None; len],
        }
    }

    pub fn algorithms(&self) -> &[String] {
        &self.algorithms
    }

    pub fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    pub fn tests(&self) -> &[TestPoint] {
        &self.tests
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    fn index(&self, algorithm: usize, seed: usize, test: usize) -> usize {
        (algorithm * self.seeds.len() + seed) * self.tests.len() + test
    }

    pub fn get(&self, algorithm: usize, seed: usize, test: usize) -> Cell {
        self.cells[self.index(algorithm, seed, test)]
    }

    /// The `a` values of one seed on one test, in algorithm order.
    pub fn seed_row(&self, seed: usize, test: usize) -> Vec<Cell> {
        (0..self.algorithms.len())
            .map(|a| self.get(a, seed, test))
            .collect()
    }

    pub fn same_axes(&self, other: &ResultsCube) -> bool {
        self.algorithms == other.algorithms && self.seeds == other.seeds && self.tests == other.tests
    }

    pub fn failure_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_failed()).count()
    }

    /// Reads `algorithm,seed,dataset,metric,value` rows. A header row is
    /// optional. Axes keep first-appearance order and every grid cell must
    /// appear exactly once.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, ConcordanceError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut algorithms: Vec<String> = Vec::new();
        let mut seeds: Vec<u64> = Vec::new();
        let mut tests: Vec<TestPoint> = Vec::new();
        let mut rows: Vec<(usize, usize, usize, Cell, u64)> = Vec::new();
        let mut alg_ix = HashMap::new();
        let mut seed_ix = HashMap::new();
        let mut test_ix = HashMap::new();

        for (i, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| ConcordanceError::Csv {
                line: e.position().map_or(i as u64 + 1, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(i as u64 + 1, |p| p.line());
            let bad = |message: String| ConcordanceError::Csv { line, message };
            if record.len() != 5 {
                return Err(bad(format!("expected 5 fields, found {}", record.len())));
            }
            if i == 0 && record[0].eq_ignore_ascii_case("algorithm") {
                continue;
            }
            let seed: u64 = record[1]
                .parse()
                .map_err(|_| bad(format!("bad seed `{}`", &record[1])))?;
            let metric: Metric = record[3].parse().map_err(|e| bad(format!("{e}")))?;
            let cell: Cell = record[4].parse().map_err(bad)?;
            let test = TestPoint::new(&record[2], metric);

            let a = *alg_ix.entry(record[0].to_string()).or_insert_with(|| {
                algorithms.push(record[0].to_string());
                algorithms.len() - 1
            });
            let s = *seed_ix.entry(seed).or_insert_with(|| {
                seeds.push(seed);
                seeds.len() - 1
            });
            let t = *test_ix.entry(test.clone()).or_insert_with(|| {
                tests.push(test);
                tests.len() - 1
            });
            rows.push((a, s, t, cell, line));
        }

        let mut builder = ResultsCube::builder(algorithms, seeds, tests);
        for (a, s, t, cell, line) in rows {
            if builder.is_set(a, s, t) {
                return Err(ConcordanceError::Csv {
                    line,
                    message: "duplicate cell".into(),
                });
            }
            builder.set(a, s, t, cell);
        }
        builder.build()
    }

    pub fn to_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["algorithm", "seed", "dataset", "metric", "value"])?;
        for (a, alg) in self.algorithms.iter().enumerate() {
            for (s, seed) in self.seeds.iter().enumerate() {
                for (t, test) in self.tests.iter().enumerate() {
                    w.write_record([
                        alg.as_str(),
                        &seed.to_string(),
                        &test.dataset,
                        test.metric.name(),
                        &self.get(a, s, t).to_string(),
                    ])?;
                }
            }
        }
        w.flush()
    }
}

fn check_unique<T: Eq + std::hash::Hash + fmt::Debug>(
    items: &[T],
    what: &str,
) -> Result<(), ConcordanceError> {
    let mut seen = std::collections::HashSet::new();
    for item in items {
        if !seen.insert(item) {
            return Err(ConcordanceError::Shape(format!("duplicate {what} {item:?}")));
        }
    }
    Ok(())
}

/// Fills a cube cell by cell; [`CubeBuilder::build`] rejects gaps.
#[derive(Debug, Clone)]
pub struct CubeBuilder {
    algorithms: Vec<String>,
    seeds: Vec<u64>,
    tests: Vec<TestPoint>,
    cells: Vec<Option<Cell>>,
}

impl CubeBuilder {
    fn index(&self, a: usize, s: usize, t: usize) -> usize {
        (a * self.seeds.len() + s) * self.tests.len() + t
    }

    pub fn set(&mut self, algorithm: usize, seed: usize, test: usize, cell: Cell) {
        let i = self.index(algorithm, seed, test);
        self.cells[i] = Some(cell);
    }

    pub fn is_set(&self, algorithm: usize, seed: usize, test: usize) -> bool {
        self.cells[self.index(algorithm, seed, test)].is_some()
    }

    pub fn build(self) -> Result<ResultsCube, ConcordanceError> {
        if let Some(missing) = self.cells.iter().position(Option::is_none) {
            let per_alg = self.seeds.len() * self.tests.len();
            let (a, rest) = (missing / per_alg, missing % per_alg);
            let (s, t) = (rest / self.tests.len(), rest % self.tests.len());
            return Err(ConcordanceError::Incomplete(format!(
                "no value for algorithm `{}`, seed {}, test {}",
                self.algorithms[a], self.seeds[s], self.tests[t]
            )));
        }
        let cells = self.cells.into_iter().map(Option::unwrap).collect();
        ResultsCube::new(self.algorithms, self.seeds, self.tests, cells)
    }
}
