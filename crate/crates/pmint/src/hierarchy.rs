//! Hierarchy structure, summing matrix and coherence checks.
//!
//! A hierarchy (or grouped structure) links `m` time series through linear
//! aggregation constraints: the `m - n` upper series are sums of subsets of
//! the `n` bottom series. The structure is encoded by the summing matrix
//! `S = [A; I]` so that a coherent observation vector satisfies `y = S b`,
//! with `b` the bottom sub-vector.
//!
//! Row and column order is fixed everywhere in this crate: aggregates first
//! (in declaration order), bottoms second (in declaration order). The bottom
//! block of `S` is therefore always the trailing identity.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, DVectorView};
use serde::Deserialize;

use crate::error::{Error, Result};

/// One upper series: a name plus the children it sums over.
///
/// Children may name bottom series or other aggregates (declared before or
/// after this one); expansion is transitive.
#[derive(Debug, Clone, Deserialize)]
pub struct Aggregate {
    /// Name of the aggregate series.
    pub name: String,
    /// Names of the summed children.
    pub children: Vec<String>,
}

/// A validated hierarchy specification.
///
/// Invariants enforced at construction: unique names, resolvable children,
/// no cycles, every aggregate expands to a nonempty set of bottoms, and no
/// bottom contributes twice to the same aggregate.
#[derive(Debug, Clone)]
pub struct HierarchySpec {
    bottom: Vec<String>,
    aggregates: Vec<Aggregate>,
    /// Per aggregate, the sorted indices of contributing bottoms.
    expansions: Vec<Vec<usize>>,
}

#[derive(Deserialize)]
struct RawSpec {
    bottom: Vec<String>,
    #[serde(default)]
    aggregates: Vec<Aggregate>,
}

/// Expansion state used for cycle detection.
#[derive(Clone, Copy, PartialEq)]
enum Mark {
    Unvisited,
    InProgress,
    Done,
}

impl HierarchySpec {
    /// Validates and builds a spec from bottom names and aggregate definitions.
    pub fn new(bottom: Vec<String>, aggregates: Vec<Aggregate>) -> Result<Self> {
        if bottom.is_empty() {
            return Err(Error::EmptyBottoms);
        }
        let mut seen: HashMap<&str, ()> = HashMap::new();
        for name in bottom.iter().chain(aggregates.iter().map(|a| &a.name)) {
            if seen.insert(name, ()).is_some() {
                return Err(Error::DuplicateName(name.clone()));
            }
        }

        let bottom_index: HashMap<&str, usize> = bottom
            .iter()
            .enumerate()
            .map(|(i, name)| (name.as_str(), i))
            .collect();
        let agg_index: HashMap<&str, usize> = aggregates
            .iter()
            .enumerate()
            .map(|(i, a)| (a.name.as_str(), i))
            .collect();

        // Expand every aggregate to bottom multiplicities, depth-first with
        // cycle detection. Multiplicity > 1 for any bottom is an error.
        let mut marks = vec![Mark::Unvisited; aggregates.len()];
        let mut counts: Vec<Option<Vec<u32>>> = vec![None; aggregates.len()];

        fn expand(
            agg: usize,
            aggregates: &[Aggregate],
            bottom_index: &HashMap<&str, usize>,
            agg_index: &HashMap<&str, usize>,
            marks: &mut [Mark],
            counts: &mut [Option<Vec<u32>>],
            n: usize,
        ) -> Result<()> {
            if marks[agg] == Mark::Done {
                return Ok(());
            }
            if marks[agg] == Mark::InProgress {
                return Err(Error::CyclicAggregate(aggregates[agg].name.clone()));
            }
            marks[agg] = Mark::InProgress;
            let mut count = vec![0u32; n];
            for child in &aggregates[agg].children {
                if let Some(&b) = bottom_index.get(child.as_str()) {
                    count[b] += 1;
                } else if let Some(&sub) = agg_index.get(child.as_str()) {
                    expand(sub, aggregates, bottom_index, agg_index, marks, counts, n)?;
                    for (b, c) in counts[sub].as_ref().unwrap().iter().enumerate() {
                        count[b] += c;
                    }
                } else {
                    return Err(Error::UnknownChild {
                        aggregate: aggregates[agg].name.clone(),
                        child: child.clone(),
                    });
                }
            }
            counts[agg] = Some(count);
            marks[agg] = Mark::Done;
            Ok(())
        }

        let n = bottom.len();
        let mut expansions = Vec::with_capacity(aggregates.len());
        for i in 0..aggregates.len() {
            expand(
                i,
                &aggregates,
                &bottom_index,
                &agg_index,
                &mut marks,
                &mut counts,
                n,
            )?;
        }
        for (i, agg) in aggregates.iter().enumerate() {
            let count = counts[i].as_ref().unwrap();
            let mut members = Vec::new();
            for (b, &c) in count.iter().enumerate() {
                if c > 1 {
                    return Err(Error::DuplicateContribution {
                        aggregate: agg.name.clone(),
                        bottom: bottom[b].clone(),
                    });
                }
                if c == 1 {
                    members.push(b);
                }
            }
            if members.is_empty() {
                return Err(Error::EmptyAggregate(agg.name.clone()));
            }
            expansions.push(members);
        }

        Ok(Self {
            bottom,
            aggregates,
            expansions,
        })
    }

    /// Parses the JSON hierarchy document: `{"bottom": [...], "aggregates":
    /// [{"name": ..., "children": [...]}, ...]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawSpec = serde_json::from_str(text)?;
        Self::new(raw.bottom, raw.aggregates)
    }

    /// Total number of series.
    pub fn m(&self) -> usize {
        self.aggregates.len() + self.bottom.len()
    }

    /// Number of bottom series.
    pub fn n(&self) -> usize {
        self.bottom.len()
    }

    /// Bottom series names, in declaration order.
    pub fn bottom_names(&self) -> &[String] {
        &self.bottom
    }

    /// All series names: aggregates first, bottoms second.
    pub fn names(&self) -> Vec<String> {
        self.aggregates
            .iter()
            .map(|a| a.name.clone())
            .chain(self.bottom.iter().cloned())
            .collect()
    }
}

/// The summing matrix `S = [A; I]` of a hierarchy.
#[derive(Debug, Clone)]
pub struct SummingMatrix {
    s: DMatrix<f64>,
    names: Vec<String>,
}

impl SummingMatrix {
    /// Builds `S` from a validated spec. Row order is aggregates (spec
    /// order) then bottoms (spec order); the bottom block is the identity.
    pub fn from_spec(spec: &HierarchySpec) -> Self {
        let m = spec.m();
        let n = spec.n();
        let mut s = DMatrix::zeros(m, n);
        for (row, members) in spec.expansions.iter().enumerate() {
            for &b in members {
                s[(row, b)] = 1.0;
            }
        }
        for b in 0..n {
            s[(m - n + b, b)] = 1.0;
        }
        Self {
            s,
            names: spec.names(),
        }
    }

    /// Builds a summing matrix directly from the 0/1 incidence rows of `A`
    /// (one row per upper series). Covers grouped structures that are
    /// generated programmatically rather than parsed.
    pub fn from_incidence(a: &DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        let n = a.ncols();
        let m = a.nrows() + n;
        if names.len() != m {
            return Err(Error::DimensionMismatch {
                expected: format!("{m} names"),
                actual: format!("{}", names.len()),
            });
        }
        for i in 0..a.nrows() {
            let mut ones = 0;
            for j in 0..n {
                let v = a[(i, j)];
                if v != 0.0 && v != 1.0 {
                    return Err(Error::Parse {
                        file: "incidence matrix".into(),
                        message: format!("entry ({i},{j}) = {v} is not 0/1"),
                    });
                }
                ones += (v == 1.0) as usize;
            }
            if ones == 0 {
                return Err(Error::EmptyAggregate(names[i].clone()));
            }
        }
        let mut s = DMatrix::zeros(m, n);
        s.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
        for b in 0..n {
            s[(m - n + b, b)] = 1.0;
        }
        Ok(Self { s, names })
    }

    /// The full `m x n` matrix.
    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }

    /// The upper `(m-n) x n` incidence block.
    pub fn a(&self) -> DMatrix<f64> {
        self.s.view((0, 0), (self.m() - self.n(), self.n())).into()
    }

    /// Total number of series.
    pub fn m(&self) -> usize {
        self.s.nrows()
    }

    /// Number of bottom series.
    pub fn n(&self) -> usize {
        self.s.ncols()
    }

    /// Number of upper series.
    pub fn uppers(&self) -> usize {
        self.m() - self.n()
    }

    /// Series names in matrix row order.
    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// A `T x m` panel of observations in hierarchy order.
#[derive(Debug, Clone)]
pub struct SeriesPanel {
    /// One row per time step, one column per series.
    pub values: DMatrix<f64>,
    /// Column names, matching the summing-matrix order.
    pub names: Vec<String>,
}

impl SeriesPanel {
    /// Number of time steps.
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    /// True if the panel has no rows.
    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    /// Column of the given series index.
    pub fn series(&self, idx: usize) -> DVector<f64> {
        self.values.column(idx).into()
    }
}

/// Sums a `T x n` bottom panel into the full `T x m` hierarchy panel,
/// `y_t = S b_t` for every row. Coherent by construction.
pub fn aggregate_bottom(bottom: &DMatrix<f64>, s: &SummingMatrix) -> Result<SeriesPanel> {
    if bottom.ncols() != s.n() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} bottom columns", s.n()),
            actual: format!("{}", bottom.ncols()),
        });
    }
    let values = bottom * s.s().transpose();
    Ok(SeriesPanel {
        values,
        names: s.names().to_vec(),
    })
}

/// Result of a coherence check.
#[derive(Debug, Clone, Copy)]
pub struct Coherence {
    /// True iff the largest violation is within tolerance.
    pub coherent: bool,
    /// Largest `|u - A b|` over all rows and upper series.
    pub max_violation: f64,
}

/// Checks `|u - A b| <= tol` for one full observation vector.
pub fn check_vector_coherence(y: DVectorView<f64>, s: &SummingMatrix, tol: f64) -> Result<Coherence> {
    if y.len() != s.m() {
        return Err(Error::DimensionMismatch {
            expected: format!("vector of length {}", s.m()),
            actual: format!("{}", y.len()),
        });
    }
    let uppers = s.uppers();
    let b = y.rows(uppers, s.n());
    let expected = s.a() * b;
    let mut max_violation = 0.0f64;
    for i in 0..uppers {
        max_violation = max_violation.max((y[i] - expected[i]).abs());
    }
    Ok(Coherence {
        coherent: max_violation <= tol,
        max_violation,
    })
}

/// Checks every row of a panel; reports the worst violation.
pub fn check_coherence(panel: &SeriesPanel, s: &SummingMatrix, tol: f64) -> Result<Coherence> {
    if panel.values.ncols() != s.m() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} panel columns", s.m()),
            actual: format!("{}", panel.values.ncols()),
        });
    }
    let mut max_violation = 0.0f64;
    for t in 0..panel.values.nrows() {
        let row = panel.values.row(t).transpose();
        let c = check_vector_coherence(row.as_view(), s, tol)?;
        max_violation = max_violation.max(c.max_violation);
    }
    Ok(Coherence {
        coherent: max_violation <= tol,
        max_violation,
    })
}
