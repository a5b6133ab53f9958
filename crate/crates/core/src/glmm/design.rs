//! Model specifications and design matrices for binomial-logit mixed models.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::GlmmError;
use crate::dataset::PredictionTable;

pub const INTERCEPT: &str = "(Intercept)";
pub const QUALITY: &str = "Q";
pub const DISTANCE: &str = "dQ";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedTerm {
    Intercept,
    /// Binary quality indicator, 0 for HQ and 1 for LQ.
    QualityFactor,
    /// Treatment-coded method dummies against `reference`.
    MethodFactor {
        reference: String,
    },
    QualityByMethod,
    /// Continuous signed distance to the HQ region.
    DistanceCovariate,
    DistanceByMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RandomFactor {
    #[serde(rename = "CaseID")]
    CaseId,
    Method,
}

impl RandomFactor {
    pub fn name(self) -> &'static str {
        match self {
            RandomFactor::CaseId => "CaseID",
            RandomFactor::Method => "Method",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub fixed_terms: Vec<FixedTerm>,
    pub random_intercepts: Vec<RandomFactor>,
}

impl ModelSpec {
    /// `logit p = b0 + b1 Q`.
    pub fn quality_single() -> Self {
        ModelSpec {
            fixed_terms: vec![FixedTerm::Intercept, FixedTerm::QualityFactor],
            random_intercepts: vec![],
        }
    }

    /// `logit p = b0 + b1 Q + (1|Method) + (1|CaseID)`.
    pub fn quality_population() -> Self {
        ModelSpec {
            fixed_terms: vec![FixedTerm::Intercept, FixedTerm::QualityFactor],
            random_intercepts: vec![RandomFactor::Method, RandomFactor::CaseId],
        }
    }

    /// Method-specific quality model with method as a fixed effect.
    pub fn quality_by_method(reference: impl Into<String>) -> Self {
        ModelSpec {
            fixed_terms: vec![
                FixedTerm::Intercept,
                FixedTerm::QualityFactor,
                FixedTerm::MethodFactor {
                    reference: reference.into(),
                },
                FixedTerm::QualityByMethod,
            ],
            random_intercepts: vec![RandomFactor::CaseId],
        }
    }

    /// Method-specific decay model in the signed distance.
    pub fn distance_by_method(reference: impl Into<String>) -> Self {
        ModelSpec {
            fixed_terms: vec![
                FixedTerm::Intercept,
                FixedTerm::DistanceCovariate,
                FixedTerm::MethodFactor {
                    reference: reference.into(),
                },
                FixedTerm::DistanceByMethod,
            ],
            random_intercepts: vec![RandomFactor::CaseId],
        }
    }

    /// `logit p = b0 + b1 dQ + (1|Method) + (1|CaseID)`.
    pub fn distance_population() -> Self {
        ModelSpec {
            fixed_terms: vec![FixedTerm::Intercept, FixedTerm::DistanceCovariate],
            random_intercepts: vec![RandomFactor::Method, RandomFactor::CaseId],
        }
    }

    fn has(&self, term: &FixedTerm) -> bool {
        self.fixed_terms.iter().any(|t| t == term)
    }

    pub fn reference_method(&self) -> Option<&str> {
        self.fixed_terms.iter().find_map(|t| match t {
            FixedTerm::MethodFactor { reference } => Some(reference.as_str()),
            _ => None,
        })
    }

    pub fn covariate(&self) -> Option<Covariate> {
        if self.has(&FixedTerm::QualityFactor) {
            Some(Covariate::Quality)
        } else if self.has(&FixedTerm::DistanceCovariate) {
            Some(Covariate::Distance)
        } else {
            None
        }
    }

    pub fn validate(&self) -> Result<(), GlmmError> {
        let invalid = |msg: &str| Err(GlmmError::InvalidSpec(msg.to_string()));
        if !self.has(&FixedTerm::Intercept) {
            return invalid("Intercept is required");
        }
        let has_method = self.reference_method().is_some();
        if self.has(&FixedTerm::QualityByMethod) && !(self.has(&FixedTerm::QualityFactor) && has_method) {
            return invalid("QualityByMethod requires QualityFactor and MethodFactor");
        }
        if self.has(&FixedTerm::DistanceByMethod) && !(self.has(&FixedTerm::DistanceCovariate) && has_method) {
            return invalid("DistanceByMethod requires DistanceCovariate and MethodFactor");
        }
        if self.has(&FixedTerm::QualityFactor) && self.has(&FixedTerm::DistanceCovariate) {
            return invalid("QualityFactor and DistanceCovariate are mutually exclusive");
        }
        let method_terms = self
            .fixed_terms
            .iter()
            .filter(|t| matches!(t, FixedTerm::MethodFactor { .. }))
            .count();
        if method_terms > 1 {
            return invalid("at most one MethodFactor");
        }
        let mut seen = Vec::new();
        for t in &self.fixed_terms {
            if seen.contains(&t) {
                return invalid("duplicate fixed term");
            }
            seen.push(t);
        }
        let mut random = self.random_intercepts.clone();
        random.sort();
        random.dedup();
        if random.len() != self.random_intercepts.len() {
            return invalid("duplicate random intercept");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariate {
    Quality,
    Distance,
}

impl Covariate {
    pub fn column(self) -> &'static str {
        match self {
            Covariate::Quality => QUALITY,
            Covariate::Distance => DISTANCE,
        }
    }
}

/// Which coefficient plays which role, needed to back-transform a fit.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TermLayout {
    pub covariate: Option<Covariate>,
    pub reference_method: Option<String>,
    /// Non-reference methods, in column order.
    pub methods: Vec<String>,
    pub interaction: bool,
}

pub fn method_column(method: &str) -> String {
    format!("method[{method}]")
}

pub fn interaction_column(covariate: Covariate, method: &str) -> String {
    format!("{}:method[{method}]", covariate.column())
}

/// Random-intercept grouping factor stored as a level index per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomBlock {
    pub name: String,
    pub levels: Vec<String>,
    pub index: Vec<usize>,
}

impl RandomBlock {
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrices {
    pub(crate) x: DMatrix<f64>,
    pub(crate) y: Vec<f64>,
    pub(crate) columns: Vec<String>,
    pub(crate) random: Vec<RandomBlock>,
    pub(crate) layout: TermLayout,
}

impl DesignMatrices {
    /// Builds a design from raw parts. `x_rows` are row-major fixed-effect rows.
    pub fn from_parts(
        columns: Vec<String>,
        x_rows: &[Vec<f64>],
        y: Vec<f64>,
        random: Vec<RandomBlock>,
    ) -> Result<Self, GlmmError> {
        let n = y.len();
        if x_rows.len() != n {
            return Err(GlmmError::InvalidSpec(format!(
                "{} design rows for {n} responses",
                x_rows.len()
            )));
        }
        let p = columns.len();
        if x_rows.iter().any(|r| r.len() != p) {
            return Err(GlmmError::InvalidSpec("ragged design rows".into()));
        }
        for block in &random {
            if block.index.len() != n || block.index.iter().any(|&l| l >= block.levels.len()) {
                return Err(GlmmError::InvalidSpec(format!(
                    "grouping factor {} does not align with the data",
                    block.name
                )));
            }
        }
        if y.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(GlmmError::InvalidSpec("response must be binary".into()));
        }
        let x = DMatrix::from_fn(n, p, |i, j| x_rows[i][j]);
        let design = DesignMatrices {
            x,
            y,
            columns,
            random,
            layout: TermLayout::default(),
        };
        design.check_rank()?;
        Ok(design)
    }

    pub fn with_layout(mut self, layout: TermLayout) -> Self {
        self.layout = layout;
        self
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    pub fn n_fixed(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn fixed(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn response(&self) -> &[f64] {
        &self.y
    }

    pub fn random(&self) -> &[RandomBlock] {
        &self.random
    }

    pub fn layout(&self) -> &TermLayout {
        &self.layout
    }

    fn check_rank(&self) -> Result<(), GlmmError> {
        let n = self.n_obs();
        let p = self.n_fixed();
        if n == 0 {
            return Err(GlmmError::InvalidSpec("no observations".into()));
        }
        for j in 0..p {
            let col = self.x.column(j);
            let first = col[0];
            let constant = col.iter().all(|&v| v == first);
            if constant && self.columns[j] != INTERCEPT {
                return Err(GlmmError::RankDeficientDesign(format!(
                    "column {} is constant",
                    self.columns[j]
                )));
            }
            for k in 0..j {
                if self.x.column(k) == col {
                    return Err(GlmmError::RankDeficientDesign(format!(
                        "column {} duplicates {}",
                        self.columns[j], self.columns[k]
                    )));
                }
            }
        }
        // Remaining linear dependencies show up as a non positive definite
        // cross-product after column equilibration.
        let norms: Vec<f64> = (0..p).map(|j| self.x.column(j).norm().max(f64::MIN_POSITIVE)).collect();
        let xtx = self.x.transpose() * &self.x;
        let scaled = DMatrix::from_fn(p, p, |i, j| xtx[(i, j)] / (norms[i] * norms[j]));
        let eig = scaled.symmetric_eigenvalues();
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < 1e-10 {
            return Err(GlmmError::RankDeficientDesign(
                "fixed-effect columns are linearly dependent".into(),
            ));
        }
        Ok(())
    }
}

/// Builds fixed and random design matrices for `spec` over `table`.
///
/// `quality` holds the per-record 0/1 code (0 = HQ) and `distance` the signed
/// distance; whichever the spec needs must be present and aligned with the table.
pub fn build_design(
    table: &PredictionTable,
    spec: &ModelSpec,
    quality: Option<&[u8]>,
    distance: Option<&[f64]>,
) -> Result<DesignMatrices, GlmmError> {
    spec.validate()?;
    let n = table.len();
    let covariate: Option<Vec<f64>> = match spec.covariate() {
        Some(Covariate::Quality) => {
            let q = quality.ok_or(GlmmError::MissingCovariate("quality"))?;
            if q.len() != n {
                return Err(GlmmError::MissingCovariate("quality"));
            }
            Some(q.iter().map(|&v| f64::from(v)).collect())
        }
        Some(Covariate::Distance) => {
            let d = distance.ok_or(GlmmError::MissingCovariate("distance"))?;
            if d.len() != n {
                return Err(GlmmError::MissingCovariate("distance"));
            }
            Some(d.to_vec())
        }
        None => None,
    };

    let methods = table.methods();
    let reference = spec.reference_method();
    let others: Vec<String> = match reference {
        Some(r) => {
            if !methods.iter().any(|m| m == r) {
                return Err(GlmmError::ReferenceMethodAbsent(r.to_string()));
            }
            if methods.len() < 2 {
                return Err(GlmmError::InvalidSpec("MethodFactor needs at least 2 methods".into()));
            }
            methods.iter().filter(|m| *m != r).cloned().collect()
        }
        None => Vec::new(),
    };
    let method_pos: HashMap<&str, usize> = others.iter().enumerate().map(|(i, m)| (m.as_str(), i)).collect();

    let mut columns = Vec::new();
    for term in &spec.fixed_terms {
        match term {
            FixedTerm::Intercept => columns.push(INTERCEPT.to_string()),
            FixedTerm::QualityFactor => columns.push(QUALITY.to_string()),
            FixedTerm::DistanceCovariate => columns.push(DISTANCE.to_string()),
            FixedTerm::MethodFactor { .. } => columns.extend(others.iter().map(|m| method_column(m))),
            FixedTerm::QualityByMethod => {
                columns.extend(others.iter().map(|m| interaction_column(Covariate::Quality, m)))
            }
            FixedTerm::DistanceByMethod => {
                columns.extend(others.iter().map(|m| interaction_column(Covariate::Distance, m)))
            }
        }
    }

    let rows: Vec<Vec<f64>> = table
        .records()
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let mpos = method_pos.get(rec.method.as_str()).copied();
            let mut row = Vec::with_capacity(columns.len());
            for term in &spec.fixed_terms {
                match term {
                    FixedTerm::Intercept => row.push(1.0),
                    FixedTerm::QualityFactor | FixedTerm::DistanceCovariate => {
                        row.push(covariate.as_ref().map_or(0.0, |c| c[i]))
                    }
                    FixedTerm::MethodFactor { .. } => {
                        row.extend((0..others.len()).map(|k| if mpos == Some(k) { 1.0 } else { 0.0 }))
                    }
                    FixedTerm::QualityByMethod | FixedTerm::DistanceByMethod => {
                        let c = covariate.as_ref().map_or(0.0, |c| c[i]);
                        row.extend((0..others.len()).map(|k| if mpos == Some(k) { c } else { 0.0 }))
                    }
                }
            }
            row
        })
        .collect();

    let random = spec
        .random_intercepts
        .iter()
        .map(|factor| {
            let keys: Vec<&str> = table
                .records()
                .iter()
                .map(|r| match factor {
                    RandomFactor::CaseId => r.case_id.as_str(),
                    RandomFactor::Method => r.method.as_str(),
                })
                .collect();
            grouping(factor.name(), &keys)
        })
        .collect();

    let y = table.failures().iter().map(|&f| f64::from(f)).collect();
    let layout = TermLayout {
        covariate: spec.covariate(),
        reference_method: reference.map(String::from),
        methods: others,
        interaction: spec
            .fixed_terms
            .iter()
            .any(|t| matches!(t, FixedTerm::QualityByMethod | FixedTerm::DistanceByMethod)),
    };
    Ok(DesignMatrices::from_parts(columns, &rows, y, random)?.with_layout(layout))
}

/// Level indices for a grouping factor, levels in order of first appearance.
pub fn grouping(name: &str, keys: &[&str]) -> RandomBlock {
    let mut position: HashMap<&str, usize> = HashMap::new();
    let mut levels = Vec::new();
    let index = keys
        .iter()
        .map(|&k| {
            *position.entry(k).or_insert_with(|| {
                levels.push(k.to_string());
                levels.len() - 1
            })
        })
        .collect();
    RandomBlock {
        name: name.to_string(),
        levels,
        index,
    }
}
