use crate::error::{Error, Result};

/// Dense `N × J` responsibilities, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponsibilityMatrix {
    n_points: usize,
    n_components: usize,
    data: Vec<f64>,
}

impl ResponsibilityMatrix {
    pub fn zeros(n_points: usize, n_components: usize) -> Self {
        Self {
            n_points,
            n_components,
            data: vec![0.0; n_points * n_components],
        }
    }

    pub fn from_rows(n_components: usize, data: Vec<f64>) -> Result<Self> {
        if n_components == 0 || !data.len().is_multiple_of(n_components) {
            return Err(Error::InvalidInput(format!(
                "{} values do not form rows of {n_components}",
                data.len()
            )));
        }
        Ok(Self {
            n_points: data.len() / n_components,
            n_components,
            data,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    #[inline]
    pub fn row(&self, n: usize) -> &[f64] {
        &self.data[n * self.n_components..(n + 1) * self.n_components]
    }

    #[inline]
    pub fn row_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.data[n * self.n_components..(n + 1) * self.n_components]
    }

    pub fn get(&self, n: usize, b: usize) -> f64 {
        self.data[n * self.n_components + b]
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Largest deviation of a row sum from one.
    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.n_points)
            .map(|n| (self.row(n).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Per-component total responsibility.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.n_components];
        for n in 0..self.n_points {
            for (acc, g) in s.iter_mut().zip(self.row(n)) {
                *acc += g;
            }
        }
        s
    }
}

/// Hard initial responsibilities and the modes that had to be dropped.
#[derive(Clone, Debug)]
pub struct KInit {
    pub responsibilities: ResponsibilityMatrix,
    /// Original mode indices without any assigned point, in ascending order.
    pub dropped_modes: Vec<usize>,
    /// Column of each surviving original mode (`None` when dropped).
    pub column_of_mode: Vec<Option<usize>>,
}

/// One-hot responsibilities from nearest-mode assignments.
///
/// Modes without points lose their column; `dropped_modes` records them.
pub fn kinit_responsibilities(assignments: &[usize], n_modes: usize) -> Result<KInit> {
    if n_modes == 0 {
        return Err(Error::InvalidInput("zero modes".into()));
    }
    if assignments.is_empty() {
        return Err(Error::Empty("assignments"));
    }
    if let Some(&bad) = assignments.iter().find(|&&a| a >= n_modes) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            len: n_modes,
        });
    }
    let mut counts = vec![0usize; n_modes];
    for &a in assignments {
        counts[a] += 1;
    }
    let mut column_of_mode = vec![None; n_modes];
    let mut dropped_modes = Vec::new();
    let mut next = 0;
    for (m, &c) in counts.iter().enumerate() {
        if c == 0 {
            dropped_modes.push(m);
        } else {
            column_of_mode[m] = Some(next);
            next += 1;
        }
    }
    let mut r = ResponsibilityMatrix::zeros(assignments.len(), next);
    for (n, &a) in assignments.iter().enumerate() {
        let col = column_of_mode[a].expect("assigned mode has a column");
        r.row_mut(n)[col] = 1.0;
    }
    Ok(KInit {
        responsibilities: r,
        dropped_modes,
        column_of_mode,
    })
}
