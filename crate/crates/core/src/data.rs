use serde::{Deserialize, Serialize};

use crate::error::{DiffusionError, Result};

/// A value held once per brand.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PerBrand<T> {
    pub brand1: T,
    pub brand2: T,
}

impl<T> PerBrand<T> {
    pub fn new(brand1: T, brand2: T) -> Self {
        Self { brand1, brand2 }
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> PerBrand<U> {
        PerBrand { brand1: f(&self.brand1), brand2: f(&self.brand2) }
    }

    pub fn as_array(&self) -> [&T; 2] {
        [&self.brand1, &self.brand2]
    }
}

impl PerBrand<Vec<f64>> {
    /// Brand 1 followed by brand 2.
    pub fn stacked(&self) -> Vec<f64> {
        self.brand1.iter().chain(&self.brand2).copied().collect()
    }
}

/// Monthly instantaneous sales of two brands on an equally spaced grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalesSeries {
    brand_names: [String; 2],
    t: Vec<f64>,
    sales: PerBrand<Vec<f64>>,
    cumulative: PerBrand<Vec<f64>>,
}

impl SalesSeries {
    /// Validates and builds a series. `t` must be strictly increasing with a
    /// constant spacing and start one period after launch; sales are the
    /// amounts sold during `(t - spacing, t]`.
    pub fn new(
        brand_names: [String; 2],
        t: Vec<f64>,
        sales1: Vec<f64>,
        sales2: Vec<f64>,
    ) -> Result<Self> {
        let n = t.len();
        if n < 2 {
            return Err(DiffusionError::InvalidData(format!("need at least 2 time points, got {n}")));
        }
        if sales1.len() != n || sales2.len() != n {
            return Err(DiffusionError::InvalidData(format!(
                "length mismatch: {} times, {} and {} sales",
                n,
                sales1.len(),
                sales2.len()
            )));
        }
        if !t.iter().all(|v| v.is_finite()) {
            return Err(DiffusionError::InvalidData("time grid must be finite".into()));
        }
        let spacing = t[1] - t[0];
        if !(spacing > 0.0) {
            return Err(DiffusionError::InvalidData("time grid must be strictly increasing".into()));
        }
        for (i, w) in t.windows(2).enumerate() {
            if ((w[1] - w[0]) - spacing).abs() > 1e-9 * spacing.max(1.0) {
                return Err(DiffusionError::InvalidData(format!(
                    "time grid not equally spaced at row {}",
                    i + 2
                )));
            }
        }
        if (t[0] - spacing).abs() > 1e-9 * spacing.max(1.0) {
            return Err(DiffusionError::InvalidData(format!(
                "the first period must start at launch (t[0] = spacing), got t[0] = {} with spacing {spacing}",
                t[0]
            )));
        }
        for (brand, s) in [(&brand_names[0], &sales1), (&brand_names[1], &sales2)] {
            if let Some((i, v)) = s.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
                return Err(DiffusionError::InvalidData(format!(
                    "row {}: sales of {brand} must be finite and non-negative, got {v}",
                    i + 1
                )));
            }
        }
        let cumsum = |s: &[f64]| {
            let mut acc = 0.0;
            s.iter()
                .map(|v| {
                    acc += v;
                    acc
                })
                .collect::<Vec<_>>()
        };
        let cumulative = PerBrand::new(cumsum(&sales1), cumsum(&sales2));
        Ok(Self { brand_names, t, sales: PerBrand::new(sales1, sales2), cumulative })
    }

    /// Series on the default monthly grid `t = 1..=N`.
    pub fn monthly(sales1: Vec<f64>, sales2: Vec<f64>) -> Result<Self> {
        let t = (1..=sales1.len()).map(|i| i as f64).collect();
        Self::new(["brand1".into(), "brand2".into()], t, sales1, sales2)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn brand_names(&self) -> &[String; 2] {
        &self.brand_names
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn spacing(&self) -> f64 {
        self.t[1] - self.t[0]
    }

    pub fn sales(&self) -> &PerBrand<Vec<f64>> {
        &self.sales
    }

    pub fn cumulative(&self) -> &PerBrand<Vec<f64>> {
        &self.cumulative
    }

    /// Sum of both brands' cumulative sales at the last time point.
    pub fn total_cumulative(&self) -> f64 {
        self.cumulative.brand1.last().copied().unwrap_or(0.0)
            + self.cumulative.brand2.last().copied().unwrap_or(0.0)
    }

    /// Same data with the brand columns exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            brand_names: [self.brand_names[1].clone(), self.brand_names[0].clone()],
            t: self.t.clone(),
            sales: PerBrand::new(self.sales.brand2.clone(), self.sales.brand1.clone()),
            cumulative: PerBrand::new(self.cumulative.brand2.clone(), self.cumulative.brand1.clone()),
        }
    }

    /// Same data with every sales value multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(
            self.brand_names.clone(),
            self.t.clone(),
            self.sales.brand1.iter().map(|v| v * c).collect(),
            self.sales.brand2.iter().map(|v| v * c).collect(),
        )
    }
}
