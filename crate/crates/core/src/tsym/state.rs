use crate::circle::CircleGrid;
use crate::{Error, Result};

/// Metric functions of a `T²`-symmetric state on the circle, in the areal
/// coordinates `(R, θ)`:
/// `g = e^{2(η−U)}(−dR² + a⁻²dθ²) + e^{2U}(dx¹ + A dx² + (G + AH)dθ)²
///      + e^{−2U}R²(dx² + H dθ)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct TsymFields {
    pub u: Vec<f64>,
    /// The off-diagonal function `A`.
    pub big_a: Vec<f64>,
    pub eta: Vec<f64>,
    pub a: Vec<f64>,
    /// Connection components `G` and `H`.
    pub g_conn: Vec<f64>,
    pub h_conn: Vec<f64>,
}

/// `R`-derivatives of the fields that the functionals use.
#[derive(Debug, Clone, PartialEq)]
pub struct TsymRates {
    pub u: Vec<f64>,
    pub big_a: Vec<f64>,
    pub eta: Vec<f64>,
    pub a: Vec<f64>,
    pub h_conn: Vec<f64>,
}

impl TsymFields {
    /// Every field identically zero except `a ≡ 1`.
    pub fn flat(points: usize) -> Self {
        let z = vec![0.0; points];
        Self { u: z.clone(), big_a: z.clone(), eta: z.clone(), a: vec![1.0; points], g_conn: z.clone(), h_conn: z }
    }

    fn columns(&self) -> [(&'static str, &Vec<f64>); 6] {
        [
            ("U", &self.u),
            ("A", &self.big_a),
            ("eta", &self.eta),
            ("a", &self.a),
            ("G", &self.g_conn),
            ("H", &self.h_conn),
        ]
    }
}

impl TsymRates {
    pub fn zero(points: usize) -> Self {
        let z = vec![0.0; points];
        Self { u: z.clone(), big_a: z.clone(), eta: z.clone(), a: z.clone(), h_conn: z }
    }

    fn columns(&self) -> [(&'static str, &Vec<f64>); 5] {
        [("U_R", &self.u), ("A_R", &self.big_a), ("eta_R", &self.eta), ("a_R", &self.a), ("H_R", &self.h_conn)]
    }
}

/// Fields at one areal time `R` with twist constant `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct TsymState {
    grid: CircleGrid,
    r: f64,
    twist: f64,
    fields: TsymFields,
    eta_supplied: bool,
    rates: Option<TsymRates>,
}

impl TsymState {
    pub fn new(grid: CircleGrid, r: f64, twist: f64, fields: TsymFields, rates: Option<TsymRates>) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidInput(format!("areal time must be positive, got {r}")));
        }
        if !(twist > 0.0 && twist.is_finite()) {
            return Err(Error::InvalidInput(format!("twist constant K must be positive, got {twist}")));
        }
        let n = grid.len();
        for (name, f) in fields.columns() {
            if f.len() != n {
                return Err(Error::Shape(format!("field {name} has {} samples on a {n}-point grid", f.len())));
            }
        }
        if let Some(rates) = &rates {
            for (name, f) in rates.columns() {
                if f.len() != n {
                    return Err(Error::Shape(format!("rate {name} has {} samples on a {n}-point grid", f.len())));
                }
            }
        }
        if let Some((i, v)) = fields.a.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidInput(format!("a must be positive; node {i} has {v}")));
        }
        Ok(Self { grid, r, twist, fields, eta_supplied: true, rates })
    }

    /// Mark `η` as a placeholder (zero) rather than data; functionals that
    /// need `η` itself then refuse the state.
    pub fn with_defaulted_eta(mut self) -> Self {
        self.eta_supplied = false;
        self
    }

    pub fn grid(&self) -> &CircleGrid {
        &self.grid
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// `τ = −ln R`.
    pub fn tau(&self) -> f64 {
        -self.r.ln()
    }

    pub fn twist(&self) -> f64 {
        self.twist
    }

    pub fn fields(&self) -> &TsymFields {
        &self.fields
    }

    pub fn eta_supplied(&self) -> bool {
        self.eta_supplied
    }

    pub fn rates(&self) -> Result<&TsymRates> {
        self.rates.as_ref().ok_or(Error::MissingField("R-derivative fields"))
    }

    pub fn has_rates(&self) -> bool {
        self.rates.is_some()
    }

    pub fn u_theta(&self) -> Result<Vec<f64>> {
        self.grid.derivative(&self.fields.u)
    }

    pub fn big_a_theta(&self) -> Result<Vec<f64>> {
        self.grid.derivative(&self.fields.big_a)
    }
}

/// States at strictly monotone areal times, sharing grid and `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct TsymHistory {
    states: Vec<TsymState>,
}

impl TsymHistory {
    pub fn new(states: Vec<TsymState>) -> Result<Self> {
        let first = states.first().ok_or(Error::InsufficientSamples { needed: 1, got: 0 })?;
        for st in &states[1..] {
            if st.grid != first.grid {
                return Err(Error::InvalidInput("history entries must share one grid".into()));
            }
            if st.twist != first.twist {
                return Err(Error::InvalidInput(format!("history mixes K = {} and K = {}", first.twist, st.twist)));
            }
        }
        if states.len() > 1 {
            let dir = (states[1].r - states[0].r).signum();
            if dir == 0.0 || states.windows(2).any(|w| (w[1].r - w[0].r).signum() != dir) {
                return Err(Error::InvalidInput("areal times must be strictly monotone".into()));
            }
        }
        Ok(Self { states })
    }

    pub fn states(&self) -> &[TsymState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn grid(&self) -> &CircleGrid {
        self.states[0].grid()
    }

    pub fn twist(&self) -> f64 {
        self.states[0].twist
    }

    pub fn r_values(&self) -> Vec<f64> {
        self.states.iter().map(TsymState::r).collect()
    }

    pub fn taus(&self) -> Vec<f64> {
        self.states.iter().map(TsymState::tau).collect()
    }

    /// The same history ordered by increasing `R`.
    pub fn increasing_r(&self) -> Self {
        let mut states = self.states.clone();
        if states.len() > 1 && states[1].r < states[0].r {
            states.reverse();
        }
        Self { states }
    }

    /// The same history ordered by increasing `τ`.
    pub fn increasing_tau(&self) -> Self {
        let mut states = self.states.clone();
        if states.len() > 1 && states[1].r > states[0].r {
            states.reverse();
        }
        Self { states }
    }
}
