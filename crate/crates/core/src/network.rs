//! Network cases and per-harmonic-order admittance/impedance models.
//!
//! Element model at harmonic order `h`:
//! * series branch admittance `1 / (r + j h x)`;
//! * half line-charging `j h b_sh / 2` at each end;
//! * generators as grounded shunts `1 / (j h x_sub)`;
//! * bus shunts `g + j h b`;
//! * optional loads as parallel R-L, `g_load + j b_load / h`.
//!
//! Transformer taps sit on the from side (`Yff = (y + y_sh)/t^2`, `Yft = Ytf = -y/t`).

use std::collections::{HashMap, VecDeque};
use std::path::Path;

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cabs, Real};

/// Default bound on `max |Y Z - I|` accepted after inversion.
pub const DEFAULT_INVERSION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: i64,
    #[serde(default)]
    pub name: String,
    /// Shunt conductance (p.u.).
    #[serde(default)]
    pub g: f64,
    /// Shunt susceptance at the fundamental (p.u.).
    #[serde(default)]
    pub b: f64,
    /// Optional load conductance; loads are left out of the harmonic model when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load_g: Option<f64>,
    /// Optional load susceptance at the fundamental (negative for inductive loads).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load_b: Option<f64>,
}

fn default_tap() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from: i64,
    pub to: i64,
    pub r: f64,
    pub x: f64,
    /// Total line-charging susceptance of the pi model.
    #[serde(default)]
    pub b_sh: f64,
    #[serde(default)]
    pub transformer: bool,
    #[serde(default = "default_tap")]
    pub tap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: i64,
    /// Subtransient reactance (p.u. on system base).
    pub x_sub: f64,
}

/// Physical description of a power network, validated on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCase {
    pub base_mva: f64,
    pub base_kv: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    #[serde(default)]
    pub generators: Vec<Generator>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CaseSummary {
    pub buses: usize,
    pub lines: usize,
    pub transformers: usize,
    pub generators: usize,
}

impl std::fmt::Display for CaseSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} buses, {} lines, {} transformers, {} generators",
            self.buses, self.lines, self.transformers, self.generators
        )
    }
}

impl NetworkCase {
    /// Parses case JSON text and validates it.
    pub fn from_json_str(text: &str, origin: &Path) -> Result<Self> {
        let case: NetworkCase = serde_json::from_str(text).map_err(|e| Error::Format {
            path: origin.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        case.validate()?;
        Ok(case)
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_branches(&self) -> usize {
        self.branches.len()
    }

    pub fn summary(&self) -> CaseSummary {
        let transformers = self.branches.iter().filter(|b| b.transformer).count();
        CaseSummary {
            buses: self.buses.len(),
            lines: self.branches.len() - transformers,
            transformers,
            generators: self.generators.len(),
        }
    }

    /// Map from bus id to matrix index (file order).
    pub fn bus_index(&self) -> HashMap<i64, usize> {
        self.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.buses.is_empty() {
            return Err(Error::Validation("case has no buses".into()));
        }
        if !(self.base_mva > 0.0) {
            return Err(Error::Validation(format!("base_mva must be positive, got {}", self.base_mva)));
        }
        let mut index = HashMap::with_capacity(self.buses.len());
        for (i, bus) in self.buses.iter().enumerate() {
            if index.insert(bus.id, i).is_some() {
                return Err(Error::Validation(format!("duplicate bus id {}", bus.id)));
            }
            let vals = [Some(bus.g), Some(bus.b), bus.load_g, bus.load_b];
            if vals.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("bus {} has a non-finite shunt value", bus.id)));
            }
        }
        for (k, br) in self.branches.iter().enumerate() {
            for end in [br.from, br.to] {
                if !index.contains_key(&end) {
                    return Err(Error::Validation(format!(
                        "branch {k} ({} -> {}) references unknown bus {end}",
                        br.from, br.to
                    )));
                }
            }
            if br.from == br.to {
                return Err(Error::Validation(format!("branch {k} is a self-loop at bus {}", br.from)));
            }
            if !(br.r >= 0.0) || !br.r.is_finite() {
                return Err(Error::Validation(format!("branch {k} ({} -> {}) has r = {} < 0", br.from, br.to, br.r)));
            }
            if br.x == 0.0 || !br.x.is_finite() {
                return Err(Error::Validation(format!("branch {k} ({} -> {}) has x = {}", br.from, br.to, br.x)));
            }
            if !(br.tap > 0.0) || !br.tap.is_finite() || !br.b_sh.is_finite() {
                return Err(Error::Validation(format!(
                    "branch {k} ({} -> {}) has invalid tap or b_sh",
                    br.from, br.to
                )));
            }
        }
        for g in &self.generators {
            if !index.contains_key(&g.bus) {
                return Err(Error::Validation(format!("generator references unknown bus {}", g.bus)));
            }
            if g.x_sub == 0.0 || !g.x_sub.is_finite() {
                return Err(Error::Validation(format!("generator at bus {} has x_sub = {}", g.bus, g.x_sub)));
            }
        }
        self.check_connected(&index)
    }

    fn check_connected(&self, index: &HashMap<i64, usize>) -> Result<()> {
        let n = self.buses.len();
        let mut adj = vec![Vec::new(); n];
        for br in &self.branches {
            let (i, j) = (index[&br.from], index[&br.to]);
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            None => Ok(()),
            Some(i) => Err(Error::Validation(format!(
                "network is disconnected: bus {} is unreachable from bus {}",
                self.buses[i].id, self.buses[0].id
            ))),
        }
    }
}

/// Reads and validates a case file.
pub fn load_case(path: impl AsRef<Path>) -> Result<NetworkCase> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    NetworkCase::from_json_str(&text, path)
}

/// Per-branch admittances at one harmonic order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchAdmittance<T: Real> {
    pub from: usize,
    pub to: usize,
    /// Series admittance `y_ij^h`.
    pub series: Complex<T>,
    /// Half line-charging admittance `y_sh^h` at each end.
    pub half_shunt: Complex<T>,
    pub tap: T,
}

impl<T: Real> BranchAdmittance<T> {
    /// Coefficients `(a, b)` such that the from-end current is `a V_from + b V_to`.
    ///
    /// For unit taps this is `(y + y_sh, -y)`, i.e. `y (V_i - V_j) + y_sh V_i`.
    pub fn from_end_coefficients(&self) -> (Complex<T>, Complex<T>) {
        let t = self.tap;
        ((self.series + self.half_shunt) / (t * t), -self.series / t)
    }
}

/// Bus admittance and impedance matrices at one harmonic order.
#[derive(Debug, Clone)]
pub struct HarmonicOrderModel<T: Real> {
    pub order: u32,
    pub ybus: DMatrix<Complex<T>>,
    pub zbus: DMatrix<Complex<T>>,
    pub branch_admittances: Vec<BranchAdmittance<T>>,
    pub bus_ids: Vec<i64>,
}

impl<T: Real> HarmonicOrderModel<T> {
    pub fn n_buses(&self) -> usize {
        self.ybus.nrows()
    }

    /// `max |Y Z - I|` over all entries.
    pub fn inversion_error(&self) -> T {
        identity_residual(&self.ybus, &self.zbus)
    }
}

fn identity_residual<T: Real>(y: &DMatrix<Complex<T>>, z: &DMatrix<Complex<T>>) -> T {
    let prod = y * z;
    let mut worst = T::zero();
    for j in 0..prod.ncols() {
        for i in 0..prod.nrows() {
            let target = if i == j { T::one() } else { T::zero() };
            worst = worst.max(cabs(prod[(i, j)] - Complex::new(target, T::zero())));
        }
    }
    worst
}

pub fn check_order(h: u32) -> Result<()> {
    if h < 1 || h.is_multiple_of(2) {
        return Err(Error::Argument(format!("harmonic order must be a positive odd integer, got {h}")));
    }
    Ok(())
}

/// `Y^h` with the per-branch admittances it was assembled from.
pub type YbusParts<T> = (DMatrix<Complex<T>>, Vec<BranchAdmittance<T>>);

/// Assembles `Y^h` without inverting it.
pub fn assemble_ybus<T: Real>(case: &NetworkCase, h: u32) -> Result<YbusParts<T>> {
    check_order(h)?;
    let n = case.n_buses();
    let idx = case.bus_index();
    let hf = T::lit(h as f64);
    let zero = Complex::new(T::zero(), T::zero());
    let mut y = DMatrix::from_element(n, n, zero);

    for (i, bus) in case.buses.iter().enumerate() {
        y[(i, i)] += Complex::new(T::lit(bus.g), hf * T::lit(bus.b));
        if bus.load_g.is_some() || bus.load_b.is_some() {
            let lg = T::lit(bus.load_g.unwrap_or(0.0));
            let lb = T::lit(bus.load_b.unwrap_or(0.0));
            y[(i, i)] += Complex::new(lg, lb / hf);
        }
    }
    for g in &case.generators {
        let i = idx[&g.bus];
        y[(i, i)] += Complex::new(T::one(), T::zero()) / Complex::new(T::zero(), hf * T::lit(g.x_sub));
    }
    let mut admittances = Vec::with_capacity(case.branches.len());
    for br in &case.branches {
        let (i, j) = (idx[&br.from], idx[&br.to]);
        let series = Complex::new(T::one(), T::zero()) / Complex::new(T::lit(br.r), hf * T::lit(br.x));
        let half_shunt = Complex::new(T::zero(), hf * T::lit(br.b_sh) / T::lit(2.0));
        let ba = BranchAdmittance { from: i, to: j, series, half_shunt, tap: T::lit(br.tap) };
        let (yff, yft) = ba.from_end_coefficients();
        y[(i, i)] += yff;
        y[(j, j)] += series + half_shunt;
        y[(i, j)] += yft;
        y[(j, i)] += yft;
        admittances.push(ba);
    }
    Ok((y, admittances))
}

/// Builds `Y^h` and `Z^h = (Y^h)^-1` with the default inversion tolerance, widened to
/// `100 n eps` when the scalar type cannot reach it (single precision).
pub fn build_harmonic_model<T: Real>(case: &NetworkCase, h: u32) -> Result<HarmonicOrderModel<T>> {
    let floor = T::machine_eps() * T::lit(100.0 * case.n_buses() as f64);
    build_harmonic_model_with_tol(case, h, T::lit(DEFAULT_INVERSION_TOL).max(floor))
}

pub fn build_harmonic_model_with_tol<T: Real>(
    case: &NetworkCase,
    h: u32,
    inversion_tol: T,
) -> Result<HarmonicOrderModel<T>> {
    let (ybus, branch_admittances) = assemble_ybus::<T>(case, h)?;
    let n = ybus.nrows();
    let lu = ybus.clone().lu();
    let u = lu.u();
    let diag: Vec<T> = (0..n).map(|i| cabs(u[(i, i)])).collect();
    let dmax = diag.iter().copied().fold(T::zero(), |a, b| a.max(b));
    let dmin = diag.iter().copied().fold(T::infinity(), |a, b| a.min(b));
    let pivot_floor = dmax * T::machine_eps() * T::lit(n as f64 * 10.0);
    if dmax == T::zero() || dmin <= pivot_floor {
        return Err(Error::Singular { order: h, detail: "no path to ground (add generator or bus shunts)".into() });
    }
    let zbus = lu.try_inverse().ok_or_else(|| Error::Singular { order: h, detail: "LU inversion failed".into() })?;
    let model = HarmonicOrderModel {
        order: h,
        ybus,
        zbus,
        branch_admittances,
        bus_ids: case.buses.iter().map(|b| b.id).collect(),
    };
    let err = model.inversion_error();
    if !(err <= inversion_tol) {
        return Err(Error::Singular {
            order: h,
            detail: format!("max |YZ - I| = {} exceeds tolerance {}", err.as_f64(), inversion_tol.as_f64()),
        });
    }
    Ok(model)
}

/// Builds models for several orders, in parallel; output order follows `orders`.
pub fn build_models<T: Real>(case: &NetworkCase, orders: &[u32]) -> Result<Vec<HarmonicOrderModel<T>>> {
    use rayon::prelude::*;
    orders.par_iter().map(|&h| build_harmonic_model::<T>(case, h)).collect()
}
