//! Candidate measurement matrix, real/imaginary stacking and measurement simulation.

use std::collections::BTreeSet;

use nalgebra::{Complex, DMatrix, DVector};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::design::SensingDesign;
use crate::error::{Error, Result};
use crate::network::HarmonicOrderModel;
use crate::scalar::{polar, Real};

/// Physical meaning of a candidate row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RowTag {
    /// Voltage phasor at a bus (`index` is the matrix position, `bus` the case id).
    VoltageAt { index: usize, bus: i64 },
    /// From-end current phasor on a branch, oriented from -> to.
    CurrentOn { branch: usize, from: i64, to: i64 },
}

/// All possible measurement rows at one order: `N_b` voltage rows then `N_l` current rows.
#[derive(Debug, Clone)]
pub struct CandidateMatrix<T: Real> {
    pub order: u32,
    pub rows: DMatrix<Complex<T>>,
    pub row_tags: Vec<RowTag>,
}

impl<T: Real> CandidateMatrix<T> {
    pub fn n_rows(&self) -> usize {
        self.rows.nrows()
    }

    pub fn n_buses(&self) -> usize {
        self.rows.ncols()
    }

    /// Complex submatrix made of the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> DMatrix<Complex<T>> {
        self.rows.select_rows(rows.iter())
    }

    /// Stacked real sensing matrix for the given rows.
    pub fn stacked(&self, rows: &[usize]) -> DMatrix<T> {
        stack_real_matrix(&self.select(rows))
    }
}

/// Builds the candidate matrix from `Z^h` and the branch admittances.
pub fn build_candidate_matrix<T: Real>(model: &HarmonicOrderModel<T>) -> CandidateMatrix<T> {
    let n = model.n_buses();
    let nl = model.branch_admittances.len();
    let z = &model.zbus;
    let mut rows = DMatrix::from_element(n + nl, n, Complex::new(T::zero(), T::zero()));
    rows.rows_mut(0, n).copy_from(z);
    let mut row_tags: Vec<RowTag> =
        model.bus_ids.iter().enumerate().map(|(index, &bus)| RowTag::VoltageAt { index, bus }).collect();
    for (k, br) in model.branch_admittances.iter().enumerate() {
        // y (Z_i - Z_j) + y_sh Z_i for unit taps
        let (a, b) = br.from_end_coefficients();
        let mut row = rows.row_mut(n + k);
        for col in 0..n {
            row[col] = a * z[(br.from, col)] + b * z[(br.to, col)];
        }
        row_tags.push(RowTag::CurrentOn { branch: k, from: model.bus_ids[br.from], to: model.bus_ids[br.to] });
    }
    CandidateMatrix { order: model.order, rows, row_tags }
}

/// `[[Re, -Im], [Im, Re]]` block form of a complex matrix.
pub fn stack_real_matrix<T: Real>(m: &DMatrix<Complex<T>>) -> DMatrix<T> {
    let (r, c) = m.shape();
    let mut out = DMatrix::zeros(2 * r, 2 * c);
    for j in 0..c {
        for i in 0..r {
            let v = m[(i, j)];
            out[(i, j)] = v.re;
            out[(i, j + c)] = -v.im;
            out[(i + r, j)] = v.im;
            out[(i + r, j + c)] = v.re;
        }
    }
    out
}

/// `[Re; Im]` form of a complex vector.
pub fn stack_real_vector<T: Real>(v: &DVector<Complex<T>>) -> DVector<T> {
    let n = v.len();
    DVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im })
}

/// Inverse of [`stack_real_vector`].
pub fn unstack<T: Real>(v: &DVector<T>) -> Result<DVector<Complex<T>>> {
    if !v.len().is_multiple_of(2) {
        return Err(Error::Argument(format!("cannot unstack odd-length vector ({})", v.len())));
    }
    let n = v.len() / 2;
    Ok(DVector::from_fn(n, |i, _| Complex::new(v[i], v[i + n])))
}

/// Corruption applied in the noisy studies; all fractions are relative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    /// Measurement noise std as a fraction of the RMS of the clean measurement vector.
    pub measurement_noise_std: f64,
    /// Matrix perturbation std as a fraction of the RMS of the matrix entries.
    pub matrix_error_std: f64,
    /// Background injection std as a fraction of the largest source magnitude.
    pub background_injection_std: f64,
    pub rng_seed: u64,
}

impl Default for CorruptionSpec {
    fn default() -> Self {
        Self::uniform(0.05, 0)
    }
}

impl CorruptionSpec {
    pub fn uniform(level: f64, rng_seed: u64) -> Self {
        CorruptionSpec {
            measurement_noise_std: level,
            matrix_error_std: level,
            background_injection_std: level,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fr = [self.measurement_noise_std, self.matrix_error_std, self.background_injection_std];
        if fr.iter().any(|f| !(*f >= 0.0) || !f.is_finite()) {
            return Err(Error::Argument(format!("corruption fractions must be finite and >= 0: {fr:?}")));
        }
        Ok(())
    }
}

/// Measurements at one order for the rows of a design.
#[derive(Debug, Clone)]
pub struct MeasurementSet<T: Real> {
    pub order: u32,
    pub values: DVector<Complex<T>>,
    pub rows: Vec<usize>,
    pub tags: Vec<RowTag>,
}

impl<T: Real> MeasurementSet<T> {
    pub fn stacked(&self) -> DVector<T> {
        stack_real_vector(&self.values)
    }
}

fn complex_rms<T: Real>(v: &DVector<Complex<T>>) -> T {
    if v.is_empty() {
        return T::zero();
    }
    let ss = v.iter().fold(T::zero(), |a, z| a + z.norm_sqr());
    (ss / T::lit(v.len() as f64)).sqrt()
}

fn gaussian<T: Real, R: Rng>(rng: &mut R) -> T {
    let z: f64 = StandardNormal.sample(rng);
    T::lit(z)
}

/// Forward-simulates the selected candidate rows for an injection vector.
///
/// With corruption, independent Gaussian noise is added to real and imaginary parts
/// with std `measurement_noise_std * rms(clean)`, seeded by `corruption.rng_seed`.
pub fn simulate_measurements<T: Real>(
    candidates: &CandidateMatrix<T>,
    design: &SensingDesign<T>,
    injections: &DVector<Complex<T>>,
    corruption: Option<&CorruptionSpec>,
) -> Result<MeasurementSet<T>> {
    simulate_rows(candidates, &design.selected_rows, injections, corruption)
}

/// Same as [`simulate_measurements`] for an explicit row list.
pub fn simulate_rows<T: Real>(
    candidates: &CandidateMatrix<T>,
    rows: &[usize],
    injections: &DVector<Complex<T>>,
    corruption: Option<&CorruptionSpec>,
) -> Result<MeasurementSet<T>> {
    if injections.len() != candidates.n_buses() {
        return Err(Error::Argument(format!(
            "injection vector has length {}, network has {} buses",
            injections.len(),
            candidates.n_buses()
        )));
    }
    if let Some(&bad) = rows.iter().find(|&&r| r >= candidates.n_rows()) {
        return Err(Error::Argument(format!(
            "design row {bad} out of range for {} candidate rows",
            candidates.n_rows()
        )));
    }
    let h = candidates.select(rows);
    let mut values = &h * injections;
    if let Some(spec) = corruption {
        spec.validate()?;
        let sigma = T::lit(spec.measurement_noise_std) * complex_rms(&values);
        if sigma > T::zero() {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
            for v in values.iter_mut() {
                let re: T = gaussian(&mut rng);
                let im: T = gaussian(&mut rng);
                *v += Complex::new(re * sigma, im * sigma);
            }
        }
    }
    Ok(MeasurementSet {
        order: candidates.order,
        values,
        rows: rows.to_vec(),
        tags: rows.iter().map(|&r| candidates.row_tags[r]).collect(),
    })
}

/// Adds Gaussian noise with std `matrix_error_std * rms(H)` to every entry.
pub fn corrupt_matrix<T: Real>(h: &DMatrix<T>, corruption: &CorruptionSpec) -> DMatrix<T> {
    let mut out = h.clone();
    if h.is_empty() || !(corruption.matrix_error_std > 0.0) {
        return out;
    }
    let rms = (h.iter().fold(T::zero(), |a, &v| a + v * v) / T::lit(h.len() as f64)).sqrt();
    let sigma = T::lit(corruption.matrix_error_std) * rms;
    let mut rng = ChaCha8Rng::seed_from_u64(corruption.rng_seed);
    for v in out.iter_mut() {
        let z: T = gaussian(&mut rng);
        *v += z * sigma;
    }
    out
}

/// Random sparse injection pattern across several orders.
#[derive(Debug, Clone)]
pub struct InjectionScenario<T: Real> {
    /// Sorted bus indices of the harmonic sources.
    pub support: Vec<usize>,
    pub orders: Vec<u32>,
    /// One injection vector per entry of `orders`.
    pub injections: Vec<DVector<Complex<T>>>,
    /// Std of the background injections per order (zero without corruption).
    pub background_std: Vec<T>,
}

impl<T: Real> InjectionScenario<T> {
    pub fn injection(&self, order: u32) -> Option<&DVector<Complex<T>>> {
        self.orders.iter().position(|&o| o == order).map(|i| &self.injections[i])
    }
}

/// Order at which `magnitude_mean`/`magnitude_std` apply; other orders scale by `3/h`.
pub const REFERENCE_ORDER: f64 = 3.0;

/// Draws `k` source buses uniformly and their per-order complex injections.
///
/// Magnitudes are `N(mean, std)` (floored at 1% of the mean) scaled by `3/h`, phases
/// uniform on `[0, 2pi)`. With corruption, every other bus gets `N(0, s) e^{j phi}`
/// with `s = background_injection_std * max source magnitude` at that order.
pub fn make_injection_scenario<T: Real>(
    n_buses: usize,
    k: usize,
    orders: &[u32],
    magnitude_mean: f64,
    magnitude_std: f64,
    corruption: Option<&CorruptionSpec>,
    seed: u64,
) -> Result<InjectionScenario<T>> {
    if k > n_buses {
        return Err(Error::Argument(format!("sparsity k = {k} exceeds bus count {n_buses}")));
    }
    if orders.is_empty() {
        return Err(Error::Argument("at least one harmonic order is required".into()));
    }
    if let Some(c) = corruption {
        c.validate()?;
    }
    let normal = Normal::new(magnitude_mean, magnitude_std.max(0.0))
        .map_err(|e| Error::Argument(format!("injection distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut support = index::sample(&mut rng, n_buses, k).into_vec();
    support.sort_unstable();
    let in_support: BTreeSet<usize> = support.iter().copied().collect();
    let floor = 0.01 * magnitude_mean.abs();
    let tau = std::f64::consts::TAU;

    let mut injections = Vec::with_capacity(orders.len());
    let mut background_std = Vec::with_capacity(orders.len());
    for &h in orders {
        let scale = REFERENCE_ORDER / h as f64;
        let mut x = DVector::from_element(n_buses, Complex::new(T::zero(), T::zero()));
        let mut max_mag = 0.0f64;
        for &bus in &support {
            let mag = normal.sample(&mut rng).max(floor) * scale;
            let phase = rng.random::<f64>() * tau;
            max_mag = max_mag.max(mag);
            x[bus] = polar(T::lit(mag), T::lit(phase));
        }
        let mut bg = 0.0;
        if let Some(c) = corruption {
            bg = c.background_injection_std * max_mag;
            for bus in (0..n_buses).filter(|b| !in_support.contains(b)) {
                let z: f64 = StandardNormal.sample(&mut rng);
                let phase = rng.random::<f64>() * tau;
                x[bus] = polar(T::lit(z * bg), T::lit(phase));
            }
        }
        injections.push(x);
        background_std.push(T::lit(bg));
    }
    Ok(InjectionScenario { support, orders: orders.to_vec(), injections, background_std })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_stacking_matches_complex_product() {
        let a = DMatrix::from_element(1, 1, Complex::new(1.0, 2.0));
        let x = DVector::from_element(1, Complex::new(3.0, 4.0));
        let lhs = stack_real_matrix(&a) * stack_real_vector(&x);
        assert_eq!(lhs.as_slice(), &[-5.0, 10.0]);
    }

    #[test]
    fn unstack_rejects_odd_length() {
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert!(matches!(unstack(&v), Err(Error::Argument(_))));
    }

    #[test]
    fn zero_sparsity_scenario_is_all_zero() {
        let s = make_injection_scenario::<f64>(10, 0, &[3, 5], 0.2, 0.05, None, 1).unwrap();
        assert!(s.support.is_empty());
        assert!(s.injections.iter().all(|x| x.iter().all(|v| v.norm() == 0.0)));
    }

    #[test]
    fn sparsity_above_bus_count_is_rejected() {
        let r = make_injection_scenario::<f64>(4, 5, &[3], 0.2, 0.05, None, 1);
        assert!(matches!(r, Err(Error::Argument(_))));
    }

    #[test]
    fn zero_matrix_error_is_identity() {
        let h = DMatrix::from_fn(4, 3, |i, j| (i * 3 + j) as f64);
        let spec = CorruptionSpec { matrix_error_std: 0.0, ..CorruptionSpec::default() };
        assert_eq!(corrupt_matrix(&h, &spec), h);
    }

    #[test]
    fn matrix_noise_has_target_spread() {
        // sample-statistics check: 1000 entries, std within 20% of target
        let h = DMatrix::from_fn(40, 25, |i, j| ((i * 7 + j * 13) % 11) as f64 - 5.0);
        let spec = CorruptionSpec { matrix_error_std: 0.05, rng_seed: 9, ..CorruptionSpec::default() };
        let out = corrupt_matrix(&h, &spec);
        let rms = (h.iter().map(|v| v * v).sum::<f64>() / h.len() as f64).sqrt();
        let target = 0.05 * rms;
        let diff: Vec<f64> = out.iter().zip(h.iter()).map(|(a, b)| a - b).collect();
        let mean = diff.iter().sum::<f64>() / diff.len() as f64;
        let sd = (diff.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (diff.len() - 1) as f64).sqrt();
        assert!((sd - target).abs() <= 0.2 * target, "sd {sd} target {target}");
        assert_eq!(corrupt_matrix(&h, &spec), out);
    }
}
