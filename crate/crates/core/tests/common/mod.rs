#![allow(dead_code)]

use std::path::PathBuf;

use hse_core::network::{Branch, Bus, Generator, NetworkCase};
use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type C = Complex<f64>;

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| gauss(rng))
}

pub fn complex_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<C> {
    DMatrix::from_fn(m, n, |_, _| C::new(gauss(rng), gauss(rng)))
}

pub fn complex_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<C> {
    DVector::from_fn(n, |_, _| C::new(gauss(rng), gauss(rng)))
}

/// k-sparse vector with entries of magnitude in [0.5, 1.5] and random sign.
pub fn sparse_vector(rng: &mut ChaCha8Rng, n: usize, k: usize) -> DVector<f64> {
    let mut x = DVector::zeros(n);
    for i in rand::seq::index::sample(rng, n, k) {
        let mag = 0.5 + rng.random::<f64>();
        x[i] = if rng.random::<bool>() { mag } else { -mag };
    }
    x
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(a: &DMatrix<C>, b: &DMatrix<C>) -> DMatrix<C> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut r = b.clone();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| m[(i, col)].norm().partial_cmp(&m[(j, col)].norm()).unwrap()).unwrap();
        m.swap_rows(col, p);
        r.swap_rows(col, p);
        let piv = m[(col, col)];
        assert!(piv.norm() > 1e-14, "oracle: singular matrix");
        for i in 0..n {
            if i == col {
                continue;
            }
            let f = m[(i, col)] / piv;
            if f == C::new(0.0, 0.0) {
                continue;
            }
            for j in col..n {
                let v = m[(col, j)];
                m[(i, j)] -= f * v;
            }
            for j in 0..r.ncols() {
                let v = r[(col, j)];
                r[(i, j)] -= f * v;
            }
        }
    }
    for i in 0..n {
        let d = m[(i, i)];
        for j in 0..r.ncols() {
            r[(i, j)] /= d;
        }
    }
    r
}

pub fn gauss_inverse(a: &DMatrix<C>) -> DMatrix<C> {
    gauss_solve(a, &DMatrix::identity(a.nrows(), a.nrows()))
}

fn cx(re: f64, im: f64) -> C {
    C::new(re, im)
}

/// Nodal admittance matrix assembled directly from the raw case data.
pub fn oracle_ybus(case: &NetworkCase, h: u32) -> DMatrix<C> {
    let hf = h as f64;
    let n = case.buses.len();
    let pos = |id: i64| case.buses.iter().position(|b| b.id == id).unwrap();
    let mut y = DMatrix::from_element(n, n, cx(0.0, 0.0));
    for (i, b) in case.buses.iter().enumerate() {
        y[(i, i)] += cx(b.g, hf * b.b);
        if b.load_g.is_some() || b.load_b.is_some() {
            y[(i, i)] += cx(b.load_g.unwrap_or(0.0), b.load_b.unwrap_or(0.0) / hf);
        }
    }
    for g in &case.generators {
        let i = pos(g.bus);
        y[(i, i)] += cx(1.0, 0.0) / cx(0.0, hf * g.x_sub);
    }
    for br in &case.branches {
        let (i, j) = (pos(br.from), pos(br.to));
        let ys = cx(1.0, 0.0) / cx(br.r, hf * br.x);
        let sh = cx(0.0, hf * br.b_sh / 2.0);
        let t = br.tap;
        y[(i, i)] += (ys + sh) / (t * t);
        y[(j, j)] += ys + sh;
        y[(i, j)] -= ys / t;
        y[(j, i)] -= ys / t;
    }
    y
}

/// From-end current of a branch given bus voltages (ideal tap on the from side).
pub fn oracle_branch_current(case: &NetworkCase, h: u32, k: usize, v: &DVector<C>) -> C {
    let hf = h as f64;
    let br = &case.branches[k];
    let pos = |id: i64| case.buses.iter().position(|b| b.id == id).unwrap();
    let (i, j) = (pos(br.from), pos(br.to));
    let ys = cx(1.0, 0.0) / cx(br.r, hf * br.x);
    let sh = cx(0.0, hf * br.b_sh / 2.0);
    let vi = v[i] / br.tap;
    ys * (vi - v[j]) / br.tap + sh * vi / br.tap
}

/// Bus voltages for a unit current injection at bus index `n`.
pub fn oracle_unit_response(case: &NetworkCase, h: u32, n: usize) -> DVector<C> {
    let y = oracle_ybus(case, h);
    let mut e = DMatrix::from_element(y.nrows(), 1, cx(0.0, 0.0));
    e[(n, 0)] = cx(1.0, 0.0);
    gauss_solve(&y, &e).column(0).into_owned()
}

pub fn bus(id: i64) -> Bus {
    Bus { id, name: format!("Bus {id}"), g: 0.0, b: 0.0, load_g: None, load_b: None }
}

pub fn line(from: i64, to: i64, r: f64, x: f64, b_sh: f64) -> Branch {
    Branch { from, to, r, x, b_sh, transformer: false, tap: 1.0 }
}

pub fn two_bus() -> NetworkCase {
    NetworkCase {
        base_mva: 100.0,
        base_kv: 138.0,
        buses: vec![bus(1), bus(2)],
        branches: vec![line(1, 2, 0.0, 0.1, 0.0)],
        generators: vec![Generator { bus: 1, x_sub: 0.2 }],
    }
}

/// Random connected network: a spanning chain plus chords, with a few generators.
pub fn synthetic_case(n: usize, extra: usize, seed: u64) -> NetworkCase {
    let mut r = rng(seed);
    let buses: Vec<Bus> = (1..=n as i64).map(bus).collect();
    let mut branches = Vec::new();
    for i in 2..=n as i64 {
        let j = r.random_range(1..i);
        branches.push(line(
            j,
            i,
            0.005 + 0.02 * r.random::<f64>(),
            0.05 + 0.2 * r.random::<f64>(),
            0.02 * r.random::<f64>(),
        ));
    }
    for _ in 0..extra {
        let a = r.random_range(1..=n as i64);
        let b = r.random_range(1..=n as i64);
        if a != b {
            branches.push(line(a, b, 0.005 + 0.02 * r.random::<f64>(), 0.05 + 0.2 * r.random::<f64>(), 0.0));
        }
    }
    let generators = (0..(n / 4).max(1))
        .map(|g| Generator { bus: 1 + (g * 4) as i64, x_sub: 0.1 + 0.2 * r.random::<f64>() })
        .collect();
    NetworkCase { base_mva: 100.0, base_kv: 138.0, buses, branches, generators }
}

pub fn max_abs_diff(a: &DMatrix<C>, b: &DMatrix<C>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
