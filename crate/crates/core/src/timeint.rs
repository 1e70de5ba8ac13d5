//! Forward Euler and SSP Runge-Kutta stepping of `M̂ u' = -K u + f(t)`.
//!
//! Schemes are stored in Butcher form `(A, b, c)` and stepped with the plain
//! stage recursion. The SSP schemes are compiled in from their Shu-Osher
//! coefficients and converted; every tableau is checked against the order
//! conditions of its order when it is built.

use std::fmt;
use std::str::FromStr;

use crate::assembly::CsrMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IntegratorKind {
    ForwardEuler,
    Ssprk3,
    Ssprk54,
}

impl IntegratorKind {
    pub const ALL: [IntegratorKind; 3] = [
        IntegratorKind::ForwardEuler,
        IntegratorKind::Ssprk3,
        IntegratorKind::Ssprk54,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IntegratorKind::ForwardEuler => "fe",
            IntegratorKind::Ssprk3 => "ssprk3",
            IntegratorKind::Ssprk54 => "ssprk54",
        }
    }
}

impl fmt::Display for IntegratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IntegratorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        IntegratorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown integrator '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tableau {
    pub name: &'static str,
    pub stages: usize,
    /// Strictly lower triangular, `a[i][j]` for `j < i`.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub c_ssp: f64,
    pub order: usize,
}

/// Shu-Osher form: stage `i ≥ 1` is `Σ_{j<i} α_ij u_j + dt β_ij F(u_j)`, the
/// last row gives `u_{n+1}`.
struct ShuOsher {
    alpha: &'static [&'static [f64]],
    beta: &'static [&'static [f64]],
}

const FE: ShuOsher = ShuOsher {
    alpha: &[&[1.0]],
    beta: &[&[1.0]],
};

const SSPRK3: ShuOsher = ShuOsher {
    alpha: &[&[1.0], &[0.75, 0.25], &[1.0 / 3.0, 0.0, 2.0 / 3.0]],
    beta: &[&[1.0], &[0.0, 0.25], &[0.0, 0.0, 2.0 / 3.0]],
};

// Spiteri & Ruuth optimal five-stage fourth-order scheme.
const SSPRK54: ShuOsher = ShuOsher {
    alpha: &[
        &[1.0],
        &[0.444370493651235, 0.555629506348765],
        &[0.620101851488403, 0.0, 0.379898148511597],
        &[0.178079954393132, 0.0, 0.0, 0.821920045606868],
        &[0.0, 0.0, 0.517231671970585, 0.096059710526147, 0.386708617503269],
    ],
    beta: &[
        &[0.391752226571890],
        &[0.0, 0.368410593050371],
        &[0.0, 0.0, 0.251891774271694],
        &[0.0, 0.0, 0.0, 0.544974750228521],
        &[0.0, 0.0, 0.0, 0.063692468666290, 0.226007483236906],
    ],
};

impl ShuOsher {
    fn to_tableau(&self, name: &'static str, order: usize) -> Tableau {
        let s = self.alpha.len();
        // rows[i] = Butcher coefficients of stage value i (i = 0..=s).
        let mut rows: Vec<Vec<f64>> = vec![vec![0.0; s]];
        let mut c_ssp = f64::INFINITY;
        for i in 0..s {
            let mut row = vec![0.0; s];
            for (j, (&al, &be)) in self.alpha[i].iter().zip(self.beta[i]).enumerate() {
                for (r, &prev) in row.iter_mut().zip(&rows[j]) {
                    *r += al * prev;
                }
                row[j] += be;
                if be > 0.0 {
                    c_ssp = c_ssp.min(al / be);
                }
            }
            rows.push(row);
        }
        let b = rows.pop().unwrap();
        let a: Vec<Vec<f64>> = rows.iter().enumerate().map(|(i, r)| r[..i].to_vec()).collect();
        let c = a.iter().map(|r| r.iter().sum()).collect();
        Tableau {
            name,
            stages: s,
            a,
            b,
            c,
            c_ssp,
            order,
        }
    }
}

impl Tableau {
    fn a_times(&self, v: &[f64]) -> Vec<f64> {
        self.a
            .iter()
            .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
            .collect()
    }

    fn b_dot(&self, v: &[f64]) -> f64 {
        self.b.iter().zip(v).map(|(x, y)| x * y).sum()
    }

    /// Residuals of the Butcher order conditions up to `self.order`
    /// (1, 1, 2 and 4 conditions for orders 1 to 4).
    pub fn order_residuals(&self) -> Vec<f64> {
        let c = &self.c;
        let c2: Vec<f64> = c.iter().map(|x| x * x).collect();
        let c3: Vec<f64> = c.iter().map(|x| x * x * x).collect();
        let ac = self.a_times(c);
        let mut r = vec![self.b.iter().sum::<f64>() - 1.0];
        if self.order >= 2 {
            r.push(self.b_dot(c) - 0.5);
        }
        if self.order >= 3 {
            r.push(self.b_dot(&c2) - 1.0 / 3.0);
            r.push(self.b_dot(&ac) - 1.0 / 6.0);
        }
        if self.order >= 4 {
            let cac: Vec<f64> = c.iter().zip(&ac).map(|(x, y)| x * y).collect();
            r.push(self.b_dot(&c3) - 0.25);
            r.push(self.b_dot(&cac) - 0.125);
            r.push(self.b_dot(&self.a_times(&c2)) - 1.0 / 12.0);
            r.push(self.b_dot(&self.a_times(&ac)) - 1.0 / 24.0);
        }
        r.into_iter().map(f64::abs).collect()
    }

    fn validate(&self) {
        let worst = self.order_residuals().into_iter().fold(0.0, f64::max);
        assert!(worst < 1e-12, "tableau {} fails its order conditions ({worst:e})", self.name);
        for (i, row) in self.a.iter().enumerate() {
            assert_eq!(row.len(), i, "tableau {} is not explicit", self.name);
        }
        assert!(self.c_ssp > 0.0);
    }
}

pub fn make_tableau(kind: IntegratorKind) -> Tableau {
    let t = match kind {
        IntegratorKind::ForwardEuler => FE.to_tableau("fe", 1),
        IntegratorKind::Ssprk3 => SSPRK3.to_tableau("ssprk3", 3),
        IntegratorKind::Ssprk54 => SSPRK54.to_tableau("ssprk54", 4),
    };
    t.validate();
    t
}

/// Time-dependent right-hand side on free DOFs.
pub trait Load: Sync {
    fn eval(&self, t: f64, out: &mut [f64]);

    fn is_zero(&self) -> bool {
        false
    }
}

pub struct NoLoad;

impl Load for NoLoad {
    fn eval(&self, _t: f64, out: &mut [f64]) {
        out.fill(0.0);
    }

    fn is_zero(&self) -> bool {
        true
    }
}

/// `f(t) = φ(t) · base`.
pub struct SeparableLoad<T: Fn(f64) -> f64 + Sync> {
    pub base: Vec<f64>,
    pub factor: T,
}

impl<T: Fn(f64) -> f64 + Sync> Load for SeparableLoad<T> {
    fn eval(&self, t: f64, out: &mut [f64]) {
        let s = (self.factor)(t);
        for (o, b) in out.iter_mut().zip(&self.base) {
            *o = s * b;
        }
    }
}

/// Arbitrary load from a closure.
pub struct FnLoad<T: Fn(f64, &mut [f64]) + Sync>(pub T);

impl<T: Fn(f64, &mut [f64]) + Sync> Load for FnLoad<T> {
    fn eval(&self, t: f64, out: &mut [f64]) {
        (self.0)(t, out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepState {
    pub u: Vec<f64>,
    pub t: f64,
    pub step_index: usize,
    /// `sqrt(uᵀ M̂ u)`.
    pub energy: f64,
}

pub fn energy(u: &[f64], m: &[f64]) -> f64 {
    u.iter().zip(m).map(|(x, d)| d * x * x).sum::<f64>().sqrt()
}

/// `‖f‖²_{M̂⁻¹} = Σ f_i² / m_i`.
pub fn dual_norm_sq(f: &[f64], m: &[f64]) -> f64 {
    f.iter().zip(m).map(|(x, d)| x * x / d).sum()
}

impl StepState {
    pub fn new(u: Vec<f64>, m: &[f64]) -> Self {
        let e = energy(&u, m);
        Self {
            u,
            t: 0.0,
            step_index: 0,
            energy: e,
        }
    }
}

/// Reusable buffers for the stage recursion.
struct Stepper<'a> {
    k: &'a CsrMatrix,
    m: &'a [f64],
    tab: &'a Tableau,
    stages: Vec<Vec<f64>>,
    work: Vec<f64>,
    load: Vec<f64>,
    /// Largest `‖f‖_{M̂⁻¹}` seen at any stage time.
    max_load_norm: f64,
    /// `‖f(t_n)‖²_{M̂⁻¹}` of the last step's first stage.
    last_load_sq: f64,
}

impl<'a> Stepper<'a> {
    fn new(k: &'a CsrMatrix, m: &'a [f64], tab: &'a Tableau) -> Self {
        let n = m.len();
        Self {
            k,
            m,
            tab,
            stages: vec![vec![0.0; n]; tab.stages],
            work: vec![0.0; n],
            load: vec![0.0; n],
            max_load_norm: 0.0,
            last_load_sq: 0.0,
        }
    }

    /// `out = M̂⁻¹ (f(t) - K v)`.
    fn rhs(&mut self, load: &dyn Load, v: &[f64], t: f64, out: &mut [f64], first: bool) {
        self.k.matvec_into(v, out);
        if load.is_zero() {
            for (o, d) in out.iter_mut().zip(self.m) {
                *o = -*o / d;
            }
            if first {
                self.last_load_sq = 0.0;
            }
        } else {
            load.eval(t, &mut self.load);
            let sq = dual_norm_sq(&self.load, self.m);
            self.max_load_norm = self.max_load_norm.max(sq.sqrt());
            if first {
                self.last_load_sq = sq;
            }
            for ((o, d), f) in out.iter_mut().zip(self.m).zip(&self.load) {
                *o = (f - *o) / d;
            }
        }
    }

    fn step(&mut self, load: &dyn Load, state: &StepState, dt: f64) -> Result<StepState> {
        let s = self.tab.stages;
        let mut stages = std::mem::take(&mut self.stages);
        let mut work = std::mem::take(&mut self.work);
        for i in 0..s {
            work.copy_from_slice(&state.u);
            for (j, &a) in self.tab.a[i].iter().enumerate() {
                if a != 0.0 {
                    for (w, g) in work.iter_mut().zip(&stages[j]) {
                        *w += dt * a * g;
                    }
                }
            }
            let t = state.t + self.tab.c[i] * dt;
            let (_, rest) = stages.split_at_mut(i);
            self.rhs(load, &work, t, &mut rest[0], i == 0);
        }
        let mut u = state.u.clone();
        for (j, &b) in self.tab.b.iter().enumerate() {
            if b != 0.0 {
                for (x, g) in u.iter_mut().zip(&stages[j]) {
                    *x += dt * b * g;
                }
            }
        }
        self.stages = stages;
        self.work = work;
        let step_index = state.step_index + 1;
        let t = state.t + dt;
        if let Some(i) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::Unstable {
                step: step_index,
                t,
                reason: format!("non-finite value at free DOF {i}"),
            });
        }
        let e = energy(&u, self.m);
        Ok(StepState {
            u,
            t,
            step_index,
            energy: e,
        })
    }
}

/// One explicit step of size `dt`.
pub fn ssp_step(
    k: &CsrMatrix,
    m: &[f64],
    load: &dyn Load,
    tab: &Tableau,
    state: &StepState,
    dt: f64,
) -> Result<StepState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    Stepper::new(k, m, tab).step(load, state, dt)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRecord {
    pub step: usize,
    pub t: f64,
    pub energy: f64,
    /// `‖f(t)‖²_{M̂⁻¹}` at the start of the step that produced this record
    /// (zero for the initial record).
    pub load_norm_sq: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntegrateOptions {
    pub record_energy: bool,
    /// Abort with [`Error::Unstable`] once `‖u_n‖²` exceeds this factor times
    /// the Grönwall bound `e^{t_n}‖u_0‖² + (1+dt)(e^{t_n}-1) C_F²`.
    pub growth_guard: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Integration {
    pub state: StepState,
    pub trace: Vec<EnergyRecord>,
    pub steps: usize,
    /// Largest `‖f‖_{M̂⁻¹}` over all stage evaluations.
    pub max_load_norm: f64,
}

/// March from `t = 0` to `t_end` with steps `dt`; the last step is shortened
/// to land on `t_end` exactly.
pub fn integrate(
    k: &CsrMatrix,
    m: &[f64],
    load: &dyn Load,
    tab: &Tableau,
    u0: Vec<f64>,
    dt: f64,
    t_end: f64,
    opts: &IntegrateOptions,
) -> Result<Integration> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("final time must be non-negative, got {t_end}")));
    }
    if u0.len() != m.len() || k.n() != m.len() {
        return Err(Error::InvalidArgument("initial vector does not match the system size".into()));
    }
    let n_steps = (t_end / dt).ceil() as usize;
    let mut stepper = Stepper::new(k, m, tab);
    let mut state = StepState::new(u0, m);
    let e0_sq = state.energy * state.energy;
    let mut trace = Vec::new();
    if opts.record_energy {
        trace.push(EnergyRecord {
            step: 0,
            t: 0.0,
            energy: state.energy,
            load_norm_sq: 0.0,
        });
    }
    for n in 0..n_steps {
        let h = if n + 1 == n_steps { t_end - state.t } else { dt };
        if !(h > 0.0) {
            break;
        }
        let mut next = stepper.step(load, &state, h)?;
        if n + 1 == n_steps {
            next.t = t_end;
        }
        if opts.record_energy {
            trace.push(EnergyRecord {
                step: next.step_index,
                t: next.t,
                energy: next.energy,
                load_norm_sq: stepper.last_load_sq,
            });
        }
        if let Some(factor) = opts.growth_guard {
            let et = next.t.exp();
            let cf = stepper.max_load_norm;
            let bound = et * e0_sq + (1.0 + dt) * (et - 1.0) * cf * cf;
            let e_sq = next.energy * next.energy;
            if e_sq > factor * bound + f64::MIN_POSITIVE {
                return Err(Error::Unstable {
                    step: next.step_index,
                    t: next.t,
                    reason: format!(
                        "energy² {e_sq:.6e} exceeds {factor} × Grönwall bound {bound:.6e}"
                    ),
                });
            }
        }
        state = next;
    }
    Ok(Integration {
        steps: state.step_index,
        state,
        trace,
        max_load_norm: stepper.max_load_norm,
    })
}

/// Energy trace as CSV with columns `step,t,energy`.
pub fn energy_trace_csv(trace: &[EnergyRecord]) -> String {
    let mut s = String::from("step,t,energy\n");
    for r in trace {
        s.push_str(&format!("{},{:.17e},{:.17e}\n", r.step, r.t, r.energy));
    }
    s
}
