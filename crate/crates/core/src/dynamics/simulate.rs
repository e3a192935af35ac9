use rayon::prelude::*;

use super::{guarded, SdeConfig};
use crate::lyapunov::LyapunovFunction;
use crate::potential::{PhaseState, PotentialModel};
use crate::rng::StepStream;
use crate::{lit, Error, Result, Scalar};

/// Extra per-record quantities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    Position(usize),
    Momentum(usize),
}

impl Observable {
    pub fn name(&self) -> String {
        match self {
            Observable::Position(i) => format!("q{i}"),
            Observable::Momentum(i) => format!("p{i}"),
        }
    }

    fn eval<T: Scalar>(&self, x: &PhaseState<T>) -> T {
        match *self {
            Observable::Position(i) => x.q[i],
            Observable::Momentum(i) => x.p[i],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record<T> {
    pub t: T,
    pub h: T,
    pub u: T,
    pub p2: T,
    pub log_w: Option<T>,
    pub obs: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySummary<T> {
    pub records: Vec<Record<T>>,
    pub observables: Vec<Observable>,
    /// Set if the trajectory was found outside the domain (never for a successful run).
    pub exit_flag: bool,
    pub steps: u64,
    /// Steps that needed at least one halving.
    pub shrunk_steps: u64,
    pub max_shrink: u32,
    pub final_state: PhaseState<T>,
}

impl<T: Scalar> TrajectorySummary<T> {
    pub fn times(&self) -> Vec<T> {
        self.records.iter().map(|r| r.t).collect()
    }

    /// Fraction of steps that triggered the safeguard.
    pub fn shrink_rate(&self) -> f64 {
        self.shrunk_steps as f64 / self.steps.max(1) as f64
    }
}

#[derive(Debug, Clone, Default)]
pub struct SimulateOptions<'a, T> {
    pub observables: Vec<Observable>,
    /// Records `log W` when given.
    pub lyapunov: Option<&'a LyapunovFunction<T>>,
    /// Random stream (replica index).
    pub stream: u64,
}

/// Runs `sde.n_steps` steps from `x0` on stream 0.
pub fn simulate<T: Scalar>(
    model: &PotentialModel<T>,
    sde: &SdeConfig<T>,
    x0: &PhaseState<T>,
    observables: &[Observable],
) -> Result<TrajectorySummary<T>> {
    simulate_with(model, sde, x0, &SimulateOptions { observables: observables.to_vec(), lyapunov: None, stream: 0 })
}

fn record<T: Scalar>(
    t: T,
    x: &PhaseState<T>,
    u: T,
    opts: &SimulateOptions<'_, T>,
) -> Result<Record<T>> {
    let log_w = match opts.lyapunov {
        Some(lf) => Some(lf.log_w(x)?),
        None => None,
    };
    let p2 = x.p_norm_sq();
    Ok(Record {
        t,
        h: u + lit::<T>(0.5) * p2,
        u,
        p2,
        log_w,
        obs: opts.observables.iter().map(|o| o.eval(x)).collect(),
    })
}

/// Runs one trajectory, recording every `sde.sample_every` steps (and at `t = 0`).
///
/// Step `k` draws its noise from block `k` of stream `opts.stream`, so the
/// result depends only on `(seed, stream)`.
pub fn simulate_with<T: Scalar>(
    model: &PotentialModel<T>,
    sde: &SdeConfig<T>,
    x0: &PhaseState<T>,
    opts: &SimulateOptions<'_, T>,
) -> Result<TrajectorySummary<T>> {
    sde.validate()?;
    let dim = model.dim();
    if x0.q.len() != dim || x0.p.len() != dim {
        return Err(Error::Dimension { expected: dim, got: x0.q.len() });
    }
    for o in &opts.observables {
        let (Observable::Position(i) | Observable::Momentum(i)) = *o;
        if i >= dim {
            return Err(Error::Config(format!("observable {} out of range", o.name())));
        }
    }
    let mut u = model.potential(&x0.q)?;
    if !u.is_finite() {
        return Err(Error::Domain("initial state outside the domain".into()));
    }
    let mut stream = StepStream::new(sde.seed, opts.stream);
    let mut x = x0.clone();
    let mut records = Vec::with_capacity((sde.n_steps / sde.sample_every + 1) as usize);
    records.push(record(T::zero(), &x, u, opts)?);
    let (mut shrunk_steps, mut max_shrink) = (0u64, 0u32);
    let mut exit_flag = false;
    for k in 0..sde.n_steps {
        stream.seek(k);
        let (mut shrinks, mut substeps) = (0, 0);
        x = guarded(model, sde, &x, u, sde.dt, 0, stream.rng(), &mut shrinks, &mut substeps).map_err(|e| match e {
            Error::StepFailure { q, p, .. } => Error::StepFailure { step: k, q, p },
            other => other,
        })?;
        if shrinks > 0 {
            shrunk_steps += 1;
            max_shrink = max_shrink.max(shrinks);
        }
        u = model.potential(&x.q)?;
        if !u.is_finite() {
            exit_flag = true;
            break;
        }
        if (k + 1) % sde.sample_every == 0 {
            let t = sde.dt * lit((k + 1) as f64);
            records.push(record(t, &x, u, opts)?);
        }
    }
    Ok(TrajectorySummary {
        records,
        observables: opts.observables.clone(),
        exit_flag,
        steps: sde.n_steps,
        shrunk_steps,
        max_shrink,
        final_state: x,
    })
}

/// Independent replicas on streams `0..replicas`.
///
/// `x0s` holds one start shared by all replicas or one start per replica.
/// The output is ordered by replica and does not depend on scheduling;
/// a failing replica yields an `Err` in its slot without stopping the others.
pub fn ensemble<T: Scalar>(
    model: &PotentialModel<T>,
    sde: &SdeConfig<T>,
    x0s: &[PhaseState<T>],
    replicas: usize,
    opts: &SimulateOptions<'_, T>,
) -> Result<Vec<Result<TrajectorySummary<T>>>> {
    if x0s.is_empty() || (x0s.len() != 1 && x0s.len() != replicas) {
        return Err(Error::Config(format!(
            "ensemble needs 1 or {replicas} initial states, got {}",
            x0s.len()
        )));
    }
    Ok((0..replicas)
        .into_par_iter()
        .map(|r| {
            let x0 = &x0s[if x0s.len() == 1 { 0 } else { r }];
            let o = SimulateOptions { observables: opts.observables.clone(), lyapunov: opts.lyapunov, stream: r as u64 };
            simulate_with(model, sde, x0, &o)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Scheme;

    #[test]
    fn equal_seeds_are_bit_identical() {
        let m = PotentialModel::singular_1d(1.0, 4.0, 1.0, 2.0).unwrap();
        let sde = SdeConfig::new(1.0, 0.5, 1e-3).with_steps(2000).with_seed(9).with_sample_every(10);
        let x0 = PhaseState::at_rest(vec![1.0]);
        let a = simulate(&m, &sde, &x0, &[Observable::Position(0)]).unwrap();
        let b = simulate(&m, &sde, &x0, &[Observable::Position(0)]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 201);
        let c = simulate(&m, &sde.clone().with_seed(10), &x0, &[]).unwrap();
        assert_ne!(a.final_state, c.final_state);
    }

    #[test]
    fn replicas_differ_and_ignore_thread_count() {
        let m = PotentialModel::lennard_jones(2, 2, 1.0, 2.0, 1.0, 1.0).unwrap();
        let sde = SdeConfig::new(1.0, 0.5, 1e-3).with_steps(300).with_seed(4).with_sample_every(50);
        let x0 = PhaseState::at_rest(m.reference_config());
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| ensemble(&m, &sde, std::slice::from_ref(&x0), 4, &SimulateOptions::default()).unwrap())
        };
        let one: Vec<_> = run(1).into_iter().map(|r| r.unwrap()).collect();
        let eight: Vec<_> = run(8).into_iter().map(|r| r.unwrap()).collect();
        assert_eq!(one, eight);
        for i in 0..4 {
            for j in (i + 1)..4 {
                assert_ne!(one[i].records[1], one[j].records[1]);
            }
        }
    }

    #[test]
    fn noiseless_harmonic_energy_stays_bounded() {
        let m = PotentialModel::<f64>::poly_confine(0.5, 2.0, 1, 1).unwrap();
        let mut sde = SdeConfig::new(1e-12, 0.0, 1e-3).with_steps(100_000).with_sample_every(100);
        sde.scheme = Scheme::SplitOU;
        let x0 = PhaseState::new(vec![1.0], vec![0.0]);
        let s = simulate(&m, &sde, &x0, &[Observable::Position(0)]).unwrap();
        for r in &s.records {
            assert!((r.h - 0.5).abs() < 1e-6, "{}", r.h);
            let exact = r.t.cos();
            assert!((r.obs[0] - exact).abs() < 1e-3);
        }
    }

    #[test]
    fn step_failure_carries_index() {
        let m = PotentialModel::singular_1d(1.0, 4.0, 1.0, 2.0).unwrap();
        let mut sde = SdeConfig::new(1.0, 0.5, 0.5).with_steps(10);
        sde.max_dt_shrink = 0;
        sde.energy_jump_cap = 1e-9;
        match simulate(&m, &sde, &PhaseState::new(vec![0.2], vec![-20.0]), &[]) {
            Err(Error::StepFailure { step, .. }) => assert_eq!(step, 0),
            other => panic!("{other:?}"),
        }
    }
}
