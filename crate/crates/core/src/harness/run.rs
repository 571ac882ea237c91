//! Instrumented training runs.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::harness::config::{Clock, ExperimentConfig, ObjectiveSpec};
use crate::harness::data::load_dataset;
use crate::harness::record::{write_csv_file, Flags, StepRecord};
use crate::linalg::random_orthogonal;
use crate::objectives::{glorot_init, GradientInfo, Mlp, Objective, Quadratic};
use crate::optim::{gd_edge, sam_edge, uphill_point};
use crate::params::Params;
use crate::spectral::{alignment, top_k_eigs, SpectralOptions};

/// Gradients below this norm make the SAM direction undefined; the harness
/// then takes a plain GD step and flags the record.
pub const ZERO_GRAD_NORM: f64 = 1e-12;

/// Default divergence cap, as a multiple of the initial loss.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

const DATA_STREAM: u64 = 1;
const INIT_STREAM: u64 = 2;
const BASIS_STREAM: u64 = 3;
const SPECTRAL_STREAM: u64 = 4;
const BATCH_STREAM: u64 = 5;

/// Independent 64-bit seed for a named purpose (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed
        ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The objective a config describes, ready to train.
#[derive(Clone, Debug)]
pub enum Problem {
    Quadratic(Quadratic<f64>),
    Mlp(Mlp<f64>),
}

impl Objective<f64> for Problem {
    fn dim(&self) -> usize {
        match self {
            Problem::Quadratic(q) => q.dim(),
            Problem::Mlp(m) => m.dim(),
        }
    }
    fn loss(&self, w: &Params<f64>) -> Result<f64> {
        match self {
            Problem::Quadratic(q) => q.loss(w),
            Problem::Mlp(m) => m.loss(w),
        }
    }
    fn gradient(&self, w: &Params<f64>) -> Result<GradientInfo<f64>> {
        match self {
            Problem::Quadratic(q) => q.gradient(w),
            Problem::Mlp(m) => m.gradient(w),
        }
    }
    fn hvp(&self, w: &Params<f64>, v: &Params<f64>) -> Result<Params<f64>> {
        match self {
            Problem::Quadratic(q) => q.hvp(w, v),
            Problem::Mlp(m) => m.hvp(w, v),
        }
    }
    fn loss_and_gradient(&self, w: &Params<f64>) -> Result<(f64, GradientInfo<f64>)> {
        match self {
            Problem::Quadratic(q) => q.loss_and_gradient(w),
            Problem::Mlp(m) => m.loss_and_gradient(w),
        }
    }
}

/// Builds the objective and the initial iterate.
pub fn build_problem(cfg: &ExperimentConfig) -> Result<(Problem, Params<f64>)> {
    let (problem, w0) = match &cfg.objective {
        ObjectiveSpec::Quadratic {
            eigenvalues,
            rotate,
            init_scale,
        } => {
            let d = eigenvalues.len();
            let model = if *rotate {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, BASIS_STREAM, 0));
                let basis: Vec<Vec<f64>> = random_orthogonal(d, &mut rng);
                Quadratic::from_eigenpairs(eigenvalues, &basis)?
            } else {
                Quadratic::diagonal(eigenvalues)?
            };
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, INIT_STREAM, 0));
            let w0: Vec<f64> = (0..d)
                .map(|_| init_scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            (Problem::Quadratic(model), Params::new(w0)?)
        }
        ObjectiveSpec::Mlp { hidden, activation } => {
            let spec = cfg
                .data
                .as_ref()
                .ok_or_else(|| Error::config("data", "mlp objective needs a [data] section"))?;
            let data = load_dataset(spec, derive_seed(cfg.seed, DATA_STREAM, 0))?;
            let mut widths = vec![spec.input_dim];
            widths.extend_from_slice(hidden);
            widths.push(spec.output_dim());
            let w0 = glorot_init(&widths, derive_seed(cfg.seed, INIT_STREAM, 0))?;
            let mlp = Mlp::new(widths, *activation, Arc::new(data))?;
            (Problem::Mlp(mlp), w0)
        }
    };
    if cfg.spectral.k > problem.dim() {
        return Err(Error::config(
            "spectral.k",
            format!("exceeds the parameter count {}", problem.dim()),
        ));
    }
    Ok((problem, w0))
}

/// Source of the `wall_s` column.
struct Meter {
    clock: Clock,
    start: Instant,
    work: f64,
}

impl Meter {
    fn new(clock: Clock) -> Self {
        Meter {
            clock,
            start: Instant::now(),
            work: 0.0,
        }
    }

    fn add(&mut self, evaluations: f64) {
        self.work += evaluations;
    }

    fn read(&self) -> f64 {
        match self.clock {
            Clock::Work => self.work,
            Clock::Wall => self.start.elapsed().as_secs_f64(),
        }
    }
}

/// Hands out minibatch objectives, reshuffling once per epoch.
struct Batches {
    base: Mlp<f64>,
    size: usize,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
}

impl Batches {
    fn new(base: Mlp<f64>, size: usize, seed: u64) -> Self {
        let n = base.data().len();
        Batches {
            base,
            size,
            rng: ChaCha8Rng::seed_from_u64(seed),
            order: (0..n).collect(),
            cursor: n,
        }
    }

    fn next(&mut self) -> Result<Mlp<f64>> {
        if self.cursor >= self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let end = (self.cursor + self.size).min(self.order.len());
        let rows = &self.order[self.cursor..end];
        self.cursor = end;
        self.base.with_data(Arc::new(self.base.data().subset(rows)?))
    }

    fn fraction(&self) -> f64 {
        self.size as f64 / self.order.len() as f64
    }
}

fn is_record_step(step: usize, period: usize, max_steps: usize) -> bool {
    step % period == 0 || step == max_steps
}

fn diverged_record(step: usize, wall_s: f64, loss: f64, k: usize, eta: f64) -> StepRecord {
    StepRecord {
        step,
        wall_s,
        loss,
        grad_norm: f64::NAN,
        uphill_grad_norm: f64::NAN,
        lambda_mags: vec![f64::NAN; k],
        gd_edge: 2.0 / eta,
        sam_edge: f64::NAN,
        align_iterate: f64::NAN,
        align_uphill: f64::NAN,
        flags: Flags {
            diverged: true,
            ..Flags::default()
        },
    }
}

/// Alignment with the convention that a zero gradient has alignment 0.
fn align_or_zero(g: &GradientInfo<f64>, v1: &Params<f64>) -> Result<f64> {
    if g.norm > 0.0 {
        alignment(&g.grad, v1)
    } else {
        Ok(0.0)
    }
}

/// Trains for `max_steps` steps (or until divergence) and returns a record
/// for every `period`-th step and the last one. Divergence ends the run with
/// a flagged record rather than an error.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<StepRecord>> {
    let (problem, mut w) = build_problem(cfg)?;
    let (eta, rho) = (cfg.optim.eta, cfg.optim.rho);
    let k = cfg.spectral.k;
    let mut batches = match (&problem, cfg.batch_size) {
        (Problem::Mlp(m), b) if b > 0 => Some(Batches::new(
            m.clone(),
            b,
            derive_seed(cfg.seed, BATCH_STREAM, 0),
        )),
        _ => None,
    };

    let mut meter = Meter::new(cfg.log.clock);
    let mut records = Vec::new();
    let mut threshold = cfg.optim.divergence_threshold;

    for step in 0..=cfg.optim.max_steps {
        let record = is_record_step(step, cfg.spectral.period, cfg.optim.max_steps);

        // Full-batch loss and gradient: every step in full-batch mode, and on
        // record steps otherwise.
        let full = if batches.is_none() || record {
            meter.add(1.0);
            match problem.loss_and_gradient(&w) {
                Ok(v) => Some(v),
                Err(Error::Diverged) => {
                    records.push(diverged_record(step, meter.read(), f64::NAN, k, eta));
                    break;
                }
                Err(e) => return Err(e),
            }
        } else {
            None
        };

        let batch = match batches.as_mut() {
            Some(b) => {
                meter.add(b.fraction());
                let obj = b.next()?;
                let lg = match obj.loss_and_gradient(&w) {
                    Ok(v) => v,
                    Err(Error::Diverged) => {
                        records.push(diverged_record(step, meter.read(), f64::NAN, k, eta));
                        break;
                    }
                    Err(e) => return Err(e),
                };
                Some((obj, lg))
            }
            None => None,
        };

        let monitored_loss = match (&full, &batch) {
            (Some((l, _)), _) => *l,
            (None, Some((_, (l, _)))) => *l,
            (None, None) => unreachable!("either full batch or minibatch loss exists"),
        };
        let cap = *threshold.get_or_insert_with(|| {
            if monitored_loss > 0.0 {
                DIVERGENCE_FACTOR * monitored_loss
            } else {
                f64::INFINITY
            }
        });
        if !monitored_loss.is_finite() || monitored_loss > cap {
            records.push(diverged_record(step, meter.read(), monitored_loss, k, eta));
            break;
        }

        // Gradient that drives this step and its uphill counterpart.
        let train_grad = match &batch {
            Some((_, (_, g))) => g.clone(),
            None => full.as_ref().unwrap().1.clone(),
        };
        let zero_grad = rho > 0.0 && train_grad.norm < ZERO_GRAD_NORM;
        let train_uphill = if rho > 0.0 && !zero_grad {
            let up = uphill_point(&w, &train_grad, rho)?;
            meter.add(batches.as_ref().map_or(1.0, |b| b.fraction()));
            let g = match &batch {
                Some((obj, _)) => obj.gradient(&up),
                None => problem.gradient(&up),
            };
            match g {
                Ok(g) => g,
                Err(Error::Diverged) => {
                    records.push(diverged_record(step, meter.read(), monitored_loss, k, eta));
                    break;
                }
                Err(e) => return Err(e),
            }
        } else {
            train_grad.clone()
        };

        if record {
            let (loss, grad) = full.as_ref().expect("record steps evaluate the full batch");
            let uphill = if batch.is_none() {
                train_uphill.clone()
            } else if rho > 0.0 && grad.norm > 0.0 {
                meter.add(1.0);
                problem.gradient(&uphill_point(&w, grad, rho)?)?
            } else {
                grad.clone()
            };
            let opts = SpectralOptions {
                k,
                tol: cfg.spectral.tol,
                max_iters: cfg.spectral.max_iters,
                seed: derive_seed(cfg.seed, SPECTRAL_STREAM, step as u64),
            };
            let spectrum = top_k_eigs(&problem, &w, &opts)?;
            meter.add(spectrum.hvp_calls as f64);
            let v1 = &spectrum.eigenvectors[0];
            let edge = if rho > 0.0 && grad.norm == 0.0 {
                0.0
            } else {
                sam_edge(eta, rho, grad.norm)?
            };
            records.push(StepRecord {
                step,
                wall_s: meter.read(),
                loss: *loss,
                grad_norm: grad.norm,
                uphill_grad_norm: uphill.norm,
                lambda_mags: spectrum.magnitudes(),
                gd_edge: gd_edge(eta)?,
                sam_edge: edge,
                align_iterate: align_or_zero(grad, v1)?,
                align_uphill: align_or_zero(&uphill, v1)?,
                flags: Flags {
                    diverged: false,
                    zero_grad,
                    spectral_unconverged: !spectrum.converged,
                },
            });
        }

        if step == cfg.optim.max_steps {
            break;
        }
        w = w.add_scaled(-eta, &train_uphill.grad);
    }
    Ok(records)
}

/// Runs `cfg` and writes its log to `path`.
pub fn run_to_file(cfg: &ExperimentConfig, path: &Path) -> Result<Vec<StepRecord>> {
    let records = run_experiment(cfg)?;
    write_csv_file(path, cfg.spectral.k, &records)?;
    Ok(records)
}
