//! Monte Carlo SNR sweeps, diversity-slope estimation, reference trade-off
//! curves and the Gaussian broadcast rate region.
//!
//! Sweeps run in fixed batches: trials inside a batch are independent and
//! reduce to integer counters, and the stopping rule is evaluated only at
//! batch boundaries, so results are byte-identical for any worker count.

use rayon::prelude::*;

use crate::channel::{classify_taps, draw_channel, frequency_taps, snr_linear, SystemConfig};
use crate::codec::{
    build_miso_codebook, plan_layers, Codebook, FrameLayout, Layer, LayeredCodeword,
};
use crate::error::{Error, Result};
use crate::link::{decode_layers, receiver_front_end, select_plan, transmit};
use crate::rng::{CounterStream, STREAM_MESSAGE_H, STREAM_MESSAGE_L, STREAM_NOISE};

const BATCH: u64 = 1024;

/// Error counts for one layer at one SNR point.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub snr_db: f64,
    pub layer: Layer,
    pub trials: u64,
    pub errors: u64,
    pub pe: f64,
    /// 95% binomial half-width.
    pub ci_halfwidth: f64,
}

/// Side information recorded per SNR point.
#[derive(Debug, Clone)]
pub struct PointDiagnostics {
    pub snr_db: f64,
    /// Realized frame-level multiplexing gain of the high layer.
    pub realized_rate_h: f64,
    /// Realized aggregate rate (both layers) when layered.
    pub realized_rate_sum: Option<f64>,
    pub beta: f64,
    /// Low-layer errors when the true high word is cancelled.
    pub genie_l_errors: Option<u64>,
    /// Trials falling outside the all-taps-faded set at the operating depth.
    pub trials_outside_outage: u64,
    pub h_errors_outside_outage: u64,
}

/// Full sweep output: one or two points per grid entry plus diagnostics.
#[derive(Debug, Clone)]
pub struct ErrorStats {
    pub points: Vec<SweepPoint>,
    pub diagnostics: Vec<PointDiagnostics>,
}

impl ErrorStats {
    /// Points of one layer in grid order.
    pub fn layer_points(&self, layer: Layer) -> Vec<&SweepPoint> {
        self.points.iter().filter(|p| p.layer == layer).collect()
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct Counts {
    trials: u64,
    err_h: u64,
    err_l: u64,
    genie_err_l: u64,
    outside: u64,
    err_h_outside: u64,
}

impl Counts {
    fn add(self, other: Counts) -> Counts {
        Counts {
            trials: self.trials + other.trials,
            err_h: self.err_h + other.err_h,
            err_l: self.err_l + other.err_l,
            genie_err_l: self.genie_err_l + other.genie_err_l,
            outside: self.outside + other.outside,
            err_h_outside: self.err_h_outside + other.err_h_outside,
        }
    }
}

fn binomial_ci(pe: f64, trials: u64) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    1.96 * (pe * (1.0 - pe) / trials as f64).sqrt()
}

struct PointSetup {
    snr: f64,
    h_book: Codebook,
    l_book: Option<Codebook>,
    beta: f64,
    alpha: f64,
}

fn point_setup(cfg: &SystemConfig, snr: f64) -> Result<PointSetup> {
    let (high, low, beta) = plan_layers(cfg, snr)?;
    let alpha = (1.0 - high.rate_tilde).clamp(0.05, 1.0);
    if cfg.m_t == 1 {
        let positions = cfg.data_len();
        let h_book = Codebook::Product {
            constellation: high.constellation,
            positions,
        };
        if h_book.len() > u64::MAX / 2 {
            return Err(Error::DeskScaleLimit("high codebook overflows".into()));
        }
        let l_book = low.map(|plan| Codebook::Product {
            constellation: plan.constellation,
            positions,
        });
        Ok(PointSetup {
            snr,
            h_book,
            l_book,
            beta,
            alpha,
        })
    } else {
        let h_book = build_miso_codebook(cfg, snr, Layer::High)?;
        let l_book = if cfg.single_layer() {
            None
        } else {
            Some(build_miso_codebook(cfg, snr, Layer::Low)?)
        };
        Ok(PointSetup {
            snr,
            h_book,
            l_book,
            beta,
            alpha,
        })
    }
}

fn run_trial(cfg: &SystemConfig, setup: &PointSetup, snr_idx: u64, trial: u64) -> Result<Counts> {
    let h = draw_channel(cfg, trial);
    let f = frequency_taps(&h, cfg.t_s)?;
    let class = classify_taps(&h, &f, setup.alpha, setup.snr)?;
    let plan = select_plan(&class, &f, cfg)?;

    let msg_h = CounterStream::for_ids(cfg.seed, &[STREAM_MESSAGE_H, snr_idx, trial])
        .next_below(setup.h_book.len());
    let msg_l = setup.l_book.as_ref().map(|book| {
        CounterStream::for_ids(cfg.seed, &[STREAM_MESSAGE_L, snr_idx, trial]).next_below(book.len())
    });

    let word = if cfg.m_t == 1 {
        crate::codec::build_layered_siso(cfg, setup.snr, msg_h, msg_l)?
    } else {
        LayeredCodeword {
            x_h: setup.h_book.word(msg_h)?,
            x_l: match (&setup.l_book, msg_l) {
                (Some(book), Some(m)) => Some(book.word(m)?),
                _ => None,
            },
            beta: setup.beta,
            message_h: msg_h,
            message_l: msg_l,
            layout: FrameLayout::from_config(cfg),
            power_rounding_factor: 1.0,
        }
    };

    let noise_seed = if cfg.noiseless {
        None
    } else {
        Some(CounterStream::for_ids(cfg.seed, &[STREAM_NOISE, snr_idx, trial]).next_u64())
    };
    let y = transmit(&h, &word, setup.snr, noise_seed)?;
    let sys = receiver_front_end(&y, &f, &plan)?;
    let out = decode_layers(&sys, &setup.h_book, setup.l_book.as_ref(), msg_h, msg_l)?;

    let err_h = !out.correct_h;
    let outside = !class.in_outage_set;
    Ok(Counts {
        trials: 1,
        err_h: err_h as u64,
        err_l: matches!(out.correct_l, Some(false)) as u64,
        genie_err_l: matches!(out.genie_l_correct, Some(false)) as u64,
        outside: outside as u64,
        err_h_outside: (err_h && outside) as u64,
    })
}

/// Sweep the SNR grid: per point, run trials until both layers have
/// `min_error_events` errors or `max_trials` is reached, whichever is first.
pub fn run_sweep(cfg: &SystemConfig) -> Result<ErrorStats> {
    cfg.validate()?;
    let mut points = Vec::new();
    let mut diagnostics = Vec::new();
    let frame_time = (cfg.t_s * cfg.t_b) as f64;

    for (snr_idx, &snr_db) in cfg.snr_grid_db.iter().enumerate() {
        let snr = snr_linear(snr_db);
        let setup = point_setup(cfg, snr)?;
        let layered = setup.l_book.is_some();

        let mut total = Counts::default();
        while total.trials < cfg.max_trials {
            let start = total.trials;
            let end = (start + BATCH).min(cfg.max_trials);
            let batch = (start..end)
                .into_par_iter()
                .map(|trial| run_trial(cfg, &setup, snr_idx as u64, trial))
                .try_reduce(Counts::default, |a, b| Ok(a.add(b)))?;
            total = total.add(batch);
            let slowest = if layered {
                total.err_h.min(total.err_l)
            } else {
                total.err_h
            };
            if slowest >= cfg.min_error_events {
                break;
            }
        }

        let pe_h = total.err_h as f64 / total.trials as f64;
        points.push(SweepPoint {
            snr_db,
            layer: Layer::High,
            trials: total.trials,
            errors: total.err_h,
            pe: pe_h,
            ci_halfwidth: binomial_ci(pe_h, total.trials),
        });
        if layered {
            let pe_l = total.err_l as f64 / total.trials as f64;
            points.push(SweepPoint {
                snr_db,
                layer: Layer::Low,
                trials: total.trials,
                errors: total.err_l,
                pe: pe_l,
                ci_halfwidth: binomial_ci(pe_l, total.trials),
            });
        }

        let rate_h = (setup.h_book.len() as f64).ln() / (snr.ln() * frame_time);
        let rate_sum = setup
            .l_book
            .as_ref()
            .map(|book| rate_h + (book.len() as f64).ln() / (snr.ln() * frame_time));
        diagnostics.push(PointDiagnostics {
            snr_db,
            realized_rate_h: rate_h,
            realized_rate_sum: rate_sum,
            beta: setup.beta,
            genie_l_errors: layered.then_some(total.genie_err_l),
            trials_outside_outage: total.outside,
            h_errors_outside_outage: total.err_h_outside,
        });
    }
    Ok(ErrorStats {
        points,
        diagnostics,
    })
}

/// Empirical frequency of the all-taps-faded event over `draws` channel
/// draws, for comparison against [`crate::channel::outage_probability_analytic`].
pub fn outage_monte_carlo(
    nu: usize,
    m_t: usize,
    m_r: usize,
    seed: u64,
    draws: u64,
    alpha: f64,
    snr: f64,
) -> f64 {
    let floor = snr.powf(-alpha);
    let cfg = SystemConfig {
        m_t,
        m_r,
        nu,
        t_s: nu + 1,
        t_b: if m_t > 1 { (nu + 1) * m_t } else { 1 },
        seed,
        r_h: 0.0,
        r_l: 0.0,
        ..SystemConfig::default()
    };
    let hits: u64 = (0..draws)
        .into_par_iter()
        .map(|trial| {
            let h = draw_channel(&cfg, trial);
            (h.global_max_tap_power() <= floor) as u64
        })
        .sum();
    hits as f64 / draws as f64
}

/// Least-squares slope of `log10(pe)` against `log10(snr)`.
#[derive(Debug, Clone)]
pub struct DiversityEstimate {
    pub layer: Layer,
    /// Negated log-log slope.
    pub slope: f64,
    pub intercept: f64,
    /// SNR points (dB) actually used, ascending.
    pub fit_window: Vec<f64>,
    pub r_squared: f64,
}

/// Fit the highest-SNR contiguous run of points with at least
/// `min_error_events` errors; needs three or more such points.
pub fn estimate_diversity(
    stats: &ErrorStats,
    layer: Layer,
    min_error_events: u64,
) -> Result<DiversityEstimate> {
    let mut pts: Vec<&SweepPoint> = stats.layer_points(layer);
    pts.sort_by(|a, b| a.snr_db.partial_cmp(&b.snr_db).expect("finite snr"));
    let mut window: Vec<&SweepPoint> = Vec::new();
    for p in pts.iter().rev() {
        if p.errors >= min_error_events {
            window.push(p);
        } else if window.is_empty() {
            continue; // skip unqualified points at the top
        } else {
            break; // contiguous run ended
        }
    }
    window.reverse();
    if window.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} qualifying points for layer {}, need 3",
            window.len(),
            layer.as_str()
        )));
    }
    let xs: Vec<f64> = window.iter().map(|p| p.snr_db / 10.0).collect();
    let ys: Vec<f64> = window.iter().map(|p| p.pe.log10()).collect();
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let slope_fit = sxy / sxx;
    let intercept = mean_y - slope_fit * mean_x;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (intercept + slope_fit * x)).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - mean_y).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok(DiversityEstimate {
        layer,
        slope: -slope_fit,
        intercept,
        fit_window: window.iter().map(|p| p.snr_db).collect(),
        r_squared,
    })
}

/// Achievable-diversity bracket at multiplexing gain `r`: the zero-padded
/// scheme guarantees `(nu+1) m_t (1 - r t_s/(t_s-nu))`, and no scheme beats
/// `(nu+1) m_t (1 - r)`.
pub fn bound_curves(cfg: &SystemConfig, r: f64) -> Result<(f64, f64)> {
    let cap = cfg.data_len() as f64 / cfg.t_s as f64;
    if !(0.0..=cap + 1e-12).contains(&r) {
        return Err(Error::InvalidConfig {
            field: "r_h",
            reason: format!("rate {r} outside [0, {cap}]"),
        });
    }
    let base = ((cfg.nu + 1) * cfg.m_t) as f64;
    let lower = base * (1.0 - r * cfg.t_s as f64 / cfg.data_len() as f64);
    let upper = base * (1.0 - r);
    Ok((lower, upper))
}

/// One row of the diversity summary: fitted slope against the bracket at the
/// realized rate (taken at the highest fitted SNR point).
#[derive(Debug, Clone)]
pub struct DiversityRow {
    pub layer: Layer,
    pub realized_rate: f64,
    pub slope: f64,
    pub r_squared: f64,
    pub bound_lower: f64,
    pub bound_upper: f64,
}

/// Build the per-layer summary rows; layers without three qualifying points
/// are skipped.
pub fn diversity_rows(cfg: &SystemConfig, stats: &ErrorStats) -> Result<Vec<DiversityRow>> {
    let mut rows = Vec::new();
    let layers: &[Layer] = if cfg.single_layer() {
        &[Layer::High]
    } else {
        &[Layer::High, Layer::Low]
    };
    for &layer in layers {
        let est = match estimate_diversity(stats, layer, cfg.min_error_events) {
            Ok(e) => e,
            Err(Error::InsufficientData(_)) => continue,
            Err(e) => return Err(e),
        };
        let top_db = *est
            .fit_window
            .last()
            .expect("window has at least three points");
        let diag = stats
            .diagnostics
            .iter()
            .find(|d| d.snr_db == top_db)
            .expect("diagnostics cover every grid point");
        let realized = match layer {
            Layer::High => diag.realized_rate_h,
            Layer::Low => diag.realized_rate_sum.unwrap_or(diag.realized_rate_h),
        };
        let clamped = realized.min(cfg.data_len() as f64 / cfg.t_s as f64);
        let (lower, upper) = bound_curves(cfg, clamped)?;
        rows.push(DiversityRow {
            layer,
            realized_rate: realized,
            slope: est.slope,
            r_squared: est.r_squared,
            bound_lower: lower,
            bound_upper: upper,
        });
    }
    Ok(rows)
}

/// CDF of the sum of `shape` unit-mean exponentials (Erlang) at `g`.
fn erlang_cdf(shape: usize, g: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for i in 1..shape {
        term *= g / i as f64;
        sum += term;
    }
    1.0 - (-g).exp() * sum
}

/// Typical channel gain at outage level `p`: the `p`-quantile of the Erlang
/// sum, found by bisection to 1e-12.
pub fn typical_gain(m_t: usize, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidConfig {
            field: "p_h",
            reason: format!("outage level must lie in (0, 1), got {p}"),
        });
    }
    let mut hi = 1.0;
    while erlang_cdf(m_t, hi) < p {
        hi *= 2.0;
        if hi > 1e9 {
            return Err(Error::Numeric("quantile bracket ran away".into()));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if erlang_cdf(m_t, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let g = 0.5 * (lo + hi);
    // An absolute-tolerance bisection cannot resolve quantiles this deep in
    // the lower tail; refuse rather than return a gain orders off.
    if g < 1e-300 || (erlang_cdf(m_t, g) - p).abs() > 1e-6 * p {
        return Err(Error::Numeric(format!(
            "outage level {p} too small for the quantile root-finder"
        )));
    }
    Ok(g)
}

/// Superposition rate region for the two typical channels.
#[derive(Debug, Clone)]
pub struct RateRegionCurve {
    /// `(rate_weak, rate_strong)` in bits/symbol along the power-split grid.
    pub points: Vec<(f64, f64)>,
    pub snr_db: f64,
    pub gain_weak: f64,
    pub gain_strong: f64,
    pub power_split_grid: Vec<f64>,
}

fn region_rates(power: f64, g_w: f64, g_s: f64, a: f64) -> (f64, f64) {
    let weak = (1.0 + a * power * g_w / (1.0 + (1.0 - a) * power * g_w)).log2();
    let strong = (1.0 + (1.0 - a) * power * g_s).log2();
    (weak, strong)
}

/// Sweep the power split `a` over a uniform grid. The weak user is the one
/// protected down to the smaller outage level `p_h`, so its typical gain is
/// the `p_h`-quantile; the strong user takes the `p_l`-quantile.
pub fn bc_rate_region(
    snr_db: f64,
    p_h: f64,
    p_l: f64,
    m_t: usize,
    grid: usize,
) -> Result<RateRegionCurve> {
    if !(p_h > 0.0 && p_h < p_l && p_l < 1.0) {
        return Err(Error::InvalidConfig {
            field: "p_h",
            reason: format!("need 0 < p_h < p_l < 1, got p_h={p_h}, p_l={p_l}"),
        });
    }
    if grid < 2 {
        return Err(Error::InvalidConfig {
            field: "grid",
            reason: "power-split grid needs at least two points".into(),
        });
    }
    let g_w = typical_gain(m_t, p_h)?;
    let g_s = typical_gain(m_t, p_l)?;
    let power = snr_linear(snr_db);
    let splits: Vec<f64> = (0..grid).map(|i| i as f64 / (grid - 1) as f64).collect();
    let points = splits
        .iter()
        .map(|&a| region_rates(power, g_w, g_s, a))
        .collect();
    Ok(RateRegionCurve {
        points,
        snr_db,
        gain_weak: g_w,
        gain_strong: g_s,
        power_split_grid: splits,
    })
}

/// One pairwise-error measurement against its analytic bound.
#[derive(Debug, Clone)]
pub struct PepCase {
    pub pair_id: u64,
    pub snr_db: f64,
    pub bound: f64,
    pub empirical: f64,
    pub trials: u64,
}

/// For each SNR point draw `triples` random (channel, high-layer pair,
/// low-layer word) combinations and measure the empirical pairwise error of
/// the two-hypothesis ML decision over `noise_draws` noise realizations,
/// alongside the analytic bound. Noise is drawn directly in the reduced
/// domain, where it is white by construction.
pub fn pep_experiment(cfg: &SystemConfig, triples: u64, noise_draws: u64) -> Result<Vec<PepCase>> {
    cfg.validate()?;
    let noise_std = crate::link::NOISE_VARIANCE.sqrt();
    let mut cases = Vec::new();
    for (snr_idx, &snr_db) in cfg.snr_grid_db.iter().enumerate() {
        let snr = snr_linear(snr_db);
        let setup = point_setup(cfg, snr)?;
        for t in 0..triples {
            let global_trial = snr_idx as u64 * triples + t;
            let h = draw_channel(cfg, global_trial);
            let f = frequency_taps(&h, cfg.t_s)?;
            let class = classify_taps(&h, &f, setup.alpha, snr)?;
            let plan = select_plan(&class, &f, cfg)?;

            let mut picks =
                CounterStream::for_ids(cfg.seed, &[crate::rng::STREAM_PAIRWISE, snr_idx as u64, t]);
            let len = setup.h_book.len();
            let msg0 = picks.next_below(len);
            let msg1 = loop {
                let v = picks.next_below(len);
                if v != msg0 {
                    break v;
                }
            };
            let x0 = setup.h_book.word(msg0)?;
            let x1 = setup.h_book.word(msg1)?;
            let x_l = match &setup.l_book {
                Some(book) => Some(book.word(picks.next_below(book.len()))?),
                None => None,
            };
            let bound = crate::link::pep_upper_bound(&f, &plan, &x0, &x1, x_l.as_ref())?;

            let (b, _, _) = crate::link::reduced_operator(&f, &plan)?;
            let img0 = b.mul(&x0);
            let img1 = b.mul(&x1);
            let mut baseline = img0.clone();
            if let Some(low) = &x_l {
                let img_l = b.mul(low);
                for i in 0..baseline.rows() {
                    for j in 0..baseline.cols() {
                        baseline.set(i, j, baseline.get(i, j) + img_l.get(i, j));
                    }
                }
            }
            let entries = baseline.rows() * baseline.cols();
            let errors: u64 = (0..noise_draws)
                .into_par_iter()
                .map(|draw| {
                    let mut z = CounterStream::for_ids(
                        cfg.seed,
                        &[crate::rng::STREAM_PAIRWISE, snr_idx as u64, t, draw],
                    );
                    let mut m0 = 0.0;
                    let mut m1 = 0.0;
                    for e in 0..entries {
                        let (i, j) = (e / baseline.cols(), e % baseline.cols());
                        let y = baseline.get(i, j) + z.next_cn01() * noise_std;
                        m0 += (y - img0.get(i, j)).norm_sqr();
                        m1 += (y - img1.get(i, j)).norm_sqr();
                    }
                    (m1 < m0) as u64
                })
                .sum();
            cases.push(PepCase {
                pair_id: snr_idx as u64 * 10_000 + t,
                snr_db,
                bound,
                empirical: errors as f64 / noise_draws as f64,
                trials: noise_draws,
            });
        }
    }
    Ok(cases)
}

/// Outcome of the deterministic structure suite over many channel draws.
#[derive(Debug, Clone)]
pub struct LemmaSuiteReport {
    pub draws: u64,
    /// Draws where some antenna pair had more than `nu` bins below the
    /// good-set threshold.
    pub good_set_violations: u64,
    /// Draws where some `(nu+1)`-subset of bins summed below `max_tap / C`.
    pub subset_bound_violations: u64,
    /// Draws where some single bin exceeded `(nu+1)` times the total tap power.
    pub upper_bound_violations: u64,
    /// Draws where the circulant failed to match its Fourier factorization.
    pub diagonalization_violations: u64,
    pub max_diagonalization_residual: f64,
}

impl LemmaSuiteReport {
    pub fn total_violations(&self) -> u64 {
        self.good_set_violations
            + self.subset_bound_violations
            + self.upper_bound_violations
            + self.diagonalization_violations
    }
}

fn subsets_of(t_s: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..size).collect();
    loop {
        out.push(current.clone());
        let mut i = size;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if current[i] != i + t_s - size {
                current[i] += 1;
                for j in i + 1..size {
                    current[j] = current[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Run the deterministic frequency/time tap relations over `draws` channel
/// draws of the given config: good-set cardinality, the subset power-sum
/// lower bound with the explicit constant, the per-bin upper bound and the
/// circulant diagonalization identity.
pub fn lemma_suite(cfg: &SystemConfig, draws: u64) -> Result<LemmaSuiteReport> {
    cfg.validate()?;
    let n_subsets = subsets_of(cfg.t_s, cfg.nu + 1).len() as u64;
    if n_subsets > 100_000 {
        return Err(Error::DeskScaleLimit(format!(
            "{n_subsets} subsets to scan per draw"
        )));
    }
    let subsets = subsets_of(cfg.t_s, cfg.nu + 1);
    let constant = crate::channel::selection_constant(cfg.t_s, cfg.nu);
    let q = crate::specmath::dft_matrix(cfg.t_s)?;
    let q_h = q.hermitian();

    let zero = || LemmaSuiteReport {
        draws: 0,
        good_set_violations: 0,
        subset_bound_violations: 0,
        upper_bound_violations: 0,
        diagonalization_violations: 0,
        max_diagonalization_residual: 0.0,
    };
    let report = (0..draws)
        .into_par_iter()
        .map(|trial| -> Result<LemmaSuiteReport> {
            let h = draw_channel(cfg, trial);
            let f = frequency_taps(&h, cfg.t_s)?;
            let class = classify_taps(&h, &f, 1.0, 1000.0)?;
            let mut rep = zero();
            rep.draws = 1;
            for p in 0..cfg.m_r {
                for qx in 0..cfg.m_t {
                    let pair = p * cfg.m_t + qx;
                    if cfg.t_s - class.good_sets[pair].len() > cfg.nu {
                        rep.good_set_violations = 1;
                    }
                    let max_tap = h.max_tap_power(p, qx);
                    let total: f64 = (0..=cfg.nu).map(|l| h.tap(p, qx, l).norm_sqr()).sum();
                    for subset in &subsets {
                        let sum: f64 = subset.iter().map(|&k| f.lambda(p, qx, k).norm_sqr()).sum();
                        if sum < max_tap / constant - 1e-12 * max_tap {
                            rep.subset_bound_violations = 1;
                        }
                    }
                    for k in 0..cfg.t_s {
                        let power = f.lambda(p, qx, k).norm_sqr();
                        if power > (cfg.nu + 1) as f64 * total * (1.0 + 1e-12) {
                            rep.upper_bound_violations = 1;
                        }
                    }
                    // H = Q diag(lambda) Q* , max-entry residual.
                    let mut row = vec![num_complex::Complex64::new(0.0, 0.0); cfg.t_s];
                    row[0] = h.tap(p, qx, 0);
                    for l in 1..=cfg.nu {
                        row[cfg.t_s - l] = h.tap(p, qx, l);
                    }
                    let circ = crate::specmath::circulant(&row)?;
                    let mut diag = crate::specmath::ComplexMatrix::zeros(cfg.t_s, cfg.t_s);
                    for k in 0..cfg.t_s {
                        diag.set(k, k, f.lambda(p, qx, k));
                    }
                    let residual = circ.max_abs_diff(&q.mul(&diag).mul(&q_h));
                    rep.max_diagonalization_residual = residual;
                    if residual >= 1e-10 {
                        rep.diagonalization_violations = 1;
                    }
                }
            }
            Ok(rep)
        })
        .try_reduce(zero, |a, b| {
            Ok(LemmaSuiteReport {
                draws: a.draws + b.draws,
                good_set_violations: a.good_set_violations + b.good_set_violations,
                subset_bound_violations: a.subset_bound_violations + b.subset_bound_violations,
                upper_bound_violations: a.upper_bound_violations + b.upper_bound_violations,
                diagonalization_violations: a.diagonalization_violations
                    + b.diagonalization_violations,
                max_diagonalization_residual: a
                    .max_diagonalization_residual
                    .max(b.max_diagonalization_residual),
            })
        })?;
    Ok(report)
}

/// Fraction of the strong user's peak rate still available when the weak user
/// keeps 95% of its own peak. Grows with SNR as the region approaches the
/// trapezoid.
pub fn strong_rate_retained_fraction(snr_db: f64, p_h: f64, p_l: f64, m_t: usize) -> Result<f64> {
    if !(p_h > 0.0 && p_h < p_l && p_l < 1.0) {
        return Err(Error::InvalidConfig {
            field: "p_h",
            reason: format!("need 0 < p_h < p_l < 1, got p_h={p_h}, p_l={p_l}"),
        });
    }
    let g_w = typical_gain(m_t, p_h)?;
    let g_s = typical_gain(m_t, p_l)?;
    let power = snr_linear(snr_db);
    let weak_max = region_rates(power, g_w, g_s, 1.0).0;
    let target = 0.95 * weak_max;
    // rate_weak is monotone increasing in a.
    let mut lo = 0.0;
    let mut hi = 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if region_rates(power, g_w, g_s, mid).0 < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = 0.5 * (lo + hi);
    let strong_at_target = region_rates(power, g_w, g_s, a).1;
    let strong_max = region_rates(power, g_w, g_s, 0.0).1;
    Ok(strong_at_target / strong_max)
}
