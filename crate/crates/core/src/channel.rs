//! Quasi-static Rayleigh ISI channel model: tap draws, frequency-domain taps,
//! the good/faded tap classification and analytic outage probabilities.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rng::{CounterStream, STREAM_CHANNEL};
use crate::specmath::vandermonde_inverse_row_norms;

/// All run parameters for a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Transmit antennas.
    pub m_t: usize,
    /// Receive antennas.
    pub m_r: usize,
    /// ISI memory; the channel has `nu + 1` taps.
    pub nu: usize,
    /// Block length in symbols (data occupies `t_s - nu`, the rest is padding).
    pub t_s: usize,
    /// Number of zero-padded sub-blocks per codeword (1 for SISO/SIMO).
    pub t_b: usize,
    /// SNR sweep grid in dB.
    pub snr_grid_db: Vec<f64>,
    /// High-priority multiplexing gain.
    pub r_h: f64,
    /// Low-priority multiplexing gain. Zero disables the low layer entirely.
    pub r_l: f64,
    /// Power-split offset: the low layer transmits at `snr^(1 - beta)` with
    /// `beta = r_h_tilde + delta`, so `delta > 0` keeps the high layer's
    /// minimum distance dominant.
    pub delta: f64,
    /// Run seed; together with trial indices it determines every random draw.
    pub seed: u64,
    /// Per-SNR-point stop: collect at least this many error events per layer.
    pub min_error_events: u64,
    /// Per-SNR-point trial cap.
    pub max_trials: u64,
    /// Diagnostic override: skip the additive noise entirely.
    pub noiseless: bool,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            m_t: 1,
            m_r: 1,
            nu: 1,
            t_s: 8,
            t_b: 1,
            snr_grid_db: (0..10).map(|i| 12.0 + 2.0 * i as f64).collect(),
            r_h: 0.25,
            r_l: 0.25,
            delta: 0.05,
            seed: 1,
            min_error_events: 50,
            max_trials: 100_000,
            noiseless: false,
        }
    }
}

impl SystemConfig {
    /// Check every structural invariant, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.m_t == 0 {
            return Err(Error::InvalidConfig {
                field: "m_t",
                reason: "need at least one transmit antenna".into(),
            });
        }
        if self.m_r == 0 {
            return Err(Error::InvalidConfig {
                field: "m_r",
                reason: "need at least one receive antenna".into(),
            });
        }
        if self.m_t.min(self.m_r) != 1 {
            return Err(Error::InvalidConfig {
                field: "m_r",
                reason: format!(
                    "single degree of freedom required: min(m_t, m_r) = {} != 1",
                    self.m_t.min(self.m_r)
                ),
            });
        }
        if self.t_s <= self.nu {
            return Err(Error::InvalidConfig {
                field: "t_s",
                reason: format!(
                    "block length {} must exceed channel memory {}",
                    self.t_s, self.nu
                ),
            });
        }
        if self.m_t == 1 && self.t_b != 1 {
            return Err(Error::InvalidConfig {
                field: "t_b",
                reason: "sub-block count must be 1 for single-transmit-antenna runs".into(),
            });
        }
        if self.t_b == 0 {
            return Err(Error::InvalidConfig {
                field: "t_b",
                reason: "need at least one sub-block".into(),
            });
        }
        if self.snr_grid_db.is_empty() {
            return Err(Error::InvalidConfig {
                field: "snr_grid_db",
                reason: "SNR grid is empty".into(),
            });
        }
        if !(self.r_h >= 0.0) || !(self.r_l >= 0.0) {
            return Err(Error::InvalidConfig {
                field: "r_h",
                reason: "multiplexing gains must be non-negative".into(),
            });
        }
        let rate_cap = (self.t_s - self.nu) as f64 / self.t_s as f64;
        if self.r_h + self.r_l > rate_cap + 1e-12 {
            return Err(Error::InvalidConfig {
                field: "r_h",
                reason: format!(
                    "r_h + r_l = {} exceeds (t_s - nu)/t_s = {rate_cap}",
                    self.r_h + self.r_l
                ),
            });
        }
        if !(self.delta > 0.0) {
            return Err(Error::InvalidConfig {
                field: "delta",
                reason: "power-split offset must be positive".into(),
            });
        }
        if self.min_error_events == 0 {
            return Err(Error::InvalidConfig {
                field: "min_error_events",
                reason: "must be at least 1".into(),
            });
        }
        if self.max_trials == 0 {
            return Err(Error::InvalidConfig {
                field: "max_trials",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    /// Data symbols per sub-block.
    pub fn data_len(&self) -> usize {
        self.t_s - self.nu
    }

    /// Rate expansion from padding: `r * t_s / (t_s - nu)`.
    pub fn r_h_tilde(&self) -> f64 {
        self.r_h * self.t_s as f64 / self.data_len() as f64
    }

    pub fn r_l_tilde(&self) -> f64 {
        self.r_l * self.t_s as f64 / self.data_len() as f64
    }

    /// True when the run carries only the high-priority layer.
    pub fn single_layer(&self) -> bool {
        self.r_l == 0.0
    }
}

/// dB to linear power ratio.
pub fn snr_linear(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 10.0)
}

/// One quasi-static draw of the time-domain taps `h_l^(p,q)`.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub m_r: usize,
    pub m_t: usize,
    pub nu: usize,
    taps: Vec<Complex64>,
}

impl ChannelRealization {
    pub fn from_taps(m_r: usize, m_t: usize, nu: usize, taps: Vec<Complex64>) -> Result<Self> {
        if taps.len() != m_r * m_t * (nu + 1) {
            return Err(Error::InvalidDimension(format!(
                "expected {} taps, got {}",
                m_r * m_t * (nu + 1),
                taps.len()
            )));
        }
        Ok(ChannelRealization { m_r, m_t, nu, taps })
    }

    #[inline]
    pub fn tap(&self, p: usize, q: usize, l: usize) -> Complex64 {
        self.taps[(p * self.m_t + q) * (self.nu + 1) + l]
    }

    /// Largest tap power on the (p, q) pair.
    pub fn max_tap_power(&self, p: usize, q: usize) -> f64 {
        (0..=self.nu)
            .map(|l| self.tap(p, q, l).norm_sqr())
            .fold(0.0, f64::max)
    }

    /// Largest tap power over all pairs.
    pub fn global_max_tap_power(&self) -> f64 {
        self.taps.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max)
    }
}

/// Draw the i.i.d. CN(0,1) taps for one trial. The draw is a pure function of
/// `(cfg.seed, trial_index)` and of nothing else.
pub fn draw_channel(cfg: &SystemConfig, trial_index: u64) -> ChannelRealization {
    let per_pair = cfg.nu + 1;
    let count = cfg.m_r * cfg.m_t * per_pair;
    let mut taps = Vec::with_capacity(count);
    for element in 0..count as u64 {
        let mut stream = CounterStream::for_ids(cfg.seed, &[STREAM_CHANNEL, trial_index, element]);
        taps.push(stream.next_cn01());
    }
    ChannelRealization {
        m_r: cfg.m_r,
        m_t: cfg.m_t,
        nu: cfg.nu,
        taps,
    }
}

/// Frequency-domain taps `lambda_k^(p,q) = sum_l h_l^(p,q) e^{-2 pi j k l / t_s}`.
#[derive(Debug, Clone)]
pub struct FrequencyChannel {
    pub m_r: usize,
    pub m_t: usize,
    pub t_s: usize,
    lambdas: Vec<Complex64>,
}

impl FrequencyChannel {
    #[inline]
    pub fn lambda(&self, p: usize, q: usize, k: usize) -> Complex64 {
        self.lambdas[(p * self.m_t + q) * self.t_s + k]
    }

    /// `sum_p |lambda_k^(p,q)|^2` over receive antennas for fixed q.
    pub fn receive_power(&self, q: usize, k: usize) -> f64 {
        (0..self.m_r).map(|p| self.lambda(p, q, k).norm_sqr()).sum()
    }

    /// `sum_q |lambda_k^(1,q)|^2` over transmit antennas for fixed p.
    pub fn transmit_power(&self, p: usize, k: usize) -> f64 {
        (0..self.m_t).map(|q| self.lambda(p, q, k).norm_sqr()).sum()
    }
}

/// Evaluate the tap polynomial at the `t_s` roots of unity for every antenna
/// pair.
pub fn frequency_taps(h: &ChannelRealization, t_s: usize) -> Result<FrequencyChannel> {
    if t_s <= h.nu {
        return Err(Error::InvalidConfig {
            field: "t_s",
            reason: format!("block length {t_s} must exceed channel memory {}", h.nu),
        });
    }
    let mut lambdas = Vec::with_capacity(h.m_r * h.m_t * t_s);
    for p in 0..h.m_r {
        for q in 0..h.m_t {
            for k in 0..t_s {
                let mut acc = Complex64::new(0.0, 0.0);
                for l in 0..=h.nu {
                    let angle = -2.0 * std::f64::consts::PI * ((k * l) % t_s) as f64 / t_s as f64;
                    acc += h.tap(p, q, l) * Complex64::from_polar(1.0, angle);
                }
                lambdas.push(acc);
            }
        }
    }
    Ok(FrequencyChannel {
        m_r: h.m_r,
        m_t: h.m_t,
        t_s,
        lambdas,
    })
}

/// Deterministic constant for the good-set threshold: `(nu + 1)` times the
/// largest row norm of any inverse Vandermonde built on `nu + 1` of the `t_s`
/// frequency indices. With this constant, every `(nu+1)`-subset of frequency
/// bins contains at least one bin of power `>= max_tap / C`, so at most `nu`
/// bins can fall below that threshold.
pub fn selection_constant(t_s: usize, nu: usize) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&c) = cache.lock().expect("constant cache").get(&(t_s, nu)) {
        return c;
    }
    let size = nu + 1;
    assert!(size <= t_s, "need nu < t_s");
    let mut worst: f64 = 0.0;
    let mut subset: Vec<usize> = (0..size).collect();
    loop {
        let norms = vandermonde_inverse_row_norms(&subset, t_s)
            .expect("distinct in-range indices cannot fail");
        for norm in norms {
            worst = worst.max(norm);
        }
        // Next combination in lexicographic order.
        let mut i = size;
        loop {
            if i == 0 {
                let c = size as f64 * worst;
                cache.lock().expect("constant cache").insert((t_s, nu), c);
                return c;
            }
            i -= 1;
            if subset[i] != i + t_s - size {
                subset[i] += 1;
                for j in i + 1..size {
                    subset[j] = subset[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Good/faded frequency-bin classification for one channel draw at a given
/// fading depth `alpha` and operating SNR.
#[derive(Debug, Clone)]
pub struct TapClassification {
    /// Per antenna pair (row-major over `(p, q)`): bins with
    /// `|lambda_k|^2 >= max_tap / C`.
    pub good_sets: Vec<Vec<usize>>,
    /// Per antenna pair: bins with `|lambda_k|^2 < snr^-alpha`.
    pub faded_sets: Vec<Vec<usize>>,
    /// Every time-domain tap power is at most `snr^-alpha`.
    pub in_outage_set: bool,
    /// Best antenna along the non-singleton axis (transmit for MISO, receive
    /// for SIMO, 0 for SISO): the one carrying the largest tap power.
    pub kappa: usize,
    /// The threshold constant C used for the good sets.
    pub threshold_constant: f64,
    /// The finite-SNR premise of the faded-set cardinality claim holds:
    /// outside the outage set and `C * snr^-alpha <= max tap of antenna kappa`.
    pub faded_bound_applicable: bool,
    /// When applicable, the claim itself: `|F| <= nu` on antenna kappa's pair.
    pub faded_bound_holds: bool,
}

impl TapClassification {
    #[inline]
    pub fn pair_index(&self, m_t: usize, p: usize, q: usize) -> usize {
        p * m_t + q
    }
}

/// Classify every antenna pair's frequency bins.
pub fn classify_taps(
    h: &ChannelRealization,
    lambda: &FrequencyChannel,
    alpha: f64,
    snr: f64,
) -> Result<TapClassification> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidConfig {
            field: "alpha",
            reason: format!("fading depth must lie in (0, 1], got {alpha}"),
        });
    }
    if !(snr > 0.0) {
        return Err(Error::InvalidConfig {
            field: "snr",
            reason: format!("SNR must be positive, got {snr}"),
        });
    }
    let t_s = lambda.t_s;
    let constant = selection_constant(t_s, h.nu);
    let fade_floor = snr.powf(-alpha);

    let mut good_sets = Vec::with_capacity(h.m_r * h.m_t);
    let mut faded_sets = Vec::with_capacity(h.m_r * h.m_t);
    let mut in_outage = true;
    for p in 0..h.m_r {
        for q in 0..h.m_t {
            let max_tap = h.max_tap_power(p, q);
            if max_tap > fade_floor {
                in_outage = false;
            }
            let threshold = max_tap / constant;
            let mut good = Vec::new();
            let mut faded = Vec::new();
            for k in 0..t_s {
                let power = lambda.lambda(p, q, k).norm_sqr();
                if power >= threshold {
                    good.push(k);
                }
                if power < fade_floor {
                    faded.push(k);
                }
            }
            good_sets.push(good);
            faded_sets.push(faded);
        }
    }

    // Best antenna along the non-singleton axis.
    let kappa = if h.m_t > 1 {
        (0..h.m_t)
            .max_by(|&a, &b| {
                h.max_tap_power(0, a)
                    .partial_cmp(&h.max_tap_power(0, b))
                    .expect("finite tap powers")
            })
            .unwrap_or(0)
    } else {
        (0..h.m_r)
            .max_by(|&a, &b| {
                h.max_tap_power(a, 0)
                    .partial_cmp(&h.max_tap_power(b, 0))
                    .expect("finite tap powers")
            })
            .unwrap_or(0)
    };
    let kappa_pair = if h.m_t > 1 { kappa } else { kappa * h.m_t };
    let kappa_max_tap = if h.m_t > 1 {
        h.max_tap_power(0, kappa)
    } else {
        h.max_tap_power(kappa, 0)
    };

    let faded_bound_applicable = !in_outage && constant * fade_floor <= kappa_max_tap;
    let faded_bound_holds = !faded_bound_applicable || faded_sets[kappa_pair].len() <= h.nu;

    Ok(TapClassification {
        good_sets,
        faded_sets,
        in_outage_set: in_outage,
        kappa,
        threshold_constant: constant,
        faded_bound_applicable,
        faded_bound_holds,
    })
}

/// Exact probability that every one of the `(nu+1) * m_t * m_r` unit-mean
/// exponential tap powers falls below `snr^-alpha`.
pub fn outage_probability_analytic(alpha: f64, snr: f64, nu: usize, m_t: usize, m_r: usize) -> f64 {
    debug_assert!(snr > 0.0 && alpha > 0.0);
    let per_tap = -(-snr.powf(-alpha)).exp_m1();
    per_tap.powi(((nu + 1) * m_t * m_r) as i32)
}
