//! The transmit-to-decision chain: ISI convolution with noise, the DFT +
//! selection front end, per-layer maximum-likelihood decoding with successive
//! cancellation, pairwise error bounds and the difference-spectrum checks.

use num_complex::Complex64;

use crate::channel::{ChannelRealization, FrequencyChannel, SystemConfig, TapClassification};
use crate::codec::{Codebook, LayeredCodeword};
use crate::error::{Error, Result};
use crate::rng::{CounterStream, STREAM_NOISE};
use crate::specmath::{dft_matrix, hermitian_eigenvalues, ComplexMatrix};

/// Complex noise variance per received sample (E|z|^2). With this
/// normalization the pairwise ML error between two noiseless receive images at
/// distance d is exactly Q(d), the unit system every bound here is stated in.
pub const NOISE_VARIANCE: f64 = 0.5;

/// Gaussian tail probability `Q(x)`, clamped into (0, 1] for x <= 0.
pub fn q_function(x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
    }
}

/// One received block of `t_s * t_b` samples per receive antenna.
#[derive(Debug, Clone)]
pub struct ReceivedBlock {
    samples: Vec<Complex64>,
    pub m_r: usize,
    /// Samples per antenna.
    pub len: usize,
    pub snr: f64,
    pub noise_variance: f64,
}

impl ReceivedBlock {
    pub fn from_samples(
        samples: Vec<Complex64>,
        m_r: usize,
        snr: f64,
        noise_variance: f64,
    ) -> Result<Self> {
        if m_r == 0 || samples.len() % m_r != 0 {
            return Err(Error::InvalidFrame(format!(
                "{} samples do not split across {m_r} antennas",
                samples.len()
            )));
        }
        let len = samples.len() / m_r;
        Ok(ReceivedBlock {
            samples,
            m_r,
            len,
            snr,
            noise_variance,
        })
    }

    #[inline]
    pub fn sample(&self, p: usize, n: usize) -> Complex64 {
        self.samples[p * self.len + n]
    }
}

/// Run a layered codeword through the tapped channel, adding white complex
/// Gaussian noise from the stream keyed by `noise_seed` (None disables noise).
pub fn transmit(
    h: &ChannelRealization,
    word: &LayeredCodeword,
    snr: f64,
    noise_seed: Option<u64>,
) -> Result<ReceivedBlock> {
    if word.layout.m_t != h.m_t {
        return Err(Error::InvalidFrame(format!(
            "codeword spans {} antennas, channel has {}",
            word.layout.m_t, h.m_t
        )));
    }
    if word.layout.nu != h.nu {
        return Err(Error::InvalidFrame(format!(
            "codeword padded for memory {}, channel has {}",
            word.layout.nu, h.nu
        )));
    }
    let len = word.layout.t_s * word.layout.t_b;
    let streams: Vec<Vec<Complex64>> = (0..h.m_t).map(|q| word.antenna_stream(q)).collect();
    let noise_std = NOISE_VARIANCE.sqrt();
    let mut samples = Vec::with_capacity(h.m_r * len);
    for p in 0..h.m_r {
        for n in 0..len {
            let mut acc = Complex64::new(0.0, 0.0);
            for (q, stream) in streams.iter().enumerate() {
                for l in 0..=h.nu.min(n) {
                    acc += h.tap(p, q, l) * stream[n - l];
                }
            }
            if let Some(seed) = noise_seed {
                let element = (p * len + n) as u64;
                let mut z = CounterStream::for_ids(seed, &[STREAM_NOISE, element]);
                acc += z.next_cn01() * noise_std;
            }
            samples.push(acc);
        }
    }
    Ok(ReceivedBlock {
        samples,
        m_r: h.m_r,
        len,
        snr,
        noise_variance: if noise_seed.is_some() {
            NOISE_VARIANCE
        } else {
            0.0
        },
    })
}

/// How the kept frequency bins were chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionRule {
    /// Rank bins by received magnitude, ties to the lowest index.
    LargestMagnitude,
    /// Restrict to the good set of the strongest antenna first (multi-antenna
    /// transmit), then rank by magnitude.
    GoodSet,
}

/// The row-deletion receiver: which `t_s - nu` bins survive.
#[derive(Debug, Clone)]
pub struct SelectionPlan {
    /// Ascending, distinct, each below `t_s`.
    pub kept_indices: Vec<usize>,
    /// Antenna whose taps drove the selection.
    pub kappa: usize,
    pub rule: SelectionRule,
}

/// Choose the kept bins for one channel draw.
pub fn select_plan(
    class: &TapClassification,
    lambda: &FrequencyChannel,
    cfg: &SystemConfig,
) -> Result<SelectionPlan> {
    let keep = cfg.t_s - cfg.nu;
    let rank_and_take = |candidates: &mut Vec<usize>, power: &dyn Fn(usize) -> f64| {
        candidates.sort_by(|&a, &b| {
            power(b)
                .partial_cmp(&power(a))
                .expect("finite bin powers")
                .then(a.cmp(&b))
        });
        let mut kept: Vec<usize> = candidates[..keep].to_vec();
        kept.sort_unstable();
        kept
    };

    if cfg.m_t > 1 {
        let kappa = class.kappa;
        let good = &class.good_sets[class.pair_index(cfg.m_t, 0, kappa)];
        if good.len() < keep {
            return Err(Error::Numeric(format!(
                "good set of antenna {kappa} has {} bins, need {keep}; \
                 the deterministic cardinality bound was violated",
                good.len()
            )));
        }
        let mut candidates = good.clone();
        let power = |k: usize| lambda.lambda(0, kappa, k).norm_sqr();
        Ok(SelectionPlan {
            kept_indices: rank_and_take(&mut candidates, &power),
            kappa,
            rule: SelectionRule::GoodSet,
        })
    } else {
        let mut candidates: Vec<usize> = (0..cfg.t_s).collect();
        let power = |k: usize| lambda.receive_power(0, k);
        Ok(SelectionPlan {
            kept_indices: rank_and_take(&mut candidates, &power),
            kappa: class.kappa,
            rule: SelectionRule::LargestMagnitude,
        })
    }
}

fn validate_plan(plan: &SelectionPlan, t_s: usize) -> Result<usize> {
    let keep = plan.kept_indices.len();
    if keep == 0 || keep > t_s {
        return Err(Error::InvalidPlan(format!(
            "{keep} kept indices for block length {t_s}"
        )));
    }
    for (i, &k) in plan.kept_indices.iter().enumerate() {
        if k >= t_s {
            return Err(Error::InvalidPlan(format!("index {k} >= {t_s}")));
        }
        if plan.kept_indices[..i].contains(&k) {
            return Err(Error::InvalidPlan(format!("duplicate index {k}")));
        }
    }
    Ok(keep)
}

/// The reduced linear model after the DFT rotation and row deletion.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    /// Stacked reduced observations, `(t_s - nu) * m_r` rows by `t_b` columns.
    pub y_hat: ComplexMatrix,
    /// Composite map: `y_hat = b * X + noise` for stacked codewords `X`.
    pub b: ComplexMatrix,
    /// Row block `[diag(lambda_kept^(0,q))]_q` of the first receive antenna.
    pub lambda_hat: ComplexMatrix,
    /// Block-diagonal kept-row Fourier slice (one block per transmit antenna).
    pub q_breve_star: ComplexMatrix,
    pub kept_indices: Vec<usize>,
    pub noise_variance: f64,
    pub snr: f64,
}

/// Build `lambda_hat`, `q_breve_star` and the stacked map for a plan.
pub(crate) fn reduced_operator(
    lambda: &FrequencyChannel,
    plan: &SelectionPlan,
) -> Result<(ComplexMatrix, ComplexMatrix, ComplexMatrix)> {
    let t_s = lambda.t_s;
    let keep = validate_plan(plan, t_s)?;
    let m_t = lambda.m_t;
    let m_r = lambda.m_r;

    let q = dft_matrix(t_s)?;
    let q_star = q.hermitian();
    // Columns that see data symbols, then the kept rows.
    let q_tilde_star = q_star.keep_first_cols(keep);
    let q_hat_star = q_tilde_star.keep_rows(&plan.kept_indices);

    let mut q_breve_star = ComplexMatrix::zeros(keep * m_t, keep * m_t);
    for t in 0..m_t {
        for i in 0..keep {
            for j in 0..keep {
                q_breve_star.set(t * keep + i, t * keep + j, q_hat_star.get(i, j));
            }
        }
    }

    let mut lambda_hat = ComplexMatrix::zeros(keep, keep * m_t);
    for qx in 0..m_t {
        for (i, &k) in plan.kept_indices.iter().enumerate() {
            lambda_hat.set(i, qx * keep + i, lambda.lambda(0, qx, k));
        }
    }

    let mut b = ComplexMatrix::zeros(keep * m_r, keep * m_t);
    for p in 0..m_r {
        for qx in 0..m_t {
            for (i, &k) in plan.kept_indices.iter().enumerate() {
                let gain = lambda.lambda(p, qx, k);
                for j in 0..keep {
                    b.set(p * keep + i, qx * keep + j, gain * q_hat_star.get(i, j));
                }
            }
        }
    }
    Ok((b, lambda_hat, q_breve_star))
}

/// Rotate each received sub-block into the Fourier basis and delete the rows
/// outside the plan. Row deletion of a unitarily rotated white vector keeps
/// the noise white at the same variance.
pub fn receiver_front_end(
    y: &ReceivedBlock,
    lambda: &FrequencyChannel,
    plan: &SelectionPlan,
) -> Result<ReducedSystem> {
    let t_s = lambda.t_s;
    if y.len % t_s != 0 {
        return Err(Error::InvalidFrame(format!(
            "{} samples per antenna do not split into blocks of {t_s}",
            y.len
        )));
    }
    let t_b = y.len / t_s;
    let (b, lambda_hat, q_breve_star) = reduced_operator(lambda, plan)?;
    let keep = plan.kept_indices.len();

    let q = dft_matrix(t_s)?;
    let q_star = q.hermitian();
    let mut y_hat = ComplexMatrix::zeros(keep * y.m_r, t_b);
    for p in 0..y.m_r {
        for blk in 0..t_b {
            for (i, &k) in plan.kept_indices.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for n in 0..t_s {
                    acc += q_star.get(k, n) * y.sample(p, blk * t_s + n);
                }
                y_hat.set(p * keep + i, blk, acc);
            }
        }
    }
    Ok(ReducedSystem {
        y_hat,
        b,
        lambda_hat,
        q_breve_star,
        kept_indices: plan.kept_indices.clone(),
        noise_variance: y.noise_variance,
        snr: y.snr,
    })
}

/// `||target - b * word||_F^2`.
fn image_metric(b: &ComplexMatrix, target: &ComplexMatrix, word: &ComplexMatrix) -> f64 {
    let mut metric = 0.0;
    for col in 0..target.cols() {
        for r in 0..b.rows() {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..b.cols() {
                acc += b.get(r, j) * word.get(j, col);
            }
            let d = target.get(r, col) - acc;
            metric += d.norm_sqr();
        }
    }
    metric
}

/// Exact argmin over an explicit word list; ties go to the lowest index.
fn argmin_explicit(
    b: &ComplexMatrix,
    target: &ComplexMatrix,
    words: &[ComplexMatrix],
) -> (u64, f64) {
    let mut best = (0u64, f64::INFINITY);
    for (idx, word) in words.iter().enumerate() {
        let metric = image_metric(b, target, word);
        if metric < best.1 {
            best = (idx as u64, metric);
        }
    }
    best
}

/// Exact argmin over a product codebook by a mixed-radix Gray walk: each step
/// moves one digit by one, so the candidate image updates along a single
/// column of the map. Ties go to the lowest message index.
fn argmin_product(
    b: &ComplexMatrix,
    target: &ComplexMatrix,
    points: &[Complex64],
    positions: usize,
) -> (u64, f64) {
    let radix = points.len() as u64;
    let rows = b.rows();
    debug_assert_eq!(target.cols(), 1);
    debug_assert_eq!(b.cols(), positions);

    // Column-major copy of the map for contiguous column updates.
    let mut cols: Vec<Complex64> = Vec::with_capacity(rows * positions);
    for j in 0..positions {
        for r in 0..rows {
            cols.push(b.get(r, j));
        }
    }
    let mut radix_pow = vec![0u64; positions];
    let mut acc = 1u64;
    for rp in radix_pow.iter_mut() {
        *rp = acc;
        acc = acc.saturating_mul(radix);
    }

    // Image of the all-zero-digit word.
    let mut img = vec![Complex64::new(0.0, 0.0); rows];
    for j in 0..positions {
        for r in 0..rows {
            img[r] += cols[j * rows + r] * points[0];
        }
    }

    let mut digits = vec![0usize; positions];
    let mut dirs = vec![1i64; positions];
    let mut focus: Vec<usize> = (0..=positions).collect();
    let mut message = 0u64;
    let mut best_metric = f64::INFINITY;
    let mut best_message = 0u64;

    loop {
        let mut metric = 0.0;
        for r in 0..rows {
            metric += (target.get(r, 0) - img[r]).norm_sqr();
        }
        if metric < best_metric || (metric == best_metric && message < best_message) {
            best_metric = metric;
            best_message = message;
        }

        let j = focus[0];
        focus[0] = 0;
        if j == positions {
            break;
        }
        let old = digits[j];
        let new = (old as i64 + dirs[j]) as usize;
        digits[j] = new;
        let delta = points[new] - points[old];
        for r in 0..rows {
            img[r] += cols[j * rows + r] * delta;
        }
        if new as i64 == dirs[j].max(0) * (radix as i64 - 1) {
            // Hit the end of this digit's run; reverse and pass the focus up.
            dirs[j] = -dirs[j];
            focus[j] = focus[j + 1];
            focus[j + 1] = j + 1;
        }
        message = if new > old {
            message + radix_pow[j]
        } else {
            message - radix_pow[j]
        };
    }
    (best_message, best_metric)
}

fn argmin(b: &ComplexMatrix, target: &ComplexMatrix, book: &Codebook) -> Result<(u64, f64)> {
    match book {
        Codebook::Product {
            constellation,
            positions,
        } if target.cols() == 1 => Ok(argmin_product(
            b,
            target,
            constellation.points(),
            *positions,
        )),
        Codebook::Product { .. } => Err(Error::InvalidCodebook(
            "product codebooks decode single-column observations".into(),
        )),
        Codebook::Explicit { words } => {
            if words.is_empty() {
                return Err(Error::InvalidCodebook("empty codebook".into()));
            }
            Ok(argmin_explicit(b, target, words))
        }
    }
}

fn subtract_image(
    b: &ComplexMatrix,
    target: &ComplexMatrix,
    word: &ComplexMatrix,
) -> ComplexMatrix {
    let mut out = target.clone();
    for col in 0..target.cols() {
        for r in 0..b.rows() {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..b.cols() {
                acc += b.get(r, j) * word.get(j, col);
            }
            out.set(r, col, out.get(r, col) - acc);
        }
    }
    out
}

/// Result of joint-high-then-cancel decoding.
#[derive(Debug, Clone)]
pub struct DecodeOutcome {
    pub decided_h: u64,
    pub decided_l: Option<u64>,
    pub correct_h: bool,
    pub correct_l: Option<bool>,
    pub metric_h: f64,
    pub metric_l: Option<f64>,
    /// Low-layer correctness when the true high word is cancelled instead of
    /// the decided one; diagnostic counter alongside the genie-free result.
    pub genie_l_correct: Option<bool>,
}

/// Decode the high layer by exhaustive ML with the low layer treated as
/// noise, subtract the decided high image, then ML-decode the low layer.
pub fn decode_layers(
    sys: &ReducedSystem,
    h_book: &Codebook,
    l_book: Option<&Codebook>,
    sent_h: u64,
    sent_l: Option<u64>,
) -> Result<DecodeOutcome> {
    if h_book.is_empty() {
        return Err(Error::InvalidCodebook("empty high-layer codebook".into()));
    }
    if l_book.is_some() != sent_l.is_some() {
        return Err(Error::InvalidCodebook(
            "low-layer codebook and sent message must come together".into(),
        ));
    }
    let (decided_h, metric_h) = argmin(&sys.b, &sys.y_hat, h_book)?;
    let correct_h = decided_h == sent_h;

    let mut outcome = DecodeOutcome {
        decided_h,
        decided_l: None,
        correct_h,
        correct_l: None,
        metric_h,
        metric_l: None,
        genie_l_correct: None,
    };
    if let (Some(book), Some(truth)) = (l_book, sent_l) {
        if book.is_empty() {
            return Err(Error::InvalidCodebook("empty low-layer codebook".into()));
        }
        let residual = subtract_image(&sys.b, &sys.y_hat, &h_book.word(decided_h)?);
        let (decided_l, metric_l) = argmin(&sys.b, &residual, book)?;
        outcome.decided_l = Some(decided_l);
        outcome.correct_l = Some(decided_l == truth);
        outcome.metric_l = Some(metric_l);
        outcome.genie_l_correct = if correct_h {
            Some(decided_l == truth)
        } else {
            let genie_residual = subtract_image(&sys.b, &sys.y_hat, &h_book.word(sent_h)?);
            let (genie_l, _) = argmin(&sys.b, &genie_residual, book)?;
            Some(genie_l == truth)
        };
    }
    Ok(outcome)
}

/// Pairwise error bound for deciding `x_h_prime` over the transmitted `x_h`
/// with the low layer treated as noise:
/// `Q(||B dX|| - 2 sum_i ||B x_l_col_i||)`, clamped to 1 when the argument is
/// not positive.
pub fn pep_upper_bound(
    lambda: &FrequencyChannel,
    plan: &SelectionPlan,
    x_h: &ComplexMatrix,
    x_h_prime: &ComplexMatrix,
    x_l: Option<&ComplexMatrix>,
) -> Result<f64> {
    let dx = x_h.sub(x_h_prime);
    if dx.frobenius_norm_sq() == 0.0 {
        return Err(Error::UndefinedPair(
            "pairwise bound needs two distinct codewords".into(),
        ));
    }
    let (b, _, _) = reduced_operator(lambda, plan)?;
    let signal = b.mul(&dx).frobenius_norm();
    let mut interference = 0.0;
    if let Some(low) = x_l {
        let img = b.mul(low);
        for col in 0..img.cols() {
            let mut norm_sq = 0.0;
            for r in 0..img.rows() {
                norm_sq += img.get(r, col).norm_sqr();
            }
            interference += norm_sq.sqrt();
        }
    }
    Ok(q_function(signal - 2.0 * interference))
}

/// Spectral structure of one high-layer difference through the reduced system.
#[derive(Debug, Clone)]
pub struct EigenStructureReport {
    /// Eigenvalues of `Qb* dX dX* Qb`, descending.
    pub xi_sq: Vec<f64>,
    /// Eigenvalues of `Lh* Lh`, descending.
    pub gamma_sq: Vec<f64>,
    /// Product of all xi^2.
    pub xi_product: f64,
    /// `|det(Qb* dX)|^2`, the exact value the product must equal.
    pub det_reference: f64,
    pub product_matches: bool,
    /// Count of gamma above tolerance; must equal the kept-bin count.
    pub gamma_rank: usize,
    /// Nonzero gammas equal the kept bins' summed antenna powers as multisets.
    pub gamma_matches: bool,
    /// Largest xi^2 is below the Frobenius cap `||Qb*||_F^2 ||dX||_F^2`.
    pub max_xi_bound_holds: bool,
}

/// Verify the two difference-spectrum facts the pairwise analysis rests on:
/// the xi product equals the squared difference determinant through the kept
/// Fourier rows, and the gamma spectrum is the kept bins' summed transmit
/// powers padded with zeros.
pub fn eigen_structure_check(
    dx_h: &ComplexMatrix,
    lambda: &FrequencyChannel,
    plan: &SelectionPlan,
) -> Result<EigenStructureReport> {
    if lambda.m_r != 1 {
        return Err(Error::InvalidDimension(
            "difference-spectrum checks apply to single-receive-antenna systems".into(),
        ));
    }
    let (_, lambda_hat, q_breve_star) = reduced_operator(lambda, plan)?;
    let n = q_breve_star.rows();
    if dx_h.rows() != n {
        return Err(Error::InvalidDimension(format!(
            "difference has {} rows, reduced grid has {n}",
            dx_h.rows()
        )));
    }

    let m1 = q_breve_star.mul(dx_h);
    let gram = m1.mul(&m1.hermitian());
    let xi = hermitian_eigenvalues(&gram, 1e-12)?;
    let xi_sq = xi.eigenvalues;
    let xi_product: f64 = xi_sq.iter().product();
    let det_reference = if dx_h.rows() == dx_h.cols() {
        q_breve_star.mul(dx_h).determinant().norm_sqr()
    } else {
        gram.determinant().re.max(0.0)
    };
    let product_matches =
        (xi_product - det_reference).abs() <= 1e-9 * det_reference.abs().max(f64::MIN_POSITIVE);

    let gram2 = lambda_hat.hermitian().mul(&lambda_hat);
    let gamma = hermitian_eigenvalues(&gram2, 1e-12)?;
    let gamma_sq = gamma.eigenvalues;
    let keep = plan.kept_indices.len();
    let scale = gamma_sq.first().copied().unwrap_or(0.0).max(1.0);
    let gamma_rank = gamma_sq.iter().filter(|&&g| g > 1e-9 * scale).count();
    let mut expected: Vec<f64> = plan
        .kept_indices
        .iter()
        .map(|&k| lambda.transmit_power(0, k))
        .collect();
    expected.sort_by(|a, b| b.partial_cmp(a).expect("finite powers"));
    let gamma_matches = gamma_rank == keep
        && expected
            .iter()
            .zip(gamma_sq.iter())
            .all(|(e, g)| (e - g).abs() <= 1e-9 * e.abs().max(1.0));

    let frob_cap = q_breve_star.frobenius_norm_sq() * dx_h.frobenius_norm_sq();
    let max_xi_bound_holds = xi_sq.first().copied().unwrap_or(0.0) <= frob_cap * (1.0 + 1e-9);

    Ok(EigenStructureReport {
        xi_sq,
        gamma_sq,
        xi_product,
        det_reference,
        product_matches,
        gamma_rank,
        gamma_matches,
        max_xi_bound_holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{classify_taps, draw_channel, frequency_taps, snr_linear};
    use crate::codec::{build_layered_siso, qam, Codebook};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn siso_cfg(nu: usize, t_s: usize) -> SystemConfig {
        SystemConfig {
            nu,
            t_s,
            r_h: 0.0,
            r_l: 0.0,
            ..SystemConfig::default()
        }
    }

    fn unit_channel(taps: Vec<Complex64>) -> ChannelRealization {
        let nu = taps.len() - 1;
        ChannelRealization::from_taps(1, 1, nu, taps).unwrap()
    }

    #[test]
    fn identity_channel_passes_frame_through() {
        let cfg = siso_cfg(0, 4);
        let h = unit_channel(vec![c(1.0, 0.0)]);
        let snr = snr_linear(12.0);
        let word = build_layered_siso(&cfg, snr, 9, None).unwrap();
        let y = transmit(&h, &word, snr, None).unwrap();
        let stream = word.antenna_stream(0);
        for n in 0..4 {
            assert!((y.sample(0, n) - stream[n]).norm() < 1e-12);
        }
    }

    #[test]
    fn pure_delay_shifts_frame() {
        let cfg = siso_cfg(1, 5);
        let h = unit_channel(vec![c(0.0, 0.0), c(1.0, 0.0)]);
        let snr = snr_linear(12.0);
        let word = build_layered_siso(&cfg, snr, 3, None).unwrap();
        let y = transmit(&h, &word, snr, None).unwrap();
        let stream = word.antenna_stream(0);
        assert!(y.sample(0, 0).norm() < 1e-12);
        for n in 1..5 {
            assert!((y.sample(0, n) - stream[n - 1]).norm() < 1e-12);
        }
    }

    #[test]
    fn convolution_matches_naive_oracle() {
        let cfg = siso_cfg(2, 8);
        let snr = snr_linear(15.0);
        for trial in 0..20 {
            let h = draw_channel(&cfg, trial);
            let word = build_layered_siso(&cfg, snr, trial % 4096, None).unwrap();
            let y = transmit(&h, &word, snr, None).unwrap();
            let x = word.antenna_stream(0);
            for n in 0..8 {
                let mut expect = c(0.0, 0.0);
                for l in 0..=2usize {
                    if n >= l {
                        expect += h.tap(0, 0, l) * x[n - l];
                    }
                }
                assert!(
                    (y.sample(0, n) - expect).norm() < 1e-12,
                    "trial {trial} n {n}"
                );
            }
        }
    }

    #[test]
    fn mismatched_frame_rejected() {
        let cfg = siso_cfg(1, 8);
        let word = build_layered_siso(&cfg, snr_linear(12.0), 0, None).unwrap();
        let h = unit_channel(vec![c(1.0, 0.0)]);
        assert!(matches!(
            transmit(&h, &word, 10.0, None),
            Err(Error::InvalidFrame(_))
        ));
    }

    #[test]
    fn flat_channel_keeps_lowest_indices() {
        let cfg = siso_cfg(1, 8);
        let h = unit_channel(vec![c(0.7, -0.2), c(0.0, 0.0)]);
        let f = frequency_taps(&h, 8).unwrap();
        let class = classify_taps(&h, &f, 1.0, 100.0).unwrap();
        let plan = select_plan(&class, &f, &cfg).unwrap();
        assert_eq!(plan.kept_indices, vec![0, 1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn selection_drops_the_null_bin() {
        let cfg = siso_cfg(1, 4);
        let h = unit_channel(vec![c(1.0, 0.0), c(1.0, 0.0)]);
        let f = frequency_taps(&h, 4).unwrap();
        let class = classify_taps(&h, &f, 1.0, 100.0).unwrap();
        let plan = select_plan(&class, &f, &cfg).unwrap();
        assert_eq!(plan.kept_indices, vec![0, 1, 3]);
    }

    #[test]
    fn miso_plan_stays_inside_good_set() {
        let cfg = SystemConfig {
            m_t: 2,
            m_r: 1,
            nu: 1,
            t_s: 4,
            t_b: 6,
            r_h: 0.0,
            r_l: 0.0,
            ..SystemConfig::default()
        };
        for trial in 0..10_000 {
            let h = draw_channel(&cfg, trial);
            let f = frequency_taps(&h, cfg.t_s).unwrap();
            let class = classify_taps(&h, &f, 1.0, 1000.0).unwrap();
            let plan = select_plan(&class, &f, &cfg).unwrap();
            assert_eq!(plan.rule, SelectionRule::GoodSet);
            let good = &class.good_sets[class.pair_index(cfg.m_t, 0, plan.kappa)];
            for k in &plan.kept_indices {
                assert!(good.contains(k), "trial {trial}");
            }
        }
    }

    #[test]
    fn front_end_is_norm_preserving_when_nothing_dropped() {
        let cfg = siso_cfg(0, 8);
        let snr = snr_linear(10.0);
        let h = draw_channel(&cfg, 3);
        let f = frequency_taps(&h, 8).unwrap();
        let class = classify_taps(&h, &f, 1.0, snr).unwrap();
        let plan = select_plan(&class, &f, &cfg).unwrap();
        let word = build_layered_siso(&cfg, snr, 77, None).unwrap();
        let y = transmit(&h, &word, snr, Some(42)).unwrap();
        let sys = receiver_front_end(&y, &f, &plan).unwrap();
        let y_norm: f64 = (0..8).map(|n| y.sample(0, n).norm_sqr()).sum();
        assert!((sys.y_hat.frobenius_norm_sq() - y_norm).abs() < 1e-9 * y_norm);
    }

    #[test]
    fn noiseless_front_end_reconstructs_reduced_model() {
        let cfg = siso_cfg(1, 8);
        let snr = snr_linear(14.0);
        for trial in 0..50 {
            let h = draw_channel(&cfg, trial);
            let f = frequency_taps(&h, 8).unwrap();
            let class = classify_taps(&h, &f, 1.0, snr).unwrap();
            let plan = select_plan(&class, &f, &cfg).unwrap();
            let word = build_layered_siso(&cfg, snr, trial % 16384, None).unwrap();
            let y = transmit(&h, &word, snr, None).unwrap();
            let sys = receiver_front_end(&y, &f, &plan).unwrap();
            let residual = sys.y_hat.sub(&sys.b.mul(&word.x_h)).frobenius_norm();
            assert!(residual < 1e-10 * snr.max(1.0), "trial {trial}: {residual}");
        }
    }

    #[test]
    fn reduced_noise_stays_white() {
        let t_s = 8;
        let cfg = siso_cfg(1, t_s);
        let h = unit_channel(vec![c(0.9, 0.1), c(0.2, -0.4)]);
        let f = frequency_taps(&h, t_s).unwrap();
        let class = classify_taps(&h, &f, 1.0, 100.0).unwrap();
        let plan = select_plan(&class, &f, &cfg).unwrap();
        let trials = 100_000u64;
        let mut sum_sq = 0.0;
        let mut count = 0u64;
        for t in 0..trials {
            let mut samples = Vec::with_capacity(t_s);
            let mut stream = CounterStream::for_ids(0xD00D, &[STREAM_NOISE, t]);
            for _ in 0..t_s {
                samples.push(stream.next_cn01() * NOISE_VARIANCE.sqrt());
            }
            let y = ReceivedBlock::from_samples(samples, 1, 1.0, NOISE_VARIANCE).unwrap();
            let sys = receiver_front_end(&y, &f, &plan).unwrap();
            sum_sq += sys.y_hat.frobenius_norm_sq();
            count += sys.y_hat.rows() as u64;
        }
        let var = sum_sq / count as f64;
        assert!(
            (var - NOISE_VARIANCE).abs() / NOISE_VARIANCE < 0.02,
            "reduced noise variance {var}"
        );
    }

    #[test]
    fn duplicate_plan_rejected() {
        let h = unit_channel(vec![c(1.0, 0.0), c(0.5, 0.0)]);
        let f = frequency_taps(&h, 4).unwrap();
        let plan = SelectionPlan {
            kept_indices: vec![0, 0, 1],
            kappa: 0,
            rule: SelectionRule::LargestMagnitude,
        };
        let word = build_layered_siso(&siso_cfg(1, 4), snr_linear(12.0), 0, None).unwrap();
        let h_real = unit_channel(vec![c(1.0, 0.0), c(0.5, 0.0)]);
        let y = transmit(&h_real, &word, 10.0, None).unwrap();
        assert!(matches!(
            receiver_front_end(&y, &f, &plan),
            Err(Error::InvalidPlan(_))
        ));
    }

    #[test]
    fn zero_noise_decoding_is_exact() {
        let cfg = siso_cfg(1, 6);
        let snr = snr_linear(14.0);
        let book = Codebook::Product {
            constellation: qam(4, snr).unwrap(),
            positions: 5,
        };
        for trial in 0..200 {
            let h = draw_channel(&cfg, trial);
            let f = frequency_taps(&h, cfg.t_s).unwrap();
            let class = classify_taps(&h, &f, 1.0, snr).unwrap();
            let plan = select_plan(&class, &f, &cfg).unwrap();
            let msg = (trial * 37) % book.len();
            let word = build_layered_siso(&cfg, snr, msg, None).unwrap();
            let y = transmit(&h, &word, snr, None).unwrap();
            let sys = receiver_front_end(&y, &f, &plan).unwrap();
            let out = decode_layers(&sys, &book, None, msg, None).unwrap();
            assert!(out.correct_h, "trial {trial}");
            assert!(out.metric_h < 1e-14 * snr);
            assert!(out.decided_l.is_none());
        }
    }

    #[test]
    fn gray_walk_matches_explicit_enumeration() {
        let cfg = siso_cfg(1, 5);
        let snr = snr_linear(13.0);
        let constellation = qam(4, snr).unwrap();
        let book = Codebook::Product {
            constellation,
            positions: 4,
        };
        let words = book.materialize().unwrap();
        for trial in 0..40 {
            let h = draw_channel(&cfg, trial);
            let f = frequency_taps(&h, cfg.t_s).unwrap();
            let class = classify_taps(&h, &f, 1.0, snr).unwrap();
            let plan = select_plan(&class, &f, &cfg).unwrap();
            let msg = (trial * 101) % book.len();
            let word = build_layered_siso(&cfg, snr, msg, None).unwrap();
            let y = transmit(&h, &word, snr, Some(1000 + trial)).unwrap();
            let sys = receiver_front_end(&y, &f, &plan).unwrap();
            let fast = argmin(&sys.b, &sys.y_hat, &book).unwrap();
            let slow = argmin_explicit(&sys.b, &sys.y_hat, &words);
            assert_eq!(fast.0, slow.0, "trial {trial}");
            assert!((fast.1 - slow.1).abs() <= 1e-9 * slow.1.max(1.0));
        }
    }

    #[test]
    fn successive_cancellation_recovers_both_layers_noiseless() {
        let cfg = SystemConfig {
            nu: 1,
            t_s: 8,
            r_h: 0.25,
            r_l: 0.25,
            delta: 0.2,
            ..SystemConfig::default()
        };
        let snr = 1e4;
        let (high, low, _) = crate::codec::plan_layers(&cfg, snr).unwrap();
        let h_book = Codebook::Product {
            constellation: high.constellation,
            positions: cfg.data_len(),
        };
        let l_book = Codebook::Product {
            constellation: low.unwrap().constellation,
            positions: cfg.data_len(),
        };
        let mut checked = 0;
        for trial in 0..1000 {
            let h = draw_channel(&cfg, trial);
            let f = frequency_taps(&h, cfg.t_s).unwrap();
            let r_h_realized = crate::codec::realized_rate_tilde(snr, 4);
            let class = classify_taps(&h, &f, 1.0 - r_h_realized, snr).unwrap();
            if class.in_outage_set {
                continue;
            }
            checked += 1;
            let plan = select_plan(&class, &f, &cfg).unwrap();
            let msg_h = (trial * 991) % h_book.len();
            let msg_l = (trial * 577) % l_book.len();
            let word = build_layered_siso(&cfg, snr, msg_h, Some(msg_l)).unwrap();
            let y = transmit(&h, &word, snr, None).unwrap();
            let sys = receiver_front_end(&y, &f, &plan).unwrap();
            let out = decode_layers(&sys, &h_book, Some(&l_book), msg_h, Some(msg_l)).unwrap();
            assert!(out.correct_h, "trial {trial}");
            assert_eq!(out.correct_l, Some(true), "trial {trial}");
            // With the high layer decided correctly, the residual metric is
            // exactly the noiseless low-layer fit: zero.
            assert!(out.metric_l.unwrap() < 1e-12 * snr);
        }
        assert!(checked > 900, "outage should be rare at this SNR");
    }

    #[test]
    fn empty_codebook_rejected() {
        let cfg = siso_cfg(1, 4);
        let snr = snr_linear(12.0);
        let h = draw_channel(&cfg, 0);
        let f = frequency_taps(&h, 4).unwrap();
        let class = classify_taps(&h, &f, 1.0, snr).unwrap();
        let plan = select_plan(&class, &f, &cfg).unwrap();
        let word = build_layered_siso(&cfg, snr, 0, None).unwrap();
        let y = transmit(&h, &word, snr, None).unwrap();
        let sys = receiver_front_end(&y, &f, &plan).unwrap();
        let empty = Codebook::Explicit { words: vec![] };
        assert!(matches!(
            decode_layers(&sys, &empty, None, 0, None),
            Err(Error::InvalidCodebook(_))
        ));
    }

    #[test]
    fn q_function_endpoints() {
        assert_eq!(q_function(-1.0), 1.0);
        assert_eq!(q_function(0.0), 1.0);
        assert!((q_function(1e-12) - 0.5).abs() < 1e-9);
        assert!(q_function(5.0) < 3e-7);
    }

    #[test]
    fn q_function_matches_quadrature() {
        // Composite Simpson over the Gaussian tail, independent of erfc.
        let phi = |t: f64| (-(t * t) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        for x in [0.3, 0.7, 1.5, 2.5, 4.0] {
            let hi = x + 42.0;
            let n = 400_000;
            let h = (hi - x) / n as f64;
            let mut acc = phi(x) + phi(hi);
            for i in 1..n {
                let t = x + i as f64 * h;
                acc += phi(t) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            let oracle = acc * h / 3.0;
            let q = q_function(x);
            assert!((q - oracle).abs() < 1e-12, "x={x}: {q} vs {oracle}");
        }
    }

    #[test]
    fn pep_bound_scalar_case_is_q_of_distance() {
        // One bin, unit gain: the bound is exactly Q(d).
        let h = unit_channel(vec![c(1.0, 0.0)]);
        let f = frequency_taps(&h, 1).unwrap();
        let plan = SelectionPlan {
            kept_indices: vec![0],
            kappa: 0,
            rule: SelectionRule::LargestMagnitude,
        };
        for d in [0.5, 1.0, 2.0, 3.5] {
            let x0 = ComplexMatrix::new(1, 1, vec![c(d, 0.0)]).unwrap();
            let x1 = ComplexMatrix::new(1, 1, vec![c(0.0, 0.0)]).unwrap();
            let bound = pep_upper_bound(&f, &plan, &x0, &x1, None).unwrap();
            let direct = 0.5 * libm::erfc(d / std::f64::consts::SQRT_2);
            assert!((bound - direct).abs() < 1e-12, "d={d}");
        }
    }

    #[test]
    fn pep_bound_clamps_to_one() {
        let h = unit_channel(vec![c(1.0, 0.0)]);
        let f = frequency_taps(&h, 1).unwrap();
        let plan = SelectionPlan {
            kept_indices: vec![0],
            kappa: 0,
            rule: SelectionRule::LargestMagnitude,
        };
        let x0 = ComplexMatrix::new(1, 1, vec![c(0.1, 0.0)]).unwrap();
        let x1 = ComplexMatrix::new(1, 1, vec![c(0.0, 0.0)]).unwrap();
        let big_l = ComplexMatrix::new(1, 1, vec![c(10.0, 0.0)]).unwrap();
        let bound = pep_upper_bound(&f, &plan, &x0, &x1, Some(&big_l)).unwrap();
        assert_eq!(bound, 1.0);
    }

    #[test]
    fn pep_identical_pair_rejected() {
        let h = unit_channel(vec![c(1.0, 0.0)]);
        let f = frequency_taps(&h, 1).unwrap();
        let plan = SelectionPlan {
            kept_indices: vec![0],
            kappa: 0,
            rule: SelectionRule::LargestMagnitude,
        };
        let x0 = ComplexMatrix::new(1, 1, vec![c(1.0, 0.0)]).unwrap();
        assert!(matches!(
            pep_upper_bound(&f, &plan, &x0, &x0, None),
            Err(Error::UndefinedPair(_))
        ));
    }

    #[test]
    fn empirical_pairwise_error_respects_bound() {
        let cfg = siso_cfg(1, 6);
        let snr = snr_linear(10.0);
        let constellation = qam(4, snr).unwrap();
        let book = Codebook::Product {
            constellation,
            positions: 5,
        };
        for trial in 0..5 {
            let h = draw_channel(&cfg, 100 + trial);
            let f = frequency_taps(&h, cfg.t_s).unwrap();
            let class = classify_taps(&h, &f, 1.0, snr).unwrap();
            let plan = select_plan(&class, &f, &cfg).unwrap();
            let x0 = book.word(17).unwrap();
            let x1 = book.word(18).unwrap();
            let bound = pep_upper_bound(&f, &plan, &x0, &x1, None).unwrap();
            let (b, _, _) = reduced_operator(&f, &plan).unwrap();
            let img0 = b.mul(&x0);
            let img1 = b.mul(&x1);
            let trials = 20_000u64;
            let mut errors = 0u64;
            for t in 0..trials {
                let mut noise_stream = CounterStream::for_ids(7 + trial, &[STREAM_NOISE, t]);
                let mut m0 = 0.0;
                let mut m1 = 0.0;
                for r in 0..img0.rows() {
                    let z = noise_stream.next_cn01() * NOISE_VARIANCE.sqrt();
                    let y = img0.get(r, 0) + z;
                    m0 += (y - img0.get(r, 0)).norm_sqr();
                    m1 += (y - img1.get(r, 0)).norm_sqr();
                }
                if m1 < m0 {
                    errors += 1;
                }
            }
            let pe = errors as f64 / trials as f64;
            let sigma = (pe * (1.0 - pe) / trials as f64).sqrt();
            assert!(
                pe <= bound + 3.0 * sigma + 1e-9,
                "trial {trial}: pe {pe} bound {bound}"
            );
        }
    }

    #[test]
    fn scaled_identity_difference_has_flat_spectrum() {
        // Nothing dropped, so the kept Fourier slice is unitary and a scaled
        // identity difference has all xi^2 equal to the squared scale.
        let cfg = SystemConfig {
            m_t: 2,
            m_r: 1,
            nu: 0,
            t_s: 2,
            t_b: 4,
            r_h: 0.0,
            r_l: 0.0,
            ..SystemConfig::default()
        };
        let h = draw_channel(&cfg, 5);
        let f = frequency_taps(&h, cfg.t_s).unwrap();
        let class = classify_taps(&h, &f, 1.0, 100.0).unwrap();
        let plan = select_plan(&class, &f, &cfg).unwrap();
        let dx = ComplexMatrix::identity(4).scale(c(2.0, 0.0));
        let report = eigen_structure_check(&dx, &f, &plan).unwrap();
        for &xi in &report.xi_sq {
            assert!((xi - 4.0).abs() < 1e-9);
        }
        assert!((report.xi_product - 2.0f64.powi(8)).abs() < 1e-6);
        assert!(report.product_matches);
        assert!(report.max_xi_bound_holds);
    }

    #[test]
    fn keep_all_gamma_spectrum_is_bin_powers() {
        let cfg = SystemConfig {
            m_t: 2,
            m_r: 1,
            nu: 0,
            t_s: 2,
            t_b: 4,
            r_h: 0.0,
            r_l: 0.0,
            ..SystemConfig::default()
        };
        let h = draw_channel(&cfg, 11);
        let f = frequency_taps(&h, cfg.t_s).unwrap();
        let class = classify_taps(&h, &f, 1.0, 100.0).unwrap();
        let plan = select_plan(&class, &f, &cfg).unwrap();
        assert_eq!(plan.kept_indices.len(), 2);
        let dx = ComplexMatrix::identity(4);
        let report = eigen_structure_check(&dx, &f, &plan).unwrap();
        assert_eq!(report.gamma_rank, 2);
        assert!(report.gamma_matches);
    }

    #[test]
    fn random_differences_satisfy_spectrum_identities() {
        let cfg = SystemConfig {
            m_t: 2,
            m_r: 1,
            nu: 1,
            t_s: 3,
            t_b: 4,
            r_h: 0.2,
            r_l: 0.0,
            ..SystemConfig::default()
        };
        let snr = snr_linear(16.0);
        let book = crate::codec::build_miso_codebook(&cfg, snr, crate::codec::Layer::High).unwrap();
        let words = book.materialize().unwrap();
        for trial in 0..100 {
            let h = draw_channel(&cfg, trial);
            let f = frequency_taps(&h, cfg.t_s).unwrap();
            let class = classify_taps(&h, &f, 1.0, snr).unwrap();
            let plan = select_plan(&class, &f, &cfg).unwrap();
            let i = (trial as usize * 7) % words.len();
            let j = (i + 1 + trial as usize) % words.len();
            if i == j {
                continue;
            }
            let dx = words[i].sub(&words[j]);
            let report = eigen_structure_check(&dx, &f, &plan).unwrap();
            assert!(report.product_matches, "trial {trial}");
            assert!(report.gamma_matches, "trial {trial}");
            assert!(report.max_xi_bound_holds, "trial {trial}");
        }
    }
}
