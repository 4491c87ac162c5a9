//! Constellations and layered codebooks: Gray-labelled QAM, zero-padded
//! superposition frames for single-antenna runs, the diagonal rotated-QAM
//! construction for multi-antenna runs, and the exhaustive codebook
//! constraint checker.

use std::io::Write;

use num_complex::Complex64;

use crate::channel::SystemConfig;
use crate::error::{Error, Result};
use crate::specmath::ComplexMatrix;

/// Which priority layer a codebook or statistic belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    High,
    Low,
}

impl Layer {
    pub fn as_str(self) -> &'static str {
        match self {
            Layer::High => "H",
            Layer::Low => "L",
        }
    }
}

/// Admissible sizes: BPSK plus square QAM with a power-of-two side.
const QAM_SIZES: [usize; 6] = [4, 16, 64, 256, 1024, 4096];

/// Largest enumerable codebook; everything here is checked exhaustively.
pub const MAX_CODEBOOK: u64 = 4096;

/// Largest diagonal grid dimension for the multi-antenna construction.
pub const MAX_GRID: usize = 8;

/// A finite symbol alphabet with its energy and distance bookkeeping.
#[derive(Debug, Clone)]
pub struct Constellation {
    points: Vec<Complex64>,
    /// Mean of `|point|^2`, equal to the requested energy.
    pub average_energy: f64,
    /// Exhaustively computed squared minimum distance.
    pub d_min_sq: f64,
}

impl Constellation {
    pub fn size(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn point(&self, index: usize) -> Complex64 {
        self.points[index]
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// Largest single-point energy.
    pub fn peak_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).fold(0.0, f64::max)
    }

    /// Smallest single-point energy.
    pub fn min_energy(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.norm_sqr())
            .fold(f64::INFINITY, f64::min)
    }
}

fn gray_decode(g: u64) -> u64 {
    let mut n = g;
    let mut s = g >> 1;
    while s > 0 {
        n ^= s;
        s >>= 1;
    }
    n
}

/// Square QAM (or BPSK for size 2) with Gray-labelled axes, scaled to the
/// requested average energy. For square QAM the squared minimum distance is
/// `6 * average_energy / (size - 1)`.
pub fn qam(size: usize, average_energy: f64) -> Result<Constellation> {
    if size <= 1 {
        return Err(Error::DegenerateConstellation(format!(
            "size {size} carries no information"
        )));
    }
    if !(average_energy > 0.0) {
        return Err(Error::DegenerateConstellation(format!(
            "average energy {average_energy} collapses all points to zero"
        )));
    }
    let points = if size == 2 {
        let a = average_energy.sqrt();
        vec![Complex64::new(-a, 0.0), Complex64::new(a, 0.0)]
    } else {
        if !QAM_SIZES.contains(&size) {
            return Err(Error::UnsupportedConstellation(size));
        }
        let side = (size as f64).sqrt().round() as usize;
        let bits = side.trailing_zeros() as u64;
        // Unit-spacing grid of odd levels has mean energy 2*(side^2 - 1)/3.
        let scale = (average_energy / (2.0 * (size as f64 - 1.0) / 3.0)).sqrt();
        let amp = |label: u64| -> f64 {
            let level = gray_decode(label) as f64;
            (2.0 * level - (side as f64 - 1.0)) * scale
        };
        (0..size as u64)
            .map(|s| Complex64::new(amp(s >> bits), amp(s & ((1 << bits) - 1))))
            .collect()
    };
    let mut d_min_sq = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            d_min_sq = d_min_sq.min((points[i] - points[j]).norm_sqr());
        }
    }
    Ok(Constellation {
        points,
        average_energy,
        d_min_sq,
    })
}

/// Largest admissible square QAM size not exceeding `snr^r_tilde`, clamped to
/// a 4-QAM floor. The realized rate is reported by [`realized_rate_tilde`].
pub fn qam_size_for(snr: f64, r_tilde: f64) -> usize {
    debug_assert!(snr > 1.0);
    let target = snr.powf(r_tilde);
    QAM_SIZES
        .iter()
        .copied()
        .filter(|&s| (s as f64) <= target)
        .next_back()
        .unwrap_or(QAM_SIZES[0])
}

/// Per-symbol multiplexing rate actually carried by a constellation of the
/// given size at the given SNR.
pub fn realized_rate_tilde(snr: f64, size: usize) -> f64 {
    (size as f64).ln() / snr.ln()
}

/// Shape of the transmitted block structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameLayout {
    pub m_t: usize,
    pub t_s: usize,
    pub nu: usize,
    pub t_b: usize,
}

impl FrameLayout {
    pub fn from_config(cfg: &SystemConfig) -> Self {
        FrameLayout {
            m_t: cfg.m_t,
            t_s: cfg.t_s,
            nu: cfg.nu,
            t_b: cfg.t_b,
        }
    }

    pub fn data_len(&self) -> usize {
        self.t_s - self.nu
    }

    /// Rows of the stacked codeword matrix.
    pub fn grid_rows(&self) -> usize {
        self.data_len() * self.m_t
    }
}

/// A superposed pair of codeword matrices, stacked antenna-by-antenna.
#[derive(Debug, Clone)]
pub struct LayeredCodeword {
    /// High layer, `(t_s - nu) * m_t` rows by `t_b` columns.
    pub x_h: ComplexMatrix,
    /// Low layer, same shape; absent on single-layer runs.
    pub x_l: Option<ComplexMatrix>,
    /// Power split exponent: the low layer runs at `snr^(1 - beta)`.
    pub beta: f64,
    pub message_h: u64,
    pub message_l: Option<u64>,
    pub layout: FrameLayout,
    /// Constellation-rounding slack on the layer power ratio: the realized
    /// `||X_L||^2 / ||X_H||^2` never exceeds `snr^-beta` times this factor.
    pub power_rounding_factor: f64,
}

impl LayeredCodeword {
    /// The transmitted matrix `X = X_H + X_L`.
    pub fn combined(&self) -> ComplexMatrix {
        match &self.x_l {
            Some(l) => {
                let mut x = self.x_h.clone();
                for i in 0..x.rows() {
                    for j in 0..x.cols() {
                        x.set(i, j, x.get(i, j) + l.get(i, j));
                    }
                }
                x
            }
            None => self.x_h.clone(),
        }
    }

    /// Time-domain stream for one transmit antenna: `t_b` sub-blocks of
    /// `t_s - nu` data symbols, each followed by `nu` zeros.
    pub fn antenna_stream(&self, q: usize) -> Vec<Complex64> {
        let x = self.combined();
        stream_from_matrix(&x, &self.layout, q)
    }
}

/// Lay one antenna's rows of a stacked codeword onto the zero-padded time axis.
pub fn stream_from_matrix(x: &ComplexMatrix, layout: &FrameLayout, q: usize) -> Vec<Complex64> {
    let data = layout.data_len();
    let mut out = vec![Complex64::new(0.0, 0.0); layout.t_s * layout.t_b];
    for b in 0..layout.t_b.min(x.cols()) {
        for m in 0..data {
            out[b * layout.t_s + m] = x.get(q * data + m, b);
        }
    }
    out
}

/// An enumerable set of codeword matrices.
#[derive(Debug, Clone)]
pub enum Codebook {
    /// Independent symbols from one constellation across `positions` rows of a
    /// single column; message index is the mixed-radix expansion with position
    /// 0 as the least significant digit.
    Product {
        constellation: Constellation,
        positions: usize,
    },
    /// Explicit list of codeword matrices.
    Explicit { words: Vec<ComplexMatrix> },
}

impl Codebook {
    pub fn len(&self) -> u64 {
        match self {
            Codebook::Product {
                constellation,
                positions,
            } => (constellation.size() as u64).pow(*positions as u32),
            Codebook::Explicit { words } => words.len() as u64,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Materialize one codeword. Product words come out as single columns.
    pub fn word(&self, index: u64) -> Result<ComplexMatrix> {
        if index >= self.len() {
            return Err(Error::InvalidMessage {
                index,
                size: self.len(),
            });
        }
        match self {
            Codebook::Product {
                constellation,
                positions,
            } => {
                let mut col = ComplexMatrix::zeros(*positions, 1);
                let size = constellation.size() as u64;
                let mut rest = index;
                for m in 0..*positions {
                    col.set(m, 0, constellation.point((rest % size) as usize));
                    rest /= size;
                }
                Ok(col)
            }
            Codebook::Explicit { words } => Ok(words[index as usize].clone()),
        }
    }

    /// All codewords, guarded by the exhaustive cap.
    pub fn materialize(&self) -> Result<Vec<ComplexMatrix>> {
        if self.len() > MAX_CODEBOOK {
            return Err(Error::DeskScaleLimit(format!(
                "codebook of {} words exceeds the enumerable cap {MAX_CODEBOOK}",
                self.len()
            )));
        }
        (0..self.len()).map(|i| self.word(i)).collect()
    }
}

/// Constellation sizing for one layer of a run at one SNR point.
#[derive(Debug, Clone)]
pub struct LayerPlan {
    pub constellation: Constellation,
    /// Realized per-symbol rate `ln(size)/ln(snr)`.
    pub rate_tilde: f64,
}

/// Sizes and powers for both layers. The split exponent comes from the
/// nominal padded rate: `beta = r_h * t_s/(t_s - nu) + delta`.
pub fn plan_layers(cfg: &SystemConfig, snr: f64) -> Result<(LayerPlan, Option<LayerPlan>, f64)> {
    if !(snr > 1.0) {
        return Err(Error::InvalidConfig {
            field: "snr_grid_db",
            reason: format!("layer sizing needs snr > 1 (0 dB), got {snr}"),
        });
    }
    let size_h = qam_size_for(snr, cfg.r_h_tilde());
    let rate_h = realized_rate_tilde(snr, size_h);
    let beta = cfg.r_h_tilde() + cfg.delta;
    let high = LayerPlan {
        constellation: qam(size_h, snr)?,
        rate_tilde: rate_h,
    };
    let low = if cfg.single_layer() {
        None
    } else {
        let size_l = qam_size_for(snr, cfg.r_l_tilde());
        Some(LayerPlan {
            constellation: qam(size_l, snr.powf(1.0 - beta))?,
            rate_tilde: realized_rate_tilde(snr, size_l),
        })
    };
    Ok((high, low, beta))
}

fn product_column(
    constellation: &Constellation,
    positions: usize,
    message: u64,
) -> Result<ComplexMatrix> {
    Codebook::Product {
        constellation: constellation.clone(),
        positions,
    }
    .word(message)
}

/// Build one superposed single-antenna codeword: independent QAM symbols per
/// data instant on each layer, transmitted as `t_s - nu` symbols plus `nu`
/// padding zeros.
pub fn build_layered_siso(
    cfg: &SystemConfig,
    snr: f64,
    msg_h: u64,
    msg_l: Option<u64>,
) -> Result<LayeredCodeword> {
    if cfg.m_t != 1 {
        return Err(Error::InvalidConfig {
            field: "m_t",
            reason: "layered frame builder is single-transmit-antenna only".into(),
        });
    }
    cfg.validate()?;
    if cfg.single_layer() != msg_l.is_none() {
        return Err(Error::InvalidConfig {
            field: "r_l",
            reason: "low-layer message must be present exactly when r_l > 0".into(),
        });
    }
    let layout = FrameLayout::from_config(cfg);
    let n = layout.data_len();
    let (high, low, beta) = plan_layers(cfg, snr)?;

    let x_h = product_column(&high.constellation, n, msg_h)?;
    let mut rounding = 1.0f64;
    let x_l = match (&low, msg_l) {
        (Some(plan), Some(msg)) => {
            rounding = (plan.constellation.peak_energy() / plan.constellation.average_energy)
                * (high.constellation.average_energy / high.constellation.min_energy());
            Some(product_column(&plan.constellation, n, msg)?)
        }
        _ => None,
    };
    Ok(LayeredCodeword {
        x_h,
        x_l,
        beta,
        message_h: msg_h,
        message_l: msg_l,
        layout,
        power_rounding_factor: rounding,
    })
}

/// Desk-scale space-time codebook: one QAM symbol vector is mixed by a fixed
/// rotated Fourier generator and laid on the diagonal of the
/// `(t_s-nu)m_t x (t_s-nu)m_t` grid, so every codeword pair keeps a nonzero
/// difference determinant. The rotation is a fixed phase ramp of 0.5 radians
/// per grid index; non-vanishing of the determinant is verified numerically by
/// [`check_codebook`], never assumed.
pub fn build_miso_codebook(cfg: &SystemConfig, snr: f64, layer: Layer) -> Result<Codebook> {
    cfg.validate()?;
    if !(snr > 1.0) {
        return Err(Error::InvalidConfig {
            field: "snr_grid_db",
            reason: format!("codebook sizing needs snr > 1 (0 dB), got {snr}"),
        });
    }
    let layout = FrameLayout::from_config(cfg);
    let n = layout.grid_rows();
    if n > MAX_GRID {
        return Err(Error::DeskScaleLimit(format!(
            "grid dimension {n} exceeds the cap {MAX_GRID}"
        )));
    }

    let (high, low, beta) = plan_layers(cfg, snr)?;
    let (plan, power) = match layer {
        Layer::High => (high, snr),
        Layer::Low => (
            low.ok_or(Error::InvalidConfig {
                field: "r_l",
                reason: "low-layer codebook requested on a single-layer config".into(),
            })?,
            snr.powf(1.0 - beta),
        ),
    };

    if cfg.m_t == 1 && cfg.t_b == 1 {
        // Uncoded QAM per data instant; one column per codeword.
        let words = (plan.constellation.size() as u64).checked_pow(n as u32);
        match words {
            Some(w) if w <= MAX_CODEBOOK => {}
            _ => {
                return Err(Error::DeskScaleLimit(format!(
                    "{}^{n} words exceed the enumerable cap {MAX_CODEBOOK}",
                    plan.constellation.size()
                )))
            }
        }
        return Ok(Codebook::Product {
            constellation: plan.constellation,
            positions: n,
        });
    }

    if cfg.t_b != n {
        return Err(Error::InvalidConfig {
            field: "t_b",
            reason: format!("diagonal construction needs t_b = (t_s - nu) * m_t = {n}"),
        });
    }
    let size = plan.constellation.size() as u64;
    let count = size.checked_pow(n as u32);
    let count = match count {
        Some(c) if c <= MAX_CODEBOOK => c,
        _ => {
            return Err(Error::DeskScaleLimit(format!(
                "{size}^{n} words exceed the enumerable cap {MAX_CODEBOOK}"
            )))
        }
    };

    // Scale so the peak-energy symbol vector exactly meets the Frobenius cap
    // n * power.
    let peak_ratio = plan.constellation.average_energy / plan.constellation.peak_energy();
    let alphabet = qam(plan.constellation.size(), power * peak_ratio)?;

    let generator = crate::specmath::dft_matrix(n)?;
    let mut words = Vec::with_capacity(count as usize);
    for msg in 0..count {
        let mut symbols = Vec::with_capacity(n);
        let mut rest = msg;
        for m in 0..n {
            let phase = Complex64::from_polar(1.0, 0.5 * m as f64);
            symbols.push(alphabet.point((rest % size) as usize) * phase);
            rest /= size;
        }
        let mut word = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            let mut u = Complex64::new(0.0, 0.0);
            for (m, s) in symbols.iter().enumerate() {
                u += generator.get(i, m) * s;
            }
            word.set(i, i, u);
        }
        words.push(word);
    }
    Ok(Codebook::Explicit { words })
}

/// Targets one layer's codebook is checked against.
#[derive(Debug, Clone)]
pub struct LayerParams {
    pub layer: Layer,
    pub snr: f64,
    /// Power exponent of this layer (`1` for high, `1 - beta` for low).
    pub power_exponent: f64,
    /// Low layer's split exponent; zero for the high layer.
    pub beta: f64,
    pub m_t: usize,
    pub data_len: usize,
    /// Constant-factor slack on the determinant target (artifact convention:
    /// the target exponents are asymptotic, so finite SNR keeps a margin).
    pub tol: f64,
}

impl LayerParams {
    /// `(t_s - nu) * m_t * snr^power_exponent`: the per-word energy cap.
    pub fn frobenius_cap(&self) -> f64 {
        (self.data_len * self.m_t) as f64 * self.snr.powf(self.power_exponent)
    }

    /// Determinant target at the realized codebook rate: for the high layer
    /// `snr^(n - rate_total)`; the low layer additionally pays
    /// `(t_s - nu) * beta` in the exponent.
    pub fn det_target(&self, codebook_len: u64) -> f64 {
        let n = (self.data_len * self.m_t) as f64;
        let rate_total = (codebook_len as f64).ln() / self.snr.ln();
        let beta_cost = match self.layer {
            Layer::High => 0.0,
            Layer::Low => self.data_len as f64 * self.beta,
        };
        self.snr.powf(n - rate_total - beta_cost)
    }
}

/// Exhaustive pair scan over one codebook.
///
/// Fields for the other layer stay at their identity values (`inf` minimum,
/// `0` maximum) so reports from the two layers can be merged.
#[derive(Debug, Clone)]
pub struct ConstraintReport {
    pub min_det_h: f64,
    pub min_det_l: f64,
    pub max_frob_h: f64,
    pub max_frob_l: f64,
    pub pairs_checked: u64,
    pub pass: bool,
}

impl ConstraintReport {
    fn empty() -> Self {
        ConstraintReport {
            min_det_h: f64::INFINITY,
            min_det_l: f64::INFINITY,
            max_frob_h: 0.0,
            max_frob_l: 0.0,
            pairs_checked: 0,
            pass: true,
        }
    }

    /// Combine two per-layer reports into one.
    pub fn merge(&self, other: &ConstraintReport) -> ConstraintReport {
        ConstraintReport {
            min_det_h: self.min_det_h.min(other.min_det_h),
            min_det_l: self.min_det_l.min(other.min_det_l),
            max_frob_h: self.max_frob_h.max(other.max_frob_h),
            max_frob_l: self.max_frob_l.max(other.max_frob_l),
            pairs_checked: self.pairs_checked + other.pairs_checked,
            pass: self.pass && other.pass,
        }
    }

    /// Minimum difference determinant for the layer that was checked.
    pub fn min_det(&self) -> f64 {
        self.min_det_h.min(self.min_det_l)
    }
}

/// Evaluate `det(dX dX^H)` and `||dX||_F^2` over every distinct pair and
/// compare against the layer targets.
pub fn check_codebook(book: &Codebook, params: &LayerParams) -> Result<ConstraintReport> {
    if book.is_empty() {
        return Err(Error::InvalidCodebook("empty codebook".into()));
    }
    let words = book.materialize()?;
    let rows = words[0].rows();
    let cols = words[0].cols();
    if words.iter().any(|w| w.rows() != rows || w.cols() != cols) {
        return Err(Error::InvalidCodebook(
            "codeword shapes are inconsistent".into(),
        ));
    }

    let mut report = ConstraintReport::empty();
    let mut min_det = f64::INFINITY;
    let mut max_frob: f64 = 0.0;
    // Per-word energy cap (holds by construction; re-checked here).
    let frob_cap = params.frobenius_cap();
    let mut word_cap_ok = true;
    for w in &words {
        if w.frobenius_norm_sq() > frob_cap * (1.0 + 1e-9) {
            word_cap_ok = false;
        }
    }
    for i in 0..words.len() {
        for j in i + 1..words.len() {
            let dx = words[i].sub(&words[j]);
            let frob = dx.frobenius_norm_sq();
            max_frob = max_frob.max(frob);
            let det = if rows == cols {
                dx.determinant().norm_sqr()
            } else {
                let gram = dx.mul(&dx.hermitian());
                gram.determinant().re.max(0.0)
            };
            min_det = min_det.min(det);
            report.pairs_checked += 1;
        }
    }
    if words.len() == 1 {
        min_det = f64::INFINITY;
    }

    let det_target = params.det_target(book.len());
    let det_ok = report.pairs_checked == 0 || min_det >= det_target * (1.0 - params.tol);
    let pair_cap_ok = max_frob <= 4.0 * frob_cap * (1.0 + 1e-9);
    report.pass = det_ok && word_cap_ok && pair_cap_ok;
    match params.layer {
        Layer::High => {
            report.min_det_h = min_det;
            report.max_frob_h = max_frob;
        }
        Layer::Low => {
            report.min_det_l = min_det;
            report.max_frob_l = max_frob;
        }
    }
    Ok(report)
}

/// Write a codebook as CSV: message index, then real/imag interleaved entries
/// in row-major order.
pub fn write_codebook_csv<W: Write>(book: &Codebook, out: &mut W) -> std::io::Result<()> {
    for idx in 0..book.len() {
        let word = book
            .word(idx)
            .expect("index below len cannot be out of range");
        write!(out, "{idx}")?;
        for i in 0..word.rows() {
            for j in 0..word.cols() {
                let z = word.get(i, j);
                write!(out, ",{:.9e},{:.9e}", z.re, z.im)?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}
