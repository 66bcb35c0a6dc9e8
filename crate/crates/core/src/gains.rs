//! Scalar control gains `c(t)` and the integrability/decay conditions used to
//! decide which consensus guarantees apply.
//!
//! | condition | statement |
//! |-----------|-----------|
//! | C1  | `int_0^inf c = inf` |
//! | C2  | `int_0^inf c^2 < inf` |
//! | C3  | `c(t) -> 0` |
//! | C4  | `int_0^t exp(-rate int_s^t c) c^2(s) ds -> 0` (rate `rho_0`) |
//! | C4' | same with rate `2 * max Re(lambda)` |
//! | C5  | `c(t) log int_0^t c -> 0` |
//! | C5' | `liminf c(t) log int_0^t c = 0` |
//!
//! Built-in parametric families are decided symbolically. Tabulated gains are
//! decided numerically from their grid and may come back `Inconclusive`.

use std::fmt;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::graph::tokens_with_columns;
use crate::numeric::integrate;

/// Relative disagreement between successive tail estimates above which a
/// tabulated verdict is `Inconclusive`.
const TAIL_CONSISTENCY: f64 = 0.05;
/// Horizons for the numerical C4/C4' rule.
const C4_HORIZONS: [f64; 3] = [1e2, 1e3, 1e4];
const C4_THRESHOLD: f64 = 1e-3;

/// Piecewise-linear gain sampled on a strictly increasing grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GainTable {
    times: Vec<f64>,
    values: Vec<f64>,
    /// `cumulative[k] = int_{t_0}^{t_k} c`.
    cumulative: Vec<f64>,
}

impl GainTable {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || times.len() != values.len() {
            return Err(Error::InvalidGain("a table needs at least two (t, c) samples".into()));
        }
        if times.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidGain("table entries must be finite".into()));
        }
        if times[0] < 0.0 {
            return Err(Error::InvalidGain("table times must be nonnegative".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGain("table times must be strictly increasing".into()));
        }
        if values.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidGain("table values must be nonnegative".into()));
        }
        let mut cumulative = Vec::with_capacity(times.len());
        cumulative.push(0.0);
        for k in 1..times.len() {
            let h = times[k] - times[k - 1];
            cumulative.push(cumulative[k - 1] + 0.5 * h * (values[k] + values[k - 1]));
        }
        Ok(Self {
            times,
            values,
            cumulative,
        })
    }

    /// Samples `f` on `times`.
    pub fn sample(times: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = times.iter().map(|&t| f(t)).collect();
        Self::new(times, values)
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn check_range(&self, t: f64) -> Result<()> {
        if t < self.start() || t > self.end() || t.is_nan() {
            return Err(Error::BeyondGrid {
                t,
                start: self.start(),
                end: self.end(),
            });
        }
        Ok(())
    }

    /// Index `k` with `times[k] <= t <= times[k+1]`.
    fn segment(&self, t: f64) -> usize {
        match self.times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(k) => k.min(self.times.len() - 2),
            Err(k) => (k - 1).min(self.times.len() - 2),
        }
    }

    fn eval_unchecked(&self, t: f64) -> f64 {
        let k = self.segment(t);
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let w = (t - t0) / (t1 - t0);
        self.values[k] + w * (self.values[k + 1] - self.values[k])
    }

    /// `int_{start}^{t} c`, exact for the linear interpolant.
    fn primitive(&self, t: f64) -> f64 {
        let k = self.segment(t);
        let h = t - self.times[k];
        let c0 = self.values[k];
        let c1 = self.eval_unchecked(t);
        self.cumulative[k] + 0.5 * h * (c0 + c1)
    }

    /// `int_{start}^{t} c^2`, exact for the linear interpolant.
    fn primitive_sq(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        let k_end = self.segment(t);
        for k in 0..k_end {
            let h = self.times[k + 1] - self.times[k];
            let (a, b) = (self.values[k], self.values[k + 1]);
            acc += h / 3.0 * (a * a + a * b + b * b);
        }
        let h = t - self.times[k_end];
        let a = self.values[k_end];
        let b = self.eval_unchecked(t);
        acc + h / 3.0 * (a * a + a * b + b * b)
    }

    /// Parses `t c` lines; `#` starts a comment.
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let content = raw.split('#').next().unwrap_or("");
            let toks: Vec<(usize, &str)> = tokens_with_columns(content).collect();
            if toks.is_empty() {
                continue;
            }
            if toks.len() != 2 {
                let col = toks.get(2).map_or(toks[0].0, |t| t.0);
                return Err(Error::parse(source_name, line_no, col, "expected two columns 't c'"));
            }
            let mut nums = [0.0; 2];
            for (slot, (col, tok)) in nums.iter_mut().zip(&toks) {
                *slot = parse_number(tok)
                    .ok_or_else(|| Error::parse(source_name, line_no, *col, format!("invalid number '{tok}'")))?;
            }
            if let Some(&prev) = times.last() {
                if nums[0] <= prev {
                    return Err(Error::parse(
                        source_name,
                        line_no,
                        toks[0].0,
                        "times must be strictly increasing",
                    ));
                }
            }
            if nums[1] < 0.0 {
                return Err(Error::parse(
                    source_name,
                    line_no,
                    toks[1].0,
                    "gain values must be nonnegative",
                ));
            }
            times.push(nums[0]);
            values.push(nums[1]);
        }
        Self::new(times, values).map_err(|e| Error::parse(source_name, 1, 1, e.to_string()))
    }
}

/// The control gain `c(t)`, used as `K(t) = c(t) I_n`.
#[derive(Clone, Debug, PartialEq)]
pub enum GainFunction {
    /// `c(t) = k`.
    Constant {
        k: f64,
    },
    /// `c(t) = a (1 + t)^(-beta)`.
    PowerLaw {
        a: f64,
        beta: f64,
    },
    /// `c(t) = 1 / log(s + t)`.
    LogInverse {
        s: f64,
    },
    Tabulated(GainTable),
}

impl GainFunction {
    pub fn constant(k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidGain(format!("constant gain must be positive, got {k}")));
        }
        Ok(Self::Constant { k })
    }

    pub fn power_law(a: f64, beta: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidGain(format!("power-law scale must be positive, got {a}")));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidGain(format!(
                "power-law exponent must be nonnegative, got {beta}"
            )));
        }
        Ok(Self::PowerLaw { a, beta })
    }

    pub fn log_inverse(s: f64) -> Result<Self> {
        if !(s > 1.0 && s.is_finite()) {
            return Err(Error::InvalidGain(format!("log-inverse offset must exceed 1, got {s}")));
        }
        Ok(Self::LogInverse { s })
    }

    /// `c(t)`; tabulated gains fail outside their grid.
    pub fn eval(&self, t: f64) -> Result<f64> {
        Ok(match self {
            Self::Constant { k } => *k,
            Self::PowerLaw { a, beta } => a * (1.0 + t).powf(-beta),
            Self::LogInverse { s } => 1.0 / (s + t).ln(),
            Self::Tabulated(tab) => {
                tab.check_range(t)?;
                tab.eval_unchecked(t)
            }
        })
    }

    /// Nonincreasing families, for which `tail_sup(t0) = c(t0)`.
    pub fn is_monotone_nonincreasing(&self) -> bool {
        match self {
            Self::Tabulated(tab) => tab.values.windows(2).all(|w| w[1] <= w[0]),
            _ => true,
        }
    }

    /// `int_a^b c(u) du`.
    pub fn integral(&self, a: f64, b: f64) -> Result<f64> {
        if b < a {
            return Ok(-self.integral(b, a)?);
        }
        Ok(match self {
            Self::Constant { k } => k * (b - a),
            Self::PowerLaw { a: scale, beta } => {
                if (*beta - 1.0).abs() < 1e-15 {
                    scale * ((1.0 + b) / (1.0 + a)).ln()
                } else {
                    let p = 1.0 - beta;
                    scale * ((1.0 + b).powf(p) - (1.0 + a).powf(p)) / p
                }
            }
            Self::LogInverse { s } => {
                let tol = 1e-12 * (b - a).max(1.0);
                integrate(|u| 1.0 / (s + u).ln(), a, b, tol)
            }
            Self::Tabulated(tab) => {
                tab.check_range(a)?;
                tab.check_range(b)?;
                tab.primitive(b) - tab.primitive(a)
            }
        })
    }

    /// `int_a^b c(u)^2 du`.
    pub fn integral_sq(&self, a: f64, b: f64) -> Result<f64> {
        if b < a {
            return Ok(-self.integral_sq(b, a)?);
        }
        Ok(match self {
            Self::Constant { k } => k * k * (b - a),
            Self::PowerLaw { a: scale, beta } => {
                let p = 1.0 - 2.0 * beta;
                if p.abs() < 1e-15 {
                    scale * scale * ((1.0 + b) / (1.0 + a)).ln()
                } else {
                    scale * scale * ((1.0 + b).powf(p) - (1.0 + a).powf(p)) / p
                }
            }
            Self::LogInverse { s } => {
                let tol = 1e-12 * (b - a).max(1.0);
                integrate(|u| (s + u).ln().powi(-2), a, b, tol)
            }
            Self::Tabulated(tab) => {
                tab.check_range(a)?;
                tab.check_range(b)?;
                tab.primitive_sq(b) - tab.primitive_sq(a)
            }
        })
    }

    /// `c_bar_{t0} = sup_{t >= t0} c(t)`.
    pub fn tail_sup(&self, t0: f64) -> Result<f64> {
        match self {
            Self::Tabulated(tab) => {
                tab.check_range(t0)?;
                let first = tab.eval_unchecked(t0);
                Ok(tab
                    .times
                    .iter()
                    .zip(&tab.values)
                    .filter(|(t, _)| **t >= t0)
                    .map(|(_, v)| *v)
                    .fold(first, f64::max))
            }
            _ => self.eval(t0),
        }
    }

    /// Samples `c` at `t = m * dt` for `m = 0..steps`.
    pub fn sample_grid(&self, dt: f64, steps: usize) -> Result<Vec<f64>> {
        (0..steps).map(|m| self.eval(m as f64 * dt)).collect()
    }
}

impl fmt::Display for GainFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant { k } => write!(f, "const:k={k}"),
            Self::PowerLaw { a, beta } => write!(f, "power:a={a},beta={beta}"),
            Self::LogInverse { s } => write!(f, "loginv:s={s}"),
            Self::Tabulated(tab) => write!(f, "table:<{} samples>", tab.times.len()),
        }
    }
}

/// Parsed gain specification string; table paths are resolved by [`GainSpec::load`].
#[derive(Clone, Debug, PartialEq)]
pub enum GainSpec {
    Constant { k: f64 },
    PowerLaw { a: f64, beta: f64 },
    LogInverse { s: f64 },
    Table(PathBuf),
}

impl GainSpec {
    /// Parses `power:a=1,beta=1`, `loginv:s=4`, `const:k=0.12` or `table:<path>`.
    pub fn parse(spec: &str) -> Result<Self> {
        let src = "gain";
        let (kind, rest) = spec
            .split_once(':')
            .ok_or_else(|| Error::parse(src, 1, 1, "expected '<kind>:<params>'"))?;
        let offset = kind.len() + 2;
        match kind.trim() {
            "table" => {
                let path = rest.trim();
                if path.is_empty() {
                    return Err(Error::parse(src, 1, offset, "missing table path"));
                }
                Ok(Self::Table(PathBuf::from(path)))
            }
            "const" => {
                let params = parse_params(rest, offset, src, &["k"])?;
                let k = require(&params, "k", offset, src)?;
                GainFunction::constant(k).map_err(|e| Error::parse(src, 1, offset, e.to_string()))?;
                Ok(Self::Constant { k })
            }
            "power" => {
                let params = parse_params(rest, offset, src, &["a", "beta"])?;
                let a = lookup(&params, "a").unwrap_or(1.0);
                let beta = require(&params, "beta", offset, src)?;
                GainFunction::power_law(a, beta).map_err(|e| Error::parse(src, 1, offset, e.to_string()))?;
                Ok(Self::PowerLaw { a, beta })
            }
            "loginv" => {
                let params = parse_params(rest, offset, src, &["s"])?;
                let s = require(&params, "s", offset, src)?;
                GainFunction::log_inverse(s).map_err(|e| Error::parse(src, 1, offset, e.to_string()))?;
                Ok(Self::LogInverse { s })
            }
            other => Err(Error::parse(
                src,
                1,
                1,
                format!("unknown gain kind '{other}' (expected power, loginv, const or table)"),
            )),
        }
    }

    /// Builds the gain, reading table files relative to `base_dir`.
    pub fn load(&self, base_dir: &Path) -> Result<GainFunction> {
        match self {
            Self::Constant { k } => GainFunction::constant(*k),
            Self::PowerLaw { a, beta } => GainFunction::power_law(*a, *beta),
            Self::LogInverse { s } => GainFunction::log_inverse(*s),
            Self::Table(path) => {
                let full = base_dir.join(path);
                let text = std::fs::read_to_string(&full).map_err(|e| Error::io(&full, e))?;
                Ok(GainFunction::Tabulated(GainTable::parse(
                    &text,
                    &full.display().to_string(),
                )?))
            }
        }
    }
}

/// Parses decimals and simple fractions such as `1/3`.
pub fn parse_number(tok: &str) -> Option<f64> {
    let tok = tok.trim();
    let value = match tok.split_once('/') {
        Some((num, den)) => {
            let n: f64 = num.trim().parse().ok()?;
            let d: f64 = den.trim().parse().ok()?;
            if d == 0.0 {
                return None;
            }
            n / d
        }
        None => tok.parse().ok()?,
    };
    value.is_finite().then_some(value)
}

/// Parses `key=value` pairs separated by commas; `offset` is the 1-based
/// column where `text` starts, used in error positions.
pub(crate) fn parse_params(text: &str, offset: usize, src: &str, allowed: &[&str]) -> Result<Vec<(String, f64)>> {
    let mut out: Vec<(String, f64)> = Vec::new();
    let mut col = offset;
    for part in text.split(',') {
        let here = col;
        col += part.len() + 1;
        if part.trim().is_empty() {
            return Err(Error::parse(src, 1, here, "empty parameter"));
        }
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| Error::parse(src, 1, here, format!("expected key=value, found '{part}'")))?;
        let key = key.trim();
        if !allowed.contains(&key) {
            return Err(Error::parse(
                src,
                1,
                here,
                format!("unknown parameter '{key}' (allowed: {})", allowed.join(", ")),
            ));
        }
        if out.iter().any(|(k, _)| k == key) {
            return Err(Error::parse(src, 1, here, format!("duplicate parameter '{key}'")));
        }
        let v = parse_number(value).ok_or_else(|| {
            Error::parse(
                src,
                1,
                here + key.len() + 1,
                format!("invalid number '{}'", value.trim()),
            )
        })?;
        out.push((key.to_string(), v));
    }
    Ok(out)
}

pub(crate) fn lookup(params: &[(String, f64)], key: &str) -> Option<f64> {
    params.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
}

pub(crate) fn require(params: &[(String, f64)], key: &str, col: usize, src: &str) -> Result<f64> {
    lookup(params, key).ok_or_else(|| Error::parse(src, 1, col, format!("missing parameter '{key}'")))
}

/// Three-valued verdict for an asymptotic condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

impl Verdict {
    fn from_bool(b: bool) -> Self {
        if b {
            Self::Holds
        } else {
            Self::Fails
        }
    }

    pub fn holds(self) -> bool {
        self == Self::Holds
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Holds => "Holds",
            Self::Fails => "Fails",
            Self::Inconclusive => "Inconclusive",
        })
    }
}

/// Decay rates used by C4 (`rho_0`) and C4' (`2 * lambda_bar`).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ConditionRates {
    pub c4: Option<f64>,
    pub c4prime: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ConditionReport {
    pub c1: Verdict,
    pub c2: Verdict,
    pub c3: Verdict,
    /// `None` when no rate was supplied.
    pub c4: Option<Verdict>,
    pub c4prime: Option<Verdict>,
    pub c5: Verdict,
    pub c5prime: Verdict,
    /// `lim c(t) log int_0^t c` when known in closed form.
    pub c5_limit: Option<f64>,
    gain: GainFunction,
}

impl ConditionReport {
    pub fn tail_sup(&self, t0: f64) -> Result<f64> {
        self.gain.tail_sup(t0)
    }
}

/// Decides C1..C5' for `c`.
pub fn check_conditions(c: &GainFunction, rates: ConditionRates) -> ConditionReport {
    match c {
        GainFunction::Tabulated(tab) => check_tabulated(c, tab, rates),
        _ => check_parametric(c, rates),
    }
}

fn check_parametric(c: &GainFunction, rates: ConditionRates) -> ConditionReport {
    // (C1, C2, C3, C5 limit)
    let (c1, c2, c3, c5_limit) = match *c {
        GainFunction::Constant { .. } => (true, false, false, f64::INFINITY),
        GainFunction::PowerLaw { beta, .. } => {
            let limit = if beta > 0.0 { 0.0 } else { f64::INFINITY };
            (beta <= 1.0, beta > 0.5, beta > 0.0, limit)
        }
        GainFunction::LogInverse { .. } => (true, false, true, 1.0),
        GainFunction::Tabulated(_) => unreachable!("handled numerically"),
    };
    // Every parametric family is nonincreasing, so for any positive rate the
    // C4-type integral vanishes exactly when the gain integral diverges and
    // the gain itself vanishes.
    let c4_rule = |rate: Option<f64>| rate.map(|r| Verdict::from_bool(r > 0.0 && c1 && c3));
    let c5 = Verdict::from_bool(c5_limit == 0.0);
    ConditionReport {
        c1: Verdict::from_bool(c1),
        c2: Verdict::from_bool(c2),
        c3: Verdict::from_bool(c3),
        c4: c4_rule(rates.c4),
        c4prime: c4_rule(rates.c4prime),
        c5,
        c5prime: c5,
        c5_limit: Some(c5_limit),
        gain: c.clone(),
    }
}

enum Growth {
    Diverges,
    Converges,
    Unclear,
}

/// Growth of `S(t) = int_0^t f` judged from increments over doubling windows
/// of the tail. Increments shrinking geometrically mean a finite limit.
fn tail_growth(s: impl Fn(f64) -> f64, start: f64, end: f64) -> Growth {
    let at = |frac: f64| start + frac * (end - start);
    let d1 = s(at(0.25)) - s(at(0.125));
    let d2 = s(at(0.5)) - s(at(0.25));
    let d3 = s(at(1.0)) - s(at(0.5));
    if d3 == 0.0 && d2 == 0.0 {
        return Growth::Converges;
    }
    if d1 <= 0.0 || d2 <= 0.0 {
        return Growth::Unclear;
    }
    let r1 = d2 / d1;
    let r2 = d3 / d2;
    if (r2 - r1).abs() > TAIL_CONSISTENCY * r1.max(r2) {
        return Growth::Unclear;
    }
    if r2 >= 1.0 + TAIL_CONSISTENCY {
        Growth::Diverges
    } else if r2 <= 1.0 - TAIL_CONSISTENCY {
        Growth::Converges
    } else {
        Growth::Unclear
    }
}

/// Ratio of successive tail quantities over doubling windows, when consistent.
fn tail_ratio(values: [f64; 3]) -> Option<f64> {
    let [v1, v2, v3] = values;
    if v1 <= 0.0 || v2 <= 0.0 {
        return None;
    }
    let q1 = v2 / v1;
    let q2 = v3 / v2;
    ((q2 - q1).abs() <= TAIL_CONSISTENCY * q1.max(q2)).then_some(q2)
}

fn check_tabulated(c: &GainFunction, tab: &GainTable, rates: ConditionRates) -> ConditionReport {
    let (start, end) = (tab.start(), tab.end());
    let at = |frac: f64| start + frac * (end - start);

    let c1 = match tail_growth(|t| tab.primitive(t), start, end) {
        Growth::Diverges => Verdict::Holds,
        Growth::Converges => Verdict::Fails,
        Growth::Unclear => Verdict::Inconclusive,
    };
    let c2 = match tail_growth(|t| tab.primitive_sq(t), start, end) {
        Growth::Diverges => Verdict::Fails,
        Growth::Converges => Verdict::Holds,
        Growth::Unclear => Verdict::Inconclusive,
    };

    let window_max = |a: f64, b: f64| {
        let mut m = tab.eval_unchecked(a).max(tab.eval_unchecked(b));
        for (t, v) in tab.times.iter().zip(&tab.values) {
            if *t >= a && *t <= b {
                m = m.max(*v);
            }
        }
        m
    };
    let w = [
        window_max(at(0.125), at(0.25)),
        window_max(at(0.25), at(0.5)),
        window_max(at(0.5), at(1.0)),
    ];
    let c3 = if w[2] == 0.0 {
        Verdict::Holds
    } else {
        match tail_ratio(w) {
            Some(q) if q <= 1.0 - TAIL_CONSISTENCY => Verdict::Holds,
            Some(q) if (q - 1.0).abs() <= 1e-9 => Verdict::Fails,
            _ => Verdict::Inconclusive,
        }
    };

    let g = |t: f64| {
        let s = tab.primitive(t);
        if s > 0.0 {
            Some((tab.eval_unchecked(t) * s.ln()).abs())
        } else {
            None
        }
    };
    let c5 = match (g(at(0.25)), g(at(0.5)), g(at(1.0))) {
        (Some(g1), Some(g2), Some(g3)) => {
            if g3 < 1e-12 {
                Verdict::Holds
            } else {
                match tail_ratio([g1, g2, g3]) {
                    Some(p) if p <= 1.0 - TAIL_CONSISTENCY => Verdict::Holds,
                    Some(p) if p >= 1.0 && g3 > TAIL_CONSISTENCY => Verdict::Fails,
                    _ => Verdict::Inconclusive,
                }
            }
        }
        _ => Verdict::Inconclusive,
    };

    let c4_rule = |rate: Option<f64>| rate.map(|r| c4_numeric(tab, r));
    ConditionReport {
        c1,
        c2,
        c3,
        c4: c4_rule(rates.c4),
        c4prime: c4_rule(rates.c4prime),
        c5,
        // A finite grid cannot separate lim from liminf.
        c5prime: c5,
        c5_limit: None,
        gain: c.clone(),
    }
}

/// Finite-horizon rule for C4-type conditions on a tabulated gain: evaluate
/// `I(t) = int_0^t exp(-rate int_s^t c) c^2(s) ds` at `t = 1e2, 1e3, 1e4`.
/// Holds if strictly decreasing and the last value is below `1e-3`; Fails if
/// the last value does not decrease; Inconclusive otherwise or when the grid
/// does not reach `1e4`.
fn c4_numeric(tab: &GainTable, rate: f64) -> Verdict {
    if !(rate > 0.0) || tab.start() > 0.0 || tab.end() < C4_HORIZONS[2] {
        return Verdict::Inconclusive;
    }
    let values = c4_integrals(tab, rate, &C4_HORIZONS);
    let [v1, v2, v3] = [values[0], values[1], values[2]];
    if v3 >= v2 {
        Verdict::Fails
    } else if v2 < v1 && v3 < C4_THRESHOLD {
        Verdict::Holds
    } else {
        Verdict::Inconclusive
    }
}

/// `I(t)` at each requested horizon via the recursion
/// `I(b) = exp(-rate int_a^b c) I(a) + int_a^b exp(-rate int_s^b c) c^2(s) ds`
/// applied segment by segment.
pub(crate) fn c4_integrals(tab: &GainTable, rate: f64, horizons: &[f64]) -> Vec<f64> {
    let mut knots: Vec<f64> = tab
        .times
        .iter()
        .copied()
        .filter(|t| *t <= horizons[horizons.len() - 1])
        .collect();
    knots.extend_from_slice(horizons);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let mut out = Vec::with_capacity(horizons.len());
    let mut acc = 0.0;
    let mut next = 0;
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let fb = tab.primitive(b);
        let decay = (-rate * (fb - tab.primitive(a))).exp();
        let tol = 1e-14 * (b - a).max(1e-3);
        let seg = integrate(
            |s| {
                let c = tab.eval_unchecked(s);
                (-rate * (fb - tab.primitive(s))).exp() * c * c
            },
            a,
            b,
            tol,
        );
        acc = decay * acc + seg;
        while next < horizons.len() && horizons[next] <= b {
            out.push(acc);
            next += 1;
        }
    }
    out
}
