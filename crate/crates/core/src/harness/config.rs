//! Experiment configuration: a flat `key = value` text format with `#`
//! comments. Unknown keys are errors, and validation reports every problem
//! in one pass so a config can be fixed in a single edit.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::bandit::TsScaleMode;
use crate::env::{ContextMode, Instance, NormStyle, SBound, ThetaNorm};
use crate::harness::HarnessError;
use crate::tol;

/// Which policy plays the rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Slot-decomposed optimism: per-slot score plus design-metric bonus.
    SlateGlmOfu,
    /// Slot-decomposed posterior perturbation.
    SlateGlmTs,
    /// Two-phase sampler for fixed item sets: forced exploration, then
    /// perturbation against the warm-up metric.
    SlateGlmTsFixed,
    /// Enumerating optimism baseline scored at the full-slate level.
    BaselineOfu,
    /// Enumerating perturbation baseline at the full-slate level.
    BaselineTs,
    /// Uniform random choice per slot; never learns.
    Random,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::SlateGlmOfu,
        Algorithm::SlateGlmTs,
        Algorithm::SlateGlmTsFixed,
        Algorithm::BaselineOfu,
        Algorithm::BaselineTs,
        Algorithm::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::SlateGlmOfu => "slate-glm-ofu",
            Algorithm::SlateGlmTs => "slate-glm-ts",
            Algorithm::SlateGlmTsFixed => "slate-glm-ts-fixed",
            Algorithm::BaselineOfu => "baseline-ofu",
            Algorithm::BaselineTs => "baseline-ts",
            Algorithm::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Option<Algorithm> {
        Algorithm::ALL.into_iter().find(|a| a.as_str() == s)
    }

    /// Scores whole enumerated slates rather than decomposing per slot.
    pub fn is_baseline(self) -> bool {
        matches!(self, Algorithm::BaselineOfu | Algorithm::BaselineTs)
    }

    /// Maintains learner state (everything except the random policy).
    pub fn learns(self) -> bool {
        self != Algorithm::Random
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Forced warm-up length for the fixed-set sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TauSetting {
    /// `ceil(5 * N * d * ln(horizon))`, clamped below the horizon.
    Auto,
    Fixed(u64),
}

impl TauSetting {
    pub fn resolve(self, slots: usize, dim: usize, horizon: u64) -> u64 {
        match self {
            TauSetting::Fixed(t) => t,
            TauSetting::Auto => {
                let raw = 5.0 * (slots * dim) as f64 * (horizon as f64).ln();
                raw.ceil().max(0.0) as u64
            }
        }
    }
}

/// Fully parsed and validated experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub slots: usize,
    pub dim: usize,
    pub items_per_slot: usize,
    pub mode: ContextMode,
    pub norm_style: NormStyle,
    pub theta_norm: ThetaNorm,
    pub s_bound: SBound,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub instance_seed: u64,
    pub delta: f64,
    pub c_eta: f64,
    pub c_gamma: f64,
    pub c_beta: f64,
    pub ts_scale: TsScaleMode,
    pub solver_max_iter: usize,
    pub refresh_every: u32,
    pub rejection_cap: u64,
    pub tau: TauSetting,
    pub lambda_reg: f64,
    /// Sample per-slot design-matrix minimum eigenvalues every this many
    /// rounds; 0 disables sampling.
    pub eig_every: u64,
    /// Evaluate the block-diagonal-vs-full design sandwich every this many
    /// rounds; 0 disables it.
    pub sandwich_every: u64,
    /// When false (the default), pull/update times are written as 0 so that
    /// output files are byte-identical across machines and re-runs.
    pub record_timing: bool,
    pub bench_discard_first: u64,
    pub bench_exclude_warmup: bool,
    pub bench_algorithms: Vec<Algorithm>,
    pub enumeration_cap: u64,
    pub out_dir: PathBuf,
    /// Raw config text, hashed for the run-directory name and copied into
    /// the run directory for provenance.
    pub raw_text: String,
}

impl ExperimentConfig {
    /// Parse and validate; returns every problem found, not just the first.
    pub fn from_str(text: &str) -> Result<ExperimentConfig, Vec<String>> {
        parse_config(text)
    }

    pub fn from_file(path: &Path) -> Result<ExperimentConfig, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
        parse_config(&text).map_err(HarnessError::Config)
    }

    /// The instance geometry this config describes, optionally with a slot
    /// count override (used by the benchmark's slot sweep).
    pub fn instance_with_slots(&self, slots: usize) -> Instance {
        Instance {
            slots,
            dim: self.dim,
            items_per_slot: self.items_per_slot,
            mode: self.mode,
            norm_style: self.norm_style,
            theta_norm: self.theta_norm,
            s_bound: self.s_bound,
            seed: self.instance_seed,
        }
    }

    pub fn instance(&self) -> Instance {
        self.instance_with_slots(self.slots)
    }

    /// First eight hex characters of the SHA-256 of the raw config text,
    /// used to name run directories.
    pub fn hash8(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.raw_text.as_bytes());
        let mut s = String::with_capacity(8);
        for byte in digest.iter().take(4) {
            s.push_str(&format!("{byte:02x}"));
        }
        s
    }
}

/// Total number of slates an enumerating baseline must score per round.
pub fn slate_count(items_per_slot: usize, slots: usize) -> u128 {
    let mut count: u128 = 1;
    for _ in 0..slots {
        count = count.saturating_mul(items_per_slot as u128);
    }
    count
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

struct Fields {
    map: HashMap<String, (usize, String)>,
    errors: Vec<String>,
}

impl Fields {
    fn raw(&mut self, key: &str) -> Option<String> {
        self.map.remove(key).map(|(_, v)| v)
    }

    fn err(&mut self, key: &str, why: impl std::fmt::Display) {
        self.errors.push(format!("{key}: {why}"));
    }

    fn parse_with<T>(
        &mut self,
        key: &str,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Option<T> {
        let raw = self.raw(key)?;
        match parse(&raw) {
            Ok(v) => Some(v),
            Err(why) => {
                self.err(key, format!("{why} (got `{raw}`)"));
                None
            }
        }
    }

    fn required<T>(
        &mut self,
        key: &str,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Option<T> {
        if !self.map.contains_key(key) {
            self.err(key, "required key is missing");
            return None;
        }
        self.parse_with(key, parse)
    }

    fn optional<T>(
        &mut self,
        key: &str,
        default: T,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> T {
        if !self.map.contains_key(key) {
            return default;
        }
        self.parse_with(key, parse).unwrap_or(default)
    }
}

fn parse_u64_min(min: u64) -> impl Fn(&str) -> Result<u64, String> {
    move |s| {
        let v: u64 = s.parse().map_err(|_| "expected an unsigned integer".to_string())?;
        if v < min {
            return Err(format!("must be at least {min}"));
        }
        Ok(v)
    }
}

fn parse_usize_min(min: usize) -> impl Fn(&str) -> Result<usize, String> {
    move |s| {
        let v: usize = s.parse().map_err(|_| "expected an unsigned integer".to_string())?;
        if v < min {
            return Err(format!("must be at least {min}"));
        }
        Ok(v)
    }
}

fn parse_pos_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| "expected a number".to_string())?;
    if !(v > 0.0) || !v.is_finite() {
        return Err("must be positive and finite".to_string());
    }
    Ok(v)
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err("expected `true` or `false`".to_string()),
    }
}

fn parse_seed_list(s: &str) -> Result<Vec<u64>, String> {
    let mut seeds = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        if part.is_empty() {
            return Err("empty entry in comma-separated list".to_string());
        }
        let v: u64 = part.parse().map_err(|_| format!("`{part}` is not an unsigned integer"))?;
        seeds.push(v);
    }
    if seeds.is_empty() {
        return Err("must list at least one seed".to_string());
    }
    let mut sorted = seeds.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != seeds.len() {
        return Err("seeds must be distinct".to_string());
    }
    Ok(seeds)
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    Algorithm::parse(s).ok_or_else(|| {
        let names: Vec<&str> = Algorithm::ALL.iter().map(|a| a.as_str()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

fn parse_algorithm_list(s: &str) -> Result<Vec<Algorithm>, String> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        if part.is_empty() {
            return Err("empty entry in comma-separated list".to_string());
        }
        out.push(parse_algorithm(part)?);
    }
    if out.is_empty() {
        return Err("must list at least one algorithm".to_string());
    }
    Ok(out)
}

fn parse_config(text: &str) -> Result<ExperimentConfig, Vec<String>> {
    let mut map: HashMap<String, (usize, String)> = HashMap::new();
    let mut errors: Vec<String> = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(format!("line {lineno}: expected `key = value`, got `{line}`"));
            continue;
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if let Some((first_line, _)) = map.get(&key) {
            errors.push(format!(
                "line {lineno}: duplicate key `{key}` (first set on line {first_line})"
            ));
            continue;
        }
        map.insert(key, (lineno, value));
    }

    let mut f = Fields { map, errors };

    let algorithm = f.required("algorithm", parse_algorithm);
    let slots = f.required("slots", parse_usize_min(1));
    let dim = f.required("dim", parse_usize_min(1));
    let items_per_slot = f.required("items_per_slot", parse_usize_min(1));
    let horizon = f.required("horizon", parse_u64_min(1));
    let seeds = f.required("seeds", parse_seed_list);

    let mode_word = f.required("mode", |s| match s {
        "fixed" | "finite" | "infinite" => Ok(s.to_string()),
        _ => Err("expected `fixed`, `finite`, or `infinite`".to_string()),
    });
    let contexts = f.parse_with("contexts", |s| {
        let v: u32 = s.parse().map_err(|_| "expected an unsigned integer".to_string())?;
        if v == 0 {
            return Err("must be at least 1".to_string());
        }
        Ok(v)
    });
    let mode = match (mode_word.as_deref(), contexts) {
        (Some("fixed"), None) => Some(ContextMode::Fixed),
        (Some("infinite"), None) => Some(ContextMode::Infinite),
        (Some("finite"), Some(c)) => Some(ContextMode::Finite(c)),
        (Some("finite"), None) => {
            f.err("contexts", "required when mode = finite");
            None
        }
        (Some(_), Some(_)) => {
            f.err("contexts", "only valid when mode = finite");
            None
        }
        (Some(_), None) => unreachable!("mode parser admits only fixed/finite/infinite"),
        (None, _) => None,
    };

    let norm_style = f.optional("norm_style", NormStyle::BallUniform, |s| match s {
        "ball" => Ok(NormStyle::BallUniform),
        "box" => Ok(NormStyle::BoxNormalized),
        _ => Err("expected `ball` or `box`".to_string()),
    });
    let theta_norm = f.optional("theta_norm", ThetaNorm::Raw, |s| match s {
        "raw" => Ok(ThetaNorm::Raw),
        "normalized" => Ok(ThetaNorm::Normalized),
        _ => Err("expected `raw` or `normalized`".to_string()),
    });
    let s_bound = f.optional("s_bound", SBound::Exact, |s| {
        if s == "exact" {
            Ok(SBound::Exact)
        } else {
            parse_pos_f64(s).map(SBound::Fixed).map_err(|e| format!("expected `exact` or a positive number: {e}"))
        }
    });

    let instance_seed = f.optional("instance_seed", 0, parse_u64_min(0));
    let delta = f.optional("delta", 0.05, |s| {
        let v: f64 = s.parse().map_err(|_| "expected a number".to_string())?;
        if !(v > 0.0 && v < 1.0) {
            return Err("must lie strictly between 0 and 1".to_string());
        }
        Ok(v)
    });
    let c_eta = f.optional("c_eta", 1.0, parse_pos_f64);
    let c_gamma = f.optional("c_gamma", 1.0, parse_pos_f64);
    let c_beta = f.optional("c_beta", 1.0, parse_pos_f64);
    let ts_scale = f.optional("ts_scale", TsScaleMode::SqrtEta, |s| match s {
        "sqrt" => Ok(TsScaleMode::SqrtEta),
        "raw" => Ok(TsScaleMode::RawEta),
        _ => Err("expected `sqrt` or `raw`".to_string()),
    });
    let solver_max_iter =
        f.optional("solver_max_iter", tol::SOLVER_MAX_ITER, parse_usize_min(1));
    let refresh_every = f.optional("refresh_every", tol::DEFAULT_REFRESH_EVERY, |s| {
        let v: u32 = s.parse().map_err(|_| "expected an unsigned integer".to_string())?;
        if v == 0 {
            return Err("must be at least 1".to_string());
        }
        Ok(v)
    });
    let rejection_cap = f.optional("rejection_cap", tol::REJECTION_CAP as u64, parse_u64_min(1));
    let tau = f.optional("tau", TauSetting::Auto, |s| {
        if s == "auto" {
            Ok(TauSetting::Auto)
        } else {
            s.parse::<u64>()
                .map(TauSetting::Fixed)
                .map_err(|_| "expected `auto` or an unsigned integer".to_string())
        }
    });
    let lambda_reg = f.optional("lambda_reg", 1.0, parse_pos_f64);
    let eig_every = f.optional("eig_every", 0, parse_u64_min(0));
    let sandwich_every = f.optional("sandwich_every", 0, parse_u64_min(0));
    let record_timing = f.optional("record_timing", false, parse_bool);
    let bench_discard_first = f.optional("bench_discard_first", 10, parse_u64_min(0));
    let bench_exclude_warmup = f.optional("bench_exclude_warmup", false, parse_bool);
    let bench_algorithms = f.optional(
        "bench_algorithms",
        vec![Algorithm::SlateGlmOfu, Algorithm::BaselineOfu],
        parse_algorithm_list,
    );
    let enumeration_cap = f.optional("enumeration_cap", 200_000, parse_u64_min(1));
    let out_dir = f.optional("out_dir", PathBuf::from("runs"), |s| {
        if s.is_empty() {
            Err("must not be empty".to_string())
        } else {
            Ok(PathBuf::from(s))
        }
    });

    // Unknown keys, in file order for stable messages.
    let mut leftovers: Vec<(usize, String)> =
        f.map.drain().map(|(k, (line, _))| (line, k)).collect();
    leftovers.sort_unstable();
    for (line, key) in leftovers {
        f.errors.push(format!("line {line}: unknown key `{key}`"));
    }

    // Cross-field validation, only where the pieces parsed.
    if let (Some(algo), Some(k), Some(n)) = (algorithm, items_per_slot, slots) {
        if algo.is_baseline() {
            let count = slate_count(k, n);
            if count > enumeration_cap as u128 {
                f.errors.push(format!(
                    "algorithm: {algo} must enumerate {count} slates per round, above \
                     enumeration_cap = {enumeration_cap}"
                ));
            }
        }
    }
    if algorithm == Some(Algorithm::SlateGlmTsFixed) && mode.is_some() && mode != Some(ContextMode::Fixed) {
        f.errors.push(
            "mode: slate-glm-ts-fixed explores a fixed item set and requires mode = fixed"
                .to_string(),
        );
    }
    if bench_algorithms.contains(&Algorithm::SlateGlmTsFixed)
        && mode.is_some()
        && mode != Some(ContextMode::Fixed)
    {
        f.errors.push(
            "bench_algorithms: slate-glm-ts-fixed requires mode = fixed".to_string(),
        );
    }
    if algorithm == Some(Algorithm::SlateGlmTsFixed) {
        if let (Some(n), Some(d), Some(t)) = (slots, dim, horizon) {
            let resolved = tau.resolve(n, d, t);
            if resolved >= t {
                f.errors.push(format!(
                    "tau: forced warm-up of {resolved} rounds leaves no sampling rounds \
                     within horizon = {t}"
                ));
            }
        }
    }

    if !f.errors.is_empty() {
        return Err(f.errors);
    }

    Ok(ExperimentConfig {
        algorithm: algorithm.unwrap(),
        slots: slots.unwrap(),
        dim: dim.unwrap(),
        items_per_slot: items_per_slot.unwrap(),
        mode: mode.unwrap(),
        norm_style,
        theta_norm,
        s_bound,
        horizon: horizon.unwrap(),
        seeds: seeds.unwrap(),
        instance_seed,
        delta,
        c_eta,
        c_gamma,
        c_beta,
        ts_scale,
        solver_max_iter,
        refresh_every,
        rejection_cap,
        tau,
        lambda_reg,
        eig_every,
        sandwich_every,
        record_timing,
        bench_discard_first,
        bench_exclude_warmup,
        bench_algorithms,
        enumeration_cap,
        out_dir,
        raw_text: text.to_string(),
    })
}
