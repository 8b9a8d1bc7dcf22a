//! Trial data model, on-disk formats, and a synthetic EEG generator.
//!
//! A trial file is headerless CSV with one time sample per row (`T` rows of
//! `n_c` values). A dataset is a manifest CSV with header
//! `trial_id,subject,session,label,path` whose `path` entries are resolved
//! relative to the manifest's directory. Comment lines start with `#`; the
//! writer emits one carrying the sample rate (`# sample_rate_hz = 250`) and
//! the reader picks it up, defaulting to 250 Hz when absent.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

pub const MANIFEST_HEADER: &str = "trial_id,subject,session,label,path";
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 250.0;

#[derive(Debug, Error)]
pub enum TrialIoError {
    #[error("missing file: {path}")]
    MissingFile { path: PathBuf },
    #[error("{file}:{line}: expected {expected} columns, found {found}")]
    MalformedRow {
        file: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("{file}:{line}: unparseable value: {detail}")]
    MalformedValue {
        file: PathBuf,
        line: usize,
        detail: String,
    },
    #[error("{file}:{line}: non-finite sample")]
    NonFiniteSample { file: PathBuf, line: usize },
    #[error("{file}:{line}: trial has {found} channels, set has {expected}")]
    InconsistentChannelCount {
        file: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("{file}: manifest header must be `{MANIFEST_HEADER}`, found `{found}`")]
    BadHeader { file: PathBuf, found: String },
    #[error("trial set is empty")]
    EmptySet,
    #[error("duplicate trial_id `{0}`")]
    DuplicateId(String),
    #[error("trials disagree on sample rate: {0} Hz vs {1} Hz")]
    InconsistentSampleRate(f64, f64),
    #[error("invalid synthesis spec: {0}")]
    InvalidSpec(String),
    #[error("io error on {path}: {source}")]
    IoError {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TrialIoError + '_ {
    move |source| TrialIoError::IoError {
        path: path.to_path_buf(),
        source,
    }
}

/// Motor-imagery class of a labeled trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassLabel {
    Left,
    Right,
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassLabel::Left => write!(f, "left"),
            ClassLabel::Right => write!(f, "right"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Session {
    Train,
    Test,
}

impl fmt::Display for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Session::Train => write!(f, "train"),
            Session::Test => write!(f, "test"),
        }
    }
}

/// One epoch of multichannel EEG: an `n_c x T` matrix plus metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    /// Channel-major samples, `data[[channel, time]]`, in microvolts.
    pub data: Array2<f64>,
    pub sample_rate_hz: f64,
    pub label: Option<ClassLabel>,
    pub subject_id: String,
    pub trial_id: String,
    pub session: Session,
}

impl Trial {
    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }

    /// Same metadata, new sample matrix.
    pub fn with_data(&self, data: Array2<f64>) -> Trial {
        Trial {
            data,
            ..self.clone()
        }
    }
}

/// An ordered, validated collection of trials sharing channel count and rate.
///
/// Trials normally share their length `T` as well; only pruning produces sets
/// whose trials are shorter than the recorded epoch, and those still share
/// one common width.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSet {
    trials: Vec<Trial>,
    n_c: usize,
    sample_rate_hz: f64,
}

impl TrialSet {
    pub fn new(trials: Vec<Trial>) -> Result<TrialSet, TrialIoError> {
        let first = trials.first().ok_or(TrialIoError::EmptySet)?;
        let n_c = first.n_channels();
        let rate = first.sample_rate_hz;
        let mut seen = std::collections::HashSet::new();
        for t in &trials {
            if t.n_channels() != n_c {
                return Err(TrialIoError::InconsistentChannelCount {
                    file: PathBuf::from(t.trial_id.clone()),
                    line: 0,
                    expected: n_c,
                    found: t.n_channels(),
                });
            }
            if t.sample_rate_hz != rate {
                return Err(TrialIoError::InconsistentSampleRate(rate, t.sample_rate_hz));
            }
            if !seen.insert(t.trial_id.clone()) {
                return Err(TrialIoError::DuplicateId(t.trial_id.clone()));
            }
        }
        Ok(TrialSet {
            trials,
            n_c,
            sample_rate_hz: rate,
        })
    }

    pub fn trials(&self) -> &[Trial] {
        &self.trials
    }

    pub fn n_channels(&self) -> usize {
        self.n_c
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    /// Applies `f` to every trial, keeping order; fails on the first error.
    pub fn try_map<E>(&self, f: impl Fn(&Trial) -> Result<Trial, E>) -> Result<TrialSet, E>
    where
        E: From<TrialIoError>,
    {
        let trials = self
            .trials
            .iter()
            .map(&f)
            .collect::<Result<Vec<_>, E>>()?;
        Ok(TrialSet::new(trials)?)
    }
}

/// Parses a trial CSV into an `n_c x T` matrix (file rows are time samples).
fn load_trial_file(path: &Path) -> Result<Array2<f64>, TrialIoError> {
    if !path.is_file() {
        return Err(TrialIoError::MissingFile {
            path: path.to_path_buf(),
        });
    }
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = 0usize;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(width.max(1));
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| TrialIoError::MalformedValue {
                file: path.to_path_buf(),
                line: line_no,
                detail: format!("`{}` is not a number", field.trim()),
            })?;
            if !v.is_finite() {
                return Err(TrialIoError::NonFiniteSample {
                    file: path.to_path_buf(),
                    line: line_no,
                });
            }
            row.push(v);
        }
        if rows.is_empty() {
            width = row.len();
        } else if row.len() != width {
            return Err(TrialIoError::MalformedRow {
                file: path.to_path_buf(),
                line: line_no,
                expected: width,
                found: row.len(),
            });
        }
        rows.push(row);
    }
    if rows.is_empty() || width == 0 {
        return Err(TrialIoError::MalformedRow {
            file: path.to_path_buf(),
            line: 1,
            expected: 1,
            found: 0,
        });
    }
    let t_len = rows.len();
    let mut data = Array2::<f64>::zeros((width, t_len));
    for (t, row) in rows.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            data[[c, t]] = v;
        }
    }
    Ok(data)
}

/// Loads a dataset from its manifest, in manifest order.
pub fn load_trialset(manifest_path: &Path) -> Result<TrialSet, TrialIoError> {
    if !manifest_path.is_file() {
        return Err(TrialIoError::MissingFile {
            path: manifest_path.to_path_buf(),
        });
    }
    let text = fs::read_to_string(manifest_path).map_err(io_err(manifest_path))?;
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let mut sample_rate = DEFAULT_SAMPLE_RATE_HZ;
    let mut header_seen = false;
    let mut trials: Vec<Trial> = Vec::new();
    let mut set_n_c: Option<usize> = None;

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                if key.trim() == "sample_rate_hz" {
                    sample_rate = value.trim().parse().map_err(|_| TrialIoError::MalformedValue {
                        file: manifest_path.to_path_buf(),
                        line: line_no,
                        detail: format!("bad sample_rate_hz `{}`", value.trim()),
                    })?;
                }
            }
            continue;
        }
        if !header_seen {
            if trimmed != MANIFEST_HEADER {
                return Err(TrialIoError::BadHeader {
                    file: manifest_path.to_path_buf(),
                    found: trimmed.to_string(),
                });
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 5 {
            return Err(TrialIoError::MalformedRow {
                file: manifest_path.to_path_buf(),
                line: line_no,
                expected: 5,
                found: fields.len(),
            });
        }
        let bad_value = |detail: String| TrialIoError::MalformedValue {
            file: manifest_path.to_path_buf(),
            line: line_no,
            detail,
        };
        let session = match fields[2].trim().to_ascii_lowercase().as_str() {
            "train" => Session::Train,
            "test" => Session::Test,
            other => return Err(bad_value(format!("bad session `{other}`"))),
        };
        let label = match fields[3].trim().to_ascii_lowercase().as_str() {
            "" => None,
            "left" => Some(ClassLabel::Left),
            "right" => Some(ClassLabel::Right),
            other => return Err(bad_value(format!("bad label `{other}`"))),
        };
        let trial_path = dir.join(fields[4].trim());
        let data = load_trial_file(&trial_path)?;
        match set_n_c {
            None => set_n_c = Some(data.nrows()),
            Some(expected) if expected != data.nrows() => {
                return Err(TrialIoError::InconsistentChannelCount {
                    file: trial_path,
                    line: 1,
                    expected,
                    found: data.nrows(),
                });
            }
            _ => {}
        }
        trials.push(Trial {
            data,
            sample_rate_hz: sample_rate,
            label,
            subject_id: fields[1].trim().to_string(),
            trial_id: fields[0].trim().to_string(),
            session,
        });
    }
    if !header_seen {
        return Err(TrialIoError::BadHeader {
            file: manifest_path.to_path_buf(),
            found: String::new(),
        });
    }
    TrialSet::new(trials)
}

/// Writes `contents` to `path` via a temp file in the same directory.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), TrialIoError> {
    let tmp = path.with_extension("tmp~");
    {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(contents.as_bytes()).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Saves a dataset as one CSV per trial plus `manifest.csv`; returns the
/// manifest path. Loading the result reproduces the set exactly: sample
/// values are serialized with Rust's shortest round-trip decimal formatting,
/// which parses back bit-for-bit.
pub fn save_trialset(set: &TrialSet, dir: &Path) -> Result<PathBuf, TrialIoError> {
    if set.is_empty() {
        return Err(TrialIoError::EmptySet);
    }
    let mut seen = std::collections::HashSet::new();
    for t in set.trials() {
        if !seen.insert(&t.trial_id) {
            return Err(TrialIoError::DuplicateId(t.trial_id.clone()));
        }
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let mut manifest = String::new();
    manifest.push_str(&format!("# sample_rate_hz = {}\n", set.sample_rate_hz()));
    manifest.push_str(MANIFEST_HEADER);
    manifest.push('\n');

    for (idx, trial) in set.trials().iter().enumerate() {
        let file_name = format!("trial_{idx:04}.csv");
        let mut body = String::new();
        for t in 0..trial.n_samples() {
            for c in 0..trial.n_channels() {
                if c > 0 {
                    body.push(',');
                }
                body.push_str(&format!("{}", trial.data[[c, t]]));
            }
            body.push('\n');
        }
        write_atomic(&dir.join(&file_name), &body)?;
        let label = trial.label.map(|l| l.to_string()).unwrap_or_default();
        manifest.push_str(&format!(
            "{},{},{},{},{}\n",
            trial.trial_id, trial.subject_id, trial.session, label, file_name
        ));
    }
    let manifest_path = dir.join("manifest.csv");
    write_atomic(&manifest_path, &manifest)?;
    Ok(manifest_path)
}

/// Recipe for a synthetic two-class dataset with planted salient intervals.
///
/// Every trial is unit-variance Gaussian noise; inside each planted interval a
/// class-specific narrowband sinusoid is added on a class-specific channel
/// pattern, scaled so that within-interval signal power over noise power is
/// `snr_db`. `noise_mix` > 0 mixes the noise channels through a random
/// per-trial matrix (rows renormalized to keep unit channel variance), which
/// makes the background spatially structured but class-independent.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_c: usize,
    pub t_len: usize,
    pub trials_per_class: usize,
    pub salient_start: usize,
    pub salient_len: usize,
    /// Additional planted intervals, `(start, len)` each.
    pub extra_intervals: Vec<(usize, usize)>,
    /// Frequency band per class, Hz: `[Left, Right]`.
    pub class_band_hz: [(f64, f64); 2],
    pub snr_db: f64,
    pub sample_rate_hz: f64,
    /// Per-trial random spatial mixing strength of the noise (0 = iid).
    pub noise_mix: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_c: 5,
            t_len: 500,
            trials_per_class: 40,
            salient_start: 150,
            salient_len: 200,
            extra_intervals: Vec::new(),
            class_band_hz: [(9.0, 13.0), (19.0, 25.0)],
            snr_db: 0.0,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            noise_mix: 0.0,
            seed: 7,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<(), TrialIoError> {
        let fail = |m: &str| Err(TrialIoError::InvalidSpec(m.to_string()));
        if self.n_c < 1 || self.t_len < 1 {
            return fail("n_c and t_len must be >= 1");
        }
        if self.trials_per_class < 1 {
            return fail("trials_per_class must be >= 1");
        }
        if self.sample_rate_hz <= 0.0 {
            return fail("sample_rate_hz must be positive");
        }
        for &(start, len) in
            std::iter::once(&(self.salient_start, self.salient_len)).chain(&self.extra_intervals)
        {
            if start + len > self.t_len {
                return fail("planted interval exceeds trial length");
            }
        }
        for &(lo, hi) in &self.class_band_hz {
            if !(0.0 < lo && lo < hi && hi < self.sample_rate_hz / 2.0) {
                return fail("class band must satisfy 0 < lo < hi < fs/2");
            }
        }
        if self.noise_mix < 0.0 {
            return fail("noise_mix must be >= 0");
        }
        Ok(())
    }

    /// All planted intervals, primary first.
    pub fn intervals(&self) -> Vec<(usize, usize)> {
        let mut v = vec![(self.salient_start, self.salient_len)];
        v.extend(self.extra_intervals.iter().copied());
        v
    }
}

fn unit_vector(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
    let mut v = Array1::<f64>::zeros(n);
    loop {
        for x in v.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        let norm = v.dot(&v).sqrt();
        if norm > 1e-9 {
            v /= norm;
            return v;
        }
    }
}

/// Generates the synthetic dataset described by `spec`. Pure function of the
/// spec: the same seed yields the same set, and the noise stream is separate
/// from the signal stream so varying `snr_db` leaves the noise untouched.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<TrialSet, TrialIoError> {
    spec.validate()?;
    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    noise_rng.set_stream(1);
    let mut sig_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    sig_rng.set_stream(2);

    // Class channel patterns: two unit vectors, the second orthogonalized
    // against the first so the spatial signatures are maximally distinct.
    let pat_left = unit_vector(&mut sig_rng, spec.n_c);
    let pat_right = {
        let mut v = unit_vector(&mut sig_rng, spec.n_c);
        if spec.n_c > 1 {
            let proj = v.dot(&pat_left);
            v = &v - &(&pat_left * proj);
            let norm = v.dot(&v).sqrt();
            if norm > 1e-9 {
                v /= norm;
            } else {
                v = unit_vector(&mut sig_rng, spec.n_c);
            }
        }
        v
    };

    let amplitude = (2.0 * spec.n_c as f64 * 10f64.powf(spec.snr_db / 10.0)).sqrt();
    let n_trials = 2 * spec.trials_per_class;
    let mut trials = Vec::with_capacity(n_trials);

    for idx in 0..n_trials {
        let label = if idx % 2 == 0 {
            ClassLabel::Left
        } else {
            ClassLabel::Right
        };
        let (pattern, band) = match label {
            ClassLabel::Left => (&pat_left, spec.class_band_hz[0]),
            ClassLabel::Right => (&pat_right, spec.class_band_hz[1]),
        };

        let mut data = Array2::<f64>::zeros((spec.n_c, spec.t_len));
        for x in data.iter_mut() {
            *x = noise_rng.sample(StandardNormal);
        }
        if spec.noise_mix > 0.0 {
            let mut mix = Array2::<f64>::eye(spec.n_c);
            let scale = spec.noise_mix / (spec.n_c as f64).sqrt();
            for x in mix.iter_mut() {
                *x += scale * rng_normal(&mut noise_rng);
            }
            for mut row in mix.rows_mut() {
                let norm = row.dot(&row).sqrt();
                if norm > 1e-12 {
                    row /= norm;
                }
            }
            data = mix.dot(&data);
        }

        for (start, len) in spec.intervals() {
            let freq = sig_rng.random_range(band.0..band.1);
            let phase = sig_rng.random_range(0.0..std::f64::consts::TAU);
            if len == 0 {
                continue;
            }
            for t in start..start + len {
                let s = amplitude
                    * (std::f64::consts::TAU * freq * (t - start) as f64 / spec.sample_rate_hz
                        + phase)
                        .sin();
                for c in 0..spec.n_c {
                    data[[c, t]] += pattern[c] * s;
                }
            }
        }

        trials.push(Trial {
            data,
            sample_rate_hz: spec.sample_rate_hz,
            label: Some(label),
            subject_id: "synth".to_string(),
            trial_id: format!("t{idx:04}"),
            session: Session::Train,
        });
    }
    TrialSet::new(trials)
}

fn rng_normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}
