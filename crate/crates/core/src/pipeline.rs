//! Config-driven experiment runs: circuit, samples, validation and cost
//! artifacts written to one directory.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{circuit_fingerprint, circuit_to_toml, csv_string, matrix_from_strings, save_samples, short_hash};
use crate::cost::{advantage_ratio, cost_table, CostConfig};
use crate::error::{GbsError, Result};
use crate::fock::fock_circuit_distribution;
use crate::gaussian::{haar_random_unitary, paired_squeezers, CircuitSpec};
use crate::samplers::{circuit_model, derive_seed, phase_sweep, sample_circuit, ModelTag, SampleSet};
use crate::threshold::{enumerate_distribution, DetectedState, KernelConfig};
use crate::validation::*;

/// Per-mode transmission: one value for every mode, or a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Transmission {
    Uniform(f64),
    PerMode(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSection {
    pub modes: usize,
    /// Haar-random interferometer seed; exclusive with `unitary`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub haar_seed: Option<u64>,
    /// Row-major `"re,im"` entries; identity when both this and `haar_seed` are absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unitary: Option<Vec<String>>,
    /// Squeezer `k` acts on modes `(2k, 2k+1)`.
    #[serde(default)]
    pub squeezing: Vec<f64>,
    #[serde(default)]
    pub squeezer_phases: Vec<f64>,
    pub transmission: Transmission,
    #[serde(default = "one")]
    pub detector_efficiency: f64,
    #[serde(default)]
    pub dark_count_prob: f64,
}

fn one() -> f64 {
    1.0
}

impl CircuitSection {
    pub fn build(&self) -> Result<CircuitSpec> {
        let m = self.modes;
        if m == 0 {
            return Err(GbsError::Config("circuit.modes must be at least 1".into()));
        }
        let unitary = match (&self.haar_seed, &self.unitary) {
            (Some(_), Some(_)) => return Err(GbsError::Config("circuit: give either haar_seed or unitary, not both".into())),
            (Some(seed), None) => haar_random_unitary(m, *seed),
            (None, Some(entries)) => matrix_from_strings(entries, m).map_err(|e| GbsError::Config(format!("circuit.{e}")))?,
            (None, None) => crate::linalg::CMatrix::identity(m, m),
        };
        let phases = if self.squeezer_phases.is_empty() { vec![0.0; self.squeezing.len()] } else { self.squeezer_phases.clone() };
        if phases.len() != self.squeezing.len() {
            return Err(GbsError::Config(format!(
                "circuit.squeezer_phases has {} entries for {} squeezers",
                phases.len(),
                self.squeezing.len()
            )));
        }
        let transmission = match &self.transmission {
            Transmission::Uniform(eta) => vec![*eta; m],
            Transmission::PerMode(v) => v.clone(),
        };
        let c = CircuitSpec {
            mode_count: m,
            unitary,
            transmission,
            detector_efficiency: self.detector_efficiency,
            dark_count_prob: self.dark_count_prob,
            squeezers: paired_squeezers(&self.squeezing, &phases),
        };
        c.validate().map_err(|e| match e {
            GbsError::Config(msg) => GbsError::Config(format!("circuit: {msg}")),
            other => other,
        })?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    pub count: usize,
    pub models: Vec<ModelTag>,
}

/// Validation settings and tolerance overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidationSection {
    /// Empty selects quarter steps of the mode count.
    pub subsystem_sizes: Vec<usize>,
    /// GBS samples must push the Bayesian counter above this.
    pub counter_pass: f64,
    /// Mockup samples must pull it below this.
    pub counter_reject: f64,
    pub phase_settings: usize,
    pub phase_samples: usize,
    /// Cross-setting distance must exceed this multiple of the split-half floor.
    pub distance_factor: f64,
    pub correlation_orders: Vec<usize>,
    /// Truncated correlations use subsets of the first `order_pool` modes.
    pub order_pool: usize,
    pub bootstrap_resamples: usize,
    /// Accuracy parameter of the simulability bound.
    pub epsilon: f64,
    /// Input-mode count used to normalise mean correlations; zero selects two per squeezer.
    pub input_modes: usize,
}

impl Default for ValidationSection {
    fn default() -> Self {
        ValidationSection {
            subsystem_sizes: Vec::new(),
            counter_pass: 0.996,
            counter_reject: 0.01,
            phase_settings: 2,
            phase_samples: 2000,
            distance_factor: 3.0,
            correlation_orders: vec![2, 3, 4],
            order_pool: 6,
            bootstrap_resamples: 200,
            epsilon: 1.0,
            input_modes: 0,
        }
    }
}

impl ValidationSection {
    fn sizes_for(&self, m: usize) -> Vec<usize> {
        if !self.subsystem_sizes.is_empty() {
            return self.subsystem_sizes.clone();
        }
        let mut v: Vec<usize> = (1..=4).map(|q| (q * m / 4).max(1)).collect();
        v.dedup();
        v
    }
}

/// Everything needed to reproduce one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    pub circuit: CircuitSection,
    pub sampling: SamplingSection,
    #[serde(default)]
    pub validation: ValidationSection,
    #[serde(default)]
    pub cost: CostConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| GbsError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GbsError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Canonical serialization; parsing it gives back an equal config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config serializes")
    }

    pub fn fingerprint(&self) -> String {
        short_hash(self.to_toml().as_bytes())
    }

    fn check(&self) -> Result<()> {
        self.circuit.build()?;
        self.cost.validate().map_err(|e| GbsError::Config(format!("cost: {e}")))?;
        let v = &self.validation;
        if !(0.0 < v.counter_reject && v.counter_reject < v.counter_pass && v.counter_pass < 1.0) {
            return Err(GbsError::Config("validation: need 0 < counter_reject < counter_pass < 1".into()));
        }
        if let Some(&s) = v.subsystem_sizes.iter().find(|&&s| s == 0 || s > self.circuit.modes) {
            return Err(GbsError::Config(format!("validation.subsystem_sizes: {s} outside 1..={}", self.circuit.modes)));
        }
        if self.sampling.count == 0 && !self.sampling.models.is_empty() {
            return Err(GbsError::Config("sampling.count must be positive".into()));
        }
        Ok(())
    }
}

/// Random lossy circuit: Haar interferometer, `k` squeezers with
/// `r` uniform in `[0.1, r_max]`, random phases, per-mode transmission
/// uniform in `eta_range`.
pub fn random_circuit(m: usize, k: usize, r_max: f64, eta_range: (f64, f64), seed: u64) -> CircuitSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let rs: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..=r_max.max(0.1))).collect();
    let phases: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    let eta: Vec<f64> = (0..m).map(|_| rng.random_range(eta_range.0..=eta_range.1)).collect();
    let mut c = CircuitSpec::ideal(haar_random_unitary(m, derive_seed(seed, 0)), paired_squeezers(&rs, &phases));
    c.transmission = eta;
    c
}

/// One point of a Bayesian counter series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesRow {
    pub samples_from: String,
    pub against: String,
    pub event: usize,
    pub log_chi: f64,
    pub counter: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationOutput {
    pub report: ValidationReport,
    pub sweep: Vec<SweepRow>,
    pub series: Vec<SeriesRow>,
}

fn record(test: &str, detail: String, set: &SampleSet) -> ValidationRecord {
    ValidationRecord { test: test.into(), detail, subsystem_size: set.mode_count, samples: set.len(), ..Default::default() }
}

/// True when Q and R agree on every event, so the data carry no evidence.
fn uninformative(trace: &BayesianTrace) -> bool {
    trace.log_ratios.iter().all(|&l| l == 0.0)
}

/// Degenerate inputs become informational records; other errors propagate.
fn info_on_degenerate<T>(res: Result<T>, rec: &mut ValidationRecord) -> Result<Option<T>> {
    match res {
        Ok(v) => Ok(Some(v)),
        Err(GbsError::Degenerate(msg)) => {
            rec.detail = format!("{} (degenerate: {msg})", rec.detail);
            rec.pass = None;
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Runs the validation battery on sample sets drawn from `circuit`.
/// Every set must carry the circuit's fingerprint.
pub fn validate_samples(
    circuit: &CircuitSpec,
    sets: &[SampleSet],
    settings: &ValidationSection,
    seed: u64,
    cfg: &KernelConfig,
) -> Result<ValidationOutput> {
    let fp = circuit_fingerprint(circuit);
    for s in sets {
        if s.fingerprint != fp {
            return Err(GbsError::Config(format!(
                "{} samples carry fingerprint {} but the circuit has {fp}",
                s.model, s.fingerprint
            )));
        }
        if s.mode_count != circuit.mode_count {
            return Err(GbsError::Config(format!("{} samples have {} modes, circuit has {}", s.model, s.mode_count, circuit.mode_count)));
        }
        if s.is_empty() {
            return Err(GbsError::Argument(format!("{} sample set is empty", s.model)));
        }
    }
    let m = circuit.mode_count;
    let all: Vec<usize> = (0..m).collect();
    let mut report = ValidationReport::new(fp, vec![seed]);
    let mut series = Vec::new();
    let mut sweep = Vec::new();
    let gbs_model = circuit_model(circuit, ModelTag::Gbs)?;
    let gbs = sets.iter().find(|s| s.model == ModelTag::Gbs);
    let mockups: Vec<&SampleSet> = sets.iter().filter(|s| s.model != ModelTag::Gbs).collect();

    let mut push_series = |from: &SampleSet, against: ModelTag, trace: &BayesianTrace| {
        for (i, (&l, &c)) in trace.log_chi.iter().zip(&trace.counter).enumerate() {
            series.push(SeriesRow {
                samples_from: from.model.to_string(),
                against: against.to_string(),
                event: i + 1,
                log_chi: l,
                counter: c,
            });
        }
    };

    for mock in &mockups {
        let mock_model = circuit_model(circuit, mock.model)?;
        let mut targets: Vec<(&SampleSet, bool)> = Vec::new();
        if let Some(g) = gbs {
            targets.push((g, true));
        }
        targets.push((mock, false));
        for (set, expect_gbs) in targets {
            let trace = bayesian_test(set, gbs_model.as_ref(), mock_model.as_ref(), &all, cfg)?;
            push_series(set, mock.model, &trace);
            let mut rec = record("bayes", format!("{} samples, gbs vs {}", set.model, mock.model), set);
            rec.log_chi = Some(trace.final_log_chi());
            rec.counter = Some(trace.final_counter());
            rec.delta_h = Some(trace.delta_h);
            rec.std_error = Some(trace.delta_h_std_error());
            rec.pass = if uninformative(&trace) {
                rec.detail.push_str(" (models agree on every sample)");
                None
            } else if expect_gbs {
                Some(trace.final_counter() > settings.counter_pass)
            } else {
                Some(trace.final_counter() < settings.counter_reject)
            };
            report.push(rec);
        }
        if let Some(g) = gbs {
            let mut rec = record("click_number_tvd", format!("gbs vs {} samples", mock.model), g);
            let tvd = distribution_tvd(&click_number_distribution(g), &click_number_distribution(mock))?;
            let floor = bootstrap_tvd_floor(g, settings.bootstrap_resamples.max(1), derive_seed(seed, 500))?;
            rec.tvd = Some(tvd);
            rec.value = Some(if floor > 0.0 { tvd / floor } else { f64::INFINITY });
            report.push(rec);
        }
    }

    if let Some(g) = gbs {
        let reference = mockups.iter().find(|s| s.model == ModelTag::Thermal).or(mockups.first());
        if let Some(reference) = reference {
            let r_model = circuit_model(circuit, reference.model)?;
            let sizes = settings.sizes_for(m);
            sweep = subsystem_sweep(g, gbs_model.as_ref(), r_model.as_ref(), &sizes, derive_seed(seed, 400), cfg)?;
            for row in &sweep {
                let mut rec = record("subsystem_sweep", format!("gbs vs {}", reference.model), g);
                rec.subsystem_size = row.size;
                rec.delta_h = Some(row.delta_h);
                rec.std_error = Some(row.std_error);
                rec.counter = Some(row.counter);
                rec.pass = if row.delta_h == 0.0 && row.std_error == 0.0 { None } else { Some(row.delta_h > 0.0) };
                report.push(rec);
            }
            if sweep.len() >= 3 {
                let mut rec = record("subsystem_trend", format!("gbs vs {}", reference.model), g);
                let x: Vec<f64> = sweep.iter().map(|r| r.size as f64).collect();
                let y: Vec<f64> = sweep.iter().map(|r| r.delta_h).collect();
                if let Some(sp) = info_on_degenerate(spearman_test(&x, &y), &mut rec)? {
                    rec.value = Some(sp.rho);
                    rec.p_value = Some(sp.p);
                }
                report.push(rec);
            }
        }

        let theory = ModelMoments { model: gbs_model.as_ref(), cfg: cfg.clone() };
        if m >= 2 {
            let c_theory = two_point_correlation(&theory)?;
            let c_emp = empirical_two_point(g)?;
            let mut rec = record("two_point_distance", "gbs samples vs exact".into(), g);
            if let Some(d) = info_on_degenerate(correlation_distance(&c_emp, &c_theory), &mut rec)? {
                rec.tvd = Some(d);
            }
            report.push(rec);
            let n_in = if settings.input_modes > 0 { settings.input_modes } else { (2 * circuit.squeezers.len()).max(1) };
            for set in std::iter::once(g).chain(mockups.iter().copied()) {
                let mut rec = record("correlation_stats", format!("{} samples: normalised mean, skewness", set.model), set);
                if let Some((mean, skew)) = info_on_degenerate(correlation_stats(&empirical_two_point(set)?, m, n_in), &mut rec)? {
                    rec.value = Some(mean);
                    rec.detail = format!("{} skewness={skew:.6e}", rec.detail);
                }
                report.push(rec);
            }
        }

        let pool: Vec<usize> = (0..settings.order_pool.min(m)).collect();
        for &k in &settings.correlation_orders {
            if k == 0 || k > pool.len() || combinations(&pool, k).len() < 3 || k > MAX_THEORY_ORDER {
                continue;
            }
            let mut rec = record("cumulant_order", format!("order {k}, exact vs empirical over first {} modes", pool.len()), g);
            rec.subsystem_size = k;
            if let Some(a) = info_on_degenerate(order_agreement(g, gbs_model.as_ref(), &pool, &[k], cfg), &mut rec)? {
                rec.value = Some(a[0].rho);
                rec.p_value = Some(a[0].p_value);
            }
            report.push(rec);
        }

        if m <= MAX_HOG_MODES {
            let median = reference_median(gbs_model.as_ref(), cfg)?;
            for set in std::iter::once(g).chain(mockups.iter().copied()) {
                let score = hog_fraction(set, gbs_model.as_ref(), median, cfg)?;
                let mut rec = record("heavy_output", format!("{} samples scored by gbs", set.model), set);
                rec.value = Some(score.fraction);
                rec.std_error = Some(score.std_error);
                report.push(rec);
            }
        }
    }

    if !circuit.squeezers.is_empty() {
        let k = circuit.squeezers.len();
        let r = circuit.squeezers.iter().map(|s| s.r).sum::<f64>() / k as f64;
        let eta = circuit.transmission.iter().sum::<f64>() / m as f64;
        let check = nonclassicality_check(r, eta, k, settings.epsilon, circuit.dark_count_prob, circuit.detector_efficiency)?;
        report.push(ValidationRecord {
            test: "simulability_bound".into(),
            detail: format!(
                "mean r={r:.4}, eta={eta:.4}, K={k}, eps={}: lhs={:.6}, rhs={:.6}, simulable={}",
                settings.epsilon, check.lhs, check.rhs, check.simulable
            ),
            subsystem_size: m,
            value: Some(check.lhs),
            ..Default::default()
        });
    }

    Ok(ValidationOutput { report, sweep, series })
}

/// Random squeezer phase settings for a programmability run.
pub fn random_phase_settings(k: usize, settings: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 300));
    (0..settings).map(|_| (0..k).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect()).collect()
}

/// Correlation distances between phase settings. Passes when every
/// cross-setting distance exceeds `factor` times the largest split-half floor.
pub fn programmability_check(groups: &[SampleSet], factor: f64) -> Result<(Vec<Vec<f64>>, ValidationRecord)> {
    let d = correlation_group_distance_matrix(groups)?;
    let floor = (0..d.len()).map(|i| d[i][i]).fold(0.0, f64::max);
    let cross = (0..d.len()).flat_map(|i| ((i + 1)..d.len()).map(move |j| (i, j))).map(|(i, j)| d[i][j]).fold(f64::INFINITY, f64::min);
    let rec = ValidationRecord {
        test: "programmability".into(),
        detail: format!("{} phase settings, min cross distance vs {factor} x max split-half floor", groups.len()),
        subsystem_size: groups.first().map_or(0, |g| g.mode_count),
        samples: groups.first().map_or(0, |g| g.len()),
        tvd: Some(cross),
        value: Some(if floor > 0.0 { cross / floor } else { f64::INFINITY }),
        pass: Some(cross > factor * floor),
        ..Default::default()
    };
    Ok((d, rec))
}

/// Largest excess of |Fock - Gaussian| over `1e-6 + tail`, per circuit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRow {
    pub trial: usize,
    pub modes: usize,
    pub squeezers: usize,
    pub tail_bound: f64,
    pub max_abs_diff: f64,
    pub pass: bool,
}

/// Compares the Fock-space oracle against the Gaussian engine on random
/// circuits with at most `max_modes` modes.
pub fn oracle_check(trials: usize, max_modes: usize, cutoff: usize, seed: u64, cfg: &KernelConfig) -> Result<Vec<OracleRow>> {
    if !(2..=4).contains(&max_modes) {
        return Err(GbsError::Argument(format!("oracle check supports 2..=4 modes, got {max_modes}")));
    }
    (0..trials)
        .map(|t| {
            let s = derive_seed(seed, t as u64);
            let m = 2 + (s % (max_modes as u64 - 1)) as usize;
            let k = 1 + ((s >> 8) % (m as u64 / 2)) as usize;
            let mut c = random_circuit(m, k, 0.8, (0.5, 1.0), s);
            if (s >> 16) % 2 == 1 {
                c.dark_count_prob = 1e-3;
                c.detector_efficiency = 0.9;
            }
            let (fock, tail) = fock_circuit_distribution(&c, cutoff, 1e-3)?;
            let exact = enumerate_distribution(&DetectedState::new(c.output_state()?, c.dark_count_prob), cfg)?;
            let max_abs_diff = fock.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            Ok(OracleRow { trial: t, modes: m, squeezers: k, tail_bound: tail, max_abs_diff, pass: max_abs_diff <= 1e-6 + tail })
        })
        .collect()
}

/// Files written by [`run_pipeline`] and the overall verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub passed: bool,
    pub files: Vec<PathBuf>,
    pub report: ValidationReport,
}

fn write(dir: &Path, name: &str, content: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|e| GbsError::Io(format!("{}: {e}", path.display())))?;
    files.push(path);
    Ok(())
}

fn stage<T>(name: &str, res: Result<T>) -> Result<T> {
    res.map_err(|e| match e {
        GbsError::Capacity(msg) => GbsError::Capacity(format!("{name}: {msg}")),
        other => other,
    })
}

/// Runs a whole experiment into `out_dir`. Identical configs produce
/// byte-identical files for any thread count.
pub fn run_pipeline(config: &ExperimentConfig, out_dir: &Path) -> Result<PipelineOutcome> {
    config.check()?;
    std::fs::create_dir_all(out_dir).map_err(|e| GbsError::Io(format!("{}: {e}", out_dir.display())))?;
    let cfg = KernelConfig::default();
    let circuit = config.circuit.build()?;
    let mut files = Vec::new();
    write(out_dir, "experiment.toml", &config.to_toml(), &mut files)?;
    write(out_dir, "circuit.toml", &circuit_to_toml(&circuit), &mut files)?;

    let mut sets = Vec::new();
    for &tag in &config.sampling.models {
        let set = stage(
            &format!("sampling {tag}"),
            sample_circuit(&circuit, tag, config.sampling.count, derive_seed(config.seed, 100 + tag as u64), None, &cfg),
        )?;
        let path = out_dir.join(format!("samples_{tag}.txt"));
        save_samples(&set, &path)?;
        files.push(path);
        sets.push(set);
    }

    let v = &config.validation;
    let mut out = stage("validation", validate_samples(&circuit, &sets, v, config.seed, &cfg))?;
    out.report.seeds = vec![config.seed];
    out.report.fingerprint = format!("{} (config {})", out.report.fingerprint, config.fingerprint());

    let k = circuit.squeezers.len();
    if v.phase_settings >= 2 && v.phase_samples > 0 && k > 0 {
        let settings = random_phase_settings(k, v.phase_settings, config.seed);
        let groups = stage("phase sweep", phase_sweep(&circuit, &settings, v.phase_samples, derive_seed(config.seed, 200), &cfg))?;
        for g in &groups {
            let path = out_dir.join(format!("samples_phase_{}.txt", g.phase_index.unwrap_or(0)));
            save_samples(g, &path)?;
            files.push(path);
        }
        let mut rec = ValidationRecord { test: "programmability".into(), ..Default::default() };
        if let Some((d, r)) = info_on_degenerate(programmability_check(&groups, v.distance_factor), &mut rec)? {
            let rows: Vec<String> =
                d.iter().map(|row| row.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")).collect();
            write(out_dir, "phase_distances.csv", &(rows.join("\n") + "\n"), &mut files)?;
            rec = r;
        }
        out.report.push(rec);
    }

    if let Some(g) = sets.iter().find(|s| s.model == ModelTag::Gbs) {
        let a = advantage_ratio(g, &config.cost)?;
        out.report.push(ValidationRecord {
            test: "advantage_ratio".into(),
            detail: format!("log10 ratio; max clicks {}", a.max_clicks),
            subsystem_size: circuit.mode_count,
            samples: a.samples,
            value: Some(a.log10_ratio),
            ..Default::default()
        });
    }
    let max_clicks = sets.iter().flat_map(|s| s.patterns.iter().map(|p| p.click_count())).max().unwrap_or(0);
    write(out_dir, "cost.csv", &csv_string(&cost_table(max_clicks.max(circuit.mode_count), &config.cost)?)?, &mut files)?;
    write(out_dir, "validation.csv", &out.report.to_csv()?, &mut files)?;
    write(out_dir, "bayes_series.csv", &csv_string(&out.series)?, &mut files)?;
    write(out_dir, "sweep.csv", &csv_string(&out.sweep)?, &mut files)?;
    let summary = format!("experiment: {}\n{}", config.name, out.report.summary());
    write(out_dir, "summary.txt", &summary, &mut files)?;
    Ok(PipelineOutcome { passed: out.report.all_passed(), files, report: out.report })
}
