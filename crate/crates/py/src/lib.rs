//! Python bindings for relaysched.
//!
//! Gains are linear and SNRs are in dB, as in the Rust API. Every core
//! error surfaces as `ValueError`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use relaysched_core::analytics::{self, OutageCurve};
use relaysched_core::fairness::{self, DelaySamples};
use relaysched_core::model::{self, FadingMode};
use relaysched_core::scenarios;
use relaysched_core::scheduling::{self, GroupingPattern, GroupingStrategy, SchedulingPolicy};
use relaysched_core::selection;
use relaysched_core::simulator::{self, ExperimentPlan, FadingSpec, PolicyEntry};

fn py_err(e: relaysched_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn strategy(name: &str, seed: u64) -> PyResult<GroupingStrategy> {
    Ok(match name {
        "fixed_order" => GroupingStrategy::FixedOrder,
        "random" => GroupingStrategy::Random { seed },
        "similar_gain" => GroupingStrategy::SimilarGain,
        "dissimilar_gain" => GroupingStrategy::DissimilarGain,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown grouping {other:?}; expected fixed_order, random, similar_gain or dissimilar_gain"
            )))
        }
    })
}

#[pyclass(name = "NetworkConfig", module = "relaysched", skip_from_py_object)]
#[derive(Clone)]
struct PyNetworkConfig {
    inner: model::NetworkConfig,
}

#[pymethods]
impl PyNetworkConfig {
    #[new]
    #[pyo3(signature = (mean_gain_ur, mean_gain_rb, alpha=0.5, noise_power=1.0, snr_threshold=3.0, slot_duration=0.002, snr_db=0.0))]
    fn new(
        mean_gain_ur: Vec<Vec<f64>>,
        mean_gain_rb: Vec<f64>,
        alpha: f64,
        noise_power: f64,
        snr_threshold: f64,
        slot_duration: f64,
        snr_db: f64,
    ) -> PyResult<Self> {
        let mut cfg = model::NetworkConfig::new(mean_gain_ur, mean_gain_rb).map_err(py_err)?;
        cfg.alpha = alpha;
        cfg.noise_power = noise_power;
        cfg.snr_threshold = snr_threshold;
        cfg.slot_duration = slot_duration;
        let cfg = cfg.with_snr_db(snr_db);
        cfg.validate().map_err(py_err)?;
        Ok(Self { inner: cfg })
    }

    /// The eight-user, five-relay network with the tabulated mean gains.
    #[staticmethod]
    fn table_one() -> Self {
        Self { inner: scenarios::table_one() }
    }

    /// Every link with unit mean gain.
    #[staticmethod]
    fn homogeneous(num_users: usize, num_relays: usize) -> Self {
        Self { inner: scenarios::homogeneous(num_users, num_relays) }
    }

    /// Eight users, four near the relays, six relays; gains drawn from `seed`.
    #[staticmethod]
    fn split_population(seed: u64) -> PyResult<Self> {
        Ok(Self { inner: scenarios::split_population(seed).draw().map_err(py_err)? })
    }

    fn with_snr_db(&self, snr_db: f64) -> Self {
        Self { inner: self.inner.with_snr_db(snr_db) }
    }

    #[getter]
    fn num_users(&self) -> usize {
        self.inner.num_users()
    }

    #[getter]
    fn num_relays(&self) -> usize {
        self.inner.num_relays()
    }

    #[getter]
    fn mean_gain_ur(&self) -> Vec<Vec<f64>> {
        self.inner.mean_gain_ur.clone()
    }

    #[getter]
    fn mean_gain_rb(&self) -> Vec<f64> {
        self.inner.mean_gain_rb.clone()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn snr_threshold(&self) -> f64 {
        self.inner.snr_threshold
    }

    #[getter]
    fn slot_duration(&self) -> f64 {
        self.inner.slot_duration
    }

    /// Linear `P_0 / N_0`.
    #[getter]
    fn snr(&self) -> f64 {
        self.inner.snr()
    }

    fn __repr__(&self) -> String {
        format!(
            "NetworkConfig(users={}, relays={}, alpha={}, snr_db={:.3})",
            self.inner.num_users(),
            self.inner.num_relays(),
            self.inner.alpha,
            model::linear_to_db(self.inner.snr())
        )
    }
}

#[pyclass(name = "ChannelRealization", module = "relaysched", skip_from_py_object)]
#[derive(Clone)]
struct PyChannelRealization {
    inner: model::ChannelRealization,
}

#[pymethods]
impl PyChannelRealization {
    #[new]
    fn new(gain_ur: Vec<Vec<f64>>, gain_rb: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: model::ChannelRealization::from_rows(&gain_ur, gain_rb).map_err(py_err)? })
    }

    fn ur(&self, user: usize, relay: usize) -> f64 {
        self.inner.ur(user, relay)
    }

    fn rb(&self, relay: usize) -> f64 {
        self.inner.rb(relay)
    }

    #[getter]
    fn gain_ur(&self) -> Vec<Vec<f64>> {
        (0..self.inner.num_users()).map(|u| self.inner.user_row(u).to_vec()).collect()
    }

    #[getter]
    fn gain_rb(&self) -> Vec<f64> {
        self.inner.relay_gains().to_vec()
    }
}

/// Rayleigh block fading, iid per slot or Gauss-Markov correlated.
#[pyclass(name = "FadingProcess", module = "relaysched", skip_from_py_object)]
struct PyFadingProcess {
    inner: model::FadingProcess,
    config: model::NetworkConfig,
}

#[pymethods]
impl PyFadingProcess {
    /// `rho` gives the slot-to-slot correlation directly; otherwise it
    /// follows from `doppler_hz` and the slot duration.
    #[new]
    #[pyo3(signature = (config, seed, mode="iid", rho=None, doppler_hz=None))]
    fn new(
        config: &PyNetworkConfig,
        seed: u64,
        mode: &str,
        rho: Option<f64>,
        doppler_hz: Option<f64>,
    ) -> PyResult<Self> {
        let cfg = config.inner.clone();
        let mode = match (mode, rho) {
            ("iid", _) => FadingMode::Iid,
            ("gauss_markov", Some(r)) => FadingMode::gauss_markov(r),
            ("gauss_markov", None) => {
                let doppler = doppler_hz.unwrap_or(model::DEFAULT_DOPPLER_HZ);
                FadingSpec::GaussMarkov { doppler_hz: doppler, doppler_hz_rb: None }
                    .mode(cfg.slot_duration)
                    .map_err(py_err)?
            }
            (other, _) => return Err(PyValueError::new_err(format!("unknown fading mode {other:?}"))),
        };
        let inner = model::FadingProcess::for_config(mode, seed, &cfg).map_err(py_err)?;
        Ok(Self { inner, config: cfg })
    }

    fn draw(&mut self) -> PyChannelRealization {
        PyChannelRealization { inner: self.inner.draw_realization(&self.config) }
    }
}

/// A scheduling policy for [`simulate`].
#[pyclass(name = "Policy", module = "relaysched", skip_from_py_object)]
#[derive(Clone)]
struct PyPolicy {
    inner: PolicyEntry,
}

#[pymethods]
impl PyPolicy {
    #[staticmethod]
    fn tdma() -> Self {
        Self { inner: PolicyEntry::fixed_tdma() }
    }

    #[staticmethod]
    fn greedy() -> Self {
        Self { inner: PolicyEntry::greedy() }
    }

    /// `k`-user relaxed TDMA; `draws` random groupings are averaged.
    #[staticmethod]
    #[pyo3(signature = (k, grouping="fixed_order", seed=1, draws=1))]
    fn relaxed(k: usize, grouping: &str, seed: u64, draws: usize) -> PyResult<Self> {
        Ok(Self { inner: PolicyEntry::relaxed(k, strategy(grouping, seed)?).with_draws(draws) })
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label()
    }

    fn __repr__(&self) -> String {
        format!("Policy({})", self.inner.label())
    }
}

fn selection_dict<'py>(py: Python<'py>, s: &selection::SelectionResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("relay", s.relay_index)?;
    d.set_item("metric", s.metric)?;
    d.set_item("decoding_set", s.decoding_set.clone())?;
    Ok(d)
}

fn check_user(user: usize, real: &PyChannelRealization, config: &PyNetworkConfig) -> PyResult<()> {
    let (m, n) = (config.inner.num_users(), config.inner.num_relays());
    if real.inner.num_users() != m || real.inner.num_relays() != n {
        return Err(PyValueError::new_err("realization and config sizes differ"));
    }
    if user >= m {
        return Err(PyValueError::new_err(format!("user {user} out of range for {m} users")));
    }
    Ok(())
}

/// Min-max relay choice: `{"relay", "metric", "decoding_set"}`.
#[pyfunction]
fn select_relay_min_max<'py>(
    py: Python<'py>,
    user: usize,
    realization: &PyChannelRealization,
    config: &PyNetworkConfig,
) -> PyResult<Bound<'py, PyDict>> {
    check_user(user, realization, config)?;
    selection_dict(py, &selection::select_relay_min_max(user, &realization.inner, &config.inner))
}

/// Best relay among those that decoded; `None` for an empty decoding set.
#[pyfunction]
fn select_relay_method_theta<'py>(
    py: Python<'py>,
    user: usize,
    realization: &PyChannelRealization,
    config: &PyNetworkConfig,
) -> PyResult<Option<Bound<'py, PyDict>>> {
    check_user(user, realization, config)?;
    selection::select_relay_method_theta(user, &realization.inner, &config.inner)
        .map(|s| selection_dict(py, &s))
        .transpose()
}

#[pyfunction]
fn is_outage(user: usize, realization: &PyChannelRealization, config: &PyNetworkConfig) -> PyResult<bool> {
    check_user(user, realization, config)?;
    let s = selection::select_relay_min_max(user, &realization.inner, &config.inner);
    Ok(selection::is_outage(Some(&s), &config.inner))
}

/// Groups of users sharing TDMA slots.
#[pyfunction]
#[pyo3(signature = (strategy_name, k, config, seed=1))]
fn make_grouping(strategy_name: &str, k: usize, config: &PyNetworkConfig, seed: u64) -> PyResult<Vec<Vec<usize>>> {
    let p = scheduling::make_grouping(strategy(strategy_name, seed)?, k, &config.inner).map_err(py_err)?;
    Ok(p.groups().to_vec())
}

fn policy_from(
    name: &str,
    groups: Option<Vec<Vec<usize>>>,
    config: &model::NetworkConfig,
) -> PyResult<SchedulingPolicy> {
    match (name, groups) {
        ("tdma", None) => Ok(SchedulingPolicy::FixedTdma),
        ("greedy", None) => Ok(SchedulingPolicy::Greedy),
        ("relaxed", Some(g)) => {
            let p = GroupingPattern::from_groups(g, GroupingStrategy::FixedOrder).map_err(py_err)?;
            p.check(config).map_err(py_err)?;
            Ok(SchedulingPolicy::RelaxedTdma(p))
        }
        ("relaxed", None) => Err(PyValueError::new_err("relaxed scheduling needs groups")),
        (other, _) => Err(PyValueError::new_err(format!("cannot schedule {other:?} with these arguments"))),
    }
}

/// One slot: `{"user", "relay", "metric", "outage"}`. `policy` is `"tdma"`,
/// `"greedy"` or `"relaxed"` with `groups`.
#[pyfunction]
#[pyo3(signature = (policy, slot, realization, config, groups=None))]
fn schedule<'py>(
    py: Python<'py>,
    policy: &str,
    slot: u64,
    realization: &PyChannelRealization,
    config: &PyNetworkConfig,
    groups: Option<Vec<Vec<usize>>>,
) -> PyResult<Bound<'py, PyDict>> {
    check_user(0, realization, config)?;
    let out = policy_from(policy, groups, &config.inner)?.schedule(slot, &realization.inner, &config.inner);
    let d = PyDict::new(py);
    d.set_item("user", out.scheduled_user)?;
    d.set_item("relay", out.selected_relay)?;
    d.set_item("metric", out.metric_w)?;
    d.set_item("outage", out.outage)?;
    Ok(d)
}

fn eta(snr_db: f64) -> f64 {
    model::db_to_linear(snr_db)
}

/// Greedy (optimal) outage probability at `snr_db`.
#[pyfunction]
fn outage_exact(config: &PyNetworkConfig, snr_db: f64) -> f64 {
    analytics::outage_exact(&config.inner, eta(snr_db))
}

#[pyfunction]
fn outage_tdma(config: &PyNetworkConfig, snr_db: f64) -> f64 {
    analytics::outage_tdma(&config.inner, eta(snr_db))
}

/// Outage floor as the number of users grows.
#[pyfunction]
fn outage_lower_bound(config: &PyNetworkConfig, snr_db: f64) -> f64 {
    analytics::outage_lower_bound(&config.inner, eta(snr_db))
}

#[pyfunction]
fn outage_relaxed_tdma(config: &PyNetworkConfig, groups: Vec<Vec<usize>>, snr_db: f64) -> PyResult<f64> {
    let p = GroupingPattern::from_groups(groups, GroupingStrategy::FixedOrder).map_err(py_err)?;
    p.check(&config.inner).map_err(py_err)?;
    Ok(analytics::outage_relaxed_tdma(&config.inner, &p, eta(snr_db)))
}

#[pyfunction]
fn power_gap_db(alpha: f64) -> f64 {
    analytics::power_gap_db(alpha)
}

/// Negated log-log slope of outage against linear SNR over the points with
/// outage in `[lo, hi]`.
#[pyfunction]
#[pyo3(signature = (snr_db, outage, lo=1e-10, hi=1e-2))]
fn estimate_diversity_order(snr_db: Vec<f64>, outage: Vec<f64>, lo: f64, hi: f64) -> PyResult<f64> {
    let curve = OutageCurve::new("curve", snr_db.into_iter().map(eta).collect(), outage).map_err(py_err)?;
    analytics::estimate_diversity_order_in(&curve, lo, hi).map_err(py_err)
}

#[pyfunction]
fn jain_index(airtimes: Vec<f64>) -> PyResult<f64> {
    fairness::jain_index(&airtimes).map_err(py_err)
}

#[pyfunction]
fn fi_lower_bound(k: usize, num_users: usize) -> PyResult<f64> {
    fairness::fi_lower_bound(k, num_users).map_err(py_err)
}

/// Pooled `(mean, variance)` in seconds of per-user gap lists given in
/// slots; `None` with fewer than two gaps.
#[pyfunction]
fn delay_statistics(gaps: Vec<Vec<u64>>, slot_duration: f64) -> PyResult<Option<(f64, f64)>> {
    let samples = DelaySamples::from_gaps(&gaps).map_err(py_err)?;
    Ok(fairness::delay_statistics(&samples, slot_duration).pooled.map(|d| (d.mean, d.variance)))
}

fn fading_spec(fading: &str, doppler_hz: f64) -> PyResult<FadingSpec> {
    match fading {
        "iid" => Ok(FadingSpec::Iid),
        "gauss_markov" => Ok(FadingSpec::GaussMarkov { doppler_hz, doppler_hz_rb: None }),
        other => Err(PyValueError::new_err(format!("unknown fading mode {other:?}"))),
    }
}

/// Monte Carlo outage sweep. Returns one dict per (SNR, policy), SNR-major.
#[pyfunction]
#[pyo3(signature = (config, snr_db, policies, trials=100_000, seed=1, fading="iid", doppler_hz=15.0, min_outage_events=100, trial_cap=10_000_000))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    config: &PyNetworkConfig,
    snr_db: Vec<f64>,
    policies: Vec<PyRef<'py, PyPolicy>>,
    trials: u64,
    seed: u64,
    fading: &str,
    doppler_hz: f64,
    min_outage_events: u64,
    trial_cap: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mut plan =
        ExperimentPlan::new(config.inner.clone(), snr_db, policies.iter().map(|p| p.inner.clone()).collect());
    plan.trials_per_point = trials;
    plan.base_seed = seed;
    plan.fading = fading_spec(fading, doppler_hz)?;
    plan.min_outage_events = min_outage_events;
    plan.trial_cap = trial_cap;
    let rows = py.detach(|| simulator::run_sweep(&plan)).map_err(py_err)?;
    rows.iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("snr_db", r.snr_db)?;
            d.set_item("policy", &r.policy)?;
            d.set_item("outage", r.outage)?;
            d.set_item("ci_low", r.ci_low)?;
            d.set_item("ci_high", r.ci_high)?;
            d.set_item("analytic", r.analytic)?;
            d.set_item("slots", r.slots)?;
            d.set_item("outage_events", r.outage_events)?;
            d.set_item("cap_hit", r.cap_hit)?;
            d.set_item("fi_longrun", r.fi_longrun)?;
            d.set_item("delay_mean", r.delay_mean)?;
            d.set_item("delay_var", r.delay_var)?;
            Ok(d)
        })
        .collect()
}

/// Sliding-window Jain index under correlated fading at one SNR. Windows
/// are in normalized Doppler units.
#[pyfunction]
#[pyo3(signature = (config, snr_db, policies, windows, trials=100_000, seed=1, doppler_hz=15.0))]
#[allow(clippy::too_many_arguments)]
fn fairness_experiment<'py>(
    py: Python<'py>,
    config: &PyNetworkConfig,
    snr_db: f64,
    policies: Vec<PyRef<'py, PyPolicy>>,
    windows: Vec<f64>,
    trials: u64,
    seed: u64,
    doppler_hz: f64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mut plan =
        ExperimentPlan::new(config.inner.clone(), vec![snr_db], policies.iter().map(|p| p.inner.clone()).collect());
    plan.trials_per_point = trials;
    plan.base_seed = seed;
    plan.fading = FadingSpec::GaussMarkov { doppler_hz, doppler_hz_rb: None };
    plan.fairness_windows = windows;
    let curves = py.detach(|| simulator::run_fairness_experiment(&plan)).map_err(py_err)?;
    curves
        .iter()
        .map(|c| {
            let d = PyDict::new(py);
            d.set_item("policy", &c.policy)?;
            d.set_item("window_units", c.window_units.clone())?;
            d.set_item("window_slots", c.window_slots.clone())?;
            d.set_item("mean_fi", c.mean_fi.clone())?;
            d.set_item("fi_longrun", c.fi_longrun)?;
            d.set_item("delay_mean", c.delay_mean)?;
            d.set_item("delay_var", c.delay_var)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn relaysched(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetworkConfig>()?;
    m.add_class::<PyChannelRealization>()?;
    m.add_class::<PyFadingProcess>()?;
    m.add_class::<PyPolicy>()?;
    m.add_function(wrap_pyfunction!(select_relay_min_max, m)?)?;
    m.add_function(wrap_pyfunction!(select_relay_method_theta, m)?)?;
    m.add_function(wrap_pyfunction!(is_outage, m)?)?;
    m.add_function(wrap_pyfunction!(make_grouping, m)?)?;
    m.add_function(wrap_pyfunction!(schedule, m)?)?;
    m.add_function(wrap_pyfunction!(outage_exact, m)?)?;
    m.add_function(wrap_pyfunction!(outage_tdma, m)?)?;
    m.add_function(wrap_pyfunction!(outage_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(outage_relaxed_tdma, m)?)?;
    m.add_function(wrap_pyfunction!(power_gap_db, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_diversity_order, m)?)?;
    m.add_function(wrap_pyfunction!(jain_index, m)?)?;
    m.add_function(wrap_pyfunction!(fi_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(delay_statistics, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(fairness_experiment, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
