//! Python module `voltsim`: platforms, fault maps, SECDED, models and sweeps.

use std::fmt::Display;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use voltsim::ecc::{self, Codeword72, DecodeStatus};
use voltsim::faults::{self, VulnerabilityClass, VulnerabilityProfile};
use voltsim::fxp::FixedPointFormat;
use voltsim::mnist;
use voltsim::model::{self, Topology, TrainParams};
use voltsim::sweep::{self, ExperimentConfig, Mitigation, ReportFormat, RunOptions, SweepContext};

fn value_err<E: Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn io_err<E: Display>(e: E) -> PyErr {
    PyIOError::new_err(e.to_string())
}

#[pyclass(name = "Platform", module = "voltsim", frozen)]
struct Platform {
    inner: faults::PlatformProfile,
}

#[pymethods]
impl Platform {
    /// Built-in board (`vc707`, `kc705a`, `kc705b`, `zc702`) or a TOML/JSON file path.
    #[new]
    fn new(name_or_path: &str) -> PyResult<Self> {
        let inner = match faults::PlatformProfile::builtin(name_or_path) {
            Ok(p) => p,
            Err(_) => faults::PlatformProfile::load(name_or_path.as_ref()).map_err(value_err)?,
        };
        Ok(Self { inner })
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn bram_count(&self) -> u32 {
        self.inner.bram_count
    }

    #[getter]
    fn v_nom_mv(&self) -> u32 {
        self.inner.v_nom_mv
    }

    #[getter]
    fn v_first_fault_mv(&self) -> u32 {
        self.inner.v_first_fault_mv
    }

    #[getter]
    fn v_crash_mv(&self) -> u32 {
        self.inner.v_crash_mv
    }

    #[getter]
    fn device_mbit(&self) -> f64 {
        self.inner.device_mbit()
    }

    /// Expected faults per Mbit at `v_mv`.
    fn fault_rate(&self, v_mv: u32) -> PyResult<f64> {
        faults::rate_curve(&self.inner, v_mv).map_err(value_err)
    }

    fn power_saving(&self, v_mv: u32) -> PyResult<f64> {
        self.inner.power_model().saving(v_mv).map_err(value_err)
    }

    #[pyo3(signature = (step_mv = sweep::DEFAULT_STEP_MV))]
    fn sweep_voltages(&self, step_mv: u32) -> Vec<u32> {
        self.inner.sweep_voltages(step_mv)
    }

    fn __repr__(&self) -> String {
        format!("Platform({:?}, brams={})", self.inner.name, self.inner.bram_count)
    }
}

#[pyclass(name = "FaultSet", module = "voltsim", frozen)]
struct FaultSet {
    inner: faults::FaultSet,
}

#[pymethods]
impl FaultSet {
    #[getter]
    fn voltage_mv(&self) -> u32 {
        self.inner.voltage_mv
    }

    #[getter]
    fn rate_per_mbit(&self) -> f64 {
        self.inner.rate_per_mbit()
    }

    /// `(bram, bit, stuck)` tuples sorted by address.
    fn cells(&self) -> Vec<(u32, u32, bool)> {
        self.inner.cells.iter().map(|c| (c.bram, c.bit, c.stuck)).collect()
    }

    fn counts_per_bram(&self) -> Vec<u32> {
        self.inner.counts_per_bram()
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        faults::export_faults_csv(&self.inner, &path).map_err(io_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Faulty cells of the whole device at `v_mv` for one fault-map seed.
#[pyfunction]
fn generate_faults(py: Python<'_>, platform: &Platform, v_mv: u32, seed: u64) -> PyResult<FaultSet> {
    let profile = VulnerabilityProfile::for_platform(&platform.inner);
    let inner = py.detach(|| faults::generate_faults(&profile, v_mv, seed)).map_err(value_err)?;
    Ok(FaultSet { inner })
}

#[pyclass(name = "Characterization", module = "voltsim", frozen)]
struct Characterization {
    inner: sweep::Characterization,
}

#[pymethods]
impl Characterization {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        sweep::Characterization::load(&path).map(|inner| Self { inner }).map_err(value_err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(io_err)
    }

    #[getter]
    fn fault_count(&self) -> usize {
        self.inner.fault_count
    }

    fn counts_per_bram(&self) -> Vec<u32> {
        self.inner.counts_per_bram.clone()
    }

    /// `"low"`, `"medium"` or `"high"` per BRAM.
    fn labels(&self) -> Vec<&'static str> {
        self.inner
            .classification
            .labels
            .iter()
            .map(|c| match c {
                VulnerabilityClass::Low => "low",
                VulnerabilityClass::Medium => "medium",
                VulnerabilityClass::High => "high",
            })
            .collect()
    }

    fn high(&self) -> Vec<u32> {
        self.inner.classification.high()
    }
}

/// Fault counts at the crash voltage clustered into Low/Medium/High.
#[pyfunction]
#[pyo3(signature = (platform, seed = 1))]
fn characterize(py: Python<'_>, platform: &Platform, seed: u64) -> PyResult<Characterization> {
    let inner = py.detach(|| sweep::characterize(&platform.inner, seed)).map_err(value_err)?;
    Ok(Characterization { inner })
}

/// SECDED(72,64) codeword of `data` as an int; check bits occupy bits 64..71.
#[pyfunction]
fn encode64(data: u64) -> u128 {
    ecc::encode64(data).to_u128()
}

/// Returns `(data, status, bit)`; status is `clean`, `corrected` or `uncorrectable`.
#[pyfunction]
fn decode72(codeword: u128) -> PyResult<(u64, &'static str, Option<u8>)> {
    if codeword >> ecc::CODEWORD_BITS != 0 {
        return Err(PyValueError::new_err("codeword wider than 72 bits"));
    }
    let (data, status) = ecc::decode72(Codeword72::from_u128(codeword));
    Ok(match status {
        DecodeStatus::Clean => (data, "clean", None),
        DecodeStatus::Corrected(bit) => (data, "corrected", Some(bit)),
        DecodeStatus::Uncorrectable => (data, "uncorrectable", None),
    })
}

#[pyfunction]
fn parity_check_matrix() -> String {
    ecc::parity_check_matrix_text()
}

#[pyclass(name = "Dataset", module = "voltsim", frozen)]
struct Dataset {
    inner: mnist::Dataset,
}

#[pymethods]
impl Dataset {
    /// Row-major 28x28 images concatenated, one label per image.
    #[new]
    fn new(images: &[u8], labels: &[u8]) -> PyResult<Self> {
        mnist::Dataset::new(images.to_vec(), labels.to_vec()).map(|inner| Self { inner }).map_err(value_err)
    }

    /// The 10,000-image test split from a directory of IDX files.
    #[staticmethod]
    fn load_test(dir: PathBuf) -> PyResult<Self> {
        mnist::load_test_split(&dir).map(|inner| Self { inner }).map_err(io_err)
    }

    fn head(&self, n: usize) -> Self {
        Self { inner: self.inner.head(n) }
    }

    fn image<'py>(&self, py: Python<'py>, i: usize) -> PyResult<Bound<'py, PyBytes>> {
        if i >= self.inner.len() {
            return Err(PyValueError::new_err("image index out of range"));
        }
        Ok(PyBytes::new(py, self.inner.image(i)))
    }

    fn labels(&self) -> Vec<u8> {
        self.inner.labels().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(name = "Model", module = "voltsim", frozen)]
struct Model {
    inner: model::MlpModel,
}

#[pymethods]
impl Model {
    /// All-zero model of the given layer sizes (default 784-1024-512-256-128-10).
    #[staticmethod]
    #[pyo3(signature = (layer_sizes = None))]
    fn zeros(layer_sizes: Option<Vec<usize>>) -> PyResult<Self> {
        let topo = match layer_sizes {
            Some(s) => Topology::new(s).map_err(value_err)?,
            None => Topology::default(),
        };
        model::MlpModel::zeros(topo, FixedPointFormat::Q1_7).map(|inner| Self { inner }).map_err(value_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        model::load_model(&path).map(|inner| Self { inner }).map_err(value_err)
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        model::read_model(data).map(|inner| Self { inner }).map_err(value_err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        model::save_model(&self.inner, &path).map_err(io_err)
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        let mut buf = Vec::new();
        model::write_model(&self.inner, &mut buf).map_err(value_err)?;
        Ok(PyBytes::new(py, &buf))
    }

    #[getter]
    fn layer_sizes(&self) -> Vec<usize> {
        self.inner.topology().layer_sizes().to_vec()
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    #[getter]
    fn clean_accuracy(&self) -> Option<f64> {
        self.inner.clean_accuracy
    }

    fn predict(&self, image: &[u8]) -> PyResult<usize> {
        if image.len() != self.inner.topology().inputs() {
            return Err(PyValueError::new_err(format!("expected {} pixels", self.inner.topology().inputs())));
        }
        Ok(self.inner.predict(image))
    }

    fn evaluate(&self, py: Python<'_>, data: &Dataset) -> f64 {
        py.detach(|| model::evaluate(&self.inner, &data.inner))
    }
}

/// Trains the reference MLP on the MNIST files in `mnist_dir` and quantizes it.
#[pyfunction]
#[pyo3(signature = (mnist_dir, epochs = None, seed = 1))]
fn train(py: Python<'_>, mnist_dir: PathBuf, epochs: Option<usize>, seed: u64) -> PyResult<Model> {
    let train = mnist::load_train_split(&mnist_dir).map_err(io_err)?;
    let test = mnist::load_test_split(&mnist_dir).map_err(io_err)?;
    let params = TrainParams {
        epochs: epochs.unwrap_or(TrainParams::default().epochs),
        seed,
        ..TrainParams::default()
    };
    let inner = py
        .detach(|| model::train_reference(&train, &test, &Topology::default(), FixedPointFormat::Q1_7, &params))
        .map_err(value_err)?;
    Ok(Model { inner })
}

#[pyclass(name = "Report", module = "voltsim", frozen)]
struct Report {
    inner: sweep::SweepReport,
}

#[pymethods]
impl Report {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        sweep::read_report(&path).map(|inner| Self { inner }).map_err(value_err)
    }

    #[getter]
    fn clean_accuracy(&self) -> f64 {
        self.inner.clean_accuracy
    }

    #[getter]
    fn v_min_mv(&self) -> u32 {
        self.inner.regions.v_min_mv
    }

    #[getter]
    fn v_crash_mv(&self) -> u32 {
        self.inner.regions.v_crash_mv
    }

    #[getter]
    fn voltages(&self) -> Vec<u32> {
        self.inner.points.iter().map(|p| p.voltage_mv).collect()
    }

    /// `(fault_count_median, loss_pp_median, loss_pp_p90, power_saving)` at `v_mv`.
    fn point(&self, v_mv: u32) -> Option<(f64, f64, f64, f64)> {
        self.inner
            .point(v_mv)
            .map(|p| (p.fault_count_median, p.loss_pp_median, p.loss_pp_p90, p.power_saving))
    }

    fn region(&self, v_mv: u32) -> Option<&'static str> {
        self.inner.regions.region_of(v_mv).map(|r| r.as_str())
    }

    fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.inner).expect("report serializes")
    }

    fn write_json(&self, path: PathBuf) -> PyResult<()> {
        sweep::export_report(&self.inner, ReportFormat::Json, &path).map_err(io_err)
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        sweep::export_report(&self.inner, ReportFormat::Csv, &path).map_err(io_err)
    }
}

/// Sweeps the supply voltage and evaluates `model` on `data` under faults.
///
/// `seeds` may be a list of ints or a string like `"1..10"` (the default).
#[pyfunction]
#[pyo3(signature = (platform, model, data, mitigation = "none", seeds = None, voltages = None, classes = None, images = None, workers = 0, cache_dir = None))]
#[allow(clippy::too_many_arguments)]
fn run_sweep(
    py: Python<'_>,
    platform: &Platform,
    model: &Model,
    data: &Dataset,
    mitigation: &str,
    seeds: Option<&Bound<'_, PyAny>>,
    voltages: Option<Vec<u32>>,
    classes: Option<&Characterization>,
    images: Option<usize>,
    workers: usize,
    cache_dir: Option<PathBuf>,
) -> PyResult<Report> {
    let mitigation: Mitigation = mitigation.parse().map_err(value_err)?;
    let seeds = match seeds {
        None => sweep::parse_seeds("1..10").expect("valid range"),
        Some(s) => match s.extract::<String>() {
            Ok(text) => sweep::parse_seeds(&text).map_err(PyValueError::new_err)?,
            Err(_) => s.extract::<Vec<u64>>()?,
        },
    };
    let mut cfg = ExperimentConfig::new(platform.inner.clone(), mitigation, seeds);
    cfg.voltages_mv = voltages;
    cfg.image_limit = images;
    let classification = classes.map(|c| c.inner.classification.clone());
    let (model, data) = (model.inner.clone(), data.inner.clone());
    let inner = py
        .detach(|| {
            let ctx = SweepContext::new(cfg, model, data, classification)?;
            sweep::run_sweep(&ctx, &RunOptions { workers, cache: cache_dir })
        })
        .map_err(value_err)?;
    Ok(Report { inner })
}

#[pymodule]
#[pyo3(name = "voltsim")]
fn voltsim_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Platform>()?;
    m.add_class::<FaultSet>()?;
    m.add_class::<Characterization>()?;
    m.add_class::<Dataset>()?;
    m.add_class::<Model>()?;
    m.add_class::<Report>()?;
    m.add_function(wrap_pyfunction!(generate_faults, m)?)?;
    m.add_function(wrap_pyfunction!(characterize, m)?)?;
    m.add_function(wrap_pyfunction!(encode64, m)?)?;
    m.add_function(wrap_pyfunction!(decode72, m)?)?;
    m.add_function(wrap_pyfunction!(parity_check_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
