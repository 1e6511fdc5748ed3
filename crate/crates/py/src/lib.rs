//! Python bindings. Results that carry nested records (runs, reports,
//! instances) cross the boundary as JSON strings in the same schema the CLI
//! writes.

use pyo3::exceptions::{PyIndexError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;

use robust_collab::cli::RunOutput;
use robust_collab::learner::{assess, LearnerConstants};
use robust_collab::oracle::{
    DistributionFamily, ImpossibilityCase, PretenderKind, RandomInstanceConfig,
};
use robust_collab::verify::{
    check_balls_in_bins, check_candidate_lemma, check_centralized_impossibility,
    check_collaborative, check_lower_bound_cost, check_pac_sample_size, check_test_lemma,
    PassRule,
};
use robust_collab::{Error, HypothesisClass, Instance, LabeledExample, OracleSet, RunParams};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::NoConsistentGroup { .. } | Error::SearchCap { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        other => PyValueError::new_err(other.to_string()),
    }
}

fn from_json<T: DeserializeOwned>(what: &str, text: &str) -> PyResult<T> {
    serde_json::from_str(text).map_err(|e| PyValueError::new_err(format!("{what}: {e}")))
}

fn to_json<T: serde::Serialize>(value: &T) -> PyResult<String> {
    serde_json::to_string_pretty(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

fn kebab<T: DeserializeOwned>(what: &str, name: &str) -> PyResult<T> {
    serde_json::from_value(serde_json::Value::String(name.to_string()))
        .map_err(|e| PyValueError::new_err(format!("{what}: {e}")))
}

fn constants(json: Option<&str>) -> PyResult<LearnerConstants> {
    let c = match json {
        Some(text) => from_json("constants", text)?,
        None => LearnerConstants::calibrated(),
    };
    c.validate().map_err(py_err)?;
    Ok(c)
}

#[pyclass(name = "HypothesisClass", module = "robust_collab", frozen)]
struct PyHypothesisClass {
    inner: HypothesisClass,
}

#[pymethods]
impl PyHypothesisClass {
    #[staticmethod]
    fn powerset(d: usize) -> PyResult<Self> {
        HypothesisClass::powerset(d).map(|inner| Self { inner }).map_err(py_err)
    }

    #[staticmethod]
    fn threshold(m: usize) -> PyResult<Self> {
        HypothesisClass::threshold(m).map(|inner| Self { inner }).map_err(py_err)
    }

    #[staticmethod]
    fn finite_explicit(domain_size: usize, members: Vec<Vec<bool>>, vc_dimension: usize) -> PyResult<Self> {
        HypothesisClass::finite_explicit(domain_size, members, vc_dimension)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: from_json("class", text)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        to_json(&self.inner)
    }

    #[getter]
    fn domain_size(&self) -> usize {
        self.inner.domain_size()
    }

    #[getter]
    fn vc_dimension(&self) -> usize {
        self.inner.vc_dimension()
    }

    /// Labels of a consistent member over the whole domain, or None.
    fn consistent(&self, examples: Vec<(usize, bool)>) -> PyResult<Option<Vec<bool>>> {
        let examples: Vec<LabeledExample> = examples
            .into_iter()
            .map(|(x, l)| LabeledExample::new(x, l))
            .collect();
        Ok(self.inner.consistent(&examples).map_err(py_err)?.map(|f| f.labels()))
    }

    fn __repr__(&self) -> String {
        format!("HypothesisClass({:?})", self.inner.kind())
    }
}

#[pyclass(name = "Instance", module = "robust_collab")]
struct PyInstance {
    inner: Instance,
}

#[pymethods]
impl PyInstance {
    #[staticmethod]
    fn lower_bound(n: usize, d: usize, eps: f64, eta: f64, seed: u64) -> PyResult<Self> {
        robust_collab::make_lower_bound_instance(n, d, eps, eta, seed)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (n, case = 0))]
    fn impossibility(n: usize, case: u8) -> PyResult<Self> {
        let case = ImpossibilityCase::from_index(case).map_err(py_err)?;
        robust_collab::make_centralized_impossibility_instance(n, case)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (hypothesis_class, n, eta, seed, family = "random-weights", pretender = "random", adversaries = None))]
    fn random(
        hypothesis_class: &PyHypothesisClass,
        n: usize,
        eta: f64,
        seed: u64,
        family: &str,
        pretender: &str,
        adversaries: Option<usize>,
    ) -> PyResult<Self> {
        let config = RandomInstanceConfig {
            class: hypothesis_class.inner.clone(),
            n,
            eta,
            adversaries,
            family: kebab::<DistributionFamily>("family", family)?,
            pretender: kebab::<PretenderKind>("pretender", pretender)?,
        };
        robust_collab::make_random_instance(&config, seed)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Instance::from_json(text).map(|inner| Self { inner }).map_err(py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(py_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.inner.eta()
    }

    #[getter]
    fn hypothesis_class(&self) -> PyHypothesisClass {
        PyHypothesisClass {
            inner: self.inner.class().clone(),
        }
    }

    /// Evaluation-only ground truth.
    #[getter]
    fn truthful_mask(&self) -> Vec<bool> {
        self.inner.truthful_mask().to_vec()
    }

    /// One labeled example `(point, label)` from oracle `i`.
    fn query(&mut self, i: usize) -> PyResult<(usize, bool)> {
        if i >= self.inner.n() {
            return Err(PyIndexError::new_err(format!("oracle {i} of {}", self.inner.n())));
        }
        let ex = self.inner.query(i);
        Ok((ex.point.0, ex.label))
    }

    /// `(per_oracle, total)` samples drawn so far.
    fn ledger(&self) -> (Vec<u64>, u64) {
        let l = self.inner.ledger();
        (l.per_oracle.clone(), l.total)
    }

    /// Runs the robust learner with the instance's declared eta. Returns the
    /// run and its assessment as JSON.
    #[pyo3(signature = (eps, delta, constants_json = None))]
    fn run(&mut self, eps: f64, delta: f64, constants_json: Option<&str>) -> PyResult<String> {
        let c = constants(constants_json)?;
        let params = RunParams {
            eps,
            delta,
            eta: self.inner.eta(),
        };
        let run = robust_collab::run_robust_collaborative(&mut self.inner, &params, &c).map_err(py_err)?;
        let assessment = assess(&self.inner, &run.outputs, eps).map_err(py_err)?;
        to_json(&RunOutput { run, assessment })
    }

    /// Independent single-user learning on every oracle.
    #[pyo3(signature = (eps, delta, constants_json = None))]
    fn baseline(&mut self, eps: f64, delta: f64, constants_json: Option<&str>) -> PyResult<String> {
        let c = constants(constants_json)?;
        let run = robust_collab::run_naive_baseline(&mut self.inner, eps, delta, &c).map_err(py_err)?;
        let assessment = assess(&self.inner, &run.outputs, eps).map_err(py_err)?;
        to_json(&RunOutput { run, assessment })
    }
}

#[pyfunction]
#[pyo3(signature = (d, eps, delta, c_pac = 1.0))]
fn pac_sample_size(d: usize, eps: f64, delta: f64, c_pac: f64) -> PyResult<u64> {
    robust_collab::pac_sample_size(d, eps, delta, c_pac).map_err(py_err)
}

/// The calibrated learner constants as JSON.
#[pyfunction]
fn calibrated_constants() -> PyResult<String> {
    to_json(&LearnerConstants::calibrated())
}

/// Runs a named check with a JSON config in the library's schema and returns
/// the report as JSON.
#[pyfunction]
fn verify(check: &str, config_json: &str, trials: usize, seed: u64) -> PyResult<String> {
    match check {
        "balls-in-bins" => {
            to_json(&check_balls_in_bins(&from_json("config", config_json)?, trials, seed).map_err(py_err)?)
        }
        "candidate-lemma" => {
            to_json(&check_candidate_lemma(&from_json("config", config_json)?, trials, seed).map_err(py_err)?)
        }
        "test-lemma" => {
            to_json(&check_test_lemma(&from_json("config", config_json)?, trials, seed).map_err(py_err)?)
        }
        "pac" => {
            to_json(&check_pac_sample_size(&from_json("config", config_json)?, trials, seed).map_err(py_err)?)
        }
        "collaborative" => to_json(
            &check_collaborative(&from_json("config", config_json)?, trials, seed, PassRule::ThreeSigma)
                .map_err(py_err)?,
        ),
        "lower-bound" => {
            to_json(&check_lower_bound_cost(&from_json("config", config_json)?, trials, seed).map_err(py_err)?)
        }
        "centralized-impossibility" => {
            #[derive(serde::Deserialize)]
            struct N {
                n: usize,
            }
            let N { n } = from_json("config", config_json)?;
            to_json(&check_centralized_impossibility(n).map_err(py_err)?)
        }
        other => Err(PyValueError::new_err(format!("unknown check `{other}`"))),
    }
}

/// Runs the command-line interface in-process: `(exit_code, stdout, stderr)`.
#[pyfunction]
fn cli(argv: Vec<String>) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let args = std::iter::once("robust-collab".to_string()).chain(argv);
    let code = robust_collab::cli::parse_and_dispatch(args, &mut out, &mut err);
    (
        code,
        String::from_utf8_lossy(&out).into_owned(),
        String::from_utf8_lossy(&err).into_owned(),
    )
}

#[pymodule]
#[pyo3(name = "robust_collab")]
fn robust_collab_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyHypothesisClass>()?;
    m.add_class::<PyInstance>()?;
    m.add_function(wrap_pyfunction!(pac_sample_size, m)?)?;
    m.add_function(wrap_pyfunction!(calibrated_constants, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(cli, m)?)?;
    Ok(())
}
