//! Python bindings: source terms, machine code, host programs, compilation,
//! the embeddings, kernel partitions and the property checks.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use stagelab::cli::run_checks;
use stagelab::embedding::Embedding;
use stagelab::host::parse_host_program;
use stagelab::kernel_tools::{compare_staging, kernel_classes, CompilerKind, Corpus};
use stagelab::machine::{format_machine, parse_machine, run_machine};
use stagelab::staged_source::{check_membership, parse_source, pretty};
use stagelab::{CompiledProgram, Env, RunResult, SafetyJudgment, DEFAULT_FUEL};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A program of the staged source language.
#[pyclass(name = "SourceTerm", frozen, eq, hash, from_py_object)]
#[derive(Clone, PartialEq, Eq, Hash)]
struct PySourceTerm(stagelab::SourceTerm);

#[pymethods]
impl PySourceTerm {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        parse_source(text).map(PySourceTerm).map_err(value_error)
    }

    /// Whether escapes are closed, i.e. the term is a source program.
    fn is_member(&self) -> bool {
        check_membership(&self.0).is_ok()
    }

    fn free_vars(&self) -> Vec<String> {
        self.0.free_vars().into_iter().map(|v| v.to_string()).collect()
    }

    fn size(&self) -> usize {
        self.0.size()
    }

    fn depth(&self) -> usize {
        self.0.depth()
    }

    fn __str__(&self) -> String {
        pretty(&self.0)
    }

    fn __repr__(&self) -> String {
        format!("SourceTerm({:?})", pretty(&self.0))
    }
}

/// Validated stack-machine code.
#[pyclass(name = "MachineCode", frozen, eq, hash, skip_from_py_object)]
#[derive(Clone, PartialEq, Eq, Hash)]
struct PyMachineCode(stagelab::MachineCode);

#[pymethods]
impl PyMachineCode {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        parse_machine(text).map(PyMachineCode).map_err(value_error)
    }

    fn instructions(&self) -> Vec<String> {
        self.0.instrs().iter().map(|i| i.to_string()).collect()
    }

    /// Runs under `env`; returns the value, or `"TRAP"` / `"FUEL"`.
    #[pyo3(signature = (env = None, fuel = DEFAULT_FUEL))]
    fn run<'py>(&self, py: Python<'py>, env: Option<Vec<(String, i64)>>, fuel: u64) -> PyResult<Bound<'py, PyAny>> {
        let mut e = Env::new();
        for (k, v) in env.unwrap_or_default() {
            e.bind(stagelab::Ident::new(&k).map_err(value_error)?, v);
        }
        Ok(match run_machine(&self.0, &e, fuel) {
            RunResult::Value(v) => v.into_pyobject(py)?.into_any(),
            other => other.to_string().into_pyobject(py)?.into_any(),
        })
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __str__(&self) -> String {
        format_machine(&self.0)
    }

    fn __repr__(&self) -> String {
        format!("MachineCode({:?})", format_machine(&self.0))
    }
}

/// Outcome of a compiler: `kind` is one of code, unsafe, bottom, error.
#[pyclass(name = "CompiledProgram", frozen, eq, hash, skip_from_py_object)]
#[derive(Clone, PartialEq, Eq, Hash)]
struct PyCompiled(CompiledProgram);

#[pymethods]
impl PyCompiled {
    #[getter]
    fn kind(&self) -> &'static str {
        self.0.kind().name()
    }

    #[getter]
    fn code(&self) -> Option<PyMachineCode> {
        self.0.code().cloned().map(PyMachineCode)
    }

    #[getter]
    fn message(&self) -> Option<String> {
        match &self.0 {
            CompiledProgram::Error(m) => Some(m.clone()),
            _ => None,
        }
    }

    fn __str__(&self) -> String {
        match &self.0 {
            CompiledProgram::Code(c) => format_machine(c),
            other => other.to_string(),
        }
    }

    fn __repr__(&self) -> String {
        format!("CompiledProgram({})", self.0.kind().name())
    }
}

/// A host-language program `(emit e)`, kept as its s-expression text.
#[pyclass(name = "HostProgram", frozen, eq, hash, skip_from_py_object)]
#[derive(Clone, PartialEq, Eq, Hash)]
struct PyHostProgram(String);

#[pymethods]
impl PyHostProgram {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        let p = parse_host_program(text).map_err(value_error)?;
        Ok(PyHostProgram(p.to_string()))
    }

    #[pyo3(signature = (fuel = DEFAULT_FUEL))]
    fn compile(&self, fuel: u64) -> PyCompiled {
        let p = parse_host_program(&self.0).expect("stored text parses");
        PyCompiled(stagelab::compile_u(&p, fuel))
    }

    fn __str__(&self) -> String {
        self.0.clone()
    }

    fn __repr__(&self) -> String {
        format!("HostProgram({:?})", self.0)
    }
}

#[derive(FromPyObject)]
enum SourceArg {
    Term(PySourceTerm),
    Text(String),
}

impl SourceArg {
    fn term(self) -> PyResult<stagelab::SourceTerm> {
        match self {
            SourceArg::Term(t) => Ok(t.0),
            SourceArg::Text(s) => parse_source(&s).map_err(value_error),
        }
    }
}

#[pyfunction]
fn parse(text: &str) -> PyResult<PySourceTerm> {
    PySourceTerm::new(text)
}

/// True when `text` parses and is a source program.
#[pyfunction]
fn member(text: &str) -> bool {
    stagelab::staged_source::member_la(text)
}

#[pyfunction]
#[pyo3(signature = (program, fuel = DEFAULT_FUEL))]
fn compile_a(program: SourceArg, fuel: u64) -> PyResult<PyCompiled> {
    Ok(PyCompiled(stagelab::compile_a(&program.term()?, fuel)))
}

#[pyfunction]
#[pyo3(signature = (program, fuel = DEFAULT_FUEL))]
fn compile_a_safe(program: SourceArg, fuel: u64) -> PyResult<PyCompiled> {
    Ok(PyCompiled(stagelab::compile_a_safe(&program.term()?, fuel)))
}

/// `"int"` or `"bool"` for safe programs, `None` otherwise.
#[pyfunction]
fn typecheck(program: SourceArg) -> PyResult<Option<String>> {
    Ok(match stagelab::typecheck(&program.term()?) {
        SafetyJudgment::Safe(ty) => Some(ty.to_string()),
        SafetyJudgment::NotSafe(_) => None,
    })
}

#[pyfunction]
#[pyo3(signature = (code, env = None, fuel = DEFAULT_FUEL))]
fn run<'py>(py: Python<'py>, code: &str, env: Option<Vec<(String, i64)>>, fuel: u64) -> PyResult<Bound<'py, PyAny>> {
    PyMachineCode::new(code)?.run(py, env, fuel)
}

fn embedding(variant: &str) -> PyResult<Embedding> {
    Embedding::from_name(variant).ok_or_else(|| value_error(format!("unknown embedding {variant:?}")))
}

#[pyfunction]
#[pyo3(signature = (program, variant = "stage"))]
fn embed(program: SourceArg, variant: &str) -> PyResult<PyHostProgram> {
    let term = program.term()?;
    check_membership(&term).map_err(value_error)?;
    Ok(PyHostProgram(embedding(variant)?.embed(&term).to_string()))
}

#[pyfunction]
#[pyo3(signature = (program, fuel = DEFAULT_FUEL))]
fn compile_u(program: &str, fuel: u64) -> PyResult<PyCompiled> {
    Ok(PyHostProgram::new(program)?.compile(fuel))
}

fn compiler(name: &str) -> PyResult<CompilerKind> {
    CompilerKind::from_name(name).ok_or_else(|| value_error(format!("unknown compiler {name:?}")))
}

fn json_to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_error)?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Kernel partition of `programs` (one source text per entry) as a dict
/// with `classes` and `unmapped`.
#[pyfunction]
#[pyo3(signature = (programs, compiler_name = "a", fuel = DEFAULT_FUEL))]
fn kernel<'py>(py: Python<'py>, programs: Vec<String>, compiler_name: &str, fuel: u64) -> PyResult<Bound<'py, PyAny>> {
    let corpus = Corpus::parse(&programs.join("\n")).map_err(value_error)?;
    json_to_py(py, &kernel_classes(&corpus, compiler(compiler_name)?, fuel))
}

#[pyfunction]
#[pyo3(signature = (programs, first, second, fuel = DEFAULT_FUEL))]
fn compare<'py>(py: Python<'py>, programs: Vec<String>, first: &str, second: &str, fuel: u64) -> PyResult<Bound<'py, PyAny>> {
    let corpus = Corpus::parse(&programs.join("\n")).map_err(value_error)?;
    json_to_py(py, &compare_staging(&corpus, compiler(first)?, compiler(second)?, fuel))
}

/// Runs a check suite (`semantics`, `stage`, `safety`, `realizable` or
/// `all`) over `programs`, or over `generate` generated programs.
#[pyfunction]
#[pyo3(signature = (suite = "all", programs = None, generate = 1000, seed = 0, fuel = DEFAULT_FUEL))]
fn check<'py>(
    py: Python<'py>,
    suite: &str,
    programs: Option<Vec<String>>,
    generate: usize,
    seed: u64,
    fuel: u64,
) -> PyResult<Bound<'py, PyDict>> {
    if !["semantics", "stage", "safety", "realizable", "all"].contains(&suite) {
        return Err(value_error(format!("unknown check suite {suite:?}")));
    }
    let terms = match programs {
        Some(ps) => {
            let corpus = Corpus::parse(&ps.join("\n")).map_err(value_error)?;
            for e in &corpus.entries {
                check_membership(&e.term).map_err(value_error)?;
            }
            Some(corpus.terms())
        }
        None => None,
    };
    let reports = run_checks(suite, terms.as_deref(), generate, seed, None, fuel);
    let out = PyDict::new(py);
    out.set_item("ok", reports.iter().all(|r| r.ok()))?;
    out.set_item("reports", json_to_py(py, &reports)?)?;
    Ok(out)
}

#[pymodule]
fn pystagelab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("DEFAULT_FUEL", DEFAULT_FUEL)?;
    m.add_class::<PySourceTerm>()?;
    m.add_class::<PyMachineCode>()?;
    m.add_class::<PyCompiled>()?;
    m.add_class::<PyHostProgram>()?;
    m.add_function(wrap_pyfunction!(parse, m)?)?;
    m.add_function(wrap_pyfunction!(member, m)?)?;
    m.add_function(wrap_pyfunction!(compile_a, m)?)?;
    m.add_function(wrap_pyfunction!(compile_a_safe, m)?)?;
    m.add_function(wrap_pyfunction!(typecheck, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(embed, m)?)?;
    m.add_function(wrap_pyfunction!(compile_u, m)?)?;
    m.add_function(wrap_pyfunction!(kernel, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    Ok(())
}
