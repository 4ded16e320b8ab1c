//! Candidate assembly and isolated execution.
//!
//! A candidate is wrapped in a harness program that syntax-checks it,
//! executes it, then runs the selected test statements in order. The harness
//! prints `@@VERDICT:PASS@@` or `@@VERDICT:FAIL:<test-index>@@` as its last
//! line; the exit code is authoritative (0 pass, 1 assertion failure,
//! 2 runtime error, 3 assembly error), the marker is diagnostic.
//!
//! Each execution gets a fresh temporary working directory, a scrubbed
//! environment, an address-space rlimit, a wall-clock kill, and capped
//! output capture.

use std::io::Read;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::dataset::Task;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceLimits {
    pub wall_clock_s: f64,
    pub memory_mb: u64,
    pub max_output_bytes: usize,
}

impl Default for ResourceLimits {
    fn default() -> Self {
        ResourceLimits {
            wall_clock_s: 10.0,
            memory_mb: 512,
            max_output_bytes: 64 * 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunnerConfig {
    pub command: String,
    pub args: Vec<String>,
    /// Environment variables inherited from the parent process.
    pub env_allowlist: Vec<String>,
}

impl Default for RunnerConfig {
    fn default() -> Self {
        RunnerConfig {
            command: "python3".to_string(),
            args: Vec::new(),
            env_allowlist: vec!["PATH".to_string()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Pass,
    Fail,
    Timeout,
    RuntimeError,
    AssemblyError,
    SandboxError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionVerdict {
    pub status: VerdictStatus,
    pub tests_run: u64,
    pub first_failure: Option<String>,
    pub stdout_trunc: String,
    pub stderr_trunc: String,
    pub duration_s: f64,
}

impl ExecutionVerdict {
    pub fn passed(&self) -> bool {
        self.status == VerdictStatus::Pass
    }

    fn assembly_error(message: &str) -> Self {
        ExecutionVerdict {
            status: VerdictStatus::AssemblyError,
            tests_run: 0,
            first_failure: Some(message.to_string()),
            stdout_trunc: String::new(),
            stderr_trunc: String::new(),
            duration_s: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteKind {
    Hidden,
    Extended,
    Both,
}

pub const PASS_MARKER: &str = "@@VERDICT:PASS@@";
pub const FAIL_MARKER_PREFIX: &str = "@@VERDICT:FAIL:";

fn selected_tests(task: &Task, suite: SuiteKind) -> Vec<String> {
    let extended = || task.extended_tests.clone().unwrap_or_default();
    let mut tests = match suite {
        SuiteKind::Hidden => task.hidden_tests.clone(),
        SuiteKind::Extended => extended(),
        SuiteKind::Both => {
            let mut t = task.hidden_tests.clone();
            t.extend(extended());
            t
        }
    };
    // HumanEval-style suites define check(candidate); drive it explicitly
    if let Some(entry) = &task.entry_point {
        for test in tests.iter_mut() {
            let already_called = test.lines().any(|l| l.starts_with("check("));
            if test.contains("def check(") && !already_called {
                test.push_str(&format!("\ncheck({entry})\n"));
            }
        }
    }
    tests
}

/// Full candidate source: signature + completion body for signature-style
/// datasets (unless the model emitted a complete top-level program),
/// candidate verbatim otherwise.
pub fn full_source(task: &Task, candidate: &str) -> String {
    match &task.signature {
        Some(sig) => {
            let top_level = candidate
                .lines()
                .next()
                .map(|l| l.starts_with("def ") || l.starts_with("import ") || l.starts_with("from "))
                .unwrap_or(false);
            if top_level {
                candidate.to_string()
            } else {
                format!("{sig}\n{candidate}")
            }
        }
        None => candidate.to_string(),
    }
}

/// Assemble the harness program for one candidate and test suite.
pub fn assemble_program(task: &Task, candidate: &str, suite: SuiteKind) -> Result<String> {
    if candidate.trim().is_empty() {
        return Err(Error::Sandbox("empty candidate".to_string()));
    }
    let source = full_source(task, candidate);
    let tests = selected_tests(task, suite);
    let tests_json = serde_json::to_string(&tests).expect("test list serializes");
    let source_json = serde_json::to_string(&source).expect("source serializes");
    let entry_literal = match &task.entry_point {
        Some(e) => serde_json::to_string(e).expect("entry serializes"),
        None => "None".to_string(),
    };
    // JSON string/array/null literals are valid Python literals
    Ok(format!(
        r#"import sys

__CANDIDATE = {source_json}
__TESTS = {tests_json}
__ENTRY = {entry_literal}

def __run():
    print("@@TESTS:%d@@" % len(__TESTS))
    try:
        code = compile(__CANDIDATE, "<candidate>", "exec")
    except SyntaxError as e:
        sys.stderr.write("syntax error: %s\n" % e)
        print("@@VERDICT:ASSEMBLY_ERROR@@")
        sys.exit(3)
    g = {{"__name__": "__main__"}}
    try:
        exec(code, g)
    except BaseException as e:
        sys.stderr.write("candidate raised at import: %r\n" % (e,))
        print("@@VERDICT:FAIL:-1@@")
        sys.exit(2)
    if __ENTRY is not None and __ENTRY not in g:
        sys.stderr.write("entry point %s missing\n" % __ENTRY)
        print("@@VERDICT:FAIL:-1@@")
        sys.exit(2)
    for i, test in enumerate(__TESTS):
        try:
            exec(compile(test, "<test-%d>" % i, "exec"), g)
        except AssertionError as e:
            sys.stderr.write("assertion failed in test %d: %r\n" % (i, e))
            print("@@VERDICT:FAIL:%d@@" % i)
            sys.exit(1)
        except BaseException as e:
            sys.stderr.write("error in test %d: %r\n" % (i, e))
            print("@@VERDICT:FAIL:%d@@" % i)
            sys.exit(2)
    print("@@VERDICT:PASS@@")
    sys.exit(0)

__run()
"#
    ))
}

fn capped_reader<R: Read + Send + 'static>(
    mut reader: R,
    cap: usize,
) -> std::thread::JoinHandle<String> {
    std::thread::spawn(move || {
        let mut captured = Vec::with_capacity(cap.min(8192));
        let mut buf = [0u8; 8192];
        loop {
            match reader.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    if captured.len() < cap {
                        let keep = (cap - captured.len()).min(n);
                        captured.extend_from_slice(&buf[..keep]);
                    }
                    // keep draining past the cap so the child never blocks
                }
            }
        }
        String::from_utf8_lossy(&captured).into_owned()
    })
}

/// Execute an assembled program in an isolated child process.
pub fn execute(
    program: &str,
    limits: &ResourceLimits,
    runner: &RunnerConfig,
) -> Result<ExecutionVerdict> {
    let workdir = tempfile::tempdir().map_err(|e| Error::Sandbox(format!("tempdir: {e}")))?;
    let program_path = workdir.path().join("program.py");
    std::fs::write(&program_path, program)
        .map_err(|e| Error::io(program_path.display().to_string(), e))?;

    let mut command = Command::new(&runner.command);
    command
        .args(&runner.args)
        .arg(&program_path)
        .current_dir(workdir.path())
        .env_clear()
        .env("PYTHONDONTWRITEBYTECODE", "1")
        .env("PYTHONHASHSEED", "0")
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    for key in &runner.env_allowlist {
        if let Ok(value) = std::env::var(key) {
            command.env(key, value);
        }
    }
    let memory_bytes = limits.memory_mb * 1024 * 1024;
    unsafe {
        use std::os::unix::process::CommandExt;
        command.pre_exec(move || {
            // own process group so a timeout kill reaps grandchildren
            libc::setsid();
            let mem = libc::rlimit {
                rlim_cur: memory_bytes,
                rlim_max: memory_bytes,
            };
            libc::setrlimit(libc::RLIMIT_AS, &mem);
            let nproc = libc::rlimit {
                rlim_cur: 128,
                rlim_max: 128,
            };
            libc::setrlimit(libc::RLIMIT_NPROC, &nproc);
            Ok(())
        });
    }

    let start = Instant::now();
    let mut child = match command.spawn() {
        Ok(c) => c,
        Err(e) => {
            return Err(Error::Sandbox(format!(
                "runner `{}` failed to start: {e}",
                runner.command
            )))
        }
    };
    let stdout_handle = capped_reader(child.stdout.take().unwrap(), limits.max_output_bytes);
    let stderr_handle = capped_reader(child.stderr.take().unwrap(), limits.max_output_bytes);

    let deadline = Duration::from_secs_f64(limits.wall_clock_s);
    let mut timed_out = false;
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break Some(status),
            Ok(None) => {
                if start.elapsed() >= deadline {
                    timed_out = true;
                    unsafe {
                        libc::kill(-(child.id() as i32), libc::SIGKILL);
                    }
                    let _ = child.kill();
                    let _ = child.wait();
                    break None;
                }
                std::thread::sleep(Duration::from_millis(10));
            }
            Err(e) => return Err(Error::Sandbox(format!("wait: {e}"))),
        }
    };
    let duration_s = start.elapsed().as_secs_f64();
    let stdout = stdout_handle.join().unwrap_or_default();
    let stderr = stderr_handle.join().unwrap_or_default();

    let declared_tests = stdout
        .lines()
        .find_map(|l| l.strip_prefix("@@TESTS:")?.strip_suffix("@@")?.parse::<u64>().ok())
        .unwrap_or(0);
    let fail_index = stdout.lines().rev().find_map(|l| {
        l.strip_prefix(FAIL_MARKER_PREFIX)?
            .strip_suffix("@@")?
            .parse::<i64>()
            .ok()
    });

    if timed_out {
        return Ok(ExecutionVerdict {
            status: VerdictStatus::Timeout,
            tests_run: 0,
            first_failure: Some(format!("wall clock limit {}s exceeded", limits.wall_clock_s)),
            stdout_trunc: stdout,
            stderr_trunc: stderr,
            duration_s,
        });
    }
    let status = status.expect("non-timeout path has an exit status");
    let (verdict, tests_run, first_failure) = match status.code() {
        Some(0) => (VerdictStatus::Pass, declared_tests, None),
        Some(1) => {
            let failure = fail_index
                .map(|i| format!("test {i} failed"))
                .unwrap_or_else(|| "assertion failed".to_string());
            let detail = stderr.lines().next().unwrap_or("").to_string();
            (
                VerdictStatus::Fail,
                fail_index.map(|i| (i + 1).max(0) as u64).unwrap_or(0),
                Some(if detail.is_empty() {
                    failure
                } else {
                    format!("{failure}: {detail}")
                }),
            )
        }
        Some(3) => (
            VerdictStatus::AssemblyError,
            0,
            Some(stderr.lines().next().unwrap_or("syntax error").to_string()),
        ),
        _ => (
            VerdictStatus::RuntimeError,
            fail_index.map(|i| (i + 1).max(0) as u64).unwrap_or(0),
            Some(stderr.lines().next().unwrap_or("runtime error").to_string()),
        ),
    };
    Ok(ExecutionVerdict {
        status: verdict,
        tests_run,
        first_failure,
        stdout_trunc: stdout,
        stderr_trunc: stderr,
        duration_s,
    })
}

/// Assemble and execute one candidate, folding assembly problems into the
/// verdict. Sandbox-level faults are retried up to twice before surfacing
/// as `SandboxError`.
pub fn run_candidate(
    task: &Task,
    candidate: &str,
    suite: SuiteKind,
    limits: &ResourceLimits,
    runner: &RunnerConfig,
) -> ExecutionVerdict {
    let program = match assemble_program(task, candidate, suite) {
        Ok(p) => p,
        Err(e) => return ExecutionVerdict::assembly_error(&e.to_string()),
    };
    for attempt in 0..3 {
        match execute(&program, limits, runner) {
            Ok(verdict) => return verdict,
            Err(e) if attempt == 2 => {
                return ExecutionVerdict {
                    status: VerdictStatus::SandboxError,
                    tests_run: 0,
                    first_failure: Some(e.to_string()),
                    stdout_trunc: String::new(),
                    stderr_trunc: String::new(),
                    duration_s: 0.0,
                }
            }
            Err(_) => continue,
        }
    }
    unreachable!()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SourceDataset;
    use std::collections::BTreeMap;

    fn limits() -> ResourceLimits {
        ResourceLimits {
            wall_clock_s: 5.0,
            memory_mb: 512,
            max_output_bytes: 64 * 1024,
        }
    }

    fn mbpp_task(tests: Vec<&str>) -> Task {
        Task {
            task_id: "t".to_string(),
            intent: "Write a function to add two numbers.".to_string(),
            signature: None,
            entry_point: None,
            raw_prompt: None,
            public_tests: vec![],
            hidden_tests: tests.into_iter().map(String::from).collect(),
            extended_tests: None,
            reference_solution: String::new(),
            source_dataset: SourceDataset::Mbpp,
            extras: BTreeMap::new(),
        }
    }

    #[test]
    fn passing_candidate_passes() {
        let task = mbpp_task(vec!["assert add(1, 2) == 3", "assert add(0, 0) == 0"]);
        let verdict = run_candidate(
            &task,
            "def add(a, b):\n    return a + b\n",
            SuiteKind::Hidden,
            &limits(),
            &RunnerConfig::default(),
        );
        assert_eq!(verdict.status, VerdictStatus::Pass, "{verdict:?}");
        assert_eq!(verdict.tests_run, 2);
        assert!(verdict.first_failure.is_none());
        assert!(verdict.stdout_trunc.contains(PASS_MARKER));
    }

    #[test]
    fn failing_assertion_populates_first_failure() {
        let task = mbpp_task(vec!["assert add(1, 2) == 4"]);
        let verdict = run_candidate(
            &task,
            "def add(a, b):\n    return a + b\n",
            SuiteKind::Hidden,
            &limits(),
            &RunnerConfig::default(),
        );
        assert_eq!(verdict.status, VerdictStatus::Fail);
        assert!(verdict.first_failure.is_some());
        assert!(verdict.stdout_trunc.contains("@@VERDICT:FAIL:0@@"));
    }

    #[test]
    fn empty_candidate_is_assembly_error() {
        let task = mbpp_task(vec!["assert True"]);
        let verdict = run_candidate(&task, "  \n", SuiteKind::Hidden, &limits(), &RunnerConfig::default());
        assert_eq!(verdict.status, VerdictStatus::AssemblyError);
    }

    #[test]
    fn syntax_error_is_assembly_error() {
        let task = mbpp_task(vec!["assert True"]);
        let verdict = run_candidate(
            &task,
            "def broken(:\n    pass\n",
            SuiteKind::Hidden,
            &limits(),
            &RunnerConfig::default(),
        );
        assert_eq!(verdict.status, VerdictStatus::AssemblyError);
    }

    #[test]
    fn runtime_error_distinguished_from_fail() {
        let task = mbpp_task(vec!["assert add(1, 2) == 3"]);
        let verdict = run_candidate(
            &task,
            "def add(a, b):\n    raise ValueError('boom')\n",
            SuiteKind::Hidden,
            &limits(),
            &RunnerConfig::default(),
        );
        assert_eq!(verdict.status, VerdictStatus::RuntimeError);
    }

    #[test]
    fn infinite_loop_times_out_within_grace() {
        let task = mbpp_task(vec!["assert spin() == 1"]);
        let tight = ResourceLimits {
            wall_clock_s: 1.0,
            ..limits()
        };
        let verdict = run_candidate(
            &task,
            "def spin():\n    while True:\n        pass\n",
            SuiteKind::Hidden,
            &tight,
            &RunnerConfig::default(),
        );
        assert_eq!(verdict.status, VerdictStatus::Timeout);
        assert!(
            (verdict.duration_s - 1.0).abs() < 0.5,
            "duration {} not within 1s ± 0.5s",
            verdict.duration_s
        );
    }

    #[test]
    fn huge_output_is_capped_not_fatal() {
        let task = mbpp_task(vec!["assert noisy() == 1"]);
        let verdict = run_candidate(
            &task,
            "def noisy():\n    for _ in range(200000):\n        print('x' * 80)\n    return 1\n",
            SuiteKind::Hidden,
            &limits(),
            &RunnerConfig::default(),
        );
        assert!(verdict.stdout_trunc.len() <= limits().max_output_bytes);
        assert_eq!(verdict.status, VerdictStatus::Pass);
    }

    #[test]
    fn missing_runner_is_sandbox_error() {
        let task = mbpp_task(vec!["assert True"]);
        let runner = RunnerConfig {
            command: "definitely-not-a-real-binary".to_string(),
            ..Default::default()
        };
        let verdict = run_candidate(&task, "x = 1\n", SuiteKind::Hidden, &limits(), &runner);
        assert_eq!(verdict.status, VerdictStatus::SandboxError);
    }

    #[test]
    fn extended_suite_selected() {
        let mut task = mbpp_task(vec!["assert add(1, 1) == 99"]);
        task.extended_tests = Some(vec!["assert add(2, 2) == 4".to_string()]);
        let verdict = run_candidate(
            &task,
            "def add(a, b):\n    return a + b\n",
            SuiteKind::Extended,
            &limits(),
            &RunnerConfig::default(),
        );
        // the failing hidden test is not part of the extended suite
        assert_eq!(verdict.status, VerdictStatus::Pass);
    }

    #[test]
    fn concurrent_executions_are_isolated() {
        let task = mbpp_task(vec!["assert probe() == 1"]);
        // each candidate writes a sentinel file, then asserts the other's
        // sentinel is invisible
        let make = |name: &str, other: &str| {
            format!(
                "import os\ndef probe():\n    open('{name}', 'w').write('1')\n    return 0 if os.path.exists('{other}') else 1\n"
            )
        };
        let a = make("a.txt", "b.txt");
        let b = make("b.txt", "a.txt");
        let l = limits();
        let t2 = task.clone();
        let handle = std::thread::spawn(move || {
            run_candidate(&t2, &b, SuiteKind::Hidden, &l, &RunnerConfig::default())
        });
        let va = run_candidate(&task, &a, SuiteKind::Hidden, &limits(), &RunnerConfig::default());
        let vb = handle.join().unwrap();
        assert_eq!(va.status, VerdictStatus::Pass);
        assert_eq!(vb.status, VerdictStatus::Pass);
    }

    #[test]
    fn deterministic_program_is_stable_across_runs() {
        let task = mbpp_task(vec!["assert f() == [0, 1, 2]"]);
        let cand = "def f():\n    return sorted({2: 'a', 0: 'b', 1: 'c'})\n";
        let first = run_candidate(&task, cand, SuiteKind::Hidden, &limits(), &RunnerConfig::default());
        for _ in 0..4 {
            let again =
                run_candidate(&task, cand, SuiteKind::Hidden, &limits(), &RunnerConfig::default());
            assert_eq!(again.status, first.status);
        }
    }

    #[test]
    fn humaneval_style_check_suite_driven() {
        let task = Task {
            task_id: "HumanEval/x".to_string(),
            intent: "Add".to_string(),
            signature: Some("def add(a, b):".to_string()),
            entry_point: Some("add".to_string()),
            raw_prompt: Some("def add(a, b):\n    '''Add'''\n".to_string()),
            public_tests: vec![],
            hidden_tests: vec![
                "def check(candidate):\n    assert candidate(1, 2) == 3\n    assert candidate(-1, 1) == 0\n".to_string(),
            ],
            extended_tests: None,
            reference_solution: "    return a + b\n".to_string(),
            source_dataset: SourceDataset::Humaneval,
            extras: BTreeMap::new(),
        };
        let program = assemble_program(&task, "    return a + b\n", SuiteKind::Hidden).unwrap();
        assert!(program.contains("check(add)"));
        let verdict = run_candidate(
            &task,
            "    return a + b\n",
            SuiteKind::Hidden,
            &limits(),
            &RunnerConfig::default(),
        );
        assert_eq!(verdict.status, VerdictStatus::Pass, "{verdict:?}");
    }

    #[test]
    fn mbpp_assembly_contains_each_assert() {
        let task = mbpp_task(vec!["assert a() == 1", "assert b() == 2", "assert c() == 3"]);
        let program = assemble_program(&task, "x = 1\n", SuiteKind::Hidden).unwrap();
        let parsed: serde_json::Value = {
            let line = program
                .lines()
                .find(|l| l.starts_with("__TESTS = "))
                .unwrap()
                .trim_start_matches("__TESTS = ");
            serde_json::from_str(line).unwrap()
        };
        assert_eq!(parsed.as_array().unwrap().len(), 3);
    }
}
