//! Acceptance suite. Each test covers one numbered criterion and prints a
//! single `criterion N (...): PASS|FAIL` line; run with `--nocapture` to see
//! the lines for passing tests too.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::AssertUnwindSafe;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use num::rational::BigRational;
use num::{BigInt, One, ToPrimitive};
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

use planharness::config::{parse_config, RunConfig};
use planharness::dataset::{load_corpus, Corpus, CorpusFormat, SourceDataset, Task};
use planharness::gateway::{
    CacheMode, Gateway, MockBackend, MockRule, PromptMatcher, ReplayCache,
};
use planharness::metrics::{
    ast_match, codebleu, dataflow_match, extract_dataflow, parse_syntax_tree, pass_at_k_single,
    python_keywords, CodeBleuWeights, DataflowGraph, SyntaxTree, TreeNode,
};
use planharness::pipeline::{run_suite, Pipeline};
use planharness::prompt::{
    load_pack, render_cot_prompt, render_groundtruth_planning_prompt,
    render_implementation_prompt, render_one_phase_prompt, render_planning_prompt, Exemplar,
    ExemplarPack, PackStyle, Plan, DEFAULT_STEP_MARKER,
};
use planharness::report::render_table;
use planharness::sandbox::{
    run_candidate, ResourceLimits, RunnerConfig, SuiteKind, VerdictStatus,
};
use planharness::score::{score_and_write, ScoreParams, SuiteSummary};

fn criterion(number: u32, name: &str, body: impl FnOnce()) {
    let result = std::panic::catch_unwind(AssertUnwindSafe(body));
    match &result {
        Ok(()) => println!("criterion {number} ({name}): PASS"),
        Err(_) => println!("criterion {number} ({name}): FAIL"),
    }
    if let Err(payload) = result {
        std::panic::resume_unwind(payload);
    }
}

fn manifest_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).to_path_buf()
}

fn fixture(name: &str) -> PathBuf {
    manifest_dir().join("tests/fixtures").join(name)
}

// --- criterion 1: estimator vs enumeration and Monte-Carlo oracles ---

/// Exhaustive oracle: walk every k-subset of n candidates (as bitmasks) and
/// count how many contain at least one of the first c (correct) candidates.
fn enumeration_oracle(n: u32, c: u32, k: u32) -> f64 {
    let correct_mask: u32 = (1u32 << c) - 1;
    let mut total = 0u64;
    let mut hits = 0u64;
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() != k {
            continue;
        }
        total += 1;
        if mask & correct_mask != 0 {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

/// Monte-Carlo oracle: draw `min(c, k)` distinct positions out of n (the
/// smaller of the two symmetric roles) and count draws that land inside the
/// other role's region. Early exit on first hit keeps trials cheap.
fn monte_carlo_oracle(rng: &mut SmallRng, n: u64, c: u64, k: u64, trials: u64) -> f64 {
    let m = c.min(k) as usize;
    let other = c.max(k) as usize;
    if m == 0 {
        return 0.0;
    }
    let mut hits = 0u64;
    let mut seen: Vec<usize> = Vec::with_capacity(m);
    for _ in 0..trials {
        seen.clear();
        while seen.len() < m {
            let pos = rng.gen_range(0..n as usize);
            if seen.contains(&pos) {
                continue;
            }
            if pos < other {
                hits += 1;
                break;
            }
            seen.push(pos);
        }
    }
    hits as f64 / trials as f64
}

#[test]
fn criterion_1_estimator_oracles() {
    criterion(1, "pass@k estimator vs enumeration and Monte-Carlo", || {
        let started = Instant::now();
        for n in 1u32..=12 {
            for c in 0..=n {
                for k in 1..=n {
                    let oracle = enumeration_oracle(n, c, k);
                    let value = pass_at_k_single(n as u64, c as u64, k as u64).unwrap();
                    assert!(
                        (value - oracle).abs() <= 1e-12,
                        "n={n} c={c} k={k}: {value} vs oracle {oracle}"
                    );
                }
            }
        }
        let mut rng = SmallRng::seed_from_u64(0x5eed_cafe);
        for case in 0..50 {
            let n = rng.gen_range(1..=200u64);
            let c = rng.gen_range(0..=n);
            let k = rng.gen_range(1..=n);
            let estimate = monte_carlo_oracle(&mut rng, n, c, k, 1_000_000);
            let value = pass_at_k_single(n, c, k).unwrap();
            assert!(
                (value - estimate).abs() < 0.01,
                "case {case}: n={n} c={c} k={k}: {value} vs Monte-Carlo {estimate}"
            );
        }
        assert!(
            started.elapsed().as_secs_f64() < 30.0,
            "estimator oracle checks exceeded the 30 s budget"
        );
    });
}

// --- criterion 2: estimator stability on large arguments ---

#[test]
fn criterion_2_estimator_stability() {
    criterion(2, "pass@k stability vs exact rational arithmetic", || {
        let (n, c, k) = (10_000i64, 17i64, 100i64);
        let mut miss = BigRational::one();
        for i in 0..c {
            miss *= BigRational::new(BigInt::from(n - k - i), BigInt::from(n - i));
        }
        let exact = (BigRational::one() - miss).to_f64().unwrap();
        let value = pass_at_k_single(n as u64, c as u64, k as u64).unwrap();
        assert!((0.0..=1.0).contains(&value), "out of range: {value}");
        assert!(
            (value - exact).abs() < 1e-9,
            "{value} vs exact rational {exact}"
        );
    });
}

// --- criterion 3: CodeBLEU identity and component bounds ---

#[test]
fn criterion_3_codebleu_identity_and_bounds() {
    criterion(3, "CodeBLEU identity and component bounds", || {
        let started = Instant::now();
        let corpus = load_corpus(&fixture("mbpp_mini_50.jsonl"), CorpusFormat::MbppJsonl).unwrap();
        assert_eq!(corpus.tasks.len(), 50);
        let keywords = python_keywords();
        let weights = CodeBleuWeights::default();
        for task in &corpus.tasks {
            let source = task.reference_solution.as_str();
            let report = codebleu(source, source, &weights, &keywords).unwrap();
            assert_eq!(
                report.codebleu, 1.0,
                "self-similarity not exactly 1.0 for {}",
                task.task_id
            );
        }
        let mut rng = SmallRng::seed_from_u64(7);
        for _ in 0..200 {
            let i = rng.gen_range(0..corpus.tasks.len());
            let mut j = rng.gen_range(0..corpus.tasks.len());
            while j == i {
                j = rng.gen_range(0..corpus.tasks.len());
            }
            let candidate = corpus.tasks[i].reference_solution.as_str();
            let reference = corpus.tasks[j].reference_solution.as_str();
            let report = codebleu(candidate, reference, &weights, &keywords).unwrap();
            for (component, value) in [
                ("bleu", report.bleu),
                ("weighted_bleu", report.weighted_bleu),
                ("ast_match", report.ast_match),
                ("dataflow_match", report.dataflow_match),
                ("codebleu", report.codebleu),
            ] {
                assert!(
                    (0.0..=1.0).contains(&value),
                    "{component} out of bounds for pair ({i}, {j}): {value}"
                );
            }
        }
        assert!(
            started.elapsed().as_secs_f64() < 60.0,
            "CodeBLEU checks exceeded the 60 s budget"
        );
    });
}

// --- criterion 4: AST and dataflow component oracles ---

/// Independent subtree oracle: structural comparison of whole subtrees with
/// greedy multiset consumption, no fingerprint hashing.
fn brute_force_ast_match(candidate: &SyntaxTree, reference: &SyntaxTree) -> f64 {
    fn internal_nodes<'a>(node: &'a TreeNode, out: &mut Vec<&'a TreeNode>) {
        if !node.children.is_empty() {
            out.push(node);
        }
        for child in &node.children {
            internal_nodes(child, out);
        }
    }
    fn equal(a: &TreeNode, b: &TreeNode) -> bool {
        a.kind == b.kind
            && a.children.len() == b.children.len()
            && a.children.iter().zip(&b.children).all(|(x, y)| equal(x, y))
    }
    let mut ref_nodes = Vec::new();
    internal_nodes(&reference.root, &mut ref_nodes);
    let mut cand_nodes = Vec::new();
    internal_nodes(&candidate.root, &mut cand_nodes);
    if ref_nodes.is_empty() {
        return 1.0;
    }
    let mut used = vec![false; cand_nodes.len()];
    let mut matched = 0usize;
    for r in &ref_nodes {
        for (i, c) in cand_nodes.iter().enumerate() {
            if !used[i] && equal(r, c) {
                used[i] = true;
                matched += 1;
                break;
            }
        }
    }
    matched as f64 / ref_nodes.len() as f64
}

#[test]
fn criterion_4_ast_and_dataflow_oracles() {
    criterion(4, "AST subtree and def-use dataflow oracles", || {
        let ast_programs = [
            "x = 1\n",
            "def f(a, b):\n    return a + b\n",
            "def g(xs):\n    t = 0\n    for x in xs:\n        t += x\n    return t\n",
            "if x > 0:\n    y = x\nelse:\n    y = -x\n",
            "def h(s):\n    return [c for c in s if c != ' ']\n",
        ];
        let mut ast_pairs = 0;
        for (i, r) in ast_programs.iter().enumerate() {
            for (j, c) in ast_programs.iter().enumerate() {
                if i == j {
                    continue;
                }
                let rt = parse_syntax_tree(r).unwrap();
                let ct = parse_syntax_tree(c).unwrap();
                let fast = ast_match(&ct, &rt);
                let slow = brute_force_ast_match(&ct, &rt);
                assert_eq!(fast, slow, "ast_match diverges on pair ({i}, {j})");
                ast_pairs += 1;
            }
        }
        assert_eq!(ast_pairs, 20);

        // Hand-traced def-use edges `(def_site, use_site, variable_index)`;
        // sites are statement ordinals in traversal order, variables are
        // numbered by first occurrence.
        type TracedProgram = (&'static str, BTreeSet<(usize, usize, usize)>);
        let dataflow_programs: [TracedProgram; 5] = [
            // 0: x=1  1: y=x
            ("x = 1\ny = x\n", BTreeSet::from([(0, 1, 0)])),
            // 0: def f(x)  1: y=x+1  2: return y
            (
                "def f(x):\n    y = x + 1\n    return y\n",
                BTreeSet::from([(0, 1, 0), (1, 2, 1)]),
            ),
            // 0: x=1  1: if c (unknown name, no edge)  2: x=2  3: y=x
            // both the fallthrough and the then-arm definition reach site 3
            (
                "x = 1\nif c:\n    x = 2\ny = x\n",
                BTreeSet::from([(0, 3, 0), (2, 3, 0)]),
            ),
            // 0: a=1  1: b=a  2: c=b+a
            (
                "a = 1\nb = a\nc = b + a\n",
                BTreeSet::from([(0, 1, 0), (0, 2, 0), (1, 2, 1)]),
            ),
            // 0: def f(xs)  1: total=0  2: for x in xs  3: total+=x
            // 4: return total; after the loop merge both defs of total reach
            (
                "def f(xs):\n    total = 0\n    for x in xs:\n        total += x\n    return total\n",
                BTreeSet::from([(0, 2, 0), (1, 3, 1), (2, 3, 2), (1, 4, 1), (3, 4, 1)]),
            ),
        ];
        for (source, expected) in &dataflow_programs {
            let graph = extract_dataflow(source).unwrap();
            assert_eq!(&graph.edges, expected, "hand trace diverges for {source:?}");
        }
        let mut flow_pairs = 0;
        for (i, (cand_src, cand_edges)) in dataflow_programs.iter().enumerate() {
            for (j, (ref_src, ref_edges)) in dataflow_programs.iter().enumerate() {
                if i == j {
                    continue;
                }
                let oracle =
                    ref_edges.intersection(cand_edges).count() as f64 / ref_edges.len() as f64;
                let cand = extract_dataflow(cand_src).unwrap();
                let reference = extract_dataflow(ref_src).unwrap();
                let (value, flagged) = dataflow_match(&cand, &reference);
                assert!(!flagged);
                assert_eq!(value, oracle, "dataflow_match diverges on pair ({i}, {j})");
                flow_pairs += 1;
            }
        }
        assert_eq!(flow_pairs, 20);

        let empty = DataflowGraph::default();
        let cand = extract_dataflow("x = 1\ny = x\n").unwrap();
        assert_eq!(dataflow_match(&cand, &empty), (1.0, true));
    });
}

// --- criterion 5: golden prompt files ---

fn task_from_exemplar(pack: &ExemplarPack, index: usize) -> Task {
    let ex = &pack.exemplars[index];
    Task {
        task_id: ex.source_task_id.clone().unwrap_or_else(|| "task".into()),
        intent: ex.intent.clone(),
        signature: ex.signature.clone(),
        entry_point: None,
        raw_prompt: None,
        public_tests: vec![],
        hidden_tests: vec![],
        extended_tests: None,
        reference_solution: ex.code.clone().unwrap_or_default(),
        source_dataset: SourceDataset::Humaneval,
        extras: BTreeMap::new(),
    }
}

#[test]
fn criterion_5_golden_prompts() {
    criterion(5, "rendered prompts byte-identical to goldens", || {
        let packs = manifest_dir().join("assets/packs");
        let golden = |name: &str| -> String {
            std::fs::read_to_string(manifest_dir().join("tests/golden").join(name)).unwrap()
        };

        let standard = load_pack(&packs.join("humaneval_standard_8.toml")).unwrap();
        let search = task_from_exemplar(&standard, 7);
        let mut context = standard.clone();
        context.exemplars.truncate(7);
        let rendered = render_planning_prompt(&context, &search).unwrap();
        assert!(rendered.text.ends_with("Let's think step by step.\n"));
        assert_eq!(rendered.text, golden("planning_humaneval_search.txt"));

        let mbpp = load_pack(&packs.join("mbpp_standard_8.toml")).unwrap();
        let mbpp_task = task_from_exemplar(&mbpp, 7);
        let mut mbpp_context = mbpp.clone();
        mbpp_context.exemplars.truncate(7);
        let rendered = render_planning_prompt(&mbpp_context, &mbpp_task).unwrap();
        assert_eq!(rendered.text, golden("planning_mbpp_move_zeroes.txt"));

        let cot = load_pack(&packs.join("humaneval_cot_8.toml")).unwrap();
        let rendered = render_cot_prompt(&cot, &search).unwrap();
        assert_eq!(rendered.text, golden("cot_search.txt"));

        let concise = load_pack(&packs.join("humaneval_concise_8.toml")).unwrap();
        let rendered = render_planning_prompt(&concise, &search).unwrap();
        assert_eq!(rendered.text, golden("concise_search.txt"));

        let one_phase = load_pack(&packs.join("one_phase_8.toml")).unwrap();
        let rendered = render_one_phase_prompt(&one_phase, &search).unwrap();
        assert_eq!(rendered.text, golden("one_phase_search.txt"));

        let groundtruth = load_pack(&packs.join("groundtruth_plan.toml")).unwrap();
        let encrypt = task_from_exemplar(&groundtruth, 0);
        let rendered = render_groundtruth_planning_prompt(&groundtruth, &encrypt).unwrap();
        assert!(rendered.text.ends_with("Write steps according to the code.\n"));
        assert_eq!(rendered.text, golden("groundtruth_encrypt.txt"));

        let encrypt_task = task_from_exemplar(&standard, 0);
        let plan = Plan::from_steps(standard.exemplars[0].plan.steps.clone()).unwrap();
        let rendered =
            render_implementation_prompt(&encrypt_task, &plan, &standard.step_marker);
        assert_eq!(rendered.text, golden("implementation_encrypt.txt"));
    });
}

// --- shared machinery for the end-to-end criteria ---

fn toy_pack() -> ExemplarPack {
    ExemplarPack {
        name: "toy_pack".to_string(),
        style: PackStyle::StandardPlan,
        exemplars: vec![Exemplar {
            intent: "Return the sum of two integers.".to_string(),
            signature: None,
            plan: Plan::from_steps(vec![
                "Add the inputs.".to_string(),
                "Return the result.".to_string(),
            ])
            .unwrap(),
            code: None,
            source_task_id: None,
        }],
        step_marker: DEFAULT_STEP_MARKER.to_string(),
    }
}

fn run_config(variant: &str, mode: &str, run_dir: &Path) -> RunConfig {
    let text = format!(
        r#"
[variant]
name = "{variant}"
pack = "unused.toml"
k_shot = 1

[backend]
mode = "{mode}"

[corpus]
path = "unused.jsonl"
format = "humaneval_jsonl"
name = "humaneval_mini_10"

[limits]
run_dir = "{}"
workers = 4
"#,
        run_dir.display()
    );
    parse_config(&text, &[]).unwrap()
}

fn mini_corpus() -> Corpus {
    load_corpus(&fixture("humaneval_mini_10.jsonl"), CorpusFormat::HumanevalJsonl).unwrap()
}

/// Mock with one greedy planning rule plus one implementation rule per task:
/// tasks in `passing` answer with their reference body, the rest raise.
fn scripted_mock(corpus: &Corpus, passing: &BTreeSet<String>) -> MockBackend {
    let mut mock = MockBackend::new().rule(MockRule::new(
        PromptMatcher::PromptEndsWith(format!("{DEFAULT_STEP_MARKER}\n")),
        vec!["1. Compute the expected value.\n2. Return it.\n".to_string()],
    ));
    for task in &corpus.tasks {
        let entry = task.entry_point.as_deref().expect("fixture has entry points");
        let completion = if passing.contains(&task.task_id) {
            task.reference_solution.clone()
        } else {
            "    raise RuntimeError('scripted failure')\n".to_string()
        };
        mock = mock.rule(MockRule::new(
            PromptMatcher::PromptContains(format!("def {entry}(")),
            vec![completion],
        ));
    }
    mock
}

fn score_params() -> ScoreParams {
    ScoreParams {
        ks: vec![1],
        weights: CodeBleuWeights::default(),
        limits: ResourceLimits::default(),
        runner: RunnerConfig::default(),
        suite: SuiteKind::Hidden,
        workers: 4,
    }
}

fn generate_and_score(
    corpus: &Corpus,
    gateway: Arc<Gateway>,
    config: RunConfig,
) -> (PathBuf, SuiteSummary) {
    let variant = config.variant;
    let pipeline = Pipeline::new(gateway, &toy_pack(), config).unwrap();
    let run_dir = run_suite(corpus, &pipeline).unwrap();
    let (_, summary) = score_and_write(&run_dir, corpus, variant, &score_params()).unwrap();
    (run_dir, summary)
}

// --- criterion 6: record/replay determinism ---

#[test]
fn criterion_6_record_replay_determinism() {
    criterion(6, "record-then-replay byte determinism", || {
        let dir = tempfile::tempdir().unwrap();
        let cache_path = dir.path().join("cache.jsonl");
        let corpus = mini_corpus();
        let all: BTreeSet<String> = corpus.tasks.iter().map(|t| t.task_id.clone()).collect();

        let record_gateway = Arc::new(Gateway::new(
            Some(Arc::new(scripted_mock(&corpus, &all))),
            ReplayCache::open(&cache_path).unwrap(),
            CacheMode::Record,
        ));
        let (run1, _) = generate_and_score(
            &corpus,
            record_gateway.clone(),
            run_config("self_plan_two_phase", "record", &dir.path().join("run1")),
        );
        assert!(record_gateway.backend_calls() > 0);

        // the replay gateway still holds a mock, but must never reach it
        let replay_gateway = Arc::new(Gateway::new(
            Some(Arc::new(scripted_mock(&corpus, &all))),
            ReplayCache::open(&cache_path).unwrap(),
            CacheMode::Replay,
        ));
        let (run2, _) = generate_and_score(
            &corpus,
            replay_gateway.clone(),
            run_config("self_plan_two_phase", "replay", &dir.path().join("run2")),
        );
        assert_eq!(replay_gateway.backend_calls(), 0, "replay hit the backend");

        for file in ["records.jsonl", "scores.jsonl"] {
            let a = std::fs::read(run1.join(file)).unwrap();
            let b = std::fs::read(run2.join(file)).unwrap();
            assert!(!a.is_empty());
            assert_eq!(a, b, "{file} differs between record and replay runs");
        }
    });
}

// --- criterion 7: per-variant generation contracts ---

fn toy_task() -> Task {
    Task {
        task_id: "toy/0".to_string(),
        intent: "Write a function to double a number.".to_string(),
        signature: None,
        entry_point: None,
        raw_prompt: None,
        public_tests: vec![],
        hidden_tests: vec!["assert double(2) == 4".to_string()],
        extended_tests: None,
        reference_solution: "def double(n):\n    return 2 * n\n".to_string(),
        source_dataset: SourceDataset::Mbpp,
        extras: BTreeMap::new(),
    }
}

fn toy_pipeline(variant: &str, mock: MockBackend, run_dir: &Path) -> (Arc<Gateway>, Pipeline) {
    let gateway = Arc::new(Gateway::new(
        Some(Arc::new(mock)),
        ReplayCache::in_memory(),
        CacheMode::Passthrough,
    ));
    let config = run_config(variant, "passthrough", run_dir);
    let pipeline = Pipeline::new(gateway.clone(), &toy_pack(), config).unwrap();
    (gateway, pipeline)
}

#[test]
fn criterion_7_variant_contracts() {
    criterion(7, "variant generation contracts", || {
        let dir = tempfile::tempdir().unwrap();
        let plan_rule = MockRule::new(
            PromptMatcher::PromptEndsWith(format!("{DEFAULT_STEP_MARKER}\n")),
            vec!["1. Multiply the input by two.\n2. Return the product.\n".to_string()],
        );
        let code_rule = MockRule::new(
            PromptMatcher::Any,
            vec!["def double(n):\n    return 2 * n\n".to_string()],
        );

        // two-phase: every plan step appears verbatim and in order in the
        // implementation prompt
        let mock = MockBackend::new().rule(plan_rule.clone()).rule(code_rule.clone());
        let (_, pipeline) = toy_pipeline("self_plan_two_phase", mock, &dir.path().join("a"));
        let record = pipeline.run_task(&toy_task()).unwrap();
        let plan = record.plan.as_ref().expect("two-phase record has a plan");
        assert_eq!(plan.steps.len(), 2);
        let mut position = 0;
        for step in &plan.steps {
            let found = record.implementation_prompt[position..]
                .find(step.as_str())
                .unwrap_or_else(|| panic!("step {step:?} missing from implementation prompt"));
            position += found + step.len();
        }

        // direct: no planning request, no step marker anywhere
        let mock = MockBackend::new().rule(code_rule.clone());
        let (gateway, pipeline) = toy_pipeline("direct", mock, &dir.path().join("b"));
        let record = pipeline.run_task(&toy_task()).unwrap();
        assert!(record.plan.is_none());
        assert!(record.planning_prompt.is_none());
        assert!(!record.implementation_prompt.contains(DEFAULT_STEP_MARKER));
        assert_eq!(gateway.backend_calls(), 1);

        // multi-turn: one planning request plus exactly |plan| implementation
        // requests
        let mock = MockBackend::new().rule(plan_rule).rule(MockRule::new(
            PromptMatcher::Any,
            vec!["    return 2 * n\n".to_string()],
        ));
        let (gateway, pipeline) = toy_pipeline("multi_turn", mock, &dir.path().join("c"));
        let record = pipeline.run_task(&toy_task()).unwrap();
        let steps = record.plan.as_ref().unwrap().steps.len();
        assert_eq!(steps, 2);
        assert_eq!(
            gateway.backend_calls(),
            1 + steps as u64,
            "multi-turn must issue exactly one implementation request per step"
        );
    });
}

// --- criterion 8: sandbox timeout, isolation, and failure reporting ---

fn sandbox_task(entry: &str, body: &str, test: &str) -> Task {
    Task {
        task_id: format!("sandbox/{entry}"),
        intent: String::new(),
        signature: None,
        entry_point: Some(entry.to_string()),
        raw_prompt: None,
        public_tests: vec![],
        hidden_tests: vec![test.to_string()],
        extended_tests: None,
        reference_solution: body.to_string(),
        source_dataset: SourceDataset::Mbpp,
        extras: BTreeMap::new(),
    }
}

#[test]
fn criterion_8_sandbox_contracts() {
    criterion(8, "sandbox timeout, isolation, failure detail", || {
        let runner = RunnerConfig::default();
        let limits = ResourceLimits {
            wall_clock_s: 1.0,
            ..ResourceLimits::default()
        };

        let spin = sandbox_task("spin", "", "assert spin() == 1");
        let candidate = "def spin():\n    while True:\n        pass\n";
        let verdict = run_candidate(&spin, candidate, SuiteKind::Hidden, &limits, &runner);
        assert_eq!(verdict.status, VerdictStatus::Timeout);
        assert!(
            verdict.duration_s <= limits.wall_clock_s + 0.5,
            "timeout took {}s, beyond the 0.5s grace",
            verdict.duration_s
        );

        // a file written by one run must be invisible to the next
        let limits = ResourceLimits::default();
        let writer = sandbox_task("leave_marker", "", "assert leave_marker() is True");
        let write_candidate = "def leave_marker():\n    with open('marker.txt', 'w') as f:\n        f.write('x')\n    return True\n";
        let verdict = run_candidate(&writer, write_candidate, SuiteKind::Hidden, &limits, &runner);
        assert_eq!(verdict.status, VerdictStatus::Pass);
        let probe = sandbox_task("find_marker", "", "assert find_marker() is False");
        let probe_candidate = "def find_marker():\n    import os\n    return os.path.exists('marker.txt')\n";
        let verdict = run_candidate(&probe, probe_candidate, SuiteKind::Hidden, &limits, &runner);
        assert_eq!(
            verdict.status,
            VerdictStatus::Pass,
            "marker file from a previous run was visible"
        );

        let wrong = sandbox_task("triple", "", "assert triple(2) == 6");
        let verdict = run_candidate(
            &wrong,
            "def triple(x):\n    return x + 3\n",
            SuiteKind::Hidden,
            &limits,
            &runner,
        );
        assert_eq!(verdict.status, VerdictStatus::Fail);
        assert!(
            verdict.first_failure.is_some(),
            "failing assertion must report which test failed"
        );
    });
}

// --- criterion 9: comparison table with relative improvement ---

#[test]
fn criterion_9_relative_improvement_table() {
    criterion(9, "comparison table relative-improvement cell", || {
        let dir = tempfile::tempdir().unwrap();
        let corpus = mini_corpus();
        let ids: Vec<String> = corpus.tasks.iter().map(|t| t.task_id.clone()).collect();

        let direct_pass: BTreeSet<String> = ids[..4].iter().cloned().collect();
        let gateway = Arc::new(Gateway::new(
            Some(Arc::new(scripted_mock(&corpus, &direct_pass))),
            ReplayCache::in_memory(),
            CacheMode::Passthrough,
        ));
        let (_, direct_summary) = generate_and_score(
            &corpus,
            gateway,
            run_config("direct", "passthrough", &dir.path().join("direct")),
        );
        assert!((direct_summary.pass_at_k["pass@1"] - 0.4).abs() < 1e-12);

        let plan_pass: BTreeSet<String> = ids[..6].iter().cloned().collect();
        let gateway = Arc::new(Gateway::new(
            Some(Arc::new(scripted_mock(&corpus, &plan_pass))),
            ReplayCache::in_memory(),
            CacheMode::Passthrough,
        ));
        let (_, plan_summary) = generate_and_score(
            &corpus,
            gateway,
            run_config("self_plan_two_phase", "passthrough", &dir.path().join("selfplan")),
        );
        assert!((plan_summary.pass_at_k["pass@1"] - 0.6).abs() < 1e-12);

        let table = render_table(&[direct_summary, plan_summary]).unwrap();
        assert!(
            table.contains("+50.0%"),
            "expected a +50.0% improvement cell, got:\n{table}"
        );
    });
}
